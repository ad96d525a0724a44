//! Central finite-difference check of the BPTT gradients.

use crate::bptt::{backward_sequence, forward_sequence, softmax_xent};
use crate::cells::{init_params, Activation, ParamSet, RecurrentCell, StepCache};
use crate::error::Result;
use crate::linalg::Vector;
use crate::rng::{Purpose, SplitMix64};

/// Denominator floor of the relative error, so that coordinates whose true
/// gradient is at rounding level are judged on absolute error instead.
pub const REL_ERROR_FLOOR: f64 = 1e-6;
/// ReLU arguments closer than this to the kink exclude a coordinate.
pub const KINK_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckConfig {
    pub n_in: usize,
    pub n_h: usize,
    pub n_out: usize,
    pub steps: usize,
    pub eps: f64,
    pub seed: u64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            n_in: 3,
            n_h: 5,
            n_out: 4,
            steps: 4,
            eps: 1e-5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Name and flat index of the worst coordinate.
    pub worst: (String, usize),
    pub checked: usize,
    /// Coordinates excluded by the ReLU kink mask.
    pub masked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Random parameters (initializer output plus Gaussian jitter, so biases and
/// constant-initialized arrays are nonzero), a random input sequence and a
/// random label.
///
/// For relu cells the draw is repeated until every activation argument at the
/// unperturbed point is at least [`KINK_MARGIN`] away from the kink, so the
/// per-coordinate mask only has to catch perturbations that move toward it.
pub fn random_problem(
    cell: &dyn RecurrentCell,
    cfg: &GradCheckConfig,
) -> Result<(ParamSet, Vec<Vector>, usize)> {
    const MAX_DRAWS: u64 = 1000;
    let base = init_params(cell, cfg.n_in, cfg.n_h, cfg.n_out, cfg.seed)?;
    for attempt in 0..MAX_DRAWS {
        let mut params = base.clone();
        let mut rng = SplitMix64::stream(cfg.seed, Purpose::GradCheck, attempt);
        for arr in params.arrays_mut() {
            arr.iter_mut().for_each(|x| *x += 0.3 * rng.normal());
        }
        let seq = (0..cfg.steps)
            .map(|_| Vector::new((0..cfg.n_in).map(|_| rng.uniform(-1.0, 1.0)).collect()))
            .collect::<Result<Vec<_>>>()?;
        let label = rng.below(cfg.n_out);
        let (_, margin) = loss_and_relu_margin(cell, &params, &seq, label)?;
        if margin >= KINK_MARGIN {
            return Ok((params, seq, label));
        }
    }
    Err(crate::Error::invalid(format!(
        "no relu-safe problem found in {MAX_DRAWS} draws"
    )))
}

fn loss_and_relu_margin(
    cell: &dyn RecurrentCell,
    params: &ParamSet,
    seq: &[Vector],
    label: usize,
) -> Result<(f64, f64)> {
    let (logits, caches) = forward_sequence(cell, params, seq)?;
    let margin = if cell.activation() == Activation::Relu {
        smallest_nonzero_relu_argument(&caches)
    } else {
        f64::INFINITY
    };
    Ok((softmax_xent(&logits, label)?.0, margin))
}

/// Smallest nonzero |z| over every argument the case-study activation saw.
/// Exact zeros are locally constant (both sides of the perturbation agree).
fn smallest_nonzero_relu_argument(caches: &[StepCache]) -> f64 {
    caches
        .iter()
        .flat_map(|c| c.cand_pre.as_slice().iter().chain(c.c.as_slice()))
        .map(|z| z.abs())
        .filter(|&z| z > 0.0)
        .fold(f64::INFINITY, f64::min)
}

pub fn check_gradients(cell: &dyn RecurrentCell, cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let (params, seq, label) = random_problem(cell, cfg)?;
    let (logits, caches) = forward_sequence(cell, &params, &seq)?;
    let (_, dlogits) = softmax_xent(&logits, label)?;
    let analytic = backward_sequence(cell, &params, &caches, &dlogits)?;

    let names = params.names();
    let analytic_arrays: Vec<Vec<f64>> =
        analytic.arrays().iter().map(|(_, a)| a.to_vec()).collect();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (String::new(), 0),
        checked: 0,
        masked: 0,
    };
    let mut probe = params.clone();
    for (a_idx, name) in names.iter().enumerate() {
        for (k, &analytic_k) in analytic_arrays[a_idx].iter().enumerate() {
            let original = probe.arrays_mut()[a_idx][k];
            probe.arrays_mut()[a_idx][k] = original + cfg.eps;
            let (plus, m_plus) = loss_and_relu_margin(cell, &probe, &seq, label)?;
            probe.arrays_mut()[a_idx][k] = original - cfg.eps;
            let (minus, m_minus) = loss_and_relu_margin(cell, &probe, &seq, label)?;
            probe.arrays_mut()[a_idx][k] = original;

            if m_plus.min(m_minus) < KINK_MARGIN {
                report.masked += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * cfg.eps);
            let err = relative_error(analytic_k, numeric);
            report.checked += 1;
            if err > report.max_rel_error || err.is_nan() {
                report.max_rel_error = err;
                report.worst = (name.clone(), k);
            }
        }
    }
    Ok(report)
}
