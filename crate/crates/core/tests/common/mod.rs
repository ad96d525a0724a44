//! Test oracles written directly from the cell equations, sharing no code with
//! the library's forward or backward passes.
#![allow(dead_code)]

use std::collections::HashMap;
use std::path::Path;

use gated_rnn::cells::{init_params, Activation, ParamSet, Variant, VariantSpec};
use gated_rnn::data::{write_idx_images, write_idx_labels, IdxImages};
use gated_rnn::linalg::Vector;

/// xorshift64*; deliberately not the library generator.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        Self(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) | 1)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 ^= self.0 >> 12;
        self.0 ^= self.0 << 25;
        self.0 ^= self.0 >> 27;
        self.0.wrapping_mul(0x2545_f491_4f6c_dd1d)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * ((self.next_u64() >> 11) as f64 / (1u64 << 53) as f64)
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn act(a: Activation, z: f64) -> f64 {
    match a {
        Activation::Tanh => z.tanh(),
        Activation::Sigmoid => sigmoid(z),
        Activation::Relu => z.max(0.0),
    }
}

#[derive(Clone, Copy)]
enum Form {
    Full,
    Pointwise(bool),
    Fixed(f64),
}

fn forms(v: Variant) -> [Form; 3] {
    use Form::*;
    match v {
        Variant::Lstm => [Full, Full, Full],
        Variant::Lstm4 => [Pointwise(false); 3],
        Variant::Lstm5 => [Pointwise(true); 3],
        Variant::Lstm4a => [Pointwise(false), Fixed(0.96), Fixed(1.0)],
        Variant::Lstm5a => [Pointwise(true), Fixed(0.96), Fixed(1.0)],
        Variant::Lstm6 => [Fixed(1.0), Fixed(0.59), Fixed(1.0)],
        Variant::Srn => unreachable!(),
    }
}

struct Arrays<'a> {
    by_name: HashMap<String, &'a [f64]>,
    n_in: usize,
    n_h: usize,
}

impl<'a> Arrays<'a> {
    fn new(p: &'a ParamSet) -> Self {
        let by_name: HashMap<String, &[f64]> = p.arrays().into_iter().collect();
        let n_h = by_name["b_c"].len();
        let n_in = by_name["W_c"].len() / n_h;
        Self { by_name, n_in, n_h }
    }

    fn get(&self, name: &str) -> &'a [f64] {
        self.by_name[name]
    }

    /// `W x + U h + b` for the named gate suffix.
    fn affine(&self, g: &str, x: &[f64], h: &[f64]) -> Vec<f64> {
        let (w, u, b) = (
            self.get(&format!("W_{g}")),
            self.get(&format!("U_{g}")),
            self.get(&format!("b_{g}")),
        );
        (0..self.n_h)
            .map(|k| {
                let mut z = b[k];
                for j in 0..self.n_in {
                    z += w[k * self.n_in + j] * x[j];
                }
                for j in 0..self.n_h {
                    z += u[k * self.n_h + j] * h[j];
                }
                z
            })
            .collect()
    }

    fn gate(&self, g: &str, form: Form, x: &[f64], h: &[f64]) -> Vec<f64> {
        match form {
            Form::Fixed(c) => vec![c; self.n_h],
            Form::Full => self.affine(g, x, h).into_iter().map(sigmoid).collect(),
            Form::Pointwise(bias) => {
                let u = self.get(&format!("u_{g}"));
                (0..self.n_h)
                    .map(|k| {
                        let b = if bias {
                            self.get(&format!("b_{g}"))[k]
                        } else {
                            0.0
                        };
                        sigmoid(u[k] * h[k] + b)
                    })
                    .collect()
            }
        }
    }
}

/// Logits of the final hidden state, and the smallest nonzero |argument|
/// passed to the case-study activation (infinite unless relu).
pub fn reference_forward(
    variant: Variant,
    a: Activation,
    p: &ParamSet,
    seq: &[Vec<f64>],
) -> (Vec<f64>, f64) {
    let arr = Arrays::new(p);
    let n_h = arr.n_h;
    let mut h = vec![0.0; n_h];
    let mut c = vec![0.0; n_h];
    let mut margin = f64::INFINITY;
    let mut watch = |z: f64| {
        if a == Activation::Relu && z != 0.0 {
            margin = margin.min(z.abs());
        }
    };
    for x in seq {
        let cand_pre = arr.affine("c", x, &h);
        cand_pre.iter().for_each(|&z| watch(z));
        if variant == Variant::Srn {
            h = cand_pre.iter().map(|&z| act(a, z)).collect();
            continue;
        }
        let [fi, ff, fo] = forms(variant);
        let i = arr.gate("i", fi, x, &h);
        let f = arr.gate("f", ff, x, &h);
        let o = arr.gate("o", fo, x, &h);
        for k in 0..n_h {
            c[k] = f[k] * c[k] + i[k] * act(a, cand_pre[k]);
        }
        c.iter().for_each(|&z| watch(z));
        h = (0..n_h).map(|k| o[k] * act(a, c[k])).collect();
    }
    let w = arr.get("W_hy");
    let b = arr.get("b_y");
    let logits = (0..b.len())
        .map(|r| b[r] + (0..n_h).map(|j| w[r * n_h + j] * h[j]).sum::<f64>())
        .collect();
    (logits, margin)
}

pub fn reference_xent(logits: &[f64], label: usize) -> f64 {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    lse - logits[label]
}

pub struct Problem {
    pub variant: Variant,
    pub activation: Activation,
    pub params: ParamSet,
    pub seq: Vec<Vec<f64>>,
    pub label: usize,
}

impl Problem {
    pub fn seq_vectors(&self) -> Vec<Vector> {
        self.seq
            .iter()
            .map(|x| Vector::new(x.clone()).unwrap())
            .collect()
    }

    pub fn loss_at(&self, p: &ParamSet) -> (f64, f64) {
        let (logits, margin) = reference_forward(self.variant, self.activation, p, &self.seq);
        (reference_xent(&logits, self.label), margin)
    }
}

pub const KINK: f64 = 1e-3;

/// Random parameters, inputs and label for the grad-check shape
/// (3 inputs, 5 hidden, 4 classes, 4 steps). Relu problems are redrawn until
/// no activation argument lies within [`KINK`] of zero.
pub fn random_problem(variant: Variant, activation: Activation, seed: u64) -> Problem {
    let cell = VariantSpec::new(variant, activation).build().unwrap();
    let mut params = init_params(cell.as_ref(), 3, 5, 4, 0).unwrap();
    let mut rng = TestRng::new(seed + 1);
    loop {
        for arr in params.arrays_mut() {
            arr.iter_mut().for_each(|x| *x = rng.uniform(-0.8, 0.8));
        }
        let seq = (0..4)
            .map(|_| (0..3).map(|_| rng.uniform(-1.0, 1.0)).collect())
            .collect();
        let label = rng.below(4);
        let problem = Problem {
            variant,
            activation,
            params: params.clone(),
            seq,
            label,
        };
        if problem.loss_at(&problem.params).1 >= KINK {
            return problem;
        }
    }
}

/// Central differences of the reference loss. `None` marks a coordinate whose
/// perturbation brings a relu argument near the kink.
pub fn fd_gradient(problem: &Problem, eps: f64) -> Vec<Vec<Option<f64>>> {
    let mut probe = problem.params.clone();
    let sizes: Vec<usize> = probe.arrays().iter().map(|(_, a)| a.len()).collect();
    let mut out = Vec::new();
    for (a, &n) in sizes.iter().enumerate() {
        let mut grads = Vec::with_capacity(n);
        for k in 0..n {
            let orig = probe.arrays_mut()[a][k];
            probe.arrays_mut()[a][k] = orig + eps;
            let (plus, m1) = problem.loss_at(&probe);
            probe.arrays_mut()[a][k] = orig - eps;
            let (minus, m2) = problem.loss_at(&probe);
            probe.arrays_mut()[a][k] = orig;
            grads.push((m1.min(m2) >= KINK).then(|| (plus - minus) / (2.0 * eps)));
        }
        out.push(grads);
    }
    out
}

pub fn rel_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// A tiny learnable IDX dataset: class `k` lights row `k` (plus a little
/// noise), on `side × side` images.
pub fn write_fixture(dir: &Path, n_train: usize, n_test: usize, side: usize, seed: u64) {
    let mut rng = TestRng::new(seed);
    let mut make = |count: usize| {
        let mut pixels = vec![0u8; count * side * side];
        let mut labels = Vec::with_capacity(count);
        for i in 0..count {
            let label = rng.below(side.min(10));
            labels.push(label as u8);
            let img = &mut pixels[i * side * side..(i + 1) * side * side];
            for (j, px) in img.iter_mut().enumerate() {
                *px = if j / side == label {
                    255
                } else {
                    (rng.below(40)) as u8
                };
            }
        }
        (
            IdxImages {
                count,
                rows: side,
                cols: side,
                pixels,
            },
            labels,
        )
    };
    let (train_x, train_y) = make(n_train);
    let (test_x, test_y) = make(n_test);
    write_idx_images(dir.join("train-images-idx3-ubyte"), &train_x).unwrap();
    write_idx_labels(dir.join("train-labels-idx1-ubyte"), &train_y).unwrap();
    write_idx_images(dir.join("t10k-images-idx3-ubyte"), &test_x).unwrap();
    write_idx_labels(dir.join("t10k-labels-idx1-ubyte"), &test_y).unwrap();
}
