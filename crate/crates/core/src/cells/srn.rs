use super::{
    Activation, CellParams, CellState, Gate, GateValue, InitKind, ParamKey, ParamSlot,
    RecurrentCell, Role, Shape, StepCache, Variant, VariantSpec,
};
use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Simple RNN, `h_t = σ(W_hx x_t + W_hh h_{t-1} + b_h)`.
///
/// Its three arrays live in the candidate slots (`W_c`, `U_c`, `b_c`). The
/// memory vector of [`CellState`] is carried through unchanged.
#[derive(Debug, Clone)]
pub struct SimpleCell {
    spec: VariantSpec,
}

impl SimpleCell {
    pub fn new(activation: Activation) -> Self {
        Self {
            spec: VariantSpec::new(Variant::Srn, activation),
        }
    }
}

const W: ParamKey = ParamKey::new(Gate::Candidate, Role::InputWeights);
const U: ParamKey = ParamKey::new(Gate::Candidate, Role::RecurrentWeights);
const B: ParamKey = ParamKey::new(Gate::Candidate, Role::Bias);

impl RecurrentCell for SimpleCell {
    fn spec(&self) -> &VariantSpec {
        &self.spec
    }

    fn layout(&self, n_in: usize, n_h: usize) -> Vec<ParamSlot> {
        vec![
            ParamSlot {
                key: W,
                shape: Shape::Matrix(n_h, n_in),
                init: InitKind::Glorot,
            },
            ParamSlot {
                key: U,
                shape: Shape::Matrix(n_h, n_h),
                init: InitKind::Orthogonal,
            },
            ParamSlot {
                key: B,
                shape: Shape::Vector(n_h),
                init: InitKind::Constant(0.0),
            },
        ]
    }

    fn step(&self, p: &CellParams, x: &Vector, prev: &CellState) -> Result<(CellState, StepCache)> {
        let (n_in, n_h) = p.dims()?;
        if x.len() != n_in {
            return Err(Error::dim("step input", n_in, x.len()));
        }
        if prev.h.len() != n_h || prev.c.len() != n_h {
            return Err(Error::dim(
                "step state",
                n_h,
                prev.h.len().max(prev.c.len()),
            ));
        }
        let mut pre = p.vector(B)?.clone();
        p.matrix(W)?.matvec_acc(x.as_slice(), pre.as_mut_slice())?;
        p.matrix(U)?
            .matvec_acc(prev.h.as_slice(), pre.as_mut_slice())?;
        let act = self.spec.activation;
        let h = pre.map(|z| act.eval(z));
        let next = CellState {
            h: h.clone(),
            c: prev.c.clone(),
        };
        let cache = StepCache {
            x: x.clone(),
            h_prev: prev.h.clone(),
            c_prev: prev.c.clone(),
            input_gate: GateValue::Const(1.0),
            forget_gate: GateValue::Const(1.0),
            output_gate: GateValue::Const(1.0),
            cand_pre: pre,
            cand: h.clone(),
            c: prev.c.clone(),
            c_act: h.clone(),
            h,
        };
        Ok((next, cache))
    }

    fn backward_step(
        &self,
        p: &CellParams,
        cache: &StepCache,
        dh: &Vector,
        dc: &Vector,
        grads: &mut CellParams,
    ) -> Result<(Vector, Vector)> {
        let n_h = cache.h.len();
        if dh.len() != n_h || dc.len() != n_h {
            return Err(Error::dim("backward_step", n_h, dh.len().max(dc.len())));
        }
        let act = self.spec.activation;
        let dpre: Vec<f64> = (0..n_h)
            .map(|k| dh[k] * act.derivative(cache.cand_pre[k], cache.h[k]))
            .collect();
        grads.matrix_mut(W)?.add_outer(&dpre, cache.x.as_slice())?;
        grads
            .matrix_mut(U)?
            .add_outer(&dpre, cache.h_prev.as_slice())?;
        grads
            .vector_mut(B)?
            .as_mut_slice()
            .iter_mut()
            .zip(&dpre)
            .for_each(|(g, d)| *g += d);
        let mut dh_prev = vec![0.0; n_h];
        p.matrix(U)?.matvec_transposed_acc(&dpre, &mut dh_prev)?;
        Ok((Vector::from_raw(dh_prev), dc.clone()))
    }
}
