use super::{
    logistic, CellParams, CellState, Gate, GateValue, InitKind, ParamKey, ParamSlot, RecurrentCell,
    Role, Shape, StepCache, Variant, VariantSpec,
};
use crate::error::{Error, Result};
use crate::linalg::Vector;

const GATE_VECTOR_LIMIT: f64 = 0.1;

/// How a single gate signal is produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateForm {
    /// `σ_in(W x_t + U h_{t-1} + b)`
    Full,
    /// `σ_in(u ⊙ h_{t-1} [+ b])`
    Pointwise { bias: bool },
    /// A fixed scalar, identical for every unit.
    Constant(f64),
}

/// LSTM-family cell:
///
/// ```text
/// c̃_t = σ(W_c x_t + U_c h_{t-1} + b_c)
/// c_t  = f_t ⊙ c_{t-1} + i_t ⊙ c̃_t
/// h_t  = o_t ⊙ σ(c_t)
/// ```
///
/// with each of `i`, `f`, `o` given by a [`GateForm`].
#[derive(Debug, Clone)]
pub struct GatedCell {
    spec: VariantSpec,
    input: GateForm,
    forget: GateForm,
    output: GateForm,
}

impl GatedCell {
    /// # Panics
    /// If `spec.variant` is the simple RNN.
    pub fn new(spec: VariantSpec) -> Self {
        let constant_or = |c: Option<f64>, form| c.map_or(form, GateForm::Constant);
        let learned = match spec.variant {
            Variant::Lstm => GateForm::Full,
            Variant::Lstm4 | Variant::Lstm4a => GateForm::Pointwise { bias: false },
            Variant::Lstm5 | Variant::Lstm5a => GateForm::Pointwise { bias: true },
            // Every gate of LSTM6 is a constant; the fallback is never used.
            Variant::Lstm6 => GateForm::Constant(1.0),
            Variant::Srn => panic!("the simple RNN is not a gated cell"),
        };
        Self {
            spec,
            input: constant_or(spec.input_gate_const, learned),
            forget: constant_or(spec.forget_const, learned),
            output: constant_or(spec.output_gate_const, learned),
        }
    }

    pub fn gate_forms(&self) -> [(Gate, GateForm); 3] {
        [
            (Gate::Input, self.input),
            (Gate::Forget, self.forget),
            (Gate::Output, self.output),
        ]
    }

    fn gate_value(
        &self,
        gate: Gate,
        form: GateForm,
        p: &CellParams,
        x: &Vector,
        h_prev: &Vector,
    ) -> Result<GateValue> {
        let pre = match form {
            GateForm::Constant(c) => return Ok(GateValue::Const(c)),
            GateForm::Full => {
                let mut pre = p.vector(ParamKey::new(gate, Role::Bias))?.clone();
                p.matrix(ParamKey::new(gate, Role::InputWeights))?
                    .matvec_acc(x.as_slice(), pre.as_mut_slice())?;
                p.matrix(ParamKey::new(gate, Role::RecurrentWeights))?
                    .matvec_acc(h_prev.as_slice(), pre.as_mut_slice())?;
                pre
            }
            GateForm::Pointwise { bias } => {
                let u = p.vector(ParamKey::new(gate, Role::PointwiseWeights))?;
                check_len(u.len(), h_prev.len())?;
                let mut pre: Vec<f64> = u
                    .as_slice()
                    .iter()
                    .zip(h_prev.as_slice())
                    .map(|(a, b)| a * b)
                    .collect();
                if bias {
                    let b = p.vector(ParamKey::new(gate, Role::Bias))?;
                    check_len(b.len(), pre.len())?;
                    pre.iter_mut().zip(b.as_slice()).for_each(|(x, b)| *x += b);
                }
                Vector::from_raw(pre)
            }
        };
        let mut act = pre;
        act.as_mut_slice()
            .iter_mut()
            .for_each(|x| *x = logistic(*x));
        Ok(GateValue::Vector(act))
    }

    /// Accumulates the parameter gradients of a learned gate given the
    /// gradient `dpre` at its pre-activation, and adds its contribution to
    /// `dh_prev`.
    fn backprop_gate(
        gate: Gate,
        form: GateForm,
        dpre: &[f64],
        cache: &StepCache,
        p: &CellParams,
        grads: &mut CellParams,
        dh_prev: &mut [f64],
    ) -> Result<()> {
        match form {
            GateForm::Constant(_) => {}
            GateForm::Full => {
                grads
                    .matrix_mut(ParamKey::new(gate, Role::InputWeights))?
                    .add_outer(dpre, cache.x.as_slice())?;
                let key_u = ParamKey::new(gate, Role::RecurrentWeights);
                grads
                    .matrix_mut(key_u)?
                    .add_outer(dpre, cache.h_prev.as_slice())?;
                add_into(grads.vector_mut(ParamKey::new(gate, Role::Bias))?, dpre);
                p.matrix(key_u)?.matvec_transposed_acc(dpre, dh_prev)?;
            }
            GateForm::Pointwise { bias } => {
                let key_u = ParamKey::new(gate, Role::PointwiseWeights);
                let du = grads.vector_mut(key_u)?;
                for ((g, d), h) in du
                    .as_mut_slice()
                    .iter_mut()
                    .zip(dpre)
                    .zip(cache.h_prev.as_slice())
                {
                    *g += d * h;
                }
                if bias {
                    add_into(grads.vector_mut(ParamKey::new(gate, Role::Bias))?, dpre);
                }
                let u = p.vector(key_u)?;
                for ((dh, d), uk) in dh_prev.iter_mut().zip(dpre).zip(u.as_slice()) {
                    *dh += d * uk;
                }
            }
        }
        Ok(())
    }
}

fn add_into(dst: &mut Vector, src: &[f64]) {
    dst.as_mut_slice()
        .iter_mut()
        .zip(src)
        .for_each(|(d, s)| *d += s);
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::dim("GatedCell::step", expected, got))
    }
}

/// `dgate ⊙ g ⊙ (1 − g)`, the gradient at a sigmoid gate's pre-activation.
fn gate_pre_grad(dgate: impl Iterator<Item = f64>, gate: &GateValue) -> Vec<f64> {
    dgate
        .enumerate()
        .map(|(k, d)| {
            let g = gate.at(k);
            d * g * (1.0 - g)
        })
        .collect()
}

impl RecurrentCell for GatedCell {
    fn spec(&self) -> &VariantSpec {
        &self.spec
    }

    fn layout(&self, n_in: usize, n_h: usize) -> Vec<ParamSlot> {
        let slot = |gate, role, shape, init| ParamSlot {
            key: ParamKey::new(gate, role),
            shape,
            init,
        };
        let mut slots = Vec::new();
        for (gate, form) in self.gate_forms() {
            match form {
                GateForm::Constant(_) => {}
                GateForm::Full => {
                    let forget_bias = if gate == Gate::Forget { 1.0 } else { 0.0 };
                    slots.push(slot(
                        gate,
                        Role::InputWeights,
                        Shape::Matrix(n_h, n_in),
                        InitKind::Glorot,
                    ));
                    slots.push(slot(
                        gate,
                        Role::RecurrentWeights,
                        Shape::Matrix(n_h, n_h),
                        InitKind::Orthogonal,
                    ));
                    slots.push(slot(
                        gate,
                        Role::Bias,
                        Shape::Vector(n_h),
                        InitKind::Constant(forget_bias),
                    ));
                }
                GateForm::Pointwise { bias } => {
                    slots.push(slot(
                        gate,
                        Role::PointwiseWeights,
                        Shape::Vector(n_h),
                        InitKind::Uniform(GATE_VECTOR_LIMIT),
                    ));
                    if bias {
                        slots.push(slot(
                            gate,
                            Role::Bias,
                            Shape::Vector(n_h),
                            InitKind::Constant(0.0),
                        ));
                    }
                }
            }
        }
        slots.push(slot(
            Gate::Candidate,
            Role::InputWeights,
            Shape::Matrix(n_h, n_in),
            InitKind::Glorot,
        ));
        slots.push(slot(
            Gate::Candidate,
            Role::RecurrentWeights,
            Shape::Matrix(n_h, n_h),
            InitKind::Orthogonal,
        ));
        slots.push(slot(
            Gate::Candidate,
            Role::Bias,
            Shape::Vector(n_h),
            InitKind::Constant(0.0),
        ));
        slots
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
        let act = self.spec.activation;
        let input_gate = self.gate_value(Gate::Input, self.input, p, x, &prev.h)?;
        let forget_gate = self.gate_value(Gate::Forget, self.forget, p, x, &prev.h)?;
        let output_gate = self.gate_value(Gate::Output, self.output, p, x, &prev.h)?;

        let mut cand_pre = p
            .vector(ParamKey::new(Gate::Candidate, Role::Bias))?
            .clone();
        p.matrix(ParamKey::new(Gate::Candidate, Role::InputWeights))?
            .matvec_acc(x.as_slice(), cand_pre.as_mut_slice())?;
        p.matrix(ParamKey::new(Gate::Candidate, Role::RecurrentWeights))?
            .matvec_acc(prev.h.as_slice(), cand_pre.as_mut_slice())?;
        let cand = cand_pre.map(|z| act.eval(z));

        let mut c = Vec::with_capacity(n_h);
        let mut c_act = Vec::with_capacity(n_h);
        let mut h = Vec::with_capacity(n_h);
        for k in 0..n_h {
            let ck = forget_gate.at(k) * prev.c[k] + input_gate.at(k) * cand[k];
            let sk = act.eval(ck);
            c.push(ck);
            c_act.push(sk);
            h.push(output_gate.at(k) * sk);
        }
        let next = CellState {
            h: Vector::from_raw(h),
            c: Vector::from_raw(c),
        };
        let cache = StepCache {
            x: x.clone(),
            h_prev: prev.h.clone(),
            c_prev: prev.c.clone(),
            input_gate,
            forget_gate,
            output_gate,
            cand_pre,
            cand,
            c: next.c.clone(),
            c_act: Vector::from_raw(c_act),
            h: next.h.clone(),
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
        let (i, f, o) = (&cache.input_gate, &cache.forget_gate, &cache.output_gate);

        // Total gradient at c_t: carried term plus the path through h_t.
        let dc_total: Vec<f64> = (0..n_h)
            .map(|k| dc[k] + dh[k] * o.at(k) * act.derivative(cache.c[k], cache.c_act[k]))
            .collect();

        let mut dh_prev = vec![0.0; n_h];

        if !matches!(self.output, GateForm::Constant(_)) {
            let dpre = gate_pre_grad((0..n_h).map(|k| dh[k] * cache.c_act[k]), o);
            Self::backprop_gate(
                Gate::Output,
                self.output,
                &dpre,
                cache,
                p,
                grads,
                &mut dh_prev,
            )?;
        }
        if !matches!(self.forget, GateForm::Constant(_)) {
            let dpre = gate_pre_grad((0..n_h).map(|k| dc_total[k] * cache.c_prev[k]), f);
            Self::backprop_gate(
                Gate::Forget,
                self.forget,
                &dpre,
                cache,
                p,
                grads,
                &mut dh_prev,
            )?;
        }
        if !matches!(self.input, GateForm::Constant(_)) {
            let dpre = gate_pre_grad((0..n_h).map(|k| dc_total[k] * cache.cand[k]), i);
            Self::backprop_gate(
                Gate::Input,
                self.input,
                &dpre,
                cache,
                p,
                grads,
                &mut dh_prev,
            )?;
        }

        let dcand_pre: Vec<f64> = (0..n_h)
            .map(|k| dc_total[k] * i.at(k) * act.derivative(cache.cand_pre[k], cache.cand[k]))
            .collect();
        Self::backprop_gate(
            Gate::Candidate,
            GateForm::Full,
            &dcand_pre,
            cache,
            p,
            grads,
            &mut dh_prev,
        )?;

        let dc_prev: Vec<f64> = (0..n_h).map(|k| dc_total[k] * f.at(k)).collect();
        Ok((Vector::from_raw(dh_prev), Vector::from_raw(dc_prev)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cells::{init_params, Activation, Param};
    use crate::linalg::Matrix;

    fn scalar_lstm6(bias: f64) -> CellParams {
        let mut p = CellParams::default();
        let m = |v| Param::Matrix(Matrix::new(1, 1, vec![v]).unwrap());
        p.insert(ParamKey::new(Gate::Candidate, Role::InputWeights), m(0.0));
        p.insert(
            ParamKey::new(Gate::Candidate, Role::RecurrentWeights),
            m(0.0),
        );
        p.insert(
            ParamKey::new(Gate::Candidate, Role::Bias),
            Param::Vector(Vector::filled(1, bias)),
        );
        p
    }

    fn lstm6() -> GatedCell {
        GatedCell::new(VariantSpec::new(Variant::Lstm6, Activation::Tanh))
    }

    #[test]
    fn lstm6_scalar_step() {
        let (next, _) = lstm6()
            .step(&scalar_lstm6(0.5), &Vector::zeros(1), &CellState::zeros(1))
            .unwrap();
        // Reference values from an independent scalar evaluation.
        assert!((next.c[0] - 0.462_117_157_260_009_8).abs() < 1e-12);
        assert!((next.h[0] - 0.431_808_180_595_096_1).abs() < 1e-12);
    }

    #[test]
    fn lstm6_forget_constant_applies_exactly() {
        let prev = CellState {
            h: Vector::zeros(1),
            c: Vector::filled(1, 1.0),
        };
        let (next, _) = lstm6()
            .step(&scalar_lstm6(0.0), &Vector::zeros(1), &prev)
            .unwrap();
        assert_eq!(next.c[0], 0.59);
    }

    #[test]
    fn zero_lstm_is_a_fixed_point() {
        let cell = GatedCell::new(VariantSpec::new(Variant::Lstm, Activation::Tanh));
        let mut p = init_params(&cell, 3, 4, 2, 0).unwrap().cell;
        for (_, param) in p.iter_mut() {
            param.as_mut_slice().iter_mut().for_each(|x| *x = 0.0);
        }
        let x = Vector::new(vec![0.3, -2.0, 5.0]).unwrap();
        let (next, _) = cell.step(&p, &x, &CellState::zeros(4)).unwrap();
        assert!(next.h.as_slice().iter().all(|&v| v == 0.0));
        assert!(next.c.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn step_rejects_bad_dimensions() {
        let cell = GatedCell::new(VariantSpec::new(Variant::Lstm5, Activation::Tanh));
        let p = init_params(&cell, 3, 4, 2, 0).unwrap().cell;
        assert!(cell
            .step(&p, &Vector::zeros(2), &CellState::zeros(4))
            .is_err());
        assert!(cell
            .step(&p, &Vector::zeros(3), &CellState::zeros(5))
            .is_err());
    }

    #[test]
    fn gate_forms_per_variant() {
        let forms = |v| {
            GatedCell::new(VariantSpec::new(v, Activation::Tanh))
                .gate_forms()
                .map(|(_, f)| f)
        };
        assert_eq!(forms(Variant::Lstm), [GateForm::Full; 3]);
        assert_eq!(
            forms(Variant::Lstm4),
            [GateForm::Pointwise { bias: false }; 3]
        );
        assert_eq!(
            forms(Variant::Lstm5),
            [GateForm::Pointwise { bias: true }; 3]
        );
        assert_eq!(
            forms(Variant::Lstm4a),
            [
                GateForm::Pointwise { bias: false },
                GateForm::Constant(0.96),
                GateForm::Constant(1.0)
            ]
        );
        assert_eq!(
            forms(Variant::Lstm5a),
            [
                GateForm::Pointwise { bias: true },
                GateForm::Constant(0.96),
                GateForm::Constant(1.0)
            ]
        );
        assert_eq!(
            forms(Variant::Lstm6),
            [
                GateForm::Constant(1.0),
                GateForm::Constant(0.59),
                GateForm::Constant(1.0)
            ]
        );
    }

    #[test]
    fn saturated_gates_pass_the_candidate_through() {
        let cell = GatedCell::new(VariantSpec::new(Variant::Lstm, Activation::Tanh));
        let mut p = init_params(&cell, 2, 3, 2, 4).unwrap().cell;
        for g in [Gate::Input, Gate::Forget, Gate::Output] {
            p.vector_mut(ParamKey::new(g, Role::Bias))
                .unwrap()
                .as_mut_slice()
                .iter_mut()
                .for_each(|b| *b = 40.0);
        }
        let prev = CellState {
            h: Vector::new(vec![0.1, -0.2, 0.05]).unwrap(),
            c: Vector::new(vec![0.4, -1.0, 2.0]).unwrap(),
        };
        let x = Vector::new(vec![0.5, -0.5]).unwrap();
        let (next, cache) = cell.step(&p, &x, &prev).unwrap();
        for k in 0..3 {
            assert!((next.c[k] - (prev.c[k] + cache.cand[k])).abs() < 1e-9);
        }
    }

    #[test]
    fn cache_reproduces_outputs() {
        let cell = GatedCell::new(VariantSpec::new(Variant::Lstm5a, Activation::Sigmoid));
        let p = init_params(&cell, 3, 4, 2, 9).unwrap().cell;
        let x = Vector::new(vec![0.2, 0.7, -0.1]).unwrap();
        let prev = CellState {
            h: Vector::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap(),
            c: Vector::new(vec![-0.5, 0.5, 1.5, 0.0]).unwrap(),
        };
        let (next, cache) = cell.step(&p, &x, &prev).unwrap();
        for k in 0..4 {
            let c =
                cache.forget_gate.at(k) * cache.c_prev[k] + cache.input_gate.at(k) * cache.cand[k];
            assert_eq!(c, next.c[k]);
            assert_eq!(cache.output_gate.at(k) * cache.c_act[k], next.h[k]);
        }
    }
}
