//! Recurrent cell variants.
//!
//! Each variant implements [`RecurrentCell`] and is constructed by name through
//! [`CellRegistry`]. The base LSTM and its parameter-reduced descendants share
//! one implementation, [`GatedCell`], which differs only in how each of the
//! three gates is formed (full affine map, point-wise weight vector, or a fixed
//! constant). The simple RNN is [`SimpleCell`].

mod gated;
mod params;
mod registry;
mod srn;

use std::fmt;
use std::str::FromStr;

pub use gated::{GateForm, GatedCell};
pub use params::{
    CellParams, Gate, InitKind, OutputHead, Param, ParamKey, ParamSet, ParamSlot, Role, Shape,
};
pub use registry::{CellFactory, CellRegistry};
pub use srn::SimpleCell;

use crate::error::{Error, Result};
use crate::init;
use crate::linalg::Vector;
use crate::rng::{Purpose, SplitMix64};

/// The case-study nonlinearity applied to the candidate cell and to the cell
/// output. Gates always use the logistic sigmoid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Tanh,
    Sigmoid,
    Relu,
}

impl Activation {
    pub const ALL: [Activation; 3] = [Activation::Tanh, Activation::Sigmoid, Activation::Relu];

    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => logistic(x),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative at pre-activation `x`, given `y = eval(x)`.
    /// The relu derivative at exactly zero is taken as 0.
    #[inline]
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Relu => "relu",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" | "logistic" => Ok(Activation::Sigmoid),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

#[inline]
pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn apply_activation(a: Activation, v: &Vector) -> Vector {
    v.map(|x| a.eval(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variant {
    Srn,
    Lstm,
    Lstm4,
    Lstm5,
    Lstm4a,
    Lstm5a,
    Lstm6,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Srn,
        Variant::Lstm,
        Variant::Lstm4,
        Variant::Lstm5,
        Variant::Lstm4a,
        Variant::Lstm5a,
        Variant::Lstm6,
    ];

    /// The base LSTM and its five reduced variants.
    pub const LSTM_FAMILY: [Variant; 6] = [
        Variant::Lstm,
        Variant::Lstm4,
        Variant::Lstm5,
        Variant::Lstm4a,
        Variant::Lstm5a,
        Variant::Lstm6,
    ];

    /// Registry key.
    pub fn key(self) -> &'static str {
        match self {
            Variant::Srn => "srn",
            Variant::Lstm => "lstm",
            Variant::Lstm4 => "lstm4",
            Variant::Lstm5 => "lstm5",
            Variant::Lstm4a => "lstm4a",
            Variant::Lstm5a => "lstm5a",
            Variant::Lstm6 => "lstm6",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::Srn => "SRN",
            Variant::Lstm => "LSTM",
            Variant::Lstm4 => "LSTM4",
            Variant::Lstm5 => "LSTM5",
            Variant::Lstm4a => "LSTM4a",
            Variant::Lstm5a => "LSTM5a",
            Variant::Lstm6 => "LSTM6",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.to_ascii_lowercase();
        Variant::ALL
            .into_iter()
            .find(|v| v.key() == lower)
            .ok_or_else(|| Error::UnknownVariant {
                name: s.to_string(),
                known: Variant::ALL.map(Variant::key).join(", "),
            })
    }
}

/// Which variant, which nonlinearity, and the values of any gates that are
/// fixed constants rather than learned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariantSpec {
    pub variant: Variant,
    pub activation: Activation,
    pub input_gate_const: Option<f64>,
    pub forget_const: Option<f64>,
    pub output_gate_const: Option<f64>,
}

pub const REDUCED_FORGET_CONST: f64 = 0.96;
pub const CONSTANT_GATE_FORGET_CONST: f64 = 0.59;

impl VariantSpec {
    pub fn new(variant: Variant, activation: Activation) -> Self {
        let (input_gate_const, forget_const, output_gate_const) = match variant {
            Variant::Lstm4a | Variant::Lstm5a => (None, Some(REDUCED_FORGET_CONST), Some(1.0)),
            Variant::Lstm6 => (Some(1.0), Some(CONSTANT_GATE_FORGET_CONST), Some(1.0)),
            _ => (None, None, None),
        };
        Self {
            variant,
            activation,
            input_gate_const,
            forget_const,
            output_gate_const,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let expected = VariantSpec::new(self.variant, self.activation);
        if *self != expected {
            return Err(Error::Config(format!(
                "{} requires gate constants (i, f, o) = ({:?}, {:?}, {:?})",
                self.variant,
                expected.input_gate_const,
                expected.forget_const,
                expected.output_gate_const
            )));
        }
        if let Some(f) = self.forget_const {
            if f.is_nan() || f.abs() >= 1.0 {
                return Err(Error::Config(format!(
                    "forget constant {f} must have magnitude below 1"
                )));
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<Box<dyn RecurrentCell>> {
        self.validate()?;
        Ok(match self.variant {
            Variant::Srn => Box::new(SimpleCell::new(self.activation)),
            _ => Box::new(GatedCell::new(*self)),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellState {
    pub h: Vector,
    pub c: Vector,
}

impl CellState {
    pub fn zeros(n_h: usize) -> Self {
        Self {
            h: Vector::zeros(n_h),
            c: Vector::zeros(n_h),
        }
    }
}

/// A gate's per-step value: either a learned vector or a fixed scalar
/// broadcast over every unit.
#[derive(Debug, Clone, PartialEq)]
pub enum GateValue {
    Const(f64),
    Vector(Vector),
}

impl GateValue {
    #[inline]
    pub fn at(&self, k: usize) -> f64 {
        match self {
            GateValue::Const(c) => *c,
            GateValue::Vector(v) => v[k],
        }
    }
}

/// Everything one forward step produced that the backward step needs.
///
/// For [`SimpleCell`], `cand_pre`/`cand` hold the hidden pre-activation and
/// the new hidden state, the gates are `Const(1.0)`, and `c` is the carried
/// (unused) memory vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCache {
    pub x: Vector,
    pub h_prev: Vector,
    pub c_prev: Vector,
    pub input_gate: GateValue,
    pub forget_gate: GateValue,
    pub output_gate: GateValue,
    pub cand_pre: Vector,
    pub cand: Vector,
    pub c: Vector,
    /// σ(c_t)
    pub c_act: Vector,
    pub h: Vector,
}

pub trait RecurrentCell: Send + Sync + fmt::Debug {
    fn spec(&self) -> &VariantSpec;

    /// Trainable arrays of the cell (not the output head) for the given sizes,
    /// in initialization order.
    fn layout(&self, n_in: usize, n_h: usize) -> Vec<ParamSlot>;

    fn step(&self, p: &CellParams, x: &Vector, prev: &CellState) -> Result<(CellState, StepCache)>;

    /// Back-propagates one step. `dh` is the total loss gradient reaching
    /// `h_t`, `dc` the gradient carried into `c_t` from step `t + 1`.
    /// Parameter gradients are accumulated into `grads`; returns
    /// `(dh_{t-1}, dc_{t-1})`.
    fn backward_step(
        &self,
        p: &CellParams,
        cache: &StepCache,
        dh: &Vector,
        dc: &Vector,
        grads: &mut CellParams,
    ) -> Result<(Vector, Vector)>;

    fn name(&self) -> &'static str {
        self.spec().variant.label()
    }

    fn activation(&self) -> Activation {
        self.spec().activation
    }
}

/// Trainable scalars in the cell plus the output head.
pub fn param_count(cell: &dyn RecurrentCell, n_in: usize, n_h: usize, n_out: usize) -> usize {
    let cell_count: usize = cell
        .layout(n_in, n_h)
        .iter()
        .map(|slot| slot.shape.len())
        .sum();
    cell_count + n_h * n_out + n_out
}

/// Seeded initialization of the cell and output head.
///
/// Input-to-hidden matrices are Glorot-uniform, recurrent matrices orthogonal,
/// point-wise gate vectors uniform in ±0.1, biases zero except the base LSTM's
/// forget bias (ones).
pub fn init_params(
    cell: &dyn RecurrentCell,
    n_in: usize,
    n_h: usize,
    n_out: usize,
    seed: u64,
) -> Result<ParamSet> {
    if n_in == 0 || n_h == 0 || n_out == 0 {
        return Err(Error::invalid("layer sizes must be positive"));
    }
    let mut rng = SplitMix64::stream(seed, Purpose::Init, 0);
    let mut cell_params = CellParams::default();
    for slot in cell.layout(n_in, n_h) {
        let param = init::draw(&slot, &mut rng);
        cell_params.insert(slot.key, param);
    }
    let head = OutputHead {
        w: init::glorot_uniform(n_out, n_h, &mut rng),
        b: Vector::zeros(n_out),
    };
    Ok(ParamSet {
        cell: cell_params,
        head,
    })
}

/// Output logits `W_hy · h + b_y` (softmax is applied by the loss).
pub fn predict(head: &OutputHead, h: &Vector) -> Result<Vector> {
    let mut out = head.b.clone();
    head.w.matvec_acc(h.as_slice(), out.as_mut_slice())?;
    Ok(out)
}
