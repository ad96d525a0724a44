use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Gate {
    Input,
    Forget,
    Output,
    /// The candidate cell (or the hidden update of the simple RNN).
    Candidate,
}

impl Gate {
    fn suffix(self) -> &'static str {
        match self {
            Gate::Input => "i",
            Gate::Forget => "f",
            Gate::Output => "o",
            Gate::Candidate => "c",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    /// `W`: n_h × n_in
    InputWeights,
    /// `U`: n_h × n_h
    RecurrentWeights,
    /// `u`: n_h, multiplied point-wise with h_{t-1}
    PointwiseWeights,
    /// `b`: n_h
    Bias,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamKey {
    pub gate: Gate,
    pub role: Role,
}

impl ParamKey {
    pub const fn new(gate: Gate, role: Role) -> Self {
        Self { gate, role }
    }
}

impl fmt::Display for ParamKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.role {
            Role::InputWeights => "W",
            Role::RecurrentWeights => "U",
            Role::PointwiseWeights => "u",
            Role::Bias => "b",
        };
        write!(f, "{prefix}_{}", self.gate.suffix())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Matrix(usize, usize),
    Vector(usize),
}

impl Shape {
    pub fn len(self) -> usize {
        match self {
            Shape::Matrix(r, c) => r * c,
            Shape::Vector(n) => n,
        }
    }

    pub fn is_empty(self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitKind {
    /// Uniform in ±√(6 / (fan_in + fan_out)).
    Glorot,
    /// Sign-fixed QR of a Gaussian matrix.
    Orthogonal,
    /// Uniform in ±limit.
    Uniform(f64),
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamSlot {
    pub key: ParamKey,
    pub shape: Shape,
    pub init: InitKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Param {
    Matrix(Matrix),
    Vector(Vector),
}

impl Param {
    pub fn shape(&self) -> Shape {
        match self {
            Param::Matrix(m) => Shape::Matrix(m.rows(), m.cols()),
            Param::Vector(v) => Shape::Vector(v.len()),
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        match self {
            Param::Matrix(m) => m.as_slice(),
            Param::Vector(v) => v.as_slice(),
        }
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        match self {
            Param::Matrix(m) => m.as_mut_slice(),
            Param::Vector(v) => v.as_mut_slice(),
        }
    }

    pub fn zeros(shape: Shape) -> Self {
        match shape {
            Shape::Matrix(r, c) => Param::Matrix(Matrix::zeros(r, c)),
            Shape::Vector(n) => Param::Vector(Vector::zeros(n)),
        }
    }
}

/// The trainable arrays of one cell, keyed by gate and role. Only the arrays
/// a variant actually learns are present.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CellParams {
    arrays: BTreeMap<ParamKey, Param>,
}

impl CellParams {
    pub fn insert(&mut self, key: ParamKey, param: Param) -> Option<Param> {
        self.arrays.insert(key, param)
    }

    pub fn get(&self, key: ParamKey) -> Option<&Param> {
        self.arrays.get(&key)
    }

    pub fn contains(&self, key: ParamKey) -> bool {
        self.arrays.contains_key(&key)
    }

    pub fn matrix(&self, key: ParamKey) -> Result<&Matrix> {
        match self.arrays.get(&key) {
            Some(Param::Matrix(m)) => Ok(m),
            _ => Err(missing(key, "matrix")),
        }
    }

    pub fn vector(&self, key: ParamKey) -> Result<&Vector> {
        match self.arrays.get(&key) {
            Some(Param::Vector(v)) => Ok(v),
            _ => Err(missing(key, "vector")),
        }
    }

    pub fn matrix_mut(&mut self, key: ParamKey) -> Result<&mut Matrix> {
        match self.arrays.get_mut(&key) {
            Some(Param::Matrix(m)) => Ok(m),
            _ => Err(missing(key, "matrix")),
        }
    }

    pub fn vector_mut(&mut self, key: ParamKey) -> Result<&mut Vector> {
        match self.arrays.get_mut(&key) {
            Some(Param::Vector(v)) => Ok(v),
            _ => Err(missing(key, "vector")),
        }
    }

    pub fn keys(&self) -> impl Iterator<Item = ParamKey> + '_ {
        self.arrays.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamKey, &Param)> {
        self.arrays.iter().map(|(k, v)| (*k, v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (ParamKey, &mut Param)> {
        self.arrays.iter_mut().map(|(k, v)| (*k, v))
    }

    pub fn len(&self) -> usize {
        self.arrays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrays.is_empty()
    }

    /// `(n_in, n_h)` read off the candidate input matrix.
    pub fn dims(&self) -> Result<(usize, usize)> {
        let w = self.matrix(ParamKey::new(Gate::Candidate, Role::InputWeights))?;
        Ok((w.cols(), w.rows()))
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            arrays: self
                .arrays
                .iter()
                .map(|(k, p)| (*k, Param::zeros(p.shape())))
                .collect(),
        }
    }
}

fn missing(key: ParamKey, kind: &str) -> Error {
    Error::invalid(format!("parameter set has no {kind} {key}"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputHead {
    /// `W_hy`: n_out × n_h
    pub w: Matrix,
    /// `b_y`: n_out
    pub b: Vector,
}

impl OutputHead {
    pub fn zeros_like(&self) -> Self {
        Self {
            w: Matrix::zeros(self.w.rows(), self.w.cols()),
            b: Vector::zeros(self.b.len()),
        }
    }
}

/// A full model's trainable arrays: one cell plus its output head. The same
/// type carries gradients and optimizer accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet {
    pub cell: CellParams,
    pub head: OutputHead,
}

impl ParamSet {
    pub fn zeros_like(&self) -> Self {
        Self {
            cell: self.cell.zeros_like(),
            head: self.head.zeros_like(),
        }
    }

    /// Flat views of every array in a fixed order (cell arrays by key, then
    /// `W_hy`, then `b_y`).
    pub fn arrays(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = self
            .cell
            .iter()
            .map(|(k, p)| (k.to_string(), p.as_slice()))
            .collect();
        out.push(("W_hy".to_string(), self.head.w.as_slice()));
        out.push(("b_y".to_string(), self.head.b.as_slice()));
        out
    }

    pub fn arrays_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = self
            .cell
            .iter_mut()
            .map(|(_, p)| p.as_mut_slice())
            .collect();
        out.push(self.head.w.as_mut_slice());
        out.push(self.head.b.as_mut_slice());
        out
    }

    pub fn names(&self) -> Vec<String> {
        self.arrays().into_iter().map(|(n, _)| n).collect()
    }

    pub fn scalar_count(&self) -> usize {
        self.arrays().iter().map(|(_, a)| a.len()).sum()
    }

    pub fn same_shape(&self, other: &ParamSet) -> bool {
        self.head.w.rows() == other.head.w.rows()
            && self.head.w.cols() == other.head.w.cols()
            && self.head.b.len() == other.head.b.len()
            && self.cell.len() == other.cell.len()
            && self
                .cell
                .iter()
                .zip(other.cell.iter())
                .all(|((ka, pa), (kb, pb))| ka == kb && pa.shape() == pb.shape())
    }

    pub fn check_same_shape(&self, other: &ParamSet, op: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "{op}: parameter sets differ in shape"
            )))
        }
    }

    /// `self += other`, elementwise.
    pub fn add_assign(&mut self, other: &ParamSet) -> Result<()> {
        self.check_same_shape(other, "add_assign")?;
        for (dst, (_, src)) in self.arrays_mut().into_iter().zip(other.arrays()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, alpha: f64) {
        for arr in self.arrays_mut() {
            arr.iter_mut().for_each(|x| *x *= alpha);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.arrays()
            .iter()
            .all(|(_, a)| a.iter().all(|x| x.is_finite()))
    }
}
