use crate::cells::{InitKind, Param, ParamSlot, Shape};
use crate::linalg::{Matrix, Vector};
use crate::rng::SplitMix64;

pub(crate) fn draw(slot: &ParamSlot, rng: &mut SplitMix64) -> Param {
    match (slot.shape, slot.init) {
        (Shape::Matrix(r, c), InitKind::Glorot) => Param::Matrix(glorot_uniform(r, c, rng)),
        (Shape::Matrix(r, c), InitKind::Orthogonal) => {
            assert_eq!(r, c, "orthogonal init needs a square matrix");
            Param::Matrix(orthogonal(r, rng))
        }
        (Shape::Matrix(r, c), InitKind::Uniform(limit)) => {
            let data = (0..r * c).map(|_| rng.uniform(-limit, limit)).collect();
            Param::Matrix(Matrix::new(r, c, data).expect("positive shape"))
        }
        (Shape::Matrix(r, c), InitKind::Constant(value)) => {
            Param::Matrix(Matrix::new(r, c, vec![value; r * c]).expect("positive shape"))
        }
        (Shape::Vector(n), InitKind::Uniform(limit)) => Param::Vector(Vector::from_raw(
            (0..n).map(|_| rng.uniform(-limit, limit)).collect(),
        )),
        (Shape::Vector(n), InitKind::Constant(value)) => Param::Vector(Vector::filled(n, value)),
        (Shape::Vector(n), InitKind::Glorot) => {
            let limit = (6.0 / (n as f64 + 1.0)).sqrt();
            Param::Vector(Vector::from_raw(
                (0..n).map(|_| rng.uniform(-limit, limit)).collect(),
            ))
        }
        (Shape::Vector(_), InitKind::Orthogonal) => {
            panic!("orthogonal init is only defined for matrices")
        }
    }
}

/// `rows × cols` matrix, uniform in ±√(6 / (rows + cols)).
pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut SplitMix64) -> Matrix {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols)
        .map(|_| rng.uniform(-limit, limit))
        .collect();
    Matrix::new(rows, cols, data).expect("positive shape")
}

/// Orthogonal `n × n` matrix: the Q factor of a seeded Gaussian matrix, with
/// column signs fixed so that R has a positive diagonal.
///
/// Gram–Schmidt on the columns yields exactly that Q; each column is
/// orthogonalized twice to keep ‖QᵀQ − I‖ at rounding level.
pub fn orthogonal(n: usize, rng: &mut SplitMix64) -> Matrix {
    let gaussian: Vec<f64> = (0..n * n).map(|_| rng.normal()).collect();
    // Work column-major: cols[j] is column j of the Gaussian matrix.
    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| gaussian[i * n + j]).collect())
        .collect();
    for j in 0..n {
        for _pass in 0..2 {
            for k in 0..j {
                let (done, rest) = cols.split_at_mut(j);
                let q = &done[k];
                let proj: f64 = q.iter().zip(&rest[0]).map(|(a, b)| a * b).sum();
                for (x, qi) in rest[0].iter_mut().zip(q) {
                    *x -= proj * qi;
                }
            }
        }
        let norm = cols[j].iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm > 1e-12, "degenerate Gaussian draw");
        cols[j].iter_mut().for_each(|x| *x /= norm);
    }
    let mut q = Matrix::zeros(n, n);
    for (j, col) in cols.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            q[(i, j)] = v;
        }
    }
    q
}
