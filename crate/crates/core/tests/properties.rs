mod common;

use gated_rnn::cells::{init_params, Activation, CellState, Variant, VariantSpec};
use gated_rnn::linalg::{matvec, matvec_transposed, Matrix, Vector};
use proptest::prelude::*;

fn norm(v: &Vector) -> f64 {
    v.dot(v).unwrap().sqrt()
}

fn matrix_and_vectors() -> impl Strategy<Value = (Matrix, Vector, Vector)> {
    (1usize..8, 1usize..8).prop_flat_map(|(r, c)| {
        (
            prop::collection::vec(-10.0f64..10.0, r * c),
            prop::collection::vec(-10.0f64..10.0, c),
            prop::collection::vec(-10.0f64..10.0, r),
        )
            .prop_map(move |(m, x, y)| {
                (
                    Matrix::new(r, c, m).unwrap(),
                    Vector::new(x).unwrap(),
                    Vector::new(y).unwrap(),
                )
            })
    })
}

proptest! {
    #[test]
    fn transpose_is_the_adjoint((m, x, y) in matrix_and_vectors()) {
        let lhs = matvec(&m, &x).unwrap().dot(&y).unwrap();
        let rhs = x.dot(&matvec_transposed(&m, &y).unwrap()).unwrap();
        let scale: f64 = m.as_slice().iter().map(|v| v.abs()).sum::<f64>() * 100.0 + 1.0;
        prop_assert!((lhs - rhs).abs() <= 1e-12 * scale);
    }

    #[test]
    fn matvec_leaves_operands_untouched((m, x, _y) in matrix_and_vectors()) {
        let (m0, x0) = (m.clone(), x.clone());
        let first = matvec(&m, &x).unwrap();
        prop_assert_eq!(&m, &m0);
        prop_assert_eq!(&x, &x0);
        prop_assert_eq!(first, matvec(&m, &x).unwrap());
    }

    #[test]
    fn bounded_activations_bound_the_hidden_state(
        variant_idx in 0usize..7,
        sigmoid in any::<bool>(),
        seed in 0u64..1000,
        xs in prop::collection::vec(-5.0f64..5.0, 12),
    ) {
        let variant = Variant::ALL[variant_idx];
        let a = if sigmoid { Activation::Sigmoid } else { Activation::Tanh };
        let cell = VariantSpec::new(variant, a).build().unwrap();
        let p = init_params(cell.as_ref(), 3, 6, 2, seed).unwrap();
        let mut state = CellState::zeros(6);
        for x in xs.chunks(3) {
            let x = Vector::new(x.to_vec()).unwrap();
            let before = (x.clone(), state.clone(), p.clone());
            let (next, _) = cell.step(&p.cell, &x, &state).unwrap();
            prop_assert_eq!(before, (x, state, p.clone()));
            prop_assert!(next.h.max_abs() <= 1.0);
            state = next;
        }
    }
}

/// With every weight at zero and a tanh or relu candidate, the candidate is
/// exactly zero and the memory of a fixed-forget cell decays geometrically.
#[test]
fn fixed_forget_cells_decay_without_input() {
    for (variant, f) in [
        (Variant::Lstm4a, 0.96),
        (Variant::Lstm5a, 0.96),
        (Variant::Lstm6, 0.59),
    ] {
        for a in [Activation::Tanh, Activation::Relu] {
            let cell = VariantSpec::new(variant, a).build().unwrap();
            let mut p = init_params(cell.as_ref(), 2, 4, 2, 3).unwrap();
            for arr in p.arrays_mut() {
                arr.iter_mut().for_each(|x| *x = 0.0);
            }
            let c0 = Vector::new(vec![3.0, -2.0, 0.5, 7.0]).unwrap();
            let mut state = CellState {
                h: Vector::filled(4, 0.25),
                c: c0.clone(),
            };
            let x = Vector::new(vec![1.0, -1.0]).unwrap();
            for t in 1..=40 {
                state = cell.step(&p.cell, &x, &state).unwrap().0;
                let bound = f64::powi(f, t) * norm(&c0);
                assert!(
                    norm(&state.c) <= bound * (1.0 + 1e-12),
                    "{variant:?} {a:?} t={t}"
                );
            }
        }
    }
}
