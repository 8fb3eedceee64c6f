//! Property tests for the structural invariants of the chaos algebra and
//! the operator toolkit.

use krdiv::chaos::{gauss_hermite_grid, multi_indices, project, ChaosFn, VectorField};
use krdiv::malliavin::{derivative, divergence, min_norm_field, number_operator, ou_semigroup};
use proptest::prelude::*;

fn chaos_strategy(dim: usize, max_degree: u32) -> impl Strategy<Value = ChaosFn> {
    let indices = multi_indices(dim, max_degree);
    let count = indices.len();
    proptest::collection::vec(-1.0f64..1.0, count).prop_map(move |coeffs| {
        ChaosFn::from_coeffs(dim, max_degree, indices.clone().into_iter().zip(coeffs))
            .expect("valid indices")
    })
}

fn field_strategy(dim: usize, max_degree: u32) -> impl Strategy<Value = VectorField> {
    proptest::collection::vec(chaos_strategy(dim, max_degree), dim)
        .prop_map(|components| VectorField::new(components).expect("matching dims"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn parseval_matches_quadrature(f in chaos_strategy(2, 4)) {
        let grid = gauss_hermite_grid(2, 8).unwrap();
        let by_quad = grid.integrate(|x| f.eval(x).unwrap().powi(2));
        prop_assert!((by_quad - f.parseval_norm_sq()).abs() < 1e-8);
    }

    #[test]
    fn projection_inverts_evaluation(f in chaos_strategy(2, 4)) {
        let grid = gauss_hermite_grid(2, 8).unwrap();
        let g = project(|x| f.eval(x).unwrap(), 2, 4, &grid).unwrap();
        prop_assert!(f.max_coeff_distance(&g) < 1e-10);
    }

    #[test]
    fn adjointness_exact(f in chaos_strategy(2, 5), u in field_strategy(2, 4)) {
        let lhs = u.inner_product(&derivative(&f)).unwrap();
        let rhs = divergence(&u).inner_product(&f).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn divergence_is_mean_zero_and_number_operator_composes(
        f in chaos_strategy(2, 5),
        u in field_strategy(2, 4),
    ) {
        prop_assert_eq!(divergence(&u).mean(), 0.0);
        let composed = divergence(&derivative(&f));
        prop_assert!(composed.max_coeff_distance(&number_operator(&f)) < 1e-12);
    }

    #[test]
    fn semigroup_contracts_monotonically(f in chaos_strategy(2, 5), t in 0.0f64..3.0) {
        let now = ou_semigroup(&f, t).unwrap().parseval_norm();
        let later = ou_semigroup(&f, t + 0.5).unwrap().parseval_norm();
        prop_assert!(now <= f.parseval_norm() + 1e-14);
        prop_assert!(later <= now + 1e-14);
    }

    #[test]
    fn minimal_norm_solution_is_orthogonal_to_kernel(alpha in chaos_strategy(2, 4)) {
        let family = krdiv::malliavin::solution_family(&alpha.centered(), 4).unwrap();
        for w in &family.kernel_basis {
            prop_assert!(family.base.inner_product(w).unwrap().abs() < 1e-10);
        }
        let v = min_norm_field(&alpha);
        prop_assert!(
            divergence(&v).max_coeff_distance(&alpha.centered()) < 1e-12
        );
    }
}
