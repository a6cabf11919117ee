mod common;

use common::*;
use gridloss::{
    build_laplacian, effective_resistance, pairwise_total_resistance, perturb_edge,
    total_effective_resistance, EdgePerturbation, Error, WeightedGraph,
};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn penrose_conditions_hold(seed in any::<u64>()) {
        let g = random_graph(&mut rng(seed), 2, 20);
        let lp = build_laplacian(&g).unwrap();
        let (r1, r2) = lp.penrose_residuals();
        prop_assert!(r1 <= 1e-8 && r2 <= 1e-8, "residuals {r1:e} {r2:e}");

        let n = g.n();
        let ones = DVector::from_element(n, 1.0);
        prop_assert!((lp.pseudoinverse() * &ones).amax() <= 1e-10);
        let lmax = lp.laplacian().amax();
        prop_assert!((lp.laplacian() * &ones).amax() <= 1e-10 * lmax);
        prop_assert!(matrix_rel_diff(lp.pseudoinverse(), &spectral_pseudoinverse(lp.laplacian())) <= 1e-8);

        let eig = &lp.spectrum().eigenvalues;
        prop_assert!(eig[0].abs() <= 1e-9 * eig[n - 1]);
        prop_assert!(eig[1] > 1e-9 * eig[n - 1]);
        prop_assert!(eig.as_slice().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn perturbation_matches_rebuild(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, 2, 15);
        let n = g.n();
        let i = r.random_range(0..n);
        let j = (i + r.random_range(1..n)) % n;
        let beta = 10f64.powf(r.random_range(-3.0..1.0));
        let lp = build_laplacian(&g).unwrap();
        let updated = perturb_edge(&lp, &EdgePerturbation::new(i, j, beta).unwrap()).unwrap();
        let rebuilt = build_laplacian(&g.with_added_weight(i, j, beta).unwrap()).unwrap();
        prop_assert!(matrix_rel_diff(updated.pseudoinverse(), rebuilt.pseudoinverse()) <= 1e-8);
        prop_assert!(matrix_rel_diff(updated.laplacian(), rebuilt.laplacian()) <= 1e-15);
    }

    #[test]
    fn resistance_never_increases_with_weight(seed in any::<u64>()) {
        let mut r = rng(seed);
        let g = random_graph(&mut r, 2, 15);
        let n = g.n();
        let i = r.random_range(0..n);
        let j = (i + r.random_range(1..n)) % n;
        let lp = build_laplacian(&g).unwrap();
        let after = perturb_edge(&lp, &EdgePerturbation::new(i, j, r.random_range(0.01..5.0)).unwrap()).unwrap();
        for a in 0..n {
            for b in 0..n {
                let before = effective_resistance(&lp, a, b).unwrap();
                let now = effective_resistance(&after, a, b).unwrap();
                prop_assert!(now <= before + 1e-12, "R[{a},{b}] rose from {before} to {now}");
            }
        }
        prop_assert!(total_effective_resistance(&after) <= total_effective_resistance(&lp) + 1e-12);
    }

    #[test]
    fn kirchhoff_index_two_ways(seed in any::<u64>()) {
        let g = random_graph(&mut rng(seed), 2, 20);
        let lp = build_laplacian(&g).unwrap();
        prop_assert!(rel_diff(total_effective_resistance(&lp), pairwise_total_resistance(&lp)) <= 1e-9);
    }

    #[test]
    fn resistance_is_a_symmetric_nonnegative_pairing(seed in any::<u64>()) {
        let g = random_graph(&mut rng(seed), 2, 12);
        let lp = build_laplacian(&g).unwrap();
        for a in 0..g.n() {
            prop_assert_eq!(effective_resistance(&lp, a, a).unwrap(), 0.0);
            for b in (a + 1)..g.n() {
                let rab = effective_resistance(&lp, a, b).unwrap();
                prop_assert!(rab > 0.0);
                prop_assert_eq!(rab, effective_resistance(&lp, b, a).unwrap());
            }
        }
    }
}

#[test]
fn build_is_deterministic() {
    let g = random_graph(&mut rng(7), 10, 10);
    let a = build_laplacian(&g).unwrap();
    let b = build_laplacian(&g).unwrap();
    assert_eq!(a.pseudoinverse(), b.pseudoinverse());
}

#[test]
fn disconnected_graph_rejected() {
    let g = WeightedGraph::from_triples(4, &[(0, 1, 1.0), (2, 3, 1.0)]).unwrap();
    assert!(matches!(build_laplacian(&g), Err(Error::DisconnectedGraph(_))));
}

#[test]
fn nearly_disconnected_graph_rejected_spectrally() {
    // Connected as a graph, but the bridge is below the spectral tolerance.
    let g = WeightedGraph::from_triples(4, &[(0, 1, 1.0), (1, 2, 1e-14), (2, 3, 1.0)]).unwrap();
    assert!(g.is_connected());
    assert!(matches!(build_laplacian(&g), Err(Error::DisconnectedGraph(_))));
}

#[test]
fn perturbation_index_checked() {
    let g = WeightedGraph::from_triples(2, &[(0, 1, 1.0)]).unwrap();
    let lp = build_laplacian(&g).unwrap();
    let pert = EdgePerturbation::new(0, 5, 1.0).unwrap();
    assert!(matches!(perturb_edge(&lp, &pert), Err(Error::IndexOutOfRange { index: 5, n: 2 })));
    assert!(matches!(effective_resistance(&lp, 0, 2), Err(Error::IndexOutOfRange { .. })));
}
