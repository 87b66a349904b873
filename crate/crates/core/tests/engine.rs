use ctcsim::ctc_engine::{
    build_superoperator, deutsch_map, evolve, solve_fixed_point, spectral_radius, CtcChannel,
    DeutschProblem, SolverMethod, SolverOptions,
};
use ctcsim::error::Error;
use ctcsim::linalg::{trace_distance, CMatrix, Complex64};
use ctcsim::quantum::{swap_gate, DensityMatrix, Layout, Unitary};
use ctcsim::random::{self, SimRng};
use ctcsim::sweep::random_problem;
use proptest::prelude::*;

fn problem(rng: &mut SimRng, d_cr: usize, d_ctc: usize) -> DeutschProblem {
    let layout = Layout::with_ctc(&[("Q", d_cr)], d_ctc).unwrap();
    let u = random::random_unitary(rng, d_cr * d_ctc);
    let rho = DensityMatrix::single(random::random_density(rng, d_cr)).unwrap();
    DeutschProblem::new(layout, u, rho).unwrap()
}

fn state(rng: &mut SimRng, d: usize) -> DensityMatrix {
    DensityMatrix::single(random::random_density(rng, d)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn ctc_map_is_cptp(seed in any::<u64>(), d_cr in 2usize..4, d_ctc in 2usize..4) {
        let mut rng = random::rng(seed);
        let p = problem(&mut rng, d_cr, d_ctc);
        let ch = CtcChannel::new(&p).unwrap();
        let sum = ch.kraus().iter().fold(CMatrix::zeros(d_ctc, d_ctc), |acc, k| &acc + &(&k.adjoint() * k));
        prop_assert!(sum.max_abs_diff(&CMatrix::identity(d_ctc)) <= 1e-10);
        let x = state(&mut rng, d_ctc);
        let image = deutsch_map(&p, &x).unwrap();
        prop_assert!(image.matrix().max_abs_diff(&ch.apply(x.matrix())) <= 1e-11);
        prop_assert!(image.eigenvalues().unwrap().iter().all(|&l| l >= -1e-12));
    }

    #[test]
    fn superoperator_matches_map(seed in any::<u64>(), d_cr in 2usize..4, d_ctc in 2usize..4) {
        let mut rng = random::rng(seed);
        let p = problem(&mut rng, d_cr, d_ctc);
        let s = build_superoperator(&p).unwrap();
        for _ in 0..10 {
            let x = state(&mut rng, d_ctc);
            let via_s = CMatrix::from_vectorized(d_ctc, &s.mul_vec(&x.matrix().vectorize())).unwrap();
            let direct = deutsch_map(&p, &x).unwrap();
            prop_assert!(via_s.max_abs_diff(direct.matrix()) <= 1e-11);
        }
    }

    #[test]
    fn spectral_radius_is_one(seed in any::<u64>(), d in 2usize..4) {
        let mut rng = random::rng(seed);
        let p = random_problem(&mut rng, d).unwrap();
        let r = spectral_radius(&p).unwrap();
        prop_assert!((r - 1.0).abs() <= 1e-10, "radius {r}");
    }

    #[test]
    fn solvers_agree_on_unique_fixed_points(seed in any::<u64>(), d_cr in 2usize..4, d_ctc in 2usize..4) {
        let mut rng = random::rng(seed);
        let p = problem(&mut rng, d_cr, d_ctc);
        let eig = solve_fixed_point(&p, &SolverOptions::with_method(SolverMethod::Eig)).unwrap();
        let ces = solve_fixed_point(&p, &SolverOptions::with_method(SolverMethod::Cesaro)).unwrap();
        prop_assert!(eig.residual <= 1e-10 && ces.residual <= 1e-10);
        if eig.multiplicity == 1 {
            let d = trace_distance(eig.rho_ctc.matrix(), ces.rho_ctc.matrix()).unwrap();
            prop_assert!(d <= 1e-8, "distance {d}");
        }
    }

    #[test]
    fn spectator_leaves_fixed_point_alone(seed in any::<u64>(), d in 2usize..4, d_s in 2usize..4) {
        let mut rng = random::rng(seed);
        let p = problem(&mut rng, d, d);
        let spectator = state(&mut rng, d_s);
        let ext = p
            .with_spectator(1, "S", d_s, p.cr_input().kron(&spectator))
            .unwrap();
        let opts = SolverOptions::with_method(SolverMethod::Eig);
        let (a, b) = (solve_fixed_point(&p, &opts).unwrap(), solve_fixed_point(&ext, &opts).unwrap());
        prop_assert!(trace_distance(a.rho_ctc.matrix(), b.rho_ctc.matrix()).unwrap() <= 1e-10);
    }
}

#[test]
fn swap_hands_the_input_back() {
    let mut rng = random::rng(3);
    let layout = Layout::with_ctc(&[("Q", 3)], 3).unwrap();
    let u = swap_gate(&layout, "Q", "CTC").unwrap();
    let rho = state(&mut rng, 3);
    let p = DeutschProblem::new(layout, u, rho.clone()).unwrap();
    let (out, fp) = evolve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(fp.multiplicity, 1);
    assert!(trace_distance(fp.rho_ctc.matrix(), rho.matrix()).unwrap() <= 1e-12);
    assert!(trace_distance(out.matrix(), rho.matrix()).unwrap() <= 1e-12);
}

#[test]
fn identity_interaction_selects_canonically() {
    let layout = Layout::with_ctc(&[("Q", 2)], 3).unwrap();
    let p = DeutschProblem::new(
        layout,
        Unitary::identity(6),
        DensityMatrix::basis(2, 1).unwrap(),
    )
    .unwrap();
    for method in [SolverMethod::Eig, SolverMethod::Cesaro] {
        let fp = solve_fixed_point(&p, &SolverOptions::with_method(method)).unwrap();
        assert_eq!(fp.multiplicity, 9);
        assert!(fp.is_canonical_selection());
        assert!(fp.residual <= 1e-12);
        let mixed = CMatrix::identity(3).scale_real(1.0 / 3.0);
        assert!(
            fp.rho_ctc.matrix().max_abs_diff(&mixed) <= 1e-12,
            "{method:?}"
        );
    }
}

#[test]
fn unconverged_averaging_is_reported() {
    let mut rng = random::rng(5);
    let p = problem(&mut rng, 2, 2);
    let opts = SolverOptions {
        max_iter: 1,
        ..SolverOptions::with_method(SolverMethod::Cesaro)
    };
    assert!(matches!(
        solve_fixed_point(&p, &opts),
        Err(Error::NonConvergence { .. })
    ));
}

#[test]
fn mismatched_problems_are_rejected() {
    let layout = Layout::with_ctc(&[("Q", 2)], 2).unwrap();
    let mut rng = random::rng(9);
    assert!(DeutschProblem::new(
        layout.clone(),
        random::random_unitary(&mut rng, 3),
        DensityMatrix::basis(2, 0).unwrap()
    )
    .is_err());
    assert!(DeutschProblem::new(
        layout,
        random::random_unitary(&mut rng, 4),
        DensityMatrix::basis(3, 0).unwrap()
    )
    .is_err());
    let n = Complex64::new(f64::NAN, 0.0);
    assert!(
        CMatrix::new(1, 1, vec![n]).is_err()
            || DensityMatrix::single(CMatrix::new(1, 1, vec![n]).unwrap()).is_err()
    );
}
