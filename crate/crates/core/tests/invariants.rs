//! Property tests of the structural identities, checked against dense
//! linear algebra rather than the library's own routines.

use std::f64::consts::TAU;

use benney_core::polyfam::LaxPoly;
use benney_core::reduction::{self, ReducedState};
use benney_core::solver::{self, FieldState, Grid1D, SolverConfig};
use benney_core::spectral::build_a;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use proptest::prelude::*;

fn det_shifted(u: &[f64], p: f64) -> f64 {
    let n = u.len();
    (DMatrix::<f64>::identity(n, n) * p - build_a(u)).determinant()
}

fn reduced_data(grid: &Grid1D, a: f64, b: f64, phase: f64) -> FieldState {
    FieldState {
        components: vec![
            grid.sample(|x| 1.0 + a * (TAU * x + phase).sin()),
            grid.sample(|x| 0.5 + b * (TAU * x).cos()),
        ],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shifted_determinant_matches_fp(
        u in prop::collection::vec(-2.0f64..2.0, 2..=8),
        p in -3.0f64..3.0,
    ) {
        let f = LaxPoly::new(u.clone()).unwrap();
        let fp = f.eval_derivative(1, Complex64::new(p, 0.0)).re;
        let det = det_shifted(&u, p);
        prop_assert!((det - fp).abs() <= 1e-9 * (1.0 + fp.abs()), "det {det} vs F_p {fp}");
    }

    #[test]
    fn reduced_closed_form_matches_symmetric_solve(w in -3.0f64..3.0, v in -3.0f64..3.0) {
        let s = ReducedState::new(w, v);
        let (l1, l2) = reduction::eigs2(s);
        let e = SymmetricEigen::new(DMatrix::from_row_slice(2, 2, &[v, w, w, -3.0 * v]));
        let hi = e.eigenvalues.max();
        let lo = e.eigenvalues.min();
        let (a, b) = if l1 >= l2 { (l1, l2) } else { (l2, l1) };
        prop_assert!((a - hi).abs() < 1e-12 && (b - lo).abs() < 1e-12);
    }

    #[test]
    fn rusanov_conserves_sums_and_respects_cfl(
        a in 0.0f64..0.2, b in 0.0f64..0.2, phase in 0.0f64..TAU, cfl in 0.1f64..0.9,
    ) {
        let grid = Grid1D::unit(64).unwrap();
        let init = reduced_data(&grid, a, b, phase);
        let cfg = SolverConfig { cfl, tmax: 0.3, blowup_threshold: None, ..SolverConfig::default() };
        let traj = solver::simulate_2x2(grid, &init, &cfg).unwrap();
        prop_assert!(traj.meta.reached_tmax);
        prop_assert!(traj.meta.max_cfl <= cfl * (1.0 + 1e-12));
        for (c0, c1) in init.components.iter().zip(&traj.last().state.components) {
            let (s0, s1): (f64, f64) = (c0.iter().sum(), c1.iter().sum());
            prop_assert!((s1 - s0).abs() <= 1e-12 * s0.abs().max(1.0));
        }
    }

    #[test]
    fn runs_are_deterministic(a in 0.0f64..0.2, b in 0.0f64..0.2, phase in 0.0f64..TAU) {
        let grid = Grid1D::unit(32).unwrap();
        let init = reduced_data(&grid, a, b, phase);
        let cfg = SolverConfig::with_tmax(0.1);
        let first = solver::simulate_2x2(grid, &init, &cfg).unwrap();
        let second = solver::simulate_2x2(grid, &init, &cfg).unwrap();
        prop_assert_eq!(first, second);
    }

    #[test]
    fn constant_lax_states_are_fixed_points(u in prop::collection::vec(-1.0f64..1.0, 2..=5)) {
        let grid = Grid1D::unit(16).unwrap();
        let init = FieldState::constant(&u, grid.cells);
        let traj = solver::simulate_quasilinear(grid, &init, &SolverConfig::with_tmax(0.1)).unwrap();
        prop_assert_eq!(&traj.last().state, &init);
    }
}
