use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use fracaffine::affine::{phi, psi, Phi, SymTensor};
use fracaffine::fbm::fbm_cov_oracle;
use fracaffine::field::{make_kernel, FieldGrid, OUState};
use fracaffine::mc::{estimate, run_paths, McConfig, Z99};
use fracaffine::measure::{discretize, GridConfig, GridMeasure, MeasureSpec};
use fracaffine::numerics::GaussianFactor;
use fracaffine::rates::{black_option, cap_floor, zcb_price, CapKind, CapSchedule, OptionKind, RateKind, RateModel};
use fracaffine::stein::{pi_mean, pi_second_moment};

fn grid_strategy(max_n: usize) -> impl Strategy<Value = (FieldGrid, Vec<f64>, Vec<f64>)> {
    (1..=max_n).prop_flat_map(|n| {
        (
            proptest::collection::vec(-1.0f64..0.8, n),
            proptest::collection::vec(0.1f64..1.0, n),
            proptest::collection::vec(0.1f64..1.0, n),
            proptest::collection::vec(-1.0f64..1.0, n),
            proptest::collection::vec(-1.0f64..1.0, n),
        )
            .prop_map(|(logs, wm, wn, u, v)| {
                let mut atoms: Vec<f64> = logs.iter().map(|l| 10f64.powf(*l)).collect();
                atoms.sort_by(f64::total_cmp);
                atoms.dedup_by(|a, b| (*a - *b).abs() < 1e-9 * *b);
                let n = atoms.len();
                let gm_mu = GridMeasure::new(atoms.clone(), wm[..n].to_vec()).unwrap();
                let gm_nu = GridMeasure::new(atoms, wn[..n].to_vec()).unwrap();
                (FieldGrid::new(&gm_mu, Some(&gm_nu)), u[..n].to_vec(), v[..n].to_vec())
            })
    })
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    /// `φ(t + s) = φ(t, φ(s))` on the linear parts and `φ0` adds up.
    #[test]
    fn phi_flow_property((grid, u, v) in grid_strategy(6), t in 0.01f64..2.0, s in 0.01f64..2.0) {
        let whole = phi(&grid, t + s, &u, &v).unwrap();
        let first = phi(&grid, s, &u, &v).unwrap();
        let second = phi(&grid, t, &first.c1, &first.c2).unwrap();
        prop_assert!(close(whole.c0, first.c0 + second.c0, 1e-11));
        for i in 0..grid.len() {
            prop_assert!(close(whole.c1[i], second.c1[i], 1e-12));
            prop_assert!(close(whole.c2[i], second.c2[i], 1e-12));
        }
    }

    /// `Φ1`, `Φ2` are the time integrals of `-φ1`, `-φ2` started from the same `(u, v)`.
    #[test]
    fn big_phi_integrates_phi((grid, u, v) in grid_strategy(4), tau in 0.05f64..3.0) {
        let big = Phi(&grid, tau, &u, &v).unwrap();
        let gl = fracaffine::numerics::GaussLegendre::new(20);
        for i in 0..grid.len() {
            let i1 = gl.composite(0.0, tau, 8, |s| phi(&grid, s, &u, &v).unwrap().c1[i]);
            let i2 = gl.composite(0.0, tau, 8, |s| phi(&grid, s, &u, &v).unwrap().c2[i]);
            prop_assert!(close(big.c1[i], -i1, 1e-10));
            prop_assert!(close(big.c2[i], -i2, 1e-10));
        }
    }

    #[test]
    fn fbm_covariance_is_self_similar(h in 0.05f64..0.95, s in 0.1f64..3.0, t in 0.1f64..3.0, c in 0.2f64..5.0) {
        let base = fbm_cov_oracle(h, s, t).unwrap();
        let scaled = fbm_cov_oracle(h, c * s, c * t).unwrap();
        prop_assert!(close(scaled, c.powf(2.0 * h) * base, 1e-12));
    }

    #[test]
    fn laplace_transform_decreases(h in prop_oneof![0.1f64..0.45, 0.55f64..0.9], t1 in 0.01f64..5.0, dt in 0.01f64..5.0) {
        let spec = if h < 0.5 { MeasureSpec::fbm_mu(h) } else { MeasureSpec::fbm_nu(h) };
        let gm = discretize(&spec, &GridConfig::new(1e-4, 1e4, 40)).unwrap();
        prop_assert!(gm.laplace(t1 + dt) < gm.laplace(t1));
        prop_assert!(gm.weights.iter().all(|&w| w > 0.0));
    }

    #[test]
    fn put_call_parity((grid, u, _v) in grid_strategy(5), k in 0.7f64..1.3, t in 0.1f64..3.0, gap in 0.05f64..3.0,
                       bank in any::<bool>()) {
        let n = grid.len();
        let kind = if bank { RateKind::BankAccount } else { RateKind::ShortRate };
        let state = OUState::zero(&grid);
        let m = RateModel::new(kind, 0.01, grid, u, vec![0.0; n], state).unwrap();
        let c = black_option(&m, t, t + gap, k, OptionKind::Call).unwrap();
        let p = black_option(&m, t, t + gap, k, OptionKind::Put).unwrap();
        let fwd = zcb_price(&m, t + gap).unwrap() - k * zcb_price(&m, t).unwrap();
        prop_assert!((c - p - fwd).abs() <= 1e-12);
        prop_assert!(c >= fwd.max(0.0) - 1e-15 && p >= (-fwd).max(0.0) - 1e-15);
    }

    /// Cap minus floor is the swap-like portfolio `Σ P(T_{k-1}) - (1+Δκ) P(T_k)`.
    #[test]
    fn cap_floor_parity((grid, u, _v) in grid_strategy(4), kappa in -0.02f64..0.08, periods in 1usize..6) {
        let n = grid.len();
        let state = OUState::zero(&grid);
        let m = RateModel::new(RateKind::ShortRate, 0.02, grid, u, vec![0.0; n], state).unwrap();
        let sched = CapSchedule { t0: 0.5, delta: 0.25, n: periods, kappa };
        let cap = cap_floor(&m, &sched, CapKind::Cap).unwrap();
        let floor = cap_floor(&m, &sched, CapKind::Floor).unwrap();
        let swap: f64 = sched.periods().iter()
            .map(|&(a, b)| zcb_price(&m, a).unwrap() - (1.0 + 0.25 * kappa) * zcb_price(&m, b).unwrap())
            .sum();
        prop_assert!((cap.total - floor.total - swap).abs() <= 1e-12);
        prop_assert_eq!(cap.legs.len(), periods);
    }

    #[test]
    fn pi_second_moment_dominates_mean((grid, v, y) in grid_strategy(6), sigma in 0.01f64..3.0) {
        let mu_only = FieldGrid::new(&GridMeasure::new(grid.atoms.clone(), grid.mu_weights.clone()).unwrap(), None);
        let w = SymTensor::from_rank_one(vec![(1.0, v.clone())]);
        let m1 = pi_mean(&mu_only, &y, sigma, &v);
        let m2 = pi_second_moment(&mu_only, &y, sigma, &w).unwrap();
        prop_assert!(m2 >= m1 * m1 * (1.0 - 1e-12));
    }

    #[test]
    fn psi_is_symmetric_and_real_below_the_cut((grid, a, b) in grid_strategy(5), tau in 0.1f64..3.0, z in -0.3f64..0.3) {
        let tensor = SymTensor::symmetric_product(a, b);
        match psi(&grid, tau, &tensor, Complex64::new(z, 0.0)) {
            Ok(c) => {
                let d = c.psi1.dense(grid.len());
                prop_assert!((&d - d.transpose()).iter().all(|e| e.norm() < 1e-12 * (1.0 + d.iter().map(|x| x.norm()).fold(0.0, f64::max))));
                if !c.warning {
                    prop_assert!(c.psi0.im.abs() < 1e-14);
                }
            }
            // a one-atom grid cannot carry a rank-two tensor
            Err(e) => prop_assert!(grid.len() < 2 && e.is_numerical()),
        }
    }

    #[test]
    fn gaussian_factor_reproduces_covariance(seed in proptest::collection::vec(-1.0f64..1.0, 16), diag in 0.01f64..2.0) {
        let a = DMatrix::from_row_slice(4, 4, &seed);
        let cov = &a * a.transpose() + DMatrix::identity(4, 4) * diag;
        let f = GaussianFactor::from_covariance(&cov).unwrap();
        let back = f.covariance();
        let scale = cov.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        prop_assert!((back - &cov).iter().all(|e| e.abs() <= 1e-10 * scale));
    }

    #[test]
    fn confidence_interval_is_symmetric(samples in proptest::collection::vec(-10.0f64..10.0, 2..200)) {
        let e = estimate(&samples, false).unwrap();
        prop_assert!(close(e.ci_high - e.mean, Z99 * e.se, 1e-12));
        prop_assert!(close(e.mean - e.ci_low, Z99 * e.se, 1e-12));
        prop_assert_eq!(e.n_effective, samples.len());
    }
}

#[test]
fn antithetic_pairs_center_linear_functionals() {
    let gm = discretize(&MeasureSpec::fbm_mu(0.3), &GridConfig::new(1e-2, 1e2, 12)).unwrap();
    let grid = FieldGrid::new(&gm, None);
    let y0: Vec<f64> = (0..grid.len()).map(|i| (i as f64).sin()).collect();
    let u: Vec<f64> = (0..grid.len()).map(|i| 1.0 / (1.0 + i as f64)).collect();
    let kernel = make_kernel(&grid, 0.7).unwrap();
    let mut mc = McConfig::new(64, 5);
    mc.antithetic = true;
    let vals = run_paths(&mc, |_, rng| {
        let mut s = OUState {
            t: 0.0,
            y: y0.clone(),
            z: vec![],
        };
        kernel.step_in_place(&mut s, rng);
        grid.pair_mu(&s.y, &u)
    })
    .unwrap();
    let decayed: Vec<f64> = y0.iter().zip(&kernel.decay).map(|(a, d)| a * d).collect();
    let mean = grid.pair_mu(&decayed, &u);
    for pair in vals.chunks(2) {
        assert!((0.5 * (pair[0] + pair[1]) - mean).abs() < 1e-12);
    }
}
