//! Closed forms checked against simulation at moderate path counts.

use fracaffine::affine::mgf;
use fracaffine::field::{make_kernel, FieldGrid, OUState};
use fracaffine::mc::{estimate, run_paths, variance_estimate, McConfig};
use fracaffine::measure::{discretize, discretize_pair, GridConfig, GridMeasure, MeasureSpec};
use fracaffine::rates::{
    black_option, cap_floor, forward_curve, model_covariation, zcb_price, BankAccountSimulator, CapKind, CapSchedule,
    OptionKind, RateKind, RateModel,
};
use fracaffine::stein::{iv_moments, logprice_cdf_uncorrelated, run_stein_ensemble, SteinModel, SteinSimulator};

fn fbm_grid(n: usize, lo: f64, hi: f64) -> FieldGrid {
    let gm = discretize(&MeasureSpec::fbm_mu(0.3), &GridConfig::new(lo, hi, n)).unwrap();
    FieldGrid::new(&gm, None)
}

fn stein_model(rho: f64) -> SteinModel {
    let grid = fbm_grid(6, 1e-1, 1e1);
    let n = grid.len();
    let y0: Vec<f64> = (0..n).map(|i| 0.2 - 0.05 * i as f64).collect();
    SteinModel::new(grid, vec![0.4; n], rho, 1.0, y0).unwrap()
}

fn unit_times(steps: usize) -> Vec<f64> {
    (0..=steps).map(|k| k as f64 / steps as f64).collect()
}

fn short_rate(u: f64) -> RateModel {
    let grid = FieldGrid::new(&GridMeasure::single(1.0, 1.0).unwrap(), None);
    let state = OUState::zero(&grid);
    RateModel::new(RateKind::ShortRate, 0.02, grid, vec![u], vec![0.0], state).unwrap()
}

#[test]
fn mgf_matches_simulation_with_integrated_coordinates() {
    let (gm_mu, gm_nu) = discretize_pair(
        &MeasureSpec::power_law(0.5, 0.7),
        &MeasureSpec::power_law(0.3, 0.2),
        &GridConfig::new(1e-1, 1e1, 5),
    )
    .unwrap();
    let grid = FieldGrid::new(&gm_mu, Some(&gm_nu));
    let n = grid.len();
    let u = vec![0.3; n];
    let v = vec![-0.2; n];
    let state = OUState {
        t: 0.0,
        y: (0..n).map(|i| 0.1 * i as f64).collect(),
        z: vec![0.05; n],
    };
    let tau = 1.5;
    let kernel = make_kernel(&grid, tau).unwrap();
    let samples = run_paths(&McConfig::new(40_000, 21), |_, rng| {
        let mut s = state.clone();
        kernel.step_in_place(&mut s, rng);
        (grid.pair_mu(&s.y, &u) + grid.pair_nu(&s.z, &v)).exp()
    })
    .unwrap();
    let est = estimate(&samples, false).unwrap();
    let exact = mgf(&grid, &state, tau, &u, &v).unwrap();
    assert!(est.within(exact, 4.0), "mgf {exact} vs {} ± {}", est.mean, est.se);
}

#[test]
fn integrated_variance_moments_match_simulation() {
    let model = stein_model(0.0);
    let iv = iv_moments(&model, &model.y0, 0.0, 1.0).unwrap();
    let sim = SteinSimulator::new(&model, &model.initial_state(), &unit_times(32), 8).unwrap();
    let masses = run_paths(&McConfig::new(20_000, 22), |_, rng| {
        *sim.sample(rng).variance_mass.last().unwrap()
    })
    .unwrap();
    let first = estimate(&masses, false).unwrap();
    let squares: Vec<f64> = masses.iter().map(|m| m * m).collect();
    let second = estimate(&squares, false).unwrap();
    assert!(first.within(iv.mean, 4.0), "mean {} vs {}", iv.mean, first.mean);
    assert!(
        second.within(iv.second_moment, 4.0),
        "second {} vs {}",
        iv.second_moment,
        second.mean
    );
    assert!((iv.mean_normalized - iv.mean).abs() < 1e-15);
}

/// With independent drivers `X_T - X_0 = -V/2 + M` where `E[M² | V] = V`.
#[test]
fn log_return_second_moment_uncorrelated() {
    let model = stein_model(0.0);
    let iv = iv_moments(&model, &model.y0, 0.0, 1.0).unwrap();
    let mut mc = McConfig::new(20_000, 23);
    mc.sub_steps = 8;
    let ens = run_stein_ensemble(&model, &unit_times(32), &mc).unwrap();
    let sq: Vec<f64> = ens.values.iter().map(|p| (p[32] - p[0]).powi(2)).collect();
    let est = estimate(&sq, false).unwrap();
    let exact = iv.mean + 0.25 * iv.second_moment;
    assert!(est.within(exact, 4.0), "{exact} vs {} ± {}", est.mean, est.se);
}

#[test]
fn mixture_cdf_matches_empirical_distribution() {
    let model = stein_model(0.0);
    let n_emp = 10_000;
    let mut mc = McConfig::new(n_emp, 24);
    mc.sub_steps = 8;
    let ens = run_stein_ensemble(&model, &unit_times(32), &mc).unwrap();
    let mut finals: Vec<f64> = ens.values.iter().map(|p| p[32]).collect();
    finals.sort_by(f64::total_cmp);
    let xs: Vec<f64> = [0.1, 0.25, 0.5, 0.75, 0.9]
        .iter()
        .map(|q| finals[(q * n_emp as f64) as usize])
        .collect();
    let mut mix_mc = McConfig::new(10_000, 25);
    mix_mc.sub_steps = 8;
    let cdf = logprice_cdf_uncorrelated(&model, &model.initial_state(), 1.0, 32, &xs, &mix_mc).unwrap();
    for (x, f) in xs.iter().zip(&cdf) {
        let empirical = finals.partition_point(|a| a <= x) as f64 / n_emp as f64;
        let band = 3.0 * (2.0 * f * (1.0 - f) / n_emp as f64).sqrt();
        assert!((empirical - f).abs() <= band, "x={x}: {empirical} vs {f}");
    }
}

#[test]
fn mixture_cdf_rejects_correlation() {
    let model = stein_model(0.3);
    let err = logprice_cdf_uncorrelated(&model, &model.initial_state(), 1.0, 4, &[0.0], &McConfig::new(10, 1));
    assert!(err.is_err());
}

/// Realized covariation of two Musiela forwards over `[0, 1]`.
#[test]
fn realized_forward_covariation() {
    let grid = fbm_grid(5, 1e-1, 1e1);
    let n = grid.len();
    let state = OUState::zero(&grid);
    let model = RateModel::new(
        RateKind::ShortRate,
        0.02,
        grid.clone(),
        vec![0.3; n],
        vec![0.0; n],
        state,
    )
    .unwrap();
    let (tau1, tau2) = (0.5, 2.0);
    let steps = 512;
    let kernel = make_kernel(&grid, 1.0 / steps as f64).unwrap();
    let realized = run_paths(&McConfig::new(50, 26), |_, rng| {
        let mut s = model.state.clone();
        let mut prev = forward_curve(&model, &[tau1, tau2]).unwrap();
        let mut acc = 0.0;
        for _ in 0..steps {
            kernel.step_in_place(&mut s, rng);
            let next = forward_curve(&model.with_state(s.clone()), &[tau1, tau2]).unwrap();
            acc += (next[0] - prev[0]) * (next[1] - prev[1]);
            prev = next;
        }
        acc
    })
    .unwrap();
    let mean = realized.iter().sum::<f64>() / realized.len() as f64;
    let exact = model_covariation(&model, tau1, tau2).unwrap();
    assert!((mean / exact - 1.0).abs() < 0.05, "{mean} vs {exact}");
}

#[test]
fn short_rate_caplet_matches_simulation() {
    let model = short_rate(0.5);
    let sched = CapSchedule {
        t0: 1.0,
        delta: 0.5,
        n: 1,
        kappa: 0.02,
    };
    let closed = cap_floor(&model, &sched, CapKind::Cap).unwrap().total;
    let times: Vec<f64> = (0..=4).map(|k| 0.25 * k as f64).collect();
    let sim = BankAccountSimulator::new(&model, &times, 16).unwrap();
    let payoffs = run_paths(&McConfig::new(40_000, 27), |_, rng| {
        let p = sim.sample(rng);
        let later = model.with_state(p.states[4].clone());
        let bond = zcb_price(&later, 1.5).unwrap();
        let strike = 1.0 / (1.0 + 0.5 * 0.02);
        // a caplet is (1 + Δκ) puts on the bond maturing at the payment date
        p.discount_factors()[4] * (1.0 + 0.5 * 0.02) * (strike - bond).max(0.0)
    })
    .unwrap();
    let est = estimate(&payoffs, false).unwrap();
    assert!(est.within(closed, 4.0), "{closed} vs {} ± {}", est.mean, est.se);
}

#[test]
fn option_prices_are_monotone_in_strike() {
    let model = short_rate(0.5);
    let ks = [0.9, 0.95, 1.0, 1.05];
    let calls: Vec<f64> = ks
        .iter()
        .map(|&k| black_option(&model, 1.0, 2.0, k, OptionKind::Call).unwrap())
        .collect();
    let puts: Vec<f64> = ks
        .iter()
        .map(|&k| black_option(&model, 1.0, 2.0, k, OptionKind::Put).unwrap())
        .collect();
    assert!(calls.windows(2).all(|w| w[1] < w[0]));
    assert!(puts.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn standard_error_scales_with_path_count() {
    let model = short_rate(0.5);
    let sim = BankAccountSimulator::new(&model, &[0.0, 1.0], 8).unwrap();
    let se = |n: usize| {
        let d = run_paths(&McConfig::new(n, 28), |_, rng| sim.sample(rng).discount_factors()[1]).unwrap();
        estimate(&d, false).unwrap().se
    };
    let ratio = se(4_000) / se(16_000);
    assert!((ratio / 2.0 - 1.0).abs() < 0.2, "ratio {ratio}");
}

#[test]
fn antithetic_sampling_reduces_bond_variance() {
    let model = short_rate(0.5);
    let sim = BankAccountSimulator::new(&model, &[0.0, 1.0, 2.0], 8).unwrap();
    let run = |antithetic: bool| {
        let mut mc = McConfig::new(10_000, 29);
        mc.antithetic = antithetic;
        let d = run_paths(&mc, |_, rng| sim.sample(rng).discount_factors()[2]).unwrap();
        estimate(&d, antithetic).unwrap()
    };
    let plain = run(false);
    let anti = run(true);
    assert!(anti.se <= plain.se, "{} > {}", anti.se, plain.se);
    assert!(anti.within(zcb_price(&model, 2.0).unwrap(), 4.0));
}

#[test]
fn euler_refinement_is_below_noise() {
    let model = stein_model(-0.5);
    let second_moment = |sub: usize| {
        let mut mc = McConfig::new(20_000, 30);
        mc.sub_steps = sub;
        let ens = run_stein_ensemble(&model, &unit_times(16), &mc).unwrap();
        let sq: Vec<f64> = ens.values.iter().map(|p| p[16].powi(2)).collect();
        estimate(&sq, false).unwrap()
    };
    let coarse = second_moment(2);
    let fine = second_moment(4);
    let gap = (coarse.mean - fine.mean).abs();
    assert!(gap <= 3.0 * coarse.se.hypot(fine.se), "gap {gap}");
}

#[test]
fn variance_estimate_is_unbiased_form() {
    let (var, se) = variance_estimate(&[1.0, 2.0, 3.0, 4.0]);
    assert!((var - 5.0 / 3.0).abs() < 1e-15);
    assert!(se > 0.0);
}
