//! `validate`: the structural checks at a budget small enough for CI.

use anyhow::Result;
use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;

use fracaffine::affine::{riccati_residual, RiccatiArgs, SymTensor};
use fracaffine::field::OUState;
use fracaffine::io::fmt_float;
use fracaffine::mc::{estimate, run_paths};
use fracaffine::measure::{discretize, fbm_laplace_error, MeasureFamily, MeasureSpec};
use fracaffine::numerics::integrate_adaptive;
use fracaffine::rates::{
    black_option, hjm_coefficients, zcb_price, BankAccountSimulator, OptionKind, RateKind, RateModel,
};

use crate::commands::Outcome;
use crate::config::{GridBlock, RunConfig};

const DEFAULT_HURST: f64 = 0.3;
const LAPLACE_TAUS: [f64; 5] = [0.1, 0.5, 1.0, 5.0, 10.0];
const RICCATI_TAUS: [f64; 3] = [0.1, 1.0, 5.0];

#[derive(Debug, Serialize)]
struct Check {
    name: &'static str,
    value: f64,
    threshold: f64,
    pass: bool,
}

fn check(name: &'static str, value: f64, threshold: f64) -> Check {
    Check {
        name,
        value,
        threshold,
        pass: value <= threshold,
    }
}

/// The configured grid, or the fBM grid for the configured (default 0.3) Hurst index.
fn grid_block(cfg: &RunConfig) -> GridBlock {
    if let Some(g) = &cfg.grid {
        return g.clone();
    }
    let h = cfg.model.as_ref().and_then(|m| m.hurst).unwrap_or(DEFAULT_HURST);
    let spec = if h < 0.5 {
        MeasureSpec::fbm_mu(h)
    } else {
        MeasureSpec::fbm_nu(h)
    };
    let spacing = fracaffine::measure::GridConfig::default();
    GridBlock {
        mu: (h < 0.5).then_some(spec),
        nu: (h >= 0.5).then_some(spec),
        x_min: spacing.x_min,
        x_max: spacing.x_max,
        n: spacing.n,
    }
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    let gb = grid_block(cfg);
    let grid = gb.field_grid()?;
    let n = grid.len();
    let mut checks = Vec::new();

    let fbm_specs = [gb.mu, gb.nu]
        .into_iter()
        .flatten()
        .filter(|s| matches!(s.family, MeasureFamily::FbmMu | MeasureFamily::FbmNu));
    for spec in fbm_specs {
        let gm = discretize(&spec, &gb.spacing())?;
        checks.push(check(
            "laplace_relative_error",
            fbm_laplace_error(&spec, &gm, &LAPLACE_TAUS)?,
            1e-3,
        ));
    }

    let ones = vec![1.0; n];
    let v = if grid.track_z { ones.clone() } else { vec![0.0; n] };
    let args = [
        RiccatiArgs::Phi {
            u: ones.clone(),
            v: v.clone(),
        },
        RiccatiArgs::BigPhi {
            u: ones.clone(),
            v: v.clone(),
        },
        RiccatiArgs::Psi {
            tensor: SymTensor::from_rank_one(vec![(1.0, ones.clone())]),
            z: Complex64::new(0.0, 0.7),
        },
    ];
    let mut riccati: f64 = 0.0;
    for &tau in &RICCATI_TAUS {
        for a in &args {
            riccati = riccati.max(riccati_residual(&grid, tau, a)?);
        }
    }
    checks.push(check("riccati_relative_residual", riccati, 1e-6));

    let short = RateModel::new(
        RateKind::ShortRate,
        0.02,
        grid.clone(),
        ones.clone(),
        v.clone(),
        OUState::zero(&grid),
    )?;
    let mut hjm: f64 = 0.0;
    for &tau in &[0.25, 1.0, 5.0] {
        let (drift, sigma) = hjm_coefficients(&short, tau)?;
        let int = integrate_adaptive(0.0, tau, 1e-16, 1e-12, |s| {
            hjm_coefficients(&short, s).map(|c| c.1).unwrap_or(f64::NAN)
        })?;
        hjm = hjm.max((drift - sigma * int).abs() / drift.abs().max(1e-300));
    }
    checks.push(check("hjm_drift_relative_residual", hjm, 1e-6));

    let mut parity: f64 = 0.0;
    for &k in &[0.9, 1.0, 1.1] {
        let c = black_option(&short, 1.0, 2.0, k, OptionKind::Call)?;
        let p = black_option(&short, 1.0, 2.0, k, OptionKind::Put)?;
        parity = parity.max((c - p - zcb_price(&short, 2.0)? + k * zcb_price(&short, 1.0)?).abs());
    }
    checks.push(check("put_call_parity", parity, 1e-12));

    // bank-account paths are exact in law, so only sampling error remains
    let small = vec![0.2; n];
    let v_small = if grid.track_z { small.clone() } else { vec![0.0; n] };
    let ba = RateModel::new(
        RateKind::BankAccount,
        0.02,
        grid.clone(),
        small,
        v_small,
        OUState::zero(&grid),
    )?;
    let sim = BankAccountSimulator::new(&ba, &[0.0, 0.5, 1.0], 1)?;
    let mc = cfg.mc();
    let discounts = run_paths(&mc, |_, rng| sim.sample(rng).discount_factors()[2])?;
    let z = estimate(&discounts, mc.antithetic)?.z_score(zcb_price(&ba, 1.0)?);
    checks.push(check("zcb_monte_carlo_abs_z", z.abs(), 4.0));

    let passed = checks.iter().all(|c| c.pass);
    let mut csv = String::from("check,value,threshold,pass\n");
    for c in &checks {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            c.name,
            fmt_float(c.value),
            fmt_float(c.threshold),
            c.pass
        ));
    }
    Ok(Outcome {
        n: checks.len(),
        csv: Some(csv),
        json: json!({ "pass": passed, "checks": checks, "grid": gb }),
        passed,
    })
}
