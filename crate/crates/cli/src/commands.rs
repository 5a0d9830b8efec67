//! Command dispatch. Each command returns its result both as CSV text
//! (when it is tabular) and as a JSON value.

use anyhow::Result;
use serde_json::{json, Value};

use fracaffine::affine::{phi, Phi};
use fracaffine::fbm::{run_fbm_ensemble, FbmConfig};
use fracaffine::field::FieldGrid;
use fracaffine::io::fmt_float;
use fracaffine::mc::PathEnsemble;
use fracaffine::rates::{cap_floor, forward_curve, zcb_price, CapKind, RateModel};
use fracaffine::stein::{iv_moments, logprice_cdf_uncorrelated, run_stein_ensemble, SteinModel};

use crate::config::{config_error, require, Command, ModelBlock, RunConfig};
use crate::validate;

pub struct Outcome {
    /// Number of rows, paths or checks, for the summary line.
    pub n: usize,
    pub csv: Option<String>,
    pub json: Value,
    /// False when a validation check failed.
    pub passed: bool,
}

impl Outcome {
    fn table(n: usize, csv: String, json: Value) -> Self {
        Outcome {
            n,
            csv: Some(csv),
            json,
            passed: true,
        }
    }
}

fn rows_csv(header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut buf = Vec::new();
    fracaffine::io::write_csv(&mut buf, header, rows.iter().cloned()).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

fn ensemble_outcome(ens: &PathEnsemble) -> Outcome {
    let mut buf = Vec::new();
    ens.write_csv(&mut buf).expect("writing to memory");
    Outcome::table(
        ens.n_paths(),
        String::from_utf8(buf).expect("ascii output"),
        json!({ "times": ens.times, "paths": ens.values }),
    )
}

pub fn run(cfg: &RunConfig) -> Result<Outcome> {
    match cfg.command {
        Command::SimulateFbm => simulate_fbm(cfg),
        Command::PriceZcb => price_zcb(cfg),
        Command::PriceCap => price_cap(cfg),
        Command::FwdCurve => fwd_curve(cfg),
        Command::SteinSim => stein_sim(cfg),
        Command::SteinIv => stein_iv(cfg),
        Command::SteinCdf => stein_cdf(cfg),
        Command::AffineEval => affine_eval(cfg),
        Command::Validate => validate::run(cfg),
    }
}

fn simulate_fbm(cfg: &RunConfig) -> Result<Outcome> {
    let model = cfg.model()?;
    let fbm = FbmConfig {
        h: *require(&model.hurst, "model.hurst")?,
        w0: model.w0.unwrap_or(0.0),
        grid: cfg.grid()?.spacing(),
        times: require(&model.times, "model.times")?.clone(),
    };
    Ok(ensemble_outcome(&run_fbm_ensemble(&fbm, &cfg.mc())?))
}

fn rate_model(cfg: &RunConfig) -> Result<RateModel> {
    let gb = cfg.grid()?;
    let grid = gb.field_grid()?;
    let m = cfg.model()?;
    let n = grid.len();
    let kind = *require(&m.kind, "model.kind")?;
    let state = m.state(&grid)?;
    let model = RateModel::new(
        kind,
        *require(&m.level, "model.level")?,
        grid,
        m.grid_fn("u", n)?,
        m.grid_fn("v", n)?,
        state,
    )?;
    Ok(model.with_measure_specs(gb.mu.as_ref(), gb.nu.as_ref())?)
}

fn warn(model: &RateModel) {
    for w in &model.warnings {
        eprintln!("warning: {w}");
    }
}

fn price_zcb(cfg: &RunConfig) -> Result<Outcome> {
    let model = rate_model(cfg)?;
    warn(&model);
    let maturities = require(&cfg.model()?.maturities, "model.maturities")?;
    let rows = maturities
        .iter()
        .map(|&t| Ok(vec![t, zcb_price(&model, t)?]))
        .collect::<Result<Vec<_>>>()?;
    let json = json!({ "maturities": maturities, "prices": rows.iter().map(|r| r[1]).collect::<Vec<_>>() });
    Ok(Outcome::table(
        rows.len(),
        rows_csv(&["maturity", "price"], &rows),
        json,
    ))
}

fn price_cap(cfg: &RunConfig) -> Result<Outcome> {
    let model = rate_model(cfg)?;
    warn(&model);
    let m = cfg.model()?;
    let sched = require(&m.schedule, "model.schedule")?;
    let kind = m.cap_kind.unwrap_or(CapKind::Cap);
    let price = cap_floor(&model, sched, kind)?;
    let rows: Vec<Vec<f64>> = sched
        .periods()
        .iter()
        .zip(&price.legs)
        .map(|(&(a, b), &leg)| vec![a, b, leg])
        .collect();
    let json = json!({ "total": price.total, "legs": price.legs });
    Ok(Outcome::table(
        rows.len(),
        rows_csv(&["reset", "payment", "price"], &rows),
        json,
    ))
}

fn fwd_curve(cfg: &RunConfig) -> Result<Outcome> {
    let model = rate_model(cfg)?;
    warn(&model);
    let taus = require(&cfg.model()?.taus, "model.taus")?;
    let fwd = forward_curve(&model, taus)?;
    let rows: Vec<Vec<f64>> = taus.iter().zip(&fwd).map(|(&t, &f)| vec![t, f]).collect();
    let json = json!({ "taus": taus, "forwards": fwd });
    Ok(Outcome::table(rows.len(), rows_csv(&["tau", "forward"], &rows), json))
}

fn stein_model(cfg: &RunConfig) -> Result<SteinModel> {
    let gb = cfg.grid()?;
    let gm = match &gb.mu {
        Some(mu) => fracaffine::measure::discretize(mu, &gb.spacing())?,
        None => return Err(config_error("the volatility model needs `grid.mu`")),
    };
    let grid = FieldGrid::new(&gm, None);
    let m: &ModelBlock = cfg.model()?;
    let n = grid.len();
    Ok(SteinModel::new(
        grid,
        m.grid_fn("v", n)?,
        m.rho.unwrap_or(0.0),
        m.s0.unwrap_or(1.0),
        m.grid_fn("y", n)?,
    )?)
}

fn stein_sim(cfg: &RunConfig) -> Result<Outcome> {
    let model = stein_model(cfg)?;
    let times = require(&cfg.model()?.times, "model.times")?;
    Ok(ensemble_outcome(&run_stein_ensemble(&model, times, &cfg.mc())?))
}

fn stein_iv(cfg: &RunConfig) -> Result<Outcome> {
    let model = stein_model(cfg)?;
    let maturity = *require(&cfg.model()?.maturity, "model.maturity")?;
    let iv = iv_moments(&model, &model.y0, 0.0, maturity)?;
    let csv = format!(
        "horizon,mean,second_moment,mean_normalized,second_moment_normalized\n{}\n",
        [
            iv.horizon,
            iv.mean,
            iv.second_moment,
            iv.mean_normalized,
            iv.second_moment_normalized
        ]
        .iter()
        .map(|&x| fmt_float(x))
        .collect::<Vec<_>>()
        .join(",")
    );
    Ok(Outcome::table(1, csv, serde_json::to_value(iv)?))
}

fn stein_cdf(cfg: &RunConfig) -> Result<Outcome> {
    let model = stein_model(cfg)?;
    let m = cfg.model()?;
    let maturity = *require(&m.maturity, "model.maturity")?;
    let xs = require(&m.x_grid, "model.x_grid")?;
    let steps = m.steps.unwrap_or(64);
    let f = logprice_cdf_uncorrelated(&model, &model.initial_state(), maturity, steps, xs, &cfg.mc())?;
    let rows: Vec<Vec<f64>> = xs.iter().zip(&f).map(|(&x, &p)| vec![x, p]).collect();
    let json = json!({ "x": xs, "cdf": f });
    Ok(Outcome::table(rows.len(), rows_csv(&["x", "F"], &rows), json))
}

fn affine_eval(cfg: &RunConfig) -> Result<Outcome> {
    let grid = cfg.grid()?.field_grid()?;
    let m = cfg.model()?;
    let n = grid.len();
    let (u, v) = (m.grid_fn("u", n)?, m.grid_fn("v", n)?);
    let taus = require(&m.taus, "model.taus")?;
    let big = matches!(m.transform, Some(crate::config::Transform::BigPhi));
    let mut out = Vec::new();
    let mut rows = Vec::new();
    for &tau in taus {
        let c = if big {
            Phi(&grid, tau, &u, &v)?
        } else {
            phi(&grid, tau, &u, &v)?
        };
        for i in 0..n {
            rows.push(vec![tau, grid.atoms[i], c.c0, c.c1[i], c.c2[i]]);
        }
        out.push(json!({ "tau": tau, "c0": c.c0, "c1": c.c1, "c2": c.c2 }));
    }
    let json = json!({ "atoms": grid.atoms, "coefficients": out });
    Ok(Outcome::table(
        taus.len(),
        rows_csv(&["tau", "x", "c0", "c1", "c2"], &rows),
        json,
    ))
}
