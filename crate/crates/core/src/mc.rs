//! Reproducible parallel Monte Carlo.
//!
//! Each path owns a counter-based stream keyed by `(seed, path_id)`, so the
//! output does not depend on how paths are scheduled across workers.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{make_kernel, FieldGrid, OUState};
use crate::numerics::exp_integral;
use crate::rng::NormalStream;

/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.576;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub antithetic: bool,
    #[serde(default = "default_sub_steps")]
    pub sub_steps: usize,
    /// Worker threads; `None` uses the global pool.
    #[serde(default)]
    pub workers: Option<usize>,
}

fn default_sub_steps() -> usize {
    8
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            n_paths: 10_000,
            seed: 0,
            antithetic: false,
            sub_steps: default_sub_steps(),
            workers: None,
        }
    }
}

impl McConfig {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        McConfig {
            n_paths,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 2 {
            return Err(Error::invalid("n_paths", "need at least 2 paths"));
        }
        if self.antithetic && self.n_paths % 2 != 0 {
            return Err(Error::invalid(
                "n_paths",
                "antithetic sampling needs an even path count",
            ));
        }
        if self.sub_steps == 0 {
            return Err(Error::invalid("sub_steps", "need at least one sub-step"));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("workers", "need at least one worker"));
        }
        Ok(())
    }

    pub fn stream(&self, path_id: usize) -> NormalStream {
        NormalStream::new(self.seed, path_id as u64, self.antithetic)
    }
}

/// Runs `simulate` once per path and returns the results in path order.
pub fn run_paths<T, F>(mc: &McConfig, simulate: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &mut NormalStream) -> T + Sync + Send,
{
    mc.validate()?;
    let work = || {
        (0..mc.n_paths)
            .into_par_iter()
            .map(|id| simulate(id, &mut mc.stream(id)))
            .collect()
    };
    match mc.workers {
        None => Ok(work()),
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| Error::invalid("workers", e.to_string()))?;
            Ok(pool.install(work))
        }
    }
}

/// Sampled paths of a scalar process on shared sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub antithetic: bool,
}

impl PathEnsemble {
    pub fn n_paths(&self) -> usize {
        self.values.len()
    }

    /// Values of every path at sample index `k`.
    pub fn column(&self, k: usize) -> Vec<f64> {
        self.values.iter().map(|p| p[k]).collect()
    }

    /// CSV with columns `path_id, t, value`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "path_id,t,value")?;
        for (id, path) in self.values.iter().enumerate() {
            for (t, v) in self.times.iter().zip(path) {
                writeln!(out, "{id},{},{}", crate::io::fmt_float(*t), crate::io::fmt_float(*v))?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_effective: usize,
}

impl Estimate {
    /// `|mean - target|` in units of the standard error (0 when both vanish).
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.mean - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.se
        }
    }

    pub fn within(&self, target: f64, n_se: f64) -> bool {
        (self.mean - target).abs() <= n_se * self.se
    }
}

/// Sample mean and standard error. Antithetic samples are averaged in
/// consecutive pairs first.
pub fn estimate(samples: &[f64], antithetic: bool) -> Result<Estimate> {
    if let Some(id) = samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinitePayoff { path_id: id });
    }
    let paired: Vec<f64>;
    let xs = if antithetic {
        if samples.len() % 2 != 0 {
            return Err(Error::invalid("samples", "antithetic estimate needs an even count"));
        }
        paired = samples.chunks(2).map(|c| 0.5 * (c[0] + c[1])).collect();
        &paired[..]
    } else {
        samples
    };
    let n = xs.len();
    if n < 2 {
        return Err(Error::invalid("samples", "need at least 2 samples"));
    }
    // shifting by the first sample keeps constant payoffs exact
    let shift = xs[0];
    let m = xs.iter().map(|x| x - shift).sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - shift - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let mean = shift + m;
    let se = (var / n as f64).sqrt();
    Ok(Estimate {
        mean,
        se,
        ci_low: mean - Z99 * se,
        ci_high: mean + Z99 * se,
        n_effective: n,
    })
}

/// Applies `payoff` to every path of an ensemble and estimates its mean.
pub fn estimate_paths<F: Fn(&[f64]) -> f64>(ensemble: &PathEnsemble, payoff: F) -> Result<Estimate> {
    let samples: Vec<f64> = ensemble.values.iter().map(|p| payoff(p)).collect();
    estimate(&samples, ensemble.antithetic)
}

/// Sample variance with its standard error from the fourth moment.
pub fn variance_estimate(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let m2 = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = samples.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let var = m2 * n / (n - 1.0);
    (var, ((m4 - m2 * m2).max(0.0) / n).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Coordinate {
    Y,
    Z,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoordinateReport {
    pub atom: f64,
    pub coordinate: Coordinate,
    pub mean: f64,
    pub variance: f64,
    /// Stationary variance `1/(2x)` or `1/(4x³)`.
    pub stationary_variance: f64,
    /// Exact variance at the horizon from a zero start.
    pub transient_variance: f64,
    pub z_mean: f64,
    pub z_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationarityReport {
    pub horizon: f64,
    pub n_paths: usize,
    pub coordinates: Vec<CoordinateReport>,
}

impl StationarityReport {
    /// Largest absolute z-score over all means and variances.
    pub fn max_abs_z(&self) -> f64 {
        self.coordinates
            .iter()
            .flat_map(|c| [c.z_mean.abs(), c.z_variance.abs()])
            .fold(0.0, f64::max)
    }

    pub fn converged(&self, bound: f64) -> bool {
        self.max_abs_z() <= bound
    }
}

/// Simulates the field from zero over `horizon` in one exact step and
/// compares sample moments with the stationary law.
pub fn stationarity_report(grid: &FieldGrid, horizon: f64, mc: &McConfig) -> Result<StationarityReport> {
    if !(horizon > 0.0) {
        return Err(Error::invalid("horizon", "must be positive"));
    }
    let kernel = make_kernel(grid, horizon)?;
    let states = run_paths(mc, |_, rng| {
        let mut s = OUState::zero(grid);
        kernel.step_in_place(&mut s, rng);
        s
    })?;
    let n = grid.len();
    let mut coordinates = Vec::new();
    let blocks: &[Coordinate] = if grid.track_z {
        &[Coordinate::Y, Coordinate::Z]
    } else {
        &[Coordinate::Y]
    };
    for &c in blocks {
        for i in 0..n {
            let x = grid.atoms[i];
            let samples: Vec<f64> = states
                .iter()
                .map(|s| if c == Coordinate::Y { s.y[i] } else { s.z[i] })
                .collect();
            let est = estimate(&samples, mc.antithetic)?;
            let (var, var_se) = variance_estimate(&samples);
            let (stationary, transient) = match c {
                Coordinate::Y => (1.0 / (2.0 * x), exp_integral(0, 2.0 * x, horizon)),
                Coordinate::Z => (1.0 / (4.0 * x * x * x), exp_integral(2, 2.0 * x, horizon)),
            };
            coordinates.push(CoordinateReport {
                atom: x,
                coordinate: c,
                mean: est.mean,
                variance: var,
                stationary_variance: stationary,
                transient_variance: transient,
                z_mean: if est.se > 0.0 { est.mean / est.se } else { 0.0 },
                z_variance: if var_se > 0.0 { (var - stationary) / var_se } else { 0.0 },
            });
        }
    }
    Ok(StationarityReport {
        horizon,
        n_paths: mc.n_paths,
        coordinates,
    })
}
