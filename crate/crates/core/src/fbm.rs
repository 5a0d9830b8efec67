//! Fractional Brownian motion from the OU field.
//!
//! With `(Y_0, Z_0)` drawn from the stationary law,
//!
//! ```text
//! W^H_t = w0 + ⟨Y_t - Y_0, 1⟩_μ   for H < 1/2,
//! W^H_t = w0 + ⟨Z_t - Z_0, 1⟩_ν   for H > 1/2,
//! ```
//!
//! and `H = 1/2` is plain Brownian motion.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{kernel_plan, FieldGrid, OUState, StationaryLaw, TransitionKernel};
use crate::mc::{run_paths, McConfig, PathEnsemble};
use crate::measure::{discretize, GridConfig, GridMeasure, MeasureSpec};
use crate::numerics::{gamma, integrate_adaptive};
use crate::rng::GaussianSource;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FbmConfig {
    pub h: f64,
    #[serde(default)]
    pub w0: f64,
    pub grid: GridConfig,
    pub times: Vec<f64>,
}

impl FbmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h < 1.0) {
            return Err(Error::invalid("h", format!("Hurst index {} outside (0, 1)", self.h)));
        }
        if self.times.first() != Some(&0.0) {
            return Err(Error::invalid("times", "sample times must start at 0"));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("times", "sample times must increase"));
        }
        if !self.w0.is_finite() {
            return Err(Error::invalid("w0", "must be finite"));
        }
        if self.h != 0.5 {
            self.grid.validate()?;
        }
        Ok(())
    }

    /// The `μ` grid for `H < 1/2` or the `ν` grid for `H > 1/2`.
    pub fn measure(&self) -> Result<(MeasureSpec, GridMeasure)> {
        let spec = if self.h < 0.5 {
            MeasureSpec::fbm_mu(self.h)
        } else {
            MeasureSpec::fbm_nu(self.h)
        };
        let gm = discretize(&spec, &self.grid)?;
        Ok((spec, gm))
    }
}

/// Prepared simulator: grid, stationary law and one kernel per step size.
#[derive(Debug, Clone)]
pub struct FbmSimulator {
    cfg: FbmConfig,
    inner: Option<Markov>,
}

#[derive(Debug, Clone)]
struct Markov {
    grid: FieldGrid,
    law: StationaryLaw,
    kernels: Vec<TransitionKernel>,
}

impl FbmSimulator {
    pub fn new(cfg: &FbmConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.h == 0.5 {
            return Ok(FbmSimulator {
                cfg: cfg.clone(),
                inner: None,
            });
        }
        let (_, gm) = cfg.measure()?;
        let grid = if cfg.h < 0.5 {
            FieldGrid::new(&gm, None)
        } else {
            FieldGrid::nu_only(&gm)
        };
        let law = StationaryLaw::new(&grid)?;
        let kernels = kernel_plan(&grid, &cfg.times, 1)?;
        Ok(FbmSimulator {
            cfg: cfg.clone(),
            inner: Some(Markov { grid, law, kernels }),
        })
    }

    pub fn grid(&self) -> Option<&FieldGrid> {
        self.inner.as_ref().map(|m| &m.grid)
    }

    /// One path of `W^H` at the configured times.
    pub fn sample<G: GaussianSource + ?Sized>(&self, rng: &mut G) -> Vec<f64> {
        let times = &self.cfg.times;
        let w0 = self.cfg.w0;
        let mut out = Vec::with_capacity(times.len());
        out.push(w0);
        let Some(m) = &self.inner else {
            let mut w = w0;
            for d in times.windows(2) {
                w += (d[1] - d[0]).sqrt() * rng.standard_normal();
                out.push(w);
            }
            return out;
        };
        let mut state: OUState = m.law.sample(rng);
        let use_z = self.cfg.h > 0.5;
        let read = |s: &OUState| {
            if use_z {
                m.grid.mass_nu(&s.z)
            } else {
                m.grid.mass_mu(&s.y)
            }
        };
        let base = read(&state);
        for k in &m.kernels {
            k.step_in_place(&mut state, rng);
            // ⟨X_t - X_0, 1⟩ = ⟨X_t, 1⟩ - ⟨X_0, 1⟩ by linearity
            out.push(w0 + (read(&state) - base));
        }
        out
    }
}

pub fn simulate_fbm<G: GaussianSource + ?Sized>(cfg: &FbmConfig, rng: &mut G) -> Result<Vec<f64>> {
    Ok(FbmSimulator::new(cfg)?.sample(rng))
}

pub fn run_fbm_ensemble(cfg: &FbmConfig, mc: &McConfig) -> Result<PathEnsemble> {
    let sim = FbmSimulator::new(cfg)?;
    let values = run_paths(mc, |_, rng| sim.sample(rng))?;
    Ok(PathEnsemble {
        times: cfg.times.clone(),
        values,
        antithetic: mc.antithetic,
    })
}

fn vh_cache() -> &'static Mutex<HashMap<u64, f64>> {
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `Var(W^H_1)` under the `1/Γ(H+1/2)` kernel normalization, by quadrature
/// of the squared kernel over `(-∞, 1]`.
pub fn fbm_unit_variance(h: f64) -> Result<f64> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::invalid("h", format!("Hurst index {h} outside (0, 1)")));
    }
    if let Some(&v) = vh_cache().lock().expect("cache lock").get(&h.to_bits()) {
        return Ok(v);
    }
    let v = unit_variance_quadrature(h)?;
    vh_cache().lock().expect("cache lock").insert(h.to_bits(), v);
    Ok(v)
}

fn unit_variance_quadrature(h: f64) -> Result<f64> {
    let a = h - 0.5;
    // (1+s)^a - s^a, written to avoid cancellation for large s
    let diff = |s: f64| s.powf(a) * (a * (1.0 / s).ln_1p()).exp_m1();
    // s = u^{1/H} on [0, 1] removes the s^{2H-1} singularity
    let near = integrate_adaptive(0.0, 1.0, 1e-15, 1e-12, |u| {
        if u == 0.0 {
            return 0.0;
        }
        let s = u.powf(1.0 / h);
        let ds = s / (h * u);
        diff(s).powi(2) * ds
    })?;
    // s = u^{-1/(1-H)} on [1, ∞) turns the s^{2H-3} tail into a smooth integrand
    let q = 1.0 / (1.0 - h);
    let far = integrate_adaptive(0.0, 1.0, 1e-15, 1e-12, |u| {
        if u == 0.0 {
            return 0.0;
        }
        let s = u.powf(-q);
        let ds = q * s / u;
        diff(s).powi(2) * ds
    })?;
    let g = gamma(h + 0.5);
    Ok((1.0 / (2.0 * h) + near + far) / (g * g))
}

/// `Cov(W^H_s, W^H_t) = V_H (t^{2H} + s^{2H} - |t-s|^{2H}) / 2`.
pub fn fbm_cov_oracle(h: f64, s: f64, t: f64) -> Result<f64> {
    if !(s >= 0.0 && t >= 0.0) {
        return Err(Error::invalid("s", "times must be nonnegative"));
    }
    let v = fbm_unit_variance(h)?;
    let e = 2.0 * h;
    Ok(0.5 * v * (t.powf(e) + s.powf(e) - (t - s).abs().powf(e)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    #[test]
    fn brownian_case_has_unit_variance() {
        assert_relative_eq!(fbm_unit_variance(0.5).unwrap(), 1.0, max_relative = 1e-10);
        assert_relative_eq!(fbm_cov_oracle(0.5, 0.7, 2.0).unwrap(), 0.7, max_relative = 1e-10);
    }

    #[test]
    fn oracle_at_zero_and_ratio() {
        assert_eq!(fbm_cov_oracle(0.3, 0.0, 1.3).unwrap(), 0.0);
        for &h in &[0.1, 0.3, 0.7, 0.9] {
            let r = fbm_cov_oracle(h, 1.0, 2.0).unwrap() / fbm_cov_oracle(h, 1.0, 1.0).unwrap();
            assert_relative_eq!(r, 2f64.powf(2.0 * h - 1.0), max_relative = 1e-12);
        }
    }

    #[test]
    fn path_starts_at_w0() {
        let cfg = FbmConfig {
            h: 0.3,
            w0: 1.5,
            grid: GridConfig::new(1e-2, 1e2, 10),
            times: vec![0.0, 0.5, 1.0],
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let p = simulate_fbm(&cfg, &mut rng).unwrap();
        assert_eq!(p[0], 1.5);
        assert_eq!(p.len(), 3);
    }

    #[test]
    fn times_must_start_at_zero() {
        let cfg = FbmConfig {
            h: 0.3,
            w0: 0.0,
            grid: GridConfig::default(),
            times: vec![0.5, 1.0],
        };
        assert!(FbmSimulator::new(&cfg).is_err());
    }
}
