//! Fractional Stein & Stein stochastic volatility.
//!
//! The volatility is `σ_t = ⟨Y_t, v⟩_μ` and the log price follows
//!
//! ```text
//! dX = -½ σ² dt + σ dW̃,    d⟨W, W̃⟩ = ρ dt.
//! ```
//!
//! `Π = Y ⊗ Y` is never stored: every pairing of `Π` with a finite-rank
//! tensor reduces to inner products with `Y`.

use std::cell::RefCell;

use num_complex::Complex64;
use serde::Serialize;

use crate::affine::{diagonalize_reduced, p_inner, psi, stein_psi_rank1, SymTensor};
use crate::error::{Error, Result};
use crate::field::{kernel_plan, FieldGrid, OUState, TransitionKernel};
use crate::mc::{run_paths, McConfig, PathEnsemble};
use crate::numerics::{integrate_adaptive, normal_cdf};
use crate::rng::GaussianSource;

#[derive(Debug, Clone, PartialEq)]
pub struct SteinModel {
    pub grid: FieldGrid,
    pub v: Vec<f64>,
    pub rho: f64,
    pub s0: f64,
    pub y0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteinState {
    pub t: f64,
    pub x: f64,
    pub y: Vec<f64>,
}

impl SteinModel {
    pub fn new(grid: FieldGrid, v: Vec<f64>, rho: f64, s0: f64, y0: Vec<f64>) -> Result<Self> {
        if grid.track_z {
            return Err(Error::invalid("grid", "the volatility field has no Z component"));
        }
        if !(rho > -1.0 && rho < 1.0) {
            return Err(Error::invalid("rho", format!("correlation {rho} outside (-1, 1)")));
        }
        if !(s0 > 0.0 && s0.is_finite()) {
            return Err(Error::invalid("s0", "spot must be positive"));
        }
        Error::check_len("v", grid.len(), v.len())?;
        Error::check_len("y0", grid.len(), y0.len())?;
        Ok(SteinModel { grid, v, rho, s0, y0 })
    }

    pub fn initial_state(&self) -> SteinState {
        SteinState {
            t: 0.0,
            x: self.s0.ln(),
            y: self.y0.clone(),
        }
    }

    pub fn vol(&self, y: &[f64]) -> f64 {
        self.grid.pair_mu(y, &self.v)
    }
}

/// Log price, volatility and accumulated variance `∫_0^t σ² ds` at the sample times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteinPath {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub sigma: Vec<f64>,
    pub variance_mass: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SteinSimulator {
    model: SteinModel,
    start: SteinState,
    times: Vec<f64>,
    sub_steps: usize,
    kernels: Vec<TransitionKernel>,
}

impl SteinSimulator {
    pub fn new(model: &SteinModel, start: &SteinState, times: &[f64], sub_steps: usize) -> Result<Self> {
        if times.first() != Some(&start.t) {
            return Err(Error::invalid("times", "must start at the state's time"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("times", "must increase"));
        }
        if sub_steps == 0 {
            return Err(Error::invalid("sub_steps", "need at least one sub-step"));
        }
        Error::check_len("y", model.grid.len(), start.y.len())?;
        Ok(SteinSimulator {
            model: model.clone(),
            start: start.clone(),
            times: times.to_vec(),
            sub_steps,
            kernels: kernel_plan(&model.grid, times, sub_steps)?,
        })
    }

    pub fn sample<G: GaussianSource + ?Sized>(&self, rng: &mut G) -> SteinPath {
        let m = &self.model;
        let rho_perp = (1.0 - m.rho * m.rho).sqrt();
        let mut ou = OUState {
            t: self.start.t,
            y: self.start.y.clone(),
            z: Vec::new(),
        };
        let mut x = self.start.x;
        let mut sigma = m.vol(&ou.y);
        let mut mass = 0.0;
        let mut out = SteinPath {
            times: self.times.clone(),
            x: vec![x],
            sigma: vec![sigma],
            variance_mass: vec![0.0],
        };
        for k in &self.kernels {
            let h = k.delta;
            for _ in 0..self.sub_steps {
                let dw = k.step_in_place(&mut ou, rng);
                let dw_perp = h.sqrt() * rng.standard_normal();
                let dwt = m.rho * dw + rho_perp * dw_perp;
                x += -0.5 * sigma * sigma * h + sigma * dwt;
                let next = m.vol(&ou.y);
                mass += 0.5 * h * (sigma * sigma + next * next);
                sigma = next;
            }
            out.x.push(x);
            out.sigma.push(sigma);
            out.variance_mass.push(mass);
        }
        out
    }
}

pub fn simulate_stein<G: GaussianSource + ?Sized>(
    model: &SteinModel,
    times: &[f64],
    sub_steps: usize,
    rng: &mut G,
) -> Result<SteinPath> {
    Ok(SteinSimulator::new(model, &model.initial_state(), times, sub_steps)?.sample(rng))
}

/// Ensemble of log-price paths.
pub fn run_stein_ensemble(model: &SteinModel, times: &[f64], mc: &McConfig) -> Result<PathEnsemble> {
    let sim = SteinSimulator::new(model, &model.initial_state(), times, mc.sub_steps)?;
    let values = run_paths(mc, |_, rng| sim.sample(rng).x)?;
    Ok(PathEnsemble {
        times: times.to_vec(),
        values,
        antithetic: mc.antithetic,
    })
}

/// `F_t`-conditional moments of the integrated variance. The `mean` and
/// `second_moment` fields refer to `∫_t^T σ² ds`; the normalized fields
/// divide by `T - t` and its square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IvMoments {
    pub horizon: f64,
    pub mean: f64,
    pub second_moment: f64,
    pub mean_normalized: f64,
    pub second_moment_normalized: f64,
}

const IV_ABS_TOL: f64 = 1e-14;
const IV_REL_TOL: f64 = 1e-9;

/// `E[⟨Π_{t+σ}, v⊗²⟩ | Y_t = y] = ⟨P_σ v, v⟩_μ + ⟨y, e^{-σx} v⟩_μ²`.
pub fn pi_mean(grid: &FieldGrid, y: &[f64], sigma: f64, v: &[f64]) -> f64 {
    let m = decayed_pair(grid, y, sigma, v);
    let var = if sigma > 0.0 { p_inner(grid, sigma, v, v) } else { 0.0 };
    var + m * m
}

fn decayed_pair(grid: &FieldGrid, y: &[f64], sigma: f64, f: &[f64]) -> f64 {
    grid.atoms
        .iter()
        .zip(&grid.mu_weights)
        .zip(y.iter().zip(f))
        .map(|((&x, &w), (&a, &b))| w * a * b * (-sigma * x).exp())
        .sum()
}

/// `E[⟨Π_{t+σ}, w⟩² | Y_t = y]` for a real symmetric tensor `w` written as
/// `Σ ϑ_k v_k⊗²` relative to `P_σ`, so that `⟨Y, v_k⟩` are independent
/// with unit variance and means `m_k`:
/// `2Σϑ² + 4Σϑ²m² + (Σϑ(1 + m²))²`.
pub fn pi_second_moment(grid: &FieldGrid, y: &[f64], sigma: f64, tensor: &SymTensor) -> Result<f64> {
    if sigma == 0.0 {
        let yy: Vec<f64> = tensor.basis.iter().map(|b| grid.pair_mu(y, b)).collect();
        let mut s = 0.0;
        for i in 0..yy.len() {
            for j in 0..yy.len() {
                s += tensor.coeffs[(i, j)] * yy[i] * yy[j];
            }
        }
        return Ok(s * s);
    }
    let sos = diagonalize_reduced(grid, tensor, sigma)?;
    let mut quad = 0.0;
    let mut lin = 0.0;
    for (th, vk) in sos.theta.iter().zip(&sos.vectors) {
        let th = th.re;
        let m = decayed_pair(grid, y, sigma, vk);
        quad += th * th * (2.0 + 4.0 * m * m);
        lin += th * (1.0 + m * m);
    }
    Ok(quad + lin * lin)
}

pub fn iv_moments(model: &SteinModel, y: &[f64], t: f64, maturity: f64) -> Result<IvMoments> {
    let grid = &model.grid;
    Error::check_len("y", grid.len(), y.len())?;
    let span = maturity - t;
    if !(span >= 0.0) {
        return Err(Error::invalid("T", "must not precede t"));
    }
    if span == 0.0 || model.v.iter().all(|&a| a == 0.0) {
        return Ok(IvMoments {
            horizon: span,
            mean: 0.0,
            second_moment: 0.0,
            mean_normalized: 0.0,
            second_moment_normalized: 0.0,
        });
    }
    let v = &model.v;
    let mean = integrate_adaptive(0.0, span, IV_ABS_TOL, IV_REL_TOL, |s| pi_mean(grid, y, s, v))?;

    // E[A_s A_{s+τ}] = E[A_s E[A_{s+τ} | F_s]] with A = ⟨Π, v⊗²⟩, integrated
    // over the triangle s < s + τ and doubled. With f = e^{-τx} v,
    // E[A_{s+τ} | F_s] = ⟨P_τ v, v⟩ + ⟨Y_s, f⟩², and A_s⟨Y_s, f⟩² = ⟨Π_s, v ⊙ f⟩².
    let err = RefCell::new(None);
    let record = |e: Error| {
        err.borrow_mut().get_or_insert(e);
        0.0
    };
    let outer = integrate_adaptive(0.0, span, IV_ABS_TOL, IV_REL_TOL, |s| {
        let a_mean = pi_mean(grid, y, s, v);
        let inner = integrate_adaptive(0.0, span - s, IV_ABS_TOL, IV_REL_TOL, |tau| {
            let f: Vec<f64> = grid.atoms.iter().zip(v).map(|(&x, &a)| a * (-tau * x).exp()).collect();
            let var_tau = if tau > 0.0 { p_inner(grid, tau, v, v) } else { 0.0 };
            let w = SymTensor::symmetric_product(v.clone(), f);
            match pi_second_moment(grid, y, s, &w) {
                Ok(m2) => var_tau * a_mean + m2,
                Err(e) => record(e),
            }
        });
        inner.unwrap_or_else(record)
    });
    if let Some(e) = err.into_inner() {
        return Err(e);
    }
    let second = 2.0 * outer?;
    Ok(IvMoments {
        horizon: span,
        mean,
        second_moment: second,
        mean_normalized: mean / span,
        second_moment_normalized: second / (span * span),
    })
}

/// `E[exp(z ⟨Π_{t+τ}, w⟩) | Y_t = y] = exp(ψ0 + ⟨Π_t, ψ1⟩)`.
pub fn char_fn_pi(grid: &FieldGrid, y: &[f64], tau: f64, tensor: &SymTensor, z: Complex64) -> Result<Complex64> {
    if z == Complex64::new(0.0, 0.0) {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let c = psi(grid, tau, tensor, z)?;
    Ok((c.psi0 + c.psi1.pair_outer(grid, y)).exp())
}

/// Rank-one case `w = v ⊗ v`, valid even where `v` is null for `P_τ`.
pub fn char_fn_pi_rank1(grid: &FieldGrid, y: &[f64], tau: f64, v: &[f64], z: Complex64) -> Result<Complex64> {
    if z == Complex64::new(0.0, 0.0) {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let c = stein_psi_rank1(grid, tau, v, z)?;
    Ok((c.psi0 + c.psi1.pair_outer(grid, y)).exp())
}

/// `Q[X_T ≤ x | F_t]` for `ρ = 0`, averaging the Gaussian kernel
/// `Φ((x - X_t + V/2)/√V)` over simulated variance masses `V = ∫_t^T σ² ds`.
/// The volatility field is stepped exactly on `steps` equal intervals.
pub fn logprice_cdf_uncorrelated(
    model: &SteinModel,
    state: &SteinState,
    maturity: f64,
    steps: usize,
    x_grid: &[f64],
    mc: &McConfig,
) -> Result<Vec<f64>> {
    if model.rho != 0.0 {
        return Err(Error::invalid(
            "rho",
            "the mixture CDF needs uncorrelated drivers (rho = 0)",
        ));
    }
    if !(maturity > state.t) {
        return Err(Error::invalid("T", "must be after the state's time"));
    }
    if steps == 0 {
        return Err(Error::invalid("steps", "need at least one step"));
    }
    let times: Vec<f64> = (0..=steps)
        .map(|k| state.t + (maturity - state.t) * k as f64 / steps as f64)
        .collect();
    let sim = SteinSimulator::new(model, state, &times, mc.sub_steps)?;
    let masses = run_paths(mc, |_, rng| *sim.sample(rng).variance_mass.last().expect("nonempty"))?;
    let n = masses.len() as f64;
    Ok(x_grid
        .iter()
        .map(|&x| {
            masses
                .iter()
                .map(|&var| {
                    if var <= 0.0 {
                        if x >= state.x {
                            1.0
                        } else {
                            0.0
                        }
                    } else {
                        normal_cdf((x - state.x + 0.5 * var) / var.sqrt())
                    }
                })
                .sum::<f64>()
                / n
        })
        .collect())
}
