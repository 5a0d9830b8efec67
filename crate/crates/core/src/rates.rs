//! Fractional interest-rate models.
//!
//! * Short rate: `r_t = ℓ + ⟨Y_t, u⟩_μ + ⟨Z_t, v⟩_ν`, bank account `B_t = exp(∫_0^t r ds)`.
//! * Bank account: `B_t = exp(ℓt + ⟨Y_t, u⟩_μ + ⟨Z_t, v⟩_ν)` directly.
//!
//! Both give closed-form bond prices through the affine coefficients, and
//! a deterministic forward-measure volatility, so options on bonds follow
//! a Black-type formula.

use serde::{Deserialize, Serialize};

use crate::affine::{big_phi1_mass, phi, phi_derivative, AffineCoeffs, Phi, Phi_derivative};
use crate::error::{Error, Result};
use crate::field::{kernel_plan, FieldGrid, OUState, TransitionKernel};
use crate::measure::{validate_integrability, Assumption, MeasureSpec};
use crate::numerics::{integrate_adaptive, normal_cdf};
use crate::rng::GaussianSource;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateKind {
    ShortRate,
    BankAccount,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionKind {
    Call,
    Put,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapKind {
    Cap,
    Floor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateModel {
    pub kind: RateKind,
    pub level: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub grid: FieldGrid,
    pub state: OUState,
    /// Integrability findings surfaced at construction.
    pub warnings: Vec<String>,
}

impl RateModel {
    pub fn new(kind: RateKind, level: f64, grid: FieldGrid, u: Vec<f64>, v: Vec<f64>, state: OUState) -> Result<Self> {
        if !level.is_finite() {
            return Err(Error::invalid("level", "must be finite"));
        }
        grid.check_u(&u)?;
        grid.check_v(&v)?;
        Error::check_len("state.y", grid.len(), state.y.len())?;
        Error::check_len("state.z", if grid.track_z { grid.len() } else { 0 }, state.z.len())?;
        if !grid.track_z && v.iter().zip(&grid.nu_weights).any(|(a, w)| *a != 0.0 && *w != 0.0) {
            return Err(Error::invalid("v", "Z is not tracked on this grid"));
        }
        Ok(RateModel {
            kind,
            level,
            u,
            v,
            grid,
            state,
            warnings: Vec::new(),
        })
    }

    /// Records a warning when the continuous measures behind the grid fail
    /// the integrability assumption of this model kind. Atomic grids are
    /// always finite, so this never blocks construction.
    pub fn with_measure_specs(mut self, mu: Option<&MeasureSpec>, nu: Option<&MeasureSpec>) -> Result<Self> {
        let assumption = match self.kind {
            RateKind::ShortRate => Assumption::AShortrate,
            RateKind::BankAccount => Assumption::AMain,
        };
        let report = validate_integrability(mu, nu, assumption)?;
        for c in &report.conditions {
            if c.passed == Some(false) {
                self.warnings.push(format!(
                    "{:?} condition `{}` fails (exponent {}): {}",
                    assumption, c.name, c.exponent, c.detail
                ));
            }
        }
        Ok(self)
    }

    pub fn with_state(&self, state: OUState) -> Self {
        RateModel { state, ..self.clone() }
    }

    fn neg_uv(&self) -> (Vec<f64>, Vec<f64>) {
        (self.u.iter().map(|a| -a).collect(), self.v.iter().map(|a| -a).collect())
    }

    /// Coefficients `(c0, c1, c2)` with `log P(t, t+τ) = -ℓτ + c0 + ⟨Y, c1⟩ + ⟨Z, c2⟩`.
    pub fn bond_coeffs(&self, tau: f64) -> Result<AffineCoeffs> {
        match self.kind {
            RateKind::ShortRate => Phi(&self.grid, tau, &self.u, &self.v),
            RateKind::BankAccount => {
                let (nu, nv) = self.neg_uv();
                let mut c = phi(&self.grid, tau, &nu, &nv)?;
                for i in 0..self.grid.len() {
                    c.c1[i] += self.u[i];
                    c.c2[i] += self.v[i];
                }
                Ok(c)
            }
        }
    }

    /// `τ`-derivative of the bond coefficients.
    pub fn bond_coeffs_derivative(&self, tau: f64) -> Result<AffineCoeffs> {
        match self.kind {
            RateKind::ShortRate => Phi_derivative(&self.grid, tau, &self.u, &self.v),
            RateKind::BankAccount => {
                let (nu, nv) = self.neg_uv();
                phi_derivative(&self.grid, tau, &nu, &nv)
            }
        }
    }

    /// `⟨c1, 1⟩_μ` of the forward-measure loading at time to maturity `τ`.
    fn vol_loading(&self, tau: f64) -> Result<f64> {
        match self.kind {
            RateKind::ShortRate => Ok(big_phi1_mass(&self.grid, tau, &self.u, &self.v)),
            RateKind::BankAccount => {
                let (nu, nv) = self.neg_uv();
                Ok(self.grid.mass_mu(&phi(&self.grid, tau, &nu, &nv)?.c1))
            }
        }
    }
}

pub fn rate_value(model: &RateModel) -> Result<f64> {
    if model.kind != RateKind::ShortRate {
        return Err(Error::KindMismatch {
            op: "rate_value",
            kind: "the bank-account model".into(),
        });
    }
    let mut r = model.level + model.grid.pair_mu(&model.state.y, &model.u);
    if model.grid.track_z {
        r += model.grid.pair_nu(&model.state.z, &model.v);
    }
    Ok(r)
}

/// `P(t, T)` at the model's current state.
pub fn zcb_price(model: &RateModel, maturity: f64) -> Result<f64> {
    let tau = maturity - model.state.t;
    if tau < 0.0 {
        return Err(Error::invalid(
            "T",
            format!("maturity {maturity} before current time {}", model.state.t),
        ));
    }
    if tau == 0.0 {
        return Ok(1.0);
    }
    let c = model.bond_coeffs(tau)?;
    Ok((-model.level * tau + c.exponent(&model.grid, &model.state)).exp())
}

/// Forward rates `h(t)(τ)` for each time to maturity.
pub fn forward_curve(model: &RateModel, taus: &[f64]) -> Result<Vec<f64>> {
    taus.iter()
        .map(|&tau| {
            if !(tau > 0.0) {
                return Err(Error::invalid("tau", "times to maturity must be positive"));
            }
            let d = model.bond_coeffs_derivative(tau)?;
            Ok(model.level - d.exponent(&model.grid, &model.state))
        })
        .collect()
}

/// `(μ^HJM(τ), σ^HJM(τ))` with `σ = -⟨∂_τ c1, 1⟩_μ` and
/// `μ = ∂²_τ c0 = ⟨∂_τ c1, 1⟩_μ ⟨c1, 1⟩_μ`, where `c` is `Φ(τ, u, v)` or
/// `φ(τ, -u, -v)`.
pub fn hjm_coefficients(model: &RateModel, tau: f64) -> Result<(f64, f64)> {
    if !(tau > 0.0) {
        return Err(Error::invalid("tau", "must be positive"));
    }
    let d = model.bond_coeffs_derivative(tau)?;
    let dm = model.grid.mass_mu(&d.c1);
    let m = model.vol_loading(tau)?;
    Ok((dm * m, -dm))
}

/// Deterministic volatility `v(t, T)` of the `T`-forward density.
pub fn forward_vol(model: &RateModel, t: f64, maturity: f64) -> Result<f64> {
    if maturity < t {
        return Err(Error::invalid("T", "must not precede t"));
    }
    model.vol_loading(maturity - t)
}

/// Instantaneous covariation rate `σ(τ1) σ(τ2)` of two forward rates.
pub fn model_covariation(model: &RateModel, tau1: f64, tau2: f64) -> Result<f64> {
    let (_, s1) = hjm_coefficients(model, tau1)?;
    let (_, s2) = hjm_coefficients(model, tau2)?;
    Ok(s1 * s2)
}

/// Total variance `∫_t^T (v(s,S) - v(s,T))² ds` of `log P(·,S)/P(·,T)`.
pub fn option_variance(model: &RateModel, expiry: f64, maturity: f64) -> Result<f64> {
    let t = model.state.t;
    let span = expiry - t;
    if span <= 0.0 {
        return Ok(0.0);
    }
    let gap = maturity - expiry;
    // r = T - s runs over [0, T - t]
    let mut err = None;
    let val = integrate_adaptive(0.0, span, 0.0, 1e-12, |r| {
        match (model.vol_loading(gap + r), model.vol_loading(r)) {
            (Ok(a), Ok(b)) => (a - b).powi(2),
            (Err(e), _) | (_, Err(e)) => {
                err.get_or_insert(e);
                0.0
            }
        }
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(val),
    }
}

/// Below this total variance the option is priced at intrinsic value.
pub const MIN_OPTION_VARIANCE: f64 = 1e-24;

/// Price at the current state of an option expiring at `T` on the bond maturing at `S`.
pub fn black_option(model: &RateModel, expiry: f64, maturity: f64, strike: f64, kind: OptionKind) -> Result<f64> {
    if !(expiry < maturity) {
        return Err(Error::invalid("T", "option expiry must precede bond maturity"));
    }
    if expiry < model.state.t {
        return Err(Error::invalid("T", "option expiry before current time"));
    }
    if !(strike > 0.0) {
        return Err(Error::invalid("K", "strike must be positive"));
    }
    let ps = zcb_price(model, maturity)?;
    let pt = zcb_price(model, expiry)?;
    let var = option_variance(model, expiry, maturity)?;
    if var < MIN_OPTION_VARIANCE {
        return Ok(match kind {
            OptionKind::Call => (ps - strike * pt).max(0.0),
            OptionKind::Put => (strike * pt - ps).max(0.0),
        });
    }
    let sd = var.sqrt();
    let d1 = ((ps / (strike * pt)).ln() + 0.5 * var) / sd;
    let d2 = d1 - sd;
    Ok(match kind {
        OptionKind::Call => ps * normal_cdf(d1) - strike * pt * normal_cdf(d2),
        OptionKind::Put => strike * pt * normal_cdf(-d2) - ps * normal_cdf(-d1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapSchedule {
    pub t0: f64,
    pub delta: f64,
    pub n: usize,
    pub kappa: f64,
}

impl CapSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0 > 0.0) {
            return Err(Error::invalid("t0", "first reset must be positive"));
        }
        if !(self.delta > 0.0) {
            return Err(Error::invalid("delta", "period must be positive"));
        }
        if self.n == 0 {
            return Err(Error::invalid("n", "need at least one period"));
        }
        if !(1.0 + self.delta * self.kappa > 0.0) {
            return Err(Error::invalid("kappa", "1 + Δκ must be positive"));
        }
        Ok(())
    }

    /// `(T_{k-1}, T_k)` for `k = 1..n`.
    pub fn periods(&self) -> Vec<(f64, f64)> {
        (1..=self.n)
            .map(|k| (self.t0 + (k - 1) as f64 * self.delta, self.t0 + k as f64 * self.delta))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapPrice {
    pub total: f64,
    pub legs: Vec<f64>,
}

/// Caps are portfolios of bond puts and floors of bond calls, each struck
/// at `(1+Δκ)^{-1}` and scaled by `1+Δκ`.
pub fn cap_floor(model: &RateModel, sched: &CapSchedule, kind: CapKind) -> Result<CapPrice> {
    sched.validate()?;
    if !(model.state.t < sched.t0) {
        return Err(Error::invalid("t0", "first reset must be after the current time"));
    }
    let scale = 1.0 + sched.delta * sched.kappa;
    let opt = match kind {
        CapKind::Cap => OptionKind::Put,
        CapKind::Floor => OptionKind::Call,
    };
    let legs = sched
        .periods()
        .into_iter()
        .map(|(a, b)| Ok(scale * black_option(model, a, b, 1.0 / scale, opt)?))
        .collect::<Result<Vec<f64>>>()?;
    Ok(CapPrice {
        total: legs.iter().sum(),
        legs,
    })
}

/// Simulated bank account at the sample times together with the states there.
#[derive(Debug, Clone, PartialEq)]
pub struct BankAccountPath {
    pub times: Vec<f64>,
    pub log_b: Vec<f64>,
    pub states: Vec<OUState>,
}

impl BankAccountPath {
    pub fn b(&self) -> Vec<f64> {
        self.log_b.iter().map(|l| l.exp()).collect()
    }

    /// `B_{t_0} / B_{t_k}` for every sample time.
    pub fn discount_factors(&self) -> Vec<f64> {
        self.log_b.iter().map(|l| (self.log_b[0] - l).exp()).collect()
    }
}

/// Reusable stepping plan for bank-account simulation on fixed times.
#[derive(Debug, Clone)]
pub struct BankAccountSimulator {
    model: RateModel,
    times: Vec<f64>,
    sub_steps: usize,
    kernels: Vec<TransitionKernel>,
}

impl BankAccountSimulator {
    /// `sub_steps` trapezoid sub-steps per interval are used for the short
    /// rate; the bank-account kind steps exactly once per interval.
    pub fn new(model: &RateModel, times: &[f64], sub_steps: usize) -> Result<Self> {
        if times.is_empty() || times[0] != model.state.t {
            return Err(Error::invalid("times", "must start at the model's current time"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("times", "must increase"));
        }
        if sub_steps == 0 {
            return Err(Error::invalid("sub_steps", "need at least one sub-step"));
        }
        let per = match model.kind {
            RateKind::ShortRate => sub_steps,
            RateKind::BankAccount => 1,
        };
        let kernels = kernel_plan(&model.grid, times, per)?;
        Ok(BankAccountSimulator {
            model: model.clone(),
            times: times.to_vec(),
            sub_steps: per,
            kernels,
        })
    }

    fn log_b_state(&self, s: &OUState) -> f64 {
        let m = &self.model;
        let mut l = m.level * s.t + m.grid.pair_mu(&s.y, &m.u);
        if m.grid.track_z {
            l += m.grid.pair_nu(&s.z, &m.v);
        }
        l
    }

    fn rate(&self, s: &OUState) -> f64 {
        let m = &self.model;
        let mut r = m.level + m.grid.pair_mu(&s.y, &m.u);
        if m.grid.track_z {
            r += m.grid.pair_nu(&s.z, &m.v);
        }
        r
    }

    pub fn sample<G: GaussianSource + ?Sized>(&self, rng: &mut G) -> BankAccountPath {
        let mut s = self.model.state.clone();
        let mut states = vec![s.clone()];
        let mut log_b = Vec::with_capacity(self.times.len());
        match self.model.kind {
            RateKind::BankAccount => {
                log_b.push(self.log_b_state(&s));
                for k in &self.kernels {
                    k.step_in_place(&mut s, rng);
                    log_b.push(self.log_b_state(&s));
                    states.push(s.clone());
                }
            }
            RateKind::ShortRate => {
                let mut acc = 0.0;
                log_b.push(0.0);
                for k in &self.kernels {
                    let h = k.delta;
                    let mut r0 = self.rate(&s);
                    for _ in 0..self.sub_steps {
                        k.step_in_place(&mut s, rng);
                        let r1 = self.rate(&s);
                        acc += 0.5 * h * (r0 + r1);
                        r0 = r1;
                    }
                    log_b.push(acc);
                    states.push(s.clone());
                }
            }
        }
        // sub-stepping accumulates rounding in t; pin the sample times
        for (st, &t) in states.iter_mut().zip(&self.times) {
            st.t = t;
        }
        BankAccountPath {
            times: self.times.clone(),
            log_b,
            states,
        }
    }
}

pub fn bank_account_path<G: GaussianSource + ?Sized>(
    model: &RateModel,
    times: &[f64],
    sub_steps: usize,
    rng: &mut G,
) -> Result<BankAccountPath> {
    Ok(BankAccountSimulator::new(model, times, sub_steps)?.sample(rng))
}
