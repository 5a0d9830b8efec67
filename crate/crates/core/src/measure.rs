//! Speed-of-mean-reversion measures and their atomic approximations.
//!
//! Every supported measure has a power-law density `c·x^{-α}` on `(0, ∞)`.
//! The fractional Brownian motion measures fix `c` and `α` from the Hurst
//! index:
//!
//! * `μ(dx) = x^{-(H+1/2)} dx / (Γ(H+1/2) Γ(1/2-H))` for `H < 1/2`,
//! * `ν(dx) = x^{-(H-1/2)} dx / (Γ(H+1/2) Γ(3/2-H))`.
//!
//! Discretization places atoms on a geometric grid and gives each atom the
//! exact mass of its cell, so the whole pipeline stays free of quadrature.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::gamma;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureFamily {
    FbmMu,
    FbmNu,
    CustomPowerLaw,
}

/// Parameters of a power-law measure.
///
/// For the fBM families only `h` is read; `c` and `alpha` are derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureSpec {
    pub family: MeasureFamily,
    #[serde(default = "half")]
    pub h: f64,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default)]
    pub alpha: f64,
}

fn half() -> f64 {
    0.5
}

fn one() -> f64 {
    1.0
}

impl MeasureSpec {
    pub fn fbm_mu(h: f64) -> Self {
        MeasureSpec {
            family: MeasureFamily::FbmMu,
            h,
            c: 1.0,
            alpha: 0.0,
        }
    }

    pub fn fbm_nu(h: f64) -> Self {
        MeasureSpec {
            family: MeasureFamily::FbmNu,
            h,
            c: 1.0,
            alpha: 0.0,
        }
    }

    pub fn power_law(c: f64, alpha: f64) -> Self {
        MeasureSpec {
            family: MeasureFamily::CustomPowerLaw,
            h: 0.5,
            c,
            alpha,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            MeasureFamily::FbmMu | MeasureFamily::FbmNu => {
                if !(self.h > 0.0 && self.h < 1.0) {
                    return Err(Error::invalid("h", format!("Hurst index {} outside (0, 1)", self.h)));
                }
                if self.h == 0.5 {
                    return Err(Error::invalid(
                        "h",
                        "H = 1/2 has no power-law measure; simulate Brownian motion directly",
                    ));
                }
                if self.family == MeasureFamily::FbmMu && self.h > 0.5 {
                    return Err(Error::invalid(
                        "h",
                        format!("fbm_mu needs H < 1/2 (Γ(1/2-H) < 0 for H = {}); use fbm_nu", self.h),
                    ));
                }
                Ok(())
            }
            MeasureFamily::CustomPowerLaw => {
                if !(self.c > 0.0 && self.c.is_finite()) {
                    return Err(Error::invalid("c", format!("scale must be positive, got {}", self.c)));
                }
                if !self.alpha.is_finite() {
                    return Err(Error::invalid("alpha", "exponent must be finite"));
                }
                Ok(())
            }
        }
    }

    /// Exponent `α` of the density `c·x^{-α}`.
    pub fn exponent(&self) -> f64 {
        match self.family {
            MeasureFamily::FbmMu => self.h + 0.5,
            MeasureFamily::FbmNu => self.h - 0.5,
            MeasureFamily::CustomPowerLaw => self.alpha,
        }
    }

    /// Normalization `c` of the density `c·x^{-α}`.
    pub fn scale(&self) -> f64 {
        match self.family {
            MeasureFamily::FbmMu => 1.0 / (gamma(self.h + 0.5) * gamma(0.5 - self.h)),
            MeasureFamily::FbmNu => 1.0 / (gamma(self.h + 0.5) * gamma(1.5 - self.h)),
            MeasureFamily::CustomPowerLaw => self.c,
        }
    }

    /// Exact mass of `[a, b]`, with `a = 0` allowed when `α < 1`.
    pub fn cell_mass(&self, a: f64, b: f64) -> f64 {
        power_mass(self.scale(), self.exponent(), a, b)
    }
}

fn power_mass(c: f64, alpha: f64, a: f64, b: f64) -> f64 {
    let k = 1.0 - alpha;
    if a == 0.0 {
        return if k > 0.0 { c * b.powf(k) / k } else { f64::INFINITY };
    }
    let l = (b / a).ln();
    // c a^k (e^{k l} - 1)/k, exact as k -> 0
    let ratio = if (k * l).abs() < 1e-8 {
        l * (1.0 + 0.5 * k * l)
    } else {
        (k * l).exp_m1() / k
    };
    c * a.powf(k) * ratio
}

/// A continuous power-law measure ready for density evaluation.
#[derive(Debug, Clone, Copy)]
pub struct PowerLawMeasure {
    pub scale: f64,
    pub exponent: f64,
}

impl PowerLawMeasure {
    pub fn density(&self, x: f64) -> f64 {
        self.scale * x.powf(-self.exponent)
    }
}

pub fn build_measure(spec: &MeasureSpec) -> Result<PowerLawMeasure> {
    spec.validate()?;
    Ok(PowerLawMeasure {
        scale: spec.scale(),
        exponent: spec.exponent(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GridScheme {
    #[default]
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub n: usize,
    #[serde(default)]
    pub scheme: GridScheme,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            x_min: 1e-6,
            x_max: 1e6,
            n: 100,
            scheme: GridScheme::Geometric,
        }
    }
}

impl GridConfig {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Self {
        GridConfig {
            x_min,
            x_max,
            n,
            scheme: GridScheme::Geometric,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("n", "grid needs at least one atom"));
        }
        if !(self.x_min > 0.0 && self.x_min.is_finite() && self.x_max.is_finite()) {
            return Err(Error::invalid("x_min", "grid bounds must be positive and finite"));
        }
        if self.n == 1 {
            if self.x_min != self.x_max {
                return Err(Error::invalid("n", "a single atom needs x_min == x_max"));
            }
        } else if self.x_min >= self.x_max {
            return Err(Error::invalid("x_max", "x_min must be below x_max"));
        }
        Ok(())
    }

    pub fn atoms(&self) -> Vec<f64> {
        if self.n == 1 {
            return vec![self.x_min];
        }
        let r = self.ratio();
        (0..self.n)
            .map(|i| {
                if i + 1 == self.n {
                    self.x_max
                } else {
                    self.x_min * r.powi(i as i32)
                }
            })
            .collect()
    }

    fn ratio(&self) -> f64 {
        (self.x_max / self.x_min).powf(1.0 / (self.n as f64 - 1.0))
    }

    /// Cell edges `g_0 < … < g_n`. The first edge is 0 when the density is
    /// integrable there, so the grid carries all the mass near the origin.
    pub fn edges(&self, exponent: f64) -> Vec<f64> {
        let atoms = self.atoms();
        let n = atoms.len();
        let half_step = if n == 1 { 0.5f64.exp() } else { self.ratio().sqrt() };
        let mut edges = Vec::with_capacity(n + 1);
        edges.push(if exponent < 1.0 { 0.0 } else { atoms[0] / half_step });
        for i in 0..n - 1 {
            edges.push((atoms[i] * atoms[i + 1]).sqrt());
        }
        edges.push(atoms[n - 1] * half_step);
        edges
    }
}

/// Atomic measure `Σ w_i δ_{x_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeasure {
    pub atoms: Vec<f64>,
    pub weights: Vec<f64>,
    /// Ratio `dν/dμ` at the atoms, when paired with a second measure.
    pub p: Option<Vec<f64>>,
}

impl GridMeasure {
    pub fn new(atoms: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("atoms", "need at least one atom"));
        }
        Error::check_len("weights", atoms.len(), weights.len())?;
        if atoms.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(Error::invalid("atoms", "atoms must be positive and finite"));
        }
        if atoms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("atoms", "atoms must be strictly increasing"));
        }
        if weights.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
            return Err(Error::invalid("weights", "weights must be nonnegative and finite"));
        }
        Ok(GridMeasure {
            atoms,
            weights,
            p: None,
        })
    }

    pub fn single(x: f64, w: f64) -> Result<Self> {
        GridMeasure::new(vec![x], vec![w])
    }

    pub fn with_ratio(mut self, p: Vec<f64>) -> Result<Self> {
        Error::check_len("p", self.atoms.len(), p.len())?;
        if p.iter().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid("p", "density ratio must be nonnegative and finite"));
        }
        self.p = Some(p);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `Σ w_i e^{-τ x_i}`.
    pub fn laplace(&self, tau: f64) -> f64 {
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * (-tau * x).exp())
            .sum()
    }

    /// `Σ w_i f_i g_i`.
    pub fn pair(&self, f: &[f64], g: &[f64]) -> f64 {
        self.weights.iter().zip(f).zip(g).map(|((w, a), b)| w * a * b).sum()
    }

    /// CSV with columns `x, w, p` (`p` left empty when absent).
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,w,p")?;
        for i in 0..self.len() {
            let p = match &self.p {
                Some(p) => crate::io::fmt_float(p[i]),
                None => String::new(),
            };
            writeln!(
                out,
                "{},{},{}",
                crate::io::fmt_float(self.atoms[i]),
                crate::io::fmt_float(self.weights[i]),
                p
            )?;
        }
        Ok(())
    }
}

pub fn laplace(gm: &GridMeasure, tau: f64) -> Result<f64> {
    if !(tau > 0.0) {
        return Err(Error::invalid("tau", "Laplace argument must be positive"));
    }
    Ok(gm.laplace(tau))
}

pub fn discretize(spec: &MeasureSpec, cfg: &GridConfig) -> Result<GridMeasure> {
    spec.validate()?;
    cfg.validate()?;
    let edges = cfg.edges(spec.exponent());
    let weights = edges.windows(2).map(|e| spec.cell_mass(e[0], e[1])).collect();
    GridMeasure::new(cfg.atoms(), weights)
}

/// Discretizes `μ` and `ν` on the same atoms and attaches `p` to the `μ`
/// grid. `p_i` is the ratio of cell masses `w^ν_i / w^μ_i`, which makes
/// `⟨f p, g⟩_μ = ⟨f, g⟩_ν` hold exactly on the grid.
pub fn discretize_pair(mu: &MeasureSpec, nu: &MeasureSpec, cfg: &GridConfig) -> Result<(GridMeasure, GridMeasure)> {
    let gm_nu = discretize(nu, cfg)?;
    let gm_mu = discretize(mu, cfg)?;
    let p = gm_mu
        .weights
        .iter()
        .zip(&gm_nu.weights)
        .map(|(&wm, &wn)| if wm > 0.0 { wn / wm } else { 0.0 })
        .collect();
    let gm_mu = gm_mu.with_ratio(p)?;
    Ok((gm_mu, gm_nu))
}

/// Relative Laplace-transform error of an fBM grid against the exact
/// kernel `τ^{H-1/2}/Γ(H+1/2)`, maximized over `taus`.
///
/// `μ` grids are compared through `L(τ)` and `ν` grids through `τ·L(τ)`.
pub fn fbm_laplace_error(spec: &MeasureSpec, gm: &GridMeasure, taus: &[f64]) -> Result<f64> {
    spec.validate()?;
    let h = spec.h;
    let mut worst: f64 = 0.0;
    for &tau in taus {
        let exact = tau.powf(h - 0.5) / gamma(h + 0.5);
        let approx = match spec.family {
            MeasureFamily::FbmMu => laplace(gm, tau)?,
            MeasureFamily::FbmNu => tau * laplace(gm, tau)?,
            MeasureFamily::CustomPowerLaw => {
                return Err(Error::invalid("family", "Laplace target only defined for fBM measures"))
            }
        };
        worst = worst.max((approx - exact).abs() / exact);
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Assumption {
    /// `∫(1∧x^{-1/2})μ < ∞`, `∫(1∧x^{-3/2})ν < ∞`, `sup p e^{-tx} < ∞`.
    AMain,
    /// Logarithmic moment conditions for continuous sample paths.
    APaths,
    /// `∫x^{-1/2}μ < ∞`, `∫x^{-3/2}ν < ∞` for a stationary law.
    AStationary,
    /// The main conditions plus `sup p(1∧x^{-β}) < ∞` for some `β ∈ (0, 2)`.
    AShortrate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionCheck {
    pub name: String,
    /// `None` when the condition involves a measure that was not supplied.
    pub passed: Option<bool>,
    /// The exponent the verdict turns on.
    pub exponent: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrabilityReport {
    pub assumption: Assumption,
    pub conditions: Vec<ConditionCheck>,
}

impl IntegrabilityReport {
    /// True when every decidable condition holds and at least one was checked.
    pub fn passed(&self) -> bool {
        let decided: Vec<bool> = self.conditions.iter().filter_map(|c| c.passed).collect();
        !decided.is_empty() && decided.iter().all(|&b| b)
    }

    pub fn condition(&self, name: &str) -> Option<&ConditionCheck> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

fn check(name: &str, exponent: f64, ok: bool, detail: String) -> ConditionCheck {
    ConditionCheck {
        name: name.to_string(),
        passed: Some(ok),
        exponent,
        detail,
    }
}

/// Decides the integrability conditions of `assumption` by exponent
/// arithmetic on the power-law densities. Conditions on `p = dν/dμ` need
/// both measures and are reported as undecided otherwise.
pub fn validate_integrability(
    mu: Option<&MeasureSpec>,
    nu: Option<&MeasureSpec>,
    assumption: Assumption,
) -> Result<IntegrabilityReport> {
    if let Some(s) = mu {
        s.validate()?;
    }
    if let Some(s) = nu {
        s.validate()?;
    }
    let mut conditions = Vec::new();
    if let Some(s) = mu {
        let a = s.exponent();
        conditions.push(match assumption {
            Assumption::AMain | Assumption::AShortrate => check(
                "mu",
                a,
                a > 0.5 && a < 1.0,
                format!("∫(1∧x^-1/2) x^-{a} dx finite iff 1/2 < α < 1"),
            ),
            Assumption::APaths => check(
                "mu",
                a,
                a > 0.5 && a < 1.5,
                format!("∫log(1+tx) x^-1/2 x^-{a} dx finite iff 1/2 < α < 3/2"),
            ),
            Assumption::AStationary => check(
                "mu",
                a,
                false,
                format!("∫x^-1/2 x^-{a} dx diverges at 0 or ∞ for every exponent"),
            ),
        });
    }
    if let Some(s) = nu {
        let b = s.exponent();
        conditions.push(match assumption {
            Assumption::AMain | Assumption::AShortrate => check(
                "nu",
                b,
                b > -0.5 && b < 1.0,
                format!("∫(1∧x^-3/2) x^-{b} dx finite iff -1/2 < β < 1"),
            ),
            Assumption::APaths => check(
                "nu",
                b,
                b > -0.5 && b < 0.5,
                format!("∫log(1+tx) x^-3/2 x^-{b} dx finite iff -1/2 < β < 1/2"),
            ),
            Assumption::AStationary => check(
                "nu",
                b,
                false,
                format!("∫x^-3/2 x^-{b} dx diverges at 0 or ∞ for every exponent"),
            ),
        });
    }
    // p(x) ∝ x^{α-β}
    let gamma_exp = match (mu, nu) {
        (Some(m), Some(n)) => Some(m.exponent() - n.exponent()),
        _ => None,
    };
    let (name, rule) = match assumption {
        Assumption::AShortrate => ("p_growth", "p ∝ x^γ bounded by 1∧x^-β, β ∈ (0,2), iff 0 ≤ γ < 2"),
        _ => ("p_exp_bound", "sup p e^-tx finite for p ∝ x^γ iff γ ≥ 0"),
    };
    conditions.push(match gamma_exp {
        Some(g) => {
            let ok = match assumption {
                Assumption::AShortrate => (0.0..2.0).contains(&g),
                _ => g >= 0.0,
            };
            check(name, g, ok, rule.to_string())
        }
        None => ConditionCheck {
            name: name.to_string(),
            passed: None,
            exponent: f64::NAN,
            detail: "needs both μ and ν".to_string(),
        },
    });
    Ok(IntegrabilityReport { assumption, conditions })
}
