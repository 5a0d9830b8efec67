//! The OU field `(Y, Z)` on a finite set of mean-reversion speeds.
//!
//! For each atom `x`,
//!
//! ```text
//! dY = -x Y dt + dW,    dZ = (-x Z + Y) dt,
//! ```
//!
//! all driven by one Brownian motion `W`. Over a step `Δ` the update is an
//! exact Gaussian transition, so paths carry no time-discretization bias.
//! The Brownian increment of each step is drawn jointly with the update.

use std::collections::HashMap;
use std::io::{self, Write};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::measure::GridMeasure;
use crate::numerics::{exp_integral, GaussianFactor};
use crate::rng::GaussianSource;

/// Union of the `μ` and `ν` atoms with each measure's weights zero-extended.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub atoms: Vec<f64>,
    pub mu_weights: Vec<f64>,
    pub nu_weights: Vec<f64>,
    /// Whether `Z` is part of the state (false when `ν` is absent).
    pub track_z: bool,
}

fn same_atom(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

impl FieldGrid {
    pub fn new(gm_mu: &GridMeasure, gm_nu: Option<&GridMeasure>) -> Self {
        let Some(nu) = gm_nu else {
            return FieldGrid {
                atoms: gm_mu.atoms.clone(),
                mu_weights: gm_mu.weights.clone(),
                nu_weights: vec![0.0; gm_mu.len()],
                track_z: false,
            };
        };
        let (mut i, mut j) = (0, 0);
        let mut atoms = Vec::new();
        let mut mu_w = Vec::new();
        let mut nu_w = Vec::new();
        while i < gm_mu.len() || j < nu.len() {
            let a = gm_mu.atoms.get(i).copied();
            let b = nu.atoms.get(j).copied();
            match (a, b) {
                (Some(a), Some(b)) if same_atom(a, b) => {
                    atoms.push(a);
                    mu_w.push(gm_mu.weights[i]);
                    nu_w.push(nu.weights[j]);
                    i += 1;
                    j += 1;
                }
                (Some(a), Some(b)) if a < b => {
                    atoms.push(a);
                    mu_w.push(gm_mu.weights[i]);
                    nu_w.push(0.0);
                    i += 1;
                }
                (Some(a), None) => {
                    atoms.push(a);
                    mu_w.push(gm_mu.weights[i]);
                    nu_w.push(0.0);
                    i += 1;
                }
                (_, Some(b)) => {
                    atoms.push(b);
                    mu_w.push(0.0);
                    nu_w.push(nu.weights[j]);
                    j += 1;
                }
                (None, None) => unreachable!(),
            }
        }
        FieldGrid {
            atoms,
            mu_weights: mu_w,
            nu_weights: nu_w,
            track_z: true,
        }
    }

    /// A grid carrying only `ν`; `Y` still lives on its atoms because `Z`
    /// integrates it.
    pub fn nu_only(gm_nu: &GridMeasure) -> Self {
        FieldGrid {
            atoms: gm_nu.atoms.clone(),
            mu_weights: vec![0.0; gm_nu.len()],
            nu_weights: gm_nu.weights.clone(),
            track_z: true,
        }
    }

    /// Unit-weight grid on explicit atoms, tracking both `Y` and `Z`.
    pub fn from_atoms(atoms: Vec<f64>, track_z: bool) -> Result<Self> {
        let n = atoms.len();
        let gm = GridMeasure::new(atoms, vec![1.0; n])?;
        Ok(FieldGrid {
            atoms: gm.atoms,
            mu_weights: vec![1.0; n],
            nu_weights: if track_z { vec![1.0; n] } else { vec![0.0; n] },
            track_z,
        })
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Length of the stacked `(Y, Z)` state.
    pub fn state_dim(&self) -> usize {
        if self.track_z {
            2 * self.len()
        } else {
            self.len()
        }
    }

    /// Maps a function on the atoms of `gm` onto the union grid, zero elsewhere.
    pub fn lift(&self, gm: &GridMeasure, f: &[f64]) -> Result<Vec<f64>> {
        Error::check_len("grid function", gm.len(), f.len())?;
        let mut out = vec![0.0; self.len()];
        let mut k = 0;
        for (i, &x) in gm.atoms.iter().enumerate() {
            while k < self.len() && !same_atom(self.atoms[k], x) {
                k += 1;
            }
            if k == self.len() {
                return Err(Error::invalid("grid function", "atom not present on the field grid"));
            }
            out[k] = f[i];
        }
        Ok(out)
    }

    /// `⟨f, g⟩_μ`.
    pub fn pair_mu(&self, f: &[f64], g: &[f64]) -> f64 {
        self.mu_weights.iter().zip(f).zip(g).map(|((w, a), b)| w * a * b).sum()
    }

    /// `⟨f, g⟩_ν`.
    pub fn pair_nu(&self, f: &[f64], g: &[f64]) -> f64 {
        self.nu_weights.iter().zip(f).zip(g).map(|((w, a), b)| w * a * b).sum()
    }

    /// `⟨f, 1⟩_μ`.
    pub fn mass_mu(&self, f: &[f64]) -> f64 {
        self.mu_weights.iter().zip(f).map(|(w, a)| w * a).sum()
    }

    /// `⟨f, 1⟩_ν`.
    pub fn mass_nu(&self, f: &[f64]) -> f64 {
        self.nu_weights.iter().zip(f).map(|(w, a)| w * a).sum()
    }

    pub(crate) fn check_u(&self, u: &[f64]) -> Result<()> {
        Error::check_len("u", self.len(), u.len())
    }

    /// `v` must live where `ν` has mass and `ν ≪ μ` must hold on its support.
    pub(crate) fn check_v(&self, v: &[f64]) -> Result<()> {
        Error::check_len("v", self.len(), v.len())?;
        for i in 0..self.len() {
            if v[i] != 0.0 && self.nu_weights[i] > 0.0 && self.mu_weights[i] == 0.0 {
                return Err(Error::invalid(
                    "p",
                    format!(
                        "density dν/dμ required but absent at x = {} (ν has mass, μ does not)",
                        self.atoms[i]
                    ),
                ));
            }
        }
        Ok(())
    }
}

/// State of the field at time `t`. `z` is empty when the grid does not
/// track `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct OUState {
    pub t: f64,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl OUState {
    pub fn zero(grid: &FieldGrid) -> Self {
        OUState {
            t: 0.0,
            y: vec![0.0; grid.len()],
            z: if grid.track_z {
                vec![0.0; grid.len()]
            } else {
                Vec::new()
            },
        }
    }

    pub fn explicit(grid: &FieldGrid, y: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        Error::check_len("y", grid.len(), y.len())?;
        let expected_z = if grid.track_z { grid.len() } else { 0 };
        Error::check_len("z", expected_z, z.len())?;
        if y.iter().chain(&z).any(|v| !v.is_finite()) {
            return Err(Error::invalid("state", "entries must be finite"));
        }
        Ok(OUState { t: 0.0, y, z })
    }
}

/// Covariance of `(Y_∞, Z_∞)`: `1/a`, `1/a²`, `2/a³` with `a = x_i + x_j`.
pub fn stationary_covariance(grid: &FieldGrid) -> DMatrix<f64> {
    let n = grid.len();
    let dim = grid.state_dim();
    DMatrix::from_fn(dim, dim, |r, c| {
        let a = grid.atoms[r % n] + grid.atoms[c % n];
        match (r >= n, c >= n) {
            (false, false) => 1.0 / a,
            (true, true) => 2.0 / (a * a * a),
            _ => 1.0 / (a * a),
        }
    })
}

/// Sampler for the stationary law of the field.
#[derive(Debug, Clone)]
pub struct StationaryLaw {
    factor: GaussianFactor,
    n: usize,
    track_z: bool,
}

impl StationaryLaw {
    pub fn new(grid: &FieldGrid) -> Result<Self> {
        Ok(StationaryLaw {
            factor: GaussianFactor::from_covariance(&stationary_covariance(grid))?,
            n: grid.len(),
            track_z: grid.track_z,
        })
    }

    pub fn sample<G: GaussianSource + ?Sized>(&self, rng: &mut G) -> OUState {
        let mut z = vec![0.0; self.factor.rank()];
        rng.fill_normal(&mut z);
        let mut out = vec![0.0; self.factor.dim()];
        self.factor.apply(&z, &mut out);
        let zpart = if self.track_z {
            out.split_off(self.n)
        } else {
            Vec::new()
        };
        OUState {
            t: 0.0,
            y: out,
            z: zpart,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    Zero,
    Stationary,
    Explicit { y: Vec<f64>, z: Vec<f64> },
}

pub fn init_state<G: GaussianSource + ?Sized>(grid: &FieldGrid, mode: &InitMode, rng: &mut G) -> Result<OUState> {
    match mode {
        InitMode::Zero => Ok(OUState::zero(grid)),
        InitMode::Stationary => Ok(StationaryLaw::new(grid)?.sample(rng)),
        InitMode::Explicit { y, z } => OUState::explicit(grid, y.clone(), z.clone()),
    }
}

/// Exact one-step transition of the field over a fixed step `Δ`.
///
/// The noise vector is ordered `(ξ_1..ξ_n, ζ_1..ζ_n, ΔW)`, with the `ζ`
/// block absent when `Z` is not tracked.
#[derive(Debug, Clone)]
pub struct TransitionKernel {
    pub delta: f64,
    pub decay: Vec<f64>,
    pub coupling: Vec<f64>,
    /// Joint covariance of the noise vector including `ΔW` as the last coordinate.
    pub covariance: DMatrix<f64>,
    /// Covariance of each state-noise coordinate with `ΔW`.
    pub bm_loading: Vec<f64>,
    factor: GaussianFactor,
    n: usize,
    track_z: bool,
}

pub fn make_kernel(grid: &FieldGrid, delta: f64) -> Result<TransitionKernel> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid("delta", "step must be positive"));
    }
    let n = grid.len();
    let sd = grid.state_dim();
    let dim = sd + 1;
    let x = &grid.atoms;
    // moment k of the kernels e^{-r a} r^k over [0, Δ]
    let block = |r: usize| (r >= n) as u32;
    let covariance = DMatrix::from_fn(dim, dim, |r, c| match (r == sd, c == sd) {
        (true, true) => delta,
        (true, false) => exp_integral(block(c), x[c % n], delta),
        (false, true) => exp_integral(block(r), x[r % n], delta),
        (false, false) => exp_integral(block(r) + block(c), x[r % n] + x[c % n], delta),
    });
    let bm_loading = (0..sd).map(|r| covariance[(r, sd)]).collect();
    let factor = GaussianFactor::from_covariance(&covariance)?;
    let decay: Vec<f64> = x.iter().map(|&xi| (-delta * xi).exp()).collect();
    let coupling = decay.iter().map(|&d| delta * d).collect();
    Ok(TransitionKernel {
        delta,
        decay,
        coupling,
        covariance,
        bm_loading,
        factor,
        n,
        track_z: grid.track_z,
    })
}

/// One kernel per interval of `times`, each covering `1/per` of its interval.
/// Kernels for equal step sizes are built once and shared.
pub(crate) fn kernel_plan(grid: &FieldGrid, times: &[f64], per: usize) -> Result<Vec<TransitionKernel>> {
    let mut cache: HashMap<u64, TransitionKernel> = HashMap::new();
    let mut kernels = Vec::with_capacity(times.len().saturating_sub(1));
    for w in times.windows(2) {
        let d = (w[1] - w[0]) / per as f64;
        let k = match cache.get(&d.to_bits()) {
            Some(k) => k.clone(),
            None => {
                let k = make_kernel(grid, d)?;
                cache.insert(d.to_bits(), k.clone());
                k
            }
        };
        kernels.push(k);
    }
    Ok(kernels)
}

impl TransitionKernel {
    /// Dimension of the noise vector, `ΔW` included.
    pub fn noise_dim(&self) -> usize {
        self.factor.dim()
    }

    /// Number of standard normals consumed per step.
    pub fn rank(&self) -> usize {
        self.factor.rank()
    }

    /// Correlated noise vector from standard normals.
    pub fn noise_from_normals(&self, normals: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.noise_dim()];
        self.factor.apply(normals, &mut out);
        out
    }

    /// Applies the conditional mean plus an explicit noise vector and
    /// returns the Brownian increment it carries.
    pub fn advance(&self, state: &mut OUState, noise: &[f64]) -> f64 {
        debug_assert_eq!(noise.len(), self.noise_dim());
        let n = self.n;
        if self.track_z {
            for i in 0..n {
                state.z[i] = self.decay[i] * state.z[i] + self.coupling[i] * state.y[i] + noise[n + i];
            }
        }
        for i in 0..n {
            state.y[i] = self.decay[i] * state.y[i] + noise[i];
        }
        state.t += self.delta;
        noise[noise.len() - 1]
    }

    /// One exact step in place; returns the Brownian increment.
    pub fn step_in_place<G: GaussianSource + ?Sized>(&self, state: &mut OUState, rng: &mut G) -> f64 {
        let mut z = vec![0.0; self.rank()];
        rng.fill_normal(&mut z);
        let noise = self.noise_from_normals(&z);
        self.advance(state, &noise)
    }
}

pub fn step<G: GaussianSource + ?Sized>(state: &OUState, kernel: &TransitionKernel, rng: &mut G) -> (OUState, f64) {
    let mut next = state.clone();
    let dw = kernel.step_in_place(&mut next, rng);
    (next, dw)
}

/// `(⟨Y, u⟩_μ, ⟨Z, v⟩_ν)`.
pub fn pair(grid: &FieldGrid, state: &OUState, u: &[f64], v: &[f64]) -> Result<(f64, f64)> {
    Error::check_len("u", grid.len(), u.len())?;
    Error::check_len("v", grid.len(), v.len())?;
    Error::check_len("y", grid.len(), state.y.len())?;
    let zy = grid.pair_mu(&state.y, u);
    let zz = if grid.track_z {
        grid.pair_nu(&state.z, v)
    } else if v.iter().zip(&grid.nu_weights).any(|(a, w)| *a != 0.0 && *w != 0.0) {
        return Err(Error::invalid("v", "Z is not tracked on this grid"));
    } else {
        0.0
    };
    Ok((zy, zz))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovKind {
    P,
    Q,
}

/// Unweighted covariance kernels `P_τ` (of `Y`) and `Q_τ` (of `Z`) started from zero.
pub fn cov_operator(atoms: &[f64], tau: f64, which: CovKind) -> Result<DMatrix<f64>> {
    if !(tau > 0.0) {
        return Err(Error::invalid("tau", "horizon must be positive"));
    }
    let k = match which {
        CovKind::P => 0,
        CovKind::Q => 2,
    };
    let n = atoms.len();
    Ok(DMatrix::from_fn(n, n, |i, j| exp_integral(k, atoms[i] + atoms[j], tau)))
}

/// Recorded path: states on a uniform time grid and the Brownian
/// increment of each step.
#[derive(Debug, Clone, PartialEq)]
pub struct OuPath {
    pub states: Vec<OUState>,
    pub bm_increments: Vec<f64>,
}

impl OuPath {
    pub fn simulate<G: GaussianSource + ?Sized>(
        start: OUState,
        kernel: &TransitionKernel,
        steps: usize,
        rng: &mut G,
    ) -> Self {
        let mut states = Vec::with_capacity(steps + 1);
        let mut bm = Vec::with_capacity(steps);
        let mut cur = start;
        states.push(cur.clone());
        for _ in 0..steps {
            bm.push(kernel.step_in_place(&mut cur, rng));
            states.push(cur.clone());
        }
        OuPath {
            states,
            bm_increments: bm,
        }
    }

    /// CSV with columns `t, y_0.., z_0..`.
    pub fn write_csv<W: Write>(&self, out: W) -> io::Result<()> {
        let first = &self.states[0];
        let mut header = vec!["t".to_string()];
        header.extend((0..first.y.len()).map(|i| format!("y{i}")));
        header.extend((0..first.z.len()).map(|i| format!("z{i}")));
        let header_ref: Vec<&str> = header.iter().map(String::as_str).collect();
        crate::io::write_csv(
            out,
            &header_ref,
            self.states.iter().map(|s| {
                let mut row = vec![s.t];
                row.extend_from_slice(&s.y);
                row.extend_from_slice(&s.z);
                row
            }),
        )
    }
}

/// Time-dependent test function: values and time derivatives on the grid.
pub type TestFunction<'a> = &'a dyn Fn(f64) -> (Vec<f64>, Vec<f64>);

#[derive(Debug, Clone, PartialEq)]
pub struct SemimartingaleResidual {
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl SemimartingaleResidual {
    pub fn rms_y(&self) -> f64 {
        rms(&self.y)
    }

    pub fn rms_z(&self) -> f64 {
        rms(&self.z)
    }
}

fn rms(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    (v.iter().map(|a| a * a).sum::<f64>() / v.len() as f64).sqrt()
}

/// Per-step residuals of the semimartingale decompositions
///
/// ```text
/// d⟨Y, f⟩_μ = ⟨Y, ∂f - x f⟩_μ dt + ⟨f, 1⟩_μ dW
/// d⟨Z, g⟩_ν = ⟨Z, ∂g - x g⟩_ν dt + ⟨Y, g⟩_ν dt
/// ```
///
/// with left-point quadrature of the `dt` terms.
pub fn semimartingale_residual(
    grid: &FieldGrid,
    path: &OuPath,
    f: TestFunction<'_>,
    g: Option<TestFunction<'_>>,
) -> Result<SemimartingaleResidual> {
    let steps = path.states.len().saturating_sub(1);
    if path.bm_increments.len() != steps {
        return Err(Error::invalid(
            "bm_increments",
            format!("{} recorded increments for {} steps", path.bm_increments.len(), steps),
        ));
    }
    if g.is_some() && !grid.track_z {
        return Err(Error::invalid("g", "Z is not tracked on this grid"));
    }
    let x = &grid.atoms;
    let mut ry = Vec::with_capacity(steps);
    let mut rz = Vec::with_capacity(steps);
    for k in 0..steps {
        let s0 = &path.states[k];
        let s1 = &path.states[k + 1];
        let dt = s1.t - s0.t;
        let (f0, df0) = f(s0.t);
        let (f1, _) = f(s1.t);
        let drift: Vec<f64> = (0..grid.len()).map(|i| df0[i] - x[i] * f0[i]).collect();
        ry.push(
            grid.pair_mu(&s1.y, &f1)
                - grid.pair_mu(&s0.y, &f0)
                - grid.pair_mu(&s0.y, &drift) * dt
                - grid.mass_mu(&f0) * path.bm_increments[k],
        );
        if let Some(g) = g {
            let (g0, dg0) = g(s0.t);
            let (g1, _) = g(s1.t);
            let drift: Vec<f64> = (0..grid.len()).map(|i| dg0[i] - x[i] * g0[i]).collect();
            rz.push(
                grid.pair_nu(&s1.z, &g1)
                    - grid.pair_nu(&s0.z, &g0)
                    - grid.pair_nu(&s0.z, &drift) * dt
                    - grid.pair_nu(&s0.y, &g0) * dt,
            );
        }
    }
    Ok(SemimartingaleResidual { y: ry, z: rz })
}

/// Largest deviation `|Z^x_t + ∂_x Y^x_t - (∂_x Y^x_0 + Z^x_0) e^{-tx}|`
/// over interior atoms and all recorded times, with central differences
/// in `x` on a uniform atom grid.
pub fn spatial_consistency(grid: &FieldGrid, path: &OuPath) -> Result<f64> {
    let n = grid.len();
    if n < 3 {
        return Err(Error::invalid("atoms", "central differences need at least 3 atoms"));
    }
    if !grid.track_z {
        return Err(Error::invalid("grid", "Z must be tracked"));
    }
    let h = grid.atoms[1] - grid.atoms[0];
    if grid.atoms.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h) {
        return Err(Error::invalid("atoms", "atoms must be uniformly spaced"));
    }
    let s0 = &path.states[0];
    let dy = |s: &OUState, i: usize| (s.y[i + 1] - s.y[i - 1]) / (2.0 * h);
    let mut worst: f64 = 0.0;
    for s in &path.states {
        let t = s.t - s0.t;
        for i in 1..n - 1 {
            let x = grid.atoms[i];
            let dev = s.z[i] + dy(s, i) - (dy(s0, i) + s0.z[i]) * (-t * x).exp();
            worst = worst.max(dev.abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn one_atom(track_z: bool) -> FieldGrid {
        FieldGrid::from_atoms(vec![1.0], track_z).unwrap()
    }

    #[test]
    fn kernel_single_atom_entries() {
        let k = make_kernel(&one_atom(true), 1.0).unwrap();
        let e2 = (-2f64).exp();
        assert_relative_eq!(k.covariance[(0, 0)], (1.0 - e2) / 2.0, max_relative = 1e-14);
        assert_relative_eq!(k.covariance[(0, 1)], (1.0 - 3.0 * e2) / 4.0, max_relative = 1e-14);
        assert_relative_eq!(k.covariance[(1, 1)], (2.0 - 10.0 * e2) / 8.0, max_relative = 1e-14);
        // ∫_0^1 e^{-r} dr and ∫_0^1 r e^{-r} dr
        assert_relative_eq!(k.bm_loading[0], 1.0 - (-1f64).exp(), max_relative = 1e-14);
        assert_relative_eq!(k.bm_loading[1], 1.0 - 2.0 * (-1f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn kernel_vanishes_as_step_shrinks() {
        let k = make_kernel(&one_atom(true), 1e-10).unwrap();
        assert!(k.covariance.iter().all(|c| c.abs() < 1e-9));
        assert!((k.decay[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_noise_is_mean_dynamics() {
        let grid = one_atom(true);
        let k = make_kernel(&grid, 1.0).unwrap();
        let mut s = OUState::explicit(&grid, vec![1.0], vec![0.0]).unwrap();
        let dw = k.advance(&mut s, &vec![0.0; k.noise_dim()]);
        assert_eq!(dw, 0.0);
        assert_relative_eq!(s.y[0], (-1f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(s.z[0], (-1f64).exp(), max_relative = 1e-15);
        assert_eq!(s.t, 1.0);
    }

    #[test]
    fn stationary_single_atom_moments() {
        let grid = FieldGrid::from_atoms(vec![2.0], true).unwrap();
        let c = stationary_covariance(&grid);
        assert_relative_eq!(c[(0, 0)], 0.25);
        assert_relative_eq!(c[(1, 1)], 0.03125);
        assert_relative_eq!(c[(0, 1)], 0.0625);
    }

    #[test]
    fn pair_single_atom() {
        let gm = GridMeasure::single(1.0, 2.0).unwrap();
        let grid = FieldGrid::new(&gm, None);
        let s = OUState::explicit(&grid, vec![3.0], vec![]).unwrap();
        assert_eq!(pair(&grid, &s, &[1.0], &[0.0]).unwrap(), (6.0, 0.0));
        assert_eq!(pair(&grid, &s, &[0.0], &[0.0]).unwrap(), (0.0, 0.0));
        assert!(pair(&grid, &s, &[1.0, 2.0], &[0.0]).is_err());
    }

    #[test]
    fn explicit_length_mismatch() {
        let grid = one_atom(true);
        assert!(OUState::explicit(&grid, vec![1.0, 2.0], vec![0.0]).is_err());
        assert!(OUState::explicit(&grid, vec![1.0], vec![]).is_err());
    }

    #[test]
    fn cov_operator_values() {
        let p = cov_operator(&[1.0], 1.0, CovKind::P).unwrap();
        assert_relative_eq!(p[(0, 0)], 0.432332, max_relative = 1e-6);
        let p = cov_operator(&[1.0, 3.0], 200.0, CovKind::P).unwrap();
        assert_relative_eq!(p[(0, 1)], 0.25, max_relative = 1e-14);
    }

    #[test]
    fn union_grid_merges_atoms() {
        let mu = GridMeasure::new(vec![1.0, 2.0], vec![1.0, 1.0]).unwrap();
        let nu = GridMeasure::new(vec![2.0, 3.0], vec![0.5, 0.5]).unwrap();
        let g = FieldGrid::new(&mu, Some(&nu));
        assert_eq!(g.atoms, vec![1.0, 2.0, 3.0]);
        assert_eq!(g.mu_weights, vec![1.0, 1.0, 0.0]);
        assert_eq!(g.nu_weights, vec![0.0, 0.5, 0.5]);
        assert!(g.check_v(&[0.0, 1.0, 0.0]).is_ok());
        assert!(g.check_v(&[0.0, 0.0, 1.0]).is_err());
        assert_eq!(g.lift(&nu, &[7.0, 8.0]).unwrap(), vec![0.0, 7.0, 8.0]);
    }

    #[test]
    fn missing_increment_record_is_rejected() {
        let grid = one_atom(false);
        let s = OUState::zero(&grid);
        let path = OuPath {
            states: vec![s.clone(), s],
            bm_increments: vec![],
        };
        let f = |_t: f64| (vec![1.0], vec![0.0]);
        assert!(semimartingale_residual(&grid, &path, &f, None).is_err());
    }
}
