//! Affine transform coefficients of the OU field.
//!
//! * `φ(τ, u, v)` gives `E[exp(⟨Y_T, u⟩_μ + ⟨Z_T, v⟩_ν) | F_t]`,
//! * `Φ(τ, u, v)` gives `E[exp(-∫_t^T ⟨Y_s, u⟩_μ + ⟨Z_s, v⟩_ν ds) | F_t]`,
//! * `ψ(τ, w)` gives the transform of `Π = Y ⊗ Y` against a finite-rank
//!   symmetric tensor `w`.
//!
//! Grid functions live on the atoms of a [`FieldGrid`]. The density ratio
//! `p = dν/dμ` is the ratio of the grid weights, so `⟨p v, f⟩_μ = ⟨v, f⟩_ν`.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{FieldGrid, OUState};
use crate::numerics::{exp_integral, exp_moment, integrate_adaptive, EIGEN_CLIP};

/// Scalar part plus one grid function per field component.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineCoeffs {
    pub c0: f64,
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
}

impl AffineCoeffs {
    /// `c0 + ⟨Y, c1⟩_μ + ⟨Z, c2⟩_ν`.
    pub fn exponent(&self, grid: &FieldGrid, state: &OUState) -> f64 {
        let mut e = self.c0 + grid.pair_mu(&state.y, &self.c1);
        if grid.track_z {
            e += grid.pair_nu(&state.z, &self.c2);
        }
        e
    }
}

fn density_ratio(grid: &FieldGrid) -> Vec<f64> {
    grid.mu_weights
        .iter()
        .zip(&grid.nu_weights)
        .map(|(&m, &n)| if m > 0.0 { n / m } else { 0.0 })
        .collect()
}

fn check_uv(grid: &FieldGrid, u: &[f64], v: &[f64]) -> Result<()> {
    grid.check_u(u)?;
    grid.check_v(v)
}

/// `φ(τ, u, v)` with `φ0` in closed form.
pub fn phi(grid: &FieldGrid, tau: f64, u: &[f64], v: &[f64]) -> Result<AffineCoeffs> {
    if !(tau >= 0.0) {
        return Err(Error::invalid("tau", "must be nonnegative"));
    }
    check_uv(grid, u, v)?;
    let x = &grid.atoms;
    let p = density_ratio(grid);
    let n = grid.len();
    let mut c1 = Vec::with_capacity(n);
    let mut c2 = Vec::with_capacity(n);
    for i in 0..n {
        let d = (-tau * x[i]).exp();
        c1.push(d * (u[i] + tau * p[i] * v[i]));
        c2.push(d * v[i]);
    }
    // ⟨φ1(s), 1⟩_μ = Σ e^{-s x_i}(a_i + s b_i)
    let a: Vec<f64> = (0..n).map(|i| grid.mu_weights[i] * u[i]).collect();
    let b: Vec<f64> = (0..n).map(|i| grid.nu_weights[i] * v[i]).collect();
    let mut c0 = 0.0;
    for i in 0..n {
        if a[i] == 0.0 && b[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            if a[j] == 0.0 && b[j] == 0.0 {
                continue;
            }
            let s = x[i] + x[j];
            c0 += a[i] * a[j] * exp_integral(0, s, tau)
                + 2.0 * a[i] * b[j] * exp_integral(1, s, tau)
                + b[i] * b[j] * exp_integral(2, s, tau);
        }
    }
    Ok(AffineCoeffs { c0: 0.5 * c0, c1, c2 })
}

/// Right-hand side of the `φ` Riccati system at `(c1, c2)`:
/// `(½⟨c1, 1⟩_μ², -x c1 + p c2, -x c2)`.
pub fn riccati_rhs(grid: &FieldGrid, c: &AffineCoeffs) -> AffineCoeffs {
    let p = density_ratio(grid);
    let m = grid.mass_mu(&c.c1);
    AffineCoeffs {
        c0: 0.5 * m * m,
        c1: (0..grid.len())
            .map(|i| -grid.atoms[i] * c.c1[i] + p[i] * c.c2[i])
            .collect(),
        c2: (0..grid.len()).map(|i| -grid.atoms[i] * c.c2[i]).collect(),
    }
}

/// `∂_τ φ(τ, u, v)`.
pub fn phi_derivative(grid: &FieldGrid, tau: f64, u: &[f64], v: &[f64]) -> Result<AffineCoeffs> {
    Ok(riccati_rhs(grid, &phi(grid, tau, u, v)?))
}

/// `⟨Φ1(s, u, v), 1⟩_μ`.
pub fn big_phi1_mass(grid: &FieldGrid, s: f64, u: &[f64], v: &[f64]) -> f64 {
    let mut m = 0.0;
    for i in 0..grid.len() {
        let y = s * grid.atoms[i];
        m -= grid.mu_weights[i] * u[i] * s * exp_moment(0, y) + grid.nu_weights[i] * v[i] * s * s * exp_moment(1, y);
    }
    m
}

/// Relative tolerance of the `Φ0` quadrature.
pub const PHI0_TOL: f64 = 1e-13;

/// `Φ(τ, u, v)`; `Φ1`, `Φ2` in closed form and `Φ0 = ½∫_0^τ ⟨Φ1(s), 1⟩_μ² ds`
/// by adaptive Gauss–Kronrod quadrature.
#[allow(non_snake_case)]
pub fn Phi(grid: &FieldGrid, tau: f64, u: &[f64], v: &[f64]) -> Result<AffineCoeffs> {
    if !(tau >= 0.0) {
        return Err(Error::invalid("tau", "must be nonnegative"));
    }
    check_uv(grid, u, v)?;
    let p = density_ratio(grid);
    let n = grid.len();
    let mut c1 = Vec::with_capacity(n);
    let mut c2 = Vec::with_capacity(n);
    for i in 0..n {
        let y = tau * grid.atoms[i];
        let g0 = tau * exp_moment(0, y);
        let g1 = tau * tau * exp_moment(1, y);
        c1.push(-g0 * u[i] - g1 * p[i] * v[i]);
        c2.push(-g0 * v[i]);
    }
    let c0 = integrate_adaptive(0.0, tau, 0.0, PHI0_TOL, |s| {
        let m = big_phi1_mass(grid, s, u, v);
        0.5 * m * m
    })?;
    Ok(AffineCoeffs { c0, c1, c2 })
}

/// `∂_τ Φ(τ, u, v)`.
#[allow(non_snake_case)]
pub fn Phi_derivative(grid: &FieldGrid, tau: f64, u: &[f64], v: &[f64]) -> Result<AffineCoeffs> {
    if !(tau >= 0.0) {
        return Err(Error::invalid("tau", "must be nonnegative"));
    }
    check_uv(grid, u, v)?;
    let p = density_ratio(grid);
    let n = grid.len();
    let mut c1 = Vec::with_capacity(n);
    let mut c2 = Vec::with_capacity(n);
    for i in 0..n {
        let d = (-tau * grid.atoms[i]).exp();
        c1.push(-d * (u[i] + tau * p[i] * v[i]));
        c2.push(-d * v[i]);
    }
    let m = big_phi1_mass(grid, tau, u, v);
    Ok(AffineCoeffs {
        c0: 0.5 * m * m,
        c1,
        c2,
    })
}

/// Largest exponent accepted before reporting overflow.
const MAX_EXPONENT: f64 = 709.0;

/// `E[exp(⟨Y_T, u⟩_μ + ⟨Z_T, v⟩_ν) | state]` with `τ = T - t`.
pub fn mgf(grid: &FieldGrid, state: &OUState, tau: f64, u: &[f64], v: &[f64]) -> Result<f64> {
    let e = phi(grid, tau, u, v)?.exponent(grid, state);
    if e > MAX_EXPONENT {
        return Err(Error::Overflow { exponent: e });
    }
    Ok(e.exp())
}

/// The transform at complex scale `z`, i.e. `E[exp(z(⟨Y_T, u⟩_μ + ⟨Z_T, v⟩_ν))]`.
/// `z = i` gives the characteristic function.
pub fn mgf_scaled(
    grid: &FieldGrid,
    state: &OUState,
    tau: f64,
    u: &[f64],
    v: &[f64],
    z: Complex64,
) -> Result<Complex64> {
    let c = phi(grid, tau, u, v)?;
    let linear = c.exponent(grid, state) - c.c0;
    let e = z * z * c.c0 + z * linear;
    if e.re > MAX_EXPONENT {
        return Err(Error::Overflow { exponent: e.re });
    }
    Ok(e.exp())
}

/// Symmetric finite-rank tensor `Σ_kl C_kl b_k ⊗ b_l` on the grid atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor {
    pub basis: Vec<Vec<f64>>,
    pub coeffs: DMatrix<f64>,
}

impl SymTensor {
    /// `Σ_k c_k b_k ⊗ b_k`.
    pub fn from_rank_one(terms: Vec<(f64, Vec<f64>)>) -> Self {
        let m = terms.len();
        let mut coeffs = DMatrix::zeros(m, m);
        let mut basis = Vec::with_capacity(m);
        for (k, (c, b)) in terms.into_iter().enumerate() {
            coeffs[(k, k)] = c;
            basis.push(b);
        }
        SymTensor { basis, coeffs }
    }

    /// `½(a ⊗ b + b ⊗ a)`.
    pub fn symmetric_product(a: Vec<f64>, b: Vec<f64>) -> Self {
        SymTensor {
            basis: vec![a, b],
            coeffs: DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]),
        }
    }

    pub fn dense(&self, n: usize) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(n, n);
        let m = self.basis.len();
        for k in 0..m {
            for l in 0..m {
                let c = self.coeffs[(k, l)];
                if c == 0.0 {
                    continue;
                }
                for i in 0..n {
                    for j in 0..n {
                        d[(i, j)] += c * self.basis[k][i] * self.basis[l][j];
                    }
                }
            }
        }
        d
    }
}

/// Diagonal form `Σ_k ϑ_k v_k ⊗ v_k` with `⟨P_τ v_k, v_l⟩_μ = δ_kl`.
#[derive(Debug, Clone, PartialEq)]
pub struct SumOfSquares {
    pub tau: f64,
    pub theta: Vec<Complex64>,
    pub vectors: Vec<Vec<f64>>,
}

impl SumOfSquares {
    /// Multiplies every coefficient by `z`.
    pub fn scaled(mut self, z: Complex64) -> Self {
        for t in &mut self.theta {
            *t *= z;
        }
        self
    }

    pub fn dense(&self, n: usize) -> DMatrix<Complex64> {
        let mut d = DMatrix::zeros(n, n);
        for (t, v) in self.theta.iter().zip(&self.vectors) {
            for i in 0..n {
                for j in 0..n {
                    d[(i, j)] += t * v[i] * v[j];
                }
            }
        }
        d
    }
}

/// `W P_τ W` with `W` the `μ` weights.
fn weighted_p(grid: &FieldGrid, tau: f64) -> DMatrix<f64> {
    let n = grid.len();
    let w = &grid.mu_weights;
    DMatrix::from_fn(n, n, |i, j| {
        if w[i] == 0.0 || w[j] == 0.0 {
            0.0
        } else {
            w[i] * w[j] * exp_integral(0, grid.atoms[i] + grid.atoms[j], tau)
        }
    })
}

/// `⟨P_τ f, g⟩_μ`.
pub fn p_inner(grid: &FieldGrid, tau: f64, f: &[f64], g: &[f64]) -> f64 {
    let wp = weighted_p(grid, tau);
    let mut s = 0.0;
    for i in 0..grid.len() {
        for j in 0..grid.len() {
            s += f[i] * wp[(i, j)] * g[j];
        }
    }
    s
}

fn diagonalize_impl(grid: &FieldGrid, tensor: &SymTensor, tau: f64, strict: bool) -> Result<SumOfSquares> {
    if !(tau > 0.0) {
        return Err(Error::invalid("tau", "must be positive"));
    }
    let m = tensor.basis.len();
    if m == 0 {
        return Err(Error::invalid("tensor", "need at least one term"));
    }
    if tensor.coeffs.nrows() != m || tensor.coeffs.ncols() != m {
        return Err(Error::LengthMismatch {
            field: "coeffs",
            expected: m,
            actual: tensor.coeffs.nrows(),
        });
    }
    for b in &tensor.basis {
        Error::check_len("basis", grid.len(), b.len())?;
    }
    let n = grid.len();
    let wp = weighted_p(grid, tau);
    let bmat = DMatrix::from_fn(n, m, |i, k| tensor.basis[k][i]);
    let gram = bmat.transpose() * &wp * &bmat;
    let gram = (&gram + gram.transpose()) * 0.5;
    let eg = SymmetricEigen::new(gram);
    let max_ev = eg.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let mut keep = Vec::new();
    for k in 0..m {
        let ev = eg.eigenvalues[k];
        if ev > EIGEN_CLIP * max_ev && max_ev > 0.0 {
            keep.push(k);
        } else if strict {
            return Err(Error::RankDeficient {
                direction: k,
                eigenvalue: ev,
                max_eigenvalue: max_ev,
            });
        }
    }
    let r = keep.len();
    if r == 0 {
        return Ok(SumOfSquares {
            tau,
            theta: Vec::new(),
            vectors: Vec::new(),
        });
    }
    // G^{1/2} and G^{-1/2} restricted to the retained eigendirections
    let u = DMatrix::from_fn(m, r, |i, c| eg.eigenvectors[(i, keep[c])]);
    let sqrt_l: Vec<f64> = keep.iter().map(|&k| eg.eigenvalues[k].sqrt()).collect();
    let half = DMatrix::from_fn(m, r, |i, c| u[(i, c)] * sqrt_l[c]);
    let inv_half = DMatrix::from_fn(m, r, |i, c| u[(i, c)] / sqrt_l[c]);
    let sym_c = (&tensor.coeffs + tensor.coeffs.transpose()) * 0.5;
    let cp = half.transpose() * sym_c * &half;
    let cp = (&cp + cp.transpose()) * 0.5;
    let ec = SymmetricEigen::new(cp);
    let vecs = &bmat * inv_half * &ec.eigenvectors;
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| ec.eigenvalues[b].total_cmp(&ec.eigenvalues[a]));
    Ok(SumOfSquares {
        tau,
        theta: order.iter().map(|&k| Complex64::new(ec.eigenvalues[k], 0.0)).collect(),
        vectors: order
            .iter()
            .map(|&k| vecs.column(k).iter().copied().collect())
            .collect(),
    })
}

/// Sum-of-squares form of `tensor` relative to `P_τ`. Fails when the Gram
/// matrix of the basis is numerically singular.
pub fn diagonalize(grid: &FieldGrid, tensor: &SymTensor, tau: f64) -> Result<SumOfSquares> {
    diagonalize_impl(grid, tensor, tau, true)
}

/// Like [`diagonalize`] but drops numerically null basis directions.
pub fn diagonalize_reduced(grid: &FieldGrid, tensor: &SymTensor, tau: f64) -> Result<SumOfSquares> {
    diagonalize_impl(grid, tensor, tau, false)
}

/// `Σ_k c_k f_k ⊗ f_k` with complex coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSum {
    pub coeffs: Vec<Complex64>,
    pub vectors: Vec<Vec<f64>>,
}

impl TensorSum {
    /// `⟨Y ⊗ Y, self⟩_{μ⊗μ} = Σ_k c_k ⟨Y, f_k⟩_μ²`.
    pub fn pair_outer(&self, grid: &FieldGrid, y: &[f64]) -> Complex64 {
        self.coeffs
            .iter()
            .zip(&self.vectors)
            .map(|(c, f)| {
                let s = grid.pair_mu(y, f);
                c * s * s
            })
            .sum()
    }

    pub fn dense(&self, n: usize) -> DMatrix<Complex64> {
        let mut d = DMatrix::zeros(n, n);
        for (c, f) in self.coeffs.iter().zip(&self.vectors) {
            for i in 0..n {
                for j in 0..n {
                    d[(i, j)] += c * f[i] * f[j];
                }
            }
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsiCoeffs {
    pub psi0: Complex64,
    pub psi1: TensorSum,
    /// Set when a real coefficient has `|2ϑ| ≥ 1`.
    pub warning: bool,
}

fn log_off_cut(d: Complex64, what: &str) -> Result<Complex64> {
    if d.im == 0.0 && d.re <= 0.0 {
        return Err(Error::BranchCut(format!(
            "{what} = {d} lies on the branch cut of the logarithm"
        )));
    }
    Ok(d.ln())
}

/// `ψ0 = -½ Σ log(1 - 2ϑ_k)` and
/// `ψ1 = Σ ϑ_k/(1 - 2ϑ_k) (e^{-τx} v_k) ⊗ (e^{-τy} v_k)`.
pub fn stein_psi(grid: &FieldGrid, sos: &SumOfSquares) -> Result<PsiCoeffs> {
    let tau = sos.tau;
    let decay: Vec<f64> = grid.atoms.iter().map(|&x| (-tau * x).exp()).collect();
    let mut psi0 = Complex64::new(0.0, 0.0);
    let mut coeffs = Vec::with_capacity(sos.theta.len());
    let mut vectors = Vec::with_capacity(sos.theta.len());
    let mut warning = false;
    for (t, v) in sos.theta.iter().zip(&sos.vectors) {
        let d = Complex64::new(1.0, 0.0) - 2.0 * t;
        psi0 -= 0.5 * log_off_cut(d, "1 - 2ϑ")?;
        if t.im == 0.0 && (2.0 * t.re).abs() >= 1.0 {
            warning = true;
        }
        coeffs.push(t / d);
        vectors.push(v.iter().zip(&decay).map(|(a, e)| a * e).collect());
    }
    Ok(PsiCoeffs {
        psi0,
        psi1: TensorSum { coeffs, vectors },
        warning,
    })
}

/// Rank-one transform of `z v ⊗ v`: `ψ0 = -½ log(1 - 4zφ0)` and
/// `ψ1 = z φ1 ⊗ φ1 / (1 - 4zφ0)` with `φ = φ(τ, v, 0)`.
pub fn stein_psi_rank1(grid: &FieldGrid, tau: f64, v: &[f64], z: Complex64) -> Result<PsiCoeffs> {
    let zero = vec![0.0; grid.len()];
    let c = phi(grid, tau, v, &zero)?;
    let d = Complex64::new(1.0, 0.0) - 4.0 * z * c.c0;
    let psi0 = -0.5 * log_off_cut(d, "1 - 4zφ0")?;
    let warning = z.im == 0.0 && (4.0 * z.re * c.c0).abs() >= 1.0;
    Ok(PsiCoeffs {
        psi0,
        psi1: TensorSum {
            coeffs: vec![z / d],
            vectors: vec![c.c1],
        },
        warning,
    })
}

/// `ψ(τ, z·w)` for a real symmetric tensor `w` and complex scale `z`.
pub fn psi(grid: &FieldGrid, tau: f64, tensor: &SymTensor, z: Complex64) -> Result<PsiCoeffs> {
    let sos = diagonalize(grid, tensor, tau)?.scaled(z);
    stein_psi(grid, &sos)
}

/// Which coefficient family a Riccati residual refers to.
#[derive(Debug, Clone, PartialEq)]
pub enum RiccatiArgs {
    Phi { u: Vec<f64>, v: Vec<f64> },
    BigPhi { u: Vec<f64>, v: Vec<f64> },
    Psi { tensor: SymTensor, z: Complex64 },
}

/// Finite-difference stencil used by [`riccati_residual`].
pub const RICCATI_STENCIL: f64 = 1e-4;

fn rel_diff(fd: &[f64], rhs: &[f64], scale: f64) -> f64 {
    let num = fd.iter().zip(rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let den = rhs.iter().map(|a| a.abs()).fold(scale, f64::max);
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Max-norm relative residual between a central difference of the
/// coefficients in `τ` and the analytic Riccati right-hand side.
pub fn riccati_residual(grid: &FieldGrid, tau: f64, args: &RiccatiArgs) -> Result<f64> {
    let h = RICCATI_STENCIL;
    if !(tau > 2.0 * h) {
        return Err(Error::invalid("tau", format!("τ = {tau} too small for stencil {h}")));
    }
    let nodes = [tau - 2.0 * h, tau - h, tau + h, tau + 2.0 * h];
    // fourth-order central difference
    let d5 = |f: [f64; 4]| (f[0] - 8.0 * f[1] + 8.0 * f[2] - f[3]) / (12.0 * h);
    let d5c = |f: [Complex64; 4]| (f[0] - 8.0 * f[1] + 8.0 * f[2] - f[3]) / (12.0 * h);
    match args {
        RiccatiArgs::Phi { u, v } | RiccatiArgs::BigPhi { u, v } => {
            let big = matches!(args, RiccatiArgs::BigPhi { .. });
            let eval = |t: f64| if big { Phi(grid, t, u, v) } else { phi(grid, t, u, v) };
            let mid = eval(tau)?;
            let st = [eval(nodes[0])?, eval(nodes[1])?, eval(nodes[2])?, eval(nodes[3])?];
            let mut rhs = riccati_rhs(grid, &mid);
            if big {
                // constant forcing -(u, v) on the linear parts
                for i in 0..grid.len() {
                    rhs.c1[i] -= u[i];
                    rhs.c2[i] -= v[i];
                }
            }
            let fd = |pick: fn(&AffineCoeffs) -> &Vec<f64>| -> Vec<f64> {
                (0..grid.len())
                    .map(|i| d5([pick(&st[0])[i], pick(&st[1])[i], pick(&st[2])[i], pick(&st[3])[i]]))
                    .collect()
            };
            let r0 = rel_diff(&[d5([st[0].c0, st[1].c0, st[2].c0, st[3].c0])], &[rhs.c0], 1e-300);
            let scale1 = mid.c1.iter().chain(&mid.c2).map(|a| a.abs()).fold(1e-300, f64::max);
            let r1 = rel_diff(&fd(|c| &c.c1), &rhs.c1, scale1);
            let r2 = rel_diff(&fd(|c| &c.c2), &rhs.c2, scale1);
            Ok(r0.max(r1).max(r2))
        }
        RiccatiArgs::Psi { tensor, z } => {
            let n = grid.len();
            let mid = psi(grid, tau, tensor, *z)?;
            let st = [
                psi(grid, nodes[0], tensor, *z)?,
                psi(grid, nodes[1], tensor, *z)?,
                psi(grid, nodes[2], tensor, *z)?,
                psi(grid, nodes[3], tensor, *z)?,
            ];
            let dense: Vec<_> = st.iter().map(|c| c.psi1.dense(n)).collect();
            let d_mid = mid.psi1.dense(n);
            let w = &grid.mu_weights;
            // F0 = ΣΣ ψ1 w w, F1 = -(x+y)ψ1 + 2 g⊗g with g = Σ_j ψ1(·, x_j) w_j
            let g: Vec<Complex64> = (0..n).map(|i| (0..n).map(|j| d_mid[(i, j)] * w[j]).sum()).collect();
            let f0: Complex64 = (0..n).map(|i| g[i] * w[i]).sum();
            let fd0 = d5c([st[0].psi0, st[1].psi0, st[2].psi0, st[3].psi0]);
            let r0 = (fd0 - f0).norm() / f0.norm().max(1e-300);
            let mut num: f64 = 0.0;
            let mut den: f64 = 1e-300;
            for i in 0..n {
                for j in 0..n {
                    let rhs = -(grid.atoms[i] + grid.atoms[j]) * d_mid[(i, j)] + 2.0 * g[i] * g[j];
                    let fd = d5c([dense[0][(i, j)], dense[1][(i, j)], dense[2][(i, j)], dense[3][(i, j)]]);
                    num = num.max((fd - rhs).norm());
                    den = den.max(rhs.norm()).max(d_mid[(i, j)].norm());
                }
            }
            let r1 = if num == 0.0 { 0.0 } else { num / den };
            Ok(if f0.norm() == 0.0 && fd0.norm() == 0.0 {
                r1
            } else {
                r0.max(r1)
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn atom() -> FieldGrid {
        FieldGrid::from_atoms(vec![1.0], true).unwrap()
    }

    #[test]
    fn phi_at_zero_is_identity() {
        let g = atom();
        let c = phi(&g, 0.0, &[0.3], &[0.7]).unwrap();
        assert_eq!(c.c0, 0.0);
        assert_eq!(c.c1, vec![0.3]);
        assert_eq!(c.c2, vec![0.7]);
    }

    #[test]
    fn phi_single_atom_values() {
        let g = atom();
        let c = phi(&g, 1.0, &[1.0], &[0.0]).unwrap();
        assert_relative_eq!(c.c0, (1.0 - (-2f64).exp()) / 4.0, max_relative = 1e-14);
        let g2 = FieldGrid::from_atoms(vec![2.0], true).unwrap();
        let c = phi(&g2, 1.0, &[0.0], &[1.0]).unwrap();
        assert_relative_eq!(c.c2[0], (-2f64).exp(), max_relative = 1e-14);
    }

    #[test]
    fn big_phi_single_atom_values() {
        let g = atom();
        let c = Phi(&g, 0.0, &[1.0], &[1.0]).unwrap();
        assert_eq!((c.c0, c.c1[0], c.c2[0]), (0.0, 0.0, 0.0));
        let c = Phi(&g, 1.0, &[1.0], &[1.0]).unwrap();
        assert_relative_eq!(c.c2[0], (-1f64).exp() - 1.0, max_relative = 1e-14);
        let c = Phi(&g, 1.0, &[1.0], &[0.0]).unwrap();
        let e1 = (-1f64).exp();
        let exact = 0.5 * (1.0 - 2.0 * (1.0 - e1) + (1.0 - e1 * e1) / 2.0);
        assert_relative_eq!(c.c0, exact, max_relative = 1e-10);
    }

    #[test]
    fn mgf_single_atom() {
        let g = atom();
        let s = OUState::zero(&g);
        assert_eq!(mgf(&g, &s, 1.0, &[0.0], &[0.0]).unwrap(), 1.0);
        let m = mgf(&g, &s, 1.0, &[1.0], &[0.0]).unwrap();
        assert_relative_eq!(m, ((1.0 - (-2f64).exp()) / 4.0).exp(), max_relative = 1e-14);
    }

    #[test]
    fn mgf_overflow_is_reported() {
        let g = atom();
        let s = OUState::explicit(&g, vec![1e4], vec![0.0]).unwrap();
        assert!(matches!(mgf(&g, &s, 0.1, &[1.0], &[0.0]), Err(Error::Overflow { .. })));
    }

    #[test]
    fn diagonalize_rank_one() {
        let g = atom();
        let tau = 0.7;
        let c = p_inner(&g, tau, &[1.0], &[1.0]);
        let sos = diagonalize(&g, &SymTensor::from_rank_one(vec![(1.0, vec![1.0])]), tau).unwrap();
        assert_relative_eq!(sos.theta[0].re, c, max_relative = 1e-12);
        assert_relative_eq!(sos.vectors[0][0].abs(), 1.0 / c.sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn diagonalize_rejects_dependent_basis() {
        let g = FieldGrid::from_atoms(vec![1.0, 2.0], false).unwrap();
        let t = SymTensor::from_rank_one(vec![(1.0, vec![1.0, 2.0]), (1.0, vec![2.0, 4.0])]);
        assert!(matches!(diagonalize(&g, &t, 1.0), Err(Error::RankDeficient { .. })));
        let sos = diagonalize_reduced(&g, &t, 1.0).unwrap();
        assert_eq!(sos.theta.len(), 1);
    }

    #[test]
    fn psi_real_unit_transform_single_atom() {
        let g = atom();
        let z = Complex64::new(1.0, 0.0);
        for &tau in &[0.1, 1.0, 3.0] {
            let p = stein_psi_rank1(&g, tau, &[1.0], z).unwrap();
            assert!((p.psi0.re - tau).abs() < 1e-10);
            assert_eq!(p.psi0.im, 0.0);
        }
    }

    #[test]
    fn psi_zero_theta() {
        let g = atom();
        let sos = SumOfSquares {
            tau: 1.0,
            theta: vec![Complex64::new(0.0, 0.0)],
            vectors: vec![vec![1.0]],
        };
        let p = stein_psi(&g, &sos).unwrap();
        assert_eq!(p.psi0, Complex64::new(0.0, 0.0));
        assert_eq!(p.psi1.coeffs[0], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn branch_cut_is_an_error() {
        let g = atom();
        let sos = SumOfSquares {
            tau: 1.0,
            theta: vec![Complex64::new(0.75, 0.0)],
            vectors: vec![vec![1.0]],
        };
        assert!(matches!(stein_psi(&g, &sos), Err(Error::BranchCut(_))));
    }

    #[test]
    fn missing_density_ratio_is_rejected() {
        let mu = crate::measure::GridMeasure::new(vec![1.0], vec![1.0]).unwrap();
        let nu = crate::measure::GridMeasure::new(vec![2.0], vec![1.0]).unwrap();
        let g = FieldGrid::new(&mu, Some(&nu));
        let r = phi(&g, 1.0, &[0.0, 0.0], &[0.0, 1.0]);
        assert!(matches!(r, Err(Error::InvalidInput { field: "p", .. })));
    }

    #[test]
    fn riccati_small_tau_rejected() {
        let g = atom();
        let a = RiccatiArgs::Phi {
            u: vec![1.0],
            v: vec![0.0],
        };
        assert!(riccati_residual(&g, 1e-5, &a).is_err());
        assert!(riccati_residual(&g, 1.0, &a).unwrap() < 1e-6);
    }
}
