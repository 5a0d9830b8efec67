//! Small numerical kernels shared across the crate: stable exponential
//! moments, Gauss–Legendre rules, adaptive Gauss–Kronrod quadrature and a
//! Jacobi-preconditioned low-rank Gaussian sampling factor.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub use statrs::function::gamma::gamma;

/// Standard normal cumulative distribution function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `∫_0^1 s^k e^{-y s} ds` for `k ∈ {0, 1, 2}` and `y ≥ 0`.
///
/// Every covariance and affine coefficient of the OU field reduces to these
/// three moments, e.g. `∫_0^Δ r e^{-a r} dr = Δ² exp_moment(1, aΔ)`. The
/// closed forms cancel catastrophically for small `y`, so a Taylor series is
/// used below `y = 1`.
pub fn exp_moment(k: u32, y: f64) -> f64 {
    debug_assert!(k <= 2);
    if y < 1.0 {
        // Σ_n (-y)^n / (n! (n + k + 1))
        let mut term = 1.0;
        let mut sum = 1.0 / (k as f64 + 1.0);
        for n in 1..40 {
            term *= -y / n as f64;
            let add = term / (n as f64 + k as f64 + 1.0);
            sum += add;
            if add.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        return sum;
    }
    let e = (-y).exp();
    match k {
        0 => -(-y).exp_m1() / y,
        1 => (1.0 - e * (1.0 + y)) / (y * y),
        _ => (2.0 - e * (2.0 + y * (2.0 + y))) / (y * y * y),
    }
}

/// `∫_0^τ s^k e^{-a s} ds`.
pub fn exp_integral(k: u32, a: f64, tau: f64) -> f64 {
    tau.powi(k as i32 + 1) * exp_moment(k, a * tau)
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d.is_finite() {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule with `panels` equal panels.
    pub fn composite<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, panels: usize, mut f: F) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|k| {
                let lo = a + k as f64 * h;
                let hi = if k + 1 == panels { b } else { lo + h };
                self.integrate(lo, hi, &mut f)
            })
            .sum()
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre with panel doubling until the relative change
/// drops below `rel_tol`.
pub fn integrate_doubling<F: FnMut(f64) -> f64>(a: f64, b: f64, rel_tol: f64, mut f: F) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let rule = GaussLegendre::new(10);
    let mut panels = 1;
    let mut prev = rule.composite(a, b, panels, &mut f);
    for _ in 0..14 {
        panels *= 2;
        let next = rule.composite(a, b, panels, &mut f);
        let change = (next - prev).abs();
        if change <= rel_tol * next.abs() || change < 1e-300 {
            return Ok(next);
        }
        prev = next;
    }
    let cur = rule.composite(a, b, panels * 2, &mut f);
    let achieved = (cur - prev).abs() / cur.abs().max(1e-300);
    if achieved <= rel_tol {
        Ok(cur)
    } else {
        Err(Error::Quadrature {
            achieved,
            requested: rel_tol,
        })
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod15<F: FnMut(f64) -> f64>(a: f64, b: f64, f: &mut F) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(mid - dx) + f(mid + dx);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * half, ((kron - gauss) * half).abs())
}

/// Adaptive Gauss–Kronrod (7/15) quadrature on a finite interval.
pub fn integrate_adaptive<F: FnMut(f64) -> f64>(a: f64, b: f64, abs_tol: f64, rel_tol: f64, mut f: F) -> Result<f64> {
    let (v, e) = kronrod15(a, b, &mut f);
    let mut segments = vec![(a, b, v, e)];
    for _ in 0..4000 {
        let total: f64 = segments.iter().map(|s| s.2).sum();
        let err: f64 = segments.iter().map(|s| s.3).sum();
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok(total);
        }
        let (idx, _) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = segments.swap_remove(idx);
        let m = 0.5 * (lo + hi);
        let (v1, e1) = kronrod15(lo, m, &mut f);
        let (v2, e2) = kronrod15(m, hi, &mut f);
        segments.push((lo, m, v1, e1));
        segments.push((m, hi, v2, e2));
    }
    let total: f64 = segments.iter().map(|s| s.2).sum();
    let err: f64 = segments.iter().map(|s| s.3).sum();
    Err(Error::Quadrature {
        achieved: err / total.abs().max(1e-300),
        requested: rel_tol,
    })
}

/// Eigenvalue clipping threshold relative to the largest eigenvalue.
pub const EIGEN_CLIP: f64 = 1e-12;

/// Low-rank sampling factor `L` with `L Lᵀ ≈ C` for a covariance matrix `C`.
///
/// The matrix is first scaled to unit diagonal, decomposed, clipped at
/// [`EIGEN_CLIP`] × the largest eigenvalue and only the retained directions
/// are kept, so a draw needs `rank()` standard normals.
#[derive(Debug, Clone)]
pub struct GaussianFactor {
    dim: usize,
    rank: usize,
    // dim x rank, row-major, already rescaled by the standard deviations
    factor: Vec<f64>,
}

impl GaussianFactor {
    pub fn from_covariance(cov: &DMatrix<f64>) -> Result<Self> {
        let dim = cov.nrows();
        if dim == 0 || cov.ncols() != dim {
            return Err(Error::invalid("covariance", "must be a non-empty square matrix"));
        }
        let sd: Vec<f64> = (0..dim).map(|i| cov[(i, i)].max(0.0).sqrt()).collect();
        let mut corr = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                let s = sd[i] * sd[j];
                corr[(i, j)] = if s > 0.0 {
                    0.5 * (cov[(i, j)] + cov[(j, i)]) / s
                } else {
                    0.0
                };
            }
        }
        let eig = SymmetricEigen::new(corr);
        let max_ev = eig.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min_ev = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if !max_ev.is_finite() || !min_ev.is_finite() || max_ev < 0.0 {
            return Err(Error::Factorization {
                min_eigenvalue: min_ev,
                max_eigenvalue: max_ev,
            });
        }
        if max_ev == 0.0 {
            return Ok(GaussianFactor {
                dim,
                rank: 0,
                factor: Vec::new(),
            });
        }
        // Negative eigenvalues beyond round-off mean the input is not a covariance.
        if min_ev < -1e-8 * max_ev {
            return Err(Error::Factorization {
                min_eigenvalue: min_ev,
                max_eigenvalue: max_ev,
            });
        }
        let threshold = EIGEN_CLIP * max_ev;
        let mut keep: Vec<usize> = (0..dim).filter(|&k| eig.eigenvalues[k] > threshold).collect();
        keep.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let rank = keep.len();
        let mut factor = vec![0.0; dim * rank];
        for (c, &k) in keep.iter().enumerate() {
            let root = eig.eigenvalues[k].sqrt();
            for i in 0..dim {
                factor[i * rank + c] = sd[i] * eig.eigenvectors[(i, k)] * root;
            }
        }
        Ok(GaussianFactor { dim, rank, factor })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of standard normals consumed per draw.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Writes `L z` into `out`.
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        debug_assert_eq!(z.len(), self.rank);
        debug_assert_eq!(out.len(), self.dim);
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.factor[i * self.rank..(i + 1) * self.rank];
            *o = row.iter().zip(z).map(|(a, b)| a * b).sum();
        }
    }

    /// `L Lᵀ`, the covariance actually sampled.
    pub fn covariance(&self) -> DMatrix<f64> {
        let mut c = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for j in 0..self.dim {
                let ri = &self.factor[i * self.rank..(i + 1) * self.rank];
                let rj = &self.factor[j * self.rank..(j + 1) * self.rank];
                c[(i, j)] = ri.iter().zip(rj).map(|(a, b)| a * b).sum();
            }
        }
        c
    }
}
