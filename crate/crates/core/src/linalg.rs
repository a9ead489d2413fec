//! Dense symmetric linear algebra at desk scale.
//!
//! Eigendecompositions are computed by cyclic Jacobi rotations, which are
//! simple, orthogonal by construction and accurate to near machine precision
//! for the n ≤ a few hundred matrices this crate works with. Everything else
//! (the `⪯` order, the half-Gram factorization `C = ½AᵀA`, operator norms,
//! row-space projections) is built on top of that one solver.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance for this module: double precision with headroom for
/// the exp/log work downstream.
pub const DEFAULT_TOL: f64 = 1e-10;

const JACOBI_MAX_SWEEPS: usize = 64;

/// Dense symmetric n×n matrix, row-major. Symmetry is exact as stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SymMatrixWire", into = "SymMatrixWire")]
pub struct SymMatrix {
    n: usize,
    entries: Vec<f64>,
}

#[derive(Serialize, Deserialize, Clone)]
struct SymMatrixWire {
    n: usize,
    entries: Vec<f64>,
}

impl TryFrom<SymMatrixWire> for SymMatrix {
    type Error = Error;
    fn try_from(w: SymMatrixWire) -> Result<Self> {
        SymMatrix::new(w.n, w.entries)
    }
}

impl From<SymMatrix> for SymMatrixWire {
    fn from(m: SymMatrix) -> Self {
        SymMatrixWire { n: m.n, entries: m.entries }
    }
}

impl SymMatrix {
    /// Validates dimensions, finiteness and exact symmetry. Asymmetric input
    /// is rejected, not silently symmetrized.
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("matrix dimension must be >= 1".into()));
        }
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {n}x{n} matrix, got {}",
                n * n,
                entries.len()
            )));
        }
        if let Some(v) = entries.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite matrix entry {v}")));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let a = entries[i * n + j];
                let b = entries[j * n + i];
                if a != b {
                    return Err(Error::NotSymmetric { i, j, a, b });
                }
            }
        }
        Ok(SymMatrix { n, entries })
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix { n, entries: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, c: f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.entries[i * n + i] = c;
        }
        m
    }

    pub fn from_diag(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.entries[i * n + i] = diag[i];
        }
        m
    }

    /// Builds `(M + Mᵀ)/2` from an arbitrary square array, making symmetry
    /// exact. Entry (i,j) and (j,i) are set to the same value.
    pub fn symmetrized(n: usize, raw: &[f64]) -> Result<Self> {
        if raw.len() != n * n {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries, got {}",
                n * n,
                raw.len()
            )));
        }
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                let v = 0.5 * (raw[i * n + j] + raw[j * n + i]);
                m.entries[i * n + j] = v;
                m.entries[j * n + i] = v;
            }
        }
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// Sets entry (i,j) and its mirror (j,i).
    pub fn set_sym(&mut self, i: usize, j: usize, v: f64) {
        self.entries[i * self.n + j] = v;
        self.entries[j * self.n + i] = v;
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &SymMatrix, f: impl Fn(f64, f64) -> f64) -> Result<SymMatrix> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch(format!(
                "matrix dimensions {} and {} differ",
                self.n, other.n
            )));
        }
        let entries = self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(SymMatrix { n: self.n, entries })
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        SymMatrix { n: self.n, entries: self.entries.iter().map(|&v| c * v).collect() }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            let row = &self.entries[i * self.n..(i + 1) * self.n];
            y[i] = row.iter().zip(x).map(|(&a, &b)| a * b).sum();
        }
        y
    }

    /// ⟨Bx, x⟩.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let bx = self.mul_vec(x);
        dot(&bx, x)
    }

    /// ⟨Bx, x⟩ for a sparse x given as (index, value) pairs.
    pub fn quad_form_sparse(&self, support: &[(usize, f64)]) -> f64 {
        let mut acc = 0.0;
        for &(i, vi) in support {
            acc += self.get(i, i) * vi * vi;
            for &(j, vj) in support {
                if j > i {
                    acc += 2.0 * self.get(i, j) * vi * vj;
                }
            }
        }
        acc
    }

    /// True iff every off-diagonal entry is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j && self.entries[i * self.n + j] != 0.0 {
                    return false;
                }
            }
        }
        true
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Leading d×d principal block.
    pub fn leading_block(&self, d: usize) -> SymMatrix {
        assert!(d >= 1 && d <= self.n);
        let mut m = SymMatrix::zeros(d);
        for i in 0..d {
            for j in 0..d {
                m.entries[i * d + j] = self.get(i, j);
            }
        }
        m
    }
}

/// Rectangular m×n matrix, row-major. m = 0 encodes the zero form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RectMatrixWire", into = "RectMatrixWire")]
pub struct RectMatrix {
    m: usize,
    n: usize,
    entries: Vec<f64>,
}

#[derive(Serialize, Deserialize, Clone)]
struct RectMatrixWire {
    m: usize,
    n: usize,
    entries: Vec<f64>,
}

impl TryFrom<RectMatrixWire> for RectMatrix {
    type Error = Error;
    fn try_from(w: RectMatrixWire) -> Result<Self> {
        RectMatrix::new(w.m, w.n, w.entries)
    }
}

impl From<RectMatrix> for RectMatrixWire {
    fn from(m: RectMatrix) -> Self {
        RectMatrixWire { m: m.m, n: m.n, entries: m.entries }
    }
}

impl RectMatrix {
    pub fn new(m: usize, n: usize, entries: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("column count must be >= 1".into()));
        }
        if entries.len() != m * n {
            return Err(Error::DimensionMismatch(format!(
                "expected {} entries for a {m}x{n} matrix, got {}",
                m * n,
                entries.len()
            )));
        }
        if let Some(v) = entries.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite matrix entry {v}")));
        }
        Ok(RectMatrix { m, n, entries })
    }

    pub fn empty(n: usize) -> Self {
        RectMatrix { m: 0, n, entries: Vec::new() }
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    /// AᵀA (n×n), exactly symmetric.
    pub fn gram_cols(&self) -> SymMatrix {
        let n = self.n;
        let mut g = SymMatrix::zeros(n);
        for j in 0..n {
            for k in j..n {
                let mut acc = 0.0;
                for i in 0..self.m {
                    acc += self.get(i, j) * self.get(i, k);
                }
                g.set_sym(j, k, acc);
            }
        }
        g
    }

    /// AAᵀ (m×m), exactly symmetric.
    pub fn gram_rows(&self) -> SymMatrix {
        let m = self.m;
        let mut g = SymMatrix::zeros(m.max(1));
        if m == 0 {
            return SymMatrix::zeros(1);
        }
        for i in 0..m {
            for k in i..m {
                let mut acc = 0.0;
                for j in 0..self.n {
                    acc += self.get(i, j) * self.get(k, j);
                }
                g.set_sym(i, k, acc);
            }
        }
        g
    }

    /// A x for x of length n.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        (0..self.m)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * x[j]).sum())
            .collect()
    }

    /// Aᵀ t for t of length m.
    pub fn t_mul_vec(&self, t: &[f64]) -> Vec<f64> {
        assert_eq!(t.len(), self.m);
        let mut y = vec![0.0; self.n];
        for i in 0..self.m {
            let ti = t[i];
            for j in 0..self.n {
                y[j] += self.get(i, j) * ti;
            }
        }
        y
    }
}

/// Certified enclosure of the extreme eigenvalues of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralBounds {
    pub lambda_min: f64,
    pub lambda_max: f64,
}

/// Full symmetric eigendecomposition, eigenvalues ascending.
/// `vectors[r]` is the unit eigenvector for `values[r]`.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Cyclic Jacobi eigensolver. Converges when the off-diagonal Frobenius mass
/// drops below `tol` relative to the matrix scale, at which point every
/// diagonal entry is within `tol`-scale of a true eigenvalue.
pub fn sym_eigen(mat: &SymMatrix, tol: f64) -> Result<SymEigen> {
    if tol <= 0.0 {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let n = mat.n;
    let mut a = mat.entries.clone();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }

    let scale = 1.0 + a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = 0.25 * tol * scale;

    let off = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                s += 2.0 * a[p * n + q] * a[p * n + q];
            }
        }
        s.sqrt()
    };

    let mut converged = false;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        if off(&a) <= target {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                // Rotation angle that annihilates a[p][q].
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    1.0 / (2.0 * theta)
                } else {
                    let sign = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sign / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;

                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let vkp = v[k * n + p];
                    let vkq = v[k * n + q];
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged && off(&a) > target {
        return Err(Error::NonConvergence { what: "Jacobi eigensolver", cap: JACOBI_MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[i * n + i].partial_cmp(&a[j * n + j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&col| (0..n).map(|row| v[row * n + col]).collect())
        .collect();
    Ok(SymEigen { values, vectors })
}

/// Certified enclosures of the extreme eigenvalues of `b`.
pub fn spectral_bounds(b: &SymMatrix, tol: f64) -> Result<SpectralBounds> {
    let eig = sym_eigen(b, tol)?;
    Ok(SpectralBounds {
        lambda_min: eig.values[0],
        lambda_max: eig.values[eig.values.len() - 1],
    })
}

/// The Loewner order: true iff `b - a` is positive semidefinite up to `tol`,
/// i.e. λ_min(b − a) ≥ −tol.
pub fn psd_order_leq(a: &SymMatrix, b: &SymMatrix, tol: f64) -> Result<bool> {
    let diff = b.sub(a)?;
    let bounds = spectral_bounds(&diff, tol.min(DEFAULT_TOL))?;
    Ok(bounds.lambda_min >= -tol)
}

/// Factors a positive semidefinite `c` as `c = ½AᵀA` with `A` of m = rank(c)
/// rows. Eigenvalues below `tol·(1+λ_max)` are clamped to zero before
/// factoring; an eigenvalue below `-tol·(1+λ_max)` is a not-PSD error.
pub fn factor_half_gram(c: &SymMatrix, tol: f64) -> Result<RectMatrix> {
    let n = c.n;
    let eig = sym_eigen(c, tol.min(DEFAULT_TOL))?;
    let lambda_max = eig.values[n - 1].max(0.0);
    let cut = tol * (1.0 + lambda_max);
    if eig.values[0] < -cut {
        return Err(Error::NotPositiveSemidefinite { eigenvalue: eig.values[0], tol: cut });
    }
    let kept: Vec<usize> = (0..n).filter(|&r| eig.values[r] >= cut).collect();
    let m = kept.len();
    let mut entries = Vec::with_capacity(m * n);
    for &r in &kept {
        let w = (2.0 * eig.values[r]).sqrt();
        entries.extend(eig.vectors[r].iter().map(|&v| w * v));
    }
    RectMatrix::new(m, n, entries)
}

/// Largest singular value of `a`; 0 for an empty matrix.
pub fn operator_norm(a: &RectMatrix, tol: f64) -> Result<f64> {
    if a.m == 0 {
        return Ok(0.0);
    }
    // Work with the smaller Gram matrix.
    let gram = if a.m <= a.n { a.gram_rows() } else { a.gram_cols() };
    let bounds = spectral_bounds(&gram, tol)?;
    Ok(bounds.lambda_max.max(0.0).sqrt())
}

/// Orthogonal projection onto the row space of `a`: P = Aᵀ(AAᵀ)⁻¹A.
/// Requires full row rank.
pub fn row_space_projection(a: &RectMatrix) -> Result<SymMatrix> {
    if a.m == 0 {
        return Err(Error::RankDeficient("projection of an empty row space".into()));
    }
    let g = a.gram_rows();
    let eig = sym_eigen(&g, DEFAULT_TOL)?;
    let lambda_max = eig.values[a.m - 1];
    if eig.values[0] <= DEFAULT_TOL * (1.0 + lambda_max.max(0.0)) {
        return Err(Error::RankDeficient(format!(
            "AAᵀ is numerically singular (eigenvalues spread [{:.3e}, {:.3e}])",
            eig.values[0], lambda_max
        )));
    }
    // P = Aᵀ (Σ_r v_r v_rᵀ / λ_r) A, assembled row by row.
    let n = a.n;
    let mut p = vec![0.0; n * n];
    for r in 0..a.m {
        // u_r = Aᵀ v_r / sqrt(λ_r) are orthonormal spanning the row space.
        let u = a.t_mul_vec(&eig.vectors[r]);
        let inv_l = 1.0 / eig.values[r];
        for i in 0..n {
            for j in 0..n {
                p[i * n + j] += inv_l * u[i] * u[j];
            }
        }
    }
    SymMatrix::symmetrized(n, &p)
}

/// Solves `G x = rhs` for symmetric positive definite `G` through its
/// eigendecomposition. Errors when `G` is numerically singular.
pub fn solve_spd(g: &SymMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != g.n {
        return Err(Error::DimensionMismatch("solve_spd rhs length".into()));
    }
    let eig = sym_eigen(g, DEFAULT_TOL)?;
    let lambda_max = eig.values[g.n - 1];
    if eig.values[0] <= DEFAULT_TOL * (1.0 + lambda_max.max(0.0)) {
        return Err(Error::RankDeficient(format!(
            "matrix numerically singular (λ_min = {:.3e})",
            eig.values[0]
        )));
    }
    let mut x = vec![0.0; g.n];
    for r in 0..g.n {
        let coef = dot(&eig.vectors[r], rhs) / eig.values[r];
        for i in 0..g.n {
            x[i] += coef * eig.vectors[r][i];
        }
    }
    Ok(x)
}

/// Cholesky factor L (lower triangular, row-major) with G = LLᵀ.
pub fn cholesky(g: &SymMatrix) -> Result<Vec<f64>> {
    let n = g.n;
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = g.get(i, j);
            for k in 0..j {
                sum -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::NotPositiveDefinite { eigenvalue: sum });
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Ok(l)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}
