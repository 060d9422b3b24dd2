//! Dense complex matrices, a cyclic Jacobi eigensolver for Hermitian
//! operators, and the partial trace over spin-1/2 sites.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Hermiticity tolerance, relative to `max(1, ‖A‖_max)`.
pub const HERMITIAN_TOL: f64 = 1e-12;

const MAX_SWEEPS: usize = 64;

/// Square, row-major complex matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        CMatrix {
            dim,
            data: vec![ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = ONE;
        }
        m
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = Complex64::new(d, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries. Panics if `data.len()` is not
    /// a perfect square.
    pub fn from_rows(data: Vec<Complex64>) -> Self {
        let dim = (data.len() as f64).sqrt().round() as usize;
        assert_eq!(dim * dim, data.len(), "matrix data is not square");
        CMatrix { dim, data }
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim, "matrix rows must be square");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = Complex64::new(v, 0.0);
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out[(j, i)] = self[(i, j)].conj();
            }
        }
        out
    }

    pub fn conj(&self) -> Self {
        CMatrix {
            dim: self.dim,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        CMatrix {
            dim: self.dim,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `‖A − A†‖_max`.
    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.dim;
        let mut dev = 0.0f64;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        dev
    }

    pub fn checked_mul(&self, other: &CMatrix) -> Result<CMatrix> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        Ok(self.mul_unchecked(other))
    }

    fn mul_unchecked(&self, other: &CMatrix) -> CMatrix {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            let row = &self.data[i * n..(i + 1) * n];
            let out_row = &mut out.data[i * n..(i + 1) * n];
            for (k, &a) in row.iter().enumerate() {
                if a == ZERO {
                    continue;
                }
                let other_row = &other.data[k * n..(k + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(other_row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `tr(self · other)` without forming the product.
    pub fn trace_product(&self, other: &CMatrix) -> Result<Complex64> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                left: self.dim,
                right: other.dim,
            });
        }
        let n = self.dim;
        let mut acc = ZERO;
        for i in 0..n {
            for k in 0..n {
                acc += self[(i, k)] * other[(k, i)];
            }
        }
        Ok(acc)
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &CMatrix) -> CMatrix {
        let (n, m) = (self.dim, other.dim);
        let mut out = Self::zeros(n * m);
        for i in 0..n {
            for j in 0..n {
                let a = self[(i, j)];
                if a == ZERO {
                    continue;
                }
                for k in 0..m {
                    for l in 0..m {
                        out[(i * m + k, j * m + l)] = a * other[(k, l)];
                    }
                }
            }
        }
        out
    }

    fn column(&self, j: usize) -> impl Iterator<Item = Complex64> + '_ {
        (0..self.dim).map(move |i| self[(i, j)])
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in matrix product");
        self.mul_unchecked(rhs)
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in matrix sum");
        CMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in matrix difference");
        CMatrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// A complex matrix checked to be Hermitian on construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CMatrix", into = "CMatrix")]
pub struct DenseHermitian(CMatrix);

impl DenseHermitian {
    pub fn new(m: CMatrix) -> Result<Self> {
        let deviation = m.hermiticity_deviation();
        if deviation > HERMITIAN_TOL * m.max_abs().max(1.0) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(DenseHermitian(m))
    }

    /// Wraps `m` after symmetrising away rounding-level asymmetry. Only for
    /// matrices that are Hermitian by construction.
    pub(crate) fn symmetrized(m: CMatrix) -> Self {
        let n = m.dim();
        let mut out = m;
        for i in 0..n {
            out[(i, i)] = Complex64::new(out[(i, i)].re, 0.0);
            for j in i + 1..n {
                let avg = (out[(i, j)] + out[(j, i)].conj()) * 0.5;
                out[(i, j)] = avg;
                out[(j, i)] = avg.conj();
            }
        }
        DenseHermitian(out)
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }
}

impl TryFrom<CMatrix> for DenseHermitian {
    type Error = Error;
    fn try_from(m: CMatrix) -> Result<Self> {
        DenseHermitian::new(m)
    }
}

impl From<DenseHermitian> for CMatrix {
    fn from(h: DenseHermitian) -> CMatrix {
        h.0
    }
}

impl std::ops::Deref for DenseHermitian {
    type Target = CMatrix;
    fn deref(&self) -> &CMatrix {
        &self.0
    }
}

/// Eigenvalues in ascending order with orthonormal eigenvectors stored as the
/// columns of `vectors`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
    pub source_dim: usize,
}

impl EigenSystem {
    pub fn vector(&self, k: usize) -> Vec<Complex64> {
        self.vectors.column(k).collect()
    }

    /// `V Λ V†`.
    pub fn reconstruct(&self) -> CMatrix {
        self.spectral_sum(&self.values)
    }

    /// `Σ_k w_k |v_k⟩⟨v_k|` for arbitrary real weights.
    pub fn spectral_sum(&self, weights: &[f64]) -> CMatrix {
        let n = self.source_dim;
        assert_eq!(weights.len(), n);
        let v = &self.vectors;
        let mut out = CMatrix::zeros(n);
        for (k, &w) in weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for i in 0..n {
                let vik = v[(i, k)] * w;
                if vik == ZERO {
                    continue;
                }
                for j in 0..n {
                    out[(i, j)] += vik * v[(j, k)].conj();
                }
            }
        }
        out
    }

    /// `‖V†V − I‖_max`.
    pub fn orthonormality_residual(&self) -> f64 {
        let vtv = &self.vectors.adjoint() * &self.vectors;
        (&vtv - &CMatrix::identity(self.source_dim)).max_abs()
    }

    /// Number of eigenvalues within `tol` of the lowest.
    pub fn ground_multiplicity(&self, tol: f64) -> usize {
        match self.values.first() {
            Some(&e0) => self.values.iter().take_while(|&&e| e - e0 <= tol).count(),
            None => 0,
        }
    }
}

/// Eigendecomposition of a Hermitian operator by cyclic complex Jacobi
/// rotations.
pub fn eigendecompose(op: &DenseHermitian) -> Result<EigenSystem> {
    let deviation = op.hermiticity_deviation();
    if deviation > HERMITIAN_TOL * op.max_abs().max(1.0) {
        return Err(Error::NotHermitian { deviation });
    }
    let n = op.dim();
    let mut a = op.matrix().clone();
    let mut v = CMatrix::identity(n);

    let total_norm = a.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let target = f64::EPSILON * 0.25 * total_norm;
    let off_norm = |a: &CMatrix| {
        let mut s = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                s += a[(p, q)].norm_sqr();
            }
        }
        (2.0 * s).sqrt()
    };

    let mut converged = off_norm(&a) <= target;
    let mut sweeps = 0;
    while !converged && sweeps < MAX_SWEEPS {
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
        converged = off_norm(&a) <= target;
    }
    if !converged {
        return Err(Error::NoConvergence {
            sweeps,
            off_norm: off_norm(&a),
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let mut vectors = CMatrix::zeros(n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for i in 0..n {
            vectors[(i, new_col)] = v[(i, old_col)];
        }
    }
    Ok(EigenSystem {
        values,
        vectors,
        source_dim: n,
    })
}

/// Annihilates `a[p][q]` with a unitary `G = diag(1, e^{-iφ}) · R(θ)` acting
/// on the (p, q) plane: `A ← G†AG`, `V ← VG`.
fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    // Skip entries that are already negligible next to both diagonals.
    if mag < f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        a[(p, q)] = ZERO;
        a[(q, p)] = ZERO;
        return;
    }
    let phase = apq / mag;
    let theta = (aqq - app) / (2.0 * mag);
    let t = if theta.is_finite() && theta.abs() < 1e150 {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    } else {
        0.5 / theta
    };
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let ph_conj = phase.conj();
    let n = a.dim();

    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * c - akq * ph_conj * s;
        a[(k, q)] = akp * s + akq * ph_conj * c;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * c - aqk * phase * s;
        a[(q, k)] = apk * s + aqk * phase * c;
    }
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - vkq * ph_conj * s;
        v[(k, q)] = vkp * s + vkq * ph_conj * c;
    }
    a[(p, q)] = ZERO;
    a[(q, p)] = ZERO;
    a[(p, p)] = Complex64::new(a[(p, p)].re, 0.0);
    a[(q, q)] = Complex64::new(a[(q, q)].re, 0.0);
}

/// `‖ab − ba‖_max`.
pub fn commutator_norm(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    let ab = a.checked_mul(b)?;
    let ba = b.checked_mul(a)?;
    Ok((&ab - &ba).max_abs())
}

/// Bit position of `site` in a basis index of an `n_sites` register
/// (site 0 is the most significant bit).
#[inline]
pub(crate) fn site_bit(site: usize, n_sites: usize) -> usize {
    1 << (n_sites - 1 - site)
}

/// Reduces `state` (an operator on `n_sites` spins-1/2) to the sites in
/// `keep`. The kept sites appear in the order given, the first being the
/// most significant bit of the reduced register.
pub fn partial_trace(state: &CMatrix, n_sites: usize, keep: &[usize]) -> Result<CMatrix> {
    if state.dim() != 1 << n_sites {
        return Err(Error::DimensionMismatch {
            left: state.dim(),
            right: 1 << n_sites,
        });
    }
    if keep.is_empty() {
        return Err(Error::Domain("partial trace needs at least one kept site".into()));
    }
    let mut seen = 0usize;
    for &s in keep {
        if s >= n_sites {
            return Err(Error::SiteIndex { site: s, n_spins: n_sites });
        }
        if seen & (1 << s) != 0 {
            return Err(Error::Domain(format!("site {s} listed twice in partial trace")));
        }
        seen |= 1 << s;
    }
    let traced: Vec<usize> = (0..n_sites).filter(|s| seen & (1 << s) == 0).collect();

    let embed = |sites: &[usize], pattern: usize| -> usize {
        let k = sites.len();
        sites
            .iter()
            .enumerate()
            .filter(|&(m, _)| pattern & (1 << (k - 1 - m)) != 0)
            .map(|(_, &s)| site_bit(s, n_sites))
            .sum()
    };
    let kept_idx: Vec<usize> = (0..1usize << keep.len()).map(|r| embed(keep, r)).collect();
    let traced_idx: Vec<usize> = (0..1usize << traced.len()).map(|t| embed(&traced, t)).collect();

    let dk = kept_idx.len();
    let mut out = CMatrix::zeros(dk);
    for (r, &fr) in kept_idx.iter().enumerate() {
        for (c, &fc) in kept_idx.iter().enumerate() {
            out[(r, c)] = traced_idx.iter().map(|&ft| state[(fr | ft, fc | ft)]).sum();
        }
    }
    Ok(out)
}
