//! Dense complex matrices and vectors at the fixed dimensions 2, 4 and 8,
//! plus the equivalence metrics shared by every other module.
//!
//! Nothing here exceeds dimension 8, so storage is a plain row-major
//! `Vec<Complex64>` and all algorithms are the naive ones. The two metrics
//! that matter are `frob_dist` (exact equality checks) and `phase_dist`
//! (equality up to a global phase, used as the synthesis cost), together
//! with the predicates `is_unitary`, `is_sparse` and `is_diag_phase_equiv`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::fmt::Write as _;
use thiserror::Error;

pub type C64 = Complex64;

/// Dimensions supported by [`CMat`] and [`CVec`].
pub const DIMS: [usize; 3] = [2, 4, 8];

/// Tolerance used by checked operations to reject non-unitary input.
pub const UNITARY_CHECK_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum QmatError {
    #[error("unsupported dimension {0}: expected one of 2, 4, 8")]
    UnsupportedDim(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("expected {expected} entries for dimension {dim}, got {got}")]
    BadEntryCount {
        dim: usize,
        expected: usize,
        got: usize,
    },
    #[error("non-finite entry at ({0}, {1})")]
    NonFinite(usize, usize),
    #[error("kron product dimension {0} exceeds 8")]
    KronTooLarge(usize),
    #[error("matrix not unitary: residual {residual:.3e} exceeds {tol:.1e}")]
    NotUnitary { residual: f64, tol: f64 },
    #[error("matrix text: {0}")]
    Parse(String),
}

fn check_dim(dim: usize) -> Result<(), QmatError> {
    if DIMS.contains(&dim) {
        Ok(())
    } else {
        Err(QmatError::UnsupportedDim(dim))
    }
}

/// Square complex matrix of dimension 2, 4 or 8, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    dim: usize,
    data: Vec<C64>,
}

impl CMat {
    /// Builds a matrix from row-major entries. Rejects unsupported
    /// dimensions and non-finite entries.
    pub fn new(dim: usize, data: Vec<C64>) -> Result<Self, QmatError> {
        check_dim(dim)?;
        if data.len() != dim * dim {
            return Err(QmatError::BadEntryCount {
                dim,
                expected: dim * dim,
                got: data.len(),
            });
        }
        for (k, z) in data.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(QmatError::NonFinite(k / dim, k % dim));
            }
        }
        Ok(CMat { dim, data })
    }

    /// Builds a matrix entry by entry. `f(row, col)` must return finite values.
    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> C64) -> Result<Self, QmatError> {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        CMat::new(dim, data)
    }

    // Internal constructor for values known finite by construction.
    pub(crate) fn from_raw(dim: usize, data: Vec<C64>) -> Self {
        debug_assert!(DIMS.contains(&dim) && data.len() == dim * dim);
        CMat { dim, data }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(DIMS.contains(&dim), "unsupported dimension {dim}");
        CMat {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = CMat::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    pub(crate) fn set(&mut self, row: usize, col: usize, value: C64) {
        self.data[row * self.dim + col] = value;
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn adjoint(&self) -> CMat {
        let d = self.dim;
        let mut out = CMat::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out.data[j * d + i] = self.data[i * d + j].conj();
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    pub fn scale(&self, c: C64) -> CMat {
        CMat {
            dim: self.dim,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// True iff `adjoint(self)·self` is within `tol` of the identity in
    /// Frobenius distance.
    pub fn is_unitary(&self, tol: f64) -> bool {
        let prod = mat_mul(&self.adjoint(), self).expect("same dims");
        frob_dist(&prod, &CMat::identity(self.dim)).expect("same dims") <= tol
    }

    /// True iff the 2x2 matrix is diagonal or antidiagonal within `tol`.
    pub fn is_sparse(&self, tol: f64) -> bool {
        assert_eq!(self.dim, 2, "is_sparse is defined for 2x2 matrices");
        let diagonal = self.get(0, 1).norm() <= tol && self.get(1, 0).norm() <= tol;
        let antidiagonal = self.get(0, 0).norm() <= tol && self.get(1, 1).norm() <= tol;
        diagonal || antidiagonal
    }

    /// Applies the matrix to a vector.
    pub fn apply(&self, v: &CVec) -> Result<CVec, QmatError> {
        if self.dim != v.dim() {
            return Err(QmatError::DimMismatch(self.dim, v.dim()));
        }
        let d = self.dim;
        let mut out = vec![C64::new(0.0, 0.0); d];
        for i in 0..d {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..d {
                acc += self.data[i * d + j] * v.amp(j);
            }
            out[i] = acc;
        }
        Ok(CVec::from_raw(out))
    }
}

/// `out = a·b` on raw row-major slices, the allocation-free kernel behind
/// [`mat_mul`] and the synthesis hot loop. `out` must not alias the inputs.
pub(crate) fn matmul_into(d: usize, a: &[C64], b: &[C64], out: &mut [C64]) {
    debug_assert!(a.len() == d * d && b.len() == d * d && out.len() == d * d);
    for i in 0..d {
        let arow = &a[i * d..(i + 1) * d];
        let orow = &mut out[i * d..(i + 1) * d];
        orow.fill(C64::new(0.0, 0.0));
        for (k, &aik) in arow.iter().enumerate() {
            let brow = &b[k * d..(k + 1) * d];
            for j in 0..d {
                orow[j] += aik * brow[j];
            }
        }
    }
}

/// Standard matrix product.
pub fn mat_mul(a: &CMat, b: &CMat) -> Result<CMat, QmatError> {
    if a.dim != b.dim {
        return Err(QmatError::DimMismatch(a.dim, b.dim));
    }
    let d = a.dim;
    let mut out = CMat::zeros(d);
    matmul_into(d, &a.data, &b.data, &mut out.data);
    Ok(out)
}

/// Conjugate transpose.
pub fn adjoint(a: &CMat) -> CMat {
    a.adjoint()
}

/// Sum of diagonal entries.
pub fn trace(a: &CMat) -> C64 {
    a.trace()
}

/// Kronecker product with `a` on the more-significant factor.
pub fn kron(a: &CMat, b: &CMat) -> Result<CMat, QmatError> {
    let dim = a.dim * b.dim;
    if dim > 8 {
        return Err(QmatError::KronTooLarge(dim));
    }
    check_dim(dim)?;
    let mut out = CMat::zeros(dim);
    for ia in 0..a.dim {
        for ja in 0..a.dim {
            let za = a.get(ia, ja);
            for ib in 0..b.dim {
                for jb in 0..b.dim {
                    out.data[(ia * b.dim + ib) * dim + (ja * b.dim + jb)] = za * b.get(ib, jb);
                }
            }
        }
    }
    Ok(out)
}

/// Frobenius norm of `a - b`.
pub fn frob_dist(a: &CMat, b: &CMat) -> Result<f64, QmatError> {
    if a.dim != b.dim {
        return Err(QmatError::DimMismatch(a.dim, b.dim));
    }
    let sum: f64 = a
        .data
        .iter()
        .zip(&b.data)
        .map(|(x, y)| (x - y).norm_sqr())
        .sum();
    Ok(sum.sqrt())
}

/// Global-phase-invariant distance between unitaries:
/// `sqrt(max(0, 1 - |tr(u†v)|/d))`, zero iff `u = e^{i a} v`.
///
/// Computed as the phase-aligned Frobenius distance
/// `||u - c·v||_F / sqrt(2d)` with `c = conj(t)/|t|`, `t = tr(u†v)`, which is
/// the same function but keeps full precision near zero, where the textbook
/// form loses everything below ~1e-8 to cancellation in `1 - |t|/d`.
pub fn phase_dist(u: &CMat, v: &CMat) -> Result<f64, QmatError> {
    if u.dim != v.dim {
        return Err(QmatError::DimMismatch(u.dim, v.dim));
    }
    for m in [u, v] {
        let prod = mat_mul(&m.adjoint(), m)?;
        let residual = frob_dist(&prod, &CMat::identity(m.dim))?;
        if residual > UNITARY_CHECK_TOL {
            return Err(QmatError::NotUnitary {
                residual,
                tol: UNITARY_CHECK_TOL,
            });
        }
    }
    Ok(phase_dist_unchecked(u, v))
}

/// `phase_dist` without the unitarity validation; callers guarantee inputs.
pub(crate) fn phase_dist_unchecked(u: &CMat, v: &CMat) -> f64 {
    debug_assert_eq!(u.dim, v.dim);
    let d = u.dim;
    let mut t = C64::new(0.0, 0.0);
    for k in 0..d * d {
        t += u.data[k].conj() * v.data[k];
    }
    let c = if t.norm() > 1e-300 {
        t.conj() / t.norm()
    } else {
        C64::new(1.0, 0.0)
    };
    let mut sum = 0.0;
    for k in 0..d * d {
        sum += (u.data[k] - c * v.data[k]).norm_sqr();
    }
    (sum / (2.0 * d as f64)).sqrt()
}

/// True iff `u` is unitary within `tol`.
pub fn is_unitary(a: &CMat, tol: f64) -> bool {
    a.is_unitary(tol)
}

/// True iff the 2x2 matrix is diagonal or antidiagonal within `tol`.
pub fn is_sparse(a: &CMat, tol: f64) -> bool {
    a.is_sparse(tol)
}

/// True iff `u·adjoint(v)` is diagonal within `tol` with unit-modulus
/// diagonal entries: equality up to a diagonal matrix of phase factors.
pub fn is_diag_phase_equiv(u: &CMat, v: &CMat, tol: f64) -> bool {
    if u.dim != v.dim || !u.is_unitary(tol.max(UNITARY_CHECK_TOL)) {
        return false;
    }
    let prod = mat_mul(u, &v.adjoint()).expect("same dims");
    for i in 0..prod.dim {
        for j in 0..prod.dim {
            let z = prod.get(i, j);
            if i == j {
                if (z.norm() - 1.0).abs() > tol {
                    return false;
                }
            } else if z.norm() > tol {
                return false;
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Named 2x2 gates.

/// cos(pi/8), the rotation entry of the G gate.
pub const COS_PI_8: f64 = 0.923_879_532_511_286_7;
/// sin(pi/8).
pub const SIN_PI_8: f64 = 0.382_683_432_365_089_8;

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Bit-flip gate [[0,1],[1,0]].
pub fn x() -> CMat {
    CMat::from_raw(2, vec![re(0.0), re(1.0), re(1.0), re(0.0)])
}

/// Phase-flip gate [[1,0],[0,-1]].
pub fn z() -> CMat {
    CMat::from_raw(2, vec![re(1.0), re(0.0), re(0.0), re(-1.0)])
}

/// The product Z·X = [[0,1],[-1,0]]. Real and antidiagonal, not the
/// imaginary Pauli Y.
pub fn y() -> CMat {
    CMat::from_raw(2, vec![re(0.0), re(1.0), re(-1.0), re(0.0)])
}

/// Hadamard gate.
pub fn h() -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMat::from_raw(2, vec![re(s), re(s), re(s), re(-s)])
}

/// Rotation by pi/8: [[cos(pi/8), -sin(pi/8)], [sin(pi/8), cos(pi/8)]].
pub fn g() -> CMat {
    CMat::from_raw(
        2,
        vec![re(COS_PI_8), re(-SIN_PI_8), re(SIN_PI_8), re(COS_PI_8)],
    )
}

/// Adjoint of [`g`].
pub fn g_dag() -> CMat {
    g().adjoint()
}

// ---------------------------------------------------------------------------
// Vectors.

/// Complex state vector of dimension 2, 4 or 8.
#[derive(Debug, Clone, PartialEq)]
pub struct CVec {
    amps: Vec<C64>,
}

impl CVec {
    pub fn new(amps: Vec<C64>) -> Result<Self, QmatError> {
        check_dim(amps.len())?;
        for (k, z) in amps.iter().enumerate() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(QmatError::NonFinite(k, 0));
            }
        }
        Ok(CVec { amps })
    }

    pub(crate) fn from_raw(amps: Vec<C64>) -> Self {
        debug_assert!(DIMS.contains(&amps.len()));
        CVec { amps }
    }

    /// Computational basis vector `|index>`.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(DIMS.contains(&dim) && index < dim);
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        CVec { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amp(&self, i: usize) -> C64 {
        self.amps[i]
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    pub fn normalize(&self) -> CVec {
        let n = self.norm();
        assert!(n > 0.0, "cannot normalize the zero vector");
        CVec {
            amps: self.amps.iter().map(|z| z / n).collect(),
        }
    }
}

/// Inner product, conjugate-linear in the first argument.
pub fn inner(a: &CVec, b: &CVec) -> Result<C64, QmatError> {
    if a.dim() != b.dim() {
        return Err(QmatError::DimMismatch(a.dim(), b.dim()));
    }
    Ok(a.amps
        .iter()
        .zip(&b.amps)
        .map(|(x, y)| x.conj() * y)
        .sum())
}

/// Tensor product of vectors, `a` on the more-significant factor.
pub fn kron_vec(a: &CVec, b: &CVec) -> Result<CVec, QmatError> {
    let dim = a.dim() * b.dim();
    if dim > 8 {
        return Err(QmatError::KronTooLarge(dim));
    }
    check_dim(dim)?;
    let mut amps = Vec::with_capacity(dim);
    for za in &a.amps {
        for zb in &b.amps {
            amps.push(za * zb);
        }
    }
    Ok(CVec { amps })
}

// ---------------------------------------------------------------------------
// Seeded sampling helpers used by randomized checks.

fn gaussian_c64<R: Rng>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im)
}

/// Haar-random unitary: modified Gram-Schmidt on a complex Gaussian matrix.
/// The implicit R factor has a real positive diagonal, which is exactly the
/// normalization that makes the Q factor Haar-distributed.
pub fn haar_unitary<R: Rng>(dim: usize, rng: &mut R) -> CMat {
    assert!(DIMS.contains(&dim));
    // Columns of the Ginibre sample.
    let mut cols: Vec<Vec<C64>> = (0..dim)
        .map(|_| (0..dim).map(|_| gaussian_c64(rng)).collect())
        .collect();
    for j in 0..dim {
        for k in 0..j {
            let proj: C64 = (0..dim).map(|i| cols[k][i].conj() * cols[j][i]).sum();
            for i in 0..dim {
                let t = proj * cols[k][i];
                cols[j][i] -= t;
            }
        }
        let norm = cols[j].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in &mut cols[j] {
            *z /= norm;
        }
    }
    CMat::from_fn(dim, |i, j| cols[j][i]).expect("finite by construction")
}

/// Uniformly random normalized state.
pub fn random_state<R: Rng>(dim: usize, rng: &mut R) -> CVec {
    assert!(DIMS.contains(&dim));
    let amps: Vec<C64> = (0..dim).map(|_| gaussian_c64(rng)).collect();
    CVec::from_raw(amps).normalize()
}

// ---------------------------------------------------------------------------
// Matrix text exchange format: first line the dimension, then one line per
// row with entries "re{sign}im j", 15 decimal places.

pub fn matrix_text(m: &CMat) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{}", m.dim);
    for i in 0..m.dim {
        for j in 0..m.dim {
            if j > 0 {
                s.push(' ');
            }
            let z = m.get(i, j);
            let _ = write!(s, "{:.15}{:+.15}j", z.re, z.im);
        }
        s.push('\n');
    }
    s
}

fn parse_entry(token: &str) -> Result<C64, QmatError> {
    let bad = || QmatError::Parse(format!("malformed entry '{token}'"));
    let body = token.strip_suffix('j').ok_or_else(bad)?;
    // Split at the sign of the imaginary part: the last '+' or '-' that is
    // not a leading sign and not part of an exponent.
    let bytes = body.as_bytes();
    let mut split = None;
    for k in (1..bytes.len()).rev() {
        let c = bytes[k];
        if (c == b'+' || c == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
            split = Some(k);
            break;
        }
    }
    let k = split.ok_or_else(bad)?;
    let re: f64 = body[..k].parse().map_err(|_| bad())?;
    let im: f64 = body[k..].parse().map_err(|_| bad())?;
    Ok(C64::new(re, im))
}

pub fn parse_matrix_text(text: &str) -> Result<CMat, QmatError> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'));
    let dim: usize = lines
        .next()
        .ok_or_else(|| QmatError::Parse("empty input".into()))?
        .parse()
        .map_err(|_| QmatError::Parse("first line must be the dimension".into()))?;
    check_dim(dim)?;
    let mut data = Vec::with_capacity(dim * dim);
    for i in 0..dim {
        let line = lines
            .next()
            .ok_or_else(|| QmatError::Parse(format!("missing row {i}")))?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != dim {
            return Err(QmatError::Parse(format!(
                "row {i} has {} entries, expected {dim}",
                tokens.len()
            )));
        }
        for tok in tokens {
            data.push(parse_entry(tok)?);
        }
    }
    if lines.next().is_some() {
        return Err(QmatError::Parse("trailing content after matrix".into()));
    }
    CMat::new(dim, data)
}
