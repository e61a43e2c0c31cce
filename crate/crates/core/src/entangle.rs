//! State-level entanglement analysis: Schmidt rank across bipartitions,
//! the controlled-U entanglement criterion, the eigenvector output
//! formula, and the connectivity filter for CNOT configurations.

use crate::circuit::CnotConfig;
use crate::qmat::{kron_vec, CMat, CVec, C64};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EntangleError {
    #[error("bipartition: {0}")]
    MalformedBipartition(String),
    #[error("state dimension {got} does not match {expected} wires")]
    DimMismatch { got: usize, expected: usize },
    #[error("state not normalized: norm {0}")]
    NotNormalized(f64),
    #[error("phi is not an eigenvector: residual {0:.3e}")]
    NotAnEigenvector(f64),
}

/// A split of the wires into two nonempty sides covering all of them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bipartition {
    n_wires: usize,
    side_a: Vec<usize>,
    side_b: Vec<usize>,
}

impl Bipartition {
    /// Builds the split from side A; side B is the complement. Wires in
    /// each side are kept in descending significance order.
    pub fn new(n_wires: usize, side_a: &[usize]) -> Result<Self, EntangleError> {
        if !(n_wires == 2 || n_wires == 3) {
            return Err(EntangleError::MalformedBipartition(format!(
                "{n_wires} wires unsupported"
            )));
        }
        let mut a: Vec<usize> = side_a.to_vec();
        a.sort_unstable();
        a.dedup();
        if a.len() != side_a.len() {
            return Err(EntangleError::MalformedBipartition(
                "duplicate wires in side A".into(),
            ));
        }
        if let Some(&bad) = a.iter().find(|&&w| w >= n_wires) {
            return Err(EntangleError::MalformedBipartition(format!(
                "wire {bad} out of range"
            )));
        }
        if a.is_empty() || a.len() == n_wires {
            return Err(EntangleError::MalformedBipartition(
                "both sides must be nonempty".into(),
            ));
        }
        let b: Vec<usize> = (0..n_wires).rev().filter(|w| !a.contains(w)).collect();
        a.reverse();
        Ok(Bipartition {
            n_wires,
            side_a: a,
            side_b: b,
        })
    }

    pub fn n_wires(&self) -> usize {
        self.n_wires
    }

    pub fn side_a(&self) -> &[usize] {
        &self.side_a
    }

    pub fn side_b(&self) -> &[usize] {
        &self.side_b
    }
}

// Packs the bits of `index` selected by `wires` (descending significance)
// into a contiguous sub-index.
fn pack_bits(index: usize, wires: &[usize]) -> usize {
    wires
        .iter()
        .fold(0, |acc, &w| (acc << 1) | ((index >> w) & 1))
}

/// Number of singular values of the reshaped amplitude matrix above
/// tol · (largest singular value); 1 means a product state across the cut.
pub fn schmidt_rank(state: &CVec, cut: &Bipartition, tol: f64) -> Result<usize, EntangleError> {
    let dim = 1usize << cut.n_wires;
    if state.dim() != dim {
        return Err(EntangleError::DimMismatch {
            got: state.dim(),
            expected: cut.n_wires,
        });
    }
    let norm = state.norm();
    if (norm - 1.0).abs() > 1e-6 {
        return Err(EntangleError::NotNormalized(norm));
    }
    // Reshape to |A| x |B| with the smaller side on rows; with at most 3
    // wires the smaller side is always a single qubit, so the matrix has
    // exactly two rows.
    let (rows_w, cols_w) = if cut.side_a.len() <= cut.side_b.len() {
        (&cut.side_a, &cut.side_b)
    } else {
        (&cut.side_b, &cut.side_a)
    };
    let n_cols = 1usize << cols_w.len();
    debug_assert_eq!(1usize << rows_w.len(), 2);
    let mut psi = vec![C64::new(0.0, 0.0); 2 * n_cols];
    for idx in 0..dim {
        let r = pack_bits(idx, rows_w);
        let c = pack_bits(idx, cols_w);
        psi[r * n_cols + c] = state.amp(idx);
    }
    let (row0, row1) = psi.split_at(n_cols);
    // Gram-Schmidt the two rows into a lower-triangular factor
    // [[r00, 0], [r10, r11]] times orthonormal rows; the singular values
    // are those of the triangular factor. The small one comes out of
    // |det| / sigma_max, products only, so a near-product state measures
    // its tiny second value at machine precision instead of drowning in
    // the sqrt(eps) cancellation noise of the Gram eigenvalue formula.
    let r00 = row0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let (r10_sq, r11) = if r00 == 0.0 {
        let n1 = row1.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        (n1 * n1, 0.0)
    } else {
        let proj: C64 = row0
            .iter()
            .zip(row1)
            .map(|(a, b)| a.conj() * b)
            .sum::<C64>()
            / r00;
        let r11_sq: f64 = row1
            .iter()
            .zip(row0)
            .map(|(b, a)| (b - proj * a / r00).norm_sqr())
            .sum();
        (proj.norm_sqr(), r11_sq.sqrt())
    };
    let s = r00 * r00 + r10_sq + r11 * r11;
    let d = r00 * r11;
    let sigma_max = ((s + (s * s - 4.0 * d * d).max(0.0).sqrt()) / 2.0).sqrt();
    if sigma_max == 0.0 {
        return Ok(0);
    }
    let sigma_min = d / sigma_max;
    Ok(1 + usize::from(sigma_min > tol * sigma_max))
}

// Residual of phi against being an eigenvector of u, together with the
// Rayleigh quotient (the eigenvalue when the residual vanishes).
fn eigen_residual(phi: &CVec, u: &CMat) -> (f64, C64) {
    let uphi = u.apply(phi).expect("2x2 on 2-vector");
    let lambda: C64 = (0..2).map(|i| phi.amp(i).conj() * uphi.amp(i)).sum();
    let residual = (0..2)
        .map(|i| (uphi.amp(i) - lambda * phi.amp(i)).norm_sqr())
        .sum::<f64>()
        .sqrt();
    (residual, lambda)
}

/// The entanglement criterion for a controlled-U acting on psi (control)
/// and phi (target): true iff phi is not an eigenvector of u and both
/// amplitudes of psi are nonzero, judged at tolerance `tol`. Equivalent to
/// the output state having Schmidt rank 2 across the control/target cut.
pub fn lemma1_predicate(psi: &CVec, phi: &CVec, u: &CMat, tol: f64) -> bool {
    assert_eq!(psi.dim(), 2);
    assert_eq!(phi.dim(), 2);
    assert_eq!(u.dim(), 2);
    let (residual, _) = eigen_residual(phi, u);
    let not_eigen = residual > tol;
    let superposed = psi.amp(0).norm() > tol && psi.amp(1).norm() > tol;
    not_eigen && superposed
}

/// Output of a controlled-U on psi ⊗ phi when phi is an eigenvector of u
/// with eigenvalue lambda: diag(1, lambda)·psi tensored with phi.
pub fn lemma2_output(psi: &CVec, phi: &CVec, u: &CMat) -> Result<CVec, EntangleError> {
    assert_eq!(psi.dim(), 2);
    assert_eq!(phi.dim(), 2);
    assert_eq!(u.dim(), 2);
    let (residual, lambda) = eigen_residual(phi, u);
    if residual > 1e-10 {
        return Err(EntangleError::NotAnEigenvector(residual));
    }
    let scaled = CVec::new(vec![psi.amp(0), lambda * psi.amp(1)]).expect("finite");
    Ok(kron_vec(&scaled, phi).expect("2x2 -> 4"))
}

/// True iff the CNOTs of the configuration connect all three wires: the
/// graph with an edge per placement code must have a single component.
pub fn entangling_connectivity(cfg: &CnotConfig) -> bool {
    let mut component = [0usize, 1, 2];
    let root = |comp: &[usize; 3], mut w: usize| {
        while comp[w] != w {
            w = comp[w];
        }
        w
    };
    for &code in cfg.codes() {
        let (a, b) = CnotConfig::control_target(code);
        let (ra, rb) = (root(&component, a), root(&component, b));
        component[ra] = rb;
    }
    let r0 = root(&component, 0);
    (1..3).all(|w| root(&component, w) == r0)
}
