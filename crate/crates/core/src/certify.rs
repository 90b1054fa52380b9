//! Deterministic lower-bound certificates for the smallest singular value.
//!
//! The primitive is the Schur complement inequality: for a block matrix
//! `M = [[A, B], [C, D]]` with invertible `D`,
//!
//! ```text
//! s_min(M) ≥ (1 + ‖B‖/s_min(D))⁻¹ (1 + ‖C‖/s_min(D))⁻¹
//!             · min(s_min(D), s_min(A − B D⁻¹ C)).
//! ```
//!
//! Certificates compose this inequality recursively; leaves are either
//! direct SVD measurements, diagonal-dominance triangle bounds, or further
//! recursion. All operator norms are measured on the concrete sample, so a
//! certificate is unconditionally valid for its matrix (up to floating
//! point), with no probabilistic caveats.

use std::collections::HashSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::ensemble::{MatrixSample, Shift};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix};
use crate::regularity::Decomposition;

/// Relative tolerance for tree-consistency checks.
pub const TREE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LeafMethod {
    Svd,
    Diagonal,
    TriangularRecursion,
}

/// Node of a certificate tree. Bounds always refer to the matrix the node
/// covers; a `Schur` node's `a_side` bounds the Schur complement
/// `A − B D⁻¹ C` and its `d_side` bounds `D`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "kebab-case")]
pub enum CertNode {
    Leaf {
        method: LeafMethod,
        dim: usize,
        bound: f64,
    },
    Schur {
        dim: usize,
        /// dimension of the leading (`A`) block
        split: usize,
        b_norm: f64,
        c_norm: f64,
        a_side: Box<CertNode>,
        d_side: Box<CertNode>,
        bound: f64,
    },
    /// Triangle-inequality step: the covered matrix differs from the inner
    /// one by a perturbation of measured norm.
    Residual {
        dim: usize,
        subtracted_norm: f64,
        inner: Box<CertNode>,
        bound: f64,
    },
}

impl CertNode {
    pub fn bound(&self) -> f64 {
        match self {
            CertNode::Leaf { bound, .. }
            | CertNode::Schur { bound, .. }
            | CertNode::Residual { bound, .. } => *bound,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            CertNode::Leaf { dim, .. }
            | CertNode::Schur { dim, .. }
            | CertNode::Residual { dim, .. } => *dim,
        }
    }

    /// Recompute this node's bound from its children.
    pub fn recompute(&self) -> f64 {
        match self {
            CertNode::Leaf { bound, .. } => *bound,
            CertNode::Schur {
                b_norm,
                c_norm,
                a_side,
                d_side,
                ..
            } => schur_bound_formula(*b_norm, *c_norm, d_side.bound(), a_side.bound()),
            CertNode::Residual {
                subtracted_norm,
                inner,
                ..
            } => inner.bound() - subtracted_norm,
        }
    }

    /// Every internal node's stored bound reproduces from its children.
    pub fn consistent(&self, tol: f64) -> bool {
        let here = (self.bound() - self.recompute()).abs()
            <= tol * self.bound().abs().max(1.0);
        match self {
            CertNode::Leaf { .. } => here,
            CertNode::Schur { a_side, d_side, .. } => {
                here && a_side.consistent(tol) && d_side.consistent(tol)
            }
            CertNode::Residual { inner, .. } => here && inner.consistent(tol),
        }
    }
}

/// A lower bound on `s_min` with the tree of steps that produced it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Certificate {
    pub bound: f64,
    pub tree: CertNode,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl Certificate {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn consistent(&self) -> bool {
        self.bound == self.tree.bound() && self.tree.consistent(TREE_TOL)
    }
}

/// The Schur complement inequality as a formula.
pub fn schur_bound_formula(b_norm: f64, c_norm: f64, s_d: f64, s_schur: f64) -> f64 {
    (1.0 + b_norm / s_d).recip() * (1.0 + c_norm / s_d).recip() * s_d.min(s_schur)
}

/// Apply the inequality to a concretely partitioned matrix: the leading
/// `split×split` block is `A`, the trailing block is `D`. `s_d` and
/// `s_schur` are lower bounds for `s_min(D)` and `s_min(A − B D⁻¹ C)`; the
/// off-diagonal norms are measured here.
pub fn schur_bound(m: &CMatrix, split: usize, s_d: f64, s_schur: f64) -> Result<f64> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::Dimension("schur bound needs a square matrix".into()));
    }
    if split == 0 || split >= n {
        return Err(Error::Parameter(format!(
            "split {split} outside 1..{n}"
        )));
    }
    if s_d <= 0.0 {
        return Err(Error::Parameter(format!("s_d must be positive, got {s_d}")));
    }
    let b = m.view((0, split), (split, n - split)).into_owned();
    let c = m.view((split, 0), (n - split, split)).into_owned();
    Ok(schur_bound_formula(
        linalg::opnorm(&b),
        linalg::opnorm(&c),
        s_d,
        s_schur,
    ))
}

// ---------------------------------------------------------------------------
// Triangular certificate
// ---------------------------------------------------------------------------

/// Measured norm bound `K = ‖A∘X‖/√n` of a sample's noise part.
pub fn measured_noise_bound(ms: &MatrixSample) -> f64 {
    linalg::opnorm(&ms.noise()) / (ms.n() as f64).sqrt()
}

/// Certificate for an upper-triangular profile with a diagonal shift, via
/// the dyadic two-block recursion (the lower-left block of every dyadic
/// submatrix vanishes, so each Schur step has `C = 0`).
///
/// The matrix is padded to the next power of two with diagonal entries
/// `r₀√n` and zero noise; leaves at depth `p₀ = ⌊2·log₂(2K/r₀)⌋ + 1` are
/// bounded by the measured triangle inequality
/// `s_min(M_s) ≥ min_i |z_i|√n − ‖(A∘X)_s‖`. A nonpositive leaf bound is a
/// certificate failure naming the offending block.
pub fn triangular_certificate(ms: &MatrixSample, k_bound: f64) -> Result<Certificate> {
    let n = ms.n();
    let sigma = ms.profile.sigma();
    for i in 0..n {
        for j in 0..i {
            if sigma[(i, j)] != 0.0 {
                return Err(Error::Precondition(format!(
                    "profile is not upper triangular: σ({i},{j}) = {}",
                    sigma[(i, j)]
                )));
            }
        }
    }
    if ms.profile.means().is_some() {
        return Err(Error::Precondition(
            "triangular certificate expects no mean profile beyond the shift".into(),
        ));
    }
    let Shift::Diagonal { z, .. } = &ms.shift else {
        return Err(Error::Precondition(
            "triangular certificate needs a diagonal shift".into(),
        ));
    };
    let scale = (n as f64).sqrt();
    let diag: Vec<Complex64> = z.iter().map(|zi| zi * scale).collect();
    if diag.iter().any(|d| d.norm() == 0.0) {
        return Err(Error::Precondition("zero diagonal entry".into()));
    }
    let noise = ms.noise();
    let _ = k_bound; // the recursion re-measures per-block norms; the global
                     // bound only sets the recursion depth below
    let tree = triangular_raw(&noise, &diag, Some(k_bound * scale))?;
    Ok(Certificate {
        bound: tree.bound(),
        tree,
        warnings: Vec::new(),
    })
}

/// Core recursion on a strictly-below-diagonal-free noise matrix plus
/// explicit diagonal values. `k_abs` overrides the measured global noise
/// norm used for the depth formula.
pub(crate) fn triangular_raw(
    noise: &CMatrix,
    diag: &[Complex64],
    k_abs: Option<f64>,
) -> Result<CertNode> {
    let n = noise.nrows();
    debug_assert_eq!(noise.ncols(), n);
    debug_assert_eq!(diag.len(), n);
    let r0_abs = diag
        .iter()
        .map(|d| d.norm())
        .fold(f64::INFINITY, f64::min);
    if r0_abs <= 0.0 {
        return Err(Error::Precondition("diagonal entries must be nonzero".into()));
    }

    // pad to the next power of two: zero noise, diagonal r0
    let padded = n.next_power_of_two();
    let q_levels = padded.trailing_zeros() as usize;
    let mut noise_p = CMatrix::zeros(padded, padded);
    noise_p.view_mut((0, 0), (n, n)).copy_from(noise);
    let mut diag_p: Vec<Complex64> = diag.to_vec();
    diag_p.resize(padded, Complex64::new(r0_abs, 0.0));

    let k_measured = k_abs.unwrap_or_else(|| linalg::opnorm(&noise_p));
    let ratio = k_measured / r0_abs;
    let p0 = if ratio <= 0.0 {
        0
    } else {
        let raw = (2.0 * (2.0 * ratio).log2()).floor() + 1.0;
        raw.max(0.0) as usize
    }
    .min(q_levels);

    build_triangular(&noise_p, &diag_p, 0, padded, 0, p0, String::new())
}

fn build_triangular(
    noise: &CMatrix,
    diag: &[Complex64],
    lo: usize,
    hi: usize,
    depth: usize,
    p0: usize,
    path: String,
) -> Result<CertNode> {
    let dim = hi - lo;
    if depth == p0 || dim == 1 {
        let dmin = diag[lo..hi]
            .iter()
            .map(|d| d.norm())
            .fold(f64::INFINITY, f64::min);
        let block = noise.view((lo, lo), (dim, dim)).into_owned();
        let bound = dmin - linalg::opnorm(&block);
        if bound <= 0.0 {
            return Err(Error::Certificate(format!(
                "leaf block {path:?} (rows {lo}..{hi}): triangle bound {bound} ≤ 0; \
                 the boundedness event failed on this sample"
            )));
        }
        return Ok(CertNode::Leaf {
            method: LeafMethod::Diagonal,
            dim,
            bound,
        });
    }
    let mid = lo + dim / 2;
    let left = build_triangular(noise, diag, lo, mid, depth + 1, p0, format!("{path}0"))?;
    let right = build_triangular(noise, diag, mid, hi, depth + 1, p0, format!("{path}1"))?;
    let b = noise.view((lo, mid), (mid - lo, hi - mid)).into_owned();
    let b_norm = linalg::opnorm(&b);
    // the lower-left block vanishes for upper-triangular noise
    let bound = schur_bound_formula(b_norm, 0.0, right.bound(), left.bound());
    Ok(CertNode::Schur {
        dim,
        split: mid - lo,
        b_norm,
        c_norm: 0.0,
        a_side: Box::new(left),
        d_side: Box::new(right),
        bound,
    })
}

// ---------------------------------------------------------------------------
// Pipeline certificate
// ---------------------------------------------------------------------------

/// Three-step certificate for a sample with a diagonal shift, guided by a
/// decomposition of its profile.
///
/// Step 1 bounds the free block: entries below the cutoff or inside the
/// exception set move into a measured-norm residual, the remainder is
/// upper-triangular in τ-order and goes through the dyadic recursion (SVD
/// fallback when the triangular bound degenerates). Step 2 extends to the
/// free∪bad block by one Schur step whose complement is measured by SVD.
/// Step 3 attaches the cyclic part: the Schur complement against the cyclic
/// block is peeled block by block along the π-permuted generalized diagonal,
/// each diagonal block measured by SVD.
pub fn pipeline_certificate(ms: &MatrixSample, dec: &Decomposition) -> Result<Certificate> {
    let n = ms.n();
    if dec.n() != n {
        return Err(Error::Dimension(format!(
            "decomposition covers {} indices, sample has {n}",
            dec.n()
        )));
    }
    dec.verify(&ms.profile)?;
    let Shift::Diagonal { z, .. } = &ms.shift else {
        return Err(Error::Precondition(
            "pipeline certificate needs a diagonal shift".into(),
        ));
    };
    if ms.profile.means().is_some() {
        return Err(Error::Precondition(
            "pipeline certificate expects no mean profile beyond the shift".into(),
        ));
    }
    let mut warnings: Vec<String> = Vec::new();
    let scale = (n as f64).sqrt();
    let sigma_hat = dec.params.sigma_hat;

    // ---- Step 1: free block ------------------------------------------------
    let free = dec.j_free();
    let free_node: Option<CertNode> = if free.is_empty() {
        None
    } else {
        let f = free.len();
        let m_free = linalg::submatrix(&ms.matrix, free, free);
        let fset: HashSet<(usize, usize)> = dec.f_pairs.iter().copied().collect();
        let mut tilde = CMatrix::zeros(f, f);
        for a in 0..f {
            for b in (a + 1)..f {
                let (i, j) = (free[a], free[b]);
                if ms.profile.sigma()[(i, j)] >= sigma_hat && !fset.contains(&(i, j)) {
                    tilde[(a, b)] = ms.matrix[(i, j)];
                }
            }
        }
        let diag: Vec<Complex64> = free.iter().map(|&i| z[i] * scale).collect();
        let mut full_tilde = tilde.clone();
        for (a, d) in diag.iter().enumerate() {
            full_tilde[(a, a)] += d;
        }
        let residual_norm = linalg::opnorm(&(&m_free - &full_tilde));
        let node = match triangular_raw(&tilde, &diag, None) {
            Ok(inner) if inner.bound() - residual_norm > 0.0 => CertNode::Residual {
                dim: f,
                subtracted_norm: residual_norm,
                bound: inner.bound() - residual_norm,
                inner: Box::new(inner),
            },
            Ok(_) | Err(Error::Certificate(_)) => {
                warnings.push(
                    "triangular bound degenerated on the free block; SVD fallback".into(),
                );
                CertNode::Leaf {
                    method: LeafMethod::Svd,
                    dim: f,
                    bound: linalg::smin(&m_free),
                }
            }
            Err(e) => return Err(e),
        };
        Some(node)
    };

    // ---- Step 2: free ∪ bad -----------------------------------------------
    let bad = &dec.j_bad;
    let mut m1_order: Vec<usize> = Vec::with_capacity(bad.len() + free.len());
    m1_order.extend_from_slice(bad);
    m1_order.extend_from_slice(free);
    let m1_node: Option<CertNode> = match (free_node, bad.is_empty()) {
        (None, true) => None,
        (Some(node), true) => Some(node),
        (None, false) => {
            let m0 = linalg::submatrix(&ms.matrix, bad, bad);
            Some(CertNode::Leaf {
                method: LeafMethod::Svd,
                dim: bad.len(),
                bound: linalg::smin(&m0),
            })
        }
        (Some(free_node), false) => {
            let m1 = linalg::submatrix(&ms.matrix, &m1_order, &m1_order);
            let split = bad.len();
            let s_d = free_node.bound();
            if s_d <= 0.0 {
                return Err(Error::Certificate(
                    "step 2: free-block bound is nonpositive".into(),
                ));
            }
            let m_free = linalg::submatrix(&ms.matrix, free, free);
            if s_d < 1e-6 * linalg::opnorm(&m_free) {
                warnings.push(format!(
                    "step 2: conditioning s_D = {s_d} below 1e-6·‖M_free‖"
                ));
            }
            let b1 = m1.view((0, split), (split, free.len())).into_owned();
            let c1 = m1.view((split, 0), (free.len(), split)).into_owned();
            let a_blk = m1.view((0, 0), (split, split)).into_owned();
            let x = linalg::lu_solve(&m_free, &c1)?;
            let schur = &a_blk - &b1 * x;
            let s_schur = linalg::smin(&schur);
            let bound =
                schur_bound_formula(linalg::opnorm(&b1), linalg::opnorm(&c1), s_d, s_schur);
            Some(CertNode::Schur {
                dim: m1_order.len(),
                split,
                b_norm: linalg::opnorm(&b1),
                c_norm: linalg::opnorm(&c1),
                a_side: Box::new(CertNode::Leaf {
                    method: LeafMethod::Svd,
                    dim: split,
                    bound: s_schur,
                }),
                d_side: Box::new(free_node),
                bound,
            })
        }
    };

    // ---- Step 3: attach the cyclic part -------------------------------------
    let blocks = &dec.cyc_blocks;
    let tree = match (m1_node, blocks.is_empty()) {
        (Some(node), true) => node,
        (None, true) => {
            return Err(Error::Certificate("empty decomposition".into()));
        }
        (m1_node, false) => {
            let cyc_order: Vec<usize> = blocks.iter().flatten().copied().collect();
            let bs = blocks[0].len();
            let m_hat = blocks.len();
            match m1_node {
                None => {
                    let m_cyc = linalg::submatrix(&ms.matrix, &cyc_order, &cyc_order);
                    cyc_chain(&permute_cols_by_pi(&m_cyc, &dec.pi, bs), m_hat, bs, &mut warnings)?
                }
                Some(m1_node) => {
                    let m1 = linalg::submatrix(&ms.matrix, &m1_order, &m1_order);
                    let s_d = m1_node.bound();
                    if s_d <= 0.0 {
                        return Err(Error::Certificate(
                            "step 3: bound for the free∪bad block is nonpositive".into(),
                        ));
                    }
                    if s_d < 1e-6 * linalg::opnorm(&m1) {
                        warnings.push(format!(
                            "step 3: conditioning s_D = {s_d} below 1e-6·‖M₁‖"
                        ));
                    }
                    let b2 = linalg::submatrix(&ms.matrix, &cyc_order, &m1_order);
                    let c2 = linalg::submatrix(&ms.matrix, &m1_order, &cyc_order);
                    let m_cyc = linalg::submatrix(&ms.matrix, &cyc_order, &cyc_order);
                    let x = linalg::lu_solve(&m1, &c2)?;
                    let schur = &m_cyc - &b2 * x;
                    let a_node = cyc_chain(
                        &permute_cols_by_pi(&schur, &dec.pi, bs),
                        m_hat,
                        bs,
                        &mut warnings,
                    )?;
                    let bound = schur_bound_formula(
                        linalg::opnorm(&b2),
                        linalg::opnorm(&c2),
                        s_d,
                        a_node.bound(),
                    );
                    CertNode::Schur {
                        dim: n,
                        split: cyc_order.len(),
                        b_norm: linalg::opnorm(&b2),
                        c_norm: linalg::opnorm(&c2),
                        a_side: Box::new(a_node),
                        d_side: Box::new(m1_node),
                        bound,
                    }
                }
            }
        }
    };

    Ok(Certificate {
        bound: tree.bound(),
        tree,
        warnings,
    })
}

/// Permute column blocks so the diagonal carries the π-matched pairs
/// `(J_k, J_{π(k)})`; a column permutation leaves singular values unchanged.
fn permute_cols_by_pi(m: &CMatrix, pi: &[usize], bs: usize) -> CMatrix {
    let n = m.nrows();
    let mut out = CMatrix::zeros(n, n);
    for (k, &pk) in pi.iter().enumerate() {
        for b in 0..bs {
            let dst = k * bs + b;
            let src = pk * bs + b;
            for a in 0..n {
                out[(a, dst)] = m[(a, src)];
            }
        }
    }
    out
}

/// Peel the trailing block off a block matrix, measuring each diagonal block
/// by SVD and recursing on the explicitly formed Schur complement.
fn cyc_chain(
    s: &CMatrix,
    m_hat: usize,
    bs: usize,
    warnings: &mut Vec<String>,
) -> Result<CertNode> {
    debug_assert_eq!(s.nrows(), m_hat * bs);
    if m_hat == 1 {
        return Ok(CertNode::Leaf {
            method: LeafMethod::Svd,
            dim: bs,
            bound: linalg::smin(s),
        });
    }
    let split = (m_hat - 1) * bs;
    let d = s.view((split, split), (bs, bs)).into_owned();
    let s_d = linalg::smin(&d);
    if s_d <= 0.0 {
        return Err(Error::Certificate(format!(
            "cyclic block {} is singular",
            m_hat - 1
        )));
    }
    if s_d < 1e-6 * linalg::opnorm(&d) {
        warnings.push(format!(
            "cyclic block {}: conditioning s_D = {s_d} below 1e-6·‖D‖",
            m_hat - 1
        ));
    }
    let b = s.view((0, split), (split, bs)).into_owned();
    let c = s.view((split, 0), (bs, split)).into_owned();
    let a = s.view((0, 0), (split, split)).into_owned();
    let x = linalg::lu_solve(&d, &c)?;
    let schur = &a - &b * x;
    let a_node = cyc_chain(&schur, m_hat - 1, bs, warnings)?;
    let b_norm = linalg::opnorm(&b);
    let c_norm = linalg::opnorm(&c);
    let bound = schur_bound_formula(b_norm, c_norm, s_d, a_node.bound());
    Ok(CertNode::Schur {
        dim: m_hat * bs,
        split,
        b_norm,
        c_norm,
        a_side: Box::new(a_node),
        d_side: Box::new(CertNode::Leaf {
            method: LeafMethod::Svd,
            dim: bs,
            bound: s_d,
        }),
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::sample;
    use crate::graph::ProfileGraph;
    use crate::profile::{AtomDistribution, Profile};
    use crate::regularity::decompose;
    use crate::rng::stream_rng;
    use nalgebra::DMatrix;
    use rand_distr::{Distribution, StandardNormal};
    use std::sync::Arc;

    fn random_cmatrix(n: usize, seed: u64) -> CMatrix {
        let mut rng = stream_rng(seed, 2);
        CMatrix::from_fn(n, n, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im) / 2.0f64.sqrt()
        })
    }

    #[test]
    fn schur_bound_identity() {
        let m = CMatrix::identity(6, 6);
        let bound = schur_bound(&m, 3, 1.0, 1.0).unwrap();
        assert!((bound - 1.0).abs() < 1e-12);
    }

    #[test]
    fn schur_bound_block_diagonal_is_exact() {
        let mut m = CMatrix::zeros(5, 5);
        let a = random_cmatrix(2, 3);
        let d = random_cmatrix(3, 4);
        m.view_mut((0, 0), (2, 2)).copy_from(&a);
        m.view_mut((2, 2), (3, 3)).copy_from(&d);
        let s_d = linalg::smin(&d);
        let s_a = linalg::smin(&a);
        let bound = schur_bound(&m, 2, s_d, s_a).unwrap();
        assert!((bound - s_d.min(s_a)).abs() < 1e-12);
        assert!((bound - linalg::smin(&m)).abs() < 1e-9);
    }

    #[test]
    fn schur_bound_validity_on_random_blocks() {
        for seed in 0..200u64 {
            let n = 4 + (seed as usize % 13) * 2;
            let m = random_cmatrix(n, 100 + seed);
            let split = n / 2;
            let d = m.view((split, split), (n - split, n - split)).into_owned();
            let s_d = linalg::smin(&d);
            if s_d <= 0.0 {
                continue;
            }
            let b = m.view((0, split), (split, n - split)).into_owned();
            let c = m.view((split, 0), (n - split, split)).into_owned();
            let a = m.view((0, 0), (split, split)).into_owned();
            let x = linalg::lu_solve(&d, &c).unwrap();
            let s_schur = linalg::smin(&(&a - &b * x));
            let bound = schur_bound(&m, split, s_d, s_schur).unwrap();
            let smin = linalg::smin(&m);
            assert!(
                bound <= smin + 1e-9 * linalg::opnorm(&m),
                "seed {seed}: certified {bound} > measured {smin}"
            );
        }
    }

    #[test]
    fn schur_bound_rejects_nonpositive_sd() {
        let m = CMatrix::identity(4, 4);
        assert!(schur_bound(&m, 2, 0.0, 1.0).is_err());
        assert!(schur_bound(&m, 2, -1.0, 1.0).is_err());
    }

    #[test]
    fn monotone_degradation_factor() {
        // adding off-diagonal mass of norm b degrades the certified bound by
        // exactly the factor (1 + b/s_D)⁻² at the formula level
        let (s_d, s_schur) = (0.8, 1.3);
        let clean = schur_bound_formula(0.0, 0.0, s_d, s_schur);
        for b in [0.1, 1.0, 7.5] {
            let degraded = schur_bound_formula(b, b, s_d, s_schur);
            let factor = (1.0 + b / s_d).powi(-2);
            assert!((degraded - clean * factor).abs() < 1e-12);
        }
    }

    fn upper_triangular_sample(
        n: usize,
        fill: f64,
        z: Complex64,
        seed: u64,
    ) -> MatrixSample {
        let profile = Profile::new(
            DMatrix::from_fn(n, n, |i, j| if i < j { fill } else { 0.0 }),
            None,
        )
        .unwrap();
        let shift = Shift::scalar_diagonal(n, z).unwrap();
        sample(
            &Arc::new(profile),
            &AtomDistribution::gaussian_real(),
            &shift,
            seed,
        )
        .unwrap()
    }

    #[test]
    fn triangular_pure_diagonal_is_exact() {
        let n = 12; // not a power of two: exercises the padding
        let profile = Profile::zeros(n);
        let z: Vec<Complex64> = (0..n)
            .map(|i| Complex64::from_polar(1.0 + i as f64 / n as f64, i as f64))
            .collect();
        let shift = Shift::diagonal(z.clone(), 1.0, 2.0).unwrap();
        let ms = sample(
            &Arc::new(profile),
            &AtomDistribution::rademacher(),
            &shift,
            3,
        )
        .unwrap();
        let cert = triangular_certificate(&ms, measured_noise_bound(&ms)).unwrap();
        let expect = (n as f64).sqrt(); // min |z_i| = 1
        assert!((cert.bound - expect).abs() < 1e-9);
        assert!(cert.consistent());
    }

    #[test]
    fn triangular_two_by_two_closed_form() {
        // M = [[z√2, ξ], [0, z√2]]: s_min² = (2a² + t² − t√(t² + 4a²))/2
        for seed in 0..50u64 {
            let ms = upper_triangular_sample(2, 1.0, Complex64::new(1.0, 0.0), seed);
            let a = 2.0f64.sqrt();
            let t = ms.matrix[(0, 1)].norm();
            let smin_exact =
                ((2.0 * a * a + t * t - t * (t * t + 4.0 * a * a).sqrt()) / 2.0).sqrt();
            match triangular_certificate(&ms, measured_noise_bound(&ms)) {
                Ok(cert) => {
                    assert!(
                        cert.bound <= smin_exact + 1e-9,
                        "seed {seed}: {} > {smin_exact}",
                        cert.bound
                    );
                    assert!(cert.consistent());
                }
                Err(Error::Certificate(_)) => {
                    // an enormous ξ can defeat the triangle bound at the
                    // maximal depth; that is a legitimate failure report
                    assert!(t >= a, "premature failure at t = {t}");
                }
                Err(e) => panic!("unexpected error {e}"),
            }
        }
    }

    #[test]
    fn triangular_dense_profile_valid_against_svd() {
        let mut positives = 0;
        for seed in 0..20u64 {
            let ms = upper_triangular_sample(16, 0.9, Complex64::new(1.0, 0.0), 300 + seed);
            let k = measured_noise_bound(&ms);
            match triangular_certificate(&ms, k) {
                Ok(cert) => {
                    positives += 1;
                    assert!(cert.bound > 0.0);
                    assert!(cert.bound <= ms.smin() + 1e-9 * ms.opnorm(), "seed {seed}");
                    assert!(cert.consistent());
                }
                Err(Error::Certificate(_)) => {}
                Err(e) => panic!("unexpected error {e}"),
            }
        }
        assert!(positives >= 18, "only {positives}/20 certificates completed");
    }

    #[test]
    fn triangular_rejects_lower_entries() {
        let profile = Profile::new(
            DMatrix::from_fn(3, 3, |i, j| if i > j { 0.5 } else { 0.0 }),
            None,
        )
        .unwrap();
        let shift = Shift::scalar_diagonal(3, Complex64::new(1.0, 0.0)).unwrap();
        let ms = sample(
            &Arc::new(profile),
            &AtomDistribution::gaussian_real(),
            &shift,
            1,
        )
        .unwrap();
        assert!(matches!(
            triangular_certificate(&ms, 1.0),
            Err(Error::Precondition(_))
        ));
    }

    fn decomposition_for(profile: &Profile, seed: u64) -> Decomposition {
        let g = ProfileGraph::new(profile.clone());
        decompose(&g, 0.05, 0.1, 0.3, seed).unwrap()
    }

    #[test]
    fn pipeline_zero_profile_is_exact() {
        let n = 32;
        let profile = Profile::zeros(n);
        let dec = decomposition_for(&profile, 5);
        let shift = Shift::scalar_diagonal(n, Complex64::new(1.5, 0.0)).unwrap();
        let ms = sample(
            &Arc::new(profile),
            &AtomDistribution::gaussian_real(),
            &shift,
            6,
        )
        .unwrap();
        let cert = pipeline_certificate(&ms, &dec).unwrap();
        let expect = 1.5 * (n as f64).sqrt();
        assert!(
            (cert.bound - expect).abs() < 1e-9,
            "bound {} vs exact {expect}",
            cert.bound
        );
        assert!(cert.consistent());
    }

    #[test]
    fn pipeline_all_ones_profile() {
        let n = 48;
        let profile = Profile::ones(n);
        let dec = decomposition_for(&profile, 7);
        assert!(dec.j_free().is_empty(), "all-ones profile has no free part");
        let shift = Shift::scalar_diagonal(n, Complex64::new(1.0, 0.0)).unwrap();
        let ms = sample(
            &Arc::new(profile),
            &AtomDistribution::gaussian_real(),
            &shift,
            8,
        )
        .unwrap();
        let cert = pipeline_certificate(&ms, &dec).unwrap();
        assert!(cert.bound <= ms.smin() + 1e-9 * ms.opnorm());
        assert!(cert.consistent());
    }

    #[test]
    fn pipeline_half_ones_profile_fixture() {
        // all ones in the left half columns, zeros in the right half
        let n = 64;
        let profile = Profile::new(
            DMatrix::from_fn(n, n, |_, j| f64::from(j < n / 2)),
            None,
        )
        .unwrap();
        let dec = decomposition_for(&profile, 9);
        let shift = Shift::scalar_diagonal(n, Complex64::new(1.0, 0.0)).unwrap();
        let mut positive = 0;
        for seed in 0..10u64 {
            let ms = sample(
                &Arc::new(profile.clone()),
                &AtomDistribution::gaussian_real(),
                &shift,
                20 + seed,
            )
            .unwrap();
            let cert = pipeline_certificate(&ms, &dec).unwrap();
            assert!(
                cert.bound <= ms.smin() + 1e-9 * ms.opnorm(),
                "seed {seed}: {} > {}",
                cert.bound,
                ms.smin()
            );
            assert!(cert.consistent());
            if cert.bound > 0.0 {
                positive += 1;
            }
        }
        assert!(positive >= 9, "only {positive}/10 positive bounds");
    }

    #[test]
    fn pipeline_requires_diagonal_shift() {
        let profile = Profile::ones(24);
        let dec = decomposition_for(&profile, 11);
        let ms = sample(
            &Arc::new(profile),
            &AtomDistribution::gaussian_real(),
            &Shift::None,
            3,
        )
        .unwrap();
        assert!(matches!(
            pipeline_certificate(&ms, &dec),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn pipeline_rejects_mismatched_decomposition() {
        let profile = Profile::ones(24);
        let dec = decomposition_for(&profile, 11);
        let other = Profile::zeros(32);
        let shift = Shift::scalar_diagonal(32, Complex64::new(1.0, 0.0)).unwrap();
        let ms = sample(
            &Arc::new(other),
            &AtomDistribution::gaussian_real(),
            &shift,
            3,
        )
        .unwrap();
        assert!(pipeline_certificate(&ms, &dec).is_err());
    }

    #[test]
    fn certificate_serializes_with_tree() {
        let ms = upper_triangular_sample(8, 0.5, Complex64::new(2.0, 0.0), 42);
        let cert = triangular_certificate(&ms, measured_noise_bound(&ms)).unwrap();
        let json = cert.to_json().unwrap();
        assert!(json.contains("\"node\""));
        let back: Certificate = serde_json::from_str(&json).unwrap();
        assert_eq!(back.bound, cert.bound);
        assert!(back.consistent());
    }
}
