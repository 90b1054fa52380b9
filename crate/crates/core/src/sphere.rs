//! Sphere geometry: compressible/incompressible vectors, deterministic nets
//! of subspace spheres, and restricted invertibility.

use std::collections::HashMap;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::exec;
use crate::linalg::{self, CMatrix, CVector};

/// Net cardinality constant: a ρ-net of the unit sphere of a k-complex-dim
/// subspace built here has at most `(C_NET/ρ)^{2k}` points.
pub const C_NET: f64 = 6.0;

/// Unit-norm tolerance for vectors handed to the sphere operations.
pub const UNIT_TOL: f64 = 1e-12;

fn check_unit(v: &CVector) -> Result<()> {
    if (v.norm() - 1.0).abs() > UNIT_TOL {
        return Err(Error::Precondition(format!(
            "vector must be unit norm (got ‖v‖ = {})",
            v.norm()
        )));
    }
    Ok(())
}

/// Euclidean distance from a unit vector to the union of coordinate
/// subspaces of dimension `k`: the norm of `v` with its `k` largest-modulus
/// entries removed. `v` lies in the compressible set `Comp(θ,ρ)` iff
/// `comp_distance(v, ⌊θm⌋) ≤ ρ`.
pub fn comp_distance(v: &CVector, k: usize) -> Result<f64> {
    check_unit(v)?;
    let m = v.len();
    if k == 0 || k > m {
        return Err(Error::Parameter(format!(
            "support size k = {k} out of range 1..={m}"
        )));
    }
    let mut mags: Vec<f64> = v.iter().map(|z| z.norm_sqr()).collect();
    mags.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(mags[k..].iter().sum::<f64>().max(0.0).sqrt())
}

/// Membership in `Comp(θ,ρ)`.
pub fn is_compressible(v: &CVector, theta: f64, rho: f64) -> Result<bool> {
    let m = v.len();
    let k = ((theta * m as f64).floor() as usize).clamp(1, m);
    Ok(comp_distance(v, k)? <= rho)
}

/// Essential-support sets of an incompressible vector:
/// `L⁺ = {j : |v_j| ≥ ρ/√m}` (size at least `θm`) and
/// `L = L⁺ ∩ {j : |v_j| ≤ λ/√(θm)}` (size at least `(1 − 1/λ²)θm`).
pub fn spread_sets(
    v: &CVector,
    theta: f64,
    rho: f64,
    lambda: f64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if lambda < 1.0 {
        return Err(Error::Parameter("lambda must be ≥ 1".into()));
    }
    if is_compressible(v, theta, rho)? {
        return Err(Error::Precondition(format!(
            "vector lies in Comp({theta},{rho}); spread sets need incompressibility"
        )));
    }
    let m = v.len() as f64;
    let lo = rho / m.sqrt();
    let hi = lambda / (theta * m).sqrt();
    let l_plus: Vec<usize> = (0..v.len()).filter(|&j| v[j].norm() >= lo).collect();
    let l: Vec<usize> = l_plus
        .iter()
        .copied()
        .filter(|&j| v[j].norm() <= hi)
        .collect();
    debug_assert!(l_plus.len() as f64 >= theta * m);
    debug_assert!(l.len() as f64 >= (1.0 - 1.0 / (lambda * lambda)) * theta * m);
    Ok((l_plus, l))
}

// ---------------------------------------------------------------------------
// Nets
// ---------------------------------------------------------------------------

/// Deterministic grid net of `V ∩ S^{m−1}` for a subspace `V` given by
/// orthonormal basis columns.
///
/// Points are stored as coefficient vectors over the basis (length `2k`
/// real), which is isometric to ambient distance; grid keys give O(1)
/// covering queries.
#[derive(Clone, Debug)]
pub struct Net {
    basis: CMatrix,
    rho: f64,
    pitch: f64,
    /// normalized coefficient vectors, flattened (2k reals per point)
    coeffs: Vec<f64>,
    /// grid cell -> point index
    index: HashMap<Vec<i64>, usize>,
    dim2k: usize,
}

impl Net {
    pub fn len(&self) -> usize {
        self.coeffs.len().checked_div(self.dim2k).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Complex dimension of the carrier subspace.
    pub fn subspace_dim(&self) -> usize {
        self.basis.ncols()
    }

    fn coeff(&self, i: usize) -> &[f64] {
        &self.coeffs[i * self.dim2k..(i + 1) * self.dim2k]
    }

    /// Materialize point `i` as an ambient vector.
    pub fn point(&self, i: usize) -> CVector {
        let c = self.coeff(i);
        let k = self.basis.ncols();
        let cv = CVector::from_fn(k, |d, _| Complex64::new(c[2 * d], c[2 * d + 1]));
        &self.basis * cv
    }

    fn coeff_of(&self, v: &CVector) -> Vec<f64> {
        let cv = self.basis.adjoint() * v;
        let mut out = Vec::with_capacity(self.dim2k);
        for d in 0..self.basis.ncols() {
            out.push(cv[d].re);
            out.push(cv[d].im);
        }
        out
    }

    /// Distance from a unit vector of the subspace to the net, via the grid
    /// cell lookup (falls back to a linear scan if the snap cell is vacant).
    pub fn distance_to(&self, v: &CVector) -> Option<f64> {
        if self.is_empty() {
            return None;
        }
        let c = self.coeff_of(v);
        let key: Vec<i64> = c.iter().map(|&x| (x / self.pitch).round() as i64).collect();
        let dist_to = |idx: usize| -> f64 {
            self.coeff(idx)
                .iter()
                .zip(&c)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        };
        if let Some(&i) = self.index.get(&key) {
            return Some(dist_to(i));
        }
        (0..self.len())
            .map(dist_to)
            .fold(None, |acc, d| Some(acc.map_or(d, |a: f64| a.min(d))))
    }

    /// Stream the materialized points to `<stem>.bin` (little-endian f64
    /// re/im interleaved, row-major) with a JSON sidecar
    /// `<stem>.json = {rho, k, cardinality}`.
    pub fn write_to_disk(&self, stem: &Path) -> Result<()> {
        let bin_path = stem.with_extension("bin");
        let json_path = stem.with_extension("json");
        let mut bin = std::io::BufWriter::new(std::fs::File::create(&bin_path)?);
        for i in 0..self.len() {
            let p = self.point(i);
            for z in p.iter() {
                bin.write_all(&z.re.to_le_bytes())?;
                bin.write_all(&z.im.to_le_bytes())?;
            }
        }
        bin.flush()?;
        let sidecar = serde_json::json!({
            "rho": self.rho,
            "k": self.subspace_dim(),
            "cardinality": self.len(),
        });
        std::fs::write(&json_path, serde_json::to_string_pretty(&sidecar)?)?;
        Ok(())
    }

    fn empty(basis: CMatrix, rho: f64) -> Net {
        Net {
            dim2k: 2 * basis.ncols(),
            basis,
            rho,
            pitch: 1.0,
            coeffs: Vec::new(),
            index: HashMap::new(),
        }
    }
}

fn check_orthonormal(basis: &CMatrix) -> Result<()> {
    let k = basis.ncols();
    if k == 0 {
        return Err(Error::Parameter("empty subspace has no sphere".into()));
    }
    let gram = basis.adjoint() * basis;
    let eye = CMatrix::identity(k, k);
    if linalg::opnorm(&(gram - eye)) > 1e-8 {
        return Err(Error::Precondition("basis is not orthonormal".into()));
    }
    Ok(())
}

/// Rounding budget: the largest `e` with `e/√(1−e) ≤ ρ`, so that snapping a
/// unit coefficient vector to the grid and renormalizing lands within `ρ`.
fn rounding_budget(rho: f64) -> f64 {
    let mut e = rho.min(0.9);
    for _ in 0..64 {
        e = rho * (1.0 - e).max(1e-9).sqrt();
    }
    e.min(0.95)
}

/// Deterministic ρ-net of `V ∩ S^{m−1}`: a real grid of pitch `2e/√(2k)` in
/// coefficient space, restricted to the annulus `‖g‖ ∈ [1−e, 1+e]` and
/// normalized to the sphere. Covering radius is at most ρ by construction
/// and the cardinality is at most `(C_NET/ρ)^{2k}`.
pub fn build_net(basis: &CMatrix, rho: f64) -> Result<Net> {
    check_orthonormal(basis)?;
    if rho <= 0.0 {
        return Err(Error::Parameter("rho must be positive".into()));
    }
    let k = basis.ncols();
    let dim2k = 2 * k;

    // Any single sphere point is a 2-net (the sphere has diameter 2).
    if rho >= 2.0 {
        let mut net = Net::empty(basis.clone(), rho);
        net.pitch = 4.0;
        let mut c = vec![0.0; dim2k];
        c[0] = 1.0;
        let key: Vec<i64> = c.iter().map(|&x| (x / net.pitch).round() as i64).collect();
        net.index.insert(key, 0);
        net.coeffs = c;
        return Ok(net);
    }

    let rho_eff = rho.min(0.95);
    let e = rounding_budget(rho_eff);
    let pitch = 2.0 * e / (dim2k as f64).sqrt();
    let hi = 1.0 + e;
    let lo = 1.0 - e;
    let max_coord = (hi / pitch).floor() as i64;

    let mut coeffs: Vec<f64> = Vec::new();
    let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
    let mut stack: Vec<i64> = Vec::with_capacity(dim2k);
    enumerate_annulus(dim2k, pitch, lo, hi, max_coord, &mut stack, &mut |cell| {
        let mut c: Vec<f64> = cell.iter().map(|&g| g as f64 * pitch).collect();
        let norm = c.iter().map(|x| x * x).sum::<f64>().sqrt();
        let idx = coeffs.len() / dim2k;
        for x in &mut c {
            *x /= norm;
        }
        index.insert(cell.to_vec(), idx);
        coeffs.extend_from_slice(&c);
    });

    let net = Net {
        basis: basis.clone(),
        rho,
        pitch,
        coeffs,
        index,
        dim2k,
    };
    let bound = (C_NET / rho).powi(dim2k as i32);
    if (net.len() as f64) > bound {
        return Err(Error::Invariant {
            context: "build_net",
            detail: format!("cardinality {} exceeds ({C_NET}/{rho})^{dim2k}", net.len()),
        });
    }
    Ok(net)
}

fn enumerate_annulus(
    dims: usize,
    pitch: f64,
    lo: f64,
    hi: f64,
    max_coord: i64,
    stack: &mut Vec<i64>,
    emit: &mut impl FnMut(&[i64]),
) {
    if stack.len() == dims {
        let norm: f64 = stack
            .iter()
            .map(|&g| {
                let x = g as f64 * pitch;
                x * x
            })
            .sum::<f64>()
            .sqrt();
        if norm >= lo && norm <= hi {
            emit(stack);
        }
        return;
    }
    let partial: f64 = stack
        .iter()
        .map(|&g| {
            let x = g as f64 * pitch;
            x * x
        })
        .sum();
    for g in -max_coord..=max_coord {
        let x = g as f64 * pitch;
        if partial + x * x > hi * hi {
            continue;
        }
        stack.push(g);
        enumerate_annulus(dims, pitch, lo, hi, max_coord, stack, emit);
        stack.pop();
    }
}

// ---------------------------------------------------------------------------
// Restricted invertibility
// ---------------------------------------------------------------------------

/// Barrier-potential greedy column selection: given vectors `v_1..v_n` in
/// `C^m` with `Σ v_i v_iᴴ = I_m`, selects `|I| = ⌊(1−β)²m⌋` indices with
/// `λ_{|I|}(Σ_{i∈I} v_i v_iᴴ) ≥ β²m/n`. A vector is admitted only when its
/// quadratic form against the shifted resolvent crosses the barrier
/// (`vᴴ(A−bI)⁻¹v ≤ −1`), which keeps the new eigenvalue above the barrier;
/// the final eigenvalue bound is verified before returning.
pub fn restricted_invertibility(vectors: &[CVector], beta: f64) -> Result<Vec<usize>> {
    if vectors.is_empty() {
        return Err(Error::Parameter("no vectors".into()));
    }
    if !(0.0 < beta && beta < 1.0) {
        return Err(Error::Parameter("beta must lie in (0,1)".into()));
    }
    let n = vectors.len();
    let m = vectors[0].len();
    if vectors.iter().any(|v| v.len() != m) {
        return Err(Error::Dimension("vectors of mixed dimension".into()));
    }
    let mut s = CMatrix::zeros(m, m);
    for v in vectors {
        s += v * v.adjoint();
    }
    if linalg::opnorm(&(s - CMatrix::identity(m, m))) > 1e-8 {
        return Err(Error::Precondition(
            "vectors are not an isotropic frame (Σ v vᴴ ≠ I)".into(),
        ));
    }

    let k = ((1.0 - beta) * (1.0 - beta) * m as f64).floor() as usize;
    if k == 0 {
        return Err(Error::Parameter(format!(
            "empty selection: ⌊(1−{beta})²·{m}⌋ = 0"
        )));
    }

    let target = beta * beta * m as f64 / n as f64;
    // Fixed barrier slightly above the guarantee: a vector is admitted only
    // when it pushes a new eigenvalue across it, so every selected
    // eigenvalue stays above the barrier (rank-one updates never lower the
    // spectrum) and the final λ_k clears the target.
    let barrier = 1.05 * target;
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let mut a = CMatrix::zeros(m, m);

    for _ in 0..k {
        // Eigendecompose the running sum once per step; candidate scores are
        // then cheap in the eigenbasis.
        let eig = a.clone().symmetric_eigen();
        let lambdas: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let basis_adj = eig.eigenvectors.adjoint();
        let mut best: Option<(f64, usize)> = None;
        for i in 0..n {
            if taken[i] {
                continue;
            }
            let w = &basis_adj * &vectors[i];
            let q: f64 = (0..m).map(|d| w[d].norm_sqr() / (lambdas[d] - barrier)).sum();
            if q <= -1.0 && best.is_none_or(|(bq, _)| q < bq) {
                best = Some((q, i));
            }
        }
        let Some((_, i)) = best else {
            return Err(Error::Invariant {
                context: "restricted_invertibility",
                detail: format!(
                    "no candidate crosses the barrier {barrier} after {} selections",
                    chosen.len()
                ),
            });
        };
        a += &vectors[i] * vectors[i].adjoint();
        taken[i] = true;
        chosen.push(i);
    }

    let ev = linalg::hermitian_eigenvalues(&a);
    let lambda_k = ev[k - 1];
    if lambda_k + 1e-12 < target {
        return Err(Error::Invariant {
            context: "restricted_invertibility",
            detail: format!("λ_{k} = {lambda_k} below the guarantee {target}"),
        });
    }
    chosen.sort_unstable();
    Ok(chosen)
}

/// Row selection preserving the smallest singular value: for `M` (`n×m`,
/// `n ≥ m`) with `s_m(M) ≥ ε₀√n`, picks `|I| = ⌊(1−β)²m⌋` rows with
/// `s_{|I|}(M_{I,·}) ≥ β·ε₀·√m`, via the SVD and restricted invertibility on
/// the rows of the left factor.
pub fn restricted_rows(m_mat: &CMatrix, eps0: f64, beta: f64) -> Result<Vec<usize>> {
    let (n, m) = m_mat.shape();
    if n < m {
        return Err(Error::Precondition(format!("need n ≥ m, got {n} < {m}")));
    }
    if eps0 <= 0.0 {
        return Err(Error::Parameter("eps0 must be positive".into()));
    }
    let smin = linalg::smin(m_mat);
    if smin < eps0 * (n as f64).sqrt() * (1.0 - 1e-10) {
        return Err(Error::Precondition(format!(
            "s_m(M) = {smin} below ε₀√n = {}",
            eps0 * (n as f64).sqrt()
        )));
    }
    let svd = m_mat.clone().svd(true, false);
    let u = svd.u.as_ref().expect("u requested");
    let rows: Vec<CVector> = (0..n).map(|i| u.row(i).adjoint()).collect();
    let selected = restricted_invertibility(&rows, beta)?;
    let sub = linalg::submatrix(m_mat, &selected, &(0..m).collect::<Vec<_>>());
    let s_sel = linalg::smin(&sub);
    let bound = beta * eps0 * (m as f64).sqrt();
    if s_sel + 1e-9 * linalg::opnorm(m_mat) < bound {
        return Err(Error::Invariant {
            context: "restricted_rows",
            detail: format!("s_|I| = {s_sel} below β·ε₀·√m = {bound}"),
        });
    }
    Ok(selected)
}

/// ε-net of the kernel sphere of a full-row-rank submatrix: computes an
/// orthonormal kernel basis (nullspace tolerance `1e-10·‖M‖`) and builds the
/// grid net on it. A square invertible input yields the empty net.
pub fn kernel_net(m_sub: &CMatrix, eps: f64) -> Result<Net> {
    let (rows, cols) = m_sub.shape();
    let scale = linalg::opnorm(m_sub);
    let tol = 1e-10 * scale.max(1e-300);
    let rank = linalg::rank(m_sub, tol);
    if rank != rows.min(cols) || rows > cols {
        return Err(Error::Precondition(format!(
            "submatrix must have full row rank: rank {rank} of {rows}×{cols}"
        )));
    }
    let kernel = linalg::nullspace(m_sub, tol);
    let kdim = kernel.ncols();
    if kdim != cols - rows {
        return Err(Error::Invariant {
            context: "kernel_net",
            detail: format!("kernel dimension {kdim} does not match {cols} − {rows}"),
        });
    }
    if kdim == 0 {
        return Ok(Net::empty(CMatrix::zeros(cols, 0), eps));
    }
    let net = build_net(&kernel, eps)?;
    let bound = (C_NET / eps).powi(2 * kdim as i32);
    if (net.len() as f64) > bound {
        return Err(Error::Invariant {
            context: "kernel_net",
            detail: format!("cardinality {} exceeds (C/ε)^{}", net.len(), 2 * kdim),
        });
    }
    Ok(net)
}

/// Covering audit: sample `count` random points of the carrier sphere and
/// report the worst distance to the net. Returns `None` for empty nets.
pub fn covering_audit(net: &Net, count: usize, seed: u64) -> Option<f64> {
    if net.is_empty() {
        return None;
    }
    let k = net.subspace_dim();
    let basis = net.basis.clone();
    let worst = exec::map_indexed(count, |t| {
        let mut rng = crate::rng::stream_rng(seed, t as u64);
        let mut c = CVector::from_fn(k, |_, _| {
            let re: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
            let im: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
            Complex64::new(re, im)
        });
        let norm = c.norm();
        c /= Complex64::new(norm, 0.0);
        let v = &basis * c;
        net.distance_to(&v).expect("nonempty net")
    });
    worst
        .into_iter()
        .fold(None, |acc, d| Some(acc.map_or(d, |a: f64| a.max(d))))
}
