//! Sampling of structured random matrices and Monte Carlo tail experiments.
//!
//! A sample is `M = A∘X + B` where `A` is the deviation profile, `X` the iid
//! atom noise and `B` the mean profile plus an optional shift (`Z√n` on the
//! diagonal, or a general matrix). Sampling is deterministic given the seed;
//! trials of an experiment derive their streams from `(seed, trial)` so the
//! result tables are identical under any execution order.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec;
use crate::linalg::{self, CMatrix};
use crate::profile::{AtomDistribution, Profile};
use crate::rng::stream_rng;

/// Deterministic shift added to `A∘X + means`.
#[derive(Clone, Debug)]
pub enum Shift {
    None,
    /// Diagonal `Z√n`: entry `(i,i)` gains `z_i·√n`. The moduli must lie in
    /// `[r0, k0]`.
    Diagonal { z: Vec<Complex64>, r0: f64, k0: f64 },
    General(CMatrix),
}

impl Shift {
    /// Constant diagonal `z·√n`.
    pub fn scalar_diagonal(n: usize, z: Complex64) -> Result<Shift> {
        let r = z.norm();
        if r <= 0.0 {
            return Err(Error::Parameter("diagonal shift needs |z| > 0".into()));
        }
        Ok(Shift::Diagonal {
            z: vec![z; n],
            r0: r,
            k0: r,
        })
    }

    pub fn diagonal(z: Vec<Complex64>, r0: f64, k0: f64) -> Result<Shift> {
        if !(0.0 < r0 && r0 <= k0) {
            return Err(Error::Parameter(format!(
                "need 0 < r0 ≤ k0, got r0={r0}, k0={k0}"
            )));
        }
        for (i, zi) in z.iter().enumerate() {
            let m = zi.norm();
            if m < r0 * (1.0 - 1e-12) || m > k0 * (1.0 + 1e-12) {
                return Err(Error::Parameter(format!(
                    "|z_{i}| = {m} outside [{r0}, {k0}]"
                )));
            }
        }
        Ok(Shift::Diagonal { z, r0, k0 })
    }

    pub fn id(&self) -> String {
        match self {
            Shift::None => "none".into(),
            Shift::Diagonal { r0, k0, .. } => format!("diag[{r0},{k0}]"),
            Shift::General(b) => format!("general{}x{}", b.nrows(), b.ncols()),
        }
    }
}

/// A sampled structured random matrix together with its provenance.
#[derive(Clone, Debug)]
pub struct MatrixSample {
    pub matrix: CMatrix,
    pub seed: u64,
    pub profile: Arc<Profile>,
    pub atom: AtomDistribution,
    pub shift: Shift,
}

impl MatrixSample {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// The noise part `A∘X` (matrix minus means minus shift).
    pub fn noise(&self) -> CMatrix {
        let mut out = self.matrix.clone();
        if let Some(b) = self.profile.means() {
            out -= b;
        }
        match &self.shift {
            Shift::None => {}
            Shift::Diagonal { z, .. } => {
                let scale = (self.matrix.nrows() as f64).sqrt();
                for (i, zi) in z.iter().enumerate() {
                    out[(i, i)] -= zi * scale;
                }
            }
            Shift::General(b) => out -= b,
        }
        out
    }

    pub fn smin(&self) -> f64 {
        linalg::smin(&self.matrix)
    }

    pub fn opnorm(&self) -> f64 {
        linalg::opnorm(&self.matrix)
    }
}

/// Draw `M = A∘X + B`. Entries of `X` are independent draws from the atom in
/// row-major order, so a fixed seed replays bit-identically.
pub fn sample(
    profile: &Arc<Profile>,
    atom: &AtomDistribution,
    shift: &Shift,
    seed: u64,
) -> Result<MatrixSample> {
    let (n, m) = (profile.nrows(), profile.ncols());
    match shift {
        Shift::Diagonal { z, r0, k0 } => {
            if n != m {
                return Err(Error::Dimension(
                    "diagonal shift needs a square profile".into(),
                ));
            }
            if z.len() != n {
                return Err(Error::Dimension(format!(
                    "shift length {} != n = {n}",
                    z.len()
                )));
            }
            for (i, zi) in z.iter().enumerate() {
                let md = zi.norm();
                if md < r0 * (1.0 - 1e-12) || md > k0 * (1.0 + 1e-12) {
                    return Err(Error::Parameter(format!(
                        "|z_{i}| = {md} violates [{r0}, {k0}]"
                    )));
                }
            }
        }
        Shift::General(b) => {
            if b.shape() != (n, m) {
                return Err(Error::Dimension("shift shape mismatch".into()));
            }
        }
        Shift::None => {}
    }

    let mut rng = stream_rng(seed, 0);
    let mut matrix = CMatrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let xi = atom.sample(&mut rng);
            matrix[(i, j)] = profile.sigma()[(i, j)] * xi;
        }
    }
    if let Some(b) = profile.means() {
        matrix += b;
    }
    match shift {
        Shift::None => {}
        Shift::Diagonal { z, .. } => {
            let scale = (n as f64).sqrt();
            for (i, zi) in z.iter().enumerate() {
                matrix[(i, i)] += zi * scale;
            }
        }
        Shift::General(b) => matrix += b,
    }
    Ok(MatrixSample {
        matrix,
        seed,
        profile: Arc::clone(profile),
        atom: atom.clone(),
        shift: shift.clone(),
    })
}

/// Profile that forces singularity: a `k×m` zero block (rows `0..k`, columns
/// `0..m`) with ones elsewhere. Any zero-mean sample is exactly singular
/// when `k + m > n` (the first `k` rows live in an `(n−m)`-dimensional
/// coordinate subspace).
pub fn singular_by_construction(n: usize, k: usize, m: usize) -> Result<Profile> {
    if k > n || m > n {
        return Err(Error::Parameter("block exceeds matrix".into()));
    }
    if k + m <= n {
        return Err(Error::Parameter(format!(
            "zero block {k}×{m} does not force singularity at n={n} (need k+m > n)"
        )));
    }
    let sigma = nalgebra::DMatrix::from_fn(n, n, |i, j| f64::from(i >= k || j >= m));
    Profile::new(sigma, None)
}

// ---------------------------------------------------------------------------
// Tail experiments
// ---------------------------------------------------------------------------

/// Threshold grid for a tail experiment: `s_n ≤ t/√n` over a `t` grid or
/// `s_n ≤ n^{−β}` over a `β` grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum TailGrid {
    T(Vec<f64>),
    Beta(Vec<f64>),
}

impl TailGrid {
    pub fn values(&self) -> &[f64] {
        match self {
            TailGrid::T(v) | TailGrid::Beta(v) => v,
        }
    }

    /// Threshold on `s_n` for one gridpoint at size `n`.
    pub fn threshold(&self, gridpoint: f64, n: usize) -> f64 {
        match self {
            TailGrid::T(_) => gridpoint / (n as f64).sqrt(),
            TailGrid::Beta(_) => (n as f64).powf(-gridpoint),
        }
    }
}

/// Parameters of a Monte Carlo tail experiment.
#[derive(Clone, Debug)]
pub struct TailSpec {
    pub profile: Arc<Profile>,
    pub atom: AtomDistribution,
    pub shift: Shift,
    pub grid: TailGrid,
    pub trials: usize,
    /// Boundedness cutoff: the event intersects `‖M‖ ≤ K√n`.
    pub k_bound: f64,
    pub seed: u64,
}

/// One gridpoint row of the result table.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TailRow {
    pub n: usize,
    pub atom: String,
    pub profile_id: String,
    pub shift_id: String,
    pub gridpoint: f64,
    pub hits: usize,
    pub trials: usize,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub k: f64,
    pub seed: u64,
}

/// Result table plus per-trial measurements (for reuse by callers).
#[derive(Clone, Debug)]
pub struct TailTable {
    pub rows: Vec<TailRow>,
    pub smins: Vec<f64>,
    pub opnorms: Vec<f64>,
    /// trials on which the boundedness event held
    pub bounded: usize,
}

/// 95% Wilson score interval for `hits` successes in `n` trials.
pub fn wilson_interval(hits: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054_f64;
    let nf = n as f64;
    let p = hits as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = p + z2 / (2.0 * nf);
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let lo = if hits == 0 {
        0.0
    } else {
        ((center - half) / denom).max(0.0)
    };
    let hi = if hits == n {
        1.0
    } else {
        ((center + half) / denom).min(1.0)
    };
    (lo, hi)
}

/// Run the experiment: for each gridpoint, the empirical frequency of
/// `{s_n ≤ threshold} ∧ {‖M‖ ≤ K√n}` with a Wilson confidence interval.
pub fn tail_experiment(spec: &TailSpec) -> Result<TailTable> {
    if spec.trials < 100 {
        return Err(Error::Parameter(format!(
            "need at least 100 trials, got {}",
            spec.trials
        )));
    }
    if spec.grid.values().is_empty() {
        return Err(Error::Parameter("empty grid".into()));
    }
    let n = spec.profile.nrows();
    if n != spec.profile.ncols() {
        return Err(Error::Dimension("tail experiments need square profiles".into()));
    }

    let measured: Vec<Result<(f64, f64)>> = exec::map_indexed(spec.trials, |t| {
        let ms = sample(
            &spec.profile,
            &spec.atom,
            &spec.shift,
            derive_trial_seed(spec.seed, t as u64),
        )?;
        Ok((ms.smin(), ms.opnorm()))
    });
    let mut smins = Vec::with_capacity(spec.trials);
    let mut opnorms = Vec::with_capacity(spec.trials);
    for r in measured {
        let (s, o) = r?;
        smins.push(s);
        opnorms.push(o);
    }

    let bound_cut = spec.k_bound * (n as f64).sqrt();
    let bounded = opnorms.iter().filter(|&&o| o <= bound_cut).count();
    let profile_id = format!("{}x{}", n, spec.profile.ncols());
    let rows = spec
        .grid
        .values()
        .iter()
        .map(|&g| {
            let cut = spec.grid.threshold(g, n);
            let hits = smins
                .iter()
                .zip(&opnorms)
                .filter(|&(&s, &o)| s <= cut && o <= bound_cut)
                .count();
            let (lo, hi) = wilson_interval(hits, spec.trials);
            TailRow {
                n,
                atom: spec.atom.to_string(),
                profile_id: profile_id.clone(),
                shift_id: spec.shift.id(),
                gridpoint: g,
                hits,
                trials: spec.trials,
                wilson_lo: lo,
                wilson_hi: hi,
                k: spec.k_bound,
                seed: spec.seed,
            }
        })
        .collect();
    Ok(TailTable {
        rows,
        smins,
        opnorms,
        bounded,
    })
}

/// Per-trial stream id. Public so sequential re-implementations (benches,
/// tests) can reproduce the exact per-trial samples.
pub fn derive_trial_seed(seed: u64, trial: u64) -> u64 {
    seed
        .wrapping_mul(0x9E3779B97F4A7C15)
        .wrapping_add(trial.wrapping_mul(0xD1B54A32D192ED03))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::band_profile;
    use rand::Rng as _;

    fn arc(p: Profile) -> Arc<Profile> {
        Arc::new(p)
    }

    #[test]
    fn zero_profile_with_diagonal_shift_is_diagonal() {
        let n = 6;
        let p = arc(Profile::zeros(n));
        let atom = AtomDistribution::gaussian_real();
        let z = Complex64::new(2.0, 1.0);
        let shift = Shift::scalar_diagonal(n, z).unwrap();
        let ms = sample(&p, &atom, &shift, 5).unwrap();
        let scale = (n as f64).sqrt();
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { z * scale } else { Complex64::default() };
                assert_eq!(ms.matrix[(i, j)], expect);
            }
        }
    }

    #[test]
    fn all_ones_rademacher_is_sign_matrix() {
        let p = arc(Profile::ones(8));
        let atom = AtomDistribution::rademacher();
        let ms = sample(&p, &atom, &Shift::None, 3).unwrap();
        for z in ms.matrix.iter() {
            assert!((z.norm() - 1.0).abs() < 1e-15 && z.im == 0.0);
        }
    }

    #[test]
    fn fixed_seed_replays_bit_identically() {
        let p = arc(band_profile(12, 0.25, 0.9).unwrap());
        let atom = AtomDistribution::gaussian_complex();
        let a = sample(&p, &atom, &Shift::None, 42).unwrap();
        let b = sample(&p, &atom, &Shift::None, 42).unwrap();
        assert_eq!(a.matrix, b.matrix);
        let c = sample(&p, &atom, &Shift::None, 43).unwrap();
        assert_ne!(a.matrix, c.matrix);
    }

    #[test]
    fn noise_recovers_a_circ_x() {
        let n = 5;
        let mut rng = crate::rng::stream_rng(9, 9);
        let sigma = nalgebra::DMatrix::from_fn(n, n, |_, _| rng.random::<f64>());
        let means = nalgebra::DMatrix::from_fn(n, n, |_, _| {
            Complex64::new(rng.random::<f64>(), rng.random::<f64>())
        });
        let p = arc(Profile::new(sigma, Some(means)).unwrap());
        let shift = Shift::scalar_diagonal(n, Complex64::new(1.0, 0.0)).unwrap();
        let ms = sample(&p, &AtomDistribution::gaussian_real(), &shift, 4).unwrap();
        let noise = ms.noise();
        // reconstruct: matrix == noise + means + diag
        let mut recon = noise.clone();
        recon += p.means().unwrap();
        for i in 0..n {
            recon[(i, i)] += Complex64::new((n as f64).sqrt(), 0.0);
        }
        assert!((recon - &ms.matrix).norm() < 1e-12);
    }

    #[test]
    fn smin_opnorm_diagonal_examples() {
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(2.0, 0.0),
            Complex64::new(3.0, 0.0),
        ]));
        assert!((linalg::smin(&m) - 1.0).abs() < 1e-12);
        assert!((linalg::opnorm(&m) - 3.0).abs() < 1e-12);
        let id = CMatrix::identity(7, 7);
        assert!((linalg::smin(&id) - 1.0).abs() < 1e-12);
        assert!((linalg::opnorm(&id) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn smin_matches_inverse_norm_oracle() {
        let p = arc(Profile::ones(50));
        let ms = sample(&p, &AtomDistribution::gaussian_real(), &Shift::None, 11).unwrap();
        let smin = ms.smin();
        let inv = ms
            .matrix
            .clone()
            .lu()
            .try_inverse()
            .expect("generic gaussian matrix is invertible");
        let oracle = 1.0 / linalg::opnorm(&inv);
        assert!(
            (smin - oracle).abs() <= 1e-8 * smin.max(oracle),
            "smin {smin} vs 1/‖M⁻¹‖ {oracle}"
        );
    }

    #[test]
    fn phase_invariance_of_singular_values() {
        let p = arc(Profile::ones(24));
        let ms = sample(&p, &AtomDistribution::gaussian_complex(), &Shift::None, 8).unwrap();
        let phase = Complex64::from_polar(1.0, 1.234);
        let rotated = ms.matrix.map(|z| z * phase);
        let a = linalg::singular_values(&ms.matrix);
        let b = linalg::singular_values(&rotated);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn large_shift_triangle_inequality() {
        // B = K√n·I with large K: s_n(M) ≥ K√n − ‖A∘X‖ on every sample
        let n = 32;
        let p = arc(Profile::ones(n));
        let k = 40.0;
        let shift = Shift::scalar_diagonal(n, Complex64::new(k, 0.0)).unwrap();
        for seed in 0..5 {
            let ms = sample(&p, &AtomDistribution::gaussian_real(), &shift, seed).unwrap();
            let noise_norm = linalg::opnorm(&ms.noise());
            assert!(ms.smin() >= k * (n as f64).sqrt() - noise_norm - 1e-9);
        }
    }

    #[test]
    fn singular_by_construction_examples() {
        // k + m = n is not singular-forcing
        assert!(singular_by_construction(4, 2, 2).is_err());
        let p = singular_by_construction(4, 3, 2).unwrap();
        let ms = sample(
            &arc(p),
            &AtomDistribution::gaussian_real(),
            &Shift::None,
            1,
        )
        .unwrap();
        assert!(linalg::rank(&ms.matrix, 1e-9 * ms.opnorm()) <= 3);
    }

    #[test]
    fn singular_profile_samples_are_singular() {
        let p = arc(singular_by_construction(10, 6, 5).unwrap());
        for seed in 0..100 {
            for atom in [AtomDistribution::rademacher(), AtomDistribution::gaussian_real()] {
                let ms = sample(&p, &atom, &Shift::None, seed).unwrap();
                assert!(
                    ms.smin() <= 1e-10 * ms.opnorm(),
                    "seed {seed} atom {atom} smin {}",
                    ms.smin()
                );
            }
        }
    }

    #[test]
    fn diagonal_shift_validates_moduli() {
        let z = vec![Complex64::new(0.5, 0.0), Complex64::new(3.0, 0.0)];
        assert!(Shift::diagonal(z, 1.0, 2.0).is_err());
        let ok = Shift::diagonal(
            vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0)],
            1.0,
            2.0,
        );
        assert!(ok.is_ok());
    }

    #[test]
    fn tail_experiment_zero_threshold_never_hits() {
        let p = arc(Profile::ones(16));
        let spec = TailSpec {
            profile: p,
            atom: AtomDistribution::gaussian_real(),
            shift: Shift::None,
            grid: TailGrid::T(vec![0.0, 0.5, 1.0]),
            trials: 100,
            k_bound: 8.0,
            seed: 21,
        };
        let table = tail_experiment(&spec).unwrap();
        assert_eq!(table.rows[0].hits, 0, "t = 0 with a continuous atom");
        // monotone in t
        assert!(table.rows[0].hits <= table.rows[1].hits);
        assert!(table.rows[1].hits <= table.rows[2].hits);
        for row in &table.rows {
            assert!(row.wilson_lo <= row.hits as f64 / row.trials as f64);
            assert!(row.wilson_hi >= row.hits as f64 / row.trials as f64);
        }
    }

    #[test]
    fn tail_experiment_band_profile_monotone() {
        let p = arc(band_profile(32, 0.2, 1.0).unwrap());
        let spec = TailSpec {
            profile: p,
            atom: AtomDistribution::gaussian_real(),
            shift: Shift::None,
            grid: TailGrid::T(vec![0.02, 0.1, 0.3, 0.5]),
            trials: 150,
            k_bound: 8.0,
            seed: 77,
        };
        let table = tail_experiment(&spec).unwrap();
        for w in table.rows.windows(2) {
            assert!(w[0].hits <= w[1].hits);
        }
        assert_eq!(table.bounded, 150, "K = 8 bounds every sample at n = 32");
    }

    #[test]
    fn boundedness_frequency_grows_with_k() {
        let n = 256;
        let p = arc(Profile::ones(n));
        let trials = 20;
        let mut freqs = Vec::new();
        for k in [2.0, 4.0, 8.0] {
            let mut bounded = 0;
            for t in 0..trials {
                let ms = sample(
                    &p,
                    &AtomDistribution::gaussian_real(),
                    &Shift::None,
                    derive_trial_seed(5, t),
                )
                .unwrap();
                if ms.opnorm() <= k * (n as f64).sqrt() {
                    bounded += 1;
                }
            }
            freqs.push(bounded);
        }
        assert!(freqs[0] <= freqs[1] && freqs[1] <= freqs[2]);
        assert_eq!(freqs[2], trials, "K = 8 captures every gaussian sample");
    }

    #[test]
    fn wilson_interval_sanity() {
        let (lo, hi) = wilson_interval(0, 100);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.06);
        let (lo, hi) = wilson_interval(100, 100);
        assert!(lo > 0.94);
        assert_eq!(hi, 1.0);
        let (lo, hi) = wilson_interval(50, 100);
        assert!(lo < 0.5 && hi > 0.5);
    }

    #[test]
    fn tail_experiment_rejects_small_trial_counts() {
        let p = arc(Profile::ones(4));
        let spec = TailSpec {
            profile: p,
            atom: AtomDistribution::rademacher(),
            shift: Shift::None,
            grid: TailGrid::T(vec![0.1]),
            trials: 10,
            k_bound: 4.0,
            seed: 0,
        };
        assert!(tail_experiment(&spec).is_err());
    }
}
