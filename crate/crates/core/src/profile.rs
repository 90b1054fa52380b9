//! Standard-deviation/mean profiles and atom distributions.
//!
//! A profile holds the deterministic data of a structured random matrix: an
//! `n×m` matrix of entrywise standard deviations `σ_ij ∈ [0,1]` and an
//! optional matrix of complex means. The atom distribution is the common
//! centered, unit-variance law of the noise entries.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal, StudentT};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Rng};

/// Samples used for Monte Carlo moment estimates.
pub const MOMENT_SAMPLES: usize = 1_000_000;

// ---------------------------------------------------------------------------
// Profile
// ---------------------------------------------------------------------------

/// Standard-deviation profile with an optional mean profile.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    sigma: DMatrix<f64>,
    means: Option<DMatrix<Complex64>>,
}

impl Profile {
    /// Build a profile, validating `0 ≤ σ_ij ≤ 1` and matching shapes.
    pub fn new(sigma: DMatrix<f64>, means: Option<DMatrix<Complex64>>) -> Result<Self> {
        if sigma.nrows() == 0 || sigma.ncols() == 0 {
            return Err(Error::Parameter("profile must be non-empty".into()));
        }
        for (idx, &s) in sigma.iter().enumerate() {
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::Parameter(format!(
                    "sigma entry {idx} = {s} outside [0,1]"
                )));
            }
        }
        if let Some(b) = &means {
            if b.shape() != sigma.shape() {
                return Err(Error::Dimension(format!(
                    "means shape {:?} != sigma shape {:?}",
                    b.shape(),
                    sigma.shape()
                )));
            }
        }
        Ok(Profile { sigma, means })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Profile::new(DMatrix::from_fn(n, m, |i, j| rows[i][j]), None)
    }

    pub fn constant(n: usize, m: usize, value: f64) -> Result<Self> {
        Profile::new(DMatrix::from_element(n, m, value), None)
    }

    pub fn ones(n: usize) -> Self {
        Profile::constant(n, n, 1.0).expect("1.0 is a valid sigma")
    }

    pub fn zeros(n: usize) -> Self {
        Profile::constant(n, n, 0.0).expect("0.0 is a valid sigma")
    }

    pub fn nrows(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.sigma.ncols()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn means(&self) -> Option<&DMatrix<Complex64>> {
        self.means.as_ref()
    }

    pub fn with_means(mut self, means: DMatrix<Complex64>) -> Result<Self> {
        if means.shape() != self.sigma.shape() {
            return Err(Error::Dimension("means shape mismatch".into()));
        }
        self.means = Some(means);
        Ok(self)
    }

    /// Transposed profile (means transposed alongside).
    pub fn transpose(&self) -> Profile {
        Profile {
            sigma: self.sigma.transpose(),
            means: self.means.as_ref().map(|b| b.transpose()),
        }
    }

    /// Read the plain-text interchange format:
    /// a header `n m has_means`, `n` rows of `m` reals for sigma, then (if
    /// `has_means` is 1) `n` rows of `m` comma-joined `re,im` pairs.
    pub fn read_from<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parameter("empty profile file".into()))??;
        let head: Vec<&str> = header.split_whitespace().collect();
        if head.len() != 3 {
            return Err(Error::Parameter(format!(
                "header line must be `n m has_means`, got `{header}`"
            )));
        }
        let n: usize = head[0]
            .parse()
            .map_err(|_| Error::Parameter(format!("bad n `{}` in header", head[0])))?;
        let m: usize = head[1]
            .parse()
            .map_err(|_| Error::Parameter(format!("bad m `{}` in header", head[1])))?;
        let has_means = match head[2] {
            "0" => false,
            "1" => true,
            other => {
                return Err(Error::Parameter(format!(
                    "has_means must be 0 or 1, got `{other}`"
                )))
            }
        };

        let mut take_row = |what: &str, row: usize| -> Result<Vec<String>> {
            let line = lines.next().ok_or_else(|| {
                Error::Parameter(format!("missing {what} row {row} (file truncated)"))
            })??;
            let fields: Vec<String> = line.split_whitespace().map(str::to_string).collect();
            if fields.len() != m {
                return Err(Error::Parameter(format!(
                    "{what} row {row}: expected {m} fields, got {}",
                    fields.len()
                )));
            }
            Ok(fields)
        };

        let mut sigma = DMatrix::zeros(n, m);
        for i in 0..n {
            for (j, f) in take_row("sigma", i)?.iter().enumerate() {
                sigma[(i, j)] = f
                    .parse()
                    .map_err(|_| Error::Parameter(format!("sigma row {i}: bad real `{f}`")))?;
            }
        }
        let means = if has_means {
            let mut b = DMatrix::from_element(n, m, Complex64::new(0.0, 0.0));
            for i in 0..n {
                for (j, f) in take_row("means", i)?.iter().enumerate() {
                    let (re, im) = f.split_once(',').ok_or_else(|| {
                        Error::Parameter(format!("means row {i}: expected `re,im`, got `{f}`"))
                    })?;
                    b[(i, j)] = Complex64::new(
                        re.parse().map_err(|_| {
                            Error::Parameter(format!("means row {i}: bad real part `{re}`"))
                        })?,
                        im.parse().map_err(|_| {
                            Error::Parameter(format!("means row {i}: bad imag part `{im}`"))
                        })?,
                    );
                }
            }
            Some(b)
        } else {
            None
        };
        Profile::new(sigma, means)
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Profile::read_from(std::io::BufReader::new(file))
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let (n, m) = self.sigma.shape();
        writeln!(w, "{} {} {}", n, m, u8::from(self.means.is_some()))?;
        for i in 0..n {
            let row: Vec<String> = (0..m).map(|j| format!("{}", self.sigma[(i, j)])).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        if let Some(b) = &self.means {
            for i in 0..n {
                let row: Vec<String> = (0..m)
                    .map(|j| format!("{},{}", b[(i, j)].re, b[(i, j)].im))
                    .collect();
                writeln!(w, "{}", row.join(" "))?;
            }
        }
        Ok(())
    }
}

/// Zero out entries below the cutoff: output entry is `σ_ij` if `σ_ij ≥ σ̂`,
/// else 0. Means are dropped (thresholding acts on the deviation profile
/// only).
pub fn threshold(profile: &Profile, sigma_hat: f64) -> Result<Profile> {
    if !(sigma_hat > 0.0 && sigma_hat <= 1.0) {
        return Err(Error::Parameter(format!(
            "threshold cutoff must lie in (0,1], got {sigma_hat}"
        )));
    }
    let sigma = profile
        .sigma
        .map(|s| if s >= sigma_hat { s } else { 0.0 });
    Ok(Profile { sigma, means: None })
}

/// Circulant band profile on the torus: entry `(i,j)` is `fill` when
/// `min(|i−j|, n−|i−j|) ≤ ⌊εn⌋` and 0 otherwise.
pub fn band_profile(n: usize, eps: f64, fill: f64) -> Result<Profile> {
    if !(0.0 < eps && eps < 1.0) {
        return Err(Error::Parameter(format!("eps must lie in (0,1), got {eps}")));
    }
    if !(0.0 < fill && fill <= 1.0) {
        return Err(Error::Parameter(format!(
            "fill must lie in (0,1], got {fill}"
        )));
    }
    if eps * (n as f64) < 1.0 {
        return Err(Error::Parameter(format!(
            "empty band: eps*n = {} < 1",
            eps * n as f64
        )));
    }
    let w = (eps * n as f64).floor() as usize;
    let sigma = DMatrix::from_fn(n, n, |i, j| {
        let d = i.abs_diff(j);
        if d.min(n - d) <= w {
            fill
        } else {
            0.0
        }
    });
    Profile::new(sigma, None)
}

// ---------------------------------------------------------------------------
// Atom distributions
// ---------------------------------------------------------------------------

/// Kind of atom distribution. Built-in kinds are centered with unit variance
/// by construction; `CustomDiscrete` is taken as given (its moments are
/// computed exactly from the support) so degenerate atoms can be expressed.
#[derive(Clone, Debug, PartialEq)]
pub enum AtomKind {
    Rademacher,
    GaussianReal,
    GaussianComplex,
    UniformComplexDisc,
    /// Two-point law taking `a` w.p. `p` and `b` w.p. `1−p`, with `a,b`
    /// chosen for mean 0 and variance 1.
    TwoPoint(f64),
    /// Student t with `df > 2` degrees of freedom, scaled to unit variance.
    StudentT(f64),
    CustomDiscrete {
        support: Vec<Complex64>,
        probs: Vec<f64>,
    },
}

/// A sampleable atom distribution with moment metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct AtomDistribution {
    kind: AtomKind,
    /// Exact support for discrete atoms: `(value, probability)` pairs.
    support: Option<Vec<(Complex64, f64)>>,
}

impl fmt::Display for AtomDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            AtomKind::Rademacher => write!(f, "rademacher"),
            AtomKind::GaussianReal => write!(f, "gaussian"),
            AtomKind::GaussianComplex => write!(f, "gaussian-complex"),
            AtomKind::UniformComplexDisc => write!(f, "uniform-disc"),
            AtomKind::TwoPoint(p) => write!(f, "two-point:{p}"),
            AtomKind::StudentT(df) => write!(f, "student-t:{df}"),
            AtomKind::CustomDiscrete { support, .. } => {
                write!(f, "custom-discrete[{}]", support.len())
            }
        }
    }
}

impl AtomDistribution {
    pub fn rademacher() -> Self {
        let half = Complex64::new(1.0, 0.0);
        AtomDistribution {
            kind: AtomKind::Rademacher,
            support: Some(vec![(half, 0.5), (-half, 0.5)]),
        }
    }

    pub fn gaussian_real() -> Self {
        AtomDistribution {
            kind: AtomKind::GaussianReal,
            support: None,
        }
    }

    pub fn gaussian_complex() -> Self {
        AtomDistribution {
            kind: AtomKind::GaussianComplex,
            support: None,
        }
    }

    /// Uniform law on the disc of radius √2 (unit variance).
    pub fn uniform_complex_disc() -> Self {
        AtomDistribution {
            kind: AtomKind::UniformComplexDisc,
            support: None,
        }
    }

    pub fn two_point(p: f64) -> Result<Self> {
        if !(0.0 < p && p < 1.0) {
            return Err(Error::Parameter(format!(
                "two-point probability must lie in (0,1), got {p}"
            )));
        }
        let a = ((1.0 - p) / p).sqrt();
        let b = -(p / (1.0 - p)).sqrt();
        Ok(AtomDistribution {
            kind: AtomKind::TwoPoint(p),
            support: Some(vec![
                (Complex64::new(a, 0.0), p),
                (Complex64::new(b, 0.0), 1.0 - p),
            ]),
        })
    }

    pub fn student_t(df: f64) -> Result<Self> {
        if df <= 2.0 {
            return Err(Error::Parameter(format!(
                "student-t needs df > 2 for finite variance, got {df}"
            )));
        }
        Ok(AtomDistribution {
            kind: AtomKind::StudentT(df),
            support: None,
        })
    }

    /// Arbitrary discrete atom. Probabilities must sum to 1 within 1e-12.
    /// No centering or variance normalization is applied.
    pub fn custom_discrete(support: Vec<Complex64>, probs: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != probs.len() {
            return Err(Error::Dimension(
                "support and probs must be non-empty and equal length".into(),
            ));
        }
        if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::Parameter("probabilities outside [0,1]".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(format!(
                "probabilities sum to {total}, not 1 (tolerance 1e-12)"
            )));
        }
        let pairs = support.iter().copied().zip(probs.iter().copied()).collect();
        Ok(AtomDistribution {
            kind: AtomKind::CustomDiscrete { support, probs },
            support: Some(pairs),
        })
    }

    pub fn kind(&self) -> &AtomKind {
        &self.kind
    }

    pub fn is_discrete(&self) -> bool {
        self.support.is_some()
    }

    /// Exact support for discrete atoms.
    pub fn support(&self) -> Option<&[(Complex64, f64)]> {
        self.support.as_deref()
    }

    /// Draw one sample.
    pub fn sample(&self, rng: &mut Rng) -> Complex64 {
        match &self.kind {
            AtomKind::Rademacher => {
                if rng.random::<bool>() {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(-1.0, 0.0)
                }
            }
            AtomKind::GaussianReal => Complex64::new(StandardNormal.sample(rng), 0.0),
            AtomKind::GaussianComplex => {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(re, im) / 2.0f64.sqrt()
            }
            AtomKind::UniformComplexDisc => {
                let r = 2.0f64.sqrt() * rng.random::<f64>().sqrt();
                let phi = std::f64::consts::TAU * rng.random::<f64>();
                Complex64::from_polar(r, phi)
            }
            AtomKind::StudentT(df) => {
                let t = StudentT::new(*df).expect("validated df").sample(rng);
                Complex64::new(t / (df / (df - 2.0)).sqrt(), 0.0)
            }
            AtomKind::TwoPoint(_) | AtomKind::CustomDiscrete { .. } => {
                let pairs = self.support.as_ref().expect("discrete atom has support");
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for &(v, p) in pairs {
                    acc += p;
                    if u < acc {
                        return v;
                    }
                }
                pairs.last().expect("non-empty support").0
            }
        }
    }

    /// Exact mean (discrete atoms only; built-in continuous atoms are
    /// centered by construction).
    pub fn mean(&self) -> Complex64 {
        match &self.support {
            Some(pairs) => pairs.iter().map(|&(v, p)| v * p).sum(),
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// `μ_p = (E|ξ|^p)^{1/p}` where a closed form or exact support is known.
    pub fn declared_moments(&self) -> BTreeMap<u32, f64> {
        let mut map = BTreeMap::new();
        for p in [2u32, 4, 6] {
            if let Some(mu) = self.declared_moment(p) {
                map.insert(p, mu);
            }
        }
        map
    }

    pub fn declared_moment(&self, p: u32) -> Option<f64> {
        let pf = f64::from(p);
        if let Some(pairs) = &self.support {
            let e: f64 = pairs.iter().map(|&(v, q)| v.norm().powf(pf) * q).sum();
            return Some(e.powf(1.0 / pf));
        }
        match self.kind {
            AtomKind::GaussianReal => {
                // E|g|^p = 2^{p/2} Γ((p+1)/2) / √π; tabulated for even p.
                let e: f64 = match p {
                    2 => 1.0,
                    4 => 3.0,
                    6 => 15.0,
                    _ => return None,
                };
                Some(e.powf(1.0 / pf))
            }
            AtomKind::GaussianComplex => {
                // |ξ|² is Exp(1): E|ξ|^{2k} = k!.
                let e: f64 = match p {
                    2 => 1.0,
                    4 => 2.0,
                    6 => 6.0,
                    _ => return None,
                };
                Some(e.powf(1.0 / pf))
            }
            AtomKind::UniformComplexDisc => {
                // radius √2: E|ξ|^p = 2^{p/2+1}/(p+2).
                let e = 2.0f64.powf(pf / 2.0 + 1.0) / (pf + 2.0);
                Some(e.powf(1.0 / pf))
            }
            AtomKind::StudentT(df) => {
                if pf >= df {
                    None
                } else if p == 2 {
                    Some(1.0)
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    /// Monte Carlo moment estimate `(μ̂_p, stderr of E|ξ|^p)`.
    pub fn moment_monte_carlo(&self, p: f64, seed: u64) -> (f64, f64) {
        let mut rng = stream_rng(seed, 0xA70);
        let n = MOMENT_SAMPLES;
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for _ in 0..n {
            let x = self.sample(&mut rng).norm().powf(p);
            sum += x;
            sum2 += x * x;
        }
        let mean = sum / n as f64;
        let var = (sum2 / n as f64 - mean * mean).max(0.0);
        (mean.powf(1.0 / p), (var / n as f64).sqrt())
    }
}

// ---------------------------------------------------------------------------
// Spread witnesses and phase rotation
// ---------------------------------------------------------------------------

/// Witness that an atom is κ-spread: the variance of the atom truncated at
/// modulus κ is at least 1/κ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpreadWitness {
    pub kappa: f64,
    pub truncated_variance: f64,
}

/// Variance of `ξ·1(|ξ−Eξ| ≤ κ)`: exact for discrete atoms, Monte Carlo with
/// [`MOMENT_SAMPLES`] draws otherwise.
pub fn truncated_variance(atom: &AtomDistribution, kappa: f64, seed: u64) -> f64 {
    if let Some(pairs) = atom.support() {
        let mean: Complex64 = pairs.iter().map(|&(v, p)| v * p).sum();
        let mut ey = Complex64::new(0.0, 0.0);
        let mut ey2 = 0.0;
        for &(v, p) in pairs {
            if (v - mean).norm() <= kappa {
                ey += v * p;
                ey2 += v.norm_sqr() * p;
            }
        }
        ey2 - ey.norm_sqr()
    } else {
        // Continuous atoms are centered by construction, so truncate at |ξ| ≤ κ.
        let mut rng = stream_rng(seed, 0x5B3);
        let mut ey = Complex64::new(0.0, 0.0);
        let mut ey2 = 0.0;
        for _ in 0..MOMENT_SAMPLES {
            let v = atom.sample(&mut rng);
            if v.norm() <= kappa {
                ey += v;
                ey2 += v.norm_sqr();
            }
        }
        let n = MOMENT_SAMPLES as f64;
        ey /= n;
        ey2 /= n;
        ey2 - ey.norm_sqr()
    }
}

/// Check whether the atom is κ-spread and return the witness if so.
pub fn check_spread(atom: &AtomDistribution, kappa: f64, seed: u64) -> Option<SpreadWitness> {
    assert!(kappa >= 1.0, "kappa must be ≥ 1");
    let tv = truncated_variance(atom, kappa, seed);
    if tv >= 1.0 / kappa {
        Some(SpreadWitness {
            kappa,
            truncated_variance: tv,
        })
    } else {
        None
    }
}

/// Number of phases/shifts on each axis of the verification grid for the
/// controlled-second-moment inequality.
pub const CONTROL_GRID: usize = 32;

/// Truncated second-moment statistics of `e^{iθ}ξ` against direction `z` and a
/// real shift grid. Returns the grid minimum of
/// `E[Re(z ξ' − w)]² 1(|ξ'| ≤ κ) − Re(z)²/κ` (nonnegative means the
/// inequality holds at every grid point) plus the Monte Carlo stderr scale.
fn control_grid_margin(
    atom: &AtomDistribution,
    theta: f64,
    kappa: f64,
    seed: u64,
) -> (f64, f64) {
    let phase = Complex64::from_polar(1.0, theta);

    // Gather the distribution once: exact support or MC sample cloud.
    let cloud: Vec<(Complex64, f64)> = if let Some(pairs) = atom.support() {
        pairs.iter().map(|&(v, p)| (v * phase, p)).collect()
    } else {
        let mut rng = stream_rng(seed, 0xC070);
        let w = 1.0 / MOMENT_SAMPLES as f64;
        (0..MOMENT_SAMPLES)
            .map(|_| (atom.sample(&mut rng) * phase, w))
            .collect()
    };
    let mc = atom.support().is_none();

    let mut worst = f64::INFINITY;
    let mut stderr_scale = 0.0f64;
    for zi in 0..CONTROL_GRID {
        let z = Complex64::from_polar(1.0, std::f64::consts::TAU * zi as f64 / CONTROL_GRID as f64);
        // First pass: truncated first/second moments of Re(zξ').
        let mut mass = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for &(v, p) in &cloud {
            if v.norm() <= kappa {
                let x = (z * v).re;
                mass += p;
                m1 += x * p;
                m2 += x * x * p;
            }
        }
        let center = if mass > 0.0 { m1 / mass } else { 0.0 };
        let bound = z.re * z.re / kappa;
        for wi in 0..CONTROL_GRID {
            let w = center + (wi as f64 / (CONTROL_GRID - 1) as f64 * 2.0 - 1.0) * kappa.sqrt();
            // E[Re(zξ') − w]² 1 = m2 − 2w·m1 + w²·mass
            let lhs = m2 - 2.0 * w * m1 + w * w * mass;
            let margin = lhs - bound;
            if margin < worst {
                worst = margin;
                // Crude scale for ±3σ slack of the MC estimate of lhs.
                let second = m2 / mass.max(1e-300);
                stderr_scale = if mc {
                    (second.max(1.0) / MOMENT_SAMPLES as f64).sqrt() * (1.0 + w.abs()).powi(2)
                } else {
                    0.0
                };
            }
        }
    }
    (worst, stderr_scale)
}

/// Verify the κ-controlled second-moment inequality for `e^{iθ}ξ` on the
/// [`CONTROL_GRID`]×[`CONTROL_GRID`] grid of unit directions and real shifts.
/// Monte Carlo estimates get ±3 standard errors of slack.
pub fn verify_controlled_grid(
    atom: &AtomDistribution,
    theta: f64,
    kappa: f64,
    seed: u64,
) -> bool {
    // Upper bound E|ξ'|² ≤ κ first.
    let second = if let Some(pairs) = atom.support() {
        pairs.iter().map(|&(v, p)| v.norm_sqr() * p).sum::<f64>()
    } else {
        1.0 // built-in continuous atoms have unit variance by construction
    };
    if second > kappa {
        return false;
    }
    let (margin, stderr_scale) = control_grid_margin(atom, theta, kappa, seed);
    margin >= -3.0 * stderr_scale
}

/// Phase rotation onto a controlled second moment: returns `(θ, κ)` such that
/// `e^{iθ}ξ` has κ-controlled second moment, verified on the grid.
///
/// The rotation comes from the 2×2 real covariance matrix of the truncated,
/// conditionally centered atom; its top eigenvector is rotated onto the real
/// axis. κ is the smallest grid-verified value in the geometric sweep
/// `{1, 2, 4, ...}·κ₀`.
pub fn controlled_phase(
    atom: &AtomDistribution,
    kappa0: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    if check_spread(atom, kappa0, seed).is_none() {
        return Err(Error::Precondition(format!(
            "atom {atom} is not {kappa0}-spread"
        )));
    }

    // Covariance of η = ξ − Ẽξ conditional on |ξ| ≤ κ₀.
    let (a, b, c) = if let Some(pairs) = atom.support() {
        truncated_covariance(pairs.iter().copied(), kappa0)
    } else {
        let mut rng = stream_rng(seed, 0xC0);
        let w = 1.0 / MOMENT_SAMPLES as f64;
        let cloud: Vec<(Complex64, f64)> = (0..MOMENT_SAMPLES)
            .map(|_| (atom.sample(&mut rng), w))
            .collect();
        truncated_covariance(cloud.into_iter(), kappa0)
    };

    // Top eigenvector (cos φ, sin φ) of [[a, b], [b, c]] rotated onto (1, 0).
    let half_gap = (a - c) / 2.0;
    let lambda_top = (a + c) / 2.0 + (half_gap * half_gap + b * b).sqrt();
    let (ex, ey) = if b.abs() > 1e-15 {
        (b, lambda_top - a)
    } else if a >= c {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let phi = ey.atan2(ex);
    let theta = (-phi).rem_euclid(std::f64::consts::PI);

    let mut kappa = kappa0;
    for _ in 0..24 {
        if verify_controlled_grid(atom, theta, kappa, seed) {
            return Ok((theta, kappa));
        }
        kappa *= 2.0;
    }
    Err(Error::Exhausted(format!(
        "no kappa up to {kappa} verified on the control grid for atom {atom}"
    )))
}

/// Real 2×2 covariance entries `(E Re η², E Re η Im η, E Im η²)` of
/// `η = ξ − Ẽξ` under the conditional law given `|ξ| ≤ κ`.
fn truncated_covariance<I: Iterator<Item = (Complex64, f64)>>(cloud: I, kappa: f64) -> (f64, f64, f64) {
    let mut mass = 0.0;
    let mut mean = Complex64::new(0.0, 0.0);
    let mut rr = 0.0;
    let mut ri = 0.0;
    let mut ii = 0.0;
    for (v, p) in cloud {
        if v.norm() <= kappa {
            mass += p;
            mean += v * p;
            rr += v.re * v.re * p;
            ri += v.re * v.im * p;
            ii += v.im * v.im * p;
        }
    }
    if mass <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    mean /= mass;
    (
        rr / mass - mean.re * mean.re,
        ri / mass - mean.re * mean.im,
        ii / mass - mean.im * mean.im,
    )
}
