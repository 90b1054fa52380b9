//! Batch experiment runner: profile checks, decompositions, certificates,
//! Monte Carlo tail tables and concentration estimates, all reproducible
//! from a config plus seed.

use std::io::Write as _;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use svlab::anticonc::concentration;
use svlab::certify::{measured_noise_bound, pipeline_certificate, triangular_certificate};
use svlab::ensemble::{
    sample, singular_by_construction, tail_experiment, Shift, TailGrid, TailSpec,
};
use svlab::graph::{
    check_broad_connectivity_with, check_super_regularity_with, verify_band_connectivity_with,
    BroadCheckOptions, ProfileGraph,
};
use svlab::linalg::CVector;
use svlab::profile::{band_profile, AtomDistribution, Profile};
use svlab::regularity::{decompose, Decomposition};
use svlab::rng::stream_rng;
use svlab::Complex64;

#[derive(Parser)]
#[command(
    name = "svlab",
    version,
    about = "Structured-random-matrix experiments: connectivity checks, decompositions, \
             smallest-singular-value certificates and Monte Carlo tail tables",
    after_help = "Profile specs: band:N:EPS[:FILL], ones:N, zeros:N, blocks:N:B, halfones:N, \
                  singular:N:K:M, random:N:DENSITY, file:PATH\n\
                  Atom specs: rademacher, gaussian, gaussian-complex, uniform-disc, \
                  two-point:P, student-t:DF\n\
                  Shift specs: none, diag:RE[,IM]\n\
                  Grid syntax: START:END:COUNT (inclusive, linear)"
)]
struct Cli {
    /// Master seed (env SVLAB_SEED overrides the default)
    #[arg(long, global = true, env = "SVLAB_SEED", default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = library default); determinism is unaffected
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Output path for the main table/report (stdout when omitted)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Connectivity checks on a profile (broad or super-regular)
    CheckProfile(CheckProfileArgs),
    /// Bad/free/cyclic decomposition of a profile
    Decompose(DecomposeArgs),
    /// Sample a matrix and certify a lower bound on its smallest singular value
    Certify(CertifyArgs),
    /// Monte Carlo tail table for the smallest singular value
    Tail(TailArgs),
    /// Concentration-function estimates for a scalar random walk
    Anticonc(AnticoncArgs),
    /// Quick self-checks against independent oracles
    OracleSuite,
}

#[derive(Args)]
struct CheckProfileArgs {
    /// Band checker mode: key=value pairs (n=..., eps=...)
    #[arg(long, num_args = 0.., value_name = "K=V")]
    band: Option<Vec<String>>,
    /// Profile spec for the generic checkers
    #[arg(long)]
    profile: Option<String>,
    /// Check super-regularity instead of broad connectivity
    #[arg(long, default_value_t = false)]
    super_regular: bool,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    /// Threshold applied to the profile before checking
    #[arg(long)]
    sigma_hat: Option<f64>,
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long)]
    profile: String,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0.3)]
    sigma_hat: f64,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long)]
    profile: String,
    #[arg(long, default_value = "gaussian")]
    atom: String,
    /// Shift spec; certificates need diag:...
    #[arg(long, default_value = "diag:1.0")]
    shift: String,
    /// Reuse a decomposition JSON instead of recomputing it
    #[arg(long)]
    decomposition: Option<PathBuf>,
    /// Use the dyadic triangular certificate (profile must be upper triangular)
    #[arg(long, default_value_t = false)]
    triangular: bool,
    #[arg(long, default_value_t = 0.05)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0.3)]
    sigma_hat: f64,
}

#[derive(Args)]
struct TailArgs {
    #[arg(long)]
    profile: String,
    #[arg(long, default_value = "gaussian")]
    atom: String,
    #[arg(long, default_value = "none")]
    shift: String,
    /// Grid of t values for the event s_n ≤ t/√n
    #[arg(long)]
    tgrid: Option<String>,
    /// Grid of β values for the event s_n ≤ n^{-β}
    #[arg(long)]
    bgrid: Option<String>,
    #[arg(long, default_value_t = 500)]
    trials: usize,
    /// Boundedness cutoff K for the event ‖M‖ ≤ K√n
    #[arg(long, default_value_t = 8.0)]
    k: f64,
}

#[derive(Args)]
struct AnticoncArgs {
    #[arg(long, default_value = "rademacher")]
    atom: String,
    /// Walk dimension; the direction is the uniform unit vector
    #[arg(long, default_value_t = 64)]
    m: usize,
    #[arg(long, default_value = "0.05:0.5:8")]
    rgrid: String,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
}

// ---------------------------------------------------------------------------
// Spec parsing
// ---------------------------------------------------------------------------

fn parse_profile(spec: &str, seed: u64) -> Result<Profile> {
    let parts: Vec<&str> = spec.split(':').collect();
    let usage = || {
        anyhow!(
            "profile spec `{spec}`: expected band:N:EPS[:FILL], ones:N, zeros:N, blocks:N:B, halfones:N, \
             singular:N:K:M, random:N:DENSITY or file:PATH"
        )
    };
    match parts.as_slice() {
        ["band", n, eps] => Ok(band_profile(parse_num(n, spec)?, parse_num(eps, spec)?, 1.0)?),
        ["band", n, eps, fill] => Ok(band_profile(
            parse_num(n, spec)?,
            parse_num(eps, spec)?,
            parse_num(fill, spec)?,
        )?),
        ["ones", n] => Ok(Profile::ones(parse_num(n, spec)?)),
        ["zeros", n] => Ok(Profile::zeros(parse_num(n, spec)?)),
        ["blocks", n, b] => {
            let n: usize = parse_num(n, spec)?;
            let b: usize = parse_num(b, spec)?;
            if b == 0 || b > n {
                bail!("in `{spec}`: block count must lie in 1..=n");
            }
            let size = n.div_ceil(b);
            Ok(Profile::new(
                nalgebra::DMatrix::from_fn(n, n, |i, j| f64::from(i / size == j / size)),
                None,
            )?)
        }
        ["halfones", n] => {
            let n: usize = parse_num(n, spec)?;
            Ok(Profile::new(
                nalgebra::DMatrix::from_fn(n, n, |_, j| f64::from(j < n / 2)),
                None,
            )?)
        }
        ["singular", n, k, m] => Ok(singular_by_construction(
            parse_num(n, spec)?,
            parse_num(k, spec)?,
            parse_num(m, spec)?,
        )?),
        ["random", n, density] => {
            let n: usize = parse_num(n, spec)?;
            let density: f64 = parse_num(density, spec)?;
            let mut rng = stream_rng(seed, 0xF11E);
            Ok(Profile::new(
                nalgebra::DMatrix::from_fn(n, n, |_, _| {
                    if rand::Rng::random::<f64>(&mut rng) < density {
                        rand::Rng::random::<f64>(&mut rng)
                    } else {
                        0.0
                    }
                }),
                None,
            )?)
        }
        ["file", path] => Ok(Profile::read_path(std::path::Path::new(path))?),
        _ => Err(usage()),
    }
}

fn parse_num<T: std::str::FromStr>(token: &str, ctx: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| anyhow!("in `{ctx}`: bad number `{token}`"))
}

fn parse_atom(spec: &str) -> Result<AtomDistribution> {
    let parts: Vec<&str> = spec.split(':').collect();
    Ok(match parts.as_slice() {
        ["rademacher"] => AtomDistribution::rademacher(),
        ["gaussian"] => AtomDistribution::gaussian_real(),
        ["gaussian-complex"] => AtomDistribution::gaussian_complex(),
        ["uniform-disc"] => AtomDistribution::uniform_complex_disc(),
        ["two-point", p] => AtomDistribution::two_point(parse_num(p, spec)?)?,
        ["student-t", df] => AtomDistribution::student_t(parse_num(df, spec)?)?,
        _ => bail!(
            "atom spec `{spec}`: expected rademacher, gaussian, gaussian-complex, \
             uniform-disc, two-point:P or student-t:DF"
        ),
    })
}

fn parse_shift(spec: &str, n: usize) -> Result<Shift> {
    if spec == "none" {
        return Ok(Shift::None);
    }
    if let Some(rest) = spec.strip_prefix("diag:") {
        let (re, im) = match rest.split_once(',') {
            Some((re, im)) => (parse_num(re, spec)?, parse_num(im, spec)?),
            None => (parse_num::<f64>(rest, spec)?, 0.0),
        };
        return Ok(Shift::scalar_diagonal(n, Complex64::new(re, im))?);
    }
    bail!("shift spec `{spec}`: expected none or diag:RE[,IM]")
}

/// `a:b:c` = `c` points linearly spaced from `a` to `b` inclusive.
fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, c] = parts.as_slice() else {
        bail!("grid spec `{spec}`: expected START:END:COUNT");
    };
    let a: f64 = parse_num(a, spec)?;
    let b: f64 = parse_num(b, spec)?;
    let c: usize = parse_num(c, spec)?;
    if c == 0 {
        bail!("grid spec `{spec}`: COUNT must be positive");
    }
    if c == 1 {
        return Ok(vec![a]);
    }
    Ok((0..c)
        .map(|i| a + (b - a) * i as f64 / (c - 1) as f64)
        .collect())
}

fn parse_key_values(tokens: &[String]) -> Result<std::collections::BTreeMap<String, String>> {
    let mut map = std::collections::BTreeMap::new();
    for t in tokens {
        let (k, v) = t
            .split_once('=')
            .ok_or_else(|| anyhow!("expected key=value, got `{t}`"))?;
        map.insert(k.to_string(), v.to_string());
    }
    Ok(map)
}

// ---------------------------------------------------------------------------
// Output plumbing
// ---------------------------------------------------------------------------

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

struct Run {
    config: Vec<String>,
    config_hash: String,
    seed: u64,
    out: Option<PathBuf>,
    started: Instant,
}

impl Run {
    fn new(seed: u64, out: Option<PathBuf>) -> Run {
        let config: Vec<String> = std::env::args().collect();
        // The output path is not part of the experiment: hash only the
        // config that determines the table contents.
        let mut hashed: Vec<&str> = Vec::new();
        let mut skip_next = false;
        for arg in &config {
            if skip_next {
                skip_next = false;
                continue;
            }
            if arg == "--out" {
                skip_next = true;
                continue;
            }
            if let Some(stripped) = arg.strip_prefix("--out=") {
                let _ = stripped;
                continue;
            }
            hashed.push(arg);
        }
        let config_hash = format!("{:016x}", fnv1a(hashed.join("\u{1f}").as_bytes()));
        Run {
            config,
            config_hash,
            seed,
            out,
            started: Instant::now(),
        }
    }

    fn emit(&self, body: &str) -> Result<()> {
        match &self.out {
            Some(path) => {
                std::fs::write(path, body)
                    .with_context(|| format!("writing {}", path.display()))?;
                eprintln!("wrote {}", path.display());
            }
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(body.as_bytes())?;
            }
        }
        self.manifest()
    }

    fn manifest(&self) -> Result<()> {
        let manifest = serde_json::json!({
            "config": self.config,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "version": env!("CARGO_PKG_VERSION"),
            "wall_time_ms": self.started.elapsed().as_millis() as u64,
            "timestamp_unix": std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        });
        match &self.out {
            Some(path) => {
                let mpath = PathBuf::from(format!("{}.manifest.json", path.display()));
                std::fs::write(&mpath, serde_json::to_string_pretty(&manifest)?)?;
            }
            None => eprintln!("{manifest}"),
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn cmd_check_profile(args: &CheckProfileArgs, run: &Run) -> Result<String> {
    if let Some(tokens) = &args.band {
        let kv = parse_key_values(tokens)?;
        let n: usize = parse_num(
            kv.get("n").ok_or_else(|| anyhow!("--band needs n=..."))?,
            "band",
        )?;
        let eps: f64 = parse_num(
            kv.get("eps")
                .ok_or_else(|| anyhow!("--band needs eps=..."))?,
            "band",
        )?;
        let (delta, nu) = verify_band_connectivity_with(n, eps, run.seed)?;
        // re-run the checker at the found grid point for the full report
        let g = ProfileGraph::new(band_profile(n, eps, 1.0)?);
        let opts = BroadCheckOptions {
            seed: run.seed,
            ..Default::default()
        };
        let report = check_broad_connectivity_with(&g, delta, nu, opts);
        return Ok(format!("{}\n", serde_json::to_string_pretty(&report)?));
    }
    let spec = args
        .profile
        .as_ref()
        .ok_or_else(|| anyhow!("check-profile needs --band or --profile"))?;
    let mut profile = parse_profile(spec, run.seed)?;
    if let Some(cut) = args.sigma_hat {
        profile = svlab::profile::threshold(&profile, cut)?;
    }
    let g = ProfileGraph::new(profile);
    let report = if args.super_regular {
        let delta = args
            .delta
            .ok_or_else(|| anyhow!("--super-regular needs --delta"))?;
        let eps = args.eps.ok_or_else(|| anyhow!("--super-regular needs --eps"))?;
        check_super_regularity_with(&g, delta, eps, run.seed)
    } else {
        let delta = args.delta.ok_or_else(|| anyhow!("broad check needs --delta"))?;
        let nu = args.nu.ok_or_else(|| anyhow!("broad check needs --nu"))?;
        let opts = BroadCheckOptions {
            seed: run.seed,
            ..Default::default()
        };
        check_broad_connectivity_with(&g, delta, nu, opts)
    };
    Ok(format!("{}\n", serde_json::to_string_pretty(&report)?))
}

fn cmd_decompose(args: &DecomposeArgs, run: &Run) -> Result<String> {
    let profile = parse_profile(&args.profile, run.seed)?;
    let g = ProfileGraph::new(profile);
    let dec = decompose(&g, args.eps, args.delta, args.sigma_hat, run.seed)?;
    Ok(format!("{}\n", dec.to_json()?))
}

fn cmd_certify(args: &CertifyArgs, run: &Run) -> Result<String> {
    let profile = Arc::new(parse_profile(&args.profile, run.seed)?);
    let atom = parse_atom(&args.atom)?;
    let shift = parse_shift(&args.shift, profile.nrows())?;
    if matches!(shift, Shift::None) {
        bail!("certify needs a diagonal shift (e.g. --shift diag:1.0)");
    }
    let ms = sample(&profile, &atom, &shift, run.seed)?;
    let cert = if args.triangular {
        triangular_certificate(&ms, measured_noise_bound(&ms))?
    } else {
        let dec: Decomposition = match &args.decomposition {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                Decomposition::from_json(&text)?
            }
            None => {
                let g = ProfileGraph::new(profile.as_ref().clone());
                decompose(&g, args.eps, args.delta, args.sigma_hat, run.seed)?
            }
        };
        pipeline_certificate(&ms, &dec)?
    };
    let smin = ms.smin();
    let body = serde_json::json!({
        "certificate": cert,
        "measured_smin": smin,
        "measured_opnorm": ms.opnorm(),
        "seed": run.seed,
        "config_hash": run.config_hash,
    });
    Ok(format!("{}\n", serde_json::to_string_pretty(&body)?))
}

fn cmd_tail(args: &TailArgs, run: &Run) -> Result<String> {
    let profile = Arc::new(parse_profile(&args.profile, run.seed)?);
    let atom = parse_atom(&args.atom)?;
    let shift = parse_shift(&args.shift, profile.nrows())?;
    let grid = match (&args.tgrid, &args.bgrid) {
        (Some(t), None) => TailGrid::T(parse_grid(t)?),
        (None, Some(b)) => TailGrid::Beta(parse_grid(b)?),
        _ => bail!("tail needs exactly one of --tgrid or --bgrid"),
    };
    let spec = TailSpec {
        profile,
        atom,
        shift,
        grid,
        trials: args.trials,
        k_bound: args.k,
        seed: run.seed,
    };
    let table = tail_experiment(&spec)?;
    let mut csv = String::from(
        "n,atom,profile_id,shift_id,gridpoint,hits,trials,wilson_lo,wilson_hi,K,seed,config_hash\n",
    );
    for r in &table.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.n,
            r.atom,
            r.profile_id,
            r.shift_id,
            r.gridpoint,
            r.hits,
            r.trials,
            r.wilson_lo,
            r.wilson_hi,
            r.k,
            r.seed,
            run.config_hash
        ));
    }
    Ok(csv)
}

fn cmd_anticonc(args: &AnticoncArgs, run: &Run) -> Result<String> {
    let atom = parse_atom(&args.atom)?;
    if args.m == 0 {
        bail!("--m must be positive");
    }
    let v = CVector::from_element(args.m, Complex64::new(1.0 / (args.m as f64).sqrt(), 0.0));
    let mut csv = String::from("atom,m,r,p_hat,stderr,method,seed,config_hash\n");
    for r in parse_grid(&args.rgrid)? {
        let est = concentration(&atom, &v, r, args.samples, run.seed)?;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            atom, args.m, est.r, est.p_hat, est.stderr, est.method, run.seed, run.config_hash
        ));
    }
    Ok(csv)
}

fn cmd_oracle_suite(run: &Run) -> Result<String> {
    use svlab::sphere;
    let mut lines = Vec::new();
    let mut failures = 0usize;
    let check = |lines: &mut Vec<String>, failures: &mut usize, name: &str, ok: bool| {
        lines.push(format!("{} {name}", if ok { "ok  " } else { "FAIL" }));
        if !ok {
            *failures += 1;
        }
    };
    let gaussian_c = |rng: &mut svlab::rng::Rng| {
        let re: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
        let im: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, rng);
        Complex64::new(re, im)
    };

    // compressibility distance vs brute force over supports
    let mut comp_ok = true;
    for t in 0..200u64 {
        let m = 2 + (t as usize) % 7;
        let k = 1 + (t as usize) % m;
        let mut rng = stream_rng(run.seed, 0x0AC1 + t);
        let mut v = CVector::from_fn(m, |_, _| gaussian_c(&mut rng));
        let norm = v.norm();
        v /= Complex64::new(norm, 0.0);
        let fast = sphere::comp_distance(&v, k).map_err(|e| anyhow!("{e}"))?;
        let mut brute = f64::INFINITY;
        for mask in 0u32..(1 << m) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let tail: f64 = (0..m)
                .filter(|&j| mask >> j & 1 == 0)
                .map(|j| v[j].norm_sqr())
                .sum();
            brute = brute.min(tail.sqrt());
        }
        comp_ok &= (fast - brute).abs() <= 1e-12;
    }
    check(
        &mut lines,
        &mut failures,
        "comp-distance closed form vs support enumeration",
        comp_ok,
    );

    // Schur bound vs full SVD
    let mut schur_ok = true;
    for t in 0..100u64 {
        let n = 8 + (t as usize) % 17;
        let mut rng = stream_rng(run.seed, 0x5C2 + t);
        let m = svlab::linalg::CMatrix::from_fn(n, n, |_, _| gaussian_c(&mut rng));
        let split = n / 2;
        let d = m.view((split, split), (n - split, n - split)).into_owned();
        let s_d = svlab::linalg::smin(&d);
        let b = m.view((0, split), (split, n - split)).into_owned();
        let c = m.view((split, 0), (n - split, split)).into_owned();
        let a = m.view((0, 0), (split, split)).into_owned();
        let x = svlab::linalg::lu_solve(&d, &c).map_err(|e| anyhow!("{e}"))?;
        let s_schur = svlab::linalg::smin(&(&a - &b * x));
        let bound =
            svlab::certify::schur_bound(&m, split, s_d, s_schur).map_err(|e| anyhow!("{e}"))?;
        schur_ok &= bound <= svlab::linalg::smin(&m) + 1e-9 * svlab::linalg::opnorm(&m);
    }
    check(
        &mut lines,
        &mut failures,
        "Schur bound below full-SVD smin",
        schur_ok,
    );

    // smin agrees with the inverse-norm oracle
    let mut inv_ok = true;
    for t in 0..20u64 {
        let profile = Arc::new(Profile::ones(40));
        let ms = sample(
            &profile,
            &AtomDistribution::gaussian_real(),
            &Shift::None,
            run.seed.wrapping_add(t),
        )
        .map_err(|e| anyhow!("{e}"))?;
        if let Some(inv) = ms.matrix.clone().lu().try_inverse() {
            let oracle = 1.0 / svlab::linalg::opnorm(&inv);
            inv_ok &= (ms.smin() - oracle).abs() <= 1e-8 * ms.smin().max(oracle);
        }
    }
    check(
        &mut lines,
        &mut failures,
        "smin equals 1/‖M⁻¹‖ on invertible samples",
        inv_ok,
    );

    // net covering audit
    let mut rng = stream_rng(run.seed, 0x4E7);
    let g = svlab::linalg::CMatrix::from_fn(3, 1, |_, _| gaussian_c(&mut rng));
    let basis = g.qr().q().columns(0, 1).into_owned();
    let net_ok = match sphere::build_net(&basis, 0.5) {
        Ok(net) => sphere::covering_audit(&net, 2000, run.seed).is_some_and(|w| w <= 0.5),
        Err(_) => false,
    };
    check(
        &mut lines,
        &mut failures,
        "net covering radius within rho",
        net_ok,
    );

    // band connectivity grid nonempty
    let band_ok = verify_band_connectivity_with(60, 0.2, run.seed).is_ok();
    check(
        &mut lines,
        &mut failures,
        "band profile passes some broad-connectivity grid point",
        band_ok,
    );

    // singularity forcing
    let mut sing_ok = true;
    let p = Arc::new(singular_by_construction(10, 6, 5).map_err(|e| anyhow!("{e}"))?);
    for t in 0..20u64 {
        let ms = sample(
            &p,
            &AtomDistribution::rademacher(),
            &Shift::None,
            run.seed.wrapping_add(t),
        )
        .map_err(|e| anyhow!("{e}"))?;
        sing_ok &= ms.smin() <= 1e-10 * ms.opnorm();
    }
    check(
        &mut lines,
        &mut failures,
        "zero-block profiles force singular samples",
        sing_ok,
    );

    let body = lines.join("\n") + "\n";
    if failures > 0 {
        print!("{body}");
        bail!("{failures} oracle check(s) failed");
    }
    Ok(body)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    #[cfg(feature = "parallel")]
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .context("configuring the worker pool")?;
    }
    #[cfg(not(feature = "parallel"))]
    if cli.jobs > 1 {
        eprintln!("note: built without the parallel feature; --jobs ignored");
    }

    let run = Run::new(cli.seed, cli.out.clone());
    let body = match &cli.command {
        Command::CheckProfile(args) => cmd_check_profile(args, &run)?,
        Command::Decompose(args) => cmd_decompose(args, &run)?,
        Command::Certify(args) => cmd_certify(args, &run)?,
        Command::Tail(args) => cmd_tail(args, &run)?,
        Command::Anticonc(args) => cmd_anticonc(args, &run)?,
        Command::OracleSuite => cmd_oracle_suite(&run)?,
    };
    run.emit(&body)?;
    Ok(())
}
