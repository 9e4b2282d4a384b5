//! `blab`: frequency, doubling and Bernstein-ratio experiments from the command line.
//!
//! Exit status: 0 success, 1 an invariant or numerical check failed, 2 bad configuration
//! or malformed input, 3 I/O error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use blab_core::eigen::{
    dong_doubling, dong_f_profile, dong_log_q_laplacian_check, lift, make_sphere_eigenfunction, random_points, DongState, Eigenfunction,
    SphereEigenfunction, TorusEigenfunction,
};
use blab_core::field::{Field, GeodesicBall, Manifold, ScalarField};
use blab_core::frequency::{doubling_index, frequency_numeric, frequency_profile, CoefficientField};
use blab_core::io::{ingest, read_expansion, EigenSpec, Format, RunManifest, TorusInterpolant};
use blab_core::lab::{
    approximate_by_truncation, classical_baselines, eigen_bernstein, log_grid, polynomial_bernstein_lp, sweep, Centers, Family, Lp,
    RadiusScale, SweepConfig,
};
use blab_core::supnorm::{sup_norm, ResolutionPolicy};
use blab_core::{verify, Error, Expansion};
use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;

#[derive(Parser)]
#[command(name = "blab", version, about = "Bernstein-inequality laboratory for eigenfunctions and harmonic functions")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = "BLAB_THREADS")]
    threads: Option<usize>,
    /// Directory for artifacts and the run manifest.
    #[arg(long, global = true, default_value = "blab-out")]
    out: PathBuf,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Sup-norm grid spacing as a fraction of min(r, wavelength).
    #[arg(long, global = true, default_value_t = 0.125)]
    grid_factor: f64,
    /// Sup-norm refinement stops at this fraction of the radius.
    #[arg(long, global = true, default_value_t = 1e-4)]
    refine_tol: f64,
    /// Accept fields without a declared band limit.
    #[arg(long, global = true)]
    force: bool,
}

/// Where the function under study comes from.
#[derive(Args, Clone, Default)]
struct Source {
    /// Harmonic expansion JSON {d, r_ref, terms: [[k, m, a]]}.
    #[arg(long)]
    expansion: Option<PathBuf>,
    /// Eigenfunction spec JSON {manifold, d_or_n, modes_or_coefficients, seed}.
    #[arg(long)]
    eigen: Option<PathBuf>,
    /// torus:d or sphere:n, for a random eigenfunction.
    #[arg(long)]
    manifold: Option<String>,
    /// Eigenvalue |m|² on tori.
    #[arg(long)]
    lambda: Option<String>,
    /// Number of lattice modes mixed on tori.
    #[arg(long, default_value_t = 2)]
    modes: usize,
    /// Spherical-harmonic degree on spheres; declared frequency N for `approx`.
    #[arg(long)]
    degree: Option<String>,
    /// Use the zonal harmonic on spheres instead of a random one.
    #[arg(long)]
    zonal: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Frequency N(center, r) of an expansion, or of the harmonic lift of an eigenfunction.
    ///
    /// With --r-grid a profile is written to frequency.csv.
    Freq {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        r: Option<f64>,
        /// a:b:n (log-spaced) or a comma list.
        #[arg(long)]
        r_grid: Option<String>,
        /// Comma-separated point; the origin (or x = 0, t = 0 for lifts) by default.
        #[arg(long)]
        center: Option<String>,
    },
    /// Doubling index log₂(⨍_{B(2r)} u² / ⨍_{B(r)} u²)/2.
    Doubling {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        center: Option<String>,
    },
    /// sup|∇φ|/sup|φ| on one ball with every bound and implied constant, or the L^p
    /// polynomial ratio of an expansion with --p.
    Bernstein {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        center: Option<String>,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        /// 1, 2 or inf (expansions only).
        #[arg(long)]
        p: Option<Lp>,
    },
    /// Grid of (λ, r, center) cells written to sweep.csv with regressions.json.
    ///
    /// A cell that fails is written with NaN entries, listed on stderr, and makes the
    /// exit status 1; the remaining cells are still written.
    Sweep {
        /// Sweep config JSON; when given, the other sweep flags are ignored.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        src: Source,
        /// a:b:n (log-spaced) or a comma list.
        #[arg(long)]
        r_grid: Option<String>,
        /// Interpret radii in wavelengths c/√λ.
        #[arg(long)]
        wavelength: bool,
        /// Centers per level, projected onto the nodal set.
        #[arg(long, default_value_t = 2)]
        centers: usize,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
    },
    /// Degree-5N truncation of the lift of an eigenfunction on B(center, r); --degree is N.
    Approx {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        center: Option<String>,
    },
    /// Dong's quantities on a surface: F(t) profile, doubling of M, and Δ log q at random points.
    ///
    /// Exits 1 when Δ log q drops below −λ + 2min(K,0) − 10⁻³λ at a retained point.
    Dong {
        #[command(flatten)]
        src: Source,
        #[arg(long)]
        r_grid: Option<String>,
        #[arg(long)]
        center: Option<String>,
        /// Sample points for the Δ log q check.
        #[arg(long, default_value_t = 200)]
        points: usize,
    },
    /// Trigonometric (N) and Markov (N²) extremal ratios.
    Baselines {
        #[arg(long)]
        n: usize,
    },
    /// Runs the invariant suite of every module; exits 1 on any failure.
    Verify {
        #[arg(long)]
        quick: bool,
    },
    /// Validates a sampled-field file and reports what can be computed from it.
    IngestCheck {
        path: PathBuf,
        #[arg(long)]
        format: Option<Format>,
        /// Ball for the interpolated sup on uniform torus grids.
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        center: Option<String>,
    },
}

/// An error with its exit status.
struct Failure(u8, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) => 3,
            Error::Config(_) | Error::Parse { .. } | Error::Json(_) | Error::Csv(_) | Error::InvalidArgument(_) | Error::Domain(_) => 2,
            _ => 1,
        };
        Failure(code, e.to_string())
    }
}

fn config_err(msg: impl Into<String>) -> Failure {
    Failure(2, msg.into())
}

type Res<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.common.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn policy(c: &Common) -> Res<ResolutionPolicy> {
    if !(c.grid_factor > 0.0) || !(c.refine_tol > 0.0) {
        return Err(config_err("--grid-factor and --refine-tol must be positive"));
    }
    Ok(ResolutionPolicy { grid_factor: c.grid_factor, refine_tol: c.refine_tol, force: c.force, ..ResolutionPolicy::default() })
}

fn parse_list(s: &str, what: &str) -> Res<Vec<f64>> {
    s.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| config_err(format!("bad number `{v}` in {what}")))).collect()
}

fn parse_r_grid(s: &str) -> Res<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    let grid = if parts.len() == 3 {
        let a: f64 = parts[0].parse().map_err(|_| config_err("bad --r-grid start"))?;
        let b: f64 = parts[1].parse().map_err(|_| config_err("bad --r-grid end"))?;
        let n: usize = parts[2].parse().map_err(|_| config_err("bad --r-grid count"))?;
        if !(a > 0.0 && b > a) || n == 0 {
            return Err(config_err("--r-grid a:b:n needs 0 < a < b and n ≥ 1"));
        }
        log_grid(a, b, n)
    } else {
        parse_list(s, "--r-grid")?
    };
    if grid.iter().any(|r| !(*r > 0.0)) {
        return Err(config_err("radii must be positive"));
    }
    Ok(grid)
}

fn parse_center(s: Option<&String>, dim: usize, default: Vec<f64>) -> Res<Vec<f64>> {
    match s {
        None => Ok(default),
        Some(s) => {
            let c = parse_list(s, "--center")?;
            if c.len() != dim {
                return Err(config_err(format!("--center needs {dim} coordinates, got {}", c.len())));
            }
            Ok(c)
        }
    }
}

fn single<T: std::str::FromStr>(s: &Option<String>, flag: &str) -> Res<Option<T>> {
    match s {
        None => Ok(None),
        Some(v) => v.trim().parse().map(Some).map_err(|_| config_err(format!("{flag} expects a single number, got `{v}`"))),
    }
}

fn integer_list(s: &Option<String>, flag: &str) -> Res<Vec<u64>> {
    match s {
        None => Ok(vec![]),
        Some(v) => v
            .split(',')
            .map(|x| {
                let f: f64 = x.trim().parse().map_err(|_| config_err(format!("bad {flag} value `{x}`")))?;
                if f < 0.0 || f.fract() != 0.0 {
                    return Err(config_err(format!("{flag} values must be nonnegative integers, got `{x}`")));
                }
                Ok(f as u64)
            })
            .collect(),
    }
}

/// Builds the eigenfunction named by --eigen or by --manifold/--lambda/--degree.
fn eigenfunction(src: &Source, seed: u64) -> Res<Eigenfunction<f64>> {
    if let Some(p) = &src.eigen {
        let mut spec = EigenSpec::read(p)?;
        spec.seed = spec.seed.or(Some(seed));
        return Ok(spec.build()?);
    }
    let m = Manifold::<f64>::parse(src.manifold.as_deref().ok_or_else(|| config_err("give --eigen, --expansion or --manifold"))?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match m {
        Manifold::Torus { dim, .. } => {
            let lam: f64 = single(&src.lambda, "--lambda")?.ok_or_else(|| config_err("tori need --lambda"))?;
            if lam < 1.0 || lam.fract() != 0.0 {
                return Err(config_err("on the standard torus λ = |m|² is a positive integer"));
            }
            Ok(Eigenfunction::Torus(TorusEigenfunction::random(dim, lam as i64, src.modes, &mut rng)?))
        }
        Manifold::Sphere { n } => {
            let k: usize = single(&src.degree, "--degree")?.ok_or_else(|| config_err("spheres need --degree"))?;
            if src.zonal {
                Ok(Eigenfunction::Sphere(SphereEigenfunction::zonal(n, k)?))
            } else {
                let s = SphereEigenfunction::random(n, k, &mut rng)?;
                Ok(make_sphere_eigenfunction(n, k, s.coefficients().to_vec())?)
            }
        }
        _ => Err(config_err(format!("no eigenfunction family on {}", m.label()))),
    }
}

fn default_center(m: &Manifold<f64>) -> Vec<f64> {
    let mut c = vec![0.0; m.ambient_dim()];
    if let Manifold::Sphere { .. } = m {
        c[0] = 1.0;
    }
    c
}

fn emit(manifest: &mut RunManifest, dir: &Path, name: &str, contents: &str) -> Res<()> {
    manifest.write_artifact(dir, name, contents.as_bytes())?;
    Ok(())
}

fn fmt_ratio(v: f64) -> String {
    if (v - v.round()).abs() < 1e-6 {
        format!("{}", v.round() as i64)
    } else {
        format!("{v:.6}")
    }
}

fn run(cli: &Cli) -> Res<u8> {
    let c = &cli.common;
    let out = &c.out;
    let pol = policy(c)?;
    let (name, config) = describe(&cli.cmd, c);
    let mut manifest = RunManifest::start(name, config, Some(c.seed));
    let mut status = 0u8;
    match &cli.cmd {
        Cmd::Freq { src, r, r_grid, center } => {
            let (field, center, label): (Box<dyn ScalarField<f64>>, Vec<f64>, String) = freq_field(src, center.as_ref(), c.seed)?;
            let a = CoefficientField::identity(center.len());
            if let Some(r) = r {
                let n = frequency_numeric(field.as_ref(), &a, &center, *r, None)?;
                println!("{n:.6}");
                emit(&mut manifest, out, "frequency.json", &json!({"field": label, "center": center, "r": r, "frequency": n}).to_string())?;
            }
            if let Some(g) = r_grid {
                let prof = frequency_profile(field.as_ref(), &a, &center, &parse_r_grid(g)?)?;
                emit(&mut manifest, out, "frequency.csv", &prof.to_csv())?;
                if !prof.is_monotone(1e-7) {
                    eprintln!("frequency decreases by {:.3e} somewhere on the grid", prof.max_downward_violation);
                    status = 1;
                }
                println!("max downward step {:.3e}", prof.max_downward_violation);
            }
            if r.is_none() && r_grid.is_none() {
                return Err(config_err("freq needs --r or --r-grid"));
            }
        }
        Cmd::Doubling { src, r, center } => {
            let (field, center, label) = freq_field(src, center.as_ref(), c.seed)?;
            let di = doubling_index(field.as_ref(), &center, *r)?;
            println!("{di:.6}");
            emit(&mut manifest, out, "doubling.json", &json!({"field": label, "center": center, "r": r, "doubling_index": di}).to_string())?;
        }
        Cmd::Bernstein { src, r, center, delta, p } => {
            if let Some(path) = &src.expansion {
                let exp = read_expansion(path)?;
                let p = p.unwrap_or(Lp::Inf);
                let res = polynomial_bernstein_lp(&exp, *r, p, &pol)?;
                println!("lhs {:.9e} rhs {:.9e} constant {:.6}", res.lhs, res.rhs, res.constant);
                emit(&mut manifest, out, "bernstein.json", &json!({"p": p.to_string(), "r": r, "result": res}).to_string())?;
            } else {
                if p.is_some() {
                    return Err(config_err("--p applies to --expansion inputs"));
                }
                let ef = eigenfunction(src, c.seed)?;
                let m = ef.base_manifold();
                let center = parse_center(center.as_ref(), m.ambient_dim(), default_center(&m))?;
                let ball = GeodesicBall::new(m, center, *r)?;
                let rep = eigen_bernstein(&ef, &ball, &pol, *delta)?;
                println!(
                    "ratio {:.9e} c_main {:.6} c_2d {:.6} c_dong {:.6} c_df {:.6}",
                    rep.ratio, rep.constants.c_main, rep.constants.c_2d, rep.constants.c_dong, rep.constants.c_df
                );
                emit(&mut manifest, out, "bernstein.json", &serde_json::to_string_pretty(&rep).map_err(Error::from)?)?;
            }
        }
        Cmd::Sweep { config, src, r_grid, wavelength, centers, delta } => {
            let cfg = match config {
                Some(p) => {
                    let text = blab_core::io::read_text(p)?;
                    serde_json::from_str::<SweepConfig>(&text).map_err(|e| Error::Parse { line: e.line(), msg: e.to_string() })?
                }
                None => sweep_config_from_flags(src, r_grid.as_deref(), *wavelength, *centers, *delta, c)?,
            };
            manifest.config["sweep_config"] = serde_json::to_value(&cfg).map_err(Error::from)?;
            manifest.seed = Some(cfg.seed);
            let res = sweep(&cfg)?;
            emit(&mut manifest, out, "sweep.csv", &res.to_csv()?)?;
            emit(&mut manifest, out, "regressions.json", &serde_json::to_string_pretty(&res.regressions).map_err(Error::from)?)?;
            for reg in &res.regressions {
                println!("{} slope {:.4} r2 {:.4} n {}", reg.regime, reg.slope, reg.r2, reg.n_points);
            }
            if let Some(mc) = res.max_constants() {
                println!("max c_main {:.4} max c_2d {:.4}", mc.c_main, mc.c_2d);
            }
            for (i, e) in res.failures() {
                eprintln!("row {i} failed: {e}");
                status = 1;
            }
        }
        Cmd::Approx { src, r, center } => {
            let n: usize = single(&src.degree, "--degree")?.ok_or_else(|| config_err("approx needs --degree N"))?;
            let ef = eigenfunction(src, c.seed)?;
            let lf = lift(&ef)?;
            let m = lf.manifold();
            let mut def = default_center(&ef.base_manifold());
            def.push(0.0);
            let center = parse_center(center.as_ref(), m.ambient_dim(), def)?;
            let rep = approximate_by_truncation(&lf, &center, *r, n, None, &pol)?;
            println!("relative_tail {:.6e} fit_residual {:.3e}", rep.relative_tail, rep.fit_residual);
            emit(&mut manifest, out, "head.json", &rep.head.to_json())?;
            let summary = json!({
                "n_declared": n, "r": r, "center": center, "tail_sup": rep.tail_sup, "relative_tail": rep.relative_tail,
                "ball_mean_abs": rep.ball_mean_abs, "fit_residual": rep.fit_residual, "fit_order": rep.fit_order,
                "closed_form_tail": rep.closed_form_tail,
            });
            emit(&mut manifest, out, "approx.json", &serde_json::to_string_pretty(&summary).map_err(Error::from)?)?;
        }
        Cmd::Dong { src, r_grid, center, points } => {
            let ef = eigenfunction(src, c.seed)?;
            let m = ef.base_manifold();
            let state = DongState::new(&ef)?;
            let x0 = parse_center(center.as_ref(), m.ambient_dim(), default_center(&m))?;
            let lam = ef.eigenvalue();
            let grid = match r_grid {
                Some(g) => parse_r_grid(g)?,
                None => log_grid((1.0 / lam.sqrt()).min(0.2), 0.4, 12),
            };
            let prof = dong_f_profile(&state, &x0, &grid, &pol)?;
            emit(&mut manifest, out, "dong_profile.csv", &prof.to_csv())?;
            let doubling = dong_doubling(&state, &x0, &grid, &pol)?;
            let c_fit = doubling.iter().fold(0.0f64, |a, v| a.max(v / lam.sqrt()));
            let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
            let pts = random_points(&m, *points, &mut rng);
            let lq = dong_log_q_laplacian_check(&ef, &pts, 1e-3)?;
            println!("lambda {lam} min_margin {:.6e} retained {} doubling_C {:.6}", lq.min_margin, lq.retained, c_fit);
            emit(
                &mut manifest,
                out,
                "dong.json",
                &serde_json::to_string_pretty(&json!({"log_q": lq, "doubling": doubling, "radii": grid, "doubling_constant": c_fit}))
                    .map_err(Error::from)?,
            )?;
            if lq.min_margin < -1e-3 * lam {
                eprintln!("Δ log q falls below its bound by {:.3e}", -lq.min_margin);
                status = 1;
            }
        }
        Cmd::Baselines { n } => {
            let (t, m) = classical_baselines(*n)?;
            println!("{} {}", fmt_ratio(t), fmt_ratio(m));
            emit(&mut manifest, out, "baselines.json", &json!({"n": n, "trig": t, "markov": m}).to_string())?;
            let nf = *n as f64;
            if (t - nf).abs() > 1e-6 || (m - nf * nf).abs() > 1e-6 * nf.max(1.0) {
                status = 1;
            }
        }
        Cmd::Verify { quick } => {
            let rep = verify::run_suite(*quick);
            for ch in &rep.checks {
                println!("{} {:<14} {:<55} {}", if ch.passed { "PASS" } else { "FAIL" }, ch.module, ch.name, ch.detail);
            }
            emit(&mut manifest, out, "verify.json", &serde_json::to_string_pretty(&rep).map_err(Error::from)?)?;
            if !rep.passed() {
                status = 1;
            }
        }
        Cmd::IngestCheck { path, format, r, center } => {
            let s = ingest(path, *format)?;
            println!("{} points on {} ({} gradients)", s.len(), s.domain.label(), if s.gradients.is_some() { "with" } else { "without" });
            let mut info = json!({"points": s.len(), "domain": s.domain.label(), "provenance": s.provenance});
            if s.gradients.is_some() {
                let g = s.sample_gradient_ratio()?;
                println!("sample gradient ratio {g:.6e}");
                info["sample_gradient_ratio"] = json!(g);
            }
            if let Some(r) = r {
                let it = TorusInterpolant::new(&s)?;
                let cen = parse_center(center.as_ref(), s.domain.ambient_dim(), default_center(&s.domain))?;
                let sup = sup_norm(&it, &GeodesicBall::new(s.domain.clone(), cen, *r)?, &pol)?.sup;
                println!("interpolated sup {sup:.9e}");
                info["interpolated_sup"] = json!(sup);
            }
            emit(&mut manifest, out, "ingest.json", &info.to_string())?;
        }
    }
    manifest.finish(out)?;
    Ok(status)
}

/// The field whose frequency is measured: an expansion, or the lift of an eigenfunction
/// (centred at t = 0).
/// Field, center and a label for the log.
type FreqTarget = (Box<dyn ScalarField<f64>>, Vec<f64>, String);

fn freq_field(src: &Source, center: Option<&String>, seed: u64) -> Res<FreqTarget> {
    if let Some(p) = &src.expansion {
        let exp: Expansion = read_expansion(p)?;
        let d = exp.d();
        let center = parse_center(center, d, vec![0.0; d])?;
        return Ok((Box::new(exp), center, p.display().to_string()));
    }
    let ef = eigenfunction(src, seed)?;
    let lf = lift(&ef)?;
    if !ef.base_manifold().is_flat() {
        return Err(config_err("frequency is computed in Euclidean coordinates; use a torus or an expansion"));
    }
    let m = lf.manifold();
    let center = parse_center(center, m.ambient_dim(), vec![0.0; m.ambient_dim()])?;
    Ok((Box::new(lf), center, m.label()))
}

fn sweep_config_from_flags(src: &Source, r_grid: Option<&str>, wavelength: bool, centers: usize, delta: f64, c: &Common) -> Res<SweepConfig> {
    let manifold = src.manifold.clone().unwrap_or_else(|| "torus:2".into());
    let m = Manifold::<f64>::parse(&manifold)?;
    let (family, levels) = match m {
        Manifold::Torus { .. } => (Family::TorusRandom { modes: src.modes }, integer_list(&src.lambda, "--lambda")?),
        Manifold::Sphere { .. } => {
            (if src.zonal { Family::SphereZonal } else { Family::SphereRandom }, integer_list(&src.degree, "--degree")?)
        }
        _ => return Err(config_err(format!("no eigenfunction family on {}", m.label()))),
    };
    let d = SweepConfig::default();
    Ok(SweepConfig {
        manifold,
        family,
        levels: if levels.is_empty() { d.levels } else { levels },
        radii: match r_grid {
            Some(g) => parse_r_grid(g)?,
            None if wavelength => vec![0.25, 0.5, 1.0, 2.0],
            None => d.radii,
        },
        radius_scale: if wavelength { RadiusScale::Wavelength } else { RadiusScale::Absolute },
        centers: Centers::Nodal { count: centers },
        delta,
        seed: c.seed,
        grid_factor: c.grid_factor,
        refine_tol: c.refine_tol,
        force: c.force,
    })
}

/// Subcommand name and a JSON snapshot of its flags for the manifest.
fn describe(cmd: &Cmd, c: &Common) -> (&'static str, serde_json::Value) {
    let common = json!({"seed": c.seed, "grid_factor": c.grid_factor, "refine_tol": c.refine_tol, "force": c.force});
    let src = |s: &Source| {
        json!({"expansion": s.expansion, "eigen": s.eigen, "manifold": s.manifold, "lambda": s.lambda, "modes": s.modes,
               "degree": s.degree, "zonal": s.zonal})
    };
    let (name, args) = match cmd {
        Cmd::Freq { src: s, r, r_grid, center } => ("freq", json!({"source": src(s), "r": r, "r_grid": r_grid, "center": center})),
        Cmd::Doubling { src: s, r, center } => ("doubling", json!({"source": src(s), "r": r, "center": center})),
        Cmd::Bernstein { src: s, r, center, delta, p } => {
            ("bernstein", json!({"source": src(s), "r": r, "center": center, "delta": delta, "p": p.map(|p| p.to_string())}))
        }
        Cmd::Sweep { config, src: s, r_grid, wavelength, centers, delta } => (
            "sweep",
            json!({"config": config, "source": src(s), "r_grid": r_grid, "wavelength": wavelength, "centers": centers, "delta": delta}),
        ),
        Cmd::Approx { src: s, r, center } => ("approx", json!({"source": src(s), "r": r, "center": center})),
        Cmd::Dong { src: s, r_grid, center, points } => ("dong", json!({"source": src(s), "r_grid": r_grid, "center": center, "points": points})),
        Cmd::Baselines { n } => ("baselines", json!({"n": n})),
        Cmd::Verify { quick } => ("verify", json!({"quick": quick})),
        Cmd::IngestCheck { path, format, r, center } => {
            ("ingest-check", json!({"path": path, "format": format.map(|f| format!("{f:?}")), "r": r, "center": center}))
        }
    };
    (name, json!({"common": common, "args": args}))
}
