//! Command-line driver for blow-up profile computation and analysis.
//!
//! Subcommands: `solve` (one profile), `branch` (parameter continuation),
//! `oscillate` (interface component orbit), `spectral` (kernel basis and
//! bi-orthonormality report), `kernel` (kernel table), `classify`
//! (multiindex of a stored profile), `periodic` (spatial periodic orbit).
//!
//! Exit codes: 0 success, 2 convergence failure (diagnostics still
//! written), 3 invalid arguments.

use pme4_cli::archive;

use anyhow::{anyhow, bail, Context, Result};
use archive::{
    branch_csv, csv_float, load_branch, load_profile, log_interface_csv, profile_csv, save_json,
    sniff_kind, BranchArchive, ProfileArchive,
};
use clap::{Args, Parser, Subcommand};
use pme4_core::continuation::{
    continue_branch_opts, BranchParameter, ContinueOptions, Termination,
};
use pme4_core::oscillatory::{self, OscComponent};
use pme4_core::profiles::{
    classify, ground_profile, interface_estimate, periodic_spatial, solve_profile, ProfileForm,
    ProfileGuess, ProfileProblemSpec, ProfileSolution, Symmetry,
};
use pme4_core::spectral::{adjoint_operator, adjoint_poly_unnormalized, QuadConfig, SpectralBasis};
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "pme4",
    about = "Blow-up similarity profiles of the fourth-order porous medium equation with source",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one similarity profile boundary-value problem.
    Solve(SolveArgs),
    /// Continue a stored profile in a parameter.
    Branch(BranchArgs),
    /// Compute the oscillatory interface component orbit.
    Oscillate(OscillateArgs),
    /// Kernel basis report: bi-orthonormality and eigen-identities.
    Spectral(SpectralArgs),
    /// Tabulate the bi-harmonic kernel and its derivatives.
    Kernel(KernelArgs),
    /// Print the multiindex of a stored profile.
    Classify(ClassifyArgs),
    /// Locate the spatially periodic orbit of the variational equation.
    Periodic(PeriodicArgs),
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    n: f64,
    #[arg(long)]
    p: f64,
    /// even | odd
    #[arg(long, default_value = "even")]
    symmetry: String,
    #[arg(long, default_value_t = 1e-10)]
    eps: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// auto | s | general | normalized | sign-limit | f-profile
    #[arg(long, default_value = "auto")]
    form: String,
    /// Half-domain radius (defaults to the regime's natural value).
    #[arg(long)]
    radius: Option<f64>,
    /// Retry the cap guess at several widths until the ground profile
    /// (multiindex +2) is found.
    #[arg(long)]
    ground: bool,
    /// Width scale of the initial cap guess.
    #[arg(long, default_value_t = 1.0)]
    guess_scale: f64,
    /// Superpose signed shifted copies of a stored profile as the initial
    /// guess, e.g. "-1@-5.4,+1@5.4".
    #[arg(long)]
    glue: Option<String>,
    /// Base profile archive for --glue.
    #[arg(long)]
    glue_from: Option<PathBuf>,
    /// Output profile archive (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Also write a plot-ready profile table.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Also write the log-scale interface table.
    #[arg(long)]
    log_interface: Option<PathBuf>,
}

#[derive(Args)]
struct BranchArgs {
    /// Seed profile archive (or a branch archive to resume).  May repeat;
    /// multiple seeds run concurrently and --out must be a directory.
    #[arg(long, required = true)]
    from: Vec<PathBuf>,
    /// p | mu
    #[arg(long, default_value = "p")]
    param: String,
    #[arg(long)]
    to: f64,
    #[arg(long, default_value_t = 0.01)]
    dp: f64,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    /// Keep continuing after a detected jump.
    #[arg(long)]
    continue_on_jump: bool,
    /// Land exactly on multiples of this parameter grid.
    #[arg(long)]
    snap: Option<f64>,
    /// Directory for per-point profile archives (enables resume).
    #[arg(long)]
    archive_dir: Option<PathBuf>,
    /// Maximum concurrent seeds.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Output branch archive (JSON), or a directory with several seeds.
    #[arg(long)]
    out: PathBuf,
    /// Also write the branch table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct OscillateArgs {
    /// PME exponent; use "inf" for the sign-limit equation.
    #[arg(long)]
    n: String,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct SpectralArgs {
    #[arg(long, default_value_t = 6)]
    lmax: usize,
    #[arg(long, default_value_t = 3.2)]
    cutoff: f64,
    #[arg(long, default_value_t = 40)]
    panels: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct KernelArgs {
    #[arg(long, default_value_t = 10.0)]
    ymax: f64,
    #[arg(long, default_value_t = 401)]
    points: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    input: PathBuf,
}

#[derive(Args)]
struct PeriodicArgs {
    #[arg(long)]
    n: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    json: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(3),
            };
        }
    };
    let outcome = match cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Branch(args) => cmd_branch(args),
        Command::Oscillate(args) => cmd_oscillate(args),
        Command::Spectral(args) => cmd_spectral(args),
        Command::Kernel(args) => cmd_kernel(args),
        Command::Classify(args) => cmd_classify(args),
        Command::Periodic(args) => cmd_periodic(args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

fn max_nodes_override() -> Option<usize> {
    std::env::var("BLOWUP_MAX_NODES")
        .ok()
        .and_then(|v| v.parse().ok())
}

fn command_line() -> String {
    let args: Vec<String> = std::env::args().collect();
    args.join(" ")
}

#[derive(Serialize)]
struct FailureDiagnostics {
    error: String,
    command: String,
}

fn build_spec(args: &SolveArgs) -> Result<ProfileProblemSpec> {
    if !(args.p > 1.0) {
        bail!("p must exceed 1 (got {})", args.p);
    }
    if !(args.n > 0.0) {
        bail!("n must be positive (got {})", args.n);
    }
    let mut spec = ProfileProblemSpec::new(args.n, args.p).map_err(|e| anyhow!("{e}"))?;
    spec.eps = args.eps;
    spec.symmetry = match args.symmetry.as_str() {
        "even" => Symmetry::Even,
        "odd" => Symmetry::Odd,
        other => bail!("--symmetry must be even or odd, got '{other}'"),
    };
    match args.form.as_str() {
        "auto" => {}
        "s" => spec.form = ProfileForm::SRegime,
        "general" => spec.form = ProfileForm::General,
        "normalized" => spec.form = ProfileForm::Normalized,
        "sign-limit" => spec.form = ProfileForm::SignLimit,
        "f-profile" => spec.form = ProfileForm::FProfile,
        other => bail!("unknown --form '{other}'"),
    }
    if let Some(r) = args.radius {
        spec.radius = r;
    }
    if let Some(cap) = max_nodes_override() {
        spec.max_nodes = cap;
    }
    spec.validate().map_err(|e| anyhow!("{e}"))?;
    Ok(spec)
}

fn cmd_solve(args: SolveArgs) -> Result<ExitCode> {
    let spec = build_spec(&args)?;
    let solved = if let Some(gl) = &args.glue {
        let base_path = args
            .glue_from
            .as_ref()
            .ok_or_else(|| anyhow!("--glue requires --glue-from BASE.json"))?;
        let base = load_profile(base_path)?;
        let comps = parse_glue(gl)?;
        pme4_core::profiles::glue_profile(&spec, &base, &comps, args.tol)
    } else if args.ground {
        ground_profile(&spec, args.tol)
    } else {
        let guess = match spec.symmetry {
            Symmetry::Even => ProfileGuess::default_cap_scaled(&spec, args.guess_scale),
            Symmetry::Odd => ProfileGuess::default_dipole(&spec),
        };
        solve_profile(&spec, &guess, args.tol)
    };
    match solved {
        Ok(sol) => {
            let arch = ProfileArchive::from_solution(&sol, command_line());
            save_json(&args.out, &arch)?;
            if let Some(csv) = &args.csv {
                std::fs::write(csv, profile_csv(&sol))?;
            }
            if let Some(li) = &args.log_interface {
                let y0 = sol
                    .y0
                    .ok_or_else(|| anyhow!("--log-interface requires a compact-support run"))?;
                std::fs::write(li, log_interface_csv(&sol, y0, 400))?;
            }
            println!(
                "converged n={} p={} F(0)={:.6} sup={:.6} residual={:.3e} y0={} sigma={{{}}} nodes={}",
                spec.params.n,
                spec.params.p,
                sol.f_at_origin(),
                sol.sup_norm(),
                sol.residual,
                sol.y0.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into()),
                sol.sigma.as_ref().map(|s| s.notation()).unwrap_or_default(),
                sol.mesh().len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            let diag = FailureDiagnostics {
                error: format!("{e}"),
                command: command_line(),
            };
            save_json(&args.out, &diag)?;
            eprintln!("convergence failure: {e}");
            Ok(ExitCode::from(2))
        }
    }
}

fn parse_glue(s: &str) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for tok in s.split(',') {
        let (sign, shift) = tok
            .split_once('@')
            .ok_or_else(|| anyhow!("glue component '{tok}' is not SIGN@SHIFT"))?;
        out.push((sign.trim().parse()?, shift.trim().parse()?));
    }
    Ok(out)
}

fn cmd_branch(args: BranchArgs) -> Result<ExitCode> {
    let param = match args.param.as_str() {
        "p" => BranchParameter::P,
        "mu" => BranchParameter::Mu,
        other => bail!("--param must be p or mu, got '{other}'"),
    };
    if args.from.len() > 1 && !args.out.is_dir() {
        std::fs::create_dir_all(&args.out)
            .with_context(|| format!("creating {}", args.out.display()))?;
    }
    let jobs: Vec<(usize, PathBuf)> = args.from.iter().cloned().enumerate().collect();
    let results: Vec<Result<(PathBuf, Termination)>> = if args.parallel > 1 && jobs.len() > 1 {
        std::thread::scope(|scope| {
            let handles: Vec<_> = jobs
                .iter()
                .map(|(i, path)| {
                    let args = &args;
                    scope.spawn(move || run_one_branch(args, *i, path, param))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("branch thread"))
                .collect()
        })
    } else {
        jobs.iter()
            .map(|(i, path)| run_one_branch(&args, *i, path, param))
            .collect()
    };
    let mut failure = false;
    for result in results {
        match result {
            Ok((path, term)) => {
                println!(
                    "branch written to {} (termination: {})",
                    path.display(),
                    term.as_str()
                );
                if matches!(term, Termination::NewtonFailure | Termination::Singularity) {
                    failure = true;
                }
            }
            Err(e) => {
                eprintln!("branch failed: {e:#}");
                failure = true;
            }
        }
    }
    Ok(if failure {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn run_one_branch(
    args: &BranchArgs,
    index: usize,
    from: &Path,
    param: BranchParameter,
) -> Result<(PathBuf, Termination)> {
    // A branch archive as the seed resumes from its last recorded point.
    let (seed, prior_points): (ProfileSolution, Vec<archive::BranchPointDto>) =
        match sniff_kind(from)? {
            "profile" => (load_profile(from)?, Vec::new()),
            _ => {
                let prior = load_branch(from)?;
                let seed_path = {
                    let last = prior
                        .points
                        .last()
                        .ok_or_else(|| anyhow!("branch archive has no points"))?;
                    last.solution_path.clone().ok_or_else(|| {
                        anyhow!(
                            "resume needs per-point archives; rerun the original branch with --archive-dir"
                        )
                    })?
                };
                let mut pts = prior.points;
                // The seed point is re-emitted by the continuation.
                pts.pop();
                (load_profile(Path::new(&seed_path))?, pts)
            }
        };
    let n = seed.spec.params.n;
    let out_path = if args.from.len() > 1 {
        args.out.join(format!("branch_{index}.json"))
    } else {
        args.out.clone()
    };
    if let Some(dir) = &args.archive_dir {
        std::fs::create_dir_all(dir)?;
    }
    let archive_dir = args.archive_dir.clone();
    let out_for_sink = out_path.clone();
    let command = command_line();
    let mut acc: Vec<archive::BranchPointDto> = prior_points;
    let mut sink_error: Option<anyhow::Error> = None;
    let branch = {
        let command_for_sink = command.clone();
        let acc_ref = &mut acc;
        let sink_error_ref = &mut sink_error;
        let opts = ContinueOptions {
            dp0: args.dp,
            tol: args.tol,
            eps: args.eps,
            stop_on_jump: !args.continue_on_jump,
            snap_grid: args.snap,
            on_accept: Some(Box::new(move |pt, sol| {
                let mut dto = archive::BranchPointDto {
                    param: pt.param,
                    f0_at_origin: pt.f0_at_origin,
                    sup_norm: pt.sup_norm,
                    l2_norm: pt.l2_norm,
                    y0: pt.y0,
                    sigma: pt.sigma.as_ref().map(|s| s.notation()),
                    solution_path: None,
                };
                if let Some(dir) = &archive_dir {
                    let file = dir.join(format!("profile_{index}_{:08}.json", acc_ref.len()));
                    let arch = ProfileArchive::from_solution(sol, command_for_sink.clone());
                    if let Err(e) = save_json(&file, &arch) {
                        *sink_error_ref = Some(e);
                    }
                    dto.solution_path = Some(file.display().to_string());
                }
                acc_ref.push(dto);
                // Crash-safe persistence after every accepted point.
                let partial = BranchArchive {
                    version: archive::BRANCH_SCHEMA_VERSION,
                    parameter_name: param.as_str().to_string(),
                    n,
                    termination: Termination::RangeEnd.as_str().to_string(),
                    points: (*acc_ref).clone(),
                    provenance: archive::ProvenanceDto {
                        command: command_for_sink.clone(),
                        tolerances: archive::TolerancesDto {
                            rtol: args.tol,
                            atol: args.tol,
                            eps: args.eps,
                        },
                    },
                };
                let _ = save_json(&out_for_sink, &partial);
            })),
            ..Default::default()
        };
        continue_branch_opts(&seed, param, args.to, opts).map_err(|e| anyhow!("{e}"))?
    };
    if let Some(e) = sink_error {
        return Err(e);
    }
    let mut arch = BranchArchive::from_branch(&branch, n, command, args.tol, args.eps);
    // Merge in the archived solution paths and any resumed prefix.
    let fresh = std::mem::take(&mut arch.points);
    let prior_len = acc.len().saturating_sub(fresh.len());
    arch.points = acc;
    debug_assert!(arch.points.len() >= fresh.len());
    let _ = prior_len;
    save_json(&out_path, &arch)?;
    if let Some(csv) = &args.csv {
        std::fs::write(csv, branch_csv(&arch))?;
    }
    println!(
        "branch {}: {} points, {} -> {}, termination {}",
        index,
        arch.points.len(),
        arch.points
            .first()
            .map(|p| format!("{:.6}", p.param))
            .unwrap_or_default(),
        arch.points
            .last()
            .map(|p| format!("{:.6}", p.param))
            .unwrap_or_default(),
        arch.termination
    );
    Ok((out_path, branch.termination))
}

#[derive(Serialize)]
struct OscJson {
    n: f64,
    mu: f64,
    period: f64,
    amplitude: f64,
    residual: f64,
    half_period_antisymmetry: f64,
    sign_changes_per_period: usize,
}

fn osc_csv(comp: &OscComponent) -> String {
    let mut out = String::from("s,phi,dphi,d2phi\n");
    for s in &comp.samples {
        out.push_str(&format!(
            "{},{},{},{}\n",
            csv_float(s[0]),
            csv_float(s[1]),
            csv_float(s[2]),
            csv_float(s[3])
        ));
    }
    out
}

fn cmd_oscillate(args: OscillateArgs) -> Result<ExitCode> {
    let n = if args.n == "inf" {
        f64::INFINITY
    } else {
        args.n
            .parse::<f64>()
            .context("--n must be a number or 'inf'")?
    };
    match oscillatory::oscillatory_orbit(n) {
        Ok(comp) => {
            std::fs::write(&args.out, osc_csv(&comp))?;
            if let Some(json) = &args.json {
                save_json(
                    json,
                    &OscJson {
                        n: comp.n,
                        mu: comp.mu,
                        period: comp.period,
                        amplitude: comp.amplitude,
                        residual: comp.residual,
                        half_period_antisymmetry: comp.half_period_antisymmetry,
                        sign_changes_per_period: comp.sign_changes_per_period(),
                    },
                )?;
            }
            println!(
                "oscillatory component n={}: period={:.9} amplitude={:.6e} residual={:.3e}",
                args.n, comp.period, comp.amplitude, comp.residual
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            save_json(
                &args.out.with_extension("json"),
                &FailureDiagnostics {
                    error: format!("{e}"),
                    command: command_line(),
                },
            )?;
            eprintln!("convergence failure: {e}");
            Ok(ExitCode::from(2))
        }
    }
}

#[derive(Serialize)]
struct SpectralReport {
    l_max: usize,
    kernel_mass: f64,
    kernel_at_origin: f64,
    max_gram_deviation: f64,
    gram: Vec<Vec<f64>>,
    max_eigen_identity_error: f64,
    max_kernel_ode_residual: f64,
}

fn cmd_spectral(args: SpectralArgs) -> Result<ExitCode> {
    let basis = SpectralBasis::new(
        args.lmax,
        QuadConfig {
            cutoff: args.cutoff,
            panels: args.panels,
        },
    )
    .map_err(|e| anyhow!("{e}"))?;
    let gram = basis.biorthogonality(args.lmax);
    let mut max_dev = 0.0f64;
    for (l, row) in gram.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            let want = if l == k { 1.0 } else { 0.0 };
            max_dev = max_dev.max((v - want).abs());
        }
    }
    // Coefficient-level adjoint eigen-identity error over l <= 8.
    let mut eig_err = 0.0f64;
    for l in 0..=8usize {
        let q = adjoint_poly_unnormalized(l);
        let lhs = adjoint_operator(&q);
        let rhs = q.scaled(-(l as f64) / 4.0);
        for i in 0..lhs.coeffs.len().max(rhs.coeffs.len()) {
            let a = lhs.coeffs.get(i).copied().unwrap_or(0.0);
            let b = rhs.coeffs.get(i).copied().unwrap_or(0.0);
            eig_err = eig_err.max((a - b).abs());
        }
    }
    let mut ode_res = 0.0f64;
    for j in 0..=64 {
        let y = -8.0 + 16.0 * j as f64 / 64.0;
        ode_res = ode_res.max(basis.kernel_ode_residual(y).abs());
    }
    let report = SpectralReport {
        l_max: args.lmax,
        kernel_mass: basis.kernel_mass(),
        kernel_at_origin: basis.kernel(0.0),
        max_gram_deviation: max_dev,
        gram,
        max_eigen_identity_error: eig_err,
        max_kernel_ode_residual: ode_res,
    };
    save_json(&args.out, &report)?;
    println!(
        "spectral report l<={}: mass={:.12} max|G-I|={:.3e} eigen-identity={:.1e} ode-residual={:.2e}",
        args.lmax,
        report.kernel_mass,
        report.max_gram_deviation,
        report.max_eigen_identity_error,
        report.max_kernel_ode_residual
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_kernel(args: KernelArgs) -> Result<ExitCode> {
    if args.points < 2 {
        bail!("--points must be at least 2");
    }
    let basis = SpectralBasis::with_defaults(4);
    let mut out = String::from("y,F,dF,d2F,d3F\n");
    for j in 0..args.points {
        let y = -args.ymax + 2.0 * args.ymax * j as f64 / (args.points - 1) as f64;
        let d = basis.kernel_derivs_upto(3, y);
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            csv_float(y),
            csv_float(d[0]),
            csv_float(d[1]),
            csv_float(d[2]),
            csv_float(d[3])
        ));
    }
    std::fs::write(&args.out, out)?;
    println!(
        "kernel table on [-{0}, {0}] with {1} points written",
        args.ymax, args.points
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_classify(args: ClassifyArgs) -> Result<ExitCode> {
    let sol = load_profile(&args.input)?;
    let sigma = classify(&sol).map_err(|e| anyhow!("{e}"))?;
    let est = interface_estimate(&sol).ok();
    println!(
        "sigma={{{}}} y0={} zero_count={}",
        sigma.notation(),
        est.as_ref()
            .map(|e| format!("{:.4}", e.y0))
            .unwrap_or_else(|| "-".into()),
        est.as_ref()
            .map(|e| e.zero_count.to_string())
            .unwrap_or_else(|| "-".into()),
    );
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct PeriodicJson {
    n: f64,
    shoot_d2: f64,
    period: f64,
    max_value: f64,
    mean_value: f64,
    window: f64,
}

fn cmd_periodic(args: PeriodicArgs) -> Result<ExitCode> {
    match periodic_spatial(args.n) {
        Ok(orbit) => {
            let mut out = String::from("y,F,dF,d2F,d3F\n");
            for s in &orbit.samples {
                out.push_str(&format!(
                    "{},{},{},{},{}\n",
                    csv_float(s[0]),
                    csv_float(s[1]),
                    csv_float(s[2]),
                    csv_float(s[3]),
                    csv_float(s[4])
                ));
            }
            std::fs::write(&args.out, out)?;
            if let Some(json) = &args.json {
                save_json(
                    json,
                    &PeriodicJson {
                        n: orbit.n,
                        shoot_d2: orbit.shoot_d2,
                        period: orbit.period,
                        max_value: orbit.max_value,
                        mean_value: orbit.mean_value,
                        window: orbit.window,
                    },
                )?;
            }
            println!(
                "periodic orbit n={}: period={:.6} max={:.6} mean={:.4} shot F''(0)={:.10}",
                args.n, orbit.period, orbit.max_value, orbit.mean_value, orbit.shoot_d2
            );
            Ok(ExitCode::SUCCESS)
        }
        Err(e) => {
            save_json(
                &args.out.with_extension("json"),
                &FailureDiagnostics {
                    error: format!("{e}"),
                    command: command_line(),
                },
            )?;
            eprintln!("convergence failure: {e}");
            Ok(ExitCode::from(2))
        }
    }
}
