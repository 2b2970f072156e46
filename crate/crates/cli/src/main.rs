//! `sparse-tomo` command-line front end.
//!
//! Every run prints one JSON manifest line (tool, version, subcommand and
//! resolved arguments) to standard error before the results, which go to
//! `--out` or standard output. Exit codes: 0 success, 1 domain error,
//! 2 usage error.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use sparse_tomo::analysis::{
    expected_dims, expected_zero_rays, tail_bound, thresholds, wendel_probability, wendel_probability_exact,
    ThresholdReport, GOLDEN_DELTA,
};
use sparse_tomo::experiments::{
    fmt_sig, run_grid, run_trial, GridConfig, SignalKind, TrialOptions, Variant, DEFAULT_EPSILON,
};
use sparse_tomo::geometry::{build_measurement_matrix, build_nullspace_basis, perturb, Geometry, Normalization};
use sparse_tomo::mm;
use sparse_tomo::reduction::reduce;
use sparse_tomo::solvers::uniqueness::{
    separating_certificate, verify_unique_box_reduced, verify_unique_nonneg_reduced, VerifyOptions,
};
use sparse_tomo::SparseMatrix;

#[derive(Parser, Debug)]
#[command(name = "sparse-tomo", version, about = "Sparse tomographic measurement matrices and recovery experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Command {
    /// Measurement matrix A_d^D, optionally perturbed.
    GenMatrix(GenMatrixArgs),
    /// Sparse nullspace basis of A_d^D.
    Nullspace(MatrixArgs),
    /// Sparsity thresholds for one geometry.
    Thresholds(ThresholdArgs),
    /// Expected reduced-system dimensions for k = 0..kmax.
    Curves(CurveArgs),
    /// Azuma bound on the deviation of the number of zero rays.
    TailBound(TailArgs),
    /// Probability that n random points in general position lie in a half-space of R^m.
    Wendel(WendelArgs),
    /// Uniqueness verdicts for a matrix and a support.
    Verify(VerifyArgs),
    /// One random trial.
    Trial(TrialArgs),
    /// Phase-transition grid.
    Grid(GridArgs),
}

#[derive(Args, Debug, Clone, Copy, Serialize)]
struct GeomArgs {
    /// Grid dimension (2 or 3).
    #[arg(long)]
    dim: usize,
    /// Resolution d (cells per axis).
    #[arg(long)]
    d: usize,
}

impl GeomArgs {
    fn geometry(&self) -> Result<Geometry> {
        Ok(Geometry::new(self.dim, self.d)?)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
    Mm,
}

#[derive(Args, Debug, Clone, Serialize)]
struct OutArgs {
    /// Output file (standard output if absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Output format.
    #[arg(long, value_enum)]
    format: Option<Format>,
}

impl OutArgs {
    fn format(&self, default: Format, allowed: &[Format]) -> Result<Format> {
        let f = self.format.unwrap_or(default);
        if !allowed.contains(&f) {
            let name = f.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default();
            return Err(UsageError(format!("format `{name}` is not available for this subcommand")).into());
        }
        Ok(f)
    }
}

#[derive(Args, Debug, Serialize)]
struct MatrixArgs {
    #[command(flatten)]
    geom: GeomArgs,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug, Serialize)]
struct GenMatrixArgs {
    #[command(flatten)]
    geom: GeomArgs,
    /// Perturb every nonzero uniformly within ±epsilon.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Column normalization after perturbing: none, euclidean or sum.
    #[arg(long, default_value = "none")]
    normalization: Normalization,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug, Serialize)]
struct ThresholdArgs {
    #[command(flatten)]
    geom: GeomArgs,
    /// Expansion constant.
    #[arg(long, default_value_t = GOLDEN_DELTA)]
    delta: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug, Serialize)]
struct CurveArgs {
    #[command(flatten)]
    geom: GeomArgs,
    /// Largest particle count.
    #[arg(long)]
    kmax: usize,
    /// Step in k.
    #[arg(long, default_value_t = 1)]
    step: usize,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug, Serialize)]
struct TailArgs {
    #[command(flatten)]
    geom: GeomArgs,
    /// Particle count.
    #[arg(long)]
    k: u64,
    /// Deviation from the expected number of zero rays.
    #[arg(long)]
    delta: f64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug, Serialize)]
struct WendelArgs {
    /// Number of points.
    #[arg(long)]
    n: u64,
    /// Ambient dimension.
    #[arg(long)]
    m: u64,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug, Serialize)]
struct VerifyArgs {
    /// Matrix Market file.
    #[arg(long)]
    matrix: PathBuf,
    /// JSON support: an index array, or {"support": [...], "values": [...]}.
    #[arg(long)]
    support: PathBuf,
    /// Number of random objectives.
    #[arg(long, default_value_t = 5)]
    probes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Always run the LP probes, even for overdetermined full-rank systems.
    #[arg(long)]
    no_fast_path: bool,
    /// Also search a separating certificate (binary supports only).
    #[arg(long)]
    certificate: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Args, Debug, Serialize)]
struct TrialArgs {
    #[command(flatten)]
    geom: GeomArgs,
    /// Particle count.
    #[arg(long)]
    k: usize,
    /// unperturbed or perturbed.
    #[arg(long, default_value = "perturbed")]
    variant: Variant,
    /// nonneg_multiplicity or binary.
    #[arg(long, default_value = "binary")]
    signal: SignalKind,
    #[arg(long, default_value_t = 5)]
    probes: usize,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value = "none")]
    normalization: Normalization,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    no_fast_path: bool,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Preset {
    /// d ∈ {10, 15, 20, 25, 30}.
    Desk,
    /// d ∈ {10, 20, …, 100}.
    Full,
}

#[derive(Args, Debug, Serialize)]
struct GridArgs {
    /// JSON grid configuration; missing fields take the desk defaults.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    /// Overrides the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Also write the run manifest to this file.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    out: OutArgs,
}

#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn manifest_line(command: &Command, extra: Value) {
    let line = json!({
        "tool": env!("CARGO_BIN_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "grid_config": extra,
    });
    eprintln!("{line}");
}

fn emit(out: &OutArgs, text: &str) -> Result<()> {
    let mut text = text.to_string();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match &out.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &impl Serialize) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

fn matrix_text(m: &SparseMatrix, format: Format) -> Result<String> {
    Ok(match format {
        Format::Mm => mm::to_string(m),
        Format::Csv => {
            let mut s = String::from("row,col,value\n");
            for (i, j, v) in m.triplets() {
                s.push_str(&format!("{i},{j},{}\n", fmt_sig(v)));
            }
            s
        }
        Format::Json => pretty(&json!({
            "rows": m.rows(),
            "cols": m.cols(),
            "entries": m.triplets().map(|(i, j, v)| json!([i, j, v])).collect::<Vec<_>>(),
        }))?,
    })
}

fn gen_matrix(args: &GenMatrixArgs) -> Result<String> {
    let g = args.geom.geometry()?;
    let mut a = build_measurement_matrix(&g);
    if let Some(eps) = args.epsilon {
        a = perturb(&a, eps, args.normalization, args.seed)?;
    }
    matrix_text(&a, args.out.format(Format::Mm, &[Format::Mm, Format::Csv, Format::Json])?)
}

fn nullspace(args: &MatrixArgs) -> Result<String> {
    let g = args.geom.geometry()?;
    matrix_text(&build_nullspace_basis(&g), args.out.format(Format::Mm, &[Format::Mm, Format::Csv, Format::Json])?)
}

const THRESHOLD_FIELDS: [&str; 8] = ["dim", "d", "delta", "k_delta", "k_delta_bound", "k_crit", "k_tilde_max", "k_max"];

fn threshold_json(t: &ThresholdReport) -> Value {
    json!({
        "dim": t.geometry.dim(),
        "d": t.geometry.resolution(),
        "delta": t.delta,
        "k_delta": t.k_delta_floor(),
        "k_crit": t.k_crit_floor(),
        "k_tilde_max": t.k_tilde_max_floor(),
        "k_max": t.k_max_floor(),
        "k_opt": t.k_opt_floor(),
        "continuous": t,
    })
}

fn threshold_cmd(args: &ThresholdArgs) -> Result<String> {
    let g = args.geom.geometry()?;
    let t = thresholds(&g, args.delta)?;
    match args.out.format(Format::Json, &[Format::Json, Format::Csv])? {
        Format::Json => pretty(&threshold_json(&t)),
        _ => {
            let values = [
                g.dim() as f64,
                g.resolution() as f64,
                t.delta,
                t.k_delta,
                t.k_delta_bound,
                t.k_crit,
                t.k_tilde_max,
                t.k_max,
            ];
            let row: Vec<String> = values.iter().map(|&v| fmt_sig(v)).collect();
            Ok(format!("{},k_opt\n{},{}\n", THRESHOLD_FIELDS.join(","), row.join(","), fmt_sig(t.k_opt)))
        }
    }
}

fn curves(args: &CurveArgs) -> Result<String> {
    let g = args.geom.geometry()?;
    if args.step == 0 {
        return Err(UsageError("--step must be at least 1".into()).into());
    }
    let rows: Vec<(usize, f64, f64, f64)> = (0..=args.kmax)
        .step_by(args.step)
        .map(|k| {
            let e = expected_dims(&g, k as f64);
            (k, e.n_r, e.n_c, e.n_r / e.n_c)
        })
        .collect();
    match args.out.format(Format::Csv, &[Format::Csv, Format::Json])? {
        Format::Json => pretty(
            &rows
                .iter()
                .map(|&(k, n_r, n_c, ratio)| json!({"k": k, "n_r": n_r, "n_c": n_c, "ratio": ratio}))
                .collect::<Vec<_>>(),
        ),
        _ => {
            let mut s = String::from("k,n_r,n_c,ratio\n");
            for (k, n_r, n_c, ratio) in rows {
                s.push_str(&format!("{k},{},{},{}\n", fmt_sig(n_r), fmt_sig(n_c), fmt_sig(ratio)));
            }
            Ok(s)
        }
    }
}

fn tail_cmd(args: &TailArgs) -> Result<String> {
    let g = args.geom.geometry()?;
    let t = tail_bound(&g, args.k, args.delta)?;
    let expected = expected_zero_rays(&g, args.k as f64);
    match args.out.format(Format::Json, &[Format::Json, Format::Csv])? {
        Format::Json => pretty(&json!({
            "dim": g.dim(),
            "d": g.resolution(),
            "k": args.k,
            "delta": args.delta,
            "expected_zero_rays": expected,
            "bound": t.bound,
            "large_d_limit": t.large_d_limit,
        })),
        _ => Ok(format!(
            "dim,d,k,delta,expected_zero_rays,bound,large_d_limit\n{},{},{},{},{},{},{}\n",
            g.dim(),
            g.resolution(),
            args.k,
            fmt_sig(args.delta),
            fmt_sig(expected),
            fmt_sig(t.bound),
            fmt_sig(t.large_d_limit)
        )),
    }
}

fn wendel_cmd(args: &WendelArgs) -> Result<String> {
    let exact = wendel_probability_exact(args.n, args.m)?;
    let p = wendel_probability(args.n, args.m)?;
    match args.out.format(Format::Json, &[Format::Json, Format::Csv])? {
        Format::Json => pretty(&json!({"n": args.n, "m": args.m, "probability": p, "exact": exact.to_string()})),
        _ => Ok(format!("n,m,probability\n{},{},{}\n", args.n, args.m, fmt_sig(p))),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SupportSpec {
    Indices(Vec<usize>),
    Weighted { support: Vec<usize>, values: Option<Vec<f64>> },
}

fn read_signal(path: &Path, n: usize) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec: SupportSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let (support, values) = match spec {
        SupportSpec::Indices(s) => (s, None),
        SupportSpec::Weighted { support, values } => (support, values),
    };
    let values = values.unwrap_or_else(|| vec![1.0; support.len()]);
    anyhow::ensure!(values.len() == support.len(), "support has {} indices but {} values", support.len(), values.len());
    let mut x = vec![0.0; n];
    for (&j, &v) in support.iter().zip(&values) {
        anyhow::ensure!(j < n, "support index {j} out of range for {n} columns");
        anyhow::ensure!(v >= 0.0 && v.is_finite(), "support value {v} must be nonnegative");
        x[j] += v;
    }
    Ok(x)
}

fn verify_cmd(args: &VerifyArgs) -> Result<String> {
    args.out.format(Format::Json, &[Format::Json])?;
    let a = mm::read_file(&args.matrix).with_context(|| format!("reading {}", args.matrix.display()))?;
    let x = read_signal(&args.support, a.cols())?;
    let b = a.mul_vec(&x)?;
    let r = reduce(&a, &b)?;
    let opts = VerifyOptions { probes: args.probes, seed: args.seed, fast_path: !args.no_fast_path };
    let nonneg = verify_unique_nonneg_reduced(&r, &x, &opts)?;
    let binary = x.iter().all(|&v| v == 0.0 || v == 1.0);
    let boxed = binary.then(|| verify_unique_box_reduced(&r, &x, &opts)).transpose()?;
    let certificate = match (args.certificate, binary) {
        (true, true) => {
            let c = separating_certificate(&a, &x)?;
            Some(json!({"found": c.found, "margin": c.margin, "status": c.status}))
        }
        (true, false) => return Err(UsageError("--certificate needs a binary support".into()).into()),
        _ => None,
    };
    pretty(&json!({
        "rows": a.rows(),
        "cols": a.cols(),
        "support_size": x.iter().filter(|&&v| v != 0.0).count(),
        "m_red": r.m_red(),
        "n_red": r.n_red(),
        "unique_nonneg": nonneg,
        "unique_box": boxed,
        "certificate": certificate,
    }))
}

fn trial_cmd(args: &TrialArgs) -> Result<String> {
    args.out.format(Format::Json, &[Format::Json])?;
    let g = args.geom.geometry()?;
    let opts = TrialOptions {
        probes: args.probes,
        epsilon: args.epsilon,
        normalization: args.normalization,
        uniqueness: true,
        fast_path: !args.no_fast_path,
    };
    let record = run_trial(&g, args.k, args.variant, args.signal, args.seed, &opts)?;
    pretty(&record)
}

fn grid_config(args: &GridArgs) -> Result<GridConfig> {
    let mut cfg = match (&args.config, args.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        (None, Some(Preset::Full)) => GridConfig::full(),
        (None, _) => GridConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if args.jobs.is_some() {
        cfg.jobs = args.jobs;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn grid_cmd(args: &GridArgs, cfg: &GridConfig) -> Result<String> {
    let format = args.out.format(Format::Csv, &[Format::Csv, Format::Json])?;
    let (grid, manifest) = run_grid(cfg)?;
    let manifest_json = serde_json::to_string(&manifest)?;
    log::info!("grid finished: {manifest_json}");
    if let Some(path) = &args.manifest {
        fs::write(path, pretty(&manifest)?).with_context(|| format!("writing {}", path.display()))?;
    }
    match format {
        Format::Json => pretty(&grid),
        _ => Ok(grid.to_csv()),
    }
}

fn run(cli: &Cli) -> Result<()> {
    let grid_cfg = match &cli.command {
        Command::Grid(a) => Some(grid_config(a)?),
        _ => None,
    };
    manifest_line(&cli.command, serde_json::to_value(&grid_cfg)?);
    let (text, out) = match &cli.command {
        Command::GenMatrix(a) => (gen_matrix(a)?, &a.out),
        Command::Nullspace(a) => (nullspace(a)?, &a.out),
        Command::Thresholds(a) => (threshold_cmd(a)?, &a.out),
        Command::Curves(a) => (curves(a)?, &a.out),
        Command::TailBound(a) => (tail_cmd(a)?, &a.out),
        Command::Wendel(a) => (wendel_cmd(a)?, &a.out),
        Command::Verify(a) => (verify_cmd(a)?, &a.out),
        Command::Trial(a) => (trial_cmd(a)?, &a.out),
        Command::Grid(a) => (grid_cmd(a, grid_cfg.as_ref().expect("resolved above"))?, &a.out),
    };
    emit(out, &text)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("TOMO_LOG", "error")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
