//! Command-line front end: detect, path, simulate, and bench workflows.

mod io;

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use spectral_mcd::{
    default_k, detection_report, estimation_report, fdb, gen_highdim, gen_masking_setting,
    gen_overdetermined, grid_search, projection_depths, sample_directions, spectral_mcd,
    DataMatrix, Error as CoreError, FailurePolicy, OutlierKind, SimDataset,
};

/// A failure with the exit code it maps to: 1 usage, 2 data, 3 numerical.
#[derive(Debug)]
pub struct CliError {
    pub message: String,
    pub code: u8,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { message: message.into(), code: 1 }
    }
    pub fn data(message: impl Into<String>) -> Self {
        Self { message: message.into(), code: 2 }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let code = match &e {
            CoreError::InvalidData(_) | CoreError::DimensionMismatch { .. } => 2,
            _ => 3,
        };
        Self { message: e.to_string(), code }
    }
}

#[derive(Parser)]
#[command(name = "smcd", about = "Robust high-dimensional outlier detection", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Output directory
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Master seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Table output format
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
}

#[derive(Args)]
struct InputArgs {
    /// Input CSV matrix (rows = observations)
    #[arg(long)]
    input: PathBuf,
    /// First line of the input is a header
    #[arg(long)]
    header: bool,
    /// Standardize columns to zero mean and unit variance before fitting
    #[arg(long)]
    standardize: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Fit at a single (h, q) and label every row
    Detect {
        #[command(flatten)]
        input: InputArgs,
        /// Subset size: a fraction in (0, 1] of n, or an integer count
        #[arg(long)]
        h: Option<f64>,
        /// Embedding dimension
        #[arg(long)]
        q: Option<usize>,
        /// Number of depth directions (default max(1000, 10q))
        #[arg(long)]
        k: Option<usize>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Bootstrap instability path over an (h, q) grid
    Path {
        #[command(flatten)]
        input: InputArgs,
        /// Comma-separated h fractions, each in (0, 1)
        #[arg(long = "h-grid", value_delimiter = ',', required = true)]
        h_grid: Vec<f64>,
        /// Comma-separated embedding dimensions
        #[arg(long = "q-grid", value_delimiter = ',', required = true)]
        q_grid: Vec<usize>,
        /// Number of depth directions (default max(1000, 10q))
        #[arg(long)]
        k: Option<usize>,
        /// Bootstrap pairs B
        #[arg(long, default_value_t = 50)]
        pairs: usize,
        /// Drop failing bootstrap pairs instead of aborting
        #[arg(long)]
        skip_failures: bool,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Generate a simulated dataset (X.csv + truth.csv)
    Simulate {
        #[command(flatten)]
        proto: ProtocolArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Replicated benchmark of the fixed-h baseline and the full pipeline
    Bench {
        #[command(flatten)]
        proto: ProtocolArgs,
        /// Replicates
        #[arg(long, default_value_t = 50)]
        replicates: usize,
        /// Fixed h fraction for the baseline
        #[arg(long, default_value_t = 0.5)]
        h: f64,
        /// h grid for the instability path
        #[arg(long = "h-grid", value_delimiter = ',', default_values_t = vec![0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95])]
        h_grid: Vec<f64>,
        /// q grid for the instability path
        #[arg(long = "q-grid", value_delimiter = ',', default_values_t = vec![2, 10])]
        q_grid: Vec<usize>,
        /// Number of depth directions (default max(1000, 10q))
        #[arg(long)]
        k: Option<usize>,
        /// Bootstrap pairs B
        #[arg(long, default_value_t = 50)]
        pairs: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Args)]
struct ProtocolArgs {
    /// Protocol: highdim, overdetermined, or masking1..masking4
    #[arg(long)]
    protocol: String,
    /// Observations
    #[arg(long)]
    n: Option<usize>,
    /// Dimensions
    #[arg(long)]
    p: Option<usize>,
    /// Contamination fraction
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    /// Number of low-eigenvalue directions for highdim outliers
    #[arg(long, default_value_t = 1)]
    l: usize,
    /// Outlier kind for the overdetermined protocol
    #[arg(long, value_parser = ["point", "cluster", "random", "radial"])]
    kind: Option<String>,
    /// Outlier magnitude for the overdetermined protocol
    #[arg(long, default_value_t = 5.0)]
    r: f64,
}

fn generate(proto: &ProtocolArgs, seed: u64) -> Result<SimDataset, CliError> {
    match proto.protocol.as_str() {
        "highdim" => {
            let n = proto.n.ok_or_else(|| CliError::usage("--n is required for highdim"))?;
            let p = proto.p.ok_or_else(|| CliError::usage("--p is required for highdim"))?;
            Ok(gen_highdim(n, p, proto.eps, proto.l, seed)?)
        }
        "overdetermined" => {
            let n = proto.n.ok_or_else(|| CliError::usage("--n is required for overdetermined"))?;
            let p = proto.p.ok_or_else(|| CliError::usage("--p is required for overdetermined"))?;
            let kind: OutlierKind = proto
                .kind
                .as_deref()
                .ok_or_else(|| CliError::usage("--kind is required for overdetermined"))?
                .parse()?;
            Ok(gen_overdetermined(n, p, proto.eps, kind, proto.r, seed)?)
        }
        m if m.starts_with("masking") => {
            let id: u8 = m["masking".len()..]
                .parse()
                .map_err(|_| CliError::usage(format!("unknown protocol '{}'", m)))?;
            Ok(gen_masking_setting(id, seed)?)
        }
        other => Err(CliError::usage(format!(
            "unknown protocol '{}' (expected highdim, overdetermined, or masking1..masking4)",
            other
        ))),
    }
}

fn load_input(input: &InputArgs) -> Result<DataMatrix, CliError> {
    let mut x = io::read_csv(&input.input, input.header)?;
    if input.standardize {
        x = standardize(&x)?;
    }
    Ok(x)
}

fn standardize(x: &DataMatrix) -> Result<DataMatrix, CliError> {
    let (n, p) = (x.n(), x.p());
    let mut m = x.values().clone();
    for j in 0..p {
        let col = m.column(j);
        let mean = col.mean();
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0).max(1.0);
        let sd = var.sqrt();
        if sd == 0.0 {
            return Err(CliError::data(format!(
                "column {} is constant; cannot standardize",
                j + 1
            )));
        }
        for i in 0..n {
            m[(i, j)] = (m[(i, j)] - mean) / sd;
        }
    }
    Ok(DataMatrix::new(m).map_err(CliError::from)?)
}

fn resolve_h(h: f64, n: usize) -> Result<usize, CliError> {
    if h <= 0.0 || !h.is_finite() {
        return Err(CliError::usage(format!("--h must be positive, got {}", h)));
    }
    let count = if h <= 1.0 { (h * n as f64).floor() as usize } else { h as usize };
    if count < 1 || count > n {
        return Err(CliError::usage(format!("h = {} outside [1, n = {}]", count, n)));
    }
    Ok(count)
}

fn cmd_detect(
    input: &InputArgs,
    h: Option<f64>,
    q: Option<usize>,
    k: Option<usize>,
    common: &CommonArgs,
) -> Result<(), CliError> {
    let x = load_input(input)?;
    let n = x.n();
    let (h, q) = match (h, q) {
        (Some(h), Some(q)) => (resolve_h(h, n)?, q),
        _ => {
            // fall back to a prior path run's argmin in the output directory
            let path = common.out.join("argmin.json");
            let text = std::fs::read_to_string(&path).map_err(|_| {
                CliError::usage(format!(
                    "--h and --q not given and no argmin file at {}",
                    path.display()
                ))
            })?;
            let v: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::data(format!("{}: {}", path.display(), e)))?;
            let h_arg = h
                .map(|f| resolve_h(f, n))
                .transpose()?
                .or_else(|| v["h"].as_u64().map(|u| u as usize))
                .ok_or_else(|| CliError::data("argmin file lacks 'h'"))?;
            let q_arg = q
                .or_else(|| v["q"].as_u64().map(|u| u as usize))
                .ok_or_else(|| CliError::data("argmin file lacks 'q'"))?;
            (h_arg, q_arg)
        }
    };
    let k = k.unwrap_or_else(|| default_k(q));
    eprintln!("detect: n = {}, p = {}, h = {}, q = {}, k = {}", n, x.p(), h, q, k);
    let start = Instant::now();
    let fit = spectral_mcd(&x, h, q, k, common.seed)?;
    // depth of every row against the final subset, in score space
    let z = spectral_mcd::project(&fit.model, &x)?;
    let reference = z.select_rows(fit.subset.indices());
    let dirs = sample_directions(k, q, common.seed);
    let depths = projection_depths(&z, &reference, &dirs)?;
    eprintln!(
        "detect: converged = {} after {} iterations in {:.3} s",
        fit.converged,
        fit.iterations,
        start.elapsed().as_secs_f64()
    );
    io::write_file(
        &common.out.join("labels.csv"),
        &io::labels_csv(fit.labels.labels(), &depths.values),
    )?;
    let estimates = json!({
        "h": h,
        "q": q,
        "mu": fit.estimate.mu.as_slice(),
        "sigma": (0..q).map(|i| fit.estimate.sigma.row(i).iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
        "v_q": (0..x.p()).map(|i| fit.model.v_q.row(i).iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
        "center": fit.model.mu.as_slice(),
        "iterations": fit.iterations,
        "converged": fit.converged,
    });
    io::write_file(
        &common.out.join("estimates.json"),
        &format!("{}\n", serde_json::to_string_pretty(&estimates).unwrap()),
    )?;
    Ok(())
}

fn instability_table(
    h_grid: &[f64],
    q_grid: &[usize],
    path: &spectral_mcd::InstabilityPath,
    format: &str,
) -> String {
    let mut rows = Vec::new();
    for (hi, &hf) in h_grid.iter().enumerate() {
        for (qi, _) in q_grid.iter().enumerate() {
            let cell = &path.cells[hi * q_grid.len() + qi];
            rows.push((hf, cell.h, cell.q, cell.s_hat, cell.std_err, cell.distances.len()));
        }
    }
    if format == "json" {
        let v: Vec<_> = rows
            .iter()
            .map(|r| json!({"h_frac": r.0, "h": r.1, "q": r.2, "s_hat": r.3, "std_err": r.4, "B": r.5}))
            .collect();
        format!("{}\n", serde_json::to_string_pretty(&v).unwrap())
    } else {
        let mut out = String::from("h_frac,h,q,s_hat,std_err,B\n");
        for r in rows {
            let _ = writeln!(out, "{},{},{},{},{},{}", r.0, r.1, r.2, r.3, r.4, r.5);
        }
        out
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_path(
    input: &InputArgs,
    h_grid: &[f64],
    q_grid: &[usize],
    k: Option<usize>,
    pairs: usize,
    skip_failures: bool,
    common: &CommonArgs,
) -> Result<(), CliError> {
    let x = load_input(input)?;
    eprintln!(
        "path: n = {}, p = {}, {} h values x {} q values, B = {}",
        x.n(),
        x.p(),
        h_grid.len(),
        q_grid.len(),
        pairs
    );
    let policy = if skip_failures { FailurePolicy::Skip } else { FailurePolicy::Abort };
    let start = Instant::now();
    let path = grid_search(&x, h_grid, q_grid, k, pairs, common.seed, policy)?;
    eprintln!("path: done in {:.3} s", start.elapsed().as_secs_f64());
    let ext = if common.format == "json" { "json" } else { "csv" };
    io::write_file(
        &common.out.join(format!("instability.{}", ext)),
        &instability_table(h_grid, q_grid, &path, &common.format),
    )?;
    let (h, q) = path.argmin;
    let cell = path.cells.iter().find(|c| c.h == h && c.q == q).unwrap();
    let hf = h_grid[path.cells.iter().position(|c| c.h == h && c.q == q).unwrap() / q_grid.len()];
    let argmin = json!({
        "h": h,
        "q": q,
        "h_frac": hf,
        "s_hat": cell.s_hat,
        "pairs": path.pairs,
        "seed": path.master_seed,
    });
    io::write_file(
        &common.out.join("argmin.json"),
        &format!("{}\n", serde_json::to_string_pretty(&argmin).unwrap()),
    )?;
    Ok(())
}

fn cmd_simulate(proto: &ProtocolArgs, common: &CommonArgs) -> Result<(), CliError> {
    let ds = generate(proto, common.seed)?;
    eprintln!(
        "simulate: {} -> {} x {}, {} planted outliers",
        proto.protocol,
        ds.x.n(),
        ds.x.p(),
        ds.truth.count_ones()
    );
    io::write_file(&common.out.join("X.csv"), &io::matrix_csv(&ds.x))?;
    io::write_file(&common.out.join("truth.csv"), &io::truth_csv(ds.truth.labels()))?;
    Ok(())
}

#[derive(Default)]
struct MetricAcc {
    values: Vec<f64>,
}

impl MetricAcc {
    fn push(&mut self, v: f64) {
        self.values.push(v);
    }
    fn mean(&self) -> f64 {
        if self.values.is_empty() {
            f64::NAN
        } else {
            self.values.iter().sum::<f64>() / self.values.len() as f64
        }
    }
    fn std_err(&self) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        let var = self.values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        (var / n as f64).sqrt()
    }
}

#[derive(Default)]
struct MethodAcc {
    fn_: MetricAcc,
    f1: MetricAcc,
    e_mu: MetricAcc,
    e_sigma: MetricAcc,
    kl: MetricAcc,
    time: MetricAcc,
    failures: usize,
}

fn estimation_from_labels(
    ds: &SimDataset,
    labels: &[u8],
) -> Option<(f64, f64, f64)> {
    let sigma_true = ds.sigma_true.as_ref()?;
    let inliers: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == 0)
        .map(|(i, _)| i)
        .collect();
    if inliers.len() <= ds.x.p() + 1 {
        return None;
    }
    let m = inliers.len() as f64;
    let p = ds.x.p();
    let mut mu = nalgebra::DVector::zeros(p);
    for &i in &inliers {
        mu += ds.x.row(i);
    }
    mu /= m;
    let mut sigma = nalgebra::DMatrix::zeros(p, p);
    for &i in &inliers {
        let d = ds.x.row(i) - &mu;
        sigma += &d * d.transpose();
    }
    sigma /= m - 1.0;
    let rep = estimation_report(&mu, &sigma, &ds.mu_true, sigma_true).ok()?;
    Some((rep.e_mu, rep.e_sigma, rep.kl))
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    proto: &ProtocolArgs,
    replicates: usize,
    h_frac: f64,
    h_grid: &[f64],
    q_grid: &[usize],
    k: Option<usize>,
    pairs: usize,
    common: &CommonArgs,
) -> Result<(), CliError> {
    if replicates < 1 {
        return Err(CliError::usage("--replicates must be at least 1"));
    }
    let mut fdb_acc = MethodAcc::default();
    let mut smcd_acc = MethodAcc::default();
    for rep in 0..replicates {
        let seed = common.seed.wrapping_add(rep as u64);
        let ds = generate(proto, seed)?;
        let n = ds.x.n();
        let h = resolve_h(h_frac, n)?;
        // fixed-h depth baseline
        let start = Instant::now();
        match fdb(&ds.x, h, 1000, seed) {
            Ok(res) => {
                let elapsed = start.elapsed().as_secs_f64();
                let rep_m = detection_report(&res.labels, &ds.truth, elapsed)?;
                fdb_acc.fn_.push(rep_m.fn_ as f64);
                fdb_acc.f1.push(rep_m.f1);
                fdb_acc.time.push(elapsed);
                if let Some((e_mu, e_sigma, kl)) = estimation_from_labels(&ds, res.labels.labels()) {
                    fdb_acc.e_mu.push(e_mu);
                    fdb_acc.e_sigma.push(e_sigma);
                    fdb_acc.kl.push(kl);
                }
            }
            Err(e) => {
                eprintln!("bench: replicate {} fdb failed: {}", rep, e);
                fdb_acc.failures += 1;
            }
        }
        // full pipeline: instability path, then detect at the argmin
        let start = Instant::now();
        let run = || -> spectral_mcd::Result<(spectral_mcd::BinaryMap, f64)> {
            let path = grid_search(&ds.x, h_grid, q_grid, k, pairs, seed, FailurePolicy::Abort)?;
            let (h_star, q_star) = path.argmin;
            let fit = spectral_mcd(&ds.x, h_star, q_star, k.unwrap_or_else(|| default_k(q_star)), seed)?;
            Ok((fit.labels, start.elapsed().as_secs_f64()))
        };
        match run() {
            Ok((labels, elapsed)) => {
                let rep_m = detection_report(&labels, &ds.truth, elapsed)?;
                smcd_acc.fn_.push(rep_m.fn_ as f64);
                smcd_acc.f1.push(rep_m.f1);
                smcd_acc.time.push(elapsed);
                if let Some((e_mu, e_sigma, kl)) = estimation_from_labels(&ds, labels.labels()) {
                    smcd_acc.e_mu.push(e_mu);
                    smcd_acc.e_sigma.push(e_sigma);
                    smcd_acc.kl.push(kl);
                }
            }
            Err(e) => {
                eprintln!("bench: replicate {} pipeline failed: {}", rep, e);
                smcd_acc.failures += 1;
            }
        }
        eprintln!("bench: replicate {}/{} done", rep + 1, replicates);
    }
    let table = |name: &str, acc: &MethodAcc| -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            name,
            acc.fn_.mean(),
            acc.fn_.std_err(),
            acc.f1.mean(),
            acc.f1.std_err(),
            acc.e_mu.mean(),
            acc.e_mu.std_err(),
            acc.e_sigma.mean(),
            acc.e_sigma.std_err(),
            acc.kl.mean(),
            acc.kl.std_err(),
            acc.time.mean(),
            acc.time.std_err(),
            acc.failures,
        )
    };
    let mut out = String::from(
        "method,fn_mean,fn_se,f1_mean,f1_se,e_mu_mean,e_mu_se,e_sigma_mean,e_sigma_se,kl_mean,kl_se,time_mean,time_se,failures\n",
    );
    out.push_str(&table("fdb", &fdb_acc));
    out.push_str(&table("spectral_mcd", &smcd_acc));
    if common.format == "json" {
        let to_json = |name: &str, acc: &MethodAcc| {
            json!({
                "method": name,
                "fn_mean": acc.fn_.mean(), "fn_se": acc.fn_.std_err(),
                "f1_mean": acc.f1.mean(), "f1_se": acc.f1.std_err(),
                "e_mu_mean": acc.e_mu.mean(), "e_mu_se": acc.e_mu.std_err(),
                "e_sigma_mean": acc.e_sigma.mean(), "e_sigma_se": acc.e_sigma.std_err(),
                "kl_mean": acc.kl.mean(), "kl_se": acc.kl.std_err(),
                "time_mean": acc.time.mean(), "time_se": acc.time.std_err(),
                "failures": acc.failures,
            })
        };
        let v = vec![to_json("fdb", &fdb_acc), to_json("spectral_mcd", &smcd_acc)];
        io::write_file(
            &common.out.join("bench.json"),
            &format!("{}\n", serde_json::to_string_pretty(&v).unwrap()),
        )?;
    } else {
        io::write_file(&common.out.join("bench.csv"), &out)?;
    }
    print!("{}", out);
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Detect { input, h, q, k, common } => cmd_detect(input, *h, *q, *k, common),
        Command::Path { input, h_grid, q_grid, k, pairs, skip_failures, common } => {
            cmd_path(input, h_grid, q_grid, *k, *pairs, *skip_failures, common)
        }
        Command::Simulate { proto, common } => cmd_simulate(proto, common),
        Command::Bench { proto, replicates, h, h_grid, q_grid, k, pairs, common } => {
            cmd_bench(proto, *replicates, *h, h_grid, q_grid, *k, *pairs, common)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version with code 0 internally
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
