//! `masep` — exact and simulated transition statistics for the two-sided
//! multi-species ASEP with long-range jumps.
//!
//! Subcommands: `exact` (one contour-integral probability), `distribution`
//! (windowed table), `oracle` (uniformization ground truth), `simulate`
//! (Gillespie sampling), `verify` (algebraic identity suites), `tables`
//! (two-site matrix dumps), `amplitudes` (Bethe amplitude entries), and
//! `compare` (CSV diffing).
//!
//! Exit codes: 0 success, 1 validation error, 2 verification failure,
//! 3 quadrature non-convergence.

mod csvio;
mod parse;
mod pool;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use masep_core::algebra::{build_b, build_b1, build_b2, build_r, LocalMatrix, SpectralPoint};
use masep_core::bethe::{amplitude_column, Permutation};
use masep_core::contour::{
    evaluate_probability_with, full_distribution_with, QuadratureError, TransitionQuery,
};
use masep_core::mc::{empirical_distribution_with, SimulationPlan};
use masep_core::oracle::{uniformized_distribution, UniformizationParams};
use masep_core::state::{MarkovState, SpeciesWord};
use masep_core::verify::{
    b_relation_suite, boundary_residual_suite, inverse_relation_suite, word_independence_suite,
    yang_baxter_suite, SuiteReport,
};
use num_complex::Complex64;

use csvio::Row;
use parse::{ContourFlags, FileConfig};
use pool::ThreadPool;

#[derive(Parser)]
#[command(name = "masep", version, about = "multi-species ASEP with long-range jumps")]
struct Cli {
    /// JSON config file supplying defaults for omitted flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One exact transition probability by contour quadrature
    Exact(ExactArgs),
    /// Exact transition table over a position window (CSV)
    Distribution(DistributionArgs),
    /// Uniformization ground truth over a position window (CSV)
    Oracle(OracleArgs),
    /// Gillespie sampling of endpoint frequencies (CSV)
    Simulate(SimulateArgs),
    /// Algebraic identity suites; nonzero exit on any failure
    Verify(VerifyArgs),
    /// Dump the two-site matrices B, B1, B2, R as labelled CSV
    Tables(TablesArgs),
    /// Bethe amplitude entries (A_sigma)_(pi,nu) for all sigma
    Amplitudes(AmplitudesArgs),
    /// Diff two distribution CSV files
    Compare(CompareArgs),
}

#[derive(Args)]
struct SharedContour {
    /// Contour radii, comma-separated, 1 < R1 < R2 < ...
    #[arg(long)]
    radii: Option<String>,
    /// Starting nodes per circle (power of two, >= 8)
    #[arg(long)]
    nodes: Option<usize>,
    /// Refinement tolerance on successive estimates
    #[arg(long)]
    tol: Option<f64>,
    /// Maximum node-count doublings
    #[arg(long)]
    max_refinements: Option<u32>,
}

impl SharedContour {
    fn flags(&self) -> ContourFlags {
        ContourFlags {
            radii: self.radii.clone(),
            nodes: self.nodes,
            tol: self.tol,
            max_refinements: self.max_refinements,
        }
    }
}

#[derive(Args)]
struct ExactArgs {
    /// Initial state as JSON: {"positions":[0,1],"species":[2,1]}
    #[arg(long)]
    initial: Option<String>,
    /// Final state as JSON
    #[arg(long = "final")]
    final_state: Option<String>,
    #[arg(long)]
    t: Option<f64>,
    /// Right-jump probability p (q = 1 - p)
    #[arg(long)]
    p: Option<f64>,
    #[command(flatten)]
    contour: SharedContour,
}

#[derive(Args)]
struct DistributionArgs {
    #[arg(long)]
    initial: Option<String>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    /// Position window lo:hi containing the initial configuration
    #[arg(long, allow_hyphen_values = true)]
    window: Option<String>,
    #[command(flatten)]
    contour: SharedContour,
    /// Write CSV here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    initial: Option<String>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    /// Position window lo:hi to report
    #[arg(long, allow_hyphen_values = true)]
    window: Option<String>,
    /// Poisson tail truncation tolerance
    #[arg(long)]
    tail_tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    initial: Option<String>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    p: Option<f64>,
    /// Number of sampled paths
    #[arg(long)]
    paths: Option<u64>,
    /// Master seed; every path stream derives from (seed, path index)
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Largest alphabet size for the R-matrix suites (from 2 up)
    #[arg(long)]
    n: Option<u32>,
    /// Random parameter tuples per suite
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TablesArgs {
    /// Alphabet size
    #[arg(long)]
    n: Option<u32>,
    /// Which matrix: b, b1, b2, r, or all
    #[arg(long, default_value = "all")]
    matrix: String,
    /// xi_beta for the R matrix (complex literal)
    #[arg(long)]
    xi_beta: Option<String>,
    /// xi_alpha for the R matrix (complex literal)
    #[arg(long)]
    xi_alpha: Option<String>,
}

#[derive(Args)]
struct AmplitudesArgs {
    /// Species word nu, e.g. 213 or 2,1,3
    #[arg(long)]
    nu: Option<String>,
    /// Spectral parameters, comma-separated complex literals, one per letter
    #[arg(long)]
    xi: Option<String>,
}

#[derive(Args)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
    /// Fail (exit 2) when the max absolute deviation exceeds this
    #[arg(long)]
    tol: Option<f64>,
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn validation(message: impl Into<String>) -> Self {
        CliError { code: 1, message: message.into() }
    }
    fn verification(message: impl Into<String>) -> Self {
        CliError { code: 2, message: message.into() }
    }
    fn non_convergence(message: impl Into<String>) -> Self {
        CliError { code: 3, message: message.into() }
    }
}

impl From<String> for CliError {
    fn from(message: String) -> Self {
        CliError::validation(message)
    }
}

impl From<QuadratureError> for CliError {
    fn from(e: QuadratureError) -> Self {
        match e {
            QuadratureError::NotConverged { .. } => CliError::non_convergence(e.to_string()),
            other => CliError::validation(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{}", e);
                return ExitCode::SUCCESS;
            }
            eprint!("{}", e);
            return ExitCode::from(1);
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

fn run(cli: Cli) -> Result<(), CliError> {
    let config = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Exact(args) => cmd_exact(args, &config),
        Command::Distribution(args) => cmd_distribution(args, &config),
        Command::Oracle(args) => cmd_oracle(args, &config),
        Command::Simulate(args) => cmd_simulate(args, &config),
        Command::Verify(args) => cmd_verify(args, &config),
        Command::Tables(args) => cmd_tables(args, &config),
        Command::Amplitudes(args) => cmd_amplitudes(args),
        Command::Compare(args) => cmd_compare(args),
    }
}

fn need_state(
    flag: Option<String>,
    from_config: &Option<parse::StateJson>,
    what: &str,
) -> Result<MarkovState, CliError> {
    match (flag, from_config) {
        (Some(text), _) => parse::parse_state(&text).map_err(CliError::validation),
        (None, Some(js)) => js.clone().into_state().map_err(CliError::validation),
        (None, None) => Err(CliError::validation(format!("--{} is required", what))),
    }
}

fn need<T: Copy>(flag: Option<T>, from_config: Option<T>, what: &str) -> Result<T, CliError> {
    flag.or(from_config)
        .ok_or_else(|| CliError::validation(format!("--{} is required", what)))
}

fn validate_tp(t: f64, p: f64) -> Result<(), CliError> {
    if t < 0.0 {
        return Err(CliError::validation("t must be nonnegative"));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(CliError::validation("p must lie in [0, 1]"));
    }
    Ok(())
}

fn cmd_exact(args: ExactArgs, config: &FileConfig) -> Result<(), CliError> {
    let initial = need_state(args.initial, &config.initial, "initial")?;
    let final_state = need_state(args.final_state, &config.final_state, "final")?;
    let t = need(args.t, config.t, "t")?;
    let p = need(args.p, config.p, "p")?;
    validate_tp(t, p)?;
    let contour = args.contour.flags().resolve(config, initial.len())?;
    let pool = ThreadPool::from_env(config.workers);
    let query = TransitionQuery { initial, final_state, t, p };
    let quad = evaluate_probability_with(&query, &contour, &pool)?;
    println!("probability = {:.12e}", quad.probability);
    println!("error_estimate = {:.3e}", quad.error);
    println!("refinements = {}", quad.refinements);
    println!("nodes_per_circle = {}", quad.nodes_per_circle);
    Ok(())
}

fn write_csv(out: Option<&PathBuf>, rows: &[Row], with_stderr: bool) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let file = std::fs::File::create(path)
                .map_err(|e| CliError::validation(format!("cannot create {}: {}", path.display(), e)))?;
            csvio::write_rows(std::io::BufWriter::new(file), rows, with_stderr)
        }
        None => {
            let stdout = std::io::stdout();
            csvio::write_rows(stdout.lock(), rows, with_stderr)
        }
    }
    .map_err(|e| CliError::validation(format!("write failed: {}", e)))
}

fn cmd_distribution(args: DistributionArgs, config: &FileConfig) -> Result<(), CliError> {
    let initial = need_state(args.initial, &config.initial, "initial")?;
    let t = need(args.t, config.t, "t")?;
    let p = need(args.p, config.p, "p")?;
    validate_tp(t, p)?;
    let window = parse::parse_window(
        &args
            .window
            .or_else(|| config.window.clone())
            .ok_or_else(|| CliError::validation("--window is required"))?,
    )?;
    let contour = args.contour.flags().resolve(config, initial.len())?;
    let pool = ThreadPool::from_env(config.workers);
    let table = full_distribution_with(&initial, t, p, window, &contour, &pool)?;
    let rows: Vec<Row> = table
        .entries
        .iter()
        .map(|e| Row {
            state: e.state.clone(),
            probability: e.probability,
            stderr: None,
        })
        .collect();
    write_csv(args.out.as_ref(), &rows, false)?;
    eprintln!(
        "total={:e} leaked={:e} refinements={} nodes_per_circle={}",
        table.total, table.leaked, table.refinements, table.nodes_per_circle
    );
    if !table.converged {
        let stuck = table.entries.iter().filter(|e| !e.converged).count();
        return Err(CliError::non_convergence(format!(
            "{} entries above tolerance after {} refinements",
            stuck, table.refinements
        )));
    }
    Ok(())
}

fn cmd_oracle(args: OracleArgs, config: &FileConfig) -> Result<(), CliError> {
    let initial = need_state(args.initial, &config.initial, "initial")?;
    let t = need(args.t, config.t, "t")?;
    let p = need(args.p, config.p, "p")?;
    validate_tp(t, p)?;
    let window = parse::parse_window(
        &args
            .window
            .or_else(|| config.window.clone())
            .ok_or_else(|| CliError::validation("--window is required"))?,
    )?;
    let tail_tol = args.tail_tol.or(config.tail_tol).unwrap_or(1e-12);
    if !(tail_tol > 0.0) {
        return Err(CliError::validation("tail tolerance must be positive"));
    }
    let params = UniformizationParams::for_query(initial.len(), t, tail_tol);
    let table = uniformized_distribution(&initial, t, p, &params)
        .map_err(|e| CliError::validation(e.to_string()))?;
    let rows: Vec<Row> = table
        .probs
        .iter()
        .filter(|(s, _)| s.positions().iter().all(|&x| x >= window.0 && x <= window.1))
        .map(|(s, &prob)| Row {
            state: s.clone(),
            probability: prob,
            stderr: None,
        })
        .collect();
    write_csv(args.out.as_ref(), &rows, false)?;
    eprintln!(
        "total={:e} leaked={:e} tail_bound={:e} depth={} states={}",
        table.total(),
        table.leaked,
        table.tail_bound,
        params.depth,
        table.probs.len()
    );
    Ok(())
}

fn cmd_simulate(args: SimulateArgs, config: &FileConfig) -> Result<(), CliError> {
    let initial = need_state(args.initial, &config.initial, "initial")?;
    let t = need(args.t, config.t, "t")?;
    let p = need(args.p, config.p, "p")?;
    validate_tp(t, p)?;
    let n_paths = need(args.paths, config.paths, "paths")?;
    if n_paths == 0 {
        return Err(CliError::validation("need at least one path"));
    }
    let master_seed = args.seed.or(config.seed).unwrap_or(0);
    let plan = SimulationPlan {
        initial,
        t_end: t,
        p,
        n_paths,
        master_seed,
    };
    let pool = ThreadPool::from_env(config.workers);
    let table = empirical_distribution_with(&plan, &pool);
    let rows: Vec<Row> = table
        .rows()
        .map(|(s, f, se)| Row {
            state: s.clone(),
            probability: f,
            stderr: Some(se),
        })
        .collect();
    write_csv(args.out.as_ref(), &rows, true)?;
    eprintln!("paths={} states={}", table.n_paths(), table.counts().len());
    Ok(())
}

fn print_report(report: &SuiteReport) {
    println!(
        "{} {:<18} max residual {:9.3e} (tol {:.1e}) - {}",
        if report.pass { "PASS" } else { "FAIL" },
        report.name,
        report.max_residual,
        report.tolerance,
        report.detail
    );
}

fn cmd_verify(args: VerifyArgs, config: &FileConfig) -> Result<(), CliError> {
    let max_n = args.n.or(config.n).unwrap_or(5);
    if max_n < 2 {
        return Err(CliError::validation("need n >= 2 for the scattering suites"));
    }
    let trials = args.trials.or(config.trials).unwrap_or(100);
    let seed = args.seed.or(config.seed).unwrap_or(7);
    let ns: Vec<u32> = (2..=max_n).collect();
    let reports = [
        inverse_relation_suite(&ns, trials, seed, 1e-12),
        yang_baxter_suite(&ns, trials, seed.wrapping_add(1), 1e-12),
        b_relation_suite(6),
        boundary_residual_suite(trials.clamp(1, 20), seed.wrapping_add(2), 1e-10),
        word_independence_suite(seed.wrapping_add(3), 1e-12),
    ];
    let mut ok = true;
    for report in &reports {
        print_report(report);
        ok &= report.pass;
    }
    if ok {
        println!("all identities hold");
        Ok(())
    } else {
        Err(CliError::verification("identity suite failed"))
    }
}

fn fmt_complex(c: Complex64) -> String {
    if c.im == 0.0 {
        format!("{}", c.re)
    } else if c.re == 0.0 {
        format!("{}i", c.im)
    } else if c.im < 0.0 {
        format!("{}{}i", c.re, c.im)
    } else {
        format!("{}+{}i", c.re, c.im)
    }
}

fn print_matrix(name: &str, m: &LocalMatrix<Complex64>) {
    let n = m.n();
    let labels: Vec<(u32, u32)> = (1..=n)
        .flat_map(|i| (1..=n).map(move |j| (i, j)))
        .collect();
    println!("# matrix {} (n={})", name, n);
    let header: Vec<String> = labels.iter().map(|(i, j)| format!("{}{}", i, j)).collect();
    println!(";{}", header.join(";"));
    for row in &labels {
        let mut cells = Vec::with_capacity(labels.len() + 1);
        cells.push(format!("{}{}", row.0, row.1));
        for col in &labels {
            cells.push(fmt_complex(m.get(*row, *col)));
        }
        println!("{}", cells.join(";"));
    }
}

fn cmd_tables(args: TablesArgs, config: &FileConfig) -> Result<(), CliError> {
    let n = need(args.n, config.n, "n")?;
    if n < 1 {
        return Err(CliError::validation("n must be at least 1"));
    }
    let which = args.matrix.to_ascii_lowercase();
    let want = |name: &str| which == "all" || which == name;
    if !["all", "b", "b1", "b2", "r"].contains(&which.as_str()) {
        return Err(CliError::validation("matrix must be one of b, b1, b2, r, all"));
    }
    if want("b") {
        print_matrix("B", &build_b(n));
    }
    if want("b1") {
        print_matrix("B1", &build_b1(n));
    }
    if want("b2") {
        print_matrix("B2", &build_b2(n));
    }
    if want("r") {
        let (beta, alpha) = match (&args.xi_beta, &args.xi_alpha) {
            (Some(b), Some(a)) => (parse::parse_complex(b)?, parse::parse_complex(a)?),
            _ if which == "r" => {
                return Err(CliError::validation("R requires --xi-beta and --xi-alpha"))
            }
            _ => return Ok(()), // `all` without parameters dumps only B, B1, B2
        };
        let r = build_r(n, &beta, &alpha).map_err(|e| CliError::validation(e.to_string()))?;
        print_matrix("R", &r);
    }
    Ok(())
}

fn cmd_amplitudes(args: AmplitudesArgs) -> Result<(), CliError> {
    let nu_letters = parse::parse_word(
        &args.nu.ok_or_else(|| CliError::validation("--nu is required"))?,
    )?;
    let nu = SpeciesWord::new(nu_letters).map_err(|e| CliError::validation(e.to_string()))?;
    let xis = parse::parse_complex_list(
        &args.xi.ok_or_else(|| CliError::validation("--xi is required"))?,
    )?;
    if xis.len() != nu.len() {
        return Err(CliError::validation("need one xi per letter of nu"));
    }
    for &xi in &xis {
        SpectralPoint::new(xi).map_err(|e| CliError::validation(e.to_string()))?;
    }
    let n_particles = nu.len();
    // sector words in lexicographic order
    let mut words = vec![nu.multiset()];
    loop {
        let mut w = words.last().unwrap().clone();
        let len = w.len();
        let Some(i) = (0..len.saturating_sub(1)).rev().find(|&i| w[i] < w[i + 1]) else {
            break;
        };
        let j = (i + 1..len).rev().find(|&j| w[j] > w[i]).unwrap();
        w.swap(i, j);
        w[i + 1..].reverse();
        words.push(w);
    }
    println!("sigma;pi;amplitude");
    for sigma in Permutation::all(n_particles) {
        let col = amplitude_column(&sigma, &nu, &xis)
            .map_err(|e| CliError::validation(e.to_string()))?;
        for w in &words {
            let word = SpeciesWord::new(w.clone()).expect("sector word");
            let value = col.get(&word);
            let pi: Vec<String> = w.iter().map(|l| l.to_string()).collect();
            println!("{};{};{}", sigma, pi.join(","), fmt_complex(value));
        }
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<(), CliError> {
    let read = |p: &PathBuf| -> Result<_, CliError> {
        let text = std::fs::read_to_string(p)
            .map_err(|e| CliError::validation(format!("cannot read {}: {}", p.display(), e)))?;
        csvio::parse_distribution(&text).map_err(CliError::validation)
    };
    let a = read(&args.a)?;
    let b = read(&args.b)?;
    let mut keys: Vec<csvio::Key> = a.keys().chain(b.keys()).cloned().collect();
    keys.sort();
    keys.dedup();
    let mut max_dev = 0.0f64;
    let mut sum_dev = 0.0f64;
    for key in &keys {
        let va = a.get(key).copied().unwrap_or(0.0);
        let vb = b.get(key).copied().unwrap_or(0.0);
        let dev = (va - vb).abs();
        max_dev = max_dev.max(dev);
        sum_dev += dev;
    }
    let mean = if keys.is_empty() { 0.0 } else { sum_dev / keys.len() as f64 };
    println!("rows={} max_abs_dev={:e} mean_abs_dev={:e}", keys.len(), max_dev, mean);
    std::io::stdout().flush().ok();
    if let Some(tol) = args.tol {
        if max_dev > tol {
            return Err(CliError::verification(format!(
                "max deviation {:e} exceeds tolerance {:e}",
                max_dev, tol
            )));
        }
    }
    Ok(())
}
