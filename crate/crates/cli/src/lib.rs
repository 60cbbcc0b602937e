//! Command-line front end: load a problem, run the verifier, print the
//! verdict and statistics, and drive ablation runs over a manifest.
//!
//! Exit codes: 0 unsat, 1 sat, 2 unknown/timeout, 3 usage or I/O error.
//! The first stdout line is always the machine-parsable verdict word.

use clap::{Args, Parser, Subcommand};
use relusat_core::benchgen::{self, GenConfig, HardGenConfig};
use relusat_core::io::{build_problem, parse_network, parse_property, VerificationProblem};
use relusat_core::oracle;
use relusat_core::search::{verify, SearchConfig, SearchStats, Verdict};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::time::Duration;

pub const EXIT_UNSAT: i32 = 0;
pub const EXIT_SAT: i32 = 1;
pub const EXIT_UNKNOWN: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "relusat", version, about = "DPLL(T) verifier for ReLU networks")]
pub struct Cli {
    #[command(subcommand)]
    pub cmd: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Verify that a property holds for a network.
    Verify(VerifyArgs),
    /// Run the standard configuration ablation over a manifest of instances.
    Ablation(AblationArgs),
    /// Generate a benchmark corpus (networks, properties, manifest).
    Gen(GenArgs),
    /// Brute-force reference verdict by activation-pattern enumeration.
    #[command(hide = true)]
    Oracle(OracleArgs),
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Network file (JSON).
    #[arg(long)]
    pub net: PathBuf,
    /// Property file (VNN-LIB subset).
    #[arg(long)]
    pub prop: PathBuf,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
    /// Beam width n: nodes processed per parallel batch.
    #[arg(long, default_value_t = 4000)]
    pub beam: usize,
    /// Neurons to attempt stabilizing per node (k).
    #[arg(long = "stabilize-k", default_value_t = 64)]
    pub stabilize_k: usize,
    /// Stabilize only at depths below this.
    #[arg(long = "stabilize-depth", default_value_t = 4)]
    pub stabilize_depth: usize,
    /// Restart after this many nodes since the last restart.
    #[arg(long = "restart-nodes", default_value_t = 100_000)]
    pub restart_nodes: usize,
    /// Restart when the frontier exceeds this size.
    #[arg(long = "restart-frontier", default_value_t = 10_000)]
    pub restart_frontier: usize,
    /// Disable restarts entirely.
    #[arg(long = "no-restart")]
    pub no_restart: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the run record (JSON) here.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// LP feasibility check at every node (differential testing).
    #[arg(long = "full-lp")]
    pub full_lp: bool,
}

impl VerifyArgs {
    pub fn to_config(&self) -> SearchConfig {
        SearchConfig {
            beam_width: self.beam,
            stabilize_k: self.stabilize_k,
            stabilize_max_depth: self.stabilize_depth,
            restarts: !self.no_restart,
            restart_node_limit: self.restart_nodes,
            restart_frontier_limit: self.restart_frontier,
            seed: self.seed,
            timeout: self.timeout.map(Duration::from_secs_f64),
            full_lp: self.full_lp,
        }
    }
}

#[derive(Args, Debug)]
pub struct AblationArgs {
    /// Manifest: one `net_path,prop_path` line per instance.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Per-instance budget in seconds.
    #[arg(long, default_value_t = 60.0)]
    pub timeout: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated configurations to run.
    #[arg(long, default_value = "N,S,P,P+R,P+S,P+S+R")]
    pub configs: String,
    /// Beam width for the parallel configurations.
    #[arg(long, default_value_t = 4000)]
    pub beam: usize,
    /// Stabilization k for the S configurations.
    #[arg(long = "stabilize-k", default_value_t = 64)]
    pub stabilize_k: usize,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    #[arg(long = "out-dir")]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub count: usize,
    /// "test" (small, oracle-labeled) or "hard" (ablation-grade).
    #[arg(long, default_value = "test")]
    pub kind: String,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long)]
    pub net: PathBuf,
    #[arg(long)]
    pub prop: PathBuf,
}

/// Serialized record of one verification run; re-parses to an equal value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub net_path: String,
    pub prop_path: String,
    pub config: SearchConfig,
    pub verdict: String,
    pub counterexample: Option<Vec<f64>>,
    pub stats: SearchStats,
    pub version: String,
}

fn load_problem(net: &Path, prop: &Path) -> Result<VerificationProblem, String> {
    let net_text =
        std::fs::read_to_string(net).map_err(|e| format!("{}: {e}", net.display()))?;
    let prop_text =
        std::fs::read_to_string(prop).map_err(|e| format!("{}: {e}", prop.display()))?;
    let network = parse_network(&net_text).map_err(|e| format!("{}: {e}", net.display()))?;
    let property = parse_property(&prop_text).map_err(|e| format!("{}: {e}", prop.display()))?;
    build_problem(network, property).map_err(|e| e.to_string())
}

fn exit_code_for(verdict: &Verdict) -> i32 {
    match verdict {
        Verdict::Unsat => EXIT_UNSAT,
        Verdict::Sat { .. } => EXIT_SAT,
        Verdict::Unknown { .. } | Verdict::Timeout => EXIT_UNKNOWN,
    }
}

fn print_verdict(verdict: &Verdict) {
    println!("{}", verdict.word());
    if let Verdict::Sat { witness, .. } = verdict {
        for (i, v) in witness.iter().enumerate() {
            println!("x_{i} = {v}");
        }
    }
}

pub fn run_verify(args: &VerifyArgs) -> i32 {
    let config = args.to_config();
    if let Err(e) = config.validate() {
        eprintln!("error: {e}");
        return EXIT_USAGE;
    }
    let problem = match load_problem(&args.net, &args.prop) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let result = verify(&problem, &config);
    print_verdict(&result.verdict);
    if let Some(stats_path) = &args.stats {
        let record = RunRecord {
            net_path: args.net.display().to_string(),
            prop_path: args.prop.display().to_string(),
            config,
            verdict: result.verdict.word().to_string(),
            counterexample: match &result.verdict {
                Verdict::Sat { witness, .. } => Some(witness.clone()),
                _ => None,
            },
            stats: result.stats,
            version: env!("CARGO_PKG_VERSION").to_string(),
        };
        let json = serde_json::to_string_pretty(&record).expect("record serializes");
        if let Err(e) = std::fs::write(stats_path, json) {
            eprintln!("error: {}: {e}", stats_path.display());
            return EXIT_USAGE;
        }
    }
    exit_code_for(&result.verdict)
}

/// The six standard configurations: N (sequential baseline), S adds
/// stabilization, P adds beam parallelism, R adds restarts.
pub fn ablation_config(
    name: &str,
    beam: usize,
    k: usize,
    budget: Duration,
    seed: u64,
) -> Option<SearchConfig> {
    let base = SearchConfig {
        timeout: Some(budget),
        seed,
        restarts: false,
        ..SearchConfig::default()
    };
    let cfg = match name {
        "N" => SearchConfig {
            beam_width: 1,
            stabilize_k: 0,
            ..base
        },
        "S" => SearchConfig {
            beam_width: 1,
            stabilize_k: k,
            ..base
        },
        "P" => SearchConfig {
            beam_width: beam,
            stabilize_k: 0,
            ..base
        },
        "P+R" => SearchConfig {
            beam_width: beam,
            stabilize_k: 0,
            restarts: true,
            ..base
        },
        "P+S" => SearchConfig {
            beam_width: beam,
            stabilize_k: k,
            ..base
        },
        "P+S+R" => SearchConfig {
            beam_width: beam,
            stabilize_k: k,
            restarts: true,
            ..base
        },
        _ => return None,
    };
    Some(cfg)
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationRow {
    pub config: String,
    pub solved: usize,
    pub total: usize,
    /// Mean wall time in seconds; unsolved instances count at the budget.
    pub mean_time_s: f64,
    pub verdicts: Vec<String>,
    pub times_s: Vec<f64>,
}

/// Runs every requested configuration over the manifest instances.
pub fn run_ablation_over(
    instances: &[(PathBuf, PathBuf)],
    configs: &[String],
    beam: usize,
    k: usize,
    budget: Duration,
    seed: u64,
) -> Result<Vec<AblationRow>, String> {
    let problems: Vec<VerificationProblem> = instances
        .iter()
        .map(|(n, p)| load_problem(n, p))
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for name in configs {
        let Some(config) = ablation_config(name, beam, k, budget, seed) else {
            return Err(format!("unknown configuration `{name}`"));
        };
        let mut solved = 0;
        let mut verdicts = Vec::new();
        let mut times = Vec::new();
        for problem in &problems {
            let result = verify(problem, &config);
            let secs = (result.stats.wall_time_ms as f64 / 1000.0).min(budget.as_secs_f64());
            let is_solved = matches!(result.verdict, Verdict::Sat { .. } | Verdict::Unsat);
            if is_solved {
                solved += 1;
                times.push(secs);
            } else {
                times.push(budget.as_secs_f64());
            }
            verdicts.push(result.verdict.word().to_string());
        }
        let mean = if times.is_empty() {
            0.0
        } else {
            times.iter().sum::<f64>() / times.len() as f64
        };
        rows.push(AblationRow {
            config: name.clone(),
            solved,
            total: problems.len(),
            mean_time_s: mean,
            verdicts,
            times_s: times,
        });
    }
    Ok(rows)
}

pub fn parse_manifest(path: &Path) -> Result<Vec<(PathBuf, PathBuf)>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut out = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let Some((net, prop)) = line.split_once(',') else {
            return Err(format!(
                "{}:{}: expected `net_path,prop_path`",
                path.display(),
                ln + 1
            ));
        };
        out.push((PathBuf::from(net.trim()), PathBuf::from(prop.trim())));
    }
    Ok(out)
}

pub fn format_ablation_table(rows: &[AblationRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<8} {:>8} {:>8} {:>12}\n",
        "config", "solved", "total", "mean time(s)"
    ));
    for row in rows {
        out.push_str(&format!(
            "{:<8} {:>8} {:>8} {:>12.2}\n",
            row.config, row.solved, row.total, row.mean_time_s
        ));
    }
    out
}

pub fn run_ablation(args: &AblationArgs) -> i32 {
    let instances = match parse_manifest(&args.manifest) {
        Ok(i) => i,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let configs: Vec<String> = args
        .configs
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    match run_ablation_over(
        &instances,
        &configs,
        args.beam,
        args.stabilize_k,
        Duration::from_secs_f64(args.timeout),
        args.seed,
    ) {
        Ok(rows) => {
            print!("{}", format_ablation_table(&rows));
            EXIT_UNSAT
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

pub fn run_gen(args: &GenArgs) -> i32 {
    let instances = match args.kind.as_str() {
        "test" => benchgen::gen_corpus(&GenConfig {
            seed: args.seed,
            count: args.count,
            ..GenConfig::default()
        }),
        "hard" => benchgen::gen_hard_corpus(&HardGenConfig {
            seed: args.seed,
            count: args.count,
            ..HardGenConfig::default()
        }),
        other => {
            eprintln!("error: unknown corpus kind `{other}` (use test|hard)");
            return EXIT_USAGE;
        }
    };
    match benchgen::write_corpus(&args.out_dir, &instances) {
        Ok(written) => {
            println!("{}", written.manifest.display());
            EXIT_UNSAT
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

pub fn run_oracle(args: &OracleArgs) -> i32 {
    let problem = match load_problem(&args.net, &args.prop) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    match oracle::enumerate_verify(&problem) {
        Ok(verdict) => {
            print_verdict(&verdict);
            exit_code_for(&verdict)
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}

/// Entry point shared by the binary and tests. Usage errors exit 3.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            // clap prints help/version on stdout with success status.
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return EXIT_UNSAT;
            }
            let _ = e.print();
            return EXIT_USAGE;
        }
    };
    match &cli.cmd {
        Command::Verify(args) => run_verify(args),
        Command::Ablation(args) => run_ablation(args),
        Command::Gen(args) => run_gen(args),
        Command::Oracle(args) => run_oracle(args),
    }
}
