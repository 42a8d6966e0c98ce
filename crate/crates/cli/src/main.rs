//! `coopd`: benchmark harness for the full and coordinate primal-dual
//! methods. Writes one CSV per run and a `summary.json` into `--out`.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use coopd::experiments::{instances, run_bench, BenchConfig, BenchMethod, BenchOutcome, Experiment, SigmaGrid};
use coopd::Error;

const AFTER_HELP: &str = "\
Defaults by experiment (desk scale; --full-scale uses m=1000, n=4000 and
RPCA 1000x500, r=20):
  bp1, bp2    m=200 n=800 width=50, sigma grid -15:15, eps=1e-6,
              max epochs 5000, methods pda,block-pda,coo-pda,
              coordinate exponent 7 (coo-pda) / 6 (block-pda) for bp1,
              -2 for bp2 (11 and 8 with --full-scale)
  bp-noisy    five scenarios, block-pda, 2000 epochs, exponent 14 (12 for dct;
              25 and 22 with --full-scale)
  rpca        n1=200 n2=100 rank=5, sigma grid -6:12, eps=1e-6,
              methods pda,coo-pda,pda-r,coo-pda-r, exponent 5
  lp          m=4 n=8 width=2, sigma grid -6:6, eps=1e-8, 20000 epochs
  consensus   ring of n=10 nodes, width=2, sigma grid -6:6, eps=1e-8
  composite   m=200 n=800, sigma grid -10:10, exponent 7

Coordinate methods use sigma = 1/(2^j n_blocks) and tau_i = gamma/(sigma lambda_i).
The full iteration uses sigma = 1/(2^j ||A||), tau = gamma 2^j/||A|| and
reports the grid point with the fewest epochs (ties: smaller j).

Exit codes: 0 success, 2 bad configuration, 3 I/O failure.";

#[derive(Debug, Parser)]
#[command(name = "coopd", version, about = "Primal-dual vs. coordinate primal-dual benchmarks", after_help = AFTER_HELP)]
struct Cli {
    /// bp1 | bp2 | bp-noisy | rpca | lp | consensus | composite
    #[arg(long)]
    experiment: Option<String>,
    /// Rows of A [default: per experiment]
    #[arg(long)]
    m: Option<usize>,
    /// Columns of A, or nodes for consensus [default: per experiment]
    #[arg(long)]
    n: Option<usize>,
    /// RPCA rows [default: 200]
    #[arg(long)]
    n1: Option<usize>,
    /// RPCA columns [default: 100]
    #[arg(long)]
    n2: Option<usize>,
    /// RPCA rank [default: 5]
    #[arg(long)]
    rank: Option<usize>,
    /// Block width for block-pda [default: 50; 2 for lp and consensus]
    #[arg(long)]
    width: Option<usize>,
    /// Exponent grid of the full iteration, `j` or `a:b` [default: per experiment]
    #[arg(long, allow_hyphen_values = true)]
    sigma_exp: Option<String>,
    /// Exponent of the coordinate methods [default: per experiment]
    #[arg(long, allow_hyphen_values = true)]
    coo_sigma_exp: Option<i32>,
    /// Stepsize safety factor in (0, 1) [default: 0.99]
    #[arg(long)]
    gamma: Option<f64>,
    /// Stopping tolerance [default: per experiment]
    #[arg(long)]
    eps: Option<f64>,
    /// Epoch budget per run [default: per experiment]
    #[arg(long)]
    max_epochs: Option<u64>,
    /// Instance seed; repeat or comma-separate for several [default: $COOPD_SEED, else 1]
    #[arg(long = "seed", env = "COOPD_SEED", value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Comma-separated subset of pda, block-pda, coo-pda, pda-r, coo-pda-r
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    /// Output directory
    #[arg(long, default_value = "coopd-out")]
    out: PathBuf,
    /// Concurrent runs
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Use the published problem sizes
    #[arg(long)]
    full_scale: bool,
    /// Also write the generated instances under <out>/instances
    #[arg(long)]
    dump_instance: bool,
}

enum Failure {
    Config(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => Failure::Io(e.to_string()),
            other => Failure::Config(other.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn build_config(cli: &Cli) -> Result<BenchConfig, Failure> {
    let name = cli
        .experiment
        .as_deref()
        .ok_or_else(|| Failure::Config("--experiment is required".into()))?;
    let experiment = Experiment::parse(name)?;
    let mut cfg = BenchConfig::defaults(experiment, cli.full_scale);
    macro_rules! set {
        ($($f:ident),*) => { $(if let Some(v) = cli.$f { cfg.$f = v; })* };
    }
    set!(m, n, n1, n2, rank, width, gamma, eps, max_epochs);
    if let Some(g) = &cli.sigma_exp {
        cfg.sigma_grid = SigmaGrid::parse(g)?;
    }
    cfg.coo_sigma_exp = cli.coo_sigma_exp;
    if !cli.seeds.is_empty() {
        cfg.seeds = cli.seeds.clone();
    }
    if !cli.methods.is_empty() {
        cfg.methods = cli
            .methods
            .iter()
            .map(|m| BenchMethod::parse(m.trim()))
            .collect::<Result<_, _>>()?;
    }
    if cli.jobs == 0 {
        return Err(Failure::Config("--jobs must be positive".into()));
    }
    cfg.jobs = cli.jobs;
    cfg.validate()?;
    Ok(cfg)
}

fn write_outputs(out: &Path, outcome: &BenchOutcome) -> Result<(), Failure> {
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    for run in &outcome.runs {
        let path = out.join(format!("{}.csv", run.file_stem()));
        let file = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        run.report.write_csv(io::BufWriter::new(file))?;
    }
    let path = out.join("summary.json");
    let mut json = outcome.summary.to_json()?;
    json.push('\n');
    fs::write(&path, json).map_err(|e| io_err(&path, e))?;
    Ok(())
}

fn dump_instances(out: &Path, cfg: &BenchConfig) -> Result<(), Failure> {
    for &method in &cfg.methods {
        for &seed in &cfg.seeds {
            for (name, inst) in instances(cfg, method, seed)? {
                let dir = out
                    .join("instances")
                    .join(format!("{name}_{}_seed{seed}", method.name()));
                inst.export(&dir)?;
            }
        }
    }
    Ok(())
}

fn print_table(outcome: &BenchOutcome) {
    let stdout = io::stdout();
    let mut w = stdout.lock();
    let _ = writeln!(w, "{:<28} {:>6} {:>10} {:>8} {:>8} {:>10}", "run", "seeds", "epochs", "min", "max", "converged");
    for (key, m) in &outcome.summary.methods {
        let _ = writeln!(
            w,
            "{:<28} {:>6} {:>10.1} {:>8} {:>8} {:>10}",
            key,
            m.runs.len(),
            m.epochs.mean,
            m.epochs.min,
            m.epochs.max,
            m.converged_runs
        );
    }
}

fn main() -> ExitCode {
    if std::env::args_os().len() <= 1 {
        let _ = Cli::command().print_help();
        return ExitCode::SUCCESS;
    }
    let cli = Cli::parse();
    let result = build_config(&cli).and_then(|cfg| {
        if cli.dump_instance {
            dump_instances(&cli.out, &cfg)?;
        }
        let outcome = run_bench(&cfg)?;
        write_outputs(&cli.out, &outcome)?;
        print_table(&outcome);
        Ok(())
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("coopd: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("coopd: {msg}");
            ExitCode::from(3)
        }
    }
}
