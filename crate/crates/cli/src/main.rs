use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gtc_core::dimred::optimal_reduction;
use gtc_core::graph_ops::{apply_graft, chain_min_ci, chain_pairwise_ci, parse_chain, simplify_pair, GraftingChain, GraftingOp};
use gtc_core::oracle::{ci_maxmin_scan, mc_error_exponent, search_dependent_counterexample, CounterexampleFilter};
use gtc_core::spectral::{chernoff, gen_eigs};
use gtc_core::tree::{parse_gtree_bytes, write_gtree};
use gtc_core::verify::run_invariant_suite;
use gtc_core::{par, Error, GaussianTree};

const ORACLE_GRID: usize = 256;

#[derive(Parser)]
#[command(name = "gtc", version, about = "Chernoff information between Gaussian tree models")]
struct Cli {
    /// Worker threads (0 = one per core).
    #[arg(long, global = true, env = "GTC_THREADS", default_value_t = 0)]
    threads: usize,
    /// Decimal places for printed numbers.
    #[arg(long, global = true, default_value_t = 6, value_parser = clap::value_parser!(u8).range(0..=17))]
    precision: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Chernoff information and λ* of two trees.
    Ci {
        a: PathBuf,
        b: PathBuf,
        /// Use the dense max-min scan instead of the eigenvalue formula.
        #[arg(long)]
        oracle: bool,
        /// Report CI in bits.
        #[arg(long)]
        bits: bool,
    },
    /// Generalized eigenvalues of the covariance pair.
    Eig { a: PathBuf, b: PathBuf },
    /// Apply one grafting operation.
    Graft {
        tree: PathBuf,
        /// Child and its current parent.
        #[arg(long, num_args = 2, value_names = ["I", "P"], required = true)]
        cut: Vec<usize>,
        /// New parent.
        #[arg(long, value_name = "Q")]
        paste: usize,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
    },
    /// Strip shared leaves and shared degree-two nodes from a pair.
    Simplify {
        a: PathBuf,
        b: PathBuf,
        /// Writes PREFIX1.gtree and PREFIX2.gtree.
        #[arg(long = "o-prefix", value_name = "PREFIX")]
        prefix: PathBuf,
    },
    /// Minimum pairwise CI along a grafting chain.
    Chain {
        file: PathBuf,
        /// Scan every pair even for independent chains.
        #[arg(long)]
        exhaustive: bool,
        /// Also print the full pairwise CI matrix.
        #[arg(long)]
        matrix: bool,
    },
    /// Optimal projection to fewer dimensions.
    Reduce {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        dim: usize,
    },
    /// Monte Carlo error exponent; prints CSV.
    Simulate {
        #[arg(required = true, num_args = 2..)]
        files: Vec<PathBuf>,
        #[arg(long)]
        trials: usize,
        #[arg(long = "t", value_delimiter = ',', required = true)]
        t_values: Vec<usize>,
        #[arg(long)]
        seed: u64,
    },
    /// Search for a dependent two-graft chain with CI(T1,T3) < CI(T1,T2).
    SearchCex(SearchArgs),
    /// Run the invariant suite.
    Verify {
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Args)]
struct SearchArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    attempts: usize,
    /// Require exactly this many unit eigenvalues.
    #[arg(long)]
    units: Option<usize>,
    /// Require λ*(T1,T3) in the open interval (0.5, 0.55) and CI(T2,T3) minimal.
    #[arg(long)]
    table_pattern: bool,
}

/// A failure with its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_numerical() { 4 } else { 3 };
        Failure { code, message: e.to_string() }
    }
}

fn input_error(path: &Path, msg: impl std::fmt::Display) -> Failure {
    Failure { code: 3, message: format!("{}: {msg}", path.display()) }
}

fn read_tree(path: &Path) -> Result<GaussianTree, Failure> {
    let bytes = fs::read(path).map_err(|e| input_error(path, e))?;
    parse_gtree_bytes(&bytes).map_err(|e| input_error(path, e))
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| input_error(path, e))
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn run(cli: Cli) -> Result<String, Failure> {
    let p = cli.precision as usize;
    let mut out = String::new();
    let mut line = |s: String| {
        out.push_str(&s);
        out.push('\n');
    };
    match cli.command {
        Command::Ci { a, b, oracle, bits } => {
            let (ta, tb) = (read_tree(&a)?, read_tree(&b)?);
            if ta.node_count() != tb.node_count() {
                return Err(Error::DimensionMismatch(ta.node_count(), tb.node_count()).into());
            }
            let (ci, lam) = if oracle {
                ci_maxmin_scan(&ta.covariance(), &tb.covariance(), ORACLE_GRID)?
            } else {
                let r = chernoff(&ta.covariance(), &tb.covariance())?;
                (r.ci, r.lambda_star)
            };
            let ci = if bits { ci / std::f64::consts::LN_2 } else { ci };
            line(format!("ci={ci:.p$}"));
            line(format!("lambda_star={lam:.p$}"));
        }
        Command::Eig { a, b } => {
            let (ta, tb) = (read_tree(&a)?, read_tree(&b)?);
            if ta.node_count() != tb.node_count() {
                return Err(Error::DimensionMismatch(ta.node_count(), tb.node_count()).into());
            }
            let spectrum = gen_eigs(&ta.covariance(), &tb.covariance())?;
            line(format!("log_det_ratio={:.p$}", spectrum.log_det_ratio));
            for v in &spectrum.values {
                line(format!("{v:.p$}"));
            }
        }
        Command::Graft { tree, cut, paste, out: dest } => {
            let t = read_tree(&tree)?;
            let moved = apply_graft(&t, GraftingOp::new(cut[0], cut[1], paste))?;
            write_file(&dest, &write_gtree(&moved))?;
        }
        Command::Simplify { a, b, prefix } => {
            let (ta, tb) = (read_tree(&a)?, read_tree(&b)?);
            let s = simplify_pair(&ta, &tb)?;
            write_file(&with_suffix(&prefix, "1.gtree"), &write_gtree(&s.first))?;
            write_file(&with_suffix(&prefix, "2.gtree"), &write_gtree(&s.second))?;
            let kept: Vec<String> = s.kept.iter().map(ToString::to_string).collect();
            line(format!("nodes={}", s.first.node_count()));
            line(format!("kept={}", kept.join(",")));
            line(format!("identical={}", s.identical));
        }
        Command::Chain { file, exhaustive, matrix } => {
            let text = fs::read_to_string(&file).map_err(|e| input_error(&file, e))?;
            let (base, ops) = parse_chain(&text).map_err(|e| input_error(&file, e))?;
            let chain = GraftingChain::new(base, ops)?;
            let m = chain_min_ci(&chain, exhaustive)?;
            line(format!("grafts={}", chain.op_count()));
            line(format!("independent={}", chain.is_independent()));
            line(format!("method={}", m.method.tag()));
            line(format!("min_pair={},{}", m.pair.0, m.pair.1));
            line(format!("min_ci={:.p$}", m.value));
            if matrix {
                for row in chain_pairwise_ci(&chain)? {
                    let cells: Vec<String> = row.iter().map(|v| format!("{v:.p$}")).collect();
                    line(cells.join(","));
                }
            }
        }
        Command::Reduce { a, b, dim } => {
            let (ta, tb) = (read_tree(&a)?, read_tree(&b)?);
            if ta.node_count() != tb.node_count() {
                return Err(Error::DimensionMismatch(ta.node_count(), tb.node_count()).into());
            }
            let plan = optimal_reduction(&ta.covariance(), &tb.covariance(), dim)?;
            out.push_str(&plan.to_text());
        }
        Command::Simulate { files, trials, t_values, seed } => {
            let trees = files.iter().map(|f| read_tree(f)).collect::<Result<Vec<_>, _>>()?;
            let report = mc_error_exponent(&trees, &t_values, trials, seed)?;
            out.push_str(&report.to_csv());
        }
        Command::SearchCex(args) => {
            let mut filter = if args.table_pattern {
                CounterexampleFilter::table_pattern()
            } else {
                CounterexampleFilter::default()
            };
            if args.units.is_some() {
                filter.unit_eigenvalues = args.units;
            }
            match search_dependent_counterexample(args.seed, args.attempts, &filter) {
                Some(c) => {
                    line(format!("attempt={}", c.attempt));
                    let chain = c.chain.ops();
                    for op in chain {
                        line(format!("graft={},{},{}", op.cut_child, op.old_parent, op.new_parent));
                    }
                    out.push_str(&c.to_table(p));
                    out.push_str(&write_gtree(c.chain.base()));
                }
                None => line("none".into()),
            }
        }
        Command::Verify { seed } => {
            let checks = run_invariant_suite(seed);
            let failed = checks.iter().filter(|c| !c.pass).count();
            for c in &checks {
                line(format!("{} {} {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail));
            }
            if failed > 0 {
                return Err(Failure { code: 4, message: format!("{failed} invariant check(s) failed\n{out}") });
            }
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let threads = cli.threads;
    match par::with_threads(threads, || run(cli)) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
