//! `cutlab` command line. Exit codes: 0 success, 2 input error, 3 solver failure.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cutlab::bench::{
    evaluate_picker, gen_corpus, head_to_head, parse_variants, read_store, run_matrix, sgm_table,
    training_records, virtual_best_ratios, CorpusKind, MatrixConfig, Metric, SizeParams, Variant,
};
use cutlab::bnb::{branch_and_cut_with, BnbOptions, ClockKind, NodeStats};
use cutlab::cutpipe::{RoundReport, SeparationConfig};
use cutlab::dominance::{self, check_dominance, construction_report, DominanceVerdict};
use cutlab::io::{read_incumbent, read_instance, write_instance};
use cutlab::regress::{self, export_decision_regions, read_training_csv, write_regions_csv, write_training_csv, KernelParams, RegressionModel};
use cutlab::{Cut, CutOrigin, Error, FeatureVector, MeasureKind};

#[derive(Parser)]
#[command(name = "cutlab", version, about = "Cut selection measures in a small branch-and-cut solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Root separation followed by branch-and-bound on one instance.
    Solve(SolveArgs),
    #[command(subcommand)]
    Bench(BenchCmd),
    #[command(subcommand)]
    Regress(RegressCmd),
    #[command(subcommand)]
    Dominance(DominanceCmd),
}

#[derive(Args)]
struct SepArgs {
    #[arg(long, default_value_t = 50)]
    rounds: usize,
    #[arg(long, default_value_t = 10)]
    max_cuts: usize,
    #[arg(long, default_value_t = 0.95)]
    parallelism: f64,
    #[arg(long, default_value_t = 3)]
    k_optima: usize,
    /// Time limit in seconds of the selected clock.
    #[arg(long)]
    time_limit: Option<f64>,
}

impl SepArgs {
    fn config(&self, measure: MeasureKind, seed: u64, density: Option<f64>) -> SeparationConfig {
        SeparationConfig {
            rounds: self.rounds,
            max_cuts_per_round: self.max_cuts,
            measure,
            density_threshold: density,
            parallelism_threshold: self.parallelism,
            k_optima: self.k_optima,
            seed,
            ..SeparationConfig::default()
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    instance: PathBuf,
    #[arg(long, default_value = "eff")]
    measure: String,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    density_threshold: Option<f64>,
    /// JSON file with `{"point": [...]}`.
    #[arg(long)]
    incumbent: Option<PathBuf>,
    /// Measure solve time with the system clock instead of the work clock.
    #[arg(long)]
    wall_clock: bool,
    #[command(flatten)]
    sep: SepArgs,
}

#[derive(Subcommand)]
enum BenchCmd {
    /// Write a synthetic corpus as one JSON file per instance.
    Gen {
        #[arg(long)]
        kind: String,
        #[arg(long, default_value_t = 10)]
        count: usize,
        #[arg(long, default_value_t = 12)]
        n: usize,
        #[arg(long, default_value_t = 6)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every instance × variant × seed, appending to a JSON-lines store.
    Run {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "all")]
        variants: String,
        #[arg(long, default_value = "1,2,3")]
        seeds: String,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        sep: SepArgs,
    },
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value = "nodes")]
        metric: String,
        #[arg(long, value_enum, default_value_t = Table::H2h)]
        table: Table,
        #[arg(long, default_value = "all")]
        variants: String,
    },
    /// Regression corpus CSV from the eight measure variants of a store.
    Export {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validated comparison of the model-picked measure against fixed measures.
    Pick {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 5)]
        folds: usize,
        #[command(flatten)]
        kernel: KernelArgs,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Table {
    H2h,
    Sgm,
    Vbr,
}

#[derive(Args, Clone, Copy)]
struct KernelArgs {
    #[arg(long, default_value_t = 1e-2)]
    lambda: f64,
    #[arg(long, default_value_t = 0.2)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    offset: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl KernelArgs {
    fn params(&self) -> KernelParams {
        KernelParams { lambda: self.lambda, gamma: self.gamma, offset: self.offset, ..KernelParams::default() }
    }
}

#[derive(Subcommand)]
enum RegressCmd {
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        kernel: KernelArgs,
    },
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Five comma separated values: dual_deg,primal_deg,frac,thin,density.
        #[arg(long)]
        features: String,
    },
    Pick {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: String,
    },
    Regions {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 50)]
        resolution: usize,
    },
}

#[derive(Subcommand)]
enum DominanceCmd {
    /// Compare two cuts `a·x ≤ a_rhs` and `b·x ≤ b_rhs` on an instance's relaxation.
    Check {
        instance: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        a: String,
        #[arg(long, allow_hyphen_values = true)]
        a_rhs: f64,
        #[arg(long, allow_hyphen_values = true)]
        b: String,
        #[arg(long, allow_hyphen_values = true)]
        b_rhs: f64,
    },
    /// Randomized consistency suite.
    Suite {
        /// 1 (eff, a-eff), 2 (mineff) or 3 (dcd, a-dcd, app-a-dcd).
        #[arg(long)]
        prop: u8,
        #[arg(long)]
        measure: Option<String>,
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// The exp-improv counterexample on a pentagon.
    Fig3,
    /// The eff counterexample on a triangle.
    Fig2b,
}

struct Failure {
    code: u8,
    msg: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::DimensionMismatch { .. }
            | Error::InvalidInstance(_)
            | Error::InvalidCut(_)
            | Error::InvalidInput(_)
            | Error::BudgetExceeded(_)
            | Error::Io(_)
            | Error::Parse(_) => 2,
            _ => 3,
        };
        Failure { code, msg: e.to_string() }
    }
}

fn input_err(msg: impl Into<String>) -> Failure {
    Failure { code: 2, msg: msg.into() }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn emit<T: Serialize>(v: &T) -> CliResult<()> {
    let s = serde_json::to_string_pretty(v).map_err(Error::from)?;
    let mut out = io::stdout().lock();
    writeln!(out, "{s}").map_err(Error::from)?;
    Ok(())
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> CliResult<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|_| input_err(format!("bad {what} {t:?}"))))
        .collect()
}

fn parse_measure(s: &str) -> CliResult<MeasureKind> {
    s.parse().map_err(input_err)
}

fn parse_features(s: &str) -> CliResult<FeatureVector> {
    let v: Vec<f64> = parse_list(s, "feature")?;
    let arr: [f64; 5] = v.try_into().map_err(|_| input_err("expected exactly five features"))?;
    Ok(FeatureVector::from_array(arr))
}

fn load_model(p: &Path) -> CliResult<RegressionModel> {
    Ok(RegressionModel::from_json(&fs::read_to_string(p).map_err(Error::from)?)?)
}

#[derive(Serialize)]
struct SolveReport {
    instance: String,
    measure: MeasureKind,
    seed: u64,
    density_threshold: Option<f64>,
    stats: NodeStats,
    features: Option<FeatureVector>,
    cuts_added: usize,
    rounds: Vec<RoundReport>,
    best_point: Option<Vec<f64>>,
}

fn solve(a: SolveArgs) -> CliResult<()> {
    let inst = read_instance(&a.instance)?;
    let measure = parse_measure(&a.measure)?;
    let cfg = a.sep.config(measure, a.seed, a.density_threshold);
    cfg.validate()?;
    let inc = match &a.incumbent {
        Some(p) => Some(read_incumbent(p, &inst, &cfg.tol)?),
        None => None,
    };
    let opts = BnbOptions {
        time_limit: a.sep.time_limit,
        clock: if a.wall_clock { ClockKind::Wall } else { ClockKind::Work },
        ..BnbOptions::default()
    };
    let out = branch_and_cut_with(&inst, &cfg, &opts, inc.as_ref())?;
    emit(&SolveReport {
        instance: inst.name.clone(),
        measure,
        seed: a.seed,
        density_threshold: a.density_threshold,
        stats: out.stats,
        features: out.features,
        cuts_added: out.cuts.len(),
        rounds: out.reports,
        best_point: out.incumbent.map(|i| i.point),
    })
}

fn load_corpus(dir: &Path) -> CliResult<Vec<cutlab::MipInstance<f64>>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(Error::from)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("json") | Some("mps")))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(input_err(format!("no .json or .mps instances in {}", dir.display())));
    }
    paths.iter().map(|p| read_instance(p).map_err(Failure::from)).collect()
}

fn bench_cmd(cmd: BenchCmd) -> CliResult<()> {
    match cmd {
        BenchCmd::Gen { kind, count, n, m, seed, out } => {
            let kind: CorpusKind = kind.parse().map_err(input_err)?;
            let corpus = gen_corpus(kind, count, SizeParams { n, m }, seed)?;
            fs::create_dir_all(&out).map_err(Error::from)?;
            for inst in &corpus {
                write_instance(&out.join(format!("{}.json", inst.name)), inst)?;
            }
            emit(&corpus.iter().map(|i| i.name.clone()).collect::<Vec<_>>())
        }
        BenchCmd::Run { corpus, variants, seeds, jobs, out, sep } => {
            let corpus = load_corpus(&corpus)?;
            let variants = parse_variants(&variants)?;
            let seeds: Vec<u64> = parse_list(&seeds, "seed")?;
            let cfg = MatrixConfig { base: sep.config(MeasureKind::Eff, 1, None), time_limit: sep.time_limit, jobs };
            cfg.base.validate()?;
            let recs = run_matrix(&corpus, &variants, &seeds, &cfg, Some(&out))?;
            #[derive(Serialize)]
            struct Summary {
                records: usize,
                store: String,
            }
            emit(&Summary { records: recs.len(), store: out.display().to_string() })
        }
        BenchCmd::Stats { input, metric, table, variants } => {
            let recs = read_store(&input)?;
            let metric: Metric = metric.parse().map_err(input_err)?;
            let variants = parse_variants(&variants)?;
            match table {
                Table::H2h => emit(&head_to_head(&recs, metric, &variants)),
                Table::Sgm => emit(&sgm_table(&recs, metric, &variants, Some(Variant::Measure(MeasureKind::Eff)))?),
                Table::Vbr => emit(&virtual_best_ratios(&recs, metric, &variants, false)),
            }
        }
        BenchCmd::Export { input, out } => {
            let recs = read_store(&input)?;
            let train = training_records(&recs);
            let f = fs::File::create(&out).map_err(Error::from)?;
            write_training_csv(&train, f)?;
            emit(&train.len())
        }
        BenchCmd::Pick { input, folds, kernel } => {
            let recs = read_store(&input)?;
            emit(&evaluate_picker(&recs, kernel.params(), folds, kernel.seed)?)
        }
    }
}

fn regress_cmd(cmd: RegressCmd) -> CliResult<()> {
    match cmd {
        RegressCmd::Train { input, out, kernel } => {
            let recs = read_training_csv(fs::File::open(&input).map_err(Error::from)?)?;
            let model = regress::train(&recs, kernel.params(), kernel.seed)?;
            fs::write(&out, model.to_json()?).map_err(Error::from)?;
            emit(&model.cv)
        }
        RegressCmd::Predict { model, features } => {
            let model = load_model(&model)?;
            let p = model.predict(&parse_features(&features)?);
            let named: Vec<(MeasureKind, f64)> = MeasureKind::ALL.iter().copied().zip(p).collect();
            emit(&named)
        }
        RegressCmd::Pick { model, features } => {
            let model = load_model(&model)?;
            emit(&model.pick_measure(&parse_features(&features)?))
        }
        RegressCmd::Regions { model, out, resolution } => {
            let model = load_model(&model)?;
            let cells = export_decision_regions(&model, resolution)?;
            write_regions_csv(&cells, fs::File::create(&out).map_err(Error::from)?)?;
            emit(&cells.len())
        }
    }
}

fn parse_cut(coeffs: &str, rhs: f64) -> CliResult<Cut<f64>> {
    Ok(Cut::new(parse_list(coeffs, "coefficient")?, rhs, CutOrigin::User, 0)?)
}

fn dominance_cmd(cmd: DominanceCmd) -> CliResult<()> {
    match cmd {
        DominanceCmd::Check { instance, a, a_rhs, b, b_rhs } => {
            let inst = read_instance(&instance)?;
            let (a, b) = (parse_cut(&a, a_rhs)?, parse_cut(&b, b_rhs)?);
            let v: DominanceVerdict<f64> = check_dominance(&inst, &[], &a, &b, inst_tol())?;
            emit(&v)
        }
        DominanceCmd::Suite { prop, measure, instances, seed } => {
            let m = measure.as_deref().map(parse_measure).transpose()?;
            let rep = match (prop, m) {
                (1, m) => dominance::prop1_suite(m.unwrap_or(MeasureKind::Eff), instances, seed)?,
                (2, None | Some(MeasureKind::MinEff)) => dominance::prop2_suite(instances, seed)?,
                (3, m) => dominance::prop3_suite(m.unwrap_or(MeasureKind::Dcd), instances, seed)?,
                _ => return Err(input_err("--prop must be 1, 2 or 3 (2 takes only mineff)")),
            };
            emit(&rep)
        }
        DominanceCmd::Fig3 => {
            let k = dominance::build_fig3_counterexample();
            emit(&(construction_report(&k, MeasureKind::ExpImprov)?, construction_report(&k, MeasureKind::Eff)?))
        }
        DominanceCmd::Fig2b => {
            let k = dominance::build_fig2b_counterexample();
            emit(&construction_report(&k, MeasureKind::Eff)?)
        }
    }
}

fn inst_tol() -> f64 {
    cutlab::Tolerances::default().feas
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Solve(a) => solve(a),
        Command::Bench(c) => bench_cmd(c),
        Command::Regress(c) => regress_cmd(c),
        Command::Dominance(c) => dominance_cmd(c),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}

