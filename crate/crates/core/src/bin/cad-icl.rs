use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use cad_icl::baselines::{Selector, Strategy};
use cad_icl::components::Granularities;
use cad_icl::corpus::{
    ingest_corpus, partition_tiers, score_corpus, split_test_set, Corpus, CorpusFormat, OpsCounter, Split,
    SPLITS_FILE,
};
use cad_icl::harness::{self, correlation_report, failure_report, load_reports, sweep_csv, ExperimentConfig};
use cad_icl::{Error, Result};

#[derive(Parser)]
#[command(name = "cad-icl", version, about = "Exemplar selection and evaluation for CAD code generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and tier an exemplar corpus.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Pick exemplars for one query.
    Select(SelectArgs),
    /// Run experiments and summarize their reports.
    #[command(subcommand)]
    Harness(HarnessCmd),
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// Read a JSON-lines corpus, drop duplicate specs, score complexity and
    /// write the corpus directory.
    Ingest {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cut a scored corpus into tiers and draw the per-tier test sets.
    Partition {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        test_per_tier: usize,
        #[arg(long, default_value = ".")]
        dir: PathBuf,
    },
}

#[derive(clap::Args)]
struct SelectArgs {
    #[arg(long, value_parser = parse_strategy)]
    strategy: Strategy,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    fill_to_k: bool,
    /// File holding the query specification.
    #[arg(long)]
    query_file: PathBuf,
    /// Corpus directory; its split's database is used when present.
    #[arg(long)]
    db: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated window sizes.
    #[arg(long, value_delimiter = ',')]
    granularities: Option<Vec<usize>>,
}

#[derive(Subcommand)]
enum HarnessCmd {
    /// Evaluate every test query once and write the report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One run per shot count, plus a summary CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5")]
        shots: Vec<usize>,
        /// Directory for `k<k>.json` reports and `sweep.csv`.
        #[arg(long, default_value = "sweep")]
        out: PathBuf,
    },
    /// Summarize every `*.json` report in a directory.
    Report {
        kind: ReportKind,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportKind {
    Correlation,
    Failures,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

fn parse_strategy(s: &str) -> std::result::Result<Strategy, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Serialize)]
struct SelectOutput {
    chosen: Vec<usize>,
    chosen_ids: Vec<String>,
    gains: Vec<u64>,
    tiling_ratio: f64,
}

fn json_line(value: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

fn corpus(cmd: CorpusCmd) -> Result<()> {
    match cmd {
        CorpusCmd::Ingest { input, out } => {
            let ingested = ingest_corpus(&input, CorpusFormat::JsonLines)?;
            let mut corpus = ingested.corpus;
            let unscored = score_corpus(&mut corpus, &OpsCounter::default())?;
            corpus.save_dir(&out)?;
            eprintln!(
                "kept {} exemplars, dropped {} duplicates, {} without a geometry count",
                corpus.len(),
                ingested.dropped,
                unscored.len()
            );
        }
        CorpusCmd::Partition { seed, test_per_tier, dir } => {
            let mut corpus = Corpus::load_dir(&dir)?;
            partition_tiers(&mut corpus)?;
            let split = split_test_set(&corpus, test_per_tier, seed)?;
            corpus.save_dir(&dir)?;
            split.save(&dir)?;
            eprintln!(
                "{} test queries, {} database exemplars",
                split.test.values().map(Vec::len).sum::<usize>(),
                split.database.len()
            );
        }
    }
    Ok(())
}

fn select(args: SelectArgs) -> Result<()> {
    let query = std::fs::read_to_string(&args.query_file)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.query_file.display())))?;
    let corpus = Corpus::load_dir(&args.db)?;
    let db = if args.db.join(SPLITS_FILE).exists() {
        corpus.subset(&Split::load(&args.db)?.database)?
    } else {
        corpus
    };
    let granularities = match args.granularities {
        Some(sizes) => Granularities::new(sizes)?,
        None => Granularities::default(),
    };
    let mut selector = Selector::new(&db, granularities)?;
    selector.fill_to_k = args.fill_to_k;
    let result = selector.select(args.strategy, query.trim(), args.k, args.seed)?;
    let out = SelectOutput {
        chosen_ids: result.chosen.iter().map(|&i| db.exemplars()[i].id.clone()).collect(),
        chosen: result.chosen,
        gains: result.gains,
        tiling_ratio: result.tiling_ratio,
    };
    write(&args.out, &json_line(&out)?)
}

fn harness_cmd(cmd: HarnessCmd) -> Result<()> {
    match cmd {
        HarnessCmd::Run { config, out } => {
            let report = harness::run_experiment(ExperimentConfig::load(&config)?)?;
            match out {
                Some(path) => report.save(&path)?,
                None => print!("{}", report.to_json()?),
            }
        }
        HarnessCmd::Sweep { config, shots, out } => {
            let reports = harness::sweep_shots(ExperimentConfig::load(&config)?, &shots)?;
            std::fs::create_dir_all(&out).map_err(|e| Error::Config(format!("cannot create {}: {e}", out.display())))?;
            for r in &reports {
                r.save(&out.join(format!("k{}.json", r.k)))?;
            }
            write(&out.join("sweep.csv"), &sweep_csv(&reports)?)?;
        }
        HarnessCmd::Report { kind, input, format } => {
            let reports = load_reports(&input)?;
            let text = match (kind, format) {
                (ReportKind::Correlation, Format::Csv) => {
                    let c = correlation_report(&reports);
                    let r = |v: Option<f64>| v.map_or("null".to_string(), |x| format!("{x:.4}"));
                    eprintln!("pearson r vs tiling ratio: vsr {} iou {} cd {} ecd {}", r(c.vsr), r(c.iou), r(c.cd), r(c.ecd));
                    c.scatter_csv()?
                }
                (ReportKind::Correlation, Format::Json) => json_line(&correlation_report(&reports))?,
                (ReportKind::Failures, Format::Csv) => failure_report(&reports).to_csv()?,
                (ReportKind::Failures, Format::Json) => json_line(&failure_report(&reports))?,
            };
            print!("{text}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Corpus(cmd) => corpus(cmd),
        Command::Select(args) => select(args),
        Command::Harness(cmd) => harness_cmd(cmd),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
