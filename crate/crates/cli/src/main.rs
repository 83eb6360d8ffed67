use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use antcf::eval::{
    self, evaluate_ranking, evaluate_rating, generate_drift, report, split, temporal_experiment,
    Algorithm, DriftConfig, ReportRow, SplitStrategy, TemporalConfig,
};
use antcf::io::{load_dataset, write_events_csv, DatasetDescriptor, DatasetFormat, TimestampUnit};
use antcf::{
    build_pattern_vectors, kmeans, load_model, save_model, train_stream, EntityId, Feedback,
    ModelParams, Recommender, Seeding,
};

#[derive(Parser)]
#[command(name = "ant-cf", version, about = "Incremental pheromone-based collaborative filtering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on a dataset and save a snapshot.
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_enum, default_value_t = Mode::Iacf)]
        mode: Mode,
        #[arg(long)]
        out_model: PathBuf,
        #[command(flatten)]
        params: ParamArgs,
    },
    /// Predict one rating from a saved explicit model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        user: String,
        #[arg(long)]
        item: String,
    },
    /// Rank items for a user from a saved model.
    Recommend {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        user: String,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long)]
        include_rated: bool,
    },
    /// RMSE on a holdout split.
    EvaluateRating {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "random:0.1:1")]
        split: SplitStrategy,
        #[arg(long, value_enum, default_value_t = EvalMode::Iacf)]
        mode: EvalMode,
        /// Independent runs; the split and clustering seeds advance by one per run.
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        output: ReportArgs,
    },
    /// Precision@N and ranking accumulation over repeated holdout splits.
    EvaluateRanking {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "random:0.1:1")]
        split: SplitStrategy,
        #[arg(long, value_enum, default_value_t = Mode::Iacf)]
        mode: Mode,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[arg(long, default_value_t = 5)]
        runs: usize,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        output: ReportArgs,
    },
    /// Time-ordered versus shuffled training, scored after each checkpoint.
    Temporal {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 15)]
        checkpoints: usize,
        #[arg(long, value_enum, default_value_t = Mode::Iacf)]
        mode: Mode,
        #[arg(long, default_value_t = 20)]
        n: usize,
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        output: ReportArgs,
    },
    /// Cluster users by rating pattern and write `user<TAB>cluster` lines.
    Cluster {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 20)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        max_iters: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic implicit stream with drifting preferences (csv-implicit).
    GenerateDrift {
        #[arg(long)]
        users: usize,
        #[arg(long)]
        items: usize,
        #[arg(long)]
        events_per_user: usize,
        #[arg(long)]
        drift_rate: f64,
        #[arg(long, default_value_t = 10)]
        groups: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Acf,
    Iacf,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalMode {
    Acf,
    Iacf,
    Baseline,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    MovielensDat,
    CsvExplicit,
    CsvImplicit,
}

#[derive(Clone, Copy, ValueEnum)]
enum Unit {
    Seconds,
    Milliseconds,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::MovielensDat)]
    format: Format,
    #[arg(long, default_value_t = ',')]
    delimiter: char,
    #[arg(long, value_enum, default_value_t = Unit::Seconds)]
    timestamp_unit: Unit,
}

impl DataArgs {
    fn feedback(&self) -> Feedback {
        match self.format {
            Format::CsvImplicit => Feedback::Implicit,
            _ => Feedback::Explicit,
        }
    }

    fn load(&self) -> Result<Vec<antcf::RatingEvent>> {
        if !self.delimiter.is_ascii() {
            bail!("delimiter must be a single ASCII character");
        }
        let descriptor = DatasetDescriptor {
            path: self.data.clone(),
            format: match self.format {
                Format::MovielensDat => DatasetFormat::MovielensDat,
                Format::CsvExplicit => DatasetFormat::CsvExplicit,
                Format::CsvImplicit => DatasetFormat::CsvImplicit,
            },
            delimiter: self.delimiter as u8,
            timestamp_unit: match self.timestamp_unit {
                Unit::Seconds => TimestampUnit::Seconds,
                Unit::Milliseconds => TimestampUnit::Milliseconds,
            },
        };
        load_dataset(&descriptor).with_context(|| format!("loading {}", self.data.display()))
    }
}

#[derive(Args)]
struct ParamArgs {
    #[arg(long, default_value_t = 0.2, allow_negative_numbers = true)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    lambda: f64,
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    sigma: f64,
    /// Cluster count for iacf.
    #[arg(long, default_value_t = 20)]
    clusters: usize,
    /// Seed for k-means.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    type_cap: Option<usize>,
    #[arg(long, default_value_t = 20)]
    neighbors: usize,
    #[arg(long)]
    signed_weighting: bool,
}

impl ParamArgs {
    fn params(&self, seeding: Seeding, top_n: usize) -> Result<ModelParams> {
        let p = ModelParams {
            gamma: self.gamma,
            lambda: self.lambda,
            sigma: self.sigma,
            seeding,
            neighborhood_size: self.neighbors,
            top_n,
            type_cap: self.type_cap,
            signed_weighting: self.signed_weighting,
            ..ModelParams::default()
        };
        p.validate()?;
        Ok(p)
    }

    fn algorithm(&self, mode: EvalMode) -> Algorithm {
        match mode {
            EvalMode::Acf => Algorithm::Acf,
            EvalMode::Iacf => Algorithm::Iacf {
                clusters: self.clusters,
                seed: self.seed,
            },
            EvalMode::Baseline => Algorithm::Baseline,
        }
    }

    fn seeding(&self, mode: EvalMode) -> Seeding {
        match mode {
            EvalMode::Iacf => Seeding::Clustered {
                clusters: self.clusters,
            },
            _ => Seeding::Unique,
        }
    }
}

fn eval_mode(m: Mode) -> EvalMode {
    match m {
        Mode::Acf => EvalMode::Acf,
        Mode::Iacf => EvalMode::Iacf,
    }
}

#[derive(Args)]
struct ReportArgs {
    /// Also write `metric,value,run,checkpoint` rows to this CSV file.
    #[arg(long)]
    report: Option<PathBuf>,
}

impl ReportArgs {
    fn write(&self, rows: &[ReportRow]) -> Result<()> {
        if let Some(path) = &self.report {
            let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
            eval::write_csv(rows, f)?;
        }
        Ok(())
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn run(cli: Cli) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Train {
            data,
            mode,
            out_model,
            params,
        } => {
            let mode = eval_mode(mode);
            let p = params.params(params.seeding(mode), 20)?;
            let events = data.load()?;
            let alg = params.algorithm(mode);
            let mut model = eval::init_model(&alg, &events, &p, data.feedback())?;
            let report = train_stream(&mut model, &events)?;
            save_model(&model, &out_model)?;
            writeln!(out, "{report}")?;
        }
        Command::Predict { model, user, item } => {
            let model = load_model(&model)?;
            let value = Recommender::scanning(&model)
                .predict_rating(&EntityId::new(user), &EntityId::new(item))?;
            writeln!(out, "{value}")?;
        }
        Command::Recommend {
            model,
            user,
            n,
            include_rated,
        } => {
            if n == 0 {
                bail!("--n must be >= 1");
            }
            let model = load_model(&model)?;
            let list = Recommender::new(&model).rank_items(&EntityId::new(user), n, !include_rated);
            for (rank, (item, s)) in list.entries.iter().enumerate() {
                writeln!(out, "{}\t{item}\t{s}", rank + 1)?;
            }
        }
        Command::EvaluateRating {
            data,
            split: strategy,
            mode,
            runs,
            params,
            output,
        } => {
            if runs == 0 {
                bail!("--runs must be >= 1");
            }
            let p = params.params(params.seeding(mode), 20)?;
            let events = data.load()?;
            let mut reports = Vec::with_capacity(runs);
            for r in 0..runs as u64 {
                let s = split(&events, &strategy.reseeded(r))?;
                let rep = evaluate_rating(&params.algorithm(mode).reseeded(r), &s, &p)?;
                eprintln!(
                    "run {}: train {:.2}s, predict {:.2}s",
                    r + 1,
                    rep.train_seconds,
                    rep.predict_seconds
                );
                reports.push(rep);
            }
            write!(out, "{}", report::rating_summary(&reports))?;
            output.write(&report::rating_rows(&reports))?;
        }
        Command::EvaluateRanking {
            data,
            split: strategy,
            mode,
            n,
            runs,
            params,
            output,
        } => {
            let mode = eval_mode(mode);
            let p = params.params(params.seeding(mode), n)?;
            let events = data.load()?;
            let rep = evaluate_ranking(&params.algorithm(mode), &events, &strategy, &p, runs)?;
            write!(out, "{}", report::ranking_summary(&rep))?;
            output.write(&report::ranking_rows(&rep))?;
        }
        Command::Temporal {
            data,
            checkpoints,
            mode,
            n,
            params,
            output,
        } => {
            let mode = eval_mode(mode);
            let config = TemporalConfig {
                checkpoints,
                algorithm: params.algorithm(mode),
                params: params.params(params.seeding(mode), n)?,
                shuffle_seed: params.seed,
            };
            let rep = temporal_experiment(&data.load()?, &config)?;
            write!(out, "{}", report::temporal_summary(&rep))?;
            output.write(&report::temporal_rows(&rep, None))?;
        }
        Command::Cluster {
            data,
            k,
            seed,
            max_iters,
            out: path,
        } => {
            let patterns = build_pattern_vectors(&data.load()?);
            let clustering = kmeans(&patterns, k, max_iters, seed)?;
            let mut w = create(&path)?;
            clustering.write_assignments(&mut w)?;
            w.flush()?;
            writeln!(out, "users={}", patterns.len())?;
            writeln!(out, "k={}", clustering.k())?;
            writeln!(out, "iterations={}", clustering.inertia_history().len())?;
            writeln!(out, "inertia={}", clustering.inertia())?;
        }
        Command::GenerateDrift {
            users,
            items,
            events_per_user,
            drift_rate,
            groups,
            seed,
            out: path,
        } => {
            let config = DriftConfig {
                groups,
                ..DriftConfig::new(users, items, events_per_user, drift_rate, seed)
            };
            let drift = generate_drift(&config)?;
            let mut w = create(&path)?;
            write_events_csv(&drift.events, &mut w)?;
            w.flush()?;
            writeln!(out, "events={}", drift.events.len())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
