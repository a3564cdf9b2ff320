use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pcqkit::evaluation::{evaluate, ScoreTable};
use pcqkit::features::{extract_features, load_manifest, FeatureTable};
use pcqkit::ply::load_ply_with_bit_depth;
use pcqkit::regression::FusionModel;
use pcqkit::workflow::{cross_validate, pair_metrics, predict_table, rank_features, MetricKind};
use pcqkit::{Config, Error};

/// Full-reference point cloud quality metrics and metric fusion.
#[derive(Parser, Debug)]
#[command(name = "pcqkit", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML configuration file (defaults to $PCQKIT_CONFIG, then built-in defaults).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice (fold assignment, permutations).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for extraction.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Geometry bit depth; inferred from coordinates when absent.
    #[arg(long, global = true)]
    bitdepth: Option<u32>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print statistics of one cloud.
    Info {
        #[arg(long = "ref")]
        reference: PathBuf,
    },
    /// Run metrics on one reference/distorted pair and print JSON.
    Metric {
        #[arg(long = "ref")]
        reference: PathBuf,
        #[arg(long)]
        dist: PathBuf,
        /// Comma-separated: all, d1, d2, yuv, pointssim, pcqm, graphsim.
        #[arg(long, default_value = "all")]
        metric: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extract the feature table of every manifest row.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory of per-pair cached feature vectors.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Fit a registry model (model1..model8, fsm) on a feature table.
    Train {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value = "fsm")]
        model: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank features by recursive feature elimination.
    Rfe {
        #[arg(long)]
        features: PathBuf,
        /// Comma-separated feature columns; all columns when absent.
        #[arg(long)]
        metric: Option<String>,
        /// Importance estimator: ridge or svr.
        #[arg(long, default_value = "ridge")]
        estimator: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a feature table with a trained model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Accept features extracted with different settings.
        #[arg(long)]
        force: bool,
    },
    /// Evaluate score columns against the manifest MOS.
    Evaluate {
        /// Scores or feature CSV keyed by ref and dist.
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated columns; every score column when absent.
        #[arg(long)]
        metric: Option<String>,
        /// Report JSON; the text table always goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Group k-fold cross-validation of a registry model.
    Crossval {
        #[arg(long)]
        features: PathBuf,
        #[arg(long, default_value = "fsm")]
        model: String,
        #[arg(long, default_value_t = 10)]
        folds: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the effective configuration as TOML.
    Config,
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::UnknownModel(_) | Error::UnknownFeatureName(_) => Failure::Usage(e.to_string()),
            e => Failure::Data(e),
        }
    }
}

type CliResult = Result<(), Failure>;

fn write_output(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Error::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| Error::Io {
                    path: "<stdout>".into(),
                    source: e,
                })
        }
    }
}

fn column_list(text: Option<&str>) -> Vec<String> {
    text.map(|t| t.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
        .unwrap_or_default()
}

fn effective_config(common: &Common) -> Result<Config, Error> {
    let mut config = Config::resolve(common.config.as_deref())?;
    if let Some(s) = common.seed {
        config.seed = s;
    }
    if common.jobs.is_some() {
        config.jobs = common.jobs;
    }
    if common.bitdepth.is_some() {
        config.bit_depth = common.bitdepth;
    }
    Ok(config)
}

fn execute(cli: Cli) -> CliResult {
    let config = effective_config(&cli.common)?;
    match cli.command {
        Command::Info { reference } => {
            let cloud = load_ply_with_bit_depth(&reference, config.bit_depth)?;
            let bbox = cloud.bounding_box();
            let info = serde_json::json!({
                "path": reference.display().to_string(),
                "points": cloud.len(),
                "colors": cloud.colors().is_some(),
                "normals": cloud.normals().is_some(),
                "bit_depth": cloud.bit_depth(),
                "voxelized": cloud.is_within_voxel_grid(),
                "bounding_box": bbox,
                "diagonal": bbox.diagonal(),
            });
            write_output(None, &format!("{}\n", serde_json::to_string_pretty(&info).map_err(Error::from)?))?;
        }
        Command::Metric { reference, dist, metric, out } => {
            let kinds = MetricKind::parse_list(&metric)?;
            let value = pair_metrics(&reference, &dist, &kinds, &config)?;
            let text = serde_json::to_string_pretty(&value).map_err(Error::from)?;
            write_output(out.as_deref(), &format!("{text}\n"))?;
        }
        Command::Extract { manifest, out, cache } => {
            let manifest = load_manifest(&manifest)?;
            manifest.check_paths()?;
            let (table, stats) = extract_features(&manifest, &config, cache.as_deref())?;
            log::info!("{} pairs computed, {} from cache", stats.computed, stats.cache_hits);
            let mut buf = Vec::new();
            table.write_csv(&mut buf)?;
            write_output(out.as_deref(), &String::from_utf8_lossy(&buf))?;
        }
        Command::Train { features, model, out } => {
            let table = FeatureTable::load(&features)?;
            let fitted = FusionModel::fit_named(&model, &table, &config)?;
            for name in &fitted.training.constant_features {
                log::warn!("feature {name} is constant in the training data");
            }
            write_output(out.as_deref(), &format!("{}\n", fitted.to_json()))?;
        }
        Command::Rfe { features, metric, estimator, out } => {
            let use_svr = match estimator.as_str() {
                "ridge" => false,
                "svr" => true,
                other => return Err(Failure::Usage(format!("unknown estimator `{other}` (expected ridge or svr)"))),
            };
            let table = FeatureTable::load(&features)?;
            let ranking = rank_features(&table, &column_list(metric.as_deref()), use_svr, &config)?;
            let text = serde_json::to_string_pretty(&ranking).map_err(Error::from)?;
            write_output(out.as_deref(), &format!("{text}\n"))?;
        }
        Command::Predict { model, features, out, force } => {
            let fitted = FusionModel::load(&model)?;
            let table = FeatureTable::load(&features)?;
            let scores = predict_table(&fitted, &table, &config, force)?;
            let comment = format!(
                "pcqkit-scores model={} model_config_hash={} extraction_hash={}",
                fitted.name,
                fitted.training.config_hash,
                if table.extraction_hash.is_empty() { "-" } else { &table.extraction_hash }
            );
            let mut buf = Vec::new();
            scores.write_csv(&comment, &mut buf)?;
            write_output(out.as_deref(), &String::from_utf8_lossy(&buf))?;
        }
        Command::Evaluate { features, manifest, metric, out } => {
            let scores = ScoreTable::load(&features)?;
            let manifest = load_manifest(&manifest)?;
            let columns = column_list(metric.as_deref());
            let selected = (!columns.is_empty()).then_some(columns.as_slice());
            let mut report = evaluate(&scores, &manifest, selected, &config.evaluation)?;
            report.config_hash = config.hash();
            if let Some(p) = out.as_deref() {
                report.save(p)?;
            }
            write_output(None, &report.text_table())?;
        }
        Command::Crossval { features, model, folds, out } => {
            let table = FeatureTable::load(&features)?;
            let report = cross_validate(&table, &model, folds, &config)?;
            if let Some(p) = out.as_deref() {
                write_output(Some(p), &format!("{}\n", report.to_json()))?;
            }
            write_output(None, &report.text_table())?;
        }
        Command::Config => write_output(None, &config.to_toml())?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
