//! The `reentry` command line.
//!
//! Every command reads explicit input paths, writes its outputs atomically
//! and records a [`RunManifest`]. Exit codes: 0 success, 2 input error,
//! 3 numerical failure, 4 configuration error.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use reentry_core::eval::{evaluate, CaseSpec};
use reentry_core::features::{assemble_tensor, FeatureConfig, FeatureTensor, FitOptions, Role};
use reentry_core::hypersearch::{AshaConfig, SearchSpace, TrainingObjective};
use reentry_core::pipeline::{prepare_tracks, FitFailure, FitMode, PrepareConfig};
use reentry_core::synthetic::{generate_tracks, SyntheticSpec};
use reentry_core::time::format_epoch;
use reentry_core::tle::{prune, split_dataset, ObjectTrack, PruneConfig, PruneReport, Rejection, SelectionCriteria, SplitSummary};
use reentry_core::train::{predict_object, train, TrainConfig, TrainReport};
use serde::{Deserialize, Serialize};

use crate::checkpoint::Checkpoint;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::io;
use crate::manifest::{now_utc, RunManifest, MANIFEST_FILE};
use crate::report::{loss_curve_csv, metrics_csv, plot_csv, EvalReport};
use crate::tune::{ledger_jsonl, run_parallel, TuneSummary};

pub const TENSOR_SCHEMA: &str = "reentry.tensor/1";
pub const TRACKS_SCHEMA: &str = "reentry.tracks/1";

#[derive(Debug, Parser)]
#[command(name = "reentry", version, about = "Re-entry epoch prediction from TLE decay histories")]
pub struct Cli {
    /// Flat `key = value` config file (see the README for keys).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed for every random choice. The SEED environment variable overrides it.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Where to write the run manifest (defaults next to the outputs).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitAnchor {
    /// Anchor the 80 km crossing on the TIP re-entry epoch.
    Tip,
    /// Anchor it on the last TLE epoch.
    LastTle,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic catalogue with ground truth.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        objects: Option<usize>,
        #[arg(long)]
        outlier_rate: Option<f64>,
        /// First catalogue number.
        #[arg(long)]
        first_id: Option<u32>,
    },
    /// Remove corrections and outliers from OMM records.
    Prune {
        /// OMM records, CSV or JSON array.
        #[arg(long)]
        omm: PathBuf,
        #[arg(long)]
        tip: PathBuf,
        /// Pruned tracks (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Per-step removal counts (JSON).
        #[arg(long)]
        report: PathBuf,
    },
    /// Select objects, fit decay curves and build the feature tensor.
    Prepare {
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        space_weather: PathBuf,
        #[arg(long)]
        metadata: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Grid trajectories CSV.
        #[arg(long)]
        trajectories: PathBuf,
        /// Objects held out for testing.
        #[arg(long, value_delimiter = ',')]
        test_ids: Vec<u32>,
        /// Put every non-test object in the training set.
        #[arg(long)]
        no_validation: bool,
        #[arg(long, value_enum, default_value_t = FitAnchor::Tip)]
        fit_anchor: FitAnchor,
    },
    /// Train one model.
    Train {
        #[arg(long)]
        tensor: PathBuf,
        /// Run directory, conventionally runs/<run-id>.
        #[arg(long)]
        out_dir: PathBuf,
        /// A, B, C or D: sets the input length and epoch count.
        #[arg(long)]
        case: Option<String>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Asynchronous successive-halving hyperparameter search.
    Tune {
        #[arg(long)]
        tensor: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        case: Option<String>,
        #[arg(long)]
        trials: Option<usize>,
        /// Concurrent trials. Only a single job gives a reproducible ledger.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        grace: Option<usize>,
        #[arg(long)]
        max_epochs: Option<usize>,
        #[arg(long)]
        eta: Option<usize>,
    },
    /// Print the predicted re-entry epoch of one object.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        tensor: PathBuf,
        #[arg(long)]
        norad: u32,
    },
    /// Evaluate a checkpoint on the test objects.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        tensor: PathBuf,
        #[arg(long)]
        case: String,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Re-run the command recorded in a manifest.
    Replay {
        manifest: PathBuf,
    },
}

/// Pruned tracks plus what happened to each object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracksFile {
    pub schema: String,
    pub tracks: Vec<ObjectTrack>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectPruneReport {
    pub norad_id: u32,
    pub records_in: usize,
    pub records_out: usize,
    pub removed: PruneReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneSummary {
    pub total: PruneReport,
    pub objects: Vec<ObjectPruneReport>,
    /// Objects skipped because they have no TIP entry.
    pub missing_tip: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorFile {
    pub schema: String,
    /// [objects, steps, features].
    pub shape: [usize; 3],
    pub split_seed: u64,
    pub feature_config: FeatureConfig,
    pub imputed_area_to_mass: Vec<u32>,
    pub rejected: Vec<Rejection>,
    pub fit_failures: Vec<FitFailure>,
    pub train_summary: SplitSummary,
    pub validation_summary: Option<SplitSummary>,
    pub tensor: FeatureTensor,
}

impl TensorFile {
    pub fn load(path: &Path) -> Result<Self> {
        let f: TensorFile = io::read_json(path)?;
        if f.schema != TENSOR_SCHEMA {
            return Err(Error::input(format!("{}: unsupported schema {}", path.display(), f.schema)));
        }
        let t = &f.tensor;
        let n = t.n_objects * t.steps * t.n_features;
        if f.shape != [t.n_objects, t.steps, t.n_features] || t.data.len() != n || t.norad_ids.len() != t.n_objects {
            return Err(Error::input(format!("{}: tensor shape is inconsistent", path.display())));
        }
        Ok(f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub norad_id: u32,
    pub reentry_epoch: String,
    /// Predicted time from the last input point to re-entry.
    pub residual_hours: f64,
    pub actual_epoch: String,
    pub error_hours: f64,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Errors go to stderr, results to `out`.
pub fn main_with_args(args: &[String], out: &mut dyn Write) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli, args, out, true) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn effective_seed(flag: u64, allow_env: bool) -> Result<u64> {
    match std::env::var("SEED") {
        Ok(s) if allow_env => s.trim().parse().map_err(|_| Error::config(format!("SEED=`{s}` is not an unsigned integer"))),
        _ => Ok(flag),
    }
}

fn case_or_default(name: Option<&str>) -> Result<Option<CaseSpec>> {
    name.map(CaseSpec::by_name).transpose().map_err(Error::from)
}

fn train_config(cfg: &Config, seed: u64, case: Option<&CaseSpec>, epochs: Option<usize>) -> Result<TrainConfig> {
    let mut t = cfg.train(TrainConfig::default())?;
    if let Some(c) = case {
        t.input_steps = c.input_steps;
        t.epochs = c.epochs;
    }
    if let Some(e) = epochs {
        t.epochs = e;
    }
    t.seed = seed;
    t.validate()?;
    Ok(t)
}

fn check_stats(ck: &Checkpoint, tensor: &FeatureTensor) -> Result<()> {
    if ck.norm_stats != tensor.norm_stats || ck.model_config.input_size != tensor.n_features {
        return Err(Error::input("tensor normalization or feature count differs from the checkpoint"));
    }
    Ok(())
}

pub fn run(cli: Cli, argv: &[String], out: &mut dyn Write, allow_env_seed: bool) -> Result<()> {
    let started = now_utc();
    let seed = effective_seed(cli.seed, allow_env_seed)?;
    let cfg = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    let mut inputs: Vec<PathBuf> = cfg.sources.clone();
    let mut outputs: Vec<PathBuf> = Vec::new();
    let say = |out: &mut dyn Write, msg: String| writeln!(out, "{msg}").map_err(|e| Error::io(Path::new("<stdout>"), e));

    let (name, manifest_path): (&str, Option<PathBuf>) = match &cli.command {
        Command::Synth { out_dir, objects, outlier_rate, first_id } => {
            let mut spec = cfg.apply("synth", SyntheticSpec::default())?;
            spec.seed = seed;
            if let Some(n) = objects {
                spec.n_objects = *n;
            }
            if let Some(r) = outlier_rate {
                spec.outlier_rate = *r;
            }
            if let Some(id) = first_id {
                spec.first_norad_id = *id;
            }
            let ds = generate_tracks(&spec).map_err(Error::config)?;
            let records: Vec<_> = ds.tracks.iter().flat_map(|t| t.records.iter().copied()).collect();
            let meta: BTreeMap<u32, f64> = ds.truth.iter().map(|t| (t.norad_id, t.area_to_mass)).collect();
            let files = [
                ("omm.csv", io::omm_csv(&records)?),
                ("tip.csv", io::tip_csv(&io::tip_from_tracks(&ds.tracks))?),
                ("space_weather.csv", io::space_weather_csv(&ds.space_weather)?),
                ("metadata.csv", io::metadata_csv(&meta)?),
                ("truth.csv", io::truth_csv(&ds.truth)?),
                ("outliers.csv", io::outliers_csv(&ds.outliers)?),
            ];
            for (file, text) in files {
                let p = out_dir.join(file);
                io::write_atomic(&p, text.as_bytes())?;
                outputs.push(p);
            }
            say(out, format!("synthesized {} objects, {} records, {} outliers", ds.tracks.len(), records.len(), ds.outliers.len()))?;
            ("synth", Some(out_dir.join(MANIFEST_FILE)))
        }

        Command::Prune { omm, tip, out: out_path, report } => {
            inputs.extend([omm.clone(), tip.clone()]);
            let pcfg = cfg.apply("prune", PruneConfig::default())?;
            pcfg.validate().map_err(Error::config)?;
            let records = io::read_omm(omm)?;
            let tips = io::parse_tip_csv(&io::read_text(tip)?).map_err(|e| Error::input(format!("{}: {e}", tip.display())))?;
            let (tracks, missing_tip) = io::assemble_tracks(records, &tips);
            for id in &missing_tip {
                eprintln!("warning: object {id} has no TIP entry; skipped");
            }
            let mut total = PruneReport::default();
            let mut objects = Vec::new();
            let mut pruned = Vec::new();
            for track in tracks {
                let records_in = track.records.len();
                let (t, r) = prune(track, &pcfg);
                total.accumulate(&r);
                objects.push(ObjectPruneReport { norad_id: t.norad_id, records_in, records_out: t.records.len(), removed: r });
                pruned.push(t);
            }
            io::write_json(out_path, &TracksFile { schema: TRACKS_SCHEMA.into(), tracks: pruned })?;
            io::write_json(report, &PruneSummary { total, objects, missing_tip })?;
            outputs.extend([out_path.clone(), report.clone()]);
            say(out, format!("removed {} records", total.removed()))?;
            ("prune", Some(sibling_manifest(out_path)))
        }

        Command::Prepare { tracks, space_weather, metadata, out: out_path, trajectories, test_ids, no_validation, fit_anchor } => {
            inputs.extend([tracks.clone(), space_weather.clone(), metadata.clone()]);
            let prep = PrepareConfig {
                prune: cfg.apply("prune", PruneConfig::default())?,
                selection: cfg.apply("select", SelectionCriteria::default())?,
                fit: cfg.apply("fit", FitOptions::default())?,
                fit_mode: match fit_anchor {
                    FitAnchor::Tip => FitMode::Tip,
                    FitAnchor::LastTle => FitMode::LastTle,
                },
            };
            prep.prune.validate().map_err(Error::config)?;
            prep.selection.validate().map_err(Error::config)?;
            let fcfg = cfg.apply("feature", FeatureConfig::default())?;
            let raw: TracksFile = io::read_json(tracks)?;
            if raw.schema != TRACKS_SCHEMA {
                return Err(Error::input(format!("{}: unsupported schema {}", tracks.display(), raw.schema)));
            }
            let sw = io::parse_space_weather_csv(&io::read_text(space_weather)?)?;
            let a2m = io::parse_metadata_csv(&io::read_text(metadata)?)?;
            let prepared = prepare_tracks(raw.tracks, &prep);
            for r in &prepared.rejected {
                eprintln!("warning: object {} rejected ({})", r.norad_id, r.reason);
            }
            for f in &prepared.fit_failures {
                eprintln!("warning: object {} dropped, curve fit failed: {}", f.norad_id, f.reason);
            }
            let test: BTreeSet<u32> = test_ids.iter().copied().collect();
            let pool: Vec<u32> = prepared.tracks.iter().map(|t| t.norad_id).filter(|id| !test.contains(id)).collect();
            let (train_ids, val_ids): (BTreeSet<u32>, BTreeSet<u32>) = if *no_validation {
                (pool.into_iter().collect(), BTreeSet::new())
            } else {
                let split = split_dataset(pool, seed).map_err(Error::input)?;
                (split.train.into_iter().collect(), split.validation.into_iter().collect())
            };
            let roles: Vec<Role> = prepared
                .trajectories
                .iter()
                .map(|t| match t.norad_id {
                    id if test.contains(&id) => Role::Test,
                    id if val_ids.contains(&id) => Role::Validation,
                    _ => Role::Train,
                })
                .collect();
            let assembled = assemble_tensor(&prepared.trajectories, &roles, &prepared.tracks, &sw, &a2m, &fcfg)
                .map_err(Error::input)?;
            for id in &assembled.imputed_area_to_mass {
                eprintln!("warning: object {id} has no area-to-mass entry; imputed the training median");
            }
            let of = |ids: &BTreeSet<u32>| -> Vec<ObjectTrack> {
                prepared.tracks.iter().filter(|t| ids.contains(&t.norad_id)).cloned().collect()
            };
            let t = assembled.tensor;
            let file = TensorFile {
                schema: TENSOR_SCHEMA.into(),
                shape: [t.n_objects, t.steps, t.n_features],
                split_seed: seed,
                feature_config: fcfg,
                imputed_area_to_mass: assembled.imputed_area_to_mass,
                rejected: prepared.rejected,
                fit_failures: prepared.fit_failures,
                train_summary: SplitSummary::of(&of(&train_ids)),
                validation_summary: (!val_ids.is_empty()).then(|| SplitSummary::of(&of(&val_ids))),
                tensor: t,
            };
            io::write_json(out_path, &file)?;
            io::write_atomic(trajectories, io::trajectories_csv(&prepared.trajectories)?.as_bytes())?;
            outputs.extend([out_path.clone(), trajectories.clone()]);
            say(out, format!("tensor shape [{} x {} x {}]", file.shape[0], file.shape[1], file.shape[2]))?;
            ("prepare", Some(sibling_manifest(out_path)))
        }

        Command::Train { tensor, out_dir, case, epochs } => {
            inputs.push(tensor.clone());
            let file = TensorFile::load(tensor)?;
            let case = case_or_default(case.as_deref())?;
            let tcfg = train_config(&cfg, seed, case.as_ref(), *epochs)?;
            let outcome = train(&file.tensor, tcfg)?;
            let t = &file.tensor;
            let best = Checkpoint::new(&outcome.best_model, tcfg, outcome.report.best_epoch, t.feature_names.clone(), t.norm_stats.clone(), None);
            let last = Checkpoint::new(&outcome.final_model, tcfg, Some(tcfg.epochs), t.feature_names.clone(), t.norm_stats.clone(), Some(&outcome.optimizer));
            let paths = [out_dir.join("best.ckpt.json"), out_dir.join("last.ckpt.json"), out_dir.join("loss.csv"), out_dir.join("report.json")];
            best.save(&paths[0])?;
            last.save(&paths[1])?;
            io::write_atomic(&paths[2], loss_curve_csv(&outcome.report)?.as_bytes())?;
            io::write_json(&paths[3], &TrainReport { wall_time_secs: None, ..outcome.report.clone() })?;
            outputs.extend(paths);
            let r = &outcome.report;
            say(
                out,
                format!(
                    "best epoch {} val loss {:.6e} day^2",
                    r.best_epoch.unwrap_or(0),
                    r.to_days_squared(r.best_val_loss)
                ),
            )?;
            ("train", Some(out_dir.join(MANIFEST_FILE)))
        }

        Command::Tune { tensor, out_dir, case, trials, jobs, grace, max_epochs, eta } => {
            inputs.push(tensor.clone());
            let file = TensorFile::load(tensor)?;
            let case = case_or_default(case.as_deref())?;
            let base = train_config(&cfg, seed, case.as_ref(), None)?;
            let mut asha = cfg.apply("asha", AshaConfig::default())?;
            if let Some(n) = trials {
                asha.num_trials = *n;
            }
            if let Some(g) = grace {
                asha.grace_period = *g;
            }
            if let Some(m) = max_epochs {
                asha.max_epochs = *m;
            }
            if let Some(e) = eta {
                asha.reduction_factor = *e;
            }
            let space = cfg.apply("space", SearchSpace::default())?;
            let objective = TrainingObjective { tensor: &file.tensor, base };
            let outcome = run_parallel(&space, asha, &objective, seed, *jobs)?;
            let ledger = out_dir.join("ledger.jsonl");
            let summary = out_dir.join("summary.json");
            io::write_atomic(&ledger, ledger_jsonl(&outcome.ledger)?.as_bytes())?;
            let s = TuneSummary::of(&outcome);
            io::write_json(&summary, &s)?;
            outputs.extend([ledger, summary]);
            say(out, format!("best trial {} val loss {:.6e}", s.trial, s.val_loss))?;
            ("tune", Some(out_dir.join(MANIFEST_FILE)))
        }

        Command::Predict { checkpoint, tensor, norad } => {
            inputs.extend([checkpoint.clone(), tensor.clone()]);
            let ck = Checkpoint::load(checkpoint)?;
            let file = TensorFile::load(tensor)?;
            let t = &file.tensor;
            check_stats(&ck, t)?;
            let i = t.index_of(*norad).ok_or_else(|| Error::input(format!("object {norad} is not in the tensor")))?;
            let model = ck.model()?;
            let pred = predict_object(&model, t, i)?;
            let tx = model.config.input_steps;
            let row = t.target_row(i);
            let t_pred = *pred.last().ok_or_else(|| Error::input("model has no output steps"))?;
            let t_actual = row[row.len() - 1];
            let p = Prediction {
                norad_id: *norad,
                reentry_epoch: format_epoch(t.origin_epochs[i] + t_pred),
                residual_hours: (t_pred - row[tx - 1]) * 24.0,
                actual_epoch: format_epoch(t.origin_epochs[i] + t_actual),
                error_hours: (t_pred - t_actual) * 24.0,
            };
            say(out, serde_json::to_string(&p)?)?;
            ("predict", cli.manifest.clone())
        }

        Command::Eval { checkpoint, tensor, case, out_dir } => {
            inputs.extend([checkpoint.clone(), tensor.clone()]);
            let ck = Checkpoint::load(checkpoint)?;
            let file = TensorFile::load(tensor)?;
            check_stats(&ck, &file.tensor)?;
            let case = CaseSpec::by_name(case)?;
            if ck.model_config.input_steps != case.input_steps {
                return Err(Error::config(format!(
                    "case {} uses Tx = {}, the checkpoint was trained with Tx = {}",
                    case.name, case.input_steps, ck.model_config.input_steps
                )));
            }
            let rows = evaluate(&ck.model()?, &file.tensor, &case)?;
            let paths = [out_dir.join("metrics.csv"), out_dir.join("report.json"), out_dir.join("plot.csv")];
            io::write_atomic(&paths[0], metrics_csv(&case.name, &rows)?.as_bytes())?;
            io::write_atomic(&paths[2], plot_csv(&case.name, case.input_steps, &rows)?.as_bytes())?;
            let report = EvalReport::new(case, rows);
            io::write_json(&paths[1], &report)?;
            outputs.extend(paths);
            match report.overall {
                Some(s) => say(
                    out,
                    format!(
                        "case {}: {} objects, median eps_abs {:.3} h, median eps_rel {:.3} %",
                        report.case.name, s.objects, s.median_eps_abs_hours, s.median_eps_rel_percent
                    ),
                )?,
                None => say(out, format!("case {}: no test objects", report.case.name))?,
            }
            ("eval", Some(out_dir.join(MANIFEST_FILE)))
        }

        Command::Replay { manifest } => {
            let m: RunManifest = io::read_json(manifest)?;
            for p in m.changed_inputs()? {
                eprintln!("warning: input {} changed since the recorded run", p.display());
            }
            let mut args = m.argv.clone();
            args.push("--seed".into());
            args.push(m.seed.to_string());
            let replayed = Cli::try_parse_from(&args).map_err(|e| Error::config(format!("recorded arguments: {e}")))?;
            return run(replayed, &args, out, false);
        }
    };

    let path = cli.manifest.clone().or(manifest_path);
    if let Some(path) = path {
        let mut m = RunManifest::start(name, argv, cfg.hash(), seed, &inputs)?;
        m.started_utc = started;
        m.finish(&outputs, &path)?;
    }
    Ok(())
}

/// `dir/name.json` → `dir/name.manifest.json`.
fn sibling_manifest(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.manifest.json"))
}
