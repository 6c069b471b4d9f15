use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use reentry::checkpoint::Checkpoint;
use reentry::cli::{main_with_args, Prediction, PruneSummary, TensorFile};
use reentry::io::{parse_metadata_csv, read_json};
use reentry::manifest::RunManifest;
use reentry_core::features::Role;
use reentry_core::math::median;
use reentry_core::nn::Seq2SeqModel;

fn run<S: AsRef<str>>(args: &[S]) -> (i32, String) {
    let mut argv = vec!["reentry".to_string()];
    argv.extend(args.iter().map(|s| s.as_ref().to_string()));
    let mut out = Vec::new();
    let code = main_with_args(&argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL: &str = "hidden_size = 4\nnum_layers = 1\nbatch_size = 4\nepochs = 3\n";

struct Workspace {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        fs::write(root.join("small.cfg"), SMALL).unwrap();
        Self { _dir: dir, root }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn synth(&self, objects: usize, outlier_rate: f64) {
        self.synth_with(objects, outlier_rate, &[]);
    }

    fn synth_with(&self, objects: usize, outlier_rate: f64, pre: &[&str]) {
        let mut args = pre.to_vec();
        let (dir, n, rate) = (self.path("data"), objects.to_string(), outlier_rate.to_string());
        args.extend(["synth", "--out-dir", p(&dir), "--objects", &n, "--outlier-rate", &rate]);
        assert_eq!(run(&args).0, 0);
    }

    fn prune(&self) -> PruneSummary {
        let (code, _) = run(&[
            "prune",
            "--omm",
            p(&self.path("data/omm.csv")),
            "--tip",
            p(&self.path("data/tip.csv")),
            "--out",
            p(&self.path("tracks.json")),
            "--report",
            p(&self.path("prune.json")),
        ]);
        assert_eq!(code, 0);
        read_json(&self.path("prune.json")).unwrap()
    }

    fn prepare(&self, extra: &[&str]) -> i32 {
        let paths = ["tracks.json", "data/space_weather.csv", "data/metadata.csv", "tensor.json", "traj.csv"]
            .map(|f| self.path(f).to_str().unwrap().to_string());
        let mut args: Vec<&str> = vec!["prepare", "--tracks", &paths[0], "--space-weather", &paths[1]];
        args.extend(["--metadata", &paths[2], "--out", &paths[3], "--trajectories", &paths[4]]);
        args.extend(extra);
        run(&args).0
    }
}

fn csv_rows(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count() - 1
}

#[test]
fn clean_catalogue_has_no_removals() {
    let ws = Workspace::new();
    ws.synth(4, 0.0);
    let report = ws.prune();
    assert_eq!(report.total.removed(), 0);
    assert!(report.missing_tip.is_empty());
    assert_eq!(report.objects.len(), 4);
}

#[test]
fn removal_counts_match_injected_outliers() {
    let ws = Workspace::new();
    let quiet = ws.path("quiet.cfg");
    fs::write(&quiet, "synth.mean_motion_noise = 0\nsynth.eccentricity_noise = 0\nsynth.inclination_noise = 0\n").unwrap();
    ws.synth_with(12, 0.05, &["--config", p(&quiet)]);
    let labels = csv_rows(&ws.path("data/outliers.csv"));
    assert!(labels > 10, "too few injected outliers: {labels}");
    let report = ws.prune();
    assert_eq!(report.total.removed(), labels, "{:?}", report.total);
    let removed_per_object: usize = report.objects.iter().map(|o| o.records_in - o.records_out).sum();
    assert_eq!(removed_per_object, labels);
}

#[test]
fn missing_tip_is_skipped_with_exit_zero() {
    let ws = Workspace::new();
    ws.synth(3, 0.0);
    let tip = fs::read_to_string(ws.path("data/tip.csv")).unwrap();
    let kept: Vec<&str> = tip.lines().take(3).collect();
    fs::write(ws.path("data/tip.csv"), kept.join("\n") + "\n").unwrap();
    let report = ws.prune();
    assert_eq!(report.objects.len(), 2);
    assert_eq!(report.missing_tip, vec![90_002]);
}

#[test]
fn prepare_shape_digest_and_imputation() {
    let ws = Workspace::new();
    ws.synth(5, 0.0);
    ws.prune();
    assert_eq!(ws.prepare(&["--no-validation"]), 0);
    let first = fs::read(ws.path("tensor.json")).unwrap();
    let file = TensorFile::load(&ws.path("tensor.json")).unwrap();
    assert_eq!(file.shape, [5, 25, 4]);
    assert_eq!(csv_rows(&ws.path("traj.csv")), 5 * 25);
    assert_eq!(ws.prepare(&["--no-validation"]), 0);
    assert_eq!(fs::read(ws.path("tensor.json")).unwrap(), first);

    let meta = parse_metadata_csv(&fs::read_to_string(ws.path("data/metadata.csv")).unwrap()).unwrap();
    let dropped = 90_003;
    let rest: BTreeMap<u32, f64> = meta.iter().filter(|(k, _)| **k != dropped).map(|(k, v)| (*k, *v)).collect();
    fs::write(ws.path("data/metadata.csv"), reentry::io::metadata_csv(&rest).unwrap()).unwrap();
    assert_eq!(ws.prepare(&["--no-validation"]), 0);
    let file = TensorFile::load(&ws.path("tensor.json")).unwrap();
    assert_eq!(file.imputed_area_to_mass, vec![dropped]);
    let i = file.tensor.index_of(dropped).unwrap();
    let expected = median(&rest.values().copied().collect::<Vec<_>>()).unwrap();
    assert_eq!(file.tensor.area_to_mass[i], expected);
}

#[test]
fn split_roles_follow_flags() {
    let ws = Workspace::new();
    ws.synth(7, 0.0);
    ws.prune();
    assert_eq!(ws.prepare(&["--test-ids", "90005,90006"]), 0);
    let t = TensorFile::load(&ws.path("tensor.json")).unwrap().tensor;
    let count = |r| t.roles.iter().filter(|x| **x == r).count();
    assert_eq!((count(Role::Train), count(Role::Validation), count(Role::Test)), (4, 1, 2));
    assert_eq!(t.roles[t.index_of(90_006).unwrap()], Role::Test);
}

#[test]
fn train_predict_eval_tune_and_replay() {
    let ws = Workspace::new();
    ws.synth(8, 0.0);
    ws.prune();
    assert_eq!(ws.prepare(&["--test-ids", "90006,90007", "--no-validation"]), 0);
    let cfg = ws.path("small.cfg");
    let run_dir = ws.path("runs/a");
    let tensor = ws.path("tensor.json");
    let (code, _) = run(&["train", "--config", p(&cfg), "--tensor", p(&tensor), "--out-dir", p(&run_dir), "--case", "A", "--epochs", "3"]);
    assert_eq!(code, 0);
    for f in ["best.ckpt.json", "last.ckpt.json", "loss.csv", "report.json", "manifest.json"] {
        assert!(run_dir.join(f).exists(), "{f}");
    }
    assert_eq!(csv_rows(&run_dir.join("loss.csv")), 3);
    let last = Checkpoint::load(&run_dir.join("last.ckpt.json")).unwrap();
    assert!(last.optimizer.is_some());
    assert_eq!(last.model_config.input_steps, 5);

    let ck = run_dir.join("best.ckpt.json");
    let (code, out) = run(&["predict", "--checkpoint", p(&ck), "--tensor", p(&tensor), "--norad", "90006"]);
    assert_eq!(code, 0);
    let pred: Prediction = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(pred.norad_id, 90_006);
    assert!(pred.reentry_epoch.starts_with("20"));

    let eval_dir = ws.path("eval");
    let (code, out) = run(&["eval", "--checkpoint", p(&ck), "--tensor", p(&tensor), "--case", "A", "--out-dir", p(&eval_dir)]);
    assert_eq!(code, 0, "{out}");
    assert!(out.contains("2 objects"), "{out}");
    assert_eq!(csv_rows(&eval_dir.join("metrics.csv")), 2 * 8);
    assert_eq!(csv_rows(&eval_dir.join("plot.csv")), 2 * 20);
    let (code, _) = run(&["eval", "--checkpoint", p(&ck), "--tensor", p(&tensor), "--case", "B", "--out-dir", p(&eval_dir)]);
    assert_eq!(code, 4);

    let tune_dir = ws.path("tune");
    let tune = |dir: &Path| {
        run(&[
            "tune", "--config", p(&cfg), "--tensor", p(&tensor), "--out-dir", p(dir), "--trials", "3", "--grace", "1",
            "--max-epochs", "4", "--eta", "2", "--jobs", "1",
        ])
    };
    assert_eq!(tune(&tune_dir).0, 0);
    let ledger = fs::read_to_string(tune_dir.join("ledger.jsonl")).unwrap();
    assert!(ledger.lines().count() >= 3);
    for line in ledger.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["trial", "config", "rung", "epoch", "val_loss", "decision"] {
            assert!(v.get(key).is_some(), "{key} missing in {line}");
        }
    }
    let summary: serde_json::Value = read_json(&tune_dir.join("summary.json")).unwrap();
    assert_eq!(summary["rungs"], serde_json::json!([1, 2, 4]));

    let first = fs::read(run_dir.join("best.ckpt.json")).unwrap();
    fs::remove_file(run_dir.join("best.ckpt.json")).unwrap();
    let (code, _) = run(&["replay", p(&run_dir.join("manifest.json"))]);
    assert_eq!(code, 0);
    assert_eq!(fs::read(run_dir.join("best.ckpt.json")).unwrap(), first);
    let m: RunManifest = read_json(&run_dir.join("manifest.json")).unwrap();
    assert_eq!(m.command, "train");
    assert_eq!(m.inputs.len(), 2);
    assert_eq!(m.outputs.len(), 4);
}

#[test]
fn zero_checkpoint_predicts_a_constant() {
    let ws = Workspace::new();
    ws.synth(6, 0.0);
    ws.prune();
    assert_eq!(ws.prepare(&["--no-validation"]), 0);
    let tensor = ws.path("tensor.json");
    let run_dir = ws.path("runs/z");
    let (code, _) = run(&["train", "--config", p(&ws.path("small.cfg")), "--tensor", p(&tensor), "--out-dir", p(&run_dir), "--epochs", "1"]);
    assert_eq!(code, 0);
    let mut ck = Checkpoint::load(&run_dir.join("best.ckpt.json")).unwrap();
    let zero = Seq2SeqModel::zeros(ck.model_config).unwrap();
    ck = Checkpoint::new(&zero, ck.train_config, None, ck.feature_names, ck.norm_stats, None);
    let zpath = ws.path("zero.ckpt.json");
    ck.save(&zpath).unwrap();
    let mut residuals = Vec::new();
    for id in ["90000", "90003"] {
        let (code, out) = run(&["predict", "--checkpoint", p(&zpath), "--tensor", p(&tensor), "--norad", id]);
        assert_eq!(code, 0);
        let pred: Prediction = serde_json::from_str(out.trim()).unwrap();
        residuals.push(pred);
    }
    // A zero network outputs 0 in normalized units for every object, so the
    // predicted time since the 200 km epoch is the same for both.
    let tensor_file = TensorFile::load(&tensor).unwrap();
    let stats = tensor_file.tensor.time_stats().unwrap();
    for (pred, id) in residuals.iter().zip([90_000u32, 90_003]) {
        let i = tensor_file.tensor.index_of(id).unwrap();
        let origin = tensor_file.tensor.origin_epochs[i];
        let expected = reentry_core::time::format_epoch(origin + stats.invert(0.0));
        assert_eq!(pred.reentry_epoch, expected);
    }
}

#[test]
fn exit_codes() {
    let ws = Workspace::new();
    let (code, _) = run(&["prune", "--omm", "missing.csv", "--tip", "x.csv", "--out", "o.json", "--report", "r.json"]);
    assert_eq!(code, 2);
    fs::write(ws.path("bad.cfg"), "learning_rat = 1\n").unwrap();
    let (code, _) = run(&["--config", p(&ws.path("bad.cfg")), "synth", "--out-dir", p(&ws.path("d"))]);
    assert_eq!(code, 4);
    fs::write(ws.path("omm.csv"), "NORAD_CAT_ID,EPOCH,MEAN_MOTION,ECCENTRICITY,INCLINATION\n1,2018-01-01,16,0.001,51\n").unwrap();
    fs::write(ws.path("tip.csv"), "NORAD_CAT_ID,DECAY_EPOCH,WINDOW_MINUTES\n").unwrap();
    let (code, _) = run(&[
        "prune", "--omm", p(&ws.path("omm.csv")), "--tip", p(&ws.path("tip.csv")), "--out", p(&ws.path("o.json")),
        "--report", p(&ws.path("r.json")),
    ]);
    assert_eq!(code, 2);
    let (code, _) = run(&["frobnicate"]);
    assert_eq!(code, 4);
}

#[test]
fn divergent_training_is_a_numerical_failure() {
    let ws = Workspace::new();
    ws.synth(5, 0.0);
    ws.prune();
    assert_eq!(ws.prepare(&["--no-validation"]), 0);
    fs::write(ws.path("wild.cfg"), format!("{SMALL}learning_rate = 1e300\nepochs = 5\n")).unwrap();
    let (code, _) = run(&[
        "train", "--config", p(&ws.path("wild.cfg")), "--tensor", p(&ws.path("tensor.json")), "--out-dir", p(&ws.path("w")),
    ]);
    assert_eq!(code, 3);
}
