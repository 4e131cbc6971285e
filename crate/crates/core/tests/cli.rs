use std::path::Path;
use std::process::{Command, Output};

use ensemble_prune::data::{analytic_fcn3, gen_orthonormal_pair};
use ensemble_prune::nn::checkpoint;
use ensemble_prune::SeedStream;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ensemble-prune"))
        .args(args)
        .env("ENSEMBLE_PRUNE_OUT_DIR", dir)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

const QUICK: [&str; 4] = ["--finetune-epochs", "2", "--retrain-epochs", "2"];

#[test]
fn arch_preset_totals() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(dir.path(), &["arch", "--preset", "resnet20-cifar"]);
    let total = text.lines().last().unwrap();
    assert!(total.starts_with("total,,688,"), "{total}");
    assert!(total.ends_with("40551040 (40.5M)"), "{total}");
}

#[test]
fn arch_rejects_unknown_preset() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["arch", "--preset", "resnet21-cifar"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error: ") && err.trim_end().lines().count() == 1, "{err}");
}

#[test]
fn arch_diff_of_identical_descriptors_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let desc = ensemble_prune::metrics::preset("resnet20-cifar").unwrap().to_text();
    let a = dir.path().join("a.arch");
    let b = dir.path().join("b.arch");
    std::fs::write(&a, &desc).unwrap();
    std::fs::write(&b, &desc).unwrap();
    let text = ok(dir.path(), &["arch", "--file", a.to_str().unwrap(), "--diff", b.to_str().unwrap()]);
    assert_eq!(text.lines().last().unwrap(), "total,,,0,0.00,0.00");
    for row in text.lines().skip(1) {
        assert!(row.ends_with(",0,0.00,0.00"), "{row}");
    }
}

#[test]
fn train_then_prune_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["train", "--model", "fcn10", "--seed", "4", "--epochs", "40", "--out", "m.ckpt"]);
    let mut csvs = Vec::new();
    for i in 0..2 {
        let report = format!("r{i}.csv");
        let out = format!("p{i}.ckpt");
        let ckpt = d.join("m.ckpt");
        let mut args = vec!["prune", "--checkpoint", ckpt.to_str().unwrap(), "--seed", "4", "--out", &out, "--report", &report];
        args.extend(QUICK);
        ok(d, &args);
        csvs.push((std::fs::read(d.join(&report)).unwrap(), std::fs::read(d.join(&out)).unwrap()));
    }
    assert_eq!(csvs[0], csvs[1]);
    let csv = String::from_utf8(csvs[0].0.clone()).unwrap();
    assert!(csv.starts_with("layer,filters,flops,filters_removed,params_removed_pct,flops_removed_pct\n"));
    assert!(csv.lines().last().unwrap().starts_with("total,11,"));
}

#[test]
fn zero_budget_on_analytic_checkpoint_removes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // The CLI draws the XOR basis first from the run's "data" stream.
    let seed = 9;
    let (a, b) = gen_orthonormal_pair(&mut SeedStream::new(seed).named("data").rng());
    let ckpt = d.join("analytic.ckpt");
    checkpoint::save(&analytic_fcn3(a, b).unwrap(), &ckpt).unwrap();
    let mut args = vec!["prune", "--checkpoint", ckpt.to_str().unwrap(), "--alpha", "0", "--seed", "9"];
    args.extend(QUICK);
    let text = ok(d, &args);
    assert!(text.contains("params_removed_pct=0.00 flops_removed_pct=0.00"), "{text}");
    let csv = std::fs::read_to_string(d.join("prune_report.csv")).unwrap();
    for row in csv.lines().skip(1) {
        assert!(row.ends_with(",0,0.00,0.00"), "{row}");
    }
}

#[test]
fn zero_epochs_keeps_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["train", "--model", "fcn10", "--seed", "5", "--epochs", "0", "--out", "z.ckpt"]);
    let trained = checkpoint::load(d.join("z.ckpt")).unwrap();
    // Models draw their initial weights from the run's "init" stream.
    let init = ensemble_prune::models::ModelSpec::Fcn(10)
        .build(&mut SeedStream::new(5).named("init").rng())
        .unwrap();
    assert_eq!(trained.params(), init.params());
}

#[test]
fn single_trial_rate_is_binary() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(dir.path(), &["xor-experiment", "--trials", "1", "--type", "one-shot", "--seed", "2", "--csv", "t.csv"]);
    assert!(text.contains("1/1") || text.contains("0/1"), "{text}");
    let csv = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("run.conf");
    std::fs::write(&cfg, "# fcn run\nmodel = fcn4\nepochs = 3\nseed = 1\nout = c.ckpt\n").unwrap();
    ok(d, &["train", "--config", cfg.to_str().unwrap(), "--set", "epochs=1"]);
    let net = checkpoint::load(d.join("c.ckpt")).unwrap();
    assert_eq!(net.layer_width(0).unwrap(), 4);
    let out = run(d, &["train", "--config", d.join("missing.conf").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}
