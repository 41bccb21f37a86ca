//! End-to-end runs of the `intact` binary.

use std::path::Path;
use std::process::{Command, Output};

use intact::io::{read_matrix_csv, ModelFile};

fn intact(dir: &Path, cmd: &str, config: &str) -> Output {
    std::fs::write(dir.join("run.toml"), config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_intact"))
        .arg(cmd)
        .arg("--config")
        .arg(dir.join("run.toml"))
        .arg("--out")
        .arg(dir)
        .args(["--threads", "1"])
        .output()
        .unwrap()
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn fails_with(out: &Output, needle: &str) {
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.starts_with("error: "), "{err}");
    assert!(err.contains(needle), "expected {needle:?} in {err:?}");
}

const PLANTED: &str = r#"
[synth]
source = "planted"
n = 80
view_dims = [4, 3, 5]
latent_dim = 2
seed = 3
[train]
manifest = "manifest.json"
hyperparams = { d = 2, C2 = 0.1, max_outer = 60 }
"#;

fn trained() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(&intact(dir.path(), "synth", PLANTED));
    let stdout = ok(&intact(dir.path(), "train", PLANTED));
    assert!(stdout.contains("monotone = true"), "{stdout}");
    dir
}

#[test]
fn train_embed_eval_probe_pipeline() {
    let dir = trained();
    let d = dir.path();
    let cfg = r#"
[embed]
model = "model.txt"
manifest = "manifest.json"
[eval]
embedding = "embedding.csv"
manifest = "manifest.json"
model = "model.txt"
[probe]
model = "model.txt"
manifest = "manifest.json"
n_probes = 20
"#;
    ok(&intact(d, "embed", cfg));
    let train = read_matrix_csv(&d.join("embedding.csv")).unwrap();
    let again = read_matrix_csv(&d.join("embedding_new.csv")).unwrap();
    assert!((train - again).amax() < 1e-6);

    ok(&intact(d, "eval", cfg));
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("metrics.json")).unwrap()).unwrap();
    assert!(metrics["alignment_residual"].as_f64().unwrap() < 0.05, "{metrics}");

    let stdout = ok(&intact(d, "probe", cfg));
    assert!(stdout.contains("violations = 0"), "{stdout}");
    assert!(d.join("probes.csv").is_file());
}

#[test]
fn model_file_round_trips_byte_identically() {
    let dir = trained();
    let path = dir.path().join("model.txt");
    let text = std::fs::read_to_string(&path).unwrap();
    let loaded = ModelFile::load(&path).unwrap();
    assert_eq!(loaded.to_text(), text);
}

#[test]
fn negative_regularizer_is_rejected() {
    let dir = trained();
    let cfg = PLANTED.replace("C2 = 0.1", "C2 = -0.1");
    fails_with(&intact(dir.path(), "train", &cfg), "invalid parameter");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fails_with(&intact(dir.path(), "synth", "[synth]\nsorce = \"planted\"\n"), "unknown field");
}

#[test]
fn embed_with_wrong_view_width_is_a_dimension_mismatch() {
    let dir = trained();
    let d = dir.path();
    std::fs::write(d.join("bad.csv"), "1,2\n3,4\n").unwrap();
    let cfg = r#"
[embed]
model = "model.txt"
views = ["bad.csv", "view_1.csv", "view_2.csv"]
"#;
    fails_with(&intact(d, "embed", cfg), "dimension mismatch in view 0");
}

#[test]
fn empty_view_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("a.csv"), "# nothing here\n").unwrap();
    std::fs::write(d.join("b.csv"), "1\n").unwrap();
    let cfg = "[train]\nviews = [\"a.csv\", \"b.csv\"]\n";
    fails_with(&intact(d, "train", cfg), "empty view");
}

#[test]
fn eval_without_truth_or_labels_is_missing_input() {
    let dir = trained();
    let cfg = "[eval]\nembedding = \"embedding.csv\"\n";
    fails_with(&intact(dir.path(), "eval", cfg), "missing input");
}

#[test]
fn probe_requires_positive_latent_penalty() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = PLANTED.replace("C2 = 0.1", "C2 = 0.0");
    ok(&intact(d, "synth", &cfg));
    ok(&intact(d, "train", &cfg));
    let probe = "[probe]\nmodel = \"model.txt\"\nmanifest = \"manifest.json\"\nn_probes = 5\n";
    fails_with(&intact(d, "probe", probe), "C2 > 0");
}

#[test]
fn contamination_rate_out_of_range_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "[bench]\nrates = [0.6]\nseeds = 1\nn = 30\n";
    fails_with(&intact(dir.path(), "bench", cfg), "rate");
}

#[test]
fn kernel_mode_trains_and_embeds() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = r#"
[synth]
source = "s-curve"
n = 60
[train]
manifest = "manifest.json"
mode = "kernel"
kernel = "rbf"
hyperparams = { d = 3, max_outer = 20 }
[embed]
model = "model.txt"
manifest = "manifest.json"
"#;
    ok(&intact(d, "synth", cfg));
    let stdout = ok(&intact(d, "train", cfg));
    assert!(stdout.contains("monotone = true"), "{stdout}");
    ok(&intact(d, "embed", cfg));
    let train = read_matrix_csv(&d.join("embedding.csv")).unwrap();
    let again = read_matrix_csv(&d.join("embedding_new.csv")).unwrap();
    assert!((train - again).amax() < 1e-5);
}

#[test]
fn seed_flag_changes_synthetic_data() {
    let cfg = "[synth]\nsource = \"planted\"\nn = 20\n";
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(&intact(a.path(), "synth", cfg));
    std::fs::write(b.path().join("run.toml"), cfg).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_intact"))
        .args(["synth", "--seed", "42", "--config"])
        .arg(b.path().join("run.toml"))
        .arg("--out")
        .arg(b.path())
        .output()
        .unwrap();
    ok(&out);
    let va = std::fs::read(a.path().join("view_0.csv")).unwrap();
    let vb = std::fs::read(b.path().join("view_0.csv")).unwrap();
    assert_ne!(va, vb);
}
