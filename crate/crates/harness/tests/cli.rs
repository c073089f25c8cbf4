use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
seed = 3
n_frames = 60

[channel]
n_ports = 4
n_tx = 2
n_doppler = 4
n_delay = 4
n_paths = 3

[model]
width = 8
heads = 2
blocks = 1
lora_rank = 2
ffn_mult = 2
past = 6

[train]
epochs = 3
batch_size = 4

[eval]
horizons = [2, 3]
snr_db = [0.0, 10.0]
target_rates = [0.5, 1.0, 1.5]
"#;

fn ddfas(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddfas"))
        .args(args)
        .arg("--config")
        .arg(dir.join("tiny.toml"))
        .arg("--out")
        .arg(dir.join("work"))
        .output()
        .unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    dir
}

fn ok(out: &Output) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn staged_pipeline_produces_report() {
    let dir = setup();
    let d = dir.path();
    let gen = ddfas(d, &["gen"]);
    ok(&gen);
    assert!(String::from_utf8_lossy(&gen.stdout).contains("frames 60"));
    let fit = ddfas(d, &["fit-compress", "--check"]);
    ok(&fit);
    let text = String::from_utf8_lossy(&fit.stdout);
    assert!(
        text.contains("r_s ") && text.contains("reconstruction nmse_db"),
        "{text}"
    );
    ok(&ddfas(d, &["train"]));

    let log = std::fs::read_to_string(d.join("work/loss_lora_m2.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);
    assert!(log.lines().all(|l| l.split(',').count() == 2));

    ok(&ddfas(d, &["eval"]));
    let report = std::fs::read_to_string(d.join("work/report.csv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next(), Some("metric,horizon,snr_db,value,config_hash"));
    assert!(report.contains("transformer_lora.code_nmse_db,2,,"));
    assert!(report.contains("persistence.code_nmse_db,3,,"));
    assert!(!report.contains("transformer_full"));

    // Outage of every forecaster is nondecreasing in the target rate.
    let mut by_key: std::collections::BTreeMap<(String, String, String), Vec<(f64, f64)>> = Default::default();
    for l in report.lines().skip(1) {
        let f: Vec<&str> = l.split(',').collect();
        if let Some((name, r0)) = f[0].split_once(".outage_predicted@") {
            by_key
                .entry((name.into(), f[1].into(), f[2].into()))
                .or_default()
                .push((r0.parse().unwrap(), f[3].parse().unwrap()));
        }
    }
    assert!(!by_key.is_empty());
    for curve in by_key.values() {
        assert!(curve.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 <= w[1].1));
    }
}

#[test]
fn seeded_training_repeats_and_full_mode_is_reported() {
    let dir = setup();
    let d = dir.path();
    ok(&ddfas(d, &["gen"]));
    ok(&ddfas(d, &["fit-compress"]));
    ok(&ddfas(d, &["train", "--horizon", "2"]));
    let first = std::fs::read(d.join("work/loss_lora_m2.csv")).unwrap();
    ok(&ddfas(d, &["train", "--horizon", "2", "--threads", "2"]));
    assert_eq!(std::fs::read(d.join("work/loss_lora_m2.csv")).unwrap(), first);
    assert!(!d.join("work/model_lora_m3.ddmd").exists());

    ok(&ddfas(d, &["train", "--lora", "off"]));
    ok(&ddfas(d, &["train"]));
    ok(&ddfas(d, &["eval"]));
    let report = std::fs::read_to_string(d.join("work/report.csv")).unwrap();
    assert!(report.contains("transformer_full.code_nmse_db,3,,"));
}

#[test]
fn error_exit_codes() {
    let dir = setup();
    let d = dir.path();
    std::fs::write(d.join("bad.toml"), "[model]\nheads = 3\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_ddfas"))
        .args(["gen", "--config"])
        .arg(d.join("bad.toml"))
        .arg("--out")
        .arg(d.join("w"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("model.heads"));

    let missing = ddfas(d, &["fit-compress"]);
    assert_eq!(missing.status.code(), Some(2));

    ok(&ddfas(d, &["gen"]));
    let path = d.join("work/channels.ddch");
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[..5].copy_from_slice(b"NOPE!");
    std::fs::write(&path, bytes).unwrap();
    let bad = ddfas(d, &["fit-compress"]);
    assert_eq!(bad.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("bad magic"));
}

#[test]
fn perfect_csi_matches_actual_channel() {
    let dir = setup();
    let d = dir.path();
    ok(&ddfas(d, &["gen"]));
    ok(&ddfas(d, &["fit-compress"]));
    ok(&ddfas(d, &["eval", "--perfect-csi"]));
    let report = std::fs::read_to_string(d.join("work/report.csv")).unwrap();
    let rows: Vec<Vec<&str>> = report.lines().skip(1).map(|l| l.split(',').collect()).collect();
    let mut checked = 0;
    for r in &rows {
        if let Some(metric) = r[0].strip_prefix("transformer_lora.") {
            match metric {
                "capacity_gap" => assert_eq!(r[3], "0"),
                m if m.starts_with("outage_predicted@") || m == "ergodic_capacity" => {
                    let actual = rows
                        .iter()
                        .find(|a| a[0] == format!("actual.{m}") && a[1] == r[1] && a[2] == r[2])
                        .unwrap();
                    assert_eq!(actual[3], r[3]);
                }
                _ => continue,
            }
            checked += 1;
        }
    }
    assert!(checked > 0);
}
