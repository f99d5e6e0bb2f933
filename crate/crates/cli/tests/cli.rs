use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use faultsound::audio_io::{write_wav_pcm16, AudioClip};
use faultsound::synth::{Condition, MachineSound};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_faultsound"))
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run_in(dir: &Path, args: &[&str]) -> Run {
    let Output { status, stdout, stderr } = bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs");
    Run {
        code: status.code().expect("exit code"),
        stdout: String::from_utf8(stdout).unwrap(),
        stderr: String::from_utf8(stderr).unwrap(),
    }
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let r = run_in(dir, args);
    assert_eq!(r.code, 0, "{args:?} failed: {}", r.stderr);
    r.stdout
}

fn write_clip(path: &Path, signal: &[f64]) {
    write_wav_pcm16(path, &AudioClip::mono(signal, 16_000).unwrap()).unwrap();
}

/// Synthetic dataset on disk: WAVs plus a manifest with relative paths.
fn synthetic_dataset(dir: &Path, normals: u64, faults: u64, secs: f64) -> PathBuf {
    let gen = MachineSound {
        duration_secs: secs,
        ..Default::default()
    };
    fs::create_dir_all(dir.join("wav")).unwrap();
    let mut manifest = String::from("clip_id,path,machine_type,machine_id,label\n");
    for s in 0..normals {
        let id = format!("normal_{s:03}");
        write_clip(&dir.join(format!("wav/{id}.wav")), &gen.generate(Condition::Normal, s));
        manifest.push_str(&format!("{id},wav/{id}.wav,fan,id_00,normal\n"));
    }
    for s in 0..faults {
        let id = format!("fault_{s:03}");
        let condition = if s % 2 == 0 { Condition::Detuned } else { Condition::Clicks };
        write_clip(&dir.join(format!("wav/{id}.wav")), &gen.generate(condition, 5_000 + s));
        manifest.push_str(&format!("{id},wav/{id}.wav,fan,id_00,anomalous\n"));
    }
    let path = dir.join("manifest.csv");
    fs::write(&path, manifest).unwrap();
    path
}

fn auc_of(stdout: &str) -> f64 {
    stdout.trim().strip_prefix("auc=").expect("auc line").parse().unwrap()
}

#[test]
fn eval_auc_prints_four_decimals_on_perfect_separation() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("scores.csv"), "clip_id,score\na,0.1\nb,0.2\nc,0.9\nd,0.8\n").unwrap();
    fs::write(
        d.join("labels.csv"),
        "clip_id,label,e0\na,normal,0\nb,normal,0\nc,anomaly,0\nd,anomaly,0\n",
    )
    .unwrap();
    let out = ok(d, &["eval-auc", "--scores", "scores.csv", "--labels", "labels.csv", "--roc", "roc.csv", "--svg", "roc.svg"]);
    assert_eq!(out, "auc=1.0000\n");
    assert!(fs::read_to_string(d.join("roc.csv")).unwrap().ends_with("auc,1\n"));
    assert!(fs::read_to_string(d.join("roc.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn preprocess_ae_profile_records_paper_dims() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    write_clip(&d.join("tone.wav"), &MachineSound::default().generate(Condition::Normal, 0));
    let out = ok(d, &["preprocess", "tone.wav", "--profile", "ae", "--out-dir", "feat", "--embeddings", "emb.csv"]);
    assert!(out.contains("dims=64x313"), "{out}");
    let meta = fs::read_to_string(d.join("feat/tone.lmsp.meta")).unwrap();
    assert!(meta.contains("rows=64\n") && meta.contains("cols=313\n"), "{meta}");
    let emb = fs::read_to_string(d.join("emb.csv")).unwrap();
    let header = emb.lines().next().unwrap();
    assert!(header.starts_with("clip_id,label,e0,") && header.ends_with(",e127"));
    // spectrogram copied into the content-addressed store
    let stored: Vec<_> = fs::read_dir(d.join("store/spectrogram")).unwrap().collect();
    assert_eq!(stored.len(), 1);
}

#[test]
fn synthetic_autoencoder_pipeline_reaches_auc() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synthetic_dataset(d, 60, 20, 10.0);
    ok(d, &["preprocess", "--manifest", "manifest.csv", "--out-dir", "feat"]);
    let split = ok(d, &["split", "--manifest", "manifest.csv", "--out", "split.csv", "--seed", "1"]);
    assert!(split.starts_with("split train="), "{split}");
    ok(d, &["train-ae", "--features", "feat", "--split", "split.csv", "--manifest", "manifest.csv", "--out", "ae.bin"]);
    ok(d, &["score-ae", "--model", "ae.bin", "--features", "feat", "--split", "split.csv", "--out", "scores.csv"]);
    let out = ok(d, &["eval-auc", "--scores", "scores.csv", "--manifest", "manifest.csv"]);
    let auc = auc_of(&out);
    assert!(auc >= 0.90, "{out}");

    let runs = ok(d, &["runs", "list"]);
    let stages: Vec<&str> = runs.lines().map(|l| l.split('\t').nth(1).unwrap()).collect();
    assert_eq!(stages, ["preprocess", "split", "train-ae", "score-ae", "eval-auc"]);
}

#[test]
fn lof_and_head_paths_run_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synthetic_dataset(d, 24, 12, 2.0);
    ok(d, &["preprocess", "--manifest", "manifest.csv", "--out-dir", "feat", "--embeddings", "emb.csv"]);

    ok(d, &["lof-fit", "--embeddings", "emb.csv", "--out", "lof.bin"]);
    let scored = ok(d, &["lof-score", "--model", "lof.bin", "--embeddings", "emb.csv", "--out", "lof.csv"]);
    assert!(scored.starts_with("scored clips=36 flagged="), "{scored}");
    let lof_csv = fs::read_to_string(d.join("lof.csv")).unwrap();
    assert!(lof_csv.starts_with("clip_id,score,vote\n"));
    let auc = auc_of(&ok(d, &["eval-auc", "--scores", "lof.csv", "--manifest", "manifest.csv"]));
    assert!(auc > 0.8, "lof auc {auc}");

    ok(d, &["train-head", "--embeddings", "emb.csv", "--out", "head.bin", "--epochs", "20", "--standardize"]);
    ok(d, &["score-head", "--model", "head.bin", "--embeddings", "emb.csv", "--out", "head.csv"]);
    let auc = auc_of(&ok(d, &["eval-auc", "--scores", "head.csv", "--labels", "emb.csv"]));
    assert!(auc > 0.9, "head auc {auc}");

    let t = ok(d, &["tsne", "--embeddings", "emb.csv", "--out", "tsne.csv", "--svg", "tsne.svg", "--perplexity", "8", "--iterations", "300", "--manifest", "manifest.csv"]);
    assert!(t.starts_with("tsne points=36"), "{t}");
    let coords = fs::read_to_string(d.join("tsne.csv")).unwrap();
    assert_eq!(coords.lines().count(), 37);
    assert!(coords.lines().nth(1).unwrap().contains(",fan,"));
}

#[test]
fn attention_distance_from_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // two layers, one head, 2x2 grid without special tokens: identity, uniform
    let mut body = Vec::new();
    body.extend_from_slice(b"ATTN");
    body.push(1);
    body.push(4);
    for dim in [2u32, 1, 4, 4] {
        body.extend_from_slice(&dim.to_le_bytes());
    }
    for layer in 0..2 {
        for q in 0..4 {
            for k in 0..4 {
                let w: f32 = if layer == 0 { f32::from(u8::from(q == k)) } else { 0.25 };
                body.extend_from_slice(&w.to_le_bytes());
            }
        }
    }
    fs::write(d.join("attn.bin"), body).unwrap();
    fs::write(
        d.join("attn.bin.meta"),
        "grid_rows=2\ngrid_cols=2\npitch_vertical=16\npitch_horizontal=16\nn_special=0\nlayers=early,late\nheads=h0\n",
    )
    .unwrap();
    ok(d, &["attn-distance", "--input", "attn.bin", "--out", "dist.csv", "--svg", "dist.svg"]);
    let csv = fs::read_to_string(d.join("dist.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "layer,head,mean_distance_px");
    assert_eq!(rows[1], "early,h0,0");
    let late: f64 = rows[2].rsplit(',').next().unwrap().parse().unwrap();
    assert!((late - (8.0 + 4.0 * 2f64.sqrt())).abs() < 1e-9);
}

#[test]
fn exit_codes_and_error_lines() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();

    let r = run_in(d, &["split", "--bogus-flag"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.lines().any(|l| l.starts_with("error: category=usage exit=1 message=")), "{}", r.stderr);

    fs::write(d.join("bad.wav"), b"RIFF\x04\x00\x00\x00WAVE").unwrap();
    let r = run_in(d, &["preprocess", "bad.wav", "--out-dir", "feat"]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    assert!(r.stderr.starts_with("error: category=input-format exit=2 message="));

    fs::write(d.join("scores.csv"), "clip_id,score\na,0.1\nb,0.2\n").unwrap();
    fs::write(d.join("labels.csv"), "clip_id,label,e0\na,normal,0\nb,normal,0\n").unwrap();
    let r = run_in(d, &["eval-auc", "--scores", "scores.csv", "--labels", "labels.csv"]);
    assert_eq!(r.code, 3, "{}", r.stderr);
    assert!(r.stderr.starts_with("error: category=numeric exit=3 message="));

    fs::write(d.join("bad.toml"), "[autoencoder]\nepoch = 3\n").unwrap();
    let r = run_in(d, &["--config", "bad.toml", "runs", "list"]);
    assert_eq!(r.code, 1, "{}", r.stderr);
}

#[test]
fn every_subcommand_has_help() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&[&str], &str); 12] = [
        (&["preprocess"], "--out-dir"),
        (&["split"], "--no-stratify"),
        (&["train-ae"], "--no-standardize"),
        (&["score-ae"], "--partition"),
        (&["train-head"], "--lr-decay"),
        (&["score-head"], "--embeddings"),
        (&["lof-fit"], "--neighbors"),
        (&["lof-score"], "--contamination"),
        (&["eval-auc"], "--roc"),
        (&["tsne"], "--perplexity"),
        (&["attn-distance"], "--input"),
        (&["runs", "list"], "--strict-paper"),
    ];
    for (cmd, flag) in cases {
        let mut args = cmd.to_vec();
        args.push("--help");
        let out = ok(dir.path(), &args);
        assert!(out.contains(flag), "{cmd:?} help lacks {flag}");
        assert!(out.contains("--config") && out.contains("--store"));
    }
}

#[test]
fn stages_are_idempotent_and_ledger_is_ordered() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synthetic_dataset(d, 12, 4, 1.0);
    for out in ["a", "b"] {
        ok(d, &["preprocess", "--manifest", "manifest.csv", "--out-dir", &format!("feat_{out}"), "--embeddings", &format!("{out}.csv")]);
        ok(d, &["split", "--manifest", "manifest.csv", "--out", &format!("split_{out}.csv")]);
        ok(d, &["lof-fit", "--embeddings", &format!("{out}.csv"), "--out", &format!("lof_{out}.bin")]);
    }
    for (a, b) in [("a.csv", "b.csv"), ("split_a.csv", "split_b.csv"), ("lof_a.bin", "lof_b.bin"), ("feat_a/normal_000.lmsp", "feat_b/normal_000.lmsp")] {
        assert_eq!(fs::read(d.join(a)).unwrap(), fs::read(d.join(b)).unwrap(), "{a} vs {b}");
    }
    let runs = ok(d, &["runs", "list"]);
    let lines: Vec<&str> = runs.lines().collect();
    assert_eq!(lines.len(), 6);
    assert!(lines[0].starts_with("00001-preprocess\t"));
    assert!(lines[5].starts_with("00006-lof-fit\t"));
    let ledger = fs::read_to_string(d.join("store/ledger.csv")).unwrap();
    assert!(ledger.starts_with("run_id,stage,started_ms,finished_ms,seed,config,inputs,outputs\n"));
}

#[test]
fn strict_paper_and_config_reach_the_run_record() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    synthetic_dataset(d, 16, 4, 1.0);
    fs::write(d.join("cfg.toml"), "store_root = \"runs\"\n[autoencoder]\nepochs = 2\n").unwrap();
    ok(d, &["--config", "cfg.toml", "preprocess", "--manifest", "manifest.csv", "--out-dir", "feat"]);
    ok(d, &["--config", "cfg.toml", "--strict-paper", "split", "--manifest", "manifest.csv", "--out", "split.csv"]);
    let out = ok(d, &["--config", "cfg.toml", "--strict-paper", "train-ae", "--features", "feat", "--split", "split.csv", "--manifest", "manifest.csv", "--out", "ae.bin"]);
    assert!(out.contains("epochs=2"), "{out}");
    let ledger = fs::read_to_string(d.join("runs/ledger.csv")).unwrap();
    let last = ledger.lines().last().unwrap();
    assert!(last.contains("autoencoder.standardize=false"));
    assert!(last.contains("split.stratified=false"));
    assert!(last.contains("strict_paper=true"));
    assert!(last.contains("args.epochs=2"));
}
