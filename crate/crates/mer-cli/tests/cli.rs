//! End-to-end tests of the `mer` binary: exit codes, file outputs,
//! determinism, and CLI/library parity.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mer_core::audio::write_wav_mono16;
use mer_core::dataset::{
    make_synthetic, parse_annotation_csv, write_annotation_csv, write_feature_csv, Difficulty,
    SongPair,
};
use mer_core::evaluation::predict_song;
use mer_core::model::{Model, ModelSpec};
use mer_core::numerics::Rng;

fn mer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mer"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).to_string()
}

/// Writes a synthetic dataset as one feature CSV and one annotation CSV per
/// song under `root/features` and `root/annotations`.
fn write_dataset(root: &Path, pairs: &[SongPair]) -> (PathBuf, PathBuf) {
    let fdir = root.join("features");
    let adir = root.join("annotations");
    std::fs::create_dir_all(&fdir).unwrap();
    std::fs::create_dir_all(&adir).unwrap();
    for (feat, ann) in pairs {
        std::fs::write(
            fdir.join(format!("{}.csv", feat.song_id)),
            write_feature_csv(&[feat], None),
        )
        .unwrap();
        std::fs::write(
            adir.join(format!("{}.csv", ann.song_id)),
            write_annotation_csv(&[ann], None),
        )
        .unwrap();
    }
    (fdir, adir)
}

const FAST_TRAIN: &[&str] = &[
    "--cnn-filters", "2", "--fc-units", "2", "--gru-units", "2",
    "--seq-len", "10", "--max-epochs", "3", "--patience", "5",
    "--val-fraction", "0", "--dropout", "0.25",
];

#[test]
fn param_count_prints_pinned_values() {
    let out = mer(&["param-count", "--feature-dim", "260"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "35092");

    let out = mer(&["param-count", "--feature-dim", "260", "--branched", "false"]);
    assert_eq!(stdout(&out).trim(), "17628");

    let out = mer(&["param-count", "--feature-dim", "64"]);
    assert_eq!(stdout(&out).trim(), "10004");
}

#[test]
fn extract_writes_sixty_rows_for_thirty_seconds() {
    let dir = tempfile::tempdir().unwrap();
    let audio = dir.path().join("audio");
    std::fs::create_dir_all(&audio).unwrap();
    // 30 s of silence at 8 kHz
    write_wav_mono16(&audio.join("quiet.wav"), &vec![0.0; 240_000], 8000).unwrap();
    let out_dir = dir.path().join("features");
    let out = mer(&[
        "extract",
        "--audio-dir", audio.to_str().unwrap(),
        "--out-dir", out_dir.to_str().unwrap(),
        "--n-mels", "8",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(out_dir.join("quiet.csv")).unwrap();
    let rows: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("song_id"))
        .collect();
    assert_eq!(rows.len(), 60);
    // silence: every band is log(1e-10)
    let want = format!("{:.16e}", 1e-10f64.ln());
    assert!(rows[0].ends_with(&want.repeat(1)), "row: {}", rows[0]);
    let first_feature = rows[0].split(',').nth(2).unwrap();
    assert_eq!(first_feature, want);
    // provenance comment present
    assert!(text.starts_with("# config_hash="));
}

#[test]
fn extract_warns_per_bad_file_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let audio = dir.path().join("audio");
    std::fs::create_dir_all(&audio).unwrap();
    // one good clip, one corrupt file, one too short for a single segment
    write_wav_mono16(&audio.join("good.wav"), &vec![0.25; 8000], 8000).unwrap();
    std::fs::write(audio.join("broken.wav"), b"definitely not RIFF").unwrap();
    write_wav_mono16(&audio.join("short.wav"), &vec![0.1; 800], 8000).unwrap();
    let out_dir = dir.path().join("features");
    let out = mer(&[
        "extract",
        "--audio-dir", audio.to_str().unwrap(),
        "--out-dir", out_dir.to_str().unwrap(),
        "--n-mels", "8",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let err = stderr(&out);
    assert!(err.contains("broken.wav"), "{err}");
    assert!(err.contains("short.wav"), "{err}");
    assert!(out_dir.join("good.csv").is_file());
    assert!(!out_dir.join("broken.csv").exists());

    // when every file fails, the command reports a data error
    let all_bad = dir.path().join("bad");
    std::fs::create_dir_all(&all_bad).unwrap();
    std::fs::write(all_bad.join("junk.wav"), b"junk").unwrap();
    let out = mer(&[
        "extract",
        "--audio-dir", all_bad.to_str().unwrap(),
        "--out-dir", dir.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn extract_empty_dir_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let audio = dir.path().join("audio");
    std::fs::create_dir_all(&audio).unwrap();
    let out = mer(&[
        "extract",
        "--audio-dir", audio.to_str().unwrap(),
        "--out-dir", dir.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn extract_missing_dir_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = mer(&[
        "extract",
        "--audio-dir", dir.path().join("nope").to_str().unwrap(),
        "--out-dir", dir.path().join("x").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("nope"));
}

#[test]
fn train_is_bitwise_deterministic_across_invocations() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = make_synthetic(&mut Rng::new(3), 4, 20, 4, Difficulty::Smooth);
    let (fdir, adir) = write_dataset(dir.path(), &pairs);

    let run = |tag: &str| -> (Vec<u8>, Vec<u8>) {
        let ckpt = dir.path().join(format!("{tag}.ckpt"));
        let report = dir.path().join(format!("{tag}.csv"));
        let mut args = vec![
            "train",
            "--features-dir", fdir.to_str().unwrap(),
            "--annotations-dir", adir.to_str().unwrap(),
            "--checkpoint-out", ckpt.to_str().unwrap(),
            "--report-out", report.to_str().unwrap(),
            "--seed", "42",
        ];
        args.extend_from_slice(FAST_TRAIN);
        let out = mer(&args);
        assert!(out.status.success(), "{}", stderr(&out));
        (std::fs::read(&ckpt).unwrap(), std::fs::read(&report).unwrap())
    };
    let (ckpt_a, report_a) = run("a");
    let (ckpt_b, report_b) = run("b");
    assert_eq!(ckpt_a, ckpt_b, "checkpoints differ between identical runs");
    // reports differ only in the output-path config entries, which feed the
    // hash comment; strip the comment line before comparing
    let strip = |bytes: &[u8]| {
        String::from_utf8_lossy(bytes)
            .lines()
            .filter(|l| !l.starts_with('#'))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&report_a), strip(&report_b));
}

#[test]
fn train_missing_annotations_dir_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = make_synthetic(&mut Rng::new(3), 2, 20, 4, Difficulty::Smooth);
    let (fdir, _) = write_dataset(dir.path(), &pairs);
    let missing = dir.path().join("no-annotations");
    let out = mer(&[
        "train",
        "--features-dir", fdir.to_str().unwrap(),
        "--annotations-dir", missing.to_str().unwrap(),
        "--checkpoint-out", dir.path().join("m.ckpt").to_str().unwrap(),
        "--report-out", dir.path().join("m.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no-annotations"), "{}", stderr(&out));
}

#[test]
fn out_of_range_annotation_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = make_synthetic(&mut Rng::new(3), 2, 20, 4, Difficulty::Smooth);
    let (fdir, adir) = write_dataset(dir.path(), &pairs);
    // corrupt one annotation file
    let victim = adir.join("synth0000.csv");
    let text = std::fs::read_to_string(&victim).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let parts: Vec<&str> = lines[1].split(',').collect();
    lines[1] = format!("{},{},1.2,{}", parts[0], parts[1], parts[3]);
    std::fs::write(&victim, lines.join("\n")).unwrap();

    let ckpt = dir.path().join("m.ckpt");
    let report = dir.path().join("m.csv");
    let mut args = vec![
        "train",
        "--features-dir", fdir.to_str().unwrap(),
        "--annotations-dir", adir.to_str().unwrap(),
        "--checkpoint-out", ckpt.to_str().unwrap(),
        "--report-out", report.to_str().unwrap(),
    ];
    args.extend_from_slice(FAST_TRAIN);
    let out = mer(&args);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("1.2"), "{}", stderr(&out));
}

#[test]
fn predict_matches_library_forward_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = make_synthetic(&mut Rng::new(9), 2, 23, 5, Difficulty::Smooth);
    let mut spec = ModelSpec::new(5);
    spec.cnn_filters = 2;
    spec.fc_units = 2;
    spec.gru_units = 2;
    let model = Model::build(spec, &mut Rng::new(17)).unwrap();
    let ckpt = dir.path().join("model.ckpt");
    model.save(&ckpt).unwrap();

    let features_csv = dir.path().join("features.csv");
    let feats: Vec<_> = pairs.iter().map(|(f, _)| f).collect();
    std::fs::write(&features_csv, write_feature_csv(&feats, None)).unwrap();

    let out_csv = dir.path().join("pred.csv");
    let out = mer(&[
        "predict",
        "--checkpoint", ckpt.to_str().unwrap(),
        "--features", features_csv.to_str().unwrap(),
        "--out", out_csv.to_str().unwrap(),
        "--seq-len", "10",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));

    let text = std::fs::read_to_string(&out_csv).unwrap();
    let parsed = parse_annotation_csv(&text, "pred").unwrap();
    assert_eq!(parsed.len(), 2);
    for (feat, _) in &pairs {
        let want = predict_song(&model, feat, 10).unwrap();
        let got = parsed.iter().find(|p| p.song_id == feat.song_id).unwrap();
        assert_eq!(got.valence, want.valence, "valence mismatch");
        assert_eq!(got.arousal, want.arousal, "arousal mismatch");
        // range contract
        assert!(got
            .valence
            .data()
            .iter()
            .chain(got.arousal.data())
            .all(|v| (-1.0..=1.0).contains(v)));
    }
}

#[test]
fn predict_dimension_mismatch_is_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let model = Model::build(ModelSpec::new(7), &mut Rng::new(1)).unwrap();
    let ckpt = dir.path().join("m.ckpt");
    model.save(&ckpt).unwrap();
    let pairs = make_synthetic(&mut Rng::new(2), 1, 10, 5, Difficulty::Smooth);
    let csv = dir.path().join("f.csv");
    std::fs::write(&csv, write_feature_csv(&[&pairs[0].0], None)).unwrap();
    let out = mer(&[
        "predict",
        "--checkpoint", ckpt.to_str().unwrap(),
        "--features", csv.to_str().unwrap(),
        "--out", dir.path().join("p.csv").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));
}

#[test]
fn evaluate_reports_metrics_and_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = make_synthetic(&mut Rng::new(4), 3, 20, 4, Difficulty::Smooth);
    let (fdir, adir) = write_dataset(dir.path(), &pairs);
    let mut spec = ModelSpec::new(4);
    spec.cnn_filters = 2;
    spec.fc_units = 2;
    spec.gru_units = 2;
    let model = Model::build(spec, &mut Rng::new(5)).unwrap();
    let ckpt = dir.path().join("m.ckpt");
    model.save(&ckpt).unwrap();

    let out_csv = dir.path().join("eval.csv");
    let out = mer(&[
        "evaluate",
        "--checkpoint", ckpt.to_str().unwrap(),
        "--features-dir", fdir.to_str().unwrap(),
        "--annotations-dir", adir.to_str().unwrap(),
        "--seq-len", "10",
        "--out", out_csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("valence"), "{}", stdout(&out));

    let text = std::fs::read_to_string(&out_csv).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(
        lines.next().unwrap(),
        "scope,song_id,rmse_valence,rmse_arousal,rmse_average"
    );
    let overall = lines.next().unwrap();
    assert!(overall.starts_with("overall,,"));
    // one row per song follows
    assert_eq!(lines.filter(|l| l.starts_with("song,")).count(), 3);
}

#[test]
fn sweep_single_cell_omits_std_and_averages_columns() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = make_synthetic(&mut Rng::new(6), 4, 20, 4, Difficulty::Smooth);
    let (fdir, adir) = write_dataset(dir.path(), &pairs);
    let table = dir.path().join("table.csv");
    let mut args = vec![
        "sweep",
        "--features-dir", fdir.to_str().unwrap(),
        "--annotations-dir", adir.to_str().unwrap(),
        "--out", table.to_str().unwrap(),
        "--seq-lens", "10",
        "--seeds", "7",
    ];
    args.extend_from_slice(FAST_TRAIN);
    let out = mer(&args);
    assert!(out.status.success(), "{}", stderr(&out));

    let text = std::fs::read_to_string(&table).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "seq_len");
    assert_eq!(row[0], "10");
    assert_eq!(row[1], "1"); // n_runs
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    // single run: std cells are empty
    assert_eq!(row[col("dev_valence_std")], "");
    // average column is the mean of valence and arousal
    let v: f64 = row[col("dev_valence_mean")].parse().unwrap();
    let a: f64 = row[col("dev_arousal_mean")].parse().unwrap();
    let avg: f64 = row[col("dev_average_mean")].parse().unwrap();
    assert!((avg - 0.5 * (v + a)).abs() < 1e-12);
}

#[test]
fn sweep_with_eval_dirs_adds_eval_columns() {
    let dir = tempfile::tempdir().unwrap();
    let dev = make_synthetic(&mut Rng::new(7), 4, 20, 4, Difficulty::Smooth);
    let (fdir, adir) = write_dataset(&dir.path().join("dev"), &dev);
    let eval = make_synthetic(&mut Rng::new(8), 2, 20, 4, Difficulty::Smooth);
    let (efdir, eadir) = write_dataset(&dir.path().join("eval"), &eval);
    let table = dir.path().join("table.csv");
    let mut args = vec![
        "sweep",
        "--features-dir", fdir.to_str().unwrap(),
        "--annotations-dir", adir.to_str().unwrap(),
        "--eval-features-dir", efdir.to_str().unwrap(),
        "--eval-annotations-dir", eadir.to_str().unwrap(),
        "--out", table.to_str().unwrap(),
        "--seq-lens", "10,20",
        "--seeds", "1,2",
    ];
    args.extend_from_slice(FAST_TRAIN);
    let out = mer(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&table).unwrap();
    let header = text.lines().nth(1).unwrap();
    assert!(header.contains("eval_valence_mean"));
    assert!(header.contains("dev_average_std"));
    assert_eq!(text.lines().count(), 4); // comment + header + 2 rows
    // two runs: std cells populated
    let row: Vec<&str> = text.lines().nth(2).unwrap().split(',').collect();
    assert!(!row.last().unwrap().is_empty());
}

#[test]
fn config_file_unknown_key_is_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "seq_len = 10\nbogus_key = 3\n").unwrap();
    let out = mer(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("bogus_key"), "{}", stderr(&out));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let pairs = make_synthetic(&mut Rng::new(11), 3, 20, 4, Difficulty::Smooth);
    let (fdir, adir) = write_dataset(dir.path(), &pairs);
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        format!(
            "features_dir = {}\nannotations_dir = {}\nseed = 1\n\
             cnn_filters = 2\nfc_units = 2\ngru_units = 2\nseq_len = 10\n\
             max_epochs = 2\npatience = 5\nval_fraction = 0\n",
            fdir.display(),
            adir.display()
        ),
    )
    .unwrap();

    // config seed 1 overridden by flag seed 2 must equal a pure-flag seed-2 run
    let run = |tag: &str, extra: &[&str]| -> Vec<u8> {
        let ckpt = dir.path().join(format!("{tag}.ckpt"));
        let report = dir.path().join(format!("{tag}.csv"));
        let mut args = vec![
            "train",
            "--checkpoint-out", ckpt.to_str().unwrap(),
            "--report-out", report.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        let out = mer(&args);
        assert!(out.status.success(), "{}", stderr(&out));
        std::fs::read(&ckpt).unwrap()
    };
    let with_config = run("cfg", &["--config", cfg.to_str().unwrap(), "--seed", "2"]);
    let mut flag_args = vec![
        "--features-dir", fdir.to_str().unwrap(),
        "--annotations-dir", adir.to_str().unwrap(),
        "--seed", "2",
        "--cnn-filters", "2", "--fc-units", "2", "--gru-units", "2",
        "--seq-len", "10", "--max-epochs", "2", "--patience", "5", "--val-fraction", "0",
    ];
    let pure_flags = run("flag", &std::mem::take(&mut flag_args));
    assert_eq!(with_config, pure_flags);
}

#[test]
fn help_exits_zero() {
    let out = mer(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let out = mer(&["train", "--help"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = mer(&["train", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}
