use std::fs;
use std::path::Path;

use super::*;
use crate::eval::{EvalReport, EvalRow, CSV_HEADER};
use crate::nets::Scale;

const TINY: [&str; 15] = [
    "ed.channels=2,4,4",
    "lrcn.channels=2,2,2",
    "lrcn.feature_dim=8",
    "lrcn.hidden_dim=8",
    "lrcn.seed_channels=2",
    "lrcn.mid_channels=2",
    "d_h=32",
    "c=3",
    "data.n=10",
    "data.corruption=deletion:0.3:4",
    "1a.epochs=1",
    "1b.epochs=1",
    "2.epochs=1",
    "3.epochs=1",
    "2.batch=2",
];

fn tiny_args() -> Vec<String> {
    TINY.iter().flat_map(|kv| ["--set".to_string(), kv.to_string()]).collect()
}

fn tiny_settings() -> Settings {
    parse_config(None, &TINY.map(String::from)).unwrap()
}

fn cli(dir: &Path, args: &[&str]) -> i32 {
    let mut all = vec!["shape-inpaint".to_string()];
    all.extend(args.iter().map(|s| s.to_string()));
    all.extend(tiny_args());
    all.extend(["--out".into(), dir.to_string_lossy().into_owned()]);
    main_with(all)
}

fn saved_model(dir: &Path) -> HybridModel {
    let s = tiny_settings();
    let mut m = HybridModel::init(s.train.edgan, s.train.lrcn, 2).unwrap();
    m.generator.set_unit_norms();
    m.discriminator.set_unit_norms();
    m.upsampler.set_unit_norms();
    save_model(&m, &s, dir).unwrap();
    m
}

#[test]
fn empty_file_gives_defaults() {
    let s = parse_config(Some("# nothing\n\n"), &[]).unwrap();
    assert_eq!(s, Settings::new(Scale::Desk));
    assert_eq!(parse_config(None, &[]).unwrap(), s);
    let full = parse_config(Some("scale = full\n"), &[]).unwrap();
    assert_eq!(full, Settings::new(Scale::Full));
    assert_eq!(full.train.edgan.d_l, 32);
}

#[test]
fn overrides_beat_file() {
    let s = parse_config(Some("1a.lr = 0.01\nd_l = 16\n"), &["1a.lr=0.5".into(), "d_l=8".into()]).unwrap();
    assert_eq!(s.train.reconstruction.lr, 0.5);
    assert_eq!(s.train.edgan.d_l, 8);
    assert_eq!(s.train.lrcn.d_l, 8);
    let echo = s.to_text();
    assert!(echo.lines().any(|l| l == "d_l = 8"));
    assert!(echo.lines().any(|l| l == "1a.lr = 0.5"));
    let again = parse_config(None, &["d_l=16".into()]).unwrap();
    assert!(again.to_text().lines().any(|l| l == "d_l = 16"));
}

#[test]
fn echo_round_trips() {
    let s = tiny_settings();
    assert_eq!(parse_config(Some(&s.to_text()), &[]).unwrap(), s);
    let full = Settings::new(Scale::Full);
    assert_eq!(parse_config(Some(&full.to_text()), &[]).unwrap(), full);
    assert_eq!(s.to_text().lines().count(), Settings::keys().len());
}

#[test]
fn config_errors_name_line_and_key() {
    let e = parse_config(Some("seed = 1\n\nnot an assignment\n"), &[]).unwrap_err();
    assert_eq!(e.line, Some(3));
    assert!(e.to_string().starts_with("line 3:"));
    let e = parse_config(Some("seed = 1\nwidth = 4\n"), &[]).unwrap_err();
    assert_eq!((e.line, e.key.as_deref()), (Some(2), Some("width")));
    let e = parse_config(None, &["2.lr=fast".into()]).unwrap_err();
    assert_eq!(e.key.as_deref(), Some("2.lr"));
    assert!(e.to_string().contains("fast"));
    assert!(parse_config(None, &["scale=huge".into()]).is_err());
    assert!(parse_config(None, &["c=4".into()]).is_err());
    assert!(parse_config(None, &["sweep.fractions=0.4,0.2".into()]).is_err());
}

#[test]
fn report_bytes_are_stable() {
    let dir = tempfile::tempdir().unwrap();
    let report = EvalReport {
        rows: vec![EvalRow {
            id: "chair-0001".into(),
            category: "chair".into(),
            corruption: "scan:+z".into(),
            noise: None,
            input: 0.25,
            lowres: 0.125,
            hybrid: 0.0625,
        }],
    };
    emit_report(&report, ReportFormat::Both, dir.path(), "a").unwrap();
    emit_report(&report, ReportFormat::Both, dir.path(), "b").unwrap();
    for ext in ["txt", "csv"] {
        let a = fs::read(dir.path().join(format!("a.{ext}"))).unwrap();
        assert_eq!(a, fs::read(dir.path().join(format!("b.{ext}"))).unwrap());
    }
    emit_report(&EvalReport::default(), ReportFormat::Table, dir.path(), "empty").unwrap();
    assert_eq!(fs::read_to_string(dir.path().join("empty.csv")).unwrap(), format!("{CSV_HEADER}\n"));
    assert!(!dir.path().join("empty.txt").exists());
    assert!(emit_report(&report, ReportFormat::Text, &dir.path().join("missing"), "x").is_err());
}

#[test]
fn pgm_layout() {
    let mut g = VoxelGrid::new(8);
    g.set(3, 1, 2, true);
    let text = pgm_slice(&g, 3);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(&lines[..3], &["P2", "8 8", "255"]);
    assert_eq!(lines.len(), 3 + 8);
    assert_eq!(lines[4].split(' ').nth(2), Some("255"));
    assert_eq!(text.matches("255").count(), 2);
    assert_eq!(pgm_slice(&g, 2).matches("255").count(), 1);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(main_with(["shape-inpaint", "--help"]), 0);
    assert_eq!(main_with(["shape-inpaint", "frobnicate"]), 1);
    assert_eq!(cli(dir.path(), &["gen-data", "--set", "bogus=1"]), 1);
    let missing = dir.path().join("nothing");
    assert_eq!(cli(dir.path(), &["eval", "--model", missing.to_str().unwrap(), "--data", missing.to_str().unwrap()]), 2);
    assert_eq!(cli(dir.path(), &["train", "--data", missing.to_str().unwrap(), "--stage", "9"]), 1);
    let nan = TrainError::NonFinite {
        stage: crate::train::Stage::Upsampler,
        step: 3,
        what: "l1".into(),
    };
    assert_eq!(CliError::from(nan).exit_code(), 3);
}

#[test]
fn run_dir_holds_config_seed_and_version() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data");
    assert_eq!(cli(&out, &["gen-data", "--seed", "42"]), 0);
    let cfg = fs::read_to_string(out.join(CONFIG_FILE)).unwrap();
    assert!(cfg.lines().any(|l| l == "seed = 42"));
    assert!(cfg.lines().any(|l| l == "d_h = 32"));
    assert_eq!(fs::read_to_string(out.join("seed.txt")).unwrap(), "42\n");
    assert!(fs::read_to_string(out.join("version.txt")).unwrap().starts_with(env!("CARGO_PKG_VERSION")));
    let ds = Dataset::load(out.join(MANIFEST_NAME)).unwrap();
    assert_eq!(ds.len(), 10);
}

#[test]
fn complete_writes_readable_grids() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model");
    saved_model(&model);
    let mut shell = VoxelGrid::solid_box(16, [3, 3, 3], [13, 13, 13]);
    for x in 4..12 {
        for y in 4..12 {
            for z in 4..12 {
                shell.set(x, y, z, false);
            }
        }
    }
    let input = dir.path().join("shell.voxg");
    write_grid(&input, &shell).unwrap();
    let out = dir.path().join("run");
    let args = ["complete", "--model", model.to_str().unwrap(), "--input", input.to_str().unwrap(), "--slices"];
    assert_eq!(cli(&out, &args), 0);
    assert_eq!(read_grid(out.join("low.voxg")).unwrap().resolution(), 16);
    assert_eq!(read_grid(out.join("high.voxg")).unwrap().resolution(), 32);
    let pgm = fs::read_to_string(out.join("slices").join("high_x031.pgm")).unwrap();
    assert!(pgm.starts_with("P2\n32 32\n255\n"));

    let wrong = dir.path().join("wrong.voxg");
    write_grid(&wrong, &VoxelGrid::new(8)).unwrap();
    assert_eq!(cli(&out, &["complete", "--model", model.to_str().unwrap(), "--input", wrong.to_str().unwrap()]), 2);
}

#[test]
fn eval_rows_match_test_split() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(cli(&data, &["gen-data"]), 0);
    let model = dir.path().join("model");
    saved_model(&model);
    let out = dir.path().join("eval");
    let m = model.to_str().unwrap();
    let d = data.to_str().unwrap();
    assert_eq!(cli(&out, &["eval", "--model", m, "--data", d]), 0);
    let tests = Dataset::load(data.join(MANIFEST_NAME)).unwrap().test().len();
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(csv.lines().count(), tests + 1);

    let sweep = dir.path().join("sweep");
    assert_eq!(cli(&sweep, &["sweep", "--model", m, "--data", d, "--format", "table"]), 0);
    let csv = fs::read_to_string(sweep.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4 * tests + 1);

    let interp = dir.path().join("interp");
    let grids = data.join("grids");
    let mut files: Vec<_> = fs::read_dir(&grids).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    let lows: Vec<_> = files.iter().filter(|p| p.to_string_lossy().ends_with(".low.voxg")).collect();
    let args = ["interpolate", "--model", m, "--a", lows[0].to_str().unwrap(), "--b", lows[1].to_str().unwrap()];
    assert_eq!(cli(&interp, &args), 0);
    assert_eq!(read_grid(interp.join("interp_04.voxg")).unwrap().resolution(), 16);
}

#[test]
fn train_stage_two_touches_only_upsampler() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    assert_eq!(cli(&data, &["gen-data"]), 0);
    let init = dir.path().join("init");
    let before = saved_model(&init);
    let out = dir.path().join("train");
    let args = ["train", "--data", data.to_str().unwrap(), "--stage", "2", "--init", init.to_str().unwrap()];
    assert_eq!(cli(&out, &args), 0);
    let after = load_model(&out.join(MODEL_DIR), &tiny_settings()).unwrap();
    assert_eq!(after.generator, before.generator);
    assert_eq!(after.discriminator, before.discriminator);
    assert_ne!(after.upsampler.fingerprint(), before.upsampler.fingerprint());
    let log = fs::read_to_string(out.join(TRAIN_LOG)).unwrap();
    let log = TrainLog::parse(&log).unwrap();
    assert!(!log.records.is_empty());
    assert!(log.records.iter().all(|r| r.stage == Stage::Upsampler));
}
