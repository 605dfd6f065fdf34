use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gazebench::formats::csvio::{measures_to_csv, MeasureRow};
use gazebench::formats::pgm;
use gazebench::formats::records::{
    write_frame_manifest, write_gaze_stream, FrameManifestEntry, RawGazeRecord,
};
use gazebench::houghvision::{render_scene, Circle, SceneParams};
use gazebench::raster::GrayImage;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gazebench"));
    for (name, _) in std::env::vars() {
        if name.starts_with("GAZEBENCH_") {
            cmd.env_remove(name);
        }
    }
    cmd
}

fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(cmd: &mut Command) -> i32 {
    cmd.output().expect("binary runs").status.code().expect("no signal")
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("reading {}: {e}", path.display()))
}

/// Pulls one labeled field out of a two-line key/value CSV.
fn csv_field(text: &str, column: &str) -> f64 {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().expect("header").split(',').collect();
    let row: Vec<&str> = lines.next().expect("data row").split(',').collect();
    let idx = header.iter().position(|h| *h == column).expect("column present");
    row[idx].parse().expect("numeric field")
}

#[test]
fn simulate_twice_with_one_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        run_ok(bin().args(["simulate", "--seed", "99", "--out"]).arg(out));
    }
    assert_eq!(read(&a.join("trials.csv")), read(&b.join("trials.csv")));
    let mut names: Vec<PathBuf> = fs::read_dir(a.join("traces"))
        .unwrap()
        .map(|e| e.unwrap().path().file_name().unwrap().into())
        .collect();
    names.sort();
    assert_eq!(names.len(), 36);
    for name in names {
        assert_eq!(
            read(&a.join("traces").join(&name)),
            read(&b.join("traces").join(&name)),
            "trace {name:?} differs between runs"
        );
    }
}

#[test]
fn calib_sim_screen_is_deterministic_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        run_ok(bin().args(["calib-sim", "--seed", "5", "--noise-px", "0.3", "--out"]).arg(out));
    }
    assert_eq!(read(&a), read(&b));
}

#[test]
fn noiseless_calibration_yields_the_full_fixation_bank() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ds.csv");
    run_ok(bin().args(["calib-sim", "--seed", "1", "--out"]).arg(&out));
    // 9 markers, 30-sample window per shrink stop.
    assert_eq!(read(&out).lines().count() - 1, 270);
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    assert_eq!(exit_code(bin().arg("frobnicate")), 2);
}

#[test]
fn missing_input_file_maps_to_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let code = exit_code(
        bin()
            .args(["fitts"])
            .arg(dir.path().join("nope.csv"))
            .args(["--out"])
            .arg(dir.path()),
    );
    assert_eq!(code, 3);
}

#[test]
fn malformed_record_maps_to_exit_four_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let trials = dir.path().join("trials.csv");
    let good = "trial,width_px,distance_px,repetition,angle_rad,modality,movement_time_ms,\
                missed,source_x_px,source_y_px,target_x_px,target_y_px,trace_file\n";
    fs::write(&trials, format!("{good}0,80,not-a-number,1,0,nonadaptive,500,false,0,0,1,1,t.csv\n"))
        .unwrap();
    let out = bin()
        .args(["fitts"])
        .arg(&trials)
        .args(["--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 2"), "stderr should name the offending line: {stderr}");
}

#[test]
fn out_of_range_parameter_maps_to_exit_five() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ds.csv");
    let code = exit_code(
        bin().args(["calib-sim", "--noise-px", "-1", "--out"]).arg(&out),
    );
    assert_eq!(code, 5);
    let code = exit_code(bin().args(["calib-sim", "--mode", "bogus", "--out"]).arg(&out));
    assert_eq!(code, 5);
}

#[test]
fn noiseless_operator_session_fits_with_perfect_correlation() {
    let dir = tempfile::tempdir().unwrap();
    let sess = dir.path().join("sess");
    run_ok(
        bin()
            .args(["simulate", "--seed", "4", "--mt-noise-ms", "0", "--jitter-px", "0"])
            .args(["--modality", "nonadaptive", "--out"])
            .arg(&sess),
    );
    run_ok(bin().args(["fitts"]).arg(sess.join("trials.csv")).args(["--out"]).arg(&sess));
    let fit = read(&sess.join("fit.csv"));
    let r = csv_field(&fit, "pearson_r");
    assert!((r - 1.0).abs() < 1e-9, "noiseless session should fit exactly, got r = {r}");
    assert_eq!(csv_field(&fit, "miss_rate"), 0.0);
}

#[test]
fn adaptive_replay_shortens_movement_times() {
    let dir = tempfile::tempdir().unwrap();
    let sess = dir.path().join("sess");
    run_ok(bin().args(["simulate", "--seed", "12", "--out"]).arg(&sess));
    for modality in ["nonadaptive", "adaptive"] {
        let out = dir.path().join(modality);
        run_ok(
            bin()
                .args(["fitts"])
                .arg(sess.join("trials.csv"))
                .args(["--modality", modality, "--out"])
                .arg(&out),
        );
    }
    let summary = |m: &str| read(&dir.path().join(m).join("summary.csv"));
    let mean_of = |text: &str| {
        let mut total = 0.0;
        let mut rows = 0.0;
        for line in text.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            total += cols[4].parse::<f64>().unwrap();
            rows += 1.0;
        }
        total / rows
    };
    let slow = mean_of(&summary("nonadaptive"));
    let fast = mean_of(&summary("adaptive"));
    assert!(fast < slow, "adaptive mean MT {fast} should undercut nonadaptive {slow}");
}

#[test]
fn pathmetrics_covers_every_trace_in_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let sess = dir.path().join("sess");
    run_ok(bin().args(["simulate", "--seed", "8", "--out"]).arg(&sess));
    run_ok(bin().args(["pathmetrics"]).arg(sess.join("trials.csv")));
    let metrics = read(&sess.join("metrics.csv"));
    assert_eq!(metrics.lines().count() - 1, 36);
    assert!(metrics.starts_with("trace_file,samples,mv,me,mo,odc,mdc,tac,re"));
}

#[test]
fn parameter_precedence_is_flag_env_then_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "samples_per_block = 4\n").unwrap();
    let out = dir.path().join("ds.csv");

    let rows = |env: Option<&str>, flag: Option<&str>| {
        let mut cmd = bin();
        cmd.args(["calib-sim", "--mode", "block", "--config"]).arg(&cfg);
        if let Some(v) = env {
            cmd.env("GAZEBENCH_SAMPLES_PER_BLOCK", v);
        }
        if let Some(v) = flag {
            cmd.args(["--samples-per-block", v]);
        }
        cmd.args(["--out"]).arg(&out);
        run_ok(&mut cmd);
        read(&out).lines().count() - 1
    };

    // 9 blocks, so rows = 9 * samples_per_block.
    assert_eq!(rows(None, None), 36);
    assert_eq!(rows(Some("2"), None), 18);
    assert_eq!(rows(Some("2"), Some("3")), 27);
}

#[test]
fn train_writes_a_deterministic_model() {
    let dir = tempfile::tempdir().unwrap();
    let ds = dir.path().join("ds.csv");
    run_ok(bin().args(["calib-sim", "--seed", "2", "--out"]).arg(&ds));
    let a = dir.path().join("a.model");
    let b = dir.path().join("b.model");
    for out in [&a, &b] {
        run_ok(
            bin()
                .args(["train"])
                .arg(&ds)
                .args(["--seed", "7", "--epochs", "60", "--out"])
                .arg(out),
        );
    }
    let text = read(&a);
    assert_eq!(text, read(&b));
    assert!(text.starts_with("gazebench-model v1"));
    gazebench::formats::model::parse_model(&text).expect("emitted model parses back");
}

#[test]
fn audit_reports_counts_and_histograms() {
    let dir = tempfile::tempdir().unwrap();
    let images = dir.path().join("frames");
    fs::create_dir_all(&images).unwrap();

    // Frame k owns the single record at pts k*1000 (after the first frame,
    // windows are half-open on the left). Record validity alternates in
    // pairs so categories come out 2 valid, 2 invalid.
    let mut gaze = Vec::new();
    let mut frames = Vec::new();
    for k in 0..4i64 {
        let valid = k < 2;
        gaze.push(RawGazeRecord {
            pts_us: k * 1000,
            gidx: k as u64,
            s: if valid { 0 } else { 4 },
            gp: valid.then_some([0.9, 0.9]),
            gd_l: None,
            gd_r: None,
            head: None,
        });
        let file = format!("f{k}.pgm");
        let level = if valid { 100 } else { 200 };
        let img = GrayImage::new(4, 4, level).unwrap();
        fs::write(images.join(&file), pgm::encode(&img)).unwrap();
        frames.push(FrameManifestEntry { pts_us: k * 1000, file });
    }
    let gaze_path = dir.path().join("gaze.jsonl");
    let frames_path = dir.path().join("frames.jsonl");
    fs::write(&gaze_path, write_gaze_stream(&gaze)).unwrap();
    fs::write(&frames_path, write_frame_manifest(&frames)).unwrap();

    let out = dir.path().join("audit");
    run_ok(
        bin()
            .args(["audit", "--gaze"])
            .arg(&gaze_path)
            .args(["--frames"])
            .arg(&frames_path)
            .args(["--images-dir"])
            .arg(&images)
            .args(["--out"])
            .arg(&out),
    );
    let report = read(&out.join("report.txt"));
    assert!(report.contains("category1 (valid gaze): 2"), "report was:\n{report}");
    assert!(report.contains("category2 (no gaze):    2"), "report was:\n{report}");
    let hist = read(&out.join("histograms.csv"));
    assert!(hist.lines().any(|l| l.starts_with("category1,")));
    assert!(hist.lines().any(|l| l.starts_with("category2,")));

    let svg = dir.path().join("hist.svg");
    run_ok(
        bin()
            .args(["plot", "--kind", "intensity-histogram", "--histograms"])
            .arg(out.join("histograms.csv"))
            .args(["--out"])
            .arg(&svg),
    );
    assert!(read(&svg).starts_with("<svg"));
}

#[test]
fn hough_measures_rendered_scenes() {
    let dir = tempfile::tempdir().unwrap();
    let params = SceneParams { noise_std: 2.0, seed: 31, ..SceneParams::default() };
    let gaze = Circle { cx_px: 140.0, cy_px: 120.0, r_px: 12.0 };
    let target = Circle { cx_px: 180.0, cy_px: 110.0, r_px: 55.0 };
    let scene = render_scene(&[gaze, target], &params).unwrap();
    let img_path = dir.path().join("scene.pgm");
    fs::write(&img_path, pgm::encode(&scene)).unwrap();

    let out = dir.path().join("measures.csv");
    run_ok(bin().args(["hough"]).arg(&img_path).args(["--out"]).arg(&out));
    let text = read(&out);
    let row = text.lines().nth(1).expect("one measurement row");
    let cols: Vec<&str> = row.split(',').collect();
    let gaze_r: f64 = cols[3].parse().unwrap();
    let target_r: f64 = cols[6].parse().unwrap();
    assert!((gaze_r - 12.0).abs() <= 2.0, "gaze radius {gaze_r}");
    assert!((target_r - 55.0).abs() <= 2.0, "target radius {target_r}");
    let euclid: f64 = cols[7].parse().unwrap();
    let truth = ((180.0f64 - 140.0).powi(2) + (110.0f64 - 120.0).powi(2)).sqrt();
    assert!((euclid - truth).abs() <= 3.0, "separation {euclid} vs {truth}");
}

#[test]
fn hough_emits_empty_cells_when_roles_are_missing() {
    let dir = tempfile::tempdir().unwrap();
    let img = GrayImage::new(64, 64, 220).unwrap();
    let img_path = dir.path().join("blank.pgm");
    fs::write(&img_path, pgm::encode(&img)).unwrap();
    let out = dir.path().join("measures.csv");
    run_ok(bin().args(["hough"]).arg(&img_path).args(["--out"]).arg(&out));
    let expected = measures_to_csv(&[MeasureRow {
        file: img_path.to_string_lossy().into_owned(),
        gaze: None,
        target: None,
        distance: None,
    }]);
    assert_eq!(read(&out), expected);
}

#[test]
fn plots_are_deterministic_and_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let sess = dir.path().join("sess");
    run_ok(bin().args(["simulate", "--seed", "21", "--out"]).arg(&sess));
    run_ok(bin().args(["pathmetrics"]).arg(sess.join("trials.csv")));

    let render = |kind: &str, out: &Path| {
        run_ok(
            bin()
                .args(["plot", "--kind", kind, "--trials"])
                .arg(sess.join("trials.csv"))
                .args(["--metrics"])
                .arg(sess.join("metrics.csv"))
                .args(["--out"])
                .arg(out),
        );
    };
    for kind in ["mt-vs-id", "metric-bars", "radial-stacked"] {
        let a = dir.path().join(format!("{kind}-a.svg"));
        let b = dir.path().join(format!("{kind}-b.svg"));
        render(kind, &a);
        render(kind, &b);
        let text = read(&a);
        assert_eq!(text, read(&b), "{kind} differs across runs");
        assert!(text.starts_with("<svg"), "{kind} is not an SVG");
        assert!(text.trim_end().ends_with("</svg>"), "{kind} is truncated");
    }
}

#[test]
fn plot_rejects_unknown_kind_with_parameter_error() {
    let dir = tempfile::tempdir().unwrap();
    let code = exit_code(
        bin().args(["plot", "--kind", "pie", "--out"]).arg(dir.path().join("x.svg")),
    );
    assert_eq!(code, 5);
}
