//! CSV emission and ingestion for datasets, traces, trial manifests,
//! session summaries, efficiency metrics, histograms, and scene
//! measurements. Every file carries a header row; floats are written with
//! 17 significant digits so a parse of our own output is bit-exact.

use super::fmt_f64;
use crate::calib::{CalibrationDataset, DatasetTargets};
use crate::error::{Error, Result};
use crate::fitts::{Modality, SessionSummary, TrialResult, TrialSpec};
use crate::houghvision::{Circle, DistanceResult};
use crate::pathmetrics::{EfficiencyReport, PathSample};
use crate::tracelab::IntensityHistogram;

fn write_rows(rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
}

fn read_rows(text: &str, header: &[&str]) -> Result<Vec<(usize, Vec<String>)>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| Error::parse(line, format!("bad csv record: {e}")))?;
        rows.push((line, rec.iter().map(str::to_owned).collect::<Vec<_>>()));
    }
    let (first_line, first) = rows
        .first()
        .ok_or_else(|| Error::EmptyData("csv file has no header row".into()))?;
    if first != header {
        return Err(Error::parse(
            *first_line,
            format!("header mismatch: expected `{}`, got `{}`", header.join(","), first.join(",")),
        ));
    }
    Ok(rows.split_off(1))
}

fn field<'a>(row: &'a [String], idx: usize, line: usize, name: &str) -> Result<&'a str> {
    row.get(idx)
        .map(String::as_str)
        .ok_or_else(|| Error::parse(line, format!("missing field `{name}`")))
}

fn f64_field(row: &[String], idx: usize, line: usize, name: &str) -> Result<f64> {
    let raw = field(row, idx, line, name)?;
    let v: f64 = raw
        .parse()
        .map_err(|_| Error::parse(line, format!("field `{name}` is not a number: `{raw}`")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("field `{name}` is not finite")));
    }
    Ok(v)
}

fn usize_field(row: &[String], idx: usize, line: usize, name: &str) -> Result<usize> {
    let raw = field(row, idx, line, name)?;
    raw.parse()
        .map_err(|_| Error::parse(line, format!("field `{name}` is not an integer: `{raw}`")))
}

/// Serializes a calibration dataset. Inputs become `in_0..in_{d-1}`;
/// screen targets add `target_x_px,target_y_px`, block labels add `label`.
pub fn dataset_to_csv(data: &CalibrationDataset) -> String {
    let d = data.input_dim();
    let mut header: Vec<String> = (0..d).map(|i| format!("in_{i}")).collect();
    match data.targets() {
        DatasetTargets::Screen(_) => {
            header.push("target_x_px".into());
            header.push("target_y_px".into());
        }
        DatasetTargets::Block(_) => header.push("label".into()),
    }
    let mut rows = vec![header];
    for (i, input) in data.inputs().iter().enumerate() {
        let mut row: Vec<String> = input.iter().map(|v| fmt_f64(*v)).collect();
        match data.targets() {
            DatasetTargets::Screen(t) => {
                row.push(fmt_f64(t[i][0]));
                row.push(fmt_f64(t[i][1]));
            }
            DatasetTargets::Block(t) => row.push(t[i].to_string()),
        }
        rows.push(row);
    }
    write_rows(rows)
}

/// Parses a dataset emitted by [`dataset_to_csv`], inferring the target
/// kind from the header.
pub fn dataset_from_csv(text: &str) -> Result<CalibrationDataset> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| Error::parse(i + 1, format!("bad csv record: {e}")))?;
        rows.push(rec.iter().map(str::to_owned).collect::<Vec<String>>());
    }
    if rows.is_empty() {
        return Err(Error::EmptyData("dataset csv has no header row".into()));
    }
    let header = rows.remove(0);
    let screen = header.ends_with(&["target_x_px".into(), "target_y_px".into()]);
    let block = header.last().map(String::as_str) == Some("label");
    let target_cols = if screen { 2 } else { 1 };
    if !screen && !block || header.len() <= target_cols {
        return Err(Error::parse(1, format!("unrecognized dataset header `{}`", header.join(","))));
    }
    let d = header.len() - target_cols;
    for (i, name) in header.iter().take(d).enumerate() {
        if name != &format!("in_{i}") {
            return Err(Error::parse(1, format!("expected input column `in_{i}`, got `{name}`")));
        }
    }

    let mut data =
        if screen { CalibrationDataset::new_screen(d) } else { CalibrationDataset::new_block(d) };
    for (i, row) in rows.iter().enumerate() {
        let line = i + 2;
        if row.len() != header.len() {
            return Err(Error::parse(
                line,
                format!("expected {} fields, got {}", header.len(), row.len()),
            ));
        }
        let mut input = Vec::with_capacity(d);
        for c in 0..d {
            input.push(f64_field(row, c, line, &format!("in_{c}"))?);
        }
        if screen {
            let x = f64_field(row, d, line, "target_x_px")?;
            let y = f64_field(row, d + 1, line, "target_y_px")?;
            data.push_screen(input, [x, y])
                .map_err(|e| Error::parse(line, e.to_string()))?;
        } else {
            let raw = field(row, d, line, "label")?;
            let label: u8 = raw
                .parse()
                .map_err(|_| Error::parse(line, format!("label is not a small integer: `{raw}`")))?;
            data.push_block(input, label).map_err(|e| Error::parse(line, e.to_string()))?;
        }
    }
    Ok(data)
}

const TRACE_HEADER: [&str; 3] = ["t_ms", "x_px", "y_px"];

/// Serializes one cursor trace.
pub fn trace_to_csv(trace: &[PathSample]) -> String {
    let mut rows = vec![TRACE_HEADER.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    for p in trace {
        rows.push(vec![fmt_f64(p.t_ms), fmt_f64(p.x_px), fmt_f64(p.y_px)]);
    }
    write_rows(rows)
}

/// Parses a trace emitted by [`trace_to_csv`]; the round trip is bit-exact.
pub fn trace_from_csv(text: &str) -> Result<Vec<PathSample>> {
    let rows = read_rows(text, &TRACE_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        out.push(PathSample {
            t_ms: f64_field(&row, 0, line, "t_ms")?,
            x_px: f64_field(&row, 1, line, "x_px")?,
            y_px: f64_field(&row, 2, line, "y_px")?,
        });
    }
    Ok(out)
}

/// One line of a session's trial manifest: everything about the trial
/// except the trace itself, which lives in `trace_file`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub index: usize,
    pub spec: TrialSpec,
    pub movement_time_ms: f64,
    pub missed: bool,
    pub source_px: [f64; 2],
    pub target_px: [f64; 2],
    pub trace_file: String,
}

impl TrialRow {
    pub fn from_result(index: usize, r: &TrialResult, trace_file: String) -> Self {
        TrialRow {
            index,
            spec: r.spec,
            movement_time_ms: r.movement_time_ms,
            missed: r.missed,
            source_px: r.source_px,
            target_px: r.target_px,
            trace_file,
        }
    }

    /// Rebuilds a result with the supplied trace samples.
    pub fn into_result(self, trace: Vec<PathSample>) -> TrialResult {
        TrialResult {
            spec: self.spec,
            movement_time_ms: self.movement_time_ms,
            missed: self.missed,
            source_px: self.source_px,
            target_px: self.target_px,
            trace,
        }
    }
}

const TRIALS_HEADER: [&str; 13] = [
    "trial",
    "width_px",
    "distance_px",
    "repetition",
    "angle_rad",
    "modality",
    "movement_time_ms",
    "missed",
    "source_x_px",
    "source_y_px",
    "target_x_px",
    "target_y_px",
    "trace_file",
];

/// Serializes a session's trial manifest.
pub fn trials_to_csv(rows: &[TrialRow]) -> String {
    let mut out = vec![TRIALS_HEADER.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    for r in rows {
        out.push(vec![
            r.index.to_string(),
            fmt_f64(r.spec.width_px),
            fmt_f64(r.spec.distance_px),
            r.spec.repetition.to_string(),
            fmt_f64(r.spec.angle_rad),
            r.spec.modality.as_str().to_string(),
            fmt_f64(r.movement_time_ms),
            r.missed.to_string(),
            fmt_f64(r.source_px[0]),
            fmt_f64(r.source_px[1]),
            fmt_f64(r.target_px[0]),
            fmt_f64(r.target_px[1]),
            r.trace_file.clone(),
        ]);
    }
    write_rows(out)
}

/// Parses a trial manifest emitted by [`trials_to_csv`].
pub fn trials_from_csv(text: &str) -> Result<Vec<TrialRow>> {
    let rows = read_rows(text, &TRIALS_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        let missed_raw = field(&row, 7, line, "missed")?;
        let missed = match missed_raw {
            "true" => true,
            "false" => false,
            other => {
                return Err(Error::parse(line, format!("missed must be true or false, got `{other}`")))
            }
        };
        let repetition = usize_field(&row, 3, line, "repetition")? as u32;
        out.push(TrialRow {
            index: usize_field(&row, 0, line, "trial")?,
            spec: TrialSpec {
                width_px: f64_field(&row, 1, line, "width_px")?,
                distance_px: f64_field(&row, 2, line, "distance_px")?,
                repetition,
                angle_rad: f64_field(&row, 4, line, "angle_rad")?,
                modality: Modality::parse(field(&row, 5, line, "modality")?)
                    .map_err(|e| Error::parse(line, e.to_string()))?,
            },
            movement_time_ms: f64_field(&row, 6, line, "movement_time_ms")?,
            missed,
            source_px: [
                f64_field(&row, 8, line, "source_x_px")?,
                f64_field(&row, 9, line, "source_y_px")?,
            ],
            target_px: [
                f64_field(&row, 10, line, "target_x_px")?,
                f64_field(&row, 11, line, "target_y_px")?,
            ],
            trace_file: field(&row, 12, line, "trace_file")?.to_string(),
        });
    }
    Ok(out)
}

/// Serializes the per-condition rows of a session summary.
pub fn summary_to_csv(summary: &SessionSummary) -> String {
    let mut rows = vec![vec![
        "width_px".to_string(),
        "distance_px".to_string(),
        "id_bits".to_string(),
        "trials".to_string(),
        "mean_mt_ms".to_string(),
        "throughput_bits_s".to_string(),
    ]];
    for c in &summary.conditions {
        rows.push(vec![
            fmt_f64(c.width_px),
            fmt_f64(c.distance_px),
            fmt_f64(c.id_bits),
            c.trials.to_string(),
            fmt_f64(c.mean_mt_ms),
            fmt_f64(c.throughput_bits_s),
        ]);
    }
    write_rows(rows)
}

/// Serializes the trial-level regression of a session summary.
pub fn fit_to_csv(summary: &SessionSummary) -> String {
    write_rows(vec![
        vec![
            "slope_ms_per_bit".to_string(),
            "intercept_ms".to_string(),
            "pearson_r".to_string(),
            "trials".to_string(),
            "miss_rate".to_string(),
        ],
        vec![
            fmt_f64(summary.slope_ms_per_bit),
            fmt_f64(summary.intercept_ms),
            fmt_f64(summary.pearson_r),
            summary.trial_count.to_string(),
            fmt_f64(summary.miss_rate),
        ],
    ])
}

/// Efficiency metrics of one trace file.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub trace_file: String,
    pub samples: usize,
    pub report: EfficiencyReport,
}

const METRICS_HEADER: [&str; 9] =
    ["trace_file", "samples", "mv", "me", "mo", "odc", "mdc", "tac", "re"];

/// Serializes per-trace efficiency metrics.
pub fn metrics_to_csv(rows: &[MetricsRow]) -> String {
    let mut out = vec![METRICS_HEADER.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    for r in rows {
        out.push(vec![
            r.trace_file.clone(),
            r.samples.to_string(),
            fmt_f64(r.report.mv),
            fmt_f64(r.report.me),
            fmt_f64(r.report.mo),
            r.report.odc.to_string(),
            r.report.mdc.to_string(),
            r.report.tac.to_string(),
            r.report.re.to_string(),
        ]);
    }
    write_rows(out)
}

/// Parses metrics emitted by [`metrics_to_csv`].
pub fn metrics_from_csv(text: &str) -> Result<Vec<MetricsRow>> {
    let rows = read_rows(text, &METRICS_HEADER)?;
    let mut out = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        out.push(MetricsRow {
            trace_file: field(&row, 0, line, "trace_file")?.to_string(),
            samples: usize_field(&row, 1, line, "samples")?,
            report: EfficiencyReport {
                mv: f64_field(&row, 2, line, "mv")?,
                me: f64_field(&row, 3, line, "me")?,
                mo: f64_field(&row, 4, line, "mo")?,
                odc: usize_field(&row, 5, line, "odc")? as u32,
                mdc: usize_field(&row, 6, line, "mdc")? as u32,
                tac: usize_field(&row, 7, line, "tac")? as u32,
                re: usize_field(&row, 8, line, "re")? as u32,
            },
        });
    }
    Ok(out)
}

const HISTOGRAM_HEADER: [&str; 4] = ["category", "bin_lo", "bin_hi", "count"];

/// Serializes labeled intensity histograms, one row per bin.
pub fn histograms_to_csv(series: &[(&str, &IntensityHistogram)]) -> String {
    let mut rows = vec![HISTOGRAM_HEADER.iter().map(|s| s.to_string()).collect::<Vec<_>>()];
    for (label, hist) in series {
        let width = hist.bin_width();
        for (i, count) in hist.counts.iter().enumerate() {
            rows.push(vec![
                label.to_string(),
                fmt_f64(hist.lo + width * i as f64),
                fmt_f64(hist.lo + width * (i + 1) as f64),
                count.to_string(),
            ]);
        }
    }
    write_rows(rows)
}

/// Parses histograms emitted by [`histograms_to_csv`], grouped by label in
/// first-seen order.
pub fn histograms_from_csv(text: &str) -> Result<Vec<(String, IntensityHistogram)>> {
    let rows = read_rows(text, &HISTOGRAM_HEADER)?;
    let mut out: Vec<(String, IntensityHistogram, f64)> = Vec::new();
    for (line, row) in rows {
        let label = field(&row, 0, line, "category")?.to_string();
        let lo = f64_field(&row, 1, line, "bin_lo")?;
        let hi = f64_field(&row, 2, line, "bin_hi")?;
        let count = usize_field(&row, 3, line, "count")? as u64;
        match out.iter_mut().find(|(l, _, _)| *l == label) {
            Some((_, hist, last_hi)) => {
                if (lo - *last_hi).abs() > 1e-9 {
                    return Err(Error::parse(line, format!("bins of `{label}` are not contiguous")));
                }
                hist.counts.push(count);
                hist.hi = hi;
                *last_hi = hi;
            }
            None => {
                out.push((label, IntensityHistogram { counts: vec![count], lo, hi }, hi));
            }
        }
    }
    Ok(out.into_iter().map(|(l, h, _)| (l, h)).collect())
}

/// Scene measurement of one image: detected roles and their separation.
/// Missing roles leave their fields empty.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureRow {
    pub file: String,
    pub gaze: Option<Circle>,
    pub target: Option<Circle>,
    pub distance: Option<DistanceResult>,
}

/// Serializes per-image scene measurements.
pub fn measures_to_csv(rows: &[MeasureRow]) -> String {
    let mut out = vec![vec![
        "file".to_string(),
        "gaze_cx_px".to_string(),
        "gaze_cy_px".to_string(),
        "gaze_r_px".to_string(),
        "target_cx_px".to_string(),
        "target_cy_px".to_string(),
        "target_r_px".to_string(),
        "euclid_px".to_string(),
        "manhattan_px".to_string(),
        "euclid_cm".to_string(),
        "visual_angle_deg".to_string(),
    ]];
    let circle_cells = |c: &Option<Circle>| match c {
        Some(c) => vec![fmt_f64(c.cx_px), fmt_f64(c.cy_px), fmt_f64(c.r_px)],
        None => vec![String::new(), String::new(), String::new()],
    };
    for r in rows {
        let mut row = vec![r.file.clone()];
        row.extend(circle_cells(&r.gaze));
        row.extend(circle_cells(&r.target));
        match &r.distance {
            Some(d) => {
                row.push(fmt_f64(d.euclid_px));
                row.push(fmt_f64(d.manhattan_px));
                row.push(fmt_f64(d.euclid_cm));
                row.push(fmt_f64(d.visual_angle_deg));
            }
            None => row.extend(std::iter::repeat(String::new()).take(4)),
        }
        out.push(row);
    }
    write_rows(out)
}
