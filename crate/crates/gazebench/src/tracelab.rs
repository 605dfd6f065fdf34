//! Recording audit for wearable-tracker sessions: aligns the gaze stream
//! with the eye-camera frame stream, sorts frames into categories by the
//! validity of their gaze samples, groups the invalid samples into clusters,
//! and tests each cluster against a field-of-view boundary criterion.
//!
//! Stream alignment uses half-open windows on the presentation timestamps:
//! a gaze record with pts in `(frame[i-1].pts, frame[i].pts]` belongs to
//! frame `i`. The first frame owns only records stamped exactly at its own
//! pts; anything earlier is counted as unassigned, as is anything after the
//! last frame.
//!
//! A frame whose records all carry status zero is Category1 (clean), one
//! whose records are all non-zero is Category2 (no usable gaze), a mixture
//! is Mixed, and a frame with no records at all is Empty. Category2 records
//! with consecutive `gidx` values form one cluster; a cluster is flagged
//! when the valid records around it witness a gaze point near the edge of
//! the normalized field of view.

use crate::error::{Error, Result};
use crate::formats::records::{FrameManifestEntry, RawGazeRecord};

/// Per-frame classification after stream alignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameCategory {
    /// Every gaze record in the frame window is valid.
    Category1,
    /// Every gaze record in the frame window has a non-zero status.
    Category2,
    /// Both kinds present; excluded from the intensity analysis.
    Mixed,
    /// No gaze records fell in the frame window.
    Empty,
}

impl FrameCategory {
    pub fn as_str(&self) -> &'static str {
        match self {
            FrameCategory::Category1 => "category1",
            FrameCategory::Category2 => "category2",
            FrameCategory::Mixed => "mixed",
            FrameCategory::Empty => "empty",
        }
    }
}

/// One eye-camera frame with the gaze records that landed in its window.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncPair {
    pub frame: FrameManifestEntry,
    pub records: Vec<RawGazeRecord>,
}

/// Result of stream alignment, including the records no frame claimed.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncOutcome {
    pub pairs: Vec<SyncPair>,
    pub unassigned_before: usize,
    pub unassigned_after: usize,
}

/// Ingestion-time invariant counters. Violations are reported, never
/// dropped; the offending records stay in the stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StreamCheck {
    /// Records with a non-zero status whose gaze point is not pinned to
    /// the origin.
    pub nonzero_status_with_point: usize,
    /// Valid records that carry no gaze point at all.
    pub valid_without_point: usize,
    /// Positions where gidx stepped backwards.
    pub gidx_regressions: usize,
}

impl StreamCheck {
    pub fn total(&self) -> usize {
        self.nonzero_status_with_point + self.valid_without_point + self.gidx_regressions
    }
}

/// Counts invariant violations across a gaze stream.
pub fn validate_stream(records: &[RawGazeRecord]) -> StreamCheck {
    let mut check = StreamCheck::default();
    let mut prev_gidx: Option<u64> = None;
    for r in records {
        if r.s != 0 {
            if let Some(gp) = r.gp {
                if gp != [0.0, 0.0] {
                    check.nonzero_status_with_point += 1;
                }
            }
        } else if r.gp.is_none() {
            check.valid_without_point += 1;
        }
        if let Some(p) = prev_gidx {
            if r.gidx < p {
                check.gidx_regressions += 1;
            }
        }
        prev_gidx = Some(r.gidx);
    }
    check
}

fn check_sorted_pts<I: Iterator<Item = i64>>(mut pts: I, what: &str) -> Result<()> {
    let mut prev = match pts.next() {
        Some(p) => p,
        None => return Ok(()),
    };
    for p in pts {
        if p < prev {
            return Err(Error::InvalidInput(format!("{what} stream is not sorted by pts")));
        }
        prev = p;
    }
    Ok(())
}

/// Assigns each gaze record to the frame whose window contains its pts.
pub fn sync_streams(
    gaze: &[RawGazeRecord],
    frames: &[FrameManifestEntry],
) -> Result<SyncOutcome> {
    check_sorted_pts(gaze.iter().map(|r| r.pts_us), "gaze")?;
    check_sorted_pts(frames.iter().map(|f| f.pts_us), "frame")?;

    let mut pairs: Vec<SyncPair> = frames
        .iter()
        .map(|f| SyncPair { frame: f.clone(), records: Vec::new() })
        .collect();
    let mut before = 0usize;
    let mut after = 0usize;

    let mut fi = 0usize;
    for r in gaze {
        if frames.is_empty() || r.pts_us < frames[0].pts_us {
            before += 1;
            continue;
        }
        while fi < frames.len() && frames[fi].pts_us < r.pts_us {
            fi += 1;
        }
        if fi == frames.len() {
            after += 1;
            continue;
        }
        pairs[fi].records.push(r.clone());
    }

    Ok(SyncOutcome { pairs, unassigned_before: before, unassigned_after: after })
}

/// Classifies each synchronized frame by the statuses of its records.
pub fn categorize_frames(pairs: &[SyncPair]) -> Vec<FrameCategory> {
    pairs
        .iter()
        .map(|p| {
            if p.records.is_empty() {
                return FrameCategory::Empty;
            }
            let valid = p.records.iter().filter(|r| r.is_valid()).count();
            if valid == p.records.len() {
                FrameCategory::Category1
            } else if valid == 0 {
                FrameCategory::Category2
            } else {
                FrameCategory::Mixed
            }
        })
        .collect()
}

/// A maximal run of consecutive-gidx invalid records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cluster {
    pub first_gidx: u64,
    pub last_gidx: u64,
    /// Number of records in the run.
    pub members: usize,
    pub flagged: bool,
    /// How many boundary witnesses were actually available.
    pub boundary_used: usize,
}

/// Groups the gaze records of Category2 frames into clusters of consecutive
/// gidx values. Singleton clusters are allowed.
pub fn cluster_category2(
    pairs: &[SyncPair],
    categories: &[FrameCategory],
) -> Result<Vec<Cluster>> {
    if pairs.len() != categories.len() {
        return Err(Error::InvalidInput(
            "category list does not match the synchronized frames".into(),
        ));
    }
    let mut gidx: Vec<u64> = Vec::new();
    for (p, c) in pairs.iter().zip(categories) {
        if *c == FrameCategory::Category2 {
            gidx.extend(p.records.iter().map(|r| r.gidx));
        }
    }
    gidx.sort_unstable();

    let mut clusters = Vec::new();
    let mut i = 0usize;
    while i < gidx.len() {
        let first = gidx[i];
        let mut last = first;
        let mut members = 1usize;
        let mut j = i + 1;
        while j < gidx.len() && gidx[j] <= last + 1 {
            last = gidx[j];
            members += 1;
            j += 1;
        }
        clusters.push(Cluster { first_gidx: first, last_gidx: last, members, flagged: false, boundary_used: 0 });
        i = j;
    }
    Ok(clusters)
}

/// How a boundary witness is judged against the [lo, hi] band.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryRule {
    /// Either coordinate outside the band flags the cluster.
    EitherAxis,
    /// Both coordinates must be outside the band.
    BothAxes,
}

impl BoundaryRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            BoundaryRule::EitherAxis => "either-axis",
            BoundaryRule::BothAxes => "both-axes",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "either-axis" => Ok(BoundaryRule::EitherAxis),
            "both-axes" => Ok(BoundaryRule::BothAxes),
            other => Err(Error::InvalidInput(format!("unknown boundary rule `{other}`"))),
        }
    }
}

/// Parameters of the field-of-view boundary criterion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryParams {
    /// Valid records examined on each side of a cluster.
    pub count: usize,
    pub lo: f64,
    pub hi: f64,
    pub rule: BoundaryRule,
}

impl Default for BoundaryParams {
    fn default() -> Self {
        BoundaryParams { count: 3, lo: 0.2, hi: 0.8, rule: BoundaryRule::EitherAxis }
    }
}

impl BoundaryParams {
    fn validate(&self) -> Result<()> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo < self.hi) {
            return Err(Error::InvalidParams("boundary band must satisfy lo < hi".into()));
        }
        Ok(())
    }

    fn witnesses(&self, gp: [f64; 2]) -> bool {
        let x_out = gp[0] < self.lo || gp[0] > self.hi;
        let y_out = gp[1] < self.lo || gp[1] > self.hi;
        match self.rule {
            BoundaryRule::EitherAxis => x_out || y_out,
            BoundaryRule::BothAxes => x_out && y_out,
        }
    }
}

/// Applies the boundary criterion to each cluster: walk outward from the
/// cluster through the full stream, collect up to `count` valid records on
/// each side, and flag the cluster if any of them saw a gaze point outside
/// the band. Clusters at the stream edge simply have fewer witnesses.
pub fn flag_clusters(
    clusters: &mut [Cluster],
    stream: &[RawGazeRecord],
    params: &BoundaryParams,
) -> Result<()> {
    params.validate()?;
    for cluster in clusters.iter_mut() {
        let first = stream.iter().position(|r| r.gidx >= cluster.first_gidx);
        let last = stream.iter().rposition(|r| r.gidx <= cluster.last_gidx);
        let (first, last) = match (first, last) {
            (Some(a), Some(b)) if a <= b => (a, b),
            _ => {
                return Err(Error::InvalidInput(format!(
                    "cluster [{}..{}] not present in the stream",
                    cluster.first_gidx, cluster.last_gidx
                )))
            }
        };

        let mut flagged = false;
        let mut used = 0usize;
        let mut taken = 0usize;
        for r in stream[..first].iter().rev() {
            if taken == params.count {
                break;
            }
            if let (true, Some(gp)) = (r.is_valid(), r.gp) {
                taken += 1;
                used += 1;
                flagged |= params.witnesses(gp);
            }
        }
        taken = 0;
        for r in stream[last + 1..].iter() {
            if taken == params.count {
                break;
            }
            if let (true, Some(gp)) = (r.is_valid(), r.gp) {
                taken += 1;
                used += 1;
                flagged |= params.witnesses(gp);
            }
        }
        cluster.flagged = flagged;
        cluster.boundary_used = used;
    }
    Ok(())
}

/// Binned counts of mean frame intensities over [0, 255].
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityHistogram {
    pub counts: Vec<u64>,
    pub lo: f64,
    pub hi: f64,
}

impl IntensityHistogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }
}

/// Builds a histogram of intensity values on uniform bins over [0, 255].
pub fn intensity_histogram(values: &[f64], bins: usize) -> Result<IntensityHistogram> {
    if values.is_empty() {
        return Err(Error::EmptyData("histogram over zero frames".into()));
    }
    if bins == 0 {
        return Err(Error::InvalidParams("histogram needs at least one bin".into()));
    }
    let (lo, hi) = (0.0f64, 255.0f64);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins];
    for &v in values {
        if !v.is_finite() {
            return Err(Error::InvalidInput("non-finite intensity".into()));
        }
        let idx = (((v - lo) / width).floor() as isize).clamp(0, bins as isize - 1) as usize;
        counts[idx] += 1;
    }
    Ok(IntensityHistogram { counts, lo, hi })
}

/// Fraction of values strictly below the threshold.
pub fn fraction_below(values: &[f64], threshold: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyData("fraction over zero values".into()));
    }
    let below = values.iter().filter(|v| **v < threshold).count();
    Ok(below as f64 / values.len() as f64)
}

/// Settings for a whole-recording audit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditConfig {
    pub boundary: BoundaryParams,
    pub histogram_bins: usize,
    pub intensity_threshold: f64,
}

impl Default for AuditConfig {
    fn default() -> Self {
        AuditConfig {
            boundary: BoundaryParams::default(),
            histogram_bins: 32,
            intensity_threshold: 131.0,
        }
    }
}

/// Everything the audit produces for one recording.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub total_frames: usize,
    pub category1: usize,
    pub category2: usize,
    pub mixed: usize,
    pub empty: usize,
    pub total_gaze: usize,
    pub unassigned_before: usize,
    pub unassigned_after: usize,
    pub invariant_violations: usize,
    pub clusters: Vec<Cluster>,
    pub flagged_clusters: usize,
    pub intensity_threshold: f64,
    pub hist_category1: Option<IntensityHistogram>,
    pub hist_category2: Option<IntensityHistogram>,
    pub below_threshold_category1: Option<f64>,
    pub below_threshold_category2: Option<f64>,
    /// Min and max mean intensity among Category2 frames covered by
    /// flagged clusters.
    pub flagged_intensity_range: Option<(f64, f64)>,
}

impl AuditReport {
    pub fn category2_fraction(&self) -> f64 {
        if self.total_frames == 0 {
            0.0
        } else {
            self.category2 as f64 / self.total_frames as f64
        }
    }

    pub fn flagged_fraction(&self) -> f64 {
        if self.clusters.is_empty() {
            0.0
        } else {
            self.flagged_clusters as f64 / self.clusters.len() as f64
        }
    }

    /// Plain-text rendering, stable across runs for identical inputs.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let pct = |n: usize| {
            if self.total_frames == 0 {
                0.0
            } else {
                100.0 * n as f64 / self.total_frames as f64
            }
        };
        out.push_str("recording audit\n");
        out.push_str("===============\n");
        out.push_str(&format!("frames: {}\n", self.total_frames));
        out.push_str(&format!(
            "  category1 (valid gaze): {} ({:.2}%)\n",
            self.category1,
            pct(self.category1)
        ));
        out.push_str(&format!(
            "  category2 (no gaze):    {} ({:.2}%)\n",
            self.category2,
            pct(self.category2)
        ));
        out.push_str(&format!("  mixed:                  {} ({:.2}%)\n", self.mixed, pct(self.mixed)));
        out.push_str(&format!("  empty:                  {} ({:.2}%)\n", self.empty, pct(self.empty)));
        out.push_str(&format!(
            "gaze records: {} ({} before first frame, {} after last)\n",
            self.total_gaze, self.unassigned_before, self.unassigned_after
        ));
        out.push_str(&format!("invariant violations: {}\n", self.invariant_violations));
        out.push_str(&format!(
            "clusters: {} total, {} flagged by the boundary criterion ({:.2}%)\n",
            self.clusters.len(),
            self.flagged_clusters,
            100.0 * self.flagged_fraction()
        ));
        if let Some(f) = self.below_threshold_category1 {
            out.push_str(&format!(
                "category1 intensity below {:.1}: {:.2}%\n",
                self.intensity_threshold,
                100.0 * f
            ));
        }
        if let Some(f) = self.below_threshold_category2 {
            out.push_str(&format!(
                "category2 intensity below {:.1}: {:.2}%\n",
                self.intensity_threshold,
                100.0 * f
            ));
        }
        if let Some((lo, hi)) = self.flagged_intensity_range {
            out.push_str(&format!(
                "flagged-cluster frame intensity range: {:.2} to {:.2}\n",
                lo, hi
            ));
        }
        out
    }
}

/// Runs the whole audit pipeline. `intensities` is parallel to `frames`;
/// a `None` entry means the frame image was unavailable. Pass an empty
/// slice to skip the intensity analysis entirely.
pub fn audit_report(
    gaze: &[RawGazeRecord],
    frames: &[FrameManifestEntry],
    intensities: &[Option<f64>],
    cfg: &AuditConfig,
) -> Result<AuditReport> {
    if !intensities.is_empty() && intensities.len() != frames.len() {
        return Err(Error::InvalidInput(
            "intensity list does not match the frame manifest".into(),
        ));
    }
    let check = validate_stream(gaze);
    let sync = sync_streams(gaze, frames)?;
    let categories = categorize_frames(&sync.pairs);
    let mut clusters = cluster_category2(&sync.pairs, &categories)?;
    flag_clusters(&mut clusters, gaze, &cfg.boundary)?;
    let flagged_clusters = clusters.iter().filter(|c| c.flagged).count();

    let mut counts = [0usize; 4];
    for c in &categories {
        let slot = match c {
            FrameCategory::Category1 => 0,
            FrameCategory::Category2 => 1,
            FrameCategory::Mixed => 2,
            FrameCategory::Empty => 3,
        };
        counts[slot] += 1;
    }

    let collect = |want: FrameCategory| -> Vec<f64> {
        if intensities.is_empty() {
            return Vec::new();
        }
        categories
            .iter()
            .zip(intensities)
            .filter(|(c, _)| **c == want)
            .filter_map(|(_, v)| *v)
            .collect()
    };
    let cat1_vals = collect(FrameCategory::Category1);
    let cat2_vals = collect(FrameCategory::Category2);

    let hist_of = |vals: &[f64]| -> Result<Option<IntensityHistogram>> {
        if vals.is_empty() {
            Ok(None)
        } else {
            intensity_histogram(vals, cfg.histogram_bins).map(Some)
        }
    };
    let frac_of = |vals: &[f64]| -> Option<f64> {
        if vals.is_empty() {
            None
        } else {
            Some(fraction_below(vals, cfg.intensity_threshold).expect("non-empty"))
        }
    };

    let mut flagged_range: Option<(f64, f64)> = None;
    if !intensities.is_empty() {
        for (i, (pair, cat)) in sync.pairs.iter().zip(&categories).enumerate() {
            if *cat != FrameCategory::Category2 {
                continue;
            }
            let covered = pair.records.iter().any(|r| {
                clusters
                    .iter()
                    .any(|c| c.flagged && (c.first_gidx..=c.last_gidx).contains(&r.gidx))
            });
            if !covered {
                continue;
            }
            if let Some(v) = intensities[i] {
                flagged_range = Some(match flagged_range {
                    None => (v, v),
                    Some((lo, hi)) => (lo.min(v), hi.max(v)),
                });
            }
        }
    }

    Ok(AuditReport {
        total_frames: frames.len(),
        category1: counts[0],
        category2: counts[1],
        mixed: counts[2],
        empty: counts[3],
        total_gaze: gaze.len(),
        unassigned_before: sync.unassigned_before,
        unassigned_after: sync.unassigned_after,
        invariant_violations: check.total(),
        flagged_clusters,
        clusters,
        intensity_threshold: cfg.intensity_threshold,
        hist_category1: hist_of(&cat1_vals)?,
        hist_category2: hist_of(&cat2_vals)?,
        below_threshold_category1: frac_of(&cat1_vals),
        below_threshold_category2: frac_of(&cat2_vals),
        flagged_intensity_range: flagged_range,
    })
}
