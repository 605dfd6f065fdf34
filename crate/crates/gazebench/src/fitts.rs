//! Pointing-study harness: trial generation, a synthetic operator that
//! produces believable cursor traces, session summaries, and the small
//! statistics the write-ups need.
//!
//! The task set crosses three target widths with three distances on a fixed
//! grid, two repetitions each, eighteen trials per session. Movement time
//! for the synthetic operator follows `MT = a + b * ID + noise` with the
//! index of difficulty `ID = log2(D / W + 1)`; the trace behind each trial
//! is a minimum-jerk transport to the target followed by a damped homing
//! oscillation, with optional cross-axis jitter.
//!
//! Replaying a recorded trace through the nearest-target rule gives the
//! adaptive variant of the same trial: selection happens the moment the
//! intended target becomes the closest one, not when the cursor finally
//! settles inside it.

use crate::cursor::{nearest_target, Target, TargetLayout};
use crate::error::{Error, Result};
use crate::pathmetrics::PathSample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// How the selection was driven.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    /// Plain cursor: the trial ends when the operator clicks.
    NonAdaptive,
    /// Nearest-target activation applied to the same trace.
    Adaptive,
}

impl Modality {
    pub fn as_str(&self) -> &'static str {
        match self {
            Modality::NonAdaptive => "nonadaptive",
            Modality::Adaptive => "adaptive",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "nonadaptive" => Ok(Modality::NonAdaptive),
            "adaptive" => Ok(Modality::Adaptive),
            other => Err(Error::InvalidInput(format!("unknown modality `{other}`"))),
        }
    }
}

/// Target widths of the standard session, px.
pub const ISO_WIDTHS_PX: [f64; 3] = [70.0, 80.0, 90.0];
/// Movement distances of the standard session, px.
pub const ISO_DISTANCES_PX: [f64; 3] = [200.0, 220.0, 240.0];
/// Repetitions of each width-distance pair per session.
pub const ISO_REPETITIONS: u32 = 2;

/// One pointing task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialSpec {
    pub width_px: f64,
    pub distance_px: f64,
    pub repetition: u32,
    /// Direction from the start button to the target.
    pub angle_rad: f64,
    pub modality: Modality,
}

/// Index of difficulty in bits.
pub fn index_of_difficulty(distance_px: f64, width_px: f64) -> Result<f64> {
    if !(distance_px.is_finite() && distance_px > 0.0) {
        return Err(Error::InvalidParams("distance must be positive".into()));
    }
    if !(width_px.is_finite() && width_px > 0.0) {
        return Err(Error::InvalidParams("width must be positive".into()));
    }
    Ok((distance_px / width_px + 1.0).log2())
}

/// Throughput in bits per second from an ID in bits and a movement time in
/// seconds.
pub fn throughput(id_bits: f64, mt_s: f64) -> Result<f64> {
    if !(id_bits.is_finite() && id_bits >= 0.0) {
        return Err(Error::InvalidParams("index of difficulty must be non-negative".into()));
    }
    if !(mt_s.is_finite() && mt_s > 0.0) {
        return Err(Error::InvalidParams("movement time must be positive".into()));
    }
    Ok(id_bits / mt_s)
}

/// Builds one session: every width-distance pair twice, in seeded shuffled
/// order, each trial pointing in its own random direction.
pub fn generate_trial_sequence(seed: u64) -> Vec<TrialSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials = Vec::with_capacity(ISO_WIDTHS_PX.len() * ISO_DISTANCES_PX.len() * 2);
    for rep in 0..ISO_REPETITIONS {
        for &w in &ISO_WIDTHS_PX {
            for &d in &ISO_DISTANCES_PX {
                trials.push(TrialSpec {
                    width_px: w,
                    distance_px: d,
                    repetition: rep,
                    angle_rad: 0.0,
                    modality: Modality::NonAdaptive,
                });
            }
        }
    }
    use rand::seq::SliceRandom;
    trials.shuffle(&mut rng);
    for t in &mut trials {
        t.angle_rad = rng.random_range(0.0..std::f64::consts::TAU);
    }
    trials
}

/// Alternative task set for close-up transport work: widths from 1.9 cm
/// down to 0.9 cm in 0.2 cm steps, distances of 5 and 8 cm, two repetitions.
pub fn transport_trial_set(px_per_cm: f64, seed: u64) -> Result<Vec<TrialSpec>> {
    if !(px_per_cm.is_finite() && px_per_cm > 0.0) {
        return Err(Error::InvalidParams("px_per_cm must be positive".into()));
    }
    let widths_cm = [1.9, 1.7, 1.5, 1.3, 1.1, 0.9];
    let distances_cm = [5.0, 8.0];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut trials = Vec::new();
    for rep in 0..2u32 {
        for &w in &widths_cm {
            for &d in &distances_cm {
                trials.push(TrialSpec {
                    width_px: w * px_per_cm,
                    distance_px: d * px_per_cm,
                    repetition: rep,
                    angle_rad: 0.0,
                    modality: Modality::NonAdaptive,
                });
            }
        }
    }
    use rand::seq::SliceRandom;
    trials.shuffle(&mut rng);
    for t in &mut trials {
        t.angle_rad = rng.random_range(0.0..std::f64::consts::TAU);
    }
    Ok(trials)
}

/// Synthetic operator parameters. Movement time is `intercept + slope * ID`
/// plus Gaussian noise; the trace spends `transport_intercept_ms +
/// transport_ms_per_px * D` on a minimum-jerk reach and the rest settling
/// onto the target with a damped overshoot proportional to target width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OperatorModel {
    pub intercept_ms: f64,
    pub slope_ms_per_bit: f64,
    pub mt_noise_ms: f64,
    /// Cross-axis tremor per sample, px.
    pub jitter_px: f64,
    pub sample_hz: f64,
    pub transport_intercept_ms: f64,
    pub transport_ms_per_px: f64,
    /// Along-axis click scatter as a fraction of target width.
    pub click_spread_frac: f64,
    /// Where every trial starts.
    pub source_px: [f64; 2],
}

impl Default for OperatorModel {
    fn default() -> Self {
        OperatorModel {
            intercept_ms: 400.0,
            slope_ms_per_bit: 900.0,
            mt_noise_ms: 120.0,
            jitter_px: 6.0,
            sample_hz: 100.0,
            transport_intercept_ms: 300.0,
            transport_ms_per_px: 1.0,
            click_spread_frac: 0.2,
            source_px: [400.0, 300.0],
        }
    }
}

impl OperatorModel {
    /// The same operator with every stochastic term switched off.
    pub fn noiseless() -> Self {
        OperatorModel {
            mt_noise_ms: 0.0,
            jitter_px: 0.0,
            click_spread_frac: 0.0,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.intercept_ms.is_finite() && self.intercept_ms >= 0.0) {
            return Err(Error::InvalidParams("intercept must be non-negative".into()));
        }
        if !(self.slope_ms_per_bit.is_finite() && self.slope_ms_per_bit > 0.0) {
            return Err(Error::InvalidParams("slope must be positive".into()));
        }
        if !(self.mt_noise_ms.is_finite() && self.mt_noise_ms >= 0.0) {
            return Err(Error::InvalidParams("MT noise must be non-negative".into()));
        }
        if !(self.jitter_px.is_finite() && self.jitter_px >= 0.0) {
            return Err(Error::InvalidParams("jitter must be non-negative".into()));
        }
        if !(self.sample_hz.is_finite() && self.sample_hz > 0.0) {
            return Err(Error::InvalidParams("sample rate must be positive".into()));
        }
        if !(self.transport_intercept_ms >= 0.0 && self.transport_ms_per_px >= 0.0) {
            return Err(Error::InvalidParams("transport timing must be non-negative".into()));
        }
        if !(self.click_spread_frac.is_finite() && self.click_spread_frac >= 0.0) {
            return Err(Error::InvalidParams("click spread must be non-negative".into()));
        }
        Ok(())
    }
}

/// One executed trial: the clock, the click outcome, and the full trace.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub spec: TrialSpec,
    pub movement_time_ms: f64,
    pub missed: bool,
    pub source_px: [f64; 2],
    pub target_px: [f64; 2],
    pub trace: Vec<PathSample>,
}

fn min_jerk(progress: f64) -> f64 {
    let t = progress.clamp(0.0, 1.0);
    t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
}

/// Runs the synthetic operator through one trial.
pub fn synthesize_trace(op: &OperatorModel, trial: &TrialSpec, seed: u64) -> Result<TrialResult> {
    op.validate()?;
    let id_bits = index_of_difficulty(trial.distance_px, trial.width_px)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let noise = if op.mt_noise_ms > 0.0 {
        Normal::new(0.0, op.mt_noise_ms)
            .map_err(|e| Error::InvalidParams(format!("MT noise: {e}")))?
            .sample(&mut rng)
    } else {
        0.0
    };
    let transport_ms = op.transport_intercept_ms + op.transport_ms_per_px * trial.distance_px;
    let dt_ms = 1000.0 / op.sample_hz;
    let mt_ms = (op.intercept_ms + op.slope_ms_per_bit * id_bits + noise)
        .max(transport_ms + 5.0 * dt_ms);

    let dir = [trial.angle_rad.cos(), trial.angle_rad.sin()];
    let ortho = [-dir[1], dir[0]];
    let target = [
        op.source_px[0] + trial.distance_px * dir[0],
        op.source_px[1] + trial.distance_px * dir[1],
    ];

    let jitter = if op.jitter_px > 0.0 {
        Some(
            Normal::new(0.0, op.jitter_px)
                .map_err(|e| Error::InvalidParams(format!("jitter: {e}")))?,
        )
    } else {
        None
    };

    let mut trace = Vec::new();
    let settle_ms = mt_ms - transport_ms;
    let overshoot = 0.8 * trial.width_px;
    let mut t_ms = 0.0;
    while t_ms < mt_ms {
        let along = if t_ms <= transport_ms {
            trial.distance_px * min_jerk(t_ms / transport_ms)
        } else {
            let u = (t_ms - transport_ms) / settle_ms;
            trial.distance_px
                + overshoot * (-4.0 * u).exp() * (std::f64::consts::TAU * 3.0 * u).sin()
        };
        let across = match &jitter {
            Some(d) => d.sample(&mut rng),
            None => 0.0,
        };
        trace.push(PathSample {
            t_ms,
            x_px: op.source_px[0] + along * dir[0] + across * ortho[0],
            y_px: op.source_px[1] + along * dir[1] + across * ortho[1],
        });
        t_ms += dt_ms;
    }

    // The final sample is the click itself: scattered along the axis in
    // proportion to target width, and across it only by the tremor term.
    let click_along = if op.click_spread_frac > 0.0 {
        Normal::new(0.0, op.click_spread_frac * trial.width_px)
            .map_err(|e| Error::InvalidParams(format!("click spread: {e}")))?
            .sample(&mut rng)
    } else {
        0.0
    };
    let click_across = match &jitter {
        Some(d) => d.sample(&mut rng),
        None => 0.0,
    };
    let click = [
        target[0] + click_along * dir[0] + click_across * ortho[0],
        target[1] + click_along * dir[1] + click_across * ortho[1],
    ];
    trace.push(PathSample { t_ms: mt_ms, x_px: click[0], y_px: click[1] });

    let miss_dist =
        ((click[0] - target[0]).powi(2) + (click[1] - target[1]).powi(2)).sqrt();
    Ok(TrialResult {
        spec: *trial,
        movement_time_ms: mt_ms,
        missed: miss_dist > trial.width_px / 2.0,
        source_px: op.source_px,
        target_px: target,
        trace,
    })
}

/// Start button and target of a recorded trial as a two-target layout,
/// ids 0 and 1.
pub fn trial_layout(result: &TrialResult) -> Result<TargetLayout> {
    TargetLayout::new(vec![
        Target { id: 0, center_px: result.source_px, width_px: result.spec.width_px },
        Target { id: 1, center_px: result.target_px, width_px: result.spec.width_px },
    ])
}

/// Replays a recorded trace under nearest-target activation: the trial ends
/// at the first sample where the intended target is the closest one. The
/// returned result carries the truncated trace, the new movement time, and
/// the adaptive modality tag.
pub fn replay_adaptive(result: &TrialResult, snap_radius_px: f64) -> Result<TrialResult> {
    if result.trace.is_empty() {
        return Err(Error::EmptyData("cannot replay an empty trace".into()));
    }
    let layout = trial_layout(result)?;
    let mut out = result.clone();
    out.spec.modality = Modality::Adaptive;
    for (i, p) in result.trace.iter().enumerate() {
        if nearest_target([p.x_px, p.y_px], &layout, snap_radius_px) == Some(1) {
            out.movement_time_ms = p.t_ms;
            out.trace = result.trace[..=i].to_vec();
            out.missed = false;
            return Ok(out);
        }
    }
    Err(Error::InvalidInput(
        "trace never brought the intended target into snap range".into(),
    ))
}

/// Per-condition row of a session summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionSummary {
    pub width_px: f64,
    pub distance_px: f64,
    pub id_bits: f64,
    pub trials: usize,
    pub mean_mt_ms: f64,
    pub throughput_bits_s: f64,
}

/// Whole-session summary: one row per width-distance pair plus the MT-on-ID
/// regression over individual trials.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionSummary {
    pub conditions: Vec<ConditionSummary>,
    pub slope_ms_per_bit: f64,
    pub intercept_ms: f64,
    pub pearson_r: f64,
    pub trial_count: usize,
    pub miss_rate: f64,
}

/// Pearson correlation coefficient.
pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidInput("correlation inputs differ in length".into()));
    }
    let n = xs.len();
    if n < 2 {
        return Err(Error::Undefined("correlation needs at least 2 points".into()));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Undefined("correlation needs variance on both sides".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Least-squares line `y = intercept + slope * x`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Undefined("line fit needs at least 2 paired points".into()));
    }
    let nf = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if sxx == 0.0 {
        return Err(Error::Undefined("line fit needs variance in x".into()));
    }
    let slope = sxy / sxx;
    Ok((my - slope * mx, slope))
}

/// Summarises a batch of executed trials: per-condition means and
/// throughput, plus the trial-level MT-on-ID line and correlation.
pub fn summarize_session(results: &[TrialResult]) -> Result<SessionSummary> {
    if results.is_empty() {
        return Err(Error::EmptyData("summary over zero trials".into()));
    }
    let mut ids = Vec::with_capacity(results.len());
    let mut mts = Vec::with_capacity(results.len());
    let mut misses = 0usize;
    for r in results {
        ids.push(index_of_difficulty(r.spec.distance_px, r.spec.width_px)?);
        mts.push(r.movement_time_ms);
        if r.missed {
            misses += 1;
        }
    }

    let mut keys: Vec<(u64, u64)> = results
        .iter()
        .map(|r| (r.spec.width_px.to_bits(), r.spec.distance_px.to_bits()))
        .collect();
    keys.sort_unstable();
    keys.dedup();

    let mut conditions = Vec::with_capacity(keys.len());
    for (wb, db) in keys {
        let (w, d) = (f64::from_bits(wb), f64::from_bits(db));
        let mut sum = 0.0;
        let mut count = 0usize;
        for r in results {
            if r.spec.width_px == w && r.spec.distance_px == d {
                sum += r.movement_time_ms;
                count += 1;
            }
        }
        let mean_mt_ms = sum / count as f64;
        let id_bits = index_of_difficulty(d, w)?;
        conditions.push(ConditionSummary {
            width_px: w,
            distance_px: d,
            id_bits,
            trials: count,
            mean_mt_ms,
            throughput_bits_s: throughput(id_bits, mean_mt_ms / 1000.0)?,
        });
    }
    conditions.sort_by(|a, b| {
        (a.id_bits, a.width_px)
            .partial_cmp(&(b.id_bits, b.width_px))
            .expect("ids are finite")
    });

    let (intercept_ms, slope_ms_per_bit) = fit_line(&ids, &mts)?;
    let r = pearson_r(&ids, &mts)?;
    Ok(SessionSummary {
        conditions,
        slope_ms_per_bit,
        intercept_ms,
        pearson_r: r,
        trial_count: results.len(),
        miss_rate: misses as f64 / results.len() as f64,
    })
}

/// Paired two-sided t statistic with its effect size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTTest {
    pub t: f64,
    pub df: usize,
    pub mean_diff: f64,
    pub cohens_d: f64,
}

/// Paired t-test on matched samples: `t = mean(d) / (sd(d) / sqrt(n))`,
/// `d = a - b`, with Cohen's d as `mean(d) / sd(d)`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<PairedTTest> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput("paired test needs equal-length samples".into()));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::Undefined("paired test needs at least 2 pairs".into()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let nf = n as f64;
    let mean = diffs.iter().sum::<f64>() / nf;
    let ss: f64 = diffs.iter().map(|d| (d - mean) * (d - mean)).sum();
    let sd = (ss / (nf - 1.0)).sqrt();
    if sd == 0.0 {
        return Err(Error::Undefined("paired differences have zero variance".into()));
    }
    Ok(PairedTTest {
        t: mean / (sd / nf.sqrt()),
        df: n - 1,
        mean_diff: mean,
        cohens_d: mean / sd,
    })
}
