//! Path-quality metrics for pointing traces.
//!
//! A pointing task defines an axis from the start position to the target
//! centre. Expressing the cursor trace in that frame (x' along the axis, y'
//! across it, positive to the left of travel) exposes how direct the
//! movement was. Seven numbers summarise it:
//!
//! * movement variability `MV = sqrt(sum((y' - mean)^2) / (n - 1))`
//! * movement error `ME = sum(|y'|) / n`
//! * movement offset `MO = mean(y')`
//! * orthogonal direction changes `ODC`: sign flips of consecutive y' deltas
//! * movement direction changes `MDC`: sign flips of consecutive x' deltas
//! * task-axis crossings `TAC`: sign flips of y' itself
//! * target re-entries `RE`: times the pointer re-enters the target disc
//!   after having been inside it before
//!
//! Sign-flip counts ignore exact zeros, so a pause on the axis is not a
//! crossing and a stationary sample is not a direction change.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// One timestamped cursor position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub t_ms: f64,
    pub x_px: f64,
    pub y_px: f64,
}

/// The task geometry a trace is scored against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TaskAxis {
    pub source_px: [f64; 2],
    pub target_center_px: [f64; 2],
    pub target_width_px: f64,
}

impl TaskAxis {
    fn unit(&self) -> Result<[f64; 2]> {
        let dx = self.target_center_px[0] - self.source_px[0];
        let dy = self.target_center_px[1] - self.source_px[1];
        let len = (dx * dx + dy * dy).sqrt();
        if !(len.is_finite() && len > 1e-9) {
            return Err(Error::InvalidInput(
                "task axis is degenerate: source and target coincide".into(),
            ));
        }
        Ok([dx / len, dy / len])
    }
}

/// Rewrites a trace into task-axis coordinates: for each sample, `[0]` is
/// the along-axis component and `[1]` the cross-axis component, measured
/// from the source.
pub fn to_axis_coords(trace: &[PathSample], axis: &TaskAxis) -> Result<Vec<[f64; 2]>> {
    let u = axis.unit()?;
    let n = [-u[1], u[0]];
    let s = axis.source_px;
    Ok(trace
        .iter()
        .map(|p| {
            let rx = p.x_px - s[0];
            let ry = p.y_px - s[1];
            [rx * u[0] + ry * u[1], rx * n[0] + ry * n[1]]
        })
        .collect())
}

/// The seven path metrics for one trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyReport {
    pub mv: f64,
    pub me: f64,
    pub mo: f64,
    pub odc: u32,
    pub mdc: u32,
    pub tac: u32,
    pub re: u32,
}

/// Counts strict sign alternations in a sequence, skipping zeros.
fn sign_changes<I: IntoIterator<Item = f64>>(vals: I) -> u32 {
    let mut last: i8 = 0;
    let mut flips = 0;
    for v in vals {
        let s: i8 = if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            continue;
        };
        if last != 0 && s != last {
            flips += 1;
        }
        last = s;
    }
    flips
}

/// Computes all seven metrics. Needs at least two samples and a valid axis;
/// the target width must be positive for the re-entry count to mean
/// anything.
pub fn efficiency_metrics(trace: &[PathSample], axis: &TaskAxis) -> Result<EfficiencyReport> {
    if trace.len() < 2 {
        return Err(Error::Undefined(format!(
            "path metrics need at least 2 samples, got {}",
            trace.len()
        )));
    }
    if !(axis.target_width_px.is_finite() && axis.target_width_px > 0.0) {
        return Err(Error::InvalidInput("target width must be positive".into()));
    }
    let coords = to_axis_coords(trace, axis)?;
    let n = coords.len();
    let nf = n as f64;

    let mean_y: f64 = coords.iter().map(|c| c[1]).sum::<f64>() / nf;
    let ss: f64 = coords.iter().map(|c| (c[1] - mean_y) * (c[1] - mean_y)).sum();
    let mv = (ss / (nf - 1.0)).sqrt();
    let me: f64 = coords.iter().map(|c| c[1].abs()).sum::<f64>() / nf;
    let mo = mean_y;

    let odc = sign_changes(coords.windows(2).map(|w| w[1][1] - w[0][1]));
    let mdc = sign_changes(coords.windows(2).map(|w| w[1][0] - w[0][0]));
    let tac = sign_changes(coords.iter().map(|c| c[1]));

    let radius = axis.target_width_px / 2.0;
    let mut entries = 0u32;
    let mut inside = false;
    for p in trace {
        let dx = p.x_px - axis.target_center_px[0];
        let dy = p.y_px - axis.target_center_px[1];
        let now_inside = (dx * dx + dy * dy).sqrt() <= radius;
        if now_inside && !inside {
            entries += 1;
        }
        inside = now_inside;
    }
    let re = entries.saturating_sub(1);

    Ok(EfficiencyReport { mv, me, mo, odc, mdc, tac, re })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sample(x: f64, y: f64) -> PathSample {
        PathSample { t_ms: 0.0, x_px: x, y_px: y }
    }

    fn axis(sx: f64, sy: f64, tx: f64, ty: f64, w: f64) -> TaskAxis {
        TaskAxis { source_px: [sx, sy], target_center_px: [tx, ty], target_width_px: w }
    }

    #[test]
    fn horizontal_axis_is_identity_transform() {
        let a = axis(0.0, 0.0, 10.0, 0.0, 2.0);
        let out = to_axis_coords(&[sample(5.0, 3.0)], &a).unwrap();
        assert_eq!(out[0], [5.0, 3.0]);
    }

    #[test]
    fn vertical_axis_swaps_and_flips() {
        let a = axis(0.0, 0.0, 0.0, 10.0, 2.0);
        let out = to_axis_coords(&[sample(3.0, 5.0)], &a).unwrap();
        assert_eq!(out[0], [5.0, -3.0]);
    }

    #[test]
    fn degenerate_axis_is_rejected() {
        let a = axis(4.0, 4.0, 4.0, 4.0, 2.0);
        assert!(to_axis_coords(&[sample(0.0, 0.0)], &a).is_err());
    }

    #[test]
    fn zigzag_matches_hand_computation() {
        let a = axis(0.0, 0.0, 10.0, 0.0, 2.0);
        let trace = [sample(1.0, 1.0), sample(2.0, -1.0), sample(3.0, 1.0), sample(4.0, -1.0)];
        let m = efficiency_metrics(&trace, &a).unwrap();
        assert_abs_diff_eq!(m.mv, (4.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(m.me, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.mo, 0.0, epsilon = 1e-15);
        assert_eq!(m.tac, 3);
        assert_eq!(m.odc, 2);
        assert_eq!(m.mdc, 0);
        assert_eq!(m.re, 0);
    }

    #[test]
    fn straight_run_scores_clean_zeroes() {
        let a = axis(0.0, 0.0, 100.0, 0.0, 20.0);
        let trace: Vec<PathSample> = (0..=10).map(|i| sample(i as f64 * 10.0, 0.0)).collect();
        let m = efficiency_metrics(&trace, &a).unwrap();
        assert_eq!(m.mv, 0.0);
        assert_eq!(m.me, 0.0);
        assert_eq!(m.mo, 0.0);
        assert_eq!(m.odc, 0);
        assert_eq!(m.mdc, 0);
        assert_eq!(m.tac, 0);
        assert_eq!(m.re, 0, "a single entry is not a re-entry");
    }

    #[test]
    fn pause_on_axis_is_not_a_crossing() {
        let a = axis(0.0, 0.0, 10.0, 0.0, 2.0);
        let trace = [sample(1.0, 1.0), sample(2.0, 0.0), sample(3.0, 1.0)];
        let m = efficiency_metrics(&trace, &a).unwrap();
        assert_eq!(m.tac, 0, "zeros between same-sign values do not flip");
        // Deltas are -1 then +1: one orthogonal direction change.
        assert_eq!(m.odc, 1);
    }

    #[test]
    fn overshoot_and_return_counts_one_reentry() {
        let a = axis(0.0, 0.0, 100.0, 0.0, 20.0);
        let trace = [
            sample(0.0, 0.0),
            sample(95.0, 0.0),  // inside (entry 1)
            sample(115.0, 0.0), // overshoot, outside
            sample(102.0, 0.0), // back inside (entry 2)
        ];
        let m = efficiency_metrics(&trace, &a).unwrap();
        assert_eq!(m.re, 1);
        assert_eq!(m.mdc, 1, "the reversal back onto the target flips x' direction once");
    }

    #[test]
    fn too_short_traces_are_undefined() {
        let a = axis(0.0, 0.0, 10.0, 0.0, 2.0);
        assert!(matches!(
            efficiency_metrics(&[sample(0.0, 0.0)], &a),
            Err(Error::Undefined(_))
        ));
        assert!(efficiency_metrics(&[], &a).is_err());
    }

    #[test]
    fn metrics_are_rigid_motion_invariant() {
        let a = axis(10.0, -5.0, 200.0, 40.0, 30.0);
        let trace: Vec<PathSample> = (0..40)
            .map(|i| {
                let t = i as f64 / 39.0;
                sample(
                    10.0 + t * 190.0 + (t * 13.0).sin() * 4.0,
                    -5.0 + t * 45.0 + (t * 9.0).cos() * 6.0,
                )
            })
            .collect();
        let base = efficiency_metrics(&trace, &a).unwrap();

        // Translate everything by the same offset.
        let (dx, dy) = (137.0, -42.0);
        let moved: Vec<PathSample> =
            trace.iter().map(|p| sample(p.x_px + dx, p.y_px + dy)).collect();
        let a2 = axis(10.0 + dx, -5.0 + dy, 200.0 + dx, 40.0 + dy, 30.0);
        let shifted = efficiency_metrics(&moved, &a2).unwrap();
        assert_abs_diff_eq!(base.mv, shifted.mv, epsilon = 1e-9);
        assert_abs_diff_eq!(base.me, shifted.me, epsilon = 1e-9);
        assert_abs_diff_eq!(base.mo, shifted.mo, epsilon = 1e-9);
        assert_eq!(base.odc, shifted.odc);
        assert_eq!(base.mdc, shifted.mdc);
        assert_eq!(base.tac, shifted.tac);
        assert_eq!(base.re, shifted.re);

        // Rotate everything a quarter turn.
        let rot: Vec<PathSample> = trace.iter().map(|p| sample(-p.y_px, p.x_px)).collect();
        let a3 = axis(5.0, 10.0, -40.0, 200.0, 30.0);
        let turned = efficiency_metrics(&rot, &a3).unwrap();
        assert_abs_diff_eq!(base.mv, turned.mv, epsilon = 1e-9);
        assert_abs_diff_eq!(base.me, turned.me, epsilon = 1e-9);
        assert_abs_diff_eq!(base.mo, turned.mo, epsilon = 1e-9);
        assert_eq!(base.tac, turned.tac);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn me_bounds_mo_and_mv_is_non_negative(
                ys in proptest::collection::vec(-50.0f64..50.0, 2..60),
            ) {
                let trace: Vec<PathSample> =
                    ys.iter().enumerate().map(|(i, &y)| sample(i as f64, y)).collect();
                let a = axis(0.0, 0.0, 100.0, 0.0, 10.0);
                let m = efficiency_metrics(&trace, &a).unwrap();
                prop_assert!(m.mv >= 0.0);
                prop_assert!(m.me >= 0.0);
                prop_assert!(m.mo.abs() <= m.me + 1e-12);
            }

            #[test]
            fn counts_are_bounded_by_sample_count(
                ys in proptest::collection::vec(-50.0f64..50.0, 2..60),
            ) {
                let n = ys.len() as u32;
                let trace: Vec<PathSample> =
                    ys.iter().enumerate().map(|(i, &y)| sample(i as f64, y)).collect();
                let a = axis(0.0, 0.0, 100.0, 0.0, 10.0);
                let m = efficiency_metrics(&trace, &a).unwrap();
                prop_assert!(m.tac <= n - 1);
                prop_assert!(m.odc <= n.saturating_sub(2));
                prop_assert!(m.mdc <= n.saturating_sub(2));
                prop_assert!(m.re <= n / 2);
            }
        }
    }
}
