//! Real-time cursor engine.
//!
//! Raw gaze is too twitchy to drive a cursor directly, so the engine layers
//! four defences between the tracker and the screen: a trailing-window mean
//! over the compensated gaze features, the same smoothing over the network's
//! pixel predictions, a pixel threshold that ignores sub-threshold cursor
//! moves, and a per-axis angle step that ignores head pose flutter below the
//! sensor's trustworthy resolution. On top of that sits nearest-target
//! activation: the button closest to the settled cursor is the one that
//! lights up, so a shaky pointer still lands whole buttons.

use crate::error::{Error, Result};
use crate::geometry::{compensate, normalize_deg, GazeSample, HeadPose};
use crate::nnmap::{predict_screen_px, OutputKind, TrainedNet};
use std::collections::VecDeque;

/// Arithmetic mean of the samples inside the trailing window, which spans
/// `(t_last - window_s, t_last]` measured from the newest sample. Returns
/// `None` when there are no samples at all.
pub fn smooth<const N: usize>(samples: &[(f64, [f64; N])], window_s: f64) -> Option<[f64; N]> {
    let (&(t_last, _), _) = samples.split_last()?;
    let cutoff = t_last - window_s * 1000.0;
    let mut acc = [0.0; N];
    let mut count = 0usize;
    for &(t, v) in samples.iter().rev() {
        if t <= cutoff {
            break;
        }
        for (a, x) in acc.iter_mut().zip(v.iter()) {
            *a += x;
        }
        count += 1;
    }
    for a in &mut acc {
        *a /= count as f64;
    }
    Some(acc)
}

/// Moves the cursor only when the predicted point is more than
/// `threshold_px` away from where the cursor already is.
pub fn apply_pixel_threshold(current: [f64; 2], predicted: [f64; 2], threshold_px: f64) -> [f64; 2] {
    let dx = predicted[0] - current[0];
    let dy = predicted[1] - current[1];
    if (dx * dx + dy * dy).sqrt() > threshold_px {
        predicted
    } else {
        current
    }
}

/// Per-axis head pose gate: an incoming angle replaces the accepted one only
/// when it moved more than `step_deg` away, shortest way around the circle.
pub fn apply_angle_step(accepted: &HeadPose, incoming: &HeadPose, step_deg: f64) -> HeadPose {
    let pick = |old: f64, new: f64| {
        if normalize_deg(new - old).abs() > step_deg {
            new
        } else {
            old
        }
    };
    HeadPose {
        yaw_deg: pick(accepted.yaw_deg, incoming.yaw_deg),
        pitch_deg: pick(accepted.pitch_deg, incoming.pitch_deg),
        roll_deg: pick(accepted.roll_deg, incoming.roll_deg),
    }
}

/// A selectable on-screen target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Target {
    pub id: u32,
    pub center_px: [f64; 2],
    pub width_px: f64,
}

/// Validated set of targets: ids unique, widths positive.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TargetLayout {
    targets: Vec<Target>,
}

impl TargetLayout {
    pub fn new(targets: Vec<Target>) -> Result<Self> {
        for t in &targets {
            if !(t.width_px.is_finite() && t.width_px > 0.0) {
                return Err(Error::InvalidParams(format!("target {} has non-positive width", t.id)));
            }
            if !(t.center_px[0].is_finite() && t.center_px[1].is_finite()) {
                return Err(Error::InvalidParams(format!("target {} has non-finite centre", t.id)));
            }
        }
        let mut ids: Vec<u32> = targets.iter().map(|t| t.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != targets.len() {
            return Err(Error::InvalidParams("target ids must be unique".into()));
        }
        Ok(TargetLayout { targets })
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&Target> {
        self.targets.iter().find(|t| t.id == id)
    }
}

/// Target nearest to `point` by centre distance, if any lies within
/// `snap_radius_px`. Exact distance ties go to the lowest id.
pub fn nearest_target(point: [f64; 2], layout: &TargetLayout, snap_radius_px: f64) -> Option<u32> {
    let mut best: Option<(f64, u32)> = None;
    for t in layout.targets() {
        let dx = t.center_px[0] - point[0];
        let dy = t.center_px[1] - point[1];
        let d = (dx * dx + dy * dy).sqrt();
        if d > snap_radius_px {
            continue;
        }
        best = match best {
            None => Some((d, t.id)),
            Some((bd, bid)) => {
                if d < bd || (d == bd && t.id < bid) {
                    Some((d, t.id))
                } else {
                    Some((bd, bid))
                }
            }
        };
    }
    best.map(|(_, id)| id)
}

/// Engine tuning. Defaults follow the interaction study: 0.2 s smoothing,
/// 15 px cursor threshold, 2 degree head step, unlimited snap radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CursorConfig {
    pub window_s: f64,
    pub pixel_threshold_px: f64,
    pub angle_step_deg: f64,
    pub snap_radius_px: f64,
    pub screen: [f64; 2],
}

impl Default for CursorConfig {
    fn default() -> Self {
        CursorConfig {
            window_s: 0.2,
            pixel_threshold_px: 15.0,
            angle_step_deg: 2.0,
            snap_radius_px: f64::INFINITY,
            screen: [800.0, 600.0],
        }
    }
}

impl CursorConfig {
    fn validate(&self) -> Result<()> {
        if !(self.window_s.is_finite() && self.window_s > 0.0) {
            return Err(Error::InvalidParams("smoothing window must be positive".into()));
        }
        if !(self.pixel_threshold_px >= 0.0) {
            return Err(Error::InvalidParams("pixel threshold must be non-negative".into()));
        }
        if !(self.angle_step_deg.is_finite() && self.angle_step_deg >= 0.0) {
            return Err(Error::InvalidParams("angle step must be non-negative".into()));
        }
        if self.snap_radius_px.is_nan() || self.snap_radius_px < 0.0 {
            return Err(Error::InvalidParams("snap radius must be non-negative".into()));
        }
        if self.screen[0] <= 0.0 || self.screen[1] <= 0.0 {
            return Err(Error::InvalidParams("screen dimensions must be positive".into()));
        }
        Ok(())
    }
}

/// What one engine step did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CursorEvent {
    /// The cursor moved but no target is in snap range.
    Moved([f64; 2]),
    /// The prediction stayed inside the pixel threshold; nothing changed.
    Held,
    /// The cursor moved and this target is now the active one.
    Snapped(u32),
}

/// Stateful cursor pipeline. Drive it with one call per tracker sample.
#[derive(Debug, Clone)]
pub struct CursorEngine<'net> {
    net: &'net TrainedNet,
    cfg: CursorConfig,
    layout: TargetLayout,
    accepted_pose: HeadPose,
    feature_buf: VecDeque<(f64, [f64; 6])>,
    pred_buf: VecDeque<(f64, [f64; 2])>,
    cursor_px: [f64; 2],
    last_t_ms: Option<f64>,
}

impl<'net> CursorEngine<'net> {
    /// The network must be a trained two-output screen regressor.
    pub fn new(net: &'net TrainedNet, cfg: CursorConfig, layout: TargetLayout) -> Result<Self> {
        cfg.validate()?;
        if net.spec.output_kind != OutputKind::Regression
            || net.spec.output_dim != 2
            || net.spec.input_dim != 6
        {
            return Err(Error::NotReady(
                "cursor engine needs a six-in two-out regression network".into(),
            ));
        }
        if net.target_scale.is_none() {
            return Err(Error::NotReady("network has not been trained".into()));
        }
        let cursor_px = [cfg.screen[0] / 2.0, cfg.screen[1] / 2.0];
        Ok(CursorEngine {
            net,
            cfg,
            layout,
            accepted_pose: HeadPose::identity(),
            feature_buf: VecDeque::new(),
            pred_buf: VecDeque::new(),
            cursor_px,
            last_t_ms: None,
        })
    }

    pub fn cursor_px(&self) -> [f64; 2] {
        self.cursor_px
    }

    pub fn accepted_pose(&self) -> HeadPose {
        self.accepted_pose
    }

    /// Processes one tracker sample with the head pose reported alongside
    /// it. Timestamps must not run backwards.
    pub fn step(&mut self, sample: &GazeSample, pose: &HeadPose) -> Result<CursorEvent> {
        if !sample.t_ms.is_finite() {
            return Err(Error::InvalidInput("sample timestamp is not finite".into()));
        }
        if let Some(last) = self.last_t_ms {
            if sample.t_ms < last {
                return Err(Error::InvalidInput(format!(
                    "timestamps must be non-decreasing: {} after {last}",
                    sample.t_ms
                )));
            }
        }
        self.last_t_ms = Some(sample.t_ms);

        self.accepted_pose = apply_angle_step(&self.accepted_pose, pose, self.cfg.angle_step_deg);
        let features = compensate(&self.accepted_pose, &sample.eye_l, &sample.eye_r).as_array();

        let window_ms = self.cfg.window_s * 1000.0;
        push_window(&mut self.feature_buf, sample.t_ms, features, window_ms);
        let feature_rows: Vec<(f64, [f64; 6])> = self.feature_buf.iter().copied().collect();
        let smoothed = smooth(&feature_rows, self.cfg.window_s)
            .ok_or_else(|| Error::NotReady("no samples in the smoothing window".into()))?;

        let raw_pred = predict_screen_px(self.net, &smoothed)?;
        push_window(&mut self.pred_buf, sample.t_ms, raw_pred, window_ms);
        let pred_rows: Vec<(f64, [f64; 2])> = self.pred_buf.iter().copied().collect();
        let mut pred = smooth(&pred_rows, self.cfg.window_s).expect("prediction just pushed");
        pred[0] = pred[0].clamp(0.0, self.cfg.screen[0]);
        pred[1] = pred[1].clamp(0.0, self.cfg.screen[1]);

        let next = apply_pixel_threshold(self.cursor_px, pred, self.cfg.pixel_threshold_px);
        if next == self.cursor_px {
            return Ok(CursorEvent::Held);
        }
        self.cursor_px = next;
        match nearest_target(self.cursor_px, &self.layout, self.cfg.snap_radius_px) {
            Some(id) => Ok(CursorEvent::Snapped(id)),
            None => Ok(CursorEvent::Moved(self.cursor_px)),
        }
    }
}

fn push_window<const N: usize>(
    buf: &mut VecDeque<(f64, [f64; N])>,
    t_ms: f64,
    v: [f64; N],
    window_ms: f64,
) {
    buf.push_back((t_ms, v));
    while let Some(&(t, _)) = buf.front() {
        if t <= t_ms - window_ms {
            buf.pop_front();
        } else {
            break;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calib::{run_calibration_sim, CalibrationSimConfig};
    use crate::geometry::GazeVector;
    use crate::nnmap::{init_network, train, NetworkSpec, TrainConfig};
    use crate::synth::SyntheticGazeModel;
    use approx::assert_abs_diff_eq;

    #[test]
    fn alternating_signal_smooths_to_zero() {
        let mut samples = Vec::new();
        for i in 0..20 {
            let v = if i % 2 == 0 { 1.0 } else { -1.0 };
            samples.push((i as f64 * 10.0, [v]));
        }
        let out = smooth(&samples, 0.2).unwrap();
        assert_abs_diff_eq!(out[0], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn smoothing_window_is_trailing_and_half_open() {
        let samples = vec![
            (0.0, [100.0]),
            (100.0, [10.0]),
            (200.0, [20.0]),
            (300.0, [30.0]),
        ];
        // Window (100, 300] keeps the samples at 200 and 300 only.
        let out = smooth(&samples, 0.2).unwrap();
        assert_abs_diff_eq!(out[0], 25.0, epsilon = 1e-15);
        assert!(smooth::<1>(&[], 0.2).is_none());
    }

    #[test]
    fn single_sample_smooths_to_itself() {
        let out = smooth(&[(50.0, [7.0, -3.0])], 0.2).unwrap();
        assert_eq!(out, [7.0, -3.0]);
    }

    #[test]
    fn pixel_threshold_gates_small_moves() {
        let cur = [100.0, 100.0];
        assert_eq!(apply_pixel_threshold(cur, [110.0, 100.0], 15.0), cur);
        assert_eq!(apply_pixel_threshold(cur, [120.0, 100.0], 15.0), [120.0, 100.0]);
        // Infinite threshold pins the cursor forever.
        assert_eq!(apply_pixel_threshold(cur, [9000.0, -400.0], f64::INFINITY), cur);
        // Zero threshold passes every distinct prediction through.
        assert_eq!(apply_pixel_threshold(cur, [100.2, 100.0], 0.0), [100.2, 100.0]);
    }

    #[test]
    fn angle_step_filters_per_axis() {
        let accepted = HeadPose::new(10.0, 5.0, 0.0).unwrap();
        let incoming = HeadPose::new(11.0, 8.0, 0.5).unwrap();
        let out = apply_angle_step(&accepted, &incoming, 2.0);
        assert_eq!(out.yaw_deg, 10.0, "1 degree yaw wobble is filtered");
        assert_eq!(out.pitch_deg, 8.0, "3 degree pitch move passes");
        assert_eq!(out.roll_deg, 0.0);
    }

    #[test]
    fn angle_step_wraps_around_the_circle() {
        let accepted = HeadPose::new(179.0, 0.0, 0.0).unwrap();
        let incoming = HeadPose::new(-179.0, 0.0, 0.0).unwrap();
        // Only 2 degrees apart the short way, so the gate holds it back.
        let out = apply_angle_step(&accepted, &incoming, 3.0);
        assert_eq!(out.yaw_deg, 179.0);
    }

    #[test]
    fn nearest_target_breaks_ties_low() {
        let layout = TargetLayout::new(vec![
            Target { id: 5, center_px: [100.0, 0.0], width_px: 40.0 },
            Target { id: 2, center_px: [-100.0, 0.0], width_px: 40.0 },
            Target { id: 9, center_px: [0.0, 300.0], width_px: 40.0 },
        ])
        .unwrap();
        assert_eq!(nearest_target([0.0, 0.0], &layout, f64::INFINITY), Some(2));
        assert_eq!(nearest_target([90.0, 0.0], &layout, f64::INFINITY), Some(5));
    }

    #[test]
    fn snap_radius_excludes_distant_targets() {
        let layout = TargetLayout::new(vec![Target {
            id: 1,
            center_px: [80.0, 0.0],
            width_px: 40.0,
        }])
        .unwrap();
        assert_eq!(nearest_target([0.0, 0.0], &layout, 50.0), None);
        assert_eq!(nearest_target([0.0, 0.0], &layout, 80.0), Some(1));
    }

    #[test]
    fn layout_rejects_duplicate_ids_and_bad_widths() {
        let dup = vec![
            Target { id: 1, center_px: [0.0, 0.0], width_px: 10.0 },
            Target { id: 1, center_px: [5.0, 5.0], width_px: 10.0 },
        ];
        assert!(TargetLayout::new(dup).is_err());
        let bad = vec![Target { id: 1, center_px: [0.0, 0.0], width_px: 0.0 }];
        assert!(TargetLayout::new(bad).is_err());
    }

    #[test]
    fn untrained_network_is_not_ready() {
        let net = init_network(
            NetworkSpec {
                input_dim: 6,
                hidden_dims: vec![8],
                output_dim: 2,
                output_kind: crate::nnmap::OutputKind::Regression,
            },
            0,
        )
        .unwrap();
        let err =
            CursorEngine::new(&net, CursorConfig::default(), TargetLayout::default()).unwrap_err();
        assert!(matches!(err, Error::NotReady(_)), "{err}");
    }

    fn trained_panel_net() -> crate::nnmap::TrainedNet {
        let model = SyntheticGazeModel::default_panel();
        let data = run_calibration_sim(&model, &CalibrationSimConfig::default(), 1).unwrap();
        let net = init_network(
            NetworkSpec {
                input_dim: 6,
                hidden_dims: vec![32, 16],
                output_dim: 2,
                output_kind: crate::nnmap::OutputKind::Regression,
            },
            1,
        )
        .unwrap();
        // The stock gate accepts a mapping too coarse for pixel-level
        // assertions; a tighter loss bound keeps the landing error small.
        let cfg = TrainConfig { loss_threshold: 1e-4, ..TrainConfig::default() };
        train(net, &data, None, &cfg).unwrap()
    }

    #[test]
    fn stationary_gaze_snaps_then_holds() {
        let model = SyntheticGazeModel::default_panel();
        let net = trained_panel_net();
        let layout = TargetLayout::new(vec![
            Target { id: 1, center_px: [80.0, 60.0], width_px: 70.0 },
            Target { id: 2, center_px: [720.0, 540.0], width_px: 70.0 },
        ])
        .unwrap();
        let mut engine = CursorEngine::new(&net, CursorConfig::default(), layout).unwrap();
        let (l, r) = model.world_gaze([80.0, 60.0]).unwrap();
        let pose = HeadPose::identity();
        let mut snapped_at = None;
        for i in 0..30 {
            let t_ms = i as f64 * 10.0;
            let sample = GazeSample { t_ms, eye_l: l, eye_r: r };
            match engine.step(&sample, &pose).unwrap() {
                CursorEvent::Snapped(id) => {
                    assert_eq!(id, 1);
                    snapped_at = Some(t_ms);
                    break;
                }
                CursorEvent::Moved(_) => panic!("targets cover the screen, move must snap"),
                CursorEvent::Held => {}
            }
        }
        let snapped_at = snapped_at.expect("stationary gaze at a target must snap");
        assert!(snapped_at <= 300.0, "snap took {snapped_at} ms");
        // Once settled, identical samples keep the cursor still.
        for i in 30..40 {
            let sample = GazeSample { t_ms: i as f64 * 10.0, eye_l: l, eye_r: r };
            assert_eq!(engine.step(&sample, &pose).unwrap(), CursorEvent::Held);
        }
        let c = engine.cursor_px();
        let err = ((c[0] - 80.0).powi(2) + (c[1] - 60.0).powi(2)).sqrt();
        assert!(err < 35.0, "cursor settled {err:.1} px from the target");
    }

    #[test]
    fn identical_samples_below_threshold_hold() {
        let net = trained_panel_net();
        let model = SyntheticGazeModel::default_panel();
        let mut engine =
            CursorEngine::new(&net, CursorConfig::default(), TargetLayout::default()).unwrap();
        let (l, r) = model.world_gaze([400.0, 300.0]).unwrap();
        let pose = HeadPose::identity();
        let mut held = 0;
        for i in 0..25 {
            let sample = GazeSample { t_ms: i as f64 * 10.0, eye_l: l, eye_r: r };
            if engine.step(&sample, &pose).unwrap() == CursorEvent::Held {
                held += 1;
            }
        }
        assert!(held >= 20, "only {held} of 25 identical steps held");
    }

    #[test]
    fn out_of_order_timestamps_are_rejected() {
        let net = trained_panel_net();
        let mut engine =
            CursorEngine::new(&net, CursorConfig::default(), TargetLayout::default()).unwrap();
        let g = GazeVector::new(1.0, 0.0, 0.0).unwrap();
        let pose = HeadPose::identity();
        engine.step(&GazeSample { t_ms: 100.0, eye_l: g, eye_r: g }, &pose).unwrap();
        let err = engine
            .step(&GazeSample { t_ms: 50.0, eye_l: g, eye_r: g }, &pose)
            .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn engine_is_deterministic() {
        let net = trained_panel_net();
        let model = SyntheticGazeModel::default_panel();
        let run = || {
            let mut engine =
                CursorEngine::new(&net, CursorConfig::default(), TargetLayout::default()).unwrap();
            let mut path = Vec::new();
            for i in 0..40 {
                let px = [200.0 + i as f64 * 10.0, 300.0];
                let (l, r) = model.world_gaze(px).unwrap();
                let sample = GazeSample { t_ms: i as f64 * 10.0, eye_l: l, eye_r: r };
                engine.step(&sample, &HeadPose::identity()).unwrap();
                path.push(engine.cursor_px());
            }
            path
        };
        assert_eq!(run(), run());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn smoothed_value_stays_within_sample_hull(
                vals in proptest::collection::vec(-100.0f64..100.0, 1..50),
            ) {
                let samples: Vec<(f64, [f64; 1])> =
                    vals.iter().enumerate().map(|(i, &v)| (i as f64 * 5.0, [v])).collect();
                let out = smooth(&samples, 0.2).unwrap()[0];
                let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(out >= lo - 1e-9 && out <= hi + 1e-9);
            }

            #[test]
            fn threshold_output_is_one_of_the_inputs(
                cx in -500.0f64..500.0, cy in -500.0f64..500.0,
                px in -500.0f64..500.0, py in -500.0f64..500.0,
                thr in 0.0f64..100.0,
            ) {
                let out = apply_pixel_threshold([cx, cy], [px, py], thr);
                prop_assert!(out == [cx, cy] || out == [px, py]);
            }
        }
    }
}
