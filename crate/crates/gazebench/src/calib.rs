//! Marker-based calibration of the gaze-to-screen mapping.
//!
//! The routine shows nine square markers, one at a time, on a 3x3 grid. A
//! marker starts 90 px wide and shrinks by a fixed step every time the last
//! window of compensated gaze samples is steady, which both holds the
//! subject's attention and certifies fixation; any burst of variance snaps
//! the square back to full size. When the square has shrunk all the way down
//! and the gaze is still steady, the window is banked as training rows for
//! that marker and the next marker comes up.
//!
//! A second collector sweeps a marker through the nine equal screen blocks
//! in boustrophedon order and labels each sample with its block index, which
//! feeds the classifier variant of the mapping.

use crate::error::{Error, Result};
use crate::geometry::{compensate, CompensatedGaze, HeadPose};
use crate::synth::SyntheticGazeModel;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

/// One marker of the nine-point sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationMarker {
    pub index: usize,
    pub center_px: [f64; 2],
}

/// Nine marker centres on a 3x3 grid inset 10% from each screen edge,
/// ordered row-major from the top-left.
pub fn marker_sequence(width_px: u32, height_px: u32) -> Result<Vec<CalibrationMarker>> {
    if width_px == 0 || height_px == 0 {
        return Err(Error::InvalidParams("screen dimensions must be positive".into()));
    }
    let w = width_px as f64;
    let h = height_px as f64;
    let fracs = [0.1, 0.5, 0.9];
    let mut out = Vec::with_capacity(9);
    for fy in fracs {
        for fx in fracs {
            out.push(CalibrationMarker { index: out.len(), center_px: [fx * w, fy * h] });
        }
    }
    Ok(out)
}

/// Tuning for the shrinking-square fixation detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocusConfig {
    /// Number of most recent samples the stability test looks at.
    pub window: usize,
    /// A window is steady when every gaze component's standard deviation
    /// stays below this.
    pub std_threshold: f64,
    /// How much the marker square shrinks per steady window, px.
    pub shrink_step_px: f64,
    pub max_square_px: f64,
    pub min_square_px: f64,
}

impl Default for FocusConfig {
    fn default() -> Self {
        FocusConfig {
            window: 30,
            std_threshold: 0.02,
            shrink_step_px: 8.0,
            max_square_px: 90.0,
            min_square_px: 10.0,
        }
    }
}

impl FocusConfig {
    fn validate(&self) -> Result<()> {
        if self.window < 2 {
            return Err(Error::InvalidParams("focus window must hold at least 2 samples".into()));
        }
        if !(self.std_threshold.is_finite() && self.std_threshold > 0.0) {
            return Err(Error::InvalidParams("std threshold must be positive".into()));
        }
        if !(self.shrink_step_px.is_finite() && self.shrink_step_px > 0.0) {
            return Err(Error::InvalidParams("shrink step must be positive".into()));
        }
        if !(self.min_square_px > 0.0 && self.min_square_px <= self.max_square_px) {
            return Err(Error::InvalidParams(
                "square sizes must satisfy 0 < min <= max".into(),
            ));
        }
        Ok(())
    }
}

/// What a single focus update did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FocusEvent {
    /// Window not yet full; keep feeding samples.
    Pending,
    /// Window steady; the marker square shrank one step.
    Shrink,
    /// Window unsteady; the square reset to full size and the window cleared.
    Reset,
    /// Window steady at the minimum square size; fixation certified.
    Complete,
}

/// Resumable per-marker fixation detector. Feed it compensated samples one
/// at a time; it reports shrink, reset, and completion as they happen.
#[derive(Debug, Clone)]
pub struct FocusState {
    cfg: FocusConfig,
    window: VecDeque<[f64; 6]>,
    square_px: f64,
}

impl FocusState {
    pub fn new(cfg: FocusConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(FocusState { square_px: cfg.max_square_px, cfg, window: VecDeque::new() })
    }

    pub fn square_px(&self) -> f64 {
        self.square_px
    }

    /// Starts over for a new marker.
    pub fn restart(&mut self) {
        self.window.clear();
        self.square_px = self.cfg.max_square_px;
    }

    /// Contents of the current sample window, oldest first.
    pub fn window_rows(&self) -> Vec<[f64; 6]> {
        self.window.iter().copied().collect()
    }

    pub fn update(&mut self, sample: &CompensatedGaze) -> FocusEvent {
        self.window.push_back(sample.as_array());
        if self.window.len() > self.cfg.window {
            self.window.pop_front();
        }
        if self.window.len() < self.cfg.window {
            return FocusEvent::Pending;
        }
        if self.max_component_std() < self.cfg.std_threshold {
            if self.square_px <= self.cfg.min_square_px {
                return FocusEvent::Complete;
            }
            self.square_px =
                (self.square_px - self.cfg.shrink_step_px).max(self.cfg.min_square_px);
            FocusEvent::Shrink
        } else {
            self.square_px = self.cfg.max_square_px;
            self.window.clear();
            FocusEvent::Reset
        }
    }

    fn max_component_std(&self) -> f64 {
        let n = self.window.len() as f64;
        let mut worst = 0.0f64;
        for c in 0..6 {
            let mean: f64 = self.window.iter().map(|r| r[c]).sum::<f64>() / n;
            let ss: f64 = self.window.iter().map(|r| (r[c] - mean).powi(2)).sum();
            worst = worst.max((ss / (n - 1.0)).sqrt());
        }
        worst
    }
}

/// Labels for a training dataset: either on-screen pixel targets for the
/// regression mapping or block indices for the classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetTargets {
    Screen(Vec<[f64; 2]>),
    Block(Vec<u8>),
}

/// Row-aligned inputs and targets collected by a calibration run.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationDataset {
    input_dim: usize,
    inputs: Vec<Vec<f64>>,
    targets: DatasetTargets,
}

impl CalibrationDataset {
    pub fn new_screen(input_dim: usize) -> Self {
        CalibrationDataset { input_dim, inputs: Vec::new(), targets: DatasetTargets::Screen(Vec::new()) }
    }

    pub fn new_block(input_dim: usize) -> Self {
        CalibrationDataset { input_dim, inputs: Vec::new(), targets: DatasetTargets::Block(Vec::new()) }
    }

    pub fn push_screen(&mut self, input: Vec<f64>, target_px: [f64; 2]) -> Result<()> {
        self.check_input(&input)?;
        match &mut self.targets {
            DatasetTargets::Screen(t) => {
                self.inputs.push(input);
                t.push(target_px);
                Ok(())
            }
            DatasetTargets::Block(_) => {
                Err(Error::InvalidInput("dataset holds block labels, not screen targets".into()))
            }
        }
    }

    pub fn push_block(&mut self, input: Vec<f64>, label: u8) -> Result<()> {
        self.check_input(&input)?;
        match &mut self.targets {
            DatasetTargets::Block(t) => {
                self.inputs.push(input);
                t.push(label);
                Ok(())
            }
            DatasetTargets::Screen(_) => {
                Err(Error::InvalidInput("dataset holds screen targets, not block labels".into()))
            }
        }
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim {
            return Err(Error::InvalidInput(format!(
                "input has {} components, dataset expects {}",
                input.len(),
                self.input_dim
            )));
        }
        if input.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("input has non-finite component".into()));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &DatasetTargets {
        &self.targets
    }

    fn take(&self, idx: &[usize]) -> CalibrationDataset {
        let inputs = idx.iter().map(|&i| self.inputs[i].clone()).collect();
        let targets = match &self.targets {
            DatasetTargets::Screen(t) => DatasetTargets::Screen(idx.iter().map(|&i| t[i]).collect()),
            DatasetTargets::Block(t) => DatasetTargets::Block(idx.iter().map(|&i| t[i]).collect()),
        };
        CalibrationDataset { input_dim: self.input_dim, inputs, targets }
    }
}

/// Splits a dataset into train/validation/test parts after a seeded shuffle.
/// Part sizes are `round(fraction * n)` for the first two fractions with the
/// remainder going to the third.
pub fn split_dataset(
    data: &CalibrationDataset,
    fractions: [f64; 3],
    seed: u64,
) -> Result<(CalibrationDataset, CalibrationDataset, CalibrationDataset)> {
    if fractions.iter().any(|f| !f.is_finite() || *f < 0.0) {
        return Err(Error::InvalidParams("split fractions must be non-negative".into()));
    }
    let sum: f64 = fractions.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParams(format!("split fractions sum to {sum}, expected 1")));
    }
    let n = data.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    use rand::seq::SliceRandom;
    order.shuffle(&mut rng);

    let n_train = ((fractions[0] * n as f64).round() as usize).min(n);
    let n_val = ((fractions[1] * n as f64).round() as usize).min(n - n_train);
    let train = data.take(&order[..n_train]);
    let val = data.take(&order[n_train..n_train + n_val]);
    let test = data.take(&order[n_train + n_val..]);
    Ok((train, val, test))
}

/// Settings for the simulated nine-marker calibration session.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSimConfig {
    pub focus: FocusConfig,
    /// Per-component gaze noise fed to the synthetic observer.
    pub noise_std: f64,
    /// Hard cap on samples spent on one marker before giving up.
    pub max_samples_per_marker: usize,
}

impl Default for CalibrationSimConfig {
    fn default() -> Self {
        CalibrationSimConfig {
            focus: FocusConfig::default(),
            noise_std: 0.0,
            max_samples_per_marker: 10_000,
        }
    }
}

/// Runs the nine-marker session against the synthetic observer and returns
/// the banked fixation windows as a regression dataset: six gaze components
/// in, marker centre in pixels out.
pub fn run_calibration_sim(
    model: &SyntheticGazeModel,
    cfg: &CalibrationSimConfig,
    seed: u64,
) -> Result<CalibrationDataset> {
    if !(cfg.noise_std.is_finite() && cfg.noise_std >= 0.0) {
        return Err(Error::InvalidParams("noise std must be non-negative".into()));
    }
    if cfg.max_samples_per_marker == 0 {
        return Err(Error::InvalidParams("sample cap must be positive".into()));
    }
    let markers = marker_sequence(model.screen.width_px, model.screen.height_px)?;
    let mut focus = FocusState::new(cfg.focus)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pose = HeadPose::identity();
    let mut out = CalibrationDataset::new_screen(6);

    for marker in &markers {
        focus.restart();
        let mut spent = 0usize;
        loop {
            if spent >= cfg.max_samples_per_marker {
                return Err(Error::CalibrationStalled {
                    marker: marker.index,
                    max_samples: cfg.max_samples_per_marker,
                });
            }
            let (l, r) =
                model.noisy_eye_frame_gaze(marker.center_px, &pose, cfg.noise_std, &mut rng)?;
            let sample = compensate(&pose, &l, &r);
            spent += 1;
            if focus.update(&sample) == FocusEvent::Complete {
                for row in focus.window_rows() {
                    out.push_screen(row.to_vec(), marker.center_px)?;
                }
                break;
            }
        }
    }
    Ok(out)
}

/// Centres of the nine equal screen blocks, row-major from the top-left.
pub fn block_centers(width_px: u32, height_px: u32) -> Result<Vec<[f64; 2]>> {
    if width_px == 0 || height_px == 0 {
        return Err(Error::InvalidParams("screen dimensions must be positive".into()));
    }
    let w = width_px as f64;
    let h = height_px as f64;
    let mut out = Vec::with_capacity(9);
    for row in 0..3 {
        for col in 0..3 {
            out.push([
                (2.0 * col as f64 + 1.0) / 6.0 * w,
                (2.0 * row as f64 + 1.0) / 6.0 * h,
            ]);
        }
    }
    Ok(out)
}

/// Visit order for the block sweep: left-to-right on the top row, back
/// right-to-left on the middle row, left-to-right again on the bottom row.
pub const BOUSTROPHEDON_ORDER: [usize; 9] = [0, 1, 2, 5, 4, 3, 6, 7, 8];

/// Settings for the block sweep collector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSweepConfig {
    pub samples_per_block: usize,
    /// Per-component gaze noise fed to the synthetic observer.
    pub noise_std: f64,
}

impl Default for BlockSweepConfig {
    fn default() -> Self {
        BlockSweepConfig { samples_per_block: 120, noise_std: 0.0 }
    }
}

/// Sweeps the marker over the nine blocks in boustrophedon order, recording
/// `samples_per_block` single-eye gaze vectors per dwell, each labelled with
/// the block index it was looking at.
pub fn block_calibration_sweep(
    model: &SyntheticGazeModel,
    cfg: &BlockSweepConfig,
    seed: u64,
) -> Result<CalibrationDataset> {
    if cfg.samples_per_block == 0 {
        return Err(Error::InvalidParams("samples per block must be positive".into()));
    }
    if !(cfg.noise_std.is_finite() && cfg.noise_std >= 0.0) {
        return Err(Error::InvalidParams("noise std must be non-negative".into()));
    }
    let centers = block_centers(model.screen.width_px, model.screen.height_px)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pose = HeadPose::identity();
    let mut out = CalibrationDataset::new_block(3);
    for &block in BOUSTROPHEDON_ORDER.iter() {
        for _ in 0..cfg.samples_per_block {
            let (l, _) =
                model.noisy_eye_frame_gaze(centers[block], &pose, cfg.noise_std, &mut rng)?;
            out.push_block(l.components().to_vec(), block as u8)?;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::GazeVector;
    use approx::assert_abs_diff_eq;

    fn gaze6(v: [f64; 3]) -> CompensatedGaze {
        let g = GazeVector::from_direction(v[0], v[1], v[2]).unwrap();
        compensate(&HeadPose::identity(), &g, &g)
    }

    #[test]
    fn markers_land_on_the_inset_grid() {
        let m = marker_sequence(800, 600).unwrap();
        assert_eq!(m.len(), 9);
        assert_eq!(m[0].center_px, [80.0, 60.0]);
        assert_eq!(m[4].center_px, [400.0, 300.0]);
        assert_eq!(m[8].center_px, [720.0, 540.0]);
        for (i, marker) in m.iter().enumerate() {
            assert_eq!(marker.index, i);
        }
    }

    #[test]
    fn steady_window_shrinks_the_square() {
        let mut focus = FocusState::new(FocusConfig::default()).unwrap();
        let sample = gaze6([1.0, 0.0, 0.0]);
        for _ in 0..29 {
            assert_eq!(focus.update(&sample), FocusEvent::Pending);
        }
        assert_eq!(focus.update(&sample), FocusEvent::Shrink);
        assert_abs_diff_eq!(focus.square_px(), 82.0);
    }

    #[test]
    fn unsteady_window_resets_to_full_size() {
        let mut focus = FocusState::new(FocusConfig::default()).unwrap();
        let a = gaze6([1.0, 0.0, 0.0]);
        let b = gaze6([1.0, 0.3, 0.0]);
        for _ in 0..35 {
            focus.update(&a);
        }
        assert!(focus.square_px() < 90.0);
        for i in 0..30 {
            let e = focus.update(if i % 2 == 0 { &b } else { &a });
            if e == FocusEvent::Reset {
                assert_abs_diff_eq!(focus.square_px(), 90.0);
                assert!(focus.window_rows().is_empty());
                return;
            }
        }
        panic!("alternating samples never triggered a reset");
    }

    #[test]
    fn steady_gaze_walks_down_to_completion() {
        let mut focus = FocusState::new(FocusConfig::default()).unwrap();
        let sample = gaze6([0.9, 0.1, -0.2]);
        let mut events = Vec::new();
        for _ in 0..40 {
            events.push(focus.update(&sample));
        }
        assert_eq!(events[38], FocusEvent::Shrink);
        assert_abs_diff_eq!(focus.square_px(), 10.0);
        assert_eq!(events[39], FocusEvent::Complete);
        assert_eq!(focus.window_rows().len(), 30);
    }

    #[test]
    fn square_never_leaves_its_bounds() {
        let mut focus = FocusState::new(FocusConfig::default()).unwrap();
        let steady = gaze6([1.0, 0.0, 0.0]);
        let wobble_a = gaze6([1.0, 0.2, 0.0]);
        let wobble_b = gaze6([1.0, -0.2, 0.1]);
        for i in 0..200 {
            let s = match i % 7 {
                0 => &wobble_a,
                3 => &wobble_b,
                _ => &steady,
            };
            focus.update(s);
            assert!(focus.square_px() >= 10.0 && focus.square_px() <= 90.0);
        }
    }

    #[test]
    fn noiseless_session_banks_nine_full_windows() {
        let model = SyntheticGazeModel::default_panel();
        let data =
            run_calibration_sim(&model, &CalibrationSimConfig::default(), 0).unwrap();
        assert_eq!(data.len(), 9 * 30);
        assert_eq!(data.input_dim(), 6);
        match data.targets() {
            DatasetTargets::Screen(t) => {
                assert_eq!(t[0], [80.0, 60.0]);
                assert_eq!(t[t.len() - 1], [720.0, 540.0]);
            }
            _ => panic!("expected screen targets"),
        }
    }

    #[test]
    fn noisy_session_means_stay_near_ideal() {
        let model = SyntheticGazeModel::default_panel();
        let sigma = 0.01;
        let cfg = CalibrationSimConfig { noise_std: sigma, ..Default::default() };
        let data = run_calibration_sim(&model, &cfg, 11).unwrap();
        let markers = marker_sequence(800, 600).unwrap();
        let k = cfg.focus.window as f64;
        for (m, marker) in markers.iter().enumerate() {
            let rows = &data.inputs()[m * 30..(m + 1) * 30];
            let (l, _) = model.world_gaze(marker.center_px).unwrap();
            let ideal = l.components();
            for c in 0..3 {
                let mean: f64 = rows.iter().map(|r| r[c]).sum::<f64>() / k;
                assert!(
                    (mean - ideal[c]).abs() <= 3.0 * sigma / k.sqrt(),
                    "marker {m} component {c}: mean {mean} vs ideal {}",
                    ideal[c]
                );
            }
        }
    }

    #[test]
    fn hopeless_noise_stalls_with_an_error() {
        let model = SyntheticGazeModel::default_panel();
        let cfg = CalibrationSimConfig {
            noise_std: 0.5,
            max_samples_per_marker: 500,
            ..Default::default()
        };
        match run_calibration_sim(&model, &cfg, 3) {
            Err(Error::CalibrationStalled { marker: 0, max_samples: 500 }) => {}
            other => panic!("expected a stall on marker 0, got {other:?}"),
        }
    }

    #[test]
    fn block_centers_partition_the_screen() {
        let c = block_centers(800, 600).unwrap();
        assert_eq!(c.len(), 9);
        assert_abs_diff_eq!(c[0][0], 800.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[0][1], 100.0, epsilon = 1e-12);
        assert_eq!(c[4], [400.0, 300.0]);
        assert_abs_diff_eq!(c[8][0], 800.0 * 5.0 / 6.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c[8][1], 500.0, epsilon = 1e-12);
    }

    #[test]
    fn sweep_visits_blocks_in_serpentine_order() {
        let model = SyntheticGazeModel::default_panel();
        let cfg = BlockSweepConfig { samples_per_block: 2, noise_std: 0.0 };
        let data = block_calibration_sweep(&model, &cfg, 0).unwrap();
        assert_eq!(data.len(), 18);
        match data.targets() {
            DatasetTargets::Block(labels) => {
                let per_block: Vec<u8> = labels.iter().step_by(2).copied().collect();
                assert_eq!(per_block, vec![0, 1, 2, 5, 4, 3, 6, 7, 8]);
            }
            _ => panic!("expected block labels"),
        }
    }

    #[test]
    fn noiseless_sweep_is_separable_by_label() {
        let model = SyntheticGazeModel::default_panel();
        let cfg = BlockSweepConfig { samples_per_block: 3, noise_std: 0.0 };
        let data = block_calibration_sweep(&model, &cfg, 0).unwrap();
        let labels = match data.targets() {
            DatasetTargets::Block(l) => l.clone(),
            _ => unreachable!(),
        };
        for (i, a) in data.inputs().iter().enumerate() {
            for (j, b) in data.inputs().iter().enumerate() {
                if labels[i] == labels[j] {
                    assert_eq!(a, b);
                } else {
                    assert_ne!(a, b, "rows {i} and {j} share features across labels");
                }
            }
        }
    }

    #[test]
    fn split_respects_rounded_sizes_and_partitions() {
        let model = SyntheticGazeModel::default_panel();
        let cfg = BlockSweepConfig { samples_per_block: 40, noise_std: 0.001 };
        let data = block_calibration_sweep(&model, &cfg, 5).unwrap();
        let n = data.len();
        let (train, val, test) = split_dataset(&data, [0.7, 0.15, 0.15], 9).unwrap();
        assert_eq!(train.len(), (0.7 * n as f64).round() as usize);
        assert_eq!(val.len(), (0.15 * n as f64).round() as usize);
        assert_eq!(train.len() + val.len() + test.len(), n);
        assert!(test.len() > 0);
    }

    #[test]
    fn split_rejects_bad_fractions() {
        let data = CalibrationDataset::new_screen(2);
        assert!(split_dataset(&data, [0.5, 0.2, 0.2], 0).is_err());
        assert!(split_dataset(&data, [-0.1, 0.6, 0.5], 0).is_err());
    }

    #[test]
    fn dataset_rejects_mismatched_rows() {
        let mut ds = CalibrationDataset::new_screen(6);
        assert!(ds.push_screen(vec![0.0; 5], [1.0, 2.0]).is_err());
        assert!(ds.push_screen(vec![f64::NAN; 6], [1.0, 2.0]).is_err());
        assert!(ds.push_block(vec![0.0; 6], 1).is_err());
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn split_always_partitions(n in 1usize..200, seed in 0u64..1000) {
                let mut ds = CalibrationDataset::new_block(1);
                for i in 0..n {
                    ds.push_block(vec![i as f64], (i % 9) as u8).unwrap();
                }
                let (a, b, c) = split_dataset(&ds, [0.7, 0.15, 0.15], seed).unwrap();
                prop_assert_eq!(a.len() + b.len() + c.len(), n);
                let mut seen: Vec<f64> = a
                    .inputs()
                    .iter()
                    .chain(b.inputs())
                    .chain(c.inputs())
                    .map(|r| r[0])
                    .collect();
                seen.sort_by(|x, y| x.partial_cmp(y).unwrap());
                let expect: Vec<f64> = (0..n).map(|i| i as f64).collect();
                prop_assert_eq!(seen, expect);
            }

            #[test]
            fn focus_square_stays_bounded(samples in proptest::collection::vec(-0.3f64..0.3, 40..160)) {
                let mut focus = FocusState::new(FocusConfig::default()).unwrap();
                for s in samples {
                    let g = gaze6([1.0, s, -s * 0.5]);
                    focus.update(&g);
                    prop_assert!(focus.square_px() >= 10.0);
                    prop_assert!(focus.square_px() <= 90.0);
                }
            }
        }
    }
}
