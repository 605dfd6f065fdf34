//! Synthetic gaze generator used by the calibration simulator and by tests.
//!
//! Models an observer seated in front of a large display: screen pixels map
//! to points on a plane a fixed distance ahead, and the "tracker" reports the
//! unit vector from each eye to the fixated point, expressed in the head
//! frame. Rotating the head therefore changes the reported vectors while the
//! fixated world point stays put, which is exactly the situation the
//! compensation step has to undo.

use crate::error::{Error, Result};
use crate::geometry::{compose_head_transform, GazeVector, HeadPose};
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Physical layout of the display relative to the observer.
///
/// The screen plane sits `distance_cm` ahead of the head origin (along +x)
/// and is perpendicular to it. Pixel (0,0) is the top-left corner; +y world
/// is screen-left, +z world is screen-up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScreenGeometry {
    pub width_px: u32,
    pub height_px: u32,
    pub cm_per_px: f64,
    pub distance_cm: f64,
}

impl ScreenGeometry {
    pub fn new(width_px: u32, height_px: u32, cm_per_px: f64, distance_cm: f64) -> Result<Self> {
        if width_px == 0 || height_px == 0 {
            return Err(Error::InvalidParams("screen dimensions must be positive".into()));
        }
        if !(cm_per_px.is_finite() && cm_per_px > 0.0) {
            return Err(Error::InvalidParams("cm_per_px must be positive".into()));
        }
        if !(distance_cm.is_finite() && distance_cm > 0.0) {
            return Err(Error::InvalidParams("viewing distance must be positive".into()));
        }
        Ok(ScreenGeometry { width_px, height_px, cm_per_px, distance_cm })
    }

    /// 800x600 panel with a 4:3 80 inch diagonal viewed from 3.2 m, the
    /// geometry the simulator defaults to everywhere.
    pub fn default_panel() -> Self {
        ScreenGeometry {
            width_px: 800,
            height_px: 600,
            cm_per_px: 0.2032,
            distance_cm: 320.0,
        }
    }

    /// World coordinates (cm) of a screen position given in pixels.
    pub fn world_point(&self, px: [f64; 2]) -> [f64; 3] {
        let cx = self.width_px as f64 / 2.0;
        let cy = self.height_px as f64 / 2.0;
        [
            self.distance_cm,
            (cx - px[0]) * self.cm_per_px,
            (cy - px[1]) * self.cm_per_px,
        ]
    }
}

/// Deterministic observer model. `inter_pupil_cm` separates the two eyes
/// along the head's y axis; zero collapses both eyes onto the head origin,
/// which makes head compensation exact and is what the geometry oracle uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticGazeModel {
    pub screen: ScreenGeometry,
    pub inter_pupil_cm: f64,
}

impl SyntheticGazeModel {
    pub fn new(screen: ScreenGeometry, inter_pupil_cm: f64) -> Result<Self> {
        if !(inter_pupil_cm.is_finite() && inter_pupil_cm >= 0.0) {
            return Err(Error::InvalidParams("inter-pupil distance must be non-negative".into()));
        }
        Ok(SyntheticGazeModel { screen, inter_pupil_cm })
    }

    pub fn default_panel() -> Self {
        SyntheticGazeModel { screen: ScreenGeometry::default_panel(), inter_pupil_cm: 0.0 }
    }

    fn eye_offsets(&self) -> ([f64; 3], [f64; 3]) {
        let h = self.inter_pupil_cm / 2.0;
        ([0.0, h, 0.0], [0.0, -h, 0.0])
    }

    /// Unit vectors from each eye to `screen_px`, in the world frame, with
    /// the head at the neutral pose.
    pub fn world_gaze(&self, screen_px: [f64; 2]) -> Result<(GazeVector, GazeVector)> {
        self.eye_frame_gaze(screen_px, &HeadPose::identity())
    }

    /// Unit vectors from each eye to `screen_px` as a head-mounted tracker
    /// would report them: computed in the world frame, then rotated back into
    /// the head frame with the transpose of the head transform. Eye positions
    /// ride along with the head.
    pub fn eye_frame_gaze(
        &self,
        screen_px: [f64; 2],
        pose: &HeadPose,
    ) -> Result<(GazeVector, GazeVector)> {
        if !(screen_px[0].is_finite() && screen_px[1].is_finite()) {
            return Err(Error::InvalidInput("screen position is not finite".into()));
        }
        let p = self.screen.world_point(screen_px);
        let t = compose_head_transform(pose);
        let back = t.transpose();
        let (off_l, off_r) = self.eye_offsets();
        let one = |off: [f64; 3]| -> Result<GazeVector> {
            let eye_world = t.apply(off);
            let d = [p[0] - eye_world[0], p[1] - eye_world[1], p[2] - eye_world[2]];
            let d_head = back.apply(d);
            GazeVector::from_direction(d_head[0], d_head[1], d_head[2])
        };
        Ok((one(off_l)?, one(off_r)?))
    }

    /// Same as [`eye_frame_gaze`](Self::eye_frame_gaze) with zero-mean
    /// Gaussian noise of standard deviation `component_std` added to every
    /// component before renormalising.
    pub fn noisy_eye_frame_gaze<R: Rng>(
        &self,
        screen_px: [f64; 2],
        pose: &HeadPose,
        component_std: f64,
        rng: &mut R,
    ) -> Result<(GazeVector, GazeVector)> {
        if !(component_std.is_finite() && component_std >= 0.0) {
            return Err(Error::InvalidParams("noise std must be non-negative".into()));
        }
        let (l, r) = self.eye_frame_gaze(screen_px, pose)?;
        if component_std == 0.0 {
            return Ok((l, r));
        }
        let dist = Normal::new(0.0, component_std)
            .map_err(|e| Error::InvalidParams(format!("noise std: {e}")))?;
        let mut jiggle = |g: GazeVector| -> Result<GazeVector> {
            let c = g.components();
            GazeVector::from_direction(
                c[0] + dist.sample(rng),
                c[1] + dist.sample(rng),
                c[2] + dist.sample(rng),
            )
        };
        Ok((jiggle(l)?, jiggle(r)?))
    }

    /// Converts a gaze noise figure quoted in screen pixels into the
    /// equivalent per-component standard deviation on a unit gaze vector,
    /// using the small-angle approximation at screen centre.
    pub fn component_std_for_px(&self, sigma_px: f64) -> f64 {
        sigma_px * self.screen.cm_per_px / self.screen.distance_cm
    }
}
