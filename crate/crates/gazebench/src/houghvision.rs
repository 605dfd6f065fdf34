//! Scene-camera measurement pipeline: preprocess a grayscale frame, find
//! the gaze marker and the task target as circles with a Hough transform,
//! and report their separation in pixels, centimeters, and visual angle.
//!
//! The preprocessing chain is Gaussian blur, adaptive mean thresholding
//! (dark strokes become foreground), then a morphological opening to drop
//! isolated noise pixels. Detection votes each foreground pixel onto
//! candidate centers per radius, normalizes by perimeter, and keeps
//! non-overlapping maxima. Roles are assigned by radius band: the small
//! circle is the gaze marker, the large one the target outline.
//!
//! The module also carries a deterministic scene renderer used as the
//! detection oracle in tests and by the batch CLI fixtures.

use crate::error::{Error, Result};
use crate::raster::GrayImage;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// A detected or synthetic circle, in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circle {
    pub cx_px: f64,
    pub cy_px: f64,
    pub r_px: f64,
}

/// One accumulator maximum that survived suppression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub circle: Circle,
    /// Raw accumulator votes at the center.
    pub votes: u32,
    /// Votes normalized by the perimeter point count of the radius.
    pub score: f64,
}

/// Settings for the preprocessing chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessParams {
    /// Gaussian kernel side length, odd.
    pub gaussian_size: u32,
    pub gaussian_sigma: f64,
    /// Adaptive threshold neighborhood side length, odd.
    pub block_size: u32,
    /// A pixel must sit this far below its neighborhood mean to count as
    /// stroke.
    pub offset: f64,
    /// Structuring element side length of the opening, odd.
    pub opening_size: u32,
}

impl Default for PreprocessParams {
    fn default() -> Self {
        PreprocessParams {
            gaussian_size: 5,
            gaussian_sigma: 1.0,
            block_size: 11,
            offset: 2.0,
            opening_size: 3,
        }
    }
}

fn check_kernel(size: u32, img: &GrayImage, what: &str) -> Result<()> {
    if size == 0 || size % 2 == 0 {
        return Err(Error::InvalidParams(format!("{what} size must be odd, got {size}")));
    }
    if size > img.width() || size > img.height() {
        return Err(Error::InvalidParams(format!(
            "{what} size {size} exceeds the {}x{} image",
            img.width(),
            img.height()
        )));
    }
    Ok(())
}

/// Separable Gaussian blur with clamped borders.
pub fn gaussian_blur(img: &GrayImage, size: u32, sigma: f64) -> Result<GrayImage> {
    check_kernel(size, img, "gaussian kernel")?;
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParams("gaussian sigma must be positive".into()));
    }
    let half = (size / 2) as i64;
    let mut kernel = Vec::with_capacity(size as usize);
    for i in -half..=half {
        kernel.push((-((i * i) as f64) / (2.0 * sigma * sigma)).exp());
    }
    let norm: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= norm;
    }

    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut horizontal = vec![0.0f64; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (ki, k) in kernel.iter().enumerate() {
                let sx = (x + ki as i64 - half).clamp(0, w - 1);
                acc += k * img.get(sx as u32, y as u32) as f64;
            }
            horizontal[(y * w + x) as usize] = acc;
        }
    }
    let mut out = GrayImage::new(img.width(), img.height(), 0)?;
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (ki, k) in kernel.iter().enumerate() {
                let sy = (y + ki as i64 - half).clamp(0, h - 1);
                acc += k * horizontal[(sy * w + x) as usize];
            }
            out.set(x as u32, y as u32, acc.round().clamp(0.0, 255.0) as u8);
        }
    }
    Ok(out)
}

/// Binarizes against the local neighborhood mean: pixels sitting more than
/// `offset` below the mean of their (clipped) block become foreground 255.
pub fn adaptive_mean_threshold(img: &GrayImage, block_size: u32, offset: f64) -> Result<GrayImage> {
    check_kernel(block_size, img, "threshold block")?;
    if !offset.is_finite() {
        return Err(Error::InvalidParams("threshold offset must be finite".into()));
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut integral = vec![0u64; (w + 1) * (h + 1)];
    for y in 0..h {
        for x in 0..w {
            integral[(y + 1) * (w + 1) + (x + 1)] = img.get(x as u32, y as u32) as u64
                + integral[y * (w + 1) + (x + 1)]
                + integral[(y + 1) * (w + 1) + x]
                - integral[y * (w + 1) + x];
        }
    }
    let half = (block_size / 2) as usize;
    let mut out = GrayImage::new(img.width(), img.height(), 0)?;
    for y in 0..h {
        let y0 = y.saturating_sub(half);
        let y1 = (y + half).min(h - 1);
        for x in 0..w {
            let x0 = x.saturating_sub(half);
            let x1 = (x + half).min(w - 1);
            let sum = integral[(y1 + 1) * (w + 1) + (x1 + 1)] + integral[y0 * (w + 1) + x0]
                - integral[y0 * (w + 1) + (x1 + 1)]
                - integral[(y1 + 1) * (w + 1) + x0];
            let count = ((y1 + 1 - y0) * (x1 + 1 - x0)) as f64;
            let mean = sum as f64 / count;
            if (img.get(x as u32, y as u32) as f64) < mean - offset {
                out.set(x as u32, y as u32, 255);
            }
        }
    }
    Ok(out)
}

fn is_fg(img: &GrayImage, x: i64, y: i64) -> bool {
    x >= 0
        && y >= 0
        && x < img.width() as i64
        && y < img.height() as i64
        && img.get(x as u32, y as u32) > 127
}

fn erode(img: &GrayImage, size: u32) -> Result<GrayImage> {
    check_kernel(size, img, "structuring element")?;
    let half = (size / 2) as i64;
    let mut out = GrayImage::new(img.width(), img.height(), 0)?;
    for y in 0..img.height() as i64 {
        'px: for x in 0..img.width() as i64 {
            for dy in -half..=half {
                for dx in -half..=half {
                    if !is_fg(img, x + dx, y + dy) {
                        continue 'px;
                    }
                }
            }
            out.set(x as u32, y as u32, 255);
        }
    }
    Ok(out)
}

fn dilate(img: &GrayImage, size: u32) -> Result<GrayImage> {
    check_kernel(size, img, "structuring element")?;
    let half = (size / 2) as i64;
    let mut out = GrayImage::new(img.width(), img.height(), 0)?;
    for y in 0..img.height() as i64 {
        for x in 0..img.width() as i64 {
            let mut any = false;
            for dy in -half..=half {
                for dx in -half..=half {
                    any |= is_fg(img, x + dx, y + dy);
                }
                if any {
                    break;
                }
            }
            if any {
                out.set(x as u32, y as u32, 255);
            }
        }
    }
    Ok(out)
}

/// Morphological opening: erosion followed by dilation.
pub fn morph_open(img: &GrayImage, size: u32) -> Result<GrayImage> {
    dilate(&erode(img, size)?, size)
}

/// Runs the full preprocessing chain, producing a binary stroke mask.
pub fn preprocess(img: &GrayImage, params: &PreprocessParams) -> Result<GrayImage> {
    let blurred = gaussian_blur(img, params.gaussian_size, params.gaussian_sigma)?;
    let binary = adaptive_mean_threshold(&blurred, params.block_size, params.offset)?;
    morph_open(&binary, params.opening_size)
}

/// Integer offsets of the circle of radius `r`, by the midpoint algorithm.
fn circle_offsets(r: i64) -> Vec<(i64, i64)> {
    let mut pts = Vec::new();
    let mut x = r;
    let mut y = 0i64;
    let mut err = 1 - r;
    while y <= x {
        pts.extend_from_slice(&[
            (x, y),
            (y, x),
            (-x, y),
            (-y, x),
            (x, -y),
            (y, -x),
            (-x, -y),
            (-y, -x),
        ]);
        y += 1;
        if err < 0 {
            err += 2 * y + 1;
        } else {
            x -= 1;
            err += 2 * (y - x) + 1;
        }
    }
    pts.sort_unstable();
    pts.dedup();
    pts
}

/// Settings for circle detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoughParams {
    pub r_min: u32,
    pub r_max: u32,
    /// Minimum accumulator score as a fraction of the radius perimeter.
    pub acc_threshold: f64,
    /// Two detections are duplicates when both their centers and their
    /// radii differ by less than this.
    pub min_dist: f64,
}

impl Default for HoughParams {
    fn default() -> Self {
        // The threshold is calibrated on rendered fixtures: genuine outlines
        // score close to 1.0, while chord intersections inside a larger ring
        // rarely clear 0.6.
        HoughParams { r_min: 6, r_max: 74, acc_threshold: 0.7, min_dist: 20.0 }
    }
}

/// Accumulator-based circle Hough over a binary stroke mask. Returns the
/// surviving detections best first; an empty list when nothing passes the
/// threshold.
pub fn detect_circles(img: &GrayImage, params: &HoughParams) -> Result<Vec<Detection>> {
    if params.r_min == 0 || params.r_min > params.r_max {
        return Err(Error::InvalidParams(format!(
            "invalid radius range {}..={}",
            params.r_min, params.r_max
        )));
    }
    if !(params.acc_threshold > 0.0 && params.acc_threshold <= 1.0) {
        return Err(Error::InvalidParams("accumulator threshold must lie in (0, 1]".into()));
    }
    if !(params.min_dist.is_finite() && params.min_dist >= 0.0) {
        return Err(Error::InvalidParams("min_dist must be non-negative".into()));
    }

    let (w, h) = (img.width() as i64, img.height() as i64);
    let mut fg = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if img.get(x as u32, y as u32) > 127 {
                fg.push((x, y));
            }
        }
    }
    if fg.is_empty() {
        return Ok(Vec::new());
    }

    struct Candidate {
        cx: i64,
        cy: i64,
        r: u32,
        votes: u32,
        score: f64,
    }

    let mut candidates: Vec<Candidate> = Vec::new();
    let mut acc = vec![0u32; (w * h) as usize];
    for r in params.r_min..=params.r_max {
        acc.iter_mut().for_each(|v| *v = 0);
        let offsets = circle_offsets(r as i64);
        for &(x, y) in &fg {
            for &(dx, dy) in &offsets {
                let cx = x - dx;
                let cy = y - dy;
                if cx >= 0 && cy >= 0 && cx < w && cy < h {
                    acc[(cy * w + cx) as usize] += 1;
                }
            }
        }
        let perimeter = offsets.len() as f64;
        let min_votes = (params.acc_threshold * perimeter).ceil() as u32;
        for cy in 0..h {
            for cx in 0..w {
                let votes = acc[(cy * w + cx) as usize];
                if votes >= min_votes {
                    candidates.push(Candidate {
                        cx,
                        cy,
                        r,
                        votes,
                        score: votes as f64 / perimeter,
                    });
                }
            }
        }
    }

    candidates.sort_by(|a, b| {
        b.score
            .partial_cmp(&a.score)
            .expect("scores are finite")
            .then(b.votes.cmp(&a.votes))
            .then(a.r.cmp(&b.r))
            .then(a.cy.cmp(&b.cy))
            .then(a.cx.cmp(&b.cx))
    });

    let mut kept: Vec<Detection> = Vec::new();
    for c in candidates {
        let duplicate = kept.iter().any(|k| {
            let dc = ((k.circle.cx_px - c.cx as f64).powi(2)
                + (k.circle.cy_px - c.cy as f64).powi(2))
            .sqrt();
            dc < params.min_dist && (k.circle.r_px - c.r as f64).abs() < params.min_dist
        });
        if !duplicate {
            kept.push(Detection {
                circle: Circle { cx_px: c.cx as f64, cy_px: c.cy as f64, r_px: c.r as f64 },
                votes: c.votes,
                score: c.score,
            });
        }
    }
    Ok(kept)
}

/// Role assignment result; a missing role is a value, not an error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassifiedCircles {
    pub gaze: Option<Circle>,
    pub target: Option<Circle>,
}

/// Splits detections into roles by radius band: the smallest circle below
/// `gaze_r_max` is the gaze marker, the largest at or above `target_r_min`
/// is the target outline. Ties go to the higher accumulator score.
pub fn classify_circles(
    detections: &[Detection],
    gaze_r_max: f64,
    target_r_min: f64,
) -> Result<ClassifiedCircles> {
    if !(gaze_r_max > 0.0 && gaze_r_max < target_r_min) {
        return Err(Error::InvalidParams(
            "radius bands must satisfy 0 < gaze_r_max < target_r_min".into(),
        ));
    }
    let mut gaze: Option<&Detection> = None;
    let mut target: Option<&Detection> = None;
    for d in detections {
        if d.circle.r_px < gaze_r_max {
            let better = match gaze {
                None => true,
                Some(g) => {
                    d.circle.r_px < g.circle.r_px
                        || (d.circle.r_px == g.circle.r_px && d.score > g.score)
                }
            };
            if better {
                gaze = Some(d);
            }
        } else if d.circle.r_px >= target_r_min {
            let better = match target {
                None => true,
                Some(t) => {
                    d.circle.r_px > t.circle.r_px
                        || (d.circle.r_px == t.circle.r_px && d.score > t.score)
                }
            };
            if better {
                target = Some(d);
            }
        }
    }
    Ok(ClassifiedCircles {
        gaze: gaze.map(|d| d.circle),
        target: target.map(|d| d.circle),
    })
}

/// Euclidean and Manhattan distance between two circle centers, px.
pub fn center_distances(a: &Circle, b: &Circle) -> (f64, f64) {
    let dx = b.cx_px - a.cx_px;
    let dy = b.cy_px - a.cy_px;
    ((dx * dx + dy * dy).sqrt(), dx.abs() + dy.abs())
}

/// Pixel-to-centimeter scale held as the original calibration ratio, so the
/// calibration distance converts back without rounding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PxToCm {
    ref_px: f64,
    ref_cm: f64,
}

impl Default for PxToCm {
    fn default() -> Self {
        PxToCm { ref_px: 59.0, ref_cm: 2.2 }
    }
}

impl PxToCm {
    pub fn new(ref_px: f64, ref_cm: f64) -> Result<Self> {
        if !(ref_px.is_finite() && ref_px > 0.0 && ref_cm.is_finite() && ref_cm > 0.0) {
            return Err(Error::InvalidParams("px/cm calibration must be positive".into()));
        }
        Ok(PxToCm { ref_px, ref_cm })
    }

    pub fn cm_of(&self, d_px: f64) -> f64 {
        d_px / self.ref_px * self.ref_cm
    }

    pub fn cm_per_px(&self) -> f64 {
        self.ref_cm / self.ref_px
    }
}

/// On-screen extent to visual angle: `2 atan(d / 2D)`, degrees.
pub fn visual_angle_deg(d_cm: f64, eye_distance_cm: f64) -> Result<f64> {
    if !(eye_distance_cm.is_finite() && eye_distance_cm > 0.0) {
        return Err(Error::InvalidParams("eye distance must be positive".into()));
    }
    if !(d_cm.is_finite() && d_cm >= 0.0) {
        return Err(Error::InvalidParams("extent must be non-negative".into()));
    }
    Ok((2.0 * (d_cm / (2.0 * eye_distance_cm)).atan()).to_degrees())
}

/// Gaze-to-target separation in every unit the report needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceResult {
    pub euclid_px: f64,
    pub manhattan_px: f64,
    pub euclid_cm: f64,
    pub visual_angle_deg: f64,
}

/// Combines the center distance with the scale calibration and the viewing
/// distance.
pub fn measure_separation(
    gaze: &Circle,
    target: &Circle,
    scale: &PxToCm,
    eye_distance_cm: f64,
) -> Result<DistanceResult> {
    let (euclid_px, manhattan_px) = center_distances(gaze, target);
    let euclid_cm = scale.cm_of(euclid_px);
    Ok(DistanceResult {
        euclid_px,
        manhattan_px,
        euclid_cm,
        visual_angle_deg: visual_angle_deg(euclid_cm, eye_distance_cm)?,
    })
}

/// Settings for the deterministic scene renderer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneParams {
    pub width: u32,
    pub height: u32,
    pub background: u8,
    pub stroke: u8,
    pub stroke_width: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SceneParams {
    fn default() -> Self {
        SceneParams {
            width: 320,
            height: 240,
            background: 220,
            stroke: 30,
            stroke_width: 2.5,
            noise_std: 0.0,
            seed: 0,
        }
    }
}

/// Draws anti-aliased circle outlines on a flat background, with optional
/// Gaussian pixel noise. Bit-identical for identical inputs and seed.
pub fn render_scene(circles: &[Circle], params: &SceneParams) -> Result<GrayImage> {
    if !(params.stroke_width.is_finite() && params.stroke_width > 0.0) {
        return Err(Error::InvalidParams("stroke width must be positive".into()));
    }
    if !(params.noise_std.is_finite() && params.noise_std >= 0.0) {
        return Err(Error::InvalidParams("noise std must be non-negative".into()));
    }
    let (w, h) = (params.width as f64, params.height as f64);
    for c in circles {
        if !(c.r_px > 0.0) {
            return Err(Error::InvalidParams("circle radius must be positive".into()));
        }
        let reach = c.r_px + params.stroke_width / 2.0 + 1.0;
        if c.cx_px - reach < 0.0
            || c.cy_px - reach < 0.0
            || c.cx_px + reach > w - 1.0
            || c.cy_px + reach > h - 1.0
        {
            return Err(Error::InvalidParams(format!(
                "circle at ({}, {}) r {} does not fit the {}x{} scene",
                c.cx_px, c.cy_px, c.r_px, params.width, params.height
            )));
        }
    }

    let mut img = GrayImage::new(params.width, params.height, params.background)?;
    let bg = params.background as f64;
    let ink = params.stroke as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let noise = if params.noise_std > 0.0 {
        Some(
            Normal::new(0.0, params.noise_std)
                .map_err(|e| Error::InvalidParams(format!("noise: {e}")))?,
        )
    } else {
        None
    };

    for y in 0..params.height {
        for x in 0..params.width {
            let mut alpha: f64 = 0.0;
            for c in circles {
                let d = ((x as f64 - c.cx_px).powi(2) + (y as f64 - c.cy_px).powi(2)).sqrt();
                let cover = (params.stroke_width / 2.0 + 0.5 - (d - c.r_px).abs())
                    .clamp(0.0, 1.0);
                alpha = alpha.max(cover);
            }
            let mut v = bg + (ink - bg) * alpha;
            if let Some(n) = &noise {
                v += n.sample(&mut rng);
            }
            img.set(x, y, v.round().clamp(0.0, 255.0) as u8);
        }
    }
    Ok(img)
}
