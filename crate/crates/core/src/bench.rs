//! Synthetic two-view scenes with ground truth, evaluation metrics and the
//! per-scene comparison of rankings under guided RANSAC.
//!
//! Descriptors are `D = 8 * cells` values: one 8-bin orientation histogram
//! per cell. Describing a patch at an orientation that differs from the
//! patch's true image orientation by `delta` shifts every histogram
//! cyclically by `delta / 45deg` bins (linearly interpolated), which is what
//! makes fixed-orientation descriptors roll dependent.

use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Matrix3, Point2, Point3, Vector3};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::angle::wrap_angle;
use crate::dtree::TreeParams;
use crate::estimator::{estimate_prepared, guided_ransac, prepare_pipeline, EstimateError, RansacConfig};
use crate::features::{normalize, Feature, FeatureSet, OrientationMode, PutativeMatch};
use crate::geometry::{fundamental_from_cameras, CameraModel, FundamentalMatrix, GeometryError, PointPair};
use crate::global_rank::{match_pairs, prob_order};
use crate::pipeline::{preprocess, train_models, ImageSide, Models, PipelineConfig, PipelineError, SfmCounter, TrainingPair};
use crate::standard_match::standard_matches;
use crate::seed;

pub const IMAGE_WIDTH: f64 = 1280.0;
pub const IMAGE_HEIGHT: f64 = 960.0;
pub const FOCAL: f64 = 800.0;
/// Mean root Sampson distance (pixels) below which an estimate succeeds.
pub const SUCCESS_THRESHOLD: f64 = 10.0;

const BINS: usize = 8;
const SCENE_CENTER_DEPTH: f64 = 11.0;
/// Radius around the principal point where scene points are placed in image 1.
const PLACEMENT_RADIUS: f64 = 420.0;
const BORDER: f64 = 8.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BenchError {
    #[error("no scene point is visible in both images")]
    EmptyScene,
    #[error("invalid scene config: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    /// Points with a descriptor of their own.
    pub unique_points: usize,
    pub repeat_groups: usize,
    /// Group sizes are drawn uniformly from `repeat_size_min..=repeat_size_max`.
    pub repeat_size_min: usize,
    pub repeat_size_max: usize,
    /// Per-coordinate std of each repeated instance around its prototype.
    pub instance_noise: f64,
    /// Per-coordinate std of the per-detection descriptor noise.
    pub view_noise: f64,
    pub dropout: f64,
    /// Unrelated features added to each image.
    pub outliers: usize,
    pub baseline: f64,
    /// In-plane rotation of image 2 relative to image 1, radians.
    pub roll: f64,
    pub pixel_noise: f64,
    /// Std of detected orientations, radians.
    pub orientation_noise: f64,
    /// Relative std of detected scales.
    pub scale_noise: f64,
    pub descriptor_dim: usize,
    pub seed: u64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            unique_points: 200,
            repeat_groups: 0,
            repeat_size_min: 5,
            repeat_size_max: 10,
            instance_noise: 0.02,
            view_noise: 0.05,
            dropout: 0.1,
            outliers: 50,
            baseline: 1.0,
            roll: 0.0,
            pixel_noise: 0.5,
            orientation_noise: 3f64.to_radians(),
            scale_noise: 0.05,
            descriptor_dim: 32,
            seed: 0,
        }
    }
}

impl SceneConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.descriptor_dim == 0 || !self.descriptor_dim.is_multiple_of(BINS) {
            return Err(BenchError::InvalidConfig("descriptor_dim must be a positive multiple of 8"));
        }
        if !(0.0..=1.0).contains(&self.dropout) {
            return Err(BenchError::InvalidConfig("dropout must lie in [0, 1]"));
        }
        if self.repeat_groups > 0 && (self.repeat_size_min == 0 || self.repeat_size_min > self.repeat_size_max) {
            return Err(BenchError::InvalidConfig("bad repeat size range"));
        }
        let noises = [self.instance_noise, self.view_noise, self.pixel_noise, self.orientation_noise, self.scale_noise];
        if noises.iter().any(|n| !(n.is_finite() && *n >= 0.0)) {
            return Err(BenchError::InvalidConfig("noise levels must be finite and non-negative"));
        }
        if !(self.baseline.is_finite() && self.baseline > 0.0) || !self.roll.is_finite() {
            return Err(BenchError::InvalidConfig("baseline must be positive and roll finite"));
        }
        Ok(())
    }
}

/// Camera intrinsics shared by all synthetic cameras.
pub fn intrinsics(focal: f64) -> Matrix3<f64> {
    Matrix3::new(focal, 0.0, IMAGE_WIDTH / 2.0, 0.0, focal, IMAGE_HEIGHT / 2.0, 0.0, 0.0, 1.0)
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = libm::sincos(a);
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Camera at `center` looking at `target`, then rolled about its axis so the
/// image content turns by `roll`.
fn look_at(k: Matrix3<f64>, center: Vector3<f64>, target: Vector3<f64>, roll: f64) -> Result<CameraModel, GeometryError> {
    let z = (target - center).normalize();
    let x = Vector3::y().cross(&z).normalize();
    let y = z.cross(&x);
    let base = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
    let r = rot_z(roll) * base;
    let r = nalgebra::Rotation3::from_matrix(&r).into_inner();
    CameraModel::new(k, r, -(r * center))
}

/// A generic two-view configuration looking at points around depth 10.
pub fn random_camera_pair(rng: &mut impl Rng) -> (CameraModel, CameraModel) {
    let k1 = intrinsics(rng.random_range(600.0..1000.0));
    let k2 = intrinsics(rng.random_range(600.0..1000.0));
    let target = Vector3::new(0.0, 0.0, 10.0);
    let c1 = Vector3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), 0.0);
    let c2 = Vector3::new(rng.random_range(0.5..2.5), rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    let cam1 = look_at(k1, c1, target, rng.random_range(-0.2..0.2)).expect("valid camera");
    let cam2 = look_at(k2, c2 * sign, target, rng.random_range(-PI..PI)).expect("valid camera");
    (cam1, cam2)
}

/// Cyclic shift of every 8-bin histogram by `delta / 45deg` bins.
pub fn rotate_descriptor(v: &[f64], delta: f64) -> Vec<f64> {
    let b = wrap_angle(delta) / (2.0 * PI / BINS as f64);
    let k = libm::floor(b);
    let frac = b - k;
    let k = (k as i64).rem_euclid(BINS as i64) as usize;
    let mut out = alloc::vec![0.0; v.len()];
    for (cell_out, cell) in out.chunks_mut(BINS).zip(v.chunks(BINS)) {
        for (j, o) in cell_out.iter_mut().enumerate() {
            let a = cell[(j + 2 * BINS - k) % BINS];
            let b = cell[(j + 2 * BINS - k - 1) % BINS];
            *o = (1.0 - frac) * a + frac * b;
        }
    }
    out
}

fn gaussian_vec(rng: &mut impl Rng, d: usize, std: f64) -> Vec<f64> {
    (0..d).map(|_| std * normal(rng)).collect::<Vec<f64>>()
}

fn random_unit(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    loop {
        let mut v = gaussian_vec(rng, d, 1.0);
        if normalize(&mut v) {
            return v;
        }
    }
}

fn normal(rng: &mut impl Rng) -> f64 {
    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
}

/// Per-feature data needed to describe the feature at any orientation.
#[derive(Debug, Clone, PartialEq)]
struct Detection {
    x: f64,
    y: f64,
    scale: f64,
    orientation: f64,
    /// True image orientation of the patch.
    true_orientation: f64,
    patch: Vec<f64>,
    noise: Vec<f64>,
    origin: Option<usize>,
}

impl Detection {
    fn describe(&self, at: f64) -> Vec<f64> {
        let mut d = rotate_descriptor(&self.patch, at - self.true_orientation);
        for (a, n) in d.iter_mut().zip(&self.noise) {
            *a += n;
        }
        if !normalize(&mut d) {
            d = alloc::vec![0.0; self.patch.len()];
            d[0] = 1.0;
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneImage {
    pub natural: FeatureSet,
    /// Scene point each feature was detected from; `None` for clutter.
    pub origin: Vec<Option<usize>>,
    detections: Vec<Detection>,
}

impl SceneImage {
    /// The same detections described with every orientation fixed at `angle`.
    pub fn fixed_set(&self, angle: f64) -> FeatureSet {
        let angle = wrap_angle(angle);
        let features = self
            .detections
            .iter()
            .map(|d| Feature::new(d.x, d.y, d.scale, angle, d.describe(angle)).expect("valid detection"))
            .collect();
        FeatureSet::new(
            self.natural.image_id.clone(),
            OrientationMode::Fixed(angle),
            self.natural.dim,
            features,
        )
        .expect("consistent dimension")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub config: SceneConfig,
    pub cameras: [CameraModel; 2],
    pub points: Vec<Point3<f64>>,
    /// Point ids of each repeated group.
    pub groups: Vec<Vec<usize>>,
    pub f_gt: FundamentalMatrix,
    pub images: [SceneImage; 2],
    /// Noiseless projections of every point visible in both images.
    pub gt_pairs: Vec<PointPair>,
}

impl SyntheticScene {
    pub fn image(&self, side: ImageSide) -> &SceneImage {
        match side {
            ImageSide::First => &self.images[0],
            ImageSide::Second => &self.images[1],
        }
    }

    pub fn fixed_set(&self, side: ImageSide, angle: f64) -> FeatureSet {
        self.image(side).fixed_set(angle)
    }

    /// True correspondence: both features come from the same scene point.
    pub fn label(&self, i1: usize, i2: usize) -> bool {
        match (self.images[0].origin.get(i1), self.images[1].origin.get(i2)) {
            (Some(Some(a)), Some(Some(b))) => a == b,
            _ => false,
        }
    }

    /// Feature index pairs of all true correspondences.
    pub fn true_correspondences(&self) -> Vec<(usize, usize)> {
        let mut by_point = alloc::collections::BTreeMap::new();
        for (i, o) in self.images[1].origin.iter().enumerate() {
            if let Some(p) = o {
                by_point.insert(*p, i);
            }
        }
        let mut out: Vec<(usize, usize)> = self.images[0]
            .origin
            .iter()
            .enumerate()
            .filter_map(|(i, o)| o.and_then(|p| by_point.get(&p).map(|&j| (i, j))))
            .collect();
        out.sort_unstable();
        out
    }
}

fn in_bounds(p: &Point2<f64>) -> bool {
    p.x >= BORDER && p.x <= IMAGE_WIDTH - BORDER && p.y >= BORDER && p.y <= IMAGE_HEIGHT - BORDER
}

struct PointSpec {
    x: Point3<f64>,
    tangent: Vector3<f64>,
    size: f64,
    patch: Vec<f64>,
}

fn perpendicular(dir: &Vector3<f64>, ray: &Vector3<f64>) -> Vector3<f64> {
    let r = ray.normalize();
    let t = dir - r * dir.dot(&r);
    if t.norm() < 1e-9 {
        r.cross(&Vector3::x()).normalize()
    } else {
        t.normalize()
    }
}

/// Builds a scene from its config; identical configs give identical scenes.
pub fn gen_scene(cfg: &SceneConfig) -> Result<SyntheticScene, BenchError> {
    cfg.validate()?;
    let mut rng = seed::rng(cfg.seed, "scene");
    let k = intrinsics(FOCAL);
    let k_inv = k.try_inverse().expect("invertible intrinsics");
    let target = Vector3::new(0.0, 0.0, SCENE_CENTER_DEPTH);
    let cam1 = look_at(k, Vector3::zeros(), target, 0.0)?;
    let center2 = Vector3::new(cfg.baseline, rng.random_range(-0.1..0.1), rng.random_range(-0.1..0.1));
    let cam2 = look_at(k, center2, target, cfg.roll)?;
    let f_gt = fundamental_from_cameras(&cam1, &cam2)?;
    let dim = cfg.descriptor_dim;

    let sample_point = |rng: &mut rand_chacha::ChaCha8Rng| -> Option<Point3<f64>> {
        for _ in 0..100 {
            let (dx, dy) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if dx * dx + dy * dy > 1.0 {
                continue;
            }
            let u = Vector3::new(IMAGE_WIDTH / 2.0 + dx * PLACEMENT_RADIUS, IMAGE_HEIGHT / 2.0 + dy * PLACEMENT_RADIUS, 1.0);
            let z = rng.random_range(8.0..14.0);
            let x = Point3::from(k_inv * u * z);
            if cam2.project(&x).is_some_and(|p| in_bounds(&p)) {
                return Some(x);
            }
        }
        None
    };

    let mut specs: Vec<PointSpec> = Vec::new();
    for _ in 0..cfg.unique_points {
        let Some(x) = sample_point(&mut rng) else { continue };
        let dir = Vector3::new(normal(&mut rng), normal(&mut rng), normal(&mut rng));
        specs.push(PointSpec {
            tangent: perpendicular(&dir, &x.coords),
            size: rng.random_range(0.04..0.1),
            patch: random_unit(&mut rng, dim),
            x,
        });
    }
    let mut groups = Vec::new();
    for _ in 0..cfg.repeat_groups {
        let size = rng.random_range(cfg.repeat_size_min..=cfg.repeat_size_max);
        let proto = random_unit(&mut rng, dim);
        let a = rng.random_range(-PI..PI);
        let dir = Vector3::new(libm::cos(a), libm::sin(a), 0.0);
        let phys = rng.random_range(0.04..0.1);
        let mut members = Vec::new();
        for _ in 0..size {
            let Some(x) = sample_point(&mut rng) else { continue };
            let noise = gaussian_vec(&mut rng, dim, cfg.instance_noise);
            members.push(specs.len());
            specs.push(PointSpec {
                tangent: perpendicular(&dir, &x.coords),
                size: phys * rng.random_range(0.95..1.05),
                patch: proto.iter().zip(&noise).map(|(p, n)| p + n).collect(),
                x,
            });
        }
        groups.push(members);
    }

    let mut gt_pairs = Vec::new();
    for s in &specs {
        if let (Some(a), Some(b)) = (cam1.project(&s.x), cam2.project(&s.x)) {
            if in_bounds(&a) && in_bounds(&b) {
                gt_pairs.push(PointPair::new([a.x, a.y], [b.x, b.y]));
            }
        }
    }
    if gt_pairs.is_empty() {
        return Err(BenchError::EmptyScene);
    }

    let mut images = Vec::with_capacity(2);
    for (side, cam) in [cam1, cam2].iter().enumerate() {
        let mut dets = Vec::new();
        for (id, s) in specs.iter().enumerate() {
            let (Some(p), Some(tip)) = (cam.project(&s.x), cam.project(&(s.x + s.tangent * s.size))) else {
                continue;
            };
            if !in_bounds(&p) || rng.random::<f64>() < cfg.dropout {
                continue;
            }
            let d = tip - p;
            let true_orientation = libm::atan2(d.y, d.x);
            let scale = (d.norm() * (1.0 + cfg.scale_noise * normal(&mut rng))).max(0.5);
            let orientation = wrap_angle(true_orientation + cfg.orientation_noise * normal(&mut rng));
            dets.push(Detection {
                x: p.x + cfg.pixel_noise * normal(&mut rng),
                y: p.y + cfg.pixel_noise * normal(&mut rng),
                scale,
                orientation,
                true_orientation,
                patch: s.patch.clone(),
                noise: gaussian_vec(&mut rng, dim, cfg.view_noise),
                origin: Some(id),
            });
        }
        for _ in 0..cfg.outliers {
            let o = rng.random_range(-PI..PI);
            dets.push(Detection {
                x: rng.random_range(BORDER..IMAGE_WIDTH - BORDER),
                y: rng.random_range(BORDER..IMAGE_HEIGHT - BORDER),
                scale: rng.random_range(2.0..8.0),
                orientation: o,
                true_orientation: o,
                patch: random_unit(&mut rng, dim),
                noise: gaussian_vec(&mut rng, dim, cfg.view_noise),
                origin: None,
            });
        }
        dets.shuffle(&mut rng);
        let features = dets
            .iter()
            .map(|d| Feature::new(d.x, d.y, d.scale, d.orientation, d.describe(d.orientation)).expect("valid detection"))
            .collect();
        let id = if side == 0 { "synthetic-1" } else { "synthetic-2" };
        let natural = FeatureSet::new(id, OrientationMode::Natural, dim, features).expect("consistent dimension");
        images.push(SceneImage {
            natural,
            origin: dets.iter().map(|d| d.origin).collect(),
            detections: dets,
        });
    }
    let second = images.pop().expect("two images");
    let first = images.pop().expect("two images");

    Ok(SyntheticScene {
        config: cfg.clone(),
        cameras: [cam1, cam2],
        points: specs.iter().map(|s| s.x).collect(),
        groups,
        f_gt,
        images: [first, second],
        gt_pairs,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub mean_root_sampson: f64,
    pub success: bool,
}

/// Mean Sampson distance of the ground-truth pairs under `f`.
pub fn evaluate(f: &FundamentalMatrix, gt_pairs: &[PointPair], threshold: f64) -> Evaluation {
    let mean = if gt_pairs.is_empty() {
        f64::INFINITY
    } else {
        gt_pairs.iter().map(|p| f.sampson_distance(p)).sum::<f64>() / gt_pairs.len() as f64
    };
    Evaluation { mean_root_sampson: mean, success: mean < threshold }
}

/// Precision of every prefix of a ranked label list.
pub fn cumulative_precision(labels: &[bool]) -> Vec<f64> {
    let mut hits = 0usize;
    labels
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            hits += usize::from(l);
            hits as f64 / (i + 1) as f64
        })
        .collect()
}

/// Ranks `1, 2, 3, ...` thinned to roughly `per_decade` points per decade,
/// always ending at `n`.
pub fn log_rank_grid(n: usize, per_decade: usize) -> Vec<usize> {
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    let step = libm::pow(10.0, 1.0 / per_decade.max(1) as f64);
    let mut r = 1.0f64;
    loop {
        let k = libm::round(r) as usize;
        if k >= n {
            break;
        }
        if out.last() != Some(&k) {
            out.push(k);
        }
        r *= step;
    }
    out.push(n);
    out
}

/// `(rank, precision)` on a log-spaced rank grid.
pub fn precision_curve(labels: &[bool], per_decade: usize) -> Vec<(usize, f64)> {
    let full = cumulative_precision(labels);
    log_rank_grid(labels.len(), per_decade).into_iter().map(|k| (k, full[k - 1])).collect()
}

/// Fraction of inliers among the first `k` labels (all of them if fewer).
pub fn precision_at(labels: &[bool], k: usize) -> f64 {
    let n = k.min(labels.len());
    if n == 0 {
        return 0.0;
    }
    labels[..n].iter().filter(|&&l| l).count() as f64 / n as f64
}

/// Ranking methods compared by the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Distance-ratio list, `prob = 1 - d_r`.
    DistanceRatio,
    /// Mutual-match list, `prob = t_k`.
    SimilarityWeight,
    Pipeline,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::DistanceRatio, Method::SimilarityWeight, Method::Pipeline];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::DistanceRatio => "d_r",
            Method::SimilarityWeight => "t_k",
            Method::Pipeline => "pipeline",
        }
    }
}

/// Baseline list with probabilities from a single score, best first.
pub fn baseline_ranking(matches: &[PutativeMatch], method: Method) -> Vec<PutativeMatch> {
    let mut out: Vec<PutativeMatch> = matches
        .iter()
        .cloned()
        .map(|mut m| {
            m.prob = Some(match method {
                Method::DistanceRatio => 1.0 - m.d_r.unwrap_or(1.0),
                Method::SimilarityWeight => m.t_k.unwrap_or(0.0),
                Method::Pipeline => m.prob.unwrap_or(0.0),
            });
            m
        })
        .collect();
    out.sort_by(prob_order);
    out
}

/// Labels of a ranked list against the scene's ground truth.
pub fn ranked_labels(scene: &SyntheticScene, ranked: &[PutativeMatch]) -> Vec<bool> {
    ranked.iter().map(|m| scene.label(m.i1, m.i2)).collect()
}

/// Guided RANSAC on a ranked list, evaluated on the scene's ground truth.
pub fn estimate_and_evaluate(
    scene: &SyntheticScene,
    ranked: &[PutativeMatch],
    ransac: &RansacConfig,
) -> Result<(Evaluation, usize, usize), EstimateError> {
    let pairs = match_pairs(ranked, &scene.images[0].natural, &scene.images[1].natural);
    let probs: Vec<f64> = ranked.iter().map(|m| m.prob.unwrap_or(0.0)).collect();
    let r = guided_ransac(&pairs, &probs, ransac)?;
    Ok((evaluate(&r.fundamental(), &scene.gt_pairs, SUCCESS_THRESHOLD), r.support, r.iterations))
}

/// One report line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scene: String,
    pub method: Method,
    pub seed: u64,
    pub mean_root_sampson: f64,
    pub success: bool,
    pub iterations: usize,
    pub wall_ms: u64,
}

/// Owned fixed-orientation sets for one training scene.
pub struct TrainingScene<'a> {
    pub scene: &'a SyntheticScene,
    pub fixed1: FeatureSet,
    pub fixed2: FeatureSet,
    pub angle: f64,
}

impl<'a> TrainingScene<'a> {
    /// Fixed sets at the angle of the first branch the pipeline would run.
    pub fn new(scene: &'a SyntheticScene, cfg: &PipelineConfig) -> Result<Self, PipelineError> {
        let pre = preprocess(&scene.images[0].natural, &scene.images[1].natural, cfg)?;
        let angle = pre.branches[0].1;
        Ok(Self { scene, fixed1: scene.images[0].fixed_set(0.0), fixed2: scene.images[1].fixed_set(angle), angle })
    }

    pub fn pair<'b>(&'b self, label: &'b dyn Fn(usize, usize) -> bool) -> TrainingPair<'b> {
        TrainingPair {
            f1: &self.scene.images[0].natural,
            f2: &self.scene.images[1].natural,
            fixed1: &self.fixed1,
            fixed2: &self.fixed2,
            angle: self.angle,
            label,
        }
    }
}

/// Trains both classifiers on labelled synthetic scenes.
pub fn train_on_scenes(scenes: &[SyntheticScene], cfg: &PipelineConfig, params: &TreeParams) -> Result<Models, PipelineError> {
    let prepared = scenes.iter().map(|s| TrainingScene::new(s, cfg)).collect::<Result<Vec<_>, _>>()?;
    let labels: Vec<_> = scenes.iter().map(|s| move |i: usize, j: usize| s.label(i, j)).collect();
    let pairs: Vec<TrainingPair<'_>> = prepared.iter().zip(&labels).map(|(t, l)| t.pair(l)).collect();
    train_models(&pairs, cfg, params)
}

/// Precision at this rank is what the ranking comparison reports.
pub const PRECISION_RANK: usize = 100;

/// Rankings, precision and estimation rows of one scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneOutcome {
    pub name: String,
    /// Inlier fraction of the distance-ratio list (NaN without labels).
    pub lowe_inlier_rate: f64,
    pub lowe_count: usize,
    pub roll: Option<f64>,
    /// Precision at [`PRECISION_RANK`] per method in [`Method::ALL`] order
    /// (NaN without labels).
    pub precision: [f64; 3],
    pub rows: Vec<ReportRow>,
}

impl SceneOutcome {
    pub fn precision_of(&self, method: Method) -> f64 {
        self.precision[Method::ALL.iter().position(|m| *m == method).expect("listed method")]
    }

    /// Successful estimations of `method` averaged over seeds.
    pub fn success_rate(&self, method: Method) -> f64 {
        let rows: Vec<&ReportRow> = self.rows.iter().filter(|r| r.method == method).collect();
        if rows.is_empty() {
            return 0.0;
        }
        rows.iter().filter(|r| r.success).count() as f64 / rows.len() as f64
    }
}

/// One image pair to evaluate. `label` is the correspondence oracle when
/// it is known; `clock` returns milliseconds and times each estimation.
pub struct PairInput<'a> {
    pub name: &'a str,
    pub f1: &'a FeatureSet,
    pub f2: &'a FeatureSet,
    pub gt_pairs: &'a [PointPair],
    pub label: Option<&'a dyn Fn(usize, usize) -> bool>,
    pub clock: &'a dyn Fn() -> u64,
}

fn no_clock() -> u64 {
    0
}

fn row(name: &str, method: Method, seed: u64, e: Option<(Evaluation, usize)>, wall_ms: u64) -> ReportRow {
    let (mean_root_sampson, success, iterations) = match e {
        Some((e, it)) => (e.mean_root_sampson, e.success, it),
        None => (f64::INFINITY, false, 0),
    };
    ReportRow { scene: name.into(), method, seed, mean_root_sampson, success, iterations, wall_ms }
}

fn labelled_precision(label: Option<&dyn Fn(usize, usize) -> bool>, ranked: &[PutativeMatch]) -> (f64, f64) {
    match label {
        Some(l) => {
            let labels: Vec<bool> = ranked.iter().map(|m| l(m.i1, m.i2)).collect();
            let rate = if labels.is_empty() { 0.0 } else { labels.iter().filter(|&&b| b).count() as f64 / labels.len() as f64 };
            (precision_at(&labels, PRECISION_RANK), rate)
        }
        None => (f64::NAN, f64::NAN),
    }
}

/// Ranks one pair with both baselines and the pipeline, then runs guided
/// RANSAC once per seed on every ranking. The pipeline precision is taken
/// from its first branch; estimation uses all branches.
pub fn evaluate_pair(
    input: &PairInput<'_>,
    fixed: impl FnMut(ImageSide, f64) -> Option<FeatureSet>,
    models: &Models,
    cfg: &PipelineConfig,
    seeds: &[u64],
    counter: SfmCounter<'_>,
) -> Result<SceneOutcome, PipelineError> {
    let (f1, f2, name) = (input.f1, input.f2, input.name);
    let prepared = prepare_pipeline(f1, f2, fixed, models, cfg, counter)?;
    let lists = standard_matches(f1, f2, cfg.ratio_max)?;
    let lowe = baseline_ranking(&lists.lowe, Method::DistanceRatio);
    let blogs = baseline_ranking(&lists.blogs, Method::SimilarityWeight);
    let pipeline = prepared.branches[0].1.matches();
    let (p_lowe, lowe_inlier_rate) = labelled_precision(input.label, &lowe);
    let precision = [p_lowe, labelled_precision(input.label, &blogs).0, labelled_precision(input.label, &pipeline).0];

    let eval = |f: &FundamentalMatrix| evaluate(f, input.gt_pairs, SUCCESS_THRESHOLD);
    let mut rows = Vec::new();
    for &seed in seeds {
        let ransac = RansacConfig { seed, ..cfg.ransac };
        for (method, list) in [(Method::DistanceRatio, &lowe), (Method::SimilarityWeight, &blogs)] {
            let t0 = (input.clock)();
            let pairs = match_pairs(list, f1, f2);
            let probs: Vec<f64> = list.iter().map(|m| m.prob.unwrap_or(0.0)).collect();
            let r = guided_ransac(&pairs, &probs, &ransac).ok().map(|r| (eval(&r.fundamental()), r.iterations));
            rows.push(row(name, method, seed, r, (input.clock)().saturating_sub(t0)));
        }
        let t0 = (input.clock)();
        let r = estimate_prepared(&prepared, f1, f2, &ransac).ok().map(|run| {
            let it = run.branches.iter().filter_map(|b| b.result.as_ref().ok()).map(|r| r.iterations).sum();
            (eval(&run.result().fundamental()), it)
        });
        rows.push(row(name, Method::Pipeline, seed, r, (input.clock)().saturating_sub(t0)));
    }
    Ok(SceneOutcome {
        name: name.into(),
        lowe_inlier_rate,
        lowe_count: lowe.len(),
        roll: prepared.roll.map(|r| r.alpha_exp),
        precision,
        rows,
    })
}

/// [`evaluate_pair`] on a synthetic scene, untimed.
pub fn evaluate_scene(
    name: &str,
    scene: &SyntheticScene,
    models: &Models,
    cfg: &PipelineConfig,
    seeds: &[u64],
    counter: SfmCounter<'_>,
) -> Result<SceneOutcome, PipelineError> {
    let label = |i: usize, j: usize| scene.label(i, j);
    let input = PairInput {
        name,
        f1: &scene.images[0].natural,
        f2: &scene.images[1].natural,
        gt_pairs: &scene.gt_pairs,
        label: Some(&label),
        clock: &no_clock,
    };
    evaluate_pair(&input, |side, a| Some(scene.fixed_set(side, a)), models, cfg, seeds, counter)
}
