//! Stage orchestration: standard matches and roll, per-branch clustering and
//! ranking, and collection of training data for both classifiers.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::angle::wrap_angle;
use crate::clustering::{self, agglomerative_cluster, expand_to_matches, match_clusters, ClusterError, Clustering};
use crate::dtree::{DtreeError, LabeledDataset, ModelSchemaError, TreeModel, TreeParams};
use crate::estimator::{Branch, EstimateError, RansacConfig};
use crate::features::{FeatureError, FeatureSet, PutativeMatch};
use crate::geometry::{FundamentalMatrix, PointPair, DEFAULT_OFFSET_SCALE};
use crate::global_rank::{self, build_kpmd, generate_candidate_fs, match_pairs, score_matches, KpmdEntry, KPMD_SCHEMA};
use crate::standard_match::{self, estimate_roll, standard_matches, RollConfig, RollEstimate, StandardMatches};
use crate::twokeypoint::{self, gen_2keypoints, match_2keypoints, rank_2kp, TwoKeypointMatch, TwoKpParams, TWO_KP_SCHEMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageSide {
    First,
    Second,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
    #[error(transparent)]
    Schema(#[from] ModelSchemaError),
    #[error(transparent)]
    Tree(#[from] DtreeError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
    #[error("no fixed-orientation features for {side:?} at {angle} rad")]
    MissingFixedSet { side: ImageSide, angle: f64 },
    #[error("feature sets of one image disagree: {0}")]
    Inconsistent(&'static str),
}

/// Every tunable of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub ratio_max: f64,
    pub roll: RollConfig,
    pub stop_sim: f64,
    pub two_kp: TwoKpParams,
    pub k_2kp: usize,
    /// Virtual-point offset in units of feature scale.
    pub offset_scale: f64,
    /// Sampson threshold for candidate-matrix support, pixels.
    pub tau: f64,
    /// Below this roll magnitude only the zero branch runs, radians.
    pub branch_dedup: f64,
    pub always_two_branches: bool,
    pub ransac: RansacConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            ratio_max: standard_match::DEFAULT_RATIO_MAX,
            roll: RollConfig::default(),
            stop_sim: clustering::DEFAULT_STOP_SIMILARITY,
            two_kp: TwoKpParams::default(),
            k_2kp: twokeypoint::DEFAULT_K_2KP,
            offset_scale: DEFAULT_OFFSET_SCALE,
            tau: global_rank::DEFAULT_SUPPORT_TAU,
            branch_dedup: 3f64.to_radians(),
            always_two_branches: false,
            ransac: RansacConfig::default(),
        }
    }
}

/// The two trained classifiers.
#[derive(Debug, Clone, PartialEq)]
pub struct Models {
    pub two_kp: TreeModel,
    pub kpmd: TreeModel,
}

impl Models {
    pub fn check(&self) -> Result<(), ModelSchemaError> {
        self.two_kp.check_schema(&TWO_KP_SCHEMA)?;
        self.kpmd.check_schema(&KPMD_SCHEMA)
    }
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub standard: StandardMatches,
    pub roll: Option<RollEstimate>,
    /// Branches to run with the fixed-orientation angle of image 2.
    pub branches: Vec<(Branch, f64)>,
}

/// Standard matches, roll estimate and the branch list. A missing roll or
/// one within `branch_dedup` of zero leaves only the zero branch, unless
/// `always_two_branches` is set and a roll exists.
pub fn preprocess(f1: &FeatureSet, f2: &FeatureSet, cfg: &PipelineConfig) -> Result<Preprocessed, PipelineError> {
    let standard = standard_matches(f1, f2, cfg.ratio_max)?;
    let pooled: Vec<PutativeMatch> = standard.lowe.iter().chain(&standard.blogs).cloned().collect();
    let roll = estimate_roll(&pooled, f1, f2, &cfg.roll).ok();
    let branches = branch_angles(roll.map(|r| r.alpha_exp), cfg);
    Ok(Preprocessed { standard, roll, branches })
}

pub fn branch_angles(alpha_exp: Option<f64>, cfg: &PipelineConfig) -> Vec<(Branch, f64)> {
    match alpha_exp {
        Some(a) if cfg.always_two_branches || a.abs() >= cfg.branch_dedup => {
            alloc::vec![(Branch::AlphaExp, wrap_angle(a)), (Branch::Zero, 0.0)]
        }
        _ => alloc::vec![(Branch::Zero, 0.0)],
    }
}

/// Everything one branch produced.
#[derive(Debug, Clone)]
pub struct BranchRanking {
    pub angle: f64,
    pub clusters1: Clustering,
    pub clusters2: Clustering,
    /// Cluster-expanded matches with their support counts.
    pub x: Vec<PutativeMatch>,
    pub two_kp_total: usize,
    pub top_2kp: Vec<TwoKeypointMatch>,
    pub candidate_count: usize,
    pub skipped_pairs: usize,
    /// Final scored list, best first.
    pub ranked: Vec<KpmdEntry>,
}

impl BranchRanking {
    pub fn matches(&self) -> Vec<PutativeMatch> {
        self.ranked.iter().map(|e| e.m.clone()).collect()
    }
}

fn check_fixed(natural: &FeatureSet, fixed: &FeatureSet) -> Result<(), PipelineError> {
    if natural.len() != fixed.len() {
        return Err(PipelineError::Inconsistent("natural and fixed sets differ in size"));
    }
    Ok(())
}

/// Clusters both fixed-orientation sets and expands the cluster pairing.
pub fn cluster_matches(
    fixed1: &FeatureSet,
    fixed2: &FeatureSet,
    stop_sim: f64,
) -> Result<(Clustering, Clustering, Vec<PutativeMatch>), PipelineError> {
    let c1 = agglomerative_cluster(fixed1, stop_sim)?;
    let c2 = agglomerative_cluster(fixed2, stop_sim)?;
    let x = if c1.is_empty() || c2.is_empty() {
        Vec::new()
    } else {
        expand_to_matches(&match_clusters(&c1, &c2), &c1, &c2)
    };
    Ok((c1, c2, x))
}

/// Matched 2keypoints with descriptors (unranked).
pub fn two_kp_matches(
    f1: &FeatureSet,
    f2: &FeatureSet,
    c1: &Clustering,
    c2: &Clustering,
    x: &[PutativeMatch],
    cfg: &PipelineConfig,
    angle: f64,
) -> Vec<TwoKeypointMatch> {
    let t1 = gen_2keypoints(f1, c1, &cfg.two_kp, 0.0);
    let t2 = gen_2keypoints(f2, c2, &cfg.two_kp, angle);
    match_2keypoints(x, &t1, &t2, c1, c2)
}

/// Support counter: `(pairs, matrices, tau) -> counts`.
pub type SfmCounter<'a> = &'a dyn Fn(&[PointPair], &[FundamentalMatrix], f64) -> Vec<u32>;

/// One branch with the sequential support counter.
#[allow(clippy::too_many_arguments)]
pub fn rank_branch(
    f1: &FeatureSet,
    f2: &FeatureSet,
    fixed1: &FeatureSet,
    fixed2: &FeatureSet,
    pre: &Preprocessed,
    models: &Models,
    cfg: &PipelineConfig,
    angle: f64,
) -> Result<BranchRanking, PipelineError> {
    rank_branch_with(f1, f2, fixed1, fixed2, pre, models, cfg, angle, &global_rank::count_sfm)
}

/// Image 1 uses descriptors fixed at 0, image 2 descriptors fixed at `angle`.
#[allow(clippy::too_many_arguments)]
pub fn rank_branch_with(
    f1: &FeatureSet,
    f2: &FeatureSet,
    fixed1: &FeatureSet,
    fixed2: &FeatureSet,
    pre: &Preprocessed,
    models: &Models,
    cfg: &PipelineConfig,
    angle: f64,
    counter: SfmCounter<'_>,
) -> Result<BranchRanking, PipelineError> {
    check_fixed(f1, fixed1)?;
    check_fixed(f2, fixed2)?;
    models.check()?;
    let (c1, c2, mut x) = cluster_matches(fixed1, fixed2, cfg.stop_sim)?;
    let all = two_kp_matches(f1, f2, &c1, &c2, &x, cfg, angle);
    let two_kp_total = all.len();
    let top = rank_2kp(all, &models.two_kp, cfg.k_2kp)?;
    let cands = generate_candidate_fs(&top, f1, f2, cfg.offset_scale);
    let sfm = counter(&match_pairs(&x, f1, f2), &cands.fs, cfg.tau);
    for (m, &s) in x.iter_mut().zip(&sfm) {
        m.sfm = Some(s);
    }
    let entries = build_kpmd(&x, &pre.standard.lowe, &pre.standard.blogs, &sfm);
    let ranked = score_matches(entries, &models.kpmd)?;
    Ok(BranchRanking {
        angle,
        clusters1: c1,
        clusters2: c2,
        x,
        two_kp_total,
        top_2kp: top,
        candidate_count: cands.fs.len(),
        skipped_pairs: cands.skipped,
        ranked,
    })
}

/// One labelled training pair: natural sets, fixed sets at the branch
/// angle, and the correspondence oracle.
pub struct TrainingPair<'a> {
    pub f1: &'a FeatureSet,
    pub f2: &'a FeatureSet,
    pub fixed1: &'a FeatureSet,
    pub fixed2: &'a FeatureSet,
    pub angle: f64,
    pub label: &'a dyn Fn(usize, usize) -> bool,
}

/// 2kpmd rows; a 2keypoint match is positive when both of its feature
/// matches are true correspondences.
pub fn two_kp_training_rows(pair: &TrainingPair<'_>, cfg: &PipelineConfig) -> Result<LabeledDataset, PipelineError> {
    check_fixed(pair.f1, pair.fixed1)?;
    check_fixed(pair.f2, pair.fixed2)?;
    let (c1, c2, x) = cluster_matches(pair.fixed1, pair.fixed2, cfg.stop_sim)?;
    let mut data = LabeledDataset::new(&TWO_KP_SCHEMA);
    for m in two_kp_matches(pair.f1, pair.f2, &c1, &c2, &x, cfg, pair.angle) {
        let label = (pair.label)(m.tk1.p, m.tk2.p) && (pair.label)(m.tk1.n, m.tk2.n);
        data.push(m.descriptor.to_vector().to_vec(), label)?;
    }
    Ok(data)
}

/// kpmd rows from a branch ranked with a trained 2kpmd model (the kpmd
/// model in `models` is not consulted).
pub fn kpmd_training_rows(
    pair: &TrainingPair<'_>,
    two_kp: &TreeModel,
    cfg: &PipelineConfig,
) -> Result<LabeledDataset, PipelineError> {
    check_fixed(pair.f1, pair.fixed1)?;
    check_fixed(pair.f2, pair.fixed2)?;
    let standard = standard_matches(pair.f1, pair.f2, cfg.ratio_max)?;
    let (c1, c2, x) = cluster_matches(pair.fixed1, pair.fixed2, cfg.stop_sim)?;
    let all = two_kp_matches(pair.f1, pair.f2, &c1, &c2, &x, cfg, pair.angle);
    let top = rank_2kp(all, two_kp, cfg.k_2kp)?;
    let cands = generate_candidate_fs(&top, pair.f1, pair.f2, cfg.offset_scale);
    let sfm = global_rank::count_sfm(&match_pairs(&x, pair.f1, pair.f2), &cands.fs, cfg.tau);
    let mut data = LabeledDataset::new(&KPMD_SCHEMA);
    for e in build_kpmd(&x, &standard.lowe, &standard.blogs, &sfm) {
        data.push(e.kpmd.to_vector().to_vec(), (pair.label)(e.m.i1, e.m.i2))?;
    }
    Ok(data)
}

/// Trains the 2kpmd tree on every pair, then the kpmd tree on the rankings
/// that tree produces.
pub fn train_models(pairs: &[TrainingPair<'_>], cfg: &PipelineConfig, params: &TreeParams) -> Result<Models, PipelineError> {
    let mut d2 = LabeledDataset::new(&TWO_KP_SCHEMA);
    for p in pairs {
        d2.extend(&two_kp_training_rows(p, cfg)?)?;
    }
    let two_kp = crate::dtree::train_tree(&d2, params)?;
    let mut dk = LabeledDataset::new(&KPMD_SCHEMA);
    for p in pairs {
        dk.extend(&kpmd_training_rows(p, &two_kp, cfg)?)?;
    }
    let kpmd = crate::dtree::train_tree(&dk, params)?;
    Ok(Models { two_kp, kpmd })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn branch_dedup() {
        let cfg = PipelineConfig::default();
        assert_eq!(branch_angles(None, &cfg), alloc::vec![(Branch::Zero, 0.0)]);
        assert_eq!(branch_angles(Some(2f64.to_radians()), &cfg), alloc::vec![(Branch::Zero, 0.0)]);
        let b = branch_angles(Some(78f64.to_radians()), &cfg);
        assert_eq!(b.len(), 2);
        assert_eq!(b[0].0, Branch::AlphaExp);
        let always = PipelineConfig { always_two_branches: true, ..cfg };
        assert_eq!(branch_angles(Some(0.0), &always).len(), 2);
    }
}
