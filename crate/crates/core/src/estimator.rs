//! Reference guided-RANSAC consumer: probability-weighted 7-point sampling
//! with a fixed iteration budget, inlier refitting, and selection between
//! the two orientation branches.

use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::features::FeatureSet;
use crate::geometry::{eight_point, seven_point, FundamentalMatrix, PointPair};
use crate::global_rank::{count_sfm, match_pairs};
use crate::pipeline::{self, BranchRanking, ImageSide, Models, PipelineConfig, PipelineError, SfmCounter};
use crate::standard_match::RollEstimate;
use crate::seed;

pub const MIN_SAMPLE: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RansacConfig {
    pub max_iters: usize,
    /// Sampson distance below which a match counts as an inlier, pixels.
    pub inlier_tau: f64,
    pub seed: u64,
    /// Refit rounds applied to the winning model.
    pub lo_rounds: usize,
}

impl Default for RansacConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            inlier_tau: 2.0,
            seed: 0,
            lo_rounds: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EstimateError {
    #[error("need at least {need} matches, got {got}")]
    InsufficientData { need: usize, got: usize },
    #[error("{probs} probabilities for {matches} matches")]
    Misaligned { matches: usize, probs: usize },
    #[error("no sample produced a model")]
    NoModel,
}

/// Orientation branch a result came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    AlphaExp,
    Zero,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::AlphaExp => "alpha_exp",
            Branch::Zero => "zero",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub f: [f64; 9],
    pub inliers: Vec<usize>,
    pub support: usize,
    pub iterations: usize,
    pub branch: Branch,
    pub seed: u64,
}

impl EstimationResult {
    pub fn fundamental(&self) -> FundamentalMatrix {
        FundamentalMatrix::from_row_major(&self.f).expect("stored matrix is valid")
    }
}

fn inliers_of(f: &FundamentalMatrix, pairs: &[PointPair], tau: f64) -> Vec<usize> {
    (0..pairs.len()).filter(|&i| f.sampson_distance(&pairs[i]) < tau).collect()
}

/// Draws distinct indices with probability proportional to `weights`.
struct WeightedSampler {
    cumulative: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedSampler {
    /// Falls back to uniform weights when fewer than `k` entries are positive.
    fn new(probs: &[f64], k: usize) -> Self {
        let positive = probs.iter().filter(|&&p| p > 0.0 && p.is_finite()).count();
        let weights: Vec<f64> = if positive >= k {
            probs.iter().map(|&p| if p > 0.0 && p.is_finite() { p } else { 0.0 }).collect()
        } else {
            alloc::vec![1.0; probs.len()]
        };
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        Self { cumulative, weights }
    }

    fn draw_one(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty");
        let u = rng.random::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= u).min(self.cumulative.len() - 1)
    }

    fn sample(&self, rng: &mut impl Rng, out: &mut Vec<usize>, k: usize) {
        out.clear();
        while out.len() < k {
            let mut picked = None;
            for _ in 0..64 {
                let i = self.draw_one(rng);
                if self.weights[i] > 0.0 && !out.contains(&i) {
                    picked = Some(i);
                    break;
                }
            }
            let i = picked.unwrap_or_else(|| {
                // heavy mass on already chosen items: draw exactly from the rest
                let rest: f64 = (0..self.weights.len())
                    .filter(|i| !out.contains(i))
                    .map(|i| self.weights[i])
                    .sum();
                let mut u = rng.random::<f64>() * rest;
                let mut last = 0;
                for i in (0..self.weights.len()).filter(|i| !out.contains(i) && self.weights[*i] > 0.0) {
                    last = i;
                    if u < self.weights[i] {
                        return i;
                    }
                    u -= self.weights[i];
                }
                last
            });
            out.push(i);
        }
    }
}

/// Fixed-budget RANSAC drawing each 7-match sample with probability
/// proportional to `probs`. The best model (most inliers, earliest on ties)
/// is refined with [`local_optimize`].
pub fn guided_ransac(pairs: &[PointPair], probs: &[f64], cfg: &RansacConfig) -> Result<EstimationResult, EstimateError> {
    if pairs.len() < MIN_SAMPLE {
        return Err(EstimateError::InsufficientData { need: MIN_SAMPLE, got: pairs.len() });
    }
    if probs.len() != pairs.len() {
        return Err(EstimateError::Misaligned { matches: pairs.len(), probs: probs.len() });
    }
    let sampler = WeightedSampler::new(probs, MIN_SAMPLE);
    let mut rng = seed::rng(cfg.seed, "sampler");
    let mut idx = Vec::with_capacity(MIN_SAMPLE);
    let mut sample = [PointPair::new([0.0; 2], [0.0; 2]); MIN_SAMPLE];
    let mut best: Option<(FundamentalMatrix, usize)> = None;
    for _ in 0..cfg.max_iters {
        sampler.sample(&mut rng, &mut idx, MIN_SAMPLE);
        for (s, &i) in sample.iter_mut().zip(&idx) {
            *s = pairs[i];
        }
        let Ok(models) = seven_point(&sample) else { continue };
        for f in models {
            let support = f.support(pairs, cfg.inlier_tau);
            if best.is_none_or(|b| support > b.1) {
                best = Some((f, support));
            }
        }
    }
    let (f, _) = best.ok_or(EstimateError::NoModel)?;
    let f = local_optimize(&f, pairs, cfg.inlier_tau, cfg.lo_rounds);
    let inliers = inliers_of(&f, pairs, cfg.inlier_tau);
    Ok(EstimationResult {
        f: f.to_row_major(),
        support: inliers.len(),
        inliers,
        iterations: cfg.max_iters,
        branch: Branch::Zero,
        seed: cfg.seed,
    })
}

/// Truncated quadratic cost: `sum(min(d^2, tau^2))`.
fn msac_cost(f: &FundamentalMatrix, pairs: &[PointPair], tau: f64) -> f64 {
    pairs.iter().map(|p| {
        let d = f.sampson_distance(p);
        (d * d).min(tau * tau)
    }).sum()
}

/// Refits `f` on its inliers with the 8-point solver for up to `rounds`
/// rounds. A refit is kept only if it loses no inliers and does not raise
/// the truncated quadratic cost, so a stray inlier cannot drag an exact
/// model away.
pub fn local_optimize(f: &FundamentalMatrix, pairs: &[PointPair], inlier_tau: f64, rounds: usize) -> FundamentalMatrix {
    let mut best = *f;
    let mut best_support = best.support(pairs, inlier_tau);
    let mut best_cost = msac_cost(&best, pairs, inlier_tau);
    let mut sel = Vec::new();
    for _ in 0..rounds {
        let inl = inliers_of(&best, pairs, inlier_tau);
        if inl.len() < 8 {
            break;
        }
        sel.clear();
        sel.extend(inl.iter().map(|&i| pairs[i]));
        let Ok(g) = eight_point(&sel) else { break };
        let s = g.support(pairs, inlier_tau);
        let cost = msac_cost(&g, pairs, inlier_tau);
        if s < best_support || cost > best_cost || g == best {
            break;
        }
        best = g;
        best_support = s;
        best_cost = cost;
    }
    best
}

/// Rankings of every branch, ready for estimation.
#[derive(Debug, Clone)]
pub struct PreparedPipeline {
    pub roll: Option<RollEstimate>,
    pub branches: Vec<(Branch, BranchRanking)>,
}

#[derive(Debug, Clone)]
pub struct BranchOutcome {
    pub branch: Branch,
    pub angle: f64,
    pub result: Result<EstimationResult, EstimateError>,
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub roll: Option<RollEstimate>,
    pub branches: Vec<BranchOutcome>,
    /// Index into `branches` of the returned result.
    pub chosen: usize,
}

impl PipelineRun {
    pub fn result(&self) -> &EstimationResult {
        self.branches[self.chosen].result.as_ref().expect("chosen branch succeeded")
    }
}

/// Standard matching, roll estimation and one ranking per orientation
/// branch. `fixed` supplies fixed-orientation feature sets for a requested
/// image and angle.
pub fn prepare_pipeline(
    f1: &FeatureSet,
    f2: &FeatureSet,
    mut fixed: impl FnMut(ImageSide, f64) -> Option<FeatureSet>,
    models: &Models,
    cfg: &PipelineConfig,
    counter: SfmCounter<'_>,
) -> Result<PreparedPipeline, PipelineError> {
    let pre = pipeline::preprocess(f1, f2, cfg)?;
    let fixed1 = fixed(ImageSide::First, 0.0).ok_or(PipelineError::MissingFixedSet { side: ImageSide::First, angle: 0.0 })?;
    let mut branches = Vec::new();
    for &(branch, angle) in &pre.branches {
        let fixed2 = fixed(ImageSide::Second, angle).ok_or(PipelineError::MissingFixedSet { side: ImageSide::Second, angle })?;
        let ranking = pipeline::rank_branch_with(f1, f2, &fixed1, &fixed2, &pre, models, cfg, angle, counter)?;
        branches.push((branch, ranking));
    }
    Ok(PreparedPipeline { roll: pre.roll, branches })
}

/// Guided RANSAC on every prepared branch; the branch with the larger
/// support is chosen, the `alpha_exp` branch on ties.
pub fn estimate_prepared(
    prepared: &PreparedPipeline,
    f1: &FeatureSet,
    f2: &FeatureSet,
    ransac: &RansacConfig,
) -> Result<PipelineRun, PipelineError> {
    let mut branches = Vec::new();
    for (branch, ranking) in &prepared.branches {
        let pairs = match_pairs(&ranking.matches(), f1, f2);
        let probs: Vec<f64> = ranking.ranked.iter().map(|e| e.m.prob.unwrap_or(0.0)).collect();
        let result = guided_ransac(&pairs, &probs, ransac).map(|mut r| {
            r.branch = *branch;
            r
        });
        branches.push(BranchOutcome { branch: *branch, angle: ranking.angle, result });
    }
    match select_branch(&branches) {
        Some(chosen) => Ok(PipelineRun { roll: prepared.roll, branches, chosen }),
        None => Err(PipelineError::Estimate(match branches.into_iter().next().map(|b| b.result) {
            Some(Err(e)) => e,
            _ => EstimateError::NoModel,
        })),
    }
}

/// The full pipeline followed by guided RANSAC on each branch.
pub fn run_pipeline(
    f1: &FeatureSet,
    f2: &FeatureSet,
    fixed: impl FnMut(ImageSide, f64) -> Option<FeatureSet>,
    models: &Models,
    cfg: &PipelineConfig,
) -> Result<PipelineRun, PipelineError> {
    let prepared = prepare_pipeline(f1, f2, fixed, models, cfg, &count_sfm)?;
    estimate_prepared(&prepared, f1, f2, &cfg.ransac)
}

/// Maximal support wins; earlier branches win ties.
pub fn select_branch(branches: &[BranchOutcome]) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None;
    for (i, b) in branches.iter().enumerate() {
        if let Ok(r) = &b.result {
            if best.is_none_or(|(_, s)| r.support > s) {
                best = Some((i, r.support));
            }
        }
    }
    best.map(|b| b.0)
}
