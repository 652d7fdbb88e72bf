//! Baseline putative matches: Lowe nearest neighbours with distance ratios
//! (`X_L`), BLOGS mutual nearest neighbours with similarity weights (`X_B`),
//! and the relative roll estimate built from both.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle::wrap_angle;
use crate::features::{ncc_unchecked, FeatureError, FeatureSet, NearestTwo, PutativeMatch, Sources, TopTwo};

pub const DEFAULT_RATIO_MAX: f64 = 0.9;

/// Lower clamp on `m_k` inside the similarity weight.
const MIN_SIMILARITY: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatchError {
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("no matches to estimate roll from")]
    RollUnavailable,
}

/// Ratio of angular distances to the best and second-best neighbour:
/// `acos(m_k) / acos(m_k2)`.
///
/// Two perfect similarities give 1. The result is clamped into `[0, 1]`.
pub fn distance_ratio(m_k: f64, m_k2: f64) -> f64 {
    let m_k = m_k.clamp(-1.0, 1.0);
    let m_k2 = m_k2.clamp(-1.0, 1.0);
    let den = libm::acos(m_k2);
    if den == 0.0 {
        return 1.0;
    }
    (libm::acos(m_k) / den).clamp(0.0, 1.0)
}

/// BLOGS similarity weight
/// `(1 - e^-m_k)^2 (1 - m_k1 / m_k) (1 - m_k2 / m_k)`.
///
/// `m_k` is clamped to `[1e-6, 1]` and the second-best similarities to
/// `[0, m_k]`, which keeps the weight in `[0, 1)`. Non-positive `m_k` gives 0.
pub fn similarity_weight(m_k: f64, m_k1: f64, m_k2: f64) -> f64 {
    if !(m_k > 0.0) {
        return 0.0;
    }
    let m = m_k.clamp(MIN_SIMILARITY, 1.0);
    let a = m_k1.clamp(0.0, m);
    let b = m_k2.clamp(0.0, m);
    let e = 1.0 - libm::exp(-m);
    e * e * (1.0 - a / m) * (1.0 - b / m)
}

/// Best/second-best neighbours of every feature, in both directions.
#[derive(Debug, Clone)]
pub struct NeighborTables {
    /// For each image-1 feature, its neighbours in image 2.
    pub forward: Vec<NearestTwo>,
    /// For each image-2 feature, its neighbours in image 1.
    pub backward: Vec<NearestTwo>,
}

impl NeighborTables {
    /// One exhaustive pass over all descriptor pairs.
    pub fn compute(f1: &FeatureSet, f2: &FeatureSet) -> Result<Self, FeatureError> {
        if f1.is_empty() || f2.is_empty() {
            return Err(FeatureError::EmptySet);
        }
        if f1.dim != f2.dim {
            return Err(FeatureError::DimensionError(f1.dim, f2.dim));
        }
        let mut cols = alloc::vec![TopTwo::new(); f2.len()];
        let mut forward = Vec::with_capacity(f1.len());
        for (i, a) in f1.features.iter().enumerate() {
            let mut row = TopTwo::new();
            for (j, b) in f2.features.iter().enumerate() {
                let s = ncc_unchecked(&a.descriptor, &b.descriptor);
                row.offer(j, s);
                cols[j].offer(i, s);
            }
            forward.push(row.finish().expect("non-empty"));
        }
        let backward = cols.into_iter().map(|c| c.finish().expect("non-empty")).collect();
        Ok(Self { forward, backward })
    }
}

/// The two standard putative-match lists.
#[derive(Debug, Clone, Default)]
pub struct StandardMatches {
    pub lowe: Vec<PutativeMatch>,
    pub blogs: Vec<PutativeMatch>,
}

fn lowe_from_tables(t: &NeighborTables, ratio_max: f64) -> Vec<PutativeMatch> {
    t.forward
        .iter()
        .enumerate()
        .filter_map(|(i, nn)| {
            let d_r = distance_ratio(nn.best, nn.second);
            (d_r <= ratio_max).then(|| {
                let mut m = PutativeMatch::new(i, nn.index, Sources::XL);
                m.m_k = Some(nn.best);
                m.m_k2 = Some(nn.second);
                m.d_r = Some(d_r);
                m
            })
        })
        .collect()
}

fn blogs_from_tables(t: &NeighborTables) -> Vec<PutativeMatch> {
    t.forward
        .iter()
        .enumerate()
        .filter_map(|(i, nn)| {
            let back = &t.backward[nn.index];
            (back.index == i).then(|| {
                let mut m = PutativeMatch::new(i, nn.index, Sources::XB);
                m.m_k = Some(nn.best);
                m.m_k1 = Some(back.second);
                m.m_k2 = Some(nn.second);
                m.t_k = Some(similarity_weight(nn.best, back.second, nn.second));
                m
            })
        })
        .collect()
}

/// Nearest neighbour in image 2 for every image-1 feature, kept when the
/// distance ratio does not exceed `ratio_max`.
pub fn lowe_matches(f1: &FeatureSet, f2: &FeatureSet, ratio_max: f64) -> Result<Vec<PutativeMatch>, FeatureError> {
    Ok(lowe_from_tables(&NeighborTables::compute(f1, f2)?, ratio_max))
}

/// Mutual nearest neighbours with their similarity weights.
pub fn blogs_matches(f1: &FeatureSet, f2: &FeatureSet) -> Result<Vec<PutativeMatch>, FeatureError> {
    Ok(blogs_from_tables(&NeighborTables::compute(f1, f2)?))
}

/// Both lists from a single similarity pass.
pub fn standard_matches(f1: &FeatureSet, f2: &FeatureSet, ratio_max: f64) -> Result<StandardMatches, FeatureError> {
    let t = NeighborTables::compute(f1, f2)?;
    Ok(StandardMatches {
        lowe: lowe_from_tables(&t, ratio_max),
        blogs: blogs_from_tables(&t),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RollConfig {
    /// Wrapped-Gaussian kernel bandwidth, radians.
    pub bandwidth: f64,
    /// Evaluation grid spacing, radians.
    pub grid_step: f64,
}

impl Default for RollConfig {
    fn default() -> Self {
        Self {
            bandwidth: 5f64.to_radians(),
            grid_step: 1f64.to_radians(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RollEstimate {
    /// Peak of the orientation-difference density, `(-pi, pi]`.
    pub alpha_exp: f64,
    /// Density value at the peak (per radian).
    pub peak: f64,
    pub samples: usize,
}

/// Orientation differences `alpha(v) - alpha(u)` of the given matches,
/// counting each index pair once.
pub fn orientation_differences(matches: &[PutativeMatch], f1: &FeatureSet, f2: &FeatureSet) -> Vec<f64> {
    let mut seen = BTreeMap::new();
    for m in matches {
        seen.entry(m.key()).or_insert(());
    }
    seen.keys()
        .filter_map(|&(i1, i2)| {
            let a = f1.features.get(i1)?;
            let b = f2.features.get(i2)?;
            Some(wrap_angle(b.orientation - a.orientation))
        })
        .collect()
}

/// Maximal peak of a wrapped-Gaussian kernel density over orientation
/// differences, evaluated on a regular grid over `(-pi, pi]`. Equal peaks
/// resolve to the angle of smallest magnitude.
pub fn estimate_roll_from_differences(diffs: &[f64], cfg: &RollConfig) -> Result<RollEstimate, MatchError> {
    if diffs.is_empty() {
        return Err(MatchError::RollUnavailable);
    }
    let steps = libm::round(2.0 * PI / cfg.grid_step).max(1.0) as i64;
    let half = steps / 2;
    let h = cfg.bandwidth;
    let inv = 1.0 / (2.0 * h * h);
    // images beyond one turn are negligible for bandwidths well below pi
    let wraps = (libm::ceil(4.0 * h / (2.0 * PI)) as i64).max(1);
    let norm = 1.0 / (diffs.len() as f64 * h * libm::sqrt(2.0 * PI));
    let mut best = (f64::NEG_INFINITY, 0.0f64);
    for k in (half - steps + 1)..=half {
        let g = k as f64 * cfg.grid_step;
        let mut dens = 0.0;
        for &d in diffs {
            let base = wrap_angle(g - d);
            for w in -wraps..=wraps {
                let x = base + 2.0 * PI * w as f64;
                dens += libm::exp(-x * x * inv);
            }
        }
        dens *= norm;
        if dens > best.0 || (dens == best.0 && g.abs() < best.1.abs()) {
            best = (dens, g);
        }
    }
    Ok(RollEstimate {
        alpha_exp: wrap_angle(best.1),
        peak: best.0,
        samples: diffs.len(),
    })
}

/// Relative roll between the images from the pooled standard matches.
pub fn estimate_roll(
    matches: &[PutativeMatch],
    f1: &FeatureSet,
    f2: &FeatureSet,
    cfg: &RollConfig,
) -> Result<RollEstimate, MatchError> {
    estimate_roll_from_differences(&orientation_differences(matches, f1, f2), cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{normalize, Feature, OrientationMode};
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(rng: &mut impl Rng, d: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
        normalize(&mut v);
        v
    }

    fn set(descs: &[Vec<f64>], orient: &[f64]) -> FeatureSet {
        let fs = descs
            .iter()
            .enumerate()
            .map(|(i, v)| Feature::new(i as f64, 0.0, 1.0, orient.get(i).copied().unwrap_or(0.0), v.clone()).unwrap())
            .collect();
        FeatureSet::new("t", OrientationMode::Natural, descs[0].len(), fs).unwrap()
    }

    #[test]
    fn distance_ratio_examples() {
        assert_eq!(distance_ratio(1.0, 0.9), 0.0);
        assert_eq!(distance_ratio(0.8, 0.8), 1.0);
        assert_eq!(distance_ratio(1.0, 1.0), 1.0);
        let r = distance_ratio(10f64.to_radians().cos(), 20f64.to_radians().cos());
        assert!((r - 0.5).abs() < 1e-9);
    }

    #[test]
    fn distance_ratio_monotone() {
        let m2 = 0.3;
        let mut last = f64::INFINITY;
        for i in 0..=70 {
            let m = 0.3 + i as f64 * 0.01;
            let d = distance_ratio(m, m2);
            assert!(d <= last);
            last = d;
        }
    }

    #[test]
    fn similarity_weight_examples() {
        assert_eq!(similarity_weight(0.7, 0.7, 0.1), 0.0);
        assert_eq!(similarity_weight(0.7, 0.1, 0.7), 0.0);
        assert_eq!(similarity_weight(0.0, 0.1, 0.1), 0.0);
        assert_eq!(similarity_weight(-0.3, 0.1, 0.1), 0.0);
        // (1 - e^-0.99)^2 (1 - 0.5/0.99)(1 - 0.6/0.99), evaluated with mpmath at 50 digits
        let t = similarity_weight(0.99, 0.5, 0.6);
        assert!((t - 0.077_000_734_559_214).abs() < 1e-9, "{t}");
        for _ in 0..3 {
            assert!(similarity_weight(1.0, -1.0, -1.0) < 1.0);
        }
    }

    #[test]
    fn lowe_identity_on_identical_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let descs: Vec<_> = (0..30).map(|_| unit(&mut rng, 32)).collect();
        let s = set(&descs, &[]);
        let l = lowe_matches(&s, &s, 0.9).unwrap();
        assert_eq!(l.len(), 30);
        for m in &l {
            assert_eq!(m.i1, m.i2);
            assert!(m.d_r.unwrap() < 1e-6);
            assert!(m.sources.in_xl);
        }
    }

    #[test]
    fn lowe_rejects_ties() {
        let a = vec![1.0, 0.0];
        let b = vec![0.0, 1.0];
        let q = vec![core::f64::consts::FRAC_1_SQRT_2; 2];
        let s1 = set(&[q], &[]);
        let s2 = set(&[a, b], &[]);
        assert!(lowe_matches(&s1, &s2, 0.9).unwrap().is_empty());
    }

    #[test]
    fn blogs_mutuality() {
        // u0 -> v0, but v0 -> u1
        let s1 = set(&[vec![1.0, 0.0, 0.0], normed(&[1.0, 0.05, 0.0])], &[]);
        let s2 = set(&[normed(&[1.0, 0.1, 0.0]), vec![0.0, 0.0, 1.0]], &[]);
        let b = blogs_matches(&s1, &s2).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!((b[0].i1, b[0].i2), (1, 0));
        let t = b[0].t_k.unwrap();
        assert!((0.0..1.0).contains(&t));
    }

    fn normed(v: &[f64]) -> Vec<f64> {
        let mut v = v.to_vec();
        normalize(&mut v);
        v
    }

    #[test]
    fn blogs_identical_sets_match_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let descs: Vec<_> = (0..25).map(|_| unit(&mut rng, 16)).collect();
        let s = set(&descs, &[]);
        let b = blogs_matches(&s, &s).unwrap();
        assert_eq!(b.len(), 25);
        assert!(b.iter().all(|m| m.i1 == m.i2));
    }

    fn roll_of(diffs_deg: &[f64]) -> f64 {
        let d: Vec<f64> = diffs_deg.iter().map(|x| x.to_radians()).collect();
        estimate_roll_from_differences(&d, &RollConfig::default()).unwrap().alpha_exp.to_degrees()
    }

    #[test]
    fn roll_exact_peak() {
        assert!((roll_of(&[78.0; 20]) - 78.0).abs() < 1e-9);
    }

    #[test]
    fn roll_noisy_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d: Vec<f64> = (0..200).map(|_| rng.random_range(-3.0..3.0)).collect();
        assert!(roll_of(&d).abs() <= 3.0);
    }

    #[test]
    fn roll_wraparound() {
        let r = roll_of(&[179.0, -179.0, 179.0, -179.0]);
        assert!((r.abs() - 180.0).abs() < 1e-9, "{r}");
    }

    #[test]
    fn roll_requires_samples() {
        assert_eq!(
            estimate_roll_from_differences(&[], &RollConfig::default()),
            Err(MatchError::RollUnavailable)
        );
    }

    #[test]
    fn roll_dedups_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let descs: Vec<_> = (0..3).map(|_| unit(&mut rng, 8)).collect();
        let s1 = set(&descs, &[0.0, 0.0, 0.0]);
        let s2 = set(&descs, &[0.5, 0.5, 1.0]);
        let m0 = PutativeMatch::new(0, 0, Sources::XL);
        let mut m0b = m0.clone();
        m0b.sources = Sources::XB;
        let m2 = PutativeMatch::new(2, 2, Sources::XB);
        let r = estimate_roll(&[m0, m0b, m2], &s1, &s2, &RollConfig::default()).unwrap();
        assert_eq!(r.samples, 2);
    }
}
