//! Candidate fundamental matrices from pairs of top 2keypoint matches,
//! per-match support counts (sfm), the fused three-field descriptor and its
//! classifier scoring.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::dtree::{ModelSchemaError, TreeModel};
use crate::features::{FeatureSet, PutativeMatch};
use crate::geometry::{f_from_two_2kp, FundamentalMatrix, PointPair};
use crate::twokeypoint::TwoKeypointMatch;

/// Field names of [`KpmdVector::to_vector`], in order.
pub const KPMD_SCHEMA: [&str; 3] = ["sfm", "d_r", "t_k"];

pub const DEFAULT_SUPPORT_TAU: f64 = 2.0;

#[derive(Debug, Clone, Default)]
pub struct CandidateFs {
    pub fs: Vec<FundamentalMatrix>,
    /// Pairs sharing a feature or giving a degenerate system.
    pub skipped: usize,
}

/// One matrix per unordered pair of `top`, in `(i, j)` order with `i < j`.
pub fn generate_candidate_fs(top: &[TwoKeypointMatch], f1: &FeatureSet, f2: &FeatureSet, offset_scale: f64) -> CandidateFs {
    let mut out = CandidateFs::default();
    for (i, a) in top.iter().enumerate() {
        for b in &top[i + 1..] {
            match f_from_two_2kp(a, b, f1, f2, offset_scale) {
                Ok(f) => out.fs.push(f),
                Err(_) => out.skipped += 1,
            }
        }
    }
    out
}

/// Matrices flattened row-major for the support kernel.
pub fn pack(fs: &[FundamentalMatrix]) -> Vec<[f64; 9]> {
    fs.iter().map(FundamentalMatrix::to_row_major).collect()
}

/// Number of matrices in `fs` under which `p` has Sampson distance below
/// `sqrt(tau2)`. Compares squared quantities, so no square roots or
/// divisions; a vanishing gradient never counts as support.
#[inline]
pub fn support_count(p: &PointPair, fs: &[[f64; 9]], tau2: f64) -> u32 {
    let (x, y, u, v) = (p.x1.x, p.x1.y, p.x2.x, p.x2.y);
    let mut count = 0u32;
    for f in fs {
        let l0 = f[0] * x + f[1] * y + f[2];
        let l1 = f[3] * x + f[4] * y + f[5];
        let l2 = f[6] * x + f[7] * y + f[8];
        let m0 = f[0] * u + f[3] * v + f[6];
        let m1 = f[1] * u + f[4] * v + f[7];
        let num = u * l0 + v * l1 + l2;
        let den = l0 * l0 + l1 * l1 + m0 * m0 + m1 * m1;
        count += u32::from(num * num < tau2 * den);
    }
    count
}

/// Pixel coordinates of each match.
pub fn match_pairs(x: &[PutativeMatch], f1: &FeatureSet, f2: &FeatureSet) -> Vec<PointPair> {
    x.iter()
        .map(|m| {
            let a = &f1.features[m.i1];
            let b = &f2.features[m.i2];
            PointPair::new([a.x, a.y], [b.x, b.y])
        })
        .collect()
}

/// `sfm` for every pair: how many of `fs` support it at threshold `tau`.
pub fn count_sfm(pairs: &[PointPair], fs: &[FundamentalMatrix], tau: f64) -> Vec<u32> {
    let packed = pack(fs);
    let tau2 = tau * tau;
    pairs.iter().map(|p| support_count(p, &packed, tau2)).collect()
}

/// The fused per-match descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KpmdVector {
    pub sfm: u32,
    pub d_r: f64,
    pub t_k: f64,
}

impl KpmdVector {
    /// Missing `sfm` becomes 0, missing `d_r` 1 and missing `t_k` 0.
    pub fn from_match(m: &PutativeMatch) -> Self {
        Self {
            sfm: m.sfm.unwrap_or(0),
            d_r: m.d_r.unwrap_or(1.0),
            t_k: m.t_k.unwrap_or(0.0),
        }
    }

    pub fn to_vector(&self) -> [f64; 3] {
        [f64::from(self.sfm), self.d_r, self.t_k]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpmdEntry {
    pub m: PutativeMatch,
    pub kpmd: KpmdVector,
}

/// Union of the three match lists keyed by index pair, with the counts in
/// `sfm` (aligned with `x`) attached and scores merged. Sorted by index pair.
pub fn build_kpmd(x: &[PutativeMatch], xl: &[PutativeMatch], xb: &[PutativeMatch], sfm: &[u32]) -> Vec<KpmdEntry> {
    debug_assert_eq!(x.len(), sfm.len());
    let mut all: BTreeMap<(usize, usize), PutativeMatch> = BTreeMap::new();
    let x_scored = x.iter().zip(sfm).map(|(m, &s)| {
        let mut m = m.clone();
        m.sfm = Some(s);
        m
    });
    for m in x_scored.chain(xl.iter().cloned()).chain(xb.iter().cloned()) {
        all.entry(m.key())
            .and_modify(|e| e.merge(&m))
            .or_insert(m);
    }
    all.into_values()
        .map(|m| KpmdEntry { kpmd: KpmdVector::from_match(&m), m })
        .collect()
}

/// Probability descending, then index pair ascending.
pub fn prob_order(a: &PutativeMatch, b: &PutativeMatch) -> Ordering {
    b.prob
        .unwrap_or(0.0)
        .total_cmp(&a.prob.unwrap_or(0.0))
        .then(a.key().cmp(&b.key()))
}

/// Sets `prob` on every entry from `model` and sorts by [`prob_order`].
pub fn score_matches(mut entries: Vec<KpmdEntry>, model: &TreeModel) -> Result<Vec<KpmdEntry>, ModelSchemaError> {
    model.check_schema(&KPMD_SCHEMA)?;
    for e in entries.iter_mut() {
        e.m.prob = Some(model.predict_proba(&e.kpmd.to_vector())?);
    }
    entries.sort_by(|a, b| prob_order(&a.m, &b.m));
    Ok(entries)
}

/// Ablation: the candidate matrix supported by the most matches (first one
/// on ties).
pub fn best_supported_candidate(pairs: &[PointPair], fs: &[FundamentalMatrix], tau: f64) -> Option<(FundamentalMatrix, usize)> {
    let mut best: Option<(FundamentalMatrix, usize)> = None;
    for f in fs {
        let s = f.support(pairs, tau);
        if best.is_none_or(|b| s > b.1) {
            best = Some((*f, s));
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dtree::Node;
    use crate::features::Sources;
    use crate::geometry::sampson_distance;
    use crate::seed;
    use alloc::vec;
    use nalgebra::Matrix3;
    use rand::Rng;

    fn random_f(rng: &mut impl Rng) -> FundamentalMatrix {
        let mut v = [0.0; 9];
        for e in v.iter_mut() {
            *e = rng.random_range(-1.0..1.0);
        }
        v[2] *= 100.0;
        v[5] *= 100.0;
        v[6] *= 100.0;
        v[7] *= 100.0;
        v[8] *= 1e4;
        FundamentalMatrix::from_row_major(&v).unwrap()
    }

    #[test]
    fn copies_of_a_supporting_matrix() {
        let f = FundamentalMatrix::from_matrix(Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0)).unwrap();
        let on = PointPair::new([10.0, 5.0], [300.0, 5.0]);
        let off = PointPair::new([10.0, 5.0], [300.0, 1e9]);
        let fs = vec![f; 7];
        assert_eq!(count_sfm(&[on, off], &fs, 2.0), vec![7, 0]);
    }

    #[test]
    fn counts_match_direct_sampson() {
        let mut rng = seed::rng(3, "sfm");
        let fs: Vec<_> = (0..50).map(|_| random_f(&mut rng)).collect();
        let pairs: Vec<_> = (0..100)
            .map(|_| {
                PointPair::new(
                    [rng.random_range(0.0..640.0), rng.random_range(0.0..480.0)],
                    [rng.random_range(0.0..640.0), rng.random_range(0.0..480.0)],
                )
            })
            .collect();
        let tau = 40.0;
        let fast = count_sfm(&pairs, &fs, tau);
        for (p, &c) in pairs.iter().zip(&fast) {
            let slow = fs.iter().filter(|f| sampson_distance(f.matrix(), p) < tau).count();
            assert_eq!(c as usize, slow);
        }
        assert!(fast.iter().any(|&c| c > 0));
    }

    #[test]
    fn fill_rules() {
        let mut a = PutativeMatch::new(0, 0, Sources::X);
        let mut b = PutativeMatch::new(1, 1, Sources::XL);
        b.d_r = Some(0.3);
        let mut c = PutativeMatch::new(2, 2, Sources::XL);
        c.d_r = Some(0.2);
        let mut c2 = PutativeMatch::new(2, 2, Sources::XB);
        c2.t_k = Some(0.4);
        let c3 = PutativeMatch::new(2, 2, Sources::X);
        a.sfm = None;
        let out = build_kpmd(&[a, c3], &[b, c], &[c2], &[5, 9]);
        assert_eq!(out.len(), 3);
        assert_eq!(out[0].kpmd, KpmdVector { sfm: 5, d_r: 1.0, t_k: 0.0 });
        assert_eq!(out[1].kpmd, KpmdVector { sfm: 0, d_r: 0.3, t_k: 0.0 });
        assert_eq!(out[2].kpmd, KpmdVector { sfm: 9, d_r: 0.2, t_k: 0.4 });
        assert_eq!(out[2].m.sources.tag(), "L+B+X");
    }

    #[test]
    fn constant_model_orders_by_pair() {
        let model = TreeModel::from_parts(KPMD_SCHEMA.iter().map(|s| (*s).into()).collect(), vec![Node::Leaf { inliers: 0, total: 1 }]);
        let xs = vec![PutativeMatch::new(3, 1, Sources::X), PutativeMatch::new(0, 9, Sources::X), PutativeMatch::new(0, 2, Sources::X)];
        let out = score_matches(build_kpmd(&xs, &[], &[], &[1, 2, 3]), &model).unwrap();
        let keys: Vec<_> = out.iter().map(|e| e.m.key()).collect();
        assert_eq!(keys, vec![(0, 2), (0, 9), (3, 1)]);
        assert!(out.iter().all(|e| e.m.prob == Some(1.0 / 3.0)));
    }

    #[test]
    fn hand_traced_scores() {
        let model = TreeModel::from_parts(
            KPMD_SCHEMA.iter().map(|s| (*s).into()).collect(),
            vec![
                Node::Split { feature: 0, threshold: 10.5, left: 1, right: 4 },
                Node::Split { feature: 1, threshold: 0.7, left: 2, right: 3 },
                Node::Leaf { inliers: 3, total: 10 },
                Node::Leaf { inliers: 0, total: 40 },
                Node::Leaf { inliers: 18, total: 20 },
            ],
        );
        let cases = [
            ((0, 1.0, 0.0), 1.0 / 42.0),
            ((0, 0.7, 0.0), 4.0 / 12.0),
            ((10, 0.1, 0.5), 4.0 / 12.0),
            ((11, 1.0, 0.0), 19.0 / 22.0),
            ((400, 0.95, 0.2), 19.0 / 22.0),
            ((3, 0.71, 0.9), 1.0 / 42.0),
            ((10, 0.69, 0.0), 4.0 / 12.0),
            ((10, 0.70000001, 0.0), 1.0 / 42.0),
            ((1000, 0.0, 0.0), 19.0 / 22.0),
            ((0, 0.0, 0.99), 4.0 / 12.0),
        ];
        for ((sfm, d_r, t_k), want) in cases {
            let v = KpmdVector { sfm, d_r, t_k };
            assert_eq!(model.predict_proba(&v.to_vector()).unwrap(), want);
        }
    }

    #[test]
    fn schema_mismatch() {
        let model = TreeModel::from_parts(vec!["x".into()], vec![Node::Leaf { inliers: 0, total: 1 }]);
        assert!(score_matches(Vec::new(), &model).is_err());
    }
}
