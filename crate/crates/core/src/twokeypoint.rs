//! 2keypoints (a main feature plus a nearby neighbour), their matching
//! across images, the six-field match descriptor and classifier ranking.

use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::angle::{angle_diff, wrap_angle};
use crate::clustering::Clustering;
use crate::dtree::{ModelSchemaError, TreeModel};
use crate::features::{FeatureSet, PutativeMatch};

/// Field names of [`TwoKpDescriptor::to_vector`], in order.
pub const TWO_KP_SCHEMA: [&str; 6] = ["N1", "N2", "dist_r", "angle_d", "cluster_t", "min_d"];

pub const DEFAULT_K_2KP: usize = 100;

/// Which orientation `theta` is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaReference {
    /// Each main feature's own orientation.
    #[default]
    Natural,
    /// The common angle the image's fixed-orientation descriptors used.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TwoKpParams {
    /// Number of spatially nearest neighbours.
    pub k1: usize,
    /// Neighbour radius in units of the main feature's scale.
    pub k2: f64,
    /// Number of nearest same-cluster neighbours.
    pub k3: usize,
    pub theta_reference: ThetaReference,
}

impl Default for TwoKpParams {
    fn default() -> Self {
        Self {
            k1: 5,
            k2: 5.0,
            k3: 1,
            theta_reference: ThetaReference::Natural,
        }
    }
}

/// Neighbour-selection rules that produced a 2keypoint.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Methods {
    pub k_nearest: bool,
    pub radius: bool,
    pub same_cluster: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoKeypoint {
    /// Main feature.
    pub p: usize,
    /// Neighbour feature.
    pub n: usize,
    /// `|p - n| / s(p)`.
    pub d: f64,
    /// Direction of `p -> n` relative to the reference orientation of `p`.
    pub theta: f64,
    pub methods: Methods,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TwoKpDescriptor {
    /// Matches the image-1 2keypoint takes part in.
    pub n1: u32,
    /// Matches the image-2 2keypoint takes part in.
    pub n2: u32,
    pub dist_r: f64,
    pub angle_d: f64,
    pub cluster_t: bool,
    pub min_d: f64,
}

impl TwoKpDescriptor {
    pub fn to_vector(&self) -> [f64; 6] {
        [
            f64::from(self.n1),
            f64::from(self.n2),
            self.dist_r,
            self.angle_d,
            if self.cluster_t { 1.0 } else { 0.0 },
            self.min_d,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoKeypointMatch {
    pub tk1: TwoKeypoint,
    pub tk2: TwoKeypoint,
    pub descriptor: TwoKpDescriptor,
    pub prob: Option<f64>,
}

impl TwoKeypointMatch {
    /// `(p1, n1, p2, n2)`.
    pub fn indices(&self) -> (usize, usize, usize, usize) {
        (self.tk1.p, self.tk1.n, self.tk2.p, self.tk2.n)
    }
}

/// Enumerates 2keypoints by the union of three neighbour rules:
/// the `k1` spatially nearest features, every feature within `k2 * s(p)`
/// pixels, and the `k3` nearest features in the same cluster.
///
/// `fixed_angle` is the image's fixed descriptor angle, used for `theta`
/// when the parameters ask for [`ThetaReference::Fixed`]. Output is sorted
/// by `(p, n)`.
pub fn gen_2keypoints(
    set: &FeatureSet,
    clustering: &Clustering,
    params: &TwoKpParams,
    fixed_angle: f64,
) -> Vec<TwoKeypoint> {
    let feats = &set.features;
    let n = feats.len();
    let mut out = Vec::new();
    let mut by_dist: Vec<(f64, usize)> = Vec::with_capacity(n);
    let mut picked: Vec<(usize, Methods)> = Vec::new();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));

    for (p, fp) in feats.iter().enumerate() {
        by_dist.clear();
        by_dist.extend(
            feats
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != p)
                .map(|(j, fj)| (fp.distance_to(fj), j)),
        );
        picked.clear();
        let mut mark = |j: usize, set_flag: &dyn Fn(&mut Methods)| {
            if let Some(e) = picked.iter_mut().find(|e| e.0 == j) {
                set_flag(&mut e.1);
            } else {
                let mut m = Methods::default();
                set_flag(&mut m);
                picked.push((j, m));
            }
        };

        if params.k1 > 0 && !by_dist.is_empty() {
            let k = params.k1.min(by_dist.len());
            by_dist.select_nth_unstable_by(k - 1, cmp);
            let mut nearest = by_dist[..k].to_vec();
            nearest.sort_by(cmp);
            for &(_, j) in &nearest {
                mark(j, &|m| m.k_nearest = true);
            }
        }
        let radius = params.k2 * fp.scale;
        for &(d, j) in by_dist.iter() {
            if d <= radius {
                mark(j, &|m| m.radius = true);
            }
        }
        if params.k3 > 0 {
            let cl = &clustering.clusters[clustering.cluster_of(p)];
            let mut same: Vec<(f64, usize)> = cl
                .members
                .iter()
                .filter(|&&j| j != p)
                .map(|&j| (fp.distance_to(&feats[j]), j))
                .collect();
            same.sort_by(cmp);
            for &(_, j) in same.iter().take(params.k3) {
                mark(j, &|m| m.same_cluster = true);
            }
        }

        picked.sort_by_key(|e| e.0);
        let reference = match params.theta_reference {
            ThetaReference::Natural => fp.orientation,
            ThetaReference::Fixed => fixed_angle,
        };
        for &(j, methods) in &picked {
            let fj = &feats[j];
            let dist = fp.distance_to(fj);
            if !(dist > 0.0) {
                continue;
            }
            let dir = libm::atan2(fj.y - fp.y, fj.x - fp.x);
            out.push(TwoKeypoint {
                p,
                n: j,
                d: dist / fp.scale,
                theta: wrap_angle(dir - reference),
                methods,
            });
        }
    }
    out
}

/// Geometric fields of the match descriptor; the counts are taken from
/// `m.descriptor`.
pub fn compute_2kpmd(m: &TwoKeypointMatch, clusters1: &Clustering, clusters2: &Clustering) -> TwoKpDescriptor {
    let (d1, d2) = (m.tk1.d, m.tk2.d);
    TwoKpDescriptor {
        n1: m.descriptor.n1,
        n2: m.descriptor.n2,
        dist_r: (d1 / d2).min(d2 / d1),
        angle_d: angle_diff(m.tk1.theta, m.tk2.theta),
        cluster_t: clusters1.same_cluster(m.tk1.p, m.tk1.n) && clusters2.same_cluster(m.tk2.p, m.tk2.n),
        min_d: d1.min(d2),
    }
}

/// Every pair of 2keypoints whose main features and whose neighbours are
/// both putative matches in `x`, with full descriptors.
pub fn match_2keypoints(
    x: &[PutativeMatch],
    t1: &[TwoKeypoint],
    t2: &[TwoKeypoint],
    clusters1: &Clustering,
    clusters2: &Clustering,
) -> Vec<TwoKeypointMatch> {
    let mut keys: Vec<(usize, usize)> = x.iter().map(|m| m.key()).collect();
    keys.sort_unstable();
    keys.dedup();
    let partners = |i1: usize| -> &[(usize, usize)] {
        let lo = keys.partition_point(|k| k.0 < i1);
        let hi = keys.partition_point(|k| k.0 <= i1);
        &keys[lo..hi]
    };
    // t2 grouped by main feature
    let mut t2_order: Vec<usize> = (0..t2.len()).collect();
    t2_order.sort_by_key(|&i| (t2[i].p, t2[i].n));
    let by_main = |p2: usize| -> &[usize] {
        let lo = t2_order.partition_point(|&i| t2[i].p < p2);
        let hi = t2_order.partition_point(|&i| t2[i].p <= p2);
        &t2_order[lo..hi]
    };

    let mut raw: Vec<(usize, usize)> = Vec::new();
    for (a, tk1) in t1.iter().enumerate() {
        for &(_, p2) in partners(tk1.p) {
            for &b in by_main(p2) {
                if keys.binary_search(&(tk1.n, t2[b].n)).is_ok() {
                    raw.push((a, b));
                }
            }
        }
    }

    let mut c1 = alloc::vec![0u32; t1.len()];
    let mut c2 = alloc::vec![0u32; t2.len()];
    for &(a, b) in &raw {
        c1[a] += 1;
        c2[b] += 1;
    }
    raw.into_iter()
        .map(|(a, b)| {
            let mut m = TwoKeypointMatch {
                tk1: t1[a],
                tk2: t2[b],
                descriptor: TwoKpDescriptor {
                    n1: c1[a],
                    n2: c2[b],
                    ..TwoKpDescriptor::default()
                },
                prob: None,
            };
            m.descriptor = compute_2kpmd(&m, clusters1, clusters2);
            m
        })
        .collect()
}

/// Total order used for ranked 2keypoint matches: probability descending,
/// then `N1 + N2` ascending, then `(p1, n1, p2, n2)`.
pub fn rank_order(a: &TwoKeypointMatch, b: &TwoKeypointMatch) -> Ordering {
    let pa = a.prob.unwrap_or(0.0);
    let pb = b.prob.unwrap_or(0.0);
    pb.total_cmp(&pa)
        .then((a.descriptor.n1 + a.descriptor.n2).cmp(&(b.descriptor.n1 + b.descriptor.n2)))
        .then(a.indices().cmp(&b.indices()))
}

/// Scores every match with `model` and keeps the best `k`.
pub fn rank_2kp(
    mut matches: Vec<TwoKeypointMatch>,
    model: &TreeModel,
    k: usize,
) -> Result<Vec<TwoKeypointMatch>, ModelSchemaError> {
    model.check_schema(&TWO_KP_SCHEMA)?;
    for m in matches.iter_mut() {
        m.prob = Some(model.predict_proba(&m.descriptor.to_vector())?);
    }
    matches.sort_by(rank_order);
    matches.truncate(k);
    Ok(matches)
}
