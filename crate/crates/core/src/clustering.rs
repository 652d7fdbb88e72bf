//! Agglomerative descriptor clustering on fixed-orientation features,
//! bidirectional cluster matching and expansion into the putative set `X`.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

use crate::features::{ncc_unchecked, normalize, FeatureSet, PutativeMatch, Sources};

pub const DEFAULT_STOP_SIMILARITY: f64 = 0.85;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClusterError {
    #[error("clustering needs fixed-orientation descriptors")]
    ModeError,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Ascending feature indices.
    pub members: Vec<usize>,
    /// Per-coordinate median of the member descriptors, renormalized.
    pub representative: Vec<f64>,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// A partition of one image's features. Clusters are ordered by their
/// smallest member index.
#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    pub clusters: Vec<Cluster>,
    /// Cluster id of every feature.
    pub assignment: Vec<usize>,
}

impl Clustering {
    pub fn cluster_of(&self, feature: usize) -> usize {
        self.assignment[feature]
    }

    pub fn same_cluster(&self, a: usize, b: usize) -> bool {
        self.assignment[a] == self.assignment[b]
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }
}

fn median_representative(set: &FeatureSet, members: &[usize], scratch: &mut Vec<f64>) -> Vec<f64> {
    let mut rep = Vec::with_capacity(set.dim);
    for d in 0..set.dim {
        scratch.clear();
        scratch.extend(members.iter().map(|&m| set.features[m].descriptor[d]));
        scratch.sort_by(f64::total_cmp);
        let n = scratch.len();
        let med = if n % 2 == 1 {
            scratch[n / 2]
        } else {
            0.5 * (scratch[n / 2 - 1] + scratch[n / 2])
        };
        rep.push(med);
    }
    if !normalize(&mut rep) {
        // all medians zero: fall back to the first member's descriptor
        rep.clone_from(&set.features[members[0]].descriptor);
    }
    rep
}

#[derive(Clone, Copy)]
struct Best {
    sim: f64,
    partner: usize,
}

/// Ordering key of a candidate merge: higher similarity first, then the
/// lexicographically smallest pair of minimum member indices.
fn better(sim: f64, key: (usize, usize), than_sim: f64, than_key: (usize, usize)) -> bool {
    sim > than_sim || (sim == than_sim && key < than_key)
}

fn pair_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Agglomerative clustering by representative similarity.
///
/// Repeatedly merges the two clusters whose representatives correlate best,
/// while that correlation is at least `stop_sim`. Ties go to the pair with
/// the smallest minimum member indices.
pub fn agglomerative_cluster(set: &FeatureSet, stop_sim: f64) -> Result<Clustering, ClusterError> {
    if !set.mode.is_fixed() {
        return Err(ClusterError::ModeError);
    }
    let n = set.len();
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut reps: Vec<Vec<f64>> = set.features.iter().map(|f| f.descriptor.clone()).collect();
    // the minimum member index of a live cluster equals its slot index
    let mut alive = vec![true; n];
    let mut best: Vec<Option<Best>> = vec![None; n];
    let mut scratch = Vec::new();

    let row_best = |a: usize, reps: &[Vec<f64>], alive: &[bool]| -> Option<Best> {
        let mut out: Option<Best> = None;
        for b in 0..reps.len() {
            if b == a || !alive[b] {
                continue;
            }
            let s = ncc_unchecked(&reps[a], &reps[b]);
            let take = match out {
                None => true,
                Some(o) => better(s, pair_key(a, b), o.sim, pair_key(a, o.partner)),
            };
            if take {
                out = Some(Best { sim: s, partner: b });
            }
        }
        out
    };

    for a in 0..n {
        best[a] = row_best(a, &reps, &alive);
    }

    loop {
        let mut pick: Option<(usize, Best)> = None;
        for a in 0..n {
            if !alive[a] {
                continue;
            }
            if let Some(b) = best[a] {
                let take = match pick {
                    None => true,
                    Some((pa, pb)) => better(b.sim, pair_key(a, b.partner), pb.sim, pair_key(pa, pb.partner)),
                };
                if take {
                    pick = Some((a, b));
                }
            }
        }
        let Some((a, b)) = pick else { break };
        if b.sim < stop_sim {
            break;
        }
        let (keep, gone) = pair_key(a, b.partner);
        let moved = core::mem::take(&mut members[gone]);
        members[keep].extend(moved);
        members[keep].sort_unstable();
        alive[gone] = false;
        best[gone] = None;
        reps[gone].clear();
        reps[keep] = median_representative(set, &members[keep], &mut scratch);

        best[keep] = row_best(keep, &reps, &alive);
        for c in 0..n {
            if !alive[c] || c == keep {
                continue;
            }
            match best[c] {
                Some(bc) if bc.partner == keep || bc.partner == gone => {
                    best[c] = row_best(c, &reps, &alive);
                }
                Some(bc) => {
                    let s = ncc_unchecked(&reps[c], &reps[keep]);
                    if better(s, pair_key(c, keep), bc.sim, pair_key(c, bc.partner)) {
                        best[c] = Some(Best { sim: s, partner: keep });
                    }
                }
                None => best[c] = row_best(c, &reps, &alive),
            }
        }
    }

    let mut clusters = Vec::new();
    let mut assignment = vec![0; n];
    for slot in 0..n {
        if !alive[slot] {
            continue;
        }
        let id = clusters.len();
        for &m in &members[slot] {
            assignment[m] = id;
        }
        clusters.push(Cluster {
            members: core::mem::take(&mut members[slot]),
            representative: core::mem::take(&mut reps[slot]),
        });
    }
    Ok(Clustering { clusters, assignment })
}

/// A matched cluster pair and the direction(s) that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct ClusterPair {
    pub c1: usize,
    pub c2: usize,
    /// Found as image-1 cluster -> closest image-2 cluster.
    pub forward: bool,
    /// Found as image-2 cluster -> closest image-1 cluster.
    pub backward: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClusterPairing {
    /// Sorted by `(c1, c2)`, one entry per distinct pair.
    pub pairs: Vec<ClusterPair>,
}

fn closest(rep: &[f64], others: &[Cluster]) -> Option<usize> {
    let mut out: Option<(usize, f64)> = None;
    for (j, c) in others.iter().enumerate() {
        let s = ncc_unchecked(rep, &c.representative);
        if out.is_none_or(|(_, b)| s > b) {
            out = Some((j, s));
        }
    }
    out.map(|(j, _)| j)
}

/// Matches every cluster to its closest counterpart in the other image,
/// in both directions, with no ratio test.
pub fn match_clusters(c1: &Clustering, c2: &Clustering) -> ClusterPairing {
    let mut pairs: Vec<ClusterPair> = Vec::new();
    for (i, c) in c1.clusters.iter().enumerate() {
        if let Some(j) = closest(&c.representative, &c2.clusters) {
            pairs.push(ClusterPair { c1: i, c2: j, forward: true, backward: false });
        }
    }
    for (j, c) in c2.clusters.iter().enumerate() {
        if let Some(i) = closest(&c.representative, &c1.clusters) {
            pairs.push(ClusterPair { c1: i, c2: j, forward: false, backward: true });
        }
    }
    pairs.sort_by_key(|p| (p.c1, p.c2));
    let mut merged: Vec<ClusterPair> = Vec::with_capacity(pairs.len());
    for p in pairs {
        match merged.last_mut() {
            Some(last) if (last.c1, last.c2) == (p.c1, p.c2) => {
                last.forward |= p.forward;
                last.backward |= p.backward;
            }
            _ => merged.push(p),
        }
    }
    ClusterPairing { pairs: merged }
}

/// Cartesian product of the members of every matched cluster pair,
/// deduplicated and sorted by index pair.
pub fn expand_to_matches(pairing: &ClusterPairing, c1: &Clustering, c2: &Clustering) -> Vec<PutativeMatch> {
    let mut keys: Vec<(usize, usize)> = Vec::new();
    for p in &pairing.pairs {
        for &a in &c1.clusters[p.c1].members {
            for &b in &c2.clusters[p.c2].members {
                keys.push((a, b));
            }
        }
    }
    keys.sort_unstable();
    keys.dedup();
    keys.into_iter().map(|(a, b)| PutativeMatch::new(a, b, Sources::X)).collect()
}
