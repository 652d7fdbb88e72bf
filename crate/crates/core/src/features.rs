//! Feature data model, descriptor similarity and exhaustive nearest-neighbour search.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::angle::wrap_angle;

/// Tolerance on the Euclidean norm of a descriptor.
pub const UNIT_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FeatureError {
    #[error("descriptor length mismatch: {0} vs {1}")]
    DimensionError(usize, usize),
    #[error("invalid feature: {0}")]
    InvalidFeature(&'static str),
    #[error("descriptor norm {0} is not 1")]
    NotUnitNorm(f64),
    #[error("feature set is empty")]
    EmptySet,
}

/// Position, scale and orientation of a keypoint, without its descriptor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalFrame {
    pub x: f64,
    pub y: f64,
    pub scale: f64,
    pub orientation: f64,
}

/// One detected keypoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feature {
    pub x: f64,
    pub y: f64,
    /// Scale in pixels, strictly positive.
    pub scale: f64,
    /// Orientation in radians, `(-pi, pi]`.
    pub orientation: f64,
    /// Unit-norm descriptor.
    pub descriptor: Vec<f64>,
}

impl Feature {
    /// Validates and builds a feature. The orientation is wrapped into `(-pi, pi]`.
    pub fn new(
        x: f64,
        y: f64,
        scale: f64,
        orientation: f64,
        descriptor: Vec<f64>,
    ) -> Result<Self, FeatureError> {
        if !(x.is_finite() && y.is_finite()) {
            return Err(FeatureError::InvalidFeature("non-finite position"));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(FeatureError::InvalidFeature("scale must be positive"));
        }
        if !orientation.is_finite() {
            return Err(FeatureError::InvalidFeature("non-finite orientation"));
        }
        if descriptor.iter().any(|v| !v.is_finite()) {
            return Err(FeatureError::InvalidFeature("non-finite descriptor"));
        }
        let n = norm(&descriptor);
        if (n - 1.0).abs() > UNIT_NORM_TOL {
            return Err(FeatureError::NotUnitNorm(n));
        }
        Ok(Self {
            x,
            y,
            scale,
            orientation: wrap_angle(orientation),
            descriptor,
        })
    }

    pub fn frame(&self) -> LocalFrame {
        LocalFrame {
            x: self.x,
            y: self.y,
            scale: self.scale,
            orientation: self.orientation,
        }
    }

    pub fn distance_to(&self, other: &Feature) -> f64 {
        libm::hypot(self.x - other.x, self.y - other.y)
    }
}

/// How orientations were assigned when the descriptors were computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum OrientationMode {
    /// Each keypoint uses its own dominant orientation.
    Natural,
    /// Every keypoint was described at this common angle (radians).
    Fixed(f64),
}

impl OrientationMode {
    pub fn is_fixed(&self) -> bool {
        matches!(self, OrientationMode::Fixed(_))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSet {
    pub image_id: String,
    pub mode: OrientationMode,
    /// Descriptor length shared by every feature.
    pub dim: usize,
    pub features: Vec<Feature>,
}

impl FeatureSet {
    pub fn new(
        image_id: impl Into<String>,
        mode: OrientationMode,
        dim: usize,
        features: Vec<Feature>,
    ) -> Result<Self, FeatureError> {
        if let Some(f) = features.iter().find(|f| f.descriptor.len() != dim) {
            return Err(FeatureError::DimensionError(f.descriptor.len(), dim));
        }
        Ok(Self {
            image_id: image_id.into(),
            mode,
            dim,
            features,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Which putative-match generators produced a match.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sources {
    pub in_xl: bool,
    pub in_xb: bool,
    pub in_x: bool,
}

impl Sources {
    pub const XL: Sources = Sources { in_xl: true, in_xb: false, in_x: false };
    pub const XB: Sources = Sources { in_xl: false, in_xb: true, in_x: false };
    pub const X: Sources = Sources { in_xl: false, in_xb: false, in_x: true };

    pub fn union(self, other: Sources) -> Sources {
        Sources {
            in_xl: self.in_xl || other.in_xl,
            in_xb: self.in_xb || other.in_xb,
            in_x: self.in_x || other.in_x,
        }
    }

    pub fn any(&self) -> bool {
        self.in_xl || self.in_xb || self.in_x
    }

    /// Compact tag such as `L+B+X`, used in CSV output.
    pub fn tag(&self) -> String {
        let mut s = String::new();
        for (on, t) in [(self.in_xl, "L"), (self.in_xb, "B"), (self.in_x, "X")] {
            if on {
                if !s.is_empty() {
                    s.push('+');
                }
                s.push_str(t);
            }
        }
        s
    }

    pub fn from_tag(tag: &str) -> Option<Sources> {
        let mut s = Sources::default();
        for part in tag.split('+') {
            match part.trim() {
                "L" => s.in_xl = true,
                "B" => s.in_xb = true,
                "X" => s.in_x = true,
                _ => return None,
            }
        }
        s.any().then_some(s)
    }
}

/// A candidate correspondence `(i1, i2)` with whatever scores are known for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PutativeMatch {
    pub i1: usize,
    pub i2: usize,
    /// Similarity of the two descriptors.
    pub m_k: Option<f64>,
    /// Second-best similarity of `i2` over image 1.
    pub m_k1: Option<f64>,
    /// Second-best similarity of `i1` over image 2.
    pub m_k2: Option<f64>,
    pub d_r: Option<f64>,
    pub t_k: Option<f64>,
    pub sfm: Option<u32>,
    pub prob: Option<f64>,
    pub sources: Sources,
}

impl PutativeMatch {
    pub fn new(i1: usize, i2: usize, sources: Sources) -> Self {
        Self {
            i1,
            i2,
            m_k: None,
            m_k1: None,
            m_k2: None,
            d_r: None,
            t_k: None,
            sfm: None,
            prob: None,
            sources,
        }
    }

    pub fn key(&self) -> (usize, usize) {
        (self.i1, self.i2)
    }

    /// Folds the scores and flags of `other` (same index pair) into `self`.
    pub fn merge(&mut self, other: &PutativeMatch) {
        debug_assert_eq!(self.key(), other.key());
        self.m_k = self.m_k.or(other.m_k);
        self.m_k1 = self.m_k1.or(other.m_k1);
        self.m_k2 = self.m_k2.or(other.m_k2);
        self.d_r = self.d_r.or(other.d_r);
        self.t_k = self.t_k.or(other.t_k);
        self.sfm = self.sfm.or(other.sfm);
        self.prob = self.prob.or(other.prob);
        self.sources = self.sources.union(other.sources);
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    libm::sqrt(v.iter().map(|x| x * x).sum())
}

/// Rescales `v` to unit length; returns `false` if its norm is zero.
pub fn normalize(v: &mut [f64]) -> bool {
    let n = norm(v);
    if n == 0.0 || !n.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= n);
    true
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Normalized cross-correlation of two unit descriptors: their dot product,
/// clamped to `[-1, 1]`.
pub fn ncc(a: &[f64], b: &[f64]) -> Result<f64, FeatureError> {
    if a.len() != b.len() {
        return Err(FeatureError::DimensionError(a.len(), b.len()));
    }
    Ok(ncc_unchecked(a, b))
}

#[inline]
pub(crate) fn ncc_unchecked(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b).clamp(-1.0, 1.0)
}

/// Best and second-best similarity of a query against a feature set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NearestTwo {
    pub index: usize,
    pub best: f64,
    /// `-1` when the set holds a single feature.
    pub second: f64,
    pub singleton: bool,
}

/// Running top-two tracker; equal similarities keep the earlier (lower) index.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TopTwo {
    pub index: usize,
    pub best: f64,
    pub second: f64,
    pub count: usize,
}

impl TopTwo {
    pub fn new() -> Self {
        Self {
            index: usize::MAX,
            best: f64::NEG_INFINITY,
            second: f64::NEG_INFINITY,
            count: 0,
        }
    }

    /// Candidates must be offered in ascending index order.
    #[inline]
    pub fn offer(&mut self, index: usize, s: f64) {
        self.count += 1;
        if s > self.best {
            self.second = self.best;
            self.best = s;
            self.index = index;
        } else if s > self.second {
            self.second = s;
        }
    }

    pub fn finish(self) -> Option<NearestTwo> {
        if self.count == 0 {
            return None;
        }
        let singleton = self.count == 1;
        Some(NearestTwo {
            index: self.index,
            best: self.best,
            second: if singleton { -1.0 } else { self.second },
            singleton,
        })
    }
}

/// Exhaustive nearest neighbour of `q` in `set` by descriptor similarity.
pub fn nearest_two(q: &[f64], set: &FeatureSet) -> Result<NearestTwo, FeatureError> {
    if q.len() != set.dim {
        return Err(FeatureError::DimensionError(q.len(), set.dim));
    }
    let mut top = TopTwo::new();
    for (j, f) in set.features.iter().enumerate() {
        top.offer(j, ncc_unchecked(q, &f.descriptor));
    }
    top.finish().ok_or(FeatureError::EmptySet)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_unit(rng: &mut impl Rng, d: usize) -> Vec<f64> {
        let mut v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() - 0.5).collect();
        normalize(&mut v);
        v
    }

    fn set_of(descs: Vec<Vec<f64>>) -> FeatureSet {
        let d = descs[0].len();
        let fs = descs
            .into_iter()
            .enumerate()
            .map(|(i, v)| Feature::new(i as f64, 0.0, 1.0, 0.0, v).unwrap())
            .collect();
        FeatureSet::new("t", OrientationMode::Natural, d, fs).unwrap()
    }

    #[test]
    fn ncc_self_and_antipodal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = random_unit(&mut rng, 16);
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert!((ncc(&v, &v).unwrap() - 1.0).abs() < 1e-12);
        assert!((ncc(&v, &neg).unwrap() + 1.0).abs() < 1e-12);
        assert!(ncc(&v, &v[..3]).is_err());
    }

    #[test]
    fn ncc_matches_compensated_dot() {
        // Neumaier-compensated summation as an extended-precision oracle.
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let a = random_unit(&mut rng, 128);
            let b = random_unit(&mut rng, 128);
            let (mut s, mut c) = (0.0f64, 0.0f64);
            for (x, y) in a.iter().zip(&b) {
                let p = x * y;
                let t = s + p;
                if s.abs() >= p.abs() {
                    c += (s - t) + p;
                } else {
                    c += (p - t) + s;
                }
                s = t;
            }
            assert!((ncc(&a, &b).unwrap() - (s + c)).abs() < 1e-12);
        }
    }

    #[test]
    fn feature_validation() {
        assert!(Feature::new(0.0, 0.0, 0.0, 0.0, vec![1.0]).is_err());
        assert!(Feature::new(0.0, 0.0, 1.0, 0.0, vec![0.5]).is_err());
        assert!(Feature::new(f64::NAN, 0.0, 1.0, 0.0, vec![1.0]).is_err());
        let f = Feature::new(0.0, 0.0, 1.0, 3.0 * core::f64::consts::PI, vec![1.0]).unwrap();
        assert!((f.orientation - core::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn nearest_exact_copy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let descs: Vec<_> = (0..20).map(|_| random_unit(&mut rng, 8)).collect();
        let q = descs[13].clone();
        let r = nearest_two(&q, &set_of(descs)).unwrap();
        assert_eq!(r.index, 13);
        assert!((r.best - 1.0).abs() < 1e-12);
    }

    #[test]
    fn nearest_tie_takes_lower_index() {
        let a = vec![1.0, 0.0];
        let b = vec![0.0, 1.0];
        let q = vec![core::f64::consts::FRAC_1_SQRT_2; 2];
        let r = nearest_two(&q, &set_of(vec![b.clone(), a.clone(), b.clone(), a])).unwrap();
        assert_eq!(r.index, 0);
        assert_eq!(r.best, r.second);
    }

    #[test]
    fn nearest_singleton() {
        let r = nearest_two(&[1.0, 0.0], &set_of(vec![vec![0.0, 1.0]])).unwrap();
        assert!(r.singleton);
        assert_eq!(r.second, -1.0);
    }

    #[test]
    fn sources_tag_round_trip() {
        let s = Sources::XL.union(Sources::X);
        assert_eq!(s.tag(), "L+X");
        assert_eq!(Sources::from_tag("L+X"), Some(s));
        assert_eq!(Sources::from_tag("Q"), None);
    }
}
