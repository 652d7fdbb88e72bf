//! Two-view geometry: Sampson distance, linear fundamental-matrix solvers,
//! similarity-based match expansion and ground truth from camera matrices.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{DMatrix, Matrix3, Point2, Point3, Vector3};
use thiserror::Error;

use crate::features::{FeatureSet, LocalFrame};
use crate::twokeypoint::TwoKeypointMatch;

/// Default multiple of the feature scale used for virtual points.
pub const DEFAULT_OFFSET_SCALE: f64 = 5.0;

/// Relative singular-value floor below which a design matrix is rank deficient.
const RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate point configuration")]
    DegenerateConfiguration,
    #[error("need {need} correspondences, got {got}")]
    NotEnoughPoints { need: usize, got: usize },
    #[error("invalid feature: {0}")]
    InvalidFeature(&'static str),
    #[error("camera centres coincide; no epipolar geometry")]
    NoEpipolarGeometry,
    #[error("invalid camera: {0}")]
    InvalidCamera(&'static str),
}

/// A correspondence between pixel coordinates in image 1 and image 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointPair {
    pub x1: Point2<f64>,
    pub x2: Point2<f64>,
}

impl PointPair {
    pub fn new(x1: [f64; 2], x2: [f64; 2]) -> Self {
        Self {
            x1: Point2::new(x1[0], x1[1]),
            x2: Point2::new(x2[0], x2[1]),
        }
    }

    pub fn swapped(&self) -> Self {
        Self {
            x1: self.x2,
            x2: self.x1,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x1.iter().chain(self.x2.iter()).all(|v| v.is_finite())
    }
}

/// Rank-2 fundamental matrix with unit Frobenius norm and a positive
/// largest-magnitude entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FundamentalMatrix(Matrix3<f64>);

impl FundamentalMatrix {
    /// Projects `m` onto rank 2 (smallest singular value zeroed), scales it to
    /// unit Frobenius norm and fixes its sign.
    ///
    /// Pixel-unit matrices have entries spanning many orders of magnitude, so
    /// the projection is done on `S m S` with `S = diag(c, c, 1)` chosen to
    /// balance the blocks, and mapped back.
    pub fn from_matrix(m: Matrix3<f64>) -> Result<Self, GeometryError> {
        Self::project(m, true)
    }

    fn project(m: Matrix3<f64>, balance: bool) -> Result<Self, GeometryError> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::DegenerateConfiguration);
        }
        let scale = m.abs().max();
        if scale == 0.0 {
            return Err(GeometryError::DegenerateConfiguration);
        }
        let m = m / scale;
        let c = if balance { balance_factor(&m) } else { 1.0 };
        let s = Matrix3::from_diagonal(&Vector3::new(c, c, 1.0));
        let s_inv = Matrix3::from_diagonal(&Vector3::new(1.0 / c, 1.0 / c, 1.0));
        let g = s * m * s;
        let g = g / g.abs().max();
        let svd = g.svd(true, true);
        let (u, v_t) = match (svd.u, svd.v_t) {
            (Some(u), Some(v_t)) => (u, v_t),
            _ => return Err(GeometryError::DegenerateConfiguration),
        };
        let mut sv = svd.singular_values;
        let smallest = sv.imin();
        sv[smallest] = 0.0;
        if sv.max() == 0.0 {
            return Err(GeometryError::DegenerateConfiguration);
        }
        let r2 = s_inv * (u * Matrix3::from_diagonal(&sv) * v_t) * s_inv;
        Ok(Self::canonical(r2))
    }

    fn canonical(m: Matrix3<f64>) -> Self {
        let mut m = m / m.norm();
        let mut big = 0.0f64;
        let mut sign = 1.0;
        // row-major scan so the first of equal magnitudes wins
        for r in 0..3 {
            for c in 0..3 {
                let v = m[(r, c)];
                if v.abs() > big {
                    big = v.abs();
                    sign = v.signum();
                }
            }
        }
        if sign < 0.0 {
            m = -m;
        }
        Self(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// The same relation with the roles of the images exchanged.
    pub fn transpose(&self) -> Self {
        Self::canonical(self.0.transpose())
    }

    pub fn sampson_distance(&self, p: &PointPair) -> f64 {
        sampson_distance(&self.0, p)
    }

    /// Frobenius norm of the difference of the two canonical matrices.
    pub fn frobenius_distance(&self, other: &FundamentalMatrix) -> f64 {
        (self.0 - other.0).norm()
    }

    /// Row-major entries.
    pub fn to_row_major(&self) -> [f64; 9] {
        let m = &self.0;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
        ]
    }

    pub fn from_row_major(v: &[f64; 9]) -> Result<Self, GeometryError> {
        Self::from_matrix(Matrix3::from_row_slice(v))
    }

    /// Number of pairs whose Sampson distance is below `tau`.
    pub fn support(&self, pairs: &[PointPair], tau: f64) -> usize {
        pairs.iter().filter(|p| self.sampson_distance(p) < tau).count()
    }
}

/// `c` such that the upper-left block, the last row and column, and the
/// corner of `diag(c, c, 1) m diag(c, c, 1)` have comparable magnitudes.
fn balance_factor(m: &Matrix3<f64>) -> f64 {
    let block = m.fixed_view::<2, 2>(0, 0).amax();
    let edge = [m[(0, 2)], m[(1, 2)], m[(2, 0)], m[(2, 1)]].iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let corner = m[(2, 2)].abs();
    if block == 0.0 {
        return 1.0;
    }
    let c = (edge / block).max(libm::sqrt(corner / block));
    if c.is_finite() && c > 0.0 {
        c.clamp(1e-6, 1e6)
    } else {
        1.0
    }
}

/// First-order geometric error of `p` under `f`, in pixels (the square root
/// of the Sampson error). Scale invariant in `f`; `+inf` when all four
/// epipolar-line gradients vanish.
pub fn sampson_distance(f: &Matrix3<f64>, p: &PointPair) -> f64 {
    let x1 = Vector3::new(p.x1.x, p.x1.y, 1.0);
    let x2 = Vector3::new(p.x2.x, p.x2.y, 1.0);
    let fx1 = f * x1;
    let ftx2 = f.tr_mul(&x2);
    let num = x2.dot(&fx1);
    let den = fx1[0] * fx1[0] + fx1[1] * fx1[1] + ftx2[0] * ftx2[0] + ftx2[1] * ftx2[1];
    if den == 0.0 {
        return f64::INFINITY;
    }
    num.abs() / libm::sqrt(den)
}

/// Similarity transform that moves the centroid to the origin and the mean
/// distance to `sqrt(2)`.
fn hartley_transform<'a>(pts: impl Iterator<Item = &'a Point2<f64>> + Clone) -> Option<Matrix3<f64>> {
    let n = pts.clone().count() as f64;
    let (sx, sy) = pts.clone().fold((0.0, 0.0), |(a, b), p| (a + p.x, b + p.y));
    let (cx, cy) = (sx / n, sy / n);
    let mean = pts.map(|p| libm::hypot(p.x - cx, p.y - cy)).sum::<f64>() / n;
    if !(mean > 0.0 && mean.is_finite()) {
        return None;
    }
    let s = core::f64::consts::SQRT_2 / mean;
    Some(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

fn apply(t: &Matrix3<f64>, p: &Point2<f64>) -> (f64, f64) {
    (t[(0, 0)] * p.x + t[(0, 2)], t[(1, 1)] * p.y + t[(1, 2)])
}

/// Normalized design matrix (at least 9 rows, zero padded) and the two
/// normalizing transforms.
fn normalized_design(pairs: &[PointPair]) -> Result<(DMatrix<f64>, Matrix3<f64>, Matrix3<f64>), GeometryError> {
    if pairs.iter().any(|p| !p.is_finite()) {
        return Err(GeometryError::DegenerateConfiguration);
    }
    let t1 = hartley_transform(pairs.iter().map(|p| &p.x1)).ok_or(GeometryError::DegenerateConfiguration)?;
    let t2 = hartley_transform(pairs.iter().map(|p| &p.x2)).ok_or(GeometryError::DegenerateConfiguration)?;
    let rows = pairs.len().max(9);
    let mut a = DMatrix::<f64>::zeros(rows, 9);
    for (i, p) in pairs.iter().enumerate() {
        let (x, y) = apply(&t1, &p.x1);
        let (u, v) = apply(&t2, &p.x2);
        let row = [u * x, u * y, u, v * x, v * y, v, x, y, 1.0];
        for (j, val) in row.iter().enumerate() {
            a[(i, j)] = *val;
        }
    }
    Ok((a, t1, t2))
}

/// Right singular vectors ordered by decreasing singular value.
fn sorted_right_singular(a: DMatrix<f64>) -> Result<(Vec<f64>, Vec<[f64; 9]>), GeometryError> {
    let svd = a.svd(false, true);
    let v_t = svd.v_t.ok_or(GeometryError::DegenerateConfiguration)?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let sv = order.iter().map(|&i| svd.singular_values[i]).collect();
    let vecs = order
        .iter()
        .map(|&i| {
            let mut r = [0.0; 9];
            for (k, v) in r.iter_mut().enumerate() {
                *v = v_t[(i, k)];
            }
            r
        })
        .collect();
    Ok((sv, vecs))
}

fn denormalize(fn_: &Matrix3<f64>, t1: &Matrix3<f64>, t2: &Matrix3<f64>) -> Matrix3<f64> {
    t2.transpose() * fn_ * t1
}

/// Rank 2 is enforced in the normalized frame, where the matrix is well
/// conditioned. Denormalizing keeps the rank, so no second projection.
fn from_normalized(m: Matrix3<f64>, t1: &Matrix3<f64>, t2: &Matrix3<f64>) -> Result<FundamentalMatrix, GeometryError> {
    let fn_ = FundamentalMatrix::project(m, false)?;
    let d = denormalize(fn_.matrix(), t1, t2);
    if d.iter().any(|v| !v.is_finite()) || d.norm() == 0.0 {
        return Err(GeometryError::DegenerateConfiguration);
    }
    Ok(FundamentalMatrix::canonical(d))
}

/// Normalized eight-point algorithm on `n >= 8` correspondences.
pub fn eight_point(pairs: &[PointPair]) -> Result<FundamentalMatrix, GeometryError> {
    if pairs.len() < 8 {
        return Err(GeometryError::NotEnoughPoints {
            need: 8,
            got: pairs.len(),
        });
    }
    let (a, t1, t2) = normalized_design(pairs)?;
    let (sv, vecs) = sorted_right_singular(a)?;
    if !(sv[7] > RANK_TOL * sv[0]) {
        return Err(GeometryError::DegenerateConfiguration);
    }
    from_normalized(Matrix3::from_row_slice(&vecs[8]), &t1, &t2)
}

/// Seven-point algorithm: the one to three real solutions of
/// `det(l F1 + (1 - l) F2) = 0` over the two-dimensional null space.
pub fn seven_point(pairs: &[PointPair]) -> Result<Vec<FundamentalMatrix>, GeometryError> {
    if pairs.len() != 7 {
        return Err(GeometryError::NotEnoughPoints {
            need: 7,
            got: pairs.len(),
        });
    }
    let (a, t1, t2) = normalized_design(pairs)?;
    let (sv, vecs) = sorted_right_singular(a)?;
    if !(sv[6] > RANK_TOL * sv[0]) {
        return Err(GeometryError::DegenerateConfiguration);
    }
    let f1 = Matrix3::from_row_slice(&vecs[7]);
    let f2 = Matrix3::from_row_slice(&vecs[8]);
    let det_at = |l: f64| (f1 * l + f2 * (1.0 - l)).determinant();

    // interpolate the cubic through four samples
    let p0 = det_at(0.0);
    let p1 = det_at(1.0);
    let pm1 = det_at(-1.0);
    let p2 = det_at(2.0);
    let d = p0;
    let b = (p1 + pm1) / 2.0 - d;
    let a_plus_c = (p1 - pm1) / 2.0;
    let a3 = (p2 - 4.0 * b - d - 2.0 * a_plus_c) / 6.0;
    let c = a_plus_c - a3;

    let mut roots = solve_cubic(a3, b, c, d);
    for r in roots.iter_mut() {
        // Newton polish on the exact determinant
        for _ in 0..4 {
            let h = 1e-7 * (1.0 + r.abs());
            let f0 = det_at(*r);
            let df = (det_at(*r + h) - det_at(*r - h)) / (2.0 * h);
            if df == 0.0 || !df.is_finite() {
                break;
            }
            let step = f0 / df;
            if !step.is_finite() {
                break;
            }
            *r -= step;
        }
    }

    let mut out: Vec<FundamentalMatrix> = Vec::with_capacity(3);
    let mut push = |m: Matrix3<f64>| {
        if let Ok(f) = from_normalized(m, &t1, &t2) {
            if !out.iter().any(|g| g.frobenius_distance(&f) < 1e-12) {
                out.push(f);
            }
        }
    };
    let scale = a3.abs().max(b.abs()).max(c.abs()).max(d.abs());
    if a3.abs() <= 1e-12 * scale {
        // root at infinity: F1 itself is singular
        push(f1);
    }
    for r in roots {
        push(f1 * r + f2 * (1.0 - r));
    }
    if out.is_empty() {
        return Err(GeometryError::DegenerateConfiguration);
    }
    Ok(out)
}

/// Real roots of `a x^3 + b x^2 + c x + d`, degrading to lower degree when
/// leading coefficients vanish.
pub(crate) fn solve_cubic(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
    if scale == 0.0 {
        return Vec::new();
    }
    let mut roots = Vec::with_capacity(3);
    if a.abs() <= 1e-12 * scale {
        if b.abs() <= 1e-12 * scale {
            if c != 0.0 {
                roots.push(-d / c);
            }
            return roots;
        }
        let disc = c * c - 4.0 * b * d;
        if disc >= 0.0 {
            let sq = libm::sqrt(disc);
            // numerically stable pair
            let q = -0.5 * (c + libm::copysign(sq, c));
            if q != 0.0 {
                roots.push(q / b);
                roots.push(d / q);
            } else {
                roots.push(0.0);
            }
        }
        return roots;
    }
    let (b, c, d) = (b / a, c / a, d / a);
    let q = (3.0 * c - b * b) / 9.0;
    let r = (9.0 * b * c - 27.0 * d - 2.0 * b * b * b) / 54.0;
    let disc = q * q * q + r * r;
    if disc > 0.0 {
        let sq = libm::sqrt(disc);
        let s = libm::cbrt(r + sq);
        let t = libm::cbrt(r - sq);
        roots.push(-b / 3.0 + s + t);
    } else if q == 0.0 {
        roots.push(-b / 3.0);
    } else {
        let theta = libm::acos((r / libm::sqrt(-q * q * q)).clamp(-1.0, 1.0));
        let m = 2.0 * libm::sqrt(-q);
        for k in 0..3 {
            roots.push(m * libm::cos((theta + 2.0 * PI * k as f64) / 3.0) - b / 3.0);
        }
    }
    roots
}

/// The real match `(a, b)` plus three virtual matches placed at
/// `offset_scale * s * R(alpha) * u` for `u` in `{(1,0), (0,1), (-1,0)}`
/// around each feature. The image-2 points are the image-1 offsets carried
/// over by the local similarity (rotation `alpha_b - alpha_a`, scale `s_b / s_a`).
pub fn expand_match_similarity(
    a: &LocalFrame,
    b: &LocalFrame,
    offset_scale: f64,
) -> Result<[PointPair; 4], GeometryError> {
    for f in [a, b] {
        if !(f.scale.is_finite() && f.scale > 0.0) {
            return Err(GeometryError::InvalidFeature("scale must be positive"));
        }
        if !(f.orientation.is_finite() && f.x.is_finite() && f.y.is_finite()) {
            return Err(GeometryError::InvalidFeature("non-finite frame"));
        }
    }
    let (sa, ca) = libm::sincos(a.orientation);
    let (sb, cb) = libm::sincos(b.orientation);
    let ra = offset_scale * a.scale;
    let rb = offset_scale * b.scale;
    let mut out = [PointPair::new([a.x, a.y], [b.x, b.y]); 4];
    for (slot, (ux, uy)) in out[1..].iter_mut().zip([(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0)]) {
        let p1 = [a.x + ra * (ca * ux - sa * uy), a.y + ra * (sa * ux + ca * uy)];
        let p2 = [b.x + rb * (cb * ux - sb * uy), b.y + rb * (sb * ux + cb * uy)];
        *slot = PointPair::new(p1, p2);
    }
    Ok(out)
}

/// Rough fundamental matrix from two 2keypoint matches: their four real
/// matches, each expanded by [`expand_match_similarity`], fed to [`eight_point`].
pub fn f_from_two_2kp(
    a: &TwoKeypointMatch,
    b: &TwoKeypointMatch,
    f1: &FeatureSet,
    f2: &FeatureSet,
    offset_scale: f64,
) -> Result<FundamentalMatrix, GeometryError> {
    let (a1, b1) = ([a.tk1.p, a.tk1.n], [b.tk1.p, b.tk1.n]);
    let (a2, b2) = ([a.tk2.p, a.tk2.n], [b.tk2.p, b.tk2.n]);
    if a1.iter().any(|i| b1.contains(i)) || a2.iter().any(|i| b2.contains(i)) {
        return Err(GeometryError::DegenerateConfiguration);
    }
    let mut pairs = Vec::with_capacity(16);
    for (i1, i2) in [(a1[0], a2[0]), (a1[1], a2[1]), (b1[0], b2[0]), (b1[1], b2[1])] {
        let (u, v) = match (f1.features.get(i1), f2.features.get(i2)) {
            (Some(u), Some(v)) => (u, v),
            _ => return Err(GeometryError::InvalidFeature("feature index out of range")),
        };
        pairs.extend_from_slice(&expand_match_similarity(&u.frame(), &v.frame(), offset_scale)?);
    }
    eight_point(&pairs)
}

/// Pinhole camera `x ~ K (R X + t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub k: Matrix3<f64>,
    pub r: Matrix3<f64>,
    pub t: Vector3<f64>,
}

impl CameraModel {
    pub fn new(k: Matrix3<f64>, r: Matrix3<f64>, t: Vector3<f64>) -> Result<Self, GeometryError> {
        if (r.determinant() - 1.0).abs() > 1e-10 || (r.transpose() * r - Matrix3::identity()).amax() > 1e-10 {
            return Err(GeometryError::InvalidCamera("R is not a rotation"));
        }
        if k[(1, 0)] != 0.0 || k[(2, 0)] != 0.0 || k[(2, 1)] != 0.0 {
            return Err(GeometryError::InvalidCamera("K is not upper triangular"));
        }
        if !(k[(0, 0)] > 0.0 && k[(1, 1)] > 0.0 && k[(2, 2)] > 0.0) {
            return Err(GeometryError::InvalidCamera("K diagonal must be positive"));
        }
        if t.iter().any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidCamera("non-finite translation"));
        }
        Ok(Self { k, r, t })
    }

    pub fn center(&self) -> Point3<f64> {
        Point3::from(-(self.r.transpose() * self.t))
    }

    /// Point in camera coordinates.
    pub fn to_camera(&self, x: &Point3<f64>) -> Vector3<f64> {
        self.r * x.coords + self.t
    }

    /// Pixel projection; `None` for points at or behind the camera plane.
    pub fn project(&self, x: &Point3<f64>) -> Option<Point2<f64>> {
        let c = self.to_camera(x);
        if c.z <= 0.0 {
            return None;
        }
        let h = self.k * c;
        Some(Point2::new(h.x / h.z, h.y / h.z))
    }
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// `F = K2^-T [t]x R K1^-1` for the relative motion from camera 1 to camera 2.
pub fn fundamental_from_cameras(c1: &CameraModel, c2: &CameraModel) -> Result<FundamentalMatrix, GeometryError> {
    let r_rel = c2.r * c1.r.transpose();
    let t_rel = c2.t - r_rel * c1.t;
    let size = 1.0 + c1.t.norm() + c2.t.norm();
    if t_rel.norm() <= 1e-12 * size {
        return Err(GeometryError::NoEpipolarGeometry);
    }
    let k1_inv = c1.k.try_inverse().ok_or(GeometryError::InvalidCamera("singular K"))?;
    let k2_inv = c2.k.try_inverse().ok_or(GeometryError::InvalidCamera("singular K"))?;
    FundamentalMatrix::from_matrix(k2_inv.transpose() * skew(&t_rel) * r_rel * k1_inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::random_camera_pair;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noiseless_pairs(rng: &mut ChaCha8Rng, c1: &CameraModel, c2: &CameraModel, n: usize) -> Vec<PointPair> {
        let mut out = Vec::new();
        while out.len() < n {
            let x = Point3::new(
                rng.random_range(-4.0..4.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(6.0..14.0),
            );
            if let (Some(a), Some(b)) = (c1.project(&x), c2.project(&x)) {
                out.push(PointPair::new([a.x, a.y], [b.x, b.y]));
            }
        }
        out
    }

    fn is_canonical(f: &FundamentalMatrix) -> bool {
        let m = f.matrix();
        (m.norm() - 1.0).abs() < 1e-12 && m.determinant().abs() < 1e-10
    }

    #[test]
    fn sampson_zero_on_true_projections() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let (c1, c2) = random_camera_pair(&mut rng);
        let f = fundamental_from_cameras(&c1, &c2).unwrap();
        for p in noiseless_pairs(&mut rng, &c1, &c2, 200) {
            assert!(f.sampson_distance(&p) < 1e-9);
        }
    }

    #[test]
    fn sampson_transpose_symmetry_and_scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let m = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let f = FundamentalMatrix::from_matrix(m).unwrap();
            let p = PointPair::new(
                [rng.random_range(0.0..1000.0), rng.random_range(0.0..800.0)],
                [rng.random_range(0.0..1000.0), rng.random_range(0.0..800.0)],
            );
            let d = f.sampson_distance(&p);
            let dt = sampson_distance(&f.matrix().transpose(), &p.swapped());
            assert!((d - dt).abs() <= 1e-9 * (1.0 + d));
            let lambda = rng.random_range(-50.0..50.0);
            let ds = sampson_distance(&(f.matrix() * lambda), &p);
            assert!((d - ds).abs() <= 1e-9 * (1.0 + d));
        }
    }

    #[test]
    fn sampson_degenerate_denominator_is_infinite() {
        let f = Matrix3::new(0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!(sampson_distance(&f, &PointPair::new([1.0, 2.0], [3.0, 4.0])).is_infinite());
    }

    #[test]
    fn constructed_matrices_are_canonical() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let m = Matrix3::from_fn(|_, _| rng.random_range(-1e3..1e3));
            let f = FundamentalMatrix::from_matrix(m).unwrap();
            assert!(is_canonical(&f));
            let big = f.matrix().iter().fold(0.0f64, |a, v| if v.abs() > a.abs() { *v } else { a });
            assert!(big > 0.0);
            assert!(FundamentalMatrix::from_matrix(*f.matrix() * -3.0).unwrap().frobenius_distance(&f) < 1e-12);
        }
        assert!(FundamentalMatrix::from_matrix(Matrix3::zeros()).is_err());
    }

    #[test]
    fn eight_point_exact_on_noiseless_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for _ in 0..20 {
            let (c1, c2) = random_camera_pair(&mut rng);
            let gt = fundamental_from_cameras(&c1, &c2).unwrap();
            let pairs = noiseless_pairs(&mut rng, &c1, &c2, 20);
            let f = eight_point(&pairs).unwrap();
            assert!(is_canonical(&f));
            assert!(f.frobenius_distance(&gt) < 1e-6, "{}", f.frobenius_distance(&gt));
            for p in &pairs {
                assert!(f.sampson_distance(p) < 1e-6);
            }
        }
    }

    #[test]
    fn eight_point_scaled_coordinates() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let (c1, c2) = random_camera_pair(&mut rng);
        let pairs = noiseless_pairs(&mut rng, &c1, &c2, 20);
        let f = eight_point(&pairs).unwrap();
        let scaled: Vec<_> = pairs
            .iter()
            .map(|p| PointPair::new([p.x1.x * 1000.0, p.x1.y * 1000.0], [p.x2.x * 1000.0, p.x2.y * 1000.0]))
            .collect();
        let fs = eight_point(&scaled).unwrap();
        // undo the pixel scaling: F' = S^-T F S^-1 with S = diag(1000, 1000, 1)
        let s_inv = Matrix3::new(1e-3, 0.0, 0.0, 0.0, 1e-3, 0.0, 0.0, 0.0, 1.0);
        let back = FundamentalMatrix::from_matrix(s_inv.transpose().try_inverse().unwrap() * fs.matrix() * s_inv.try_inverse().unwrap()).unwrap();
        assert!(back.frobenius_distance(&f) < 1e-6);
        for p in &scaled {
            assert!(fs.sampson_distance(p) < 1e-3);
        }
    }

    #[test]
    fn eight_point_collinear_is_degenerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let pairs: Vec<_> = (0..12)
            .map(|i| {
                let t = i as f64 * 13.0;
                PointPair::new([10.0 + t, 20.0 + 0.5 * t], [rng.random_range(0.0..500.0), rng.random_range(0.0..500.0)])
            })
            .collect();
        assert_eq!(eight_point(&pairs), Err(GeometryError::DegenerateConfiguration));
        assert!(matches!(eight_point(&pairs[..5]), Err(GeometryError::NotEnoughPoints { .. })));
    }

    #[test]
    fn seven_point_interpolates_and_contains_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let (c1, c2) = random_camera_pair(&mut rng);
            let gt = fundamental_from_cameras(&c1, &c2).unwrap();
            let pairs = noiseless_pairs(&mut rng, &c1, &c2, 7);
            let sols = seven_point(&pairs).unwrap();
            assert!((1..=3).contains(&sols.len()));
            assert!(sols.iter().any(|f| f.frobenius_distance(&gt) < 1e-6));
            for f in &sols {
                assert!(f.matrix().determinant().abs() < 1e-10);
                for p in &pairs {
                    assert!(f.sampson_distance(p) < 1e-6, "{}", f.sampson_distance(p));
                }
            }
        }
    }

    #[test]
    fn seven_point_root_count_on_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..1000 {
            let pairs: Vec<_> = (0..7)
                .map(|_| {
                    PointPair::new(
                        [rng.random_range(0.0..640.0), rng.random_range(0.0..480.0)],
                        [rng.random_range(0.0..640.0), rng.random_range(0.0..480.0)],
                    )
                })
                .collect();
            let sols = seven_point(&pairs).unwrap();
            assert!((1..=3).contains(&sols.len()));
            for f in &sols {
                assert!(f.matrix().determinant().abs() < 1e-10);
            }
        }
    }

    #[test]
    fn cubic_roots() {
        // (x-1)(x-2)(x-3)
        let mut r = solve_cubic(1.0, -6.0, 11.0, -6.0);
        r.sort_by(f64::total_cmp);
        for (a, b) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-9);
        }
        // x^3 + x + 1 has one real root near -0.6823
        let r = solve_cubic(1.0, 0.0, 1.0, 1.0);
        assert_eq!(r.len(), 1);
        assert!((r[0] + 0.682_327_803_828_019_3).abs() < 1e-12);
        // quadratic fallback
        let mut r = solve_cubic(0.0, 1.0, -3.0, 2.0);
        r.sort_by(f64::total_cmp);
        assert!((r[0] - 1.0).abs() < 1e-12 && (r[1] - 2.0).abs() < 1e-12);
    }

    fn frame(x: f64, y: f64, s: f64, o: f64) -> LocalFrame {
        LocalFrame { x, y, scale: s, orientation: o }
    }

    #[test]
    fn expansion_identity() {
        let f = frame(100.0, 50.0, 3.0, 0.7);
        for p in expand_match_similarity(&f, &f, 5.0).unwrap() {
            assert!((p.x1 - p.x2).norm() < 1e-12);
        }
    }

    #[test]
    fn expansion_rotated_and_scaled() {
        let a = frame(0.0, 0.0, 1.0, 0.0);
        let b = frame(10.0, 10.0, 2.0, PI / 2.0);
        let e = expand_match_similarity(&a, &b, 5.0).unwrap();
        // (5,0) in image 1 becomes (0,10) relative to b
        assert!((e[1].x1 - Point2::new(5.0, 0.0)).norm() < 1e-12);
        assert!((e[1].x2 - Point2::new(10.0, 20.0)).norm() < 1e-12);
        assert!((e[2].x1 - Point2::new(0.0, 5.0)).norm() < 1e-12);
        assert!((e[2].x2 - Point2::new(0.0, 10.0)).norm() < 1e-12);
    }

    #[test]
    fn expansion_matches_explicit_similarity() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..100 {
            let a = frame(rng.random_range(0.0..500.0), rng.random_range(0.0..500.0), rng.random_range(0.5..10.0), rng.random_range(-PI..PI));
            let b = frame(rng.random_range(0.0..500.0), rng.random_range(0.0..500.0), rng.random_range(0.5..10.0), rng.random_range(-PI..PI));
            let e = expand_match_similarity(&a, &b, 5.0).unwrap();
            let dth = b.orientation - a.orientation;
            let k = b.scale / a.scale;
            let sim = nalgebra::Matrix2::new(k * dth.cos(), -k * dth.sin(), k * dth.sin(), k * dth.cos());
            for p in &e {
                let rel = nalgebra::Vector2::new(p.x1.x - a.x, p.x1.y - a.y);
                let want = sim * rel + nalgebra::Vector2::new(b.x, b.y);
                assert!((p.x2.coords - want).norm() < 1e-9);
            }
            // translation equivariance
            let (dx, dy) = (rng.random_range(-100.0..100.0), rng.random_range(-100.0..100.0));
            let at = frame(a.x + dx, a.y + dy, a.scale, a.orientation);
            let bt = frame(b.x + dx, b.y + dy, b.scale, b.orientation);
            let et = expand_match_similarity(&at, &bt, 5.0).unwrap();
            for (p, q) in e.iter().zip(&et) {
                assert!((q.x1.x - p.x1.x - dx).abs() < 1e-9 && (q.x2.y - p.x2.y - dy).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn expansion_rejects_bad_scale() {
        let good = frame(0.0, 0.0, 1.0, 0.0);
        let bad = frame(0.0, 0.0, 0.0, 0.0);
        assert!(matches!(expand_match_similarity(&good, &bad, 5.0), Err(GeometryError::InvalidFeature(_))));
    }

    #[test]
    fn cameras_pure_translation() {
        let k = Matrix3::identity();
        let c1 = CameraModel::new(k, Matrix3::identity(), Vector3::zeros()).unwrap();
        let c2 = CameraModel::new(k, Matrix3::identity(), Vector3::new(-1.0, 0.0, 0.0)).unwrap();
        let f = fundamental_from_cameras(&c1, &c2).unwrap();
        // [e]x with e = (1, 0, 0): only the (1,2) and (2,1) entries are non-zero
        let m = f.matrix();
        let want = FundamentalMatrix::from_matrix(skew(&Vector3::new(1.0, 0.0, 0.0))).unwrap();
        assert!(f.frobenius_distance(&want) < 1e-12);
        assert!(m[(0, 0)].abs() < 1e-15 && m[(1, 2)].abs() > 0.5);
    }

    #[test]
    fn cameras_identical_centres() {
        let k = Matrix3::new(500.0, 0.0, 320.0, 0.0, 500.0, 240.0, 0.0, 0.0, 1.0);
        let c1 = CameraModel::new(k, Matrix3::identity(), Vector3::zeros()).unwrap();
        let r = *nalgebra::Rotation3::from_euler_angles(0.1, 0.2, 0.3).matrix();
        let c2 = CameraModel::new(k, r, Vector3::zeros()).unwrap();
        assert_eq!(fundamental_from_cameras(&c1, &c2), Err(GeometryError::NoEpipolarGeometry));
    }

    #[test]
    fn camera_validation() {
        let k = Matrix3::identity();
        let bad_r = Matrix3::identity() * 2.0;
        assert!(CameraModel::new(k, bad_r, Vector3::zeros()).is_err());
        let bad_k = Matrix3::new(1.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0);
        assert!(CameraModel::new(bad_k, Matrix3::identity(), Vector3::zeros()).is_err());
    }
}
