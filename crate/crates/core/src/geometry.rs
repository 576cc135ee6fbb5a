//! Poincare ball model, upper half-space model and their isometries.
//!
//! Isometries are stored as finite lists of reflections in planes through the origin
//! and in spheres orthogonal to the unit sphere. Factors are applied in list order.

use crate::error::{Error, Result};
use crate::scalar::{dist_sq, dot, norm_sq, Real};
use crate::tolerances::{BALL_ESCAPE, BOUNDARY_MARGIN, GEOMETRY_REL, ORTHOGONALITY};
use serde::{Deserialize, Serialize};

/// A point of the open unit ball `B^N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscPoint<T> {
    coords: Vec<T>,
}

impl<T: Real> DiscPoint<T> {
    pub fn new(coords: Vec<T>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::DimensionMismatch { expected: 1, got: 0 });
        }
        let n2 = norm_sq(&coords);
        if !n2.is_finite() || n2 >= T::one() {
            return Err(Error::OutsideBall { norm: n2.sqrt().f64() });
        }
        Ok(DiscPoint { coords })
    }

    /// Like [`DiscPoint::new`] but also refuses points within the boundary margin.
    pub fn with_margin(coords: Vec<T>) -> Result<Self> {
        let p = Self::new(coords)?;
        p.check_margin()?;
        Ok(p)
    }

    pub fn origin(dim: usize) -> Self {
        DiscPoint { coords: vec![T::zero(); dim] }
    }

    /// Point at geodesic distance `t` from the origin in direction `dir` (unit).
    pub fn from_geodesic(dir: &[T], t: T) -> Result<Self> {
        let r = (t / T::c(2.0)).tanh();
        Self::new(dir.iter().map(|d| *d * r).collect())
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<T> {
        self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn norm_sq(&self) -> T {
        norm_sq(&self.coords)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    /// Geodesic distance to the origin, `2 artanh |x|`.
    pub fn geodesic_radius(&self) -> T {
        T::c(2.0) * self.norm().atanh()
    }

    pub fn check_margin(&self) -> Result<()> {
        let n = self.norm();
        if n > T::one() - T::c(BOUNDARY_MARGIN) {
            return Err(Error::NearBoundary { norm: n.f64() });
        }
        Ok(())
    }
}

/// Conformal factor `2 / (1 - |x|^2)` of the ball metric.
pub fn metric_factor<T: Real>(x: &DiscPoint<T>) -> T {
    T::c(2.0) / (T::one() - x.norm_sq())
}

/// Density of the hyperbolic volume with respect to Lebesgue measure.
pub fn volume_density<T: Real>(x: &DiscPoint<T>) -> T {
    metric_factor(x).powi(x.dim() as i32)
}

/// Hyperbolic distance between two points of the ball.
///
/// Evaluated as `2 asinh(|x-y| / sqrt((1-|x|^2)(1-|y|^2)))`, which equals the
/// arccosh expression and keeps full precision for nearby points.
pub fn distance<T: Real>(x: &DiscPoint<T>, y: &DiscPoint<T>) -> Result<T> {
    same_dim(x.dim(), y.dim())?;
    let d2 = dist_sq(x.coords(), y.coords());
    let denom = (T::one() - x.norm_sq()) * (T::one() - y.norm_sq());
    Ok(T::c(2.0) * (d2 / denom).sqrt().asinh())
}

fn same_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// A point `(z, h)` of the upper half-space with `z in R^{N-1}` and height `h > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpacePoint<T> {
    pub z: Vec<T>,
    pub height: T,
}

impl<T: Real> HalfSpacePoint<T> {
    pub fn new(z: Vec<T>, height: T) -> Result<Self> {
        if !(height > T::zero()) || !height.is_finite() {
            return Err(Error::NonPositiveHeight { height: height.f64() });
        }
        Ok(HalfSpacePoint { z, height })
    }

    pub fn dim(&self) -> usize {
        self.z.len() + 1
    }

    /// Coordinates with the height first, the convention used by [`cayley`].
    fn stacked(&self) -> Vec<T> {
        let mut v = Vec::with_capacity(self.dim());
        v.push(self.height);
        v.extend_from_slice(&self.z);
        v
    }
}

/// The involution `M` exchanging the ball and the half-space, on raw coordinates.
///
/// `(x_1, x') -> ((1 - |x|^2), 2 x') / ((1 + x_1)^2 + |x'|^2)`, which is the inversion in
/// the sphere of radius `sqrt 2` about `(-1, 0, ..., 0)`. The half-space height is the
/// first coordinate.
pub fn cayley<T: Real>(x: &[T]) -> Result<Vec<T>> {
    let tail = norm_sq(&x[1..]);
    let denom = (T::one() + x[0]).powi(2) + tail;
    if denom == T::zero() {
        return Err(Error::InversionPole);
    }
    let mut out = Vec::with_capacity(x.len());
    out.push((T::one() - x[0] * x[0] - tail) / denom);
    out.extend(x[1..].iter().map(|v| T::c(2.0) * *v / denom));
    Ok(out)
}

pub fn ball_to_halfspace<T: Real>(x: &DiscPoint<T>) -> Result<HalfSpacePoint<T>> {
    let y = cayley(x.coords())?;
    HalfSpacePoint::new(y[1..].to_vec(), y[0])
}

pub fn halfspace_to_ball<T: Real>(h: &HalfSpacePoint<T>) -> Result<DiscPoint<T>> {
    let y = cayley(&h.stacked())?;
    let n2 = norm_sq(&y);
    if n2 >= T::one() {
        // Only reachable through rounding for points far from (0, 1).
        let s = (T::one() - T::epsilon()) / n2.sqrt();
        return DiscPoint::new(y.into_iter().map(|v| v * s).collect());
    }
    DiscPoint::new(y)
}

/// Hyperbolic distance in the half-space model.
pub fn halfspace_distance<T: Real>(a: &HalfSpacePoint<T>, b: &HalfSpacePoint<T>) -> Result<T> {
    same_dim(a.dim(), b.dim())?;
    let d2 = dist_sq(&a.z, &b.z) + (a.height - b.height).powi(2);
    let s = (d2 / (T::c(4.0) * a.height * b.height)).sqrt();
    Ok(T::c(2.0) * s.asinh())
}

/// A reflection in a plane `{x . a = t}` or a sphere `S(b, r)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reflection<T> {
    Plane { normal: Vec<T>, offset: T },
    Sphere { center: Vec<T>, radius: T },
}

/// `x + 2 (t - x.a) a` for a unit normal `a`.
pub fn reflect_plane<T: Real>(a: &[T], t: T, x: &[T]) -> Result<Vec<T>> {
    same_dim(a.len(), x.len())?;
    let n = norm_sq(a).sqrt();
    if (n - T::one()).abs() > T::c(GEOMETRY_REL) {
        return Err(Error::NonUnitNormal { norm: n.f64() });
    }
    let s = T::c(2.0) * (t - dot(x, a));
    Ok(x.iter().zip(a).map(|(xi, ai)| *xi + s * *ai).collect())
}

/// `b + (r / |x - b|)^2 (x - b)`.
pub fn reflect_sphere<T: Real>(b: &[T], r: T, x: &[T]) -> Result<Vec<T>> {
    same_dim(b.len(), x.len())?;
    let d2 = dist_sq(x, b);
    if d2 == T::zero() {
        return Err(Error::InversionPole);
    }
    let q = r * r / d2;
    Ok(x.iter().zip(b).map(|(xi, bi)| *bi + q * (*xi - *bi)).collect())
}

impl<T: Real> Reflection<T> {
    pub fn dim(&self) -> usize {
        match self {
            Reflection::Plane { normal, .. } => normal.len(),
            Reflection::Sphere { center, .. } => center.len(),
        }
    }

    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        match self {
            Reflection::Plane { normal, offset } => reflect_plane(normal, *offset, x),
            Reflection::Sphere { center, radius } => reflect_sphere(center, *radius, x),
        }
    }

    /// Reflection for mirrors orthogonal to the unit sphere.
    ///
    /// For a sphere with `r^2 = |b|^2 - 1` the image is rewritten as
    /// `((|b|^2 - 1) x + (|x|^2 - 2 x.b + 1) b) / |x - b|^2`, avoiding the cancellation of
    /// the textbook formula when `b` is far from the origin.
    fn apply_orthogonal(&self, x: &[T]) -> Result<Vec<T>> {
        match self {
            Reflection::Plane { .. } => self.apply(x),
            Reflection::Sphere { center, .. } => {
                same_dim(center.len(), x.len())?;
                let d2 = dist_sq(x, center);
                if d2 == T::zero() {
                    return Err(Error::InversionPole);
                }
                let b2 = norm_sq(center);
                let cx = (b2 - T::one()) / d2;
                let cb = (norm_sq(x) - T::c(2.0) * dot(x, center) + T::one()) / d2;
                Ok(x.iter().zip(center).map(|(xi, bi)| cx * *xi + cb * *bi).collect())
            }
        }
    }

    fn check_ball_mirror(&self) -> Result<()> {
        match self {
            Reflection::Plane { normal, offset } => {
                let n = norm_sq(normal).sqrt();
                if (n - T::one()).abs() > T::c(GEOMETRY_REL) {
                    return Err(Error::NonUnitNormal { norm: n.f64() });
                }
                if offset.abs() > T::c(GEOMETRY_REL) {
                    return Err(Error::NotBallIsometry(format!(
                        "plane offset {} does not vanish",
                        offset
                    )));
                }
            }
            Reflection::Sphere { center, radius } => {
                let b2 = norm_sq(center);
                let lhs = T::one() + *radius * *radius;
                if (b2 - lhs).abs() > T::c(GEOMETRY_REL) * b2.max(T::one()) {
                    return Err(Error::NotBallIsometry(format!(
                        "sphere with |b|^2 = {} and 1 + r^2 = {} is not orthogonal to the unit sphere",
                        b2, lhs
                    )));
                }
            }
        }
        Ok(())
    }
}

/// An isometry of `B^N` as an ordered product of reflections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Isometry<T> {
    dim: usize,
    factors: Vec<Reflection<T>>,
}

impl<T: Real> Isometry<T> {
    /// Validates that every factor preserves the ball.
    pub fn new(dim: usize, factors: Vec<Reflection<T>>) -> Result<Self> {
        for f in &factors {
            same_dim(dim, f.dim())?;
            f.check_ball_mirror()?;
        }
        Ok(Isometry { dim, factors })
    }

    pub fn identity(dim: usize) -> Self {
        Isometry { dim, factors: Vec::new() }
    }

    /// Hyperbolic translation taking the origin to `b`.
    ///
    /// Reflection in the hyperplane orthogonal to `b` followed by the inversion in the
    /// sphere centred at `b / |b|^2`.
    pub fn translation(b: &DiscPoint<T>) -> Self {
        let dim = b.dim();
        let nb2 = b.norm_sq();
        if nb2 == T::zero() {
            return Self::identity(dim);
        }
        let nb = nb2.sqrt();
        let normal = b.coords().iter().map(|v| *v / nb).collect();
        let center = b.coords().iter().map(|v| *v / nb2).collect();
        let radius = ((T::one() - nb2).max(T::zero())).sqrt() / nb;
        Isometry {
            dim,
            factors: vec![
                Reflection::Plane { normal, offset: T::zero() },
                Reflection::Sphere { center, radius },
            ],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn factors(&self) -> &[Reflection<T>] {
        &self.factors
    }

    /// `self` followed by `other`.
    pub fn then(&self, other: &Isometry<T>) -> Result<Self> {
        same_dim(self.dim, other.dim)?;
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        Ok(Isometry { dim: self.dim, factors })
    }

    /// Reflections are involutions, so the inverse reverses the list.
    pub fn inverse(&self) -> Self {
        Isometry { dim: self.dim, factors: self.factors.iter().rev().cloned().collect() }
    }

    /// Applies the isometry to raw coordinates without the ball check.
    pub fn apply_raw(&self, x: &[T]) -> Result<Vec<T>> {
        same_dim(self.dim, x.len())?;
        let mut y = x.to_vec();
        for f in &self.factors {
            y = f.apply_orthogonal(&y)?;
        }
        Ok(y)
    }

    pub fn apply(&self, x: &DiscPoint<T>) -> Result<DiscPoint<T>> {
        let y = self.apply_raw(x.coords())?;
        let n = norm_sq(&y).sqrt();
        if n >= T::one() {
            if n - T::one() > T::c(BALL_ESCAPE) {
                return Err(Error::NotBallIsometry(format!("image escaped the ball (|y| = {})", n)));
            }
            let s = (T::one() - T::epsilon()) / n;
            return DiscPoint::new(y.into_iter().map(|v| v * s).collect());
        }
        DiscPoint::new(y)
    }
}

/// A generalised sphere in `R^N`: a Euclidean sphere or an affine hyperplane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SphereOrPlane<T> {
    Sphere { center: Vec<T>, radius: T },
    Plane { normal: Vec<T>, offset: T },
}

fn near_zero<T: Real>(value: T, scale: T) -> bool {
    value.abs() <= T::c(ORTHOGONALITY) * scale.max(T::one())
}

/// Orthogonality of two generalised spheres.
///
/// Two planes meet orthogonally when their normals do, a sphere meets a plane
/// orthogonally when its centre lies on the plane, and two spheres `S(a, r)`, `S(b, s)`
/// when `|a - b|^2 = r^2 + s^2`.
pub fn orthogonal<T: Real>(s1: &SphereOrPlane<T>, s2: &SphereOrPlane<T>) -> bool {
    use SphereOrPlane::*;
    match (s1, s2) {
        (Plane { normal: a, .. }, Plane { normal: b, .. }) => {
            near_zero(dot(a, b), norm_sq(a).sqrt() * norm_sq(b).sqrt())
        }
        (Sphere { center, .. }, Plane { normal, offset })
        | (Plane { normal, offset }, Sphere { center, .. }) => {
            let lhs = dot(center, normal);
            near_zero(lhs - *offset, lhs.abs().max(offset.abs()))
        }
        (Sphere { center: a, radius: r }, Sphere { center: b, radius: s }) => {
            let lhs = dist_sq(a, b);
            let rhs = *r * *r + *s * *s;
            near_zero(lhs - rhs, lhs.max(rhs))
        }
    }
}

/// The cap `B(a, r) intersected with B^N`, bounded by a sphere with `|a|^2 = 1 + r^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cap<T> {
    center: Vec<T>,
    radius: T,
}

impl<T: Real> Cap<T> {
    pub fn new(center: Vec<T>, radius: T) -> Result<Self> {
        let b2 = norm_sq(&center);
        let rhs = T::one() + radius * radius;
        if !(radius > T::zero()) || (b2 - rhs).abs() > T::c(GEOMETRY_REL) * rhs {
            return Err(Error::NotBallIsometry(format!(
                "cap sphere with |a|^2 = {} and 1 + r^2 = {} is not orthogonal to the unit sphere",
                b2, rhs
            )));
        }
        Ok(Cap { center, radius })
    }

    /// Cap whose sphere has radius `r` and centre along the unit vector `dir`.
    pub fn from_direction(dir: &[T], radius: T) -> Result<Self> {
        let n = norm_sq(dir).sqrt();
        let a = (T::one() + radius * radius).sqrt() / n;
        Self::new(dir.iter().map(|d| *d * a).collect(), radius)
    }

    pub fn center(&self) -> &[T] {
        &self.center
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn contains(&self, x: &[T]) -> bool {
        norm_sq(x) < T::one() && dist_sq(x, &self.center) < self.radius * self.radius
    }

    /// Signed distance-like quantity `|x - a|^2 - r^2`, zero on the bounding sphere.
    pub fn boundary_defect(&self, x: &[T]) -> T {
        dist_sq(x, &self.center) - self.radius * self.radius
    }

    fn unit_axis(&self) -> Vec<T> {
        let n = norm_sq(&self.center).sqrt();
        self.center.iter().map(|v| *v / n).collect()
    }
}

/// Image of a generalised sphere under the inversion in `S(c0, sqrt(k2))`.
fn invert_generalised<T: Real>(s: &SphereOrPlane<T>, c0: &[T], k2: T) -> SphereOrPlane<T> {
    match s {
        SphereOrPlane::Sphere { center, radius } => {
            let d2 = dist_sq(center, c0);
            let delta = d2 - *radius * *radius;
            if near_zero(delta, d2) {
                let rho = *radius;
                let normal: Vec<T> = center.iter().zip(c0).map(|(c, z)| (*c - *z) / rho).collect();
                let offset = dot(c0, &normal) + k2 / (T::c(2.0) * rho);
                SphereOrPlane::Plane { normal, offset }
            } else {
                let center = center
                    .iter()
                    .zip(c0)
                    .map(|(c, z)| *z + k2 * (*c - *z) / delta)
                    .collect();
                SphereOrPlane::Sphere { center, radius: k2 * *radius / delta.abs() }
            }
        }
        SphereOrPlane::Plane { normal, offset } => {
            let gap = *offset - dot(normal, c0);
            if near_zero(gap, offset.abs()) {
                s.clone()
            } else {
                let center =
                    c0.iter().zip(normal).map(|(z, n)| *z + k2 * *n / (T::c(2.0) * gap)).collect();
                SphereOrPlane::Sphere { center, radius: k2 / (T::c(2.0) * gap.abs()) }
            }
        }
    }
}

fn householder<T: Real>(m: &[T], x: &[T]) -> Vec<T> {
    let s = T::c(2.0) * dot(x, m);
    x.iter().zip(m).map(|(xi, mi)| *xi - s * *mi).collect()
}

/// Conjugation data `Phi = M o R` sending the ball to the half-space.
struct HalfSpaceChart<T> {
    householder: Option<Vec<T>>,
    pole: Vec<T>,
}

impl<T: Real> HalfSpaceChart<T> {
    /// Chart in which the ideal point `q` is sent to infinity.
    fn sending_to_infinity(q: &[T]) -> Self {
        let dim = q.len();
        let mut pole = vec![T::zero(); dim];
        pole[0] = -T::one();
        let mut m: Vec<T> = q.to_vec();
        m[0] = m[0] + T::one();
        let n = norm_sq(&m).sqrt();
        let householder = if n < T::c(1e-12) { None } else { Some(m.iter().map(|v| *v / n).collect()) };
        HalfSpaceChart { householder, pole }
    }

    fn rotate(&self, s: &SphereOrPlane<T>) -> SphereOrPlane<T> {
        let Some(m) = &self.householder else { return s.clone() };
        match s {
            SphereOrPlane::Sphere { center, radius } => {
                SphereOrPlane::Sphere { center: householder(m, center), radius: *radius }
            }
            SphereOrPlane::Plane { normal, offset } => {
                SphereOrPlane::Plane { normal: householder(m, normal), offset: *offset }
            }
        }
    }

    /// Ball sphere to half-space sphere.
    fn forward(&self, s: &SphereOrPlane<T>) -> SphereOrPlane<T> {
        invert_generalised(&self.rotate(s), &self.pole, T::c(2.0))
    }

    /// Half-space mirror to the corresponding ball mirror, snapped to exact orthogonality.
    fn backward_mirror(&self, s: &SphereOrPlane<T>) -> Reflection<T> {
        match self.rotate(&invert_generalised(s, &self.pole, T::c(2.0))) {
            SphereOrPlane::Sphere { center, .. } => {
                let radius = (norm_sq(&center) - T::one()).max(T::zero()).sqrt();
                Reflection::Sphere { center, radius }
            }
            SphereOrPlane::Plane { normal, .. } => {
                let n = norm_sq(&normal).sqrt();
                Reflection::Plane { normal: normal.iter().map(|v| *v / n).collect(), offset: T::zero() }
            }
        }
    }
}

/// Orientation preserving isometry mapping the cap `a1` onto the cap `a2`.
///
/// Both caps are moved to half-balls of the half-space, matched there by a dilation about
/// a boundary point followed by a horizontal translation, and the four mirrors realising
/// that similarity are carried back to the ball.
pub fn cap_isometry<T: Real>(a1: &Cap<T>, a2: &Cap<T>) -> Result<Isometry<T>> {
    same_dim(a1.dim(), a2.dim())?;
    let dim = a1.dim();
    let (u1, u2) = (a1.unit_axis(), a2.unit_axis());
    let sum: Vec<T> = u1.iter().zip(&u2).map(|(a, b)| -(*a + *b)).collect();
    let ns = norm_sq(&sum).sqrt();
    let q: Vec<T> = if ns > T::c(1e-6) {
        sum.iter().map(|v| *v / ns).collect()
    } else {
        orthogonal_unit(&u1)
    };
    let chart = HalfSpaceChart::sending_to_infinity(&q);
    let half_ball = |cap: &Cap<T>| -> Result<(Vec<T>, T)> {
        match chart.forward(&SphereOrPlane::Sphere { center: cap.center.clone(), radius: cap.radius }) {
            SphereOrPlane::Sphere { mut center, radius } => {
                center[0] = T::zero();
                Ok((center, radius))
            }
            SphereOrPlane::Plane { .. } => {
                Err(Error::Numerical("cap boundary passes through the chart pole".into()))
            }
        }
    };
    let (c1, r1) = half_ball(a1)?;
    let (c2, r2) = half_ball(a2)?;
    let k = r2 / r1;

    let mut mirrors = vec![
        SphereOrPlane::Sphere { center: c1.clone(), radius: T::one() },
        SphereOrPlane::Sphere { center: c1.clone(), radius: k.sqrt() },
    ];
    let shift: Vec<T> = c2.iter().zip(&c1).map(|(a, b)| *a - *b).collect();
    let len = norm_sq(&shift).sqrt();
    if len > T::zero() {
        let normal: Vec<T> = shift.iter().map(|v| *v / len).collect();
        mirrors.push(SphereOrPlane::Plane { normal: normal.clone(), offset: T::zero() });
        mirrors.push(SphereOrPlane::Plane { normal, offset: len / T::c(2.0) });
    }
    let factors = mirrors.iter().map(|m| chart.backward_mirror(m)).collect();
    Isometry::new(dim, factors)
}

fn orthogonal_unit<T: Real>(u: &[T]) -> Vec<T> {
    let i = (0..u.len())
        .min_by(|&a, &b| u[a].abs().partial_cmp(&u[b].abs()).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or(0);
    let mut e = vec![T::zero(); u.len()];
    e[i] = T::one();
    let s = dot(&e, u);
    let v: Vec<T> = e.iter().zip(u).map(|(a, b)| *a - s * *b).collect();
    let n = norm_sq(&v).sqrt();
    v.iter().map(|x| *x / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arccosh_distance(x: &[f64], y: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        let nx: f64 = x.iter().map(|a| a * a).sum();
        let ny: f64 = y.iter().map(|a| a * a).sum();
        (1.0 + 2.0 * d2 / ((1.0 - nx) * (1.0 - ny))).acosh()
    }

    fn mobius_translate(b: &[f64], x: &[f64]) -> Vec<f64> {
        let b2: f64 = b.iter().map(|v| v * v).sum();
        let x2: f64 = x.iter().map(|v| v * v).sum();
        let xb: f64 = x.iter().zip(b).map(|(a, c)| a * c).sum();
        let den = b2 * x2 + 2.0 * xb + 1.0;
        x.iter().zip(b).map(|(xi, bi)| ((1.0 - b2) * xi + (x2 + 2.0 * xb + 1.0) * bi) / den).collect()
    }

    fn ball_point(dim: usize, max_norm: f64) -> impl Strategy<Value = Vec<f64>> {
        (prop::collection::vec(-1.0f64..1.0, dim), 0.0f64..max_norm).prop_map(|(v, r)| {
            let n = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
            v.iter().map(|a| a / n * r).collect()
        })
    }

    #[test]
    fn distance_matches_closed_forms() {
        let x = DiscPoint::new(vec![0.3, -0.2, 0.1]).unwrap();
        let y = DiscPoint::new(vec![-0.5, 0.4, 0.2]).unwrap();
        let d = distance(&x, &y).unwrap();
        assert!((d - arccosh_distance(x.coords(), y.coords())).abs() < 1e-13);
        let o = DiscPoint::origin(3);
        let d0 = distance(&o, &x).unwrap();
        assert!((d0 - x.geodesic_radius()).abs() < 1e-14);
    }

    #[test]
    fn half_space_chart_is_an_involution() {
        let x = vec![0.2f64, -0.4, 0.5];
        let y = cayley(&cayley(&x).unwrap()).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-15);
        }
        let o = DiscPoint::<f64>::origin(3);
        let h = ball_to_halfspace(&o).unwrap();
        assert!((h.height - 1.0).abs() < 1e-15 && h.z.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn translation_of_origin_and_identity() {
        let b = DiscPoint::new(vec![0.0f64, 0.7, -0.1]).unwrap();
        let t = Isometry::translation(&b);
        let img = t.apply(&DiscPoint::origin(3)).unwrap();
        for (u, v) in img.coords().iter().zip(b.coords()) {
            assert!((u - v).abs() < 1e-15);
        }
        let id = Isometry::translation(&DiscPoint::<f64>::origin(3));
        assert!(id.factors().is_empty());
    }

    #[test]
    fn rejects_invalid_inputs() {
        assert!(DiscPoint::new(vec![1.0, 0.0]).is_err());
        assert!(DiscPoint::with_margin(vec![1.0 - 1e-9, 0.0]).is_err());
        assert!(reflect_plane(&[1.0, 1.0], 0.0, &[0.1, 0.2]).is_err());
        assert!(reflect_sphere(&[0.5, 0.5], 1.0, &[0.5, 0.5]).is_err());
        let bad = Reflection::Sphere { center: vec![2.0, 0.0], radius: 1.0 };
        assert!(Isometry::new(2, vec![bad]).is_err());
        let off = Reflection::Plane { normal: vec![1.0, 0.0], offset: 0.2 };
        assert!(Isometry::new(2, vec![off]).is_err());
        assert!(HalfSpacePoint::new(vec![0.0], 0.0).is_err());
    }

    #[test]
    fn orthogonality_cases() {
        let p1 = SphereOrPlane::Plane { normal: vec![1.0, 0.0, 0.0], offset: 0.3 };
        let p2 = SphereOrPlane::Plane { normal: vec![0.0, 1.0, 0.0], offset: -2.0 };
        let p3 = SphereOrPlane::Plane { normal: vec![0.6, 0.8, 0.0], offset: 0.0 };
        assert!(orthogonal(&p1, &p2));
        assert!(!orthogonal(&p1, &p3));
        let s = SphereOrPlane::Sphere { center: vec![0.3, 5.0, 1.0], radius: 2.0 };
        assert!(orthogonal(&s, &p1));
        assert!(!orthogonal(&s, &p2));
        let a = SphereOrPlane::Sphere { center: vec![0.0, 0.0, 0.0], radius: 3.0 };
        let b = SphereOrPlane::Sphere { center: vec![5.0, 0.0, 0.0], radius: 4.0 };
        let c = SphereOrPlane::Sphere { center: vec![5.0, 0.0, 0.0], radius: 4.1 };
        assert!(orthogonal(&a, &b));
        assert!(!orthogonal(&a, &c));
    }

    #[test]
    fn reflections_are_involutions() {
        let r = Reflection::Sphere { center: vec![1.5, 0.5], radius: (1.5f64 * 1.5 + 0.25 - 1.0).sqrt() };
        let x = vec![0.2, -0.3];
        let y = r.apply(&r.apply(&x).unwrap()).unwrap();
        assert!((x[0] - y[0]).abs() < 1e-14 && (x[1] - y[1]).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn distance_is_a_metric(x in ball_point(3, 0.95), y in ball_point(3, 0.95), z in ball_point(3, 0.95)) {
            let (x, y, z) = (DiscPoint::new(x).unwrap(), DiscPoint::new(y).unwrap(), DiscPoint::new(z).unwrap());
            let dxy = distance(&x, &y).unwrap();
            prop_assert!((dxy - distance(&y, &x).unwrap()).abs() <= 1e-12 * dxy.max(1.0));
            prop_assert!(dxy <= distance(&x, &z).unwrap() + distance(&z, &y).unwrap() + 1e-10);
            prop_assert!(distance(&x, &x).unwrap() == 0.0);
        }

        #[test]
        fn origin_distance_agrees_with_arccosh(x in ball_point(4, 0.999)) {
            let p = DiscPoint::new(x.clone()).unwrap();
            let d = distance(&DiscPoint::origin(4), &p).unwrap();
            let reference = 2.0 * p.norm().atanh();
            prop_assert!((d - reference).abs() <= 1e-12 * reference.max(1.0));
            let ac = arccosh_distance(&vec![0.0; 4], &x);
            prop_assert!((ac - reference).abs() <= 1e-6 * reference.max(1.0));
        }

        #[test]
        fn translations_are_isometries(b in ball_point(3, 0.95), x in ball_point(3, 0.95), y in ball_point(3, 0.95)) {
            let bp = DiscPoint::new(b.clone()).unwrap();
            let t = Isometry::translation(&bp);
            let img0 = t.apply(&DiscPoint::origin(3)).unwrap();
            for (u, v) in img0.coords().iter().zip(&b) {
                prop_assert!((u - v).abs() < 1e-13);
            }
            let (xp, yp) = (DiscPoint::new(x.clone()).unwrap(), DiscPoint::new(y).unwrap());
            let (tx, ty) = (t.apply(&xp).unwrap(), t.apply(&yp).unwrap());
            let d0 = distance(&xp, &yp).unwrap();
            let d1 = distance(&tx, &ty).unwrap();
            prop_assert!((d0 - d1).abs() <= 1e-10 * d0.max(1.0));
            let closed = mobius_translate(&b, &x);
            for (u, v) in tx.coords().iter().zip(&closed) {
                prop_assert!((u - v).abs() < 1e-12);
            }
            let back = t.inverse().apply(&tx).unwrap();
            for (u, v) in back.coords().iter().zip(&x) {
                prop_assert!((u - v).abs() < 1e-11);
            }
        }

        #[test]
        fn half_space_round_trip_preserves_distance(x in ball_point(3, 0.99), y in ball_point(3, 0.99)) {
            let (xp, yp) = (DiscPoint::new(x.clone()).unwrap(), DiscPoint::new(y).unwrap());
            let (hx, hy) = (ball_to_halfspace(&xp).unwrap(), ball_to_halfspace(&yp).unwrap());
            let d0 = distance(&xp, &yp).unwrap();
            let d1 = halfspace_distance(&hx, &hy).unwrap();
            prop_assert!((d0 - d1).abs() <= 1e-9 * d0.max(1.0));
            let back = halfspace_to_ball(&hx).unwrap();
            for (u, v) in back.coords().iter().zip(&x) {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }

        #[test]
        fn cap_isometry_maps_caps(
            d1 in ball_point(3, 1.0), d2 in ball_point(3, 1.0),
            r1 in 0.2f64..3.0, r2 in 0.2f64..3.0,
            w in prop::collection::vec(0.0f64..1.0, 3),
        ) {
            let n1 = d1.iter().map(|v| v * v).sum::<f64>().sqrt();
            let n2 = d2.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assume!(n1 > 0.1 && n2 > 0.1);
            let a1 = Cap::from_direction(&d1, r1).unwrap();
            let a2 = Cap::from_direction(&d2, r2).unwrap();
            let t = cap_isometry(&a1, &a2).unwrap();
            // Point on the bounding sphere of a1 inside the ball, and a point inside a1.
            let axis: Vec<f64> = a1.center().iter().map(|v| v / a1.center().iter().map(|c| c * c).sum::<f64>().sqrt()).collect();
            let mut dir: Vec<f64> = w.iter().map(|v| v - 0.5).collect();
            let s: f64 = dir.iter().zip(&axis).map(|(a, b)| a * b).sum();
            for (d, a) in dir.iter_mut().zip(&axis) { *d -= s * a; }
            let dn = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assume!(dn > 1e-3);
            let na = (1.0 + r1 * r1).sqrt();
            // Deepest point of the cap lies at distance na - r1 from the origin.
            let depth = na - r1;
            let theta = (0.5 * (r1 / na + 1.0)).acos();
            let pt: Vec<f64> = a1.center().iter().zip(&axis).zip(&dir)
                .map(|((c, a), d)| c - r1 * theta.cos() * a + r1 * theta.sin() * d / dn)
                .collect();
            prop_assume!(pt.iter().map(|v| v * v).sum::<f64>() < 0.999);
            let img = t.apply_raw(&pt).unwrap();
            prop_assert!(a2.boundary_defect(&img).abs() < 1e-9 * (1.0 + r2 * r2));
            let inner: Vec<f64> = axis.iter().map(|a| a * (depth + 0.5 * (1.0 - depth))).collect();
            prop_assert!(a1.contains(&inner));
            let img_inner = t.apply(&DiscPoint::new(inner.clone()).unwrap()).unwrap();
            prop_assert!(a2.contains(img_inner.coords()));
        }
    }
}
