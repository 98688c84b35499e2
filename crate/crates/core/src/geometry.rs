//! Curve primitives: points, cubic Béziers, splines and their polyline
//! discretization, plus the intersection and containment predicates the
//! rest of the pipeline is built on.
//!
//! All coordinates live in a y-up image space. The right-hand normal of a
//! curve with tangent `(tx, ty)` is `(ty, -tx)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Geometric coincidence tolerance in image units.
pub const GEOM_TOL: f64 = 1e-9;

/// Depth limit of the interval search used to locate the farthest curve
/// point from a chord.
const FARTHEST_SEARCH_DEPTH: u32 = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum GeomError {
    #[error("tangent vanishes (cusp or degenerate curve)")]
    ZeroTangent,
    #[error("point lies on the loop boundary")]
    OnBoundary,
    #[error("spline has no non-degenerate segment")]
    DegenerateSpline,
    #[error("polyline needs at least two vertices with increasing parameters")]
    InvalidPolyline,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    #[inline]
    pub fn dot(self, o: Self) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    #[inline]
    pub fn cross(self, o: Self) -> f64 {
        self.x * o.y - self.y * o.x
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn dist(self, o: Self) -> f64 {
        (self - o).norm()
    }

    #[inline]
    pub fn lerp(self, o: Self, t: f64) -> Self {
        self + (o - self) * t
    }

    /// Rotation by `((0, 1), (-1, 0))`, i.e. a quarter turn clockwise.
    #[inline]
    pub fn rot_cw(self) -> Self {
        Self::new(self.y, -self.x)
    }

    #[inline]
    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Point2 {
    #[inline]
    fn add_assign(&mut self, o: Self) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Point2 {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Self;
    #[inline]
    fn mul(self, s: f64) -> Self {
        Self::new(self.x * s, self.y * s)
    }
}

impl Div<f64> for Point2 {
    type Output = Self;
    #[inline]
    fn div(self, s: f64) -> Self {
        Self::new(self.x / s, self.y / s)
    }
}

impl Neg for Point2 {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point2,
    pub max: Point2,
}

impl Aabb {
    pub fn empty() -> Self {
        Self { min: Point2::new(f64::INFINITY, f64::INFINITY), max: Point2::new(f64::NEG_INFINITY, f64::NEG_INFINITY) }
    }

    pub fn from_points<I: IntoIterator<Item = Point2>>(points: I) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.include(p);
        }
        b
    }

    pub fn include(&mut self, p: Point2) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
    }

    pub fn union(&self, o: &Aabb) -> Aabb {
        Aabb {
            min: Point2::new(self.min.x.min(o.min.x), self.min.y.min(o.min.y)),
            max: Point2::new(self.max.x.max(o.max.x), self.max.y.max(o.max.y)),
        }
    }

    pub fn expanded(&self, r: f64) -> Aabb {
        Aabb { min: Point2::new(self.min.x - r, self.min.y - r), max: Point2::new(self.max.x + r, self.max.y + r) }
    }

    pub fn intersects(&self, o: &Aabb) -> bool {
        self.min.x <= o.max.x && o.min.x <= self.max.x && self.min.y <= o.max.y && o.min.y <= self.max.y
    }

    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }
}

/// A cubic Bézier segment given by its four control points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicBezier {
    pub b: [Point2; 4],
}

impl CubicBezier {
    pub const fn new(b0: Point2, b1: Point2, b2: Point2, b3: Point2) -> Self {
        Self { b: [b0, b1, b2, b3] }
    }

    /// A straight segment with control points at the thirds.
    pub fn line(a: Point2, b: Point2) -> Self {
        Self::new(a, a.lerp(b, 1.0 / 3.0), a.lerp(b, 2.0 / 3.0), b)
    }

    /// Bernstein-form evaluation.
    pub fn eval(&self, t: f64) -> Point2 {
        let s = 1.0 - t;
        let w0 = s * s * s;
        let w1 = 3.0 * s * s * t;
        let w2 = 3.0 * s * t * t;
        let w3 = t * t * t;
        self.b[0] * w0 + self.b[1] * w1 + self.b[2] * w2 + self.b[3] * w3
    }

    /// First derivative `dγ/dt`.
    pub fn tangent(&self, t: f64) -> Point2 {
        let s = 1.0 - t;
        let d0 = self.b[1] - self.b[0];
        let d1 = self.b[2] - self.b[1];
        let d2 = self.b[3] - self.b[2];
        (d0 * (s * s) + d1 * (2.0 * s * t) + d2 * (t * t)) * 3.0
    }

    pub fn second_derivative(&self, t: f64) -> Point2 {
        let e0 = self.b[2] - self.b[1] * 2.0 + self.b[0];
        let e1 = self.b[3] - self.b[2] * 2.0 + self.b[1];
        (e0 * (1.0 - t) + e1 * t) * 6.0
    }

    /// Unit right-hand normal.
    pub fn normal(&self, t: f64) -> Result<Point2, GeomError> {
        let d = self.tangent(t);
        let n = d.norm();
        if n < 1e-12 {
            return Err(GeomError::ZeroTangent);
        }
        Ok((d / n).rot_cw())
    }

    /// de Casteljau split at `t`.
    pub fn split(&self, t: f64) -> (CubicBezier, CubicBezier) {
        let [p0, p1, p2, p3] = self.b;
        let p01 = p0.lerp(p1, t);
        let p12 = p1.lerp(p2, t);
        let p23 = p2.lerp(p3, t);
        let p012 = p01.lerp(p12, t);
        let p123 = p12.lerp(p23, t);
        let m = p012.lerp(p123, t);
        (CubicBezier::new(p0, p01, p012, m), CubicBezier::new(m, p123, p23, p3))
    }

    /// The part of the curve over `[t0, t1]`, reparameterized to `[0, 1]`.
    pub fn subsegment(&self, t0: f64, t1: f64) -> CubicBezier {
        if t0 <= 0.0 && t1 >= 1.0 {
            return *self;
        }
        let right = if t0 > 0.0 { self.split(t0).1 } else { *self };
        if t1 >= 1.0 {
            return right;
        }
        let local = (t1 - t0) / (1.0 - t0);
        right.split(local).0
    }

    pub fn control_bounds(&self) -> Aabb {
        Aabb::from_points(self.b)
    }

    /// All control points coincide, so the curve has zero length.
    pub fn is_degenerate(&self) -> bool {
        self.b.iter().all(|p| p.dist(self.b[0]) <= GEOM_TOL)
    }

    pub fn is_finite(&self) -> bool {
        self.b.iter().all(|p| p.is_finite())
    }
}

/// de Casteljau evaluation, kept separate from [`CubicBezier::eval`] as an
/// independent route.
pub fn de_casteljau(curve: &CubicBezier, t: f64) -> Point2 {
    curve.split(t).0.b[3]
}

/// C⁰ chain of cubic segments. Segment `i` covers the global parameter
/// interval `[i, i + 1]`, so the full range is `[0, len]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BezierSpline {
    segments: Vec<CubicBezier>,
}

impl BezierSpline {
    /// Builds a spline, dropping zero-length segments.
    pub fn new(segments: Vec<CubicBezier>) -> Result<Self, GeomError> {
        let segments: Vec<_> = segments.into_iter().filter(|s| !s.is_degenerate()).collect();
        if segments.is_empty() {
            return Err(GeomError::DegenerateSpline);
        }
        Ok(Self { segments })
    }

    /// From a flat control point list `p0 p1 p2 p3 p4 p5 p6 ...` where
    /// consecutive segments share their end point.
    pub fn from_points(points: &[Point2]) -> Result<Self, GeomError> {
        if points.len() < 4 || !(points.len() - 1).is_multiple_of(3) {
            return Err(GeomError::DegenerateSpline);
        }
        let segments = points.windows(4).step_by(3).map(|w| CubicBezier::new(w[0], w[1], w[2], w[3])).collect();
        Self::new(segments)
    }

    pub fn segments(&self) -> &[CubicBezier] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn param_range(&self) -> (f64, f64) {
        (0.0, self.segments.len() as f64)
    }

    /// Maps a global parameter to `(segment index, local t)`.
    pub fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.segments.len();
        let t = t.clamp(0.0, n as f64);
        let i = (t.floor() as usize).min(n - 1);
        (i, t - i as f64)
    }

    pub fn eval(&self, t: f64) -> Point2 {
        let (i, u) = self.locate(t);
        self.segments[i].eval(u)
    }

    pub fn tangent(&self, t: f64) -> Point2 {
        let (i, u) = self.locate(t);
        self.segments[i].tangent(u)
    }

    pub fn second_derivative(&self, t: f64) -> Point2 {
        let (i, u) = self.locate(t);
        self.segments[i].second_derivative(u)
    }

    pub fn start(&self) -> Point2 {
        self.segments[0].b[0]
    }

    pub fn end(&self) -> Point2 {
        self.segments[self.segments.len() - 1].b[3]
    }

    pub fn is_closed(&self) -> bool {
        self.start().dist(self.end()) <= GEOM_TOL
    }

    /// Arc length over `[t0, t1]` by composite Gauss-Legendre quadrature.
    pub fn arclength(&self, t0: f64, t1: f64) -> f64 {
        const NODES: [f64; 5] =
            [-0.906_179_845_938_664, -0.538_469_310_105_683_1, 0.0, 0.538_469_310_105_683_1, 0.906_179_845_938_664];
        const WEIGHTS: [f64; 5] = [
            0.236_926_885_056_189_1,
            0.478_628_670_499_366_5,
            0.568_888_888_888_888_9,
            0.478_628_670_499_366_5,
            0.236_926_885_056_189_1,
        ];
        const PIECES: usize = 64;
        let mut total = 0.0;
        for (i, seg) in self.segments.iter().enumerate() {
            let lo = t0.max(i as f64) - i as f64;
            let hi = t1.min((i + 1) as f64) - i as f64;
            if hi <= lo {
                continue;
            }
            let h = (hi - lo) / PIECES as f64;
            for k in 0..PIECES {
                let a = lo + k as f64 * h;
                let mid = a + 0.5 * h;
                for (x, w) in NODES.iter().zip(WEIGHTS) {
                    total += w * 0.5 * h * seg.tangent(mid + 0.5 * h * x).norm();
                }
            }
        }
        total
    }
}

/// Piecewise-linear approximation of a curve, remembering the curve
/// parameter of every vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Polyline {
    vertices: Vec<Point2>,
    params: Vec<f64>,
}

impl Polyline {
    pub fn new(vertices: Vec<Point2>, params: Vec<f64>) -> Result<Self, GeomError> {
        if vertices.len() < 2 || vertices.len() != params.len() || params.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GeomError::InvalidPolyline);
        }
        Ok(Self { vertices, params })
    }

    /// Straight polyline from a point list with params `0, 1, 2, ...`.
    pub fn from_points(vertices: Vec<Point2>) -> Result<Self, GeomError> {
        let params = (0..vertices.len()).map(|i| i as f64).collect();
        Self::new(vertices, params)
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn first(&self) -> Point2 {
        self.vertices[0]
    }

    pub fn last(&self) -> Point2 {
        self.vertices[self.vertices.len() - 1]
    }

    pub fn segment_count(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn segment(&self, i: usize) -> (Point2, Point2) {
        (self.vertices[i], self.vertices[i + 1])
    }

    pub fn length(&self) -> f64 {
        self.vertices.windows(2).map(|w| w[0].dist(w[1])).sum()
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(self.vertices.iter().copied())
    }

    /// Curve parameter at fraction `s` along segment `i`.
    pub fn param_at(&self, i: usize, s: f64) -> f64 {
        self.params[i] + (self.params[i + 1] - self.params[i]) * s
    }

    pub fn set_first(&mut self, p: Point2) {
        self.vertices[0] = p;
    }

    pub fn set_last(&mut self, p: Point2) {
        let n = self.vertices.len();
        self.vertices[n - 1] = p;
    }

    /// Splits at a point on segment `seg` carrying curve parameter `t`.
    /// The geometry of the two halves together equals the original; the
    /// split parameter is clamped into the segment's open interval.
    pub fn split_at(&self, seg: usize, point: Point2, t: f64) -> (Polyline, Polyline) {
        let (t0, t1) = (self.params[seg], self.params[seg + 1]);
        let span = t1 - t0;
        let t = t.clamp(t0 + span * 1e-9, t1 - span * 1e-9);
        let mut lv: Vec<Point2> = self.vertices[..=seg].to_vec();
        let mut lp: Vec<f64> = self.params[..=seg].to_vec();
        lv.push(point);
        lp.push(t);
        let mut rv = vec![point];
        let mut rp = vec![t];
        rv.extend_from_slice(&self.vertices[seg + 1..]);
        rp.extend_from_slice(&self.params[seg + 1..]);
        (Polyline { vertices: lv, params: lp }, Polyline { vertices: rv, params: rp })
    }

    /// Reversed copy; parameters are negated so they stay increasing.
    pub fn reversed(&self) -> Polyline {
        Polyline {
            vertices: self.vertices.iter().rev().copied().collect(),
            params: self.params.iter().rev().map(|t| -t).collect(),
        }
    }
}

/// Distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let (_, q) = project_onto_segment(p, a, b);
    p.dist(q)
}

/// Clamped projection of `p` onto `[a, b]`: `(fraction, point)`.
pub fn project_onto_segment(p: Point2, a: Point2, b: Point2) -> (f64, Point2) {
    let d = b - a;
    let len_sq = d.norm_sq();
    if len_sq == 0.0 {
        return (0.0, a);
    }
    let s = ((p - a).dot(d) / len_sq).clamp(0.0, 1.0);
    (s, a + d * s)
}

#[derive(Clone, Copy)]
struct SearchNode {
    upper: f64,
    lo: f64,
    hi: f64,
    ctrl: CubicBezier,
    depth: u32,
}

impl PartialEq for SearchNode {
    fn eq(&self, o: &Self) -> bool {
        self.upper == o.upper
    }
}
impl Eq for SearchNode {}
impl PartialOrd for SearchNode {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for SearchNode {
    fn cmp(&self, o: &Self) -> Ordering {
        self.upper.total_cmp(&o.upper)
    }
}

/// Farthest point search result on a curve piece.
#[derive(Debug, Clone, Copy)]
struct Farthest {
    t: f64,
    lower: f64,
    upper: f64,
}

/// Best-first interval search for the curve point farthest from the chord
/// segment `[curve(0), curve(1)]`. The distance to a segment is convex, so
/// its maximum over a sub-curve is bounded by the maximum over that
/// sub-curve's control points.
fn farthest_from_chord(curve: &CubicBezier, stop_below: f64) -> Farthest {
    let a = curve.b[0];
    let b = curve.b[3];
    let dist = |p: Point2| point_segment_distance(p, a, b);
    let bound = |c: &CubicBezier| c.b.iter().map(|&p| dist(p)).fold(0.0, f64::max);

    let mut best_t = 0.5;
    let mut best = dist(curve.eval(0.5));
    let mut upper = bound(curve);
    let mut heap = BinaryHeap::new();
    heap.push(SearchNode { upper, lo: 0.0, hi: 1.0, ctrl: *curve, depth: 0 });
    let tol = 1e-12_f64.max(1e-9 * stop_below);

    while let Some(node) = heap.pop() {
        upper = node.upper.max(best);
        if upper < stop_below || node.upper <= best + tol {
            break;
        }
        let mid = 0.5 * (node.lo + node.hi);
        let d = dist(node.ctrl.eval(0.5));
        if d > best {
            best = d;
            best_t = mid;
        }
        if node.depth >= FARTHEST_SEARCH_DEPTH {
            continue;
        }
        let (l, r) = node.ctrl.split(0.5);
        for (c, lo, hi) in [(l, node.lo, mid), (r, mid, node.hi)] {
            let ub = bound(&c);
            if ub > best + tol {
                heap.push(SearchNode { upper: ub, lo, hi, ctrl: c, depth: node.depth + 1 });
            }
        }
    }
    if heap.is_empty() {
        upper = best;
    }
    Farthest { t: best_t, lower: best, upper: upper.max(best) }
}

/// Top-down discretization: start from the chord of each cubic segment and
/// insert the farthest curve point until every curve point is closer than
/// `epsilon` to its chord segment.
///
/// The distance combines the perpendicular distance to the chord with the
/// overshoot past either chord end point (the Euclidean distance to the
/// chord segment), so curves that fold back beyond their end points are
/// still refined.
pub fn discretize(spline: &BezierSpline, epsilon: f64) -> Polyline {
    assert!(epsilon > 0.0, "epsilon must be positive");
    let mut vertices = vec![spline.start()];
    let mut params = vec![0.0];
    for (k, seg) in spline.segments().iter().enumerate() {
        refine(seg, k as f64, 0.0, 1.0, epsilon, 0, &mut vertices, &mut params);
    }
    Polyline { vertices, params }
}

#[allow(clippy::too_many_arguments)]
fn refine(
    seg: &CubicBezier,
    offset: f64,
    t0: f64,
    t1: f64,
    epsilon: f64,
    depth: u32,
    vertices: &mut Vec<Point2>,
    params: &mut Vec<f64>,
) {
    let piece = seg.subsegment(t0, t1);
    let far = farthest_from_chord(&piece, epsilon);
    if far.upper < epsilon || depth >= 48 || t1 - t0 < 1e-12 {
        vertices.push(seg.eval(t1));
        params.push(offset + t1);
        return;
    }
    let local = if far.t > 1e-6 && far.t < 1.0 - 1e-6 && far.lower > 0.0 { far.t } else { 0.5 };
    let tm = t0 + (t1 - t0) * local;
    refine(seg, offset, t0, tm, epsilon, depth + 1, vertices, params);
    refine(seg, offset, tm, t1, epsilon, depth + 1, vertices, params);
}

/// Outcome of a segment-segment test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentIntersection {
    None,
    /// Fractions along the first and second segment.
    Point(f64, f64),
    /// Collinear overlap; fraction pairs at the two overlap ends.
    Overlap((f64, f64), (f64, f64)),
}

/// Closed-segment intersection test.
pub fn intersect_segments(p0: Point2, p1: Point2, q0: Point2, q1: Point2) -> SegmentIntersection {
    const SLACK: f64 = 1e-12;
    let r = p1 - p0;
    let s = q1 - q0;
    let qp = q0 - p0;
    let denom = r.cross(s);
    let rn = r.norm();
    let sn = s.norm();
    if rn == 0.0 || sn == 0.0 {
        return SegmentIntersection::None;
    }
    if denom.abs() <= 1e-14 * rn * sn {
        if qp.cross(r).abs() > GEOM_TOL * rn {
            return SegmentIntersection::None;
        }
        let rr = r.norm_sq();
        let a = qp.dot(r) / rr;
        let b = (q1 - p0).dot(r) / rr;
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let start = lo.max(0.0);
        let end = hi.min(1.0);
        if start > end + SLACK {
            return SegmentIntersection::None;
        }
        let to_q = |u: f64| ((p0 + r * u - q0).dot(s) / s.norm_sq()).clamp(0.0, 1.0);
        if (end - start) * rn <= GEOM_TOL {
            let u = start.min(1.0);
            return SegmentIntersection::Point(u, to_q(u));
        }
        return SegmentIntersection::Overlap((start, to_q(start)), (end, to_q(end)));
    }
    let u = qp.cross(s) / denom;
    let v = qp.cross(r) / denom;
    if (-SLACK..=1.0 + SLACK).contains(&u) && (-SLACK..=1.0 + SLACK).contains(&v) {
        SegmentIntersection::Point(u.clamp(0.0, 1.0), v.clamp(0.0, 1.0))
    } else {
        SegmentIntersection::None
    }
}

/// An intersection between two polylines, located both by curve parameter
/// and by segment index/fraction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolylineHit {
    pub t_a: f64,
    pub t_b: f64,
    pub point: Point2,
    pub seg_a: usize,
    pub frac_a: f64,
    pub seg_b: usize,
    pub frac_b: f64,
}

/// All intersections between `a` and `b`, mapped back to the source curve
/// parameters and sorted by `t_a`. Passing the same polyline twice reports
/// self-intersections between non-adjacent segments.
pub fn intersect_polylines(a: &Polyline, b: &Polyline) -> Vec<PolylineHit> {
    if std::ptr::eq(a, b) {
        return self_intersections(a);
    }
    if !a.bounds().intersects(&b.bounds()) {
        return Vec::new();
    }
    let mut hits = Vec::new();
    let b_boxes: Vec<Aabb> = (0..b.segment_count())
        .map(|j| {
            let (q0, q1) = b.segment(j);
            Aabb::from_points([q0, q1])
        })
        .collect();
    for i in 0..a.segment_count() {
        let (p0, p1) = a.segment(i);
        let abox = Aabb::from_points([p0, p1]).expanded(GEOM_TOL);
        for (j, bbox) in b_boxes.iter().enumerate() {
            if !abox.intersects(bbox) {
                continue;
            }
            let (q0, q1) = b.segment(j);
            push_hits(a, b, i, j, intersect_segments(p0, p1, q0, q1), &mut hits);
        }
    }
    finish_hits(hits)
}

/// Self-intersections of a polyline. A closed polyline (first vertex equal
/// to the last) also skips the wrap-around segment pair.
pub fn self_intersections(a: &Polyline) -> Vec<PolylineHit> {
    let n = a.segment_count();
    let closed = a.first().dist(a.last()) <= GEOM_TOL;
    let boxes: Vec<Aabb> = (0..n)
        .map(|i| {
            let (p0, p1) = a.segment(i);
            Aabb::from_points([p0, p1]).expanded(GEOM_TOL)
        })
        .collect();
    let mut hits = Vec::new();
    for i in 0..n {
        for j in i + 2..n {
            if closed && i == 0 && j == n - 1 {
                continue;
            }
            if !boxes[i].intersects(&boxes[j]) {
                continue;
            }
            let (p0, p1) = a.segment(i);
            let (q0, q1) = a.segment(j);
            push_hits(a, a, i, j, intersect_segments(p0, p1, q0, q1), &mut hits);
        }
    }
    finish_hits(hits)
}

fn push_hits(a: &Polyline, b: &Polyline, i: usize, j: usize, r: SegmentIntersection, out: &mut Vec<PolylineHit>) {
    let (p0, p1) = a.segment(i);
    let mut push = |u: f64, v: f64| {
        out.push(PolylineHit {
            t_a: a.param_at(i, u),
            t_b: b.param_at(j, v),
            point: p0.lerp(p1, u),
            seg_a: i,
            frac_a: u,
            seg_b: j,
            frac_b: v,
        })
    };
    match r {
        SegmentIntersection::None => {}
        SegmentIntersection::Point(u, v) => push(u, v),
        SegmentIntersection::Overlap((u0, v0), (u1, v1)) => {
            push(u0, v0);
            push(u1, v1);
        }
    }
}

fn finish_hits(mut hits: Vec<PolylineHit>) -> Vec<PolylineHit> {
    hits.sort_by(|x, y| x.t_a.total_cmp(&y.t_a).then(x.t_b.total_cmp(&y.t_b)));
    let mut out: Vec<PolylineHit> = Vec::with_capacity(hits.len());
    for h in hits {
        if out.iter().any(|o| o.point.dist(h.point) <= GEOM_TOL) {
            continue;
        }
        out.push(h);
    }
    out
}

/// Closest point on a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPoint {
    pub t: f64,
    pub point: Point2,
    pub distance: f64,
    pub segment: usize,
    pub frac: f64,
}

/// Global minimizer of the distance from `p` over all segments; ties go to
/// the smaller parameter.
pub fn closest_point(polyline: &Polyline, p: Point2) -> ClosestPoint {
    let mut best: Option<ClosestPoint> = None;
    for i in 0..polyline.segment_count() {
        let (a, b) = polyline.segment(i);
        let (s, q) = project_onto_segment(p, a, b);
        let d = p.dist(q);
        if best.is_none_or(|c| d < c.distance) {
            best = Some(ClosestPoint { t: polyline.param_at(i, s), point: q, distance: d, segment: i, frac: s });
        }
    }
    best.expect("polyline has at least one segment")
}

/// Parameter in `[lo, hi]` of the curve point nearest `p`, refined by
/// Newton iteration from `t`.
pub fn refine_closest_param(spline: &BezierSpline, p: Point2, mut t: f64, lo: f64, hi: f64) -> f64 {
    for _ in 0..16 {
        let d = spline.eval(t) - p;
        let d1 = spline.tangent(t);
        let f = d.dot(d1);
        let fp = d1.norm_sq() + d.dot(spline.second_derivative(t));
        if !(fp > 0.0 && fp.is_finite()) {
            break;
        }
        let next = (t - f / fp).clamp(lo, hi);
        let done = (next - t).abs() <= 1e-15 * (1.0 + t.abs());
        t = next;
        if done {
            break;
        }
    }
    t
}

/// Total signed angle subtended at `p` by a closed chain of points. The
/// last point is joined back to the first.
pub fn winding_angle_points<I>(points: I, p: Point2) -> Result<f64, GeomError>
where
    I: IntoIterator<Item = Point2>,
{
    let mut iter = points.into_iter();
    let Some(first) = iter.next() else {
        return Ok(0.0);
    };
    let mut total = 0.0;
    let mut prev = first;
    let mut step = |a: Point2, b: Point2| -> Result<(), GeomError> {
        if point_segment_distance(p, a, b) <= GEOM_TOL {
            return Err(GeomError::OnBoundary);
        }
        let u = a - p;
        let v = b - p;
        total += u.cross(v).atan2(u.dot(v));
        Ok(())
    };
    for q in iter {
        step(prev, q)?;
        prev = q;
    }
    step(prev, first)?;
    Ok(total)
}

/// Signed angle subtended at `p` by a closed loop given as consecutive
/// polylines. `|angle| > π` means `p` is enclosed.
pub fn winding_angle(loop_: &[Polyline], p: Point2) -> Result<f64, GeomError> {
    winding_angle_points(loop_.iter().flat_map(|pl| pl.vertices().iter().copied()), p)
}

/// Winding number rounded from the winding angle.
pub fn winding_number(angle: f64) -> i32 {
    (angle / (2.0 * PI)).round() as i32
}

/// Signed area of a closed polygon (positive for counterclockwise).
pub fn signed_area(points: &[Point2]) -> f64 {
    let n = points.len();
    if n < 3 {
        return 0.0;
    }
    0.5 * (0..n).map(|i| points[i].cross(points[(i + 1) % n])).sum::<f64>()
}

/// Sum of the discrete turning angles of a closed polygon divided by 2π,
/// rounded. An exact reversal counts as a left turn of +π.
pub fn polygon_turning_number(points: &[Point2]) -> i32 {
    let mut pts: Vec<Point2> = Vec::with_capacity(points.len());
    for &p in points {
        if pts.last().is_none_or(|q: &Point2| q.dist(p) > 0.0) {
            pts.push(p);
        }
    }
    while pts.len() > 1 && pts[0].dist(pts[pts.len() - 1]) == 0.0 {
        pts.pop();
    }
    let n = pts.len();
    if n < 2 {
        return 0;
    }
    let mut total = 0.0;
    for i in 0..n {
        let a = pts[(i + 1) % n] - pts[i];
        let b = pts[(i + 2) % n] - pts[(i + 1) % n];
        total += turn_angle(a, b);
    }
    (total / (2.0 * PI)).round() as i32
}

/// Signed turn from direction `a` to direction `b` in `(-π, π]`.
pub fn turn_angle(a: Point2, b: Point2) -> f64 {
    let c = a.cross(b);
    let d = a.dot(b);
    if c == 0.0 && d < 0.0 {
        return PI;
    }
    c.atan2(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn arch() -> CubicBezier {
        CubicBezier::new(Point2::new(0.0, 0.0), Point2::new(0.0, 1.0), Point2::new(1.0, 1.0), Point2::new(1.0, 0.0))
    }

    fn max_deviation(spline: &BezierSpline, poly: &Polyline) -> f64 {
        let n = 1000;
        (0..=n)
            .map(|k| {
                let p = spline.eval(spline.len() as f64 * k as f64 / n as f64);
                closest_point(poly, p).distance
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn eval_endpoints_and_midpoint() {
        let c = arch();
        assert_eq!(c.eval(0.0), Point2::new(0.0, 0.0));
        // de Casteljau at 1/2: ((0,0.5),(0.5,1),(1,0.5)) -> ((0.25,0.75),(0.75,0.75)) -> (0.5,0.75)
        assert_abs_diff_eq!(c.eval(0.5).x, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(c.eval(0.5).y, 0.75, epsilon = 1e-15);
        let z = CubicBezier::new(Point2::default(), Point2::default(), Point2::default(), Point2::default());
        assert_eq!(z.eval(0.37), Point2::default());
    }

    #[test]
    fn tangent_examples() {
        let line = CubicBezier::line(Point2::new(0.0, 0.0), Point2::new(3.0, 0.0));
        assert_abs_diff_eq!(line.tangent(0.5).x, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(line.tangent(0.5).y, 0.0, epsilon = 1e-12);
        assert_eq!(arch().tangent(0.0), Point2::new(0.0, 3.0));
        let z = CubicBezier::new(Point2::default(), Point2::default(), Point2::default(), Point2::default());
        assert_eq!(z.tangent(0.3), Point2::default());
    }

    #[test]
    fn normal_examples() {
        let east = CubicBezier::line(Point2::new(0.0, 0.0), Point2::new(1.0, 0.0));
        let n = east.normal(0.3).unwrap();
        assert_abs_diff_eq!(n.x, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(n.y, -1.0, epsilon = 1e-15);
        let north = CubicBezier::line(Point2::new(0.0, 0.0), Point2::new(0.0, 1.0));
        let n = north.normal(0.8).unwrap();
        assert_abs_diff_eq!(n.x, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(n.y, 0.0, epsilon = 1e-15);
        let n = arch().normal(0.0).unwrap();
        assert_abs_diff_eq!(n.x, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(n.y, 0.0, epsilon = 1e-15);
        let z = CubicBezier::new(Point2::default(), Point2::default(), Point2::default(), Point2::default());
        assert_eq!(z.normal(0.5), Err(GeomError::ZeroTangent));
    }

    #[test]
    fn degenerate_segments_are_dropped() {
        let p = Point2::new(1.0, 1.0);
        let s =
            BezierSpline::new(vec![CubicBezier::new(p, p, p, p), CubicBezier::line(p, Point2::new(2.0, 1.0))]).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(BezierSpline::new(vec![CubicBezier::new(p, p, p, p)]), Err(GeomError::DegenerateSpline));
    }

    #[test]
    fn discretize_collinear_gives_chord() {
        let s = BezierSpline::new(vec![CubicBezier::line(Point2::new(0.0, 0.0), Point2::new(3.0, 0.0))]).unwrap();
        for eps in [1e-6, 0.01, 1.0] {
            assert_eq!(discretize(&s, eps).vertices().len(), 2);
        }
    }

    #[test]
    fn discretize_arch() {
        let s = BezierSpline::new(vec![arch()]).unwrap();
        // the apex sits 0.75 above the chord, so only a tolerance above that
        // keeps the bare chord
        assert_eq!(discretize(&s, 0.8).vertices().len(), 2);
        let coarse = discretize(&s, 0.5);
        assert_eq!(coarse.vertices().len(), 3);
        assert_abs_diff_eq!(coarse.params()[1], 0.5, epsilon = 1e-6);
        let fine = discretize(&s, 0.01);
        assert!(fine.vertices().len() > 3);
        assert!(max_deviation(&s, &fine) <= 0.01);
        for (v, t) in fine.vertices().iter().zip(fine.params()) {
            assert!(v.dist(s.eval(*t)) <= 1e-9);
        }
    }

    #[test]
    fn discretize_overshooting_curve() {
        // collinear control points running past the end point
        let s = BezierSpline::new(vec![CubicBezier::new(
            Point2::new(0.0, 0.0),
            Point2::new(3.0, 0.0),
            Point2::new(3.0, 0.0),
            Point2::new(1.0, 0.0),
        )])
        .unwrap();
        let p = discretize(&s, 0.01);
        assert!(p.vertices().len() > 2);
        assert!(max_deviation(&s, &p) <= 0.01);
    }

    #[test]
    fn discretize_semicircle_converges() {
        let k = 0.552_284_749_8;
        let s = BezierSpline::new(vec![
            CubicBezier::new(Point2::new(1.0, 0.0), Point2::new(1.0, k), Point2::new(k, 1.0), Point2::new(0.0, 1.0)),
            CubicBezier::new(Point2::new(0.0, 1.0), Point2::new(-k, 1.0), Point2::new(-1.0, k), Point2::new(-1.0, 0.0)),
        ])
        .unwrap();
        let mut last = 0;
        for eps in [0.1, 0.01, 0.001, 0.0001] {
            let p = discretize(&s, eps);
            assert!(p.vertices().len() >= last);
            last = p.vertices().len();
            assert!(max_deviation(&s, &p) <= eps);
        }
    }

    #[test]
    fn x_crossing() {
        let a = Polyline::from_points(vec![Point2::new(0.0, 0.0), Point2::new(2.0, 2.0)]).unwrap();
        let b = Polyline::from_points(vec![Point2::new(0.0, 2.0), Point2::new(2.0, 0.0)]).unwrap();
        let hits = intersect_polylines(&a, &b);
        assert_eq!(hits.len(), 1);
        assert_abs_diff_eq!(hits[0].point.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hits[0].t_a, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(hits[0].t_b, 0.5, epsilon = 1e-12);
        let far = Polyline::from_points(vec![Point2::new(10.0, 10.0), Point2::new(11.0, 10.0)]).unwrap();
        assert!(intersect_polylines(&a, &far).is_empty());
    }

    #[test]
    fn collinear_overlap_reports_two_ends() {
        let a = Polyline::from_points(vec![Point2::new(0.0, 0.0), Point2::new(2.0, 0.0)]).unwrap();
        let b = Polyline::from_points(vec![Point2::new(1.0, 0.0), Point2::new(3.0, 0.0)]).unwrap();
        let hits = intersect_polylines(&a, &b);
        assert_eq!(hits.len(), 2);
        assert_abs_diff_eq!(hits[0].point.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(hits[1].point.x, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn figure_eight_self_intersection() {
        // a loop crossing itself once
        let s = BezierSpline::new(vec![CubicBezier::new(
            Point2::new(0.0, 0.0),
            Point2::new(3.0, 2.0),
            Point2::new(-1.0, 2.0),
            Point2::new(2.0, 0.0),
        )])
        .unwrap();
        let p = discretize(&s, 1e-3);
        let hits = intersect_polylines(&p, &p);
        // brute force over all segment pairs
        let mut brute = 0;
        for i in 0..p.segment_count() {
            for j in i + 2..p.segment_count() {
                let (a0, a1) = p.segment(i);
                let (b0, b1) = p.segment(j);
                if intersect_segments(a0, a1, b0, b1) != SegmentIntersection::None {
                    brute += 1;
                }
            }
        }
        assert_eq!(hits.len(), 1);
        assert_eq!(brute, 1);
    }

    fn unit_square(ccw: bool) -> Vec<Polyline> {
        let mut pts = vec![
            Point2::new(0.0, 0.0),
            Point2::new(1.0, 0.0),
            Point2::new(1.0, 1.0),
            Point2::new(0.0, 1.0),
            Point2::new(0.0, 0.0),
        ];
        if !ccw {
            pts.reverse();
        }
        vec![Polyline::from_points(pts).unwrap()]
    }

    #[test]
    fn winding_examples() {
        let sq = unit_square(true);
        assert_abs_diff_eq!(winding_angle(&sq, Point2::new(0.5, 0.5)).unwrap(), 2.0 * PI, epsilon = 1e-12);
        assert_abs_diff_eq!(winding_angle(&sq, Point2::new(5.0, 5.0)).unwrap(), 0.0, epsilon = 1e-12);
        let cw = unit_square(false);
        assert_abs_diff_eq!(winding_angle(&cw, Point2::new(0.5, 0.5)).unwrap(), -2.0 * PI, epsilon = 1e-12);
        assert_eq!(winding_angle(&sq, Point2::new(1.0, 0.5)), Err(GeomError::OnBoundary));
    }

    #[test]
    fn closest_point_examples() {
        let p = Polyline::from_points(vec![Point2::new(0.0, 0.0), Point2::new(2.0, 0.0)]).unwrap();
        let c = closest_point(&p, Point2::new(1.0, 1.0));
        assert_abs_diff_eq!(c.t, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(c.distance, 1.0, epsilon = 1e-12);
        let c = closest_point(&p, Point2::new(2.0, 0.0));
        assert_eq!(c.distance, 0.0);
        let c = closest_point(&p, Point2::new(5.0, 0.0));
        assert_eq!(c.point, Point2::new(2.0, 0.0));
        assert_eq!(c.t, 1.0);
    }

    #[test]
    fn turning_numbers() {
        let circle: Vec<Point2> = (0..64)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / 64.0;
                Point2::new(a.cos(), a.sin())
            })
            .collect();
        assert_eq!(polygon_turning_number(&circle), 1);
        let rev: Vec<Point2> = circle.iter().rev().copied().collect();
        assert_eq!(polygon_turning_number(&rev), -1);
        // out and back along a stick: both reversals turn left by +π
        let stick = [Point2::new(0.0, 0.0), Point2::new(1.0, 0.0), Point2::new(2.0, 0.0), Point2::new(1.0, 0.0)];
        assert_eq!(polygon_turning_number(&stick), 1);
    }
}
