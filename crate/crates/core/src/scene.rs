//! Scene primitives and their conversion to input boundary curves.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::geometry::{discretize, self_intersections, signed_area, BezierSpline, CubicBezier, Point2, Polyline};
use crate::mesh::FergusonPatch;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ColorRGB {
    pub r: f64,
    pub g: f64,
    pub b: f64,
}

impl ColorRGB {
    pub const fn new(r: f64, g: f64, b: f64) -> Self {
        Self { r, g, b }
    }

    pub const fn splat(v: f64) -> Self {
        Self { r: v, g: v, b: v }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.r, self.g, self.b]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn channel(self, k: usize) -> f64 {
        self.to_array()[k]
    }

    pub fn channel_mut(&mut self, k: usize) -> &mut f64 {
        match k {
            0 => &mut self.r,
            1 => &mut self.g,
            _ => &mut self.b,
        }
    }

    pub fn max_abs(self) -> f64 {
        self.r.abs().max(self.g.abs()).max(self.b.abs())
    }

    pub fn is_finite(self) -> bool {
        self.r.is_finite() && self.g.is_finite() && self.b.is_finite()
    }

    pub fn lerp(self, o: Self, t: f64) -> Self {
        self + (o - self) * t
    }
}

impl Add for ColorRGB {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.r + o.r, self.g + o.g, self.b + o.b)
    }
}

impl AddAssign for ColorRGB {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl Sub for ColorRGB {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.r - o.r, self.g - o.g, self.b - o.b)
    }
}

impl Mul<f64> for ColorRGB {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Self::new(self.r * s, self.g * s, self.b * s)
    }
}

impl Neg for ColorRGB {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.r, -self.g, -self.b)
    }
}

/// Piecewise-linear color along a curve, clamped at the ends.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorRamp {
    stops: Vec<(f64, ColorRGB)>,
}

impl ColorRamp {
    pub fn new(stops: Vec<(f64, ColorRGB)>) -> Result<Self> {
        if stops.is_empty() {
            return Err(Error::Validation("color ramp needs at least one stop".into()));
        }
        if stops.iter().any(|(t, c)| !(0.0..=1.0).contains(t) || !c.is_finite()) {
            return Err(Error::Validation("color ramp stops must lie in [0, 1] with finite colors".into()));
        }
        if stops.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::Validation("color ramp stop parameters must be strictly increasing".into()));
        }
        Ok(Self { stops })
    }

    pub fn constant(c: ColorRGB) -> Self {
        Self { stops: vec![(0.0, c)] }
    }

    pub fn stops(&self) -> &[(f64, ColorRGB)] {
        &self.stops
    }

    pub fn eval(&self, t: f64) -> ColorRGB {
        piecewise_linear(&self.stops, t)
    }
}

fn piecewise_linear(stops: &[(f64, ColorRGB)], t: f64) -> ColorRGB {
    let first = stops[0];
    if t <= first.0 {
        return first.1;
    }
    for w in stops.windows(2) {
        let (t0, c0) = w[0];
        let (t1, c1) = w[1];
        if t <= t1 {
            return c0.lerp(c1, (t - t0) / (t1 - t0));
        }
    }
    stops[stops.len() - 1].1
}

/// Prescribed boundary color.
#[derive(Debug, Clone, PartialEq)]
pub enum ColorCurve {
    /// Evaluated at the curve parameter normalized to `[0, 1]`.
    Ramp(ColorRamp),
    /// Cubic Bézier in color space over a single-segment curve.
    Cubic([ColorRGB; 4]),
}

impl ColorCurve {
    /// `t` is the global spline parameter, `segments` the spline's segment
    /// count.
    pub fn eval(&self, t: f64, segments: usize) -> ColorRGB {
        match self {
            ColorCurve::Ramp(r) => r.eval(t / segments.max(1) as f64),
            ColorCurve::Cubic(b) => {
                let t = t.clamp(0.0, 1.0);
                let s = 1.0 - t;
                b[0] * (s * s * s) + b[1] * (3.0 * s * s * t) + b[2] * (3.0 * s * t * t) + b[3] * (t * t * t)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryCondition {
    Dirichlet(ColorCurve),
    Neumann,
}

impl BoundaryCondition {
    pub fn solid(c: ColorRGB) -> Self {
        BoundaryCondition::Dirichlet(ColorCurve::Ramp(ColorRamp::constant(c)))
    }

    pub fn is_dirichlet(&self) -> bool {
        matches!(self, BoundaryCondition::Dirichlet(_))
    }

    pub fn color(&self, t: f64, segments: usize) -> Option<ColorRGB> {
        match self {
            BoundaryCondition::Dirichlet(c) => Some(c.eval(t, segments)),
            BoundaryCondition::Neumann => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CurveSource {
    Mesh {
        mesh: usize,
        edge: usize,
    },
    Diffusion(usize),
    /// Synthetic domain border: bottom, right, top, left.
    Border(usize),
}

/// An oriented curve with a condition on each side. Left and right are
/// relative to the direction of increasing parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct InputBoundaryCurve {
    pub spline: BezierSpline,
    pub left: BoundaryCondition,
    pub right: BoundaryCondition,
    pub source: CurveSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffusionCurve {
    pub spline: BezierSpline,
    pub left: BoundaryCondition,
    pub right: BoundaryCondition,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LaplacianProfile {
    Constant(ColorRGB),
    Linear(ColorRGB, ColorRGB),
    Piecewise(Vec<(f64, ColorRGB)>),
}

impl LaplacianProfile {
    /// `t` normalized to `[0, 1]` along the curve.
    pub fn eval(&self, t: f64) -> ColorRGB {
        match self {
            LaplacianProfile::Constant(c) => *c,
            LaplacianProfile::Linear(a, b) => a.lerp(*b, t.clamp(0.0, 1.0)),
            LaplacianProfile::Piecewise(stops) => piecewise_linear(stops, t),
        }
    }

    pub fn negated(&self) -> Self {
        match self {
            LaplacianProfile::Constant(c) => LaplacianProfile::Constant(-*c),
            LaplacianProfile::Linear(a, b) => LaplacianProfile::Linear(-*a, -*b),
            LaplacianProfile::Piecewise(s) => LaplacianProfile::Piecewise(s.iter().map(|(t, c)| (*t, -*c)).collect()),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            LaplacianProfile::Constant(c) => c.is_finite(),
            LaplacianProfile::Linear(a, b) => a.is_finite() && b.is_finite(),
            LaplacianProfile::Piecewise(s) => {
                !s.is_empty()
                    && s.iter().all(|(t, c)| (0.0..=1.0).contains(t) && c.is_finite())
                    && s.windows(2).all(|w| w[1].0 > w[0].0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Validation("Laplacian profile stops must be finite and strictly increasing in [0, 1]".into()))
        }
    }
}

pub const DEFAULT_BAND_WIDTH: f64 = 3.0;

/// Curve prescribing a Laplacian on both sides. The right profile is always
/// the negated left profile.
#[derive(Debug, Clone, PartialEq)]
pub struct PoissonCurve {
    pub spline: BezierSpline,
    pub left_profile: LaplacianProfile,
    pub right_profile: LaplacianProfile,
    /// Side band extent in pixels.
    pub band_width: f64,
}

impl PoissonCurve {
    pub fn new(spline: BezierSpline, left: LaplacianProfile, band_width: f64) -> Self {
        let right = left.negated();
        Self { spline, left_profile: left, right_profile: right, band_width }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeshNode {
    pub position: Point2,
    pub color: ColorRGB,
    /// Position derivative along `u` (across columns).
    pub du: Point2,
    /// Position derivative along `v` (across rows).
    pub dv: Point2,
    pub du_color: ColorRGB,
    pub dv_color: ColorRGB,
}

/// A grid of Ferguson patches sharing corner data. Nodes are row-major,
/// `(rows + 1) × (cols + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientMesh {
    pub rows: usize,
    pub cols: usize,
    pub nodes: Vec<MeshNode>,
    /// Condition on the outside of the mesh boundary.
    pub left: BoundaryCondition,
}

impl GradientMesh {
    pub fn node(&self, i: usize, j: usize) -> &MeshNode {
        &self.nodes[i * (self.cols + 1) + j]
    }

    fn validate(&self, id: usize) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::Validation(format!("gradient mesh {id}: rows and cols must be at least 1")));
        }
        if self.nodes.len() != (self.rows + 1) * (self.cols + 1) {
            return Err(Error::Validation(format!(
                "gradient mesh {id}: expected {} nodes, found {}",
                (self.rows + 1) * (self.cols + 1),
                self.nodes.len()
            )));
        }
        let finite = self.nodes.iter().all(|n| {
            n.position.is_finite()
                && n.du.is_finite()
                && n.dv.is_finite()
                && n.color.is_finite()
                && n.du_color.is_finite()
                && n.dv_color.is_finite()
        });
        if !finite {
            return Err(Error::Validation(format!("gradient mesh {id}: non-finite node data")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OverlapMode {
    Zero,
    Sum,
    #[default]
    Average,
    First,
}

impl OverlapMode {
    pub fn name(self) -> &'static str {
        match self {
            OverlapMode::Zero => "zero",
            OverlapMode::Sum => "sum",
            OverlapMode::Average => "average",
            OverlapMode::First => "first",
        }
    }
}

impl std::str::FromStr for OverlapMode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "zero" => Ok(OverlapMode::Zero),
            "sum" => Ok(OverlapMode::Sum),
            "average" => Ok(OverlapMode::Average),
            "first" => Ok(OverlapMode::First),
            other => Err(format!("unknown overlap mode `{other}` (expected zero, sum, average or first)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub min: Point2,
    pub max: Point2,
}

impl Domain {
    pub fn new(min: Point2, max: Point2) -> Self {
        Self { min, max }
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }

    pub fn min_extent(&self) -> f64 {
        self.width().min(self.height())
    }

    pub fn corners(&self) -> [Point2; 4] {
        [self.min, Point2::new(self.max.x, self.min.y), self.max, Point2::new(self.min.x, self.max.y)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Settings {
    /// Squared merge/snap distance.
    pub tau: f64,
    pub epsilon: f64,
    pub overlap_mode: OverlapMode,
    pub iterations: usize,
    pub multigrid_levels: usize,
    pub residual_target: f64,
}

pub const DEFAULT_ITERATIONS: usize = 10_000;
pub const DEFAULT_MG_LEVELS: usize = 4;
pub const DEFAULT_RESIDUAL: f64 = 1e-5;

impl Settings {
    pub fn defaults_for(domain: &Domain) -> Self {
        Self {
            tau: 0.0,
            epsilon: 0.01 * domain.min_extent(),
            overlap_mode: OverlapMode::Average,
            iterations: DEFAULT_ITERATIONS,
            multigrid_levels: DEFAULT_MG_LEVELS,
            residual_target: DEFAULT_RESIDUAL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::Validation("tau must be a finite non-negative number".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Validation("epsilon must be positive".into()));
        }
        if self.iterations == 0 {
            return Err(Error::Validation("iterations must be at least 1".into()));
        }
        if self.multigrid_levels == 0 {
            return Err(Error::Validation("multigrid_levels must be at least 1".into()));
        }
        if !(self.residual_target > 0.0 && self.residual_target.is_finite()) {
            return Err(Error::Validation("residual_target must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub domain: Domain,
    pub settings: Settings,
    /// Later meshes sit on top of earlier ones.
    pub meshes: Vec<GradientMesh>,
    pub diffusion_curves: Vec<DiffusionCurve>,
    pub poisson_curves: Vec<PoissonCurve>,
}

impl Scene {
    pub fn empty(domain: Domain) -> Self {
        Self {
            domain,
            settings: Settings::defaults_for(&domain),
            meshes: Vec::new(),
            diffusion_curves: Vec::new(),
            poisson_curves: Vec::new(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.domain;
        if !(d.min.is_finite() && d.max.is_finite() && d.width() > 0.0 && d.height() > 0.0) {
            return Err(Error::Validation("domain must have positive area".into()));
        }
        self.settings.validate()?;
        for (i, m) in self.meshes.iter().enumerate() {
            m.validate(i)?;
        }
        for (i, p) in self.poisson_curves.iter().enumerate() {
            p.left_profile.validate()?;
            p.right_profile.validate()?;
            if !(p.band_width > 0.0 && p.band_width.is_finite()) {
                return Err(Error::Validation(format!("poisson curve {i}: band_width must be positive")));
            }
            for k in 0..=16 {
                let t = k as f64 / 16.0;
                if (p.left_profile.eval(t) + p.right_profile.eval(t)).max_abs() > 1e-12 {
                    return Err(Error::Validation(format!(
                        "poisson curve {i}: right profile must be the negated left profile"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Every input boundary curve in insertion order: mesh boundaries
    /// first, then diffusion curves.
    pub fn boundary_curves(&self) -> Result<Vec<InputBoundaryCurve>> {
        let mut out = Vec::new();
        for (i, m) in self.meshes.iter().enumerate() {
            out.extend(mesh_boundary_curves(m, i, self.settings.epsilon)?);
        }
        for (i, dc) in self.diffusion_curves.iter().enumerate() {
            out.push(diffusion_boundary_curve(dc, i));
        }
        Ok(out)
    }
}

pub fn diffusion_boundary_curve(dc: &DiffusionCurve, id: usize) -> InputBoundaryCurve {
    InputBoundaryCurve {
        spline: dc.spline.clone(),
        left: dc.left.clone(),
        right: dc.right.clone(),
        source: CurveSource::Diffusion(id),
    }
}

/// One Hermite edge of the outer ring: position and color end values and
/// derivatives along the ring direction.
struct RingEdge {
    p: [Point2; 2],
    dp: [Point2; 2],
    c: [ColorRGB; 2],
    dc: [ColorRGB; 2],
}

impl RingEdge {
    fn reversed(&self) -> RingEdge {
        RingEdge {
            p: [self.p[1], self.p[0]],
            dp: [-self.dp[1], -self.dp[0]],
            c: [self.c[1], self.c[0]],
            dc: [-self.dc[1], -self.dc[0]],
        }
    }

    fn bezier(&self) -> CubicBezier {
        CubicBezier::new(self.p[0], self.p[0] + self.dp[0] / 3.0, self.p[1] - self.dp[1] / 3.0, self.p[1])
    }

    fn color_bezier(&self) -> [ColorRGB; 4] {
        [self.c[0], self.c[0] + self.dc[0] * (1.0 / 3.0), self.c[1] - self.dc[1] * (1.0 / 3.0), self.c[1]]
    }
}

/// The outer ring of a mesh as clockwise Ferguson edges, each carrying the
/// mesh color restricted to that edge as a Dirichlet condition on its right.
pub fn mesh_boundary_curves(mesh: &GradientMesh, id: usize, epsilon: f64) -> Result<Vec<InputBoundaryCurve>> {
    let along_u = |i: usize, j: usize, forward: bool| {
        let (a, b) =
            if forward { (mesh.node(i, j), mesh.node(i, j + 1)) } else { (mesh.node(i, j + 1), mesh.node(i, j)) };
        let s = if forward { 1.0 } else { -1.0 };
        RingEdge {
            p: [a.position, b.position],
            dp: [a.du * s, b.du * s],
            c: [a.color, b.color],
            dc: [a.du_color * s, b.du_color * s],
        }
    };
    let along_v = |i: usize, j: usize, forward: bool| {
        let (a, b) =
            if forward { (mesh.node(i, j), mesh.node(i + 1, j)) } else { (mesh.node(i + 1, j), mesh.node(i, j)) };
        let s = if forward { 1.0 } else { -1.0 };
        RingEdge {
            p: [a.position, b.position],
            dp: [a.dv * s, b.dv * s],
            c: [a.color, b.color],
            dc: [a.dv_color * s, b.dv_color * s],
        }
    };
    let (rows, cols) = (mesh.rows, mesh.cols);
    let mut ring = Vec::with_capacity(2 * (rows + cols));
    for j in 0..cols {
        ring.push(along_u(0, j, true));
    }
    for i in 0..rows {
        ring.push(along_v(i, cols, true));
    }
    for j in (0..cols).rev() {
        ring.push(along_u(rows, j, false));
    }
    for i in (0..rows).rev() {
        ring.push(along_v(i, 0, false));
    }

    let samples: Vec<Point2> = ring
        .iter()
        .flat_map(|e| {
            let b = e.bezier();
            (0..8).map(move |k| b.eval(k as f64 / 8.0))
        })
        .collect();
    if signed_area(&samples) > 0.0 {
        ring = ring.iter().rev().map(RingEdge::reversed).collect();
    }

    let mut curves = Vec::with_capacity(ring.len());
    let mut outline: Vec<Point2> = Vec::new();
    let mut params: Vec<f64> = Vec::new();
    for (k, e) in ring.iter().enumerate() {
        let spline = BezierSpline::new(vec![e.bezier()])
            .map_err(|_| Error::FoldedMesh { mesh: id, detail: format!("boundary edge {k} has zero length") })?;
        let pl = discretize(&spline, epsilon);
        for (i, (v, _)) in pl.vertices().iter().zip(pl.params()).enumerate() {
            if i == 0 && !outline.is_empty() {
                continue;
            }
            outline.push(*v);
            params.push(outline.len() as f64);
        }
        curves.push(InputBoundaryCurve {
            spline,
            left: mesh.left.clone(),
            right: BoundaryCondition::Dirichlet(ColorCurve::Cubic(e.color_bezier())),
            source: CurveSource::Mesh { mesh: id, edge: k },
        });
    }
    if let Ok(poly) = Polyline::new(outline, params) {
        let hits = self_intersections(&poly);
        if let Some(h) = hits.first() {
            return Err(Error::FoldedMesh {
                mesh: id,
                detail: format!("boundary crosses itself near ({:.6}, {:.6})", h.point.x, h.point.y),
            });
        }
    }
    Ok(curves)
}

/// Ferguson patch `(r, c)` of a mesh.
pub fn mesh_patch(mesh: &GradientMesh, r: usize, c: usize) -> FergusonPatch {
    FergusonPatch::from_corners([
        [mesh.node(r, c), mesh.node(r + 1, c)],
        [mesh.node(r, c + 1), mesh.node(r + 1, c + 1)],
    ])
}
