//! Scene file reading and writing.
//!
//! ```json
//! {
//!   "format": 1,
//!   "domain": { "min": [0, 0], "max": [1, 1] },
//!   "settings": { "tau": 0.0, "epsilon": 0.01, "overlap_mode": "average",
//!                 "iterations": 10000, "multigrid_levels": 4, "residual_target": 1e-5 },
//!   "gradient_meshes": [ { "rows": 1, "cols": 1, "nodes": [ ... ], "left": "neumann" } ],
//!   "diffusion_curves": [ { "points": [[x, y], ...], "left": [1, 0, 0], "right": "neumann" } ],
//!   "poisson_curves": [ { "points": [[x, y], ...], "left": { "constant": [1, 1, 1] }, "band_width": 3 } ]
//! }
//! ```
//!
//! Every settings key is optional. A boundary condition is `"neumann"`, a
//! solid `[r, g, b]`, or `{ "ramp": [[t, [r, g, b]], ...] }`. Laplacian
//! profiles are `{ "constant": c }`, `{ "linear": [c0, c1] }` or
//! `{ "piecewise": [[t, c], ...] }`. A Poisson curve's `right` profile may be
//! omitted; when present it must equal the negated left profile.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BezierSpline, CubicBezier, Point2};
use crate::scene::{
    BoundaryCondition, ColorCurve, ColorRGB, ColorRamp, DiffusionCurve, Domain, GradientMesh, LaplacianProfile,
    MeshNode, OverlapMode, PoissonCurve, Scene, Settings, DEFAULT_BAND_WIDTH,
};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScene {
    format: u32,
    domain: RawDomain,
    #[serde(default)]
    settings: RawSettings,
    #[serde(default)]
    gradient_meshes: Vec<RawMesh>,
    #[serde(default)]
    diffusion_curves: Vec<RawDiffusionCurve>,
    #[serde(default)]
    poisson_curves: Vec<RawPoissonCurve>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDomain {
    min: [f64; 2],
    max: [f64; 2],
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSettings {
    #[serde(skip_serializing_if = "Option::is_none")]
    tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    overlap_mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    multigrid_levels: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual_target: Option<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawCondition {
    Keyword(String),
    Solid([f64; 3]),
    Ramp { ramp: Vec<(f64, [f64; 3])> },
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RawProfile {
    Constant([f64; 3]),
    Linear([[f64; 3]; 2]),
    Piecewise(Vec<(f64, [f64; 3])>),
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    position: [f64; 2],
    color: [f64; 3],
    #[serde(default)]
    du: [f64; 2],
    #[serde(default)]
    dv: [f64; 2],
    #[serde(default)]
    du_color: [f64; 3],
    #[serde(default)]
    dv_color: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMesh {
    rows: usize,
    cols: usize,
    nodes: Vec<RawNode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    left: Option<RawCondition>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDiffusionCurve {
    points: Vec<[f64; 2]>,
    left: RawCondition,
    right: RawCondition,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPoissonCurve {
    points: Vec<[f64; 2]>,
    left: RawProfile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    right: Option<RawProfile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    band_width: Option<f64>,
}

fn pt(a: [f64; 2]) -> Point2 {
    Point2::new(a[0], a[1])
}

fn col(a: [f64; 3]) -> ColorRGB {
    ColorRGB::from_array(a)
}

fn spline(points: &[[f64; 2]], what: &str) -> Result<BezierSpline> {
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("{what}: non-finite control point")));
    }
    let pts: Vec<Point2> = points.iter().copied().map(pt).collect();
    if pts.len() < 4 || !(pts.len() - 1).is_multiple_of(3) {
        return Err(Error::Validation(format!(
            "{what}: control point count must be 3n + 1 with n >= 1, found {}",
            pts.len()
        )));
    }
    BezierSpline::from_points(&pts).map_err(|_| Error::Validation(format!("{what}: all segments have zero length")))
}

fn condition(raw: RawCondition, what: &str) -> Result<BoundaryCondition> {
    match raw {
        RawCondition::Keyword(k) if k == "neumann" => Ok(BoundaryCondition::Neumann),
        RawCondition::Keyword(k) => Err(Error::Validation(format!("{what}: unknown boundary condition `{k}`"))),
        RawCondition::Solid(c) => {
            let c = col(c);
            if !c.is_finite() {
                return Err(Error::Validation(format!("{what}: non-finite color")));
            }
            Ok(BoundaryCondition::solid(c))
        }
        RawCondition::Ramp { ramp } => {
            let stops = ramp.into_iter().map(|(t, c)| (t, col(c))).collect();
            let r = ColorRamp::new(stops).map_err(|e| Error::Validation(format!("{what}: {e}")))?;
            Ok(BoundaryCondition::Dirichlet(ColorCurve::Ramp(r)))
        }
    }
}

fn profile(raw: RawProfile) -> LaplacianProfile {
    match raw {
        RawProfile::Constant(c) => LaplacianProfile::Constant(col(c)),
        RawProfile::Linear([a, b]) => LaplacianProfile::Linear(col(a), col(b)),
        RawProfile::Piecewise(s) => LaplacianProfile::Piecewise(s.into_iter().map(|(t, c)| (t, col(c))).collect()),
    }
}

fn read_raw(text: &str) -> Result<RawScene> {
    serde_json::from_str(text).map_err(|e| Error::Parse { line: e.line(), column: e.column(), message: e.to_string() })
}

/// Zero-length cubic segments in the document, as `(what, segment)`.
/// Scene construction drops these silently.
pub fn zero_length_segments(text: &str) -> Result<Vec<(String, usize)>> {
    let raw = read_raw(text)?;
    let mut out = Vec::new();
    let mut scan = |points: &[[f64; 2]], what: String| {
        let pts: Vec<Point2> = points.iter().copied().map(pt).collect();
        for (k, w) in pts.windows(4).step_by(3).enumerate() {
            if CubicBezier::new(w[0], w[1], w[2], w[3]).is_degenerate() {
                out.push((what.clone(), k));
            }
        }
    };
    for (i, c) in raw.diffusion_curves.iter().enumerate() {
        scan(&c.points, format!("diffusion curve {i}"));
    }
    for (i, c) in raw.poisson_curves.iter().enumerate() {
        scan(&c.points, format!("poisson curve {i}"));
    }
    Ok(out)
}

/// Parses and validates a scene document.
pub fn parse_scene(text: &str) -> Result<Scene> {
    let raw = read_raw(text)?;
    if raw.format != FORMAT_VERSION {
        return Err(Error::Validation(format!("unsupported format version {}", raw.format)));
    }
    let domain = Domain::new(pt(raw.domain.min), pt(raw.domain.max));
    if !(domain.min.is_finite() && domain.max.is_finite() && domain.width() > 0.0 && domain.height() > 0.0) {
        return Err(Error::Validation("domain must have positive area".into()));
    }
    let mut settings = Settings::defaults_for(&domain);
    let s = raw.settings;
    if let Some(v) = s.tau {
        settings.tau = v;
    }
    if let Some(v) = s.epsilon {
        settings.epsilon = v;
    }
    if let Some(v) = s.overlap_mode {
        settings.overlap_mode = v.parse::<OverlapMode>().map_err(Error::Validation)?;
    }
    if let Some(v) = s.iterations {
        settings.iterations = v;
    }
    if let Some(v) = s.multigrid_levels {
        settings.multigrid_levels = v;
    }
    if let Some(v) = s.residual_target {
        settings.residual_target = v;
    }

    let mut meshes = Vec::new();
    for (i, m) in raw.gradient_meshes.into_iter().enumerate() {
        let what = format!("gradient mesh {i}");
        let left = match m.left {
            Some(c) => condition(c, &what)?,
            None => BoundaryCondition::Neumann,
        };
        let nodes = m
            .nodes
            .into_iter()
            .map(|n| MeshNode {
                position: pt(n.position),
                color: col(n.color),
                du: pt(n.du),
                dv: pt(n.dv),
                du_color: col(n.du_color),
                dv_color: col(n.dv_color),
            })
            .collect();
        meshes.push(GradientMesh { rows: m.rows, cols: m.cols, nodes, left });
    }

    let mut diffusion_curves = Vec::new();
    for (i, d) in raw.diffusion_curves.into_iter().enumerate() {
        let what = format!("diffusion curve {i}");
        diffusion_curves.push(DiffusionCurve {
            spline: spline(&d.points, &what)?,
            left: condition(d.left, &what)?,
            right: condition(d.right, &what)?,
        });
    }

    let mut poisson_curves = Vec::new();
    for (i, p) in raw.poisson_curves.into_iter().enumerate() {
        let what = format!("poisson curve {i}");
        let left = profile(p.left);
        let mut curve = PoissonCurve::new(spline(&p.points, &what)?, left, p.band_width.unwrap_or(DEFAULT_BAND_WIDTH));
        if let Some(r) = p.right {
            curve.right_profile = profile(r);
        }
        poisson_curves.push(curve);
    }

    let scene = Scene { domain, settings, meshes, diffusion_curves, poisson_curves };
    scene.validate()?;
    Ok(scene)
}

fn raw_condition(c: &BoundaryCondition) -> Result<RawCondition> {
    match c {
        BoundaryCondition::Neumann => Ok(RawCondition::Keyword("neumann".into())),
        BoundaryCondition::Dirichlet(ColorCurve::Ramp(r)) => {
            Ok(RawCondition::Ramp { ramp: r.stops().iter().map(|(t, c)| (*t, c.to_array())).collect() })
        }
        BoundaryCondition::Dirichlet(ColorCurve::Cubic(_)) => {
            Err(Error::Validation("cubic color curves are derived from meshes and cannot be written".into()))
        }
    }
}

fn raw_profile(p: &LaplacianProfile) -> RawProfile {
    match p {
        LaplacianProfile::Constant(c) => RawProfile::Constant(c.to_array()),
        LaplacianProfile::Linear(a, b) => RawProfile::Linear([a.to_array(), b.to_array()]),
        LaplacianProfile::Piecewise(s) => RawProfile::Piecewise(s.iter().map(|(t, c)| (*t, c.to_array())).collect()),
    }
}

fn raw_points(s: &BezierSpline) -> Vec<[f64; 2]> {
    let mut out = vec![[s.start().x, s.start().y]];
    for seg in s.segments() {
        for p in &seg.b[1..] {
            out.push([p.x, p.y]);
        }
    }
    out
}

/// Writes a scene document that [`parse_scene`] reads back unchanged.
pub fn serialize_scene(scene: &Scene) -> Result<String> {
    let st = &scene.settings;
    let mut meshes = Vec::new();
    for m in &scene.meshes {
        meshes.push(RawMesh {
            rows: m.rows,
            cols: m.cols,
            nodes: m
                .nodes
                .iter()
                .map(|n| RawNode {
                    position: [n.position.x, n.position.y],
                    color: n.color.to_array(),
                    du: [n.du.x, n.du.y],
                    dv: [n.dv.x, n.dv.y],
                    du_color: n.du_color.to_array(),
                    dv_color: n.dv_color.to_array(),
                })
                .collect(),
            left: Some(raw_condition(&m.left)?),
        });
    }
    let mut curves = Vec::new();
    for d in &scene.diffusion_curves {
        curves.push(RawDiffusionCurve {
            points: raw_points(&d.spline),
            left: raw_condition(&d.left)?,
            right: raw_condition(&d.right)?,
        });
    }
    let raw = RawScene {
        format: FORMAT_VERSION,
        domain: RawDomain {
            min: [scene.domain.min.x, scene.domain.min.y],
            max: [scene.domain.max.x, scene.domain.max.y],
        },
        settings: RawSettings {
            tau: Some(st.tau),
            epsilon: Some(st.epsilon),
            overlap_mode: Some(st.overlap_mode.name().to_string()),
            iterations: Some(st.iterations),
            multigrid_levels: Some(st.multigrid_levels),
            residual_target: Some(st.residual_target),
        },
        gradient_meshes: meshes,
        diffusion_curves: curves,
        poisson_curves: scene
            .poisson_curves
            .iter()
            .map(|p| RawPoissonCurve {
                points: raw_points(&p.spline),
                left: raw_profile(&p.left_profile),
                right: None,
                band_width: Some(p.band_width),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&raw).map_err(|e| Error::Validation(e.to_string()))
}
