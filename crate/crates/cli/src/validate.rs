//! Scene diagnostics: geometry that renders but probably does not do what
//! the author meant.

use std::fmt;

use smoothvg_core::format::zero_length_segments;
use smoothvg_core::geometry::{closest_point, discretize};
use smoothvg_core::pipeline::border_curves;
use smoothvg_core::{CurveSource, EdgeGraph, InputBoundaryCurve, Point2, Result, Scene};

#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostic {
    /// Two open curve ends close enough to look connected but not merged.
    NearMissEndpoints {
        a: (CurveSource, Point2),
        b: (CurveSource, Point2),
        distance: f64,
    },
    /// A curve end that stops just short of another curve.
    NearMissCurve {
        end: (CurveSource, Point2),
        curve: CurveSource,
        distance: f64,
    },
    ZeroLengthSegment {
        what: String,
        segment: usize,
    },
    Graph(String),
}

struct Src(CurveSource);

impl fmt::Display for Src {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            CurveSource::Diffusion(i) => write!(f, "diffusion curve {i}"),
            CurveSource::Mesh { mesh, edge } => write!(f, "mesh {mesh} boundary {edge}"),
            CurveSource::Border(k) => write!(f, "domain border {}", ["bottom", "right", "top", "left"][k % 4]),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::NearMissEndpoints { a, b, distance } => write!(
                f,
                "near-miss endpoints: {} at ({}, {}) and {} at ({}, {}) are {distance:.4} apart; color may leak through the gap",
                Src(a.0),
                a.1.x,
                a.1.y,
                Src(b.0),
                b.1.x,
                b.1.y
            ),
            Diagnostic::NearMissCurve { end, curve, distance } => write!(
                f,
                "near-miss endpoint: {} at ({}, {}) stops {distance:.4} short of {}; color may leak through the gap",
                Src(end.0),
                end.1.x,
                end.1.y,
                Src(*curve)
            ),
            Diagnostic::ZeroLengthSegment { what, segment } => {
                write!(f, "{what}: segment {segment} has zero length and is ignored")
            }
            Diagnostic::Graph(m) => write!(f, "{m}"),
        }
    }
}

/// Distance below which a gap is reported. Snapping closes gaps up to
/// `√τ`; the window is twice that, but never narrower than 5% of the
/// smaller domain side so that `τ = 0` still flags visible gaps.
pub fn near_miss_window(scene: &Scene) -> f64 {
    (2.0 * scene.settings.tau.max(0.0).sqrt()).max(0.05 * scene.domain.min_extent())
}

/// Runs every check. Hard errors such as folded meshes come back as `Err`.
pub fn diagnose(scene: &Scene, text: &str) -> Result<Vec<Diagnostic>> {
    let mut curves = border_curves(&scene.domain);
    curves.extend(scene.boundary_curves()?);
    let mut out = near_misses(scene, &curves);
    for (what, segment) in zero_length_segments(text)? {
        out.push(Diagnostic::ZeroLengthSegment { what, segment });
    }
    let graph = EdgeGraph::build(&curves, scene.settings.tau, scene.settings.epsilon);
    out.extend(graph.warnings.into_iter().map(Diagnostic::Graph));
    Ok(out)
}

fn near_misses(scene: &Scene, curves: &[InputBoundaryCurve]) -> Vec<Diagnostic> {
    let snap = scene.settings.tau.max(0.0).sqrt();
    let window = near_miss_window(scene);
    let gap = |d: f64| d > snap && d > 0.0 && d <= window;

    let ends: Vec<(usize, Point2)> = curves
        .iter()
        .enumerate()
        .filter(|(_, c)| !c.spline.is_closed())
        .flat_map(|(i, c)| [(i, c.spline.start()), (i, c.spline.end())])
        .collect();
    let mut out = Vec::new();
    for (k, &(ci, p)) in ends.iter().enumerate() {
        for &(cj, q) in &ends[k + 1..] {
            let d = p.dist(q);
            if gap(d) {
                out.push(Diagnostic::NearMissEndpoints {
                    a: (curves[ci].source, p),
                    b: (curves[cj].source, q),
                    distance: d,
                });
            }
        }
    }

    let polylines: Vec<_> = curves.iter().map(|c| discretize(&c.spline, scene.settings.epsilon)).collect();
    for &(ci, p) in &ends {
        for (cj, pl) in polylines.iter().enumerate() {
            if cj == ci {
                continue;
            }
            let c = closest_point(pl, p);
            // ends of open curves are covered by the endpoint pairs
            let near_end = !curves[cj].spline.is_closed()
                && (c.point.dist(pl.first()) <= window || c.point.dist(pl.last()) <= window);
            if gap(c.distance) && !near_end {
                out.push(Diagnostic::NearMissCurve {
                    end: (curves[ci].source, p),
                    curve: curves[cj].source,
                    distance: c.distance,
                });
            }
        }
    }
    out
}
