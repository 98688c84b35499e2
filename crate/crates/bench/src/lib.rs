//! Workloads shared by the benchmarks.

use smoothvg_core::geometry::{BezierSpline, Point2};
use smoothvg_core::{parse_scene, BoundaryCondition, ColorRGB, DiffusionCurve, Domain, Scene};

const KAPPA: f64 = 0.552_284_749_830_793_6;

pub fn fixture(name: &str) -> Scene {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(format!("{name}.json"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    parse_scene(&text).expect("fixture parses")
}

pub fn circle(c: Point2, r: f64) -> BezierSpline {
    let k = KAPPA;
    let u = [
        (1.0, 0.0),
        (1.0, k),
        (k, 1.0),
        (0.0, 1.0),
        (-k, 1.0),
        (-1.0, k),
        (-1.0, 0.0),
        (-1.0, -k),
        (-k, -1.0),
        (0.0, -1.0),
        (k, -1.0),
        (1.0, -k),
        (1.0, 0.0),
    ];
    let pts: Vec<Point2> = u.iter().map(|&(x, y)| c + Point2::new(x, y) * r).collect();
    BezierSpline::from_points(&pts).expect("circle is not degenerate")
}

/// `n × n` overlapping circles on the unit square, each crossing its
/// neighbours, with colours varying across the grid.
pub fn circle_grid(n: usize) -> Scene {
    let mut scene = Scene::empty(Domain::new(Point2::new(0.0, 0.0), Point2::new(1.0, 1.0)));
    let step = 1.0 / n as f64;
    for i in 0..n {
        for j in 0..n {
            let c = Point2::new((i as f64 + 0.5) * step, (j as f64 + 0.5) * step);
            let t = (i * n + j) as f64 / (n * n) as f64;
            scene.diffusion_curves.push(DiffusionCurve {
                spline: circle(c, 0.6 * step),
                left: BoundaryCondition::solid(ColorRGB::new(t, 1.0 - t, 0.5)),
                right: BoundaryCondition::solid(ColorRGB::new(0.5 * t, 0.2, 1.0 - t)),
            });
        }
    }
    scene
}
