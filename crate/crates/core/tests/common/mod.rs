#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use smoothvg_core::geometry::{BezierSpline, Point2};
use smoothvg_core::mesh::{FergusonPatch, UV};
use smoothvg_core::scene::{mesh_boundary_curves, mesh_patch, BoundaryCondition, ColorRGB, GradientMesh, MeshNode};

pub const KAPPA: f64 = 0.552_284_749_830_793_6;

/// Four-segment counter-clockwise circle starting at angle 0.
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
    BezierSpline::from_points(&pts).unwrap()
}

fn jitter(rng: &mut ChaCha8Rng, a: f64) -> f64 {
    rng.gen_range(-a..a)
}

fn rand_color(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> ColorRGB {
    ColorRGB::new(rng.gen_range(lo..hi), rng.gen_range(lo..hi), rng.gen_range(lo..hi))
}

/// A 1×1 mesh over roughly `origin + [0, size]²` with jittered corners,
/// handles and colors. Retries until the patch is fold-free.
pub fn random_patch_mesh(rng: &mut ChaCha8Rng, origin: Point2, size: f64) -> GradientMesh {
    loop {
        let mut nodes = Vec::new();
        for i in 0..2 {
            for j in 0..2 {
                let p = origin + Point2::new(j as f64 + jitter(rng, 0.1), i as f64 + jitter(rng, 0.1)) * size;
                nodes.push(MeshNode {
                    position: p,
                    color: rand_color(rng, 0.2, 0.8),
                    du: Point2::new(1.0 + jitter(rng, 0.25), jitter(rng, 0.25)) * size,
                    dv: Point2::new(jitter(rng, 0.25), 1.0 + jitter(rng, 0.25)) * size,
                    du_color: rand_color(rng, -0.6, 0.6),
                    dv_color: rand_color(rng, -0.6, 0.6),
                });
            }
        }
        let mesh = GradientMesh { rows: 1, cols: 1, nodes, left: BoundaryCondition::Neumann };
        if fold_free(&mesh_patch(&mesh, 0, 0)) && mesh_boundary_curves(&mesh, 0, 1e-3).is_ok() {
            return mesh;
        }
    }
}

pub fn fold_free(p: &FergusonPatch) -> bool {
    let mut sign = 0.0;
    for a in 0..=40 {
        for b in 0..=40 {
            let d = p.jacobian_det(UV { u: a as f64 / 40.0, v: b as f64 / 40.0 });
            if sign == 0.0 {
                sign = d.signum();
            }
            if d * sign < 1e-2 * (p.bounds().diagonal() * p.bounds().diagonal()) {
                return false;
            }
        }
    }
    true
}
