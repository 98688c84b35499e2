//! End-to-end rendering: scene → edge graph → patches → pixel grids →
//! solved image.

use std::time::{Duration, Instant};

use log::info;

use crate::error::Result;
use crate::geometry::{discretize, BezierSpline, CubicBezier, Point2};
use crate::graph::EdgeGraph;
use crate::mesh::MeshSurface;
use crate::patch::{assemble_patches, patch_laplacian_refs, trace_loops, MeshOutline, PatchSet};
use crate::raster::{
    rasterize_geometry, rasterize_source, solve, BoundaryMode, PixelGrid, RasterGrids, SolveReport, SolverConfig,
};
use crate::scene::{mesh_boundary_curves, BoundaryCondition, CurveSource, Domain, InputBoundaryCurve, Scene};

/// The domain rectangle as four counter-clockwise Neumann lines.
pub fn border_curves(domain: &Domain) -> Vec<InputBoundaryCurve> {
    let c = domain.corners();
    (0..4)
        .map(|k| InputBoundaryCurve {
            spline: BezierSpline::new(vec![CubicBezier::line(c[k], c[(k + 1) % 4])]).expect("domain has positive area"),
            left: BoundaryCondition::Neumann,
            right: BoundaryCondition::Neumann,
            source: CurveSource::Border(k),
        })
        .collect()
}

fn mesh_outline(scene: &Scene, mesh: usize) -> Result<MeshOutline> {
    let mut pts: Vec<Point2> = Vec::new();
    for c in mesh_boundary_curves(&scene.meshes[mesh], mesh, scene.settings.epsilon)? {
        let pl = discretize(&c.spline, scene.settings.epsilon);
        for &p in pl.vertices() {
            if pts.last().is_none_or(|q| q.dist(p) > 0.0) {
                pts.push(p);
            }
        }
    }
    if pts.len() > 1 && pts[0] == *pts.last().unwrap() {
        pts.pop();
    }
    Ok(MeshOutline::new(mesh, pts))
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Timings {
    pub graph: Duration,
    pub patches: Duration,
    pub masks: Duration,
    pub source: Duration,
    pub solve: Duration,
}

impl Timings {
    pub fn total(&self) -> Duration {
        self.graph + self.patches + self.masks + self.source + self.solve
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SceneStats {
    pub diffusion_curves: usize,
    pub poisson_curves: usize,
    pub gradient_meshes: usize,
    pub vertices: usize,
    pub edges: usize,
    pub patches: usize,
}

/// Resolution-independent part of the pipeline.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scene: Scene,
    pub graph: EdgeGraph,
    pub patches: PatchSet,
    pub surfaces: Vec<MeshSurface>,
    pub outlines: Vec<MeshOutline>,
    /// `(mesh, weight)` pairs per patch.
    pub weights: Vec<Vec<(usize, f64)>>,
    pub timings: Timings,
}

pub fn prepare(scene: &Scene) -> Result<Prepared> {
    scene.validate()?;
    let s = &scene.settings;
    let t0 = Instant::now();
    let mut curves = border_curves(&scene.domain);
    curves.extend(scene.boundary_curves()?);
    let graph = EdgeGraph::build(&curves, s.tau, s.epsilon);
    let t1 = Instant::now();
    let outlines = (0..scene.meshes.len()).map(|m| mesh_outline(scene, m)).collect::<Result<Vec<_>>>()?;
    let loops = trace_loops(&graph)?;
    let patches = assemble_patches(&graph, loops, &outlines, s.overlap_mode)?;
    let weights =
        patches.patches.iter().map(|p| patch_laplacian_refs(&graph, &patches, p, &outlines, s.overlap_mode)).collect();
    let surfaces = scene.meshes.iter().map(MeshSurface::new).collect();
    let t2 = Instant::now();
    info!(
        "graph: {} vertices, {} edges; {} patches",
        graph.content_vertex_count(),
        graph.content_edge_count(),
        patches.patches.len()
    );
    Ok(Prepared {
        scene: scene.clone(),
        graph,
        patches,
        surfaces,
        outlines,
        weights,
        timings: Timings { graph: t1 - t0, patches: t2 - t1, ..Default::default() },
    })
}

impl Prepared {
    pub fn stats(&self) -> SceneStats {
        SceneStats {
            diffusion_curves: self.scene.diffusion_curves.len(),
            poisson_curves: self.scene.poisson_curves.len(),
            gradient_meshes: self.scene.meshes.len(),
            vertices: self.graph.content_vertex_count(),
            edges: self.graph.content_edge_count(),
            patches: self.patches.patches.len(),
        }
    }

    /// Masks and source term without solving.
    pub fn rasterize(&self, width: usize, height: usize, timings: &mut Timings) -> Result<RasterGrids> {
        let grid = PixelGrid::new(&self.scene.domain, width, height)?;
        let t0 = Instant::now();
        let mut grids = rasterize_geometry(&self.graph, &self.patches, &self.surfaces, grid);
        let t1 = Instant::now();
        rasterize_source(
            &mut grids,
            &self.surfaces,
            &self.weights,
            &self.scene.poisson_curves,
            self.scene.settings.epsilon,
        );
        timings.masks = t1 - t0;
        timings.source = t1.elapsed();
        Ok(grids)
    }

    pub fn render(&self, width: usize, height: usize, boundary: BoundaryMode) -> Result<Rendered> {
        let mut timings = self.timings;
        let mut grids = self.rasterize(width, height, &mut timings)?;
        let t = Instant::now();
        let cfg = SolverConfig::from_settings(&self.scene.settings, boundary);
        let report = solve(&mut grids, &cfg);
        timings.solve = t.elapsed();
        Ok(Rendered { grids, report, timings })
    }
}

#[derive(Debug, Clone)]
pub struct Rendered {
    pub grids: RasterGrids,
    pub report: SolveReport,
    pub timings: Timings,
}

/// Convenience wrapper for [`prepare`] followed by [`Prepared::render`].
pub fn render_scene(scene: &Scene, width: usize, height: usize, boundary: BoundaryMode) -> Result<Rendered> {
    prepare(scene)?.render(width, height, boundary)
}
