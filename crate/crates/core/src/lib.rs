//! Rasterization of smooth vector graphics that mix gradient meshes,
//! diffusion curves and Poisson curves.
//!
//! The pipeline runs in four stages: input primitives become oriented
//! boundary curves ([`scene`]), the curves are resolved into a planar edge
//! graph ([`graph`]), the graph is traced into patches ([`patch`]) and each
//! patch is rasterized and solved as a Poisson problem ([`raster`]).
//! [`pipeline`] strings them together.

pub mod error;
pub mod format;
pub mod geometry;
pub mod graph;
pub mod mesh;
pub mod patch;
pub mod pipeline;
pub mod raster;
pub mod scene;

pub use error::{Error, Result};
pub use format::{parse_scene, serialize_scene};
pub use geometry::{BezierSpline, CubicBezier, GeomError, Point2, Polyline};
pub use graph::{EdgeGraph, GraphEdge, GraphVertex};
pub use mesh::{FergusonPatch, MeshError, MeshSurface, UV};
pub use patch::{BoundaryLoop, Patch, PatchSet};
pub use pipeline::{prepare, render_scene, Prepared, Rendered, SceneStats, Timings};
pub use raster::{BoundaryMode, PixelGrid, PixelKind, RasterGrids, SolveReport, SolverConfig};
pub use scene::{
    BoundaryCondition, ColorCurve, ColorRGB, ColorRamp, CurveSource, DiffusionCurve, Domain, GradientMesh,
    InputBoundaryCurve, LaplacianProfile, MeshNode, OverlapMode, PoissonCurve, Scene, Settings,
};
