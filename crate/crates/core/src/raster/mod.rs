//! Pixel grids, boundary masks, source terms and the Poisson solve.
//!
//! Pixel `(i, j)` has its center at `x = xmin + (i + ½)h`,
//! `y = ymax − (j + ½)h`, so row 0 is the top of the image. Neighbouring
//! pixel centers are joined by links; a link is closed when a boundary
//! polyline crosses it, and it remembers the crossing nearest to each end.

mod output;
mod solver;
mod source;

use log::debug;
use rayon::prelude::*;

pub use output::{
    encode_srgb8, write_flags_png, write_graph_png, write_image, write_masks_png, write_patch_map_png, write_pfm,
    write_source_png, ImageFormat,
};
pub use solver::{jacobi_step, solve, BoundaryMode, SolveReport, SolverConfig};
pub use source::{poisson_band_source, rasterize_source};

use crate::error::{Error, Result};
use crate::geometry::{refine_closest_param, GeomError, Point2, Polyline};
use crate::graph::EdgeGraph;
use crate::mesh::MeshSurface;
use crate::patch::PatchSet;
use crate::scene::{BoundaryCondition, ColorRGB, CurveSource, Domain};

pub const NO_PATCH: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelKind {
    Interior,
    Dirichlet,
    Neumann,
    Outside,
}

/// Nearest boundary crossing seen from one end of a link.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkHit {
    /// Distance from the end pixel center in units of `h`.
    pub dist: f64,
    pub edge: u32,
    /// Source curve parameter at the crossing.
    pub t: f64,
    /// The end pixel lies left of the edge.
    pub left: bool,
    /// Prescribed color on the end pixel's side; `None` for Neumann.
    pub value: Option<ColorRGB>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Link {
    pub closed: bool,
    /// Hit nearest the left (horizontal) or upper (vertical) pixel.
    pub low: Option<LinkHit>,
    /// Hit nearest the other pixel.
    pub high: Option<LinkHit>,
}

impl Link {
    pub fn hit_from(&self, low_end: bool) -> Option<LinkHit> {
        if low_end {
            self.low
        } else {
            self.high
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelGrid {
    pub width: usize,
    pub height: usize,
    pub h: f64,
    pub xmin: f64,
    pub ymax: f64,
}

impl PixelGrid {
    /// Square pixels covering the domain exactly.
    pub fn new(domain: &Domain, width: usize, height: usize) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::Config("resolution must be at least 2×2".into()));
        }
        let hx = domain.width() / width as f64;
        let hy = domain.height() / height as f64;
        if (hx - hy).abs() > 1e-9 * hx.max(hy) {
            return Err(Error::Config(format!(
                "resolution {width}×{height} does not give square pixels on a {}×{} domain",
                domain.width(),
                domain.height()
            )));
        }
        Ok(Self { width, height, h: hx, xmin: domain.min.x, ymax: domain.max.y })
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.width, idx / self.width)
    }

    pub fn center(&self, i: usize, j: usize) -> Point2 {
        Point2::new(self.xmin + (i as f64 + 0.5) * self.h, self.ymax - (j as f64 + 0.5) * self.h)
    }

    pub fn center_of(&self, idx: usize) -> Point2 {
        let (i, j) = self.coords(idx);
        self.center(i, j)
    }

    /// Link between `(i, j)` and `(i + 1, j)`.
    pub fn hlink(&self, i: usize, j: usize) -> usize {
        j * (self.width - 1) + i
    }

    /// Link between `(i, j)` and `(i, j + 1)`.
    pub fn vlink(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }
}

/// The four neighbour directions: east, west, down, up.
pub const DIRS: [(i64, i64); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];

#[derive(Debug, Clone)]
pub struct RasterGrids {
    pub grid: PixelGrid,
    pub owner: Vec<u32>,
    pub kind: Vec<PixelKind>,
    pub hlinks: Vec<Link>,
    pub vlinks: Vec<Link>,
    /// Laplacian source per pixel.
    pub source: Vec<ColorRGB>,
    pub color: Vec<ColorRGB>,
    /// Fixed value of Dirichlet pixels.
    pub dirichlet: Vec<ColorRGB>,
}

/// Neighbour of a pixel across one link.
#[derive(Debug, Clone, Copy)]
pub struct Neighbor {
    pub index: usize,
    pub link: Link,
    /// The pixel is the low end of the link.
    pub low_end: bool,
}

impl RasterGrids {
    pub fn empty(grid: PixelGrid) -> Self {
        let n = grid.len();
        Self {
            grid,
            owner: vec![NO_PATCH; n],
            kind: vec![PixelKind::Outside; n],
            hlinks: vec![Link::default(); (grid.width - 1) * grid.height],
            vlinks: vec![Link::default(); grid.width * (grid.height - 1)],
            source: vec![ColorRGB::default(); n],
            color: vec![ColorRGB::default(); n],
            dirichlet: vec![ColorRGB::default(); n],
        }
    }

    /// Neighbour in direction `d` (see [`DIRS`]), `None` at the image edge.
    pub fn neighbor(&self, idx: usize, d: usize) -> Option<Neighbor> {
        let g = &self.grid;
        let (i, j) = g.coords(idx);
        match d {
            0 if i + 1 < g.width => Some(Neighbor { index: idx + 1, link: self.hlinks[g.hlink(i, j)], low_end: true }),
            1 if i > 0 => Some(Neighbor { index: idx - 1, link: self.hlinks[g.hlink(i - 1, j)], low_end: false }),
            2 if j + 1 < g.height => {
                Some(Neighbor { index: idx + g.width, link: self.vlinks[g.vlink(i, j)], low_end: true })
            }
            3 if j > 0 => Some(Neighbor { index: idx - g.width, link: self.vlinks[g.vlink(i, j - 1)], low_end: false }),
            _ => None,
        }
    }
}

fn condition_value(g: &EdgeGraph, edge: usize, t: f64, left: bool) -> Option<ColorRGB> {
    let c = g.curve(&g.edges[edge]);
    let cond = if left { &c.left } else { &c.right };
    match cond {
        BoundaryCondition::Neumann => None,
        BoundaryCondition::Dirichlet(_) => cond.color(t, c.spline.len()),
    }
}

fn better(new: &LinkHit, old: &Option<LinkHit>) -> bool {
    match old {
        None => true,
        Some(o) => new.dist < o.dist || (new.dist == o.dist && new.edge < o.edge),
    }
}

/// Marks every link crossed by an edge polyline and records the nearest
/// crossing from each end.
pub fn build_links(graph: &EdgeGraph, grids: &mut RasterGrids) {
    let g = grids.grid;
    for e in &graph.edges {
        let pl = &e.polyline;
        for s in 0..pl.segment_count() {
            let (a, b) = pl.segment(s);
            let dir = b - a;
            // horizontal links: rows whose center line the segment crosses
            if a.y != b.y {
                let (lo, hi) = (a.y.min(b.y), a.y.max(b.y));
                let j0 = (((g.ymax - hi) / g.h) - 0.5).floor().max(0.0) as usize;
                let j1 = ((((g.ymax - lo) / g.h) - 0.5).ceil().max(0.0) as usize).min(g.height - 1);
                for j in j0..=j1 {
                    let yc = g.ymax - (j as f64 + 0.5) * g.h;
                    if (a.y > yc) == (b.y > yc) {
                        continue;
                    }
                    let f = (yc - a.y) / (b.y - a.y);
                    let x = a.x + f * dir.x;
                    let u = (x - g.xmin) / g.h - 0.5;
                    let i = u.floor();
                    if i < 0.0 || i >= (g.width - 1) as f64 {
                        continue;
                    }
                    let i = i as usize;
                    let frac = u - i as f64;
                    let p = Point2::new(x, yc);
                    let t = exact_param(graph, e.curve, pl, s, f, p);
                    let li = g.hlink(i, j);
                    record(graph, &mut grids.hlinks[li], e.id, t, p, dir, g.center(i, j), g.center(i + 1, j), frac);
                }
            }
            if a.x != b.x {
                let (lo, hi) = (a.x.min(b.x), a.x.max(b.x));
                let i0 = (((lo - g.xmin) / g.h) - 0.5).floor().max(0.0) as usize;
                let i1 = ((((hi - g.xmin) / g.h) - 0.5).ceil().max(0.0) as usize).min(g.width - 1);
                for i in i0..=i1 {
                    let xc = g.xmin + (i as f64 + 0.5) * g.h;
                    if (a.x > xc) == (b.x > xc) {
                        continue;
                    }
                    let f = (xc - a.x) / (b.x - a.x);
                    let y = a.y + f * dir.y;
                    let v = (g.ymax - y) / g.h - 0.5;
                    let j = v.floor();
                    if j < 0.0 || j >= (g.height - 1) as f64 {
                        continue;
                    }
                    let j = j as usize;
                    let frac = v - j as f64;
                    let p = Point2::new(xc, y);
                    let t = exact_param(graph, e.curve, pl, s, f, p);
                    let li = g.vlink(i, j);
                    record(graph, &mut grids.vlinks[li], e.id, t, p, dir, g.center(i, j), g.center(i, j + 1), frac);
                }
            }
        }
    }
}

/// Curve parameter of a point on polyline segment `s`, projected onto the
/// exact curve so boundary colors are sampled where the crossing lies.
fn exact_param(graph: &EdgeGraph, curve: usize, pl: &Polyline, s: usize, f: f64, p: Point2) -> f64 {
    let (lo, hi) = (pl.params()[s], pl.params()[s + 1]);
    refine_closest_param(&graph.curves[curve].spline, p, pl.param_at(s, f), lo.min(hi), lo.max(hi))
}

#[allow(clippy::too_many_arguments)]
fn record(
    graph: &EdgeGraph,
    link: &mut Link,
    edge: usize,
    t: f64,
    p: Point2,
    dir: Point2,
    low: Point2,
    high: Point2,
    frac: f64,
) {
    link.closed = true;
    let low_left = dir.cross(low - p) > 0.0;
    let high_left = dir.cross(high - p) > 0.0;
    let lo =
        LinkHit { dist: frac, edge: edge as u32, t, left: low_left, value: condition_value(graph, edge, t, low_left) };
    let hi = LinkHit {
        dist: 1.0 - frac,
        edge: edge as u32,
        t,
        left: high_left,
        value: condition_value(graph, edge, t, high_left),
    };
    if better(&lo, &link.low) {
        link.low = Some(lo);
    }
    if better(&hi, &link.high) {
        link.high = Some(hi);
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[parent[x as usize] as usize];
        parent[x as usize] = p;
        x = p;
    }
    x
}

/// Assigns each pixel to the patch containing its center. Pixels joined by
/// open links always share a patch, so one containment test per connected
/// group suffices.
pub fn assign_owners(patches: &PatchSet, grids: &mut RasterGrids) {
    let g = grids.grid;
    let n = g.len();
    let mut parent: Vec<u32> = (0..n as u32).collect();
    for j in 0..g.height {
        for i in 0..g.width {
            let idx = g.index(i, j);
            if i + 1 < g.width && !grids.hlinks[g.hlink(i, j)].closed {
                union(&mut parent, idx as u32, (idx + 1) as u32);
            }
            if j + 1 < g.height && !grids.vlinks[g.vlink(i, j)].closed {
                union(&mut parent, idx as u32, (idx + g.width) as u32);
            }
        }
    }
    let mut groups: std::collections::BTreeMap<u32, Vec<usize>> = std::collections::BTreeMap::new();
    for idx in 0..n {
        let r = find(&mut parent, idx as u32);
        groups.entry(r).or_default().push(idx);
    }
    let members: Vec<Vec<usize>> = groups.into_values().collect();
    let owners: Vec<u32> = members.par_iter().map(|m| locate_group(patches, &g, m)).collect();
    for (m, o) in members.iter().zip(owners) {
        for &idx in m {
            grids.owner[idx] = o;
        }
    }
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let ra = find(parent, a);
    let rb = find(parent, b);
    if ra != rb {
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
    }
}

fn locate_group(patches: &PatchSet, g: &PixelGrid, members: &[usize]) -> u32 {
    for &idx in members.iter().take(64) {
        match patches.locate(g.center_of(idx)) {
            Ok(Some(p)) => return p as u32,
            Ok(None) => return NO_PATCH,
            Err(GeomError::OnBoundary) => continue,
            Err(_) => continue,
        }
    }
    let c = g.center_of(members[0]);
    for off in [Point2::new(0.5, 0.0), Point2::new(0.0, 0.5), Point2::new(-0.5, 0.0), Point2::new(0.0, -0.5)] {
        if let Ok(Some(p)) = patches.locate(c + off * g.h) {
            return p as u32;
        }
    }
    NO_PATCH
}

/// Classifies pixels. Interior pixels have four open links; every other
/// pixel takes its type from the nearest boundary: the closest link
/// crossing, or the image border half a pixel away.
pub fn rasterize_masks(graph: &EdgeGraph, surfaces: &[MeshSurface], grids: &mut RasterGrids) {
    let g = grids.grid;
    let results: Vec<(PixelKind, ColorRGB)> =
        (0..g.len()).into_par_iter().map(|idx| classify(graph, surfaces, grids, idx)).collect();
    for (idx, (k, c)) in results.into_iter().enumerate() {
        grids.kind[idx] = k;
        grids.dirichlet[idx] = c;
    }
}

fn classify(graph: &EdgeGraph, surfaces: &[MeshSurface], grids: &RasterGrids, idx: usize) -> (PixelKind, ColorRGB) {
    if grids.owner[idx] == NO_PATCH {
        return (PixelKind::Outside, ColorRGB::default());
    }
    let mut nearest: Option<(f64, u32, Option<LinkHit>)> = None;
    let mut interior = true;
    for d in 0..4 {
        match grids.neighbor(idx, d) {
            None => {
                interior = false;
                let cand = (0.5, u32::MAX, None);
                if nearest.is_none_or(|n| (cand.0, cand.1) < (n.0, n.1)) {
                    nearest = Some(cand);
                }
            }
            Some(nb) => {
                if nb.link.closed || grids.owner[nb.index] != grids.owner[idx] {
                    interior = false;
                }
                if let Some(hit) = nb.link.hit_from(nb.low_end) {
                    let cand = (hit.dist, hit.edge, Some(hit));
                    if nearest.is_none_or(|n| (cand.0, cand.1) < (n.0, n.1)) {
                        nearest = Some(cand);
                    }
                }
            }
        }
    }
    if interior {
        return (PixelKind::Interior, ColorRGB::default());
    }
    match nearest.and_then(|n| n.2) {
        Some(hit) => match hit.value {
            None => (PixelKind::Neumann, ColorRGB::default()),
            Some(v) => {
                let e = &graph.edges[hit.edge as usize];
                let from_mesh = match graph.source(e) {
                    // the right side faces into the mesh
                    CurveSource::Mesh { mesh, .. } => {
                        if !hit.left {
                            surfaces.get(mesh).and_then(|s| s.color_at(grids.grid.center_of(idx)).ok())
                        } else {
                            None
                        }
                    }
                    _ => None,
                };
                (PixelKind::Dirichlet, from_mesh.unwrap_or(v))
            }
        },
        None => (PixelKind::Neumann, ColorRGB::default()),
    }
}

/// Builds links, owners and masks in one go.
pub fn rasterize_geometry(
    graph: &EdgeGraph,
    patches: &PatchSet,
    surfaces: &[MeshSurface],
    grid: PixelGrid,
) -> RasterGrids {
    let mut grids = RasterGrids::empty(grid);
    build_links(graph, &mut grids);
    assign_owners(patches, &mut grids);
    rasterize_masks(graph, surfaces, &mut grids);
    let outside = grids.owner.iter().filter(|&&o| o == NO_PATCH).count();
    if outside > 0 {
        debug!("{outside} pixels are not covered by any patch");
    }
    grids
}
