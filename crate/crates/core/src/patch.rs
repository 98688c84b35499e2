//! Patch extraction from the edge graph.
//!
//! Every edge is walked once in each direction. At each vertex the walk
//! takes the sharpest right turn, so the region to the right of the walk
//! is a single face. Loops that rotate clockwise bound a patch; loops that
//! rotate counterclockwise are the outside of a connected component and
//! become holes of the smallest patch around them.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::geometry::{
    point_segment_distance, signed_area, turn_angle, winding_angle_points, Aabb, GeomError, Point2, GEOM_TOL,
};
use crate::graph::EdgeGraph;
use crate::scene::{BoundaryCondition, CurveSource, OverlapMode};

/// An edge walked in one direction; the patch lies on its right.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchBoundaryCurve {
    pub edge: usize,
    /// Walk direction agrees with the source curve orientation.
    pub forward: bool,
    pub condition: BoundaryCondition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryLoop {
    pub curves: Vec<PatchBoundaryCurve>,
    /// Vertex each curve departs from.
    pub vertices: Vec<usize>,
    pub turning: i32,
    /// Closed outline; the first point is not repeated at the end.
    pub points: Vec<Point2>,
    pub bounds: Aabb,
}

impl BoundaryLoop {
    pub fn edge_ids(&self) -> Vec<usize> {
        self.curves.iter().map(|c| c.edge).collect()
    }

    pub fn winding(&self, p: Point2) -> std::result::Result<f64, GeomError> {
        if !self.bounds.expanded(GEOM_TOL).contains(p) {
            return Ok(0.0);
        }
        winding_angle_points(self.points.iter().copied(), p)
    }

    pub fn distance(&self, p: Point2) -> f64 {
        let n = self.points.len();
        (0..n)
            .map(|i| point_segment_distance(p, self.points[i], self.points[(i + 1) % n]))
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Dart {
    edge: usize,
    forward: bool,
}

impl Dart {
    fn index(self) -> usize {
        2 * self.edge + usize::from(!self.forward)
    }
}

fn origin(g: &EdgeGraph, d: Dart) -> usize {
    let e = &g.edges[d.edge];
    if d.forward {
        e.start
    } else {
        e.end
    }
}

fn target(g: &EdgeGraph, d: Dart) -> usize {
    let e = &g.edges[d.edge];
    if d.forward {
        e.end
    } else {
        e.start
    }
}

/// Polyline points of a dart in walk order.
fn dart_points(g: &EdgeGraph, d: Dart) -> Vec<Point2> {
    let v = g.edges[d.edge].polyline.vertices();
    if d.forward {
        v.to_vec()
    } else {
        v.iter().rev().copied().collect()
    }
}

/// First and last non-degenerate chord directions of a dart.
fn dart_directions(g: &EdgeGraph, d: Dart) -> (Point2, Point2) {
    let pts = dart_points(g, d);
    let first = pts.windows(2).map(|w| w[1] - w[0]).find(|v| v.norm() > 0.0);
    let last = pts.windows(2).rev().map(|w| w[1] - w[0]).find(|v| v.norm() > 0.0);
    (first.unwrap_or(Point2::new(1.0, 0.0)), last.unwrap_or(Point2::new(1.0, 0.0)))
}

/// Counterclockwise angle in `(0, 2π]` from `from` to `to`.
fn ccw_angle(from: Point2, to: Point2) -> f64 {
    let a = from.cross(to).atan2(from.dot(to));
    if a <= 0.0 {
        a + 2.0 * PI
    } else {
        a
    }
}

/// Departing darts per vertex.
fn outgoing(g: &EdgeGraph) -> Vec<Vec<Dart>> {
    let mut out = vec![Vec::new(); g.vertices.len()];
    for e in &g.edges {
        out[e.start].push(Dart { edge: e.id, forward: true });
        out[e.end].push(Dart { edge: e.id, forward: false });
    }
    out
}

/// The right-most continuation after arriving along `arrive`.
fn next_dart(g: &EdgeGraph, out: &[Vec<Dart>], arrive: Dart) -> Dart {
    let v = target(g, arrive);
    let a = dart_directions(g, arrive).1;
    let back = -a;
    let twin = Dart { edge: arrive.edge, forward: !arrive.forward };
    let mut best: Option<(f64, bool, usize, bool, Dart)> = None;
    for &d in &out[v] {
        let o = dart_directions(g, d).0;
        let alpha = if d == twin { 2.0 * PI } else { ccw_angle(back, o) };
        // ties: twin last, then edge id, forward first
        let key = (alpha, d == twin, d.edge, !d.forward, d);
        let better = match &best {
            None => true,
            Some(b) => {
                (key.0, key.1, key.2, key.3).partial_cmp(&(b.0, b.1, b.2, b.3)) == Some(std::cmp::Ordering::Less)
            }
        };
        if better {
            best = Some(key);
        }
    }
    best.map(|b| b.4).unwrap_or(twin)
}

fn condition_for(g: &EdgeGraph, d: Dart) -> BoundaryCondition {
    let c = g.curve(&g.edges[d.edge]);
    if d.forward {
        c.right.clone()
    } else {
        c.left.clone()
    }
}

/// Turning number of a closed direction sequence: the sum of signed turns
/// divided by 2π. An exact reversal turns by +π.
fn turning_of(points: &[Point2]) -> i32 {
    let n = points.len();
    if n < 2 {
        return 0;
    }
    let dirs: Vec<Point2> = (0..n).map(|i| points[(i + 1) % n] - points[i]).filter(|d| d.norm() > 0.0).collect();
    let m = dirs.len();
    let total: f64 = (0..m).map(|i| turn_angle(dirs[i], dirs[(i + 1) % m])).sum();
    (total / (2.0 * PI)).round() as i32
}

/// Turning number of a traced loop.
pub fn turning_number(l: &BoundaryLoop) -> i32 {
    turning_of(&l.points)
}

/// Walks every dart once, always turning right.
pub fn trace_loops(g: &EdgeGraph) -> Result<Vec<BoundaryLoop>> {
    let out = outgoing(g);
    let mut used = vec![false; 2 * g.edges.len()];
    let mut loops = Vec::new();
    for eid in 0..g.edges.len() {
        for forward in [true, false] {
            let start = Dart { edge: eid, forward };
            if used[start.index()] {
                continue;
            }
            let mut darts = Vec::new();
            let mut cur = start;
            loop {
                used[cur.index()] = true;
                darts.push(cur);
                let next = next_dart(g, &out, cur);
                if next == start {
                    break;
                }
                if used[next.index()] {
                    return Err(Error::TraversalStuck {
                        vertex: target(g, cur),
                        detail: format!(
                            "dart on edge {} ({}) was already walked",
                            next.edge,
                            if next.forward { "forward" } else { "backward" }
                        ),
                    });
                }
                cur = next;
            }
            loops.push(make_loop(g, &darts));
        }
    }
    Ok(loops)
}

fn make_loop(g: &EdgeGraph, darts: &[Dart]) -> BoundaryLoop {
    let mut points = Vec::new();
    for &d in darts {
        let pts = dart_points(g, d);
        points.extend_from_slice(&pts[..pts.len() - 1]);
    }
    let bounds = Aabb::from_points(points.iter().copied());
    let mut l = BoundaryLoop {
        curves: darts
            .iter()
            .map(|&d| PatchBoundaryCurve { edge: d.edge, forward: d.forward, condition: condition_for(g, d) })
            .collect(),
        vertices: darts.iter().map(|&d| origin(g, d)).collect(),
        turning: 0,
        points,
        bounds,
    };
    l.turning = turning_number(&l);
    l
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub id: usize,
    /// Loop indices; the first is the outer boundary, the rest are holes.
    pub loops: Vec<usize>,
    /// A point strictly inside the patch.
    pub sample: Point2,
    /// Gradient meshes contributing to the source, with weights.
    pub meshes: Vec<(usize, f64)>,
    pub area: f64,
}

/// Closed outline of a gradient mesh, used for overlap tests.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshOutline {
    pub mesh: usize,
    pub points: Vec<Point2>,
    pub bounds: Aabb,
}

impl MeshOutline {
    pub fn new(mesh: usize, points: Vec<Point2>) -> Self {
        let bounds = Aabb::from_points(points.iter().copied());
        Self { mesh, points, bounds }
    }

    pub fn contains(&self, p: Point2) -> bool {
        if !self.bounds.contains(p) {
            return false;
        }
        winding_angle_points(self.points.iter().copied(), p).map_or(true, |a| a.abs() > PI)
    }
}

#[derive(Debug, Clone)]
pub struct PatchSet {
    pub loops: Vec<BoundaryLoop>,
    pub patches: Vec<Patch>,
    /// Positive loops with no enclosing patch, e.g. the outside of the
    /// domain border.
    pub unassigned: Vec<usize>,
}

impl PatchSet {
    /// Total winding angle of a patch's loops around `p`.
    pub fn winding(&self, patch: &Patch, p: Point2) -> std::result::Result<f64, GeomError> {
        let mut total = 0.0;
        for &l in &patch.loops {
            total += self.loops[l].winding(p)?;
        }
        Ok(total)
    }

    pub fn contains(&self, patch: &Patch, p: Point2) -> std::result::Result<bool, GeomError> {
        Ok(self.winding(patch, p)?.abs() > PI)
    }

    /// Patch whose region contains `p`.
    pub fn locate(&self, p: Point2) -> std::result::Result<Option<usize>, GeomError> {
        for patch in &self.patches {
            if self.contains(patch, p)? {
                return Ok(Some(patch.id));
            }
        }
        Ok(None)
    }

    pub fn dump_text(&self, g: &EdgeGraph) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "patches {}", self.patches.len());
        for p in &self.patches {
            let w: Vec<String> = p.meshes.iter().map(|(m, l)| format!("mesh {m}: {l}")).collect();
            let _ = writeln!(
                s,
                "p{} sample ({:.6}, {:.6}) area {:.6} weights [{}]",
                p.id,
                p.sample.x,
                p.sample.y,
                p.area,
                w.join(", ")
            );
            for &li in &p.loops {
                let l = &self.loops[li];
                let _ = writeln!(s, "  loop {li} turning {}", l.turning);
                for c in &l.curves {
                    let cond = match &c.condition {
                        BoundaryCondition::Neumann => "neumann".to_string(),
                        BoundaryCondition::Dirichlet(_) => "dirichlet".to_string(),
                    };
                    let _ = writeln!(
                        s,
                        "    e{} {} {:?} {}",
                        c.edge,
                        if c.forward { "fwd" } else { "bwd" },
                        g.source(&g.edges[c.edge]),
                        cond
                    );
                }
            }
        }
        s
    }
}

fn loop_component(comps: &[usize], l: &BoundaryLoop) -> usize {
    l.vertices.first().map(|&v| comps[v]).unwrap_or(usize::MAX)
}

/// Groups traced loops into patches and computes mesh weights.
pub fn assemble_patches(
    g: &EdgeGraph,
    loops: Vec<BoundaryLoop>,
    outlines: &[MeshOutline],
    mode: OverlapMode,
) -> Result<PatchSet> {
    let comps = g.components();
    let mut patches: Vec<Patch> = Vec::new();
    for (i, l) in loops.iter().enumerate() {
        if l.turning <= -1 {
            patches.push(Patch {
                id: patches.len(),
                loops: vec![i],
                sample: Point2::default(),
                meshes: Vec::new(),
                area: signed_area(&l.points).abs(),
            });
        }
    }
    let mut unassigned = Vec::new();
    for (i, l) in loops.iter().enumerate() {
        if l.turning <= -1 {
            continue;
        }
        let comp = loop_component(&comps, l);
        let probe = l.points.first().copied().unwrap_or_default();
        let mut best: Option<(f64, usize, usize)> = None;
        let mut hits: Vec<(usize, usize)> = Vec::new();
        for p in &patches {
            let outer = &loops[p.loops[0]];
            let oc = loop_component(&comps, outer);
            if oc == comp || !outer.bounds.contains(probe) {
                continue;
            }
            let inside = outer.winding(probe).map(|a| a.abs() > PI).unwrap_or(false);
            if !inside {
                continue;
            }
            hits.push((p.id, oc));
            if best.is_none_or(|(a, _, _)| p.area < a) {
                best = Some((p.area, p.id, oc));
            }
        }
        if let Some((_, pid, oc)) = best {
            let rivals: Vec<usize> = hits.iter().filter(|(q, c)| *c == oc && *q != pid).map(|(q, _)| *q).collect();
            if !rivals.is_empty() {
                return Err(Error::ContainmentAmbiguity(format!(
                    "loop {i} lies inside patches {pid} and {:?} of the same component",
                    rivals
                )));
            }
            patches[pid].loops.push(i);
        } else {
            unassigned.push(i);
        }
    }
    let mut set = PatchSet { loops, patches, unassigned };
    for k in 0..set.patches.len() {
        let sample = sample_point(&set, &set.patches[k]);
        set.patches[k].sample = sample;
    }
    for k in 0..set.patches.len() {
        let meshes = patch_laplacian_refs(g, &set, &set.patches[k], outlines, mode);
        set.patches[k].meshes = meshes;
    }
    Ok(set)
}

/// An interior point, chosen among small offsets to the right of the outer
/// boundary as the one farthest from every loop.
fn sample_point(set: &PatchSet, patch: &Patch) -> Point2 {
    let outer = &set.loops[patch.loops[0]];
    let n = outer.points.len();
    let step = (n / 48).max(1);
    let scale = outer.bounds.diagonal().max(1e-12);
    let mut best: Option<(f64, Point2)> = None;
    for i in (0..n).step_by(step) {
        let a = outer.points[i];
        let b = outer.points[(i + 1) % n];
        let d = b - a;
        if d.norm() == 0.0 {
            continue;
        }
        let normal = (d / d.norm()).rot_cw();
        let mid = a.lerp(b, 0.5);
        for f in [1e-4, 1e-3, 1e-2, 5e-2, 0.2] {
            let q = mid + normal * (f * scale);
            if !matches!(set.contains(patch, q), Ok(true)) {
                continue;
            }
            let clearance = patch.loops.iter().map(|&l| set.loops[l].distance(q)).fold(f64::INFINITY, f64::min);
            if best.is_none_or(|(c, _)| clearance > c) {
                best = Some((clearance, q));
            }
        }
    }
    best.map(|b| b.1).unwrap_or_else(|| outer.points.first().copied().unwrap_or_default())
}

/// Meshes overlapping a patch and their source weights. A mesh overlaps
/// when the patch sample lies inside its outline or the patch borders the
/// mesh from the inside.
pub fn patch_laplacian_refs(
    g: &EdgeGraph,
    set: &PatchSet,
    patch: &Patch,
    outlines: &[MeshOutline],
    mode: OverlapMode,
) -> Vec<(usize, f64)> {
    let mut ids: Vec<usize> = Vec::new();
    for o in outlines {
        if o.contains(patch.sample) {
            ids.push(o.mesh);
        }
    }
    for &li in &patch.loops {
        for c in &set.loops[li].curves {
            if let CurveSource::Mesh { mesh, .. } = g.source(&g.edges[c.edge]) {
                if c.forward && !ids.contains(&mesh) {
                    ids.push(mesh);
                }
            }
        }
    }
    ids.sort_unstable();
    ids.dedup();
    overlap_weights(&ids, mode)
}

/// Weights for `n` overlapping meshes listed bottom to top.
pub fn overlap_weights(ids: &[usize], mode: OverlapMode) -> Vec<(usize, f64)> {
    let n = ids.len();
    let top = ids.iter().copied().max();
    ids.iter()
        .map(|&m| {
            let w = match mode {
                OverlapMode::Zero => 0.0,
                OverlapMode::Sum => 1.0,
                OverlapMode::Average => 1.0 / n as f64,
                OverlapMode::First => {
                    if Some(m) == top {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
            (m, w)
        })
        .collect()
}
