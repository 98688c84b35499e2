//! Planar edge graph built from oriented boundary curves.
//!
//! Curves are discretized to polylines and inserted one at a time. Each new
//! curve's end points are merged into nearby vertices or snapped onto nearby
//! edges, then the curve is split against itself and every committed edge
//! until no interior crossings remain. Vertices sit exactly on the polyline
//! crossing points, so the polyline arrangement is planar by construction.

use std::fmt::Write as _;

use log::warn;

use crate::geometry::{
    closest_point, intersect_polylines, self_intersections, Aabb, BezierSpline, Point2, Polyline, PolylineHit, GEOM_TOL,
};
use crate::scene::{CurveSource, InputBoundaryCurve};

const MAX_SPLITS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeEnd {
    Start,
    End,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphVertex {
    pub id: usize,
    pub position: Point2,
    /// Incident edge ends in edge id order. A loop edge appears twice.
    pub incident: Vec<(usize, EdgeEnd)>,
}

impl GraphVertex {
    pub fn valence(&self) -> usize {
        self.incident.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphEdge {
    pub id: usize,
    pub start: usize,
    pub end: usize,
    /// Index into [`EdgeGraph::curves`].
    pub curve: usize,
    /// Parameter window on the source spline.
    pub t0: f64,
    pub t1: f64,
    pub polyline: Polyline,
}

impl GraphEdge {
    pub fn is_loop(&self) -> bool {
        self.start == self.end
    }
}

#[derive(Debug, Clone)]
pub struct EdgeGraph {
    pub vertices: Vec<GraphVertex>,
    pub edges: Vec<GraphEdge>,
    pub curves: Vec<InputBoundaryCurve>,
    /// Squared merge and snap distance.
    pub tau: f64,
    pub epsilon: f64,
    pub warnings: Vec<String>,
}

struct Piece {
    poly: Polyline,
    start: usize,
    end: usize,
}

impl EdgeGraph {
    pub fn new(tau: f64, epsilon: f64) -> Self {
        Self { vertices: Vec::new(), edges: Vec::new(), curves: Vec::new(), tau, epsilon, warnings: Vec::new() }
    }

    /// Inserts all curves in order and finalizes the vertex incidence lists.
    pub fn build(curves: &[InputBoundaryCurve], tau: f64, epsilon: f64) -> Self {
        let mut g = Self::new(tau, epsilon);
        for c in curves {
            g.insert_curve(c.clone());
        }
        g.finish();
        g
    }

    pub fn curve(&self, edge: &GraphEdge) -> &InputBoundaryCurve {
        &self.curves[edge.curve]
    }

    pub fn source(&self, edge: &GraphEdge) -> CurveSource {
        self.curves[edge.curve].source
    }

    pub fn is_border(&self, edge: &GraphEdge) -> bool {
        matches!(self.source(edge), CurveSource::Border(_))
    }

    /// Edge count excluding synthetic domain border edges.
    pub fn content_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| !self.is_border(e)).count()
    }

    /// Vertex count excluding vertices touched only by border edges.
    pub fn content_vertex_count(&self) -> usize {
        self.vertices.iter().filter(|v| v.incident.iter().any(|(e, _)| !self.is_border(&self.edges[*e]))).count()
    }

    fn merge_radius_sq(&self) -> f64 {
        self.tau
    }

    fn warn(&mut self, msg: String) {
        warn!("{msg}");
        self.warnings.push(msg);
    }

    fn new_vertex(&mut self, p: Point2) -> usize {
        let id = self.vertices.len();
        self.vertices.push(GraphVertex { id, position: p, incident: Vec::new() });
        id
    }

    /// Nearest vertex that `p` merges into.
    fn merge_target(&self, p: Point2) -> Option<usize> {
        let r2 = self.merge_radius_sq();
        self.vertices
            .iter()
            .filter(|v| {
                let d2 = (v.position - p).norm_sq();
                d2 < r2 || d2.sqrt() <= GEOM_TOL
            })
            .min_by(|a, b| (a.position - p).norm_sq().total_cmp(&(b.position - p).norm_sq()))
            .map(|v| v.id)
    }

    /// Vertex for a new curve end point: merge, snap onto an edge, or
    /// create.
    fn attach_endpoint(&mut self, p: Point2) -> usize {
        if let Some(v) = self.merge_target(p) {
            return v;
        }
        let reach = self.tau.sqrt().max(GEOM_TOL);
        let mut best: Option<(usize, f64)> = None;
        for e in &self.edges {
            if !e.polyline.bounds().expanded(reach).contains(p) {
                continue;
            }
            let c = closest_point(&e.polyline, p);
            if c.distance <= reach && best.is_none_or(|(_, d)| c.distance < d) {
                best = Some((e.id, c.distance));
            }
        }
        if let Some((eid, _)) = best {
            let c = closest_point(&self.edges[eid].polyline, p);
            let e = &self.edges[eid];
            if c.point.dist(e.polyline.first()) <= GEOM_TOL {
                return e.start;
            }
            if c.point.dist(e.polyline.last()) <= GEOM_TOL {
                return e.end;
            }
            let v = self.new_vertex(c.point);
            let t = self.refine_on_curve(eid, c.segment, c.point);
            self.split_edge(eid, c.segment, c.point, t, v);
            return v;
        }
        self.new_vertex(p)
    }

    /// Projects a polyline point back onto the exact source curve by
    /// bisection inside the bracketing parameter interval.
    fn refine_on_curve(&self, eid: usize, seg: usize, p: Point2) -> f64 {
        let e = &self.edges[eid];
        let spline = &self.curves[e.curve].spline;
        let (mut lo, mut hi) = (e.polyline.params()[seg], e.polyline.params()[seg + 1]);
        refine_param(spline, &mut lo, &mut hi, p)
    }

    /// Splits edge `eid` at `point`; the first half keeps the id.
    fn split_edge(&mut self, eid: usize, seg: usize, point: Point2, t: f64, v: usize) {
        let e = self.edges[eid].clone();
        let (a, b) = e.polyline.split_at(seg, point, t);
        let mid_t = a.params()[a.params().len() - 1];
        let new_id = self.edges.len();
        self.edges[eid] =
            GraphEdge { id: eid, start: e.start, end: v, curve: e.curve, t0: e.t0, t1: mid_t, polyline: a };
        self.edges.push(GraphEdge {
            id: new_id,
            start: v,
            end: e.end,
            curve: e.curve,
            t0: mid_t,
            t1: e.t1,
            polyline: b,
        });
    }

    pub fn insert_curve(&mut self, curve: InputBoundaryCurve) {
        let cid = self.curves.len();
        let mut poly = crate::geometry::discretize(&curve.spline, self.epsilon);
        self.curves.push(curve);

        let sv = self.attach_endpoint(poly.first());
        poly.set_first(self.vertices[sv].position);
        let ev = self.attach_endpoint(poly.last());
        poly.set_last(self.vertices[ev].position);

        let mut work = vec![Piece { poly, start: sv, end: ev }];
        let mut splits = 0usize;
        while let Some(piece) = work.pop() {
            if splits > MAX_SPLITS {
                self.warn(format!("curve {cid}: split budget exhausted, remaining pieces dropped"));
                break;
            }
            if let Some(parts) = self.split_self(&piece) {
                splits += 1;
                work.extend(parts.into_iter().rev());
                continue;
            }
            if let Some(parts) = self.split_against_edges(&piece) {
                splits += 1;
                work.extend(parts.into_iter().rev());
                continue;
            }
            self.commit(cid, piece);
        }
    }

    fn split_self(&mut self, piece: &Piece) -> Option<Vec<Piece>> {
        let hits = self_intersections(&piece.poly);
        let h = hits
            .into_iter()
            .find(|h| !(h.point.dist(piece.poly.first()) <= GEOM_TOL && h.point.dist(piece.poly.last()) <= GEOM_TOL))?;
        let (sa, fa, sb, fb) = if (h.seg_a, h.frac_a) <= (h.seg_b, h.frac_b) {
            (h.seg_a, h.t_a, h.seg_b, h.t_b)
        } else {
            (h.seg_b, h.t_b, h.seg_a, h.t_a)
        };
        let v = self.merge_target(h.point).unwrap_or_else(|| self.new_vertex(h.point));
        let p = self.vertices[v].position;
        let (first, rest) = piece.poly.split_at(sa, p, fa);
        // the second split position moved by one vertex in `rest`
        let seg_in_rest = sb - sa;
        let (middle, last) = rest.split_at(seg_in_rest, p, fb);
        Some(vec![
            Piece { poly: first, start: piece.start, end: v },
            Piece { poly: middle, start: v, end: v },
            Piece { poly: last, start: v, end: piece.end },
        ])
    }

    fn split_against_edges(&mut self, piece: &Piece) -> Option<Vec<Piece>> {
        let pb = piece.poly.bounds().expanded(GEOM_TOL);
        let first = piece.poly.first();
        let last = piece.poly.last();
        for eid in 0..self.edges.len() {
            let e = &self.edges[eid];
            if !pb.intersects(&e.polyline.bounds()) {
                continue;
            }
            let hits = intersect_polylines(&piece.poly, &e.polyline);
            for h in hits {
                let at_piece = if h.point.dist(first) <= GEOM_TOL {
                    Some(piece.start)
                } else if h.point.dist(last) <= GEOM_TOL {
                    Some(piece.end)
                } else {
                    None
                };
                let at_edge = if h.point.dist(e.polyline.first()) <= GEOM_TOL {
                    Some(e.start)
                } else if h.point.dist(e.polyline.last()) <= GEOM_TOL {
                    Some(e.end)
                } else {
                    None
                };
                match (at_piece, at_edge) {
                    (Some(_), Some(_)) => continue,
                    (Some(v), None) => {
                        let t = self.refine_pair(piece, eid, &h).1;
                        let p = self.vertices[v].position;
                        self.split_edge(eid, h.seg_b, p, t, v);
                        // the piece itself is unchanged; re-queue it
                        return Some(vec![Piece { poly: piece.poly.clone(), start: piece.start, end: piece.end }]);
                    }
                    (None, Some(v)) => {
                        let t = self.refine_pair(piece, eid, &h).0;
                        let p = self.vertices[v].position;
                        let (a, b) = piece.poly.split_at(h.seg_a, p, t);
                        return Some(vec![
                            Piece { poly: a, start: piece.start, end: v },
                            Piece { poly: b, start: v, end: piece.end },
                        ]);
                    }
                    (None, None) => {
                        let (ta, tb) = self.refine_pair(piece, eid, &h);
                        let v = self.new_vertex(h.point);
                        self.split_edge(eid, h.seg_b, h.point, tb, v);
                        let (a, b) = piece.poly.split_at(h.seg_a, h.point, ta);
                        return Some(vec![
                            Piece { poly: a, start: piece.start, end: v },
                            Piece { poly: b, start: v, end: piece.end },
                        ]);
                    }
                }
            }
        }
        None
    }

    /// Curve parameters of a crossing refined on both exact curves.
    fn refine_pair(&self, piece: &Piece, eid: usize, h: &PolylineHit) -> (f64, f64) {
        let cid = self.curves.len() - 1;
        let sa = &self.curves[cid].spline;
        let e = &self.edges[eid];
        let sb = &self.curves[e.curve].spline;
        let (mut a0, mut a1) = (piece.poly.params()[h.seg_a], piece.poly.params()[h.seg_a + 1]);
        let (mut b0, mut b1) = (e.polyline.params()[h.seg_b], e.polyline.params()[h.seg_b + 1]);
        let ta = refine_param(sa, &mut a0, &mut a1, h.point);
        let tb = refine_param(sb, &mut b0, &mut b1, h.point);
        (ta, tb)
    }

    fn commit(&mut self, cid: usize, piece: Piece) {
        let len = piece.poly.length();
        if len <= GEOM_TOL || (piece.start == piece.end && len <= 4.0 * GEOM_TOL) {
            self.warn(format!("curve {cid}: degenerate piece of length {len:.3e} discarded"));
            return;
        }
        if let Some(dup) = self.duplicate_of(&piece) {
            self.warn(format!("curve {cid}: piece overlaps edge {dup} and was dropped"));
            return;
        }
        let id = self.edges.len();
        let t0 = piece.poly.params()[0];
        let t1 = piece.poly.params()[piece.poly.params().len() - 1];
        self.edges.push(GraphEdge { id, start: piece.start, end: piece.end, curve: cid, t0, t1, polyline: piece.poly });
    }

    /// An existing edge between the same vertices that runs through the
    /// piece's midpoint.
    fn duplicate_of(&self, piece: &Piece) -> Option<usize> {
        let mid = polyline_midpoint(&piece.poly);
        self.edges
            .iter()
            .find(|e| {
                let same_ends =
                    (e.start == piece.start && e.end == piece.end) || (e.start == piece.end && e.end == piece.start);
                same_ends && closest_point(&e.polyline, mid).distance <= 1e-6
            })
            .map(|e| e.id)
    }

    /// Drops isolated vertices, renumbers, and fills incidence lists.
    pub fn finish(&mut self) {
        let mut used = vec![false; self.vertices.len()];
        for e in &self.edges {
            used[e.start] = true;
            used[e.end] = true;
        }
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut kept = Vec::new();
        for (i, v) in self.vertices.drain(..).enumerate() {
            if used[i] {
                remap[i] = kept.len();
                kept.push(GraphVertex { id: kept.len(), position: v.position, incident: Vec::new() });
            }
        }
        self.vertices = kept;
        for e in &mut self.edges {
            e.start = remap[e.start];
            e.end = remap[e.end];
            self.vertices[e.start].incident.push((e.id, EdgeEnd::Start));
            self.vertices[e.end].incident.push((e.id, EdgeEnd::End));
        }
    }

    /// Connected components over vertices (union-find); returns the
    /// component id per vertex.
    pub fn components(&self) -> Vec<usize> {
        let mut parent: Vec<usize> = (0..self.vertices.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for e in &self.edges {
            let a = find(&mut parent, e.start);
            let b = find(&mut parent, e.end);
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        (0..self.vertices.len()).map(|v| find(&mut parent, v)).collect()
    }

    pub fn component_count(&self) -> usize {
        let mut c = self.components();
        c.sort_unstable();
        c.dedup();
        c.len()
    }

    pub fn bounds(&self) -> Aabb {
        self.edges.iter().fold(Aabb::empty(), |b, e| b.union(&e.polyline.bounds()))
    }

    /// Plain-text listing of vertices and edges.
    pub fn dump_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "vertices {}", self.vertices.len());
        for v in &self.vertices {
            let inc: Vec<String> = v
                .incident
                .iter()
                .map(|(e, end)| format!("{}{}", e, if *end == EdgeEnd::Start { "s" } else { "e" }))
                .collect();
            let _ = writeln!(s, "v{} ({:.9}, {:.9}) [{}]", v.id, v.position.x, v.position.y, inc.join(" "));
        }
        let _ = writeln!(s, "edges {}", self.edges.len());
        for e in &self.edges {
            let _ = writeln!(
                s,
                "e{} v{} -> v{} curve {} {:?} t [{:.9}, {:.9}] points {}",
                e.id,
                e.start,
                e.end,
                e.curve,
                self.source(e),
                e.t0,
                e.t1,
                e.polyline.vertices().len()
            );
        }
        s
    }
}

fn polyline_midpoint(p: &Polyline) -> Point2 {
    let half = 0.5 * p.length();
    let mut acc = 0.0;
    for i in 0..p.segment_count() {
        let (a, b) = p.segment(i);
        let l = a.dist(b);
        if acc + l >= half && l > 0.0 {
            return a.lerp(b, (half - acc) / l);
        }
        acc += l;
    }
    p.last()
}

/// Ten bisection steps for the exact-curve parameter closest to `p` inside
/// `[lo, hi]`.
fn refine_param(spline: &BezierSpline, lo: &mut f64, hi: &mut f64, p: Point2) -> f64 {
    let (a, b) = (*lo, *hi);
    for _ in 0..10 {
        let mid = 0.5 * (*lo + *hi);
        let dl = spline.eval(0.5 * (*lo + mid)).dist(p);
        let dr = spline.eval(0.5 * (mid + *hi)).dist(p);
        if dl <= dr {
            *hi = mid;
        } else {
            *lo = mid;
        }
    }
    (0.5 * (*lo + *hi)).clamp(a, b)
}
