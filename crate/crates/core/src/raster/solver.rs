//! Discrete Poisson solve on the pixel grid.
//!
//! Every patch is solved on its own, and so is every group of unknown
//! pixels joined by open links. Each group becomes a symmetric sparse
//! system `Σ w (c_n − c_P) = h² f`, solved per channel by conjugate
//! gradients preconditioned with an aggregation multigrid V-cycle.

use std::collections::HashMap;
use std::str::FromStr;

use log::{debug, warn};
use rayon::prelude::*;

use super::{PixelKind, RasterGrids, NO_PATCH};
use crate::error::Error;
use crate::scene::{ColorRGB, Settings};

/// How Dirichlet boundaries enter the stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundaryMode {
    /// Pixels nearest a Dirichlet curve are fixed to its color.
    PixelCenter,
    /// Links cut by a Dirichlet curve are shortened to the crossing, which
    /// places the boundary value at its true position.
    #[default]
    CutCell,
}

impl FromStr for BoundaryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "pixel" | "pixel-center" => Ok(BoundaryMode::PixelCenter),
            "cut-cell" | "cutcell" => Ok(BoundaryMode::CutCell),
            _ => Err(Error::Config(format!("unknown boundary mode '{s}' (expected pixel or cut-cell)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Maximum conjugate gradient iterations per system.
    pub iterations: usize,
    /// Requested multigrid depth; deeper hierarchies are built when the
    /// coarsest level would be too large to factor.
    pub multigrid_levels: usize,
    /// Stop once `max |Σ w (c_n − c_P) − h² f|` falls below this.
    pub residual_target: f64,
    pub boundary: BoundaryMode,
}

impl SolverConfig {
    pub fn from_settings(s: &Settings, boundary: BoundaryMode) -> Self {
        Self {
            iterations: s.iterations,
            multigrid_levels: s.multigrid_levels,
            residual_target: s.residual_target,
            boundary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveReport {
    pub systems: usize,
    pub unknowns: usize,
    /// Largest iteration count over all systems and channels.
    pub iterations: usize,
    /// Largest final residual.
    pub residual: f64,
    pub converged: bool,
    /// Unknowns with no usable neighbour; they keep color zero.
    pub isolated: usize,
}

const MIN_CUT: f64 = 1e-3;
const MAX_COARSE: usize = 4096;
const OMEGA: f64 = 0.8;
const SWEEPS: usize = 2;

#[derive(Debug, Clone)]
struct Csr {
    diag: Vec<f64>,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl Csr {
    fn n(&self) -> usize {
        self.diag.len()
    }

    fn mul(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n() {
            let mut s = self.diag[i] * x[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k] as usize];
            }
            y[i] = s;
        }
    }

    fn residual(&self, b: &[f64], x: &[f64], r: &mut [f64]) {
        for i in 0..self.n() {
            let mut s = self.diag[i] * x[i];
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k] as usize];
            }
            r[i] = b[i] - s;
        }
    }
}

/// Cholesky factor stored by row envelope.
#[derive(Debug, Clone)]
struct Envelope {
    first: Vec<usize>,
    start: Vec<usize>,
    l: Vec<f64>,
}

impl Envelope {
    fn factor(a: &Csr, shift: f64) -> Self {
        let n = a.n();
        let mut first = vec![0; n];
        for i in 0..n {
            let mut f = i;
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                f = f.min(a.cols[k] as usize);
            }
            first[i] = f;
        }
        // symmetric envelope: column j's rows must reach back as far as j's
        let mut start = vec![0; n + 1];
        for i in 0..n {
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        let mut l = vec![0.0; start[n]];
        for i in 0..n {
            l[start[i] + i - first[i]] = a.diag[i] + shift;
            for k in a.row_ptr[i]..a.row_ptr[i + 1] {
                let j = a.cols[k] as usize;
                if j < i {
                    l[start[i] + j - first[i]] += a.vals[k];
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..=i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut s = l[start[i] + j - fi];
                for k in lo..j {
                    s -= l[start[i] + k - fi] * l[start[j] + k - fj];
                }
                if j == i {
                    l[start[i] + i - fi] = if s > 0.0 { s.sqrt() } else { 1e-300_f64.sqrt() };
                } else {
                    l[start[i] + j - fi] = s / l[start[j] + j - fj];
                }
            }
        }
        Self { first, start, l }
    }

    fn solve(&self, b: &[f64], x: &mut [f64]) {
        let n = self.first.len();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.l[self.start[i]..self.start[i + 1]];
            let mut s = b[i];
            for k in fi..i {
                s -= row[k - fi] * x[k];
            }
            x[i] = s / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.l[self.start[i]..self.start[i + 1]];
            x[i] /= row[i - fi];
            let xi = x[i];
            for k in fi..i {
                x[k] -= row[k - fi] * xi;
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Level {
    a: Csr,
    /// Fine to coarse map; empty on the coarsest level.
    agg: Vec<u32>,
    coarse_n: usize,
}

#[derive(Debug, Clone)]
struct Hierarchy {
    levels: Vec<Level>,
    coarse: Envelope,
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

/// 2×2 blocks of grid coordinates, each split into its connected parts.
fn aggregate(a: &Csr, coords: &[(u32, u32)]) -> (Vec<u32>, Vec<(u32, u32)>) {
    let n = a.n();
    let mut parent: Vec<usize> = (0..n).collect();
    let key = |i: usize| (coords[i].0 / 2, coords[i].1 / 2);
    for i in 0..n {
        for k in a.row_ptr[i]..a.row_ptr[i + 1] {
            let j = a.cols[k] as usize;
            if key(i) == key(j) {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut ids: HashMap<usize, u32> = HashMap::new();
    let mut agg = vec![0u32; n];
    let mut coarse = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        let next = ids.len() as u32;
        let id = *ids.entry(r).or_insert_with(|| {
            coarse.push(key(i));
            next
        });
        agg[i] = id;
    }
    (agg, coarse)
}

fn galerkin(a: &Csr, agg: &[u32], nc: usize) -> Csr {
    let mut diag = vec![0.0; nc];
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); nc];
    for i in 0..a.n() {
        let ci = agg[i] as usize;
        diag[ci] += a.diag[i];
        for k in a.row_ptr[i]..a.row_ptr[i + 1] {
            let cj = agg[a.cols[k] as usize];
            if cj as usize == ci {
                diag[ci] += a.vals[k];
            } else {
                rows[ci].push((cj, a.vals[k]));
            }
        }
    }
    let mut row_ptr = vec![0];
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for mut r in rows {
        r.sort_by_key(|e| e.0);
        let mut last: Option<u32> = None;
        for (c, v) in r {
            if last == Some(c) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                last = Some(c);
            }
        }
        row_ptr.push(cols.len());
    }
    Csr { diag, row_ptr, cols, vals }
}

impl Hierarchy {
    fn build(a: Csr, coords: Vec<(u32, u32)>, levels: usize, floating: bool) -> Self {
        let mut out = Vec::new();
        let mut a = a;
        let mut coords = coords;
        loop {
            let n = a.n();
            let want = out.len() + 1 < levels.max(1) || n > MAX_COARSE;
            if !want || n <= 16 {
                break;
            }
            let (agg, cc) = aggregate(&a, &coords);
            if cc.len() * 20 > n * 19 {
                break;
            }
            let ac = galerkin(&a, &agg, cc.len());
            let nc = cc.len();
            out.push(Level { a, agg, coarse_n: nc });
            a = ac;
            coords = cc;
        }
        let mean_diag = a.diag.iter().sum::<f64>() / a.n().max(1) as f64;
        let shift = if floating { 1e-6 * mean_diag } else { 0.0 };
        let coarse = Envelope::factor(&a, shift);
        out.push(Level { a, agg: Vec::new(), coarse_n: 0 });
        Self { levels: out, coarse }
    }

    fn vcycle(&self, l: usize, b: &[f64], x: &mut [f64]) {
        let lev = &self.levels[l];
        if l + 1 == self.levels.len() {
            self.coarse.solve(b, x);
            return;
        }
        let a = &lev.a;
        let n = a.n();
        let mut r = vec![0.0; n];
        for i in 0..n {
            x[i] = OMEGA * b[i] / a.diag[i];
        }
        for _ in 1..SWEEPS {
            jacobi(a, b, x, &mut r);
        }
        a.residual(b, x, &mut r);
        let mut rc = vec![0.0; lev.coarse_n];
        for i in 0..n {
            rc[lev.agg[i] as usize] += r[i];
        }
        let mut xc = vec![0.0; lev.coarse_n];
        self.vcycle(l + 1, &rc, &mut xc);
        for i in 0..n {
            x[i] += xc[lev.agg[i] as usize];
        }
        for _ in 0..SWEEPS {
            jacobi(a, b, x, &mut r);
        }
    }
}

fn jacobi(a: &Csr, b: &[f64], x: &mut [f64], r: &mut [f64]) {
    a.residual(b, x, r);
    for i in 0..a.n() {
        x[i] += OMEGA * r[i] / a.diag[i];
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn project_mean(v: &mut [f64]) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= m);
}

/// Returns iterations used and the true final residual.
fn pcg(h: &Hierarchy, b: &[f64], x: &mut [f64], cfg: &SolverConfig, floating: bool) -> (usize, f64) {
    let a = &h.levels[0].a;
    let n = a.n();
    let mut r = b.to_vec();
    if floating {
        project_mean(&mut r);
    }
    x.iter_mut().for_each(|v| *v = 0.0);
    if max_abs(&r) <= cfg.residual_target {
        return (0, max_abs(&r));
    }
    let mut z = vec![0.0; n];
    h.vcycle(0, &r, &mut z);
    if floating {
        project_mean(&mut z);
    }
    let mut p = z.clone();
    let mut q = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut it = 0;
    while it < cfg.iterations {
        it += 1;
        a.mul(&p, &mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 || !pq.is_finite() {
            break;
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        if floating {
            project_mean(&mut r);
        }
        if max_abs(&r) <= cfg.residual_target {
            break;
        }
        h.vcycle(0, &r, &mut z);
        if floating {
            project_mean(&mut z);
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if floating {
        project_mean(x);
    }
    let mut bb = b.to_vec();
    if floating {
        project_mean(&mut bb);
    }
    a.residual(&bb, x, &mut r);
    (it, max_abs(&r))
}

struct System {
    pixels: Vec<usize>,
    a: Csr,
    coords: Vec<(u32, u32)>,
    rhs: [Vec<f64>; 3],
    anchored: bool,
}

fn is_unknown(grids: &RasterGrids, idx: usize, mode: BoundaryMode) -> bool {
    grids.owner[idx] != NO_PATCH && (mode == BoundaryMode::CutCell || grids.kind[idx] != PixelKind::Dirichlet)
}

fn assemble(grids: &RasterGrids, pixels: Vec<usize>, local: &[u32], mode: BoundaryMode) -> System {
    let g = &grids.grid;
    let h2 = g.h * g.h;
    let n = pixels.len();
    let mut diag = vec![0.0; n];
    let mut row_ptr = vec![0];
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    let mut coords = Vec::with_capacity(n);
    let mut rhs = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut anchored = false;
    for (r, &idx) in pixels.iter().enumerate() {
        let (i, j) = g.coords(idx);
        coords.push((i as u32, j as u32));
        let mut b = -grids.source[idx] * h2;
        for d in 0..4 {
            let Some(nb) = grids.neighbor(idx, d) else {
                continue;
            };
            if !nb.link.closed {
                diag[r] += 1.0;
                if is_unknown(grids, nb.index, mode) {
                    cols.push(local[nb.index]);
                    vals.push(-1.0);
                } else {
                    b += grids.dirichlet[nb.index];
                    anchored = true;
                }
            } else if mode == BoundaryMode::CutCell {
                if let Some(hit) = nb.link.hit_from(nb.low_end) {
                    if let Some(v) = hit.value {
                        let w = 1.0 / hit.dist.max(MIN_CUT);
                        diag[r] += w;
                        b += v * w;
                        anchored = true;
                    }
                }
            }
        }
        for (k, rk) in rhs.iter_mut().enumerate() {
            rk[r] = b.channel(k);
        }
        row_ptr.push(cols.len());
    }
    System { pixels, a: Csr { diag, row_ptr, cols, vals }, coords, rhs, anchored }
}

/// Solves every patch and writes the result into `grids.color`.
pub fn solve(grids: &mut RasterGrids, cfg: &SolverConfig) -> SolveReport {
    let g = grids.grid;
    let n = g.len();
    let mode = cfg.boundary;
    let mut parent: Vec<usize> = (0..n).collect();
    for idx in 0..n {
        if !is_unknown(grids, idx, mode) {
            continue;
        }
        for d in [0, 2] {
            if let Some(nb) = grids.neighbor(idx, d) {
                if !nb.link.closed && is_unknown(grids, nb.index, mode) {
                    let (a, b) = (find(&mut parent, idx), find(&mut parent, nb.index));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut local = vec![u32::MAX; n];
    let mut group_of: HashMap<usize, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for idx in 0..n {
        if !is_unknown(grids, idx, mode) {
            continue;
        }
        let r = find(&mut parent, idx);
        let gi = *group_of.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        local[idx] = groups[gi].len() as u32;
        groups[gi].push(idx);
    }
    for idx in 0..n {
        grids.color[idx] = if grids.kind[idx] == PixelKind::Dirichlet && mode == BoundaryMode::PixelCenter {
            grids.dirichlet[idx]
        } else {
            ColorRGB::default()
        };
    }
    let view: &RasterGrids = grids;
    let results: Vec<(Vec<usize>, Vec<ColorRGB>, SolveReport)> =
        groups.into_par_iter().map(|pixels| solve_system(assemble(view, pixels, &local, mode), cfg)).collect();
    let mut report = SolveReport { converged: true, ..Default::default() };
    for (pixels, values, rep) in results {
        for (idx, v) in pixels.into_iter().zip(values) {
            grids.color[idx] = v;
        }
        report.systems += rep.systems;
        report.unknowns += rep.unknowns;
        report.iterations = report.iterations.max(rep.iterations);
        report.residual = report.residual.max(rep.residual);
        report.converged &= rep.converged;
        report.isolated += rep.isolated;
    }
    if !report.converged {
        warn!(
            "solver did not reach residual {:e} within {} iterations (residual {:e})",
            cfg.residual_target, cfg.iterations, report.residual
        );
    }
    debug!("solved {} systems, {} unknowns", report.systems, report.unknowns);
    report
}

fn solve_system(sys: System, cfg: &SolverConfig) -> (Vec<usize>, Vec<ColorRGB>, SolveReport) {
    let n = sys.pixels.len();
    let mut rep = SolveReport { systems: 1, unknowns: n, converged: true, ..Default::default() };
    if n == 1 && sys.a.diag[0] == 0.0 {
        rep.isolated = 1;
        return (sys.pixels, vec![ColorRGB::default()], rep);
    }
    let floating = !sys.anchored;
    let h = Hierarchy::build(sys.a, sys.coords, cfg.multigrid_levels, floating);
    let mut out = vec![ColorRGB::default(); n];
    let mut x = vec![0.0; n];
    for (k, b) in sys.rhs.iter().enumerate() {
        let (it, res) = pcg(&h, b, &mut x, cfg, floating);
        rep.iterations = rep.iterations.max(it);
        rep.residual = rep.residual.max(res);
        rep.converged &= res <= cfg.residual_target;
        for (o, v) in out.iter_mut().zip(&x) {
            *o.channel_mut(k) = *v;
        }
    }
    (sys.pixels, out, rep)
}

/// One Jacobi sweep with pixel-center boundaries: Dirichlet pixels stay
/// fixed, others average their open neighbours within the patch.
pub fn jacobi_step(grids: &RasterGrids) -> Vec<ColorRGB> {
    let g = &grids.grid;
    let h2 = g.h * g.h;
    (0..g.len())
        .into_par_iter()
        .map(|idx| match grids.kind[idx] {
            PixelKind::Dirichlet => grids.dirichlet[idx],
            PixelKind::Outside => grids.color[idx],
            _ => {
                let mut sum = ColorRGB::default();
                let mut w = 0.0;
                for d in 0..4 {
                    if let Some(nb) = grids.neighbor(idx, d) {
                        if !nb.link.closed && grids.owner[nb.index] == grids.owner[idx] {
                            sum += grids.color[nb.index];
                            w += 1.0;
                        }
                    }
                }
                if w == 0.0 {
                    grids.color[idx]
                } else {
                    (sum - grids.source[idx] * h2) * (1.0 / w)
                }
            }
        })
        .collect()
}
