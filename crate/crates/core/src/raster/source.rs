//! Laplacian source terms: weighted mesh Laplacians inside patches and
//! the thin bands along Poisson curves.

use log::debug;
use rayon::prelude::*;

use super::{PixelGrid, RasterGrids, NO_PATCH};
use crate::geometry::{closest_point, discretize, refine_closest_param, Aabb};
use crate::mesh::{MeshError, MeshSurface, UV};
use crate::scene::{ColorRGB, PoissonCurve};

/// Fills `grids.source` with `Σ λ_m Δc_m(x)` over the meshes referenced by
/// each pixel's patch, plus the Poisson bands. `weights[p]` lists the
/// `(mesh, λ)` pairs of patch `p`.
pub fn rasterize_source(
    grids: &mut RasterGrids,
    surfaces: &[MeshSurface],
    weights: &[Vec<(usize, f64)>],
    poisson: &[PoissonCurve],
    epsilon: f64,
) {
    let g = grids.grid;
    let owner = &grids.owner;
    let rows: Vec<(Vec<ColorRGB>, usize)> = (0..g.height)
        .into_par_iter()
        .map(|j| {
            let mut row = vec![ColorRGB::default(); g.width];
            let mut hints: Vec<Option<(usize, UV)>> = vec![None; surfaces.len()];
            let mut failures = 0;
            for (i, out) in row.iter_mut().enumerate() {
                let idx = g.index(i, j);
                let p = owner[idx];
                if p == NO_PATCH {
                    continue;
                }
                let x = g.center(i, j);
                for &(m, w) in &weights[p as usize] {
                    if w == 0.0 {
                        continue;
                    }
                    let surf = &surfaces[m];
                    if !surf.bounds().contains(x) {
                        continue;
                    }
                    match surf.locate(x, hints[m]) {
                        Ok((k, uv)) => {
                            hints[m] = Some((k, uv));
                            match surf.patches[k].color_laplacian_uv(uv) {
                                Ok(l) => *out += l * w,
                                Err(_) => failures += 1,
                            }
                        }
                        Err(MeshError::NotInPatch) => hints[m] = None,
                        Err(_) => {
                            hints[m] = None;
                            failures += 1;
                        }
                    }
                }
            }
            (row, failures)
        })
        .collect();
    let mut failures = 0;
    for (j, (row, f)) in rows.into_iter().enumerate() {
        failures += f;
        grids.source[j * g.width..(j + 1) * g.width].copy_from_slice(&row);
    }
    if failures > 0 {
        debug!("mesh Laplacian unavailable at {failures} pixels");
    }
    let bands = poisson_band_source(&g, poisson, epsilon);
    for (s, b) in grids.source.iter_mut().zip(bands) {
        *s += b;
    }
}

/// Source from Poisson curves. Pixels within `band_width` pixels of a curve
/// form a band on each side; a band pixel receives its side's profile
/// times the number of its 4-neighbours lying in the opposite band,
/// divided by `h²`.
pub fn poisson_band_source(g: &PixelGrid, curves: &[PoissonCurve], epsilon: f64) -> Vec<ColorRGB> {
    let mut out = vec![ColorRGB::default(); g.len()];
    let h2 = g.h * g.h;
    for curve in curves {
        let pl = discretize(&curve.spline, epsilon.min(0.25 * g.h));
        let segs = curve.spline.len() as f64;
        let band = curve.band_width * g.h;
        let bb = pl.bounds().expanded(band);
        let Some((i0, i1, j0, j1)) = pixel_range(g, &bb) else {
            continue;
        };
        // side: 1 left, -1 right, 0 outside; with the normalized parameter
        let bw = i1 - i0 + 1;
        let bh = j1 - j0 + 1;
        let side: Vec<(i8, f64)> = (0..bw * bh)
            .into_par_iter()
            .map(|k| {
                let (i, j) = (i0 + k % bw, j0 + k / bw);
                let x = g.center(i, j);
                let c = closest_point(&pl, x);
                if c.distance > band {
                    return (0, 0.0);
                }
                let last = pl.segment_count() - 1;
                let beyond = (c.segment == 0 && c.frac <= 0.0) || (c.segment == last && c.frac >= 1.0);
                if beyond && c.distance > 1e-12 * g.h {
                    return (0, 0.0);
                }
                let (a, b) = pl.segment(c.segment);
                let s = if (b - a).cross(x - c.point) >= 0.0 { 1 } else { -1 };
                let (lo, hi) = (pl.params()[c.segment], pl.params()[c.segment + 1]);
                (s, refine_closest_param(&curve.spline, c.point, c.t, lo, hi) / segs)
            })
            .collect();
        for jj in 0..bh {
            for ii in 0..bw {
                let (s, t) = side[jj * bw + ii];
                if s == 0 {
                    continue;
                }
                let mut gamma = 0;
                for (di, dj) in super::DIRS {
                    let (ni, nj) = (ii as i64 + di, jj as i64 + dj);
                    if ni < 0 || nj < 0 || ni >= bw as i64 || nj >= bh as i64 {
                        continue;
                    }
                    if side[nj as usize * bw + ni as usize].0 == -s {
                        gamma += 1;
                    }
                }
                if gamma == 0 {
                    continue;
                }
                let profile = if s > 0 { &curve.left_profile } else { &curve.right_profile };
                out[g.index(i0 + ii, j0 + jj)] += profile.eval(t) * (gamma as f64 / h2);
            }
        }
    }
    out
}

fn pixel_range(g: &PixelGrid, bb: &Aabb) -> Option<(usize, usize, usize, usize)> {
    let fi0 = ((bb.min.x - g.xmin) / g.h - 0.5).floor();
    let fi1 = ((bb.max.x - g.xmin) / g.h - 0.5).ceil();
    let fj0 = ((g.ymax - bb.max.y) / g.h - 0.5).floor();
    let fj1 = ((g.ymax - bb.min.y) / g.h - 0.5).ceil();
    if fi1 < 0.0 || fj1 < 0.0 || fi0 > (g.width - 1) as f64 || fj0 > (g.height - 1) as f64 {
        return None;
    }
    let c = |v: f64, n: usize| v.clamp(0.0, (n - 1) as f64) as usize;
    Some((c(fi0, g.width), c(fi1, g.width), c(fj0, g.height), c(fj1, g.height)))
}
