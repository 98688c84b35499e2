//! Ferguson (bi-cubic Hermite) patches and their exact spatial derivatives.
//!
//! A patch stores one 4×4 coefficient matrix per scalar field: the two
//! position coordinates and the three color channels. Each field is
//! `f(u, v) = t(u)ᵀ Cᵀ Q C t(v)` with the monomial basis
//! `t(s) = (1, s, s², s³)`.

use thiserror::Error;

use crate::geometry::{Aabb, Point2};
use crate::scene::{ColorRGB, GradientMesh, MeshNode};

/// Hermite basis matrix: `C t(s)` yields the weights of
/// `(value at 0, value at 1, derivative at 0, derivative at 1)`.
pub const HERMITE_C: [[f64; 4]; 4] =
    [[1.0, 0.0, -3.0, 2.0], [0.0, 0.0, 3.0, -2.0], [0.0, 1.0, -2.0, 1.0], [0.0, 0.0, -1.0, 1.0]];

/// Hermite-to-Bézier conversion of one cubic: `(p0, p1, d0, d1)` to the
/// four control points.
const HERMITE_TO_BEZIER: [[f64; 4]; 4] =
    [[1.0, 0.0, 0.0, 0.0], [1.0, 0.0, 1.0 / 3.0, 0.0], [0.0, 1.0, 0.0, -1.0 / 3.0], [0.0, 1.0, 0.0, 0.0]];

const PREIMAGE_DEPTH: u32 = 40;
const NEWTON_STEPS: usize = 5;
const PREIMAGE_TOL: f64 = 1e-9;
/// Below this Jacobian determinant the inverse map is treated as singular.
pub const SINGULAR_DET: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MeshError {
    #[error("point is not covered by the patch")]
    NotInPatch,
    #[error("patch geometry folds over itself")]
    FoldDetected,
    #[error("coordinate Jacobian is singular")]
    SingularJacobian,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UV {
    pub u: f64,
    pub v: f64,
}

impl UV {
    pub const fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// Field indices into [`FergusonPatch::q`].
pub const FIELD_X: usize = 0;
pub const FIELD_Y: usize = 1;
pub const FIELD_R: usize = 2;

/// Value and first/second parametric derivatives of one field.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FieldDerivs {
    pub f: f64,
    pub u: f64,
    pub v: f64,
    pub uu: f64,
    pub vv: f64,
    pub uv: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FergusonPatch {
    /// `x, y, r, g, b`.
    pub q: [[[f64; 4]; 4]; 5],
    bezier_pos: [[Point2; 4]; 4],
    det_center_sign: f64,
}

fn node_fields(n: &MeshNode) -> ([f64; 5], [f64; 5], [f64; 5]) {
    (
        [n.position.x, n.position.y, n.color.r, n.color.g, n.color.b],
        [n.du.x, n.du.y, n.du_color.r, n.du_color.g, n.du_color.b],
        [n.dv.x, n.dv.y, n.dv_color.r, n.dv_color.g, n.dv_color.b],
    )
}

fn basis(s: f64, order: u8) -> [f64; 4] {
    let t = match order {
        0 => [1.0, s, s * s, s * s * s],
        1 => [0.0, 1.0, 2.0 * s, 3.0 * s * s],
        _ => [0.0, 0.0, 2.0, 6.0 * s],
    };
    let mut out = [0.0; 4];
    for (i, row) in HERMITE_C.iter().enumerate() {
        out[i] = row.iter().zip(t).map(|(c, x)| c * x).sum();
    }
    out
}

fn bilinear_form(a: &[f64; 4], q: &[[f64; 4]; 4], b: &[f64; 4]) -> f64 {
    let mut s = 0.0;
    for i in 0..4 {
        let mut row = 0.0;
        for j in 0..4 {
            row += q[i][j] * b[j];
        }
        s += a[i] * row;
    }
    s
}

impl FergusonPatch {
    /// Builds a patch from its corner nodes, indexed `[u][v]`: `c[0][0]` at
    /// `(0,0)`, `c[1][0]` at `(1,0)`, `c[0][1]` at `(0,1)`.
    pub fn from_corners(c: [[&MeshNode; 2]; 2]) -> Self {
        let mut q = [[[0.0; 4]; 4]; 5];
        for a in 0..2 {
            for b in 0..2 {
                let (val, du, dv) = node_fields(c[a][b]);
                for k in 0..5 {
                    q[k][a][b] = val[k];
                    q[k][a][b + 2] = dv[k];
                    q[k][a + 2][b] = du[k];
                }
            }
        }
        Self::from_q(q)
    }

    pub fn from_q(q: [[[f64; 4]; 4]; 5]) -> Self {
        let mut bezier_pos = [[Point2::default(); 4]; 4];
        let hb = &HERMITE_TO_BEZIER;
        for i in 0..4 {
            for j in 0..4 {
                let mut p = [0.0; 2];
                for (k, pk) in p.iter_mut().enumerate() {
                    for a in 0..4 {
                        for b in 0..4 {
                            *pk += hb[i][a] * q[k][a][b] * hb[j][b];
                        }
                    }
                }
                bezier_pos[i][j] = Point2::new(p[0], p[1]);
            }
        }
        let mut patch = Self { q, bezier_pos, det_center_sign: 1.0 };
        let d = patch.jacobian_det(UV::new(0.5, 0.5));
        patch.det_center_sign = if d < 0.0 { -1.0 } else { 1.0 };
        patch
    }

    pub fn field(&self, k: usize, uv: UV) -> f64 {
        bilinear_form(&basis(uv.u, 0), &self.q[k], &basis(uv.v, 0))
    }

    pub fn field_derivs(&self, k: usize, uv: UV) -> FieldDerivs {
        let (u0, u1, u2) = (basis(uv.u, 0), basis(uv.u, 1), basis(uv.u, 2));
        let (v0, v1, v2) = (basis(uv.v, 0), basis(uv.v, 1), basis(uv.v, 2));
        let q = &self.q[k];
        FieldDerivs {
            f: bilinear_form(&u0, q, &v0),
            u: bilinear_form(&u1, q, &v0),
            v: bilinear_form(&u0, q, &v1),
            uu: bilinear_form(&u2, q, &v0),
            vv: bilinear_form(&u0, q, &v2),
            uv: bilinear_form(&u1, q, &v1),
        }
    }

    pub fn position(&self, uv: UV) -> Point2 {
        Point2::new(self.field(FIELD_X, uv), self.field(FIELD_Y, uv))
    }

    pub fn color(&self, uv: UV) -> ColorRGB {
        ColorRGB::new(self.field(FIELD_R, uv), self.field(FIELD_R + 1, uv), self.field(FIELD_R + 2, uv))
    }

    pub fn eval_surface(&self, uv: UV) -> (Point2, ColorRGB) {
        (self.position(uv), self.color(uv))
    }

    /// Bézier control net of the position surface.
    pub fn bezier_net(&self) -> &[[Point2; 4]; 4] {
        &self.bezier_pos
    }

    pub fn bounds(&self) -> Aabb {
        Aabb::from_points(self.bezier_pos.iter().flatten().copied())
    }

    fn jacobian(&self, uv: UV) -> [[f64; 2]; 2] {
        let x = self.field_derivs(FIELD_X, uv);
        let y = self.field_derivs(FIELD_Y, uv);
        [[x.u, x.v], [y.u, y.v]]
    }

    pub fn jacobian_det(&self, uv: UV) -> f64 {
        let j = self.jacobian(uv);
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    }

    /// Newton iteration on `position(uv) = x`. Returns the final iterate
    /// and whether it hit the tolerance.
    fn newton(&self, x: Point2, mut uv: UV, steps: usize) -> (UV, bool) {
        for _ in 0..steps {
            let r = x - self.position(uv);
            let converged = r.norm() <= PREIMAGE_TOL;
            let j = self.jacobian(uv);
            let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
            if det.abs() <= SINGULAR_DET || !det.is_finite() {
                return (uv, converged);
            }
            let du = (j[1][1] * r.x - j[0][1] * r.y) / det;
            let dv = (-j[1][0] * r.x + j[0][0] * r.y) / det;
            uv = UV::new(uv.u + du, uv.v + dv);
            if converged {
                // one more step takes the quadratic convergence to round-off
                return (uv, true);
            }
            if !uv.u.is_finite() || !uv.v.is_finite() || uv.u.abs() > 4.0 || uv.v.abs() > 4.0 {
                return (uv, false);
            }
        }
        let ok = (x - self.position(uv)).norm() <= PREIMAGE_TOL;
        (uv, ok)
    }

    fn accept(&self, x: Point2, uv: UV) -> Option<Result<UV, MeshError>> {
        const SLACK: f64 = 1e-9;
        if uv.u < -SLACK || uv.u > 1.0 + SLACK || uv.v < -SLACK || uv.v > 1.0 + SLACK {
            return None;
        }
        let c = UV::new(uv.u.clamp(0.0, 1.0), uv.v.clamp(0.0, 1.0));
        if (self.position(c) - x).norm() > PREIMAGE_TOL * 10.0 {
            return None;
        }
        let det = self.jacobian_det(c);
        if det * self.det_center_sign < 0.0 {
            return Some(Err(MeshError::FoldDetected));
        }
        Some(Ok(c))
    }

    /// Pre-image with a warm start: Newton from `guess` first, falling back
    /// to the subdivision search.
    pub fn preimage_near(&self, x: Point2, guess: UV) -> Result<UV, MeshError> {
        let (uv, ok) = self.newton(x, guess, 8);
        if ok {
            if let Some(r) = self.accept(x, uv) {
                return r;
            }
        }
        self.preimage(x)
    }

    /// Finds `uv ∈ [0,1]²` with `position(uv) = x` by recursive subdivision
    /// of the Bézier control net (sub-squares whose control hull box misses
    /// `x` are rejected) followed by Newton polishing.
    pub fn preimage(&self, x: Point2) -> Result<UV, MeshError> {
        if !self.bounds().expanded(PREIMAGE_TOL).contains(x) {
            return Err(MeshError::NotInPatch);
        }
        let mut stack = vec![(self.bezier_pos, 0.0, 1.0, 0.0, 1.0, 0u32)];
        let mut fold = false;
        while let Some((net, u0, u1, v0, v1, depth)) = stack.pop() {
            let bb = Aabb::from_points(net.iter().flatten().copied());
            let slack = PREIMAGE_TOL + 1e-12 * bb.diagonal();
            if !bb.expanded(slack).contains(x) {
                continue;
            }
            let small = bb.diagonal() <= 1e-3 * self.bounds().diagonal().max(1e-300);
            if depth >= 4 || small {
                let start = UV::new(0.5 * (u0 + u1), 0.5 * (v0 + v1));
                let steps = if depth >= PREIMAGE_DEPTH { NEWTON_STEPS } else { 8 };
                let (uv, ok) = self.newton(x, start, steps);
                if ok {
                    let margin = 0.5 * (u1 - u0).max(v1 - v0);
                    let near = uv.u >= u0 - margin && uv.u <= u1 + margin && uv.v >= v0 - margin && uv.v <= v1 + margin;
                    if near || depth >= PREIMAGE_DEPTH {
                        match self.accept(x, uv) {
                            Some(Ok(r)) => return Ok(r),
                            Some(Err(_)) => fold = true,
                            None => {}
                        }
                    }
                }
            }
            if depth >= PREIMAGE_DEPTH {
                continue;
            }
            let um = 0.5 * (u0 + u1);
            let vm = 0.5 * (v0 + v1);
            let (nl, nr) = split_net_u(&net);
            let (nll, nlr) = split_net_v(&nl);
            let (nrl, nrr) = split_net_v(&nr);
            // pushed in reverse so the low-(u, v) quarter is explored first
            stack.push((nrr, um, u1, vm, v1, depth + 1));
            stack.push((nrl, um, u1, v0, vm, depth + 1));
            stack.push((nlr, u0, um, vm, v1, depth + 1));
            stack.push((nll, u0, um, v0, vm, depth + 1));
        }
        if fold {
            Err(MeshError::FoldDetected)
        } else {
            Err(MeshError::NotInPatch)
        }
    }

    /// Partial derivatives of the inverse map `x ↦ u(x)` at `uv`.
    pub fn coordinate_partials(&self, uv: UV) -> Result<CoordinatePartials, MeshError> {
        let x = self.field_derivs(FIELD_X, uv);
        let y = self.field_derivs(FIELD_Y, uv);
        let det = x.u * y.v - x.v * y.u;
        if det.abs() <= SINGULAR_DET || !det.is_finite() {
            return Err(MeshError::SingularJacobian);
        }
        // rows map x-derivatives (g_x, g_y, g_xx, g_yy, g_xy) to
        // u-derivatives (g_u, g_v, g_uu, g_vv, g_uv)
        let forward = [
            [x.u, y.u, 0.0, 0.0, 0.0],
            [x.v, y.v, 0.0, 0.0, 0.0],
            [x.uu, y.uu, x.u * x.u, y.u * y.u, 2.0 * x.u * y.u],
            [x.vv, y.vv, x.v * x.v, y.v * y.v, 2.0 * x.v * y.v],
            [x.uv, y.uv, x.u * x.v, y.u * y.v, x.u * y.v + x.v * y.u],
        ];
        let a = invert5(&forward).ok_or(MeshError::SingularJacobian)?;
        Ok(CoordinatePartials { a })
    }

    /// `Δ_x c` for every color channel at parameter `uv`.
    pub fn color_laplacian_uv(&self, uv: UV) -> Result<ColorRGB, MeshError> {
        let p = self.coordinate_partials(uv)?;
        let mut out = [0.0; 3];
        for (k, o) in out.iter_mut().enumerate() {
            let d = self.field_derivs(FIELD_R + k, uv);
            let g = [d.u, d.v, d.uu, d.vv, d.uv];
            *o = (0..5).map(|i| (p.a[2][i] + p.a[3][i]) * g[i]).sum();
        }
        Ok(ColorRGB::new(out[0], out[1], out[2]))
    }

    pub fn color_laplacian(&self, x: Point2) -> Result<ColorRGB, MeshError> {
        let uv = self.preimage(x)?;
        self.color_laplacian_uv(uv)
    }
}

/// Inverse-map derivatives. `a` maps `(g_u, g_v, g_uu, g_vv, g_uv)` to
/// `(g_x, g_y, g_xx, g_yy, g_xy)` for any field `g`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoordinatePartials {
    pub a: [[f64; 5]; 5],
}

impl CoordinatePartials {
    pub fn u_x(&self) -> f64 {
        self.a[0][0]
    }
    pub fn v_x(&self) -> f64 {
        self.a[0][1]
    }
    pub fn u_y(&self) -> f64 {
        self.a[1][0]
    }
    pub fn v_y(&self) -> f64 {
        self.a[1][1]
    }
    pub fn u_xx(&self) -> f64 {
        self.a[2][0]
    }
    pub fn v_xx(&self) -> f64 {
        self.a[2][1]
    }
    pub fn u_yy(&self) -> f64 {
        self.a[3][0]
    }
    pub fn v_yy(&self) -> f64 {
        self.a[3][1]
    }
    pub fn u_xy(&self) -> f64 {
        self.a[4][0]
    }
    pub fn v_xy(&self) -> f64 {
        self.a[4][1]
    }
}

/// Gauss-Jordan inversion with partial pivoting.
fn invert5(m: &[[f64; 5]; 5]) -> Option<[[f64; 5]; 5]> {
    let mut a = *m;
    let mut inv = [[0.0; 5]; 5];
    for (i, row) in inv.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let scale = m.iter().flatten().fold(0.0_f64, |s, v| s.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..5 {
        let piv = (col..5).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() <= 1e-300 {
            return None;
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let d = a[col][col];
        for j in 0..5 {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for i in 0..5 {
            if i != col {
                let f = a[i][col];
                if f != 0.0 {
                    for j in 0..5 {
                        a[i][j] -= f * a[col][j];
                        inv[i][j] -= f * inv[col][j];
                    }
                }
            }
        }
    }
    Some(inv)
}

fn split4(p: [Point2; 4]) -> ([Point2; 4], [Point2; 4]) {
    let c = crate::geometry::CubicBezier { b: p }.split(0.5);
    (c.0.b, c.1.b)
}

/// Splits a control net at `u = 1/2`; the first index runs along `u`.
fn split_net_u(net: &[[Point2; 4]; 4]) -> ([[Point2; 4]; 4], [[Point2; 4]; 4]) {
    let mut l = [[Point2::default(); 4]; 4];
    let mut r = l;
    for j in 0..4 {
        let (a, b) = split4([net[0][j], net[1][j], net[2][j], net[3][j]]);
        for i in 0..4 {
            l[i][j] = a[i];
            r[i][j] = b[i];
        }
    }
    (l, r)
}

fn split_net_v(net: &[[Point2; 4]; 4]) -> ([[Point2; 4]; 4], [[Point2; 4]; 4]) {
    let mut l = [[Point2::default(); 4]; 4];
    let mut r = l;
    for i in 0..4 {
        let (a, b) = split4(net[i]);
        l[i] = a;
        r[i] = b;
    }
    (l, r)
}

/// All Ferguson patches of a gradient mesh with point lookup.
#[derive(Debug, Clone)]
pub struct MeshSurface {
    pub rows: usize,
    pub cols: usize,
    /// Row-major, `rows × cols`.
    pub patches: Vec<FergusonPatch>,
    bounds: Vec<Aabb>,
}

impl MeshSurface {
    pub fn new(mesh: &GradientMesh) -> Self {
        let mut patches = Vec::with_capacity(mesh.rows * mesh.cols);
        for r in 0..mesh.rows {
            for c in 0..mesh.cols {
                patches.push(FergusonPatch::from_corners([
                    [mesh.node(r, c), mesh.node(r + 1, c)],
                    [mesh.node(r, c + 1), mesh.node(r + 1, c + 1)],
                ]));
            }
        }
        let bounds = patches.iter().map(|p| p.bounds()).collect();
        Self { rows: mesh.rows, cols: mesh.cols, patches, bounds }
    }

    pub fn bounds(&self) -> Aabb {
        self.bounds.iter().fold(Aabb::empty(), |a, b| a.union(b))
    }

    /// First sub-patch in `(row, col)` order whose pre-image search
    /// succeeds. `hint` is tried first as a warm start.
    pub fn locate(&self, x: Point2, hint: Option<(usize, UV)>) -> Result<(usize, UV), MeshError> {
        if let Some((k, guess)) = hint {
            if k < self.patches.len() && self.bounds[k].expanded(PREIMAGE_TOL).contains(x) {
                // a warm hit is only trusted when no earlier patch claims x
                if let Ok(uv) = self.patches[k].preimage_near(x, guess) {
                    let earlier = (0..k).any(|j| {
                        self.bounds[j].expanded(PREIMAGE_TOL).contains(x) && self.patches[j].preimage(x).is_ok()
                    });
                    if !earlier {
                        return Ok((k, uv));
                    }
                }
            }
        }
        let mut err = MeshError::NotInPatch;
        for (k, p) in self.patches.iter().enumerate() {
            if !self.bounds[k].expanded(PREIMAGE_TOL).contains(x) {
                continue;
            }
            match p.preimage(x) {
                Ok(uv) => return Ok((k, uv)),
                Err(MeshError::FoldDetected) => err = MeshError::FoldDetected,
                Err(_) => {}
            }
        }
        Err(err)
    }

    pub fn color_at(&self, x: Point2) -> Result<ColorRGB, MeshError> {
        let (k, uv) = self.locate(x, None)?;
        Ok(self.patches[k].color(uv))
    }

    pub fn color_laplacian(&self, x: Point2) -> Result<ColorRGB, MeshError> {
        let (k, uv) = self.locate(x, None)?;
        self.patches[k].color_laplacian_uv(uv)
    }
}
