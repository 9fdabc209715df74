//! The Traizet correspondence: a classical solution `u` maps its positive phase to a
//! minimal surface by `z -> (X1, X2, u)` with
//! `dX1 + i dX2 = (dz̄ - (2 du/dz)^2 dz) / 2`.

use std::collections::{BTreeMap, VecDeque};
use std::f64::consts::{FRAC_PI_2, PI};
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64 as C;
use serde::{Deserialize, Serialize};

use crate::conformal;
use crate::error::{Error, Result};
use crate::point::Point2;
use crate::quad::GaussLegendre;
use crate::solutions::{AnalyticSolution, Evaluator, Family};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Point3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Point3) -> Point3 {
        Point3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Point3 {
        self * (1.0 / self.norm())
    }

    /// Mirror image through the plane `X3 = 0`.
    pub fn reflected(self) -> Point3 {
        Point3::new(self.x, self.y, -self.z)
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(a: [f64; 3]) -> Self {
        Point3::new(a[0], a[1], a[2])
    }
}

impl From<Point3> for [f64; 3] {
    fn from(p: Point3) -> Self {
        [p.x, p.y, p.z]
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, k: f64) -> Point3 {
        Point3::new(self.x * k, self.y * k, self.z * k)
    }
}

// ---------------------------------------------------------------------------
// The map
// ---------------------------------------------------------------------------

/// `du/dz = (u_x - i u_y) / 2`, the one-sided value on the free boundary.
pub fn wirtinger<E: Evaluator + ?Sized>(u: &E, z: Point2) -> Result<C> {
    if u.phase(z)? < 0.0 {
        return Err(Error::Domain(format!("({}, {}) lies in the zero phase", z.x, z.y)));
    }
    match u.gradient(z) {
        Ok(g) => Ok(C::new(0.5 * g.x, -0.5 * g.y)),
        Err(Error::ZeroPhase(x, y)) => Err(Error::Domain(format!("({x}, {y}) lies in the zero phase"))),
        Err(e) => Err(e),
    }
}

/// `(2 du/dz)^2`, the holomorphic coefficient of the Traizet differential.
pub fn traizet_coefficient<E: Evaluator + ?Sized>(u: &E, z: Point2) -> Result<C> {
    let w = wirtinger(u, z)? * 2.0;
    Ok(w * w)
}

/// Nodes per Gauss panel in path integrals.
const PATH_NODES: usize = 8;

/// `int_a^b (2 du/dz)^2 dz` along the straight segment, with `panels` Gauss panels.
pub fn segment_integral<E: Evaluator + ?Sized>(u: &E, a: Point2, b: Point2, panels: usize) -> Result<C> {
    let gl = GaussLegendre::new(PATH_NODES);
    let dz = (b - a).to_complex();
    let panels = panels.max(1);
    let mut total = C::new(0.0, 0.0);
    for k in 0..panels {
        let (t0, t1) = (k as f64 / panels as f64, (k + 1) as f64 / panels as f64);
        let half = 0.5 * (t1 - t0);
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            let t = t0 + half * (x + 1.0);
            total += traizet_coefficient(u, a.lerp(b, t))? * (w * half);
        }
    }
    Ok(total * dz)
}

/// Horizontal increment `(conj(b - a) - int_a^b (2 u_z)^2 dz) / 2` along a polyline.
pub fn horizontal_increment<E: Evaluator + ?Sized>(u: &E, path: &[Point2], panels: usize) -> Result<C> {
    let mut total = C::new(0.0, 0.0);
    for w in path.windows(2) {
        let dz = (w[1] - w[0]).to_complex();
        total += 0.5 * (dz.conj() - segment_integral(u, w[0], w[1], panels)?);
    }
    Ok(total)
}

fn segment_in_phase<E: Evaluator + ?Sized>(u: &E, a: Point2, b: Point2) -> bool {
    (0..=64).all(|k| matches!(u.phase(a.lerp(b, k as f64 / 64.0)), Ok(v) if v > 0.0))
}

/// A polyline from `a` to `b` inside the positive phase: the straight segment, else a
/// two-leg path through an axis corner or a point pushed off the chord.
pub fn route<E: Evaluator + ?Sized>(u: &E, a: Point2, b: Point2) -> Result<Vec<Point2>> {
    if segment_in_phase(u, a, b) {
        return Ok(vec![a, b]);
    }
    let mid = a.lerp(b, 0.5);
    let normal = (b - a).perp();
    let mut candidates = vec![Point2::new(b.x, a.y), Point2::new(a.x, b.y)];
    for k in [0.25, -0.25, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0] {
        candidates.push(mid + normal * k);
    }
    for m in candidates {
        if segment_in_phase(u, a, m) && segment_in_phase(u, m, b) {
            return Ok(vec![a, m, b]);
        }
    }
    Err(Error::Topology(format!(
        "no path inside the positive phase from ({}, {}) to ({}, {})",
        a.x, a.y, b.x, b.y
    )))
}

/// `T(z)` normalized by `T(base) = (0, 0, u(base))`; `resolution` Gauss panels per leg.
pub fn traizet_map<E: Evaluator + ?Sized>(u: &E, base: Point2, z: Point2, resolution: usize) -> Result<Point3> {
    let x3 = u.value(z)?;
    if base == z {
        return Ok(Point3::new(0.0, 0.0, x3));
    }
    let path = route(u, base, z)?;
    let h = horizontal_increment(u, &path, resolution)?;
    Ok(Point3::new(h.re, h.im, x3))
}

/// First fundamental form `[E, F, G]` of the Traizet map at `z` by central differences.
pub fn first_fundamental_form<E: Evaluator + ?Sized>(u: &E, base: Point2, z: Point2, step: f64) -> Result<[f64; 3]> {
    let t = |p: Point2| traizet_map(u, base, p, 4);
    let dx = (t(z + Point2::new(step, 0.0))? - t(z - Point2::new(step, 0.0))?) * (0.5 / step);
    let dy = (t(z + Point2::new(0.0, step))? - t(z - Point2::new(0.0, step))?) * (0.5 / step);
    Ok([dx.dot(dx), dx.dot(dy), dy.dot(dy)])
}

// ---------------------------------------------------------------------------
// Meshes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sheet {
    Upper,
    Lower,
    /// Shared by both sheets: the image of a free boundary point.
    FreeBoundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VertexSource {
    pub point: Point2,
    pub sheet: Sheet,
}

/// A free boundary vertex with its neighbours along the boundary and the next three
/// upper-sheet vertices on the transversal grid line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FbStencil {
    pub vertex: usize,
    pub along: [usize; 2],
    pub inward: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceMesh {
    pub vertices: Vec<Point3>,
    pub triangles: Vec<[usize; 3]>,
    pub sources: Vec<VertexSource>,
    pub fb_stencils: Vec<FbStencil>,
}

impl SurfaceMesh {
    /// Indices of vertices on edges used by a single triangle.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut flags = vec![false; self.vertices.len()];
        for ((a, b), c) in count {
            if c == 1 {
                flags[a] = true;
                flags[b] = true;
            }
        }
        flags
    }

    /// Checks index validity and that every edge has at most two triangles.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        let mut count: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for t in &self.triangles {
            if t.iter().any(|&i| i >= n) || t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::Topology(format!("bad triangle {t:?}")));
            }
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        if let Some((e, _)) = count.iter().find(|(_, &c)| c > 2) {
            return Err(Error::Topology(format!("edge {e:?} is shared by more than two triangles")));
        }
        Ok(())
    }
}

/// Parameter regions meshed by [`build_mesh`], given in the solution's own frame.
/// Each is a conformal grid whose transversal lines meet the free boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MeshRegion {
    /// Axis-parallel rectangle `[x_min, x_max] x [y_min, y_max]` in the closed
    /// positive phase; rows on the free boundary are detected.
    Rectangle { x_min: f64, x_max: f64, y_min: f64, y_max: f64 },
    /// Log-polar annulus `r_in <= |z| <= r_out`.
    Annulus { r_in: f64, r_out: f64 },
    /// Hairpin strip `|Re w| <= half_length`, `|Im w| <= pi/2` under `z = a (w + sinh w)`.
    HairpinStrip { half_length: f64 },
    /// Scherk half cell between the right half of the loop and the ellipse through the
    /// saddles `(0, +-pi)` with semi-axis `c_s + reach`, ruled by quadratic curves that
    /// leave the loop along its normal.
    ScherkHalfCell { reach: f64 },
}

impl MeshRegion {
    /// The default region for each family.
    pub fn canonical(u: &AnalyticSolution) -> MeshRegion {
        match u.family {
            Family::HalfPlane | Family::TwoPlane { .. } | Family::Wedge { .. } => {
                MeshRegion::Rectangle { x_min: 0.0, x_max: 2.0, y_min: -2.0, y_max: 2.0 }
            }
            Family::DiskComplement { r } => MeshRegion::Annulus { r_in: r, r_out: r * 2f64.exp() },
            Family::Hairpin { .. } => MeshRegion::HairpinStrip { half_length: 2.0 },
            Family::Scherk { .. } => MeshRegion::ScherkHalfCell { reach: 2.0 },
        }
    }
}

/// Grid of planar points; `t` is the transversal index, `s` runs along the boundary.
struct Patch {
    ns: usize,
    nt: usize,
    periodic: bool,
    fb_rows: [bool; 2],
    points: Vec<Point2>,
}

impl Patch {
    fn s_nodes(&self) -> usize {
        if self.periodic {
            self.ns
        } else {
            self.ns + 1
        }
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.s_nodes() + i % self.s_nodes()
    }
}

fn cells(length: f64, step: f64) -> usize {
    ((length / step).round() as usize).max(1)
}

fn build_patch(u: &AnalyticSolution, region: &MeshRegion, resolution: usize) -> Result<Patch> {
    if resolution < 2 {
        return Err(Error::InvalidInput(format!("mesh resolution {resolution} must be at least 2")));
    }
    let m = u.motion;
    let mut patch = match *region {
        MeshRegion::Rectangle { x_min, x_max, y_min, y_max } => {
            if !(x_max > x_min && y_max > y_min) {
                return Err(Error::InvalidInput("empty rectangle".into()));
            }
            let nt = resolution;
            let ns = cells(y_max - y_min, (x_max - x_min) / nt as f64);
            let mut points = Vec::new();
            for j in 0..=nt {
                for i in 0..=ns {
                    let x = x_min + (x_max - x_min) * j as f64 / nt as f64;
                    let y = y_min + (y_max - y_min) * i as f64 / ns as f64;
                    points.push(Point2::new(x, y));
                }
            }
            Patch { ns, nt, periodic: false, fb_rows: [false; 2], points }
        }
        MeshRegion::Annulus { r_in, r_out } => {
            if !(r_out > r_in && r_in > 0.0) {
                return Err(Error::InvalidInput(format!("annulus radii {r_in}, {r_out}")));
            }
            let ns = resolution;
            let nt = cells((r_out / r_in).ln(), 2.0 * PI / ns as f64);
            let dr = (r_out / r_in).ln() / nt as f64;
            let mut points = Vec::new();
            for j in 0..=nt {
                for i in 0..ns {
                    points.push(Point2::from_polar(r_in * (dr * j as f64).exp(), 2.0 * PI * i as f64 / ns as f64));
                }
            }
            Patch { ns, nt, periodic: true, fb_rows: [false; 2], points }
        }
        MeshRegion::HairpinStrip { half_length } => {
            let Family::Hairpin { a } = u.family else {
                return Err(Error::InvalidInput(format!("hairpin strip requested for {}", u.family)));
            };
            let nt = resolution;
            let step = PI / nt as f64;
            let ns = cells(2.0 * half_length, step);
            let mut points = Vec::new();
            for j in 0..=nt {
                for i in 0..=ns {
                    let w = C::new(-half_length + 2.0 * half_length * i as f64 / ns as f64, -FRAC_PI_2 + step * j as f64);
                    points.push(Point2::from_complex((w + w.sinh()) * a));
                }
            }
            Patch { ns, nt, periodic: false, fb_rows: [true; 2], points }
        }
        MeshRegion::ScherkHalfCell { reach } => {
            let Family::Scherk { s, a } = u.family else {
                return Err(Error::InvalidInput(format!("Scherk half cell requested for {}", u.family)));
            };
            if !(reach > 0.0) {
                return Err(Error::InvalidInput(format!("half cell reach {reach} must be positive")));
            }
            // Rays from the right half of the loop to the ellipse through the two saddles.
            let l = 2.0 * PI * s;
            let x_far = conformal::scherk_loop_intercept(s) + reach;
            let ns = resolution;
            let nt = cells(0.5 * (x_far + PI) - 1.0, l / ns as f64).max(2);
            let mut points = Vec::with_capacity((ns + 1) * (nt + 1));
            for j in 0..=nt {
                for i in 0..=ns {
                    let ut = -0.5 * l + l * i as f64 / ns as f64;
                    let inner = conformal::scherk_loop(s, ut)?;
                    let theta = PI * ut / l;
                    let outer = Point2::new(x_far * theta.cos(), PI * theta.sin());
                    // Leave the loop along its normal so grid lines cross the reflection smoothly.
                    let grad = Point2::new((inner.x / (1.0 - s * s)).sinh(), (inner.y / (1.0 + s * s)).sin());
                    let mid = inner + grad * (0.5 * inner.dist(outer) / grad.norm());
                    let t = j as f64 / nt as f64;
                    let p = inner * ((1.0 - t) * (1.0 - t)) + mid * (2.0 * t * (1.0 - t)) + outer * (t * t);
                    points.push(p * a);
                }
            }
            Patch { ns, nt, periodic: false, fb_rows: [true, false], points }
        }
    };
    for p in patch.points.iter_mut() {
        *p = m.apply(*p);
    }
    if matches!(region, MeshRegion::Rectangle { .. } | MeshRegion::Annulus { .. }) {
        // Rows lying on the free boundary are recognised by a vanishing phase.
        let sn = patch.s_nodes();
        let on_fb = |j: usize| -> Result<bool> {
            for i in 0..sn {
                if u.phase(patch.points[j * sn + i])?.abs() > 1e-12 {
                    return Ok(false);
                }
            }
            Ok(true)
        };
        patch.fb_rows = [on_fb(0)?, on_fb(patch.nt)?];
    }
    let sn = patch.s_nodes();
    for j in 0..=patch.nt {
        if (j == 0 && patch.fb_rows[0]) || (j == patch.nt && patch.fb_rows[1]) {
            continue;
        }
        for i in 0..sn {
            let p = patch.points[j * sn + i];
            if u.phase(p)? <= 0.0 {
                return Err(Error::Topology(format!("mesh region meets the zero phase at ({}, {})", p.x, p.y)));
            }
        }
    }
    Ok(patch)
}

/// Mesh of the completed surface: the Traizet image of `region` and its reflection
/// through `X3 = 0`, glued along the free boundary.
pub fn build_mesh(u: &AnalyticSolution, region: &MeshRegion, resolution: usize) -> Result<SurfaceMesh> {
    let patch = build_patch(u, region, resolution)?;
    let sn = patch.s_nodes();
    let nodes = patch.points.len();
    let is_fb = |j: usize| (j == 0 && patch.fb_rows[0]) || (j == patch.nt && patch.fb_rows[1]);

    // Horizontal coordinates by integrating along a breadth-first tree of grid edges.
    let base = patch.idx(sn / 2, patch.nt / 2);
    let mut horiz: Vec<Option<C>> = vec![None; nodes];
    horiz[base] = Some(C::new(0.0, 0.0));
    let mut queue = VecDeque::from([base]);
    while let Some(k) = queue.pop_front() {
        let (i, j) = (k % sn, k / sn);
        let mut nb = Vec::new();
        if patch.periodic || i > 0 {
            nb.push(patch.idx(i + sn - 1, j));
        }
        if patch.periodic || i + 1 < sn {
            nb.push(patch.idx(i + 1, j));
        }
        if j > 0 {
            nb.push(patch.idx(i, j - 1));
        }
        if j < patch.nt {
            nb.push(patch.idx(i, j + 1));
        }
        for n in nb {
            if horiz[n].is_some() {
                continue;
            }
            // Chords between two boundary vertices may leave the phase; skip them.
            if let Ok(d) = horizontal_increment(u, &[patch.points[k], patch.points[n]], 1) {
                horiz[n] = Some(horiz[k].unwrap() + d);
                queue.push_back(n);
            }
        }
    }
    let mut vertices = Vec::with_capacity(2 * nodes);
    let mut sources = Vec::with_capacity(2 * nodes);
    for (k, h) in horiz.iter().enumerate() {
        let h = h.ok_or_else(|| Error::Topology("mesh vertex unreachable inside the positive phase".into()))?;
        let p = patch.points[k];
        let fb = is_fb(k / sn);
        let x3 = if fb { 0.0 } else { u.eval_u(p)? };
        vertices.push(Point3::new(h.re, h.im, x3));
        sources.push(VertexSource { point: p, sheet: if fb { Sheet::FreeBoundary } else { Sheet::Upper } });
    }
    let mut lower = vec![0usize; nodes];
    for k in 0..nodes {
        lower[k] = if is_fb(k / sn) {
            k
        } else {
            vertices.push(vertices[k].reflected());
            sources.push(VertexSource { point: patch.points[k], sheet: Sheet::Lower });
            vertices.len() - 1
        };
    }
    let mut triangles = Vec::new();
    let quads_s = patch.ns;
    for j in 0..patch.nt {
        for i in 0..quads_s {
            let (a, b, c, d) = (patch.idx(i, j), patch.idx(i + 1, j), patch.idx(i + 1, j + 1), patch.idx(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
            triangles.push([lower[a], lower[c], lower[b]]);
            triangles.push([lower[a], lower[d], lower[c]]);
        }
    }
    let mut fb_stencils = Vec::new();
    for (row, inward) in [(0usize, 1i64), (patch.nt, -1i64)] {
        if !is_fb(row) || patch.nt < 3 {
            continue;
        }
        for i in 0..sn {
            let prev = if patch.periodic || i > 0 { patch.idx(i + sn - 1, row) } else { patch.idx(i, row) };
            let next = if patch.periodic || i + 1 < sn { patch.idx(i + 1, row) } else { patch.idx(i, row) };
            let r1 = (row as i64 + inward) as usize;
            let r2 = (row as i64 + 2 * inward) as usize;
            let r3 = (row as i64 + 3 * inward) as usize;
            fb_stencils.push(FbStencil {
                vertex: patch.idx(i, row),
                along: [prev, next],
                inward: [patch.idx(i, r1), patch.idx(i, r2), patch.idx(i, r3)],
            });
        }
    }
    let mesh = SurfaceMesh { vertices, triangles, sources, fb_stencils };
    mesh.validate()?;
    Ok(mesh)
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

fn cot(a: Point3, b: Point3) -> f64 {
    a.dot(b) / a.cross(b).norm()
}

/// Discrete mean curvature `-(Delta x . n) / 2` from the cotangent Laplacian with
/// mixed Voronoi areas; `None` on boundary vertices.
pub fn mean_curvature(m: &SurfaceMesh) -> Vec<Option<f64>> {
    let n = m.vertices.len();
    let mut lap = vec![Point3::default(); n];
    let mut area = vec![0.0; n];
    let mut normal = vec![Point3::default(); n];
    for t in &m.triangles {
        let p = [m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]];
        let tri_n = (p[1] - p[0]).cross(p[2] - p[0]);
        let tri_area = 0.5 * tri_n.norm();
        if tri_area == 0.0 {
            continue;
        }
        let cots: [f64; 3] = std::array::from_fn(|k| cot(p[(k + 1) % 3] - p[k], p[(k + 2) % 3] - p[k]));
        let obtuse = (0..3).find(|&k| (p[(k + 1) % 3] - p[k]).dot(p[(k + 2) % 3] - p[k]) < 0.0);
        for k in 0..3 {
            let (i, j, o) = (k, (k + 1) % 3, (k + 2) % 3);
            // Edge (i, j) is opposite vertex o.
            let w = 0.5 * cots[o];
            lap[t[i]] = lap[t[i]] + (p[j] - p[i]) * w;
            lap[t[j]] = lap[t[j]] + (p[i] - p[j]) * w;
            normal[t[k]] = normal[t[k]] + tri_n;
            area[t[k]] += match obtuse {
                None => {
                    0.125 * ((p[j] - p[i]).dot(p[j] - p[i]) * cots[o] + (p[o] - p[i]).dot(p[o] - p[i]) * cots[j])
                }
                Some(ob) if ob == k => 0.5 * tri_area,
                Some(_) => 0.25 * tri_area,
            };
        }
    }
    let boundary = m.boundary_vertices();
    (0..n)
        .map(|k| {
            if boundary[k] || area[k] == 0.0 || normal[k].norm() == 0.0 {
                return None;
            }
            Some(-0.5 * (lap[k] * (1.0 / area[k])).dot(normal[k].normalized()))
        })
        .collect()
}

/// `|angle(tangent plane, {X3 = 0}) - pi/2|` at each free boundary vertex, using a
/// one-sided third order difference along the transversal grid line.
pub fn orthogonality_check(m: &SurfaceMesh) -> Vec<(usize, f64)> {
    m.fb_stencils
        .iter()
        .filter_map(|st| {
            let v = &m.vertices;
            let along = v[st.along[1]] - v[st.along[0]];
            let inward = (v[st.inward[0]] * 18.0 - v[st.vertex] * 11.0 - v[st.inward[1]] * 9.0 + v[st.inward[2]] * 2.0)
                * (1.0 / 6.0);
            let n = along.cross(inward);
            (n.norm() > 0.0).then(|| (st.vertex, n.normalized().z.abs().min(1.0).asin()))
        })
        .collect()
}

/// Best-fit vertical catenoid `|X_h - c| = R cosh(X3 / R)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CatenoidFit {
    pub center: Point2,
    pub max_error: f64,
}

/// Fits the axis position by Gauss-Newton and reports the largest profile error.
pub fn catenoid_fit(m: &SurfaceMesh, r: f64) -> Result<CatenoidFit> {
    if m.vertices.is_empty() || !(r > 0.0) {
        return Err(Error::InvalidInput("catenoid fit needs vertices and a positive radius".into()));
    }
    let count = m.vertices.len() as f64;
    let mut c = Point2::new(
        m.vertices.iter().map(|p| p.x).sum::<f64>() / count,
        m.vertices.iter().map(|p| p.y).sum::<f64>() / count,
    );
    let residual = |c: Point2, p: &Point3| Point2::new(p.x, p.y).dist(c) - r * (p.z / r).cosh();
    for _ in 0..50 {
        // Normal equations for the 2x2 system.
        let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for p in &m.vertices {
            let d = Point2::new(p.x, p.y) - c;
            let dn = d.norm();
            if dn == 0.0 {
                continue;
            }
            let j = d * (-1.0 / dn);
            let res = residual(c, p);
            a11 += j.x * j.x;
            a12 += j.x * j.y;
            a22 += j.y * j.y;
            b1 -= j.x * res;
            b2 -= j.y * res;
        }
        let det = a11 * a22 - a12 * a12;
        if det == 0.0 {
            break;
        }
        let step = Point2::new((a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det);
        c = c + step;
        if step.norm() < 1e-15 * (1.0 + c.norm()) {
            break;
        }
    }
    let max_error = m.vertices.iter().map(|p| residual(c, p).abs()).fold(0.0, f64::max);
    Ok(CatenoidFit { center: c, max_error })
}

/// Periods of the Traizet image of a Scherk solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScherkPeriods {
    /// Horizontal increment around a rectangle enclosing one zero phase loop.
    pub loop_period: [f64; 2],
    /// Horizontal increment between a point and its translate by one period of `u`.
    pub translation: [f64; 2],
}

fn scherk_setup(u: &AnalyticSolution) -> Result<(f64, f64)> {
    match u.family {
        Family::Scherk { s, a } => Ok((s, a)),
        other => Err(Error::InvalidInput(format!("periods requested for {other}"))),
    }
}

/// Loop and translation periods, integrated in the solution's frame and rotated back.
pub fn scherk_periods(u: &AnalyticSolution, panels: usize) -> Result<ScherkPeriods> {
    let (s, a) = scherk_setup(u)?;
    let m = u.motion;
    let x = a * (2.0 * conformal::scherk_loop_intercept(s) + 1.0);
    let corners: Vec<Point2> = [(x, -a * PI), (x, a * PI), (-x, a * PI), (-x, -a * PI), (x, -a * PI)]
        .iter()
        .map(|&(p, q)| m.apply(Point2::new(p, q)))
        .collect();
    let loop_p = horizontal_increment(u, &corners, panels)?;
    let start = m.apply(Point2::new(x, -a * PI));
    let end = m.apply(Point2::new(x, a * PI));
    let trans = horizontal_increment(u, &[start, end], panels)?;
    Ok(ScherkPeriods { loop_period: [loop_p.re, loop_p.im], translation: [trans.re, trans.im] })
}

/// Largest deviation of `T(p + period) - T(p)` from the translation period over the
/// given points, each compared along an independent detour through the far field.
pub fn scherk_periodicity_defect(u: &AnalyticSolution, points: &[Point2], panels: usize) -> Result<f64> {
    let (s, a) = scherk_setup(u)?;
    let periods = scherk_periods(u, panels)?;
    let v = C::new(periods.translation[0], periods.translation[1]);
    let m = u.motion;
    let far = a * (2.0 * conformal::scherk_loop_intercept(s) + 1.5);
    let mut worst: f64 = 0.0;
    for &p in points {
        let q = m.apply_inverse(p);
        let side = if q.x >= 0.0 { 1.0 } else { -1.0 };
        let path: Vec<Point2> = [q, Point2::new(side * far, q.y), Point2::new(side * far, q.y + 2.0 * PI * a), q + Point2::new(0.0, 2.0 * PI * a)]
            .iter()
            .map(|&r| m.apply(r))
            .collect();
        let mut legs = Vec::new();
        for w in path.windows(2) {
            let r = route(u, w[0], w[1])?;
            if legs.is_empty() {
                legs.extend(r);
            } else {
                legs.extend(r.into_iter().skip(1));
            }
        }
        let d = horizontal_increment(u, &legs, panels)?;
        worst = worst.max((d - v).norm());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solutions::RigidMotion;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    #[test]
    fn wirtinger_of_planes() {
        let w = wirtinger(&AnalyticSolution::half_plane(), p(1.0, 0.0)).unwrap();
        assert_eq!(w, C::new(0.5, 0.0));
        let w = wirtinger(&AnalyticSolution::wedge(0.3).unwrap(), p(-1.0, 0.0)).unwrap();
        assert_eq!(w, C::new(-0.15, 0.0));
        assert!(matches!(wirtinger(&AnalyticSolution::half_plane(), p(-1.0, 0.0)), Err(Error::Domain(_))));
    }

    #[test]
    fn wirtinger_is_holomorphic() {
        // d/dz̄ = (d/dx + i d/dy) / 2 by central differences must vanish to O(step^2).
        let u = AnalyticSolution::hairpin(1.0).unwrap();
        let z = p(0.4, 0.3);
        let defect = |step: f64| {
            let f = |q: Point2| wirtinger(&u, q).unwrap();
            let dx = (f(z + p(step, 0.0)) - f(z - p(step, 0.0))) / (2.0 * step);
            let dy = (f(z + p(0.0, step)) - f(z - p(0.0, step))) / (2.0 * step);
            (0.5 * (dx + C::i() * dy)).norm()
        };
        let (a, b) = (defect(1e-2), defect(5e-3));
        assert!(a < 1e-4 && b < a / 3.0, "{a} {b}");
    }

    #[test]
    fn half_plane_image_is_vertical_plane() {
        let u = AnalyticSolution::half_plane();
        let base = p(1.0, 0.5);
        for z in [p(2.0, -1.0), p(0.3, 4.0)] {
            let t = traizet_map(&u, base, z, 4).unwrap();
            // X1 + i X2 = -i (x2 - base2) exactly.
            assert!(t.x.abs() < 1e-14);
            assert!((t.y + (z.y - base.y)).abs() < 1e-14);
            assert_eq!(t.z, z.x);
        }
    }

    #[test]
    fn disk_complement_image_is_catenoid() {
        let u = AnalyticSolution::disk_complement(1.5).unwrap();
        let base = p(2.0, 0.0);
        for z in [p(-3.0, 1.0), p(0.5, -1.7), p(4.0, 4.0)] {
            let t = traizet_map(&u, base, z, 8).unwrap();
            // Closed form: X = (z̄ + R^2/z)/2 up to the base normalization.
            let zc = z.to_complex();
            let bc = base.to_complex();
            let exact = 0.5 * (zc.conj() + 2.25 / zc) - 0.5 * (bc.conj() + 2.25 / bc);
            assert!((C::new(t.x, t.y) - exact).norm() < 1e-12);
        }
    }

    #[test]
    fn homotopic_paths_agree() {
        let u = AnalyticSolution::hairpin(1.0).unwrap();
        let (a, b) = (p(-1.0, 0.2), p(1.5, -0.4));
        let straight = horizontal_increment(&u, &[a, b], 8).unwrap();
        let bent = horizontal_increment(&u, &[a, p(0.0, 1.2), b], 8).unwrap();
        assert!((straight - bent).norm() < 1e-9);
    }

    #[test]
    fn metric_is_conformal() {
        let u = AnalyticSolution::hairpin(1.0).unwrap();
        let [e, f, g] = first_fundamental_form(&u, p(0.0, 0.0), p(0.7, 0.5), 1e-3).unwrap();
        assert!((e - g).abs() < 1e-6 * e && f.abs() < 1e-6 * e);
    }

    fn octasphere(k: usize) -> SurfaceMesh {
        let axes = [Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0), Point3::new(0.0, 0.0, 1.0)];
        let mut keys: BTreeMap<[i64; 3], usize> = BTreeMap::new();
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let mut id = |q: Point3, vertices: &mut Vec<Point3>| {
            let q = q.normalized();
            let key = [q.x, q.y, q.z].map(|c| (c * 1e9).round() as i64);
            *keys.entry(key).or_insert_with(|| {
                vertices.push(q);
                vertices.len() - 1
            })
        };
        for sx in [1.0, -1.0] {
            for sy in [1.0, -1.0] {
                for sz in [1.0, -1.0] {
                    let (a, b, c) = (axes[0] * sx, axes[1] * sy, axes[2] * sz);
                    let pt = |i: usize, j: usize| a + (b - a) * (i as f64 / k as f64) + (c - a) * (j as f64 / k as f64);
                    let flip = sx * sy * sz < 0.0;
                    for i in 0..k {
                        for j in 0..k - i {
                            let mut tri = [id(pt(i, j), &mut vertices), id(pt(i + 1, j), &mut vertices), id(pt(i, j + 1), &mut vertices)];
                            if flip {
                                tri.swap(1, 2);
                            }
                            triangles.push(tri);
                            if i + j + 1 < k {
                                let mut tri = [id(pt(i + 1, j), &mut vertices), id(pt(i + 1, j + 1), &mut vertices), id(pt(i, j + 1), &mut vertices)];
                                if flip {
                                    tri.swap(1, 2);
                                }
                                triangles.push(tri);
                            }
                        }
                    }
                }
            }
        }
        let sources = vec![VertexSource { point: Point2::ORIGIN, sheet: Sheet::Upper }; vertices.len()];
        SurfaceMesh { vertices, triangles, sources, fb_stencils: Vec::new() }
    }

    #[test]
    fn unit_sphere_calibration() {
        let coarse = octasphere(8);
        let fine = octasphere(32);
        fine.validate().unwrap();
        let err = |m: &SurfaceMesh| mean_curvature(m).iter().map(|h| (h.unwrap() - 1.0).abs()).fold(0.0, f64::max);
        let (a, b) = (err(&coarse), err(&fine));
        assert!(b < 0.05 && b < a, "{a} {b}");
    }

    #[test]
    fn half_plane_mesh_is_flat_and_orthogonal() {
        let u = AnalyticSolution::half_plane().with_motion(RigidMotion::rotation(0.4));
        let m = build_mesh(&u, &MeshRegion::canonical(&u), 16).unwrap();
        assert!(mean_curvature(&m).iter().flatten().all(|h| h.abs() < 1e-10));
        let defects = orthogonality_check(&m);
        assert_eq!(defects.len(), 33);
        assert!(defects.iter().all(|d| d.1 < 1e-12));
        assert!(m.sources.iter().zip(&m.vertices).all(|(s, v)| s.sheet != Sheet::FreeBoundary || v.z == 0.0));
    }

    #[test]
    fn catenoid_mesh_profile() {
        let u = AnalyticSolution::disk_complement(1.0).unwrap();
        let m = build_mesh(&u, &MeshRegion::canonical(&u), 32).unwrap();
        assert!(catenoid_fit(&m, 1.0).unwrap().max_error < 1e-10);
        // Lower sheet is the exact mirror of the upper one.
        for (k, s) in m.sources.iter().enumerate() {
            if s.sheet == Sheet::Lower {
                let twin = m.sources.iter().position(|t| t.sheet == Sheet::Upper && t.point == s.point).unwrap();
                assert_eq!(m.vertices[k], m.vertices[twin].reflected());
            }
        }
    }

    #[test]
    fn scherk_translation_period() {
        let (s, a) = (0.5, 0.8);
        let u = AnalyticSolution::scherk(s, a).unwrap();
        let per = scherk_periods(&u, 16).unwrap();
        assert!(per.loop_period[0].abs() < 1e-10 && per.loop_period[1].abs() < 1e-10);
        // (2u_z)^2 is holomorphic and periodic, so its integral over a vertical period is
        // the same on every line; far out it tends to s^2. Hence -(pi i a)(1 + s^2).
        assert!(per.translation[0].abs() < 1e-10);
        assert!((per.translation[1] + PI * a * (1.0 + s * s)).abs() < 1e-9, "{:?}", per);
    }
}
