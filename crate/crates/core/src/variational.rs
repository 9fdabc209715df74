//! Discrete Alt–Caffarelli energy, inner-variation residuals, Weiss energy and
//! viscosity slope probes.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::point::{Point2, Rect};
use crate::quad::GaussLegendre;
use crate::solutions::Evaluator;

mod minimize;

pub use minimize::{minimize_ac, minimize_with_mask, IterationRecord, MinimizeParams, Minimized};

/// Nodal values on a uniform grid covering `window` (spacing `h` on both axes).
///
/// Values are stored row-major with `x` varying fastest. The Dirichlet nodes are the
/// outermost ring of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField2D {
    window: Rect,
    h: f64,
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

fn grid_count(len: f64, h: f64) -> Result<usize> {
    let n = (len / h).round();
    if !(n >= 1.0) || (n * h - len).abs() > 1e-9 * len.max(1.0) {
        return Err(Error::InvalidInput(format!(
            "window side {len} is not a multiple of the spacing {h}"
        )));
    }
    Ok(n as usize + 1)
}

impl ScalarField2D {
    /// Zero field on `window` with spacing `h`.
    pub fn zeros(window: Rect, h: f64) -> Result<Self> {
        window.validate()?;
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidInput(format!("grid spacing {h} must be positive")));
        }
        let nx = grid_count(window.width(), h)?;
        let ny = grid_count(window.height(), h)?;
        Ok(Self {
            window,
            h,
            nx,
            ny,
            values: vec![0.0; nx * ny],
        })
    }

    pub fn from_values(window: Rect, h: f64, values: Vec<f64>) -> Result<Self> {
        let mut f = Self::zeros(window, h)?;
        if values.len() != f.values.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} x {} values, got {}",
                f.nx,
                f.ny,
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidInput(format!("field value {v} is not finite and nonnegative")));
        }
        f.values = values;
        Ok(f)
    }

    pub fn from_fn<F: Fn(Point2) -> f64>(window: Rect, h: f64, f: F) -> Result<Self> {
        let mut field = Self::zeros(window, h)?;
        for j in 0..field.ny {
            for i in 0..field.nx {
                let v = f(field.node(i, j)).max(0.0);
                field.values[j * field.nx + i] = v;
            }
        }
        Ok(field)
    }

    /// Sample an evaluator at every node.
    pub fn sample<E: Evaluator + ?Sized>(window: Rect, h: f64, u: &E) -> Result<Self> {
        let mut field = Self::zeros(window, h)?;
        for j in 0..field.ny {
            for i in 0..field.nx {
                field.values[j * field.nx + i] = u.value(field.node(i, j))?;
            }
        }
        Ok(field)
    }

    pub fn window(&self) -> Rect {
        self.window
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn node(&self, i: usize, j: usize) -> Point2 {
        Point2::new(
            self.window.x_min + i as f64 * self.h,
            self.window.y_min + j as f64 * self.h,
        )
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.nx + i]
    }

    /// Set a node value; negative input is clamped to 0.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.values[j * self.nx + i] = v.max(0.0);
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i + 1 == self.nx || j + 1 == self.ny
    }

    pub fn boundary_mask(&self) -> Vec<bool> {
        (0..self.ny)
            .flat_map(|j| (0..self.nx).map(move |i| (i, j)))
            .map(|(i, j)| self.is_boundary(i, j))
            .collect()
    }

    /// Trapezoidal weight of node `(i, j)`.
    pub fn node_weight(&self, i: usize, j: usize) -> f64 {
        let wx = if i == 0 || i + 1 == self.nx { 0.5 } else { 1.0 };
        let wy = if j == 0 || j + 1 == self.ny { 0.5 } else { 1.0 };
        wx * wy * self.h * self.h
    }

    /// Cell containing `p` and the local coordinates in `[0, 1]^2`.
    fn locate(&self, p: Point2) -> Option<(usize, usize, f64, f64)> {
        if !self.window.contains(p) {
            return None;
        }
        let fx = (p.x - self.window.x_min) / self.h;
        let fy = (p.y - self.window.y_min) / self.h;
        let i = (fx.floor() as usize).min(self.nx - 2);
        let j = (fy.floor() as usize).min(self.ny - 2);
        Some((i, j, fx - i as f64, fy - j as f64))
    }

    /// Bilinear interpolation.
    pub fn interpolate(&self, p: Point2) -> Result<f64> {
        let (i, j, s, t) = self
            .locate(p)
            .ok_or_else(|| Error::InvalidInput(format!("({}, {}) is outside the grid", p.x, p.y)))?;
        let (a, b, c, d) = (self.get(i, j), self.get(i + 1, j), self.get(i, j + 1), self.get(i + 1, j + 1));
        Ok(a * (1.0 - s) * (1.0 - t) + b * s * (1.0 - t) + c * (1.0 - s) * t + d * s * t)
    }

    /// Gradient of the bilinear interpolant.
    pub fn interpolate_gradient(&self, p: Point2) -> Result<Point2> {
        let (i, j, s, t) = self
            .locate(p)
            .ok_or_else(|| Error::InvalidInput(format!("({}, {}) is outside the grid", p.x, p.y)))?;
        let (a, b, c, d) = (self.get(i, j), self.get(i + 1, j), self.get(i, j + 1), self.get(i + 1, j + 1));
        let gx = ((b - a) * (1.0 - t) + (d - c) * t) / self.h;
        let gy = ((c - a) * (1.0 - s) + (d - b) * s) / self.h;
        Ok(Point2::new(gx, gy))
    }

    /// Dirichlet part of the discrete energy: per-cell averages of the squared edge
    /// differences, so interior edges carry full weight and window edges half.
    pub fn dirichlet_energy(&self) -> f64 {
        let mut e = 0.0;
        for j in 0..self.ny - 1 {
            for i in 0..self.nx - 1 {
                let (a, b, c, d) = (self.get(i, j), self.get(i + 1, j), self.get(i, j + 1), self.get(i + 1, j + 1));
                e += 0.5 * ((b - a).powi(2) + (d - c).powi(2) + (c - a).powi(2) + (d - b).powi(2));
            }
        }
        e
    }

    /// Trapezoidal measure of `{v > eps}`.
    pub fn positive_measure(&self, eps: f64) -> f64 {
        let mut m = 0.0;
        for j in 0..self.ny {
            for i in 0..self.nx {
                if self.get(i, j) > eps {
                    m += self.node_weight(i, j);
                }
            }
        }
        m
    }
}

impl Evaluator for ScalarField2D {
    fn value(&self, p: Point2) -> Result<f64> {
        self.interpolate(p)
    }

    fn gradient(&self, p: Point2) -> Result<Point2> {
        self.interpolate_gradient(p)
    }

    fn domain(&self) -> Option<Rect> {
        Some(self.window)
    }
}

/// `J(v) = int |grad v|^2 + |{v > eps}|` on the field's window.
pub fn ac_energy(f: &ScalarField2D, eps: f64) -> f64 {
    f.dirichlet_energy() + f.positive_measure(eps.max(0.0))
}

/// A compactly supported vector field with its Jacobian.
pub trait TestVectorField: Sync {
    /// Value and Jacobian `D psi[i][j] = d psi_i / d x_j`.
    fn eval(&self, p: Point2) -> (Point2, [[f64; 2]; 2]);
    /// Closed box containing the support.
    fn support(&self) -> Rect;

    fn divergence(&self, p: Point2) -> f64 {
        let (_, d) = self.eval(p);
        d[0][0] + d[1][1]
    }
}

/// `psi(x) = eta(|x - c| / r) (v + M (x - c))` with the smooth bump
/// `eta(t) = exp(1 - 1/(1 - t^2))` for `t < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpField {
    pub center: Point2,
    pub radius: f64,
    pub v: Point2,
    pub m: [[f64; 2]; 2],
}

impl BumpField {
    pub fn new(center: Point2, radius: f64, v: Point2) -> Self {
        Self {
            center,
            radius,
            v,
            m: [[0.0; 2]; 2],
        }
    }

    pub fn with_matrix(mut self, m: [[f64; 2]; 2]) -> Self {
        self.m = m;
        self
    }

    /// The scalar bump and its gradient.
    pub fn bump(&self, p: Point2) -> (f64, Point2) {
        let d = p - self.center;
        let t2 = d.dot(d) / (self.radius * self.radius);
        if t2 >= 1.0 {
            return (0.0, Point2::ORIGIN);
        }
        let one = 1.0 - t2;
        let eta = (1.0 - 1.0 / one).exp();
        let g = d * (-2.0 * eta / (one * one * self.radius * self.radius));
        (eta, g)
    }
}

impl TestVectorField for BumpField {
    fn eval(&self, p: Point2) -> (Point2, [[f64; 2]; 2]) {
        let (eta, g) = self.bump(p);
        if eta == 0.0 {
            return (Point2::ORIGIN, [[0.0; 2]; 2]);
        }
        let d = p - self.center;
        let lin = Point2::new(
            self.v.x + self.m[0][0] * d.x + self.m[0][1] * d.y,
            self.v.y + self.m[1][0] * d.x + self.m[1][1] * d.y,
        );
        let l = [lin.x, lin.y];
        let gg = [g.x, g.y];
        let mut jac = [[0.0; 2]; 2];
        for (i, row) in jac.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = gg[j] * l[i] + eta * self.m[i][j];
            }
        }
        (lin * eta, jac)
    }

    fn support(&self) -> Rect {
        Rect::centered(self.center, self.radius)
    }
}

/// Integrand of the inner variation at a point of the positive phase.
fn inner_variation_density<E: Evaluator + ?Sized, V: TestVectorField + ?Sized>(
    u: &E,
    psi: &V,
    p: Point2,
    fallback: &[Point2],
) -> Result<f64> {
    let (_, d) = psi.eval(p);
    if d == [[0.0; 2]; 2] {
        return Ok(0.0);
    }
    let g = match u.gradient(p) {
        Ok(g) => g,
        Err(Error::ZeroPhase(..)) => {
            // The reconstructed interface may leave the point a hair outside the phase.
            let mut acc = Point2::ORIGIN;
            for &q in fallback {
                acc = acc + u.gradient(q)?;
            }
            acc * (1.0 / fallback.len() as f64)
        }
        Err(e) => return Err(e),
    };
    let div = d[0][0] + d[1][1];
    let quad = g.x * (d[0][0] * g.x + d[0][1] * g.y) + g.y * (d[1][0] * g.x + d[1][1] * g.y);
    Ok((g.dot(g) + 1.0) * div - 2.0 * quad)
}

fn tri_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * (b - a).cross(c - a).abs()
}

/// Clip triangle `(p, f)` to `{f > 0}` using linear interpolation of `f`.
fn clip_positive(p: [Point2; 3], f: [f64; 3]) -> Vec<Point2> {
    let mut out = Vec::with_capacity(4);
    for k in 0..3 {
        let (a, b) = (k, (k + 1) % 3);
        if f[a] > 0.0 {
            out.push(p[a]);
        }
        if (f[a] > 0.0) != (f[b] > 0.0) {
            let t = f[a] / (f[a] - f[b]);
            out.push(p[a].lerp(p[b], t));
        }
    }
    out
}

/// `int (|grad u|^2 + 1_{u>0}) div psi - 2 grad u . D psi . grad u` over the support
/// of `psi`, on a grid of spacing `h` with cut cells resolved through `u.phase`.
pub fn variational_residual<E, V>(u: &E, psi: &V, window: &Rect, h: f64) -> Result<f64>
where
    E: Evaluator + ?Sized,
    V: TestVectorField + ?Sized,
{
    let sup = psi.support();
    if !(sup.x_min > window.x_min
        && sup.x_max < window.x_max
        && sup.y_min > window.y_min
        && sup.y_max < window.y_max)
    {
        return Err(Error::InvalidInput("test field support touches the window boundary".into()));
    }
    if !(h > 0.0) {
        return Err(Error::InvalidInput(format!("quadrature spacing {h} must be positive")));
    }
    let nx = (sup.width() / h).ceil() as usize;
    let ny = (sup.height() / h).ceil() as usize;
    let (hx, hy) = (sup.width() / nx as f64, sup.height() / ny as f64);
    let node = |i: usize, j: usize| Point2::new(sup.x_min + i as f64 * hx, sup.y_min + j as f64 * hy);
    let mut phase = vec![0.0; (nx + 1) * (ny + 1)];
    for j in 0..=ny {
        for i in 0..=nx {
            phase[j * (nx + 1) + i] = u.phase(node(i, j))?;
        }
    }
    let ph = |i: usize, j: usize| phase[j * (nx + 1) + i];
    // Three-point edge-midpoint rule, exact for quadratics on a triangle.
    let integrate_tri = |a: Point2, b: Point2, c: Point2, fb: &[Point2]| -> Result<f64> {
        let area = tri_area(a, b, c);
        if area == 0.0 {
            return Ok(0.0);
        }
        let mut s = 0.0;
        for q in [a.lerp(b, 0.5), b.lerp(c, 0.5), c.lerp(a, 0.5)] {
            s += inner_variation_density(u, psi, q, fb)?;
        }
        Ok(area * s / 3.0)
    };
    let mut total = 0.0;
    for j in 0..ny {
        for i in 0..nx {
            let corners = [node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)];
            let vals = [ph(i, j), ph(i + 1, j), ph(i + 1, j + 1), ph(i, j + 1)];
            for (ka, kb, kc) in [(0, 1, 2), (0, 2, 3)] {
                let p = [corners[ka], corners[kb], corners[kc]];
                let f = [vals[ka], vals[kb], vals[kc]];
                let pos: Vec<Point2> = (0..3).filter(|&k| f[k] > 0.0).map(|k| p[k]).collect();
                if pos.is_empty() {
                    continue;
                }
                let poly = if pos.len() == 3 { p.to_vec() } else { clip_positive(p, f) };
                for k in 1..poly.len() - 1 {
                    total += integrate_tri(poly[0], poly[k], poly[k + 1], &pos)?;
                }
            }
        }
    }
    Ok(total)
}

/// Angles in `[0, 2 pi)` where `phase(x0 + rho e^{i theta})` changes sign, refined by
/// bisection; sorted, without duplicates.
fn phase_crossings<E: Evaluator + ?Sized>(u: &E, x0: Point2, rho: f64, scan: usize) -> Result<Vec<f64>> {
    let at = |t: f64| u.phase(x0 + Point2::from_polar(rho, t)).map(|v| v > 0.0);
    let mut out = Vec::new();
    let dt = 2.0 * PI / scan as f64;
    let mut prev = at(0.0)?;
    for k in 1..=scan {
        let t = k as f64 * dt;
        let cur = at(t)?;
        if cur != prev {
            let (mut a, mut b) = (t - dt, t);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                if at(m)? == prev {
                    a = m;
                } else {
                    b = m;
                }
            }
            out.push(0.5 * (a + b));
        }
        prev = cur;
    }
    Ok(out)
}

/// `int_0^{2 pi} g(theta) d theta` split at the given angles.
fn arc_integral<G: FnMut(f64) -> Result<f64>>(breaks: &[f64], gl: &GaussLegendre, mut g: G) -> Result<f64> {
    let mut pts = vec![0.0];
    pts.extend_from_slice(breaks);
    pts.push(2.0 * PI);
    let mut total = 0.0;
    for w in pts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a <= 0.0 {
            continue;
        }
        // Further split long arcs so the rule stays well resolved.
        let pieces = ((b - a) / (PI / 4.0)).ceil().max(1.0) as usize;
        let step = (b - a) / pieces as f64;
        for k in 0..pieces {
            let (lo, hi) = (a + k as f64 * step, a + (k + 1) as f64 * step);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (x, w) in gl.nodes.iter().zip(&gl.weights) {
                total += w * half * g(mid + half * x)?;
            }
        }
    }
    Ok(total)
}

/// Weiss energy `r^-2 int_{B_r} (|grad u|^2 + 1_{u>0}) - r^-3 int_{dB_r} u^2` in the plane.
///
/// `resolution` is the number of Gauss points per radial panel and per angular arc.
pub fn weiss_energy<E: Evaluator + ?Sized>(u: &E, x0: Point2, r: f64, resolution: usize) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidInput(format!("radius {r} must be positive")));
    }
    if let Some(dom) = u.domain() {
        if !dom.contains(x0 + Point2::new(r, r)) || !dom.contains(x0 - Point2::new(r, r)) {
            return Err(Error::InvalidInput("ball leaves the evaluation window".into()));
        }
    }
    let n = resolution.max(4);
    let gl = GaussLegendre::new(n);
    let scan = 4 * n;
    let bulk_density = |p: Point2| -> Result<f64> {
        if u.phase(p)? <= 0.0 {
            return Ok(0.0);
        }
        let g = u.gradient(p)?;
        Ok(g.dot(g) + 1.0)
    };
    let radial_panels = 4;
    let mut bulk = 0.0;
    for k in 0..radial_panels {
        let (lo, hi) = (r * k as f64 / radial_panels as f64, r * (k + 1) as f64 / radial_panels as f64);
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            let rho = mid + half * x;
            let cuts = phase_crossings(u, x0, rho, scan)?;
            let ring = arc_integral(&cuts, &gl, |t| bulk_density(x0 + Point2::from_polar(rho, t)))?;
            bulk += w * half * rho * ring;
        }
    }
    let cuts = phase_crossings(u, x0, r, scan)?;
    let sphere = arc_integral(&cuts, &gl, |t| {
        let v = u.value(x0 + Point2::from_polar(r, t))?;
        Ok(v * v)
    })? * r;
    Ok(bulk / (r * r) - sphere / (r * r * r))
}

/// Slope `alpha` in `u(x0 + t nu) = alpha t + o(t)`, by polynomial extrapolation of
/// `u(x0 + t nu) / t` to `t = 0` over the probe radii.
pub fn viscosity_slope<E: Evaluator + ?Sized>(u: &E, x0: Point2, nu: Point2, radii: &[f64]) -> Result<f64> {
    if radii.is_empty() || radii.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidInput("probe radii must be positive and nonempty".into()));
    }
    if (nu.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("normal has length {}", nu.norm())));
    }
    let mut ts = Vec::with_capacity(radii.len());
    let mut qs = Vec::with_capacity(radii.len());
    for &t in radii {
        let p = x0 + nu * t;
        if let Some(dom) = u.domain() {
            if !dom.contains(p) {
                return Err(Error::InvalidInput(format!("probe ({}, {}) leaves the window", p.x, p.y)));
            }
        }
        ts.push(t);
        qs.push(u.value(p)? / t);
    }
    Ok(neville_at_zero(&ts, &qs))
}

/// Value at 0 of the interpolating polynomial through `(t_k, q_k)`.
pub fn neville_at_zero(ts: &[f64], qs: &[f64]) -> f64 {
    let mut p = qs.to_vec();
    let n = p.len();
    for m in 1..n {
        for i in 0..n - m {
            p[i] = (ts[i + m] * p[i] - ts[i] * p[i + 1]) / (ts[i + m] - ts[i]);
        }
    }
    p[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solutions::{AnalyticSolution, OneSidedPlane};

    fn square() -> Rect {
        Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap()
    }

    #[test]
    fn energy_of_zero_and_plane() {
        let z = ScalarField2D::zeros(Rect::new(0.0, 1.0, 0.0, 1.0).unwrap(), 0.125).unwrap();
        assert_eq!(ac_energy(&z, 0.0), 0.0);
        let mut last = f64::INFINITY;
        for n in [16, 32, 64] {
            let f = ScalarField2D::sample(square(), 1.0 / n as f64, &AnalyticSolution::half_plane()).unwrap();
            let err = (ac_energy(&f, 1e-12) - 4.0).abs();
            assert!(err < last);
            last = err;
        }
        assert!(last < 0.05);
    }

    #[test]
    fn bump_jacobian_matches_differences() {
        let psi = BumpField::new(Point2::new(0.1, -0.2), 0.7, Point2::new(1.0, 0.5))
            .with_matrix([[0.3, -1.0], [2.0, 0.1]]);
        let p = Point2::new(0.3, 0.1);
        let (_, d) = psi.eval(p);
        let e = 1e-6;
        for j in 0..2 {
            let dp = if j == 0 { Point2::new(e, 0.0) } else { Point2::new(0.0, e) };
            let (a, _) = psi.eval(p + dp);
            let (b, _) = psi.eval(p - dp);
            let col = (a - b) * (0.5 / e);
            assert!((col.x - d[0][j]).abs() < 1e-8);
            assert!((col.y - d[1][j]).abs() < 1e-8);
        }
    }

    #[test]
    fn neville_recovers_linear_limit() {
        let ts = [0.4, 0.2, 0.1];
        let qs: Vec<f64> = ts.iter().map(|t| 2.0 + 3.0 * t - t * t).collect();
        assert!((neville_at_zero(&ts, &qs) - 2.0).abs() < 1e-13);
    }

    #[test]
    fn weiss_energy_of_half_plane() {
        let p = AnalyticSolution::half_plane();
        for r in [0.25, 0.5, 1.0] {
            let w = weiss_energy(&p, Point2::ORIGIN, r, 16).unwrap();
            assert!((w - PI / 2.0).abs() < 1e-10, "{w}");
        }
    }

    #[test]
    fn one_sided_plane_residual_matches_boundary_formula() {
        let psi = BumpField::new(Point2::new(0.2, 0.1), 0.6, Point2::new(1.0, 0.0));
        let s = 0.5;
        let u = OneSidedPlane { slope: s };
        let res = variational_residual(&u, &psi, &square(), 1.0 / 64.0).unwrap();
        // (s^2 - 1) int psi_1(0, y) dy by Gauss-Legendre on the chord.
        let gl = GaussLegendre::new(40);
        let half = (0.36f64 - 0.04).sqrt();
        let line = gl.integrate(0.1 - half, 0.1 + half, |y| psi.eval(Point2::new(0.0, y)).0.x);
        assert!((res - (s * s - 1.0) * line).abs() < 1e-3 * line.abs(), "{res} {line}");
    }
}
