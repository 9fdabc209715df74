//! Free boundary curves, contour extraction and metric diagnostics.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::{Point2, Rect};
use crate::quad::GaussLegendre;
use crate::solutions::{AnalyticSolution, Evaluator};
use crate::variational::ScalarField2D;

/// An ordered polyline; closed curves do not repeat the first vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyCurve {
    pub points: Vec<Point2>,
    pub closed: bool,
}

impl PolyCurve {
    pub fn open(points: Vec<Point2>) -> Self {
        Self {
            points,
            closed: false,
        }
    }

    pub fn closed(points: Vec<Point2>) -> Self {
        Self {
            points,
            closed: true,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Segments in traversal order, including the closing one.
    pub fn segments(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.points.len();
        let m = if self.closed && n > 2 { n } else { n.saturating_sub(1) };
        (0..m).map(move |i| (self.points[i], self.points[(i + 1) % n]))
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b)| a.dist(b)).sum()
    }

    /// Vertices with extra points inserted so no segment exceeds `step`.
    pub fn densified(&self, step: f64) -> Vec<Point2> {
        let mut out = Vec::with_capacity(self.points.len());
        if self.points.len() == 1 {
            out.push(self.points[0]);
        }
        for (a, b) in self.segments() {
            let k = ((a.dist(b) / step).ceil() as usize).max(1);
            for j in 0..k {
                out.push(a.lerp(b, j as f64 / k as f64));
            }
        }
        if !self.closed {
            if let Some(&last) = self.points.last() {
                out.push(last);
            }
        }
        out
    }

    /// Distance from `p` to the polyline.
    pub fn distance_to(&self, p: Point2) -> f64 {
        if self.points.len() == 1 {
            return p.dist(self.points[0]);
        }
        self.segments()
            .map(|(a, b)| point_segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }
}

pub fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let d = b - a;
    let len2 = d.dot(d);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(d) / len2).clamp(0.0, 1.0);
    p.dist(a + d * t)
}

/// The free boundary as a set of curves, positive phase on the left of travel.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FreeBoundary {
    pub components: Vec<PolyCurve>,
}

impl FreeBoundary {
    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn total_length(&self) -> f64 {
        self.components.iter().map(PolyCurve::length).sum()
    }

    pub fn distance_to(&self, p: Point2) -> f64 {
        self.components
            .iter()
            .map(|c| c.distance_to(p))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Sample the part of a parametrized curve lying in `window`.
///
/// `f` is scanned on `[t0, t1]`; each maximal parameter interval inside the window is
/// resampled with `n` equally spaced parameters. A `periodic` curve lying entirely in
/// the window comes back as one closed component.
pub(crate) fn sample_clipped<F: Fn(f64) -> Point2>(
    f: F,
    t0: f64,
    t1: f64,
    window: &Rect,
    n: usize,
    periodic: bool,
) -> Result<Vec<PolyCurve>> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 samples, got {n}")));
    }
    const SCAN: usize = 4096;
    let dt = (t1 - t0) / SCAN as f64;
    let inside = |t: f64| window.contains(f(t));
    let flags: Vec<bool> = (0..=SCAN).map(|k| inside(t0 + k as f64 * dt)).collect();
    if flags.iter().all(|&b| b) && periodic {
        let pts = (0..n)
            .map(|k| f(t0 + (t1 - t0) * k as f64 / n as f64))
            .collect();
        return Ok(vec![PolyCurve::closed(pts)]);
    }
    // Crossing between an inside parameter `a` and an outside parameter `b`.
    let refine = |mut a: f64, mut b: f64| {
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if inside(m) {
                a = m;
            } else {
                b = m;
            }
        }
        a
    };
    let mut runs: Vec<(f64, f64)> = Vec::new();
    let mut k = 0;
    while k <= SCAN {
        if !flags[k] {
            k += 1;
            continue;
        }
        let start = k;
        while k <= SCAN && flags[k] {
            k += 1;
        }
        let end = k - 1;
        let ta = if start == 0 {
            t0
        } else {
            refine(t0 + start as f64 * dt, t0 + (start - 1) as f64 * dt)
        };
        let tb = if end == SCAN {
            t1
        } else {
            refine(t0 + end as f64 * dt, t0 + (end + 1) as f64 * dt)
        };
        runs.push((ta, tb));
    }
    if periodic && runs.len() > 1 && flags[0] && flags[SCAN] {
        // Join the run through the seam.
        let first = runs.remove(0);
        let last = runs.last_mut().expect("at least one run");
        last.1 = first.1 + (t1 - t0);
    }
    let period = t1 - t0;
    let eval = |t: f64| {
        if periodic && t > t1 {
            f(t - period)
        } else {
            f(t)
        }
    };
    Ok(runs
        .into_iter()
        .filter(|(a, b)| b - a > 1e-12 * period.abs().max(1.0))
        .map(|(a, b)| {
            let pts = (0..n)
                .map(|j| eval(a + (b - a) * j as f64 / (n - 1) as f64))
                .collect();
            PolyCurve::open(pts)
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Contour extraction
// ---------------------------------------------------------------------------

/// Edge of the grid: horizontal `(i, j)-(i+1, j)` or vertical `(i, j)-(i, j+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum EdgeKey {
    H(usize, usize),
    V(usize, usize),
}

/// Zero-level contour of `v - eps` on a grid field, oriented with `{v > eps}` on the
/// left. Nodes with `v <= eps` count as zero phase; saddle cells are resolved by the
/// mean of the four corner values.
pub fn extract_boundary(f: &ScalarField2D, eps: f64) -> FreeBoundary {
    let w = f.window();
    contour_lines(Point2::new(w.x_min, w.y_min), f.h(), f.nx(), f.ny(), f.values(), eps)
}

/// Zero-level contour of `values - eps` on a row-major grid with lower-left node
/// `origin` and spacing `h`.
pub(crate) fn contour_lines(origin: Point2, h: f64, nx: usize, ny: usize, values: &[f64], eps: f64) -> FreeBoundary {
    let phi = |i: usize, j: usize| values[j * nx + i] - eps;
    let node = |i: usize, j: usize| Point2::new(origin.x + i as f64 * h, origin.y + j as f64 * h);
    let point_on = |e: EdgeKey| -> Point2 {
        let ((ia, ja), (ib, jb)) = match e {
            EdgeKey::H(i, j) => ((i, j), (i + 1, j)),
            EdgeKey::V(i, j) => ((i, j), (i, j + 1)),
        };
        let (fa, fb) = (phi(ia, ja), phi(ib, jb));
        let t = fa / (fa - fb);
        node(ia, ja).lerp(node(ib, jb), t)
    };
    let mut next: BTreeMap<EdgeKey, EdgeKey> = BTreeMap::new();
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let corners = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)];
            let edges = [EdgeKey::H(i, j), EdgeKey::V(i + 1, j), EdgeKey::H(i, j + 1), EdgeKey::V(i, j)];
            let vals: Vec<f64> = corners.iter().map(|&(a, b)| phi(a, b)).collect();
            let pos: Vec<bool> = vals.iter().map(|&v| v > 0.0).collect();
            // Crossings in counter-clockwise order: (edge index, leaving the positive side).
            let crossings: Vec<(usize, bool)> = (0..4)
                .filter(|&k| pos[k] != pos[(k + 1) % 4])
                .map(|k| (k, pos[k]))
                .collect();
            if crossings.is_empty() {
                continue;
            }
            let center_positive = vals.iter().sum::<f64>() / 4.0 > 0.0;
            let m = crossings.len();
            for (idx, &(k, leaving)) in crossings.iter().enumerate() {
                if !leaving {
                    continue;
                }
                // Pair with the next entering crossing (positive center) or the previous one.
                let partner = if m == 2 || center_positive {
                    crossings[(idx + 1) % m]
                } else {
                    crossings[(idx + m - 1) % m]
                };
                next.insert(edges[k], edges[partner.0]);
            }
        }
    }
    let ends: std::collections::BTreeSet<EdgeKey> = next.values().copied().collect();
    let mut components = Vec::new();
    let mut used: std::collections::BTreeSet<EdgeKey> = Default::default();
    let push = |keys: Vec<EdgeKey>, closed: bool, comps: &mut Vec<PolyCurve>| {
        let mut pts: Vec<Point2> = Vec::with_capacity(keys.len());
        for k in keys {
            let p = point_on(k);
            if pts.last().map_or(true, |q: &Point2| q.dist(p) > 0.0) {
                pts.push(p);
            }
        }
        if closed && pts.len() > 1 && pts[0].dist(*pts.last().unwrap()) == 0.0 {
            pts.pop();
        }
        if pts.len() >= 2 {
            let closed = closed && pts.len() >= 3;
            comps.push(PolyCurve { points: pts, closed });
        }
    };
    let starts: Vec<EdgeKey> = next.keys().copied().filter(|k| !ends.contains(k)).collect();
    for s in starts {
        let mut keys = vec![s];
        used.insert(s);
        let mut cur = s;
        while let Some(&n) = next.get(&cur) {
            keys.push(n);
            if !used.insert(n) {
                break;
            }
            cur = n;
        }
        push(keys, false, &mut components);
    }
    let remaining: Vec<EdgeKey> = next.keys().copied().collect();
    for s in remaining {
        if used.contains(&s) {
            continue;
        }
        let mut keys = vec![s];
        used.insert(s);
        let mut cur = s;
        while let Some(&n) = next.get(&cur) {
            if n == s || !used.insert(n) {
                break;
            }
            keys.push(n);
            cur = n;
        }
        push(keys, true, &mut components);
    }
    FreeBoundary { components }
}

// ---------------------------------------------------------------------------
// Metric diagnostics
// ---------------------------------------------------------------------------

/// Symmetric Hausdorff distance between two curve sets, measured from the vertices
/// of each set (densified to spacing `step`) to the polylines of the other.
pub fn hausdorff(a: &[PolyCurve], b: &[PolyCurve], step: f64) -> Result<f64> {
    if a.iter().all(PolyCurve::is_empty) || b.iter().all(PolyCurve::is_empty) {
        return Err(Error::InvalidInput("Hausdorff distance of an empty curve set".into()));
    }
    if !(step > 0.0) {
        return Err(Error::InvalidInput(format!("densification step {step} must be positive")));
    }
    Ok(directed_hausdorff(a, b, step).max(directed_hausdorff(b, a, step)))
}

/// `sup_{p in a} dist(p, b)` over the densified vertices of `a`.
pub fn directed_hausdorff(a: &[PolyCurve], b: &[PolyCurve], step: f64) -> f64 {
    let segs: Vec<(Point2, Point2)> = b
        .iter()
        .flat_map(|c| {
            if c.points.len() == 1 {
                vec![(c.points[0], c.points[0])]
            } else {
                c.segments().collect()
            }
        })
        .collect();
    // Bucket segments on a coarse grid so each query only scans nearby cells first.
    let index = SegmentIndex::new(&segs);
    let mut worst: f64 = 0.0;
    for c in a {
        for p in c.densified(step) {
            worst = worst.max(index.distance(p));
        }
    }
    worst
}

struct SegmentIndex<'a> {
    segs: &'a [(Point2, Point2)],
    origin: Point2,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl<'a> SegmentIndex<'a> {
    fn new(segs: &'a [(Point2, Point2)]) -> Self {
        let (mut lo, mut hi) = (Point2::new(f64::MAX, f64::MAX), Point2::new(f64::MIN, f64::MIN));
        let mut total = 0.0;
        for &(p, q) in segs {
            lo = Point2::new(lo.x.min(p.x).min(q.x), lo.y.min(p.y).min(q.y));
            hi = Point2::new(hi.x.max(p.x).max(q.x), hi.y.max(p.y).max(q.y));
            total += p.dist(q);
        }
        let extent = (hi.x - lo.x).max(hi.y - lo.y).max(1e-12);
        let mean = (total / segs.len().max(1) as f64).max(extent / 256.0);
        let cell = (4.0 * mean).max(extent / 256.0);
        let nx = ((hi.x - lo.x) / cell).floor() as usize + 1;
        let ny = ((hi.y - lo.y) / cell).floor() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        for (k, &(p, q)) in segs.iter().enumerate() {
            let i0 = ((p.x.min(q.x) - lo.x) / cell).floor() as usize;
            let i1 = (((p.x.max(q.x) - lo.x) / cell).floor() as usize).min(nx - 1);
            let j0 = ((p.y.min(q.y) - lo.y) / cell).floor() as usize;
            let j1 = (((p.y.max(q.y) - lo.y) / cell).floor() as usize).min(ny - 1);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets[j * nx + i].push(k);
                }
            }
        }
        Self { segs, origin: lo, cell, nx, ny, buckets }
    }

    fn distance(&self, p: Point2) -> f64 {
        let ci = ((p.x - self.origin.x) / self.cell).floor();
        let cj = ((p.y - self.origin.y) / self.cell).floor();
        let mut best = f64::INFINITY;
        let max_ring = self.nx.max(self.ny) as i64 + 1;
        for ring in 0..=max_ring {
            // Everything outside this ring is at least `ring * cell` away... minus one cell.
            if best <= (ring as f64 - 1.0).max(0.0) * self.cell {
                break;
            }
            let r = ring;
            for dj in -r..=r {
                for di in -r..=r {
                    if di.abs() != r && dj.abs() != r {
                        continue;
                    }
                    let (i, j) = (ci as i64 + di, cj as i64 + dj);
                    if i < 0 || j < 0 || i >= self.nx as i64 || j >= self.ny as i64 {
                        continue;
                    }
                    for &k in &self.buckets[j as usize * self.nx + i as usize] {
                        let (a, b) = self.segs[k];
                        best = best.min(point_segment_distance(p, a, b));
                    }
                }
            }
        }
        if best.is_infinite() {
            // Query far outside the indexed box.
            best = self
                .segs
                .iter()
                .map(|&(a, b)| point_segment_distance(p, a, b))
                .fold(f64::INFINITY, f64::min);
        }
        best
    }
}

/// Signed curvature `2 sin(turn) / |chord|` from the circumcircle of consecutive
/// vertices, positive when the curve turns left. Endpoints of open curves get `None`;
/// collinear triples give 0.
pub fn curve_curvature(c: &PolyCurve) -> Result<Vec<Option<f64>>> {
    let n = c.points.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!("curvature needs 3 vertices, got {n}")));
    }
    Ok((0..n)
        .map(|k| {
            if !c.closed && (k == 0 || k == n - 1) {
                return None;
            }
            let a = c.points[(k + n - 1) % n];
            let b = c.points[k];
            let d = c.points[(k + 1) % n];
            let cross = (b - a).cross(d - b);
            let denom = a.dist(b) * b.dist(d) * a.dist(d);
            if cross == 0.0 || denom == 0.0 {
                Some(0.0)
            } else {
                Some(2.0 * cross / denom)
            }
        })
        .collect())
}

/// Maximum of `u` on the circle of radius `r` about `center`, sampled at `samples`
/// equally spaced points, with the non-degeneracy ratio `max / r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleMax {
    pub max: f64,
    pub ratio: f64,
}

pub fn circle_max<E: Evaluator + ?Sized>(u: &E, center: Point2, r: f64, samples: usize) -> Result<CircleMax> {
    if !(r > 0.0) {
        return Err(Error::InvalidInput(format!("radius {r} must be positive")));
    }
    let n = samples.max(1);
    let mut best = f64::NEG_INFINITY;
    for k in 0..n {
        let t = 2.0 * PI * k as f64 / n as f64;
        best = best.max(u.value(center + Point2::from_polar(r, t))?);
    }
    Ok(CircleMax { max: best, ratio: best / r })
}

// ---------------------------------------------------------------------------
// Flux balance
// ---------------------------------------------------------------------------

/// Boundary flux of `grad u` out of `polygon ∩ {u > 0}`, split into the part carried
/// by the free boundary and the part carried by the polygon edges.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxReport {
    pub net_flux: f64,
    pub fb_flux: f64,
    pub rest_flux: f64,
    /// Length of the free boundary inside the polygon.
    pub fb_measure: f64,
    /// Length of the polygon edges lying in the positive phase.
    pub rest_measure: f64,
    /// Largest `|grad u|` met on the polygon edges.
    pub lipschitz: f64,
    /// `fb_measure <= lipschitz * rest_measure`.
    pub inequality_holds: bool,
}

/// Samples per free boundary component used by [`flux_balance`].
pub const FLUX_FB_SAMPLES: usize = 60_000;

fn signed_area(poly: &[Point2]) -> f64 {
    let n = poly.len();
    0.5 * (0..n).map(|k| poly[k].cross(poly[(k + 1) % n])).sum::<f64>()
}

/// Parameters `(t, s)` with `a + t (b - a) = c + s (d - c)`, both in `[0, 1]`.
fn segment_intersection(a: Point2, b: Point2, c: Point2, d: Point2) -> Option<(f64, f64)> {
    let r = b - a;
    let q = d - c;
    let den = r.cross(q);
    if den == 0.0 {
        return None;
    }
    let t = (c - a).cross(q) / den;
    let s = (c - a).cross(r) / den;
    ((0.0..=1.0).contains(&t) && (0.0..=1.0).contains(&s)).then_some((t, s))
}

/// Even-odd point in polygon test.
pub fn point_in_polygon(p: Point2, poly: &[Point2]) -> bool {
    let n = poly.len();
    let mut inside = false;
    for k in 0..n {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// Rejects polygons with fewer than 3 vertices, zero area or crossing edges.
pub fn validate_polygon(poly: &[Point2]) -> Result<()> {
    let n = poly.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!("polygon needs 3 vertices, got {n}")));
    }
    if poly.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidInput("polygon vertex is not finite".into()));
    }
    if signed_area(poly).abs() == 0.0 {
        return Err(Error::InvalidInput("polygon has zero area".into()));
    }
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            let (c, d) = (poly[j], poly[(j + 1) % n]);
            if segment_intersection(a, b, c, d).is_some() {
                return Err(Error::InvalidInput(format!("polygon edges {i} and {j} cross")));
            }
        }
    }
    Ok(())
}

/// Flux balance of a global solution over `polygon ∩ {u > 0}`.
///
/// Polygon edges are split where they meet the free boundary and integrated with a
/// three-point Gauss rule on panels no longer than `step`. The free boundary part uses
/// the one-sided gradient on each positive side, so two-sided boundaries count twice.
pub fn flux_balance(u: &AnalyticSolution, polygon: &[Point2], step: f64) -> Result<FluxReport> {
    validate_polygon(polygon)?;
    if !(step > 0.0) {
        return Err(Error::InvalidInput(format!("quadrature step {step} must be positive")));
    }
    let ccw = signed_area(polygon) > 0.0;
    let n = polygon.len();
    let (mut lo, mut hi) = (polygon[0], polygon[0]);
    for p in polygon {
        lo = Point2::new(lo.x.min(p.x), lo.y.min(p.y));
        hi = Point2::new(hi.x.max(p.x), hi.y.max(p.y));
    }
    let pad = 1e-3 * (hi - lo).norm();
    let window = Rect::new(lo.x - pad, hi.x + pad, lo.y - pad, hi.y + pad)?;
    let fb = u.free_boundary_curves(&window, FLUX_FB_SAMPLES)?;
    let fb_segs: Vec<(Point2, Point2)> = fb.components.iter().flat_map(|c| c.segments()).collect();

    let gl = GaussLegendre::new(3);
    let (mut rest_flux, mut rest_measure, mut lipschitz) = (0.0, 0.0, 0.0f64);
    for k in 0..n {
        let (a, b) = (polygon[k], polygon[(k + 1) % n]);
        let len = a.dist(b);
        let d = (b - a) * (1.0 / len);
        let normal = if ccw { Point2::new(d.y, -d.x) } else { Point2::new(-d.y, d.x) };
        let mut cuts = vec![0.0, 1.0];
        for &(c, e) in &fb_segs {
            if let Some((t, _)) = segment_intersection(a, b, c, e) {
                cuts.push(t);
            }
        }
        cuts.sort_by(|x, y| x.total_cmp(y));
        for w in cuts.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            if (t1 - t0) * len <= 1e-14 {
                continue;
            }
            if u.phase(a.lerp(b, 0.5 * (t0 + t1)))? <= 0.0 {
                continue;
            }
            let piece = (t1 - t0) * len;
            let panels = (piece / step).ceil().max(1.0) as usize;
            let mut err = None;
            let flux = gl.integrate_composite(t0 * len, t1 * len, panels, |s| {
                match u.eval_grad(a + d * s) {
                    Ok(g) => {
                        lipschitz = lipschitz.max(g.norm());
                        g.dot(normal)
                    }
                    Err(e) => {
                        err.get_or_insert(e);
                        0.0
                    }
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
            rest_flux += flux;
            rest_measure += piece;
        }
    }

    // |grad u| summed over the positive sides of a free boundary vertex.
    let side_gradient = |p: Point2, tangent: Point2| -> Result<f64> {
        let left = tangent.perp() * (1.0 / tangent.norm());
        let off = 1e-8 * (1.0 + p.norm());
        let mut total = 0.0;
        for side in [left, -left] {
            let q = p + side * off;
            if u.phase(q)? > 0.0 {
                // One-sided gradient on the curve itself, else extrapolated from two offsets.
                total += match u.eval_grad(p) {
                    Ok(g) => g.norm(),
                    Err(_) => 2.0 * u.eval_grad(q)?.norm() - u.eval_grad(p + side * (2.0 * off))?.norm(),
                };
            }
        }
        Ok(total)
    };
    let (mut fb_flux, mut fb_measure) = (0.0, 0.0);
    for comp in &fb.components {
        let m = comp.points.len();
        if m < 2 {
            continue;
        }
        let tangent_at = |i: usize| -> Point2 {
            let prev = if i > 0 { comp.points[i - 1] } else if comp.closed { comp.points[m - 1] } else { comp.points[i] };
            let next = if i + 1 < m { comp.points[i + 1] } else if comp.closed { comp.points[0] } else { comp.points[i] };
            next - prev
        };
        let mut grads: Vec<Option<f64>> = vec![None; m];
        let mut grad_at = |i: usize| -> Result<f64> {
            if let Some(g) = grads[i] {
                return Ok(g);
            }
            let g = side_gradient(comp.points[i], tangent_at(i))?;
            grads[i] = Some(g);
            Ok(g)
        };
        let segs = if comp.closed { m } else { m - 1 };
        for i in 0..segs {
            let j = (i + 1) % m;
            let (p, q) = (comp.points[i], comp.points[j]);
            let mut cuts = vec![0.0, 1.0];
            for e in 0..n {
                if let Some((t, _)) = segment_intersection(p, q, polygon[e], polygon[(e + 1) % n]) {
                    cuts.push(t);
                }
            }
            cuts.sort_by(|x, y| x.total_cmp(y));
            for w in cuts.windows(2) {
                let (t0, t1) = (w[0], w[1]);
                if !point_in_polygon(p.lerp(q, 0.5 * (t0 + t1)), polygon) {
                    continue;
                }
                let piece = (t1 - t0) * p.dist(q);
                let (gi, gj) = (grad_at(i)?, grad_at(j)?);
                let g = gi + (gj - gi) * 0.5 * (t0 + t1);
                fb_measure += piece;
                fb_flux -= g * piece;
            }
        }
    }
    Ok(FluxReport {
        net_flux: rest_flux + fb_flux,
        fb_flux,
        rest_flux,
        fb_measure,
        rest_measure,
        lipschitz,
        inequality_holds: fb_measure <= lipschitz * rest_measure * (1.0 + 1e-12),
    })
}

// ---------------------------------------------------------------------------
// Grid topology helpers
// ---------------------------------------------------------------------------

/// Square grid over `[-half, half]^2` with spacing close to `h`, storing the sign of
/// the phase function and its value.
struct PhaseGrid {
    n: usize,
    half: f64,
    h: f64,
    phase: Vec<f64>,
}

impl PhaseGrid {
    fn sample<E: Evaluator + ?Sized>(u: &E, half: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || h > half {
            return Err(Error::InvalidInput(format!("grid spacing {h} must be in (0, {half}]")));
        }
        let cells = (2.0 * half / h).round().max(2.0) as usize;
        let cells = cells + cells % 2;
        let n = cells + 1;
        let h = 2.0 * half / cells as f64;
        let mut phase = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                phase[j * n + i] = u.phase(Point2::new(-half + i as f64 * h, -half + j as f64 * h))?;
            }
        }
        Ok(Self { n, half, h, phase })
    }

    fn node(&self, i: usize, j: usize) -> Point2 {
        Point2::new(-self.half + i as f64 * self.h, -self.half + j as f64 * self.h)
    }

    fn positive(&self, i: usize, j: usize) -> bool {
        self.phase[j * self.n + i] > 0.0
    }

    fn contour(&self) -> FreeBoundary {
        contour_lines(Point2::new(-self.half, -self.half), self.h, self.n, self.n, &self.phase, 0.0)
    }

    /// Connected components of nodes satisfying `keep`; labels are component indices.
    fn components<F: Fn(usize, usize) -> bool>(&self, keep: F, diagonal: bool) -> (Vec<Option<usize>>, usize) {
        let n = self.n;
        let mut label = vec![None; n * n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..n * n {
            if label[start].is_some() || !keep(start % n, start / n) {
                continue;
            }
            label[start] = Some(count);
            stack.push(start);
            while let Some(k) = stack.pop() {
                let (i, j) = ((k % n) as i64, (k / n) as i64);
                for dj in -1..=1i64 {
                    for di in -1..=1i64 {
                        if (di == 0 && dj == 0) || (!diagonal && di != 0 && dj != 0) {
                            continue;
                        }
                        let (a, b) = (i + di, j + dj);
                        if a < 0 || b < 0 || a >= n as i64 || b >= n as i64 {
                            continue;
                        }
                        let idx = b as usize * n + a as usize;
                        if label[idx].is_none() && keep(a as usize, b as usize) {
                            label[idx] = Some(count);
                            stack.push(idx);
                        }
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }

    fn count_in_disk(&self, r: f64, positive: bool) -> usize {
        self.components(|i, j| self.node(i, j).norm() < r && self.positive(i, j) == positive, false).1
    }
}

// ---------------------------------------------------------------------------
// Flatness classification
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlatCase {
    /// One free boundary graph across `B_1`.
    A,
    /// Two graphs `g1 < g2` enclosing the zero phase.
    B,
    /// Two zero phase components in `B_2` joined through a positive neck.
    C,
}

impl std::fmt::Display for FlatCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            FlatCase::A => "A",
            FlatCase::B => "B",
            FlatCase::C => "C",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroComponent {
    pub x2_min: f64,
    pub x2_max: f64,
    pub reaches_outer: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatReport {
    pub case: FlatCase,
    /// Hausdorff distance from the free boundary in `B_3` to the vertical segment.
    pub flatness: f64,
    pub delta: f64,
    pub positive_b1: usize,
    pub zero_b1: usize,
    pub positive_b2: usize,
    pub zero_b2: usize,
    /// Witness graphs as points `(g(x2), x2)`: one for case A, two for case B.
    pub graphs: Vec<Vec<Point2>>,
    /// Zero phase components of `B_2` (case C witness).
    pub zero_components: Vec<ZeroComponent>,
}

/// Classify a solution whose free boundary is `delta`-close to the vertical segment in
/// `B_3`, by counting phase components of the grid with spacing `h`.
pub fn classify_flat<E: Evaluator + ?Sized>(u: &E, delta: f64, h: f64) -> Result<FlatReport> {
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!("delta {delta} must be positive")));
    }
    let grid = PhaseGrid::sample(u, 3.0, h)?;
    let h = grid.h;
    let contour = grid.contour();
    let inside = clip_to_disk(&contour, 3.0);
    let segment = [PolyCurve::open(vec![Point2::new(0.0, -3.0), Point2::new(0.0, 3.0)])];
    let flatness = if inside.is_empty() { f64::INFINITY } else { hausdorff(&inside, &segment, 0.25 * h)? };
    if flatness > 1.1 * delta {
        return Err(Error::Precondition(format!(
            "free boundary is {flatness:.3e} from the vertical segment in B_3, above delta = {delta:.3e}"
        )));
    }
    let positive_b1 = grid.count_in_disk(1.0, true);
    let zero_b1 = grid.count_in_disk(1.0, false);
    let positive_b2 = grid.count_in_disk(2.0, true);
    let zero_b2 = grid.count_in_disk(2.0, false);
    let case = if positive_b2 == 1 && zero_b2 == 2 {
        FlatCase::C
    } else if positive_b1 == 1 && zero_b1 == 1 {
        FlatCase::A
    } else if positive_b1 == 2 && zero_b1 == 1 {
        FlatCase::B
    } else {
        return Err(Error::Topology(format!(
            "unclassified: B_1 has {positive_b1} positive and {zero_b1} zero components, \
             B_2 has {positive_b2} positive and {zero_b2} zero components"
        )));
    };
    let mut graphs = Vec::new();
    let mut zero_components = Vec::new();
    match case {
        FlatCase::A | FlatCase::B => {
            let want = if case == FlatCase::A { 1 } else { 2 };
            graphs = vec![Vec::new(); want];
            for j in 0..grid.n {
                let x2 = grid.node(0, j).y;
                if x2.abs() >= 1.0 {
                    continue;
                }
                let reach = (1.0 - x2 * x2).sqrt();
                let mut xs = Vec::new();
                for i in 0..grid.n - 1 {
                    let (p, q) = (grid.node(i, j), grid.node(i + 1, j));
                    if p.x.abs() >= reach || q.x.abs() >= reach || grid.positive(i, j) == grid.positive(i + 1, j) {
                        continue;
                    }
                    let (fa, fb) = (grid.phase[j * grid.n + i], grid.phase[j * grid.n + i + 1]);
                    xs.push(p.x + h * fa / (fa - fb));
                }
                if xs.len() != want {
                    return Err(Error::Topology(format!(
                        "row x2 = {x2:.4} crosses the free boundary {} times, expected {want}",
                        xs.len()
                    )));
                }
                for (g, x) in graphs.iter_mut().zip(xs) {
                    g.push(Point2::new(x, x2));
                }
            }
        }
        FlatCase::C => {
            let (label, count) = grid.components(|i, j| grid.node(i, j).norm() < 2.0 && !grid.positive(i, j), false);
            zero_components = vec![
                ZeroComponent { x2_min: f64::INFINITY, x2_max: f64::NEG_INFINITY, reaches_outer: false };
                count
            ];
            for (k, l) in label.iter().enumerate() {
                if let Some(c) = *l {
                    let p = grid.node(k % grid.n, k / grid.n);
                    let z = &mut zero_components[c];
                    z.x2_min = z.x2_min.min(p.y);
                    z.x2_max = z.x2_max.max(p.y);
                    z.reaches_outer |= p.norm() > 2.0 - 2.0 * h;
                }
            }
        }
    }
    Ok(FlatReport {
        case,
        flatness,
        delta,
        positive_b1,
        zero_b1,
        positive_b2,
        zero_b2,
        graphs,
        zero_components,
    })
}

/// Maximal runs of curve vertices strictly inside the disk of radius `r`.
fn clip_to_disk(fb: &FreeBoundary, r: f64) -> Vec<PolyCurve> {
    let mut out = Vec::new();
    for c in &fb.components {
        let mut run: Vec<Point2> = Vec::new();
        for &p in &c.points {
            if p.norm() < r {
                run.push(p);
            } else if !run.is_empty() {
                out.push(PolyCurve::open(std::mem::take(&mut run)));
            }
        }
        if !run.is_empty() {
            out.push(PolyCurve::open(run));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Annulus flatness
// ---------------------------------------------------------------------------

/// Inner radius multiple excluded when measuring flatness.
pub const ANNULUS_HOLE_FACTOR: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleReport {
    pub r: f64,
    /// Rotation angle of the best fitting frame.
    pub rotation: f64,
    /// `sup |u 1_T(rho x) - x1^+| / r` over the sampled annulus.
    pub flatness: f64,
    /// Largest difference quotient of the fitted graph.
    pub max_slope: f64,
    /// Points `(g(x2), x2)` of the free boundary of `T` in the rotated frame.
    pub graph: Vec<Point2>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusReport {
    pub delta: f64,
    pub fb_components: usize,
    pub positive_components: usize,
    pub scales: Vec<ScaleReport>,
}

/// Flatness of one positive component `T` of `u` in `B_1 \ B_delta` at each scale `r`.
///
/// Requires the free boundary in the annulus to consist of two strands joining the
/// inner circle to the outer one. The rotation is chosen by a 360 point scan refined by
/// golden section, then aligned with the least squares line of the fitted graph.
pub fn annulus_flat_check<E: Evaluator + ?Sized>(u: &E, delta: f64, scales: &[f64], h: f64) -> Result<AnnulusReport> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::InvalidInput(format!("inner radius {delta} must lie in (0, 0.5)")));
    }
    let grid = PhaseGrid::sample(u, 1.0, h)?;
    let h = grid.h;
    let n = grid.n;
    let in_annulus = |i: usize, j: usize| {
        let r = grid.node(i, j).norm();
        r > delta && r < 1.0
    };
    let is_fb = |i: usize, j: usize| {
        if !in_annulus(i, j) || grid.positive(i, j) {
            return false;
        }
        [(1i64, 0i64), (-1, 0), (0, 1), (0, -1)].iter().any(|&(di, dj)| {
            let (a, b) = (i as i64 + di, j as i64 + dj);
            a >= 0 && b >= 0 && a < n as i64 && b < n as i64 && in_annulus(a as usize, b as usize) && grid.positive(a as usize, b as usize)
        })
    };
    let (fb_label, fb_count) = grid.components(is_fb, true);
    let mut touches = vec![(false, false); fb_count];
    for (k, l) in fb_label.iter().enumerate() {
        if let Some(c) = *l {
            let r = grid.node(k % n, k / n).norm();
            touches[c].0 |= r <= delta + 2.0 * h;
            touches[c].1 |= r >= 1.0 - 2.0 * h;
        }
    }
    if fb_count != 2 || touches.iter().any(|&(a, b)| !(a && b)) {
        return Err(Error::Topology(format!(
            "free boundary in the annulus has {fb_count} components; need two joining the circles"
        )));
    }
    let (pos_label, pos_count) = grid.components(|i, j| in_annulus(i, j) && grid.positive(i, j), false);
    if pos_count == 0 {
        return Err(Error::Topology("no positive phase in the annulus".into()));
    }
    let mut sizes = vec![0usize; pos_count];
    for c in pos_label.iter().flatten() {
        sizes[*c] += 1;
    }
    let target = (0..pos_count).fold(0, |best, c| if sizes[c] > sizes[best] { c } else { best });

    // u 1_T at an arbitrary point, deciding membership from the surrounding nodes.
    let in_t = |p: Point2| -> Result<bool> {
        let r = p.norm();
        if r <= delta || r >= 1.0 || u.phase(p)? <= 0.0 {
            return Ok(false);
        }
        let fi = ((p.x + 1.0) / h).floor().clamp(0.0, (n - 2) as f64) as usize;
        let fj = ((p.y + 1.0) / h).floor().clamp(0.0, (n - 2) as f64) as usize;
        Ok([(0, 0), (1, 0), (0, 1), (1, 1)]
            .iter()
            .any(|&(di, dj)| pos_label[(fj + dj) * n + fi + di] == Some(target)))
    };
    let w = |p: Point2| -> Result<f64> { if in_t(p)? { u.value(p) } else { Ok(0.0) } };

    let mut reports = Vec::new();
    for &r in scales {
        let inner = ANNULUS_HOLE_FACTOR * delta;
        if !(r > inner && r <= 1.0) {
            return Err(Error::InvalidInput(format!("scale {r} must lie in ({inner}, 1]")));
        }
        let (nr, na) = (48, 256);
        let samples: Vec<Point2> = (0..nr)
            .flat_map(|a| {
                let rad = inner + (r - inner) * (a as f64 + 0.5) / nr as f64;
                (0..na).map(move |b| Point2::from_polar(rad, 2.0 * PI * b as f64 / na as f64))
            })
            .collect();
        let objective = |theta: f64| -> Result<f64> {
            let rho = crate::solutions::RigidMotion::rotation(theta);
            let mut worst: f64 = 0.0;
            for &x in &samples {
                worst = worst.max((w(rho.rotate(x))? - x.x.max(0.0)).abs());
            }
            Ok(worst)
        };
        let mut best = (0.0, f64::INFINITY);
        for k in 0..360 {
            let t = 2.0 * PI * k as f64 / 360.0;
            let v = objective(t)?;
            if v < best.1 {
                best = (t, v);
            }
        }
        let theta = golden_section(best.0 - 2.0 * PI / 360.0, best.0 + 2.0 * PI / 360.0, 1e-4, &objective)?;
        let mut theta = theta;
        let mut graph = Vec::new();
        for _ in 0..3 {
            graph = fit_graph(&in_t, theta, r, inner)?;
            if graph.len() < 2 {
                break;
            }
            let m = least_squares_slope(&graph);
            if m.abs() < 1e-14 {
                break;
            }
            theta -= m.atan();
        }
        let flatness = objective(theta)? / r;
        let mut max_slope: f64 = 0.0;
        for pair in graph.windows(2) {
            let dy = pair[1].y - pair[0].y;
            // Skip the jump across the hole.
            if dy > 0.0 && pair[0].y.signum() == pair[1].y.signum() {
                max_slope = max_slope.max((pair[1].x - pair[0].x).abs() / dy);
            }
        }
        reports.push(ScaleReport { r, rotation: theta.rem_euclid(2.0 * PI), flatness, max_slope, graph });
    }
    Ok(AnnulusReport { delta, fb_components: fb_count, positive_components: pos_count, scales: reports })
}

fn golden_section<F: Fn(f64) -> Result<f64>>(mut a: f64, mut b: f64, tol: f64, f: &F) -> Result<f64> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// Boundary of `T` along horizontal rows of the frame rotated by `theta`: the first
/// entry point into `T` scanning from the left, refined by bisection.
fn fit_graph<F: Fn(Point2) -> Result<bool>>(in_t: &F, theta: f64, r: f64, inner: f64) -> Result<Vec<Point2>> {
    let rho = crate::solutions::RigidMotion::rotation(theta);
    let rows = 64;
    let scan = 512;
    let mut graph = Vec::new();
    for k in 0..rows {
        let x2 = -r + 2.0 * r * (k as f64 + 0.5) / rows as f64;
        if x2.abs() <= inner {
            continue;
        }
        let reach = (r * r - x2 * x2).sqrt();
        let at = |x1: f64| in_t(rho.rotate(Point2::new(x1, x2)));
        let mut prev = -reach;
        let mut prev_in = at(prev)?;
        for s in 1..=scan {
            let x1 = -reach + 2.0 * reach * s as f64 / scan as f64;
            let now = at(x1)?;
            if now && !prev_in {
                let (mut lo, mut hi) = (prev, x1);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if at(mid)? {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                graph.push(Point2::new(0.5 * (lo + hi), x2));
                break;
            }
            prev = x1;
            prev_in = now;
        }
    }
    Ok(graph)
}

fn least_squares_slope(pts: &[Point2]) -> f64 {
    let m = pts.len() as f64;
    let my = pts.iter().map(|p| p.y).sum::<f64>() / m;
    let mx = pts.iter().map(|p| p.x).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.y - my) * (p.x - mx)).sum();
    let syy: f64 = pts.iter().map(|p| (p.y - my) * (p.y - my)).sum();
    if syy == 0.0 { 0.0 } else { sxy / syy }
}
