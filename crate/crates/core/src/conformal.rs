//! Conformal charts between model domains and positive phases.
//!
//! Three charts are provided:
//! * the strip chart `zeta + sinh(zeta)` on `|Im zeta| < pi/2` (double hairpin),
//! * the slit half-plane chart `Phi_a` (right half of the double hairpin),
//! * the Scherk strip chart `Phi_s`, defined by a path integral of `exp(phi_s)`.
//!
//! All logarithms and square roots use the principal branch. Inversion is by damped
//! Newton iteration with a homotopy fallback that walks the target along a path
//! from an anchor on the real axis.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::point::Point2;
use crate::quad::AdaptiveGk;

type C = Complex64;

const I: C = C { re: 0.0, im: 1.0 };

fn c(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// Tolerances for Newton inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-13,
            max_iter: 60,
        }
    }
}

/// Damped Newton iteration for `f(x) = target` where `f` returns value and derivative.
/// `admissible` rejects iterates outside the (closed) model domain.
fn damped_newton<F, A>(
    start: C,
    target: C,
    opts: NewtonOptions,
    f: F,
    admissible: A,
) -> std::result::Result<C, (C, f64)>
where
    F: FnMut(C) -> Option<(C, C)>,
    A: Fn(C) -> bool,
{
    projected_newton(start, target, opts, f, admissible, |w| w)
}

/// Damped Newton where inadmissible trial points are first pulled back by `project`.
fn projected_newton<F, A, P>(
    start: C,
    target: C,
    opts: NewtonOptions,
    mut f: F,
    admissible: A,
    project: P,
) -> std::result::Result<C, (C, f64)>
where
    F: FnMut(C) -> Option<(C, C)>,
    A: Fn(C) -> bool,
    P: Fn(C) -> C,
{
    let scale = target.norm().max(1.0);
    let mut x = start;
    let Some((mut fx, mut dfx)) = f(x) else {
        return Err((x, f64::INFINITY));
    };
    let mut res = (fx - target).norm();
    for _ in 0..opts.max_iter {
        if res <= opts.tol * scale {
            return Ok(x);
        }
        let step = (fx - target) / dfx;
        if !step.re.is_finite() || !step.im.is_finite() {
            return Err((x, res));
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let mut cand = x - step * t;
            if !admissible(cand) {
                cand = project(cand);
            }
            if admissible(cand) {
                if let Some((fc, dfc)) = f(cand) {
                    let rc = (fc - target).norm();
                    if rc < res || rc <= opts.tol * scale {
                        x = cand;
                        fx = fc;
                        dfx = dfc;
                        res = rc;
                        accepted = true;
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    if res <= opts.tol * scale {
        Ok(x)
    } else {
        Err((x, res))
    }
}

/// Solve a monotone real equation `g(x) = target` for `x >= lo` by safeguarded Newton.
fn real_monotone_solve<G: Fn(f64) -> (f64, f64)>(target: f64, lo: f64, guess: f64, g: G) -> f64 {
    let mut a = lo;
    let mut b = guess.max(lo + 1.0);
    while g(b).0 < target {
        b = lo + 2.0 * (b - lo);
    }
    let mut x = guess.clamp(a, b);
    for _ in 0..200 {
        let (v, d) = g(x);
        if v < target {
            a = x;
        } else {
            b = x;
        }
        let mut nx = x - (v - target) / d;
        if !(nx > a && nx < b) || !nx.is_finite() {
            nx = 0.5 * (a + b);
        }
        if (nx - x).abs() <= 1e-16 * x.abs().max(1.0) || b - a <= 1e-16 * b.abs().max(1.0) {
            return nx;
        }
        x = nx;
    }
    x
}

/// Walk the target along `path` (polyline in the target plane) from the preimage
/// `start` of `path[0]`, re-solving by Newton at every sub-step.
fn homotopy<F, A>(
    path: &[C],
    start: C,
    opts: NewtonOptions,
    steps_per_leg: usize,
    mut f: F,
    admissible: A,
) -> std::result::Result<C, (C, f64)>
where
    F: FnMut(C) -> Option<(C, C)>,
    A: Fn(C) -> bool + Copy,
{
    let mut x = start;
    for leg in path.windows(2) {
        let (p, q) = (leg[0], leg[1]);
        for k in 1..=steps_per_leg {
            let target = p + (q - p) * (k as f64 / steps_per_leg as f64);
            // Euler predictor.
            let guess = match f(x) {
                Some((fx, dfx)) => {
                    let g = x + (target - fx) / dfx;
                    if admissible(g) {
                        g
                    } else {
                        x
                    }
                }
                None => x,
            };
            x = damped_newton(guess, target, opts, &mut f, admissible)?;
        }
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// Strip chart zeta + sinh(zeta)
// ---------------------------------------------------------------------------

/// `zeta + sinh(zeta)` on the strip `|Im zeta| < pi/2`.
pub fn hhp_forward(zeta: C) -> Result<C> {
    if !(zeta.im.abs() < FRAC_PI_2) || !zeta.re.is_finite() {
        return Err(Error::Domain(format!("{zeta} is outside the strip |Im| < pi/2")));
    }
    Ok(zeta + zeta.sinh())
}

pub fn hhp_derivative(zeta: C) -> C {
    1.0 + zeta.cosh()
}

/// Closed membership in `{|x2| <= pi/2 + cosh(x1)}`.
pub fn in_hhp_region(z: C, strict: bool) -> bool {
    let bound = FRAC_PI_2 + z.re.cosh();
    if strict {
        z.im.abs() < bound
    } else {
        z.im.abs() <= bound
    }
}

/// Inverse of the strip chart on the open region `{|x2| < pi/2 + cosh(x1)}`.
pub fn hhp_inverse(z: C) -> Result<C> {
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite point {z}")));
    }
    if !in_hhp_region(z, true) {
        return Err(Error::Domain(format!("{z} lies outside the hairpin positive phase")));
    }
    hhp_inverse_closed(z, NewtonOptions::default())
}

/// Inverse on the closed region; free boundary points map to `|Im zeta| = pi/2`.
pub(crate) fn hhp_inverse_closed(z: C, opts: NewtonOptions) -> Result<C> {
    let f = |w: C| Some((w + w.sinh(), 1.0 + w.cosh()));
    let adm = |w: C| w.im.abs() <= FRAC_PI_2 && w.re.is_finite();
    let mut guess = (z * 0.5).asinh();
    guess.im = guess.im.clamp(-FRAC_PI_2 * 0.999, FRAC_PI_2 * 0.999);
    if let Ok(w) = damped_newton(guess, z, opts, f, adm) {
        return Ok(w);
    }
    // Anchor on the real axis, then walk vertically: the region is vertically convex.
    let x0 = real_monotone_solve(z.re.abs(), 0.0, z.re.abs().asinh(), |x| {
        (x + x.sinh(), 1.0 + x.cosh())
    }) * z.re.signum();
    let path = [c(z.re, 0.0), z];
    let steps = 8 + (z.im.abs() * 4.0) as usize;
    homotopy(&path, c(x0, 0.0), opts, steps, f, adm).map_err(|(last, residual)| {
        Error::Convergence {
            what: format!("strip chart inversion at {z}"),
            iterations: opts.max_iter,
            residual,
            last: Some(last),
        }
    })
}

// ---------------------------------------------------------------------------
// Slit half-plane chart Phi_a
// ---------------------------------------------------------------------------

/// `Phi_1(w) = ((w-1)(w+1))^{1/2} + log(w + ((w-1)(w+1))^{1/2})`, with the square
/// root split into two principal factors so the only cut is the slit `(0, 1]`.
fn phi_unit(w: C) -> C {
    let q = (w - 1.0).sqrt() * (w + 1.0).sqrt();
    q + (w + q).ln()
}

/// Membership in the closed right half-plane; points of the slit `(0, a]` are read
/// on the side given by the sign of their imaginary zero.
fn in_slit_domain(zeta: C) -> bool {
    zeta.re >= 0.0 && zeta.re.is_finite() && zeta.im.is_finite()
}

/// `Phi_a(zeta) = a Phi_1(zeta / a)`. The slit tip `zeta = a` maps to the saddle 0 and
/// the two sides of the slit map to the segment `{0} x (-a(1 + pi/2), a(1 + pi/2))`.
pub fn slit_forward(zeta: C, a: f64) -> Result<C> {
    check_scale(a)?;
    if zeta == c(a, 0.0) {
        return Ok(c(0.0, 0.0));
    }
    if !in_slit_domain(zeta) {
        return Err(Error::Domain(format!("{zeta} is in the left half-plane")));
    }
    Ok(phi_unit(zeta / a) * a)
}

/// `phi_a(zeta) = -1/2 log(zeta - a) + 1/2 log(zeta + a)`, the log-derivative of `Phi_a`.
pub fn slit_log_derivative(zeta: C, a: f64) -> C {
    -0.5 * (zeta - a).ln() + 0.5 * (zeta + a).ln()
}

/// `dPhi_a / dzeta = exp(phi_a(zeta))`.
pub fn slit_derivative(zeta: C, a: f64) -> C {
    slit_log_derivative(zeta, a).exp()
}

fn check_scale(a: f64) -> Result<()> {
    if !(a > 0.0 && a.is_finite()) {
        return Err(Error::InvalidInput(format!("scale a = {a} must be positive")));
    }
    Ok(())
}

/// Closed membership in the right half of the hairpin phase of scale `a`.
pub fn in_slit_image(z: C, a: f64) -> bool {
    z.re >= 0.0 && in_hhp_region(z / a, false)
}

/// Inverse of `Phi_a` on `D_a = Omega_a ∩ {x1 > 0}` (closure allowed).
///
/// Newton runs in the variable `t = (zeta/a - 1)^{1/2}`, in which the chart is
/// regular at the saddle preimage `zeta = a`.
pub fn slit_inverse(z: C, a: f64) -> Result<C> {
    check_scale(a)?;
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::InvalidInput(format!("non-finite point {z}")));
    }
    if !in_slit_image(z, a) {
        return Err(Error::Domain(format!("{z} is not in the right half of the positive phase")));
    }
    let opts = NewtonOptions::default();
    let target = z / a;
    let g = |t: C| {
        let q = (2.0 + t * t).sqrt();
        let val = t * q + (1.0 + t * t + t * q).ln();
        Some((val, 2.0 * q))
    };
    let adm = |t: C| t.re >= 0.0 && 1.0 + (t * t).re >= 0.0;
    let guess = if target.norm() < 1.5 {
        target / (2.0 * 2f64.sqrt())
    } else {
        let w0 = target - (2.0 * target).ln();
        let mut t0 = (w0 - 1.0).sqrt();
        if t0.re < 0.0 {
            t0 = -t0;
        }
        if !adm(t0) {
            t0 = c(t0.re.max(0.0), 0.0);
        }
        t0
    };
    let t = match damped_newton(guess, target, opts, g, adm) {
        Ok(t) => t,
        Err(_) => {
            let x = target.re;
            let t0 = real_monotone_solve(x, 0.0, (x / 2.0).max(0.1), |t| {
                let q = (2.0 + t * t).sqrt();
                (t * q + (1.0 + t * t + t * q).ln(), 2.0 * q)
            });
            let steps = 8 + (target.im.abs() * 4.0) as usize;
            homotopy(&[c(x, 0.0), target], c(t0, 0.0), opts, steps, g, adm).map_err(
                |(last, residual)| Error::Convergence {
                    what: format!("slit chart inversion at {z}"),
                    iterations: opts.max_iter,
                    residual,
                    last: Some(a * (1.0 + last * last)),
                },
            )?
        }
    };
    Ok((1.0 + t * t) * a)
}

// ---------------------------------------------------------------------------
// Scherk strip chart Phi_s
// ---------------------------------------------------------------------------

/// `e^y - 1` accurate for small `y`.
fn exp_m1(y: C) -> C {
    let (sin_b, cos_b) = y.im.sin_cos();
    let half = (0.5 * y.im).sin();
    c(y.re.exp_m1() * cos_b - 2.0 * half * half, y.re.exp() * sin_b)
}

/// `1 + e^x` without cancellation near the zeros `x = i pi (2m + 1)`.
fn one_plus_exp(x: C) -> C {
    let m = ((x.im - PI) / (2.0 * PI)).round();
    let y = c(x.re, x.im - PI * (2.0 * m + 1.0));
    if y.norm() < 0.5 {
        -exp_m1(y)
    } else {
        1.0 + x.exp()
    }
}

/// `log(1 + e^x)` with the principal branch, evaluated without overflow.
fn softplus(x: C) -> C {
    if x.re > 0.0 {
        x + one_plus_exp(-x).ln()
    } else {
        one_plus_exp(x).ln()
    }
}

/// Closed-form point of the right half of the zero-phase loop of `S_s`, parametrized
/// by the harmonic conjugate value `u_tilde` in `(-l/2, l/2)` with `l = 2 pi s`.
pub fn scherk_loop(s: f64, u_tilde: f64) -> Result<Point2> {
    check_slope(s)?;
    let half = PI * s;
    if !(u_tilde.abs() <= half) {
        return Err(Error::InvalidInput(format!(
            "loop parameter {u_tilde} outside [-{half}, {half}]"
        )));
    }
    Ok(scherk_loop_unchecked(s, u_tilde))
}

pub(crate) fn scherk_loop_unchecked(s: f64, u_tilde: f64) -> Point2 {
    let s2 = s * s;
    let root = (1.0 + s2 * s2 + 2.0 * s2 * (u_tilde / s).cos()).max(0.0).sqrt();
    let x1 = (1.0 - s2) * ((root + 2.0 * s * (u_tilde / (2.0 * s)).cos()) / (1.0 - s2)).ln();
    let x2 = (1.0 + s2) * (2.0 * s * (u_tilde / (2.0 * s)).sin()).atan2(root);
    Point2::new(x1.max(0.0), x2)
}

/// Residual of the implicit loop equation
/// `(1-s^2) cosh(x1/(1-s^2)) - (1+s^2) cos(x2/(1+s^2))`; negative strictly inside the loop.
pub fn scherk_loop_residual(s: f64, p: Point2) -> f64 {
    let s2 = s * s;
    (1.0 - s2) * (p.x / (1.0 - s2)).cosh() - (1.0 + s2) * (p.y / (1.0 + s2)).cos()
}

/// Half-width of the loop along the x1 axis: `(1-s^2) arccosh((1+s^2)/(1-s^2))`.
pub fn scherk_loop_intercept(s: f64) -> f64 {
    let s2 = s * s;
    (1.0 - s2) * ((1.0 + s2) / (1.0 - s2)).acosh()
}

fn check_slope(s: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidInput(format!("Scherk slope s = {s} must lie in (0, 1)")));
    }
    Ok(())
}

/// The Scherk chart `Phi_s : S_l -> D_s` for the unit-scale solution `S_s`.
///
/// Construction computes the real offset `c_s`, the image of the saddle preimage
/// `b + i l/2`, and a table of chart values on a lattice of the upper half-strip
/// used for short-path quadrature and Newton starting points.
#[derive(Debug)]
pub struct ScherkChart {
    s: f64,
    l: f64,
    b: f64,
    offset: f64,
    saddle_image: C,
    du: f64,
    dv: f64,
    nu: usize,
    nv: usize,
    table: Vec<(C, C)>,
    gk: AdaptiveGk,
}

/// Largest x1 (unit scale) covered by the lookup table; farther points still invert.
const TABLE_REACH: f64 = 40.0;

impl ScherkChart {
    pub fn new(s: f64) -> Result<Self> {
        check_slope(s)?;
        let l = 2.0 * PI * s;
        let b = 2.0 * s * (1.0 / s).ln();
        let nv = 8;
        let dv = 0.5 * l / nv as f64;
        let du = dv;
        let nu = ((b + s * TABLE_REACH + 1.0) / du).ceil() as usize;
        let mut chart = Self {
            s,
            l,
            b,
            offset: 0.0,
            saddle_image: c(0.0, 0.0),
            du,
            dv,
            nu,
            nv,
            table: Vec::new(),
            gk: AdaptiveGk {
                abs_tol: 1e-13,
                max_depth: 40,
            },
        };
        let top = I * (0.5 * l);
        let along_axis = chart.gk.segment_singular_end(c(0.0, 0.0), top, |z| chart.exp_phi(z))?;
        chart.offset = -along_axis.re;
        let to_saddle = chart.integral_to_saddle(c(0.0, 0.0))?;
        chart.saddle_image = chart.offset + to_saddle;
        chart.build_table()?;
        Ok(chart)
    }

    /// Shared chart for slope `s`, built once per process.
    pub fn cached(s: f64) -> Result<Arc<ScherkChart>> {
        static CACHE: OnceLock<Mutex<HashMap<u64, Arc<ScherkChart>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(ch) = cache.lock().expect("chart cache poisoned").get(&s.to_bits()) {
            return Ok(ch.clone());
        }
        let chart = Arc::new(ScherkChart::new(s)?);
        cache
            .lock()
            .expect("chart cache poisoned")
            .entry(s.to_bits())
            .or_insert(chart.clone());
        Ok(chart)
    }

    pub fn slope(&self) -> f64 {
        self.s
    }

    /// Strip width `l = 2 pi s`.
    pub fn strip_width(&self) -> f64 {
        self.l
    }

    /// Saddle value `b = 2 s log(1/s)`.
    pub fn saddle_value(&self) -> f64 {
        self.b
    }

    /// The real constant `c_s`; also the image of `zeta = 0` (loop point on the x1 axis).
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// `b + i l/2`, the half-logarithmic singularity of `phi_s`.
    pub fn saddle_preimage(&self) -> C {
        c(self.b, 0.5 * self.l)
    }

    /// Image of the saddle preimage computed by quadrature; equals `i pi` in theory.
    pub fn saddle_image(&self) -> C {
        self.saddle_image
    }

    /// `phi_s(zeta)` on the closed strip, continued from the upper half by conjugation.
    pub fn log_derivative(&self, zeta: C) -> C {
        if zeta.im < 0.0 {
            return self.log_derivative(zeta.conj()).conj();
        }
        let k = 2.0 * PI / self.l;
        -0.5 * softplus((zeta - self.b) * k) + 0.5 * softplus(-(zeta + self.b) * k)
            + zeta * (PI / self.l)
    }

    fn exp_phi(&self, zeta: C) -> C {
        self.log_derivative(zeta).exp()
    }

    /// `exp(phi_s)` at `saddle_preimage() + delta`, exact in the singular factor.
    fn exp_phi_near_saddle(&self, delta: C) -> C {
        let k = 2.0 * PI / self.l;
        let zeta = self.saddle_preimage() + delta;
        let phi = -0.5 * (-exp_m1(delta * k)).ln() + 0.5 * softplus(-(zeta + self.b) * k)
            + zeta * (PI / self.l);
        phi.exp()
    }

    /// `int_from^{saddle} exp(phi_s)`.
    fn integral_to_saddle(&self, from: C) -> Result<C> {
        self.gk
            .segment_singular_end_rel(from, self.saddle_preimage(), |d| self.exp_phi_near_saddle(d))
    }

    /// `dPhi_s/dzeta = exp(phi_s(zeta))`.
    pub fn derivative(&self, zeta: C) -> C {
        self.exp_phi(zeta)
    }

    fn in_strip(&self, zeta: C) -> bool {
        zeta.re >= -1e-14 && zeta.im.abs() <= 0.5 * self.l * (1.0 + 1e-14) && zeta.re.is_finite()
    }

    fn singular_radius(&self) -> f64 {
        0.25 * self.b.min(0.5 * self.l)
    }

    fn build_table(&mut self) -> Result<()> {
        let (nu, nv) = (self.nu, self.nv);
        let mut table = vec![(c(0.0, 0.0), c(0.0, 0.0)); (nu + 1) * (nv + 1)];
        let node = |j: usize, k: usize| c(j as f64 * self.du, k as f64 * self.dv);
        let mut prev = c(self.offset, 0.0);
        table[0] = (c(0.0, 0.0), prev);
        for j in 1..=nu {
            let inc = self.gk.segment(node(j - 1, 0), node(j, 0), |z| self.exp_phi(z))?;
            prev += inc;
            table[j * (nv + 1)] = (node(j, 0), c(prev.re, 0.0));
        }
        let zs = self.saddle_preimage();
        for j in 0..=nu {
            for k in 1..=nv {
                let zeta = node(j, k);
                let val = if (zeta - zs).norm() < self.singular_radius() {
                    if zeta == zs {
                        self.saddle_image
                    } else {
                        self.saddle_image - self.integral_to_saddle(zeta)?
                    }
                } else {
                    let below = table[j * (nv + 1) + k - 1];
                    below.1 + self.gk.segment(below.0, zeta, |z| self.exp_phi(z))?
                };
                table[j * (nv + 1) + k] = (zeta, val);
            }
        }
        self.table = table;
        Ok(())
    }

    fn nearest_node(&self, zeta: C) -> (C, C) {
        let j = ((zeta.re / self.du).round().max(0.0) as usize).min(self.nu);
        let k = ((zeta.im.abs() / self.dv).round() as usize).min(self.nv);
        self.table[j * (self.nv + 1) + k]
    }

    /// `Phi_s(zeta) = int_0^zeta exp(phi_s) + c_s` on the closed strip, excluding the
    /// singular points `b +- i l/2`.
    pub fn forward(&self, zeta: C) -> Result<C> {
        if !self.in_strip(zeta) {
            return Err(Error::Domain(format!(
                "{zeta} is outside the strip Re >= 0, |Im| <= {}",
                0.5 * self.l
            )));
        }
        if zeta.im < 0.0 {
            return Ok(self.forward(zeta.conj())?.conj());
        }
        let zs = self.saddle_preimage();
        if zeta == zs {
            return Err(Error::Domain(format!("{zeta} is a half-logarithmic singularity")));
        }
        if (zeta - zs).norm() < self.singular_radius() {
            return Ok(self.saddle_image - self.integral_to_saddle(zeta)?);
        }
        let (z0, v0) = self.nearest_node(zeta);
        if z0 == zeta {
            return Ok(v0);
        }
        Ok(v0 + self.gk.segment(z0, zeta, |z| self.exp_phi(z))?)
    }

    /// Forward map straight from the origin, bypassing the lattice; used for checks.
    pub fn forward_from_origin(&self, zeta: C) -> Result<C> {
        if !self.in_strip(zeta) || zeta.im < 0.0 {
            return Err(Error::Domain(format!("{zeta} is outside the upper half-strip")));
        }
        Ok(self.offset + self.gk.segment(c(0.0, 0.0), zeta, |z| self.exp_phi(z))?)
    }

    /// Closed membership in the (unit scale) fundamental cell `{x1 >= 0, |x2| <= pi}`
    /// minus the open loop interior.
    pub fn in_cell(&self, z: C) -> bool {
        z.re >= 0.0 && z.im.abs() <= PI && scherk_loop_residual(self.s, Point2::from_complex(z)) >= 0.0
    }

    /// Inverse chart `U_s = S_s + i S~_s` on the fundamental cell of the unit-scale
    /// solution; `S_s(z) = Re zeta`.
    pub fn inverse(&self, z: C) -> Result<C> {
        if !z.re.is_finite() || !z.im.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite point {z}")));
        }
        if !self.in_cell(z) {
            return Err(Error::Domain(format!("{z} is outside the Scherk fundamental cell")));
        }
        if z.im < 0.0 {
            return Ok(self.inverse(z.conj())?.conj());
        }
        if (z - c(0.0, PI)).norm() < 1e-14 {
            return Ok(self.saddle_preimage());
        }
        let opts = NewtonOptions::default();
        let half = 0.5 * self.l;
        let zs = self.saddle_preimage();
        let f = |w: C| {
            let v = self.forward(w).ok()?;
            let d = self.derivative(w);
            (d.re.is_finite() && d.im.is_finite()).then_some((v, d))
        };
        let adm = |w: C| w.re >= 0.0 && w.im >= 0.0 && w.im <= half && w != zs;
        if (z - self.saddle_image).norm() < 0.25 {
            if let Ok(w) = self.inverse_near_saddle(z) {
                return Ok(w);
            }
        }
        let guess = self.initial_guess(z);
        let clamp = |w: C| c(w.re.max(0.0), w.im.clamp(0.0, half));
        let first = match projected_newton(guess, z, opts, f, adm, clamp) {
            Ok(w) => return Ok(w),
            Err(e) => e,
        };
        // Homotopy: real axis anchor right of the loop, up, then left.
        let x_anchor = z.re.max(self.offset + 0.1);
        let u0 = real_monotone_solve(x_anchor, 0.0, self.s * (x_anchor - self.offset), |u| {
            (self.forward(c(u, 0.0)).map(|v| v.re).unwrap_or(f64::NAN), self.derivative(c(u, 0.0)).re)
        });
        let path = [c(x_anchor, 0.0), c(x_anchor, z.im), z];
        let (last, residual) = match homotopy(&path, c(u0, 0.0), opts, 24, f, adm) {
            Ok(w) => return Ok(w),
            Err(e) if e.1 < first.1 => e,
            Err(_) => first,
        };
        // Next to the saddle the chart is flat and quadrature noise floors the residual.
        if residual <= 1e-11 * z.norm().max(1.0) {
            return Ok(last);
        }
        Err(Error::Convergence {
            what: format!("Scherk chart inversion at {z}"),
            iterations: opts.max_iter,
            residual,
            last: Some(last),
        })
    }

    /// Newton in `sigma = (zeta - zeta_s)^{1/2}`: the chart has an inverse square root
    /// singularity at the saddle preimage, so `sigma -> Phi_s(zeta_s + sigma^2)` is regular
    /// there. `sigma` ranges over the closed fourth quadrant.
    fn inverse_near_saddle(&self, z: C) -> std::result::Result<C, (C, f64)> {
        let zs = self.saddle_preimage();
        let half = 0.5 * self.l;
        let zeta_of = |sg: C| zs + sg * sg;
        // Work with the offset itself: rounding zeta_s + sigma^2 would cost relative
        // accuracy in the offset, which the square root singularity amplifies.
        let f = |sg: C| {
            let delta = sg * sg;
            // With from = 0 and to = -delta the substitution hands delta tau^2 to the integrand.
            let tail = self
                .gk
                .segment_singular_end_rel(c(0.0, 0.0), -delta, |d| self.exp_phi_near_saddle(d))
                .ok()?;
            let d = self.exp_phi_near_saddle(delta) * sg * 2.0;
            (d.re.is_finite() && d.im.is_finite()).then_some((self.saddle_image - tail, d))
        };
        let reach = self.singular_radius();
        let adm = |sg: C| {
            let zeta = zeta_of(sg);
            sg.re >= 0.0
                && sg.im <= 0.0
                && sg != c(0.0, 0.0)
                && sg.norm_sqr() < reach
                && zeta.re >= 0.0
                && zeta.im >= 0.0
                && zeta.im <= half
        };
        let clamp = |sg: C| c(sg.re.max(0.0), sg.im.min(0.0));
        let probe = C::from_polar(1e-4, -0.25 * PI);
        let (_, slope) = f(probe).ok_or((zs, f64::INFINITY))?;
        let mut start = clamp((z - self.saddle_image) / slope);
        if !adm(start) {
            start = probe;
        }
        projected_newton(start, z, NewtonOptions::default(), f, adm, clamp).map(zeta_of)
    }

    fn initial_guess(&self, z: C) -> C {
        let mut best = (f64::INFINITY, c(0.0, 0.0));
        for &(zeta, val) in &self.table {
            let d = (val - z).norm_sqr();
            if d < best.0 {
                best = (d, zeta);
            }
        }
        let (zeta0, val0) = self.nearest_node(best.1);
        if z.re > val0.re + 1.0 && zeta0.re >= self.nu as f64 * self.du {
            // Beyond the lattice the chart is affine with slope 1/s.
            return c(zeta0.re + self.s * (z.re - val0.re), zeta0.im);
        }
        zeta0
    }

    /// Closed-form loop point for this chart's slope.
    pub fn loop_point(&self, u_tilde: f64) -> Result<Point2> {
        scherk_loop(self.s, u_tilde)
    }
}

/// `c_s` for the unit-scale Scherk solution of slope `s`.
pub fn scherk_offset(s: f64) -> Result<f64> {
    Ok(ScherkChart::cached(s)?.offset())
}

pub fn scherk_forward(zeta: C, s: f64) -> Result<C> {
    ScherkChart::cached(s)?.forward(zeta)
}

pub fn scherk_inverse(z: C, s: f64) -> Result<C> {
    ScherkChart::cached(s)?.inverse(z)
}

// ---------------------------------------------------------------------------
// Uniform chart handle
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub enum ChartKind {
    HhpStrip,
    SlitHalfPlane(f64),
    ScherkStrip(Arc<ScherkChart>),
}

/// A chart together with its Newton settings.
#[derive(Debug, Clone)]
pub struct ConformalChart {
    pub kind: ChartKind,
    pub newton: NewtonOptions,
}

impl ConformalChart {
    pub fn hhp() -> Self {
        Self {
            kind: ChartKind::HhpStrip,
            newton: NewtonOptions::default(),
        }
    }

    pub fn slit(a: f64) -> Result<Self> {
        check_scale(a)?;
        Ok(Self {
            kind: ChartKind::SlitHalfPlane(a),
            newton: NewtonOptions::default(),
        })
    }

    pub fn scherk(s: f64) -> Result<Self> {
        Ok(Self {
            kind: ChartKind::ScherkStrip(ScherkChart::cached(s)?),
            newton: NewtonOptions::default(),
        })
    }

    pub fn forward(&self, zeta: C) -> Result<C> {
        match &self.kind {
            ChartKind::HhpStrip => hhp_forward(zeta),
            ChartKind::SlitHalfPlane(a) => slit_forward(zeta, *a),
            ChartKind::ScherkStrip(ch) => ch.forward(zeta),
        }
    }

    pub fn derivative(&self, zeta: C) -> C {
        match &self.kind {
            ChartKind::HhpStrip => hhp_derivative(zeta),
            ChartKind::SlitHalfPlane(a) => slit_derivative(zeta, *a),
            ChartKind::ScherkStrip(ch) => ch.derivative(zeta),
        }
    }

    pub fn inverse(&self, z: C) -> Result<C> {
        match &self.kind {
            ChartKind::HhpStrip => {
                if !in_hhp_region(z, true) {
                    return Err(Error::Domain(format!("{z} outside the strip image")));
                }
                hhp_inverse_closed(z, self.newton)
            }
            ChartKind::SlitHalfPlane(a) => slit_inverse(z, *a),
            ChartKind::ScherkStrip(ch) => ch.inverse(z),
        }
    }
}
