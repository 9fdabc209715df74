//! The classical global solutions and their evaluation.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conformal::{self, ScherkChart};
use crate::error::{Error, Result};
use crate::geometry::{sample_clipped, FreeBoundary};
use crate::point::{Point2, Rect};

/// A proper rigid motion `p -> R(angle) p + shift`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RigidMotion {
    pub angle: f64,
    pub shift: Point2,
}

impl RigidMotion {
    pub const IDENTITY: RigidMotion = RigidMotion {
        angle: 0.0,
        shift: Point2::ORIGIN,
    };

    pub fn new(angle: f64, shift: Point2) -> Self {
        Self { angle, shift }
    }

    pub fn rotation(angle: f64) -> Self {
        Self::new(angle, Point2::ORIGIN)
    }

    pub fn translation(shift: Point2) -> Self {
        Self::new(0.0, shift)
    }

    pub fn rotate(&self, v: Point2) -> Point2 {
        let (s, c) = self.angle.sin_cos();
        Point2::new(c * v.x - s * v.y, s * v.x + c * v.y)
    }

    pub fn rotate_back(&self, v: Point2) -> Point2 {
        let (s, c) = self.angle.sin_cos();
        Point2::new(c * v.x + s * v.y, -s * v.x + c * v.y)
    }

    pub fn apply(&self, p: Point2) -> Point2 {
        self.rotate(p) + self.shift
    }

    pub fn apply_inverse(&self, p: Point2) -> Point2 {
        self.rotate_back(p - self.shift)
    }

    pub fn inverse(&self) -> RigidMotion {
        RigidMotion::new(-self.angle, self.rotate_back(-self.shift))
    }

    /// `self ∘ other`: first `other`, then `self`.
    pub fn compose(&self, other: &RigidMotion) -> RigidMotion {
        RigidMotion::new(self.angle + other.angle, self.apply(other.shift))
    }

    pub fn is_identity(&self) -> bool {
        self.angle == 0.0 && self.shift == Point2::ORIGIN
    }
}

/// Solution families with their parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Family {
    HalfPlane,
    /// Positive phases `{x1 > 0}` and `{x1 < -a}`.
    TwoPlane { a: f64 },
    /// `s |x1|`; both sides of `{x1 = 0}` are positive phase.
    Wedge { s: f64 },
    Hairpin { a: f64 },
    DiskComplement { r: f64 },
    Scherk { s: f64, a: f64 },
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::HalfPlane => "HalfPlane",
            Family::TwoPlane { .. } => "TwoPlane",
            Family::Wedge { .. } => "Wedge",
            Family::Hairpin { .. } => "Hairpin",
            Family::DiskComplement { .. } => "DiskComplement",
            Family::Scherk { .. } => "Scherk",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!(
                    "{}: parameter {name} = {v} must be positive",
                    self.name()
                )))
            }
        };
        match *self {
            Family::HalfPlane => Ok(()),
            Family::TwoPlane { a } | Family::Hairpin { a } => positive("a", a),
            Family::DiskComplement { r } => positive("R", r),
            Family::Wedge { s } => {
                if s > 0.0 && s <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidInput(format!("Wedge: slope {s} must lie in (0, 1]")))
                }
            }
            Family::Scherk { s, a } => {
                if !(s > 0.0 && s < 1.0) {
                    return Err(Error::InvalidInput(format!("Scherk: slope {s} must lie in (0, 1)")));
                }
                positive("a", a)
            }
        }
    }

    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        match *self {
            Family::HalfPlane => {}
            Family::TwoPlane { a } | Family::Hairpin { a } => {
                m.insert("a".into(), a);
            }
            Family::Wedge { s } => {
                m.insert("s".into(), s);
            }
            Family::DiskComplement { r } => {
                m.insert("R".into(), r);
            }
            Family::Scherk { s, a } => {
                m.insert("s".into(), s);
                m.insert("a".into(), a);
            }
        }
        m
    }

    pub fn from_parts(name: &str, params: &BTreeMap<String, f64>) -> Result<Family> {
        let get = |k: &str| {
            params
                .get(k)
                .copied()
                .ok_or_else(|| Error::InvalidInput(format!("{name}: missing parameter {k}")))
        };
        let fam = match name {
            "HalfPlane" => Family::HalfPlane,
            "TwoPlane" => Family::TwoPlane { a: get("a")? },
            "Wedge" => Family::Wedge { s: get("s")? },
            "Hairpin" => Family::Hairpin { a: get("a")? },
            "DiskComplement" => Family::DiskComplement { r: get("R")? },
            "Scherk" => Family::Scherk {
                s: get("s")?,
                a: get("a")?,
            },
            other => return Err(Error::InvalidInput(format!("unknown family {other:?}"))),
        };
        fam.validate()?;
        Ok(fam)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Family::HalfPlane => write!(f, "HalfPlane"),
            Family::TwoPlane { a } => write!(f, "TwoPlane(a={a})"),
            Family::Wedge { s } => write!(f, "Wedge(s={s})"),
            Family::Hairpin { a } => write!(f, "Hairpin(a={a})"),
            Family::DiskComplement { r } => write!(f, "DiskComplement(R={r})"),
            Family::Scherk { s, a } => write!(f, "Scherk(s={s}, a={a})"),
        }
    }
}

/// Anything that can be evaluated like a solution: value and one-sided gradient.
pub trait Evaluator: Sync {
    fn value(&self, p: Point2) -> Result<f64>;
    fn gradient(&self, p: Point2) -> Result<Point2>;

    /// A continuous function positive exactly on the positive phase. The default is
    /// `u` itself, which carries no information on the zero side.
    fn phase(&self, p: Point2) -> Result<f64> {
        self.value(p)
    }

    /// Region where the evaluator is defined; `None` for the whole plane.
    fn domain(&self) -> Option<Rect> {
        None
    }
}

/// A global solution placed in the plane by a rigid motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SolutionJson", into = "SolutionJson")]
pub struct AnalyticSolution {
    pub family: Family,
    pub motion: RigidMotion,
}

#[derive(Serialize, Deserialize)]
struct SolutionJson {
    family: String,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    #[serde(default)]
    motion: RigidMotion,
}

impl TryFrom<SolutionJson> for AnalyticSolution {
    type Error = Error;

    fn try_from(j: SolutionJson) -> Result<Self> {
        Ok(AnalyticSolution {
            family: Family::from_parts(&j.family, &j.params)?,
            motion: j.motion,
        })
    }
}

impl From<AnalyticSolution> for SolutionJson {
    fn from(s: AnalyticSolution) -> Self {
        SolutionJson {
            family: s.family.name().to_string(),
            params: s.family.params(),
            motion: s.motion,
        }
    }
}

impl fmt::Display for AnalyticSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.motion.is_identity() {
            write!(f, "{}", self.family)
        } else {
            write!(
                f,
                "{} rotated by {} and shifted to ({}, {})",
                self.family, self.motion.angle, self.motion.shift.x, self.motion.shift.y
            )
        }
    }
}

fn zero_phase(p: Point2) -> Error {
    Error::ZeroPhase(p.x, p.y)
}

/// Fold a unit-scale Scherk point into `{x1 >= 0, 0 <= x2 <= pi}`; returns the folded
/// point and the sign flips to undo on the gradient.
fn scherk_fold(q: Point2) -> (Point2, f64, f64) {
    let sx = if q.x < 0.0 { -1.0 } else { 1.0 };
    let mut y = q.y - 2.0 * PI * (q.y / (2.0 * PI)).round();
    let mut sy = 1.0;
    if y < 0.0 {
        y = -y;
        sy = -1.0;
    }
    (Point2::new(q.x.abs(), y.min(PI)), sx, sy)
}

impl AnalyticSolution {
    pub fn new(family: Family) -> Result<Self> {
        family.validate()?;
        Ok(Self {
            family,
            motion: RigidMotion::IDENTITY,
        })
    }

    pub fn with_motion(mut self, m: RigidMotion) -> Self {
        self.motion = m;
        self
    }

    pub fn half_plane() -> Self {
        Self {
            family: Family::HalfPlane,
            motion: RigidMotion::IDENTITY,
        }
    }

    pub fn two_plane(a: f64) -> Result<Self> {
        Self::new(Family::TwoPlane { a })
    }

    pub fn wedge(s: f64) -> Result<Self> {
        Self::new(Family::Wedge { s })
    }

    pub fn hairpin(a: f64) -> Result<Self> {
        Self::new(Family::Hairpin { a })
    }

    pub fn disk_complement(r: f64) -> Result<Self> {
        Self::new(Family::DiskComplement { r })
    }

    pub fn scherk(s: f64, a: f64) -> Result<Self> {
        Self::new(Family::Scherk { s, a })
    }

    fn check_point(p: Point2) -> Result<()> {
        if p.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("non-finite point ({}, {})", p.x, p.y)))
        }
    }

    /// Strict positivity `u(p) > 0`, decided by the analytic region inequality.
    pub fn is_positive(&self, p: Point2) -> Result<bool> {
        Self::check_point(p)?;
        let q = self.motion.apply_inverse(p);
        Ok(match self.family {
            Family::HalfPlane => q.x > 0.0,
            Family::TwoPlane { a } => q.x > 0.0 || q.x < -a,
            Family::Wedge { .. } => q.x != 0.0,
            Family::Hairpin { a } => conformal::in_hhp_region((q * (1.0 / a)).to_complex(), true),
            Family::DiskComplement { r } => q.norm() > r,
            Family::Scherk { s, a } => {
                let (f, _, _) = scherk_fold(q * (1.0 / a));
                conformal::scherk_loop_residual(s, f) > 0.0
            }
        })
    }

    /// Signed level function of the positive phase built from the region inequality.
    pub fn phase(&self, p: Point2) -> Result<f64> {
        Self::check_point(p)?;
        let q = self.motion.apply_inverse(p);
        Ok(match self.family {
            Family::HalfPlane => q.x,
            Family::TwoPlane { a } => q.x.max(-q.x - a),
            Family::Wedge { .. } => q.x.abs(),
            Family::Hairpin { a } => a * (FRAC_PI_2 + (q.x / a).cosh()) - q.y.abs(),
            Family::DiskComplement { r } => q.norm() - r,
            Family::Scherk { s, a } => {
                let (f, _, _) = scherk_fold(q * (1.0 / a));
                a * conformal::scherk_loop_residual(s, f)
            }
        })
    }

    /// `u(p)`; exactly 0 off the positive phase.
    pub fn eval_u(&self, p: Point2) -> Result<f64> {
        Self::check_point(p)?;
        let q = self.motion.apply_inverse(p);
        Ok(match self.family {
            Family::HalfPlane => q.x.max(0.0),
            Family::TwoPlane { a } => q.x.max(0.0) + (-q.x - a).max(0.0),
            Family::Wedge { s } => s * q.x.abs(),
            Family::Hairpin { a } => {
                let z = (q * (1.0 / a)).to_complex();
                if !conformal::in_hhp_region(z, true) {
                    return Ok(0.0);
                }
                let w = conformal::hhp_inverse_closed(z, Default::default())?;
                (a * w.cosh().re).max(0.0)
            }
            Family::DiskComplement { r } => {
                let n = q.norm();
                if n > r {
                    r * (n / r).ln()
                } else {
                    0.0
                }
            }
            Family::Scherk { s, a } => {
                let (f, _, _) = scherk_fold(q * (1.0 / a));
                if conformal::scherk_loop_residual(s, f) <= 0.0 {
                    return Ok(0.0);
                }
                let ch = ScherkChart::cached(s)?;
                (a * ch.inverse(f.to_complex())?.re).max(0.0)
            }
        })
    }

    /// Gradient of `u`; on the free boundary the one-sided limit from the positive phase.
    /// For the wedge on `{x1 = 0}` the limit from `x1 > 0` is returned.
    pub fn eval_grad(&self, p: Point2) -> Result<Point2> {
        Self::check_point(p)?;
        let q = self.motion.apply_inverse(p);
        let g = match self.family {
            Family::HalfPlane => {
                if q.x < 0.0 {
                    return Err(zero_phase(p));
                }
                Point2::new(1.0, 0.0)
            }
            Family::TwoPlane { a } => {
                if q.x >= 0.0 {
                    Point2::new(1.0, 0.0)
                } else if q.x <= -a {
                    Point2::new(-1.0, 0.0)
                } else {
                    return Err(zero_phase(p));
                }
            }
            Family::Wedge { s } => Point2::new(if q.x < 0.0 { -s } else { s }, 0.0),
            Family::Hairpin { a } => {
                let z = (q * (1.0 / a)).to_complex();
                let bound = FRAC_PI_2 + z.re.cosh();
                let excess = z.im.abs() - bound;
                if excess > 1e-12 * bound {
                    return Err(zero_phase(p));
                }
                // On the catenary the preimage is x1/a +- i pi/2 exactly.
                let w = if excess >= 0.0 {
                    Complex64::new(z.re, FRAC_PI_2.copysign(z.im))
                } else {
                    conformal::hhp_inverse_closed(z, Default::default())?
                };
                // U = cosh(w) with z = w + sinh(w), so U'(z) = tanh(w/2).
                holo_gradient((w * 0.5).tanh())
            }
            Family::DiskComplement { r } => {
                let n2 = q.dot(q);
                if n2 < r * r {
                    return Err(zero_phase(p));
                }
                q * (r / n2)
            }
            Family::Scherk { s, a } => {
                let (f, sx, sy) = scherk_fold(q * (1.0 / a));
                let res = conformal::scherk_loop_residual(s, f);
                if res < -1e-12 * (1.0 + f.norm()) {
                    return Err(zero_phase(p));
                }
                // Within rounding of the loop, push onto its closed outer side.
                let f = if res < 0.0 { nudge_onto_loop(s, f) } else { f };
                let ch = ScherkChart::cached(s)?;
                let zeta = ch.inverse(f.to_complex())?;
                let g = if zeta == ch.saddle_preimage() {
                    Point2::ORIGIN
                } else {
                    holo_gradient((-ch.log_derivative(zeta)).exp())
                };
                Point2::new(sx * g.x, sy * g.y)
            }
        };
        Ok(self.motion.rotate(g))
    }

    /// The free boundary inside `window`, sampled from the analytic parametrization
    /// with `n` points per clipped component.
    pub fn free_boundary_curves(&self, window: &Rect, n: usize) -> Result<FreeBoundary> {
        window.validate()?;
        if n < 2 {
            return Err(Error::InvalidInput(format!("need at least 2 samples, got {n}")));
        }
        let m = self.motion;
        // Reach of the window measured from the solution's own origin.
        let reach = window.center().dist(m.shift) + window.radius() + 1.0;
        let mut comps = Vec::new();
        let mut add_line = |x1: f64, downward: bool| -> Result<()> {
            let dir = if downward { -1.0 } else { 1.0 };
            comps.extend(sample_clipped(
                |t| m.apply(Point2::new(x1, dir * t)),
                -reach - x1.abs(),
                reach + x1.abs(),
                window,
                n,
                false,
            )?);
            Ok(())
        };
        match self.family {
            Family::HalfPlane | Family::Wedge { .. } => add_line(0.0, true)?,
            Family::TwoPlane { a } => {
                add_line(0.0, true)?;
                add_line(-a, false)?;
            }
            Family::Hairpin { a } => {
                let tmax = a * ((reach / a).max(1.0)).acosh() + a;
                let upper = |t: f64| m.apply(Point2::new(-t, a * (FRAC_PI_2 + (t / a).cosh())));
                let lower = |t: f64| m.apply(Point2::new(t, -a * (FRAC_PI_2 + (t / a).cosh())));
                comps.extend(sample_clipped(upper, -tmax, tmax, window, n, false)?);
                comps.extend(sample_clipped(lower, -tmax, tmax, window, n, false)?);
            }
            Family::DiskComplement { r } => {
                let circle = |t: f64| m.apply(Point2::from_polar(r, -t));
                comps.extend(sample_clipped(circle, 0.0, 2.0 * PI, window, n, true)?);
            }
            Family::Scherk { s, a } => {
                let l = 2.0 * PI * s;
                // Clockwise: right half downward, then left half upward.
                let loop_at = |k: f64| {
                    move |t: f64| {
                        let (ut, sign) = if t < l { (0.5 * l - t, 1.0) } else { (t - 1.5 * l, -1.0) };
                        let p = conformal::scherk_loop_unchecked(s, ut.clamp(-0.5 * l, 0.5 * l));
                        m.apply(Point2::new(sign * a * p.x, a * (p.y + 2.0 * PI * k)))
                    }
                };
                let corners = [
                    Point2::new(window.x_min, window.y_min),
                    Point2::new(window.x_max, window.y_min),
                    Point2::new(window.x_min, window.y_max),
                    Point2::new(window.x_max, window.y_max),
                ];
                let ys: Vec<f64> = corners.iter().map(|&c| m.apply_inverse(c).y / a).collect();
                let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let k0 = ((lo - PI) / (2.0 * PI)).floor() as i64;
                let k1 = ((hi + PI) / (2.0 * PI)).ceil() as i64;
                for k in k0..=k1 {
                    comps.extend(sample_clipped(loop_at(k as f64), 0.0, 2.0 * l, window, n, true)?);
                }
            }
        }
        Ok(FreeBoundary { components: comps })
    }

    /// The solution `x -> u(R x) / R`.
    pub fn rescale(&self, r: f64) -> Result<AnalyticSolution> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidInput(format!("rescaling factor {r} must be positive")));
        }
        let family = match self.family {
            Family::HalfPlane => Family::HalfPlane,
            Family::Wedge { s } => Family::Wedge { s },
            Family::TwoPlane { a } => Family::TwoPlane { a: a / r },
            Family::Hairpin { a } => Family::Hairpin { a: a / r },
            Family::DiskComplement { r: r0 } => Family::DiskComplement { r: r0 / r },
            Family::Scherk { s, a } => Family::Scherk { s, a: a / r },
        };
        let motion = RigidMotion::new(self.motion.angle, self.motion.shift * (1.0 / r));
        Ok(AnalyticSolution { family, motion })
    }

    /// The solution `p -> u(m^{-1} p)`.
    pub fn apply_motion(&self, m: &RigidMotion) -> AnalyticSolution {
        AnalyticSolution {
            family: self.family,
            motion: m.compose(&self.motion),
        }
    }

    /// Value at the saddle point between consecutive free boundary components.
    pub fn saddle_value(&self) -> Result<f64> {
        match self.family {
            Family::Hairpin { a } => Ok(a),
            Family::Scherk { s, a } => Ok(a * 2.0 * s * (1.0 / s).ln()),
            other => Err(Error::NoSaddle(other.name())),
        }
    }

    /// Saddle points in world coordinates (one per period for Scherk, the `k = 0` one).
    pub fn saddle_point(&self) -> Result<Point2> {
        match self.family {
            Family::Hairpin { .. } => Ok(self.motion.apply(Point2::ORIGIN)),
            Family::Scherk { a, .. } => Ok(self.motion.apply(Point2::new(0.0, a * PI))),
            other => Err(Error::NoSaddle(other.name())),
        }
    }

    /// Gradient bound `sup |grad u|`.
    pub fn lipschitz_bound(&self) -> f64 {
        match self.family {
            Family::Wedge { s } => s,
            _ => 1.0,
        }
    }
}

/// The point on the outward normal ray through `f` where the loop residual turns
/// nonnegative.
fn nudge_onto_loop(s: f64, f: Point2) -> Point2 {
    let (s2p, s2m) = (1.0 + s * s, 1.0 - s * s);
    let g = Point2::new((f.x / s2m).sinh(), (f.y / s2p).sin());
    let n = g * (1.0 / g.norm().max(f64::MIN_POSITIVE));
    let mut t = 1e-15 * (1.0 + f.norm());
    while conformal::scherk_loop_residual(s, f + n * t) < 0.0 {
        t *= 2.0;
    }
    f + n * t
}

/// `grad Re U = (Re U', -Im U')`.
fn holo_gradient(d: Complex64) -> Point2 {
    Point2::new(d.re, -d.im)
}

impl Evaluator for AnalyticSolution {
    fn value(&self, p: Point2) -> Result<f64> {
        self.eval_u(p)
    }

    fn gradient(&self, p: Point2) -> Result<Point2> {
        self.eval_grad(p)
    }

    fn phase(&self, p: Point2) -> Result<f64> {
        AnalyticSolution::phase(self, p)
    }
}

/// `s x1^+` with an arbitrary slope: a harmonic function with a flat free boundary that
/// fails the gradient condition unless `s = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneSidedPlane {
    pub slope: f64,
}

impl Evaluator for OneSidedPlane {
    fn value(&self, p: Point2) -> Result<f64> {
        Ok(self.slope * p.x.max(0.0))
    }

    fn gradient(&self, p: Point2) -> Result<Point2> {
        if p.x < 0.0 {
            return Err(zero_phase(p));
        }
        Ok(Point2::new(self.slope, 0.0))
    }
    fn phase(&self, p: Point2) -> Result<f64> {
        Ok(p.x)
    }
}

impl<T: Evaluator + ?Sized> Evaluator for &T {
    fn value(&self, p: Point2) -> Result<f64> {
        (**self).value(p)
    }

    fn gradient(&self, p: Point2) -> Result<Point2> {
        (**self).gradient(p)
    }
    fn phase(&self, p: Point2) -> Result<f64> {
        (**self).phase(p)
    }

    fn domain(&self) -> Option<Rect> {
        (**self).domain()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(x: f64, y: f64) -> Point2 {
        Point2::new(x, y)
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(AnalyticSolution::half_plane().eval_u(p(3.0, -1.0)).unwrap(), 3.0);
        assert_eq!(AnalyticSolution::two_plane(2.0).unwrap().eval_u(p(-5.0, 0.0)).unwrap(), 3.0);
        let h = AnalyticSolution::hairpin(1.0).unwrap();
        assert!((h.eval_u(p(0.0, 0.0)).unwrap() - 1.0).abs() < 1e-15);
        let s = AnalyticSolution::scherk(0.5, 1.0).unwrap();
        assert!((s.eval_u(p(0.0, PI)).unwrap() - 2f64.ln() * 1.0).abs() < 1e-9);
    }

    #[test]
    fn closed_form_gradients() {
        assert_eq!(AnalyticSolution::half_plane().eval_grad(p(2.0, 5.0)).unwrap(), p(1.0, 0.0));
        assert_eq!(AnalyticSolution::wedge(0.5).unwrap().eval_grad(p(-4.0, 7.0)).unwrap(), p(-0.5, 0.0));
        assert!(matches!(
            AnalyticSolution::half_plane().eval_grad(p(-1.0, 0.0)),
            Err(Error::ZeroPhase(..))
        ));
    }

    #[test]
    fn hairpin_gradient_is_unit_on_catenary() {
        let h = AnalyticSolution::hairpin(1.0).unwrap();
        for x1 in [-2.0, -0.3, 0.0, 0.7, 1.9] {
            let q = p(x1, FRAC_PI_2 + f64::cosh(x1));
            assert_eq!(h.eval_u(q).unwrap(), 0.0);
            assert!((h.eval_grad(q).unwrap().norm() - 1.0).abs() < 1e-9, "{x1}");
        }
    }

    #[test]
    fn hairpin_gradient_matches_finite_differences() {
        let h = AnalyticSolution::hairpin(0.8).unwrap();
        let e = 1e-5;
        for q in [p(0.3, 0.2), p(-1.1, 1.4), p(2.0, -3.0)] {
            let g = h.eval_grad(q).unwrap();
            let gx = (h.eval_u(q + p(e, 0.0)).unwrap() - h.eval_u(q - p(e, 0.0)).unwrap()) / (2.0 * e);
            let gy = (h.eval_u(q + p(0.0, e)).unwrap() - h.eval_u(q - p(0.0, e)).unwrap()) / (2.0 * e);
            assert!((g - p(gx, gy)).norm() < 1e-8, "{q:?}");
        }
    }

    #[test]
    fn scherk_gradient_matches_finite_differences_and_slope() {
        let sol = AnalyticSolution::scherk(0.5, 1.0).unwrap();
        let e = 1e-5;
        for q in [p(1.3, 0.4), p(-2.0, 2.5), p(0.5, -3.0), p(3.0, 7.0)] {
            let g = sol.eval_grad(q).unwrap();
            let gx = (sol.eval_u(q + p(e, 0.0)).unwrap() - sol.eval_u(q - p(e, 0.0)).unwrap()) / (2.0 * e);
            let gy = (sol.eval_u(q + p(0.0, e)).unwrap() - sol.eval_u(q - p(0.0, e)).unwrap()) / (2.0 * e);
            assert!((g - p(gx, gy)).norm() < 1e-7, "{q:?} {g:?} {gx} {gy}");
        }
        for x1 in [20.0, 40.0] {
            assert!((sol.eval_grad(p(x1, 0.0)).unwrap().norm() - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn saddle_values() {
        assert_eq!(AnalyticSolution::hairpin(0.25).unwrap().saddle_value().unwrap(), 0.25);
        let b = AnalyticSolution::scherk(0.125, 2.0).unwrap().saddle_value().unwrap();
        assert!((b - 0.5 * 8f64.ln()).abs() < 1e-15);
        assert!(matches!(AnalyticSolution::half_plane().saddle_value(), Err(Error::NoSaddle(_))));
    }

    #[test]
    fn motions_and_rescaling() {
        let rot = AnalyticSolution::half_plane().apply_motion(&RigidMotion::rotation(PI));
        assert!((rot.eval_u(p(-3.0, 0.0)).unwrap() - 3.0).abs() < 1e-12);
        let tp = AnalyticSolution::two_plane(1.0)
            .unwrap()
            .apply_motion(&RigidMotion::translation(p(1.0, 0.0)));
        assert_eq!(tp.eval_u(p(1.0, 3.0)).unwrap(), 0.0);
        assert_eq!(tp.eval_u(p(0.0, 3.0)).unwrap(), 0.0);
        assert_eq!(tp.eval_u(p(0.5, 3.0)).unwrap(), 0.0);
        assert!(tp.eval_u(p(1.5, 3.0)).unwrap() > 0.0);
        let r = AnalyticSolution::hairpin(2.0).unwrap().rescale(2.0).unwrap();
        assert_eq!(r.family, Family::Hairpin { a: 1.0 });
        assert_eq!(AnalyticSolution::half_plane().rescale(17.0).unwrap().family, Family::HalfPlane);
        assert!(AnalyticSolution::half_plane().rescale(0.0).is_err());
    }

    #[test]
    fn json_round_trip() {
        let sol = AnalyticSolution::scherk(0.5, 2.0)
            .unwrap()
            .with_motion(RigidMotion::new(0.3, p(1.0, -2.0)));
        let txt = serde_json::to_string(&sol).unwrap();
        assert!(txt.contains("\"family\":\"Scherk\""));
        let back: AnalyticSolution = serde_json::from_str(&txt).unwrap();
        assert_eq!(back, sol);
        let disk: AnalyticSolution =
            serde_json::from_str(r#"{"family":"DiskComplement","params":{"R":2.0}}"#).unwrap();
        assert_eq!(disk.family, Family::DiskComplement { r: 2.0 });
        assert!(serde_json::from_str::<AnalyticSolution>(r#"{"family":"Wedge","params":{"s":2}}"#).is_err());
    }

    #[test]
    fn free_boundary_samples() {
        let w = Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        let fb = AnalyticSolution::half_plane().free_boundary_curves(&w, 11).unwrap();
        assert_eq!(fb.components.len(), 1);
        let c = &fb.components[0];
        assert!(c.points.iter().all(|q| q.x == 0.0));
        assert!(c.points[0].y > c.points[10].y);

        let w = Rect::new(-0.5, 0.5, 0.0, 4.0).unwrap();
        let fb = AnalyticSolution::hairpin(1.0).unwrap().free_boundary_curves(&w, 201).unwrap();
        assert_eq!(fb.components.len(), 1);
        let apex = fb.components[0]
            .points
            .iter()
            .min_by(|a, b| a.x.abs().total_cmp(&b.x.abs()))
            .unwrap();
        assert!((apex.y - (FRAC_PI_2 + 1.0)).abs() < 1e-4);

        let w = Rect::new(-2.0, 2.0, -PI, PI).unwrap();
        let fb = AnalyticSolution::scherk(0.5, 1.0).unwrap().free_boundary_curves(&w, 400).unwrap();
        let closed: Vec<_> = fb.components.iter().filter(|c| c.closed).collect();
        assert_eq!(closed.len(), 1);
        let xmax = closed[0].points.iter().map(|q| q.x).fold(f64::MIN, f64::max);
        assert!((xmax - 0.75 * 3f64.ln()).abs() < 1e-6);
    }

    #[test]
    fn free_boundary_orientation_has_positive_phase_on_left() {
        let sols = [
            AnalyticSolution::half_plane(),
            AnalyticSolution::two_plane(0.7).unwrap(),
            AnalyticSolution::hairpin(1.0).unwrap(),
            AnalyticSolution::disk_complement(1.0).unwrap(),
            AnalyticSolution::scherk(0.5, 1.0).unwrap(),
        ];
        let w = Rect::new(-3.0, 3.0, -3.0, 3.0).unwrap();
        for sol in sols {
            let sol = sol.apply_motion(&RigidMotion::new(0.4, p(0.2, -0.1)));
            for c in sol.free_boundary_curves(&w, 256).unwrap().components {
                for (a, b) in c.segments().step_by(7) {
                    let mid = a.lerp(b, 0.5);
                    let left = (b - a).perp() * (1e-3 / a.dist(b));
                    assert!(sol.eval_u(mid + left).unwrap() > 0.0, "{sol}");
                }
            }
        }
    }
}
