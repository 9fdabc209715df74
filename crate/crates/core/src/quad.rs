//! Quadrature rules: fixed Gauss-Legendre and adaptive Gauss-Kronrod (21 point)
//! for complex-valued integrands.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = (n + 1) / 2;
        for i in 0..m {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=n {
                    let kf = k as f64;
                    let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                    p0 = p1;
                    p1 = p2;
                }
                let p = if n == 1 { x } else { p1 };
                let pm1 = if n == 1 { 1.0 } else { p0 };
                dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            if n == 1 {
                nodes[0] = 0.0;
                weights[0] = 2.0;
                break;
            }
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    /// Integrate `f` over `[a, b]`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(c + h * x))
            .sum::<f64>()
            * h
    }

    /// Composite rule over `pieces` equal sub-intervals.
    pub fn integrate_composite<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        pieces: usize,
        mut f: F,
    ) -> f64 {
        let pieces = pieces.max(1);
        let step = (b - a) / pieces as f64;
        (0..pieces)
            .map(|k| {
                let lo = a + step * k as f64;
                self.integrate(lo, lo + step, &mut f)
            })
            .sum()
    }

    /// Integrate a complex integrand along the straight segment `from -> to` in the
    /// complex plane, i.e. `int f(eta) d eta`.
    pub fn segment<F: FnMut(Complex64) -> Complex64>(
        &self,
        from: Complex64,
        to: Complex64,
        mut f: F,
    ) -> Complex64 {
        let c = 0.5 * (from + to);
        let h = 0.5 * (to - from);
        let mut acc = Complex64::new(0.0, 0.0);
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc += f(c + h * x) * *w;
        }
        acc * h
    }
}

const XGK: [f64; 11] = [
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208323165905,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
];

// 10-point Gauss weights at XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
];

/// One GK21 panel on `[a, b]` of a real parameter; returns (kronrod, |kronrod - gauss|).
fn gk21_panel<F: FnMut(f64) -> Complex64>(a: f64, b: f64, f: &mut F) -> (Complex64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[10];
    let mut gauss = Complex64::new(0.0, 0.0);
    for j in 0..10 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += s * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    (kron * h, ((kron - gauss) * h).norm())
}

/// Adaptive Gauss-Kronrod integration of a complex-valued function of a real
/// parameter over `[a, b]`, bisecting panels until the local error estimate falls
/// below the absolute tolerance share of the panel.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveGk {
    pub abs_tol: f64,
    pub max_depth: u32,
}

impl Default for AdaptiveGk {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            max_depth: 50,
        }
    }
}

impl AdaptiveGk {
    pub fn integrate<F: FnMut(f64) -> Complex64>(&self, a: f64, b: f64, mut f: F) -> Result<Complex64> {
        let mut stack = vec![(a, b, 0u32)];
        let mut total = Complex64::new(0.0, 0.0);
        let full = (b - a).abs().max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        while let Some((lo, hi, depth)) = stack.pop() {
            let (val, err) = gk21_panel(lo, hi, &mut f);
            if !val.re.is_finite() || !val.im.is_finite() {
                return Err(Error::Convergence {
                    what: "non-finite integrand in adaptive quadrature".into(),
                    iterations: depth as usize,
                    residual: f64::INFINITY,
                    last: None,
                });
            }
            let share = self.abs_tol * ((hi - lo).abs() / full).max(1e-3);
            if err <= share || err <= 4e-15 * val.norm() {
                total += val;
            } else if depth >= self.max_depth {
                worst = worst.max(err);
                total += val;
            } else {
                let mid = 0.5 * (lo + hi);
                stack.push((lo, mid, depth + 1));
                stack.push((mid, hi, depth + 1));
            }
        }
        if worst > self.abs_tol * 1e3 {
            return Err(Error::Convergence {
                what: "adaptive Gauss-Kronrod reached maximum depth".into(),
                iterations: self.max_depth as usize,
                residual: worst,
                last: Some(total),
            });
        }
        Ok(total)
    }

    /// `int f(eta) d eta` along the straight segment `from -> to`.
    pub fn segment<F: FnMut(Complex64) -> Complex64>(
        &self,
        from: Complex64,
        to: Complex64,
        mut f: F,
    ) -> Result<Complex64> {
        let d = to - from;
        self.integrate(0.0, 1.0, |t| f(from + d * t) * d)
    }

    /// Segment integral whose integrand has an inverse-square-root singularity at
    /// `to`; substitutes `eta = to - (to - from) * tau^2`.
    pub fn segment_singular_end<F: FnMut(Complex64) -> Complex64>(
        &self,
        from: Complex64,
        to: Complex64,
        mut f: F,
    ) -> Result<Complex64> {
        let d = to - from;
        // eta(tau) = to - d tau^2, d eta = -2 d tau d tau; tau from 1 to 0.
        self.integrate(0.0, 1.0, |tau| f(to - d * (tau * tau)) * d * (2.0 * tau))
    }

    /// As [`segment_singular_end`](Self::segment_singular_end), but `f` receives the
    /// offset `eta - to`, so integrands can avoid cancellation near the singularity.
    pub fn segment_singular_end_rel<F: FnMut(Complex64) -> Complex64>(
        &self,
        from: Complex64,
        to: Complex64,
        mut f: F,
    ) -> Result<Complex64> {
        let d = to - from;
        self.integrate(0.0, 1.0, |tau| f(-d * (tau * tau)) * d * (2.0 * tau))
    }
}
