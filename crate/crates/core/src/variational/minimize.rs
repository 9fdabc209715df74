//! Descent for the smoothed Alt–Caffarelli energy with Dirichlet data.
//!
//! The indicator is replaced by the ramp `beta_eps(v) = min(v / eps, 1)`, which keeps
//! a genuine zero phase (its right derivative at 0 is positive). The linear solves of
//! the active-set iteration use conjugate gradients preconditioned by the discrete
//! Dirichlet Laplacian of the whole grid, inverted with fast sine transforms.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::ScalarField2D;
use crate::error::{Error, Result};
use crate::point::{Point2, Rect};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeParams {
    /// Initial ramp width; `None` means `2 h`.
    pub eps: Option<f64>,
    /// Number of times the ramp width is halved after the first stage.
    pub anneal_halvings: usize,
    /// Iteration cap per stage.
    pub max_iters: usize,
    /// Relative energy decrease per iteration required at exit.
    pub tol: f64,
    /// Max-norm bound on the Euler–Lagrange residual `-2 lap v + beta'(v)` at exit.
    pub residual_tol: f64,
}

impl Default for MinimizeParams {
    fn default() -> Self {
        Self {
            eps: None,
            anneal_halvings: 2,
            max_iters: 2000,
            tol: 1e-10,
            residual_tol: 1e-6,
        }
    }
}

/// One logged iteration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IterationRecord {
    pub stage: usize,
    pub eps: f64,
    pub energy: f64,
    pub residual: f64,
}

#[derive(Debug, Clone)]
pub struct Minimized {
    pub field: ScalarField2D,
    pub history: Vec<IterationRecord>,
    pub eps: f64,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl Minimized {
    /// True if the energy never increased within a stage.
    pub fn monotone(&self) -> bool {
        self.history.windows(2).all(|w| {
            w[0].stage != w[1].stage || w[1].energy <= w[0].energy * (1.0 + 1e-14) + 1e-14
        })
    }
}

/// Unnormalized DST-I of length `m`, via a complex FFT of length `2(m + 1)`.
struct Dst {
    m: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl Dst {
    fn new(m: usize, planner: &mut FftPlanner<f64>) -> Self {
        Self {
            m,
            fft: planner.plan_fft_forward(2 * (m + 1)),
        }
    }

    fn apply(&self, x: &mut [f64], buf: &mut Vec<Complex<f64>>) {
        let n = 2 * (self.m + 1);
        buf.clear();
        buf.resize(n, Complex::new(0.0, 0.0));
        for k in 0..self.m {
            buf[k + 1] = Complex::new(x[k], 0.0);
            buf[n - 1 - k] = Complex::new(-x[k], 0.0);
        }
        self.fft.process(buf);
        for k in 0..self.m {
            x[k] = -0.5 * buf[k + 1].im;
        }
    }
}

/// Solver for `2 (4 x_n - sum of neighbours) = r` on the interior with zero Dirichlet data.
struct Poisson {
    mx: usize,
    my: usize,
    dx: Dst,
    dy: Dst,
    inv_eig: Vec<f64>,
}

impl Poisson {
    fn new(mx: usize, my: usize) -> Self {
        let mut planner = FftPlanner::new();
        let dx = Dst::new(mx, &mut planner);
        let dy = Dst::new(my, &mut planner);
        let mut inv_eig = vec![0.0; mx * my];
        let norm = (2.0 / (mx + 1) as f64) * (2.0 / (my + 1) as f64);
        for l in 0..my {
            for k in 0..mx {
                let cx = (std::f64::consts::PI * (k + 1) as f64 / (mx + 1) as f64).cos();
                let cy = (std::f64::consts::PI * (l + 1) as f64 / (my + 1) as f64).cos();
                inv_eig[l * mx + k] = norm / (2.0 * (4.0 - 2.0 * cx - 2.0 * cy));
            }
        }
        Self { mx, my, dx, dy, inv_eig }
    }

    fn transform(&self, x: &mut [f64]) {
        let mut buf = Vec::new();
        for row in x.chunks_mut(self.mx) {
            self.dx.apply(row, &mut buf);
        }
        let mut col = vec![0.0; self.my];
        for k in 0..self.mx {
            for l in 0..self.my {
                col[l] = x[l * self.mx + k];
            }
            self.dy.apply(&mut col, &mut buf);
            for l in 0..self.my {
                x[l * self.mx + k] = col[l];
            }
        }
    }

    fn solve(&self, r: &mut [f64]) {
        self.transform(r);
        for (v, s) in r.iter_mut().zip(&self.inv_eig) {
            *v *= s;
        }
        self.transform(r);
    }
}

struct Problem<'a> {
    nx: usize,
    ny: usize,
    h2: f64,
    eps: f64,
    free: &'a [bool],
}

impl Problem<'_> {
    fn beta(&self, v: f64) -> f64 {
        (v / self.eps).min(1.0)
    }

    fn dbeta(&self, v: f64) -> f64 {
        if v < self.eps {
            1.0 / self.eps
        } else {
            0.0
        }
    }

    fn weight(&self, i: usize, j: usize) -> f64 {
        let wx = if i == 0 || i + 1 == self.nx { 0.5 } else { 1.0 };
        let wy = if j == 0 || j + 1 == self.ny { 0.5 } else { 1.0 };
        wx * wy * self.h2
    }

    fn energy(&self, v: &[f64]) -> f64 {
        let nx = self.nx;
        let mut e = 0.0;
        for j in 0..self.ny - 1 {
            for i in 0..nx - 1 {
                let (a, b) = (v[j * nx + i], v[j * nx + i + 1]);
                let (c, d) = (v[(j + 1) * nx + i], v[(j + 1) * nx + i + 1]);
                e += 0.5 * ((b - a).powi(2) + (d - c).powi(2) + (c - a).powi(2) + (d - b).powi(2));
            }
        }
        for j in 0..self.ny {
            for i in 0..nx {
                e += self.weight(i, j) * self.beta(v[j * nx + i]);
            }
        }
        e
    }

    fn neighbour_sum(&self, v: &[f64], i: usize, j: usize) -> f64 {
        let nx = self.nx;
        v[j * nx + i - 1] + v[j * nx + i + 1] + v[(j - 1) * nx + i] + v[(j + 1) * nx + i]
    }

    /// Energy gradient at free nodes (zero elsewhere).
    fn gradient(&self, v: &[f64], g: &mut [f64], with_indicator: bool) {
        g.iter_mut().for_each(|x| *x = 0.0);
        for j in 1..self.ny - 1 {
            for i in 1..self.nx - 1 {
                let n = j * self.nx + i;
                if !self.free[n] {
                    continue;
                }
                let mut gn = 2.0 * (4.0 * v[n] - self.neighbour_sum(v, i, j));
                if with_indicator {
                    gn += self.h2 * self.dbeta(v[n]);
                }
                g[n] = gn;
            }
        }
    }

    /// Max-norm residual of the Euler–Lagrange system with the constraint `v >= 0`.
    fn residual(&self, v: &[f64], g: &[f64]) -> f64 {
        let mut r: f64 = 0.0;
        for (n, (&gn, &vn)) in g.iter().zip(v).enumerate() {
            if !self.free[n] {
                continue;
            }
            let x = if vn > 0.0 { gn.abs() } else { (-gn).max(0.0) };
            r = r.max(x / self.h2);
        }
        r
    }

    /// One lexicographic sweep over the free nodes. Each node energy
    /// `4 v^2 - 2 v S + h^2 beta(v)` is minimized exactly over `v >= 0`; the
    /// over-relaxed value `v + omega (v* - v)` replaces the minimizer when it lowers the
    /// node energy further, so every update decreases the total energy.
    fn sweep(&self, v: &mut [f64], omega: f64) {
        for j in 1..self.ny - 1 {
            for i in 1..self.nx - 1 {
                let n = j * self.nx + i;
                if !self.free[n] {
                    continue;
                }
                let s = self.neighbour_sum(v, i, j);
                let f = |x: f64| 4.0 * x * x - 2.0 * x * s + self.h2 * self.beta(x);
                let low = ((2.0 * s - self.h2 / self.eps) / 8.0).clamp(0.0, self.eps);
                let high = (s / 4.0).max(self.eps);
                let best = if f(low) <= f(high) { low } else { high };
                let fb = f(best);
                if fb <= f(v[n]) {
                    let over = (v[n] + omega * (best - v[n])).max(0.0);
                    v[n] = if f(over) <= fb { over } else { best };
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NodeSet {
    Fixed,
    Zero,
    Ramp,
    Plateau,
}

/// Solve the linear system of one active-set step by preconditioned conjugate gradients:
/// on `Ramp`/`Plateau` nodes `2 (4 v - sum of neighbours) + h^2/eps [Ramp] = 0`, with
/// `Fixed` and `Zero` nodes held. `v` is the warm start and is overwritten.
fn solve_sets(pr: &Problem, poisson: &Poisson, sets: &[NodeSet], v: &mut [f64]) {
    let (nx, ny) = (pr.nx, pr.ny);
    let (mx, my) = (nx - 2, ny - 2);
    let active = |n: usize| matches!(sets[n], NodeSet::Ramp | NodeSet::Plateau);
    let apply = |x: &[f64], out: &mut [f64]| {
        for j in 1..ny - 1 {
            for i in 1..nx - 1 {
                let n = j * nx + i;
                out[n] = if active(n) {
                    let mut s = 0.0;
                    for m in [n - 1, n + 1, n - nx, n + nx] {
                        if active(m) {
                            s += x[m];
                        }
                    }
                    2.0 * (4.0 * x[n] - s)
                } else {
                    0.0
                };
            }
        }
    };
    let mut inner = vec![0.0; mx * my];
    let mut precondition = |r: &[f64], z: &mut [f64]| {
        for l in 0..my {
            for k in 0..mx {
                inner[l * mx + k] = r[(l + 1) * nx + k + 1];
            }
        }
        poisson.solve(&mut inner);
        z.iter_mut().for_each(|x| *x = 0.0);
        for l in 0..my {
            for k in 0..mx {
                let n = (l + 1) * nx + k + 1;
                if active(n) {
                    z[n] = inner[l * mx + k];
                }
            }
        }
    };
    for (n, x) in v.iter_mut().enumerate() {
        if sets[n] == NodeSet::Zero {
            *x = 0.0;
        }
    }
    let size = nx * ny;
    let mut r = vec![0.0; size];
    for j in 1..ny - 1 {
        for i in 1..nx - 1 {
            let n = j * nx + i;
            if active(n) {
                let ramp = if sets[n] == NodeSet::Ramp { pr.h2 / pr.eps } else { 0.0 };
                r[n] = -(2.0 * (4.0 * v[n] - pr.neighbour_sum(v, i, j)) + ramp);
            }
        }
    }
    let bnorm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return;
    }
    let mut z = vec![0.0; size];
    precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; size];
    for _ in 0..2000 {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for n in 0..size {
            v[n] += alpha * p[n];
            r[n] -= alpha * ap[n];
        }
        let rn = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if rn <= 1e-13 * bnorm.max(pr.h2) {
            break;
        }
        precondition(&r, &mut z);
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for n in 0..size {
            p[n] = z[n] + beta * p[n];
        }
    }
}

/// Minimize the smoothed energy on `initial.window()`, keeping the grid boundary and
/// every node flagged in `fixed` at their initial values.
///
/// Each stage runs an active-set iteration: nodes are split into zero, ramp
/// (`0 < v < eps`) and plateau nodes, the resulting linear problem is solved, and the
/// candidate is accepted only if it lowers the energy (otherwise a backtracking search
/// along the candidate direction, then relaxation sweeps, take its place).
pub fn minimize_with_mask(initial: ScalarField2D, fixed: &[bool], params: &MinimizeParams) -> Result<Minimized> {
    let (nx, ny, h) = (initial.nx, initial.ny, initial.h);
    if nx < 3 || ny < 3 {
        return Err(Error::InvalidInput("grid needs at least one interior node".into()));
    }
    if fixed.len() != nx * ny {
        return Err(Error::InvalidInput("mask size does not match the grid".into()));
    }
    let free: Vec<bool> = (0..nx * ny)
        .map(|n| !fixed[n] && !initial.is_boundary(n % nx, n / nx))
        .collect();
    let poisson = Poisson::new(nx - 2, ny - 2);
    let mut v = initial.values.clone();
    let eps0 = params.eps.unwrap_or(2.0 * h);
    if !(eps0 > 0.0) {
        return Err(Error::InvalidInput(format!("ramp width {eps0} must be positive")));
    }

    // Harmonic start.
    let mut sets: Vec<NodeSet> = free
        .iter()
        .map(|&f| if f { NodeSet::Plateau } else { NodeSet::Fixed })
        .collect();
    {
        let pr = Problem { nx, ny, h2: h * h, eps: eps0, free: &free };
        solve_sets(&pr, &poisson, &sets, &mut v);
        v.iter_mut().for_each(|x| *x = x.max(0.0));
    }

    let omega = 2.0 / (1.0 + (std::f64::consts::PI / (nx.max(ny) - 1) as f64).sin());
    let mut g = vec![0.0; nx * ny];
    let mut history = Vec::new();
    let mut eps = eps0;
    let mut total_iters = 0;
    let mut residual = f64::INFINITY;
    let mut converged = false;
    for stage in 0..=params.anneal_halvings {
        if stage > 0 {
            eps *= 0.5;
        }
        let pr = Problem { nx, ny, h2: h * h, eps, free: &free };
        let mut energy = pr.energy(&v);
        converged = false;
        for _ in 0..params.max_iters {
            total_iters += 1;
            // Classify nodes; zero nodes pulled upward by their neighbours join the ramp.
            for j in 1..ny - 1 {
                for i in 1..nx - 1 {
                    let n = j * nx + i;
                    if !free[n] {
                        continue;
                    }
                    sets[n] = if v[n] <= 0.0 {
                        if pr.h2 / eps - 2.0 * pr.neighbour_sum(&v, i, j) < 0.0 {
                            NodeSet::Ramp
                        } else {
                            NodeSet::Zero
                        }
                    } else if v[n] < eps {
                        NodeSet::Ramp
                    } else {
                        NodeSet::Plateau
                    };
                }
            }
            let mut cand = v.clone();
            solve_sets(&pr, &poisson, &sets, &mut cand);
            cand.iter_mut().for_each(|x| *x = x.max(0.0));
            let mut accepted = false;
            let mut t = 1.0;
            for _ in 0..20 {
                let trial: Vec<f64> = v.iter().zip(&cand).map(|(a, b)| a + t * (b - a)).collect();
                let e = pr.energy(&trial);
                if e < energy {
                    v = trial;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                for _ in 0..10 {
                    pr.sweep(&mut v, omega);
                }
            }
            let e = pr.energy(&v);
            pr.gradient(&v, &mut g, true);
            residual = pr.residual(&v, &g);
            let decrease = (energy - e) / energy.abs().max(1e-300);
            energy = e;
            history.push(IterationRecord { stage, eps, energy, residual });
            if residual <= params.residual_tol || (decrease <= params.tol && !accepted) {
                converged = residual <= params.residual_tol;
                break;
            }
        }
        if !converged {
            break;
        }
    }
    let field = ScalarField2D { values: v, ..initial };
    let out = Minimized {
        field,
        history,
        eps,
        residual,
        iterations: total_iters,
        converged,
    };
    if out.converged {
        Ok(out)
    } else {
        Err(Error::NotConverged(Box::new(out)))
    }
}

/// Minimize the smoothed energy on `window` with Dirichlet data `boundary` on the
/// outermost grid nodes.
pub fn minimize_ac<B: Fn(Point2) -> f64>(
    window: Rect,
    h: f64,
    boundary: B,
    params: &MinimizeParams,
) -> Result<Minimized> {
    let mut field = ScalarField2D::zeros(window, h)?;
    for j in 0..field.ny {
        for i in 0..field.nx {
            if field.is_boundary(i, j) {
                let b = boundary(field.node(i, j));
                if !(b >= 0.0 && b.is_finite()) {
                    return Err(Error::InvalidInput(format!("boundary datum {b} is not nonnegative")));
                }
                field.set(i, j, b);
            }
        }
    }
    let fixed = vec![false; field.nx * field.ny];
    minimize_with_mask(field, &fixed, params)
}
