//! Acceptance suite: one pass/fail line per criterion, tolerances pinned below.

use std::f64::consts::{FRAC_PI_2, PI};
use std::process::ExitCode;
use std::time::Instant;

use bernoulli_lab::conformal::{hhp_derivative, hhp_forward, hhp_inverse, in_slit_image, slit_inverse, ScherkChart};
use bernoulli_lab::geometry::{
    annulus_flat_check, classify_flat, extract_boundary, flux_balance, hausdorff, FlatCase, FreeBoundary, PolyCurve,
};
use bernoulli_lab::quad::GaussLegendre;
use bernoulli_lab::solutions::OneSidedPlane;
use bernoulli_lab::traizet::{build_mesh, catenoid_fit, mean_curvature, orthogonality_check, MeshRegion};
use bernoulli_lab::variational::{
    minimize_ac, variational_residual, viscosity_slope, weiss_energy, BumpField, MinimizeParams, TestVectorField,
};
use bernoulli_lab::{AnalyticSolution, Evaluator, Point2, Rect, Result, RigidMotion};
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = Result<(bool, String)>;

fn p(x: f64, y: f64) -> Point2 {
    Point2::new(x, y)
}

fn rect(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Rect {
    Rect { x_min, x_max, y_min, y_max }
}

/// Free boundary samples with inward unit normals (positive phase on the left).
fn with_normals(fb: &FreeBoundary) -> Vec<(Point2, Point2)> {
    let mut out = Vec::new();
    for c in &fb.components {
        for w in c.points.windows(3) {
            let t = w[2] - w[0];
            out.push((w[1], t.perp() * (1.0 / t.norm())));
        }
    }
    out
}

/// Largest absolute value of `f` over a polar grid of the closed unit disk.
fn sup_on_unit_disk<F: Fn(Point2) -> Result<f64>>(f: F) -> Result<f64> {
    let mut worst = f(Point2::ORIGIN)?.abs();
    for i in 1..=60 {
        let r = i as f64 / 60.0;
        for k in 0..240 {
            let t = 2.0 * PI * k as f64 / 240.0;
            worst = worst.max(f(Point2::from_polar(r, t))?.abs());
        }
    }
    Ok(worst)
}

fn c1_hairpin_boundary() -> Verdict {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for a in [0.25, 1.0, 2.0] {
        let u = AnalyticSolution::hairpin(a)?;
        let fb = u.free_boundary_curves(&rect(-3.0 * a, 3.0 * a, -12.0 * a, 12.0 * a), 250)?;
        let mut pts: Vec<Point2> = fb.components.iter().flat_map(|c| c.points.clone()).collect();
        // The same curve through the chart, as the limit of the strip edge.
        for k in 0..=100 {
            let t = -3.0 + 0.06 * k as f64;
            for sign in [1.0, -1.0] {
                let z = hhp_forward(C::new(t, sign * (FRAC_PI_2 - 1e-13)))?;
                pts.push(p(a * z.re, a * z.im));
            }
        }
        for q in pts {
            worst = worst.max((q.y.abs() / a - (FRAC_PI_2 + (q.x / a).cosh())).abs());
            count += 1;
        }
    }
    Ok((count >= 1000 && worst < 1e-8, format!("{count} points, max catenary residual {worst:.2e}")))
}

fn c2_hairpin_dual_route() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    while count < 50 {
        let x1 = rng.gen_range(0.02..3.0);
        let x2 = rng.gen_range(-0.97..0.97) * (FRAC_PI_2 + f64::cosh(x1));
        let z = C::new(x1, x2);
        if !in_slit_image(z, 1.0) {
            continue;
        }
        let strip = hhp_inverse(z)?.cosh().re;
        let slit = slit_inverse(z, 1.0)?.re;
        worst = worst.max((strip - slit).abs());
        count += 1;
    }
    Ok((worst < 1e-8, format!("50 points, max disagreement {worst:.2e}")))
}

fn c3_slope_condition() -> Verdict {
    // Chart derivative limits at the free boundary preimages.
    let mut chart_err: f64 = 0.0;
    for k in 0..=40 {
        let t = -3.0 + 0.15 * k as f64;
        let w = C::new(t, FRAC_PI_2 - 1e-10);
        let du = w.sinh() / hhp_derivative(w);
        chart_err = chart_err.max((du.norm() - 1.0).abs());
    }
    let chart = ScherkChart::cached(0.5)?;
    let half = 0.5 * chart.strip_width();
    for k in 1..40 {
        let y = -half + 2.0 * half * k as f64 / 40.0;
        let d = chart.derivative(C::new(1e-12, y));
        chart_err = chart_err.max((1.0 / d.norm() - 1.0).abs());
    }
    // One-sided gradients and difference quotients at sampled boundary points.
    let mut grad_err: f64 = 0.0;
    let mut fd_err: f64 = 0.0;
    let cases = [
        (AnalyticSolution::hairpin(1.0)?, rect(-2.0, 2.0, -5.0, 5.0)),
        (AnalyticSolution::scherk(0.5, 1.0)?, rect(-2.0, 2.0, -4.0, 4.0)),
    ];
    for (u, window) in cases {
        let fb = u.free_boundary_curves(&window, 60)?;
        for (q, n) in with_normals(&fb) {
            grad_err = grad_err.max((u.gradient(q)?.norm() - 1.0).abs());
            let d = 1e-4;
            fd_err = fd_err.max((u.value(q + n * d)? / d - 1.0).abs());
        }
    }
    let pass = chart_err < 1e-6 && grad_err < 1e-6 && fd_err < 5e-3;
    Ok((pass, format!("chart {chart_err:.2e}, one-sided {grad_err:.2e}, difference quotient {fd_err:.2e}")))
}

/// Maximum of `f` on `[a, b]` for a unimodal `f`.
fn golden_max<F: Fn(f64) -> Result<f64>>(mut a: f64, mut b: f64, f: F) -> Result<f64> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (b - g * (b - a), a + g * (b - a));
    let (mut f1, mut f2) = (f(x1)?, f(x2)?);
    while b - a > 1e-6 {
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = f(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = f(x1)?;
        }
    }
    Ok(f1.max(f2))
}

fn c4_scherk_relations() -> Verdict {
    let (mut perim, mut saddle, mut implicit) = (0.0f64, 0.0f64, 0.0f64);
    for s in [0.125, 0.5, 0.875] {
        let u = AnalyticSolution::scherk(s, 1.0)?;
        let window = rect(-1.0, 1.0, -3.2, 3.2);
        let loop_len = |n: usize| -> Result<(f64, PolyCurve)> {
            let fb = u.free_boundary_curves(&window, n)?;
            let c = fb.components.into_iter().find(|c| c.closed).expect("closed loop in window");
            Ok((c.length(), c))
        };
        let (l1, _) = loop_len(20_000)?;
        let (l2, curve) = loop_len(40_000)?;
        // Chord lengths converge at second order.
        let half_perimeter = 0.5 * (l2 + (l2 - l1) / 3.0);
        perim = perim.max((half_perimeter - 2.0 * PI * s).abs());
        let (s2p, s2m) = (1.0 + s * s, 1.0 - s * s);
        for q in &curve.points {
            implicit = implicit.max((s2m * (q.x / s2m).cosh() - s2p * (q.y / s2p).cos()).abs());
        }
        let top = curve.points.iter().map(|q| q.y).fold(f64::NEG_INFINITY, f64::max);
        let peak = golden_max(top, 2.0 * PI - top, |y| u.value(p(0.0, y)))?;
        saddle = saddle.max((peak - 2.0 * s * (1.0 / s).ln()).abs());
    }
    let pass = perim < 1e-6 && saddle < 1e-6 && implicit < 1e-10;
    Ok((pass, format!("half-perimeter {perim:.2e}, saddle value {saddle:.2e}, implicit {implicit:.2e}")))
}

fn observed_order(hs: &[f64], rs: &[f64]) -> f64 {
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = rs.iter().map(|r| r.abs().max(1e-300).ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

fn c5_variational() -> Verdict {
    let window = rect(-4.0, 4.0, -4.0, 4.0);
    let hs = [1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0];
    let m = [[0.3, 0.1], [-0.2, 0.5]];
    let exact = [
        (AnalyticSolution::half_plane(), p(0.0, 0.1)),
        (AnalyticSolution::two_plane(0.5)?, p(0.0, 0.1)),
        (AnalyticSolution::wedge(0.7)?, p(0.0, 0.1)),
        (AnalyticSolution::hairpin(1.0)?, p(0.3, 2.7)),
        (AnalyticSolution::disk_complement(1.0)?, p(0.8, 0.7)),
        (AnalyticSolution::scherk(0.5, 1.0)?, p(0.8, 0.3)),
    ];
    let mut worst_order = f64::INFINITY;
    let mut all_decrease = true;
    for (u, c) in exact {
        let psi = BumpField::new(c, 0.6, p(0.7, -0.4)).with_matrix(m);
        let rs: Vec<f64> = hs.iter().map(|&h| variational_residual(&u, &psi, &window, h)).collect::<Result<_>>()?;
        all_decrease &= rs[2].abs() < rs[0].abs();
        worst_order = worst_order.min(observed_order(&hs, &rs));
    }
    // A flat free boundary with the wrong slope leaves (s^2 - 1) times the flux of psi_1.
    let s = 0.5;
    let plane = OneSidedPlane { slope: s };
    let bumps = [
        BumpField::new(p(0.2, 0.1), 0.6, p(1.0, 0.0)),
        BumpField::new(p(-0.1, 0.3), 0.5, p(0.6, -0.8)).with_matrix(m),
        BumpField::new(p(0.3, -0.2), 0.7, p(-0.4, 0.9)).with_matrix([[0.0, 1.0], [-1.0, 0.2]]),
    ];
    let gl = GaussLegendre::new(20);
    let mut worst_rel: f64 = 0.0;
    for psi in &bumps {
        let half = (psi.radius * psi.radius - psi.center.x * psi.center.x).sqrt();
        let (lo, hi) = (psi.center.y - half, psi.center.y + half);
        let panels = 16;
        let step = (hi - lo) / panels as f64;
        let line: f64 = (0..panels)
            .map(|k| gl.integrate(lo + k as f64 * step, lo + (k + 1) as f64 * step, |y| psi.eval(p(0.0, y)).0.x))
            .sum();
        let expected = (s * s - 1.0) * line;
        let got = variational_residual(&plane, psi, &window, 1.0 / 64.0)?;
        worst_rel = worst_rel.max((got - expected).abs() / expected.abs());
    }
    let pass = worst_order >= 1.0 && all_decrease && worst_rel < 0.1;
    Ok((pass, format!("min observed order {worst_order:.2}, one-sided plane relative error {worst_rel:.2e}")))
}

fn c6_weiss() -> Verdict {
    // W(r) for 1-homogeneous u = r g(theta): int_0^{2pi} (g^2 + g'^2 + 1_{g>0}) / 2 - g^2.
    let gl = GaussLegendre::new(24);
    let oracle = |g: &dyn Fn(f64) -> (f64, f64), arcs: &[(f64, f64)]| -> f64 {
        arcs.iter()
            .map(|&(a, b)| {
                gl.integrate(a, b, |t| {
                    let (v, dv) = g(t);
                    0.5 * (v * v + dv * dv + 1.0) - v * v
                })
            })
            .sum()
    };
    let plane = oracle(&|t: f64| (t.cos(), -t.sin()), &[(-FRAC_PI_2, FRAC_PI_2)]);
    let mut worst_spread: f64 = 0.0;
    let mut plane_err: f64 = 0.0;
    let radii = [0.25, 0.5, 1.0];
    let cases: Vec<(AnalyticSolution, f64)> = vec![
        (AnalyticSolution::half_plane(), plane),
        (
            AnalyticSolution::wedge(0.5)?,
            oracle(
                &|t: f64| (0.5 * t.cos().abs(), -0.5 * t.sin() * t.cos().signum()),
                &[(-FRAC_PI_2, FRAC_PI_2), (FRAC_PI_2, 3.0 * FRAC_PI_2)],
            ),
        ),
        (
            AnalyticSolution::wedge(1.0)?,
            oracle(
                &|t: f64| (t.cos().abs(), -t.sin() * t.cos().signum()),
                &[(-FRAC_PI_2, FRAC_PI_2), (FRAC_PI_2, 3.0 * FRAC_PI_2)],
            ),
        ),
    ];
    for (k, (u, expected)) in cases.iter().enumerate() {
        let w: Vec<f64> = radii.iter().map(|&r| weiss_energy(u, Point2::ORIGIN, r, 16)).collect::<Result<_>>()?;
        let hi = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = w.iter().cloned().fold(f64::INFINITY, f64::min);
        worst_spread = worst_spread.max((hi - lo) / expected.abs());
        let err = w.iter().map(|v| (v - expected).abs()).fold(0.0, f64::max);
        if k == 0 {
            plane_err = err.max((expected - FRAC_PI_2).abs());
        }
    }
    let pass = worst_spread <= 1e-5 && plane_err <= 1e-5;
    Ok((pass, format!("relative spread {worst_spread:.2e}, half-plane value error {plane_err:.2e}")))
}

/// Star-shaped polygon around `c` with random radii.
fn random_polygon(rng: &mut ChaCha8Rng, c: Point2, scale: f64) -> Vec<Point2> {
    let n = rng.gen_range(5..10);
    let phase = rng.gen_range(0.0..2.0 * PI);
    (0..n)
        .map(|k| {
            let t = phase + 2.0 * PI * (k as f64 + rng.gen_range(-0.3..0.3)) / n as f64;
            c + Point2::from_polar(scale * rng.gen_range(0.35..1.0), t)
        })
        .collect()
}

fn c7_flux_balance() -> Verdict {
    let families = [
        (AnalyticSolution::half_plane(), 1.0),
        (AnalyticSolution::two_plane(0.5)?, 1.0),
        (AnalyticSolution::wedge(0.7)?, 1.0),
        (AnalyticSolution::hairpin(1.0)?, 1.0),
        (AnalyticSolution::disk_complement(1.0)?, 0.8),
        (AnalyticSolution::scherk(0.5, 1.0)?, 0.6),
    ];
    let results: Vec<Result<(f64, bool)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = families
            .iter()
            .enumerate()
            .map(|(k, &(u, scale))| {
                scope.spawn(move || -> Result<(f64, bool)> {
                    let mut rng = ChaCha8Rng::seed_from_u64(70 + k as u64);
                    let fb = u.free_boundary_curves(&rect(-2.0, 2.0, -3.0, 3.0), 200)?;
                    let pts: Vec<Point2> = fb.components.iter().flat_map(|c| c.points.clone()).collect();
                    let (mut worst, mut holds) = (0.0f64, true);
                    for _ in 0..20 {
                        let c = pts[rng.gen_range(0..pts.len())] + p(rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1));
                        let poly = random_polygon(&mut rng, c, scale);
                        let r = flux_balance(&u, &poly, 1e-3)?;
                        worst = worst.max(r.net_flux.abs());
                        holds &= r.inequality_holds;
                    }
                    Ok((worst, holds))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("flux worker panicked")).collect()
    });
    let mut worst: f64 = 0.0;
    let mut holds = true;
    for r in results {
        let (w, h) = r?;
        worst = worst.max(w);
        holds &= h;
    }
    Ok((worst < 1e-7 && holds, format!("120 polygons, max |net flux| {worst:.2e}, inequality holds: {holds}")))
}

fn c8_flatness_trichotomy() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cases = [
        (AnalyticSolution::half_plane(), 0.1, 0.03, FlatCase::A),
        (
            AnalyticSolution::two_plane(0.1)?.with_motion(RigidMotion::translation(p(0.05, 0.0))),
            0.2,
            0.03,
            FlatCase::B,
        ),
        (AnalyticSolution::hairpin(0.05)?, 0.4, 0.05, FlatCase::C),
    ];
    let mut right = 0;
    let mut total = 0;
    let mut worst_flatness: f64 = 0.0;
    for (u, delta, spread, expect) in cases {
        for _ in 0..8 {
            let angle = rng.gen_range(-spread..spread) + if rng.gen_bool(0.5) { PI } else { 0.0 };
            let v = u.apply_motion(&RigidMotion::rotation(angle));
            let rep = classify_flat(&v, delta, 1.0 / 50.0)?;
            worst_flatness = worst_flatness.max(rep.flatness / delta);
            total += 1;
            if rep.case == expect {
                right += 1;
            }
        }
    }
    Ok((right == total, format!("{right}/{total} correct, max flatness/delta {worst_flatness:.2}")))
}

fn c9_minimizer() -> Verdict {
    let h = 1.0 / 128.0;
    let window = rect(-1.0, 1.0, -1.0, 1.0);
    let m = minimize_ac(window, h, |q| q.x.max(0.0), &MinimizeParams::default())?;
    let fb = extract_boundary(&m.field, 0.0);
    let axis = [PolyCurve::open(vec![p(0.0, -1.0), p(0.0, 1.0)])];
    let dist = hausdorff(&fb.components, &axis, 0.25 * h)?;
    let mut slopes = Vec::new();
    for k in 0..10 {
        let y = -0.72 + 0.16 * k as f64;
        let x0 = fb
            .components
            .iter()
            .flat_map(|c| c.segments())
            .find(|(a, b)| (a.y - y) * (b.y - y) <= 0.0 && a.y != b.y)
            .map(|(a, b)| a.x + (b.x - a.x) * (y - a.y) / (b.y - a.y))
            .unwrap_or(f64::NAN);
        slopes.push(viscosity_slope(&m.field, p(x0, y), p(1.0, 0.0), &[4.0 * h, 8.0 * h, 12.0 * h])?);
    }
    let lo = slopes.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pass = m.converged && m.monotone() && dist <= 2.0 * h && lo >= 0.9 && hi <= 1.1;
    Ok((
        pass,
        format!("{} iterations, monotone {}, boundary distance {dist:.2e}, slopes [{lo:.4}, {hi:.4}]", m.iterations, m.monotone()),
    ))
}

fn c10_blow_down() -> Verdict {
    let mut to_wedge = Vec::new();
    for a in [0.2, 0.1, 0.05] {
        let u = AnalyticSolution::hairpin(a)?;
        to_wedge.push(sup_on_unit_disk(|q| Ok(u.value(q)? - q.x.abs()))?);
    }
    let a = 0.5;
    let unit = AnalyticSolution::hairpin(1.0)?;
    let mut to_two_plane = Vec::new();
    for t in [2.0f64, 4.0, 8.0] {
        let lift = FRAC_PI_2 + t.cosh();
        to_two_plane.push(sup_on_unit_disk(|q| {
            let v = (a / t) * unit.value(p(t * q.x / a, t * q.y / a + lift))?;
            let tp = (q.x - a).max(0.0) + (-q.x - a).max(0.0);
            Ok(v - tp)
        })?);
    }
    let down = |v: &[f64]| v.windows(2).all(|w| w[1] < w[0]);
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(" > ");
    Ok((
        down(&to_wedge) && down(&to_two_plane),
        format!("wedge {}; two-plane {}", fmt(&to_wedge), fmt(&to_two_plane)),
    ))
}

fn c11_traizet() -> Verdict {
    let cases = [
        AnalyticSolution::disk_complement(1.0)?,
        AnalyticSolution::hairpin(1.0)?,
        AnalyticSolution::scherk(0.5, 1.0)?,
    ];
    let mut pass = true;
    let mut lines = Vec::new();
    for u in cases {
        let region = MeshRegion::canonical(&u);
        let mut hs = Vec::new();
        let mut orth = 0.0;
        let mut last = None;
        for res in [32, 64, 128] {
            let m = build_mesh(&u, &region, res)?;
            hs.push(mean_curvature(&m).iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())));
            orth = orthogonality_check(&m).iter().fold(0.0f64, |a, &(_, d)| a.max(d));
            last = Some(m);
        }
        pass &= hs[2] <= 1e-3 && hs[1] < hs[0] && hs[2] < hs[1] && orth <= 1e-3;
        lines.push(format!("{} H {:.1e}/{:.1e}/{:.1e} orth {orth:.1e}", u.family.name(), hs[0], hs[1], hs[2]));
        if let (bernoulli_lab::Family::DiskComplement { r }, Some(m)) = (u.family, last) {
            let fit = catenoid_fit(&m, r)?;
            let radial = |v: &bernoulli_lab::traizet::Point3| p(v.x, v.y).dist(fit.center);
            let cosh_err = m.vertices.iter().map(|v| (radial(v) - r * (v.z / r).cosh()).abs()).fold(0.0, f64::max);
            let sqrt_err = m
                .vertices
                .iter()
                .map(|v| (radial(v) - (r * r + v.z * v.z).sqrt()).abs())
                .fold(0.0, f64::max);
            pass &= cosh_err <= 1e-6;
            lines.push(format!("catenoid R cosh(X3/R) error {cosh_err:.1e} (sqrt(R^2+X3^2) profile off by {sqrt_err:.1e})"));
        }
    }
    Ok((pass, lines.join("; ")))
}

fn c12_annulus() -> Verdict {
    let scales = [0.05, 0.1, 0.2, 0.4];
    let mut worst: f64 = 0.0;
    let mut topo = true;
    for (u, positive) in [(AnalyticSolution::half_plane(), 1), (AnalyticSolution::wedge(1.0)?, 2)] {
        let rep = annulus_flat_check(&u, 0.01, &scales, 1.0 / 128.0)?;
        topo &= rep.fb_components == 2 && rep.positive_components == positive && rep.scales.len() == scales.len();
        worst = rep.scales.iter().fold(worst, |a, s| a.max(s.max_slope));
    }
    Ok((worst <= 1e-6 && topo, format!("max |g'| {worst:.2e}, two strands joining the circles: {topo}")))
}

fn main() -> ExitCode {
    let criteria: [(&str, f64, fn() -> Verdict); 12] = [
        ("hairpin boundary exactness", 1.0, c1_hairpin_boundary),
        ("hairpin dual-route agreement", 1.0, c2_hairpin_dual_route),
        ("slope condition", 1.0, c3_slope_condition),
        ("Scherk printed relations", 5.0, c4_scherk_relations),
        ("variational discrimination", 30.0, c5_variational),
        ("Weiss homogeneity", 10.0, c6_weiss),
        ("flux balance", 30.0, c7_flux_balance),
        ("flatness trichotomy", 20.0, c8_flatness_trichotomy),
        ("minimizer recovery", 300.0, c9_minimizer),
        ("blow-down trends", 30.0, c10_blow_down),
        ("Traizet minimality", 120.0, c11_traizet),
        ("annulus flatness probe", 10.0, c12_annulus),
    ];
    let mut failed = 0;
    for (k, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let verdict = run();
        let secs = start.elapsed().as_secs_f64();
        let (ok, detail) = match verdict {
            Ok((ok, detail)) => (ok && secs < *limit, detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {:>2} {} {name} ({secs:.2}s, limit {limit}s): {detail}",
            k + 1,
            if ok { "PASS" } else { "FAIL" }
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
