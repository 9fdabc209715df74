//! Minimize the regularized one-phase energy with half-plane data and compare the
//! discrete free boundary with the line `x1 = 0`.

use bernoulli_lab::geometry::{extract_boundary, hausdorff, PolyCurve};
use bernoulli_lab::variational::{minimize_ac, MinimizeParams};
use bernoulli_lab::{Point2, Rect};

fn main() -> bernoulli_lab::Result<()> {
    let window = Rect::new(-1.0, 1.0, -1.0, 1.0)?;
    let h = 1.0 / 64.0;
    let out = minimize_ac(window, h, |p: Point2| p.x.max(0.0), &MinimizeParams::default())?;
    let fb = extract_boundary(&out.field, out.eps);
    let line = [PolyCurve::open(vec![Point2::new(0.0, -1.0), Point2::new(0.0, 1.0)])];
    let d = hausdorff(&fb.components, &line, h / 4.0)?;
    println!("iterations = {}  converged = {}  monotone = {}", out.iterations, out.converged, out.monotone());
    println!("final eps = {:.3e}  residual = {:.3e}", out.eps, out.residual);
    println!("Hausdorff to x1 = 0: {d:.3e}  (2h = {:.3e})", 2.0 * h);
    for (k, rec) in out.history.iter().enumerate().step_by((out.history.len() / 6).max(1)) {
        println!("  iter {k:>4}  stage {}  eps {:.3e}  energy {:.12}", rec.stage, rec.eps, rec.energy);
    }
    Ok(())
}
