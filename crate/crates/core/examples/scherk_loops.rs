//! Zero phase loops of the Scherk family and the saddle value.

use std::f64::consts::PI;

use bernoulli_lab::conformal::{scherk_loop, scherk_loop_residual};
use bernoulli_lab::{AnalyticSolution, Rect};

fn main() -> bernoulli_lab::Result<()> {
    let window = Rect::new(-3.0, 3.0, -8.0, 8.0)?;
    for s in [0.125, 0.5, 0.875] {
        let u = AnalyticSolution::scherk(s, 1.0)?;
        let fb = u.free_boundary_curves(&window, 400)?;
        let half_width = fb
            .components
            .iter()
            .flat_map(|c| c.points.iter())
            .map(|p| p.x.abs())
            .fold(0.0, f64::max);
        let worst = (0..=64)
            .map(|k| scherk_loop(s, PI * s * (k as f64 / 32.0 - 1.0)).map(|p| scherk_loop_residual(s, p).abs()))
            .collect::<bernoulli_lab::Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        println!(
            "s = {s:<5}  loops = {}  half width = {half_width:.9}  saddle value = {:.12}  loop residual = {worst:.1e}",
            fb.components.len(),
            u.saddle_value()?
        );
    }
    println!("(3/4) ln 3 = {:.9}", 0.75 * 3f64.ln());
    Ok(())
}
