//! Free boundary of the double hairpin at a few scales, with the neck width.
//!
//! Run with `cargo run --release --example hairpin_boundary`.

use std::f64::consts::PI;

use bernoulli_lab::{AnalyticSolution, Point2, Rect};

fn main() -> bernoulli_lab::Result<()> {
    let window = Rect::new(-4.0, 4.0, -8.0, 8.0)?;
    for a in [0.25, 1.0, 2.0] {
        let u = AnalyticSolution::hairpin(a)?;
        let fb = u.free_boundary_curves(&window, 2000)?;
        // The two branches are closest across the saddle.
        let neck = fb.components[0]
            .points
            .iter()
            .map(|p| fb.components[1].distance_to(*p))
            .fold(f64::INFINITY, f64::min);
        println!(
            "a = {a:<4}  components = {}  length = {:.6}  neck = {:.9}  (2 + pi) a = {:.9}",
            fb.components.len(),
            fb.total_length(),
            neck,
            (2.0 + PI) * a
        );
        println!("    u(0, 0) = {:.12}  u(0, 1) = {:.12}", u.eval_u(Point2::ORIGIN)?, u.eval_u(Point2::new(0.0, 1.0))?);
    }
    Ok(())
}
