//! Flatness classification in the unit disk and the annulus check.

use bernoulli_lab::geometry::{annulus_flat_check, classify_flat};
use bernoulli_lab::{AnalyticSolution, Point2, RigidMotion};

fn main() -> bernoulli_lab::Result<()> {
    let cases = [
        ("half-plane, tilted", 0.2, AnalyticSolution::half_plane().with_motion(RigidMotion::rotation(0.03))),
        (
            "two-plane a = 0.1",
            0.2,
            AnalyticSolution::two_plane(0.1)?.with_motion(RigidMotion::translation(Point2::new(0.05, 0.0))),
        ),
        ("hairpin a = 0.05", 0.4, AnalyticSolution::hairpin(0.05)?),
    ];
    for (name, delta, u) in &cases {
        let rep = classify_flat(u, *delta, 1.0 / 50.0)?;
        println!("{name:<20} case {}  flatness {:.4}  positive/zero in B1: {}/{}", rep.case, rep.flatness, rep.positive_b1, rep.zero_b1);
    }

    let scales = [0.05, 0.1, 0.2, 0.4];
    let rep = annulus_flat_check(&AnalyticSolution::wedge(1.0)?, 0.01, &scales, 1.0 / 200.0)?;
    for s in &rep.scales {
        println!("wedge, r = {:<5} rotation {:+.6}  flatness {:.3e}", s.r, s.rotation, s.flatness);
    }
    Ok(())
}
