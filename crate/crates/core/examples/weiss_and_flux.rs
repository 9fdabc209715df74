//! Weiss energies at free boundary points and the flux balance over a square.

use bernoulli_lab::geometry::flux_balance;
use bernoulli_lab::variational::weiss_energy;
use bernoulli_lab::{AnalyticSolution, Point2};

fn main() -> bernoulli_lab::Result<()> {
    let plane = AnalyticSolution::half_plane();
    let wedge = AnalyticSolution::wedge(1.0)?;
    let hairpin = AnalyticSolution::hairpin(1.0)?;
    let fb_point = Point2::new(0.0, std::f64::consts::FRAC_PI_2 + 1.0);
    println!("{:>8} {:>18} {:>18} {:>18}", "r", "half-plane", "wedge", "hairpin");
    for r in [0.05, 0.1, 0.2, 0.4, 0.8, 1.6] {
        println!(
            "{r:>8} {:>18.12} {:>18.12} {:>18.12}",
            weiss_energy(&plane, Point2::ORIGIN, r, 256)?,
            weiss_energy(&wedge, Point2::ORIGIN, r, 256)?,
            weiss_energy(&hairpin, fb_point, r, 256)?
        );
    }
    println!("pi/2 = {:.12}  pi = {:.12}", std::f64::consts::FRAC_PI_2, std::f64::consts::PI);

    let square = [Point2::new(-3.0, -3.0), Point2::new(3.0, -3.0), Point2::new(3.0, 3.0), Point2::new(-3.0, 3.0)];
    for u in [plane, AnalyticSolution::two_plane(0.5)?, hairpin] {
        let rep = flux_balance(&u, &square, 0.01)?;
        println!(
            "{u}: net flux {:.3e}  |FB| = {:.9}  L |rest| = {:.9}  holds = {}",
            rep.net_flux,
            rep.fb_measure,
            rep.lipschitz * rep.rest_measure,
            rep.inequality_holds
        );
    }
    Ok(())
}
