//! Run the full battery of solution checks on each family, and on a plane with the
//! wrong slope, which is a viscosity supersolution but not a solution.

use bernoulli_lab::cli::{verify_report, Subject};
use bernoulli_lab::solutions::OneSidedPlane;
use bernoulli_lab::{AnalyticSolution, Rect};

fn main() -> bernoulli_lab::Result<()> {
    let window = Rect::new(-4.0, 4.0, -4.0, 4.0)?;
    let subjects = [
        Subject::Exact(AnalyticSolution::half_plane()),
        Subject::Exact(AnalyticSolution::two_plane(1.0)?),
        Subject::Exact(AnalyticSolution::wedge(0.5)?),
        Subject::Exact(AnalyticSolution::hairpin(1.0)?),
        Subject::Exact(AnalyticSolution::disk_complement(1.0)?),
        Subject::Exact(AnalyticSolution::scherk(0.5, 1.0)?),
        Subject::OneSided(OneSidedPlane { slope: 0.5 }),
    ];
    for u in &subjects {
        let rep = verify_report(u, &window, 1.0 / 64.0, 1e-4)?;
        println!("{}: {}", rep.solution, if rep.all_pass { "all pass" } else { "FAILED" });
        for c in &rep.checks {
            let v = c.value.map_or("-".to_string(), |v| format!("{v:.3e}"));
            println!("    {:<30} {v:>11}  tol {:.1e}  {}", c.name, c.tolerance, if c.pass { "ok" } else { "fail" });
        }
    }
    Ok(())
}
