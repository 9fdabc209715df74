//! Traizet surfaces: the catenoid from the disk complement and the Scherk periods.

use bernoulli_lab::traizet::{
    build_mesh, catenoid_fit, mean_curvature, orthogonality_check, scherk_periods, MeshRegion,
};
use bernoulli_lab::AnalyticSolution;

fn main() -> bernoulli_lab::Result<()> {
    let u = AnalyticSolution::disk_complement(1.0)?;
    for n in [32, 64, 128] {
        let mesh = build_mesh(&u, &MeshRegion::canonical(&u), n)?;
        let h = mean_curvature(&mesh).into_iter().flatten().map(f64::abs).fold(0.0, f64::max);
        let ortho = orthogonality_check(&mesh).into_iter().map(|(_, a)| a).fold(0.0, f64::max);
        let fit = catenoid_fit(&mesh, 1.0)?;
        println!(
            "n = {n:>3}  vertices {:>6}  max |H| {h:.3e}  max angle {ortho:.3e}  catenoid error {:.3e}",
            mesh.vertices.len(),
            fit.max_error
        );
    }

    let scherk = AnalyticSolution::scherk(0.5, 1.0)?;
    let p = scherk_periods(&scherk, 64)?;
    println!("Scherk s = 0.5: loop period {:?}  translation {:?}", p.loop_period, p.translation);
    Ok(())
}
