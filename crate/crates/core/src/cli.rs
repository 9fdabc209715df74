//! Batch front end: one JSON experiment config plus flag overrides, five drivers.
//!
//! Exit codes: 0 success, 1 failed check or non-convergence, 2 config or I/O failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    annulus_flat_check, circle_max, classify_flat, directed_hausdorff, extract_boundary, flux_balance,
    AnnulusReport, FlatReport, FreeBoundary,
};
use crate::io::{fmt17, read_grid, write_curvature, write_grid, write_json, write_obj, write_polylines};
use crate::point::{Point2, Rect};
use crate::solutions::{AnalyticSolution, Evaluator, Family, OneSidedPlane, RigidMotion};
use crate::traizet::{
    build_mesh, catenoid_fit, mean_curvature, orthogonality_check, scherk_periods, CatenoidFit, MeshRegion,
    ScherkPeriods,
};
use crate::variational::{
    minimize_ac, variational_residual, viscosity_slope, weiss_energy, BumpField, IterationRecord, MinimizeParams,
    Minimized,
};

#[derive(Debug, Parser)]
#[command(name = "bernoulli", version, about = "Planar one-phase free boundary laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    resolution: Option<usize>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Solution family, e.g. Hairpin, Scherk, OneSidedPlane.
    #[arg(long, global = true)]
    family: Option<String>,
    /// Family parameter or motion entry (angle, shift_x, shift_y) as key=value.
    #[arg(long = "param", global = true, value_parser = parse_param)]
    params: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Write free boundary polylines.
    Boundary,
    /// Run the solution checks and write a pass/fail report.
    Verify,
    /// Minimize the Alt–Caffarelli energy with Dirichlet data.
    Minimize,
    /// Map a solution to its minimal surface and write the mesh.
    Traizet,
    /// Flatness classification in B_1 or on an annulus.
    Classify,
}

fn parse_param(s: &str) -> std::result::Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got {s:?}"))?;
    let v: f64 = v.trim().parse().map_err(|_| format!("{v:?} is not a number"))?;
    Ok((k.trim().to_string(), v))
}

/// Family name, parameters and placement; `OneSidedPlane` (parameter `slope`) is
/// accepted next to the exact families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionSpec {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub motion: RigidMotion,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryData {
    /// Trace of the configured solution.
    #[default]
    Solution,
    Zero,
    /// Grid CSV with its JSON header; boundary nodes supply the data.
    Grid { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ClassifyMode {
    #[default]
    Flat,
    Annulus,
}

/// Figure datasets written by `boundary`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    /// Hairpins at `a = 1/4, 1, 2`.
    Hairpin,
    /// Scherk loops at `s = 1/8, 1/2, 7/8`.
    Scherk,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<Command>,
    pub solution: Option<SolutionSpec>,
    pub window: Option<Rect>,
    /// Grid cells per unit length, or mesh resolution for `traizet`.
    pub resolution: Option<usize>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub delta: Option<f64>,
    pub mode: Option<ClassifyMode>,
    pub scales: Option<Vec<f64>>,
    pub boundary: Option<BoundaryData>,
    /// Iteration cap per annealing stage for `minimize`.
    pub max_iters: Option<usize>,
    pub figure: Option<Figure>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        // Paths inside the config are relative to the config file.
        if let Some(dir) = path.parent() {
            if let Some(BoundaryData::Grid { path: p }) = &mut cfg.boundary {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(r) = self.resolution {
            if r < 8 {
                return Err(Error::Config(format!("resolution {r} must be at least 8")));
            }
        }
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::Config(format!("tolerance {t} must be positive")));
            }
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::Config(format!("delta {d} must be positive")));
            }
        }
        if let Some(s) = &self.scales {
            if s.is_empty() || s.iter().any(|&r| !(r > 0.0 && r <= 1.0)) {
                return Err(Error::Config("scales must be nonempty and lie in (0, 1]".into()));
            }
        }
        Ok(())
    }
}

/// The function under study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Subject {
    Exact(AnalyticSolution),
    OneSided(OneSidedPlane),
}

impl Subject {
    pub fn from_spec(spec: &SolutionSpec) -> Result<Subject> {
        if spec.family == "OneSidedPlane" {
            let slope = *spec
                .params
                .get("slope")
                .ok_or_else(|| Error::Config("OneSidedPlane: missing parameter slope".into()))?;
            if !(slope > 0.0 && slope.is_finite()) {
                return Err(Error::Config(format!("OneSidedPlane: slope {slope} must be positive")));
            }
            if !spec.motion.is_identity() {
                return Err(Error::Config("OneSidedPlane does not take a motion".into()));
            }
            return Ok(Subject::OneSided(OneSidedPlane { slope }));
        }
        let family = Family::from_parts(&spec.family, &spec.params).map_err(|e| Error::Config(e.to_string()))?;
        Ok(Subject::Exact(AnalyticSolution { family, motion: spec.motion }))
    }

    /// `|grad u|` expected on the free boundary.
    fn free_boundary_slope(&self) -> f64 {
        match self {
            Subject::Exact(u) => u.lipschitz_bound(),
            Subject::OneSided(_) => 1.0,
        }
    }

    fn lipschitz_bound(&self) -> f64 {
        match self {
            Subject::Exact(u) => u.lipschitz_bound(),
            Subject::OneSided(p) => p.slope,
        }
    }

    fn exact(&self) -> Option<&AnalyticSolution> {
        match self {
            Subject::Exact(u) => Some(u),
            Subject::OneSided(_) => None,
        }
    }

    fn name(&self) -> String {
        match self {
            Subject::Exact(u) => u.to_string(),
            Subject::OneSided(p) => format!("OneSidedPlane(slope = {})", p.slope),
        }
    }

    fn free_boundary(&self, window: &Rect, n: usize) -> Result<FreeBoundary> {
        match self {
            Subject::Exact(u) => u.free_boundary_curves(window, n),
            Subject::OneSided(_) => AnalyticSolution::half_plane().free_boundary_curves(window, n),
        }
    }
}

impl Evaluator for Subject {
    fn value(&self, p: Point2) -> Result<f64> {
        match self {
            Subject::Exact(u) => u.value(p),
            Subject::OneSided(u) => u.value(p),
        }
    }

    fn gradient(&self, p: Point2) -> Result<Point2> {
        match self {
            Subject::Exact(u) => u.gradient(p),
            Subject::OneSided(u) => u.gradient(p),
        }
    }

    fn phase(&self, p: Point2) -> Result<f64> {
        match self {
            Subject::Exact(u) => Evaluator::phase(u, p),
            Subject::OneSided(u) => u.phase(p),
        }
    }
}

/// Config with flag overrides applied and defaults filled in.
#[derive(Debug, Clone)]
struct Settings {
    cfg: ExperimentConfig,
    out: PathBuf,
}

impl Settings {
    fn subject(&self) -> Result<Subject> {
        let spec = self
            .cfg
            .solution
            .as_ref()
            .ok_or_else(|| Error::Config("no solution given (use --family or the config)".into()))?;
        Subject::from_spec(spec)
    }

    fn resolution(&self, default: usize) -> usize {
        self.cfg.resolution.unwrap_or(default)
    }

    fn tol(&self, default: f64) -> f64 {
        self.cfg.tol.unwrap_or(default)
    }

    fn window(&self, default: Rect) -> Rect {
        self.cfg.window.unwrap_or(default)
    }
}

fn settings(cli: &Cli) -> Result<Settings> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(c) = cfg.command {
        if c != cli.command {
            return Err(Error::Config(format!("config is for {c:?}, invoked as {:?}", cli.command)));
        }
    }
    if let Some(r) = cli.resolution {
        cfg.resolution = Some(r);
    }
    if let Some(t) = cli.tol {
        cfg.tol = Some(t);
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    if let Some(f) = &cli.family {
        let keep = cfg.solution.as_ref().filter(|s| &s.family == f).cloned();
        cfg.solution = Some(keep.unwrap_or(SolutionSpec {
            family: f.clone(),
            params: BTreeMap::new(),
            motion: RigidMotion::default(),
        }));
    }
    if !cli.params.is_empty() {
        let spec = cfg
            .solution
            .as_mut()
            .ok_or_else(|| Error::Config("--param given without a family".into()))?;
        for (k, v) in &cli.params {
            match k.as_str() {
                "angle" => spec.motion.angle = *v,
                "shift_x" => spec.motion.shift.x = *v,
                "shift_y" => spec.motion.shift.y = *v,
                _ => {
                    spec.params.insert(k.clone(), *v);
                }
            }
        }
    }
    cfg.validate()?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    std::fs::create_dir_all(&out)
        .map_err(|e| Error::Config(format!("output directory {} is not writable: {e}", out.display())))?;
    Ok(Settings { cfg, out })
}

/// Exit status of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Pass,
    Fail,
}

fn outcome(pass: bool) -> Outcome {
    if pass {
        Outcome::Pass
    } else {
        Outcome::Fail
    }
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Io(_) | Error::Json(_) => 2,
        _ => 1,
    }
}

/// Parse `args` (program name first), run the command and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = settings(&cli).and_then(|s| match cli.command {
        Command::Boundary => cmd_boundary(&s),
        Command::Verify => cmd_verify(&s),
        Command::Minimize => cmd_minimize(&s),
        Command::Traizet => cmd_traizet(&s),
        Command::Classify => cmd_classify(&s),
    });
    match result {
        Ok(Outcome::Pass) => 0,
        Ok(Outcome::Fail) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

// ---------------------------------------------------------------------------
// boundary
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct BoundaryDataset {
    file: String,
    solution: AnalyticSolution,
    components: usize,
    total_length: f64,
    /// Smallest distance between the two hairpin catenaries.
    #[serde(skip_serializing_if = "Option::is_none")]
    neck_separation: Option<f64>,
    /// Largest `|x1|` on the loop centred at the origin, in world units.
    #[serde(skip_serializing_if = "Option::is_none")]
    loop_half_width: Option<f64>,
}

fn neck_separation(fb: &FreeBoundary) -> Option<f64> {
    if fb.components.len() != 2 {
        return None;
    }
    let (a, b) = (&fb.components[0], &fb.components[1]);
    a.points.iter().map(|&p| b.distance_to(p)).min_by(f64::total_cmp)
}

fn loop_half_width(fb: &FreeBoundary) -> Option<f64> {
    let closed = fb.components.iter().filter(|c| c.closed);
    let nearest = closed.min_by(|a, b| {
        let d = |c: &&crate::geometry::PolyCurve| c.points.iter().map(|p| p.norm()).fold(f64::INFINITY, f64::min);
        d(a).total_cmp(&d(b))
    })?;
    nearest.points.iter().map(|p| p.x.abs()).max_by(f64::total_cmp)
}

fn boundary_dataset(dir: &Path, file: String, u: AnalyticSolution, window: &Rect, n: usize) -> Result<BoundaryDataset> {
    let fb = u.free_boundary_curves(window, n)?;
    let path = dir.join(&file);
    write_polylines(&path, &fb)?;
    announce(&path);
    let (neck, half) = match u.family {
        Family::Hairpin { .. } => (neck_separation(&fb), None),
        Family::Scherk { .. } => (None, loop_half_width(&fb)),
        _ => (None, None),
    };
    Ok(BoundaryDataset {
        file,
        solution: u,
        components: fb.components.len(),
        total_length: fb.total_length(),
        neck_separation: neck,
        loop_half_width: half,
    })
}

fn cmd_boundary(s: &Settings) -> Result<Outcome> {
    let n = 16 * s.resolution(64);
    let mut sets = Vec::new();
    match s.cfg.figure {
        Some(Figure::Hairpin) => {
            let window = s.window(Rect { x_min: -4.0, x_max: 4.0, y_min: -8.0, y_max: 8.0 });
            for (tag, a) in [("0.25", 0.25), ("1", 1.0), ("2", 2.0)] {
                let u = AnalyticSolution::hairpin(a)?;
                sets.push(boundary_dataset(&s.out, format!("hairpin_a{tag}.csv"), u, &window, n)?);
            }
        }
        Some(Figure::Scherk) => {
            let window = s.window(Rect { x_min: -3.0, x_max: 3.0, y_min: -8.0, y_max: 8.0 });
            for (tag, sl) in [("0.125", 0.125), ("0.5", 0.5), ("0.875", 0.875)] {
                let u = AnalyticSolution::scherk(sl, 1.0)?;
                sets.push(boundary_dataset(&s.out, format!("scherk_s{tag}.csv"), u, &window, n)?);
            }
        }
        None => {
            let u = *s
                .subject()?
                .exact()
                .ok_or_else(|| Error::Config("boundary needs an exact solution family".into()))?;
            let window = s.window(Rect::centered(Point2::ORIGIN, 4.0));
            sets.push(boundary_dataset(&s.out, "boundary.csv".into(), u, &window, n)?);
        }
    }
    let path = s.out.join("boundary.json");
    write_json(&path, &sets)?;
    announce(&path);
    Ok(Outcome::Pass)
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    pub tolerance: f64,
    relation: Relation,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Check {
    fn new(name: &str, relation: Relation, tolerance: f64, measured: Result<(f64, bool)>) -> Check {
        match measured {
            Ok((value, extra)) => {
                let within = match relation {
                    Relation::AtMost => value <= tolerance,
                    Relation::AtLeast => value >= tolerance,
                };
                Check {
                    name: name.into(),
                    value: Some(value),
                    tolerance,
                    relation,
                    pass: within && extra,
                    error: None,
                }
            }
            Err(e) => Check {
                name: name.into(),
                value: None,
                tolerance,
                relation,
                pass: false,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub solution: String,
    pub window: Rect,
    pub h: f64,
    pub checks: Vec<Check>,
    pub all_pass: bool,
}

/// Free boundary points with inward unit normals, spread over the components that meet
/// the middle of the window.
fn probes(u: &Subject, inner: &Rect, count: usize) -> Result<Vec<(Point2, Point2)>> {
    let fb = u.free_boundary(inner, 401)?;
    let mut all = Vec::new();
    for c in &fb.components {
        let pts = &c.points;
        for k in 1..pts.len().saturating_sub(1) {
            let t = pts[k + 1] - pts[k - 1];
            let len = t.norm();
            if len > 0.0 {
                all.push((pts[k], t.perp() * (1.0 / len)));
            }
        }
    }
    if all.is_empty() {
        return Err(Error::Precondition(format!("no free boundary inside {inner:?}")));
    }
    let stride = all.len() as f64 / count as f64;
    Ok((0..count.min(all.len()))
        .map(|k| all[((k as f64 + 0.5) * stride) as usize])
        .collect())
}

/// Gradient at a free boundary point from the positive side.
fn boundary_gradient(u: &Subject, p: Point2, n: Point2) -> Result<Point2> {
    match u.gradient(p) {
        Err(Error::ZeroPhase(..)) => u.gradient(p + n * 1e-9),
        other => other,
    }
}

pub fn verify_report(u: &Subject, window: &Rect, h: f64, tol: f64) -> Result<VerifyReport> {
    window
        .validate()
        .map_err(|_| Error::Precondition(format!("empty window {window:?}")))?;
    let side = window.width().min(window.height());
    let rho = 0.1 * side;
    let inner = Rect {
        x_min: window.x_min + 1.1 * rho,
        x_max: window.x_max - 1.1 * rho,
        y_min: window.y_min + 1.1 * rho,
        y_max: window.y_max - 1.1 * rho,
    };
    let pts = probes(u, &inner, 12)?;
    let bumps: Vec<(Point2, Point2)> = (0..3).map(|k| pts[(k * pts.len()) / 3]).collect();
    let slope = u.free_boundary_slope();
    let mut checks = Vec::new();

    checks.push(Check::new("lipschitz_excess", Relation::AtMost, tol, {
        let n = ((side / h).round() as usize).clamp(8, 200);
        let mut worst: f64 = 0.0;
        let mut res = Ok(());
        'grid: for j in 0..=n {
            for i in 0..=n {
                let p = Point2::new(
                    window.x_min + window.width() * i as f64 / n as f64,
                    window.y_min + window.height() * j as f64 / n as f64,
                );
                match u.phase(p) {
                    Ok(v) if v > 0.0 => match u.gradient(p) {
                        Ok(g) => worst = worst.max(g.norm()),
                        Err(e) => {
                            res = Err(e);
                            break 'grid;
                        }
                    },
                    Ok(_) => {}
                    Err(e) => {
                        res = Err(e);
                        break 'grid;
                    }
                }
            }
        }
        res.map(|_| (worst - u.lipschitz_bound(), true))
    }));

    checks.push(Check::new("free_boundary_slope_defect", Relation::AtMost, tol, {
        pts.iter().try_fold(0.0f64, |acc, &(p, n)| {
            Ok(acc.max((boundary_gradient(u, p, n)?.norm() - slope).abs()))
        })
        .map(|v| (v, true))
    }));

    checks.push(Check::new("viscosity_slope_defect", Relation::AtMost, tol, {
        let radii: Vec<f64> = (1..=4).map(|k| 1e-3 * side * k as f64).collect();
        pts.iter()
            .try_fold(0.0f64, |acc, &(p, n)| Ok(acc.max((viscosity_slope(u, p, n, &radii)? - slope).abs())))
            .map(|v| (v, true))
    }));

    // Exact solutions converge at first order in h; a wrong slope leaves O(rho).
    checks.push(Check::new("variational_residual", Relation::AtMost, h * rho, {
        let m = [[0.3, 0.1], [-0.2, 0.5]];
        bumps
            .iter()
            .try_fold(0.0f64, |acc, &(c, n)| {
                let psi = BumpField::new(c, rho, n + n.perp() * 0.5).with_matrix(m);
                Ok(acc.max(variational_residual(u, &psi, window, h)?.abs()))
            })
            .map(|v| (v, true))
    }));

    if let Some(exact) = u.exact() {
        checks.push(Check::new("flux_balance_net", Relation::AtMost, tol, {
            bumps
                .iter()
                .try_fold((0.0f64, true), |(acc, ok), &(c, _)| {
                    let q = 0.7 * rho;
                    let poly = [
                        c + Point2::new(-q, -0.9 * q),
                        c + Point2::new(q, -q),
                        c + Point2::new(1.1 * q, q),
                        c + Point2::new(-q, q),
                    ];
                    let r = flux_balance(exact, &poly, 1e-3 * side)?;
                    Ok((acc.max(r.net_flux.abs()), ok && r.inequality_holds))
                })
        }));
    }

    checks.push(Check::new("weiss_decrease", Relation::AtMost, tol, {
        bumps
            .iter()
            .try_fold(0.0f64, |acc, &(c, _)| {
                let w: Vec<f64> = [0.25, 0.5, 1.0]
                    .iter()
                    .map(|&f| weiss_energy(u, c, f * rho, 16))
                    .collect::<Result<_>>()?;
                let drop = w.windows(2).map(|p| p[0] - p[1]).fold(0.0, f64::max);
                Ok(acc.max(drop))
            })
            .map(|v| (v, true))
    }));

    checks.push(Check::new("nondegeneracy_ratio", Relation::AtLeast, 0.25 * slope, {
        bumps
            .iter()
            .try_fold(f64::INFINITY, |acc, &(c, _)| Ok(acc.min(circle_max(u, c, 0.5 * rho, 256)?.ratio)))
            .map(|v| (v, true))
    }));

    let all_pass = checks.iter().all(|c| c.pass);
    Ok(VerifyReport {
        solution: u.name(),
        window: *window,
        h,
        checks,
        all_pass,
    })
}

fn cmd_verify(s: &Settings) -> Result<Outcome> {
    let u = s.subject()?;
    let window = s.window(Rect::centered(Point2::ORIGIN, 4.0));
    let h = 1.0 / s.resolution(64) as f64;
    let report = verify_report(&u, &window, h, s.tol(1e-4))?;
    for c in &report.checks {
        let v = c.value.map(fmt17).unwrap_or_else(|| "error".into());
        println!("{:<28} {} {v}", c.name, if c.pass { "pass" } else { "FAIL" });
    }
    let path = s.out.join("verify.json");
    write_json(&path, &report)?;
    announce(&path);
    Ok(outcome(report.all_pass))
}

// ---------------------------------------------------------------------------
// minimize
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct MinimizeSummary {
    window: Rect,
    h: f64,
    converged: bool,
    iterations: usize,
    residual: f64,
    eps: f64,
    final_energy: Option<f64>,
    monotone: bool,
    /// Largest distance from the extracted free boundary to the exact one.
    #[serde(skip_serializing_if = "Option::is_none")]
    boundary_distance: Option<f64>,
}

fn energy_csv(history: &[IterationRecord]) -> String {
    let mut out = String::from("iteration,stage,eps,energy,residual\n");
    for (k, r) in history.iter().enumerate() {
        let _ = writeln!(out, "{k},{},{},{},{}", r.stage, fmt17(r.eps), fmt17(r.energy), fmt17(r.residual));
    }
    out
}

fn cmd_minimize(s: &Settings) -> Result<Outcome> {
    let window = s.window(Rect::centered(Point2::ORIGIN, 1.0));
    window.validate().map_err(|e| Error::Config(e.to_string()))?;
    let h = 1.0 / s.resolution(64) as f64;
    let params = MinimizeParams {
        tol: s.tol(MinimizeParams::default().tol),
        max_iters: s.cfg.max_iters.unwrap_or(MinimizeParams::default().max_iters),
        ..MinimizeParams::default()
    };
    let data = s.cfg.boundary.clone().unwrap_or_default();
    let mut exact = None;
    let run = match data {
        BoundaryData::Zero => minimize_ac(window, h, |_| 0.0, &params),
        BoundaryData::Solution => {
            let u = s.subject()?;
            exact = u.exact().copied();
            minimize_ac(window, h, |p| u.value(p).unwrap_or(0.0), &params)
        }
        BoundaryData::Grid { path } => {
            let g = read_grid(&path).map_err(|e| Error::Config(e.to_string()))?;
            let (gw, gh) = (g.window(), g.h());
            if gw != window || (gh - h).abs() > 1e-12 * h {
                return Err(Error::Config(format!(
                    "{}: header window {gw:?}, h = {gh} does not match window {window:?}, h = {h}",
                    path.display()
                )));
            }
            minimize_ac(window, h, |p| g.interpolate(p).unwrap_or(0.0), &params)
        }
    };
    let (m, converged): (Minimized, bool) = match run {
        Ok(m) => (m, true),
        Err(Error::NotConverged(m)) => (*m, false),
        Err(Error::InvalidInput(msg)) => return Err(Error::Config(msg)),
        Err(e) => return Err(e),
    };
    let fb = extract_boundary(&m.field, 0.0);
    let boundary_distance = match exact {
        Some(u) if !fb.is_empty() => {
            let reference = u.free_boundary_curves(&window, 4 * m.field.nx().max(m.field.ny()))?;
            (!reference.is_empty()).then(|| directed_hausdorff(&fb.components, &reference.components, 0.25 * h))
        }
        _ => None,
    };
    let field_path = s.out.join("field.csv");
    write_grid(&field_path, &m.field)?;
    announce(&field_path);
    let fb_path = s.out.join("boundary.csv");
    write_polylines(&fb_path, &fb)?;
    announce(&fb_path);
    let energy_path = s.out.join("energy.csv");
    crate::io::atomic_write(&energy_path, energy_csv(&m.history).as_bytes())?;
    announce(&energy_path);
    let summary = MinimizeSummary {
        window,
        h,
        converged,
        iterations: m.iterations,
        residual: m.residual,
        eps: m.eps,
        final_energy: m.history.last().map(|r| r.energy),
        monotone: m.monotone(),
        boundary_distance,
    };
    let path = s.out.join("minimize.json");
    write_json(&path, &summary)?;
    announce(&path);
    if !converged {
        eprintln!("minimization did not converge (residual {:e})", m.residual);
    }
    Ok(outcome(converged))
}

// ---------------------------------------------------------------------------
// traizet
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
struct TraizetSummary {
    solution: AnalyticSolution,
    region: String,
    resolution: usize,
    vertices: usize,
    triangles: usize,
    max_interior_mean_curvature: f64,
    max_orthogonality_defect: f64,
    tolerance: f64,
    pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    catenoid: Option<CatenoidFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scherk_periods: Option<ScherkPeriods>,
}

fn cmd_traizet(s: &Settings) -> Result<Outcome> {
    let u = *s
        .subject()?
        .exact()
        .ok_or_else(|| Error::Config("traizet needs an exact solution family".into()))?;
    let resolution = s.resolution(128);
    let tol = s.tol(1e-3);
    let region = MeshRegion::canonical(&u);
    let mesh = build_mesh(&u, &region, resolution)?;
    let h = mean_curvature(&mesh);
    let max_h = h.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs()));
    let max_o = orthogonality_check(&mesh).iter().fold(0.0f64, |a, &(_, d)| a.max(d));
    let catenoid = match u.family {
        Family::DiskComplement { r } => Some(catenoid_fit(&mesh, r)?),
        _ => None,
    };
    let periods = match u.family {
        Family::Scherk { .. } => Some(scherk_periods(&u, 64)?),
        _ => None,
    };
    let obj = s.out.join("mesh.obj");
    write_obj(&obj, &mesh)?;
    announce(&obj);
    let curv = s.out.join("curvature.csv");
    write_curvature(&curv, &h)?;
    announce(&curv);
    let pass = max_h <= tol && max_o <= tol;
    let summary = TraizetSummary {
        solution: u,
        region: format!("{region:?}"),
        resolution,
        vertices: mesh.vertices.len(),
        triangles: mesh.triangles.len(),
        max_interior_mean_curvature: max_h,
        max_orthogonality_defect: max_o,
        tolerance: tol,
        pass,
        catenoid,
        scherk_periods: periods,
    };
    let path = s.out.join("traizet.json");
    write_json(&path, &summary)?;
    announce(&path);
    println!("max |H| {} orthogonality {}", fmt17(max_h), fmt17(max_o));
    Ok(outcome(pass))
}

// ---------------------------------------------------------------------------
// classify
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
enum ClassifyOutput {
    Flat { solution: String, h: f64, report: FlatReport },
    Annulus { solution: String, h: f64, tolerance: f64, pass: bool, report: AnnulusReport },
}

fn cmd_classify(s: &Settings) -> Result<Outcome> {
    let u = s.subject()?;
    let h = 1.0 / s.resolution(64) as f64;
    let (out, pass) = match s.cfg.mode.unwrap_or_default() {
        ClassifyMode::Flat => {
            let report = classify_flat(&u, s.cfg.delta.unwrap_or(0.1), h)?;
            println!("case {}", report.case);
            (ClassifyOutput::Flat { solution: u.name(), h, report }, true)
        }
        ClassifyMode::Annulus => {
            let scales = s.cfg.scales.clone().unwrap_or_else(|| vec![0.05, 0.1, 0.2, 0.4]);
            let tol = s.tol(1e-6);
            let report = annulus_flat_check(&u, s.cfg.delta.unwrap_or(0.01), &scales, h)?;
            let pass = report.scales.iter().all(|r| r.max_slope <= tol);
            for r in &report.scales {
                println!("r {} slope {}", fmt17(r.r), fmt17(r.max_slope));
            }
            (ClassifyOutput::Annulus { solution: u.name(), h, tolerance: tol, pass, report }, pass)
        }
    };
    let path = s.out.join("classify.json");
    write_json(&path, &out)?;
    announce(&path);
    Ok(outcome(pass))
}
