//! Plain-text artifacts: CSV polylines and grids, JSON reports, OBJ meshes.
//!
//! Numbers are written with 17 significant digits so files round-trip exactly and
//! reruns are byte-identical. Every file is written to a temporary sibling and renamed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{FreeBoundary, PolyCurve};
use crate::point::{Point2, Rect};
use crate::traizet::SurfaceMesh;
use crate::variational::ScalarField2D;

/// `x` with 17 significant digits in scientific notation.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write `bytes` to `path` through a temporary file in the same directory.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("{} has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::Io(e)
    })
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

/// Free boundary components as rows `component,vertex,x,y`.
pub fn polylines_csv(fb: &FreeBoundary) -> String {
    let mut out = String::from("component,vertex,x,y\n");
    for (c, comp) in fb.components.iter().enumerate() {
        for (v, p) in comp.points.iter().enumerate() {
            let _ = writeln!(out, "{c},{v},{},{}", fmt17(p.x), fmt17(p.y));
        }
    }
    out
}

pub fn write_polylines(path: &Path, fb: &FreeBoundary) -> Result<()> {
    atomic_write(path, polylines_csv(fb).as_bytes())
}

/// Parses `component,vertex,x,y` rows; components come back open.
pub fn read_polylines(path: &Path) -> Result<FreeBoundary> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("component,vertex,x,y") {
        return Err(Error::Config(format!("{}: missing polyline header", path.display())));
    }
    let mut comps: Vec<Vec<Point2>> = Vec::new();
    for (k, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Config(format!("{}: bad row {}", path.display(), k + 2));
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(bad());
        }
        let c: usize = f[0].trim().parse().map_err(|_| bad())?;
        let x: f64 = f[2].trim().parse().map_err(|_| bad())?;
        let y: f64 = f[3].trim().parse().map_err(|_| bad())?;
        if c == comps.len() {
            comps.push(Vec::new());
        } else if c + 1 != comps.len() {
            return Err(bad());
        }
        comps[c].push(Point2::new(x, y));
    }
    Ok(FreeBoundary { components: comps.into_iter().map(PolyCurve::open).collect() })
}

/// JSON sidecar describing a grid CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridHeader {
    pub window: Rect,
    pub h: f64,
}

/// Sidecar path `name.json` next to `name.csv`.
pub fn grid_header_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Grid values as a CSV matrix, one row per `x2` level from the bottom, plus the header.
pub fn write_grid(path: &Path, f: &ScalarField2D) -> Result<()> {
    let mut out = String::new();
    for j in 0..f.ny() {
        let row: Vec<String> = (0..f.nx()).map(|i| fmt17(f.get(i, j))).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    atomic_write(path, out.as_bytes())?;
    write_json(&grid_header_path(path), &GridHeader { window: f.window(), h: f.h() })
}

pub fn read_grid(path: &Path) -> Result<ScalarField2D> {
    let header: GridHeader = read_json(&grid_header_path(path))?;
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    let mut rows = 0;
    let mut width = None;
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| Error::Config(format!("{}: bad number on row {}", path.display(), k + 1)))?;
        if *width.get_or_insert(row.len()) != row.len() {
            return Err(Error::Config(format!("{}: ragged row {}", path.display(), k + 1)));
        }
        values.extend(row);
        rows += 1;
    }
    let expect = ScalarField2D::zeros(header.window, header.h)?;
    if width != Some(expect.nx()) || rows != expect.ny() {
        return Err(Error::Config(format!(
            "{}: header implies {} x {} nodes, file has {} x {}",
            path.display(),
            expect.nx(),
            expect.ny(),
            width.unwrap_or(0),
            rows
        )));
    }
    ScalarField2D::from_values(header.window, header.h, values)
}

/// Wavefront OBJ with `v` and `f` records only (1-based indices).
pub fn obj_text(m: &SurfaceMesh) -> String {
    let mut out = String::new();
    for v in &m.vertices {
        let _ = writeln!(out, "v {} {} {}", fmt17(v.x), fmt17(v.y), fmt17(v.z));
    }
    for t in &m.triangles {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out
}

pub fn write_obj(path: &Path, m: &SurfaceMesh) -> Result<()> {
    atomic_write(path, obj_text(m).as_bytes())
}

/// Rows `vertex,H,is_boundary`; boundary vertices have an empty `H`.
pub fn curvature_csv(h: &[Option<f64>]) -> String {
    let mut out = String::from("vertex,H,is_boundary\n");
    for (k, v) in h.iter().enumerate() {
        match v {
            Some(x) => {
                let _ = writeln!(out, "{k},{},false", fmt17(*x));
            }
            None => {
                let _ = writeln!(out, "{k},,true");
            }
        }
    }
    out
}

pub fn write_curvature(path: &Path, h: &[Option<f64>]) -> Result<()> {
    atomic_write(path, curvature_csv(h).as_bytes())
}
