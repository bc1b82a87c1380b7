//! File formats: ASCII PCD clouds, CSV tables and versioned JSON documents.
//!
//! Readers report errors with the file and line (PCD) or data row (CSV).
//! Writers produce one canonical byte layout, so reading and re-writing a
//! canonical file reproduces it exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::board::{BoardModel, Cutout, EdgeLabel};
use crate::camera::{Correspondence2D3D, Point2, TagPose};
use crate::error::{Error, Result};
use crate::geometry::{
    EulerAnglesXYZ, FrameId, Point3, PointCloud, RigidTransform, RotationMatrix, UnitQuaternion,
};
use crate::registration::{CalibrationResult, CorrespondenceSet, Diagnostics, Method};

/// Version written into, and required from, every JSON document.
pub const SCHEMA_VERSION: u32 = 1;

/// Frame assumed for PCD files without a `# frame:` comment.
pub const DEFAULT_PCD_FRAME: &str = "unknown";

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    fs::write(path, contents).map_err(io)
}

// ---------------------------------------------------------------- PCD

pub fn read_pcd(path: &Path) -> Result<PointCloud> {
    parse_pcd(&read_text(path)?, &path.display().to_string())
}

pub fn write_pcd_file(path: &Path, cloud: &PointCloud) -> Result<()> {
    write_text(path, &write_pcd(cloud))
}

struct PcdField {
    name: String,
    count: usize,
}

/// Parses ASCII PCD v0.7. `FIELDS` must include `x y z`; an optional
/// `ring` field becomes the ring index. Other fields are skipped.
pub fn parse_pcd(text: &str, location: &str) -> Result<PointCloud> {
    let at = |line: usize| format!("{location}:{line}");
    let malformed = |line: usize, message: String| Error::Malformed {
        location: at(line),
        message,
    };

    let mut frame: Option<String> = None;
    let mut declared_rings: Option<u16> = None;
    let mut fields: Option<Vec<PcdField>> = None;
    let mut counts: Option<Vec<usize>> = None;
    let mut width: Option<usize> = None;
    let mut height: Option<usize> = None;
    let mut points: Option<usize> = None;
    let mut data_line: Option<usize> = None;

    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    for (no, raw) in lines.by_ref() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(name) = comment.strip_prefix("frame:") {
                frame = Some(name.trim().to_string());
            } else if let Some(n) = comment.strip_prefix("rings:") {
                let n = n
                    .trim()
                    .parse::<u16>()
                    .map_err(|_| malformed(no, format!("bad ring count `{}`", n.trim())))?;
                declared_rings = Some(n);
            }
            continue;
        }
        let mut parts = line.split_whitespace();
        let key = parts.next().unwrap_or_default();
        let values: Vec<&str> = parts.collect();
        let one_usize = |what: &str| -> Result<usize> {
            match values.as_slice() {
                [v] => v.parse::<usize>().map_err(|_| {
                    malformed(
                        no,
                        format!("{what} must be a non-negative integer, got `{v}`"),
                    )
                }),
                _ => Err(malformed(no, format!("{what} takes one value"))),
            }
        };
        match key {
            "VERSION" | "SIZE" | "TYPE" | "VIEWPOINT" => {}
            "FIELDS" => {
                fields = Some(
                    values
                        .iter()
                        .map(|v| PcdField {
                            name: v.to_string(),
                            count: 1,
                        })
                        .collect(),
                )
            }
            "COUNT" => {
                counts = Some(
                    values
                        .iter()
                        .map(|v| {
                            v.parse::<usize>()
                                .map_err(|_| malformed(no, format!("bad COUNT value `{v}`")))
                        })
                        .collect::<Result<_>>()?,
                )
            }
            "WIDTH" => width = Some(one_usize("WIDTH")?),
            "HEIGHT" => height = Some(one_usize("HEIGHT")?),
            "POINTS" => points = Some(one_usize("POINTS")?),
            "DATA" => {
                match values.as_slice() {
                    ["ascii"] => {}
                    [enc] => {
                        return Err(Error::UnsupportedEncoding {
                            location: at(no),
                            encoding: enc.to_string(),
                        })
                    }
                    _ => return Err(malformed(no, "DATA takes one value".into())),
                }
                data_line = Some(no);
                break;
            }
            other => return Err(malformed(no, format!("unknown header key `{other}`"))),
        }
    }

    let header_end = data_line.ok_or_else(|| Error::MissingField {
        location: location.to_string(),
        field: "DATA".into(),
    })?;
    let missing = |field: &str| Error::MissingField {
        location: location.to_string(),
        field: field.into(),
    };
    let mut fields = fields.ok_or_else(|| missing("FIELDS"))?;
    let width = width.ok_or_else(|| missing("WIDTH"))?;
    let height = height.ok_or_else(|| missing("HEIGHT"))?;
    let points = points.ok_or_else(|| missing("POINTS"))?;
    if width.checked_mul(height) != Some(points) {
        return Err(malformed(
            header_end,
            format!("WIDTH*HEIGHT = {width}*{height} does not match POINTS = {points}"),
        ));
    }
    if let Some(counts) = counts {
        if counts.len() != fields.len() {
            return Err(malformed(
                header_end,
                format!(
                    "COUNT has {} entries for {} fields",
                    counts.len(),
                    fields.len()
                ),
            ));
        }
        for (f, c) in fields.iter_mut().zip(counts) {
            f.count = c;
        }
    }
    let column_of = |name: &str| -> Result<usize> {
        let mut col = 0;
        for f in &fields {
            if f.name == name {
                if f.count != 1 {
                    return Err(malformed(
                        header_end,
                        format!("field `{name}` must have COUNT 1"),
                    ));
                }
                return Ok(col);
            }
            col += f.count;
        }
        Err(missing(name))
    };
    let (cx, cy, cz) = (column_of("x")?, column_of("y")?, column_of("z")?);
    let cring = column_of("ring").ok();
    let columns: usize = fields.iter().map(|f| f.count).sum();

    let mut pts = Vec::with_capacity(points);
    let mut rings = Vec::new();
    for (no, raw) in lines {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let values: Vec<&str> = line.split_whitespace().collect();
        if values.len() != columns {
            return Err(malformed(
                no,
                format!("expected {columns} values, found {}", values.len()),
            ));
        }
        if pts.len() == points {
            return Err(malformed(
                no,
                format!("more than POINTS = {points} data rows"),
            ));
        }
        let num = |col: usize| -> Result<f64> {
            let v: f64 = values[col].parse().map_err(|_| Error::Malformed {
                location: format!("{}:{}", at(no), col + 1),
                message: format!("`{}` is not a number", values[col]),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    location: at(no),
                    row: pts.len() + 1,
                    column: fields_name(&fields, col),
                });
            }
            Ok(v)
        };
        pts.push(Point3::new(num(cx)?, num(cy)?, num(cz)?));
        if let Some(cr) = cring {
            let r: u16 = values[cr].parse().map_err(|_| Error::Malformed {
                location: format!("{}:{}", at(no), cr + 1),
                message: format!("ring `{}` is not an unsigned 16-bit integer", values[cr]),
            })?;
            rings.push(r);
        }
    }
    if pts.len() != points {
        return Err(Error::Malformed {
            location: location.to_string(),
            message: format!("POINTS = {points} but {} data rows", pts.len()),
        });
    }
    let frame = FrameId::new(frame.unwrap_or_else(|| DEFAULT_PCD_FRAME.to_string()))?;
    match cring {
        Some(_) => {
            let max = rings.iter().copied().max().map_or(0, |m| m + 1);
            let num_rings = declared_rings.unwrap_or(max).max(max);
            PointCloud::with_rings(frame, pts, rings, num_rings)
        }
        None => PointCloud::new(frame, pts),
    }
}

fn fields_name(fields: &[PcdField], col: usize) -> String {
    let mut start = 0;
    for f in fields {
        if col < start + f.count {
            return f.name.clone();
        }
        start += f.count;
    }
    format!("column {}", col + 1)
}

/// Canonical ASCII PCD text for `cloud`.
pub fn write_pcd(cloud: &PointCloud) -> String {
    let n = cloud.len();
    let mut s = String::new();
    s.push_str("# .PCD v0.7 - Point Cloud Data file format\n");
    let _ = writeln!(s, "# frame: {}", cloud.frame());
    let rings = cloud.rings();
    if rings.is_some() {
        let _ = writeln!(s, "# rings: {}", cloud.num_rings());
    }
    s.push_str("VERSION 0.7\n");
    if rings.is_some() {
        s.push_str("FIELDS x y z ring\nSIZE 8 8 8 2\nTYPE F F F U\nCOUNT 1 1 1 1\n");
    } else {
        s.push_str("FIELDS x y z\nSIZE 8 8 8\nTYPE F F F\nCOUNT 1 1 1\n");
    }
    let _ = writeln!(
        s,
        "WIDTH {n}\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS {n}\nDATA ascii"
    );
    for (i, p) in cloud.points().iter().enumerate() {
        let _ = write!(s, "{} {} {}", p.x, p.y, p.z);
        if let Some(r) = rings {
            let _ = write!(s, " {}", r[i]);
        }
        s.push('\n');
    }
    s
}

// ---------------------------------------------------------------- CSV

pub const HEADER_3D3D: [&str; 6] = ["px", "py", "pz", "qx", "qy", "qz"];
pub const HEADER_2D3D: [&str; 5] = ["X", "Y", "Z", "u", "v"];
pub const HEADER_LABELS: [&str; 2] = ["point_index", "edge_id"];

/// Data rows of a CSV table with the exact `header`, 1-based row numbers.
fn read_table(text: &str, location: &str, header: &[&str]) -> Result<Vec<(usize, Vec<String>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records();
    let csv_error = |e: csv::Error| Error::Malformed {
        location: location.to_string(),
        message: e.to_string(),
    };
    let first = records
        .next()
        .ok_or_else(|| Error::MissingField {
            location: location.to_string(),
            field: "header".into(),
        })?
        .map_err(csv_error)?;
    let got: Vec<&str> = first.iter().collect();
    if got != header {
        return Err(Error::Malformed {
            location: format!("{location}: header"),
            message: format!("expected `{}`, found `{}`", header.join(","), got.join(",")),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in records.enumerate() {
        let row = i + 1;
        let rec = rec.map_err(csv_error)?;
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != header.len() {
            return Err(Error::WrongArity {
                location: location.to_string(),
                row,
                expected: header.len(),
                found: rec.len(),
            });
        }
        rows.push((row, rec.iter().map(str::to_string).collect()));
    }
    Ok(rows)
}

fn parse_float(location: &str, row: usize, column: &str, value: &str) -> Result<f64> {
    let v: f64 = value.parse().map_err(|_| Error::Malformed {
        location: format!("{location}: row {row}, column `{column}`"),
        message: format!("`{value}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::NonFiniteValue {
            location: location.to_string(),
            row,
            column: column.to_string(),
        });
    }
    Ok(v)
}

fn float_row(location: &str, header: &[&str], row: usize, values: &[String]) -> Result<Vec<f64>> {
    header
        .iter()
        .zip(values)
        .map(|(h, v)| parse_float(location, row, h, v))
        .collect()
}

pub fn read_correspondences_3d3d(
    path: &Path,
    source_frame: FrameId,
    target_frame: FrameId,
) -> Result<CorrespondenceSet> {
    parse_correspondences_3d3d(
        &read_text(path)?,
        &path.display().to_string(),
        source_frame,
        target_frame,
    )
}

/// `px,py,pz,qx,qy,qz` rows: source point then target point.
pub fn parse_correspondences_3d3d(
    text: &str,
    location: &str,
    source_frame: FrameId,
    target_frame: FrameId,
) -> Result<CorrespondenceSet> {
    let mut pairs = Vec::new();
    for (row, values) in read_table(text, location, &HEADER_3D3D)? {
        let v = float_row(location, &HEADER_3D3D, row, &values)?;
        pairs.push((Point3::new(v[0], v[1], v[2]), Point3::new(v[3], v[4], v[5])));
    }
    CorrespondenceSet::from_pairs(source_frame, target_frame, pairs)
}

pub fn write_correspondences_3d3d(set: &CorrespondenceSet) -> String {
    let mut s = HEADER_3D3D.join(",");
    s.push('\n');
    for (p, q) in set.pairs() {
        let _ = writeln!(s, "{},{},{},{},{},{}", p.x, p.y, p.z, q.x, q.y, q.z);
    }
    s
}

pub fn read_correspondences_2d3d(path: &Path) -> Result<Vec<Correspondence2D3D>> {
    parse_correspondences_2d3d(&read_text(path)?, &path.display().to_string())
}

/// `X,Y,Z,u,v` rows: 3D point then its pixel.
pub fn parse_correspondences_2d3d(text: &str, location: &str) -> Result<Vec<Correspondence2D3D>> {
    read_table(text, location, &HEADER_2D3D)?
        .into_iter()
        .map(|(row, values)| {
            let v = float_row(location, &HEADER_2D3D, row, &values)?;
            Ok(Correspondence2D3D {
                point: Point3::new(v[0], v[1], v[2]),
                pixel: Point2::new(v[3], v[4]),
            })
        })
        .collect()
}

pub fn write_correspondences_2d3d(corr: &[Correspondence2D3D]) -> String {
    let mut s = HEADER_2D3D.join(",");
    s.push('\n');
    for c in corr {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            c.point.x, c.point.y, c.point.z, c.pixel.u, c.pixel.v
        );
    }
    s
}

/// One row of an edge-label table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelRow {
    pub point_index: usize,
    pub board: usize,
    /// `None` for interior points.
    pub edge: Option<EdgeLabel>,
}

pub fn read_edge_labels(path: &Path) -> Result<Vec<LabelRow>> {
    parse_edge_labels(&read_text(path)?, &path.display().to_string())
}

/// `point_index,edge_id` rows. `edge_id` is an edge name such as
/// `top-left` or `inner-bottom-right`, or `interior`, optionally prefixed by
/// a board index as in `2:top-left` (board 0 otherwise).
pub fn parse_edge_labels(text: &str, location: &str) -> Result<Vec<LabelRow>> {
    read_table(text, location, &HEADER_LABELS)?
        .into_iter()
        .map(|(row, values)| {
            let bad = |column: &str, message: String| Error::Malformed {
                location: format!("{location}: row {row}, column `{column}`"),
                message,
            };
            let point_index = values[0]
                .parse::<usize>()
                .map_err(|_| bad("point_index", format!("`{}` is not an index", values[0])))?;
            let (board, name) = match values[1].split_once(':') {
                Some((b, name)) => (
                    b.parse::<usize>()
                        .map_err(|_| bad("edge_id", format!("`{b}` is not a board index")))?,
                    name,
                ),
                None => (0, values[1].as_str()),
            };
            let edge = match name {
                "interior" => None,
                _ => Some(
                    EdgeLabel::parse(name)
                        .ok_or_else(|| bad("edge_id", format!("unknown edge `{name}`")))?,
                ),
            };
            Ok(LabelRow {
                point_index,
                board,
                edge,
            })
        })
        .collect()
}

pub fn write_edge_labels(rows: &[LabelRow]) -> String {
    let mut s = HEADER_LABELS.join(",");
    s.push('\n');
    for r in rows {
        let name = r
            .edge
            .map_or_else(|| "interior".to_string(), |e| e.to_string());
        let _ = writeln!(s, "{},{}:{}", r.point_index, r.board, name);
    }
    s
}

pub const HEADER_RUNNING_AVERAGE: [&str; 11] = [
    "iteration",
    "tx",
    "ty",
    "tz",
    "qw",
    "qx",
    "qy",
    "qz",
    "roll_deg",
    "pitch_deg",
    "yaw_deg",
];

/// Running-average table: the averaged extrinsics after each run.
pub fn write_running_average(trace: &[RigidTransform]) -> String {
    let mut s = HEADER_RUNNING_AVERAGE.join(",");
    s.push('\n');
    for (i, t) in trace.iter().enumerate() {
        let p = t.translation();
        let q = t.rotation().to_quaternion();
        let e = t.rotation().to_euler_xyz();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            i + 1,
            p.x,
            p.y,
            p.z,
            q.w(),
            q.x(),
            q.y(),
            q.z(),
            e.roll,
            e.pitch,
            e.yaw
        );
    }
    s
}

// ---------------------------------------------------------------- JSON

/// Parses a JSON document of type `T`, checking `schema_version` first.
pub fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, location: &str) -> Result<T> {
    #[derive(Deserialize)]
    struct Version {
        schema_version: Option<u32>,
    }
    let json_error = |source| Error::Json {
        location: location.to_string(),
        source,
    };
    let version: Version = serde_json::from_str(text).map_err(json_error)?;
    match version.schema_version {
        Some(SCHEMA_VERSION) => {}
        Some(v) => {
            return Err(Error::Malformed {
                location: location.to_string(),
                message: format!("unsupported schema_version {v}, expected {SCHEMA_VERSION}"),
            })
        }
        None => {
            return Err(Error::MissingField {
                location: location.to_string(),
                field: "schema_version".into(),
            })
        }
    }
    serde_json::from_str(text).map_err(json_error)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    parse_json(&read_text(path)?, &path.display().to_string())
}

/// Pretty-printed JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EulerDoc {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

/// A rigid transform with its rotation in three redundant forms. The matrix
/// is authoritative; the quaternion (w, x, y, z) and Euler angles (degrees,
/// fixed-axis XYZ) must agree with it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformDoc {
    pub from_frame: String,
    pub to_frame: String,
    pub rotation_matrix: [[f64; 3]; 3],
    pub quaternion_wxyz: [f64; 4],
    pub euler_xyz_deg: EulerDoc,
    pub translation: [f64; 3],
}

/// Allowed disagreement between the redundant rotation forms.
const REDUNDANCY_TOL: f64 = 1e-9;

impl TransformDoc {
    pub fn from_transform(t: &RigidTransform) -> Self {
        let q = t.rotation().to_quaternion();
        let e = t.rotation().to_euler_xyz();
        Self {
            from_frame: t.from_frame().to_string(),
            to_frame: t.to_frame().to_string(),
            rotation_matrix: t.rotation().to_rows(),
            quaternion_wxyz: q.to_array(),
            euler_xyz_deg: EulerDoc {
                roll: e.roll,
                pitch: e.pitch,
                yaw: e.yaw,
            },
            translation: t.translation().to_array(),
        }
    }

    pub fn to_transform(&self, location: &str) -> Result<RigidTransform> {
        let rotation = RotationMatrix::from_rows(self.rotation_matrix)?;
        let mismatch = |what: &str| Error::Malformed {
            location: location.to_string(),
            message: format!("{what} disagrees with rotation_matrix"),
        };
        let [w, x, y, z] = self.quaternion_wxyz;
        let q = UnitQuaternion::new(w, x, y, z)?;
        if q.angle_to(&rotation.to_quaternion()) > REDUNDANCY_TOL {
            return Err(mismatch("quaternion_wxyz"));
        }
        let e = EulerAnglesXYZ::new(
            self.euler_xyz_deg.roll,
            self.euler_xyz_deg.pitch,
            self.euler_xyz_deg.yaw,
        );
        if e.to_rotation().angle_to(&rotation) > REDUNDANCY_TOL {
            return Err(mismatch("euler_xyz_deg"));
        }
        RigidTransform::new(
            rotation,
            self.translation.into(),
            FrameId::new(self.from_frame.clone())?,
            FrameId::new(self.to_frame.clone())?,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsDoc {
    pub reflection_corrected: bool,
    pub near_degenerate: bool,
    pub iterations: Option<usize>,
    pub converged: bool,
    pub inliers: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunDoc {
    pub transform: TransformDoc,
    pub rmse: f64,
}

/// Calibration output. With several runs, `transform` is their average and
/// `runs` holds each run in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultDoc {
    pub schema_version: u32,
    pub method: String,
    pub transform: TransformDoc,
    pub rmse: f64,
    pub residuals: Vec<f64>,
    pub diagnostics: DiagnosticsDoc,
    #[serde(default)]
    pub runs: Vec<RunDoc>,
}

impl ResultDoc {
    pub fn from_result(result: &CalibrationResult, runs: &[CalibrationResult]) -> Self {
        let d = &result.diagnostics;
        Self {
            schema_version: SCHEMA_VERSION,
            method: result.method.as_str().to_string(),
            transform: TransformDoc::from_transform(&result.transform),
            rmse: result.rmse,
            residuals: result.residuals.clone(),
            diagnostics: DiagnosticsDoc {
                reflection_corrected: d.reflection_corrected,
                near_degenerate: d.near_degenerate,
                iterations: d.iterations,
                converged: d.converged,
                inliers: d.inliers.clone(),
            },
            runs: runs
                .iter()
                .map(|r| RunDoc {
                    transform: TransformDoc::from_transform(&r.transform),
                    rmse: r.rmse,
                })
                .collect(),
        }
    }

    pub fn to_result(&self, location: &str) -> Result<CalibrationResult> {
        let method = Method::parse(&self.method).ok_or_else(|| Error::Malformed {
            location: location.to_string(),
            message: format!("unknown method `{}`", self.method),
        })?;
        let d = &self.diagnostics;
        Ok(CalibrationResult {
            transform: self.transform.to_transform(location)?,
            rmse: self.rmse,
            residuals: self.residuals.clone(),
            method,
            diagnostics: Diagnostics {
                reflection_corrected: d.reflection_corrected,
                near_degenerate: d.near_degenerate,
                iterations: d.iterations,
                converged: d.converged,
                inliers: d.inliers.clone(),
            },
        })
    }
}

pub fn write_result(result: &CalibrationResult, runs: &[CalibrationResult]) -> String {
    to_json(&ResultDoc::from_result(result, runs))
}

pub fn parse_result(text: &str, location: &str) -> Result<CalibrationResult> {
    parse_json::<ResultDoc>(text, location)?.to_result(location)
}

pub fn read_result(path: &Path) -> Result<CalibrationResult> {
    parse_result(&read_text(path)?, &path.display().to_string())
}

/// A bare transform, for outputs that are not calibrations (chaining).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformFileDoc {
    pub schema_version: u32,
    pub transform: TransformDoc,
}

pub fn write_transform(t: &RigidTransform) -> String {
    to_json(&TransformFileDoc {
        schema_version: SCHEMA_VERSION,
        transform: TransformDoc::from_transform(t),
    })
}

/// The transform of either a result document or a transform document.
pub fn parse_any_transform(text: &str, location: &str) -> Result<RigidTransform> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|source| Error::Json {
        location: location.to_string(),
        source,
    })?;
    if value.get("method").is_some() {
        Ok(parse_result(text, location)?.transform)
    } else {
        parse_json::<TransformFileDoc>(text, location)?
            .transform
            .to_transform(location)
    }
}

pub fn read_any_transform(path: &Path) -> Result<RigidTransform> {
    parse_any_transform(&read_text(path)?, &path.display().to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagDoc {
    pub tag_id: u32,
    /// Board-to-camera rotation. Detectors that report only a quaternion may
    /// omit it; when both are given the matrix is authoritative and the
    /// quaternion must agree with it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotation_matrix: Option<[[f64; 3]; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quaternion_wxyz: Option<[f64; 4]>,
    pub translation: [f64; 3],
}

impl TagDoc {
    fn rotation(&self, location: &str) -> Result<RotationMatrix> {
        let q = match self.quaternion_wxyz {
            Some([w, x, y, z]) => Some(UnitQuaternion::new(w, x, y, z)?),
            None => None,
        };
        match (self.rotation_matrix, q) {
            (Some(rows), q) => {
                let r = RotationMatrix::from_rows(rows)?;
                if q.is_some_and(|q| q.angle_to(&r.to_quaternion()) > REDUNDANCY_TOL) {
                    return Err(Error::Malformed {
                        location: location.to_string(),
                        message: format!(
                            "tag {}: quaternion_wxyz disagrees with rotation_matrix",
                            self.tag_id
                        ),
                    });
                }
                Ok(r)
            }
            (None, Some(q)) => Ok(q.to_rotation()),
            (None, None) => Err(Error::Malformed {
                location: location.to_string(),
                message: format!(
                    "tag {}: needs rotation_matrix or quaternion_wxyz",
                    self.tag_id
                ),
            }),
        }
    }
}

/// Tag poses of one camera frame. Each tag's board frame is `tag<id>`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagPosesDoc {
    pub schema_version: u32,
    pub camera_frame: String,
    pub tags: Vec<TagDoc>,
}

pub fn tag_frame(tag_id: u32) -> FrameId {
    FrameId::new(format!("tag{tag_id}")).expect("nonempty")
}

impl TagPosesDoc {
    pub fn from_tags(camera_frame: &FrameId, tags: &[TagPose]) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            camera_frame: camera_frame.to_string(),
            tags: tags
                .iter()
                .map(|t| TagDoc {
                    tag_id: t.tag_id,
                    rotation_matrix: Some(t.pose.rotation().to_rows()),
                    quaternion_wxyz: Some(t.pose.rotation().to_quaternion().to_array()),
                    translation: t.pose.translation().to_array(),
                })
                .collect(),
        }
    }

    pub fn to_tags(&self) -> Result<Vec<TagPose>> {
        let camera = FrameId::new(self.camera_frame.clone())?;
        self.tags
            .iter()
            .map(|t| {
                Ok(TagPose {
                    tag_id: t.tag_id,
                    pose: RigidTransform::new(
                        t.rotation(&self.camera_frame)?,
                        t.translation.into(),
                        tag_frame(t.tag_id),
                        camera.clone(),
                    )?,
                })
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoutDoc {
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub offset: [f64; 2],
}

/// Board dimensions, metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoardDoc {
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub cutout: Option<CutoutDoc>,
    #[serde(default)]
    pub tag_center_offset: [f64; 2],
}

impl BoardDoc {
    pub fn from_model(m: &BoardModel) -> Self {
        Self {
            width: m.outer_width,
            height: m.outer_height,
            cutout: m.cutout.map(|c| CutoutDoc {
                width: c.width,
                height: c.height,
                offset: c.offset,
            }),
            tag_center_offset: m.tag_center_offset,
        }
    }

    pub fn to_model(&self) -> Result<BoardModel> {
        BoardModel::new(
            self.width,
            self.height,
            self.cutout.map(|c| Cutout {
                width: c.width,
                height: c.height,
                offset: c.offset,
            }),
            self.tag_center_offset,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacedBoardDoc {
    pub tag_id: u32,
    pub board: BoardDoc,
    /// World to board.
    pub pose: TransformDoc,
}

/// Exact scene geometry behind a simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruthDoc {
    pub schema_version: u32,
    /// LiDAR to camera.
    pub extrinsics: TransformDoc,
    pub lidar_pose: TransformDoc,
    pub camera_pose: TransformDoc,
    pub boards: Vec<PlacedBoardDoc>,
}
