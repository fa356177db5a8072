//! CSV import and export of trajectories, training sets, models, level
//! sets and metric reports.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;

use crate::dataset::{Label, LabeledSample, TrainingSet};
use crate::environment::SignedDistanceGrid;
use crate::sim::Trajectory;
use crate::svm::BarrierModel;
use crate::{Error, Point, Result};

pub const TRAJECTORY_HEADER: [&str; 8] = ["t", "x", "y", "ux", "uy", "h_hat", "true_sdf", "constraint_active"];
pub const METRICS_HEADER: [&str; 5] = ["case", "mode_a", "mode_b", "R", "F"];

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.to_path_buf(), source }
}

fn create_writer(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    Ok(csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file))
}

fn column(headers: &csv::StringRecord, name: &str, path: &Path) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Csv(format!("{}: missing column `{name}`", path.display())))
}

fn field(record: &csv::StringRecord, idx: usize, name: &str, row: usize, path: &Path) -> Result<f64> {
    let raw = record.get(idx).unwrap_or("");
    let v: f64 = raw.parse().map_err(|_| {
        Error::Csv(format!("{}: row {row}: column `{name}`: cannot parse `{raw}` as a number", path.display()))
    })?;
    if !v.is_finite() {
        return Err(Error::Csv(format!("{}: row {row}: column `{name}` is not finite", path.display())));
    }
    Ok(v)
}

fn fmt_bool(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

pub fn write_trajectory(path: impl AsRef<Path>, traj: &Trajectory) -> Result<()> {
    let path = path.as_ref();
    let mut w = create_writer(path)?;
    w.write_record(TRAJECTORY_HEADER)?;
    for s in &traj.samples {
        w.write_record([
            s.t.to_string(),
            s.x.x.to_string(),
            s.x.y.to_string(),
            s.u.x.to_string(),
            s.u.y.to_string(),
            s.h_hat.to_string(),
            s.true_sdf.to_string(),
            fmt_bool(s.constraint_active).to_string(),
        ])?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Positions `(x, y)` of a trajectory file. Other columns are ignored.
pub fn read_trajectory_points(path: impl AsRef<Path>) -> Result<Vec<Point>> {
    let path = path.as_ref();
    let mut r = open_reader(path)?;
    let headers = r.headers()?.clone();
    let ix = column(&headers, "x", path)?;
    let iy = column(&headers, "y", path)?;
    let mut out = Vec::new();
    for (k, rec) in r.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| Error::Csv(format!("{}: row {row}: {e}", path.display())))?;
        out.push(Point::new(field(&rec, ix, "x", row, path)?, field(&rec, iy, "y", row, path)?));
    }
    Ok(out)
}

pub fn write_training_set(path: impl AsRef<Path>, set: &TrainingSet) -> Result<()> {
    let path = path.as_ref();
    let mut w = create_writer(path)?;
    w.write_record(["x", "y", "label", "t"])?;
    for s in &set.samples {
        w.write_record([
            s.position.x.to_string(),
            s.position.y.to_string(),
            (s.label.sign() as i32).to_string(),
            s.t.to_string(),
        ])?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn read_training_set(path: impl AsRef<Path>) -> Result<TrainingSet> {
    let path = path.as_ref();
    let mut r = open_reader(path)?;
    let headers = r.headers()?.clone();
    let cols = [
        column(&headers, "x", path)?,
        column(&headers, "y", path)?,
        column(&headers, "label", path)?,
        column(&headers, "t", path)?,
    ];
    let mut set = TrainingSet::new();
    for (k, rec) in r.records().enumerate() {
        let row = k + 2;
        let rec = rec.map_err(|e| Error::Csv(format!("{}: row {row}: {e}", path.display())))?;
        let label_raw = field(&rec, cols[2], "label", row, path)?;
        let label = Label::from_sign(label_raw as i32)
            .filter(|_| label_raw.fract() == 0.0)
            .ok_or_else(|| Error::Csv(format!("{}: row {row}: label must be 1 or -1", path.display())))?;
        set.samples.push(LabeledSample {
            position: Point::new(field(&rec, cols[0], "x", row, path)?, field(&rec, cols[1], "y", row, path)?),
            label,
            t: field(&rec, cols[3], "t", row, path)?,
        });
    }
    Ok(set)
}

/// Support vectors as `kind,x,y,label,alpha` rows followed by one `bias` row.
pub fn write_model(path: impl AsRef<Path>, model: &BarrierModel) -> Result<()> {
    let path = path.as_ref();
    let mut w = create_writer(path)?;
    w.write_record(["kind", "x", "y", "label", "alpha"])?;
    for ((p, l), a) in model.support_points.iter().zip(&model.support_labels).zip(&model.alphas) {
        w.write_record([
            "support".to_string(),
            p.x.to_string(),
            p.y.to_string(),
            (l.sign() as i32).to_string(),
            a.to_string(),
        ])?;
    }
    w.write_record(["bias", "", "", "", &model.bias.to_string()])?;
    w.flush().map_err(|e| io_err(path, e))
}

/// Sampled barrier values as `x,y,h_hat`.
pub fn write_levelset(path: impl AsRef<Path>, samples: &[(Point, f64)]) -> Result<()> {
    let path = path.as_ref();
    let mut w = create_writer(path)?;
    w.write_record(["x", "y", "h_hat"])?;
    for (p, h) in samples {
        w.write_record([p.x.to_string(), p.y.to_string(), h.to_string()])?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Grid nodes as `x,y,sdf`.
pub fn write_sdf_grid(path: impl AsRef<Path>, grid: &SignedDistanceGrid) -> Result<()> {
    let path = path.as_ref();
    let mut w = create_writer(path)?;
    w.write_record(["x", "y", "sdf"])?;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let p = grid.node(i, j);
            w.write_record([p.x.to_string(), p.y.to_string(), grid.value_at_node(i, j).to_string()])?;
        }
    }
    w.flush().map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub case: String,
    pub mode_a: String,
    pub mode_b: String,
    pub r: f64,
    pub f: f64,
}

/// Appends rows to a metrics report, writing the header if the file is new
/// or empty.
pub fn append_metrics(path: impl AsRef<Path>, rows: &[MetricsRow]) -> Result<()> {
    let path = path.as_ref();
    let needs_header = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| io_err(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    if needs_header {
        w.write_record(METRICS_HEADER)?;
    }
    for row in rows {
        w.write_record([
            row.case.clone(),
            row.mode_a.clone(),
            row.mode_b.clone(),
            row.r.to_string(),
            row.f.to_string(),
        ])?;
    }
    let mut inner = w.into_inner().map_err(|e| Error::Csv(e.to_string()))?;
    inner.flush().map_err(|e| io_err(path, e))
}

pub fn write_metrics(path: impl AsRef<Path>, rows: &[MetricsRow]) -> Result<()> {
    let path = path.as_ref();
    if path.exists() {
        std::fs::remove_file(path).map_err(|e| io_err(path, e))?;
    }
    append_metrics(path, rows)
}
