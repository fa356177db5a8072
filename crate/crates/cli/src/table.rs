//! Comparison tables over a run directory laid out as `case_*/<mode>.csv`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use lidar_cbf::io::{read_trajectory_points, write_metrics, MetricsRow};
use lidar_cbf::metrics::{correlation, frechet, Polyline, DEFAULT_RESAMPLE};
use lidar_cbf::sim::Mode;

/// The three compared pairs, in column order.
pub const PAIRS: [(Mode, Mode, &str); 3] = [
    (Mode::Offline, Mode::GroundTruth, "offline_vs_gt"),
    (Mode::OnlineAggregate, Mode::GroundTruth, "online_vs_gt"),
    (Mode::Offline, Mode::OnlineAggregate, "offline_vs_online"),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Score {
    pub r: f64,
    pub f: f64,
}

#[derive(Debug, Clone)]
pub struct TableRow {
    pub case: String,
    pub scores: [Option<Score>; 3],
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub rows: Vec<TableRow>,
}

pub fn compare(a: &Polyline, b: &Polyline) -> Score {
    Score {
        r: correlation(a, b, DEFAULT_RESAMPLE).expect("resample count is valid"),
        f: frechet(a, b),
    }
}

fn load(dir: &Path, mode: Mode) -> Option<Polyline> {
    let path = dir.join(format!("{}.csv", mode.as_str()));
    if !path.exists() {
        return None;
    }
    match read_trajectory_points(&path).and_then(Polyline::new) {
        Ok(p) => Some(p),
        Err(e) => {
            log::warn!("skipping {}: {e}", path.display());
            None
        }
    }
}

fn case_dirs(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(run_dir)
        .with_context(|| format!("cannot read run directory {}", run_dir.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("case_"))
        })
        .collect();
    dirs.sort();
    Ok(dirs)
}

pub fn build_table(run_dir: &Path) -> Result<Table> {
    let mut table = Table::default();
    for dir in case_dirs(run_dir)? {
        let case = dir
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("case_"))
            .unwrap_or_default()
            .to_string();
        let mut scores = [None; 3];
        for (slot, (a, b, _)) in scores.iter_mut().zip(PAIRS) {
            if let (Some(pa), Some(pb)) = (load(&dir, a), load(&dir, b)) {
                *slot = Some(compare(&pa, &pb));
            }
        }
        table.rows.push(TableRow { case, scores });
    }
    Ok(table)
}

impl Table {
    /// Column-wise averages over the cases where the pair is present.
    pub fn averages(&self) -> [Option<Score>; 3] {
        let mut out = [None; 3];
        for (k, slot) in out.iter_mut().enumerate() {
            let present: Vec<Score> = self.rows.iter().filter_map(|r| r.scores[k]).collect();
            if !present.is_empty() {
                let n = present.len() as f64;
                *slot = Some(Score {
                    r: present.iter().map(|s| s.r).sum::<f64>() / n,
                    f: present.iter().map(|s| s.f).sum::<f64>() / n,
                });
            }
        }
        out
    }

    fn cells(&self) -> Vec<(String, [Option<Score>; 3])> {
        let mut rows: Vec<_> = self.rows.iter().map(|r| (r.case.clone(), r.scores)).collect();
        if !self.rows.is_empty() {
            rows.push(("Average".to_string(), self.averages()));
        }
        rows
    }

    fn header() -> Vec<String> {
        let mut h = vec!["case".to_string()];
        h.extend(PAIRS.iter().map(|(_, _, n)| format!("R_{n}")));
        h.extend(PAIRS.iter().map(|(_, _, n)| format!("F_{n}")));
        h
    }

    fn row_strings(scores: &[Option<Score>; 3]) -> Vec<String> {
        let fmt = |v: Option<f64>| v.map_or_else(|| "absent".to_string(), |x| format!("{x:.4}"));
        let mut cols: Vec<String> = scores.iter().map(|s| fmt(s.map(|s| s.r))).collect();
        cols.extend(scores.iter().map(|s| fmt(s.map(|s| s.f))));
        cols
    }

    pub fn to_csv(&self) -> String {
        let mut out = Self::header().join(",");
        out.push('\n');
        for (case, scores) in self.cells() {
            let mut cols = vec![case];
            cols.extend(Self::row_strings(&scores));
            out.push_str(&cols.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut rows = vec![Self::header()];
        for (case, scores) in self.cells() {
            let mut cols = vec![case];
            cols.extend(Self::row_strings(&scores));
            rows.push(cols);
        }
        let widths: Vec<usize> = (0..rows[0].len())
            .map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for r in &rows {
            let line: Vec<String> = r
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (s, w))| if c == 0 { format!("{s:<w$}") } else { format!("{s:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        out
    }

    /// Long-form `case,mode_a,mode_b,R,F` rows for present pairs.
    pub fn metrics_rows(&self) -> Vec<MetricsRow> {
        let mut rows = Vec::new();
        for r in &self.rows {
            for (s, (a, b, _)) in r.scores.iter().zip(PAIRS) {
                if let Some(s) = s {
                    rows.push(MetricsRow {
                        case: r.case.clone(),
                        mode_a: a.as_str().to_string(),
                        mode_b: b.as_str().to_string(),
                        r: s.r,
                        f: s.f,
                    });
                }
            }
        }
        rows
    }

    /// Writes `table.csv` and `metrics.csv` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join("table.csv"), self.to_csv())
            .with_context(|| format!("cannot write {}", dir.join("table.csv").display()))?;
        write_metrics(dir.join("metrics.csv"), &self.metrics_rows())?;
        Ok(())
    }
}
