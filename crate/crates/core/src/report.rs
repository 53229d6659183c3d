//! Residual reports, deterministic grid sweeps and report files.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numkernel::ChartPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

/// Largest absolute residual of one channel and where it occurred.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Channel {
    pub name: String,
    pub max_abs: f64,
    pub at: Option<ChartPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualReport {
    pub case_label: String,
    pub points_checked: usize,
    pub channels: Vec<Channel>,
    pub tolerance: f64,
    pub verdict: Verdict,
    #[serde(skip)]
    pub worst_point: Option<ChartPoint>,
}

impl ResidualReport {
    /// Builds a report from finished channels; the verdict is recomputed.
    pub fn from_channels(
        case_label: impl Into<String>,
        points_checked: usize,
        channels: Vec<Channel>,
        tolerance: f64,
    ) -> Self {
        let mut r = Self {
            case_label: case_label.into(),
            points_checked,
            channels,
            tolerance,
            verdict: Verdict::Fail,
            worst_point: None,
        };
        r.refresh();
        r
    }

    fn refresh(&mut self) {
        let ok = self.channels.iter().all(|c| c.max_abs <= self.tolerance);
        self.verdict = if ok { Verdict::Pass } else { Verdict::Fail };
        self.worst_point = self.worst_channel().and_then(|c| c.at);
    }

    /// Channel with the largest ratio to the tolerance (NaN counts as worst).
    pub fn worst_channel(&self) -> Option<&Channel> {
        let mut best: Option<&Channel> = None;
        for c in &self.channels {
            let worse = match best {
                None => true,
                Some(b) => c.max_abs.is_nan() && !b.max_abs.is_nan() || c.max_abs > b.max_abs,
            };
            if worse {
                best = Some(c);
            }
        }
        best
    }

    pub fn channel(&self, name: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.name == name)
    }

    pub fn max_abs(&self, name: &str) -> f64 {
        self.channel(name).map(|c| c.max_abs).unwrap_or(f64::NAN)
    }

    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }

    /// Appends the channels of `other`, keeping this label and the larger point count.
    pub fn absorb(&mut self, other: ResidualReport) {
        self.points_checked = self.points_checked.max(other.points_checked);
        self.channels.extend(other.channels);
        self.refresh();
    }

    /// Fails with [`Error::ToleranceExceeded`] naming the worst channel, if any fails.
    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            return Ok(self);
        }
        let failing = self
            .channels
            .iter()
            .filter(|c| !(c.max_abs <= self.tolerance))
            .fold(None::<&Channel>, |acc, c| match acc {
                Some(a) if !(c.max_abs > a.max_abs) && !c.max_abs.is_nan() => Some(a),
                _ => Some(c),
            })
            .expect("a failing report has a failing channel");
        Err(Error::ToleranceExceeded {
            identity: failing.name.clone(),
            point: failing.at.map(|p| p.coords().to_vec()).unwrap_or_default(),
            violation: failing.max_abs,
        })
    }
}

/// Penalty that stays at or below `tol` exactly when `|x| >= tol`; turns a
/// "bounded away from zero" requirement into an ordinary residual channel.
pub fn lower_bound_deficit(x: f64, tol: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    (2.0 * tol - x.abs()).max(0.0)
}

/// Evaluates `residuals` at every point (in parallel) and reduces each channel to its
/// maximum absolute value in point order, so the result does not depend on scheduling.
pub fn sweep<F>(
    case_label: &str,
    points: &[ChartPoint],
    tolerance: f64,
    names: &[&str],
    residuals: F,
) -> Result<ResidualReport>
where
    F: Fn(&ChartPoint) -> Result<Vec<f64>> + Sync,
{
    let values: Vec<Result<Vec<f64>>> = points.par_iter().map(&residuals).collect();
    let values = values.into_iter().collect::<Result<Vec<_>>>()?;
    reduce(case_label, points, tolerance, names, values)
}

/// Reduces precomputed per-point residuals (same order as `points`) to a report.
pub fn reduce(
    case_label: &str,
    points: &[ChartPoint],
    tolerance: f64,
    names: &[&str],
    values: Vec<Vec<f64>>,
) -> Result<ResidualReport> {
    let mut channels: Vec<Channel> = names
        .iter()
        .map(|n| Channel {
            name: (*n).to_string(),
            max_abs: 0.0,
            at: None,
        })
        .collect();
    for (p, v) in points.iter().zip(values) {
        if v.len() != names.len() {
            return Err(Error::InvalidArgument(format!(
                "residual function returned {} values for {} channels",
                v.len(),
                names.len()
            )));
        }
        for (c, x) in channels.iter_mut().zip(v) {
            let a = x.abs();
            let take = if c.at.is_none() {
                true
            } else {
                (a.is_nan() && !c.max_abs.is_nan()) || a > c.max_abs
            };
            if take {
                c.max_abs = a;
                c.at = Some(*p);
            }
        }
    }
    Ok(ResidualReport::from_channels(
        case_label,
        points.len(),
        channels,
        tolerance,
    ))
}

/// Top-level report file.
#[derive(Debug, Clone, Serialize)]
pub struct ReportFile {
    pub format: &'static str,
    pub version: u32,
    pub command: String,
    pub cases: Vec<ResidualReport>,
    pub details: BTreeMap<String, serde_json::Value>,
}

impl ReportFile {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            format: "biharm-report",
            version: 1,
            command: command.into(),
            cases: Vec::new(),
            details: BTreeMap::new(),
        }
    }

    pub fn all_passed(&self) -> bool {
        self.cases.iter().all(|c| c.passed())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report values serialize")
    }

    pub fn write_atomic(&self, path: &Path) -> std::io::Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }
}

/// Writes through a temporary file in the destination directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// One row of a grid dump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridRow {
    pub axis1: f64,
    pub axis2: f64,
    pub r1: f64,
    pub r2: f64,
}

/// Comma-separated grid table with header `axis1,axis2,r1,r2`.
pub fn grid_csv(rows: &[GridRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
