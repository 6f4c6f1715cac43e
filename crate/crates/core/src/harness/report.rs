use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{EvalRecord, RunReport};
use crate::baselines::Strategy;
use crate::error::{Error, Result};
use crate::runner::FailureClass;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureCounts {
    #[serde(rename = "TypeI")]
    pub type_i: usize,
    #[serde(rename = "TypeII")]
    pub type_ii: usize,
    #[serde(rename = "TypeIII")]
    pub type_iii: usize,
}

impl FailureCounts {
    pub fn get(&self, class: FailureClass) -> usize {
        match class {
            FailureClass::TypeI => self.type_i,
            FailureClass::TypeII => self.type_ii,
            FailureClass::TypeIII => self.type_iii,
        }
    }

    fn bump(&mut self, class: FailureClass) {
        match class {
            FailureClass::TypeI => self.type_i += 1,
            FailureClass::TypeII => self.type_ii += 1,
            FailureClass::TypeIII => self.type_iii += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.type_i + self.type_ii + self.type_iii
    }
}

/// Summary over a group of records. Means are `None` for an empty group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scope: String,
    pub total: usize,
    pub valid: usize,
    /// Valid share in percent.
    pub vsr: f64,
    pub mean_iou: Option<f64>,
    pub mean_cd: Option<f64>,
    pub mean_ecd: Option<f64>,
    pub mean_tiling_ratio: Option<f64>,
    pub failures: FailureCounts,
    /// Queries lost to a pipeline error rather than a classified failure.
    pub stage_errors: usize,
}

fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

impl Aggregate {
    pub fn over<'a>(scope: String, records: impl Iterator<Item = &'a EvalRecord>) -> Self {
        let records: Vec<&EvalRecord> = records.collect();
        let total = records.len();
        let valid = records.iter().filter(|r| r.valid).count();
        let metrics: Vec<_> = records.iter().filter_map(|r| r.metrics.as_ref()).collect();
        let mut failures = FailureCounts::default();
        let mut stage_errors = 0;
        for r in &records {
            match (r.failure_class, &r.stage_error) {
                (Some(c), _) => failures.bump(c),
                (None, Some(_)) => stage_errors += 1,
                (None, None) => {}
            }
        }
        Aggregate {
            scope,
            total,
            valid,
            vsr: if total == 0 { 0.0 } else { 100.0 * valid as f64 / total as f64 },
            mean_iou: mean(&metrics.iter().map(|m| m.iou).collect::<Vec<_>>()),
            mean_cd: mean(&metrics.iter().map(|m| m.cd).collect::<Vec<_>>()),
            mean_ecd: mean(&metrics.iter().map(|m| m.ecd).collect::<Vec<_>>()),
            mean_tiling_ratio: mean(&records.iter().map(|r| r.tiling_ratio).collect::<Vec<_>>()),
            failures,
            stage_errors,
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w).map_err(|e| Error::Config(format!("csv: {e}")))?;
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields"))
}

/// One row per (report, aggregate scope).
pub fn sweep_csv(reports: &[RunReport]) -> Result<String> {
    csv_string(|w| {
        w.write_record([
            "strategy",
            "k",
            "scope",
            "total",
            "valid",
            "vsr",
            "mean_iou",
            "mean_cd",
            "mean_ecd",
            "mean_tiling_ratio",
            "type_i",
            "type_ii",
            "type_iii",
            "stage_errors",
        ])?;
        for r in reports {
            for a in &r.aggregates {
                w.write_record([
                    r.strategy.to_string(),
                    r.k.to_string(),
                    a.scope.clone(),
                    a.total.to_string(),
                    a.valid.to_string(),
                    a.vsr.to_string(),
                    opt(a.mean_iou),
                    opt(a.mean_cd),
                    opt(a.mean_ecd),
                    opt(a.mean_tiling_ratio),
                    a.failures.type_i.to_string(),
                    a.failures.type_ii.to_string(),
                    a.failures.type_iii.to_string(),
                    a.stage_errors.to_string(),
                ])?;
            }
        }
        Ok(())
    })
}

/// Sample Pearson correlation; `None` with fewer than two pairs or when
/// either side is constant.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    // checked exactly: the mean of equal values can round away from them
    let constant = |v: &[f64]| v.iter().all(|x| *x == v[0]);
    if constant(xs) || constant(ys) {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// One (strategy, k) point, from a report's overall aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCell {
    pub strategy: Strategy,
    pub k: usize,
    pub mean_tiling_ratio: Option<f64>,
    pub vsr: f64,
    pub mean_iou: Option<f64>,
    pub mean_cd: Option<f64>,
    pub mean_ecd: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub cells: Vec<CorrelationCell>,
    /// Pearson r of mean tiling ratio against each metric; `null` when
    /// undefined.
    pub vsr: Option<f64>,
    pub iou: Option<f64>,
    pub cd: Option<f64>,
    pub ecd: Option<f64>,
}

impl CorrelationReport {
    pub fn scatter_csv(&self) -> Result<String> {
        csv_string(|w| {
            w.write_record(["strategy", "k", "mean_tiling_ratio", "vsr", "mean_iou", "mean_cd", "mean_ecd"])?;
            for c in &self.cells {
                w.write_record([
                    c.strategy.to_string(),
                    c.k.to_string(),
                    opt(c.mean_tiling_ratio),
                    c.vsr.to_string(),
                    opt(c.mean_iou),
                    opt(c.mean_cd),
                    opt(c.mean_ecd),
                ])?;
            }
            Ok(())
        })
    }
}

fn correlate(cells: &[CorrelationCell], metric: impl Fn(&CorrelationCell) -> Option<f64>) -> Option<f64> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = cells
        .iter()
        .filter_map(|c| Some((c.mean_tiling_ratio?, metric(c)?)))
        .unzip();
    pearson(&xs, &ys)
}

pub fn correlation_report(reports: &[RunReport]) -> CorrelationReport {
    let cells: Vec<CorrelationCell> = reports
        .iter()
        .map(|r| {
            let a = r.overall();
            CorrelationCell {
                strategy: r.strategy,
                k: r.k,
                mean_tiling_ratio: a.mean_tiling_ratio,
                vsr: a.vsr,
                mean_iou: a.mean_iou,
                mean_cd: a.mean_cd,
                mean_ecd: a.mean_ecd,
            }
        })
        .collect();
    CorrelationReport {
        vsr: correlate(&cells, |c| Some(c.vsr)),
        iou: correlate(&cells, |c| c.mean_iou),
        cd: correlate(&cells, |c| c.mean_cd),
        ecd: correlate(&cells, |c| c.mean_ecd),
        cells,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRow {
    pub strategy: Strategy,
    pub failure_class: FailureClass,
    pub count: usize,
    /// Share of this strategy's classified failures, in percent.
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureReport {
    pub rows: Vec<FailureRow>,
}

impl FailureReport {
    pub fn to_csv(&self) -> Result<String> {
        csv_string(|w| {
            w.write_record(["strategy", "failure_class", "count", "percent"])?;
            for r in &self.rows {
                w.write_record([
                    r.strategy.to_string(),
                    r.failure_class.to_string(),
                    r.count.to_string(),
                    r.percent.to_string(),
                ])?;
            }
            Ok(())
        })
    }
}

/// Classified failures per strategy, summed over all reports for it.
/// Strategies without failures contribute no rows.
pub fn failure_report(reports: &[RunReport]) -> FailureReport {
    let mut rows = Vec::new();
    for strategy in Strategy::ALL {
        let mut counts = FailureCounts::default();
        for r in reports.iter().filter(|r| r.strategy == strategy) {
            for rec in &r.records {
                if let Some(c) = rec.failure_class {
                    counts.bump(c);
                }
            }
        }
        let total = counts.total();
        if total == 0 {
            continue;
        }
        for class in FailureClass::ALL {
            rows.push(FailureRow {
                strategy,
                failure_class: class,
                count: counts.get(class),
                percent: 100.0 * counts.get(class) as f64 / total as f64,
            });
        }
    }
    FailureReport { rows }
}

/// Every `*.json` report in `dir`, in file-name order.
pub fn load_reports(dir: &Path) -> Result<Vec<RunReport>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| RunReport::load(p)).collect()
}
