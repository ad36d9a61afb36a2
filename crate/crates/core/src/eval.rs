//! Scale-invariant reconstruction SNR and comparison reports.

use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::Path;

use crate::dataset::{DefectDataset, Split};
use crate::defects::DefectClass;
use crate::error::{Error, Result};
use crate::nn::CnnModel;

/// Sentinel for a zero residual; the metric is unbounded for perfect
/// reconstruction.
pub const SNR_CAP_DB: f64 = 300.0;

/// Best signal-to-residual ratio over a real scaling of the
/// reconstruction:
///
/// ```text
///     SNR(x, xh) = max_a 10 log10( |x|^2 / |x - a xh|^2 )
/// ```
///
/// The maximizer is a* = <x, xh> / |xh|^2, giving
/// 10 log10( |x|^2 / (|x|^2 - <x, xh>^2 / |xh|^2) ). A zero
/// reconstruction scores 0 dB (the scaling cannot help); a zero
/// residual is capped at [`SNR_CAP_DB`].
pub fn snr_db(x: &[f64], xhat: &[f64]) -> Result<f64> {
    if x.len() != xhat.len() {
        return Err(Error::ShapeMismatch(format!(
            "snr_db: reference has {} entries, reconstruction {}",
            x.len(),
            xhat.len()
        )));
    }
    let nx: f64 = x.iter().map(|v| v * v).sum();
    if nx == 0.0 {
        return Err(Error::ZeroReference);
    }
    let nh: f64 = xhat.iter().map(|v| v * v).sum();
    if nh == 0.0 {
        return Ok(0.0);
    }
    let inner: f64 = x.iter().zip(xhat).map(|(a, b)| a * b).sum();
    let residual = nx - inner * inner / nh;
    if residual <= nx * 1e-30 {
        return Ok(SNR_CAP_DB);
    }
    Ok((10.0 * (nx / residual).log10()).min(SNR_CAP_DB))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleEval {
    pub id: usize,
    pub class: DefectClass,
    pub noisy: bool,
    pub wnst_snr_db: f64,
    pub convnet_snr_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassSummary {
    pub label: String,
    pub count: usize,
    pub wnst_mean_db: f64,
    pub convnet_mean_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub per_sample: Vec<SampleEval>,
    pub per_class: Vec<ClassSummary>,
    pub overall: ClassSummary,
}

impl EvalReport {
    pub fn class_summary(&self, class: DefectClass) -> Option<&ClassSummary> {
        self.per_class.iter().find(|c| c.label == class.label())
    }
}

fn summarize(label: &str, entries: &[&SampleEval]) -> ClassSummary {
    let count = entries.len();
    let wnst_mean_db = entries.iter().map(|e| e.wnst_snr_db).sum::<f64>() / count as f64;
    let convnet_mean_db = if entries.iter().all(|e| e.convnet_snr_db.is_some()) {
        Some(entries.iter().map(|e| e.convnet_snr_db.unwrap()).sum::<f64>() / count as f64)
    } else {
        None
    };
    ClassSummary { label: label.to_string(), count, wnst_mean_db, convnet_mean_db }
}

/// Score one split of a dataset: the pre-reconstruction input against the
/// target (wnst column) and, when a model is given, the network output
/// against the target (convnet column).
pub fn evaluate(model: Option<&CnnModel>, ds: &DefectDataset, split: Split) -> Result<EvalReport> {
    let ids = ds.split_indices(split);
    if ids.is_empty() {
        return Err(Error::EmptyInput);
    }
    let per_sample: Vec<SampleEval> = ids
        .par_iter()
        .map(|&id| {
            let pair = &ds.samples[id];
            let wnst = snr_db(&pair.target, &pair.input)?;
            let convnet = match model {
                Some(m) => Some(snr_db(&pair.target, &m.predict(&pair.input)?)?),
                None => None,
            };
            Ok(SampleEval {
                id,
                class: pair.class,
                noisy: pair.noisy,
                wnst_snr_db: wnst,
                convnet_snr_db: convnet,
            })
        })
        .collect::<Result<_>>()?;

    let mut per_class = Vec::new();
    for class in DefectClass::ALL {
        let entries: Vec<&SampleEval> =
            per_sample.iter().filter(|e| e.class == class).collect();
        if !entries.is_empty() {
            per_class.push(summarize(class.label(), &entries));
        }
    }
    let all: Vec<&SampleEval> = per_sample.iter().collect();
    let overall = summarize("overall", &all);
    Ok(EvalReport { per_sample, per_class, overall })
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Per-sample listing: `sample_id,class,noisy,wnst_snr_db,convnet_snr_db`.
pub fn per_sample_csv(report: &EvalReport) -> String {
    let mut out = String::from("sample_id,class,noisy,wnst_snr_db,convnet_snr_db\n");
    for e in &report.per_sample {
        writeln!(
            out,
            "{},{},{},{},{}",
            e.id,
            e.class,
            e.noisy,
            e.wnst_snr_db,
            opt_cell(e.convnet_snr_db)
        )
        .expect("string write");
    }
    out
}

/// Per-class means plus the overall row: `class,count,wnst_mean_db,convnet_mean_db`.
pub fn summary_csv(report: &EvalReport) -> String {
    let mut out = String::from("class,count,wnst_mean_db,convnet_mean_db\n");
    for row in report.per_class.iter().chain(std::iter::once(&report.overall)) {
        writeln!(
            out,
            "{},{},{},{}",
            row.label,
            row.count,
            row.wnst_mean_db,
            opt_cell(row.convnet_mean_db)
        )
        .expect("string write");
    }
    out
}

pub fn summary_markdown(report: &EvalReport) -> String {
    let mut out = String::from("| class | count | wnst_mean_db | convnet_mean_db |\n|---|---|---|---|\n");
    for row in report.per_class.iter().chain(std::iter::once(&report.overall)) {
        writeln!(
            out,
            "| {} | {} | {} | {} |",
            row.label,
            row.count,
            row.wnst_mean_db,
            opt_cell(row.convnet_mean_db)
        )
        .expect("string write");
    }
    out.push('\n');
    out.push_str("| sample_id | class | noisy | wnst_snr_db | convnet_snr_db |\n|---|---|---|---|---|\n");
    for e in &report.per_sample {
        writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            e.id,
            e.class,
            e.noisy,
            e.wnst_snr_db,
            opt_cell(e.convnet_snr_db)
        )
        .expect("string write");
    }
    out
}

pub enum ReportFormat {
    Csv,
    Markdown,
}

/// Write a report to `dir`: `summary.csv` + `per_sample.csv` for CSV,
/// `report.md` for markdown. Rows are ordered by sample id, so reruns
/// are byte-identical.
pub fn export_report(report: &EvalReport, dir: &Path, format: ReportFormat) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    match format {
        ReportFormat::Csv => {
            std::fs::write(dir.join("summary.csv"), summary_csv(report))?;
            std::fs::write(dir.join("per_sample.csv"), per_sample_csv(report))?;
        }
        ReportFormat::Markdown => {
            std::fs::write(dir.join("report.md"), summary_markdown(report))?;
        }
    }
    Ok(())
}
