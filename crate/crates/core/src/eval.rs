//! MAPE, learning curves over training-set fractions, and report output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{split_indices, Dataset, Predict};
use crate::error::{Error, Result};
use crate::model::NamedModel;

pub const REPORT_HEADER: &str = "model,fraction,seed,train_size,test_size,mape";

/// Mean absolute percentage error, in percent.
pub fn mape(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::Eval(format!(
            "length mismatch: {} truths, {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.is_empty() {
        return Err(Error::Eval("mape of empty vectors".into()));
    }
    let mut sum = 0.0;
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t.is_nan() || t <= 0.0 {
            return Err(Error::Eval(format!("true values must be positive, found {t}")));
        }
        sum += (t - p).abs() / t;
    }
    Ok(100.0 * sum / y_true.len() as f64)
}

/// Test-set MAPE of `model` on `ds`.
pub fn score(model: &impl Predict, ds: &Dataset) -> Result<f64> {
    let pred = model.predict_many(ds.features())?;
    mape(ds.responses(), &pred)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: String,
    pub fraction: f64,
    pub seed: u64,
    pub train_size: usize,
    pub test_size: usize,
    pub mape: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
}

/// Every model is fit on the same split for a given `(fraction, seed)`
/// and scored on its complement. Rows are ordered by model (input order),
/// then fraction, then seed.
pub fn learning_curve(ds: &Dataset, fractions: &[f64], seeds: &[u64], models: &[NamedModel]) -> Result<EvalReport> {
    if fractions.is_empty() || seeds.is_empty() || models.is_empty() {
        return Err(Error::config("learning curve needs at least one fraction, seed and model"));
    }
    let mut splits = Vec::new();
    for &f in fractions {
        for &s in seeds {
            let (train, test) = split_indices(ds.len(), f, s)?;
            if test.is_empty() {
                return Err(Error::Eval(format!("fraction {f} leaves no test rows")));
            }
            splits.push((f, s, ds.subset(&train), ds.subset(&test)));
        }
    }
    let cells: Vec<(usize, usize)> = (0..models.len())
        .flat_map(|m| (0..splits.len()).map(move |c| (m, c)))
        .collect();
    let mut rows = cells
        .par_iter()
        .map(|&(m, c)| {
            let (fraction, seed, train, test) = &splits[c];
            let model = &models[m];
            let fitted = model.spec.fit(train, *seed)?;
            Ok((
                m,
                ReportRow {
                    model: model.name.clone(),
                    fraction: *fraction,
                    seed: *seed,
                    train_size: train.len(),
                    test_size: test.len(),
                    mape: score(&fitted, test)?,
                },
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|(ma, a), (mb, b)| {
        ma.cmp(mb)
            .then(a.fraction.total_cmp(&b.fraction))
            .then(a.seed.cmp(&b.seed))
    });
    Ok(EvalReport {
        rows: rows.into_iter().map(|(_, r)| r).collect(),
    })
}

impl EvalReport {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from(REPORT_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.model, r.fraction, r.seed, r.train_size, r.test_size, r.mape
            );
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        crate::io::write_atomic(path.as_ref(), self.to_csv_string().as_bytes())
    }

    /// MAPE values of one `(model, fraction)` cell.
    pub fn cell(&self, model: &str, fraction: f64) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| r.model == model && r.fraction == fraction)
            .map(|r| r.mape)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    pub fraction: f64,
    pub count: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl SummaryRow {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

/// Linear-interpolation quantile of sorted values.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

/// Median and quartiles per `(model, fraction)`, models in first-seen
/// order and fractions ascending.
pub fn summarize(report: &EvalReport) -> Result<Vec<SummaryRow>> {
    if report.rows.is_empty() {
        return Err(Error::Eval("empty report".into()));
    }
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<(usize, u64), Vec<f64>> = BTreeMap::new();
    let mut fractions: BTreeMap<u64, f64> = BTreeMap::new();
    for r in &report.rows {
        let m = match order.iter().position(|&n| n == r.model) {
            Some(m) => m,
            None => {
                order.push(&r.model);
                order.len() - 1
            }
        };
        // Non-negative floats order like their bit patterns.
        let key = r.fraction.to_bits();
        fractions.insert(key, r.fraction);
        groups.entry((m, key)).or_default().push(r.mape);
    }
    Ok(groups
        .into_iter()
        .map(|((m, key), mut v)| {
            v.sort_by(f64::total_cmp);
            SummaryRow {
                model: order[m].to_string(),
                fraction: fractions[&key],
                count: v.len(),
                median: quantile(&v, 0.5),
                q1: quantile(&v, 0.25),
                q3: quantile(&v, 0.75),
            }
        })
        .collect())
}

pub fn summary_table(summary: &[SummaryRow]) -> String {
    let mut out = format!(
        "{:<20} {:>9} {:>5} {:>10} {:>10} {:>10}\n",
        "model", "fraction", "n", "median", "q1", "q3"
    );
    for s in summary {
        let _ = writeln!(
            out,
            "{:<20} {:>9} {:>5} {:>10.3} {:>10.3} {:>10.3}",
            s.model, s.fraction, s.count, s.median, s.q1, s.q3
        );
    }
    out
}

/// Whitespace-separated blocks, one per model, separated by two blank lines
/// so gnuplot can address them with `index`.
pub fn gnuplot_data(summary: &[SummaryRow]) -> String {
    let mut out = String::new();
    let mut current: Option<&str> = None;
    for s in summary {
        if current != Some(&s.model) {
            if current.is_some() {
                out.push_str("\n\n");
            }
            let _ = writeln!(out, "# {}\n# fraction median q1 q3", s.model);
            current = Some(&s.model);
        }
        let _ = writeln!(out, "{} {} {} {}", s.fraction, s.median, s.q1, s.q3);
    }
    out
}
