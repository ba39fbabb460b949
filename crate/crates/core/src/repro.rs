//! Experiment recipes: a data source, a model list and fraction sweep, and
//! checks evaluated on the resulting learning-curve report.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::{run_stencil_bench, synthesize, BenchPlan, SyntheticOracleSpec};
use crate::domain::{Dataset, MachineSpec};
use crate::error::{Error, Result};
use crate::eval::{gnuplot_data, learning_curve, median, summarize, summary_table, EvalReport, SummaryRow};
use crate::hybrid::BagWeights;
use crate::ml::TreeParams;
use crate::model::ModelContext;
use crate::stencil::CachePolicy;

const BUILTIN: &[(&str, &str)] = &[
    ("stencil-gridsize", include_str!("../recipes/v1/stencil-gridsize.json")),
    ("stencil-blocking", include_str!("../recipes/v1/stencil-blocking.json")),
    ("stencil-threads", include_str!("../recipes/v1/stencil-threads.json")),
    ("fmm", include_str!("../recipes/v1/fmm.json")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Bench {
        plan: BenchPlan,
        /// Machine in the on-disk machine-spec form.
        machine: serde_json::Value,
    },
    Oracle(SyntheticOracleSpec),
}

/// A property of the report, tied to an acceptance criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "kebab-case")]
pub enum Check {
    /// `median(model) <= ratio * median(baseline)` at `fraction`.
    Ratio {
        criterion: u32,
        model: String,
        baseline: String,
        fraction: f64,
        ratio: f64,
    },
    /// `model` reaches `threshold` at some fraction `<= model_by`;
    /// `baseline` stays above it at every fraction `< baseline_not_before`.
    SmallWindow {
        criterion: u32,
        model: String,
        baseline: String,
        threshold: f64,
        model_by: f64,
        baseline_not_before: f64,
    },
    /// `median(model) <= median(baseline)` at every listed fraction.
    Dominates {
        criterion: u32,
        model: String,
        baseline: String,
        fractions: Vec<f64>,
    },
}

fn five() -> u64 {
    5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecipe {
    pub name: String,
    pub description: String,
    /// Grid ranges of the original experiment, for side-by-side reading.
    #[serde(default)]
    pub reference_range: String,
    pub source: Source,
    pub models: Vec<String>,
    #[serde(default)]
    pub params: TreeParams,
    #[serde(default)]
    pub bag_weights: BagWeights,
    pub fractions: Vec<f64>,
    /// Seeds `0..seeds`.
    #[serde(default = "five")]
    pub seeds: u64,
    pub checks: Vec<Check>,
    /// Checks are reported but not expected to hold on every machine.
    #[serde(default)]
    pub advisory: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub criterion: u32,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct RecipeResult {
    pub report: EvalReport,
    pub summary: Vec<SummaryRow>,
    pub checks: Vec<CheckResult>,
    pub output_dir: Option<PathBuf>,
}

impl RecipeResult {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn builtin_names() -> Vec<&'static str> {
    BUILTIN.iter().map(|(n, _)| *n).collect()
}

pub fn builtin(name: &str) -> Result<ExperimentRecipe> {
    let (_, text) = BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| Error::config(format!("unknown recipe {name:?}; known: {}", builtin_names().join(", "))))?;
    ExperimentRecipe::from_json_str(text)
}

impl ExperimentRecipe {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let r: ExperimentRecipe = serde_json::from_str(text)?;
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() || self.fractions.is_empty() || self.seeds == 0 {
            return Err(Error::config(format!("recipe {}: needs models, fractions and seeds", self.name)));
        }
        for c in &self.checks {
            let (criterion, names) = match c {
                Check::Ratio { criterion, model, baseline, .. }
                | Check::SmallWindow { criterion, model, baseline, .. }
                | Check::Dominates { criterion, model, baseline, .. } => (*criterion, [model, baseline]),
            };
            if !(1..=11).contains(&criterion) {
                return Err(Error::config(format!("recipe {}: unknown criterion {criterion}", self.name)));
            }
            for n in names {
                if !self.models.contains(n) {
                    return Err(Error::config(format!("recipe {}: check names model {n:?} not in the model list", self.name)));
                }
            }
        }
        Ok(())
    }

    fn context(&self) -> Result<ModelContext> {
        let mut ctx = ModelContext {
            params: self.params.clone(),
            bag_weights: self.bag_weights,
            ..ModelContext::default()
        };
        match &self.source {
            Source::Bench { plan, machine } => {
                ctx.machine = Some(MachineSpec::from_json_str(&machine.to_string())?);
                ctx.order = plan.order;
                ctx.timesteps = plan.timesteps;
                ctx.cache_policy = CachePolicy::WriteAllocate;
            }
            Source::Oracle(o) => {
                ctx.machine = Some(o.analytical()?.machine().clone());
                ctx.order = o.order;
                ctx.timesteps = o.timesteps;
                ctx.cache_policy = o.cache_policy;
            }
        }
        Ok(ctx)
    }

    pub fn dataset(&self) -> Result<Dataset> {
        match &self.source {
            Source::Bench { plan, .. } => Ok(run_stencil_bench(plan)?.dataset),
            Source::Oracle(o) => synthesize(o),
        }
    }

    /// Runs the learning curve on `ds` and evaluates the checks.
    pub fn evaluate(&self, ds: &Dataset) -> Result<RecipeResult> {
        let ctx = self.context()?;
        let models = self.models.iter().map(|m| ctx.named(m)).collect::<Result<Vec<_>>>()?;
        let seeds: Vec<u64> = (0..self.seeds).collect();
        let report = learning_curve(ds, &self.fractions, &seeds, &models)?;
        let summary = summarize(&report)?;
        let checks = self.checks.iter().map(|c| check(&report, c)).collect();
        Ok(RecipeResult {
            report,
            summary,
            checks,
            output_dir: None,
        })
    }

    /// Generates the data, evaluates, and writes artifacts under
    /// `<out>/<name>-<unix seconds>/` when `out` is given.
    pub fn run(&self, out: Option<&Path>) -> Result<RecipeResult> {
        let ds = self.dataset()?;
        let mut result = self.evaluate(&ds)?;
        if let Some(out) = out {
            let stamp = std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0);
            let dir = out.join(format!("{}-{stamp}", self.name));
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            ds.write_csv(dir.join("data.csv"))?;
            result.report.write_csv(dir.join("report.csv"))?;
            let write = |name: &str, text: String| {
                let p = dir.join(name);
                crate::io::write_atomic(&p, text.as_bytes())
            };
            write("summary.txt", summary_table(&result.summary))?;
            write("curve.dat", gnuplot_data(&result.summary))?;
            write("checks.json", serde_json::to_string_pretty(&result.checks)?)?;
            result.output_dir = Some(dir);
        }
        Ok(result)
    }
}

fn cell_median(report: &EvalReport, model: &str, fraction: f64) -> Option<f64> {
    let v = report.cell(model, fraction);
    (!v.is_empty()).then(|| median(&v))
}

fn fractions_of(report: &EvalReport) -> Vec<f64> {
    let mut f: Vec<f64> = report.rows.iter().map(|r| r.fraction).collect();
    f.sort_by(f64::total_cmp);
    f.dedup();
    f
}

/// Evaluates one check; a missing cell fails it.
pub fn check(report: &EvalReport, c: &Check) -> CheckResult {
    let missing = |criterion| CheckResult {
        criterion,
        passed: false,
        detail: "report lacks a required cell".into(),
    };
    match c {
        Check::Ratio { criterion, model, baseline, fraction, ratio } => {
            let (Some(a), Some(b)) = (cell_median(report, model, *fraction), cell_median(report, baseline, *fraction)) else {
                return missing(*criterion);
            };
            CheckResult {
                criterion: *criterion,
                passed: a <= ratio * b,
                detail: format!("at {fraction}: {model} {a:.3} vs {baseline} {b:.3} (ratio {:.3}, limit {ratio})", a / b),
            }
        }
        Check::SmallWindow { criterion, model, baseline, threshold, model_by, baseline_not_before } => {
            let fr = fractions_of(report);
            let reach = |m: &str| {
                fr.iter()
                    .copied()
                    .find(|&f| cell_median(report, m, f).is_some_and(|v| v <= *threshold))
            };
            let (ma, mb) = (reach(model), reach(baseline));
            let ok_a = ma.is_some_and(|f| f <= *model_by);
            let ok_b = mb.is_none_or(|f| f >= *baseline_not_before);
            CheckResult {
                criterion: *criterion,
                passed: ok_a && ok_b,
                detail: format!("{model} first <= {threshold} at {ma:?}; {baseline} first at {mb:?}"),
            }
        }
        Check::Dominates { criterion, model, baseline, fractions } => {
            let mut parts = Vec::new();
            let mut passed = true;
            for &f in fractions {
                let (Some(a), Some(b)) = (cell_median(report, model, f), cell_median(report, baseline, f)) else {
                    return missing(*criterion);
                };
                passed &= a <= b;
                parts.push(format!("{f}: {a:.3} vs {b:.3}"));
            }
            CheckResult {
                criterion: *criterion,
                passed,
                detail: format!("{model} vs {baseline}: {}", parts.join(", ")),
            }
        }
    }
}
