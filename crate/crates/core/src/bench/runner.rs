//! Timed sweeps of the stencil kernel.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::kernel::{stencil_step, Coefficients, Grid};
use crate::domain::{Dataset, DatasetSchema, RESPONSE};
use crate::error::{Error, Result};
use crate::stencil::{Blocking, StencilConfig};

/// Values of one sweep axis: an explicit list or an inclusive range.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    List(Vec<u64>),
    Range { start: u64, stop: u64, step: u64 },
}

impl Axis {
    pub fn values(&self) -> Result<Vec<u64>> {
        let v = match self {
            Axis::List(v) => v.clone(),
            Axis::Range { start, stop, step } => {
                if *step == 0 {
                    return Err(Error::config("range step must be positive"));
                }
                (*start..=*stop).step_by(*step as usize).collect()
            }
        };
        if v.is_empty() || v.contains(&0) {
            return Err(Error::config("sweep axes must hold positive values"));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSweep {
    pub i: Axis,
    pub j: Axis,
    pub k: Axis,
}

fn one() -> u64 {
    1
}

fn five() -> usize {
    5
}

fn one_usize() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchPlan {
    pub grid: GridSweep,
    /// Block shapes `[TI, TJ, TK]`; empty for unblocked runs.
    #[serde(default)]
    pub blocks: Vec<[u64; 3]>,
    /// Thread counts; omitted means one thread and no `t` column.
    #[serde(default)]
    pub threads: Vec<u64>,
    #[serde(default = "one")]
    pub order: u64,
    #[serde(default = "one")]
    pub timesteps: u64,
    #[serde(default = "five")]
    pub repetitions: usize,
    #[serde(default = "one_usize")]
    pub warmup: usize,
    #[serde(default)]
    pub coefficients: Coefficients,
}

impl BenchPlan {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let plan: BenchPlan = serde_json::from_str(text)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::config("repetitions must be at least 1"));
        }
        if self.order == 0 || self.timesteps == 0 {
            return Err(Error::config("order and timesteps must be positive"));
        }
        if self.threads.contains(&0) {
            return Err(Error::config("thread counts must be positive"));
        }
        if self.points()?.0.is_empty() {
            return Err(Error::config("plan has no runnable points"));
        }
        Ok(())
    }

    pub fn schema(&self) -> DatasetSchema {
        let mut names = vec!["I", "J", "K"];
        if !self.blocks.is_empty() {
            names.extend(["b_i", "b_j", "b_k"]);
        }
        if !self.threads.is_empty() {
            names.push("t");
        }
        DatasetSchema::new(names, RESPONSE).expect("fixed names are unique")
    }

    /// Runnable configs, plus descriptions of block shapes that do not
    /// divide their grid.
    pub fn points(&self) -> Result<(Vec<StencilConfig>, Vec<String>)> {
        let (is, js, ks) = (self.grid.i.values()?, self.grid.j.values()?, self.grid.k.values()?);
        let threads = if self.threads.is_empty() { vec![1] } else { self.threads.clone() };
        let blocks: Vec<Option<[u64; 3]>> = if self.blocks.is_empty() {
            vec![None]
        } else {
            self.blocks.iter().copied().map(Some).collect()
        };
        let mut out = Vec::new();
        let mut skipped = Vec::new();
        for &i in &is {
            for &j in &js {
                for &k in &ks {
                    for b in &blocks {
                        for &t in &threads {
                            let mut cfg = StencilConfig::grid(i, j, k, self.order)?.with_threads(t)?;
                            if let Some([ti, tj, tk]) = *b {
                                match cfg.clone().with_blocking(ti, tj, tk) {
                                    Ok(c) => cfg = c,
                                    Err(e) => {
                                        skipped.push(format!("{i}x{j}x{k} block {ti}x{tj}x{tk}: {e}"));
                                        continue;
                                    }
                                }
                            }
                            out.push(cfg);
                        }
                    }
                }
            }
        }
        Ok((out, skipped))
    }

    fn row(&self, cfg: &StencilConfig) -> Vec<f64> {
        let mut row = vec![cfg.i as f64, cfg.j as f64, cfg.k as f64];
        if !self.blocks.is_empty() {
            let b = cfg.blocking.unwrap_or(Blocking { ti: cfg.i, tj: cfg.j, tk: cfg.k });
            row.extend([b.ti as f64, b.tj as f64, b.tk as f64]);
        }
        if !self.threads.is_empty() {
            row.push(cfg.threads as f64);
        }
        row
    }
}

#[derive(Debug, Clone)]
pub struct BenchOutcome {
    pub dataset: Dataset,
    /// Points not measured, with the reason.
    pub skipped: Vec<String>,
}

/// Smallest positive difference observed between consecutive clock reads.
pub fn timer_resolution() -> Duration {
    let mut best = Duration::MAX;
    for _ in 0..64 {
        let a = Instant::now();
        let mut b = Instant::now();
        while b == a {
            b = Instant::now();
        }
        best = best.min(b - a);
    }
    best
}

/// Median wall-clock time of `timesteps` kernel steps on `cfg`.
pub fn time_point(plan: &BenchPlan, cfg: &StencilConfig) -> Result<Duration> {
    let halo = cfg.order as usize;
    let mut a = Grid::new(cfg.i as usize, cfg.j as usize, cfg.k as usize, halo, 1.0)?;
    a.fill_interior(|i, j, k| 1.0 + ((i + 3 * j + 7 * k) % 11) as f64 / 11.0);
    let mut b = a.clone();
    let run = |a: &mut Grid, b: &mut Grid| -> Result<Duration> {
        let start = Instant::now();
        for _ in 0..plan.timesteps {
            stencil_step(a, b, halo, plan.coefficients, cfg.blocking, cfg.threads as usize)?;
            std::mem::swap(a, b);
        }
        Ok(start.elapsed())
    };
    for _ in 0..plan.warmup {
        run(&mut a, &mut b)?;
    }
    let mut times = (0..plan.repetitions)
        .map(|_| run(&mut a, &mut b))
        .collect::<Result<Vec<_>>>()?;
    times.sort();
    let n = times.len();
    Ok(if n % 2 == 1 {
        times[n / 2]
    } else {
        (times[n / 2 - 1] + times[n / 2]) / 2
    })
}

/// Runs every plan point in sequence. Points whose median time is under
/// ten timer ticks are skipped and reported.
pub fn run_stencil_bench(plan: &BenchPlan) -> Result<BenchOutcome> {
    plan.validate()?;
    let (points, mut skipped) = plan.points()?;
    let floor = timer_resolution() * 10;
    let mut rows = Vec::new();
    let mut times = Vec::new();
    for cfg in &points {
        let t = time_point(plan, cfg)?;
        if t < floor || t.is_zero() {
            skipped.push(format!(
                "{}x{}x{}: median {:?} below timer floor {:?}",
                cfg.i, cfg.j, cfg.k, t, floor
            ));
            continue;
        }
        rows.push(plan.row(cfg));
        times.push(t.as_secs_f64());
    }
    if rows.is_empty() {
        return Err(Error::Eval(format!("no point could be timed: {}", skipped.join("; "))));
    }
    Ok(BenchOutcome {
        dataset: Dataset::new(plan.schema(), rows, times)?,
        skipped,
    })
}
