//! Cache-hierarchy execution-time model for the order-`l` star stencil
//! (7-point for `l = 1`), with the spatial-blocking extension.
//!
//! All plane sizes are in elements, miss counts are in cachelines. Flop
//! time is not modeled; the kernel is assumed memory bound.

use serde::{Deserialize, Serialize};

use crate::domain::MachineSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum CachePolicy {
    #[default]
    WriteAllocate,
    NoWriteAllocate,
}

/// Spatial block extents `(TI, TJ, TK)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blocking {
    pub ti: u64,
    pub tj: u64,
    pub tk: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StencilConfig {
    pub i: u64,
    pub j: u64,
    pub k: u64,
    /// Stencil order `l`; the ghost layer is `l` wide.
    pub order: u64,
    pub blocking: Option<Blocking>,
    /// Feature passthrough only.
    pub threads: u64,
    pub cache_policy: CachePolicy,
}

impl StencilConfig {
    /// Unblocked, single-threaded, write-allocate config.
    pub fn grid(i: u64, j: u64, k: u64, order: u64) -> Result<Self> {
        let cfg = StencilConfig {
            i,
            j,
            k,
            order,
            blocking: None,
            threads: 1,
            cache_policy: CachePolicy::WriteAllocate,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_blocking(mut self, ti: u64, tj: u64, tk: u64) -> Result<Self> {
        self.blocking = Some(Blocking { ti, tj, tk });
        self.validate()?;
        Ok(self)
    }

    pub fn with_policy(mut self, policy: CachePolicy) -> Self {
        self.cache_policy = policy;
        self
    }

    pub fn with_threads(mut self, threads: u64) -> Result<Self> {
        self.threads = threads;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("I", self.i), ("J", self.j), ("K", self.k), ("l", self.order), ("threads", self.threads)] {
            if v == 0 {
                return Err(Error::config(format!("stencil {name} must be positive")));
            }
        }
        if let Some(b) = self.blocking {
            for (name, t, n) in [("TI", b.ti, self.i), ("TJ", b.tj, self.j), ("TK", b.tk, self.k)] {
                if t == 0 || t > n {
                    return Err(Error::config(format!("block {name}={t} must be in 1..={n}")));
                }
                if n % t != 0 {
                    return Err(Error::config(format!("block {name}={t} does not divide {n}")));
                }
            }
        }
        Ok(())
    }

    /// Effective dimensions seen by the model. For a blocked traversal these
    /// are the per-block extents, with the x extents padded to whole lines.
    pub fn extents(&self, line_elements: u64) -> Extents {
        let l = self.order;
        let w = line_elements;
        match self.blocking {
            None => Extents {
                i: self.i,
                j: self.j,
                k: self.k,
                ii: self.i + 2 * l,
                jj: self.j + 2 * l,
                kk: self.k + 2 * l,
                blocks: 1,
            },
            Some(b) => Extents {
                i: b.ti.div_ceil(w) * w,
                j: b.tj,
                k: b.tk,
                ii: (b.ti + 2 * l).div_ceil(w) * w,
                jj: b.tj + 2 * l,
                kk: b.tk + 2 * l,
                blocks: (self.i / b.ti) * (self.j / b.tj) * (self.k / b.tk),
            },
        }
    }

    pub fn read_planes(&self) -> u64 {
        2 * self.order + 1
    }
}

/// Dimensions after ghost padding (and block reassignment).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Extents {
    pub i: u64,
    pub j: u64,
    pub k: u64,
    pub ii: u64,
    pub jj: u64,
    pub kk: u64,
    /// Number of blocks `NB`; 1 when unblocked.
    pub blocks: u64,
}

/// Memory requirement of one k iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneTraffic {
    pub p_read: f64,
    pub p_write: f64,
    pub s_read: f64,
    pub s_write: f64,
    pub s_total: f64,
}

pub fn plane_traffic(cfg: &StencilConfig, line_elements: u64) -> PlaneTraffic {
    let e = cfg.extents(line_elements);
    let p_read = cfg.read_planes() as f64;
    let p_write = 1.0;
    let s_read = (e.ii * e.jj) as f64;
    let s_write = (e.i * e.j) as f64;
    let s_total = match cfg.cache_policy {
        CachePolicy::WriteAllocate => p_read * s_read + p_write * s_write,
        CachePolicy::NoWriteAllocate => p_read * s_read,
    };
    PlaneTraffic {
        p_read,
        p_write,
        s_read,
        s_write,
        s_total,
    }
}

/// Cache capacities (in `size / W` units) at which the plane-count cases
/// change: `[r4, r3, r2, r1]`, non-decreasing.
///
/// Below `r4` the R4 case holds, at or above `r1` the R1 case holds.
pub fn nplanes_breakpoints(cfg: &StencilConfig, line_elements: u64) -> [f64; 4] {
    let t = plane_traffic(cfg, line_elements);
    let ii = cfg.extents(line_elements).ii as f64;
    let r_col = row_ratio(t.p_read);
    [
        t.p_read * ii / r_col,
        t.s_read / r_col,
        t.s_total,
        t.s_total / r_col,
    ]
}

fn row_ratio(p_read: f64) -> f64 {
    p_read / (2.0 * p_read - 1.0)
}

/// Planes refetched per k iteration for a cache of `capacity` (`size / W`).
///
/// Each case is pinned to its interval endpoint at the breakpoint where its
/// predicate flips and interpolated linearly in between, which makes the
/// result continuous and non-increasing in `capacity`.
pub fn nplanes_at_capacity(cfg: &StencilConfig, line_elements: u64, capacity: f64) -> f64 {
    let p = cfg.read_planes() as f64;
    let [b4, b3, b2, b1] = nplanes_breakpoints(cfg, line_elements);
    // (breakpoint, value) knots in ascending capacity
    let knots = [(b4, 2.0 * p - 1.0), (b3, p), (b2, p - 1.0), (b1, 1.0)];
    if capacity >= b1 {
        return 1.0;
    }
    if capacity < b4 {
        return 2.0 * p - 1.0;
    }
    for pair in knots.windows(2) {
        let (lo, v_lo) = pair[0];
        let (hi, v_hi) = pair[1];
        if capacity >= lo && capacity < hi {
            let t = (capacity - lo) / (hi - lo);
            return v_lo + (v_hi - v_lo) * t;
        }
    }
    unreachable!("breakpoints cover the capacity axis")
}

pub fn nplanes(level_index: usize, cfg: &StencilConfig, spec: &MachineSpec) -> Result<f64> {
    let level = spec
        .level(level_index)
        .ok_or_else(|| Error::config(format!("no cache level {level_index}")))?;
    let w = spec.line_elements();
    Ok(nplanes_at_capacity(cfg, w, level.size_elements as f64 / w as f64))
}

/// Line transfers per plane-set sweep, `ceil(II/W) * JJ * KK * NB`.
fn line_volume(cfg: &StencilConfig, line_elements: u64) -> f64 {
    let e = cfg.extents(line_elements);
    (e.ii.div_ceil(line_elements) * e.jj * e.kk * e.blocks) as f64
}

/// Misses issued at cache level `level_index` for one timestep.
pub fn misses(level_index: usize, cfg: &StencilConfig, spec: &MachineSpec) -> Result<f64> {
    Ok(line_volume(cfg, spec.line_elements()) * nplanes(level_index, cfg, spec)?)
}

/// Line-granular accesses issued by the core for one timestep: every read
/// and write plane once per k iteration. Serves as the level-0 miss count.
pub fn core_accesses(cfg: &StencilConfig, line_elements: u64) -> f64 {
    let t = plane_traffic(cfg, line_elements);
    line_volume(cfg, line_elements) * (t.p_read + t.p_write)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelCost {
    pub nplanes: f64,
    pub misses: f64,
    pub hits: f64,
    /// Seconds per timestep.
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StencilCostBreakdown {
    pub levels: Vec<LevelCost>,
    /// Seconds per timestep spent on main memory.
    pub t_mem: f64,
    pub s_total: f64,
    pub core_accesses: f64,
    pub timesteps: u64,
}

impl StencilCostBreakdown {
    pub fn per_timestep(&self) -> f64 {
        self.levels.iter().map(|l| l.time).sum::<f64>() + self.t_mem
    }
}

/// Predicted seconds for `timesteps` sweeps, with the per-level breakdown.
pub fn stencil_time(
    cfg: &StencilConfig,
    spec: &MachineSpec,
    timesteps: u64,
) -> Result<(f64, StencilCostBreakdown)> {
    cfg.validate()?;
    if timesteps == 0 {
        return Err(Error::config("timesteps must be positive"));
    }
    let w = spec.line_elements();
    let line_time = w as f64;
    let mut prev_misses = core_accesses(cfg, w);
    let mut levels = Vec::with_capacity(spec.cache_levels().len());
    for (idx, level) in spec.cache_levels().iter().enumerate() {
        let np = nplanes(idx, cfg, spec)?;
        let m = line_volume(cfg, w) * np;
        let hits = (prev_misses - m).max(0.0);
        levels.push(LevelCost {
            nplanes: np,
            misses: m,
            hits,
            time: line_time * level.beta * hits,
        });
        prev_misses = m;
    }
    let t_mem = line_time * spec.beta_mem() * prev_misses;
    let breakdown = StencilCostBreakdown {
        levels,
        t_mem,
        s_total: plane_traffic(cfg, w).s_total,
        core_accesses: core_accesses(cfg, w),
        timesteps,
    };
    Ok((timesteps as f64 * breakdown.per_timestep(), breakdown))
}
