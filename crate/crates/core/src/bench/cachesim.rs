//! Fully associative LRU cache driven by the exact access trace of one
//! stencil sweep.
//!
//! Layout: the read array holds `KK` planes of `JJ` rows; each row of `II`
//! elements is padded to a whole number of lines so rows start on a line
//! boundary. The write array has the same layout and follows the read
//! array. For each interior point the trace reads the centre, then the
//! `i`, `j` and `k` neighbours at distance `1..=l`, then writes the point.

use std::collections::{BTreeMap, HashMap};

use crate::domain::{CacheLevel, MachineSpec};
use crate::error::{Error, Result};
use crate::stencil::{CachePolicy, StencilConfig};

/// Largest traced interior volume.
pub const MAX_POINTS: u64 = 64 * 64 * 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Access {
    pub address: u64,
    pub write: bool,
}

pub struct Lru {
    capacity: usize,
    clock: u64,
    stamp: HashMap<u64, u64>,
    order: BTreeMap<u64, u64>,
}

impl Lru {
    pub fn new(capacity_lines: usize) -> Self {
        Lru {
            capacity: capacity_lines.max(1),
            clock: 0,
            stamp: HashMap::new(),
            order: BTreeMap::new(),
        }
    }

    pub fn contains(&self, line: u64) -> bool {
        self.stamp.contains_key(&line)
    }

    /// Touches `line`, inserting it if absent. Returns whether it hit.
    pub fn touch(&mut self, line: u64) -> bool {
        self.clock += 1;
        if let Some(old) = self.stamp.insert(line, self.clock) {
            self.order.remove(&old);
            self.order.insert(self.clock, line);
            return true;
        }
        self.order.insert(self.clock, line);
        if self.stamp.len() > self.capacity {
            if let Some((_, victim)) = self.order.pop_first() {
                self.stamp.remove(&victim);
            }
        }
        false
    }

    /// Refreshes `line` if present without allocating.
    pub fn touch_if_present(&mut self, line: u64) -> bool {
        if self.contains(line) {
            self.touch(line)
        } else {
            false
        }
    }
}

/// Element trace of one sweep, blocked if `cfg` is.
pub fn stencil_trace(cfg: &StencilConfig, line_elements: u64) -> Result<Vec<Access>> {
    cfg.validate()?;
    let points = cfg.i * cfg.j * cfg.k;
    if points > MAX_POINTS {
        return Err(Error::TraceTooLarge {
            points,
            limit: MAX_POINTS,
        });
    }
    let l = cfg.order;
    let w = line_elements;
    let row = (cfg.i + 2 * l).div_ceil(w) * w;
    let plane = row * (cfg.j + 2 * l);
    let volume = plane * (cfg.k + 2 * l);
    let at = |i: u64, j: u64, k: u64| i + row * j + plane * k;
    let (ti, tj, tk) = match cfg.blocking {
        Some(b) => (b.ti, b.tj, b.tk),
        None => (cfg.i, cfg.j, cfg.k),
    };
    let mut trace = Vec::with_capacity((points * (6 * l + 2)) as usize);
    for kb in (0..cfg.k).step_by(tk as usize) {
        for jb in (0..cfg.j).step_by(tj as usize) {
            for ib in (0..cfg.i).step_by(ti as usize) {
                for k in kb + l..kb + tk + l {
                    for j in jb + l..jb + tj + l {
                        for i in ib + l..ib + ti + l {
                            let read = |address| Access { address, write: false };
                            trace.push(read(at(i, j, k)));
                            for d in 1..=l {
                                trace.push(read(at(i - d, j, k)));
                                trace.push(read(at(i + d, j, k)));
                            }
                            for d in 1..=l {
                                trace.push(read(at(i, j - d, k)));
                                trace.push(read(at(i, j + d, k)));
                            }
                            for d in 1..=l {
                                trace.push(read(at(i, j, k - d)));
                                trace.push(read(at(i, j, k + d)));
                            }
                            trace.push(Access { address: volume + at(i, j, k), write: true });
                        }
                    }
                }
            }
        }
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SimStats {
    pub reads: u64,
    pub writes: u64,
    pub read_misses: u64,
    pub write_misses: u64,
}

impl SimStats {
    pub fn misses(&self) -> u64 {
        self.read_misses + self.write_misses
    }
}

/// Replays `trace` at line granularity. Under write-allocate a write miss
/// fills the line; under no-write-allocate writes only refresh lines that
/// are already resident.
pub fn replay(trace: &[Access], line_elements: u64, capacity_lines: usize, policy: CachePolicy) -> SimStats {
    let mut cache = Lru::new(capacity_lines);
    let mut s = SimStats::default();
    for a in trace {
        let line = a.address / line_elements;
        if a.write {
            s.writes += 1;
            let hit = match policy {
                CachePolicy::WriteAllocate => cache.touch(line),
                CachePolicy::NoWriteAllocate => cache.touch_if_present(line),
            };
            s.write_misses += u64::from(!hit);
        } else {
            s.reads += 1;
            s.read_misses += u64::from(!cache.touch(line));
        }
    }
    s
}

/// Full statistics for one sweep of `cfg` through `level`.
pub fn simulate(cfg: &StencilConfig, level: &CacheLevel, spec: &MachineSpec) -> Result<SimStats> {
    let w = spec.line_elements();
    let trace = stencil_trace(cfg, w)?;
    let lines = (level.size_elements / w) as usize;
    Ok(replay(&trace, w, lines, cfg.cache_policy))
}

/// Read misses of one sweep: the quantity the plane-count model predicts,
/// since it counts read planes fetched.
pub fn simulate_misses(cfg: &StencilConfig, level: &CacheLevel, spec: &MachineSpec) -> Result<u64> {
    Ok(simulate(cfg, level, spec)?.read_misses)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn spec(w: u64) -> MachineSpec {
        MachineSpec::new(vec![CacheLevel { size_elements: 1 << 24, beta: 1e-10 }], 1e-9, 1e-10, w).unwrap()
    }

    #[test]
    fn lru_evicts_oldest() {
        let mut c = Lru::new(2);
        assert!(!c.touch(1));
        assert!(!c.touch(2));
        assert!(c.touch(1));
        assert!(!c.touch(3));
        assert!(c.contains(1) && !c.contains(2));
    }

    #[test]
    fn large_cache_gives_compulsory_misses() {
        let cfg = StencilConfig::grid(4, 4, 4, 1).unwrap();
        let trace = stencil_trace(&cfg, 8).unwrap();
        let lines: HashSet<u64> = trace.iter().map(|a| a.address / 8).collect();
        let level = CacheLevel { size_elements: 1 << 20, beta: 1e-10 };
        let s = simulate(&cfg, &level, &spec(8)).unwrap();
        assert_eq!(s.misses(), lines.len() as u64);
    }

    #[test]
    fn single_line_cache_misses_on_transitions() {
        let cfg = StencilConfig::grid(4, 4, 4, 1).unwrap();
        let trace = stencil_trace(&cfg, 8).unwrap();
        let mut transitions = 0;
        let mut last = None;
        for a in &trace {
            let line = a.address / 8;
            if last != Some(line) {
                transitions += 1;
            }
            last = Some(line);
        }
        let level = CacheLevel { size_elements: 8, beta: 1e-10 };
        let s = simulate(&cfg, &level, &spec(8)).unwrap();
        assert_eq!(s.misses(), transitions);
    }

    #[test]
    fn element_granularity() {
        let cfg = StencilConfig::grid(5, 4, 3, 2).unwrap().with_policy(CachePolicy::NoWriteAllocate);
        let trace = stencil_trace(&cfg, 1).unwrap();
        let reads: HashSet<u64> = trace.iter().filter(|a| !a.write).map(|a| a.address).collect();
        let level = CacheLevel { size_elements: 1 << 16, beta: 1e-10 };
        assert_eq!(simulate_misses(&cfg, &level, &spec(1)).unwrap(), reads.len() as u64);
        // Star stencil: interior plus six faces of depth l.
        assert_eq!(reads.len(), 5 * 4 * 3 + 2 * 2 * (4 * 3 + 5 * 3 + 5 * 4));
    }

    #[test]
    fn blocked_trace_has_same_accesses() {
        let cfg = StencilConfig::grid(8, 8, 8, 1).unwrap();
        let mut a = stencil_trace(&cfg, 8).unwrap();
        let mut b = stencil_trace(&cfg.clone().with_blocking(4, 2, 8).unwrap(), 8).unwrap();
        assert_ne!(a, b);
        a.sort_by_key(|x| (x.address, x.write));
        b.sort_by_key(|x| (x.address, x.write));
        assert_eq!(a, b);
    }

    #[test]
    fn trace_limit() {
        let cfg = StencilConfig::grid(65, 64, 64, 1).unwrap();
        assert!(matches!(stencil_trace(&cfg, 8), Err(Error::TraceTooLarge { .. })));
    }
}
