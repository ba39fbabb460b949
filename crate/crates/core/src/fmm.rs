//! Cost model for the two dominant FMM phases, near-field P2P and
//! far-field M2L, on a full oct-tree (uniform particle distribution).
//!
//! Each phase costs `max(flop, mem)`; the phases are summed. The remaining
//! translation kernels (P2M, M2M, L2L, L2P) are not modeled.
//!
//! The memory terms come from the cache-oblivious SpMV miss bound
//! `O(h/L + H/Z^(1/3))` for a cache of `Z` elements and `L`-element lines,
//! where `Z` is the outermost cache level and `L = W`. For P2P the full bound
//! carries read/update terms `4N/L` and the neighbor-list term
//! `b_p2p (N/q)/L` with `b_p2p = 26` interior neighbors; only the dominant
//! `N + N L / (Z^(1/3) q^(2/3))` part is charged. For M2L the bound over
//! `b_t` target and `b_s` source cells with `b_m2l = 189` well-separated
//! sources reduces to `N k^6 / q + N k^2 L / (q Z^(1/3))`.

use serde::{Deserialize, Serialize};

use crate::domain::MachineSpec;
use crate::error::{Error, Result};

/// Average interior neighbor count in the P2P list.
pub const B_P2P: f64 = 26.0;
/// Average well-separated source count in the M2L list.
pub const B_M2L: f64 = 189.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ParticleDistribution {
    #[default]
    Uniform,
    Clustered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FmmConfig {
    /// Total particles `N`.
    pub n: u64,
    /// Particles per leaf cell `q`.
    pub q: u64,
    /// Expansion order `k`.
    pub k: u64,
    /// Feature passthrough only.
    pub threads: u64,
    #[serde(default)]
    pub distribution: ParticleDistribution,
}

impl FmmConfig {
    pub fn new(n: u64, q: u64, k: u64) -> Result<Self> {
        let cfg = FmmConfig {
            n,
            q,
            k,
            threads: 1,
            distribution: ParticleDistribution::Uniform,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.q == 0 || self.threads == 0 {
            return Err(Error::config("FMM N, q and threads must be positive"));
        }
        if self.q > self.n {
            return Err(Error::config(format!("q={} exceeds N={}", self.q, self.n)));
        }
        if self.k < 2 {
            return Err(Error::config(format!("expansion order k={} must be >= 2", self.k)));
        }
        if self.distribution != ParticleDistribution::Uniform {
            return Err(Error::config(
                "only uniform particle distributions are modeled",
            ));
        }
        Ok(())
    }

    fn nf(&self) -> f64 {
        self.n as f64
    }

    fn qf(&self) -> f64 {
        self.q as f64
    }

    fn k6(&self) -> f64 {
        (self.k as f64).powi(6)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FmmCostBreakdown {
    pub t_flop_p2p: f64,
    pub t_mem_p2p: f64,
    pub t_flop_m2l: f64,
    pub t_mem_m2l: f64,
    pub t_p2p: f64,
    pub t_m2l: f64,
    pub t_total: f64,
}

fn cache_terms(spec: &MachineSpec) -> (f64, f64) {
    let line = spec.line_elements() as f64;
    let z_cbrt = (spec.last_level().size_elements as f64).cbrt();
    (line, z_cbrt)
}

/// `27 q N t_c`: 27 neighbor cells of `q` particles for each of `N` targets.
pub fn p2p_flop_time(cfg: &FmmConfig, spec: &MachineSpec) -> f64 {
    27.0 * cfg.qf() * cfg.nf() * spec.t_c()
}

/// `189 (N k^6 / q) t_c` for Cartesian expansions.
pub fn m2l_flop_time(cfg: &FmmConfig, spec: &MachineSpec) -> f64 {
    B_M2L * (cfg.nf() * cfg.k6() / cfg.qf()) * spec.t_c()
}

pub fn p2p_mem_time(cfg: &FmmConfig, spec: &MachineSpec) -> f64 {
    let (line, z_cbrt) = cache_terms(spec);
    let n = cfg.nf();
    n * spec.beta_mem() + (n * line / (z_cbrt * cfg.qf().powf(2.0 / 3.0))) * spec.beta_mem()
}

pub fn m2l_mem_time(cfg: &FmmConfig, spec: &MachineSpec) -> f64 {
    let (line, z_cbrt) = cache_terms(spec);
    let n = cfg.nf();
    let k2 = (cfg.k as f64).powi(2);
    (n * cfg.k6() / cfg.qf()) * spec.beta_mem()
        + (n * k2 * line / (cfg.qf() * z_cbrt)) * spec.beta_mem()
}

pub fn fmm_time(cfg: &FmmConfig, spec: &MachineSpec) -> Result<(f64, FmmCostBreakdown)> {
    cfg.validate()?;
    let t_flop_p2p = p2p_flop_time(cfg, spec);
    let t_mem_p2p = p2p_mem_time(cfg, spec);
    let t_flop_m2l = m2l_flop_time(cfg, spec);
    let t_mem_m2l = m2l_mem_time(cfg, spec);
    let t_p2p = t_flop_p2p.max(t_mem_p2p);
    let t_m2l = t_flop_m2l.max(t_mem_m2l);
    let t_total = t_p2p + t_m2l;
    Ok((
        t_total,
        FmmCostBreakdown {
            t_flop_p2p,
            t_mem_p2p,
            t_flop_m2l,
            t_mem_m2l,
            t_p2p,
            t_m2l,
            t_total,
        },
    ))
}
