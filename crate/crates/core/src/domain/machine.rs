//! Machine description shared by the analytical models.
//!
//! Cache sizes are held in elements. The on-disk form carries bytes plus an
//! `element_bytes` factor that is applied once at load time.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One cache level, L1 outward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheLevel {
    /// Capacity in elements.
    pub size_elements: u64,
    /// Seconds per element for transfers served by this level.
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MachineFields")]
pub struct MachineSpec {
    cache_levels: Vec<CacheLevel>,
    beta_mem: f64,
    t_c: f64,
    line_elements: u64,
}

impl MachineSpec {
    /// Builds a validated spec. `line_elements` is `W`, the number of
    /// elements per cacheline.
    pub fn new(
        cache_levels: Vec<CacheLevel>,
        beta_mem: f64,
        t_c: f64,
        line_elements: u64,
    ) -> Result<Self> {
        let spec = MachineSpec {
            cache_levels,
            beta_mem,
            t_c,
            line_elements,
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.line_elements < 1 {
            return Err(Error::spec("W", "W must be at least 1"));
        }
        if !(self.t_c.is_finite() && self.t_c > 0.0) {
            return Err(Error::spec("t_c", "t_c must be positive"));
        }
        if !(self.beta_mem.is_finite() && self.beta_mem > 0.0) {
            return Err(Error::spec("beta_mem", "beta_mem must be positive"));
        }
        if self.cache_levels.is_empty() {
            return Err(Error::spec(
                "cache_levels",
                "at least one cache level is required",
            ));
        }
        for (i, level) in self.cache_levels.iter().enumerate() {
            let field = format!("cache_levels[{i}]");
            if !(level.beta.is_finite() && level.beta > 0.0) {
                return Err(Error::spec(&format!("{field}.beta"), "beta must be positive"));
            }
            if level.size_elements < self.line_elements {
                return Err(Error::spec(
                    &format!("{field}.size"),
                    "cache must hold at least one line (size_elements >= W)",
                ));
            }
            if i > 0 && level.size_elements <= self.cache_levels[i - 1].size_elements {
                return Err(Error::spec(&format!("{field}.size"), "cache sizes must increase"));
            }
        }
        Ok(())
    }

    pub fn cache_levels(&self) -> &[CacheLevel] {
        &self.cache_levels
    }

    pub fn level(&self, index: usize) -> Option<&CacheLevel> {
        self.cache_levels.get(index)
    }

    /// Outermost cache level, the "fast memory" of single-cache models.
    pub fn last_level(&self) -> &CacheLevel {
        self.cache_levels
            .last()
            .expect("validated spec has at least one level")
    }

    pub fn beta_mem(&self) -> f64 {
        self.beta_mem
    }

    pub fn t_c(&self) -> f64 {
        self.t_c
    }

    /// Elements per cacheline (`W`).
    pub fn line_elements(&self) -> u64 {
        self.line_elements
    }

    /// Copy with every transfer cost multiplied by `factor` and `t_c` by
    /// `flop_factor`.
    pub fn scaled(&self, factor: f64, flop_factor: f64) -> Result<Self> {
        let levels = self
            .cache_levels
            .iter()
            .map(|l| CacheLevel {
                size_elements: l.size_elements,
                beta: l.beta * factor,
            })
            .collect();
        MachineSpec::new(
            levels,
            self.beta_mem * factor,
            self.t_c * flop_factor,
            self.line_elements,
        )
    }

    /// Parses the on-disk JSON form.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let raw: RawMachineSpec = serde_json::from_str(text)?;
        raw.into_spec()
    }

    /// On-disk JSON form, the inverse of [`MachineSpec::from_json_str`]
    /// for `element_bytes`.
    pub fn to_file_json(&self, element_bytes: u64) -> serde_json::Value {
        serde_json::json!({
            "element_bytes": element_bytes,
            "W": self.line_elements,
            "t_c": self.t_c,
            "beta_mem": self.beta_mem,
            "cache_levels": self.cache_levels.iter().map(|l| serde_json::json!({
                "size_bytes": l.size_elements * element_bytes,
                "beta": l.beta,
            })).collect::<Vec<_>>(),
        })
    }
}

pub fn load_machine_spec(path: impl AsRef<Path>) -> Result<MachineSpec> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    MachineSpec::from_json_str(&text)
}

#[derive(Deserialize)]
struct MachineFields {
    cache_levels: Vec<CacheLevel>,
    beta_mem: f64,
    t_c: f64,
    line_elements: u64,
}

impl TryFrom<MachineFields> for MachineSpec {
    type Error = Error;

    fn try_from(f: MachineFields) -> Result<Self> {
        MachineSpec::new(f.cache_levels, f.beta_mem, f.t_c, f.line_elements)
    }
}

#[derive(Deserialize)]
struct RawLevel {
    size_bytes: Option<f64>,
    beta: Option<f64>,
}

// Fields are optional here so that a missing one is reported by name.
#[derive(Deserialize)]
struct RawMachineSpec {
    element_bytes: Option<f64>,
    #[serde(rename = "W")]
    w: Option<f64>,
    t_c: Option<f64>,
    beta_mem: Option<f64>,
    cache_levels: Option<Vec<RawLevel>>,
}

fn positive_int(value: Option<f64>, field: &str) -> Result<u64> {
    let v = value.ok_or_else(|| Error::spec(field, "missing field"))?;
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::spec(field, format!("{field} must be positive")));
    }
    if v.fract() != 0.0 {
        return Err(Error::spec(field, format!("{field} must be an integer")));
    }
    Ok(v as u64)
}

impl RawMachineSpec {
    fn into_spec(self) -> Result<MachineSpec> {
        let element_bytes = positive_int(self.element_bytes, "element_bytes")?;
        let w = positive_int(self.w, "W")?;
        let t_c = self.t_c.ok_or_else(|| Error::spec("t_c", "missing field"))?;
        let beta_mem = self
            .beta_mem
            .ok_or_else(|| Error::spec("beta_mem", "missing field"))?;
        let raw_levels = self
            .cache_levels
            .ok_or_else(|| Error::spec("cache_levels", "missing field"))?;
        let mut levels = Vec::with_capacity(raw_levels.len());
        for (i, raw) in raw_levels.into_iter().enumerate() {
            let size_field = format!("cache_levels[{i}].size_bytes");
            let bytes = positive_int(raw.size_bytes, &size_field)?;
            let beta = raw
                .beta
                .ok_or_else(|| Error::spec(&format!("cache_levels[{i}].beta"), "missing field"))?;
            levels.push(CacheLevel {
                size_elements: bytes / element_bytes,
                beta,
            });
        }
        MachineSpec::new(levels, beta_mem, t_c, w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn json(l1: u64, l2: u64, t_c: f64) -> String {
        format!(
            r#"{{"element_bytes": 8, "W": 8, "t_c": {t_c}, "beta_mem": 2e-9,
                "cache_levels": [{{"size_bytes": {}, "beta": 2.5e-10}},
                                 {{"size_bytes": {}, "beta": 5e-10}}]}}"#,
            l1 * 8,
            l2 * 8
        )
    }

    #[test]
    fn accepts_valid_spec() {
        let spec = MachineSpec::from_json_str(&json(8192, 262144, 1e-10)).unwrap();
        assert_eq!(spec.cache_levels()[0].size_elements, 8192);
        assert_eq!(spec.last_level().size_elements, 262144);
        assert_eq!(spec.line_elements(), 8);
    }

    #[test]
    fn rejects_decreasing_sizes() {
        let err = MachineSpec::from_json_str(&json(262144, 8192, 1e-10)).unwrap_err();
        assert!(err.to_string().contains("cache sizes must increase"), "{err}");
    }

    #[test]
    fn rejects_zero_flop_time() {
        let err = MachineSpec::from_json_str(&json(8192, 262144, 0.0)).unwrap_err();
        assert!(err.to_string().contains("t_c must be positive"), "{err}");
    }

    #[test]
    fn missing_field_is_named() {
        let err = MachineSpec::from_json_str(
            r#"{"element_bytes": 8, "W": 8, "t_c": 1e-9, "cache_levels": []}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("beta_mem"), "{err}");
    }

    #[test]
    fn file_form_round_trips() {
        let spec = MachineSpec::from_json_str(&json(8192, 262144, 1e-10)).unwrap();
        let again = MachineSpec::from_json_str(&spec.to_file_json(8).to_string()).unwrap();
        assert_eq!(spec, again);
    }
}
