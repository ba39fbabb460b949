//! Naive order-`l` star stencil on a double-buffered 3-D grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stencil::Blocking;

/// Centre and neighbour weights: `dst = c0 * src + c1 * sum(neighbours)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coefficients {
    pub c0: f64,
    pub c1: f64,
}

impl Default for Coefficients {
    fn default() -> Self {
        Coefficients { c0: 0.5, c1: 1.0 / 12.0 }
    }
}

/// Interior `ni x nj x nk` field with a ghost layer of width `halo`,
/// stored with `i` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    ni: usize,
    nj: usize,
    nk: usize,
    halo: usize,
    data: Vec<f64>,
}

impl Grid {
    pub fn new(ni: usize, nj: usize, nk: usize, halo: usize, value: f64) -> Result<Self> {
        if ni == 0 || nj == 0 || nk == 0 {
            return Err(Error::config("grid dimensions must be positive"));
        }
        let len = (ni + 2 * halo)
            .checked_mul(nj + 2 * halo)
            .and_then(|v| v.checked_mul(nk + 2 * halo))
            .ok_or_else(|| Error::config("grid too large"))?;
        let mut data = Vec::new();
        data.try_reserve_exact(len)
            .map_err(|_| Error::config(format!("cannot allocate {len} grid elements")))?;
        data.resize(len, value);
        Ok(Grid { ni, nj, nk, halo, data })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.ni, self.nj, self.nk)
    }

    pub fn halo(&self) -> usize {
        self.halo
    }

    fn row(&self) -> usize {
        self.ni + 2 * self.halo
    }

    fn plane(&self) -> usize {
        self.row() * (self.nj + 2 * self.halo)
    }

    /// Index of `(i, j, k)` in padded coordinates.
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.row() * (j + (self.nj + 2 * self.halo) * k)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.index(i, j, k);
        self.data[idx] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Fills the interior from `f(i, j, k)` in interior coordinates.
    pub fn fill_interior(&mut self, f: impl Fn(usize, usize, usize) -> f64) {
        let h = self.halo;
        for k in 0..self.nk {
            for j in 0..self.nj {
                for i in 0..self.ni {
                    self.set(i + h, j + h, k + h, f(i, j, k));
                }
            }
        }
    }

    fn same_shape(&self, other: &Grid) -> bool {
        (self.ni, self.nj, self.nk, self.halo) == (other.ni, other.nj, other.nk, other.halo)
    }
}

/// Applies one timestep from `src` into the interior of `dst`. Ghost cells
/// of `dst` are left untouched. With `threads > 1` the interior `k` planes
/// are split into contiguous ranges, one per thread.
pub fn stencil_step(
    src: &Grid,
    dst: &mut Grid,
    order: usize,
    coeffs: Coefficients,
    blocking: Option<Blocking>,
    threads: usize,
) -> Result<()> {
    if !src.same_shape(dst) {
        return Err(Error::config("source and destination grids differ in shape"));
    }
    if order == 0 || order > src.halo {
        return Err(Error::config(format!("stencil order {order} needs a halo of at least {order}, grid has {}", src.halo)));
    }
    let (ti, tj, tk) = match blocking {
        Some(b) => (b.ti as usize, b.tj as usize, b.tk as usize),
        None => (src.ni, src.nj, src.nk),
    };
    if ti == 0 || tj == 0 || tk == 0 {
        return Err(Error::config("block sizes must be positive"));
    }
    let threads = threads.clamp(1, src.nk);
    let plane = src.plane();
    let h = src.halo;
    let interior = &mut dst.data[h * plane..(h + src.nk) * plane];
    let sweep = |k0: usize, k1: usize, out: &mut [f64]| {
        let base = (h + k0) * plane;
        for kb in (k0..k1).step_by(tk) {
            for jb in (0..src.nj).step_by(tj) {
                for ib in (0..src.ni).step_by(ti) {
                    for k in kb..(kb + tk).min(k1) {
                        for j in jb..(jb + tj).min(src.nj) {
                            for i in ib..(ib + ti).min(src.ni) {
                                let c = src.index(i + h, j + h, k + h);
                                out[c - base] = update(&src.data, c, order, src.row(), plane, coeffs);
                            }
                        }
                    }
                }
            }
        }
    };
    if threads == 1 {
        sweep(0, src.nk, interior);
        return Ok(());
    }
    let per = src.nk.div_ceil(threads);
    std::thread::scope(|s| {
        for (n, chunk) in interior.chunks_mut(per * plane).enumerate() {
            let k0 = n * per;
            let k1 = (k0 + per).min(src.nk);
            let sweep = &sweep;
            s.spawn(move || sweep(k0, k1, chunk));
        }
    });
    Ok(())
}

#[inline]
fn update(src: &[f64], c: usize, order: usize, row: usize, plane: usize, coeffs: Coefficients) -> f64 {
    let mut sum = 0.0;
    for d in 1..=order {
        sum += src[c - d] + src[c + d];
        sum += src[c - d * row] + src[c + d * row];
        sum += src[c - d * plane] + src[c + d * plane];
    }
    coeffs.c0 * src[c] + coeffs.c1 * sum
}

/// Runs `timesteps` steps, swapping buffers; returns the final field.
pub fn run(mut a: Grid, order: usize, coeffs: Coefficients, blocking: Option<Blocking>, threads: usize, timesteps: usize) -> Result<Grid> {
    let mut b = a.clone();
    for _ in 0..timesteps {
        stencil_step(&a, &mut b, order, coeffs, blocking, threads)?;
        std::mem::swap(&mut a, &mut b);
    }
    Ok(a)
}
