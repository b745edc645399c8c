//! Counter-based truncated cylindrical Wiener noise.
//!
//! Each mode of each stream is a Brownian path built by Lévy's midpoint construction on
//! unit cells: the cell total is a standard normal, and the midpoint of every dyadic
//! sub-interval is the bridge mean plus an independent normal scaled by `√(len)/2`.
//! Every normal is drawn from a generator keyed on `(seed, stream, mode, cell, node)`,
//! so the path value at any dyadic time is a pure function of the key and never depends
//! on which other times were queried. Values are kept in fixed point (2⁻⁴⁰ units), which
//! makes increments over adjacent intervals telescope exactly.

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::SplitMix64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// W¹, driving the slow equation.
pub const STREAM_SLOW: u32 = 1;
/// W², driving the fast equation for t ≥ 0.
pub const STREAM_FAST: u32 = 2;
/// Flag marking the independent copy used for negative times (W^{2,1} for the fast stream).
pub const PAST_FLAG: u32 = 1 << 31;

/// Default finest resolution: 2⁻²⁰ time units.
pub const DEFAULT_LEVELS: u32 = 20;

const UNIT: f64 = (1u64 << 40) as f64;

/// Id of the negative-time copy of a stream.
pub fn past_stream_id(stream: u32) -> u32 {
    stream | PAST_FLAG
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSource {
    pub seed: u64,
    pub modes: usize,
    pub stream_id: u32,
    /// Finest cell is `2^-levels` time units.
    pub levels: u32,
}

impl NoiseSource {
    pub fn new(seed: u64, modes: usize, stream_id: u32) -> Self {
        NoiseSource {
            seed,
            modes,
            stream_id,
            levels: DEFAULT_LEVELS,
        }
    }

    pub fn with_levels(mut self, levels: u32) -> Self {
        assert!((1..=40).contains(&levels), "levels must be in 1..=40");
        self.levels = levels;
        self
    }

    pub fn resolution(&self) -> f64 {
        (-(self.levels as f64)).exp2()
    }

    /// Increment of the two-sided process over `[s, t]`, one entry per mode.
    pub fn increment(&self, s: f64, t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.modes];
        self.cursor().increment(s, t, &mut out)?;
        Ok(out)
    }

    /// Stateful reader that caches the dyadic descent between nearby queries.
    pub fn cursor(&self) -> WienerCursor {
        WienerCursor {
            source: *self,
            future: (0..self.modes).map(|_| ModeCursor::default()).collect(),
            past: (0..self.modes).map(|_| ModeCursor::default()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    lo: u64,
    hi: u64,
    vlo: i64,
    vhi: i64,
}

#[derive(Debug, Clone, Default)]
struct ModeCursor {
    cell: Option<i64>,
    stack: Vec<Node>,
}

/// Sequential reader over a [`NoiseSource`]. Results are identical to fresh evaluation.
#[derive(Debug, Clone)]
pub struct WienerCursor {
    source: NoiseSource,
    future: Vec<ModeCursor>,
    past: Vec<ModeCursor>,
}

impl WienerCursor {
    pub fn source(&self) -> &NoiseSource {
        &self.source
    }

    /// Writes `W̄(t) − W̄(s)` into `out`; `W̄(r) = W^{past}(−r)` for `r < 0`.
    pub fn increment(&mut self, s: f64, t: f64, out: &mut [f64]) -> Result<()> {
        if !(s < t) {
            return Err(invalid(format!("wiener increment needs s < t, got [{s}, {t}]")));
        }
        if !(s.is_finite() && t.is_finite()) {
            return Err(invalid("wiener increment bounds must be finite"));
        }
        if out.len() != self.source.modes {
            return Err(invalid("increment buffer length must equal the number of modes"));
        }
        let src = self.source;
        let scale = (src.levels as f64).exp2();
        let index = |r: f64| (r * scale).round() as i64;
        let fut = src.stream_id as u64;
        let pst = past_stream_id(src.stream_id) as u64;
        for (k, o) in out.iter_mut().enumerate() {
            let d = if s >= 0.0 {
                self.future[k].diff(&src, fut, k, index(s), index(t))
            } else if t <= 0.0 {
                -self.past[k].diff(&src, pst, k, index(-t), index(-s))
            } else {
                self.future[k].diff(&src, fut, k, 0, index(t))
                    - self.past[k].diff(&src, pst, k, 0, index(-s))
            };
            *o = d as f64 / UNIT;
        }
        Ok(())
    }
}

impl ModeCursor {
    /// `W(b) − W(a)` in fixed-point units for dyadic indices `0 ≤ a ≤ b`.
    fn diff(&mut self, src: &NoiseSource, stream: u64, mode: usize, a: i64, b: i64) -> i64 {
        debug_assert!(0 <= a && a <= b);
        let levels = src.levels;
        let (ca, ja) = (a >> levels, (a & ((1i64 << levels) - 1)) as u64);
        let (cb, jb) = (b >> levels, (b & ((1i64 << levels) - 1)) as u64);
        if ca == cb {
            let vb = self.value(src, stream, mode, cb, jb);
            let va = self.value(src, stream, mode, ca, ja);
            return vb - va;
        }
        let mut total = cell_total(src, stream, mode, ca) - self.value(src, stream, mode, ca, ja);
        for c in ca + 1..cb {
            total += cell_total(src, stream, mode, c);
        }
        total + self.value(src, stream, mode, cb, jb)
    }

    /// Bridge value at offset `j` (in finest cells) inside `cell`, relative to the cell start.
    fn value(&mut self, src: &NoiseSource, stream: u64, mode: usize, cell: i64, j: u64) -> i64 {
        let full = 1u64 << src.levels;
        if j == 0 {
            return 0;
        }
        if self.cell != Some(cell) {
            self.cell = Some(cell);
            self.stack.clear();
            self.stack.push(Node {
                lo: 0,
                hi: full,
                vlo: 0,
                vhi: cell_total(src, stream, mode, cell),
            });
        }
        while let Some(top) = self.stack.last() {
            if top.lo <= j && j <= top.hi {
                break;
            }
            self.stack.pop();
        }
        let mut node = *self.stack.last().expect("cell root always contains j");
        loop {
            if j == node.lo {
                return node.vlo;
            }
            if j == node.hi {
                return node.vhi;
            }
            let mid = (node.lo + node.hi) / 2;
            let sd = ((node.hi - node.lo) as f64 / full as f64).sqrt() / 2.0;
            let z: f64 = normal(key(src.seed, stream, mode as u64, cell, mid));
            let vmid = ((node.vlo + node.vhi) >> 1) + (sd * z * UNIT).round() as i64;
            node = if j <= mid {
                Node { lo: node.lo, hi: mid, vlo: node.vlo, vhi: vmid }
            } else {
                Node { lo: mid, hi: node.hi, vlo: vmid, vhi: node.vhi }
            };
            self.stack.push(node);
        }
    }
}

fn cell_total(src: &NoiseSource, stream: u64, mode: usize, cell: i64) -> i64 {
    // Node id 0 is never a midpoint, so it is free for the cell total.
    let z: f64 = normal(key(src.seed, stream, mode as u64, cell, 0));
    (z * UNIT).round() as i64
}

#[inline]
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn key(seed: u64, stream: u64, mode: u64, cell: i64, node: u64) -> u64 {
    const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
    let mut h = mix64(seed.wrapping_add(GOLDEN));
    for v in [stream, mode, cell as u64, node] {
        h = mix64(h ^ v.wrapping_mul(GOLDEN).wrapping_add(0x632b_e59b_d9b4_e019));
    }
    h
}

#[inline]
fn normal(key: u64) -> f64 {
    SplitMix64::seed_from_u64(key).sample(StandardNormal)
}

/// Deterministic sub-seed for replica `index` of a family keyed by `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    mix64(mix64(seed ^ 0x5851_f42d_4c95_7f2d).wrapping_add(index))
}
