//! Difference bound matrices.
//!
//! Entry `(i, j)` bounds `x_i - x_j`, index 0 being the constant-zero
//! reference clock. A bound is packed into an `i64` as `(c << 1) | nonstrict`
//! so that the integer order is the bound order; `INF` is `i64::MAX`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Raw = i64;

pub const INF: Raw = i64::MAX;
pub const LE_ZERO: Raw = 1;
pub const LT_ZERO: Raw = 0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DbmError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

pub fn bound(c: i64, strict: bool) -> Raw {
    (c << 1) | i64::from(!strict)
}

pub fn bound_value(b: Raw) -> Option<(i64, bool)> {
    (b != INF).then_some((b >> 1, b & 1 == 0))
}

pub fn add(a: Raw, b: Raw) -> Raw {
    if a == INF || b == INF {
        INF
    } else {
        (((a >> 1) + (b >> 1)) << 1) | (a & b & 1)
    }
}

/// Complement of `x_i - x_j ≺ c`, expressed as a bound on `x_j - x_i`.
pub fn negate(b: Raw) -> Raw {
    debug_assert!(b != INF);
    ((-(b >> 1)) << 1) | ((b & 1) ^ 1)
}

/// Atomic constraint `x_i - x_j ≺ c` in DBM coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DbmConstraint {
    pub i: usize,
    pub j: usize,
    pub bound: Raw,
}

impl DbmConstraint {
    pub fn negated(&self) -> DbmConstraint {
        DbmConstraint {
            i: self.j,
            j: self.i,
            bound: negate(self.bound),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Zone {
    dim: usize,
    d: Vec<Raw>,
}

impl Zone {
    /// All clocks equal to zero.
    pub fn zero(clocks: usize) -> Zone {
        let dim = clocks + 1;
        Zone {
            dim,
            d: vec![LE_ZERO; dim * dim],
        }
    }

    /// All non-negative valuations.
    pub fn universe(clocks: usize) -> Zone {
        let dim = clocks + 1;
        let mut d = vec![INF; dim * dim];
        for k in 0..dim {
            d[k * dim + k] = LE_ZERO;
            d[k] = LE_ZERO;
        }
        Zone { dim, d }
    }

    pub fn clocks(&self) -> usize {
        self.dim - 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> Raw {
        self.d[i * self.dim + j]
    }

    fn set(&mut self, i: usize, j: usize, b: Raw) {
        self.d[i * self.dim + j] = b;
    }

    /// Sets a raw entry without re-closing; follow with [`Zone::canonicalize`].
    pub fn with_entry(mut self, i: usize, j: usize, b: Raw) -> Zone {
        self.set(i, j, b);
        self
    }

    pub fn is_empty(&self) -> bool {
        (0..self.dim).any(|k| self.get(k, k) < LE_ZERO)
    }

    /// All-pairs shortest-path closure.
    pub fn canonicalize(&self) -> Zone {
        let mut z = self.clone();
        z.close();
        z
    }

    fn close(&mut self) {
        let n = self.dim;
        for k in 0..n {
            for i in 0..n {
                let dik = self.get(i, k);
                if dik == INF {
                    continue;
                }
                for j in 0..n {
                    let via = add(dik, self.get(k, j));
                    if via < self.get(i, j) {
                        self.set(i, j, via);
                    }
                }
            }
            if self.get(k, k) < LE_ZERO {
                self.mark_empty();
                return;
            }
        }
    }

    fn mark_empty(&mut self) {
        self.set(0, 0, LT_ZERO);
    }

    /// Delay: removes upper bounds relative to the reference clock.
    pub fn up(&self) -> Zone {
        let mut z = self.clone();
        if z.is_empty() {
            return z;
        }
        for i in 1..z.dim {
            z.set(i, 0, INF);
        }
        z
    }

    /// Sets each listed clock (1-based DBM index) to zero.
    pub fn reset(&self, clocks: &[usize]) -> Zone {
        let mut z = self.clone();
        if z.is_empty() {
            return z;
        }
        for &x in clocks {
            for j in 0..z.dim {
                z.set(x, j, z.get(0, j));
                z.set(j, x, z.get(j, 0));
            }
            z.set(x, x, LE_ZERO);
        }
        z
    }

    /// Conjoins one constraint and re-closes.
    pub fn intersect(&self, c: &DbmConstraint) -> Result<Zone, DbmError> {
        if c.i >= self.dim || c.j >= self.dim {
            return Err(DbmError::DimensionMismatch(c.i.max(c.j) + 1, self.dim));
        }
        let mut z = self.clone();
        z.constrain(c);
        Ok(z)
    }

    pub fn intersect_all(&self, cs: &[DbmConstraint]) -> Result<Zone, DbmError> {
        let mut z = self.clone();
        for c in cs {
            if c.i >= self.dim || c.j >= self.dim {
                return Err(DbmError::DimensionMismatch(c.i.max(c.j) + 1, self.dim));
            }
            z.constrain(c);
            if z.is_empty() {
                break;
            }
        }
        Ok(z)
    }

    fn constrain(&mut self, c: &DbmConstraint) {
        if self.is_empty() || c.bound >= self.get(c.i, c.j) {
            return;
        }
        if add(c.bound, self.get(c.j, c.i)) < LE_ZERO {
            self.mark_empty();
            return;
        }
        self.set(c.i, c.j, c.bound);
        // incremental closure through the tightened edge
        let n = self.dim;
        for a in 0..n {
            let ai = self.get(a, c.i);
            if ai == INF {
                continue;
            }
            let to_j = add(ai, c.bound);
            for b in 0..n {
                let via = add(to_j, self.get(c.j, b));
                if via < self.get(a, b) {
                    self.set(a, b, via);
                }
            }
        }
        if (0..n).any(|k| self.get(k, k) < LE_ZERO) {
            self.mark_empty();
        }
    }

    /// Conjunction of two zones of equal dimension.
    pub fn intersect_zone(&self, other: &Zone) -> Result<Zone, DbmError> {
        if self.dim != other.dim {
            return Err(DbmError::DimensionMismatch(self.dim, other.dim));
        }
        let mut z = self.clone();
        for i in 0..self.dim {
            for j in 0..self.dim {
                if other.get(i, j) < z.get(i, j) {
                    z.set(i, j, other.get(i, j));
                }
            }
        }
        z.close();
        Ok(z)
    }

    /// `other ⊆ self` for canonical zones.
    pub fn includes(&self, other: &Zone) -> bool {
        if other.is_empty() {
            return true;
        }
        if self.is_empty() || self.dim != other.dim {
            return false;
        }
        self.d.iter().zip(&other.d).all(|(a, b)| b <= a)
    }

    /// Classic k-normalisation: bounds above `k` become infinite, lower
    /// bounds below `-k` are relaxed to `< -k`.
    pub fn normalize(&self, k: i64) -> Zone {
        if self.is_empty() {
            return self.clone();
        }
        let mut z = self.clone();
        let upper = bound(k, false);
        let lower = bound(-k, true);
        for i in 0..z.dim {
            for j in 0..z.dim {
                if i == j {
                    continue;
                }
                let b = z.get(i, j);
                if b != INF && b > upper {
                    z.set(i, j, INF);
                } else if b < lower {
                    z.set(i, j, lower);
                }
            }
        }
        z.close();
        z
    }

    /// Membership test for a valuation given as integers scaled by `scale`.
    pub fn contains_scaled(&self, vals: &[i64], scale: i64) -> bool {
        if self.is_empty() {
            return false;
        }
        let v = |k: usize| if k == 0 { 0 } else { vals[k - 1] };
        for i in 0..self.dim {
            for j in 0..self.dim {
                let b = self.get(i, j);
                if let Some((c, strict)) = bound_value(b) {
                    let diff = v(i) - v(j);
                    let lim = c * scale;
                    if diff > lim || (strict && diff == lim) {
                        return false;
                    }
                }
            }
        }
        true
    }
}

fn fmt_bound(b: Raw) -> String {
    match bound_value(b) {
        None => "inf".into(),
        Some((c, true)) => format!("<{c}"),
        Some((c, false)) => format!("<={c}"),
    }
}

impl fmt::Debug for Zone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Zone[{}]", self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim).map(|j| fmt_bound(self.get(i, j))).collect();
            writeln!(f, "  {}", row.join("\t"))?;
        }
        Ok(())
    }
}

impl Zone {
    /// Human-readable constraint list using the given clock names.
    pub fn describe(&self, names: &[String]) -> String {
        if self.is_empty() {
            return "false".into();
        }
        let name = |k: usize| if k == 0 { "0".to_string() } else { names[k - 1].clone() };
        let mut parts = Vec::new();
        for i in 1..self.dim {
            if let Some((c, s)) = bound_value(self.get(0, i)) {
                if c != 0 || s {
                    parts.push(format!("{} {} {}", name(i), if s { ">" } else { ">=" }, -c));
                }
            }
            if let Some((c, s)) = bound_value(self.get(i, 0)) {
                parts.push(format!("{} {} {}", name(i), if s { "<" } else { "<=" }, c));
            }
            for j in 1..self.dim {
                if i == j {
                    continue;
                }
                if let Some((c, s)) = bound_value(self.get(i, j)) {
                    parts.push(format!(
                        "{} - {} {} {}",
                        name(i),
                        name(j),
                        if s { "<" } else { "<=" },
                        c
                    ));
                }
            }
        }
        if parts.is_empty() {
            "true".into()
        } else {
            parts.join(" & ")
        }
    }
}
