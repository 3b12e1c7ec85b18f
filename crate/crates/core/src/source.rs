// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Time factors `h(t) ≥ 0` of the nonlinearity, with exact primitives.

use std::fmt;
use std::str::FromStr;

use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SourceError {
    #[error("invalid source: {0}")]
    InvalidParameter(String),
}

/// `h(t)` as one of a closed set of families.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    /// `h(t) = h0`.
    Constant { h0: f64 },
    /// `h(t) = e^{αt}`.
    Exponential { alpha: f64 },
    /// `h(t) = t^β`, `β ≥ 0`.
    Power { beta: f64 },
    /// Piecewise linear through `(t_i, h_i)`, first node at `t = 0`,
    /// constant after the last node.
    Table { nodes: Vec<(f64, f64)> },
}

impl SourceSpec {
    pub fn constant(h0: f64) -> Result<Self, SourceError> {
        let s = SourceSpec::Constant { h0 };
        s.validate()?;
        Ok(s)
    }

    pub fn exponential(alpha: f64) -> Result<Self, SourceError> {
        let s = SourceSpec::Exponential { alpha };
        s.validate()?;
        Ok(s)
    }

    pub fn power(beta: f64) -> Result<Self, SourceError> {
        let s = SourceSpec::Power { beta };
        s.validate()?;
        Ok(s)
    }

    pub fn table(nodes: Vec<(f64, f64)>) -> Result<Self, SourceError> {
        let s = SourceSpec::Table { nodes };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SourceError> {
        let bad = |m: String| Err(SourceError::InvalidParameter(m));
        match self {
            SourceSpec::Constant { h0 } => {
                if !(*h0 >= 0.0 && h0.is_finite()) {
                    return bad(format!("constant h0 must be finite and ≥ 0, got {h0}"));
                }
            }
            SourceSpec::Exponential { alpha } => {
                if !alpha.is_finite() {
                    return bad(format!("alpha must be finite, got {alpha}"));
                }
            }
            SourceSpec::Power { beta } => {
                if !(*beta >= 0.0 && beta.is_finite()) {
                    return bad(format!("power beta must be finite and ≥ 0, got {beta}"));
                }
            }
            SourceSpec::Table { nodes } => {
                if nodes.is_empty() {
                    return bad("table needs at least one node".into());
                }
                if nodes[0].0 != 0.0 {
                    return bad(format!("table must start at t = 0, starts at {}", nodes[0].0));
                }
                if nodes.windows(2).any(|w| !(w[1].0 > w[0].0)) {
                    return bad("table times must be strictly increasing".into());
                }
                if let Some(&(t, v)) = nodes.iter().find(|(t, v)| !(*v >= 0.0 && v.is_finite() && t.is_finite())) {
                    return bad(format!("table value {v} at t = {t} must be finite and ≥ 0"));
                }
            }
        }
        Ok(())
    }

    /// `h(t)` for `t ≥ 0`.
    pub fn h(&self, t: f64) -> f64 {
        match self {
            SourceSpec::Constant { h0 } => *h0,
            SourceSpec::Exponential { alpha } => (alpha * t).exp(),
            SourceSpec::Power { beta } => {
                if *beta == 0.0 {
                    1.0
                } else {
                    t.max(0.0).powf(*beta)
                }
            }
            SourceSpec::Table { nodes } => {
                let k = nodes.partition_point(|&(s, _)| s <= t);
                if k == 0 {
                    return nodes[0].1;
                }
                if k == nodes.len() {
                    return nodes[k - 1].1;
                }
                let (t0, h0) = nodes[k - 1];
                let (t1, h1) = nodes[k];
                h0 + (h1 - h0) * (t - t0) / (t1 - t0)
            }
        }
    }

    /// `H(t) = ∫₀ᵗ h`.
    pub fn cumulative(&self, t: f64) -> f64 {
        self.integral(0.0, t)
    }

    /// `∫_a^b h` for `0 ≤ a ≤ b`, without cancellation for short intervals.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        match self {
            SourceSpec::Constant { h0 } => h0 * (b - a),
            SourceSpec::Exponential { alpha } => {
                if *alpha == 0.0 {
                    b - a
                } else {
                    (alpha * a).exp() * (alpha * (b - a)).exp_m1() / alpha
                }
            }
            SourceSpec::Power { beta } => {
                let p = beta + 1.0;
                if a == 0.0 {
                    b.powf(p) / p
                } else {
                    a.powf(p) * (p * ((b - a) / a).ln_1p()).exp_m1() / p
                }
            }
            SourceSpec::Table { nodes } => {
                let mut total = 0.0;
                let mut s = a;
                for w in nodes.windows(2) {
                    let (t0, t1) = (w[0].0, w[1].0);
                    if t1 <= s {
                        continue;
                    }
                    if t0 >= b {
                        break;
                    }
                    let (lo, hi) = (s.max(t0), b.min(t1));
                    total += 0.5 * (self.h(lo) + self.h(hi)) * (hi - lo);
                    s = hi;
                }
                let last = nodes[nodes.len() - 1];
                if b > last.0 {
                    total += last.1 * (b - s.max(last.0));
                }
                total
            }
        }
    }

    /// The `b ≥ a` with `∫_a^b h = budget`, or `+∞` when the primitive never
    /// reaches the budget.
    pub fn advance(&self, a: f64, budget: f64) -> f64 {
        if budget <= 0.0 {
            return a;
        }
        match self {
            SourceSpec::Constant { h0 } => {
                if *h0 == 0.0 {
                    f64::INFINITY
                } else {
                    a + budget / h0
                }
            }
            SourceSpec::Exponential { alpha } => {
                if *alpha == 0.0 {
                    return a + budget;
                }
                let arg = alpha * budget * (-alpha * a).exp();
                if arg <= -1.0 {
                    f64::INFINITY
                } else {
                    a + arg.ln_1p() / alpha
                }
            }
            SourceSpec::Power { beta } => {
                let p = beta + 1.0;
                if a == 0.0 {
                    (p * budget).powf(1.0 / p)
                } else {
                    a * ((p * budget / a.powf(p)).ln_1p() / p).exp()
                }
            }
            SourceSpec::Table { nodes } => {
                let mut remaining = budget;
                let mut s = a;
                for w in nodes.windows(2) {
                    let (t0, t1) = (w[0].0, w[1].0);
                    if t1 <= s {
                        continue;
                    }
                    let lo = s.max(t0);
                    let piece = self.integral(lo, t1);
                    if piece >= remaining {
                        // Solve h(lo)τ + ½ slope τ² = remaining on this segment.
                        let hl = self.h(lo);
                        let slope = (w[1].1 - w[0].1) / (t1 - t0);
                        let tau = if slope.abs() < 1e-300 {
                            remaining / hl
                        } else {
                            let disc = (hl * hl + 2.0 * slope * remaining).max(0.0);
                            2.0 * remaining / (hl + disc.sqrt())
                        };
                        return (lo + tau).min(t1);
                    }
                    remaining -= piece;
                    s = t1;
                }
                let last = nodes[nodes.len() - 1];
                if last.1 == 0.0 {
                    f64::INFINITY
                } else {
                    s.max(last.0) + remaining / last.1
                }
            }
        }
    }

    /// `∫₀^∞ h(t) e^{−ct} dt`, `+∞` when it diverges.
    pub fn discounted_total(&self, c: f64) -> f64 {
        match self {
            SourceSpec::Constant { h0 } => {
                if *h0 == 0.0 {
                    0.0
                } else if c > 0.0 {
                    h0 / c
                } else {
                    f64::INFINITY
                }
            }
            SourceSpec::Exponential { alpha } => {
                if *alpha < c {
                    1.0 / (c - alpha)
                } else {
                    f64::INFINITY
                }
            }
            SourceSpec::Power { beta } => {
                if c > 0.0 {
                    (ln_gamma(beta + 1.0) - (beta + 1.0) * c.ln()).exp()
                } else {
                    f64::INFINITY
                }
            }
            SourceSpec::Table { nodes } => {
                let last = nodes[nodes.len() - 1];
                if c <= 0.0 {
                    return if nodes.iter().all(|n| n.1 == 0.0) { 0.0 } else { f64::INFINITY };
                }
                // ∫ (v + s(t − t0)) e^{−ct} dt has primitive
                // −e^{−ct} [(v + s(t − t0))/c + s/c²].
                let mut total = 0.0;
                for w in nodes.windows(2) {
                    let ((t0, v0), (t1, v1)) = (w[0], w[1]);
                    let s = (v1 - v0) / (t1 - t0);
                    let prim = |t: f64| -(-c * t).exp() * ((v0 + s * (t - t0)) / c + s / (c * c));
                    total += prim(t1) - prim(t0);
                }
                total + last.1 * (-c * last.0).exp() / c
            }
        }
    }

    /// Whether the family has a closed-form `H` (all do) and a closed-form
    /// discounted total (all but the power family, which goes through `Γ`).
    pub fn closed_form_h_tilde(&self) -> bool {
        !matches!(self, SourceSpec::Power { .. })
    }
}

impl fmt::Display for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceSpec::Constant { h0 } => write!(f, "constant:h0={h0}"),
            SourceSpec::Exponential { alpha } => write!(f, "exponential:alpha={alpha}"),
            SourceSpec::Power { beta } => write!(f, "power:beta={beta}"),
            SourceSpec::Table { nodes } => {
                write!(f, "table:")?;
                for (i, (t, v)) in nodes.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{t}/{v}")?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for SourceSpec {
    type Err = SourceError;

    /// `constant:h0=1`, `exponential:alpha=0.3`, `power:beta=2`,
    /// `table:0/1;2/3;5/3`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |m: String| SourceError::InvalidParameter(m);
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        let param = |key: &str| -> Result<f64, SourceError> {
            let (k, v) = rest
                .split_once('=')
                .ok_or_else(|| bad(format!("'{kind}' needs {key}=<value>")))?;
            if k.trim() != key {
                return Err(bad(format!("'{kind}' takes '{key}', got '{}'", k.trim())));
            }
            v.trim().parse().map_err(|e| bad(format!("{key}: {e}")))
        };
        match kind.trim() {
            "constant" => SourceSpec::constant(param("h0")?),
            "exponential" | "exp" => SourceSpec::exponential(param("alpha")?),
            "power" => SourceSpec::power(param("beta")?),
            "table" => {
                let mut nodes = Vec::new();
                for pair in rest.split(';').map(str::trim).filter(|p| !p.is_empty()) {
                    let (t, v) = pair
                        .split_once('/')
                        .ok_or_else(|| bad(format!("table node '{pair}' is not t/h")))?;
                    let t: f64 = t.trim().parse().map_err(|e| bad(format!("table time: {e}")))?;
                    let v: f64 = v.trim().parse().map_err(|e| bad(format!("table value: {e}")))?;
                    nodes.push((t, v));
                }
                SourceSpec::table(nodes)
            }
            other => Err(bad(format!("unknown source family '{other}'"))),
        }
    }
}
