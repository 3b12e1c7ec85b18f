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

//! Embedded explicit Runge–Kutta pairs with sup-norm error control.
//!
//! The error norm is `max_i |e_i| / (atol + rtol · max(‖y‖∞, ‖y_new‖∞))`.
//! With `atol = 0` the controller is invariant under rescaling of `y`, which
//! matters for fields that decay by tens of orders of magnitude.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdeError {
    #[error("step size underflow at t = {t} (h = {h})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },
    #[error("step budget of {steps} exhausted at t = {t}")]
    MaxSteps { t: f64, steps: usize },
}

/// Butcher tableau of an embedded pair. `err` holds `b − b̂`.
#[derive(Debug)]
pub struct Tableau {
    pub name: &'static str,
    pub c: &'static [f64],
    pub a: &'static [&'static [f64]],
    pub b: &'static [f64],
    pub err: &'static [f64],
    /// Order of the embedded (lower-order) solution plus one; drives the
    /// step-size exponent.
    pub error_order: i32,
    /// Extent of the stability region along the negative real axis.
    pub stability_radius: f64,
    /// Polynomial degree of one step in `hA` for a linear problem `y' = Ay`.
    pub degree: usize,
}

/// Dormand–Prince 5(4).
pub const DORMAND_PRINCE_54: Tableau = Tableau {
    name: "dormand-prince-5(4)",
    c: &[0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0],
    a: &[
        &[],
        &[1.0 / 5.0],
        &[3.0 / 40.0, 9.0 / 40.0],
        &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
        &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
        &[
            9017.0 / 3168.0,
            -355.0 / 33.0,
            46732.0 / 5247.0,
            49.0 / 176.0,
            -5103.0 / 18656.0,
        ],
        &[
            35.0 / 384.0,
            0.0,
            500.0 / 1113.0,
            125.0 / 192.0,
            -2187.0 / 6784.0,
            11.0 / 84.0,
        ],
    ],
    b: &[
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
        0.0,
    ],
    err: &[
        71.0 / 57600.0,
        0.0,
        -71.0 / 16695.0,
        71.0 / 1920.0,
        -17253.0 / 339200.0,
        22.0 / 525.0,
        -1.0 / 40.0,
    ],
    error_order: 5,
    stability_radius: 3.3,
    degree: 6,
};

/// Runge–Kutta–Fehlberg 4(5), advancing with the fifth-order solution.
pub const FEHLBERG_45: Tableau = Tableau {
    name: "fehlberg-4(5)",
    c: &[0.0, 1.0 / 4.0, 3.0 / 8.0, 12.0 / 13.0, 1.0, 1.0 / 2.0],
    a: &[
        &[],
        &[1.0 / 4.0],
        &[3.0 / 32.0, 9.0 / 32.0],
        &[1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0],
        &[439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0],
        &[-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0],
    ],
    b: &[
        16.0 / 135.0,
        0.0,
        6656.0 / 12825.0,
        28561.0 / 56430.0,
        -9.0 / 50.0,
        2.0 / 55.0,
    ],
    err: &[
        1.0 / 360.0,
        0.0,
        -128.0 / 4275.0,
        -2197.0 / 75240.0,
        1.0 / 50.0,
        2.0 / 55.0,
    ],
    error_order: 5,
    stability_radius: 3.0,
    degree: 6,
};

/// Step-size policy for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    pub h_min: f64,
    /// Lower bound on the number of steps across the interval.
    pub min_steps: usize,
    pub max_steps: usize,
}

impl StepControl {
    pub fn new(rtol: f64) -> Self {
        StepControl {
            rtol,
            atol: 0.0,
            h_max: f64::INFINITY,
            h_min: 0.0,
            min_steps: 1,
            max_steps: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IntegrationStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Last accepted step, a good first guess for a continuation.
    pub last_h: f64,
}

/// Workspace for single embedded steps.
pub struct EmbeddedRk {
    tab: &'static Tableau,
    k: Vec<Vec<f64>>,
    stage: Vec<f64>,
    err: Vec<f64>,
}

impl EmbeddedRk {
    pub fn new(tab: &'static Tableau, n: usize) -> Self {
        EmbeddedRk {
            tab,
            k: vec![vec![0.0; n]; tab.c.len()],
            stage: vec![0.0; n],
            err: vec![0.0; n],
        }
    }

    pub fn tableau(&self) -> &'static Tableau {
        self.tab
    }

    /// One trial step from `(t, y)` with size `h`; writes the candidate into
    /// `y_out` and returns the scaled error norm.
    pub fn attempt<F>(
        &mut self,
        rhs: &mut F,
        t: f64,
        y: &[f64],
        h: f64,
        y_out: &mut [f64],
        rtol: f64,
        atol: f64,
    ) -> f64
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        let tab = self.tab;
        let n = y.len();
        for s in 0..tab.c.len() {
            self.stage.copy_from_slice(y);
            for (j, &a) in tab.a[s].iter().enumerate() {
                if a != 0.0 {
                    let kj = &self.k[j];
                    for i in 0..n {
                        self.stage[i] += h * a * kj[i];
                    }
                }
            }
            rhs(t + tab.c[s] * h, &self.stage, &mut self.k[s]);
        }
        y_out.copy_from_slice(y);
        self.err.iter_mut().for_each(|e| *e = 0.0);
        for (s, kv) in self.k.iter().enumerate() {
            let (b, e) = (tab.b[s], tab.err[s]);
            for i in 0..n {
                if b != 0.0 {
                    y_out[i] += h * b * kv[i];
                }
                if e != 0.0 {
                    self.err[i] += h * e * kv[i];
                }
            }
        }
        let scale = sup(y).max(sup(y_out));
        let emax = sup(&self.err);
        if emax == 0.0 {
            return 0.0;
        }
        let denom = atol + rtol * scale;
        if !emax.is_finite() || !scale.is_finite() {
            return f64::INFINITY;
        }
        if denom == 0.0 {
            return f64::INFINITY;
        }
        emax / denom
    }

    /// Step-size multiplier for a given error norm.
    pub fn factor(&self, err: f64) -> f64 {
        if err == 0.0 {
            return 5.0;
        }
        (0.9 * err.powf(-1.0 / self.tab.error_order as f64)).clamp(0.2, 5.0)
    }
}

pub fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

/// Integrates `y' = rhs(t, y)` from `t0` to `t1`, overwriting `y`.
pub fn integrate<F>(
    tab: &'static Tableau,
    mut rhs: F,
    t0: f64,
    t1: f64,
    y: &mut [f64],
    ctl: &StepControl,
    h0: Option<f64>,
) -> Result<IntegrationStats, OdeError>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    let mut stats = IntegrationStats::default();
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok(stats);
    }
    let n = y.len();
    let mut rk = EmbeddedRk::new(tab, n);
    let mut y_new = vec![0.0; n];
    let h_cap = ctl.h_max.min(span / ctl.min_steps.max(1) as f64);
    let mut h = h0.unwrap_or(span).min(h_cap);
    let mut t = t0;
    while t < t1 {
        if stats.accepted + stats.rejected >= ctl.max_steps {
            return Err(OdeError::MaxSteps {
                t,
                steps: ctl.max_steps,
            });
        }
        let last = t + h >= t1 || (t1 - (t + h)) < 1e-12 * h;
        let step = if last { t1 - t } else { h };
        let err = rk.attempt(&mut rhs, t, y, step, &mut y_new, ctl.rtol, ctl.atol);
        if err <= 1.0 {
            if y_new.iter().any(|v| !v.is_finite()) {
                return Err(OdeError::NonFinite { t: t + step });
            }
            y.copy_from_slice(&y_new);
            t = if last { t1 } else { t + step };
            stats.accepted += 1;
            stats.last_h = step;
            h = (step * rk.factor(err)).min(h_cap);
            if last {
                break;
            }
        } else {
            stats.rejected += 1;
            h = step * rk.factor(err);
            if h < ctl.h_min || h <= f64::EPSILON * t.abs().max(1e-300) {
                return Err(OdeError::StepUnderflow { t, h });
            }
        }
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_order_conditions(tab: &Tableau) {
        let s = tab.c.len();
        let bsum: f64 = tab.b.iter().sum();
        assert!((bsum - 1.0).abs() < 1e-14, "{}", tab.name);
        let esum: f64 = tab.err.iter().sum();
        assert!(esum.abs() < 1e-14, "{}", tab.name);
        for i in 0..s {
            let row: f64 = tab.a[i].iter().sum();
            assert!((row - tab.c[i]).abs() < 1e-14, "{} row {i}", tab.name);
        }
        // Σ b c^k = 1/(k+1) for k < 5
        for k in 0..5 {
            let v: f64 = (0..s).map(|i| tab.b[i] * tab.c[i].powi(k)).sum();
            assert!((v - 1.0 / (k as f64 + 1.0)).abs() < 1e-13, "{} k={k}", tab.name);
        }
    }

    #[test]
    fn tableaux_satisfy_quadrature_conditions() {
        check_order_conditions(&DORMAND_PRINCE_54);
        check_order_conditions(&FEHLBERG_45);
    }

    #[test]
    fn exponential_decay() {
        for tab in [&DORMAND_PRINCE_54, &FEHLBERG_45] {
            let mut y = [1.0, 2.0];
            let ctl = StepControl::new(1e-12);
            integrate(
                tab,
                |_, y: &[f64], dy: &mut [f64]| {
                    dy[0] = -y[0];
                    dy[1] = -3.0 * y[1];
                },
                0.0,
                2.0,
                &mut y,
                &ctl,
                None,
            )
            .unwrap();
            assert!((y[0] - (-2.0f64).exp()).abs() < 1e-11);
            assert!((y[1] - 2.0 * (-6.0f64).exp()).abs() < 1e-11);
        }
    }

    #[test]
    fn riccati_close_to_pole() {
        let mut y = [1.0];
        let ctl = StepControl::new(1e-12);
        integrate(
            &FEHLBERG_45,
            |_, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0],
            0.0,
            0.99,
            &mut y,
            &ctl,
            None,
        )
        .unwrap();
        assert!((y[0] / 100.0 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zero_span_is_a_no_op() {
        let mut y = [3.0];
        let stats = integrate(
            &DORMAND_PRINCE_54,
            |_, _: &[f64], dy: &mut [f64]| dy[0] = 1.0,
            1.0,
            1.0,
            &mut y,
            &StepControl::new(1e-8),
            None,
        )
        .unwrap();
        assert_eq!(y, [3.0]);
        assert_eq!(stats.accepted, 0);
    }
}
