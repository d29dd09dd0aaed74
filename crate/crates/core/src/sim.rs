//! Unforced van der Pol oscillator and the adaptive integrator that produces
//! the training trajectory.
//!
//! The second-order equation `x'' - mu (1 - x^2) x' + x = 0` is integrated as
//! the first-order system `(x, v)' = (v, mu (1 - x^2) v - x)` with an embedded
//! Dormand–Prince 5(4) pair. Grid values come from the pair's continuous
//! extension, so the uniform output grid never constrains the step size.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-hand side of the first-order van der Pol system.
#[inline]
pub fn vdp_rhs(state: [f64; 2], mu: f64) -> [f64; 2] {
    let [x, v] = state;
    [v, mu * (1.0 - x * x) * v - x]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VdpConfig {
    pub mu: f64,
    /// `(x0, v0)`.
    pub initial: [f64; 2],
    pub t_end: f64,
    pub n_points: usize,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for VdpConfig {
    fn default() -> Self {
        Self {
            mu: 1.0,
            initial: [1.0, 0.0],
            t_end: 30.0,
            n_points: 3000,
            rtol: 1e-6,
            atol: 1e-10,
        }
    }
}

impl VdpConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return bad("mu must be finite and >= 0");
        }
        if !self.initial.iter().all(|v| v.is_finite()) {
            return bad("initial point must be finite");
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad("t_end must be > 0");
        }
        if self.n_points < 2 {
            return bad("n_points must be >= 2");
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return bad("rtol and atol must be > 0");
        }
        Ok(())
    }

    /// The uniform output grid `t_i = t_end * i / (n - 1)`.
    pub fn grid(&self) -> Vec<f64> {
        uniform_grid(self.t_end, self.n_points)
    }
}

pub fn uniform_grid(t_end: f64, n_points: usize) -> Vec<f64> {
    let last = (n_points - 1) as f64;
    let mut t: Vec<f64> = (0..n_points).map(|i| i as f64 * t_end / last).collect();
    t[n_points - 1] = t_end;
    t
}

/// Simulated state of the uncontrolled oscillator on the uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Accelerations recovered from the equation of motion.
    pub fn accelerations(&self, mu: f64) -> Vec<f64> {
        self.x
            .iter()
            .zip(&self.v)
            .map(|(&x, &v)| vdp_rhs([x, v], mu)[1])
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(out, "t,x,v")?;
            for i in 0..self.len() {
                writeln!(out, "{},{},{}", self.t[i], self.x[i], self.v[i])?;
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

// Dormand–Prince 5(4) tableau; the system is autonomous so the nodes are unused.
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// Fifth minus fourth order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

const INITIAL_STEP: f64 = 1e-3;
const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;
const BETA: f64 = 0.04;

type State = [f64; 2];

fn axpy(y: State, terms: &[(f64, &State)], h: f64) -> State {
    let mut out = y;
    for (coef, k) in terms {
        out[0] += h * coef * k[0];
        out[1] += h * coef * k[1];
    }
    out
}

/// Interpolant over one accepted step `[t0, t0 + h]`.
struct DenseStep {
    t0: f64,
    h: f64,
    r: [State; 5],
}

impl DenseStep {
    fn eval(&self, t: f64) -> State {
        let theta = (t - self.t0) / self.h;
        let theta1 = 1.0 - theta;
        let [r1, r2, r3, r4, r5] = &self.r;
        let mut out = [0.0; 2];
        for i in 0..2 {
            out[i] = r1[i] + theta * (r2[i] + theta1 * (r3[i] + theta * (r4[i] + theta1 * r5[i])));
        }
        out
    }
}

/// Integrate from `cfg.initial` over `[0, t_end]` and sample on the uniform grid.
pub fn integrate(cfg: &VdpConfig) -> Result<Trajectory> {
    cfg.validate()?;
    let mu = cfg.mu;
    let f = |y: &State| vdp_rhs(*y, mu);
    let grid = cfg.grid();
    let n = grid.len();

    let mut xs = Vec::with_capacity(n);
    let mut vs = Vec::with_capacity(n);
    xs.push(cfg.initial[0]);
    vs.push(cfg.initial[1]);
    let mut next = 1;

    let mut t = 0.0;
    let mut y = cfg.initial;
    let mut k1 = f(&y);
    let mut h = INITIAL_STEP.min(cfg.t_end);
    let mut err_old: f64 = 1e-4;
    let mut rejected_last = false;

    while next < n {
        let last_step = t + h >= cfg.t_end;
        if last_step {
            h = cfg.t_end - t;
        }
        if h.abs() <= 10.0 * f64::EPSILON * t.abs().max(1.0) {
            return Err(Error::StepSizeUnderflow { t, h });
        }

        let k2 = f(&axpy(y, &[(A21, &k1)], h));
        let k3 = f(&axpy(y, &[(A31, &k1), (A32, &k2)], h));
        let k4 = f(&axpy(y, &[(A41, &k1), (A42, &k2), (A43, &k3)], h));
        let k5 = f(&axpy(y, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], h));
        let k6 = f(&axpy(
            y,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            h,
        ));
        let y_new = axpy(
            y,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            h,
        );
        let k7 = f(&y_new);

        let mut err_sq = 0.0;
        for i in 0..2 {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let scale = cfg.atol + cfg.rtol * y[i].abs().max(y_new[i].abs());
            err_sq += (e / scale).powi(2);
        }
        let err = (err_sq / 2.0).sqrt();

        if !err.is_finite() {
            h *= FAC_MIN;
            rejected_last = true;
            continue;
        }

        if err <= 1.0 {
            let t_new = if last_step { cfg.t_end } else { t + h };
            let mut r5 = [0.0; 2];
            let mut r = [y, [0.0; 2], [0.0; 2], [0.0; 2], [0.0; 2]];
            for i in 0..2 {
                let diff = y_new[i] - y[i];
                let bspl = h * k1[i] - diff;
                r[1][i] = diff;
                r[2][i] = bspl;
                r[3][i] = diff - h * k7[i] - bspl;
                r5[i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            r[4] = r5;
            let dense = DenseStep { t0: t, h, r };

            while next < n && grid[next] <= t_new {
                let s = if next == n - 1 && last_step {
                    y_new
                } else {
                    dense.eval(grid[next])
                };
                xs.push(s[0]);
                vs.push(s[1]);
                next += 1;
            }

            // PI step-size control.
            let err_c = err.max(1e-10);
            let mut fac = SAFETY * err_c.powf(-(0.2 - 0.75 * BETA)) * err_old.powf(BETA);
            fac = fac.clamp(FAC_MIN, FAC_MAX);
            if rejected_last {
                fac = fac.min(1.0);
            }
            err_old = err_c;
            rejected_last = false;

            t = t_new;
            y = y_new;
            k1 = k7;
            h *= fac;
        } else {
            let fac = (SAFETY * err.powf(-0.2)).max(FAC_MIN);
            h *= fac;
            rejected_last = true;
        }
    }

    Ok(Trajectory {
        t: grid,
        x: xs,
        v: vs,
    })
}
