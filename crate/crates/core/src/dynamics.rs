//! Time integration with the Dormand–Prince 5(4) pair.
//!
//! Step size follows a PI controller; output at the requested sample times
//! comes from the pair's fourth-order continuous extension, so sampling does
//! not constrain the step size.

use std::io::Write;

use thiserror::Error;

use crate::model_io::EvalError;
use crate::scalar::{max_abs, Real};
use crate::system::GrnSystem;

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("tolerance not met within {max_steps} steps (reached t = {t})")]
    TooManySteps { t: f64, max_steps: usize },
    #[error("initial state must be finite, non-negative and have {expected} components")]
    InvalidInitial { expected: usize },
    #[error("end time must be positive, got {0}")]
    InvalidEnd(f64),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegrationOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Output times; `None` gives `samples` equally spaced points on `[0, t_end]`.
    pub sample_times: Option<Vec<f64>>,
    pub samples: usize,
    pub initial_step: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegrationOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-8,
            atol: 1e-10,
            sample_times: None,
            samples: 201,
            initial_step: None,
            max_steps: 2_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SolverStats {
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Accepted steps after which a slightly negative component was reset to 0.
    pub clamps: usize,
}

#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    /// One row per sample time.
    pub states: Vec<Vec<T>>,
    pub stats: SolverStats,
}

impl<T: Real> Trajectory<T> {
    pub fn last(&self) -> &[T] {
        self.states.last().expect("trajectory has samples")
    }

    pub fn write_csv<W: Write>(&self, mut w: W, names: &[String]) -> std::io::Result<()> {
        writeln!(w, "t,{}", names.join(","))?;
        for (t, x) in self.times.iter().zip(&self.states) {
            let row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{}", t, row.join(","))?;
        }
        Ok(())
    }
}

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
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn combo<T: Real>(y: &[T], h: T, terms: &[(f64, &[T])], out: &mut [T]) {
    for (i, o) in out.iter_mut().enumerate() {
        let mut s = T::zero();
        for (c, k) in terms {
            s += T::lit(*c) * k[i];
        }
        *o = y[i] + h * s;
    }
}

/// Integrates from `x0` at `t = 0` to `t_end`.
pub fn integrate<T: Real, S: GrnSystem<T> + ?Sized>(
    model: &S,
    x0: &[T],
    t_end: T,
    rtol: T,
    atol: T,
) -> Result<Trajectory<T>, DynamicsError> {
    let opts = IntegrationOptions {
        rtol: rtol.as_f64(),
        atol: atol.as_f64(),
        ..Default::default()
    };
    integrate_with(model, x0, t_end, &opts)
}

pub fn integrate_with<T: Real, S: GrnSystem<T> + ?Sized>(
    model: &S,
    x0: &[T],
    t_end: T,
    opts: &IntegrationOptions,
) -> Result<Trajectory<T>, DynamicsError> {
    let n = model.dim();
    if x0.len() != n || x0.iter().any(|v| !v.is_finite() || *v < T::zero()) {
        return Err(DynamicsError::InvalidInitial { expected: n });
    }
    if !(t_end > T::zero()) {
        return Err(DynamicsError::InvalidEnd(t_end.as_f64()));
    }
    let rtol = T::lit(opts.rtol);
    let atol = T::lit(opts.atol);
    let mut out_t: Vec<T> = match &opts.sample_times {
        Some(ts) => ts.iter().map(|t| T::lit(*t)).filter(|t| *t <= t_end).collect(),
        None => {
            let m = opts.samples.max(2);
            (0..m)
                .map(|k| t_end * T::lit(k as f64) / T::lit((m - 1) as f64))
                .collect()
        }
    };
    out_t.sort_by(|a, b| a.partial_cmp(b).expect("finite sample times"));
    out_t.dedup();

    let mut stats = SolverStats::default();
    let mut states = Vec::with_capacity(out_t.len());
    let mut next = 0;
    while next < out_t.len() && out_t[next] <= T::zero() {
        states.push(x0.to_vec());
        next += 1;
    }

    let scale = |a: &[T], b: &[T], i: usize| atol + rtol * a[i].abs().max(b[i].abs());
    let mut y = x0.to_vec();
    let mut k1 = model.rhs(&y)?;
    stats.evaluations += 1;

    let mut h = match opts.initial_step {
        Some(h) => T::lit(h),
        None => {
            let d0 = max_abs(&y.iter().enumerate().map(|(i, v)| *v / scale(&y, &y, i)).collect::<Vec<_>>());
            let d1 = max_abs(&k1.iter().enumerate().map(|(i, v)| *v / scale(&y, &y, i)).collect::<Vec<_>>());
            let h0 = if d0 < T::lit(1e-5) || d1 < T::lit(1e-5) {
                T::lit(1e-6)
            } else {
                T::lit(0.01) * d0 / d1
            };
            h0.min(t_end)
        }
    };

    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n], vec![T::zero(); n]);
    let mut stage = vec![T::zero(); n];
    let mut y_new = vec![T::zero(); n];
    let mut t = T::zero();
    let mut err_old = T::lit(1e-4);
    let beta = T::lit(0.04);
    let expo = T::lit(0.2) - beta * T::lit(0.75);
    let mut last_rejected = false;

    while next < out_t.len() {
        if stats.steps + stats.rejected >= opts.max_steps {
            return Err(DynamicsError::TooManySteps {
                t: t.as_f64(),
                max_steps: opts.max_steps,
            });
        }
        if h < T::eps() * T::lit(16.0) * t.abs().max(T::one()) {
            return Err(DynamicsError::StepUnderflow {
                t: t.as_f64(),
                h: h.as_f64(),
            });
        }
        if t + h > t_end {
            h = t_end - t;
        }

        let stages: Result<(), EvalError> = (|| {
            combo(&y, h, &[(A21, &k1)], &mut stage);
            model.rhs_into(&stage, &mut k2)?;
            combo(&y, h, &[(A31, &k1), (A32, &k2)], &mut stage);
            model.rhs_into(&stage, &mut k3)?;
            combo(&y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)], &mut stage);
            model.rhs_into(&stage, &mut k4)?;
            combo(&y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)], &mut stage);
            model.rhs_into(&stage, &mut k5)?;
            combo(&y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)], &mut stage);
            model.rhs_into(&stage, &mut k6)?;
            combo(&y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)], &mut y_new);
            model.rhs_into(&y_new, &mut k7)?;
            Ok(())
        })();
        stats.evaluations += 6;
        if stages.is_err() {
            stats.rejected += 1;
            h /= T::lit(4.0);
            last_rejected = true;
            continue;
        }

        let mut acc = T::zero();
        for i in 0..n {
            let e = h
                * (T::lit(E1) * k1[i]
                    + T::lit(E3) * k3[i]
                    + T::lit(E4) * k4[i]
                    + T::lit(E5) * k5[i]
                    + T::lit(E6) * k6[i]
                    + T::lit(E7) * k7[i]);
            let r = e / scale(&y, &y_new, i);
            acc += r * r;
        }
        let err = (acc / T::lit(n as f64)).sqrt();

        if err <= T::one() {
            let t_new = t + h;
            // Dense output between t and t_new.
            while next < out_t.len() && out_t[next] <= t_new {
                let theta = (out_t[next] - t) / h;
                let th1 = T::one() - theta;
                let row: Vec<T> = (0..n)
                    .map(|i| {
                        let ydiff = y_new[i] - y[i];
                        let bspl = h * k1[i] - ydiff;
                        let r4 = ydiff - h * k7[i] - bspl;
                        let r5 = h
                            * (T::lit(D1) * k1[i]
                                + T::lit(D3) * k3[i]
                                + T::lit(D4) * k4[i]
                                + T::lit(D5) * k5[i]
                                + T::lit(D6) * k6[i]
                                + T::lit(D7) * k7[i]);
                        let v = y[i] + theta * (ydiff + th1 * (bspl + theta * (r4 + th1 * r5)));
                        v.max(T::zero())
                    })
                    .collect();
                states.push(row);
                next += 1;
            }
            stats.steps += 1;
            t = t_new;
            std::mem::swap(&mut y, &mut y_new);
            if y.iter().any(|v| *v < T::zero()) {
                for v in y.iter_mut() {
                    *v = v.max(T::zero());
                }
                stats.clamps += 1;
                model.rhs_into(&y, &mut k1)?;
                stats.evaluations += 1;
            } else {
                std::mem::swap(&mut k1, &mut k7);
            }
            let e = err.max(T::lit(1e-10));
            let mut fac = T::lit(0.9) * e.powf(-expo) * err_old.powf(beta);
            fac = fac.max(T::lit(0.2)).min(T::lit(10.0));
            if last_rejected {
                fac = fac.min(T::one());
            }
            err_old = e.max(T::lit(1e-4));
            h *= fac;
            last_rejected = false;
        } else {
            stats.rejected += 1;
            let fac = (T::lit(0.9) * err.powf(-T::lit(0.2))).max(T::lit(0.2));
            h *= fac;
            last_rejected = true;
        }
    }
    Ok(Trajectory {
        times: out_t,
        states,
        stats,
    })
}
