//! Frequency-domain view of a steady state.
//!
//! Cutting every interaction loop, but keeping the degradation self-loops,
//! turns the linearisation `J = A' - D` into the stable input/output system
//! `G(s) = (sI + D)^{-1} A'`. Closed-loop eigenvalues are the zeros of
//! `det(I - G(s)) = det(sI - J) / prod(s + d_i)`, so the winding number of
//! `det(I - G(jw))` around the origin counts unstable modes.
//!
//! Orientation: with `w` running from `-inf` to `+inf` the curve winds
//! clockwise once per right-half-plane zero, so the signed winding number is
//! `-(number of unstable modes)`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{det, eigenvalues, LinalgError, Matrix};
use crate::model_io::EvalError;
use crate::scalar::{Cplx, Real};
use crate::system::GrnSystem;

#[derive(Debug, Error)]
pub enum FrequencyError {
    #[error("degradation entry {index} = {value} must be positive")]
    NonPositiveDegradation { index: usize, value: f64 },
    #[error("lambda = {re} + {im}j is a pole of the loopbroken system")]
    Pole { re: f64, im: f64 },
    #[error("Nyquist curve passes within {min_distance:e} of the origin at w = {omega}: eigenvalue on the imaginary axis")]
    ImaginaryAxis { min_distance: f64, omega: f64 },
    #[error("Nyquist refinement exceeded its budget of {budget} points")]
    Budget { budget: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// `J = A' - D` split into its interaction and degradation parts.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopbrokenSystem<T> {
    pub degradation: Vec<T>,
    pub interaction: Matrix<T>,
}

impl<T: Real> LoopbrokenSystem<T> {
    pub fn new(degradation: Vec<T>, interaction: Matrix<T>) -> Result<Self, FrequencyError> {
        for (index, d) in degradation.iter().enumerate() {
            if !(*d > T::zero() && d.is_finite()) {
                return Err(FrequencyError::NonPositiveDegradation {
                    index,
                    value: d.as_f64(),
                });
            }
        }
        assert_eq!(interaction.rows(), degradation.len());
        assert!(interaction.is_square());
        Ok(Self {
            degradation,
            interaction,
        })
    }

    pub fn dim(&self) -> usize {
        self.degradation.len()
    }

    /// Closed-loop Jacobian `A' - D`.
    pub fn closed_loop(&self) -> Matrix<T> {
        let mut j = self.interaction.clone();
        for (i, d) in self.degradation.iter().enumerate() {
            j[(i, i)] -= *d;
        }
        j
    }

    /// `det(I - G(jw))`.
    pub fn det_at(&self, omega: T) -> Cplx<T> {
        let n = self.dim();
        let jw = Cplx::new(T::zero(), omega);
        let m = Matrix::from_fn(n, n, |i, j| {
            let g = Cplx::new(self.interaction[(i, j)], T::zero()) / (jw + self.degradation[i]);
            if i == j {
                Cplx::new(T::one(), T::zero()) - g
            } else {
                -g
            }
        });
        det(&m)
    }
}

/// Splits the Jacobian at `x` using the model's own `A - D` decomposition.
pub fn loopbreak<T: Real, S: GrnSystem<T> + ?Sized>(
    model: &S,
    x: &[T],
) -> Result<LoopbrokenSystem<T>, FrequencyError> {
    LoopbrokenSystem::new(model.degradation().to_vec(), model.interaction_jacobian(x)?)
}

/// `G(lambda) = (lambda I + D)^{-1} A'`.
pub fn transfer_matrix<T: Real>(
    sys: &LoopbrokenSystem<T>,
    lambda: Cplx<T>,
) -> Result<Matrix<Cplx<T>>, FrequencyError> {
    let n = sys.dim();
    let mut scale = Vec::with_capacity(n);
    for d in &sys.degradation {
        let p = lambda + *d;
        if p.norm() <= T::eps() * (T::one() + d.abs()) {
            return Err(FrequencyError::Pole {
                re: lambda.re.as_f64(),
                im: lambda.im.as_f64(),
            });
        }
        scale.push(Cplx::new(T::one(), T::zero()) / p);
    }
    Ok(Matrix::from_fn(n, n, |i, j| {
        scale[i] * sys.interaction[(i, j)]
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NyquistOptions<T> {
    /// Upper frequency; by default `1e3 * max(1, max |eigenvalue|)`.
    pub omega_max: Option<T>,
    pub base_points: usize,
    /// Largest total number of samples on the half axis.
    pub budget: usize,
    /// Curves closer than this to the origin signal an imaginary-axis
    /// eigenvalue.
    pub floor: T,
    /// Adjacent samples must satisfy `|v_b - v_a| <= chord * min(|v_a|, |v_b|)`.
    pub chord: T,
}

impl<T: Real> Default for NyquistOptions<T> {
    fn default() -> Self {
        Self {
            omega_max: None,
            base_points: 512,
            budget: 1 << 20,
            floor: T::lit(1e-10),
            chord: T::lit(0.25),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NyquistCurve<T> {
    /// Ascending, symmetric about 0.
    pub omega: Vec<T>,
    pub values: Vec<Cplx<T>>,
    /// Signed number of counter-clockwise turns around the origin.
    pub winding: i64,
    pub min_distance: T,
    pub omega_max: T,
    pub system: LoopbrokenSystem<T>,
}

impl<T: Real> NyquistCurve<T> {
    /// `|det(I - G(j w_max)) - 1|`.
    pub fn tail_error(&self) -> T {
        (self.values[self.values.len() - 1] - T::one()).norm()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "omega,re,im")?;
        for (o, v) in self.omega.iter().zip(&self.values) {
            writeln!(w, "{},{},{}", o, v.re, v.im)?;
        }
        Ok(())
    }
}

/// Default upper frequency: `1e3 * max(1, max |eigenvalue|)`, raised by
/// decades until `det(I - G(j w_max))` is within `5e-4` of 1 so that the
/// curve is closed at infinity to well within `1e-3`.
pub fn default_omega_max<T: Real>(sys: &LoopbrokenSystem<T>) -> Result<T, FrequencyError> {
    let ev = eigenvalues(&sys.closed_loop())?;
    let r = ev.iter().map(|l| l.norm()).fold(T::one(), T::max);
    let mut w = T::lit(1e3) * r;
    for _ in 0..12 {
        if (sys.det_at(w) - T::one()).norm() < T::lit(5e-4) {
            break;
        }
        w *= T::lit(10.0);
    }
    Ok(w)
}

fn log_grid<T: Real>(lo: T, hi: T, n: usize) -> Vec<T> {
    let (a, b) = (lo.ln(), hi.ln());
    let last = T::lit((n.max(2) - 1) as f64);
    (0..n.max(2))
        .map(|k| (a + (b - a) * T::lit(k as f64) / last).exp())
        .collect()
}

fn needs_split<T: Real>(a: Cplx<T>, b: Cplx<T>, chord: T) -> bool {
    let r = a.norm().min(b.norm());
    let step = (b / a).arg().abs();
    step >= T::FRAC_PI_2() || (b - a).norm() > chord * r
}

/// Samples `det(I - G(jw))` on `[-w_max, w_max]`, refining until adjacent
/// samples are close relative to their distance from the origin.
pub fn nyquist_curve<T: Real>(
    sys: &LoopbrokenSystem<T>,
    opts: &NyquistOptions<T>,
) -> Result<NyquistCurve<T>, FrequencyError> {
    let omega_max = match opts.omega_max {
        Some(w) => w,
        None => default_omega_max(sys)?,
    };
    let mut omega = vec![T::zero()];
    omega.extend(log_grid(omega_max * T::lit(1e-6), omega_max, opts.base_points));
    let mut values: Vec<Cplx<T>> = omega.par_iter().map(|w| sys.det_at(*w)).collect();

    // Refine the half axis by bisection.
    let floor_hit = |v: &Cplx<T>| v.norm() < opts.floor;
    let mut out_w = Vec::with_capacity(omega.len() * 2);
    let mut out_v = Vec::with_capacity(omega.len() * 2);
    out_w.push(omega[0]);
    out_v.push(values[0]);
    let mut total = omega.len();
    for k in 1..omega.len() {
        let mut stack = vec![(omega[k], values[k])];
        loop {
            let (wa, va) = (*out_w.last().unwrap(), *out_v.last().unwrap());
            let Some(&(wb, vb)) = stack.last() else { break };
            if floor_hit(&va) || floor_hit(&vb) {
                let (w, v) = if va.norm() < vb.norm() { (wa, va) } else { (wb, vb) };
                return Err(FrequencyError::ImaginaryAxis {
                    min_distance: v.norm().as_f64(),
                    omega: w.as_f64(),
                });
            }
            let mid = (wa + wb) / T::lit(2.0);
            if needs_split(va, vb, opts.chord) && mid > wa && mid < wb {
                total += 1;
                if total > opts.budget {
                    return Err(FrequencyError::Budget { budget: opts.budget });
                }
                stack.push((mid, sys.det_at(mid)));
            } else {
                out_w.push(wb);
                out_v.push(vb);
                stack.pop();
            }
        }
    }
    omega = out_w;
    values = out_v;

    // Mirror by conjugate symmetry.
    let m = omega.len();
    let mut w_full = Vec::with_capacity(2 * m - 1);
    let mut v_full = Vec::with_capacity(2 * m - 1);
    for k in (1..m).rev() {
        w_full.push(-omega[k]);
        v_full.push(values[k].conj());
    }
    w_full.extend_from_slice(&omega);
    v_full.extend_from_slice(&values);

    let (min_distance, at) = v_full
        .iter()
        .zip(&w_full)
        .map(|(v, w)| (v.norm(), *w))
        .fold((T::infinity(), T::zero()), |acc, x| if x.0 < acc.0 { x } else { acc });
    if min_distance < opts.floor {
        return Err(FrequencyError::ImaginaryAxis {
            min_distance: min_distance.as_f64(),
            omega: at.as_f64(),
        });
    }
    let winding = winding_number(&v_full);
    Ok(NyquistCurve {
        omega: w_full,
        values: v_full,
        winding,
        min_distance,
        omega_max,
        system: sys.clone(),
    })
}

/// Signed winding number of a closed polyline around the origin, from the
/// summed phase increments between consecutive samples (closing segment
/// included).
pub fn winding_number<T: Real>(values: &[Cplx<T>]) -> i64 {
    if values.len() < 2 {
        return 0;
    }
    let mut total = T::zero();
    for k in 0..values.len() {
        let a = values[k];
        let b = values[(k + 1) % values.len()];
        total += (b / a).arg();
    }
    (total / T::TAU()).round().to_i64().unwrap_or(0)
}

/// Number of right-half-plane zeros of `det(I - G)`.
pub fn unstable_count_from_winding<T>(curve: &NyquistCurve<T>) -> usize {
    curve.winding.unsigned_abs() as usize
}

/// Comparison of a low- and a high-dimensional curve on a merged grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TubeReport {
    /// `min_w |det(I - G_low(jw))|`.
    pub epsilon: f64,
    /// `sup_w |det(I - G_high(jw)) - det(I - G_low(jw))|`.
    pub max_deviation: f64,
    pub omega_at_max: f64,
    pub within_tube: bool,
    pub low_winding: i64,
    pub high_winding: i64,
    pub grid_points: usize,
}

pub fn compare_nyquist<T: Real>(low: &NyquistCurve<T>, high: &NyquistCurve<T>) -> TubeReport {
    let mut grid: Vec<T> = low
        .omega
        .iter()
        .chain(&high.omega)
        .copied()
        .filter(|w| *w >= T::zero())
        .collect();
    grid.sort_by(|a, b| a.partial_cmp(b).expect("finite frequencies"));
    grid.dedup();
    let samples: Vec<(T, T, T)> = grid
        .par_iter()
        .map(|w| {
            let a = low.system.det_at(*w);
            let b = high.system.det_at(*w);
            (*w, a.norm(), (b - a).norm())
        })
        .collect();
    let epsilon = samples.iter().map(|s| s.1).fold(T::infinity(), T::min);
    let (omega_at_max, max_dev) = samples
        .iter()
        .fold((T::zero(), T::zero()), |acc, s| if s.2 > acc.1 { (s.0, s.2) } else { acc });
    TubeReport {
        epsilon: epsilon.as_f64(),
        max_deviation: max_dev.as_f64(),
        omega_at_max: omega_at_max.as_f64(),
        within_tube: max_dev < epsilon,
        low_winding: low.winding,
        high_winding: high.winding,
        grid_points: 2 * samples.len() - 1,
    }
}
