//! Pseudo-arclength continuation of steady-state branches in one parameter,
//! with fold detection.
//!
//! Branch points live in the extended space `y = (x, p)`. Each step predicts
//! along the secant of the last two points, corrects with Newton on the
//! system augmented by the arclength hyperplane, and classifies the new
//! point. A change in the unstable count that is not accompanied by a turn
//! in `p` shrinks the step; if it persists down to `event_step` it is
//! recorded as a non-fold bifurcation.

use std::io::Write;

use serde::Serialize;
use thiserror::Error;

use crate::analysis::{newton, unstable_count, SteadyStateOptions};
use crate::linalg::{eigenvalues, Lu, Matrix};
use crate::model_io::EvalError;
use crate::scalar::{dot, max_abs, norm2, Real};
use crate::system::Parametric;

#[derive(Debug, Error)]
pub enum ContinuationError<T: Real> {
    #[error("unknown parameter '{0}'")]
    UnknownParameter(String),
    #[error("seed state is not a steady state at the start of the range (residual {residual:e})")]
    SeedNotConverged { residual: f64 },
    #[error("seed has {got} components, model has {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("empty or non-finite parameter range")]
    BadRange,
    #[error("step size fell below {min_step:e} at {parameter} = {param}; partial branch has {} points", partial.points.len())]
    StepFailure {
        parameter: String,
        param: f64,
        min_step: f64,
        partial: Box<Branch<T>>,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationOptions {
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Consecutive successful steps before the step grows by `growth`.
    pub grow_after: usize,
    pub growth: f64,
    pub max_points: usize,
    pub newton_tol: f64,
    pub max_newton: usize,
    pub re_tol: f64,
    /// Stop once this many folds have been passed; `None` follows the branch
    /// through folds until the range or the domain is left.
    pub stop_after_folds: Option<usize>,
    /// Arclength to which fold locations are refined.
    pub fold_tol: f64,
    /// Step below which an unresolved stability change is accepted and
    /// recorded as an event.
    pub event_step: f64,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            initial_step: 0.05,
            min_step: 1e-7,
            max_step: 0.5,
            grow_after: 4,
            growth: 1.3,
            max_points: 20_000,
            newton_tol: 1e-10,
            max_newton: 12,
            re_tol: 1e-9,
            stop_after_folds: None,
            fold_tol: 1e-3,
            event_step: 1e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchPoint<T> {
    pub param: T,
    pub x: Vec<T>,
    pub unstable_count: usize,
    /// Largest real part of the spectrum.
    pub leading_re: T,
    /// Parameter component of the unit tangent, oriented along the branch.
    pub tangent_param: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldPoint<T> {
    pub param: T,
    pub x: Vec<T>,
    /// The fold lies between `points[index]` and `points[index + 1]`.
    pub index: usize,
    pub unstable_before: usize,
    pub unstable_after: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityEvent<T> {
    pub param: T,
    pub index: usize,
    pub unstable_before: usize,
    pub unstable_after: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    RangeEnd,
    FoldLimit,
    /// The branch left the lower bounds of the model's domain.
    StateBound,
    MaxPoints,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch<T> {
    pub parameter: String,
    pub points: Vec<BranchPoint<T>>,
    pub folds: Vec<FoldPoint<T>>,
    /// Stability changes not at a fold ("other bifurcation").
    pub events: Vec<StabilityEvent<T>>,
    pub termination: Termination,
}

impl<T: Real> Branch<T> {
    pub fn write_csv<W: Write>(&self, mut w: W, names: &[String]) -> std::io::Result<()> {
        writeln!(w, "{},{},unstable_count", self.parameter, names.join(","))?;
        for p in &self.points {
            let xs: Vec<String> = p.x.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{},{},{}", p.param, xs.join(","), p.unstable_count)?;
        }
        Ok(())
    }
}

/// A model viewed as `F(x, p)` in one of its parameters.
#[derive(Debug, Clone)]
pub struct ParametricField<M> {
    model: M,
    index: usize,
    name: String,
}

impl<M> ParametricField<M> {
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl<M> ParametricField<M> {
    pub fn new<T: Real>(model: &M, name: &str) -> Result<Self, ContinuationError<T>>
    where
        M: Parametric<T>,
    {
        let index = model
            .parameter_index(name)
            .ok_or_else(|| ContinuationError::UnknownParameter(name.to_string()))?;
        Ok(Self {
            model: model.clone(),
            index,
            name: name.to_string(),
        })
    }

    /// The model with the parameter set to `p`.
    pub fn at<T: Real>(&self, p: T) -> M
    where
        M: Parametric<T>,
    {
        let mut m = self.model.clone();
        m.set_parameter(self.index, p);
        m
    }

    pub fn dim<T: Real>(&self) -> usize
    where
        M: Parametric<T>,
    {
        self.model.dim()
    }

    /// `F(x, p)` for `y = (x, p)`.
    pub fn residual<T: Real>(&self, y: &[T]) -> Result<Vec<T>, EvalError>
    where
        M: Parametric<T>,
    {
        let n = y.len() - 1;
        self.at(y[n]).rhs(&y[..n])
    }

    /// `[dF/dx | dF/dp]`, `n x (n + 1)`.
    pub fn extended_jacobian<T: Real>(&self, y: &[T]) -> Result<Matrix<T>, EvalError>
    where
        M: Parametric<T>,
    {
        let n = y.len() - 1;
        let m = self.at(y[n]);
        let jx = m.jacobian(&y[..n])?;
        let jp = m.interaction_param_derivative(&y[..n], self.index)?;
        Ok(Matrix::from_fn(n, n + 1, |i, j| if j < n { jx[(i, j)] } else { jp[i] }))
    }
}

fn bordered<T: Real>(je: &Matrix<T>, border: &[T]) -> Matrix<T> {
    let n = je.rows();
    Matrix::from_fn(n + 1, n + 1, |i, j| if i < n { je[(i, j)] } else { border[j] })
}

/// Unit tangent at `y`, oriented to have positive projection on `reference`.
fn tangent<T: Real, M: Parametric<T>>(
    field: &ParametricField<M>,
    y: &[T],
    reference: &[T],
) -> Option<Vec<T>> {
    let n = y.len() - 1;
    let je = field.extended_jacobian(y).ok()?;
    let lu = Lu::new(&bordered(&je, reference)).ok()?;
    let mut rhs = vec![T::zero(); n + 1];
    rhs[n] = T::one();
    let mut t = lu.solve(&rhs);
    let len = norm2(&t);
    if !len.is_finite() || len == T::zero() {
        return None;
    }
    let sign = if dot(&t, reference) < T::zero() { -T::one() } else { T::one() };
    for v in t.iter_mut() {
        *v = *v * sign / len;
    }
    Some(t)
}

/// Newton on `F(y) = 0`, `d . (y - anchor) = 0`.
fn correct<T: Real, M: Parametric<T>>(
    field: &ParametricField<M>,
    start: &[T],
    anchor: &[T],
    d: &[T],
    opts: &ContinuationOptions,
) -> Option<Vec<T>> {
    let n = start.len() - 1;
    let tol = T::lit(opts.newton_tol);
    let mut y = start.to_vec();
    for _ in 0..opts.max_newton {
        let f = field.residual(&y).ok()?;
        let g: T = d.iter().zip(y.iter().zip(anchor)).map(|(di, (a, b))| *di * (*a - *b)).sum();
        let je = field.extended_jacobian(&y).ok()?;
        let lu = Lu::new(&bordered(&je, d)).ok()?;
        let mut rhs: Vec<T> = f.iter().map(|v| -*v).collect();
        rhs.push(-g);
        let dy = lu.solve(&rhs);
        for (yi, di) in y.iter_mut().zip(&dy) {
            *yi += *di;
        }
        if !y.iter().all(|v| v.is_finite()) {
            return None;
        }
        let small = max_abs(&dy) <= T::lit(1e-9) * (T::one() + max_abs(&y));
        if small && max_abs(&field.residual(&y).ok()?) < tol {
            return Some(y);
        }
    }
    let f = field.residual(&y).ok()?;
    (max_abs(&f) < tol && y[..n].iter().all(|v| v.is_finite())).then_some(y)
}

fn stability<T: Real, M: Parametric<T>>(
    field: &ParametricField<M>,
    y: &[T],
    re_tol: T,
) -> Option<(usize, T)> {
    let n = y.len() - 1;
    let j = field.at(y[n]).jacobian(&y[..n]).ok()?;
    let ev = eigenvalues(&j).ok()?;
    let lead = ev.iter().fold(T::neg_infinity(), |m, l| m.max(l.re));
    Some((unstable_count(&ev, re_tol), lead))
}

/// Follows the branch through `seed` (a steady state at `range.0`) towards
/// `range.1`.
pub fn continue_branch<T: Real, M: Parametric<T>>(
    model: &M,
    parameter: &str,
    range: (T, T),
    seed: &[T],
    opts: &ContinuationOptions,
) -> Result<Branch<T>, ContinuationError<T>> {
    let field = ParametricField::new(model, parameter)?;
    let n = model.dim();
    if seed.len() != n {
        return Err(ContinuationError::Dimension {
            expected: n,
            got: seed.len(),
        });
    }
    let (p0, p1) = range;
    if !(p0.is_finite() && p1.is_finite()) || p0 == p1 {
        return Err(ContinuationError::BadRange);
    }
    let (lo, hi) = (p0.min(p1), p0.max(p1));
    let dir = if p1 > p0 { T::one() } else { -T::one() };
    let re_tol = T::lit(opts.re_tol);
    let lower: Vec<T> = model.domain().iter().map(|d| d.0).collect();

    let newton_opts = SteadyStateOptions {
        newton_tol: opts.newton_tol,
        ..Default::default()
    };
    let start_model = field.at(p0);
    let x0 = newton(&start_model, seed, &newton_opts).ok_or_else(|| ContinuationError::SeedNotConverged {
        residual: start_model.rhs(seed).map(|f| max_abs(&f).as_f64()).unwrap_or(f64::NAN),
    })?;
    let mut y: Vec<T> = x0.clone();
    y.push(p0);

    let mut e_p = vec![T::zero(); n + 1];
    e_p[n] = dir;
    let mut t = tangent(&field, &y, &e_p).ok_or(ContinuationError::SeedNotConverged { residual: 0.0 })?;
    let (count0, lead0) = stability(&field, &y, re_tol).ok_or(ContinuationError::SeedNotConverged { residual: 0.0 })?;

    let mut branch = Branch {
        parameter: parameter.to_string(),
        points: vec![BranchPoint {
            param: p0,
            x: x0,
            unstable_count: count0,
            leading_re: lead0,
            tangent_param: t[n],
        }],
        folds: Vec::new(),
        events: Vec::new(),
        termination: Termination::MaxPoints,
    };
    let mut prev: Option<Vec<T>> = None;
    let mut h = T::lit(opts.initial_step);
    let min_step = T::lit(opts.min_step);
    let event_step = T::lit(opts.event_step);
    let mut successes = 0;
    let mut coarse_folds = 0;

    while branch.points.len() < opts.max_points {
        let d: Vec<T> = match &prev {
            Some(p) => {
                let s: Vec<T> = y.iter().zip(p).map(|(a, b)| *a - *b).collect();
                let len = norm2(&s);
                s.into_iter().map(|v| v / len).collect()
            }
            None => t.clone(),
        };
        let predicted: Vec<T> = y.iter().zip(&d).map(|(a, b)| *a + h * *b).collect();
        let corrected = correct(&field, &predicted, &predicted, &d, opts).and_then(|yn| {
            let dist = norm2(&yn.iter().zip(&y).map(|(a, b)| *a - *b).collect::<Vec<_>>());
            if dist > T::lit(3.0) * h {
                return None;
            }
            let step: Vec<T> = yn.iter().zip(&y).map(|(a, b)| *a - *b).collect();
            let tn = tangent(&field, &yn, &step)?;
            let st = stability(&field, &yn, re_tol)?;
            Some((yn, tn, st))
        });
        let Some((yn, tn, (count, lead))) = corrected else {
            h /= T::lit(2.0);
            successes = 0;
            if h < min_step {
                let param = y[n].as_f64();
                return Err(ContinuationError::StepFailure {
                    parameter: parameter.to_string(),
                    param,
                    min_step: opts.min_step,
                    partial: Box::new(branch),
                });
            }
            continue;
        };

        let last = branch.points.last().expect("branch has a point");
        let fold = tn[n] * t[n] < T::zero();
        if count != last.unstable_count && !fold {
            if h > event_step {
                h /= T::lit(2.0);
                successes = 0;
                continue;
            }
            branch.events.push(StabilityEvent {
                param: (yn[n] + y[n]) / T::lit(2.0),
                index: branch.points.len() - 1,
                unstable_before: last.unstable_count,
                unstable_after: count,
            });
        }

        let below = yn[..n]
            .iter()
            .zip(&lower)
            .any(|(v, l)| *v < *l - T::lit(1e-8) * (T::one() + v.abs()));
        if below {
            branch.termination = Termination::StateBound;
            break;
        }

        if yn[n] < lo || yn[n] > hi {
            // Land exactly on the boundary by a fixed-parameter solve from
            // the interpolated state.
            let pb = if yn[n] > hi { hi } else { lo };
            let w = (pb - y[n]) / (yn[n] - y[n]);
            let guess: Vec<T> = (0..n).map(|i| y[i] + w * (yn[i] - y[i])).collect();
            if let Some(xb) = newton(&field.at(pb), &guess, &newton_opts) {
                let mut yb = xb.clone();
                yb.push(pb);
                if let Some((c, l)) = stability(&field, &yb, re_tol) {
                    let step: Vec<T> = yb.iter().zip(&y).map(|(a, b)| *a - *b).collect();
                    let tp = tangent(&field, &yb, &step).map(|v| v[n]).unwrap_or(t[n]);
                    branch.points.push(BranchPoint {
                        param: pb,
                        x: xb,
                        unstable_count: c,
                        leading_re: l,
                        tangent_param: tp,
                    });
                }
            }
            branch.termination = Termination::RangeEnd;
            break;
        }

        branch.points.push(BranchPoint {
            param: yn[n],
            x: yn[..n].to_vec(),
            unstable_count: count,
            leading_re: lead,
            tangent_param: tn[n],
        });
        prev = Some(std::mem::replace(&mut y, yn));
        t = tn;
        if fold {
            coarse_folds += 1;
            if opts.stop_after_folds.is_some_and(|k| coarse_folds >= k) {
                branch.termination = Termination::FoldLimit;
                break;
            }
        }
        successes += 1;
        if successes >= opts.grow_after {
            h = (h * T::lit(opts.growth)).min(T::lit(opts.max_step));
            successes = 0;
        }
    }

    branch.folds = detect_folds(&field, &branch, opts);
    Ok(branch)
}

/// Folds are sign changes of the parameter component of the tangent
/// between consecutive points, located by bisection in arclength.
pub fn detect_folds<T: Real, M: Parametric<T>>(
    field: &ParametricField<M>,
    branch: &Branch<T>,
    opts: &ContinuationOptions,
) -> Vec<FoldPoint<T>> {
    let tol = T::lit(opts.fold_tol);
    let mut folds = Vec::new();
    for (i, w) in branch.points.windows(2).enumerate() {
        let (a, b) = (&w[0], &w[1]);
        if !(a.tangent_param * b.tangent_param < T::zero()) {
            continue;
        }
        let ya: Vec<T> = a.x.iter().copied().chain(std::iter::once(a.param)).collect();
        let yb: Vec<T> = b.x.iter().copied().chain(std::iter::once(b.param)).collect();
        let chord: Vec<T> = yb.iter().zip(&ya).map(|(p, q)| *p - *q).collect();
        let len = norm2(&chord);
        let d: Vec<T> = chord.iter().map(|v| *v / len).collect();
        let point_at = |s: T| {
            let guess: Vec<T> = ya.iter().zip(&d).map(|(p, q)| *p + s * *q).collect();
            let y = correct(field, &guess, &guess, &d, opts)?;
            let tp = tangent(field, &y, &d)?;
            Some((y, tp[tp.len() - 1]))
        };
        let (mut s_lo, mut s_hi) = (T::zero(), len);
        let sign_a = a.tangent_param.signum();
        // The endpoint further along in the direction of travel is the
        // better guess if refinement fails.
        let fallback = if (b.param - a.param) * sign_a > T::zero() { yb.clone() } else { ya.clone() };
        let mut best = fallback.clone();
        let mut ok = true;
        while s_hi - s_lo > tol {
            let mid = (s_lo + s_hi) / T::lit(2.0);
            match point_at(mid) {
                Some((y, tp)) => {
                    if tp.signum() == sign_a {
                        s_lo = mid;
                    } else {
                        s_hi = mid;
                    }
                    best = y;
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            best = fallback;
        }
        let np = best.len() - 1;
        folds.push(FoldPoint {
            param: best[np],
            x: best[..np].to_vec(),
            index: i,
            unstable_before: a.unstable_count,
            unstable_after: b.unstable_count,
        });
    }
    folds
}
