//! Steady states, their stability, the steady-state lift, and the
//! equivalence check between a low- and a high-dimensional model.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::construction::{GainTable, HighDimModel};
use crate::frequency::{compare_nyquist, loopbreak, nyquist_curve, NyquistOptions, TubeReport};
use crate::linalg::{eigenvalues, Lu, LinalgError, Matrix};
use crate::model_io::{EvalError, ExprModel};
use crate::sampling::Halton;
use crate::scalar::{dist_inf, max_abs, Cplx, Real};
use crate::structure::{ModuleAssignment, SignMatrix};
use crate::system::GrnSystem;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("lifted state has residual {residual:e}, above {tolerance:e}: the inferred lift does not fit this model")]
    LiftResidual { residual: f64, tolerance: f64 },
    #[error("state has {got} components, model has {expected}")]
    Dimension { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateOptions {
    pub n_starts: usize,
    pub seed: u64,
    /// Bound on `||F(x)||_inf` for an accepted state.
    pub newton_tol: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
    /// States closer than `dedup_tol * (1 + ||x||_inf)` are merged.
    pub dedup_tol: f64,
    /// Eigenvalues with `|Re| <= re_tol` count as on the imaginary axis.
    pub re_tol: f64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self {
            n_starts: 2000,
            seed: 0,
            newton_tol: 1e-10,
            max_iterations: 100,
            max_halvings: 40,
            dedup_tol: 1e-6,
            re_tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SteadyState<T> {
    pub x: Vec<T>,
    pub residual: T,
    pub jacobian: Matrix<T>,
    /// Sorted by real part, descending.
    pub eigenvalues: Vec<Cplx<T>>,
    pub unstable_count: usize,
    pub on_imaginary_axis: bool,
}

impl<T: Real> SteadyState<T> {
    pub fn is_stable(&self) -> bool {
        self.unstable_count == 0 && !self.on_imaginary_axis
    }
}

pub fn unstable_count<T: Real>(ev: &[Cplx<T>], re_tol: T) -> usize {
    ev.iter().filter(|l| l.re > re_tol).count()
}

/// Evaluates the Jacobian and spectrum at `x`.
pub fn classify<T: Real, S: GrnSystem<T> + ?Sized>(
    model: &S,
    x: &[T],
    re_tol: T,
) -> Result<SteadyState<T>, AnalysisError> {
    if x.len() != model.dim() {
        return Err(AnalysisError::Dimension {
            expected: model.dim(),
            got: x.len(),
        });
    }
    let residual = max_abs(&model.rhs(x)?);
    let jacobian = model.jacobian(x)?;
    let eigenvalues = eigenvalues(&jacobian)?;
    Ok(SteadyState {
        x: x.to_vec(),
        residual,
        unstable_count: unstable_count(&eigenvalues, re_tol),
        on_imaginary_axis: eigenvalues.iter().any(|l| l.re.abs() <= re_tol),
        jacobian,
        eigenvalues,
    })
}

/// Damped Newton iteration from `x0`, kept inside the lower bounds of the
/// model's domain. Returns the converged point, if any.
pub fn newton<T: Real, S: GrnSystem<T> + ?Sized>(
    model: &S,
    x0: &[T],
    opts: &SteadyStateOptions,
) -> Option<Vec<T>> {
    let lower: Vec<T> = model.domain().iter().map(|d| d.0).collect();
    let tol = T::lit(opts.newton_tol);
    let mut x = x0.to_vec();
    let mut f = model.rhs(&x).ok()?;
    let mut norm = max_abs(&f);
    for _ in 0..opts.max_iterations {
        if !norm.is_finite() {
            return None;
        }
        if norm < tol {
            return Some(x);
        }
        let j = model.jacobian(&x).ok()?;
        let lu = Lu::new(&j).ok()?;
        let dx = lu.solve(&f.iter().map(|v| -*v).collect::<Vec<_>>());
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<T> = x
                .iter()
                .zip(&dx)
                .zip(&lower)
                .map(|((xi, di), lo)| (*xi + t * *di).max(*lo))
                .collect();
            if let Ok(ft) = model.rhs(&trial) {
                let nt = max_abs(&ft);
                if nt.is_finite() && nt < norm {
                    x = trial;
                    f = ft;
                    norm = nt;
                    accepted = true;
                    break;
                }
            }
            t /= T::lit(2.0);
        }
        if !accepted {
            return (norm < tol).then_some(x);
        }
    }
    (norm < tol).then_some(x)
}

fn same_state<T: Real>(a: &[T], b: &[T], dedup_tol: f64) -> bool {
    let scale = T::one() + max_abs(a).max(max_abs(b));
    dist_inf(a, b) <= T::lit(dedup_tol) * scale
}

/// Multistart Newton over the model's domain box. Starts come from a
/// seeded low-discrepancy sequence; results are deduplicated, re-verified,
/// and ordered stable-first, then by descending components.
pub fn find_steady_states<T: Real, S: GrnSystem<T> + ?Sized>(
    model: &S,
    opts: &SteadyStateOptions,
) -> Vec<SteadyState<T>> {
    let domain: Vec<(f64, f64)> = model
        .domain()
        .iter()
        .map(|(a, b)| (a.as_f64(), b.as_f64()))
        .collect();
    find_steady_states_in(model, &domain, opts)
}

pub fn find_steady_states_in<T: Real, S: GrnSystem<T> + ?Sized>(
    model: &S,
    domain: &[(f64, f64)],
    opts: &SteadyStateOptions,
) -> Vec<SteadyState<T>> {
    let halton = Halton::seeded(model.dim(), opts.seed);
    let roots: Vec<Option<Vec<T>>> = (0..opts.n_starts)
        .into_par_iter()
        .map(|s| {
            let x0: Vec<T> = halton.box_point(s, domain).into_iter().map(T::lit).collect();
            newton(model, &x0, opts)
        })
        .collect();
    let mut unique: Vec<Vec<T>> = Vec::new();
    for r in roots.into_iter().flatten() {
        if !unique.iter().any(|u| same_state(u, &r, opts.dedup_tol)) {
            unique.push(r);
        }
    }
    let tol = T::lit(opts.newton_tol);
    let mut states: Vec<SteadyState<T>> = unique
        .iter()
        .filter_map(|x| classify(model, x, T::lit(opts.re_tol)).ok())
        .filter(|s| s.residual < tol)
        .collect();
    sort_states(&mut states, opts.dedup_tol);
    states
}

/// Stable states first, then lexicographically by descending components
/// (components within the dedup tolerance count as equal).
pub fn sort_states<T: Real>(states: &mut [SteadyState<T>], dedup_tol: f64) {
    states.sort_by(|a, b| {
        a.unstable_count.cmp(&b.unstable_count).then_with(|| {
            for (x, y) in a.x.iter().zip(&b.x) {
                let scale = T::one() + x.abs().max(y.abs());
                if (*x - *y).abs() > T::lit(dedup_tol) * scale {
                    return y.partial_cmp(x).unwrap_or(std::cmp::Ordering::Equal);
                }
            }
            std::cmp::Ordering::Equal
        })
    });
}

/// Interaction part `A'` and degradation `D` of the Jacobian at `x`.
pub fn jacobian_parts<T: Real, S: GrnSystem<T> + ?Sized>(
    model: &S,
    x: &[T],
) -> Result<(Matrix<T>, Vec<T>), EvalError> {
    Ok((model.interaction_jacobian(x)?, model.degradation().to_vec()))
}

/// `h(z)`: masters keep their value, module genes take their master's value
/// scaled by the module gain, orphan module genes sit at 0.
pub fn lift_point<T: Real>(z: &[T], gains: &GainTable<T>, assignment: &ModuleAssignment) -> Vec<T> {
    (0..assignment.total())
        .map(|j| {
            if j < assignment.masters() {
                z[j]
            } else {
                match assignment.master_of(j) {
                    Some(m) => gains.lift_factor(j) * z[m],
                    None => T::zero(),
                }
            }
        })
        .collect()
}

/// Lifts `z` and verifies that the result is a steady state of `high`.
pub fn lift_steady_state<T: Real, S: GrnSystem<T> + ?Sized>(
    z: &[T],
    gains: &GainTable<T>,
    assignment: &ModuleAssignment,
    high: &S,
    tolerance: T,
) -> Result<Vec<T>, AnalysisError> {
    if z.len() != assignment.masters() {
        return Err(AnalysisError::Dimension {
            expected: assignment.masters(),
            got: z.len(),
        });
    }
    let x = lift_point(z, gains, assignment);
    let r = max_abs(&high.rhs(&x)?);
    if !(r < tolerance) {
        return Err(AnalysisError::LiftResidual {
            residual: r.as_f64(),
            tolerance: tolerance.as_f64(),
        });
    }
    Ok(x)
}

/// What the equivalence check needs to know about the construction.
#[derive(Debug, Clone)]
pub struct LiftSpec<T> {
    pub assignment: ModuleAssignment,
    pub gains: GainTable<T>,
    pub sign_matrix: SignMatrix,
}

impl<T: Real> LiftSpec<T> {
    pub fn of(model: &HighDimModel<T>) -> Self {
        Self {
            assignment: model.assignment().clone(),
            gains: model.gains().clone(),
            sign_matrix: model.sign_matrix().clone(),
        }
    }

    /// Lift for `n == N`: the identity.
    pub fn identity(sign_matrix: SignMatrix) -> Self {
        let n = sign_matrix.rows();
        let assignment = ModuleAssignment::trivial(n);
        let gains = GainTable::compute(&sign_matrix, &assignment, &[])
            .expect("no modules, no gains to fail");
        Self {
            assignment,
            gains,
            sign_matrix,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceOptions {
    pub steady: SteadyStateOptions,
    pub sign_samples: usize,
    pub lift_tol: f64,
    /// Also search the high-dimensional model independently and require a
    /// one-to-one match with the lifted states.
    pub search_high: bool,
    pub nyquist: bool,
}

impl Default for EquivalenceOptions {
    fn default() -> Self {
        Self {
            steady: SteadyStateOptions::default(),
            sign_samples: 1000,
            lift_tol: 1e-8,
            search_high: true,
            nyquist: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignMismatch {
    pub sample: usize,
    pub row: usize,
    pub col: usize,
    pub derivative: f64,
    pub expected: i8,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignCheck {
    pub samples: usize,
    pub mismatches: usize,
    pub examples: Vec<SignMismatch>,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NyquistSummary {
    pub low_winding: i64,
    pub high_winding: i64,
    pub tube: TubeReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairRecord {
    pub index: usize,
    pub z: Vec<f64>,
    pub x: Vec<f64>,
    pub low_residual: f64,
    pub lift_residual: f64,
    pub lift_ok: bool,
    pub low_eigenvalues: Vec<[f64; 2]>,
    pub high_eigenvalues: Vec<[f64; 2]>,
    pub low_unstable: usize,
    pub high_unstable: usize,
    pub counts_match: bool,
    pub inconclusive: bool,
    pub nyquist: Option<NyquistSummary>,
    pub nyquist_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HighSearch {
    pub found: usize,
    pub matched: usize,
    pub unmatched: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub sign_check: SignCheck,
    pub pairs: Vec<PairRecord>,
    pub injective: bool,
    pub high_search: Option<HighSearch>,
    pub failing_pairs: Vec<usize>,
    pub inconclusive_pairs: Vec<usize>,
    pub verdict: bool,
}

impl EquivalenceReport {
    pub fn unstable_counts(&self) -> (Vec<usize>, Vec<usize>) {
        (
            self.pairs.iter().map(|p| p.low_unstable).collect(),
            self.pairs.iter().map(|p| p.high_unstable).collect(),
        )
    }
}

fn complex_pairs<T: Real>(ev: &[Cplx<T>]) -> Vec<[f64; 2]> {
    ev.iter().map(|l| [l.re.as_f64(), l.im.as_f64()]).collect()
}

fn to_f64<T: Real>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.as_f64()).collect()
}

/// Compares sign structure of `dA/dx` with `S` at interior sample points.
pub fn sign_check<T: Real, S: GrnSystem<T> + ?Sized>(
    model: &S,
    signs: &SignMatrix,
    samples: usize,
) -> Result<SignCheck, AnalysisError> {
    let domain: Vec<(f64, f64)> = model
        .domain()
        .iter()
        .map(|(a, b)| (a.as_f64(), b.as_f64()))
        .collect();
    let halton = Halton::new(model.dim());
    let per_sample: Vec<Result<Vec<SignMismatch>, EvalError>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let x: Vec<T> = halton
                .interior_point(s, &domain, 1e-3)
                .into_iter()
                .map(T::lit)
                .collect();
            let j = model.interaction_jacobian(&x)?;
            let mut out = Vec::new();
            for r in 0..j.rows() {
                for c in 0..j.cols() {
                    let v = j[(r, c)];
                    let got = if v > T::zero() {
                        1
                    } else if v < T::zero() {
                        -1
                    } else {
                        0
                    };
                    if got != signs.get(r, c) {
                        out.push(SignMismatch {
                            sample: s,
                            row: r,
                            col: c,
                            derivative: v.as_f64(),
                            expected: signs.get(r, c),
                        });
                    }
                }
            }
            Ok(out)
        })
        .collect();
    let mut mismatches = 0;
    let mut examples = Vec::new();
    for r in per_sample {
        let r = r?;
        mismatches += r.len();
        for m in r {
            if examples.len() < 10 {
                examples.push(m);
            }
        }
    }
    Ok(SignCheck {
        samples,
        mismatches,
        examples,
        passed: mismatches == 0,
    })
}

/// Checks that `high` is multistability-equivalent to `low` under `lift`:
/// interaction signs follow the sign matrix, every low-dimensional steady
/// state lifts to a high-dimensional one (injectively), and paired states
/// have equally many unstable modes.
pub fn check_equivalence<T: Real, H: GrnSystem<T> + ?Sized>(
    low: &ExprModel<T>,
    high: &H,
    lift: &LiftSpec<T>,
    opts: &EquivalenceOptions,
) -> Result<EquivalenceReport, AnalysisError> {
    let sign = sign_check(high, &lift.sign_matrix, opts.sign_samples)?;
    let re_tol = T::lit(opts.steady.re_tol);
    let low_states = find_steady_states(low, &opts.steady);

    let mut pairs = Vec::with_capacity(low_states.len());
    let mut lifted: Vec<Vec<T>> = Vec::new();
    for (index, s) in low_states.iter().enumerate() {
        let x = lift_point(&s.x, &lift.gains, &lift.assignment);
        let hs = classify(high, &x, re_tol)?;
        let lift_ok = hs.residual.as_f64() < opts.lift_tol;
        let inconclusive = s.on_imaginary_axis || hs.on_imaginary_axis;
        let (nyquist, nyquist_error) = if opts.nyquist && !inconclusive {
            match nyquist_pair(low, high, &s.x, &x) {
                Ok(t) => (
                    Some(NyquistSummary {
                        low_winding: t.low_winding,
                        high_winding: t.high_winding,
                        tube: t,
                    }),
                    None,
                ),
                Err(e) => (None, Some(e)),
            }
        } else {
            (None, None)
        };
        pairs.push(PairRecord {
            index,
            z: to_f64(&s.x),
            x: to_f64(&x),
            low_residual: s.residual.as_f64(),
            lift_residual: hs.residual.as_f64(),
            lift_ok,
            low_eigenvalues: complex_pairs(&s.eigenvalues),
            high_eigenvalues: complex_pairs(&hs.eigenvalues),
            low_unstable: s.unstable_count,
            high_unstable: hs.unstable_count,
            counts_match: s.unstable_count == hs.unstable_count,
            inconclusive,
            nyquist,
            nyquist_error,
        });
        lifted.push(x);
    }

    let mut injective = true;
    for a in 0..lifted.len() {
        for b in (a + 1)..lifted.len() {
            if same_state(&lifted[a], &lifted[b], opts.steady.dedup_tol) {
                injective = false;
            }
        }
    }

    let high_search = if opts.search_high {
        let hs = find_steady_states(high, &opts.steady);
        let mut used = vec![false; lifted.len()];
        let mut unmatched = Vec::new();
        for s in &hs {
            let hit = lifted
                .iter()
                .enumerate()
                .position(|(k, x)| !used[k] && same_state(x, &s.x, 1e-6f64.max(opts.lift_tol)));
            match hit {
                Some(k) => used[k] = true,
                None => unmatched.push(to_f64(&s.x)),
            }
        }
        Some(HighSearch {
            found: hs.len(),
            matched: used.iter().filter(|u| **u).count(),
            unmatched,
        })
    } else {
        None
    };

    let failing_pairs: Vec<usize> = pairs
        .iter()
        .filter(|p| !(p.lift_ok && p.counts_match))
        .map(|p| p.index)
        .collect();
    let inconclusive_pairs: Vec<usize> = pairs.iter().filter(|p| p.inconclusive).map(|p| p.index).collect();
    let search_ok = high_search
        .as_ref()
        .is_none_or(|h| h.unmatched.is_empty() && h.matched == pairs.len());
    let verdict = sign.passed
        && injective
        && failing_pairs.is_empty()
        && inconclusive_pairs.is_empty()
        && search_ok;
    Ok(EquivalenceReport {
        sign_check: sign,
        pairs,
        injective,
        high_search,
        failing_pairs,
        inconclusive_pairs,
        verdict,
    })
}

fn nyquist_pair<T: Real, H: GrnSystem<T> + ?Sized>(
    low: &ExprModel<T>,
    high: &H,
    z: &[T],
    x: &[T],
) -> Result<TubeReport, String> {
    let opts = NyquistOptions::default();
    let lb = loopbreak(low, z).map_err(|e| e.to_string())?;
    let hb = loopbreak(high, x).map_err(|e| e.to_string())?;
    let lc = nyquist_curve(&lb, &opts).map_err(|e| e.to_string())?;
    let hc = nyquist_curve(&hb, &opts).map_err(|e| e.to_string())?;
    Ok(compare_nyquist(&lc, &hc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_io::ModelSpec;

    fn linear() -> ExprModel<f64> {
        ExprModel::new(ModelSpec::from_strings(&["z"], &[], &["1"], &[1.0], &[(0.0, 5.0)]).unwrap())
    }

    #[test]
    fn one_dimensional_single_state() {
        let opts = SteadyStateOptions {
            n_starts: 50,
            ..Default::default()
        };
        let states = find_steady_states(&linear(), &opts);
        assert_eq!(states.len(), 1);
        assert!((states[0].x[0] - 1.0).abs() < 1e-12);
        assert_eq!(states[0].unstable_count, 0);
    }

    #[test]
    fn pure_decay_jacobian() {
        let m = ExprModel::<f64>::new(
            ModelSpec::from_strings(&["a", "b"], &[], &["0", "0"], &[0.5, 2.0], &[(0.0, 1.0), (0.0, 1.0)]).unwrap(),
        );
        let j = m.jacobian(&[0.3, 0.7]).unwrap();
        assert_eq!(j.to_rows(), vec![vec![-0.5, 0.0], vec![0.0, -2.0]]);
    }

    #[test]
    fn identity_lift_for_trivial_assignment() {
        let lift = LiftSpec::<f64>::identity(SignMatrix::zeros(2, 2));
        assert_eq!(lift_point(&[0.4, 3.0], &lift.gains, &lift.assignment), vec![0.4, 3.0]);
    }

    #[test]
    fn imaginary_axis_flagged() {
        let m = ExprModel::<f64>::new(
            ModelSpec::from_strings(&["z"], &[], &["z"], &[1.0], &[(0.0, 1.0)]).unwrap(),
        );
        let s = classify(&m, &[0.5], 1e-9).unwrap();
        assert!(s.on_imaginary_axis);
        assert!(!s.is_stable());
    }
}
