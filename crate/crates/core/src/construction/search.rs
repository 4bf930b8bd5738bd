//! Numeric search for module degradation rates `K` and weights `eps`.

use serde::Serialize;

use super::{assemble_with_low_signs, ConstructionError, GainTable, HighDimModel};
use crate::analysis::{find_steady_states, lift_point, SteadyStateOptions};
use crate::frequency::{compare_nyquist, loopbreak, nyquist_curve, NyquistCurve, NyquistOptions, TubeReport};
use crate::model_io::ExprModel;
use crate::sampling::Halton;
use crate::scalar::{max_abs, Real};
use crate::structure::{ModuleAssignment, SignMatrix};
use crate::system::GrnSystem;

/// When the frequency-domain comparison accepts a candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NyquistCriterion {
    /// The high-dimensional curve stays strictly inside the tube of radius
    /// `min_w |det(I - G_low(jw))|` around the low-dimensional curve.
    Tube,
    /// Winding numbers agree at every steady state.
    WindingMatch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    /// Initial `K`; all ones if absent.
    pub k_start: Option<Vec<f64>>,
    pub epsilon_start: f64,
    pub epsilon_floor: f64,
    /// Largest multiple of the initial `K` tried.
    pub max_scale: f64,
    /// Interior points checked for positivity of the auxiliary map.
    pub samples: usize,
    pub criterion: NyquistCriterion,
    pub steady: SteadyStateOptions,
    pub lift_tol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            k_start: None,
            epsilon_start: 1e-3,
            epsilon_floor: 1e-12,
            max_scale: 2f64.powi(40),
            samples: 4096,
            criterion: NyquistCriterion::Tube,
            steady: SteadyStateOptions::default(),
            lift_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchStep {
    pub scale: f64,
    pub k: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub accepted: bool,
    pub outcome: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterChoice {
    pub k: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub scale: f64,
    pub criterion: NyquistCriterion,
    pub states: usize,
    pub tube: Vec<TubeReport>,
    pub steps: Vec<SearchStep>,
}

fn mu_positive<T: Real>(model: &HighDimModel<T>, samples: usize, extra: &[Vec<T>]) -> bool {
    let aux = model.auxiliary();
    let domain: Vec<(f64, f64)> = model
        .domain()
        .iter()
        .map(|(a, b)| (a.as_f64(), b.as_f64()))
        .collect();
    let halton = Halton::new(model.dim());
    let sampled = (0..samples).all(|s| {
        let x: Vec<T> = halton
            .interior_point(s, &domain, 1e-3)
            .into_iter()
            .map(T::lit)
            .collect();
        aux.min_consumed(&x) > T::zero()
    });
    sampled && extra.iter().all(|x| aux.min_consumed(x) > T::zero())
}

/// Doubles all module degradation rates until the module subsystems are
/// stable with positive gains, the auxiliary map is positive on a sample of
/// the state box (halving `eps` as needed), and the Nyquist criterion holds
/// at every steady state of the low-dimensional model.
pub fn choose_parameters<T: Real>(
    low: &ExprModel<T>,
    s_high: &SignMatrix,
    assignment: &ModuleAssignment,
    opts: &SearchOptions,
) -> Result<ParameterChoice, ConstructionError> {
    let n = assignment.masters();
    let m = assignment.total() - n;
    let s_low = low.sign_matrix()?;
    let k0: Vec<f64> = match &opts.k_start {
        Some(k) => {
            super::check_len("initial K", m, k.len())?;
            k.clone()
        }
        None => vec![1.0; m],
    };
    if m == 0 {
        return Ok(ParameterChoice {
            k: Vec::new(),
            epsilon: vec![opts.epsilon_start; n],
            scale: 1.0,
            criterion: opts.criterion,
            states: 0,
            tube: Vec::new(),
            steps: Vec::new(),
        });
    }

    let states = find_steady_states(low, &opts.steady);
    let nyq = NyquistOptions::<T>::default();
    let low_curves: Vec<NyquistCurve<T>> = states
        .iter()
        .map(|s| {
            let sys = loopbreak(low, &s.x).map_err(|e| ConstructionError::Analysis(e.to_string()))?;
            nyquist_curve(&sys, &nyq).map_err(|e| ConstructionError::Analysis(e.to_string()))
        })
        .collect::<Result<_, _>>()?;

    let mut steps = Vec::new();
    let mut scale = 1.0;
    let mut last = String::from("no candidate evaluated");
    while scale <= opts.max_scale {
        let k: Vec<T> = k0.iter().map(|v| T::lit(v * scale)).collect();
        let kf: Vec<f64> = k.iter().map(|v| v.as_f64()).collect();
        let mut record = |eps: Vec<f64>, accepted: bool, outcome: String| {
            steps.push(SearchStep {
                scale,
                k: kf.clone(),
                epsilon: eps,
                accepted,
                outcome,
            })
        };
        if let Err(e) = GainTable::compute(s_high, assignment, &k) {
            last = e.to_string();
            record(Vec::new(), false, last.clone());
            scale *= 2.0;
            continue;
        }

        let mut eps = opts.epsilon_start;
        let mut model = None;
        while eps >= opts.epsilon_floor {
            let e = vec![T::lit(eps); n];
            let hm = assemble_with_low_signs(low, &s_low, s_high, assignment, &k, &e)?;
            let lifted: Vec<Vec<T>> = states
                .iter()
                .map(|s| lift_point(&s.x, hm.gains(), assignment))
                .collect();
            if mu_positive(&hm, opts.samples, &lifted) {
                model = Some((hm, lifted));
                break;
            }
            eps /= 2.0;
        }
        let Some((hm, lifted)) = model else {
            last = format!("auxiliary map not positive for any eps >= {:e}", opts.epsilon_floor);
            record(Vec::new(), false, last.clone());
            scale *= 2.0;
            continue;
        };
        let epsv = vec![eps; n];

        let mut tubes = Vec::with_capacity(states.len());
        let mut failure = None;
        for (idx, (x, lc)) in lifted.iter().zip(&low_curves).enumerate() {
            let r = max_abs(&hm.rhs(x)?).as_f64();
            if !(r < opts.lift_tol) {
                return Err(ConstructionError::Analysis(format!(
                    "lifted steady state {} has residual {r:e}; the lift does not fit this construction",
                    idx + 1
                )));
            }
            let hc = loopbreak(&hm, x)
                .and_then(|sys| nyquist_curve(&sys, &nyq))
                .map_err(|e| ConstructionError::Analysis(e.to_string()));
            let hc = match hc {
                Ok(c) => c,
                Err(e) => {
                    failure = Some(format!("state {}: {e}", idx + 1));
                    break;
                }
            };
            let t = compare_nyquist(lc, &hc);
            let ok = match opts.criterion {
                NyquistCriterion::Tube => t.within_tube,
                NyquistCriterion::WindingMatch => t.low_winding == t.high_winding,
            };
            if !ok && failure.is_none() {
                failure = Some(format!(
                    "state {}: deviation {:.3e} vs tube radius {:.3e}, windings {} / {}",
                    idx + 1,
                    t.max_deviation,
                    t.epsilon,
                    t.low_winding,
                    t.high_winding
                ));
            }
            tubes.push(t);
        }
        match failure {
            None => {
                record(epsv.clone(), true, "accepted".into());
                return Ok(ParameterChoice {
                    k: kf,
                    epsilon: epsv,
                    scale,
                    criterion: opts.criterion,
                    states: states.len(),
                    tube: tubes,
                    steps,
                });
            }
            Some(f) => {
                last = f;
                record(epsv, false, last.clone());
                scale *= 2.0;
            }
        }
    }
    Err(ConstructionError::SearchExhausted {
        scale: scale / 2.0,
        reason: last,
    })
}
