//! Executable form of a [`ModelSpec`]: bound parameter values plus
//! precomputed symbolic partial derivatives.

use std::sync::Arc;

use super::expr::{EvalError, Expr, Wrt};
use super::spec::{ModelError, ModelSpec};
use crate::linalg::Matrix;
use crate::sampling::Halton;
use crate::scalar::Real;
use crate::structure::SignMatrix;
use crate::system::{GrnSystem, Parametric};

#[derive(Debug)]
struct Derivatives {
    /// `[i][j]`: d a_i / d z_j, `None` where structurally zero.
    state: Vec<Vec<Option<Expr>>>,
    /// `[i][p]`: d a_i / d p.
    param: Vec<Vec<Option<Expr>>>,
}

fn nonzero(e: Expr) -> Option<Expr> {
    match e {
        Expr::Const(0.0) => None,
        e => Some(e),
    }
}

#[derive(Debug, Clone)]
pub struct ExprModel<T> {
    spec: Arc<ModelSpec>,
    derivs: Arc<Derivatives>,
    params: Vec<T>,
    degradation: Vec<T>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
#[error("unknown parameter `{0}`")]
pub struct UnknownParameter(pub String);

impl<T: Real> ExprModel<T> {
    /// Compiles a model with its default parameter values.
    pub fn new(spec: ModelSpec) -> Self {
        Self::from_arc(Arc::new(spec))
    }

    pub fn from_arc(spec: Arc<ModelSpec>) -> Self {
        let n = spec.dimension();
        let np = spec.parameters().len();
        let derivs = Derivatives {
            state: spec
                .interactions()
                .iter()
                .map(|e| (0..n).map(|j| nonzero(e.differentiate(Wrt::Var(j)))).collect())
                .collect(),
            param: spec
                .interactions()
                .iter()
                .map(|e| (0..np).map(|p| nonzero(e.differentiate(Wrt::Param(p)))).collect())
                .collect(),
        };
        Self {
            params: spec.parameters().iter().map(|p| T::lit(p.default)).collect(),
            degradation: spec.degradation().iter().map(|k| T::lit(*k)).collect(),
            derivs: Arc::new(derivs),
            spec,
        }
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn spec_arc(&self) -> &Arc<ModelSpec> {
        &self.spec
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    /// Returns a copy with the named parameters rebound.
    pub fn with_parameters(&self, values: &[(&str, T)]) -> Result<Self, UnknownParameter> {
        let mut m = self.clone();
        for (name, v) in values {
            let idx = self
                .spec
                .parameter_index(name)
                .ok_or_else(|| UnknownParameter(name.to_string()))?;
            m.params[idx] = *v;
        }
        Ok(m)
    }

    /// `a_i(z)`.
    pub fn eval_interaction(&self, i: usize, z: &[T]) -> Result<T, EvalError> {
        self.spec.interactions()[i].eval(z, &self.params)
    }

    /// Gradient of `a_i` with respect to `z`.
    pub fn interaction_gradient(&self, i: usize, z: &[T]) -> Result<Vec<T>, EvalError> {
        self.derivs.state[i]
            .iter()
            .map(|d| match d {
                Some(e) => e.eval(z, &self.params),
                None => Ok(T::zero()),
            })
            .collect()
    }

    /// `d a_i / d p` at `z`.
    pub fn interaction_param_partial(&self, i: usize, z: &[T], p: usize) -> Result<T, EvalError> {
        match &self.derivs.param[i][p] {
            Some(e) => e.eval(z, &self.params),
            None => Ok(T::zero()),
        }
    }

    /// Whether `d a_i / d z_j` is identically zero by construction.
    pub fn structurally_zero(&self, i: usize, j: usize) -> bool {
        self.derivs.state[i][j].is_none()
    }

    /// The declared sign matrix, or one inferred from the derivatives.
    pub fn sign_matrix(&self) -> Result<SignMatrix, ModelError> {
        match self.spec.sign_matrix() {
            Some(s) => Ok(s.clone()),
            None => self.infer_sign_matrix(512),
        }
    }

    /// Signs of `d a_i / d z_j` over `samples` interior points of the
    /// state box. Fails if a partial takes both signs.
    pub fn infer_sign_matrix(&self, samples: usize) -> Result<SignMatrix, ModelError> {
        let n = self.spec.dimension();
        let halton = Halton::new(n);
        let mut pos = vec![false; n * n];
        let mut neg = vec![false; n * n];
        for s in 0..samples {
            let z: Vec<T> = halton
                .interior_point(s, self.spec.domain(), 1e-3)
                .into_iter()
                .map(T::lit)
                .collect();
            for i in 0..n {
                let g = self.interaction_gradient(i, &z)?;
                for (j, v) in g.into_iter().enumerate() {
                    if v > T::zero() {
                        pos[i * n + j] = true;
                    } else if v < T::zero() {
                        neg[i * n + j] = true;
                    }
                }
            }
        }
        let mut out = SignMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                match (pos[k], neg[k]) {
                    (true, true) => return Err(ModelError::NonConstantSign { row: i + 1, col: j + 1 }),
                    (true, false) => out.set(i, j, 1),
                    (false, true) => out.set(i, j, -1),
                    (false, false) => {}
                }
            }
        }
        Ok(out)
    }
}

impl<T: Real> GrnSystem<T> for ExprModel<T> {
    fn dim(&self) -> usize {
        self.spec.dimension()
    }

    fn degradation(&self) -> &[T] {
        &self.degradation
    }

    fn interaction_into(&self, x: &[T], out: &mut [T]) -> Result<(), EvalError> {
        for (i, e) in self.spec.interactions().iter().enumerate() {
            out[i] = e.eval(x, &self.params)?;
        }
        Ok(())
    }

    fn interaction_jacobian(&self, x: &[T]) -> Result<Matrix<T>, EvalError> {
        let n = self.dim();
        let mut j = Matrix::zeros(n, n);
        for i in 0..n {
            for (c, d) in self.derivs.state[i].iter().enumerate() {
                if let Some(e) = d {
                    j[(i, c)] = e.eval(x, &self.params)?;
                }
            }
        }
        Ok(j)
    }

    fn domain(&self) -> Vec<(T, T)> {
        self.spec
            .domain()
            .iter()
            .map(|(a, b)| (T::lit(*a), T::lit(*b)))
            .collect()
    }
}

impl<T: Real> Parametric<T> for ExprModel<T> {
    fn parameter_names(&self) -> Vec<String> {
        self.spec.parameter_names()
    }

    fn parameter(&self, idx: usize) -> T {
        self.params[idx]
    }

    fn set_parameter(&mut self, idx: usize, value: T) {
        self.params[idx] = value;
    }

    fn interaction_param_derivative(&self, x: &[T], idx: usize) -> Result<Vec<T>, EvalError> {
        (0..self.dim())
            .map(|i| self.interaction_param_partial(i, x, idx))
            .collect()
    }
}
