//! The vector-field abstraction shared by the analysis, frequency,
//! dynamics and continuation code.
//!
//! Every model has the form `dx/dt = A(x) - D x` with a diagonal, strictly
//! positive degradation `D`. Keeping the two parts apart is what allows
//! loopbreaking to use the structural decomposition instead of a numeric
//! guess.

use crate::linalg::Matrix;
use crate::model_io::EvalError;
use crate::scalar::Real;

pub trait GrnSystem<T: Real>: Send + Sync {
    fn dim(&self) -> usize;

    /// Diagonal of `D`.
    fn degradation(&self) -> &[T];

    /// `A(x)`.
    fn interaction_into(&self, x: &[T], out: &mut [T]) -> Result<(), EvalError>;

    /// `dA/dx` at `x`.
    fn interaction_jacobian(&self, x: &[T]) -> Result<Matrix<T>, EvalError>;

    /// Per-variable `[lo, hi]` box where states are sought.
    fn domain(&self) -> Vec<(T, T)>;

    fn interaction(&self, x: &[T]) -> Result<Vec<T>, EvalError> {
        let mut out = vec![T::zero(); self.dim()];
        self.interaction_into(x, &mut out)?;
        Ok(out)
    }

    fn rhs_into(&self, x: &[T], out: &mut [T]) -> Result<(), EvalError> {
        self.interaction_into(x, out)?;
        for ((o, k), xi) in out.iter_mut().zip(self.degradation()).zip(x) {
            *o -= *k * *xi;
        }
        Ok(())
    }

    fn rhs(&self, x: &[T]) -> Result<Vec<T>, EvalError> {
        let mut out = vec![T::zero(); self.dim()];
        self.rhs_into(x, &mut out)?;
        Ok(out)
    }

    /// Full Jacobian `dA/dx - D`.
    fn jacobian(&self, x: &[T]) -> Result<Matrix<T>, EvalError> {
        let mut j = self.interaction_jacobian(x)?;
        for (i, k) in self.degradation().iter().enumerate() {
            j[(i, i)] -= *k;
        }
        Ok(j)
    }
}

/// Systems with named scalar parameters that can be varied.
pub trait Parametric<T: Real>: GrnSystem<T> + Clone {
    fn parameter_names(&self) -> Vec<String>;

    fn parameter(&self, idx: usize) -> T;

    fn set_parameter(&mut self, idx: usize, value: T);

    /// `dA/dp_idx` at `x`.
    fn interaction_param_derivative(&self, x: &[T], idx: usize) -> Result<Vec<T>, EvalError>;

    fn parameter_index(&self, name: &str) -> Option<usize> {
        self.parameter_names().iter().position(|p| p == name)
    }
}

impl<T: Real, S: GrnSystem<T> + ?Sized> GrnSystem<T> for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn degradation(&self) -> &[T] {
        (**self).degradation()
    }
    fn interaction_into(&self, x: &[T], out: &mut [T]) -> Result<(), EvalError> {
        (**self).interaction_into(x, out)
    }
    fn interaction_jacobian(&self, x: &[T]) -> Result<Matrix<T>, EvalError> {
        (**self).interaction_jacobian(x)
    }
    fn domain(&self) -> Vec<(T, T)> {
        (**self).domain()
    }
}
