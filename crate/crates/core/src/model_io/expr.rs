//! Rational-function expression trees over state variables and named
//! parameters.

use std::fmt;

use thiserror::Error;

use crate::scalar::Real;

/// Expression tree. Variables and parameters are stored as 0-based indices
/// into the owning model's variable and parameter lists.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Param(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Integer power.
    Pow(Box<Expr>, i32),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("division by zero in `{denominator}`")]
    DivisionByZero { denominator: String },
    #[error("variable index {index} out of range for state of length {len}")]
    VarOutOfRange { index: usize, len: usize },
    #[error("parameter index {index} out of range ({len} bound)")]
    ParamOutOfRange { index: usize, len: usize },
}

/// What to differentiate with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wrt {
    Var(usize),
    Param(usize),
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    /// Evaluates the tree. Same tree and same inputs give bit-identical output.
    pub fn eval<T: Real>(&self, vars: &[T], params: &[T]) -> Result<T, EvalError> {
        Ok(match self {
            Expr::Const(c) => T::lit(*c),
            Expr::Var(i) => *vars.get(*i).ok_or(EvalError::VarOutOfRange {
                index: *i,
                len: vars.len(),
            })?,
            Expr::Param(i) => *params.get(*i).ok_or(EvalError::ParamOutOfRange {
                index: *i,
                len: params.len(),
            })?,
            Expr::Neg(a) => -a.eval(vars, params)?,
            Expr::Add(a, b) => a.eval(vars, params)? + b.eval(vars, params)?,
            Expr::Sub(a, b) => a.eval(vars, params)? - b.eval(vars, params)?,
            Expr::Mul(a, b) => a.eval(vars, params)? * b.eval(vars, params)?,
            Expr::Div(a, b) => {
                let num = a.eval(vars, params)?;
                let den = b.eval(vars, params)?;
                if den == T::zero() {
                    return Err(EvalError::DivisionByZero {
                        denominator: b.to_string(),
                    });
                }
                num / den
            }
            Expr::Pow(a, k) => {
                let base = a.eval(vars, params)?;
                if *k < 0 && base == T::zero() {
                    return Err(EvalError::DivisionByZero {
                        denominator: a.to_string(),
                    });
                }
                base.powi(*k)
            }
        })
    }

    /// Exact symbolic derivative. Applies light constant folding so that
    /// derivatives with respect to absent symbols collapse to `Const(0.0)`.
    pub fn differentiate(&self, wrt: Wrt) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(i) => Expr::Const(if wrt == Wrt::Var(*i) { 1.0 } else { 0.0 }),
            Expr::Param(i) => Expr::Const(if wrt == Wrt::Param(*i) { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.differentiate(wrt)),
            Expr::Add(a, b) => add(a.differentiate(wrt), b.differentiate(wrt)),
            Expr::Sub(a, b) => sub(a.differentiate(wrt), b.differentiate(wrt)),
            Expr::Mul(a, b) => add(
                mul(a.differentiate(wrt), (**b).clone()),
                mul((**a).clone(), b.differentiate(wrt)),
            ),
            Expr::Div(a, b) => {
                let da = a.differentiate(wrt);
                let db = b.differentiate(wrt);
                if is_zero(&db) {
                    return div(da, (**b).clone());
                }
                div(
                    sub(mul(da, (**b).clone()), mul((**a).clone(), db)),
                    pow((**b).clone(), 2),
                )
            }
            Expr::Pow(a, k) => {
                let da = a.differentiate(wrt);
                if *k == 0 || is_zero(&da) {
                    return Expr::Const(0.0);
                }
                mul(
                    mul(Expr::Const(f64::from(*k)), pow((**a).clone(), k - 1)),
                    da,
                )
            }
        }
    }

    /// Whether the expression mentions the given symbol.
    pub fn depends_on(&self, wrt: Wrt) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(i) => wrt == Wrt::Var(*i),
            Expr::Param(i) => wrt == Wrt::Param(*i),
            Expr::Neg(a) | Expr::Pow(a, _) => a.depends_on(wrt),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.depends_on(wrt) || b.depends_on(wrt)
            }
        }
    }

    pub fn max_var_index(&self) -> Option<usize> {
        self.fold_indices(&|e| match e {
            Expr::Var(i) => Some(*i),
            _ => None,
        })
    }

    pub fn max_param_index(&self) -> Option<usize> {
        self.fold_indices(&|e| match e {
            Expr::Param(i) => Some(*i),
            _ => None,
        })
    }

    fn fold_indices(&self, leaf: &dyn Fn(&Expr) -> Option<usize>) -> Option<usize> {
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Param(_) => leaf(self),
            Expr::Neg(a) | Expr::Pow(a, _) => a.fold_indices(leaf),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                match (a.fold_indices(leaf), b.fold_indices(leaf)) {
                    (Some(x), Some(y)) => Some(x.max(y)),
                    (x, y) => x.or(y),
                }
            }
        }
    }

    /// Replaces every `Var(i)` with `replacements[i]`.
    pub fn substitute_vars(&self, replacements: &[Expr]) -> Expr {
        match self {
            Expr::Var(i) => replacements[*i].clone(),
            Expr::Const(_) | Expr::Param(_) => self.clone(),
            Expr::Neg(a) => Expr::Neg(Box::new(a.substitute_vars(replacements))),
            Expr::Add(a, b) => Expr::Add(
                Box::new(a.substitute_vars(replacements)),
                Box::new(b.substitute_vars(replacements)),
            ),
            Expr::Sub(a, b) => Expr::Sub(
                Box::new(a.substitute_vars(replacements)),
                Box::new(b.substitute_vars(replacements)),
            ),
            Expr::Mul(a, b) => Expr::Mul(
                Box::new(a.substitute_vars(replacements)),
                Box::new(b.substitute_vars(replacements)),
            ),
            Expr::Div(a, b) => Expr::Div(
                Box::new(a.substitute_vars(replacements)),
                Box::new(b.substitute_vars(replacements)),
            ),
            Expr::Pow(a, k) => Expr::Pow(Box::new(a.substitute_vars(replacements)), *k),
        }
    }

    /// Renders with the given symbol names. The output re-parses to a
    /// structurally identical tree.
    pub fn display_with<'a>(&'a self, vars: &'a [String], params: &'a [String]) -> Named<'a> {
        Named {
            expr: self,
            vars,
            params,
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => 3,
            _ => 5,
        }
    }

    fn write(
        &self,
        f: &mut fmt::Formatter<'_>,
        var: &dyn Fn(usize) -> String,
        param: &dyn Fn(usize) -> String,
    ) -> fmt::Result {
        let child = |f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool| -> fmt::Result {
            if parens {
                write!(f, "(")?;
                e.write(f, var, param)?;
                write!(f, ")")
            } else {
                e.write(f, var, param)
            }
        };
        match self {
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(i) => write!(f, "{}", var(*i)),
            Expr::Param(i) => write!(f, "{}", param(*i)),
            Expr::Neg(a) => {
                write!(f, "-")?;
                let parens = matches!(**a, Expr::Const(_)) || a.precedence() < 3;
                child(f, a, parens)
            }
            Expr::Pow(a, k) => {
                child(f, a, a.precedence() < 5)?;
                if *k < 0 {
                    write!(f, "^({k})")
                } else {
                    write!(f, "^{k}")
                }
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                let p = self.precedence();
                let op = match self {
                    Expr::Add(..) => " + ",
                    Expr::Sub(..) => " - ",
                    Expr::Mul(..) => " * ",
                    _ => " / ",
                };
                child(f, a, a.precedence() < p)?;
                write!(f, "{op}")?;
                child(f, b, b.precedence() <= p)
            }
        }
    }
}

impl fmt::Display for Expr {
    /// Default rendering names variables `z1..` and parameters `p1..`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f, &|i| format!("z{}", i + 1), &|i| format!("p{}", i + 1))
    }
}

/// Display adapter returned by [`Expr::display_with`].
pub struct Named<'a> {
    expr: &'a Expr,
    vars: &'a [String],
    params: &'a [String],
}

impl fmt::Display for Named<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.expr.write(
            f,
            &|i| {
                self.vars
                    .get(i)
                    .cloned()
                    .unwrap_or_else(|| format!("z{}", i + 1))
            },
            &|i| {
                self.params
                    .get(i)
                    .cloned()
                    .unwrap_or_else(|| format!("p{}", i + 1))
            },
        )
    }
}

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Const(c) if *c == 0.0)
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Const(c) if *c == 1.0)
}

pub(crate) fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
        _ if is_zero(&a) => b,
        _ if is_zero(&b) => a,
        _ => Expr::Add(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
        _ if is_zero(&b) => a,
        _ if is_zero(&a) => neg(b),
        _ => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    match (&a, &b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
        _ if is_zero(&a) || is_zero(&b) => Expr::Const(0.0),
        _ if is_one(&a) => b,
        _ if is_one(&b) => a,
        _ => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub(crate) fn div(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        return Expr::Const(0.0);
    }
    if is_one(&b) {
        return a;
    }
    Expr::Div(Box::new(a), Box::new(b))
}

pub(crate) fn pow(a: Expr, k: i32) -> Expr {
    match k {
        0 => Expr::Const(1.0),
        1 => a,
        _ => match a {
            Expr::Const(c) if k > 0 => Expr::Const(c.powi(k)),
            other => Expr::Pow(Box::new(other), k),
        },
    }
}

/// Sum of `coef * Var(j)` terms, skipping zero coefficients and writing unit
/// coefficients as bare variables.
pub fn linear_combination(terms: &[(usize, f64)]) -> Expr {
    let mut out: Option<Expr> = None;
    for &(j, c) in terms {
        if c == 0.0 {
            continue;
        }
        let term = if c == 1.0 || c == -1.0 {
            Expr::Var(j)
        } else {
            Expr::Mul(Box::new(Expr::Const(c.abs())), Box::new(Expr::Var(j)))
        };
        out = Some(match (out, c < 0.0) {
            (None, false) => term,
            (None, true) => Expr::Neg(Box::new(term)),
            (Some(acc), false) => Expr::Add(Box::new(acc), Box::new(term)),
            (Some(acc), true) => Expr::Sub(Box::new(acc), Box::new(term)),
        });
    }
    out.unwrap_or(Expr::Const(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(i: usize) -> Box<Expr> {
        Box::new(Expr::Var(i))
    }

    #[test]
    fn evaluates_polynomial() {
        // 0.2*z1^2 + 0.5 at z1 = 12
        let e = Expr::Add(
            Box::new(Expr::Mul(
                Box::new(Expr::Const(0.2)),
                Box::new(Expr::Pow(v(0), 2)),
            )),
            Box::new(Expr::Const(0.5)),
        );
        let r: f64 = e.eval(&[12.0], &[]).unwrap();
        assert!((r - 29.3).abs() < 1e-12);
    }

    #[test]
    fn division_by_zero_reports_denominator() {
        let e = Expr::Div(v(0), v(1));
        let err = e.eval(&[1.0, 0.0], &[]).unwrap_err();
        assert_eq!(
            err,
            EvalError::DivisionByZero {
                denominator: "z2".into()
            }
        );
    }

    #[test]
    fn derivative_of_square() {
        let e = Expr::Mul(Box::new(Expr::Const(0.1)), Box::new(Expr::Pow(v(0), 2)));
        let d = e.differentiate(Wrt::Var(0));
        for z in [0.5, 2.0, 7.0] {
            assert!((d.eval::<f64>(&[z], &[]).unwrap() - 0.2 * z).abs() < 1e-14);
        }
        assert_eq!(e.differentiate(Wrt::Var(1)), Expr::Const(0.0));
    }

    #[test]
    fn display_parenthesizes_for_structure() {
        let e = Expr::Sub(v(0), Box::new(Expr::Sub(v(1), v(2))));
        assert_eq!(e.to_string(), "z1 - (z2 - z3)");
        let p = Expr::Pow(Box::new(Expr::Const(-2.0)), 2);
        assert_eq!(p.to_string(), "(-2.0)^2");
        let n = Expr::Neg(Box::new(Expr::Const(2.0)));
        assert_eq!(n.to_string(), "-(2.0)");
    }

    #[test]
    fn linear_combination_skips_zeros() {
        let e = linear_combination(&[(0, 1.0), (1, 0.0), (3, -2.5)]);
        assert_eq!(e.to_string(), "z1 - 2.5 * z4");
        assert_eq!(linear_combination(&[]), Expr::Const(0.0));
    }
}
