//! Building the high-dimensional model from a low-dimensional one and a
//! modular sign matrix.
//!
//! Module genes get linear dynamics `dx_i/dt = sum_j S_ij x_j - K_i x_i`.
//! Master gene `i` keeps its low-dimensional interaction function `a_i`, but
//! each argument `z_nu` is replaced by `mu_i(x)_nu`: a gain-normalised
//! average over the genes of `nu`'s module (and `nu` itself) that act on `i`
//! with the same sign as `z_nu` acts on `z_i`, corrected by a small `eps_i`
//! share of the opposite-sign ones. At a lifted steady state every consumed
//! component of `mu_i` equals the corresponding `z_nu`.

mod search;

use thiserror::Error;

use crate::linalg::{eigenvalues, Lu, Matrix};
use crate::model_io::{
    linear_combination, ConstructionRecord, EvalError, Expr, ExprModel, ModelError, ModelSpec,
    Parameter,
};
use crate::scalar::{Cplx, Real};
use crate::structure::{check_modular_structure, ModuleAssignment, SignMatrix, StructureError};
use crate::system::{GrnSystem, Parametric};

pub use search::{choose_parameters, NyquistCriterion, ParameterChoice, SearchOptions, SearchStep};

#[derive(Debug, Error)]
pub enum ConstructionError {
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("evaluation failed: {0}")]
    Eval(#[from] EvalError),
    #[error("{what}: expected {expected} values, got {got}")]
    Length {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("module degradation K{} = {value} must be positive", .gene + 1)]
    NonPositiveK { gene: usize, value: f64 },
    #[error("eps{} = {value} must be positive", .master + 1)]
    NonPositiveEpsilon { master: usize, value: f64 },
    #[error("module subsystem of master x{} is singular; increase its degradation rates", .master + 1)]
    SingularModule { master: usize },
    #[error("steady-state gain gamma({},{}) = {value} is not positive; increase the module degradation rates", .gene + 1, .master + 1)]
    NonPositiveGain {
        gene: usize,
        master: usize,
        value: f64,
    },
    #[error("module subsystem of master x{} is not Hurwitz (spectral abscissa {abscissa})", .master + 1)]
    NotHurwitz { master: usize, abscissa: f64 },
    #[error("x{} is not a module gene of master x{}", .gene + 1, .master + 1)]
    NotInModule { gene: usize, master: usize },
    #[error("resolvent of the module of master x{} is singular at the requested point", .master + 1)]
    SingularResolvent { master: usize },
    #[error("no gene of x{}'s module acts on x{} with the required sign", .argument + 1, .target + 1)]
    EmptyIndexVector { target: usize, argument: usize },
    #[error("parameter search exhausted at K scale {scale}: {reason}")]
    SearchExhausted { scale: f64, reason: String },
    #[error("{0}")]
    Analysis(String),
}

fn check_len(what: &'static str, expected: usize, got: usize) -> Result<(), ConstructionError> {
    if expected == got {
        Ok(())
    } else {
        Err(ConstructionError::Length {
            what,
            expected,
            got,
        })
    }
}

/// Linear rows of the module genes.
#[derive(Debug, Clone)]
pub struct ModuleRows<T> {
    masters: usize,
    /// Per module gene, the nonzero `(column, sign)` pairs of its row.
    inputs: Vec<Vec<(usize, i8)>>,
    k: Vec<T>,
}

impl<T: Real> ModuleRows<T> {
    pub fn masters(&self) -> usize {
        self.masters
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    pub fn degradation(&self) -> &[T] {
        &self.k
    }

    pub fn inputs(&self, gene: usize) -> &[(usize, i8)] {
        &self.inputs[gene - self.masters]
    }

    /// Interaction part of module gene `gene` at `x`.
    pub fn interaction(&self, gene: usize, x: &[T]) -> T {
        self.inputs(gene)
            .iter()
            .map(|&(j, s)| if s > 0 { x[j] } else { -x[j] })
            .sum()
    }

    /// `F_i(x)` for a module gene.
    pub fn rhs(&self, gene: usize, x: &[T]) -> T {
        self.interaction(gene, x) - self.k[gene - self.masters] * x[gene]
    }

    pub fn interaction_expr(&self, gene: usize) -> Expr {
        let terms: Vec<(usize, f64)> = self
            .inputs(gene)
            .iter()
            .map(|&(j, s)| (j, s as f64))
            .collect();
        linear_combination(&terms)
    }
}

fn check_k<T: Real>(k: &[T], masters: usize) -> Result<(), ConstructionError> {
    for (idx, v) in k.iter().enumerate() {
        if !(v.is_finite() && *v > T::zero()) {
            return Err(ConstructionError::NonPositiveK {
                gene: masters + idx,
                value: v.as_f64(),
            });
        }
    }
    Ok(())
}

/// Module-gene rows `sum_j S_ij x_j - K_i x_i`; `k` lists `K` for genes
/// `n..N` in order.
pub fn build_module_dynamics<T: Real>(
    s: &SignMatrix,
    assignment: &ModuleAssignment,
    k: &[T],
) -> Result<ModuleRows<T>, ConstructionError> {
    let n = assignment.masters();
    let total = assignment.total();
    check_len("module degradation rates", total - n, k.len())?;
    check_k(k, n)?;
    let inputs = (n..total)
        .map(|i| {
            (0..total)
                .filter_map(|j| {
                    let v = s.get(i, j);
                    (v != 0).then_some((j, v))
                })
                .collect()
        })
        .collect();
    Ok(ModuleRows {
        masters: n,
        inputs,
        k: k.to_vec(),
    })
}

/// Jacobian of master `master`'s module subsystem, rows and columns ordered
/// as [`ModuleAssignment::module`].
pub fn module_jacobian<T: Real>(
    s: &SignMatrix,
    assignment: &ModuleAssignment,
    k: &[T],
    master: usize,
) -> Matrix<T> {
    let genes = assignment.module(master);
    let n = assignment.masters();
    Matrix::from_fn(genes.len(), genes.len(), |a, b| {
        let (i, j) = (genes[a], genes[b]);
        let mut v = T::lit(s.get(i, j) as f64);
        if a == b {
            v -= k[i - n];
        }
        v
    })
}

fn input_vector<T: Real>(s: &SignMatrix, genes: &[usize], master: usize) -> Vec<T> {
    genes.iter().map(|&i| T::lit(s.get(i, master) as f64)).collect()
}

/// Steady-state gains from `master` to every gene of its module, in module
/// order. Checks, in this order, nonsingularity, positivity, stability.
pub fn module_gains<T: Real>(
    s: &SignMatrix,
    assignment: &ModuleAssignment,
    k: &[T],
    master: usize,
) -> Result<Vec<T>, ConstructionError> {
    let n = assignment.masters();
    check_len("module degradation rates", assignment.total() - n, k.len())?;
    check_k(k, n)?;
    let genes = assignment.module(master);
    if genes.is_empty() {
        return Ok(Vec::new());
    }
    let j = module_jacobian(s, assignment, k, master);
    let neg = j.map(|v| -v);
    let lu = Lu::new(&neg).map_err(|_| ConstructionError::SingularModule { master })?;
    let g = lu.solve(&input_vector::<T>(s, genes, master));
    for (&gene, v) in genes.iter().zip(&g) {
        if !(v.is_finite() && *v > T::zero()) {
            return Err(ConstructionError::NonPositiveGain {
                gene,
                master,
                value: v.as_f64(),
            });
        }
    }
    let ev = eigenvalues(&j).map_err(|e| ConstructionError::Analysis(e.to_string()))?;
    let abscissa = ev.iter().map(|l| l.re).fold(T::neg_infinity(), T::max);
    if abscissa >= T::zero() {
        return Err(ConstructionError::NotHurwitz {
            master,
            abscissa: abscissa.as_f64(),
        });
    }
    Ok(g)
}

fn position_in_module(
    assignment: &ModuleAssignment,
    master: usize,
    gene: usize,
) -> Result<usize, ConstructionError> {
    assignment
        .module(master)
        .iter()
        .position(|&g| g == gene)
        .ok_or(ConstructionError::NotInModule { gene, master })
}

/// DC gain from master `master` to module gene `gene`.
pub fn steady_state_gain<T: Real>(
    assignment: &ModuleAssignment,
    s: &SignMatrix,
    k: &[T],
    master: usize,
    gene: usize,
) -> Result<T, ConstructionError> {
    let pos = position_in_module(assignment, master, gene)?;
    Ok(module_gains(s, assignment, k, master)?[pos])
}

/// Transfer function from master `master` to module gene `gene` at `lambda`.
pub fn transfer_gain<T: Real>(
    assignment: &ModuleAssignment,
    s: &SignMatrix,
    k: &[T],
    master: usize,
    gene: usize,
    lambda: Cplx<T>,
) -> Result<Cplx<T>, ConstructionError> {
    let pos = position_in_module(assignment, master, gene)?;
    let genes = assignment.module(master);
    let j = module_jacobian(s, assignment, k, master);
    let m = Matrix::from_fn(genes.len(), genes.len(), |a, b| {
        let d = if a == b { lambda } else { Cplx::new(T::zero(), T::zero()) };
        d - Cplx::new(j[(a, b)], T::zero())
    });
    let lu = Lu::new(&m).map_err(|_| ConstructionError::SingularResolvent { master })?;
    let b: Vec<Cplx<T>> = input_vector::<T>(s, genes, master)
        .into_iter()
        .map(|v| Cplx::new(v, T::zero()))
        .collect();
    Ok(lu.solve(&b)[pos])
}

/// Gains used to normalise signals entering the auxiliary map.
#[derive(Debug, Clone, PartialEq)]
pub struct GainTable<T> {
    masters: usize,
    module: Vec<Option<T>>,
    master_pairs: Vec<T>,
}

impl<T: Real> GainTable<T> {
    /// Gains of every module; fails on the first module whose subsystem is
    /// singular, has a non-positive gain, or is unstable.
    pub fn compute(
        s: &SignMatrix,
        assignment: &ModuleAssignment,
        k: &[T],
    ) -> Result<Self, ConstructionError> {
        let n = assignment.masters();
        let mut module = vec![None; assignment.total() - n];
        for master in 0..n {
            let g = module_gains(s, assignment, k, master)?;
            for (&gene, v) in assignment.module(master).iter().zip(g) {
                module[gene - n] = Some(v);
            }
        }
        check_len("module degradation rates", assignment.total() - n, k.len())?;
        let master_pairs = (0..n * n)
            .map(|idx| T::lit(s.get(idx / n, idx % n).abs() as f64))
            .collect();
        Ok(Self {
            masters: n,
            module,
            master_pairs,
        })
    }

    /// Gain of module gene `gene` from its own master.
    pub fn module_gain(&self, gene: usize) -> Option<T> {
        gene.checked_sub(self.masters)
            .and_then(|idx| self.module.get(idx).copied().flatten())
    }

    /// `|S_ik|` for a pair of masters.
    pub fn master_gain(&self, i: usize, k: usize) -> T {
        self.master_pairs[i * self.masters + k]
    }

    /// Normalisation used for gene `j` in the argument that stands for
    /// master `nu`: 1 for `nu` itself, the module gain for its module genes.
    pub fn normaliser(&self, j: usize, nu: usize) -> Option<T> {
        if j == nu {
            Some(T::one())
        } else {
            self.module_gain(j)
        }
    }

    /// Scale factor of the steady-state lift for gene `j`: 1 for masters,
    /// the module gain for attached module genes, 0 for orphans.
    pub fn lift_factor(&self, j: usize) -> T {
        if j < self.masters {
            T::one()
        } else {
            self.module_gain(j).unwrap_or_else(T::zero)
        }
    }

    pub fn masters(&self) -> usize {
        self.masters
    }

    pub fn total(&self) -> usize {
        self.masters + self.module.len()
    }
}

/// Support vectors selecting, for target master `i` and argument `nu`, the
/// genes of `nu`'s module (and `nu`) acting on `i` with the same sign as
/// `z_nu` acts on `z_i` (`eq`) or with the opposite sign (`neq`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexVectors {
    masters: usize,
    total: usize,
    eq: Vec<Vec<bool>>,
    neq: Vec<Vec<bool>>,
    required: Vec<bool>,
}

impl IndexVectors {
    fn at(&self, i: usize, nu: usize) -> usize {
        i * self.masters + nu
    }

    pub fn eq(&self, i: usize, nu: usize) -> &[bool] {
        &self.eq[self.at(i, nu)]
    }

    pub fn neq(&self, i: usize, nu: usize) -> &[bool] {
        &self.neq[self.at(i, nu)]
    }

    /// 1-norm, i.e. the number of selected genes.
    pub fn eq_norm(&self, i: usize, nu: usize) -> usize {
        self.eq(i, nu).iter().filter(|b| **b).count()
    }

    pub fn neq_norm(&self, i: usize, nu: usize) -> usize {
        self.neq(i, nu).iter().filter(|b| **b).count()
    }

    /// Whether `a_i` depends on its `nu` argument at all.
    pub fn required(&self, i: usize, nu: usize) -> bool {
        self.required[self.at(i, nu)]
    }

    pub fn masters(&self) -> usize {
        self.masters
    }

    pub fn total(&self) -> usize {
        self.total
    }
}

pub fn build_index_vectors(
    s_low: &SignMatrix,
    s_high: &SignMatrix,
    assignment: &ModuleAssignment,
) -> IndexVectors {
    let n = assignment.masters();
    let total = assignment.total();
    let mut eq = Vec::with_capacity(n * n);
    let mut neq = Vec::with_capacity(n * n);
    let mut required = Vec::with_capacity(n * n);
    for i in 0..n {
        for nu in 0..n {
            let want = s_low.get(i, nu);
            let mut e = vec![false; total];
            let mut d = vec![false; total];
            if want != 0 {
                let support = std::iter::once(nu).chain(assignment.module(nu).iter().copied());
                for j in support {
                    match s_high.get(i, j) {
                        0 => {}
                        v if v == want => e[j] = true,
                        _ => d[j] = true,
                    }
                }
            }
            eq.push(e);
            neq.push(d);
            required.push(want != 0);
        }
    }
    IndexVectors {
        masters: n,
        total,
        eq,
        neq,
        required,
    }
}

/// Linear auxiliary map: `mu_i(x) = C_i x` with one `n x N` coefficient
/// matrix per master. Components `a_i` does not depend on are identically 0.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxiliaryMap<T> {
    coefficients: Vec<Matrix<T>>,
    required: Vec<bool>,
}

impl<T: Real> AuxiliaryMap<T> {
    pub fn new(
        gains: &GainTable<T>,
        index: &IndexVectors,
        epsilon: &[T],
    ) -> Result<Self, ConstructionError> {
        let n = index.masters();
        let total = index.total();
        check_len("epsilon", n, epsilon.len())?;
        for (i, e) in epsilon.iter().enumerate() {
            if !(e.is_finite() && *e > T::zero()) {
                return Err(ConstructionError::NonPositiveEpsilon {
                    master: i,
                    value: e.as_f64(),
                });
            }
        }
        let mut coefficients = Vec::with_capacity(n);
        let mut required = Vec::with_capacity(n * n);
        for i in 0..n {
            let mut c = Matrix::zeros(n, total);
            for nu in 0..n {
                let req = index.required(i, nu);
                required.push(req);
                if !req {
                    continue;
                }
                let ne = index.eq_norm(i, nu);
                if ne == 0 {
                    return Err(ConstructionError::EmptyIndexVector { target: i, argument: nu });
                }
                let ne = T::lit(ne as f64);
                let nn = T::lit(index.neq_norm(i, nu) as f64);
                let w_eq = (T::one() + epsilon[i] * nn) / ne;
                let w_neq = epsilon[i] / ne;
                for j in 0..total {
                    let (a, b) = (index.eq(i, nu)[j], index.neq(i, nu)[j]);
                    if !(a || b) {
                        continue;
                    }
                    let g = gains.normaliser(j, nu).ok_or(ConstructionError::NotInModule {
                        gene: j,
                        master: nu,
                    })?;
                    c[(nu, j)] = if a { w_eq / g } else { -w_neq / g };
                }
            }
            coefficients.push(c);
        }
        Ok(Self {
            coefficients,
            required,
        })
    }

    pub fn masters(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self, i: usize) -> &Matrix<T> {
        &self.coefficients[i]
    }

    pub fn is_consumed(&self, i: usize, nu: usize) -> bool {
        self.required[i * self.masters() + nu]
    }

    /// `mu_i(x)`.
    pub fn eval(&self, i: usize, x: &[T]) -> Vec<T> {
        self.coefficients[i].mul_vec(x)
    }

    /// Smallest consumed component of `mu(x)` over all masters.
    pub fn min_consumed(&self, x: &[T]) -> T {
        let n = self.masters();
        let mut m = T::infinity();
        for i in 0..n {
            let mu = self.eval(i, x);
            for (nu, v) in mu.into_iter().enumerate() {
                if self.is_consumed(i, nu) {
                    m = m.min(v);
                }
            }
        }
        m
    }
}

/// `mu(x)` as an `n x n` matrix whose row `i` is `mu_i(x)`.
pub fn auxiliary_map<T: Real>(
    x: &[T],
    gains: &GainTable<T>,
    index: &IndexVectors,
    epsilon: &[T],
) -> Result<Matrix<T>, ConstructionError> {
    check_len("state", index.total(), x.len())?;
    let aux = AuxiliaryMap::new(gains, index, epsilon)?;
    let n = aux.masters();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        out.row_mut(i).copy_from_slice(&aux.eval(i, x));
    }
    Ok(out)
}

/// The constructed `N`-dimensional model.
#[derive(Debug, Clone)]
pub struct HighDimModel<T> {
    low: ExprModel<T>,
    s_low: SignMatrix,
    s_high: SignMatrix,
    assignment: ModuleAssignment,
    modules: ModuleRows<T>,
    gains: GainTable<T>,
    index: IndexVectors,
    aux: AuxiliaryMap<T>,
    epsilon: Vec<T>,
    degradation: Vec<T>,
    domain: Vec<(T, T)>,
}

/// Assembles the high-dimensional model. The low-dimensional sign matrix is
/// the one declared in the model, or inferred from its derivatives.
pub fn assemble_high_dim<T: Real>(
    low: &ExprModel<T>,
    s_high: &SignMatrix,
    assignment: &ModuleAssignment,
    k: &[T],
    epsilon: &[T],
) -> Result<HighDimModel<T>, ConstructionError> {
    let s_low = low.sign_matrix()?;
    assemble_with_low_signs(low, &s_low, s_high, assignment, k, epsilon)
}

pub fn assemble_with_low_signs<T: Real>(
    low: &ExprModel<T>,
    s_low: &SignMatrix,
    s_high: &SignMatrix,
    assignment: &ModuleAssignment,
    k: &[T],
    epsilon: &[T],
) -> Result<HighDimModel<T>, ConstructionError> {
    let n = assignment.masters();
    check_len("low-dimensional model dimension", n, low.dim())?;
    check_len("sign matrix dimension", assignment.total(), s_high.rows())?;
    let modules = build_module_dynamics(s_high, assignment, k)?;
    let gains = GainTable::compute(s_high, assignment, k)?;
    let index = build_index_vectors(s_low, s_high, assignment);
    let aux = AuxiliaryMap::new(&gains, &index, epsilon)?;

    let low_domain = low.domain();
    let top = low_domain.iter().map(|d| d.1).fold(T::zero(), T::max);
    let mut domain = low_domain.clone();
    let mut degradation = low.degradation().to_vec();
    for i in n..assignment.total() {
        domain.push(match assignment.master_of(i) {
            Some(m) => {
                let g = gains.lift_factor(i);
                (low_domain[m].0 * g, low_domain[m].1 * g)
            }
            None => (T::zero(), top),
        });
        degradation.push(k[i - n]);
    }
    Ok(HighDimModel {
        low: low.clone(),
        s_low: s_low.clone(),
        s_high: s_high.clone(),
        assignment: assignment.clone(),
        modules,
        gains,
        index,
        aux,
        epsilon: epsilon.to_vec(),
        degradation,
        domain,
    })
}

impl<T: Real> HighDimModel<T> {
    /// Rebuilds a model from the construction metadata of a model file.
    pub fn from_record(low: &ExprModel<T>, record: &ConstructionRecord) -> Result<Self, ConstructionError> {
        let assignment = check_modular_structure(&record.sign_matrix, record.masters)?;
        let k: Vec<T> = record.module_degradation.iter().map(|v| T::lit(*v)).collect();
        let e: Vec<T> = record.epsilon.iter().map(|v| T::lit(*v)).collect();
        assemble_high_dim(low, &record.sign_matrix, &assignment, &k, &e)
    }

    /// Same construction with different module degradation rates.
    pub fn with_module_degradation(&self, k: &[T]) -> Result<Self, ConstructionError> {
        assemble_with_low_signs(&self.low, &self.s_low, &self.s_high, &self.assignment, k, &self.epsilon)
    }

    pub fn low(&self) -> &ExprModel<T> {
        &self.low
    }

    pub fn low_sign_matrix(&self) -> &SignMatrix {
        &self.s_low
    }

    pub fn sign_matrix(&self) -> &SignMatrix {
        &self.s_high
    }

    pub fn assignment(&self) -> &ModuleAssignment {
        &self.assignment
    }

    pub fn modules(&self) -> &ModuleRows<T> {
        &self.modules
    }

    pub fn gains(&self) -> &GainTable<T> {
        &self.gains
    }

    pub fn index_vectors(&self) -> &IndexVectors {
        &self.index
    }

    pub fn auxiliary(&self) -> &AuxiliaryMap<T> {
        &self.aux
    }

    pub fn module_degradation(&self) -> &[T] {
        self.modules.degradation()
    }

    pub fn epsilon(&self) -> &[T] {
        &self.epsilon
    }

    pub fn masters(&self) -> usize {
        self.assignment.masters()
    }

    /// Steady-state lift of a low-dimensional state.
    pub fn lift(&self, z: &[T]) -> Vec<T> {
        crate::analysis::lift_point(z, &self.gains, &self.assignment)
    }

    pub fn record(&self) -> ConstructionRecord {
        ConstructionRecord {
            masters: self.masters(),
            sign_matrix: self.s_high.clone(),
            module_degradation: self.module_degradation().iter().map(|v| v.as_f64()).collect(),
            epsilon: self.epsilon.iter().map(|v| v.as_f64()).collect(),
        }
    }

    /// Closed-form model description: module rows as explicit linear
    /// expressions, master rows as the low-dimensional expressions composed
    /// with the auxiliary map.
    pub fn to_model_spec(&self) -> Result<ModelSpec, ModelError> {
        let n = self.masters();
        let total = self.assignment.total();
        let low_spec = self.low.spec();
        let mut interactions = Vec::with_capacity(total);
        for i in 0..n {
            let c = self.aux.coefficients(i);
            let reps: Vec<Expr> = (0..n)
                .map(|nu| {
                    if self.aux.is_consumed(i, nu) {
                        let terms: Vec<(usize, f64)> = (0..total)
                            .filter(|&j| c[(nu, j)] != T::zero())
                            .map(|j| (j, c[(nu, j)].as_f64()))
                            .collect();
                        linear_combination(&terms)
                    } else {
                        Expr::Const(0.0)
                    }
                })
                .collect();
            interactions.push(low_spec.interactions()[i].substitute_vars(&reps));
        }
        for i in n..total {
            interactions.push(self.modules.interaction_expr(i));
        }
        let params: Vec<Parameter> = low_spec
            .parameters()
            .iter()
            .zip(self.low.params())
            .map(|(p, v)| Parameter {
                name: p.name.clone(),
                default: v.as_f64(),
            })
            .collect();
        ModelSpec::new(
            (1..=total).map(|i| format!("x{i}")).collect(),
            params,
            interactions,
            self.degradation.iter().map(|v| v.as_f64()).collect(),
            self.domain.iter().map(|(a, b)| (a.as_f64(), b.as_f64())).collect(),
        )?
        .with_sign_matrix(self.s_high.clone())?
        .with_construction(self.record())
    }
}

impl<T: Real> GrnSystem<T> for HighDimModel<T> {
    fn dim(&self) -> usize {
        self.assignment.total()
    }

    fn degradation(&self) -> &[T] {
        &self.degradation
    }

    fn interaction_into(&self, x: &[T], out: &mut [T]) -> Result<(), EvalError> {
        let n = self.masters();
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let mu = self.aux.eval(i, x);
            *o = self.low.eval_interaction(i, &mu)?;
        }
        for (i, o) in out.iter_mut().enumerate().skip(n) {
            *o = self.modules.interaction(i, x);
        }
        Ok(())
    }

    fn interaction_jacobian(&self, x: &[T]) -> Result<Matrix<T>, EvalError> {
        let n = self.masters();
        let total = self.dim();
        let mut jac = Matrix::zeros(total, total);
        for i in 0..n {
            let c = self.aux.coefficients(i);
            let mu = c.mul_vec(x);
            let g = self.low.interaction_gradient(i, &mu)?;
            for (nu, gv) in g.iter().enumerate() {
                if *gv == T::zero() {
                    continue;
                }
                for j in 0..total {
                    let cv = c[(nu, j)];
                    if cv != T::zero() {
                        jac[(i, j)] += *gv * cv;
                    }
                }
            }
        }
        for i in n..total {
            for &(j, s) in self.modules.inputs(i) {
                jac[(i, j)] = T::lit(s as f64);
            }
        }
        Ok(jac)
    }

    fn domain(&self) -> Vec<(T, T)> {
        self.domain.clone()
    }
}

impl<T: Real> Parametric<T> for HighDimModel<T> {
    fn parameter_names(&self) -> Vec<String> {
        self.low.parameter_names()
    }

    fn parameter(&self, idx: usize) -> T {
        self.low.parameter(idx)
    }

    fn set_parameter(&mut self, idx: usize, value: T) {
        self.low.set_parameter(idx, value);
    }

    fn interaction_param_derivative(&self, x: &[T], idx: usize) -> Result<Vec<T>, EvalError> {
        let n = self.masters();
        let mut out = vec![T::zero(); self.dim()];
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let mu = self.aux.eval(i, x);
            *o = self.low.interaction_param_partial(i, &mu, idx)?;
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixture::{msc_sign_matrix, MASTERS};

    fn msc_assignment() -> ModuleAssignment {
        check_modular_structure(&msc_sign_matrix(), MASTERS).unwrap()
    }

    #[test]
    fn single_gene_module_gain_is_inverse_rate() {
        let s = SignMatrix::from_rows(&[[1, 0], [1, 0]]).unwrap();
        let a = check_modular_structure(&s, 1).unwrap();
        for k in [0.3, 1.0, 7.5] {
            let g: f64 = steady_state_gain(&a, &s, &[k], 0, 1).unwrap();
            assert!((g - 1.0 / k).abs() < 1e-15);
        }
    }

    #[test]
    fn small_k_gives_negative_gain() {
        let a = msc_assignment();
        let k = [1.5, 1.5, 1.0, 1.0, 1.0, 1.0];
        let err = GainTable::compute(&msc_sign_matrix(), &a, &k).unwrap_err();
        assert!(matches!(err, ConstructionError::NonPositiveGain { master: 0, .. }), "{err}");
    }

    #[test]
    fn singular_module_reported_first() {
        let a = msc_assignment();
        // K4 K5 - K4 - K5 = 0 at K4 = K5 = 2.
        let k = [2.0, 2.0, 1.0, 1.0, 1.0, 1.0];
        let err = GainTable::compute(&msc_sign_matrix(), &a, &k).unwrap_err();
        assert!(matches!(err, ConstructionError::SingularModule { master: 0 }), "{err}");
    }

    #[test]
    fn transfer_gain_at_zero_is_dc_gain() {
        let a = msc_assignment();
        let s = msc_sign_matrix();
        let k = [3.0, 3.0, 1.0, 1.0, 1.0, 1.0];
        for &(m, g) in &[(0usize, 3usize), (0, 5), (1, 8)] {
            let dc: f64 = steady_state_gain(&a, &s, &k, m, g).unwrap();
            let tf = transfer_gain(&a, &s, &k, m, g, Cplx::new(0.0, 0.0)).unwrap();
            assert!((tf.re - dc).abs() < 1e-12 && tf.im.abs() < 1e-12);
        }
        let tf = transfer_gain(&a, &s, &k, 1, 6, Cplx::new(0.0, 2.0)).unwrap();
        let want = Cplx::new(1.0, 0.0) / Cplx::new(1.0, 2.0);
        assert!((tf - want).norm() < 1e-14);
    }

    #[test]
    fn gene_outside_module_rejected() {
        let a = msc_assignment();
        let k = [3.0, 3.0, 1.0, 1.0, 1.0, 1.0];
        let r = steady_state_gain::<f64>(&a, &msc_sign_matrix(), &k, 1, 3);
        assert!(matches!(r, Err(ConstructionError::NotInModule { gene: 3, master: 1 })));
    }

    #[test]
    fn zero_interaction_gives_empty_vectors() {
        let s_low = SignMatrix::from_rows(&[[1, 0], [0, 1]]).unwrap();
        let s_high = SignMatrix::from_rows(&[[1, 0], [0, 1]]).unwrap();
        let iv = build_index_vectors(&s_low, &s_high, &ModuleAssignment::trivial(2));
        assert_eq!(iv.eq_norm(0, 1), 0);
        assert_eq!(iv.neq_norm(0, 1), 0);
        assert!(!iv.required(0, 1));
        assert_eq!(iv.eq(0, 0), &[true, false]);
    }

    #[test]
    fn opposite_sign_inputs_weighted_by_epsilon() {
        // Master 1 activates gene 3, which activates master 1; master 1 also
        // represses itself directly.
        let s_low = SignMatrix::from_rows(&[[1]]).unwrap();
        let s_high = SignMatrix::from_rows(&[[-1, 1], [1, 0]]).unwrap();
        let a = check_modular_structure(&s_high, 1).unwrap();
        let iv = build_index_vectors(&s_low, &s_high, &a);
        assert_eq!(iv.eq(0, 0), &[false, true]);
        assert_eq!(iv.neq(0, 0), &[true, false]);
        let gains = GainTable::compute(&s_high, &a, &[2.0]).unwrap();
        let eps: f64 = 0.01;
        let mu = auxiliary_map(&[3.0, 1.5], &gains, &iv, &[eps]).unwrap();
        // (1 + eps) * x2 / gamma - eps * x1, with gamma = 1/2.
        assert!((mu[(0, 0)] - ((1.0 + eps) * 3.0 - eps * 3.0)).abs() < 1e-14);
    }
}
