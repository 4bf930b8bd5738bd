//! Interaction sign matrices and the structural preconditions of the
//! construction: the modular block pattern of the high-dimensional sign
//! matrix, and sign-path consistency with the low-dimensional one.
//!
//! Indices are 0-based throughout; reports render them 1-based.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

/// Upper bound on the number of partial paths explored per master pair.
pub const PATH_CAP: usize = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum SignMatrixError {
    #[error("entry ({row}, {col}) = {value} is not in {{-1, 0, +1}}")]
    BadEntry { row: usize, col: usize, value: i64 },
    #[error("row {row} has {found} entries, expected {expected}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: cannot read `{token}` as an integer")]
    Token { line: usize, token: String },
    #[error("sign matrix is empty")]
    Empty,
}

/// Dense matrix over {-1, 0, +1}; entry `(i, j)` is the sign of the effect
/// of variable `j` on the rate of variable `i`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SignMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i8>,
}

impl SignMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_rows<R: AsRef<[i64]>>(rows: &[R]) -> Result<Self, SignMatrixError> {
        if rows.is_empty() {
            return Err(SignMatrixError::Empty);
        }
        let cols = rows[0].as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(SignMatrixError::Ragged {
                    row: i,
                    expected: cols,
                    found: r.len(),
                });
            }
            for (j, &v) in r.iter().enumerate() {
                if !(-1..=1).contains(&v) {
                    return Err(SignMatrixError::BadEntry {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
                data.push(v as i8);
            }
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> i8 {
        self.data[i * self.cols + j]
    }

    /// Sets an entry; panics on values outside {-1, 0, +1}.
    pub fn set(&mut self, i: usize, j: usize, v: i8) {
        assert!((-1..=1).contains(&v), "sign entry out of range: {v}");
        self.data[i * self.cols + j] = v;
    }

    pub fn to_rows(&self) -> Vec<Vec<i64>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) as i64).collect())
            .collect()
    }

    /// Nonzero entries as `(row, col, sign)`.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize, i8)> + '_ {
        (0..self.rows).flat_map(move |i| {
            (0..self.cols).filter_map(move |j| {
                let v = self.get(i, j);
                (v != 0).then_some((i, j, v))
            })
        })
    }
}

impl fmt::Debug for SignMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "SignMatrix {}x{}", self.rows, self.cols)?;
        write!(f, "{self}")
    }
}

/// Plain-text grid, one row per line, entries separated by whitespace.
impl fmt::Display for SignMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let line: Vec<String> = (0..self.cols)
                .map(|j| format!("{:>2}", self.get(i, j)))
                .collect();
            writeln!(f, "{}", line.join(" "))?;
        }
        Ok(())
    }
}

/// Reads the grid format; `#` starts a comment, blank lines are skipped.
impl FromStr for SignMatrix {
    type Err = SignMatrixError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut rows: Vec<Vec<i64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let row = body
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| {
                    t.trim_start_matches('+')
                        .parse::<i64>()
                        .map_err(|_| SignMatrixError::Token {
                            line: lineno + 1,
                            token: t.to_string(),
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }
}

#[derive(Debug, Error)]
pub enum SignFileError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Format {
        path: String,
        #[source]
        source: SignMatrixError,
    },
}

pub fn load_sign_matrix(path: impl AsRef<Path>) -> Result<SignMatrix, SignFileError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| SignFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    text.parse().map_err(|source| SignFileError::Format {
        path: path.display().to_string(),
        source,
    })
}

/// Partition of the variables into masters `0..n` and modules of
/// module genes, each module driven by one master.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ModuleAssignment {
    masters: usize,
    total: usize,
    /// Indexed by `i - masters`.
    master_of: Vec<Option<usize>>,
    modules: Vec<Vec<usize>>,
}

impl ModuleAssignment {
    /// Assignment with no module genes (`n == N`).
    pub fn trivial(n: usize) -> Self {
        Self {
            masters: n,
            total: n,
            master_of: Vec::new(),
            modules: vec![Vec::new(); n],
        }
    }

    pub fn masters(&self) -> usize {
        self.masters
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn is_master(&self, i: usize) -> bool {
        i < self.masters
    }

    /// The master driving module gene `i`; `None` for masters and for
    /// module genes not reachable from any master.
    pub fn master_of(&self, i: usize) -> Option<usize> {
        if i < self.masters {
            None
        } else {
            self.master_of[i - self.masters]
        }
    }

    /// Module genes driven by master `k`, ascending.
    pub fn module(&self, k: usize) -> &[usize] {
        &self.modules[k]
    }

    pub fn modules(&self) -> &[Vec<usize>] {
        &self.modules
    }

    /// Module genes not attached to any master.
    pub fn orphans(&self) -> Vec<usize> {
        (self.masters..self.total)
            .filter(|&i| self.master_of(i).is_none())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Clause {
    /// A module gene is activated by more than one master.
    MultipleMasters,
    /// Master-to-module entries must be 0 or +1.
    NegativeMasterInput,
    /// Couplings inside a module must be 0 or +1.
    NegativeModuleCoupling,
    /// A module gene interacts with a module driven by another master.
    CrossModule,
    /// A module gene without a master feeds into a master gene.
    OrphanFeedsMaster,
}

impl Clause {
    pub fn describe(self) -> &'static str {
        match self {
            Clause::MultipleMasters => "a module gene may be activated by at most one master",
            Clause::NegativeMasterInput => "master inputs to module genes must be 0 or +1",
            Clause::NegativeModuleCoupling => "couplings within a module must be 0 or +1",
            Clause::CrossModule => "module genes may only couple to their own module and master",
            Clause::OrphanFeedsMaster => "a module gene without a master cannot act on a master",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub row: usize,
    pub col: usize,
    pub entry: i8,
    pub clause: Clause,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "S({}, {}) = {:+}: {}",
            self.row + 1,
            self.col + 1,
            self.entry,
            self.clause.describe()
        )
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum StructureError {
    #[error("sign matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("master count {n} must satisfy 1 <= n <= {total}")]
    MasterCount { n: usize, total: usize },
    #[error("modular structure violated:\n{}", list(.0))]
    Violations(Vec<Violation>),
    #[error("low-dimensional sign matrix is {got}x{got}, expected {expected}x{expected}")]
    LowDimMismatch { expected: usize, got: usize },
    #[error("assignment is for {assignment} genes, sign matrix has {matrix}")]
    AssignmentMismatch { assignment: usize, matrix: usize },
    #[error("path enumeration from x{} to x{} exceeded {cap} partial paths", .source_gene + 1, .target + 1)]
    PathCapExceeded {
        source_gene: usize,
        target: usize,
        cap: usize,
    },
}

fn list(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("  {x}"))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Checks the modular block pattern of an `N x N` sign matrix whose first
/// `n` variables are the masters, and derives the module assignment.
///
/// A module gene belongs to master `k` if it is activated by `k` directly
/// or is connected through intra-module couplings to genes that are.
pub fn check_modular_structure(s: &SignMatrix, n: usize) -> Result<ModuleAssignment, StructureError> {
    if !s.is_square() {
        return Err(StructureError::NotSquare {
            rows: s.rows(),
            cols: s.cols(),
        });
    }
    let total = s.rows();
    if n == 0 || n > total {
        return Err(StructureError::MasterCount { n, total });
    }
    let mut violations = Vec::new();
    let mut direct: Vec<Option<usize>> = vec![None; total - n];

    for i in n..total {
        for k in 0..n {
            match s.get(i, k) {
                0 => {}
                1 => {
                    if direct[i - n].is_some() {
                        violations.push(Violation {
                            row: i,
                            col: k,
                            entry: 1,
                            clause: Clause::MultipleMasters,
                        });
                    } else {
                        direct[i - n] = Some(k);
                    }
                }
                v => violations.push(Violation {
                    row: i,
                    col: k,
                    entry: v,
                    clause: Clause::NegativeMasterInput,
                }),
            }
        }
        for j in n..total {
            let v = s.get(i, j);
            if v < 0 {
                violations.push(Violation {
                    row: i,
                    col: j,
                    entry: v,
                    clause: Clause::NegativeModuleCoupling,
                });
            }
        }
    }

    // Connected components of the module-gene coupling graph.
    let m = total - n;
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for i in n..total {
        for j in n..total {
            if s.get(i, j) != 0 {
                let (a, b) = (find(&mut parent, i - n), find(&mut parent, j - n));
                if a != b {
                    parent[a] = b;
                }
            }
        }
    }
    let mut comp_masters: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); m];
    for (idx, d) in direct.iter().enumerate() {
        if let Some(k) = d {
            let r = find(&mut parent, idx);
            comp_masters[r].insert(*k);
        }
    }
    let mut master_of = vec![None; m];
    for idx in 0..m {
        let r = find(&mut parent, idx);
        match comp_masters[r].len() {
            0 => {}
            1 => master_of[idx] = comp_masters[r].iter().next().copied(),
            _ => {}
        }
    }
    for i in n..total {
        let ri = find(&mut parent, i - n);
        if comp_masters[ri].len() > 1 {
            // Every coupling inside a component that joins several masters'
            // genes, plus every master input into it, is implicated.
            for j in 0..total {
                let v = s.get(i, j);
                if v > 0 && (j >= n || direct[i - n] == Some(j)) {
                    violations.push(Violation {
                        row: i,
                        col: j,
                        entry: v,
                        clause: Clause::CrossModule,
                    });
                }
            }
        }
    }
    for i in 0..n {
        for j in n..total {
            let v = s.get(i, j);
            if v != 0 && master_of[j - n].is_none() && comp_masters[find(&mut parent, j - n)].len() < 2 {
                violations.push(Violation {
                    row: i,
                    col: j,
                    entry: v,
                    clause: Clause::OrphanFeedsMaster,
                });
            }
        }
    }

    if !violations.is_empty() {
        violations.sort_by_key(|v| (v.row, v.col));
        violations.dedup();
        return Err(StructureError::Violations(violations));
    }
    let mut modules = vec![Vec::new(); n];
    for (idx, k) in master_of.iter().enumerate() {
        if let Some(k) = k {
            modules[*k].push(n + idx);
        }
    }
    Ok(ModuleAssignment {
        masters: n,
        total,
        master_of,
        modules,
    })
}

/// Directed edge `from -> to`, read from entry `(to, from)` of a sign matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
}

impl Edge {
    pub fn new(from: usize, to: usize) -> Self {
        Self { from, to }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PathError {
    #[error("empty path")]
    Empty,
    #[error("edge x{} -> x{} has a zero sign entry", .0.from + 1, .0.to + 1)]
    ZeroEntry(Edge),
    #[error("edges x{}->x{} and x{}->x{} do not chain", .0.from + 1, .0.to + 1, .1.from + 1, .1.to + 1)]
    Broken(Edge, Edge),
    #[error("edge x{} -> x{} is outside the matrix", .0.from + 1, .0.to + 1)]
    OutOfRange(Edge),
}

/// Product of the edge signs along a path.
pub fn path_sign_product(path: &[Edge], s: &SignMatrix) -> Result<i8, PathError> {
    if path.is_empty() {
        return Err(PathError::Empty);
    }
    let mut sign = 1i8;
    for (idx, e) in path.iter().enumerate() {
        if e.from >= s.cols() || e.to >= s.rows() {
            return Err(PathError::OutOfRange(*e));
        }
        if idx > 0 && path[idx - 1].to != e.from {
            return Err(PathError::Broken(path[idx - 1], *e));
        }
        let v = s.get(e.to, e.from);
        if v == 0 {
            return Err(PathError::ZeroEntry(*e));
        }
        sign *= v;
    }
    Ok(sign)
}

/// How master-to-master paths are read when checking sign consistency.
pub const PATH_INTERPRETATION: &str = "an interaction of master j on master i is realised by simple \
paths that start at master j, pass only through genes of j's module, and end at master i \
(for i = j: simple cycles through j's module, including a direct self-loop)";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub target: usize,
    pub source: usize,
    pub sign: i8,
    /// Vertices from `source` to `target`.
    pub path: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConsistencyClause {
    /// No path realises the low-dimensional interaction sign.
    Forward,
    /// A high-dimensional edge into a master has no low-dimensional counterpart.
    Converse,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConsistencyViolation {
    pub clause: ConsistencyClause,
    pub target: usize,
    pub source: usize,
    pub detail: String,
}

impl fmt::Display for ConsistencyViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.clause {
            ConsistencyClause::Forward => "forward",
            ConsistencyClause::Converse => "converse",
        };
        write!(f, "[{tag}] ({}, {}): {}", self.target + 1, self.source + 1, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConsistencyReport {
    pub interpretation: String,
    pub witnesses: Vec<Witness>,
    pub violations: Vec<ConsistencyViolation>,
    pub paths_explored: usize,
}

impl ConsistencyReport {
    pub fn is_consistent(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn witnesses_for(&self, target: usize, source: usize) -> impl Iterator<Item = &Witness> {
        self.witnesses
            .iter()
            .filter(move |w| w.target == target && w.source == source)
    }
}

/// Checks that every nonzero low-dimensional interaction is realised by a
/// same-signed path in the high-dimensional network, and that every edge
/// entering a master from a module (or another master) corresponds to a
/// nonzero low-dimensional interaction.
pub fn check_sign_consistency(
    s_low: &SignMatrix,
    s_high: &SignMatrix,
    assignment: &ModuleAssignment,
) -> Result<ConsistencyReport, StructureError> {
    let n = assignment.masters();
    if !s_low.is_square() || s_low.rows() != n {
        return Err(StructureError::LowDimMismatch {
            expected: n,
            got: s_low.rows(),
        });
    }
    if !s_high.is_square() || s_high.rows() != assignment.total() {
        return Err(StructureError::AssignmentMismatch {
            assignment: assignment.total(),
            matrix: s_high.rows(),
        });
    }
    let mut report = ConsistencyReport {
        interpretation: PATH_INTERPRETATION.to_string(),
        witnesses: Vec::new(),
        violations: Vec::new(),
        paths_explored: 0,
    };

    for i in 0..n {
        for j in 0..n {
            let want = s_low.get(i, j);
            if want == 0 {
                continue;
            }
            let mut found = Vec::new();
            let explored = enumerate_paths(s_high, assignment.module(j), j, i, &mut found)?;
            report.paths_explored += explored;
            let mut any = false;
            for path in found {
                let sign = path_sign(&path, s_high);
                if sign == want {
                    any = true;
                    report.witnesses.push(Witness {
                        target: i,
                        source: j,
                        sign,
                        path,
                    });
                }
            }
            if !any {
                report.violations.push(ConsistencyViolation {
                    clause: ConsistencyClause::Forward,
                    target: i,
                    source: j,
                    detail: format!(
                        "no path from x{} to x{} has sign {:+}",
                        j + 1,
                        i + 1,
                        want
                    ),
                });
            }
        }
    }

    for i in 0..n {
        for col in 0..s_high.cols() {
            if s_high.get(i, col) == 0 {
                continue;
            }
            let j = if col < n {
                col
            } else {
                match assignment.master_of(col) {
                    Some(k) => k,
                    None => continue,
                }
            };
            if s_low.get(i, j) == 0 {
                report.violations.push(ConsistencyViolation {
                    clause: ConsistencyClause::Converse,
                    target: i,
                    source: j,
                    detail: format!(
                        "edge x{} -> x{} present but the low-dimensional entry ({}, {}) is 0",
                        col + 1,
                        i + 1,
                        i + 1,
                        j + 1
                    ),
                });
            }
        }
    }
    Ok(report)
}

fn path_sign(path: &[usize], s: &SignMatrix) -> i8 {
    path.windows(2).map(|w| s.get(w[1], w[0])).product()
}

/// Depth-first enumeration of simple paths `source -> target` whose interior
/// vertices lie in `module`. Returns the number of partial paths visited.
fn enumerate_paths(
    s: &SignMatrix,
    module: &[usize],
    source: usize,
    target: usize,
    out: &mut Vec<Vec<usize>>,
) -> Result<usize, StructureError> {
    let mut visited = 0usize;
    let mut stack = vec![source];
    let mut on_path = vec![false; s.rows()];
    on_path[source] = true;

    fn go(
        s: &SignMatrix,
        module: &[usize],
        target: usize,
        stack: &mut Vec<usize>,
        on_path: &mut [bool],
        visited: &mut usize,
        out: &mut Vec<Vec<usize>>,
    ) -> bool {
        *visited += 1;
        if *visited > PATH_CAP {
            return false;
        }
        let u = *stack.last().expect("non-empty path");
        if s.get(target, u) != 0 {
            let mut p = stack.clone();
            p.push(target);
            out.push(p);
        }
        for &v in module {
            if on_path[v] || s.get(v, u) == 0 {
                continue;
            }
            on_path[v] = true;
            stack.push(v);
            let ok = go(s, module, target, stack, on_path, visited, out);
            stack.pop();
            on_path[v] = false;
            if !ok {
                return false;
            }
        }
        true
    }

    if !go(s, module, target, &mut stack, &mut on_path, &mut visited, out) {
        return Err(StructureError::PathCapExceeded {
            source_gene: source,
            target,
            cap: PATH_CAP,
        });
    }
    Ok(visited)
}
