//! Model descriptions and the on-disk model file format.
//!
//! A model file is a TOML document:
//!
//! ```toml
//! dimension = 3
//! variables = ["z1", "z2", "z3"]
//! interactions = ["(0.2*z1^2 + 0.5 + uA) / (10*m + 0.1*z1^2 + 0.5*z2^2 + 0.5*z3^2)", "...", "..."]
//! degradation = [0.1, 0.1, 0.1]
//! domain = [[0.0, 20.0], [0.0, 20.0], [0.0, 20.0]]
//! sign_matrix = [[1, -1, -1], [-1, 1, -1], [-1, -1, 1]]   # optional
//!
//! [[parameters]]
//! name = "m"
//! default = 1.0
//!
//! [construction]            # optional, written for constructed models
//! masters = 3
//! sign_matrix = [[...]]
//! module_degradation = [3.0, 3.0, 1.0, 1.0, 1.0, 1.0]
//! epsilon = [0.001, 0.001, 0.001]
//! ```
//!
//! Numbers are written in shortest round-trip form, so `load(save(s)) == s`.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::expr::Expr;
use super::parser::{parse_expression, ParseError};
use crate::structure::SignMatrix;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("cannot parse expression at `{path}`: {source}")]
    Expression {
        path: String,
        #[source]
        source: ParseError,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed model document: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("cannot serialize model: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("sign of d a_{row}/d z_{col} changes over the state domain")]
    NonConstantSign { row: usize, col: usize },
    #[error("evaluation failed while analysing the model: {0}")]
    Eval(#[from] super::expr::EvalError),
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> ModelError {
    ModelError::Schema {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub default: f64,
}

/// Provenance of a constructed model: enough to rebuild gains and the
/// steady-state lift from the low-dimensional model.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstructionRecord {
    pub masters: usize,
    pub sign_matrix: SignMatrix,
    pub module_degradation: Vec<f64>,
    pub epsilon: Vec<f64>,
}

/// An ODE model `dz/dt = a(z) - k z` with named parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    variables: Vec<String>,
    parameters: Vec<Parameter>,
    interactions: Vec<Expr>,
    degradation: Vec<f64>,
    domain: Vec<(f64, f64)>,
    sign_matrix: Option<SignMatrix>,
    construction: Option<ConstructionRecord>,
}

impl ModelSpec {
    /// Validates and builds a model.
    pub fn new(
        variables: Vec<String>,
        parameters: Vec<Parameter>,
        interactions: Vec<Expr>,
        degradation: Vec<f64>,
        domain: Vec<(f64, f64)>,
    ) -> Result<Self, ModelError> {
        let spec = Self {
            variables,
            parameters,
            interactions,
            degradation,
            domain,
            sign_matrix: None,
            construction: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Builds a model from expression strings.
    pub fn from_strings(
        variables: &[&str],
        parameters: &[(&str, f64)],
        interactions: &[&str],
        degradation: &[f64],
        domain: &[(f64, f64)],
    ) -> Result<Self, ModelError> {
        let vars: Vec<String> = variables.iter().map(|s| s.to_string()).collect();
        let params: Vec<Parameter> = parameters
            .iter()
            .map(|(n, d)| Parameter {
                name: n.to_string(),
                default: *d,
            })
            .collect();
        let names: Vec<String> = params.iter().map(|p| p.name.clone()).collect();
        let exprs = interactions
            .iter()
            .enumerate()
            .map(|(i, s)| {
                parse_expression(s, &vars, &names).map_err(|source| ModelError::Expression {
                    path: format!("interactions[{i}]"),
                    source,
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(
            vars,
            params,
            exprs,
            degradation.to_vec(),
            domain.to_vec(),
        )
    }

    pub fn with_sign_matrix(mut self, s: SignMatrix) -> Result<Self, ModelError> {
        self.sign_matrix = Some(s);
        self.validate()?;
        Ok(self)
    }

    pub fn with_construction(mut self, c: ConstructionRecord) -> Result<Self, ModelError> {
        self.construction = Some(c);
        self.validate()?;
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        self.variables.len()
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.parameters
    }

    pub fn parameter_names(&self) -> Vec<String> {
        self.parameters.iter().map(|p| p.name.clone()).collect()
    }

    pub fn parameter_index(&self, name: &str) -> Option<usize> {
        self.parameters.iter().position(|p| p.name == name)
    }

    pub fn interactions(&self) -> &[Expr] {
        &self.interactions
    }

    pub fn degradation(&self) -> &[f64] {
        &self.degradation
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn sign_matrix(&self) -> Option<&SignMatrix> {
        self.sign_matrix.as_ref()
    }

    pub fn construction(&self) -> Option<&ConstructionRecord> {
        self.construction.as_ref()
    }

    /// Renders interaction `i` with this model's symbol names.
    pub fn interaction_text(&self, i: usize) -> String {
        let params = self.parameter_names();
        self.interactions[i]
            .display_with(&self.variables, &params)
            .to_string()
    }

    fn validate(&self) -> Result<(), ModelError> {
        let n = self.variables.len();
        if n == 0 {
            return Err(schema("dimension", "must be at least 1"));
        }
        if self.interactions.len() != n {
            return Err(schema(
                "interactions",
                format!("expected {n} expressions, found {}", self.interactions.len()),
            ));
        }
        if self.degradation.len() != n {
            return Err(schema(
                "degradation",
                format!("expected {n} rates, found {}", self.degradation.len()),
            ));
        }
        if self.domain.len() != n {
            return Err(schema(
                "domain",
                format!("expected {n} intervals, found {}", self.domain.len()),
            ));
        }
        let mut seen = HashSet::new();
        for (i, v) in self.variables.iter().enumerate() {
            check_identifier(v).map_err(|m| schema(format!("variables[{i}]"), m))?;
            if !seen.insert(v.as_str()) {
                return Err(schema(format!("variables[{i}]"), format!("duplicate name `{v}`")));
            }
        }
        for (i, p) in self.parameters.iter().enumerate() {
            check_identifier(&p.name).map_err(|m| schema(format!("parameters[{i}].name"), m))?;
            if !seen.insert(p.name.as_str()) {
                return Err(schema(
                    format!("parameters[{i}].name"),
                    format!("duplicate name `{}`", p.name),
                ));
            }
            if !p.default.is_finite() {
                return Err(schema(format!("parameters[{i}].default"), "must be finite"));
            }
        }
        for (i, k) in self.degradation.iter().enumerate() {
            if !(k.is_finite() && *k > 0.0) {
                return Err(schema(
                    format!("degradation[{i}]"),
                    format!("degradation rate must be positive, got {k}"),
                ));
            }
        }
        for (i, (lo, hi)) in self.domain.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && *lo >= 0.0 && lo < hi) {
                return Err(schema(
                    format!("domain[{i}]"),
                    format!("need 0 <= lo < hi, got [{lo}, {hi}]"),
                ));
            }
        }
        for (i, e) in self.interactions.iter().enumerate() {
            if let Some(j) = e.max_var_index() {
                if j >= n {
                    return Err(schema(
                        format!("interactions[{i}]"),
                        format!("variable index {j} exceeds dimension {n}"),
                    ));
                }
            }
            if let Some(j) = e.max_param_index() {
                if j >= self.parameters.len() {
                    return Err(schema(
                        format!("interactions[{i}]"),
                        format!("parameter index {j} is not declared"),
                    ));
                }
            }
        }
        if let Some(s) = &self.sign_matrix {
            if s.rows() != n || s.cols() != n {
                return Err(schema(
                    "sign_matrix",
                    format!("expected {n}x{n}, found {}x{}", s.rows(), s.cols()),
                ));
            }
        }
        if let Some(c) = &self.construction {
            if c.sign_matrix.rows() != n || c.sign_matrix.cols() != n {
                return Err(schema("construction.sign_matrix", "must be N x N"));
            }
            if c.masters == 0 || c.masters > n {
                return Err(schema("construction.masters", "need 1 <= masters <= dimension"));
            }
            if c.module_degradation.len() != n - c.masters {
                return Err(schema(
                    "construction.module_degradation",
                    format!("expected {} rates", n - c.masters),
                ));
            }
            if c.epsilon.len() != c.masters {
                return Err(schema(
                    "construction.epsilon",
                    format!("expected {} values", c.masters),
                ));
            }
        }
        Ok(())
    }

    /// Parses a model document.
    pub fn from_toml_str(text: &str) -> Result<Self, ModelError> {
        let doc: ModelDoc = toml::from_str(text)?;
        doc.into_spec()
    }

    pub fn to_toml_string(&self) -> Result<String, ModelError> {
        Ok(toml::to_string(&ModelDoc::from_spec(self))?)
    }
}

fn check_identifier(name: &str) -> Result<(), String> {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return Err(format!("`{name}` is not a valid identifier")),
    }
    if chars.all(|c| c.is_ascii_alphanumeric() || c == '_') {
        Ok(())
    } else {
        Err(format!("`{name}` is not a valid identifier"))
    }
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelSpec, ModelError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ModelSpec::from_toml_str(&text)
}

pub fn save_model(spec: &ModelSpec, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    let text = spec.to_toml_string()?;
    fs::write(path, text).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    dimension: usize,
    variables: Vec<String>,
    interactions: Vec<String>,
    degradation: Vec<f64>,
    domain: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sign_matrix: Option<Vec<Vec<i64>>>,
    #[serde(default)]
    parameters: Vec<ParamDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    construction: Option<ConstructionDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParamDoc {
    name: String,
    default: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstructionDoc {
    masters: usize,
    sign_matrix: Vec<Vec<i64>>,
    module_degradation: Vec<f64>,
    epsilon: Vec<f64>,
}

fn sign_from_rows(rows: &[Vec<i64>], path: &str) -> Result<SignMatrix, ModelError> {
    SignMatrix::from_rows(rows).map_err(|e| schema(path, e.to_string()))
}

impl ModelDoc {
    fn into_spec(self) -> Result<ModelSpec, ModelError> {
        if self.variables.len() != self.dimension {
            return Err(schema(
                "variables",
                format!(
                    "expected {} names, found {}",
                    self.dimension,
                    self.variables.len()
                ),
            ));
        }
        let params: Vec<Parameter> = self
            .parameters
            .into_iter()
            .map(|p| Parameter {
                name: p.name,
                default: p.default,
            })
            .collect();
        let names: Vec<String> = params.iter().map(|p| p.name.clone()).collect();
        let exprs = self
            .interactions
            .iter()
            .enumerate()
            .map(|(i, s)| {
                parse_expression(s, &self.variables, &names).map_err(|source| {
                    ModelError::Expression {
                        path: format!("interactions[{i}]"),
                        source,
                    }
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        let mut spec = ModelSpec::new(
            self.variables,
            params,
            exprs,
            self.degradation,
            self.domain.into_iter().map(|[a, b]| (a, b)).collect(),
        )?;
        if let Some(rows) = self.sign_matrix {
            spec = spec.with_sign_matrix(sign_from_rows(&rows, "sign_matrix")?)?;
        }
        if let Some(c) = self.construction {
            let record = ConstructionRecord {
                masters: c.masters,
                sign_matrix: sign_from_rows(&c.sign_matrix, "construction.sign_matrix")?,
                module_degradation: c.module_degradation,
                epsilon: c.epsilon,
            };
            spec = spec.with_construction(record)?;
        }
        Ok(spec)
    }

    fn from_spec(spec: &ModelSpec) -> Self {
        Self {
            dimension: spec.dimension(),
            variables: spec.variables.clone(),
            interactions: (0..spec.dimension())
                .map(|i| spec.interaction_text(i))
                .collect(),
            degradation: spec.degradation.clone(),
            domain: spec.domain.iter().map(|(a, b)| [*a, *b]).collect(),
            sign_matrix: spec.sign_matrix.as_ref().map(SignMatrix::to_rows),
            parameters: spec
                .parameters
                .iter()
                .map(|p| ParamDoc {
                    name: p.name.clone(),
                    default: p.default,
                })
                .collect(),
            construction: spec.construction.as_ref().map(|c| ConstructionDoc {
                masters: c.masters,
                sign_matrix: c.sign_matrix.to_rows(),
                module_degradation: c.module_degradation.clone(),
                epsilon: c.epsilon.clone(),
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay_model(k2: f64) -> String {
        format!(
            r#"
dimension = 2
variables = ["z1", "z2"]
interactions = ["1 + p", "z1"]
degradation = [1.0, {k2}]
domain = [[0.0, 5.0], [0.0, 5.0]]

[[parameters]]
name = "p"
default = 0.5
"#
        )
    }

    #[test]
    fn parses_minimal_document() {
        let spec = ModelSpec::from_toml_str(&decay_model(2.0)).unwrap();
        assert_eq!(spec.dimension(), 2);
        assert_eq!(spec.parameters()[0].default, 0.5);
        assert_eq!(spec.interactions()[1], Expr::Var(0));
    }

    #[test]
    fn zero_degradation_rejected_with_field_path() {
        let err = ModelSpec::from_toml_str(&decay_model(0.0)).unwrap_err();
        match err {
            ModelError::Schema { path, .. } => assert_eq!(path, "degradation[1]"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn undeclared_identifier_reports_path() {
        let text = decay_model(1.0).replace("\"z1\"]", "\"q\"]");
        let err = ModelSpec::from_toml_str(&text).unwrap_err();
        assert!(
            matches!(err, ModelError::Expression { ref path, .. } if path == "interactions[1]"),
            "{err:?}"
        );
    }

    #[test]
    fn wrong_interaction_count() {
        let text = decay_model(1.0).replace("\"1 + p\", ", "");
        assert!(matches!(
            ModelSpec::from_toml_str(&text),
            Err(ModelError::Schema { ref path, .. }) if path == "interactions"
        ));
    }

    #[test]
    fn duplicate_names_rejected() {
        let r = ModelSpec::from_strings(
            &["z1"],
            &[("z1", 1.0)],
            &["1"],
            &[1.0],
            &[(0.0, 1.0)],
        );
        assert!(matches!(r, Err(ModelError::Schema { .. })));
    }

    #[test]
    fn unknown_field_rejected() {
        let text = format!("{}\nextra = 1\n", decay_model(1.0).replace("[[parameters]]", "bogus = 2\n[[parameters]]"));
        assert!(ModelSpec::from_toml_str(&text).is_err());
    }

    #[test]
    fn save_and_load_file() {
        let spec = ModelSpec::from_toml_str(&decay_model(2.0)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.model");
        save_model(&spec, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), spec);
    }
}
