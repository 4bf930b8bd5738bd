//! The model expression language, model files, and compiled models.

mod compiled;
pub mod expr;
pub mod parser;
mod spec;

pub use compiled::{ExprModel, UnknownParameter};
pub use expr::{linear_combination, EvalError, Expr, Wrt};
pub use parser::{parse_expression, ParseError};
pub use spec::{load_model, save_model, ConstructionRecord, ModelError, ModelSpec, Parameter};
