//! Spatial traffic logic over lane views: free space, reservations,
//! autonomy flags, signs and crossings, length constraints, boolean
//! connectives and the horizontal chop.

mod ast;
mod eval;
mod parser;

pub use ast::{Cmp, Formula, LenValue};
pub use eval::{candidate_chop_points, evaluate, EvalError};
pub use parser::{parse_formula, parse_with, Definition, Library};
