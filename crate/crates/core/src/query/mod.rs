//! Query language: tokens, syntax tree, name resolution and evaluation.

pub mod ast;
pub mod eval;
pub mod lexer;
pub mod resolve;
pub mod source;

pub use ast::{parse, parse_query, Atom, Expr, QueryAst, Relation};
pub use eval::{
    clause_degree, evaluate_samples, evaluate_samples_bruteforce, ClauseNode, Combiner,
    EvalOptions, FiberResult,
};
pub use lexer::{tokenize, Token, TokenKind};
pub use resolve::{
    atom_landscape, evaluate_fiber, evaluate_set, resolve, FiberPrep, ResolvedQuery, Slot,
    SlotBinding,
};
pub use source::{load_query_file, parse_query_file, QueryFile, QueryOptions};
