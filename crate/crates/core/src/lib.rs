#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cache;
pub mod error;
pub mod lattice;
pub mod phantom;
pub mod volume;
pub mod relations;
pub mod scene;
pub mod fiber;
pub mod io;
pub mod query;
