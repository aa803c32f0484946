// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod capacity;
pub mod error;
pub mod experiment;
pub mod queue;
pub mod reference;
pub mod reward;
pub mod showup;
pub mod sim;
pub mod window;
