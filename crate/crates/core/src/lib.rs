// Dense numeric kernels index several arrays per loop; `!(a > b)` comparisons
// deliberately reject NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod conic;
pub mod backtest;
pub mod estimation;
pub mod market_data;
pub mod metrics;
pub mod models;
pub mod robust;
pub mod validation;
