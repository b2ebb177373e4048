//! Instance generators.

mod adversarial;
pub mod lowerbound;
mod random;
mod spec;

pub use adversarial::{gen_ordinal_worst, gen_rsd_worst, table1};
pub use lowerbound::{certify_lowerbound_tables, gen_lowerbound, lowerbound_params, LowerBound, LowerBoundParams};
pub use random::{gen_random, random_doubly_stochastic, sinkhorn, split_seed, ValueDistribution};
pub use spec::{GeneratorSpec, DEFAULT_EPS};
