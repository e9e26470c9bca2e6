//! Dataset representation, schema typing, splitting, scaling and the seeded
//! benchmark generator.

mod benchmark;
mod dataset;
mod infer;
mod scaler;
mod schema;
mod split;

pub use benchmark::{
    generate as generate_benchmark, make_benchmark, make_toy, Benchmark, BenchmarkSpec,
    CATEGORICAL_LEVELS, PLANTED, TOY_LEVEL_PROBS, TOY_MODES,
};
pub use dataset::TabularDataset;
pub use infer::{infer_schema, InferOptions};
pub use scaler::{apply_scaler, fit_scaler, ScalerParams, STD_FLOOR};
pub use schema::{validate_columns, ColumnSchema, FeatureKind, Role};
pub use split::{split, SplitPair};
