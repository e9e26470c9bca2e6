//! Feature selection and attribution: L1-penalized logistic regression and
//! permutation Shapley values.

mod lasso;
mod shapley;

pub use lasso::{
    fit_lasso_logistic, lambda_max, log_grid, select_lambda, soft_threshold, FeatureSelection,
    LambdaSelection, LassoConfig,
};
pub use shapley::{
    global_importance, shapley_attribution, stratified_background, Attribution, GlobalImportance,
};
