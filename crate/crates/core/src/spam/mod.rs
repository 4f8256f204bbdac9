//! Spline basis expansion, group-sparse additive regression, and learning
//! of edges between processes.

mod basis;
mod cross;
mod group_lasso;

pub use basis::{spline_design, SplineBasis, DEGREE};
pub use cross::{
    learn_cross_process_edges, learn_cross_process_edges_with, CrossEdges, PredictorMode, TargetFit,
};
pub use group_lasso::{
    cv_select_lambda, fit_cv, fit_group_sparse, lambda_grid, CvPath, SpamConfig, SplineAdditiveModel,
    SplineGroup, ACTIVE_TOL,
};
