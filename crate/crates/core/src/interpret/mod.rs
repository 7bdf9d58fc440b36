//! Interpreting tensor-train classifiers: marginal feature sensitivities,
//! type-conditioned sensitivities and score monotonicity curves.

pub mod monotonicity;
pub mod sensitivity;

pub use monotonicity::{curve_from_scores, monotonicity_curve, CurveBin, MonotonicityCurve, LIKELY, UNLIKELY};
pub use sensitivity::{
    feature_sensitivity, sensitivity_by_type, sensitivity_with_fixed, type_assignment, ScoreKind, SensitivityConfig,
    SensitivityEntry, SensitivityReport, Weighting,
};
