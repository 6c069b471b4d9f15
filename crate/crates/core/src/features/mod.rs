//! Decay-trajectory representation and the model's input features.

pub mod altitude;
mod fit;
mod grid;
mod normalize;
mod pca;
mod series;
mod tensor;

pub use altitude::{mean_altitude, AltitudeError, ElementConversion, Keplerian};
pub use fit::{fit_decay_curve, fit_decay_curve_with, FitCoefficients, FitError, FitOptions, FitOutcome};
pub use grid::{
    grid_altitudes, grid_index_of_altitude, sample_grid, DecayTrajectory, GridError, GRID_BOTTOM_KM,
    GRID_POINTS, GRID_SPACING_KM, GRID_TOP_KM,
};
pub use normalize::{minmax_normalize, MinMax, NormalizeError};
pub use pca::{decay_feature_matrix, pca, physical_feature_matrix, PcaError, PcaResult};
pub use series::{bstar_feature, solar_feature, BStarSmoothing, SeriesError, SpaceWeatherSeries};
pub use tensor::{
    assemble_tensor, AssembledTensor, FeatureConfig, FeatureTensor, Role, TensorError,
    FEATURE_AREA_TO_MASS, FEATURE_BSTAR, FEATURE_F107, FEATURE_NAMES, FEATURE_TIME,
};
