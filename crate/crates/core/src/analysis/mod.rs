//! Fits and estimators that turn counts back into physics: fringe and peak
//! fits, correlation expectation values and the CHSH combination.

mod bell;
mod fringe;
pub mod lsq;
mod peaks;
mod sinusoid;

pub use bell::{
    chsh_s, expectation_from_counts, expectation_from_fringes, expectation_from_values,
    predicted_s, visibility_budget, BellResult, ExpectationEstimate,
};
pub use fringe::{fit_fringe, fit_fringe_data, wrap_phase, FringeFit, FringeModel};
pub use peaks::{fit_gaussian_peaks, FittedPeak, GaussianPeaksModel, PeakFit};
pub use sinusoid::{fit_sinusoid, SinusoidFit, SinusoidModel};
