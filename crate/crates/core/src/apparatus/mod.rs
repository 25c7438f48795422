//! Beamline elements, noise processes and calibration formulas.
//!
//! Every element that acts on the neutron state is an [`ElementChannel`]
//! factory; scalar models (Larmor rotation angle, rocking curves, thermal
//! drift) are plain functions.
//!
//! [`ElementChannel`]: crate::qcore::ElementChannel

mod beam;
mod channels;
mod rocking;
mod thermal;

pub use beam::{larmor_angle, BeamParameters, LarmorCoil, PhysicalConstants};
pub use channels::{
    block_path, make_larmor_accelerator, make_path_dephasing, make_path_phase, make_phase_shifter,
    make_spin_depolarizer, make_spin_turner, SpinAnalyzer,
};
pub use rocking::{
    broadened_peak, polarization_from_peak_overlap, rocking_curve, CoilKind, Monochromator,
    RockingPeak,
};
pub use thermal::ThermalModel;
