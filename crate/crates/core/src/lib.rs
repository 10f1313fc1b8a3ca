//! Simulation and optimization toolkit for fiber polarization-drift
//! compensation in entanglement-based QKD.
//!
//! A singlet source sends one photon through a short local arm fitted with a
//! four-retarder compensator and the other through a drifting deployed fiber.
//! The compensator voltages are tuned by a stochastic shrinking-hypercube
//! search that only observes finite-sample QBER estimates.
//!
//! * [`polcore`]: Jones/Stokes math, retarders, pair states.
//! * [`devices`]: retarder stack with voltage calibration, drifting fiber.
//! * [`qkd`]: BBM92 error rate, intrinsic floor, Poisson/binomial sampling.
//! * [`optimizer`]: the search, the simulated plant and the control loop.
//! * [`harness`]: configuration, scenarios, batches and CSV output.

pub mod devices;
pub mod harness;
pub mod optimizer;
pub mod polcore;
pub mod qkd;

pub use devices::{evolve_fiber, DeviceError, FiberChannel, LcvrChannel, LcvrStack};
pub use optimizer::{
    run_control_loop, sample_hypercube, search_iteration, shrink_radius, Objective, Plant,
    SearchConfig, SearchState,
};
pub use polcore::{apply_local, jones_to_stokes, random_unitary, singlet, waveplate};
pub use polcore::{JonesVector, StokesVector, TwoPhotonState, Unitary2};
pub use qkd::{polarization_qber, sample_qber_estimate, true_qber, DetectionConfig, QberEstimate};
