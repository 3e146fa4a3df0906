//! Anisotropic control functions and their damping generators.

pub mod diagnostics;
pub mod kernels;
pub mod omega;

pub use diagnostics::{control_diagnostics, selected_terms, BandDiagnostics, ControlDiagnostics};
pub use kernels::{kernel_e, kernel_t, Anisotropy};
pub use omega::{
    build_omega, build_u_g, build_zeta, lattice_step, zeta_profile, BandKernels, ControlFamily, ControlField,
    ControlKernels, ControlParams, DominationConstant,
};
