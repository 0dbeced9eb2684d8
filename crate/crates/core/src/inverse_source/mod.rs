//! Recovering the source `f` from lateral Cauchy data and measuring the
//! Hölder stability of that recovery.

pub mod direct;
pub mod qr;
pub mod stability;

pub use direct::reconstruct_direct;
pub use qr::{reconstruct_qr, JDecomposition, QrDiagnostics, QrReconstruction, ReconstructionProblem};
pub use stability::{
    balance_s, stability_experiment, SBranch, SourceSetup, StabilityFit, StabilityMode, StabilitySample,
};
