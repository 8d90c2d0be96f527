//! Weak formulations of the quantum Euler system evaluated on simulated trajectories,
//! and the mollified identities with commutator remainders.

mod commutator;
mod mollifier;
mod quadrature;
mod residual;
mod test_fn;

pub use commutator::{
    commutator_g, commutator_with, mollified_system_residual, pair_r0, pair_r1, remainders,
    Commutator, MollifiedReport,
};
pub use mollifier::{Mollifier, MollifierSpec};
pub use quadrature::{describe as describe_quadrature, simpson_weights};
pub use residual::{
    continuity_residual, momentum_residual, verify_basket, Pressure, ResidualEntry, ResidualKind,
    ResidualReport, RunMeta, WeakResidual,
};
pub use test_fn::{default_basket, Mode, TestFunctionSpec, TimeEnvelope};
