//! Computational toolkit for super-approximation experiments.
//!
//! * [`modring`]: exact arithmetic over Z, Z[1/q0] and Z/qZ.
//! * [`groupgen`]: congruence quotients, Cayley graphs and congruence kernels.
//! * [`spectral`]: random walks and spectral gaps of Cayley graphs.
//! * [`treereg`]: regularization of leaf sets of rooted regular trees.
//! * [`approxsub`]: product sets, the approximate-subgroup predicate,
//!   bounded generation and commutator width.
//! * [`padic`]: truncated p-adic polynomial maps, Hensel lifting and sumset
//!   coverage.

pub mod approxsub;
pub mod groupgen;
pub mod modring;
pub mod padic;
pub mod spectral;
pub mod treereg;
