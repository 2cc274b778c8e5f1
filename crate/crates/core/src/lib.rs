//! Numerical laboratory for shock formation in the forced inviscid Burgers
//! equation `f_t + f f_q + u_q = 0` with a potential periodic in q.

pub mod backward;
pub mod characteristics;
pub mod conservation;
pub mod foliation;
pub mod fourier;
pub mod grid;
pub mod integral_geometry;
pub mod potential;
pub mod table;

pub use characteristics::{first_xi_zero, flow, omega_along, CharPoint, Trajectory};
pub use potential::{Envelope, Forcing, PotentialSpec};
