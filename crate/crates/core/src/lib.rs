//! Averaging of fast-oscillating bilinear systems on Lie algebras.
//!
//! The crate is organised bottom-up:
//!
//! - [`expr`]: expression language for user-declared scalar quantities.
//! - [`algebra`]: structure constants, coadjoint actions, Euler equations,
//!   the averaging 2-cocycle and central extensions.
//! - [`averaging`]: oscillating primitives, averaged vector fields and the
//!   drift vector produced by fast oscillations.
//! - [`integrate`]: fixed-step RK4 with diverged-run reporting.
//! - [`reduced`]: Hamiltonian dynamics on `T*U x g*` with a connection.
//! - [`clflow`]: 2D Craik-Leibovich vorticity solver on the torus.
//! - [`harness`]: epsilon sweeps comparing fast and averaged dynamics.

pub mod algebra;
pub mod averaging;
pub mod clflow;
pub mod expr;
pub mod harness;
pub mod integrate;
pub mod reduced;
