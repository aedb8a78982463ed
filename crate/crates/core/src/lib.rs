//! Fast multipole evaluation of the velocity induced by 2D vortex particles.
//!
//! The crate pairs a uniform-quadtree FMM ([`fmm`]) with an O(N^2) direct
//! summation ([`kernels`]) and tooling to measure how far the two disagree
//! ([`errorlab`]) across particle counts, tree depths and truncation orders
//! ([`harness`]).

pub mod error;
pub mod errorlab;
pub mod expansions;
pub mod fmm;
pub mod harness;
pub mod io;
pub mod kernels;
pub mod model;
pub mod quadtree;

pub use error::{FmmError, Result};
pub use expansions::{BoundParams, Expansion, ExpansionKind, Translator};
pub use fmm::{evaluate, evaluate_at, FmmConfig, FmmOutput, FmmRunStats};
pub use kernels::{kernel_eval, velocity_direct, velocity_direct_at_particles, KernelKind};
pub use model::{generate_particles, Distribution, Domain, Particle, Velocity};
pub use quadtree::{cell_index, CellId, Tree};
