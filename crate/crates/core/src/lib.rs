//! Wavelet representations on solenoids.
//!
//! The crate covers the concrete objects of the theory for finite-to-one maps
//! r: X → X, with the circle map t ↦ N·t mod 1 as the main model:
//!
//! - [`dynsys`]: the system (X, r, μ), preimages and μ-integrals
//! - [`filter`]: QMF filters m₀, the weight W, the transfer operator R_W and
//!   the Lyapunov integral
//! - [`tree`]: preimage trees, Green function, Martin kernel and metric
//! - [`boundary`]: path space, cylinder measures, random walks and the
//!   boundary kernel
//! - [`harmonic`]: p-harmonic and additive functions, QMF-weights and their
//!   correspondences
//! - [`solenoid`]: Monte Carlo realization of the wavelet representation on
//!   L²(μ∞)
//! - [`decomp`]: fiber representations and the statistics behind the direct
//!   integral decomposition
//! - [`checks`]: invariant suites producing pass/fail records

pub mod arcs;
pub mod boundary;
pub mod checks;
pub mod decomp;
pub mod dynsys;
pub mod error;
pub mod filter;
pub mod harmonic;
pub mod quadrature;
pub mod rng;
pub mod solenoid;
pub mod tree;
pub mod trig;
pub mod walk;

pub use arcs::ArcSet;
pub use boundary::PathPrefix;
pub use dynsys::{AbstractTree, Angle, Point, SystemKind, SystemSpec};
pub use error::{Error, Result};
pub use filter::FilterSpec;
pub use harmonic::{NodeFunction, Role};
pub use solenoid::SolenoidSample;
pub use tree::{NodeId, RegularityReport, Tree};
pub use trig::TrigPoly;
pub use walk::{CircleWalk, WeightedPreimages};
