//! Steepest-descent L² flow of the generalised Helfrich energy
//! `½∫|k − c|² ds + λ L(γ)` for closed curves in ℝⁿ, where the spontaneous
//! curvature `c = (Lγ + M) + f(γ) τ` comes from an affine map and a scalar field.

pub mod ambient;
pub mod config;
pub mod curve;
pub mod energy;
pub mod error;
pub mod flow;
pub mod monitors;
pub mod spline;
pub mod stationary;
pub mod verify;

mod fft;

pub use ambient::{AffineMap, AmbientSpec, ScalarField};
pub use curve::{DiscreteCurve, Geometry, NodeField};
pub use energy::{EnergyReport, GradientField};
pub use error::{Error, Result};
pub use flow::{FlowConfig, FlowState, Integrator, Outcome};
