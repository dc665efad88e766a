//! Anisotropic curvature flow for contour parametrization.
//!
//! A closed polyline evolves by `φ' = a T + v n`. The tangential speed `a`
//! keeps the nodes uniformly spaced; the normal speed `v = ∂u/∂n` comes from
//! a boundary-integral Poisson solve whose source is a set of point charges.
//! Without charges `v` reduces to the curvature and the scheme is plain
//! curve-shortening flow. On a raster, curvature and charge forcing are
//! scaled by `Pix/255`, so nodes stop on black pixels.
//!
//! Modules:
//! - [`geometry`]: curves, Kimura frames, tangential redistribution
//! - [`boundary`]: collocation BEM for the two stage systems
//! - [`image`]: PGM rasters and the pixel mask
//! - [`flow`]: update step and the parametrization loop
//! - [`stability`]: next-step amplification bound
//! - [`io`]: CSV and SVG output

pub mod boundary;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod image;
pub mod io;
pub mod linalg;
pub mod stability;

pub use boundary::{BoundarySolution, BoundarySystem};
pub use error::{Error, Result};
pub use flow::{run, Charge, ChargeSet, Clamp, Evolution, FlowConfig, FlowTrace, TerminalReason};
pub use geometry::{local_frames, tangential_coefficients, DiscreteCurve, LocalFrames, TangentialCoefficients, Vec2};
pub use image::{load_pgm, PixelField};
pub use linalg::{condition_inf, ConditionReport};
pub use stability::{dt_policy, eigen_bound, StabilityInputs};
