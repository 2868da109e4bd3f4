//! Multi-algorithm fingerprint verification.
//!
//! The crate bundles four independent matchers and the machinery needed to
//! evaluate and combine them:
//!
//! * [`symmetry`] computes the orientation tensor, linear and parabolic
//!   symmetry fields, block quality maps and foreground segmentation.
//! * [`minutiae`] extracts minutiae either from the inhibited parabolic
//!   symmetry response or from a thinned binary ridge skeleton.
//! * [`matcher`] holds the triangle/correlation matcher, the pair
//!   compatibility matcher, the elastic tolerance-box matcher and the
//!   Gabor FingerCode matcher.
//! * [`fusion`] maps raw scores to similarities and fuses them.
//! * [`evaluation`] runs genuine/impostor protocols and reports EER, DET
//!   data and fusion tables.
//!
//! Everything runs on 8-bit grayscale images ([`imageio::GrayImage`]); a
//! phase-dislocation ridge generator provides images with known minutiae.

pub mod error;
pub mod evaluation;
pub mod fusion;
pub mod geometry;
pub mod imageio;
pub mod matcher;
pub mod minutiae;
pub mod pipeline;
pub mod symmetry;

pub use error::{Error, Result};
pub use geometry::RigidTransform;
pub use imageio::GrayImage;
