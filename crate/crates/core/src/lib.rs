//! Behavior-aware objective quality assessment for omnidirectional video.
//!
//! The crate covers the whole evaluation chain for 360-degree content:
//!
//! - [`sphere`]: head poses, viewport frusta and in-viewport gaze positions.
//! - [`projection`]: pixel/sphere mappings for ERP, RCMP, TSP and CPP frames,
//!   spherical Fibonacci sampling and frame resampling between projections.
//! - [`media_io`]: raw planar 4:2:0 readers and the OVWM weight-map format.
//! - [`traces`]: head/eye movement trace parsing and frame alignment.
//! - [`weights`]: individual and overall head-movement maps, Gaussian gaze
//!   maps, split-half consistency and viewport coverage.
//! - [`metrics`]: PSNR, SSIM, WS-PSNR, S-PSNR, CPP-PSNR and the
//!   behavior-weighted PSNR variants.
//! - [`subjective`]: MOS, DMOS, subject screening, logistic regression and
//!   correlation reports.
//! - [`percmodel`]: the patch-based perceptual model (preprocessing, weighted
//!   patch sampling, aggregation head, loss with total-variation term, Adam
//!   training) around a pluggable local scorer.
//! - [`cli`]: the batch drivers behind the `odvqa` binary.
//!
//! Runnable walkthroughs for each area live in the crate's `examples/`
//! directory.

pub mod cli;
pub mod error;
pub mod media_io;
pub mod metrics;
pub mod percmodel;
pub mod projection;
pub mod sphere;
pub mod subjective;
pub mod traces;
pub mod weights;

pub use error::{Error, Result};
pub use media_io::{FramePlane, VideoMeta, WeightMap};
pub use projection::{ProjectionKind, SampleSet, SpherePoint};
pub use sphere::{Direction, Fov, Pose};
