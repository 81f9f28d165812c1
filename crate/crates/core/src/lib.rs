//! Zero-shot, affordance-driven vision-and-language navigation in a
//! synthetic continuous environment.
//!
//! Each decision step renders four views around the agent, finds the
//! visible navigable ground in each, scatters numbered candidate points
//! over it, proposes short point-chain paths per view, merges them into one
//! candidate set, lets a high-level agent pick a path or stop, and drives the
//! chosen path with discrete rotate and forward actions.
//!
//! ```
//! use affordnav::geometry::{unproject, project, CameraIntrinsics, PixelPoint, Pose2D};
//!
//! let intr = CameraIntrinsics::from_hfov(512, 512, 90f64.to_radians()).unwrap();
//! let pose = Pose2D::new(0.0, 0.0, 0.0);
//! let floor = unproject(&intr, pose, 1.25, PixelPoint::new(256.0, 384.0), 2.5).unwrap();
//! assert!((floor.x - 2.5).abs() < 1e-9 && floor.z.abs() < 1e-9);
//! let (px, depth) = project(&intr, pose, 1.25, floor).unwrap();
//! assert!((px.v - 384.0).abs() < 1e-9 && (depth - 2.5).abs() < 1e-9);
//! ```

pub mod affordance;
pub mod annotate;
pub mod cli;
pub mod control;
pub mod error;
pub mod geometry;
pub mod llm;
pub mod lowplan;
pub mod metrics;
pub mod pathagent;
pub mod prompt;
pub mod runner;
pub mod scene;

pub use error::{Error, Result};
