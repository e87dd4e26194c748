//! Navigation-domain partitioning for interactive multiview streaming.
//!
//! A synthetic scene is rendered from a grid of camera poses. The grid is
//! split into navigation segments, each carrying one coded reference view
//! plus the voxels its other members see but the reference does not. The
//! partition is tuned for storage and expected streaming rate, then served
//! to navigating clients.

pub mod cli;
pub mod codec;
pub mod dataset;
pub mod error;
pub mod innovation;
pub mod navdomain;
pub mod partition;
pub mod scene;
pub mod server;
pub mod sim;

pub use dataset::Dataset;
pub use error::{Error, Result};
