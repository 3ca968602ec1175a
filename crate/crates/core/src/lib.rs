//! Tubular-structure path tracking on wall-aware supervoxel graphs.
//!
//! Pipeline: valley filtering of the intensity volume, adaptive-compactness
//! SLIC supervoxels on the wall map, a region adjacency graph whose edge
//! costs measure wall crossing, must-pass nodes sampled from distance-map
//! peaks, and a fixed-endpoint TSP over a simplified graph of those nodes.

pub mod config;
pub mod error;
pub mod graph;
mod kv;
pub mod metrics;
pub mod phantom;
pub mod pipeline;
pub mod polyline;
pub mod ridge;
pub mod route;
pub mod sampling;
pub mod supervoxel;
pub mod volume;

pub use config::TrackingConfig;
pub use error::{Error, ErrorClass, Result};
pub use polyline::{Point, Polyline};
pub use volume::{Grid, Volume};
