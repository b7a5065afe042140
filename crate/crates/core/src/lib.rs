//! Ground segmentation for 3D LiDAR scans.
//!
//! The scan is split into a concentric zone model of polar bins ([`czm`]),
//! a ground plane is fitted per bin from its lowest points ([`plane_fit`]),
//! and each fitted patch is accepted or rejected by a ground likelihood
//! test built from uprightness, elevation and flatness ([`gle`]).
//! [`pipeline::segment`] runs the three stages end to end.

pub mod cloud;
pub mod czm;
pub mod error;
pub mod eval;
pub mod gle;
pub mod io;
pub mod pipeline;
pub mod plane_fit;
pub mod ransac;
pub mod synth;

pub use cloud::{GroundTruthMask, Point, PointCloud};
pub use czm::{BinCoord, PolarGrid, ZoneConfig};
pub use error::{Error, Result};
pub use gle::{BinFeatures, BinVerdict, GleParams};
pub use pipeline::{segment, PatchworkParams, SegmentationResult, Variant};
pub use plane_fit::{PlaneModel, RgpfParams};
