//! Depth frames to tactile pin grids: ground detection, segmentation,
//! geometric and semantic classification, glyph labeling and synthesis.

pub mod classifier;
pub mod dcgd;
pub mod depthio;
pub mod geomfeat;
pub mod labeling;
pub mod pipeline;
pub mod scenegen;
pub mod segment;
pub mod synthgrid;

pub use classifier::{CoarseClass, FineClass, LabelClass, PointSetModel};
pub use depthio::{DepthFrame, Intrinsics, Point3, PointCloud};
pub use geomfeat::{Footprint, GeometricClass, GeometryThresholds};
pub use labeling::{Glyph, GlyphSheet, ObjectDescriptor, StairsDirection};
pub use pipeline::{run_pipeline, run_raw, PipelineConfig, PipelineError, PipelineOutput, Stage};
pub use synthgrid::{AreaGeometry, GridFormat, PinGrid};
