//! Segmentation of piano score pages into systems and packaging of the
//! systems as a fixed-size image dataset.
//!
//! The core types are generic over the scalar type (`f32` or `f64`, see
//! [`Scalar`]); the aliases below fix the common choices.

pub mod datasetfmt;
pub mod error;
pub mod imaging;
pub mod metrics;
pub mod neural;
pub mod profileseg;
pub mod scalar;
pub mod synthgen;

pub use error::{Error, Result};
pub use imaging::BinaryImage;
pub use profileseg::{PageSegmentation, SystemRegion};
pub use scalar::Scalar;

pub type GrayImage = imaging::Image<f64>;
pub type GrayImageF32 = imaging::Image<f32>;
pub type Profile = profileseg::RowProfile<f64>;
pub type ProfileF32 = profileseg::RowProfile<f32>;
pub type ThresholdParams = profileseg::ThresholdParams<f64>;
pub type Tensor = neural::Tensor<f32>;
pub type TensorF64 = neural::Tensor<f64>;
/// Weight stores as read from and written to disk.
pub type WeightStore = neural::WeightStore<f32>;
