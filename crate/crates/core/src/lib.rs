//! Zero-order binary image features.
//!
//! A grayscale image is cut into foreground and background with a single
//! threshold, and everything downstream works on the two labels only:
//!
//! * information packing factor `IPF = u / (u + z)`
//! * compactness `C = u / (u + y)` and scatterness `S = 1 - C`
//! * porousness `P = w / (u + w)` plus per-pore statistics
//!
//! where `u` counts foreground pixels, `z` background pixels, `y` background
//! pixels lying inside a row's foreground span, and `w` background pixels
//! with no 8-connected background path to the image border.
//!
//! IPF is a global feature. The remaining ones describe how the foreground
//! is distributed and are local to the foreground spread.

pub mod binarize;
pub mod classifier;
pub mod cli;
mod error;
pub mod features;
pub mod imagegrid;
pub mod phantom;
pub mod pores;
pub mod tabulate;

pub use binarize::{binarize, otsu_threshold, ThresholdConfig, ThresholdMode};
pub use error::{Error, Result};
pub use features::{extract, Analysis, Combo, Feature, FeatureRecord, SeriesReport};
pub use imagegrid::{BinaryImage, FlipAxis, GrayImage, Label, Polarity, Rotation};
pub use pores::{label_pores, PoreMap};
pub use tabulate::{row_tabulation, RowTabulation};
