//! File formats and batch commands for `cellfield-core`: FMAP field maps,
//! 16-bit PNG label images, CSV reports, and the directory-level steps
//! behind the `cellfield` binary.

pub mod commands;
mod error;
pub mod fmap;
pub mod raster_io;
pub mod report;

pub use error::{Error, Result};
