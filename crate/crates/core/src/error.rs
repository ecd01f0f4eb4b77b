use alloc::vec::Vec;
use core::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Raster buffer length does not equal `width * height`, or a side is zero.
    InvalidDimensions {
        width: usize,
        height: usize,
        len: usize,
    },
    /// Two rasters that must share a shape do not.
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    /// Instance ids are not `1..=n` without gaps.
    MissingLabel {
        id: u32,
        max_id: u32,
    },
    InvalidConnectivity(u8),
    /// Segmentation whose instance map is not zero exactly on its background mask.
    InconsistentBackground,
    InvalidParameter {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    SolverFailure {
        instance_id: u32,
        reason: &'static str,
    },
    /// A per-cell field whose maximum is not strictly positive cannot be normalized.
    DegenerateField {
        instance_id: u32,
    },
    /// `(instance_id, last ℓ₂ change)` for every instance still moving at the iteration cap.
    NotConverged {
        max_iterations: usize,
        instances: Vec<(u32, f64)>,
    },
    PlacementFailed {
        placed: usize,
        requested: usize,
    },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidDimensions { width, height, len } => {
                write!(f, "invalid raster: {width}x{height} with {len} values")
            }
            Error::DimensionMismatch { expected, found } => write!(
                f,
                "dimension mismatch: expected {}x{}, found {}x{}",
                expected.0, expected.1, found.0, found.1
            ),
            Error::MissingLabel { id, max_id } => write!(
                f,
                "labeling is not compact: id {id} is missing (max id {max_id})"
            ),
            Error::InvalidConnectivity(c) => {
                write!(f, "connectivity must be 4 or 8, got {c}")
            }
            Error::InconsistentBackground => {
                f.write_str("instance map must be zero exactly where the background mask is set")
            }
            Error::InvalidParameter {
                name,
                value,
                expected,
            } => write!(f, "invalid {name} = {value}: expected {expected}"),
            Error::SolverFailure {
                instance_id,
                reason,
            } => write!(f, "solver failed for instance {instance_id}: {reason}"),
            Error::DegenerateField { instance_id } => {
                write!(f, "field of instance {instance_id} has no positive maximum")
            }
            Error::NotConverged {
                max_iterations,
                instances,
            } => {
                write!(
                    f,
                    "{} instance(s) did not converge within {max_iterations} iterations:",
                    instances.len()
                )?;
                for (id, delta) in instances {
                    write!(f, " {id} (last change {delta:.3e})")?;
                }
                Ok(())
            }
            Error::PlacementFailed { placed, requested } => write!(
                f,
                "placed only {placed} of {requested} instances; lower the density or min_gap"
            ),
        }
    }
}

impl core::error::Error for Error {}
