//! Adaptive distance comparison operations for approximate nearest neighbor
//! search.
//!
//! Vectors are rotated by an orthogonal transform (PCA or random). A
//! distance comparison then reads components incrementally, rescales the
//! partial distance into an estimate of the full one, and stops as soon as a
//! hypothesis test says the candidate is farther than the current threshold.
//! [`Dade`] uses the PCA eigenvalue spectrum and calibrated per-dimension
//! error bounds; [`AdSampling`] uses a random rotation and a closed-form
//! bound; [`FdScanning`] is the exact baseline.
//!
//! Indexes ([`IvfIndex`], [`HnswIndex`], [`linear_scan`]) accept any
//! [`DistanceComparator`].

pub mod calibration;
pub mod error;
pub mod estimator;
pub mod hnsw;
pub mod io;
pub mod ivf;
pub mod linalg;
pub mod linear;
pub mod synthetic;
pub mod topk;
pub mod transform;
pub mod vectors;

pub use calibration::{calibrate, checkpoints, CalibrationTable};
pub use error::{Error, Result};
pub use estimator::{
    AdSampling, Dade, DcoOutcome, DcoStats, DistanceComparator, FdScanning, FixedDim, ScaleRule,
    SplitRow,
};
pub use hnsw::{HnswIndex, HnswParams, SearchScratch};
pub use io::{
    compute_ground_truth, read_fvecs, read_ivecs, recall, write_fvecs, write_ivecs, GroundTruth,
};
pub use ivf::{IvfIndex, IvfParams, Layout};
pub use linear::linear_scan;
pub use topk::{Neighbor, SearchResult, TopK};
pub use transform::{fit_pca, fit_random_orthogonal, OrthoTransform, TransformKind};
pub use vectors::VectorSet;
