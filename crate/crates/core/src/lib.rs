//! Estimating the number of clusters with the BWDM stopping rule.
//!
//! BWDM compares the average distance between cluster spatial medians with
//! the average distance of observations to their own cluster's spatial
//! median, each divided by its degrees of freedom, and picks the K that
//! maximises the ratio.
//!
//! ```
//! use bwdm::{select_k, DataMatrix, PartitionerConfig};
//!
//! let data = DataMatrix::from_rows(vec![
//!     vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 2.0], vec![2.0, 2.0],
//!     vec![10.0, 0.0], vec![12.0, 0.0], vec![10.0, 2.0], vec![12.0, 2.0],
//! ]).unwrap();
//! let curve = select_k(&data, 3, &PartitionerConfig::default()).unwrap();
//! assert_eq!(curve.best_k, 2);
//! ```

pub mod baselines;
pub mod cli;
pub mod error;
pub mod geometry;
pub mod index;
pub mod io;
pub mod partition;
pub mod synthgen;

pub use baselines::{ch_index, silhouette_width, BaselineRecord, IndexName};
pub use error::{Error, Result};
pub use geometry::{
    spatial_median, spatial_sign, univariate_median, DataMatrix, MedianResult, Point,
    WeiszfeldOptions,
};
pub use index::{abdm, awdm, bwdm, select_k, summarize, ClusterSummary, IndexCurve, IndexRecord};
pub use io::{load_csv, RunReport};
pub use partition::{fit, pam_fit, Method, Partition, PartitionerConfig};
pub use synthgen::{generate, LabeledSample, Preset, ScenarioConfig};
