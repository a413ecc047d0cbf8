//! Cohort clustering and cluster characterization.
//!
//! Patients are clustered with K-means (K chosen by silhouette) and each
//! cluster is then characterized three ways:
//!
//! * [`stats`]: Student/Welch and chi-square/Fisher tests between clusters;
//! * [`pattern`]: in-pattern/out-pattern differentiation factors;
//! * [`xai`]: SHAP attributions intersected with sufficient-reason rules on
//!   boundary instances picked by [`boundary`] from a model trained by
//!   [`supervised`].
//!
//! [`pipeline`] strings the stages together and renders the JSON and
//! Markdown reports.

pub mod boundary;
pub mod cluster;
pub mod data;
pub mod error;
pub mod linalg;
pub mod pattern;
pub mod pipeline;
pub mod seed;
pub mod stats;
pub mod supervised;
pub mod xai;

pub use error::{Error, Result};

use serde::{Deserialize, Serialize};

/// Whether a feature runs high or low within a cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    High,
    Low,
}

impl Direction {
    pub fn from_sign(x: f64) -> Option<Direction> {
        if x > 0.0 {
            Some(Direction::High)
        } else if x < 0.0 {
            Some(Direction::Low)
        } else {
            None
        }
    }

    pub fn opposite(self) -> Direction {
        match self {
            Direction::High => Direction::Low,
            Direction::Low => Direction::High,
        }
    }
}
