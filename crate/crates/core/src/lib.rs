//! Fisher information and relative entropy distances to normality for
//! densities on uniform grids, their standardized i.i.d. sums, Poincaré
//! constants, and the projection inequalities behind O(1/n) convergence.

pub mod convolution;
pub mod debruijn;
pub mod density;
pub mod error;
pub mod family;
pub mod grid;
pub mod harness;
pub mod info;
pub mod poincare;
pub mod projection;
pub mod report;
pub mod spectral;
pub mod testfn;
pub mod tridiag;

pub use density::{conditional_truncate, moments, standardize};
pub use error::{Error, Result};
pub use family::{materialize, DistributionSpec, Family, GridSpec};
pub use grid::{GridDensity, GridFunction};
pub use info::{
    distance_chain, fisher_information, relative_entropy, score, standardized_fisher, tail_score_mass,
    DistanceChain, InfoSummary, ScoreField, TailProfile,
};
