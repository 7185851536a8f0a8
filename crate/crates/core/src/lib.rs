//! Optimal decentralized LQR synthesis for plants structured over directed
//! acyclic graphs, with robustness certificates: Kalman inequalities,
//! structured small-gain bounds, gain and phase margins.
//!
//! The numerical core is generic over the scalar type ([`Real`], implemented
//! for `f32` and `f64`); the aliases at the crate root fix it to `f64`.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod graph;
pub mod linalg;
pub mod lqr;
pub mod random;
pub mod robustness;
pub mod scalar;
pub mod statespace;
pub mod synthesis;

pub use error::{Error, Result};
pub use graph::{BlockPartition, ClosureTable, Dag};
pub use scalar::Real;

pub use nalgebra::{Complex, DMatrix};

pub type Matrix = nalgebra::DMatrix<f64>;
pub type CMatrix = nalgebra::DMatrix<nalgebra::Complex<f64>>;
pub type Spectrum = linalg::Spectrum<f64>;
pub type StateSpaceModel = statespace::StateSpaceModel<f64>;
pub type FrequencyGrid = statespace::FrequencyGrid<f64>;
pub type CareSolution = lqr::CareSolution<f64>;
pub type PartitionedPlant = synthesis::PartitionedPlant<f64>;
pub type DecentralizedController = synthesis::DecentralizedController<f64>;
pub type NoiseSpec = synthesis::NoiseSpec<f64>;
pub type Perturbation = robustness::Perturbation<f64>;
pub type MarginReport = robustness::MarginReport<f64>;
pub type MuCertificate = robustness::MuCertificate<f64>;
pub type NyquistAnalyzer = robustness::NyquistAnalyzer<f64>;
