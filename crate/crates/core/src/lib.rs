//! Affine models of co-index-one heterodimensional cycles and the blenders
//! they generate.

// `!(a > b)` is deliberate: NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod affine;
pub mod blender;
pub mod center;
pub mod cycle;
pub mod interval;
pub mod linalg;
pub mod periodic;
pub mod perturbation;
pub mod pipeline;
pub mod scalar;

pub use affine::{AffineError, AxisBox, BlockAffineMap, Chart, ChartPoint, SplittingDims};
pub use cycle::{Itinerary, Symbol};
pub use interval::Interval;
pub use linalg::Mat;
pub use scalar::Scalar;

pub type Cycle = cycle::SimpleCycle<f64>;
pub type CycleParams = cycle::CycleParams<f64>;
pub type Map = affine::BlockAffineMap<f64>;
pub type Point = affine::ChartPoint<f64>;
pub type Region = affine::AxisBox<f64>;
pub type Unfolded = perturbation::UnfoldedCycle<f64>;
pub type Solution = center::ParameterSolution<f64>;
pub type PeriodicRecord = periodic::PeriodicOrbitRecord<f64>;
pub type HomoclinicCertificate = periodic::StrongHomoclinicCertificate<f64>;
pub type Blender = blender::BlenderRegion<f64>;
pub type CoveringCertificate = blender::BlenderCertificate<f64>;
pub type Robustness = blender::RobustnessReport<f64>;
pub type Run = pipeline::PipelineRun<f64>;
