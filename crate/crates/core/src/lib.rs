//! Random fields built from the cycle structure of uniform random
//! permutations: samplers, exact mesh scans, the rate function of
//! `log|1 - e(t)|`, arithmetic arc geometry and the experiments built on them.

pub mod arith;
pub mod cycles;
pub mod error;
pub mod experiments;
pub mod field;
pub mod kronecker;
pub mod quad;
pub mod ratefn;
pub mod rng;
pub mod special;
pub mod stats;
pub mod torus;

pub use arith::{ArcClassification, ArcKind, BohrSpec};
pub use cycles::{Block, CycleCounts, CycleStructure, Occupancy, PoissonCounts};
pub use error::{Error, Result};
pub use experiments::{ExperimentConfig, ExperimentKind, ExperimentReport};
pub use field::{ExtReal, FieldKind, FieldSpec, Mesh, ScanResult};
pub use kronecker::{DecayEnvelope, FourierRow};
pub use num_complex::Complex64;
pub use ratefn::{RateSolution, TailEstimate, TiltedSampler};
pub use rng::Stream;
pub use stats::Summary;
pub use torus::{Rational, TorusPoint};
