//! Selective two-photon excitation of cavity bipolaritons.
//!
//! The pipeline runs from an atom-cavity Hamiltonian to dressed levels and
//! dipoles ([`dressed`]), through the two-photon response and the overlaps
//! between final-state response states ([`response`]), to the selective
//! optimum ([`selective`]), its gridded wavefunction, Schmidt modes and
//! separable approximation ([`pulse`]). [`experiments`] assembles scenario
//! runs and [`io`] handles configuration, caching and output files.
//!
//! Numerical modules are generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix `f64`.

pub mod dressed;
pub mod error;
pub mod experiments;
pub mod io;
pub mod pulse;
pub mod response;
pub mod scalar;
pub mod selective;

pub use error::{Error, Result};
pub use scalar::{Cplx, Real};

pub type SystemParams = dressed::SystemParams<f64>;
pub type DressedSystem = dressed::DressedSystem<f64>;
pub type DressedSpectrum = dressed::DressedSpectrum<f64>;
pub type DipoleMatrix = dressed::DipoleMatrix<f64>;
pub type LevelScheme = response::LevelScheme<f64>;
pub type OverlapMatrix = response::OverlapMatrix<f64>;
pub type SelectiveSolution = selective::SelectiveSolution<f64>;
pub type FrequencyGrid = pulse::FrequencyGrid<f64>;
pub type GriddedWavefunction = pulse::GriddedWavefunction<f64>;
pub type SchmidtDecomposition = pulse::SchmidtDecomposition<f64>;
pub type ScenarioConfig = experiments::ScenarioConfig<f64>;
pub type SweepResult = experiments::SweepResult<f64>;
pub type PanelDataset = experiments::PanelDataset<f64>;
