//! Orthogonal discrete wavelet transform with periodic boundaries.

mod energy;
mod filters;
mod transform;

pub use energy::{all_level_energies, level_energies, LevelEnergy};
pub use filters::{make_filter, WaveletFilter, FILTER_NAMES};
pub use transform::{dwt, idwt, WaveletDecomposition};
