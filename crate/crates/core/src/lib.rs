//! Multi-resolution physics-informed recurrent networks for sEMG-driven
//! elbow motion: wavelet preprocessing, a Hill-type muscle model, a GRU
//! surrogate trained with an equation-of-motion residual, and simultaneous
//! identification of muscle parameters.

pub mod autodiff;
pub mod cli;
pub mod datagen;
pub mod dynamics;
pub mod error;
pub mod muscle;
pub mod network;
pub mod physics;
pub mod series;
pub mod trainer;
pub mod wavelet;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

pub use error::{Error, Result};
pub use series::TimeSeries;
