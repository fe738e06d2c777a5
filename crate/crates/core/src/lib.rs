//! Forecasting toolkit for multi-band raster time series.
//!
//! The pipeline tiles a masked study area ([`tiling`]), rescales each tile
//! ([`normalize`]), trains a convolutional-encoder → LSTM → conditional
//! generator forecaster ([`model`], [`training`]) on a small reverse-mode
//! differentiation core ([`autograd`]), reassembles per-tile forecasts
//! ([`stitch`]) and scores them with NRMSE ([`evaluate`]).

pub mod autograd;
pub mod composite;
pub mod error;
pub mod evaluate;
pub mod model;
pub mod normalize;
pub mod raster_io;
pub mod rng;
pub mod stitch;
pub mod tiling;
pub mod training;

pub use error::{Error, Result};
