//! Lead-lag detection in multivariate time series by clustering
//! sliding-window subsequences, with a synthetic lagged factor model for
//! validation, a cross-correlation benchmark, and a leader/lagger momentum
//! backtest.

pub mod cluster;
pub mod backtest;
pub mod error;
pub mod experiment;
pub mod export;
pub mod ingest;
pub mod leadlag;
pub mod matrix;
pub mod panel;
pub mod rng;
pub mod similarity;
pub mod simulate;

pub use error::{Error, Result};
pub use matrix::SquareMatrix;
pub use panel::{
    excess_returns, extract_subsequences, log_returns, winsorize, ReturnConfig, SubsequenceUniverse,
    TimeSeriesPanel, WindowOrigin,
};
