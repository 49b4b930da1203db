//! Transfer entropy and correlation networks for financial return panels.
//!
//! Prices are aligned to a trading calendar and turned into log-returns
//! ([`panel`]), binned into symbols ([`discretize`]) and compared pairwise
//! through transfer entropy ([`infotheory`]) with shuffled-surrogate bias
//! removal ([`surrogate`]). Correlation and flow matrices become thresholded
//! asset graphs with centrality rankings ([`netmetrics`]), 2D maps
//! ([`embed`]) and crisis-group flow rankings ([`flows`]).
//!
//! Work is spread over a rayon pool when the `parallel` feature is on (the
//! default); results are identical either way.

pub mod discretize;
pub mod embed;
pub mod error;
pub mod flows;
pub mod infotheory;
pub mod io;
pub mod matrix;
pub mod netmetrics;
pub mod panel;
pub mod par;
pub mod pipeline;
pub mod surrogate;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::{LabeledMatrix, MatrixKind};
pub use panel::ReturnPanel;
