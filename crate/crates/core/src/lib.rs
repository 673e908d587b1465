//! Robustness certification for binarized neural networks.

pub mod cli;
pub mod encode;
pub mod generate;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod poly;
pub mod sdp;
pub mod solver;
