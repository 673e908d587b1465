//! Order-1 sparse moment relaxations, their conic form, fixtures and export.

mod conic;
mod fixtures;
mod moment;
mod sdpa;

pub use conic::{
    linear_conic, matrix_to_svec, svec_index, svec_len, svec_to_matrix, to_conic, BlockInfo,
    ConeSpec, ConicProblem, RowLabel,
};
pub use fixtures::{
    exact_feasibility, exact_functional_value, normalized_upper_sign, split_sign_fixture,
    split_sign_matrix, first_order_gap_fixture, first_order_gap_moments, SplitSignFixture, FirstOrderGapFixture,
};
pub use moment::{
    assemble_moment_sdp, functional, point_moments, MomentBlock, MomentFunctional, MomentIndex,
    MomentInequality, MomentSdp,
};
pub use sdpa::{export_sdpa, read_sdpa, to_sdpa, write_sdpa, SdpaProblem};

use thiserror::Error;

use crate::encode::EncodingKind;

#[derive(Debug, Error)]
pub enum SdpError {
    #[error("monomial {0} is not covered by any clique")]
    Uncovered(String),
    #[error("{0} encoding cannot be assembled here")]
    WrongEncoding(EncodingKind),
    #[error("malformed conic problem: {0}")]
    Malformed(String),
    #[error("fixture precondition: {0}")]
    Fixture(String),
    #[error("nothing to export")]
    NothingToExport,
    #[error("SDPA parse error: {0}")]
    SdpaParse(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}
