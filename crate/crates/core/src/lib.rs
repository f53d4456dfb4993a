//! Sublinear-time approximation of symmetric, possibly indefinite,
//! similarity matrices.
//!
//! Matrices are accessed only through a [`SimilarityOracle`]. Classic and
//! submatrix-shifted Nyström produce [`NystromFactor`]s; skeleton, SiCUR and
//! StaCUR produce [`CurFactor`]s. Both expose entries on demand through
//! [`Approximation`] and can be turned into embeddings that extend to new
//! points from their similarities to the landmarks.

pub mod cur;
pub mod error;
pub mod evaluation;
pub mod factor;
pub mod generators;
pub mod io;
pub mod linalg;
pub mod nystrom;
pub mod oracle;
pub mod rng;
pub mod sample;

pub use cur::{embed_cur, sicur, skeleton, stacur, Sampling, StaCurVariant};
pub use error::{Error, Result};
pub use evaluation::{error_sweep, rel_fro_error, ErrorReport, Method, SweepRow};
pub use factor::{Approximation, CurFactor, CurMethod, NystromFactor, SpectralFactor};
pub use nystrom::{
    classic_nystrom, embed_nystrom, extend_embedding, sms_nystrom, ExtensionMap, ShiftMode, SmsParams,
};
pub use oracle::{counting_oracle, symmetrize_oracle, DenseOracle, SimilarityOracle};
pub use sample::IndexSample;
