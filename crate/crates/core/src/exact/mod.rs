//! Exact statistical mechanics on small tori: partition functions by Gray-code
//! enumeration and by transfer matrices, event probabilities, the `𝔷`
//! quantities and the certified checks built on them.
//!
//! All probabilities are handled as logarithms; weights are combined with
//! log-sum-exp so that `β` up to 50 neither overflows nor underflows.

mod checks;
mod ensemble;
mod event;
pub(crate) mod gray;
mod rp;
mod transfer;

pub use checks::{
    random_chessboard_assignment, two_point_probability, verify_block_symmetry, verify_chessboard,
    verify_lemma_per, verify_lemma_per_many, verify_prop2, verify_prop2_transfer, verify_prop3,
    CHESSBOARD_TOLERANCE, IDENTITY_TOLERANCE,
};
pub use ensemble::{event_probability, log_partition_enumerate, DensityOfStates, ExactEnsemble};
pub use event::{log_z_pattern, log_z_value, z_double, z_quantity, BlockEvent, MAX_EVENT_BITS};
pub use rp::{
    rp_gram, verify_cauchy_schwarz, verify_rp, verify_rp_all, RpGram, MAX_GRAM_BLOCK,
    MAX_GRAM_DIMENSION, PSD_TOLERANCE, SYMMETRY_TOLERANCE,
};
pub use transfer::{
    log_partition_transfer, log_partition_transfer_with_derivative, mean_energy_transfer,
    MAX_TRANSFER_HEIGHT,
};

use serde::{Deserialize, Serialize};

pub const MAX_FREE_SPINS: usize = 28;

/// Size limits of the exact engines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Guards {
    pub max_free_spins: usize,
    pub max_gram: usize,
    pub max_gram_block: usize,
}

impl Default for Guards {
    fn default() -> Self {
        Guards {
            max_free_spins: MAX_FREE_SPINS,
            max_gram: MAX_GRAM_DIMENSION,
            max_gram_block: MAX_GRAM_BLOCK,
        }
    }
}
