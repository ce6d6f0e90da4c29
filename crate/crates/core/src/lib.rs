//! Private information retrieval from `n` replicated, non-communicating
//! databases.
//!
//! The centerpiece is [`TwoMessageOptimal`], which retrieves one of two
//! messages at download cost `1 + 1/n` by answering queries laid out on a
//! coherence grid ([`grid`]). [`KMessageRepetition`] handles any number of
//! messages at cost `1 + 1/(n - 1)`, [`DownloadAll`] is the trivial baseline
//! and [`Symmetrized`] spreads any of them evenly over the databases.
//!
//! [`audit`] checks privacy and correctness by exact enumeration and
//! compares measured costs against the closed-form bounds. [`simnet`] runs
//! the databases as isolated actors over TCP or in-process.
//!
//! ```
//! use bia_pir::{run_inprocess, scheme_for, FieldId, MessageStore, SchemeId, SchemeParams};
//!
//! let params = SchemeParams::new(SchemeId::TWO_OPT, 2, 3, FieldId::Gf256).unwrap();
//! let scheme = scheme_for(params).unwrap();
//! let mut rng = bia_pir::session_rng(Some(1));
//! let store = MessageStore::random(FieldId::Gf256, 2, 6, scheme.block_len(), &mut rng).unwrap();
//! let token = scheme.draw_randomness(&mut rng);
//! let (message, transcript) = run_inprocess(params, 2, &store, &token).unwrap();
//! assert_eq!(message, store.message(2).unwrap());
//! assert_eq!(transcript.downloaded_symbols(), 8);
//! ```

pub mod audit;
pub mod cli;
pub mod error;
pub mod field;
pub mod grid;
pub mod schemes;
pub mod simnet;
pub mod store;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub use audit::{
    audit_correctness, audit_privacy, bound_asymptotic, bound_two_message, measure_cost, CostReport,
    DistributionReport, Rational, StoreSource,
};
pub use error::{Error, Result};
pub use field::{dot, FieldElement, FieldId};
pub use grid::{build_grid, shift_perm, Cell, CoherenceGrid, ShiftToken};
pub use schemes::{
    scheme_for, Answer, DownloadAll, KMessageRepetition, PirScheme, Query, QueryPayload, RandomnessToken, SchemeId,
    SchemeParams, Symmetrized, TwoMessageOptimal,
};
pub use simnet::{retrieve, retrieve_with, run_inprocess, DatabaseActor, Transcript};
pub use store::MessageStore;

/// Session randomness. Seeded runs are reproducible and therefore offer no
/// privacy; unseeded runs draw from the operating system.
pub fn session_rng(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    }
}
