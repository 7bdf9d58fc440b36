//! Membership inference against released models: access levels, shadow
//! corpora, the multi-label adversary and coefficient recovery.

pub mod access;
pub mod attack;
pub mod corpus;
pub mod recovery;

pub use access::{access, AccessLevel, Accessible};
pub use attack::{
    hamming_score, run_attack, shuffle_labels, shuffled_baseline, Adversary, AdversaryConfig, AttackConfig,
    AttackResult, Score,
};
pub use corpus::{build_shadow_corpus, select_probes, AttackCorpus, Failure, Provenance, ShadowJob, ShadowPlan, Target};
pub use recovery::{canonicalize, invert_monotone_map, recover_lr_coeffs, Inverted, RecoveryConfig};
