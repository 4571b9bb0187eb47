//! Demographically controlled dataset construction and subgroup fairness
//! evaluation for binary lesion classification.
//!
//! - [`lp`]: dense two-phase simplex plus a vertex-enumeration cross-check.
//! - [`cohort`]: metadata ingestion, filtering and eight-cell tabulation.
//! - [`scenario`]: LP-sized sex-ratio scenarios and seeded manifests.
//! - [`strategies`]: base, multi-task and adversarial training at toy scale.
//! - [`eval`]: AUC, Mann-Whitney U and significance bands per subgroup.

pub mod cohort;
pub mod eval;
pub mod lp;
pub mod rng;
pub mod scenario;
pub mod strategies;
