//! Cross-modal data augmentation for cognitive score regression from
//! speech transcriptions.
//!
//! Written narratives are turned into style-conditioned oral monologues,
//! filtered into a class-balanced training supplement, embedded and
//! regressed with PLS under a patient-level leave-one-out protocol.

pub mod augmentation;
pub mod corpus;
pub mod embedding;
pub mod evaluation;
pub mod generation;
pub mod regression;

mod hashing;

pub use hashing::sha256_hex;
