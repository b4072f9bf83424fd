//! Search-session user simulation toolkit.
//!
//! The crate simulates complete user/search-engine interaction sequences
//! (queries, clicks, stop decision) with an LLM-driven agent loop, implements
//! classical per-behavior baselines (term-sampling query generators,
//! probabilistic click models fitted with EM, heuristic stopping rules), and
//! evaluates all of them against logged sessions.
//!
//! Module map:
//! - [`session`]: the session data model, dataset ingestion and filtering
//! - [`synth`]: seeded synthetic dataset generation from known behavior params
//! - [`llm`]: provider-agnostic chat-completion client with a deterministic mock
//! - [`agent`]: the round loop (reason, stop, query, click, observe)
//! - [`querygen`]: term language-model query baselines
//! - [`click`]: PBM / UBM / DCM / DBN click models plus a regression-EM PBM
//! - [`stop`]: fixed-depth / frustration / satisfaction stopping rules
//! - [`eval`]: BLEU, classification metrics, k-fold CV, and the eval harness
//! - [`reference`]: published reference results reported alongside local runs

pub mod agent;
pub mod click;
pub mod eval;
pub mod llm;
pub mod querygen;
pub mod reference;
pub mod session;
pub mod stop;
pub mod synth;
