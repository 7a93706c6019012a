//! Task quantum Fisher information for parametrized quantum combs.
//!
//! The crate computes the maximal quantum Fisher information extractable from
//! `N` uses of a parametrized process under parallel, sequential, quantum-SWITCH,
//! causal-superposition and general indefinite-causal-order strategies, recovers a
//! strategy attaining it, and checks the result against a state-level oracle.

pub mod comb_algebra;
pub mod linalg;
pub mod metrology_zoo;
pub mod qfi_oracle;
pub mod sdp_engine;
pub mod strategy_spaces;
pub mod strategy_synthesis;
pub mod task_qfi;
pub mod tensor_algebra;
