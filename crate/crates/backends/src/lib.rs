//! Decomposers, scorers and generators backed by document layout or by
//! remote inference services, plus the solver-critic refinement loop.

pub mod client;
pub mod config;
pub mod layout;
pub mod mock;
pub mod refine;
pub mod remote;

pub use client::{BackendError, ChatClient, ChatReply, RerankClient};
pub use config::InferenceEndpointConfig;
pub use layout::{layout_extract, LayoutDecomposer};
pub use refine::{solver_critic_refine, CritiqueReport, RefineError, RefineOptions, Refinement};
pub use remote::{decompose_remote, generate, score_remote, strip_reply_markup, RemoteDecomposer, RemoteGenerator, RemoteScorer};
