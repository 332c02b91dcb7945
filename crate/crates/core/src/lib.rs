//! Question answering over technical operating manuals: ingestion, BM25F
//! retrieval, extractive reading with passage aggregation, score fusion,
//! evaluation and a feedback-aware dialog loop.

pub mod corpus;
pub mod index;
pub mod text;
pub mod reader;
pub mod rerank;
pub mod metrics;
pub mod pipeline;
pub mod dialog;
