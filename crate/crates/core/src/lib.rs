//! Engine for thread-based curation of scientific literature.
//!
//! Reader highlights are mapped onto a structured parse of the paper,
//! expanded into citation contexts whose inline markers are resolved against
//! the bibliography, staged in a holding tank, and filed into a persistent
//! hierarchy of threads. Threads receive placement suggestions from label
//! embeddings and paper recommendations from citation coverage.

pub mod discovery;
pub mod doc_model;
pub mod engine;
pub mod fsutil;
pub mod geometry;
pub mod linker;
pub mod metadata;
pub mod store;
pub mod suggest;
pub mod text;
pub mod vector;
