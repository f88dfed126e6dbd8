//! Knowledge-graph embeddings: TransE pre-training and per-relation
//! conceptual distributions that yield relation embeddings.

pub mod concept;
pub mod graph;
pub mod transe;

pub use concept::{
    concept_pairs, export_relation_embeddings, format_relation_embeddings, load_relation_embeddings,
    parse_relation_embeddings, train_concept_model, write_relation_embeddings, ConceptConfig, ConceptModel,
    ConceptPair, ConceptTrained, Extraction, RelationEmbedding, RelationEmbeddings, Side,
};
pub use graph::{Interner, KnowledgeGraph, Triple};
pub use transe::{corrupt, train_transe, TransEConfig, TransEModel, TransETrained};
