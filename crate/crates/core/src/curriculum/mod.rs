//! Task and relation similarity over relation embeddings, task difficulty,
//! and difficulty-ordered replay curricula sampled from memory.

pub mod builder;
pub mod similarity;

pub use builder::{build_curriculum, Curriculum, CurriculumRelation, SortOrder};
pub use similarity::{
    relation_difficulty, relation_similarity, task_difficulty, task_similarity, DifficultyScores, EmbeddingTable,
    SimilarityMatrix,
};
