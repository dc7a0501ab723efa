#![allow(dead_code)]

pub mod nipals_oracle;

use cogaug::corpus::Corpus;
use cogaug::embedding::{EmbeddingTable, MockEmbedder};
use cogaug::evaluation::embed_inputs;
use cogaug::generation::{generate_pool, GenerationOptions, MockProvider, SyntheticPool};

pub const EMBED_SEED: u64 = 7;

pub struct Inputs {
    pub corpus: Corpus,
    pub pool: SyntheticPool,
    pub embeddings: EmbeddingTable,
    pub embedding_id: String,
}

/// Fixture corpus, mock-generated pool and mock embeddings.
pub fn fixture_inputs() -> Inputs {
    let corpus = Corpus::fixture();
    let pool = generate_pool(&corpus, &MockProvider, None, &GenerationOptions::default()).unwrap();
    let embedder = MockEmbedder::new(EMBED_SEED, 768);
    let embeddings = embed_inputs(&corpus, &pool, &embedder, 4).unwrap();
    Inputs {
        corpus,
        pool,
        embeddings,
        embedding_id: cogaug::embedding::EmbeddingProvider::id(&embedder).to_string(),
    }
}
