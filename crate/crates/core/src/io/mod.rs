//! Reading and writing embedding sets, corpora, word lists and annotations.

mod embeddings;
mod text;

pub use embeddings::{
    decode_hemb1, decode_json, encode_hemb1, encode_json, read_embedding_set, write_embedding_set,
    EmbeddingSet, HEMB1_MAGIC,
};
pub use text::{
    apply_hyphen_policy, parse_intruder_instances, read_corpus, read_intruder_instances,
    read_word_list, Corpus, Document, HyphenPolicy, IntruderInstance, WordList, WordListKind,
};
