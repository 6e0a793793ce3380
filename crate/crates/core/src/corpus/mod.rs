//! Corpus ingestion: parsing, tokenization, vocabulary, pretrained vectors
//! and fixed-length encoding.

pub mod dataset;
pub mod encode;
pub mod example;
pub mod prepare;
pub mod semeval;
pub mod tokenize;
pub mod twitter;
pub mod vectors;
pub mod vocab;

pub use dataset::{data_dir_from_env, Dataset, Split, DATA_DIR_ENV};
pub use encode::{encode, encode_all, EncodedExample};
pub use example::{ClassCounts, Example, Polarity, Span};
pub use prepare::{load_splits, prepare, Prepared};
pub use semeval::parse_semeval_xml;
pub use tokenize::{tokenize, tokenize_with_offsets};
pub use twitter::parse_twitter;
pub use vectors::{load_pretrained_vectors, random_embeddings, LoadedVectors, VectorSource};
pub use vocab::{Vocabulary, PAD, UNK};
