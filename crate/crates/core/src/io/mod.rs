//! Dataset ingestion and vocabulary persistence.

mod csv;
mod vocab;

pub use self::csv::{ingest_csv, ingest_reader, DatasetRecord, IngestError, IngestReport};
pub use vocab::{build_vocabulary_from_smiles, FragmentEntry, VocabError, Vocabulary};
