//! Persistence and dataset tooling: bit-exact `.uaswcir` CIR logs,
//! range-annotated labels, labeled-dataset assembly (feature extraction,
//! imputation, stratified splitting) and synthetic corpus generation.

mod cirlog;
mod corpus;
mod dataset;

pub use cirlog::{
    decode_frame, encode_frame, parse_annotations, read_annotations, render_annotations,
    write_annotations, Annotation, AnnotationParseError, CirLog, CirLogError, CirLogHeader,
    RecordError, DEFAULT_SCALE, FORMAT_TAG,
};
pub use corpus::{
    detection_coverage, generate_corpus, label_slug, read_corpus, write_corpus, CorpusError,
    CorpusSpec,
};
pub use dataset::{
    build_dataset, impute_missing, stratified_split, AnnotatedLog, DatasetError, LabeledDataset,
    SplitIndices, TEST_FRACTION, TRAIN_FRACTION, VALIDATION_FRACTION,
};
