//! Clinical-note processing and LDA topic features.

mod corpus;
mod lda;
mod note;
mod synth;

pub use corpus::{read_notes_jsonl, Corpus, Note, Vocabulary};
pub use lda::{
    heldout_perplexity, lda_fit, lda_infer, perplexity, topic_vectorize, GibbsSampler, Inference,
    LdaParams, TopicModel,
};
pub use note::{preprocess_note, stem, NEGATION_TRIGGERS, NEGATION_WINDOW, STOPWORDS, SUFFIXES};
pub use synth::{synth_notes, NoteSynthConfig};
