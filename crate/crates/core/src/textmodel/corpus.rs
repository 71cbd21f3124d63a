use std::collections::HashMap;
use std::io::BufRead;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::note::preprocess_note;
use crate::error::{Error, Result};

/// One line of a notes JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Note {
    pub patient_id: String,
    pub text: String,
}

pub fn read_notes_jsonl(path: &Path) -> Result<Vec<Note>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut notes = Vec::new();
    for (i, line) in file.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        notes.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            what: format!("{} line {}", path.display(), i + 1),
            detail: e.to_string(),
        })?);
    }
    Ok(notes)
}

/// Token ↔ id bijection, ids in order of first appearance.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_words(words: Vec<String>) -> Result<Self> {
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::InvalidParams(format!("duplicate vocabulary word `{w}`")));
            }
        }
        Ok(Self { words, index })
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    fn intern(&mut self, word: &str) -> usize {
        if let Some(&i) = self.index.get(word) {
            return i;
        }
        let i = self.words.len();
        self.words.push(word.to_string());
        self.index.insert(word.to_string(), i);
        i
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub vocab: Vocabulary,
    pub docs: Vec<Vec<usize>>,
    /// Patient id owning each document.
    pub owners: Vec<String>,
}

impl Corpus {
    /// Builds a corpus (and its vocabulary) from already tokenised documents.
    pub fn from_tokens(owners: Vec<String>, docs: &[Vec<String>]) -> Result<Self> {
        if owners.len() != docs.len() {
            return Err(Error::LengthMismatch {
                left: owners.len(),
                right: docs.len(),
            });
        }
        let mut vocab = Vocabulary::default();
        let docs = docs
            .iter()
            .map(|d| d.iter().map(|w| vocab.intern(w)).collect())
            .collect();
        Ok(Self { vocab, docs, owners })
    }

    /// Tokenises notes with [`preprocess_note`]; one document per note.
    pub fn from_notes(notes: &[Note]) -> Result<Self> {
        let tokens: Vec<Vec<String>> = notes.iter().map(|n| preprocess_note(&n.text)).collect();
        Self::from_tokens(notes.iter().map(|n| n.patient_id.clone()).collect(), &tokens)
    }

    pub fn n_tokens(&self) -> usize {
        self.docs.iter().map(Vec::len).sum()
    }

    pub fn doc_words(&self, d: usize) -> Vec<&str> {
        self.docs[d].iter().map(|&w| self.vocab.word(w)).collect()
    }
}
