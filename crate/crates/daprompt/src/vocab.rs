//! Word-level tokenizer and the virtual-token enriched vocabulary.
//!
//! The base vocabulary plays the role of a backbone PLM vocabulary; the
//! enrichment appends the five virtual tokens `<E1> </E1> <E2> </E2> <None>`
//! and fixes the per-mask candidate answer sets.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const MASK: &str = "[MASK]";

pub const VET_E1_OPEN: &str = "<E1>";
pub const VET_E1_CLOSE: &str = "</E1>";
pub const VET_E2_OPEN: &str = "<E2>";
pub const VET_E2_CLOSE: &str = "</E2>";
pub const NONE_TOKEN: &str = "<None>";

pub const VIRTUAL_TOKENS: [&str; 5] = [
    VET_E1_OPEN,
    VET_E1_CLOSE,
    VET_E2_OPEN,
    VET_E2_CLOSE,
    NONE_TOKEN,
];

/// Words every base vocabulary must carry: specials, the assumption template,
/// and the answer words of the conventional-prompt baseline.
const BUILTIN_WORDS: [&str; 14] = [
    PAD, UNK, CLS, SEP, MASK, "There", "is", "a", "causal", "relation", "between", "and", "cause",
    "none",
];

/// Deterministic word-level tokenizer over a fixed base vocabulary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tokenizer {
    words: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Tokenizer {
    /// Build from corpus words; builtins come first, then sorted unique words.
    pub fn build<I, S>(corpus_words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut words: Vec<String> = BUILTIN_WORDS.iter().map(|s| s.to_string()).collect();
        let mut seen: HashMap<String, usize> =
            words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        let mut extra: Vec<String> = corpus_words
            .into_iter()
            .map(|w| w.as_ref().to_string())
            .filter(|w| !seen.contains_key(w))
            .collect();
        extra.sort();
        extra.dedup();
        for w in extra {
            seen.insert(w.clone(), words.len());
            words.push(w);
        }
        Tokenizer { words, index: seen }
    }

    /// Rebuild the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    /// Id of a word, falling back to `[UNK]`.
    pub fn id(&self, word: &str) -> usize {
        self.index
            .get(word)
            .copied()
            .unwrap_or_else(|| self.index[UNK])
    }

    pub fn exact_id(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn pad_id(&self) -> usize {
        self.index[PAD]
    }
    pub fn unk_id(&self) -> usize {
        self.index[UNK]
    }
    pub fn cls_id(&self) -> usize {
        self.index[CLS]
    }
    pub fn sep_id(&self) -> usize {
        self.index[SEP]
    }
    pub fn mask_id(&self) -> usize {
        self.index[MASK]
    }
}

/// Base vocabulary plus the five virtual tokens and the candidate answer sets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnrichedVocabulary {
    pub tokenizer: Tokenizer,
    pub base_size: usize,
    pub e1_id: usize,
    pub e1_close_id: usize,
    pub e2_id: usize,
    pub e2_close_id: usize,
    pub none_id: usize,
    /// Answer candidates for `[MASK1]`: base vocabulary + `<E1>` + `<None>`.
    pub candidate_set_1: Vec<usize>,
    /// Answer candidates for `[MASK2]`: base vocabulary + `<E2>` + `<None>`.
    pub candidate_set_2: Vec<usize>,
}

impl EnrichedVocabulary {
    pub fn extend(tokenizer: Tokenizer) -> Result<Self> {
        for v in VIRTUAL_TOKENS {
            if tokenizer.contains(v) {
                return Err(Error::Config(format!(
                    "virtual token {v} collides with an existing vocabulary entry"
                )));
            }
        }
        let base_size = tokenizer.len();
        let e1_id = base_size;
        let e1_close_id = base_size + 1;
        let e2_id = base_size + 2;
        let e2_close_id = base_size + 3;
        let none_id = base_size + 4;
        let mut candidate_set_1: Vec<usize> = (0..base_size).collect();
        candidate_set_1.extend([e1_id, none_id]);
        let mut candidate_set_2: Vec<usize> = (0..base_size).collect();
        candidate_set_2.extend([e2_id, none_id]);
        Ok(EnrichedVocabulary {
            tokenizer,
            base_size,
            e1_id,
            e1_close_id,
            e2_id,
            e2_close_id,
            none_id,
            candidate_set_1,
            candidate_set_2,
        })
    }

    /// Total size including the five virtual tokens.
    pub fn total_size(&self) -> usize {
        self.base_size + 5
    }

    /// Candidate set of the event-token ablation: base vocabulary + `<None>`.
    pub fn candidate_set_event_tokens(&self) -> Vec<usize> {
        let mut set: Vec<usize> = (0..self.base_size).collect();
        set.push(self.none_id);
        set
    }

    /// Id of a token of the full (enriched) vocabulary, virtual tokens included.
    pub fn id(&self, word: &str) -> usize {
        match word {
            VET_E1_OPEN => self.e1_id,
            VET_E1_CLOSE => self.e1_close_id,
            VET_E2_OPEN => self.e2_id,
            VET_E2_CLOSE => self.e2_close_id,
            NONE_TOKEN => self.none_id,
            w => self.tokenizer.id(w),
        }
    }

    pub fn word(&self, id: usize) -> &str {
        if id < self.base_size {
            self.tokenizer.word(id)
        } else {
            VIRTUAL_TOKENS[id - self.base_size]
        }
    }

    pub fn is_virtual(&self, id: usize) -> bool {
        id >= self.base_size
    }
}
