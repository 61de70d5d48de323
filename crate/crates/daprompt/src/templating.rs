//! Prompt construction: the event sentence T1 with virtual event tokens and
//! the assumption template T2, assembled into token-id instances.

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, EventMention, EventPair, Label, Scope};
use crate::error::{Error, Result};
use crate::model::VariantConfig;
use crate::vocab::{
    EnrichedVocabulary, SEP, VET_E1_CLOSE, VET_E1_OPEN, VET_E2_CLOSE, VET_E2_OPEN,
};

pub const MASK1_PLACEHOLDER: &str = "[MASK1]";
pub const MASK2_PLACEHOLDER: &str = "[MASK2]";

/// Which document pair an instance was built from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairRef {
    pub doc_id: String,
    pub first: String,
    pub second: String,
}

/// Positions of the four virtual event tokens inside the token sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VetPositions {
    pub e1_open: usize,
    pub e1_close: usize,
    pub e2_open: usize,
    pub e2_close: usize,
}

/// Assembled prompt over the enriched vocabulary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptInstance {
    pub tokens: Vec<usize>,
    pub mask1_pos: Option<usize>,
    pub mask2_pos: Option<usize>,
    pub vet_positions: Option<VetPositions>,
    pub gold: Label,
    pub pair_ref: PairRef,
    pub scope: Scope,
    /// Token-index range of the T1 region (after `[CLS]`, before the separator).
    pub t1_range: (usize, usize),
    /// Surface words of each mention, for the event-token ablation.
    pub event_surfaces: (Vec<String>, Vec<String>),
}

fn resolve_pair<'d>(
    doc: &'d Document,
    pair: &EventPair,
) -> Result<(&'d EventMention, &'d EventMention)> {
    let first = doc
        .mention(&pair.first)
        .ok_or_else(|| Error::Integrity(format!("unknown mention {}", pair.first)))?;
    let second = doc
        .mention(&pair.second)
        .ok_or_else(|| Error::Integrity(format!("unknown mention {}", pair.second)))?;
    // canonicalize by document order regardless of input order
    if (second.sentence_index, second.start) < (first.sentence_index, first.start) {
        Ok((second, first))
    } else {
        Ok((first, second))
    }
}

fn wrap_single(sentence: &[String], m: &EventMention, open: &str, close: &str) -> Vec<String> {
    let mut out = Vec::with_capacity(sentence.len() + 2);
    out.extend_from_slice(&sentence[..m.start]);
    out.push(open.to_string());
    out.extend_from_slice(&sentence[m.start..m.end]);
    out.push(close.to_string());
    out.extend_from_slice(&sentence[m.end..]);
    out
}

/// Build the event sentence T1: raw sentence(s) with `<E1>..</E1>` wrapping
/// the first mention (by document order) and `<E2>..</E2>` the second.
///
/// Cross-sentence pairs concatenate the two sentences in document order.
pub fn build_event_sentence(doc: &Document, pair: &EventPair) -> Result<Vec<String>> {
    let (first, second) = resolve_pair(doc, pair)?;
    if first.sentence_index == second.sentence_index {
        if second.start < first.end {
            return Err(Error::Integrity(format!(
                "overlapping mention spans {} and {} in doc {}",
                first.mention_id, second.mention_id, doc.doc_id
            )));
        }
        let words = &doc.sentences[first.sentence_index].words;
        let mut out = Vec::with_capacity(words.len() + 4);
        out.extend_from_slice(&words[..first.start]);
        out.push(VET_E1_OPEN.to_string());
        out.extend_from_slice(&words[first.start..first.end]);
        out.push(VET_E1_CLOSE.to_string());
        out.extend_from_slice(&words[first.end..second.start]);
        out.push(VET_E2_OPEN.to_string());
        out.extend_from_slice(&words[second.start..second.end]);
        out.push(VET_E2_CLOSE.to_string());
        out.extend_from_slice(&words[second.end..]);
        Ok(out)
    } else {
        let mut out = wrap_single(
            &doc.sentences[first.sentence_index].words,
            first,
            VET_E1_OPEN,
            VET_E1_CLOSE,
        );
        out.extend(wrap_single(
            &doc.sentences[second.sentence_index].words,
            second,
            VET_E2_OPEN,
            VET_E2_CLOSE,
        ));
        Ok(out)
    }
}

/// Raw sentence(s) of a pair with no virtual tokens, in document order.
pub fn build_raw_sentences(doc: &Document, pair: &EventPair) -> Result<Vec<String>> {
    let (first, second) = resolve_pair(doc, pair)?;
    let mut out = doc.sentences[first.sentence_index].words.clone();
    if second.sentence_index != first.sentence_index {
        out.extend_from_slice(&doc.sentences[second.sentence_index].words);
    }
    Ok(out)
}

/// The fixed assumption template T2 with its two mask placeholders.
pub fn build_assumption() -> Vec<String> {
    [
        "There",
        "is",
        "a",
        "causal",
        "relation",
        "between",
        MASK1_PLACEHOLDER,
        "and",
        MASK2_PLACEHOLDER,
        SEP,
    ]
    .map(String::from)
    .to_vec()
}

/// Single-mask variant of T2: event-1 appears as its raw surface words and
/// only the event-2 mask survives.
pub fn build_assumption_single_mask(first_surface: &[String]) -> Vec<String> {
    let mut out: Vec<String> = ["There", "is", "a", "causal", "relation", "between"]
        .map(String::from)
        .to_vec();
    out.extend_from_slice(first_surface);
    out.push("and".to_string());
    out.push(MASK2_PLACEHOLDER.to_string());
    out.push(SEP.to_string());
    out
}

/// Discrete conventional-prompt template: `e1-surface [MASK] e2-surface [SEP]`.
pub fn build_conventional_template(
    first_surface: &[String],
    second_surface: &[String],
) -> Vec<String> {
    let mut out = first_surface.to_vec();
    out.push(MASK1_PLACEHOLDER.to_string());
    out.extend_from_slice(second_surface);
    out.push(SEP.to_string());
    out
}

/// Strip the four virtual event tokens, recovering the raw sentence words.
pub fn remove_vets(words: &[String]) -> Vec<String> {
    words
        .iter()
        .filter(|w| {
            ![VET_E1_OPEN, VET_E1_CLOSE, VET_E2_OPEN, VET_E2_CLOSE].contains(&w.as_str())
        })
        .cloned()
        .collect()
}

fn is_vet(word: &str) -> bool {
    [VET_E1_OPEN, VET_E1_CLOSE, VET_E2_OPEN, VET_E2_CLOSE].contains(&word)
}

/// Trim context words from the ends of T1 until it fits `budget`, never
/// touching the virtual tokens or the mention words between them.
pub fn truncate(t1: &[String], budget: usize) -> Result<Vec<String>> {
    let vet_idx: Vec<usize> = t1
        .iter()
        .enumerate()
        .filter(|(_, w)| is_vet(w))
        .map(|(i, _)| i)
        .collect();
    let inside: usize = count_mention_words(t1);
    let minimum = vet_idx.len() + inside + 2;
    if budget < minimum {
        return Err(Error::InstanceTooLong {
            len: t1.len(),
            max: budget,
        });
    }
    if t1.len() <= budget {
        return Ok(t1.to_vec());
    }
    let first_vet = *vet_idx.first().expect("T1 carries virtual tokens");
    let last_vet = *vet_idx.last().expect("T1 carries virtual tokens");
    let mut lo = 0usize;
    let mut hi = t1.len();
    while hi - lo > budget {
        let front_slack = first_vet - lo;
        let back_slack = hi - 1 - last_vet;
        if front_slack == 0 && back_slack == 0 {
            return Err(Error::InstanceTooLong {
                len: hi - lo,
                max: budget,
            });
        }
        if front_slack > back_slack {
            lo += 1;
        } else {
            hi -= 1;
        }
    }
    Ok(t1[lo..hi].to_vec())
}

fn count_mention_words(t1: &[String]) -> usize {
    let mut inside = false;
    let mut n = 0;
    for w in t1 {
        match w.as_str() {
            VET_E1_OPEN | VET_E2_OPEN => inside = true,
            VET_E1_CLOSE | VET_E2_CLOSE => inside = false,
            _ if inside => n += 1,
            _ => {}
        }
    }
    n
}

/// Assemble `[CLS] t1 [SEP] t2` into token ids, truncating T1 to fit.
pub fn assemble(
    t1: &[String],
    t2: &[String],
    vocab: &EnrichedVocabulary,
    max_len: usize,
    gold: Label,
    pair_ref: PairRef,
    scope: Scope,
    event_surfaces: (Vec<String>, Vec<String>),
) -> Result<PromptInstance> {
    let overhead = 2 + t2.len(); // [CLS] + separator + T2
    let t1 = if t1.len() + overhead > max_len {
        if max_len < overhead + 1 {
            return Err(Error::InstanceTooLong {
                len: t1.len() + overhead,
                max: max_len,
            });
        }
        truncate(t1, max_len - overhead)?
    } else {
        t1.to_vec()
    };

    let mut tokens = Vec::with_capacity(t1.len() + overhead);
    tokens.push(vocab.tokenizer.cls_id());
    for w in &t1 {
        tokens.push(vocab.id(w));
    }
    let t1_range = (1, tokens.len());
    tokens.push(vocab.tokenizer.sep_id());

    let mask_id = vocab.tokenizer.mask_id();
    let mut mask1_pos = None;
    let mut mask2_pos = None;
    for w in t2 {
        match w.as_str() {
            MASK1_PLACEHOLDER => {
                mask1_pos = Some(tokens.len());
                tokens.push(mask_id);
            }
            MASK2_PLACEHOLDER => {
                mask2_pos = Some(tokens.len());
                tokens.push(mask_id);
            }
            w => tokens.push(vocab.id(w)),
        }
    }
    if tokens.len() > max_len {
        return Err(Error::InstanceTooLong {
            len: tokens.len(),
            max: max_len,
        });
    }

    let find = |id: usize| tokens.iter().position(|&t| t == id);
    let vet_positions = match (
        find(vocab.e1_id),
        find(vocab.e1_close_id),
        find(vocab.e2_id),
        find(vocab.e2_close_id),
    ) {
        (Some(a), Some(b), Some(c), Some(d)) => Some(VetPositions {
            e1_open: a,
            e1_close: b,
            e2_open: c,
            e2_close: d,
        }),
        _ => None,
    };

    Ok(PromptInstance {
        tokens,
        mask1_pos,
        mask2_pos,
        vet_positions,
        gold,
        pair_ref,
        scope,
        t1_range,
        event_surfaces,
    })
}

/// Build the full token-level instance for a pair under the given variant.
pub fn build_instance(
    doc: &Document,
    pair: &EventPair,
    variant: &VariantConfig,
    vocab: &EnrichedVocabulary,
    max_len: usize,
) -> Result<PromptInstance> {
    let (first, second) = resolve_pair(doc, pair)?;
    if first.surface.is_empty() || second.surface.is_empty() {
        return Err(Error::Integrity(format!(
            "empty mention surface in doc {}",
            doc.doc_id
        )));
    }
    let pair_ref = PairRef {
        doc_id: doc.doc_id.clone(),
        first: first.mention_id.clone(),
        second: second.mention_id.clone(),
    };
    let event_surfaces = (first.surface.clone(), second.surface.clone());

    let (t1, t2) = if variant.conventional_prompt {
        (
            build_raw_sentences(doc, pair)?,
            build_conventional_template(&first.surface, &second.surface),
        )
    } else if variant.single_mask {
        (
            build_event_sentence(doc, pair)?,
            build_assumption_single_mask(&first.surface),
        )
    } else {
        (build_event_sentence(doc, pair)?, build_assumption())
    };
    assemble(
        &t1,
        &t2,
        vocab,
        max_len,
        pair.label,
        pair_ref,
        scope_of(first, second),
        event_surfaces,
    )
}

fn scope_of(a: &EventMention, b: &EventMention) -> Scope {
    if a.sentence_index == b.sentence_index {
        Scope::Intra
    } else {
        Scope::Cross
    }
}

impl PromptInstance {
    /// Words of the T1 region, mapped back through the vocabulary.
    pub fn detokenize_t1(&self, vocab: &EnrichedVocabulary) -> Vec<String> {
        self.tokens[self.t1_range.0..self.t1_range.1]
            .iter()
            .map(|&id| vocab.word(id).to_string())
            .collect()
    }

    pub fn n_masks(&self) -> usize {
        usize::from(self.mask1_pos.is_some()) + usize::from(self.mask2_pos.is_some())
    }

    /// Structural invariants: masks carry the mask token, VETs occur once,
    /// sequence starts with the prefix token.
    pub fn validate(&self, vocab: &EnrichedVocabulary, max_len: usize) -> Result<()> {
        if self.tokens.len() > max_len {
            return Err(Error::InstanceTooLong {
                len: self.tokens.len(),
                max: max_len,
            });
        }
        if self.tokens.first() != Some(&vocab.tokenizer.cls_id()) {
            return Err(Error::Integrity("instance must start with [CLS]".into()));
        }
        for pos in [self.mask1_pos, self.mask2_pos].into_iter().flatten() {
            if self.tokens.get(pos) != Some(&vocab.tokenizer.mask_id()) {
                return Err(Error::Integrity(format!(
                    "token at mask position {pos} is not the mask token"
                )));
            }
        }
        if let Some(_v) = self.vet_positions {
            for id in [
                vocab.e1_id,
                vocab.e1_close_id,
                vocab.e2_id,
                vocab.e2_close_id,
            ] {
                let n = self.tokens.iter().filter(|&&t| t == id).count();
                if n != 1 {
                    return Err(Error::Integrity(format!(
                        "virtual token {} occurs {n} times",
                        vocab.word(id)
                    )));
                }
            }
        }
        Ok(())
    }
}
