//! Corpus ingestion, event-pair enumeration, fold planning and negative sampling.
//!
//! Documents arrive as JSONL, one document object per line:
//! `{doc_id, topic_id, sentences: [[word,...],...], mentions: [...], causal_links: [...]}`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: &str = "1";

/// Gold label of an event pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Causal,
    None,
}

/// Whether both mentions of a pair share a sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scope {
    Intra,
    Cross,
}

/// Scope selector for filtering and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScopeFilter {
    Intra,
    Cross,
    All,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sentence {
    pub index: usize,
    pub words: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventMention {
    pub mention_id: String,
    pub sentence_index: usize,
    /// Half-open word-index interval `[start, end)`.
    pub start: usize,
    pub end: usize,
    /// Sentence words covered by the span; filled in at validation.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub surface: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub topic_id: String,
    pub sentences: Vec<Sentence>,
    pub mentions: Vec<EventMention>,
    pub causal_links: Vec<(String, String)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Topic {
    pub topic_id: String,
    pub documents: Vec<Document>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Corpus {
    pub name: String,
    pub schema_version: String,
    /// Topics in canonical (lexicographic) order of topic id.
    pub topics: Vec<Topic>,
}

/// Unordered candidate pair, canonicalized by document order of its mentions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventPair {
    pub first: String,
    pub second: String,
    pub label: Label,
    pub scope: Scope,
}

/// An event pair together with the document it came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidatePair {
    pub doc_id: String,
    pub pair: EventPair,
}

/// Cross-validation plan over unit ids (topic ids or doc ids).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub dev_units: Vec<String>,
    pub folds: Vec<Fold>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train_units: Vec<String>,
    pub test_units: Vec<String>,
}

/// On-disk shape of one JSONL line.
#[derive(Debug, Deserialize, Serialize)]
struct DocumentRecord {
    doc_id: String,
    topic_id: String,
    sentences: Vec<Vec<String>>,
    mentions: Vec<MentionRecord>,
    causal_links: Vec<(String, String)>,
}

#[derive(Debug, Deserialize, Serialize)]
struct MentionRecord {
    mention_id: String,
    sentence_index: usize,
    start: usize,
    end: usize,
}

impl Document {
    pub fn mention(&self, id: &str) -> Option<&EventMention> {
        self.mentions.iter().find(|m| m.mention_id == id)
    }

    /// Mentions sorted by document order (sentence index, then span start, then id).
    pub fn mentions_in_document_order(&self) -> Vec<&EventMention> {
        let mut ms: Vec<&EventMention> = self.mentions.iter().collect();
        ms.sort_by(|a, b| {
            (a.sentence_index, a.start, &a.mention_id)
                .cmp(&(b.sentence_index, b.start, &b.mention_id))
        });
        ms
    }

    fn validate(&mut self) -> Result<()> {
        for (i, s) in self.sentences.iter().enumerate() {
            if s.index != i {
                return Err(Error::Integrity(format!(
                    "doc {}: sentence indices not contiguous at {}",
                    self.doc_id, i
                )));
            }
            if s.words.is_empty() {
                return Err(Error::Integrity(format!(
                    "doc {}: sentence {} has no words",
                    self.doc_id, i
                )));
            }
        }
        let mut seen = HashSet::new();
        for m in &mut self.mentions {
            if !seen.insert(m.mention_id.clone()) {
                return Err(Error::Integrity(format!(
                    "doc {}: duplicate mention id {}",
                    self.doc_id, m.mention_id
                )));
            }
            let sent = self.sentences.get(m.sentence_index).ok_or_else(|| {
                Error::Integrity(format!(
                    "doc {}: mention {} references missing sentence {}",
                    self.doc_id, m.mention_id, m.sentence_index
                ))
            })?;
            if m.start >= m.end || m.end > sent.words.len() {
                return Err(Error::Integrity(format!(
                    "doc {}: mention {} span [{}, {}) out of bounds for sentence of length {}",
                    self.doc_id,
                    m.mention_id,
                    m.start,
                    m.end,
                    sent.words.len()
                )));
            }
            m.surface = sent.words[m.start..m.end].to_vec();
        }
        for (a, b) in &self.causal_links {
            if a == b {
                return Err(Error::Integrity(format!(
                    "doc {}: self-link on mention {}",
                    self.doc_id, a
                )));
            }
            for id in [a, b] {
                if !seen.contains(id) {
                    return Err(Error::Integrity(format!(
                        "doc {}: causal link references unknown mention {}",
                        self.doc_id, id
                    )));
                }
            }
        }
        Ok(())
    }
}

impl Corpus {
    /// Group validated documents into topics, canonically sorted.
    pub fn from_documents(name: impl Into<String>, mut docs: Vec<Document>) -> Result<Self> {
        let mut seen_docs = HashSet::new();
        for d in &mut docs {
            if !seen_docs.insert(d.doc_id.clone()) {
                return Err(Error::Integrity(format!("duplicate doc id {}", d.doc_id)));
            }
            d.validate()?;
        }
        let mut by_topic: BTreeMap<String, Vec<Document>> = BTreeMap::new();
        for d in docs {
            by_topic.entry(d.topic_id.clone()).or_default().push(d);
        }
        let topics = by_topic
            .into_iter()
            .map(|(topic_id, mut documents)| {
                documents.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
                Topic {
                    topic_id,
                    documents,
                }
            })
            .collect();
        Ok(Corpus {
            name: name.into(),
            schema_version: SCHEMA_VERSION.to_string(),
            topics,
        })
    }

    pub fn documents(&self) -> impl Iterator<Item = &Document> {
        self.topics.iter().flat_map(|t| t.documents.iter())
    }

    pub fn n_documents(&self) -> usize {
        self.topics.iter().map(|t| t.documents.len()).sum()
    }

    /// All words occurring in any sentence, deduplicated, sorted.
    pub fn vocabulary(&self) -> Vec<String> {
        let mut set = HashSet::new();
        for d in self.documents() {
            for s in &d.sentences {
                for w in &s.words {
                    set.insert(w.clone());
                }
            }
        }
        let mut v: Vec<String> = set.into_iter().collect();
        v.sort();
        v
    }
}

/// Load a JSONL corpus file, validating every document invariant.
pub fn load_corpus(path: impl AsRef<Path>, name: impl Into<String>) -> Result<Corpus> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let reader = std::io::BufReader::new(file);
    let mut docs = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path.display().to_string(), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DocumentRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        docs.push(Document {
            doc_id: rec.doc_id,
            topic_id: rec.topic_id,
            sentences: rec
                .sentences
                .into_iter()
                .enumerate()
                .map(|(index, words)| Sentence { index, words })
                .collect(),
            mentions: rec
                .mentions
                .into_iter()
                .map(|m| EventMention {
                    mention_id: m.mention_id,
                    sentence_index: m.sentence_index,
                    start: m.start,
                    end: m.end,
                    surface: Vec::new(),
                })
                .collect(),
            causal_links: rec.causal_links,
        });
    }
    Corpus::from_documents(name, docs)
}

/// Write a corpus back out as JSONL, one document per line.
pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for d in corpus.documents() {
        let rec = DocumentRecord {
            doc_id: d.doc_id.clone(),
            topic_id: d.topic_id.clone(),
            sentences: d.sentences.iter().map(|s| s.words.clone()).collect(),
            mentions: d
                .mentions
                .iter()
                .map(|m| MentionRecord {
                    mention_id: m.mention_id.clone(),
                    sentence_index: m.sentence_index,
                    start: m.start,
                    end: m.end,
                })
                .collect(),
            causal_links: d.causal_links.clone(),
        };
        out.push_str(&serde_json::to_string(&rec)?);
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// All unordered mention pairs of a document, canonicalized by document order.
///
/// A pair is `Causal` iff it appears in `causal_links` in either direction.
pub fn enumerate_pairs(doc: &Document) -> Vec<EventPair> {
    let links: HashSet<(&str, &str)> = doc
        .causal_links
        .iter()
        .flat_map(|(a, b)| [(a.as_str(), b.as_str()), (b.as_str(), a.as_str())])
        .collect();
    let ordered = doc.mentions_in_document_order();
    let mut pairs = Vec::new();
    for i in 0..ordered.len() {
        for j in (i + 1)..ordered.len() {
            let (a, b) = (ordered[i], ordered[j]);
            let label = if links.contains(&(a.mention_id.as_str(), b.mention_id.as_str())) {
                Label::Causal
            } else {
                Label::None
            };
            let scope = if a.sentence_index == b.sentence_index {
                Scope::Intra
            } else {
                Scope::Cross
            };
            pairs.push(EventPair {
                first: a.mention_id.clone(),
                second: b.mention_id.clone(),
                label,
                scope,
            });
        }
    }
    pairs
}

/// Enumerate candidate pairs over the whole corpus.
pub fn enumerate_corpus_pairs(corpus: &Corpus) -> Vec<CandidatePair> {
    corpus
        .documents()
        .flat_map(|d| {
            enumerate_pairs(d).into_iter().map(|pair| CandidatePair {
                doc_id: d.doc_id.clone(),
                pair,
            })
        })
        .collect()
}

fn chunk_units(units: &[String], k: usize) -> Vec<Vec<String>> {
    let n = units.len();
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut at = 0;
    for i in 0..k {
        let size = base + usize::from(i < extra);
        folds.push(units[at..at + size].to_vec());
        at += size;
    }
    folds
}

fn plan_from_chunks(dev: Vec<String>, units: &[String], k: usize) -> FoldPlan {
    let chunks = chunk_units(units, k);
    let folds = chunks
        .iter()
        .map(|test| Fold {
            train_units: units.iter().filter(|u| !test.contains(u)).cloned().collect(),
            test_units: test.clone(),
        })
        .collect();
    FoldPlan {
        dev_units: dev,
        folds,
    }
}

/// ESC-style plan: last two topics (canonical order) as dev, remaining topics
/// split into 5 folds of equal size (±1).
pub fn plan_folds_esc(corpus: &Corpus) -> Result<FoldPlan> {
    let topic_ids: Vec<String> = corpus.topics.iter().map(|t| t.topic_id.clone()).collect();
    if topic_ids.len() < 7 {
        return Err(Error::Config(format!(
            "ESC fold plan needs at least 7 topics, got {}",
            topic_ids.len()
        )));
    }
    let split = topic_ids.len() - 2;
    let dev = topic_ids[split..].to_vec();
    Ok(plan_from_chunks(dev, &topic_ids[..split], 5))
}

/// CTB-style plan: documents split into 10 folds (±1), no dev set.
pub fn plan_folds_ctb(corpus: &Corpus) -> Result<FoldPlan> {
    let mut doc_ids: Vec<String> = corpus.documents().map(|d| d.doc_id.clone()).collect();
    doc_ids.sort();
    if doc_ids.len() < 10 {
        return Err(Error::Config(format!(
            "CTB fold plan needs at least 10 documents, got {}",
            doc_ids.len()
        )));
    }
    Ok(plan_from_chunks(Vec::new(), &doc_ids, 10))
}

/// Anything carrying a gold label; lets sampling work on both pair shapes.
pub trait Labeled {
    fn label(&self) -> Label;
}

impl Labeled for EventPair {
    fn label(&self) -> Label {
        self.label
    }
}

impl Labeled for CandidatePair {
    fn label(&self) -> Label {
        self.pair.label
    }
}

/// Keep every `Causal` pair; keep each `None` pair independently with
/// probability `p` under a seeded generator. Order is preserved.
pub fn negative_sample<T: Labeled + Clone>(pairs: &[T], p: f64, seed: u64) -> Result<Vec<T>> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Contract(format!(
            "negative sampling probability {p} outside [0, 1]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(pairs
        .iter()
        .filter(|pair| match pair.label() {
            Label::Causal => true,
            Label::None => rng.gen::<f64>() < p,
        })
        .cloned()
        .collect())
}

/// Subset of pairs matching the requested scope.
pub fn filter_scope(pairs: &[EventPair], scope: ScopeFilter) -> Vec<EventPair> {
    pairs
        .iter()
        .filter(|p| scope_matches(p.scope, scope))
        .cloned()
        .collect()
}

pub fn scope_matches(s: Scope, f: ScopeFilter) -> bool {
    match f {
        ScopeFilter::All => true,
        ScopeFilter::Intra => s == Scope::Intra,
        ScopeFilter::Cross => s == Scope::Cross,
    }
}

/// Corpus-level counts for the stats report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub name: String,
    pub n_topics: usize,
    pub n_documents: usize,
    pub n_mentions: usize,
    pub n_pairs: usize,
    pub n_causal: usize,
    pub n_intra_causal: usize,
    pub n_cross_causal: usize,
    pub n_intra_pairs: usize,
    pub n_cross_pairs: usize,
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusStats {
    let mut stats = CorpusStats {
        name: corpus.name.clone(),
        n_topics: corpus.topics.len(),
        n_documents: corpus.n_documents(),
        n_mentions: 0,
        n_pairs: 0,
        n_causal: 0,
        n_intra_causal: 0,
        n_cross_causal: 0,
        n_intra_pairs: 0,
        n_cross_pairs: 0,
    };
    for d in corpus.documents() {
        stats.n_mentions += d.mentions.len();
        for p in enumerate_pairs(d) {
            stats.n_pairs += 1;
            match p.scope {
                Scope::Intra => stats.n_intra_pairs += 1,
                Scope::Cross => stats.n_cross_pairs += 1,
            }
            if p.label == Label::Causal {
                stats.n_causal += 1;
                match p.scope {
                    Scope::Intra => stats.n_intra_causal += 1,
                    Scope::Cross => stats.n_cross_causal += 1,
                }
            }
        }
    }
    stats
}

/// Gold labels for a set of pairs, keyed by (doc, first, second).
pub fn gold_map(pairs: &[CandidatePair]) -> HashMap<(String, String, String), Label> {
    pairs
        .iter()
        .map(|cp| {
            (
                (
                    cp.doc_id.clone(),
                    cp.pair.first.clone(),
                    cp.pair.second.clone(),
                ),
                cp.pair.label,
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, topic: &str) -> Document {
        // "the storm caused flooding" with mentions on storm/flooding,
        // plus a second sentence with one more mention.
        Document {
            doc_id: id.to_string(),
            topic_id: topic.to_string(),
            sentences: vec![
                Sentence {
                    index: 0,
                    words: ["the", "storm", "caused", "flooding"]
                        .map(String::from)
                        .to_vec(),
                },
                Sentence {
                    index: 1,
                    words: ["a", "crane", "collapsed"].map(String::from).to_vec(),
                },
            ],
            mentions: vec![
                EventMention {
                    mention_id: "m1".into(),
                    sentence_index: 0,
                    start: 1,
                    end: 2,
                    surface: vec![],
                },
                EventMention {
                    mention_id: "m2".into(),
                    sentence_index: 0,
                    start: 3,
                    end: 4,
                    surface: vec![],
                },
                EventMention {
                    mention_id: "m3".into(),
                    sentence_index: 1,
                    start: 2,
                    end: 3,
                    surface: vec![],
                },
            ],
            causal_links: vec![("m1".into(), "m2".into())],
        }
    }

    fn corpus_with_topics(n: usize) -> Corpus {
        let docs = (0..n)
            .map(|i| doc(&format!("d{i:02}"), &format!("t{i:02}")))
            .collect();
        Corpus::from_documents("test", docs).unwrap()
    }

    #[test]
    fn three_mentions_one_link_gives_three_pairs_one_causal() {
        let d = Corpus::from_documents("t", vec![doc("d1", "t1")])
            .unwrap()
            .documents()
            .next()
            .unwrap()
            .clone();
        let pairs = enumerate_pairs(&d);
        assert_eq!(pairs.len(), 3);
        assert_eq!(
            pairs.iter().filter(|p| p.label == Label::Causal).count(),
            1
        );
        let intra = pairs.iter().find(|p| p.first == "m1" && p.second == "m2").unwrap();
        assert_eq!(intra.scope, Scope::Intra);
        assert_eq!(intra.label, Label::Causal);
    }

    #[test]
    fn link_direction_does_not_matter() {
        let mut d = doc("d1", "t1");
        d.causal_links = vec![("m2".into(), "m1".into())];
        let c = Corpus::from_documents("t", vec![d]).unwrap();
        let d = c.documents().next().unwrap();
        let pairs = enumerate_pairs(d);
        let p = pairs.iter().find(|p| p.label == Label::Causal).unwrap();
        // canonical order keeps m1 first
        assert_eq!((p.first.as_str(), p.second.as_str()), ("m1", "m2"));
    }

    #[test]
    fn dangling_link_is_integrity_error() {
        let mut d = doc("d1", "t1");
        d.causal_links.push(("m1".into(), "ghost".into()));
        let err = Corpus::from_documents("t", vec![d]).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)));
    }

    #[test]
    fn self_link_rejected() {
        let mut d = doc("d1", "t1");
        d.causal_links.push(("m1".into(), "m1".into()));
        assert!(Corpus::from_documents("t", vec![d]).is_err());
    }

    #[test]
    fn surface_filled_from_span() {
        let c = Corpus::from_documents("t", vec![doc("d1", "t1")]).unwrap();
        let d = c.documents().next().unwrap();
        assert_eq!(d.mention("m1").unwrap().surface, vec!["storm"]);
        assert_eq!(d.mention("m3").unwrap().surface, vec!["collapsed"]);
    }

    #[test]
    fn esc_plan_22_topics() {
        let c = corpus_with_topics(22);
        let plan = plan_folds_esc(&c).unwrap();
        assert_eq!(plan.dev_units.len(), 2);
        assert_eq!(plan.dev_units, vec!["t20", "t21"]);
        assert_eq!(plan.folds.len(), 5);
        for f in &plan.folds {
            assert_eq!(f.test_units.len(), 4);
            assert_eq!(f.train_units.len(), 16);
        }
        // disjoint and exhaustive over non-dev units
        let mut all: Vec<&String> = plan.folds.iter().flat_map(|f| &f.test_units).collect();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 20);
    }

    #[test]
    fn esc_plan_minimum_seven_topics() {
        let c = corpus_with_topics(7);
        let plan = plan_folds_esc(&c).unwrap();
        assert_eq!(plan.dev_units.len(), 2);
        assert!(plan.folds.iter().all(|f| f.test_units.len() == 1));
        assert!(plan_folds_esc(&corpus_with_topics(6)).is_err());
    }

    #[test]
    fn esc_plan_invariant_under_input_permutation() {
        let mut docs: Vec<Document> = (0..10)
            .map(|i| doc(&format!("d{i:02}"), &format!("t{i:02}")))
            .collect();
        let plan_a = plan_folds_esc(&Corpus::from_documents("a", docs.clone()).unwrap()).unwrap();
        docs.reverse();
        let plan_b = plan_folds_esc(&Corpus::from_documents("b", docs).unwrap()).unwrap();
        assert_eq!(plan_a, plan_b);
    }

    #[test]
    fn ctb_plan_sizes() {
        let docs = (0..184).map(|i| doc(&format!("d{i:03}"), "t0")).collect();
        let c = Corpus::from_documents("ctb", docs).unwrap();
        let plan = plan_folds_ctb(&c).unwrap();
        assert_eq!(plan.folds.len(), 10);
        assert!(plan.dev_units.is_empty());
        let sizes: Vec<usize> = plan.folds.iter().map(|f| f.test_units.len()).collect();
        assert_eq!(sizes.iter().filter(|&&s| s == 19).count(), 4);
        assert_eq!(sizes.iter().filter(|&&s| s == 18).count(), 6);
        assert_eq!(sizes.iter().sum::<usize>(), 184);
    }

    #[test]
    fn ctb_plan_minimum() {
        let docs = (0..10).map(|i| doc(&format!("d{i}"), "t0")).collect();
        let c = Corpus::from_documents("ctb", docs).unwrap();
        let plan = plan_folds_ctb(&c).unwrap();
        assert!(plan.folds.iter().all(|f| f.test_units.len() == 1));
        let docs9 = (0..9).map(|i| doc(&format!("d{i}"), "t0")).collect();
        assert!(plan_folds_ctb(&Corpus::from_documents("c", docs9).unwrap()).is_err());
    }

    #[test]
    fn negative_sample_extremes() {
        let c = corpus_with_topics(1);
        let pairs = enumerate_pairs(c.documents().next().unwrap());
        let all = negative_sample(&pairs, 1.0, 7).unwrap();
        assert_eq!(all, pairs);
        let only_causal = negative_sample(&pairs, 0.0, 7).unwrap();
        assert!(only_causal.iter().all(|p| p.label == Label::Causal));
        assert_eq!(only_causal.len(), 1);
    }

    #[test]
    fn negative_sample_reproducible() {
        let pairs: Vec<EventPair> = (0..500)
            .map(|i| EventPair {
                first: format!("a{i}"),
                second: format!("b{i}"),
                label: if i % 7 == 0 { Label::Causal } else { Label::None },
                scope: Scope::Intra,
            })
            .collect();
        let s1 = negative_sample(&pairs, 0.3, 42).unwrap();
        let s2 = negative_sample(&pairs, 0.3, 42).unwrap();
        assert_eq!(s1, s2);
        assert!(negative_sample(&pairs, 1.5, 42).is_err());
    }

    #[test]
    fn negative_sample_binomial_oracle() {
        // 10,000 None pairs at p=0.2: expect 2,000 retained, sigma = 40.
        let pairs: Vec<EventPair> = (0..10_000)
            .map(|i| EventPair {
                first: format!("a{i}"),
                second: format!("b{i}"),
                label: Label::None,
                scope: Scope::Cross,
            })
            .collect();
        let kept = negative_sample(&pairs, 0.2, 123).unwrap().len() as f64;
        assert!((kept - 2000.0).abs() <= 3.0 * 40.0, "kept {kept}");
    }

    #[test]
    fn filter_scope_behaviour() {
        let c = corpus_with_topics(1);
        let pairs = enumerate_pairs(c.documents().next().unwrap());
        assert_eq!(filter_scope(&pairs, ScopeFilter::All), pairs);
        let intra = filter_scope(&pairs, ScopeFilter::Intra);
        assert!(intra.iter().all(|p| p.scope == Scope::Intra));
        assert_eq!(intra.len(), 1);
        assert_eq!(filter_scope(&pairs, ScopeFilter::Cross).len(), 2);
    }

    #[test]
    fn jsonl_round_trip() {
        let c = corpus_with_topics(2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mini.jsonl");
        save_corpus(&c, &path).unwrap();
        let loaded = load_corpus(&path, "test").unwrap();
        assert_eq!(loaded.n_documents(), 2);
        assert_eq!(corpus_stats(&loaded), corpus_stats(&c));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{\"doc_id\": \"d\"\n").unwrap();
        match load_corpus(&path, "x") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
