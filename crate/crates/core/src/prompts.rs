//! Template prompt corpora: `<subject> <verb> <preposition> <object>`.
//!
//! Corpora enumerate every combination of a [`WordList`] in canonical order
//! (subject-major, object-minor). Concept datasets keep the records whose
//! slot holds the concept word; evaluation sets draw a fixed number of
//! records from every other word of that slot.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_WORDLIST: &str = include_str!("../data/wordlist.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateSlot {
    Subject,
    Verb,
    Preposition,
    Object,
}

impl TemplateSlot {
    pub const ALL: [TemplateSlot; 4] =
        [TemplateSlot::Subject, TemplateSlot::Verb, TemplateSlot::Preposition, TemplateSlot::Object];

    pub fn position(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateSlot::Subject => "subject",
            TemplateSlot::Verb => "verb",
            TemplateSlot::Preposition => "preposition",
            TemplateSlot::Object => "object",
        }
    }
}

impl fmt::Display for TemplateSlot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateSlot {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TemplateSlot::ALL
            .into_iter()
            .find(|slot| slot.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown template slot '{s}'")))
    }
}

/// Ordered vocabulary for each template slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordList {
    subject: Vec<String>,
    verb: Vec<String>,
    preposition: Vec<String>,
    object: Vec<String>,
}

impl WordList {
    pub fn new(subject: Vec<String>, verb: Vec<String>, preposition: Vec<String>, object: Vec<String>) -> Result<Self> {
        let list = Self { subject, verb, preposition, object };
        list.validate()?;
        Ok(list)
    }

    /// The 9 × 21 × 8 × 21 vocabulary shipped with the crate.
    pub fn default_table() -> Self {
        Self::from_json(DEFAULT_WORDLIST).expect("bundled word list is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let list: Self = serde_json::from_str(text).map_err(|e| Error::Config(format!("bad word list: {e}")))?;
        list.validate()?;
        Ok(list)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("word list serializes");
        s.push('\n');
        s
    }

    pub fn words(&self, slot: TemplateSlot) -> &[String] {
        match slot {
            TemplateSlot::Subject => &self.subject,
            TemplateSlot::Verb => &self.verb,
            TemplateSlot::Preposition => &self.preposition,
            TemplateSlot::Object => &self.object,
        }
    }

    pub fn sizes(&self) -> [usize; 4] {
        TemplateSlot::ALL.map(|s| self.words(s).len())
    }

    pub fn corpus_size(&self) -> usize {
        self.sizes().iter().product()
    }

    pub fn index_of(&self, slot: TemplateSlot, word: &str) -> Option<usize> {
        self.words(slot).iter().position(|w| w == word)
    }

    /// Position of a word combination in canonical enumeration order.
    pub fn canonical_index(&self, indices: [usize; 4]) -> usize {
        let sizes = self.sizes();
        indices.iter().zip(sizes).fold(0, |acc, (&i, n)| acc * n + i)
    }

    fn validate(&self) -> Result<()> {
        for slot in TemplateSlot::ALL {
            let words = self.words(slot);
            let mut seen = HashSet::new();
            for w in words {
                if w.is_empty() || w.chars().any(char::is_whitespace) {
                    return Err(Error::Config(format!("{slot} word {w:?} must be a single token")));
                }
                if !seen.insert(w) {
                    return Err(Error::Config(format!("duplicate {slot} word '{w}'")));
                }
            }
        }
        Ok(())
    }

    fn require_nonempty(&self) -> Result<()> {
        match TemplateSlot::ALL.into_iter().find(|s| self.words(*s).is_empty()) {
            Some(slot) => Err(Error::Config(format!("{slot} word list is empty"))),
            None => Ok(()),
        }
    }
}

/// A concept is one word in one slot, e.g. `subject=cat`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConceptSpec {
    pub slot: TemplateSlot,
    pub word: String,
}

impl ConceptSpec {
    pub fn new(slot: TemplateSlot, word: impl Into<String>) -> Self {
        Self { slot, word: word.into() }
    }

    fn word_index(&self, words: &WordList) -> Result<usize> {
        words
            .index_of(self.slot, &self.word)
            .ok_or_else(|| Error::Config(format!("'{}' is not in the {} word list", self.word, self.slot)))
    }
}

impl fmt::Display for ConceptSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.slot, self.word)
    }
}

impl FromStr for ConceptSpec {
    type Err = Error;

    /// Parses `slot=word`.
    fn from_str(s: &str) -> Result<Self> {
        let (slot, word) =
            s.split_once('=').ok_or_else(|| Error::Config(format!("concept '{s}' is not of the form slot=word")))?;
        if word.is_empty() {
            return Err(Error::Config(format!("concept '{s}' has an empty word")));
        }
        Ok(Self::new(slot.parse()?, word))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptRecord {
    pub text: String,
    /// Words in slot order.
    pub slots: [String; 4],
    /// Word indices into the word list, in slot order.
    pub word_indices: [usize; 4],
    /// Position in the canonical enumeration of the full corpus.
    pub index: usize,
}

impl PromptRecord {
    fn from_indices(words: &WordList, word_indices: [usize; 4]) -> Self {
        let slots = TemplateSlot::ALL.map(|s| words.words(s)[word_indices[s.position()]].clone());
        let text = slots.join(" ");
        Self { text, slots, word_indices, index: words.canonical_index(word_indices) }
    }

    pub fn word(&self, slot: TemplateSlot) -> &str {
        &self.slots[slot.position()]
    }
}

/// Prompts together with the vocabulary they were drawn from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptCorpus {
    words: WordList,
    records: Vec<PromptRecord>,
}

impl PromptCorpus {
    pub fn words(&self) -> &WordList {
        &self.words
    }

    pub fn records(&self) -> &[PromptRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// One prompt per line, LF-terminated.
    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.records.len() * 32);
        for r in &self.records {
            out.push_str(&r.text);
            out.push('\n');
        }
        out
    }

    pub fn write_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Every combination of the word lists, in canonical order.
pub fn generate_all(words: &WordList) -> Result<PromptCorpus> {
    words.require_nonempty()?;
    let [ns, nv, np, no] = words.sizes();
    let mut records = Vec::with_capacity(words.corpus_size());
    for s in 0..ns {
        for v in 0..nv {
            for p in 0..np {
                for o in 0..no {
                    records.push(PromptRecord::from_indices(words, [s, v, p, o]));
                }
            }
        }
    }
    Ok(PromptCorpus { words: words.clone(), records })
}

/// Records whose `concept.slot` holds `concept.word`, order preserved.
pub fn filter_concept(corpus: &PromptCorpus, concept: &ConceptSpec) -> Result<PromptCorpus> {
    let wanted = concept.word_index(&corpus.words)?;
    let pos = concept.slot.position();
    let records = corpus.records.iter().filter(|r| r.word_indices[pos] == wanted).cloned().collect();
    Ok(PromptCorpus { words: corpus.words.clone(), records })
}

/// Draws `per_category` records, without replacement, from every other word
/// of the concept's slot. Categories follow word-list order and records within
/// a category keep corpus order.
pub fn evaluation_set(
    corpus: &PromptCorpus,
    concept: &ConceptSpec,
    per_category: usize,
    seed: u64,
) -> Result<PromptCorpus> {
    let target = concept.word_index(&corpus.words)?;
    let pos = concept.slot.position();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    for (w, word) in corpus.words.words(concept.slot).iter().enumerate() {
        if w == target {
            continue;
        }
        let category: Vec<&PromptRecord> = corpus.records.iter().filter(|r| r.word_indices[pos] == w).collect();
        if per_category > category.len() {
            return Err(Error::Config(format!(
                "per_category {per_category} exceeds the {} prompts with {}={word}",
                category.len(),
                concept.slot
            )));
        }
        let mut picked = index::sample(&mut rng, category.len(), per_category).into_vec();
        picked.sort_unstable();
        records.extend(picked.into_iter().map(|i| category[i].clone()));
    }
    Ok(PromptCorpus { words: corpus.words.clone(), records })
}

/// The record with its concept slot replaced by the concept word.
pub fn replaced_prompt(record: &PromptRecord, concept: &ConceptSpec, words: &WordList) -> Result<PromptRecord> {
    let w = concept.word_index(words)?;
    let mut indices = record.word_indices;
    for slot in TemplateSlot::ALL {
        if words.words(slot).get(indices[slot.position()]).map(String::as_str) != Some(record.word(slot)) {
            return Err(Error::Config(format!("record '{}' does not match the word list", record.text)));
        }
    }
    indices[concept.slot.position()] = w;
    Ok(PromptRecord::from_indices(words, indices))
}
