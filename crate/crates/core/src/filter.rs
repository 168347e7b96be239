//! Per-agent personalisation filters.
//!
//! A filter ranks an inbox by estimated relevance, keeps the top `cutoff`
//! messages, and updates its relevance counters from the agent's ratings.

use std::cmp::Ordering;
use std::collections::HashSet;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::topics::{Message, MessageId, TermId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FilterKind {
    /// Relevance feedback on individual terms.
    #[default]
    Content,
    /// Relevance feedback on message authors.
    Author,
    /// No personalisation: keeps the first `cutoff` messages by id.
    Passthrough,
}

impl FilterKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FilterKind::Content => "content",
            FilterKind::Author => "author",
            FilterKind::Passthrough => "passthrough",
        }
    }
}

impl std::fmt::Display for FilterKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FilterKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "content" => Ok(FilterKind::Content),
            "author" => Ok(FilterKind::Author),
            "passthrough" => Ok(FilterKind::Passthrough),
            other => Err(Error::invalid(format!("unknown filter kind {other:?}"))),
        }
    }
}

/// Relevant / not-relevant counts for one signal (a term or an author).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counts {
    pub relevant: u32,
    pub not_relevant: u32,
}

impl Counts {
    fn probability(self, smoothing: f64) -> f64 {
        let r = self.relevant as f64;
        let n = self.not_relevant as f64;
        (r + smoothing) / (r + n + 2.0 * smoothing)
    }
}

#[derive(Debug, Clone)]
pub struct FilterState {
    kind: FilterKind,
    counts: FxHashMap<u32, Counts>,
    smoothing: f64,
    cutoff: usize,
}

impl FilterState {
    pub fn new(kind: FilterKind, smoothing: f64, cutoff: usize) -> Result<Self> {
        if !(smoothing.is_finite() && smoothing > 0.0) {
            return Err(Error::invalid(format!(
                "smoothing constant must be positive, got {smoothing}"
            )));
        }
        if cutoff == 0 {
            return Err(Error::invalid("cutoff must be at least 1"));
        }
        Ok(FilterState {
            kind,
            counts: FxHashMap::default(),
            smoothing,
            cutoff,
        })
    }

    pub fn kind(&self) -> FilterKind {
        self.kind
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }

    /// Counters for a term (content filter) or author (author filter).
    pub fn counts(&self, key: u32) -> Counts {
        self.counts.get(&key).copied().unwrap_or_default()
    }

    /// Overwrites the counters for one key.
    pub fn set_counts(&mut self, key: u32, counts: Counts) {
        self.counts.insert(key, counts);
    }

    /// Smoothed estimate that a message containing `term` is relevant.
    pub fn term_relevance_probability(&self, term: TermId) -> f64 {
        self.counts(term).probability(self.smoothing)
    }

    /// Smoothed estimate that a message by `author` is relevant.
    pub fn author_relevance_probability(&self, author: u32) -> f64 {
        self.counts(author).probability(self.smoothing)
    }

    /// Ranking score. Content: sum of log term probabilities over distinct
    /// terms. Author: the author's relevance probability. Passthrough: 0.
    pub fn score(&self, msg: &Message) -> f64 {
        match self.kind {
            FilterKind::Content => distinct_terms(&msg.terms)
                .iter()
                .map(|&t| self.term_relevance_probability(t).ln())
                .sum(),
            FilterKind::Author => self.author_relevance_probability(msg.author),
            FilterKind::Passthrough => 0.0,
        }
    }

    /// Ranks `inbox` by score (ties by ascending id) and keeps the top `cutoff`.
    pub fn filter<'m>(&self, inbox: &[&'m Message]) -> Vec<&'m Message> {
        if self.kind == FilterKind::Passthrough {
            let mut shown = inbox.to_vec();
            shown.sort_unstable_by_key(|m| m.id);
            shown.truncate(self.cutoff);
            return shown;
        }
        let mut scored: Vec<(f64, &'m Message)> = inbox.iter().map(|&m| (self.score(m), m)).collect();
        scored.sort_unstable_by(|a, b| rank_order(a.0, a.1.id, b.0, b.1.id));
        scored.truncate(self.cutoff);
        scored.into_iter().map(|(_, m)| m).collect()
    }

    /// Learns from the shown messages, given the ids of those rated relevant.
    pub fn learn_interests(&mut self, shown: &[&Message], relevant: &[MessageId]) -> Result<()> {
        let shown_ids: HashSet<MessageId> = shown.iter().map(|m| m.id).collect();
        if let Some(stray) = relevant.iter().find(|id| !shown_ids.contains(id)) {
            return Err(Error::ContractViolation(format!(
                "message {:#x} rated relevant but was not shown",
                stray.0
            )));
        }
        let relevant: HashSet<MessageId> = relevant.iter().copied().collect();
        let labels: Vec<bool> = shown.iter().map(|m| relevant.contains(&m.id)).collect();
        self.learn_rated(shown, &labels);
        Ok(())
    }

    /// Learns from shown messages paired with their relevance labels.
    pub fn learn_rated(&mut self, shown: &[&Message], relevant: &[bool]) {
        debug_assert_eq!(shown.len(), relevant.len());
        match self.kind {
            FilterKind::Content => {
                for (msg, &rel) in shown.iter().zip(relevant) {
                    for t in distinct_terms(&msg.terms) {
                        bump(self.counts.entry(t).or_default(), rel);
                    }
                }
            }
            FilterKind::Author => {
                for (msg, &rel) in shown.iter().zip(relevant) {
                    bump(self.counts.entry(msg.author).or_default(), rel);
                }
            }
            FilterKind::Passthrough => {}
        }
    }
}

fn bump(c: &mut Counts, relevant: bool) {
    if relevant {
        c.relevant += 1;
    } else {
        c.not_relevant += 1;
    }
}

/// Descending score, then ascending id.
fn rank_order(score_a: f64, id_a: MessageId, score_b: f64, id_b: MessageId) -> Ordering {
    score_b.total_cmp(&score_a).then(id_a.cmp(&id_b))
}

/// A repeated term counts once.
pub fn distinct_terms(terms: &[TermId]) -> Vec<TermId> {
    let mut v = terms.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}
