//! Filter-bubble and benefit metrics per agent, and their aggregation over
//! the whole community and over degree strata.

use std::collections::VecDeque;
use std::fmt;

use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::network::{AgentId, StratumAssignment};
use crate::topics::TermId;

/// Metrics in the order they are written to result files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Metric {
    #[serde(rename = "ASC")]
    Asc,
    #[serde(rename = "ASC_h")]
    AscWindow,
    #[serde(rename = "AV")]
    Av,
    #[serde(rename = "AV_h")]
    AvWindow,
    #[serde(rename = "CR")]
    CoreRatio,
    #[serde(rename = "precision")]
    Precision,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Asc,
        Metric::AscWindow,
        Metric::Av,
        Metric::AvWindow,
        Metric::CoreRatio,
        Metric::Precision,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Asc => "ASC",
            Metric::AscWindow => "ASC_h",
            Metric::Av => "AV",
            Metric::AvWindow => "AV_h",
            Metric::CoreRatio => "CR",
            Metric::Precision => "precision",
        }
    }

    pub fn parse(s: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.as_str() == s)
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scope {
    Global,
    Stratum(u8),
}

impl Scope {
    pub fn parse(s: &str) -> Option<Scope> {
        if s == "global" {
            return Some(Scope::Global);
        }
        s.strip_prefix("stratum")?.parse().ok().map(Scope::Stratum)
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Global => f.write_str("global"),
            Scope::Stratum(s) => write!(f, "stratum{s}"),
        }
    }
}

/// One aggregated observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRecord {
    pub p_core: f64,
    pub p_peripheral: f64,
    pub seed: u64,
    pub iteration: u32,
    pub scope: Scope,
    pub metric: Metric,
    pub value: f64,
}

/// All six metrics for one agent in one iteration.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AgentMetrics([f64; 6]);

impl AgentMetrics {
    pub fn get(&self, metric: Metric) -> f64 {
        self.0[metric.index()]
    }

    pub fn set(&mut self, metric: Metric, value: f64) {
        self.0[metric.index()] = value;
    }
}

/// Sliding window over the last `h` iterations of what one agent was shown.
#[derive(Debug, Clone)]
pub struct ExposureHistory {
    window: usize,
    entries: VecDeque<(Vec<AgentId>, Vec<TermId>)>,
    /// How many entries in the window contain each author / term.
    author_counts: FxHashMap<AgentId, u32>,
    term_counts: FxHashMap<TermId, u32>,
}

impl ExposureHistory {
    pub fn new(window: usize) -> Self {
        assert!(window >= 1, "window must hold at least one iteration");
        ExposureHistory {
            window,
            entries: VecDeque::with_capacity(window),
            author_counts: FxHashMap::default(),
            term_counts: FxHashMap::default(),
        }
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Records one iteration's authors and terms, evicting the oldest entry
    /// once the window is full. Duplicates within an entry are ignored.
    pub fn push(&mut self, mut authors: Vec<AgentId>, mut terms: Vec<TermId>) {
        if self.entries.len() == self.window {
            let (old_authors, old_terms) = self.entries.pop_front().expect("window is full");
            release(&mut self.author_counts, &old_authors);
            release(&mut self.term_counts, &old_terms);
        }
        for ids in [&mut authors, &mut terms] {
            ids.sort_unstable();
            ids.dedup();
        }
        acquire(&mut self.author_counts, &authors);
        acquire(&mut self.term_counts, &terms);
        self.entries.push_back((authors, terms));
    }

    pub fn distinct_authors(&self) -> usize {
        self.author_counts.len()
    }

    pub fn distinct_terms(&self) -> usize {
        self.term_counts.len()
    }
}

fn acquire(counts: &mut FxHashMap<u32, u32>, ids: &[u32]) {
    for &id in ids {
        *counts.entry(id).or_insert(0) += 1;
    }
}

fn release(counts: &mut FxHashMap<u32, u32>, ids: &[u32]) {
    for id in ids {
        let c = counts.get_mut(id).expect("evicted id was counted");
        *c -= 1;
        if *c == 0 {
            counts.remove(id);
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Fraction of friends with at least one shown message.
pub fn active_social_context(shown_authors: &[AgentId], friend_count: usize) -> f64 {
    ratio(distinct_count(shown_authors), friend_count)
}

pub fn windowed_asc(history: &ExposureHistory, friend_count: usize) -> f64 {
    ratio(history.distinct_authors(), friend_count)
}

/// Fraction of the vocabulary appearing in the shown messages.
pub fn active_vocabulary(shown_terms: &[TermId], vocabulary_size: usize) -> f64 {
    ratio(distinct_count(shown_terms), vocabulary_size)
}

pub fn windowed_av(history: &ExposureHistory, vocabulary_size: usize) -> f64 {
    ratio(history.distinct_terms(), vocabulary_size)
}

/// Share of shown messages labelled core; 0 for an empty list.
pub fn core_ratio(core_labels: &[bool]) -> f64 {
    ratio(core_labels.iter().filter(|&&c| c).count(), core_labels.len())
}

/// Share of shown messages rated relevant; 0 for an empty list.
pub fn precision(relevant_labels: &[bool]) -> f64 {
    ratio(relevant_labels.iter().filter(|&&r| r).count(), relevant_labels.len())
}

fn distinct_count(ids: &[u32]) -> usize {
    let mut v = ids.to_vec();
    v.sort_unstable();
    v.dedup();
    v.len()
}

/// Unweighted means over all agents and over each stratum. An empty stratum
/// reports 0.
pub fn aggregate(values: &[f64], strata: &StratumAssignment) -> Vec<(Scope, f64)> {
    let n = strata.num_strata();
    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for (&v, &s) in values.iter().zip(strata.as_slice()) {
        sums[s as usize] += v;
        counts[s as usize] += 1;
    }
    let global = if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    };
    let mut out = Vec::with_capacity(n + 1);
    out.push((Scope::Global, global));
    for s in 0..n {
        let mean = if counts[s] == 0 {
            0.0
        } else {
            sums[s] / counts[s] as f64
        };
        out.push((Scope::Stratum(s as u8), mean));
    }
    out
}
