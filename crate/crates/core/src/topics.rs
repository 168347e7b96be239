//! Generative topic model for agents and their messages, and the
//! core-versus-peripheral judgement an agent makes about a message.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::network::AgentId;
use crate::rng::{
    log_sum_exp, sample_dirichlet_with_logs, sample_verbosity, CategoricalTable, ProbabilityVector, RngStream,
};

pub type TermId = u32;

/// Mixture components this far (in nats) below the largest one add less than
/// 1e-15 relative to a log-sum-exp and are skipped.
const NEGLIGIBLE_GAP: f64 = -40.0;

/// The global topics: `k` term distributions over a synthetic vocabulary.
#[derive(Debug, Clone)]
pub struct TopicWorld {
    topics: Vec<ProbabilityVector>,
    samplers: Vec<CategoricalTable>,
    /// log φ laid out term-major: `log_phi[t * k + z]`.
    log_phi: Vec<f64>,
    vocabulary_size: usize,
}

impl TopicWorld {
    /// Builds a world from explicit topic rows. Zero entries are allowed.
    pub fn from_topics(topics: Vec<ProbabilityVector>) -> Result<Self> {
        let logs = topics
            .iter()
            .map(|t| t.as_slice().iter().map(|p| p.ln()).collect())
            .collect();
        Self::assemble(topics, logs)
    }

    fn assemble(topics: Vec<ProbabilityVector>, logs: Vec<Vec<f64>>) -> Result<Self> {
        let k = topics.len();
        if k < 2 {
            return Err(Error::invalid(format!("need at least 2 topics, got {k}")));
        }
        let vocabulary_size = topics[0].len();
        if topics.iter().any(|t| t.len() != vocabulary_size) {
            return Err(Error::invalid("topic rows differ in length"));
        }
        if vocabulary_size < k {
            return Err(Error::invalid(format!(
                "vocabulary size {vocabulary_size} is smaller than topic count {k}"
            )));
        }
        let mut log_phi = vec![0.0; k * vocabulary_size];
        for (z, row) in logs.iter().enumerate() {
            for (t, &l) in row.iter().enumerate() {
                log_phi[t * k + z] = l;
            }
        }
        let samplers = topics.iter().map(CategoricalTable::new).collect();
        Ok(TopicWorld {
            topics,
            samplers,
            log_phi,
            vocabulary_size,
        })
    }

    pub fn topic_count(&self) -> usize {
        self.topics.len()
    }

    pub fn vocabulary_size(&self) -> usize {
        self.vocabulary_size
    }

    pub fn topic(&self, z: usize) -> &ProbabilityVector {
        &self.topics[z]
    }

    pub fn topics(&self) -> &[ProbabilityVector] {
        &self.topics
    }

    /// `log φ[z][t]` for every topic `z`.
    fn term_logs(&self, t: TermId) -> &[f64] {
        let k = self.topics.len();
        &self.log_phi[t as usize * k..(t as usize + 1) * k]
    }

    fn sample_term(&self, rng: &mut RngStream, z: usize) -> TermId {
        self.samplers[z].sample(rng) as TermId
    }
}

/// Draws `k` topics, each from a symmetric Dirichlet(`beta`) over `V` terms.
///
/// Topic `z` uses the child stream `rng.child(&[z])`.
pub fn generate_topics(rng: &RngStream, k: usize, vocabulary_size: usize, beta: f64) -> Result<TopicWorld> {
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 topics, got {k}")));
    }
    if vocabulary_size < k {
        return Err(Error::invalid(format!(
            "vocabulary size {vocabulary_size} is smaller than topic count {k}"
        )));
    }
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::invalid(format!("beta must be positive, got {beta}")));
    }
    let prior = vec![beta; vocabulary_size];
    let draws: Vec<(ProbabilityVector, Vec<f64>)> = (0..k)
        .into_par_iter()
        .map(|z| sample_dirichlet_with_logs(&mut rng.child(&[z as u64]), &prior))
        .collect::<Result<_>>()?;
    let (topics, logs) = draws.into_iter().unzip();
    TopicWorld::assemble(topics, logs)
}

/// Whether a message falls in an agent's core or peripheral interests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Interest {
    Core,
    Peripheral,
}

/// One agent's interests and verbosity.
#[derive(Debug, Clone)]
pub struct AgentProfile {
    agent_id: AgentId,
    theta: ProbabilityVector,
    theta_sampler: CategoricalTable,
    verbosity: f64,
    core_topics: Vec<usize>,
    /// Renormalised log-weights over the core topics, heaviest first.
    core_weights: Vec<(usize, f64)>,
    /// Renormalised log-weights over the remaining topics, heaviest first.
    peripheral_weights: Vec<(usize, f64)>,
}

impl AgentProfile {
    /// Builds a profile from an explicit topic distribution.
    pub fn new(agent_id: AgentId, theta: ProbabilityVector, verbosity: f64, coverage: f64) -> Result<Self> {
        let logs: Vec<f64> = theta.as_slice().iter().map(|p| p.ln()).collect();
        Self::with_logs(agent_id, theta, logs, verbosity, coverage)
    }

    fn with_logs(
        agent_id: AgentId,
        theta: ProbabilityVector,
        log_theta: Vec<f64>,
        verbosity: f64,
        coverage: f64,
    ) -> Result<Self> {
        if !(coverage > 0.0 && coverage <= 1.0) {
            return Err(Error::invalid(format!(
                "core coverage must be in (0, 1], got {coverage}"
            )));
        }
        if !(verbosity.is_finite() && verbosity > 0.0) {
            return Err(Error::invalid(format!("verbosity must be positive, got {verbosity}")));
        }
        let core_topics = core_topic_prefix(&theta, &log_theta, coverage);
        let mut is_core = vec![false; theta.len()];
        for &z in &core_topics {
            is_core[z] = true;
        }
        let core_weights = renormalised(&log_theta, |z| is_core[z]);
        let peripheral_weights = renormalised(&log_theta, |z| !is_core[z]);
        Ok(AgentProfile {
            agent_id,
            theta_sampler: CategoricalTable::new(&theta),
            theta,
            verbosity,
            core_topics,
            core_weights,
            peripheral_weights,
        })
    }

    pub fn agent_id(&self) -> AgentId {
        self.agent_id
    }

    pub fn theta(&self) -> &ProbabilityVector {
        &self.theta
    }

    pub fn verbosity(&self) -> f64 {
        self.verbosity
    }

    /// Core topic indices, ascending.
    pub fn core_topics(&self) -> &[usize] {
        &self.core_topics
    }

    pub fn is_core_topic(&self, z: usize) -> bool {
        self.core_topics.binary_search(&z).is_ok()
    }

    /// Renormalised core-restricted interest distribution as `(topic, probability)`.
    pub fn core_distribution(&self) -> Vec<(usize, f64)> {
        by_topic(&self.core_weights)
    }

    /// Renormalised peripheral-restricted interest distribution as `(topic, probability)`.
    pub fn peripheral_distribution(&self) -> Vec<(usize, f64)> {
        by_topic(&self.peripheral_weights)
    }
}

fn by_topic(weights: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = weights.iter().map(|&(z, l)| (z, l.exp())).collect();
    out.sort_unstable_by_key(|&(z, _)| z);
    out
}

/// Smallest prefix of topics by descending mass whose cumulative mass reaches
/// `coverage`; ties go to the lower topic index. Returned ascending.
fn core_topic_prefix(theta: &ProbabilityVector, log_theta: &[f64], coverage: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..theta.len()).collect();
    order.sort_by(|&a, &b| log_theta[b].total_cmp(&log_theta[a]).then(a.cmp(&b)));
    let mut mass = 0.0;
    let mut core = Vec::new();
    for z in order {
        core.push(z);
        mass += theta[z];
        // absorbs rounding in sums such as 0.5 + 0.3
        if mass >= coverage - 1e-12 {
            break;
        }
    }
    core.sort_unstable();
    core
}

fn renormalised(log_theta: &[f64], keep: impl Fn(usize) -> bool) -> Vec<(usize, f64)> {
    let selected: Vec<(usize, f64)> = log_theta
        .iter()
        .enumerate()
        .filter(|(z, _)| keep(*z))
        .map(|(z, &l)| (z, l))
        .collect();
    let norm = log_sum_exp(selected.iter().map(|&(_, l)| l));
    if !norm.is_finite() {
        // every kept topic has zero mass; the subset cannot generate anything
        return selected.into_iter().map(|(z, _)| (z, f64::NEG_INFINITY)).collect();
    }
    let mut weights: Vec<(usize, f64)> = selected.into_iter().map(|(z, l)| (z, l - norm)).collect();
    weights.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    weights
}

/// Draws an agent's interests from Dirichlet(`alpha`) and its verbosity.
pub fn create_agent_profile(
    rng: &mut RngStream,
    agent_id: AgentId,
    alpha: f64,
    k: usize,
    coverage: f64,
    mean_rate: f64,
) -> Result<AgentProfile> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    let (theta, log_theta) = sample_dirichlet_with_logs(rng, &vec![alpha; k])?;
    let verbosity = sample_verbosity(rng, mean_rate)?;
    AgentProfile::with_logs(agent_id, theta, log_theta, verbosity, coverage)
}

/// Packs `(iteration, author, sequence)` into a message id.
///
/// Layout: 20 bits iteration, 28 bits author, 16 bits per-author sequence. Ids
/// from one iteration therefore sort by author, then by sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MessageId(pub u64);

impl MessageId {
    pub const MAX_ITERATION: u64 = (1 << 20) - 1;
    pub const MAX_AUTHOR: u64 = (1 << 28) - 1;
    pub const MAX_SEQUENCE: u64 = (1 << 16) - 1;

    pub fn new(iteration: u64, author: AgentId, sequence: u64) -> Self {
        debug_assert!(iteration <= Self::MAX_ITERATION);
        debug_assert!(author as u64 <= Self::MAX_AUTHOR);
        debug_assert!(sequence <= Self::MAX_SEQUENCE);
        MessageId((iteration << 44) | ((author as u64) << 16) | sequence)
    }

    pub fn iteration(self) -> u64 {
        self.0 >> 44
    }

    pub fn author(self) -> AgentId {
        ((self.0 >> 16) & Self::MAX_AUTHOR) as AgentId
    }

    pub fn sequence(self) -> u64 {
        self.0 & Self::MAX_SEQUENCE
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message {
    pub id: MessageId,
    pub author: AgentId,
    pub terms: Box<[TermId]>,
}

impl Message {
    pub fn new(id: MessageId, author: AgentId, terms: Vec<TermId>) -> Self {
        Message {
            id,
            author,
            terms: terms.into_boxed_slice(),
        }
    }
}

/// Writes a message of `length` terms: each position picks a topic from the
/// author's interests and then a term from that topic.
pub fn generate_message(
    rng: &mut RngStream,
    profile: &AgentProfile,
    world: &TopicWorld,
    length: usize,
    id: MessageId,
) -> Message {
    let terms = (0..length)
        .map(|_| {
            let z = profile.theta_sampler.sample(rng);
            world.sample_term(rng, z)
        })
        .collect();
    Message::new(id, profile.agent_id, terms)
}

/// Log-likelihood of `terms` under the mixture given by `weights`, which must
/// be sorted by weight, descending.
fn mixture_log_likelihood(terms: &[TermId], weights: &[(usize, f64)], world: &TopicWorld) -> f64 {
    let mut total = 0.0;
    for &t in terms {
        let logs = world.term_logs(t);
        // log φ <= 0, so once a weight is negligible against the running
        // maximum, so is every component after it.
        let mut max = f64::NEG_INFINITY;
        let mut live = weights.len();
        for (i, &(z, w)) in weights.iter().enumerate() {
            if w - max < NEGLIGIBLE_GAP {
                live = i;
                break;
            }
            let v = w + logs[z];
            if v > max {
                max = v;
            }
        }
        if max == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let mut sum = 0.0;
        for &(z, w) in &weights[..live] {
            let d = w + logs[z] - max;
            if d > NEGLIGIBLE_GAP {
                sum += d.exp();
            }
        }
        total += max + sum.ln();
    }
    total
}

/// Log-likelihoods of a message under the agent's core-only and
/// peripheral-only topic mixtures. The peripheral value is `None` when every
/// topic is core.
pub fn interest_log_likelihoods(terms: &[TermId], profile: &AgentProfile, world: &TopicWorld) -> (f64, Option<f64>) {
    let core = mixture_log_likelihood(terms, &profile.core_weights, world);
    let peripheral = (!profile.peripheral_weights.is_empty())
        .then(|| mixture_log_likelihood(terms, &profile.peripheral_weights, world));
    (core, peripheral)
}

/// Labels `msg` core when the core-vs-peripheral likelihood ratio exceeds
/// `odds_threshold`.
pub fn classify_message(msg: &Message, profile: &AgentProfile, world: &TopicWorld, odds_threshold: f64) -> Interest {
    classify_terms(&msg.terms, profile, world, odds_threshold)
}

pub fn classify_terms(terms: &[TermId], profile: &AgentProfile, world: &TopicWorld, odds_threshold: f64) -> Interest {
    let (core, peripheral) = interest_log_likelihoods(terms, profile, world);
    let Some(peripheral) = peripheral else {
        return Interest::Core;
    };
    let is_core = match (core == f64::NEG_INFINITY, peripheral == f64::NEG_INFINITY) {
        (true, _) => false,
        (false, true) => true,
        (false, false) => core - peripheral > odds_threshold.ln(),
    };
    if is_core {
        Interest::Core
    } else {
        Interest::Peripheral
    }
}

pub fn check_probability(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be in [0, 1], got {p}")))
    }
}

/// Bernoulli relevance judgement with the probability for the message's class.
pub fn rate_message(rng: &mut RngStream, class: Interest, p_core: f64, p_peripheral: f64) -> Result<bool> {
    check_probability("p_core", p_core)?;
    check_probability("p_peripheral", p_peripheral)?;
    let p = match class {
        Interest::Core => p_core,
        Interest::Peripheral => p_peripheral,
    };
    Ok(rng.bernoulli(p))
}
