//! The simulation loop: create, disseminate, filter, rate, learn, measure.
//!
//! Every phase touches only agent-local state (or reads immutable shared
//! state), so phases run in parallel across agents. A phase finishes for the
//! whole community before the next begins, and all randomness comes from
//! per-agent streams, so results never depend on thread scheduling.

use rayon::prelude::*;

use crate::config::SimConfig;
use crate::error::Result;
use crate::filter::FilterState;
use crate::metrics::{self, AgentMetrics, ExposureHistory, Metric, MetricRecord};
use crate::network::{generate_network, stratify_by_degree, AgentId, Network, StratumAssignment};
use crate::rng::{sample_message_count, RngStream};
use crate::topics::{
    classify_message, create_agent_profile, generate_message, generate_topics, rate_message, AgentProfile, Interest,
    Message, MessageId, TopicWorld,
};

pub const NUM_STRATA: usize = 5;

/// Child-stream labels for the parts of a run.
mod stream {
    pub const TOPICS: u64 = 1;
    pub const NETWORK: u64 = 2;
    pub const PROFILE: u64 = 3;
    pub const CREATE: u64 = 4;
    pub const RATE: u64 = 5;
}

struct AgentState {
    filter: FilterState,
    history: ExposureHistory,
    create_rng: RngStream,
    rate_rng: RngStream,
}

/// A fully initialised community plus its progress through the iterations.
pub struct Simulation {
    config: SimConfig,
    network: Network,
    strata: StratumAssignment,
    world: TopicWorld,
    profiles: Vec<AgentProfile>,
    agents: Vec<AgentState>,
    iteration: usize,
}

/// What one agent saw and did in one iteration. Slices are in rank order.
#[derive(Debug, Clone)]
pub struct AgentTrace {
    pub inbox: Vec<MessageId>,
    pub shown: Vec<MessageId>,
    pub core: Vec<bool>,
    pub relevant: Vec<bool>,
}

/// Optional detail of one iteration, for checking engine invariants.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    pub outboxes: Vec<Vec<Message>>,
    pub agents: Vec<AgentTrace>,
}

#[derive(Debug, Clone)]
pub struct IterationReport {
    /// 1-based.
    pub iteration: u32,
    pub records: Vec<MetricRecord>,
    pub agents: Vec<AgentMetrics>,
    pub trace: Option<IterationTrace>,
}

struct Rated<'m> {
    inbox_len: usize,
    inbox: Vec<MessageId>,
    shown: Vec<&'m Message>,
    core: Vec<bool>,
    relevant: Vec<bool>,
}

impl Simulation {
    /// Builds topics, profiles and network from child streams of `config.seed`.
    pub fn new(config: SimConfig) -> Result<Simulation> {
        config.validate()?;
        let root = RngStream::new(config.seed);

        let world = generate_topics(
            &root.child(&[stream::TOPICS]),
            config.num_topics,
            config.vocabulary_size,
            config.beta,
        )?;

        let profiles: Vec<AgentProfile> = (0..config.num_agents)
            .into_par_iter()
            .map(|a| {
                create_agent_profile(
                    &mut root.child(&[stream::PROFILE, a as u64]),
                    a as AgentId,
                    config.alpha,
                    config.num_topics,
                    config.core_coverage,
                    config.expected_messages,
                )
            })
            .collect::<Result<_>>()?;

        let network = generate_network(
            &mut root.child(&[stream::NETWORK]),
            config.num_agents,
            config.nucleus_size,
            config.min_friends,
        )?;
        let strata = stratify_by_degree(&network, NUM_STRATA);

        let smoothing = match config.filter {
            crate::filter::FilterKind::Author => config.smoothing_authors,
            _ => config.smoothing_terms,
        };
        let agents = (0..config.num_agents)
            .map(|a| {
                Ok(AgentState {
                    filter: FilterState::new(config.filter, smoothing, config.cutoff_b)?,
                    history: ExposureHistory::new(config.window_h),
                    create_rng: root.child(&[stream::CREATE, a as u64]),
                    rate_rng: root.child(&[stream::RATE, a as u64]),
                })
            })
            .collect::<Result<_>>()?;

        Ok(Simulation {
            config,
            network,
            strata,
            world,
            profiles,
            agents,
            iteration: 0,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn strata(&self) -> &StratumAssignment {
        &self.strata
    }

    pub fn world(&self) -> &TopicWorld {
        &self.world
    }

    pub fn profiles(&self) -> &[AgentProfile] {
        &self.profiles
    }

    pub fn filter_of(&self, agent: AgentId) -> &FilterState {
        &self.agents[agent as usize].filter
    }

    /// Iterations completed so far.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn is_finished(&self) -> bool {
        self.iteration >= self.config.iterations
    }

    pub fn step(&mut self) -> IterationReport {
        self.advance(false)
    }

    /// Like [`Simulation::step`], additionally returning every message and
    /// per-agent exposure.
    pub fn step_traced(&mut self) -> IterationReport {
        self.advance(true)
    }

    fn advance(&mut self, trace: bool) -> IterationReport {
        assert!(
            !self.is_finished(),
            "all {} iterations already ran",
            self.config.iterations
        );
        let iteration = self.iteration as u32 + 1;
        let cfg = &self.config;

        // Content creation.
        let outboxes: Vec<Vec<Message>> = self
            .agents
            .par_iter_mut()
            .zip(&self.profiles)
            .map(|(agent, profile)| {
                let count = sample_message_count(&mut agent.create_rng, profile.verbosity(), cfg.count_mode)
                    .expect("validated rate")
                    .min(MessageId::MAX_SEQUENCE + 1);
                (0..count)
                    .map(|seq| {
                        let id = MessageId::new(iteration as u64, profile.agent_id(), seq);
                        generate_message(&mut agent.create_rng, profile, &self.world, cfg.message_length, id)
                    })
                    .collect()
            })
            .collect();

        // Dissemination, filtering and rating.
        let network = &self.network;
        let world = &self.world;
        let rated: Vec<Rated<'_>> = self
            .agents
            .par_iter_mut()
            .zip(&self.profiles)
            .enumerate()
            .map(|(a, (agent, profile))| {
                let friends = network.friends_of(a as AgentId).expect("agent in range");
                // Friends are sorted, so the inbox is in ascending id order.
                let inbox: Vec<&Message> = friends.iter().flat_map(|&b| &outboxes[b as usize]).collect();
                let shown = agent.filter.filter(&inbox);
                let core: Vec<bool> = shown
                    .iter()
                    .map(|m| classify_message(m, profile, world, cfg.odds_threshold) == Interest::Core)
                    .collect();
                // Ratings consume the stream in message-id order.
                let mut by_id: Vec<usize> = (0..shown.len()).collect();
                by_id.sort_unstable_by_key(|&i| shown[i].id);
                let mut relevant = vec![false; shown.len()];
                for i in by_id {
                    let class = if core[i] { Interest::Core } else { Interest::Peripheral };
                    relevant[i] = rate_message(&mut agent.rate_rng, class, cfg.p_core, cfg.p_peripheral)
                        .expect("validated probabilities");
                }
                Rated {
                    inbox_len: inbox.len(),
                    inbox: if trace {
                        inbox.iter().map(|m| m.id).collect()
                    } else {
                        Vec::new()
                    },
                    shown,
                    core,
                    relevant,
                }
            })
            .collect();

        // Learning and measurement.
        let vocabulary = cfg.vocabulary_size;
        let agent_metrics: Vec<AgentMetrics> = self
            .agents
            .par_iter_mut()
            .zip(&rated)
            .enumerate()
            .map(|(a, (agent, r))| {
                debug_assert!(r.shown.len() <= r.inbox_len);
                agent.filter.learn_rated(&r.shown, &r.relevant);

                let mut authors: Vec<AgentId> = r.shown.iter().map(|m| m.author).collect();
                authors.sort_unstable();
                authors.dedup();
                let mut terms: Vec<u32> = r.shown.iter().flat_map(|m| m.terms.iter().copied()).collect();
                terms.sort_unstable();
                terms.dedup();

                let friends = network.degree(a as AgentId);
                let mut m = AgentMetrics::default();
                m.set(Metric::Asc, metrics::active_social_context(&authors, friends));
                m.set(Metric::Av, metrics::active_vocabulary(&terms, vocabulary));
                agent.history.push(authors, terms);
                m.set(Metric::AscWindow, metrics::windowed_asc(&agent.history, friends));
                m.set(Metric::AvWindow, metrics::windowed_av(&agent.history, vocabulary));
                m.set(Metric::CoreRatio, metrics::core_ratio(&r.core));
                m.set(Metric::Precision, metrics::precision(&r.relevant));
                m
            })
            .collect();

        let mut records = Vec::with_capacity(Metric::ALL.len() * (NUM_STRATA + 1));
        for metric in Metric::ALL {
            let values: Vec<f64> = agent_metrics.iter().map(|m| m.get(metric)).collect();
            for (scope, value) in metrics::aggregate(&values, &self.strata) {
                records.push(MetricRecord {
                    p_core: cfg.p_core,
                    p_peripheral: cfg.p_peripheral,
                    seed: cfg.seed,
                    iteration,
                    scope,
                    metric,
                    value,
                });
            }
        }

        let agent_traces: Option<Vec<AgentTrace>> = trace.then(|| {
            rated
                .iter()
                .map(|r| AgentTrace {
                    inbox: r.inbox.clone(),
                    shown: r.shown.iter().map(|m| m.id).collect(),
                    core: r.core.clone(),
                    relevant: r.relevant.clone(),
                })
                .collect()
        });
        drop(rated);
        let trace = agent_traces.map(|agents| IterationTrace { outboxes, agents });

        self.iteration += 1;
        IterationReport {
            iteration,
            records,
            agents: agent_metrics,
            trace,
        }
    }
}

/// All records of one run plus what is needed to reproduce it.
#[derive(Debug, Clone)]
pub struct MetricSeries {
    pub config: SimConfig,
    pub config_hash: String,
    pub records: Vec<MetricRecord>,
}

impl MetricSeries {
    pub fn seed(&self) -> u64 {
        self.config.seed
    }
}

pub fn run_simulation(config: SimConfig) -> Result<MetricSeries> {
    run_simulation_observed(config, |_, _| {})
}

/// Runs all iterations, handing each report to `observer` before its
/// records are collected.
pub fn run_simulation_observed(
    config: SimConfig,
    mut observer: impl FnMut(&Simulation, &IterationReport),
) -> Result<MetricSeries> {
    let mut sim = Simulation::new(config)?;
    let mut records = Vec::with_capacity(sim.config.iterations * Metric::ALL.len() * (NUM_STRATA + 1));
    while !sim.is_finished() {
        let report = sim.step();
        observer(&sim, &report);
        records.extend(report.records);
    }
    Ok(MetricSeries {
        config_hash: sim.config.config_hash(),
        config: sim.config,
        records,
    })
}
