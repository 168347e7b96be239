use std::collections::HashSet;

use bubblesim::engine::IterationTrace;
use bubblesim::report::{late_window_mean, write_results_csv};
use bubblesim::topics::classify_message;
use bubblesim::{
    run_simulation, run_sweep, Error, FilterKind, Interest, Message, MessageId, Metric, RngStream, Scope, SimConfig,
    Simulation, SweepOptions,
};

fn small(seed: u64) -> SimConfig {
    SimConfig {
        num_agents: 200,
        num_topics: 20,
        vocabulary_size: 500,
        iterations: 8,
        seed,
        ..SimConfig::default()
    }
}

fn csv_bytes(config: SimConfig) -> Vec<u8> {
    let series = run_simulation(config).unwrap();
    let mut buf = Vec::new();
    write_results_csv(&mut buf, &series.records).unwrap();
    buf
}

fn message(trace: &IterationTrace, id: MessageId) -> &Message {
    &trace.outboxes[id.author() as usize][id.sequence() as usize]
}

#[test]
fn same_config_gives_identical_csv() {
    for filter in [FilterKind::Content, FilterKind::Author, FilterKind::Passthrough] {
        let config = SimConfig { filter, ..small(5) };
        assert_eq!(csv_bytes(config.clone()), csv_bytes(config), "{filter}");
    }
}

#[test]
fn different_seeds_give_different_runs() {
    assert_ne!(csv_bytes(small(1)), csv_bytes(small(2)));
}

#[test]
fn records_cover_every_metric_scope_and_iteration() {
    let series = run_simulation(small(3)).unwrap();
    assert_eq!(series.records.len(), 8 * 6 * 6);
    assert_eq!(series.config_hash, small(3).config_hash());
    assert!(series.records.iter().all(|r| (0.0..=1.0).contains(&r.value)));
    assert!(series.records.iter().all(|r| (1..=8).contains(&r.iteration)));
}

#[test]
fn silent_community_measures_zero() {
    let config = SimConfig {
        expected_messages: 1e-12,
        ..small(4)
    };
    let series = run_simulation(config).unwrap();
    for r in &series.records {
        assert_eq!(r.value, 0.0, "{:?}", r);
    }
}

#[test]
fn nucleus_only_community_is_complete() {
    let config = SimConfig {
        num_agents: 10,
        ..small(6)
    };
    let sim = Simulation::new(config).unwrap();
    for a in 0..10u32 {
        assert_eq!(sim.network().friends_of(a).unwrap().len(), 9);
    }
}

#[test]
fn two_agents_see_each_others_full_output() {
    let config = SimConfig {
        num_agents: 2,
        nucleus_size: 2,
        min_friends: 1,
        num_topics: 5,
        vocabulary_size: 50,
        iterations: 20,
        ..small(7)
    };
    let mut sim = Simulation::new(config).unwrap();
    let mut checked = 0;
    while !sim.is_finished() {
        let report = sim.step_traced();
        let trace = report.trace.unwrap();
        let sent: Vec<MessageId> = trace.outboxes[1].iter().map(|m| m.id).collect();
        if sent.len() <= 20 {
            let mut shown = trace.agents[0].shown.clone();
            shown.sort_unstable();
            assert_eq!(shown, sent);
            checked += 1;
        }
    }
    assert!(checked > 0);
}

#[test]
fn exposure_flows_from_friends_through_the_filter() {
    let mut sim = Simulation::new(small(8)).unwrap();
    while !sim.is_finished() {
        let report = sim.step_traced();
        let iteration = report.iteration as u64;
        let trace = report.trace.unwrap();
        for (a, agent) in trace.agents.iter().enumerate() {
            let friends: HashSet<u32> = sim.network().friends_of(a as u32).unwrap().iter().copied().collect();
            let expected: usize = friends.iter().map(|&f| trace.outboxes[f as usize].len()).sum();
            assert_eq!(agent.inbox.len(), expected);
            assert!(agent
                .inbox
                .iter()
                .all(|id| friends.contains(&id.author()) && id.iteration() == iteration));
            let inbox: HashSet<MessageId> = agent.inbox.iter().copied().collect();
            assert!(agent.shown.iter().all(|id| inbox.contains(id)));
            assert_eq!(agent.shown.len(), agent.inbox.len().min(20));
            assert_eq!(agent.core.len(), agent.shown.len());
            assert_eq!(agent.relevant.len(), agent.shown.len());
        }
    }
}

#[test]
fn core_labels_match_receiver_classification() {
    let mut sim = Simulation::new(small(9)).unwrap();
    let report = sim.step_traced();
    let trace = report.trace.unwrap();
    for (a, agent) in trace.agents.iter().enumerate() {
        for (id, &core) in agent.shown.iter().zip(&agent.core) {
            let label = classify_message(message(&trace, *id), &sim.profiles()[a], sim.world(), 2.0);
            assert_eq!(core, label == Interest::Core);
        }
    }
}

#[test]
fn window_metrics_dominate_single_iteration_metrics() {
    let mut sim = Simulation::new(small(10)).unwrap();
    while !sim.is_finished() {
        let report = sim.step();
        for m in &report.agents {
            assert!(m.get(Metric::Asc) <= m.get(Metric::AscWindow));
            assert!(m.get(Metric::Av) <= m.get(Metric::AvWindow));
        }
    }
}

/// Runs the regime and checks each agent: an agent shown something has
/// precision `expected`, an agent shown nothing has precision 0. Returns the
/// global precision series.
fn check_precision_regime(p: f64, expected: f64) -> Vec<f64> {
    let config = SimConfig {
        p_core: p,
        p_peripheral: p,
        ..small(11)
    };
    let mut sim = Simulation::new(config).unwrap();
    let mut global = Vec::new();
    while !sim.is_finished() {
        let report = sim.step_traced();
        let trace = report.trace.as_ref().unwrap();
        let mut nonempty = 0;
        for (m, agent) in report.agents.iter().zip(&trace.agents) {
            if agent.shown.is_empty() {
                assert_eq!(m.get(Metric::Precision), 0.0);
            } else {
                assert_eq!(m.get(Metric::Precision), expected);
                nonempty += 1;
            }
        }
        let g = report
            .records
            .iter()
            .find(|r| r.metric == Metric::Precision && r.scope == Scope::Global)
            .unwrap()
            .value;
        assert_eq!(g, expected * nonempty as f64 / report.agents.len() as f64);
        global.push(g);
    }
    global
}

#[test]
fn boundary_precision_regimes() {
    assert!(check_precision_regime(1.0, 1.0).iter().all(|&v| v > 0.9));
    assert!(check_precision_regime(0.0, 0.0).iter().all(|&v| v == 0.0));
}

#[test]
fn precision_equals_core_ratio_when_relevance_is_coreness() {
    let config = SimConfig {
        p_core: 1.0,
        p_peripheral: 0.0,
        ..small(12)
    };
    let mut sim = Simulation::new(config).unwrap();
    while !sim.is_finished() {
        let report = sim.step();
        for m in &report.agents {
            assert_eq!(m.get(Metric::Precision), m.get(Metric::CoreRatio));
        }
    }
}

#[test]
fn invalid_configs_name_the_field() {
    let bad_p = SimConfig {
        p_core: 1.3,
        ..SimConfig::default()
    };
    match Simulation::new(bad_p) {
        Err(Error::Config(e)) => assert!(e.mentions("p_core"), "{e}"),
        other => panic!("expected config error, got {:?}", other.err()),
    }
    let no_iterations = SimConfig {
        iterations: 0,
        ..SimConfig::default()
    };
    assert!(matches!(run_simulation(no_iterations), Err(Error::Config(e)) if e.mentions("iterations")));
}

#[test]
fn sweep_is_independent_of_parallelism() {
    let base = SimConfig {
        num_agents: 100,
        iterations: 4,
        ..small(13)
    };
    let csv = |parallelism| {
        let options = SweepOptions {
            grid_step: 0.5,
            parallelism,
            seeds_per_point: 2,
        };
        let result = run_sweep(&base, options).unwrap();
        assert_eq!(result.runs.len(), 18);
        let mut buf = Vec::new();
        write_results_csv(&mut buf, &result.records()).unwrap();
        buf
    };
    assert_eq!(csv(1), csv(8));
}

#[test]
fn sweep_rejects_uneven_grid_step() {
    let options = SweepOptions {
        grid_step: 0.3,
        parallelism: 1,
        seeds_per_point: 1,
    };
    assert!(run_sweep(&small(1), options).is_err());
}

/// One iteration at full scale with no personalisation: the core ratio of
/// what agents are shown should match the core rate of what they receive.
#[test]
fn passthrough_core_ratio_matches_incoming_base_rate() {
    let mut differences = Vec::new();
    for seed in 0..10 {
        let config = SimConfig {
            filter: FilterKind::Passthrough,
            iterations: 1,
            seed,
            ..SimConfig::default()
        };
        let mut sim = Simulation::new(config).unwrap();
        let report = sim.step_traced();
        let global_cr = report
            .records
            .iter()
            .find(|r| r.metric == Metric::CoreRatio && r.scope == Scope::Global)
            .unwrap()
            .value;
        let trace = report.trace.unwrap();

        // an agent with an empty inbox contributes zero, as in the metric
        let mut rng = RngStream::new(1_000 + seed);
        let samples = 10_000;
        let mut core = 0;
        for _ in 0..samples {
            let a = rng.below(trace.agents.len());
            let inbox = &trace.agents[a].inbox;
            if inbox.is_empty() {
                continue;
            }
            let id = inbox[rng.below(inbox.len())];
            let label = classify_message(message(&trace, id), &sim.profiles()[a], sim.world(), 2.0);
            core += (label == Interest::Core) as usize;
        }
        let base_rate = core as f64 / samples as f64;
        differences.push(global_cr - base_rate);
    }
    let n = differences.len() as f64;
    let mean = differences.iter().sum::<f64>() / n;
    let sd = (differences.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let se = sd / n.sqrt();
    assert!(mean.abs() <= 3.0 * se, "mean difference {mean}, standard error {se}");
}

#[test]
fn core_ratio_rises_under_content_filtering() {
    let config = SimConfig {
        num_agents: 1_000,
        iterations: 50,
        p_core: 0.8,
        p_peripheral: 0.2,
        seed: 14,
        ..SimConfig::default()
    };
    let series = run_simulation(config).unwrap();
    let mut cr: Vec<(u32, f64)> = series
        .records
        .iter()
        .filter(|r| r.metric == Metric::CoreRatio && r.scope == Scope::Global)
        .map(|r| (r.iteration, r.value))
        .collect();
    cr.sort_by_key(|&(i, _)| i);
    let early = cr[..10].iter().map(|&(_, v)| v).sum::<f64>() / 10.0;
    let late = late_window_mean(&series.records, Metric::CoreRatio, Scope::Global, 10).unwrap();
    assert!(late > early, "late {late} vs early {early}");
}
