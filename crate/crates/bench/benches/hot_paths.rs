use std::hint::black_box;

use bubblesim::network::generate_network;
use bubblesim::topics::classify_message;
use bubblesim::{FilterKind, FilterState, Message, RngStream, Simulation};
use bubblesim_bench::{classification_fixture, desk_config};
use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

fn bench_classification(c: &mut Criterion) {
    let (world, profiles, messages) = classification_fixture(100, 1_000);
    c.bench_function("classify 1000 messages", |b| {
        b.iter(|| {
            messages
                .iter()
                .enumerate()
                .filter(|(i, m)| {
                    let reader = &profiles[(i * 7) % profiles.len()];
                    classify_message(m, reader, &world, 2.0) == bubblesim::Interest::Core
                })
                .count()
        })
    });
}

fn bench_filter(c: &mut Criterion) {
    let (_, _, messages) = classification_fixture(50, 200);
    let mut trained = FilterState::new(FilterKind::Content, 1.0, 20).unwrap();
    let history: Vec<&Message> = messages.iter().collect();
    let labels: Vec<bool> = (0..history.len()).map(|i| i % 3 == 0).collect();
    trained.learn_rated(&history, &labels);
    let inbox: Vec<&Message> = messages.iter().take(50).collect();

    c.bench_function("content filter, 50-message inbox", |b| {
        b.iter(|| black_box(trained.filter(&inbox)).len())
    });
    c.bench_function("content learning, 20 shown", |b| {
        b.iter_batched(
            || trained.clone(),
            |mut state| state.learn_rated(&history[..20], &labels[..20]),
            BatchSize::SmallInput,
        )
    });
}

fn bench_network(c: &mut Criterion) {
    c.bench_function("preferential attachment, N = 10000", |b| {
        b.iter(|| {
            generate_network(&mut RngStream::new(3), 10_000, 10, 5)
                .unwrap()
                .edge_count()
        })
    });
}

fn bench_step(c: &mut Criterion) {
    let mut group = c.benchmark_group("iteration");
    group.sample_size(10);
    group.bench_function("desk-scale step", |b| {
        b.iter_batched(
            || Simulation::new(desk_config()).unwrap(),
            |mut sim| sim.step().records.len(),
            BatchSize::LargeInput,
        )
    });
    group.finish();
}

criterion_group!(benches, bench_classification, bench_filter, bench_network, bench_step);
criterion_main!(benches);
