//! Fixtures shared by the benchmarks.

use bubblesim::topics::{create_agent_profile, generate_message, generate_topics};
use bubblesim::{AgentProfile, Message, MessageId, RngStream, SimConfig, TopicWorld};

/// Default-sized topic world with `agents` profiles and `messages` messages
/// written by them in turn.
pub fn classification_fixture(agents: usize, messages: usize) -> (TopicWorld, Vec<AgentProfile>, Vec<Message>) {
    let config = SimConfig::default();
    let world = generate_topics(
        &RngStream::new(1),
        config.num_topics,
        config.vocabulary_size,
        config.beta,
    )
    .expect("default parameters are valid");
    let mut rng = RngStream::new(2);
    let profiles: Vec<AgentProfile> = (0..agents)
        .map(|a| {
            create_agent_profile(
                &mut rng,
                a as u32,
                config.alpha,
                config.num_topics,
                config.core_coverage,
                config.expected_messages,
            )
            .expect("default parameters are valid")
        })
        .collect();
    let messages = (0..messages)
        .map(|i| {
            let author = &profiles[i % agents];
            let id = MessageId::new(1, author.agent_id(), (i / agents) as u64);
            generate_message(&mut rng, author, &world, config.message_length, id)
        })
        .collect();
    (world, profiles, messages)
}

/// The desk-scale configuration used for whole-iteration timings.
pub fn desk_config() -> SimConfig {
    SimConfig {
        num_agents: 1_000,
        iterations: 50,
        seed: 1,
        ..SimConfig::default()
    }
}
