//! Benchmark fixtures.

use orag_core::simulator::{initial_catalog, make_environment, EpisodeConfig, Environment};
use orag_core::{Catalog, LearningRateSchedule};

/// Environment and noisy initial catalog of the requested size.
pub fn fixture(num_items: usize, dim: usize, horizon: usize) -> (EpisodeConfig, Environment, Catalog) {
    let config = EpisodeConfig {
        horizon,
        num_items,
        dim,
        schedule: LearningRateSchedule::inverse_sqrt(0.5).expect("positive"),
        ..EpisodeConfig::default()
    };
    let env = make_environment(&config, 7).expect("valid config");
    let catalog = initial_catalog(&env, config.init_noise).expect("valid noise");
    (config, env, catalog)
}
