//! Simulated IRB data bundled with the binary: an X90 target on the
//! reference device with T1/T2 decay and the exact backend, with no
//! injected error and with pi/256 and pi/128 overrotations. Each file holds
//! the `alpha` rows of an `irb` run with [`bundled_config`].

use std::f64::consts::PI;

use crate::config::ExperimentConfig;

pub const BUNDLED: [(&str, &str); 3] = [
    ("eps_0", include_str!("../data/eps_0.csv")),
    ("eps_pi_256", include_str!("../data/eps_pi_256.csv")),
    ("eps_pi_128", include_str!("../data/eps_pi_128.csv")),
];

/// Injected angles, in the order of [`BUNDLED`].
pub const EPSILONS: [f64; 3] = [0.0, PI / 256.0, PI / 128.0];

/// Config that produced a bundled file.
pub fn bundled_config(epsilon: f64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.noise.overrotation_epsilon = epsilon;
    cfg.irb.base.seed = 2016;
    cfg
}
