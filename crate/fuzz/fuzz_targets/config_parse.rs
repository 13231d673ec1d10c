#![no_main]

use kreinreg::config::{RawConfig, ScenarioConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(raw) = RawConfig::parse(data) {
        if let Ok(cfg) = ScenarioConfig::resolve(&raw) {
            assert!(!cfg.scenarios.is_empty());
            assert!(!cfg.truncations.is_empty());
            assert!(cfg.scenarios.windows(2).all(|w| w[0] < w[1]));
        }
    }
});
