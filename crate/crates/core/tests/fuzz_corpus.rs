//! Replays the checked-in fuzz seeds through the parser entry points.

use std::path::Path;

use kreinreg::config::{RawConfig, ScenarioConfig};
use kreinreg::sufficiency::{check_conditions, AbstractSpace};

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap()))
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

#[test]
fn config_seeds() {
    for (name, text) in seeds("config_parse") {
        let raw = RawConfig::parse(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
        let cfg = ScenarioConfig::resolve(&raw).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert!(!cfg.scenarios.is_empty());
    }
}

#[test]
fn abstract_input_seeds() {
    let mut accepted = 0;
    for (name, text) in seeds("abstract_input_parse") {
        match AbstractSpace::from_toml_str(&text) {
            Ok(space) => {
                check_conditions(&space).unwrap_or_else(|e| panic!("{name}: {e}"));
                accepted += 1;
            }
            Err(e) => assert!(matches!(name.as_str(), "dependent.toml" | "asymmetric.toml"), "{name}: {e}"),
        }
    }
    assert_eq!(accepted, 2);
}

#[test]
fn malformed_inputs_are_errors() {
    for text in ["", "gram = 3", "gram = [[1.0]]\nneutral = [[1.0, 2.0]]\ngamma = [1.0]", "gram = [[nan]]\nneutral = [[1.0]]\ngamma = [1.0]"] {
        assert!(AbstractSpace::from_toml_str(text).is_err(), "{text:?}");
    }
    for text in ["[profile]\nN = 99", "truncations = [1000]", "[output]\nformat = \"xml\""] {
        assert!(RawConfig::parse(text).and_then(|r| ScenarioConfig::resolve(&r)).is_err(), "{text:?}");
    }
}
