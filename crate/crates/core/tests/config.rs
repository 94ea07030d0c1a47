//! Shipped configuration files: parsing, canonical round trip, derivation,
//! and field-level rejection of invalid input.

use std::path::PathBuf;

use contact_core::config::{Config, ConfigError};
use contact_core::model::ModelError;

fn shipped() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    files.sort();
    files
}

#[test]
fn shipped_configs_round_trip_and_derive() {
    let files = shipped();
    assert!(files.len() >= 4, "{files:?}");
    for path in files {
        let cfg = Config::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let text = cfg.to_toml();
        let again = Config::from_toml(&text).unwrap();
        assert_eq!(again, cfg, "{}", path.display());
        assert_eq!(again.to_toml(), text);
        cfg.derive()
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    }
}

fn field_of(text: &str) -> String {
    match Config::from_toml(text) {
        Err(ConfigError::Invalid { field, .. })
        | Err(ConfigError::Model(ModelError::Invalid { field, .. })) => field,
        other => panic!("expected an invalid-field error, got {other:?}"),
    }
}

fn graph(v: &str, extra: &str) -> String {
    format!(
        r#"{extra}
[space]
backend = "graph"
weights = [1.0, 1.0]

[kernel]
kind = "tabulated"
matrix = [[0.0, 1.0], [1.0, 0.0]]

[rates]
v = {v}
"#
    )
}

#[test]
fn minimal_graph_parses() {
    Config::from_toml(&graph(r#"{ kind = "critical" }"#, "")).unwrap();
}

#[test]
fn invalid_values_name_their_field() {
    let v = graph(r#"{ kind = "constant", value = -1.0 }"#, "");
    assert_eq!(field_of(&v), "rates.v");
    let rho = graph(r#"{ kind = "critical" }"#, "[run]\nrho = 0.0\n");
    assert_eq!(field_of(&rho), "run.rho");
}

#[test]
fn unknown_keys_are_rejected() {
    let text = graph(r#"{ kind = "critical" }"#, "sede = 3");
    assert!(matches!(
        Config::from_toml(&text),
        Err(ConfigError::Parse(_))
    ));
}
