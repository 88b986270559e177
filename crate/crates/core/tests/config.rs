use std::path::PathBuf;

use hcomm::experiments::{ExperimentConfig, Lab, Report};

#[test]
fn unknown_keys_are_rejected() {
    assert!(ExperimentConfig::from_json(r#"{"depth": 2, "dpeth": 3}"#).is_err());
    assert!(ExperimentConfig::from_json(r#"{"checks": {"tiling_pionts": 4}}"#).is_err());
    assert!(ExperimentConfig::from_json(r#"{"depth": 0}"#).is_err());
    assert!(ExperimentConfig::from_json(r#"{"p": [6.0, -1.0]}"#).is_err());
    let cfg = ExperimentConfig::from_json(r#"{"depth": 3}"#).unwrap();
    assert_eq!(cfg.depth, 3);
    assert_eq!(cfg.seed, ExperimentConfig::default().seed);
}

#[test]
fn hash_ignores_locations() {
    let a = ExperimentConfig::default();
    let mut b = a.clone();
    b.output_dir = PathBuf::from("/elsewhere");
    b.cache_dir = Some(PathBuf::from("/tmp/cache"));
    assert_eq!(a.hash(), b.hash());
    let mut c = a.clone();
    c.seed += 1;
    assert_ne!(a.hash(), c.hash());
    assert_eq!(a.hash().len(), 16);
}

#[test]
fn serde_round_trip() {
    for file in ["default.json", "nwo_random.json", "constancy.json"] {
        let path = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
            .join("../../configs")
            .join(file);
        let cfg = ExperimentConfig::load(&path).unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg, "{file}");
    }
}

#[test]
fn rows_carry_hash_and_build() {
    let lab = Lab::new(ExperimentConfig::default()).unwrap();
    let mut rep = Report::new(&lab, "demo");
    rep.check("ok", |row| {
        row.q("x", 1.5).tol("x", 2.0);
        Ok(true)
    });
    rep.check("broken", |_| Err(hcomm::Error::Config("boom".into())));
    assert!(!rep.passed());
    assert_eq!(rep.failures().len(), 1);
    assert!(rep.row("broken").unwrap().note.contains("boom"));
    let json = rep.to_json().unwrap();
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    for row in v["rows"].as_array().unwrap() {
        assert_eq!(row["config_hash"], lab.hash.as_str());
        assert!(!row["build_id"].as_str().unwrap().is_empty());
        assert!(row.get("runtime").is_none());
    }
    assert_eq!(rep.to_csv().lines().count(), 3);
}
