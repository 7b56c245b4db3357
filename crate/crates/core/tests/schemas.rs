use jsonschema::{Registry, Validator};
use latent_probe::enhancement::{AblationMode, GradientMode};
use latent_probe::harness::{
    compute_batch, run_sensitivity, write_fixtures, BaselineSpec, CodecSpec, ExperimentConfig, FixtureSpec, OracleSpec,
    EXPERIMENT_CONFIG_SCHEMA, RUN_RECORD_SCHEMA, SENSITIVITY_SCHEMA,
};
use serde_json::Value;

const BASE: &str = "https://latent-probe.invalid/schemas/";

fn validator(schema: &str) -> Validator {
    let config: Value = serde_json::from_str(EXPERIMENT_CONFIG_SCHEMA).unwrap();
    let schema: Value = serde_json::from_str(schema).unwrap();
    let registry = Registry::new()
        .add(format!("{BASE}experiment_config.schema.json"), config)
        .unwrap()
        .prepare()
        .unwrap();
    jsonschema::options()
        .offline()
        .with_registry(&registry)
        .build(&schema)
        .unwrap()
}

fn assert_valid(v: &Validator, doc: &Value) {
    let errors: Vec<String> = v
        .iter_errors(doc)
        .map(|e| format!("{} at {}", e, e.instance_path()))
        .collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

fn fixture(dir: &std::path::Path, count: usize) -> ExperimentConfig {
    let spec = FixtureSpec {
        count,
        ..Default::default()
    };
    write_fixtures(
        dir,
        &OracleSpec::ToyLinear { seed: 42, budget: None },
        &CodecSpec::default(),
        &spec,
    )
    .unwrap()
}

#[test]
fn run_records_match_their_schema() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = fixture(dir.path(), 3);
    let v = validator(RUN_RECORD_SCHEMA);
    for mode in [
        AblationMode::Uba,
        AblationMode::PixelRandom,
        AblationMode::InjectOnly,
        AblationMode::LatentRefine,
    ] {
        cfg.attack.ablation_mode = mode;
        let rec = compute_batch(&cfg).unwrap().record;
        assert_valid(&v, &serde_json::to_value(&rec).unwrap());
    }
    cfg.attack.ablation_mode = AblationMode::Uba;
    cfg.attack.gradient_mode = GradientMode::ZerothOrder;
    cfg.oracle = OracleSpec::ToyLinear {
        seed: 42,
        budget: Some(4),
    };
    let rec = compute_batch(&cfg).unwrap().record;
    assert!(rec.aggregate.partial > 0);
    assert_valid(&v, &serde_json::to_value(&rec).unwrap());
    cfg.baseline = Some(BaselineSpec::Fgsm { epsilon: 0.01 });
    let rec = compute_batch(&cfg).unwrap().record;
    assert_valid(&v, &serde_json::to_value(&rec).unwrap());
}

#[test]
fn empty_record_matches_schema() {
    let rec = compute_batch(&ExperimentConfig::default()).unwrap().record;
    assert_valid(&validator(RUN_RECORD_SCHEMA), &serde_json::to_value(&rec).unwrap());
}

#[test]
fn written_config_matches_schema() {
    let dir = tempfile::tempdir().unwrap();
    fixture(dir.path(), 1);
    let text = std::fs::read_to_string(dir.path().join("experiment.json")).unwrap();
    let v = validator(EXPERIMENT_CONFIG_SCHEMA);
    assert_valid(&v, &serde_json::from_str(&text).unwrap());
    assert_valid(&v, &serde_json::json!({}));
    assert!(!v.is_valid(&serde_json::json!({"oracle": {"kind": "toy-linear"}})));
    assert!(!v.is_valid(&serde_json::json!({"attack": {"ablation_mode": "D"}})));
}

#[test]
fn sensitivity_file_matches_schema() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path(), 2);
    let run = run_sensitivity(&cfg).unwrap();
    assert_valid(&validator(SENSITIVITY_SCHEMA), &serde_json::to_value(&run).unwrap());
}
