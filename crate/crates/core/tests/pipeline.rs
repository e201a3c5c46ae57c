use std::sync::Arc;

use bk_core::fbm::{FgnSpec, GeneratorRegistry, HurstParam};
use bk_core::montecarlo::{
    run_envelope_experiment, run_limit_experiment, simulate_limit_replication, ExperimentConfig,
    LimitTarget, RunOptions, TheoryLaw,
};
use bk_core::registry::{ModelFactory, ModelRegistry, ModelSpec};
use bk_core::sequences::{IidDistribution, LongRun, ModelMoments, Realization, SequenceModel};
use bk_core::theory::lil_envelope_iid;
use bk_core::Result;
use serde_json::{Map, Value};

/// `Y ≡ level`, registered from outside the crate.
#[derive(Debug)]
struct Constant(f64);

impl SequenceModel for Constant {
    fn kind(&self) -> &'static str {
        "constant"
    }
    fn moments(&self) -> ModelMoments {
        ModelMoments {
            mu: self.0,
            sigma_marginal: 0.0,
            long_run: LongRun::Weak { sigma: 0.0 },
        }
    }
    fn generate(&self, n: usize, _seed: u64) -> Result<Realization> {
        Ok(Realization {
            y: vec![self.0; n],
            driver: None,
        })
    }
}

struct ConstantFactory;

impl ModelFactory for ConstantFactory {
    fn kind(&self) -> &'static str {
        "constant"
    }
    fn build(&self, params: &Map<String, Value>) -> Result<Arc<dyn SequenceModel>> {
        let level = params.get("level").and_then(Value::as_f64).unwrap_or(1.0);
        Ok(Arc::new(Constant(level)))
    }
}

#[test]
fn registered_model_runs_through_the_experiment() {
    let mut registry = ModelRegistry::default();
    registry.register(Arc::new(ConstantFactory));
    assert!(registry.names().any(|n| n == "constant"));
    let config = ExperimentConfig::new(
        ModelSpec::new("constant", serde_json::json!({"level": 1.0})),
        1024,
        5,
        1,
    );
    let r = run_limit_experiment(&config, &registry, &RunOptions::default()).unwrap();
    // Q(1024) = 1024 + 1025 − 2048 = 1, scaled by 1024^{-1/4}.
    for rec in &r.records {
        assert_eq!(rec.raw_q, 1.0);
        assert_eq!(rec.normalized_q, 1024f64.powf(-0.25));
    }
    assert_eq!(r.theory, TheoryLaw::PointMassAtZero);
    assert_eq!(r.ks_vs_theory, 1.0);
    assert!(!r.passed);
}

#[test]
fn stored_samples_recompute_from_their_seeds() {
    let registry = ModelRegistry::default();
    let config = ExperimentConfig::new(ModelSpec::ar1(0.5, 1.0, 2.0), 2048, 20, 77)
        .resolve(&registry)
        .unwrap();
    let r = run_limit_experiment(
        &config,
        &registry,
        &RunOptions {
            workers: Some(4),
            ..Default::default()
        },
    )
    .unwrap();
    let model = registry.build(&config.model).unwrap();
    let target = LimitTarget::new(&config, &model.moments()).unwrap();
    for rec in r.records.iter().step_by(3) {
        let again =
            simulate_limit_replication(model.as_ref(), &target, rec.replication_index, rec.seed)
                .unwrap();
        assert_eq!(&again, rec);
    }
}

#[test]
fn envelope_matches_theory_function() {
    let registry = ModelRegistry::default();
    let config = ExperimentConfig::new(
        ModelSpec::iid(IidDistribution::Exponential { rate: 2.0 }),
        4096,
        10,
        3,
    );
    let r = run_envelope_experiment(&config, &registry, &RunOptions::default()).unwrap();
    assert_eq!(r.envelope, lil_envelope_iid(4096.0, 0.5, 0.5).unwrap());
    assert!(r.monotone_in_lambda);
    assert_eq!(r.ratio_target, Some(0.5 / 0.5f64.sqrt()));
}

#[test]
fn resolved_config_round_trips() {
    let registry = ModelRegistry::default();
    let text = r#"{"model": {"kind": "lrd", "alpha": 0.3}, "T": 4096, "replications": 3, "master_seed": 9}"#;
    let resolved = ExperimentConfig::from_json(text)
        .unwrap()
        .resolve(&registry)
        .unwrap();
    let back = ExperimentConfig::from_json(&resolved.to_json_pretty().unwrap()).unwrap();
    assert_eq!(back, resolved);
    assert_eq!(back.resolve(&registry).unwrap(), resolved);
    assert_eq!(back.digest().unwrap(), resolved.digest().unwrap());
    assert!(resolved.model.params.contains_key("truncation"));
    assert!(ExperimentConfig::from_json(&text.replace("\"T\"", "\"extra\": 1, \"T\"")).is_err());
}

#[test]
fn fgn_generators_by_name() {
    let registry = GeneratorRegistry::default();
    let spec = FgnSpec::new(HurstParam::new(0.7).unwrap(), 64, 5).unwrap();
    for name in ["davies-harte", "cholesky"] {
        let g = registry.get(name).unwrap();
        assert_eq!(g.name(), name);
        let x = g.generate(&spec).unwrap();
        assert_eq!(x.len(), 64);
        assert_eq!(x, g.generate(&spec).unwrap());
    }
    assert!(registry.get("hosking").is_err());
}
