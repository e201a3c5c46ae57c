//! Sequence models selected by name from configuration.
//!
//! A [`ModelSpec`] is a `kind` plus free-form parameters. Each kind has a
//! [`ModelFactory`] that fills in defaults for a given horizon and builds the
//! model; [`ModelRegistry`] maps kind names to factories.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::processes::{default_horizon, CoupledFbmModel, CoupledWienerModel};
use crate::sequences::{
    j1_mu_of, Ar1Model, GSpec, IidDistribution, IidModel, LrdModel, MaModel, SequenceModel,
    WeightSpec, DEFAULT_MIN_TRUNCATION,
};

/// A model kind and its parameters, as written in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: String,
    #[serde(flatten)]
    pub params: Map<String, Value>,
}

impl ModelSpec {
    pub fn new(kind: impl Into<String>, params: Value) -> Self {
        let params = match params {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        Self {
            kind: kind.into(),
            params,
        }
    }

    pub fn iid(distribution: IidDistribution) -> Self {
        Self::new("iid", serde_json::json!({ "distribution": distribution }))
    }

    pub fn ma(innovation_sd: f64, coefficients: &[f64], shift: f64) -> Self {
        Self::new(
            "ma",
            serde_json::json!({ "innovation_sd": innovation_sd, "coefficients": coefficients, "shift": shift }),
        )
    }

    pub fn ar1(rho: f64, innovation_sd: f64, shift: f64) -> Self {
        Self::new(
            "ar1",
            serde_json::json!({ "rho": rho, "innovation_sd": innovation_sd, "shift": shift }),
        )
    }

    pub fn lrd(alpha: f64, truncation: Option<usize>, g: GSpec) -> Self {
        let mut v = serde_json::json!({ "alpha": alpha, "g": g });
        if let Some(k) = truncation {
            v["truncation"] = k.into();
        }
        Self::new("lrd", v)
    }

    pub fn coupled_wiener(mu: f64, sigma: f64) -> Self {
        Self::new(
            "coupled-wiener",
            serde_json::json!({ "mu": mu, "sigma": sigma }),
        )
    }

    pub fn coupled_fbm(alpha: f64, mu: f64, c: f64) -> Self {
        Self::new(
            "coupled-fbm",
            serde_json::json!({ "alpha": alpha, "mu": mu, "c": c }),
        )
    }
}

/// Builds one kind of model from its parameters.
pub trait ModelFactory: Send + Sync {
    fn kind(&self) -> &'static str;

    /// Writes horizon-dependent defaults into `params` so the resolved
    /// configuration is explicit. `t` is the experiment time.
    fn resolve(&self, _params: &mut Map<String, Value>, _t: u64) -> Result<()> {
        Ok(())
    }

    fn build(&self, params: &Map<String, Value>) -> Result<Arc<dyn SequenceModel>>;
}

fn parse<T: DeserializeOwned>(kind: &'static str, params: &Map<String, Value>) -> Result<T> {
    serde_json::from_value(Value::Object(params.clone())).map_err(|e| Error::InvalidParameter {
        name: kind,
        reason: e.to_string(),
    })
}

fn one() -> f64 {
    1.0
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IidParams {
    distribution: IidDistribution,
}

struct IidFactory;

impl ModelFactory for IidFactory {
    fn kind(&self) -> &'static str {
        "iid"
    }
    fn build(&self, params: &Map<String, Value>) -> Result<Arc<dyn SequenceModel>> {
        let p: IidParams = parse(self.kind(), params)?;
        Ok(Arc::new(IidModel::new(p.distribution)?))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MaParams {
    #[serde(default = "one")]
    innovation_sd: f64,
    coefficients: Vec<f64>,
    shift: f64,
}

struct MaFactory;

impl ModelFactory for MaFactory {
    fn kind(&self) -> &'static str {
        "ma"
    }
    fn build(&self, params: &Map<String, Value>) -> Result<Arc<dyn SequenceModel>> {
        let p: MaParams = parse(self.kind(), params)?;
        Ok(Arc::new(MaModel::new(
            p.innovation_sd,
            p.coefficients,
            p.shift,
        )?))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Ar1Params {
    rho: f64,
    #[serde(default = "one")]
    innovation_sd: f64,
    shift: f64,
}

struct Ar1Factory;

impl ModelFactory for Ar1Factory {
    fn kind(&self) -> &'static str {
        "ar1"
    }
    fn build(&self, params: &Map<String, Value>) -> Result<Arc<dyn SequenceModel>> {
        let p: Ar1Params = parse(self.kind(), params)?;
        Ok(Arc::new(Ar1Model::new(p.rho, p.innovation_sd, p.shift)?))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LrdParams {
    alpha: f64,
    #[serde(default)]
    truncation: Option<usize>,
    #[serde(default)]
    g: GSpec,
}

struct LrdFactory;

impl ModelFactory for LrdFactory {
    fn kind(&self) -> &'static str {
        "lrd"
    }

    /// `K = max(n, 2^16)` with `n` the summands needed for `Q(T)`.
    fn resolve(&self, params: &mut Map<String, Value>, t: u64) -> Result<()> {
        let p: LrdParams = parse(self.kind(), params)?;
        if p.truncation.is_none() {
            let (_, mu) = j1_mu_of(&p.g)?;
            let n = default_horizon(mu * t as f64, mu);
            params.insert("truncation".into(), n.max(DEFAULT_MIN_TRUNCATION).into());
        }
        if !params.contains_key("g") {
            params.insert("g".into(), serde_json::to_value(&p.g)?);
        }
        Ok(())
    }

    fn build(&self, params: &Map<String, Value>) -> Result<Arc<dyn SequenceModel>> {
        let p: LrdParams = parse(self.kind(), params)?;
        let k = p.truncation.unwrap_or(DEFAULT_MIN_TRUNCATION);
        Ok(Arc::new(LrdModel::new(WeightSpec::new(p.alpha, k)?, p.g)?))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CoupledWienerParams {
    #[serde(default = "one")]
    mu: f64,
    #[serde(default = "one")]
    sigma: f64,
}

struct CoupledWienerFactory;

impl ModelFactory for CoupledWienerFactory {
    fn kind(&self) -> &'static str {
        "coupled-wiener"
    }
    fn build(&self, params: &Map<String, Value>) -> Result<Arc<dyn SequenceModel>> {
        let p: CoupledWienerParams = parse(self.kind(), params)?;
        Ok(Arc::new(CoupledWienerModel::new(p.mu, p.sigma)?))
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CoupledFbmParams {
    alpha: f64,
    #[serde(default = "one")]
    mu: f64,
    #[serde(default = "one")]
    c: f64,
}

struct CoupledFbmFactory;

impl ModelFactory for CoupledFbmFactory {
    fn kind(&self) -> &'static str {
        "coupled-fbm"
    }
    fn build(&self, params: &Map<String, Value>) -> Result<Arc<dyn SequenceModel>> {
        let p: CoupledFbmParams = parse(self.kind(), params)?;
        Ok(Arc::new(CoupledFbmModel::new(p.alpha, p.mu, p.c)?))
    }
}

/// Kind name → factory.
#[derive(Clone)]
pub struct ModelRegistry {
    factories: BTreeMap<&'static str, Arc<dyn ModelFactory>>,
}

impl ModelRegistry {
    pub fn empty() -> Self {
        Self {
            factories: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, factory: Arc<dyn ModelFactory>) {
        self.factories.insert(factory.kind(), factory);
    }

    pub fn get(&self, kind: &str) -> Result<&Arc<dyn ModelFactory>> {
        self.factories.get(kind).ok_or_else(|| Error::UnknownName {
            what: "model kind",
            name: kind.to_string(),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.factories.keys().copied()
    }

    pub fn resolve(&self, spec: &mut ModelSpec, t: u64) -> Result<()> {
        self.get(&spec.kind)?.resolve(&mut spec.params, t)
    }

    pub fn build(&self, spec: &ModelSpec) -> Result<Arc<dyn SequenceModel>> {
        self.get(&spec.kind)?.build(&spec.params)
    }
}

impl Default for ModelRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(IidFactory));
        r.register(Arc::new(MaFactory));
        r.register(Arc::new(Ar1Factory));
        r.register(Arc::new(LrdFactory));
        r.register(Arc::new(CoupledWienerFactory));
        r.register(Arc::new(CoupledFbmFactory));
        r
    }
}
