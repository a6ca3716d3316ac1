use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DemandVertex, RealizationModel, Stage, SupplyVertex, TwoStageInstance};
use crate::error::{Error, Result};
use crate::pricing::valuation::Valuation;

/// On-disk layout of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub demands: Vec<DemandRecord>,
    pub supplies: Vec<SupplyRecord>,
    pub edges: Vec<EdgeRecord>,
    pub realization: RealizationRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandRecord {
    pub id: u32,
    pub stage: Stage,
    pub pi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valuation: Option<Valuation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub price: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SupplyRecord {
    pub id: u32,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EdgeRecord {
    Pair([u32; 2]),
    Weighted { d: u32, s: u32, w: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum RealizationRecord {
    Independent,
    Scenarios { scenarios: Vec<ScenarioRecord> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRecord {
    pub p: f64,
    pub available: Vec<u32>,
}

impl From<&TwoStageInstance> for InstanceFile {
    fn from(inst: &TwoStageInstance) -> Self {
        let demands = inst
            .demands()
            .iter()
            .map(|d| DemandRecord {
                id: d.id,
                stage: d.stage,
                pi: d.availability,
                valuation: d.valuation.clone(),
                price: d.posted_price,
            })
            .collect();
        let supplies = inst
            .supplies()
            .iter()
            .map(|s| SupplyRecord {
                id: s.id,
                weight: s.weight,
            })
            .collect();
        let edges = inst
            .edges()
            .iter()
            .map(|e| {
                let d = inst.demands()[e.demand].id;
                let s = inst.supplies()[e.supply].id;
                match e.weight {
                    Some(w) => EdgeRecord::Weighted { d, s, w },
                    None => EdgeRecord::Pair([d, s]),
                }
            })
            .collect();
        let realization = match inst.realization_model() {
            RealizationModel::Independent => RealizationRecord::Independent,
            RealizationModel::ScenarioList(list) => RealizationRecord::Scenarios {
                scenarios: list
                    .iter()
                    .map(|s| ScenarioRecord {
                        p: s.probability,
                        available: s.available.iter().map(|&i| inst.demands()[i].id).collect(),
                    })
                    .collect(),
            },
        };
        InstanceFile {
            demands,
            supplies,
            edges,
            realization,
        }
    }
}

impl TryFrom<InstanceFile> for TwoStageInstance {
    type Error = Error;

    fn try_from(file: InstanceFile) -> Result<Self> {
        let demands = file
            .demands
            .into_iter()
            .map(|d| DemandVertex {
                id: d.id,
                stage: d.stage,
                availability: d.pi,
                valuation: d.valuation,
                posted_price: d.price,
            })
            .collect();
        let supplies = file
            .supplies
            .into_iter()
            .map(|s| SupplyVertex {
                id: s.id,
                weight: s.weight,
            })
            .collect();
        let edges = file
            .edges
            .into_iter()
            .map(|e| match e {
                EdgeRecord::Pair([d, s]) => (d, s, None),
                EdgeRecord::Weighted { d, s, w } => (d, s, Some(w)),
            })
            .collect();
        let scenarios = match file.realization {
            RealizationRecord::Independent => None,
            RealizationRecord::Scenarios { scenarios } => {
                Some(scenarios.into_iter().map(|s| (s.p, s.available)).collect())
            }
        };
        TwoStageInstance::new(demands, supplies, edges, scenarios)
    }
}

/// Decodes a JSON document into `T`, reporting the path of the offending field.
pub fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Parse {
            field: path,
            message: e.into_inner().to_string(),
        }
    })
}

impl TwoStageInstance {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: InstanceFile = parse_json(text)?;
        file.try_into()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&InstanceFile::from(self))
            .expect("instance serialization cannot fail");
        s.push('\n');
        s
    }
}

pub fn save(inst: &TwoStageInstance, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, inst.to_json())?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<TwoStageInstance> {
    let text = std::fs::read_to_string(path)?;
    TwoStageInstance::from_json(&text)
}
