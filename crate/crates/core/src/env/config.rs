//! Environment configuration files.
//!
//! The file is TOML. Top-level keys are the base item parameters
//! (`c, h, p, L, a_max, y_max, d_max, d_mean, gamma`); anything omitted takes
//! the reference default. Two optional sections select a larger topology:
//!
//! ```toml
//! p = 4.0
//! L = 2
//!
//! [[items]]          # multi-item: one table per item, overriding the base
//! p = 9.0
//! L = 3
//!
//! [echelon]          # multi-echelon: warehouse + retailers, same override rule
//! warehouse = { p = 4.0, L = 4 }
//! retailers = [{ p = 4.0, L = 4 }, { p = 9.0, L = 4 }]
//! ```
//!
//! Sections `agent`, `fg`, `intrinsic` and `run` belong to the experiment
//! harness and are ignored here.

use std::path::Path;

use serde::Deserialize;
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::params::ItemParams;

pub(crate) const HARNESS_SECTIONS: [&str; 4] = ["agent", "fg", "intrinsic", "run"];

#[derive(Debug, Clone, PartialEq)]
pub struct MultiEchelonConfig {
    pub warehouse: ItemParams,
    pub retailers: Vec<ItemParams>,
}

impl MultiEchelonConfig {
    pub fn validate(&self) -> Result<()> {
        self.warehouse.validate()?;
        if self.retailers.is_empty() {
            return Err(Error::Config("echelon needs at least one retailer".into()));
        }
        self.retailers.iter().try_for_each(ItemParams::validate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnvConfig {
    Single(ItemParams),
    MultiItem(Vec<ItemParams>),
    MultiEchelon(MultiEchelonConfig),
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig::Single(ItemParams::default())
    }
}

impl EnvConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let table: Table = text.parse().map_err(|e| Error::parse(path, e))?;
        Self::from_table(&table).map_err(|e| match e {
            Error::Config(msg) => Error::parse(path, msg),
            other => other,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: Table = text.parse().map_err(|e| Error::Config(format!("{e}")))?;
        Self::from_table(&table)
    }

    pub fn from_table(table: &Table) -> Result<Self> {
        let mut base = Table::new();
        for (k, v) in table {
            if k == "items" || k == "echelon" || HARNESS_SECTIONS.contains(&k.as_str()) {
                continue;
            }
            base.insert(k.clone(), v.clone());
        }
        let base_params = params_from(&base)?;

        let items = table.get("items");
        let echelon = table.get("echelon");
        let cfg = match (items, echelon) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "`items` and `echelon` are mutually exclusive".into(),
                ))
            }
            (Some(Value::Array(list)), None) => {
                let items = list
                    .iter()
                    .map(|v| overlay(&base, v).and_then(|t| params_from(&t)))
                    .collect::<Result<Vec<_>>>()?;
                if items.is_empty() {
                    return Err(Error::Config("`items` is empty".into()));
                }
                EnvConfig::MultiItem(items)
            }
            (Some(_), None) => {
                return Err(Error::Config("`items` must be an array of tables".into()))
            }
            (None, Some(Value::Table(e))) => {
                for k in e.keys() {
                    if k != "warehouse" && k != "retailers" {
                        return Err(Error::Config(format!("unknown echelon key `{k}`")));
                    }
                }
                let warehouse = match e.get("warehouse") {
                    Some(v) => params_from(&overlay(&base, v)?)?,
                    None => base_params.clone(),
                };
                let retailers = match e.get("retailers") {
                    Some(Value::Array(list)) => list
                        .iter()
                        .map(|v| overlay(&base, v).and_then(|t| params_from(&t)))
                        .collect::<Result<Vec<_>>>()?,
                    _ => return Err(Error::Config("`echelon.retailers` must be an array".into())),
                };
                EnvConfig::MultiEchelon(MultiEchelonConfig {
                    warehouse,
                    retailers,
                })
            }
            (None, Some(_)) => return Err(Error::Config("`echelon` must be a table".into())),
            (None, None) => EnvConfig::Single(base_params),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EnvConfig::Single(p) => p.validate(),
            EnvConfig::MultiItem(items) => items.iter().try_for_each(ItemParams::validate),
            EnvConfig::MultiEchelon(e) => e.validate(),
        }
    }

    /// The single-item parameters, or a configuration error for other topologies.
    pub fn single(&self) -> Result<&ItemParams> {
        match self {
            EnvConfig::Single(p) => Ok(p),
            _ => Err(Error::Config(
                "this command needs a single-item environment".into(),
            )),
        }
    }
}

fn overlay(base: &Table, v: &Value) -> Result<Table> {
    let Value::Table(over) = v else {
        return Err(Error::Config("item entries must be tables".into()));
    };
    let mut merged = base.clone();
    for (k, v) in over {
        merged.insert(k.clone(), v.clone());
    }
    Ok(merged)
}

fn params_from(table: &Table) -> Result<ItemParams> {
    // integers are accepted where reals are expected
    let mut t = table.clone();
    for key in ["c", "h", "p", "d_mean", "gamma"] {
        if let Some(Value::Integer(i)) = t.get(key) {
            let f = *i as f64;
            t.insert(key.to_string(), Value::Float(f));
        }
    }
    ItemParams::deserialize(Value::Table(t)).map_err(|e| Error::Config(e.to_string()))
}
