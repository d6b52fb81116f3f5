use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    Categorical,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnSpec {
    pub name: String,
    pub kind: ColumnKind,
}

/// Maps CSV columns onto time, event and feature roles.
///
/// ```toml
/// time = "time"
/// event = "event"
///
/// [[columns]]
/// name = "age"
/// kind = "numeric"
///
/// [[columns]]
/// name = "grade"
/// kind = "categorical"
/// ```
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub time: String,
    pub event: String,
    pub columns: Vec<ColumnSpec>,
}

impl Schema {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let schema: Schema = toml::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::Config("schema declares no feature columns".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for name in std::iter::once(&self.time)
            .chain(std::iter::once(&self.event))
            .chain(self.columns.iter().map(|c| &c.name))
        {
            if !seen.insert(name.as_str()) {
                return Err(Error::Config(format!("schema names column `{name}` twice")));
            }
        }
        Ok(())
    }
}
