//! Built-in dataset schemas. GBSG, METABRIC and WHAS500 ship with their
//! data; TCGA-BRCA is access-restricted, so only its schema is provided.

use super::schema::{ColumnKind, ColumnSpec, Schema};

#[derive(Clone, Debug)]
pub struct Preset {
    pub name: &'static str,
    pub schema: Schema,
    /// Embedded CSV, when the data may be redistributed.
    pub csv: Option<&'static str>,
    pub time_unit: &'static str,
}

pub const NAMES: [&str; 4] = ["gbsg", "metabric", "whas", "tcga_brca"];

fn schema(columns: &[(&str, ColumnKind)]) -> Schema {
    Schema {
        time: "time".into(),
        event: "event".into(),
        columns: columns
            .iter()
            .map(|(name, kind)| ColumnSpec {
                name: name.to_string(),
                kind: *kind,
            })
            .collect(),
    }
}

pub fn preset(name: &str) -> Option<Preset> {
    use ColumnKind::{Categorical as C, Numeric as N};
    let p = match name {
        "gbsg" => Preset {
            name: "gbsg",
            schema: schema(&[
                ("age", N),
                ("menopause", C),
                ("tumor_size", C),
                ("grade", C),
                ("nodes", N),
                ("progesterone", N),
                ("estrogen", N),
                ("hormone_therapy", C),
            ]),
            csv: Some(include_str!("../../data/gbsg.csv")),
            time_unit: "months",
        },
        "metabric" => Preset {
            name: "metabric",
            schema: schema(&[
                ("mki67", N),
                ("egfr", N),
                ("pgr", N),
                ("erbb2", N),
                ("hormone_therapy", N),
                ("radiotherapy", N),
                ("chemotherapy", N),
                ("er_positive", N),
                ("age", N),
            ]),
            csv: Some(include_str!("../../data/metabric.csv")),
            time_unit: "months",
        },
        "whas" => Preset {
            name: "whas",
            schema: schema(&[
                ("age", N),
                ("gender", N),
                ("hr", N),
                ("sysbp", N),
                ("diasbp", N),
                ("bmi", N),
                ("cvd", N),
                ("afb", N),
                ("sho", N),
                ("chf", N),
                ("av3", N),
                ("miord", N),
                ("mitype", N),
                ("los", N),
            ]),
            csv: Some(include_str!("../../data/whas500.csv")),
            time_unit: "days",
        },
        "tcga_brca" => Preset {
            name: "tcga_brca",
            schema: schema(&[
                ("age", N),
                ("stage", C),
                ("er_status", C),
                ("pr_status", C),
                ("her2_status", C),
                ("histological_type", C),
            ]),
            csv: None,
            time_unit: "days",
        },
        _ => return None,
    };
    Some(p)
}
