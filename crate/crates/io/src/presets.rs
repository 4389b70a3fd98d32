use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use pics_core::Hyperparameters;

use crate::error::{IoError, Result};

/// Intensity scale a preset's weights were tuned for. The region weight
/// scales with the square of the intensity range, so a preset is only
/// meaningful on images loaded the same way.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Samples divided by the format maximum, so intensities lie in [0, 1].
    #[default]
    Unit,
    /// Raw 8-bit sample values in [0, 255].
    Raw8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub normalization: Normalization,
    pub hyperparameters: Hyperparameters<f64>,
}

/// Named hyperparameter sets. Serialized as a JSON object keyed by name,
/// so names are unique by construction.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PresetCatalogue {
    entries: BTreeMap<String, Preset>,
}

impl PresetCatalogue {
    pub fn get(&self, name: &str) -> Result<&Preset> {
        self.entries
            .get(name)
            .ok_or_else(|| IoError::UnknownPreset(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Add or replace an entry after validating it.
    pub fn insert(&mut self, name: impl Into<String>, preset: Preset) -> Result<()> {
        let name = name.into();
        preset
            .hyperparameters
            .validate()
            .map_err(|e| IoError::InvalidCatalogue(format!("{name}: {e}")))?;
        self.entries.insert(name, preset);
        Ok(())
    }

    /// Overlay `other` onto this catalogue; entries with the same name are
    /// replaced.
    pub fn merge(&mut self, other: PresetCatalogue) {
        self.entries.extend(other.entries);
    }

    pub fn from_json(text: &str) -> Result<Self> {
        // Parse into a map of raw values first so duplicate keys are caught.
        let raw: Vec<(String, Preset)> = parse_entries(text)?;
        let mut out = PresetCatalogue::default();
        for (name, preset) in raw {
            if out.entries.contains_key(&name) {
                return Err(IoError::InvalidCatalogue(format!("duplicate preset {name:?}")));
            }
            out.insert(name, preset)?;
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("catalogue serializes")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
        Self::from_json(&text)
    }
}

fn parse_entries(text: &str) -> Result<Vec<(String, Preset)>> {
    use serde::de::{Deserializer, MapAccess, Visitor};
    struct Entries;
    impl<'de> Visitor<'de> for Entries {
        type Value = Vec<(String, Preset)>;
        fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
            f.write_str("an object of named presets")
        }
        fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<Self::Value, A::Error> {
            let mut out = Vec::new();
            while let Some(entry) = map.next_entry()? {
                out.push(entry);
            }
            Ok(out)
        }
    }
    let mut de = serde_json::Deserializer::from_str(text);
    let entries = (&mut de)
        .deserialize_map(Entries)
        .map_err(|e| IoError::InvalidCatalogue(e.to_string()))?;
    de.end().map_err(|e| IoError::InvalidCatalogue(e.to_string()))?;
    Ok(entries)
}

fn preset(description: &str, weights: [f64; 5]) -> Preset {
    let [a, b, m, g, s] = weights;
    Preset {
        description: description.to_string(),
        normalization: Normalization::Unit,
        hyperparameters: Hyperparameters::with_weights(a, b, m, g, s),
    }
}

/// Weight sets reported for the published experiments. The optimizer
/// settings are the library defaults.
pub fn builtin_presets() -> PresetCatalogue {
    let acdc = [1e-1, 1e-2, 1e4, 1e-5, 1e7];
    let table = [
        (
            "hydrocephalus",
            "CT of enlarged ventricles",
            [5e-1, 5e-2, 1e3, 0.0, 0.0],
        ),
        ("disk", "binary disk", [5e-1, 1e-2, 1e3, 0.0, 0.0]),
        (
            "distorted-disk",
            "disk with a distorted boundary, no shape prior",
            [5e-1, 1e-2, 1e4, 0.0, 0.0],
        ),
        (
            "distorted-disk-shape",
            "disk with a distorted boundary, convexity prior",
            [5e-1, 1e-2, 1e4, 0.0, 1e8],
        ),
        ("lv-ed", "left ventricle, end diastole", [5e-1, 1e-3, 1e4, 0.0, 0.0]),
        (
            "lv-ed-shape",
            "left ventricle, end diastole, convexity prior",
            [5e-1, 1e-3, 1e4, 0.0, 1e8],
        ),
        ("acdc-normal", "cardiac MRI, clear boundaries", acdc),
        (
            "acdc-indistinct",
            "cardiac MRI, indistinct boundaries",
            [acdc[0], acdc[1], acdc[2], acdc[3], acdc[4] * 10.0],
        ),
        (
            "acdc-thin-myocardium",
            "cardiac MRI, thin myocardium",
            [acdc[0], acdc[1], acdc[2], acdc[3] * 100.0, acdc[4]],
        ),
    ];
    let mut cat = PresetCatalogue::default();
    for (name, desc, w) in table {
        cat.insert(name, preset(desc, w)).expect("builtin presets are valid");
    }
    cat
}
