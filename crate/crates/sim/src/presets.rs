//! Scenario files bundled with the binary.

use anyhow::{anyhow, Result};

use crate::scenario_file::ScenarioFile;

macro_rules! presets {
    ($($name:literal),* $(,)?) => {
        /// (name, JSON text) of every bundled scenario.
        pub const PRESETS: &[(&str, &str)] = &[
            $(($name, include_str!(concat!("../scenarios/", $name, ".json")))),*
        ];
    };
}

presets!(
    "blockage_concrete",
    "blockage_gravel",
    "linear_walk",
    "rotational_90",
    "rotational_180",
    "free_walk",
    "two_neighbor_walk",
    "search_static",
    "tracking_28ghz",
    "tracking_rot60",
    "tracking_rot120",
    "tracking_free",
);

pub fn names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|p| p.0)
}

pub fn text(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|p| p.0 == name).map(|p| p.1)
}

pub fn load(name: &str) -> Result<ScenarioFile> {
    let text = text(name).ok_or_else(|| anyhow!("no bundled scenario named {name:?}"))?;
    ScenarioFile::parse(text)
}
