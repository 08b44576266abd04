//! Bundled scenarios.

use super::{parse_scene, Scene};

pub const LOS_LAB: &str = include_str!("../../presets/los_lab.scn");
pub const OLOS_BAFFLE: &str = include_str!("../../presets/olos_baffle.scn");

pub const NAMES: [&str; 2] = ["los_lab", "olos_baffle"];

/// Scenario text of a bundled preset.
pub fn text(name: &str) -> Option<&'static str> {
    match name {
        "los_lab" => Some(LOS_LAB),
        "olos_baffle" => Some(OLOS_BAFFLE),
        _ => None,
    }
}

pub fn by_name(name: &str) -> Option<Scene> {
    text(name).map(|t| parse_scene(t).expect("bundled presets are valid"))
}

pub fn los_lab() -> Scene {
    by_name("los_lab").unwrap()
}

pub fn olos_baffle() -> Scene {
    by_name("olos_baffle").unwrap()
}
