use crate::detector::DetectorArray;
use crate::optics::OpticalConfig;
use crate::scenario::{builtin, Scenario};

fn fig3() -> Scenario {
    Scenario::from_toml_str(builtin("fig3a").unwrap()).unwrap()
}

pub fn fig3_optics() -> OpticalConfig {
    fig3().optical
}

pub fn fig3_detector() -> DetectorArray {
    fig3().detector
}
