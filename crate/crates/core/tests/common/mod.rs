#![allow(dead_code)]

pub mod automata;
pub mod naive;
pub mod random_ta;
pub mod spatial;

use std::path::PathBuf;

pub fn asset(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets").join(name)
}

pub fn read_asset(name: &str) -> String {
    std::fs::read_to_string(asset(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

use cvv_core::automata::{parse_controller, ControllerFile};
use cvv_core::sim::{run, Scenario, Sensing, Trace};

pub fn controller(name: &str) -> ControllerFile {
    parse_controller(&read_asset(name)).unwrap()
}

pub fn scenario(name: &str) -> Scenario {
    Scenario::parse(&read_asset(name)).unwrap()
}

pub fn simulate(scn: &Scenario, ctl: &ControllerFile) -> Trace {
    let sensing = Sensing::parse(ctl.sensing.as_ref().expect("controller has sensing")).unwrap();
    run(scn, &ctl.automaton, &sensing, "scn", "ctl").unwrap()
}
