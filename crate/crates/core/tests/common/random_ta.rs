//! Random diagonal-free timed automata for cross-checking the zone checker.

use cvv_core::automata::{load_property, parse_controller, Environment, SafetyProperty, TimedAutomaton};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

const CMPS: [&str; 5] = ["<", "<=", "==", ">=", ">"];

fn constraint(rng: &mut ChaCha8Rng, clocks: &[&str]) -> String {
    format!(
        "{} {} {}",
        clocks.choose(rng).unwrap(),
        CMPS.choose(rng).unwrap(),
        rng.gen_range(0..=5)
    )
}

/// At most 4 locations, 2 clocks, 2 observations and constants up to 5.
pub fn random_automaton(rng: &mut ChaCha8Rng) -> (TimedAutomaton, SafetyProperty, Environment, String) {
    let n_loc = rng.gen_range(2..=4);
    let clocks: Vec<&str> = ["x", "y"][..rng.gen_range(1..=2)].to_vec();
    let obs: Vec<&str> = ["p", "q"][..rng.gen_range(0..=2)].to_vec();
    let q = |v: &[&str]| v.iter().map(|s| format!("\"{s}\"")).collect::<Vec<_>>().join(", ");
    let mut text = format!(
        "name = \"random\"\nclocks = [{}]\nobservations = [{}]\ninitial = \"l0\"\n",
        q(&clocks),
        q(&obs)
    );
    for l in 0..n_loc {
        text += &format!("\n[[locations]]\nname = \"l{l}\"\n");
        if rng.gen_bool(0.35) {
            let c = clocks.choose(rng).unwrap();
            let op = if rng.gen_bool(0.5) { "<" } else { "<=" };
            text += &format!("invariant = \"{c} {op} {}\"\n", rng.gen_range(1..=5));
        }
    }
    for _ in 0..rng.gen_range(1..=6) {
        let from = rng.gen_range(0..n_loc);
        let to = rng.gen_range(0..n_loc);
        text += &format!("\n[[edges]]\nfrom = \"l{from}\"\nto = \"l{to}\"\n");
        let guards: Vec<String> = (0..rng.gen_range(0..=2)).map(|_| constraint(rng, &clocks)).collect();
        if !guards.is_empty() {
            text += &format!("guard = \"{}\"\n", guards.join(" & "));
        }
        if !obs.is_empty() && rng.gen_bool(0.5) {
            let neg = if rng.gen_bool(0.4) { "!" } else { "" };
            text += &format!("observe = \"{neg}{}\"\n", obs.choose(rng).unwrap());
        }
        let resets: Vec<&str> = clocks.iter().copied().filter(|_| rng.gen_bool(0.4)).collect();
        if !resets.is_empty() {
            text += &format!("reset = [{}]\n", q(&resets));
        }
    }
    let ta = parse_controller(&text).unwrap().automaton;

    let target = rng.gen_range(1..n_loc);
    let mut bad = format!("at(l{target})");
    match rng.gen_range(0..4) {
        0 => bad += &format!(" & !visited(l{})", rng.gen_range(0..n_loc)),
        1 if !obs.is_empty() => bad += &format!(" & {}", obs.choose(rng).unwrap()),
        _ => {}
    }
    let mut prop = format!("name = \"reach\"\nbad = \"{bad}\"\n");
    if rng.gen_bool(0.3) {
        prop += &format!("clock = \"{}\"\n", constraint(rng, &clocks));
    }
    if obs.len() == 2 && rng.gen_bool(0.4) {
        prop += "\n[[restrictions]]\nallow = \"!p | !q\"\n";
        if rng.gen_bool(0.5) {
            prop += &format!("location = \"l{}\"\n", rng.gen_range(0..n_loc));
        }
    }
    let pf = load_property(&prop, &ta).unwrap();
    (ta, pf.property, pf.environment, format!("{text}\n---\n{prop}"))
}
