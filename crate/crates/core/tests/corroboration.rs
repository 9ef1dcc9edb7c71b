mod common;

use common::{controller, read_asset, scenario};
use cvv_core::automata::{export_assumptions, load_property};
use cvv_core::corroboration::{
    derive_assertions, generate_boundary_scenarios, render_report, run_campaign, Binding, Campaign, CorroborationError,
    PropertyBinding, Status, Strategy, TrialVerdict,
};

fn binding_for(ctl: &str, bind: &str) -> PropertyBinding {
    let c = controller(ctl);
    let prop = load_property(&read_asset("stop_rule.prop"), &c.automaton).unwrap();
    PropertyBinding::new(&c, prop, Binding::parse(bind).unwrap()).unwrap()
}

fn campaign(pb: &PropertyBinding, strategy: Strategy, trials: usize, seed: u64) -> Campaign {
    let p = &pb.property;
    let assumptions = export_assumptions(&pb.automaton, &p.property, &p.environment);
    Campaign::new(
        scenario("stop_gap_rest.scn"),
        &pb.binding.axes,
        &assumptions,
        strategy,
        0.1,
        trials,
        seed,
    )
    .unwrap()
}

#[test]
fn boundary_points_around_gap_threshold() {
    let pb = binding_for("stop_rule.ctl", &read_asset("stop_rule.bind"));
    let scns = generate_boundary_scenarios(&campaign(&pb, Strategy::Boundary, 1, 0)).unwrap();
    let gaps: Vec<f64> = scns.iter().map(|s| s.values[0].1).collect();
    assert_eq!(gaps, vec![4.4, 4.5, 4.6, 7.9, 8.0, 8.1]);
    let n_pos: Vec<f64> = scns.iter().map(|s| s.scenario.get_param("agents.N.pos").unwrap()).collect();
    assert_eq!(n_pos, vec![56.4, 56.5, 56.6, 59.9, 60.0, 60.1]);
}

#[test]
fn random_campaigns_are_seeded() {
    let pb = binding_for("stop_rule.ctl", &read_asset("stop_rule.bind"));
    let gen = |seed| {
        generate_boundary_scenarios(&campaign(&pb, Strategy::Random, 5, seed))
            .unwrap()
            .iter()
            .map(|s| s.scenario.to_toml())
            .collect::<Vec<_>>()
    };
    assert_eq!(gen(3), gen(3));
    assert_ne!(gen(3), gen(4));
    let sweep = generate_boundary_scenarios(&campaign(&pb, Strategy::Sweep, 3, 0)).unwrap();
    let gaps: Vec<f64> = sweep.iter().map(|s| s.values[0].1).collect();
    assert_eq!(gaps, vec![4.5, 6.25, 8.0]);
}

#[test]
fn derived_invariant_translates_the_bad_predicate() {
    let pb = binding_for("stop_rule.ctl", &read_asset("stop_rule.bind"));
    let a = derive_assertions(&pb).unwrap();
    let names: Vec<&str> = a.iter().map(|x| x.name.as_str()).collect();
    assert_eq!(names, ["stop_before_proceed", "decelerate_max_duration", "move_off_into_safe_gap"]);
    assert_eq!(a[0].condition.to_string(), "!(at(\"proceed\") & !once(at(\"stopped\")))");
}

#[test]
fn missing_observation_binding_is_named() {
    let text = read_asset("stop_rule.bind").replace("safe_gap = 'usl", "other = 'usl");
    let c = controller("stop_rule.ctl");
    let prop = load_property(&read_asset("stop_rule.prop"), &c.automaton).unwrap();
    let err = PropertyBinding::new(&c, prop, Binding::parse(&text).unwrap()).unwrap_err();
    assert!(matches!(&err, CorroborationError::Unbound(s) if s == "safe_gap"), "{err}");
}

#[test]
fn correct_controller_is_corroborated() {
    let pb = binding_for("stop_rule.ctl", &read_asset("stop_rule.bind"));
    let out = run_campaign(&pb, &campaign(&pb, Strategy::Boundary, 1, 0), 2, "ctl").unwrap();
    let r = &out.report;
    assert_eq!(r.formal.verdict, "safe");
    assert_eq!(r.trials.len(), 6);
    assert!(r.trials.iter().all(|t| t.verdict == TrialVerdict::Pass), "{:#?}", r.trials);
    assert!(r.coverage_holes.is_empty(), "{:?}", r.coverage_holes);
    assert_eq!(r.status, Status::Corroborated);
    for t in &r.trials {
        assert!(out.files.contains_key(&t.scenario));
        assert!(out.files.contains_key(t.trace.as_ref().unwrap()));
    }
    let md = render_report(r, "md").unwrap();
    assert!(md.starts_with("# stop_before_proceed: corroborated"));
}

#[test]
fn faulty_controller_is_refuted() {
    let pb = binding_for("stop_rule_faulty.ctl", &read_asset("stop_rule.bind"));
    let out = run_campaign(&pb, &campaign(&pb, Strategy::Boundary, 1, 0), 2, "ctl").unwrap();
    let r = &out.report;
    assert_eq!(r.formal.verdict, "unsafe");
    let w = r.formal.witness.as_ref().unwrap();
    assert_eq!(w.path, ["init", "approach", "decelerate", "proceed"]);
    assert!(w.concretized && w.realizable && w.invariant_failed, "{w:?}");
    assert!(out.files.contains_key("witness.json"));
    assert!(out.files.contains_key("traces/witness.jsonl"));
    assert!(r.trials.iter().any(|t| t
        .assertions
        .iter()
        .any(|a| a.name == "stop_before_proceed" && a.failures > 0)));
    assert_eq!(r.status, Status::Refuted);
    let md = render_report(r, "md").unwrap();
    assert!(md.contains("## Counterexamples"));
    assert!(md.find("## Counterexamples").unwrap() < md.find("## Formal verdict").unwrap());
}

mod conflicts {
    use super::*;
    use cvv_core::assertions::TraceStore;
    use cvv_core::corroboration::detect_conflicts;

    fn stores(scn: &cvv_core::sim::Scenario) -> Vec<(String, TraceStore)> {
        let t = common::simulate(scn, &controller("stop_rule.ctl"));
        vec![("trial-000".to_string(), TraceStore::new(t))]
    }

    #[test]
    fn stop_line_inside_crossing_conflicts_with_keep_clear() {
        let stop = Binding::parse(&read_asset("stop_rule.bind")).unwrap();
        let keep = Binding::parse(&read_asset("keep_clear.bind")).unwrap();
        let st = stores(&scenario("stop_in_crossing.scn"));
        let found = detect_conflicts(&[&stop, &keep], &st);
        assert!(!found.is_empty());
        let trace = st[0].1.trace();
        let stopped = trace.steps.iter().position(|s| s.location == "stopped").unwrap();
        let f = found.iter().find(|f| f.first_step <= stopped && stopped <= f.last_step).unwrap();
        assert_eq!(f.stop_property, "stop_before_proceed");
        assert_eq!(f.proceed_property, "keep_crossing_clear");
        for c in &found {
            for k in c.first_step..=c.last_step {
                let s = &trace.steps[k];
                assert!(s.location == "decelerate" || s.location == "stopped");
            }
        }
        assert!(detect_conflicts(&[&stop], &st).is_empty());
    }

    #[test]
    fn disjoint_demands_do_not_conflict() {
        let stop = Binding::parse(&read_asset("stop_rule.bind")).unwrap();
        let keep = Binding::parse(&read_asset("keep_clear.bind")).unwrap();
        let mut scn = scenario("stop_in_crossing.scn");
        scn.network.crossings[0].lo = 80.0;
        scn.network.crossings[0].hi = 84.0;
        scn.sim.duration = 5.0;
        assert!(detect_conflicts(&[&stop, &keep], &stores(&scn)).is_empty());
    }
}

#[test]
fn trigger_that_never_fires_is_inconclusive() {
    // remove the stop sign: nothing past approach ever happens
    let pb = binding_for("stop_rule.ctl", &read_asset("stop_rule.bind"));
    let mut c = campaign(&pb, Strategy::Boundary, 1, 0);
    c.base.network.signs.clear();
    let out = run_campaign(&pb, &c, 1, "ctl").unwrap();
    assert_eq!(out.report.status, Status::Inconclusive);
    assert!(out.report.trials.iter().all(|t| t.verdict == TrialVerdict::Vacuous));
    assert!(out.report.coverage_holes.iter().any(|h| h.contains("vacuous")));
}

#[test]
fn empty_report_is_rejected() {
    let pb = binding_for("stop_rule.ctl", &read_asset("stop_rule.bind"));
    let mut out = run_campaign(&pb, &campaign(&pb, Strategy::Boundary, 1, 0), 1, "ctl").unwrap();
    out.report.trials.clear();
    assert!(matches!(render_report(&out.report, "json"), Err(CorroborationError::EmptyReport)));
}
