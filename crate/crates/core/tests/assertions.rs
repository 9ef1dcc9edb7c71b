mod common;

use common::naive::{naive_check, random_assertion, random_trace, NKind};
use cvv_core::assertions::{check_assertion, parse_assertions, TraceStore, Verdict};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn checked(seed: u64, steps: usize) -> (common::naive::NAssertion, cvv_core::sim::Trace, cvv_core::assertions::AssertionResult) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trace = random_trace(&mut rng, steps);
    let a = random_assertion(&mut rng);
    let parsed = parse_assertions(&a.render("a")).unwrap();
    let r = check_assertion(&TraceStore::new(trace.clone()), &parsed[0]).unwrap();
    (a, trace, r)
}

#[test]
fn long_traces_match_reference() {
    for seed in 0..5 {
        let (a, trace, r) = checked(seed, 1000);
        let (verdict, refs, fails) = naive_check(&a, &trace);
        assert_eq!(r.verdict.as_str(), verdict);
        assert_eq!(r.reference_points, refs);
        assert_eq!(r.failures.iter().map(|f| (f.reference, f.step)).collect::<Vec<_>>(), fails);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn matches_full_scan_reference(seed in any::<u64>()) {
        let (a, trace, r) = checked(seed, 200);
        let (verdict, refs, fails) = naive_check(&a, &trace);
        prop_assert_eq!(r.verdict.as_str(), verdict, "{}", a.render("a"));
        prop_assert_eq!(&r.reference_points, &refs);
        let got: Vec<_> = r.failures.iter().map(|f| (f.reference, f.step)).collect();
        prop_assert_eq!(got, fails);
        if r.verdict == Verdict::Fail {
            prop_assert!(!r.failures.is_empty());
        }
    }

    #[test]
    fn vacuous_iff_no_reference_point(seed in any::<u64>()) {
        let (a, _, r) = checked(seed, 200);
        let vacuous = a.kind != NKind::Invariant && r.reference_points.is_empty();
        prop_assert_eq!(r.verdict == Verdict::Vacuous, vacuous);
    }

    #[test]
    fn invariant_failures_survive_extension(seed in any::<u64>(), cut in 1usize..200) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let full = random_trace(&mut rng, 200);
        let mut a = random_assertion(&mut rng);
        a.kind = NKind::Invariant;
        let parsed = parse_assertions(&a.render("inv")).unwrap();
        let mut prefix = full.clone();
        prefix.steps.truncate(cut.min(full.steps.len()));
        let short = check_assertion(&TraceStore::new(prefix), &parsed[0]).unwrap();
        let long = check_assertion(&TraceStore::new(full), &parsed[0]).unwrap();
        if short.verdict == Verdict::Fail {
            prop_assert_eq!(long.verdict, Verdict::Fail);
        }
    }

    #[test]
    fn clipping_never_turns_fail_into_pass(seed in any::<u64>(), cut in 1usize..200) {
        // the prefix clips windows that the full trace evaluates whole
        let (a, full, long) = checked(seed, 200);
        prop_assume!(matches!(a.kind, NKind::Pre | NKind::Post) && !a.physical);
        let mut prefix = full.clone();
        prefix.steps.truncate(cut.min(full.steps.len()));
        let parsed = parse_assertions(&a.render("a")).unwrap();
        let short = check_assertion(&TraceStore::new(prefix), &parsed[0]).unwrap();
        for f in &short.failures {
            prop_assert!(long.failures.iter().any(|g| g.reference == f.reference && g.step == f.step));
        }
    }
}
