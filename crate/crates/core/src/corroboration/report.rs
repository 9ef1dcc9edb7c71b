use std::fmt::Write as _;

use super::run::{CorroborationReport, Status, TrialVerdict};
use super::CorroborationError;

/// Renders as `json` or `md`/`text`.
pub fn render_report(report: &CorroborationReport, format: &str) -> Result<String, CorroborationError> {
    if report.trials.is_empty() {
        return Err(CorroborationError::EmptyReport);
    }
    match format {
        "json" => Ok(serde_json::to_string_pretty(report).expect("reports serialize") + "\n"),
        "md" | "markdown" | "text" => Ok(markdown(report)),
        _ => Err(CorroborationError::Campaign(format!("unknown report format '{format}'"))),
    }
}

fn markdown(r: &CorroborationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {}: {}\n", r.property, r.status.as_str());
    if let Some(d) = r.divergence {
        let _ = writeln!(s, "Divergence: {}\n", serde_json::to_value(d).expect("enum").as_str().unwrap_or(""));
    }
    if r.status == Status::Refuted {
        let _ = writeln!(s, "## Counterexamples\n");
        if let Some(w) = r.formal.witness.as_ref().filter(|w| w.invariant_failed && w.realizable) {
            let _ = writeln!(
                s,
                "- formal witness `{}` ({}), replayed as `{}`",
                w.file,
                w.path.join(" -> "),
                w.trace.as_deref().unwrap_or("-")
            );
        }
        for t in r.trials.iter().filter(|t| t.verdict == TrialVerdict::Fail) {
            let failed: Vec<String> = t
                .assertions
                .iter()
                .filter(|a| a.failures > 0)
                .map(|a| format!("{} at step {}", a.name, a.first_failure_step.unwrap_or(0)))
                .collect();
            let _ = writeln!(
                s,
                "- {} `{}` `{}`: {}",
                t.id,
                t.scenario,
                t.trace.as_deref().unwrap_or("-"),
                failed.join(", ")
            );
        }
        s.push('\n');
    }
    let _ = writeln!(s, "## Formal verdict\n");
    let _ = writeln!(s, "{} ({} symbolic states)\n", r.formal.verdict, r.formal.states);
    for a in &r.formal.assumptions {
        let lo = a.lo.map_or("-inf".to_string(), |x| x.to_string());
        let hi = a.hi.map_or("+inf".to_string(), |x| x.to_string());
        let _ = writeln!(s, "- assumption `{}` on `{}`: [{lo}, {hi}] {}", a.name, a.parameter, a.unit);
    }
    if let Some(w) = &r.formal.witness {
        let _ = writeln!(
            s,
            "- witness `{}`: {}; concretized {}, realizable {}, invariant failed {}",
            w.file,
            w.path.join(" -> "),
            w.concretized,
            w.realizable,
            w.invariant_failed
        );
        if let Some(n) = &w.note {
            let _ = writeln!(s, "  - {n}");
        }
    }
    let _ = writeln!(s, "\n## Trials ({} strategy, seed {})\n", r.campaign.strategy, r.campaign.seed);
    let _ = writeln!(s, "| trial | values | verdict | scenario | trace digest |");
    let _ = writeln!(s, "|---|---|---|---|---|");
    for t in &r.trials {
        let values: Vec<String> = t.values.iter().map(|(k, v)| format!("{k}={v}")).collect();
        let verdict = serde_json::to_value(t.verdict).expect("enum");
        let _ = writeln!(
            s,
            "| {} | {} | {} | `{}` | `{}` |",
            t.id,
            values.join(", "),
            verdict.as_str().unwrap_or(""),
            t.scenario,
            t.trace_digest.as_deref().map_or("-", |d| &d[..16])
        );
    }
    if !r.coverage_holes.is_empty() {
        let _ = writeln!(s, "\n## Coverage holes\n");
        for h in &r.coverage_holes {
            let _ = writeln!(s, "- {h}");
        }
    }
    if !r.conflicts.is_empty() {
        let _ = writeln!(s, "\n## Conflicts\n");
        for c in &r.conflicts {
            let _ = writeln!(
                s,
                "- {} steps {}..={}: {} demands stop ({}), {} demands proceed ({}); commanded {}",
                c.trial, c.first_step, c.last_step, c.stop_property, c.stop_demand, c.proceed_property, c.proceed_demand, c.command
            );
        }
    }
    let _ = writeln!(s, "\n## Derived assertions\n\n```");
    for a in &r.assertions {
        let _ = writeln!(s, "{a}");
    }
    let _ = writeln!(s, "```");
    s
}
