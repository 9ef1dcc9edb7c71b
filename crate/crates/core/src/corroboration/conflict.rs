use serde::{Deserialize, Serialize};

use crate::assertions::TraceStore;

use super::binding::{Binding, DemandClass};

/// A run of steps in which one property demands a stop while another
/// demands that the ego proceeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConflictFinding {
    pub trial: String,
    pub first_step: usize,
    pub last_step: usize,
    pub time: f64,
    pub stop_property: String,
    pub stop_demand: String,
    pub proceed_property: String,
    pub proceed_demand: String,
    /// Command the controller actually issued at `first_step`.
    pub command: String,
}

/// Demand columns that cannot be evaluated on a trace (e.g. an observation
/// that was not recorded) are skipped.
pub fn detect_conflicts(bindings: &[&Binding], trials: &[(String, TraceStore)]) -> Vec<ConflictFinding> {
    let mut out = Vec::new();
    if bindings.len() < 2 {
        return out;
    }
    for (id, store) in trials {
        let cols: Vec<Vec<(DemandClass, String, Vec<bool>)>> = bindings
            .iter()
            .map(|b| {
                b.demands
                    .iter()
                    .filter_map(|d| store.column(&d.when).ok().map(|c| (d.action, d.when.to_string(), c)))
                    .collect()
            })
            .collect();
        for i in 0..bindings.len() {
            for j in 0..bindings.len() {
                if i == j {
                    continue;
                }
                for (ci, ti, a) in &cols[i] {
                    for (cj, tj, b) in &cols[j] {
                        if *ci != DemandClass::Stop || *cj != DemandClass::Proceed {
                            continue;
                        }
                        let mut k = 0;
                        while k < a.len() {
                            if !(a[k] && b[k]) {
                                k += 1;
                                continue;
                            }
                            let start = k;
                            while k < a.len() && a[k] && b[k] {
                                k += 1;
                            }
                            let step = &store.trace().steps[start];
                            out.push(ConflictFinding {
                                trial: id.clone(),
                                first_step: start,
                                last_step: k - 1,
                                time: step.time,
                                stop_property: bindings[i].property.clone(),
                                stop_demand: ti.clone(),
                                proceed_property: bindings[j].property.clone(),
                                proceed_demand: tj.clone(),
                                command: step.command.clone(),
                            });
                        }
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| {
        (&a.trial, a.first_step, &a.stop_property, &a.proceed_property)
            .cmp(&(&b.trial, b.first_step, &b.stop_property, &b.proceed_property))
    });
    out
}
