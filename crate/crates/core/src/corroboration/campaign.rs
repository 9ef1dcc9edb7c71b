use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::automata::Assumption;
use crate::sim::{quantize, Scenario};

use super::binding::Axis;
use super::CorroborationError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Boundary,
    Sweep,
    Random,
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Strategy, String> {
        match s {
            "boundary" => Ok(Strategy::Boundary),
            "sweep" => Ok(Strategy::Sweep),
            "random" => Ok(Strategy::Random),
            _ => Err(format!("unknown strategy '{s}' (boundary, sweep or random)")),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Boundary => "boundary",
            Strategy::Sweep => "sweep",
            Strategy::Random => "random",
        })
    }
}

/// One perturbation axis with the range the formal verdict was obtained
/// under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignAxis {
    pub assumption: String,
    pub path: String,
    pub offset: f64,
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    pub base: Scenario,
    pub axes: Vec<CampaignAxis>,
    pub strategy: Strategy,
    pub epsilon: f64,
    pub trials: usize,
    pub seed: u64,
}

impl Campaign {
    /// Resolves the binding's axes against the exported assumptions.
    pub fn new(
        base: Scenario,
        axes: &[Axis],
        assumptions: &[Assumption],
        strategy: Strategy,
        epsilon: f64,
        trials: usize,
        seed: u64,
    ) -> Result<Campaign, CorroborationError> {
        let bad = |m: String| Err(CorroborationError::Campaign(m));
        if !(epsilon > 0.0) || !epsilon.is_finite() {
            return bad(format!("epsilon must be positive, got {epsilon}"));
        }
        if trials == 0 {
            return bad("trials must be at least 1".into());
        }
        let mut out = Vec::new();
        for a in axes {
            let Some(assumption) = assumptions.iter().find(|x| x.name == a.assumption) else {
                return bad(format!("axis refers to unknown assumption '{}'", a.assumption));
            };
            base.get_param(&a.path)
                .map_err(|e| CorroborationError::Campaign(format!("axis '{}': {e}", a.assumption)))?;
            let (lo, hi) = match a.range {
                Some([lo, hi]) if lo <= hi => (Some(lo), Some(hi)),
                Some([lo, hi]) => return bad(format!("axis '{}': empty range [{lo}, {hi}]", a.assumption)),
                None => (assumption.lo, assumption.hi),
            };
            if lo.is_none() && hi.is_none() {
                return bad(format!("assumption '{}' has no numeric range", a.assumption));
            }
            out.push(CampaignAxis {
                assumption: a.assumption.clone(),
                path: a.path.clone(),
                offset: a.offset,
                lo,
                hi,
            });
        }
        Ok(Campaign {
            base,
            axes: out,
            strategy,
            epsilon,
            trials,
            seed,
        })
    }
}

/// A generated trial scenario and the assumption values it realises.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedScenario {
    pub id: String,
    /// Assumption name to value, in axis order.
    pub values: Vec<(String, f64)>,
    pub scenario: Scenario,
}

impl GeneratedScenario {
    pub fn describe(&self) -> String {
        let parts: Vec<String> = self.values.iter().map(|(n, v)| format!("{n}={v}")).collect();
        parts.join(", ")
    }
}

fn apply(base: &Scenario, axes: &[CampaignAxis], values: &[f64]) -> Result<Scenario, CorroborationError> {
    let mut s = base.clone();
    for (a, v) in axes.iter().zip(values) {
        s = s
            .set_param(&a.path, quantize(a.offset + v))
            .map_err(|e| CorroborationError::Campaign(format!("axis '{}': {e}", a.assumption)))?;
    }
    s.validate()?;
    Ok(s)
}

fn push_unique(v: &mut Vec<f64>, x: f64) {
    let x = quantize(x);
    if !v.iter().any(|y| (y - x).abs() <= 1e-9) {
        v.push(x);
    }
}

fn finite_range(a: &CampaignAxis) -> Result<(f64, f64), CorroborationError> {
    match (a.lo, a.hi) {
        (Some(lo), Some(hi)) => Ok((lo, hi)),
        _ => Err(CorroborationError::Campaign(format!(
            "axis '{}' needs a two-sided range for this strategy; set `range` in the binding",
            a.assumption
        ))),
    }
}

/// Candidate values of one axis before the validity filter.
fn axis_points(c: &Campaign, a: &CampaignAxis) -> Result<Vec<f64>, CorroborationError> {
    let mut pts = Vec::new();
    match c.strategy {
        Strategy::Boundary => {
            let e = c.epsilon;
            for b in [a.lo, a.hi].into_iter().flatten() {
                for x in [b - e, b, b + e] {
                    push_unique(&mut pts, x);
                }
            }
        }
        Strategy::Sweep => {
            let (lo, hi) = finite_range(a)?;
            let n = c.trials;
            for i in 0..n {
                let x = if n == 1 { (lo + hi) / 2.0 } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 };
                push_unique(&mut pts, x);
            }
        }
        Strategy::Random => unreachable!("random campaigns sample jointly"),
    }
    pts.sort_by(f64::total_cmp);
    Ok(pts)
}

/// Covering array of strength two over `sizes`: every pair of values of
/// every pair of axes appears in some row. Greedy and deterministic.
fn pairwise(sizes: &[usize]) -> Vec<Vec<usize>> {
    let n = sizes.len();
    let mut uncovered = std::collections::BTreeSet::new();
    for i in 0..n {
        for j in i + 1..n {
            for a in 0..sizes[i] {
                for b in 0..sizes[j] {
                    uncovered.insert((i, a, j, b));
                }
            }
        }
    }
    let mut rows = Vec::new();
    while let Some(&(i0, a0, j0, b0)) = uncovered.iter().next() {
        let mut row: Vec<Option<usize>> = vec![None; n];
        row[i0] = Some(a0);
        row[j0] = Some(b0);
        for k in 0..n {
            if row[k].is_some() {
                continue;
            }
            let gain = |v: usize| {
                row.iter()
                    .enumerate()
                    .filter_map(|(m, x)| x.map(|x| (m, x)))
                    .filter(|&(m, x)| {
                        let key = if m < k { (m, x, k, v) } else { (k, v, m, x) };
                        uncovered.contains(&key)
                    })
                    .count()
            };
            let best = (0..sizes[k]).max_by_key(|&v| (gain(v), std::cmp::Reverse(v))).unwrap_or(0);
            row[k] = Some(best);
        }
        let row: Vec<usize> = row.into_iter().map(|x| x.unwrap_or(0)).collect();
        for i in 0..n {
            for j in i + 1..n {
                uncovered.remove(&(i, row[i], j, row[j]));
            }
        }
        rows.push(row);
    }
    rows
}

fn cross(sizes: &[usize]) -> Vec<Vec<usize>> {
    let mut rows = vec![Vec::new()];
    for &s in sizes {
        rows = rows
            .into_iter()
            .flat_map(|r| {
                (0..s).map(move |v| {
                    let mut r = r.clone();
                    r.push(v);
                    r
                })
            })
            .collect();
    }
    rows
}

/// Trial scenarios for `campaign`. Boundary and sweep points outside the
/// physically valid set (the scenario no longer validates) are dropped.
pub fn generate_boundary_scenarios(campaign: &Campaign) -> Result<Vec<GeneratedScenario>, CorroborationError> {
    let axes = &campaign.axes;
    if axes.is_empty() {
        return Ok(vec![GeneratedScenario {
            id: "trial-000".into(),
            values: Vec::new(),
            scenario: campaign.base.clone(),
        }]);
    }
    let mut rows: Vec<Vec<f64>> = Vec::new();
    if campaign.strategy == Strategy::Random {
        let ranges = axes.iter().map(finite_range).collect::<Result<Vec<_>, _>>()?;
        let mut rng = ChaCha8Rng::seed_from_u64(campaign.seed);
        for _ in 0..campaign.trials {
            rows.push(
                ranges
                    .iter()
                    .map(|&(lo, hi)| quantize(if hi > lo { rng.gen_range(lo..=hi) } else { lo }))
                    .collect(),
            );
        }
    } else {
        let mut per_axis = Vec::new();
        for a in axes {
            let mut valid = Vec::new();
            for x in axis_points(campaign, a)? {
                if apply(&campaign.base, std::slice::from_ref(a), &[x]).is_ok() {
                    valid.push(x);
                }
            }
            if valid.is_empty() {
                return Err(CorroborationError::Campaign(format!(
                    "axis '{}' has no physically valid point",
                    a.assumption
                )));
            }
            per_axis.push(valid);
        }
        let sizes: Vec<usize> = per_axis.iter().map(Vec::len).collect();
        let idx = if sizes.len() <= 2 { cross(&sizes) } else { pairwise(&sizes) };
        rows = idx
            .into_iter()
            .map(|r| r.iter().enumerate().map(|(k, &i)| per_axis[k][i]).collect())
            .collect();
    }
    let mut out = Vec::new();
    for row in rows {
        let Ok(scenario) = apply(&campaign.base, axes, &row) else {
            continue;
        };
        out.push(GeneratedScenario {
            id: format!("trial-{:03}", out.len()),
            values: axes.iter().map(|a| a.assumption.clone()).zip(row).collect(),
            scenario,
        });
    }
    if out.is_empty() {
        return Err(CorroborationError::Campaign("no physically valid scenario".into()));
    }
    Ok(out)
}

/// Boundary points covered by a boundary campaign, as (assumption, value).
pub(crate) fn boundary_points(scenarios: &[GeneratedScenario]) -> BTreeMap<String, Vec<f64>> {
    let mut m: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for s in scenarios {
        for (n, v) in &s.values {
            push_unique(m.entry(n.clone()).or_default(), *v);
        }
    }
    for v in m.values_mut() {
        v.sort_by(f64::total_cmp);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_covers_every_pair() {
        let sizes = [3, 2, 4, 3];
        let rows = pairwise(&sizes);
        for i in 0..4 {
            for j in i + 1..4 {
                for a in 0..sizes[i] {
                    for b in 0..sizes[j] {
                        assert!(rows.iter().any(|r| r[i] == a && r[j] == b));
                    }
                }
            }
        }
        assert!(rows.len() < sizes.iter().product::<usize>());
    }

    #[test]
    fn cross_product_order() {
        assert_eq!(cross(&[2, 2]), vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
    }
}
