//! Aggregates over runs: discovery-epoch distributions, competence curves
//! and pairwise rank-sum comparisons.

use std::collections::BTreeMap;

use oel_core::Variant;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::experiment::Evaluation;
use crate::stats::{mean_sd, quantile_sorted, rank_sum, RankSum};

/// Scenario goals (1-based) whose discovery epochs are compared across
/// variants.
pub const COMPARED_GOALS: [usize; 2] = [5, 6];

/// Everything the summaries depend on. Written artifacts preserve it
/// exactly, so summaries recomputed from files match the in-memory ones.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentData {
    pub epochs: u32,
    pub goal_names: Vec<String>,
    pub variants: Vec<VariantData>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariantData {
    pub variant: Variant,
    /// Per run, the evaluation curve.
    pub evaluations: Vec<Vec<Evaluation>>,
    /// Per run, per scenario goal, the 1-based discovery epoch.
    pub discovery: Vec<Vec<Option<u32>>>,
}

impl VariantData {
    /// Discovery epochs of goal `index` (0-based), runs that missed it
    /// placed after the horizon so they rank last.
    pub fn censored_discovery(&self, index: usize, epochs: u32) -> Vec<f64> {
        self.discovery
            .iter()
            .map(|run| run.get(index).copied().flatten().map_or(f64::from(epochs) + 1.0, f64::from))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryStats {
    pub goal: usize,
    pub name: String,
    pub discovered: usize,
    pub missed: usize,
    /// Order statistics over the runs that discovered the goal.
    pub min: Option<f64>,
    pub q1: Option<f64>,
    pub median: Option<f64>,
    pub q3: Option<f64>,
    pub max: Option<f64>,
    /// Median over all runs with misses counted as `epochs + 1`.
    pub censored_median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub epoch: u32,
    pub mean: f64,
    pub sd: f64,
    /// Fraction of runs achieving each scenario goal.
    pub goal_rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantSummary {
    pub variant: Variant,
    pub runs: usize,
    pub discovery: Vec<DiscoveryStats>,
    pub competence: Vec<CurvePoint>,
}

/// Rank-sum comparison of censored discovery epochs; `p_less` is the
/// one-sided p-value for `a` discovering earlier than `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairwiseTest {
    pub goal: usize,
    pub a: Variant,
    pub b: Variant,
    pub test: RankSum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub epochs: u32,
    pub variants: Vec<VariantSummary>,
    pub tests: Vec<PairwiseTest>,
}

impl SummaryStats {
    pub fn variant(&self, variant: Variant) -> Option<&VariantSummary> {
        self.variants.iter().find(|v| v.variant == variant)
    }

    pub fn test(&self, goal: usize, a: Variant, b: Variant) -> Option<&PairwiseTest> {
        self.tests.iter().find(|t| t.goal == goal && t.a == a && t.b == b)
    }
}

fn discovery_stats(data: &VariantData, index: usize, name: &str, epochs: u32) -> DiscoveryStats {
    let mut found: Vec<f64> = data
        .discovery
        .iter()
        .filter_map(|run| run.get(index).copied().flatten().map(f64::from))
        .collect();
    found.sort_by(f64::total_cmp);
    let mut censored = data.censored_discovery(index, epochs);
    censored.sort_by(f64::total_cmp);
    DiscoveryStats {
        goal: index + 1,
        name: name.to_string(),
        discovered: found.len(),
        missed: data.discovery.len() - found.len(),
        min: found.first().copied(),
        q1: quantile_sorted(&found, 0.25),
        median: quantile_sorted(&found, 0.5),
        q3: quantile_sorted(&found, 0.75),
        max: found.last().copied(),
        censored_median: quantile_sorted(&censored, 0.5).unwrap_or(f64::from(epochs) + 1.0),
    }
}

/// Mean ± sd over runs at each evaluation epoch. Every run must share the
/// same evaluation schedule.
fn competence_curve(data: &VariantData, goals: usize) -> Result<Vec<CurvePoint>> {
    let Some(first) = data.evaluations.first() else {
        return Ok(Vec::new());
    };
    let mut by_epoch: BTreeMap<u32, Vec<&Evaluation>> = BTreeMap::new();
    for run in &data.evaluations {
        if run.len() != first.len() {
            return Err(HarnessError::Inconsistent(format!(
                "{}: runs have different evaluation schedules",
                data.variant
            )));
        }
        for e in run {
            by_epoch.entry(e.epoch).or_default().push(e);
        }
    }
    let runs = data.evaluations.len();
    by_epoch
        .into_iter()
        .map(|(epoch, evals)| {
            if evals.len() != runs {
                return Err(HarnessError::Inconsistent(format!("{}: epoch {epoch} is not evaluated in every run", data.variant)));
            }
            let values: Vec<f64> = evals.iter().map(|e| e.competence()).collect();
            let (mean, sd) = mean_sd(&values).unwrap_or((0.0, 0.0));
            let goal_rates = (0..goals)
                .map(|g| evals.iter().filter(|e| e.goals.get(g) == Some(&true)).count() as f64 / runs as f64)
                .collect();
            Ok(CurvePoint { epoch, mean, sd, goal_rates })
        })
        .collect()
}

pub fn summarize(data: &ExperimentData) -> Result<SummaryStats> {
    if data.variants.is_empty() || data.variants.iter().all(|v| v.discovery.is_empty()) {
        return Err(HarnessError::Empty);
    }
    let goals = data.goal_names.len();
    let variants = data
        .variants
        .iter()
        .map(|v| {
            Ok(VariantSummary {
                variant: v.variant,
                runs: v.discovery.len(),
                discovery: data
                    .goal_names
                    .iter()
                    .enumerate()
                    .map(|(i, name)| discovery_stats(v, i, name, data.epochs))
                    .collect(),
                competence: competence_curve(v, goals)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut tests = Vec::new();
    for goal in COMPARED_GOALS.into_iter().filter(|&g| g <= goals) {
        for a in &data.variants {
            for b in data.variants.iter().filter(|b| b.variant != a.variant) {
                let xa = a.censored_discovery(goal - 1, data.epochs);
                let xb = b.censored_discovery(goal - 1, data.epochs);
                if let Some(test) = rank_sum(&xa, &xb) {
                    tests.push(PairwiseTest { goal, a: a.variant, b: b.variant, test });
                }
            }
        }
    }
    Ok(SummaryStats { epochs: data.epochs, variants, tests })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(discovery: Vec<Vec<Option<u32>>>) -> ExperimentData {
        let evaluations = discovery
            .iter()
            .map(|_| vec![Evaluation { epoch: 25, goals: vec![true, false] }])
            .collect();
        ExperimentData {
            epochs: 100,
            goal_names: vec!["a".into(), "b".into()],
            variants: vec![VariantData { variant: Variant::Hgrail, evaluations, discovery }],
        }
    }

    #[test]
    fn discovery_order_statistics() {
        let runs = (1..=10).map(|e| vec![Some(e), None]).collect();
        let s = summarize(&data(runs)).unwrap();
        let d = &s.variants[0].discovery;
        assert_eq!(d[0].median, Some(5.5));
        assert_eq!((d[0].min, d[0].max), (Some(1.0), Some(10.0)));
        assert_eq!((d[0].discovered, d[0].missed), (10, 0));
        assert_eq!((d[1].discovered, d[1].missed), (0, 10));
        assert_eq!(d[1].median, None);
        assert_eq!(d[1].censored_median, 101.0);
    }

    #[test]
    fn misses_are_excluded_from_quartiles() {
        let runs = vec![vec![Some(4), None], vec![None, None], vec![Some(8), None]];
        let s = summarize(&data(runs)).unwrap();
        let d = &s.variants[0].discovery[0];
        assert_eq!((d.median, d.missed), (Some(6.0), 1));
        assert_eq!(d.censored_median, 8.0);
    }

    #[test]
    fn curve_mean_and_rates() {
        let mut d = data(vec![vec![None, None]; 2]);
        d.variants[0].evaluations[1][0].goals = vec![true, true];
        let s = summarize(&d).unwrap();
        let p = &s.variants[0].competence[0];
        assert_eq!(p.epoch, 25);
        assert!((p.mean - 0.75).abs() < 1e-15);
        assert!((p.sd - (0.125f64).sqrt()).abs() < 1e-15);
        assert_eq!(p.goal_rates, vec![1.0, 0.5]);
    }

    #[test]
    fn pairwise_tests_cover_ordered_pairs() {
        let six = |e: Option<u32>| vec![Some(1), Some(1), Some(1), Some(1), e, e];
        let evals = |n: usize| vec![vec![Evaluation { epoch: 25, goals: vec![false; 6] }]; n];
        let d = ExperimentData {
            epochs: 100,
            goal_names: (1..=6).map(|g| format!("g{g}")).collect(),
            variants: vec![
                VariantData { variant: Variant::Hgrail, evaluations: evals(5), discovery: (1..=5).map(|e| six(Some(e))).collect() },
                VariantData { variant: Variant::RndGd, evaluations: evals(5), discovery: vec![six(None); 5] },
            ],
        };
        let s = summarize(&d).unwrap();
        assert_eq!(s.tests.len(), 4);
        let t = s.test(5, Variant::Hgrail, Variant::RndGd).unwrap();
        assert_eq!(t.test.u, 0.0);
        assert!(t.test.p_less < 0.01);
        assert!(s.test(6, Variant::RndGd, Variant::Hgrail).unwrap().test.p_less > 0.99);
    }

    #[test]
    fn empty_data_is_an_error() {
        let d = ExperimentData { epochs: 1, goal_names: vec![], variants: vec![] };
        assert!(matches!(summarize(&d), Err(HarnessError::Empty)));
    }
}
