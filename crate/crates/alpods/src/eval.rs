//! Cross-validation harness: repeated stratified case splits or
//! leave-one-out, case-level accuracy, and understandability metrics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{split_cases, EventTable};
use crate::describe::PopulationDescription;
use crate::error::{AlpodsError, Result};
use crate::model::{case_accuracy, classify_table, train_model, PipelineConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CvMode {
    RepeatedSplit,
    LeaveOneOut,
}

/// Understandability verdict over an emitted rule set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Understandability {
    pub num_clusters: usize,
    pub max_conditions: usize,
    pub mean_conditions: f64,
    pub verdict: String,
}

/// Counts clusters and per-cluster conditions; a result is understandable
/// when both stay in the 2..=14 range.
pub fn understandability(descriptions: &[PopulationDescription]) -> Understandability {
    let num = descriptions.len();
    let conds: Vec<usize> = descriptions.iter().map(|d| d.intervals.len()).collect();
    let max_conditions = conds.iter().copied().max().unwrap_or(0);
    let mean_conditions = if num == 0 {
        0.0
    } else {
        conds.iter().sum::<usize>() as f64 / num as f64
    };
    let verdict = if num < 2 {
        "trivial"
    } else if num > 14 || max_conditions > 14 {
        "too complex"
    } else {
        "understandable"
    };
    Understandability {
        num_clusters: num,
        max_conditions,
        mean_conditions,
        verdict: verdict.to_string(),
    }
}

/// Aggregated cross-validation report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: CvMode,
    pub rounds_requested: usize,
    pub rounds_completed: usize,
    pub per_round_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    pub sd_accuracy: f64,
    pub max_clusters: usize,
    pub mean_clusters: f64,
    pub max_conditions: usize,
    pub mean_conditions: f64,
    pub warnings: Vec<String>,
    pub config: PipelineConfig,
    pub seed: u64,
    /// Wall-clock time; excluded from JSON so reruns stay byte-identical.
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Table-style text rendering.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("Processing Time                    {:.1} s\n", self.wall_seconds));
        s.push_str(&format!("No of Crossvalidations             {}\n", self.rounds_completed));
        s.push_str(&format!("Max No Of Cluster                  {}\n", self.max_clusters));
        s.push_str(&format!("Mean No Of Cluster                 {:.1}\n", self.mean_clusters));
        s.push_str(&format!("Max No Of Conditions for a Cluster {}\n", self.max_conditions));
        s.push_str(&format!("Mean No Of Conditions for a Cluster {:.1}\n", self.mean_conditions));
        s.push_str(&format!(
            "Accuracy                           {:.1} +- {:.1}\n",
            self.mean_accuracy * 100.0,
            self.sd_accuracy * 100.0
        ));
        for w in &self.warnings {
            s.push_str(&format!("warning: {}\n", w));
        }
        s
    }
}

struct RoundOutcome {
    accuracy: f64,
    clusters: usize,
    max_conditions: usize,
    sum_conditions: usize,
    warning: Option<String>,
}

fn run_round(
    train: &EventTable,
    test: &EventTable,
    config: &PipelineConfig,
) -> Result<RoundOutcome> {
    let bundle = train_model(train, config)?;
    let verdicts = classify_table(&bundle, test)?;
    let accuracy = case_accuracy(test, &verdicts);
    let conds: Vec<usize> = bundle.descriptions.iter().map(|d| d.intervals.len()).collect();
    Ok(RoundOutcome {
        accuracy,
        clusters: bundle.descriptions.len(),
        max_conditions: conds.iter().copied().max().unwrap_or(0),
        sum_conditions: conds.iter().sum(),
        warning: None,
    })
}

/// Run `rounds` evaluation rounds (ignored for leave-one-out, which always
/// holds out each case once). Fully deterministic under `seed`; rounds run
/// concurrently and aggregate in round order.
pub fn cross_validate(
    table: &EventTable,
    config: &PipelineConfig,
    rounds: usize,
    mode: CvMode,
    seed: u64,
) -> Result<EvalReport> {
    if table.n_cases() < 2 {
        return Err(AlpodsError::Input("need >= 2 cases".into()));
    }
    let start = std::time::Instant::now();
    let round_count = match mode {
        CvMode::RepeatedSplit => rounds,
        CvMode::LeaveOneOut => table.n_cases(),
    };

    let outcomes: Vec<std::result::Result<RoundOutcome, String>> = (0..round_count)
        .into_par_iter()
        .map(|round| {
            let round_seed = seed.wrapping_add((round as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let result = match mode {
                CvMode::RepeatedSplit => {
                    let split = split_cases(table, 0.5, round_seed)
                        .map_err(|e| format!("round {}: {}", round, e))?;
                    let mut cfg = config.clone();
                    cfg.seed = round_seed;
                    run_round(&split.train, &split.test, &cfg)
                }
                CvMode::LeaveOneOut => {
                    let keep: Vec<usize> =
                        (0..table.n_cases()).filter(|&c| c != round).collect();
                    let train = table
                        .subset_by_cases(&keep)
                        .map_err(|e| format!("round {}: {}", round, e))?;
                    let test = table
                        .subset_by_cases(&[round])
                        .map_err(|e| format!("round {}: {}", round, e))?;
                    let mut cfg = config.clone();
                    cfg.seed = round_seed;
                    run_round(&train, &test, &cfg)
                }
            };
            result.map_err(|e| format!("round {}: {}", round, e))
        })
        .collect();

    let mut per_round = Vec::new();
    let mut warnings = Vec::new();
    let mut max_clusters = 0usize;
    let mut sum_clusters = 0usize;
    let mut max_conditions = 0usize;
    let mut sum_conditions = 0usize;
    let mut total_clusters_for_mean = 0usize;
    for outcome in outcomes {
        match outcome {
            Ok(o) => {
                per_round.push(o.accuracy);
                max_clusters = max_clusters.max(o.clusters);
                sum_clusters += o.clusters;
                max_conditions = max_conditions.max(o.max_conditions);
                sum_conditions += o.sum_conditions;
                total_clusters_for_mean += o.clusters;
                if let Some(w) = o.warning {
                    warnings.push(w);
                }
            }
            Err(w) => warnings.push(format!("skipped {}", w)),
        }
    }
    if per_round.is_empty() {
        return Err(AlpodsError::Input("all rounds degenerate".into()));
    }
    let n = per_round.len() as f64;
    let mean = per_round.iter().sum::<f64>() / n;
    let sd = if per_round.len() > 1 {
        (per_round.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(EvalReport {
        mode,
        rounds_requested: round_count,
        rounds_completed: per_round.len(),
        mean_accuracy: mean,
        sd_accuracy: sd,
        max_clusters,
        mean_clusters: sum_clusters as f64 / per_round.len() as f64,
        max_conditions,
        mean_conditions: if total_clusters_for_mean > 0 {
            sum_conditions as f64 / total_clusters_for_mean as f64
        } else {
            0.0
        },
        per_round_accuracy: per_round,
        warnings,
        config: config.clone(),
        seed,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::generate_jittered_iris;
    use crate::describe::{PopulationDescription, VarInterval};

    fn dummy_descs(n: usize, conds: &[usize]) -> Vec<PopulationDescription> {
        (0..n)
            .map(|i| PopulationDescription {
                id: i + 1,
                source_node: i,
                class: 0,
                class_label: "A".into(),
                intervals: (0..conds[i % conds.len()])
                    .map(|v| VarInterval {
                        variable: v,
                        marker: format!("m{v}"),
                        lower: 0.0,
                        upper: 1.0,
                        token: String::new(),
                    })
                    .collect(),
                effect_size: 1.0,
                mean_case_frequency: vec![0.0],
            })
            .collect()
    }

    #[test]
    fn understandability_verdicts() {
        let u = understandability(&dummy_descs(3, &[3, 5, 2]));
        assert_eq!(u.verdict, "understandable");
        assert_eq!(understandability(&dummy_descs(1, &[3])).verdict, "trivial");
        assert_eq!(understandability(&dummy_descs(20, &[3])).verdict, "too complex");
        assert_eq!(understandability(&[]).verdict, "trivial");
    }

    #[test]
    fn loocv_runs_once_per_case() {
        // small 2-class table: 6 cases, clear separation
        let mut rows = Vec::new();
        let mut ids = Vec::new();
        let mut cls = Vec::new();
        for c in 0..6 {
            for e in 0..30 {
                let base = if c < 3 { 0.0 } else { 10.0 };
                rows.push(vec![base + (e as f64) * 0.01]);
                ids.push(format!("case{c}"));
                cls.push(if c < 3 { "A".to_string() } else { "B".to_string() });
            }
        }
        let t = EventTable::from_rows(vec!["m".into()], rows, ids, cls).unwrap();
        let cfg = PipelineConfig {
            per_class_events: None,
            ..PipelineConfig::default()
        };
        let report = cross_validate(&t, &cfg, 0, CvMode::LeaveOneOut, 3).unwrap();
        assert_eq!(report.rounds_requested, 6);
        assert!(report.mean_accuracy > 0.99, "{}", report.mean_accuracy);
    }

    #[test]
    fn repeated_split_reproducible() {
        let (full, _) = generate_jittered_iris(1, 4, 0.1).unwrap();
        let cfg = PipelineConfig {
            per_class_events: None,
            ..PipelineConfig::default()
        };
        let a = cross_validate(&full, &cfg, 3, CvMode::RepeatedSplit, 7).unwrap();
        let b = cross_validate(&full, &cfg, 3, CvMode::RepeatedSplit, 7).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn accuracy_matches_bruteforce_recount() {
        let (full, _) = generate_jittered_iris(2, 4, 0.1).unwrap();
        let cfg = PipelineConfig {
            per_class_events: None,
            ..PipelineConfig::default()
        };
        let split = split_cases(&full, 0.5, 5).unwrap();
        let bundle = train_model(&split.train, &cfg).unwrap();
        let verdicts = classify_table(&bundle, &split.test).unwrap();
        let acc = case_accuracy(&split.test, &verdicts);
        let mut correct = 0usize;
        for (case, v) in split.test.cases().iter().zip(&verdicts) {
            assert_eq!(case.id, v.case_id);
            if split.test.classes()[case.class] == v.predicted_class {
                correct += 1;
            }
        }
        assert!((acc - correct as f64 / split.test.n_cases() as f64).abs() < 1e-12);
    }
}
