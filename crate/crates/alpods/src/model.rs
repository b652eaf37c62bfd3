//! The end-to-end training pipeline and the self-contained model bundle:
//! balanced sampling, DAG growth, description selection, classifier
//! calibration, serialization, and classification of new tables.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dag::{grow_dag, Dag, GrowthParams};
use crate::data::{balanced_event_sample, EventTable};
use crate::describe::{
    describe_populations, marker_percentiles, render_rule_sheet, select_relevant,
    MarkerPercentiles, PopulationDescription,
};
use crate::error::{AlpodsError, Result};
use crate::fuzzy::{calibrate_from_table, case_frequency, classify_case, CaseExplanation, PopulationClassifier};

pub const BUNDLE_FORMAT: &str = "alpods-bundle/1";

/// Everything the pipeline needs beyond the growth parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub growth: GrowthParams,
    /// Balanced-sample size per class for DAG growth; `None` uses all events.
    pub per_class_events: Option<usize>,
    pub seed: u64,
    pub sdh_bins: usize,
    pub smoothing_passes: usize,
    pub max_plots: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            growth: GrowthParams::default(),
            per_class_events: Some(10_000),
            seed: 0,
            sdh_bins: crate::vispanel::DEFAULT_SDH_BINS,
            smoothing_passes: crate::vispanel::DEFAULT_SMOOTHING_PASSES,
            max_plots: crate::vispanel::DEFAULT_MAX_PLOTS,
        }
    }
}

/// A trained, self-contained model: no event data, only intervals and grids.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelBundle {
    pub format: String,
    pub markers: Vec<String>,
    pub classes: Vec<String>,
    pub config: PipelineConfig,
    pub percentiles: Vec<MarkerPercentiles>,
    pub dag: Dag,
    pub descriptions: Vec<PopulationDescription>,
    pub classifiers: Vec<PopulationClassifier>,
}

impl ModelBundle {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<ModelBundle> {
        let text = std::fs::read_to_string(path)?;
        let bundle: ModelBundle = serde_json::from_str(&text)?;
        if bundle.format != BUNDLE_FORMAT {
            return Err(AlpodsError::Input(format!(
                "unsupported bundle format {:?} (expected {:?})",
                bundle.format, BUNDLE_FORMAT
            )));
        }
        Ok(bundle)
    }

    pub fn rule_sheet(&self) -> String {
        render_rule_sheet(&self.descriptions, &self.classes)
    }

    /// Map this model's marker order onto a data table's columns.
    pub fn marker_map(&self, table: &EventTable) -> Result<Vec<usize>> {
        let mut missing = Vec::new();
        let mut map = Vec::with_capacity(self.markers.len());
        for m in &self.markers {
            match table.markers().iter().position(|t| t == m) {
                Some(i) => map.push(i),
                None => missing.push(m.clone()),
            }
        }
        if !missing.is_empty() {
            return Err(AlpodsError::Schema(format!(
                "data is missing model markers: {}",
                missing.join(", ")
            )));
        }
        Ok(map)
    }
}

/// Run the full training pipeline on a table with at least two classes.
pub fn train_model(train: &EventTable, config: &PipelineConfig) -> Result<ModelBundle> {
    if train.classes().len() < 2 {
        return Err(AlpodsError::Input("need >= 2 classes".into()));
    }
    config.growth.validate()?;

    let sample;
    let grow_table: &EventTable = match config.per_class_events {
        Some(n) if train.class_event_counts().iter().any(|&c| c > n) => {
            sample = balanced_event_sample(train, n, config.seed)?;
            &sample
        }
        _ => train,
    };

    let dag = grow_dag(grow_table, &config.growth)?;
    let percentiles = marker_percentiles(train);
    let candidates = describe_populations(&dag, grow_table, train, &percentiles)?;
    if candidates.is_empty() {
        return Err(AlpodsError::Input(
            "no candidate populations; the classes may be inseparable".into(),
        ));
    }
    let selected = select_relevant(candidates)?;
    let classifiers: Vec<PopulationClassifier> = selected
        .iter()
        .map(|d| calibrate_from_table(d.clone(), train))
        .collect::<Result<Vec<_>>>()?;

    Ok(ModelBundle {
        format: BUNDLE_FORMAT.to_string(),
        markers: train.markers().to_vec(),
        classes: train.classes().to_vec(),
        config: config.clone(),
        percentiles,
        dag,
        descriptions: selected,
        classifiers,
    })
}

/// A classified case: id, predicted class label, explanation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseVerdict {
    pub case_id: String,
    pub predicted_class: String,
    pub explanation: CaseExplanation,
}

/// Classify every case of a table; the table's own class labels (if any) are
/// ignored.
pub fn classify_table(bundle: &ModelBundle, table: &EventTable) -> Result<Vec<CaseVerdict>> {
    let map = bundle.marker_map(table)?;
    let verdicts: Vec<Result<CaseVerdict>> = table
        .cases()
        .par_iter()
        .map(|case| {
            // remap events into the model's marker order
            let events: Vec<Vec<f64>> = case
                .rows
                .iter()
                .map(|&r| map.iter().map(|&m| table.value(r as usize, m)).collect())
                .collect();
            let frequencies: Vec<f64> = bundle
                .classifiers
                .iter()
                .map(|clf| {
                    case_frequency(events.iter().map(|e| e.as_slice()), &clf.description)
                })
                .collect::<Result<Vec<_>>>()?;
            let (_, explanation) = classify_case(
                &case.id,
                &frequencies,
                &bundle.classifiers,
                &bundle.classes,
            )?;
            Ok(CaseVerdict {
                case_id: case.id.clone(),
                predicted_class: explanation.predicted_class.clone(),
                explanation,
            })
        })
        .collect();
    verdicts.into_iter().collect()
}

/// Fraction of cases whose predicted label equals their class label.
pub fn case_accuracy(table: &EventTable, verdicts: &[CaseVerdict]) -> f64 {
    let mut correct = 0usize;
    for (case, v) in table.cases().iter().zip(verdicts) {
        if table.classes()[case.class] == v.predicted_class {
            correct += 1;
        }
    }
    correct as f64 / table.n_cases() as f64
}

/// The event rows of a data table selected by one stored description.
pub fn population_events(
    bundle: &ModelBundle,
    table: &EventTable,
    population_id: usize,
) -> Result<Vec<u32>> {
    let desc = bundle
        .descriptions
        .iter()
        .find(|d| d.id == population_id)
        .ok_or_else(|| {
            let known: Vec<String> = bundle.descriptions.iter().map(|d| d.id.to_string()).collect();
            AlpodsError::Input(format!(
                "unknown population id {} (known: {})",
                population_id,
                known.join(", ")
            ))
        })?;
    let map = bundle.marker_map(table)?;
    let mut rows = Vec::new();
    for r in 0..table.n_events() {
        let inside = desc.intervals.iter().all(|iv| {
            let x = table.value(r, map[iv.variable]);
            x > iv.lower && x <= iv.upper
        });
        if inside {
            rows.push(r as u32);
        }
    }
    Ok(rows)
}
