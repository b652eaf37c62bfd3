//! Per-population fuzzy classifiers: many()/few() membership over per-case
//! frequencies, majority voting with fuzzy degrees and pro/contra
//! explanations.
//!
//! Event membership in a population is crisp (the interval conjunction);
//! fuzziness enters at the case level, where the fraction of a case's events
//! inside the population is scored against calibrated per-class frequency
//! densities.

use serde::{Deserialize, Serialize};

use crate::data::EventTable;
use crate::density::{kde_on_grid, silverman_bandwidth};
use crate::describe::PopulationDescription;
use crate::error::{AlpodsError, Result};

/// Number of grid points over the frequency domain [0,1].
const FREQ_GRID: usize = 101;

/// Laplace-style floor added to each class density before forming posteriors.
const DENSITY_FLOOR: f64 = 1e-3;

/// Degree band treated as indecisive.
const INDECISIVE_LO: f64 = 0.4;
const INDECISIVE_HI: f64 = 0.6;

/// A membership function over the per-case frequency domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MembershipFunction {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub tag: String,
    /// sub-interval of [0,1] where the degree is in (0.4, 0.6), if any
    pub indecisive_band: Option<(f64, f64)>,
}

impl MembershipFunction {
    /// Linear interpolation on the stored grid.
    pub fn degree(&self, f: f64) -> f64 {
        let f = f.clamp(0.0, 1.0);
        let step = self.grid[1] - self.grid[0];
        let pos = (f - self.grid[0]) / step;
        let i = (pos.floor() as usize).min(self.grid.len() - 2);
        let frac = (pos - i as f64).clamp(0.0, 1.0);
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }
}

/// One calibrated XAI expert for a population: a one-vs-rest Bayes decision
/// between the high-frequency class and all remaining classes pooled.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PopulationClassifier {
    pub description: PopulationDescription,
    /// class with the larger mean case frequency
    pub high_class: usize,
    pub informative: bool,
    pub many: MembershipFunction,
    pub few: MembershipFunction,
    /// priors of (high class, rest) used for the posterior
    pub priors: Vec<f64>,
}

/// Crisp membership of one event in a description: 1 iff every interval is
/// satisfied. An empty interval map accepts every event.
pub fn event_membership(event: &[f64], description: &PopulationDescription) -> u8 {
    if description.satisfies(event) {
        1
    } else {
        0
    }
}

/// Fraction of a case's events inside the description.
pub fn case_frequency<'a, I>(events: I, description: &PopulationDescription) -> Result<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut total = 0usize;
    let mut hits = 0usize;
    for e in events {
        total += 1;
        hits += event_membership(e, description) as usize;
    }
    if total == 0 {
        return Err(AlpodsError::Input("case with no events".into()));
    }
    Ok(hits as f64 / total as f64)
}

/// Calibrate a population classifier from per-class frequency lists.
///
/// Calibration is one-vs-rest: the class with the largest mean frequency is
/// the target, every other class is pooled. Densities are KDE estimates on a
/// 101-point grid over [0,1] with an ε floor; many() is the posterior of the
/// target class, few() its complement.
pub fn calibrate(
    description: PopulationDescription,
    freqs_by_class: &[Vec<f64>],
    priors: &[f64],
) -> Result<PopulationClassifier> {
    if freqs_by_class.iter().any(|f| f.is_empty()) {
        return Err(AlpodsError::Input("class with no cases".into()));
    }
    let k = freqs_by_class.len();
    if k < 2 || priors.len() != k {
        return Err(AlpodsError::Input("need >= 2 classes with priors".into()));
    }
    let grid: Vec<f64> = (0..FREQ_GRID).map(|i| i as f64 / (FREQ_GRID - 1) as f64).collect();

    let means: Vec<f64> = freqs_by_class
        .iter()
        .map(|f| f.iter().sum::<f64>() / f.len() as f64)
        .collect();
    let mut high = 0usize;
    for c in 1..k {
        if means[c] > means[high] {
            high = c;
        }
    }
    let rest: Vec<f64> = freqs_by_class
        .iter()
        .enumerate()
        .filter(|&(c, _)| c != high)
        .flat_map(|(_, f)| f.iter().copied())
        .collect();
    let rest_mean = rest.iter().sum::<f64>() / rest.len() as f64;
    let informative = means[high] > rest_mean;
    let two_priors = [priors[high], 1.0 - priors[high]];

    let mut densities: Vec<Vec<f64>> = Vec::with_capacity(2);
    for freqs in [&freqs_by_class[high], &rest] {
        // floor the bandwidth so near-constant frequency samples still give
        // a usable membership slope over [0,1]
        let h = silverman_bandwidth(freqs).max(0.05);
        let mut pdf = kde_on_grid(freqs, &grid, h);
        // trapezoid-normalize over [0,1], then floor
        let mut integral = 0.0;
        for i in 1..grid.len() {
            integral += 0.5 * (pdf[i] + pdf[i - 1]) * (grid[i] - grid[i - 1]);
        }
        if integral > 0.0 {
            for v in pdf.iter_mut() {
                *v /= integral;
            }
        }
        for v in pdf.iter_mut() {
            *v += DENSITY_FLOOR;
        }
        densities.push(pdf);
    }

    let many_values: Vec<f64> = (0..FREQ_GRID)
        .map(|i| {
            let num = two_priors[0] * densities[0][i];
            num / (num + two_priors[1] * densities[1][i])
        })
        .collect();
    let few_values: Vec<f64> = many_values.iter().map(|m| 1.0 - m).collect();
    let indecisive = indecisive_band(&grid, &many_values);

    Ok(PopulationClassifier {
        description,
        high_class: high,
        informative,
        many: MembershipFunction {
            grid: grid.clone(),
            values: many_values,
            tag: "many".into(),
            indecisive_band: indecisive,
        },
        few: MembershipFunction {
            grid,
            values: few_values,
            tag: "few".into(),
            indecisive_band: indecisive,
        },
        priors: two_priors.to_vec(),
    })
}

fn indecisive_band(grid: &[f64], many: &[f64]) -> Option<(f64, f64)> {
    let mut lo = None;
    let mut hi = None;
    for (i, &m) in many.iter().enumerate() {
        if m > INDECISIVE_LO && m < INDECISIVE_HI {
            if lo.is_none() {
                lo = Some(grid[i]);
            }
            hi = Some(grid[i]);
        }
    }
    match (lo, hi) {
        (Some(a), Some(b)) => Some((a, b)),
        _ => None,
    }
}

/// Calibrate a classifier from a training table: frequencies are computed per
/// case, grouped by class; priors are class case-count proportions.
pub fn calibrate_from_table(
    description: PopulationDescription,
    table: &EventTable,
) -> Result<PopulationClassifier> {
    let k = table.classes().len();
    let mut freqs_by_class: Vec<Vec<f64>> = vec![Vec::new(); k];
    for case in table.cases() {
        let f = case_frequency(
            case.rows.iter().map(|&r| table.event(r as usize)),
            &description,
        )?;
        freqs_by_class[case.class].push(f);
    }
    let total = table.n_cases() as f64;
    let priors: Vec<f64> = freqs_by_class.iter().map(|f| f.len() as f64 / total).collect();
    calibrate(description, &freqs_by_class, &priors)
}

/// One population's contribution to a case verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExplanationEntry {
    pub population_id: usize,
    pub rule: String,
    pub observed_frequency: f64,
    /// "many" or "few", whichever side the observed frequency falls on
    pub term: String,
    pub degree: f64,
    /// voted class label; `None` when the expert was indecisive
    pub vote: Option<String>,
}

/// Per-case verdict with pro/contra linguistic explanations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseExplanation {
    pub case_id: String,
    pub predicted_class: String,
    pub entries: Vec<ExplanationEntry>,
    pub pro: Vec<String>,
    pub contra: Vec<String>,
}

impl CaseExplanation {
    pub fn render_text(&self) -> String {
        let mut s = format!("case {} -> {}\n", self.case_id, self.predicted_class);
        for e in &self.entries {
            let vote = e.vote.as_deref().unwrap_or("indecisive");
            s.push_str(&format!(
                "  {}(Pop {}: {}) degree {:.3}, f={:.3}, vote {}\n",
                e.term, e.population_id, e.rule, e.degree, e.observed_frequency, vote
            ));
        }
        if !self.pro.is_empty() {
            s.push_str(&format!("  pro:    {}\n", self.pro.join(" and ")));
        }
        if !self.contra.is_empty() {
            s.push_str(&format!("  contra: {}\n", self.contra.join(" and ")));
        }
        s
    }
}

/// Classify one case from its per-population frequencies.
///
/// Each informative expert compares many() against few() at the observed
/// frequency (exact ties are indecisive and abstain). A many() win is a vote
/// for the expert's class; a few() win votes for the complement — the other
/// class with two classes, otherwise an elimination vote against the
/// expert's class. Majority of class votes wins; ties break by the Mamdani
/// min-conjunction of supporting degrees, then by the lexicographically
/// smallest class label. Without any class vote, the surviving
/// (non-eliminated) class is chosen; if none survives, the class with the
/// weakest elimination evidence.
pub fn classify_case(
    case_id: &str,
    frequencies: &[f64],
    classifiers: &[PopulationClassifier],
    class_labels: &[String],
) -> Result<(usize, CaseExplanation)> {
    let informative: Vec<(usize, &PopulationClassifier)> = classifiers
        .iter()
        .enumerate()
        .filter(|(_, c)| c.informative)
        .collect();
    if informative.is_empty() {
        return Err(AlpodsError::Abstain("no informative classifier".into()));
    }
    let k = class_labels.len();
    let mut votes = vec![0i64; k];
    // min supporting degree per class (Mamdani conjunction)
    let mut support = vec![f64::INFINITY; k];
    // elimination votes per class: count and strongest degree
    let mut against = vec![0i64; k];
    let mut against_deg = vec![0.0f64; k];
    let mut entries = Vec::with_capacity(informative.len());

    for &(i, clf) in &informative {
        let f = frequencies[i];
        let many_deg = clf.many.degree(f);
        let decided = (many_deg - 0.5).abs() > 1e-9;
        let high = clf.high_class;
        let (term, degree, vote): (&str, f64, Option<String>) = if !decided {
            let t = if many_deg >= 0.5 { "many" } else { "few" };
            (t, many_deg.max(1.0 - many_deg), None)
        } else if many_deg > 0.5 {
            votes[high] += 1;
            support[high] = support[high].min(many_deg);
            ("many", many_deg, Some(class_labels[high].clone()))
        } else if k == 2 {
            let other = 1 - high;
            votes[other] += 1;
            support[other] = support[other].min(1.0 - many_deg);
            ("few", 1.0 - many_deg, Some(class_labels[other].clone()))
        } else {
            against[high] += 1;
            against_deg[high] = against_deg[high].max(1.0 - many_deg);
            ("few", 1.0 - many_deg, Some(format!("not({})", class_labels[high])))
        };
        entries.push(ExplanationEntry {
            population_id: clf.description.id,
            rule: clf.description.rule_text(),
            observed_frequency: f,
            term: term.into(),
            degree,
            vote,
        });
    }

    // majority of positive votes; ties break by fewest elimination votes,
    // then the Mamdani min-conjunction of supporting degrees, then the
    // weakest elimination evidence, then lexicographically
    let max_votes = votes.iter().copied().max().unwrap();
    let tied: Vec<usize> = (0..k).filter(|&c| votes[c] == max_votes).collect();
    let predicted = *tied
        .iter()
        .max_by(|&&a, &&b| {
            let sa = if support[a].is_finite() { support[a] } else { 0.0 };
            let sb = if support[b].is_finite() { support[b] } else { 0.0 };
            against[b]
                .cmp(&against[a])
                .then(sa.partial_cmp(&sb).unwrap())
                .then(against_deg[b].partial_cmp(&against_deg[a]).unwrap())
                .then(b.cmp(&a))
        })
        .unwrap();

    let mut pro = Vec::new();
    let mut contra = Vec::new();
    for e in &entries {
        let phrase = format!("{}(Pop {})", e.term, e.population_id);
        let supports = match e.vote.as_deref() {
            Some(v) if v == class_labels[predicted] => true,
            // an elimination of another class is consistent with the verdict
            Some(v) => v.starts_with("not(") && v != format!("not({})", class_labels[predicted]).as_str(),
            None => false,
        };
        if supports {
            pro.push(phrase);
        } else {
            contra.push(phrase);
        }
    }

    let explanation = CaseExplanation {
        case_id: case_id.to_string(),
        predicted_class: class_labels[predicted].clone(),
        entries,
        pro,
        contra,
    };
    Ok((predicted, explanation))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::describe::VarInterval;

    fn desc(id: usize, intervals: Vec<VarInterval>) -> PopulationDescription {
        PopulationDescription {
            id,
            source_node: id,
            class: 0,
            class_label: "A".into(),
            intervals,
            effect_size: 1.0,
            mean_case_frequency: vec![0.5, 0.5],
        }
    }

    fn iv(variable: usize, lower: f64, upper: f64) -> VarInterval {
        VarInterval {
            variable,
            marker: format!("m{variable}"),
            lower,
            upper,
            token: String::new(),
        }
    }

    #[test]
    fn event_membership_conjunction() {
        let d = desc(1, vec![iv(0, 0.0, 1.0), iv(1, f64::NEG_INFINITY, 5.0)]);
        assert_eq!(event_membership(&[0.5, 2.0], &d), 1);
        assert_eq!(event_membership(&[1.5, 2.0], &d), 0);
        assert_eq!(event_membership(&[0.5, 6.0], &d), 0);
        // empty conjunction accepts everything
        let vacuous = desc(2, Vec::new());
        assert_eq!(event_membership(&[99.0, -99.0], &vacuous), 1);
    }

    #[test]
    fn case_frequency_values() {
        let d = desc(1, vec![iv(0, 0.0, 1.0)]);
        let rows: Vec<Vec<f64>> = vec![vec![0.5], vec![0.7], vec![2.0], vec![0.2]];
        let f = case_frequency(rows.iter().map(|r| r.as_slice()), &d).unwrap();
        assert!((f - 0.75).abs() < 1e-12);
        // single-event case is 0 or 1
        let f1 = case_frequency([vec![0.5].as_slice()], &d).unwrap();
        assert_eq!(f1, 1.0);
    }

    #[test]
    fn calibrate_separated_classes() {
        let d = desc(1, Vec::new());
        let a = vec![1.0; 30];
        let b = vec![0.0; 30];
        let clf = calibrate(d, &[a, b], &[0.5, 0.5]).unwrap();
        assert!(clf.informative);
        assert_eq!(clf.high_class, 0);
        assert!(clf.many.degree(0.98) > 0.9);
        assert!(clf.many.degree(0.02) < 0.1);
        // many + few = 1 pointwise
        for i in 0..clf.many.grid.len() {
            assert!((clf.many.values[i] + clf.few.values[i] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn identical_distributions_are_uninformative() {
        let d = desc(1, Vec::new());
        let a = vec![0.3, 0.4, 0.5];
        let clf = calibrate(d, &[a.clone(), a], &[0.5, 0.5]).unwrap();
        assert!(!clf.informative);
    }

    #[test]
    fn overlapping_densities_have_indecisive_band() {
        let d = desc(1, Vec::new());
        let a: Vec<f64> = (0..40).map(|i| 0.3 + 0.4 * (i as f64 / 39.0)).collect();
        let b: Vec<f64> = (0..40).map(|i| 0.1 + 0.4 * (i as f64 / 39.0)).collect();
        let clf = calibrate(d, &[a, b], &[0.5, 0.5]).unwrap();
        assert!(clf.many.indecisive_band.is_some());
        let (lo, hi) = clf.many.indecisive_band.unwrap();
        assert!(lo <= hi);
    }

    fn two_class_classifier(id: usize, flip: bool) -> PopulationClassifier {
        let d = desc(id, Vec::new());
        let (a, b) = if flip {
            (vec![0.0; 20], vec![1.0; 20])
        } else {
            (vec![1.0; 20], vec![0.0; 20])
        };
        calibrate(d, &[a, b], &[0.5, 0.5]).unwrap()
    }

    #[test]
    fn majority_vote_wins() {
        let labels = vec!["A".to_string(), "B".to_string()];
        let clfs: Vec<_> = (0..5).map(|i| two_class_classifier(i, false)).collect();
        // 4 classifiers see high frequency (vote A), one low (vote B)
        let freqs = vec![0.95, 0.9, 0.92, 0.97, 0.05];
        let (pred, expl) = classify_case("c1", &freqs, &clfs, &labels).unwrap();
        assert_eq!(labels[pred], "A");
        assert_eq!(expl.pro.len(), 4);
        assert_eq!(expl.contra.len(), 1);
        for e in &expl.entries {
            assert!((0.0..=1.0).contains(&e.degree));
        }
    }

    #[test]
    fn tie_breaks_by_min_conjunction() {
        let labels = vec!["A".to_string(), "B".to_string()];
        let clfs = vec![two_class_classifier(1, false), two_class_classifier(2, false)];
        // one votes A with high degree, the other votes B with weaker degree
        let freqs = vec![0.99, 0.35];
        let (pred, _) = classify_case("c", &freqs, &clfs, &labels).unwrap();
        assert_eq!(labels[pred], "A");
    }

    #[test]
    fn permutation_invariant() {
        let labels = vec!["A".to_string(), "B".to_string()];
        let clfs = vec![
            two_class_classifier(1, false),
            two_class_classifier(2, true),
            two_class_classifier(3, false),
        ];
        let freqs = vec![0.9, 0.8, 0.2];
        let (p1, _) = classify_case("c", &freqs, &clfs, &labels).unwrap();
        let perm_clfs = vec![clfs[2].clone(), clfs[0].clone(), clfs[1].clone()];
        let perm_freqs = vec![freqs[2], freqs[0], freqs[1]];
        let (p2, _) = classify_case("c", &perm_freqs, &perm_clfs, &labels).unwrap();
        assert_eq!(p1, p2);
    }

    #[test]
    fn no_informative_classifier_abstains() {
        let labels = vec!["A".to_string(), "B".to_string()];
        let d = desc(1, Vec::new());
        let a = vec![0.5, 0.5];
        let clf = calibrate(d, &[a.clone(), a], &[0.5, 0.5]).unwrap();
        let err = classify_case("c", &[0.5], &[clf], &labels).unwrap_err();
        assert!(matches!(err, AlpodsError::Abstain(_)));
    }

    #[test]
    fn monotone_many_for_ordered_unimodal_inputs() {
        let d = desc(1, Vec::new());
        let a: Vec<f64> = (0..50).map(|i| 0.7 + 0.2 * (i as f64 / 49.0)).collect();
        let b: Vec<f64> = (0..50).map(|i| 0.1 + 0.2 * (i as f64 / 49.0)).collect();
        let clf = calibrate(d, &[a, b], &[0.5, 0.5]).unwrap();
        // non-decreasing between the two modes
        let vals = &clf.many.values;
        let grid = &clf.many.grid;
        for i in 1..vals.len() {
            if grid[i] >= 0.2 && grid[i] <= 0.8 {
                assert!(vals[i] >= vals[i - 1] - 1e-6, "at {}", grid[i]);
            }
        }
    }
}
