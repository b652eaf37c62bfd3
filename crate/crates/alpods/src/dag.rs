//! Recursive growth of the Bayesian decision DAG: condition enumeration per
//! variable, Simpson-index gating, termination, deduplication of descendant
//! populations and leaf labeling by majority vote.

use std::collections::BTreeMap;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::EventTable;
use crate::density::{bayes_regions, posterior_curves, DEFAULT_GRID_POINTS};
use crate::error::{AlpodsError, Result};

/// Serialize unbounded interval ends as `null` (JSON has no infinities).
pub mod lower_bound_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

/// Serialize unbounded upper ends as `null`.
pub mod upper_bound_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

/// A half-open interval condition on one variable: `lower < x <= upper`,
/// asserting the Bayes-winning class inside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub variable: usize,
    #[serde(with = "lower_bound_serde")]
    pub lower: f64,
    #[serde(with = "upper_bound_serde")]
    pub upper: f64,
    pub class: usize,
    pub simpson_index: f64,
}

impl Condition {
    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        x > self.lower && x <= self.upper
    }
}

/// Canonical per-variable intersected intervals along a path; the DAG's
/// deduplication key.
pub type Signature = BTreeMap<usize, (f64, f64)>;

fn signature_key(sig: &Signature) -> Vec<(usize, u64, u64)> {
    sig.iter()
        .map(|(&v, &(a, b))| (v, a.to_bits(), b.to_bits()))
        .collect()
}

/// One node of the decision DAG, owning an event-ID population.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DagNode {
    pub id: usize,
    /// Event indices into the training table; not serialized (rebuilt data
    /// stays out of saved models).
    #[serde(skip)]
    pub population: Vec<u32>,
    pub population_size: usize,
    pub class_histogram: Vec<usize>,
    pub depth: usize,
    pub children: Vec<(Condition, usize)>,
    /// First-created incoming edge; `None` for the root.
    pub parent: Option<(usize, Condition)>,
    pub leaf_label: Option<usize>,
    /// Intersected path intervals (the dedup signature); rebuilt from the
    /// parent chain when needed, not serialized (JSON has no infinities).
    #[serde(skip)]
    pub signature: Signature,
}

/// Growth parameters with the documented defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GrowthParams {
    pub min_size_fraction: f64,
    pub max_depth: usize,
    pub si_threshold: f64,
    pub max_nodes: usize,
    pub max_children_per_variable: usize,
    pub min_region_support: f64,
    pub grid_points: usize,
    /// Use 1 − 2q(1−q) instead of 2q(1−q) as the index (complement reading).
    pub simpson_complement: bool,
}

impl Default for GrowthParams {
    fn default() -> Self {
        GrowthParams {
            min_size_fraction: 0.01,
            max_depth: 6,
            si_threshold: 0.02,
            max_nodes: 512,
            max_children_per_variable: 3,
            min_region_support: 0.05,
            grid_points: DEFAULT_GRID_POINTS,
            simpson_complement: false,
        }
    }
}

impl GrowthParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.min_size_fraction)
            || !(0.0..=0.5).contains(&self.si_threshold)
            || !(0.0..=1.0).contains(&self.min_region_support)
        {
            return Err(AlpodsError::Input("growth parameter out of range".into()));
        }
        if self.max_depth == 0 || self.max_nodes == 0 || self.max_children_per_variable == 0 {
            return Err(AlpodsError::Input("growth parameter must be positive".into()));
        }
        Ok(())
    }
}

/// The finished decision DAG.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dag {
    pub nodes: Vec<DagNode>,
    pub root: usize,
    pub params: GrowthParams,
}

impl Dag {
    /// Ids of all leaves (nodes with a label), root excluded.
    pub fn leaf_ids(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|n| n.leaf_label.is_some() && n.id != self.root)
            .map(|n| n.id)
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Probability that two independent draws with replacement from the parent
/// disagree on membership in the subpopulation: 2q(1−q).
pub fn simpson_index(parent_size: usize, sub_size: usize) -> Result<f64> {
    if parent_size == 0 {
        return Err(AlpodsError::Input("parent population empty".into()));
    }
    if sub_size > parent_size {
        return Err(AlpodsError::Input("subpopulation larger than parent".into()));
    }
    let q = sub_size as f64 / parent_size as f64;
    Ok(2.0 * q * (1.0 - q))
}

/// True iff the node is pure, below the size floor, or at the depth cap.
pub fn terminate(
    depth: usize,
    pop_size: usize,
    total_size: usize,
    class_histogram: &[usize],
    params: &GrowthParams,
) -> bool {
    let nonzero = class_histogram.iter().filter(|&&c| c > 0).count();
    nonzero <= 1
        || (pop_size as f64) < params.min_size_fraction * total_size as f64
        || depth >= params.max_depth
}

/// Majority class; ties break to the lowest class index (class indices are
/// lexicographic over labels).
pub fn classify_leaf(class_histogram: &[usize]) -> usize {
    let mut best = 0usize;
    for c in 1..class_histogram.len() {
        if class_histogram[c] > class_histogram[best] {
            best = c;
        }
    }
    best
}

fn histogram(table: &EventTable, population: &[u32]) -> Vec<usize> {
    let mut h = vec![0usize; table.classes().len()];
    for &r in population {
        h[table.class_of_event(r as usize)] += 1;
    }
    h
}

/// Enumerate candidate conditions for one variable at a node: Bayes decision
/// regions of the class posteriors, gated by support and Simpson index,
/// capped at `max_children_per_variable` ranked by SI descending.
pub fn enumerate_conditions(
    population: &[u32],
    class_histogram: &[usize],
    variable: usize,
    table: &EventTable,
    params: &GrowthParams,
) -> Vec<Condition> {
    let present: Vec<usize> = (0..class_histogram.len())
        .filter(|&c| class_histogram[c] > 0)
        .collect();
    if present.len() < 2 || population.is_empty() {
        return Vec::new();
    }

    let mut values_by_class: Vec<Vec<f64>> = vec![Vec::new(); present.len()];
    let mut node_values = Vec::with_capacity(population.len());
    for &r in population {
        let v = table.value(r as usize, variable);
        node_values.push(v);
        let class = table.class_of_event(r as usize);
        let slot = present.iter().position(|&c| c == class).unwrap();
        values_by_class[slot].push(v);
    }
    let total = population.len() as f64;
    let priors: Vec<f64> = present
        .iter()
        .map(|&c| class_histogram[c] as f64 / total)
        .collect();

    let curves = match posterior_curves(&values_by_class, &priors, params.grid_points) {
        Ok(c) => c,
        Err(_) => return Vec::new(),
    };
    let regions = bayes_regions(&curves, &node_values, params.min_region_support);

    let mut conditions: Vec<Condition> = Vec::new();
    for region in &regions {
        let inside = node_values
            .iter()
            .filter(|&&v| v > region.lower && v <= region.upper)
            .count();
        let q = inside as f64 / total;
        let si_raw = 2.0 * q * (1.0 - q);
        let si = if params.simpson_complement { 1.0 - si_raw } else { si_raw };
        if si < params.si_threshold {
            continue;
        }
        conditions.push(Condition {
            variable,
            lower: region.lower,
            upper: region.upper,
            class: present[region.winner],
            simpson_index: si,
        });
    }
    conditions.sort_by(|a, b| {
        b.simpson_index
            .partial_cmp(&a.simpson_index)
            .unwrap()
            .then(a.lower.partial_cmp(&b.lower).unwrap())
    });
    conditions.truncate(params.max_children_per_variable);
    conditions
}

fn intersect_signature(sig: &Signature, cond: &Condition) -> Signature {
    let mut out = sig.clone();
    let entry = out
        .entry(cond.variable)
        .or_insert((f64::NEG_INFINITY, f64::INFINITY));
    entry.0 = entry.0.max(cond.lower);
    entry.1 = entry.1.min(cond.upper);
    out
}

/// Grow the decision DAG from the full training table.
pub fn grow_dag(train: &EventTable, params: &GrowthParams) -> Result<Dag> {
    params.validate()?;
    if train.classes().is_empty() {
        return Err(AlpodsError::Input("no classes".into()));
    }
    let total = train.n_events();
    let root_pop: Vec<u32> = (0..total as u32).collect();
    let root_hist = histogram(train, &root_pop);

    let mut dag = Dag {
        nodes: vec![DagNode {
            id: 0,
            population_size: root_pop.len(),
            population: root_pop,
            class_histogram: root_hist,
            depth: 0,
            children: Vec::new(),
            parent: None,
            leaf_label: None,
            signature: Signature::new(),
        }],
        root: 0,
        params: params.clone(),
    };
    let mut registry: HashMap<Vec<(usize, u64, u64)>, usize> = HashMap::new();
    registry.insert(Vec::new(), 0);

    // breadth-first so the node budget spreads over every subtree instead of
    // starving late root children
    let mut queue = std::collections::VecDeque::from([0usize]);
    while let Some(node_id) = queue.pop_front() {
        let (pop, hist, depth, sig) = {
            let n = &dag.nodes[node_id];
            (
                n.population.clone(),
                n.class_histogram.clone(),
                n.depth,
                n.signature.clone(),
            )
        };
        if terminate(depth, pop.len(), total, &hist, params) {
            dag.nodes[node_id].leaf_label = Some(classify_leaf(&hist));
            continue;
        }

        // conditions over all variables; parallel per variable, result order
        // is canonical regardless of scheduling
        let per_var: Vec<Vec<Condition>> = (0..train.n_markers())
            .into_par_iter()
            .map(|v| enumerate_conditions(&pop, &hist, v, train, params))
            .collect();
        let mut conditions: Vec<Condition> = per_var.into_iter().flatten().collect();
        conditions.sort_by(|a, b| {
            a.variable
                .cmp(&b.variable)
                .then(a.lower.partial_cmp(&b.lower).unwrap())
        });

        let mut created: Vec<usize> = Vec::new();
        for cond in conditions {
            let sub: Vec<u32> = pop
                .iter()
                .copied()
                .filter(|&r| cond.contains(train.value(r as usize, cond.variable)))
                .collect();
            if sub.is_empty() || sub.len() == pop.len() {
                continue;
            }
            let child_sig = intersect_signature(&sig, &cond);
            let key = signature_key(&child_sig);
            if let Some(&existing) = registry.get(&key) {
                // already a descendant elsewhere in the DAG; link only when
                // the edge keeps depth strictly increasing
                if dag.nodes[existing].depth > depth {
                    dag.nodes[node_id].children.push((cond, existing));
                }
                continue;
            }
            if dag.nodes.len() >= params.max_nodes {
                break;
            }
            let child_hist = histogram(train, &sub);
            let child_id = dag.nodes.len();
            dag.nodes.push(DagNode {
                id: child_id,
                population_size: sub.len(),
                population: sub,
                class_histogram: child_hist,
                depth: depth + 1,
                children: Vec::new(),
                parent: Some((node_id, cond.clone())),
                leaf_label: None,
                signature: child_sig,
            });
            registry.insert(key, child_id);
            dag.nodes[node_id].children.push((cond, child_id));
            created.push(child_id);
        }

        if dag.nodes[node_id].children.is_empty() {
            // no surviving split; close as a leaf
            dag.nodes[node_id].leaf_label = Some(classify_leaf(&hist));
        }
        for &c in &created {
            queue.push_back(c);
        }
    }

    // nodes left unexpanded by the node cap still need labels
    for n in dag.nodes.iter_mut() {
        if n.children.is_empty() && n.leaf_label.is_none() {
            n.leaf_label = Some(classify_leaf(&n.class_histogram));
        }
    }
    Ok(dag)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_jittered_iris, EventTable};
    use proptest::prelude::*;

    fn two_blob_table(n_per: usize) -> EventTable {
        // class A around 0, class B around 10 on one variable
        let mut rows = Vec::new();
        let mut ids = Vec::new();
        let mut cls = Vec::new();
        for i in 0..n_per {
            rows.push(vec![(i as f64) / n_per as f64]);
            ids.push(format!("a{}", i % 5));
            cls.push("A".to_string());
            rows.push(vec![10.0 + (i as f64) / n_per as f64]);
            ids.push(format!("b{}", i % 5));
            cls.push("B".to_string());
        }
        EventTable::from_rows(vec!["m".into()], rows, ids, cls).unwrap()
    }

    #[test]
    fn simpson_closed_forms() {
        assert!((simpson_index(100, 50).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(simpson_index(100, 0).unwrap(), 0.0);
        assert!((simpson_index(200, 20).unwrap() - 0.18).abs() < 1e-15);
        assert!(simpson_index(10, 11).is_err());
    }

    #[test]
    fn simpson_matches_pair_enumeration() {
        // exhaustive ordered-pair count of disagreeing draws
        for parent in 1..=50usize {
            for sub in 0..=parent {
                let mut disagree = 0usize;
                for i in 0..parent {
                    for j in 0..parent {
                        let a = i < sub;
                        let b = j < sub;
                        if a != b {
                            disagree += 1;
                        }
                    }
                }
                let expect = disagree as f64 / (parent * parent) as f64;
                let got = simpson_index(parent, sub).unwrap();
                assert!((got - expect).abs() < 1e-12, "{parent} {sub}");
            }
        }
    }

    #[test]
    fn terminate_cases() {
        let p = GrowthParams::default();
        assert!(terminate(2, 40, 1000, &[40, 0], &p));
        assert!(terminate(2, 9, 1000, &[4, 5], &p));
        assert!(!terminate(2, 10, 1000, &[4, 6], &p));
        assert!(terminate(6, 500, 1000, &[200, 300], &p));
    }

    #[test]
    fn classify_leaf_majority_and_ties() {
        assert_eq!(classify_leaf(&[70, 30]), 0);
        assert_eq!(classify_leaf(&[50, 50]), 0);
        assert_eq!(classify_leaf(&[0, 0, 1]), 2);
    }

    #[test]
    fn conditions_for_separated_clusters() {
        let t = two_blob_table(200);
        let pop: Vec<u32> = (0..t.n_events() as u32).collect();
        let hist = vec![200usize, 200];
        let conds = enumerate_conditions(&pop, &hist, 0, &t, &GrowthParams::default());
        assert_eq!(conds.len(), 2);
        assert!(conds.iter().all(|c| (c.simpson_index - 0.5).abs() < 0.05));
        // boundary between the clusters
        let inner: Vec<f64> = conds
            .iter()
            .flat_map(|c| [c.lower, c.upper])
            .filter(|v| v.is_finite())
            .collect();
        assert!(inner.iter().all(|&b| b > 1.0 && b < 10.0));
    }

    #[test]
    fn constant_variable_gives_no_conditions() {
        let rows: Vec<Vec<f64>> = (0..100).map(|_| vec![3.0]).collect();
        let ids: Vec<String> = (0..100).map(|i| format!("c{}", i % 4)).collect();
        let cls: Vec<String> = (0..100)
            .map(|i| if i % 2 == 0 { "A".into() } else { "B".into() })
            .collect();
        let t = EventTable::from_rows(vec!["m".into()], rows, ids, cls).unwrap();
        let pop: Vec<u32> = (0..100).collect();
        let conds = enumerate_conditions(&pop, &[50, 50], 0, &t, &GrowthParams::default());
        assert!(conds.is_empty());
    }

    #[test]
    fn single_class_node_gives_no_conditions() {
        let t = two_blob_table(50);
        let pop: Vec<u32> = (0..t.n_events() as u32)
            .filter(|&r| t.class_of_event(r as usize) == 0)
            .collect();
        let conds = enumerate_conditions(&pop, &[50, 0], 0, &t, &GrowthParams::default());
        assert!(conds.is_empty());
    }

    #[test]
    fn grow_on_pure_table_is_single_leaf() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64]).collect();
        let ids: Vec<String> = (0..50).map(|i| format!("c{}", i % 3)).collect();
        let cls: Vec<String> = (0..50).map(|_| "only".into()).collect();
        let t = EventTable::from_rows(vec!["m".into()], rows, ids, cls).unwrap();
        let dag = grow_dag(&t, &GrowthParams::default()).unwrap();
        assert_eq!(dag.nodes.len(), 1);
        assert_eq!(dag.nodes[0].leaf_label, Some(0));
    }

    #[test]
    fn grow_two_blobs_pure_children() {
        let t = two_blob_table(300);
        let dag = grow_dag(&t, &GrowthParams::default()).unwrap();
        let root = &dag.nodes[dag.root];
        assert_eq!(root.children.len(), 2);
        for (_, cid) in &root.children {
            let child = &dag.nodes[*cid];
            assert_eq!(child.depth, 1);
            let nonzero = child.class_histogram.iter().filter(|&&c| c > 0).count();
            assert_eq!(nonzero, 1, "child not class-pure");
            assert!(child.leaf_label.is_some());
        }
    }

    #[test]
    fn child_population_is_exact_filter() {
        let (_, split) = generate_jittered_iris(2, 2, 0.1).unwrap();
        let dag = grow_dag(&split.train, &GrowthParams::default()).unwrap();
        for node in &dag.nodes {
            for (cond, cid) in &node.children {
                let expect: Vec<u32> = node
                    .population
                    .iter()
                    .copied()
                    .filter(|&r| cond.contains(split.train.value(r as usize, cond.variable)))
                    .collect();
                assert_eq!(expect, dag.nodes[*cid].population);
            }
        }
    }

    #[test]
    fn dag_is_acyclic_with_increasing_depth() {
        let (_, split) = generate_jittered_iris(3, 3, 0.1).unwrap();
        let dag = grow_dag(&split.train, &GrowthParams::default()).unwrap();
        for node in &dag.nodes {
            for (_, cid) in &node.children {
                assert!(dag.nodes[*cid].depth > node.depth);
            }
        }
        // every node reachable from root
        let mut seen = vec![false; dag.nodes.len()];
        let mut stack = vec![dag.root];
        while let Some(id) = stack.pop() {
            if seen[id] {
                continue;
            }
            seen[id] = true;
            for (_, cid) in &dag.nodes[id].children {
                stack.push(*cid);
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn leaves_labeled_internal_have_children() {
        let (_, split) = generate_jittered_iris(4, 3, 0.1).unwrap();
        let dag = grow_dag(&split.train, &GrowthParams::default()).unwrap();
        for node in &dag.nodes {
            if node.children.is_empty() {
                assert!(node.leaf_label.is_some());
            }
        }
    }

    #[test]
    fn grow_is_deterministic() {
        let (_, split) = generate_jittered_iris(5, 3, 0.1).unwrap();
        let a = grow_dag(&split.train, &GrowthParams::default()).unwrap();
        let b = grow_dag(&split.train, &GrowthParams::default()).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    proptest! {
        #[test]
        fn simpson_symmetric_and_peaked(sub in 0usize..=100) {
            let a = simpson_index(100, sub).unwrap();
            let b = simpson_index(100, 100 - sub).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            prop_assert!(a <= simpson_index(100, 50).unwrap() + 1e-12);
        }
    }
}
