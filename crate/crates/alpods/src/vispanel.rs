//! Differential population visualization: ProbDiff scoring of variable
//! pairs, ABC-based panel selection and SVG scatter rendering with the
//! target population overlaid in red.

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::EventTable;
use crate::density::{sdh_2d_in_box, DensityGrid2D};
use crate::describe::computed_abc;
use crate::error::{AlpodsError, Result};

pub const DEFAULT_SDH_BINS: usize = 64;
pub const DEFAULT_SMOOTHING_PASSES: usize = 3;
pub const DEFAULT_MAX_PLOTS: usize = 6;
const MAX_BACKGROUND_POINTS: usize = 20_000;

const BACKGROUND_COLOR: &str = "#B0B0B0";
const POPULATION_COLOR: &str = "#D62728";

/// Ordered variable pairs with their ProbDiff scores.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PanelSpec {
    /// (x variable, y variable) with x < y; ordered by score descending
    pub pairs: Vec<(usize, usize)>,
    pub scores: Vec<f64>,
    pub max_plots: usize,
}

/// L1 difference between class-conditional SDHs over a shared bounding box.
///
/// Returns the scalar score together with both grids.
pub fn probdiff(
    table: &EventTable,
    class_mask: &[bool],
    pair: (usize, usize),
    bins: usize,
    smoothing_passes: usize,
) -> Result<(f64, DensityGrid2D, DensityGrid2D)> {
    if class_mask.len() != table.n_events() {
        return Err(AlpodsError::Input("class mask length mismatch".into()));
    }
    let (vx, vy) = pair;
    let mut in_x = Vec::new();
    let mut in_y = Vec::new();
    let mut out_x = Vec::new();
    let mut out_y = Vec::new();
    for r in 0..table.n_events() {
        let (x, y) = (table.value(r, vx), table.value(r, vy));
        if class_mask[r] {
            in_x.push(x);
            in_y.push(y);
        } else {
            out_x.push(x);
            out_y.push(y);
        }
    }
    if in_x.is_empty() || out_x.is_empty() {
        return Err(AlpodsError::Input("both event subsets must be non-empty".into()));
    }
    let range = |a: &[f64], b: &[f64]| {
        let lo = a.iter().chain(b).cloned().fold(f64::INFINITY, f64::min);
        let hi = a.iter().chain(b).cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    };
    let xr = range(&in_x, &out_x);
    let yr = range(&in_y, &out_y);
    let g_in = sdh_2d_in_box(&in_x, &in_y, bins, smoothing_passes, xr, yr)?;
    let g_out = sdh_2d_in_box(&out_x, &out_y, bins, smoothing_passes, xr, yr)?;
    let score: f64 = g_in
        .weights
        .iter()
        .zip(&g_out.weights)
        .map(|(a, b)| (a - b).abs())
        .sum();
    Ok((score, g_in, g_out))
}

/// Score all d(d−1)/2 pairs and keep the ABC A-set, capped at `max_plots`.
pub fn select_panel(
    table: &EventTable,
    class_mask: &[bool],
    bins: usize,
    smoothing_passes: usize,
    max_plots: usize,
) -> Result<PanelSpec> {
    let d = table.n_markers();
    if d < 2 {
        return Err(AlpodsError::Input("need at least 2 variables".into()));
    }
    let mut pairs = Vec::new();
    for x in 0..d {
        for y in (x + 1)..d {
            pairs.push((x, y));
        }
    }
    let scores: Vec<f64> = pairs
        .par_iter()
        .map(|&p| {
            probdiff(table, class_mask, p, bins, smoothing_passes)
                .map(|(s, _, _)| s)
                .unwrap_or(0.0)
        })
        .collect();

    let selected: Vec<usize> = if pairs.len() == 1 {
        vec![0]
    } else {
        let abc = computed_abc(&scores)?;
        abc.a
    };
    let mut chosen: Vec<(f64, (usize, usize))> =
        selected.iter().map(|&i| (scores[i], pairs[i])).collect();
    chosen.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    chosen.truncate(max_plots.max(1));
    Ok(PanelSpec {
        pairs: chosen.iter().map(|&(_, p)| p).collect(),
        scores: chosen.iter().map(|&(s, _)| s).collect(),
        max_plots,
    })
}

/// Manifest describing the rendered panel.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PanelManifest {
    pub population_id: usize,
    pub pairs: Vec<[String; 2]>,
    pub scores: Vec<f64>,
    pub files: Vec<String>,
    pub combined: String,
}

struct PlotGeometry {
    width: f64,
    height: f64,
    margin: f64,
}

fn fmt(v: f64) -> String {
    format!("{:.2}", v)
}

fn scatter_svg_body(
    table: &EventTable,
    background: &[u32],
    population: &[u32],
    pair: (usize, usize),
    geo: &PlotGeometry,
    offset_x: f64,
) -> String {
    let (vx, vy) = pair;
    let mut lo_x = f64::INFINITY;
    let mut hi_x = f64::NEG_INFINITY;
    let mut lo_y = f64::INFINITY;
    let mut hi_y = f64::NEG_INFINITY;
    for r in 0..table.n_events() {
        lo_x = lo_x.min(table.value(r, vx));
        hi_x = hi_x.max(table.value(r, vx));
        lo_y = lo_y.min(table.value(r, vy));
        hi_y = hi_y.max(table.value(r, vy));
    }
    if hi_x <= lo_x {
        hi_x = lo_x + 1.0;
    }
    if hi_y <= lo_y {
        hi_y = lo_y + 1.0;
    }
    let plot_w = geo.width - 2.0 * geo.margin;
    let plot_h = geo.height - 2.0 * geo.margin;
    let sx = |v: f64| offset_x + geo.margin + (v - lo_x) / (hi_x - lo_x) * plot_w;
    let sy = |v: f64| geo.margin + (1.0 - (v - lo_y) / (hi_y - lo_y)) * plot_h;

    let mut s = String::new();
    s.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#404040\"/>\n",
        fmt(offset_x + geo.margin),
        fmt(geo.margin),
        fmt(plot_w),
        fmt(plot_h)
    ));
    for &r in background {
        s.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"1\" fill=\"{}\"/>\n",
            fmt(sx(table.value(r as usize, vx))),
            fmt(sy(table.value(r as usize, vy))),
            BACKGROUND_COLOR
        ));
    }
    // population drawn last so it sits on top
    for &r in population {
        s.push_str(&format!(
            "<circle cx=\"{}\" cy=\"{}\" r=\"1.4\" fill=\"{}\"/>\n",
            fmt(sx(table.value(r as usize, vx))),
            fmt(sy(table.value(r as usize, vy))),
            POPULATION_COLOR
        ));
    }
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
        fmt(offset_x + geo.width / 2.0),
        fmt(geo.height - 6.0),
        table.markers()[vx]
    ));
    s.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 {} {})\">{}</text>\n",
        fmt(offset_x + 14.0),
        fmt(geo.height / 2.0),
        fmt(offset_x + 14.0),
        fmt(geo.height / 2.0),
        table.markers()[vy]
    ));
    s
}

/// Render one SVG per selected pair plus a combined side-by-side panel.
///
/// Background events are subsampled deterministically under `seed`; the
/// population is drawn in red on top.
pub fn render_panel(
    table: &EventTable,
    population: &[u32],
    population_id: usize,
    spec: &PanelSpec,
    out_dir: &Path,
    seed: u64,
) -> Result<PanelManifest> {
    std::fs::create_dir_all(out_dir)?;
    let geo = PlotGeometry {
        width: 360.0,
        height: 320.0,
        margin: 40.0,
    };

    let mut background: Vec<u32> = (0..table.n_events() as u32).collect();
    if background.len() > MAX_BACKGROUND_POINTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        background.shuffle(&mut rng);
        background.truncate(MAX_BACKGROUND_POINTS);
        background.sort_unstable();
    }

    let mut files = Vec::new();
    let mut pair_names = Vec::new();
    for (i, &pair) in spec.pairs.iter().enumerate() {
        let name = format!(
            "pop{}_{}_{}.svg",
            population_id,
            table.markers()[pair.0],
            table.markers()[pair.1]
        );
        let body = scatter_svg_body(table, &background, population, pair, &geo, 0.0);
        let svg = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\">\n{}</svg>\n",
            geo.width, geo.height, body
        );
        let path = out_dir.join(&name);
        std::fs::write(&path, svg)?;
        files.push(name);
        pair_names.push([
            table.markers()[pair.0].clone(),
            table.markers()[pair.1].clone(),
        ]);
        let _ = i;
    }

    // combined side-by-side panel
    let combined_name = format!("pop{}_panel.svg", population_id);
    let mut body = String::new();
    for (i, &pair) in spec.pairs.iter().enumerate() {
        body.push_str(&scatter_svg_body(
            table,
            &background,
            population,
            pair,
            &geo,
            i as f64 * geo.width,
        ));
    }
    let combined_svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\">\n{}</svg>\n",
        geo.width * spec.pairs.len().max(1) as f64,
        geo.height,
        body
    );
    std::fs::write(out_dir.join(&combined_name), combined_svg)?;

    Ok(PanelManifest {
        population_id,
        pairs: pair_names,
        scores: spec.scores.clone(),
        files,
        combined: combined_name,
    })
}

/// Convenience: the file paths a manifest refers to.
pub fn manifest_paths(manifest: &PanelManifest, out_dir: &Path) -> Vec<PathBuf> {
    manifest
        .files
        .iter()
        .chain(std::iter::once(&manifest.combined))
        .map(|f| out_dir.join(f))
        .collect()
}
