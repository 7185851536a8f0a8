//! Subcommand bodies, shared by the binary and the tests.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use declqr::synthesis::synthesize;
use serde::Serialize;

use crate::analysis::{self, AnalysisOptions, AnalysisReport, GainMarginEntry, PhaseMarginEntry};
use crate::experiments::scenario_sweep;
use crate::output::{emit_csv, emit_svg_heatmap};
use crate::scenario::{from_matrix, Scenario};

/// Output directory: the flag, else the scenario's, else `out`.
pub fn out_dir(scenario: &Scenario, flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| scenario.output.as_ref()?.dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}

fn named(dir: &Path, configured: Option<&String>, default: &str) -> PathBuf {
    dir.join(configured.map_or(default, String::as_str))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::create_dir_all(path.parent().unwrap_or(Path::new(".")))
        .with_context(|| format!("creating directory for {}", path.display()))?;
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Runs the scenario's sweep and writes the CSV table and SVG heatmap.
pub fn sweep(scenario: &Scenario, dir: &Path) -> Result<(PathBuf, PathBuf, usize, usize)> {
    let region = scenario_sweep(scenario)?;
    let out = scenario.output.clone().unwrap_or_default();
    let csv = named(dir, out.csv.as_ref(), "sweep.csv");
    let svg = named(dir, out.svg.as_ref(), "sweep.svg");
    emit_csv(&region, &csv)?;
    emit_svg_heatmap(&region, &svg)?;
    Ok((csv, svg, region.stable_count(), region.cells.len()))
}

/// Runs the full analysis and writes the text report and its JSON twin.
pub fn analyze(
    scenario: &Scenario,
    opts: &AnalysisOptions,
    dir: &Path,
) -> Result<(AnalysisReport, PathBuf, PathBuf)> {
    let report = analysis::analyze(scenario, opts)?;
    let out = scenario.output.clone().unwrap_or_default();
    let json = named(dir, out.report.as_ref(), "analysis.json");
    let txt = json.with_extension("txt");
    write(&txt, &report.to_text())?;
    write(&json, &report.to_json())?;
    Ok((report, txt, json))
}

#[derive(Serialize)]
struct SynthNode {
    node: usize,
    descendants: Vec<usize>,
    gain: Vec<Vec<f64>>,
    riccati_solution: Vec<Vec<f64>>,
}

#[derive(Serialize)]
struct SynthOutput {
    scenario: String,
    nodes: Vec<SynthNode>,
    controller_a: Vec<Vec<f64>>,
    controller_b: Vec<Vec<f64>>,
    controller_c: Vec<Vec<f64>>,
    controller_d: Vec<Vec<f64>>,
}

/// Synthesizes the controller and writes its gains and realization.
pub fn synth(scenario: &Scenario, dir: &Path) -> Result<(String, PathBuf)> {
    let plant = scenario.plant()?;
    let ctrl = synthesize(&plant)?;
    let k = ctrl.realization();
    let doc = SynthOutput {
        scenario: scenario.label().to_string(),
        nodes: ctrl
            .nodes
            .iter()
            .map(|nc| SynthNode {
                node: nc.node + 1,
                descendants: nc.descendants.iter().map(|d| d + 1).collect(),
                gain: from_matrix(&nc.gain),
                riccati_solution: nc.care.as_ref().map_or_else(Vec::new, |c| from_matrix(&c.x)),
            })
            .collect(),
        controller_a: from_matrix(&k.a),
        controller_b: from_matrix(&k.b),
        controller_c: from_matrix(&k.c),
        controller_d: from_matrix(&k.d),
    };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    let path = dir.join("synthesis.json");
    write(&path, &text)?;
    Ok((text, path))
}

#[derive(Serialize)]
pub struct MarginsOutput {
    pub scenario: String,
    pub gain_margins: Vec<GainMarginEntry>,
    pub phase_margins: Vec<PhaseMarginEntry>,
}

/// Per-channel gain and phase margins.
pub fn margins(
    scenario: &Scenario,
    opts: &AnalysisOptions,
    dir: &Path,
) -> Result<(MarginsOutput, PathBuf)> {
    let plant = scenario.plant()?;
    let ctrl = synthesize(&plant)?;
    let holds = plant.b_off_diagonal().is_none() && plant.r_off_diagonal().is_none();
    let doc = MarginsOutput {
        scenario: scenario.label().to_string(),
        gain_margins: analysis::gain_margins(&plant, &ctrl, opts, holds)?,
        phase_margins: analysis::phase_margins(&plant, &ctrl, opts, holds),
    };
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    let path = dir.join("margins.json");
    write(&path, &text)?;
    Ok((doc, path))
}
