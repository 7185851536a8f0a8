//! One-shot analysis: synthesis, Kalman inequalities, small-gain
//! certificate, gain and phase margins, checked against the guarantees.

use std::fmt::Write as _;

use anyhow::Result;
use declqr::linalg::spectral_norm;
use declqr::robustness::{
    decentralized_kalman_check, gain_margin, mu_upper_bound, phase_margin, DEFAULT_GAIN_TOL,
    DEFAULT_GAIN_WINDOW, DEFAULT_PHASE_TOL,
};
use declqr::synthesis::{closed_loop_matrix, synthesize};
use declqr::{DecentralizedController, FrequencyGrid, PartitionedPlant};
use serde::Serialize;

use crate::output::fmt_g;
use crate::scenario::{from_matrix, Scenario};

/// Kalman margins must exceed `-KALMAN_TOL·‖R_des‖`.
pub const KALMAN_TOL: f64 = 1e-8;
/// Slack on the small-gain bound.
pub const MU_TOL: f64 = 1e-6;
/// Guaranteed gain margin lower end.
pub const GUARANTEED_GAIN: f64 = 0.5;
/// Guaranteed phase margin, degrees.
pub const GUARANTEED_PHASE_DEG: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub grid_points: usize,
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub gain_window: (f64, f64),
    pub gain_tol: f64,
    pub phase_tol_deg: f64,
    pub phase_margins: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions {
            grid_points: 400,
            grid_lo: 1e-4,
            grid_hi: 1e4,
            gain_window: DEFAULT_GAIN_WINDOW,
            gain_tol: DEFAULT_GAIN_TOL,
            phase_tol_deg: DEFAULT_PHASE_TOL,
            phase_margins: true,
        }
    }
}

impl AnalysisOptions {
    pub fn for_scenario(scenario: &Scenario) -> Self {
        let mut o = AnalysisOptions::default();
        if let Some(g) = scenario.grid {
            o.grid_points = g.points;
            o.grid_lo = g.lo;
            o.grid_hi = g.hi;
        }
        o
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hypotheses {
    pub b_block_diagonal: bool,
    pub r_block_diagonal: bool,
    pub notes: Vec<String>,
}

impl Hypotheses {
    pub fn hold(&self) -> bool {
        self.b_block_diagonal && self.r_block_diagonal
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeSynthesis {
    /// 1-based.
    pub node: usize,
    pub descendants: Vec<usize>,
    pub gain: Vec<Vec<f64>>,
    pub riccati_residual: f64,
    pub closed_loop_abscissa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeKalman {
    pub node: usize,
    pub min_eigenvalue: f64,
    pub worst_frequency: f64,
    pub threshold: f64,
    pub skipped_frequencies: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuReport {
    pub per_node_mii: Vec<f64>,
    pub per_node_full: Vec<f64>,
    pub overall_bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GainMarginEntry {
    pub channel: usize,
    pub k_lo: f64,
    pub k_hi: f64,
    pub db_lo: f64,
    pub db_hi: f64,
    pub lower_window_limited: bool,
    pub upper_window_limited: bool,
    /// Whether the interval contains `(0.5, window max]`; absent when the
    /// hypotheses fail.
    pub guarantee_pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseMarginEntry {
    pub channel: usize,
    pub phase_deg: Option<f64>,
    pub window_limited: bool,
    pub grid_certified: bool,
    pub error: Option<String>,
    pub guarantee_pass: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub scenario: String,
    pub nodes: usize,
    pub states: usize,
    pub inputs: usize,
    pub controller_states: usize,
    pub nominal_abscissa: f64,
    pub hypotheses: Hypotheses,
    pub synthesis: Vec<NodeSynthesis>,
    pub kalman: Vec<NodeKalman>,
    pub mu: Option<MuReport>,
    pub gain_margins: Vec<GainMarginEntry>,
    pub phase_margins: Vec<PhaseMarginEntry>,
    /// All guarantees checked and met; absent when the hypotheses fail.
    pub guarantees_pass: Option<bool>,
}

impl AnalysisReport {
    pub fn hypothesis_violated(&self) -> bool {
        !self.hypotheses.hold()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "scenario: {}", self.scenario);
        let _ = writeln!(
            s,
            "nodes {}, states {}, inputs {}, controller states {}",
            self.nodes, self.states, self.inputs, self.controller_states
        );
        let _ = writeln!(s, "nominal closed-loop abscissa: {}", fmt_g(self.nominal_abscissa));
        for note in &self.hypotheses.notes {
            let _ = writeln!(s, "note: {note}");
        }
        let _ = writeln!(s, "\nsynthesis");
        for n in &self.synthesis {
            let _ = writeln!(
                s,
                "  node {}: descendants {:?}, residual {}, abscissa {}",
                n.node,
                n.descendants,
                fmt_g(n.riccati_residual),
                fmt_g(n.closed_loop_abscissa)
            );
        }
        let _ = writeln!(s, "\nper-node Kalman inequalities");
        for k in &self.kalman {
            let _ = writeln!(
                s,
                "  node {}: min eig {} at w = {} (threshold {}) {}",
                k.node,
                fmt_g(k.min_eigenvalue),
                fmt_g(k.worst_frequency),
                fmt_g(k.threshold),
                verdict(k.pass)
            );
        }
        match &self.mu {
            Some(m) => {
                let _ = writeln!(s, "\nsmall-gain bound");
                for (i, (a, b)) in m.per_node_mii.iter().zip(&m.per_node_full).enumerate() {
                    let _ = writeln!(
                        s,
                        "  node {}: diagonal block {}, full block {}",
                        i + 1,
                        fmt_g(*a),
                        fmt_g(*b)
                    );
                }
                let _ = writeln!(s, "  overall {} {}", fmt_g(m.overall_bound), verdict(m.pass));
            }
            None => {
                let _ = writeln!(s, "\nsmall-gain bound: not applicable");
            }
        }
        let _ = writeln!(s, "\ngain margins");
        for g in &self.gain_margins {
            let hi = if g.upper_window_limited {
                format!("{} (window max)", fmt_g(g.k_hi))
            } else {
                fmt_g(g.k_hi)
            };
            let _ = writeln!(
                s,
                "  channel {}: k in ({}, {}], dB ({}, {}) {}",
                g.channel,
                fmt_g(g.k_lo),
                hi,
                fmt_g(g.db_lo),
                fmt_g(g.db_hi),
                opt_verdict(g.guarantee_pass)
            );
        }
        if !self.phase_margins.is_empty() {
            let _ = writeln!(s, "\nphase margins");
        }
        for p in &self.phase_margins {
            match (p.phase_deg, &p.error) {
                (Some(phi), _) => {
                    let _ = writeln!(
                        s,
                        "  channel {}: +/-{} deg{} {}",
                        p.channel,
                        fmt_g(phi),
                        if p.window_limited { " (window max)" } else { "" },
                        opt_verdict(p.guarantee_pass)
                    );
                }
                (None, Some(e)) => {
                    let _ = writeln!(s, "  channel {}: unavailable ({e})", p.channel);
                }
                (None, None) => {}
            }
        }
        let _ = writeln!(
            s,
            "\nguarantees: {}",
            match self.guarantees_pass {
                Some(true) => "all pass",
                Some(false) => "FAIL",
                None => "not applicable (hypothesis violated)",
            }
        );
        s
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "FAIL"
    }
}

fn opt_verdict(pass: Option<bool>) -> &'static str {
    match pass {
        Some(p) => verdict(p),
        None => "",
    }
}

fn hypotheses(plant: &PartitionedPlant) -> Hypotheses {
    let mut notes = Vec::new();
    let b = plant.b_off_diagonal();
    let r = plant.r_off_diagonal();
    if let Some(v) = &b {
        notes.push(format!(
            "B not block-diagonal (block ({}, {}) has norm {}): robustness guarantees not applicable",
            v.row + 1,
            v.col + 1,
            fmt_g(v.norm)
        ));
    }
    if let Some(v) = &r {
        notes.push(format!(
            "R not block-diagonal (block ({}, {}) has norm {}): robustness guarantees not applicable",
            v.row + 1,
            v.col + 1,
            fmt_g(v.norm)
        ));
    }
    Hypotheses {
        b_block_diagonal: b.is_none(),
        r_block_diagonal: r.is_none(),
        notes,
    }
}

fn grid(opts: &AnalysisOptions) -> Result<FrequencyGrid> {
    let g = FrequencyGrid::log_spaced(opts.grid_points, opts.grid_lo, opts.grid_hi)?;
    let mut pts = vec![0.0];
    pts.extend_from_slice(g.points());
    Ok(FrequencyGrid::new(pts)?)
}

/// Gain margin entries for every channel.
pub fn gain_margins(
    plant: &PartitionedPlant,
    ctrl: &DecentralizedController,
    opts: &AnalysisOptions,
    check_guarantee: bool,
) -> Result<Vec<GainMarginEntry>> {
    (0..plant.node_count())
        .map(|ch| {
            let rep = gain_margin(plant, ctrl, ch, opts.gain_window, opts.gain_tol)?;
            let (k_lo, k_hi) = rep.gain_interval.expect("gain report");
            let (db_lo, db_hi) = rep.gain_interval_db.expect("gain report");
            Ok(GainMarginEntry {
                channel: ch + 1,
                k_lo,
                k_hi,
                db_lo,
                db_hi,
                lower_window_limited: rep.lower_window_limited,
                upper_window_limited: rep.upper_window_limited,
                guarantee_pass: check_guarantee
                    .then_some(k_lo <= GUARANTEED_GAIN + opts.gain_tol && rep.upper_window_limited),
            })
        })
        .collect()
}

/// Phase margin entries for every channel; Nyquist failures are recorded.
pub fn phase_margins(
    plant: &PartitionedPlant,
    ctrl: &DecentralizedController,
    opts: &AnalysisOptions,
    check_guarantee: bool,
) -> Vec<PhaseMarginEntry> {
    (0..plant.node_count())
        .map(|ch| match phase_margin(plant, ctrl, ch, opts.phase_tol_deg) {
            Ok(rep) => {
                let phi = rep.phase_deg.expect("phase report");
                PhaseMarginEntry {
                    channel: ch + 1,
                    phase_deg: Some(phi),
                    window_limited: rep.phase_window_limited,
                    grid_certified: rep.grid_certified,
                    error: None,
                    guarantee_pass: check_guarantee
                        .then_some(phi >= GUARANTEED_PHASE_DEG - opts.phase_tol_deg),
                }
            }
            Err(e) => PhaseMarginEntry {
                channel: ch + 1,
                phase_deg: None,
                window_limited: false,
                grid_certified: false,
                error: Some(e.to_string()),
                guarantee_pass: None,
            },
        })
        .collect()
}

pub fn analyze(scenario: &Scenario, opts: &AnalysisOptions) -> Result<AnalysisReport> {
    let plant = scenario.plant()?;
    let ctrl = synthesize(&plant)?;
    let hyp = hypotheses(&plant);
    let holds = hyp.hold();

    let synthesis_rows = ctrl
        .nodes
        .iter()
        .map(|nc| {
            let care = nc.care.as_ref().expect("synthesized");
            NodeSynthesis {
                node: nc.node + 1,
                descendants: nc.descendants.iter().map(|d| d + 1).collect(),
                gain: from_matrix(&nc.gain),
                riccati_residual: care.residual,
                closed_loop_abscissa: care.closed_loop_abscissa,
            }
        })
        .collect();

    let margins = decentralized_kalman_check(&plant, &ctrl, &grid(opts)?)?;
    let kalman: Vec<NodeKalman> = margins
        .iter()
        .enumerate()
        .map(|(i, m)| {
            let r_des = plant.subsystem(i).expect("valid node").r;
            let threshold = -KALMAN_TOL * spectral_norm(&r_des);
            NodeKalman {
                node: i + 1,
                min_eigenvalue: m.min_eigenvalue,
                worst_frequency: m.worst_frequency,
                threshold,
                skipped_frequencies: m.skipped.len(),
                pass: m.min_eigenvalue >= threshold,
            }
        })
        .collect();

    let mu = if holds {
        let cert = mu_upper_bound(&plant, &ctrl)?;
        Some(MuReport {
            pass: cert.overall_bound <= 1.0 + MU_TOL,
            per_node_mii: cert.per_node_mii,
            per_node_full: cert.per_node_full,
            overall_bound: cert.overall_bound,
        })
    } else {
        None
    };

    let gm = gain_margins(&plant, &ctrl, opts, holds)?;
    let pm = if opts.phase_margins {
        phase_margins(&plant, &ctrl, opts, holds)
    } else {
        Vec::new()
    };

    let guarantees_pass = holds.then(|| {
        kalman.iter().all(|k| k.pass)
            && mu.as_ref().is_some_and(|m| m.pass)
            && gm.iter().all(|g| g.guarantee_pass == Some(true))
            && pm.iter().all(|p| p.guarantee_pass != Some(false))
    });

    let acl = closed_loop_matrix(&plant, ctrl.realization(), None)?;
    Ok(AnalysisReport {
        scenario: scenario.label().to_string(),
        nodes: plant.node_count(),
        states: plant.states(),
        inputs: plant.inputs(),
        controller_states: ctrl.realization().states(),
        nominal_abscissa: declqr::linalg::eigenvalues(&acl)?.spectral_abscissa,
        hypotheses: hyp,
        synthesis: synthesis_rows,
        kalman,
        mu,
        gain_margins: gm,
        phase_margins: pm,
        guarantees_pass,
    })
}
