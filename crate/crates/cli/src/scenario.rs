//! Scenario documents: a plant over a DAG, a perturbation, an optional sweep.
//!
//! Node indices in scenario files are 1-based; the library API is 0-based.

use std::path::Path;

use anyhow::{anyhow, bail, ensure, Context, Result};
use declqr::linalg::min_symmetric_eigenvalue;
use declqr::{Dag, Matrix, PartitionedPlant};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub dag: DagSpec,
    pub matrices: MatrixSpec,
    #[serde(default)]
    pub perturbation: PerturbationSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DagSpec {
    pub nodes: usize,
    /// `[from, to]` pairs, 1-based, `from < to`.
    #[serde(default)]
    pub edges: Vec<[usize; 2]>,
    /// Per-node state sizes; all ones when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state_sizes: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_sizes: Option<Vec<usize>>,
}

/// `B(β) = B + β B_beta`, `R(ρ) = R + ρ R_rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    pub b: Vec<Vec<f64>>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<f64>>,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub rho: f64,
    #[serde(rename = "B_beta", default, skip_serializing_if = "Option::is_none")]
    pub b_beta: Option<Vec<Vec<f64>>>,
    #[serde(rename = "R_rho", default, skip_serializing_if = "Option::is_none")]
    pub r_rho: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    #[default]
    StaticRealGain,
    StaticComplexGain,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSpec {
    #[serde(default)]
    pub kind: PerturbationKind,
    /// One gain per node; all ones when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gains: Vec<f64>,
    /// One phase per node in degrees; zeros when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub phases_deg: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AxisName {
    Beta,
    Rho,
    KDb,
    PhiDeg,
}

impl AxisName {
    pub fn as_str(self) -> &'static str {
        match self {
            AxisName::Beta => "beta",
            AxisName::Rho => "rho",
            AxisName::KDb => "k_db",
            AxisName::PhiDeg => "phi_deg",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "beta" => AxisName::Beta,
            "rho" => AxisName::Rho,
            "k_db" => AxisName::KDb,
            "phi_deg" => AxisName::PhiDeg,
            _ => bail!("unknown axis {s:?} (expected beta, rho, k_db or phi_deg)"),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub name: AxisName,
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl AxisSpec {
    /// Evenly spaced values, endpoints included.
    pub fn values(&self) -> Vec<f64> {
        let step = (self.max - self.min) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    self.max
                } else {
                    self.min + step * i as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis1: AxisSpec,
    pub axis2: AxisSpec,
    /// Perturbed node, 1-based.
    #[serde(default = "one")]
    pub channel: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub points: usize,
    #[serde(default = "grid_lo")]
    pub lo: f64,
    #[serde(default = "grid_hi")]
    pub hi: f64,
}

fn grid_lo() -> f64 {
    1e-4
}

fn grid_hi() -> f64 {
    1e4
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
}

pub(crate) fn to_matrix(rows: &[Vec<f64>], name: &str) -> Result<Matrix> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    ensure!(
        rows.iter().all(|row| row.len() == c),
        "matrix {name}: rows have different lengths"
    );
    ensure!(
        rows.iter().flatten().all(|v| v.is_finite()),
        "matrix {name}: non-finite entry"
    );
    Ok(Matrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub(crate) fn from_matrix(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| {
            anyhow!(
                "scenario parse error at line {}, column {}: {e}",
                e.line(),
                e.column()
            )
        })?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn label(&self) -> &str {
        self.name.as_deref().unwrap_or("scenario")
    }

    pub fn dag(&self) -> Result<Dag> {
        let d = &self.dag;
        let edges = d
            .edges
            .iter()
            .map(|&[f, t]| {
                ensure!(f >= 1 && t >= 1, "dag.edges: node indices are 1-based");
                Ok((f - 1, t - 1))
            })
            .collect::<Result<Vec<_>>>()?;
        let states = d.state_sizes.clone().unwrap_or_else(|| vec![1; d.nodes]);
        let inputs = d.input_sizes.clone().unwrap_or_else(|| vec![1; d.nodes]);
        ensure!(
            states.len() == d.nodes && inputs.len() == d.nodes,
            "dag: block size lists must have one entry per node"
        );
        Dag::new(d.nodes, edges, states, inputs).context("dag")
    }

    fn b_at(&self, beta: f64) -> Result<Matrix> {
        let b = to_matrix(&self.matrices.b, "B")?;
        Ok(match &self.matrices.b_beta {
            Some(bb) => b + to_matrix(bb, "B_beta")? * beta,
            None => b,
        })
    }

    fn r_at(&self, rho: f64) -> Result<Matrix> {
        let r = to_matrix(&self.matrices.r, "R")?;
        Ok(match &self.matrices.r_rho {
            Some(rr) => r + to_matrix(rr, "R_rho")? * rho,
            None => r,
        })
    }

    /// Plant at the scenario's own `β` and `ρ`.
    pub fn plant(&self) -> Result<PartitionedPlant> {
        self.plant_at(self.matrices.beta, self.matrices.rho)
    }

    pub fn plant_at(&self, beta: f64, rho: f64) -> Result<PartitionedPlant> {
        Ok(PartitionedPlant::new(
            self.dag()?,
            to_matrix(&self.matrices.a, "A")?,
            self.b_at(beta)?,
            to_matrix(&self.matrices.q, "Q")?,
            self.r_at(rho)?,
        )?)
    }

    /// Per-node gains with defaults filled in.
    pub fn gains(&self) -> Vec<f64> {
        if self.perturbation.gains.is_empty() {
            vec![1.0; self.dag.nodes]
        } else {
            self.perturbation.gains.clone()
        }
    }

    pub fn phases_deg(&self) -> Vec<f64> {
        if self.perturbation.phases_deg.is_empty() {
            vec![0.0; self.dag.nodes]
        } else {
            self.perturbation.phases_deg.clone()
        }
    }

    pub fn grid_points(&self) -> usize {
        self.grid.map_or(400, |g| g.points)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dag.nodes;
        self.dag()?;
        if self.matrices.b_beta.is_none() && self.matrices.beta != 0.0 {
            bail!("matrices.beta is nonzero but B_beta is missing");
        }
        if self.matrices.r_rho.is_none() && self.matrices.rho != 0.0 {
            bail!("matrices.rho is nonzero but R_rho is missing");
        }
        self.plant().context("matrices")?;
        let p = &self.perturbation;
        ensure!(
            p.gains.is_empty() || p.gains.len() == n,
            "perturbation.gains: expected one value per node ({n})"
        );
        ensure!(
            p.phases_deg.is_empty() || p.phases_deg.len() == n,
            "perturbation.phases_deg: expected one value per node ({n})"
        );
        ensure!(
            p.gains.iter().chain(&p.phases_deg).all(|v| v.is_finite()),
            "perturbation: non-finite value"
        );
        if p.kind == PerturbationKind::StaticRealGain {
            ensure!(
                p.phases_deg.iter().all(|&v| v == 0.0),
                "perturbation: static_real_gain cannot carry phases"
            );
        }
        if let Some(s) = &self.sweep {
            ensure!(
                (1..=n).contains(&s.channel),
                "sweep.channel {} out of range 1..={n}",
                s.channel
            );
            ensure!(s.axis1.name != s.axis2.name, "sweep axes must differ");
            for (label, ax) in [("sweep.axis1", &s.axis1), ("sweep.axis2", &s.axis2)] {
                ensure!(ax.points >= 2, "{label}: need at least 2 points");
                ensure!(
                    ax.min.is_finite() && ax.max.is_finite() && ax.min < ax.max,
                    "{label}: range must be finite with min < max"
                );
                match ax.name {
                    AxisName::Beta => ensure!(
                        self.matrices.b_beta.is_some(),
                        "{label}: beta axis requires matrices.B_beta"
                    ),
                    AxisName::Rho => {
                        ensure!(
                            self.matrices.r_rho.is_some(),
                            "{label}: rho axis requires matrices.R_rho"
                        );
                        // R(ρ) is affine in ρ, so definiteness at both ends
                        // covers the whole range.
                        for rho in [ax.min, ax.max] {
                            let r = self.r_at(rho)?;
                            ensure!(
                                min_symmetric_eigenvalue(&r) > 0.0,
                                "{label}: R is not positive definite at rho = {rho}"
                            );
                        }
                    }
                    AxisName::KDb | AxisName::PhiDeg => {}
                }
            }
        }
        if let Some(g) = &self.grid {
            ensure!(g.points >= 1, "grid.points must be positive");
            ensure!(g.lo > 0.0 && g.hi > g.lo, "grid: need 0 < lo < hi");
        }
        Ok(())
    }
}

fn counterexample_base(beta: f64, rho: f64) -> Scenario {
    Scenario {
        name: Some("counterexample".into()),
        dag: DagSpec {
            nodes: 2,
            edges: vec![[1, 2]],
            state_sizes: None,
            input_sizes: None,
        },
        matrices: MatrixSpec {
            a: vec![vec![1.0, 0.0], vec![1.0, 1.0]],
            b: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            q: vec![vec![3.0, 1.0], vec![1.0, 3.0]],
            r: vec![vec![100.0, 0.0], vec![0.0, 100.0]],
            beta,
            rho,
            b_beta: Some(vec![vec![0.0, 0.0], vec![1.0, 0.0]]),
            r_rho: Some(vec![vec![0.0, 1.0], vec![1.0, 0.0]]),
        },
        perturbation: PerturbationSpec::default(),
        sweep: None,
        grid: None,
        output: None,
    }
}

/// Two-node plant `1 → 2` with the (β, k_db) sweep.
pub fn counterexample(beta: f64, rho: f64) -> Scenario {
    let mut s = counterexample_base(beta, rho);
    s.sweep = Some(SweepSpec {
        axis1: AxisSpec {
            name: AxisName::Beta,
            min: -5.0,
            max: 5.0,
            points: 101,
        },
        axis2: k_db_axis(),
        channel: 1,
    });
    s
}

/// Same plant with the (ρ, k_db) sweep.
pub fn counterexample_rho(beta: f64, rho: f64) -> Scenario {
    let mut s = counterexample_base(beta, rho);
    s.name = Some("counterexample-rho".into());
    s.sweep = Some(SweepSpec {
        axis1: AxisSpec {
            name: AxisName::Rho,
            min: -99.0,
            max: 99.0,
            points: 199,
        },
        axis2: k_db_axis(),
        channel: 1,
    });
    s
}

fn k_db_axis() -> AxisSpec {
    AxisSpec {
        name: AxisName::KDb,
        min: -20.0,
        max: 40.0,
        points: 121,
    }
}

/// Random block-diagonal plant on the four-node diamond.
pub fn diamond_random(seed: u64) -> Scenario {
    let plant = declqr::random::diamond_random(seed);
    Scenario {
        name: Some(format!("diamond-random-{seed}")),
        dag: DagSpec {
            nodes: 4,
            edges: vec![[1, 2], [1, 3], [2, 4], [3, 4]],
            state_sizes: None,
            input_sizes: None,
        },
        matrices: MatrixSpec {
            a: from_matrix(plant.a()),
            b: from_matrix(plant.b()),
            q: from_matrix(plant.q()),
            r: from_matrix(plant.r()),
            beta: 0.0,
            rho: 0.0,
            b_beta: None,
            r_rho: None,
        },
        perturbation: PerturbationSpec::default(),
        sweep: None,
        grid: None,
        output: None,
    }
}

/// Resolves a built-in name (`counterexample`, `counterexample-rho`,
/// `diamond-random`), optionally with parameters as in
/// `counterexample:beta=0.5,rho=10`.
pub fn builtin(spec: &str, seed: u64) -> Result<Option<Scenario>> {
    let (name, params) = match spec.split_once(':') {
        Some((n, p)) => (n, p),
        None => (spec, ""),
    };
    let mut beta = 0.0;
    let mut rho = 0.0;
    let mut seed = seed;
    for kv in params.split(',').filter(|s| !s.is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| anyhow!("bad scenario parameter {kv:?}, expected key=value"))?;
        match k.trim() {
            "beta" => beta = v.trim().parse().context("beta")?,
            "rho" => rho = v.trim().parse().context("rho")?,
            "seed" => seed = v.trim().parse().context("seed")?,
            other => bail!("unknown scenario parameter {other:?}"),
        }
    }
    let s = match name {
        "counterexample" => counterexample(beta, rho),
        "counterexample-rho" => counterexample_rho(beta, rho),
        "diamond-random" => diamond_random(seed),
        _ => return Ok(None),
    };
    s.validate()
        .with_context(|| format!("built-in scenario {spec:?}"))?;
    Ok(Some(s))
}

/// Loads a built-in by name or a JSON file by path.
pub fn load_scenario(spec: &str, seed: u64) -> Result<Scenario> {
    if let Some(s) = builtin(spec, seed)? {
        return Ok(s);
    }
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading scenario {}", path.display()))?;
    Scenario::from_json(&text).with_context(|| format!("scenario {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_resolve() {
        let s = load_scenario("counterexample", 0).unwrap();
        let p = s.plant().unwrap();
        assert_eq!(p.node_count(), 2);
        assert_eq!(p.r()[(0, 1)], 0.0);
        let s = load_scenario("counterexample:rho=50,beta=0.25", 0).unwrap();
        let p = s.plant().unwrap();
        assert_eq!(p.r()[(0, 1)], 50.0);
        assert_eq!(p.b()[(1, 0)], 0.25);
        assert!(load_scenario("counterexample:rho=100", 0).is_err());
        assert!(load_scenario("counterexample:gamma=1", 0).is_err());
        assert_eq!(load_scenario("diamond-random", 7).unwrap(), diamond_random(7));
    }

    #[test]
    fn round_trip() {
        for s in [counterexample(0.5, 3.0), counterexample_rho(0.0, 0.0), diamond_random(3)] {
            assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s);
        }
    }

    #[test]
    fn empty_edges_are_valid() {
        let mut s = counterexample(0.0, 0.0);
        s.dag.edges.clear();
        s.matrices.a = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        s.validate().unwrap();
        assert_eq!(s.plant().unwrap().closure().descendants(0).unwrap(), &[0]);
    }

    #[test]
    fn validation_errors_name_the_field() {
        let mut s = counterexample_rho(0.0, 0.0);
        s.sweep.as_mut().unwrap().axis1.max = 100.0;
        let msg = format!("{:#}", s.validate().unwrap_err());
        assert!(msg.contains("rho = 100"), "{msg}");

        let mut s = counterexample(0.0, 0.0);
        s.perturbation.gains = vec![1.0];
        let msg = format!("{:#}", s.validate().unwrap_err());
        assert!(msg.contains("perturbation.gains"), "{msg}");

        let err = Scenario::from_json("{\n \"dag\": {\"nodes\": 2},\n \"matrices\": 3\n}").unwrap_err();
        assert!(format!("{err}").contains("line 3"), "{err}");

        let mut s = counterexample(0.0, 0.0);
        s.matrices.a[0][1] = 1.0;
        let msg = format!("{:#}", s.validate().unwrap_err());
        assert!(msg.contains("sparsity"), "{msg}");
    }
}
