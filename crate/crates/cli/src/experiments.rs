//! Closed-form oracle for the two-node example and 2-D stability sweeps.

use anyhow::{ensure, Result};
use declqr::linalg::{complex_eigenvalues, eigenvalues};
use declqr::lqr::solve_care;
use declqr::robustness::{perturbed_closed_loop, static_delta};
use declqr::synthesis::{closed_loop_matrix_complex, synthesize};
use declqr::{CMatrix, Complex, DecentralizedController, Matrix, PartitionedPlant, Perturbation};
use rayon::prelude::*;

use crate::scenario::{AxisName, AxisSpec, Scenario};

/// `10^(dB/20)`.
pub fn db_to_gain(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// The 3x3 perturbed closed-loop matrix of the two-node example in closed
/// form, with the gains taken from two centralized Riccati solves.
pub fn counterexample_acl(beta: f64, rho: f64, k: f64) -> Result<Matrix> {
    ensure!(rho.abs() < 100.0, "|rho| must be below 100");
    let a = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
    let b = Matrix::from_row_slice(2, 2, &[1.0, 0.0, beta, 1.0]);
    let q = Matrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 3.0]);
    let r = Matrix::from_row_slice(2, 2, &[100.0, rho, rho, 100.0]);
    let f1 = solve_care(&a, &b, &q, &r)?.f;
    let f2 = solve_care(
        &Matrix::from_element(1, 1, 1.0),
        &Matrix::from_element(1, 1, 1.0),
        &Matrix::from_element(1, 1, 3.0),
        &Matrix::from_element(1, 1, 100.0),
    )?
    .f[(0, 0)];
    let (f11, f12, f21, f22) = (f1[(0, 0)], f1[(0, 1)], f1[(1, 0)], f1[(1, 1)]);
    Ok(Matrix::from_row_slice(
        3,
        3,
        &[
            1.0 + k * f11,
            k * f12,
            0.0,
            1.0 + beta * f11 + f21,
            1.0 + beta * f12 + f22,
            0.0,
            1.0 + k * beta * f11 + f21,
            f22 - f2 + k * beta * f12,
            1.0 + f2,
        ],
    ))
}

/// One sweep cell.
#[derive(Debug, Clone)]
pub struct CellRecord {
    pub stable: bool,
    /// Spectral abscissa of the perturbed closed loop; NaN on failure.
    pub max_real_eig: f64,
    pub error: Option<String>,
}

impl PartialEq for CellRecord {
    fn eq(&self, other: &Self) -> bool {
        self.stable == other.stable
            && self.max_real_eig.to_bits() == other.max_real_eig.to_bits()
            && self.error == other.error
    }
}

/// Stability over a 2-D parameter grid, stored axis1-major.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRegion {
    pub axis1: AxisName,
    pub axis2: AxisName,
    pub values1: Vec<f64>,
    pub values2: Vec<f64>,
    pub cells: Vec<CellRecord>,
}

impl StabilityRegion {
    pub fn cell(&self, i: usize, j: usize) -> &CellRecord {
        &self.cells[i * self.values2.len() + j]
    }

    pub fn transpose(&self) -> StabilityRegion {
        let (n1, n2) = (self.values1.len(), self.values2.len());
        let mut cells = Vec::with_capacity(n1 * n2);
        for j in 0..n2 {
            for i in 0..n1 {
                cells.push(self.cell(i, j).clone());
            }
        }
        StabilityRegion {
            axis1: self.axis2,
            axis2: self.axis1,
            values1: self.values2.clone(),
            values2: self.values1.clone(),
            cells,
        }
    }

    pub fn stable_count(&self) -> usize {
        self.cells.iter().filter(|c| c.stable).count()
    }
}

/// Parameters of one closed-loop evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatingPoint {
    pub beta: f64,
    pub rho: f64,
    pub gains: Vec<f64>,
    pub phases_deg: Vec<f64>,
}

impl OperatingPoint {
    pub fn nominal(scenario: &Scenario) -> Self {
        OperatingPoint {
            beta: scenario.matrices.beta,
            rho: scenario.matrices.rho,
            gains: scenario.gains(),
            phases_deg: scenario.phases_deg(),
        }
    }

    fn set(&mut self, axis: AxisName, channel: usize, v: f64) {
        match axis {
            AxisName::Beta => self.beta = v,
            AxisName::Rho => self.rho = v,
            AxisName::KDb => self.gains[channel] = db_to_gain(v),
            AxisName::PhiDeg => self.phases_deg[channel] = v,
        }
    }
}

/// Spectral abscissa of the loop perturbed by `diag{k_i e^{jφ_i} I}`.
pub fn perturbed_abscissa(
    plant: &PartitionedPlant,
    controller: &DecentralizedController,
    gains: &[f64],
    phases_deg: &[f64],
) -> Result<f64> {
    if phases_deg.iter().all(|&p| p == 0.0) {
        let acl = perturbed_closed_loop(plant, controller, &Perturbation::StaticReal(gains.to_vec()))?;
        return Ok(eigenvalues(&acl)?.spectral_abscissa);
    }
    let mag = static_delta(plant, gains)?;
    let ip = plant.input_partition();
    let mut delta = CMatrix::zeros(mag.nrows(), mag.ncols());
    for (i, &phi) in phases_deg.iter().enumerate() {
        let rot = Complex::from_polar(1.0, phi.to_radians());
        for r in ip.range(i) {
            delta[(r, r)] = rot * mag[(r, r)];
        }
    }
    let acl = closed_loop_matrix_complex(plant, controller.realization(), &delta)?;
    Ok(complex_eigenvalues(&acl)?.spectral_abscissa)
}

fn affects_plant(axis: AxisName) -> bool {
    matches!(axis, AxisName::Beta | AxisName::Rho)
}

/// Evaluates closed-loop stability on the grid `axis1 x axis2`, perturbing
/// node `channel` (0-based). The controller is re-synthesized wherever the
/// plant changes; per-cell failures are recorded in the cell.
pub fn sweep2d(
    scenario: &Scenario,
    axis1: &AxisSpec,
    axis2: &AxisSpec,
    channel: usize,
) -> Result<StabilityRegion> {
    ensure!(axis1.name != axis2.name, "sweep axes must differ");
    ensure!(axis1.points >= 2 && axis2.points >= 2, "sweep axes need at least 2 points");
    ensure!(channel < scenario.dag.nodes, "channel out of range");
    let values1 = axis1.values();
    let values2 = axis2.values();
    let base = OperatingPoint::nominal(scenario);

    let p1 = if affects_plant(axis1.name) { values1.len() } else { 1 };
    let p2 = if affects_plant(axis2.name) { values2.len() } else { 1 };
    let synthesized: Vec<Result<(PartitionedPlant, DecentralizedController), String>> = (0..p1 * p2)
        .into_par_iter()
        .map(|idx| {
            let mut op = base.clone();
            if p1 > 1 {
                op.set(axis1.name, channel, values1[idx / p2]);
            }
            if p2 > 1 {
                op.set(axis2.name, channel, values2[idx % p2]);
            }
            let plant = scenario.plant_at(op.beta, op.rho).map_err(|e| format!("{e:#}"))?;
            let ctrl = synthesize(&plant).map_err(|e| e.to_string())?;
            Ok((plant, ctrl))
        })
        .collect();

    let n2 = values2.len();
    let cells = (0..values1.len() * n2)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / n2, idx % n2);
            let pi = if p1 > 1 { i } else { 0 };
            let pj = if p2 > 1 { j } else { 0 };
            let failed = |msg: String| CellRecord {
                stable: false,
                max_real_eig: f64::NAN,
                error: Some(msg),
            };
            let (plant, ctrl) = match &synthesized[pi * p2 + pj] {
                Ok(pc) => pc,
                Err(e) => return failed(e.clone()),
            };
            let mut op = base.clone();
            op.set(axis1.name, channel, values1[i]);
            op.set(axis2.name, channel, values2[j]);
            match perturbed_abscissa(plant, ctrl, &op.gains, &op.phases_deg) {
                Ok(a) => CellRecord {
                    stable: a < 0.0,
                    max_real_eig: a,
                    error: None,
                },
                Err(e) => failed(format!("{e:#}")),
            }
        })
        .collect();
    Ok(StabilityRegion {
        axis1: axis1.name,
        axis2: axis2.name,
        values1,
        values2,
        cells,
    })
}

/// Runs the sweep declared in the scenario.
pub fn scenario_sweep(scenario: &Scenario) -> Result<StabilityRegion> {
    let spec = scenario
        .sweep
        .ok_or_else(|| anyhow::anyhow!("scenario has no sweep section"))?;
    sweep2d(scenario, &spec.axis1, &spec.axis2, spec.channel - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::counterexample;

    #[test]
    fn oracle_examples() {
        let m = counterexample_acl(0.0, 0.0, 1.0).unwrap();
        let f2 = -(100.0 + 10300f64.sqrt()) / 100.0;
        assert!((m[(2, 2)] - (1.0 + f2)).abs() < 1e-10);
        let m0 = counterexample_acl(0.0, 0.0, 0.0).unwrap();
        assert_eq!((m0[(0, 0)], m0[(0, 1)], m0[(0, 2)]), (1.0, 0.0, 0.0));
        assert!(eigenvalues(&m0).unwrap().spectral_abscissa >= 1.0 - 1e-12);
        assert!(counterexample_acl(0.0, 100.0, 1.0).is_err());
    }

    fn small_axes() -> (AxisSpec, AxisSpec) {
        (
            AxisSpec { name: AxisName::Beta, min: -2.0, max: 2.0, points: 5 },
            AxisSpec { name: AxisName::KDb, min: -20.0, max: 20.0, points: 7 },
        )
    }

    #[test]
    fn swapped_axes_transpose() {
        let s = counterexample(0.0, 0.0);
        let (a1, a2) = small_axes();
        let r = sweep2d(&s, &a1, &a2, 0).unwrap();
        let t = sweep2d(&s, &a2, &a1, 0).unwrap();
        assert_eq!(r.transpose(), t);
    }

    #[test]
    fn nominal_cell_is_stable() {
        let s = counterexample(0.0, 0.0);
        let (a1, a2) = small_axes();
        let r = sweep2d(&s, &a1, &a2, 0).unwrap();
        // β = 0, k = 0 dB
        let c = r.cell(2, 3);
        assert!(c.stable && c.max_real_eig < 0.0);
        for c in &r.cells {
            assert_eq!(c.stable, c.max_real_eig < 0.0);
        }
    }

    #[test]
    fn phase_axis_uses_complex_gain() {
        let s = counterexample(0.0, 0.0);
        let a1 = AxisSpec { name: AxisName::PhiDeg, min: -50.0, max: 50.0, points: 3 };
        let a2 = AxisSpec { name: AxisName::KDb, min: 0.0, max: 6.0, points: 2 };
        let r = sweep2d(&s, &a1, &a2, 0).unwrap();
        assert!(r.cells.iter().all(|c| c.stable));
    }
}
