//! Robustness certificates for the decentralized loop: per-node Kalman
//! inequalities, admissibility of block-diagonal perturbations, the
//! block-diagonal small-gain bound, and gain/phase margins.
//!
//! All loops follow one convention: the perturbation `Δ = diag{Δ_i}` sits at
//! the plant input and the loop is closed with positive feedback, so the
//! characteristic function is `det(I - L_dec(s) Δ)`.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::graph::embedding_selector;
use crate::linalg::{self, cabs, carg, min_hermitian_eigenvalue, spd_sqrt, spectral_norm, to_complex};
use crate::lqr::{kalman_margin, loop_shifted_map, lqr_closed_loop_map, lqr_loop_gain, KalmanMargin};
use crate::scalar::Real;
use crate::statespace::{hinf_norm, FrequencyGrid, StateSpaceModel};
use crate::synthesis::{
    closed_loop_matrix, closed_loop_matrix_complex, loop_gain_dec, DecentralizedController,
    PartitionedPlant,
};

/// Default gain search window.
pub const DEFAULT_GAIN_WINDOW: (f64, f64) = (1e-3, 1e3);
/// Default absolute tolerance on gain-margin endpoints.
pub const DEFAULT_GAIN_TOL: f64 = 1e-4;
/// Largest phase examined, in degrees.
pub const MAX_PHASE_DEG: f64 = 179.0;
/// Default tolerance on phase-margin endpoints, in degrees.
pub const DEFAULT_PHASE_TOL: f64 = 1e-2;
/// Positive frequencies in the Nyquist grid.
pub const NYQUIST_POINTS: usize = 4000;

/// Block-diagonal perturbation, one entry per node.
#[derive(Debug, Clone, PartialEq)]
pub enum Perturbation<T: Real> {
    /// `Δ_i = k_i I`.
    StaticReal(Vec<T>),
    /// `Δ_i = k_i e^{jφ_i} I` with `(k_i, φ_i)` and `φ_i` in degrees.
    StaticComplex(Vec<(T, T)>),
    /// Dynamic block `Δ_i(s)`, square of the node's input size.
    Lti(Vec<StateSpaceModel<T>>),
}

impl<T: Real> Perturbation<T> {
    pub fn len(&self) -> usize {
        match self {
            Perturbation::StaticReal(v) => v.len(),
            Perturbation::StaticComplex(v) => v.len(),
            Perturbation::Lti(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Unit gain everywhere except `k` on `channel`.
    pub fn single_channel(nodes: usize, channel: usize, k: T) -> Self {
        let mut v = vec![T::one(); nodes];
        v[channel] = k;
        Perturbation::StaticReal(v)
    }
}

fn unit_phasor<T: Real>(phi_deg: T) -> Complex<T> {
    let rad = phi_deg * T::lit(PI / 180.0);
    Complex::new(rad.cos(), rad.sin())
}

fn check_channel<T: Real>(plant: &PartitionedPlant<T>, channel: usize) -> Result<()> {
    if channel >= plant.node_count() {
        return Err(Error::NodeOutOfRange {
            index: channel,
            count: plant.node_count(),
        });
    }
    Ok(())
}

/// Per-node test of `Δ_i(jω)ᴴ R_i + R_i Δ_i(jω) ≻ R_i`. Static gains are
/// frequency independent, so the grid is only used for LTI blocks.
pub fn perturbation_admissible<T: Real>(
    delta: &Perturbation<T>,
    r_blocks: &[DMatrix<T>],
    grid: &FrequencyGrid<T>,
) -> Result<Vec<bool>> {
    if delta.len() != r_blocks.len() {
        return Err(Error::Dimension(format!(
            "{} perturbation blocks for {} nodes",
            delta.len(),
            r_blocks.len()
        )));
    }
    for r in r_blocks {
        spd_sqrt(r, "R_i")?;
    }
    let test = |d: &DMatrix<Complex<T>>, r: &DMatrix<T>| -> bool {
        let rc = to_complex(r);
        let m = d.adjoint() * &rc + &rc * d - &rc;
        min_hermitian_eigenvalue(&m) > T::zero()
    };
    let scalar_block = |c: Complex<T>, r: &DMatrix<T>| -> bool {
        let d = DMatrix::<Complex<T>>::identity(r.nrows(), r.nrows()) * c;
        test(&d, r)
    };
    Ok(match delta {
        Perturbation::StaticReal(k) => k
            .iter()
            .zip(r_blocks)
            .map(|(&k, r)| scalar_block(Complex::new(k, T::zero()), r))
            .collect(),
        Perturbation::StaticComplex(v) => v
            .iter()
            .zip(r_blocks)
            .map(|(&(k, phi), r)| scalar_block(unit_phasor(phi) * k, r))
            .collect(),
        Perturbation::Lti(blocks) => {
            let mut out = Vec::with_capacity(blocks.len());
            for (d, r) in blocks.iter().zip(r_blocks) {
                if d.inputs() != r.nrows() || d.outputs() != r.nrows() {
                    return Err(Error::Dimension("LTI block does not match R_i".into()));
                }
                let ok = grid
                    .points()
                    .iter()
                    .all(|&w| d.eval_freq(w).is_some_and(|dw| test(&dw, r)));
                out.push(ok);
            }
            out
        }
    })
}

/// Block-diagonal real `Δ = diag{k_i I}` over the input partition.
pub fn static_delta<T: Real>(plant: &PartitionedPlant<T>, gains: &[T]) -> Result<DMatrix<T>> {
    if gains.len() != plant.node_count() {
        return Err(Error::Dimension(format!(
            "{} gains for {} nodes",
            gains.len(),
            plant.node_count()
        )));
    }
    let ip = plant.input_partition();
    let mut d = DMatrix::zeros(ip.total(), ip.total());
    for (i, &k) in gains.iter().enumerate() {
        for r in ip.range(i) {
            d[(r, r)] = k;
        }
    }
    Ok(d)
}

/// Identity except `c I` on the block of `channel`.
pub fn channel_delta<T: Real>(
    plant: &PartitionedPlant<T>,
    channel: usize,
    c: Complex<T>,
) -> Result<DMatrix<Complex<T>>> {
    check_channel(plant, channel)?;
    let m = plant.inputs();
    let mut d = DMatrix::<Complex<T>>::identity(m, m);
    for r in plant.input_partition().range(channel) {
        d[(r, r)] = c;
    }
    Ok(d)
}

/// Closed-loop state matrix with the plant inputs scaled per channel while
/// the controller keeps predicting with its nominal commands.
pub fn perturbed_closed_loop<T: Real>(
    plant: &PartitionedPlant<T>,
    controller: &DecentralizedController<T>,
    delta: &Perturbation<T>,
) -> Result<DMatrix<T>> {
    match delta {
        Perturbation::StaticReal(k) => {
            let d = static_delta(plant, k)?;
            closed_loop_matrix(plant, controller.realization(), Some(&d))
        }
        _ => Err(Error::InvalidArgument(
            "perturbed_closed_loop takes static real gains".into(),
        )),
    }
}

fn abscissa<T: Real>(m: &DMatrix<T>) -> Result<T> {
    Ok(linalg::eigenvalues(m)?.spectral_abscissa)
}

/// Per-node loop gain `F_i (sI - A_des)⁻¹ B_des` and the matching `R_des`.
fn node_loop<T: Real>(
    plant: &PartitionedPlant<T>,
    controller: &DecentralizedController<T>,
    node: usize,
) -> Result<(StateSpaceModel<T>, DMatrix<T>, DMatrix<T>)> {
    let sub = plant.subsystem(node)?;
    let gain = &controller
        .nodes
        .get(node)
        .ok_or(Error::NodeOutOfRange {
            index: node,
            count: controller.nodes.len(),
        })?
        .gain;
    let l = lqr_loop_gain(&sub.a, &sub.b, gain).map_err(|e| e.at_node(node))?;
    Ok((l, sub.r, sub.a))
}

/// Sampled per-node Kalman inequalities on the descendant subproblems.
pub fn decentralized_kalman_check<T: Real>(
    plant: &PartitionedPlant<T>,
    controller: &DecentralizedController<T>,
    grid: &FrequencyGrid<T>,
) -> Result<Vec<KalmanMargin<T>>> {
    (0..plant.node_count())
        .map(|i| {
            let (l, r, _) = node_loop(plant, controller, i)?;
            kalman_margin(&l, &r, grid).map_err(|e| e.at_node(i))
        })
        .collect()
}

/// Upper bound on the structured singular value of the loop-shifted
/// closed-loop map for block-diagonal perturbations.
#[derive(Debug, Clone, PartialEq)]
pub struct MuCertificate<T: Real> {
    /// `‖R_i^{1/2} e_iᵀ (I + H_i) e_i R_i^{-1/2}‖∞` per node.
    pub per_node_mii: Vec<T>,
    /// `‖R_des^{1/2} (I + H_i) R_des^{-1/2}‖∞` per node.
    pub per_node_full: Vec<T>,
    /// Per-node Kalman margins on each node's default grid.
    pub per_node_kalman: Vec<KalmanMargin<T>>,
    /// Largest diagonal-block peak.
    pub overall_bound: T,
}

fn require_block_diagonal<T: Real>(plant: &PartitionedPlant<T>) -> Result<()> {
    if let Some(v) = plant.b_off_diagonal() {
        return Err(Error::HypothesisViolated(format!(
            "B is not block-diagonal: block ({}, {}) has norm {:e}",
            v.row, v.col, v.norm
        )));
    }
    if let Some(v) = plant.r_off_diagonal() {
        return Err(Error::HypothesisViolated(format!(
            "R is not block-diagonal: block ({}, {}) has norm {:e}",
            v.row, v.col, v.norm
        )));
    }
    Ok(())
}

/// Computes the block-diagonal small-gain certificate. Requires `B` and `R`
/// to be block-diagonal.
pub fn mu_upper_bound<T: Real>(
    plant: &PartitionedPlant<T>,
    controller: &DecentralizedController<T>,
) -> Result<MuCertificate<T>> {
    require_block_diagonal(plant)?;
    let ip = plant.input_partition();
    let rel_tol = T::tol(1e-9);
    let mut per_node_mii = Vec::new();
    let mut per_node_full = Vec::new();
    let mut per_node_kalman = Vec::new();
    for (i, nc) in controller.nodes.iter().enumerate() {
        let sub = plant.subsystem(i)?;
        let at = |e: Error| e.at_node(i);
        let h = lqr_closed_loop_map(&sub.a, &sub.b, &nc.gain).map_err(at)?;
        let full = loop_shifted_map(&h, &sub.r).map_err(at)?;
        per_node_full.push(hinf_norm(&full, rel_tol).map_err(at)?);

        let e_t: DMatrix<T> = embedding_selector(i, &sub.nodes, ip)?;
        let (rs, rsi) = spd_sqrt(&plant.r_block(i), "R_i").map_err(at)?;
        let mii = StateSpaceModel::new(
            h.a.clone(),
            &h.b * e_t.transpose() * &rsi,
            &rs * &e_t * &h.c,
            DMatrix::identity(ip.size(i), ip.size(i)),
        )?;
        per_node_mii.push(hinf_norm(&mii, rel_tol).map_err(at)?);

        let l = lqr_loop_gain(&sub.a, &sub.b, &nc.gain).map_err(at)?;
        let grid = FrequencyGrid::default_for(&sub.a);
        per_node_kalman.push(kalman_margin(&l, &sub.r, &grid).map_err(at)?);
    }
    let overall_bound = per_node_mii.iter().copied().fold(T::zero(), |a, b| a.max(b));
    Ok(MuCertificate {
        per_node_mii,
        per_node_full,
        per_node_kalman,
        overall_bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginMethod {
    EigenvalueSweep,
    Nyquist,
}

/// Evidence behind a margin.
#[derive(Debug, Clone, PartialEq)]
pub enum Certificate<T: Real> {
    /// Closed-loop spectral abscissae at the nominal point and at the
    /// reported interval ends.
    Eigenvalue {
        nominal_abscissa: T,
        abscissa_at_lo: T,
        abscissa_at_hi: T,
    },
    /// Open-loop unstable count and the winding numbers at the reported
    /// phase in each direction.
    Winding {
        open_loop_unstable: usize,
        winding_at_plus: i64,
        winding_at_minus: i64,
    },
}

/// Certified margin of one input channel.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginReport<T: Real> {
    pub channel: usize,
    pub method: MarginMethod,
    /// Stable gains `(k_lo, k_hi)` around 1.
    pub gain_interval: Option<(T, T)>,
    /// Same interval in dB.
    pub gain_interval_db: Option<(T, T)>,
    /// The lower end is the window edge, not a boundary.
    pub lower_window_limited: bool,
    /// The upper end is the window edge ("stable up to window max").
    pub upper_window_limited: bool,
    /// Certified symmetric phase range `(-φ, φ)` in degrees.
    pub phase_deg: Option<T>,
    pub phase_window_limited: bool,
    pub certificate: Certificate<T>,
    /// Stability was checked at sampled points only.
    pub grid_certified: bool,
}

fn to_db<T: Real>(k: T) -> T {
    T::lit(20.0) * k.log10()
}

/// Scans `count` log-spaced points from `1` toward `edge`; bisects the
/// first unstable sample against the last stable one.
fn scan_gain<T: Real>(
    stable_at: &dyn Fn(T) -> Result<bool>,
    edge: T,
    count: usize,
    tol: T,
) -> Result<(T, bool)> {
    let mut prev = T::one();
    let l_edge = edge.ln();
    for s in 1..=count {
        let k = (l_edge * T::lit(s as f64 / count as f64)).exp();
        let k = if s == count { edge } else { k };
        if !stable_at(k)? {
            let (mut good, mut bad) = (prev, k);
            while (good - bad).abs() > tol {
                let mid = (good + bad) / T::lit(2.0);
                if stable_at(mid)? {
                    good = mid;
                } else {
                    bad = mid;
                }
            }
            return Ok((good, false));
        }
        prev = k;
    }
    Ok((edge, true))
}

/// Gain margin of `channel` by eigenvalue tests on the perturbed closed
/// loop, other channels at unit gain.
pub fn gain_margin<T: Real>(
    plant: &PartitionedPlant<T>,
    controller: &DecentralizedController<T>,
    channel: usize,
    window: (T, T),
    tol: T,
) -> Result<MarginReport<T>> {
    check_channel(plant, channel)?;
    let (lo, hi) = window;
    if !(lo > T::zero() && lo < T::one() && hi > T::one()) {
        return Err(Error::InvalidArgument(format!(
            "gain window ({lo}, {hi}) must contain 1 and be positive"
        )));
    }
    if !(tol > T::zero()) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let n = plant.node_count();
    let acl = |k: T| {
        perturbed_closed_loop(plant, controller, &Perturbation::single_channel(n, channel, k))
    };
    let nominal = abscissa(&acl(T::one())?)?;
    if nominal >= T::zero() {
        return Err(Error::NotHurwitz(nominal.as_f64()));
    }
    let stable_at = |k: T| -> Result<bool> { Ok(abscissa(&acl(k)?)? < T::zero()) };
    let (k_hi, up_lim) = scan_gain(&stable_at, hi, 200, tol)?;
    let (k_lo, lo_lim) = scan_gain(&stable_at, lo, 200, tol)?;
    Ok(MarginReport {
        channel,
        method: MarginMethod::EigenvalueSweep,
        gain_interval: Some((k_lo, k_hi)),
        gain_interval_db: Some((to_db(k_lo), to_db(k_hi))),
        lower_window_limited: lo_lim,
        upper_window_limited: up_lim,
        phase_deg: None,
        phase_window_limited: false,
        certificate: Certificate::Eigenvalue {
            nominal_abscissa: nominal,
            abscissa_at_lo: abscissa(&acl(k_lo)?)?,
            abscissa_at_hi: abscissa(&acl(k_hi)?)?,
        },
        grid_certified: true,
    })
}

/// Winding data of `det(I - L(jω)Δ)` along the imaginary axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Winding {
    /// Net counter-clockwise turns as ω runs from -∞ to +∞.
    pub turns: i64,
    /// Smallest `|det|` encountered.
    pub min_modulus: f64,
    /// The curve passed through the origin (closed-loop pole on jℝ).
    pub touches_origin: bool,
}

/// Generalized Nyquist test for the decentralized loop. The loop gain is
/// evaluated once on a symmetric grid and reused across perturbations.
#[derive(Debug, Clone)]
pub struct NyquistAnalyzer<T: Real> {
    loop_gain: StateSpaceModel<T>,
    /// Increasing frequencies, negative half mirrored, zero included.
    omegas: Vec<T>,
    responses: Vec<DMatrix<Complex<T>>>,
    open_loop_unstable: usize,
}

impl<T: Real> NyquistAnalyzer<T> {
    pub fn new(
        plant: &PartitionedPlant<T>,
        controller: &DecentralizedController<T>,
    ) -> Result<Self> {
        Self::with_points(plant, controller, NYQUIST_POINTS)
    }

    pub fn with_points(
        plant: &PartitionedPlant<T>,
        controller: &DecentralizedController<T>,
        points: usize,
    ) -> Result<Self> {
        let l = loop_gain_dec(plant, controller.realization())?;
        Self::from_loop_gain(l, points)
    }

    /// Builds the analyzer for any strictly proper square loop gain.
    pub fn from_loop_gain(l: StateSpaceModel<T>, points: usize) -> Result<Self> {
        if l.inputs() != l.outputs() {
            return Err(Error::Dimension("loop gain must be square".into()));
        }
        if points < 2 {
            return Err(Error::InvalidArgument("need at least two grid points".into()));
        }
        let spec = l.poles()?;
        let scale = T::one() + spectral_norm(&l.a);
        let mut lam_min = f64::INFINITY;
        let mut lam_max = 0.0f64;
        for z in &spec.eigenvalues {
            if z.re.abs() <= T::tol(1e-8) * scale {
                return Err(Error::ImaginaryAxisPole(z.im.as_f64()));
            }
            let m = cabs(*z).as_f64();
            lam_min = lam_min.min(m);
            lam_max = lam_max.max(m);
        }
        let lo = 1e-4 * lam_min.min(1.0);
        let mut hi = 1e4 * lam_max.max(1.0);
        // Push the upper end out until the loop gain has rolled off.
        while hi < 1e14 {
            match l.eval_freq(T::lit(hi)) {
                Some(m) if spectral_norm(&m).as_f64() < 0.05 => break,
                _ => hi *= 10.0,
            }
        }
        let pos = FrequencyGrid::<T>::log_spaced(points, lo, hi)?;
        let mut omegas: Vec<T> = pos.points().iter().rev().map(|&w| -w).collect();
        omegas.push(T::zero());
        omegas.extend_from_slice(pos.points());
        let mut responses = Vec::with_capacity(omegas.len());
        let pos_resp: Vec<_> = pos
            .points()
            .iter()
            .map(|&w| l.eval_freq(w).ok_or(Error::ImaginaryAxisPole(w.as_f64())))
            .collect::<Result<_>>()?;
        responses.extend(pos_resp.iter().rev().map(|m| m.map(|z| z.conj())));
        responses.push(l.eval_freq(T::zero()).ok_or(Error::ImaginaryAxisPole(0.0))?);
        responses.extend(pos_resp);
        Ok(NyquistAnalyzer {
            open_loop_unstable: spec.count_unstable(T::zero()),
            loop_gain: l,
            omegas,
            responses,
        })
    }

    /// Open-loop poles in the open right half-plane.
    pub fn open_loop_unstable(&self) -> usize {
        self.open_loop_unstable
    }

    fn char_value(&self, l: &DMatrix<Complex<T>>, delta: &DMatrix<Complex<T>>) -> Complex<T> {
        let m = l.nrows();
        (DMatrix::<Complex<T>>::identity(m, m) - l * delta).determinant()
    }

    fn char_at(&self, w: T, delta: &DMatrix<Complex<T>>) -> Result<Complex<T>> {
        let l = self
            .loop_gain
            .eval(Complex::new(T::zero(), w))
            .ok_or(Error::ImaginaryAxisPole(w.as_f64()))?;
        Ok(self.char_value(&l, delta))
    }

    /// Phase change from `fa` at `a` to `fb` at `b`, subdividing until every
    /// step is below π/2.
    #[allow(clippy::too_many_arguments)]
    fn phase_step(
        &self,
        a: T,
        fa: Complex<T>,
        b: T,
        fb: Complex<T>,
        delta: &DMatrix<Complex<T>>,
        depth: usize,
        min_mod: &mut T,
    ) -> Result<T> {
        let step = carg(fb / fa);
        if step.abs() <= T::lit(PI / 2.0) {
            return Ok(step);
        }
        if depth == 0 {
            return Err(Error::Numerical(format!(
                "phase accumulation unresolved between ω = {a} and {b}"
            )));
        }
        let mid = (a + b) / T::lit(2.0);
        let fm = self.char_at(mid, delta)?;
        *min_mod = (*min_mod).min(cabs(fm));
        Ok(self.phase_step(a, fa, mid, fm, delta, depth - 1, min_mod)?
            + self.phase_step(mid, fm, b, fb, delta, depth - 1, min_mod)?)
    }

    /// Winding of `det(I - L(jω)Δ)` about the origin.
    pub fn winding(&self, delta: &DMatrix<Complex<T>>) -> Result<Winding> {
        let m = self.loop_gain.inputs();
        if delta.shape() != (m, m) {
            return Err(Error::Dimension(format!("Δ is {:?}", delta.shape())));
        }
        let vals: Vec<Complex<T>> = self
            .responses
            .iter()
            .map(|l| self.char_value(l, delta))
            .collect();
        let scale = T::one() + spectral_norm(delta);
        let origin_tol = T::tol(1e-12) * scale;
        let mut min_mod = vals.iter().map(|&f| cabs(f)).fold(T::lit(f64::INFINITY), T::min);
        let touches = |min_mod: T| min_mod <= origin_tol;
        if touches(min_mod) {
            return Ok(Winding {
                turns: 0,
                min_modulus: min_mod.as_f64(),
                touches_origin: true,
            });
        }

        // Tails: extend until f is within 1/2 of its limit 1, where the
        // remaining phase change is the principal argument.
        let one = Complex::new(T::one(), T::zero());
        let mut total = T::zero();
        let mut w_hi = *self.omegas.last().expect("non-empty grid");
        let mut f_hi = *vals.last().expect("non-empty grid");
        let mut w_lo = -w_hi;
        let mut f_lo = vals[0];
        for _ in 0..12 {
            if cabs(f_hi - one) < T::lit(0.5) && cabs(f_lo - one) < T::lit(0.5) {
                break;
            }
            let (nw_hi, nw_lo) = (w_hi * T::lit(10.0), w_lo * T::lit(10.0));
            let (nf_hi, nf_lo) = (self.char_at(nw_hi, delta)?, self.char_at(nw_lo, delta)?);
            total += self.phase_step(w_hi, f_hi, nw_hi, nf_hi, delta, 40, &mut min_mod)?;
            total += self.phase_step(nw_lo, nf_lo, w_lo, f_lo, delta, 40, &mut min_mod)?;
            (w_hi, f_hi, w_lo, f_lo) = (nw_hi, nf_hi, nw_lo, nf_lo);
        }
        if cabs(f_hi - one) >= T::lit(0.5) || cabs(f_lo - one) >= T::lit(0.5) {
            return Err(Error::Numerical(
                "characteristic function does not approach 1 at high frequency".into(),
            ));
        }
        total += carg(one / f_hi) + carg(f_lo);

        for k in 0..vals.len() - 1 {
            total += self.phase_step(
                self.omegas[k],
                vals[k],
                self.omegas[k + 1],
                vals[k + 1],
                delta,
                40,
                &mut min_mod,
            )?;
        }
        if touches(min_mod) {
            return Ok(Winding {
                turns: 0,
                min_modulus: min_mod.as_f64(),
                touches_origin: true,
            });
        }
        let turns = total.as_f64() / (2.0 * PI);
        let rounded = turns.round();
        if (turns - rounded).abs() > 0.25 {
            return Err(Error::Numerical(format!(
                "non-integer winding number {turns}"
            )));
        }
        Ok(Winding {
            turns: rounded as i64,
            min_modulus: min_mod.as_f64(),
            touches_origin: false,
        })
    }

    /// Closed-loop stability verdict: winding equals the open-loop unstable
    /// count and the curve avoids the origin.
    pub fn is_stable(&self, delta: &DMatrix<Complex<T>>) -> Result<bool> {
        let w = self.winding(delta)?;
        Ok(!w.touches_origin && w.turns == self.open_loop_unstable as i64)
    }
}

/// Nyquist verdict for a complex gain `c` on one channel.
pub fn complex_disk_stability<T: Real>(
    plant: &PartitionedPlant<T>,
    controller: &DecentralizedController<T>,
    channel: usize,
    c: Complex<T>,
) -> Result<bool> {
    let delta = channel_delta(plant, channel, c)?;
    NyquistAnalyzer::new(plant, controller)?.is_stable(&delta)
}

fn scan_phase<T: Real>(
    stable_at: &dyn Fn(T) -> Result<bool>,
    sign: T,
    tol: T,
) -> Result<(T, bool)> {
    let step = T::lit(2.0);
    let max = T::lit(MAX_PHASE_DEG);
    let mut prev = T::zero();
    loop {
        let phi = (prev + step).min(max);
        if !stable_at(sign * phi)? {
            let (mut good, mut bad) = (prev, phi);
            while bad - good > tol {
                let mid = (good + bad) / T::lit(2.0);
                if stable_at(sign * mid)? {
                    good = mid;
                } else {
                    bad = mid;
                }
            }
            return Ok((good, false));
        }
        if phi >= max {
            return Ok((max, true));
        }
        prev = phi;
    }
}

/// Symmetric phase margin of `channel`, by bisection on `e^{±jφ}` with the
/// Nyquist test.
pub fn phase_margin<T: Real>(
    plant: &PartitionedPlant<T>,
    controller: &DecentralizedController<T>,
    channel: usize,
    tol_deg: T,
) -> Result<MarginReport<T>> {
    check_channel(plant, channel)?;
    if !(tol_deg > T::zero()) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let nominal = abscissa(&closed_loop_matrix(plant, controller.realization(), None)?)?;
    if nominal >= T::zero() {
        return Err(Error::NotHurwitz(nominal.as_f64()));
    }
    let nyq = NyquistAnalyzer::new(plant, controller)?;
    let delta_at = |phi: T| channel_delta(plant, channel, unit_phasor(phi));
    let stable_at = |phi: T| -> Result<bool> { nyq.is_stable(&delta_at(phi)?) };
    let (plus, plus_lim) = scan_phase(&stable_at, T::one(), tol_deg)?;
    let (minus, minus_lim) = scan_phase(&stable_at, -T::one(), tol_deg)?;
    let phi = plus.min(minus);
    Ok(MarginReport {
        channel,
        method: MarginMethod::Nyquist,
        gain_interval: None,
        gain_interval_db: None,
        lower_window_limited: false,
        upper_window_limited: false,
        phase_deg: Some(phi),
        phase_window_limited: plus_lim && minus_lim,
        certificate: Certificate::Winding {
            open_loop_unstable: nyq.open_loop_unstable(),
            winding_at_plus: nyq.winding(&delta_at(plus)?)?.turns,
            winding_at_minus: nyq.winding(&delta_at(-minus)?)?.turns,
        },
        grid_certified: true,
    })
}

/// Eigenvalue verdict for a complex gain on one channel.
pub fn complex_gain_hurwitz<T: Real>(
    plant: &PartitionedPlant<T>,
    controller: &DecentralizedController<T>,
    channel: usize,
    c: Complex<T>,
) -> Result<bool> {
    let delta = channel_delta(plant, channel, c)?;
    let acl = closed_loop_matrix_complex(plant, controller.realization(), &delta)?;
    Ok(linalg::complex_eigenvalues(&acl)?.spectral_abscissa < T::zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Dag;
    use crate::synthesis::synthesize;
    use nalgebra::dmatrix;

    fn two_node(beta: f64, rho: f64) -> PartitionedPlant<f64> {
        PartitionedPlant::new(
            Dag::with_unit_blocks(2, vec![(0, 1)]).unwrap(),
            dmatrix![1.0, 0.0; 1.0, 1.0],
            dmatrix![1.0, 0.0; beta, 1.0],
            dmatrix![3.0, 1.0; 1.0, 3.0],
            dmatrix![100.0, rho; rho, 100.0],
        )
        .unwrap()
    }

    fn single() -> PartitionedPlant<f64> {
        PartitionedPlant::new(
            Dag::new(1, vec![], vec![2], vec![1]).unwrap(),
            dmatrix![0.0, 1.0; 2.0, -1.0],
            dmatrix![0.0; 1.0],
            DMatrix::identity(2, 2),
            dmatrix![0.5],
        )
        .unwrap()
    }

    #[test]
    fn admissibility() {
        let r = vec![dmatrix![100.0]];
        let g = FrequencyGrid::log_spaced(10, 1e-2, 1e2).unwrap();
        let adm = |p: Perturbation<f64>| perturbation_admissible(&p, &r, &g).unwrap()[0];
        assert!(adm(Perturbation::StaticReal(vec![0.6])));
        assert!(!adm(Perturbation::StaticReal(vec![0.5])));
        assert!(adm(Perturbation::StaticComplex(vec![(1.0, 59.0)])));
        assert!(!adm(Perturbation::StaticComplex(vec![(1.0, 61.0)])));
        let lag = StateSpaceModel::new(dmatrix![-1.0], dmatrix![1.0], dmatrix![1.0], dmatrix![1.0]).unwrap();
        assert!(adm(Perturbation::Lti(vec![lag])));
        let bad = StateSpaceModel::new(dmatrix![-1.0], dmatrix![1.0], dmatrix![-1.0], dmatrix![1.0]).unwrap();
        assert!(!adm(Perturbation::Lti(vec![bad])));
    }

    #[test]
    fn unit_gains_give_nominal_loop() {
        let plant = two_node(0.0, 0.0);
        let ctrl = synthesize(&plant).unwrap();
        let a1 = perturbed_closed_loop(&plant, &ctrl, &Perturbation::StaticReal(vec![1.0, 1.0])).unwrap();
        let a0 = closed_loop_matrix(&plant, ctrl.realization(), None).unwrap();
        assert_eq!(a1, a0);
        assert!(perturbed_closed_loop(&plant, &ctrl, &Perturbation::StaticComplex(vec![(1.0, 0.0); 2])).is_err());
    }

    #[test]
    fn kalman_check_two_node() {
        let plant = two_node(0.0, 0.0);
        let ctrl = synthesize(&plant).unwrap();
        let grid = FrequencyGrid::log_spaced(400, 1e-4, 1e4).unwrap();
        for m in decentralized_kalman_check(&plant, &ctrl, &grid).unwrap() {
            assert!(m.min_eigenvalue >= -1e-8, "{}", m.min_eigenvalue);
        }
    }

    #[test]
    fn kalman_check_single_node_matches_centralized() {
        let plant = single();
        let ctrl = synthesize(&plant).unwrap();
        let grid = FrequencyGrid::default_for(plant.a());
        let dec = decentralized_kalman_check(&plant, &ctrl, &grid).unwrap();
        let l = lqr_loop_gain(plant.a(), plant.b(), &ctrl.nodes[0].gain).unwrap();
        let cen = kalman_margin(&l, plant.r(), &grid).unwrap();
        assert_eq!(dec[0], cen);
    }

    #[test]
    fn mu_bound_two_node() {
        let plant = two_node(0.0, 0.0);
        let ctrl = synthesize(&plant).unwrap();
        let cert = mu_upper_bound(&plant, &ctrl).unwrap();
        assert!(cert.overall_bound <= 1.0 + 1e-6);
        for (mii, full) in cert.per_node_mii.iter().zip(&cert.per_node_full) {
            assert!(*mii <= full + 1e-8 && *mii >= 0.0);
            assert!(*full <= 1.0 + 1e-6);
        }
        assert_eq!(
            cert.overall_bound,
            cert.per_node_mii.iter().copied().fold(0.0, f64::max)
        );
    }

    #[test]
    fn mu_bound_single_node_is_loop_shift_norm() {
        let plant = single();
        let ctrl = synthesize(&plant).unwrap();
        let cert = mu_upper_bound(&plant, &ctrl).unwrap();
        assert!((cert.per_node_mii[0] - cert.per_node_full[0]).abs() < 1e-8);
        assert!(cert.overall_bound <= 1.0 + 1e-6);
    }

    #[test]
    fn mu_bound_rejects_coupled_r() {
        let plant = two_node(0.0, 50.0);
        let ctrl = synthesize(&plant).unwrap();
        match mu_upper_bound(&plant, &ctrl) {
            Err(Error::HypothesisViolated(msg)) => assert!(msg.starts_with("R")),
            other => panic!("{other:?}"),
        }
        let plant = two_node(1.0, 0.0);
        let ctrl = synthesize(&plant).unwrap();
        match mu_upper_bound(&plant, &ctrl) {
            Err(Error::HypothesisViolated(msg)) => assert!(msg.contains("(1, 0)")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn gain_margin_two_node() {
        let plant = two_node(0.0, 0.0);
        let ctrl = synthesize(&plant).unwrap();
        let rep = gain_margin(&plant, &ctrl, 0, (1e-3, 1e3), 1e-4).unwrap();
        let (lo, hi) = rep.gain_interval.unwrap();
        assert!(lo <= 0.5 && hi == 1e3 && rep.upper_window_limited);
        for k in [0.501, 0.6, 1.0, 2.0, 10.0, 100.0, 1000.0] {
            let a = perturbed_closed_loop(&plant, &ctrl, &Perturbation::single_channel(2, 0, k)).unwrap();
            assert!(linalg::is_hurwitz(&a, 0.0).unwrap(), "k = {k}");
        }
        assert!(gain_margin(&plant, &ctrl, 0, (2.0, 3.0), 1e-4).is_err());
        assert!(gain_margin(&plant, &ctrl, 5, (0.1, 3.0), 1e-4).is_err());
    }

    #[test]
    fn gain_margin_single_node() {
        let plant = single();
        let ctrl = synthesize(&plant).unwrap();
        let rep = gain_margin(&plant, &ctrl, 0, (1e-3, 1e3), 1e-4).unwrap();
        let (lo, hi) = rep.gain_interval.unwrap();
        assert!(lo <= 0.5 && rep.upper_window_limited && hi == 1e3);
    }

    #[test]
    fn coupling_shrinks_gain_margin() {
        let plant = two_node(5.0, 0.0);
        let ctrl = synthesize(&plant).unwrap();
        let rep = gain_margin(&plant, &ctrl, 0, (1e-3, 1e3), 1e-4).unwrap();
        let (lo, hi) = rep.gain_interval.unwrap();
        assert!(lo > 0.5 || hi < 1e3, "{lo} {hi}");
    }

    #[test]
    fn nyquist_agrees_with_eigenvalues() {
        let plant = two_node(0.0, 0.0);
        let ctrl = synthesize(&plant).unwrap();
        let nyq = NyquistAnalyzer::new(&plant, &ctrl).unwrap();
        assert_eq!(nyq.open_loop_unstable(), 2);
        for k in [0.1, 0.4, 0.6, 1.0, 5.0] {
            let a = perturbed_closed_loop(&plant, &ctrl, &Perturbation::single_channel(2, 0, k)).unwrap();
            let eig = linalg::is_hurwitz(&a, 0.0).unwrap();
            let d = channel_delta(&plant, 0, Complex::new(k, 0.0)).unwrap();
            assert_eq!(nyq.is_stable(&d).unwrap(), eig, "k = {k}");
        }
        for phi in [10.0, 30.0, 59.0, -59.0, 120.0, 170.0] {
            let c = unit_phasor(phi);
            assert_eq!(
                complex_disk_stability(&plant, &ctrl, 0, c).unwrap(),
                complex_gain_hurwitz(&plant, &ctrl, 0, c).unwrap(),
                "φ = {phi}"
            );
        }
        assert!(complex_disk_stability(&plant, &ctrl, 0, unit_phasor(59.0)).unwrap());
    }

    #[test]
    fn phase_margin_two_node() {
        let plant = two_node(0.0, 0.0);
        let ctrl = synthesize(&plant).unwrap();
        let rep = phase_margin(&plant, &ctrl, 0, 0.01).unwrap();
        let phi = rep.phase_deg.unwrap();
        assert!(phi >= 60.0, "{phi}");
        if !rep.phase_window_limited {
            let c = unit_phasor(phi + 0.05);
            assert!(!complex_gain_hurwitz(&plant, &ctrl, 0, c).unwrap()
                || !complex_gain_hurwitz(&plant, &ctrl, 0, c.conj()).unwrap()
                || phi + 0.05 > MAX_PHASE_DEG);
        }
    }

    #[test]
    fn phase_margin_single_node() {
        let plant = single();
        let ctrl = synthesize(&plant).unwrap();
        let rep = phase_margin(&plant, &ctrl, 0, 0.01).unwrap();
        assert!(rep.phase_deg.unwrap() >= 60.0);
    }

    #[test]
    fn imaginary_axis_pole_rejected() {
        let plant = PartitionedPlant::new(
            Dag::with_unit_blocks(1, vec![]).unwrap(),
            dmatrix![0.0],
            dmatrix![1.0],
            dmatrix![1.0],
            dmatrix![1.0],
        )
        .unwrap();
        let ctrl = synthesize(&plant).unwrap();
        assert!(matches!(
            NyquistAnalyzer::new(&plant, &ctrl),
            Err(Error::ImaginaryAxisPole(_))
        ));
    }
}
