//! Optimal decentralized LQR synthesis over a DAG information structure.
//!
//! Each node `j` solves a centralized LQR problem on its descendant
//! subsystem, `F_j = ric(A_des, B_des, Q_des, R_des)`. The controller is
//! realized in prediction-correction form: node `j` keeps a prediction `η_j`
//! of the strict-descendant part of its correction state `ξ_j`, and the
//! node-`j` part of `ξ_j` is reconstructed from the measured `x_j` minus the
//! predictions its strict ancestors hold for node `j`:
//!
//! ```text
//! c_j  = x_j - Σ_{m ∈ anc(j), m ≠ j} (η_m)_j
//! ξ_j  = [c_j; η_j]
//! η̇_j  = (strict-descendant rows of A_des(j) + B_des(j) F_j) ξ_j
//! u    = Σ_j  embed_des(j)(F_j ξ_j)
//! ```
//!
//! In the unperturbed closed loop `x = Σ_j embed_des(j)(ξ_j)` and every
//! `ξ_j` evolves autonomously under `A_des(j) + B_des(j) F_j`.

use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};
use crate::graph::{
    embedding_selector, extract_submatrix, transitive_closure, validate_sparsity, BlockPartition,
    BlockViolation, ClosureTable, Dag, DEFAULT_SPARSITY_TOL,
};
use crate::linalg::{self, min_symmetric_eigenvalue, psd_sqrt, spd_sqrt, spectral_norm, symmetrize};
use crate::lqr::{self, solve_care, CareSolution};
use crate::scalar::Real;
use crate::statespace::{near_pole, FrequencyGrid, StateSpaceModel};

/// Plant `ẋ = Ax + Bu` with cost weights `Q`, `R`, structured over a DAG.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedPlant<T: Real> {
    dag: Dag,
    closure: ClosureTable,
    a: DMatrix<T>,
    b: DMatrix<T>,
    q: DMatrix<T>,
    r: DMatrix<T>,
}

/// Descendant-subsystem data for one node.
#[derive(Debug, Clone, PartialEq)]
pub struct Subsystem<T: Real> {
    pub nodes: Vec<usize>,
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub q: DMatrix<T>,
    pub r: DMatrix<T>,
}

impl<T: Real> PartitionedPlant<T> {
    /// Validates dimensions, closure conformance of `A` and `B`, definiteness
    /// of `Q` and `R`, and stabilizability of every descendant subsystem.
    pub fn new(
        dag: Dag,
        a: DMatrix<T>,
        b: DMatrix<T>,
        q: DMatrix<T>,
        r: DMatrix<T>,
    ) -> Result<Self> {
        let n = dag.state_partition().total();
        let m = dag.input_partition().total();
        if a.shape() != (n, n) || b.shape() != (n, m) || q.shape() != (n, n) || r.shape() != (m, m)
        {
            return Err(Error::Dimension(format!(
                "plant with n={n}, m={m}: A {:?}, B {:?}, Q {:?}, R {:?}",
                a.shape(),
                b.shape(),
                q.shape(),
                r.shape()
            )));
        }
        for mat in [&a, &b, &q, &r] {
            linalg::check_finite(mat)?;
        }
        let closure = transitive_closure(&dag);
        let sp = dag.state_partition();
        let ip = dag.input_partition();
        for (name, mat, cols) in [("A", &a, sp), ("B", &b, ip)] {
            let report = validate_sparsity(mat, &closure, sp, cols, DEFAULT_SPARSITY_TOL)?;
            if let Some(v) = report.violations.first() {
                return Err(Error::Sparsity(format!(
                    "{name} block ({}, {}) has norm {:e} but node {} does not reach node {}",
                    v.row, v.col, v.norm, v.col, v.row
                )));
            }
        }
        let q_norm = spectral_norm(&q);
        if (&q - q.transpose()).norm() > T::tol(1e-10) * (T::one() + q_norm)
            || min_symmetric_eigenvalue(&q) < -T::tol(1e-10) * q_norm
        {
            return Err(Error::NotPositiveSemidefinite("Q"));
        }
        let r_norm = spectral_norm(&r);
        if (&r - r.transpose()).norm() > T::tol(1e-10) * (T::one() + r_norm)
            || min_symmetric_eigenvalue(&r) <= T::lit(1e-12) * r_norm
        {
            return Err(Error::NotPositiveDefinite("R"));
        }
        let plant = PartitionedPlant {
            dag,
            closure,
            a,
            b,
            q,
            r,
        };
        for i in 0..plant.node_count() {
            let sub = plant.subsystem(i)?;
            lqr::check_stabilizable(&sub.a, &sub.b).map_err(|e| e.at_node(i))?;
        }
        Ok(plant)
    }

    pub fn dag(&self) -> &Dag {
        &self.dag
    }

    pub fn closure(&self) -> &ClosureTable {
        &self.closure
    }

    pub fn node_count(&self) -> usize {
        self.dag.node_count()
    }

    pub fn state_partition(&self) -> &BlockPartition {
        self.dag.state_partition()
    }

    pub fn input_partition(&self) -> &BlockPartition {
        self.dag.input_partition()
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<T> {
        &self.b
    }

    pub fn q(&self) -> &DMatrix<T> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<T> {
        &self.r
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    /// `(A, B, Q, R)` restricted to the descendants of `node`.
    pub fn subsystem(&self, node: usize) -> Result<Subsystem<T>> {
        let des = self.closure.descendants(node)?.to_vec();
        let sp = self.state_partition();
        let ip = self.input_partition();
        Ok(Subsystem {
            a: extract_submatrix(&self.a, &des, &des, sp, sp)?,
            b: extract_submatrix(&self.b, &des, &des, sp, ip)?,
            q: extract_submatrix(&self.q, &des, &des, sp, sp)?,
            r: extract_submatrix(&self.r, &des, &des, ip, ip)?,
            nodes: des,
        })
    }

    /// First off-diagonal block of `m` with norm above `tol`, if any.
    fn off_diagonal_block(
        m: &DMatrix<T>,
        rows: &BlockPartition,
        cols: &BlockPartition,
        tol: f64,
    ) -> Option<BlockViolation> {
        for i in 0..rows.len() {
            for j in 0..cols.len() {
                if i == j {
                    continue;
                }
                let block = m
                    .view((rows.offset(i), cols.offset(j)), (rows.size(i), cols.size(j)))
                    .into_owned();
                let norm = spectral_norm(&block).as_f64();
                if norm > tol {
                    return Some(BlockViolation { row: i, col: j, norm });
                }
            }
        }
        None
    }

    /// Off-diagonal block of `B` violating block-diagonality.
    pub fn b_off_diagonal(&self) -> Option<BlockViolation> {
        let tol = DEFAULT_SPARSITY_TOL * (1.0 + spectral_norm(&self.b).as_f64());
        Self::off_diagonal_block(&self.b, self.state_partition(), self.input_partition(), tol)
    }

    /// Off-diagonal block of `R` violating block-diagonality.
    pub fn r_off_diagonal(&self) -> Option<BlockViolation> {
        let tol = DEFAULT_SPARSITY_TOL * (1.0 + spectral_norm(&self.r).as_f64());
        Self::off_diagonal_block(&self.r, self.input_partition(), self.input_partition(), tol)
    }

    /// Diagonal block `R_i`.
    pub fn r_block(&self, node: usize) -> DMatrix<T> {
        let ip = self.input_partition();
        self.r
            .view((ip.offset(node), ip.offset(node)), (ip.size(node), ip.size(node)))
            .into_owned()
    }
}

/// Per-node part of the decentralized controller.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeController<T: Real> {
    pub node: usize,
    /// Descendants of `node` (including itself), increasing.
    pub descendants: Vec<usize>,
    pub gain: DMatrix<T>,
    /// `A_des + B_des F` of this node's subproblem.
    pub predictor: DMatrix<T>,
    /// Riccati data when the gain came from synthesis.
    pub care: Option<CareSolution<T>>,
    /// Offset of this node's prediction block in the controller state.
    pub eta_offset: usize,
    /// Dimension of the prediction block (strict-descendant states).
    pub eta_dim: usize,
    /// `ξ = x_map · x + eta_map · η`.
    pub x_map: DMatrix<T>,
    pub eta_map: DMatrix<T>,
}

/// Prediction-correction realization of the decentralized controller, a
/// dynamic map from plant state `x` to plant input `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecentralizedController<T: Real> {
    pub nodes: Vec<NodeController<T>>,
    realization: StateSpaceModel<T>,
}

impl<T: Real> DecentralizedController<T> {
    /// `(A_K, B_K, C_K, D_K)` with input `x` and output `u`.
    pub fn realization(&self) -> &StateSpaceModel<T> {
        &self.realization
    }

    pub fn gains(&self) -> Vec<DMatrix<T>> {
        self.nodes.iter().map(|n| n.gain.clone()).collect()
    }

    /// Correction state `ξ_i` reconstructed from plant and controller states.
    pub fn reconstruct_xi(&self, node: usize, x: &DMatrix<T>, eta: &DMatrix<T>) -> DMatrix<T> {
        let nc = &self.nodes[node];
        &nc.x_map * x + &nc.eta_map * eta
    }
}

/// Solves every descendant subproblem and assembles the controller.
pub fn synthesize<T: Real>(plant: &PartitionedPlant<T>) -> Result<DecentralizedController<T>> {
    let mut cares = Vec::with_capacity(plant.node_count());
    for i in 0..plant.node_count() {
        let sub = plant.subsystem(i)?;
        let care = solve_care(&sub.a, &sub.b, &sub.q, &sub.r).map_err(|e| e.at_node(i))?;
        cares.push(care);
    }
    let gains = cares.iter().map(|c| c.f.clone()).collect();
    let mut ctrl = assemble(plant, gains)?;
    for (nc, care) in ctrl.nodes.iter_mut().zip(cares) {
        nc.care = Some(care);
    }
    Ok(ctrl)
}

/// Builds the prediction-correction realization from arbitrary per-node
/// gains `F_i` (each `m_des(i) x n_des(i)`).
pub fn assemble<T: Real>(
    plant: &PartitionedPlant<T>,
    gains: Vec<DMatrix<T>>,
) -> Result<DecentralizedController<T>> {
    let count = plant.node_count();
    if gains.len() != count {
        return Err(Error::Dimension(format!(
            "{} gains for {count} nodes",
            gains.len()
        )));
    }
    let closure = plant.closure();
    let sp = plant.state_partition();
    let ip = plant.input_partition();
    let n = plant.states();
    let m = plant.inputs();

    let mut eta_offsets = Vec::with_capacity(count);
    let mut eta_total = 0;
    for j in 0..count {
        eta_offsets.push(eta_total);
        eta_total += sp.dim_of(closure.strict_descendants(j)?);
    }
    // Columns of η_owner holding the prediction of node `target`.
    let eta_cols = |owner: usize, target: usize| -> Result<std::ops::Range<usize>> {
        let sd = closure.strict_descendants(owner)?;
        let pos = sd
            .iter()
            .position(|&v| v == target)
            .ok_or_else(|| Error::Structure(format!("{target} is not below {owner}")))?;
        let start = eta_offsets[owner] + sp.dim_of(&sd[..pos]);
        Ok(start..start + sp.size(target))
    };

    let mut a_k = DMatrix::zeros(eta_total, eta_total);
    let mut b_k = DMatrix::zeros(eta_total, n);
    let mut c_k = DMatrix::zeros(m, eta_total);
    let mut d_k = DMatrix::zeros(m, n);
    let mut nodes = Vec::with_capacity(count);

    for (j, gain) in gains.into_iter().enumerate() {
        let sub = plant.subsystem(j)?;
        let des = sub.nodes.clone();
        let n_des = sp.dim_of(&des);
        if gain.shape() != (ip.dim_of(&des), n_des) {
            return Err(Error::Dimension(format!(
                "node {j}: gain is {:?}, expected {}x{}",
                gain.shape(),
                ip.dim_of(&des),
                n_des
            ))
            .at_node(j));
        }
        let nj = sp.size(j);
        let mut x_map = DMatrix::zeros(n_des, n);
        let mut eta_map = DMatrix::zeros(n_des, eta_total);
        for k in 0..nj {
            x_map[(k, sp.offset(j) + k)] = T::one();
        }
        for &anc in closure.strict_ancestors(j)? {
            let cols = eta_cols(anc, j)?;
            for k in 0..nj {
                eta_map[(k, cols.start + k)] = -T::one();
            }
        }
        let mut row = nj;
        for &l in &des[1..] {
            let cols = eta_cols(j, l)?;
            for k in 0..sp.size(l) {
                eta_map[(row + k, cols.start + k)] = T::one();
            }
            row += sp.size(l);
        }

        let predictor = &sub.a + &sub.b * &gain;
        let pred_rows = predictor.rows(nj, n_des - nj).into_owned();
        let eta_dim = n_des - nj;
        let off = eta_offsets[j];
        a_k.view_mut((off, 0), (eta_dim, eta_total))
            .copy_from(&(&pred_rows * &eta_map));
        b_k.view_mut((off, 0), (eta_dim, n))
            .copy_from(&(&pred_rows * &x_map));

        // Σ_i I_{i,des j}ᵀ placement of F_j ξ_j into u.
        let mut embed = DMatrix::zeros(m, ip.dim_of(&des));
        for &i in &des {
            let sel: DMatrix<T> = embedding_selector(i, &des, ip)?;
            embed.rows_mut(ip.offset(i), ip.size(i)).copy_from(&sel);
        }
        let out = &embed * &gain;
        c_k += &out * &eta_map;
        d_k += &out * &x_map;

        nodes.push(NodeController {
            node: j,
            descendants: des,
            gain,
            predictor,
            care: None,
            eta_offset: off,
            eta_dim,
            x_map,
            eta_map,
        });
    }
    Ok(DecentralizedController {
        nodes,
        realization: StateSpaceModel::new(a_k, b_k, c_k, d_k)?,
    })
}

fn check_controller<T: Real>(plant: &PartitionedPlant<T>, k: &StateSpaceModel<T>) -> Result<()> {
    if k.inputs() != plant.states() || k.outputs() != plant.inputs() {
        return Err(Error::Dimension(format!(
            "controller maps {} -> {}, plant needs {} -> {}",
            k.inputs(),
            k.outputs(),
            plant.states(),
            plant.inputs()
        )));
    }
    Ok(())
}

/// State matrix of the loop `ẋ = Ax + B Δ u`, `u = K(x)`, with state
/// `[x; η]`. `delta = None` is the nominal loop.
pub fn closed_loop_matrix<T: Real>(
    plant: &PartitionedPlant<T>,
    controller: &StateSpaceModel<T>,
    delta: Option<&DMatrix<T>>,
) -> Result<DMatrix<T>> {
    check_controller(plant, controller)?;
    let n = plant.states();
    let nk = controller.states();
    let bd = match delta {
        Some(d) => {
            if d.shape() != (plant.inputs(), plant.inputs()) {
                return Err(Error::Dimension(format!("Δ is {:?}", d.shape())));
            }
            plant.b() * d
        }
        None => plant.b().clone(),
    };
    let mut acl = DMatrix::zeros(n + nk, n + nk);
    acl.view_mut((0, 0), (n, n))
        .copy_from(&(plant.a() + &bd * &controller.d));
    acl.view_mut((0, n), (n, nk)).copy_from(&(&bd * &controller.c));
    acl.view_mut((n, 0), (nk, n)).copy_from(&controller.b);
    acl.view_mut((n, n), (nk, nk)).copy_from(&controller.a);
    Ok(acl)
}

/// Complex-gain variant of [`closed_loop_matrix`].
pub fn closed_loop_matrix_complex<T: Real>(
    plant: &PartitionedPlant<T>,
    controller: &StateSpaceModel<T>,
    delta: &DMatrix<Complex<T>>,
) -> Result<DMatrix<Complex<T>>> {
    check_controller(plant, controller)?;
    let n = plant.states();
    let nk = controller.states();
    let c = linalg::to_complex;
    let bd = c(plant.b()) * delta;
    let mut acl = DMatrix::zeros(n + nk, n + nk);
    acl.view_mut((0, 0), (n, n))
        .copy_from(&(c(plant.a()) + &bd * c(&controller.d)));
    acl.view_mut((0, n), (n, nk)).copy_from(&(&bd * c(&controller.c)));
    acl.view_mut((n, 0), (nk, n)).copy_from(&c(&controller.b));
    acl.view_mut((n, n), (nk, nk)).copy_from(&c(&controller.a));
    Ok(acl)
}

/// Closed loop with process-noise input at `x` and performance output
/// `[Q^{1/2} x; R^{1/2} u]`. Fails if the loop is not Hurwitz.
pub fn closed_loop<T: Real>(
    plant: &PartitionedPlant<T>,
    controller: &StateSpaceModel<T>,
) -> Result<StateSpaceModel<T>> {
    let acl = closed_loop_matrix(plant, controller, None)?;
    let spec = linalg::eigenvalues(&acl)?;
    if !spec.is_hurwitz(T::zero()) {
        return Err(Error::NotHurwitz(spec.spectral_abscissa.as_f64()));
    }
    let n = plant.states();
    let m = plant.inputs();
    let nk = controller.states();
    let mut bw = DMatrix::zeros(n + nk, n);
    bw.view_mut((0, 0), (n, n)).copy_from(&DMatrix::identity(n, n));
    let (r_half, _) = spd_sqrt(plant.r(), "R")?;
    let mut c = DMatrix::zeros(n + m, n + nk);
    c.view_mut((0, 0), (n, n)).copy_from(&psd_sqrt(plant.q()));
    c.view_mut((n, 0), (m, n)).copy_from(&(&r_half * &controller.d));
    c.view_mut((n, n), (m, nk)).copy_from(&(&r_half * &controller.c));
    StateSpaceModel::new(acl, bw, c, DMatrix::zeros(n + m, n))
}

/// Loop gain `L_dec` from plant input to controller output (loop broken at
/// the plant input): plant `u → x` in series with the controller `x → u`.
pub fn loop_gain_dec<T: Real>(
    plant: &PartitionedPlant<T>,
    controller: &StateSpaceModel<T>,
) -> Result<StateSpaceModel<T>> {
    check_controller(plant, controller)?;
    let n = plant.states();
    let state_out = StateSpaceModel::new(
        plant.a().clone(),
        plant.b().clone(),
        DMatrix::identity(n, n),
        DMatrix::zeros(n, plant.inputs()),
    )?;
    state_out.series(controller)
}

/// Closed-loop map `H_dec` from an input injection `w` (plant input
/// `u + w`) to the controller output `u`.
pub fn closed_loop_map_dec<T: Real>(
    plant: &PartitionedPlant<T>,
    controller: &StateSpaceModel<T>,
) -> Result<StateSpaceModel<T>> {
    let l = loop_gain_dec(plant, controller)?;
    let a = &l.a + &l.b * &l.c;
    StateSpaceModel::new(a, l.b, l.c, l.d)
}

/// Blocks of a frequency response that violate the closure pattern.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InformationReport {
    pub violations: Vec<(f64, BlockViolation)>,
    pub skipped: Vec<f64>,
    pub checked: usize,
}

impl InformationReport {
    pub fn is_conformant(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn max_violation(&self) -> f64 {
        self.violations
            .iter()
            .map(|(_, v)| v.norm)
            .fold(0.0, f64::max)
    }
}

/// Checks `G(jω)` block-by-block against the closure at every grid point.
pub fn verify_information_constraint<T: Real>(
    g: &StateSpaceModel<T>,
    closure: &ClosureTable,
    row_part: &BlockPartition,
    col_part: &BlockPartition,
    grid: &FrequencyGrid<T>,
    tol: f64,
) -> Result<InformationReport> {
    if g.outputs() != row_part.total() || g.inputs() != col_part.total() {
        return Err(Error::Dimension(format!(
            "system is {}x{}, partitions {}x{}",
            g.outputs(),
            g.inputs(),
            row_part.total(),
            col_part.total()
        )));
    }
    let poles = g.poles()?;
    let mut report = InformationReport::default();
    for &w in grid.points() {
        let s = Complex::new(T::zero(), w);
        let resp = if near_pole(&poles, s, T::tol(1e-8)) {
            None
        } else {
            g.eval(s)
        };
        let Some(resp) = resp else {
            report.skipped.push(w.as_f64());
            continue;
        };
        report.checked += 1;
        let r = validate_sparsity(&resp, closure, row_part, col_part, tol)?;
        report
            .violations
            .extend(r.violations.into_iter().map(|v| (w.as_f64(), v)));
    }
    Ok(report)
}

/// Process-noise intensity, block-diagonal over the nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSpec<T: Real> {
    w: DMatrix<T>,
}

impl<T: Real> NoiseSpec<T> {
    pub fn new(w: DMatrix<T>, state_part: &BlockPartition) -> Result<Self> {
        let n = state_part.total();
        if w.shape() != (n, n) {
            return Err(Error::Dimension(format!("W is {:?}, expected {n}x{n}", w.shape())));
        }
        let scale = T::one() + spectral_norm(&w);
        for i in 0..state_part.len() {
            for j in 0..state_part.len() {
                if i == j {
                    continue;
                }
                let block = w
                    .view(
                        (state_part.offset(i), state_part.offset(j)),
                        (state_part.size(i), state_part.size(j)),
                    )
                    .into_owned();
                if spectral_norm(&block) > T::lit(DEFAULT_SPARSITY_TOL) * scale {
                    return Err(Error::InvalidArgument(format!(
                        "noise couples nodes {i} and {j}"
                    )));
                }
            }
        }
        if (&w - w.transpose()).norm() > T::tol(1e-10) * scale
            || min_symmetric_eigenvalue(&w) < -T::tol(1e-10) * scale
        {
            return Err(Error::NotPositiveSemidefinite("W"));
        }
        Ok(NoiseSpec { w: symmetrize(&w) })
    }

    /// Unit-intensity noise on every state.
    pub fn identity(n: usize) -> Self {
        NoiseSpec {
            w: DMatrix::identity(n, n),
        }
    }

    pub fn intensity(&self) -> &DMatrix<T> {
        &self.w
    }
}

/// Steady-state expected cost `E[xᵀQx + uᵀRu]` under white process noise
/// of intensity `W`: `trace(C P Cᵀ)` with `P` the controllability Gramian
/// of the closed loop driven at `x`.
pub fn h2_cost<T: Real>(
    plant: &PartitionedPlant<T>,
    controller: &StateSpaceModel<T>,
    noise: &NoiseSpec<T>,
) -> Result<T> {
    if noise.w.nrows() != plant.states() {
        return Err(Error::Dimension("noise dimension".into()));
    }
    let cl = closed_loop(plant, controller)?;
    let bwb = &cl.b * &noise.w * cl.b.transpose();
    let p = linalg::solve_lyapunov(&cl.a.transpose(), &bwb)?;
    Ok((&cl.c * p * cl.c.transpose()).trace())
}

/// Centralized LQR on the full plant, ignoring the information structure.
pub fn centralized_lqr<T: Real>(plant: &PartitionedPlant<T>) -> Result<CareSolution<T>> {
    solve_care(plant.a(), plant.b(), plant.q(), plant.r())
}
