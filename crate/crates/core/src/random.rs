//! Seeded generators for random test instances.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::graph::{transitive_closure, Dag};
use crate::lqr::{check_detectable, check_stabilizable};
use crate::synthesis::{DecentralizedController, PartitionedPlant};

pub use rand::SeedableRng;

/// Deterministic generator for a seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

/// `G Gᵀ + shift I` with `G` Gaussian.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> DMatrix<f64> {
    let g = normal(rng, n, n);
    &g * g.transpose() / n as f64 + DMatrix::identity(n, n) * shift
}

fn random_positive_diagonal(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i == j { rng.random_range(lo..hi) } else { 0.0 })
}

/// Unstructured LQR data.
#[derive(Debug, Clone, PartialEq)]
pub struct LqrInstance {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

/// Random stabilizable and detectable instance with `n ≤ max_n`,
/// `m ≤ max_m`, `Q ≻ 0` and `R ≻ 0`.
pub fn random_lqr_instance(rng: &mut ChaCha8Rng, max_n: usize, max_m: usize) -> LqrInstance {
    loop {
        let n = rng.random_range(1..=max_n);
        let m = rng.random_range(1..=max_m);
        let a = normal(rng, n, n);
        let b = normal(rng, n, m);
        let q = random_spd(rng, n, 0.1);
        let r = random_spd(rng, m, 0.5);
        if check_stabilizable(&a, &b).is_ok() && check_detectable(&q, &a).is_ok() {
            return LqrInstance { a, b, q, r };
        }
    }
}

/// Shape of a random DAG plant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantOptions {
    pub max_nodes: usize,
    pub edge_probability: f64,
    /// Restrict `B` and `R` to be block-diagonal.
    pub block_diagonal: bool,
}

impl Default for PlantOptions {
    fn default() -> Self {
        PlantOptions {
            max_nodes: 5,
            edge_probability: 0.4,
            block_diagonal: true,
        }
    }
}

/// Random plant over a random DAG with unit blocks. `A` fills every block
/// the closure allows.
pub fn random_dag_plant(rng: &mut ChaCha8Rng, opts: PlantOptions) -> PartitionedPlant<f64> {
    loop {
        let n = rng.random_range(1..=opts.max_nodes.max(1));
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if rng.random_bool(opts.edge_probability) {
                    edges.push((i, j));
                }
            }
        }
        let dag = Dag::with_unit_blocks(n, edges).expect("edges respect node order");
        if let Some(p) = plant_on(rng, dag, opts.block_diagonal) {
            return p;
        }
    }
}

fn plant_on(rng: &mut ChaCha8Rng, dag: Dag, block_diagonal: bool) -> Option<PartitionedPlant<f64>> {
    let n = dag.node_count();
    let closure = transitive_closure(&dag);
    let allowed = |i: usize, j: usize| closure.reach(i, j);
    let a = DMatrix::from_fn(n, n, |i, j| {
        if allowed(i, j) {
            rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        }
    });
    let b = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let mag = rng.random_range(0.5..2.0);
            if rng.random_bool(0.5) {
                mag
            } else {
                -mag
            }
        } else if !block_diagonal && allowed(i, j) {
            rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        }
    });
    let q = random_spd(rng, n, 0.1);
    let r = if block_diagonal {
        random_positive_diagonal(rng, n, 0.5, 5.0)
    } else {
        random_spd(rng, n, 0.5)
    };
    PartitionedPlant::new(dag, a, b, q, r).ok()
}

/// The four-node diamond `0 → {1, 2} → 3` with random block-diagonal data.
pub fn diamond_random(seed: u64) -> PartitionedPlant<f64> {
    let mut rng = rng(seed);
    loop {
        let dag = Dag::with_unit_blocks(4, vec![(0, 1), (0, 2), (1, 3), (2, 3)])
            .expect("diamond is a DAG");
        if let Some(p) = plant_on(&mut rng, dag, true) {
            return p;
        }
    }
}

/// Gains `F_i + scale·G_i` with `G_i` Gaussian of matching shape.
pub fn perturb_gains(
    rng: &mut ChaCha8Rng,
    controller: &DecentralizedController<f64>,
    scale: f64,
) -> Vec<DMatrix<f64>> {
    controller
        .nodes
        .iter()
        .map(|nc| {
            let (r, c) = nc.gain.shape();
            &nc.gain + normal(rng, r, c) * scale
        })
        .collect()
}
