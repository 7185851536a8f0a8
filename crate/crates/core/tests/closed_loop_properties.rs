use declqr::linalg::{eigenvalues, is_hurwitz};
use declqr::random::{diamond_random, random_dag_plant, rng, PlantOptions};
use declqr::robustness::{
    channel_delta, complex_gain_hurwitz, perturbed_closed_loop, NyquistAnalyzer, Perturbation,
};
use declqr::synthesis::{closed_loop_matrix, synthesize};
use declqr::{Complex, DMatrix};
use proptest::prelude::*;
use rand::Rng;

fn rk4(a: &DMatrix<f64>, z0: &DMatrix<f64>, h: f64, steps: usize) -> Vec<DMatrix<f64>> {
    let mut out = vec![z0.clone()];
    let mut z = z0.clone();
    for _ in 0..steps {
        let k1 = a * &z;
        let k2 = a * (&z + &k1 * (h / 2.0));
        let k3 = a * (&z + &k2 * (h / 2.0));
        let k4 = a * (&z + &k3 * h);
        z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        out.push(z.clone());
    }
    out
}

#[test]
fn correction_states_evolve_autonomously() {
    let plant = diamond_random(7);
    let ctrl = synthesize(&plant).unwrap();
    let acl = closed_loop_matrix(&plant, ctrl.realization(), None).unwrap();
    let n = plant.states();
    let nk = ctrl.realization().states();
    let mut g = rng(5);
    let z0 = DMatrix::from_fn(n + nk, 1, |_, _| g.random_range(-1.0..1.0));
    let h = 1e-3;
    let traj = rk4(&acl, &z0, h, 5000);
    let split = |z: &DMatrix<f64>| (z.rows(0, n).into_owned(), z.rows(n, nk).into_owned());
    for nc in &ctrl.nodes {
        let xi: Vec<DMatrix<f64>> = traj
            .iter()
            .map(|z| {
                let (x, eta) = split(z);
                ctrl.reconstruct_xi(nc.node, &x, &eta)
            })
            .collect();
        for t in (2..traj.len() - 2).step_by(97) {
            let d = (&xi[t - 2] - &xi[t - 1] * 8.0 + &xi[t + 1] * 8.0 - &xi[t + 2]) / (12.0 * h);
            let model = &nc.predictor * &xi[t];
            let err = (&d - &model).norm() / (1.0 + model.norm());
            assert!(err < 1e-6, "node {} t={t}: {err}", nc.node);
        }
    }
    // The correction states add up to the plant state.
    let sp = plant.state_partition();
    for z in traj.iter().step_by(500) {
        let (x, eta) = split(z);
        let mut sum = DMatrix::zeros(n, 1);
        for nc in &ctrl.nodes {
            let xi = ctrl.reconstruct_xi(nc.node, &x, &eta);
            let mut row = 0;
            for &v in &nc.descendants {
                let sz = sp.size(v);
                let mut dst = sum.rows_mut(sp.offset(v), sz);
                dst += xi.rows(row, sz);
                row += sz;
            }
        }
        assert!((sum - x).norm() < 1e-10);
    }
}

#[test]
fn diamond_riccati_residuals() {
    let plant = diamond_random(7);
    let ctrl = synthesize(&plant).unwrap();
    assert_eq!(ctrl.nodes.len(), 4);
    for nc in &ctrl.nodes {
        let care = nc.care.as_ref().unwrap();
        assert!(care.residual <= 1e-8 * care.residual_scale.max(1.0), "{}", care.residual);
    }
    let acl = closed_loop_matrix(&plant, ctrl.realization(), None).unwrap();
    assert!(is_hurwitz(&acl, 0.0).unwrap());
    let ones = Perturbation::StaticReal(vec![1.0; 4]);
    assert!(is_hurwitz(&perturbed_closed_loop(&plant, &ctrl, &ones).unwrap(), 0.0).unwrap());
}

#[test]
fn closed_loop_spectrum_is_union_on_random_plants() {
    let mut g = rng(21);
    for _ in 0..30 {
        let plant = random_dag_plant(&mut g, PlantOptions { block_diagonal: false, ..Default::default() });
        let ctrl = synthesize(&plant).unwrap();
        let acl = closed_loop_matrix(&plant, ctrl.realization(), None).unwrap();
        let mut got: Vec<Complex<f64>> = eigenvalues(&acl).unwrap().eigenvalues;
        let mut want: Vec<Complex<f64>> = ctrl
            .nodes
            .iter()
            .flat_map(|nc| eigenvalues(&nc.predictor).unwrap().eigenvalues)
            .collect();
        let key = |z: &Complex<f64>| (z.re, z.im);
        got.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        want.sort_by(|a, b| key(a).partial_cmp(&key(b)).unwrap());
        assert_eq!(got.len(), want.len());
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).norm() < 1e-6 * (1.0 + b.norm()), "{a} vs {b}");
        }
    }
}

#[test]
fn complex_gains_nyquist_matches_eigenvalues() {
    let mut g = rng(33);
    for _ in 0..10 {
        let plant = random_dag_plant(&mut g, PlantOptions { max_nodes: 3, ..Default::default() });
        let ctrl = synthesize(&plant).unwrap();
        let nyq = NyquistAnalyzer::new(&plant, &ctrl).unwrap();
        for _ in 0..4 {
            let ch = g.random_range(0..plant.node_count());
            let c = Complex::from_polar(g.random_range(0.3..3.0), g.random_range(-3.0..3.0));
            let d = channel_delta(&plant, ch, c).unwrap();
            assert_eq!(
                nyq.is_stable(&d).unwrap(),
                complex_gain_hurwitz(&plant, &ctrl, ch, c).unwrap()
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn admissible_static_gains_keep_stability(seed in any::<u64>()) {
        let mut g = rng(seed);
        let plant = random_dag_plant(&mut g, PlantOptions { max_nodes: 3, ..Default::default() });
        let ctrl = synthesize(&plant).unwrap();
        let levels = [0.51, 0.75, 1.0, 2.0, 10.0];
        let n = plant.node_count();
        for mut idx in 0..levels.len().pow(n as u32) {
            let mut k = Vec::with_capacity(n);
            for _ in 0..n {
                k.push(levels[idx % levels.len()]);
                idx /= levels.len();
            }
            let a = perturbed_closed_loop(&plant, &ctrl, &Perturbation::StaticReal(k.clone())).unwrap();
            prop_assert!(is_hurwitz(&a, 0.0).unwrap(), "gains {:?}", k);
        }
    }
}
