mod common;

use common::*;
use gear_tda::linalg::Matrix;
use gear_tda::nets::{mlp_cost, mlp_gradient, rbf_basis, rbf_fit_output, MlpParams};
use gear_tda::svr::{dual_objective, svr_train, SvrConfig};
use gear_tda::synth::{synthesize_stage, GearSignalSpec};
use gear_tda::tda::direct_tda;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn direct_average_matches_elementwise_mean() {
    let rs = synthesize_stage(&GearSignalSpec {
        crack_severity: 0.7,
        ..Default::default()
    })
    .unwrap();
    for n in [1, 40, 160] {
        let tda = direct_tda(&rs, n).unwrap();
        assert!(max_rel_error(tda.samples(), &elementwise_mean(&rs, n)) <= 1e-15);
    }
}

#[test]
fn mlp_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let h = 1e-6;
    for case in 0..100u64 {
        let d = rng.random_range(1..=40);
        let n = rng.random_range(3..=12);
        let decay = if case % 2 == 0 { 1.5 } else { 0.0 };
        let x = Matrix::from_vec(
            n,
            d,
            (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let y =
            Matrix::from_vec(n, 1, (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
        let p = MlpParams::random(d, 5, 1, case);
        let analytic = mlp_gradient(&p, &x, &y, decay).unwrap().to_flat();
        let w = p.to_flat();
        let numeric: Vec<f64> = (0..w.len())
            .map(|i| {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[i] += h;
                wm[i] -= h;
                let fp = mlp_cost(&p.with_flat(&wp).unwrap(), &x, &y, decay).unwrap();
                let fm = mlp_cost(&p.with_flat(&wm).unwrap(), &x, &y, decay).unwrap();
                (fp - fm) / (2.0 * h)
            })
            .collect();
        let diff: f64 = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let size: f64 = analytic.iter().map(|a| a * a).sum::<f64>().sqrt()
            + numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(diff / size < 1e-6, "case {case}: {}", diff / size);
    }
}

#[test]
fn rbf_interpolates_with_centres_on_the_data() {
    let xs: Vec<f64> = (0..15).map(|i| i as f64 * 0.2).collect();
    let ys: Vec<f64> = xs.iter().map(|v| v.sin()).collect();
    let x = Matrix::from_vec(15, 1, xs.clone()).unwrap();
    let y = Matrix::column(ys.clone());
    let p = rbf_fit_output(&x, &x, &y, 1e-10).unwrap();
    let mut sq = 0.0;
    for (xi, yi) in xs.iter().zip(&ys) {
        let phi = rbf_basis(&x, &[*xi]).unwrap();
        let out: f64 = phi.iter().zip(p.w2.row(0)).map(|(a, b)| a * b).sum::<f64>() + p.b2[0];
        sq += (out - yi) * (out - yi);
    }
    assert!((sq / 15.0).sqrt() < 1e-6);
}

// With a centre on every point plus a bias the design matrix has a null
// direction fixed only by the 1e-10 ridge, which squared normal equations
// cannot resolve in f64; the weight comparison uses fewer centres.
#[test]
fn rbf_output_layer_matches_normal_equations() {
    let xs: Vec<f64> = (0..15).map(|i| i as f64 * 0.2).collect();
    let ys: Vec<f64> = xs.iter().map(|v| v.sin()).collect();
    let cs: Vec<f64> = xs.iter().step_by(3).copied().collect();
    let x = Matrix::from_vec(15, 1, xs.clone()).unwrap();
    let centres = Matrix::from_vec(cs.len(), 1, cs.clone()).unwrap();
    let p = rbf_fit_output(&centres, &x, &Matrix::column(ys.clone()), 1e-10).unwrap();
    let phi: Vec<Vec<f64>> = xs
        .iter()
        .map(|a| cs.iter().map(|b| tps((a - b).abs())).collect())
        .collect();
    let oracle = rbf_normal_equations(&phi, &ys, 1e-10);
    let mut ours = p.w2.row(0).to_vec();
    ours.push(p.b2[0]);
    let scale = oracle.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    for (a, b) in ours.iter().zip(&oracle) {
        assert!((a - b).abs() / scale < 1e-8, "{a} vs {b}");
    }
}

fn svr_instance(seed: u64, n: usize) -> (Matrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Matrix::from_vec(
        n,
        2,
        (0..2 * n).map(|_| rng.random_range(-2.0..2.0)).collect(),
    )
    .unwrap();
    let y = x
        .iter_rows()
        .map(|r| r[0] - 0.5 * r[1] + rng.random_range(-0.5..0.5))
        .collect();
    (x, y)
}

#[test]
fn smo_matches_small_instance_oracles() {
    let cfg = SvrConfig {
        c: 1.0,
        epsilon: 0.1,
        kernel_width: 1.0,
        ..Default::default()
    };
    for n in 2..=6 {
        for seed in 0..3 {
            let (x, y) = svr_instance(100 * n as u64 + seed, n);
            let t = svr_train(&x, &y, &cfg).unwrap();
            assert!(t.status.converged);
            let ours = dual_objective(&t.alpha, &t.alpha_star, &x, &y, &cfg).unwrap();
            let k = gram(&x, cfg.kernel_width);
            let (exact, _, bias) = svr_active_set_oracle(&k, &y, cfg.epsilon, cfg.c);
            assert!(
                (ours - exact).abs() < 1e-9,
                "n {n} seed {seed}: {ours} vs {exact}"
            );
            if let Some(b) = bias {
                assert!((t.params.bias - b).abs() < 1e-3, "n {n} seed {seed}: bias");
            }
            if n <= 5 {
                let (grid, _) = svr_grid_oracle(&k, &y, cfg.epsilon, cfg.c);
                assert!(grid <= exact + 1e-12);
                assert!(
                    (ours - grid).abs() < 1e-3,
                    "n {n} seed {seed}: {ours} vs grid {grid}"
                );
            }
        }
    }
}
