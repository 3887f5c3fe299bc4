use hawkes_vb::metrics::true_depths;
use hawkes_vb::scenarios::{sparse_chain, Effect, MEMORY};
use hawkes_vb::{
    evaluate, graph_accuracy, l1_risk, GaussianPosterior, HawkesParams, Model, SubModel,
};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

fn posterior(mean: Vec<f64>, sd: f64) -> GaussianPosterior {
    let p = mean.len();
    GaussianPosterior {
        mean: DVector::from_vec(mean),
        cov: DMatrix::identity(p, p) * (sd * sd),
        elbo: 0.0,
        elbo_trace: vec![],
        iterations: 0,
        converged: true,
    }
}

/// `||h - h0||_1` for step functions on `[0, A]`, integrated on a fine grid
/// that contains every breakpoint.
fn kernel_distance(w: &[f64], w0: &[f64]) -> f64 {
    let n = 64;
    let height = |ws: &[f64], x: f64| {
        if ws.is_empty() {
            return 0.0;
        }
        let j = ws.len();
        let bin = ((x / MEMORY * j as f64).ceil() as usize).clamp(1, j) - 1;
        ws[bin] * j as f64 / MEMORY
    };
    (0..n)
        .map(|i| {
            let x = (i as f64 + 0.5) * MEMORY / n as f64;
            (height(w, x) - height(w0, x)).abs() * MEMORY / n as f64
        })
        .sum()
}

#[test]
fn risk_matches_monte_carlo() {
    // 1 bin fitted against a 2-bin truth on one edge, the edge missing on another
    let truth = HawkesParams::from_weights(
        vec![-1.0, 0.5],
        vec![
            vec![vec![0.2, -0.1], vec![0.3, 0.1]],
            vec![vec![], vec![0.05, 0.05]],
        ],
        MEMORY,
    )
    .unwrap();
    let model = Model::new(vec![
        SubModel::new(vec![0], 0),
        SubModel::new(vec![0, 1], 1),
    ])
    .unwrap();
    let p0 = posterior(vec![-0.8, 0.12], 0.1);
    let p1 = posterior(vec![0.4, 0.25, 0.0, 0.1, 0.02], 0.08);
    let exact = l1_risk(&model, &[&p0, &p1], &truth, MEMORY).unwrap();

    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let n = 100_000;
    let mut acc = 0.0;
    for _ in 0..n {
        let mut draw = |p: &GaussianPosterior| -> Vec<f64> {
            let sd = p.cov[(0, 0)].sqrt();
            p.mean
                .iter()
                .map(|m| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m + sd * z
                })
                .collect()
        };
        let f0 = draw(&p0);
        let f1 = draw(&p1);
        acc += (f0[0] - truth.nu()[0]).abs() + (f1[0] - truth.nu()[1]).abs();
        acc += kernel_distance(&f0[1..2], truth.weights(0, 0));
        acc += kernel_distance(&[], truth.weights(1, 0));
        acc += kernel_distance(&f1[1..3], truth.weights(0, 1));
        acc += kernel_distance(&f1[3..5], truth.weights(1, 1));
    }
    let mc = acc / n as f64;
    assert!((mc - exact).abs() < 1e-2, "{mc} vs {exact}");
}

#[test]
fn truth_as_point_mass_has_zero_risk() {
    let sc = sparse_chain(3, Effect::Mixed);
    let model = Model::from_graph(&sc.truth.graph(), &true_depths(&sc.truth).unwrap()).unwrap();
    let posts: Vec<GaussianPosterior> = (0..3)
        .map(|k| {
            let sub = model.dim(k);
            let mut m = vec![sc.truth.nu()[k]];
            for &l in sub.parents() {
                m.extend_from_slice(sc.truth.weights(l, k));
            }
            posterior(m, 0.0)
        })
        .collect();
    let refs: Vec<&GaussianPosterior> = posts.iter().collect();
    let report = evaluate(&model, &refs, &sc.truth, MEMORY).unwrap();
    assert_eq!(report.risk_l1, 0.0);
    assert_eq!(report.acc_graph, 1.0);
    assert_eq!(report.acc_dim, 1.0);
}

#[test]
fn one_flipped_edge_of_sixteen() {
    let truth = sparse_chain(4, Effect::Excitation).truth.graph();
    let mut hat = truth.clone();
    hat[3][0] = !hat[3][0];
    assert_eq!(graph_accuracy(&hat, &truth).unwrap(), 15.0 / 16.0);
}
