//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the binary exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use hawkes_vb::adaptive::{fully_adaptive, two_step, FitOptions, ModelSet, Threshold};
use hawkes_vb::gibbs::{conjugate_gaussian, gibbs_sample, GibbsConfig};
use hawkes_vb::link::sigmoid;
use hawkes_vb::metrics::evaluate;
use hawkes_vb::scenarios::{sparse_chain, univariate, univariate_two_bins, Effect, MEMORY};
use hawkes_vb::vi::{cavi_dim, elbo_dim, FitData, GaussianPosterior, PriorSpec, ViConfig};
use hawkes_vb::{
    excursion_stats, expected_l1_norm, log_g, pg_mean, pg_sample, simulate, Execution,
    HawkesParams, LinkFunction, Model, QuadratureRule, SimConfig, SubModel,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

/// Traces of every CAVI run, checked together by the monotonicity criterion.
#[derive(Default)]
struct Traces(Vec<(String, Vec<f64>)>);

impl Traces {
    fn add(&mut self, label: &str, post: &GaussianPosterior) {
        self.0.push((label.to_string(), post.elbo_trace.clone()));
    }
}

fn pg_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let draws: Vec<f64> = (0..100_000).map(|_| pg_sample(0.0, &mut rng)).collect();
    let mut worst: f64 = 0.0;
    for x in [-3.0, 0.0, 0.7, 3.0] {
        let vals: Vec<f64> = draws.iter().map(|&w| log_g(w, x).exp()).collect();
        let (m, se) = mean_se(&vals);
        let z = if se > 0.0 {
            (m - sigmoid(x)).abs() / se
        } else {
            (m - sigmoid(x)).abs() / 1e-12
        };
        worst = worst.max(z);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 5.0 && secs < 5.0,
        format!("max |z| = {worst:.2} (< 5), {secs:.2} s (< 5 s)"),
    )
}

fn pg_moments() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (i, c) in [0.0, 0.5, 2.0, 10.0].into_iter().enumerate() {
        let mut rng = ChaCha20Rng::seed_from_u64(10 + i as u64);
        let draws: Vec<f64> = (0..1_000_000).map(|_| pg_sample(c, &mut rng)).collect();
        let (m, se) = mean_se(&draws);
        worst = worst.max((m - pg_mean(c).unwrap()).abs() / se);
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst < 4.0 && secs < 30.0,
        format!("max |z| = {worst:.2} (< 4), {secs:.2} s (< 30 s)"),
    )
}

/// Asymptotic Kolmogorov-Smirnov p-value.
fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    let mut p = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = 2.0 * (-1f64).powi(k - 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        p += term;
        if term.abs() < 1e-12 {
            break;
        }
    }
    p.clamp(0.0, 1.0)
}

fn homogeneous_simulator() -> Outcome {
    let link = LinkFunction::default();
    let nu = 10.0;
    let rate = link.eval(nu);
    let horizon = 100.0;
    let params = HawkesParams::background_only(vec![nu], MEMORY).unwrap();
    let seeds = 200;
    let mut total = 0usize;
    let mut gaps = Vec::new();
    for seed in 0..seeds {
        let cfg = SimConfig::new(params.clone(), vec![link.clone()], horizon, seed);
        let ev = simulate(&cfg).unwrap();
        let times = ev.observed(0);
        total += times.len();
        gaps.extend(times.windows(2).map(|w| w[1] - w[0]));
    }
    let expected = rate * horizon * seeds as f64;
    let z = (total as f64 - expected) / expected.sqrt();
    gaps.sort_by(f64::total_cmp);
    let n = gaps.len();
    let d = gaps
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let cdf = 1.0 - (-rate * g).exp();
            (cdf - i as f64 / n as f64)
                .abs()
                .max(((i + 1) as f64 / n as f64 - cdf).abs())
        })
        .fold(0.0, f64::max);
    let p = ks_p_value(d, n);
    outcome(
        z.abs() < 3.0 && p > 0.01,
        format!("count z = {z:.2} (|z| < 3), KS p = {p:.3} (> 0.01) on {n} gaps"),
    )
}

fn table_one_counts() -> Outcome {
    let sc = univariate(Effect::Excitation);
    let ev = sc.simulate(0).unwrap();
    let st = excursion_stats(&ev, MEMORY);
    let n = st.num_events.iter().sum::<usize>();
    let x = st.num_global_excursions;
    outcome(
        (4200..=6300).contains(&n) && (1250..=1870).contains(&x),
        format!("{n} events in [4200, 6300], {x} excursions in [1250, 1870]"),
    )
}

fn vi_matches_gibbs(traces: &mut Traces) -> Outcome {
    let sc = univariate(Effect::Excitation);
    let ev = sc.simulate(0).unwrap();
    let model = Model::new(vec![SubModel::new(vec![0], 2)]).unwrap();
    let priors = PriorSpec::default().priors_for(&model).unwrap();
    let t0 = Instant::now();
    let data = FitData::new(&ev, MEMORY, 4, QuadratureRule::default()).unwrap();
    let vi = cavi_dim(
        &data.design(0, model.dim(0)),
        &sc.links[0],
        &priors[0],
        &ViConfig::default(),
    )
    .unwrap();
    let vi_time = t0.elapsed();
    traces.add("simulation-2 J=4", &vi);
    let t0 = Instant::now();
    let chain = gibbs_sample(
        &ev,
        &model,
        &sc.links,
        &priors,
        MEMORY,
        &GibbsConfig::default(),
        Execution::Sequential,
    )
    .unwrap();
    let gibbs_time = t0.elapsed();
    let (gm, gs) = (chain.mean(0), chain.sd(0));
    let worst = (0..gm.len())
        .map(|i| (vi.mean[i] - gm[i]).abs() / gs[i])
        .fold(0.0, f64::max);
    let ratio = vi_time.as_secs_f64() / gibbs_time.as_secs_f64();
    outcome(
        worst < 0.5 && ratio < 0.1,
        format!(
            "max |VI - Gibbs| / Gibbs sd = {worst:.3} (< 0.5), VI {:.3} s vs Gibbs {:.1} s (ratio {ratio:.4} < 0.1)",
            vi_time.as_secs_f64(),
            gibbs_time.as_secs_f64()
        ),
    )
}

fn model_selection(traces: &mut Traces) -> Outcome {
    let sc = univariate_two_bins(Effect::Excitation);
    let set = ModelSet::all(1, 5).unwrap();
    let mut hits = 0;
    let mut picks = Vec::new();
    for seed in 0..5 {
        let ev = sc.simulate(seed).unwrap();
        let res = fully_adaptive(&ev, &set, &sc.links, MEMORY, &FitOptions::default()).unwrap();
        for c in &res.dims[0].candidates {
            traces.add("model selection", &c.posterior);
        }
        let best = &res.dims[0].best().submodel;
        if best.parents() == [0] && best.depth() == 1 {
            hits += 1;
        }
        picks.push(format!(
            "J={}{}",
            best.bins(),
            if best.parents().is_empty() {
                " (no edge)"
            } else {
                ""
            }
        ));
    }
    outcome(
        hits >= 4,
        format!(
            "true model selected on {hits}/5 seeds (>= 4): {}",
            picks.join(", ")
        ),
    )
}

struct GraphRun {
    acc_ok: bool,
    risk: f64,
    separated: bool,
    secs: f64,
}

fn two_step_runs(effect: Effect, traces: &mut Traces) -> Vec<GraphRun> {
    let sc = sparse_chain(4, effect);
    let truth_graph = sc.truth.graph();
    (0..5)
        .map(|seed| {
            let ev = sc.simulate(seed).unwrap();
            let t0 = Instant::now();
            let res = two_step(
                &ev,
                &sc.links,
                MEMORY,
                3,
                Threshold::Auto,
                &FitOptions::default(),
            )
            .unwrap();
            let secs = t0.elapsed().as_secs_f64();
            for dim in res.step1.dims.iter().chain(&res.step2.dims) {
                for c in &dim.candidates {
                    traces.add("two-step", &c.posterior);
                }
            }
            let model = res.step2.selected_model();
            let report =
                evaluate(&model, &res.step2.selected_posteriors(), &sc.truth, MEMORY).unwrap();
            let mut lowest_edge = f64::INFINITY;
            let mut highest_other = f64::NEG_INFINITY;
            for (l, row) in res.graph.s_hat.iter().enumerate() {
                for (k, &s) in row.iter().enumerate() {
                    if truth_graph[l][k] {
                        lowest_edge = lowest_edge.min(s);
                    } else {
                        highest_other = highest_other.max(s);
                    }
                }
            }
            let t = res.graph.threshold;
            GraphRun {
                acc_ok: report.acc_graph == 1.0 && report.acc_dim == 1.0,
                risk: report.risk_l1,
                separated: highest_other < t && t < lowest_edge,
                secs,
            }
        })
        .collect()
}

fn graph_recovery(exc: &[GraphRun], inh: &[GraphRun]) -> Outcome {
    let summary = |runs: &[GraphRun], table: f64| {
        let good = runs.iter().filter(|r| r.acc_ok).count();
        let risk = runs.iter().map(|r| r.risk).sum::<f64>() / runs.len() as f64;
        let slowest = runs.iter().map(|r| r.secs).fold(0.0, f64::max);
        (
            good >= 4 && risk <= 2.0 * table && slowest <= 300.0,
            good,
            risk,
            slowest,
        )
    };
    let (ok_e, good_e, risk_e, slow_e) = summary(exc, 1.01);
    let (ok_i, good_i, risk_i, slow_i) = summary(inh, 0.92);
    outcome(
        ok_e && ok_i,
        format!(
            "excitation: exact graph and depths on {good_e}/5, mean risk {risk_e:.2} (<= 2.02), slowest {slow_e:.1} s; \
             inhibition: {good_i}/5, mean risk {risk_i:.2} (<= 1.84), slowest {slow_i:.1} s"
        ),
    )
}

fn gap_threshold(exc: &[GraphRun], inh: &[GraphRun]) -> Outcome {
    let sep = exc.iter().chain(inh).filter(|r| r.separated).count();
    let total = exc.len() + inh.len();
    outcome(
        sep == total,
        format!("threshold separates edges from non-edges on {sep}/{total} fits"),
    )
}

fn risk_decreases_with_horizon() -> Outcome {
    let base = sparse_chain(10, Effect::Excitation);
    let mut ok = true;
    let mut parts = Vec::new();
    for seed in 0..3 {
        let mut risks = [0.0; 2];
        for (slot, horizon) in [50.0, 800.0].into_iter().enumerate() {
            let sc = base.clone().with_horizon(horizon);
            let ev = sc.simulate(seed).unwrap();
            let res = two_step(
                &ev,
                &sc.links,
                MEMORY,
                3,
                Threshold::Auto,
                &FitOptions::default(),
            )
            .unwrap();
            let model = res.step2.selected_model();
            risks[slot] = evaluate(&model, &res.step2.selected_posteriors(), &sc.truth, MEMORY)
                .unwrap()
                .risk_l1;
        }
        ok &= risks[1] < risks[0];
        parts.push(format!("seed {seed}: {:.2} -> {:.2}", risks[0], risks[1]));
    }
    outcome(
        ok,
        format!("K=10 risk at T=50 -> T=800: {}", parts.join(", ")),
    )
}

fn elbo_monotone(traces: &Traces) -> Outcome {
    let mut worst = 0.0f64;
    let mut label = String::new();
    let mut steps = 0;
    for (name, trace) in &traces.0 {
        for w in trace.windows(2) {
            steps += 1;
            let drop = (w[0] - w[1]) / w[0].abs().max(1.0);
            if drop > worst {
                worst = drop;
                label = name.clone();
            }
        }
    }
    let where_ = if label.is_empty() {
        String::new()
    } else {
        format!(" in {label}")
    };
    outcome(
        worst <= 1e-6,
        format!(
            "{} runs, {steps} updates, largest relative decrease {worst:.2e}{where_} (<= 1e-6)",
            traces.0.len()
        ),
    )
}

/// Nelder-Mead minimisation, used as a derivative-free oracle.
fn nelder_mead(f: impl Fn(&[f64]) -> f64, x0: &[f64], step: f64, iters: usize) -> Vec<f64> {
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        simplex.push(x);
    }
    let mut values: Vec<f64> = simplex.iter().map(|x| f(x)).collect();
    for _ in 0..iters {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|x| x[j]).sum::<f64>() / n as f64)
            .collect();
        let towards = |t: f64| -> Vec<f64> {
            (0..n)
                .map(|j| centroid[j] + t * (simplex[n][j] - centroid[j]))
                .collect()
        };
        let reflected = towards(-1.0);
        let fr = f(&reflected);
        if fr < values[0] {
            let expanded = towards(-2.0);
            let fe = f(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            let contracted = if fr < values[n] {
                towards(-0.5)
            } else {
                towards(0.5)
            };
            let fc = f(&contracted);
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    simplex[i] = (0..n)
                        .map(|j| simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j]))
                        .collect();
                    values[i] = f(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap();
    simplex[best].clone()
}

fn oracles(traces: &mut Traces) -> Outcome {
    // CAVI fixed point against direct maximisation of the ELBO over the mean
    // and a Cholesky parametrisation of the covariance.
    let sc = univariate_two_bins(Effect::Excitation).with_horizon(20.0);
    let ev = sc.simulate(3).unwrap();
    let sub = SubModel::new(vec![0], 0);
    let prior = PriorSpec::default().prior_for(&sub).unwrap();
    let data = FitData::new(&ev, MEMORY, 1, QuadratureRule::default()).unwrap();
    let design = data.design(0, &sub);
    let link = &sc.links[0];
    let config = ViConfig {
        max_iter: 5000,
        tol: 1e-12,
        ..ViConfig::default()
    };
    let post = cavi_dim(&design, link, &prior, &config).unwrap();
    traces.add("oracle toy", &post);
    let to_gaussian = |p: &[f64]| {
        let mean = DVector::from_vec(vec![p[0], p[1]]);
        let l = DMatrix::from_row_slice(2, 2, &[p[2].exp(), 0.0, p[3], p[4].exp()]);
        (mean, &l * l.transpose())
    };
    let negative_elbo = |p: &[f64]| {
        let (m, c) = to_gaussian(p);
        elbo_dim(&design, link, &prior, &m, &c).map_or(f64::INFINITY, |e| -e)
    };
    let mut x = vec![0.0, 0.0, 0.0, 0.0, 0.0];
    for _ in 0..8 {
        x = nelder_mead(&negative_elbo, &x, 0.5, 4000);
    }
    let (bm, bc) = to_gaussian(&x);
    let brute_elbo = -negative_elbo(&x);
    let mean_gap = (&post.mean - &bm).amax();
    let cov_gap = (&post.cov - &bc).amax();
    let elbo_gap = (post.elbo - brute_elbo).abs();
    let cavi_ok = mean_gap < 1e-3 && cov_gap < 1e-3 && elbo_gap < 1e-3;

    // Conjugate Gibbs step against a dense linear solve.
    let sc = univariate(Effect::Mixed).with_horizon(30.0);
    let ev = sc.simulate(5).unwrap();
    let sub = SubModel::new(vec![0], 2);
    let prior = hawkes_vb::vi::GaussianPrior::diagonal(
        DVector::from_vec(vec![0.5, -0.1, 0.2, 0.0, 0.3]),
        &[4.0, 1.0, 2.0, 0.5, 3.0],
    )
    .unwrap();
    let data = FitData::new(&ev, MEMORY, 4, QuadratureRule::default()).unwrap();
    let design = data.design(0, &sub);
    let mut rng = ChaCha20Rng::seed_from_u64(8);
    let ev_omega: Vec<f64> = design
        .events
        .weights()
        .iter()
        .map(|&n| n * rng.random::<f64>())
        .collect();
    let lat_counts: Vec<f64> = (0..design.latent.nrows())
        .map(|_| (rng.random::<f64>() * 3.0).floor())
        .collect();
    let lat_omega: Vec<f64> = lat_counts
        .iter()
        .map(|&n| n * rng.random::<f64>())
        .collect();
    let link = &sc.links[0];
    let (mean, _) =
        conjugate_gaussian(&design, &ev_omega, &lat_counts, &lat_omega, link, &prior).unwrap();
    let p = prior.dim();
    let mut precision = prior.precision().clone();
    let mut rhs = prior.precision() * prior.mean();
    let (a, eta) = (link.alpha, link.eta);
    for (rows, counts, omega, half) in [
        (&design.events, design.events.weights(), &ev_omega[..], 0.5),
        (&design.latent, &lat_counts[..], &lat_omega[..], -0.5),
    ] {
        for i in 0..rows.nrows() {
            let x = rows.dense_row(i);
            precision += a * a * omega[i] * &x * x.transpose();
            rhs += (a * half * counts[i] + a * a * eta * omega[i]) * &x;
        }
    }
    assert_eq!(precision.nrows(), p);
    let direct = precision.lu().solve(&rhs).unwrap();
    let solve_gap = (&mean - &direct).amax() / direct.amax().max(1.0);
    let solve_ok = solve_gap < 1e-10;

    // Folded-normal expected norm against Monte Carlo.
    let m = DVector::from_vec(vec![0.3, -0.05, 0.0, 0.8]);
    let c = DMatrix::from_row_slice(
        4,
        4,
        &[
            0.04, 0.01, 0.0, 0.0, //
            0.01, 0.02, 0.0, 0.0, //
            0.0, 0.0, 0.09, 0.0, //
            0.0, 0.0, 0.0, 0.25,
        ],
    );
    let exact = expected_l1_norm(&m, &c).unwrap();
    let chol = c.clone().cholesky().unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(21);
    let draws = 400_000;
    let mut acc = 0.0;
    for _ in 0..draws {
        let z = DVector::from_fn(4, |_, _| rng.sample::<f64, _>(StandardNormal));
        acc += (&m + chol.l() * z).abs().sum();
    }
    let mc = acc / draws as f64;
    let norm_ok = (mc - exact).abs() < 1e-2;

    outcome(
        cavi_ok && solve_ok && norm_ok,
        format!(
            "CAVI vs direct ELBO maximisation: mean {mean_gap:.1e}, cov {cov_gap:.1e}, ELBO {elbo_gap:.1e} (< 1e-3); \
             conjugate step vs dense solve {solve_gap:.1e} (< 1e-10); expected norm {exact:.4} vs MC {mc:.4} (< 1e-2)"
        ),
    )
}

fn report(id: usize, name: &str, start: Instant, out: &Outcome) {
    let status = if out.pass { "PASS" } else { "FAIL" };
    let secs = Duration::as_secs_f64(&start.elapsed());
    println!(
        "criterion {id:>2} [{status}] {name}: {} ({secs:.1} s)",
        out.detail
    );
}

fn main() {
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    if !filter.is_empty() && !filter.iter().any(|f| "acceptance".contains(f.as_str())) {
        return;
    }
    let mut traces = Traces::default();
    let mut results = Vec::new();
    let mut run = |id: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let out = f();
        report(id, name, start, &out);
        results.push(out.pass);
    };
    run(1, "Polya-Gamma identity", &mut pg_identity);
    run(2, "Polya-Gamma mean", &mut pg_moments);
    run(3, "homogeneous simulator", &mut homogeneous_simulator);
    run(4, "univariate excitation counts", &mut table_one_counts);
    run(5, "VI against Gibbs", &mut || vi_matches_gibbs(&mut traces));
    // criterion 6 is evaluated last, over every CAVI run collected above and below
    run(7, "depth selection", &mut || model_selection(&mut traces));
    let start = Instant::now();
    let exc = two_step_runs(Effect::Excitation, &mut traces);
    let inh = two_step_runs(Effect::Inhibition, &mut traces);
    let shared = start.elapsed();
    let mut run_shared = |id: usize, name: &str, out: Outcome| {
        let status = if out.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {id:>2} [{status}] {name}: {} ({:.1} s shared)",
            out.detail,
            shared.as_secs_f64()
        );
        results.push(out.pass);
    };
    run_shared(8, "two-step graph recovery", graph_recovery(&exc, &inh));
    run_shared(9, "gap threshold", gap_threshold(&exc, &inh));
    let mut run = |id: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let out = f();
        report(id, name, start, &out);
        results.push(out.pass);
    };
    run(
        10,
        "risk decreases with T",
        &mut risk_decreases_with_horizon,
    );
    run(11, "oracles", &mut || oracles(&mut traces));
    run(6, "ELBO monotonicity", &mut || elbo_monotone(&traces));
    let failed = results.iter().filter(|&&p| !p).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
