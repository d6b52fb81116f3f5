//! Shared oracles and generators for the integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};

use survstrat::clustering::soft_assign_var;
use survstrat::config::{HeadsMode, LossWeights};
use survstrat::data::SurvivalDataset;
use survstrat::losses;
use survstrat::metrics::StepCurve;
use survstrat::networks::{DistributionVars, NetworkConfig, SurvivalNetwork};
use survstrat::tensor::{Tape, Tensor, Var};
use survstrat::Result;

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_TOL: f64 = 1e-4;
pub const INSTANCES: u64 = 10;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Tensor {
    let data = (0..rows * cols)
        .map(|_| {
            let v: f64 = StandardNormal.sample(rng);
            scale * v
        })
        .collect::<Vec<f64>>();
    Tensor::new(rows, cols, data).unwrap()
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn relative_error(a: &Tensor, b: &Tensor) -> f64 {
    let norm = |t: &[f64]| t.iter().map(|v| v * v).sum::<f64>().sqrt();
    let diff: Vec<f64> = a.data().iter().zip(b.data()).map(|(x, y)| x - y).collect();
    let scale = norm(a.data()).max(norm(b.data()));
    if scale == 0.0 {
        0.0
    } else {
        norm(&diff) / scale
    }
}

/// Worst relative error between reverse-mode gradients of `f` and central
/// differences, over every input.
pub fn check_inputs<F>(inputs: &[Tensor], f: F) -> f64
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Result<Var<'t>>,
{
    let tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.variable(t.clone())).collect();
    let loss = f(&tape, &vars).unwrap();
    let grads = loss.backward().unwrap();
    let eval = |vals: &[Tensor]| {
        let tape = Tape::new();
        let vars: Vec<Var> = vals.iter().map(|t| tape.constant(t.clone())).collect();
        f(&tape, &vars).unwrap().item()
    };
    let mut worst: f64 = 0.0;
    for (k, var) in vars.iter().enumerate() {
        let analytic = grads.wrt(*var);
        let mut numeric = Tensor::zeros(inputs[k].rows(), inputs[k].cols());
        for idx in 0..inputs[k].data().len() {
            let mut vals = inputs.to_vec();
            vals[k].data_mut()[idx] += FD_STEP;
            let up = eval(&vals);
            vals[k].data_mut()[idx] -= 2.0 * FD_STEP;
            let down = eval(&vals);
            numeric.data_mut()[idx] = (up - down) / (2.0 * FD_STEP);
        }
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    worst
}

/// Same check for every parameter of a network.
pub fn check_params<F>(net: &mut SurvivalNetwork, f: F) -> f64
where
    F: for<'t> Fn(&SurvivalNetwork, &'t Tape) -> Result<Var<'t>>,
{
    let ids: Vec<_> = net.params().ids().collect();
    net.params_mut().zero_grad();
    {
        let tape = Tape::new();
        let loss = f(net, &tape).unwrap();
        let grads = loss.backward().unwrap();
        net.params_mut().accumulate(&grads);
    }
    let mut worst: f64 = 0.0;
    for id in ids {
        let analytic = net.params().grad(id).clone();
        let mut numeric = Tensor::zeros(analytic.rows(), analytic.cols());
        for idx in 0..analytic.data().len() {
            let orig = net.params().value(id).data()[idx];
            let mut at = |v: f64| {
                net.params_mut().value_mut(id).data_mut()[idx] = v;
                let tape = Tape::new();
                f(net, &tape).unwrap().item()
            };
            let up = at(orig + FD_STEP);
            let down = at(orig - FD_STEP);
            at(orig);
            numeric.data_mut()[idx] = (up - down) / (2.0 * FD_STEP);
        }
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    worst
}

/// `U[s, t] = 1` iff `s > t`.
pub fn tail_matrix(bins: usize) -> Tensor {
    let mut u = Tensor::zeros(bins + 1, bins);
    for s in 0..=bins {
        for t in 0..bins {
            if s > t {
                u.set(s, t, 1.0);
            }
        }
    }
    u
}

pub fn distribution<'t>(tape: &'t Tape, logits: Var<'t>) -> DistributionVars<'t> {
    let bins = logits.cols() - 1;
    let probs = logits.row_softmax().unwrap();
    let survival = probs.matmul(tape.constant(tail_matrix(bins))).unwrap();
    DistributionVars { probs, survival }
}

pub struct SurvivalDraw {
    pub times: Vec<f64>,
    pub events: Vec<bool>,
    pub bins: Vec<usize>,
}

pub fn survival_draw(rng: &mut ChaCha8Rng, n: usize, bins: usize) -> SurvivalDraw {
    let times: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..10.0)).collect();
    let mut events: Vec<bool> = (0..n).map(|_| rng.random_bool(0.6)).collect();
    events[0] = true;
    events[1] = false;
    let bins = times
        .iter()
        .map(|t| ((t / 10.0 * bins as f64) as usize).min(bins - 1))
        .collect();
    SurvivalDraw { times, events, bins }
}

pub fn labels(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut l: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
    for (i, slot) in l.iter_mut().take(k).enumerate() {
        *slot = i;
    }
    l
}

fn small_network(seed: u64, siamese: bool, heads: HeadsMode) -> SurvivalNetwork {
    let cfg = NetworkConfig {
        input_dim: 3,
        latent_dim: 2,
        time_bins: 3,
        variational: true,
        siamese,
        heads,
        k: 2,
        encoder_hidden: vec![4],
        head_hidden: vec![4],
    };
    SurvivalNetwork::new(cfg, &mut rng(seed)).unwrap()
}

/// Worst gradient error per objective, each over `INSTANCES` seeded draws.
pub fn gradient_suite() -> Vec<(&'static str, f64)> {
    let mut report: Vec<(&'static str, f64)> = Vec::new();
    let mut run = |name: &'static str, case: &dyn Fn(u64) -> f64| {
        let worst = (0..INSTANCES).map(case).fold(0.0, f64::max);
        report.push((name, worst));
    };
    run("rec", &|s| {
        let mut r = rng(s);
        let x = normal(&mut r, 5, 3, 1.0);
        let xh = normal(&mut r, 5, 3, 1.0);
        check_inputs(&[x, xh], |_, v| Ok(losses::rec(v[0], v[1])?.scalar))
    });
    run("kld", &|s| {
        let mut r = rng(100 + s);
        let mu = normal(&mut r, 5, 3, 1.0);
        let lv = normal(&mut r, 5, 3, 0.5);
        check_inputs(&[mu, lv], |_, v| Ok(losses::kld(v[0], v[1])?.scalar))
    });
    run("clus", &|s| {
        let mut r = rng(200 + s);
        let z = normal(&mut r, 6, 2, 1.0);
        let c = normal(&mut r, 3, 2, 1.0);
        let a = labels(&mut r, 6, 3);
        check_inputs(&[z], move |_, v| Ok(losses::clus(v[0], &c, &a)?.scalar))
    });
    run("ivcg", &|s| {
        let mut r = rng(300 + s);
        let z = normal(&mut r, 8, 3, 1.0);
        let d = survival_draw(&mut r, 8, 3);
        let a = labels(&mut r, 8, 2);
        check_inputs(&[z], move |_, v| losses::ivcg(v[0], &d.events, &a, 0.5))
    });
    run("iviw", &|s| {
        let mut r = rng(400 + s);
        let z1 = normal(&mut r, 6, 3, 1.0);
        let z2 = normal(&mut r, 6, 3, 1.0);
        check_inputs(&[z1, z2], |_, v| losses::iviw(v[0], v[1], 0.7))
    });
    run("ivcw", &|s| {
        let mut r = rng(500 + s);
        let z1 = normal(&mut r, 6, 2, 1.0);
        let z2 = normal(&mut r, 6, 2, 1.0);
        let c = normal(&mut r, 3, 2, 1.0);
        // through the Student-t soft assignments
        check_inputs(&[z1, z2, c], |_, v| {
            let q1 = soft_assign_var(v[0], v[2], 1.0)?;
            let q2 = soft_assign_var(v[1], v[2], 1.0)?;
            losses::ivcw(q1, q2, 0.5)
        })
    });
    run("nll", &|s| {
        let mut r = rng(600 + s);
        let logits = normal(&mut r, 7, 5, 1.0);
        let d = survival_draw(&mut r, 7, 4);
        check_inputs(&[logits], move |tape, v| {
            losses::nll(&distribution(tape, v[0]), &d.bins, &d.events)
        })
    });
    run("rank", &|s| {
        let mut r = rng(700 + s);
        let logits = normal(&mut r, 7, 5, 1.0);
        let d = survival_draw(&mut r, 7, 4);
        check_inputs(&[logits], move |tape, v| {
            losses::rank(&distribution(tape, v[0]), &d.bins, &d.times, &d.events, 0.3)
        })
    });
    run("pretraining objective", &|s| {
        let mut r = rng(800 + s);
        let x = normal(&mut r, 6, 3, 1.0);
        let d = survival_draw(&mut r, 6, 3);
        let mut net = small_network(s, false, HeadsMode::Shared);
        let w = LossWeights::default();
        check_params(&mut net, move |net, tape| {
            let xv = tape.constant(x.clone());
            let enc = net.encode(tape, xv, 0, Some(&mut rng(s)))?;
            let rec = losses::rec(xv, net.decode(tape, enc.z, 0)?)?.scalar;
            let kld = losses::kld(enc.mu, enc.log_var.unwrap())?.scalar;
            let dist = net.survival_forward(tape, net.survival_input(&[enc.z], xv)?, None)?;
            let nll = losses::nll(&dist, &d.bins, &d.events)?;
            let rank = losses::rank(&dist, &d.bins, &d.times, &d.events, w.sigma_rank)?;
            let surv = losses::survival_total(nll, rank, w.beta)?;
            rec.scale(w.rec)?.add(kld.scale(w.kld)?)?.add(surv.scale(w.surv)?)
        })
    });
    run("refinement objective", &|s| {
        let mut r = rng(900 + s);
        let x = normal(&mut r, 8, 3, 1.0);
        let d = survival_draw(&mut r, 8, 3);
        let a = labels(&mut r, 8, 2);
        let centers = normal(&mut r, 2, 2, 1.0);
        let admitted: Vec<f64> = (0..8).map(|i| if i % 3 == 2 { 0.0 } else { 1.0 }).collect();
        let mut net = small_network(s, true, HeadsMode::PerCluster);
        let w = LossWeights {
            iviw: 0.3,
            ivcw: 0.2,
            ..LossWeights::default()
        };
        check_params(&mut net, move |net, tape| {
            let xv = tape.constant(x.clone());
            let mut sampler = rng(s);
            let mut zs = Vec::new();
            let mut recs = Vec::new();
            let mut klds = Vec::new();
            let mut clus = Vec::new();
            for v in 0..2 {
                let enc = net.encode(tape, xv, v, Some(&mut sampler))?;
                recs.push(losses::rec(xv, net.decode(tape, enc.z, v)?)?);
                klds.push(losses::kld(enc.mu, enc.log_var.unwrap())?);
                clus.push(losses::clus(enc.z, &centers, &a)?);
                zs.push(enc.z);
            }
            let per = losses::instance_loss(
                losses::average_views(&recs)?.per_instance,
                Some(losses::average_views(&klds)?.per_instance),
                losses::average_views(&clus)?.per_instance,
                &w,
            )?;
            let spl = per.mul(tape.constant(Tensor::column(&admitted)))?.mean()?;
            let cv = tape.constant(centers.clone());
            let terms = losses::ContrastiveTerms {
                ivcg: Some(losses::ivcg(zs[0], &d.events, &a, w.tau)?),
                iviw: Some(losses::iviw(zs[0], zs[1], w.tau)?),
                ivcw: Some(losses::ivcw(
                    soft_assign_var(zs[0], cv, 1.0)?,
                    soft_assign_var(zs[1], cv, 1.0)?,
                    w.tau,
                )?),
            };
            let cl = losses::contrastive_total(tape, &terms, &w, true)?;
            let dist = net.survival_forward(tape, net.survival_input(&zs, xv)?, Some(&a))?;
            let nll = losses::nll(&dist, &d.bins, &d.events)?;
            let rank = losses::rank(&dist, &d.bins, &d.times, &d.events, w.sigma_rank)?;
            let surv = losses::survival_total(nll, rank, w.beta)?;
            spl.scale(w.spl)?.add(cl.scale(w.cl)?)?.add(surv.scale(w.surv)?)
        })
    });
    report
}

/// Harrell's C by listing every ordered pair.
pub fn brute_force_c_index(risk: &[f64], times: &[f64], events: &[bool]) -> Option<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..risk.len() {
        for j in 0..risk.len() {
            if i != j && events[i] && times[i] < times[j] {
                den += 1.0;
                num += match risk[i].partial_cmp(&risk[j]).unwrap() {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Less => 0.0,
                };
            }
        }
    }
    (den > 0.0).then(|| num / den)
}

/// Censoring survival `G(t)` (or `G(t−)` when `strict`) as a direct product
/// over censoring times, counting everyone with time `≥ s` at risk.
pub fn censoring_survival(times: &[f64], events: &[bool], t: f64, strict: bool) -> f64 {
    let mut distinct: Vec<f64> = times
        .iter()
        .zip(events)
        .filter(|(_, &e)| !e)
        .map(|(&s, _)| s)
        .collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    distinct
        .iter()
        .filter(|&&s| if strict { s < t } else { s <= t })
        .map(|&s| {
            let at_risk = times.iter().filter(|&&x| x >= s).count() as f64;
            let censored = times.iter().zip(events).filter(|(&x, &e)| x == s && !e).count() as f64;
            1.0 - censored / at_risk
        })
        .product()
}

/// IBS by summing the IPCW Brier terms directly at 100 equally spaced
/// points of `[0, horizon]`.
pub fn direct_ibs(predict: &dyn Fn(usize, f64) -> f64, times: &[f64], events: &[bool], horizon: f64) -> f64 {
    let n = times.len();
    let pts: Vec<f64> = (0..100).map(|k| horizon * k as f64 / 99.0).collect();
    let bs: Vec<f64> = pts
        .iter()
        .map(|&t| {
            let mut total = 0.0;
            for i in 0..n {
                let s = predict(i, t);
                if times[i] <= t && events[i] {
                    total += s.powi(2) / censoring_survival(times, events, times[i], true);
                } else if times[i] > t {
                    total += (1.0 - s).powi(2) / censoring_survival(times, events, t, false);
                }
            }
            total / n as f64
        })
        .collect();
    let mut area = 0.0;
    for k in 0..99 {
        area += (bs[k] + bs[k + 1]) / 2.0 * (pts[k + 1] - pts[k]);
    }
    area / horizon
}

/// Two covariate-defined populations with very different hazards; the
/// first feature carries the signal, the rest are noise.
pub fn two_populations(seed: u64, n: usize, features: usize) -> SurvivalDataset {
    let mut r = rng(seed);
    let mut x = normal(&mut r, n, features, 1.0);
    let mut time = Vec::with_capacity(n);
    let mut event = Vec::with_capacity(n);
    for i in 0..n {
        let high = i % 2 == 0;
        let jitter: f64 = StandardNormal.sample(&mut r);
        x.set(i, 0, if high { 2.0 } else { -2.0 } + 0.3 * jitter);
        let rate = if high { 1.0 } else { 0.1 };
        let t: f64 = Exp::new(rate).unwrap().sample(&mut r);
        let c: f64 = Exp::new(0.05).unwrap().sample(&mut r);
        time.push(t.min(c).max(1e-3));
        event.push(t <= c);
    }
    SurvivalDataset {
        x,
        time,
        event,
        feature_names: (0..features).map(|f| format!("x{f}")).collect(),
    }
}

/// Hand-evaluated step curve helper for KM oracles.
pub fn curve(times: &[f64], survival: &[f64]) -> StepCurve {
    StepCurve {
        times: times.to_vec(),
        survival: survival.to_vec(),
    }
}
