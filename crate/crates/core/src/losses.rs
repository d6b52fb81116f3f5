//! Training objectives. Every function records onto the tape of its
//! inputs, so gradients come for free; per-instance vectors are N×1.

use crate::config::LossWeights;
use crate::error::{Error, Result};
use crate::networks::DistributionVars;
use crate::tensor::{Tape, Tensor, Var};

/// Inside-log probability floor.
pub const PROB_FLOOR: f64 = 1e-12;

/// A batch loss together with its per-instance contributions.
#[derive(Clone, Copy, Debug)]
pub struct LossParts<'t> {
    pub scalar: Var<'t>,
    pub per_instance: Var<'t>,
}

impl<'t> LossParts<'t> {
    fn from_per_instance(per_instance: Var<'t>) -> Result<Self> {
        Ok(LossParts {
            scalar: per_instance.mean()?,
            per_instance,
        })
    }
}

/// Per-instance average over views (the Siamese reading of each term).
pub fn average_views<'t>(parts: &[LossParts<'t>]) -> Result<LossParts<'t>> {
    let (first, rest) = parts
        .split_first()
        .ok_or_else(|| Error::Usage("average over zero views".into()))?;
    let mut acc = first.per_instance;
    for p in rest {
        acc = acc.add(p.per_instance)?;
    }
    LossParts::from_per_instance(acc.scale(1.0 / parts.len() as f64)?)
}

fn zero(tape: &Tape) -> Var<'_> {
    tape.constant(Tensor::scalar(0.0))
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("temperature must be > 0, got {tau}")))
    }
}

/// Squared reconstruction error `‖x̂_i − x_i‖²`.
pub fn rec<'t>(x: Var<'t>, x_hat: Var<'t>) -> Result<LossParts<'t>> {
    if x.shape() != x_hat.shape() {
        return Err(Error::Shape {
            op: "rec",
            lhs: x.shape(),
            rhs: x_hat.shape(),
        });
    }
    let d = x_hat.sub(x)?;
    LossParts::from_per_instance(d.mul(d)?.sum_rows()?)
}

/// KL divergence of `N(μ, σ²)` from the standard normal,
/// `½ Σ_j (μ² + σ² − 1 − log σ²)`.
pub fn kld<'t>(mu: Var<'t>, log_var: Var<'t>) -> Result<LossParts<'t>> {
    if mu.shape() != log_var.shape() {
        return Err(Error::Shape {
            op: "kld",
            lhs: mu.shape(),
            rhs: log_var.shape(),
        });
    }
    let terms = mu.mul(mu)?.add(log_var.exp()?)?.sub(log_var)?.add_scalar(-1.0)?;
    LossParts::from_per_instance(terms.sum_rows()?.scale(0.5)?)
}

/// Squared distance of each code to its assigned (fixed) center.
pub fn clus<'t>(z: Var<'t>, centers: &Tensor, assignments: &[usize]) -> Result<LossParts<'t>> {
    if assignments.len() != z.rows() || centers.cols() != z.cols() {
        return Err(Error::Shape {
            op: "clus",
            lhs: z.shape(),
            rhs: (assignments.len(), centers.cols()),
        });
    }
    if let Some(&bad) = assignments.iter().find(|&&c| c >= centers.rows()) {
        return Err(Error::Usage(format!("cluster id {} out of range", bad + 1)));
    }
    let target = z.tape().constant(centers.select_rows(assignments));
    let d = z.sub(target)?;
    LossParts::from_per_instance(d.mul(d)?.sum_rows()?)
}

/// Row-wise log-softmax of a similarity matrix.
fn log_softmax_rows(s: Var<'_>) -> Result<Var<'_>> {
    s.sub(s.row_logsumexp()?)
}

/// Intra-view cluster-guided contrast: each censored patient is pulled
/// toward the uncensored members of its own cluster. The softmax runs
/// over the whole batch, anchor included; the sum is divided by the
/// number of censored patients.
pub fn ivcg<'t>(z: Var<'t>, events: &[bool], assignments: &[usize], tau: f64) -> Result<Var<'t>> {
    check_tau(tau)?;
    let n = z.rows();
    if events.len() != n || assignments.len() != n {
        return Err(Error::Shape {
            op: "ivcg",
            lhs: z.shape(),
            rhs: (events.len(), assignments.len()),
        });
    }
    let tape = z.tape();
    let n_cens = events.iter().filter(|&&e| !e).count();
    let mut mask = Tensor::zeros(n, n);
    let mut pairs = 0usize;
    for i in (0..n).filter(|&i| !events[i]) {
        for j in (0..n).filter(|&j| events[j] && assignments[j] == assignments[i]) {
            mask.set(i, j, 1.0);
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Ok(zero(tape));
    }
    let logp = log_softmax_rows(z.cosine_similarity(z)?.scale(1.0 / tau)?)?;
    logp.mul(tape.constant(mask))?.sum()?.scale(-1.0 / n_cens as f64)
}

/// Symmetric InfoNCE between two sets of row vectors where row `i` of
/// `a` and row `i` of `b` form the positive pair; summed over both
/// directions and divided by `norm`.
fn cross_view_nce<'t>(a: Var<'t>, b: Var<'t>, tau: f64, norm: f64) -> Result<Var<'t>> {
    let n = a.rows();
    let diag: Vec<usize> = (0..n).collect();
    let s = a.cosine_similarity(b)?.scale(1.0 / tau)?;
    let forward = log_softmax_rows(s)?.pick_cols(&diag)?.sum()?;
    let backward = log_softmax_rows(s.transpose()?)?.pick_cols(&diag)?.sum()?;
    forward.add(backward)?.scale(-1.0 / norm)
}

/// Inter-view instance-wise contrast: a patient's two codes are the
/// positive pair, every other cross-view code a negative.
pub fn iviw<'t>(z1: Var<'t>, z2: Var<'t>, tau: f64) -> Result<Var<'t>> {
    check_tau(tau)?;
    if z1.shape() != z2.shape() {
        return Err(Error::Shape {
            op: "iviw",
            lhs: z1.shape(),
            rhs: z2.shape(),
        });
    }
    cross_view_nce(z1, z2, tau, z1.rows() as f64)
}

/// Inter-view cluster-wise contrast over the columns of the soft
/// assignment matrices (N×K each), divided by 2K.
pub fn ivcw<'t>(q1: Var<'t>, q2: Var<'t>, tau: f64) -> Result<Var<'t>> {
    check_tau(tau)?;
    if q1.cols() != q2.cols() {
        return Err(Error::Config(format!(
            "views have {} and {} clusters",
            q1.cols(),
            q2.cols()
        )));
    }
    if q1.rows() != q2.rows() {
        return Err(Error::Shape {
            op: "ivcw",
            lhs: q1.shape(),
            rhs: q2.shape(),
        });
    }
    let k = q1.cols();
    cross_view_nce(q1.transpose()?, q2.transpose()?, tau, 2.0 * k as f64)
}

fn event_columns<'t>(tape: &'t Tape, events: &[bool]) -> (Var<'t>, Var<'t>) {
    let e: Vec<f64> = events.iter().map(|&e| if e { 1.0 } else { 0.0 }).collect();
    let c: Vec<f64> = e.iter().map(|v| 1.0 - v).collect();
    (tape.constant(Tensor::column(&e)), tape.constant(Tensor::column(&c)))
}

/// Discrete-time negative log-likelihood: `−log p̂` at the event bin for
/// events, `−log Ŝ` at the censoring bin otherwise. Bins are 0-based.
pub fn nll<'t>(dist: &DistributionVars<'t>, bins: &[usize], events: &[bool]) -> Result<Var<'t>> {
    let n = dist.probs.rows();
    if bins.len() != n || events.len() != n {
        return Err(Error::Shape {
            op: "nll",
            lhs: dist.probs.shape(),
            rhs: (bins.len(), events.len()),
        });
    }
    let tape = dist.probs.tape();
    let (e, c) = event_columns(tape, events);
    let lp = dist.probs.pick_cols(bins)?.clamp_min(PROB_FLOOR)?.log()?;
    let ls = dist.survival.pick_cols(bins)?.clamp_min(PROB_FLOOR)?.log()?;
    lp.mul(e)?.add(ls.mul(c)?)?.mean()?.neg()
}

/// Comparable pairs `(i, j)`: `i` had the event and `t_i < t_j`.
pub fn comparable_pairs(times: &[f64], events: &[bool]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for i in (0..times.len()).filter(|&i| events[i]) {
        for j in 0..times.len() {
            if times[i] < times[j] {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

/// Pairwise ranking penalty `exp((Ŝ_i(t_i) − Ŝ_j(t_i))/σ)`, averaged over
/// comparable pairs.
pub fn rank<'t>(
    dist: &DistributionVars<'t>,
    bins: &[usize],
    times: &[f64],
    events: &[bool],
    sigma: f64,
) -> Result<Var<'t>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("ranking scale must be > 0, got {sigma}")));
    }
    let n = dist.survival.rows();
    if bins.len() != n || times.len() != n || events.len() != n {
        return Err(Error::Shape {
            op: "rank",
            lhs: dist.survival.shape(),
            rhs: (bins.len(), times.len()),
        });
    }
    let pairs = comparable_pairs(times, events);
    if pairs.is_empty() {
        return Ok(zero(dist.survival.tape()));
    }
    let (is, js): (Vec<usize>, Vec<usize>) = pairs.iter().copied().unzip();
    let at: Vec<usize> = is.iter().map(|&i| bins[i]).collect();
    let si = dist.survival.gather_rows(&is)?.pick_cols(&at)?;
    let sj = dist.survival.gather_rows(&js)?.pick_cols(&at)?;
    si.sub(sj)?.scale(1.0 / sigma)?.exp()?.mean()
}

/// Contrastive components before weighting. Absent terms count as zero.
#[derive(Clone, Copy, Debug, Default)]
pub struct ContrastiveTerms<'t> {
    pub ivcg: Option<Var<'t>>,
    pub iviw: Option<Var<'t>>,
    pub ivcw: Option<Var<'t>>,
}

fn weighted_sum<'t>(tape: &'t Tape, terms: &[(f64, Option<Var<'t>>)]) -> Result<Var<'t>> {
    let mut acc = zero(tape);
    for &(w, term) in terms {
        if let Some(t) = term {
            if w != 0.0 {
                acc = acc.add(t.scale(w)?)?;
            }
        }
    }
    Ok(acc)
}

/// `α_IVCG·L_IVCG + α_IVIW·L_IVIW + α_IVCW·L_IVCW`.
pub fn contrastive_total<'t>(
    tape: &'t Tape,
    terms: &ContrastiveTerms<'t>,
    weights: &LossWeights,
    siamese: bool,
) -> Result<Var<'t>> {
    weights.validate(siamese)?;
    weighted_sum(
        tape,
        &[
            (weights.ivcg, terms.ivcg),
            (weights.iviw, terms.iviw),
            (weights.ivcw, terms.ivcw),
        ],
    )
}

/// `L_NLL + β·L_RANK`.
pub fn survival_total<'t>(nll: Var<'t>, rank: Var<'t>, beta: f64) -> Result<Var<'t>> {
    if beta == 0.0 {
        return Ok(nll);
    }
    nll.add(rank.scale(beta)?)
}

/// Per-instance `α_REC·REC_i + α_KLD·KLD_i + α_CLUS·CLUS_i`; the KLD term
/// is absent for deterministic encoders.
pub fn instance_loss<'t>(
    rec: Var<'t>,
    kld: Option<Var<'t>>,
    clus: Var<'t>,
    weights: &LossWeights,
) -> Result<Var<'t>> {
    let mut acc = rec.scale(weights.rec)?.add(clus.scale(weights.clus)?)?;
    if let Some(k) = kld {
        acc = acc.add(k.scale(weights.kld)?)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: &[&[f64]]) -> Tensor {
        Tensor::from_rows(rows).unwrap()
    }

    fn dist<'t>(tape: &'t Tape, probs: Tensor) -> DistributionVars<'t> {
        let k = probs.cols();
        let mut tail = Tensor::zeros(k, k - 1);
        for s in 0..k {
            for c in 0..k - 1 {
                if s > c {
                    tail.set(s, c, 1.0);
                }
            }
        }
        let p = tape.constant(probs);
        DistributionVars {
            probs: p,
            survival: p.matmul(tape.constant(tail)).unwrap(),
        }
    }

    #[test]
    fn rec_values() {
        let tape = Tape::new();
        let x = tape.constant(t(&[&[0.0, 0.0]]));
        let xh = tape.constant(t(&[&[1.0, 1.0]]));
        assert_eq!(rec(x, xh).unwrap().scalar.item(), 2.0);
        assert_eq!(rec(x, x).unwrap().scalar.item(), 0.0);
        let x = tape.constant(t(&[&[0.0, 0.0], &[0.0, 0.0]]));
        let xh = tape.constant(t(&[&[1.0, 1.0], &[2.0, 0.0]]));
        let p = rec(x, xh).unwrap();
        assert_eq!(p.scalar.item(), 3.0);
        assert_eq!(p.per_instance.value().data(), &[2.0, 4.0]);
    }

    #[test]
    fn kld_values() {
        let tape = Tape::new();
        let k = |mu: f64, sigma: f64| {
            let m = tape.constant(Tensor::scalar(mu));
            let lv = tape.constant(Tensor::scalar((sigma * sigma).ln()));
            kld(m, lv).unwrap().scalar.item()
        };
        assert_eq!(k(0.0, 1.0), 0.0);
        assert!((k(1.0, 1.0) - 0.5).abs() < 1e-15);
        assert!((k(0.0, 2.0) - 0.5 * (4.0 - 1.0 - 4f64.ln())).abs() < 1e-12);
        assert!((k(0.0, 2.0) - 0.80685).abs() < 1e-5);
    }

    #[test]
    fn clus_values_and_view_average() {
        let tape = Tape::new();
        let centers = t(&[&[0.0, 0.0], &[5.0, 5.0]]);
        let z = tape.constant(t(&[&[2.0, 0.0]]));
        let a = clus(z, &centers, &[0]).unwrap();
        assert_eq!(a.scalar.item(), 4.0);
        let at = tape.constant(t(&[&[5.0, 5.0]]));
        let b = clus(at, &centers, &[1]).unwrap();
        assert_eq!(b.scalar.item(), 0.0);
        assert_eq!(average_views(&[a, b]).unwrap().per_instance.value().data(), &[2.0]);
    }

    #[test]
    fn ivcg_three_point_case() {
        // anchor (censored), positive at cosine 1, negative at cosine 0
        let tape = Tape::new();
        let z = tape.constant(t(&[&[1.0, 0.0], &[2.0, 0.0], &[0.0, 3.0]]));
        let v = ivcg(z, &[false, true, true], &[0, 0, 1], 1.0).unwrap().item();
        let e = std::f64::consts::E;
        assert!((v - -(e / (2.0 * e + 1.0)).ln()).abs() < 1e-12);
        assert!((v - 0.86199).abs() < 1e-5);
    }

    #[test]
    fn ivcg_without_censoring_is_zero() {
        let tape = Tape::new();
        let z = tape.constant(t(&[&[1.0, 0.0], &[2.0, 1.0]]));
        assert_eq!(ivcg(z, &[true, true], &[0, 0], 0.5).unwrap().item(), 0.0);
        assert!(ivcg(z, &[true, true], &[0, 0], 0.0).is_err());
    }

    #[test]
    fn iviw_orthogonal_case() {
        let tape = Tape::new();
        let z = tape.constant(Tensor::identity(2));
        let v = iviw(z, z, 1.0).unwrap().item();
        let want = 2.0 * (1.0 + (-1f64).exp()).ln();
        assert!((v - want).abs() < 1e-12);
        assert!((v - 0.62652).abs() < 1e-5);
        let one = tape.constant(t(&[&[0.3, -0.2]]));
        assert!(iviw(one, one, 0.7).unwrap().item().abs() < 1e-15);
    }

    #[test]
    fn ivcw_orthogonal_case() {
        // 2K terms of log(1+e^-1), divided by 2K
        let tape = Tape::new();
        let q = tape.constant(Tensor::identity(2));
        let v = ivcw(q, q, 1.0).unwrap().item();
        assert!((v - (1.0 + (-1f64).exp()).ln()).abs() < 1e-12);
        assert!((v - 0.31326).abs() < 1e-5);
        let q1 = tape.constant(Tensor::full(3, 1, 1.0));
        assert!(ivcw(q1, q1, 1.0).unwrap().item().abs() < 1e-15);
        let q3 = tape.constant(Tensor::full(3, 3, 1.0 / 3.0));
        assert!(matches!(ivcw(q1, q3, 1.0), Err(Error::Config(_))));
    }

    #[test]
    fn nll_values() {
        let tape = Tape::new();
        let d = dist(&tape, t(&[&[0.5, 0.25, 0.25], &[0.5, 0.25, 0.25]]));
        // event at bin 0 (p=0.5); censored at bin 1 (S=0.25)
        let v = nll(&d, &[0, 1], &[true, false]).unwrap().item();
        assert!((v - (-(0.5f64).ln() - (0.25f64).ln()) / 2.0).abs() < 1e-12);
        assert!((v - 1.03972).abs() < 1e-5);
        let d = dist(&tape, t(&[&[1.0, 0.0, 0.0]]));
        assert_eq!(nll(&d, &[0], &[true]).unwrap().item(), 0.0);
    }

    #[test]
    fn rank_values() {
        let tape = Tape::new();
        // survival at bin 0: 0.2 for patient 0, 0.8 for patient 1
        let d = dist(&tape, t(&[&[0.8, 0.2, 0.0], &[0.2, 0.3, 0.5]]));
        let v = rank(&d, &[0, 1], &[1.0, 2.0], &[true, false], 0.1).unwrap().item();
        assert!((v - (-6f64).exp()).abs() < 1e-12);
        assert!((v - 0.00248).abs() < 1e-5);
        assert_eq!(rank(&d, &[0, 1], &[1.0, 2.0], &[false, false], 0.1).unwrap().item(), 0.0);
        let same = dist(&tape, t(&[&[0.5, 0.5], &[0.5, 0.5]]));
        assert_eq!(rank(&same, &[0, 0], &[1.0, 2.0], &[true, true], 0.1).unwrap().item(), 1.0);
    }

    #[test]
    fn combinations() {
        let tape = Tape::new();
        let c = |v: f64| tape.constant(Tensor::scalar(v));
        let terms = ContrastiveTerms {
            ivcg: Some(c(0.7)),
            iviw: Some(c(0.4)),
            ivcw: Some(c(0.2)),
        };
        let zero_w = LossWeights {
            ivcg: 0.0,
            ..Default::default()
        };
        assert_eq!(contrastive_total(&tape, &terms, &zero_w, true).unwrap().item(), 0.0);
        let only_ivcg = LossWeights::default();
        assert_eq!(contrastive_total(&tape, &terms, &only_ivcg, false).unwrap().item(), 0.7);
        let bad = LossWeights {
            iviw: 0.5,
            ..Default::default()
        };
        assert!(matches!(
            contrastive_total(&tape, &terms, &bad, false),
            Err(Error::InvalidConfig(_))
        ));
        let ones = LossWeights {
            rec: 1.0,
            kld: 1.0,
            clus: 1.0,
            ..Default::default()
        };
        let li = instance_loss(c(2.0), Some(c(0.5)), c(4.0), &ones).unwrap();
        assert_eq!(li.item(), 6.5);
        assert_eq!(survival_total(c(1.0), c(2.0), 0.5).unwrap().item(), 2.0);
    }
}
