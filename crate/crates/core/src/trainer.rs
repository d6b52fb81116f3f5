//! Three-stage training: joint pre-training of autoencoder(s) and
//! survival head(s), cluster initialisation on the latent codes, and
//! end-to-end refinement with self-paced instance selection, contrastive
//! terms and per-epoch reassignment to frozen centers.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::clustering::{self, assign_nearest, soft_assign_var, ClusterModel};
use crate::config::{ExperimentConfig, HeadsMode, SplScope};
use crate::data::SurvivalDataset;
use crate::error::{Error, Result};
use crate::losses::{self, ContrastiveTerms, LossParts};
use crate::metrics::{
    build_time_grid, censoring_km, concordance_index, integrated_brier_score, risk_scores, StepCurve, TimeGrid,
};
use crate::networks::{DistributionVars, NetworkConfig, SurvivalDistribution, SurvivalNetwork};
use crate::tensor::{Adam, Tape, Tensor, Var};

/// `λ_e = mean(L) + (e/E_max)·std(L)` with the population std.
pub fn spl_threshold(losses: &[f64], epoch: usize, max_epochs: usize) -> f64 {
    let n = losses.len() as f64;
    let mean = losses.iter().sum::<f64>() / n;
    let var = losses.iter().map(|l| (l - mean) * (l - mean)).sum::<f64>() / n;
    let frac = if max_epochs == 0 {
        1.0
    } else {
        epoch.min(max_epochs) as f64 / max_epochs as f64
    };
    mean + frac * var.sqrt()
}

/// Admission mask `L_i ≤ λ` and the mean loss over admitted instances.
pub fn spl_filter(losses: &[f64], lambda: f64) -> (Vec<bool>, f64) {
    let mask: Vec<bool> = losses.iter().map(|&l| l <= lambda).collect();
    let (sum, count) = losses
        .iter()
        .zip(&mask)
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(s, c), (l, _)| (s + l, c + 1));
    (mask, if count == 0 { 0.0 } else { sum / count as f64 })
}

/// One row of the training log. Stage-1 rows leave the stage-3 columns
/// empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub stage: u8,
    pub epoch: usize,
    pub rec: f64,
    pub kld: f64,
    pub clus: Option<f64>,
    pub cl: Option<f64>,
    pub nll: f64,
    pub rank: f64,
    pub surv: f64,
    pub spl: Option<f64>,
    pub lambda: Option<f64>,
    pub admitted: Option<f64>,
    pub total: f64,
    pub val_c_index: Option<f64>,
}

pub fn write_epoch_log<W: Write>(out: W, history: &[EpochRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "epoch", "stage", "rec", "kld", "clus", "cl", "nll", "rank", "surv", "spl", "lambda", "admitted", "total",
        "val_c_index",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            r.stage.to_string(),
            r.rec.to_string(),
            r.kld.to_string(),
            opt(r.clus),
            opt(r.cl),
            r.nll.to_string(),
            r.rank.to_string(),
            r.surv.to_string(),
            opt(r.spl),
            opt(r.lambda),
            opt(r.admitted),
            r.total.to_string(),
            opt(r.val_c_index),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub c_index: f64,
    pub ibs: f64,
}

/// A fitted model plus everything needed to evaluate it.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainedModel {
    pub network: SurvivalNetwork,
    /// One partition per view; centers are the stage-2 fit.
    pub clusters: Vec<ClusterModel>,
    pub grid: TimeGrid,
    /// Censoring distribution of the training rows (Brier weights).
    pub censoring: StepCurve,
    /// 0-based view whose assignments route rows to heads.
    pub routing_view: usize,
    pub history: Vec<EpochRecord>,
}

impl TrainedModel {
    /// Eval-mode codes per view.
    pub fn embed(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        self.network.embed(x)
    }

    /// Nearest-center labels per view.
    pub fn assign(&self, x: &Tensor) -> Result<Vec<Vec<usize>>> {
        Ok(self
            .embed(x)?
            .iter()
            .zip(&self.clusters)
            .map(|(z, c)| assign_nearest(z, &c.centers))
            .collect())
    }

    pub fn predict(&self, x: &Tensor) -> Result<SurvivalDistribution> {
        predict_with(&self.network, &self.clusters, self.routing_view, x)
    }

    pub fn risk(&self, x: &Tensor) -> Result<Vec<f64>> {
        Ok(risk_scores(&self.predict(x)?.probs, &self.grid))
    }

    pub fn evaluate(&self, data: &SurvivalDataset) -> Result<Metrics> {
        let dist = self.predict(&data.x)?;
        let risk = risk_scores(&dist.probs, &self.grid);
        Ok(Metrics {
            c_index: concordance_index(&risk, &data.time, &data.event)?,
            ibs: integrated_brier_score(&dist.survival, &self.grid, &data.time, &data.event, &self.censoring)?,
        })
    }
}

fn predict_with(
    network: &SurvivalNetwork,
    clusters: &[ClusterModel],
    routing_view: usize,
    x: &Tensor,
) -> Result<SurvivalDistribution> {
    match network.config().heads {
        HeadsMode::Shared => network.predict(x, None),
        HeadsMode::PerCluster => {
            let z = network.embed(x)?;
            let view = routing_view.min(z.len() - 1);
            let centers = &clusters
                .get(view)
                .ok_or_else(|| Error::Usage("per-cluster prediction before clustering".into()))?
                .centers;
            let ids = assign_nearest(&z[view], centers);
            network.predict(x, Some(&ids))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum Stage {
    Fresh,
    Pretrained,
    Clustered,
    Refined,
}

/// Mutable training state for one run.
pub struct Trainer<'a> {
    cfg: &'a ExperimentConfig,
    train: &'a SurvivalDataset,
    val: Option<&'a SurvivalDataset>,
    network: SurvivalNetwork,
    rng: ChaCha8Rng,
    grid: TimeGrid,
    bins: Vec<usize>,
    clusters: Vec<ClusterModel>,
    history: Vec<EpochRecord>,
    stage: Stage,
}

#[derive(Default)]
struct Running {
    batches: usize,
    rec: f64,
    kld: f64,
    clus: f64,
    cl: f64,
    nll: f64,
    rank: f64,
    surv: f64,
    spl: f64,
    lambda: f64,
    admitted: usize,
    seen: usize,
    total: f64,
}

impl Running {
    fn mean(&self, v: f64) -> f64 {
        v / self.batches.max(1) as f64
    }
}

struct Forward<'t> {
    z: Vec<Var<'t>>,
    rec: LossParts<'t>,
    kld: Option<LossParts<'t>>,
    dist: DistributionVars<'t>,
}

fn numeric_context(stage: u8, epoch: usize) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::NonFinite { op } => Error::Numeric(format!(
            "non-finite value in `{op}` during stage {stage}, epoch {epoch}"
        )),
        other => other,
    }
}

impl<'a> Trainer<'a> {
    pub fn new(cfg: &'a ExperimentConfig, train: &'a SurvivalDataset, val: Option<&'a SurvivalDataset>) -> Result<Self> {
        cfg.validate()?;
        if train.is_empty() {
            return Err(Error::Data("empty training set".into()));
        }
        let grid = build_time_grid(&train.time, &train.event, cfg.model.time_bins)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let net_cfg = NetworkConfig::from_model(&cfg.model, train.num_features(), grid.bins());
        let network = SurvivalNetwork::new(net_cfg, &mut rng)?;
        let bins = grid.bin_indices(&train.time);
        Ok(Trainer {
            cfg,
            train,
            val,
            network,
            rng,
            grid,
            bins,
            clusters: Vec::new(),
            history: Vec::new(),
            stage: Stage::Fresh,
        })
    }

    pub fn network(&self) -> &SurvivalNetwork {
        &self.network
    }

    pub fn clusters(&self) -> &[ClusterModel] {
        &self.clusters
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn history(&self) -> &[EpochRecord] {
        &self.history
    }

    fn views(&self) -> usize {
        self.network.config().views()
    }

    fn routing_view(&self) -> usize {
        self.cfg.model.routing_view.saturating_sub(1).min(self.views() - 1)
    }

    fn batches(&mut self) -> Vec<Vec<usize>> {
        let mut idx: Vec<usize> = (0..self.train.len()).collect();
        idx.shuffle(&mut self.rng);
        let size = self.cfg.train.batch_size.max(1);
        idx.chunks(size).map(<[usize]>::to_vec).collect()
    }

    /// Shared forward pass: per-view encode/decode, averaged REC/KLD and
    /// the survival distribution routed by `head_ids`.
    fn forward<'t>(
        network: &SurvivalNetwork,
        rng: &mut ChaCha8Rng,
        tape: &'t Tape,
        x: &Tensor,
        head_ids: Option<&[usize]>,
    ) -> Result<Forward<'t>> {
        let xv = tape.constant(x.clone());
        let mut zs = Vec::new();
        let mut recs = Vec::new();
        let mut klds = Vec::new();
        for v in 0..network.config().views() {
            let enc = network.encode(tape, xv, v, Some(&mut *rng))?;
            let x_hat = network.decode(tape, enc.z, v)?;
            recs.push(losses::rec(xv, x_hat)?);
            if let Some(lv) = enc.log_var {
                klds.push(losses::kld(enc.mu, lv)?);
            }
            zs.push(enc.z);
        }
        let h = network.survival_input(&zs, xv)?;
        let dist = network.survival_forward(tape, h, head_ids)?;
        Ok(Forward {
            z: zs,
            rec: losses::average_views(&recs)?,
            kld: if klds.is_empty() { None } else { Some(losses::average_views(&klds)?) },
            dist,
        })
    }

    fn validation_c_index(&self) -> Option<f64> {
        let val = self.val?;
        let dist = predict_with(&self.network, &self.clusters, self.routing_view(), &val.x).ok()?;
        let risk = risk_scores(&dist.probs, &self.grid);
        concordance_index(&risk, &val.time, &val.event).ok()
    }

    /// Stage 1: `α_REC·REC + α_KLD·KLD + α_SURV·L_SURV` for the configured
    /// number of epochs. Per-cluster models train their first head only;
    /// it is copied to the others once clusters exist.
    pub fn pretrain(&mut self) -> Result<()> {
        if self.stage != Stage::Fresh {
            return Err(Error::Usage("pretraining must run first".into()));
        }
        let w = self.cfg.loss.clone();
        let mut adam = Adam::new(self.cfg.train.lr).with_weight_decay(self.cfg.train.weight_decay);
        let head_ids = match self.network.config().heads {
            HeadsMode::PerCluster => Some(vec![0usize; self.train.len()]),
            HeadsMode::Shared => None,
        };
        for epoch in 1..=self.cfg.train.pretrain_epochs {
            let ctx = numeric_context(1, epoch);
            let mut run = Running::default();
            for batch in self.batches() {
                let x = self.train.x.select_rows(&batch);
                let events: Vec<bool> = batch.iter().map(|&i| self.train.event[i]).collect();
                let times: Vec<f64> = batch.iter().map(|&i| self.train.time[i]).collect();
                let bins: Vec<usize> = batch.iter().map(|&i| self.bins[i]).collect();
                let ids = head_ids.as_ref().map(|v| &v[..batch.len()]);
                let tape = Tape::new();
                let step = (|| -> Result<()> {
                    let f = Self::forward(&self.network, &mut self.rng, &tape, &x, ids)?;
                    let nll = losses::nll(&f.dist, &bins, &events)?;
                    let rank = losses::rank(&f.dist, &bins, &times, &events, w.sigma_rank)?;
                    let surv = losses::survival_total(nll, rank, w.beta)?;
                    let mut total = f.rec.scalar.scale(w.rec)?.add(surv.scale(w.surv)?)?;
                    if let Some(k) = f.kld {
                        total = total.add(k.scalar.scale(w.kld)?)?;
                        run.kld += k.scalar.item();
                    }
                    let grads = tape.backward(total)?;
                    self.network.params_mut().zero_grad();
                    self.network.params_mut().accumulate(&grads);
                    let single_head = self.network.config().heads == HeadsMode::PerCluster;
                    let frozen: Vec<usize> = if single_head {
                        (1..self.network.config().k)
                            .flat_map(|k| self.network.head_param_ids(k))
                            .map(|p| p.index())
                            .collect()
                    } else {
                        Vec::new()
                    };
                    adam.step_where(self.network.params_mut(), |i| !frozen.contains(&i))?;
                    run.batches += 1;
                    run.rec += f.rec.scalar.item();
                    run.nll += nll.item();
                    run.rank += rank.item();
                    run.surv += surv.item();
                    run.total += total.item();
                    Ok(())
                })();
                step.map_err(&ctx)?;
            }
            let record = EpochRecord {
                stage: 1,
                epoch,
                rec: run.mean(run.rec),
                kld: run.mean(run.kld),
                clus: None,
                cl: None,
                nll: run.mean(run.nll),
                rank: run.mean(run.rank),
                surv: run.mean(run.surv),
                spl: None,
                lambda: None,
                admitted: None,
                total: run.mean(run.total),
                val_c_index: None,
            };
            log::debug!("stage 1 epoch {epoch}: loss {:.5}", record.total);
            self.history.push(record);
        }
        self.stage = Stage::Pretrained;
        Ok(())
    }

    /// Stage 2: fit the configured algorithm on the eval-mode training
    /// codes of every view. Centers stay fixed afterwards.
    pub fn init_clusters(&mut self) -> Result<()> {
        if self.stage != Stage::Pretrained {
            return Err(Error::Usage("cluster initialisation needs a pretrained model".into()));
        }
        let z = self.network.embed(&self.train.x)?;
        let mut clusters = Vec::with_capacity(z.len());
        for (v, zv) in z.iter().enumerate() {
            let seed = self.cfg.seed.wrapping_add(v as u64 + 1);
            let model = clustering::fit(self.cfg.model.clustering, zv, self.cfg.model.k, seed)?;
            clusters.push(model.with_nu(self.cfg.model.nu));
        }
        self.clusters = clusters;
        if self.network.config().heads == HeadsMode::PerCluster {
            self.network.replicate_first_head();
        }
        self.stage = Stage::Clustered;
        Ok(())
    }

    /// Eval-mode per-instance `L_i` over the whole training set.
    fn dataset_instance_losses(&self) -> Result<Vec<f64>> {
        let tape = Tape::new();
        let x = tape.constant(self.train.x.clone());
        let w = &self.cfg.loss;
        let mut total = vec![0.0; self.train.len()];
        let views = self.views();
        for v in 0..views {
            let enc = self.network.encode::<ChaCha8Rng>(&tape, x, v, None)?;
            let x_hat = self.network.decode(&tape, enc.z, v)?;
            let rec = losses::rec(x, x_hat)?.per_instance.value();
            let clus = losses::clus(enc.z, &self.clusters[v].centers, &self.clusters[v].assignments)?
                .per_instance
                .value();
            let kld = match enc.log_var {
                Some(lv) => Some(losses::kld(enc.mu, lv)?.per_instance.value()),
                None => None,
            };
            for i in 0..total.len() {
                let mut l = w.rec * rec.get(i, 0) + w.clus * clus.get(i, 0);
                if let Some(k) = &kld {
                    l += w.kld * k.get(i, 0);
                }
                total[i] += l / views as f64;
            }
        }
        Ok(total)
    }

    fn reassign(&mut self) -> Result<()> {
        let z = self.network.embed(&self.train.x)?;
        for (zv, c) in z.iter().zip(self.clusters.iter_mut()) {
            c.assignments = assign_nearest(zv, &c.centers);
        }
        Ok(())
    }

    /// Stage 3: end-to-end refinement with SPL gating, contrastive terms
    /// and per-epoch reassignment; early stopping on validation C-index.
    pub fn train_stage3(&mut self) -> Result<()> {
        if self.stage != Stage::Clustered {
            return Err(Error::Usage("refinement needs initialised clusters".into()));
        }
        let w = self.cfg.loss.clone();
        let siamese = self.network.config().siamese;
        let per_cluster = self.network.config().heads == HeadsMode::PerCluster;
        let k = self.network.config().k;
        let route = self.routing_view();
        let max_epochs = self.cfg.train.epochs;
        let mut adam = Adam::new(self.cfg.train.lr).with_weight_decay(self.cfg.train.weight_decay);

        let mut best = self.validation_c_index().map(|c| (c, self.network.params().values().to_vec(), self.clusters.clone()));
        let mut stale = 0usize;

        for epoch in 1..=max_epochs {
            let ctx = numeric_context(3, epoch);
            let mut run = Running::default();
            let dataset_lambda = match self.cfg.train.spl_scope {
                SplScope::Dataset => Some(spl_threshold(&self.dataset_instance_losses().map_err(&ctx)?, epoch, max_epochs)),
                SplScope::Batch => None,
            };
            let route_assign = self.clusters[route].assignments.clone();
            if per_cluster {
                let mut counts = vec![0usize; k];
                for &c in &route_assign {
                    counts[c] += 1;
                }
                for (c, &n) in counts.iter().enumerate() {
                    if n == 0 {
                        log::warn!("epoch {epoch}: head {} receives no training instances and is skipped", c + 1);
                    }
                }
            }
            for batch in self.batches() {
                let x = self.train.x.select_rows(&batch);
                let events: Vec<bool> = batch.iter().map(|&i| self.train.event[i]).collect();
                let times: Vec<f64> = batch.iter().map(|&i| self.train.time[i]).collect();
                let bins: Vec<usize> = batch.iter().map(|&i| self.bins[i]).collect();
                let assign: Vec<Vec<usize>> = self
                    .clusters
                    .iter()
                    .map(|c| batch.iter().map(|&i| c.assignments[i]).collect())
                    .collect();
                let tape = Tape::new();
                let step = (|| -> Result<()> {
                    let ids = per_cluster.then_some(&assign[route][..]);
                    let f = Self::forward(&self.network, &mut self.rng, &tape, &x, ids)?;

                    // per-instance L_i
                    let mut clus_parts = Vec::new();
                    for (v, z) in f.z.iter().enumerate() {
                        clus_parts.push(losses::clus(*z, &self.clusters[v].centers, &assign[v])?);
                    }
                    let clus = losses::average_views(&clus_parts)?;
                    let li = losses::instance_loss(f.rec.per_instance, f.kld.map(|p| p.per_instance), clus.per_instance, &w)?;
                    let li_values = li.value().into_data();
                    let lambda = dataset_lambda.unwrap_or_else(|| spl_threshold(&li_values, epoch, max_epochs));
                    let (mask, _) = spl_filter(&li_values, lambda);
                    let admitted = mask.iter().filter(|&&m| m).count();
                    let mut total = tape.constant(Tensor::scalar(0.0));
                    let mut spl_value = 0.0;
                    if admitted > 0 {
                        let m: Vec<f64> = mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
                        let spl = li.mul(tape.constant(Tensor::column(&m)))?.sum()?.scale(1.0 / admitted as f64)?;
                        spl_value = spl.item();
                        if w.spl != 0.0 {
                            total = total.add(spl.scale(w.spl)?)?;
                        }
                    }

                    // contrastive terms
                    let mut cl_value = 0.0;
                    if w.cl != 0.0 {
                        let mut terms = ContrastiveTerms::default();
                        if w.ivcg != 0.0 {
                            let mut acc: Option<Var> = None;
                            for (v, z) in f.z.iter().enumerate() {
                                let term = losses::ivcg(*z, &events, &assign[v], w.tau)?;
                                acc = Some(match acc {
                                    Some(a) => a.add(term)?,
                                    None => term,
                                });
                            }
                            terms.ivcg = acc;
                        }
                        if siamese && w.iviw != 0.0 {
                            terms.iviw = Some(losses::iviw(f.z[0], f.z[1], w.tau)?);
                        }
                        if siamese && w.ivcw != 0.0 {
                            let q: Vec<Var> = (0..2)
                                .map(|v| {
                                    let centers = tape.constant(self.clusters[v].centers.clone());
                                    soft_assign_var(f.z[v], centers, self.clusters[v].nu)
                                })
                                .collect::<Result<_>>()?;
                            terms.ivcw = Some(losses::ivcw(q[0], q[1], w.tau)?);
                        }
                        let cl = losses::contrastive_total(&tape, &terms, &w, siamese)?;
                        cl_value = cl.item();
                        total = total.add(cl.scale(w.cl)?)?;
                    }

                    // survival
                    let nll = losses::nll(&f.dist, &bins, &events)?;
                    let rank = losses::rank(&f.dist, &bins, &times, &events, w.sigma_rank)?;
                    let surv = losses::survival_total(nll, rank, w.beta)?;
                    if w.surv != 0.0 {
                        total = total.add(surv.scale(w.surv)?)?;
                    }

                    let grads = tape.backward(total)?;
                    self.network.params_mut().zero_grad();
                    self.network.params_mut().accumulate(&grads);
                    let skipped: Vec<usize> = if per_cluster {
                        (0..k)
                            .filter(|c| !assign[route].contains(c))
                            .flat_map(|c| self.network.head_param_ids(c))
                            .map(|p| p.index())
                            .collect()
                    } else {
                        Vec::new()
                    };
                    adam.step_where(self.network.params_mut(), |i| !skipped.contains(&i))?;

                    run.batches += 1;
                    run.rec += f.rec.scalar.item();
                    run.kld += f.kld.map_or(0.0, |p| p.scalar.item());
                    run.clus += clus.scalar.item();
                    run.cl += cl_value;
                    run.nll += nll.item();
                    run.rank += rank.item();
                    run.surv += surv.item();
                    run.spl += spl_value;
                    run.lambda += lambda;
                    run.admitted += admitted;
                    run.seen += batch.len();
                    run.total += total.item();
                    Ok(())
                })();
                step.map_err(&ctx)?;
            }
            self.reassign().map_err(&ctx)?;
            let val_c = self.validation_c_index();
            self.history.push(EpochRecord {
                stage: 3,
                epoch,
                rec: run.mean(run.rec),
                kld: run.mean(run.kld),
                clus: Some(run.mean(run.clus)),
                cl: Some(run.mean(run.cl)),
                nll: run.mean(run.nll),
                rank: run.mean(run.rank),
                surv: run.mean(run.surv),
                spl: Some(run.mean(run.spl)),
                lambda: Some(run.mean(run.lambda)),
                admitted: Some(run.admitted as f64 / run.seen.max(1) as f64),
                total: run.mean(run.total),
                val_c_index: val_c,
            });
            log::debug!("stage 3 epoch {epoch}: loss {:.5}, val C {:?}", run.mean(run.total), val_c);

            if let Some(c) = val_c {
                match &best {
                    Some((b, _, _)) if c <= *b => stale += 1,
                    _ => {
                        best = Some((c, self.network.params().values().to_vec(), self.clusters.clone()));
                        stale = 0;
                    }
                }
                if self.cfg.train.patience > 0 && stale >= self.cfg.train.patience {
                    log::info!("early stop at epoch {epoch}");
                    break;
                }
            }
        }
        if let Some((_, params, clusters)) = best {
            self.network.set_param_values(&params)?;
            self.clusters = clusters;
        }
        self.stage = Stage::Refined;
        Ok(())
    }

    pub fn finish(self) -> Result<TrainedModel> {
        if self.stage != Stage::Refined {
            return Err(Error::Usage("training has not completed all three stages".into()));
        }
        let routing_view = self.routing_view();
        Ok(TrainedModel {
            network: self.network,
            clusters: self.clusters,
            grid: self.grid,
            censoring: censoring_km(&self.train.time, &self.train.event),
            routing_view,
            history: self.history,
        })
    }
}

/// Runs all three stages.
pub fn fit(cfg: &ExperimentConfig, train: &SurvivalDataset, val: Option<&SurvivalDataset>) -> Result<TrainedModel> {
    let mut t = Trainer::new(cfg, train, val)?;
    t.pretrain()?;
    t.init_clusters()?;
    t.train_stage3()?;
    t.finish()
}
