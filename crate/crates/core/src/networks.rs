//! Encoders, decoders and discrete-time survival heads.
//!
//! A [`SurvivalNetwork`] holds one encoder/decoder pair per view (two in
//! Siamese mode, with independent parameters) and either one shared
//! survival head or one head per cluster. Every head emits `T + 1` logits:
//! `T` time bins plus the mass beyond the last bin edge.

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::{HeadsMode, ModelConfig};
use crate::error::{Error, Result};
use crate::tensor::{concat_cols, concat_rows, ParamId, ParamStore, Tape, Tensor, Var};

/// Layer widths from input to output, plus the activation placement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub widths: Vec<usize>,
    /// Apply ReLU after the final layer too (encoder trunks).
    pub activate_output: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Linear {
    weight: ParamId,
    bias: ParamId,
}

impl Linear {
    /// He-normal weights, zero bias.
    fn new<R: Rng>(store: &mut ParamStore, name: &str, fan_in: usize, fan_out: usize, rng: &mut R) -> Self {
        let std = (2.0 / fan_in as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive std");
        let data: Vec<f64> = (0..fan_in * fan_out).map(|_| normal.sample(rng)).collect();
        let weight = store.add(
            format!("{name}.weight"),
            Tensor::new(fan_in, fan_out, data).expect("sized"),
        );
        let bias = store.add(format!("{name}.bias"), Tensor::zeros(1, fan_out));
        Linear { weight, bias }
    }

    pub fn weight(&self) -> ParamId {
        self.weight
    }

    pub fn bias(&self) -> ParamId {
        self.bias
    }

    pub fn forward<'t>(&self, tape: &'t Tape, store: &ParamStore, x: Var<'t>) -> Result<Var<'t>> {
        x.matmul(tape.param(store, self.weight))?
            .add(tape.param(store, self.bias))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Linear>,
    activate_output: bool,
}

impl Mlp {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, config: &MlpConfig, rng: &mut R) -> Result<Self> {
        if config.widths.len() < 2 || config.widths.contains(&0) {
            return Err(Error::Config(format!(
                "{name}: an MLP needs at least input and output widths, all > 0 (got {:?})",
                config.widths
            )));
        }
        let layers = config
            .widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| Linear::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        Ok(Mlp {
            layers,
            activate_output: config.activate_output,
        })
    }

    pub fn layers(&self) -> &[Linear] {
        &self.layers
    }

    pub fn last(&self) -> &Linear {
        self.layers.last().expect("non-empty")
    }

    pub fn forward<'t>(&self, tape: &'t Tape, store: &ParamStore, x: Var<'t>) -> Result<Var<'t>> {
        let mut h = x;
        let n = self.layers.len();
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.forward(tape, store, h)?;
            if i + 1 < n || self.activate_output {
                h = h.relu()?;
            }
        }
        Ok(h)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Encoder {
    trunk: Mlp,
    mu: Linear,
    log_var: Option<Linear>,
}

impl Encoder {
    pub fn mu_layer(&self) -> &Linear {
        &self.mu
    }

    pub fn log_var_layer(&self) -> Option<&Linear> {
        self.log_var.as_ref()
    }
}

/// Encoder outputs for one view. `log_var` is absent for deterministic
/// encoders, in which case `z` is `mu`.
#[derive(Clone, Copy, Debug)]
pub struct EncoderOutput<'t> {
    pub mu: Var<'t>,
    pub log_var: Option<Var<'t>>,
    pub z: Var<'t>,
}

/// Differentiable discrete-time survival distribution: `probs` is
/// N×(T+1), `survival` is N×T with `S_t = 1 − Σ_{s≤t} p_s`.
#[derive(Clone, Copy, Debug)]
pub struct DistributionVars<'t> {
    pub probs: Var<'t>,
    pub survival: Var<'t>,
}

/// Plain-value survival distribution for inference.
#[derive(Clone, Debug, PartialEq)]
pub struct SurvivalDistribution {
    pub probs: Tensor,
    pub survival: Tensor,
}

impl SurvivalDistribution {
    pub fn len(&self) -> usize {
        self.probs.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.rows() == 0
    }

    pub fn time_bins(&self) -> usize {
        self.survival.cols()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub input_dim: usize,
    pub latent_dim: usize,
    pub time_bins: usize,
    pub variational: bool,
    pub siamese: bool,
    pub heads: HeadsMode,
    pub k: usize,
    pub encoder_hidden: Vec<usize>,
    pub head_hidden: Vec<usize>,
}

impl NetworkConfig {
    pub fn from_model(model: &ModelConfig, input_dim: usize, time_bins: usize) -> Self {
        NetworkConfig {
            input_dim,
            latent_dim: model.latent_dim,
            time_bins,
            variational: model.variational,
            siamese: model.siamese,
            heads: model.heads,
            k: model.k,
            encoder_hidden: model.encoder_hidden.clone(),
            head_hidden: model.head_hidden.clone(),
        }
    }

    pub fn views(&self) -> usize {
        if self.siamese {
            2
        } else {
            1
        }
    }

    pub fn num_heads(&self) -> usize {
        match self.heads {
            HeadsMode::Shared => 1,
            HeadsMode::PerCluster => self.k,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SurvivalNetwork {
    config: NetworkConfig,
    params: ParamStore,
    encoders: Vec<Encoder>,
    decoders: Vec<Mlp>,
    heads: Vec<Mlp>,
    // (T+1)×T tail-sum matrix: U[s, t] = 1 iff s > t.
    tail: Tensor,
}

fn tail_matrix(time_bins: usize) -> Tensor {
    let mut u = Tensor::zeros(time_bins + 1, time_bins);
    for s in 0..=time_bins {
        for t in 0..time_bins {
            if s > t {
                u.set(s, t, 1.0);
            }
        }
    }
    u
}

impl SurvivalNetwork {
    pub fn new<R: Rng>(config: NetworkConfig, rng: &mut R) -> Result<Self> {
        if config.input_dim == 0 || config.latent_dim == 0 || config.time_bins == 0 || config.k == 0 {
            return Err(Error::Config(format!("invalid network dimensions: {config:?}")));
        }
        if config.encoder_hidden.is_empty() || config.head_hidden.is_empty() {
            return Err(Error::Config("encoders and heads need at least one hidden layer".into()));
        }
        let mut params = ParamStore::new();
        let mut encoders = Vec::new();
        let mut decoders = Vec::new();
        for v in 0..config.views() {
            let mut widths = vec![config.input_dim];
            widths.extend(&config.encoder_hidden);
            let trunk = Mlp::new(
                &mut params,
                &format!("encoder{}.trunk", v + 1),
                &MlpConfig {
                    widths,
                    activate_output: true,
                },
                rng,
            )?;
            let last = *config.encoder_hidden.last().expect("non-empty");
            let mu = Linear::new(&mut params, &format!("encoder{}.mu", v + 1), last, config.latent_dim, rng);
            let log_var = config.variational.then(|| {
                Linear::new(
                    &mut params,
                    &format!("encoder{}.log_var", v + 1),
                    last,
                    config.latent_dim,
                    rng,
                )
            });
            encoders.push(Encoder { trunk, mu, log_var });

            let mut widths = vec![config.latent_dim];
            widths.extend(config.encoder_hidden.iter().rev());
            widths.push(config.input_dim);
            decoders.push(Mlp::new(
                &mut params,
                &format!("decoder{}", v + 1),
                &MlpConfig {
                    widths,
                    activate_output: false,
                },
                rng,
            )?);
        }
        let mut heads = Vec::new();
        for k in 0..config.num_heads() {
            let mut widths = vec![config.latent_dim + config.input_dim];
            widths.extend(&config.head_hidden);
            widths.push(config.time_bins + 1);
            heads.push(Mlp::new(
                &mut params,
                &format!("head{}", k + 1),
                &MlpConfig {
                    widths,
                    activate_output: false,
                },
                rng,
            )?);
        }
        let tail = tail_matrix(config.time_bins);
        Ok(SurvivalNetwork {
            config,
            params,
            encoders,
            decoders,
            heads,
            tail,
        })
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn encoder(&self, view: usize) -> &Encoder {
        &self.encoders[view]
    }

    pub fn decoder(&self, view: usize) -> &Mlp {
        &self.decoders[view]
    }

    pub fn head(&self, k: usize) -> &Mlp {
        &self.heads[k]
    }

    /// Parameter ids of one survival head.
    pub fn head_param_ids(&self, k: usize) -> Vec<ParamId> {
        self.heads[k].layers.iter().flat_map(|l| [l.weight, l.bias]).collect()
    }

    /// Parameter ids owned by one view's encoder.
    pub fn encoder_param_ids(&self, view: usize) -> Vec<ParamId> {
        let enc = &self.encoders[view];
        let mut ids: Vec<ParamId> = enc
            .trunk
            .layers
            .iter()
            .chain(std::iter::once(&enc.mu))
            .chain(enc.log_var.iter())
            .flat_map(|l| [l.weight, l.bias])
            .collect();
        ids.sort_by_key(|p| p.index());
        ids
    }

    fn check_view(&self, view: usize) -> Result<()> {
        if view >= self.config.views() {
            return Err(Error::Config(format!(
                "view {} requested but the model has {} encoder(s)",
                view + 1,
                self.config.views()
            )));
        }
        Ok(())
    }

    /// Encodes `x` with the encoder of `view` (0-based). With an rng the
    /// variational code is sampled; without one (eval mode) `z = μ`.
    pub fn encode<'t, R: Rng>(
        &self,
        tape: &'t Tape,
        x: Var<'t>,
        view: usize,
        rng: Option<&mut R>,
    ) -> Result<EncoderOutput<'t>> {
        self.check_view(view)?;
        let enc = &self.encoders[view];
        let h = enc.trunk.forward(tape, &self.params, x)?;
        let mu = enc.mu.forward(tape, &self.params, h)?;
        let log_var = match &enc.log_var {
            Some(l) => Some(l.forward(tape, &self.params, h)?),
            None => None,
        };
        let z = match (log_var, rng) {
            (Some(lv), Some(rng)) => reparameterize(tape, mu, lv, rng)?,
            _ => mu,
        };
        Ok(EncoderOutput { mu, log_var, z })
    }

    pub fn decode<'t>(&self, tape: &'t Tape, z: Var<'t>, view: usize) -> Result<Var<'t>> {
        self.check_view(view)?;
        self.decoders[view].forward(tape, &self.params, z)
    }

    /// Head input: the (view-averaged) latent code next to the raw covariates.
    pub fn survival_input<'t>(&self, latents: &[Var<'t>], x: Var<'t>) -> Result<Var<'t>> {
        let z = match latents {
            [z] => *z,
            [z1, z2] => z1.add(*z2)?.scale(0.5)?,
            _ => return Err(Error::Usage(format!("expected 1 or 2 latent views, got {}", latents.len()))),
        };
        concat_cols(&[z, x])
    }

    /// Runs the survival head(s). Per-cluster mode routes row `i` through
    /// head `cluster_ids[i]` (0-based); shared mode ignores the ids.
    pub fn survival_forward<'t>(
        &self,
        tape: &'t Tape,
        h: Var<'t>,
        cluster_ids: Option<&[usize]>,
    ) -> Result<DistributionVars<'t>> {
        let logits = match self.config.heads {
            HeadsMode::Shared => self.heads[0].forward(tape, &self.params, h)?,
            HeadsMode::PerCluster => {
                let ids = cluster_ids.ok_or_else(|| {
                    Error::Usage("per-cluster heads need a cluster id for every row".into())
                })?;
                if ids.len() != h.rows() {
                    return Err(Error::Usage(format!(
                        "{} cluster ids for {} rows",
                        ids.len(),
                        h.rows()
                    )));
                }
                if let Some(bad) = ids.iter().find(|&&c| c >= self.config.k) {
                    return Err(Error::Usage(format!(
                        "cluster id {} out of range 1..={}",
                        bad + 1,
                        self.config.k
                    )));
                }
                let mut parts = Vec::new();
                let mut order = Vec::with_capacity(ids.len());
                for k in 0..self.config.k {
                    let rows: Vec<usize> = (0..ids.len()).filter(|&i| ids[i] == k).collect();
                    if rows.is_empty() {
                        continue;
                    }
                    let sub = h.gather_rows(&rows)?;
                    parts.push(self.heads[k].forward(tape, &self.params, sub)?);
                    order.extend(rows);
                }
                let stacked = concat_rows(&parts)?;
                let mut inverse = vec![0; order.len()];
                for (pos, &row) in order.iter().enumerate() {
                    inverse[row] = pos;
                }
                stacked.gather_rows(&inverse)?
            }
        };
        let probs = logits.row_softmax()?;
        let survival = probs.matmul(tape.constant(self.tail.clone()))?;
        Ok(DistributionVars { probs, survival })
    }

    /// Eval-mode latent codes (μ, or z for deterministic encoders) per view.
    pub fn embed(&self, x: &Tensor) -> Result<Vec<Tensor>> {
        let tape = Tape::new();
        let xv = tape.constant(x.clone());
        (0..self.config.views())
            .map(|v| Ok(self.encode::<rand_chacha::ChaCha8Rng>(&tape, xv, v, None)?.mu.value()))
            .collect()
    }

    /// Eval-mode survival prediction.
    pub fn predict(&self, x: &Tensor, cluster_ids: Option<&[usize]>) -> Result<SurvivalDistribution> {
        let tape = Tape::new();
        let xv = tape.constant(x.clone());
        let latents = (0..self.config.views())
            .map(|v| Ok(self.encode::<rand_chacha::ChaCha8Rng>(&tape, xv, v, None)?.mu))
            .collect::<Result<Vec<_>>>()?;
        let h = self.survival_input(&latents, xv)?;
        let dist = self.survival_forward(&tape, h, cluster_ids)?;
        Ok(SurvivalDistribution {
            probs: dist.probs.value(),
            survival: dist.survival.value(),
        })
    }

    /// Copies head 1's parameters into every other head.
    pub fn replicate_first_head(&mut self) {
        for k in 1..self.heads.len() {
            for (src, dst) in self.heads[0].layers.iter().zip(&self.heads[k].layers) {
                let w = self.params.value(src.weight).clone();
                let b = self.params.value(src.bias).clone();
                *self.params.value_mut(dst.weight) = w;
                *self.params.value_mut(dst.bias) = b;
            }
        }
    }

    /// Replaces all parameter values (e.g. restoring a snapshot).
    pub fn set_param_values(&mut self, values: &[Tensor]) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(Error::Usage("parameter snapshot size mismatch".into()));
        }
        for (id, v) in self.params.ids().collect::<Vec<_>>().into_iter().zip(values) {
            if self.params.value(id).shape() != v.shape() {
                return Err(Error::Usage("parameter snapshot shape mismatch".into()));
            }
            *self.params.value_mut(id) = v.clone();
        }
        Ok(())
    }
}

/// `z = μ + exp(½·log σ²) ⊙ ε` with `ε ~ N(0, I)` held constant, so
/// gradients reach μ and log σ² but not ε.
pub fn reparameterize<'t, R: Rng>(
    tape: &'t Tape,
    mu: Var<'t>,
    log_var: Var<'t>,
    rng: &mut R,
) -> Result<Var<'t>> {
    let (r, c) = mu.shape();
    if log_var.shape() != (r, c) {
        return Err(Error::Shape {
            op: "reparameterize",
            lhs: (r, c),
            rhs: log_var.shape(),
        });
    }
    let eps: Vec<f64> = (0..r * c).map(|_| StandardNormal.sample(rng)).collect();
    reparameterize_with(tape, mu, log_var, Tensor::new(r, c, eps)?)
}

/// Reparameterization with an explicit noise tensor.
pub fn reparameterize_with<'t>(tape: &'t Tape, mu: Var<'t>, log_var: Var<'t>, eps: Tensor) -> Result<Var<'t>> {
    let std = log_var.scale(0.5)?.exp()?;
    mu.add(std.mul(tape.constant(eps))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(siamese: bool, heads: HeadsMode, k: usize, variational: bool) -> NetworkConfig {
        NetworkConfig {
            input_dim: 5,
            latent_dim: 3,
            time_bins: 4,
            variational,
            siamese,
            heads,
            k,
            encoder_hidden: vec![8, 6],
            head_hidden: vec![7],
        }
    }

    fn input() -> Tensor {
        Tensor::from_rows(&[
            [0.5, -1.0, 0.3, 2.0, 0.0],
            [1.5, 0.2, -0.7, 0.1, 1.0],
            [-0.4, 0.9, 1.1, -1.2, 0.0],
        ])
        .unwrap()
    }

    #[test]
    fn zero_final_layer_gives_zero_mu_and_log_var() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut net = SurvivalNetwork::new(cfg(false, HeadsMode::Shared, 1, true), &mut rng).unwrap();
        let enc = net.encoder(0).clone();
        for l in [enc.mu_layer(), enc.log_var_layer().unwrap()] {
            net.params_mut().value_mut(l.weight()).fill(0.0);
        }
        let tape = Tape::new();
        let x = tape.constant(input());
        let out = net.encode::<ChaCha8Rng>(&tape, x, 0, None).unwrap();
        assert!(out.mu.value().data().iter().all(|&v| v == 0.0));
        assert!(out.log_var.unwrap().value().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn siamese_views_differ() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = SurvivalNetwork::new(cfg(true, HeadsMode::Shared, 1, false), &mut rng).unwrap();
        let z = net.embed(&input()).unwrap();
        assert_eq!(z.len(), 2);
        assert_ne!(z[0], z[1]);
    }

    #[test]
    fn second_view_requires_siamese() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = SurvivalNetwork::new(cfg(false, HeadsMode::Shared, 1, false), &mut rng).unwrap();
        let tape = Tape::new();
        let x = tape.constant(input());
        let err = net.encode::<ChaCha8Rng>(&tape, x, 1, None).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn deterministic_encoder_is_repeatable() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = SurvivalNetwork::new(cfg(false, HeadsMode::Shared, 1, false), &mut rng).unwrap();
        let tape = Tape::new();
        let x = tape.constant(input());
        let a = net.encode(&tape, x, 0, Some(&mut rng)).unwrap().z.value();
        let b = net.encode(&tape, x, 0, Some(&mut rng)).unwrap().z.value();
        assert_eq!(a, b);
    }

    #[test]
    fn unit_reparameterization() {
        let tape = Tape::new();
        let mu = tape.constant(Tensor::zeros(1, 2));
        let lv = tape.constant(Tensor::zeros(1, 2));
        let eps = Tensor::from_rows(&[[1.0, -1.0]]).unwrap();
        let z = reparameterize_with(&tape, mu, lv, eps).unwrap();
        assert_eq!(z.value().data(), &[1.0, -1.0]);
    }

    #[test]
    fn reparameterization_gradient_reaches_mu_and_log_var() {
        let tape = Tape::new();
        let mu = tape.variable(Tensor::from_rows(&[[0.3]]).unwrap());
        let lv = tape.variable(Tensor::from_rows(&[[0.4]]).unwrap());
        let z = reparameterize_with(&tape, mu, lv, Tensor::scalar(2.0)).unwrap();
        let g = z.sum().unwrap().backward().unwrap();
        assert_eq!(g.wrt(mu).item(), 1.0);
        // d/dlv [exp(lv/2)·ε] = ½·exp(lv/2)·ε
        assert!((g.wrt(lv).item() - 0.5 * (0.2f64).exp() * 2.0).abs() < 1e-12);
    }

    #[test]
    fn sample_mean_tracks_mu() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let tape = Tape::new();
        let mu = tape.constant(Tensor::full(n, 1, 1.5));
        let lv = tape.constant(Tensor::full(n, 1, (0.49f64).ln()));
        let z = reparameterize(&tape, mu, lv, &mut rng).unwrap().value();
        let mean = z.data().iter().sum::<f64>() / n as f64;
        assert!((mean - 1.5).abs() < 3.0 * 0.7 / (n as f64).sqrt());
    }

    #[test]
    fn decoder_round_trip_shape_and_bias_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut net = SurvivalNetwork::new(cfg(false, HeadsMode::Shared, 1, true), &mut rng).unwrap();
        let tape = Tape::new();
        let x = tape.constant(input());
        let z = net.encode::<ChaCha8Rng>(&tape, x, 0, None).unwrap().z;
        assert_eq!(net.decode(&tape, z, 0).unwrap().shape(), (3, 5));

        let last = net.decoder(0).last().clone();
        net.params_mut().value_mut(last.weight()).fill(0.0);
        let bias = Tensor::from_rows(&[[1.0, 2.0, 3.0, 4.0, 5.0]]).unwrap();
        *net.params_mut().value_mut(last.bias()) = bias.clone();
        let tape = Tape::new();
        let z = tape.constant(Tensor::from_rows(&[[0.1, 0.2, 0.3], [1.0, -1.0, 0.5]]).unwrap());
        let xh = net.decode(&tape, z, 0).unwrap().value();
        for r in 0..2 {
            assert_eq!(xh.row(r), bias.row(0));
        }
    }

    #[test]
    fn uniform_logits_give_uniform_distribution() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut net = SurvivalNetwork::new(cfg(false, HeadsMode::Shared, 1, true), &mut rng).unwrap();
        let last = net.head(0).last().clone();
        net.params_mut().value_mut(last.weight()).fill(0.0);
        let d = net.predict(&input(), None).unwrap();
        for r in 0..3 {
            for &p in d.probs.row(r) {
                assert!((p - 0.2).abs() < 1e-15);
            }
            assert!((d.survival.get(r, 3) - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn rows_sum_to_one_and_survival_is_monotone() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let net = SurvivalNetwork::new(cfg(false, HeadsMode::PerCluster, 2, true), &mut rng).unwrap();
        let d = net.predict(&input(), Some(&[0, 1, 1])).unwrap();
        for r in 0..3 {
            let s: f64 = d.probs.row(r).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            let surv = d.survival.row(r);
            assert!(surv.windows(2).all(|w| w[1] <= w[0]));
            assert!(surv.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }

    #[test]
    fn per_cluster_heads_route_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = SurvivalNetwork::new(cfg(false, HeadsMode::PerCluster, 2, true), &mut rng).unwrap();
        let x = Tensor::from_rows(&[input().row(0), input().row(0)]).unwrap();
        let d = net.predict(&x, Some(&[0, 1])).unwrap();
        assert_ne!(d.probs.row(0), d.probs.row(1));
        // routing through the same head reproduces the same row
        let same = net.predict(&x, Some(&[1, 1])).unwrap();
        assert_eq!(same.probs.row(0), d.probs.row(1));
    }

    #[test]
    fn per_cluster_heads_reject_bad_ids() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let net = SurvivalNetwork::new(cfg(false, HeadsMode::PerCluster, 2, true), &mut rng).unwrap();
        assert!(matches!(net.predict(&input(), None), Err(Error::Usage(_))));
        assert!(matches!(net.predict(&input(), Some(&[0, 2, 1])), Err(Error::Usage(_))));
    }

    #[test]
    fn shared_head_ignores_cluster_ids() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = SurvivalNetwork::new(cfg(false, HeadsMode::Shared, 3, true), &mut rng).unwrap();
        let a = net.predict(&input(), None).unwrap();
        let b = net.predict(&input(), Some(&[2, 0, 1])).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn replicate_first_head_copies_parameters() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut net = SurvivalNetwork::new(cfg(false, HeadsMode::PerCluster, 3, true), &mut rng).unwrap();
        net.replicate_first_head();
        let a = net.predict(&input(), Some(&[0, 0, 0])).unwrap();
        let b = net.predict(&input(), Some(&[1, 2, 1])).unwrap();
        assert_eq!(a, b);
    }
}
