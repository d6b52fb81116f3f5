use serde::{Deserialize, Serialize};

use super::{ParamStore, Tensor};
use crate::error::{Error, Result};

/// Adam with bias-corrected moment estimates and optional decoupled
/// weight decay.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    #[serde(default)]
    pub weight_decay: f64,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    /// Shrinks every active parameter by `lr·decay` per step.
    pub fn with_weight_decay(mut self, decay: f64) -> Self {
        self.weight_decay = decay;
        self
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.second
    }

    /// One update of every parameter from its gradient.
    pub fn update(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        self.update_where(params, grads, |_| true)
    }

    /// Like [`Adam::update`], but parameters with `active(i) == false`
    /// keep their values and moment estimates.
    pub fn update_where(
        &mut self,
        params: &mut [Tensor],
        grads: &[Tensor],
        active: impl Fn(usize) -> bool,
    ) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::Usage(format!("learning rate must be positive, got {}", self.lr)));
        }
        if params.len() != grads.len() {
            return Err(Error::Usage(format!(
                "adam: {} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        if self.first.is_empty() {
            self.first = params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect();
            self.second = self.first.clone();
        }
        if self.first.len() != params.len() {
            return Err(Error::Usage("adam state was built for a different parameter set".into()));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.first) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(Error::Shape {
                    op: "adam",
                    lhs: p.shape(),
                    rhs: g.shape(),
                });
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for (i, ((p, g), (m, v))) in params
            .iter_mut()
            .zip(grads)
            .zip(self.first.iter_mut().zip(self.second.iter_mut()))
            .enumerate()
        {
            if !active(i) {
                continue;
            }
            let iter = p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut().zip(v.data_mut().iter_mut()));
            for ((pv, &gv), (mv, vv)) in iter {
                *mv = self.beta1 * *mv + (1.0 - self.beta1) * gv;
                *vv = self.beta2 * *vv + (1.0 - self.beta2) * gv * gv;
                let m_hat = *mv / bc1;
                let v_hat = *vv / bc2;
                *pv -= self.lr * (m_hat / (v_hat.sqrt() + self.eps) + self.weight_decay * *pv);
            }
        }
        Ok(())
    }

    /// Updates every parameter of a store from its accumulated gradients.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        let (values, grads) = store.split_mut();
        self.update(values, grads)
    }

    /// Updates only the parameters for which `active` holds.
    pub fn step_where(&mut self, store: &mut ParamStore, active: impl Fn(usize) -> bool) -> Result<()> {
        let (values, grads) = store.split_mut();
        self.update_where(values, grads, active)
    }
}
