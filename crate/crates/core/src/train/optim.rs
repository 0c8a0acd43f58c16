//! Adam and the classification loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::PROB_FLOOR;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, ..Default::default() }
    }
}

/// First and second moments per parameter, plus the step count.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub m: Vec<Tensor>,
    pub v: Vec<Tensor>,
    pub t: u64,
}

impl AdamState {
    pub fn new(params: &[Tensor]) -> Self {
        AdamState {
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of every parameter.
pub fn adam_step(params: &mut [Tensor], grads: &[Tensor], state: &mut AdamState, cfg: &AdamConfig) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::invalid(format!(
            "adam: {} params, {} grads, {} state slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.shape() != g.shape() || p.shape() != state.m[i].shape() {
            return Err(Error::ShapeMismatch {
                op: "adam_step",
                left: p.shape().to_vec(),
                right: g.shape().to_vec(),
            });
        }
    }
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(state.m.iter_mut().zip(state.v.iter_mut())) {
        let (pd, gd) = (p.data_mut(), g.data());
        for (((pi, &gi), mi), vi) in pd.iter_mut().zip(gd).zip(m.data_mut()).zip(v.data_mut()) {
            *mi = cfg.beta1 * *mi + (1.0 - cfg.beta1) * gi;
            *vi = cfg.beta2 * *vi + (1.0 - cfg.beta2) * gi * gi;
            let m_hat = *mi / c1;
            let v_hat = *vi / c2;
            *pi -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}

/// Mean negative log-likelihood with probabilities floored at `1e-12`.
pub fn cross_entropy_loss(probs: &Tensor, labels: &[usize]) -> Result<f64> {
    let (n, c) = probs.dims2()?;
    if labels.len() != n {
        return Err(Error::invalid(format!("{} labels for {n} rows", labels.len())));
    }
    let mut total = 0.0;
    for (row, &y) in labels.iter().enumerate() {
        if y >= c {
            return Err(Error::Row {
                row,
                reason: format!("label {y} out of range for {c} classes"),
            });
        }
        total -= probs.get(row, y).max(PROB_FLOOR).ln();
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_keeps_params() {
        let mut p = vec![Tensor::matrix(1, 3, vec![0.5, -1.0, 2.0]).unwrap()];
        let before = p.clone();
        let mut st = AdamState::new(&p);
        adam_step(&mut p, &[Tensor::zeros(&[1, 3])], &mut st, &AdamConfig::default()).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let lr = 1e-3;
        let mut p = vec![Tensor::full(&[2, 2], 0.3)];
        let mut st = AdamState::new(&p);
        let cfg = AdamConfig::with_lr(lr);
        adam_step(&mut p, &[Tensor::full(&[2, 2], 1.0)], &mut st, &cfg).unwrap();
        for &v in p[0].data() {
            let delta = 0.3 - v;
            // closed form with unit bias-corrected moments: lr / (1 + eps)
            assert!((delta - lr / (1.0 + cfg.eps)).abs() < 1e-15);
            assert!((delta - lr).abs() <= 1.0001e-8 * lr);
        }
    }

    #[test]
    fn descends_quadratic() {
        let mut p = vec![Tensor::scalar(1.0)];
        let mut st = AdamState::new(&p);
        let cfg = AdamConfig::with_lr(0.1);
        for _ in 0..200 {
            let g = Tensor::scalar(2.0 * p[0].data()[0]);
            adam_step(&mut p, &[g], &mut st, &cfg).unwrap();
        }
        assert!(p[0].data()[0].abs() < 1e-2);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = vec![Tensor::zeros(&[2, 2])];
        let mut st = AdamState::new(&p);
        assert!(adam_step(&mut p, &[Tensor::zeros(&[1, 4])], &mut st, &AdamConfig::default()).is_err());
        assert!(adam_step(&mut p, &[], &mut st, &AdamConfig::default()).is_err());
    }

    #[test]
    fn loss_closed_forms() {
        let one_hot = Tensor::matrix(2, 3, vec![1., 0., 0., 0., 0., 1.]).unwrap();
        assert!(cross_entropy_loss(&one_hot, &[0, 2]).unwrap().abs() < 1e-12);
        let uniform = Tensor::full(&[4, 3], 1.0 / 3.0);
        assert!((cross_entropy_loss(&uniform, &[0, 1, 2, 0]).unwrap() - 3f64.ln()).abs() < 1e-12);
        let zero = cross_entropy_loss(&one_hot, &[1, 0]).unwrap();
        assert!(zero.is_finite() && (zero - 1e-12f64.ln().abs()).abs() < 1e-9);
        assert!(cross_entropy_loss(&one_hot, &[0, 3]).is_err());
    }
}
