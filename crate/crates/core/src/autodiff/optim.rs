use std::collections::BTreeMap;

use super::store::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};

fn check_lr(lr: f64) -> Result<()> {
    if lr >= 0.0 && lr.is_finite() {
        Ok(())
    } else {
        Err(Error::contract(format!(
            "learning rate must be finite and >= 0, got {lr}"
        )))
    }
}

fn missing_grad(name: &str) -> Error {
    Error::contract(format!("no gradient for parameter {name}; run backward first"))
}

/// Plain gradient descent: `p <- p - lr * g`.
pub fn sgd_step(store: &mut ParamStore, lr: f64) -> Result<()> {
    check_lr(lr)?;
    let grads: Vec<(String, Tensor)> = store
        .names()
        .map(|n| {
            store
                .grad(n)
                .cloned()
                .map(|g| (n.to_string(), g))
                .ok_or_else(|| missing_grad(n))
        })
        .collect::<Result<_>>()?;
    for (name, g) in grads {
        let p = store.get_mut(&name)?;
        for (x, dx) in p.data_mut().iter_mut().zip(g.data()) {
            *x -= lr * dx;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Default::default()
        }
    }
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

/// Adam with bias-corrected moment estimates, one state slot per parameter name.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    first: BTreeMap<String, Vec<f64>>,
    second: BTreeMap<String, Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            step: 0,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        check_lr(lr)?;
        let grads: Vec<(String, Tensor)> = store
            .names()
            .map(|n| {
                store
                    .grad(n)
                    .cloned()
                    .map(|g| (n.to_string(), g))
                    .ok_or_else(|| missing_grad(n))
            })
            .collect::<Result<_>>()?;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (name, g) in grads {
            let n = g.len();
            let m = self.first.entry(name.clone()).or_insert_with(|| vec![0.0; n]);
            let v = self.second.entry(name.clone()).or_insert_with(|| vec![0.0; n]);
            let p = store.get_mut(&name)?;
            for i in 0..n {
                let gi = g.data()[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                let mhat = m[i] / c1;
                let vhat = v[i] / c2;
                p.data_mut()[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(p: f64, g: Option<f64>) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("x", Tensor::scalar(p)).unwrap();
        if let Some(g) = g {
            s.set_grad("x", Tensor::scalar(g)).unwrap();
        }
        s
    }

    #[test]
    fn sgd_examples() {
        let mut s = store_with(1.0, Some(0.5));
        sgd_step(&mut s, 0.1).unwrap();
        assert!((s.get("x").unwrap().item().unwrap() - 0.95).abs() < 1e-15);

        let mut s = store_with(1.0, Some(0.0));
        sgd_step(&mut s, 0.1).unwrap();
        assert_eq!(s.get("x").unwrap().item().unwrap(), 1.0);
    }

    #[test]
    fn missing_gradient_is_a_contract_error() {
        let mut s = store_with(1.0, None);
        assert!(matches!(sgd_step(&mut s, 0.1), Err(Error::Contract(_))));
        let mut adam = Adam::new(AdamConfig::default());
        assert!(matches!(adam.step(&mut s), Err(Error::Contract(_))));
    }

    #[test]
    fn adam_first_step_moves_by_lr_times_sign() {
        // After one step m_hat = g and v_hat = g^2, so the update is
        // lr * g / (|g| + eps).
        for g in [0.3, -2.0, 1e-3] {
            let mut s = store_with(1.0, Some(g));
            let mut adam = Adam::new(AdamConfig::with_lr(0.01));
            adam.step(&mut s).unwrap();
            let expected = 1.0 - 0.01 * g / (g.abs() + 1e-8);
            let got = s.get("x").unwrap().item().unwrap();
            assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
            assert!((got - (1.0 - 0.01 * g.signum())).abs() < 1e-7);
        }
    }
}
