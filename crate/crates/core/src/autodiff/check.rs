use super::graph::{Bound, Graph, Var};
use super::store::ParamStore;
use crate::error::{Error, Result};

/// Compare reverse-mode gradients against central differences.
///
/// `loss_fn` builds a scalar loss from the bound parameters. Returns the
/// maximum over all parameter entries of `|g_ad - g_fd| / max(1, |g_fd|)`.
pub fn grad_check<F>(store: &ParamStore, eps: f64, loss_fn: F) -> Result<f64>
where
    F: Fn(&mut Graph, &Bound) -> Result<Var>,
{
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::contract(format!(
            "finite-difference step must be > 0, got {eps}"
        )));
    }
    if store.is_empty() {
        return Ok(0.0);
    }

    let mut graph = Graph::new();
    let bound = graph.bind(store)?;
    let loss = loss_fn(&mut graph, &bound)?;
    let vars: Vec<Var> = bound.iter().map(|(_, v)| v).collect();
    let grads = graph.grad(loss, &vars)?;
    let analytic: Vec<(String, Vec<f64>)> = bound
        .iter()
        .zip(&grads)
        .map(|((name, _), g)| (name.to_string(), graph.value(*g).data().to_vec()))
        .collect();

    let eval = |s: &ParamStore| -> Result<f64> {
        let mut g = Graph::new();
        let b = g.bind(s)?;
        let l = loss_fn(&mut g, &b)?;
        g.value(l).item()
    };

    let mut worst = 0.0f64;
    let mut probe = store.clone();
    for (name, ad) in &analytic {
        for (i, &g_ad) in ad.iter().enumerate() {
            let orig = store.get(name)?.data()[i];
            probe.get_mut(name)?.data_mut()[i] = orig + eps;
            let up = eval(&probe)?;
            probe.get_mut(name)?.data_mut()[i] = orig - eps;
            let down = eval(&probe)?;
            probe.get_mut(name)?.data_mut()[i] = orig;
            let g_fd = (up - down) / (2.0 * eps);
            worst = worst.max((g_ad - g_fd).abs() / g_fd.abs().max(1.0));
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tensor;

    #[test]
    fn empty_store_scores_zero() {
        let s = ParamStore::new();
        let err = grad_check(&s, 1e-5, |g, _| g.constant(Tensor::scalar(1.0))).unwrap();
        assert_eq!(err, 0.0);
    }

    #[test]
    fn rejects_non_positive_step() {
        let s = ParamStore::new();
        assert!(grad_check(&s, 0.0, |g, _| g.constant(Tensor::scalar(1.0))).is_err());
    }
}
