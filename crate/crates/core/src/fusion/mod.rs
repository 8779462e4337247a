//! Improved class semantics: `e = sigma(e_c) + alpha * phi(e_p)` with two
//! learned affine layers and a fixed scalar `alpha`.

mod bundle;

pub use bundle::{build_semantics, SemanticBundle, SemanticSet};

use crate::autodiff::{Bound, Graph, ParamStore, Tensor, Var};
use crate::error::{Error, Result};
use crate::rng::{glorot_uniform, rng_for, Stream};

pub const W_SIGMA: &str = "w_sigma";
pub const B_SIGMA: &str = "b_sigma";
pub const W_PHI: &str = "w_phi";
pub const B_PHI: &str = "b_phi";

/// The values of `alpha` swept when tuning the fused variation.
pub const ALPHA_SWEEP: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 1.0];

/// Learned layers of the fusion plus the fixed description weight `alpha`.
///
/// Weights are `d x d` matrices applied as `W e`; biases are `1 x d` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    pub store: ParamStore,
    pub alpha: f64,
    dim: usize,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(Error::contract(format!("alpha must lie in [0, 1], got {alpha}")))
    }
}

impl FusionParams {
    /// Glorot-uniform weights (`|w| <= sqrt(6 / 2d)`) and zero biases.
    pub fn init(dim: usize, seed: u64, alpha: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::contract("semantic dimension must be positive"));
        }
        check_alpha(alpha)?;
        let mut rng = rng_for(seed, Stream::FusionInit);
        let mut store = ParamStore::new();
        store.insert(W_SIGMA, glorot_uniform(dim, dim, &mut rng))?;
        store.insert(B_SIGMA, Tensor::zeros(1, dim))?;
        store.insert(W_PHI, glorot_uniform(dim, dim, &mut rng))?;
        store.insert(B_PHI, Tensor::zeros(1, dim))?;
        Ok(FusionParams { store, alpha, dim })
    }

    /// Both layers the identity, biases zero.
    pub fn identity(dim: usize, alpha: f64) -> Result<Self> {
        Self::from_parts(
            Tensor::identity(dim),
            Tensor::zeros(1, dim),
            Tensor::identity(dim),
            Tensor::zeros(1, dim),
            alpha,
        )
    }

    pub fn from_parts(w_sigma: Tensor, b_sigma: Tensor, w_phi: Tensor, b_phi: Tensor, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let (d, d2) = w_sigma.dims()?;
        for (t, want) in [
            (&w_sigma, [d, d]),
            (&w_phi, [d, d]),
            (&b_sigma, [1, d]),
            (&b_phi, [1, d]),
        ] {
            if t.shape() != want || d != d2 {
                return Err(Error::Shape {
                    op: "fusion_params",
                    left: want.to_vec(),
                    right: t.shape().to_vec(),
                });
            }
        }
        let mut store = ParamStore::new();
        store.insert(W_SIGMA, w_sigma)?;
        store.insert(B_SIGMA, b_sigma)?;
        store.insert(W_PHI, w_phi)?;
        store.insert(B_PHI, b_phi)?;
        Ok(FusionParams { store, alpha, dim: d })
    }

    /// Rebuild from a checkpoint store holding the four tensors.
    pub fn from_store(store: ParamStore, alpha: f64) -> Result<Self> {
        let get = |n: &str| store.get(n).cloned();
        Self::from_parts(get(W_SIGMA)?, get(B_SIGMA)?, get(W_PHI)?, get(B_PHI)?, alpha)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Fuse one pair of semantic vectors.
    pub fn fuse(&self, class_vec: &[f64], desc_vec: &[f64]) -> Result<Vec<f64>> {
        let d = self.dim;
        if class_vec.len() != d || desc_vec.len() != d {
            return Err(Error::Shape {
                op: "fuse",
                left: vec![d],
                right: vec![class_vec.len(), desc_vec.len()],
            });
        }
        let ws = self.store.get(W_SIGMA)?.data();
        let bs = self.store.get(B_SIGMA)?.data();
        let wp = self.store.get(W_PHI)?.data();
        let bp = self.store.get(B_PHI)?.data();
        Ok((0..d)
            .map(|i| {
                let row = i * d..(i + 1) * d;
                let s: f64 = ws[row.clone()].iter().zip(class_vec).map(|(w, x)| w * x).sum();
                let p: f64 = wp[row].iter().zip(desc_vec).map(|(w, x)| w * x).sum();
                (s + bs[i]) + self.alpha * (p + bp[i])
            })
            .collect())
    }

    /// Graph version over row batches `class_vecs, desc_vecs: n x d`, using
    /// the fusion parameters bound in `b`.
    pub fn forward(g: &mut Graph, b: &Bound, alpha: f64, class_vecs: Var, desc_vecs: Var) -> Result<Var> {
        let s = g.affine(class_vecs, b.get(W_SIGMA)?, b.get(B_SIGMA)?)?;
        if alpha == 0.0 {
            return Ok(s);
        }
        let p = g.affine(desc_vecs, b.get(W_PHI)?, b.get(B_PHI)?)?;
        let p = g.scale(p, alpha);
        g.add(s, p)
    }

    /// Sum of squared fusion weights (biases excluded) as a graph node.
    pub fn weight_penalty(g: &mut Graph, b: &Bound) -> Result<Var> {
        let a = g.sum_squares(b.get(W_SIGMA)?);
        let c = g.sum_squares(b.get(W_PHI)?);
        g.add(a, c)
    }

    /// Fill `fused` for every bundle of `set`.
    pub fn apply(&self, set: &SemanticSet) -> Result<SemanticSet> {
        let mut out = set.clone();
        for b in out.bundles_mut() {
            b.fused = Some(self.fuse(&b.class_vec, &b.desc_vec)?);
        }
        Ok(out)
    }
}
