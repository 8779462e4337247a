//! Embedding-family ZSL.
//!
//! Features `z` and fused semantics `e` are each mapped by one affine layer
//! into a common `q`-dimensional space and pulled together by
//! `(1/n) sum |z' - e'|^2 + lambda R(theta)`; `R` is the sum of squared
//! weights of both branches and both fusion layers. Test samples take the
//! label of the nearest projected class prototype.

use rand::seq::SliceRandom;

use crate::autodiff::{Adam, AdamConfig, Bound, Graph, ParamStore, Tensor, Var};
use crate::datasets::FeatureSet;
use crate::error::{Error, Result};
use crate::evaluation::Predictor;
use crate::fusion::{FusionParams, SemanticBundle, SemanticSet};
use crate::rng::{glorot_uniform, rng_for, Stream};
use crate::types::{ClassId, Role};

pub const W_Z: &str = "w_z";
pub const B_Z: &str = "b_z";
pub const W_E: &str = "w_e";
pub const B_E: &str = "b_e";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedModel {
    pub store: ParamStore,
    pub lambda: f64,
    feature_dim: usize,
    semantic_dim: usize,
    common_dim: usize,
}

impl EmbedModel {
    pub fn init(feature_dim: usize, semantic_dim: usize, common_dim: usize, lambda: f64, seed: u64) -> Result<Self> {
        if feature_dim == 0 || semantic_dim == 0 || common_dim == 0 {
            return Err(Error::contract("embedding dimensions must be positive"));
        }
        let mut rng = rng_for(seed, Stream::Init);
        let mut store = ParamStore::new();
        store.insert(W_Z, glorot_uniform(common_dim, feature_dim, &mut rng))?;
        store.insert(B_Z, Tensor::zeros(1, common_dim))?;
        store.insert(W_E, glorot_uniform(common_dim, semantic_dim, &mut rng))?;
        store.insert(B_E, Tensor::zeros(1, common_dim))?;
        Self::from_store(store, lambda)
    }

    pub fn from_store(store: ParamStore, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::contract(format!("lambda must be finite and >= 0, got {lambda}")));
        }
        let (q, m) = store.get(W_Z)?.dims()?;
        let (q2, d) = store.get(W_E)?.dims()?;
        for (name, want) in [(B_Z, [1, q]), (B_E, [1, q2])] {
            if store.get(name)?.shape() != want {
                return Err(Error::Shape {
                    op: "embed_model",
                    left: want.to_vec(),
                    right: store.get(name)?.shape().to_vec(),
                });
            }
        }
        if q != q2 {
            return Err(Error::Shape {
                op: "embed_model",
                left: vec![q, m],
                right: vec![q2, d],
            });
        }
        Ok(EmbedModel {
            store,
            lambda,
            feature_dim: m,
            semantic_dim: d,
            common_dim: q,
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn semantic_dim(&self) -> usize {
        self.semantic_dim
    }

    pub fn common_dim(&self) -> usize {
        self.common_dim
    }

    fn project(&self, w: &str, b: &str, x: &[f64]) -> Result<Vec<f64>> {
        let w = self.store.get(w)?;
        let b = self.store.get(b)?;
        let (q, k) = w.dims()?;
        if x.len() != k {
            return Err(Error::Shape {
                op: "project",
                left: vec![k],
                right: vec![x.len()],
            });
        }
        Ok((0..q)
            .map(|i| w.row_slice(i).iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b.data()[i])
            .collect())
    }

    /// `z' = W_z z + b_z`.
    pub fn project_features(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.project(W_Z, B_Z, z)
    }

    /// `e' = W_e e + b_e`.
    pub fn project_semantics(&self, e: &[f64]) -> Result<Vec<f64>> {
        self.project(W_E, B_E, e)
    }
}

/// Builds the training objective on a graph.
///
/// `model` and `fusion` are the bound parameter sets, `z` is `n x m`,
/// `class_vecs`/`desc_vecs` are the per-sample `e_c`/`e_p` rows.
#[allow(clippy::too_many_arguments)]
pub fn embed_loss_graph(
    g: &mut Graph,
    model: &Bound,
    fusion: &Bound,
    alpha: f64,
    lambda: f64,
    z: Var,
    class_vecs: Var,
    desc_vecs: Var,
) -> Result<Var> {
    let n = g.shape(z)[0] as f64;
    let zp = g.affine(z, model.get(W_Z)?, model.get(B_Z)?)?;
    let e = FusionParams::forward(g, fusion, alpha, class_vecs, desc_vecs)?;
    let ep = g.affine(e, model.get(W_E)?, model.get(B_E)?)?;
    let diff = g.sub(zp, ep)?;
    let sq = g.sum_squares(diff);
    let data_term = g.scale(sq, 1.0 / n);
    if lambda == 0.0 {
        return Ok(data_term);
    }
    let rz = g.sum_squares(model.get(W_Z)?);
    let re = g.sum_squares(model.get(W_E)?);
    let rf = FusionParams::weight_penalty(g, fusion)?;
    let r = g.add(rz, re)?;
    let r = g.add(r, rf)?;
    let r = g.scale(r, lambda);
    g.add(data_term, r)
}

/// Objective value for explicit `(z, bundle)` pairs.
pub fn embed_loss(model: &EmbedModel, fusion: &FusionParams, batch: &[(&[f64], &SemanticBundle)]) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::contract("embedding loss needs a non-empty batch"));
    }
    let zs: Vec<&[f64]> = batch.iter().map(|(z, _)| *z).collect();
    let cs: Vec<&[f64]> = batch.iter().map(|(_, b)| b.class_vec.as_slice()).collect();
    let ps: Vec<&[f64]> = batch.iter().map(|(_, b)| b.desc_vec.as_slice()).collect();
    let mut g = Graph::new();
    let mb = g.bind(&model.store)?;
    let fb = g.bind(&fusion.store)?;
    let z = g.constant(Tensor::from_rows(&zs)?)?;
    let c = g.constant(Tensor::from_rows(&cs)?)?;
    let p = g.constant(Tensor::from_rows(&ps)?)?;
    let l = embed_loss_graph(&mut g, &mb, &fb, fusion.alpha, model.lambda, z, c, p)?;
    g.value(l).item()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedConfig {
    pub lr: f64,
    pub epochs: usize,
    pub lambda: f64,
    pub alpha: f64,
    pub seed: u64,
    /// Common-space dimension; defaults to the semantic dimension.
    pub common_dim: Option<usize>,
    /// Mini-batch size; the whole set is one batch when it is smaller.
    pub batch_size: usize,
    /// Fix the feature branch to the identity (`q = m`) and learn only the
    /// semantic side, mapping semantics straight into feature space.
    pub freeze_features: bool,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            lr: 1e-3,
            epochs: 1000,
            lambda: 1e-3,
            alpha: 1.0,
            seed: 0,
            common_dim: None,
            batch_size: 64,
            freeze_features: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainedEmbed {
    pub model: EmbedModel,
    pub fusion: FusionParams,
    /// Full-data objective before training and after each epoch.
    pub losses: Vec<f64>,
}

/// Check that a training set is seen-only and covered by `semantics`.
pub(crate) fn check_training_set(data: &FeatureSet, semantics: &SemanticSet) -> Result<()> {
    data.classes().check_disjoint()?;
    for c in data.present_classes() {
        if data.classes().role(c) != Role::Seen {
            return Err(Error::SplitViolation(format!(
                "training data contains unseen class {}",
                data.classes().name(c)
            )));
        }
        if semantics.get(c).is_none() {
            return Err(Error::Manifest(format!(
                "class {} has no semantics",
                data.classes().name(c)
            )));
        }
    }
    if semantics.dim() == 0 || data.is_empty() {
        return Err(Error::contract("training data is empty"));
    }
    Ok(())
}

struct Batch {
    z: Tensor,
    class_vecs: Tensor,
    desc_vecs: Tensor,
}

fn make_batch(data: &FeatureSet, semantics: &SemanticSet, idx: &[usize]) -> Result<Batch> {
    let labels: Vec<ClassId> = idx.iter().map(|&i| data.label(i)).collect();
    let (class_vecs, desc_vecs) = semantics.rows_for(&labels)?;
    Ok(Batch {
        z: data.matrix(idx)?,
        class_vecs,
        desc_vecs,
    })
}

fn batch_loss(model: &EmbedModel, fusion: &FusionParams, b: &Batch) -> Result<f64> {
    let mut g = Graph::new();
    let mb = g.bind(&model.store)?;
    let fb = g.bind(&fusion.store)?;
    let z = g.constant(b.z.clone())?;
    let c = g.constant(b.class_vecs.clone())?;
    let p = g.constant(b.desc_vecs.clone())?;
    let l = embed_loss_graph(&mut g, &mb, &fb, fusion.alpha, model.lambda, z, c, p)?;
    g.value(l).item()
}

/// Train both branches and the fusion layers jointly with Adam.
pub fn train_embed(data: &FeatureSet, semantics: &SemanticSet, cfg: &EmbedConfig) -> Result<TrainedEmbed> {
    check_training_set(data, semantics)?;
    if cfg.batch_size == 0 {
        return Err(Error::contract("batch size must be positive"));
    }
    let d = semantics.dim();
    let m = data.dim();
    let mut model = if cfg.freeze_features {
        if cfg.common_dim.is_some_and(|q| q != m) {
            return Err(Error::contract(
                "a frozen feature branch needs q equal to the feature dimension",
            ));
        }
        let mut model = EmbedModel::init(m, d, m, cfg.lambda, cfg.seed)?;
        *model.store.get_mut(W_Z)? = Tensor::identity(m);
        model
    } else {
        EmbedModel::init(m, d, cfg.common_dim.unwrap_or(d), cfg.lambda, cfg.seed)?
    };
    let mut fusion = FusionParams::init(d, cfg.seed, cfg.alpha)?;
    let mut opt_model = Adam::new(AdamConfig::with_lr(cfg.lr));
    let mut opt_fusion = Adam::new(AdamConfig::with_lr(cfg.lr));
    let mut rng = rng_for(cfg.seed, Stream::Shuffle);

    let all: Vec<usize> = (0..data.len()).collect();
    let full = make_batch(data, semantics, &all)?;
    let mut losses = Vec::with_capacity(cfg.epochs + 1);
    losses.push(batch_loss(&model, &fusion, &full)?);

    let mut order = all;
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let b = make_batch(data, semantics, chunk)?;
            let mut g = Graph::new();
            let mb = g.bind(&model.store)?;
            let fb = g.bind(&fusion.store)?;
            let z = g.constant(b.z)?;
            let c = g.constant(b.class_vecs)?;
            let p = g.constant(b.desc_vecs)?;
            let l = embed_loss_graph(&mut g, &mb, &fb, fusion.alpha, model.lambda, z, c, p)?;
            g.backward_all(l, &mut [(&mb, &mut model.store), (&fb, &mut fusion.store)])?;
            if cfg.freeze_features {
                model.store.set_grad(W_Z, Tensor::zeros(m, m))?;
                model.store.set_grad(B_Z, Tensor::zeros(1, m))?;
            }
            opt_model.step(&mut model.store)?;
            opt_fusion.step(&mut fusion.store)?;
        }
        losses.push(batch_loss(&model, &fusion, &full)?);
    }
    model.store.clear_grads();
    fusion.store.clear_grads();
    Ok(TrainedEmbed { model, fusion, losses })
}

/// Projected class prototypes `e'_c` for nearest-neighbour decisions.
#[derive(Debug, Clone)]
pub struct EmbedClassifier {
    pub model: EmbedModel,
    pub fusion: FusionParams,
    prototypes: Vec<(ClassId, Vec<f64>)>,
}

impl EmbedClassifier {
    pub fn new(model: EmbedModel, fusion: FusionParams, semantics: &SemanticSet) -> Result<Self> {
        let prototypes = semantics
            .iter()
            .map(|b| Ok((b.class, prototype(&model, &fusion, b)?)))
            .collect::<Result<_>>()?;
        Ok(EmbedClassifier {
            model,
            fusion,
            prototypes,
        })
    }

    pub fn prototypes(&self) -> &[(ClassId, Vec<f64>)] {
        &self.prototypes
    }
}

fn prototype(model: &EmbedModel, fusion: &FusionParams, b: &SemanticBundle) -> Result<Vec<f64>> {
    let e = fusion.fuse(&b.class_vec, &b.desc_vec)?;
    model.project_semantics(&e)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest prototype; ties go to the lowest class id.
pub fn nearest(point: &[f64], prototypes: &[(ClassId, &[f64])]) -> Option<ClassId> {
    let mut best: Option<(ClassId, f64)> = None;
    for &(id, p) in prototypes {
        let d = sq_dist(point, p);
        best = match best {
            Some((bid, bd)) if bd < d || (bd == d && bid < id) => Some((bid, bd)),
            _ => Some((id, d)),
        };
    }
    best.map(|(id, _)| id)
}

/// Nearest projected candidate for one feature vector.
pub fn classify(
    model: &EmbedModel,
    fusion: &FusionParams,
    z: &[f64],
    candidates: &[&SemanticBundle],
) -> Result<ClassId> {
    if candidates.is_empty() {
        return Err(Error::contract("no candidate classes"));
    }
    let zp = model.project_features(z)?;
    let protos: Vec<(ClassId, Vec<f64>)> = candidates
        .iter()
        .map(|b| Ok((b.class, prototype(model, fusion, b)?)))
        .collect::<Result<_>>()?;
    let view: Vec<(ClassId, &[f64])> = protos.iter().map(|(i, p)| (*i, p.as_slice())).collect();
    Ok(nearest(&zp, &view).expect("non-empty candidates"))
}

impl Predictor for EmbedClassifier {
    fn predict(&self, z: &[f64], candidates: &[ClassId]) -> Result<ClassId> {
        let zp = self.model.project_features(z)?;
        let view: Vec<(ClassId, &[f64])> = self
            .prototypes
            .iter()
            .filter(|(id, _)| candidates.contains(id))
            .map(|(id, p)| (*id, p.as_slice()))
            .collect();
        if view.len() != candidates.len() {
            return Err(Error::Manifest("a candidate class has no semantics".into()));
        }
        nearest(&zp, &view).ok_or_else(|| Error::contract("no candidate classes"))
    }
}
