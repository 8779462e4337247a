//! Generative-family ZSL: a conditional WGAN-GP turns class semantics into
//! synthetic features, then a softmax classifier is trained on real seen
//! plus synthetic unseen features.

mod classifier;

pub use classifier::{
    cls_loss, cls_loss_graph, train_final_classifier, train_softmax, SoftmaxClassifier, SoftmaxConfig, THETA_B, THETA_W,
};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::autodiff::{Adam, AdamConfig, Bound, Graph, ParamStore, Tensor, Var};
use crate::datasets::{ClassTable, FeatureSet};
use crate::embed_zsl::check_training_set;
use crate::error::{Error, Result};
use crate::fusion::{FusionParams, SemanticBundle, SemanticSet};
use crate::rng::{glorot_uniform, normal_vec, rng_for, standard_normal, SeededRng, Stream};
use crate::types::{ClassId, Mode, Role};

/// Negative-side slope of the hidden activations.
pub const LEAKY_SLOPE: f64 = 0.2;

fn layer_names(i: usize) -> (String, String) {
    (format!("l{i}.w"), format!("l{i}.b"))
}

/// Fully connected net with leaky-relu between layers and a linear output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub store: ParamStore,
    sizes: Vec<usize>,
}

impl Mlp {
    /// `sizes = [input, hidden.., output]`.
    pub fn init(sizes: &[usize], rng: &mut SeededRng) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::contract(format!("bad layer sizes {sizes:?}")));
        }
        let mut store = ParamStore::new();
        for (i, pair) in sizes.windows(2).enumerate() {
            let (w, b) = layer_names(i);
            store.insert(w, glorot_uniform(pair[1], pair[0], rng))?;
            store.insert(b, Tensor::zeros(1, pair[1]))?;
        }
        Ok(Mlp {
            store,
            sizes: sizes.to_vec(),
        })
    }

    pub fn from_store(store: ParamStore) -> Result<Self> {
        let mut sizes = Vec::new();
        let mut i = 0;
        loop {
            let (w, b) = layer_names(i);
            if !store.contains(&w) {
                break;
            }
            let (out, inp) = store.get(&w)?.dims()?;
            if sizes.last().is_some_and(|&prev| prev != inp) {
                return Err(Error::Shape {
                    op: "mlp",
                    left: vec![*sizes.last().unwrap_or(&0)],
                    right: vec![inp],
                });
            }
            if store.get(&b)?.shape() != [1, out] {
                return Err(Error::Shape {
                    op: "mlp_bias",
                    left: vec![1, out],
                    right: store.get(&b)?.shape().to_vec(),
                });
            }
            if sizes.is_empty() {
                sizes.push(inp);
            }
            sizes.push(out);
            i += 1;
        }
        if sizes.len() < 2 || store.len() != 2 * (sizes.len() - 1) {
            return Err(Error::Manifest("parameter set is not a layer stack".into()));
        }
        Ok(Mlp { store, sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().unwrap_or(&0)
    }

    pub fn forward(&self, g: &mut Graph, b: &Bound, x: Var) -> Result<Var> {
        let layers = self.sizes.len() - 1;
        let mut h = x;
        for i in 0..layers {
            let (w, bias) = layer_names(i);
            h = g.affine(h, b.get(&w)?, b.get(&bias)?)?;
            if i + 1 < layers {
                h = g.leaky_relu(h, LEAKY_SLOPE);
            }
        }
        Ok(h)
    }

    /// Plain forward pass for a row batch.
    pub fn eval(&self, x: Tensor) -> Result<Tensor> {
        let mut g = Graph::new();
        let b = g.bind(&self.store)?;
        let x = g.constant(x)?;
        let y = self.forward(&mut g, &b, x)?;
        Ok(g.value(y).clone())
    }
}

/// `G(h, e) -> z_hat`.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub mlp: Mlp,
    noise_dim: usize,
}

impl Generator {
    pub fn init(
        noise_dim: usize,
        semantic_dim: usize,
        feature_dim: usize,
        hidden: &[usize],
        seed: u64,
    ) -> Result<Self> {
        if noise_dim == 0 {
            return Err(Error::contract("noise dimension must be positive"));
        }
        let mut sizes = vec![noise_dim + semantic_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(feature_dim);
        let mut rng = rng_for(seed, Stream::GeneratorInit);
        Ok(Generator {
            mlp: Mlp::init(&sizes, &mut rng)?,
            noise_dim,
        })
    }

    pub fn from_mlp(mlp: Mlp, noise_dim: usize) -> Result<Self> {
        if noise_dim == 0 || noise_dim >= mlp.input_dim() {
            return Err(Error::contract(
                "noise dimension must be positive and below the input width",
            ));
        }
        Ok(Generator { mlp, noise_dim })
    }

    pub fn noise_dim(&self) -> usize {
        self.noise_dim
    }

    pub fn semantic_dim(&self) -> usize {
        self.mlp.input_dim() - self.noise_dim
    }

    pub fn feature_dim(&self) -> usize {
        self.mlp.output_dim()
    }

    pub fn forward(&self, g: &mut Graph, b: &Bound, h: Var, e: Var) -> Result<Var> {
        let x = g.concat_cols(h, e)?;
        self.mlp.forward(g, b, x)
    }
}

/// Wasserstein critic `D(z, e)`, unbounded scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct Discriminator {
    pub mlp: Mlp,
    feature_dim: usize,
}

impl Discriminator {
    pub fn init(feature_dim: usize, semantic_dim: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        let mut sizes = vec![feature_dim + semantic_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut rng = rng_for(seed, Stream::CriticInit);
        Ok(Discriminator {
            mlp: Mlp::init(&sizes, &mut rng)?,
            feature_dim,
        })
    }

    pub fn from_mlp(mlp: Mlp, feature_dim: usize) -> Result<Self> {
        if mlp.output_dim() != 1 || feature_dim == 0 || feature_dim >= mlp.input_dim() {
            return Err(Error::contract("critic must map (z, e) to one score"));
        }
        Ok(Discriminator { mlp, feature_dim })
    }

    /// `D(z, e) = w_z . z + w_e . e` with no hidden layer.
    pub fn linear(w_z: &[f64], w_e: &[f64]) -> Result<Self> {
        let mut store = ParamStore::new();
        let w: Vec<f64> = w_z.iter().chain(w_e).copied().collect();
        store.insert("l0.w", Tensor::row(&w))?;
        store.insert("l0.b", Tensor::zeros(1, 1))?;
        Self::from_mlp(Mlp::from_store(store)?, w_z.len())
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn semantic_dim(&self) -> usize {
        self.mlp.input_dim() - self.feature_dim
    }

    pub fn forward(&self, g: &mut Graph, b: &Bound, z: Var, e: Var) -> Result<Var> {
        let x = g.concat_cols(z, e)?;
        self.mlp.forward(g, b, x)
    }
}

/// Mean over rows of `(|grad_{z~} D(z~, e)| - 1)^2` with
/// `z~_i = beta_i z_i + (1 - beta_i) z_hat_i`. The result stays
/// differentiable with respect to the critic parameters.
pub fn gradient_penalty_graph(
    g: &mut Graph,
    critic: &Discriminator,
    cb: &Bound,
    z_real: Var,
    z_fake: Var,
    e: Var,
    betas: &[f64],
) -> Result<Var> {
    let (n, m) = (g.shape(z_real)[0], g.shape(z_real)[1]);
    if betas.len() != n {
        return Err(Error::contract(format!(
            "{} interpolation weights for {n} rows",
            betas.len()
        )));
    }
    if g.shape(z_fake) != [n, m] {
        return Err(Error::Shape {
            op: "gradient_penalty",
            left: vec![n, m],
            right: g.shape(z_fake).to_vec(),
        });
    }
    // The interpolate is a fresh leaf: only the gradient with respect to it
    // is needed, not its dependence on the generator.
    let mut mix = g.value(z_real).clone();
    let fake = g.value(z_fake).data().to_vec();
    for (i, &beta) in betas.iter().enumerate() {
        for (x, f) in mix.data_mut()[i * m..(i + 1) * m]
            .iter_mut()
            .zip(&fake[i * m..(i + 1) * m])
        {
            *x = beta * *x + (1.0 - beta) * f;
        }
    }
    let zt = g.leaf(mix)?;
    let scores = critic.forward(g, cb, zt, e)?;
    let total = g.sum(scores);
    let grads = g.grad(total, &[zt])?;
    let norms = g.row_norm(grads[0]);
    let dev = g.add_scalar(norms, -1.0);
    let sq = g.square(dev);
    Ok(g.mean(sq))
}

/// Penalty for a single (real, fake, semantics) triple.
pub fn gradient_penalty(critic: &Discriminator, z_real: &[f64], z_fake: &[f64], e: &[f64], beta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::contract(format!("beta must lie in [0, 1], got {beta}")));
    }
    let mut g = Graph::new();
    let cb = g.bind(&critic.mlp.store)?;
    let zr = g.constant(Tensor::row(z_real))?;
    let zf = g.constant(Tensor::row(z_fake))?;
    let e = g.constant(Tensor::row(e))?;
    let gp = gradient_penalty_graph(&mut g, critic, &cb, zr, zf, e, &[beta])?;
    g.value(gp).item()
}

#[derive(Debug, Clone, PartialEq)]
pub struct GanConfig {
    /// Defaults to the semantic dimension.
    pub noise_dim: Option<usize>,
    /// Hidden width of both nets; defaults to `4 m`.
    pub hidden: Option<usize>,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Gradient-penalty coefficient.
    pub eta: f64,
    pub n_critic: usize,
    pub cls_weight: f64,
    pub batch_size: usize,
    /// Number of generator updates.
    pub steps: usize,
    pub alpha: f64,
    pub seed: u64,
    pub synth_per_class: usize,
    /// Classifier pretrained on real seen features for the cls loss.
    pub pretrain: SoftmaxConfig,
    /// Final classifier on real seen plus synthetic unseen features.
    pub final_clf: SoftmaxConfig,
}

impl Default for GanConfig {
    fn default() -> Self {
        GanConfig {
            noise_dim: None,
            hidden: None,
            lr: 1e-3,
            beta1: 0.5,
            beta2: 0.999,
            eta: 10.0,
            n_critic: 5,
            cls_weight: 0.01,
            batch_size: 64,
            steps: 1000,
            alpha: 1.0,
            seed: 0,
            synth_per_class: 200,
            pretrain: SoftmaxConfig::default(),
            final_clf: SoftmaxConfig::default(),
        }
    }
}

/// Losses of one generator update and the critic updates before it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GanLoss {
    /// Last critic objective `E[D(z_hat)] - E[D(z)] + eta GP`.
    pub critic: f64,
    /// `E[D(z)] - E[D(z_hat)]` at the last critic update.
    pub wasserstein: f64,
    pub penalty: f64,
    /// `-E[D(z_hat)] + cls_weight L_C`.
    pub generator: f64,
    pub cls: f64,
}

/// Real features with their semantics and classifier targets.
#[derive(Debug, Clone)]
pub struct GanBatch {
    pub z: Tensor,
    pub class_vecs: Tensor,
    pub desc_vecs: Tensor,
    pub targets: Vec<usize>,
}

impl GanBatch {
    pub fn new(data: &FeatureSet, semantics: &SemanticSet, idx: &[usize], clf: &SoftmaxClassifier) -> Result<Self> {
        let labels: Vec<ClassId> = idx.iter().map(|&i| data.label(i)).collect();
        let (class_vecs, desc_vecs) = semantics.rows_for(&labels)?;
        Ok(GanBatch {
            z: data.matrix(idx)?,
            class_vecs,
            desc_vecs,
            targets: labels.iter().map(|&l| clf.index_of(l)).collect::<Result<_>>()?,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }
}

/// Everything that changes during GAN training.
#[derive(Debug, Clone)]
pub struct GanState {
    pub generator: Generator,
    pub critic: Discriminator,
    pub fusion: FusionParams,
    /// Frozen during GAN training.
    pub classifier: SoftmaxClassifier,
    config: GanConfig,
    opt_g: Adam,
    opt_d: Adam,
    opt_f: Adam,
    noise_rng: SeededRng,
    interp_rng: SeededRng,
}

impl GanState {
    pub fn new(
        generator: Generator,
        critic: Discriminator,
        fusion: FusionParams,
        classifier: SoftmaxClassifier,
        config: GanConfig,
    ) -> Result<Self> {
        if config.eta.is_nan() || config.eta <= 0.0 {
            return Err(Error::contract("gradient-penalty coefficient must be positive"));
        }
        if config.n_critic == 0 {
            return Err(Error::contract("n_critic must be at least 1"));
        }
        let d = fusion.dim();
        if generator.semantic_dim() != d || critic.semantic_dim() != d {
            return Err(Error::Shape {
                op: "gan_state",
                left: vec![d],
                right: vec![generator.semantic_dim(), critic.semantic_dim()],
            });
        }
        if generator.feature_dim() != critic.feature_dim() || classifier.feature_dim() != critic.feature_dim() {
            return Err(Error::Shape {
                op: "gan_state",
                left: vec![critic.feature_dim()],
                right: vec![generator.feature_dim(), classifier.feature_dim()],
            });
        }
        let adam = AdamConfig {
            lr: config.lr,
            beta1: config.beta1,
            beta2: config.beta2,
            ..AdamConfig::default()
        };
        Ok(GanState {
            generator,
            critic,
            fusion,
            classifier,
            opt_g: Adam::new(adam),
            opt_d: Adam::new(adam),
            opt_f: Adam::new(adam),
            noise_rng: rng_for(config.seed, Stream::Noise),
            interp_rng: rng_for(config.seed, Stream::Interpolation),
            config,
        })
    }

    pub fn config(&self) -> &GanConfig {
        &self.config
    }

    fn noise(&mut self, n: usize) -> Tensor {
        standard_normal(n, self.generator.noise_dim(), &mut self.noise_rng)
    }

    /// `n_critic` critic updates then one generator (and fusion) update.
    pub fn wgan_step(&mut self, batch: &GanBatch) -> Result<GanLoss> {
        if batch.is_empty() {
            return Err(Error::contract("empty GAN batch"));
        }
        let n = batch.len();
        let eta = self.config.eta;
        let mut last = (0.0, 0.0, 0.0);
        for _ in 0..self.config.n_critic {
            let noise = self.noise(n);
            let betas: Vec<f64> = (0..n).map(|_| self.interp_rng.random::<f64>()).collect();
            let mut g = Graph::new();
            let cb = g.bind(&self.critic.mlp.store)?;
            let fb = g.bind(&self.fusion.store)?;
            let gb = g.bind(&self.generator.mlp.store)?;
            let ec = g.constant(batch.class_vecs.clone())?;
            let ep = g.constant(batch.desc_vecs.clone())?;
            let e = FusionParams::forward(&mut g, &fb, self.fusion.alpha, ec, ep)?;
            let e = g.detach(e);
            let h = g.constant(noise)?;
            let fake = self.generator.forward(&mut g, &gb, h, e)?;
            let fake = g.detach(fake);
            let real = g.constant(batch.z.clone())?;
            let dr = self.critic.forward(&mut g, &cb, real, e)?;
            let df = self.critic.forward(&mut g, &cb, fake, e)?;
            let mr = g.mean(dr);
            let mf = g.mean(df);
            let w = g.sub(mr, mf)?;
            let gp = gradient_penalty_graph(&mut g, &self.critic, &cb, real, fake, e, &betas)?;
            let pen = g.scale(gp, eta);
            let neg_w = g.scale(w, -1.0);
            let loss = g.add(neg_w, pen)?;
            g.backward(loss, &cb, &mut self.critic.mlp.store)?;
            self.opt_d.step(&mut self.critic.mlp.store)?;
            last = (g.value(loss).item()?, g.value(w).item()?, g.value(gp).item()?);
        }

        let noise = self.noise(n);
        let mut g = Graph::new();
        let cb = g.bind(&self.critic.mlp.store)?;
        let fb = g.bind(&self.fusion.store)?;
        let gb = g.bind(&self.generator.mlp.store)?;
        let kb = g.bind(&self.classifier.store)?;
        let ec = g.constant(batch.class_vecs.clone())?;
        let ep = g.constant(batch.desc_vecs.clone())?;
        let e = FusionParams::forward(&mut g, &fb, self.fusion.alpha, ec, ep)?;
        let h = g.constant(noise)?;
        let fake = self.generator.forward(&mut g, &gb, h, e)?;
        let df = self.critic.forward(&mut g, &cb, fake, e)?;
        let mf = g.mean(df);
        let adv = g.scale(mf, -1.0);
        let cls = cls_loss_graph(&mut g, &kb, fake, &batch.targets)?;
        let weighted = g.scale(cls, self.config.cls_weight);
        let loss = g.add(adv, weighted)?;
        g.backward_all(
            loss,
            &mut [(&gb, &mut self.generator.mlp.store), (&fb, &mut self.fusion.store)],
        )?;
        self.opt_g.step(&mut self.generator.mlp.store)?;
        self.opt_f.step(&mut self.fusion.store)?;
        Ok(GanLoss {
            critic: last.0,
            wasserstein: last.1,
            penalty: last.2,
            generator: g.value(loss).item()?,
            cls: g.value(cls).item()?,
        })
    }
}

/// Result of GAN training.
#[derive(Debug, Clone)]
pub struct TrainedGan {
    pub generator: Generator,
    pub critic: Discriminator,
    pub fusion: FusionParams,
    pub classifier: SoftmaxClassifier,
    pub losses: Vec<GanLoss>,
}

pub const GENERATOR_PREFIX: &str = "generator.";
pub const CRITIC_PREFIX: &str = "critic.";
pub const FUSION_PREFIX: &str = "fusion.";
pub const CLASSIFIER_PREFIX: &str = "classifier.";

impl TrainedGan {
    /// All parameters in one store under fixed prefixes.
    pub fn to_store(&self) -> Result<ParamStore> {
        let mut s = ParamStore::new();
        s.absorb(GENERATOR_PREFIX, &self.generator.mlp.store)?;
        s.absorb(CRITIC_PREFIX, &self.critic.mlp.store)?;
        s.absorb(FUSION_PREFIX, &self.fusion.store)?;
        s.absorb(CLASSIFIER_PREFIX, &self.classifier.store)?;
        Ok(s)
    }

    /// Inverse of [`TrainedGan::to_store`]; `classes` are the seen classes
    /// the auxiliary classifier was trained on.
    pub fn from_store(store: &ParamStore, alpha: f64, classes: Vec<ClassId>) -> Result<Self> {
        let fusion = FusionParams::from_store(store.extract(FUSION_PREFIX), alpha)?;
        let d = fusion.dim();
        let gen_mlp = Mlp::from_store(store.extract(GENERATOR_PREFIX))?;
        let noise = gen_mlp
            .input_dim()
            .checked_sub(d)
            .ok_or_else(|| Error::Manifest("generator input narrower than the semantics".into()))?;
        let generator = Generator::from_mlp(gen_mlp, noise)?;
        let critic_mlp = Mlp::from_store(store.extract(CRITIC_PREFIX))?;
        let m = critic_mlp
            .input_dim()
            .checked_sub(d)
            .ok_or_else(|| Error::Manifest("critic input narrower than the semantics".into()))?;
        let critic = Discriminator::from_mlp(critic_mlp, m)?;
        let classifier = SoftmaxClassifier::new(store.extract(CLASSIFIER_PREFIX), classes)?;
        Ok(TrainedGan {
            generator,
            critic,
            fusion,
            classifier,
            losses: Vec::new(),
        })
    }
}

/// Pretrain the auxiliary classifier, then run `steps` WGAN-GP updates on
/// shuffled mini-batches of seen features.
pub fn train_gan(data: &FeatureSet, semantics: &SemanticSet, cfg: &GanConfig) -> Result<TrainedGan> {
    check_training_set(data, semantics)?;
    if cfg.batch_size == 0 {
        return Err(Error::contract("batch size must be positive"));
    }
    let (m, d) = (data.dim(), semantics.dim());
    let hidden = [cfg.hidden.unwrap_or(4 * m)];
    let noise_dim = cfg.noise_dim.unwrap_or(d);
    let seen = data.present_classes();
    let pretrain = SoftmaxConfig {
        seed: cfg.seed,
        ..cfg.pretrain.clone()
    };
    let classifier = train_softmax(data, &seen, &pretrain)?;
    let generator = Generator::init(noise_dim, d, m, &hidden, cfg.seed)?;
    let critic = Discriminator::init(m, d, &hidden, cfg.seed)?;
    let fusion = FusionParams::init(d, cfg.seed, cfg.alpha)?;
    let mut state = GanState::new(generator, critic, fusion, classifier, cfg.clone())?;

    let mut rng = rng_for(cfg.seed, Stream::Shuffle);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let mut pos = 0;
    let bs = cfg.batch_size.min(data.len());
    let mut losses = Vec::with_capacity(cfg.steps);
    for _ in 0..cfg.steps {
        if pos + bs > order.len() {
            order.shuffle(&mut rng);
            pos = 0;
        }
        let idx = &order[pos..pos + bs];
        pos += bs;
        let batch = GanBatch::new(data, semantics, idx, &state.classifier)?;
        losses.push(state.wgan_step(&batch)?);
    }
    let GanState {
        mut generator,
        mut critic,
        mut fusion,
        classifier,
        ..
    } = state;
    generator.mlp.store.clear_grads();
    critic.mlp.store.clear_grads();
    fusion.store.clear_grads();
    Ok(TrainedGan {
        generator,
        critic,
        fusion,
        classifier,
        losses,
    })
}

/// `n` features for one class from `h ~ N(0, I)` and the fused semantics.
pub fn synthesize(
    generator: &Generator,
    fusion: &FusionParams,
    bundle: &SemanticBundle,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(Error::contract("number of synthetic features must be positive"));
    }
    let e = fusion.fuse(&bundle.class_vec, &bundle.desc_vec)?;
    if e.len() != generator.semantic_dim() {
        return Err(Error::Shape {
            op: "synthesize",
            left: vec![generator.semantic_dim()],
            right: vec![e.len()],
        });
    }
    let mut rng = rng_for(seed, Stream::Synthesis);
    let k = generator.noise_dim();
    let mut input = Vec::with_capacity(n * (k + e.len()));
    for _ in 0..n {
        input.extend(normal_vec(k, 1.0, &mut rng));
        input.extend_from_slice(&e);
    }
    let out = generator.mlp.eval(Tensor::matrix(n, k + e.len(), input)?)?;
    let m = generator.feature_dim();
    Ok(out.data().chunks(m).map(<[f64]>::to_vec).collect())
}

/// Per-class seed so classes can be synthesized independently.
pub fn class_seed(seed: u64, class: ClassId) -> u64 {
    seed ^ (u64::from(class.0) + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Synthetic features for each of `classes`, as a feature set over `table`.
pub fn synthesize_classes(
    generator: &Generator,
    fusion: &FusionParams,
    semantics: &SemanticSet,
    classes: &[ClassId],
    n: usize,
    seed: u64,
    table: &ClassTable,
) -> Result<FeatureSet> {
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for &c in classes {
        let b = semantics.require(c)?;
        for row in synthesize(generator, fusion, b, n, class_seed(seed, c))? {
            values.extend(row);
            labels.push(c);
        }
    }
    FeatureSet::new(generator.feature_dim(), values, labels, table.clone())
}

/// Synthesize unseen features and fit the final classifier for `mode`.
pub fn final_classifier(
    gan: &TrainedGan,
    seen_train: &FeatureSet,
    semantics: &SemanticSet,
    mode: Mode,
    cfg: &GanConfig,
) -> Result<SoftmaxClassifier> {
    let table = seen_train.classes();
    let unseen = table.ids_with(Role::Unseen);
    let synth = synthesize_classes(
        &gan.generator,
        &gan.fusion,
        semantics,
        &unseen,
        cfg.synth_per_class,
        cfg.seed,
        table,
    )?;
    let clf_cfg = SoftmaxConfig {
        seed: cfg.seed,
        ..cfg.final_clf.clone()
    };
    train_final_classifier(seen_train, &synth, mode, &clf_cfg)
}
