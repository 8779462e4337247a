use rand::seq::SliceRandom;

use crate::autodiff::{Adam, AdamConfig, Bound, Graph, ParamStore, Tensor, Var};
use crate::datasets::FeatureSet;
use crate::error::{Error, Result};
use crate::evaluation::Predictor;
use crate::rng::{glorot_uniform, rng_for, Stream};
use crate::types::{ClassId, Mode, Role};

pub const THETA_W: &str = "theta_w";
pub const THETA_B: &str = "theta_b";

/// Linear softmax classifier over a fixed, sorted class list.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxClassifier {
    pub store: ParamStore,
    classes: Vec<ClassId>,
}

impl SoftmaxClassifier {
    pub fn new(store: ParamStore, mut classes: Vec<ClassId>) -> Result<Self> {
        classes.sort();
        classes.dedup();
        let (k, _) = store.get(THETA_W)?.dims()?;
        let b = store.get(THETA_B)?;
        if k != classes.len() || b.shape() != [1, k] {
            return Err(Error::Shape {
                op: "softmax_classifier",
                left: vec![classes.len()],
                right: vec![k, b.len()],
            });
        }
        Ok(SoftmaxClassifier { store, classes })
    }

    /// Glorot weights, zero bias.
    pub fn init(feature_dim: usize, classes: Vec<ClassId>, seed: u64) -> Result<Self> {
        let mut classes = classes;
        classes.sort();
        classes.dedup();
        if classes.len() < 2 {
            return Err(Error::contract("a softmax classifier needs at least 2 classes"));
        }
        let mut rng = rng_for(seed, Stream::ClassifierInit);
        let mut store = ParamStore::new();
        store.insert(THETA_W, glorot_uniform(classes.len(), feature_dim, &mut rng))?;
        store.insert(THETA_B, Tensor::zeros(1, classes.len()))?;
        Self::new(store, classes)
    }

    pub fn classes(&self) -> &[ClassId] {
        &self.classes
    }

    pub fn feature_dim(&self) -> usize {
        self.store.get(THETA_W).map(|w| w.shape()[1]).unwrap_or(0)
    }

    pub fn index_of(&self, c: ClassId) -> Result<usize> {
        self.classes
            .binary_search(&c)
            .map_err(|_| Error::contract(format!("class {c} is not in the classifier's class set")))
    }

    pub fn logits(&self, z: &[f64]) -> Result<Vec<f64>> {
        let w = self.store.get(THETA_W)?;
        let b = self.store.get(THETA_B)?;
        if z.len() != self.feature_dim() {
            return Err(Error::Shape {
                op: "logits",
                left: vec![self.feature_dim()],
                right: vec![z.len()],
            });
        }
        Ok((0..self.classes.len())
            .map(|k| w.row_slice(k).iter().zip(z).map(|(a, x)| a * x).sum::<f64>() + b.data()[k])
            .collect())
    }
}

impl Predictor for SoftmaxClassifier {
    /// Highest logit among `candidates`, ties to the lowest class id.
    fn predict(&self, z: &[f64], candidates: &[ClassId]) -> Result<ClassId> {
        let logits = self.logits(z)?;
        let mut best: Option<(ClassId, f64)> = None;
        for &c in candidates {
            let i = self
                .classes
                .binary_search(&c)
                .map_err(|_| Error::Manifest(format!("candidate class {c} was not trained")))?;
            let v = logits[i];
            best = match best {
                Some((bc, bv)) if bv > v || (bv == v && bc < c) => Some((bc, bv)),
                _ => Some((c, v)),
            };
        }
        best.map(|(c, _)| c)
            .ok_or_else(|| Error::contract("no candidate classes"))
    }
}

/// Mean negative log-likelihood of `targets` (row indices into the
/// classifier's class list) under the classifier bound in `clf`.
pub fn cls_loss_graph(g: &mut Graph, clf: &Bound, z: Var, targets: &[usize]) -> Result<Var> {
    let logits = g.affine(z, clf.get(THETA_W)?, clf.get(THETA_B)?)?;
    let (n, k) = (g.shape(logits)[0], g.shape(logits)[1]);
    if targets.len() != n {
        return Err(Error::contract(format!("{} targets for {n} rows", targets.len())));
    }
    let mut mask = Tensor::zeros(n, k);
    for (i, &t) in targets.iter().enumerate() {
        if t >= k {
            return Err(Error::contract(format!("target index {t} outside {k} classes")));
        }
        mask.data_mut()[i * k + t] = 1.0;
    }
    let lsm = g.log_softmax(logits);
    let mask = g.constant(mask)?;
    let picked = g.mul(lsm, mask)?;
    let total = g.sum(picked);
    Ok(g.scale(total, -1.0 / n as f64))
}

/// `-log p(label | z)` for one feature vector.
pub fn cls_loss(classifier: &SoftmaxClassifier, z_hat: &[f64], label: ClassId) -> Result<f64> {
    let t = classifier.index_of(label)?;
    let mut g = Graph::new();
    let b = g.bind(&classifier.store)?;
    let z = g.constant(Tensor::row(z_hat))?;
    let l = cls_loss_graph(&mut g, &b, z, &[t])?;
    g.value(l).item()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for SoftmaxConfig {
    fn default() -> Self {
        SoftmaxConfig {
            lr: 1e-2,
            epochs: 50,
            batch_size: 64,
            seed: 0,
        }
    }
}

/// Cross-entropy training of a fresh classifier over `classes`.
pub fn train_softmax(data: &FeatureSet, classes: &[ClassId], cfg: &SoftmaxConfig) -> Result<SoftmaxClassifier> {
    let mut clf = SoftmaxClassifier::init(data.dim(), classes.to_vec(), cfg.seed)?;
    if data.is_empty() {
        return Err(Error::contract("classifier training set is empty"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::contract("batch size must be positive"));
    }
    let targets: Vec<usize> = data.labels().iter().map(|&l| clf.index_of(l)).collect::<Result<_>>()?;
    let mut opt = Adam::new(AdamConfig::with_lr(cfg.lr));
    let mut rng = rng_for(cfg.seed, Stream::Shuffle);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let mut g = Graph::new();
            let b = g.bind(&clf.store)?;
            let z = g.constant(data.matrix(chunk)?)?;
            let t: Vec<usize> = chunk.iter().map(|&i| targets[i]).collect();
            let l = cls_loss_graph(&mut g, &b, z, &t)?;
            g.backward(l, &b, &mut clf.store)?;
            opt.step(&mut clf.store)?;
        }
    }
    clf.store.clear_grads();
    Ok(clf)
}

/// Train the final classifier on real seen plus synthetic unseen features.
///
/// GZSL uses the union of both class sets; ZSL uses the synthetic unseen
/// classes only and ignores `real_seen`.
pub fn train_final_classifier(
    real_seen: &FeatureSet,
    synth_unseen: &FeatureSet,
    mode: Mode,
    cfg: &SoftmaxConfig,
) -> Result<SoftmaxClassifier> {
    let seen = real_seen.present_classes();
    let unseen = synth_unseen.present_classes();
    if let Some(c) = seen.iter().find(|c| unseen.contains(c)) {
        return Err(Error::SplitViolation(format!(
            "class {} appears in both the seen and unseen training sets",
            synth_unseen.classes().name(*c)
        )));
    }
    for (set, role) in [(real_seen, Role::Seen), (synth_unseen, Role::Unseen)] {
        if let Some(&c) = set.labels().iter().find(|&&l| set.classes().role(l) != role) {
            return Err(Error::SplitViolation(format!(
                "class {} is listed with the wrong role",
                set.classes().name(c)
            )));
        }
    }
    match mode {
        Mode::Zsl => train_softmax(synth_unseen, &unseen, cfg),
        Mode::Gzsl => {
            if real_seen.is_empty() || synth_unseen.is_empty() {
                return Err(Error::contract(
                    "GZSL needs both real seen and synthetic unseen features",
                ));
            }
            let all = real_seen.concat(synth_unseen)?;
            let classes: Vec<ClassId> = seen.into_iter().chain(unseen).collect();
            train_softmax(&all, &classes, cfg)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad_check;
    use crate::datasets::ClassTable;

    fn fixed(w: Tensor, b: Tensor, k: u32) -> SoftmaxClassifier {
        let mut s = ParamStore::new();
        s.insert(THETA_W, w).unwrap();
        s.insert(THETA_B, b).unwrap();
        SoftmaxClassifier::new(s, (0..k).map(ClassId).collect()).unwrap()
    }

    #[test]
    fn zero_weights_give_log_k() {
        let c = fixed(Tensor::zeros(4, 3), Tensor::zeros(1, 4), 4);
        let l = cls_loss(&c, &[0.3, -2.0, 5.0], ClassId(2)).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-12);
        assert!((l - 1.3863).abs() < 1e-4);
    }

    #[test]
    fn confident_logits() {
        // Logits come straight from the bias: (10, 0, 0).
        let c = fixed(Tensor::zeros(3, 1), Tensor::row(&[10.0, 0.0, 0.0]), 3);
        let l = cls_loss(&c, &[0.0], ClassId(0)).unwrap();
        // Oracle: -log(e^10 / (e^10 + 2)) = log(1 + 2 e^-10).
        let oracle = (2.0 * (-10f64).exp()).ln_1p();
        assert!((l - oracle).abs() < 1e-15);
        assert!((l - 9.0797e-5).abs() < 1e-8, "{l}");
        let big = fixed(Tensor::zeros(3, 1), Tensor::row(&[800.0, 0.0, 0.0]), 3);
        assert!(cls_loss(&big, &[0.0], ClassId(0)).unwrap().abs() < 1e-300);
    }

    #[test]
    fn unknown_label_is_contract_error() {
        let c = fixed(Tensor::zeros(2, 1), Tensor::zeros(1, 2), 2);
        assert!(matches!(cls_loss(&c, &[0.0], ClassId(7)), Err(Error::Contract(_))));
    }

    #[test]
    fn cls_loss_gradient_checks() {
        let c = SoftmaxClassifier::init(3, (0..4).map(ClassId).collect(), 2).unwrap();
        let z = Tensor::matrix(2, 3, vec![0.4, -1.0, 0.3, 2.0, 0.1, -0.7]).unwrap();
        let err = grad_check(&c.store, 1e-5, |g, b| {
            let z = g.constant(z.clone())?;
            cls_loss_graph(g, b, z, &[1, 3])
        })
        .unwrap();
        assert!(err < 1e-6, "{err}");
    }

    fn toy() -> FeatureSet {
        let t = ClassTable::new(&["a", "b", "c"], &["d", "e"]).unwrap();
        let centers = [[3.0, 0.0], [0.0, 3.0], [-3.0, -3.0]];
        let rows: Vec<(ClassId, Vec<f64>)> = (0..30)
            .map(|i| {
                let c = i % 3;
                let j = (i / 3) as f64 * 0.05;
                (ClassId(c as u32), vec![centers[c][0] + j, centers[c][1] - j])
            })
            .collect();
        FeatureSet::from_rows(&rows, t).unwrap()
    }

    #[test]
    fn separable_toy_is_learned() {
        let data = toy();
        let classes = data.present_classes();
        let cfg = SoftmaxConfig {
            epochs: 300,
            ..Default::default()
        };
        let clf = train_softmax(&data, &classes, &cfg).unwrap();
        for (l, z) in data.iter() {
            assert_eq!(clf.predict(z, &classes).unwrap(), l);
        }
        let again = train_softmax(&data, &classes, &cfg).unwrap();
        assert_eq!(clf, again);
    }

    #[test]
    fn single_class_rejected() {
        let data = toy().filter(|l| l == ClassId(0));
        let err = train_softmax(&data, &[ClassId(0)], &SoftmaxConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Contract(_)));
    }

    #[test]
    fn final_classifier_split_checks() {
        let seen = toy();
        let t = seen.classes().clone();
        let unseen_rows = vec![(ClassId(3), vec![5.0, 5.0]), (ClassId(4), vec![-5.0, 5.0])];
        let unseen = FeatureSet::from_rows(&unseen_rows, t.clone()).unwrap();
        let clf = train_final_classifier(&seen, &unseen, Mode::Gzsl, &SoftmaxConfig::default()).unwrap();
        assert_eq!(clf.classes().len(), 5);
        let z = train_final_classifier(&seen, &unseen, Mode::Zsl, &SoftmaxConfig::default()).unwrap();
        assert_eq!(z.classes(), &[ClassId(3), ClassId(4)]);

        // Seen-class rows posing as synthetic unseen features.
        let bad = FeatureSet::from_rows(&[(ClassId(0), vec![1.0, 1.0]), (ClassId(3), vec![0.0, 0.0])], t).unwrap();
        let err = train_final_classifier(&seen, &bad, Mode::Gzsl, &SoftmaxConfig::default()).unwrap_err();
        assert!(matches!(err, Error::SplitViolation(_)), "{err}");
    }
}
