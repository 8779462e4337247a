use super::{ClassTable, FeatureSet};
use crate::error::{Error, Result};
use crate::fusion::{SemanticBundle, SemanticSet};
use crate::rng::{normal_vec, rng_for, SeededRng, Stream};
use crate::types::{ClassId, Role, Variation};

/// Parameters of the seeded synthetic benchmark.
///
/// Each class gets a latent semantic `t`; the class-name vector is
/// `t + N(0, sigma_class^2)`, the description vector `t + N(0, sigma_desc^2)`,
/// and features are `A t + N(0, sigma_feature^2)` for one fixed random
/// linear map `A`. When `latent_rank` is set, every `t` lies in a shared
/// random subspace of that rank and the semantic noise is drawn inside the
/// same subspace (per-component variance is unchanged).
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub seen: usize,
    pub unseen: usize,
    pub feature_dim: usize,
    pub semantic_dim: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub sigma_class: f64,
    pub sigma_desc: f64,
    pub sigma_feature: f64,
    pub latent_rank: Option<usize>,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seen: 7,
            unseen: 3,
            feature_dim: 32,
            semantic_dim: 16,
            train_per_class: 60,
            test_per_class: 40,
            sigma_class: 0.0,
            sigma_desc: 0.0,
            sigma_feature: 0.05,
            latent_rank: Some(4),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    /// Seen-class training features.
    pub train: FeatureSet,
    /// Held-out seen samples followed by unseen samples.
    pub test: FeatureSet,
    /// Both vectors per class (`Variation::Ours` layout).
    pub semantics: SemanticSet,
    /// Noise-free latent semantic of each class, by class id.
    pub latent: Vec<Vec<f64>>,
}

pub fn synth_dataset(cfg: &SynthConfig) -> Result<SyntheticData> {
    if cfg.seen < 2 || cfg.unseen < 2 {
        return Err(Error::contract(
            "synthetic data needs at least 2 seen and 2 unseen classes",
        ));
    }
    if cfg.feature_dim == 0 || cfg.semantic_dim == 0 || cfg.train_per_class == 0 {
        return Err(Error::contract(
            "synthetic dimensions and per-class counts must be positive",
        ));
    }
    if cfg.latent_rank == Some(0) {
        return Err(Error::contract("latent rank must be positive"));
    }
    for s in [cfg.sigma_class, cfg.sigma_desc, cfg.sigma_feature] {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::contract("noise levels must be finite and >= 0"));
        }
    }
    let (d, m) = (cfg.semantic_dim, cfg.feature_dim);
    let mut rng = rng_for(cfg.seed, Stream::Dataset);

    let seen: Vec<String> = (0..cfg.seen).map(|i| format!("seen_{i:03}")).collect();
    let unseen: Vec<String> = (0..cfg.unseen).map(|i| format!("unseen_{i:03}")).collect();
    let classes = ClassTable::new(&seen, &unseen)?;
    let k = classes.len();

    // Latent class semantics, unit variance per component. `basis` is d x r.
    let basis: Option<Vec<Vec<f64>>> = cfg.latent_rank.map(|r| {
        (0..d)
            .map(|_| normal_vec(r, 1.0 / (r as f64).sqrt(), &mut rng))
            .collect()
    });
    let semantic_noise = |sigma: f64, rng: &mut SeededRng| -> Vec<f64> {
        match &basis {
            Some(b) => {
                let u = normal_vec(b[0].len(), sigma, rng);
                b.iter()
                    .map(|row| row.iter().zip(&u).map(|(x, y)| x * y).sum())
                    .collect()
            }
            None => normal_vec(d, sigma, rng),
        }
    };
    let latent: Vec<Vec<f64>> = (0..k).map(|_| semantic_noise(1.0, &mut rng)).collect();

    // Feature map A: m x d, scaled so A t has unit variance per component.
    let map: Vec<Vec<f64>> = (0..m)
        .map(|_| normal_vec(d, 1.0 / (d as f64).sqrt(), &mut rng))
        .collect();
    let means: Vec<Vec<f64>> = latent
        .iter()
        .map(|t| {
            map.iter()
                .map(|row| row.iter().zip(t).map(|(a, x)| a * x).sum())
                .collect()
        })
        .collect();

    let bundles = classes
        .iter()
        .map(|c| {
            let t = &latent[c.id.0 as usize];
            let nc = semantic_noise(cfg.sigma_class, &mut rng);
            let np = semantic_noise(cfg.sigma_desc, &mut rng);
            SemanticBundle {
                class: c.id,
                name: c.name.clone(),
                class_vec: t.iter().zip(&nc).map(|(a, b)| a + b).collect(),
                desc_vec: t.iter().zip(&np).map(|(a, b)| a + b).collect(),
                fused: None,
            }
        })
        .collect();
    let semantics = SemanticSet::new(d, Variation::Ours, bundles)?;

    let sample = |id: ClassId, n: usize, rng: &mut SeededRng| -> Vec<(ClassId, Vec<f64>)> {
        (0..n)
            .map(|_| {
                let noise = normal_vec(m, cfg.sigma_feature, rng);
                let z = means[id.0 as usize].iter().zip(&noise).map(|(a, b)| a + b).collect();
                (id, z)
            })
            .collect()
    };

    let mut train_rows = Vec::new();
    let mut test_rows = Vec::new();
    for c in classes.iter() {
        if c.role == Role::Seen {
            train_rows.extend(sample(c.id, cfg.train_per_class, &mut rng));
        }
    }
    for c in classes.iter() {
        test_rows.extend(sample(c.id, cfg.test_per_class, &mut rng));
    }

    let train = FeatureSet::from_rows(&train_rows, classes.clone())?;
    let test = if test_rows.is_empty() {
        FeatureSet::new(m, Vec::new(), Vec::new(), classes)?
    } else {
        FeatureSet::from_rows(&test_rows, classes)?
    };
    Ok(SyntheticData {
        train,
        test,
        semantics,
        latent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_classes_are_points() {
        let cfg = SynthConfig {
            sigma_feature: 0.0,
            sigma_class: 0.0,
            ..Default::default()
        };
        let data = synth_dataset(&cfg).unwrap();
        let first = data.train.row(0).to_vec();
        for (l, r) in data.train.iter() {
            if l == data.train.label(0) {
                assert_eq!(r, first.as_slice());
            }
        }
        for b in data.semantics.iter() {
            assert_eq!(b.class_vec, data.latent[b.class.0 as usize]);
        }
    }

    #[test]
    fn seeded() {
        let cfg = SynthConfig::default();
        let a = synth_dataset(&cfg).unwrap();
        let b = synth_dataset(&cfg).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.test, b.test);
        assert_eq!(a.semantics, b.semantics);
        let c = synth_dataset(&SynthConfig { seed: 1, ..cfg }).unwrap();
        assert_ne!(a.train, c.train);
    }

    #[test]
    fn split_discipline() {
        let data = synth_dataset(&SynthConfig::default()).unwrap();
        assert!(data
            .train
            .labels()
            .iter()
            .all(|&l| data.train.classes().role(l) == Role::Seen));
        assert_eq!(data.test.with_role(Role::Unseen).len(), 3 * 40);
    }

    #[test]
    fn needs_two_classes_per_side() {
        assert!(synth_dataset(&SynthConfig {
            unseen: 1,
            ..Default::default()
        })
        .is_err());
        assert!(synth_dataset(&SynthConfig {
            seen: 1,
            ..Default::default()
        })
        .is_err());
    }
}
