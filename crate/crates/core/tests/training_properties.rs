use approx::assert_relative_eq;
use proptest::prelude::*;
use semzsl_core::datasets::{synth_dataset, SynthConfig, SyntheticData};
use semzsl_core::embed_zsl::{train_embed, EmbedConfig};
use semzsl_core::{ClassId, Role};

const WINDOW: usize = 50;

/// Five seen classes with clean semantics; two unseen ones only to satisfy the split.
fn smoke(seed: u64) -> SyntheticData {
    synth_dataset(&SynthConfig {
        seen: 5,
        unseen: 2,
        feature_dim: 12,
        semantic_dim: 8,
        train_per_class: 30,
        test_per_class: 5,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

fn smoke_cfg(seed: u64) -> EmbedConfig {
    EmbedConfig {
        epochs: 500,
        lr: 1e-2,
        lambda: 1e-3,
        seed,
        ..EmbedConfig::default()
    }
}

#[test]
fn loss_falls_below_a_tenth_in_500_epochs() {
    for seed in 0..3 {
        let data = smoke(seed);
        let t = train_embed(&data.train, &data.semantics, &smoke_cfg(seed)).unwrap();
        let (first, last) = (t.losses[0], *t.losses.last().unwrap());
        assert!(last < 0.1 * first, "seed {seed}: {first} -> {last}");
    }
}

#[test]
fn loss_never_rises_across_a_window() {
    for seed in 0..3 {
        let data = smoke(seed);
        let t = train_embed(&data.train, &data.semantics, &smoke_cfg(seed)).unwrap();
        for (i, w) in t.losses.windows(WINDOW + 1).enumerate() {
            assert!(w[WINDOW] <= w[0], "seed {seed}: epoch {i} {} -> {}", w[0], w[WINDOW]);
        }
    }
}

#[test]
fn training_is_reproducible() {
    let data = smoke(4);
    let cfg = EmbedConfig {
        epochs: 40,
        ..smoke_cfg(4)
    };
    let a = train_embed(&data.train, &data.semantics, &cfg).unwrap();
    let b = train_embed(&data.train, &data.semantics, &cfg).unwrap();
    assert_eq!(a.model.store, b.model.store);
    assert_eq!(a.fusion.store, b.fusion.store);
    assert_eq!(a.losses, b.losses);
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

#[test]
fn class_mean_oracle_separates_unseen_classes() {
    for seed in 0..5 {
        let data = synth_dataset(&SynthConfig {
            seed,
            ..SynthConfig::default()
        })
        .unwrap();
        let unseen = data.test.with_role(Role::Unseen);
        let classes = unseen.present_classes();
        let m = unseen.dim();
        let means: Vec<(ClassId, Vec<f64>)> = classes
            .iter()
            .map(|&c| {
                let rows: Vec<&[f64]> = unseen.iter().filter(|(l, _)| *l == c).map(|(_, z)| z).collect();
                let mean = (0..m)
                    .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64)
                    .collect();
                (c, mean)
            })
            .collect();
        let hits = unseen
            .iter()
            .filter(|(label, z)| {
                let best = means
                    .iter()
                    .min_by(|a, b| sq_dist(z, &a.1).total_cmp(&sq_dist(z, &b.1)))
                    .unwrap();
                best.0 == *label
            })
            .count();
        let acc = 100.0 * hits as f64 / unseen.len() as f64;
        assert!(acc > 95.0, "seed {seed}: {acc}");
    }
}

#[test]
fn within_class_covariance_is_isotropic() {
    let sigma = 0.3;
    let data = synth_dataset(&SynthConfig {
        seen: 2,
        unseen: 2,
        feature_dim: 4,
        semantic_dim: 3,
        train_per_class: 20_000,
        test_per_class: 1,
        sigma_feature: sigma,
        seed: 9,
        ..SynthConfig::default()
    })
    .unwrap();
    let m = data.train.dim();
    for c in data.train.present_classes() {
        let rows: Vec<&[f64]> = data.train.iter().filter(|(l, _)| *l == c).map(|(_, z)| z).collect();
        let n = rows.len() as f64;
        let mean: Vec<f64> = (0..m).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        for i in 0..m {
            for j in 0..m {
                let cov = rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (n - 1.0);
                if i == j {
                    assert_relative_eq!(cov, sigma * sigma, max_relative = 0.05);
                } else {
                    assert!(cov.abs() < 0.05 * sigma * sigma, "{c} ({i},{j}): {cov}");
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn noiseless_features_collapse_per_class(seed in any::<u64>(), seen in 2usize..5, unseen in 2usize..4) {
        let data = synth_dataset(&SynthConfig {
            seen,
            unseen,
            feature_dim: 5,
            semantic_dim: 3,
            train_per_class: 4,
            test_per_class: 3,
            sigma_feature: 0.0,
            seed,
            ..SynthConfig::default()
        })
        .unwrap();
        for set in [&data.train, &data.test] {
            for c in set.present_classes() {
                let rows: Vec<&[f64]> = set.iter().filter(|(l, _)| *l == c).map(|(_, z)| z).collect();
                prop_assert!(rows.windows(2).all(|w| w[0] == w[1]));
            }
        }
        prop_assert!(data.train.iter().all(|(c, _)| data.train.classes().role(c) == Role::Seen));
    }
}
