//! Train/evaluate pipeline shared by the subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use semzsl_core::datasets::{load_features, ClassTable, FeatureSet, SplitSpec};
use semzsl_core::embed_zsl::{train_embed, EmbedClassifier, EmbedConfig, EmbedModel};
use semzsl_core::evaluation::{assign_borda, evaluate_run, PredictionLog};
use semzsl_core::fusion::{build_semantics, FusionParams, SemanticSet};
use semzsl_core::gen_zsl::{final_classifier, train_gan, GanConfig, SoftmaxClassifier, SoftmaxConfig, TrainedGan};
use semzsl_core::llm_client::DescriptionCache;
use semzsl_core::{Averaging, ClassId, EvalReport, Mode, ParamStore, Predictor, Tensor, Variation, WordVectorTable};

use crate::config::{ConfigError, Method, RunConfig};

pub const CHECKPOINT_FILE: &str = "checkpoint.txt";
pub const LOSSES_FILE: &str = "losses.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const CONFIG_RECORD: &str = "config.txt";

fn config_err(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Split, features and semantics of one run.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub split: SplitSpec,
    pub table: ClassTable,
    pub train: FeatureSet,
    pub test: Option<FeatureSet>,
}

pub fn load_split(cfg: &RunConfig) -> Result<SplitSpec> {
    let path = cfg
        .split
        .as_ref()
        .ok_or_else(|| config_err("no split manifest given"))?;
    Ok(SplitSpec::load(path)?)
}

pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs> {
    let split = load_split(cfg)?;
    let table = split.class_table()?;
    let train_path = split
        .train_features
        .as_ref()
        .ok_or_else(|| config_err(format!("split {:?} names no train_features", split.name)))?;
    let train = load_features(train_path, &split)?;
    let test = split
        .test_features
        .as_ref()
        .map(|p| load_features(p, &split))
        .transpose()?;
    Ok(Inputs {
        split,
        table,
        train,
        test,
    })
}

/// Description directory: the config entry, else the split's.
pub fn description_dir(cfg: &RunConfig, split: &SplitSpec) -> Option<PathBuf> {
    cfg.descriptions.clone().or_else(|| split.descriptions.clone())
}

/// Semantics laid out for `variation`, from a prebuilt file or from word
/// vectors and the description cache.
pub fn load_semantics(cfg: &RunConfig, split: &SplitSpec, variation: Variation) -> Result<SemanticSet> {
    let table = split.class_table()?;
    if let Some(path) = &cfg.semantics {
        let set = SemanticSet::load(path, &table)?;
        return if set.variation() == variation {
            Ok(set)
        } else if set.variation() == Variation::Ours {
            Ok(set.for_variation(variation))
        } else {
            Err(config_err(format!(
                "{} holds {} semantics and cannot serve {variation}",
                path.display(),
                set.variation()
            )))
        };
    }
    let wv_path = cfg
        .word_vectors
        .as_ref()
        .ok_or_else(|| config_err("need either word_vectors or a prebuilt semantics file"))?;
    let vectors = WordVectorTable::load(wv_path)?;
    if variation == Variation::OnlyClassName {
        return Ok(build_semantics(&table, &vectors, variation, |_| Ok(None))?);
    }
    let dir = description_dir(cfg, split)
        .ok_or_else(|| config_err(format!("variation {variation} needs a description cache")))?;
    if !dir.is_dir() {
        return Err(config_err(format!(
            "description cache {} does not exist",
            dir.display()
        )));
    }
    let cache = DescriptionCache::open(dir)?;
    Ok(build_semantics(&table, &vectors, variation, |n| cache.get(n))?)
}

/// Trained parameters of either family.
#[derive(Debug, Clone)]
pub enum Trained {
    Embed {
        model: EmbedModel,
        fusion: FusionParams,
    },
    Gen {
        gan: Box<TrainedGan>,
        final_zsl: SoftmaxClassifier,
        final_gzsl: SoftmaxClassifier,
    },
}

const META_METHOD: &str = "meta.method";
const META_ALPHA: &str = "meta.alpha";
const META_LAMBDA: &str = "meta.lambda";
const META_AUX_CLASSES: &str = "meta.classes_aux";
const META_ZSL_CLASSES: &str = "meta.classes_zsl";
const META_GZSL_CLASSES: &str = "meta.classes_gzsl";

fn ids_tensor(ids: &[ClassId]) -> Tensor {
    Tensor::row(&ids.iter().map(|c| f64::from(c.0)).collect::<Vec<_>>())
}

fn tensor_ids(store: &ParamStore, name: &str) -> Result<Vec<ClassId>> {
    Ok(store.get(name)?.data().iter().map(|&v| ClassId(v as u32)).collect())
}

impl Trained {
    pub fn method(&self) -> Method {
        match self {
            Trained::Embed { .. } => Method::Embed,
            Trained::Gen { .. } => Method::Gen,
        }
    }

    pub fn to_store(&self) -> Result<ParamStore> {
        let mut s = ParamStore::new();
        match self {
            Trained::Embed { model, fusion } => {
                s.absorb("embed.", &model.store)?;
                s.absorb("fusion.", &fusion.store)?;
                s.insert(META_METHOD, Tensor::scalar(0.0))?;
                s.insert(META_ALPHA, Tensor::scalar(fusion.alpha))?;
                s.insert(META_LAMBDA, Tensor::scalar(model.lambda))?;
            }
            Trained::Gen {
                gan,
                final_zsl,
                final_gzsl,
            } => {
                s.absorb("gan.", &gan.to_store()?)?;
                s.absorb("final_zsl.", &final_zsl.store)?;
                s.absorb("final_gzsl.", &final_gzsl.store)?;
                s.insert(META_METHOD, Tensor::scalar(1.0))?;
                s.insert(META_ALPHA, Tensor::scalar(gan.fusion.alpha))?;
                s.insert(META_AUX_CLASSES, ids_tensor(gan.classifier.classes()))?;
                s.insert(META_ZSL_CLASSES, ids_tensor(final_zsl.classes()))?;
                s.insert(META_GZSL_CLASSES, ids_tensor(final_gzsl.classes()))?;
            }
        }
        Ok(s)
    }

    pub fn from_store(s: &ParamStore) -> Result<Self> {
        let alpha = s.get(META_ALPHA)?.item()?;
        if s.get(META_METHOD)?.item()? == 0.0 {
            let lambda = s.get(META_LAMBDA)?.item()?;
            Ok(Trained::Embed {
                model: EmbedModel::from_store(s.extract("embed."), lambda)?,
                fusion: FusionParams::from_store(s.extract("fusion."), alpha)?,
            })
        } else {
            Ok(Trained::Gen {
                gan: Box::new(TrainedGan::from_store(
                    &s.extract("gan."),
                    alpha,
                    tensor_ids(s, META_AUX_CLASSES)?,
                )?),
                final_zsl: SoftmaxClassifier::new(s.extract("final_zsl."), tensor_ids(s, META_ZSL_CLASSES)?)?,
                final_gzsl: SoftmaxClassifier::new(s.extract("final_gzsl."), tensor_ids(s, META_GZSL_CLASSES)?)?,
            })
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        Ok(self.to_store()?.save(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let store = ParamStore::load(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
        Self::from_store(&store)
    }
}

pub fn embed_config(cfg: &RunConfig) -> EmbedConfig {
    EmbedConfig {
        lr: cfg.lr,
        epochs: cfg.epochs,
        lambda: cfg.lambda,
        alpha: cfg.alpha,
        seed: cfg.seed,
        common_dim: cfg.common_dim,
        batch_size: cfg.batch_size,
        freeze_features: cfg.freeze_features,
    }
}

pub fn gan_config(cfg: &RunConfig) -> GanConfig {
    let clf = SoftmaxConfig {
        lr: cfg.clf_lr,
        epochs: cfg.clf_epochs,
        batch_size: cfg.batch_size,
        seed: cfg.seed,
    };
    GanConfig {
        lr: cfg.lr,
        eta: cfg.eta,
        n_critic: cfg.n_critic,
        cls_weight: cfg.cls_weight,
        batch_size: cfg.batch_size,
        steps: cfg.steps,
        alpha: cfg.alpha,
        seed: cfg.seed,
        synth_per_class: cfg.synth_per_class,
        pretrain: clf.clone(),
        final_clf: clf,
        ..GanConfig::default()
    }
}

/// Train the configured family. Returns the parameters and the loss CSV.
pub fn train(cfg: &RunConfig, train: &FeatureSet, semantics: &SemanticSet) -> Result<(Trained, String)> {
    let mut csv = String::new();
    match cfg.method {
        Method::Embed => {
            let out = train_embed(train, semantics, &embed_config(cfg))?;
            csv.push_str("epoch,loss\n");
            for (i, l) in out.losses.iter().enumerate() {
                writeln!(csv, "{i},{l}").unwrap();
            }
            Ok((
                Trained::Embed {
                    model: out.model,
                    fusion: out.fusion,
                },
                csv,
            ))
        }
        Method::Gen => {
            let gcfg = gan_config(cfg);
            let gan = train_gan(train, semantics, &gcfg)?;
            csv.push_str("step,critic,wasserstein,penalty,generator,cls\n");
            for (i, l) in gan.losses.iter().enumerate() {
                writeln!(
                    csv,
                    "{},{},{},{},{},{}",
                    i + 1,
                    l.critic,
                    l.wasserstein,
                    l.penalty,
                    l.generator,
                    l.cls
                )
                .unwrap();
            }
            let final_zsl = final_classifier(&gan, train, semantics, Mode::Zsl, &gcfg)?;
            let final_gzsl = final_classifier(&gan, train, semantics, Mode::Gzsl, &gcfg)?;
            Ok((
                Trained::Gen {
                    gan: Box::new(gan),
                    final_zsl,
                    final_gzsl,
                },
                csv,
            ))
        }
    }
}

pub fn modes(cfg: &RunConfig) -> Vec<Mode> {
    cfg.mode.map_or_else(|| vec![Mode::Zsl, Mode::Gzsl], |m| vec![m])
}

/// Evaluate under each protocol and merge the metrics into one report.
pub fn evaluate(
    trained: &Trained,
    test: &FeatureSet,
    semantics: &SemanticSet,
    modes: &[Mode],
    averaging: Averaging,
) -> Result<(EvalReport, Vec<(Mode, PredictionLog)>)> {
    let embed = match trained {
        Trained::Embed { model, fusion } => Some(EmbedClassifier::new(model.clone(), fusion.clone(), semantics)?),
        Trained::Gen { .. } => None,
    };
    let mut report = EvalReport::new(semantics.variation(), averaging);
    let mut logs = Vec::new();
    for &mode in modes {
        let predictor: &dyn Predictor = match trained {
            Trained::Embed { .. } => embed.as_ref().expect("built above"),
            Trained::Gen {
                final_zsl, final_gzsl, ..
            } => match mode {
                Mode::Zsl => final_zsl,
                Mode::Gzsl => final_gzsl,
            },
        };
        let (r, log) = evaluate_run(predictor, test, semantics, mode, averaging)?;
        report.merge(&r)?;
        logs.push((mode, log));
    }
    Ok((report, logs))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn report_csv(reports: &[EvalReport]) -> Result<String> {
    let mut buf = Vec::new();
    semzsl_core::evaluation::write_reports_csv(reports, &mut buf)?;
    Ok(String::from_utf8(buf)?)
}

/// Train and save under `out`: checkpoint, losses and the resolved config.
pub fn train_to_dir(cfg: &RunConfig, inputs: &Inputs, semantics: &SemanticSet, out: &Path) -> Result<Trained> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let (trained, losses) = train(cfg, &inputs.train, semantics)?;
    trained.save(&out.join(CHECKPOINT_FILE))?;
    write(&out.join(LOSSES_FILE), losses)?;
    write(&out.join(CONFIG_RECORD), cfg.to_text())?;
    Ok(trained)
}

/// Evaluate and save under `out`: the report row and one prediction log per protocol.
pub fn eval_to_dir(
    cfg: &RunConfig,
    trained: &Trained,
    inputs: &Inputs,
    semantics: &SemanticSet,
    out: &Path,
) -> Result<EvalReport> {
    let test = inputs
        .test
        .as_ref()
        .ok_or_else(|| config_err(format!("split {:?} names no test_features", inputs.split.name)))?;
    let (report, logs) = evaluate(trained, test, semantics, &modes(cfg), cfg.averaging)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write(&out.join(REPORT_FILE), report_csv(std::slice::from_ref(&report))?)?;
    for (mode, log) in logs {
        let mut buf = Vec::new();
        log.write_csv(&mut buf)?;
        write(&out.join(format!("predictions_{mode}.csv")), buf)?;
    }
    Ok(report)
}

/// Train and evaluate all three variations concurrently; Borda points filled.
pub fn compare(cfg: &RunConfig, inputs: &Inputs) -> Result<Vec<EvalReport>> {
    let results: Vec<Result<EvalReport>> = std::thread::scope(|s| {
        let handles: Vec<_> = Variation::ALL
            .iter()
            .map(|&v| {
                s.spawn(move || -> Result<EvalReport> {
                    let mut c = cfg.clone();
                    c.variation = v;
                    let sem = load_semantics(&c, &inputs.split, v)?;
                    let dir = cfg.output.join(v.as_str());
                    let trained = train_to_dir(&c, inputs, &sem, &dir)?;
                    eval_to_dir(&c, &trained, inputs, &sem, &dir)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(anyhow::anyhow!("variation worker panicked")))
            })
            .collect()
    });
    let mut reports = results.into_iter().collect::<Result<Vec<_>>>()?;
    assign_borda(&mut reports)?;
    Ok(reports)
}

pub const SWEEP_HEADER: &str = "alpha,mode,acc,acc_s,acc_u,hm";

/// One fused-variation run per alpha; rows are `alpha x mode`.
pub fn sweep_alpha(cfg: &RunConfig, inputs: &Inputs, alphas: &[f64]) -> Result<String> {
    if alphas.is_empty() {
        return Err(config_err("alpha set is empty"));
    }
    if let Some(a) = alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(config_err(format!("alpha {a} is outside [0, 1]")));
    }
    let sem = load_semantics(cfg, &inputs.split, Variation::Ours)?;
    let results: Vec<Result<EvalReport>> = std::thread::scope(|s| {
        let handles: Vec<_> = alphas
            .iter()
            .map(|&a| {
                let sem = &sem;
                s.spawn(move || -> Result<EvalReport> {
                    let mut c = cfg.clone();
                    c.variation = Variation::Ours;
                    c.alpha = a;
                    let dir = cfg.output.join(format!("alpha_{a}"));
                    let trained = train_to_dir(&c, inputs, sem, &dir)?;
                    eval_to_dir(&c, &trained, inputs, sem, &dir)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(anyhow::anyhow!("sweep worker panicked")))
            })
            .collect()
    });
    let cell = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.4}"));
    let mut csv = format!("{SWEEP_HEADER}\n");
    for (a, r) in alphas.iter().zip(results) {
        let r = r?;
        for mode in modes(cfg) {
            match mode {
                Mode::Zsl => writeln!(csv, "{a},zsl,{},,,", cell(r.acc)).unwrap(),
                Mode::Gzsl => writeln!(
                    csv,
                    "{a},gzsl,,{},{},{}",
                    cell(r.acc_seen),
                    cell(r.acc_unseen),
                    cell(r.hm)
                )
                .unwrap(),
            }
        }
    }
    Ok(csv)
}
