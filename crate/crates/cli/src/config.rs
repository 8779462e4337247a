//! Run configuration: a `key = value` text file, overridable from flags.
//!
//! ```text
//! # everything after '#' is ignored
//! split = data/splits/modelnet40.split
//! word_vectors = data/sample_vectors.txt
//! variation = ours
//! alpha = 0.5
//! method = embed
//! seed = 3
//! output = runs/mn40
//! ```
//!
//! Relative paths resolve against the directory of the file that set them
//! (the working directory for flags). Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use semzsl_core::fusion::ALPHA_SWEEP;
use semzsl_core::{Averaging, Mode, Variation};

/// Bad configuration; maps to the config exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Embed,
    Gen,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Embed => "embed",
            Method::Gen => "gen",
        }
    }
}

impl FromStr for Method {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "embed" | "embedding" => Ok(Method::Embed),
            "gen" | "generative" => Ok(Method::Gen),
            other => Err(bad(format!("unknown method {other:?}, expected embed or gen"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub split: Option<PathBuf>,
    pub word_vectors: Option<PathBuf>,
    /// Prebuilt semantics file; replaces `word_vectors` + descriptions.
    pub semantics: Option<PathBuf>,
    /// Description cache; defaults to the split's `descriptions` entry.
    pub descriptions: Option<PathBuf>,
    pub variation: Variation,
    pub alpha: f64,
    pub alpha_sweep: Vec<f64>,
    pub method: Method,
    /// `None` evaluates both protocols.
    pub mode: Option<Mode>,
    pub averaging: Averaging,
    pub seed: u64,
    pub output: PathBuf,

    pub lr: f64,
    pub epochs: usize,
    pub lambda: f64,
    pub batch_size: usize,
    pub common_dim: Option<usize>,
    pub freeze_features: bool,

    pub steps: usize,
    pub n_critic: usize,
    pub eta: f64,
    pub cls_weight: f64,
    pub synth_per_class: usize,
    pub clf_lr: f64,
    pub clf_epochs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            split: None,
            word_vectors: None,
            semantics: None,
            descriptions: None,
            variation: Variation::Ours,
            alpha: 1.0,
            alpha_sweep: ALPHA_SWEEP.to_vec(),
            method: Method::Embed,
            mode: None,
            averaging: Averaging::PerClass,
            seed: 0,
            output: PathBuf::from("runs/default"),
            lr: 1e-3,
            epochs: 1000,
            lambda: 1e-3,
            batch_size: 64,
            common_dim: None,
            freeze_features: false,
            steps: 1000,
            n_critic: 5,
            eta: 10.0,
            cls_weight: 0.01,
            synth_per_class: 200,
            clf_lr: 1e-2,
            clf_epochs: 50,
        }
    }
}

fn num<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse().map_err(|_| bad(format!("{key}: cannot parse {v:?}")))
}

fn flag(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(format!("{key}: expected true or false, got {v:?}"))),
    }
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text, base)
            .map_err(|e| bad(format!("{}: {}", path.display(), e.0)))?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str, base: &Path) -> Result<(), ConfigError> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("line {}: expected key = value", i + 1)))?;
            self.set(k.trim(), v.trim(), base)
                .map_err(|e| bad(format!("line {}: {}", i + 1, e.0)))?;
        }
        Ok(())
    }

    /// Set one key. Paths are joined onto `base` unless absolute.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<(), ConfigError> {
        let path = || (!value.is_empty()).then(|| base.join(value));
        match key {
            "split" => self.split = path(),
            "word_vectors" => self.word_vectors = path(),
            "semantics" => self.semantics = path(),
            "descriptions" => self.descriptions = path(),
            "output" => self.output = base.join(value),
            "variation" => self.variation = value.parse().map_err(|e: semzsl_core::Error| bad(e.to_string()))?,
            "alpha" => self.alpha = num(key, value)?,
            "alpha_sweep" => self.alpha_sweep = parse_list(key, value)?,
            "method" => self.method = value.parse()?,
            "mode" => {
                self.mode = match value {
                    "both" | "" => None,
                    v => Some(v.parse().map_err(|e: semzsl_core::Error| bad(e.to_string()))?),
                }
            }
            "averaging" => self.averaging = value.parse().map_err(|e: semzsl_core::Error| bad(e.to_string()))?,
            "seed" => self.seed = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "epochs" => self.epochs = num(key, value)?,
            "lambda" => self.lambda = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "common_dim" => self.common_dim = Some(num(key, value)?),
            "freeze_features" => self.freeze_features = flag(key, value)?,
            "steps" => self.steps = num(key, value)?,
            "n_critic" => self.n_critic = num(key, value)?,
            "eta" => self.eta = num(key, value)?,
            "cls_weight" => self.cls_weight = num(key, value)?,
            "synth_per_class" => self.synth_per_class = num(key, value)?,
            "clf_lr" => self.clf_lr = num(key, value)?,
            "clf_epochs" => self.clf_epochs = num(key, value)?,
            other => return Err(bad(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// `key=value` override from the command line.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| bad(format!("override {pair:?} is not key=value")))?;
        self.set(k.trim(), v.trim(), Path::new("."))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.split.is_none() {
            return Err(bad("no split manifest given"));
        }
        if self.semantics.is_none() && self.word_vectors.is_none() {
            return Err(bad("need either word_vectors or a prebuilt semantics file"));
        }
        if self.alpha_sweep.is_empty() {
            return Err(bad("alpha_sweep is empty"));
        }
        if self.variation == Variation::Ours && !self.alpha_sweep.contains(&self.alpha) {
            return Err(bad(format!(
                "alpha {} is not in the sweep set {:?}",
                self.alpha, self.alpha_sweep
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(bad(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if self.batch_size == 0 {
            return Err(bad("batch_size must be positive"));
        }
        Ok(())
    }

    /// Resolved configuration in the file format, for the run record.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        let p = |p: &Option<PathBuf>| p.as_ref().map_or_else(String::new, |p| p.display().to_string());
        kv("split", p(&self.split));
        kv("word_vectors", p(&self.word_vectors));
        kv("semantics", p(&self.semantics));
        kv("descriptions", p(&self.descriptions));
        kv("variation", self.variation.to_string());
        kv("alpha", self.alpha.to_string());
        kv(
            "alpha_sweep",
            self.alpha_sweep
                .iter()
                .map(f64::to_string)
                .collect::<Vec<_>>()
                .join(", "),
        );
        kv("method", self.method.as_str().into());
        kv("mode", self.mode.map_or("both".into(), |m| m.to_string()));
        kv("averaging", self.averaging.as_str().into());
        kv("seed", self.seed.to_string());
        kv("output", self.output.display().to_string());
        kv("lr", self.lr.to_string());
        kv("epochs", self.epochs.to_string());
        kv("lambda", self.lambda.to_string());
        kv("batch_size", self.batch_size.to_string());
        if let Some(q) = self.common_dim {
            kv("common_dim", q.to_string());
        }
        kv("freeze_features", self.freeze_features.to_string());
        kv("steps", self.steps.to_string());
        kv("n_critic", self.n_critic.to_string());
        kv("eta", self.eta.to_string());
        kv("cls_weight", self.cls_weight.to_string());
        kv("synth_per_class", self.synth_per_class.to_string());
        kv("clf_lr", self.clf_lr.to_string());
        kv("clf_epochs", self.clf_epochs.to_string());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_overrides() {
        let mut c = RunConfig::default();
        c.apply_text(
            "split = s.split # trailing comment\nvariation = only-class-name\nalpha = 0.3\nmethod = gen\nmode = zsl\n",
            Path::new("/cfg"),
        )
        .unwrap();
        assert_eq!(c.split.as_deref(), Some(Path::new("/cfg/s.split")));
        assert_eq!(c.variation, Variation::OnlyClassName);
        assert_eq!(c.method, Method::Gen);
        assert_eq!(c.mode, Some(Mode::Zsl));
        c.set_pair("seed=9").unwrap();
        c.set_pair("mode=both").unwrap();
        assert_eq!((c.seed, c.mode), (9, None));
    }

    #[test]
    fn rejects_unknown_keys_and_values() {
        let mut c = RunConfig::default();
        assert!(c.apply_text("colour = red\n", Path::new(".")).is_err());
        assert!(c.apply_text("epochs = many\n", Path::new(".")).is_err());
        assert!(c.apply_text("variation = both\n", Path::new(".")).is_err());
        assert!(c.apply_text("just words\n", Path::new(".")).is_err());
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        assert!(c.validate().is_err());
        c.split = Some("s".into());
        c.word_vectors = Some("w".into());
        c.validate().unwrap();
        c.alpha = 0.2;
        assert!(c.validate().is_err(), "fused variation needs alpha from the sweep set");
        c.variation = Variation::OnlyChatGpt;
        c.validate().unwrap();
        c.alpha_sweep.clear();
        assert!(c.validate().is_err());
    }

    #[test]
    fn text_roundtrip() {
        let mut c = RunConfig::default();
        c.apply_text(
            "split = /a/s.split\nword_vectors = /a/w.txt\noutput = /runs/x\ncommon_dim = 4\nmode = gzsl\n",
            Path::new("/"),
        )
        .unwrap();
        let mut back = RunConfig::default();
        back.apply_text(&c.to_text(), Path::new("/")).unwrap();
        assert_eq!(back, c);
    }
}
