use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use semzsl_cli::run::{self, Trained, CHECKPOINT_FILE};
use semzsl_cli::{exit_code, ConfigError, Method, RunConfig};
use semzsl_core::datasets::{synth_dataset, SplitSpec, SynthConfig};
use semzsl_core::evaluation::{format_table, write_reports_csv};
use semzsl_core::gen_zsl::synthesize_classes;
use semzsl_core::llm_client::{fetch_all, DescriptionCache, EndpointConfig, HttpCompletion};
use semzsl_core::{Role, Variation};

#[derive(Parser, Debug)]
#[command(
    name = "semzsl",
    version,
    about = "Zero-shot learning with fused class-name and description semantics"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Run configuration file (key = value).
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Override any config key, e.g. `--set epochs=200`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, global = true)]
    split: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// only-class-name | only-chatgpt | ours
    #[arg(long, global = true)]
    variation: Option<String>,
    /// zsl | gzsl | both
    #[arg(long, global = true)]
    mode: Option<String>,
    /// embed | gen
    #[arg(long, global = true)]
    method: Option<String>,
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Fill the description cache for every class of a split.
    FetchDescriptions(FetchArgs),
    /// Write the semantic vectors of a split for one variation.
    BuildSemantics {
        #[arg(long)]
        word_vectors: Option<PathBuf>,
        #[arg(long)]
        cache: Option<PathBuf>,
        /// Output file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the configured method; writes checkpoint and losses.
    Train,
    /// Train the embedding method.
    TrainEmbed,
    /// Train the generative method.
    TrainGen,
    /// Generate unseen-class features from a generative checkpoint.
    Synthesize {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Features per unseen class (defaults to synth_per_class).
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the split's test features.
    Eval {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train and evaluate all three variations and rank them by Borda count.
    Compare,
    /// Fused-variation runs over a set of alpha values.
    SweepAlpha {
        /// Comma-separated; defaults to the config's alpha_sweep.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        alphas: Option<Vec<f64>>,
    },
    /// Write a seeded synthetic dataset with a ready-to-run config.
    SynthData(SynthArgs),
}

#[derive(Args, Debug)]
struct FetchArgs {
    /// Cache directory (defaults to the split's descriptions entry).
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Never contact the endpoint; any miss is an error.
    #[arg(long)]
    offline: bool,
    #[arg(long)]
    url: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    api_key_env: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long, default_value_t = 60)]
    timeout_secs: u64,
    #[arg(long, default_value_t = 4)]
    workers: usize,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seen: usize,
    #[arg(long, default_value_t = 3)]
    unseen: usize,
    #[arg(long, default_value_t = 32)]
    feature_dim: usize,
    #[arg(long, default_value_t = 16)]
    semantic_dim: usize,
    #[arg(long, default_value_t = 60)]
    train_per_class: usize,
    #[arg(long, default_value_t = 40)]
    test_per_class: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma_class: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma_desc: f64,
    #[arg(long, default_value_t = 0.05)]
    sigma_feature: f64,
    /// 0 disables the low-rank latent.
    #[arg(long, default_value_t = 4)]
    latent_rank: usize,
}

fn resolve_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let here = Path::new(".");
    let mut set = |k: &str, v: Option<String>| -> Result<(), ConfigError> {
        match v {
            Some(v) => cfg.set(k, &v, here),
            None => Ok(()),
        }
    };
    let path_str = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string());
    set("split", path_str(&common.split))?;
    set("seed", common.seed.map(|s| s.to_string()))?;
    set("alpha", common.alpha.map(|a| a.to_string()))?;
    set("variation", common.variation.clone())?;
    set("mode", common.mode.clone())?;
    set("method", common.method.clone())?;
    set("output", path_str(&common.output))?;
    for o in &common.overrides {
        cfg.set_pair(o)?;
    }
    Ok(cfg)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn cmd_fetch(cfg: &RunConfig, args: &FetchArgs) -> Result<()> {
    let split = run::load_split(cfg)?;
    let dir = args
        .cache
        .clone()
        .or_else(|| run::description_dir(cfg, &split))
        .ok_or_else(|| ConfigError("no description cache directory given".into()))?;
    let cache = DescriptionCache::open(&dir)?;
    let defaults = EndpointConfig::default();
    let endpoint = EndpointConfig {
        url: args.url.clone().unwrap_or(defaults.url),
        api_key_env: args.api_key_env.clone().unwrap_or(defaults.api_key_env),
        model: args.model.clone().unwrap_or(defaults.model),
        temperature: args.temperature.unwrap_or(defaults.temperature),
        timeout: Duration::from_secs(args.timeout_secs),
    };
    let names: Vec<String> = split.all_classes().map(String::from).collect();
    let missing: Vec<String> = cache.missing(&names)?.into_iter().map(String::from).collect();
    for n in &names {
        let state = if missing.contains(n) { "miss" } else { "hit" };
        println!("{state}\t{n}");
    }
    let endpoint = (!args.offline).then_some(&endpoint);
    fetch_all(&missing, &cache, endpoint, &HttpCompletion, args.workers)?;
    println!(
        "{} fetched, {} cached ({})",
        missing.len(),
        names.len() - missing.len(),
        dir.display()
    );
    Ok(())
}

fn cmd_build_semantics(
    cfg: &mut RunConfig,
    word_vectors: Option<PathBuf>,
    cache: Option<PathBuf>,
    out: &Path,
) -> Result<()> {
    if word_vectors.is_some() {
        cfg.word_vectors = word_vectors;
    }
    if cache.is_some() {
        cfg.descriptions = cache;
    }
    if cfg.word_vectors.is_none() {
        return Err(ConfigError("build-semantics needs --word-vectors".into()).into());
    }
    cfg.semantics = None;
    let split = run::load_split(cfg)?;
    let set = run::load_semantics(cfg, &split, cfg.variation)?;
    let mut buf = Vec::new();
    set.write_to(&mut buf)?;
    write_file(out, buf)?;
    println!(
        "{} classes, {} dims, variation {} -> {}",
        set.len(),
        set.dim(),
        set.variation(),
        out.display()
    );
    Ok(())
}

fn cmd_train(cfg: &RunConfig) -> Result<()> {
    cfg.validate()?;
    let inputs = run::load_inputs(cfg)?;
    let sem = run::load_semantics(cfg, &inputs.split, cfg.variation)?;
    run::train_to_dir(cfg, &inputs, &sem, &cfg.output)?;
    println!(
        "trained {} ({}) on {} samples -> {}",
        cfg.method.as_str(),
        cfg.variation,
        inputs.train.len(),
        cfg.output.join(CHECKPOINT_FILE).display()
    );
    Ok(())
}

fn checkpoint_path(cfg: &RunConfig, given: Option<PathBuf>) -> PathBuf {
    given.unwrap_or_else(|| cfg.output.join(CHECKPOINT_FILE))
}

fn cmd_eval(cfg: &RunConfig, checkpoint: Option<PathBuf>) -> Result<()> {
    cfg.validate()?;
    let trained = Trained::load(&checkpoint_path(cfg, checkpoint))?;
    let inputs = run::load_inputs(cfg)?;
    let sem = run::load_semantics(cfg, &inputs.split, cfg.variation)?;
    let report = run::eval_to_dir(cfg, &trained, &inputs, &sem, &cfg.output)?;
    print!("{}", format_table(std::slice::from_ref(&report)));
    println!("averaging: {}", report.averaging);
    Ok(())
}

fn cmd_synthesize(cfg: &RunConfig, checkpoint: Option<PathBuf>, n: Option<usize>, out: Option<PathBuf>) -> Result<()> {
    cfg.validate()?;
    let Trained::Gen { gan, .. } = Trained::load(&checkpoint_path(cfg, checkpoint))? else {
        return Err(ConfigError("synthesize needs a generative checkpoint".into()).into());
    };
    let split = run::load_split(cfg)?;
    let table = split.class_table()?;
    let sem = run::load_semantics(cfg, &split, cfg.variation)?;
    let unseen = table.ids_with(Role::Unseen);
    let n = n.unwrap_or(cfg.synth_per_class);
    let feats = synthesize_classes(&gan.generator, &gan.fusion, &sem, &unseen, n, cfg.seed, &table)?;
    let out = out.unwrap_or_else(|| cfg.output.join("synthetic_unseen.csv"));
    let mut buf = Vec::new();
    feats.write_csv(&mut buf)?;
    write_file(&out, buf)?;
    println!(
        "{} features for {} unseen classes -> {}",
        feats.len(),
        unseen.len(),
        out.display()
    );
    Ok(())
}

fn cmd_compare(cfg: &RunConfig) -> Result<()> {
    let mut check = cfg.clone();
    check.variation = Variation::Ours;
    check.validate()?;
    let inputs = run::load_inputs(cfg)?;
    let reports = run::compare(cfg, &inputs)?;
    let table = format_table(&reports);
    let mut csv = Vec::new();
    write_reports_csv(&reports, &mut csv)?;
    write_file(&cfg.output.join("compare.csv"), csv)?;
    write_file(&cfg.output.join("compare.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, alphas: Option<Vec<f64>>) -> Result<()> {
    let alphas = alphas.unwrap_or_else(|| cfg.alpha_sweep.clone());
    let mut check = cfg.clone();
    check.variation = Variation::OnlyClassName;
    check.validate()?;
    let inputs = run::load_inputs(cfg)?;
    let csv = run::sweep_alpha(cfg, &inputs, &alphas)?;
    write_file(&cfg.output.join("sweep.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

fn cmd_synth_data(args: &SynthArgs, seed: u64) -> Result<()> {
    let scfg = SynthConfig {
        seen: args.seen,
        unseen: args.unseen,
        feature_dim: args.feature_dim,
        semantic_dim: args.semantic_dim,
        train_per_class: args.train_per_class,
        test_per_class: args.test_per_class,
        sigma_class: args.sigma_class,
        sigma_desc: args.sigma_desc,
        sigma_feature: args.sigma_feature,
        latent_rank: (args.latent_rank > 0).then_some(args.latent_rank),
        seed,
    };
    let data = synth_dataset(&scfg)?;
    let dir = &args.out;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let classes = data.train.classes();
    let names = |role| {
        classes
            .ids_with(role)
            .into_iter()
            .map(|c| classes.name(c).to_string())
            .collect::<Vec<_>>()
    };
    let mut split = SplitSpec::new("synthetic", names(Role::Seen), names(Role::Unseen))?;
    split.train_features = Some("train.csv".into());
    split.test_features = Some("test.csv".into());
    data.train.save_csv(&dir.join("train.csv"))?;
    data.test.save_csv(&dir.join("test.csv"))?;
    data.semantics.save(&dir.join("semantics.csv"))?;
    write_file(&dir.join("synthetic.split"), split.to_text())?;
    let run_cfg = format!(
        "# generated by `semzsl synth-data --seed {seed}`\n\
         split = synthetic.split\n\
         semantics = semantics.csv\n\
         output = run\n\
         variation = ours\n\
         alpha = 1\n\
         seed = {seed}\n\
         method = embed\n\
         freeze_features = true\n\
         lr = 0.01\n\
         lambda = 0.01\n\
         epochs = 300\n\
         steps = 1000\n"
    );
    write_file(&dir.join("run.cfg"), run_cfg)?;
    println!(
        "{} train / {} test samples, {} seen + {} unseen classes -> {}",
        data.train.len(),
        data.test.len(),
        args.seen,
        args.unseen,
        dir.display()
    );
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    let mut cfg = resolve_config(&cli.common)?;
    match cli.cmd {
        Cmd::FetchDescriptions(args) => cmd_fetch(&cfg, &args),
        Cmd::BuildSemantics {
            word_vectors,
            cache,
            out,
        } => cmd_build_semantics(&mut cfg, word_vectors, cache, &out),
        Cmd::Train => cmd_train(&cfg),
        Cmd::TrainEmbed => {
            cfg.method = Method::Embed;
            cmd_train(&cfg)
        }
        Cmd::TrainGen => {
            cfg.method = Method::Gen;
            cmd_train(&cfg)
        }
        Cmd::Synthesize { checkpoint, n, out } => cmd_synthesize(&cfg, checkpoint, n, out),
        Cmd::Eval { checkpoint } => cmd_eval(&cfg, checkpoint),
        Cmd::Compare => cmd_compare(&cfg),
        Cmd::SweepAlpha { alphas } => cmd_sweep(&cfg, alphas),
        Cmd::SynthData(args) => cmd_synth_data(&args, cfg.seed),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
