use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use polarimeter::pipeline::write_synth_corpus;
use polarimeter::{Config, Pipeline, StageStatus};
use polarimeter_core::synth::{generate, SynthConfig};
use polarimeter_core::ElementKind;

#[derive(Parser)]
#[command(
    name = "polarimeter",
    version,
    about = "Measure stance polarization in tweet corpora"
)]
struct Cli {
    /// Pipeline config (JSON). For `synth`, a bare generator config is also accepted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Artifact directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the top-level seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse, deduplicate and filter the corpus, then build user profiles.
    Ingest {
        #[arg(long)]
        input: Option<PathBuf>,
        /// Comma-separated keyword list.
        #[arg(long, value_delimiter = ',')]
        keywords: Option<Vec<String>>,
    },
    /// Label users by retweet overlap with the seed groups.
    Propagate {
        #[arg(long)]
        seeds: Option<PathBuf>,
        #[arg(long)]
        supp_threshold: Option<u32>,
        #[arg(long)]
        opp_threshold: Option<u32>,
        #[arg(long)]
        max_iterations: Option<u32>,
    },
    /// Train the account classifier on the propagated labels.
    Train {
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        epochs: Option<u32>,
        #[arg(long)]
        learning_rate: Option<f64>,
    },
    /// Label remaining users the classifier is confident about.
    Classify {
        #[arg(long)]
        min_accounts: Option<usize>,
        #[arg(long)]
        confidence: Option<f64>,
    },
    /// Score elements by valence.
    Valence {
        /// hashtag, account or website (default: all three).
        #[arg(long)]
        kind: Option<ElementKind>,
        #[arg(long)]
        min_support: Option<u64>,
    },
    /// Sample users and build the cosine similarity graph.
    Similarity {
        #[arg(long)]
        kind: Option<ElementKind>,
        #[arg(long)]
        sample: Option<usize>,
        #[arg(long)]
        edge_floor: Option<f64>,
        #[arg(long)]
        min_elements: Option<usize>,
    },
    /// Lay out the similarity graph and render it.
    Layout {
        #[arg(long)]
        kind: Option<ElementKind>,
        #[arg(long)]
        iterations: Option<u32>,
        #[arg(long)]
        unweighted: bool,
    },
    /// Write the summary tables.
    Report {
        #[arg(long)]
        annotations: Option<PathBuf>,
    },
    /// Generate a synthetic corpus into the output directory.
    Synth,
    /// Run every stage, skipping those that are up to date.
    Run {
        /// Rerun stages even if they are up to date.
        #[arg(long)]
        force: bool,
    },
}

fn load_config(path: Option<&Path>) -> anyhow::Result<Config> {
    Ok(match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    })
}

fn synth_config(path: Option<&Path>) -> anyhow::Result<SynthConfig> {
    let Some(path) = path else {
        return Ok(SynthConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| path.display().to_string())?;
    let value: serde_json::Value = serde_json::from_str(&text).with_context(|| path.display().to_string())?;
    if value.get("version").is_some() {
        match Config::load(path)?.synth {
            Some(s) => Ok(s),
            None => bail!("{}: config has no `synth` section", path.display()),
        }
    } else {
        serde_json::from_value(value).with_context(|| path.display().to_string())
    }
}

fn kinds(kind: Option<ElementKind>) -> Vec<ElementKind> {
    kind.map_or_else(|| ElementKind::ALL.to_vec(), |k| vec![k])
}

fn report(results: &[(String, StageStatus)]) {
    for (name, status) in results {
        let s = match status {
            StageStatus::Ran => "ran",
            StageStatus::Skipped => "up to date",
        };
        println!("{name}\t{s}");
    }
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    if let Cmd::Synth = cli.cmd {
        let mut cfg = synth_config(cli.config.as_deref())?;
        if let Some(seed) = cli.seed {
            cfg.seed = seed;
        }
        let corpus = generate(&cfg)?;
        write_synth_corpus(&cli.out, &corpus)?;
        println!("{} tweets written to {}", corpus.tweets.len(), cli.out.display());
        return Ok(());
    }

    let mut cfg = load_config(cli.config.as_deref())?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let mut force = false;
    match &cli.cmd {
        Cmd::Ingest { input, keywords } => {
            if let Some(i) = input {
                cfg.corpus = Some(i.clone());
                cfg.synth = None;
            }
            if keywords.is_some() {
                cfg.keywords = keywords.clone();
            }
        }
        Cmd::Propagate {
            seeds,
            supp_threshold,
            opp_threshold,
            max_iterations,
        } => {
            if seeds.is_some() {
                cfg.seeds = seeds.clone();
            }
            let p = &mut cfg.propagation;
            p.supp_threshold = supp_threshold.unwrap_or(p.supp_threshold);
            p.opp_threshold = opp_threshold.unwrap_or(p.opp_threshold);
            p.max_iterations = max_iterations.unwrap_or(p.max_iterations);
        }
        Cmd::Train {
            dim,
            epochs,
            learning_rate,
        } => {
            let c = &mut cfg.classifier;
            c.dim = dim.unwrap_or(c.dim);
            c.epochs = epochs.unwrap_or(c.epochs);
            c.learning_rate = learning_rate.unwrap_or(c.learning_rate);
        }
        Cmd::Classify {
            min_accounts,
            confidence,
        } => {
            let c = &mut cfg.classifier;
            c.min_distinct_accounts = min_accounts.unwrap_or(c.min_distinct_accounts);
            c.confidence_threshold = confidence.unwrap_or(c.confidence_threshold);
        }
        Cmd::Valence { min_support, .. } => {
            cfg.valence.min_support = min_support.unwrap_or(cfg.valence.min_support);
        }
        Cmd::Similarity {
            sample,
            edge_floor,
            min_elements,
            ..
        } => {
            let s = &mut cfg.similarity;
            s.sample = sample.unwrap_or(s.sample);
            s.edge_floor = edge_floor.unwrap_or(s.edge_floor);
            s.min_elements = min_elements.unwrap_or(s.min_elements);
        }
        Cmd::Layout {
            iterations,
            unweighted,
            ..
        } => {
            cfg.layout.iterations = iterations.unwrap_or(cfg.layout.iterations);
            if *unweighted {
                cfg.layout.weighted = false;
            }
        }
        Cmd::Report { annotations } => {
            if annotations.is_some() {
                cfg.annotations = annotations.clone();
            }
        }
        Cmd::Run { force: f } => force = *f,
        Cmd::Synth => unreachable!(),
    }
    cfg.validate()?;

    let mut pipeline = Pipeline::new(cfg, &cli.out);
    pipeline.force = force;
    let mut done = Vec::new();
    let mut step =
        |name: String, r: Result<StageStatus, polarimeter::StageError>| r.map(|s| done.push((name, s)));
    match cli.cmd {
        Cmd::Ingest { .. } => {
            step("synth".into(), pipeline.synth())?;
            step("ingest".into(), pipeline.ingest())?;
            step("profiles".into(), pipeline.profiles())?;
        }
        Cmd::Propagate { .. } => step("propagate".into(), pipeline.propagate())?,
        Cmd::Train { .. } => step("train".into(), pipeline.train())?,
        Cmd::Classify { .. } => step("classify".into(), pipeline.classify())?,
        Cmd::Valence { kind, .. } => {
            for k in kinds(kind) {
                step(format!("valence-{}", k.as_str()), pipeline.valence(k))?;
            }
        }
        Cmd::Similarity { kind, .. } => {
            for k in kinds(kind) {
                step(format!("similarity-{}", k.as_str()), pipeline.similarity(k))?;
            }
        }
        Cmd::Layout { kind, .. } => {
            for k in kinds(kind) {
                step(format!("layout-{}", k.as_str()), pipeline.layout(k))?;
            }
        }
        Cmd::Report { .. } => step("report".into(), pipeline.report())?,
        Cmd::Run { .. } => done = pipeline.run()?,
        Cmd::Synth => unreachable!(),
    }
    report(&done);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("POLARIMETER_LOG", "info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
