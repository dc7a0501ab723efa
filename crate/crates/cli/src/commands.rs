use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use cogaug::corpus::{class_histogram, load_corpus, summarize, to_jsonl, Corpus};
use cogaug::embedding::{
    CacheMode, CachedEmbedder, EmbeddingError, EmbeddingProvider, EmbeddingTable, HashingEmbedder, MockEmbedder,
    RemoteEmbedder, ENV_EMBED_KEY, ENV_EMBED_MODEL, ENV_EMBED_URL,
};
use cogaug::evaluation::{embed_inputs, export_report, sweep, EvalContext, ReportPaths, SweepReport};
use cogaug::generation::{
    generate_pool, parse_pool, pool_to_jsonl, GenerationError, GenerationOptions, GenerationProvider, LiveProvider,
    MockProvider, ReplayProvider, ReplayStore, Style, SyntheticPool, Timestamps,
};
use cogaug::sha256_hex;
use serde_json::json;

use crate::config::{EmbedderKind, ExperimentConfig, Mode};

const DEFAULT_REMOTE_MODEL: &str = "sonoisa/sentence-bert-base-ja-mean-tokens-v2";

fn load_inputs_corpus(cfg: &ExperimentConfig) -> Result<Corpus> {
    match &cfg.corpus_path {
        Some(p) => load_corpus(p).with_context(|| format!("loading corpus {}", p.display())),
        None => Ok(Corpus::fixture()),
    }
}

fn load_pool_file(path: &Path) -> Result<SyntheticPool> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading pool {} (run `cogaug generate` first)", path.display()))?;
    parse_pool(&text).with_context(|| format!("parsing pool {}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn generation_provider(cfg: &ExperimentConfig) -> Result<Box<dyn GenerationProvider>> {
    Ok(match cfg.mode {
        Mode::Mock => Box::new(MockProvider),
        Mode::Replay => {
            let store = ReplayStore::open(cfg.replay_dir())
                .with_context(|| format!("opening replay store {}", cfg.replay_dir().display()))?;
            Box::new(ReplayProvider::new(Arc::new(store)))
        }
        Mode::Live => Box::new(LiveProvider::from_env().context("live generation is not configured")?),
    })
}

/// Type-erased embedder so the cache can wrap any configured provider.
struct AnyEmbedder(Box<dyn EmbeddingProvider>);

impl EmbeddingProvider for AnyEmbedder {
    fn id(&self) -> &str {
        self.0.id()
    }

    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, EmbeddingError> {
        self.0.embed(text)
    }
}

fn embedding_provider(cfg: &ExperimentConfig) -> Result<AnyEmbedder> {
    let e = &cfg.embedding;
    let inner: Box<dyn EmbeddingProvider> = match e.provider {
        EmbedderKind::Mock => Box::new(MockEmbedder::new(e.seed, e.dim)),
        EmbedderKind::Ngram => Box::new(HashingEmbedder::new(e.dim)),
        EmbedderKind::Remote if cfg.mode == Mode::Live => {
            let r = RemoteEmbedder::from_env(e.dim).context("remote embeddings are not configured")?;
            match &e.model {
                Some(m) => Box::new(RemoteEmbedder::new(
                    std::env::var(ENV_EMBED_URL)?,
                    std::env::var(ENV_EMBED_KEY)?,
                    m.clone(),
                    e.dim,
                )),
                None => Box::new(r),
            }
        }
        EmbedderKind::Remote => {
            let model = e
                .model
                .clone()
                .or_else(|| std::env::var(ENV_EMBED_MODEL).ok())
                .unwrap_or_else(|| DEFAULT_REMOTE_MODEL.to_string());
            Box::new(RemoteEmbedder::new("", "", model, e.dim))
        }
    };
    Ok(AnyEmbedder(inner))
}

/// Embeds everything a sweep needs, through the on-disk cache.
fn embed_all(cfg: &ExperimentConfig, corpus: &Corpus, pool: &SyntheticPool) -> Result<(EmbeddingTable, String)> {
    let mode = if cfg.mode == Mode::Replay {
        CacheMode::ReplayOnly
    } else {
        CacheMode::ReadWrite
    };
    let cached = CachedEmbedder::new(embedding_provider(cfg)?, mode);
    let dir = cfg.embedding_cache_dir();
    let loaded = cached.load(&dir).with_context(|| format!("loading embedding cache {}", dir.display()))?;
    log::info!("{loaded} cached embeddings loaded from {}", dir.display());
    let table = embed_inputs(corpus, pool, &cached, cfg.jobs).context("embedding texts")?;
    if mode == CacheMode::ReadWrite {
        cached.persist(&dir).with_context(|| format!("writing embedding cache {}", dir.display()))?;
    }
    Ok((table, cached.id().to_string()))
}

/// Depends on the corpus and on which providers produced the samples, so a
/// replayed pool carries the same fingerprint as the run that recorded it.
fn generation_fingerprint(cfg: &ExperimentConfig, corpus: &Corpus, pool: &SyntheticPool) -> String {
    let providers: std::collections::BTreeSet<&str> = pool.samples.iter().map(|s| s.provider_id.as_str()).collect();
    let doc = json!({
        "providers": providers,
        "max_attempts": cfg.generation.max_attempts,
        "corpus": sha256_hex(to_jsonl(corpus).as_bytes()),
        "prompt_text": corpus.prompt_text,
    });
    sha256_hex(doc.to_string().as_bytes())
}

fn failure_table(failures: &[GenerationError]) -> String {
    let mut out = format!("{:<12} {:<22} error\n", "patient_id", "style");
    for f in failures {
        let (pid, style) = match f {
            GenerationError::Provider { patient_id, style, .. } | GenerationError::Rejected { patient_id, style, .. } => {
                (patient_id.as_str(), style.to_string())
            }
            _ => ("-", "-".to_string()),
        };
        let _ = writeln!(out, "{pid:<12} {style:<22} {f}");
    }
    out
}

pub fn generate(cfg: &ExperimentConfig) -> Result<()> {
    let corpus = load_inputs_corpus(cfg)?;
    let provider = generation_provider(cfg)?;
    let store = ReplayStore::open(cfg.replay_dir())
        .with_context(|| format!("opening replay store {}", cfg.replay_dir().display()))?;
    let opts = GenerationOptions {
        max_attempts: cfg.generation.max_attempts,
        jobs: cfg.jobs,
        timestamps: if cfg.mode == Mode::Live {
            Timestamps::SystemClock
        } else {
            Timestamps::Fixed(0)
        },
    };
    let pool = match generate_pool(&corpus, provider.as_ref(), Some(&store), &opts) {
        Ok(pool) => pool,
        Err(GenerationError::Pool { completed, failures }) => {
            eprint!("{}", failure_table(&failures));
            bail!(
                "{} of {} samples failed; {completed} accepted samples are in {} and will be reused on rerun",
                failures.len(),
                failures.len() + completed,
                cfg.replay_dir().display()
            );
        }
        Err(e) => return Err(e.into()),
    };
    let fingerprint = generation_fingerprint(cfg, &corpus, &pool);
    let path = cfg.pool_path();
    write_file(&path, &format!("# config_fingerprint={fingerprint}\n{}", pool_to_jsonl(&pool)))?;
    println!("config_fingerprint={fingerprint}");
    println!(
        "wrote {} samples ({} patients x {} styles) to {}",
        pool.len(),
        corpus.len(),
        Style::ALL.len(),
        path.display()
    );
    Ok(())
}

pub fn embed(cfg: &ExperimentConfig) -> Result<()> {
    let corpus = load_inputs_corpus(cfg)?;
    let pool = load_pool_file(&cfg.pool_path())?;
    let (table, id) = embed_all(cfg, &corpus, &pool)?;
    println!(
        "embedded {} distinct texts with {id} into {}",
        table.len(),
        cfg.embedding_cache_dir().display()
    );
    Ok(())
}

pub fn evaluate(cfg: &ExperimentConfig) -> Result<()> {
    let corpus = load_inputs_corpus(cfg)?;
    let pool = load_pool_file(&cfg.pool_path())?;
    let (table, embedding_id) = embed_all(cfg, &corpus, &pool)?;
    let ctx = EvalContext::new(&corpus, &pool, &table);
    let report = sweep(&ctx, &cfg.evaluation.sweep_config(), &embedding_id).context("sweep failed")?;
    let dir = cfg.report_dir();
    export_report(&report, &ReportPaths::in_dir(&dir)).with_context(|| format!("writing report to {}", dir.display()))?;
    print!("{}", report_table(&report));
    println!("report written to {}", dir.display());
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "NA".into())
}

fn report_table(report: &SweepReport) -> String {
    let best = report
        .points
        .iter()
        .filter(|p| p.metrics.rmse.is_finite())
        .min_by(|a, b| a.metrics.rmse.total_cmp(&b.metrics.rmse));
    let mut out = format!("config_fingerprint={}\n", report.fingerprint);
    let _ = writeln!(
        out,
        "  {:<11} {:>2} {:>8} {:>8} {:>8} {:>10} {:>9} {:>9} {:>6}",
        "strategy", "k", "MAE", "RMSE", "R2", "RMSE 95%", "MAE low", "MAE high", "A"
    );
    for p in &report.points {
        let mark = if best.is_some_and(|b| std::ptr::eq(b, p)) { "*" } else { " " };
        let ci = p.ci.as_ref().map(|c| format!("±{:.4}", c.rmse.half_width)).unwrap_or_default();
        let _ = writeln!(
            out,
            "{mark} {:<11} {:>2} {:>8.4} {:>8.4} {:>8} {:>10} {:>9} {:>9} {:>6.2}",
            p.strategy.to_string(),
            p.k,
            p.metrics.mae,
            p.metrics.rmse,
            fmt_opt(p.metrics.r2),
            ci,
            fmt_opt(p.stratified.low),
            fmt_opt(p.stratified.high),
            p.mean_components
        );
    }
    if let Some(b) = best {
        let _ = writeln!(out, "best by RMSE: {} k={} (RMSE {:.4})", b.strategy, b.k, b.metrics.rmse);
    }
    out
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum::<usize>() + column.saturating_sub(1)
}

fn inspect_report(path: &Path) -> Result<()> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let report: SweepReport = serde_json::from_str(&text).map_err(|e| {
        anyhow::anyhow!(
            "{}: malformed report at byte {}: {e}",
            path.display(),
            byte_offset(&text, e.line(), e.column())
        )
    })?;
    print!("{}", report_table(&report));
    let mut styles = String::from("style counts (similarity selections):\n");
    for (group, counts) in &report.style_counts.counts {
        let cells: Vec<String> = counts.iter().map(|(s, c)| format!("{s}={c}")).collect();
        let _ = writeln!(styles, "  {group:<5} {}", cells.join(" "));
    }
    print!("{styles}");
    Ok(())
}

fn inspect_pool(pool: &SyntheticPool) {
    let table = pool.style_table();
    let mut out = format!("{} samples, {} patients\n{:<10}", pool.len(), table.len(), "patient");
    for s in Style::ALL {
        let _ = write!(out, " {:>8}", &s.name()[..s.name().len().min(8)]);
    }
    out.push('\n');
    for (pid, counts) in &table {
        let _ = write!(out, "{pid:<10}");
        for s in Style::ALL {
            let _ = write!(out, " {:>8}", counts.get(&s).copied().unwrap_or(0));
        }
        out.push('\n');
    }
    let mut by_score = std::collections::BTreeMap::<i32, usize>::new();
    for s in &pool.samples {
        *by_score.entry(s.hds_score).or_default() += 1;
    }
    let _ = writeln!(out, "samples per HDS score: {by_score:?}");
    print!("{out}");
}

pub fn inspect(path: &Path) -> Result<()> {
    if path.is_dir() {
        let report = path.join("report.json");
        if report.exists() {
            return inspect_report(&report);
        }
        bail!("{} is a directory without report.json", path.display());
    }
    if !path.exists() {
        bail!("{} does not exist", path.display());
    }
    if path.extension().is_some_and(|e| e == "json") {
        return inspect_report(path);
    }
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let first = text.lines().find(|l| !l.trim().is_empty() && !l.starts_with('#')).unwrap_or("");
    if first.contains("\"style_name\"") {
        let pool = parse_pool(&text).with_context(|| format!("{} is not a valid pool", path.display()))?;
        inspect_pool(&pool);
    } else {
        let corpus = load_corpus(path).with_context(|| format!("{} is not a valid corpus", path.display()))?;
        print!("{}", summarize(&corpus));
        println!("class histogram: {:?}", class_histogram(&corpus).counts);
    }
    Ok(())
}
