//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; the process fails if any criterion does.

mod common;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use cogaug::augmentation::{
    compute_deficits, cosine_similarity, select_random, select_similarity, DeficitMap, SampleKey, Strategy,
};
use cogaug::corpus::{class_histogram, Corpus, PatientRecord, TranscriptionSource};
use cogaug::embedding::{EmbeddingTable, EmbeddingVector, MockEmbedder, Standardizer};
use cogaug::evaluation::{
    build_fold, embed_inputs, export_report, metrics, run_loocv, sweep, EvalContext, ReportPaths, SweepConfig,
    SweepReport,
};
use cogaug::generation::{
    generate_pool, render_prompt, save_pool, GenerationOptions, MockProvider, Style, SyntheticPool, SyntheticSample,
    SYSTEM_MESSAGE,
};
use cogaug::regression::{pca_ridge_fit, pls_fit, ridge_fit};
use common::{fixture_inputs, nipals_oracle, EMBED_SEED};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_instance(rng: &mut ChaCha8Rng, n: usize, d: usize) -> (DMatrix<f64>, DVector<f64>) {
    let x = DMatrix::from_fn(n, d, |_, _| rng.random_range(-2.0..2.0));
    let y = DVector::from_fn(n, |_, _| rng.random_range(22.0..30.0));
    (x, y)
}

fn rows_of(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
    x.row_iter().map(|r| r.iter().copied().collect()).collect()
}

struct PlsCase {
    max_pred_err: f64,
    max_score_corr: f64,
}

fn pls_cases() -> Result<Vec<PlsCase>, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    let mut out = Vec::new();
    for case in 0..100 {
        let n = rng.random_range(6..=30);
        let d = rng.random_range(2..=20);
        let a = rng.random_range(1..=d.min(n - 1));
        let (x, y) = random_instance(&mut rng, n, d);
        let model = pls_fit(&x, &y, a).map_err(|e| format!("case {case}: {e}"))?;
        if model.n_components != a {
            return Err(format!("case {case}: stopped at {} of {a} components", model.n_components));
        }
        let oracle = nipals_oracle::fit(&rows_of(&x), y.as_slice(), a);
        let mut queries = rows_of(&x);
        queries.extend((0..5).map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<f64>>()));
        let mut max_err = 0.0f64;
        for q in &queries {
            let ours = model.predict(q).map_err(|e| e.to_string())?;
            max_err = max_err.max((ours - oracle.predict(q)).abs());
        }
        out.push(PlsCase {
            max_pred_err: max_err,
            max_score_corr: model.max_score_correlation(),
        });
    }
    Ok(out)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let cases = pls_cases()?;
    let elapsed = start.elapsed();
    let worst = cases.iter().map(|c| c.max_pred_err).fold(0.0, f64::max);
    ensure(worst <= 1e-8, || format!("max-abs prediction gap {worst:e}"))?;
    ensure(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!("100 instances, max-abs gap {worst:.2e}, {:.2}s", elapsed.as_secs_f64()))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    for case in 0..20 {
        let d = rng.random_range(2..=10);
        let n = rng.random_range(d + 2..=30);
        let (x, _) = random_instance(&mut rng, n, d);
        let b = DVector::from_fn(d, |_, _| rng.random_range(-3.0..3.0));
        let y = (&x * &b).add_scalar(rng.random_range(20.0..30.0));
        let model = pls_fit(&x, &y, d).map_err(|e| format!("case {case}: {e}"))?;
        let resid = model.predict_rows(&x).map_err(|e| e.to_string())? - &y;
        worst = worst.max(resid.norm() / y.norm());
    }
    ensure(worst <= 1e-6, || format!("relative residual {worst:e}"))?;
    Ok(format!("20 instances, max relative residual {worst:.2e}"))
}

fn criterion_3() -> Outcome {
    let worst = pls_cases()?.iter().map(|c| c.max_score_corr).fold(0.0, f64::max);
    ensure(worst <= 1e-8, || format!("max |cos(t_a, t_b)| {worst:e}"))?;
    Ok(format!("max normalized score product {worst:.2e}"))
}

/// Dense Gaussian elimination with partial pivoting.
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            let pivot_row = a[col].clone();
            for (dst, src) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                *dst -= f * src;
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// OLS with intercept via the normal equations on [1, X].
fn ols_oracle(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let d = x[0].len() + 1;
    let aug: Vec<Vec<f64>> = x.iter().map(|r| std::iter::once(1.0).chain(r.iter().copied()).collect()).collect();
    let mut ata = vec![vec![0.0; d]; d];
    let mut aty = vec![0.0; d];
    for (r, yi) in aug.iter().zip(y) {
        for i in 0..d {
            aty[i] += r[i] * yi;
            for j in 0..d {
                ata[i][j] += r[i] * r[j];
            }
        }
    }
    solve_dense(ata, aty)
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_ols = 0.0f64;
    let mut worst_mean = 0.0f64;
    for _ in 0..20 {
        let d = rng.random_range(2..=8);
        let n = rng.random_range(d + 3..=30);
        let (x, y) = random_instance(&mut rng, n, d);
        let coef = ols_oracle(&rows_of(&x), y.as_slice());
        for model in [ridge_fit(&x, &y, 0.0), pca_ridge_fit(&x, &y, d, 0.0)] {
            let model = model.map_err(|e| e.to_string())?;
            worst_ols = worst_ols.max((model.intercept - coef[0]).abs());
            for j in 0..d {
                worst_ols = worst_ols.max((model.coefficients[j] - coef[j + 1]).abs());
            }
        }
        let heavy = pca_ridge_fit(&x, &y, d, 1e12).map_err(|e| e.to_string())?;
        let pred = heavy.predict_rows(&x).map_err(|e| e.to_string())?;
        worst_mean = pred.iter().map(|p| (p - y.mean()).abs()).fold(worst_mean, f64::max);
    }
    ensure(worst_ols <= 1e-8, || format!("lambda=0 vs OLS gap {worst_ols:e}"))?;
    ensure(worst_mean <= 1e-6, || format!("lambda=1e12 vs mean gap {worst_mean:e}"))?;
    Ok(format!("OLS gap {worst_ols:.2e}, heavy-ridge mean gap {worst_mean:.2e}"))
}

fn criterion_5(inputs: &common::Inputs) -> Outcome {
    let ctx = EvalContext::new(&inputs.corpus, &inputs.pool, &inputs.embeddings);
    let cfg = SweepConfig::default().regression;
    let mut folds = 0;
    for strategy in Strategy::ALL {
        for k in [1, 5, 7] {
            let run = run_loocv(&ctx, strategy, k, 3, &cfg).map_err(|e| e.to_string())?;
            for fold in &run.folds {
                let leaked: Vec<_> = fold
                    .training_manifest
                    .iter()
                    .filter(|id| id.source_patient() == fold.test_patient_id)
                    .collect();
                ensure(leaked.is_empty(), || format!("{strategy} k={k} {}: {leaked:?}", fold.test_patient_id))?;
            }
            for patient in &inputs.corpus.records {
                let pid = &patient.patient_id;
                let set = build_fold(&ctx, pid, strategy, k, 3, &cfg).map_err(|e| e.to_string())?;
                ensure(set.ids.iter().all(|id| id.source_patient() != pid), || format!("{pid}: manifest leak"))?;
                let held = inputs.embeddings.get(&patient.oral_text).unwrap().values();
                let without: Vec<&Vec<f64>> = set.raw_rows.iter().filter(|r| r.as_slice() != held).collect();
                ensure(without.len() == set.raw_rows.len(), || format!("{pid}: held-out vector in training rows"))?;
                let refit = Standardizer::fit(&without).map_err(|e| e.to_string())?;
                ensure(refit == set.standardizer, || format!("{pid}: standardizer differs without held-out"))?;
                let mut leaky: Vec<Vec<f64>> = without.iter().map(|r| r.to_vec()).collect();
                leaky.push(held.to_vec());
                let leaky = Standardizer::fit(&leaky).map_err(|e| e.to_string())?;
                ensure(leaky != set.standardizer, || format!("{pid}: held-out vector has no effect"))?;
                folds += 1;
            }
        }
    }
    Ok(format!("{folds} folds checked across 4 strategies x k in {{1,5,7}}"))
}

fn criterion_6(inputs: &common::Inputs) -> Outcome {
    let hist = class_histogram(&inputs.corpus);
    let deficits = compute_deficits(&hist, 8);
    ensure(deficits.total() == 42, || format!("deficit sum {}", deficits.total()))?;
    let none = HashSet::new();
    let sims = select_similarity(&inputs.pool, &inputs.corpus, &inputs.embeddings, &deficits, 7, &none)
        .map_err(|e| e.to_string())?;
    let rand = select_random(&inputs.pool, &deficits, 7, &none, 11);
    for (name, sel) in [("similarity", &sims), ("random", &rand)] {
        for score in 22..=30 {
            let available = 7 * hist.count(score);
            if available >= deficits.needed(score) {
                let total = hist.count(score) + sel.count_for_class(score);
                ensure(total == 8, || format!("{name}: class {score} has {total}"))?;
            }
        }
    }
    Ok("deficit sum 42; every fillable class reaches 8 (similarity and random)".into())
}

fn criterion_7() -> Outcome {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12;
    let m = metrics(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).map_err(|e| e.to_string())?;
    ensure(close(m.mae, 2.0 / 3.0) && close(m.rmse, (2.0f64 / 3.0).sqrt()), || format!("{m:?}"))?;
    ensure(m.r2.is_some_and(|r| close(r, 0.0)), || format!("{m:?}"))?;
    let m = metrics(&[22.0, 26.0, 30.0], &[22.0, 26.0, 30.0]).map_err(|e| e.to_string())?;
    ensure(m.mae == 0.0 && m.rmse == 0.0 && m.r2 == Some(1.0), || format!("{m:?}"))?;
    // e = (-1, 1, 2): SSE = 6; mean 77/3 gives SStot = (64 + 25 + 169)/9 = 86/3.
    let m = metrics(&[23.0, 24.0, 30.0], &[24.0, 23.0, 28.0]).map_err(|e| e.to_string())?;
    ensure(close(m.mae, 4.0 / 3.0), || format!("mae {}", m.mae))?;
    ensure(close(m.rmse, 2f64.sqrt()), || format!("rmse {}", m.rmse))?;
    ensure(m.r2.is_some_and(|r| close(r, 1.0 - 18.0 / 86.0)), || format!("r2 {:?}", m.r2))?;
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    for i in 0..1000 {
        let n = rng.random_range(1..=40);
        let t: Vec<f64> = (0..n).map(|_| rng.random_range(15.0..35.0)).collect();
        let p: Vec<f64> = (0..n).map(|_| rng.random_range(15.0..35.0)).collect();
        let m = metrics(&t, &p).map_err(|e| e.to_string())?;
        ensure(m.rmse >= m.mae, || format!("set {i}: rmse {} < mae {}", m.rmse, m.mae))?;
    }
    Ok("hand-computed vectors exact to 1e-12; RMSE >= MAE on 1000 random sets".into())
}

/// Generates, embeds, sweeps and exports into `dir`.
fn end_to_end(dir: &Path) -> Result<SweepReport, String> {
    let corpus = Corpus::fixture();
    let pool = generate_pool(&corpus, &MockProvider, None, &GenerationOptions::default()).map_err(|e| e.to_string())?;
    save_pool(&pool, dir.join("pool.jsonl")).map_err(|e| e.to_string())?;
    let embedder = MockEmbedder::new(EMBED_SEED, 768);
    let table = embed_inputs(&corpus, &pool, &embedder, 4).map_err(|e| e.to_string())?;
    let ctx = EvalContext::new(&corpus, &pool, &table);
    let report = sweep(&ctx, &SweepConfig::default(), cogaug::embedding::EmbeddingProvider::id(&embedder))
        .map_err(|e| e.to_string())?;
    export_report(&report, &ReportPaths::in_dir(dir.join("report"))).map_err(|e| e.to_string())?;
    Ok(report)
}

fn criterion_8(first: &Path) -> Outcome {
    let second = tempfile::tempdir().map_err(|e| e.to_string())?;
    end_to_end(second.path())?;
    let mut files = vec![Path::new("pool.jsonl").to_path_buf()];
    let rel = ReportPaths::in_dir("report");
    files.extend(rel.all().iter().map(|p| p.to_path_buf()));
    for f in &files {
        let a = fs::read(first.join(f)).map_err(|e| format!("{}: {e}", f.display()))?;
        let b = fs::read(second.path().join(f)).map_err(|e| format!("{}: {e}", f.display()))?;
        ensure(a == b, || format!("{} differs between runs", f.display()))?;
    }
    Ok(format!("{} files byte-identical across two runs", files.len()))
}

fn criterion_9() -> Outcome {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data");
    let template = fs::read_to_string(data.join("prompt_template.txt")).map_err(|e| e.to_string())?;
    let expected = fs::read_to_string(data.join("instantiated_prompt.txt")).map_err(|e| e.to_string())?;
    let rendered = render_prompt("[Original Japanese written narrative inserted here]", 24, Style::Emotional)
        .map_err(|e| e.to_string())?;
    ensure(rendered.system == "You generate natural Japanese spoken monologues.", || rendered.system.clone())?;
    ensure(SYSTEM_MESSAGE == rendered.system, || "system constant mismatch".into())?;
    let mut fixed = 0;
    for line in template.lines().filter(|l| !l.contains('{')) {
        ensure(rendered.user.lines().any(|r| r == line), || format!("missing line {line:?}"))?;
        fixed += 1;
    }
    for line in [
        "Convert the written Japanese text into an ORAL monologue.",
        "- Output ONLY the monologue.",
    ] {
        ensure(rendered.user.contains(line), || format!("missing {line:?}"))?;
    }
    ensure(rendered.user == expected, || "rendered prompt differs from worked example".into())?;
    let table: [(&str, &str); 7] = [
        ("conversational", "Fluent conversational retelling, natural and relaxed tone."),
        ("emotional", "More emotional and reflective, slight introspection."),
        (
            "fragmented",
            "Spoken style with short segments, occasional breaks in rhythm, but still clear and coherent.",
        ),
        ("storytelling", "Chronological story-like narration with light details."),
        ("concise", "Simplified, concise spoken Japanese with short sentences."),
        ("humorous", "Slightly humorous or playful, with light jokes or witty expressions."),
        (
            "structural_paraphrase",
            "Preserves meaning and information density while reorganising sentence structure using similar vocabulary.",
        ),
    ];
    for (name, desc) in table {
        let style: Style = name.parse()?;
        ensure(style.description() == desc, || format!("{name}: {:?}", style.description()))?;
    }
    Ok(format!("{fixed} fixed template lines present; worked example byte-exact; 7 style strings exact"))
}

fn criterion_10(report: &SweepReport) -> Outcome {
    let cfg = &report.config;
    ensure(report.points.len() == cfg.strategies.len() * 8, || format!("{} grid points", report.points.len()))?;
    let base = report.point(Strategy::None, 0).ok_or("no baseline point")?;
    for s in Strategy::ALL {
        let p = report.point(s, 0).ok_or_else(|| format!("missing {s} k=0"))?;
        ensure(
            p.metrics == base.metrics && p.stratified == base.stratified && p.scatter == base.scatter,
            || format!("{s} k=0 differs from baseline"),
        )?;
    }
    for k in 1..=7 {
        let p = report.point(Strategy::Random, k).ok_or("missing random point")?;
        let ci = p.ci.as_ref().ok_or_else(|| format!("random k={k} has no CI"))?;
        ensure(ci.rmse.n == 30 && p.runs.len() == 30, || format!("random k={k}: {} seeds", ci.rmse.n))?;
        let hw = 1.96 * ci.rmse.sd / 30f64.sqrt();
        ensure((ci.rmse.half_width - hw).abs() <= 1e-12, || format!("random k={k}: half width"))?;
    }
    Ok(format!("{} grid points; k=0 identical; random rows carry 30-seed CIs", report.points.len()))
}

fn record(pid: &str, score: i32) -> PatientRecord {
    PatientRecord {
        patient_id: pid.to_string(),
        age: 80,
        hds_score: score,
        oral_text: format!("{pid} のお話です。えっと、その、楽しかったです。"),
        written_text: format!("{pid} の作文です。"),
        transcription_source: TranscriptionSource::Manual,
    }
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> EmbeddingVector {
    EmbeddingVector::new((0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// Exhaustive search: the feasible subset with the most samples, and among
/// those the largest total similarity.
fn brute_force(
    cands: &[(SampleKey, f64)],
    deficits: &DeficitMap,
    k: usize,
) -> Vec<SampleKey> {
    let mut best: Option<(usize, f64, u32)> = None;
    for mask in 0u32..(1 << cands.len()) {
        let mut per_patient: BTreeMap<&str, usize> = BTreeMap::new();
        let mut per_class: BTreeMap<i32, usize> = BTreeMap::new();
        let mut total = 0.0;
        let mut ok = true;
        for (i, (key, sim)) in cands.iter().enumerate() {
            if mask & (1 << i) == 0 {
                continue;
            }
            let p = per_patient.entry(&key.patient_id).or_default();
            *p += 1;
            let c = per_class.entry(key.hds_score).or_default();
            *c += 1;
            if *p > k || *c > deficits.needed(key.hds_score) {
                ok = false;
                break;
            }
            total += sim;
        }
        if !ok {
            continue;
        }
        let size = mask.count_ones() as usize;
        let better = match best {
            None => true,
            Some((bs, bt, _)) => size > bs || (size == bs && total > bt),
        };
        if better {
            best = Some((size, total, mask));
        }
    }
    let mask = best.map_or(0, |b| b.2);
    let mut keys: Vec<SampleKey> =
        cands.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, c)| c.0.clone()).collect();
    keys.sort();
    keys
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1111);
    for case in 0..50 {
        let n_patients = rng.random_range(1..=3);
        let dim = 16;
        let records: Vec<PatientRecord> = (0..n_patients)
            .map(|i| record(&format!("Q{case:02}{i}"), rng.random_range(22..=24)))
            .collect();
        let corpus = Corpus::new(records, "prompt").map_err(|e| e.to_string())?;
        let mut table = EmbeddingTable::new();
        let mut samples = Vec::new();
        let mut cands = Vec::new();
        for r in &corpus.records {
            let anchor = random_unit(&mut rng, dim);
            table.insert(&r.oral_text, anchor.clone());
            for style in Style::ALL {
                let text = format!("{}:{style}", r.patient_id);
                let v = random_unit(&mut rng, dim);
                cands.push((
                    SampleKey {
                        patient_id: r.patient_id.clone(),
                        style_name: style,
                        hds_score: r.hds_score,
                    },
                    cosine_similarity(anchor.values(), v.values()).unwrap(),
                ));
                table.insert(&text, v);
                samples.push(SyntheticSample {
                    patient_id: r.patient_id.clone(),
                    style_name: style,
                    hds_score: r.hds_score,
                    char_count: text.chars().count(),
                    text,
                    prompt_hash: String::new(),
                    provider_id: "test".into(),
                    created_at: 0,
                });
            }
        }
        let pool = SyntheticPool::new(samples).map_err(|e| e.to_string())?;
        let needed: BTreeMap<i32, usize> = (22..=30).map(|s| (s, rng.random_range(0..=10))).collect();
        let deficits = DeficitMap { needed, target: 8 };
        let k = rng.random_range(1..=7);
        let sel = select_similarity(&pool, &corpus, &table, &deficits, k, &HashSet::new()).map_err(|e| e.to_string())?;
        let mut got = sel.chosen.clone();
        got.sort();
        let want = brute_force(&cands, &deficits, k);
        ensure(got == want, || format!("case {case}: selected {got:?}, brute force {want:?}"))?;
    }
    Ok("50 cases match exhaustive search".into())
}

fn criterion_12(elapsed: Duration) -> Outcome {
    ensure(elapsed < Duration::from_secs(300), || format!("took {elapsed:?}"))?;
    Ok(format!("full fixture sweep end to end in {:.1}s", elapsed.as_secs_f64()))
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into()))
    });
    match outcome {
        Ok(detail) => {
            println!("criterion {id:>2} PASS  {name}: {detail}");
            true
        }
        Err(why) => {
            println!("criterion {id:>2} FAIL  {name}: {why}");
            false
        }
    }
}

fn main() {
    let inputs = fixture_inputs();
    let first = tempfile::tempdir().expect("tempdir");
    let start = Instant::now();
    let report = end_to_end(first.path());
    let elapsed = start.elapsed();

    let mut ok = true;
    ok &= run(1, "PLS oracle equivalence", criterion_1);
    ok &= run(2, "PLS exact fit", criterion_2);
    ok &= run(3, "score orthogonality", criterion_3);
    ok &= run(4, "ridge sanity", criterion_4);
    ok &= run(5, "leakage", || criterion_5(&inputs));
    ok &= run(6, "class balance", || criterion_6(&inputs));
    ok &= run(7, "metrics exactness", criterion_7);
    ok &= run(8, "determinism", || {
        report.as_ref().map_err(|e| e.clone())?;
        criterion_8(first.path())
    });
    ok &= run(9, "prompt fidelity", criterion_9);
    ok &= run(10, "sweep structure", || criterion_10(report.as_ref().map_err(|e| e.clone())?));
    ok &= run(11, "similarity selection oracle", criterion_11);
    ok &= run(12, "end-to-end runtime", || {
        report.as_ref().map_err(|e| e.clone())?;
        criterion_12(elapsed)
    });
    if !ok {
        std::process::exit(1);
    }
}
