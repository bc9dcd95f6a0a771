//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
//!
//! The learning-curve claims drive the real `alreview` binary with the
//! checked-in configs under `configs/`.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use alreview_core::active_loop::{
    generate_synthetic_corpus, select_batch, ModelScorer, Pool, SelectionStrategy, StrategyKind, SyntheticSpec,
};
use alreview_core::corpus::{write_jsonl, Split};
use alreview_core::embeddings::{lookup, EmbeddingTable, Tokenizer, Vocabulary};
use alreview_core::linalg::Matrix;
use alreview_core::metrics::{accumulate, micro_scores};
use alreview_core::par::Exec;
use alreview_core::seqmodel::{backward, forward, gradient_check, multi_label_loss, Hyperparams, LabelVector, ModelParams, PredictionVector};
use alreview_core::taxonomy::Task;
use alreview_service::{EmbeddingSource, ServiceConfig, ServiceState, Store};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn alreview(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_alreview"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| format!("spawn alreview: {e}"))?;
    if !out.status.success() {
        return Err(format!("alreview {args:?} failed: {}", String::from_utf8_lossy(&out.stderr).trim()));
    }
    Ok(out.stdout)
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst = 0.0f64;
    let models = 5;
    for seed in 0..models {
        let (t, d, h, c) = (rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=4), rng.gen_range(1..=3));
        let params = ModelParams::random(d, h, c, 0.8, seed);
        let x = Matrix::uniform(t, d, 1.0, &mut rng);
        let y = LabelVector::new((0..c).map(|_| rng.gen_range(0..=1)).collect()).map_err(|e| e.to_string())?;
        let report = gradient_check(&params, (&x, &y), 1e-4);
        worst = worst.max(report.max_relative_error);
        ensure(report.passed, format!("model {seed} (T={t} D={d} H={h} C={c}): {} at {}", report.max_relative_error, report.worst_entry))?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, format!("took {secs:.1}s"))?;
    Ok(format!("{models} models, max relative error {worst:.2e}, {secs:.2}s"))
}

fn loss_analytics() -> Outcome {
    let pv = |v: &[f64]| PredictionVector::new(v.to_vec()).map_err(|e| e.to_string());
    let lv = |v: &[u8]| LabelVector::new(v.to_vec()).map_err(|e| e.to_string());
    let ln2 = std::f64::consts::LN_2;
    let one = multi_label_loss(&pv(&[0.5])?, &lv(&[1])?).map_err(|e| e.to_string())?;
    ensure((one - ln2).abs() <= 1e-6, format!("single class loss {one}"))?;
    let two = multi_label_loss(&pv(&[0.5, 0.5])?, &lv(&[1, 0])?).map_err(|e| e.to_string())?;
    ensure((two - 2.0 * ln2).abs() <= 1e-6, format!("two class loss {two}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for seed in 0..5 {
        let params = ModelParams::random(3, 4, 3, 0.7, seed);
        let x = Matrix::uniform(4, 3, 1.0, &mut rng);
        let y = lv(&[1, 0, 1])?;
        let p = forward(&params, &x).map_err(|e| e.to_string())?;
        let (_, g) = backward(&params, &[(x, y.clone())]).map_err(|e| e.to_string())?;
        for i in 0..3 {
            worst = worst.max((g.head_bias[i] - (p.values()[i] - f64::from(y.values()[i]))).abs());
        }
    }
    ensure(worst <= 1e-10, format!("head gradient off by {worst:e}"))?;
    Ok(format!("ln2 err {:.1e}, 2ln2 err {:.1e}, head gradient err {worst:.1e}", (one - ln2).abs(), (two - 2.0 * ln2).abs()))
}

fn metrics_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2025);
    let (n, c) = (1000, 13);
    let mut draw = |density: f64| -> Vec<Vec<u8>> {
        (0..n).map(|_| (0..c).map(|_| u8::from(rng.gen::<f64>() < density)).collect()).collect()
    };
    let preds = draw(0.25);
    let golds = draw(0.2);
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (p, g) in preds.iter().zip(&golds) {
        for (&a, &b) in p.iter().zip(g) {
            tp += u64::from(a == 1 && b == 1);
            fp += u64::from(a == 1 && b == 0);
            fn_ += u64::from(a == 0 && b == 1);
        }
    }
    let precision = tp as f64 / (tp + fp) as f64;
    let recall = tp as f64 / (tp + fn_) as f64;
    let f1 = 2.0 * precision * recall / (precision + recall);
    let lv = |v: &Vec<u8>| LabelVector::new(v.clone()).unwrap();
    let to_lv = |m: &[Vec<u8>]| m.iter().map(lv).collect::<Vec<_>>();
    let totals = accumulate(&to_lv(&preds), &to_lv(&golds)).map_err(|e| e.to_string())?;
    let r = micro_scores(&totals);
    ensure((totals.tp, totals.fp, totals.fn_) == (tp, fp, fn_), "cell counts differ")?;
    ensure(
        (r.micro_precision, r.micro_recall, r.micro_f1) == (precision, recall, f1),
        format!("scores {:?} vs {:?}", (r.micro_precision, r.micro_recall, r.micro_f1), (precision, recall, f1)),
    )?;

    type Case<'a> = (&'a [u8], &'a [u8], (f64, f64, f64));
    let cases: [Case; 3] =
        [(&[0, 0], &[0, 0], (1.0, 1.0, 1.0)), (&[0, 0], &[1, 0], (1.0, 0.0, 0.0)), (&[0, 1], &[1, 0], (0.0, 0.0, 0.0))];
    for (p, g, want) in cases {
        let r = micro_scores(&accumulate(&[lv(&p.to_vec())], &[lv(&g.to_vec())]).map_err(|e| e.to_string())?);
        ensure((r.micro_precision, r.micro_recall, r.micro_f1) == want, format!("degenerate case {p:?}/{g:?}"))?;
    }
    Ok(format!("{n}x{c} exact (tp {tp}, fp {fp}, fn {fn_}), 3 degenerate cases"))
}

fn selection_oracle() -> Outcome {
    let texts = ["service was slow", "great price", "price price price", "ok", "rude staff and a long wait", "fine"];
    let tokenizer = Tokenizer::default();
    let seqs: Vec<_> = texts.iter().map(|t| tokenizer.tokenize("", t).unwrap()).collect();
    let vocab = Vocabulary::build(&seqs, 1).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ties = 0;
    for trial in 0..100u64 {
        let table = EmbeddingTable::trainable(&vocab, 4, trial).map_err(|e| e.to_string())?;
        let params = ModelParams::init(4, 3, 13, None, trial);
        let mut pool = Pool::default();
        for i in 0..rng.gen_range(30..=120) {
            let id = format!("doc-{i}");
            pool.unlabeled.insert(id.clone(), tokenizer.tokenize(&id, texts[rng.gen_range(0..texts.len())]).unwrap());
        }
        let k = rng.gen_range(1..pool.unlabeled.len());
        let mut brute: Vec<(String, f64)> = pool
            .unlabeled
            .iter()
            .map(|(id, seq)| {
                let p = forward(&params, &lookup(seq, &table, &vocab).unwrap()).unwrap();
                (id.clone(), 1.0 - p.values().iter().cloned().fold(f64::MIN, f64::max))
            })
            .collect();
        brute.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ties += usize::from(brute[k - 1].1 == brute[k].1);
        let want: Vec<String> = brute.into_iter().take(k).map(|(id, _)| id).collect();
        let strategy = SelectionStrategy { kind: StrategyKind::Uncertainty, driver_task: Task::Aspect, seed: trial };
        let scorer = ModelScorer { params: &params, table: &table, vocab: &vocab };
        let got = select_batch(&strategy, Some(scorer), &pool, k, 0, Exec::default()).map_err(|e| e.to_string())?;
        ensure(got == want, format!("pool {trial} differs"))?;
    }
    ensure(ties > 0, "no pool had a tie at the cut")?;
    Ok(format!("100 pools, {ties} with ties at the cut"))
}

/// Mean aspect F1 per checkpoint for every setting of a curves CSV.
type MeanCurves = BTreeMap<String, Vec<(usize, f64)>>;

fn mean_curves(csv: &str) -> Result<MeanCurves, String> {
    let mut out: MeanCurves = BTreeMap::new();
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        ensure(f.len() == 8, format!("bad row {line}"))?;
        if f[1] == "aspect" && f[2] == "mean" {
            let n = f[4].parse().map_err(|_| format!("bad count in {line}"))?;
            let f1 = f[7].parse().map_err(|_| format!("bad f1 in {line}"))?;
            out.entry(f[0].to_string()).or_default().push((n, f1));
        }
    }
    Ok(out)
}

/// Runs the checked-in synthetic + simulate configs through the binary.
fn run_claim_protocol() -> Result<MeanCurves, String> {
    let root = repo_root();
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = work.path().join("data");
    let configs = work.path().join("configs");
    std::fs::create_dir_all(&configs).map_err(|e| e.to_string())?;
    let synth_cfg = root.join("configs/synth.json");
    let sim_cfg = configs.join("simulate.json");
    std::fs::copy(root.join("configs/simulate.json"), &sim_cfg).map_err(|e| e.to_string())?;
    alreview(&["synth", "--spec", synth_cfg.to_str().unwrap(), "--out", data.to_str().unwrap()])?;
    let csv = alreview(&["simulate", "--config", sim_cfg.to_str().unwrap(), "--out", "-"])?;
    mean_curves(&String::from_utf8(csv).map_err(|e| e.to_string())?)
}

fn setting<'a>(curves: &'a MeanCurves, name: &str) -> Result<&'a [(usize, f64)], String> {
    curves.get(name).map(Vec::as_slice).ok_or_else(|| format!("setting {name} missing"))
}

fn fmt_curve(c: &[(usize, f64)]) -> String {
    c.iter().map(|(_, f)| format!("{f:.3}")).collect::<Vec<_>>().join(" ")
}

fn claim_uncertainty(curves: &MeanCurves) -> Outcome {
    let unc = setting(curves, "pretrained_uncertainty")?;
    let rnd = setting(curves, "pretrained_random")?;
    ensure(unc.len() == 10 && rnd.len() == 10, "expected 10 checkpoints per setting")?;
    ensure(unc.iter().map(|p| p.0).eq(rnd.iter().map(|p| p.0)), "checkpoints differ")?;
    let wins = unc.iter().zip(rnd).filter(|(u, r)| u.1 >= r.1).count();
    let budget = |c: &[(usize, f64)]| c.iter().find(|p| p.1 >= 0.80).map(|p| p.0);
    let (bu, br) = (budget(unc), budget(rnd));
    let detail = format!(
        "uncertainty >= random at {wins}/10; budget to 0.80: uncertainty {bu:?}, random {br:?}; uncertainty [{}] random [{}]",
        fmt_curve(unc),
        fmt_curve(rnd)
    );
    let budget_ok = match (bu, br) {
        (Some(u), Some(r)) => u <= r,
        (Some(_), None) => true,
        _ => false,
    };
    ensure(wins >= 7 && budget_ok, detail.clone())?;
    Ok(detail)
}

fn claim_pretrained(curves: &MeanCurves) -> Outcome {
    let pre = setting(curves, "pretrained_random")?;
    let own = setting(curves, "self_trained_random")?;
    let checked: Vec<_> = pre.iter().zip(own).filter(|(p, _)| p.0 <= 300).collect();
    ensure(!checked.is_empty(), "no checkpoint at or below 300 labels")?;
    let detail = format!(
        "{} checkpoints <= 300 labels; pretrained [{}] self-trained [{}]",
        checked.len(),
        fmt_curve(pre),
        fmt_curve(own)
    );
    ensure(checked.iter().all(|(p, o)| p.0 == o.0 && p.1 >= o.1), detail.clone())?;
    Ok(detail)
}

fn determinism() -> Outcome {
    // simulate: two runs, same bytes
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let dir = work.path();
    std::fs::write(dir.join("synth.json"), r#"{"n_samples": 300, "validation_size": 60, "seed": 4}"#).unwrap();
    alreview(&["synth", "--spec", dir.join("synth.json").to_str().unwrap(), "--out", dir.to_str().unwrap()])?;
    std::fs::write(
        dir.join("sim.json"),
        r#"{"corpus": "corpus.jsonl", "embeddings": "embeddings.txt",
            "experiment": {"seeds": [1, 2], "init_size": 20, "k": 20, "rounds": 3,
                           "hyper": {"hidden": 8, "epochs": 3, "batch_size": 8, "learning_rate": 0.03}}}"#,
    )
    .unwrap();
    let cfg = dir.join("sim.json");
    let a = alreview(&["simulate", "--config", cfg.to_str().unwrap(), "--out", "-"])?;
    let b = alreview(&["simulate", "--config", cfg.to_str().unwrap(), "--out", "-"])?;
    ensure(a == b, "simulate output differs between runs")?;
    ensure(a.len() > 200, "simulate produced almost nothing")?;

    // service: reopening the store gives the same queue and metrics
    let store_dir = dir.join("store");
    std::fs::create_dir_all(&store_dir).unwrap();
    std::fs::copy(dir.join("embeddings.txt"), store_dir.join("embeddings.txt")).unwrap();
    let cfg = ServiceConfig {
        hyper: Hyperparams { hidden: 8, epochs: 3, batch_size: 8, learning_rate: 0.03, seed: 2, ..Default::default() },
        embedding: EmbeddingSource::Pretrained { file: "embeddings.txt".into() },
        ..Default::default()
    };
    let corpus = generate_synthetic_corpus(&SyntheticSpec { n_samples: 160, validation_size: 40, seed: 8, ..Default::default() })
        .map_err(|e| e.to_string())?;
    let rows: Vec<_> = corpus
        .rows
        .into_iter()
        .enumerate()
        .map(|(i, mut r)| {
            if r.split() == Split::Train && i >= 30 {
                (r.aspects, r.sentiment, r.split) = (None, None, None);
            }
            r
        })
        .collect();
    let mut body = Vec::new();
    write_jsonl(&mut body, &rows).map_err(|e| e.to_string())?;
    let open = || -> Result<Arc<ServiceState>, String> {
        let store = Store::open_or_init(&store_dir, Some(&cfg)).map_err(|e| e.to_string())?;
        ServiceState::open(store).map_err(|e| e.to_string())
    };
    let state = open()?;
    state.ingest_reader(body.as_slice()).map_err(|e| e.to_string())?;
    state.trigger_retrain().map_err(|e| e.to_string())?;
    ensure(state.wait_for_training().error.is_none(), "retrain failed")?;
    let queue = state.queue_next(15, "acceptance").map_err(|e| e.to_string())?;
    let metrics = state.get_metrics().map_err(|e| e.to_string())?;
    drop(state);
    let reopened = open()?;
    ensure(reopened.queue_next(15, "acceptance").map_err(|e| e.to_string())? == queue, "queue order changed on reload")?;
    ensure(reopened.get_metrics().map_err(|e| e.to_string())? == metrics, "metrics changed on reload")?;
    ensure(!queue.fallback_random, "queue should be model-ranked after a retrain")?;
    Ok(format!("simulate CSV {} bytes identical twice; store reload kept {} queued tasks and metrics", a.len(), queue.tasks.len()))
}

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
    })
}

fn main() {
    let mut results: Vec<(&str, Outcome)> = vec![
        ("gradient correctness", guarded(gradient_correctness)),
        ("loss analytics", guarded(loss_analytics)),
        ("metrics oracle", guarded(metrics_oracle)),
        ("selection oracle", guarded(selection_oracle)),
    ];
    let start = Instant::now();
    match catch_unwind(run_claim_protocol).unwrap_or_else(|_| Err("learning-curve run panicked".into())) {
        Ok(curves) => {
            let secs = start.elapsed().as_secs_f64();
            let timed = |o: Outcome| o.map(|d| format!("{d} ({secs:.0}s run)"));
            results.push(("uncertainty beats random", timed(guarded(|| claim_uncertainty(&curves)))));
            results.push(("pretrained beats self-trained", timed(guarded(|| claim_pretrained(&curves)))));
        }
        Err(e) => {
            results.push(("uncertainty beats random", Err(e.clone())));
            results.push(("pretrained beats self-trained", Err(e)));
        }
    }
    results.push(("determinism", guarded(determinism)));

    let mut failed = 0;
    for (name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
