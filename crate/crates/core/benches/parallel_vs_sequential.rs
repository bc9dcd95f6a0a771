use alreview_core::active_loop::*;
use alreview_core::embeddings::{Tokenizer, Vocabulary};
use alreview_core::par::Exec;
use alreview_core::seqmodel::{Hyperparams, ModelParams};
use alreview_core::taxonomy::Task;
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn scoring(c: &mut Criterion) {
    let corpus = generate_synthetic_corpus(&SyntheticSpec { n_samples: 1000, validation_size: 0, ..Default::default() }).unwrap();
    let pool = Pool::simulated(&corpus.rows, &corpus.taxonomy, &Tokenizer::default()).unwrap();
    let vocab = Vocabulary::build(pool.training_texts(), 1).unwrap();
    let table = corpus.embeddings.to_table(&vocab, 1);
    let params = ModelParams::init(table.dim(), 64, 13, None, 1);
    let strategy = SelectionStrategy { kind: StrategyKind::Uncertainty, driver_task: Task::Aspect, seed: 1 };

    let mut group = c.benchmark_group("score_pool");
    for exec in [Exec::Sequential, Exec::Parallel] {
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &exec, |b, &exec| {
            b.iter(|| {
                let scorer = ModelScorer { params: &params, table: &table, vocab: &vocab };
                select_batch(&strategy, Some(scorer), &pool, 50, 0, exec).unwrap()
            })
        });
    }
    group.finish();
}

fn experiment_arms(c: &mut Criterion) {
    let corpus = generate_synthetic_corpus(&SyntheticSpec { n_samples: 300, validation_size: 60, ..Default::default() }).unwrap();
    let data = ExperimentData { taxonomy: corpus.taxonomy, rows: corpus.rows, pretrained: Some(corpus.embeddings) };
    let hyper = Hyperparams { hidden: 8, epochs: 3, batch_size: 8, learning_rate: 0.03, ..Default::default() };

    let mut group = c.benchmark_group("experiment_arms");
    group.sample_size(10);
    for exec in [Exec::Sequential, Exec::Parallel] {
        let config = ExperimentConfig { seeds: vec![1, 2], init_size: 20, k: 20, rounds: 2, hyper: hyper.clone(), exec, ..Default::default() };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &config, |b, config| {
            b.iter(|| run_experiment(config, &data).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, scoring, experiment_arms);
criterion_main!(benches);
