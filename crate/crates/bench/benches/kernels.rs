use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use semzsl_core::datasets::{synth_dataset, SynthConfig};
use semzsl_core::embed_zsl::{train_embed, EmbedClassifier, EmbedConfig};
use semzsl_core::evaluation::{borda_count, evaluate_run, harmonic_mean};
use semzsl_core::fusion::FusionParams;
use semzsl_core::gen_zsl::{gradient_penalty, synthesize, train_gan, Discriminator, GanConfig, SoftmaxConfig};
use semzsl_core::{Averaging, EvalReport, Mode, Variation, WordVectorTable};

fn word_vectors(c: &mut Criterion) {
    let mut text = String::new();
    for i in 0..2000 {
        text.push_str(&format!("w{i}"));
        for j in 0..300 {
            text.push_str(&format!(" {}", ((i * 31 + j * 7) % 97) as f64 / 97.0));
        }
        text.push('\n');
    }
    c.bench_function("wordvec/load_2000x300", |b| {
        b.iter(|| WordVectorTable::from_reader(black_box(text.as_bytes())).unwrap())
    });
    let table = WordVectorTable::from_reader(text.as_bytes()).unwrap();
    let desc = (0..120)
        .map(|i| format!("w{}", i * 13 % 2000))
        .collect::<Vec<_>>()
        .join(" ");
    c.bench_function("wordvec/embed_text_120_tokens", |b| {
        b.iter(|| table.embed_text(black_box(&desc)).unwrap())
    });
}

fn fusion(c: &mut Criterion) {
    let mut group = c.benchmark_group("fusion/fuse");
    for d in [16, 300] {
        let f = FusionParams::init(d, 0, 0.5).unwrap();
        let ec: Vec<f64> = (0..d).map(|i| (i as f64).sin()).collect();
        let ep: Vec<f64> = (0..d).map(|i| (i as f64).cos()).collect();
        group.bench_with_input(BenchmarkId::from_parameter(d), &d, |b, _| {
            b.iter(|| f.fuse(black_box(&ec), black_box(&ep)).unwrap())
        });
    }
    group.finish();
}

fn embedding(c: &mut Criterion) {
    let data = synth_dataset(&SynthConfig::default()).unwrap();
    let cfg = EmbedConfig {
        epochs: 1,
        lr: 0.01,
        freeze_features: true,
        ..EmbedConfig::default()
    };
    c.bench_function("embed/train_one_epoch_420x32", |b| {
        b.iter(|| train_embed(&data.train, &data.semantics, black_box(&cfg)).unwrap())
    });
    let trained = train_embed(&data.train, &data.semantics, &cfg).unwrap();
    let clf = EmbedClassifier::new(trained.model, trained.fusion, &data.semantics).unwrap();
    c.bench_function("embed/evaluate_gzsl_400", |b| {
        b.iter(|| evaluate_run(&clf, &data.test, &data.semantics, Mode::Gzsl, Averaging::PerClass).unwrap())
    });
}

fn generative(c: &mut Criterion) {
    let data = synth_dataset(&SynthConfig::default()).unwrap();
    let cfg = GanConfig {
        steps: 1,
        pretrain: SoftmaxConfig {
            epochs: 1,
            ..SoftmaxConfig::default()
        },
        ..GanConfig::default()
    };
    c.bench_function("gen/pretrain_plus_one_wgan_step", |b| {
        b.iter(|| train_gan(&data.train, &data.semantics, black_box(&cfg)).unwrap())
    });

    let critic = Discriminator::linear(&[0.5; 32], &[0.1; 16]).unwrap();
    let zr = vec![0.3; 32];
    let zf = vec![-0.2; 32];
    let e = vec![0.05; 16];
    c.bench_function("gen/gradient_penalty_linear", |b| {
        b.iter(|| gradient_penalty(&critic, black_box(&zr), black_box(&zf), &e, 0.4).unwrap())
    });

    let gan = train_gan(&data.train, &data.semantics, &cfg).unwrap();
    let bundle = data.semantics.iter().last().unwrap();
    c.bench_function("gen/synthesize_200", |b| {
        b.iter(|| synthesize(&gan.generator, &gan.fusion, bundle, black_box(200), 7).unwrap())
    });
}

fn metrics(c: &mut Criterion) {
    let reports: Vec<EvalReport> = Variation::ALL
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            EvalReport::new(v, Averaging::PerClass)
                .with_acc(40.0 + i as f64)
                .with_gzsl(70.0 - i as f64, 20.0 + 2.0 * i as f64)
        })
        .collect();
    c.bench_function("eval/borda_count_3", |b| {
        b.iter(|| borda_count(black_box(&reports)).unwrap())
    });
    c.bench_function("eval/harmonic_mean", |b| {
        b.iter(|| harmonic_mean(black_box(89.48), black_box(14.2)))
    });
}

criterion_group!(benches, word_vectors, fusion, embedding, generative, metrics);
criterion_main!(benches);
