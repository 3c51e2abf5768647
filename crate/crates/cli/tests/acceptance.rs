//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use conceptvec::corpus::{
    is_concept_token, normalize_document, parse_pubtator, resolve_overlaps, write_pubtator, ErrorPolicy,
};
use conceptvec::downstream::{
    auc, evaluate_ddi, mean_loss, run_ddi, run_ppi, softmax, DdiLabel, Mlp, MlpHyper, SplitSpec, write_ddi, write_pairs,
};
use conceptvec::embedding::{Embedding, EmbeddingError};
use conceptvec::intrinsic::{group_similarity_difference, GroupDataset, NormalizedPairTable};
use conceptvec::synth::{
    cluster_groups, cluster_pairs, cluster_separation, planted_ddi, planted_ppi, pubtator_fixture, shuffle_labels,
    synthetic_pubtator, synthetic_pubtator_clusters, toy_intrinsic, two_cluster_corpus,
};
use conceptvec::train::{
    build_cooccurrence, export, glove_weight, initial_fasttext_matrix, sgns_step, softplus, train, train_fasttext_variant,
    train_glove, CoocMatrix, FastTextConfig, GloveConfig, ModelKind, SubwordIndex, TrainingConfig,
};
use conceptvec::vocab::{keep_probability_for_frequency, NegativeTable, Vocabulary, DEFAULT_TABLE_SIZE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64, what: &str) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || format!("{what} took {:.2}s, limit {limit_s}s", elapsed.as_secs_f64()))
}

fn pubtator_round_trip() -> Outcome {
    let start = Instant::now();
    let (docs, report) = parse_pubtator(pubtator_fixture().as_bytes(), ErrorPolicy::Abort).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    write_pubtator(&mut out, &docs).map_err(|e| e.to_string())?;
    let (again, _) = parse_pubtator(out.as_slice(), ErrorPolicy::Abort).map_err(|e| e.to_string())?;
    within(start.elapsed(), 1.0, "round trip")?;
    ensure(again == docs, || "re-parsed documents differ".into())?;
    ensure(docs.len() == 5, || format!("{} documents", docs.len()))?;
    let counts = (report.annotations_kept, report.dropped_offset_mismatch, report.dropped_missing_id, report.multi_id_truncated);
    ensure(counts == (19, 1, 2, 1), || format!("counts (kept, offset, missing id, multi id) = {counts:?}"))?;
    Ok(format!("5 docs, kept 19, dropped offset 1 / id 2, {:.1} ms", start.elapsed().as_secs_f64() * 1e3))
}

fn normalization_conservation() -> Outcome {
    let (docs, _) = parse_pubtator(pubtator_fixture().as_bytes(), ErrorPolicy::Abort).map_err(|e| e.to_string())?;
    let mut total = 0;
    for (doc, anns) in &docs {
        let norm = normalize_document(doc, anns);
        let survivors = resolve_overlaps(anns);
        ensure(survivors.windows(2).all(|w| w[0].end <= w[1].start), || format!("{}: survivors overlap", doc.doc_id))?;
        // equal sequences give both multiset equality and preserved order
        let expected: Vec<String> = survivors.iter().map(|a| a.token()).collect();
        let got: Vec<String> = norm.tokens.iter().filter(|t| is_concept_token(t)).cloned().collect();
        ensure(got == expected, || format!("{}: {got:?} vs {expected:?}", doc.doc_id))?;
        total += got.len();
    }
    Ok(format!("{total} concept tokens in order across {} documents", docs.len()))
}

fn sampling_statistics() -> Outcome {
    let t = 1e-3;
    let boundary = [
        keep_probability_for_frequency(t, t),
        keep_probability_for_frequency(t / 2.0, t),
        keep_probability_for_frequency(4.0 * t, t),
    ];
    ensure(boundary == [1.0, 1.0, 0.5], || format!("keep probabilities {boundary:?}"))?;

    let mut doc = Vec::new();
    for (i, count) in [1000usize, 500, 250, 125, 60, 30, 15, 8, 4, 2].iter().enumerate() {
        doc.extend(std::iter::repeat_n(format!("w{i}"), *count));
    }
    let vocab = Vocabulary::build(&[doc], 1).map_err(|e| e.to_string())?;
    let table = NegativeTable::new(&vocab, DEFAULT_TABLE_SIZE);
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let n = 1_000_000u32;
    let mut hits = vec![0u64; vocab.len()];
    for _ in 0..n {
        hits[table.sample(&mut rng) as usize] += 1;
    }
    let z: f64 = (0..vocab.len()).map(|i| (vocab.count(i) as f64).powf(0.75)).sum();
    let mut worst_rel = 0.0f64;
    let mut worst_sigma = 0.0f64;
    for (i, &h) in hits.iter().enumerate() {
        let p = (vocab.count(i) as f64).powf(0.75) / z;
        let expected = p * n as f64;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        worst_rel = worst_rel.max((h as f64 - expected).abs() / expected);
        worst_sigma = worst_sigma.max((h as f64 - expected).abs() / sigma);
    }
    ensure(worst_rel <= 0.05, || format!("worst relative deviation {worst_rel:.4}"))?;
    ensure(worst_sigma <= 3.0, || format!("worst deviation {worst_sigma:.2}σ"))?;
    Ok(format!("boundaries exact; 1e6 draws: max rel dev {:.4}, max {:.2}σ", worst_rel, worst_sigma))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sgns_gradient_audit() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (h, lr) = (1e-5, 0.01);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let dim = rng.random_range(1..=8);
        let k = rng.random_range(1..=5);
        let params: Vec<Vec<f64>> = (0..k + 2).map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let loss = |ps: &[Vec<f64>]| softplus(-dot(&ps[0], &ps[1])) + ps[2..].iter().map(|n| softplus(dot(&ps[0], n))).sum::<f64>();
        let (mut u, mut p) = (params[0].clone(), params[1].clone());
        let mut negs = params[2..].to_vec();
        let mut refs: Vec<&mut [f64]> = negs.iter_mut().map(|n| n.as_mut_slice()).collect();
        sgns_step(&mut u, &mut p, &mut refs, lr);
        let after = [vec![u, p], negs].concat();
        for v in 0..params.len() {
            for i in 0..dim {
                let (mut plus, mut minus) = (params.clone(), params.clone());
                plus[v][i] += h;
                minus[v][i] -= h;
                let numeric = (loss(&plus) - loss(&minus)) / (2.0 * h);
                let analytic = (params[v][i] - after[v][i]) / lr;
                worst = worst.max((analytic - numeric).abs() / numeric.abs().max(1e-8));
            }
        }
    }
    ensure(worst < 1e-5, || format!("worst relative error {worst:e}"))?;
    Ok(format!("100 instances, worst relative error {worst:.2e}"))
}

fn trainer_sanity() -> Outcome {
    let corpus = two_cluster_corpus(100_000, 11);
    let mut lines = Vec::new();
    for model in [ModelKind::Cbow, ModelKind::SkipGram, ModelKind::FastTextVariant] {
        for workers in [1usize, 4] {
            let cfg = TrainingConfig { dimension: 50, model, workers, ..Default::default() };
            let start = Instant::now();
            let vocab = Vocabulary::build(&corpus.documents, cfg.min_count).map_err(|e| e.to_string())?;
            let (matrix, report) = train(&corpus.documents, &vocab, &cfg, &FastTextConfig::default(), &GloveConfig::default())
                .map_err(|e| format!("{model} w{workers}: {e}"))?;
            let elapsed = start.elapsed();
            if workers == 1 {
                within(elapsed, 60.0, &format!("{model} single-worker"))?;
            }
            ensure(report.epoch_losses.len() == 10 && report.epoch_losses.iter().all(|l| l.is_finite()), || {
                format!("{model} w{workers}: epoch losses {:?}", report.epoch_losses)
            })?;
            ensure(matrix.all_finite(), || format!("{model} w{workers}: non-finite weights"))?;
            let emb = export(&matrix, &vocab, false).map_err(|e| e.to_string())?;
            let margin = cluster_separation(&emb, &corpus.clusters);
            ensure(margin >= 0.3, || format!("{model} w{workers}: margin {margin:.4} < 0.3"))?;
            lines.push(format!("{model}/w{workers} {margin:.3} ({:.1}s)", elapsed.as_secs_f64()));
        }
    }
    Ok(format!("margins {}", lines.join(", ")))
}

fn fasttext_suppression() -> Outcome {
    let corpus = two_cluster_corpus(100_000, 11);
    let cfg = TrainingConfig { dimension: 50, epochs: 2, model: ModelKind::FastTextVariant, ..Default::default() };
    let ft = FastTextConfig::default();
    let vocab = Vocabulary::build(&corpus.documents, cfg.min_count).map_err(|e| e.to_string())?;
    let before = initial_fasttext_matrix(&vocab, &cfg, &ft);
    let (after, _) = train_fasttext_variant(&corpus.documents, &vocab, &cfg, &ft).map_err(|e| e.to_string())?;
    let index = SubwordIndex::build(&vocab, &ft);
    let concepts: Vec<usize> = (0..vocab.len()).filter(|&i| vocab.is_concept(i)).collect();
    ensure(!concepts.is_empty(), || "no concept tokens in the corpus".into())?;
    for &i in &concepts {
        ensure(index.buckets(i).is_empty(), || format!("{} has subword buckets", vocab.token(i)))?;
        ensure(after.representation(i) == after.input_row(i), || format!("{} representation differs from its row", vocab.token(i)))?;
    }
    let word_buckets: BTreeSet<u32> =
        (0..vocab.len()).filter(|&i| !vocab.is_concept(i)).flat_map(|i| index.buckets(i).to_vec()).collect();
    let dim = cfg.dimension;
    let (b0, b1) = (&before.subwords.as_ref().unwrap().vectors, &after.subwords.as_ref().unwrap().vectors);
    let mut untouched = 0usize;
    for b in (0..ft.bucket_count).filter(|b| !word_buckets.contains(&(*b as u32))) {
        ensure(b0[b * dim..(b + 1) * dim] == b1[b * dim..(b + 1) * dim], || format!("bucket {b} moved"))?;
        untouched += 1;
    }
    Ok(format!("{} concept tokens exact; {untouched} non-word buckets at initialization", concepts.len()))
}

fn glove_checks() -> Outcome {
    let (x_max, alpha) = (100.0, 0.75);
    let f = [glove_weight(x_max, x_max, alpha), glove_weight(2.0 * x_max, x_max, alpha), glove_weight(0.0, x_max, alpha)];
    ensure(f == [1.0, 1.0, 0.0], || format!("f boundary values {f:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut map = std::collections::HashMap::new();
    for i in 0..10u32 {
        for j in 0..10u32 {
            if i != j && rng.random_bool(0.6) {
                map.insert((i, j), rng.random_range(0.5..150.0));
            }
        }
    }
    let cooc = CoocMatrix::from_map(10, map);
    let cfg = TrainingConfig { dimension: 5, epochs: 50, model: ModelKind::Glove, ..Default::default() };
    let (_, report) =
        train_glove(&cooc, &cfg, &GloveConfig { initial_step: 0.01, ..Default::default() }).map_err(|e| e.to_string())?;
    let worst_rise = report.epoch_losses.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    ensure(report.epoch_losses.len() == 50 && worst_rise <= 1e-9, || format!("loss rose by {worst_rise:e}"))?;

    let cases: [(&[&str], usize, f64); 3] = [(&["a b"], 5, 1.0), (&["a x b"], 5, 0.5), (&["a b"; 10], 1, 10.0)];
    for (text, window, expected) in cases {
        let docs: Vec<Vec<String>> = text.iter().map(|l| l.split(' ').map(str::to_string).collect()).collect();
        let vocab = Vocabulary::build(&docs, 1).map_err(|e| e.to_string())?;
        let m = build_cooccurrence(&docs, &vocab, window, 1);
        let (a, b) = (vocab.get("a").unwrap() as u32, vocab.get("b").unwrap() as u32);
        ensure(m.get(a, b) == Some(expected) && m.get(b, a) == Some(expected), || {
            format!("{text:?} w{window}: X(a,b) = {:?}, expected {expected}", m.get(a, b))
        })?;
    }
    Ok(format!(
        "f boundaries exact; loss {:.4} -> {:.4} over 50 epochs; 3 micro-corpora exact",
        report.epoch_losses[0],
        report.epoch_losses[49]
    ))
}

fn embedding_io() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, dim) = (300, 17);
    let tokens: Vec<String> = (0..n).map(|i| format!("Gene_{i}")).collect();
    let values: Vec<f32> = (0..n * dim).map(|_| rng.random_range(-1e3f32..1e3) * 10f32.powi(rng.random_range(-6..3))).collect();
    let emb = Embedding::new(tokens, values, dim).map_err(|e| e.to_string())?;
    let mut text = Vec::new();
    emb.write_text(&mut text).map_err(|e| e.to_string())?;
    let loaded = Embedding::read_text(text.as_slice()).map_err(|e| e.to_string())?;
    let mut worst = 0.0f32;
    for i in 0..n {
        for (a, b) in emb.row(i).iter().zip(loaded.row(i)) {
            worst = worst.max((a - b).abs());
        }
    }
    ensure(worst < 1e-5, || format!("component error {worst:e}"))?;
    let mut again = Vec::new();
    loaded.write_text(&mut again).map_err(|e| e.to_string())?;
    let reloaded = Embedding::read_text(again.as_slice()).map_err(|e| e.to_string())?;
    ensure(reloaded == loaded && again == text, || "load∘save∘load is not a fixpoint".into())?;

    let cases: [(&str, usize); 6] = [
        ("2 x\n", 1),
        ("2 2\na 1 2\nb 1\n", 3),
        ("2 2\na 1 oops\nb 1 2\n", 2),
        ("2 2\na 1 2\n", 3),
        ("1 2\na 1 2\nb 1 2\n", 3),
        ("2 2\na 1 2\na 3 4\n", 3),
    ];
    for (text, line) in cases {
        let got = match Embedding::read_text(text.as_bytes()) {
            Err(EmbeddingError::Format { line, .. }) | Err(EmbeddingError::DuplicateToken { line, .. }) => Some(line),
            _ => None,
        };
        ensure(got == Some(line), || format!("{text:?}: error line {got:?}, expected {line}"))?;
    }
    Ok(format!("max component error {worst:.1e}; fixpoint exact; 6 malformed cases"))
}

/// Brute-force group similarity difference.
fn intrinsic_oracle(dataset: &GroupDataset, emb: &Embedding) -> f64 {
    let key = |a: &str, b: &str| if a <= b { (a.to_string(), b.to_string()) } else { (b.to_string(), a.to_string()) };
    let v = |t: &str| emb.vector(t).unwrap().iter().map(|&x| x as f64).collect::<Vec<_>>();
    let mut raw = std::collections::BTreeMap::new();
    for g in &dataset.groups {
        for set in [&g.related, &g.unrelated] {
            for i in 0..set.len() {
                for j in i + 1..set.len() {
                    let (a, b) = (v(&set[i]), v(&set[j]));
                    raw.insert(key(&set[i], &set[j]), dot(&a, &b) / (dot(&a, &a).sqrt() * dot(&b, &b).sqrt()));
                }
            }
        }
    }
    let n = raw.len() as f64;
    let mean = raw.values().sum::<f64>() / n;
    let sd = (raw.values().map(|c| (c - mean).powi(2)).sum::<f64>() / n).sqrt();
    let z: Vec<f64> = raw.values().map(|c| (c - mean) / sd).collect();
    let (lo, hi) = z.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    let norm: std::collections::BTreeMap<_, f64> = raw.keys().cloned().zip(z.iter().map(|x| (x - lo) / (hi - lo))).collect();
    let sim = |set: &[String]| {
        let mut vals = Vec::new();
        for i in 0..set.len() {
            for j in i + 1..set.len() {
                vals.push(norm[&key(&set[i], &set[j])]);
            }
        }
        vals.iter().sum::<f64>() / vals.len() as f64
    };
    dataset.groups.iter().map(|g| 100.0 * (sim(&g.related) - sim(&g.unrelated))).sum::<f64>() / dataset.groups.len() as f64
}

fn intrinsic_oracle_check() -> Outcome {
    let (emb, data) = toy_intrinsic();
    let metric = group_similarity_difference(&data, &emb).map_err(|e| e.to_string())?.metric;
    let oracle = intrinsic_oracle(&data, &emb);
    ensure((metric - oracle).abs() < 1e-9, || format!("metric {metric} vs oracle {oracle}"))?;

    let flat: std::collections::BTreeMap<(String, String), f64> =
        [(("a".into(), "b".into()), 0.3), (("a".into(), "c".into()), 0.3)].into_iter().collect();
    let table = NormalizedPairTable::from_raw(flat);
    ensure(table.get("a", "b") == Some(0.5) && table.get("c", "a") == Some(0.5), || "degenerate spread is not 0.5".into())?;
    let single: std::collections::BTreeMap<(String, String), f64> = [(("a".into(), "b".into()), 0.9)].into_iter().collect();
    ensure(NormalizedPairTable::from_raw(single).get("a", "b") == Some(0.5), || "single pair is not 0.5".into())?;

    // independent power-of-two factor per vector keeps f32 storage exact
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let values: Vec<f32> = (0..emb.len())
            .flat_map(|i| {
                let s = 2f32.powi(rng.random_range(-20..20));
                emb.row(i).iter().map(move |x| x * s).collect::<Vec<_>>()
            })
            .collect();
        let scaled = Embedding::new(emb.tokens().to_vec(), values, emb.dim()).map_err(|e| e.to_string())?;
        let m = group_similarity_difference(&data, &scaled).map_err(|e| e.to_string())?.metric;
        worst = worst.max((m - metric).abs());
    }
    ensure(worst < 1e-12, || format!("rescaling moved the metric by {worst:e}"))?;
    Ok(format!("metric {metric:.9} = oracle within {:.1e}; degenerate 0.5; rescaling drift {worst:.1e}", (metric - oracle).abs()))
}

fn mlp_gradient_audit() -> Outcome {
    let mut worst = 0.0f64;
    let mut coords = 0usize;
    for (sizes, classes, seed) in [(vec![8usize, 12, 6, 5], 5usize, 1u64), (vec![8, 12, 6, 1], 2, 2)] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mlp = Mlp::new(&sizes, seed).map_err(|e| e.to_string())?;
        let batch: Vec<_> = (0..10)
            .map(|_| conceptvec::downstream::Sample {
                x: (0..sizes[0]).map(|_| rng.random_range(-1.0..1.0)).collect(),
                label: rng.random_range(0..classes),
            })
            .collect();
        let mut gw: Vec<Vec<f64>> = mlp.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        for s in &batch {
            let (_, g) = mlp.backward(&s.x, s.label).map_err(|e| e.to_string())?;
            for (acc, gl) in gw.iter_mut().zip(&g.weights) {
                acc.iter_mut().zip(gl).for_each(|(a, g)| *a += g / batch.len() as f64);
            }
        }
        let h = 1e-6;
        for layer in 0..mlp.weights.len() {
            for _ in 0..20 {
                let k = rng.random_range(0..mlp.weights[layer].len());
                let (mut plus, mut minus) = (mlp.clone(), mlp.clone());
                plus.weights[layer][k] += h;
                minus.weights[layer][k] -= h;
                let lp = mean_loss(&plus, &batch, None).map_err(|e| e.to_string())?;
                let lm = mean_loss(&minus, &batch, None).map_err(|e| e.to_string())?;
                let numeric = (lp - lm) / (2.0 * h);
                let analytic = gw[layer][k];
                worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8));
                coords += 1;
            }
        }
    }
    ensure(worst < 1e-4, || format!("worst relative error {worst:e}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst_sum = 0.0f64;
    for _ in 0..1000 {
        let logits: Vec<f64> = (0..5).map(|_| rng.random_range(-50.0..50.0)).collect();
        worst_sum = worst_sum.max((softmax(&logits).iter().sum::<f64>() - 1.0).abs());
    }
    ensure(worst_sum < 1e-12, || format!("softmax row sum off by {worst_sum:e}"))?;
    Ok(format!("{coords} coordinates, worst relative error {worst:.1e}; softmax rows within {worst_sum:.1e}"))
}

fn auc_oracle_check() -> Outcome {
    let brute = |scores: &[f64], labels: &[bool]| {
        let (mut twice, mut pairs) = (0u64, 0u64);
        for (i, &si) in scores.iter().enumerate().filter(|(i, _)| labels[*i]) {
            let _ = i;
            for (_, &sj) in scores.iter().enumerate().filter(|(j, _)| !labels[*j]) {
                twice += if si > sj { 2 } else if si == sj { 1 } else { 0 };
                pairs += 1;
            }
        }
        twice as f64 / (2 * pairs) as f64
    };
    let hand = auc(&[0.9, 0.8, 0.4, 0.5, 0.3, 0.2], &[true, true, true, false, false, false]).map_err(|e| e.to_string())?;
    ensure(hand == 8.0 / 9.0, || format!("hand case {hand}"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for d in 0..50 {
        let n = rng.random_range(2..=2000);
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        labels[0] = true;
        labels[1] = false;
        let levels = rng.random_range(2..50);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
        let (got, want) = (auc(&scores, &labels).map_err(|e| e.to_string())?, brute(&scores, &labels));
        ensure(got == want, || format!("dataset {d}: {got} vs {want}"))?;
    }
    Ok("hand case 8/9 exact; 50 tied datasets exact".into())
}

fn ppi_planted() -> Outcome {
    let start = Instant::now();
    let (emb, pairs) = planted_ppi(400, 10, 32, 4000, 0.5, 21);
    let positives = pairs.iter().filter(|p| p.label).count();
    let hyper = MlpHyper::default();
    let report = run_ppi(&pairs, &emb, &SplitSpec::default(), &hyper, 1).map_err(|e| e.to_string())?;
    let shuffled = shuffle_labels(&pairs, 77);
    let control = run_ppi(&shuffled, &emb, &SplitSpec::default(), &hyper, 1).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let (a, c) = (report.metrics.auc.unwrap_or(f64::NAN), control.metrics.auc.unwrap_or(f64::NAN));
    ensure(a >= 0.95, || format!("planted AUC {a:.4} < 0.95"))?;
    ensure((0.45..=0.55).contains(&c), || format!("shuffled AUC {c:.4} outside [0.45, 0.55]"))?;
    within(elapsed, 120.0, "PPI")?;
    Ok(format!(
        "AUC {a:.4} ({positives}/{} positive), shuffled {c:.4}, {:.1}s",
        pairs.len(),
        elapsed.as_secs_f64()
    ))
}

fn ddi_protocol() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let n = rng.random_range(1..100);
        let draw = |rng: &mut ChaCha8Rng| DdiLabel::from_index(rng.random_range(0..5)).unwrap();
        let p: Vec<DdiLabel> = (0..n).map(|_| draw(&mut rng)).collect();
        let g: Vec<DdiLabel> = (0..n).map(|_| draw(&mut rng)).collect();
        let m = evaluate_ddi(&p, &g).map_err(|e| e.to_string())?;
        let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
        for c in DdiLabel::POSITIVE {
            tp += p.iter().zip(&g).filter(|(a, b)| **a == c && **b == c).count();
            fp += p.iter().zip(&g).filter(|(a, b)| **a == c && **b != c).count();
            fn_ += p.iter().zip(&g).filter(|(a, b)| **a != c && **b == c).count();
        }
        let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        ensure(m.micro.precision == precision && m.micro.recall == recall, || "micro scores differ from the oracle".into())?;
    }
    // only negatives, all correct: nothing to score
    let neg = vec![DdiLabel::Negative; 10];
    let m = evaluate_ddi(&neg, &neg).map_err(|e| e.to_string())?;
    ensure(m.micro.f1 == 0.0 && m.micro.precision == 0.0, || "all-negative case is not 0".into())?;
    // correctly rejected negatives never change the score
    let (mut p, mut g) = (vec![DdiLabel::Advice, DdiLabel::Effect], vec![DdiLabel::Advice, DdiLabel::Mechanism]);
    let base = evaluate_ddi(&p, &g).map_err(|e| e.to_string())?;
    p.extend([DdiLabel::Negative; 7]);
    g.extend([DdiLabel::Negative; 7]);
    ensure(evaluate_ddi(&p, &g).map_err(|e| e.to_string())? == base, || "negatives changed the score".into())?;

    let (emb, train, test) = planted_ddi(1000, 500, 32, 3);
    let report = run_ddi(&train, &test, &emb, &MlpHyper::default(), &[1, 2, 3, 4, 5], false).map_err(|e| e.to_string())?;
    ensure(report.mean_micro.f1 >= 0.95, || format!("mean micro F1 {:.4} < 0.95", report.mean_micro.f1))?;
    let same = run_ddi(&train, &test, &emb, &MlpHyper::default(), &[7, 7, 7], false).map_err(|e| e.to_string())?;
    ensure(same.micro_f1_std == 0.0, || format!("identical seeds give std {}", same.micro_f1_std))?;
    Ok(format!(
        "oracle exact on 200 cases; planted micro F1 {:.4} ± {:.4} over 5 seeds; identical seeds std 0",
        report.mean_micro.f1, report.micro_f1_std
    ))
}

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_conceptvec"));
    c.arg("--quiet");
    c
}

fn cli(args: &[&str]) -> Result<String, String> {
    let out = bin().args(args).output().map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(String::from_utf8_lossy(&out.stdout).into_owned())
    } else {
        Err(format!("{:?} exited {:?}: {}", args.first(), out.status.code(), String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn read_manifest(path: &Path) -> Result<Value, String> {
    let mut name = path.as_os_str().to_owned();
    name.push(".manifest.json");
    let text = std::fs::read_to_string(PathBuf::from(&name)).map_err(|e| format!("{}: {e}", PathBuf::from(&name).display()))?;
    serde_json::from_str(&text).map_err(|e| e.to_string())
}

fn embedding_comparison() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (emb, pairs) = planted_ppi(120, 6, 16, 500, 0.5, 31);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let other_values: Vec<f32> = (0..emb.len() * emb.dim()).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    let other = Embedding::new(emb.tokens().to_vec(), other_values, emb.dim()).map_err(|e| e.to_string())?;
    let (e1, e2, pp) = (dir.path().join("a.txt"), dir.path().join("b.txt"), dir.path().join("pairs.tsv"));
    emb.save_text(&e1).map_err(|e| e.to_string())?;
    other.save_text(&e2).map_err(|e| e.to_string())?;
    write_pairs(std::fs::File::create(&pp).map_err(|e| e.to_string())?, &pairs).map_err(|e| e.to_string())?;
    let small = ["--hidden", "32,16", "--max-epochs", "10"];
    let mut fingerprints = Vec::new();
    for (i, e) in [&e1, &e2].iter().enumerate() {
        let out = dir.path().join(format!("ppi{i}.json"));
        cli(&[&["eval-ppi", "-e", s(e), "--pairs", s(&pp), "--seed", "5", "-o", s(&out)][..], &small].concat())?;
        let r = &read_manifest(&out)?["results"];
        fingerprints.push((r["split_fingerprint"].clone(), r["init_fingerprint"].clone()));
    }
    ensure(fingerprints[0] == fingerprints[1], || format!("PPI fingerprints differ: {fingerprints:?}"))?;

    let (demb, train, test) = planted_ddi(200, 100, 16, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let dother = Embedding::new(
        demb.tokens().to_vec(),
        (0..demb.len() * demb.dim()).map(|_| rng.random_range(-1.0f32..1.0)).collect(),
        demb.dim(),
    )
    .map_err(|e| e.to_string())?;
    let (d1, d2, tr, te) =
        (dir.path().join("d1.txt"), dir.path().join("d2.txt"), dir.path().join("train.jsonl"), dir.path().join("test.jsonl"));
    demb.save_text(&d1).map_err(|e| e.to_string())?;
    dother.save_text(&d2).map_err(|e| e.to_string())?;
    write_ddi(std::fs::File::create(&tr).map_err(|e| e.to_string())?, &train).map_err(|e| e.to_string())?;
    write_ddi(std::fs::File::create(&te).map_err(|e| e.to_string())?, &test).map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for (i, e) in [&d1, &d2].iter().enumerate() {
        let out = dir.path().join(format!("ddi{i}.json"));
        cli(&[&["eval-ddi", "-e", s(e), "--train", s(&tr), "--test", s(&te), "--seed", "3", "--runs", "3", "--augment-concepts", "-o", s(&out)][..], &small].concat())?;
        runs.push(read_manifest(&out)?["results"]["runs"].clone());
    }
    ensure(runs[0] == runs[1], || format!("DDI fingerprints differ: {} vs {}", runs[0], runs[1]))?;
    Ok(format!("PPI split/init {} / {}; DDI 3 runs identical", fingerprints[0].0, fingerprints[0].1))
}

/// Manifest with run-specific fields (paths, timing) removed.
fn comparable(mut m: Value) -> Value {
    let obj = m.as_object_mut().expect("manifest object");
    for k in ["wall_clock_seconds", "inputs", "outputs"] {
        obj.remove(k);
    }
    m
}

fn pipeline(dir: &Path) -> Result<Vec<(String, Value, Vec<u8>)>, String> {
    let input = dir.join("abstracts.pubtator");
    std::fs::write(&input, synthetic_pubtator(400, 17)).map_err(|e| e.to_string())?;
    let clusters = synthetic_pubtator_clusters();
    let groups = dir.join("groups.jsonl");
    cluster_groups(&clusters).write_jsonl(std::fs::File::create(&groups).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let pairs = dir.join("pairs.tsv");
    write_pairs(std::fs::File::create(&pairs).map_err(|e| e.to_string())?, &cluster_pairs(&clusters)).map_err(|e| e.to_string())?;

    let corpus = dir.join("corpus.txt");
    cli(&["normalize", "-i", s(&input), "-o", s(&corpus), "--report", s(&dir.join("parse_report.txt"))])?;
    let mut products = vec![("normalize".to_string(), comparable(read_manifest(&corpus)?), std::fs::read(&corpus).map_err(|e| e.to_string())?)];
    for model in ["cbow", "skipgram", "fasttext", "glove"] {
        let emb = dir.join(format!("{model}.txt"));
        cli(&["train", "-c", s(&corpus), "-o", s(&emb), "--model", model, "--dimension", "20", "--epochs", "5", "--window", "5", "--bucket-count", "20000"])?;
        products.push((format!("train {model}"), comparable(read_manifest(&emb)?), std::fs::read(&emb).map_err(|e| e.to_string())?));
        let intrinsic = dir.join(format!("{model}.intrinsic.json"));
        cli(&["eval-intrinsic", "-e", s(&emb), "--groups", s(&groups), "-o", s(&intrinsic)])?;
        products.push((format!("intrinsic {model}"), comparable(read_manifest(&intrinsic)?), Vec::new()));
        let ppi = dir.join(format!("{model}.ppi.json"));
        cli(&["eval-ppi", "-e", s(&emb), "--pairs", s(&pairs), "-o", s(&ppi), "--hidden", "32,16"])?;
        products.push((format!("ppi {model}"), comparable(read_manifest(&ppi)?), Vec::new()));
    }
    Ok(products)
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let (a, b) = (tempfile::tempdir().map_err(|e| e.to_string())?, tempfile::tempdir().map_err(|e| e.to_string())?);
    let first = pipeline(a.path())?;
    let second = pipeline(b.path())?;
    for ((name, m1, o1), (_, m2, o2)) in first.iter().zip(&second) {
        ensure(m1 == m2, || format!("{name}: manifests differ"))?;
        ensure(o1 == o2, || format!("{name}: outputs differ"))?;
    }
    within(start.elapsed(), 300.0, "end-to-end")?;
    let mut metrics = Vec::new();
    for (name, m, _) in first.iter().filter(|(n, _, _)| n.starts_with("intrinsic")) {
        let metric = m["results"]["metric"].as_f64().unwrap_or(f64::NAN);
        ensure(metric > 0.0, || format!("{name}: clusters not separated ({metric})"))?;
        metrics.push(format!("{} {metric:.1}", name.trim_start_matches("intrinsic ")));
    }
    Ok(format!(
        "{} steps twice, identical manifests; intrinsic {}; {:.1}s",
        first.len(),
        metrics.join(", "),
        start.elapsed().as_secs_f64()
    ))
}

fn main() {
    // honour `cargo test -- --list` and filters enough to stay quiet
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [(&str, fn() -> Outcome); 15] = [
        ("pubtator round-trip", pubtator_round_trip),
        ("normalization conservation", normalization_conservation),
        ("subsampling / negative table statistics", sampling_statistics),
        ("sgns gradient audit", sgns_gradient_audit),
        ("trainer sanity (cbow, skipgram, fasttext)", trainer_sanity),
        ("fasttext concept suppression", fasttext_suppression),
        ("glove weighting, loss, co-occurrence", glove_checks),
        ("embedding i/o", embedding_io),
        ("intrinsic metric oracle", intrinsic_oracle_check),
        ("mlp gradient audit", mlp_gradient_audit),
        ("auc oracle", auc_oracle_check),
        ("ppi planted rule", ppi_planted),
        ("ddi protocol", ddi_protocol),
        ("embedding comparison protocol", embedding_comparison),
        ("end-to-end smoke", end_to_end),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.2}s]"),
            Err(reason) => {
                failed += 1;
                println!("FAIL  {name}: {reason} [{secs:.2}s]");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
