mod common;

use std::collections::BTreeSet;
use std::sync::Arc;

use embda::corpus::{build_vocab_from_reader, sentence_windows};
use embda::model::{read_vectors, write_vectors, Precision};
use embda::{build_ns_table, build_vocab, extract_pairs, train, EmbeddingModel, Matrix, Mode, PairTable, Tokenizer, TrainConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn corpus_strategy() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::collection::vec(0u8..20, 0..15), 1..15).prop_map(|lines| {
        lines
            .iter()
            .map(|l| l.iter().map(|w| format!("w{w}")).collect::<Vec<_>>().join(" "))
            .collect::<Vec<_>>()
            .join("\n")
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn static_windows_match_direct_scan(sentence in prop::collection::vec(0u32..30, 0..40), window in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let got = sentence_windows(&sentence, window, false, &mut rng);
        let mut want = Vec::new();
        for t in 0..sentence.len() {
            let context: Vec<u32> = (0..sentence.len())
                .filter(|&j| j != t && j.abs_diff(t) <= window)
                .map(|j| sentence[j])
                .collect();
            if !context.is_empty() {
                want.push((sentence[t], context));
            }
        }
        let got: Vec<(u32, Vec<u32>)> = got.into_iter().map(|e| (e.center, e.context)).collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn dynamic_windows_stay_inside_static(sentence in prop::collection::vec(0u32..30, 1..40), window in 1usize..7, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for e in sentence_windows(&sentence, window, true, &mut rng) {
            prop_assert!(!e.context.is_empty() && e.context.len() <= 2 * window);
        }
    }

    #[test]
    fn pairs_match_brute_force(text in corpus_strategy(), window in 1usize..6, min_count in 1u64..3) {
        let Ok(vocab) = build_vocab_from_reader(text.as_bytes(), Tokenizer::default(), min_count) else {
            return Ok(());
        };
        let (table, _) = extract_pairs(text.as_bytes(), &vocab, Tokenizer::default(), window).unwrap();
        let got: BTreeSet<(String, String)> = table
            .pairs()
            .map(|(a, b)| {
                let (a, b) = (vocab.word(a).to_owned(), vocab.word(b).to_owned());
                if a < b { (a, b) } else { (b, a) }
            })
            .collect();
        prop_assert_eq!(got, common::brute_force_pairs(&text, |w| vocab.id(w).is_some(), window));
    }

    #[test]
    fn pair_table_round_trips(text in corpus_strategy(), window in 1usize..6) {
        let vocab = build_vocab_from_reader(text.as_bytes(), Tokenizer::default(), 1);
        prop_assume!(vocab.is_ok());
        let vocab = vocab.unwrap();
        let (table, _) = extract_pairs(text.as_bytes(), &vocab, Tokenizer::default(), window).unwrap();
        let mut buf = Vec::new();
        table.write(&vocab, &mut buf).unwrap();
        let back = PairTable::read(buf.as_slice(), &vocab, "memory").unwrap();
        prop_assert_eq!(back, table);
    }

    #[test]
    fn vocabulary_orders_by_count(words in prop::collection::vec("[a-e]{1,2}", 1..60)) {
        let vocab = build_vocab(&words, 1).unwrap();
        for id in 1..vocab.len() as u32 {
            prop_assert!(vocab.count(id - 1) >= vocab.count(id));
        }
        let total: u64 = vocab.counts().iter().sum();
        prop_assert_eq!(total, words.len() as u64);
    }

    #[test]
    fn vectors_round_trip(values in prop::collection::vec(-1e6f32..1e6, 12)) {
        let words: Vec<String> = (0..4).map(|i| format!("w{i}")).collect();
        let m = Matrix::from_vec(4, 3, values).unwrap();
        for precision in [Precision::Significant6, Precision::Full] {
            let mut buf = Vec::new();
            write_vectors(&mut buf, &words, &m, precision).unwrap();
            let (w, back) = read_vectors(buf.as_slice()).unwrap();
            prop_assert_eq!(&w, &words);
            for (x, y) in m.as_slice().iter().zip(back.as_slice()) {
                let tol = precision.relative_tolerance() * x.abs();
                prop_assert!((x - y).abs() <= tol, "{} vs {}", x, y);
            }
        }
    }
}

#[test]
fn negative_samples_match_three_word_distribution() {
    let words: Vec<&str> = [vec!["a"; 8], vec!["b"; 3], vec!["c"; 1]].concat();
    let vocab = build_vocab(&words, 1).unwrap();
    let table = build_ns_table(&vocab, 0.75).unwrap();
    let weights = [8f64.powf(0.75), 3f64.powf(0.75), 1.0];
    let norm: f64 = weights.iter().sum();
    let mut counts = [0u64; 3];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws = 1_000_000;
    for _ in 0..draws {
        counts[table.sample(&mut rng) as usize] += 1;
    }
    for id in 0..3 {
        let p = weights[id] / norm;
        assert!((table.probability(id as u32) - p).abs() < 1e-12);
        assert!((counts[id] as f64 / draws as f64 - p).abs() < 0.01);
    }
}

#[test]
fn negative_samples_over_a_large_vocabulary() {
    let text = common::source_corpus(20_000, 5);
    let vocab = build_vocab_from_reader(text.as_bytes(), Tokenizer::default(), 5).unwrap();
    let table = build_ns_table(&vocab, 0.75).unwrap();
    let mut counts = vec![0u64; vocab.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws = 1_000_000;
    for _ in 0..draws {
        counts[table.sample(&mut rng) as usize] += 1;
    }
    for (id, &count) in counts.iter().enumerate() {
        let p = table.probability(id as u32);
        let observed = count as f64 / draws as f64;
        let sigma = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((observed - p).abs() < 5.0 * sigma + 1e-6, "word {id}: {observed} vs {p}");
    }
}

#[test]
fn training_is_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let text = common::source_corpus(5_000, 2);
    let path = common::write_file(dir.path(), "c.txt", &text);
    let vocab = Arc::new(build_vocab_from_reader(text.as_bytes(), Tokenizer::default(), 2).unwrap());
    let target = common::target_corpus(20, 1);
    let (pairs, _) = extract_pairs(target.as_bytes(), &vocab, Tokenizer::default(), 5).unwrap();
    for mode in Mode::ALL {
        let run = |seed| {
            let mut cfg = TrainConfig::new(mode);
            cfg.dim = 8;
            cfg.epochs = 2;
            cfg.seed = seed;
            let mut m = EmbeddingModel::new(vocab.clone(), 8, mode, seed).unwrap();
            train(&mut m, &path, &cfg, mode.is_domain_aware().then_some(&pairs)).unwrap();
            m
        };
        assert_eq!(run(4), run(4), "{mode}");
        assert_ne!(run(4).input(), run(5).input(), "{mode}");
    }
}
