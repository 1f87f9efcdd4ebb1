//! Shared fixtures: a synthetic source/target corpus pair with a planted
//! target-domain cluster, and brute-force oracles.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const TOPICS: usize = 10;
pub const TOPIC_WORDS: usize = 60;
pub const FUNCTION_WORDS: usize = 20;

/// One word from each of the first six topics: unrelated in the source,
/// tightly related in the target.
pub fn cluster_words() -> Vec<String> {
    (0..6).map(|t| format!("t{}w{}", t, 2)).collect()
}

pub fn function_word(i: usize) -> String {
    format!("f{}", i)
}

fn zipf_index<R: Rng>(rng: &mut R, n: usize, weights: &[f64]) -> usize {
    let total = weights[n - 1];
    let u = rng.random::<f64>() * total;
    weights.partition_point(|&c| c <= u).min(n - 1)
}

fn zipf_cumulative(n: usize) -> Vec<f64> {
    let mut acc = 0.0;
    (0..n)
        .map(|i| {
            acc += 1.0 / (i + 1) as f64;
            acc
        })
        .collect()
}

/// Topic-structured source corpus of roughly `tokens` tokens. Each line is
/// drawn from one topic: a quarter of its tokens are shared function words,
/// the rest Zipf-distributed topic words.
pub fn source_corpus(tokens: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topic_cdf = zipf_cumulative(TOPIC_WORDS);
    let func_cdf = zipf_cumulative(FUNCTION_WORDS);
    let mut text = String::with_capacity(tokens * 6);
    let mut n = 0;
    while n < tokens {
        let topic = rng.random_range(0..TOPICS);
        let len = rng.random_range(8..16);
        for i in 0..len {
            if i > 0 {
                text.push(' ');
            }
            if rng.random::<f64>() < 0.25 {
                let f = zipf_index(&mut rng, FUNCTION_WORDS, &func_cdf);
                let _ = write!(text, "f{}", f);
            } else {
                let w = zipf_index(&mut rng, TOPIC_WORDS, &topic_cdf);
                let _ = write!(text, "t{}w{}", topic, w);
            }
        }
        text.push('\n');
        n += len;
    }
    text
}

/// Small target corpus in which the cluster words co-occur with each other
/// and with the most frequent function words.
pub fn target_corpus(lines: usize, seed: u64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cluster = cluster_words();
    let mut text = String::new();
    for _ in 0..lines {
        let len = rng.random_range(6..10);
        let toks: Vec<String> = (0..len)
            .map(|_| {
                if rng.random::<f64>() < 0.5 {
                    cluster[rng.random_range(0..cluster.len())].clone()
                } else {
                    function_word(rng.random_range(0..4))
                }
            })
            .collect();
        text.push_str(&toks.join(" "));
        text.push('\n');
    }
    text
}

/// Brute-force pair scan over whitespace/newline tokens with OOV removal.
pub fn brute_force_pairs(text: &str, in_vocab: impl Fn(&str) -> bool, window: usize) -> BTreeSet<(String, String)> {
    let mut out = BTreeSet::new();
    for line in text.lines() {
        let toks: Vec<String> = line
            .split_whitespace()
            .map(|t| t.to_lowercase())
            .filter(|t| in_vocab(t))
            .collect();
        for i in 0..toks.len() {
            for j in 0..toks.len() {
                let dist = i.abs_diff(j);
                if dist >= 1 && dist <= window && toks[i] != toks[j] {
                    let (a, b) = if toks[i] < toks[j] { (&toks[i], &toks[j]) } else { (&toks[j], &toks[i]) };
                    out.insert((a.clone(), b.clone()));
                }
            }
        }
    }
    out
}

pub fn write_file(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}
