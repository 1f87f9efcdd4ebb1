//! Per-example SGD updates.
//!
//! All updates follow word2vec's order: the input-side gradient is
//! accumulated in a scratch buffer while output-side vectors are updated,
//! and the input vectors receive the accumulated gradient once at the end.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::params::RawParams;
use crate::corpus::{NegativeSamplingTable, WindowExample};
use crate::model::EmbeddingModel;
use crate::pairs::PairTable;

/// Inputs to the logistic function are clamped to `[-MAX_EXP, MAX_EXP]`.
pub const MAX_EXP: f32 = 6.0;

const SIGMOID_TABLE_SIZE: usize = 1000;

/// Redraw budget for a negative sample that equals the positive target.
const MAX_NEGATIVE_DRAWS: usize = 8;

/// Logistic function with saturation at `|x| = MAX_EXP`.
#[inline]
pub fn sigmoid(x: f32) -> f32 {
    let x = x.clamp(-MAX_EXP, MAX_EXP);
    1.0 / (1.0 + (-x).exp())
}

/// Exact or table-based logistic function.
#[derive(Clone, Debug, Default)]
pub struct Sigmoid {
    table: Option<Vec<f32>>,
}

impl Sigmoid {
    pub fn exact() -> Self {
        Sigmoid { table: None }
    }

    /// 1000-bin lookup table over `[-MAX_EXP, MAX_EXP]`.
    pub fn table() -> Self {
        let table = (0..SIGMOID_TABLE_SIZE)
            .map(|i| {
                let x = (i as f32 / SIGMOID_TABLE_SIZE as f32 * 2.0 - 1.0) * MAX_EXP;
                sigmoid(x)
            })
            .collect();
        Sigmoid { table: Some(table) }
    }

    #[inline]
    pub fn eval(&self, x: f32) -> f32 {
        match &self.table {
            None => sigmoid(x),
            Some(table) => {
                let x = x.clamp(-MAX_EXP, MAX_EXP);
                let idx = ((x + MAX_EXP) * (SIGMOID_TABLE_SIZE as f32 / MAX_EXP / 2.0)) as usize;
                table[idx.min(SIGMOID_TABLE_SIZE - 1)]
            }
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f32], b: &[f32]) -> f32 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0f32; 8];
    let chunks = n / 8;
    for c in 0..chunks {
        let (x, y) = (&a[c * 8..c * 8 + 8], &b[c * 8..c * 8 + 8]);
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut sum = ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7]));
    for i in chunks * 8..n {
        sum += a[i] * b[i];
    }
    sum
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f32, x: &[f32], y: &mut [f32]) {
    for (y, &x) in y.iter_mut().zip(x) {
        *y += alpha * x;
    }
}

/// One logistic-loss SGD update of an output vector against a hidden
/// (input-side) vector.
///
/// With `s = σ(hidden · output)` and `g = lr (label - s)`, adds `g · output`
/// (old value) to `grad` and `g · hidden` to `output`. Returns `s`.
#[inline]
pub fn logistic_update(
    hidden: &[f32],
    output: &mut [f32],
    label: f32,
    lr: f32,
    sigmoid: &Sigmoid,
    grad: &mut [f32],
) -> f32 {
    let s = sigmoid.eval(dot(hidden, output));
    let g = lr * (label - s);
    axpy(g, output, grad);
    axpy(g, hidden, output);
    s
}

/// Mutable per-worker state: random generator, current learning rate and
/// scratch buffers.
#[derive(Clone, Debug)]
pub struct StepContext {
    pub rng: ChaCha8Rng,
    pub lr: f32,
    pub negatives: usize,
    pub sigmoid: Sigmoid,
    grad: Vec<f32>,
    hidden: Vec<f32>,
    scores: Vec<f32>,
    factors: Vec<u8>,
    weights: Vec<f64>,
}

impl StepContext {
    pub fn new(rng: ChaCha8Rng, lr: f32, negatives: usize, sigmoid: Sigmoid, dim: usize) -> Self {
        StepContext {
            rng,
            lr,
            negatives,
            sigmoid,
            grad: vec![0.0; dim],
            hidden: vec![0.0; dim],
            scores: Vec::new(),
            factors: Vec::new(),
            weights: Vec::new(),
        }
    }

    /// Context with a seeded generator and exact sigmoid.
    pub fn seeded(seed: u64, lr: f32, negatives: usize, dim: usize) -> Self {
        Self::new(ChaCha8Rng::seed_from_u64(seed), lr, negatives, Sigmoid::exact(), dim)
    }

    /// Attention weights computed by the last CBOW-DA step.
    pub fn last_weights(&self) -> &[f64] {
        &self.weights
    }
}

// Draws a negative distinct from `positive`; `None` once the redraw budget
// is spent.
#[inline]
fn draw_negative(ns: &NegativeSamplingTable, ctx: &mut StepContext, positive: u32) -> Option<u32> {
    (0..MAX_NEGATIVE_DRAWS)
        .map(|_| ns.sample(&mut ctx.rng))
        .find(|&w| w != positive)
}

/// Positive update for `target` plus `ctx.negatives` sampled negatives
/// against the hidden vector in `ctx.hidden`, accumulating into `ctx.grad`.
/// Returns σ of the positive pair.
///
/// # Safety
/// `params` must point to live matrices with valid ids.
unsafe fn negative_sampling(
    params: &RawParams,
    ctx: &mut StepContext,
    target: u32,
    ns: &NegativeSamplingTable,
) -> f32 {
    ctx.grad.fill(0.0);
    let s = logistic_update(
        &ctx.hidden,
        params.output(target),
        1.0,
        ctx.lr,
        &ctx.sigmoid,
        &mut ctx.grad,
    );
    for _ in 0..ctx.negatives {
        if let Some(neg) = draw_negative(ns, ctx, target) {
            logistic_update(
                &ctx.hidden,
                params.output(neg),
                0.0,
                ctx.lr,
                &ctx.sigmoid,
                &mut ctx.grad,
            );
        }
    }
    s
}

/// # Safety
/// See [`RawParams`].
pub(crate) unsafe fn sg_step_raw(
    params: &RawParams,
    ctx: &mut StepContext,
    center: u32,
    context_word: u32,
    ns: &NegativeSamplingTable,
) -> f32 {
    ctx.hidden.copy_from_slice(params.input(center));
    let s = negative_sampling(params, ctx, context_word, ns);
    axpy(1.0, &ctx.grad, params.input(center));
    s
}

/// # Safety
/// See [`RawParams`]. The indicator matrix must be present.
pub(crate) unsafe fn indicator_step_raw(
    params: &RawParams,
    ctx: &StepContext,
    center: u32,
    context_word: u32,
    pairs: &PairTable,
    weight: f32,
) -> f32 {
    let label = pairs.lookup(center, context_word) as f32;
    let input = params.input(center);
    let indicator = params.indicator(context_word);
    let s = ctx.sigmoid.eval(dot(input, indicator));
    let g = ctx.lr * weight * (label - s);
    for (u, d) in input.iter_mut().zip(indicator.iter_mut()) {
        let (u_old, d_old) = (*u, *d);
        *u = u_old + g * d_old;
        *d = d_old + g * u_old;
    }
    s
}

/// Normalized domain attention over a context window.
///
/// `scores[i]` is the source association `output[center] · input[context_i]`
/// and `factors[i]` the target co-occurrence flag. Scores are clamped to
/// `[-MAX_EXP, MAX_EXP]` and shifted by their maximum `m`, so each raw
/// weight is `exp(x_i - m) + k_i exp(-m)`, preserving the ratios of
/// `exp(x_i) + k_i`.
pub fn attention_from_scores(scores: &[f32], factors: &[u8], out: &mut Vec<f64>) {
    out.clear();
    let m = scores
        .iter()
        .map(|&x| x.clamp(-MAX_EXP, MAX_EXP) as f64)
        .fold(f64::NEG_INFINITY, f64::max);
    let shift = (-m).exp();
    let mut total = 0.0;
    for (&x, &k) in scores.iter().zip(factors) {
        let x = x.clamp(-MAX_EXP, MAX_EXP) as f64;
        let raw = (x - m).exp() + k as f64 * shift;
        total += raw;
        out.push(raw);
    }
    for w in out.iter_mut() {
        *w /= total;
    }
}

/// # Safety
/// See [`RawParams`].
pub(crate) unsafe fn attention_raw(
    params: &RawParams,
    ctx: &mut StepContext,
    center: u32,
    context: &[u32],
    pairs: &PairTable,
) {
    let out = params.output(center);
    ctx.scores.clear();
    ctx.factors.clear();
    for &c in context {
        ctx.scores.push(dot(out, params.input(c)));
        ctx.factors.push(pairs.lookup(center, c));
    }
    attention_from_scores(&ctx.scores, &ctx.factors, &mut ctx.weights);
}

/// # Safety
/// See [`RawParams`].
pub(crate) unsafe fn cbow_step_raw(
    params: &RawParams,
    ctx: &mut StepContext,
    center: u32,
    context: &[u32],
    ns: &NegativeSamplingTable,
    attention: Option<&PairTable>,
) -> f32 {
    ctx.hidden.fill(0.0);
    match attention {
        None => {
            for &c in context {
                axpy(1.0, params.input(c), &mut ctx.hidden);
            }
        }
        Some(pairs) => {
            attention_raw(params, ctx, center, context, pairs);
            for (&c, &d) in context.iter().zip(&ctx.weights) {
                axpy(d as f32, params.input(c), &mut ctx.hidden);
            }
        }
    }

    let s = negative_sampling(params, ctx, center, ns);

    match attention {
        None => {
            for &c in context {
                axpy(1.0, &ctx.grad, params.input(c));
            }
        }
        Some(_) => {
            for (&c, &d) in context.iter().zip(&ctx.weights) {
                axpy(d as f32, &ctx.grad, params.input(c));
            }
        }
    }
    s
}

/// One skip-gram step: predict `context_word` from `center`.
/// Returns σ of the positive pair.
pub fn sg_step(
    model: &mut EmbeddingModel,
    ctx: &mut StepContext,
    center: u32,
    context_word: u32,
    ns: &NegativeSamplingTable,
) -> f32 {
    let params = RawParams::new(model);
    assert!(params.contains(center) && params.contains(context_word), "id out of range");
    unsafe { sg_step_raw(&params, ctx, center, context_word, ns) }
}

/// One simultaneous update of the domain indicator channel,
/// `υ += γλ(D - σ(υ·δ)) δ_old` and `δ += γλ(D - σ(υ·δ)) υ_old`, where `D`
/// is the pair-table label. Returns `σ(υ·δ)`.
///
/// Panics if the model has no indicator matrix.
pub fn indicator_step(
    model: &mut EmbeddingModel,
    ctx: &StepContext,
    center: u32,
    context_word: u32,
    pairs: &PairTable,
    weight: f32,
) -> f32 {
    assert!(model.indicator().is_some(), "model has no indicator matrix");
    let params = RawParams::new(model);
    assert!(params.contains(center) && params.contains(context_word), "id out of range");
    unsafe { indicator_step_raw(&params, ctx, center, context_word, pairs, weight) }
}

/// Attention weight of each context word when predicting `center`.
pub fn attention_weights(model: &EmbeddingModel, center: u32, context: &[u32], pairs: &PairTable) -> Vec<f64> {
    let out = model.output().row(center as usize);
    let scores: Vec<f32> = context
        .iter()
        .map(|&c| dot(out, model.input().row(c as usize)))
        .collect();
    let factors: Vec<u8> = context.iter().map(|&c| pairs.lookup(center, c)).collect();
    let mut weights = Vec::with_capacity(context.len());
    attention_from_scores(&scores, &factors, &mut weights);
    weights
}

/// One CBOW step. With `attention` set, the projection is the
/// attention-weighted sum and each context word receives its weight times
/// the accumulated gradient; otherwise the plain sum, with every context
/// word receiving the full gradient. Returns σ of the positive pair.
pub fn cbow_step(
    model: &mut EmbeddingModel,
    ctx: &mut StepContext,
    example: &WindowExample,
    ns: &NegativeSamplingTable,
    attention: Option<&PairTable>,
) -> f32 {
    let params = RawParams::new(model);
    assert!(
        params.contains(example.center) && example.context.iter().all(|&c| params.contains(c)),
        "id out of range"
    );
    if example.context.is_empty() {
        return 0.5;
    }
    unsafe { cbow_step_raw(&params, ctx, example.center, &example.context, ns, attention) }
}
