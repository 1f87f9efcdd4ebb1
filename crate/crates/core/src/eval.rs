//! Analyses over trained vectors: embedding shift against cross-domain
//! frequency, nearest neighbors, cluster tightness and 2-D PCA.

use std::collections::{HashMap, HashSet};
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::model::{cosine_rows, load_vectors, norm, Matrix};
use crate::pairs::DomainFrequencies;

/// Words of interest in the default cluster example.
pub const DEFAULT_CLUSTER: [&str; 4] = ["spielberg", "director", "film", "movie"];

/// Dice threshold above which shifts are summarized separately.
pub const DEFAULT_DICE_THRESHOLD: f64 = 0.05;

const PCA_TOLERANCE: f64 = 1e-9;
const PCA_MAX_ITERATIONS: usize = 1000;
const SIGN_EPSILON: f64 = 1e-6;

/// A set of word vectors loaded for analysis.
#[derive(Clone, Debug)]
pub struct Embeddings {
    words: Vec<String>,
    index: HashMap<String, usize>,
    matrix: Matrix,
    norms: Vec<f64>,
}

impl Embeddings {
    pub fn new(words: Vec<String>, matrix: Matrix) -> Result<Self> {
        if words.len() != matrix.rows() {
            return Err(Error::InvalidArgument(format!(
                "{} words for {} rows",
                words.len(),
                matrix.rows()
            )));
        }
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::DuplicateWord {
                    line: i + 2,
                    word: w.clone(),
                });
            }
        }
        let norms = (0..matrix.rows()).map(|i| norm(matrix.row(i))).collect();
        Ok(Embeddings {
            words,
            index,
            matrix,
            norms,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (words, matrix) = load_vectors(path)?;
        Self::new(words, matrix)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn vector(&self, word: &str) -> Option<&[f32]> {
        self.index_of(word).map(|i| self.matrix.row(i))
    }

    fn unknown(&self, word: &str) -> Error {
        let mut close: Vec<(usize, &String)> = self
            .words
            .iter()
            .map(|w| (strsim::levenshtein(word, w), w))
            .filter(|&(d, _)| d <= 2)
            .collect();
        close.sort();
        Error::UnknownWord {
            word: word.to_owned(),
            suggestions: close.into_iter().take(5).map(|(_, w)| w.clone()).collect(),
        }
    }

    /// Indices of the listed words that are present, deduplicated, in list
    /// order. Unknown words are skipped with a warning.
    fn resolve(&self, words: &[impl AsRef<str>]) -> Vec<usize> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for w in words {
            match self.index_of(w.as_ref()) {
                Some(i) => {
                    if seen.insert(i) {
                        out.push(i);
                    }
                }
                None => log::warn!("{}", self.unknown(w.as_ref())),
            }
        }
        out
    }
}

/// One word's dice coefficient and embedding shift.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftRow {
    pub word: String,
    pub dice: f64,
    /// `1 - cosine(source, adapted)`, in `[0, 2]`.
    pub shift: f64,
}

/// Mean shift over an interval of dice values.
#[derive(Clone, Debug, PartialEq)]
pub struct DiceBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub mean_shift: f64,
}

/// Mean shift above and below a dice threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct ThresholdSummary {
    pub threshold: f64,
    pub above: usize,
    pub mean_shift_above: f64,
    pub below: usize,
    pub mean_shift_below: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ShiftReport {
    /// Sorted by dice descending, then word.
    pub rows: Vec<ShiftRow>,
}

impl ShiftReport {
    pub fn mean_shift(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.shift))
    }

    /// Ten equal-width dice bins over `[0, max dice]`. The last bin is
    /// closed on the right.
    pub fn deciles(&self) -> Vec<DiceBin> {
        let max = self.rows.iter().map(|r| r.dice).fold(0.0, f64::max);
        let width = max / 10.0;
        let mut sums = [0.0; 10];
        let mut counts = [0usize; 10];
        for r in &self.rows {
            let b = if width > 0.0 {
                ((r.dice / width) as usize).min(9)
            } else {
                0
            };
            sums[b] += r.shift;
            counts[b] += 1;
        }
        (0..10)
            .map(|b| DiceBin {
                lo: width * b as f64,
                hi: if b == 9 { max } else { width * (b + 1) as f64 },
                count: counts[b],
                mean_shift: if counts[b] == 0 { 0.0 } else { sums[b] / counts[b] as f64 },
            })
            .collect()
    }

    pub fn threshold_summary(&self, threshold: f64) -> ThresholdSummary {
        let (above, below): (Vec<&ShiftRow>, Vec<&ShiftRow>) =
            self.rows.iter().partition(|r| r.dice > threshold);
        ThresholdSummary {
            threshold,
            above: above.len(),
            mean_shift_above: mean(above.iter().map(|r| r.shift)),
            below: below.len(),
            mean_shift_below: mean(below.iter().map(|r| r.shift)),
        }
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "word\tdice\tshift")?;
        for r in &self.rows {
            writeln!(w, "{}\t{:.8}\t{:.8}", r.word, r.dice, r.shift)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Binned summary with `#`-prefixed headers.
    pub fn write_summary_tsv<W: Write>(&self, mut w: W, threshold: f64) -> Result<()> {
        let t = self.threshold_summary(threshold);
        writeln!(w, "#words\t{}", self.rows.len())?;
        writeln!(w, "#mean_shift\t{:.8}", self.mean_shift())?;
        writeln!(w, "#threshold\t{}", t.threshold)?;
        writeln!(w, "#above\t{}\t{:.8}", t.above, t.mean_shift_above)?;
        writeln!(w, "#below\t{}\t{:.8}", t.below, t.mean_shift_below)?;
        writeln!(w, "#bin\tdice_lo\tdice_hi\tcount\tmean_shift")?;
        for (i, b) in self.deciles().iter().enumerate() {
            writeln!(w, "{}\t{:.8}\t{:.8}\t{}\t{:.8}", i, b.lo, b.hi, b.count, b.mean_shift)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Embedding shift of every word present in both vector sets, paired with
/// its cross-domain dice coefficient. Words unknown to `vocab` have dice 0;
/// words with a zero vector in either set are skipped.
pub fn shift_report(
    source: &Embeddings,
    adapted: &Embeddings,
    freqs: &DomainFrequencies,
    vocab: &Vocabulary,
) -> Result<ShiftReport> {
    if source.dim() != adapted.dim() {
        return Err(Error::InvalidArgument(format!(
            "source vectors have dimension {} but adapted vectors {}",
            source.dim(),
            adapted.dim()
        )));
    }
    let mut rows = Vec::new();
    let mut common = 0;
    for (i, word) in source.words.iter().enumerate() {
        let Some(j) = adapted.index_of(word) else {
            continue;
        };
        common += 1;
        let Some(cos) = cosine_rows(source.matrix.row(i), adapted.matrix.row(j)) else {
            log::debug!("skipping '{}': zero vector", word);
            continue;
        };
        let dice = vocab.id(word).map_or(0.0, |id| freqs.dice(id));
        rows.push(ShiftRow {
            word: word.clone(),
            dice,
            shift: 1.0 - cos,
        });
    }
    if common == 0 {
        return Err(Error::NoCommonWords);
    }
    rows.sort_by(|a, b| b.dice.total_cmp(&a.dice).then_with(|| a.word.cmp(&b.word)));
    Ok(ShiftReport { rows })
}

/// The `k` most cosine-similar words to `query`, excluding the query,
/// ties broken by row order. Words with zero vectors are never returned.
pub fn nearest_neighbors(emb: &Embeddings, query: &str, k: usize) -> Result<Vec<(String, f64)>> {
    let q = emb.index_of(query).ok_or_else(|| emb.unknown(query))?;
    if k == 0 {
        return Ok(Vec::new());
    }
    if emb.norms[q] == 0.0 {
        return Err(Error::ZeroVector(q));
    }
    let qv = emb.matrix.row(q);
    let mut scored: Vec<(usize, f64)> = (0..emb.len())
        .filter(|&i| i != q && emb.norms[i] > 0.0)
        .map(|i| {
            let dot: f64 = qv
                .iter()
                .zip(emb.matrix.row(i))
                .map(|(&a, &b)| a as f64 * b as f64)
                .sum();
            (i, (dot / (emb.norms[q] * emb.norms[i])).clamp(-1.0, 1.0))
        })
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scored.truncate(k);
    Ok(scored
        .into_iter()
        .map(|(i, c)| (emb.words[i].clone(), c))
        .collect())
}

/// Mean pairwise cosine distance among the listed words that are present.
pub fn cluster_tightness(emb: &Embeddings, words: &[impl AsRef<str>]) -> Result<f64> {
    let ids = emb.resolve(words);
    if ids.len() < 2 {
        return Err(Error::TooFewWords {
            needed: 2,
            found: ids.len(),
        });
    }
    let mut total = 0.0;
    let mut n = 0;
    for (a, &i) in ids.iter().enumerate() {
        for &j in &ids[a + 1..] {
            let cos = cosine_rows(emb.matrix.row(i), emb.matrix.row(j)).ok_or(Error::ZeroVector(
                if emb.norms[i] == 0.0 { i } else { j },
            ))?;
            total += 1.0 - cos;
            n += 1;
        }
    }
    Ok(total / n as f64)
}

/// Two-dimensional PCA of selected vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct PcaProjection {
    /// `(word, x, y)` in the order the words were listed.
    pub rows: Vec<(String, f64, f64)>,
    /// Sample-covariance eigenvalues of the two components.
    pub explained_variance: [f64; 2],
    /// Unit principal axes (a zero vector when the rank is below 2).
    pub components: [Vec<f64>; 2],
}

impl PcaProjection {
    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "#explained_variance\t{:.10}\t{:.10}",
            self.explained_variance[0], self.explained_variance[1]
        )?;
        writeln!(w, "word\tx\ty")?;
        for (word, x, y) in &self.rows {
            writeln!(w, "{}\t{:.10}\t{:.10}", word, x, y)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Projects the listed words onto the top two principal components of
/// their mean-centered vectors.
pub fn pca_project(emb: &Embeddings, words: &[impl AsRef<str>]) -> Result<PcaProjection> {
    let ids = emb.resolve(words);
    if ids.len() < 3 {
        return Err(Error::TooFewWords {
            needed: 3,
            found: ids.len(),
        });
    }
    let points: Vec<Vec<f64>> = ids
        .iter()
        .map(|&i| emb.matrix.row(i).iter().map(|&x| x as f64).collect())
        .collect();
    let (coords, explained_variance, components) = pca_2d(&points)?;
    Ok(PcaProjection {
        rows: ids
            .iter()
            .zip(coords)
            .map(|(&i, (x, y))| (emb.words[i].clone(), x, y))
            .collect(),
        explained_variance,
        components,
    })
}

type Pca = (Vec<(f64, f64)>, [f64; 2], [Vec<f64>; 2]);

/// PCA of raw points by orthogonalized power iteration on the sample
/// covariance. Each component's first nonzero coordinate is positive.
pub fn pca_2d(points: &[Vec<f64>]) -> Result<Pca> {
    let n = points.len();
    if n < 2 {
        return Err(Error::TooFewWords { needed: 3, found: n });
    }
    let dim = points[0].len();
    if dim < 2 {
        return Err(Error::InvalidArgument("PCA needs at least 2 dimensions".into()));
    }
    let mut centroid = vec![0.0; dim];
    for p in points {
        for (c, x) in centroid.iter_mut().zip(p) {
            *c += x / n as f64;
        }
    }
    let centered: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p.iter().zip(&centroid).map(|(x, c)| x - c).collect())
        .collect();

    // C v = Xᵀ (X v) / (n - 1)
    let cov_mul = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for row in &centered {
            let s: f64 = row.iter().zip(v).map(|(a, b)| a * b).sum();
            for (o, a) in out.iter_mut().zip(row) {
                *o += s * a;
            }
        }
        out.iter_mut().for_each(|o| *o /= (n - 1) as f64);
        out
    };
    let trace: f64 = centered.iter().flatten().map(|x| x * x).sum::<f64>() / (n - 1) as f64;
    let negligible = 1e-12 * trace.max(f64::MIN_POSITIVE);

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut components: [Vec<f64>; 2] = [vec![0.0; dim], vec![0.0; dim]];
    let mut variances = [0.0; 2];
    for k in 0..2 {
        if trace <= 0.0 {
            break;
        }
        let mut v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let deflate = |v: &mut Vec<f64>, found: &[Vec<f64>]| {
            for c in found {
                let p: f64 = v.iter().zip(c).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(c).for_each(|(a, b)| *a -= p * b);
            }
        };
        deflate(&mut v, &components[..k]);
        normalize(&mut v);
        let mut degenerate = false;
        for _ in 0..PCA_MAX_ITERATIONS {
            let mut w = cov_mul(&v);
            deflate(&mut w, &components[..k]);
            let norm_w = normalize(&mut w);
            if norm_w <= negligible {
                degenerate = true;
                break;
            }
            let delta: f64 = w.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            v = w;
            if delta < PCA_TOLERANCE {
                break;
            }
        }
        if degenerate {
            break;
        }
        // Rayleigh quotient for the reported variance.
        let cv = cov_mul(&v);
        let lambda = v.iter().zip(&cv).map(|(a, b)| a * b).sum::<f64>().max(0.0);
        // Coordinates below SIGN_EPSILON are iteration noise, not signal.
        if let Some(first) = v.iter().find(|x| x.abs() > SIGN_EPSILON) {
            if *first < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
        }
        components[k] = v;
        variances[k] = lambda;
    }

    let coords = centered
        .iter()
        .map(|p| {
            let x = p.iter().zip(&components[0]).map(|(a, b)| a * b).sum();
            let y = p.iter().zip(&components[1]).map(|(a, b)| a * b).sum();
            (x, y)
        })
        .collect();
    Ok((coords, variances, components))
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn emb(rows: &[(&str, &[f32])]) -> Embeddings {
        let dim = rows[0].1.len();
        let words = rows.iter().map(|r| r.0.to_owned()).collect();
        let data = rows.iter().flat_map(|r| r.1.iter().copied()).collect();
        Embeddings::new(words, Matrix::from_vec(rows.len(), dim, data).unwrap()).unwrap()
    }

    fn freqs_for(words: &[&str]) -> (Vocabulary, DomainFrequencies) {
        let v = Vocabulary::from_parts(
            words.iter().map(|w| w.to_string()).collect(),
            vec![1; words.len()],
            words.len() as u64,
        )
        .unwrap();
        let n = words.len();
        let f = DomainFrequencies {
            source: (0..n).map(|i| 0.01 * (i + 1) as f64).collect(),
            target: (0..n).map(|i| 0.02 * (n - i) as f64).collect(),
        };
        (v, f)
    }

    #[test]
    fn shift_identity_and_antipodal() {
        let s = emb(&[("a", &[1.0, 2.0]), ("b", &[-0.5, 0.1]), ("c", &[0.0, 3.0])]);
        let neg = emb(&[("a", &[-1.0, -2.0]), ("b", &[0.5, -0.1]), ("c", &[0.0, -3.0])]);
        let (v, f) = freqs_for(&["a", "b", "c"]);
        let same = shift_report(&s, &s, &f, &v).unwrap();
        assert!(same.rows.iter().all(|r| r.shift.abs() < 1e-12));
        let anti = shift_report(&s, &neg, &f, &v).unwrap();
        assert!(anti.rows.iter().all(|r| (r.shift - 2.0).abs() < 1e-12));
        // sorted by dice descending
        assert!(same.rows.windows(2).all(|w| w[0].dice >= w[1].dice));
    }

    #[test]
    fn shift_hand_value_and_scale_invariance() {
        let s = emb(&[("a", &[1.0, 0.0])]);
        let a = emb(&[("a", &[1.0, 1.0])]);
        let a10 = emb(&[("a", &[10.0, 10.0])]);
        let (v, f) = freqs_for(&["a"]);
        let r = shift_report(&s, &a, &f, &v).unwrap();
        assert!((r.rows[0].shift - (1.0 - 0.5f64.sqrt())).abs() < 1e-7);
        assert!((r.rows[0].shift - 0.2929).abs() < 1e-4);
        let r10 = shift_report(&s, &a10, &f, &v).unwrap();
        assert!((r.rows[0].shift - r10.rows[0].shift).abs() < 1e-12);
    }

    #[test]
    fn shift_requires_common_words() {
        let s = emb(&[("a", &[1.0, 0.0])]);
        let a = emb(&[("b", &[1.0, 0.0])]);
        let (v, f) = freqs_for(&["a"]);
        assert!(matches!(shift_report(&s, &a, &f, &v), Err(Error::NoCommonWords)));
        let a3 = emb(&[("a", &[1.0, 0.0, 0.0])]);
        assert!(shift_report(&s, &a3, &f, &v).is_err());
    }

    #[test]
    fn deciles_cover_all_rows() {
        let rows = (0..25)
            .map(|i| ShiftRow {
                word: format!("w{}", i),
                dice: i as f64 * 0.004,
                shift: i as f64 * 0.01,
            })
            .collect();
        let r = ShiftReport { rows };
        let bins = r.deciles();
        assert_eq!(bins.len(), 10);
        assert_eq!(bins.iter().map(|b| b.count).sum::<usize>(), 25);
        assert!((bins[9].hi - 0.096).abs() < 1e-12);
        let t = r.threshold_summary(0.05);
        assert_eq!(t.above + t.below, 25);
        assert_eq!(t.above, 12);
        assert!(t.mean_shift_above > t.mean_shift_below);
    }

    #[test]
    fn neighbors_example() {
        let h = std::f32::consts::FRAC_1_SQRT_2;
        let e = emb(&[("e1", &[1.0, 0.0]), ("e2", &[0.0, 1.0]), ("mixed", &[h, h])]);
        let nn = nearest_neighbors(&e, "e1", 2).unwrap();
        assert_eq!(nn[0].0, "mixed");
        assert!((nn[0].1 - 0.5f64.sqrt()).abs() < 1e-6);
        assert_eq!(nn[1].0, "e2");
        assert!(nn[1].1.abs() < 1e-12);
        assert!(nearest_neighbors(&e, "e1", 0).unwrap().is_empty());
        assert!(nearest_neighbors(&e, "e1", 10).unwrap().iter().all(|(w, _)| w != "e1"));
    }

    #[test]
    fn neighbor_ties_follow_row_order() {
        let e = emb(&[("q", &[1.0, 0.0]), ("b", &[2.0, 0.0]), ("a", &[3.0, 0.0])]);
        let nn = nearest_neighbors(&e, "q", 2).unwrap();
        assert_eq!(nn[0].0, "b");
        assert_eq!(nn[1].0, "a");
    }

    #[test]
    fn unknown_query_suggests_spellings() {
        let e = emb(&[("film", &[1.0, 0.0]), ("films", &[0.0, 1.0]), ("movie", &[1.0, 1.0])]);
        match nearest_neighbors(&e, "flim", 1) {
            Err(Error::UnknownWord { suggestions, .. }) => {
                assert!(suggestions.contains(&"film".to_string()));
                assert!(!suggestions.contains(&"movie".to_string()));
            }
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn tightness_examples() {
        let same = emb(&[("a", &[1.0, 2.0, 0.0]), ("b", &[1.0, 2.0, 0.0]), ("c", &[2.0, 4.0, 0.0])]);
        assert!(cluster_tightness(&same, &["a", "b", "c"]).unwrap().abs() < 1e-12);
        let ortho = emb(&[("a", &[1.0, 0.0, 0.0]), ("b", &[0.0, 1.0, 0.0]), ("c", &[0.0, 0.0, 1.0])]);
        assert!((cluster_tightness(&ortho, &["a", "b"]).unwrap() - 1.0).abs() < 1e-12);
        assert!((cluster_tightness(&ortho, &["a", "b", "c"]).unwrap() - 1.0).abs() < 1e-12);
        assert!(cluster_tightness(&ortho, &["a", "zzz"]).is_err());
        assert!(cluster_tightness(&ortho, &["a", "a"]).is_err());
    }

    #[test]
    fn pca_collinear() {
        let e = emb(&[("p", &[0.0, 0.0]), ("q", &[1.0, 0.0]), ("r", &[2.0, 0.0])]);
        let p = pca_project(&e, &["p", "q", "r"]).unwrap();
        let xs: Vec<f64> = p.rows.iter().map(|r| r.1).collect();
        for (x, want) in xs.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((x - want).abs() < 1e-6);
        }
        assert!(p.rows.iter().all(|r| r.2.abs() < 1e-6));
        assert!((p.explained_variance[0] - 1.0).abs() < 1e-9);
        assert_eq!(p.explained_variance[1], 0.0);
        assert!(p.components[1].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn pca_sign_ignores_iteration_noise() {
        let pts = vec![vec![2.0, 0.0, 0.0], vec![-2.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, -1.0, 0.0]];
        let (coords, _, comps) = pca_2d(&pts).unwrap();
        assert!((comps[1][1] - 1.0).abs() < 1e-6);
        assert!((coords[2].1 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn pca_identical_points() {
        let e = emb(&[("p", &[1.0, 2.0]), ("q", &[1.0, 2.0]), ("r", &[1.0, 2.0])]);
        let p = pca_project(&e, &["p", "q", "r"]).unwrap();
        assert_eq!(p.explained_variance, [0.0, 0.0]);
        assert!(p.rows.iter().all(|r| r.1 == 0.0 && r.2 == 0.0));
    }

    #[test]
    fn pca_needs_three_words() {
        let e = emb(&[("p", &[1.0, 2.0]), ("q", &[1.0, 3.0])]);
        assert!(matches!(pca_project(&e, &["p", "q"]), Err(Error::TooFewWords { .. })));
    }
}
