//! Signature comparison, ranking and mean-average-precision evaluation.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{check_dim, Error, Result};
use crate::linalg::dot;
use crate::normalize::{l2_normalize, DEFAULT_EPSILON};
use crate::reduce::PairBlocks;

/// Final global descriptor of one image.
#[derive(Debug, Clone, PartialEq)]
pub struct Signature {
    pub image_id: String,
    pub vector: Vec<f64>,
    /// Pixel sizes whose representations were summed into `vector`.
    pub resolutions: Vec<u32>,
}

impl Signature {
    pub fn new(image_id: impl Into<String>, vector: Vec<f64>, resolutions: Vec<u32>) -> Result<Self> {
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("signature has non-finite entries".into()));
        }
        Ok(Self {
            image_id: image_id.into(),
            vector,
            resolutions,
        })
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// Sums the per-resolution signatures of one image and l2-normalizes the result.
pub fn combine_resolutions(sigs: &[Signature]) -> Result<Signature> {
    let first = sigs
        .first()
        .ok_or_else(|| Error::Argument("no signatures to combine".into()))?;
    let mut sum = vec![0.0; first.dim()];
    let mut resolutions = Vec::new();
    for s in sigs {
        if s.image_id != first.image_id {
            return Err(Error::Argument(format!(
                "cannot combine signatures of {} and {}",
                first.image_id, s.image_id
            )));
        }
        check_dim("combined signature", first.dim(), s.dim())?;
        sum.iter_mut().zip(&s.vector).for_each(|(a, b)| *a += b);
        resolutions.extend_from_slice(&s.resolutions);
    }
    l2_normalize(&mut sum, DEFAULT_EPSILON);
    resolutions.sort_unstable();
    resolutions.dedup();
    Signature::new(first.image_id.clone(), sum, resolutions)
}

/// Inner product of two signatures.
pub fn similarity(a: &Signature, b: &Signature) -> Result<f64> {
    check_dim("similarity", a.dim(), b.dim())?;
    Ok(dot(&a.vector, &b.vector))
}

/// Index entries ordered by decreasing similarity to `query`; ties go to the
/// lexicographically smaller id, and the query's own id is left out.
pub fn rank(index: &[Signature], query: &Signature) -> Result<Vec<(String, f64)>> {
    let mut scored = Vec::with_capacity(index.len());
    for s in index.iter().filter(|s| s.image_id != query.image_id) {
        scored.push((s.image_id.clone(), similarity(s, query)?));
    }
    scored.sort_by(compare_scored);
    Ok(scored)
}

/// Relevance judgements for one query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    pub query_id: String,
    pub positives: BTreeSet<String>,
    /// Neither rewarded nor penalized: removed from rankings before scoring.
    pub junk: BTreeSet<String>,
}

impl GroundTruth {
    pub fn new(
        query_id: impl Into<String>,
        positives: impl IntoIterator<Item = String>,
        junk: impl IntoIterator<Item = String>,
    ) -> Result<Self> {
        let gt = Self {
            query_id: query_id.into(),
            positives: positives.into_iter().collect(),
            junk: junk.into_iter().collect(),
        };
        gt.validate()?;
        Ok(gt)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(both) = self.positives.intersection(&self.junk).next() {
            return Err(Error::Validation(format!(
                "query {}: {both} is both positive and junk",
                self.query_id
            )));
        }
        if self.positives.contains(&self.query_id) {
            return Err(Error::Validation(format!(
                "query {} lists itself as a positive",
                self.query_id
            )));
        }
        Ok(())
    }
}

/// Non-interpolated average precision of a ranking, junk removed first.
pub fn average_precision<S: AsRef<str>>(ranking: &[S], gt: &GroundTruth) -> Result<f64> {
    if gt.positives.is_empty() {
        return Err(Error::Evaluation(format!(
            "query {} has no positives",
            gt.query_id
        )));
    }
    let mut hits = 0usize;
    let mut precision_sum = 0.0;
    let mut seen = BTreeSet::new();
    let mut position = 0usize;
    for id in ranking.iter().map(AsRef::as_ref) {
        if gt.junk.contains(id) {
            continue;
        }
        position += 1;
        if gt.positives.contains(id) && seen.insert(id) {
            hits += 1;
            precision_sum += hits as f64 / position as f64;
        }
    }
    Ok(precision_sum / gt.positives.len() as f64)
}

fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => pairwise_sum(&values[..n / 2]) + pairwise_sum(&values[n / 2..]),
    }
}

/// Mean of per-query average precision.
pub fn mean_ap<S: AsRef<str>>(queries: &[(Vec<S>, GroundTruth)]) -> Result<f64> {
    if queries.is_empty() {
        return Err(Error::Evaluation("no queries to evaluate".into()));
    }
    let aps = queries
        .iter()
        .map(|(ranking, gt)| average_precision(ranking, gt))
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_sum(&aps) / aps.len() as f64)
}

/// Similarity split by ordered cluster pair: entry `(k, l)` is the inner
/// product of the two `(k, l)` blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct PairContributions {
    clusters: usize,
    values: Vec<f64>,
}

impl PairContributions {
    pub fn clusters(&self) -> usize {
        self.clusters
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.values[k * self.clusters + l]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Pair contributing the most to the similarity (lowest index on ties).
    pub fn dominant_pair(&self) -> Option<(usize, usize)> {
        let n = self.clusters;
        self.values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then_with(|| b.0.cmp(&a.0)))
            .map(|(i, _)| (i / n, i % n))
    }
}

pub fn contribution_by_pair<B: PairBlocks>(a: &B, b: &B) -> Result<PairContributions> {
    check_dim("contribution clusters", a.clusters(), b.clusters())?;
    let (ba, bb) = (a.blocks(), b.blocks());
    check_dim("contribution block count", ba.len(), bb.len())?;
    let n = a.clusters();
    let mut values = vec![0.0; n * n];
    for (&(ka, la, xa), &(kb, lb, xb)) in ba.iter().zip(&bb) {
        if (ka, la) != (kb, lb) || xa.len() != xb.len() {
            return Err(Error::Layout(format!(
                "block ({ka},{la}) of length {} faces ({kb},{lb}) of length {}",
                xa.len(),
                xb.len()
            )));
        }
        values[ka * n + la] += dot(xa, xb);
    }
    Ok(PairContributions { clusters: n, values })
}

/// Orders results exactly like [`rank`]; exposed for callers sorting their own scores.
pub fn compare_scored(a: &(String, f64), b: &(String, f64)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or_else(|| b.1.total_cmp(&a.1))
        .then_with(|| a.0.cmp(&b.0))
}
