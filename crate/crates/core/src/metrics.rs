//! chrF, bootstrap confidence intervals and score summaries.

use std::collections::HashMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("no input")]
    EmptyInput,
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChrFParams {
    pub max_order: usize,
    pub beta: f64,
    pub include_whitespace: bool,
}

impl Default for ChrFParams {
    fn default() -> Self {
        Self {
            max_order: 6,
            beta: 2.0,
            include_whitespace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NGramStats {
    pub order: usize,
    pub hyp_count: u64,
    pub ref_count: u64,
    pub overlap: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChrFReport {
    pub score: f64,
    #[serde(rename = "chrP")]
    pub chr_p: f64,
    #[serde(rename = "chrR")]
    pub chr_r: f64,
    pub per_order: Vec<NGramStats>,
    pub params: ChrFParams,
}

fn chars(s: &str, params: &ChrFParams) -> Vec<char> {
    s.chars()
        .filter(|c| params.include_whitespace || !c.is_whitespace())
        .collect()
}

fn ngram_counts(chars: &[char], n: usize) -> HashMap<&[char], u64> {
    let mut counts = HashMap::new();
    if n > 0 && chars.len() >= n {
        for w in chars.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Per-order n-gram counts for one sentence pair.
pub fn chrf_stats(hyp: &str, reference: &str, params: &ChrFParams) -> Vec<NGramStats> {
    let h = chars(hyp, params);
    let r = chars(reference, params);
    (1..=params.max_order)
        .map(|n| {
            let hc = ngram_counts(&h, n);
            let rc = ngram_counts(&r, n);
            let overlap = hc
                .iter()
                .map(|(g, &c)| c.min(rc.get(g).copied().unwrap_or(0)))
                .sum();
            NGramStats {
                order: n,
                hyp_count: hc.values().sum(),
                ref_count: rc.values().sum(),
                overlap,
            }
        })
        .collect()
}

fn add_stats(total: &mut [NGramStats], other: &[NGramStats]) {
    for (t, o) in total.iter_mut().zip(other) {
        t.hyp_count += o.hyp_count;
        t.ref_count += o.ref_count;
        t.overlap += o.overlap;
    }
}

fn empty_stats(params: &ChrFParams) -> Vec<NGramStats> {
    (1..=params.max_order)
        .map(|order| NGramStats {
            order,
            hyp_count: 0,
            ref_count: 0,
            overlap: 0,
        })
        .collect()
}

/// Applies the chrF formula to (possibly aggregated) counts. Orders with
/// no n-grams on either side are left out of the averages.
pub fn report_from_stats(per_order: Vec<NGramStats>, params: &ChrFParams) -> ChrFReport {
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let counted: Vec<&NGramStats> = per_order
        .iter()
        .filter(|s| s.hyp_count > 0 || s.ref_count > 0)
        .collect();
    let (chr_p, chr_r) = if counted.is_empty() {
        (0.0, 0.0)
    } else {
        let k = counted.len() as f64;
        (
            counted.iter().map(|s| ratio(s.overlap, s.hyp_count)).sum::<f64>() / k,
            counted.iter().map(|s| ratio(s.overlap, s.ref_count)).sum::<f64>() / k,
        )
    };
    let b2 = params.beta * params.beta;
    let den = b2 * chr_p + chr_r;
    let score = if den > 0.0 {
        100.0 * (1.0 + b2) * chr_p * chr_r / den
    } else {
        0.0
    };
    ChrFReport {
        score,
        chr_p,
        chr_r,
        per_order,
        params: *params,
    }
}

pub fn chrf_sentence(hyp: &str, reference: &str, params: &ChrFParams) -> ChrFReport {
    report_from_stats(chrf_stats(hyp, reference, params), params)
}

/// Micro-averaged corpus chrF: counts are summed over all pairs first.
pub fn chrf_corpus<H: AsRef<str>, R: AsRef<str>>(
    pairs: &[(H, R)],
    params: &ChrFParams,
) -> Result<ChrFReport, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut total = empty_stats(params);
    for (h, r) in pairs {
        add_stats(&mut total, &chrf_stats(h.as_ref(), r.as_ref(), params));
    }
    Ok(report_from_stats(total, params))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummaryMethod {
    Bootstrap,
    Moments,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreSummary {
    pub mean: f64,
    pub sd: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
    pub method: SummaryMethod,
}

impl ScoreSummary {
    pub fn half_width(&self) -> f64 {
        (self.ci_high - self.ci_low) / 2.0
    }
}

/// Bootstrap summaries render as `mean ± CI half-width` with one decimal,
/// moment summaries as `mean ± sd` with two.
impl fmt::Display for ScoreSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.method {
            SummaryMethod::Bootstrap => write!(f, "{:.1} ± {:.1}", self.mean, self.half_width()),
            SummaryMethod::Moments => write!(f, "{:.2} ± {:.2}", self.mean, self.sd),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            resamples: 1000,
            confidence: 0.95,
            seed: 1,
        }
    }
}

/// Corpus chrF of every resample. Resample `i` draws its indices from a
/// generator seeded with `seed ^ i`, so results do not depend on
/// evaluation order.
pub fn bootstrap_scores<H: AsRef<str>, R: AsRef<str>>(
    pairs: &[(H, R)],
    params: &ChrFParams,
    resamples: usize,
    seed: u64,
) -> Vec<f64> {
    let stats: Vec<Vec<NGramStats>> = pairs
        .iter()
        .map(|(h, r)| chrf_stats(h.as_ref(), r.as_ref(), params))
        .collect();
    resample_stats(&stats, params, resamples, seed)
}

fn resample_stats(stats: &[Vec<NGramStats>], params: &ChrFParams, resamples: usize, seed: u64) -> Vec<f64> {
    let n = stats.len();
    (0..resamples)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ i as u64);
            let mut total = empty_stats(params);
            for _ in 0..n {
                add_stats(&mut total, &stats[rng.random_range(0..n)]);
            }
            report_from_stats(total, params).score
        })
        .collect()
}

/// Linear-interpolation percentile of sorted data, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        }
    }
}

fn sample_sd(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Point estimate on the full corpus with an empirical percentile
/// interval from the resamples. The interval is widened if needed so that
/// it always contains the point estimate.
pub fn bootstrap_ci<H: AsRef<str>, R: AsRef<str>>(
    pairs: &[(H, R)],
    params: &ChrFParams,
    config: &BootstrapConfig,
) -> Result<ScoreSummary, MetricsError> {
    if pairs.len() < 2 {
        return Err(MetricsError::TooFewSamples(pairs.len()));
    }
    let stats: Vec<Vec<NGramStats>> = pairs
        .iter()
        .map(|(h, r)| chrf_stats(h.as_ref(), r.as_ref(), params))
        .collect();
    let mut total = empty_stats(params);
    stats.iter().for_each(|s| add_stats(&mut total, s));
    let mean = report_from_stats(total, params).score;

    let mut scores = resample_stats(&stats, params, config.resamples.max(1), config.seed);
    scores.sort_by(f64::total_cmp);
    let alpha = (1.0 - config.confidence) / 2.0;
    let resample_mean = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok(ScoreSummary {
        mean,
        sd: sample_sd(&scores, resample_mean),
        ci_low: percentile(&scores, alpha).min(mean),
        ci_high: percentile(&scores, 1.0 - alpha).max(mean),
        n: pairs.len(),
        method: SummaryMethod::Bootstrap,
    })
}

/// Corpus chrF with a bootstrap interval; with fewer than two pairs the
/// interval collapses to the score itself.
pub fn corpus_summary<H: AsRef<str>, R: AsRef<str>>(
    pairs: &[(H, R)],
    params: &ChrFParams,
    config: &BootstrapConfig,
) -> Result<ScoreSummary, MetricsError> {
    if pairs.len() >= 2 {
        return bootstrap_ci(pairs, params, config);
    }
    let score = chrf_corpus(pairs, params)?.score;
    Ok(ScoreSummary {
        mean: score,
        sd: 0.0,
        ci_low: score,
        ci_high: score,
        n: pairs.len(),
        method: SummaryMethod::Bootstrap,
    })
}

/// Mean and sample standard deviation; the interval is mean ± sd.
pub fn summarize_scores(values: &[f64]) -> Result<ScoreSummary, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let sd = sample_sd(values, mean);
    Ok(ScoreSummary {
        mean,
        sd,
        ci_low: mean - sd,
        ci_high: mean + sd,
        n: values.len(),
        method: SummaryMethod::Moments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> ChrFParams {
        ChrFParams::default()
    }

    #[test]
    fn identical_and_disjoint() {
        assert_eq!(chrf_sentence("abc", "abc", &p()).score, 100.0);
        assert_eq!(chrf_sentence("def", "abc", &p()).score, 0.0);
        assert_eq!(chrf_sentence("", "abc", &p()).score, 0.0);
        assert_eq!(chrf_sentence("", "", &p()).score, 0.0);
    }

    #[test]
    fn cat_cab() {
        let r = chrf_sentence("cat", "cab", &p());
        let expected = (2.0 / 3.0 + 0.5 + 0.0) / 3.0;
        assert!((r.chr_p - expected).abs() < 1e-12);
        assert!((r.chr_r - expected).abs() < 1e-12);
        assert!((r.score - 38.889).abs() < 1e-3);
    }

    #[test]
    fn whitespace_switch() {
        assert_eq!(chrf_sentence("a b", "ab", &p()).score, 100.0);
        let with_ws = ChrFParams {
            include_whitespace: true,
            ..p()
        };
        assert!(chrf_sentence("a b", "ab", &with_ws).score < 100.0);
    }

    #[test]
    fn report_json_fields() {
        let json = serde_json::to_value(chrf_sentence("ab", "ab", &p())).unwrap();
        let mut keys: Vec<_> = json.as_object().unwrap().keys().cloned().collect();
        keys.sort();
        assert_eq!(keys, ["chrP", "chrR", "params", "per_order", "score"]);
    }

    #[test]
    fn corpus_single_pair_and_empty() {
        let s = chrf_sentence("kočka", "kočky", &p());
        let c = chrf_corpus(&[("kočka", "kočky")], &p()).unwrap();
        assert_eq!(s, c);
        assert_eq!(chrf_corpus::<&str, &str>(&[], &p()), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let pairs = [("a b c", "a b d"), ("xyz", "xyz"), ("pes", "psi")];
        let cfg = BootstrapConfig {
            resamples: 200,
            ..Default::default()
        };
        let a = bootstrap_ci(&pairs, &p(), &cfg).unwrap();
        let b = bootstrap_ci(&pairs, &p(), &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.ci_low <= a.mean && a.mean <= a.ci_high);
        let perfect = [("ab", "ab"), ("cd", "cd")];
        let s = bootstrap_ci(&perfect, &p(), &cfg).unwrap();
        assert_eq!((s.mean, s.half_width()), (100.0, 0.0));
        assert_eq!(s.to_string(), "100.0 ± 0.0");
        assert_eq!(bootstrap_ci(&[("a", "a")], &p(), &cfg), Err(MetricsError::TooFewSamples(1)));
    }

    #[test]
    fn moments() {
        let s = summarize_scores(&[6.0, 8.0, 10.0]).unwrap();
        assert_eq!(s.to_string(), "8.00 ± 2.00");
        assert_eq!(summarize_scores(&[7.8]).unwrap().to_string(), "7.80 ± 0.00");
        assert_eq!(summarize_scores(&[]), Err(MetricsError::EmptyInput));
    }

    #[test]
    fn percentile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 1.0), 4.0);
        assert!((percentile(&v, 0.5) - 2.5).abs() < 1e-12);
    }
}
