//! Corpus-level BLEU-4 over delexicalized responses.

use std::collections::HashMap;

use crate::error::EvalError;

pub const MAX_ORDER: usize = 4;
/// Added to a zero clipped-match count so a single empty order does not zero the score.
pub const SMOOTHING_EPSILON: f64 = 1e-9;

/// Lowercases, splits punctuation off words and splits on whitespace.
/// Underscores stay inside words so `[hotel_name]` becomes `[`, `hotel_name`, `]`.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut spaced = String::with_capacity(text.len() + 8);
    for ch in text.chars().flat_map(char::to_lowercase) {
        if ch.is_ascii_punctuation() && ch != '_' {
            spaced.push(' ');
            spaced.push(ch);
            spaced.push(' ');
        } else {
            spaced.push(ch);
        }
    }
    spaced.split_whitespace().map(str::to_string).collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if tokens.len() >= n {
        for gram in tokens.windows(n) {
            *counts.entry(gram).or_insert(0) += 1;
        }
    }
    counts
}

/// Sufficient statistics of a corpus: clipped matches and hypothesis
/// n-gram totals per order, plus hypothesis and reference lengths.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct BleuStats {
    pub matches: [u64; MAX_ORDER],
    pub totals: [u64; MAX_ORDER],
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl BleuStats {
    pub fn add_sentence(&mut self, hypothesis: &str, reference: &str) {
        let hyp = tokenize(hypothesis);
        let reference = tokenize(reference);
        self.hyp_len += hyp.len() as u64;
        self.ref_len += reference.len() as u64;
        for n in 1..=MAX_ORDER {
            let hyp_counts = ngram_counts(&hyp, n);
            let ref_counts = ngram_counts(&reference, n);
            for (gram, count) in &hyp_counts {
                let clip = ref_counts.get(gram).copied().unwrap_or(0);
                self.matches[n - 1] += (*count).min(clip) as u64;
            }
            self.totals[n - 1] += hyp.len().saturating_sub(n - 1) as u64;
        }
    }

    /// BLEU in [0, 100].
    pub fn score(&self) -> f64 {
        if self.hyp_len == 0 {
            return 0.0;
        }
        let mut log_sum = 0.0;
        for n in 0..MAX_ORDER {
            let mut matched = self.matches[n] as f64;
            if self.matches[n] == 0 {
                matched += SMOOTHING_EPSILON;
            }
            let total = self.totals[n].max(1) as f64;
            log_sum += (matched / total).ln();
        }
        let c = self.hyp_len as f64;
        let r = self.ref_len as f64;
        let brevity = if c > r { 1.0 } else { (1.0 - r / c).exp() };
        100.0 * brevity * (log_sum / MAX_ORDER as f64).exp()
    }
}

pub fn corpus_bleu<H, R>(hypotheses: &[H], references: &[R]) -> Result<f64, EvalError>
where
    H: AsRef<str>,
    R: AsRef<str>,
{
    if hypotheses.len() != references.len() {
        return Err(EvalError::LengthMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    let mut stats = BleuStats::default();
    for (h, r) in hypotheses.iter().zip(references) {
        stats.add_sentence(h.as_ref(), r.as_ref());
    }
    Ok(stats.score())
}
