use std::collections::HashSet;
use std::hash::Hash;

use super::MetricError;

/// Distinct terms across all lists over the total number of list entries.
pub fn topic_diversity<T: Eq + Hash>(lists: &[Vec<T>]) -> Result<f64, MetricError> {
    let total: usize = lists.iter().map(Vec::len).sum();
    if lists.is_empty() || total == 0 {
        return Err(MetricError::EmptyInput("keyword lists"));
    }
    let distinct: HashSet<&T> = lists.iter().flatten().collect();
    Ok(distinct.len() as f64 / total as f64)
}

/// Extrapolated rank-biased overlap of two rankings without duplicates.
///
/// For lists of different length the shorter list is treated as seen only up
/// to its own depth, following Webber, Moffat & Zobel (2010).
pub fn rbo_ext<T: Eq + Hash>(a: &[T], b: &[T], p: f64) -> Result<f64, MetricError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(MetricError::Persistence(p));
    }
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let (s, l) = (short.len(), long.len());
    if s == 0 {
        return Ok(if l == 0 { 1.0 } else { 0.0 });
    }

    let mut seen_short: HashSet<&T> = HashSet::new();
    let mut seen_long: HashSet<&T> = HashSet::new();
    let mut overlap = 0usize;
    let mut sum = 0.0;
    let mut x_s = 0.0;
    let mut weight = 1.0;
    for d in 1..=l {
        weight *= p;
        let lx = &long[d - 1];
        if d <= s {
            let sx = &short[d - 1];
            if sx == lx {
                overlap += 1;
            } else {
                if seen_long.contains(sx) {
                    overlap += 1;
                }
                if seen_short.contains(lx) {
                    overlap += 1;
                }
            }
            seen_short.insert(sx);
            seen_long.insert(lx);
        } else if seen_short.contains(lx) {
            overlap += 1;
        }
        let x_d = overlap as f64;
        if d == s {
            x_s = x_d;
        }
        sum += x_d / d as f64 * weight;
        if d > s {
            sum += x_s * (d - s) as f64 / (s * d) as f64 * weight;
        }
    }
    let x_l = overlap as f64;
    let tail = ((x_l - x_s) / l as f64 + x_s / s as f64) * p.powi(l as i32);
    Ok(((1.0 - p) / p * sum + tail).clamp(0.0, 1.0))
}

/// One minus the mean pairwise RBO. A single list has no overlapping partner
/// and scores 1.
pub fn inverted_rbo<T: Eq + Hash>(lists: &[Vec<T>], p: f64) -> Result<f64, MetricError> {
    if lists.is_empty() {
        return Err(MetricError::EmptyInput("keyword lists"));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(MetricError::Persistence(p));
    }
    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..lists.len() {
        for j in i + 1..lists.len() {
            total += rbo_ext(&lists[i], &lists[j], p)?;
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Ok(1.0);
    }
    Ok((1.0 - total / pairs as f64).clamp(0.0, 1.0))
}
