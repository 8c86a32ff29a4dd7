use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use super::{AssessmentError, Dimension, PacketKey, Rating};

/// Mean score on `dimension` over all ratings.
pub fn dimension_mean(ratings: &[Rating], dimension: Dimension) -> Result<f64, AssessmentError> {
    if ratings.is_empty() {
        return Err(AssessmentError::Empty(dimension.as_str().into()));
    }
    let sum: f64 = ratings.iter().map(|r| f64::from(r.scores.get(dimension))).sum();
    Ok(sum / ratings.len() as f64)
}

/// Mean of the four dimension means.
pub fn overall_mean(ratings: &[Rating]) -> Result<f64, AssessmentError> {
    let mut sum = 0.0;
    for d in Dimension::ALL {
        sum += dimension_mean(ratings, d)?;
    }
    Ok(sum / 4.0)
}

/// Share of ratings that flag their topic; 0 for no ratings.
pub fn flag_rate(ratings: &[Rating]) -> f64 {
    if ratings.is_empty() {
        return 0.0;
    }
    ratings.iter().filter(|r| r.flag).count() as f64 / ratings.len() as f64
}

/// Ordinal Krippendorff's alpha over a units x raters table with missing
/// cells. Units with fewer than two values carry no pairing information and
/// are dropped. Returns 1 when there is no expected disagreement.
pub fn krippendorff_alpha_ordinal_table(units: &[Vec<Option<u32>>]) -> Result<f64, AssessmentError> {
    let pairable: Vec<Vec<u32>> = units
        .iter()
        .map(|u| u.iter().flatten().copied().collect::<Vec<_>>())
        .filter(|v| v.len() >= 2)
        .collect();
    if pairable.len() < 2 {
        return Err(AssessmentError::TooFew {
            what: "units with two or more ratings",
            need: 2,
            got: pairable.len(),
        });
    }
    let cats: Vec<u32> = pairable.iter().flatten().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let idx = |v: u32| cats.binary_search(&v).expect("category present");
    let c = cats.len();
    let mut o = vec![vec![0.0f64; c]; c];
    for values in &pairable {
        let w = 1.0 / (values.len() as f64 - 1.0);
        for (i, &a) in values.iter().enumerate() {
            for (j, &b) in values.iter().enumerate() {
                if i != j {
                    o[idx(a)][idx(b)] += w;
                }
            }
        }
    }
    let n_c: Vec<f64> = o.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = n_c.iter().sum();
    let delta2 = |a: usize, b: usize| {
        let (lo, hi) = (a.min(b), a.max(b));
        let between: f64 = n_c[lo..=hi].iter().sum();
        let d = between - (n_c[lo] + n_c[hi]) / 2.0;
        d * d
    };
    let mut observed = 0.0;
    let mut expected = 0.0;
    for a in 0..c {
        for b in 0..c {
            let d = delta2(a, b);
            observed += o[a][b] * d;
            expected += n_c[a] * n_c[b] * d;
        }
    }
    if expected == 0.0 {
        return Ok(1.0);
    }
    Ok(1.0 - (n - 1.0) * observed / expected)
}

/// Alpha on one dimension with packets as units and raters as coders.
pub fn krippendorff_alpha_ordinal(ratings: &[Rating], dimension: Dimension) -> Result<f64, AssessmentError> {
    let raters: BTreeSet<&str> = ratings.iter().map(|r| r.rater.as_str()).collect();
    if raters.len() < 2 {
        return Err(AssessmentError::TooFew {
            what: "raters",
            need: 2,
            got: raters.len(),
        });
    }
    let raters: Vec<&str> = raters.into_iter().collect();
    let mut table: BTreeMap<&str, Vec<Option<u32>>> = BTreeMap::new();
    for r in ratings {
        let col = raters.binary_search(&r.rater.as_str()).expect("rater listed");
        table.entry(&r.packet).or_insert_with(|| vec![None; raters.len()])[col] = Some(u32::from(r.scores.get(dimension)));
    }
    let units: Vec<Vec<Option<u32>>> = table.into_values().collect();
    krippendorff_alpha_ordinal_table(&units)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairedMethod {
    T,
    Wilcoxon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedResult {
    pub method: PairedMethod,
    pub n: usize,
    /// Mean of `a - b`.
    pub mean_difference: f64,
    /// t statistic, or `W+ - W-` for the signed-rank test.
    pub statistic: f64,
    /// Sum of ranks of positive differences (signed-rank test only).
    pub w_plus: Option<f64>,
    pub p_value: f64,
    pub note: Option<String>,
}

/// Two-sided paired test on `a - b`.
pub fn paired_comparison(a: &[f64], b: &[f64], method: PairedMethod) -> Result<PairedResult, AssessmentError> {
    if a.len() != b.len() {
        return Err(AssessmentError::Unpaired { a: a.len(), b: b.len() });
    }
    let n = a.len();
    if n < 2 {
        return Err(AssessmentError::TooFew {
            what: "pairs",
            need: 2,
            got: n,
        });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = d.iter().sum::<f64>() / n as f64;
    let mut out = PairedResult {
        method,
        n,
        mean_difference: mean,
        statistic: 0.0,
        w_plus: None,
        p_value: 1.0,
        note: None,
    };
    if d.iter().all(|&x| x == 0.0) {
        out.note = Some("all differences are zero".into());
        if method == PairedMethod::Wilcoxon {
            out.w_plus = Some(0.0);
        }
        return Ok(out);
    }
    match method {
        PairedMethod::T => {
            let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
            if var == 0.0 {
                out.statistic = mean.signum() * f64::INFINITY;
                out.p_value = 0.0;
                out.note = Some(format!("zero variance: every pair differs by exactly {mean}"));
            } else {
                let t = mean / (var / n as f64).sqrt();
                let dist = StudentsT::new(0.0, 1.0, n as f64 - 1.0).expect("valid degrees of freedom");
                out.statistic = t;
                out.p_value = (2.0 * dist.sf(t.abs())).min(1.0);
            }
        }
        PairedMethod::Wilcoxon => {
            let (w_plus, w_minus, p, note) = signed_rank(&d);
            out.statistic = w_plus - w_minus;
            out.w_plus = Some(w_plus);
            out.p_value = p;
            out.note = note;
        }
    }
    Ok(out)
}

/// Signed-rank sums and two-sided p-value. Zero differences are dropped.
/// Up to 25 non-zero pairs the p-value is exact under the permutation
/// distribution of the (mid)ranks; above that a normal approximation with
/// tie correction is used.
fn signed_rank(d: &[f64]) -> (f64, f64, f64, Option<String>) {
    let mut nz: Vec<f64> = d.iter().copied().filter(|&x| x != 0.0).collect();
    let dropped = d.len() - nz.len();
    nz.sort_by(|x, y| x.abs().total_cmp(&y.abs()));
    let n = nz.len();
    // Doubled midranks keep tie groups integral.
    let mut rank2 = vec![0u64; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && nz[j + 1].abs() == nz[i].abs() {
            j += 1;
        }
        let r2 = (i + 1 + j + 1) as u64;
        for r in &mut rank2[i..=j] {
            *r = r2;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let w2_plus: u64 = nz.iter().zip(&rank2).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let w2_total: u64 = rank2.iter().sum();
    let w_plus = w2_plus as f64 / 2.0;
    let w_minus = (w2_total - w2_plus) as f64 / 2.0;
    let mut notes = Vec::new();
    if dropped > 0 {
        notes.push(format!("{dropped} zero difference(s) dropped"));
    }
    let p = if n <= 25 {
        let mut counts = vec![0.0f64; w2_total as usize + 1];
        counts[0] = 1.0;
        let mut reach = 0usize;
        for &r in &rank2 {
            let r = r as usize;
            for s in (0..=reach).rev() {
                if counts[s] > 0.0 {
                    counts[s + r] += counts[s];
                }
            }
            reach += r;
        }
        let total: f64 = counts.iter().sum();
        let w = w2_plus as usize;
        let lower: f64 = counts[..=w].iter().sum::<f64>() / total;
        let upper: f64 = counts[w..].iter().sum::<f64>() / total;
        notes.push("exact distribution".into());
        (2.0 * lower.min(upper)).min(1.0)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
        let z = (w_plus - mean) / var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        notes.push("normal approximation with tie correction".into());
        (2.0 * normal.sf(z.abs())).min(1.0)
    };
    (w_plus, w_minus, p, Some(notes.join("; ")))
}

/// Per-topic score of one condition, averaged over raters. `None` averages
/// the four dimensions.
pub fn condition_topic_scores(
    ratings: &[Rating],
    key: &PacketKey,
    condition: &str,
    dimension: Option<Dimension>,
) -> Result<BTreeMap<usize, f64>, AssessmentError> {
    let mut acc: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for r in ratings {
        let entry = key.entry(&r.packet).ok_or_else(|| AssessmentError::UnknownPacket(r.packet.clone()))?;
        if entry.condition != condition {
            continue;
        }
        let v = match dimension {
            Some(d) => f64::from(r.scores.get(d)),
            None => Dimension::ALL.iter().map(|&d| f64::from(r.scores.get(d))).sum::<f64>() / 4.0,
        };
        let slot = acc.entry(entry.topic).or_default();
        slot.0 += v;
        slot.1 += 1;
    }
    Ok(acc.into_iter().map(|(t, (s, n))| (t, s / n as f64)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition: String,
    pub ratings: usize,
    pub raters: usize,
    pub dimension_means: BTreeMap<Dimension, f64>,
    pub overall: f64,
    pub flag_rate: f64,
    /// `None` when there are too few raters or units.
    pub alpha: BTreeMap<Dimension, Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    /// A dimension name or `overall`.
    pub measure: String,
    pub topics: usize,
    pub t: Option<PairedResult>,
    pub wilcoxon: Option<PairedResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentReport {
    pub conditions: Vec<ConditionSummary>,
    pub comparisons: Vec<Comparison>,
}

/// Unblinds ratings through `key` and summarises every condition, plus paired
/// comparisons between every pair of conditions.
pub fn assess(ratings: &[Rating], key: &PacketKey) -> Result<AssessmentReport, AssessmentError> {
    let mut conditions: Vec<&str> = key.conditions();
    conditions.sort_unstable();
    let mut by_condition: BTreeMap<&str, Vec<Rating>> = BTreeMap::new();
    for r in ratings {
        let entry = key.entry(&r.packet).ok_or_else(|| AssessmentError::UnknownPacket(r.packet.clone()))?;
        by_condition.entry(entry.condition.as_str()).or_default().push(r.clone());
    }
    let mut summaries = Vec::new();
    for &c in &conditions {
        let Some(rs) = by_condition.get(c) else {
            continue;
        };
        let mut dimension_means = BTreeMap::new();
        let mut alpha = BTreeMap::new();
        for d in Dimension::ALL {
            dimension_means.insert(d, dimension_mean(rs, d)?);
            alpha.insert(d, krippendorff_alpha_ordinal(rs, d).ok());
        }
        summaries.push(ConditionSummary {
            condition: c.to_owned(),
            ratings: rs.len(),
            raters: rs.iter().map(|r| r.rater.as_str()).collect::<BTreeSet<_>>().len(),
            dimension_means,
            overall: overall_mean(rs)?,
            flag_rate: flag_rate(rs),
            alpha,
        });
    }
    let mut comparisons = Vec::new();
    for (i, &a) in conditions.iter().enumerate() {
        for &b in &conditions[i + 1..] {
            let measures = std::iter::once(None).chain(Dimension::ALL.into_iter().map(Some));
            for m in measures {
                let sa = condition_topic_scores(ratings, key, a, m)?;
                let sb = condition_topic_scores(ratings, key, b, m)?;
                let (xa, xb): (Vec<f64>, Vec<f64>) =
                    sa.iter().filter_map(|(t, &v)| sb.get(t).map(|&w| (v, w))).unzip();
                comparisons.push(Comparison {
                    a: a.to_owned(),
                    b: b.to_owned(),
                    measure: m.map_or("overall", Dimension::as_str).to_owned(),
                    topics: xa.len(),
                    t: paired_comparison(&xa, &xb, PairedMethod::T).ok(),
                    wilcoxon: paired_comparison(&xa, &xb, PairedMethod::Wilcoxon).ok(),
                });
            }
        }
    }
    Ok(AssessmentReport {
        conditions: summaries,
        comparisons,
    })
}
