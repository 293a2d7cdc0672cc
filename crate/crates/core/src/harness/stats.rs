use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::snapshot::SystemKind;

/// Family-wise significance level; split over the two tests per environment.
pub const FAMILY_ALPHA: f64 = 0.05;

/// Exact enumeration is used when both samples are at most this large.
const EXACT_LIMIT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// `U` of the first sample.
    pub u: f64,
    pub p_two_sided: f64,
}

/// Midranks (1-based) of `values`, and the tie-group sizes.
fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        ties.push(j - i + 1);
        i = j + 1;
    }
    (ranks, ties)
}

/// Two-sided Mann-Whitney U test.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Config("Mann-Whitney U needs two non-empty samples".into()));
    }
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let rank_sum_a: f64 = ranks[..na].iter().sum();
    let u = rank_sum_a - (na * (na + 1)) as f64 / 2.0;
    let mean = (na * nb) as f64 / 2.0;
    if ties.len() == 1 {
        return Ok(MannWhitney { u, p_two_sided: 1.0 });
    }
    let p = if na <= EXACT_LIMIT && nb <= EXACT_LIMIT {
        exact_p(&ranks, na, (u - mean).abs())
    } else {
        let n = (na + nb) as f64;
        let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
        let var = (na * nb) as f64 / 12.0 * ((n + 1.0) - tie_term);
        let dev = (u - mean).abs() - 0.5;
        if dev <= 0.0 {
            1.0
        } else {
            let z = dev / var.sqrt();
            let normal = Normal::new(0.0, 1.0).expect("standard normal");
            (2.0 * (1.0 - normal.cdf(z))).min(1.0)
        }
    };
    Ok(MannWhitney { u, p_two_sided: p })
}

/// Share of the `C(n, na)` rank assignments whose U deviates from its mean
/// at least as much as the observed one.
fn exact_p(ranks: &[f64], na: usize, observed_dev: f64) -> f64 {
    let n = ranks.len();
    let mean = (na * (n - na)) as f64 / 2.0;
    let offset = (na * (na + 1)) as f64 / 2.0;
    let (mut hits, mut total) = (0u64, 0u64);
    let mut idx: Vec<usize> = (0..na).collect();
    loop {
        let u = idx.iter().map(|&i| ranks[i]).sum::<f64>() - offset;
        total += 1;
        if (u - mean).abs() >= observed_dev - 1e-9 {
            hits += 1;
        }
        // Next combination in lexicographic order.
        let mut k = na;
        loop {
            if k == 0 {
                return hits as f64 / total as f64;
            }
            k -= 1;
            if idx[k] < n - na + k {
                break;
            }
        }
        idx[k] += 1;
        for j in k + 1..na {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = ">")]
    Better,
    #[serde(rename = "<")]
    Worse,
    #[serde(rename = "=")]
    NoDifference,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Better => ">",
            Verdict::Worse => "<",
            Verdict::NoDifference => "=",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FtpSummary {
    pub system: SystemKind,
    pub trials: usize,
    pub mean: f64,
    pub std: f64,
}

/// PPL-ST against one other system in one environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub other: SystemKind,
    pub u: f64,
    pub p_value: f64,
    pub alpha: f64,
    /// Read as "PPL-ST `verdict` other".
    pub verdict: Verdict,
}

/// Summaries per system and Bonferroni-corrected tests of PPL-ST against
/// PPL-DL and XCS. Systems absent from `ftp` are skipped.
pub fn compare_ftp(ftp: &BTreeMap<SystemKind, Vec<f64>>) -> Result<(Vec<FtpSummary>, Vec<Comparison>)> {
    for (system, values) in ftp {
        if values.len() < 2 {
            return Err(Error::Config(format!(
                "{system} has {} trial(s); comparisons need at least 2",
                values.len()
            )));
        }
    }
    let summaries = ftp
        .iter()
        .map(|(&system, v)| {
            let (mean, std) = mean_std(v);
            FtpSummary {
                system,
                trials: v.len(),
                mean,
                std,
            }
        })
        .collect();
    let alpha = FAMILY_ALPHA / 2.0;
    let mut comparisons = Vec::new();
    if let Some(st) = ftp.get(&SystemKind::PplSt) {
        for other in [SystemKind::PplDl, SystemKind::Xcs] {
            let Some(values) = ftp.get(&other) else { continue };
            let test = mann_whitney_u(st, values)?;
            let verdict = if test.p_two_sided < alpha {
                if mean_std(st).0 >= mean_std(values).0 {
                    Verdict::Better
                } else {
                    Verdict::Worse
                }
            } else {
                Verdict::NoDifference
            };
            comparisons.push(Comparison {
                other,
                u: test.u,
                p_value: test.p_two_sided,
                alpha,
                verdict,
            });
        }
    }
    Ok((summaries, comparisons))
}
