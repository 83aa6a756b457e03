//! Rank statistics: Spearman's rho, Kendall's tau-b and the Kruskal-Wallis H test.

use serde::Serialize;

use crate::diagnostics::Diagnostic;
use crate::error::{Error, Result};
use crate::robust::chi2_sf;

/// Largest pooled sample for which [`kruskal_wallis_exact`] enumerates every
/// assignment of observations to groups.
pub const EXACT_KW_LIMIT: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankVector {
    /// Average ranks starting at 1, in input order.
    pub ranks: Vec<f64>,
    /// Sizes of the tie groups with more than one member.
    pub ties: Vec<usize>,
}

impl RankVector {
    /// `sum (t^3 - t)` over tie groups.
    fn tie_term(&self) -> f64 {
        self.ties.iter().map(|&t| (t * t * t - t) as f64).sum()
    }
}

pub fn rank(values: &[f64]) -> RankVector {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        if end - start > 1 {
            ties.push(end - start);
        }
        start = end;
    }
    RankVector { ranks, ties }
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!(
            "length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 2 {
        return Err(Error::InsufficientData {
            needed: 2,
            got: a.len(),
        });
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Argument("NaN in rank input".into()));
    }
    Ok(())
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Pearson correlation of the average ranks.
pub fn spearman_rho(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    pearson(&rank(a).ranks, &rank(b).ranks)
        .ok_or_else(|| Error::UndefinedCorrelation("Spearman's rho of a constant vector".into()))
}

/// Tie-adjusted Kendall rank correlation.
pub fn kendall_tau_b(a: &[f64], b: &[f64]) -> Result<f64> {
    check_pair(a, b)?;
    let n = a.len();
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut tied_a, mut tied_b) = (0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let da = a[i].total_cmp(&a[j]) as i64;
            let db = b[i].total_cmp(&b[j]) as i64;
            if da == 0 {
                tied_a += 1;
            }
            if db == 0 {
                tied_b += 1;
            }
            match da * db {
                1 => concordant += 1,
                -1 => discordant += 1,
                _ => {}
            }
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    if tied_a == n0 || tied_b == n0 {
        return Err(Error::UndefinedCorrelation(
            "Kendall's tau of a constant vector".into(),
        ));
    }
    let denom = (((n0 - tied_a) as f64) * ((n0 - tied_b) as f64)).sqrt();
    Ok((((concordant - discordant) as f64) / denom).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KwResult {
    pub h_statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    pub diagnostics: Vec<Diagnostic>,
}

fn check_groups(groups: &[Vec<f64>]) -> Result<usize> {
    if groups.len() < 2 {
        return Err(Error::Argument(format!(
            "need at least 2 groups, got {}",
            groups.len()
        )));
    }
    if let Some(i) = groups.iter().position(|g| g.is_empty()) {
        return Err(Error::Argument(format!("group {i} is empty")));
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    if n < 3 {
        return Err(Error::InsufficientData { needed: 3, got: n });
    }
    if groups.iter().flatten().any(|v| v.is_nan()) {
        return Err(Error::Argument("NaN in group data".into()));
    }
    Ok(n)
}

/// Tie-corrected H from pooled ranks; `None` when every observation is tied.
fn h_statistic(sizes: &[usize], ranks: &[f64], tie_term: f64) -> Option<f64> {
    let n = ranks.len() as f64;
    let correction = 1.0 - tie_term / (n * n * n - n);
    if correction <= 0.0 {
        return None;
    }
    let mut offset = 0;
    let mut sum = 0.0;
    for &size in sizes {
        let r: f64 = ranks[offset..offset + size].iter().sum();
        sum += r * r / size as f64;
        offset += size;
    }
    let h = 12.0 / (n * (n + 1.0)) * sum - 3.0 * (n + 1.0);
    Some((h / correction).max(0.0))
}

/// Kruskal-Wallis H test with the chi-square approximation for the p-value.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<KwResult> {
    check_groups(groups)?;
    let dof = groups.len() - 1;
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let ranks = rank(&pooled);
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    match h_statistic(&sizes, &ranks.ranks, ranks.tie_term()) {
        Some(h) => Ok(KwResult {
            h_statistic: h,
            dof,
            p_value: chi2_sf(h, dof as u32).clamp(0.0, 1.0),
            diagnostics: vec![],
        }),
        None => Ok(KwResult {
            h_statistic: 0.0,
            dof,
            p_value: 1.0,
            diagnostics: vec![Diagnostic::AllTied],
        }),
    }
}

/// Kruskal-Wallis H with an exact permutation p-value: the share of all
/// assignments of the pooled observations to groups of the same sizes whose
/// H is at least the observed one. Pooled size is capped at [`EXACT_KW_LIMIT`].
pub fn kruskal_wallis_exact(groups: &[Vec<f64>]) -> Result<KwResult> {
    let n = check_groups(groups)?;
    if n > EXACT_KW_LIMIT {
        return Err(Error::Argument(format!(
            "exact test limited to {EXACT_KW_LIMIT} observations, got {n}"
        )));
    }
    let approx = kruskal_wallis(groups)?;
    if !approx.diagnostics.is_empty() {
        return Ok(approx);
    }
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let ranks = rank(&pooled);
    let tie_term = ranks.tie_term();
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let observed = approx.h_statistic;

    let mut label = vec![usize::MAX; n];
    let mut remaining = sizes.clone();
    let (mut hits, mut total) = (0u64, 0u64);
    enumerate(0, &mut label, &mut remaining, &mut |label| {
        let mut arranged = Vec::with_capacity(n);
        for g in 0..sizes.len() {
            arranged.extend((0..n).filter(|&i| label[i] == g).map(|i| ranks.ranks[i]));
        }
        let h = h_statistic(&sizes, &arranged, tie_term).unwrap_or(0.0);
        total += 1;
        if h >= observed - 1e-12 {
            hits += 1;
        }
    });
    Ok(KwResult {
        p_value: hits as f64 / total as f64,
        ..approx
    })
}

fn enumerate(
    i: usize,
    label: &mut [usize],
    remaining: &mut [usize],
    visit: &mut impl FnMut(&[usize]),
) {
    if i == label.len() {
        visit(label);
        return;
    }
    for g in 0..remaining.len() {
        if remaining[g] > 0 {
            remaining[g] -= 1;
            label[i] = g;
            enumerate(i + 1, label, remaining, visit);
            remaining[g] += 1;
        }
    }
}
