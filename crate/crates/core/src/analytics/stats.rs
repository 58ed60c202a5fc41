//! Rank-based tests for comparing treatments over matched seeds.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Lower and upper reporting bounds for post-hoc p-values.
pub const P_CLAMP: (f64, f64) = (0.001, 0.9);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatTestResult {
    pub statistic: f64,
    pub p_value: f64,
    /// Every block fully tied; the test carries no information.
    pub degenerate: bool,
    /// Nemenyi pairwise p-values (symmetric, unit diagonal).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pairwise: Option<Vec<Vec<f64>>>,
}

/// Average ranks (1-based) with ties sharing the mean of their positions.
/// Also returns the sizes of the tie groups.
pub fn rank_average(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && values[idx[j]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        for &k in &idx[i..j] {
            ranks[k] = r;
        }
        ties.push(j - i);
        i = j;
    }
    (ranks, ties)
}

fn check_matrix(m: &[Vec<f64>]) -> Result<(usize, usize)> {
    let n = m.len();
    let k = m.first().map_or(0, |r| r.len());
    if n < 2 || k < 3 {
        return Err(Error::Contract(format!(
            "need at least 2 blocks and 3 treatments, got {n}x{k}"
        )));
    }
    if m.iter().any(|r| r.len() != k) {
        return Err(Error::Contract(
            "blocks have different numbers of treatments".into(),
        ));
    }
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Domain("matrix contains non-finite values".into()));
    }
    Ok((n, k))
}

/// Friedman test over `n` blocks (rows) × `k` treatments (columns), tie corrected.
pub fn friedman(m: &[Vec<f64>]) -> Result<StatTestResult> {
    let (n, k) = check_matrix(m)?;
    let mut rank_sums = vec![0.0; k];
    let mut tie_term = 0.0;
    for row in m {
        let (r, ties) = rank_average(row);
        for (s, v) in rank_sums.iter_mut().zip(r) {
            *s += v;
        }
        tie_term += ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>();
    }
    let (nf, kf) = (n as f64, k as f64);
    let ssq: f64 = rank_sums.iter().map(|r| r * r).sum();
    let num = 12.0 / (nf * kf * (kf + 1.0)) * ssq - 3.0 * nf * (kf + 1.0);
    let den = 1.0 - tie_term / (nf * kf * (kf * kf - 1.0));
    if den <= 1e-12 {
        return Ok(StatTestResult {
            statistic: 0.0,
            p_value: 1.0,
            degenerate: true,
            pairwise: None,
        });
    }
    let statistic = (num / den).max(0.0);
    let chi = ChiSquared::new(kf - 1.0).expect("k >= 3");
    Ok(StatTestResult {
        statistic,
        p_value: chi.sf(statistic),
        degenerate: false,
        pairwise: None,
    })
}

/// Nemenyi post-hoc p-values on mean-rank differences, clamped to [`P_CLAMP`].
pub fn nemenyi(m: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let (n, k) = check_matrix(m)?;
    let mut mean_ranks = vec![0.0; k];
    for row in m {
        for (s, v) in mean_ranks.iter_mut().zip(rank_average(row).0) {
            *s += v / n as f64;
        }
    }
    let scale = (k as f64 * (k as f64 + 1.0) / (6.0 * n as f64)).sqrt();
    let mut p = vec![vec![1.0; k]; k];
    for i in 0..k {
        for j in (i + 1)..k {
            let q = (mean_ranks[i] - mean_ranks[j]).abs() / scale * std::f64::consts::SQRT_2;
            let v = studentized_range_sf(q, k).clamp(P_CLAMP.0, P_CLAMP.1);
            p[i][j] = v;
            p[j][i] = v;
        }
    }
    Ok(p)
}

/// Friedman test with the Nemenyi matrix attached.
pub fn friedman_nemenyi(m: &[Vec<f64>]) -> Result<StatTestResult> {
    let mut r = friedman(m)?;
    r.pairwise = Some(nemenyi(m)?);
    Ok(r)
}

fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Upper tail of the range of `k` standard normals, `P(Q > q)` with infinite degrees of freedom.
///
/// `k ∫ φ(z) [Φ(z)^{k-1} − (Φ(z) − Φ(z−q))^{k-1}] dz`, integrated adaptively.
pub fn studentized_range_sf(q: f64, k: usize) -> f64 {
    assert!(k >= 2, "range needs at least two samples");
    if q <= 0.0 {
        return 1.0;
    }
    let km1 = (k - 1) as i32;
    let f = |z: f64| {
        let a = norm_cdf(z);
        let b = (a - norm_cdf(z - q)).max(0.0);
        norm_pdf(z) * (a.powi(km1) - b.powi(km1))
    };
    // φ is negligible outside ±9; the integrand's mass sits in [-9, 9 + q].
    let mut total = 0.0;
    let edges = [-9.0, -3.0, 0.0, 3.0, q.min(9.0) + 3.0, 9.0 + q];
    for w in edges.windows(2) {
        if w[1] > w[0] {
            total += adaptive_gk(&f, w[0], w[1], 1e-13, 40);
        }
    }
    (k as f64 * total).clamp(0.0, 1.0)
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const K15_W: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728,
];
const G7_W: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = K15_W[7] * fc;
    let mut g = G7_W[3] * fc;
    for i in 0..7 {
        let x = h * GK_NODES[i];
        let s = f(c - x) + f(c + x);
        k += K15_W[i] * s;
        if i % 2 == 1 {
            g += G7_W[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adaptive_gk(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (v, err) = gk15(f, a, b);
    if err <= tol || depth == 0 {
        return v;
    }
    let m = 0.5 * (a + b);
    adaptive_gk(f, a, m, tol / 2.0, depth - 1) + adaptive_gk(f, m, b, tol / 2.0, depth - 1)
}

/// One-sided Wilcoxon signed-rank test of `x > y` on paired samples.
///
/// Zero differences are dropped. Without ties or zeros (n ≤ 50) the exact null
/// distribution is used; small samples with ties use exact sign-flip
/// enumeration; otherwise the tie-corrected normal approximation.
pub fn wilcoxon_greater(x: &[f64], y: &[f64]) -> Result<StatTestResult> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::Contract(
            "paired samples must have equal, nonzero length".into(),
        ));
    }
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite paired difference".into()));
    }
    let n_total = d.len();
    let nz: Vec<f64> = d.iter().copied().filter(|&v| v != 0.0).collect();
    let n_zero = n_total - nz.len();
    let abs: Vec<f64> = nz.iter().map(|v| v.abs()).collect();
    let (ranks, ties) = rank_average(&abs);
    let r_plus: f64 = nz
        .iter()
        .zip(&ranks)
        .filter(|(v, _)| **v > 0.0)
        .map(|(_, r)| r)
        .sum();
    let has_ties = ties.iter().any(|&t| t > 1);
    let n = nz.len();
    if n == 0 {
        return Ok(StatTestResult {
            statistic: 0.0,
            p_value: 1.0,
            degenerate: true,
            pairwise: None,
        });
    }

    let p_value = if !has_ties && n_zero == 0 && n_total <= 50 {
        exact_signed_rank_sf(n, r_plus.floor() as usize)
    } else if n_total <= 13 {
        // Every sign assignment of the nonzero differences is equally likely.
        let mut hits = 0u64;
        for mask in 0u32..(1u32 << n) {
            let s: f64 = (0..n)
                .filter(|&i| mask >> i & 1 == 1)
                .map(|i| ranks[i])
                .sum();
            if s >= r_plus * (1.0 - 1e-14) - 1e-14 {
                hits += 1;
            }
        }
        hits as f64 / (1u64 << n) as f64
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let tie_adj: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_adj;
        let z = (r_plus - mean) / var.sqrt();
        1.0 - norm_cdf(z)
    };
    Ok(StatTestResult {
        statistic: r_plus,
        p_value: p_value.clamp(0.0, 1.0),
        degenerate: false,
        pairwise: None,
    })
}

/// `P(T+ >= t)` for the signed-rank statistic of `n` untied differences.
fn exact_signed_rank_sf(n: usize, t: usize) -> f64 {
    let max = n * (n + 1) / 2;
    if t > max {
        return 0.0;
    }
    // counts[s] = number of subsets of {1..n} with sum s.
    let mut counts = vec![0.0f64; max + 1];
    counts[0] = 1.0;
    for r in 1..=n {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    let total = 2f64.powi(n as i32);
    counts[t..].iter().sum::<f64>() / total
}
