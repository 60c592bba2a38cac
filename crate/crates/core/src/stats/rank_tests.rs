use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::StatsError;

/// Combined sample sizes up to this bound (without ties) get an exact p-value.
pub const EXACT_MAX_COMBINED: usize = 12;

/// Ascending average ranks (1-based); tied values share the mean of their positions.
pub(crate) fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j hold 1-based ranks i+1..=j
        let rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = rank;
        }
        i = j;
    }
    ranks
}

/// Â₁₂: probability that a draw from `x` beats a draw from `y`, ties counting half.
pub fn vargha_delaney_a12(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.is_empty() || y.is_empty() {
        return Err(StatsError::Empty("Â₁₂ sample"));
    }
    let mut wins = 0u64;
    let mut ties = 0u64;
    for a in x {
        for b in y {
            if a > b {
                wins += 1;
            } else if a == b {
                ties += 1;
            }
        }
    }
    Ok((wins as f64 + 0.5 * ties as f64) / (x.len() * y.len()) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// U for the first sample: `R_x − n(n+1)/2`.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub exact: bool,
}

/// Null distribution of U as frequency counts, index = U value.
fn u_frequencies(n: usize, m: usize) -> Vec<u64> {
    // freq[i][j][u]: arrangements of i x's and j y's with U = u.
    let mut freq: Vec<Vec<Vec<u64>>> = vec![vec![Vec::new(); m + 1]; n + 1];
    for i in 0..=n {
        for j in 0..=m {
            if i == 0 || j == 0 {
                freq[i][j] = vec![1];
                continue;
            }
            let mut cur = vec![0u64; i * j + 1];
            // Largest element is an x: it beats all j y's.
            for (u, c) in freq[i - 1][j].iter().enumerate() {
                cur[u + j] += c;
            }
            // Largest element is a y: contributes nothing.
            for (u, c) in freq[i][j - 1].iter().enumerate() {
                cur[u] += c;
            }
            freq[i][j] = cur;
        }
    }
    std::mem::take(&mut freq[n][m])
}

fn exact_p(u: f64, n: usize, m: usize) -> f64 {
    let freq = u_frequencies(n, m);
    let total: u64 = freq.iter().sum();
    let u = u.round() as usize;
    let lower: u64 = freq[..=u].iter().sum();
    let upper: u64 = freq[u..].iter().sum();
    (2.0 * lower.min(upper) as f64 / total as f64).min(1.0)
}

/// Two-sided Mann-Whitney U test.
///
/// Exact null distribution when the combined sample has at most
/// [`EXACT_MAX_COMBINED`] values and no ties; otherwise the normal
/// approximation with tie-corrected variance and continuity correction.
/// All-identical samples report p = 1.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<MannWhitney, StatsError> {
    if x.is_empty() || y.is_empty() {
        return Err(StatsError::Empty("Mann-Whitney sample"));
    }
    let (n, m) = (x.len(), y.len());
    let combined: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = average_ranks(&combined);
    let rank_sum_x: f64 = ranks[..n].iter().sum();
    let u = rank_sum_x - (n * (n + 1)) as f64 / 2.0;

    let mut sorted = combined.clone();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut has_ties = false;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        if j - i > 1 {
            has_ties = true;
            tie_term += t * t * t - t;
        }
        i = j;
    }

    if n + m <= EXACT_MAX_COMBINED && !has_ties {
        return Ok(MannWhitney {
            u,
            p: exact_p(u, n, m),
            exact: true,
        });
    }

    let big_n = (n + m) as f64;
    let nm = (n * m) as f64;
    let variance = nm / 12.0 * ((big_n + 1.0) - tie_term / (big_n * (big_n - 1.0)));
    let p = if variance <= 0.0 {
        1.0
    } else {
        let z = ((u - nm / 2.0).abs() - 0.5).max(0.0) / variance.sqrt();
        erfc(z / std::f64::consts::SQRT_2).min(1.0)
    };
    Ok(MannWhitney { u, p, exact: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn a12_cases() {
        assert_eq!(vargha_delaney_a12(&[1.0, 2.0], &[1.0, 3.0]).unwrap(), 0.375);
        assert_eq!(vargha_delaney_a12(&[3.0, 1.0, 2.0], &[1.0, 2.0, 3.0]).unwrap(), 0.5);
        assert_eq!(vargha_delaney_a12(&[5.0, 6.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert!(vargha_delaney_a12(&[], &[1.0]).is_err());
    }

    #[test]
    fn average_ranks_share_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn exact_small_example() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert!(r.exact);
        assert_eq!(r.u, 0.0);
        assert!((r.p - 2.0 / 6.0).abs() < 1e-12);
        let s = mann_whitney_u(&[3.0, 4.0], &[1.0, 2.0]).unwrap();
        assert_eq!(s.u, 4.0);
        assert_eq!(s.p, r.p);
    }

    #[test]
    fn u_distribution_totals_binomial() {
        let f = u_frequencies(3, 4);
        assert_eq!(f.iter().sum::<u64>(), 35);
        assert_eq!(f.len(), 13);
        // symmetric about nm/2
        for u in 0..f.len() {
            assert_eq!(f[u], f[f.len() - 1 - u]);
        }
    }

    #[test]
    fn identical_samples_p_one() {
        let r = mann_whitney_u(&[5.0; 20], &[5.0; 20]).unwrap();
        assert_eq!(r.p, 1.0);
        assert_eq!(r.u, 200.0);
    }

    #[test]
    fn normal_approximation_matches_reference() {
        // scipy.stats.mannwhitneyu(x, y, method="asymptotic", use_continuity=True)
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let y: Vec<f64> = (8..=17).map(f64::from).collect();
        let r = mann_whitney_u(&x, &y).unwrap();
        assert!(!r.exact);
        assert_eq!(r.u, 4.5);
        assert!((r.p - 0.000660373923292275).abs() < 1e-12, "{}", r.p);

        // 14 values: just past the exact bound
        let r = mann_whitney_u(
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0],
            &[4.5, 8.0, 9.0, 10.0, 11.0, 12.0, 13.0],
        )
        .unwrap();
        assert!(!r.exact);
        assert_eq!(r.u, 3.0);
        assert!((r.p - 0.007290358091535638).abs() < 1e-12, "{}", r.p);
    }

    proptest! {
        #[test]
        fn a12_antisymmetry_and_u_identity(
            x in prop::collection::vec(0u8..10, 1..15),
            y in prop::collection::vec(0u8..10, 1..15),
        ) {
            let x: Vec<f64> = x.into_iter().map(f64::from).collect();
            let y: Vec<f64> = y.into_iter().map(f64::from).collect();
            let a = vargha_delaney_a12(&x, &y).unwrap();
            let b = vargha_delaney_a12(&y, &x).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-12);
            let r = mann_whitney_u(&x, &y).unwrap();
            let s = mann_whitney_u(&y, &x).unwrap();
            let nm = (x.len() * y.len()) as f64;
            prop_assert!((r.u - nm * a).abs() < 1e-9);
            prop_assert!((r.u + s.u - nm).abs() < 1e-9);
            prop_assert!((r.p - s.p).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&r.p));
        }
    }
}
