/// Arithmetic mean; zero for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (divisor `n - 1`); zero for fewer than two values.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Ranks with rank 1 for the largest score. Tied scores share the average of
/// the ranks they span.
pub fn midranks(scores: &[f64], tol: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; scores.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && (scores[order[start]] - scores[order[end]]).abs() <= tol {
            end += 1;
        }
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Outcome of a sign test over datasets.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SignTest {
    pub wins: usize,
    pub ties: usize,
    pub losses: usize,
    /// Wins needed for significance; `n + 1` when unreachable.
    pub critical_wins: usize,
    pub significant: bool,
}

/// One-sided sign test at level `alpha`. Ties are split evenly between wins
/// and losses; an odd tie counts as a loss.
pub fn sign_test(wins: usize, ties: usize, losses: usize, alpha: f64) -> SignTest {
    let effective_wins = wins + ties / 2;
    let n = wins + ties + losses;
    let critical_wins = critical_wins(n, alpha);
    SignTest {
        wins,
        ties,
        losses,
        critical_wins,
        significant: effective_wins >= critical_wins,
    }
}

/// Smallest `w` with `P(X >= w) <= alpha` for `X ~ Bin(n, 1/2)`.
pub fn critical_wins(n: usize, alpha: f64) -> usize {
    let pmf = binomial_half_pmf(n);
    let mut tail = 0.0;
    let mut critical = n + 1;
    for w in (0..=n).rev() {
        tail += pmf[w];
        if tail <= alpha + 1e-12 {
            critical = w;
        } else {
            break;
        }
    }
    critical
}

fn binomial_half_pmf(n: usize) -> Vec<f64> {
    // log-space keeps large n finite
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=n).scan(0.0, |acc, k| {
            *acc += (k as f64).ln();
            Some(*acc)
        }))
        .collect();
    let ln_half_n = n as f64 * 0.5f64.ln();
    (0..=n)
        .map(|k| (ln_fact[n] - ln_fact[k] - ln_fact[n - k] + ln_half_n).exp())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn std_uses_sample_divisor() {
        assert!((sample_std(&[1.0, 2.0, 3.0, 4.0]) - 1.290_994_448_735_805_6).abs() < 1e-12);
        assert_eq!(sample_std(&[5.0]), 0.0);
    }

    #[test]
    fn midranks_share_ties() {
        assert_eq!(midranks(&[0.9, 0.8, 0.9, 0.7], 1e-12), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn known_critical_values() {
        assert_eq!(critical_wins(4, 0.05), 5);
        assert_eq!(critical_wins(5, 0.05), 5);
        assert_eq!(critical_wins(10, 0.05), 9);
        assert_eq!(critical_wins(15, 0.05), 12);
    }

    #[test]
    fn ties_are_split() {
        let t = sign_test(5, 3, 1, 0.05);
        assert_eq!(t.critical_wins, critical_wins(9, 0.05));
        assert!(!t.significant);
        assert!(!sign_test(4, 0, 4, 0.05).significant);
        assert!(sign_test(5, 0, 0, 0.05).significant);
    }
}
