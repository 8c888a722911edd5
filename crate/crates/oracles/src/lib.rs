//! Slow, obviously-correct reference implementations for tests.

/// Minimum-cost assignment for a square cost matrix (Hungarian algorithm,
/// O(n³)). Returns the column assigned to each row.
pub fn assignment(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based potentials with a sentinel column 0.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Wasserstein-1 between two uniform empirical distributions as a minimum
/// cost coupling. Each point of `p` is split into `L/|p|` unit masses and
/// each point of `q` into `L/|q|`, with `L = lcm(|p|, |q|)`; an optimal
/// assignment of units then gives the optimal transport plan.
pub fn wasserstein_coupling(p: &[f64], q: &[f64]) -> f64 {
    assert!(!p.is_empty() && !q.is_empty());
    let l = p.len() / gcd(p.len(), q.len()) * q.len();
    let expand = |x: &[f64]| -> Vec<f64> {
        x.iter()
            .flat_map(|&v| std::iter::repeat_n(v, l / x.len()))
            .collect()
    };
    let (a, b) = (expand(p), expand(q));
    let cost: Vec<Vec<f64>> = a
        .iter()
        .map(|&x| b.iter().map(|&y| (x - y).abs()).collect())
        .collect();
    let plan = assignment(&cost);
    plan.iter()
        .enumerate()
        .map(|(i, &j)| cost[i][j])
        .sum::<f64>()
        / l as f64
}

/// AUC as the fraction of (abnormal, normal) pairs ranked correctly, ties
/// counting one half.
pub fn auc_pairwise(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

/// Central differences `(f(x + h·e_i) − f(x − h·e_i)) / 2h` for every `i`.
pub fn central_differences(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + h;
            let up = f(&probe);
            probe[i] = x[i] - h;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `|a − b| / max(|a| + |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(floor)
}
