//! Rectangular maximum-weight assignment (shortest augmenting path Hungarian).

use crate::scalar::Scalar;

/// Maximizes total weight over one-to-one row/column pairs.
///
/// `weights[r][c]` is `Some(w)` for an admissible pair. Every admissible pair
/// is padded with a bonus larger than any achievable total, so the result
/// first maximizes the number of pairs, then their summed weight.
/// Returns `(row, col)` pairs sorted by row.
pub fn max_weight_matching<T: Scalar>(weights: &[Vec<Option<T>>]) -> Vec<(usize, usize)> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let transpose = rows > cols;
    let (n, m) = if transpose { (cols, rows) } else { (rows, cols) };
    let at = |i: usize, j: usize| if transpose { weights[j][i] } else { weights[i][j] };

    let max_w = weights.iter().flatten().flatten().fold(T::zero(), |a, &w| a.max(w.abs()));
    let bonus = (max_w + T::one()) * T::from_usize(n + 1).expect("size representable");

    // Minimize cost = -(bonus + w); inadmissible pairs cost 0.
    let cost = |i: usize, j: usize| at(i, j).map_or(T::zero(), |w| -(bonus + w));

    let inf = T::infinity();
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
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

    let mut pairs: Vec<(usize, usize)> = (1..=m)
        .filter(|&j| p[j] != 0)
        .map(|j| (p[j] - 1, j - 1))
        .filter(|&(i, j)| at(i, j).is_some())
        .map(|(i, j)| if transpose { (j, i) } else { (i, j) })
        .collect();
    pairs.sort_unstable();
    pairs
}
