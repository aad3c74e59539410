//! Optimal one-to-one assignment (Hungarian method) on rectangular
//! weight matrices.

/// Finds the row→column matching that maximizes the summed weight.
///
/// `weights` is row-major with `rows` rows; every row must have the same
/// length. When the matrix is not square, the smaller side is fully
/// matched and the extra rows (or columns) stay unassigned.
pub fn max_weight_matching(weights: &[Vec<f64>]) -> Vec<Option<usize>> {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    let max = weights
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    // minimize (max - w), transposing so that rows <= cols
    if rows <= cols {
        let cost: Vec<Vec<f64>> = weights
            .iter()
            .map(|r| r.iter().map(|w| max - w).collect())
            .collect();
        min_cost_rows(&cost).into_iter().map(Some).collect()
    } else {
        let cost: Vec<Vec<f64>> = (0..cols)
            .map(|c| weights.iter().map(|r| max - r[c]).collect())
            .collect();
        let col_to_row = min_cost_rows(&cost);
        let mut out = vec![None; rows];
        for (c, r) in col_to_row.into_iter().enumerate() {
            out[r] = Some(c);
        }
        out
    }
}

/// Total weight of a matching returned by [`max_weight_matching`].
pub fn matching_weight(weights: &[Vec<f64>], matching: &[Option<usize>]) -> f64 {
    matching
        .iter()
        .enumerate()
        .filter_map(|(r, c)| c.map(|c| weights[r][c]))
        .sum()
}

/// Shortest augmenting path with potentials; requires rows <= cols.
/// Returns the column assigned to each row.
fn min_cost_rows(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let m = cost[0].len();
    debug_assert!(n <= m);
    // 1-based indexing; column 0 is the virtual source
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for col in 1..=m {
                if used[col] {
                    continue;
                }
                let reduced = cost[r0 - 1][col - 1] - u[r0] - v[col];
                if reduced < minv[col] {
                    minv[col] = reduced;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for col in 0..=m {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let prev = way[col0];
            owner[col0] = owner[prev];
            col0 = prev;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for col in 1..=m {
        if owner[col] != 0 {
            assignment[owner[col] - 1] = col - 1;
        }
    }
    assignment
}
