use super::CostMatrix;

/// Minimum-cost assignment of every row to a distinct column.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Column assigned to each row.
    pub row_to_col: Vec<usize>,
    /// Sum of the assigned costs.
    pub cost: f64,
}

/// Shortest augmenting path Hungarian method with dual potentials,
/// `O(n^2 m)` for `n <= m`. A tall matrix is solved through its transpose.
pub fn solve_assignment(cost: &CostMatrix) -> Assignment {
    let (n, m) = (cost.rows, cost.cols);
    if n == 0 {
        return Assignment {
            row_to_col: Vec::new(),
            cost: 0.0,
        };
    }
    if n > m {
        let t = CostMatrix {
            rows: m,
            cols: n,
            data: (0..m * n).map(|k| cost.get(k % n, k / n)).collect(),
        };
        let sol = solve_assignment(&t);
        let mut row_to_col = vec![usize::MAX; n];
        for (c, &r) in sol.row_to_col.iter().enumerate() {
            row_to_col[r] = c;
        }
        return Assignment {
            row_to_col,
            cost: sol.cost,
        };
    }

    // 1-based indices; column 0 is a sentinel.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    let mut minv = vec![0.0f64; m + 1];
    let mut used = vec![false; m + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let row = cost.row(i0 - 1);
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = row[j - 1] - u[i0] - v[j];
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
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=m {
        if owner[j] != 0 {
            row_to_col[owner[j] - 1] = j - 1;
        }
    }
    let total = row_to_col
        .iter()
        .enumerate()
        .map(|(i, &j)| cost.get(i, j))
        .sum();
    Assignment {
        row_to_col,
        cost: total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> CostMatrix {
        CostMatrix { rows, cols, data }
    }

    #[test]
    fn small_square() {
        let c = matrix(3, 3, vec![4., 1., 3., 2., 0., 5., 3., 2., 2.]);
        let a = solve_assignment(&c);
        assert_eq!(a.cost, 5.0);
        assert_eq!(a.row_to_col, vec![1, 0, 2]);
    }

    #[test]
    fn rectangular_both_ways() {
        let wide = matrix(2, 3, vec![5., 1., 9., 2., 8., 1.]);
        let a = solve_assignment(&wide);
        assert_eq!(a.cost, 2.0);
        assert_eq!(a.row_to_col, vec![1, 2]);
        let tall = matrix(3, 2, vec![5., 2., 1., 8., 9., 1.]);
        let b = solve_assignment(&tall);
        assert_eq!(b.cost, 2.0);
        assert_eq!(b.row_to_col[1], 0);
        assert_eq!(b.row_to_col[2], 1);
    }

    #[test]
    fn is_permutation() {
        let n = 12;
        let c = matrix(n, n, (0..n * n).map(|k| ((k * 7919) % 101) as f64).collect());
        let a = solve_assignment(&c);
        let mut seen = vec![false; n];
        for &j in &a.row_to_col {
            assert!(!seen[j]);
            seen[j] = true;
        }
    }
}
