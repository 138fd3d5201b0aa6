//! Maximum-profit linear assignment.
//!
//! Shortest-augmenting-path Hungarian method on the profit matrix padded to a
//! square with zeros (every padded assignment contributes the same constant,
//! so the optimum over real pairs is unchanged). Among all optimal
//! assignments the lexicographically smallest one (row 0 takes the smallest
//! possible column, then row 1, ...) is returned.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::{Error, Result};

/// A partial permutation: each row matched to at most one column and vice versa.
#[derive(Debug, Clone, PartialEq)]
pub struct LapSolution {
    pub row_to_col: Vec<Option<usize>>,
    pub cols: usize,
    pub value: f64,
}

impl LapSolution {
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.row_to_col.iter().enumerate().filter_map(|(i, c)| c.map(|c| (i, c)))
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.row_to_col.len(), self.cols);
        for (i, j) in self.pairs() {
            m[(i, j)] = 1.0;
        }
        m
    }

    pub fn from_matrix(x: &DMatrix<f64>) -> Self {
        let row_to_col = (0..x.nrows()).map(|i| (0..x.ncols()).find(|&j| x[(i, j)] > 0.5)).collect();
        LapSolution { row_to_col, cols: x.ncols(), value: 0.0 }
    }
}

/// Maximizes `Σ profit[i][j]` over partial permutations with `min(n1, n2)` pairs.
pub fn solve_lap(profit: &DMatrix<f64>) -> Result<LapSolution> {
    let (n1, n2) = profit.shape();
    if let Some(k) = profit.iter().position(|v| v.is_nan()) {
        return Err(Error::NanProfit { row: k % n1, col: k / n1 });
    }
    if n1 == 0 || n2 == 0 {
        return Ok(LapSolution { row_to_col: vec![None; n1], cols: n2, value: 0.0 });
    }
    let n = n1.max(n2);
    let cost = |i: usize, j: usize| if i < n1 && j < n2 { -profit[(i, j)] } else { 0.0 };
    let scale = profit.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-9 * scale;

    // 1-based potentials, as in the classic formulation; p[j] is the row on column j.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
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
                if !used[j] {
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

    let mut col_of = vec![0usize; n];
    let mut row_of = vec![0usize; n];
    for j in 1..=n {
        col_of[p[j] - 1] = j - 1;
        row_of[j - 1] = p[j] - 1;
    }
    let tight = |i: usize, j: usize| cost(i, j) - u[i + 1] - v[j + 1] <= tol;
    lexicographic_fix(n, &tight, &mut col_of, &mut row_of);

    let row_to_col: Vec<Option<usize>> = (0..n1).map(|i| Some(col_of[i]).filter(|&j| j < n2)).collect();
    let value = row_to_col.iter().enumerate().filter_map(|(i, c)| c.map(|j| profit[(i, j)])).sum();
    Ok(LapSolution { row_to_col, cols: n2, value })
}

/// Moves the optimal matching to the lexicographically smallest perfect
/// matching of the tight (zero reduced cost) subgraph.
fn lexicographic_fix(n: usize, tight: &dyn Fn(usize, usize) -> bool, col_of: &mut [usize], row_of: &mut [usize]) {
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut freeable = vec![false; n];
    let mut queue = Vec::with_capacity(n);
    for i in 0..n {
        let own = col_of[i];
        if (0..own).all(|j| !tight(i, j) || row_of[j] < i) {
            continue;
        }
        // Columns that can be vacated by shifting later rows along tight edges
        // towards `own`, which row `i` gives up.
        freeable.iter_mut().for_each(|f| *f = false);
        parent.iter_mut().for_each(|p| *p = None);
        queue.clear();
        freeable[own] = true;
        queue.push(own);
        let mut head = 0;
        while head < queue.len() {
            let f = queue[head];
            head += 1;
            for r in i + 1..n {
                let c = col_of[r];
                if !freeable[c] && tight(r, f) {
                    freeable[c] = true;
                    parent[c] = Some((r, f));
                    queue.push(c);
                }
            }
        }
        let Some(target) = (0..n).find(|&j| freeable[j] && tight(i, j)) else {
            continue;
        };
        if target == own {
            continue;
        }
        let mut c = target;
        while let Some((r, f)) = parent[c] {
            col_of[r] = f;
            row_of[f] = r;
            c = f;
        }
        col_of[i] = target;
        row_of[target] = i;
    }
}

/// Rounds a relaxed assignment to the discrete one of largest overlap.
pub fn discretize(x: &DMatrix<f64>) -> Result<LapSolution> {
    solve_lap(x)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive maximum over partial permutations with `min(n1, n2)` pairs.
    pub(crate) fn brute_force(profit: &DMatrix<f64>) -> f64 {
        if profit.nrows() > profit.ncols() {
            return brute_force(&profit.transpose());
        }
        fn go(m: &DMatrix<f64>, row: usize, used: &mut Vec<bool>) -> f64 {
            if row == m.nrows() {
                return 0.0;
            }
            let mut best = f64::NEG_INFINITY;
            for j in 0..m.ncols() {
                if !used[j] {
                    used[j] = true;
                    best = best.max(m[(row, j)] + go(m, row + 1, used));
                    used[j] = false;
                }
            }
            best
        }
        go(profit, 0, &mut vec![false; profit.ncols()])
    }

    fn check_partial_permutation(s: &LapSolution, n1: usize, n2: usize) {
        let mut seen = vec![false; n2];
        for (_, j) in s.pairs() {
            assert!(!seen[j]);
            seen[j] = true;
        }
        assert_eq!(s.pairs().count(), n1.min(n2));
    }

    #[test]
    fn simple_examples() {
        let s = solve_lap(&DMatrix::identity(3, 3)).unwrap();
        assert_eq!(s.value, 3.0);
        assert_eq!(s.to_matrix(), DMatrix::identity(3, 3));
        let s = solve_lap(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).unwrap();
        assert_eq!(s.value, 4.0);
        assert_eq!(s.row_to_col, [Some(1), Some(0)]);
    }

    #[test]
    fn nan_is_rejected() {
        let mut m = DMatrix::zeros(2, 3);
        m[(1, 2)] = f64::NAN;
        assert_eq!(solve_lap(&m), Err(Error::NanProfit { row: 1, col: 2 }));
    }

    #[test]
    fn uniform_matrix_gives_identity() {
        for n in 1..7 {
            let x = DMatrix::from_element(n, n, 1.0 / n as f64);
            assert_eq!(discretize(&x).unwrap().to_matrix(), DMatrix::identity(n, n));
        }
        let wide = discretize(&DMatrix::from_element(2, 4, 0.25)).unwrap();
        assert_eq!(wide.row_to_col, [Some(0), Some(1)]);
    }

    #[test]
    fn permutation_is_a_fixed_point() {
        let perm = [3usize, 0, 4, 1, 2];
        let mut x = DMatrix::zeros(5, 5);
        for (i, &j) in perm.iter().enumerate() {
            x[(i, j)] = 1.0;
        }
        assert_eq!(discretize(&x).unwrap().to_matrix(), x);
    }

    #[test]
    fn random_integer_7x7_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..200 {
            let m = DMatrix::from_fn(7, 7, |_, _| rng.random_range(-20..20) as f64);
            let s = solve_lap(&m).unwrap();
            check_partial_permutation(&s, 7, 7);
            assert_eq!(s.value, brute_force(&m));
        }
    }

    #[test]
    fn doubly_stochastic_rounding_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let mut x = DMatrix::from_fn(6, 6, |_, _| rng.random_range(0.01..1.0));
            for _ in 0..200 {
                for i in 0..6 {
                    let s = x.row(i).sum();
                    x.row_mut(i).scale_mut(1.0 / s);
                }
                for j in 0..6 {
                    let s = x.column(j).sum();
                    x.column_mut(j).scale_mut(1.0 / s);
                }
            }
            let s = discretize(&x).unwrap();
            assert!((s.value - brute_force(&x)).abs() < 1e-12);
        }
    }

    #[test]
    fn ties_are_broken_lexicographically() {
        // rows 0 and 1 are interchangeable; row 0 must take the smaller column
        let m = DMatrix::from_row_slice(3, 3, &[5.0, 5.0, 0.0, 5.0, 5.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(solve_lap(&m).unwrap().row_to_col, [Some(0), Some(1), Some(2)]);
        let m = DMatrix::from_element(3, 5, 2.0);
        assert_eq!(solve_lap(&m).unwrap().row_to_col, [Some(0), Some(1), Some(2)]);
    }

    proptest! {
        #[test]
        fn optimal_on_small_rectangular(n1 in 1usize..8, n2 in 1usize..8, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = DMatrix::from_fn(n1, n2, |_, _| rng.random_range(-5..6) as f64);
            let s = solve_lap(&m).unwrap();
            check_partial_permutation(&s, n1, n2);
            prop_assert_eq!(s.value, brute_force(&m));
        }

        #[test]
        fn constant_shift_and_transpose(n1 in 1usize..7, n2 in 1usize..7, seed in any::<u64>(), shift in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = DMatrix::from_fn(n1, n2, |_, _| rng.random::<f64>());
            let s = solve_lap(&m).unwrap();
            let shifted = solve_lap(&m.add_scalar(shift)).unwrap();
            prop_assert_eq!(&shifted.row_to_col, &s.row_to_col);
            prop_assert!((shifted.value - s.value - shift * n1.min(n2) as f64).abs() < 1e-9);
            let t = solve_lap(&m.transpose()).unwrap();
            prop_assert_eq!(t.to_matrix(), s.to_matrix().transpose());
        }
    }
}
