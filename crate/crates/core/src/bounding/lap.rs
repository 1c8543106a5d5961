//! Dense linear assignment by shortest augmenting paths with potentials.
//!
//! Ties are broken towards the lexicographically smallest row-to-column
//! assignment among all optimal ones.

use nalgebra::DMatrix;

use crate::instance::Permutation;

/// Optimal assignment for `cost` (minimizing unless `maximize`).
///
/// # Panics
///
/// If `cost` is not square or has a non-finite entry.
pub fn lap_solve(cost: &DMatrix<f64>, maximize: bool) -> Permutation {
    assert_eq!(cost.nrows(), cost.ncols(), "assignment cost must be square");
    assert!(cost.iter().all(|v| v.is_finite()), "assignment cost must be finite");
    let n = cost.nrows();
    if n == 0 {
        return Permutation::identity(0);
    }
    let c = if maximize { -cost } else { cost.clone() };
    let (assign, u, v) = hungarian(&c);

    let scale = c.amax().max(1.0);
    let tol = 1e-9 * scale;
    let tight = DMatrix::from_fn(n, n, |i, j| c[(i, j)] - u[i] - v[j] <= tol);
    let perm = lexicographic_matching(&tight).unwrap_or(assign);
    Permutation::new(perm).expect("assignment is a permutation")
}

/// Returns the row assignment and dual potentials `u`, `v` with
/// `c_ij - u_i - v_j >= 0`, tight on the assignment.
fn hungarian(c: &DMatrix<f64>) -> (Vec<usize>, Vec<f64>, Vec<f64>) {
    let n = c.nrows();
    // 1-based with a virtual column 0
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
                let cur = c[(i0 - 1, j - 1)] - u[i0] - v[j];
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
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    (assign, u[1..].to_vec(), v[1..].to_vec())
}

/// Lexicographically smallest perfect matching using only `allowed` edges.
fn lexicographic_matching(allowed: &DMatrix<bool>) -> Option<Vec<usize>> {
    let n = allowed.nrows();
    let mut fixed: Vec<usize> = Vec::with_capacity(n);
    let mut taken = vec![false; n];
    for row in 0..n {
        let mut chosen = None;
        for col in 0..n {
            if taken[col] || !allowed[(row, col)] {
                continue;
            }
            taken[col] = true;
            if completes(allowed, row + 1, &taken) {
                chosen = Some(col);
                break;
            }
            taken[col] = false;
        }
        fixed.push(chosen?);
    }
    Some(fixed)
}

/// Whether rows `from..n` can be matched into the columns not yet `taken`.
fn completes(allowed: &DMatrix<bool>, from: usize, taken: &[bool]) -> bool {
    let n = allowed.nrows();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    for row in from..n {
        let mut seen = taken.to_vec();
        if !augment(allowed, row, &mut seen, &mut owner) {
            return false;
        }
    }
    true
}

fn augment(
    allowed: &DMatrix<bool>,
    row: usize,
    seen: &mut [bool],
    owner: &mut [Option<usize>],
) -> bool {
    for col in 0..allowed.ncols() {
        if seen[col] || !allowed[(row, col)] {
            continue;
        }
        seen[col] = true;
        if owner[col].is_none_or(|r| augment(allowed, r, seen, owner)) {
            owner[col] = Some(row);
            return true;
        }
    }
    false
}

/// Permutation matrix nearest to `xbar` in Frobenius norm.
pub fn nearest_permutation(xbar: &DMatrix<f64>) -> Permutation {
    lap_solve(xbar, true)
}
