//! Problem data for `min_{X in Pi} <A X B - 2C, X>` and exact evaluation.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{QapError, Result};

/// Largest order accepted by [`brute_force_opt`].
pub const MAX_ORACLE_N: usize = 10;

/// A symmetric QAP instance: flows `A`, distances `B` and linear costs `C`.
#[derive(Clone, Debug, PartialEq)]
pub struct QapInstance {
    name: String,
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    integral: bool,
}

impl QapInstance {
    /// Builds an instance, rejecting non-square, mismatched or asymmetric data.
    /// A missing `c` is the zero matrix.
    pub fn new(
        name: impl Into<String>,
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = a.nrows();
        if n < 2 {
            return Err(QapError::TooSmall(n));
        }
        for (m, label) in [(&a, "A"), (&b, "B")] {
            if m.nrows() != n || m.ncols() != n {
                return Err(QapError::DimensionMismatch {
                    expected: n,
                    found: if m.nrows() != n { m.nrows() } else { m.ncols() },
                });
            }
            check_symmetric(m, label)?;
        }
        let c = c.unwrap_or_else(|| DMatrix::zeros(n, n));
        if c.nrows() != n || c.ncols() != n {
            return Err(QapError::DimensionMismatch {
                expected: n,
                found: if c.nrows() != n { c.nrows() } else { c.ncols() },
            });
        }
        let integral = [&a, &b, &c]
            .iter()
            .all(|m| m.iter().all(|v| v.is_finite() && v.fract() == 0.0));
        Ok(Self {
            name: name.into(),
            a,
            b,
            c,
            integral,
        })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// True iff every entry of `A`, `B` and `C` is an integer.
    pub fn integral(&self) -> bool {
        self.integral
    }

    pub fn has_linear_term(&self) -> bool {
        self.c.iter().any(|&v| v != 0.0)
    }

    /// Relabels facilities: row/column `i` of the result is row/column
    /// `sigma[i]` of `A` (and row `sigma[i]` of `C`).
    pub fn relabel(&self, sigma: &Permutation) -> Result<Self> {
        let n = self.n();
        sigma.check_len(n)?;
        let s = sigma.as_slice();
        let a = DMatrix::from_fn(n, n, |i, j| self.a[(s[i], s[j])]);
        let c = DMatrix::from_fn(n, n, |i, l| self.c[(s[i], l)]);
        QapInstance::new(self.name.clone(), a, self.b.clone(), Some(c))
    }
}

fn check_symmetric(m: &DMatrix<f64>, label: &'static str) -> Result<()> {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if m[(i, j)] != m[(j, i)] {
                return Err(QapError::Asymmetric {
                    matrix: label,
                    row: i,
                    col: j,
                });
            }
        }
    }
    Ok(())
}

/// A permutation stored as `perm[i]` = column of the 1 in row `i` of `X`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation(Vec<usize>);

impl Permutation {
    pub fn new(perm: Vec<usize>) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in &perm {
            if p >= n {
                return Err(QapError::InvalidPermutation(format!(
                    "index {p} out of range for length {n}"
                )));
            }
            if std::mem::replace(&mut seen[p], true) {
                return Err(QapError::InvalidPermutation(format!("index {p} repeated")));
            }
        }
        Ok(Self(perm))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        let mut inv = vec![0; self.len()];
        for (i, &p) in self.0.iter().enumerate() {
            inv[p] = i;
        }
        Self(inv)
    }

    /// `(self ∘ other)[i] = self[other[i]]`.
    pub fn compose(&self, other: &Permutation) -> Self {
        Self(other.0.iter().map(|&i| self.0[i]).collect())
    }

    /// The 0/1 permutation matrix `X` with `X[i, perm[i]] = 1`.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut x = DMatrix::zeros(n, n);
        for (i, &p) in self.0.iter().enumerate() {
            x[(i, p)] = 1.0;
        }
        x
    }

    /// Reads a permutation back from a 0/1 matrix; `None` if it is not one.
    pub fn from_matrix(x: &DMatrix<f64>) -> Option<Self> {
        if x.nrows() != x.ncols() {
            return None;
        }
        let mut perm = Vec::with_capacity(x.nrows());
        for i in 0..x.nrows() {
            let row: Vec<usize> = (0..x.ncols()).filter(|&j| x[(i, j)] == 1.0).collect();
            if row.len() != 1 || (0..x.ncols()).any(|j| x[(i, j)] != 0.0 && x[(i, j)] != 1.0) {
                return None;
            }
            perm.push(row[0]);
        }
        Self::new(perm).ok()
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.len() != n {
            return Err(QapError::DimensionMismatch {
                expected: n,
                found: self.len(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = QapError;

    fn try_from(v: Vec<usize>) -> Result<Self> {
        Permutation::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.0
    }
}

impl fmt::Display for Permutation {
    /// One-based, space separated, as in QAPLIB solution files.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, p) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}", p + 1)?;
        }
        Ok(())
    }
}

/// `<A X B - 2C, X>` for the permutation matrix `X` of `p`, i.e.
/// `sum_ij A_ij B_{p(i) p(j)} - 2 sum_i C_{i p(i)}`.
pub fn qap_objective(inst: &QapInstance, p: &Permutation) -> Result<f64> {
    let n = inst.n();
    p.check_len(n)?;
    let s = p.as_slice();
    let (a, b, c) = (inst.a(), inst.b(), inst.c());
    let mut quad = 0.0;
    for j in 0..n {
        for i in 0..n {
            quad += a[(i, j)] * b[(s[i], s[j])];
        }
    }
    let lin: f64 = (0..n).map(|i| c[(i, s[i])]).sum();
    Ok(quad - 2.0 * lin)
}

/// Exact optimum by enumerating all `n!` permutations in lexicographic
/// order; ties keep the lexicographically smallest permutation.
pub fn brute_force_opt(inst: &QapInstance) -> Result<(f64, Permutation)> {
    let n = inst.n();
    if n > MAX_ORACLE_N {
        return Err(QapError::TooLargeForOracle {
            n,
            max: MAX_ORACLE_N,
        });
    }
    let mut search = Enumeration {
        inst,
        perm: vec![0; n],
        used: vec![false; n],
        best: f64::INFINITY,
        best_perm: Vec::new(),
    };
    search.descend(0, 0.0);
    let best = Permutation::new(search.best_perm)?;
    let value = qap_objective(inst, &best)?;
    Ok((value, best))
}

struct Enumeration<'a> {
    inst: &'a QapInstance,
    perm: Vec<usize>,
    used: Vec<bool>,
    best: f64,
    best_perm: Vec<usize>,
}

impl Enumeration<'_> {
    fn descend(&mut self, depth: usize, partial: f64) {
        let n = self.perm.len();
        if depth == n {
            if partial < self.best {
                self.best = partial;
                self.best_perm = self.perm.clone();
            }
            return;
        }
        let (a, b, c) = (self.inst.a(), self.inst.b(), self.inst.c());
        for loc in 0..n {
            if self.used[loc] {
                continue;
            }
            // cost of placing facility `depth` at `loc` against everything placed so far
            let mut delta = a[(depth, depth)] * b[(loc, loc)] - 2.0 * c[(depth, loc)];
            for j in 0..depth {
                delta += 2.0 * a[(depth, j)] * b[(loc, self.perm[j])];
            }
            self.used[loc] = true;
            self.perm[depth] = loc;
            self.descend(depth + 1, partial + delta);
            self.used[loc] = false;
        }
    }
}
