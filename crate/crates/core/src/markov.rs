//! Validated transition matrices, stationary distributions, and the
//! Poisson-equation / potential-function solvers used by every variance route.

use nalgebra::{DMatrix, DVector};

use crate::error::{ChainError, Result};

/// Row sums must be this close to 1 before renormalization.
pub const ROW_SUM_TOL: f64 = 1e-9;
/// Entries below this are treated as exact zeros for reachability purposes.
pub const POSITIVE_ENTRY_TOL: f64 = 1e-15;
/// Residual bound for Poisson solutions.
pub const POISSON_RESIDUAL_TOL: f64 = 1e-9;
/// Max-norm residual bound for pi P = pi.
pub const STATIONARY_RESIDUAL_TOL: f64 = 1e-10;

/// A validated row-stochastic N x N transition kernel with state labels.
///
/// Rows are renormalized to sum to 1 exactly at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    labels: Vec<String>,
    rows: DMatrix<f64>,
}

impl TransitionMatrix {
    /// Builds a transition matrix, validating shape, labels, signs, and row sums.
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<String>) -> Result<Self> {
        let n = rows.len();
        let cols = rows.first().map_or(0, |r| r.len());
        if n == 0 || labels.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(ChainError::NotSquare {
                rows: n,
                cols,
                labels: labels.len(),
            });
        }
        for (i, label) in labels.iter().enumerate() {
            if labels[..i].contains(label) {
                return Err(ChainError::DuplicateLabel(label.clone()));
            }
        }
        let mut m = DMatrix::zeros(n, n);
        for (i, row) in rows.iter().enumerate() {
            let mut sum = 0.0;
            for (j, &v) in row.iter().enumerate() {
                if v < 0.0 {
                    return Err(ChainError::NegativeEntry {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
                sum += v;
            }
            // NaN-propagating comparison: a NaN sum must fail here.
            if !((sum - 1.0).abs() <= ROW_SUM_TOL) {
                return Err(ChainError::RowSumOutOfTolerance { row: i, sum });
            }
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v / sum;
            }
        }
        Ok(Self { labels, rows: m })
    }

    /// Bypasses validation. Exists only so negative-control tooling can
    /// inject a corrupted kernel.
    #[doc(hidden)]
    pub fn from_rows_unchecked(rows: Vec<Vec<f64>>, labels: Vec<String>) -> Self {
        let n = rows.len();
        let m = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
        Self { labels, rows: m }
    }

    pub fn n_states(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.rows[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rows
    }

    /// Applies the kernel to a column vector: (P f)(i) = sum_j P(i,j) f(j).
    pub fn apply(&self, f: &Observable) -> Observable {
        Observable::from_vector(&self.rows * f.vector())
    }

    /// True iff the digraph with an edge i -> j whenever P(i,j) > 0 is
    /// strongly connected. Periodic chains count as irreducible.
    pub fn is_irreducible(&self) -> bool {
        let n = self.n_states();
        self.reach_count(false) == n && self.reach_count(true) == n
    }

    fn reach_count(&self, transpose: bool) -> usize {
        let n = self.n_states();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let w = if transpose {
                    self.rows[(j, i)]
                } else {
                    self.rows[(i, j)]
                };
                if w > POSITIVE_ENTRY_TOL && !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count
    }
}

/// A probability distribution over the state space.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    weights: DVector<f64>,
}

impl ProbabilityVector {
    /// Validates nonnegativity and normalization, then renormalizes exactly.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(ChainError::InvalidParams(
                "probability vector must be nonempty".into(),
            ));
        }
        for &w in &weights {
            if !(w >= 0.0) {
                return Err(ChainError::InvalidParams(format!(
                    "probability weight {w} is negative or non-finite"
                )));
            }
        }
        let sum: f64 = weights.iter().sum();
        if !((sum - 1.0).abs() <= ROW_SUM_TOL) {
            return Err(ChainError::InvalidParams(format!(
                "probability weights sum to {sum}"
            )));
        }
        let v = DVector::from_vec(weights) / sum;
        Ok(Self { weights: v })
    }

    pub(crate) fn from_normalized(weights: DVector<f64>) -> Self {
        Self { weights }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        self.weights.as_slice()
    }

    pub(crate) fn vector(&self) -> &DVector<f64> {
        &self.weights
    }

    /// pi(f) = sum_i pi(i) f(i).
    pub fn expectation(&self, f: &Observable) -> f64 {
        self.weights.dot(f.vector())
    }
}

/// A real-valued function on states, stored as a length-N column vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    values: DVector<f64>,
}

impl Observable {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        for &v in &values {
            if !v.is_finite() {
                return Err(ChainError::InvalidParams(format!(
                    "observable entry {v} is not finite"
                )));
            }
        }
        Ok(Self {
            values: DVector::from_vec(values),
        })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            values: DVector::zeros(n),
        }
    }

    pub fn ones(n: usize) -> Self {
        Self {
            values: DVector::from_element(n, 1.0),
        }
    }

    /// The indicator of a single state.
    pub fn indicator(n: usize, i: usize) -> Self {
        let mut v = DVector::zeros(n);
        v[i] = 1.0;
        Self { values: v }
    }

    pub(crate) fn from_vector(values: DVector<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        self.values.as_slice()
    }

    pub(crate) fn vector(&self) -> &DVector<f64> {
        &self.values
    }
}

/// The unique solution of (I - P) u = g with pi(u) = 0, plus its residuals.
#[derive(Debug, Clone)]
pub struct PoissonSolution {
    pub u: Observable,
    /// Max norm of (I - P) u - g.
    pub residual: f64,
    /// pi(u); must vanish.
    pub pi_u: f64,
}

/// Solves pi P = pi, sum pi = 1 by replacing one equation of (I - P^t) x = 0
/// with the normalization row.
pub fn stationary(p: &TransitionMatrix) -> Result<ProbabilityVector> {
    if !p.is_irreducible() {
        return Err(ChainError::NotIrreducible);
    }
    let n = p.n_states();
    let mut a = DMatrix::identity(n, n) - p.matrix().transpose();
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    let x = a.lu().solve(&b).ok_or(ChainError::SingularSystem)?;
    let sum: f64 = x.iter().sum();
    if !(sum > 0.0) {
        return Err(ChainError::SingularSystem);
    }
    let pi = x / sum;
    if pi.iter().any(|&w| !(w > 0.0)) {
        return Err(ChainError::SingularSystem);
    }
    // max-norm residual of pi P - pi
    let residual = (p.matrix().transpose() * &pi - &pi).amax();
    if residual > STATIONARY_RESIDUAL_TOL {
        return Err(ChainError::SingularSystem);
    }
    Ok(ProbabilityVector::from_normalized(pi))
}

/// f_bar = f - pi(f) 1. Exactly zero when f is exactly constant.
pub fn center(f: &Observable, pi: &ProbabilityVector) -> Result<Observable> {
    if f.len() != pi.len() {
        return Err(ChainError::LengthMismatch {
            expected: pi.len(),
            found: f.len(),
        });
    }
    let first = f.get(0);
    if f.values().iter().all(|&v| v == first) {
        return Ok(Observable::zeros(f.len()));
    }
    let pif = pi.expectation(f);
    Ok(Observable::from_vector(f.vector().add_scalar(-pif)))
}

/// Solves the Poisson equation (I - P) u = g with the normalization pi(u) = 0.
///
/// The square system ((I - P) + 1 pi) u = g is nonsingular for irreducible P,
/// and its solution automatically satisfies pi(u) = 0 when pi(g) = 0.
pub fn solve_poisson(
    p: &TransitionMatrix,
    pi: &ProbabilityVector,
    g: &Observable,
) -> Result<PoissonSolution> {
    let n = p.n_states();
    if g.len() != n {
        return Err(ChainError::LengthMismatch {
            expected: n,
            found: g.len(),
        });
    }
    if pi.len() != n {
        return Err(ChainError::LengthMismatch {
            expected: n,
            found: pi.len(),
        });
    }
    if !p.is_irreducible() {
        return Err(ChainError::NotIrreducible);
    }
    let pig = pi.expectation(g);
    if pig.abs() > POISSON_RESIDUAL_TOL {
        return Err(ChainError::NotCentered(pig));
    }
    let ones = DVector::from_element(n, 1.0);
    let m = DMatrix::identity(n, n) - p.matrix() + &ones * pi.vector().transpose();
    let u = m.lu().solve(g.vector()).ok_or(ChainError::SingularSystem)?;
    let residual = ((DMatrix::identity(n, n) - p.matrix()) * &u - g.vector()).amax();
    let pi_u = pi.vector().dot(&u);
    if residual > POISSON_RESIDUAL_TOL || pi_u.abs() > POISSON_RESIDUAL_TOL {
        return Err(ChainError::SingularSystem);
    }
    Ok(PoissonSolution {
        u: Observable::from_vector(u),
        residual,
        pi_u,
    })
}

/// The potential U_f(., i0) = E_i[ sum_{k < T_i0} f(X_k) ], obtained from the
/// linear system ((I - P) + P delta_i0) U = f, i.e. I - P with column i0 of P
/// zeroed out.
pub fn potential(p: &TransitionMatrix, f: &Observable, i0: usize) -> Result<Observable> {
    let n = p.n_states();
    if i0 >= n {
        return Err(ChainError::InvalidStart(i0));
    }
    if f.len() != n {
        return Err(ChainError::LengthMismatch {
            expected: n,
            found: f.len(),
        });
    }
    if !p.is_irreducible() {
        return Err(ChainError::NotIrreducible);
    }
    let mut m = DMatrix::identity(n, n) - p.matrix();
    for i in 0..n {
        m[(i, i0)] = if i == i0 { 1.0 } else { 0.0 };
    }
    let u = m.lu().solve(f.vector()).ok_or(ChainError::SingularSystem)?;
    Ok(Observable::from_vector(u))
}

/// U^2_f(., i0) = E_i[ (I_{T_i0}(f))^2 ], expressed as the potential of
/// 2 f U_f - f^2.
pub fn potential_second_moment(
    p: &TransitionMatrix,
    f: &Observable,
    i0: usize,
) -> Result<Observable> {
    let uf = potential(p, f, i0)?;
    let h = Observable::from_vector(
        2.0 * f.vector().component_mul(uf.vector()) - f.vector().component_mul(f.vector()),
    );
    potential(p, &h, i0)
}

/// E_i[T_i0] for every start state i; the entry at i0 is 1 / pi(i0).
pub fn expected_hitting_times(p: &TransitionMatrix, i0: usize) -> Result<Observable> {
    potential(p, &Observable::ones(p.n_states()), i0)
}
