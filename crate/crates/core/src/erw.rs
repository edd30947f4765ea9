//! Finite-memory Elephant Random Walk models: the disordered (unordered jar)
//! and ordered (sliding list) chains, their closed-form stationary laws,
//! variances, and the lag-correlation recursion of the ordered model.

use nalgebra::DMatrix;

use crate::error::{ChainError, Result};
use crate::markov::{Observable, ProbabilityVector, TransitionMatrix};

/// Largest L for which the ordered chain is materialized as a dense matrix
/// (2^14 = 16384 states). Closed forms and step simulation accept any L.
pub const ORDERED_L_MAX: usize = 14;

/// Memory length L and acceptance probability p, shared by both models.
/// p = 1 is rejected: the disordered walk degenerates to a biased walk and
/// the ordered chain has two absorbing states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErwParams {
    l: usize,
    p: f64,
}

impl ErwParams {
    pub fn new(l: usize, p: f64) -> Result<Self> {
        if l < 1 {
            return Err(ChainError::InvalidParams("L must be at least 1".into()));
        }
        if !(p >= 0.0 && p < 1.0) {
            return Err(ChainError::InvalidParams(format!(
                "p must satisfy 0 <= p < 1, got {p}"
            )));
        }
        Ok(Self { l, p })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn p(&self) -> f64 {
        self.p
    }
}

/// Disordered-model state: the sign just produced and the number of +1's in
/// the jar. Valid states are (-1, j) for 0 <= j <= L-1 and (+1, j) for
/// 1 <= j <= L, exactly 2L in total.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DisorderedState {
    pub sign: i8,
    pub pluses: usize,
}

impl DisorderedState {
    pub fn validate(&self, l: usize) -> Result<()> {
        let ok = match self.sign {
            -1 => self.pluses <= l - 1,
            1 => (1..=l).contains(&self.pluses),
            _ => false,
        };
        if ok {
            Ok(())
        } else {
            Err(ChainError::InvalidParams(format!(
                "({}, {}) is not a disordered state for L = {l}",
                self.sign, self.pluses
            )))
        }
    }

    /// Contiguous layout: (-1, j) at j, (+1, j) at L-1+j.
    pub fn index(&self, l: usize) -> usize {
        if self.sign == -1 {
            self.pluses
        } else {
            l - 1 + self.pluses
        }
    }

    pub fn from_index(idx: usize, l: usize) -> Self {
        if idx < l {
            Self {
                sign: -1,
                pluses: idx,
            }
        } else {
            Self {
                sign: 1,
                pluses: idx - (l - 1),
            }
        }
    }
}

/// Ordered-model state: the list of the last L signs as an L-bit word,
/// bit k holding eta(k). Bit 0 is the oldest sign, bit L-1 the newest;
/// a step is (word >> 1) | (s << (L-1)).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OrderedState {
    pub word: u32,
}

impl OrderedState {
    pub fn validate(&self, l: usize) -> Result<()> {
        if (self.word as u64) < (1u64 << l) {
            Ok(())
        } else {
            Err(ChainError::InvalidParams(format!(
                "word {} does not fit in {l} bits",
                self.word
            )))
        }
    }

    pub fn ones(&self) -> usize {
        self.word.count_ones() as usize
    }

    pub fn bit(&self, k: usize) -> u32 {
        (self.word >> k) & 1
    }

    pub fn label(&self, l: usize) -> String {
        (0..l).map(|k| if self.bit(k) == 1 { '1' } else { '0' }).collect()
    }
}

/// Centered lag correlations rho_bar_n = rho_n - 1/4 of the ordered model.
#[derive(Debug, Clone)]
pub struct CorrelationSeries {
    pub rho_bar: Vec<f64>,
}

fn disordered_label(sign: i8, j: usize) -> String {
    format!("{}{},{}", if sign == 1 { "+" } else { "-" }, 1, j)
}

/// The 2L-state disordered kernel together with the step observable
/// f(i, j) = i.
pub fn build_disordered(params: &ErwParams) -> (TransitionMatrix, Observable) {
    let l = params.l;
    let p = params.p;
    let n = 2 * l;
    let lf = l as f64;
    let mut rows = vec![vec![0.0; n]; n];
    let mut labels = Vec::with_capacity(n);
    let mut f = vec![0.0; n];
    for idx in 0..n {
        let state = DisorderedState::from_index(idx, l);
        labels.push(disordered_label(state.sign, state.pluses));
        f[idx] = state.sign as f64;
        let j = state.pluses;
        let jf = j as f64;
        // sample a plus and keep it
        if j >= 1 {
            rows[idx][DisorderedState { sign: 1, pluses: j }.index(l)] += jf / lf * p;
        }
        // sample a minus and keep it
        if j <= l - 1 {
            rows[idx][DisorderedState { sign: -1, pluses: j }.index(l)] += (lf - jf) / lf * p;
        }
        // sample a minus and flip it
        if j + 1 <= l {
            rows[idx][DisorderedState {
                sign: 1,
                pluses: j + 1,
            }
            .index(l)] += (lf - jf) / lf * (1.0 - p);
        }
        // sample a plus and flip it
        if j >= 1 {
            rows[idx][DisorderedState {
                sign: -1,
                pluses: j - 1,
            }
            .index(l)] += jf / lf * (1.0 - p);
        }
    }
    let matrix = TransitionMatrix::new(rows, labels).expect("disordered kernel is stochastic");
    let f = Observable::new(f).expect("finite observable");
    (matrix, f)
}

fn binomial(l: usize, j: usize) -> f64 {
    let mut c = 1.0;
    for k in 0..j.min(l - j) {
        c = c * (l - k) as f64 / (k + 1) as f64;
    }
    c
}

/// pi(i, j) = C(L, j) / (L 2^L) * (j if i = +1, L - j if i = -1).
pub fn disordered_stationary(params: &ErwParams) -> ProbabilityVector {
    let l = params.l;
    let n = 2 * l;
    let denom = l as f64 * 2f64.powi(l as i32);
    let mut w = vec![0.0; n];
    for idx in 0..n {
        let state = DisorderedState::from_index(idx, l);
        let j = state.pluses;
        let count = if state.sign == 1 { j } else { l - j } as f64;
        w[idx] = binomial(l, j) / denom * count;
    }
    ProbabilityVector::new(w).expect("closed-form stationary law sums to 1")
}

/// Closed form: sigma^2 = p / (1 - p), independent of L.
pub fn disordered_variance(params: &ErwParams) -> f64 {
    params.p / (1.0 - params.p)
}

/// The closed-form solution U_bar(i, j) = (1-2p)/(1-p) (L/2 - j) + i of the
/// Poisson equation for the step observable.
pub fn disordered_potential(params: &ErwParams) -> Observable {
    let l = params.l;
    let p = params.p;
    let coeff = (1.0 - 2.0 * p) / (1.0 - p);
    let values = (0..2 * l)
        .map(|idx| {
            let state = DisorderedState::from_index(idx, l);
            coeff * (l as f64 / 2.0 - state.pluses as f64) + state.sign as f64
        })
        .collect();
    Observable::new(values).expect("finite potential")
}

/// Append-one probability from a state with k ones: (k p + (L-k)(1-p)) / L.
fn append_one_prob(params: &ErwParams, ones: usize) -> f64 {
    let l = params.l as f64;
    (ones as f64 * params.p + (params.l - ones) as f64 * (1.0 - params.p)) / l
}

/// The 2^L-state ordered kernel together with the step observable
/// f(omega) = 2 omega(L-1) - 1.
pub fn build_ordered(params: &ErwParams) -> Result<(TransitionMatrix, Observable)> {
    let l = params.l;
    if l > ORDERED_L_MAX {
        return Err(ChainError::StateSpaceTooLarge {
            l,
            max: ORDERED_L_MAX,
        });
    }
    let n = 1usize << l;
    let mut rows = vec![vec![0.0; n]; n];
    let mut labels = Vec::with_capacity(n);
    let mut f = vec![0.0; n];
    for word in 0..n as u32 {
        let state = OrderedState { word };
        labels.push(state.label(l));
        f[word as usize] = 2.0 * state.bit(l - 1) as f64 - 1.0;
        let c1 = append_one_prob(params, state.ones());
        let succ1 = ((word >> 1) | (1 << (l - 1))) as usize;
        let succ0 = (word >> 1) as usize;
        rows[word as usize][succ1] = c1;
        rows[word as usize][succ0] = 1.0 - c1;
    }
    let matrix = TransitionMatrix::new(rows, labels).expect("ordered kernel is stochastic");
    let f = Observable::new(f).expect("finite observable");
    Ok((matrix, f))
}

/// Weight of a state with k ones: prod_{j<k} c_j / c_{L-j-1},
/// c_j = (1-p)(1 - j/L) + (j/L) p.
fn ordered_weight(params: &ErwParams, k: usize) -> f64 {
    let l = params.l as f64;
    let c = |j: usize| (1.0 - params.p) * (1.0 - j as f64 / l) + j as f64 / l * params.p;
    (0..k).map(|j| c(j) / c(params.l - j - 1)).product()
}

/// Product-form stationary law of the ordered kernel; depends on omega only
/// through the number of ones.
pub fn ordered_stationary(params: &ErwParams) -> Result<ProbabilityVector> {
    let l = params.l;
    if l > ORDERED_L_MAX {
        return Err(ChainError::StateSpaceTooLarge {
            l,
            max: ORDERED_L_MAX,
        });
    }
    let by_ones: Vec<f64> = (0..=l).map(|k| ordered_weight(params, k)).collect();
    let z: f64 = (0..=l).map(|k| binomial(l, k) * by_ones[k]).sum();
    let n = 1usize << l;
    let w = (0..n as u32)
        .map(|word| by_ones[word.count_ones() as usize] / z)
        .collect();
    Ok(ProbabilityVector::new(w).expect("normalized product-form law"))
}

/// Closed form: sigma^2 = (L - 1 + 2p) / (2 (1-p) (2 (1-p) L + 2p - 1)).
/// At L = 1 this reduces to p / (1-p), matching the disordered model.
pub fn ordered_variance(params: &ErwParams) -> f64 {
    let l = params.l as f64;
    let p = params.p;
    (l - 1.0 + 2.0 * p) / (2.0 * (1.0 - p) * (2.0 * (1.0 - p) * l + 2.0 * p - 1.0))
}

/// rho_bar_1 = (2p - 1) / (4 (2L (1-p) + 2p - 1)).
pub fn rho_bar_one(params: &ErwParams) -> f64 {
    let l = params.l as f64;
    let p = params.p;
    (2.0 * p - 1.0) / (4.0 * (2.0 * l * (1.0 - p) + 2.0 * p - 1.0))
}

/// rho_bar_0 = 1/4, rho_bar_1 = ... = rho_bar_{L-1}, and
/// rho_bar_n = ((2p-1)/L) sum_{j=1..L} rho_bar_{n-j} for n >= L.
pub fn rho_bar_sequence(params: &ErwParams, n_max: usize) -> CorrelationSeries {
    let l = params.l;
    let coeff = (2.0 * params.p - 1.0) / l as f64;
    let r1 = rho_bar_one(params);
    let mut rho = Vec::with_capacity(n_max + 1);
    rho.push(0.25);
    for n in 1..=n_max {
        if n < l {
            rho.push(r1);
        } else {
            let tail: f64 = rho[n - l..n].iter().sum();
            rho.push(coeff * tail);
        }
    }
    CorrelationSeries { rho_bar: rho }
}

/// Spectral radius of the L x L companion matrix of the rho_bar recursion
/// (first row all (2p-1)/L, ones on the subdiagonal); < 1 for 0 <= p < 1.
pub fn recursion_spectral_check(params: &ErwParams) -> Result<f64> {
    let l = params.l;
    if l < 2 {
        return Err(ChainError::InvalidParams(
            "spectral check requires L >= 2".into(),
        ));
    }
    let coeff = (2.0 * params.p - 1.0) / l as f64;
    if coeff == 0.0 {
        // first row vanishes at p = 1/2: the matrix is nilpotent
        return Ok(0.0);
    }
    let mut a = DMatrix::zeros(l, l);
    for j in 0..l {
        a[(0, j)] = coeff;
    }
    for i in 1..l {
        a[(i, i - 1)] = 1.0;
    }
    let eigs = a.complex_eigenvalues();
    Ok(eigs.iter().map(|z| z.norm()).fold(0.0, f64::max))
}
