//! The CLT asymptotic variance of an additive functional, by three independent
//! analytic routes plus the 2-state closed form.

use nalgebra::DMatrix;

use crate::error::{ChainError, Result};
use crate::markov::{
    self, center, potential, potential_second_moment, solve_poisson, Observable,
    ProbabilityVector, TransitionMatrix,
};

/// Detailed balance tolerance.
pub const REVERSIBLE_TOL: f64 = 1e-10;
/// Negative round-off this small is clamped to zero; anything worse is an error.
pub const NEGATIVE_CLAMP_TOL: f64 = 1e-10;
const EIGEN_TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Poisson,
    Cycle,
    Spectral,
    ClosedForm,
}

impl Route {
    pub fn name(self) -> &'static str {
        match self {
            Route::Poisson => "poisson",
            Route::Cycle => "cycle",
            Route::Spectral => "spectral",
            Route::ClosedForm => "closed_form",
        }
    }
}

/// Route-specific diagnostics.
#[derive(Debug, Clone, Default)]
pub struct RouteDetails {
    /// Poisson-equation residual, when the route solves one.
    pub residual: Option<f64>,
    /// Regeneration state used by the cycle route.
    pub i0: Option<usize>,
    /// Eigenvalues used by the spectral route.
    pub eigenvalues: Option<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct VarianceReport {
    pub sigma2: f64,
    pub route: Route,
    pub details: RouteDetails,
}

/// Eigendata of the pi-symmetrized kernel for a reversible chain.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub pi: ProbabilityVector,
    /// Index of the eigenvalue identified with lambda_1 = 1.
    pub top: usize,
}

fn clamp_sigma2(s: f64) -> Result<f64> {
    if s < -NEGATIVE_CLAMP_TOL {
        Err(ChainError::NegativeVariance(s))
    } else {
        Ok(s.max(0.0))
    }
}

/// sigma^2_f = pi(u^2 - (Pu)^2) where u solves the Poisson equation for
/// the centered observable.
pub fn asymptotic_variance(p: &TransitionMatrix, f: &Observable) -> Result<VarianceReport> {
    let pi = markov::stationary(p)?;
    let fbar = center(f, &pi)?;
    let sol = solve_poisson(p, &pi, &fbar)?;
    let u = sol.u.vector();
    let pu = p.matrix() * u;
    let sigma2 = (0..p.n_states())
        .map(|i| pi.get(i) * (u[i] * u[i] - pu[i] * pu[i]))
        .sum();
    Ok(VarianceReport {
        sigma2: clamp_sigma2(sigma2)?,
        route: Route::Poisson,
        details: RouteDetails {
            residual: Some(sol.residual),
            ..Default::default()
        },
    })
}

/// sigma^2_f = pi(i0) ( U^2_{f_bar}(i0,i0) - U_{f_bar}(i0,i0)^2 ), the variance
/// of one regeneration-block sum scaled by the visit frequency of i0.
pub fn cycle_variance(p: &TransitionMatrix, f: &Observable, i0: usize) -> Result<VarianceReport> {
    let pi = markov::stationary(p)?;
    let fbar = center(f, &pi)?;
    let u = potential(p, &fbar, i0)?;
    let u2 = potential_second_moment(p, &fbar, i0)?;
    let sigma2 = pi.get(i0) * (u2.get(i0) - u.get(i0) * u.get(i0));
    Ok(VarianceReport {
        sigma2: clamp_sigma2(sigma2)?,
        route: Route::Cycle,
        details: RouteDetails {
            i0: Some(i0),
            ..Default::default()
        },
    })
}

/// Detailed balance: pi(i) P(i,j) = pi(j) P(j,i) for all i, j.
pub fn is_reversible(p: &TransitionMatrix, pi: &ProbabilityVector) -> bool {
    let n = p.n_states();
    if pi.len() != n {
        return false;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if (pi.get(i) * p.entry(i, j) - pi.get(j) * p.entry(j, i)).abs() > REVERSIBLE_TOL {
                return false;
            }
        }
    }
    true
}

/// Eigendecomposition of S(i,j) = sqrt(pi(i)/pi(j)) P(i,j), which shares
/// eigenvalues with P and is symmetric for reversible chains.
pub fn spectral_data(p: &TransitionMatrix, f: &Observable) -> Result<SpectralData> {
    let pi = markov::stationary(p)?;
    if !is_reversible(p, &pi) {
        return Err(ChainError::NotReversible);
    }
    let n = p.n_states();
    if f.len() != n {
        return Err(ChainError::LengthMismatch {
            expected: n,
            found: f.len(),
        });
    }
    let sqrt_pi: Vec<f64> = (0..n).map(|i| pi.get(i).sqrt()).collect();
    let mut s = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] = sqrt_pi[i] / sqrt_pi[j] * p.entry(i, j);
        }
    }
    // force exact symmetry before the symmetric solver
    let s = (&s + s.transpose()) * 0.5;
    let eig = s.symmetric_eigen();
    let eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    for &l in &eigenvalues {
        if l.abs() > 1.0 + EIGEN_TIE_TOL {
            return Err(ChainError::EigenFailure(format!(
                "eigenvalue {l} outside [-1, 1]"
            )));
        }
    }
    let mut near_one: Vec<usize> = (0..n)
        .filter(|&s| (eigenvalues[s] - 1.0).abs() <= EIGEN_TIE_TOL)
        .collect();
    if near_one.len() != 1 {
        return Err(ChainError::EigenFailure(format!(
            "{} eigenvalues within {EIGEN_TIE_TOL} of 1",
            near_one.len()
        )));
    }
    let top = near_one.pop().unwrap();
    // c_s = (f, phi_s)_pi with phi_s(i) = psi_s(i) / sqrt(pi(i))
    let coefficients: Vec<f64> = (0..n)
        .map(|s| {
            (0..n)
                .map(|i| sqrt_pi[i] * f.get(i) * eig.eigenvectors[(i, s)])
                .sum()
        })
        .collect();
    Ok(SpectralData {
        eigenvalues,
        coefficients,
        pi,
        top,
    })
}

/// sigma^2_f = sum_{s >= 2} (1 + lambda_s) / (1 - lambda_s) c_s^2 over the
/// orthonormal eigenbasis of a reversible kernel.
pub fn reversible_variance(p: &TransitionMatrix, f: &Observable) -> Result<VarianceReport> {
    let data = spectral_data(p, f)?;
    let sigma2 = data
        .eigenvalues
        .iter()
        .zip(&data.coefficients)
        .enumerate()
        .filter(|&(s, _)| s != data.top)
        .map(|(_, (&l, &c))| (1.0 + l) / (1.0 - l) * c * c)
        .sum();
    Ok(VarianceReport {
        sigma2: clamp_sigma2(sigma2)?,
        route: Route::Spectral,
        details: RouteDetails {
            eigenvalues: Some(data.eigenvalues),
            ..Default::default()
        },
    })
}

/// The 2-state closed form
/// sigma^2_f = (f(1)-f(2))^2 P(1,2) P(2,1) (P(1,1)+P(2,2)) / (P(1,2)+P(2,1))^3.
pub fn two_state_variance(p: &TransitionMatrix, f: &Observable) -> Result<VarianceReport> {
    let n = p.n_states();
    if n != 2 {
        return Err(ChainError::WrongDimension(n));
    }
    if f.len() != 2 {
        return Err(ChainError::LengthMismatch {
            expected: 2,
            found: f.len(),
        });
    }
    let (p12, p21) = (p.entry(0, 1), p.entry(1, 0));
    if !(p12 * p21 > 0.0) {
        return Err(ChainError::NotIrreducible);
    }
    let df = f.get(0) - f.get(1);
    let sigma2 =
        df * df * p12 * p21 * (p.entry(0, 0) + p.entry(1, 1)) / (p12 + p21).powi(3);
    Ok(VarianceReport {
        sigma2: clamp_sigma2(sigma2)?,
        route: Route::ClosedForm,
        details: RouteDetails::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::TransitionMatrix;

    fn two_state(p12: f64, p21: f64) -> TransitionMatrix {
        TransitionMatrix::new(
            vec![vec![1.0 - p12, p12], vec![p21, 1.0 - p21]],
            vec!["1".into(), "2".into()],
        )
        .unwrap()
    }

    fn pm_one() -> Observable {
        Observable::new(vec![-1.0, 1.0]).unwrap()
    }

    #[test]
    fn symmetric_two_state_all_routes_give_one() {
        let p = two_state(0.5, 0.5);
        let f = pm_one();
        assert!((asymptotic_variance(&p, &f).unwrap().sigma2 - 1.0).abs() < 1e-12);
        assert!((cycle_variance(&p, &f, 0).unwrap().sigma2 - 1.0).abs() < 1e-12);
        assert!((cycle_variance(&p, &f, 1).unwrap().sigma2 - 1.0).abs() < 1e-12);
        assert!((reversible_variance(&p, &f).unwrap().sigma2 - 1.0).abs() < 1e-12);
        assert!((two_state_variance(&p, &f).unwrap().sigma2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_observable_gives_zero() {
        let p = two_state(0.3, 0.6);
        let f = Observable::new(vec![4.0, 4.0]).unwrap();
        assert_eq!(asymptotic_variance(&p, &f).unwrap().sigma2, 0.0);
        assert_eq!(cycle_variance(&p, &f, 0).unwrap().sigma2, 0.0);
        assert_eq!(two_state_variance(&p, &f).unwrap().sigma2, 0.0);
        assert!(reversible_variance(&p, &f).unwrap().sigma2.abs() < 1e-12);
    }

    #[test]
    fn asymmetric_two_state_closed_form_value() {
        // 0.792 / 0.729
        let expected = 0.792 / 0.729;
        let p = two_state(0.3, 0.6);
        let f = pm_one();
        assert!((asymptotic_variance(&p, &f).unwrap().sigma2 - expected).abs() < 1e-10);
        assert!((two_state_variance(&p, &f).unwrap().sigma2 - expected).abs() < 1e-12);
        assert!((reversible_variance(&p, &f).unwrap().sigma2 - expected).abs() < 1e-10);
        for i0 in 0..2 {
            assert!((cycle_variance(&p, &f, i0).unwrap().sigma2 - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn reversibility_detection() {
        let p = two_state(0.3, 0.6);
        let pi = crate::markov::stationary(&p).unwrap();
        assert!(is_reversible(&p, &pi));

        let cycle3 = TransitionMatrix::new(
            vec![
                vec![0.0, 1.0, 0.0],
                vec![0.0, 0.0, 1.0],
                vec![1.0, 0.0, 0.0],
            ],
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap();
        let pi3 = crate::markov::stationary(&cycle3).unwrap();
        assert!(!is_reversible(&cycle3, &pi3));
        assert!(matches!(
            reversible_variance(&cycle3, &Observable::new(vec![1.0, 0.0, -1.0]).unwrap()),
            Err(ChainError::NotReversible)
        ));
    }

    #[test]
    fn spectral_zero_for_constant_direction() {
        let p = two_state(0.3, 0.6);
        let f = Observable::new(vec![2.5, 2.5]).unwrap();
        assert!(reversible_variance(&p, &f).unwrap().sigma2.abs() < 1e-12);
    }

    #[test]
    fn two_state_route_rejects_wrong_inputs() {
        let p3 = TransitionMatrix::new(
            vec![
                vec![0.2, 0.5, 0.3],
                vec![0.5, 0.3, 0.2],
                vec![0.3, 0.2, 0.5],
            ],
            vec!["a".into(), "b".into(), "c".into()],
        )
        .unwrap();
        assert!(matches!(
            two_state_variance(&p3, &Observable::new(vec![1.0, 0.0, 0.0]).unwrap()),
            Err(ChainError::WrongDimension(3))
        ));
        let frozen = TransitionMatrix::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        assert!(matches!(
            two_state_variance(&frozen, &pm_one()),
            Err(ChainError::NotIrreducible)
        ));
    }

    #[test]
    fn shift_invariance() {
        let p = two_state(0.3, 0.6);
        let f = Observable::new(vec![0.4, -2.1]).unwrap();
        let g = Observable::new(vec![0.4 + 7.0, -2.1 + 7.0]).unwrap();
        let a = asymptotic_variance(&p, &f).unwrap().sigma2;
        let b = asymptotic_variance(&p, &g).unwrap().sigma2;
        assert!((a - b).abs() < 1e-10);
    }
}
