//! Composition calculators for approximate DP.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_binomial;

use crate::budget::PrivacyBudget;
use crate::divergence::{check_eps_delta, log_sum_exp};
use crate::error::{Error, Result};

/// `Σ_τ max(P(τ) - e^{ε'} Q(τ), 0)` for the `k`-fold product of randomized
/// response laws with parameter `ε`, summed over the `k + 1` classes of
/// outcomes with the same number of flipped bits. Log domain throughout.
pub fn pure_rr_delta(k: u64, epsilon: f64, eps_prime: f64) -> f64 {
    let ln_p = -(-epsilon).exp().ln_1p();
    let ln_q = -epsilon.exp().ln_1p();
    let mut terms = Vec::new();
    let mut lost = Vec::new();
    for j in 0..=k {
        let c = ln_binomial(k, j);
        let lp = c + (k - j) as f64 * ln_p + j as f64 * ln_q;
        let lq = c + (k - j) as f64 * ln_q + j as f64 * ln_p;
        if lp > eps_prime + lq {
            terms.push(lp);
            lost.push(eps_prime + lq);
        }
    }
    if terms.is_empty() {
        return 0.0;
    }
    (log_sum_exp(&terms).exp() - log_sum_exp(&lost).exp()).max(0.0)
}

/// Exact optimal `δ'` for the `k`-fold composition of `(ε, δ)` mechanisms at
/// level `ε'`: `1 - (1-δ)^k (1 - δ_pure(ε'))`.
pub fn optimal_homogeneous(k: u64, epsilon: f64, delta: f64, eps_prime: f64) -> Result<f64> {
    check_eps_delta(epsilon, delta)?;
    if k == 0 || !(eps_prime >= 0.0) {
        return Err(Error::InvalidParameter("need k ≥ 1 and ε' ≥ 0".into()));
    }
    let pure = pure_rr_delta(k, epsilon, eps_prime);
    Ok(1.0 - (1.0 - delta).powf(k as f64) * (1.0 - pure))
}

/// Smallest `ε'` whose optimal `δ'` is at most `delta_prime`, by bisection
/// to `1e-12`. `None` when even `ε' = kε` cannot reach it.
pub fn optimal_epsilon(k: u64, epsilon: f64, delta: f64, delta_prime: f64) -> Result<Option<f64>> {
    let hi_val = optimal_homogeneous(k, epsilon, delta, k as f64 * epsilon)?;
    if hi_val > delta_prime {
        return Ok(None);
    }
    if optimal_homogeneous(k, epsilon, delta, 0.0)? <= delta_prime {
        return Ok(Some(0.0));
    }
    let (mut lo, mut hi) = (0.0, k as f64 * epsilon);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if optimal_homogeneous(k, epsilon, delta, mid)? <= delta_prime {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// The advanced composition bound
/// `ε' = √(2k ln(1/δ_s))·ε + kε(e^ε - 1)`, `δ' = kδ + δ_s`.
pub fn advanced_composition(k: u64, epsilon: f64, delta: f64, delta_slack: f64) -> Result<(f64, f64)> {
    check_eps_delta(epsilon, delta)?;
    if !(delta_slack > 0.0 && delta_slack < 1.0) {
        return Err(Error::InvalidParameter(format!("δ slack {delta_slack} must lie in (0, 1)")));
    }
    let k = k as f64;
    let eps = (2.0 * k * (1.0 / delta_slack).ln()).sqrt() * epsilon + k * epsilon * epsilon.exp_m1();
    Ok((eps, k * delta + delta_slack))
}

/// `(Σ ε_i, Σ δ_i)`.
pub fn basic_composition(budgets: &[PrivacyBudget]) -> Result<PrivacyBudget> {
    let (mut e, mut d) = (0.0, 0.0);
    for b in budgets {
        match b.validated()? {
            PrivacyBudget::ApproxDp { epsilon, delta } => {
                e += epsilon;
                d += delta;
            }
            other => return Err(Error::InvalidParameter(format!("basic composition needs (ε, δ) budgets, got {other}"))),
        }
    }
    Ok(PrivacyBudget::ApproxDp {
        epsilon: e,
        delta: d.min(1.0),
    })
}

/// What a composition query asks for.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// Given `ε'`, compute `δ'`.
    EpsPrime(f64),
    /// Given `δ'`, compute `ε'`.
    DeltaPrime(f64),
}

/// `k` copies of an `(ε, δ)` mechanism and the requested parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositionQuery {
    pub k: u64,
    pub epsilon: f64,
    pub delta: f64,
    pub target: Target,
}

impl CompositionQuery {
    /// `(ε', δ')` under optimal composition; `ε'` is `+∞` when the requested
    /// `δ'` is unreachable.
    pub fn optimal(&self) -> Result<(f64, f64)> {
        match self.target {
            Target::EpsPrime(e) => Ok((e, optimal_homogeneous(self.k, self.epsilon, self.delta, e)?)),
            Target::DeltaPrime(d) => Ok((
                optimal_epsilon(self.k, self.epsilon, self.delta, d)?.unwrap_or(f64::INFINITY),
                d,
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mechanism_is_its_own_hockey_stick() {
        let (eps, delta, ep): (f64, f64, f64) = (1.0, 0.01, 0.4);
        let p = eps.exp() / (1.0 + eps.exp());
        // approximate RR: δ on the revealing branch, RR_ε otherwise
        let direct = delta + (1.0 - delta) * ((p - ep.exp() * (1.0 - p)).max(0.0) + ((1.0 - p) - ep.exp() * p).max(0.0));
        assert!((optimal_homogeneous(1, eps, delta, ep).unwrap() - direct).abs() < 1e-15);
    }

    #[test]
    fn beyond_k_epsilon_only_delta_remains() {
        let v = optimal_homogeneous(4, 0.3, 0.01, 1.2).unwrap();
        assert!((v - (1.0 - 0.99f64.powi(4))).abs() < 1e-15);
    }

    #[test]
    fn inversion_round_trips() {
        let d = optimal_homogeneous(5, 0.5, 0.0, 1.0).unwrap();
        let e = optimal_epsilon(5, 0.5, 0.0, d).unwrap().unwrap();
        assert!((e - 1.0).abs() < 1e-9);
    }

    #[test]
    fn basic_sums() {
        let b = basic_composition(&[PrivacyBudget::ApproxDp { epsilon: 0.5, delta: 1e-6 }; 3]).unwrap();
        match b {
            PrivacyBudget::ApproxDp { epsilon, delta } => {
                assert!((epsilon - 1.5).abs() < 1e-15 && (delta - 3e-6).abs() < 1e-20)
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn advanced_at_zero_epsilon() {
        assert_eq!(advanced_composition(3, 0.0, 0.1, 1e-3).unwrap(), (0.0, 0.30100000000000005));
    }
}
