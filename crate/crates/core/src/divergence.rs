//! Hockey-stick and Rényi divergences, β-dominance, and worst-case
//! verification over adversaries.
//!
//! Divergence values use `f64::INFINITY` for `+∞`; it compares above every
//! finite bound, so no verdict can pass on an infinite divergence.

use serde::{Deserialize, Serialize};

use crate::adversary::{Adversary, Transcript};
use crate::engine::{
    joint_distribution, joint_masses, max_over_adversaries, sup_by_induction, AdversaryEnumeration, Setting,
    TranscriptDistribution,
};
use crate::error::{Error, Result};
use crate::system::SystemPair;
use crate::{DEFAULT_CAP, EQ_TOL};

/// `Σ_τ max(P(τ) - e^ε Q(τ), 0)` and the set attaining it.
pub fn hockey_stick(p: &TranscriptDistribution, q: &TranscriptDistribution, epsilon: f64) -> (f64, Vec<Transcript>) {
    let scale = epsilon.exp();
    let mut delta = 0.0;
    let mut set = Vec::new();
    for (t, pt, qt) in p.aligned(q) {
        let d = pt - scale * qt;
        if d > 0.0 {
            delta += d;
            set.push(t.clone());
        }
    }
    (delta, set)
}

/// Hockey-stick divergence of two aligned mass vectors.
pub fn hockey_stick_masses(masses: impl IntoIterator<Item = (f64, f64)>, epsilon: f64) -> f64 {
    let scale = epsilon.exp();
    masses.into_iter().map(|(p, q)| (p - scale * q).max(0.0)).sum()
}

/// `ln Σ P^α Q^{1-α}`, accumulated in the log domain; `+∞` when some point
/// has `P > 0 = Q`.
pub fn log_renyi_moment(masses: impl IntoIterator<Item = (f64, f64)>, alpha: f64) -> f64 {
    let mut terms = Vec::new();
    for (p, q) in masses {
        if p <= 0.0 {
            continue;
        }
        if q <= 0.0 {
            return f64::INFINITY;
        }
        terms.push(alpha * p.ln() + (1.0 - alpha) * q.ln());
    }
    log_sum_exp(&terms)
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// Rényi divergence of two aligned mass vectors.
pub fn renyi_masses(masses: impl IntoIterator<Item = (f64, f64)>, alpha: f64) -> f64 {
    assert!(alpha > 1.0, "Rényi order must exceed 1");
    let l = log_renyi_moment(masses, alpha);
    if l.is_infinite() && l > 0.0 {
        f64::INFINITY
    } else {
        (l / (alpha - 1.0)).max(0.0)
    }
}

/// `D_α(P‖Q)` over transcript laws.
pub fn renyi_divergence(p: &TranscriptDistribution, q: &TranscriptDistribution, alpha: f64) -> f64 {
    renyi_masses(p.aligned(q).into_iter().map(|(_, a, b)| (a, b)), alpha)
}

/// Hölder conjugate `α / (α - 1)`.
pub fn conjugate(order: f64) -> f64 {
    order / (order - 1.0)
}

/// Whether `P ⪯_β Q`, i.e. `Σ P h ≤ (Σ Q h^β)^{1/β}` for all `h ≥ 0`.
///
/// Decided through the dual form `Σ P^α Q^{1-α} ≤ 1` with `α` the conjugate
/// of `β`, up to a relative slack of `1e-9` for rounding. `P` and `Q` need
/// not be normalized.
pub fn check_dominance(p: &[f64], q: &[f64], beta: f64) -> bool {
    assert!(beta > 1.0, "dominance order must exceed 1");
    let alpha = conjugate(beta);
    let l = log_renyi_moment(p.iter().copied().zip(q.iter().copied()), alpha);
    l <= EQ_TOL
}

/// The maximizer `h(y) ∝ (P(y)/Q(y))^{α-1}` of the Hölder ratio, or the
/// indicator of a point with `Q(y) = 0 < P(y)` when one exists.
pub fn dual_witness_h(p: &[f64], q: &[f64], alpha: f64) -> Vec<f64> {
    if let Some(y) = (0..p.len()).find(|&y| p[y] > 0.0 && q[y] <= 0.0) {
        let mut h = vec![0.0; p.len()];
        h[y] = 1.0;
        return h;
    }
    p.iter()
        .zip(q)
        .map(|(&a, &b)| if a > 0.0 { (a / b).powf(alpha - 1.0) } else { 0.0 })
        .collect()
}

/// `‖h‖_{P,1} / ‖h‖_{Q,β}`.
pub fn holder_ratio(p: &[f64], q: &[f64], h: &[f64], beta: f64) -> f64 {
    let num: f64 = p.iter().zip(h).map(|(a, b)| a * b).sum();
    let den: f64 = q.iter().zip(h).map(|(a, b)| a * b.powf(beta)).sum::<f64>().powf(1.0 / beta);
    num / den
}

/// How the supremum over adversaries is computed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Score every deterministic adversary in turn.
    #[default]
    Exhaustive,
    /// Backward induction over histories; exact for additive objectives.
    Induction,
}

#[derive(Clone, Copy, Debug)]
pub struct SweepOptions {
    pub cap: u128,
    pub method: Method,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            cap: DEFAULT_CAP,
            method: Method::Exhaustive,
        }
    }
}

/// Worst-case hockey-stick divergence at a fixed `ε`.
#[derive(Clone, Debug)]
pub struct HockeyStickResult {
    pub epsilon: f64,
    pub delta: f64,
    /// `0` when the worst case compares input 0 against input 1, `1` for the
    /// reverse direction.
    pub direction: usize,
    pub witness_set: Vec<Transcript>,
    pub witness_adversary: Adversary,
    /// Adversaries scored per direction (`0` under induction).
    pub adversaries: u128,
}

/// Worst-case Rényi divergence at a fixed order.
#[derive(Clone, Debug)]
pub struct RenyiResult {
    pub alpha: f64,
    pub divergence: f64,
    pub direction: usize,
    pub witness_adversary: Adversary,
    pub adversaries: u128,
}

impl RenyiResult {
    pub fn beta(&self) -> f64 {
        conjugate(self.alpha)
    }
}

fn sweep<F, L>(setting: &Setting<'_>, rounds: usize, opts: SweepOptions, score: F, leaf: L) -> Result<(f64, Adversary, u128)>
where
    F: Fn(Vec<(f64, f64)>) -> f64 + Sync,
    L: Fn(f64, f64) -> f64,
{
    match opts.method {
        Method::Exhaustive => {
            let en = AdversaryEnumeration::new(setting.clone(), rounds, opts.cap)?;
            let count = en.total();
            let (v, adv) = max_over_adversaries(en, |adv| Ok(score(joint_masses(adv, setting)?)))?
                .ok_or_else(|| Error::InvalidParameter("no adversary to enumerate".into()))?;
            Ok((v, adv, count))
        }
        Method::Induction => {
            let (v, adv) = sup_by_induction(setting, rounds, leaf)?;
            Ok((v, adv, 0))
        }
    }
}

/// `max_b sup_A Σ_τ max(P - e^ε Q, 0)` for a setting run for `rounds` rounds.
pub fn sup_hockey_stick(setting: &Setting<'_>, rounds: usize, epsilon: f64, opts: SweepOptions) -> Result<HockeyStickResult> {
    let scale = epsilon.exp();
    let mut best: Option<HockeyStickResult> = None;
    for (direction, s) in [setting.clone(), setting.flipped()].iter().enumerate() {
        let (delta, adv, n) = sweep(
            s,
            rounds,
            opts,
            |m| hockey_stick_masses(m, epsilon),
            |p, q| (p - scale * q).max(0.0),
        )?;
        if best.as_ref().is_none_or(|b| delta > b.delta) {
            let witness_set = joint_distribution(&adv, s)?
                .into_iter()
                .filter(|(_, p, q)| p - scale * q > 0.0)
                .map(|(t, _, _)| t)
                .collect();
            best = Some(HockeyStickResult {
                epsilon,
                delta,
                direction,
                witness_set,
                witness_adversary: adv,
                adversaries: n,
            });
        }
    }
    Ok(best.expect("two directions"))
}

/// `max_b sup_A D_α(IT(A : M^b) ‖ IT(A : M^{1-b}))`.
pub fn sup_renyi(setting: &Setting<'_>, rounds: usize, alpha: f64, opts: SweepOptions) -> Result<RenyiResult> {
    if alpha <= 1.0 {
        return Err(Error::InvalidParameter(format!("Rényi order {alpha} must exceed 1")));
    }
    let mut best: Option<RenyiResult> = None;
    for (direction, s) in [setting.clone(), setting.flipped()].iter().enumerate() {
        let (divergence, adv, n) = sup_renyi_directed(s, rounds, alpha, opts)?;
        if best.as_ref().is_none_or(|b| divergence > b.divergence) {
            best = Some(RenyiResult {
                alpha,
                divergence,
                direction,
                witness_adversary: adv,
                adversaries: n,
            });
        }
    }
    Ok(best.expect("two directions"))
}

/// `sup_A D_α(IT(A : left) ‖ IT(A : right))` in one direction only.
pub fn sup_renyi_directed(setting: &Setting<'_>, rounds: usize, alpha: f64, opts: SweepOptions) -> Result<(f64, Adversary, u128)> {
    if alpha <= 1.0 {
        return Err(Error::InvalidParameter(format!("Rényi order {alpha} must exceed 1")));
    }
    let (v, adv, n) = sweep(setting, rounds, opts, |m| renyi_masses(m, alpha), |p, q| renyi_leaf(p, q, alpha))?;
    let divergence = match opts.method {
        Method::Exhaustive => v,
        Method::Induction if v.is_infinite() => f64::INFINITY,
        Method::Induction => (v.ln() / (alpha - 1.0)).max(0.0),
    };
    Ok((divergence, adv, n))
}

pub(crate) fn renyi_leaf(p: f64, q: f64, alpha: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else if q <= 0.0 {
        f64::INFINITY
    } else {
        p.powf(alpha) * q.powf(1.0 - alpha)
    }
}

/// Outcome of checking a privacy claim against every adversary.
#[derive(Clone, Debug, Serialize)]
pub struct VerificationVerdict {
    pub passed: bool,
    /// Largest divergence found (δ for approximate DP, `D_α` for RDP).
    pub achieved: f64,
    pub bound: f64,
    pub direction: usize,
    pub adversaries: u128,
    #[serde(skip)]
    pub witness_adversary: Option<Adversary>,
    #[serde(skip)]
    pub witness_set: Vec<Transcript>,
}

impl VerificationVerdict {
    /// `bound - achieved`: how much room the claim leaves.
    pub fn slack(&self) -> f64 {
        self.bound - self.achieved
    }
}

/// Checks `(ε, δ)`-indistinguishability of a setting in both directions.
pub fn verify_approx_dp_setting(
    setting: &Setting<'_>,
    rounds: usize,
    epsilon: f64,
    delta: f64,
    opts: SweepOptions,
) -> Result<VerificationVerdict> {
    check_eps_delta(epsilon, delta)?;
    let r = sup_hockey_stick(setting, rounds, epsilon, opts)?;
    let passed = r.delta <= delta + EQ_TOL;
    Ok(VerificationVerdict {
        passed,
        achieved: r.delta,
        bound: delta,
        direction: r.direction,
        adversaries: r.adversaries,
        witness_set: if passed { Vec::new() } else { r.witness_set },
        witness_adversary: Some(r.witness_adversary),
    })
}

/// Checks that a pair is `(ε, δ)`-DP against every adversary.
pub fn verify_approx_dp(pair: &SystemPair, epsilon: f64, delta: f64, opts: SweepOptions) -> Result<VerificationVerdict> {
    verify_approx_dp_setting(&Setting::single(pair), pair.horizon(), epsilon, delta, opts)
}

/// Checks `(α, bound)`-RDP of a setting in both directions.
pub fn verify_rdp_setting(
    setting: &Setting<'_>,
    rounds: usize,
    alpha: f64,
    bound: f64,
    opts: SweepOptions,
) -> Result<VerificationVerdict> {
    if bound.is_nan() || bound < 0.0 {
        return Err(Error::InvalidParameter(format!("RDP bound {bound} must be nonnegative")));
    }
    let r = sup_renyi(setting, rounds, alpha, opts)?;
    Ok(VerificationVerdict {
        passed: r.divergence <= bound + EQ_TOL,
        achieved: r.divergence,
        bound,
        direction: r.direction,
        adversaries: r.adversaries,
        witness_set: Vec::new(),
        witness_adversary: Some(r.witness_adversary),
    })
}

pub fn verify_rdp(pair: &SystemPair, alpha: f64, bound: f64, opts: SweepOptions) -> Result<VerificationVerdict> {
    verify_rdp_setting(&Setting::single(pair), pair.horizon(), alpha, bound, opts)
}

pub(crate) fn check_eps_delta(epsilon: f64, delta: f64) -> Result<()> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!("ε = {epsilon} must be finite and nonnegative")));
    }
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidParameter(format!("δ = {delta} must lie in [0, 1]")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Space;
    use crate::system::InteractiveSystem;

    fn rr_pair(eps: f64) -> SystemPair {
        let p = eps.exp() / (1.0 + eps.exp());
        let q = Space::new(["q"]).unwrap();
        let m = |row: Vec<f64>| InteractiveSystem::stateless(q.clone(), Space::numbered(2), 1, vec![row]).unwrap();
        SystemPair::new(m(vec![p, 1.0 - p]), m(vec![1.0 - p, p])).unwrap()
    }

    #[test]
    fn hockey_stick_of_rr_at_zero_is_total_variation() {
        let eps: f64 = 0.8;
        let pair = rr_pair(eps);
        let r = sup_hockey_stick(&Setting::single(&pair), 1, 0.0, SweepOptions::default()).unwrap();
        let p = eps.exp() / (1.0 + eps.exp());
        // direct sum over the two outcomes
        let direct = (p - (1.0 - p)).max(0.0) + ((1.0 - p) - p).max(0.0);
        assert!((r.delta - direct).abs() < 1e-12);
        assert!((r.delta - (eps.exp() - 1.0) / (eps.exp() + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn rr_is_tight_at_its_epsilon() {
        let pair = rr_pair(1.0);
        let pass = verify_approx_dp(&pair, 1.0, 0.0, SweepOptions::default()).unwrap();
        assert!(pass.passed);
        assert!(pass.achieved.abs() < 1e-12);
        let fail = verify_approx_dp(&pair, 0.5, 0.0, SweepOptions::default()).unwrap();
        assert!(!fail.passed);
        assert_eq!(fail.witness_set.len(), 1);
    }

    #[test]
    fn renyi_two_point_closed_form() {
        let eps: f64 = 0.6;
        let pair = rr_pair(eps);
        let p = eps.exp() / (1.0 + eps.exp());
        let q = 1.0 - p;
        let closed = (p * p / q + q * q / p).ln();
        let r = sup_renyi(&Setting::single(&pair), 1, 2.0, SweepOptions::default()).unwrap();
        assert!((r.divergence - closed).abs() < 1e-12);
        let v = verify_rdp(&pair, 2.0, closed, SweepOptions::default()).unwrap();
        assert!(v.passed);
    }

    #[test]
    fn missing_support_is_infinite() {
        assert_eq!(renyi_masses([(0.5, 1.0), (0.5, 0.0)], 2.0), f64::INFINITY);
        assert!(!check_dominance(&[0.5, 0.5], &[1.0, 0.0], 2.0));
        assert_eq!(dual_witness_h(&[0.5, 0.5], &[1.0, 0.0], 2.0), vec![0.0, 1.0]);
    }

    #[test]
    fn witness_attains_holder_equality() {
        let (p, q) = ([0.2, 0.5, 0.3], [0.4, 0.4, 0.2]);
        let alpha = 3.0;
        let b = renyi_masses(p.iter().copied().zip(q.iter().copied()), alpha);
        let scaled: Vec<f64> = q.iter().map(|x| x * b.exp()).collect();
        let h = dual_witness_h(&p, &scaled, alpha);
        assert!((holder_ratio(&p, &scaled, &h, conjugate(alpha)) - 1.0).abs() < 1e-12);
        assert!(check_dominance(&p, &scaled, conjugate(alpha)));
    }
}
