//! Rényi budget monitor, the tracker property, concurrent RDP verification,
//! and composition rules for RDP, zCDP, and tCDP.

use std::collections::HashMap;

use crate::budget::PrivacyBudget;
use crate::divergence::{
    check_dominance, conjugate, renyi_masses, sup_renyi_directed, verify_rdp_setting, Method, SweepOptions,
    VerificationVerdict,
};
use crate::engine::Setting;
use crate::error::{Error, Result};
use crate::system::{InteractiveSystem, Path, SystemPair};

/// Worst-case remaining Rényi budget per history of an ordered pair
/// `(P, Q) = (M^0, M^1)`.
///
/// Stores `V(h) = max_x Σ_y P(y|h,x)^α Q(y|h,x)^{1-α} V(h·(x,y))` with
/// `V = 1` at full length. The objective `Σ P^α Q^{1-α}` of an adaptive
/// adversary factors along the history into nonnegative per-step terms, so
/// maximizing each subtree independently is optimal and `V(h)` equals the
/// supremum of `exp((α-1) D_α)` over adversaries run from `h`.
#[derive(Clone, Debug)]
pub struct BudgetMonitor {
    pub alpha: f64,
    horizon: usize,
    values: HashMap<Path, f64>,
}

impl BudgetMonitor {
    /// Histories reachable under `P`, in no particular order.
    pub fn histories(&self) -> impl Iterator<Item = &Path> {
        self.values.keys()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `V(h)`, or `None` when `h` is unreachable under `P`.
    pub fn moment(&self, history: &[(usize, usize)]) -> Option<f64> {
        self.values.get(history).copied()
    }

    /// `ℓ(h) = V(h)^{1/(α-1)}`: the exponential of the worst remaining `D_α`.
    pub fn ell(&self, history: &[(usize, usize)]) -> Option<f64> {
        self.moment(history).map(|v| {
            if v.is_infinite() {
                f64::INFINITY
            } else {
                v.powf(1.0 / (self.alpha - 1.0))
            }
        })
    }

    /// `sup_A D_α(IT(A : P) ‖ IT(A : Q))`.
    pub fn divergence(&self) -> f64 {
        self.ell(&[]).map_or(0.0, f64::ln)
    }
}

/// Backward recursion for the budget monitor of `pair.m0` against `pair.m1`.
pub fn budget_monitor(pair: &SystemPair, alpha: f64) -> Result<BudgetMonitor> {
    if alpha <= 1.0 {
        return Err(Error::InvalidParameter(format!("Rényi order {alpha} must exceed 1")));
    }
    let mut values = HashMap::new();
    monitor_node(&pair.m0, &pair.m1, &mut Vec::new(), true, alpha, &mut values)?;
    Ok(BudgetMonitor {
        alpha,
        horizon: pair.horizon(),
        values,
    })
}

fn monitor_node(
    p: &InteractiveSystem,
    q: &InteractiveSystem,
    path: &mut Path,
    q_reaches: bool,
    alpha: f64,
    values: &mut HashMap<Path, f64>,
) -> Result<f64> {
    if path.len() == p.horizon() {
        values.insert(path.clone(), 1.0);
        return Ok(1.0);
    }
    if !q_reaches {
        values.insert(path.clone(), f64::INFINITY);
        return Ok(f64::INFINITY);
    }
    let mut best: f64 = 0.0;
    for x in 0..p.queries().len() {
        let Some(prow) = p.row(path, x) else { continue };
        let qrow = q
            .row(path, x)
            .ok_or_else(|| Error::Mismatch(format!("query {x} admitted by only one system at {}", p.render_path(path))))?;
        let mut total = 0.0;
        for (y, (&py, &qy)) in prow.iter().zip(qrow).enumerate() {
            if py <= 0.0 {
                continue;
            }
            path.push((x, y));
            let rest = monitor_node(p, q, path, qy > 0.0, alpha, values);
            path.pop();
            let rest = rest?;
            total += if qy > 0.0 {
                py.powf(alpha) * qy.powf(1.0 - alpha) * rest
            } else {
                f64::INFINITY
            };
        }
        best = best.max(total);
    }
    values.insert(path.clone(), best);
    Ok(best)
}

/// `ℓ(h)` by exhaustive search over adversaries run against the conditioned
/// systems `M^b|_h`.
pub fn brute_force_ell(pair: &SystemPair, alpha: f64, history: &[(usize, usize)], cap: u128) -> Result<f64> {
    let remaining = pair.horizon() - history.len();
    if remaining == 0 {
        return Ok(1.0);
    }
    if pair.m1.path_probability(history) == 0.0 {
        return Ok(f64::INFINITY);
    }
    let (p, q) = (pair.m0.conditioned(history)?, pair.m1.conditioned(history)?);
    let setting = Setting::new(vec![&p], vec![&q])?;
    let (d, _, _) = sup_renyi_directed(
        &setting,
        remaining,
        alpha,
        SweepOptions {
            cap,
            method: Method::Exhaustive,
        },
    )?;
    Ok(d.exp())
}

/// Largest relative gap between the recursion and brute force over every
/// recorded history.
pub fn monitor_brute_force_gap(pair: &SystemPair, monitor: &BudgetMonitor, cap: u128) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for h in monitor.histories() {
        let dp = monitor.ell(h).expect("recorded");
        let bf = brute_force_ell(pair, monitor.alpha, h, cap)?;
        if dp.is_infinite() || bf.is_infinite() {
            if dp != bf {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        worst = worst.max((dp - bf).abs() / bf.max(1.0));
    }
    Ok(worst)
}

/// Result of testing the tracker implication on one instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrackerOutcome {
    /// The hypothesis `P ⪯_β e^B Q` fails, so nothing is asserted.
    Vacuous,
    Holds,
    Violated,
}

/// Given joint laws over `Y1 × Y2` (rows indexed by `y1`), checks that
/// `P ⪯_β e^B Q` implies `P_1 · ℓ_1^{1/β} ⪯_β e^B Q_1`, where
/// `ℓ_1(y1) = exp(D_α(P_2|y1 ‖ Q_2|y1))` and `α` is the conjugate of `β`.
pub fn check_tracker(p: &[Vec<f64>], q: &[Vec<f64>], beta: f64, bound: f64) -> Result<TrackerOutcome> {
    if beta <= 1.0 {
        return Err(Error::InvalidParameter(format!("β = {beta} must exceed 1")));
    }
    if p.len() != q.len() || p.iter().zip(q).any(|(a, b)| a.len() != b.len()) {
        return Err(Error::Mismatch("joint tables differ in shape".into()));
    }
    if p.iter().chain(q).flatten().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidParameter("the tracker property needs full, common support".into()));
    }
    let alpha = conjugate(beta);
    let scale = bound.exp();
    let flat_p: Vec<f64> = p.iter().flatten().copied().collect();
    let flat_q: Vec<f64> = q.iter().flatten().map(|v| v * scale).collect();
    if !check_dominance(&flat_p, &flat_q, beta) {
        return Ok(TrackerOutcome::Vacuous);
    }
    let mut lhs = Vec::with_capacity(p.len());
    let mut rhs = Vec::with_capacity(p.len());
    for (prow, qrow) in p.iter().zip(q) {
        let (p1, q1): (f64, f64) = (prow.iter().sum(), qrow.iter().sum());
        let cond = prow.iter().zip(qrow).map(|(a, b)| (a / p1, b / q1));
        let ell = renyi_masses(cond, alpha).exp();
        lhs.push(p1 * ell.powf(1.0 / beta));
        rhs.push(q1 * scale);
    }
    Ok(if check_dominance(&lhs, &rhs, beta) {
        TrackerOutcome::Holds
    } else {
        TrackerOutcome::Violated
    })
}

/// Checks `(α, Σ ε_i)`-RDP of `COMP(M_1, ..., M_k)` against every adversary.
pub fn verify_concurrent_rdp(pairs: &[SystemPair], alpha: f64, eps: &[f64], opts: SweepOptions) -> Result<VerificationVerdict> {
    if pairs.len() != eps.len() || pairs.is_empty() {
        return Err(Error::InvalidParameter("one RDP level per pair required".into()));
    }
    let setting = Setting::concurrent(pairs);
    let rounds = setting.max_rounds();
    verify_rdp_setting(&setting, rounds, alpha, eps.iter().sum(), opts)
}

/// Composes budgets of one notion: RDP levels add at a shared order, zCDP
/// `ρ`s add, tCDP `ρ`s add with the smallest `ω`.
pub fn cdp_compose(budgets: &[PrivacyBudget]) -> Result<PrivacyBudget> {
    let first = *budgets
        .first()
        .ok_or_else(|| Error::InvalidParameter("nothing to compose".into()))?;
    for b in budgets {
        b.validated()?;
    }
    match first {
        PrivacyBudget::Rdp { alpha, .. } => {
            let mut total = 0.0;
            for b in budgets {
                match *b {
                    PrivacyBudget::Rdp { alpha: a, epsilon } if a == alpha => total += epsilon,
                    _ => return Err(mixed(b)),
                }
            }
            Ok(PrivacyBudget::Rdp { alpha, epsilon: total })
        }
        PrivacyBudget::Zcdp { .. } => {
            let mut total = 0.0;
            for b in budgets {
                match *b {
                    PrivacyBudget::Zcdp { rho } => total += rho,
                    _ => return Err(mixed(b)),
                }
            }
            Ok(PrivacyBudget::Zcdp { rho: total })
        }
        PrivacyBudget::Tcdp { .. } => {
            let (mut total, mut omega) = (0.0, f64::INFINITY);
            for b in budgets {
                match *b {
                    PrivacyBudget::Tcdp { rho, omega: w } => {
                        total += rho;
                        omega = omega.min(w);
                    }
                    _ => return Err(mixed(b)),
                }
            }
            Ok(PrivacyBudget::Tcdp { rho: total, omega })
        }
        PrivacyBudget::ApproxDp { .. } => Err(Error::InvalidParameter(
            "approximate-DP budgets compose through the calculators".into(),
        )),
    }
}

fn mixed(b: &PrivacyBudget) -> Error {
    Error::InvalidParameter(format!("cannot compose mixed budgets: {b}"))
}

/// `(α, ε)`-RDP implies `(ε + ln(1/δ)/(α-1), δ)`-DP.
pub fn rdp_to_dp(budget: &PrivacyBudget, delta: f64) -> Result<PrivacyBudget> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("δ = {delta} must lie in (0, 1)")));
    }
    match *budget {
        PrivacyBudget::Rdp { alpha, epsilon } => Ok(PrivacyBudget::ApproxDp {
            epsilon: epsilon + (1.0 / delta).ln() / (alpha - 1.0),
            delta,
        }),
        _ => Err(Error::InvalidParameter(format!("{budget} is not an RDP budget"))),
    }
}

/// Converts an RDP, zCDP or tCDP budget to `(ε, δ)`-DP through the RDP
/// conversion at the best admissible order.
pub fn to_approx_dp(budget: &PrivacyBudget, delta: f64) -> Result<PrivacyBudget> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!("δ = {delta} must lie in (0, 1)")));
    }
    let l = (1.0 / delta).ln();
    match budget.validated()? {
        PrivacyBudget::Rdp { .. } => rdp_to_dp(budget, delta),
        PrivacyBudget::Zcdp { rho } => Ok(PrivacyBudget::ApproxDp {
            epsilon: rho + 2.0 * (rho * l).sqrt(),
            delta,
        }),
        PrivacyBudget::Tcdp { rho, omega } => {
            let alpha = (1.0 + (l / rho).sqrt()).min(omega);
            Ok(PrivacyBudget::ApproxDp {
                epsilon: alpha * rho + l / (alpha - 1.0),
                delta,
            })
        }
        b @ PrivacyBudget::ApproxDp { .. } => Ok(b),
    }
}
