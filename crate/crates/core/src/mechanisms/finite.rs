//! Finite mechanism models for exact verification.

use crate::error::{Error, Result};
use crate::space::Space;
use crate::system::{InteractiveSystem, Step, SystemPair};

/// Randomized response: the single query `q` is answered with the input bit
/// with probability `e^ε / (1 + e^ε)`.
pub fn make_rr(epsilon: f64) -> Result<SystemPair> {
    if !(epsilon >= 0.0) || !epsilon.is_finite() {
        return Err(Error::InvalidParameter(format!("ε = {epsilon} must be finite and nonnegative")));
    }
    let keep = 1.0 / (1.0 + (-epsilon).exp());
    let side = |b: usize| {
        let mut row = vec![1.0 - keep; 2];
        row[b] = keep;
        InteractiveSystem::stateless(Space::new(["q"])?, Space::new(["0", "1"])?, 1, vec![row])
    };
    SystemPair::new(side(0)?, side(1)?)
}

/// Approximate randomized response. With probability `δ` the input bit is
/// revealed as `(b, top)`; otherwise randomized response is run and its
/// answer is tagged `bot`.
pub fn make_approx_rr(epsilon: f64, delta: f64) -> Result<SystemPair> {
    crate::divergence::check_eps_delta(epsilon, delta)?;
    let keep = (1.0 - delta) / (1.0 + (-epsilon).exp());
    let flip = (1.0 - delta) - keep;
    let responses = Space::new(["0_top", "1_top", "0_bot", "1_bot"])?;
    let side = |b: usize| {
        let mut row = vec![0.0; 4];
        row[b] = delta;
        row[2 + b] = keep;
        row[3 - b] = flip;
        InteractiveSystem::stateless(Space::new(["q"])?, responses.clone(), 1, vec![row])
    };
    SystemPair::new(side(0)?, side(1)?)
}

/// A finite model together with the bookkeeping needed to state its privacy
/// claim: the probability mass moved by truncation and any extra `ε` the
/// discretization costs.
#[derive(Clone, Debug)]
pub struct FiniteModel {
    pub pair: SystemPair,
    pub delta_trunc: f64,
    pub epsilon_slack: f64,
}

/// Number of standard noise scales kept on each side of zero.
pub const TRUNCATION_SCALES: f64 = 40.0;

/// Integer grid with `1 / step` points per unit of sensitivity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub step: f64,
}

impl Grid {
    pub const UNIT: Grid = Grid { step: 1.0 };

    /// Grid points spanned by a sensitivity-1 shift.
    pub fn shift(&self) -> Result<i64> {
        let s = 1.0 / self.step;
        if !(self.step > 0.0) || !s.is_finite() || (s - s.round()).abs() > 1e-9 || s.round() < 1.0 {
            return Err(Error::InvalidParameter(format!(
                "grid step {} cannot represent a sensitivity-1 shift exactly",
                self.step
            )));
        }
        Ok(s.round() as i64)
    }

    /// Converts a value to grid units, rejecting off-grid values.
    pub fn index(&self, value: f64) -> Result<i64> {
        let u = value / self.step;
        if (u - u.round()).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("{value} is not on the grid of step {}", self.step)));
        }
        Ok(u.round() as i64)
    }

    pub fn value(&self, index: i64) -> f64 {
        index as f64 * self.step
    }
}

/// Two-sided geometric law `P(z) ∝ r^{|z|}`, `r = e^{-λ}`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Geometric {
    r: f64,
}

impl Geometric {
    pub(crate) fn new(lambda: f64) -> Self {
        Geometric { r: (-lambda).exp() }
    }

    pub(crate) fn pmf(&self, z: i64) -> f64 {
        (1.0 - self.r) / (1.0 + self.r) * self.r.powi(z.unsigned_abs() as i32)
    }

    /// `P(Z ≥ k)`.
    pub(crate) fn tail(&self, k: i64) -> f64 {
        if k >= 1 {
            self.r.powi(k as i32) / (1.0 + self.r)
        } else {
            1.0 - self.r.powi((1 - k) as i32) / (1.0 + self.r)
        }
    }

    /// The law restricted to `[-w, w]` with both tails folded into the
    /// boundary points.
    pub(crate) fn clamped(&self, w: i64) -> Vec<f64> {
        (-w..=w)
            .map(|z| {
                if z.abs() == w {
                    self.tail(w)
                } else {
                    self.pmf(z)
                }
            })
            .collect()
    }
}

fn window(lambda: f64) -> i64 {
    (TRUNCATION_SCALES / lambda).ceil() as i64
}

/// Discretized Laplace mechanism answering `rounds` sensitivity-1 queries.
///
/// The noise is two-sided geometric with parameter `ε_step` per unit of
/// sensitivity, and outputs are clamped to a window of `±40/ε_step` around
/// zero. Queries name the difference `f(X_1) - f(X_0)` (one of `-1`, `0`,
/// `+1`); input 0 answers `Z` and input 1 answers `d + Z`.
pub fn make_discrete_laplace(epsilon_step: f64, rounds: usize, grid: Grid) -> Result<FiniteModel> {
    if !(epsilon_step > 0.0) || !epsilon_step.is_finite() {
        return Err(Error::InvalidParameter(format!("ε step {epsilon_step} must be positive")));
    }
    let shift = grid.shift()?;
    let lambda = epsilon_step * grid.step;
    let w = window(lambda) + shift;
    let noise = Geometric::new(lambda);
    let queries = Space::new(["-1", "0", "+1"])?;
    let responses = Space::new((-w..=w).map(|i| format_value(grid.value(i))))?;
    let side = |b: i64| {
        let rows = (-1..=1)
            .map(|d| {
                let center = b * d * shift;
                (-w..=w)
                    .map(|o| {
                        let z = o - center;
                        if o == w {
                            noise.tail(z)
                        } else if o == -w {
                            noise.tail(-z)
                        } else {
                            noise.pmf(z)
                        }
                    })
                    .collect()
            })
            .collect();
        InteractiveSystem::stateless(queries.clone(), responses.clone(), rounds, rows)
    };
    Ok(FiniteModel {
        pair: SystemPair::new(side(0)?, side(1)?)?,
        // clamping is post-processing, so nothing is lost; the tail beyond
        // the window is still reported
        delta_trunc: rounds as f64 * 2.0 * noise.tail(w - shift + 1),
        epsilon_slack: 0.0,
    })
}

fn format_value(v: f64) -> String {
    if v == v.trunc() {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

/// Parameters of the finite sparse-vector model.
#[derive(Clone, Debug)]
pub struct SvtConfig {
    pub epsilon: f64,
    pub cutoff: usize,
    pub rounds: usize,
    /// Query margins `(|f(X_0) - τ| - E, |f(X_1) - τ| - E)`, on the grid and
    /// at most 1 apart.
    pub margins: Vec<(f64, f64)>,
    pub grid: Grid,
}

impl SvtConfig {
    /// Margins `-2..=2` on the unit grid, every pair at distance at most 1.
    pub fn new(epsilon: f64, cutoff: usize, rounds: usize) -> Self {
        let mut margins = Vec::new();
        for a in -2..=2 {
            for b in (a - 1)..=(a + 1) {
                if (-2..=2).contains(&b) {
                    margins.push((a as f64, b as f64));
                }
            }
        }
        SvtConfig {
            epsilon,
            cutoff,
            rounds,
            margins,
            grid: Grid::UNIT,
        }
    }
}

pub const PASS: &str = "PASS";
pub const WRONG: &str = "WRONG";
pub const HALTED: &str = "HALTED";

/// Sparse vector with a single noisy threshold, reporting only PASS/WRONG.
///
/// The threshold draw `ρ ~ Lap(1/ε)` is discretized on the grid and clamped
/// to `±40/ε`; each query draws `γ ~ Lap(c/ε)` and answers WRONG iff
/// `margin + γ ≥ ρ`. The kernel at each history integrates over the
/// posterior of `ρ`. After `c` WRONG answers the system replies HALTED.
pub fn make_svt_finite(config: &SvtConfig) -> Result<FiniteModel> {
    let eps = config.epsilon;
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(Error::InvalidParameter(format!("ε = {eps} must be positive")));
    }
    if config.cutoff == 0 || config.rounds == 0 {
        return Err(Error::InvalidParameter("cutoff and rounds must be positive".into()));
    }
    let shift = config.grid.shift()?;
    let mut margins = Vec::with_capacity(config.margins.len());
    for &(a, b) in &config.margins {
        let (a, b) = (config.grid.index(a)?, config.grid.index(b)?);
        if (a - b).abs() > shift {
            return Err(Error::InvalidParameter(format!(
                "margins {a} and {b} differ by more than the sensitivity"
            )));
        }
        margins.push([a, b]);
    }
    let lambda = eps * config.grid.step;
    let w = window(lambda);
    let threshold = Geometric::new(lambda);
    let prior = threshold.clamped(w);
    let gamma = Geometric::new(lambda / config.cutoff as f64);
    let queries = Space::new(config.margins.iter().map(|(a, b)| format!("{}:{}", format_value(*a), format_value(*b))))?;
    let responses = Space::new([PASS, WRONG, HALTED])?;
    let side = |b: usize| {
        InteractiveSystem::from_fn(queries.clone(), responses.clone(), config.rounds, |path: &[Step], x| {
            let wrongs = path.iter().filter(|&&(_, y)| y == 1).count();
            if wrongs >= config.cutoff {
                return Some(vec![0.0, 0.0, 1.0]);
            }
            let mut total = 0.0;
            let mut wrong = 0.0;
            for (i, &p) in prior.iter().enumerate() {
                let rho = i as i64 - w;
                let mut weight = p;
                for &(q, y) in path {
                    let t = gamma.tail(rho - margins[q][b]);
                    weight *= if y == 1 { t } else { 1.0 - t };
                }
                total += weight;
                wrong += weight * gamma.tail(rho - margins[x][b]);
            }
            let pw = if total > 0.0 { (wrong / total).clamp(0.0, 1.0) } else { 0.0 };
            Some(vec![1.0 - pw, pw, 0.0])
        })
    };
    Ok(FiniteModel {
        pair: SystemPair::new(side(0)?, side(1)?)?,
        delta_trunc: 2.0 * threshold.tail(w - shift),
        epsilon_slack: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::{verify_approx_dp, Method, SweepOptions};

    #[test]
    fn geometric_tails_sum() {
        let g = Geometric::new(0.7);
        let direct: f64 = (3..400).map(|z| g.pmf(z)).sum();
        assert!((g.tail(3) - direct).abs() < 1e-15);
        let direct: f64 = (-2..400).map(|z| g.pmf(z)).sum();
        assert!((g.tail(-2) - direct).abs() < 1e-14);
        assert!((g.clamped(30).iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rr_zero_is_uniform() {
        let p = make_rr(0.0).unwrap();
        assert_eq!(p.get(0).row(&[], 0).unwrap(), &[0.5, 0.5]);
        assert_eq!(p.get(1).row(&[], 0).unwrap(), &[0.5, 0.5]);
    }

    #[test]
    fn constructors_validate() {
        assert!(make_rr(1.3).unwrap().get(1).validate().is_valid());
        let a = make_approx_rr(1.0, 0.2).unwrap();
        assert!(a.get(0).validate().is_valid() && a.get(1).validate().is_valid());
        let l = make_discrete_laplace(1.0, 2, Grid::UNIT).unwrap();
        assert!(l.pair.get(1).validate().is_valid());
        let s = make_svt_finite(&SvtConfig::new(0.8, 1, 2)).unwrap();
        assert!(s.pair.get(0).validate().is_valid() && s.pair.get(1).validate().is_valid());
    }

    #[test]
    fn approx_rr_is_tight() {
        let p = make_approx_rr(0.7, 0.05).unwrap();
        assert!(verify_approx_dp(&p, 0.7, 0.05, SweepOptions::default()).unwrap().passed);
        assert!(!verify_approx_dp(&p, 0.7, 0.05 - 1e-6, SweepOptions::default()).unwrap().passed);
    }

    #[test]
    fn laplace_single_query_is_pure() {
        let m = make_discrete_laplace(0.5, 1, Grid::UNIT).unwrap();
        assert!(m.delta_trunc < 1e-12);
        let v = verify_approx_dp(&m.pair, 0.5, m.delta_trunc, SweepOptions::default()).unwrap();
        assert!(v.passed, "{}", v.achieved);
        assert!(!verify_approx_dp(&m.pair, 0.45, 0.0, SweepOptions::default()).unwrap().passed);
    }

    #[test]
    fn laplace_half_grid() {
        let m = make_discrete_laplace(1.0, 1, Grid { step: 0.5 }).unwrap();
        assert!(verify_approx_dp(&m.pair, 1.0, m.delta_trunc, SweepOptions::default()).unwrap().passed);
        assert!(make_discrete_laplace(1.0, 1, Grid { step: 0.3 }).is_err());
    }

    #[test]
    fn svt_far_below_passes() {
        let mut cfg = SvtConfig::new(0.5, 1, 1);
        cfg.margins = vec![(-200.0, -199.0)];
        let m = make_svt_finite(&cfg).unwrap();
        for b in 0..2 {
            assert!(m.pair.get(b).row(&[], 0).unwrap()[0] > 1.0 - 1e-12);
        }
    }

    #[test]
    fn svt_two_queries_within_three_epsilon() {
        let m = make_svt_finite(&SvtConfig::new(0.5, 1, 2)).unwrap();
        let opts = SweepOptions {
            method: Method::Induction,
            ..SweepOptions::default()
        };
        let v = verify_approx_dp(&m.pair, 1.5 + m.epsilon_slack, m.delta_trunc, opts).unwrap();
        assert!(v.passed, "{}", v.achieved);
    }

    #[test]
    fn svt_rejects_large_margin_gap() {
        let mut cfg = SvtConfig::new(0.5, 1, 1);
        cfg.margins = vec![(0.0, 2.0)];
        assert!(make_svt_finite(&cfg).is_err());
    }
}
