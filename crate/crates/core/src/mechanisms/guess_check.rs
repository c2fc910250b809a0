//! Private Guess-and-Check with real-valued Laplace noise.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, QueryScript};
use crate::error::{Error, Result};

/// Parameters of Guess-and-Check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuessCheckConfig {
    /// Error tolerance `E`.
    pub tolerance: f64,
    /// Number `c` of WRONG answers before halting.
    pub cutoff: u32,
    pub epsilon: f64,
    /// Draw the threshold noise. Turning it off gives the broken variant
    /// used as a negative control.
    #[serde(default = "yes")]
    pub threshold_noise: bool,
}

fn yes() -> bool {
    true
}

impl GuessCheckConfig {
    pub fn new(tolerance: f64, cutoff: u32, epsilon: f64) -> Result<Self> {
        let c = GuessCheckConfig {
            tolerance,
            cutoff,
            epsilon,
            threshold_noise: true,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || !self.tolerance.is_finite() {
            return Err(Error::InvalidParameter(format!("tolerance {} must be positive", self.tolerance)));
        }
        if self.cutoff == 0 {
            return Err(Error::InvalidParameter("cutoff must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!("ε = {} must lie in (0, 1)", self.epsilon)));
        }
        Ok(())
    }
}

/// Draws `Lap(scale)` by inverting the CDF.
pub fn sample_laplace<R: Rng + ?Sized>(rng: &mut R, scale: f64) -> f64 {
    let mut u: f64 = rng.random::<f64>() - 0.5;
    while u == -0.5 {
        u = rng.random::<f64>() - 0.5;
    }
    -scale * u.signum() * (-2.0 * u.abs()).ln_1p()
}

/// Laplace CDF at `x` for scale `b`.
pub fn laplace_cdf(x: f64, scale: f64) -> f64 {
    if x < 0.0 {
        0.5 * (x / scale).exp()
    } else {
        1.0 - 0.5 * (-x / scale).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuessCheckState {
    pub threshold_noise: f64,
    pub wrong_count: u32,
    pub halted: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Answer {
    Pass,
    Wrong(f64),
}

/// A running instance holding the threshold draw.
#[derive(Clone, Debug)]
pub struct GuessCheck {
    config: GuessCheckConfig,
    state: GuessCheckState,
}

impl GuessCheck {
    pub fn start<R: Rng + ?Sized>(config: GuessCheckConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let threshold_noise = if config.threshold_noise {
            sample_laplace(rng, 1.0 / config.epsilon)
        } else {
            0.0
        };
        Ok(GuessCheck {
            config,
            state: GuessCheckState {
                threshold_noise,
                wrong_count: 0,
                halted: false,
            },
        })
    }

    pub fn state(&self) -> &GuessCheckState {
        &self.state
    }

    /// Answers a query whose true value on the private data is `value`.
    pub fn answer<R: Rng + ?Sized>(&mut self, value: f64, guess: f64, rng: &mut R) -> Result<Answer> {
        if self.state.halted {
            return Err(Error::Halted);
        }
        let scale = self.config.cutoff as f64 / self.config.epsilon;
        let gamma = sample_laplace(rng, scale);
        if (value - guess).abs() + gamma >= self.config.tolerance + self.state.threshold_noise {
            let v = value + sample_laplace(rng, scale);
            self.state.wrong_count += 1;
            self.state.halted = self.state.wrong_count == self.config.cutoff;
            Ok(Answer::Wrong(v))
        } else {
            Ok(Answer::Pass)
        }
    }
}

/// Runs a query script against one dataset until it ends or the mechanism
/// halts.
pub fn run_guess_and_check<R: Rng + ?Sized>(
    config: GuessCheckConfig,
    data: &Dataset,
    script: &QueryScript,
    rng: &mut R,
) -> Result<Vec<Answer>> {
    let values = script.true_values(data)?;
    run_on_values(config, &values, script, rng)
}

/// As [`run_guess_and_check`] with the true values precomputed.
pub fn run_on_values<R: Rng + ?Sized>(
    config: GuessCheckConfig,
    values: &[f64],
    script: &QueryScript,
    rng: &mut R,
) -> Result<Vec<Answer>> {
    let mut gc = GuessCheck::start(config, rng)?;
    let mut out = Vec::new();
    for (q, &value) in script.queries.iter().zip(values) {
        if gc.state.halted {
            break;
        }
        let a = gc.answer(value, q.guess, rng)?;
        out.push(a);
        if let (Answer::Wrong(v), true) = (a, q.retry) {
            if gc.state.halted {
                break;
            }
            out.push(gc.answer(value, v, rng)?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanisms::dataset::{ScriptedQuery, Statistic};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_guesses_pass() {
        let cfg = GuessCheckConfig::new(1000.0, 1, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut passes = 0;
        for _ in 0..200 {
            let mut gc = GuessCheck::start(cfg, &mut rng).unwrap();
            for _ in 0..10 {
                if gc.answer(5.0, 5.0, &mut rng).unwrap() == Answer::Pass {
                    passes += 1;
                }
            }
        }
        assert_eq!(passes, 2000);
    }

    #[test]
    fn halts_after_cutoff() {
        let cfg = GuessCheckConfig::new(1.0, 2, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut gc = GuessCheck::start(cfg, &mut rng).unwrap();
        assert!(matches!(gc.answer(0.0, 1e9, &mut rng).unwrap(), Answer::Wrong(_)));
        assert!(!gc.state().halted);
        assert!(matches!(gc.answer(0.0, 1e9, &mut rng).unwrap(), Answer::Wrong(_)));
        assert!(gc.state().halted);
        assert!(matches!(gc.answer(0.0, 0.0, &mut rng), Err(Error::Halted)));
    }

    #[test]
    fn wrong_estimate_is_laplace() {
        let eps = 0.5;
        let cfg = GuessCheckConfig::new(1.0, 1, eps).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let mut errs: Vec<f64> = (0..n)
            .map(|_| {
                let mut gc = GuessCheck::start(cfg, &mut rng).unwrap();
                match gc.answer(10.0, 1e9, &mut rng).unwrap() {
                    Answer::Wrong(v) => {
                        assert!(gc.state().halted);
                        v - 10.0
                    }
                    Answer::Pass => panic!("wildly wrong guess passed"),
                }
            })
            .collect();
        errs.sort_by(f64::total_cmp);
        let ks = errs
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = laplace_cdf(x, 1.0 / eps);
                (f - i as f64 / n as f64).abs().max((f - (i + 1) as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.02, "KS distance {ks}");
    }

    #[test]
    fn retry_uses_estimate() {
        let cfg = GuessCheckConfig::new(50.0, 3, 0.5).unwrap();
        let data = Dataset::new(vec!["x".into()], vec![vec![1.0]; 10]).unwrap();
        let script = QueryScript::new(vec![ScriptedQuery {
            statistic: Statistic::Count {
                column: "x".into(),
                op: super::super::dataset::Comparison::Eq,
                value: 1.0,
            },
            guess: 1e6,
            retry: true,
        }]);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = run_guess_and_check(cfg, &data, &script, &mut rng).unwrap();
        assert_eq!(out.len(), 2);
        assert!(matches!(out[0], Answer::Wrong(_)));
    }

    #[test]
    fn rejects_bad_config() {
        assert!(GuessCheckConfig::new(0.0, 1, 0.5).is_err());
        assert!(GuessCheckConfig::new(1.0, 0, 0.5).is_err());
        assert!(GuessCheckConfig::new(1.0, 1, 1.0).is_err());
    }
}
