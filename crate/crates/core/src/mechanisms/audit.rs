//! Monte Carlo lower-bound audit of a privacy claim.
//!
//! The auditor runs a mechanism many times on two neighboring datasets,
//! counts how often each event of a fixed family occurs, and bounds the
//! log-ratio of the two event probabilities from below with simultaneous
//! Clopper-Pearson intervals. A lower bound above the claimed `ε` is evidence
//! of a violation. A bound below it proves nothing.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::inv_beta_reg;

use super::dataset::{Dataset, QueryScript};
use super::guess_check::{run_on_values, Answer, GuessCheckConfig};
use crate::error::{Error, Result};

/// Which events are tested.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventFamily {
    /// Width of the buckets WRONG estimates are sorted into.
    pub bucket_width: f64,
    /// One cell per round: that round's answer, with the estimate bucketed.
    pub per_round: bool,
    /// One cell per prefix of the PASS/WRONG pattern.
    pub prefixes: bool,
}

impl EventFamily {
    /// Per-round and prefix cells with buckets of width `1/ε`.
    pub fn for_epsilon(epsilon: f64) -> Self {
        EventFamily {
            bucket_width: 1.0 / epsilon,
            per_round: true,
            prefixes: true,
        }
    }

    fn events(&self, answers: &[Answer], out: &mut Vec<String>) {
        let mut pattern = String::with_capacity(answers.len() + 1);
        if self.prefixes {
            out.push("prefix:".into());
        }
        for (i, a) in answers.iter().enumerate() {
            match a {
                Answer::Pass => pattern.push('P'),
                Answer::Wrong(_) => pattern.push('W'),
            }
            if self.per_round {
                out.push(match a {
                    Answer::Pass => format!("round {}: PASS", i + 1),
                    Answer::Wrong(v) => {
                        format!("round {}: WRONG in bucket {}", i + 1, (v / self.bucket_width).floor() as i64)
                    }
                });
            }
            if self.prefixes {
                out.push(format!("prefix:{pattern}"));
            }
        }
        if self.prefixes {
            out.push(format!("complete:{pattern}"));
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub runs: u64,
    pub seed: u64,
    /// Simultaneous coverage of all Clopper-Pearson intervals.
    pub confidence: f64,
    pub events: EventFamily,
}

impl AuditConfig {
    pub fn new(runs: u64, seed: u64, epsilon: f64) -> Self {
        AuditConfig {
            runs,
            seed,
            confidence: 0.95,
            events: EventFamily::for_epsilon(epsilon),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventEstimate {
    pub event: String,
    pub counts: [u64; 2],
    /// `ln(count_b / count_{1-b})` in the worse direction.
    pub log_ratio: f64,
    /// Lower confidence bound on the log-ratio.
    pub lower_bound: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AuditVerdict {
    Consistent,
    Inconsistent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub epsilon_claim: f64,
    pub runs: u64,
    pub seed: u64,
    pub confidence: f64,
    pub events_tested: usize,
    /// Largest lower confidence bound over all events, floored at 0: the
    /// audit's estimate of the privacy loss it can certify.
    pub estimate: f64,
    pub lower_bound: f64,
    /// The event attaining `lower_bound`.
    pub witness: Option<EventEstimate>,
    pub verdict: AuditVerdict,
}

/// Two-sided Clopper-Pearson interval for `k` successes in `n` trials at
/// miscoverage `a`.
pub fn clopper_pearson(k: u64, n: u64, a: f64) -> (f64, f64) {
    let (kf, nf) = (k as f64, n as f64);
    let lo = if k == 0 { 0.0 } else { inv_beta_reg(kf, nf - kf + 1.0, a / 2.0) };
    let hi = if k == n { 1.0 } else { inv_beta_reg(kf + 1.0, nf - kf, 1.0 - a / 2.0) };
    (lo, hi)
}

fn log_ratio_lower(num: (f64, f64), den: (f64, f64)) -> f64 {
    if num.0 <= 0.0 {
        f64::NEG_INFINITY
    } else {
        (num.0 / den.1).ln()
    }
}

/// Audits `runner` on a neighboring pair. `runner(b, rng)` must perform one
/// full run on dataset `b`.
pub fn audit_mechanism<F>(runner: F, epsilon_claim: f64, config: &AuditConfig) -> Result<AuditReport>
where
    F: Fn(usize, &mut ChaCha8Rng) -> Result<Vec<Answer>> + Sync,
{
    if !(config.confidence > 0.0 && config.confidence < 1.0) {
        return Err(Error::InvalidParameter(format!("confidence {} must lie in (0, 1)", config.confidence)));
    }
    if !(config.events.bucket_width > 0.0) {
        return Err(Error::InvalidParameter("bucket width must be positive".into()));
    }
    let needed = (1.0 / (1.0 - config.confidence)).ceil() as u64;
    if config.runs < needed {
        return Err(Error::InsufficientRuns(format!(
            "{} runs per dataset, at least {needed} needed for confidence {}",
            config.runs, config.confidence
        )));
    }
    let counts = (0..2 * config.runs)
        .into_par_iter()
        .try_fold(
            || (HashMap::<String, [u64; 2]>::new(), Vec::new()),
            |(mut acc, mut buf), i| {
                let b = (i % 2) as usize;
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream(i);
                let answers = runner(b, &mut rng)?;
                buf.clear();
                config.events.events(&answers, &mut buf);
                for e in buf.drain(..) {
                    acc.entry(e).or_insert([0, 0])[b] += 1;
                }
                Ok::<_, Error>((acc, buf))
            },
        )
        .map(|r| r.map(|(acc, _)| acc))
        .try_reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                let e = a.entry(k).or_insert([0, 0]);
                e[0] += v[0];
                e[1] += v[1];
            }
            Ok(a)
        })?;

    let mut events: Vec<(String, [u64; 2])> = counts.into_iter().collect();
    events.sort();
    let m = events.len().max(1);
    let a = (1.0 - config.confidence) / (2 * m) as f64;
    let n = config.runs;
    let mut witness: Option<EventEstimate> = None;
    for (event, c) in events.iter() {
        let i0 = clopper_pearson(c[0], n, a);
        let i1 = clopper_pearson(c[1], n, a);
        let lower = log_ratio_lower(i0, i1).max(log_ratio_lower(i1, i0));
        let point = if c[0] > 0 && c[1] > 0 {
            (c[0] as f64 / c[1] as f64).ln().abs()
        } else {
            f64::INFINITY
        };
        if witness.as_ref().is_none_or(|w| lower > w.lower_bound) {
            witness = Some(EventEstimate {
                event: event.clone(),
                counts: *c,
                log_ratio: point,
                lower_bound: lower,
            });
        }
    }
    let lower_bound = witness.as_ref().map_or(f64::NEG_INFINITY, |w| w.lower_bound);
    Ok(AuditReport {
        epsilon_claim,
        runs: n,
        seed: config.seed,
        confidence: config.confidence,
        events_tested: events.len(),
        estimate: lower_bound.max(0.0),
        lower_bound,
        witness,
        verdict: if lower_bound <= epsilon_claim {
            AuditVerdict::Consistent
        } else {
            AuditVerdict::Inconsistent
        },
    })
}

/// Audits Guess-and-Check on `datasets` driven by `script`.
pub fn audit_guess_and_check(
    gc: GuessCheckConfig,
    datasets: [&Dataset; 2],
    script: &QueryScript,
    epsilon_claim: f64,
    config: &AuditConfig,
) -> Result<AuditReport> {
    gc.validate()?;
    let values = [script.true_values(datasets[0])?, script.true_values(datasets[1])?];
    audit_mechanism(|b, rng| run_on_values(gc, &values[b], script, rng), epsilon_claim, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clopper_pearson_edges() {
        let (lo, hi) = clopper_pearson(0, 1000, 0.05);
        assert_eq!(lo, 0.0);
        // closed form for zero successes: 1 - (a/2)^{1/n}
        assert!((hi - (1.0 - 0.025f64.powf(1e-3))).abs() < 1e-12);
        let (lo, hi) = clopper_pearson(1000, 1000, 0.05);
        assert!((lo - 0.025f64.powf(1e-3)).abs() < 1e-12 && hi == 1.0);
        let (lo, hi) = clopper_pearson(50, 100, 0.05);
        assert!(lo < 0.5 && hi > 0.5 && (0.5 - lo - (hi - 0.5)).abs() < 1e-9);
    }

    #[test]
    fn identical_datasets_are_consistent() {
        let cfg = GuessCheckConfig::new(2.0, 2, 0.5).unwrap();
        let data = Dataset::new(vec!["x".into()], (0..20).map(|i| vec![i as f64]).collect()).unwrap();
        let script: QueryScript = QueryScript::from_json(
            r#"{"format_version":1,"queries":[
                {"kind":"count","column":"x","op":">=","value":10,"guess":10},
                {"kind":"count","column":"x","op":"<","value":5,"guess":9}]}"#,
        )
        .unwrap();
        let r = audit_guess_and_check(cfg, [&data, &data], &script, 0.0, &AuditConfig::new(5_000, 7, 0.5)).unwrap();
        assert_eq!(r.verdict, AuditVerdict::Consistent);
        assert_eq!(r.estimate, 0.0, "{:?}", r.witness);
    }

    #[test]
    fn too_few_runs() {
        let cfg = AuditConfig::new(10, 0, 1.0);
        assert!(matches!(
            audit_mechanism(|_, _| Ok(vec![]), 1.0, &cfg),
            Err(Error::InsufficientRuns(_))
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        let run = |b: usize, rng: &mut ChaCha8Rng| {
            use rand::Rng;
            let p = if b == 0 { 0.3 } else { 0.5 };
            Ok(vec![if rng.random::<f64>() < p { Answer::Pass } else { Answer::Wrong(0.0) }])
        };
        let cfg = AuditConfig::new(2_000, 11, 1.0);
        let a = audit_mechanism(run, 0.1, &cfg).unwrap();
        let b = audit_mechanism(run, 0.1, &cfg).unwrap();
        assert_eq!(a, b);
        // ln(0.7/0.5) and ln(0.5/0.3) are both well above 0.1
        assert_eq!(a.verdict, AuditVerdict::Inconsistent);
    }
}
