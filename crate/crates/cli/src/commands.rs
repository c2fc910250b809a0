use std::fmt::Write as _;
use std::path::Path;

use interleave_core::adversary::render_transcript;
use interleave_core::calculators::{advanced_composition, basic_composition, CompositionQuery, Target};
use interleave_core::decompose::{decompose as decompose_pair, simulate_via_rr, Decomposition};
use interleave_core::divergence::{verify_approx_dp, verify_rdp, SweepOptions, VerificationVerdict};
use interleave_core::engine::{enumerate_adversaries, max_over_adversaries, transcript_distribution};
use interleave_core::fixtures::{random_pair, FixtureSpec};
use interleave_core::mechanisms::{
    audit_guess_and_check, AuditConfig, AuditReport, AuditVerdict, Dataset, EventFamily, GuessCheckConfig, QueryScript,
    Statistic,
};
use interleave_core::renyi::{cdp_compose, to_approx_dp};
use interleave_core::{Error, PrivacyBudget, Shape, SystemPair, EQ_TOL};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::formats::{check_version, read_json, AdversaryFile, DecompositionFile, PairFile};
use crate::report::{emit, RunManifest};
use crate::{CalcCmd, CliError, DecomposeArgs, FixtureArgs, GuessCheckArgs, Outcome, SimulateArgs, SweepArgs, VerifyCmd};

/// JSON has no infinities; they are written as the string `"inf"`.
fn num(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else if x.is_nan() {
        Value::from("nan")
    } else if x > 0.0 {
        Value::from("inf")
    } else {
        Value::from("-inf")
    }
}

fn verdict_word(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn outcome(pass: bool) -> Outcome {
    if pass {
        Outcome::Pass
    } else {
        Outcome::Fail
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct VerifyReport {
    verdict: &'static str,
    notion: &'static str,
    achieved: Value,
    bound: f64,
    slack: Value,
    /// `0` compares input 0 against input 1.
    direction: usize,
    adversaries_per_direction: u128,
    witness_adversary: Option<AdversaryFile>,
    witness_transcripts: Vec<String>,
}

pub fn verify(cmd: VerifyCmd, json: bool) -> Result<Outcome, CliError> {
    let (path, sweep, manifest) = match &cmd {
        VerifyCmd::Approx { pair, eps, delta, sweep } => (
            pair,
            *sweep,
            RunManifest::new("verify approx").param("eps", eps).param("delta", delta),
        ),
        VerifyCmd::Rdp { pair, alpha, bound, sweep } => (
            pair,
            *sweep,
            RunManifest::new("verify rdp").param("alpha", alpha).param("bound", bound),
        ),
    };
    let manifest = manifest
        .input(path)
        .param("cap", sweep.cap.to_string())
        .param("method", format!("{:?}", sweep.method).to_lowercase());
    let pair = PairFile::load(path)?;
    let opts = sweep_options(sweep);
    let (notion, v, what) = match cmd {
        VerifyCmd::Approx { eps, delta, .. } => {
            ("approx_dp", verify_approx_dp(&pair, eps, delta, opts)?, format!("({eps}, {delta})-DP"))
        }
        VerifyCmd::Rdp { alpha, bound, .. } => {
            ("rdp", verify_rdp(&pair, alpha, bound, opts)?, format!("({alpha}, {bound})-RDP"))
        }
    };
    let report = verify_report(notion, &pair, &v);
    emit(json, manifest, &report, || {
        let mut s = String::new();
        let _ = writeln!(s, "{}: {what} of {}", report.verdict, path.display());
        let _ = writeln!(
            s,
            "worst case {} against bound {} (direction {}, {} adversaries per direction)",
            fmt_num(v.achieved),
            v.bound,
            v.direction,
            v.adversaries
        );
        if !v.passed {
            if let Some(adv) = &report.witness_adversary {
                let _ = writeln!(s, "witness adversary:\n{}", toml::to_string(adv).unwrap_or_default().trim_end());
            }
            for t in &report.witness_transcripts {
                let _ = writeln!(s, "  witness transcript: {t}");
            }
        }
        s
    });
    Ok(outcome(v.passed))
}

fn sweep_options(s: SweepArgs) -> SweepOptions {
    SweepOptions {
        cap: s.cap,
        method: s.method.into(),
    }
}

fn fmt_num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.6e}")
    } else {
        format!("{x}")
    }
}

fn verify_report(notion: &'static str, pair: &SystemPair, v: &VerificationVerdict) -> VerifyReport {
    let shapes = [Shape::of(&pair.m0)];
    VerifyReport {
        verdict: verdict_word(v.passed),
        notion,
        achieved: num(v.achieved),
        bound: v.bound,
        slack: num(v.slack()),
        direction: v.direction,
        adversaries_per_direction: v.adversaries,
        witness_adversary: v
            .witness_adversary
            .as_ref()
            .map(|a| AdversaryFile::from_adversary(a, &shapes)),
        witness_transcripts: v.witness_set.iter().map(|t| render_transcript(&shapes, t)).collect(),
    }
}

#[derive(Serialize)]
struct DecomposeReport {
    verdict: &'static str,
    output: Option<String>,
    epsilon: f64,
    delta: f64,
    /// Branch weights of approximate randomized response.
    weights: Option<[f64; 3]>,
    adversaries_checked: u128,
    max_identity_gap: Option<f64>,
    failure: Option<String>,
}

pub fn decompose(args: DecomposeArgs, json: bool) -> Result<Outcome, CliError> {
    let manifest = RunManifest::new("decompose")
        .input(&args.pair)
        .param("eps", args.eps)
        .param("delta", args.delta)
        .param("output", args.output.display().to_string());
    let pair = PairFile::load(&args.pair)?;
    let d = match decompose_pair(&pair, args.eps, args.delta) {
        Ok(d) => d,
        Err(Error::Construction { stage, message }) => {
            let report = DecomposeReport {
                verdict: "FAIL",
                output: None,
                epsilon: args.eps,
                delta: args.delta,
                weights: None,
                adversaries_checked: 0,
                max_identity_gap: None,
                failure: Some(format!("{stage}: {message}")),
            };
            emit(json, manifest, &report, || {
                format!(
                    "FAIL: {} admits no ({}, {}) decomposition\n  {stage}: {message}\n",
                    args.pair.display(),
                    args.eps,
                    args.delta
                )
            });
            return Ok(Outcome::Fail);
        }
        Err(e) => return Err(e.into()),
    };
    let text = toml::to_string(&DecompositionFile::from_decomposition(&d))
        .map_err(|e| CliError::Io(format!("serializing the decomposition: {e}")))?;
    write_file(&args.output, &text)?;

    let en = enumerate_adversaries(&[Shape::of(&pair.m0)], pair.horizon(), args.cap)?;
    let checked = en.total();
    let gap = max_over_adversaries(en, |a| d.identity_gap(a))?.map_or(0.0, |(g, _)| g);
    let pass = gap <= EQ_TOL;
    let report = DecomposeReport {
        verdict: verdict_word(pass),
        output: Some(args.output.display().to_string()),
        epsilon: d.epsilon,
        delta: d.delta,
        weights: Some(d.weights()),
        adversaries_checked: checked,
        max_identity_gap: Some(gap),
        failure: None,
    };
    emit(json, manifest, &report, || {
        format!(
            "{}: decomposition written to {}\nidentity check over {checked} adversaries: max per-transcript gap {gap:.3e} {} 1e-9\n",
            report.verdict,
            args.output.display(),
            if pass { "≤" } else { ">" }
        )
    });
    Ok(outcome(pass))
}

#[derive(Serialize)]
struct TranscriptRow {
    transcript: String,
    simulated: f64,
    direct: Option<f64>,
}

#[derive(Serialize)]
struct SimulateReport {
    verdict: &'static str,
    b: u8,
    transcripts: Vec<TranscriptRow>,
    total_mass: f64,
    /// `None` when some decomposition does not carry its source pair.
    max_gap: Option<f64>,
}

pub fn simulate(args: SimulateArgs, json: bool) -> Result<Outcome, CliError> {
    let (adv_path, decomp_paths) = args.files.split_last().expect("clap enforces two files");
    let mut manifest = RunManifest::new("simulate").param("b", args.b);
    for p in &args.files {
        manifest = manifest.input(p);
    }
    let decomps: Vec<Decomposition> = decomp_paths
        .iter()
        .map(|p| DecompositionFile::load(p))
        .collect::<Result<_, _>>()?;
    let shapes: Vec<Shape> = decomps.iter().map(|d| Shape::of(&d.pure.m0)).collect();
    let adv = AdversaryFile::load(adv_path, &shapes)?;
    let b = args.b as usize;
    let refs: Vec<&Decomposition> = decomps.iter().collect();
    let law = simulate_via_rr(&refs, &adv, b)?;
    let sources: Option<Vec<&SystemPair>> = decomps.iter().map(|d| d.source.as_ref()).collect();
    let direct = match &sources {
        Some(s) => Some(transcript_distribution(&adv, &s.iter().map(|p| p.get(b)).collect::<Vec<_>>())?),
        None => None,
    };
    let (rows, gap) = match &direct {
        Some(direct) => {
            let rows = law
                .aligned(direct)
                .into_iter()
                .filter(|&(_, p, q)| p > 0.0 || q > 0.0)
                .map(|(t, p, q)| TranscriptRow {
                    transcript: render_transcript(&shapes, t),
                    simulated: p,
                    direct: Some(q),
                })
                .collect();
            (rows, Some(law.max_gap(direct)))
        }
        None => {
            let rows = law
                .iter()
                .map(|(t, p)| TranscriptRow {
                    transcript: render_transcript(&shapes, t),
                    simulated: p,
                    direct: None,
                })
                .collect();
            (rows, None)
        }
    };
    let pass = gap.is_none_or(|g| g <= EQ_TOL);
    let report = SimulateReport {
        verdict: verdict_word(pass),
        b: args.b,
        total_mass: law.total_mass(),
        transcripts: rows,
        max_gap: gap,
    };
    emit(json, manifest, &report, || {
        let mut s = String::new();
        for r in &report.transcripts {
            match r.direct {
                Some(q) => {
                    let _ = writeln!(s, "{:.12}  (direct {q:.12})  {}", r.simulated, r.transcript);
                }
                None => {
                    let _ = writeln!(s, "{:.12}  {}", r.simulated, r.transcript);
                }
            }
        }
        match gap {
            Some(g) if pass => {
                let _ = writeln!(s, "PASS: max per-transcript gap ≤ 1e-9 (observed {g:.3e})");
            }
            Some(g) => {
                let _ = writeln!(s, "FAIL: max per-transcript gap {g:.3e} > 1e-9");
            }
            None => {
                let _ = writeln!(s, "no source pairs recorded; equality check skipped");
            }
        }
        s
    });
    Ok(outcome(pass))
}

#[derive(Serialize)]
struct CalcRow {
    method: &'static str,
    k: u64,
    epsilon: f64,
    delta: f64,
    eps_prime: Value,
    delta_prime: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_slack: Option<f64>,
}

#[derive(Serialize)]
struct CalcReport {
    rows: Vec<CalcRow>,
}

pub fn compose_calc(cmd: CalcCmd, json: bool) -> Result<Outcome, CliError> {
    let mut rows = Vec::new();
    let (name, base) = match &cmd {
        CalcCmd::Optimal { base, .. } => ("optimal", *base),
        CalcCmd::Advanced { base, .. } => ("advanced", *base),
        CalcCmd::Basic { base } => ("basic", *base),
    };
    let mut manifest = RunManifest::new(&format!("compose-calc {name}"))
        .param("k", base.k)
        .param("eps", base.eps)
        .param("delta", base.delta);
    let row = |method, eps_prime: f64, delta_prime: f64, delta_slack| CalcRow {
        method,
        k: base.k,
        epsilon: base.eps,
        delta: base.delta,
        eps_prime: num(eps_prime),
        delta_prime: num(delta_prime),
        delta_slack,
    };
    match cmd {
        CalcCmd::Optimal {
            eps_prime, delta_prime, ..
        } => {
            if eps_prime.is_empty() && delta_prime.is_empty() {
                return Err(CliError::Parse("optimal needs --eps-prime or --delta-prime".into()));
            }
            manifest = manifest.param("eps_prime", &eps_prime).param("delta_prime", &delta_prime);
            let targets = eps_prime
                .iter()
                .map(|&e| Target::EpsPrime(e))
                .chain(delta_prime.iter().map(|&d| Target::DeltaPrime(d)));
            for target in targets {
                let q = CompositionQuery {
                    k: base.k,
                    epsilon: base.eps,
                    delta: base.delta,
                    target,
                };
                let (e, d) = q.optimal()?;
                rows.push(row("optimal", e, d, None));
            }
        }
        CalcCmd::Advanced { delta_slack, .. } => {
            manifest = manifest.param("delta_slack", &delta_slack);
            for s in delta_slack {
                let (e, d) = advanced_composition(base.k, base.eps, base.delta, s)?;
                rows.push(row("advanced", e, d, Some(s)));
            }
        }
        CalcCmd::Basic { .. } => {
            let one = PrivacyBudget::ApproxDp {
                epsilon: base.eps,
                delta: base.delta,
            };
            let copies = usize::try_from(base.k)
                .ok()
                .filter(|&k| k <= 1 << 24)
                .ok_or_else(|| CliError::Parse(format!("k = {} is too large for basic composition", base.k)))?;
            match basic_composition(&vec![one; copies])? {
                PrivacyBudget::ApproxDp { epsilon, delta } => rows.push(row("basic", epsilon, delta, None)),
                other => unreachable!("basic composition returned {other}"),
            }
        }
    }
    let report = CalcReport { rows };
    emit(json, manifest, &report, || {
        let mut s = format!("{:<9} {:>8} {:>10} {:>10} {:>14} {:>14}\n", "method", "k", "ε", "δ", "ε'", "δ'");
        for r in &report.rows {
            let _ = writeln!(
                s,
                "{:<9} {:>8} {:>10} {:>10} {:>14} {:>14}",
                r.method,
                r.k,
                r.epsilon,
                r.delta,
                show(&r.eps_prime),
                show(&r.delta_prime)
            );
        }
        s
    });
    Ok(Outcome::Pass)
}

fn show(v: &Value) -> String {
    match v {
        Value::Number(n) => {
            let x = n.as_f64().unwrap_or(f64::NAN);
            if x == x.round() && x.abs() < 1e9 {
                format!("{x}")
            } else {
                format!("{x:.6e}")
            }
        }
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum BudgetsDoc {
    Versioned { format_version: u32, budgets: Vec<PrivacyBudget> },
    Bare(Vec<PrivacyBudget>),
}

#[derive(Serialize)]
struct BudgetReport {
    inputs: Vec<PrivacyBudget>,
    composed: PrivacyBudget,
    approx_dp: Option<PrivacyBudget>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<&'static str>,
}

pub fn budget_compose(path: &Path, to_dp: Option<f64>, json: bool) -> Result<Outcome, CliError> {
    let mut manifest = RunManifest::new("budget compose").input(path);
    if let Some(d) = to_dp {
        manifest = manifest.param("delta", d);
    }
    let budgets = match read_json::<BudgetsDoc>(path)? {
        BudgetsDoc::Versioned { format_version, budgets } => {
            check_version(format_version, path)?;
            budgets
        }
        BudgetsDoc::Bare(b) => b,
    };
    let composed = match budgets.first() {
        Some(PrivacyBudget::ApproxDp { .. }) => basic_composition(&budgets),
        _ => cdp_compose(&budgets),
    }
    .map_err(|e| CliError::from(e).in_file(path))?;
    let approx_dp = match (to_dp, composed) {
        (Some(_), PrivacyBudget::ApproxDp { .. }) => Some(composed),
        (Some(d), _) => Some(to_approx_dp(&composed, d)?),
        (None, _) => None,
    };
    let note = match budgets.first() {
        Some(first @ PrivacyBudget::ApproxDp { .. }) if budgets.iter().any(|b| b != first) => {
            Some("heterogeneous (ε, δ) budgets: basic composition; the optimal calculator covers k identical copies only")
        }
        Some(PrivacyBudget::ApproxDp { .. }) => Some("basic composition; compose-calc optimal gives tighter bounds"),
        _ => None,
    };
    let report = BudgetReport {
        inputs: budgets,
        composed,
        approx_dp,
        note,
    };
    emit(json, manifest, &report, || {
        let mut s = format!("{} budgets compose to {composed}\n", report.inputs.len());
        if let Some(a) = approx_dp {
            let _ = writeln!(s, "which implies {a}");
        }
        if let Some(n) = note {
            let _ = writeln!(s, "note: {n}");
        }
        s
    });
    Ok(Outcome::Pass)
}

pub fn audit_guess_check(args: GuessCheckArgs, json: bool) -> Result<Outcome, CliError> {
    let claim = args.claim.unwrap_or(4.0 * args.eps);
    let manifest = RunManifest::new("audit guess-check")
        .input(&args.dataset)
        .input(&args.neighbor)
        .input(&args.queries)
        .param("eps", args.eps)
        .param("c", args.c)
        .param("tol", args.tol)
        .param("runs", args.runs)
        .param("claim", claim)
        .param("confidence", args.confidence)
        .param("threshold_noise", !args.no_threshold_noise)
        .seed(args.seed);
    let text = std::fs::read_to_string(&args.queries)
        .map_err(|e| CliError::Io(format!("{}: {e}", args.queries.display())))?;
    let script = QueryScript::from_json(&text).map_err(|e| CliError::from(e).in_file(&args.queries))?;
    let mut columns: Vec<&str> = script
        .queries
        .iter()
        .map(|q| match &q.statistic {
            Statistic::Count { column, .. } | Statistic::Sum { column, .. } => column.as_str(),
        })
        .collect();
    columns.sort_unstable();
    columns.dedup();
    let load = |p: &Path| Dataset::from_csv_path(p, &columns).map_err(|e| CliError::from(e).in_file(p));
    let (x0, x1) = (load(&args.dataset)?, load(&args.neighbor)?);
    let mut gc = GuessCheckConfig::new(args.tol, args.c, args.eps)?;
    gc.threshold_noise = !args.no_threshold_noise;
    let config = AuditConfig {
        runs: args.runs,
        seed: args.seed,
        confidence: args.confidence,
        events: EventFamily::for_epsilon(args.eps),
    };
    let report: AuditReport = audit_guess_and_check(gc, [&x0, &x1], &script, claim, &config)?;
    let pass = report.verdict == AuditVerdict::Consistent;
    emit(json, manifest, &report, || {
        let word = match report.verdict {
            AuditVerdict::Consistent => "CONSISTENT",
            AuditVerdict::Inconsistent => "INCONSISTENT",
        };
        let mut s = format!(
            "{word}: certified lower bound {:.4} on the privacy loss vs claim {claim} ({} runs per dataset, {} events, confidence {})\n",
            report.lower_bound, report.runs, report.events_tested, report.confidence
        );
        if let Some(w) = &report.witness {
            let _ = writeln!(
                s,
                "worst event {:?}: counts {} vs {}, point estimate {}",
                w.event,
                w.counts[0],
                w.counts[1],
                fmt_num(w.log_ratio)
            );
        }
        s
    });
    Ok(outcome(pass))
}

pub fn fixtures_gen(args: FixtureArgs) -> Result<Outcome, CliError> {
    let spec = FixtureSpec {
        zero_prob: args.zero_prob,
        closeness: args.closeness,
        ..FixtureSpec::new(args.nx, args.ny, args.depth)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let pair = random_pair(&mut rng, &spec)?;
    let text = toml::to_string(&PairFile::from_pair(&pair))
        .map_err(|e| CliError::Io(format!("serializing the fixture: {e}")))?;
    let header = format!(
        "# fixtures gen --depth {} --nx {} --ny {} --seed {} --zero-prob {} --closeness {}\n",
        args.depth, args.nx, args.ny, args.seed, args.zero_prob, args.closeness
    );
    match &args.output {
        Some(p) => write_file(p, &(header + &text))?,
        None => crate::report::out(&format!("{header}{text}")),
    }
    Ok(Outcome::Pass)
}
