//! Verification suites run by `dpfdr verify`.
//!
//! Each suite evaluates one family of checks at the parameters in its
//! `*Params` struct; the defaults are the acceptance settings.

use dpfdr_core::harness::{
    privacy_audit_one_shot, privacy_verify_exhaustive, random_c_close_pair, selection_accuracy,
    simulate_fdr, verify_fdr1_min_term, verify_fdr_bounds, verify_submartingale, AuditResult,
    BoundCheck, Check, ExhaustiveGap, ScenarioGenerator, Verdict,
};
use dpfdr_core::mechanisms::{one_shot_lambda, DEFAULT_ONE_SHOT_C};
use dpfdr_core::noise::split_seed;
use dpfdr_core::private_fdr::SelectionBackend;
use dpfdr_core::procedures::step_up_bhq;
use dpfdr_core::{NoiseStream, PValueVector, Result, TrialExecutor};
use serde_json::{json, Map, Value};

use crate::format::{fmt_f64, num};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, clap::ValueEnum)]
pub enum Suite {
    FdrBounds,
    PrivacyExhaustive,
    PrivacyAudit,
    OneshotAccuracy,
    Submartingale,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::FdrBounds => "fdr-bounds",
            Suite::PrivacyExhaustive => "privacy-exhaustive",
            Suite::PrivacyAudit => "privacy-audit",
            Suite::OneshotAccuracy => "oneshot-accuracy",
            Suite::Submartingale => "submartingale",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inconclusive => "inconclusive",
        }
    }

    fn from_pass(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

impl From<Verdict> for Status {
    fn from(v: Verdict) -> Self {
        match v {
            Verdict::Pass => Status::Pass,
            Verdict::Fail => Status::Fail,
            Verdict::Inconclusive => Status::Inconclusive,
        }
    }
}

/// How an estimate is compared with its bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Relation {
    /// `estimate <= bound + slack_se * se`.
    AtMost { slack_se: f64 },
    /// `estimate >= bound`.
    AtLeast,
    /// `|estimate - bound| <= tolerance`.
    Within { tolerance: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: String,
    pub estimate: f64,
    pub se: Option<f64>,
    pub bound: f64,
    pub relation: Relation,
    pub status: Status,
    /// Check-specific numbers, in insertion order.
    pub extra: Vec<(&'static str, f64)>,
}

impl CheckRow {
    fn from_bound(b: &BoundCheck) -> Self {
        Self {
            name: check_name(b.check),
            estimate: b.estimate.mean,
            se: Some(b.estimate.se),
            bound: b.bound,
            relation: Relation::AtMost {
                slack_se: b.slack_se,
            },
            status: Status::from_pass(b.pass),
            extra: vec![("trials", b.estimate.n as f64)],
        }
    }

    pub fn to_json(&self) -> Value {
        let mut o = Map::new();
        o.insert("name".into(), json!(self.name));
        o.insert("estimate".into(), num(self.estimate));
        o.insert("se".into(), self.se.map_or(Value::Null, num));
        o.insert("bound".into(), num(self.bound));
        match self.relation {
            Relation::AtMost { slack_se } => {
                o.insert("relation".into(), json!("<="));
                o.insert("slack_se".into(), num(slack_se));
            }
            Relation::AtLeast => {
                o.insert("relation".into(), json!(">="));
            }
            Relation::Within { tolerance } => {
                o.insert("relation".into(), json!("within"));
                o.insert("tolerance".into(), num(tolerance));
            }
        }
        o.insert("pass".into(), json!(self.status == Status::Pass));
        o.insert("status".into(), json!(self.status.as_str()));
        for (k, v) in &self.extra {
            o.insert((*k).into(), num(*v));
        }
        Value::Object(o)
    }
}

pub fn check_name(c: Check) -> String {
    match c {
        Check::Fdr => "fdr".into(),
        Check::FdrK(k) => format!("fdr_k(k={k})"),
        Check::FdrSupK(k) => format!("fdr_sup_k(k={k})"),
        Check::SubmartingaleMax => "submartingale_max".into(),
        Check::Fdr1MinTerm => "fdr1_min_term".into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub parameters: Vec<(&'static str, Value)>,
    pub checks: Vec<CheckRow>,
}

impl SuiteReport {
    /// `Fail` if any check fails, `Inconclusive` if every check is, else
    /// `Pass`.
    pub fn status(&self) -> Status {
        if self.checks.iter().any(|c| c.status == Status::Fail) {
            Status::Fail
        } else if !self.checks.is_empty()
            && self.checks.iter().all(|c| c.status == Status::Inconclusive)
        {
            Status::Inconclusive
        } else {
            Status::Pass
        }
    }

    pub fn to_json(&self) -> Value {
        let mut params = Map::new();
        for (k, v) in &self.parameters {
            params.insert((*k).into(), v.clone());
        }
        json!({
            "suite": self.suite.name(),
            "seed": self.seed,
            "parameters": params,
            "checks": self.checks.iter().map(CheckRow::to_json).collect::<Vec<_>>(),
            "status": self.status().as_str(),
        })
    }

    /// One row per check: `name,estimate,se,bound,status`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("name,estimate,se,bound,status\n");
        for c in &self.checks {
            let se = c.se.map(fmt_f64).unwrap_or_default();
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                c.name,
                fmt_f64(c.estimate),
                se,
                fmt_f64(c.bound),
                c.status.as_str()
            ));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdrBoundsParams {
    pub m: usize,
    pub q: f64,
    pub k_list: Vec<usize>,
    pub trials: u64,
    /// Size of the global-null scenario for the classical step-up check.
    pub classical_m: usize,
    pub classical_trials: u64,
    pub classical_tolerance: f64,
}

impl Default for FdrBoundsParams {
    fn default() -> Self {
        Self {
            m: 1000,
            q: 0.1,
            k_list: vec![1, 2, 100],
            trials: 10_000,
            classical_m: 100,
            classical_trials: 20_000,
            classical_tolerance: 0.01,
        }
    }
}

/// Step-up under the global null has FDR exactly `q`; the adversarial
/// oracles are then checked against their bounds.
pub fn run_fdr_bounds<E: TrialExecutor>(
    p: &FdrBoundsParams,
    seed: u64,
    exec: &E,
) -> Result<SuiteReport> {
    let gen = ScenarioGenerator::global_null(p.classical_m)?;
    let q = p.q;
    let step_up = move |pv: &PValueVector, _: &mut NoiseStream| step_up_bhq(pv, q);
    let classical = simulate_fdr(
        &step_up,
        &gen,
        p.classical_trials,
        1,
        split_seed(seed, 0),
        exec,
    )?;
    let mut checks = vec![CheckRow {
        name: "classical_step_up_fdr".into(),
        estimate: classical.fdr.mean,
        se: Some(classical.fdr.se),
        bound: q,
        relation: Relation::Within {
            tolerance: p.classical_tolerance,
        },
        status: Status::from_pass((classical.fdr.mean - q).abs() <= p.classical_tolerance),
        extra: vec![
            ("trials", p.classical_trials as f64),
            ("m", p.classical_m as f64),
        ],
    }];
    let rows = verify_fdr_bounds(p.m, q, &p.k_list, p.trials, split_seed(seed, 1), exec)?;
    checks.extend(rows.iter().map(CheckRow::from_bound));
    Ok(SuiteReport {
        suite: Suite::FdrBounds,
        seed,
        parameters: vec![
            ("m", json!(p.m)),
            ("q", num(q)),
            ("k", json!(p.k_list)),
            ("trials", json!(p.trials)),
            ("classical_m", json!(p.classical_m)),
            ("classical_trials", json!(p.classical_trials)),
        ],
        checks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubmartingaleParams {
    pub m: usize,
    pub q: f64,
    pub trials: u64,
}

impl Default for SubmartingaleParams {
    fn default() -> Self {
        Self {
            m: 1000,
            q: 0.1,
            trials: 100_000,
        }
    }
}

pub fn run_submartingale<E: TrialExecutor>(
    p: &SubmartingaleParams,
    seed: u64,
    exec: &E,
) -> Result<SuiteReport> {
    let max = verify_submartingale(p.m, p.trials, split_seed(seed, 0), exec)?;
    let min_term = verify_fdr1_min_term(p.m, p.q, p.trials, split_seed(seed, 1), exec)?;
    Ok(SuiteReport {
        suite: Suite::Submartingale,
        seed,
        parameters: vec![
            ("m", json!(p.m)),
            ("q", num(p.q)),
            ("trials", json!(p.trials)),
        ],
        checks: vec![CheckRow::from_bound(&max), CheckRow::from_bound(&min_term)],
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyParams {
    pub m: usize,
    pub k: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub c: f64,
    pub factor: f64,
    /// Peeling uses the literal per-round scale `√(k ln(1/δ))/ε` rather than
    /// the composition-derived one.
    pub paper_exact: bool,
    pub trials: u64,
    pub min_fraction: f64,
}

impl Default for AccuracyParams {
    fn default() -> Self {
        Self {
            m: 10_000,
            k: 50,
            epsilon: 1.0,
            delta: 1e-6,
            c: DEFAULT_ONE_SHOT_C,
            factor: 2.0,
            paper_exact: true,
            trials: 100,
            min_fraction: 0.95,
        }
    }
}

pub fn run_accuracy<E: TrialExecutor>(
    p: &AccuracyParams,
    seed: u64,
    exec: &E,
) -> Result<SuiteReport> {
    let mut checks = Vec::new();
    for (b, (backend, name)) in [
        (SelectionBackend::Peeling, "peeling_within_envelope"),
        (SelectionBackend::OneShot, "one_shot_within_envelope"),
    ]
    .into_iter()
    .enumerate()
    {
        let r = selection_accuracy(
            backend,
            p.m,
            p.k,
            p.epsilon,
            p.delta,
            p.c,
            p.factor,
            p.paper_exact,
            p.trials,
            split_seed(seed, b as u64),
            exec,
        )?;
        let fraction = r.within_fraction();
        let worst = r
            .max_errors
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(CheckRow {
            name: name.into(),
            estimate: fraction,
            se: None,
            bound: p.min_fraction,
            relation: Relation::AtLeast,
            status: Status::from_pass(fraction >= p.min_fraction),
            extra: vec![
                ("envelope", r.envelope),
                ("lambda", r.lambda),
                ("worst_error", worst),
            ],
        });
    }
    Ok(SuiteReport {
        suite: Suite::OneshotAccuracy,
        seed,
        parameters: vec![
            ("m", json!(p.m)),
            ("k", json!(p.k)),
            ("epsilon", num(p.epsilon)),
            ("delta", num(p.delta)),
            ("C", num(p.c)),
            ("factor", num(p.factor)),
            ("paper_exact", json!(p.paper_exact)),
            ("trials", json!(p.trials)),
        ],
        checks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExhaustiveParams {
    pub m: usize,
    pub k: usize,
    pub epsilon: f64,
    pub delta: f64,
    /// Closeness constant; `ε / (8 √(k ln(1/δ)))` when `None`.
    pub c: Option<f64>,
    pub pairs: u64,
    /// Compare each `q` with itself instead of a perturbed copy.
    pub identical: bool,
}

impl Default for ExhaustiveParams {
    fn default() -> Self {
        Self {
            m: 12,
            k: 3,
            epsilon: 1.0,
            delta: 1e-3,
            c: None,
            pairs: 1000,
            identical: false,
        }
    }
}

impl ExhaustiveParams {
    pub fn closeness(&self) -> f64 {
        self.c.unwrap_or_else(|| {
            self.epsilon / (8.0 * (self.k as f64 * (1.0 / self.delta).ln()).sqrt())
        })
    }
}

pub fn run_exhaustive<E: TrialExecutor>(
    p: &ExhaustiveParams,
    seed: u64,
    exec: &E,
) -> Result<SuiteReport> {
    let c = p.closeness();
    let gaps = exec
        .map_trials(p.pairs, |i| {
            let (q, q2) = random_c_close_pair(p.m, c, &mut NoiseStream::for_trial(seed, i))?;
            let q2 = if p.identical { q.clone() } else { q2 };
            privacy_verify_exhaustive(&q, &q2, p.epsilon, p.k)
        })
        .into_iter()
        .collect::<Result<Vec<ExhaustiveGap>>>()?;
    let mut checks = Vec::new();
    for (name, pick) in [
        (
            "max_delta_hat(q,q')",
            (|g: &ExhaustiveGap| g.forward) as fn(&ExhaustiveGap) -> f64,
        ),
        ("max_delta_hat(q',q)", |g: &ExhaustiveGap| g.backward),
    ] {
        let worst = gaps.iter().map(pick).fold(0.0, f64::max);
        let failing = gaps.iter().filter(|g| pick(g) > p.delta).count();
        checks.push(CheckRow {
            name: name.into(),
            estimate: worst,
            se: None,
            bound: p.delta,
            relation: Relation::AtMost { slack_se: 0.0 },
            status: Status::from_pass(failing == 0),
            extra: vec![("failing_pairs", failing as f64)],
        });
    }
    Ok(SuiteReport {
        suite: Suite::PrivacyExhaustive,
        seed,
        parameters: vec![
            ("m", json!(p.m)),
            ("k", json!(p.k)),
            ("epsilon", num(p.epsilon)),
            ("delta", num(p.delta)),
            ("c", num(c)),
            ("pairs", json!(p.pairs)),
            ("identical", json!(p.identical)),
        ],
        checks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditParams {
    pub m: usize,
    pub k: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub c: f64,
    pub samples: u64,
}

impl Default for AuditParams {
    fn default() -> Self {
        Self {
            m: 6,
            k: 2,
            epsilon: 1.0,
            delta: 1e-3,
            c: DEFAULT_ONE_SHOT_C,
            samples: 10_000_000,
        }
    }
}

/// Audits the one-shot selection on all-zero counts against the same
/// counts with the first coordinate raised by one.
pub fn run_audit<E: TrialExecutor>(p: &AuditParams, seed: u64, exec: &E) -> Result<SuiteReport> {
    let x = vec![0.0; p.m];
    let mut x2 = x.clone();
    if let Some(first) = x2.first_mut() {
        *first = 1.0;
    }
    let lambda = one_shot_lambda(p.k, p.m, p.epsilon, p.delta, p.c)?.lambda;
    let report = privacy_audit_one_shot(
        &x, &x2, p.k, lambda, p.epsilon, p.delta, p.samples, seed, exec,
    )?;
    let row = |name: &str, r: &AuditResult| CheckRow {
        name: name.into(),
        estimate: r.delta_hat,
        se: None,
        bound: p.delta,
        relation: Relation::AtMost { slack_se: 0.0 },
        status: r.verdict.into(),
        extra: vec![
            ("half_width", r.half_width),
            ("lower", r.lower),
            ("upper", r.upper),
        ],
    };
    Ok(SuiteReport {
        suite: Suite::PrivacyAudit,
        seed,
        parameters: vec![
            ("m", json!(p.m)),
            ("k", json!(p.k)),
            ("epsilon", num(p.epsilon)),
            ("delta", num(p.delta)),
            ("C", num(p.c)),
            ("lambda", num(lambda)),
            ("samples", json!(p.samples)),
        ],
        checks: vec![
            row("delta_hat(x,x')", &report.forward),
            row("delta_hat(x',x)", &report.backward),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use dpfdr_core::Sequential;

    #[test]
    fn identical_pairs_have_zero_gap() {
        let p = ExhaustiveParams {
            m: 6,
            pairs: 20,
            identical: true,
            ..Default::default()
        };
        let r = run_exhaustive(&p, 1, &Sequential).unwrap();
        assert!(r
            .checks
            .iter()
            .all(|c| c.estimate == 0.0 && c.status == Status::Pass));
        assert_eq!(r.status(), Status::Pass);
    }

    #[test]
    fn default_closeness_constant() {
        let c = ExhaustiveParams::default().closeness();
        assert!((c - 1.0 / (8.0 * (3.0 * 1000f64.ln()).sqrt())).abs() < 1e-15);
    }

    #[test]
    fn overall_status_rules() {
        let row = |status| CheckRow {
            name: "x".into(),
            estimate: 0.0,
            se: None,
            bound: 0.0,
            relation: Relation::AtLeast,
            status,
            extra: vec![],
        };
        let mut r = SuiteReport {
            suite: Suite::PrivacyAudit,
            seed: 0,
            parameters: vec![],
            checks: vec![row(Status::Inconclusive), row(Status::Inconclusive)],
        };
        assert_eq!(r.status(), Status::Inconclusive);
        r.checks[0].status = Status::Pass;
        assert_eq!(r.status(), Status::Pass);
        r.checks[1].status = Status::Fail;
        assert_eq!(r.status(), Status::Fail);
    }

    #[test]
    fn small_fdr_bounds_report_is_deterministic() {
        let p = FdrBoundsParams {
            m: 50,
            trials: 200,
            k_list: vec![1, 5],
            classical_trials: 200,
            ..Default::default()
        };
        let a = run_fdr_bounds(&p, 3, &Sequential).unwrap().to_json();
        let b = run_fdr_bounds(&p, 3, &crate::Parallel::new(Some(3)))
            .unwrap()
            .to_json();
        assert_eq!(a, b);
        assert_eq!(a["checks"].as_array().unwrap().len(), 5);
    }
}
