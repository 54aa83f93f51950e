//! Suite registry, seeded runs, and JSON/markdown reports.

use std::fmt;
use std::io;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::constants::DimPair;
use crate::error::{AuditError, Result};
use crate::manifold::SeededStream;
use crate::weight::DEFAULT_CALIBRATION_PATH;

mod suites;

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable consulted for the default seed.
pub const SEED_ENV: &str = "KPLANE_AUDIT_SEED";

pub const DEFAULT_SEED: u64 = 20_240_917;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Constants,
    GaussianEngine,
    Manifolds,
    Weights,
    Drury,
    CovarianceLemma,
    Theorem11,
    Theorem22,
    Extension2d,
    Extremality,
}

impl Suite {
    pub const ALL: [Suite; 10] = [
        Suite::Constants,
        Suite::GaussianEngine,
        Suite::Manifolds,
        Suite::Weights,
        Suite::Drury,
        Suite::CovarianceLemma,
        Suite::Theorem11,
        Suite::Theorem22,
        Suite::Extension2d,
        Suite::Extremality,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Constants => "constants",
            Suite::GaussianEngine => "gaussian_engine",
            Suite::Manifolds => "manifolds",
            Suite::Weights => "weights",
            Suite::Drury => "drury",
            Suite::CovarianceLemma => "covariance_lemma",
            Suite::Theorem11 => "theorem11",
            Suite::Theorem22 => "theorem22",
            Suite::Extension2d => "extension2d",
            Suite::Extremality => "extremality",
        }
    }

    /// Sample count used when none is given; `None` for deterministic suites.
    pub fn default_samples(self) -> Option<usize> {
        match self {
            Suite::Manifolds | Suite::Drury => Some(100_000),
            Suite::Weights | Suite::Theorem22 => Some(20_000),
            _ => None,
        }
    }

    pub fn min_samples(self) -> usize {
        match self {
            Suite::Manifolds | Suite::Drury | Suite::Weights => 1_000,
            Suite::Theorem22 => 100,
            _ => 0,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = AuditError;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .iter()
            .copied()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Suite::ALL.iter().map(|x| x.name()).collect();
                AuditError::Config(format!("unknown suite '{s}'; expected one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = AuditError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "markdown" | "md" => Ok(Self::Markdown),
            _ => Err(AuditError::Config(format!("unknown format '{s}'; expected json or markdown"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub suite: String,
    pub d: Option<usize>,
    pub k: Option<usize>,
    pub samples: Option<usize>,
    pub seed: u64,
    /// Replaces the tolerance of exact-identity checks.
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub format: ReportFormat,
    pub calibration: PathBuf,
}

impl SuiteConfig {
    pub fn new(suite: &str, seed: u64) -> Self {
        Self {
            suite: suite.to_string(),
            d: None,
            k: None,
            samples: None,
            seed,
            tol: None,
            out: None,
            format: ReportFormat::Json,
            calibration: PathBuf::from(DEFAULT_CALIBRATION_PATH),
        }
    }

    /// Checks the invariants and resolves the suite name.
    pub fn validate(&self) -> Result<Suite> {
        let suite: Suite = self.suite.parse()?;
        if let Some(t) = self.tol {
            if !(t > 0.0) || !t.is_finite() {
                return Err(AuditError::Config(format!("tolerance must be positive, got {t}")));
            }
        }
        if let Some(n) = self.samples {
            if n < suite.min_samples().max(2) {
                return Err(AuditError::Config(format!(
                    "suite {suite} needs at least {} samples, got {n}",
                    suite.min_samples().max(2)
                )));
            }
        }
        self.pair()?;
        Ok(suite)
    }

    pub fn pair(&self) -> Result<Option<DimPair>> {
        match (self.d, self.k) {
            (None, None) => Ok(None),
            (Some(d), Some(k)) => DimPair::new(d, k)
                .map(Some)
                .map_err(|e| AuditError::Config(format!("invalid pair: {e}"))),
            _ => Err(AuditError::Config("--d and --k must be given together".into())),
        }
    }

    pub fn samples_for(&self, suite: Suite) -> usize {
        self.samples.or(suite.default_samples()).unwrap_or(0)
    }
}

/// Default seed: the environment variable if set and valid, else a constant.
pub fn default_seed() -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| AuditError::Config(format!("{SEED_ENV} is not an unsigned integer: '{v}'"))),
        Err(_) => Ok(DEFAULT_SEED),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    ReportOnly,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::ReportOnly => "report-only",
        })
    }
}

/// One audited claim. `deviation ≤ tolerance` decides pass/fail; records
/// without a tolerance are report-only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub suite: String,
    pub claim: String,
    pub description: String,
    pub value: Option<f64>,
    pub stderr: Option<f64>,
    pub reference: Option<f64>,
    pub ratio: Option<f64>,
    pub deviation: Option<f64>,
    pub tolerance: Option<f64>,
    pub verdict: Verdict,
    pub seed: u64,
    /// Wall time in seconds; kept out of JSON so reports are reproducible.
    #[serde(skip)]
    pub runtime: f64,
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl AuditRecord {
    pub fn new(claim: &str, description: impl Into<String>) -> Self {
        Self {
            suite: String::new(),
            claim: claim.to_string(),
            description: description.into(),
            value: None,
            stderr: None,
            reference: None,
            ratio: None,
            deviation: None,
            tolerance: None,
            verdict: Verdict::ReportOnly,
            seed: 0,
            runtime: 0.0,
        }
    }

    pub fn value(mut self, v: f64) -> Self {
        self.value = finite(v);
        self.update_ratio();
        self
    }

    pub fn stderr(mut self, se: f64) -> Self {
        self.stderr = finite(se);
        self
    }

    pub fn reference(mut self, r: f64) -> Self {
        self.reference = finite(r);
        self.update_ratio();
        self
    }

    fn update_ratio(&mut self) {
        self.ratio = match (self.value, self.reference) {
            (Some(v), Some(r)) if r != 0.0 => finite(v / r),
            _ => None,
        };
    }

    /// Pass iff `deviation ≤ tolerance` (a non-finite deviation fails).
    pub fn test(mut self, deviation: f64, tolerance: f64) -> Self {
        self.deviation = finite(deviation);
        self.tolerance = Some(tolerance);
        self.verdict = if deviation <= tolerance { Verdict::Pass } else { Verdict::Fail };
        self
    }

    pub fn failed(claim: &str, description: impl Into<String>) -> Self {
        let mut r = Self::new(claim, description);
        r.verdict = Verdict::Fail;
        r
    }

    pub fn is_failure(&self) -> bool {
        self.verdict == Verdict::Fail
    }
}

/// Collects records for one suite and stamps suite name, seed and timing.
pub(crate) struct Ctx<'a> {
    pub cfg: &'a SuiteConfig,
    pub suite: Suite,
    pub stream: SeededStream,
    records: Vec<AuditRecord>,
    last: Instant,
}

impl<'a> Ctx<'a> {
    fn new(cfg: &'a SuiteConfig, suite: Suite) -> Self {
        Self {
            cfg,
            suite,
            stream: SeededStream::new(cfg.seed).named(suite.name()),
            records: Vec::new(),
            last: Instant::now(),
        }
    }

    pub fn push(&mut self, mut r: AuditRecord) {
        r.suite = self.suite.name().to_string();
        r.seed = self.cfg.seed;
        r.runtime = self.last.elapsed().as_secs_f64();
        self.last = Instant::now();
        self.records.push(r);
    }

    /// Records an error from a step as a failed record and carries on.
    pub fn push_result(&mut self, claim: &str, r: Result<AuditRecord>) {
        match r {
            Ok(rec) => self.push(rec),
            Err(e) => {
                let desc = match &e {
                    AuditError::Quadrature { achieved, .. } => {
                        format!("convergence failure (achieved error estimate {achieved:e}): {e}")
                    }
                    _ => format!("error: {e}"),
                };
                let mut rec = AuditRecord::failed(claim, desc);
                if let AuditError::Quadrature { achieved, .. } = e {
                    rec.deviation = finite(achieved);
                }
                self.push(rec);
            }
        }
    }

    /// Tolerance for exact-identity checks, overridable by `--tol`.
    pub fn exact_tol(&self, default: f64) -> f64 {
        self.cfg.tol.unwrap_or(default)
    }

    pub fn samples(&self) -> usize {
        self.cfg.samples_for(self.suite)
    }
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "unknown panic".into()
    }
}

/// Runs the configured suite. Configuration problems are errors; anything
/// going wrong inside the suite becomes a failed record.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<AuditRecord>> {
    let suite = cfg.validate()?;
    let mut ctx = Ctx::new(cfg, suite);
    let outcome = catch_unwind(AssertUnwindSafe(|| suites::run(&mut ctx)));
    match outcome {
        Ok(Ok(())) => {}
        Ok(Err(e)) => ctx.push(AuditRecord::failed("suite-error", format!("suite aborted: {e}"))),
        Err(p) => ctx.push(AuditRecord::failed("suite-panic", format!("panic: {}", panic_message(p)))),
    }
    Ok(ctx.records)
}

/// `0` when every pass/fail record passed, `1` otherwise.
pub fn exit_code(records: &[AuditRecord]) -> i32 {
    if records.iter().any(AuditRecord::is_failure) {
        1
    } else {
        0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub generator: String,
    pub records: Vec<AuditRecord>,
}

/// Pretty JSON whose floats are written as `d.dddddddddddddddde±x`
/// (17 significant digits).
struct SciFormatter<'a> {
    inner: PrettyFormatter<'a>,
}

impl Formatter for SciFormatter<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        write!(w, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "–".to_string(), |x| format!("{x:.10e}"))
}

fn markdown(records: &[AuditRecord]) -> String {
    let mut out = String::from("# Audit report\n");
    let mut suites: Vec<&str> = Vec::new();
    for r in records {
        if !suites.contains(&r.suite.as_str()) {
            suites.push(&r.suite);
        }
    }
    for s in suites {
        let rows: Vec<&AuditRecord> = records.iter().filter(|r| r.suite == s).collect();
        let seed = rows[0].seed;
        out.push_str(&format!("\n## {s} (seed {seed})\n\n"));
        out.push_str("| claim | description | value | stderr | reference | ratio | deviation | tolerance | verdict | runtime (s) |\n");
        out.push_str("|---|---|---|---|---|---|---|---|---|---|\n");
        for r in rows {
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {:.3} |\n",
                r.claim,
                r.description.replace('|', "\\|"),
                fmt_opt(r.value),
                fmt_opt(r.stderr),
                fmt_opt(r.reference),
                fmt_opt(r.ratio),
                fmt_opt(r.deviation),
                fmt_opt(r.tolerance),
                r.verdict,
                r.runtime
            ));
        }
    }
    let fails = records.iter().filter(|r| r.is_failure()).count();
    out.push_str(&format!("\n{} records, {fails} failed\n", records.len()));
    out
}

pub fn emit_report(records: &[AuditRecord], format: ReportFormat) -> Result<String> {
    if records.is_empty() {
        return Err(AuditError::Config("no records to report".into()));
    }
    match format {
        ReportFormat::Json => {
            let report = Report {
                schema_version: SCHEMA_VERSION,
                generator: format!("kplane-audit {}", env!("CARGO_PKG_VERSION")),
                records: records.to_vec(),
            };
            let mut buf = Vec::new();
            let fmt = SciFormatter { inner: PrettyFormatter::with_indent(b"  ") };
            let mut ser = serde_json::Serializer::with_formatter(&mut buf, fmt);
            report
                .serialize(&mut ser)
                .map_err(|e| AuditError::Config(format!("serialization failed: {e}")))?;
            buf.push(b'\n');
            Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
        }
        ReportFormat::Markdown => Ok(markdown(records)),
    }
}

pub fn parse_report(text: &str) -> Result<Report> {
    serde_json::from_str(text).map_err(|e| AuditError::Config(format!("malformed report: {e}")))
}

pub fn write_report(path: &Path, document: &str) -> Result<()> {
    std::fs::write(path, document).map_err(|e| AuditError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_records() -> Vec<AuditRecord> {
        let mut a = AuditRecord::new("one", "first").value(0.1).reference(3.0).test(1e-17, 1e-13);
        a.suite = "constants".into();
        let mut b = AuditRecord::new("two", "second | piped").value(f64::NAN).stderr(1.0 / 3.0);
        b.suite = "weights".into();
        vec![a, b]
    }

    #[test]
    fn verdicts_follow_tolerance() {
        let r = AuditRecord::new("c", "").test(2.0, 1.0);
        assert_eq!(r.verdict, Verdict::Fail);
        assert_eq!(AuditRecord::new("c", "").test(f64::NAN, 1.0).verdict, Verdict::Fail);
        assert_eq!(AuditRecord::new("c", "").verdict, Verdict::ReportOnly);
        assert_eq!(AuditRecord::new("c", "").value(2.0).reference(4.0).ratio, Some(0.5));
    }

    #[test]
    fn json_round_trip_and_digits() {
        let recs = sample_records();
        let text = emit_report(&recs, ReportFormat::Json).unwrap();
        assert!(text.contains("1.0000000000000001e-1") || text.contains("1.0000000000000000e-1"));
        assert!(text.contains("\"value\": null"));
        let back = parse_report(&text).unwrap();
        assert_eq!(back.records, recs);
        assert_eq!(back.schema_version, SCHEMA_VERSION);
    }

    #[test]
    fn empty_report_is_an_error() {
        assert!(emit_report(&[], ReportFormat::Json).is_err());
        assert!(emit_report(&[], ReportFormat::Markdown).is_err());
    }

    #[test]
    fn markdown_has_a_table_per_suite() {
        let md = emit_report(&sample_records(), ReportFormat::Markdown).unwrap();
        assert!(md.contains("## constants") && md.contains("## weights"));
        assert!(md.contains("second \\| piped"));
    }

    #[test]
    fn config_validation() {
        let mut cfg = SuiteConfig::new("nope", 1);
        assert!(matches!(run_suite(&cfg), Err(AuditError::Config(_))));
        cfg.suite = "constants".into();
        cfg.tol = Some(-1.0);
        assert!(cfg.validate().is_err());
        cfg.tol = None;
        cfg.d = Some(3);
        assert!(cfg.validate().is_err());
        cfg.k = Some(3);
        assert!(cfg.validate().is_err());
        cfg.k = Some(1);
        assert!(cfg.validate().is_ok());
        let mut cfg = SuiteConfig::new("drury", 1);
        cfg.samples = Some(10);
        assert!(cfg.validate().is_err());
    }

    fn any_f64() -> impl Strategy<Value = f64> {
        prop_oneof![
            any::<f64>().prop_filter("finite", |v| v.is_finite()),
            Just(f64::MIN_POSITIVE),
            Just(-0.0),
            Just(5e-324),
        ]
    }

    proptest! {
        #[test]
        fn verdict_is_pass_iff_within_tolerance(dev in any_f64(), tol in 1e-300f64..1e300) {
            let r = AuditRecord::new("c", "").test(dev, tol);
            prop_assert_eq!(r.verdict == Verdict::Pass, dev <= tol);
            prop_assert_eq!(exit_code(&[r.clone()]), if dev <= tol { 0 } else { 1 });
            prop_assert_eq!(exit_code(&[r, AuditRecord::new("d", "")]), if dev <= tol { 0 } else { 1 });
        }

        #[test]
        fn json_round_trip_is_exact(
            value in any_f64(),
            stderr in proptest::option::of(any_f64()),
            reference in proptest::option::of(any_f64()),
            seed in any::<u64>(),
            claim in "[a-z-]{1,20}",
            description in "\\PC{0,40}",
        ) {
            let mut r = AuditRecord::new(&claim, description).value(value);
            if let Some(se) = stderr {
                r = r.stderr(se);
            }
            if let Some(rf) = reference {
                r = r.reference(rf);
            }
            r.suite = "weights".into();
            r.seed = seed;
            let text = emit_report(&[r.clone()], ReportFormat::Json).unwrap();
            let back = parse_report(&text).unwrap();
            let bits = |v: Option<f64>| v.map(f64::to_bits);
            let got = &back.records[0];
            prop_assert_eq!(bits(got.value), bits(r.value));
            prop_assert_eq!(bits(got.stderr), bits(r.stderr));
            prop_assert_eq!(bits(got.reference), bits(r.reference));
            prop_assert_eq!(bits(got.ratio), bits(r.ratio));
            prop_assert_eq!(&got.description, &r.description);
            prop_assert_eq!(got.seed, seed);
            prop_assert_eq!(emit_report(&back.records, ReportFormat::Json).unwrap(), text);
        }
    }
}
