//! Experiment configs, records, and replay plumbing behind the
//! command-line binary.
//!
//! A run is described by a [`RunConfig`] — a command, a seed, and a flat
//! parameter map — loadable from a TOML file and overridable by flags.
//! Executing a config produces an [`ExperimentRecord`]: the config snapshot,
//! per-trial outcomes, and summary statistics, written as JSON (machines)
//! plus Markdown (humans). Replaying a record re-executes its embedded
//! config and demands the summary reproduce byte for byte; every random
//! choice descends from the config seed, so it does.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::attacks::{
    alg1_distinguish, alg2_distinguish, Alg1Config, Alg2Config, QueryLearning,
};
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::hilbert::{haar_unitary, DensityMatrix, PureState};
use crate::oracle::{ChfsInstance, LengthFunction};
use crate::primitives::{
    distinguishing_game, prfsg_hybrid_adversary_suite, prfsg_key_guess_exact, prsg_gen,
    pru_apply, PrfsgParams, PrsgCandidate, PrsgStep, PruCandidate, PruLayer,
};
use crate::rng::LabRng;
use crate::state_tests::PurityBatteryConfig;
use crate::tomography::NoiseMode;
use crate::verify::{
    self, GeometryCase, Verdict, VerificationReport,
};

/// Version stamp embedded in every record; bumped when the record layout
/// changes incompatibly.
pub const SCHEMA_VERSION: u32 = 1;

/// Built-in default seed, used when neither flag, config file, nor the
/// `CHFS_LAB_SEED` environment variable provides one.
pub const DEFAULT_SEED: u64 = 0x1ab;

const STREAM_HARNESS: u64 = 0x6861_726e;

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

/// The experiment selector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Verify one analytic claim, or the whole default grid.
    Lemma,
    /// Distinguishing attack against a keyed-unitary candidate.
    AttackPru,
    /// Distinguishing attack against a keyed state-generator candidate.
    AttackPrsg,
    /// Cap-geometry checks behind the separation argument.
    Conjecture,
    /// Security game against the keyed state family.
    PrfsgGame,
    /// Summarize the records already in the output directory.
    Report,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Lemma,
        Command::AttackPru,
        Command::AttackPrsg,
        Command::Conjecture,
        Command::PrfsgGame,
        Command::Report,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Lemma => "lemma",
            Command::AttackPru => "attack-pru",
            Command::AttackPrsg => "attack-prsg",
            Command::Conjecture => "conjecture",
            Command::PrfsgGame => "prfsg-game",
            Command::Report => "report",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown command `{s}`")))
    }
}

/// One parameter value: TOML and JSON scalars.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Float(f64),
    Text(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Text(v) => write!(f, "{v}"),
        }
    }
}

/// A complete run description. Round-trips through its TOML form unchanged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    /// Worker threads; 0 means one per logical core.
    pub threads: usize,
    pub output_dir: PathBuf,
    /// Flat command parameters (λ, n, κ, r, τ, samples, …).
    pub params: BTreeMap<String, ParamValue>,
}

/// Keys with structural meaning in the TOML form; parameters may not reuse
/// them.
const STRUCTURAL_KEYS: [&str; 4] = ["command", "seed", "threads", "output-dir"];

impl RunConfig {
    pub fn new(command: Command, seed: u64) -> Self {
        RunConfig {
            command,
            seed,
            threads: 0,
            output_dir: PathBuf::from("out"),
            params: BTreeMap::new(),
        }
    }

    /// Insert or overwrite one parameter.
    pub fn set(&mut self, key: &str, value: ParamValue) -> Result<()> {
        if STRUCTURAL_KEYS.contains(&key) {
            return Err(Error::InvalidArgument(format!(
                "`{key}` is a structural field, not a parameter"
            )));
        }
        self.params.insert(key.to_string(), value);
        Ok(())
    }

    /// Serialize to a flat TOML document: structural fields first, then the
    /// parameters in key order.
    pub fn to_toml(&self) -> String {
        let mut table = toml::Table::new();
        table.insert("command".into(), toml::Value::String(self.command.name().into()));
        table.insert("seed".into(), toml::Value::Integer(self.seed as i64));
        table.insert("threads".into(), toml::Value::Integer(self.threads as i64));
        table.insert(
            "output-dir".into(),
            toml::Value::String(self.output_dir.to_string_lossy().into_owned()),
        );
        for (k, v) in &self.params {
            let value = match v {
                ParamValue::Int(i) => toml::Value::Integer(*i),
                ParamValue::Float(f) => toml::Value::Float(*f),
                ParamValue::Text(s) => toml::Value::String(s.clone()),
            };
            table.insert(k.clone(), value);
        }
        table.to_string()
    }

    /// Parse a flat TOML document produced by [`RunConfig::to_toml`] or
    /// written by hand.
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e| Error::InvalidArgument(format!("config file is not valid TOML: {e}")))?;
        let mut config = RunConfig::new(Command::Lemma, DEFAULT_SEED);
        let mut saw_command = false;
        for (key, value) in table {
            match key.as_str() {
                "command" => {
                    let name = value.as_str().ok_or_else(|| {
                        Error::InvalidArgument("`command` must be a string".into())
                    })?;
                    config.command = name.parse()?;
                    saw_command = true;
                }
                "seed" => {
                    config.seed = toml_u64(&value, "seed")?;
                }
                "threads" => {
                    config.threads = toml_u64(&value, "threads")? as usize;
                }
                "output-dir" => {
                    let dir = value.as_str().ok_or_else(|| {
                        Error::InvalidArgument("`output-dir` must be a string".into())
                    })?;
                    config.output_dir = PathBuf::from(dir);
                }
                _ => {
                    let param = match value {
                        toml::Value::Integer(i) => ParamValue::Int(i),
                        toml::Value::Float(f) => ParamValue::Float(f),
                        toml::Value::String(s) => ParamValue::Text(s),
                        other => {
                            return Err(Error::InvalidArgument(format!(
                                "parameter `{key}` has unsupported type {}",
                                other.type_str()
                            )))
                        }
                    };
                    config.params.insert(key, param);
                }
            }
        }
        if !saw_command {
            return Err(Error::InvalidArgument("config file is missing `command`".into()));
        }
        Ok(config)
    }

    /// Reject any parameter key not in `allowed`, naming the offender.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        for key in self.params.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(Error::InvalidArgument(format!(
                    "unknown parameter `{key}` for command {}",
                    self.command
                )));
            }
        }
        Ok(())
    }

    /// Read an unsigned integer parameter with a default.
    pub fn get_u(&self, key: &str, default: u64) -> Result<u64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(ParamValue::Int(v)) if *v >= 0 => Ok(*v as u64),
            Some(other) => Err(Error::InvalidArgument(format!(
                "parameter `{key}` must be a nonnegative integer, got `{other}`"
            ))),
        }
    }

    /// Read a float parameter (integers are accepted) with a default.
    pub fn get_f(&self, key: &str, default: f64) -> Result<f64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(ParamValue::Float(v)) => Ok(*v),
            Some(ParamValue::Int(v)) => Ok(*v as f64),
            Some(other) => Err(Error::InvalidArgument(format!(
                "parameter `{key}` must be a number, got `{other}`"
            ))),
        }
    }

    /// Read a string parameter with a default.
    pub fn get_text(&self, key: &str, default: &str) -> Result<String> {
        match self.params.get(key) {
            None => Ok(default.to_string()),
            Some(ParamValue::Text(v)) => Ok(v.clone()),
            Some(other) => Err(Error::InvalidArgument(format!(
                "parameter `{key}` must be a string, got `{other}`"
            ))),
        }
    }
}

fn toml_u64(value: &toml::Value, key: &str) -> Result<u64> {
    match value {
        toml::Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(Error::InvalidArgument(format!("`{key}` must be a nonnegative integer"))),
    }
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

/// One per-trial (or per-cell) scalar outcome.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub label: String,
    pub value: f64,
}

/// Summary statistics of a run; the part replay compares byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub headline: String,
    /// Named statistics, in key order.
    pub metrics: BTreeMap<String, f64>,
    /// Human-readable per-item lines.
    pub details: Vec<String>,
    /// Number of Violated verdicts (zero for experiments without verdicts).
    pub violations: usize,
}

impl Summary {
    pub fn any_violation(&self) -> bool {
        self.violations > 0
    }

    /// The canonical bytes replay compares.
    pub fn canonical_bytes(&self) -> Result<String> {
        serde_json::to_string(self)
            .map_err(|e| Error::InvalidArgument(format!("summary serialization failed: {e}")))
    }
}

/// The persistent artifact of one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub schema_version: u32,
    /// Version of the lab that produced the record.
    pub lab_version: String,
    pub config: RunConfig,
    /// Wall-clock duration of the dispatch, in seconds. Excluded from
    /// replay comparison — it is the only nondeterministic field.
    pub wall_clock_seconds: f64,
    pub trials: Vec<TrialOutcome>,
    pub summary: Summary,
}

impl ExperimentRecord {
    /// `{command}-{seed}` — the base name of the record's files.
    pub fn basename(&self) -> String {
        format!("{}-{}", self.config.command, self.config.seed)
    }

    /// Render the human-readable Markdown summary.
    pub fn markdown(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "# {} (seed {})\n\n{}\n\n",
            self.config.command, self.config.seed, self.summary.headline
        ));
        if !self.config.params.is_empty() {
            out.push_str("Parameters: ");
            let rendered: Vec<String> =
                self.config.params.iter().map(|(k, v)| format!("{k} = {v}")).collect();
            out.push_str(&rendered.join(", "));
            out.push_str("\n\n");
        }
        if !self.summary.metrics.is_empty() {
            out.push_str("| metric | value |\n|---|---|\n");
            for (k, v) in &self.summary.metrics {
                out.push_str(&format!("| {k} | {v:.6} |\n"));
            }
            out.push('\n');
        }
        if !self.summary.details.is_empty() {
            out.push_str("## Details\n\n");
            for line in &self.summary.details {
                out.push_str(&format!("- {line}\n"));
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Execution
// ---------------------------------------------------------------------------

/// Execute a config and return the record without touching the filesystem.
pub fn execute(config: &RunConfig) -> Result<ExperimentRecord> {
    let started = Instant::now();
    let (trials, summary) = if config.threads > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| dispatch(config))?
    } else {
        dispatch(config)?
    };
    Ok(ExperimentRecord {
        schema_version: SCHEMA_VERSION,
        lab_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        trials,
        summary,
    })
}

/// Execute a config and persist its artifacts into `config.output_dir`:
/// `{command}-{seed}.json` and `.md` for experiments, `report.md` and
/// `report.csv` for the report command.
pub fn run(config: &RunConfig) -> Result<ExperimentRecord> {
    let record = execute(config)?;
    std::fs::create_dir_all(&config.output_dir)
        .map_err(|e| Error::InvalidArgument(format!("cannot create output dir: {e}")))?;
    if config.command == Command::Report {
        write_text(&config.output_dir.join("report.md"), &record.markdown())?;
        write_text(&config.output_dir.join("report.csv"), &report_csv(&config.output_dir)?)?;
    } else {
        let base = record.basename();
        let json = serde_json::to_string_pretty(&record)
            .map_err(|e| Error::InvalidArgument(format!("record serialization failed: {e}")))?;
        write_text(&config.output_dir.join(format!("{base}.json")), &json)?;
        write_text(&config.output_dir.join(format!("{base}.md")), &record.markdown())?;
    }
    Ok(record)
}

/// Outcome of replaying a stored record.
#[derive(Clone, Debug)]
pub struct ReplayOutcome {
    pub original: ExperimentRecord,
    pub fresh: ExperimentRecord,
    /// Whether the replayed summary reproduced the stored one byte for byte.
    pub matches: bool,
    /// Non-fatal observations (version skew, …).
    pub warnings: Vec<String>,
}

/// Re-execute a stored record's config and compare summaries byte for byte.
pub fn replay(record_path: &Path) -> Result<ReplayOutcome> {
    let text = std::fs::read_to_string(record_path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", record_path.display())))?;
    let original: ExperimentRecord = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidArgument(format!("not an experiment record: {e}")))?;
    let mut warnings = Vec::new();
    if original.schema_version != SCHEMA_VERSION {
        warnings.push(format!(
            "schema version {} differs from current {}; comparison attempted anyway",
            original.schema_version, SCHEMA_VERSION
        ));
    }
    if original.lab_version != env!("CARGO_PKG_VERSION") {
        warnings.push(format!(
            "record from lab version {}, current {}; comparison attempted anyway",
            original.lab_version,
            env!("CARGO_PKG_VERSION")
        ));
    }
    let fresh = execute(&original.config)?;
    let matches = original.summary.canonical_bytes()? == fresh.summary.canonical_bytes()?;
    Ok(ReplayOutcome { original, fresh, matches, warnings })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)
        .map_err(|e| Error::InvalidArgument(format!("cannot write {}: {e}", path.display())))
}

fn dispatch(config: &RunConfig) -> Result<(Vec<TrialOutcome>, Summary)> {
    match config.command {
        Command::Lemma => run_lemma(config),
        Command::AttackPru => run_attack_pru(config),
        Command::AttackPrsg => run_attack_prsg(config),
        Command::Conjecture => run_conjecture(config),
        Command::PrfsgGame => run_prfsg_game(config),
        Command::Report => run_report(config),
    }
}

// ---------------------------------------------------------------------------
// Lemma dispatch
// ---------------------------------------------------------------------------

fn summarize_reports(reports: Vec<VerificationReport>) -> (Vec<TrialOutcome>, Summary) {
    let mut metrics = BTreeMap::new();
    let mut details = Vec::new();
    let mut trials = Vec::new();
    let mut violated = 0usize;
    let mut inconclusive = 0usize;
    for (i, r) in reports.iter().enumerate() {
        match r.verdict {
            Verdict::Violated => violated += 1,
            Verdict::Inconclusive => inconclusive += 1,
            Verdict::Consistent => {}
        }
        let tag = format!("{:02}-{}", i, r.lemma);
        metrics.insert(format!("{tag}-claimed"), r.claimed);
        metrics.insert(format!("{tag}-estimate"), r.estimate);
        details.push(r.to_string());
        trials.push(TrialOutcome { label: tag, value: r.estimate });
    }
    let summary = Summary {
        headline: format!(
            "{} claims checked: {} violated, {} inconclusive",
            reports.len(),
            violated,
            inconclusive
        ),
        metrics,
        details,
        violations: violated,
    };
    (trials, summary)
}

fn run_lemma(config: &RunConfig) -> Result<(Vec<TrialOutcome>, Summary)> {
    let id = config.get_text("id", "all")?;
    let seed = config.seed;
    let mut rng = LabRng::new(seed, STREAM_HARNESS);
    let reports: Vec<VerificationReport> = match id.as_str() {
        "all" => {
            config.check_keys(&["id"])?;
            verify::default_grid(seed)?
        }
        "lubkin" => {
            config.check_keys(&["id", "n", "samples"])?;
            let n = config.get_u("n", 4)?;
            let samples = config.get_u("samples", 20_000)? as usize;
            if n < 4 || !n.is_power_of_two() {
                return Err(Error::InvalidArgument(format!(
                    "parameter `n` is the total dimension and must be a power of two ≥ 4, got {n}"
                )));
            }
            let qubits = n.trailing_zeros() as usize;
            vec![verify::verify_lubkin_purity(qubits / 2, qubits - qubits / 2, samples, &mut rng)?]
        }
        "haar-projection" => {
            config.check_keys(&["id", "n", "d", "samples"])?;
            vec![verify::verify_haar_projection(
                config.get_u("n", 3)? as usize,
                config.get_u("d", 1)? as usize,
                config.get_u("samples", 10_000)? as usize,
                &mut rng,
            )?]
        }
        "overlap" => {
            config.check_keys(&["id", "n", "epsilon", "samples"])?;
            vec![verify::verify_concentration_overlap(
                config.get_u("n", 2)? as usize,
                config.get_f("epsilon", 0.5)?,
                config.get_u("samples", 100_000)? as usize,
                &mut rng,
            )?]
        }
        "product-test" => {
            config.check_keys(&["id", "m", "samples"])?;
            vec![verify::verify_product_test_haar(
                config.get_u("m", 4)? as usize,
                config.get_u("samples", 10_000)? as usize,
                &mut rng,
            )?]
        }
        "decomposition" => {
            config.check_keys(&["id", "t", "tilt", "instances"])?;
            let t = config.get_u("t", 4)? as usize;
            let tilt = config.get_f("tilt", 0.0025)?;
            let instances = config.get_u("instances", 100)? as usize;
            (0..instances)
                .map(|i| {
                    let mut cell = LabRng::new(seed, STREAM_HARNESS).substream(i as u64);
                    let circuit = verify::tilted_measurement_chain(t, tilt, &mut cell)?;
                    verify::verify_measurement_decomposition(&circuit, &PureState::zero(t)?)
                })
                .collect::<Result<_>>()?
        }
        "gentle" => {
            config.check_keys(&["id", "n", "rank", "epsilon", "instances"])?;
            let n = config.get_u("n", 3)? as usize;
            let rank = config.get_u("rank", 2)? as usize;
            let eps = config.get_f("epsilon", 0.04)?;
            let instances = config.get_u("instances", 100)? as usize;
            (0..instances)
                .map(|i| {
                    let mut cell = LabRng::new(seed, STREAM_HARNESS).substream(i as u64);
                    let (rho, pi) = verify::random_gentle_instance(n, rank, eps, &mut cell)?;
                    verify::verify_gentle_measurement(&rho, &pi)
                })
                .collect::<Result<_>>()?
        }
        "structure" => {
            config.check_keys(&["id", "n", "p", "c", "instances"])?;
            let n = config.get_u("n", 4)? as usize;
            if n < 2 {
                return Err(Error::InvalidArgument("structure check needs n ≥ 2 qubits".into()));
            }
            let p = config.get_f("p", 0.01)?;
            let c = config.get_f("c", verify::DEFAULT_STRUCTURE_CONSTANT)?;
            let instances = config.get_u("instances", 100)? as usize;
            (0..instances)
                .map(|i| {
                    let mut cell = LabRng::new(seed, STREAM_HARNESS).substream(i as u64);
                    let (rho, split) = verify::noisy_product_instance(n / 2, n - n / 2, p, &mut cell)?;
                    verify::verify_purity_structure(&rho, &split, c)
                })
                .collect::<Result<_>>()?
        }
        "gentle-subsystem" => {
            config.check_keys(&["id", "n", "delta", "instances"])?;
            let n = config.get_u("n", 4)? as usize;
            if n < 2 {
                return Err(Error::InvalidArgument("subsystem check needs n ≥ 2 qubits".into()));
            }
            let delta = config.get_f("delta", 0.01)?;
            let instances = config.get_u("instances", 100)? as usize;
            (0..instances)
                .map(|i| {
                    let mut cell = LabRng::new(seed, STREAM_HARNESS).substream(i as u64);
                    let (rho, split, pi) =
                        verify::gentle_subsystem_instance(n / 2, n - n / 2, delta, &mut cell)?;
                    verify::verify_gentle_subsystem(&rho, &split, &pi)
                })
                .collect::<Result<_>>()?
        }
        "lipschitz" => {
            config.check_keys(&["id", "n", "queries", "shift", "samples"])?;
            vec![verify::verify_lipschitz_tail(
                config.get_u("n", 4)? as usize,
                config.get_u("queries", 1)? as usize,
                config.get_f("shift", 0.3)?,
                config.get_u("samples", 10_000)? as usize,
                &mut rng,
            )?]
        }
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown lemma id `{other}`; known: all, lubkin, haar-projection, overlap, \
                 product-test, decomposition, gentle, structure, gentle-subsystem, lipschitz"
            )))
        }
    };
    Ok(summarize_reports(reports))
}

// ---------------------------------------------------------------------------
// Attack dispatch
// ---------------------------------------------------------------------------

/// Query length for the j-th oracle layer: cycle through 2..=τ so every
/// candidate stays within the truncation the attack is promised.
fn query_len(j: usize, tau: usize) -> usize {
    if tau <= 1 {
        1
    } else {
        2 + (j % (tau - 1))
    }
}

/// A keyed-unitary candidate on `n` qubits: `m` oracle-query layers
/// interleaved with per-key scrambles, all derived from `rng`.
fn pru_attack_setup(
    n: usize,
    kappa: usize,
    m: usize,
    tau: usize,
    rng: &mut LabRng,
) -> Result<(ChfsInstance, PruCandidate)> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "attack-pru needs n ≥ 2 (one response qubit atop ℓ ≥ 1), got {n}"
        )));
    }
    if m == 0 {
        return Err(Error::InvalidArgument("need at least one oracle-query layer".into()));
    }
    let oracle = ChfsInstance::new(rng.next_u64(), LengthFunction::Constant(n - 1));
    let mut layers = vec![PruLayer::Scramble { seed: rng.next_u64() }];
    for j in 0..m {
        layers.push(PruLayer::OracleQuery { seed: rng.next_u64(), len: query_len(j, tau) });
        layers.push(PruLayer::Scramble { seed: rng.next_u64() });
    }
    Ok((oracle, PruCandidate::new(kappa, n, layers)?))
}

fn attack_summary(
    label_real: &str,
    label_ideal: &str,
    result: &crate::primitives::GameResult,
) -> (Vec<TrialOutcome>, Summary) {
    let mut metrics = BTreeMap::new();
    metrics.insert(format!("{label_real}-accept-rate"), result.real_accept_rate);
    metrics.insert(format!("{label_ideal}-accept-rate"), result.ideal_accept_rate);
    metrics.insert("advantage".into(), result.advantage);
    metrics.insert("std-error".into(), result.std_error);
    metrics.insert("trials-per-arm".into(), result.trials as f64);
    let summary = Summary {
        headline: format!(
            "advantage {:.3} ({label_real} {:.3} vs {label_ideal} {:.3}, {} trials per arm)",
            result.advantage, result.real_accept_rate, result.ideal_accept_rate, result.trials
        ),
        metrics,
        details: Vec::new(),
        violations: 0,
    };
    let trials = vec![
        TrialOutcome { label: format!("{label_real}-accepts"), value: result.real_accept_rate },
        TrialOutcome { label: format!("{label_ideal}-accepts"), value: result.ideal_accept_rate },
    ];
    (trials, summary)
}

fn run_attack_pru(config: &RunConfig) -> Result<(Vec<TrialOutcome>, Summary)> {
    config.check_keys(&["n", "kappa", "m", "tau", "r", "trials", "lambda"])?;
    let n = config.get_u("n", 5)? as usize;
    let kappa = config.get_u("kappa", 3)? as usize;
    let m = config.get_u("m", 2)? as usize;
    let tau = config.get_u("tau", 3)? as usize;
    let r = config.get_u("r", 12)? as usize;
    let trials = config.get_u("trials", 50)? as usize;
    let lambda = config.get_u("lambda", 4)? as usize;

    let cfg = Alg1Config::new(
        lambda,
        tau,
        r,
        PurityBatteryConfig::new(64, 8)?,
        2.0 / 3.0,
        2.0 / 2f64.powf(tau as f64 / 2.0),
        0.25f64.powi(lambda as i32),
        NoiseMode::Exact,
    )?;
    let mut setup_rng = LabRng::new(config.seed, STREAM_HARNESS);
    let (oracle, candidate) = pru_attack_setup(n, kappa, m, tau, &mut setup_rng)?;

    type Chan<'a> = Box<dyn Fn(&DensityMatrix) -> Result<DensityMatrix> + Send + Sync + 'a>;
    let real_arm = |rng: &mut LabRng| -> Result<Chan<'_>> {
        let key = BitString::random(kappa, rng);
        let (oracle, candidate) = (&oracle, &candidate);
        Ok(Box::new(move |rho| pru_apply(candidate, oracle, &key, rho)))
    };
    let ideal_arm = |rng: &mut LabRng| -> Result<Chan<'_>> {
        let w = haar_unitary(n, rng)?;
        Ok(Box::new(move |rho| w.conjugate(rho)))
    };
    let adversary = |v: &Chan<'_>, rng: &mut LabRng| -> Result<bool> {
        Ok(alg1_distinguish(&cfg, &**v, &oracle, &candidate, rng)?.output)
    };
    let result = distinguishing_game(
        adversary,
        real_arm,
        ideal_arm,
        trials,
        &LabRng::new(config.seed, STREAM_HARNESS).substream(1),
    )?;
    Ok(attack_summary("planted", "haar", &result))
}

/// A keyed generator candidate on `d` output qubits: `⌊d/2⌋` two-qubit
/// oracle writes tiling the register, `t` ancilla measurements feeding the
/// query-string history, and a final per-key scramble of the output.
fn prsg_attack_setup(
    d: usize,
    t: usize,
    kappa: usize,
    rng: &mut LabRng,
) -> Result<(ChfsInstance, PrsgCandidate)> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!("attack-prsg needs d ≥ 2, got {d}")));
    }
    let oracle = ChfsInstance::new(rng.next_u64(), LengthFunction::Constant(2));
    let writes = d / 2;
    let ancilla_qubit = d;
    let mut steps = Vec::new();
    let mut measures = 0usize;
    for j in 0..writes {
        steps.push(PrsgStep::OracleWrite {
            seed: rng.next_u64(),
            len: 2 + (j % 2),
            targets: vec![2 * j, 2 * j + 1],
        });
        if measures < t {
            steps.push(PrsgStep::Measure { qubit: ancilla_qubit });
            measures += 1;
        }
    }
    while measures < t {
        steps.push(PrsgStep::Measure { qubit: ancilla_qubit });
        measures += 1;
    }
    steps.push(PrsgStep::Scramble { seed: rng.next_u64(), targets: (0..d).collect() });
    Ok((oracle, PrsgCandidate::new(kappa, d, 1, true, steps)?))
}

fn run_attack_prsg(config: &RunConfig) -> Result<(Vec<TrialOutcome>, Summary)> {
    config.check_keys(&["d", "t", "kappa", "r", "trials", "lambda"])?;
    let d = config.get_u("d", 6)? as usize;
    let t = config.get_u("t", 2)? as usize;
    let kappa = config.get_u("kappa", 3)? as usize;
    let r = config.get_u("r", 4)? as usize;
    let trials = config.get_u("trials", 50)? as usize;
    let lambda = config.get_u("lambda", 4)? as usize;

    let cfg = Alg2Config::new(lambda, r, 4, PurityBatteryConfig::new(64, 8)?)?;
    let mut setup_rng = LabRng::new(config.seed, STREAM_HARNESS);
    let (oracle, candidate) = prsg_attack_setup(d, t, kappa, &mut setup_rng)?;

    let real_arm = |rng: &mut LabRng| -> Result<DensityMatrix> {
        let key = BitString::random(kappa, rng);
        Ok(prsg_gen(&candidate, &oracle, &key)?.output)
    };
    let ideal_arm =
        |rng: &mut LabRng| -> Result<DensityMatrix> { Ok(crate::hilbert::haar_state(d, rng)?.to_density()) };
    let adversary = |challenge: &DensityMatrix, rng: &mut LabRng| -> Result<bool> {
        Ok(alg2_distinguish(
            &cfg,
            challenge,
            &oracle,
            &candidate,
            QueryLearning::ArgmaxFromBranches,
            rng,
        )?
        .output)
    };
    let result = distinguishing_game(
        adversary,
        real_arm,
        ideal_arm,
        trials,
        &LabRng::new(config.seed, STREAM_HARNESS).substream(1),
    )?;
    Ok(attack_summary("generator", "haar", &result))
}

// ---------------------------------------------------------------------------
// Conjecture dispatch
// ---------------------------------------------------------------------------

fn parse_case(name: &str) -> Result<GeometryCase> {
    match name {
        "near" => Ok(GeometryCase::NearCap),
        "far" => Ok(GeometryCase::FarCap),
        "product" => Ok(GeometryCase::ProductCaps),
        other => Err(Error::InvalidArgument(format!(
            "unknown case `{other}`; known: grid, near, far, product"
        ))),
    }
}

fn run_conjecture(config: &RunConfig) -> Result<(Vec<TrialOutcome>, Summary)> {
    config.check_keys(&["case", "n", "epsilon", "delta", "samples"])?;
    let case = config.get_text("case", "grid")?;
    let samples = config.get_u("samples", 100_000)? as usize;
    let base = LabRng::new(config.seed, STREAM_HARNESS);
    let reports = if case == "grid" {
        // The default grid: small caps over n, ε, Δ.
        let mut cells = Vec::new();
        for n in [1usize, 2] {
            for eps in [0.1, 0.3] {
                for delta in [0.02, 0.05] {
                    cells.push((n, eps, delta));
                }
            }
        }
        use rayon::prelude::*;
        cells
            .par_iter()
            .enumerate()
            .map(|(i, &(n, eps, delta))| {
                verify::conjecture_cap_geometry(
                    n,
                    eps,
                    delta,
                    GeometryCase::NearCap,
                    samples,
                    &mut base.substream(i as u64),
                )
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        let n = config.get_u("n", 1)? as usize;
        let eps = config.get_f("epsilon", 0.1)?;
        let delta = config.get_f("delta", 0.05)?;
        vec![verify::conjecture_cap_geometry(
            n,
            eps,
            delta,
            parse_case(&case)?,
            samples,
            &mut base.substream(0),
        )?]
    };
    Ok(summarize_reports(reports))
}

// ---------------------------------------------------------------------------
// Security-game dispatch
// ---------------------------------------------------------------------------

fn run_prfsg_game(config: &RunConfig) -> Result<(Vec<TrialOutcome>, Summary)> {
    config.check_keys(&["kappa", "m", "ell", "queries", "trials"])?;
    let kappa = config.get_u("kappa", 8)? as usize;
    let m = config.get_u("m", 4)? as usize;
    let ell = config.get_u("ell", 3)? as usize;
    let queries = config.get_u("queries", 16)? as usize;
    let trials = config.get_u("trials", 400)? as usize;

    let mut setup_rng = LabRng::new(config.seed, STREAM_HARNESS);
    let oracle = ChfsInstance::new(setup_rng.next_u64(), LengthFunction::Constant(ell));
    let params = PrfsgParams::new(kappa, m, oracle)?;
    let suite = prfsg_hybrid_adversary_suite(&params, queries, trials, &setup_rng.substream(1))?;

    let mut metrics = BTreeMap::new();
    let mut details = Vec::new();
    let mut trial_rows = Vec::new();
    for run in &suite.runs {
        metrics.insert(format!("advantage-{}", run.name), run.result.advantage);
        details.push(format!(
            "{}: advantage {:.4} (real {:.4}, ideal {:.4}, se {:.4})",
            run.name,
            run.result.advantage,
            run.result.real_accept_rate,
            run.result.ideal_accept_rate,
            run.result.std_error
        ));
        trial_rows.push(TrialOutcome {
            label: format!("advantage-{}", run.name),
            value: run.result.advantage,
        });
    }
    metrics.insert("max-advantage".into(), suite.max_advantage);
    metrics.insert("queries".into(), queries as f64);
    metrics.insert("trials-per-arm".into(), trials as f64);

    // Exact enumeration of the key-guess game, feasible at desk κ; its
    // closed form needs the per-guess events disjoint, which the realized
    // oracle may deny — that is reported, not failed.
    match prfsg_key_guess_exact(&params, queries) {
        Ok(exact) => {
            metrics.insert("exact-key-guess-advantage".into(), exact.advantage);
            details.push(format!(
                "exact key-guess game: advantage {:.6} (real {:.6}, ideal {:.6})",
                exact.advantage, exact.real_accept_rate, exact.ideal_accept_rate
            ));
        }
        Err(e) => details.push(format!("exact key-guess enumeration unavailable: {e}")),
    }

    let summary = Summary {
        headline: format!(
            "max adversary advantage {:.4} over {} games (κ = {kappa}, q = {queries})",
            suite.max_advantage,
            suite.runs.len()
        ),
        metrics,
        details,
        violations: 0,
    };
    Ok((trial_rows, summary))
}

// ---------------------------------------------------------------------------
// Report dispatch
// ---------------------------------------------------------------------------

/// Load every record in the directory, oldest basename first.
fn load_records(dir: &Path) -> Result<Vec<(String, ExperimentRecord)>> {
    let mut records = Vec::new();
    let entries = match std::fs::read_dir(dir) {
        Ok(entries) => entries,
        // A missing directory reports the same as an empty one.
        Err(_) => return Ok(records),
    };
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|ext| ext == "json"))
        .collect();
    paths.sort();
    for path in paths {
        let name = path.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let Ok(text) = std::fs::read_to_string(&path) else { continue };
        match serde_json::from_str::<ExperimentRecord>(&text) {
            Ok(record) => records.push((name, record)),
            Err(_) => continue, // not a record; skip silently
        }
    }
    Ok(records)
}

fn run_report(config: &RunConfig) -> Result<(Vec<TrialOutcome>, Summary)> {
    config.check_keys(&[])?;
    let records = load_records(&config.output_dir)?;
    let mut metrics = BTreeMap::new();
    let mut details = Vec::new();
    let mut violations = 0usize;
    for (name, record) in &records {
        details.push(format!(
            "{name}: {} (seed {}) — {}{}",
            record.config.command,
            record.config.seed,
            record.summary.headline,
            if record.summary.any_violation() { " [VIOLATIONS]" } else { "" }
        ));
        violations += record.summary.violations;
    }
    metrics.insert("records".into(), records.len() as f64);
    metrics.insert("violations".into(), violations as f64);
    let summary = Summary {
        headline: format!("{} records, {} violations", records.len(), violations),
        metrics,
        details,
        violations,
    };
    Ok((Vec::new(), summary))
}

/// Long-format CSV of every metric in every record of the directory.
pub fn report_csv(dir: &Path) -> Result<String> {
    let mut out = String::from("file,command,seed,metric,value\n");
    for (name, record) in load_records(dir)? {
        for (metric, value) in &record.summary.metrics {
            out.push_str(&format!(
                "{name},{},{},{metric},{value}\n",
                record.config.command, record.config.seed
            ));
        }
    }
    Ok(out)
}
