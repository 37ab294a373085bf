//! TOML experiment configuration. Parsing and validation are separate
//! steps so the CLI can fill the kind from its subcommand before
//! validating; validation reports every broken constraint at once, each
//! with its config key path.

use std::fmt;
use std::path::PathBuf;

use blag_core::action::default_arm_count;
use blag_core::bandit::{PoolMode, UpdateRule};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    BanditCompare,
    BoundsVerify,
    InfoLoss,
    Cascade,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::BanditCompare => "bandit-compare",
            ExperimentKind::BoundsVerify => "bounds-verify",
            ExperimentKind::InfoLoss => "info-loss",
            ExperimentKind::Cascade => "cascade",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaParams {
    pub n: usize,
    pub p: usize,
}

/// Exactly one source may be set; when neither is, [`DEFAULT_BA`] applies.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphConfig {
    pub ba: Option<BaParams>,
    pub file: Option<PathBuf>,
}

pub const DEFAULT_BA: BaParams = BaParams { n: 10_000, p: 5 };

/// Resolved graph source after defaulting.
#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    Ba(BaParams),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UpdateRuleConfig {
    ArmMean,
    LiteralRound,
}

impl From<UpdateRuleConfig> for UpdateRule {
    fn from(r: UpdateRuleConfig) -> Self {
        match r {
            UpdateRuleConfig::ArmMean => UpdateRule::ArmMean,
            UpdateRuleConfig::LiteralRound => UpdateRule::LiteralRound,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoolModeConfig {
    SqrtTargets,
    AllArms,
}

impl From<PoolModeConfig> for PoolMode {
    fn from(p: PoolModeConfig) -> Self {
        match p {
            PoolModeConfig::SqrtTargets => PoolMode::SqrtTargets,
            PoolModeConfig::AllArms => PoolMode::AllArms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BanditConfig {
    /// Number of targets.
    pub m: usize,
    /// Defaults to `2 * C(m, 2)` when unset.
    pub arm_count: Option<usize>,
    /// Learning rounds.
    #[serde(rename = "T")]
    pub rounds: usize,
    pub epsilon0: f64,
    /// Confidence scale; `min_c` of the instance when unset.
    pub c: Option<f64>,
    pub sigma: f64,
    /// Regret accounting factor.
    pub alpha: f64,
    /// Upper end of the uniform initial edge probabilities.
    pub xi: f64,
    pub update_rule: UpdateRuleConfig,
    pub prior_sigma: Option<f64>,
    /// Candidate pool for the CUCB baseline.
    pub pool_mode: PoolModeConfig,
}

impl Default for BanditConfig {
    fn default() -> Self {
        BanditConfig {
            m: 15,
            arm_count: None,
            rounds: 1000,
            epsilon0: 1.0,
            c: None,
            sigma: 1.0,
            alpha: 1.0,
            xi: 0.1,
            update_rule: UpdateRuleConfig::ArmMean,
            prior_sigma: None,
            pool_mode: PoolModeConfig::SqrtTargets,
        }
    }
}

/// How the learned combination is chosen for the bandit-driven policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CommitMode {
    /// The played round with the lowest noise-free reward.
    BestPlayed,
    /// Whatever the final round played.
    LastRound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PolicyConstants {
    pub spontaneous_p: f64,
    pub adaptive_p_low: f64,
    pub monotone_p_init: f64,
    pub riposte_p_base: f64,
    pub riposte_decrement: f64,
    pub riposte_round_probability: f64,
}

impl Default for PolicyConstants {
    fn default() -> Self {
        // Riposte's decrement/selection pair keeps it transmitting for
        // ~p_base/(decrement * round_probability) rounds; at the defaults
        // that is ~80, past the point where slow decay would overtake it.
        PolicyConstants {
            spontaneous_p: 5e-5,
            adaptive_p_low: 1e-4,
            monotone_p_init: 0.05,
            riposte_p_base: 0.05,
            riposte_decrement: 0.0025,
            riposte_round_probability: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffusionConfig {
    /// Per-slot hits needed to convert a node.
    pub threshold: usize,
    /// Cascade length.
    pub slots: usize,
    /// Info-loss rounds.
    pub rounds: usize,
    pub label_probability: f64,
    /// Size of the connected sensitive set.
    pub sensitive_seeds: usize,
    pub uninformed_fraction: f64,
    /// Sensitive fraction whose first crossing the cascade metrics report.
    pub crossing_fraction: f64,
    pub commit: CommitMode,
    pub policies: PolicyConstants,
}

impl Default for DiffusionConfig {
    fn default() -> Self {
        DiffusionConfig {
            threshold: 1,
            slots: 1000,
            rounds: 100,
            label_probability: 0.5,
            sensitive_seeds: 10,
            uninformed_fraction: 0.5,
            crossing_fraction: 0.1,
            commit: CommitMode::BestPlayed,
            policies: PolicyConstants::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// May be omitted in the file; the CLI fills it from the subcommand.
    pub kind: Option<ExperimentKind>,
    /// Replicate seeds; also the parallel work units.
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// Instances whose estimated footprint exceeds this are refused
    /// unless the run opts in with `--allow-large`.
    pub memory_budget_mb: u64,
    pub graph: GraphConfig,
    pub bandit: BanditConfig,
    pub diffusion: DiffusionConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            kind: None,
            seeds: (1..=10).collect(),
            out_dir: PathBuf::from("runs"),
            memory_budget_mb: 4096,
            graph: GraphConfig::default(),
            bandit: BanditConfig::default(),
            diffusion: DiffusionConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Parse(toml::de::Error),
    Invalid(Vec<Violation>),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse(e) => write!(f, "config parse error: {e}"),
            ConfigError::Invalid(violations) => {
                writeln!(f, "invalid config ({} violations):", violations.len())?;
                for v in violations {
                    writeln!(f, "  {v}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

impl ExperimentConfig {
    /// Parse without validating; the CLI patches kind/seed/out first.
    pub fn parse_unchecked(source: &str) -> Result<Self, ConfigError> {
        toml::from_str(source).map_err(ConfigError::Parse)
    }

    /// Parse and fully validate in one step.
    pub fn parse(source: &str) -> Result<Self, ConfigError> {
        let cfg = Self::parse_unchecked(source)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn arm_count(&self) -> usize {
        self.bandit
            .arm_count
            .unwrap_or_else(|| default_arm_count(self.bandit.m))
    }

    pub fn graph_source(&self) -> GraphSource {
        if let Some(file) = &self.graph.file {
            GraphSource::File(file.clone())
        } else {
            GraphSource::Ba(self.graph.ba.unwrap_or(DEFAULT_BA))
        }
    }

    /// Coarse upper estimate of the run's resident footprint in bytes:
    /// adjacency plus arms plus one full trace. Deliberately pessimistic.
    pub fn estimated_bytes(&self) -> u64 {
        let graph_bytes = match self.graph_source() {
            GraphSource::Ba(ba) => (ba.n as u64) * 48 + (ba.n as u64) * (ba.p as u64) * 48,
            GraphSource::File(path) => std::fs::metadata(&path)
                .map(|m| m.len().saturating_mul(8))
                .unwrap_or(0),
        };
        let arm_bytes = (self.arm_count() as u64) * 48;
        let trace_bytes = (self.bandit.rounds as u64) * ((self.bandit.m as u64) + 4) * 24;
        graph_bytes + arm_bytes + trace_bytes
    }

    /// Every broken constraint, not just the first.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut v: Vec<Violation> = Vec::new();
        let mut fail = |path: &str, message: String| {
            v.push(Violation {
                path: path.to_string(),
                message,
            })
        };

        if self.kind.is_none() {
            fail("kind", "missing experiment kind".into());
        }
        if self.seeds.is_empty() {
            fail("seeds", "need at least one replicate seed".into());
        }
        if self.memory_budget_mb == 0 {
            fail("memory_budget_mb", "budget must be positive".into());
        }

        if self.graph.ba.is_some() && self.graph.file.is_some() {
            fail("graph", "ba and file are mutually exclusive".into());
        }
        if let Some(ba) = &self.graph.ba {
            if ba.p == 0 || ba.n <= ba.p {
                fail("graph.ba", format!("need n > p >= 1, got n={} p={}", ba.n, ba.p));
            }
        }
        if let Some(file) = &self.graph.file {
            if !file.exists() {
                fail("graph.file", format!("no such file: {}", file.display()));
            }
        }

        let b = &self.bandit;
        if b.m < 2 {
            fail("bandit.m", format!("need at least 2 targets, got {}", b.m));
        }
        if b.rounds < 1 {
            fail("bandit.T", "need at least one round".into());
        }
        if !(b.epsilon0 > 0.0 && b.epsilon0.is_finite()) {
            fail("bandit.epsilon0", format!("must be positive, got {}", b.epsilon0));
        }
        if !(b.sigma >= 0.0 && b.sigma.is_finite()) {
            fail("bandit.sigma", format!("must be non-negative, got {}", b.sigma));
        }
        if !(b.alpha > 0.0 && b.alpha.is_finite()) {
            fail("bandit.alpha", format!("must be positive, got {}", b.alpha));
        }
        if !(b.xi > 0.0 && b.xi <= 1.0) {
            fail("bandit.xi", format!("must lie in (0, 1], got {}", b.xi));
        }
        if let Some(c) = b.c {
            if !(c > 0.0 && c.is_finite()) {
                fail("bandit.c", format!("must be positive when set, got {c}"));
            }
        }
        if let Some(count) = b.arm_count {
            if count < 1 {
                fail("bandit.arm_count", "need at least one arm".into());
            }
        }
        if let Some(p) = b.prior_sigma {
            if !(p >= 0.0 && p.is_finite()) {
                fail("bandit.prior_sigma", format!("must be non-negative, got {p}"));
            }
        }

        let d = &self.diffusion;
        if d.threshold < 1 {
            fail("diffusion.threshold", "must be at least 1".into());
        }
        if d.slots < 1 {
            fail("diffusion.slots", "need at least one slot".into());
        }
        if d.rounds < 1 {
            fail("diffusion.rounds", "need at least one round".into());
        }
        if !(0.0..=1.0).contains(&d.label_probability) {
            fail(
                "diffusion.label_probability",
                format!("must lie in [0, 1], got {}", d.label_probability),
            );
        }
        if d.sensitive_seeds < 1 {
            fail("diffusion.sensitive_seeds", "need at least one sensitive node".into());
        }
        if !(0.0..=1.0).contains(&d.uninformed_fraction) {
            fail(
                "diffusion.uninformed_fraction",
                format!("must lie in [0, 1], got {}", d.uninformed_fraction),
            );
        }
        if !(d.crossing_fraction > 0.0 && d.crossing_fraction < 1.0) {
            fail(
                "diffusion.crossing_fraction",
                format!("must lie in (0, 1), got {}", d.crossing_fraction),
            );
        }
        let probs = [
            ("diffusion.policies.spontaneous_p", d.policies.spontaneous_p),
            ("diffusion.policies.adaptive_p_low", d.policies.adaptive_p_low),
            ("diffusion.policies.monotone_p_init", d.policies.monotone_p_init),
            ("diffusion.policies.riposte_p_base", d.policies.riposte_p_base),
            ("diffusion.policies.riposte_decrement", d.policies.riposte_decrement),
            (
                "diffusion.policies.riposte_round_probability",
                d.policies.riposte_round_probability,
            ),
        ];
        for (path, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                fail(path, format!("must lie in [0, 1], got {p}"));
            }
        }

        if v.is_empty() {
            Ok(())
        } else {
            Err(ConfigError::Invalid(v))
        }
    }
}
