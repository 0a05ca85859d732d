//! Strict JSON experiment configuration.

use serde::{Deserialize, Serialize};

use crate::channel::{Antennas, CsiMode};
use crate::error::{Error, Result};
use crate::mine::StopRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    SecrecyVsSnr,
    BlerVsSnr,
    SecrecyVsBeta,
    MineConvergence,
    SecrecyVsNt,
    SecrecyBlerTradeoff,
    FlopsReport,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::SecrecyVsSnr => "secrecy_vs_snr",
            Experiment::BlerVsSnr => "bler_vs_snr",
            Experiment::SecrecyVsBeta => "secrecy_vs_beta",
            Experiment::MineConvergence => "mine_convergence",
            Experiment::SecrecyVsNt => "secrecy_vs_nt",
            Experiment::SecrecyBlerTradeoff => "secrecy_bler_tradeoff",
            Experiment::FlopsReport => "flops_report",
        }
    }

    fn needs_snr_grid(&self) -> bool {
        !matches!(self, Experiment::FlopsReport)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ConventionalExhaustive,
    Aefj,
    MineFj,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::ConventionalExhaustive => "conventional_exhaustive",
            Scheme::Aefj => "aefj",
            Scheme::MineFj => "mine_fj",
        }
    }
}

/// Training settings shared by the learned schemes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// AEFJ FJ-suppression weight.
    pub alpha: f64,
    /// MINE-FJ legitimate-link weight.
    pub beta: f64,
    pub beta_grid: Vec<f64>,
    /// AEFJ training batches.
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub eve_extra_steps: usize,
    /// Steps used when the FJ generator is trained on its own.
    pub generator_steps: usize,
    pub generator_batch: usize,
    /// MINE-FJ outer iterations per channel instance.
    pub iterations: usize,
    pub mine_batch: usize,
    pub mine_minibatch: usize,
    pub mine_eval_batch: usize,
    /// MINE-FJ information power fraction.
    pub phi: f64,
    /// Channel instances averaged for MINE-FJ.
    pub instances: usize,
    /// Trailing iterations averaged into the converged MINE-FJ proxy.
    pub proxy_window: usize,
    pub stop: StopRule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.5,
            beta_grid: vec![0.3, 0.7],
            steps: 10_000,
            batch: 64,
            lr: 1e-3,
            eve_extra_steps: 2000,
            generator_steps: 2000,
            generator_batch: 32,
            iterations: 300,
            mine_batch: 1000,
            mine_minibatch: 1000,
            mine_eval_batch: 2000,
            phi: 0.5,
            instances: 4,
            proxy_window: 20,
            stop: StopRule::default(),
        }
    }
}

fn default_mc_draws() -> u64 {
    10_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub antennas: Antennas,
    #[serde(default)]
    pub snr_grid_db: Vec<f64>,
    #[serde(default = "default_csi")]
    pub csi: CsiMode,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    /// Schemes evaluated side by side by `compare`.
    #[serde(default)]
    pub schemes: Vec<Scheme>,
    /// Monte Carlo draws per point, or BLER trials per point.
    #[serde(default = "default_mc_draws")]
    pub mc_draws: u64,
    #[serde(default)]
    pub seed: u64,
    /// Transmit antenna counts swept by `secrecy_vs_nt`.
    #[serde(default = "default_nt_grid")]
    pub nt_grid: Vec<usize>,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_csi() -> CsiMode {
    CsiMode::Perfect
}

fn default_scheme() -> Scheme {
    Scheme::ConventionalExhaustive
}

fn default_nt_grid() -> Vec<usize> {
    vec![2, 4, 6, 8]
}

const REQUIRED_KEYS: &str = "experiment, antennas";

fn field_error(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("field `{field}`: {msg}"))
}

impl ExperimentConfig {
    /// Parses and validates; errors carry line/column or the field name.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(Error::Config(format!("empty config; required keys: {REQUIRED_KEYS}")));
        }
        let cfg: Self = serde_json::from_str(text).map_err(|e| {
            let msg = e.to_string();
            if msg.starts_with("missing field") {
                Error::Config(format!("{msg}; required keys: {REQUIRED_KEYS}"))
            } else {
                Error::Config(msg)
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.antennas;
        Antennas::new(a.nt, a.nr, a.ne).map_err(|e| field_error("antennas", e))?;
        if self.mc_draws < 100 {
            return Err(field_error("mc_draws", format!("must be >= 100, got {}", self.mc_draws)));
        }
        if self.experiment.needs_snr_grid() && self.snr_grid_db.is_empty() {
            return Err(field_error("snr_grid_db", "must not be empty"));
        }
        if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
            return Err(field_error("snr_grid_db", "entries must be finite"));
        }
        if self.snr_grid_db.windows(2).any(|w| w[1] <= w[0]) {
            return Err(field_error("snr_grid_db", "must be strictly increasing"));
        }
        if let CsiMode::Statistical { rho_e2 } = self.csi {
            if !(rho_e2 >= 0.0 && rho_e2.is_finite()) {
                return Err(field_error("csi.rho_e2", format!("must be finite and >= 0, got {rho_e2}")));
            }
        }
        if self.experiment == Experiment::SecrecyVsNt {
            if self.nt_grid.is_empty() || self.nt_grid.contains(&0) {
                return Err(field_error("nt_grid", "must be non-empty with entries >= 1"));
            }
            if self.nt_grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err(field_error("nt_grid", "must be strictly increasing"));
            }
        }
        let t = &self.train;
        if !(0.0..=1.0).contains(&t.alpha) {
            return Err(field_error("train.alpha", format!("must lie in [0, 1], got {}", t.alpha)));
        }
        for b in std::iter::once(&t.beta).chain(&t.beta_grid) {
            if !(0.0..=1.0).contains(b) {
                return Err(field_error("train.beta", format!("must lie in [0, 1], got {b}")));
            }
        }
        if self.experiment == Experiment::SecrecyVsBeta && t.beta_grid.is_empty() {
            return Err(field_error("train.beta_grid", "must not be empty"));
        }
        if !(t.phi > 0.0 && t.phi <= 1.0) {
            return Err(field_error("train.phi", format!("must lie in (0, 1], got {}", t.phi)));
        }
        if !(t.lr > 0.0) {
            return Err(field_error("train.lr", "must be positive"));
        }
        for (name, v) in [
            ("train.batch", t.batch),
            ("train.generator_batch", t.generator_batch),
            ("train.instances", t.instances),
            ("train.iterations", t.iterations),
            ("train.proxy_window", t.proxy_window),
        ] {
            if v == 0 {
                return Err(field_error(name, "must be >= 1"));
            }
        }
        if t.mine_minibatch < 2 || t.mine_batch < t.mine_minibatch || t.mine_eval_batch < 2 {
            return Err(field_error(
                "train.mine_minibatch",
                "need 2 <= mine_minibatch <= mine_batch and mine_eval_batch >= 2",
            ));
        }
        Ok(())
    }

    /// Schemes for `compare`; falls back to the single `scheme`.
    pub fn compare_schemes(&self) -> Vec<Scheme> {
        if self.schemes.is_empty() {
            vec![self.scheme]
        } else {
            self.schemes.clone()
        }
    }
}

/// A complete config with every key at its default; it parses as is.
pub fn schema() -> String {
    let cfg = ExperimentConfig {
        experiment: Experiment::SecrecyVsSnr,
        antennas: Antennas { nt: 10, nr: 4, ne: 4 },
        snr_grid_db: vec![0.0, 5.0, 10.0, 15.0, 20.0],
        csi: CsiMode::Perfect,
        scheme: Scheme::ConventionalExhaustive,
        schemes: vec![Scheme::ConventionalExhaustive, Scheme::Aefj],
        mc_draws: default_mc_draws(),
        seed: 0,
        nt_grid: default_nt_grid(),
        train: TrainConfig::default(),
    };
    serde_json::to_string_pretty(&cfg).expect("config serializes")
}

/// Grammar summary printed alongside [`schema`].
pub const GRAMMAR: &str = "\
experiment      secrecy_vs_snr | bler_vs_snr | secrecy_vs_beta | mine_convergence |
                secrecy_vs_nt | secrecy_bler_tradeoff | flops_report      (required)
antennas        {nt, nr, ne}, each >= 1                                    (required)
snr_grid_db     strictly increasing dB values; P/sigma^2 with sigma^2 = 1
csi             {mode: perfect} | {mode: statistical, rho_e2} | {mode: unknown}
scheme          conventional_exhaustive | aefj | mine_fj
schemes         list of schemes for `compare`
mc_draws        Monte Carlo draws (or BLER trials) per point, >= 100
seed            64-bit seed; channel draw i is shared by all schemes
nt_grid         transmit antenna counts for secrecy_vs_nt
train           training settings (see the template for keys and defaults)";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_round_trips() {
        let cfg = ExperimentConfig::parse(&schema()).unwrap();
        assert_eq!(serde_json::to_string_pretty(&cfg).unwrap(), schema());
    }

    #[test]
    fn empty_file_lists_required_keys() {
        let e = ExperimentConfig::parse("").unwrap_err().to_string();
        assert!(e.contains("experiment") && e.contains("antennas"), "{e}");
        let e = ExperimentConfig::parse("{}").unwrap_err().to_string();
        assert!(e.contains("required keys"), "{e}");
    }

    #[test]
    fn descending_grid_rejected() {
        let text = r#"{"experiment": "secrecy_vs_snr", "antennas": {"nt": 4, "nr": 2, "ne": 2}, "snr_grid_db": [10, 5]}"#;
        let e = ExperimentConfig::parse(text).unwrap_err().to_string();
        assert!(e.contains("snr_grid_db"), "{e}");
    }

    #[test]
    fn unknown_keys_report_position() {
        let text = "{\n  \"experiment\": \"flops_report\",\n  \"antennas\": {\"nt\": 4, \"nr\": 2, \"ne\": 2},\n  \"bogus\": 1\n}";
        let e = ExperimentConfig::parse(text).unwrap_err().to_string();
        assert!(e.contains("bogus") && e.contains("line 4"), "{e}");
    }

    #[test]
    fn small_mc_draws_rejected() {
        let text = r#"{"experiment": "flops_report", "antennas": {"nt": 4, "nr": 2, "ne": 2}, "mc_draws": 10}"#;
        assert!(ExperimentConfig::parse(text).unwrap_err().to_string().contains("mc_draws"));
    }
}
