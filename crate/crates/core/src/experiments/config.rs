use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::{GridOracleParams, MAX_ORACLE_DEPTH};
use crate::sequence::{PerturbationPattern, ScaleSequence};
use crate::stats::BootstrapConfig;
use crate::table::MAX_TABLE_DEPTH;
use crate::wos::WosParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Sample,
    Dims,
    Continuity,
    Gap,
    Harnack,
    Delta,
    OracleCompare,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Sample => "sample",
            ExperimentKind::Dims => "dims",
            ExperimentKind::Continuity => "continuity",
            ExperimentKind::Gap => "gap",
            ExperimentKind::Harnack => "harnack",
            ExperimentKind::Delta => "delta",
            ExperimentKind::OracleCompare => "oracle-compare",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceForm {
    Constant,
    Periodic,
    ExplicitPrefix,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationConfig {
    pub delta: f64,
    #[serde(default)]
    pub pattern: PerturbationPattern,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SequenceConfig {
    pub kind: SequenceForm,
    pub values: Vec<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub perturbation: Option<PerturbationConfig>,
}

impl Default for SequenceConfig {
    fn default() -> Self {
        Self {
            kind: SequenceForm::Constant,
            values: vec![0.25],
            lower: None,
            upper: None,
            perturbation: None,
        }
    }
}

impl SequenceConfig {
    pub fn constant(a: f64) -> Self {
        Self {
            values: vec![a],
            ..Self::default()
        }
    }

    pub fn build(&self) -> Result<ScaleSequence<f64>> {
        let mut seq = match self.kind {
            SequenceForm::Constant => {
                if self.values.len() != 1 {
                    return Err(Error::Config(format!(
                        "constant sequence takes exactly one value, got {}",
                        self.values.len()
                    )));
                }
                ScaleSequence::constant(self.values[0])?
            }
            SequenceForm::Periodic => ScaleSequence::periodic(self.values.clone())?,
            SequenceForm::ExplicitPrefix => ScaleSequence::explicit_prefix(self.values.clone())?,
        };
        if let Some(p) = self.perturbation {
            seq = seq.perturbed(p.delta, p.pattern)?;
        }
        match (self.lower, self.upper) {
            (None, None) => Ok(seq),
            (lo, hi) => {
                let (dlo, dhi) = seq.bounds();
                seq.with_bounds(lo.unwrap_or(dlo), hi.unwrap_or(dhi))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WosConfig {
    pub depth: usize,
    /// Absorption distance as a fraction of `l(depth)`.
    pub epsilon_fraction: f64,
    pub start_radius: f64,
    pub outer_radius: f64,
    pub reentry_radius: f64,
    pub max_steps: u64,
}

impl Default for WosConfig {
    fn default() -> Self {
        Self {
            depth: 5,
            epsilon_fraction: WosParams::<f64>::DEFAULT_EPSILON_FRACTION,
            start_radius: WosParams::<f64>::DEFAULT_START_RADIUS,
            outer_radius: WosParams::<f64>::DEFAULT_OUTER_RADIUS,
            reentry_radius: WosParams::<f64>::DEFAULT_REENTRY_RADIUS,
            max_steps: WosParams::<f64>::DEFAULT_MAX_STEPS,
        }
    }
}

impl WosConfig {
    pub fn params(&self, seq: &ScaleSequence<f64>) -> WosParams<f64> {
        WosParams {
            depth: self.depth,
            absorb_epsilon: self.epsilon_fraction * seq.sidelength(self.depth),
            start_radius: self.start_radius,
            outer_radius: self.outer_radius,
            reentry_radius: self.reentry_radius,
            max_steps: self.max_steps,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CampaignConfig {
    pub walkers: u64,
    /// Analyse this saved table instead of sampling (single-table experiments).
    pub table: Option<PathBuf>,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        Self {
            walkers: 1_000_000,
            table: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContinuityConfig {
    pub deltas: Vec<f64>,
    pub pattern: PerturbationPattern,
    /// Also run an independent campaign on the unperturbed sequence.
    pub control: bool,
}

impl Default for ContinuityConfig {
    fn default() -> Self {
        Self {
            deltas: vec![0.05, 0.02, 0.01],
            pattern: PerturbationPattern::Alternating,
            control: true,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapConfig {
    /// Replace the sampled table with the exact uniform measure.
    pub synthetic_uniform: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnackConfig {
    pub n: usize,
    pub m: usize,
    pub k_max: usize,
}

impl Default for HarnackConfig {
    fn default() -> Self {
        Self { n: 1, m: 1, k_max: 3 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeltaConfig {
    pub j: usize,
    pub k_max: usize,
}

impl Default for DeltaConfig {
    fn default() -> Self {
        Self { j: 1, k_max: 3 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub walkers: u64,
    /// Lattice spacing as a fraction of `l(depth)`; at most 1/8.
    pub spacing_fraction: f64,
    pub start_radius: f64,
    pub outer_radius: f64,
    /// Also run the oracle at half spacing and report the difference.
    pub richardson: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            walkers: 100_000,
            spacing_fraction: 0.125,
            start_radius: GridOracleParams::DEFAULT_START_RADIUS,
            outer_radius: GridOracleParams::DEFAULT_OUTER_RADIUS,
            richardson: false,
        }
    }
}

impl OracleConfig {
    pub fn params(&self, seq: &ScaleSequence<f64>, depth: usize) -> GridOracleParams {
        GridOracleParams {
            spacing: self.spacing_fraction * seq.sidelength(depth),
            start_radius: self.start_radius,
            outer_radius: self.outer_radius,
            ..GridOracleParams::defaults(seq, depth, self.walkers)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Experiment to run when the command line does not name one.
    pub kind: Option<ExperimentKind>,
    pub seed: u64,
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
    pub out: PathBuf,
    pub plots: bool,
    pub sequence: SequenceConfig,
    pub wos: WosConfig,
    pub campaign: CampaignConfig,
    pub continuity: ContinuityConfig,
    pub gap: GapConfig,
    pub harnack: HarnackConfig,
    pub delta: DeltaConfig,
    pub oracle: OracleConfig,
    pub bootstrap: BootstrapConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: None,
            seed: 1,
            workers: 0,
            out: PathBuf::from("results"),
            plots: false,
            sequence: SequenceConfig::default(),
            wos: WosConfig::default(),
            campaign: CampaignConfig::default(),
            continuity: ContinuityConfig::default(),
            gap: GapConfig::default(),
            harnack: HarnackConfig::default(),
            delta: DeltaConfig::default(),
            oracle: OracleConfig::default(),
            bootstrap: BootstrapConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }

    pub fn worker_count(&self) -> usize {
        if self.workers > 0 {
            self.workers
        } else {
            std::thread::available_parallelism().map_or(1, |n| n.get())
        }
    }

    /// Checks every precondition `kind` depends on, before any sampling.
    pub fn validate(&self, kind: ExperimentKind) -> Result<()> {
        let seq = self.sequence.build()?;
        let depth = self.wos.depth;
        if depth > MAX_TABLE_DEPTH {
            return Err(Error::CostGuard(format!(
                "depth {depth} exceeds the table limit {MAX_TABLE_DEPTH}"
            )));
        }
        self.wos.params(&seq).validate(&seq)?;
        if self.campaign.walkers == 0 {
            return Err(Error::Config("campaign.walkers must be at least 1".into()));
        }
        let needs_entropy = matches!(
            kind,
            ExperimentKind::Dims | ExperimentKind::Gap | ExperimentKind::Continuity
        );
        if needs_entropy && depth < 3 {
            return Err(Error::Config(format!(
                "{} needs wos.depth >= 3, got {depth}",
                kind.name()
            )));
        }
        match kind {
            ExperimentKind::Continuity => {
                if self.continuity.deltas.is_empty() {
                    return Err(Error::Config("continuity.deltas is empty".into()));
                }
                for &d in &self.continuity.deltas {
                    if !(d > 0.0) {
                        return Err(Error::Config(format!(
                            "continuity deltas must be positive, got {d}"
                        )));
                    }
                    let p = seq.perturbed(d, self.continuity.pattern)?;
                    self.wos.params(&p).validate(&p)?;
                }
            }
            ExperimentKind::Harnack => {
                let h = self.harnack;
                if h.n == 0 || h.m == 0 || h.k_max == 0 {
                    return Err(Error::Config("harnack n, m, k_max must be positive".into()));
                }
                if h.n + h.k_max + h.m > depth {
                    return Err(Error::Config(format!(
                        "harnack needs wos.depth >= n + k_max + m = {}",
                        h.n + h.k_max + h.m
                    )));
                }
            }
            ExperimentKind::Delta => {
                let d = self.delta;
                if d.j == 0 || d.k_max == 0 {
                    return Err(Error::Config("delta j and k_max must be positive".into()));
                }
                if d.j + d.k_max > depth {
                    return Err(Error::Config(format!(
                        "delta needs wos.depth >= j + k_max = {}",
                        d.j + d.k_max
                    )));
                }
            }
            ExperimentKind::OracleCompare => {
                if depth > MAX_ORACLE_DEPTH {
                    return Err(Error::CostGuard(format!(
                        "oracle comparison limited to depth <= {MAX_ORACLE_DEPTH}, got {depth}"
                    )));
                }
                self.oracle.params(&seq, depth).validate(&seq)?;
            }
            _ => {}
        }
        if self.campaign.table.is_some() && kind == ExperimentKind::Continuity {
            return Err(Error::Config(
                "campaign.table cannot be reused by a multi-campaign experiment".into(),
            ));
        }
        Ok(())
    }
}

/// Documented defaults, parseable as a config file.
pub fn config_reference() -> String {
    let d = ExperimentConfig::default();
    let w = d.wos;
    let o = d.oracle;
    format!(
        r#"# cantor-harmonic experiment configuration.
# Every key is optional; the values below are the defaults.

# Experiment run when the command line names none:
# "sample" | "dims" | "continuity" | "gap" | "harnack" | "delta" | "oracle-compare"
# kind = "gap"

# Master seed; every campaign seed is derived from it.
seed = {seed}
# Worker threads (0 = one per core). Results do not depend on this.
workers = {workers}
# Output directory for result JSON, CSV tables and SVG plots.
out = "{out}"
plots = {plots}

[sequence]
# "constant" (one value) | "periodic" (one period) | "explicit-prefix" (cycled)
kind = "constant"
values = [0.25]
# Optional explicit bounds A_lo <= a_n <= A_hi inside (0, 1/2).
# lower = 0.2
# upper = 0.3
# Optional perturbation a_n + delta * s_n.
# [sequence.perturbation]
# delta = 0.01
# pattern = "alternating"   # or "constant-sign"

[wos]
depth = {depth}
# Absorption distance as a fraction of l(depth).
epsilon_fraction = {eps}
start_radius = {rs:.1}
outer_radius = {ro:.1}
reentry_radius = {ri:.1}
max_steps = {steps}

[campaign]
walkers = {walkers}
# Analyse a saved table instead of sampling.
# table = "results/table.csv"

[continuity]
deltas = [0.05, 0.02, 0.01]
pattern = "alternating"
# Independent campaign on the unperturbed sequence as a delta = 0 control.
control = true

[gap]
# Use the exact uniform measure instead of a sampled table.
synthetic_uniform = false

[harnack]
n = 1
m = 1
k_max = 3

[delta]
j = 1
k_max = 3

[oracle]
walkers = {owalkers}
# Lattice spacing as a fraction of l(depth); at most 0.125.
spacing_fraction = {ofrac}
start_radius = {ors}
outer_radius = {oro:.1}
# Also run at half spacing and report the difference.
richardson = false

[bootstrap]
resamples = {res}
seed = {bseed}
"#,
        seed = d.seed,
        workers = d.workers,
        out = d.out.display(),
        plots = d.plots,
        depth = w.depth,
        eps = w.epsilon_fraction,
        rs = w.start_radius,
        ro = w.outer_radius,
        ri = w.reentry_radius,
        steps = w.max_steps,
        walkers = d.campaign.walkers,
        owalkers = o.walkers,
        ofrac = o.spacing_fraction,
        ors = o.start_radius,
        oro = o.outer_radius,
        res = d.bootstrap.resamples,
        bseed = d.bootstrap.seed,
    )
}
