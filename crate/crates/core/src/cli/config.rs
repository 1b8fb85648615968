//! Run configuration: a TOML document with a schema version, optional
//! tolerance overrides and a list of experiments.

use serde::{Deserialize, Serialize};

use crate::bound_engine::Tolerances;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Output directory, overridden by `--out`.
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Text written to CSV cells holding an infinite implied volatility.
    #[serde(default = "default_sentinel")]
    pub inf_sentinel: String,
    #[serde(rename = "experiment")]
    pub experiments: Vec<Experiment>,
}

fn default_sentinel() -> String {
    "inf".to_string()
}

fn default_expiry() -> f64 {
    1.0
}

fn default_attain_tol() -> f64 {
    1e-9
}

/// A sequence of reals: explicit values, `count` evenly spaced points, or a
/// fixed `step` from `start` up to `stop` inclusive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    Values(Vec<f64>),
    Count(CountGrid),
    Step(StepGrid),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountGrid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    pub fn points(&self) -> Result<Vec<f64>, String> {
        let pts = match self {
            Grid::Values(v) => v.clone(),
            Grid::Count(g) => match g.count {
                0 => Vec::new(),
                1 => vec![g.start],
                n => (0..n)
                    .map(|i| g.start + (g.stop - g.start) * i as f64 / (n - 1) as f64)
                    .collect(),
            },
            Grid::Step(g) => {
                if !(g.step > 0.0) || g.stop < g.start {
                    return Err(format!("bad step grid {} .. {} by {}", g.start, g.stop, g.step));
                }
                let n = ((g.stop - g.start) / g.step + 1e-9).floor() as usize;
                (0..=n).map(|i| g.start + g.step * i as f64).collect()
            }
        };
        if pts.iter().any(|x| !x.is_finite()) {
            return Err("grid contains non-finite values".into());
        }
        if pts.windows(2).any(|w| w[1] <= w[0]) {
            return Err("grid must be strictly increasing".into());
        }
        Ok(pts)
    }
}

/// Flat swap curve for the caplet experiments. Exactly one of `vol` (Black
/// volatility of the unshifted swap rates) and `nu` (root-variance used
/// directly after shifting) must be given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveConfig {
    pub periods: usize,
    pub discount_rate: f64,
    #[serde(default = "one")]
    pub delta: f64,
    pub forward: f64,
    #[serde(default)]
    pub vol: Option<f64>,
    #[serde(default)]
    pub nu: Option<f64>,
    #[serde(default = "default_expiry")]
    pub expiry: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    VanillaSmile {
        name: String,
        forward: f64,
        nus: Grid,
        strikes: Grid,
        #[serde(default = "default_expiry")]
        expiry: f64,
    },
    FlatRefine {
        name: String,
        forward: f64,
        vol: f64,
        #[serde(default = "default_expiry")]
        expiry: f64,
        strikes: Grid,
        /// Interior cell boundaries, one grid per partition; empty means one cell.
        partitions: Vec<Grid>,
    },
    LinearRefine {
        name: String,
        forward: f64,
        vol: f64,
        #[serde(default = "default_expiry")]
        expiry: f64,
        strikes: Grid,
        /// Hat-function strikes, one grid per partition.
        partitions: Vec<Grid>,
    },
    FxCross {
        name: String,
        forward: f64,
        nu1: f64,
        nu2: f64,
        rhos: Grid,
        strikes: Grid,
        #[serde(default = "default_expiry")]
        expiry: f64,
    },
    CapletBound {
        name: String,
        curve: CurveConfig,
        period: usize,
        rhos: Grid,
        shift: f64,
        strikes: Grid,
    },
    CapletCdf {
        name: String,
        curve: CurveConfig,
        period: usize,
        rho: f64,
        shifts: Grid,
        strikes: Grid,
        #[serde(default)]
        step: Option<f64>,
    },
    LocalAttain {
        name: String,
        forward: f64,
        nus: Grid,
        strikes: Grid,
        #[serde(default = "default_attain_tol")]
        attain_tol: f64,
        /// Strike pair `[from, to]` for the single-model check.
        #[serde(default)]
        cross_strikes: Option<[f64; 2]>,
    },
    GlobalAttain {
        name: String,
        nus: Grid,
        /// Orders `n` in (0, 1) for extra moment columns.
        #[serde(default)]
        moment_orders: Vec<f64>,
    },
}

/// Kind tag and one-line description of every experiment.
pub const EXPERIMENT_KINDS: [(&str, &str); 8] = [
    ("vanilla_smile", "vanilla bound, implied lognormal vol and implied CDF per root-variance"),
    ("flat_refine", "digital-partition refinements against the Black price"),
    ("linear_refine", "hat-partition refinements against the Black price"),
    ("fx_cross", "cross-rate bound per square-root correlation"),
    ("caplet_bound", "forward-starting caplet bound per swap-rate correlation"),
    ("caplet_cdf", "caplet implied CDF and eigenvalue regime per shift"),
    ("local_attain", "optimal binomial models against the bound per strike"),
    ("global_attain", "root-variance implied by the bound curve"),
];

impl Experiment {
    pub fn name(&self) -> &str {
        match self {
            Experiment::VanillaSmile { name, .. }
            | Experiment::FlatRefine { name, .. }
            | Experiment::LinearRefine { name, .. }
            | Experiment::FxCross { name, .. }
            | Experiment::CapletBound { name, .. }
            | Experiment::CapletCdf { name, .. }
            | Experiment::LocalAttain { name, .. }
            | Experiment::GlobalAttain { name, .. } => name,
        }
    }

    pub fn kind(&self) -> &'static str {
        let i = match self {
            Experiment::VanillaSmile { .. } => 0,
            Experiment::FlatRefine { .. } => 1,
            Experiment::LinearRefine { .. } => 2,
            Experiment::FxCross { .. } => 3,
            Experiment::CapletBound { .. } => 4,
            Experiment::CapletCdf { .. } => 5,
            Experiment::LocalAttain { .. } => 6,
            Experiment::GlobalAttain { .. } => 7,
        };
        EXPERIMENT_KINDS[i].0
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| e.message().replace('\n', " "))?;
        if cfg.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                cfg.schema_version
            ));
        }
        if cfg.experiments.is_empty() {
            return Err("no experiments configured".into());
        }
        let mut names: Vec<&str> = cfg.experiments.iter().map(|e| e.name()).collect();
        for n in &names {
            if n.is_empty() || !n.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(format!("experiment name {n:?} must be non-empty [A-Za-z0-9_-]"));
            }
        }
        names.sort_unstable();
        if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
            return Err(format!("duplicate experiment name {:?}", w[0]));
        }
        if cfg.inf_sentinel.contains([',', '"', '\n']) {
            return Err("inf_sentinel must not contain commas, quotes or newlines".into());
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        let g = Grid::Step(StepGrid {
            start: 0.4,
            stop: 2.6,
            step: 0.1,
        });
        let p = g.points().unwrap();
        assert_eq!(p.len(), 23);
        assert!((p[22] - 2.6).abs() < 1e-12);
        let c = Grid::Count(CountGrid {
            start: 0.5,
            stop: 2.5,
            count: 5,
        });
        assert_eq!(c.points().unwrap(), vec![0.5, 1.0, 1.5, 2.0, 2.5]);
        assert!(Grid::Values(vec![1.0, 0.5]).points().is_err());
    }

    #[test]
    fn parses_and_rejects_unknown_keys() {
        let ok = r#"
schema_version = 1
[[experiment]]
kind = "global_attain"
name = "g"
nus = { start = 0.0, stop = 1.0, count = 21 }
"#;
        let cfg = RunConfig::parse(ok).unwrap();
        assert_eq!(cfg.experiments[0].kind(), "global_attain");
        let bad = ok.replace("nus =", "bogus = 1\nnus =");
        assert!(RunConfig::parse(&bad).is_err());
        let version = ok.replace("schema_version = 1", "schema_version = 7");
        assert!(RunConfig::parse(&version).is_err());
        let top = format!("colour = 1\n{ok}");
        assert!(RunConfig::parse(&top).is_err());
    }

    #[test]
    fn duplicate_names_rejected() {
        let text = r#"
schema_version = 1
[[experiment]]
kind = "global_attain"
name = "g"
nus = [0.0, 1.0]
[[experiment]]
kind = "global_attain"
name = "g"
nus = [0.0, 1.0]
"#;
        assert!(RunConfig::parse(text).unwrap_err().contains("duplicate"));
    }
}
