//! Scenario presets, TOML study files and command-line overrides.

use std::path::Path;
use std::str::FromStr;

use clap::{Args, ValueEnum};
use riviv_core::simulation::{default_beta_grid, linspace, Contamination, ScenarioConfig, TestSpec};
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Baseline,
    OutlierY,
    OutlierYz,
    T3,
}

impl Preset {
    pub fn contamination(self) -> Contamination {
        match self {
            Preset::Baseline => Contamination::None,
            Preset::OutlierY => Contamination::OutlierY,
            Preset::OutlierYz => Contamination::OutlierYZ,
            Preset::T3 => Contamination::T3Errors,
        }
    }

    pub fn config(self) -> ScenarioConfig {
        ScenarioConfig {
            contamination: self.contamination(),
            ..ScenarioConfig::default()
        }
    }
}

/// `lo:hi:points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct GridArg {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl GridArg {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.lo, self.hi, self.points)
    }
}

impl FromStr for GridArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("expected lo:hi:points, got '{s}'");
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let [lo, hi, points] = parts[..] else {
            return Err(bad());
        };
        let g = GridArg {
            lo: lo.parse().map_err(|_| bad())?,
            hi: hi.parse().map_err(|_| bad())?,
            points: points.parse().map_err(|_| bad())?,
        };
        if !(g.lo.is_finite() && g.hi.is_finite() && g.lo < g.hi) || g.points < 2 {
            return Err(format!("grid '{s}' needs finite lo < hi and at least 2 points"));
        }
        Ok(g)
    }
}

impl TryFrom<String> for GridArg {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<GridArg> for String {
    fn from(g: GridArg) -> String {
        format!("{}:{}:{}", g.lo, g.hi, g.points)
    }
}

/// Scenario fields that a study file or flags may override.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioOverrides {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub pi: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub reps: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub sims: Option<usize>,
    #[arg(long)]
    pub intercept: Option<bool>,
    #[arg(long)]
    pub huber_cutoff: Option<f64>,
}

impl ScenarioOverrides {
    pub fn apply(&self, cfg: &mut ScenarioConfig) {
        macro_rules! set {
            ($($f:ident),*) => {$( if let Some(v) = self.$f { cfg.$f = v; } )*};
        }
        set!(n, k, pi, beta0, rho, reps, alpha, seed, sims, intercept);
        if let Some(c) = self.huber_cutoff {
            cfg.huber.cutoff = c;
        }
    }
}

/// Contents of a `riviv power --config` TOML file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyFile {
    pub preset: Option<Preset>,
    /// Test labels such as `"CLR"` or `"RAR"`.
    pub tests: Option<Vec<String>>,
    /// True-`β` grid as `"lo:hi:points"`.
    pub grid: Option<GridArg>,
    /// Explicit true-`β` values; excludes `grid`.
    pub betas: Option<Vec<f64>>,
    #[serde(default)]
    pub scenario: ScenarioOverrides,
}

impl StudyFile {
    pub fn parse(text: &str, path: &Path) -> AppResult<Self> {
        toml::from_str(text).map_err(|e| AppError::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> AppResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
        Self::parse(&text, path)
    }
}

/// Fully resolved power study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study {
    pub preset: Preset,
    pub scenario: ScenarioConfig,
    pub tests: Vec<TestSpec>,
    pub betas: Vec<f64>,
}

pub const DEFAULT_TESTS: [TestSpec; 2] = [TestSpec::CLR, TestSpec::RCLR];

pub fn parse_tests(labels: &[String]) -> AppResult<Vec<TestSpec>> {
    if labels.is_empty() {
        return Err(AppError::input("at least one test is required"));
    }
    labels
        .iter()
        .map(|l| {
            TestSpec::parse(l).ok_or_else(|| {
                AppError::input(format!("unknown test '{l}' (expected AR, K, W, CLR or their R-prefixed robust forms)"))
            })
        })
        .collect()
}

/// Precedence: flags over the study file over the preset.
pub fn resolve_study(
    file: Option<&StudyFile>,
    preset: Option<Preset>,
    flags: &ScenarioOverrides,
    tests: Option<&[String]>,
    grid: Option<GridArg>,
) -> AppResult<Study> {
    let empty = StudyFile::default();
    let file = file.unwrap_or(&empty);
    if file.grid.is_some() && file.betas.is_some() {
        return Err(AppError::input("study file sets both 'grid' and 'betas'"));
    }
    let preset = preset.or(file.preset).unwrap_or(Preset::Baseline);
    let mut scenario = preset.config();
    file.scenario.apply(&mut scenario);
    flags.apply(&mut scenario);
    scenario.validate()?;
    let tests = match tests.or(file.tests.as_deref()) {
        Some(l) => parse_tests(l)?,
        None => DEFAULT_TESTS.to_vec(),
    };
    let betas = match (grid.or(file.grid), &file.betas) {
        (Some(g), _) => g.values(),
        (None, Some(b)) if !b.is_empty() && b.iter().all(|v| v.is_finite()) => b.clone(),
        (None, Some(_)) => return Err(AppError::input("'betas' must be a nonempty list of finite numbers")),
        (None, None) => default_beta_grid(scenario.pi),
    };
    Ok(Study {
        preset,
        scenario,
        tests,
        betas,
    })
}
