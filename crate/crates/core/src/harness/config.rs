//! TOML experiment configuration.
//!
//! ```toml
//! [experiment]
//! id = "converge-example"
//! output_dir = "out/converge"
//!
//! [grid]
//! kmax = 16
//!
//! [flow]
//! dt = 2e-3
//! horizon = 1.0
//! samples = 10
//!
//! [data]
//! amplitude = 0.5
//! decay = 1.5
//! seeds = [1, 2, 3]
//!
//! [sweep]
//! n = [2, 4, 8]
//! ```
//!
//! Every section except `[experiment]` and `[grid]` is optional; driver
//! specific sections (`[local_uniform]`, `[lowfreq]`, `[tails]`,
//! `[bilinear]`, `[witness]`, `[evolve]`, `[norms]`) fall back to defaults.

use crate::error::{Error, Result};
use crate::flow::{FlowKind, IntegratorConfig, Scheme};
use crate::spectral::{SpectralGrid, Wavevector};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub grid: GridSection,
    #[serde(default)]
    pub flow: FlowSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub local_uniform: LocalUniformSection,
    #[serde(default)]
    pub lowfreq: LowFreqSection,
    #[serde(default)]
    pub small_data: SmallDataSection,
    #[serde(default)]
    pub tails: TailsSection,
    #[serde(default)]
    pub bilinear: BilinearSection,
    #[serde(default)]
    pub witness: WitnessSection,
    #[serde(default)]
    pub evolve: EvolveSection,
    #[serde(default)]
    pub norms: NormsSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub id: String,
    pub output_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub kmax: usize,
    pub n_phys: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    pub dt: f64,
    pub scheme: Scheme,
    pub horizon: f64,
    /// Number of sampling intervals on `[0, horizon]`.
    pub samples: usize,
    pub blowup_threshold: f64,
    pub picard_iters: usize,
    pub picard_tol: f64,
}

impl Default for FlowSection {
    fn default() -> Self {
        let i = IntegratorConfig::default();
        Self {
            dt: i.dt,
            scheme: i.scheme,
            horizon: 1.0,
            samples: 10,
            blowup_threshold: i.blowup_threshold,
            picard_iters: i.picard_iters,
            picard_tol: i.picard_tol,
        }
    }
}

impl FlowSection {
    pub fn integrator(&self) -> IntegratorConfig {
        IntegratorConfig {
            dt: self.dt,
            scheme: self.scheme,
            blowup_threshold: self.blowup_threshold,
            picard_iters: self.picard_iters,
            picard_tol: self.picard_tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Power-law base `A⟨k⟩^{-α}`, `A⟨k⟩^{1-α}`.
    pub amplitude: f64,
    pub decay: f64,
    /// Optional snapshot replacing the power-law base.
    pub base: Option<PathBuf>,
    pub seeds: Vec<u64>,
    /// Σ_λ proxy level; `None` skips the membership report.
    pub lambda: Option<f64>,
    pub gamma: f64,
    pub proxy_truncation: f64,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            amplitude: 0.5,
            decay: 1.5,
            base: None,
            seeds: vec![1],
            lambda: None,
            gamma: 0.25,
            proxy_truncation: 4.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub n: Vec<f64>,
    pub n_prime: Vec<f64>,
    pub n_star: Vec<f64>,
    pub m: Vec<f64>,
    pub lambda: Vec<f64>,
    pub rho: Vec<f64>,
    pub horizons: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalUniformSection {
    /// Ball radius `R` around the seeded center `u*`.
    pub radius: f64,
    pub count: usize,
    pub epsilon: f64,
    /// `σ = sigma_scale · (N')^{-2} R^{-4} ε`, capped by `flow.horizon`.
    pub sigma_scale: f64,
}

impl Default for LocalUniformSection {
    fn default() -> Self {
        Self {
            radius: 0.5,
            count: 20,
            epsilon: 0.1,
            sigma_scale: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LowFreqSection {
    /// `H^{1/2} × H^{-1/2}` norm of the high-frequency perturbation.
    pub perturbation: f64,
    /// Width of the perturbation shell `N* < |k| <= N* + width`.
    pub shell_width: f64,
    /// Sharp cutoff of the common low-frequency datum.
    pub data_cutoff: f64,
    /// `M` in the low-frequency residual `P_{<=M}(u_lo)³`.
    pub m: f64,
}

impl Default for LowFreqSection {
    fn default() -> Self {
        Self {
            perturbation: 0.5,
            shell_width: 1.0,
            data_cutoff: 3.0,
            m: 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmallDataSection {
    /// Allowed spread of the fitted constant across `N`.
    pub tolerance: f64,
}

impl Default for SmallDataSection {
    fn default() -> Self {
        Self { tolerance: 0.25 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailBase {
    /// One conjugate pair `±mode`; the norm is a multiple of a complex Gaussian modulus.
    SingleMode,
    /// The `[data]` power-law base.
    PowerLaw,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailNorm {
    /// Time exponent; ignored when `horizon` is zero.
    pub p1: f64,
    pub p2: f64,
    pub horizon: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TailsSection {
    pub ensemble: usize,
    pub first_seed: u64,
    pub base: TailBase,
    pub mode: Wavevector,
    pub norms: Vec<TailNorm>,
    pub lambda_points: usize,
    /// Acceptance window for the fitted exponent of the first norm.
    pub theta_target: f64,
    pub theta_tolerance: f64,
    pub growth_seeds: usize,
    pub growth_horizon: f64,
    pub growth_samples: usize,
    pub growth_truncation: Option<f64>,
    pub growth_lambda: f64,
}

impl Default for TailsSection {
    fn default() -> Self {
        Self {
            ensemble: 1000,
            first_seed: 0,
            base: TailBase::SingleMode,
            mode: [1, 0, 0],
            norms: vec![TailNorm {
                p1: 4.0,
                p2: 4.0,
                horizon: 0.0,
            }],
            lambda_points: 16,
            theta_target: 2.0,
            theta_tolerance: 0.3,
            growth_seeds: 0,
            growth_horizon: 5.0,
            growth_samples: 10,
            growth_truncation: None,
            growth_lambda: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BilinearSection {
    /// Allowed factor between the largest separated ratios at consecutive `N`.
    pub max_factor: f64,
}

impl Default for BilinearSection {
    fn default() -> Self {
        Self { max_factor: 2.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WitnessSection {
    pub radius: f64,
    pub r: f64,
    pub k0: Wavevector,
    pub z0: [f64; 2],
    pub z1: [f64; 2],
    pub kind: FlowKind,
    pub step: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for WitnessSection {
    fn default() -> Self {
        Self {
            radius: 1.0,
            r: 0.5,
            k0: [1, 0, 0],
            z0: [0.0, 0.0],
            z1: [0.0, 0.0],
            kind: FlowKind::Truncated(4.0),
            step: 0.5,
            max_iters: 200,
            tol: 1e-6,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveSection {
    pub kind: FlowKind,
    pub snapshots: bool,
}

impl Default for EvolveSection {
    fn default() -> Self {
        Self {
            kind: FlowKind::Full,
            snapshots: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormsSection {
    pub kind: FlowKind,
    pub s: f64,
    pub q: f64,
    pub r: f64,
    pub b: f64,
    pub p: f64,
    pub l4_threshold: f64,
}

impl Default for NormsSection {
    fn default() -> Self {
        Self {
            kind: FlowKind::Full,
            s: 0.5,
            q: 4.0,
            r: 4.0,
            b: 0.5,
            p: 2.0,
            l4_threshold: 1.0,
        }
    }
}

/// 1-based line of `key` inside `[section]` (or of the section header when
/// `key` is empty).
pub fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if key.is_empty() && current == section {
                return Some(i + 1);
            }
            continue;
        }
        if current == section {
            if let Some((lhs, _)) = line.split_once('=') {
                if lhs.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// A parsed config and the text it came from, for line-referenced messages.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub source: String,
    pub origin: String,
}

impl LoadedConfig {
    pub fn parse(source: &str, origin: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(source).map_err(|e| {
            let line = e.span().map(|s| line_of_offset(source, s.start)).unwrap_or(1);
            Error::Config(format!("{origin}:{line}: {}", e.message()))
        })?;
        Ok(Self {
            config,
            source: source.to_string(),
            origin: origin.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let source =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&source, &path.display().to_string())
    }

    pub fn from_config(config: ExperimentConfig) -> Self {
        let source = toml::to_string(&config).unwrap_or_default();
        Self {
            config,
            source,
            origin: "<inline>".into(),
        }
    }

    /// A config error pointing at `[section] key`.
    pub fn error(&self, section: &str, key: &str, msg: impl std::fmt::Display) -> Error {
        let line = locate(&self.source, section, key)
            .or_else(|| locate(&self.source, section, ""))
            .unwrap_or(1);
        let what = if key.is_empty() {
            section.to_string()
        } else {
            format!("{section}.{key}")
        };
        Error::Config(format!("{}:{line}: {what}: {msg}", self.origin))
    }

    pub fn grid(&self) -> Result<SpectralGrid> {
        let g = &self.config.grid;
        let grid = match g.n_phys {
            Some(n) => SpectralGrid::with_resolution(g.kmax, n),
            None => SpectralGrid::new(g.kmax),
        };
        grid.map_err(|e| self.error("grid", "kmax", e))
    }

    pub fn integrator(&self) -> Result<IntegratorConfig> {
        let i = self.config.flow.integrator();
        i.validate().map_err(|e| self.error("flow", "dt", e))?;
        Ok(i)
    }

    pub fn horizon(&self) -> Result<f64> {
        let h = self.config.flow.horizon;
        if !(h >= 0.0) || !h.is_finite() {
            return Err(self.error("flow", "horizon", format!("must be a finite value >= 0, got {h}")));
        }
        Ok(h)
    }

    pub fn seeds(&self) -> Result<&[u64]> {
        let s = &self.config.data.seeds;
        if s.is_empty() {
            return Err(self.error("data", "seeds", "must be nonempty"));
        }
        Ok(s)
    }

    /// A sweep list that must be nonempty and positive.
    pub fn sweep(&self, key: &str) -> Result<Vec<f64>> {
        let s = &self.config.sweep;
        let v = match key {
            "n" => &s.n,
            "n_prime" => &s.n_prime,
            "n_star" => &s.n_star,
            "m" => &s.m,
            "lambda" => &s.lambda,
            "rho" => &s.rho,
            "horizons" => &s.horizons,
            _ => return Err(self.error("sweep", key, "unknown sweep")),
        };
        if v.is_empty() {
            return Err(self.error("sweep", key, "must be nonempty"));
        }
        if let Some(x) = v.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
            return Err(self.error("sweep", key, format!("entries must be positive, got {x}")));
        }
        Ok(v.clone())
    }

    /// Creates the output directory and checks it is writable.
    pub fn output_dir(&self) -> Result<PathBuf> {
        let dir = self.config.experiment.output_dir.clone();
        let probe = dir.join(".kgsq-write-probe");
        std::fs::create_dir_all(&dir)
            .and_then(|_| std::fs::write(&probe, b""))
            .and_then(|_| std::fs::remove_file(&probe))
            .map_err(|e| self.error("experiment", "output_dir", format!("{}: {e}", dir.display())))?;
        Ok(dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        "[experiment]\nid = \"t\"\noutput_dir = \"out\"\n\n[grid]\nkmax = 4\n\n[sweep]\nn = [2.0, 4.0]\n";

    #[test]
    fn minimal_config_gets_defaults() {
        let c = LoadedConfig::parse(MINIMAL, "t.toml").unwrap();
        assert_eq!(c.config.grid.kmax, 4);
        assert_eq!(c.config.flow, FlowSection::default());
        assert_eq!(c.sweep("n").unwrap(), vec![2.0, 4.0]);
        assert_eq!(c.config.witness.kind, FlowKind::Truncated(4.0));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let bad = MINIMAL.replace("kmax = 4", "kmax = \"four\"");
        let e = LoadedConfig::parse(&bad, "t.toml").unwrap_err().to_string();
        assert!(e.contains("t.toml:6:"), "{e}");
        let unknown = format!("{MINIMAL}bogus = 1\n");
        let e = LoadedConfig::parse(&unknown, "t.toml").unwrap_err().to_string();
        assert!(e.contains("t.toml:10:"), "{e}");
        let c = LoadedConfig::parse(MINIMAL, "t.toml").unwrap();
        let e = c.sweep("rho").unwrap_err().to_string();
        assert!(e.contains("t.toml:8: sweep.rho: must be nonempty"), "{e}");
        assert!(c
            .error("grid", "kmax", "x")
            .to_string()
            .contains("t.toml:6: grid.kmax: x"));
    }

    #[test]
    fn flow_kind_tables_parse() {
        let text = format!("{MINIMAL}\n[evolve]\nkind = {{ type = \"truncated\", n = 3.0 }}\n");
        let c = LoadedConfig::parse(&text, "t.toml").unwrap();
        assert_eq!(c.config.evolve.kind, FlowKind::Truncated(3.0));
        let text = format!("{MINIMAL}\n[evolve]\nkind = {{ type = \"free\" }}\n");
        assert_eq!(
            LoadedConfig::parse(&text, "t").unwrap().config.evolve.kind,
            FlowKind::Free
        );
    }

    #[test]
    fn config_roundtrips_through_toml() {
        let c = LoadedConfig::parse(MINIMAL, "t.toml").unwrap();
        let again = LoadedConfig::from_config(c.config.clone());
        assert_eq!(LoadedConfig::parse(&again.source, "x").unwrap().config, c.config);
    }
}
