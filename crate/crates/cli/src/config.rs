use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use serde::Deserialize;

use scarlab::cumulants::EnsembleKind;
use scarlab::spectral::Spectrum;
use scarlab::SelectionMethod;

pub const CACHE_ENV: &str = "SCARLAB_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleChoice {
    Canonical,
    Microcanonical,
}

/// Experiment settings. Every key is optional in the JSON file; unknown
/// keys are rejected.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_sites: usize,
    pub scar_method: SelectionMethod,
    pub scar_count: usize,
    /// Scar count for the crossing sweep; small chains hold few scars.
    pub crossing_scar_count: usize,
    pub band_fraction: f64,
    pub ensemble: EnsembleChoice,
    /// Microcanonical window width as a fraction of the spectral span.
    pub window_fraction: f64,
    pub t_max: f64,
    pub n_points: usize,
    /// Scar pair for the correlator commands; central scar with itself
    /// when absent.
    pub pair: Option<[usize; 2]>,
    /// Time pattern for the correlator commands; per-order default when
    /// absent.
    pub pattern: Option<Vec<f64>>,
    pub out_dir: PathBuf,
    pub cache_dir: Option<PathBuf>,
    pub seed: u64,
    pub n_sweep: Vec<usize>,
    pub frobenius_gate: f64,
    pub sigma_gate: f64,
    pub haar_dim: usize,
    pub haar_samples: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_sites: 12,
            scar_method: SelectionMethod::NeelOverlap,
            scar_count: 6,
            crossing_scar_count: 3,
            band_fraction: 0.6,
            ensemble: EnsembleChoice::Canonical,
            window_fraction: 0.1,
            t_max: 40.0,
            n_points: 401,
            pair: None,
            pattern: None,
            out_dir: PathBuf::from("out"),
            cache_dir: None,
            seed: 0,
            n_sweep: vec![8, 10, 12, 14],
            frobenius_gate: 0.35,
            sigma_gate: 4.0,
            haar_dim: 8,
            haar_samples: 100_000,
        }
    }
}

/// Largest chain the dense eigensolver is asked to handle.
pub const MAX_SITES: usize = 26;

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let check_n = |n: usize| -> Result<()> {
            ensure!(
                (3..=MAX_SITES).contains(&n),
                "chain length {n} outside 3..={MAX_SITES}"
            );
            Ok(())
        };
        check_n(self.n_sites)?;
        ensure!(
            self.band_fraction > 0.0 && self.band_fraction <= 1.0,
            "band_fraction must lie in (0, 1]"
        );
        ensure!(
            self.window_fraction > 0.0 && self.window_fraction <= 1.0,
            "window_fraction must lie in (0, 1]"
        );
        ensure!(self.t_max.is_finite() && self.t_max >= 0.0, "t_max must be finite and non-negative");
        ensure!(self.n_points >= 1, "n_points must be positive");
        if let Some(p) = &self.pattern {
            ensure!(p.iter().all(|c| c.is_finite()), "pattern entries must be finite");
        }
        ensure!(!self.n_sweep.is_empty(), "n_sweep must not be empty");
        for &n in &self.n_sweep {
            check_n(n)?;
        }
        if self.n_sweep.windows(2).any(|w| w[1] <= w[0]) {
            bail!("n_sweep must be strictly ascending");
        }
        ensure!(self.frobenius_gate > 0.0, "frobenius_gate must be positive");
        ensure!(self.sigma_gate > 0.0, "sigma_gate must be positive");
        ensure!(self.haar_dim >= 2, "haar_dim must be at least 2");
        ensure!(self.haar_samples >= 2, "haar_samples must be at least 2");
        Ok(())
    }

    /// Flag value, then the environment, then the config file, then a
    /// directory inside the output directory.
    pub fn resolve_cache_dir(&self, flag: Option<&Path>) -> PathBuf {
        if let Some(p) = flag {
            return p.to_path_buf();
        }
        if let Some(p) = std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()) {
            return PathBuf::from(p);
        }
        self.cache_dir
            .clone()
            .unwrap_or_else(|| self.out_dir.join("cache"))
    }

    pub fn ensemble_kind(&self, spec: &Spectrum) -> EnsembleKind {
        match self.ensemble {
            EnsembleChoice::Canonical => EnsembleKind::Canonical,
            EnsembleChoice::Microcanonical => EnsembleKind::Microcanonical {
                window_width: self.window_fraction * (spec.e_max() - spec.e_min()),
            },
        }
    }
}
