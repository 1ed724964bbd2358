//! Run configuration: a sectioned TOML file plus `section.key=value`
//! overrides, deserialized strictly so typos surface as validation errors.

use std::path::Path;

use mincurv_core::continuation::{AsymptoticConfig, BranchConfig};
use mincurv_core::periodic::JacobianMode;
use mincurv_core::spectrum::TrigPoly;
use mincurv_core::subharmonic::SubharmonicConfig;
use mincurv_core::{IntegratorConfig, Nonlinearity, Problem, SearchWindow, ShootingConfig, Weight, WeightForm};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub scan: ScanSection,
    #[serde(default)]
    pub branch: BranchSection,
    #[serde(default)]
    pub asymptotic: AsymptoticSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub subharmonic: SubharmonicSection,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    #[serde(rename = "period_T")]
    pub period_t: f64,
    pub lambda: f64,
    pub weight: WeightSpec,
    pub nonlinearity: NonlinearitySpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    /// `amplitude · cos(2πt/T − phase_rad) + offset`
    Trig { amplitude: f64, phase_rad: f64, offset: f64 },
    /// `values[i]` on `[breakpoints_t[i], breakpoints_t[i+1])`
    Piecewise { breakpoints_t: Vec<f64>, values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum NonlinearitySpec {
    Power { exponent_p: f64 },
    Saturated { exponent_p: f64, exponent_q: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianKind {
    Variational,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub newton_tol: f64,
    pub max_newton_iter: usize,
    pub jacobian: JacobianKind,
    pub fd_step: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub lambda_aware_cap: bool,
    /// 0 picks the segment count from λ and ‖a‖∞.
    pub segments_per_period: usize,
    pub samples_per_period: usize,
    pub dedup_distance: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub small_seeds: usize,
    pub large_seeds: usize,
}

impl Default for SolverSection {
    fn default() -> Self {
        let s = ShootingConfig::default();
        let w = SearchWindow::default();
        SolverSection {
            newton_tol: s.newton_tol,
            max_newton_iter: s.max_newton_iter,
            jacobian: JacobianKind::Variational,
            fd_step: 1e-7,
            rel_tol: s.integrator.rel_tol,
            abs_tol: s.integrator.abs_tol,
            lambda_aware_cap: s.integrator.lambda_aware_cap,
            segments_per_period: 0,
            samples_per_period: s.samples_per_period,
            dedup_distance: s.dedup_distance,
            r_min: w.r_min,
            r_max: w.r_max,
            small_seeds: w.small_seeds,
            large_seeds: w.large_seeds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub points: usize,
}

impl Default for ScanSection {
    fn default() -> Self {
        ScanSection { lambda_min: 0.25, lambda_max: 30.0, points: 120 }
    }
}

impl ScanSection {
    /// Uniform grid `lambda_min + i·(lambda_max − lambda_min)/(points − 1)`.
    pub fn grid(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.lambda_min];
        }
        let h = (self.lambda_max - self.lambda_min) / (self.points - 1) as f64;
        (0..self.points).map(|i| if i + 1 == self.points { self.lambda_max } else { self.lambda_min + h * i as f64 }).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Small,
    Large,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BranchSection {
    /// Start from this family at `problem.lambda`.
    pub start_family: FamilyKind,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    pub max_steps: usize,
    pub max_corrector_iter: usize,
    pub fold_tol: f64,
    pub reverify_every: usize,
}

impl Default for BranchSection {
    fn default() -> Self {
        let b = BranchConfig::default();
        BranchSection {
            start_family: FamilyKind::Large,
            lambda_min: b.lambda_min,
            lambda_max: b.lambda_max,
            initial_step: b.initial_step,
            min_step: b.min_step,
            max_step: b.max_step,
            max_steps: b.max_steps,
            max_corrector_iter: b.max_corrector_iter,
            fold_tol: b.fold_tol,
            reverify_every: b.reverify_every,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymptoticSection {
    pub family: FamilyKind,
    pub schedule: Vec<f64>,
    pub max_ratio: f64,
    pub band_half_width: f64,
    pub histogram_bins: usize,
    pub flat_height_fraction: f64,
    /// Optional interval whose coverage by flat segments is reported.
    pub plateau_t: Vec<f64>,
}

impl Default for AsymptoticSection {
    fn default() -> Self {
        let a = AsymptoticConfig::default();
        AsymptoticSection {
            family: FamilyKind::Large,
            schedule: vec![1.2, 1.5, 2.0, 3.0, 5.0, 10.0, 25.0, 50.0, 100.0, 1e3, 1e5],
            max_ratio: a.max_ratio,
            band_half_width: a.band_half_width,
            histogram_bins: a.histogram_bins,
            flat_height_fraction: a.flat_height_fraction,
            plateau_t: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumSource {
    /// `p`, `q` from the trigonometric coefficients below.
    Analytic,
    /// Linearization around the small or large orbit at `problem.lambda`.
    SmallOrbit,
    LargeOrbit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectrumSection {
    pub source: SpectrumSource,
    pub p_c0: f64,
    pub p_cos: Vec<f64>,
    pub p_sin: Vec<f64>,
    pub q_c0: f64,
    pub q_cos: Vec<f64>,
    pub q_sin: Vec<f64>,
    /// Pairs `μ'ₖ, μ''ₖ` for `k = 1..=k_max`; 0 skips them.
    pub k_max: usize,
    /// Number of `(μ, f(μ))` samples written on request; 0 skips the file.
    pub f_samples: usize,
    pub f_mu_min: f64,
    pub f_mu_max: f64,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection {
            source: SpectrumSource::SmallOrbit,
            p_c0: 1.0,
            p_cos: Vec::new(),
            p_sin: Vec::new(),
            q_c0: 0.0,
            q_cos: Vec::new(),
            q_sin: Vec::new(),
            k_max: 0,
            f_samples: 0,
            f_mu_min: -5.0,
            f_mu_max: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SubharmonicSection {
    /// 0 scans `k_min..=k_max` for the first positive twist verdict.
    pub k: usize,
    pub k_min: usize,
    pub k_max: usize,
    pub j: usize,
    pub seed_budget: usize,
    pub angle_grid: usize,
    pub radius_grid: usize,
    pub inner_radius: f64,
    pub class_delta: f64,
}

impl Default for SubharmonicSection {
    fn default() -> Self {
        let s = SubharmonicConfig::default();
        SubharmonicSection {
            k: 0,
            k_min: 1,
            k_max: 12,
            j: 1,
            seed_budget: s.seed_budget,
            angle_grid: s.angle_grid,
            radius_grid: s.radius_grid,
            inner_radius: s.inner_radius,
            class_delta: s.class_delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    pub tolerance: f64,
    pub det_tolerance: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection { tolerance: 1e-6, det_tolerance: 1e-6 }
    }
}

/// Raw bytes of the config file, the overrides applied, and the parsed result.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub bytes: Vec<u8>,
    pub overrides: Vec<String>,
    pub config: RunConfig,
}

pub fn load(path: &Path, overrides: &[String]) -> Result<LoadedConfig, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let text = std::str::from_utf8(&bytes).map_err(|_| CliError::Config("config is not UTF-8".into()))?;
    let config = parse(text, overrides)?;
    Ok(LoadedConfig { bytes, overrides: overrides.to_vec(), config })
}

pub fn parse(text: &str, overrides: &[String]) -> Result<RunConfig, CliError> {
    let mut table: toml::Table = text.parse().map_err(|e| CliError::Config(format!("config: {e}")))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let config: RunConfig = toml::Value::Table(table).try_into().map_err(|e| CliError::Config(format!("config: {e}")))?;
    config.validate()?;
    Ok(config)
}

/// `section.key=value`; the value is read as a TOML literal, falling back to
/// a bare string.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), CliError> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| CliError::Config(format!("override `{spec}` is not key=value")))?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("bad override key `{path}`")));
    }
    let value = match format!("v = {}", raw.trim()).parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap(),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let mut cur = table;
    for k in &keys[..keys.len() - 1] {
        let entry = cur.entry(k.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| CliError::Config(format!("`{k}` is not a section")))?;
    }
    cur.insert(keys[keys.len() - 1].to_string(), value);
    Ok(())
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{name} must be > 0 (got {v})")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        positive("problem.period_T", self.problem.period_t)?;
        positive("problem.lambda", self.problem.lambda)?;
        self.problem()?;
        self.shooting().validate()?;
        self.window().validate()?;
        let s = &self.scan;
        positive("scan.lambda_min", s.lambda_min)?;
        if s.points == 0 || !(s.lambda_max >= s.lambda_min) || (s.points > 1 && s.lambda_max == s.lambda_min) {
            return Err(CliError::Config("scan needs points >= 1 and lambda_max > lambda_min".into()));
        }
        self.branch_config().validate()?;
        let a = &self.asymptotic;
        if a.schedule.is_empty() || a.schedule.iter().any(|l| !(*l > 0.0)) || a.schedule.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CliError::Config("asymptotic.schedule must be positive and increasing".into()));
        }
        if !(a.plateau_t.is_empty() || (a.plateau_t.len() == 2 && a.plateau_t[1] > a.plateau_t[0])) {
            return Err(CliError::Config("asymptotic.plateau_t must be [start, end]".into()));
        }
        self.asymptotic_config().validate()?;
        let sp = &self.spectrum;
        if sp.f_samples > 0 && !(sp.f_mu_max > sp.f_mu_min) {
            return Err(CliError::Config("spectrum.f_mu_max must exceed f_mu_min".into()));
        }
        if sp.source == SpectrumSource::Analytic {
            self.trig_coeffs()?;
        }
        let sh = &self.subharmonic;
        if sh.j == 0 || (sh.k == 0 && !(sh.k_max >= sh.k_min.max(1))) {
            return Err(CliError::Config("subharmonic needs j >= 1 and a non-empty k range".into()));
        }
        positive("verify.tolerance", self.verify.tolerance)?;
        positive("verify.det_tolerance", self.verify.det_tolerance)?;
        Ok(())
    }

    pub fn problem(&self) -> Result<Problem, CliError> {
        let t = self.problem.period_t;
        let weight = match &self.problem.weight {
            WeightSpec::Trig { amplitude, phase_rad, offset } => {
                Weight::new(t, WeightForm::TrigShifted { amplitude: *amplitude, phase: *phase_rad, offset: *offset })?
            }
            WeightSpec::Piecewise { breakpoints_t, values } => Weight::piecewise(t, breakpoints_t.clone(), values.clone())?,
        };
        let g = match self.problem.nonlinearity {
            NonlinearitySpec::Power { exponent_p } => Nonlinearity::power(exponent_p)?,
            NonlinearitySpec::Saturated { exponent_p, exponent_q } => Nonlinearity::saturated(exponent_p, exponent_q)?,
        };
        Ok(Problem::new(weight, g, self.problem.lambda)?)
    }

    pub fn shooting(&self) -> ShootingConfig {
        let s = &self.solver;
        ShootingConfig {
            newton_tol: s.newton_tol,
            max_newton_iter: s.max_newton_iter,
            jacobian: match s.jacobian {
                JacobianKind::Variational => JacobianMode::Variational,
                JacobianKind::FiniteDifference => JacobianMode::FiniteDifference { h: s.fd_step },
            },
            dedup_distance: s.dedup_distance,
            segments_per_period: (s.segments_per_period > 0).then_some(s.segments_per_period),
            samples_per_period: s.samples_per_period,
            integrator: IntegratorConfig {
                rel_tol: s.rel_tol,
                abs_tol: s.abs_tol,
                lambda_aware_cap: s.lambda_aware_cap,
                ..IntegratorConfig::default()
            },
            ..ShootingConfig::default()
        }
    }

    pub fn window(&self) -> SearchWindow {
        let s = &self.solver;
        SearchWindow { r_min: s.r_min, r_max: s.r_max, small_seeds: s.small_seeds, large_seeds: s.large_seeds }
    }

    pub fn branch_config(&self) -> BranchConfig {
        let b = &self.branch;
        BranchConfig {
            lambda_min: b.lambda_min,
            lambda_max: b.lambda_max,
            initial_step: b.initial_step,
            min_step: b.min_step,
            max_step: b.max_step,
            max_steps: b.max_steps,
            max_corrector_iter: b.max_corrector_iter,
            fold_tol: b.fold_tol,
            reverify_every: b.reverify_every,
            shooting: self.shooting(),
            ..BranchConfig::default()
        }
    }

    pub fn asymptotic_config(&self) -> AsymptoticConfig {
        let a = &self.asymptotic;
        AsymptoticConfig {
            shooting: self.shooting(),
            window: self.window(),
            max_ratio: a.max_ratio,
            band_half_width: a.band_half_width,
            histogram_bins: a.histogram_bins,
            flat_height_fraction: a.flat_height_fraction,
        }
    }

    pub fn subharmonic_config(&self) -> SubharmonicConfig {
        let s = &self.subharmonic;
        SubharmonicConfig {
            shooting: self.shooting(),
            seed_budget: s.seed_budget,
            angle_grid: s.angle_grid,
            radius_grid: s.radius_grid,
            inner_radius: s.inner_radius,
            class_delta: s.class_delta,
        }
    }

    pub fn trig_coeffs(&self) -> Result<(TrigPoly, TrigPoly), CliError> {
        let s = &self.spectrum;
        let t = self.problem.period_t;
        Ok((TrigPoly::new(t, s.p_c0, s.p_cos.clone(), s.p_sin.clone())?, TrigPoly::new(t, s.q_c0, s.q_cos.clone(), s.q_sin.clone())?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG1: &str = include_str!("../configs/fig1.toml");

    #[test]
    fn bundled_config_round_trips() {
        let c = parse(FIG1, &[]).unwrap();
        let again: RunConfig = toml::from_str(&toml::to_string(&c).unwrap()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn overrides_reach_nested_keys() {
        let c = parse(FIG1, &["problem.lambda=5".into(), "subharmonic.j = 2".into()]).unwrap();
        assert_eq!(c.problem.lambda, 5.0);
        assert_eq!(c.subharmonic.j, 2);
        let c = parse(FIG1, &["asymptotic.family=small".into()]).unwrap();
        assert_eq!(c.asymptotic.family, FamilyKind::Small);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse(FIG1, &["problem.lambda=0".into()]), Err(CliError::Config(_))));
        assert!(matches!(parse(FIG1, &["solver.typo=1".into()]), Err(CliError::Config(_))));
        assert!(matches!(parse(FIG1, &["nonsense".into()]), Err(CliError::Config(_))));
    }

    #[test]
    fn scan_grid_hits_both_ends() {
        let g = ScanSection { lambda_min: 0.25, lambda_max: 30.0, points: 120 }.grid();
        assert_eq!(g.len(), 120);
        assert_eq!(g[0], 0.25);
        assert_eq!(g[119], 30.0);
    }
}
