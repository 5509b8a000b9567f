//! Run configuration: a sectioned TOML file whose every key has a default
//! taken from the reference experiment.
//!
//! Frequencies are given in Hz (cycles, not rad/s); everything else is SI.
//! The RF amplitude is always the applied field in front of the cell.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::atom::{peak_field, rabi_from_field, transit_rate, AtomModel};
use crate::constants::{ATOMIC_MASS_UNIT, TWO_PI};
use crate::doppler::{GridRule, GridSpec, ThermalEnsemble};
use crate::error::{Result, SimError};
use crate::floquet::FloquetConfig;
use crate::liouville::C64;
use crate::propagation::{calibrate_density, CellModel, SidebandFeedback};
use crate::signals::{linspace, Protocol, Receiver, SweepVariable, DEFAULT_FIT_DEGREE};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtomSection {
    pub gamma2_hz: f64,
    pub gamma3_hz: f64,
    pub gamma4_hz: f64,
    /// Transit relaxation; derived from temperature and probe diameter when
    /// absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_transit_hz: Option<f64>,
    /// Dipole moments (C·m).
    pub d21: f64,
    pub d32: f64,
    pub d43: f64,
    pub lambda_p: f64,
    pub lambda_c: f64,
    /// Atomic mass in unified atomic mass units.
    pub mass_u: f64,
    pub abundance: f64,
}

impl Default for AtomSection {
    fn default() -> Self {
        let a = AtomModel::rb85();
        Self {
            gamma2_hz: a.gamma2 / TWO_PI,
            gamma3_hz: a.gamma3 / TWO_PI,
            gamma4_hz: a.gamma4 / TWO_PI,
            gamma_transit_hz: None,
            d21: a.d21,
            d32: a.d32,
            d43: a.d43,
            lambda_p: a.lambda_p,
            lambda_c: a.lambda_c,
            mass_u: 84.911_789_738,
            abundance: a.abundance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellSection {
    pub length: f64,
    pub n_layers: usize,
    pub perturbation_factor: f64,
    /// Density of the interacting isotope (m⁻³).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub number_density: Option<f64>,
    /// Total vapour density; scaled by the abundance.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vapor_density: Option<f64>,
    /// Resonant coupling-off transmission to calibrate the density against
    /// when no density is given.
    pub target_transmission: f64,
}

impl Default for CellSection {
    fn default() -> Self {
        let c = CellModel::default();
        Self {
            length: c.length,
            n_layers: c.n_layers,
            perturbation_factor: c.perturbation_factor,
            number_density: None,
            vapor_density: None,
            target_transmission: 0.37,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriveSection {
    /// Probe power at the cell input (W).
    pub probe_power: f64,
    /// 1/e² beam diameters (m).
    pub probe_diameter: f64,
    pub coupling_power: f64,
    pub coupling_diameter: f64,
    /// Applied RF amplitude (V/m).
    pub e_rf: f64,
    /// Transition frequency |3⟩→|4⟩; informational under the rotating-wave
    /// approximation.
    pub rf_frequency_hz: f64,
    pub delta_p_hz: f64,
    pub delta_c_hz: f64,
    pub delta_rf_hz: f64,
    pub omega_mod_hz: f64,
    /// Coupling sideband/carrier amplitude ratio.
    pub sideband_ratio: f64,
    /// Phase-modulation drive amplitude (rad); recorded, not used.
    pub modulation_index: f64,
}

impl Default for DriveSection {
    fn default() -> Self {
        Self {
            probe_power: 0.4e-6,
            probe_diameter: 0.3e-3,
            coupling_power: 46e-3,
            coupling_diameter: 0.4e-3,
            e_rf: 0.5014,
            rf_frequency_hz: 17.0422e9,
            delta_p_hz: 0.0,
            delta_c_hz: 0.0,
            delta_rf_hz: 0.0,
            omega_mod_hz: 3e6,
            sideband_ratio: 0.6,
            modulation_index: std::f64::consts::FRAC_PI_3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnsembleSection {
    pub temperature: f64,
    pub rule: GridRule,
    pub n_points: usize,
    pub span_sigmas: f64,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        let g = GridSpec::default();
        Self { temperature: 293.0, rule: g.rule, n_points: g.n_points, span_sigmas: g.span_sigmas }
    }
}

impl EnsembleSection {
    pub fn grid(&self) -> GridSpec {
        GridSpec { rule: self.rule, n_points: self.n_points, span_sigmas: self.span_sigmas }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub delta_p_min_hz: f64,
    pub delta_p_max_hz: f64,
    pub delta_p_points: usize,
    pub e_rf_min: f64,
    pub e_rf_max: f64,
    pub e_rf_points: usize,
    /// RF detunings of the field-scan family.
    pub delta_rf_family_hz: Vec<f64>,
    /// Probe detunings used for field scans with each protocol.
    pub conventional_delta_p_hz: f64,
    pub modulation_transfer_delta_p_hz: f64,
    pub fit_degree: usize,
    /// Used by the `custom` preset.
    pub variable: SweepVariable,
    pub protocol: Protocol,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            delta_p_min_hz: -20e6,
            delta_p_max_hz: 20e6,
            delta_p_points: 161,
            e_rf_min: 0.0,
            e_rf_max: 0.6,
            e_rf_points: 121,
            delta_rf_family_hz: vec![0.0, 5e6, 10e6, 20e6, 30e6],
            conventional_delta_p_hz: 2e6,
            modulation_transfer_delta_p_hz: 0.0,
            fit_degree: DEFAULT_FIT_DEGREE,
            variable: SweepVariable::ProbeDetuning,
            protocol: Protocol::ModulationTransfer,
        }
    }
}

impl SweepSection {
    /// Probe detuning grid in rad/s.
    pub fn delta_p_grid(&self) -> Vec<f64> {
        linspace(TWO_PI * self.delta_p_min_hz, TWO_PI * self.delta_p_max_hz, self.delta_p_points)
    }

    pub fn e_rf_grid(&self) -> Vec<f64> {
        linspace(self.e_rf_min, self.e_rf_max, self.e_rf_points)
    }

    pub fn grid(&self, variable: SweepVariable) -> Vec<f64> {
        match variable {
            SweepVariable::ProbeDetuning => self.delta_p_grid(),
            SweepVariable::RfAmplitude => self.e_rf_grid(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub n_max: usize,
    pub tol: f64,
    pub adaptive: bool,
    pub n_max_limit: usize,
    pub probe_feedback: SidebandFeedback,
}

impl Default for SolverSection {
    /// Fixed truncation at 5 for cell runs: its error on ρ₂₁⁽±¹⁾ is ~1e-9 at
    /// the reference drive, and adaptive doubling would triple the cost.
    fn default() -> Self {
        let f = FloquetConfig::fixed(5);
        Self {
            n_max: f.n_max,
            tol: f.tol,
            adaptive: f.adaptive,
            n_max_limit: f.n_max_limit,
            probe_feedback: SidebandFeedback::SelfConsistent,
        }
    }
}

impl SolverSection {
    pub fn floquet(&self) -> FloquetConfig {
        FloquetConfig { n_max: self.n_max, tol: self.tol, adaptive: self.adaptive, n_max_limit: self.n_max_limit }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub atom: AtomSection,
    pub cell: CellSection,
    pub drive: DriveSection,
    pub ensemble: EnsembleSection,
    pub sweep: SweepSection,
    pub solver: SolverSection,
}

/// Where the number density of a resolved run came from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensitySource {
    Given,
    Vapor,
    Calibrated { target: f64 },
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| line_of(text, s.start)).unwrap_or(0);
        SimError::ConfigParse { line, message: e.message().to_string() }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

fn invalid(key: &str, message: impl Into<String>) -> SimError {
    SimError::ConfigValidation { key: key.to_string(), message: message.into() }
}

fn positive(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("must be finite and > 0, got {v}")))
    }
}

fn non_negative(key: &str, v: f64) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(invalid(key, format!("must be finite and >= 0, got {v}")))
    }
}

fn finite(key: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(invalid(key, format!("must be finite, got {v}")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let a = &self.atom;
        for (k, v) in [
            ("atom.gamma2_hz", a.gamma2_hz),
            ("atom.gamma3_hz", a.gamma3_hz),
            ("atom.gamma4_hz", a.gamma4_hz),
            ("atom.d21", a.d21),
            ("atom.d32", a.d32),
            ("atom.d43", a.d43),
            ("atom.lambda_p", a.lambda_p),
            ("atom.lambda_c", a.lambda_c),
            ("atom.mass_u", a.mass_u),
        ] {
            positive(k, v)?;
        }
        if let Some(g) = a.gamma_transit_hz {
            positive("atom.gamma_transit_hz", g)?;
        }
        if !(a.abundance > 0.0 && a.abundance <= 1.0) {
            return Err(invalid("atom.abundance", format!("must lie in (0, 1], got {}", a.abundance)));
        }

        let c = &self.cell;
        positive("cell.length", c.length)?;
        if c.n_layers < 1 {
            return Err(invalid("cell.n_layers", "must be >= 1"));
        }
        if !(c.perturbation_factor > 0.0 && c.perturbation_factor <= 1.0) {
            return Err(invalid(
                "cell.perturbation_factor",
                format!("must lie in (0, 1], got {}", c.perturbation_factor),
            ));
        }
        if let Some(n) = c.number_density {
            non_negative("cell.number_density", n)?;
        }
        if let Some(n) = c.vapor_density {
            non_negative("cell.vapor_density", n)?;
        }
        if c.number_density.is_some() && c.vapor_density.is_some() {
            return Err(invalid("cell.vapor_density", "cannot be combined with cell.number_density"));
        }
        if !(c.target_transmission > 0.0 && c.target_transmission <= 1.0) {
            return Err(invalid(
                "cell.target_transmission",
                format!("must lie in (0, 1], got {}", c.target_transmission),
            ));
        }

        let d = &self.drive;
        positive("drive.probe_power", d.probe_power)?;
        positive("drive.probe_diameter", d.probe_diameter)?;
        non_negative("drive.coupling_power", d.coupling_power)?;
        positive("drive.coupling_diameter", d.coupling_diameter)?;
        non_negative("drive.e_rf", d.e_rf)?;
        non_negative("drive.rf_frequency_hz", d.rf_frequency_hz)?;
        finite("drive.delta_p_hz", d.delta_p_hz)?;
        finite("drive.delta_c_hz", d.delta_c_hz)?;
        finite("drive.delta_rf_hz", d.delta_rf_hz)?;
        positive("drive.omega_mod_hz", d.omega_mod_hz)?;
        non_negative("drive.sideband_ratio", d.sideband_ratio)?;
        finite("drive.modulation_index", d.modulation_index)?;

        let e = &self.ensemble;
        positive("ensemble.temperature", e.temperature)?;
        if e.n_points < 3 || e.n_points % 2 == 0 {
            return Err(invalid("ensemble.n_points", format!("must be odd and >= 3, got {}", e.n_points)));
        }
        positive("ensemble.span_sigmas", e.span_sigmas)?;
        if let GridRule::Sinh { core } = e.rule {
            positive("ensemble.rule.sinh.core", core)?;
        }

        let s = &self.sweep;
        for (k, v) in [
            ("sweep.delta_p_min_hz", s.delta_p_min_hz),
            ("sweep.delta_p_max_hz", s.delta_p_max_hz),
            ("sweep.conventional_delta_p_hz", s.conventional_delta_p_hz),
            ("sweep.modulation_transfer_delta_p_hz", s.modulation_transfer_delta_p_hz),
        ] {
            finite(k, v)?;
        }
        if !(s.delta_p_max_hz > s.delta_p_min_hz) {
            return Err(invalid("sweep.delta_p_max_hz", "must exceed sweep.delta_p_min_hz"));
        }
        non_negative("sweep.e_rf_min", s.e_rf_min)?;
        finite("sweep.e_rf_max", s.e_rf_max)?;
        if !(s.e_rf_max > s.e_rf_min) {
            return Err(invalid("sweep.e_rf_max", "must exceed sweep.e_rf_min"));
        }
        if s.delta_p_points < 2 {
            return Err(invalid("sweep.delta_p_points", "must be >= 2"));
        }
        if s.e_rf_points < 2 {
            return Err(invalid("sweep.e_rf_points", "must be >= 2"));
        }
        if s.fit_degree < 1 {
            return Err(invalid("sweep.fit_degree", "must be >= 1"));
        }
        if s.e_rf_points < s.fit_degree + 2 {
            return Err(invalid(
                "sweep.e_rf_points",
                format!("needs at least fit_degree + 2 = {} points", s.fit_degree + 2),
            ));
        }
        if s.delta_rf_family_hz.is_empty() {
            return Err(invalid("sweep.delta_rf_family_hz", "must list at least one detuning"));
        }
        for v in &s.delta_rf_family_hz {
            finite("sweep.delta_rf_family_hz", *v)?;
        }

        let f = &self.solver;
        if f.n_max < 1 {
            return Err(invalid("solver.n_max", "must be >= 1"));
        }
        positive("solver.tol", f.tol)?;
        if f.n_max_limit < f.n_max {
            return Err(invalid("solver.n_max_limit", "must be >= solver.n_max"));
        }
        Ok(())
    }

    /// The fully resolved configuration as TOML text.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is always representable as TOML")
    }

    pub fn atom_model(&self) -> AtomModel {
        let a = &self.atom;
        let mass = a.mass_u * ATOMIC_MASS_UNIT;
        let gamma_transit = match a.gamma_transit_hz {
            Some(g) => TWO_PI * g,
            None => transit_rate(self.ensemble.temperature, mass, self.drive.probe_diameter),
        };
        AtomModel {
            gamma2: TWO_PI * a.gamma2_hz,
            gamma3: TWO_PI * a.gamma3_hz,
            gamma4: TWO_PI * a.gamma4_hz,
            gamma_transit,
            d21: a.d21,
            d32: a.d32,
            d43: a.d43,
            lambda_p: a.lambda_p,
            lambda_c: a.lambda_c,
            mass,
            abundance: a.abundance,
        }
    }

    /// Receiver with a zero density; see [`RunConfig::receiver`].
    pub fn receiver_template(&self) -> Result<Receiver> {
        let atom = self.atom_model();
        let ensemble = ThermalEnsemble::new(self.ensemble.temperature, atom.mass)?;
        let grid = self.ensemble.grid().build(&ensemble)?;
        let d = &self.drive;
        let coupling_field = peak_field(d.coupling_power, d.coupling_diameter / 2.0);
        let coupling_rabi = rabi_from_field(C64::new(coupling_field, 0.0), atom.d32).re;
        Ok(Receiver {
            atom,
            cell: CellModel {
                length: self.cell.length,
                n_layers: self.cell.n_layers,
                number_density: 0.0,
                perturbation_factor: self.cell.perturbation_factor,
            },
            grid,
            floquet: self.solver.floquet(),
            feedback: self.solver.probe_feedback,
            probe_envelope: 0.5 * peak_field(d.probe_power, d.probe_diameter / 2.0),
            coupling_rabi,
            sideband_ratio: d.sideband_ratio,
            omega_mod: TWO_PI * d.omega_mod_hz,
            delta_p: TWO_PI * d.delta_p_hz,
            delta_c: TWO_PI * d.delta_c_hz,
            delta_rf: TWO_PI * d.delta_rf_hz,
            e_rf_applied: d.e_rf,
        })
    }

    /// Resolves the density (given, from vapour density, or calibrated) and
    /// returns the ready receiver.
    pub fn receiver(&self) -> Result<(Receiver, DensitySource)> {
        let mut rx = self.receiver_template()?;
        let source = if let Some(n) = self.cell.number_density {
            rx.cell.number_density = n;
            DensitySource::Given
        } else if let Some(n) = self.cell.vapor_density {
            rx.cell.number_density = n * rx.atom.abundance;
            DensitySource::Vapor
        } else {
            let target = self.cell.target_transmission;
            let medium = rx.medium(Protocol::Conventional, false)?;
            rx.cell.number_density = calibrate_density(target, &rx.input(), &medium, &rx.cell)?;
            DensitySource::Calibrated { target }
        };
        Ok((rx, source))
    }
}
