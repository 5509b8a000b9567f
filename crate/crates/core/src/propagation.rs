//! Probe propagation through an optically thick cell, split into thin
//! layers that each see the Doppler-averaged response of the atoms.
//!
//! Probe fields are positive-frequency envelopes ℰ (V/m) per harmonic; the
//! Rabi frequency of a harmonic is `d₂₁ · 2ℰ / ħ`. Each layer updates
//! `ℰₙ ← ℰₙ + i (ω_p N d₂₁ / 2ε₀c) ⟨ρ₂₁⁽ⁿ⁾⟩ δz`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::atom::{build_dissipator, build_hamiltonian, rabi_from_field, AtomModel, DriveConfig, DEFAULT_HARMONIC_CAP};
use crate::constants::{EPSILON_0, SPEED_OF_LIGHT, TWO_PI};
use crate::doppler::{doppler_average, VelocityGrid};
use crate::error::{Result, SimError};
use crate::floquet::{assemble_blocks, solve_continued_fraction, FloquetConfig, HarmonicDensityMatrix};
use crate::liouville::{Superoperator, C64};

/// Vapour cell geometry and content.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellModel {
    /// Cell length (m).
    pub length: f64,
    pub n_layers: usize,
    /// Density of the interacting isotope (m⁻³).
    pub number_density: f64,
    /// Ratio of the mean RF field inside the cell to the applied field.
    pub perturbation_factor: f64,
}

impl Default for CellModel {
    fn default() -> Self {
        Self { length: 0.075, n_layers: 100, number_density: 0.0, perturbation_factor: 0.52 }
    }
}

impl CellModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(SimError::InvalidInput("cell length must be > 0".into()));
        }
        if self.n_layers < 1 {
            return Err(SimError::InvalidInput("cell needs at least one layer".into()));
        }
        if !(self.number_density >= 0.0 && self.number_density.is_finite()) {
            return Err(SimError::InvalidInput("number density must be >= 0".into()));
        }
        if !(self.perturbation_factor > 0.0 && self.perturbation_factor <= 1.0) {
            return Err(SimError::InvalidInput("perturbation factor must lie in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn layer_thickness(&self) -> f64 {
        self.length / self.n_layers as f64
    }
}

/// Mean RF field inside the cell for a given applied field.
pub fn effective_rf_field(applied: f64, cell: &CellModel) -> Result<f64> {
    if !(applied >= 0.0) {
        return Err(SimError::InvalidInput(format!("applied RF field must be >= 0, got {applied}")));
    }
    Ok(cell.perturbation_factor * applied)
}

/// Probe envelopes at ω_p − ω_mod, ω_p, ω_p + ω_mod.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProbeHarmonics {
    pub minus: C64,
    pub carrier: C64,
    pub plus: C64,
}

impl ProbeHarmonics {
    pub fn carrier_only(envelope: f64) -> Self {
        let z = C64::new(0.0, 0.0);
        Self { minus: z, carrier: C64::new(envelope, 0.0), plus: z }
    }

    pub fn get(&self, n: i32) -> C64 {
        match n {
            -1 => self.minus,
            0 => self.carrier,
            1 => self.plus,
            _ => C64::new(0.0, 0.0),
        }
    }

    pub fn power_sum(&self) -> f64 {
        self.minus.norm_sqr() + self.carrier.norm_sqr() + self.plus.norm_sqr()
    }
}

/// Whether probe sidebands generated upstream drive the atoms downstream.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SidebandFeedback {
    #[default]
    SelfConsistent,
    ProbeLinear,
}

/// Everything except the probe that a layer needs: atom, coupling and RF
/// harmonics (unchanged through the cell), detunings and numerics.
#[derive(Clone, Debug)]
pub struct Medium {
    pub atom: AtomModel,
    pub coupling: BTreeMap<i32, C64>,
    pub rf: BTreeMap<i32, C64>,
    pub delta_p: f64,
    pub delta_c: f64,
    pub delta_rf: f64,
    pub omega_mod: f64,
    pub grid: VelocityGrid,
    pub floquet: FloquetConfig,
    pub feedback: SidebandFeedback,
    dissipator: Superoperator,
}

impl Medium {
    pub fn new(atom: AtomModel, grid: VelocityGrid, floquet: FloquetConfig) -> Self {
        let dissipator = build_dissipator(&atom);
        Self {
            atom,
            coupling: BTreeMap::new(),
            rf: BTreeMap::new(),
            delta_p: 0.0,
            delta_c: 0.0,
            delta_rf: 0.0,
            omega_mod: 0.0,
            grid,
            floquet,
            feedback: SidebandFeedback::default(),
            dissipator,
        }
    }

    pub fn dissipator(&self) -> &Superoperator {
        &self.dissipator
    }

    /// Atomic drive seen by atoms exposed to the given probe harmonics.
    pub fn local_drive(&self, probe: &ProbeHarmonics) -> DriveConfig {
        let mut probe_map = BTreeMap::new();
        let harmonics: &[i32] = match self.feedback {
            SidebandFeedback::SelfConsistent => &[-1, 0, 1],
            SidebandFeedback::ProbeLinear => &[0],
        };
        for &n in harmonics {
            let e = probe.get(n);
            if e.norm() > 0.0 {
                probe_map.insert(n, rabi_from_field(e * 2.0, self.atom.d21));
            }
        }
        let drop_zero = |m: &BTreeMap<i32, C64>| -> BTreeMap<i32, C64> {
            m.iter().filter(|(_, v)| v.norm() > 0.0).map(|(k, v)| (*k, *v)).collect()
        };
        DriveConfig {
            probe: probe_map,
            coupling: drop_zero(&self.coupling),
            rf: drop_zero(&self.rf),
            delta_p: self.delta_p,
            delta_c: self.delta_c,
            delta_rf: self.delta_rf,
            omega_mod: self.omega_mod,
        }
    }

    /// Periodic steady state of one velocity class.
    pub fn solve_velocity(&self, drive: &DriveConfig, velocity: f64) -> Result<HarmonicDensityMatrix> {
        let h = build_hamiltonian(drive, velocity, &self.atom, DEFAULT_HARMONIC_CAP)?;
        let blocks = assemble_blocks(&h, &self.dissipator);
        solve_continued_fraction(&blocks, self.omega_mod, &self.floquet)
    }

    /// Doppler-averaged response to the given probe harmonics.
    pub fn averaged_response(&self, probe: &ProbeHarmonics) -> Result<HarmonicDensityMatrix> {
        let drive = self.local_drive(probe);
        doppler_average(&self.grid, |v| self.solve_velocity(&drive, v))
    }

    /// `ω_p N d₂₁ / (2 ε₀ c)` for unit density (V/m per metre).
    pub fn coupling_constant(&self) -> f64 {
        let omega_p = TWO_PI * SPEED_OF_LIGHT / self.atom.lambda_p;
        omega_p * self.atom.d21 / (2.0 * EPSILON_0 * SPEED_OF_LIGHT)
    }
}

/// One thin layer: probe in, probe out.
pub fn layer_step(probe_in: &ProbeHarmonics, medium: &Medium, cell: &CellModel) -> Result<ProbeHarmonics> {
    if cell.number_density == 0.0 {
        return Ok(*probe_in);
    }
    let rho = medium.averaged_response(probe_in)?;
    let gain = C64::new(0.0, medium.coupling_constant() * cell.number_density * cell.layer_thickness());
    Ok(ProbeHarmonics {
        minus: probe_in.minus + gain * rho.rho21(-1),
        carrier: probe_in.carrier + gain * rho.rho21(0),
        plus: probe_in.plus + gain * rho.rho21(1),
    })
}

/// Folds [`layer_step`] over all layers of the cell.
pub fn propagate(input: &ProbeHarmonics, medium: &Medium, cell: &CellModel) -> Result<ProbeHarmonics> {
    cell.validate()?;
    (0..cell.n_layers).try_fold(*input, |probe, layer| {
        layer_step(&probe, medium, cell).map_err(|e| SimError::AtLayer { layer, source: Box::new(e) })
    })
}

/// Carrier power transmission `|ℰ₀'|² / |ℰ₀|²`.
pub fn carrier_transmission(input: &ProbeHarmonics, medium: &Medium, cell: &CellModel) -> Result<f64> {
    let out = propagate(input, medium, cell)?;
    Ok(out.carrier.norm_sqr() / input.carrier.norm_sqr())
}

/// Densities above this are treated as unreachable during calibration.
pub const MAX_CALIBRATION_DENSITY: f64 = 1e22;

/// Finds the density for which the coupling-off, resonant carrier
/// transmission equals `target`.
///
/// The root is kept bracketed throughout; steps are false-position on
/// `ln T` (nearly linear in density) with the Illinois safeguard, falling
/// back to bisection when an update would leave the bracket.
pub fn calibrate_density(
    target: f64,
    input: &ProbeHarmonics,
    medium: &Medium,
    template: &CellModel,
) -> Result<f64> {
    if !(target > 0.0 && target <= 1.0) {
        return Err(SimError::InvalidInput(format!("target transmission must lie in (0, 1], got {target}")));
    }
    if target == 1.0 {
        return Ok(0.0);
    }
    let mut off = medium.clone();
    off.coupling.clear();
    off.rf.clear();
    off.delta_p = 0.0;
    off.omega_mod = 0.0;

    let transmission = |density: f64| -> Result<f64> {
        let cell = CellModel { number_density: density, ..template.clone() };
        carrier_transmission(input, &off, &cell)
    };
    let residual = |t: f64| t.ln() - target.ln();

    let mut lo = (0.0, residual(1.0));
    let mut hi_density = 1e14;
    let mut hi = loop {
        let r = residual(transmission(hi_density)?);
        if r < 0.0 {
            break (hi_density, r);
        }
        lo = (hi_density, r);
        hi_density *= 10.0;
        if hi_density > MAX_CALIBRATION_DENSITY {
            return Err(SimError::NotBracketed { target, max_density: MAX_CALIBRATION_DENSITY });
        }
    };

    let mut side = 0i8;
    for _ in 0..200 {
        let (x0, f0) = lo;
        let (x1, f1) = hi;
        let mut x = x0 - f0 * (x1 - x0) / (f1 - f0);
        if !(x > x0 && x < x1) {
            x = 0.5 * (x0 + x1);
        }
        let t = transmission(x)?;
        let f = residual(t);
        if (t - target).abs() <= 1e-7 || (x1 - x0) <= 1e-12 * x1 {
            return Ok(x);
        }
        if f > 0.0 {
            lo = (x, f);
            if side == 1 {
                hi.1 *= 0.5;
            }
            side = 1;
        } else {
            hi = (x, f);
            if side == -1 {
                lo.1 *= 0.5;
            }
            side = -1;
        }
    }
    Ok(0.5 * (lo.0 + hi.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::doppler::VelocityGrid;

    fn medium() -> Medium {
        Medium::new(AtomModel::rb85(), VelocityGrid::single(0.0), FloquetConfig::fixed(4))
    }

    #[test]
    fn rf_scaling() {
        let cell = CellModel::default();
        assert_eq!(effective_rf_field(0.0, &cell).unwrap(), 0.0);
        assert!((effective_rf_field(1.0, &cell).unwrap() - 0.52).abs() < 1e-15);
        let unity = CellModel { perturbation_factor: 1.0, ..cell };
        assert_eq!(effective_rf_field(0.37, &unity).unwrap(), 0.37);
        assert!(effective_rf_field(-1.0, &unity).is_err());
    }

    #[test]
    fn vacuum_layer_is_identity() {
        let p = ProbeHarmonics::carrier_only(10.0);
        let out = layer_step(&p, &medium(), &CellModel::default()).unwrap();
        assert_eq!(out, p);
    }

    #[test]
    fn unmodulated_coupling_leaves_sidebands_zero() {
        let mut m = medium();
        m.coupling.insert(0, C64::new(TWO_PI * 3e6, 0.0));
        let cell = CellModel { number_density: 1e15, n_layers: 5, ..CellModel::default() };
        let out = propagate(&ProbeHarmonics::carrier_only(10.0), &m, &cell).unwrap();
        assert_eq!(out.minus, C64::new(0.0, 0.0));
        assert_eq!(out.plus, C64::new(0.0, 0.0));
        assert!(out.carrier.norm() < 10.0);
    }

    #[test]
    fn single_layer_propagate_equals_layer_step() {
        let cell = CellModel { number_density: 3e15, n_layers: 1, ..CellModel::default() };
        let p = ProbeHarmonics::carrier_only(5.0);
        assert_eq!(propagate(&p, &medium(), &cell).unwrap(), layer_step(&p, &medium(), &cell).unwrap());
    }

    #[test]
    fn invalid_cells_rejected() {
        let p = ProbeHarmonics::carrier_only(5.0);
        for cell in [
            CellModel { n_layers: 0, ..CellModel::default() },
            CellModel { number_density: -1.0, ..CellModel::default() },
            CellModel { perturbation_factor: 1.5, ..CellModel::default() },
        ] {
            assert!(propagate(&p, &medium(), &cell).is_err());
        }
    }

    #[test]
    fn calibration_edges() {
        let p = ProbeHarmonics::carrier_only(1.0);
        let cell = CellModel { n_layers: 4, ..CellModel::default() };
        assert_eq!(calibrate_density(1.0, &p, &medium(), &cell).unwrap(), 0.0);
        assert!(calibrate_density(0.0, &p, &medium(), &cell).is_err());
        assert!(calibrate_density(1.2, &p, &medium(), &cell).is_err());
        let err = calibrate_density(1e-300, &p, &medium(), &cell).unwrap_err();
        assert!(matches!(err, SimError::NotBracketed { .. }));
    }
}
