//! Effective four-level ladder |1⟩ → |2⟩ → |3⟩ → |4⟩ driven by probe,
//! coupling and RF fields.
//!
//! Conventions used throughout the crate:
//!
//! * ħ = 1, every rate and frequency is angular (rad/s).
//! * A field of real amplitude `E₀` has Rabi frequency `Ω = d E₀ / ħ`; its
//!   positive-frequency envelope is `ℰ = E₀ / 2`.
//! * The rotating-frame Hamiltonian is `H(t) = Σ_m H_m e^{−i m ω_mod t}` with
//!   lower-diagonal couplings `H_m(k+1, k) = −Ω_m / 2` (electric-dipole sign)
//!   and upper entries fixed by Hermiticity, `H_m(k, k+1) = −Ω*_{−m} / 2`.
//! * Probe travels along +z and coupling along −z, so a velocity `v` shifts
//!   the detunings to `Δp − k_p v` and `Δc + k_c v`. The RF Doppler shift is
//!   neglected.

use std::collections::BTreeMap;

use nalgebra::SymmetricEigen;
use serde::{Deserialize, Serialize};

use crate::constants::{ATOMIC_MASS_UNIT, BOLTZMANN, HBAR, TWO_PI};
use crate::error::{Result, SimError};
use crate::liouville::{max_norm, solve_with_trace, Mat4, Superoperator, C64, LEVELS};

/// Largest harmonic index accepted by [`build_hamiltonian`] unless the caller
/// asks otherwise.
pub const DEFAULT_HARMONIC_CAP: i32 = 4;

/// Parameters of the effective four-level atom.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomModel {
    /// Decay rate of |2⟩ (rad/s).
    pub gamma2: f64,
    /// Decay rate of |3⟩ (rad/s).
    pub gamma3: f64,
    /// Decay rate of |4⟩ (rad/s).
    pub gamma4: f64,
    /// Transit exchange rate through the probe beam (1/s).
    pub gamma_transit: f64,
    /// Effective dipole moments (C·m).
    pub d21: f64,
    pub d32: f64,
    pub d43: f64,
    /// Probe wavelength (m).
    pub lambda_p: f64,
    /// Coupling wavelength (m).
    pub lambda_c: f64,
    /// Atomic mass (kg).
    pub mass: f64,
    /// Fraction of the vapour made of the interacting isotope.
    pub abundance: f64,
}

impl AtomModel {
    /// ⁸⁵Rb with |1⟩ = 5S₁/₂ F=3, |2⟩ = 5P₃/₂ F'=4, |3⟩ = 50D₅/₂, |4⟩ = 51P₃/₂.
    ///
    /// The D2 linewidth is the tabulated value. The Rydberg lifetimes and the
    /// two Rydberg dipoles are reconstructions of what a single-atom
    /// calculator returns for these states at room temperature, scaled by a
    /// typical angular factor for linear polarisation; they are inputs, not
    /// fitted values.
    pub fn rb85() -> Self {
        let mass = 84.911_789_738 * ATOMIC_MASS_UNIT;
        Self {
            gamma2: TWO_PI * 6.0666e6,
            gamma3: TWO_PI * 3.2e3,
            gamma4: TWO_PI * 2.7e3,
            gamma_transit: transit_rate(293.0, mass, 0.3e-3),
            d21: 2.0e-29,
            d32: 8.5e-32,
            d43: 1.27e-26,
            lambda_p: 780.241e-9,
            lambda_c: 480.0e-9,
            mass,
            abundance: 0.73,
        }
    }

    pub fn k_probe(&self) -> f64 {
        TWO_PI / self.lambda_p
    }

    pub fn k_coupling(&self) -> f64 {
        TWO_PI / self.lambda_c
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma2", self.gamma2),
            ("gamma3", self.gamma3),
            ("gamma4", self.gamma4),
            ("gamma_transit", self.gamma_transit),
            ("d21", self.d21),
            ("d32", self.d32),
            ("d43", self.d43),
            ("lambda_p", self.lambda_p),
            ("lambda_c", self.lambda_c),
            ("mass", self.mass),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::InvalidInput(format!(
                    "atom.{name} must be finite and > 0, got {v}"
                )));
            }
        }
        if !(self.abundance > 0.0 && self.abundance <= 1.0) {
            return Err(SimError::InvalidInput(format!(
                "atom.abundance must lie in (0, 1], got {}",
                self.abundance
            )));
        }
        Ok(())
    }
}

/// Mean thermal speed `sqrt(8 kB T / (π m))` divided by the beam diameter.
pub fn transit_rate(temperature: f64, mass: f64, beam_diameter: f64) -> f64 {
    let mean_speed = (8.0 * BOLTZMANN * temperature / (std::f64::consts::PI * mass)).sqrt();
    mean_speed / beam_diameter
}

/// `Ω = d E / ħ` for a real amplitude `E` (which may carry a phase).
pub fn rabi_from_field(field: C64, dipole: f64) -> C64 {
    field * (dipole / HBAR)
}

/// Peak real field amplitude of a Gaussian beam of given power and 1/e²
/// intensity radius.
pub fn peak_field(power: f64, waist_radius: f64) -> f64 {
    use crate::constants::{EPSILON_0, SPEED_OF_LIGHT};
    let intensity = 2.0 * power / (std::f64::consts::PI * waist_radius * waist_radius);
    (2.0 * intensity / (SPEED_OF_LIGHT * EPSILON_0)).sqrt()
}

/// Harmonic-resolved drive: each map sends a harmonic index to the complex
/// Rabi frequency of that spectral component.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DriveConfig {
    pub probe: BTreeMap<i32, C64>,
    pub coupling: BTreeMap<i32, C64>,
    pub rf: BTreeMap<i32, C64>,
    pub delta_p: f64,
    pub delta_c: f64,
    pub delta_rf: f64,
    pub omega_mod: f64,
}

impl DriveConfig {
    /// Single-frequency fields on all three transitions.
    pub fn carriers(probe: f64, coupling: f64, rf: f64) -> Self {
        let one = |x: f64| {
            let mut m = BTreeMap::new();
            if x != 0.0 {
                m.insert(0, C64::new(x, 0.0));
            }
            m
        };
        Self {
            probe: one(probe),
            coupling: one(coupling),
            rf: one(rf),
            ..Self::default()
        }
    }

    /// Replaces the coupling by a phase-modulated one: carrier `carrier` and
    /// sidebands of opposite sign, `{−1: −s, 0: c, +1: +s}`.
    pub fn with_phase_modulated_coupling(mut self, carrier: f64, sideband: f64, omega_mod: f64) -> Self {
        self.coupling.clear();
        self.coupling.insert(0, C64::new(carrier, 0.0));
        if sideband != 0.0 {
            self.coupling.insert(-1, C64::new(-sideband, 0.0));
            self.coupling.insert(1, C64::new(sideband, 0.0));
        }
        self.omega_mod = omega_mod;
        self
    }

    fn fields(&self) -> [&BTreeMap<i32, C64>; 3] {
        [&self.probe, &self.coupling, &self.rf]
    }

    /// Largest |m| carrying a nonzero amplitude.
    pub fn max_harmonic(&self) -> i32 {
        self.fields()
            .iter()
            .flat_map(|f| f.iter())
            .filter(|(_, v)| v.norm() > 0.0)
            .map(|(m, _)| m.abs())
            .max()
            .unwrap_or(0)
    }

    pub fn is_modulated(&self) -> bool {
        self.max_harmonic() > 0
    }

    pub fn validate(&self) -> Result<()> {
        for f in self.fields() {
            if f.values().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
                return Err(SimError::InvalidInput("drive amplitudes must be finite".into()));
            }
        }
        for (name, v) in [
            ("delta_p", self.delta_p),
            ("delta_c", self.delta_c),
            ("delta_rf", self.delta_rf),
            ("omega_mod", self.omega_mod),
        ] {
            if !v.is_finite() {
                return Err(SimError::InvalidInput(format!("drive.{name} must be finite")));
            }
        }
        if self.is_modulated() && !(self.omega_mod > 0.0) {
            return Err(SimError::InvalidInput(
                "omega_mod must be > 0 when any field has sidebands".into(),
            ));
        }
        Ok(())
    }
}

/// Fourier components `H_m` of the rotating-frame Hamiltonian.
#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianHarmonics {
    pub terms: BTreeMap<i32, Mat4>,
}

impl HamiltonianHarmonics {
    pub fn get(&self, m: i32) -> Mat4 {
        self.terms.get(&m).copied().unwrap_or_else(Mat4::zeros)
    }

    pub fn carrier(&self) -> Mat4 {
        self.get(0)
    }

    /// `Σ_m H_m e^{−i m θ}` with `θ = ω_mod t`.
    pub fn at_phase(&self, theta: f64) -> Mat4 {
        self.terms.iter().fold(Mat4::zeros(), |acc, (m, h)| {
            acc + h * C64::from_polar(1.0, -(*m as f64) * theta)
        })
    }

    pub fn max_index(&self) -> i32 {
        self.terms.keys().map(|m| m.abs()).max().unwrap_or(0)
    }
}

/// Builds the rotating-frame Hamiltonian harmonics for an atom moving at
/// `velocity` along +z.
pub fn build_hamiltonian(
    drive: &DriveConfig,
    velocity: f64,
    atom: &AtomModel,
    harmonic_cap: i32,
) -> Result<HamiltonianHarmonics> {
    drive.validate()?;
    for f in drive.fields() {
        for &m in f.keys() {
            if m.abs() > harmonic_cap {
                return Err(SimError::HarmonicCap { index: m, cap: harmonic_cap });
            }
        }
    }

    let dp = drive.delta_p - atom.k_probe() * velocity;
    let dc = drive.delta_c + atom.k_coupling() * velocity;
    let mut terms: BTreeMap<i32, Mat4> = BTreeMap::new();
    let mut h0 = Mat4::zeros();
    h0[(1, 1)] = C64::new(-dp, 0.0);
    h0[(2, 2)] = C64::new(-(dp + dc), 0.0);
    h0[(3, 3)] = C64::new(-(dp + dc + drive.delta_rf), 0.0);
    terms.insert(0, h0);

    let half = C64::new(-0.5, 0.0);
    for (lower, field) in drive.fields().into_iter().enumerate() {
        for (&m, &omega) in field {
            let upper = terms.entry(m).or_insert_with(Mat4::zeros);
            upper[(lower + 1, lower)] += half * omega;
            let mirror = terms.entry(-m).or_insert_with(Mat4::zeros);
            mirror[(lower, lower + 1)] += half * omega.conj();
        }
    }
    Ok(HamiltonianHarmonics { terms })
}

/// Effective decay and transit channels expressed as a Lindblad generator.
///
/// * chain decay |4⟩→|3⟩→|2⟩→|1⟩ at γ₄, γ₃, γ₂;
/// * transit: every level is lost at `gamma_transit` and refilled into |1⟩,
///   i.e. `D[ρ] ⊃ γ_t (tr ρ |1⟩⟨1| − ρ)`.
pub fn build_dissipator(atom: &AtomModel) -> Superoperator {
    let jump = |to: usize, from: usize, rate: f64| {
        let mut l = Mat4::zeros();
        l[(to, from)] = C64::new(rate.sqrt(), 0.0);
        Superoperator::lindblad(&l)
    };
    let mut d = jump(0, 1, atom.gamma2) + jump(1, 2, atom.gamma3) + jump(2, 3, atom.gamma4);
    if atom.gamma_transit > 0.0 {
        for k in 0..LEVELS {
            d = d + jump(0, k, atom.gamma_transit);
        }
    }
    d
}

/// A single 4×4 density matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix(pub Mat4);

impl DensityMatrix {
    pub fn ground() -> Self {
        let mut m = Mat4::zeros();
        m[(0, 0)] = C64::new(1.0, 0.0);
        Self(m)
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn hermiticity_residual(&self) -> f64 {
        max_norm((self.0 - self.0.adjoint()).iter())
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (self.0 + self.0.adjoint()) * C64::new(0.5, 0.0);
        SymmetricEigen::new(herm).eigenvalues.min()
    }

    /// Probe coherence ρ₂₁ = ⟨2|ρ|1⟩.
    pub fn rho21(&self) -> C64 {
        self.0[(1, 0)]
    }
}

/// Static steady state of `−i[H₀, ρ] + D[ρ] = 0` with unit trace.
pub fn steady_state_static(h0: &Mat4, dissipator: &Superoperator) -> Result<DensityMatrix> {
    let generator = Superoperator::commutator(h0).0 + dissipator.0;
    solve_with_trace(&generator).map(DensityMatrix)
}

/// Root-mean-square 1-D thermal speed helper shared with the Doppler module.
pub fn thermal_sigma(temperature: f64, mass: f64) -> f64 {
    (BOLTZMANN * temperature / mass).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom() -> AtomModel {
        AtomModel::rb85()
    }

    #[test]
    fn rabi_examples() {
        assert_eq!(rabi_from_field(C64::new(0.0, 0.0), 1e-29), C64::new(0.0, 0.0));
        let one = rabi_from_field(C64::new(1.0, 0.0), 1e-29);
        // ħ = 1.0546e-34 J·s
        assert!((one.re - 9.482e4).abs() / 9.482e4 < 1e-3);
        let two = rabi_from_field(C64::new(2.0, 0.0), 1e-29);
        assert!((two.norm() - 2.0 * one.norm()).abs() < 1e-9);
    }

    #[test]
    fn empty_drive_gives_zero_hamiltonian() {
        let h = build_hamiltonian(&DriveConfig::default(), 0.0, &atom(), 4).unwrap();
        assert_eq!(h.terms.len(), 1);
        assert_eq!(h.carrier(), Mat4::zeros());
    }

    #[test]
    fn single_frequency_drive_has_only_carrier() {
        let d = DriveConfig::carriers(1e6, 2e6, 3e6);
        let h = build_hamiltonian(&d, 12.0, &atom(), 4).unwrap();
        assert_eq!(h.terms.keys().copied().collect::<Vec<_>>(), vec![0]);
    }

    #[test]
    fn carrier_diagonal_carries_doppler_shifted_detunings() {
        let a = atom();
        let mut d = DriveConfig::carriers(1e6, 2e6, 3e6);
        d.delta_p = 1e7;
        d.delta_c = -3e6;
        d.delta_rf = 2e6;
        let v = 7.5;
        let h = build_hamiltonian(&d, v, &a, 4).unwrap().carrier();
        let dp = 1e7 - a.k_probe() * v;
        let dc = -3e6 + a.k_coupling() * v;
        assert!((h[(1, 1)].re + dp).abs() < 1e-6);
        assert!((h[(2, 2)].re + dp + dc).abs() < 1e-6);
        assert!((h[(3, 3)].re + dp + dc + 2e6).abs() < 1e-6);
        assert!((h[(1, 0)].re + 0.5e6).abs() < 1e-9);
        assert!((h[(3, 2)].re + 1.5e6).abs() < 1e-9);
    }

    #[test]
    fn opposite_sign_sidebands_map_to_mirrored_entries() {
        let o1 = 1.3e6;
        let d = DriveConfig::carriers(1e6, 0.0, 0.0).with_phase_modulated_coupling(4e6, o1, 1.9e7);
        let h = build_hamiltonian(&d, 0.0, &atom(), 4).unwrap();
        // 1-indexed (2,3) is 0-indexed (1,2)
        assert!((h.get(1)[(1, 2)] - C64::new(o1 / 2.0, 0.0)).norm() < 1e-9);
        assert!((h.get(-1)[(1, 2)] - C64::new(-o1 / 2.0, 0.0)).norm() < 1e-9);
        assert!((h.get(-1) - h.get(1).adjoint()).norm() < 1e-9);
    }

    #[test]
    fn harmonic_cap_is_enforced() {
        let mut d = DriveConfig::carriers(1e6, 1e6, 0.0);
        d.coupling.insert(3, C64::new(1.0, 0.0));
        d.omega_mod = 1e6;
        let err = build_hamiltonian(&d, 0.0, &atom(), 2).unwrap_err();
        assert!(matches!(err, SimError::HarmonicCap { index: 3, cap: 2 }));
    }

    #[test]
    fn modulated_drive_requires_positive_omega_mod() {
        let d = DriveConfig::carriers(1e6, 0.0, 0.0).with_phase_modulated_coupling(1e6, 1e5, 0.0);
        assert!(build_hamiltonian(&d, 0.0, &atom(), 4).is_err());
    }

    #[test]
    fn ground_state_is_dark_without_transit() {
        let mut a = atom();
        a.gamma_transit = 0.0;
        let d = build_dissipator(&a);
        assert!(d.apply(&DensityMatrix::ground().0).norm() < 1e-20);
    }

    #[test]
    fn excited_population_flows_to_ground() {
        let a = atom();
        let d = build_dissipator(&a);
        let mut rho = Mat4::zeros();
        rho[(1, 1)] = C64::new(1.0, 0.0);
        let out = d.apply(&rho);
        assert!(out.trace().norm() < 1e-6);
        assert!((out[(0, 0)].re - (a.gamma2 + a.gamma_transit)).abs() < 1e-6);
        assert!((out[(1, 1)].re + a.gamma2 + a.gamma_transit).abs() < 1e-6);
    }

    #[test]
    fn coherence_decays_at_half_gamma2_plus_transit() {
        let mut a = atom();
        a.gamma3 = 1e-300;
        a.gamma4 = 1e-300;
        let d = build_dissipator(&a);
        let mut rho = Mat4::zeros();
        rho[(1, 0)] = C64::new(1.0, 0.0);
        let out = d.apply(&rho);
        let expected = a.gamma2 / 2.0 + a.gamma_transit;
        assert!((out[(1, 0)].re + expected).abs() / expected < 1e-12);
    }

    #[test]
    fn empty_field_steady_state_is_ground() {
        let a = atom();
        let rho = steady_state_static(&Mat4::zeros(), &build_dissipator(&a)).unwrap();
        assert!((rho.0 - DensityMatrix::ground().0).norm() < 1e-12);
    }

    #[test]
    fn zero_decay_is_singular() {
        let d = Superoperator::zero();
        assert!(matches!(
            steady_state_static(&Mat4::zeros(), &d),
            Err(SimError::Singular { .. })
        ));
    }

    #[test]
    fn transit_rate_is_order_of_hundreds_of_khz() {
        let a = atom();
        let f = a.gamma_transit / TWO_PI;
        assert!(f > 1e5 && f < 2e5, "{f}");
    }
}
