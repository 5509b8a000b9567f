#![allow(dead_code)]

use rydberg_mt::atom::AtomModel;
use rydberg_mt::config::RunConfig;
use rydberg_mt::constants::{EPSILON_0, HBAR, SPEED_OF_LIGHT};
use rydberg_mt::constants::TWO_PI;
use rydberg_mt::doppler::VelocityGrid;
use rydberg_mt::liouville::C64;
use rydberg_mt::signals::Receiver;

pub const MHZ: f64 = TWO_PI * 1e6;

/// Closed-form steady-state coherence of a driven two-level atom with
/// spontaneous decay `gamma2` (2→1) and transit relaxation `gamma_t`
/// (every level repumped into 1 at that rate), detuning Δ, real Rabi Ω.
///
/// With Γ = γ₂/2 + γ_t and γ = γ₂ + γ_t the Bloch equations give
/// ρ₂₁ = iΩw / (2(Γ − iΔ)), w = 1 / (1 + Ω²Γ / (γ(Γ² + Δ²))).
pub fn two_level_rho21(omega: f64, delta: f64, gamma2: f64, gamma_t: f64) -> C64 {
    let big = 0.5 * gamma2 + gamma_t;
    let total = gamma2 + gamma_t;
    let w = 1.0 / (1.0 + omega * omega * big / (total * (big * big + delta * delta)));
    C64::new(0.0, omega * w) / (C64::new(big, -delta) * 2.0)
}

/// Weak-probe intensity absorption coefficient per unit density for a
/// two-level atom at rest: α = (ω_p d²/(ε₀ c ħ)) · Γ / (Γ² + Δ²).
pub fn alpha_per_density(atom: &AtomModel, delta: f64) -> f64 {
    let big = 0.5 * atom.gamma2 + atom.gamma_transit;
    let omega_p = TWO_PI * SPEED_OF_LIGHT / atom.lambda_p;
    omega_p * atom.d21 * atom.d21 / (EPSILON_0 * SPEED_OF_LIGHT * HBAR) * big / (big * big + delta * delta)
}

pub fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

/// Reference setup with reduced numerics: `nodes` velocity classes on the
/// default rule, `layers` layers, and a fixed density near the calibrated
/// value so no calibration run is needed.
pub fn desk_receiver(nodes: usize, layers: usize) -> Receiver {
    let mut cfg = RunConfig::default();
    cfg.ensemble.n_points = nodes;
    cfg.cell.n_layers = layers;
    cfg.cell.number_density = Some(4.72e15);
    cfg.receiver().unwrap().0
}

/// Same, with every atom at rest.
pub fn resting_receiver(layers: usize, density: f64) -> Receiver {
    let mut rx = desk_receiver(3, layers);
    rx.grid = VelocityGrid::single(0.0);
    rx.cell.number_density = density;
    rx
}
