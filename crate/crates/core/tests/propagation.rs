mod common;

use common::*;
use proptest::prelude::*;
use rydberg_mt::atom::{thermal_sigma, AtomModel};
use rydberg_mt::config::RunConfig;
use rydberg_mt::constants::TWO_PI;
use rydberg_mt::doppler::VelocityGrid;
use rydberg_mt::floquet::FloquetConfig;
use rydberg_mt::propagation::{carrier_transmission, CellModel, Medium, ProbeHarmonics, SidebandFeedback};
use rydberg_mt::signals::{linspace, Protocol};

fn two_level_cell(grid: VelocityGrid, density: f64, delta: f64) -> (Medium, CellModel) {
    let mut medium = Medium::new(AtomModel::rb85(), grid, FloquetConfig::fixed(1));
    medium.delta_p = delta;
    let cell = CellModel { n_layers: 400, number_density: density, ..CellModel::default() };
    (medium, cell)
}

#[test]
fn weak_probe_at_rest_follows_beer_lambert() {
    let atom = AtomModel::rb85();
    let input = ProbeHarmonics::carrier_only(1e-3);
    for delta_mhz in [0.0, 2.0, -5.0, 12.0] {
        let delta = delta_mhz * MHZ;
        let density = 1.0 / (alpha_per_density(&atom, 0.0) * 0.075);
        let (medium, cell) = two_level_cell(VelocityGrid::single(0.0), density, delta);
        let t = carrier_transmission(&input, &medium, &cell).unwrap();
        let want = (-alpha_per_density(&atom, delta) * density * cell.length).exp();
        assert!((t - want).abs() <= 0.01 * want, "Δ={delta_mhz} MHz: {t} vs {want}");
    }
}

#[test]
fn weak_probe_in_vapour_follows_doppler_broadened_beer_lambert() {
    let atom = AtomModel::rb85();
    let sigma = thermal_sigma(293.0, atom.mass);
    let kp = atom.k_probe();
    // Fine independent quadrature of the Maxwell-Boltzmann average.
    let vs = linspace(-6.0 * sigma, 6.0 * sigma, 40001);
    let dv = vs[1] - vs[0];
    let voigt = |delta: f64| -> f64 {
        vs.iter()
            .map(|v| (-0.5 * (v / sigma).powi(2)).exp() * alpha_per_density(&atom, delta - kp * v))
            .sum::<f64>()
            * dv
            / (sigma * TWO_PI.sqrt())
    };
    let density = 1.0 / (voigt(0.0) * 0.075);
    let input = ProbeHarmonics::carrier_only(1e-3);
    let grid = RunConfig::default().ensemble.grid().build(&rydberg_mt::doppler::ThermalEnsemble::new(293.0, atom.mass).unwrap()).unwrap();
    for delta_mhz in [0.0, 150.0, -400.0] {
        let (medium, cell) = two_level_cell(grid.clone(), density, delta_mhz * MHZ);
        let t = carrier_transmission(&input, &medium, &cell).unwrap();
        let want = (-voigt(delta_mhz * MHZ) * density * cell.length).exp();
        assert!((t - want).abs() <= 0.01 * want, "Δ={delta_mhz} MHz: {t} vs {want}");
    }
}

#[test]
fn layer_refinement_converges() {
    let mut coarse = desk_receiver(201, 100);
    coarse.delta_p = 2.0 * MHZ;
    let mut fine = coarse.clone();
    fine.cell.n_layers = 200;
    for protocol in [Protocol::Conventional, Protocol::ModulationTransfer] {
        let a = coarse.transmission(protocol, true).unwrap();
        let b = fine.transmission(protocol, true).unwrap();
        assert!((a - b).abs() <= 1e-3, "{protocol:?}: {a} vs {b}");
    }
    let (a, b) = (coarse.signal(Protocol::ModulationTransfer).unwrap(), fine.signal(Protocol::ModulationTransfer).unwrap());
    assert!((a - b).abs() <= 1e-3 * a.abs(), "{a} vs {b}");
}

#[test]
fn unmodulated_limit_reproduces_conventional_carrier() {
    let mut rx = desk_receiver(41, 20);
    rx.sideband_ratio = 0.0;
    for dp in [0.0, 1.5, -4.0] {
        rx.delta_p = dp * MHZ;
        let mt = rx.exit_fields(Protocol::ModulationTransfer, true).unwrap();
        let conv = rx.exit_fields(Protocol::Conventional, true).unwrap();
        assert_eq!(mt.carrier, conv.carrier);
        assert_eq!(rx.signal(Protocol::ModulationTransfer).unwrap(), 0.0);
    }
}

/// Dropping sideband feedback barely moves the carrier. The sidebands
/// themselves then propagate without their own absorption, so the RMA gap
/// is first order in optical depth and vanishes for a thin medium.
#[test]
fn probe_linear_feedback_is_a_small_correction() {
    let gap = |scale: f64, dp: f64| -> (f64, f64) {
        let mut rx = desk_receiver(101, 50);
        rx.cell.number_density *= scale;
        rx.delta_p = dp * MHZ;
        let sc = (rx.transmission(Protocol::ModulationTransfer, true).unwrap(), rx.signal(Protocol::ModulationTransfer).unwrap());
        rx.feedback = SidebandFeedback::ProbeLinear;
        let pl = (rx.transmission(Protocol::ModulationTransfer, true).unwrap(), rx.signal(Protocol::ModulationTransfer).unwrap());
        ((sc.0 - pl.0).abs(), ((sc.1 - pl.1) / sc.1).abs())
    };
    for dp in [1.0, 2.0, 3.0] {
        let (dt, thick) = gap(1.0, dp);
        assert!(dt < 1e-3, "Δp={dp}: carrier transmission moved by {dt}");
        let (_, thin) = gap(0.1, dp);
        assert!(thin < 0.15 * thick && thin < 0.03, "Δp={dp}: RMA gap {thin} thin vs {thick} thick");
    }
}

#[test]
fn calibration_is_monotone_and_hits_target() {
    let mut last = f64::INFINITY;
    for target in [0.2, 0.37, 0.6, 0.9] {
        let mut cfg = RunConfig::default();
        cfg.ensemble.n_points = 41;
        cfg.cell.n_layers = 10;
        cfg.cell.target_transmission = target;
        let (mut rx, _) = cfg.receiver().unwrap();
        let density = rx.cell.number_density;
        assert!(density < last, "target {target}: {density} !< {last}");
        last = density;
        rx.delta_p = 0.0;
        rx.e_rf_applied = 0.0;
        let t = rx.transmission(Protocol::Conventional, false).unwrap();
        assert!((t - target).abs() < 1e-6, "{t} vs {target}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn medium_is_passive(
        dp in -15.0..15.0f64,
        ratio in 0.0..1.2f64,
        density in 1e14..2e16f64,
        e_rf in 0.0..1.0f64,
    ) {
        let mut rx = desk_receiver(21, 10);
        rx.delta_p = dp * MHZ;
        rx.sideband_ratio = ratio;
        rx.cell.number_density = density;
        rx.e_rf_applied = e_rf;
        let input = rx.input();
        for protocol in [Protocol::Conventional, Protocol::ModulationTransfer] {
            let out = rx.exit_fields(protocol, true).unwrap();
            prop_assert!(out.power_sum() <= input.power_sum() * (1.0 + 1e-12));
            prop_assert!(rx.signal(protocol).unwrap().is_finite());
        }
        prop_assert!(rx.signal(Protocol::ModulationTransfer).unwrap() >= 0.0);
    }
}
