mod common;

use common::*;
use rydberg_mt::atom::{build_dissipator, build_hamiltonian, steady_state_static, AtomModel, DriveConfig};
use rydberg_mt::floquet::{assemble_blocks, solve_continued_fraction, FloquetConfig};
use rydberg_mt::signals::{linspace, spectrum_features, ExtremumKind, Protocol, Receiver};

fn single_atom(drive: &DriveConfig, atom: &AtomModel) -> rydberg_mt::atom::DensityMatrix {
    let h = build_hamiltonian(drive, 0.0, atom, 4).unwrap();
    steady_state_static(&h.carrier(), &build_dissipator(atom)).unwrap()
}

#[test]
fn two_level_limit_matches_closed_form() {
    let atom = AtomModel::rb85();
    let d = build_dissipator(&atom);
    for omega in [0.05 * MHZ, 2.8 * MHZ, 12.0 * MHZ] {
        for delta in linspace(-30.0 * MHZ, 30.0 * MHZ, 20) {
            let mut drive = DriveConfig::carriers(omega, 0.0, 0.0);
            drive.delta_p = delta;
            let want = two_level_rho21(omega, delta, atom.gamma2, atom.gamma_transit);
            let h = build_hamiltonian(&drive, 0.0, &atom, 4).unwrap();
            let st = steady_state_static(&h.carrier(), &d).unwrap();
            assert!(rel(st.rho21(), want) < 1e-9, "static Ω={omega} Δ={delta}: {}", rel(st.rho21(), want));
            let cf = solve_continued_fraction(&assemble_blocks(&h, &d), 0.0, &FloquetConfig::fixed(3)).unwrap();
            assert!(rel(cf.rho21(0), want) < 1e-9);
        }
    }
}

#[test]
fn ladder_absorption_is_even_in_probe_detuning() {
    let atom = AtomModel::rb85();
    for rf in [0.0, 5.0 * MHZ] {
        for dp in linspace(0.5 * MHZ, 20.0 * MHZ, 9) {
            let mut plus = DriveConfig::carriers(2.8 * MHZ, 3.0 * MHZ, rf);
            plus.delta_p = dp;
            let mut minus = plus.clone();
            minus.delta_p = -dp;
            let (a, b) = (single_atom(&plus, &atom).rho21(), single_atom(&minus, &atom).rho21());
            assert!((a.im - b.im).abs() <= 1e-9 * a.im.abs(), "Δp={dp}: {} vs {}", a.im, b.im);
            assert!((a.re + b.re).abs() <= 1e-9 * a.norm());
        }
    }
}

fn conventional_spectrum(rx: &Receiver, xs_mhz: &[f64]) -> Vec<f64> {
    xs_mhz
        .iter()
        .map(|x| {
            let mut r = rx.clone();
            r.delta_p = x * MHZ;
            r.signal(Protocol::Conventional).unwrap()
        })
        .collect()
}

#[test]
fn conventional_spectrum_is_symmetric() {
    let xs = linspace(-12.0, 12.0, 25);
    let at_rest = conventional_spectrum(&resting_receiver(20, 2e13), &xs);
    let thermal = conventional_spectrum(&desk_receiver(101, 10), &xs);
    for y in [at_rest, thermal] {
        let scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..xs.len() {
            let j = xs.len() - 1 - i;
            assert!((y[i] - y[j]).abs() <= 1e-6 * scale, "{} vs {}", y[i], y[j]);
        }
    }
}

#[test]
fn eit_transparency_peaks_on_resonance() {
    let mut rx = resting_receiver(20, 2e13);
    rx.e_rf_applied = 0.0;
    let xs = linspace(-10.0, 10.0, 201);
    let y = conventional_spectrum(&rx, &xs);
    let top = y.iter().enumerate().fold(0, |b, (i, v)| if *v > y[b] { i } else { b });
    assert_eq!(top, 100, "maximum at {} MHz", xs[top]);
}

/// With the RF dressing the Rydberg pair, each two-photon resonance moves
/// to Δp = ±Ω_RF/2. Depending on Ω_RF/Γ₂ it shows up as a transparency
/// peak or as a dispersive peak/dip pair, so the outermost resolved
/// features are taken as the split lines.
#[test]
fn autler_townes_separation_tracks_rf_rabi() {
    for target_mhz in [15.0, 30.0, 60.0] {
        let mut rx = resting_receiver(10, 2e13);
        rx.probe_envelope *= 0.05;
        rx.e_rf_applied *= target_mhz * MHZ / rx.rf_rabi().unwrap();
        let omega_rf = rx.rf_rabi().unwrap() / MHZ;
        let xs = linspace(-1.5 * omega_rf, 1.5 * omega_rf, 601);
        let y = conventional_spectrum(&rx, &xs);
        let features = spectrum_features(&xs, &y, 0.05);
        let lo = features.iter().map(|e| e.position).fold(f64::INFINITY, f64::min);
        let hi = features.iter().map(|e| e.position).fold(f64::NEG_INFINITY, f64::max);
        let sep = hi - lo;
        assert!((sep - omega_rf).abs() <= 0.1 * omega_rf, "separation {sep} MHz, Ω_RF {omega_rf} MHz");
    }
}

fn eit_width(rx: &Receiver) -> f64 {
    let mut rx = rx.clone();
    rx.e_rf_applied = 0.0;
    let xs = linspace(-15.0, 15.0, 121);
    let y = conventional_spectrum(&rx, &xs);
    spectrum_features(&xs, &y, 0.05)
        .into_iter()
        .find(|e| e.kind == ExtremumKind::Maximum && e.position.abs() < 0.5)
        .expect("EIT peak at line centre")
        .width
}

#[test]
fn doppler_averaging_broadens_eit() {
    let at_rest = eit_width(&resting_receiver(10, 2e13));
    let thermal = eit_width(&desk_receiver(201, 10));
    assert!(thermal > at_rest, "thermal {thermal} MHz vs at rest {at_rest} MHz");
}
