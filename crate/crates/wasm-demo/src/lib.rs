//! Browser front end: a reduced-size receiver (coarser velocity grid, fewer
//! layers) so a spectrum computes in about a second on one thread.

use rydberg_mt::config::RunConfig;
use rydberg_mt::constants::TWO_PI;
use rydberg_mt::floquet::{assemble_blocks, solve_continued_fraction, FloquetConfig};
use rydberg_mt::atom::{build_dissipator, build_hamiltonian, DriveConfig};
use rydberg_mt::signals::{linspace, Protocol, Receiver};
use rydberg_mt::SimError;
use wasm_bindgen::prelude::*;

fn js_err(e: SimError) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Calibrated receiver at the reference operating point.
#[wasm_bindgen]
pub struct Demo {
    rx: Receiver,
}

#[wasm_bindgen]
impl Demo {
    /// `velocity_points` must be odd; `layers` ≥ 1.
    #[wasm_bindgen(constructor)]
    pub fn new(velocity_points: usize, layers: usize) -> Result<Demo, JsValue> {
        let mut cfg = RunConfig::default();
        cfg.ensemble.n_points = velocity_points;
        cfg.cell.n_layers = layers;
        cfg.validate().map_err(js_err)?;
        let (rx, _) = cfg.receiver().map_err(js_err)?;
        Ok(Demo { rx })
    }

    pub fn number_density(&self) -> f64 {
        self.rx.cell.number_density
    }

    /// Conventional and RMA signals versus probe detuning. Returns
    /// `[x₀…, conventional…, rma…]` with x in MHz.
    pub fn probe_spectrum(
        &self,
        e_rf: f64,
        delta_rf_mhz: f64,
        omega_mod_mhz: f64,
        span_mhz: f64,
        points: usize,
    ) -> Result<Vec<f64>, JsValue> {
        let mut rx = self.rx.clone();
        rx.e_rf_applied = e_rf;
        rx.delta_rf = TWO_PI * delta_rf_mhz * 1e6;
        rx.omega_mod = TWO_PI * omega_mod_mhz * 1e6;
        let xs = linspace(-span_mhz, span_mhz, points);
        scan(&rx, &xs, |r, x| r.delta_p = TWO_PI * x * 1e6)
    }

    /// Both signals versus applied RF field (V/m). Returns
    /// `[E…, conventional…, rma…]`.
    pub fn field_response(
        &self,
        delta_p_mhz: f64,
        delta_rf_mhz: f64,
        e_max: f64,
        points: usize,
    ) -> Result<Vec<f64>, JsValue> {
        let mut rx = self.rx.clone();
        rx.delta_p = TWO_PI * delta_p_mhz * 1e6;
        rx.delta_rf = TWO_PI * delta_rf_mhz * 1e6;
        let xs = linspace(0.0, e_max, points);
        scan(&rx, &xs, |r, x| r.e_rf_applied = x)
    }
}

fn scan(rx: &Receiver, xs: &[f64], set: impl Fn(&mut Receiver, f64)) -> Result<Vec<f64>, JsValue> {
    let mut conv = Vec::with_capacity(xs.len());
    let mut rma = Vec::with_capacity(xs.len());
    for &x in xs {
        let mut r = rx.clone();
        set(&mut r, x);
        conv.push(r.signal(Protocol::Conventional).map_err(js_err)?);
        rma.push(r.signal(Protocol::ModulationTransfer).map_err(js_err)?);
    }
    Ok([xs.to_vec(), conv, rma].concat())
}

/// Single stationary atom: |ρ₂₁⁽ⁿ⁾| for n = −1, 0, +1 versus probe detuning
/// under phase-modulated coupling. Rabi frequencies in MHz (cycles).
/// Returns `[x…, |ρ⁻¹|…, |ρ⁰|…, |ρ⁺¹|…]`.
#[wasm_bindgen]
pub fn atom_harmonics(
    probe_mhz: f64,
    coupling_mhz: f64,
    rf_mhz: f64,
    sideband_ratio: f64,
    omega_mod_mhz: f64,
    span_mhz: f64,
    points: usize,
) -> Result<Vec<f64>, JsValue> {
    let atom = rydberg_mt::atom::AtomModel::rb85();
    let d = build_dissipator(&atom);
    let w = TWO_PI * 1e6;
    let c0 = coupling_mhz / (1.0 + 2.0 * sideband_ratio * sideband_ratio).sqrt();
    let xs = linspace(-span_mhz, span_mhz, points);
    let mut out: [Vec<f64>; 3] = std::array::from_fn(|_| Vec::with_capacity(points));
    for &x in &xs {
        let mut drive = DriveConfig::carriers(probe_mhz * w, 0.0, rf_mhz * w)
            .with_phase_modulated_coupling(c0 * w, sideband_ratio * c0 * w, omega_mod_mhz * w);
        drive.delta_p = x * w;
        let h = build_hamiltonian(&drive, 0.0, &atom, 4).map_err(js_err)?;
        let rho = solve_continued_fraction(&assemble_blocks(&h, &d), drive.omega_mod, &FloquetConfig::default())
            .map_err(js_err)?;
        for (k, n) in [-1, 0, 1].into_iter().enumerate() {
            out[k].push(rho.rho21(n).norm());
        }
    }
    Ok([xs, out.concat()].concat())
}
