//! Brute-force check of the Floquet solution: integrate the master equation
//! in time until transients die out, then Fourier-project the last
//! modulation period.

use nalgebra::{DMatrix, Schur};

use crate::atom::HamiltonianHarmonics;
use crate::error::{Result, SimError};
use crate::floquet::HarmonicDensityMatrix;
use crate::liouville::{Mat4, Superoperator, C64, LDIM};

/// Integrator tolerances for [`time_domain_oracle`].
#[derive(Clone, Copy, Debug)]
pub struct OdeTolerance {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
}

impl Default for OdeTolerance {
    fn default() -> Self {
        Self { rtol: 1e-11, atol: 1e-14, max_steps: 20_000_000 }
    }
}

#[derive(Clone, Debug)]
pub struct TimeDomainResult {
    pub harmonics: HarmonicDensityMatrix,
    /// Largest |tr ρ(t) − 1| over every accepted step.
    pub max_trace_error: f64,
    pub steps: usize,
}

/// Slowest nonzero relaxation rate of `−i[H₀,·] + D`, i.e. the smallest
/// |Re λ| among the nonzero eigenvalues.
pub fn relaxation_gap(h: &HamiltonianHarmonics, dissipator: &Superoperator) -> f64 {
    let l0 = Superoperator::commutator(&h.carrier()).0 + dissipator.0;
    let dense = DMatrix::from_fn(LDIM, LDIM, |i, j| l0[(i, j)]);
    let eig = Schur::new(dense).eigenvalues().expect("complex Schur always yields eigenvalues");
    let scale = eig.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
    eig.iter()
        .filter(|z| z.norm() > 1e-10 * scale)
        .map(|z| -z.re)
        .fold(f64::INFINITY, f64::min)
}

/// Integrates `dρ/dt = −i[H(t), ρ] + D[ρ]` from the ground state for
/// `duration` seconds and projects the final period onto `n_harmonics`
/// Fourier components using `sample_count` equally spaced samples.
pub fn time_domain_oracle(
    h: &HamiltonianHarmonics,
    dissipator: &Superoperator,
    omega_mod: f64,
    duration: f64,
    sample_count: usize,
    n_harmonics: usize,
    tol: OdeTolerance,
) -> Result<TimeDomainResult> {
    let gap = relaxation_gap(h, dissipator);
    if !(duration * gap >= 20.0) {
        return Err(SimError::InvalidInput(format!(
            "duration {duration:.3e} s is shorter than 20 relaxation times ({:.3e} s)",
            20.0 / gap
        )));
    }
    let modulated = h.max_index() > 0;
    if modulated && !(omega_mod > 0.0) {
        return Err(SimError::InvalidInput("omega_mod must be > 0 for a modulated drive".into()));
    }
    if modulated && sample_count < 2 * n_harmonics + 1 {
        return Err(SimError::InvalidInput(format!(
            "{sample_count} samples cannot resolve {n_harmonics} harmonics"
        )));
    }

    let mut rho = Mat4::zeros();
    rho[(0, 0)] = C64::new(1.0, 0.0);
    let mut integrator = Dopri5::new(h, dissipator, omega_mod, tol);

    if !modulated {
        integrator.advance(&mut rho, 0.0, duration)?;
        let mut out = HarmonicDensityMatrix::zeros(0);
        out.set(0, rho);
        return Ok(TimeDomainResult {
            harmonics: out,
            max_trace_error: integrator.max_trace_error,
            steps: integrator.steps,
        });
    }

    let period = std::f64::consts::TAU / omega_mod;
    let t_start = duration - period;
    let dt = period / sample_count as f64;
    integrator.advance(&mut rho, 0.0, t_start)?;
    let mut out = HarmonicDensityMatrix::zeros(n_harmonics);
    let mut t = t_start;
    let scale = C64::new(1.0 / sample_count as f64, 0.0);
    for j in 0..sample_count {
        let tj = t_start + j as f64 * dt;
        integrator.advance(&mut rho, t, tj)?;
        t = tj;
        for n in -(n_harmonics as i32)..=n_harmonics as i32 {
            let phase = C64::from_polar(1.0, n as f64 * omega_mod * tj);
            let cur = out.get(n);
            out.set(n, cur + rho * (phase * scale));
        }
    }
    Ok(TimeDomainResult {
        harmonics: out,
        max_trace_error: integrator.max_trace_error,
        steps: integrator.steps,
    })
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

struct Dopri5<'a> {
    h: &'a HamiltonianHarmonics,
    dissipator: &'a Superoperator,
    omega_mod: f64,
    tol: OdeTolerance,
    step: Option<f64>,
    steps: usize,
    max_trace_error: f64,
}

impl<'a> Dopri5<'a> {
    fn new(h: &'a HamiltonianHarmonics, dissipator: &'a Superoperator, omega_mod: f64, tol: OdeTolerance) -> Self {
        Self { h, dissipator, omega_mod, tol, step: None, steps: 0, max_trace_error: 0.0 }
    }

    fn rhs(&self, t: f64, rho: &Mat4) -> Mat4 {
        let ht = self.h.at_phase(self.omega_mod * t);
        (ht * rho - rho * ht) * C64::new(0.0, -1.0) + self.dissipator.apply(rho)
    }

    fn advance(&mut self, rho: &mut Mat4, mut t: f64, t_end: f64) -> Result<()> {
        let span = t_end - t;
        if span <= 0.0 {
            return Ok(());
        }
        let mut h = self.step.unwrap_or(span.min(1e-10));
        while t < t_end {
            if self.steps >= self.tol.max_steps {
                return Err(SimError::StepFailure { t, reason: "step budget exhausted".into() });
            }
            let last = t + h >= t_end;
            let hh = if last { t_end - t } else { h };
            let mut k: [Mat4; 7] = [Mat4::zeros(); 7];
            for s in 0..7 {
                let mut y = *rho;
                for (j, kj) in k.iter().enumerate().take(s) {
                    if A[s][j] != 0.0 {
                        y += kj * C64::new(hh * A[s][j], 0.0);
                    }
                }
                k[s] = self.rhs(t + C[s] * hh, &y);
            }
            let mut y5 = *rho;
            let mut y4 = *rho;
            for s in 0..7 {
                y5 += k[s] * C64::new(hh * B5[s], 0.0);
                y4 += k[s] * C64::new(hh * B4[s], 0.0);
            }
            let mut err = 0.0_f64;
            for ((a, b), y0) in y5.iter().zip(y4.iter()).zip(rho.iter()) {
                let sc = self.tol.atol + self.tol.rtol * a.norm().max(y0.norm());
                err = err.max((a - b).norm() / sc);
            }
            if !err.is_finite() {
                return Err(SimError::StepFailure { t, reason: "non-finite state".into() });
            }
            if err <= 1.0 {
                t = if last { t_end } else { t + hh };
                *rho = y5;
                self.steps += 1;
                let tr = (rho.trace() - C64::new(1.0, 0.0)).norm();
                self.max_trace_error = self.max_trace_error.max(tr);
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            if !(err <= 1.0 && last) {
                h = hh * factor;
            }
            if h < 1e-22 {
                return Err(SimError::StepFailure { t, reason: format!("step size underflow ({h:.2e} s)") });
            }
        }
        self.step = Some(h);
        Ok(())
    }
}
