//! Detection signals built on the propagated probe: the coupling on/off
//! transparency difference and the modulation-transfer beat amplitude,
//! plus sweeps, slope fits and the shot-noise sensitivity estimate.

use serde::{Deserialize, Serialize};

use crate::atom::{rabi_from_field, AtomModel};
use crate::constants::ELEMENTARY_CHARGE;
use crate::doppler::VelocityGrid;
use crate::error::{Result, SimError};
use crate::floquet::FloquetConfig;
use crate::liouville::C64;
use crate::propagation::{effective_rf_field, propagate, CellModel, Medium, ProbeHarmonics, SidebandFeedback};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    Conventional,
    ModulationTransfer,
}

impl Protocol {
    pub fn label(self) -> &'static str {
        match self {
            Protocol::Conventional => "conventional",
            Protocol::ModulationTransfer => "modulation-transfer",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepVariable {
    /// Δp in rad/s.
    ProbeDetuning,
    /// Applied RF amplitude in V/m.
    RfAmplitude,
}

/// Full physical context of one receiver operating point.
///
/// Field strengths are stored as what the experiment controls: the probe
/// input envelope, the unmodulated coupling Rabi frequency and the applied
/// RF amplitude. The perturbation factor is applied on the way in.
#[derive(Clone, Debug)]
pub struct Receiver {
    pub atom: AtomModel,
    pub cell: CellModel,
    pub grid: VelocityGrid,
    pub floquet: FloquetConfig,
    pub feedback: SidebandFeedback,
    /// Probe envelope ℰ_p(0) at the cell entrance (V/m).
    pub probe_envelope: f64,
    /// Coupling Rabi frequency with all power in the carrier (rad/s).
    pub coupling_rabi: f64,
    /// Sideband-to-carrier amplitude ratio of the phase-modulated coupling.
    pub sideband_ratio: f64,
    pub omega_mod: f64,
    pub delta_p: f64,
    pub delta_c: f64,
    pub delta_rf: f64,
    /// Applied RF amplitude (V/m).
    pub e_rf_applied: f64,
}

impl Receiver {
    /// RF Rabi frequency inside the cell (rad/s).
    pub fn rf_rabi(&self) -> Result<f64> {
        let inside = effective_rf_field(self.e_rf_applied, &self.cell)?;
        Ok(rabi_from_field(C64::new(inside, 0.0), self.atom.d43).re)
    }

    /// Coupling carrier and sideband Rabi frequencies under modulation, with
    /// the total power held fixed: `Ω₀² + 2Ω₁² = Ω_c²`, `Ω₁ = r Ω₀`.
    pub fn modulated_coupling(&self) -> (f64, f64) {
        let r = self.sideband_ratio;
        let carrier = self.coupling_rabi / (1.0 + 2.0 * r * r).sqrt();
        (carrier, r * carrier)
    }

    pub fn input(&self) -> ProbeHarmonics {
        ProbeHarmonics::carrier_only(self.probe_envelope)
    }

    /// Medium for the given protocol; `coupling_on = false` removes every
    /// coupling harmonic.
    pub fn medium(&self, protocol: Protocol, coupling_on: bool) -> Result<Medium> {
        let mut m = Medium::new(self.atom.clone(), self.grid.clone(), self.floquet);
        m.feedback = self.feedback;
        m.delta_p = self.delta_p;
        m.delta_c = self.delta_c;
        m.delta_rf = self.delta_rf;
        let rf = self.rf_rabi()?;
        if rf != 0.0 {
            m.rf.insert(0, C64::new(rf, 0.0));
        }
        if coupling_on && self.coupling_rabi != 0.0 {
            match protocol {
                Protocol::Conventional => {
                    m.coupling.insert(0, C64::new(self.coupling_rabi, 0.0));
                }
                Protocol::ModulationTransfer => {
                    let (c0, c1) = self.modulated_coupling();
                    m.coupling.insert(0, C64::new(c0, 0.0));
                    if c1 != 0.0 {
                        m.coupling.insert(-1, C64::new(-c1, 0.0));
                        m.coupling.insert(1, C64::new(c1, 0.0));
                        m.omega_mod = self.omega_mod;
                    }
                }
            }
        }
        Ok(m)
    }

    /// Exit probe harmonics for one protocol state.
    pub fn exit_fields(&self, protocol: Protocol, coupling_on: bool) -> Result<ProbeHarmonics> {
        propagate(&self.input(), &self.medium(protocol, coupling_on)?, &self.cell)
    }

    /// Carrier transmission `|ℰ₀'|²/|ℰ_p|²`.
    pub fn transmission(&self, protocol: Protocol, coupling_on: bool) -> Result<f64> {
        let out = self.exit_fields(protocol, coupling_on)?;
        Ok(out.carrier.norm_sqr() / self.probe_envelope.powi(2))
    }

    pub fn signal(&self, protocol: Protocol) -> Result<f64> {
        match protocol {
            Protocol::Conventional => conventional_signal(self),
            Protocol::ModulationTransfer => rma_signal(self),
        }
    }

    /// Copy with the swept variable set to `x`.
    pub fn at(&self, variable: SweepVariable, x: f64) -> Self {
        let mut r = self.clone();
        match variable {
            SweepVariable::ProbeDetuning => r.delta_p = x,
            SweepVariable::RfAmplitude => r.e_rf_applied = x,
        }
        r
    }
}

/// Transparency with the coupling on minus transparency with it off.
pub fn conventional_signal(rx: &Receiver) -> Result<f64> {
    let on = rx.transmission(Protocol::Conventional, true)?;
    let off = rx.transmission(Protocol::Conventional, false)?;
    Ok(on - off)
}

/// Relative modulation amplitude of the probe intensity beat at ω_mod.
pub fn rma_signal(rx: &Receiver) -> Result<f64> {
    let out = rx.exit_fields(Protocol::ModulationTransfer, true)?;
    Ok(rma_from_fields(&out, C64::new(rx.probe_envelope, 0.0)))
}

/// `2 |ℰ₋₁ ℰ₀* + ℰ₀ ℰ₊₁*| / |ℰ_p|²`
pub fn rma_from_fields(exit: &ProbeHarmonics, input: C64) -> f64 {
    let beat = exit.minus * exit.carrier.conj() + exit.carrier * exit.plus.conj();
    2.0 * beat.norm() / input.norm_sqr()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    pub protocol: Protocol,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.grid.len() < 2 {
            return Err(SimError::InvalidInput("a sweep needs at least 2 points".into()));
        }
        if self.grid.iter().any(|x| !x.is_finite()) {
            return Err(SimError::InvalidInput("sweep grid values must be finite".into()));
        }
        let up = self.grid.windows(2).all(|w| w[1] > w[0]);
        let down = self.grid.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(SimError::InvalidInput("sweep grid must be strictly monotone".into()));
        }
        Ok(())
    }
}

/// Evenly spaced points from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..n).map(|i| start + (stop - start) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Operating point held fixed while a trace was swept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub protocol: Protocol,
    pub variable: SweepVariable,
    pub delta_p: f64,
    pub delta_rf: f64,
    pub e_rf_applied: f64,
    pub omega_mod: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SignalTrace {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub meta: TraceMeta,
}

impl SignalTrace {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Evaluates the protocol signal at each grid point. Points may be computed
/// in parallel; the trace is always in grid order.
pub fn sweep(rx: &Receiver, spec: &SweepSpec) -> Result<SignalTrace> {
    spec.validate()?;
    let point = |(index, &x): (usize, &f64)| {
        rx.at(spec.variable, x)
            .signal(spec.protocol)
            .map_err(|e| SimError::AtPoint { index, x, source: Box::new(e) })
    };

    #[cfg(feature = "parallel")]
    let y: Vec<Result<f64>> = {
        use rayon::prelude::*;
        spec.grid.par_iter().enumerate().map(point).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let y: Vec<Result<f64>> = spec.grid.iter().enumerate().map(point).collect();

    let y = y.into_iter().collect::<Result<Vec<f64>>>()?;
    Ok(SignalTrace {
        x: spec.grid.clone(),
        y,
        meta: TraceMeta {
            protocol: spec.protocol,
            variable: spec.variable,
            delta_p: rx.delta_p,
            delta_rf: rx.delta_rf,
            e_rf_applied: rx.e_rf_applied,
            omega_mod: rx.omega_mod,
        },
    })
}

pub const DEFAULT_FIT_DEGREE: usize = 7;

#[derive(Clone, Debug, PartialEq)]
pub struct SlopeCurve {
    pub x: Vec<f64>,
    /// |dy/dx| of the fitted polynomial at each x.
    pub slope: Vec<f64>,
    pub degree: usize,
    /// Root-mean-square fit residual.
    pub residual: f64,
}

/// Legendre values and derivatives `P_k(t), P_k'(t)` for k ≤ degree.
fn legendre(t: f64, degree: usize) -> (Vec<f64>, Vec<f64>) {
    let mut p = vec![0.0; degree + 1];
    let mut dp = vec![0.0; degree + 1];
    p[0] = 1.0;
    if degree >= 1 {
        p[1] = t;
        dp[1] = 1.0;
    }
    for k in 1..degree {
        let kf = k as f64;
        p[k + 1] = ((2.0 * kf + 1.0) * t * p[k] - kf * p[k - 1]) / (kf + 1.0);
        dp[k + 1] = dp[k - 1] + (2.0 * kf + 1.0) * p[k];
    }
    (p, dp)
}

/// Least-squares polynomial fit of `y(x)` and its derivative magnitude.
///
/// The fit is done in a Legendre basis on x mapped to [−1, 1] and solved by
/// QR, so degree 7 stays well conditioned on any scan range.
pub fn fit_slope(x: &[f64], y: &[f64], degree: usize) -> Result<SlopeCurve> {
    if x.len() != y.len() {
        return Err(SimError::InvalidInput(format!("x has {} points but y has {}", x.len(), y.len())));
    }
    if degree == 0 {
        return Err(SimError::InvalidInput("fit degree must be >= 1".into()));
    }
    if x.len() < degree + 2 {
        return Err(SimError::IllConditioned { degree, points: x.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(SimError::InvalidInput("fit data must be finite".into()));
    }
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(SimError::IllConditioned { degree, points: x.len() });
    }
    let scale = 2.0 / (hi - lo);
    let map = |v: f64| (v - lo) * scale - 1.0;

    let n = x.len();
    let a = nalgebra::DMatrix::from_fn(n, degree + 1, |i, k| legendre(map(x[i]), degree).0[k]);
    let b = nalgebra::DVector::from_column_slice(y);
    let qr = a.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..=degree).map(|k| r[(k, k)].abs()).collect();
    let dmax = diag.iter().copied().fold(0.0, f64::max);
    if diag.iter().any(|&d| d <= 1e-12 * dmax) {
        return Err(SimError::IllConditioned { degree, points: n });
    }
    let qtb = qr.q().transpose() * &b;
    let coef = r
        .solve_upper_triangular(&qtb)
        .ok_or(SimError::IllConditioned { degree, points: n })?;
    let fitted = &a * &coef;
    let residual = ((fitted - &b).norm_squared() / n as f64).sqrt();
    let slope = x
        .iter()
        .map(|&xi| {
            let (_, dp) = legendre(map(xi), degree);
            (dp.iter().zip(coef.iter()).map(|(d, c)| d * c).sum::<f64>() * scale).abs()
        })
        .collect();
    Ok(SlopeCurve { x: x.to_vec(), slope, degree, residual })
}

/// Shot-noise-limited field sensitivity `√(2e) / (slope · √(P η))`.
///
/// Units follow the inputs: slope per V/m, P in W, η in V/W.
pub fn sensitivity(slope: f64, power: f64, eta: f64) -> Result<f64> {
    for (name, v) in [("slope", slope), ("power", power), ("eta", eta)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(SimError::InvalidInput(format!("{name} must be > 0, got {v}")));
        }
    }
    Ok((2.0 * ELEMENTARY_CHARGE).sqrt() / (slope * (power * eta).sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtremumKind {
    Maximum,
    Minimum,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Extremum {
    pub kind: ExtremumKind,
    pub index: usize,
    pub position: f64,
    pub value: f64,
    /// Height above (or depth below) the higher of the two surrounding bases.
    pub prominence: f64,
    /// Full width at half prominence, linearly interpolated.
    pub width: f64,
}

pub const DEFAULT_PROMINENCE_FRACTION: f64 = 0.05;

/// Interior local extrema whose prominence is at least `min_fraction` of the
/// trace range, in order of position.
pub fn spectrum_features(x: &[f64], y: &[f64], min_fraction: f64) -> Vec<Extremum> {
    let n = x.len().min(y.len());
    if n < 5 {
        return Vec::new();
    }
    let (x, y) = (&x[..n], &y[..n]);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let range = hi - lo;
    if !(range > 0.0) {
        return Vec::new();
    }
    let mut out = Vec::new();
    for (kind, sign) in [(ExtremumKind::Maximum, 1.0), (ExtremumKind::Minimum, -1.0)] {
        let s: Vec<f64> = y.iter().map(|v| sign * v).collect();
        let mut i = 1;
        while i < n - 1 {
            // Treat a flat top as one peak located at its centre.
            let mut j = i;
            while j + 1 < n && s[j + 1] == s[i] {
                j += 1;
            }
            if j < n - 1 && s[i] > s[i - 1] && s[i] > s[j + 1] {
                let peak = (i + j) / 2;
                if let Some(e) = measure(x, &s, peak, i, j, range * min_fraction) {
                    out.push(Extremum { kind, value: y[peak], ..e });
                }
            }
            i = j + 1;
        }
    }
    out.sort_by(|a, b| a.index.cmp(&b.index));
    out
}

fn measure(x: &[f64], s: &[f64], peak: usize, first: usize, last: usize, threshold: f64) -> Option<Extremum> {
    let top = s[peak];
    let mut left_base = top;
    let mut left_end = 0;
    for k in (0..first).rev() {
        if s[k] > top {
            left_end = k;
            break;
        }
        left_base = left_base.min(s[k]);
    }
    let mut right_base = top;
    let mut right_end = s.len() - 1;
    for (k, &v) in s.iter().enumerate().skip(last + 1) {
        if v > top {
            right_end = k;
            break;
        }
        right_base = right_base.min(v);
    }
    let prominence = top - left_base.max(right_base);
    if prominence < threshold || prominence <= 0.0 {
        return None;
    }
    let half = top - 0.5 * prominence;
    let cross = |a: usize, b: usize| x[a] + (half - s[a]) / (s[b] - s[a]) * (x[b] - x[a]);
    let mut xl = x[left_end];
    for k in (left_end..first).rev() {
        if s[k] <= half {
            xl = cross(k, k + 1);
            break;
        }
    }
    let mut xr = x[right_end];
    for k in last + 1..=right_end {
        if s[k] <= half {
            xr = cross(k, k - 1);
            break;
        }
    }
    Some(Extremum {
        kind: ExtremumKind::Maximum,
        index: peak,
        position: x[peak],
        value: 0.0,
        prominence,
        width: (xr - xl).abs(),
    })
}
