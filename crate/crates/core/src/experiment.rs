//! Named experiments reproducing the simulated figure panels, and their
//! CSV / JSON / SVG artifacts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::config::{DensitySource, RunConfig};
use crate::constants::TWO_PI;
use crate::error::{Result, SimError};
use crate::propagation::effective_rf_field;
use crate::signals::{fit_slope, linspace, sweep, Protocol, Receiver, SignalTrace, SweepSpec, SweepVariable};
use crate::svg::{line_plot, Series};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Fig3Conventional,
    Fig3Rma,
    Fig4,
    Fig5,
    Custom,
}

impl Preset {
    pub const ALL: [Preset; 5] = [Preset::Fig3Conventional, Preset::Fig3Rma, Preset::Fig4, Preset::Fig5, Preset::Custom];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig3Conventional => "fig3-conventional",
            Preset::Fig3Rma => "fig3-rma",
            Preset::Fig4 => "fig4",
            Preset::Fig5 => "fig5",
            Preset::Custom => "custom",
        }
    }
}

impl FromStr for Preset {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
            SimError::InvalidInput(format!("unknown preset `{s}` (expected one of {})", names.join(", ")))
        })
    }
}

/// One output curve. `x_config` holds the swept values in config units
/// (Hz for detunings, V/m for fields) exactly as gridded, so CSV output
/// carries no unit-conversion round-off.
#[derive(Clone, Debug)]
pub struct Curve {
    pub trace: SignalTrace,
    pub x_config: Vec<f64>,
    /// Plotted / written values: the signal, or its slope for field scans
    /// of the slope preset.
    pub value: Vec<f64>,
    pub fit_residual: Option<f64>,
    /// Operating point in config units, as written to the CSV.
    pub delta_p_hz: f64,
    pub delta_rf_hz: f64,
    pub omega_mod_hz: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CurveDiagnostics {
    pub protocol: Protocol,
    pub delta_p_hz: f64,
    pub delta_rf_hz: f64,
    pub points: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit_residual: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunMetadata {
    pub preset: Preset,
    /// Resolved configuration including the density actually used; loading
    /// it reproduces the run.
    pub config: String,
    pub density_source: DensitySource,
    pub number_density: f64,
    pub e_rf_applied: f64,
    pub e_rf_internal: f64,
    pub probe_rabi_hz: f64,
    pub coupling_rabi_hz: f64,
    pub rf_rabi_hz: f64,
    pub velocity_nodes: usize,
    pub floquet_n_max: usize,
    pub curves: Vec<CurveDiagnostics>,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug)]
pub struct Experiment {
    pub preset: Preset,
    pub curves: Vec<Curve>,
    pub metadata: RunMetadata,
}

fn hz_grid(lo: f64, hi: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let hz = linspace(lo, hi, n);
    let rad = hz.iter().map(|v| TWO_PI * v).collect();
    (hz, rad)
}

struct Point {
    delta_p_hz: f64,
    delta_rf_hz: f64,
}

fn run_sweep(
    cfg: &RunConfig,
    rx: &Receiver,
    at: Point,
    variable: SweepVariable,
    protocol: Protocol,
    x_config: Vec<f64>,
    grid: Vec<f64>,
) -> Result<Curve> {
    let mut r = rx.clone();
    r.delta_p = TWO_PI * at.delta_p_hz;
    r.delta_rf = TWO_PI * at.delta_rf_hz;
    let trace = sweep(&r, &SweepSpec { variable, grid, protocol })?;
    let value = trace.y.clone();
    let omega_mod_hz = match protocol {
        Protocol::Conventional => 0.0,
        Protocol::ModulationTransfer => cfg.drive.omega_mod_hz,
    };
    Ok(Curve {
        trace,
        x_config,
        value,
        fit_residual: None,
        delta_p_hz: at.delta_p_hz,
        delta_rf_hz: at.delta_rf_hz,
        omega_mod_hz,
    })
}

/// Field scans for each RF detuning: conventional at its probe detuning,
/// modulation transfer at its own.
fn field_family(cfg: &RunConfig, rx: &Receiver) -> Result<Vec<Curve>> {
    let s = &cfg.sweep;
    let mut curves = Vec::new();
    for protocol in [Protocol::Conventional, Protocol::ModulationTransfer] {
        let dp_hz = match protocol {
            Protocol::Conventional => s.conventional_delta_p_hz,
            Protocol::ModulationTransfer => s.modulation_transfer_delta_p_hz,
        };
        for &drf_hz in &s.delta_rf_family_hz {
            let e = s.e_rf_grid();
            let at = Point { delta_p_hz: dp_hz, delta_rf_hz: drf_hz };
            curves.push(run_sweep(cfg, rx, at, SweepVariable::RfAmplitude, protocol, e.clone(), e)?);
        }
    }
    Ok(curves)
}

fn here(cfg: &RunConfig) -> Point {
    Point { delta_p_hz: cfg.drive.delta_p_hz, delta_rf_hz: cfg.drive.delta_rf_hz }
}

pub fn run_experiment(preset: Preset, cfg: &RunConfig) -> Result<Experiment> {
    cfg.validate()?;
    let start = Instant::now();
    let (rx, density_source) = cfg.receiver()?;
    let s = &cfg.sweep;
    let curves = match preset {
        Preset::Fig3Conventional | Preset::Fig3Rma => {
            let protocol = if preset == Preset::Fig3Rma { Protocol::ModulationTransfer } else { Protocol::Conventional };
            let (hz, rad) = hz_grid(s.delta_p_min_hz, s.delta_p_max_hz, s.delta_p_points);
            vec![run_sweep(cfg, &rx, here(cfg), SweepVariable::ProbeDetuning, protocol, hz, rad)?]
        }
        Preset::Fig4 => field_family(cfg, &rx)?,
        Preset::Fig5 => {
            let mut curves = field_family(cfg, &rx)?;
            for c in &mut curves {
                let fit = fit_slope(&c.trace.x, &c.trace.y, s.fit_degree)?;
                c.value = fit.slope;
                c.fit_residual = Some(fit.residual);
            }
            curves
        }
        Preset::Custom => {
            let (x_config, grid) = match s.variable {
                SweepVariable::ProbeDetuning => hz_grid(s.delta_p_min_hz, s.delta_p_max_hz, s.delta_p_points),
                SweepVariable::RfAmplitude => (s.e_rf_grid(), s.e_rf_grid()),
            };
            vec![run_sweep(cfg, &rx, here(cfg), s.variable, s.protocol, x_config, grid)?]
        }
    };

    let mut resolved = cfg.clone();
    resolved.cell.number_density = Some(rx.cell.number_density);
    resolved.cell.vapor_density = None;
    let hbar_rabi = |e: f64, d: f64| e * d / crate::constants::HBAR / TWO_PI;
    let metadata = RunMetadata {
        preset,
        config: resolved.to_toml(),
        density_source,
        number_density: rx.cell.number_density,
        e_rf_applied: rx.e_rf_applied,
        e_rf_internal: effective_rf_field(rx.e_rf_applied, &rx.cell)?,
        probe_rabi_hz: hbar_rabi(2.0 * rx.probe_envelope, rx.atom.d21),
        coupling_rabi_hz: rx.coupling_rabi / TWO_PI,
        rf_rabi_hz: rx.rf_rabi()? / TWO_PI,
        velocity_nodes: rx.grid.len(),
        floquet_n_max: rx.floquet.n_max,
        curves: curves
            .iter()
            .map(|c| CurveDiagnostics {
                protocol: c.trace.meta.protocol,
                delta_p_hz: c.delta_p_hz,
                delta_rf_hz: c.delta_rf_hz,
                points: c.trace.len(),
                fit_residual: c.fit_residual,
            })
            .collect(),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok(Experiment { preset, curves, metadata })
}

pub const CSV_HEADER: &str = "x,value,protocol,delta_p_hz,delta_rf_hz,e_rf_v_per_m,omega_mod_hz";

/// CSV rows for every curve, in curve then grid order. Floats use Rust's
/// shortest round-trip formatting.
pub fn to_csv(exp: &Experiment) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in &exp.curves {
        let m = &c.trace.meta;
        for (x, v) in c.x_config.iter().zip(&c.value) {
            let (dp, e) = match m.variable {
                SweepVariable::ProbeDetuning => (*x, m.e_rf_applied),
                SweepVariable::RfAmplitude => (c.delta_p_hz, *x),
            };
            let _ = writeln!(
                out,
                "{x},{v},{},{dp},{},{e},{}",
                m.protocol.label(),
                c.delta_rf_hz,
                c.omega_mod_hz
            );
        }
    }
    out
}

pub fn to_svg(exp: &Experiment) -> String {
    let variable = exp.curves.first().map(|c| c.trace.meta.variable).unwrap_or(SweepVariable::ProbeDetuning);
    let (x_scale, x_label) = match variable {
        SweepVariable::ProbeDetuning => (1e-6, "probe detuning Δp/2π (MHz)"),
        SweepVariable::RfAmplitude => (1.0, "applied RF field E_RF (V/m)"),
    };
    let xs: Vec<Vec<f64>> = exp.curves.iter().map(|c| c.x_config.iter().map(|x| x * x_scale).collect()).collect();
    let series: Vec<Series> = exp
        .curves
        .iter()
        .zip(&xs)
        .map(|(c, x)| {
            let m = &c.trace.meta;
            let label = match variable {
                SweepVariable::ProbeDetuning => m.protocol.label().to_string(),
                SweepVariable::RfAmplitude => format!("{} ΔRF/2π={} MHz", short(m.protocol), c.delta_rf_hz / 1e6),
            };
            Series { label, x, y: &c.value, dashed: m.protocol == Protocol::Conventional && variable == SweepVariable::RfAmplitude }
        })
        .collect();
    let y_label = match exp.preset {
        Preset::Fig5 => "|d signal / d E_RF| (m/V)",
        _ => "signal",
    };
    line_plot(exp.preset.name(), x_label, y_label, &series)
}

fn short(p: Protocol) -> &'static str {
    match p {
        Protocol::Conventional => "conv",
        Protocol::ModulationTransfer => "MT",
    }
}

/// Writes `<preset>.csv`, `<preset>.json` and optionally `<preset>.svg`.
pub fn write_outputs(exp: &Experiment, dir: &Path, svg: bool) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let stem = exp.preset.name();
    let mut written = Vec::new();
    let csv = dir.join(format!("{stem}.csv"));
    std::fs::write(&csv, to_csv(exp))?;
    written.push(csv);
    let json = dir.join(format!("{stem}.json"));
    let text = serde_json::to_string_pretty(&exp.metadata).map_err(|e| SimError::InvalidInput(e.to_string()))?;
    std::fs::write(&json, text + "\n")?;
    written.push(json);
    if svg {
        let path = dir.join(format!("{stem}.svg"));
        std::fs::write(&path, to_svg(exp))?;
        written.push(path);
    }
    Ok(written)
}

/// Reads a trace CSV written by [`write_outputs`], returning `(x, value)`
/// pairs grouped by curve (protocol and RF detuning), in file order.
pub fn read_trace_csv(text: &str) -> Result<Vec<(String, Vec<f64>, Vec<f64>)>> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| SimError::InvalidInput("empty CSV".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let col = |name: &str| cols.iter().position(|c| *c == name);
    let (ix, iv) = match (col("x"), col("value")) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(SimError::InvalidInput("CSV needs `x` and `value` columns".into())),
    };
    let key_cols: Vec<usize> = ["protocol", "delta_p_hz", "delta_rf_hz"].iter().filter_map(|n| col(n)).collect();
    let mut groups: Vec<(String, Vec<f64>, Vec<f64>)> = Vec::new();
    for (n, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |i: usize| -> Result<f64> {
            f.get(i)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| SimError::InvalidInput(format!("line {}: bad number in column {}", n + 2, i + 1)))
        };
        let (x, v) = (parse(ix)?, parse(iv)?);
        let key: Vec<&str> = key_cols.iter().map(|&i| f.get(i).copied().unwrap_or("")).collect();
        let key = key.join("/");
        match groups.last_mut() {
            Some(g) if g.0 == key => {
                g.1.push(x);
                g.2.push(v);
            }
            _ => groups.push((key, vec![x], vec![v])),
        }
    }
    Ok(groups)
}
