//! Thermal averaging over the 1-D Maxwell-Boltzmann velocity distribution.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::atom::thermal_sigma;
use crate::error::{Result, SimError};
use crate::floquet::HarmonicDensityMatrix;

/// Vapour temperature and the resulting 1-D rms speed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThermalEnsemble {
    pub temperature: f64,
    pub mass: f64,
    pub sigma_v: f64,
}

impl ThermalEnsemble {
    pub fn new(temperature: f64, mass: f64) -> Result<Self> {
        if !(temperature > 0.0 && mass > 0.0) {
            return Err(SimError::InvalidInput(format!(
                "temperature and mass must be > 0 (got {temperature} K, {mass} kg)"
            )));
        }
        Ok(Self { temperature, mass, sigma_v: thermal_sigma(temperature, mass) })
    }
}

/// Quadrature rule for the velocity integral.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridRule {
    /// Gauss-Hermite nodes for the Gaussian weight, truncated at the span.
    GaussHermite,
    /// Uniform trapezoid nodes over ±span.
    Trapezoid,
    /// Trapezoid in `u` with `v = core · sinh(u)`: dense near v = 0 where the
    /// sub-Doppler resonances sit, sparse in the wings.
    Sinh { core: f64 },
}

/// How to discretise the velocity integral.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub rule: GridRule,
    pub n_points: usize,
    pub span_sigmas: f64,
}

impl Default for GridSpec {
    /// Gauss-Hermite nodes are ~σ/10 apart at 201 points, far coarser than
    /// the sub-m/s velocity structure of the two-photon resonances, so the
    /// default is a sinh-clustered trapezoid that refines to ≤1e-6.
    fn default() -> Self {
        Self { rule: GridRule::Sinh { core: 5.0 }, n_points: 1201, span_sigmas: 4.5 }
    }
}

impl GridSpec {
    pub fn build(&self, ensemble: &ThermalEnsemble) -> Result<VelocityGrid> {
        make_grid(ensemble, self.n_points, self.span_sigmas, self.rule)
    }

    /// The same rule with `2n + 1` points.
    pub fn refined(&self) -> Self {
        Self { n_points: 2 * self.n_points + 1, ..*self }
    }
}

/// Velocity nodes (m/s) with normalised weights.
#[derive(Clone, Debug, PartialEq)]
pub struct VelocityGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl VelocityGrid {
    /// All atoms at one velocity.
    pub fn single(velocity: f64) -> Self {
        Self { nodes: vec![velocity], weights: vec![1.0] }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

pub fn make_grid(
    ensemble: &ThermalEnsemble,
    n_points: usize,
    span_sigmas: f64,
    rule: GridRule,
) -> Result<VelocityGrid> {
    if n_points < 3 || n_points % 2 == 0 {
        return Err(SimError::InvalidInput(format!(
            "velocity grid needs an odd number of points >= 3, got {n_points}"
        )));
    }
    if !(span_sigmas > 0.0) {
        return Err(SimError::InvalidInput("span_sigmas must be > 0".into()));
    }
    let sigma = ensemble.sigma_v;
    let span = span_sigmas * sigma;
    let gauss = |v: f64| (-0.5 * (v / sigma).powi(2)).exp();

    let (nodes, weights): (Vec<f64>, Vec<f64>) = match rule {
        GridRule::GaussHermite => gauss_hermite(n_points)
            .into_iter()
            .filter(|(x, _)| x.abs() <= span_sigmas)
            .map(|(x, w)| (x * sigma, w))
            .unzip(),
        GridRule::Trapezoid => {
            let h = 2.0 * span / (n_points - 1) as f64;
            (0..n_points)
                .map(|i| {
                    let v = -span + h * i as f64;
                    let end = if i == 0 || i == n_points - 1 { 0.5 } else { 1.0 };
                    (v, end * h * gauss(v))
                })
                .unzip()
        }
        GridRule::Sinh { core } => {
            if !(core > 0.0) {
                return Err(SimError::InvalidInput("sinh grid core width must be > 0".into()));
            }
            let u_max = (span / core).asinh();
            let h = 2.0 * u_max / (n_points - 1) as f64;
            (0..n_points)
                .map(|i| {
                    let u = -u_max + h * i as f64;
                    let v = core * u.sinh();
                    let end = if i == 0 || i == n_points - 1 { 0.5 } else { 1.0 };
                    (v, end * h * core * u.cosh() * gauss(v))
                })
                .unzip()
        }
    };
    let nodes = symmetrize(nodes);
    let total: f64 = weights.iter().sum();
    let weights = weights.into_iter().map(|w| w / total).collect();
    Ok(VelocityGrid { nodes, weights })
}

/// Forces exact mirror symmetry of the node set and an exact zero centre.
fn symmetrize(mut nodes: Vec<f64>) -> Vec<f64> {
    let n = nodes.len();
    for i in 0..n / 2 {
        let a = 0.5 * (nodes[n - 1 - i] - nodes[i]);
        nodes[i] = -a;
        nodes[n - 1 - i] = a;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    nodes
}

/// Gauss-Hermite rule for the weight `e^{−x²/2}` (Golub-Welsch), weights
/// normalised to 1, nodes ascending.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        j[(k - 1, k)] = b;
        j[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut rule: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = rule.iter().map(|r| r.1).sum();
    rule.iter_mut().for_each(|r| r.1 /= total);
    rule
}

/// `Σ_k w_k ρ(v_k)` over the grid.
///
/// Per-node solves may run in parallel; the reduction always runs in node
/// order so the result does not depend on the thread count.
pub fn doppler_average<F>(grid: &VelocityGrid, solve: F) -> Result<HarmonicDensityMatrix>
where
    F: Fn(f64) -> Result<HarmonicDensityMatrix> + Sync,
{
    let tagged = |(node, &v): (usize, &f64)| {
        solve(v).map_err(|e| SimError::AtVelocity { node, velocity: v, source: Box::new(e) })
    };

    #[cfg(feature = "parallel")]
    let solved: Vec<Result<HarmonicDensityMatrix>> = {
        use rayon::prelude::*;
        grid.nodes.par_iter().enumerate().map(tagged).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let solved: Vec<Result<HarmonicDensityMatrix>> = grid.nodes.iter().enumerate().map(tagged).collect();

    let mut acc = HarmonicDensityMatrix::zeros(0);
    for (rho, &w) in solved.into_iter().zip(&grid.weights) {
        acc.accumulate(&rho?, w);
    }
    Ok(acc)
}
