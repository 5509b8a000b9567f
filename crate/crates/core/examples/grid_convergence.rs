//! Velocity-grid refinement study: each rule at n and 2n+1 nodes, one
//! layer at the reference modulated drive. Prints the largest relative
//! change of ⟨ρ₂₁⁽ⁿ⁾⟩, n = −1, 0, +1.

use std::time::Instant;

use rydberg_mt::config::RunConfig;
use rydberg_mt::doppler::{GridRule, GridSpec, ThermalEnsemble};
use rydberg_mt::signals::Protocol;

fn main() {
    let cfg = RunConfig::default();
    let mut rx = cfg.receiver_template().unwrap();
    rx.delta_p = std::f64::consts::TAU * 2.3e6;
    let ens = ThermalEnsemble::new(cfg.ensemble.temperature, rx.atom.mass).unwrap();
    let mut medium = rx.medium(Protocol::ModulationTransfer, true).unwrap();
    let input = rx.input();
    let rules = [GridRule::GaussHermite, GridRule::Trapezoid, GridRule::Sinh { core: 5.0 }];
    for rule in rules {
        for n in [201, 401, 801, 1201] {
            let spec = GridSpec { rule, n_points: n, ..GridSpec::default() };
            let t = Instant::now();
            medium.grid = spec.build(&ens).unwrap();
            let a = medium.averaged_response(&input).unwrap().rho21_triplet();
            let elapsed = t.elapsed();
            medium.grid = spec.refined().build(&ens).unwrap();
            let b = medium.averaged_response(&input).unwrap().rho21_triplet();
            let change = a.iter().zip(&b).map(|(x, y)| (x - y).norm() / y.norm()).fold(0.0, f64::max);
            println!("{rule:?} n={n:5} {elapsed:>10.2?}  change {change:.2e}");
        }
    }
}
