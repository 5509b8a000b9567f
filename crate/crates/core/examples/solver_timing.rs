//! Times one velocity-class Floquet solve at the default operating point.

use std::time::Instant;

use rydberg_mt::atom::{build_dissipator, build_hamiltonian, AtomModel, DriveConfig};
use rydberg_mt::constants::TWO_PI;
use rydberg_mt::floquet::{assemble_blocks, continued_fraction_fixed, solve_continued_fraction, FloquetConfig};

fn main() {
    let atom = AtomModel::rb85();
    let omega_mod = TWO_PI * 3e6;
    let mut drive = DriveConfig::carriers(TWO_PI * 2.8e6, 0.0, TWO_PI * 5e6)
        .with_phase_modulated_coupling(TWO_PI * 2.3e6, 0.6 * TWO_PI * 2.3e6, omega_mod);
    drive.delta_p = TWO_PI * 1e6;
    let d = build_dissipator(&atom);
    let h = build_hamiltonian(&drive, 0.5, &atom, 4).unwrap();
    let b = assemble_blocks(&h, &d);
    let reference = continued_fraction_fixed(&b, omega_mod, 40).unwrap();
    for n in [1, 2, 3, 4, 5, 6, 8, 10] {
        let r = continued_fraction_fixed(&b, omega_mod, n).unwrap();
        let err = (r.rho21(1) - reference.rho21(1)).norm() / reference.rho21(1).norm();
        let reps = 2000;
        let t = Instant::now();
        for _ in 0..reps {
            std::hint::black_box(continued_fraction_fixed(&b, omega_mod, n).unwrap());
        }
        println!("n_max {n:2}: rel err rho21(+1) {err:.2e}, {:.1} us/solve", t.elapsed().as_secs_f64() / reps as f64 * 1e6);
    }
    let t = Instant::now();
    for _ in 0..500 {
        std::hint::black_box(solve_continued_fraction(&b, omega_mod, &FloquetConfig::default()).unwrap());
    }
    println!("adaptive default: {:.1} us/solve", t.elapsed().as_secs_f64() / 500.0 * 1e6);
    let h0 = h.carrier();
    let t = Instant::now();
    for _ in 0..5000 {
        std::hint::black_box(rydberg_mt::atom::steady_state_static(&h0, &d).unwrap());
    }
    println!("static: {:.1} us/solve", t.elapsed().as_secs_f64() / 5000.0 * 1e6);
}
