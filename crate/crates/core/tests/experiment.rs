use rydberg_mt::config::{parse_config, DensitySource};
use rydberg_mt::experiment::{read_trace_csv, run_experiment, to_csv, Preset};

const SMALL: &str = r#"
[cell]
n_layers = 4

[ensemble]
n_points = 21

[sweep]
delta_p_min_hz = -4e6
delta_p_max_hz = 4e6
delta_p_points = 5
e_rf_points = 9
delta_rf_family_hz = [0.0, 10e6]
"#;

#[test]
fn echoed_config_reproduces_the_run() {
    let cfg = parse_config(SMALL).unwrap();
    let first = run_experiment(Preset::Fig4, &cfg).unwrap();
    assert!(matches!(first.metadata.density_source, DensitySource::Calibrated { .. }));
    let echoed = parse_config(&first.metadata.config).unwrap();
    assert_eq!(echoed.cell.number_density, Some(first.metadata.number_density));
    let second = run_experiment(Preset::Fig4, &echoed).unwrap();
    assert_eq!(to_csv(&first), to_csv(&second));
    assert!(matches!(second.metadata.density_source, DensitySource::Given));
}

#[test]
fn csv_round_trips_through_the_reader() {
    let cfg = parse_config(SMALL).unwrap();
    let exp = run_experiment(Preset::Fig4, &cfg).unwrap();
    let curves = read_trace_csv(&to_csv(&exp)).unwrap();
    assert_eq!(curves.len(), exp.curves.len());
    for ((_, x, y), c) in curves.iter().zip(&exp.curves) {
        assert_eq!(x, &c.trace.x);
        assert_eq!(y, &c.trace.y);
    }
}
