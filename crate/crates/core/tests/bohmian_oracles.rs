mod common;

use common::{sigma, K0, X0};
use superarrivals::bohmian::fields::{quantum_potential_frame, quantum_potential_wells};
use superarrivals::bohmian::{
    integrate_ensemble, integrate_trajectory, sample_initial_positions, transport_velocity_field,
    Direction, SamplingScheme, DEFAULT_NODE_FLOOR,
};
use superarrivals::observables::{detector_series, DetectorKind};
use superarrivals::potentials::{BarrierSchedule, RampMode};
use superarrivals::solver::{mean_energy, propagate, PropagationRecord, Propagator};
use superarrivals::state::{density_of, init_gaussian, GaussianPacketSpec, Grid, WaveFunction};

fn spec() -> GaussianPacketSpec {
    GaussianPacketSpec {
        x0: X0,
        sigma: sigma(),
        k0: K0,
    }
}

fn setup() -> (Grid, WaveFunction, f64) {
    let g = Grid::new(-1.0, 1.0, 8193, 2e-6).unwrap();
    let psi = init_gaussian(&g, &spec()).unwrap();
    let e = mean_energy(&psi, &vec![0.0; g.n_points()]);
    (g, psi, e)
}

fn static_record() -> PropagationRecord {
    let (_, psi, e) = setup();
    propagate(&psi, &BarrierSchedule::fixed(0.0, 0.016, 2.0 * e), 2000, 1).unwrap()
}

/// Time at which a nondecreasing stretch of `values` first reaches `level`.
fn first_reach(times: &[f64], values: &[f64], level: f64) -> Option<f64> {
    let k = values.iter().position(|&v| v >= level)?;
    if k == 0 {
        return Some(times[0]);
    }
    let f = (level - values[k - 1]) / (values[k] - values[k - 1]);
    Some(times[k - 1] + f * (times[k] - times[k - 1]))
}

#[test]
fn static_barrier_paths_follow_the_density_and_cross_the_detector_once() {
    let rec = static_record();
    let field = transport_velocity_field(&rec, DEFAULT_NODE_FLOOR).unwrap();

    let central = integrate_trajectory(&field, X0).unwrap();
    assert!(central.is_complete());
    let side: Vec<bool> = central.positions.iter().map(|&x| x < -0.5).collect();
    assert_eq!(side.windows(2).filter(|w| w[0] != w[1]).count(), 1);
    assert!(central.arrival_time(-0.5, Direction::Leftward).is_some());

    // In one dimension the particles left of x′ are the leftmost ones, so a
    // particle of initial quantile u arrives when R(t) reaches u.
    let series = detector_series(&rec, DetectorKind::Reflection, -0.5).unwrap();
    let peak = series.values.iter().cloned().fold(0.0, f64::max);
    let rise_end = series.values.iter().position(|&v| v == peak).unwrap();
    let n = 400;
    let x = sample_initial_positions(&spec(), n, SamplingScheme::Quantile, 0, &rec.grid).unwrap();
    let ens = integrate_ensemble(&field, &x).unwrap();
    let arrivals = ens.arrival_times(-0.5, Direction::Leftward);
    let mut checked = 0;
    for (j, t) in arrivals.iter().enumerate() {
        let u = (j as f64 + 0.5) / n as f64;
        if u >= 0.98 * peak {
            continue;
        }
        let oracle =
            first_reach(&series.times[..=rise_end], &series.values[..=rise_end], u).unwrap();
        let t = t.expect("particle below the reflected share reaches the detector");
        assert!(
            (t - oracle).abs() <= 0.2 * rec.grid.dt(),
            "particle {j}: {t} vs {oracle}"
        );
        checked += 1;
    }
    assert!(checked > 300, "only {checked} particles checked");
}

#[test]
fn quantum_potential_of_the_initial_packet_is_an_inverted_parabola() {
    let (g, psi, _) = setup();
    let (q, mask) = quantum_potential_frame(&g, psi.amplitudes(), DEFAULT_NODE_FLOOR);
    let s2 = sigma() * sigma();
    for (i, x) in g.positions().enumerate() {
        let u = x - X0;
        if u.abs() > 3.0 * sigma() {
            continue;
        }
        assert!(!mask[i]);
        let exact = 1.0 / (2.0 * s2) - u * u / (4.0 * s2 * s2);
        assert!(
            (q[i] - exact).abs() <= 1e-3 / (2.0 * s2),
            "x = {x}: {} vs {exact}",
            q[i]
        );
    }
}

#[test]
fn leftmost_well_ordering_does_not_depend_on_the_density_floor() {
    let (g, psi, e) = setup();
    let (tp, eps) = (g.time_of(400), g.time_of(10));
    let schedule = BarrierSchedule::ramped(0.0, 0.016, 2.0 * e, RampMode::Lowering, tp, eps);
    let mut stepper = Propagator::new(&g, schedule).unwrap();
    let mut psi = psi;
    let mut frames = Vec::new();
    for step in [420, 425, 430] {
        while psi.step() < step {
            stepper.step(&mut psi).unwrap();
        }
        frames.push(psi.amplitudes().to_vec());
    }
    for relative in [0.0, 1e-12, 1e-8, 1e-4, 1e-2] {
        let wells: Vec<f64> = frames
            .iter()
            .map(|f| {
                let density = density_of(f);
                let floor = relative * density.iter().cloned().fold(0.0, f64::max);
                let (q, _) = quantum_potential_frame(&g, f, floor.max(DEFAULT_NODE_FLOOR));
                let found = quantum_potential_wells(
                    &g,
                    &q,
                    &density,
                    -1.0,
                    -0.008_f64.next_down(),
                    floor.max(DEFAULT_NODE_FLOOR),
                );
                found[0]
            })
            .collect();
        assert!(
            wells[0] > wells[1] && wells[1] > wells[2],
            "floor {relative}: {wells:?}"
        );
    }
}
