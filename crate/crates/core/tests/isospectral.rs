//! Isospectrality sweep: the characteristic-polynomial coefficients of
//! `Q_(1)` drift below 1e-6 under every monitored generator, over t = 5 at
//! dt = 1e-3, for periods up to 6.

use alcmv::flows::{drift_report, integrate, FlowConfig};
use alcmv::hamiltonians::HamiltonianSpec;
use alcmv::lax::GradientMethod;
use alcmv::rng::random_periodic;

#[test]
fn char_poly_coefficients_survive_every_flow() {
    let generators = [
        HamiltonianSpec::Al,
        HamiltonianSpec::ReK(1),
        HamiltonianSpec::ImK(1),
        HamiltonianSpec::ReK(2),
        HamiltonianSpec::ImK(2),
        HamiltonianSpec::ReK(3),
        HamiltonianSpec::ImK(3),
        HamiltonianSpec::K0,
    ];
    for (p, seed) in [(2usize, 501u64), (4, 502), (6, 503)] {
        let seq = random_periodic(p, seed);
        for generator in generators {
            let config = FlowConfig {
                hamiltonian: generator,
                t_end: 5.0,
                dt: 1e-3,
                monitor_every: 250,
                gradient_method: GradientMethod::Analytic,
            };
            let traj = integrate(&config, &seq).unwrap();
            let drift = drift_report(&traj);
            let worst = drift
                .iter()
                .filter(|(name, _)| name.starts_with('c') || name.starts_with("inv"))
                .map(|(_, v)| *v)
                .fold(0.0f64, f64::max);
            assert!(
                worst < 1e-6,
                "p={p} H={}: isospectral drift {worst:.3e}",
                generator.label()
            );
        }
    }
}
