mod common;

use proptest::prelude::*;
use rotary_coverage::dynamics::{
    phase_rate, reference_rate, AgentRates, CoverageModel, Gains, Integrator,
};
use rotary_coverage::field::{grid_mass_oracle, paper_density};
use rotary_coverage::geometry::wrap_angle;
use rotary_coverage::{Point, SwarmState};

use common::{
    consensus_state, ellipse, max_abs, paper_model, random_state, redact, same_bits, uniform_model,
};

fn rate_norm(r: &AgentRates) -> f64 {
    r.phase.abs().max(r.reference.norm()).max(r.position.norm())
}

fn angular_distance(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    d.min(std::f64::consts::TAU - d)
}

/// Largest componentwise gap between two states, phases compared on the circle.
fn state_gap(a: &SwarmState, b: &SwarmState) -> f64 {
    max_abs(a.agents.iter().zip(&b.agents).flat_map(|(x, y)| {
        [
            angular_distance(x.phase, y.phase),
            x.reference.x - y.reference.x,
            x.reference.y - y.reference.y,
            x.position.x - y.position.x,
            x.position.y - y.position.y,
        ]
    }))
}

fn integrate(
    model: &CoverageModel,
    state: &SwarmState,
    dt: f64,
    steps: usize,
    kind: Integrator,
) -> SwarmState {
    let mut s = state.clone();
    for _ in 0..steps {
        s = model.step(&s, dt, kind).unwrap().state;
    }
    s
}

#[test]
fn consensus_states_are_equilibria() {
    let models = [paper_model(), uniform_model(ellipse())];
    for model in &models {
        for (reference, first) in [
            (Point::ORIGIN, 0.3),
            (Point::new(0.7, -0.4), 2.0),
            (Point::new(-2.0, 1.1), 5.0),
        ] {
            for n in [3, 6] {
                let state = consensus_state(model, reference, n, first);
                let rates = model.swarm_rates(&state).unwrap();
                let worst = rates.iter().map(rate_norm).fold(0.0, f64::max);
                assert!(worst < 1e-10, "{reference:?} n={n}: {worst:e}");
            }
        }
    }
}

#[test]
fn equilibrium_step_only_advances_time() {
    let model = uniform_model(ellipse());
    let state = consensus_state(&model, Point::ORIGIN, 6, 0.1);
    for kind in [Integrator::Euler, Integrator::Rk4] {
        let next = model.step(&state, 0.01, kind).unwrap();
        assert!(state_gap(&state, &next.state) < 1e-12);
        assert_eq!(next.state.time, 0.01);
        assert!(next.events.is_empty());
    }
}

#[test]
fn rates_are_linear_in_each_gain() {
    let base = paper_model();
    let state = random_state(&base.boundary, 6, 11);
    let r0 = base.swarm_rates(&state).unwrap();
    let g = base.gains;
    let with = |gains: Gains| {
        let mut m = base.clone();
        m.gains = gains;
        m.swarm_rates(&state).unwrap()
    };
    let phi = with(Gains::new(g.kappa_p, 2.0 * g.kappa_phi, g.kappa_r).unwrap());
    let r = with(Gains::new(g.kappa_p, g.kappa_phi, 2.0 * g.kappa_r).unwrap());
    let p = with(Gains::new(2.0 * g.kappa_p, g.kappa_phi, g.kappa_r).unwrap());
    for i in 0..6 {
        assert_eq!(phi[i].phase, 2.0 * r0[i].phase);
        assert_eq!(phi[i].reference, r0[i].reference);
        assert_eq!(r[i].reference, r0[i].reference * 2.0);
        assert_eq!(r[i].phase, r0[i].phase);
        assert_eq!(p[i].position, r0[i].position * 2.0);
        assert_eq!(p[i].phase, r0[i].phase);
    }
}

#[test]
fn cyclic_relabeling_permutes_rates() {
    let model = paper_model();
    let state = random_state(&model.boundary, 6, 5);
    let rates = model.swarm_rates(&state).unwrap();
    for shift in 1..6 {
        let mut agents = state.agents.clone();
        agents.rotate_left(shift);
        let shifted = model
            .swarm_rates(&SwarmState::new(agents, state.time).unwrap())
            .unwrap();
        for i in 0..6 {
            assert!(
                same_bits(&shifted[i], &rates[(i + shift) % 6]),
                "shift {shift}, agent {i}"
            );
        }
    }
}

#[test]
fn euler_step_is_state_plus_dt_rates() {
    let model = paper_model();
    let state = random_state(&model.boundary, 6, 8);
    let dt = 0.05;
    let rates = model.swarm_rates(&state).unwrap();
    let next = model.step(&state, dt, Integrator::Euler).unwrap().state;
    for ((a, b), r) in state.agents.iter().zip(&next.agents).zip(&rates) {
        assert_eq!(b.phase, wrap_angle(a.phase + r.phase * dt));
        assert_eq!(b.reference, a.reference + r.reference * dt);
        assert_eq!(b.position, a.position + r.position * dt);
    }
    assert_eq!(next.time, dt);
}

#[test]
fn rk4_beats_euler_against_fine_euler() {
    let model = paper_model();
    let state = random_state(&model.boundary, 6, 42);
    let dt = 0.1;
    let steps = 10;
    let reference = integrate(&model, &state, dt / 1000.0, steps * 1000, Integrator::Euler);
    let euler = state_gap(
        &integrate(&model, &state, dt, steps, Integrator::Euler),
        &reference,
    );
    let rk4 = state_gap(
        &integrate(&model, &state, dt, steps, Integrator::Rk4),
        &reference,
    );
    let euler_fine = state_gap(
        &integrate(&model, &state, dt / 10.0, steps * 10, Integrator::Euler),
        &reference,
    );
    assert!(rk4 < euler, "rk4 {rk4:e} euler {euler:e}");
    assert!(rk4 < euler_fine, "rk4 {rk4:e} euler dt/10 {euler_fine:e}");
}

#[test]
fn rk4_error_shrinks_at_fourth_order() {
    // Large steps so truncation error dominates rounding.
    let model = paper_model();
    let state = random_state(&model.boundary, 6, 42);
    let t = 8.0;
    let reference = integrate(&model, &state, 0.1, 80, Integrator::Rk4);
    let coarse = state_gap(
        &integrate(&model, &state, t / 4.0, 4, Integrator::Rk4),
        &reference,
    );
    let fine = state_gap(
        &integrate(&model, &state, t / 8.0, 8, Integrator::Rk4),
        &reference,
    );
    assert!(coarse / fine > 8.0, "{coarse:e} {fine:e}");
}

#[test]
fn stepping_is_deterministic_and_order_free() {
    let model = paper_model();
    let state = random_state(&model.boundary, 6, 3);
    let a = model.step(&state, 0.01, Integrator::Rk4).unwrap();
    let b = model.step(&state, 0.01, Integrator::Rk4).unwrap();
    assert_eq!(a, b);

    let full = model.evaluate(&state).unwrap();
    let masses = full.masses();
    for i in (0..6).rev() {
        let own = model.observe(&state, i).unwrap();
        let rates = model.agent_rates(&state, &own, &masses, i).unwrap();
        assert!(same_bits(&rates, &full.rates[i]));
    }
}

/// Seed 42, six agents, default gains and quadrature, t = 0:
/// (mass, phase rate, reference rate, position rate, grid-sum mass at 2048).
const SEED_42_FIXTURE: [(f64, f64, f64, f64, f64, f64, f64); 6] = [
    (
        0.003880285505504125,
        1.6779841962179728e-6,
        -0.23407195466355035,
        0.24024824489330032,
        -0.05262248417303726,
        0.112602134978775,
        0.0038805797221245332,
    ),
    (
        0.00023531871787326624,
        -7.835938940066115e-7,
        0.4528931281431426,
        -0.21991447503588152,
        -0.28877185338083744,
        0.03095665064738684,
        0.00023535530124248847,
    ),
    (
        0.0015930261752288488,
        8.172999281542353e-7,
        -0.16378333204023143,
        -0.013669154978782658,
        0.16611051263352952,
        -0.10461728502904497,
        0.0015930997603410344,
    ),
    (
        3.737098295055014e-7,
        -3.903411376373427e-7,
        -0.27649615112499143,
        0.35669731302331786,
        0.10139740031755144,
        -0.17515882859550766,
        3.728602299536521e-7,
    ),
    (
        0.015197749861747876,
        5.9484188273582436e-6,
        0.24350085546151137,
        -0.26499306424370506,
        0.004158173253542889,
        0.09464116423919318,
        0.015198206380801925,
    ),
    (
        0.0011142775698748785,
        -1.0141143198178225e-5,
        -0.022040773736065104,
        -0.09837387128441485,
        0.11985140014223829,
        0.08274134489259322,
        0.001114343376844866,
    ),
];

#[test]
fn seed_42_initial_rates_match_fixture() {
    let model = paper_model();
    let state = random_state(&model.boundary, 6, 42);
    let eval = model.evaluate(&state).unwrap();
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1e-12);
    for (i, &(m, phi, rx, ry, px, py, _)) in SEED_42_FIXTURE.iter().enumerate() {
        let r = eval.rates[i];
        assert!(close(eval.observations[i].mass(), m), "mass {i}");
        assert!(close(r.phase, phi), "phase {i}");
        assert!(
            close(r.reference.x, rx) && close(r.reference.y, ry),
            "reference {i}"
        );
        assert!(
            close(r.position.x, px) && close(r.position.y, py),
            "position {i}"
        );
    }
}

#[test]
fn seed_42_masses_agree_with_grid_sum() {
    // The smallest sector is a sliver a few grid cells wide, hence the floor.
    let model = paper_model();
    let state = random_state(&model.boundary, 6, 42);
    let eval = model.evaluate(&state).unwrap();
    for (i, fixture) in SEED_42_FIXTURE.iter().enumerate() {
        let grid = grid_mass_oracle(&ellipse(), &paper_density(), state.sector(i), 2048);
        assert_eq!(grid, fixture.6);
        assert!(
            (eval.observations[i].mass() - grid).abs() <= 1e-3 * grid + 1e-9,
            "agent {i}"
        );
    }
}

#[test]
fn poisoned_state_outside_grant_never_reaches_rates() {
    let model = paper_model();
    for (n, seed) in [(3, 1), (4, 2), (6, 3), (9, 4)] {
        let state = random_state(&model.boundary, n, seed);
        let full = model.evaluate(&state).unwrap();
        let masses = full.masses();
        for i in 0..n {
            let (red, red_masses) = redact(&state, &masses, i);
            let own = model.observe(&red, i).unwrap();
            assert_eq!(own, full.observations[i]);
            let rates = model.agent_rates(&red, &own, &red_masses, i).unwrap();
            assert!(same_bits(&rates, &full.rates[i]), "n={n} agent {i}");
        }
    }
}

#[test]
fn poisoning_a_granted_quantity_does_propagate() {
    let model = paper_model();
    let state = random_state(&model.boundary, 6, 3);
    let full = model.evaluate(&state).unwrap();
    let (red, mut masses) = redact(&state, &full.masses(), 2);
    masses[1] = f64::NAN;
    let rates = model
        .agent_rates(&red, &full.observations[2], &masses, 2)
        .unwrap();
    assert!(rates.phase.is_nan() && rates.reference.x.is_nan());
}

fn finite() -> impl Strategy<Value = f64> {
    -10.0..10.0_f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn phase_rate_matches_expanded_form(
        m in prop::array::uniform4(0.0..5.0_f64), d_own in -3.0..0.0_f64, d_prev in 0.0..3.0_f64,
        k in 0.01..1.0_f64,
    ) {
        let gains = Gains::new(0.04, k, 0.05).unwrap();
        let [m_im2, m_im1, m_i, m_ip1] = m;
        let got = phase_rate(m_im2, m_im1, m_i, m_ip1, d_own, d_prev, &gains);
        let expanded = -k * d_own * (m_i - m_im1) - k * d_own * (m_i - m_ip1)
            - k * d_prev * (m_im1 - m_im2) - k * d_prev * (m_im1 - m_i);
        prop_assert!((got - expanded).abs() <= 1e-12 * (1.0 + expanded.abs()));
    }

    #[test]
    fn equal_workloads_leave_only_reference_laplacian(
        m in 0.0..5.0_f64, d in (finite(), finite()), r in prop::array::uniform6(finite()),
    ) {
        let gains = Gains::default();
        prop_assert_eq!(phase_rate(m, m, m, m, -1.3, 0.7, &gains), 0.0);
        let (a, b, c) = (Point::new(r[0], r[1]), Point::new(r[2], r[3]), Point::new(r[4], r[5]));
        let got = reference_rate(m, m, m, Point::new(d.0, d.1), a, b, c, &gains);
        let laplacian = ((a - b) + (c - b)) * gains.kappa_r;
        prop_assert!((got - laplacian).norm() <= 1e-12 * (1.0 + laplacian.norm()));
    }

    #[test]
    fn reference_rate_matches_expanded_form(
        m in prop::array::uniform3(0.0..5.0_f64), g in (finite(), finite()), r in prop::array::uniform6(finite()),
    ) {
        let gains = Gains::default();
        let k = gains.kappa_r;
        let (a, b, c) = (Point::new(r[0], r[1]), Point::new(r[2], r[3]), Point::new(r[4], r[5]));
        let got = reference_rate(m[0], m[1], m[2], Point::new(g.0, g.1), a, b, c, &gains);
        let pull = (m[1] - m[0]) + (m[1] - m[2]);
        let want = Point::new(
            -k * (g.0 * pull + (b.x - a.x) + (b.x - c.x)),
            -k * (g.1 * pull + (b.y - a.y) + (b.y - c.y)),
        );
        prop_assert!((got - want).norm() <= 1e-12 * (1.0 + want.norm()));
    }
}
