use ergocov::coverage::{
    acceleration_command, accumulate_coverage, ergodicity, estimate_gradient, footprint_weights,
    project_agent, AgentState, CoverageState,
};
use ergocov::fixtures::{grid, painted_disks};
use ergocov::laplacian::{build_laplacian, LaplacianParams};
use ergocov::spectral::{compute_basis, diffuse_spectral, timestep};
use ergocov::Vec3;
use proptest::prelude::*;

const SPACING: f64 = 2.0;
const RADIUS: f64 = 5.0;

fn agent_at(x: f64, y: f64) -> AgentState {
    AgentState::new(Vec3::new(x, y, 0.0), RADIUS, 3.0, 3.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn footprint_is_local_and_coverage_normalized(
        x in 4.0f64..34.0, y in 4.0f64..34.0, steps in 1usize..6,
    ) {
        let cloud = grid(20, 20, SPACING);
        let tree = cloud.spatial_index();
        let mass = vec![SPACING * SPACING; cloud.len()];
        let target = vec![1.0; cloud.len()];
        let mut state = CoverageState::new(&target, &mass, 0.1).unwrap();
        let agent = agent_at(x, y);
        for _ in 0..steps {
            let before = state.raw_coverage().to_vec();
            let nbh = project_agent(&cloud, &tree, &agent, SPACING).unwrap();
            let w = footprint_weights(&nbh, 2.0).unwrap();
            accumulate_coverage(&mut state, &nbh, &w, &mass).unwrap();
            let centre = nbh.projected();
            for (i, (a, b)) in before.iter().zip(state.raw_coverage()).enumerate() {
                if a != b {
                    prop_assert!((cloud.positions()[i] - centre).norm() <= RADIUS + 1e-9);
                }
            }
            let total: f64 = state.coverage().iter().zip(&mass).map(|(c, m)| c * m).sum();
            prop_assert!((total - 1.0).abs() <= 1e-9);
            prop_assert!(state.coverage().iter().all(|&c| c >= 0.0));
        }
    }
}

#[test]
fn ergodicity_falls_while_footprint_stays_under_target() {
    let cloud = grid(40, 40, SPACING);
    let tree = cloud.spatial_index();
    let mass = vec![SPACING * SPACING; cloud.len()];
    let centre = Vec3::new(39.0, 39.0, 0.0);
    let target = painted_disks(&cloud, &[(centre, 40.0, 1.0)]);
    let mut state = CoverageState::new(&target, &mass, 0.1).unwrap();
    let mut eps = ergodicity(&state).unwrap();
    let mut checked = 0;
    // footprints 12 apart never overlap, so each visit adds only where c = 0 < p
    for i in -2..=2 {
        for j in -2..=2 {
            let (x, y) = (centre.x + 12.0 * i as f64, centre.y + 12.0 * j as f64);
            let nbh = project_agent(&cloud, &tree, &agent_at(x, y), SPACING).unwrap();
            let w = footprint_weights(&nbh, 2.0).unwrap();
            let under = nbh
                .footprint_indices()
                .iter()
                .all(|&k| state.target()[k] - state.coverage()[k] > 0.0);
            accumulate_coverage(&mut state, &nbh, &w, &mass).unwrap();
            let next = ergodicity(&state).unwrap();
            assert!(next >= 0.0);
            if under {
                assert!(next <= eps + 1e-12, "{eps} -> {next}");
                checked += 1;
            }
            eps = next;
        }
    }
    assert_eq!(checked, 25);
}

#[test]
fn zero_source_gives_zero_command() {
    let cloud = grid(16, 16, SPACING);
    let tree = cloud.spatial_index();
    let op = build_laplacian(&cloud, &LaplacianParams::default()).unwrap();
    let basis = compute_basis(&op, 20).unwrap();
    let nbh = project_agent(&cloud, &tree, &agent_at(15.0, 15.0), SPACING).unwrap();
    let zero = vec![0.0; cloud.len()];
    let u = diffuse_spectral(&basis, &zero, timestep(SPACING, 10.0).unwrap()).unwrap();
    assert!(u.iter().all(|&x| x == 0.0));
    let g = estimate_gradient(&cloud, &u, &nbh, &footprint_weights(&nbh, 2.0).unwrap()).unwrap();
    assert_eq!(acceleration_command(&g, 0.0, RADIUS, 3.0), Vec3::zeros());
}

#[test]
fn gradient_points_at_a_point_source() {
    let cloud = grid(25, 25, SPACING);
    let tree = cloud.spatial_index();
    let op = build_laplacian(&cloud, &LaplacianParams::default()).unwrap();
    let basis = compute_basis(&op, 150).unwrap();
    let source_index = 12 * 25 + 12;
    let source_at = cloud.positions()[source_index];
    let mut s = vec![0.0; cloud.len()];
    s[source_index] = 1.0;
    let u = diffuse_spectral(&basis, &s, timestep(SPACING, 20.0).unwrap()).unwrap();
    let mut checked = 0;
    for p in cloud.positions() {
        let d = (source_at - p).norm();
        let inside = p.x >= RADIUS && p.y >= RADIUS && p.x <= 48.0 - RADIUS && p.y <= 48.0 - RADIUS;
        if d < 2.0 * SPACING || !inside {
            continue;
        }
        let nbh = project_agent(&cloud, &tree, &agent_at(p.x, p.y), SPACING).unwrap();
        let g =
            estimate_gradient(&cloud, &u, &nbh, &footprint_weights(&nbh, 2.0).unwrap()).unwrap();
        assert!(g.dot(&(source_at - p)) > 0.0, "at {p:?}: {g:?}");
        checked += 1;
    }
    assert!(checked > 300);
}
