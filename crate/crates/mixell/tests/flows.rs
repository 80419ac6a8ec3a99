//! End-to-end behaviour of the singular scheme and the two-solution
//! machinery that only shows up across module boundaries: refinement
//! trends, schedule limits against direct huge-level solves, threshold
//! conservativeness and the finiteness witness.

use approx::assert_relative_eq;
use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mixell::elliptic::{first_eigenpair, solve_linear};
use mixell::nehari::{
    fiber_analyze, fiber_hump, lambda_finiteness_witness, lambda_star, minimize_nehari,
    witness_threshold, Branch, PerturbedParams,
};
use mixell::singular::{comparison_check, run_schedule, run_schedule_from, solve_level};
use mixell::{assemble, build_mesh, energy_norm_sq, DomainSpec, GridFunction, OperatorSet};

fn spec() -> DomainSpec {
    DomainSpec {
        a: 0.0,
        b: 1.0,
        collar_width: 0.5,
        s: 0.5,
        kernel_constant: 1.0,
    }
}

fn ops_at(h: f64) -> OperatorSet {
    assemble(&build_mesh(spec(), h).unwrap(), 6).unwrap()
}

#[test]
fn linear_solutions_self_converge_under_refinement() {
    // Galerkin energies increase toward the continuum value and the
    // increments shrink; nodal values at shared points tighten as well.
    let mut energies = Vec::new();
    let mut sols = Vec::new();
    for k in [5, 6, 7] {
        let ops = ops_at(0.5_f64.powi(k));
        let ones = GridFunction::from_fn(&ops.mesh, |_| 1.0);
        let sol = solve_linear(&ops, &ones, 1e-13, 20000).unwrap();
        energies.push(energy_norm_sq(&ops, &sol.u).unwrap());
        sols.push((ops, sol.u));
    }
    assert!(energies[1] > energies[0] && energies[2] > energies[1], "{energies:?}");
    let gap1 = energies[1] - energies[0];
    let gap2 = energies[2] - energies[1];
    assert!(gap2 < 0.8 * gap1, "refinement gaps {gap1:.3e}, {gap2:.3e}");

    // Pointwise comparison away from the pinned collar edge, whose
    // boundary layer is an artifact of the constrained node and does not
    // converge nodally.
    let inner_end = spec().b + 0.5 * spec().collar_width;
    let shared_diff = |coarse: &(OperatorSet, GridFunction), fine: &(OperatorSet, GridFunction)| {
        let mesh_c = &coarse.0.mesh;
        let mut worst = 0.0_f64;
        for (i, &x) in mesh_c.nodes.iter().enumerate() {
            if x <= inner_end {
                worst = worst.max((coarse.1.values[i] - fine.1.eval(&fine.0.mesh, x)).abs());
            }
        }
        worst
    };
    let d01 = shared_diff(&sols[0], &sols[1]);
    let d12 = shared_diff(&sols[1], &sols[2]);
    assert!(d12 < 0.8 * d01, "nodal diffs {d01:.3e}, {d12:.3e}");
}

#[test]
fn schedule_limit_agrees_with_a_direct_huge_level_solve() {
    let ops = ops_at(0.03125);
    let schedule: Vec<u64> = (0..11).map(|k| 1 << k).collect();
    let run = run_schedule(&ops, 0.5, &schedule, 1e-12, 800).unwrap();
    // One solve at n = 10^6, warm-started from the limit, must stay where
    // it is: the remaining truncation moves values by O(1/n) at most.
    let huge = solve_level(&ops, 0.5, 1_000_000, &run.limit.u_hat, 1e-12, 800).unwrap();
    let worst = (0..ops.mesh.n_nodes())
        .map(|i| (huge.u.values[i] - run.limit.u_hat.values[i]).abs())
        .fold(0.0_f64, f64::max);
    assert!(worst <= 1e-5 * run.limit.sup_norm, "limit drift {worst:.3e}");
}

#[test]
fn first_level_is_dominated_by_the_linear_envelope() {
    // g_1 truncates at (v+1)^{-q} <= 1, so the level-1 solution sits below
    // the solution with right side f = 1 by inverse monotonicity.
    let ops = ops_at(0.0625);
    let zero = GridFunction::zeros(&ops.mesh);
    let level = solve_level(&ops, 0.5, 1, &zero, 1e-12, 400).unwrap();
    let ones = GridFunction::from_fn(&ops.mesh, |_| 1.0);
    let envelope = solve_linear(&ops, &ones, 1e-13, 8000).unwrap();
    for i in 0..ops.mesh.n_nodes() {
        assert!(
            level.u.values[i] <= envelope.u.values[i] + 1e-10,
            "node {i}: {} vs {}",
            level.u.values[i],
            envelope.u.values[i]
        );
    }
}

#[test]
fn uniqueness_of_the_limit_across_initial_iterates() {
    let ops = ops_at(0.03125);
    let schedule: Vec<u64> = (0..11).map(|k| 1 << k).collect();
    let from_zero = run_schedule(&ops, 0.5, &schedule, 1e-12, 800).unwrap();
    let ones = GridFunction::from_fn(&ops.mesh, |_| 1.0);
    let warm = solve_linear(&ops, &ones, 1e-13, 8000).unwrap();
    let from_envelope =
        run_schedule_from(&ops, 0.5, &schedule, 1e-12, 800, &warm.u).unwrap();
    let diff = GridFunction {
        values: &from_zero.limit.u_hat.values - &from_envelope.limit.u_hat.values,
    };
    let dist = energy_norm_sq(&ops, &diff).unwrap().max(0.0).sqrt();
    assert!(dist <= 1e-6, "energy distance {dist:.3e}");
}

#[test]
fn ordered_right_sides_give_ordered_solutions() {
    // Ten pairs: a schedule level against a strictly deeper level. The
    // deeper level has the larger truncated right side pointwise, hence
    // the larger solution; the sharp-residual margins certify it.
    let ops = ops_at(0.0625);
    let zero = GridFunction::zeros(&ops.mesh);
    let mut u_prev = solve_level(&ops, 0.5, 1, &zero, 1e-12, 400).unwrap().u;
    for k in 1..=10 {
        let n = 1_u64 << (2 * k);
        let next = solve_level(&ops, 0.5, n, &u_prev, 1e-12, 400).unwrap().u;
        let report = comparison_check(&ops, &u_prev, &next, 0.5, 1e-8).unwrap();
        assert!(
            report.ordered,
            "pair {k}: margins {:.3e}, {:.3e}",
            report.hypothesis_margin, report.conclusion_margin
        );
        u_prev = next;
    }
}

#[test]
fn threshold_formula_is_a_conservative_lower_bound() {
    let ops = ops_at(0.0625);
    let (q, p) = (0.5, 3.0);
    let stars = lambda_star(&ops, q, p, &[1, 2, 3], 1e-12, 4000).unwrap();
    assert!(stars.lambda_star.is_finite() && stars.lambda_star > 0.0);

    // Every ray u has its own degeneracy threshold mu_peak / M(u); the
    // formula must sit below all of them.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let n = ops.a_total.nrows();
    let params = PerturbedParams { lambda: stars.lambda_star, q, p };
    let eigen = first_eigenpair(&ops, 1e-12, 600).unwrap();
    let mut lowest_ray = f64::INFINITY;
    let mut worst_u: Option<GridFunction> = None;
    let mut rays: Vec<GridFunction> = (0..100)
        .map(|_| {
            GridFunction::from_free(
                &ops.mesh,
                &DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
            )
        })
        .collect();
    rays.push(eigen.phi.clone());
    for u in rays {
        let hump = fiber_hump(&ops, &params, &u).unwrap();
        let ray_threshold = stars.lambda_star * hump.mu_peak / hump.level;
        if ray_threshold < lowest_ray {
            lowest_ray = ray_threshold;
            worst_u = Some(u);
        }
    }
    assert!(
        lowest_ray >= stars.lambda_star * (1.0 - 1e-9),
        "sampled ray degenerates at {lowest_ray:.6e}, below lambda* {:.6e}",
        stars.lambda_star
    );

    // Past its own threshold the worst sampled ray loses the two roots.
    let u = worst_u.unwrap();
    let past = PerturbedParams { lambda: 1.01 * lowest_ray, q, p };
    let err = fiber_analyze(&ops, &past, &u).unwrap_err();
    assert!(err.to_string().contains("no two critical points"), "{err}");
    // Below lambda* the same ray keeps them.
    let below = PerturbedParams { lambda: 0.5 * stars.lambda_star, q, p };
    let fiber = fiber_analyze(&ops, &below, &u).unwrap();
    assert!(fiber.t_minus < fiber.t_max && fiber.t_max < fiber.t_plus);
}

#[test]
fn thresholds_stay_positive_across_superlinear_exponents() {
    let ops = ops_at(0.0625);
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let n = ops.a_total.nrows();
    for p in [2.0, 3.0, 4.0] {
        let stars = lambda_star(&ops, 0.5, p, &[1, 2], 1e-12, 4000).unwrap();
        assert!(stars.lambda_star > 0.0 && stars.lambda_star.is_finite());
        let params = PerturbedParams { lambda: 0.5 * stars.lambda_star, q: 0.5, p };
        for _ in 0..10 {
            let u = GridFunction::from_free(
                &ops.mesh,
                &DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
            );
            let fiber = fiber_analyze(&ops, &params, &u).unwrap();
            assert!(fiber.curvature_minus > 0.0 && fiber.curvature_plus < 0.0);
        }
    }
}

#[test]
fn finiteness_witness_confirms_and_small_lambda_solves() {
    let ops = ops_at(0.0625);
    let (q, p) = (0.5, 3.0);
    let eigen = first_eigenpair(&ops, 1e-12, 600).unwrap();
    let threshold = witness_threshold(q, p, eigen.lambda).unwrap();
    assert!(threshold.mu_star > 0.0);

    // Well below the witness threshold both branches minimize fine.
    let small = PerturbedParams { lambda: 0.1 * threshold.mu_star, q, p };
    for branch in [Branch::Plus, Branch::Minus] {
        let sol = minimize_nehari(&ops, &small, &eigen, branch, &[5, 6], 1e-10, 400).unwrap();
        assert!(sol.residual <= 1e-10, "residual {:.3e}", sol.residual);
    }

    // At twice the threshold the witness reports nonexistence.
    let witness = lambda_finiteness_witness(&ops, q, p, &eigen, &[5, 6], 1e-10, 400).unwrap();
    assert!(witness.confirmed, "{}", witness.detail);
    assert_relative_eq!(
        witness.lambda_tested,
        2.0 * threshold.mu_star,
        max_relative = 1e-12
    );
}
