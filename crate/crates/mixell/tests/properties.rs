//! Property-based checks of the structural invariants: randomized inputs
//! drawn by proptest, shared operator sets built once per exponent.

use std::sync::OnceLock;

use nalgebra::DVector;
use proptest::prelude::*;

use mixell::operators::nonlocal_neumann_reconstruction;
use mixell::singular::{algebraic_inequality_check, g_n, g_n_derivative};
use mixell::{assemble, build_mesh, DomainSpec, GridFunction, Mesh, OperatorSet, Region};

fn reference() -> &'static (Mesh, OperatorSet) {
    static OPS: OnceLock<(Mesh, OperatorSet)> = OnceLock::new();
    OPS.get_or_init(|| {
        let spec = DomainSpec {
            a: 0.0,
            b: 1.0,
            collar_width: 0.5,
            s: 0.5,
            kernel_constant: 1.0,
        };
        let mesh = build_mesh(spec, 0.0625).unwrap();
        let ops = assemble(&mesh, 6).unwrap();
        (mesh, ops)
    })
}

proptest! {
    #[test]
    fn transformed_bound_inequality_holds(
        x in 0.0_f64..50.0,
        y in 0.0_f64..50.0,
        alpha in 0.05_f64..20.0,
    ) {
        prop_assert!(algebraic_inequality_check(x, y, alpha));
    }

    #[test]
    fn folding_does_not_increase_the_energy(values in prop::collection::vec(-10.0_f64..10.0, 23)) {
        let (_, ops) = reference();
        let v = DVector::from_vec(values);
        let folded = v.map(f64::abs);
        let ev = (&ops.a_total * &v).dot(&v);
        let ef = (&ops.a_total * &folded).dot(&folded);
        prop_assert!(ef <= ev + 1e-10 * ev.abs().max(1.0), "{ef} > {ev}");
    }

    #[test]
    fn reconstruction_is_kernel_average_of_omega_values(
        values in prop::collection::vec(-5.0_f64..5.0, 23),
        which in 0_usize..7,
    ) {
        let (mesh, ops) = reference();
        let u = GridFunction::from_free(mesh, &DVector::from_vec(values));
        // Restrict attention to the Ω range the average is taken over.
        let (lo_node, hi_node) = (0, mesh.n_omega_elements);
        let mut min_u = f64::INFINITY;
        let mut max_u = f64::NEG_INFINITY;
        for i in lo_node..=hi_node {
            min_u = min_u.min(u.values[i]);
            max_u = max_u.max(u.values[i]);
        }
        let collar: Vec<f64> = (0..mesh.n_nodes())
            .filter(|&i| mesh.region[i] == Region::Collar)
            .map(|i| mesh.nodes[i])
            .collect();
        let x = collar[which % collar.len()];
        let rec = nonlocal_neumann_reconstruction(ops, &u, x).unwrap();
        prop_assert!(rec >= min_u - 1e-10 && rec <= max_u + 1e-10, "{min_u} <= {rec} <= {max_u}");
    }

    #[test]
    fn meshes_partition_the_window(
        a in -2.0_f64..2.0,
        len_steps in 4_u32..40,
        collar_steps in 2_u32..20,
        inv_h in 1_u32..4,
    ) {
        // Build commensurate geometry so construction always succeeds.
        let h = 0.25 / inv_h as f64;
        let spec = DomainSpec {
            a,
            b: a + len_steps as f64 * h,
            collar_width: collar_steps as f64 * h,
            s: 0.5,
            kernel_constant: 1.0,
        };
        let mesh = build_mesh(spec, h).unwrap();
        let mut counts = [0_usize; 4];
        for r in &mesh.region {
            counts[match r {
                Region::Dirichlet => 0,
                Region::Omega => 1,
                Region::Interface => 2,
                Region::Collar => 3,
            }] += 1;
        }
        prop_assert_eq!(counts[0], 2);
        prop_assert_eq!(counts[2], 1);
        prop_assert_eq!(counts[1], len_steps as usize - 1);
        prop_assert_eq!(counts[3], collar_steps as usize - 1);
        prop_assert_eq!(counts.iter().sum::<usize>(), mesh.n_nodes());
        prop_assert_eq!(mesh.n_free() + 2, mesh.n_nodes());
    }

    #[test]
    fn truncated_nonlinearity_is_monotone_and_capped(
        v1 in -10.0_f64..10.0,
        dv in 0.0_f64..10.0,
        n_pow in 0_u32..20,
        q in 0.05_f64..3.0,
    ) {
        let n = 2.0_f64.powi(n_pow as i32);
        let v2 = v1 + dv;
        // The truncated reaction is nonincreasing in v and capped by n^q.
        let d1 = g_n_derivative(v1, n, q);
        let d2 = g_n_derivative(v2, n, q);
        prop_assert!(d1 <= n.powf(q) * (1.0 + 1e-12));
        prop_assert!(d2 <= d1 * (1.0 + 1e-12));
        // Its primitive is nondecreasing in v.
        let (g1, g2) = (g_n(v1, n, q), g_n(v2, n, q));
        prop_assert!(g2 >= g1 - 1e-9 * (1.0 + g1.abs()));
    }
}
