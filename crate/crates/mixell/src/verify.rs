//! Named invariants and the suites that check them.
//!
//! Every promise the other modules make is reduced to a short identifier
//! (DM, OP, EL, SF, SL, NL, XC prefixes) with a runnable check. The
//! command line and the test tree share these suites, and a run manifest
//! must list every identifier exactly once with a pass, fail or skip
//! status, so nothing drops out of the net silently. XC1 and XC2 concern
//! the experiment runner itself; the library declares them and the runner
//! produces their outcomes.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::domain::{build_mesh, dirichlet_tail_weight, DomainSpec, Mesh, Region};
use crate::elliptic::{first_eigenpair, solve_linear};
use crate::error::Result;
use crate::gridfn::GridFunction;
use crate::nehari::{
    coercivity_check, fiber_analyze, lambda_star, solve_pair, Branch, NehariPair,
    PerturbedParams,
};
use crate::operators::{
    assemble, energy_norm_sq, nonlocal_neumann_reconstruction,
};
use crate::oracle::dense_smallest_eigenpair;
use crate::singular::{run_schedule, run_schedule_from, transformed_energy_bound};
use crate::sobolev::{constant_from_limit, dual_route_report, verify_inequality};

/// Outcome status of one named invariant.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Skip => "skip",
        }
    }
}

/// One named invariant with its outcome and a human-readable measurement.
#[derive(Debug, Clone)]
pub struct InvariantOutcome {
    pub id: &'static str,
    pub status: Status,
    pub detail: String,
}

impl InvariantOutcome {
    fn of(id: &'static str, ok: bool, detail: String) -> Self {
        InvariantOutcome {
            id,
            status: if ok { Status::Pass } else { Status::Fail },
            detail,
        }
    }
}

/// Registry entry: the identifier, owning module, and a one-line summary.
#[derive(Debug, Clone, Copy)]
pub struct InvariantInfo {
    pub id: &'static str,
    pub module: &'static str,
    pub summary: &'static str,
}

/// Every named invariant, in manifest order.
pub const REGISTRY: [InvariantInfo; 25] = [
    InvariantInfo { id: "DM1", module: "domain", summary: "region tags partition the node set" },
    InvariantInfo { id: "DM2", module: "domain", summary: "tail weight positive and unchanged under refinement" },
    InvariantInfo { id: "OP1", module: "operators", summary: "discrete Poincare constant positive and stable under refinement" },
    InvariantInfo { id: "OP2", module: "operators", summary: "assembled matrices symmetric to 1e-12 relative" },
    InvariantInfo { id: "OP3", module: "operators", summary: "nonlocal entries stable under quadrature refinement" },
    InvariantInfo { id: "OP4", module: "operators", summary: "Gagliardo matrix linear in the kernel constant" },
    InvariantInfo { id: "EL1", module: "elliptic", summary: "nonnegative data give positive solutions inside Omega" },
    InvariantInfo { id: "EL2", module: "elliptic", summary: "solution sup norms bounded by the f=1 envelope" },
    InvariantInfo { id: "EL3", module: "elliptic", summary: "collar values agree with the kernel-average reconstruction" },
    InvariantInfo { id: "SF1", module: "singular", summary: "regularized levels increase monotonically" },
    InvariantInfo { id: "SF2", module: "singular", summary: "interior minimum uniform across the schedule" },
    InvariantInfo { id: "SF3", module: "singular", summary: "level energies non-decreasing" },
    InvariantInfo { id: "SF4", module: "singular", summary: "energy identity of the singular limit (q < 1)" },
    InvariantInfo { id: "SF5", module: "singular", summary: "schedule limit independent of the initial iterate" },
    InvariantInfo { id: "SF6", module: "singular", summary: "transformed energy bound (q > 1)" },
    InvariantInfo { id: "SL1", module: "sobolev", summary: "absolute value does not increase the energy" },
    InvariantInfo { id: "SL2", module: "sobolev", summary: "only multiples of the extremal achieve equality" },
    InvariantInfo { id: "SL3", module: "sobolev", summary: "route agreement survives refinement" },
    InvariantInfo { id: "NL1", module: "nehari", summary: "fiber maps keep the two-root structure below lambda*" },
    InvariantInfo { id: "NL2", module: "nehari", summary: "converged minimizers avoid the degenerate set" },
    InvariantInfo { id: "NL3", module: "nehari", summary: "plus branch bounded, minus branch away from zero" },
    InvariantInfo { id: "NL4", module: "nehari", summary: "coercivity bound holds along descent trajectories" },
    InvariantInfo { id: "NL5", module: "nehari", summary: "both branches satisfy the weak form to tolerance" },
    InvariantInfo { id: "XC1", module: "cli", summary: "identical configs and seeds reproduce identical artifacts" },
    InvariantInfo { id: "XC2", module: "cli", summary: "the manifest covers every invariant exactly once" },
];

/// Everything a suite run needs; `Default` is the reference desk setup.
#[derive(Debug, Clone)]
pub struct VerifySettings {
    pub spec: DomainSpec,
    pub h: f64,
    pub quad_order: usize,
    pub q: f64,
    pub p: f64,
    pub schedule: Vec<u64>,
    pub seeds: Vec<u64>,
    pub linear_tol: f64,
    pub outer_tol: f64,
    pub eigen_tol: f64,
    pub opt_tol: f64,
    pub nehari_tol: f64,
    /// Mesh-level tolerance for the pointwise collar reconstruction.
    pub recon_tol: f64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings {
            spec: DomainSpec {
                a: 0.0,
                b: 1.0,
                collar_width: 0.5,
                s: 0.5,
                kernel_constant: 1.0,
            },
            h: 1.0 / 32.0,
            quad_order: 6,
            q: 0.5,
            p: 3.0,
            schedule: vec![1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024],
            seeds: vec![1, 2, 3, 4, 5],
            linear_tol: 1e-12,
            outer_tol: 1e-11,
            eigen_tol: 1e-12,
            opt_tol: 1e-12,
            nehari_tol: 1e-10,
            recon_tol: 0.02,
        }
    }
}

impl VerifySettings {
    /// Sub-unit exponent for the parts of the theory that need q < 1.
    fn q_sub(&self) -> f64 {
        if self.q > 0.0 && self.q < 1.0 {
            self.q
        } else {
            0.5
        }
    }

    /// Super-unit exponent for the transformed-bound regime.
    fn q_super(&self) -> f64 {
        if self.q > 1.0 {
            self.q
        } else {
            2.0
        }
    }

    fn mesh(&self) -> Result<Mesh> {
        build_mesh(self.spec, self.h)
    }

    fn refined_mesh(&self) -> Result<Mesh> {
        build_mesh(self.spec, 0.5 * self.h)
    }
}

fn fail_all(ids: &[&'static str], err: &crate::error::Error) -> Vec<InvariantOutcome> {
    ids.iter()
        .map(|id| InvariantOutcome {
            id,
            status: Status::Fail,
            detail: format!("suite aborted: {err}"),
        })
        .collect()
}

/// DM1, DM2.
pub fn suite_domain(st: &VerifySettings) -> Vec<InvariantOutcome> {
    let ids = ["DM1", "DM2"];
    let inner = || -> Result<Vec<InvariantOutcome>> {
        let mesh = st.mesh()?;
        let fine = st.refined_mesh()?;
        let mut out = Vec::new();

        // DM1: each node carries exactly the tag its coordinate demands,
        // spacing is uniform, the endpoints are the only constrained nodes,
        // and a misaligned spacing is rejected.
        let mut dm1_ok = true;
        let mut detail = String::new();
        let last = mesh.n_elements;
        for (i, &x) in mesh.nodes.iter().enumerate() {
            let expected = if i == 0 || i == last {
                Region::Dirichlet
            } else if i < mesh.n_omega_elements {
                Region::Omega
            } else if i == mesh.n_omega_elements {
                Region::Interface
            } else {
                Region::Collar
            };
            if mesh.region[i] != expected {
                dm1_ok = false;
                detail = format!("node {i} at x = {x} tagged {:?}", mesh.region[i]);
                break;
            }
            let aligned = (x - (st.spec.a + i as f64 * mesh.h)).abs() <= 1e-12 * (1.0 + x.abs());
            if !aligned {
                dm1_ok = false;
                detail = format!("node {i} off the uniform grid: {x}");
                break;
            }
        }
        let free_count = mesh.n_free() == mesh.n_nodes() - 2;
        let interface_free = mesh.free_of_node[mesh.n_omega_elements].is_some();
        let misaligned = build_mesh(st.spec, (st.spec.b - st.spec.a) * 0.3).is_err();
        if dm1_ok && free_count && interface_free && misaligned {
            detail = format!(
                "{} nodes, {} free, interface at x = {}",
                mesh.n_nodes(),
                mesh.n_free(),
                mesh.nodes[mesh.n_omega_elements]
            );
        } else if detail.is_empty() {
            detail = format!(
                "free-count {free_count}, interface-free {interface_free}, misalignment rejected {misaligned}"
            );
        }
        out.push(InvariantOutcome::of(
            "DM1",
            dm1_ok && free_count && interface_free && misaligned,
            detail,
        ));

        // DM2: strict positivity across the open window, invariance of
        // nodal weights under refinement, and a continuity probe.
        let mut dm2_ok = true;
        let mut worst = 0.0_f64;
        for i in 1..mesh.n_elements {
            let x = mesh.nodes[i];
            let w = dirichlet_tail_weight(&st.spec, x);
            if !(w > 0.0) || !w.is_finite() {
                dm2_ok = false;
            }
            let w_fine = dirichlet_tail_weight(&fine.spec, fine.nodes[2 * i]);
            let drift = (w - w_fine).abs() / w.abs().max(1e-300);
            worst = worst.max(drift);
            let probe = dirichlet_tail_weight(&st.spec, x + 1e-7 * mesh.h);
            if (probe - w).abs() > 1e-4 * w.abs() {
                dm2_ok = false;
            }
        }
        dm2_ok = dm2_ok && worst <= 1e-12;
        out.push(InvariantOutcome::of(
            "DM2",
            dm2_ok,
            format!("max nodal drift under refinement {worst:.3e}"),
        ));
        Ok(out)
    };
    inner().unwrap_or_else(|e| fail_all(&ids, &e))
}

fn symmetry_defect(m: &nalgebra::DMatrix<f64>) -> f64 {
    let scale = m.amax().max(1e-300);
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst / scale
}

fn entry_drift(a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>) -> f64 {
    let floor = 1e-12 * a.amax().max(b.amax());
    let mut worst = 0.0_f64;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let d = (a[(i, j)] - b[(i, j)]).abs();
            worst = worst.max(d / a[(i, j)].abs().max(b[(i, j)].abs()).max(floor));
        }
    }
    worst
}

/// OP1 through OP4.
pub fn suite_operators(st: &VerifySettings) -> Vec<InvariantOutcome> {
    let ids = ["OP1", "OP2", "OP3", "OP4"];
    let inner = || -> Result<Vec<InvariantOutcome>> {
        let mesh = st.mesh()?;
        let fine = st.refined_mesh()?;
        let ops = assemble(&mesh, st.quad_order)?;
        let ops_fine = assemble(&fine, st.quad_order)?;
        let mut out = Vec::new();

        let (pc, _) = dense_smallest_eigenpair(&ops.a_total, &ops.m_full)?;
        let (pf, _) = dense_smallest_eigenpair(&ops_fine.a_total, &ops_fine.m_full)?;
        let stable = pc > 0.0 && pf > 0.0 && (pf - pc).abs() <= 0.2 * pc;
        out.push(InvariantOutcome::of(
            "OP1",
            stable,
            format!("Poincare constant {pc:.6e} -> {pf:.6e} under refinement"),
        ));

        let worst_sym = [&ops.a_loc, &ops.a_nl, &ops.m_omega, &ops.m_full]
            .iter()
            .map(|m| symmetry_defect(m))
            .fold(0.0_f64, f64::max);
        out.push(InvariantOutcome::of(
            "OP2",
            worst_sym <= 1e-12,
            format!("worst symmetry defect {worst_sym:.3e} relative"),
        ));

        let richer = assemble(&mesh, st.quad_order + 4)?;
        let drift = entry_drift(&ops.a_nl, &richer.a_nl);
        out.push(InvariantOutcome::of(
            "OP3",
            drift < 1e-8,
            format!("max entry drift {drift:.3e} adding four quadrature points"),
        ));

        let mut scaled_spec = st.spec;
        scaled_spec.kernel_constant = 2.5 * st.spec.kernel_constant;
        let scaled = assemble(&build_mesh(scaled_spec, st.h)?, st.quad_order)?;
        let mut kappa_ok = scaled.a_loc == ops.a_loc;
        let mut worst_kappa = 0.0_f64;
        let floor = 1e-12 * ops.a_nl.amax();
        for i in 0..ops.a_nl.nrows() {
            for j in 0..ops.a_nl.ncols() {
                let d = (scaled.a_nl[(i, j)] - 2.5 * ops.a_nl[(i, j)]).abs();
                worst_kappa = worst_kappa.max(d / (2.5 * ops.a_nl[(i, j)].abs()).max(floor));
            }
        }
        kappa_ok = kappa_ok && worst_kappa <= 1e-13;
        out.push(InvariantOutcome::of(
            "OP4",
            kappa_ok,
            format!("kappa-scaling defect {worst_kappa:.3e}, local part unchanged"),
        ));
        Ok(out)
    };
    inner().unwrap_or_else(|e| fail_all(&ids, &e))
}

/// EL1 through EL3.
pub fn suite_elliptic(st: &VerifySettings) -> Vec<InvariantOutcome> {
    let ids = ["EL1", "EL2", "EL3"];
    let inner = || -> Result<Vec<InvariantOutcome>> {
        let mesh = st.mesh()?;
        let ops = assemble(&mesh, st.quad_order)?;
        let max_iter = 40 * ops.a_total.nrows() + 200;
        let mut out = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(0xe11);

        // EL1: twenty nonnegative, not identically zero right sides.
        let mut positive_ok = true;
        let mut worst_min = f64::INFINITY;
        for _ in 0..20 {
            let f = GridFunction::from_fn(&mesh, |_| rng.random_range(0.0..1.0));
            let report = solve_linear(&ops, &f, st.linear_tol, max_iter)?;
            let m = report.u.min_omega(&mesh);
            worst_min = worst_min.min(m);
            if !(m > 0.0) {
                positive_ok = false;
            }
        }
        out.push(InvariantOutcome::of(
            "EL1",
            positive_ok,
            format!("smallest interior value across 20 solves {worst_min:.3e}"),
        ));

        // EL2: the f = 1 solution dominates |u| for any |f| <= 1 by
        // inverse monotonicity, so sup|u| / sup|f| is capped by its sup.
        let ones = GridFunction::from_fn(&mesh, |_| 1.0);
        let envelope = solve_linear(&ops, &ones, st.linear_tol, max_iter)?;
        let cap = envelope.u.sup_norm();
        let mut ratio_ok = true;
        let mut worst_ratio = 0.0_f64;
        for _ in 0..20 {
            let f = GridFunction::from_fn(&mesh, |_| rng.random_range(-1.0..1.0));
            let sup_f = f.sup_norm();
            let report = solve_linear(&ops, &f, st.linear_tol, max_iter)?;
            let ratio = report.u.sup_norm() / sup_f.max(1e-300);
            worst_ratio = worst_ratio.max(ratio);
            if ratio > cap * (1.0 + 1e-8) {
                ratio_ok = false;
            }
        }
        out.push(InvariantOutcome::of(
            "EL2",
            ratio_ok,
            format!("max sup ratio {worst_ratio:.6e} against envelope {cap:.6e}"),
        ));

        // EL3: solved collar values against the kernel-weighted average of
        // the Omega values, on the inner half of the collar. The pinned
        // node at b + w forces a boundary layer a few nodes wide where the
        // discrete profile dives to zero while the kernel average cannot;
        // away from it the agreement is at discretization level.
        let u = envelope.u;
        let mut worst_recon = 0.0_f64;
        let sup = u.sup_norm().max(1e-300);
        let inner_end = st.spec.b + 0.5 * st.spec.collar_width + 1e-12;
        for i in 0..mesh.n_nodes() {
            if mesh.region[i] == Region::Collar && mesh.nodes[i] <= inner_end {
                let rec = nonlocal_neumann_reconstruction(&ops, &u, mesh.nodes[i])?;
                worst_recon = worst_recon.max((rec - u.values[i]).abs() / sup);
            }
        }
        out.push(InvariantOutcome::of(
            "EL3",
            worst_recon <= st.recon_tol,
            format!("worst inner-collar reconstruction gap {worst_recon:.3e} of sup"),
        ));
        Ok(out)
    };
    inner().unwrap_or_else(|e| fail_all(&ids, &e))
}

/// SF1 through SF6.
pub fn suite_singular(st: &VerifySettings) -> Vec<InvariantOutcome> {
    let ids = ["SF1", "SF2", "SF3", "SF4", "SF5", "SF6"];
    let inner = || -> Result<Vec<InvariantOutcome>> {
        let mesh = st.mesh()?;
        let ops = assemble(&mesh, st.quad_order)?;
        let max_outer = 600;
        let q = st.q_sub();
        let run = run_schedule(&ops, q, &st.schedule, st.outer_tol, max_outer)?;
        let mut out = Vec::new();

        out.push(InvariantOutcome::of(
            "SF1",
            run.max_monotonicity_defect <= 1e-8,
            format!("max nodal drop {:.3e} at q = {q}", run.max_monotonicity_defect),
        ));

        let (lo, hi) = mesh.interior_window();
        let first_min = run.levels[0].u.min_on(&mesh, lo, hi);
        let sched_min = run
            .levels
            .iter()
            .map(|l| l.u.min_on(&mesh, lo, hi))
            .fold(f64::INFINITY, f64::min);
        out.push(InvariantOutcome::of(
            "SF2",
            sched_min > 0.0 && sched_min >= first_min * (1.0 - 1e-12),
            format!("interior minimum {sched_min:.6e}, first level {first_min:.6e}"),
        ));

        let mut energy_ok = true;
        let mut worst_drop = 0.0_f64;
        for w in run.levels.windows(2) {
            let drop = w[0].energy_sq - w[1].energy_sq;
            worst_drop = worst_drop.max(drop);
            if drop > 1e-10 * w[0].energy_sq.max(1.0) {
                energy_ok = false;
            }
        }
        out.push(InvariantOutcome::of(
            "SF3",
            energy_ok,
            format!("worst energy drop {worst_drop:.3e}"),
        ));

        let gap = run.limit.identity_gap.unwrap_or(f64::INFINITY);
        out.push(InvariantOutcome::of(
            "SF4",
            gap <= 1e-6 * run.limit.energy_sq,
            format!("identity gap {gap:.3e} against energy {:.6e}", run.limit.energy_sq),
        ));

        let ones = GridFunction::from_fn(&mesh, |_| 1.0);
        let warm = solve_linear(&ops, &ones, st.linear_tol, 40 * ops.a_total.nrows() + 200)?;
        let other = run_schedule_from(&ops, q, &st.schedule, st.outer_tol, max_outer, &warm.u)?;
        let diff = GridFunction {
            values: &run.limit.u_hat.values - &other.limit.u_hat.values,
        };
        let sep = energy_norm_sq(&ops, &diff)?.max(0.0).sqrt();
        out.push(InvariantOutcome::of(
            "SF5",
            sep <= 1e-6,
            format!("energy distance {sep:.3e} between the two limits"),
        ));

        let q_hi = st.q_super();
        let run_hi = run_schedule(&ops, q_hi, &st.schedule, st.outer_tol, max_outer)?;
        let bound = transformed_energy_bound(&ops, &run_hi)?;
        out.push(InvariantOutcome::of(
            "SF6",
            bound.satisfied,
            format!(
                "max transformed energy {:.6e} against bound {:.6e} at q = {q_hi}",
                bound.max_energy_sq, bound.bound
            ),
        ));
        Ok(out)
    };
    inner().unwrap_or_else(|e| fail_all(&ids, &e))
}

/// SL1 through SL3.
pub fn suite_sobolev(st: &VerifySettings) -> Vec<InvariantOutcome> {
    let ids = ["SL1", "SL2", "SL3"];
    let inner = || -> Result<Vec<InvariantOutcome>> {
        let mesh = st.mesh()?;
        let ops = assemble(&mesh, st.quad_order)?;
        let q = st.q_sub();
        let mut out = Vec::new();

        // SL1: folding to |v| can only shed energy (the off-diagonal
        // entries of A are nonpositive).
        let mut rng = ChaCha8Rng::seed_from_u64(0x50b);
        let n = ops.a_total.nrows();
        let mut fold_ok = true;
        let mut worst_excess = f64::NEG_INFINITY;
        for _ in 0..200 {
            let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let folded = v.map(f64::abs);
            let ev = (&ops.a_total * &v).dot(&v);
            let ef = (&ops.a_total * &folded).dot(&folded);
            let excess = ef - ev;
            worst_excess = worst_excess.max(excess);
            if excess > 1e-12 * ev.abs().max(1.0) {
                fold_ok = false;
            }
        }
        out.push(InvariantOutcome::of(
            "SL1",
            fold_ok,
            format!("worst energy excess after folding {worst_excess:.3e}"),
        ));

        // SL2: scaled copies of the extremal achieve equality and nothing
        // else tested does; equality holders align with the extremal in
        // the A-inner product.
        let run = run_schedule(&ops, q, &st.schedule, st.outer_tol, 600)?;
        let (r, extremal) = constant_from_limit(&ops, &run.limit, q)?;
        let ve = extremal.free(&mesh);
        let e_ext = (&ops.a_total * &ve).dot(&ve);
        let mut sl2_ok = true;
        let mut worst_cos = 1.0_f64;
        for scale in [2.0, -1.0, 0.3] {
            let w = GridFunction::from_free(&mesh, &(scale * &ve));
            let check = verify_inequality(&ops, q, &w, r)?;
            let gap = (check.lhs - check.rhs).abs() / check.lhs.abs().max(1e-300);
            if gap > 1e-9 {
                sl2_ok = false;
            }
            let wf = w.free(&mesh);
            let cos = (&ops.a_total * &wf).dot(&ve).abs()
                / ((&ops.a_total * &wf).dot(&wf).max(1e-300) * e_ext).sqrt();
            worst_cos = worst_cos.min(cos);
            if cos < 1.0 - 1e-6 {
                sl2_ok = false;
            }
        }
        // A transverse perturbation must leave the equality set.
        let mut bumped = ve.clone();
        let mid = n / 3;
        bumped[mid] *= 1.08;
        let wb = GridFunction::from_free(&mesh, &bumped);
        let check_b = verify_inequality(&ops, q, &wb, r)?;
        let gap_b = (check_b.lhs - check_b.rhs) / check_b.lhs.abs().max(1e-300);
        if !check_b.ok || gap_b <= 1e-9 {
            sl2_ok = false;
        }
        out.push(InvariantOutcome::of(
            "SL2",
            sl2_ok,
            format!("worst alignment {worst_cos:.12}, perturbed gap {gap_b:.3e}"),
        ));

        // SL3: the route disagreement does not grow from h to h/2. Both
        // routes share the lumped constraint, so the gaps sit at solver
        // level; below the 1e-8 floor their ordering is noise.
        let report = dual_route_report(&ops, &run.limit, q, &st.seeds, st.opt_tol, 4000, 100)?;
        let fine_mesh = st.refined_mesh()?;
        let fine_ops = assemble(&fine_mesh, st.quad_order)?;
        let fine_run = run_schedule(&fine_ops, q, &st.schedule, st.outer_tol, 600)?;
        let fine_report =
            dual_route_report(&fine_ops, &fine_run.limit, q, &st.seeds, st.opt_tol, 4000, 100)?;
        out.push(InvariantOutcome::of(
            "SL3",
            fine_report.relative_gap < report.relative_gap.max(1e-8),
            format!(
                "route gap {:.3e} -> {:.3e} under refinement",
                report.relative_gap, fine_report.relative_gap
            ),
        ));
        Ok(out)
    };
    inner().unwrap_or_else(|e| fail_all(&ids, &e))
}

/// NL1 through NL5.
pub fn suite_nehari(st: &VerifySettings) -> Vec<InvariantOutcome> {
    let ids = ["NL1", "NL2", "NL3", "NL4", "NL5"];
    let inner = || -> Result<Vec<InvariantOutcome>> {
        let mesh = st.mesh()?;
        let ops = assemble(&mesh, st.quad_order)?;
        let q = st.q_sub();
        let p = st.p;
        let eigen = first_eigenpair(&ops, st.eigen_tol, 600)?;
        let stars = lambda_star(&ops, q, p, &st.seeds, st.opt_tol, 2000)?;
        let mut out = Vec::new();

        // NL1: fifty random rays at half the threshold.
        let params_half = PerturbedParams {
            lambda: 0.5 * stars.lambda_star,
            q,
            p,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0x41e);
        let n = ops.a_total.nrows();
        let mut nl1_ok = true;
        let mut worst_phi1 = 0.0_f64;
        for _ in 0..50 {
            let u = GridFunction::from_free(
                &mesh,
                &DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)),
            );
            match fiber_analyze(&ops, &params_half, &u) {
                Err(_) => {
                    nl1_ok = false;
                }
                Ok(fiber) => {
                    if !(fiber.t_minus < fiber.t_max && fiber.t_max < fiber.t_plus) {
                        nl1_ok = false;
                    }
                    if !(fiber.curvature_minus > 0.0 && fiber.curvature_plus < 0.0) {
                        nl1_ok = false;
                    }
                    for t in [fiber.t_minus, fiber.t_plus] {
                        let phi1 = t * fiber.eta_sq
                            - params_half.lambda * t.powf(-q) * fiber.m_int
                            - t.powf(p) * fiber.n_int;
                        let rel = phi1.abs() / fiber.eta_sq;
                        worst_phi1 = worst_phi1.max(rel);
                        if rel > 1e-8 {
                            nl1_ok = false;
                        }
                    }
                }
            }
        }
        out.push(InvariantOutcome::of(
            "NL1",
            nl1_ok,
            format!("worst |Phi'| at roots {worst_phi1:.3e} of eta^2 over 50 rays"),
        ));

        // The sweep shared by NL2 through NL5.
        let mut pairs: Vec<(f64, NehariPair)> = Vec::new();
        let mut sweep_err: Option<crate::error::Error> = None;
        for frac in [0.1, 0.3, 0.5] {
            let params = PerturbedParams {
                lambda: frac * stars.lambda_star,
                q,
                p,
            };
            match solve_pair(&ops, &params, &eigen, &st.seeds, st.nehari_tol, 400) {
                Ok(pair) => pairs.push((params.lambda, pair)),
                Err(e) => {
                    sweep_err = Some(e);
                    break;
                }
            }
        }
        if let Some(e) = sweep_err {
            for id in ["NL2", "NL3", "NL4", "NL5"] {
                out.push(InvariantOutcome {
                    id,
                    status: Status::Fail,
                    detail: format!("two-solution sweep failed: {e}"),
                });
            }
            return Ok(out);
        }

        let mut nl2_ok = true;
        let mut min_curv = f64::INFINITY;
        let mut nl3_ok = true;
        let mut detail3 = String::new();
        let plus_cap =
            |lambda: f64| (lambda * stars.c_1mq * (p + q) / (p - 1.0)).powf(1.0 / (1.0 + q));
        let minus_floor = ((1.0 + q) / ((p + q) * stars.c_p1)).powf(1.0 / (p - 1.0));
        let mut nl4_ok = true;
        let mut worst_margin = f64::INFINITY;
        let mut nl5_ok = true;
        let mut worst_res = 0.0_f64;
        for (lambda, pair) in &pairs {
            for sol in [&pair.plus, &pair.minus] {
                let eta_sq = sol.fiber.eta_sq;
                let curv = match sol.branch {
                    Branch::Plus => sol.fiber.curvature_minus,
                    Branch::Minus => sol.fiber.curvature_plus,
                };
                if eta_sq.sqrt() > 1e-6 && curv.abs() <= 1e-8 * eta_sq {
                    nl2_ok = false;
                }
                min_curv = min_curv.min(curv.abs() / eta_sq);
                worst_res = worst_res.max(sol.residual);
                if sol.residual > st.nehari_tol {
                    nl5_ok = false;
                }
            }
            let eta_plus = pair.plus.fiber.eta_sq.sqrt();
            let eta_minus = pair.minus.fiber.eta_sq.sqrt();
            if eta_plus > plus_cap(*lambda) * (1.0 + 1e-6) {
                nl3_ok = false;
                detail3 = format!("plus branch eta {eta_plus:.6e} above cap {:.6e}", plus_cap(*lambda));
            }
            if eta_minus < minus_floor * (1.0 - 1e-6) {
                nl3_ok = false;
                detail3 = format!("minus branch eta {eta_minus:.6e} below floor {minus_floor:.6e}");
            }
            let params = PerturbedParams { lambda: *lambda, q, p };
            let check = coercivity_check(&params, stars.c_1mq, &pair.plus)?;
            worst_margin = worst_margin.min(check.worst_margin);
            if !check.ok {
                nl4_ok = false;
            }
        }
        out.push(InvariantOutcome::of(
            "NL2",
            nl2_ok,
            format!("smallest |Phi''(1)| / eta^2 among minimizers {min_curv:.3e}"),
        ));
        if detail3.is_empty() {
            detail3 = format!(
                "plus caps respected, minus floor {minus_floor:.6e} respected across the sweep"
            );
        }
        out.push(InvariantOutcome::of("NL3", nl3_ok, detail3));
        out.push(InvariantOutcome::of(
            "NL4",
            nl4_ok,
            format!("worst trajectory margin {worst_margin:.3e}"),
        ));
        out.push(InvariantOutcome::of(
            "NL5",
            nl5_ok,
            format!("worst weak residual {worst_res:.3e} against tolerance {:.1e}", st.nehari_tol),
        ));
        Ok(out)
    };
    inner().unwrap_or_else(|e| fail_all(&ids, &e))
}

/// Runs every library suite (XC outcomes come from the experiment runner).
pub fn run_all(st: &VerifySettings) -> Vec<InvariantOutcome> {
    let mut out = Vec::new();
    out.extend(suite_domain(st));
    out.extend(suite_operators(st));
    out.extend(suite_elliptic(st));
    out.extend(suite_singular(st));
    out.extend(suite_sobolev(st));
    out.extend(suite_nehari(st));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn registry_ids_are_unique_and_complete() {
        let ids: HashSet<&str> = REGISTRY.iter().map(|e| e.id).collect();
        assert_eq!(ids.len(), REGISTRY.len());
        for prefix in ["DM", "OP", "EL", "SF", "SL", "NL", "XC"] {
            assert!(
                REGISTRY.iter().any(|e| e.id.starts_with(prefix)),
                "missing prefix {prefix}"
            );
        }
    }

    #[test]
    fn library_suites_cover_everything_but_the_cli_pair() {
        let st = VerifySettings {
            h: 1.0 / 16.0,
            schedule: vec![1, 4, 16, 64],
            seeds: vec![1, 2],
            ..VerifySettings::default()
        };
        let outcomes = run_all(&st);
        let got: Vec<&str> = outcomes.iter().map(|o| o.id).collect();
        let expected: Vec<&str> = REGISTRY
            .iter()
            .map(|e| e.id)
            .filter(|id| !id.starts_with("XC"))
            .collect();
        assert_eq!(got, expected);
        for o in &outcomes {
            assert_eq!(o.status, Status::Pass, "{}: {}", o.id, o.detail);
        }
    }
}
