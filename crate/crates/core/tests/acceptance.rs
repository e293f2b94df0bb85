//! Acceptance suite: one block per criterion, each clause printed as a
//! PASS/FAIL line. Runs sequentially so the wall-clock budgets are meaningful.

use std::process::ExitCode;
use std::time::Instant;

use gflow_core::cylinder::*;
use gflow_core::entropy::*;
use gflow_core::hodge::{self, samples, Stencil};
use gflow_core::shooter::{shoot_r3_branch, ShootConfig};
use gflow_core::warped::{convention_check, ode_residuals, tensor_residuals, WarpedSolitonData};

struct Criterion {
    id: &'static str,
    title: &'static str,
    budget_s: f64,
    clauses: Vec<(bool, String)>,
}

impl Criterion {
    fn new(id: &'static str, title: &'static str, budget_s: f64) -> Self {
        Self {
            id,
            title,
            budget_s,
            clauses: Vec::new(),
        }
    }

    fn check(&mut self, ok: bool, detail: impl Into<String>) {
        self.clauses.push((ok, detail.into()));
    }
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn flow(h0sq: f64) -> CylinderTrajectory {
    run_flow(CylinderState::from_h0sq(1.0, h0sq, 1.0).unwrap(), &FlowConfig::default()).unwrap()
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn sup(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}

fn closed_form_regression() -> Criterion {
    let mut c = Criterion::new("1", "closed-form regression", 1.0);
    for (h0sq, t_sing) in [(0.0, 1.0), (0.5, 2.0)] {
        let start = Instant::now();
        let traj = flow(h0sq);
        let detected = traj.t_sing.unwrap_or(f64::NAN);
        let mut times = linspace(0.0, t_sing - 0.1, 2001);
        times.extend(traj.times.iter().copied().filter(|&t| t <= t_sing - 0.1));
        let err = sup(times.iter().flat_map(|&t| {
            let s = traj.state_at(t).unwrap();
            let e = closed_form(&traj.initial, t).unwrap();
            [s.lambda - e.lambda, s.h * s.h - e.h * e.h, s.beta - e.beta]
        }));
        let elapsed = start.elapsed().as_secs_f64();
        c.check(err < 1e-8, format!("h0^2={h0sq}: sup error on [0, T-0.1] = {err:.2e} (< 1e-8)"));
        c.check(
            (detected - t_sing).abs() < 1e-5,
            format!("h0^2={h0sq}: T_sing = {detected:.12} (expected {t_sing} within 1e-5)"),
        );
        c.check(elapsed < c.budget_s, format!("h0^2={h0sq}: runtime {elapsed:.3} s (< 1 s)"));
    }
    c
}

/// Rounding allowance for steps of `λh²`, absolute.
const MONOTONE_SLACK: f64 = 1e-14;

fn diagnostics() -> Criterion {
    let mut c = Criterion::new("2", "conserved and monotone diagnostics", 5.0);
    for h0sq in [0.05, 0.1, 0.3, 0.7, 1.5] {
        let traj = flow(h0sq);
        let drift = traj.conservation_drift();
        let violations = traj.monotonicity_violations(MONOTONE_SLACK);
        c.check(drift < 1e-9, format!("h0^2={h0sq}: lambda*h*beta drift {drift:.2e} (< 1e-9)"));
        c.check(traj.u_sign_constant(), format!("h0^2={h0sq}: sign(1/2 - lambda h^2) constant"));
        c.check(
            violations == 0,
            format!(
                "h0^2={h0sq}: {violations} monotonicity violations beyond {MONOTONE_SLACK:.0e} over {} steps",
                traj.len()
            ),
        );
    }
    c
}

fn blowup() -> Criterion {
    let mut c = Criterion::new("3", "blowup limit", 10.0);
    for h0sq in [0.1, 0.3, 0.7] {
        let rep = blowup_analysis(&flow(h0sq), DEFAULT_BLOWUP_SAMPLES).unwrap();
        let lim = rep.lambda_h2_limit;
        c.check(
            rep.limit_ok(1e-4),
            format!(
                "h0^2={h0sq}: extrapolated lambda h^2 -> {:.10} +- {:.1e} (0.5 +- 1e-4)",
                lim.limit, lim.error_bar
            ),
        );
        let before = rep.opening_exceeds_at.map_or(false, |t| t < rep.t_sing);
        c.check(
            before,
            format!(
                "h0^2={h0sq}: beta^2/lambda passes 1e6 at t = {:?} before T_sing = {:.10}",
                rep.opening_exceeds_at, rep.t_sing
            ),
        );
    }
    c
}

fn torsion() -> Criterion {
    let mut c = Criterion::new("4", "torsion divergence witness", 2.0);
    let traj = flow(0.5);
    let rel = sup(linspace(0.0, 1.9, 1901).into_iter().skip(1).map(|t| {
        let exact = 6.0 * (2.0 / (2.0 - t)).ln();
        (traj.torsion_integral_at(t).unwrap() - exact) / exact
    }));
    let at_zero = traj.torsion_integral_at(0.0).unwrap();
    c.check(
        rel < 1e-6 && at_zero == 0.0,
        format!("I(t) vs 6 ln(2/(2-t)) on [0, 1.9]: max relative error {rel:.2e} (< 1e-6), I(0) = {at_zero}"),
    );
    let rep = torsion_divergence(&traj, Some(12.0)).unwrap();
    c.check(
        (rep.fitted_c - 6.0).abs() < 0.1,
        format!("fitted log coefficient {:.8} (6 +- 0.1)", rep.fitted_c),
    );
    let want = 2.0 - 2.0 * (-2.0f64).exp();
    let got = rep.crossing_time.unwrap_or(f64::NAN);
    c.check(
        (got - want).abs() < 1e-4,
        format!("psi0 = 12 crossing at {got:.8} (expected {want:.8} +- 1e-4)"),
    );
    c
}

fn soliton_residuals() -> Criterion {
    let mut c = Criterion::new("5", "soliton residuals", 1.0);
    for (name, data) in [
        ("cylinder soliton", WarpedSolitonData::cylinder_soliton()),
        ("gaussian shrinker", WarpedSolitonData::gaussian_shrinker()),
    ] {
        let grid = data.default_grid(200);
        let ode = ode_residuals(&data, &grid).unwrap().max_abs;
        let ten = tensor_residuals(&data, &grid).unwrap().max_abs;
        c.check(
            ode < 1e-12 && ten < 1e-12 && grid.len() == 200,
            format!("{name}: ODE {ode:.2e}, tensor {ten:.2e} on 200 points (< 1e-12)"),
        );
        let conv = convention_check(&data).unwrap();
        c.check(
            conv.consistent && conv.lambda_soliton == 2.0 * conv.lambda_ode,
            format!(
                "{name}: convention check, lambda_soliton = {} = 2 x {}",
                conv.lambda_soliton, conv.lambda_ode
            ),
        );
    }
    c
}

fn shooting() -> Criterion {
    let mut c = Criterion::new("6", "shooting certificate", 1.0);
    let (rep, traj) = shoot_r3_branch(&ShootConfig::default()).unwrap();
    let m = rep.milestones;
    let finite = [m.r1, m.r2, m.r3, m.r4].iter().all(|r| r.map_or(false, f64::is_finite));
    c.check(
        finite && m.strictly_increasing(),
        format!("r1 < r2 < r3 < r4: {:?} {:?} {:?} {:?}", m.r1, m.r2, m.r3, m.r4),
    );
    let u_end = traj.last().u;
    c.check(
        rep.terminated_at_zero && u_end < 1e-6,
        format!("terminal u = {u_end:.2e} (< 1e-6)"),
    );
    c.check(
        rep.invariant_drift < 1e-9,
        format!("invariant drift {:.2e} (< 1e-9)", rep.invariant_drift),
    );
    let want = 3.0f64.powf(0.75);
    c.check(
        (rep.u_max - want).abs() < 1e-6,
        format!("u_max = {:.12} (3^(3/4) = {want:.12} +- 1e-6)", rep.u_max),
    );
    c
}

fn entropy() -> Criterion {
    let mut c = Criterion::new("7", "entropy machinery", 10.0);
    let mut worst_mass: f64 = 0.0;
    for h0sq in [0.0, 0.1, 0.5, 0.7, 1.5] {
        let traj = flow(h0sq);
        let cfg = EntropyConfig::default();
        let heat = conjugate_heat_homogeneous(&traj, cfg.initial_weight(&traj)).unwrap();
        worst_mass = worst_mass.max(mass(&traj, &heat, cfg.circle_length).max_relative_drift);
        if h0sq == 1.5 {
            continue;
        }
        let chk = entropy_derivative_check(&traj, &heat, &cfg).unwrap();
        let order = entropy_fd_order(&traj, &heat, &cfg, cfg.fd_step).unwrap();
        c.check(
            chk.max_gap < 1e-6,
            format!("h0^2={h0sq}: derivative gap {:.2e} at dt = {:.0e} (< 1e-6)", chk.max_gap, chk.fd_step),
        );
        c.check(
            (1.8..=2.2).contains(&order),
            format!("h0^2={h0sq}: FD order {order:.3} in [1.8, 2.2]"),
        );
        if h0sq == 0.0 {
            c.check(
                chk.min_formula >= 0.0,
                format!("h0=0: min formula derivative {:.4e} (>= 0 at all samples)", chk.min_formula),
            );
        }
    }
    c.check(
        worst_mass < 1e-9,
        format!("mass conservation: max relative drift {worst_mass:.2e} (< 1e-9)"),
    );

    let mut witness = None;
    let mut min_seen = f64::INFINITY;
    for h0sq in [0.05, 0.1, 0.3, 0.5, 0.7, 1.5, 3.0] {
        let traj = flow(h0sq);
        for t_ref in [None, Some(0.5 * traj.t_sing.unwrap_or(1.0))] {
            let cfg = EntropyConfig {
                t_ref,
                t_end: t_ref.map(|t| 0.9 * t),
                ..EntropyConfig::default()
            };
            let heat = conjugate_heat_homogeneous(&traj, cfg.initial_weight(&traj)).unwrap();
            let chk = entropy_derivative_check(&traj, &heat, &cfg).unwrap();
            min_seen = min_seen.min(chk.min_formula);
            if let Some(t) = chk.negative_at {
                witness.get_or_insert((h0sq, t));
            }
        }
    }
    c.check(
        witness.is_some(),
        format!(
            "non-monotonicity witness with h0 != 0: {witness:?} (smallest formula derivative seen {min_seen:.4e})"
        ),
    );
    c
}

fn pointwise() -> Criterion {
    let mut c = Criterion::new("8", "pointwise identities on the explicit soliton", 5.0);
    let data = WarpedSolitonData::cylinder_soliton();
    let grid = linspace(-3.0, 3.0, 61);
    for (name, check) in [
        ("soliton_heat_check", soliton_heat_check as fn(&_, &_, _) -> _),
        ("pointwise_monotonicity_check", pointwise_monotonicity_check),
    ] {
        let res = check(&data, &grid, 1e-4).unwrap().max_abs;
        let order = pointwise_order(check, &data, &grid, 1e-4).unwrap();
        c.check(res < 1e-5, format!("{name}: residual {res:.2e} at dt = 1e-4 on |r| <= 3 (< 1e-5)"));
        c.check(
            (1.8..=2.2).contains(&order),
            format!("{name}: order {order:.3} under halving dt (2 +- 0.2)"),
        );
    }
    c
}

fn rate_ok(rate: f64) -> bool {
    (3.5..=4.5).contains(&rate)
}

/// `4π³(I₀(1) + I₁(1))`.
const TORUS3_INTEGRAL: f64 = 227.11787379138698;

fn hodge_oracle() -> Criterion {
    let mut c = Criterion::new("9", "hodge oracle", 60.0);
    let st = Stencil::default();
    let t3 = |n| {
        let g = samples::grid(3, n, st).unwrap();
        let (f, h) = samples::torus3(&g).unwrap();
        (g, f, h)
    };
    let t4 = |n| {
        let g = samples::grid(4, n, st).unwrap();
        let (f, h) = samples::torus4_exact(&g).unwrap();
        (g, f, h)
    };

    // suobing
    let suobing_err = |n| {
        let (g, f, h) = t3(n);
        let rep = hodge::check_suobing(&f, &h).unwrap();
        let exact = samples::torus3_suobing_exact(&g).unwrap();
        let lhs = hodge::interior(&hodge::gradient(&f).unwrap(), &h).unwrap();
        (rep.residual, lhs.sub(&exact).unwrap().sup_norm())
    };
    let (res32, cf32) = suobing_err(32);
    let (res64, cf64) = suobing_err(64);
    let rate = hodge::convergence_rate(cf32, cf64, 2.0);
    c.check(
        res64 < 1e-5 && cf64 < 1e-5 && rate_ok(rate),
        format!(
            "suobing T3 64^3: residual {res64:.2e} (32^3: {res32:.2e}), error vs closed form {cf64:.2e}, rate {rate:.3}"
        ),
    );
    let g4 = samples::grid(4, 48, st).unwrap();
    let (f4, h4) = samples::torus4_slab(&g4).unwrap();
    let r4 = hodge::check_suobing(&f4, &h4).unwrap().residual;
    c.check(r4 < 1e-5, format!("suobing T4 48^4 (non-top H): residual {r4:.2e}"));

    // twisted codifferential
    let tw = |(_, f, h): (_, hodge::FormField, hodge::FormField)| hodge::check_twisted_codiff(&f, &h).unwrap();
    for (label, coarse, fine) in [("T3 64^3", tw(t3(32)), tw(t3(64))), ("T4 48^4", tw(t4(24)), tw(t4(48)))] {
        for key in ["codiff_residual", "laplacian_residual"] {
            let (a, b) = (coarse.value(key).unwrap(), fine.value(key).unwrap());
            let rate = hodge::convergence_rate(a, b, 2.0);
            c.check(
                b < 1e-5 && rate_ok(rate),
                format!("twisted codiff {label} {key}: {b:.2e} (< 1e-5), rate {rate:.3}"),
            );
        }
    }

    // integral identity
    let int = |n| {
        let (_, f, h) = t3(n);
        hodge::check_integral_identity(&f, &h).unwrap()
    };
    let (i32, i64) = (int(32), int(64));
    let e = |r: &hodge::IdentityReport| (r.value("lhs").unwrap() - TORUS3_INTEGRAL).abs();
    let rate = hodge::convergence_rate(e(&i32), e(&i64), 2.0);
    c.check(
        i64.residual < 1e-6 && rate_ok(rate),
        format!(
            "integral identity T3 64^3: relative gap {:.2e} (< 1e-6), lhs {:.10} rhs {:.10}, rate vs closed form {rate:.3}",
            i64.residual,
            i64.value("lhs").unwrap(),
            i64.value("rhs").unwrap()
        ),
    );

    // divH²
    let dv = |(_, _, h): (_, hodge::FormField, hodge::FormField)| hodge::check_div_h2(&h).unwrap();
    for (label, coarse, fine) in [("T3 64^3", dv(t3(32)), dv(t3(64))), ("T4 48^4", dv(t4(24)), dv(t4(48)))] {
        let fine = fine.with_coarse(&coarse);
        let rate = fine.convergence.as_ref().unwrap().rate;
        c.check(
            fine.residual < 1e-5 && rate_ok(rate),
            format!("div H^2 {label}: residual {:.2e} (< 1e-5), rate {rate:.3}", fine.residual),
        );
    }

    // adjointness on fixed trigonometric fields with a non-identity metric
    let mut worst: f64 = 0.0;
    for dim in [3, 4] {
        let mut spec = hodge::PeriodicGrid::cube(dim, if dim == 3 { 32 } else { 16 }).unwrap().spec().clone();
        spec.metric = [1.3, 0.7, 2.1, 0.9][..dim].to_vec();
        let g = std::sync::Arc::new(hodge::PeriodicGrid::new(spec).unwrap());
        for k in 0..dim {
            let a = hodge::FormField::from_fn(&g, k, |i, x| {
                (x[0] + 2.0 * x[1] - x[dim - 1] + i as f64).sin() + 0.3 * (3.0 * x[2] + 0.5 * i as f64).cos()
            })
            .unwrap();
            let b = hodge::FormField::from_fn(&g, k + 1, |i, x| {
                (2.0 * x[0] - x[2] + 0.7 * i as f64).cos() * (x[1] + x[dim - 1]).sin()
            })
            .unwrap();
            worst = worst.max(hodge::adjointness_gap(&a, &b).unwrap());
        }
    }
    c.check(worst < 1e-8, format!("adjointness |<da,b> - <a,d*b>| max {worst:.2e} (< 1e-8)"));
    c
}

fn main() -> ExitCode {
    let suites: [fn() -> Criterion; 9] = [
        closed_form_regression,
        diagnostics,
        blowup,
        torsion,
        soliton_residuals,
        shooting,
        entropy,
        pointwise,
        hodge_oracle,
    ];
    let mut failed = Vec::new();
    for suite in suites {
        let start = Instant::now();
        let mut c = suite();
        let elapsed = start.elapsed().as_secs_f64();
        let budget = c.budget_s;
        c.check(elapsed < budget, format!("runtime {elapsed:.2} s (< {budget} s)"));
        let ok = c.clauses.iter().all(|(ok, _)| *ok);
        println!("criterion {}: {} ({})", c.id, mark(ok), c.title);
        for (ok, detail) in &c.clauses {
            println!("    [{}] {detail}", mark(*ok));
        }
        if !ok {
            failed.push(c.id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failing criteria {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
