use std::f64::consts::PI;
use std::sync::Arc;

use gflow_core::hodge::*;
use gflow_core::Error;
use proptest::prelude::*;

/// `∫|d*H + i_{∇f}H|² e^{-f} dV` for `f = cos y`, `H = sin x dV` on the 2π torus,
/// `4π³(I₀(1) + I₁(1))`.
const TORUS3_INTEGRAL: f64 = 227.11787379138698;

fn grid(dim: usize, n: usize) -> Arc<PeriodicGrid> {
    samples::grid(dim, n, Stencil::default()).unwrap()
}

fn trig_form(g: &Arc<PeriodicGrid>, k: usize, coeffs: &[(f64, [i32; 4], f64)]) -> FormField {
    FormField::from_fn(g, k, |c, x| {
        coeffs
            .iter()
            .enumerate()
            .filter(|(i, _)| i % (c + 1) == 0)
            .map(|(_, (a, m, ph))| {
                let arg: f64 = x.iter().zip(m).map(|(xi, mi)| *mi as f64 * xi).sum();
                a * (arg + ph + c as f64).sin()
            })
            .sum()
    })
    .unwrap()
}

#[test]
fn hand_computed_interior_product() {
    // ∇f = −sin y ∂_y and i_{∂_y}(dx∧dy∧dz) = −dx∧dz.
    let g = grid(3, 32);
    let (f, h) = samples::torus3(&g).unwrap();
    let exact = samples::torus3_suobing_exact(&g).unwrap();
    let lhs = interior(&gradient(&f).unwrap(), &h).unwrap();
    let rhs = hodge(&wedge(&d(&f).unwrap(), &hodge(&h)).unwrap());
    assert!(lhs.sub(&exact).unwrap().sup_norm() < 2e-5);
    assert!(rhs.sub(&exact).unwrap().sup_norm() < 2e-5);
    assert_eq!(lhs.component(&[0, 1]).unwrap().iter().fold(0.0_f64, |m, v| m.max(v.abs())), 0.0);
}

#[test]
fn suobing_closed_form_error_is_fourth_order() {
    let err = |n| {
        let g = grid(3, n);
        let (f, h) = samples::torus3(&g).unwrap();
        let exact = samples::torus3_suobing_exact(&g).unwrap();
        assert!(check_suobing(&f, &h).unwrap().residual < 1e-13);
        interior(&gradient(&f).unwrap(), &h).unwrap().sub(&exact).unwrap().sup_norm()
    };
    let rate = convergence_rate(err(16), err(32), 2.0);
    assert!((3.5..=4.5).contains(&rate), "rate {rate}");
}

#[test]
fn twisted_and_div_residuals_fall_sixteenfold() {
    let run = |n| {
        let g = grid(3, n);
        let (f, h) = samples::torus3(&g).unwrap();
        (check_twisted_codiff(&f, &h).unwrap(), check_div_h2(&h).unwrap())
    };
    let (tc, dc) = run(16);
    let (tf, df) = run(32);
    let tf = tf.with_coarse(&tc);
    let df = df.with_coarse(&dc);
    for rep in [&tf, &df] {
        let rate = rep.convergence.as_ref().unwrap().rate;
        assert!((3.5..=4.5).contains(&rate), "{}: rate {rate}", rep.identity);
    }
    let lap = |r: &IdentityReport| r.value("laplacian_residual").unwrap();
    let rate = convergence_rate(lap(&tc), lap(&tf), 2.0);
    assert!((3.5..=4.5).contains(&rate), "laplacian rate {rate}");
}

#[test]
fn div_h2_top_form_matches_gradient_of_two_h_squared() {
    // H = sin x dV: H² = 2h² g, |H|² = 6h², d*H = −cos x dy∧dz, so both sides are ∇(2h²).
    let g = grid(3, 32);
    let (_, h) = samples::torus3(&g).unwrap();
    let rep = check_div_h2(&h).unwrap();
    assert!(rep.residual < 2e-4, "{}", rep.residual);
    let lhs_sup = rep.value("lhs_sup").unwrap();
    assert!((lhs_sup - 2.0).abs() < 1e-3, "{lhs_sup}");
}

#[test]
fn constant_forms_are_trivial() {
    let g = grid(4, 16);
    let h = FormField::from_fn(&g, 3, |c, _| c as f64 - 1.5).unwrap();
    assert_eq!(check_div_h2(&h).unwrap().residual, 0.0);
    let zero = FormField::scalar(&g, vec![0.0; g.len()]).unwrap();
    let rep = check_integral_identity(&zero, &h).unwrap();
    assert_eq!(rep.value("lhs"), Some(0.0));
    assert_eq!(rep.value("rhs"), Some(0.0));
    assert_eq!(rep.residual, 0.0);
}

#[test]
fn zero_potential_reduces_to_rounding() {
    let g = grid(3, 32);
    let (_, h) = samples::torus3(&g).unwrap();
    let f = FormField::scalar(&g, vec![0.0; g.len()]).unwrap();
    let rep = check_twisted_codiff(&f, &h).unwrap();
    assert!(rep.residual < 1e-12, "{}", rep.residual);
}

#[test]
fn integral_identity_values_converge_to_closed_form() {
    let lhs = |n| {
        let g = grid(3, n);
        let (f, h) = samples::torus3(&g).unwrap();
        let rep = check_integral_identity(&f, &h).unwrap();
        assert!(rep.residual < 1e-12, "gap {}", rep.residual);
        rep.value("lhs").unwrap()
    };
    let (c, fine) = (lhs(16), lhs(32));
    let rate = convergence_rate((c - TORUS3_INTEGRAL).abs(), (fine - TORUS3_INTEGRAL).abs(), 2.0);
    assert!((3.5..=4.5).contains(&rate), "rate {rate}");
    assert!((fine / TORUS3_INTEGRAL - 1.0).abs() < 1e-4);
}

#[test]
fn integral_identity_is_quadratic_in_h() {
    let g = grid(3, 16);
    let (f, h) = samples::torus3(&g).unwrap();
    let one = check_integral_identity(&f, &h).unwrap();
    let two = check_integral_identity(&f, &h.scale(2.0)).unwrap();
    for side in ["lhs", "rhs"] {
        assert_eq!(two.value(side).unwrap(), 4.0 * one.value(side).unwrap());
    }
}

#[test]
fn potential_shift_covariance() {
    let g = grid(4, 16);
    let (f, h) = samples::torus4_exact(&g).unwrap();
    let c = 0.7;
    let shifted = FormField::scalar(&g, f.components()[0].iter().map(|v| v + c).collect()).unwrap();
    let base = check_twisted_codiff(&f, &h).unwrap();
    let moved = check_twisted_codiff(&shifted, &h).unwrap();
    assert!((base.residual - moved.residual).abs() < 1e-12);
    assert_eq!(check_suobing(&f, &h).unwrap().residual, check_suobing(&shifted, &h).unwrap().residual);
    let a = check_integral_identity(&f, &h).unwrap();
    let b = check_integral_identity(&shifted, &h).unwrap();
    for side in ["lhs", "rhs"] {
        let ratio = b.value(side).unwrap() / a.value(side).unwrap();
        assert!((ratio - (-c).exp()).abs() < 1e-13, "{side}: {ratio}");
    }
}

#[test]
fn discrete_closedness_of_exact_forms() {
    let g = grid(4, 16);
    let (_, h) = samples::torus4_exact(&g).unwrap();
    assert!(closedness(&h).unwrap() < 1e-12);
    let open = FormField::from_fn(&g, 3, |c, x| if c == 0 { x[3].cos() } else { 0.0 }).unwrap();
    let f = FormField::scalar(&g, vec![0.0; g.len()]).unwrap();
    assert!(matches!(check_twisted_codiff(&f, &open), Err(Error::InvalidInput(_))));
}

#[test]
fn central_stencil_also_commutes() {
    let g = samples::grid(3, 16, Stencil::Central4).unwrap();
    let a = trig_form(&g, 1, &[(1.0, [1, 2, -1, 0], 0.3), (0.5, [0, 3, 1, 0], 1.1)]);
    assert!(d(&d(&a).unwrap()).unwrap().sup_norm() < 1e-10);
    let b = trig_form(&g, 2, &[(1.0, [2, 0, 1, 0], 0.1)]);
    assert!(adjointness_gap(&a, &b).unwrap() < 1e-8);
}

#[test]
fn report_json_names_identity_and_grid() {
    let run = |n| check_div_h2(&samples::torus3(&grid(3, n)).unwrap().1).unwrap();
    let rep = run(32).with_coarse(&run(16));
    let v: serde_json::Value = serde_json::from_str(&rep.to_json()).unwrap();
    assert_eq!(v["identity"], "div_h2");
    assert_eq!(v["grid"]["sizes"], serde_json::json!([32, 32, 32]));
    assert_eq!(v["grid"]["stencil"], "compact4");
    assert_eq!(v["convergence"]["coarse_sizes"], serde_json::json!([16, 16, 16]));
    assert!(v["convergence"]["rate"].as_f64().unwrap() > 3.5);
    assert!(v["residual"].as_f64().unwrap() > 0.0);
}

fn coeffs() -> impl Strategy<Value = Vec<(f64, [i32; 4], f64)>> {
    prop::collection::vec(
        (-1.0..1.0f64, prop::array::uniform4(-3i32..=3), 0.0..(2.0 * PI)),
        1..4,
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn d_squared_is_rounding(k in 0usize..2, dim in 3usize..5, c in coeffs()) {
        let g = grid(dim, 16);
        let a = trig_form(&g, k, &c);
        prop_assert!(d(&d(&a).unwrap()).unwrap().sup_norm() < 1e-10);
    }

    #[test]
    fn star_is_an_involution_up_to_sign(k in 0usize..4, c in coeffs(), m in prop::array::uniform3(0.5..2.0f64)) {
        let mut spec = PeriodicGrid::cube(3, 16).unwrap().spec().clone();
        spec.metric = m.to_vec();
        let g = Arc::new(PeriodicGrid::new(spec).unwrap());
        let a = trig_form(&g, k, &c);
        let sign = if (k * (3 - k)) % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!(hodge(&hodge(&a)).sub(&a.scale(sign)).unwrap().sup_norm() < 1e-13 * a.sup_norm().max(1.0));
    }

    #[test]
    fn codifferential_is_the_l2_adjoint(
        k in 0usize..3,
        dim in 3usize..5,
        ca in coeffs(),
        cb in coeffs(),
        m in prop::array::uniform4(0.5..2.0f64),
    ) {
        let mut spec = PeriodicGrid::cube(dim, 16).unwrap().spec().clone();
        spec.metric = m[..dim].to_vec();
        let g = Arc::new(PeriodicGrid::new(spec).unwrap());
        let a = trig_form(&g, k, &ca);
        let b = trig_form(&g, k + 1, &cb);
        prop_assert!(adjointness_gap(&a, &b).unwrap() < 1e-8);
    }

    #[test]
    fn operators_are_linear(c1 in coeffs(), c2 in coeffs(), s in -3.0..3.0f64) {
        let g = grid(3, 16);
        let a = trig_form(&g, 2, &c1);
        let b = trig_form(&g, 2, &c2);
        let comb = a.add(&b.scale(s)).unwrap();
        let lhs = codiff(&comb).unwrap();
        let rhs = codiff(&a).unwrap().add(&codiff(&b).unwrap().scale(s)).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().sup_norm() < 1e-11);
    }
}
