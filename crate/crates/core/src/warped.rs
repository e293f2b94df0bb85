//! Rotationally symmetric soliton data `dr² + φ(r)² g_{S²}` with `H = h(r) dV`.
//!
//! Two independent evaluations of the gradient soliton equations live here:
//!
//! * the reduced ODE system in `(φ, h, f)` with constant `λ_ode`;
//! * the tensor equations `2 Ric − ½ H² = λ g − L_{∇f} g` and
//!   `Δ_d H = λ H − L_{∇f} H`, evaluated through the warped-product curvature
//!   and the twisted codifferential `Δ_d H + L_{∇f} H = d(e^f d*(e^{-f} H))`.
//!
//! The ODE constant is half of the tensor constant; [`convention_check`]
//! asserts both residuals vanish together under that relation.
//!
//! Sphere normalization in this module is `Ric(g_{S²}) = g_{S²}`.
//! Torsion norms are raw tensor contractions: `|H|² = H_{ijk} H^{ijk}` and
//! `H²_{ij} = H_{ipq} H_j^{pq}`, so `H = h dV` gives `|H|² = 6h²`.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::{csv, Error, Result};

/// Default sup-norm tolerance for closed-form profiles.
pub const CLOSED_FORM_TOL: f64 = 1e-9;
/// Default sup-norm tolerance when any profile is sampled.
pub const SAMPLED_TOL: f64 = 1e-5;

type AnalyticFn = Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>;

#[derive(Clone)]
enum Kind {
    /// Coefficients of `c0 + c1 r + c2 r² + …`.
    Polynomial(Vec<f64>),
    /// Closure returning `(value, d1, d2)`.
    Analytic(AnalyticFn),
    Sampled(Sampled),
    /// `r ↦ y_scale · inner(x_scale · r)`.
    Rescaled {
        inner: Box<RadialProfile>,
        x_scale: f64,
        y_scale: f64,
    },
}

/// Uniformly sampled values with local six-point (quintic) Lagrange interpolation.
#[derive(Clone, Debug)]
struct Sampled {
    r0: f64,
    dr: f64,
    values: Vec<f64>,
}

impl Sampled {
    fn eval(&self, r: f64) -> [f64; 3] {
        let n = self.values.len();
        let x = (r - self.r0) / self.dr;
        let start = (x.floor() as isize - 2).clamp(0, n as isize - 6) as usize;
        let nodes: [f64; 6] = std::array::from_fn(|j| (start + j) as f64);
        let mut out = [0.0; 3];
        for j in 0..6 {
            let (l, dl, ddl) = lagrange_basis(&nodes, j, x);
            let v = self.values[start + j];
            out[0] += v * l;
            out[1] += v * dl;
            out[2] += v * ddl;
        }
        out[1] /= self.dr;
        out[2] /= self.dr * self.dr;
        out
    }
}

/// Value, first and second derivative of the `j`-th Lagrange basis polynomial at `x`.
fn lagrange_basis(nodes: &[f64; 6], j: usize, x: f64) -> (f64, f64, f64) {
    let xj = nodes[j];
    let others: Vec<f64> = (0..6).filter(|&m| m != j).map(|m| nodes[m]).collect();
    let denom: f64 = others.iter().map(|&xm| xj - xm).product();
    let factors: Vec<f64> = others.iter().map(|&xm| x - xm).collect();
    let k = factors.len();
    let value: f64 = factors.iter().product();
    let mut d1 = 0.0;
    let mut d2 = 0.0;
    for a in 0..k {
        let mut p = 1.0;
        for (m, fm) in factors.iter().enumerate() {
            if m != a {
                p *= fm;
            }
        }
        d1 += p;
        for b in 0..k {
            if b == a {
                continue;
            }
            let mut q = 1.0;
            for (m, fm) in factors.iter().enumerate() {
                if m != a && m != b {
                    q *= fm;
                }
            }
            d2 += q;
        }
    }
    (value / denom, d1 / denom, d2 / denom)
}

/// A smooth function of the radial coordinate with its first two derivatives.
#[derive(Clone)]
pub struct RadialProfile {
    kind: Kind,
    domain: (f64, f64),
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match &self.kind {
            Kind::Polynomial(c) => format!("Polynomial({c:?})"),
            Kind::Analytic(_) => "Analytic".to_string(),
            Kind::Sampled(s) => format!("Sampled({} points)", s.values.len()),
            Kind::Rescaled {
                x_scale, y_scale, ..
            } => format!("Rescaled(x·{x_scale}, y·{y_scale})"),
        };
        f.debug_struct("RadialProfile")
            .field("kind", &kind)
            .field("domain", &self.domain)
            .finish()
    }
}

impl RadialProfile {
    pub fn constant(c: f64) -> Self {
        Self::polynomial(vec![c])
    }

    /// `c0 + c1 r + c2 r² + …` on the whole line.
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        Self {
            kind: Kind::Polynomial(coeffs),
            domain: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// A closed-form profile; `eval` returns `(value, d1, d2)`.
    pub fn analytic(
        domain: (f64, f64),
        eval: impl Fn(f64) -> [f64; 3] + Send + Sync + 'static,
    ) -> Self {
        Self {
            kind: Kind::Analytic(Arc::new(eval)),
            domain,
        }
    }

    /// Samples on the uniform grid `r0 + i·dr`, interpolated with local quintics.
    pub fn sampled(r0: f64, dr: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 6 {
            return Err(Error::invalid("a sampled profile needs at least 6 points"));
        }
        if !(dr > 0.0) || !r0.is_finite() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("sampled profile must have dr > 0 and finite values"));
        }
        let r_hi = r0 + dr * (values.len() - 1) as f64;
        Ok(Self {
            kind: Kind::Sampled(Sampled { r0, dr, values }),
            domain: (r0, r_hi),
        })
    }

    /// Restricts the domain (the profile formula is unchanged).
    pub fn with_domain(mut self, lo: f64, hi: f64) -> Self {
        self.domain = (lo.max(self.domain.0), hi.min(self.domain.1));
        self
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn contains(&self, r: f64) -> bool {
        r >= self.domain.0 && r <= self.domain.1
    }

    pub fn is_sampled(&self) -> bool {
        match &self.kind {
            Kind::Sampled(_) => true,
            Kind::Rescaled { inner, .. } => inner.is_sampled(),
            _ => false,
        }
    }

    /// `(value, d1, d2)` at `r`.
    pub fn eval(&self, r: f64) -> [f64; 3] {
        match &self.kind {
            Kind::Polynomial(c) => {
                let (mut v, mut d1, mut d2) = (0.0, 0.0, 0.0);
                for &ck in c.iter().rev() {
                    d2 = d2 * r + 2.0 * d1;
                    d1 = d1 * r + v;
                    v = v * r + ck;
                }
                [v, d1, d2]
            }
            Kind::Analytic(f) => f(r),
            Kind::Sampled(s) => s.eval(r),
            Kind::Rescaled {
                inner,
                x_scale,
                y_scale,
            } => {
                let [v, d1, d2] = inner.eval(x_scale * r);
                [
                    y_scale * v,
                    y_scale * x_scale * d1,
                    y_scale * x_scale * x_scale * d2,
                ]
            }
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        self.eval(r)[0]
    }

    pub fn d1(&self, r: f64) -> f64 {
        self.eval(r)[1]
    }

    pub fn d2(&self, r: f64) -> f64 {
        self.eval(r)[2]
    }

    /// `r ↦ y_scale · self(x_scale · r)`, with derivatives by the chain rule.
    pub fn rescaled(&self, x_scale: f64, y_scale: f64) -> Self {
        let (lo, hi) = self.domain;
        let (a, b) = (lo / x_scale, hi / x_scale);
        Self {
            kind: Kind::Rescaled {
                inner: Box::new(self.clone()),
                x_scale,
                y_scale,
            },
            domain: (a.min(b), a.max(b)),
        }
    }

    /// Largest deviation of `d1`/`d2` from central differences of `value`/`d1`
    /// over `points`, relative to `max(1, |d|)`.
    pub fn derivative_consistency(&self, points: &[f64], step: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for &r in points {
            if !self.contains(r - step) || !self.contains(r + step) {
                continue;
            }
            let [_, d1, d2] = self.eval(r);
            let fd1 = (self.value(r + step) - self.value(r - step)) / (2.0 * step);
            let fd2 = (self.d1(r + step) - self.d1(r - step)) / (2.0 * step);
            worst = worst
                .max((fd1 - d1).abs() / d1.abs().max(1.0))
                .max((fd2 - d2).abs() / d2.abs().max(1.0));
        }
        worst
    }
}

/// `(φ, h, f)` profiles together with both soliton constants.
#[derive(Clone, Debug)]
pub struct WarpedSolitonData {
    pub phi: RadialProfile,
    pub h: RadialProfile,
    pub f: RadialProfile,
    /// Constant of the reduced ODE system.
    pub lambda_ode: f64,
    /// Constant of `2 Ric − ½ H² = λ g − L_X g`.
    pub lambda_soliton: f64,
}

impl WarpedSolitonData {
    /// Builds data with the tensor constant tied to `2 · lambda_ode`.
    pub fn new(phi: RadialProfile, h: RadialProfile, f: RadialProfile, lambda_ode: f64) -> Self {
        Self {
            phi,
            h,
            f,
            lambda_ode,
            lambda_soliton: 2.0 * lambda_ode,
        }
    }

    pub fn with_lambda_soliton(mut self, lambda_soliton: f64) -> Self {
        self.lambda_soliton = lambda_soliton;
        self
    }

    /// The shrinker on `S² × ℝ`: `φ ≡ 1`, `h ≡ 1`, `f = r²/2`, `λ_ode = ½`.
    pub fn cylinder_soliton() -> Self {
        Self::new(
            RadialProfile::constant(1.0),
            RadialProfile::constant(1.0),
            RadialProfile::polynomial(vec![0.0, 0.0, 0.5]),
            0.5,
        )
    }

    /// The Gaussian shrinker on `ℝ³` in polar form: `φ = r`, `h ≡ 0`, `f = r²/4`.
    pub fn gaussian_shrinker() -> Self {
        Self::new(
            RadialProfile::polynomial(vec![0.0, 1.0]).with_domain(0.0, f64::INFINITY),
            RadialProfile::constant(0.0),
            RadialProfile::polynomial(vec![0.0, 0.0, 0.25]),
            0.5,
        )
    }

    pub fn is_sampled(&self) -> bool {
        self.phi.is_sampled() || self.h.is_sampled() || self.f.is_sampled()
    }

    /// Residual tolerance matching the profile kinds.
    pub fn default_tolerance(&self) -> f64 {
        if self.is_sampled() {
            SAMPLED_TOL
        } else {
            CLOSED_FORM_TOL
        }
    }

    /// Interior of the intersection of the profile domains.
    pub fn domain(&self) -> (f64, f64) {
        let lo = self.phi.domain.0.max(self.h.domain.0).max(self.f.domain.0);
        let hi = self.phi.domain.1.min(self.h.domain.1).min(self.f.domain.1);
        (lo, hi)
    }

    /// `n` evenly spaced interior points, clipping infinite ends to `±5`.
    pub fn default_grid(&self, n: usize) -> Vec<f64> {
        let (lo, hi) = self.domain();
        let lo = if lo.is_finite() { lo } else { -5.0 };
        let hi = if hi.is_finite() { hi } else { 5.0 };
        let step = (hi - lo) / (n + 1) as f64;
        (1..=n).map(|i| lo + step * i as f64).collect()
    }

    fn check_point(&self, r: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        if !r.is_finite() || r <= lo || r >= hi {
            return Err(Error::Domain {
                r,
                reason: format!("outside the open profile domain ({lo}, {hi})"),
            });
        }
        if self.phi.value(r) <= 0.0 {
            return Err(Error::Domain {
                r,
                reason: "warping function must be positive".into(),
            });
        }
        Ok(())
    }

    /// Curvature, torsion and potential quantities at `r`.
    pub fn geometry_at(&self, r: f64) -> Result<PointGeometry> {
        self.check_point(r)?;
        Ok(PointGeometry::new(
            self.phi.eval(r),
            self.h.eval(r),
            self.f.eval(r),
        ))
    }
}

/// `H²_{ij}` and `|H|²` for `H = h · e¹∧e²∧e³` in an orthonormal frame,
/// contracted index by index from the Levi-Civita symbol.
pub fn torsion_contractions(h: f64) -> ([[f64; 3]; 3], f64) {
    let eps = |i: usize, j: usize, k: usize| -> f64 {
        match (i, j, k) {
            (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
            (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
            _ => 0.0,
        }
    };
    let mut h2 = [[0.0; 3]; 3];
    let mut norm = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            for p in 0..3 {
                for q in 0..3 {
                    h2[i][j] += h * eps(i, p, q) * h * eps(j, p, q);
                }
            }
        }
        norm += h2[i][i];
    }
    (h2, norm)
}

/// Pointwise geometric quantities of warped data, in an orthonormal frame
/// `(∂_r, sphere, sphere)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PointGeometry {
    pub phi: [f64; 3],
    pub h: [f64; 3],
    pub f: [f64; 3],
    pub ric_rr: f64,
    pub ric_sphere: f64,
    pub scalar: f64,
    /// Eigenvalues of `H²` (radial, sphere).
    pub h2_rr: f64,
    pub h2_sphere: f64,
    pub h_norm_sq: f64,
    pub hess_rr: f64,
    pub hess_sphere: f64,
    pub lap_f: f64,
    pub grad_f_sq: f64,
    /// Coefficient `c` of `d*H + i_{∇f} H = c · *dr` (raw norm of that 2-form is `2c²`).
    pub twisted_codiff: f64,
    /// Coefficient of `Δ_d H + L_{∇f} H = d(e^f d*(e^{-f} H))` on `dV`.
    pub twisted_laplacian: f64,
}

impl PointGeometry {
    fn new(phi: [f64; 3], h: [f64; 3], f: [f64; 3]) -> Self {
        let [p, p1, p2] = phi;
        let [hv, h1, h2] = h;
        let [_, f1, f2] = f;
        let ric_rr = -2.0 * p2 / p;
        let ric_sphere = (1.0 - p1 * p1 - p * p2) / (p * p);
        let (hh, norm) = torsion_contractions(hv);
        // e^f d*(e^{-f} h dV) = −(h' − f'h) *dr with *dr = φ² vol_{S²}.
        let psi = h1 - f1 * hv;
        let psi1 = h2 - f2 * hv - f1 * h1;
        let twisted_laplacian = -(2.0 * p * p1 * psi + p * p * psi1) / (p * p);
        Self {
            phi,
            h,
            f,
            ric_rr,
            ric_sphere,
            scalar: ric_rr + 2.0 * ric_sphere,
            h2_rr: hh[0][0],
            h2_sphere: hh[1][1],
            h_norm_sq: norm,
            hess_rr: f2,
            hess_sphere: p1 * f1 / p,
            lap_f: f2 + 2.0 * p1 * f1 / p,
            grad_f_sq: f1 * f1,
            twisted_codiff: -psi,
            twisted_laplacian,
        }
    }

    /// `2 Ric − ½ H² − λ g + 2 ∇²f` on the radial and sphere directions.
    pub fn metric_residual(&self, lambda_soliton: f64) -> (f64, f64) {
        (
            2.0 * self.ric_rr - 0.5 * self.h2_rr - lambda_soliton + 2.0 * self.hess_rr,
            2.0 * self.ric_sphere - 0.5 * self.h2_sphere - lambda_soliton + 2.0 * self.hess_sphere,
        )
    }

    /// `Δ_d H + L_{∇f} H − λ H` as a coefficient on `dV`.
    pub fn torsion_residual(&self, lambda_soliton: f64) -> f64 {
        self.twisted_laplacian - lambda_soliton * self.h[0]
    }

    /// Eigenvalues of `Ric − ¼H² + ∇²f − g/(2τ)` (radial, sphere).
    pub fn shrinker_tensor(&self, tau: f64) -> (f64, f64) {
        (
            self.ric_rr - 0.25 * self.h2_rr + self.hess_rr - 0.5 / tau,
            self.ric_sphere - 0.25 * self.h2_sphere + self.hess_sphere - 0.5 / tau,
        )
    }
}

/// Per-point residuals of the soliton equations on a radial grid.
///
/// The ODE report fills `r1..r3`; the tensor report fills the `metric_*` and
/// `tensor_*` columns. Unused columns are empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ResidualReport {
    pub grid: Vec<f64>,
    pub r1: Vec<f64>,
    pub r2: Vec<f64>,
    pub r3: Vec<f64>,
    pub metric_rr: Vec<f64>,
    pub metric_sphere: Vec<f64>,
    pub tensor_metric_residual: Vec<f64>,
    pub tensor_torsion_residual: Vec<f64>,
    pub max_abs: f64,
}

impl ResidualReport {
    fn finish(mut self) -> Self {
        self.max_abs = [
            &self.r1,
            &self.r2,
            &self.r3,
            &self.metric_rr,
            &self.metric_sphere,
            &self.tensor_metric_residual,
            &self.tensor_torsion_residual,
        ]
        .iter()
        .flat_map(|v| v.iter())
        .fold(0.0_f64, |m, x| m.max(x.abs()));
        self
    }

    pub fn max_of(values: &[f64]) -> f64 {
        values.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per grid point; only populated columns are written.
    pub fn to_csv(&self) -> String {
        let cols: Vec<(&str, &Vec<f64>)> = [
            ("r1", &self.r1),
            ("r2", &self.r2),
            ("r3", &self.r3),
            ("metric_rr", &self.metric_rr),
            ("metric_sphere", &self.metric_sphere),
            ("tensor_metric", &self.tensor_metric_residual),
            ("tensor_torsion", &self.tensor_torsion_residual),
        ]
        .into_iter()
        .filter(|(_, v)| !v.is_empty())
        .collect();
        let mut header = vec!["r"];
        header.extend(cols.iter().map(|(n, _)| *n));
        let rows = self.grid.iter().enumerate().map(|(i, &r)| {
            let mut row = vec![r];
            row.extend(cols.iter().map(|(_, v)| v[i]));
            row
        });
        csv::render(&header, rows)
    }
}

/// Residuals of the reduced ODE system
///
/// ```text
/// 1 − φ'² − φφ''  = λφ² − φφ'f' + ½h²φ²
/// −2φφ''          = (λ − f'')φ² + ½h²φ²
/// (φ²h')'         = −2λhφ² + (f'hφ²)'
/// ```
///
/// with `λ = lambda_ode`, each as left minus right.
pub fn ode_residuals(data: &WarpedSolitonData, grid: &[f64]) -> Result<ResidualReport> {
    let lam = data.lambda_ode;
    let mut rep = ResidualReport {
        grid: grid.to_vec(),
        ..Default::default()
    };
    for &r in grid {
        data.check_point(r)?;
        let [p, p1, p2] = data.phi.eval(r);
        let [h, h1, h2] = data.h.eval(r);
        let [_, f1, f2] = data.f.eval(r);
        let e1 = (1.0 - p1 * p1 - p * p2) - (lam * p * p - p * p1 * f1 + 0.5 * h * h * p * p);
        let e2 = (-2.0 * p * p2) - ((lam - f2) * p * p + 0.5 * h * h * p * p);
        let lhs3 = 2.0 * p * p1 * h1 + p * p * h2;
        let d_fhpp = f2 * h * p * p + f1 * h1 * p * p + 2.0 * f1 * h * p * p1;
        let e3 = lhs3 - (-2.0 * lam * h * p * p + d_fhpp);
        rep.r1.push(e1);
        rep.r2.push(e2);
        rep.r3.push(e3);
    }
    Ok(rep.finish())
}

/// Residuals of the tensor soliton equations with `λ = lambda_soliton`.
pub fn tensor_residuals(data: &WarpedSolitonData, grid: &[f64]) -> Result<ResidualReport> {
    let lam = data.lambda_soliton;
    let mut rep = ResidualReport {
        grid: grid.to_vec(),
        ..Default::default()
    };
    for &r in grid {
        let g = data.geometry_at(r)?;
        let (rr, sph) = g.metric_residual(lam);
        rep.metric_rr.push(rr);
        rep.metric_sphere.push(sph);
        rep.tensor_metric_residual.push(rr.abs().max(sph.abs()));
        rep.tensor_torsion_residual.push(g.torsion_residual(lam));
    }
    Ok(rep.finish())
}

/// Residual of `2 − 2φ'² − 4φφ'' = (λ + 3/2 h²) φ²`, the combination that
/// holds when `h` is a non-zero constant.
pub fn combined_residual(data: &WarpedSolitonData, r: f64) -> Result<f64> {
    data.check_point(r)?;
    let [p, p1, p2] = data.phi.eval(r);
    let h = data.h.value(r);
    Ok((2.0 - 2.0 * p1 * p1 - 4.0 * p * p2) - (data.lambda_ode + 1.5 * h * h) * p * p)
}

/// Residual of the normalized equation `φ² + φ'² + 2φφ'' = 1`.
pub fn normalized_residual(phi: &RadialProfile, r: f64) -> f64 {
    let [p, p1, p2] = phi.eval(r);
    p * p + p1 * p1 + 2.0 * p * p2 - 1.0
}

/// Outcome of [`convention_check`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConventionReport {
    pub consistent: bool,
    pub lambda_ode: f64,
    pub lambda_soliton: f64,
    pub ode_max: f64,
    pub tensor_metric_max: f64,
    pub tensor_torsion_max: f64,
    pub tolerance: f64,
    pub message: String,
}

/// Checks that the ODE residuals with `λ_ode` and the tensor residuals with
/// `λ_soliton` vanish together, on the default 200-point grid.
pub fn convention_check(data: &WarpedSolitonData) -> Result<ConventionReport> {
    convention_check_on(data, &data.default_grid(200), data.default_tolerance())
}

pub fn convention_check_on(
    data: &WarpedSolitonData,
    grid: &[f64],
    tolerance: f64,
) -> Result<ConventionReport> {
    let ode = ode_residuals(data, grid)?;
    let ten = tensor_residuals(data, grid)?;
    let tm = ResidualReport::max_of(&ten.tensor_metric_residual);
    let tt = ResidualReport::max_of(&ten.tensor_torsion_residual);
    let ode_ok = ode.max_abs <= tolerance;
    let ten_ok = tm <= tolerance && tt <= tolerance;
    let ratio_ok = (data.lambda_soliton - 2.0 * data.lambda_ode).abs()
        <= 1e-12 * data.lambda_soliton.abs().max(1.0);
    let message = match (ode_ok, ten_ok) {
        (true, true) if ratio_ok => "both forms vanish with lambda_soliton = 2 lambda_ode".to_string(),
        (true, true) => format!(
            "both forms vanish but lambda_soliton = {} is not 2 lambda_ode = {}",
            data.lambda_soliton,
            2.0 * data.lambda_ode
        ),
        (true, false) => format!(
            "ODE form vanishes with lambda_ode = {} but the tensor form fails with lambda_soliton = {} \
             (metric {tm:.3e}, torsion {tt:.3e}); expected lambda_soliton = {}",
            data.lambda_ode,
            data.lambda_soliton,
            2.0 * data.lambda_ode
        ),
        (false, true) => format!(
            "tensor form vanishes with lambda_soliton = {} but the ODE form fails with lambda_ode = {} \
             (max {:.3e}); expected lambda_ode = {}",
            data.lambda_soliton,
            data.lambda_ode,
            ode.max_abs,
            0.5 * data.lambda_soliton
        ),
        (false, false) => format!(
            "neither form vanishes (ODE {:.3e}, metric {tm:.3e}, torsion {tt:.3e}); data is not a soliton",
            ode.max_abs
        ),
    };
    Ok(ConventionReport {
        consistent: ode_ok && ten_ok && ratio_ok,
        lambda_ode: data.lambda_ode,
        lambda_soliton: data.lambda_soliton,
        ode_max: ode.max_abs,
        tensor_metric_max: tm,
        tensor_torsion_max: tt,
        tolerance,
        message,
    })
}

/// The scaling `φ(r) = a φ̃(b r)` that turns the combined equation into
/// `φ̃² + φ̃'² + 2φ̃φ̃'' = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Scaling {
    pub a: f64,
    pub b: f64,
}

impl Scaling {
    /// `φ̃(r) = a⁻¹ φ(r / b)`.
    pub fn apply(&self, phi: &RadialProfile) -> RadialProfile {
        phi.rescaled(1.0 / self.b, 1.0 / self.a)
    }

    /// `φ(r) = a φ̃(b r)`.
    pub fn invert(&self, phi_tilde: &RadialProfile) -> RadialProfile {
        phi_tilde.rescaled(self.b, self.a)
    }
}

/// Solves `a² b² = 1`, `a² (λ + 3/2 h²) = 2`.
pub fn normalize_phi(lambda_ode: f64, h_const: f64) -> Result<Scaling> {
    let c = lambda_ode + 1.5 * h_const * h_const;
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::invalid(format!(
            "normalization needs lambda + 3/2 h^2 > 0 (got {c})"
        )));
    }
    let a = (2.0 / c).sqrt();
    Ok(Scaling { a, b: 1.0 / a })
}
