//! Exterior calculus on flat periodic grids in dimension 3 and 4.
//!
//! A k-form is stored as one scalar field per strictly increasing
//! multi-index, ordered lexicographically. The metric is constant and
//! diagonal, `g = Σ g_ii dx^i ⊗ dx^i`, and the orientation is
//! `dx^0 ∧ … ∧ dx^{n−1}`. Derivatives use a fourth-order central scheme along
//! each axis (see [`Stencil`]); every operator below is built from that one
//! derivative, so discrete identities that only rely on derivatives commuting
//! (such as `d∘d = 0`) hold to rounding.
//!
//! Conventions:
//!
//! * `*dx^I = ε(I,J) √det g / Π_{i∈I} g_ii · dx^J`, with `J` the sorted complement;
//! * `d* = (−1)^{n(k+1)+1} * d *` on k-forms;
//! * pointwise inner products are the standard ones in which `{dx^I}` is
//!   orthogonal with `|dx^I|² = Π g^{ii}` (no `1/k!` over-counting);
//! * [`check_div_h2`] uses raw tensor contractions, `H²_{ij} = H_{ipq}H_j^{pq}`
//!   and `|H|² = H_{ijk}H^{ijk}`, summing over all index orders.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Derivative scheme along one periodic axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stencil {
    /// `(−f₂ + 8f₁ − 8f₋₁ + f₋₂) / 12h`.
    Central4,
    /// Fourth-order compact scheme `¼f'₋₁ + f'₀ + ¼f'₁ = 3(f₁ − f₋₁)/4h`,
    /// solved as a cyclic tridiagonal system.
    Compact4,
}

impl Default for Stencil {
    fn default() -> Self {
        Stencil::Compact4
    }
}

pub const MIN_POINTS: usize = 16;

/// Grid description as serialized in reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dim: usize,
    pub sizes: Vec<usize>,
    pub periods: Vec<f64>,
    pub metric: Vec<f64>,
    pub stencil: Stencil,
}

/// A uniform periodic grid with a constant diagonal metric.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicGrid {
    spec: GridSpec,
    strides: Vec<usize>,
    len: usize,
}

impl PeriodicGrid {
    /// `n` points per axis, periods `2π`, Euclidean metric.
    pub fn cube(dim: usize, n: usize) -> Result<Self> {
        Self::new(GridSpec {
            dim,
            sizes: vec![n; dim],
            periods: vec![2.0 * std::f64::consts::PI; dim],
            metric: vec![1.0; dim],
            stencil: Stencil::default(),
        })
    }

    pub fn new(spec: GridSpec) -> Result<Self> {
        let n = spec.dim;
        if !(n == 3 || n == 4) {
            return Err(Error::invalid(format!("grid dimension must be 3 or 4 (got {n})")));
        }
        if spec.sizes.len() != n || spec.periods.len() != n || spec.metric.len() != n {
            return Err(Error::invalid("sizes, periods and metric need one entry per axis"));
        }
        if spec.sizes.iter().any(|&s| s < MIN_POINTS) {
            return Err(Error::invalid(format!("every axis needs at least {MIN_POINTS} points")));
        }
        if spec.periods.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::invalid("periods must be positive"));
        }
        if spec.metric.iter().any(|&g| !(g > 0.0 && g.is_finite())) {
            return Err(Error::invalid("metric coefficients must be positive"));
        }
        let mut strides = vec![1; n];
        for a in (0..n - 1).rev() {
            strides[a] = strides[a + 1] * spec.sizes[a + 1];
        }
        let len = spec.sizes.iter().product();
        Ok(Self { spec, strides, len })
    }

    pub fn with_stencil(mut self, stencil: Stencil) -> Self {
        self.spec.stencil = stencil;
        self
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.spec.periods[axis] / self.spec.sizes[axis] as f64
    }

    pub fn sqrt_det(&self) -> f64 {
        self.spec.metric.iter().product::<f64>().sqrt()
    }

    fn inv_metric(&self, axis: usize) -> f64 {
        1.0 / self.spec.metric[axis]
    }

    /// Coordinates of flat index `p`.
    pub fn point(&self, p: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|a| ((p / self.strides[a]) % self.spec.sizes[a]) as f64 * self.spacing(a))
            .collect()
    }

    /// Samples a scalar function of the coordinates.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        (0..self.len)
            .map(|p| {
                for (a, xa) in x.iter_mut().enumerate() {
                    *xa = ((p / self.strides[a]) % self.spec.sizes[a]) as f64 * self.spacing(a);
                }
                f(&x)
            })
            .collect()
    }

    /// `∂_axis` of a scalar field.
    pub fn derivative(&self, field: &[f64], axis: usize) -> Vec<f64> {
        debug_assert_eq!(field.len(), self.len);
        match self.spec.stencil {
            Stencil::Central4 => self.central4(field, axis),
            Stencil::Compact4 => self.compact4(field, axis),
        }
    }

    fn central4(&self, f: &[f64], axis: usize) -> Vec<f64> {
        let n = self.spec.sizes[axis];
        let s = self.strides[axis];
        let outer = self.len / (n * s);
        let c = 1.0 / (12.0 * self.spacing(axis));
        let mut out = vec![0.0; self.len];
        for o in 0..outer {
            let base = o * n * s;
            for i in 0..n {
                let (p1, p2) = ((i + 1) % n, (i + 2) % n);
                let (m1, m2) = ((i + n - 1) % n, (i + n - 2) % n);
                let row = base + i * s;
                for j in 0..s {
                    out[row + j] = c
                        * (8.0 * (f[base + p1 * s + j] - f[base + m1 * s + j])
                            - (f[base + p2 * s + j] - f[base + m2 * s + j]));
                }
            }
        }
        out
    }

    fn compact4(&self, f: &[f64], axis: usize) -> Vec<f64> {
        let n = self.spec.sizes[axis];
        let s = self.strides[axis];
        let outer = self.len / (n * s);
        let solver = CyclicSolver::new(n, 0.25);
        let c = 3.0 / (4.0 * self.spacing(axis));
        let mut out = vec![0.0; self.len];
        for o in 0..outer {
            let base = o * n * s;
            for i in 0..n {
                let (p1, m1) = ((i + 1) % n, (i + n - 1) % n);
                let row = base + i * s;
                for j in 0..s {
                    out[row + j] = c * (f[base + p1 * s + j] - f[base + m1 * s + j]);
                }
            }
            solver.solve_rows(&mut out[base..base + n * s], s);
        }
        out
    }

    /// `Σ field · √det g · Π h_a`, summed in index order.
    pub fn integrate(&self, field: &[f64]) -> f64 {
        let cell: f64 = (0..self.dim()).map(|a| self.spacing(a)).product();
        field.iter().sum::<f64>() * cell * self.sqrt_det()
    }
}

/// Solver for the periodic system `α x_{i−1} + x_i + α x_{i+1} = r_i`
/// (Sherman–Morrison around a tridiagonal Thomas solve).
struct CyclicSolver {
    alpha: f64,
    /// Thomas forward-sweep multipliers and pivots for the modified system.
    cprime: Vec<f64>,
    pivot: Vec<f64>,
    z: Vec<f64>,
    corr_denom: f64,
    gamma: f64,
}

impl CyclicSolver {
    fn new(n: usize, alpha: f64) -> Self {
        let gamma = -1.0;
        let mut diag = vec![1.0; n];
        diag[0] = 1.0 - gamma;
        diag[n - 1] = 1.0 - alpha * alpha / gamma;
        let mut cprime = vec![0.0; n];
        let mut pivot = vec![0.0; n];
        pivot[0] = diag[0];
        cprime[0] = alpha / pivot[0];
        for i in 1..n {
            pivot[i] = diag[i] - alpha * cprime[i - 1];
            cprime[i] = alpha / pivot[i];
        }
        let mut me = Self {
            alpha,
            cprime,
            pivot,
            z: Vec::new(),
            corr_denom: 0.0,
            gamma,
        };
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = alpha;
        me.thomas(&mut u, 1);
        me.corr_denom = 1.0 + u[0] + alpha / gamma * u[n - 1];
        me.z = u;
        me
    }

    /// In-place tridiagonal solve on `n` rows of width `w`.
    fn thomas(&self, x: &mut [f64], w: usize) {
        let n = self.pivot.len();
        let a = self.alpha;
        for j in 0..w {
            x[j] /= self.pivot[0];
        }
        for i in 1..n {
            let inv = 1.0 / self.pivot[i];
            let (prev, cur) = x.split_at_mut(i * w);
            let prev = &prev[(i - 1) * w..];
            for j in 0..w {
                cur[j] = (cur[j] - a * prev[j]) * inv;
            }
        }
        for i in (0..n - 1).rev() {
            let c = self.cprime[i];
            let (cur, next) = x.split_at_mut((i + 1) * w);
            let cur = &mut cur[i * w..];
            for j in 0..w {
                cur[j] -= c * next[j];
            }
        }
    }

    fn solve_rows(&self, x: &mut [f64], w: usize) {
        let n = self.pivot.len();
        self.thomas(x, w);
        let k = self.alpha / self.gamma;
        for j in 0..w {
            let fac = (x[j] + k * x[(n - 1) * w + j]) / self.corr_denom;
            for i in 0..n {
                x[i * w + j] -= fac * self.z[i];
            }
        }
    }
}

/// Strictly increasing `k`-subsets of `0..n`, lexicographically.
pub fn basis(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k <= n {
        rec(0, n, k, &mut Vec::new(), &mut out);
    }
    out
}

/// Sign of the permutation sorting `idx`, and the sorted position in
/// [`basis`]; `None` when an index repeats.
fn signed_position(n: usize, idx: &[usize]) -> Option<(f64, usize)> {
    let mut inv = 0;
    for a in 0..idx.len() {
        for b in a + 1..idx.len() {
            if idx[a] == idx[b] {
                return None;
            }
            if idx[a] > idx[b] {
                inv += 1;
            }
        }
    }
    let mut sorted = idx.to_vec();
    sorted.sort_unstable();
    let pos = basis(n, idx.len())
        .iter()
        .position(|b| *b == sorted)
        .expect("sorted index is a basis element");
    Some((if inv % 2 == 0 { 1.0 } else { -1.0 }, pos))
}

/// A differential form with one coefficient field per increasing multi-index.
#[derive(Clone, PartialEq)]
pub struct FormField {
    degree: usize,
    comps: Vec<Vec<f64>>,
    grid: Arc<PeriodicGrid>,
}

impl fmt::Debug for FormField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FormField")
            .field("degree", &self.degree)
            .field("components", &self.comps.len())
            .field("sizes", &self.grid.spec.sizes)
            .finish()
    }
}

/// Contravariant components `X^i`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub comps: Vec<Vec<f64>>,
}

impl FormField {
    pub fn zero(grid: &Arc<PeriodicGrid>, degree: usize) -> Result<Self> {
        let n = grid.dim();
        if degree > n {
            return Err(Error::Degree(format!("degree {degree} exceeds dimension {n}")));
        }
        Ok(Self {
            degree,
            comps: vec![vec![0.0; grid.len()]; basis(n, degree).len()],
            grid: grid.clone(),
        })
    }

    pub fn scalar(grid: &Arc<PeriodicGrid>, values: Vec<f64>) -> Result<Self> {
        Self::from_components(grid, 0, vec![values])
    }

    pub fn from_components(grid: &Arc<PeriodicGrid>, degree: usize, comps: Vec<Vec<f64>>) -> Result<Self> {
        let n = grid.dim();
        if degree > n {
            return Err(Error::Degree(format!("degree {degree} exceeds dimension {n}")));
        }
        let want = basis(n, degree).len();
        if comps.len() != want || comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::invalid(format!(
                "a {degree}-form on this grid needs {want} fields of {} points",
                grid.len()
            )));
        }
        Ok(Self {
            degree,
            comps,
            grid: grid.clone(),
        })
    }

    /// Builds a form from `value(component, x)`, with components in [`basis`] order.
    pub fn from_fn(
        grid: &Arc<PeriodicGrid>,
        degree: usize,
        value: impl Fn(usize, &[f64]) -> f64,
    ) -> Result<Self> {
        let mut out = Self::zero(grid, degree)?;
        for (c, comp) in out.comps.iter_mut().enumerate() {
            *comp = grid.sample(|x| value(c, x));
        }
        Ok(out)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn grid(&self) -> &Arc<PeriodicGrid> {
        &self.grid
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }

    /// Coefficient field of `dx^{idx}` for an increasing multi-index.
    pub fn component(&self, idx: &[usize]) -> Option<&[f64]> {
        basis(self.grid.dim(), self.degree)
            .iter()
            .position(|b| b == idx)
            .map(|p| self.comps[p].as_slice())
    }

    fn same_grid(&self, other: &FormField) -> Result<()> {
        if self.grid.spec != other.grid.spec {
            return Err(Error::invalid("forms live on different grids"));
        }
        Ok(())
    }

    fn same_shape(&self, other: &FormField) -> Result<()> {
        self.same_grid(other)?;
        if self.degree != other.degree {
            return Err(Error::Degree(format!(
                "cannot combine a {}-form with a {}-form",
                self.degree, other.degree
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &FormField) -> Result<FormField> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &FormField) -> Result<FormField> {
        self.zip(other, |a, b| a - b)
    }

    fn zip(&self, other: &FormField, op: impl Fn(f64, f64) -> f64) -> Result<FormField> {
        self.same_shape(other)?;
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| op(*x, *y)).collect())
            .collect();
        Ok(FormField {
            degree: self.degree,
            comps,
            grid: self.grid.clone(),
        })
    }

    pub fn scale(&self, c: f64) -> FormField {
        self.map_points(|_, v| c * v)
    }

    /// Pointwise product with a scalar field.
    pub fn mul_field(&self, s: &[f64]) -> FormField {
        self.map_points(|p, v| s[p] * v)
    }

    fn map_points(&self, op: impl Fn(usize, f64) -> f64) -> FormField {
        let comps = self
            .comps
            .iter()
            .map(|c| c.iter().enumerate().map(|(p, &v)| op(p, v)).collect())
            .collect();
        FormField {
            degree: self.degree,
            comps,
            grid: self.grid.clone(),
        }
    }

    /// Largest absolute coefficient.
    pub fn sup_norm(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    /// Standard pointwise inner product `Σ_I α_I β_I Π_{i∈I} g^{ii}`.
    pub fn pointwise_inner(&self, other: &FormField) -> Result<Vec<f64>> {
        self.same_shape(other)?;
        let mut out = vec![0.0; self.grid.len()];
        for (idx, (a, b)) in basis(self.grid.dim(), self.degree)
            .iter()
            .zip(self.comps.iter().zip(&other.comps))
        {
            let w: f64 = idx.iter().map(|&i| self.grid.inv_metric(i)).product();
            for p in 0..out.len() {
                out[p] += w * a[p] * b[p];
            }
        }
        Ok(out)
    }

    /// `∫⟨α, β⟩ weight dV`.
    pub fn l2_inner(&self, other: &FormField, weight: Option<&[f64]>) -> Result<f64> {
        let mut dens = self.pointwise_inner(other)?;
        if let Some(w) = weight {
            dens.iter_mut().zip(w).for_each(|(d, w)| *d *= w);
        }
        Ok(self.grid.integrate(&dens))
    }
}

/// Exterior derivative.
pub fn d(form: &FormField) -> Result<FormField> {
    let grid = &form.grid;
    let n = grid.dim();
    let k = form.degree;
    if k >= n {
        return Err(Error::Degree(format!("d of a {k}-form in dimension {n}")));
    }
    let mut out = FormField::zero(grid, k + 1)?;
    for (pos, idx) in basis(n, k + 1).iter().enumerate() {
        let acc = &mut out.comps[pos];
        for (a, &axis) in idx.iter().enumerate() {
            let rest: Vec<usize> = idx.iter().enumerate().filter(|&(b, _)| b != a).map(|(_, &i)| i).collect();
            let (_, src) = signed_position(n, &rest).expect("distinct indices");
            let der = grid.derivative(&form.comps[src], axis);
            let sign = if a % 2 == 0 { 1.0 } else { -1.0 };
            acc.iter_mut().zip(&der).for_each(|(o, v)| *o += sign * v);
        }
    }
    Ok(out)
}

/// Hodge star.
pub fn hodge(form: &FormField) -> FormField {
    let grid = &form.grid;
    let n = grid.dim();
    let k = form.degree;
    let mut out = FormField::zero(grid, n - k).expect("complement degree is valid");
    let target = basis(n, n - k);
    for (idx, comp) in basis(n, k).iter().zip(&form.comps) {
        let comp_idx: Vec<usize> = (0..n).filter(|i| !idx.contains(i)).collect();
        let mut full = idx.clone();
        full.extend(&comp_idx);
        let (eps, _) = signed_position(n, &full).expect("a permutation");
        let w: f64 = idx.iter().map(|&i| grid.inv_metric(i)).product();
        let c = eps * grid.sqrt_det() * w;
        let pos = target.iter().position(|b| *b == comp_idx).expect("complement in basis");
        out.comps[pos] = comp.iter().map(|v| c * v).collect();
    }
    out
}

/// Codifferential `d* = (−1)^{n(k+1)+1} * d *`.
pub fn codiff(form: &FormField) -> Result<FormField> {
    let n = form.grid.dim();
    let k = form.degree;
    if k == 0 {
        return Err(Error::Degree("d* of a function".into()));
    }
    let sign = if (n * (k + 1) + 1) % 2 == 0 { 1.0 } else { -1.0 };
    Ok(hodge(&d(&hodge(form))?).scale(sign))
}

/// `∇f = Σ g^{ii} ∂_i f ∂_i`.
pub fn gradient(f: &FormField) -> Result<VectorField> {
    if f.degree != 0 {
        return Err(Error::Degree("gradient needs a function".into()));
    }
    let grid = &f.grid;
    Ok(VectorField {
        comps: (0..grid.dim())
            .map(|a| {
                let c = grid.inv_metric(a);
                grid.derivative(&f.comps[0], a).into_iter().map(|v| c * v).collect()
            })
            .collect(),
    })
}

/// Interior product `i_X ω`.
pub fn interior(x: &VectorField, form: &FormField) -> Result<FormField> {
    let grid = &form.grid;
    let n = grid.dim();
    let k = form.degree;
    if k == 0 {
        return Err(Error::Degree("interior product of a function".into()));
    }
    if x.comps.len() != n || x.comps.iter().any(|c| c.len() != grid.len()) {
        return Err(Error::invalid("vector field does not match the grid"));
    }
    let mut out = FormField::zero(grid, k - 1)?;
    for (pos, idx) in basis(n, k - 1).iter().enumerate() {
        for i in (0..n).filter(|i| !idx.contains(i)) {
            let mut full = vec![i];
            full.extend(idx);
            let (sign, src) = signed_position(n, &full).expect("distinct");
            let (acc, w, src) = (&mut out.comps[pos], &x.comps[i], &form.comps[src]);
            for p in 0..acc.len() {
                acc[p] += sign * w[p] * src[p];
            }
        }
    }
    Ok(out)
}

/// `L_X ω = d(i_X ω) + i_X(dω)`.
pub fn lie(x: &VectorField, form: &FormField) -> Result<FormField> {
    let n = form.grid.dim();
    let k = form.degree;
    let first = if k == 0 {
        None
    } else {
        Some(d(&interior(x, form)?)?)
    };
    let second = if k == n { None } else { Some(interior(x, &d(form)?)?) };
    match (first, second) {
        (Some(a), Some(b)) => a.add(&b),
        (Some(a), None) => Ok(a),
        (None, Some(b)) => Ok(b),
        (None, None) => unreachable!("dimension is at least 3"),
    }
}

/// Wedge product.
pub fn wedge(a: &FormField, b: &FormField) -> Result<FormField> {
    a.same_grid(b)?;
    let grid = &a.grid;
    let n = grid.dim();
    let (k, l) = (a.degree, b.degree);
    if k + l > n {
        return Err(Error::Degree(format!("{k}-form ∧ {l}-form exceeds dimension {n}")));
    }
    let mut out = FormField::zero(grid, k + l)?;
    let a_basis = basis(n, k);
    let b_basis = basis(n, l);
    for (pos, idx) in basis(n, k + l).iter().enumerate() {
        for sub in basis(k + l, k) {
            let i_part: Vec<usize> = sub.iter().map(|&s| idx[s]).collect();
            let j_part: Vec<usize> = idx.iter().copied().filter(|v| !i_part.contains(v)).collect();
            let mut full = i_part.clone();
            full.extend(&j_part);
            let (sign, _) = signed_position(n, &full).expect("distinct");
            let ia = a_basis.iter().position(|v| *v == i_part).expect("in basis");
            let jb = b_basis.iter().position(|v| *v == j_part).expect("in basis");
            let (acc, x, y) = (&mut out.comps[pos], &a.comps[ia], &b.comps[jb]);
            for p in 0..acc.len() {
                acc[p] += sign * x[p] * y[p];
            }
        }
    }
    Ok(out)
}

/// Outcome of one identity check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IdentityReport {
    pub identity: String,
    pub grid: GridSpec,
    /// Sup-norm residual, or relative gap for integral identities.
    pub residual: f64,
    /// Additional named values (second residuals, both integrals, …).
    pub values: Vec<(String, f64)>,
    pub convergence: Option<Convergence>,
}

/// Residual at a coarser grid and the observed order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Convergence {
    pub coarse_sizes: Vec<usize>,
    pub coarse_residual: f64,
    pub rate: f64,
}

impl IdentityReport {
    fn new(identity: &str, grid: &PeriodicGrid, residual: f64) -> Self {
        Self {
            identity: identity.to_string(),
            grid: grid.spec.clone(),
            residual,
            values: Vec::new(),
            convergence: None,
        }
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// Attaches the observed order against a coarser run of the same check.
    pub fn with_coarse(mut self, coarse: &IdentityReport) -> Self {
        let ratio = self.grid.sizes[0] as f64 / coarse.grid.sizes[0] as f64;
        self.convergence = Some(Convergence {
            coarse_sizes: coarse.grid.sizes.clone(),
            coarse_residual: coarse.residual,
            rate: convergence_rate(coarse.residual, self.residual, ratio),
        });
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// `log(e_coarse / e_fine) / log(refinement)`.
pub fn convergence_rate(coarse: f64, fine: f64, refinement: f64) -> f64 {
    (coarse / fine).ln() / refinement.ln()
}

fn expect_degrees(f: &FormField, h: &FormField) -> Result<()> {
    if f.degree != 0 {
        return Err(Error::Degree(format!("f must be a function (got degree {})", f.degree)));
    }
    if h.degree != 3 {
        return Err(Error::Degree(format!("H must be a 3-form (got degree {})", h.degree)));
    }
    f.same_grid(h)
}

/// `sup|dH|`, with top-degree forms closed by definition.
pub fn closedness(h: &FormField) -> Result<f64> {
    if h.degree == h.grid.dim() {
        return Ok(0.0);
    }
    Ok(d(h)?.sup_norm())
}

fn require_closed(h: &FormField) -> Result<()> {
    let dh = closedness(h)?;
    let tol = 1e-9 * h.sup_norm().max(1.0);
    if dh > tol {
        return Err(Error::invalid(format!(
            "H is not closed: sup|dH| = {dh:.3e} exceeds {tol:.1e}"
        )));
    }
    Ok(())
}

/// `sup |i_{∇f}H − *(df ∧ *H)|`.
pub fn check_suobing(f: &FormField, h: &FormField) -> Result<IdentityReport> {
    expect_degrees(f, h)?;
    let lhs = interior(&gradient(f)?, h)?;
    let rhs = hodge(&wedge(&d(f)?, &hodge(h))?);
    let mut rep = IdentityReport::new("suobing", &h.grid, lhs.sub(&rhs)?.sup_norm());
    rep.values.push(("lhs_sup".into(), lhs.sup_norm()));
    Ok(rep)
}

fn exp_field(f: &FormField, sign: f64) -> Vec<f64> {
    f.comps[0].iter().map(|v| (sign * v).exp()).collect()
}

/// `d*H + i_{∇f}H = e^f d*(e^{-f}H)` (residual) and its exterior derivative
/// `Δ_d H + L_{∇f}H = d(e^f d*(e^{-f}H))` (value `laplacian_residual`).
pub fn check_twisted_codiff(f: &FormField, h: &FormField) -> Result<IdentityReport> {
    expect_degrees(f, h)?;
    require_closed(h)?;
    let x = gradient(f)?;
    let ef = exp_field(f, 1.0);
    let emf = exp_field(f, -1.0);
    let dstar_h = codiff(h)?;
    let lhs = dstar_h.add(&interior(&x, h)?)?;
    let rhs = codiff(&h.mul_field(&emf))?.mul_field(&ef);
    let first = lhs.sub(&rhs)?.sup_norm();

    let mut lap = d(&dstar_h)?;
    if h.degree < h.grid.dim() {
        lap = lap.add(&codiff(&d(h)?)?)?;
    }
    let lhs2 = lap.add(&lie(&x, h)?)?;
    let rhs2 = d(&rhs)?;
    let second = lhs2.sub(&rhs2)?.sup_norm();

    let mut rep = IdentityReport::new("twisted_codiff", &h.grid, first.max(second));
    rep.values.push(("codiff_residual".into(), first));
    rep.values.push(("laplacian_residual".into(), second));
    rep.values.push(("closedness".into(), closedness(h)?));
    Ok(rep)
}

/// `∫|d*H + i_{∇f}H|² e^{-f} dV` against `∫⟨Δ_d H + L_{∇f}H, H⟩ e^{-f} dV`;
/// the residual is the relative gap.
pub fn check_integral_identity(f: &FormField, h: &FormField) -> Result<IdentityReport> {
    expect_degrees(f, h)?;
    require_closed(h)?;
    let x = gradient(f)?;
    let emf = exp_field(f, -1.0);
    let dstar_h = codiff(h)?;
    let alpha = dstar_h.add(&interior(&x, h)?)?;
    let lhs = alpha.l2_inner(&alpha, Some(&emf))?;
    let mut lap = d(&dstar_h)?;
    if h.degree < h.grid.dim() {
        lap = lap.add(&codiff(&d(h)?)?)?;
    }
    let op = lap.add(&lie(&x, h)?)?;
    let rhs = op.l2_inner(h, Some(&emf))?;
    let scale = lhs.abs().max(rhs.abs());
    let gap = if scale == 0.0 { 0.0 } else { (lhs - rhs).abs() / scale };
    let mut rep = IdentityReport::new("integral_identity", &h.grid, gap);
    rep.values.push(("lhs".into(), lhs));
    rep.values.push(("rhs".into(), rhs));
    Ok(rep)
}

/// `(div H²)_i = (1/6)∇_i|H|² − (d*H)^{mn} H_{imn}` with raw contractions.
pub fn check_div_h2(h: &FormField) -> Result<IdentityReport> {
    if h.degree != 3 {
        return Err(Error::Degree(format!("H must be a 3-form (got degree {})", h.degree)));
    }
    let grid = &h.grid;
    let n = grid.dim();
    let len = grid.len();
    let comp = |idx: &[usize]| signed_position(n, idx).map(|(s, p)| (s, &h.comps[p]));
    let ginv = |i: usize| grid.inv_metric(i);

    // |H|², summed over all ordered triples.
    let mut norm = vec![0.0; len];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if let Some((_, c)) = comp(&[i, j, k]) {
                    let w = ginv(i) * ginv(j) * ginv(k);
                    norm.iter_mut().zip(c).for_each(|(acc, v)| *acc += w * v * v);
                }
            }
        }
    }

    let dstar = codiff(h)?;
    let dstar_comp = |m: usize, q: usize| signed_position(n, &[m, q]).map(|(s, p)| (s, &dstar.comps[p]));

    let mut worst: f64 = 0.0;
    let mut lhs_sup: f64 = 0.0;
    for i in 0..n {
        let mut div = vec![0.0; len];
        for j in 0..n {
            let mut h2 = vec![0.0; len];
            for p in 0..n {
                for q in 0..n {
                    if let (Some((si, ci)), Some((sj, cj))) = (comp(&[i, p, q]), comp(&[j, p, q])) {
                        let w = si * sj * ginv(p) * ginv(q);
                        h2.iter_mut()
                            .zip(ci.iter().zip(cj))
                            .for_each(|(acc, (a, b))| *acc += w * a * b);
                    }
                }
            }
            let der = grid.derivative(&h2, j);
            let w = ginv(j);
            div.iter_mut().zip(&der).for_each(|(acc, v)| *acc += w * v);
        }
        let grad_norm = grid.derivative(&norm, i);
        let mut contraction = vec![0.0; len];
        for m in 0..n {
            for q in 0..n {
                if let (Some((sd, cd)), Some((sh, ch))) = (dstar_comp(m, q), comp(&[i, m, q])) {
                    let w = sd * sh * ginv(m) * ginv(q);
                    contraction
                        .iter_mut()
                        .zip(cd.iter().zip(ch))
                        .for_each(|(acc, (a, b))| *acc += w * a * b);
                }
            }
        }
        for p in 0..len {
            let rhs = grad_norm[p] / 6.0 - contraction[p];
            worst = worst.max((div[p] - rhs).abs());
            lhs_sup = lhs_sup.max(div[p].abs());
        }
    }
    let mut rep = IdentityReport::new("div_h2", grid, worst);
    rep.values.push(("lhs_sup".into(), lhs_sup));
    Ok(rep)
}

/// `|⟨dα, β⟩ − ⟨α, d*β⟩|` in `L²`.
pub fn adjointness_gap(alpha: &FormField, beta: &FormField) -> Result<f64> {
    if beta.degree != alpha.degree + 1 {
        return Err(Error::Degree("β must have degree deg α + 1".into()));
    }
    let lhs = d(alpha)?.l2_inner(beta, None)?;
    let rhs = alpha.l2_inner(&codiff(beta)?, None)?;
    Ok((lhs - rhs).abs())
}

/// Standard test data on the cube grids used by the checks and the CLI.
pub mod samples {
    use super::*;

    pub fn grid(dim: usize, n: usize, stencil: Stencil) -> Result<Arc<PeriodicGrid>> {
        Ok(Arc::new(PeriodicGrid::cube(dim, n)?.with_stencil(stencil)))
    }

    /// `f = cos y`, `H = sin x dx∧dy∧dz` on `T³`.
    pub fn torus3(grid: &Arc<PeriodicGrid>) -> Result<(FormField, FormField)> {
        let f = FormField::scalar(grid, grid.sample(|x| x[1].cos()))?;
        let h = FormField::from_fn(grid, 3, |_, x| x[0].sin())?;
        Ok((f, h))
    }

    /// `sin x sin y dx∧dz`, the value of `i_{∇f}H` for [`torus3`].
    pub fn torus3_suobing_exact(grid: &Arc<PeriodicGrid>) -> Result<FormField> {
        FormField::from_fn(grid, 2, |c, x| if c == 1 { x[0].sin() * x[1].sin() } else { 0.0 })
    }

    /// `f = cos w`, `H = sin x dx∧dy∧dz` on `T⁴` (a closed, non-top 3-form).
    pub fn torus4_slab(grid: &Arc<PeriodicGrid>) -> Result<(FormField, FormField)> {
        let f = FormField::scalar(grid, grid.sample(|x| x[3].cos()))?;
        let h = FormField::from_fn(grid, 3, |c, x| if c == 0 { x[0].sin() } else { 0.0 })?;
        Ok((f, h))
    }

    /// `f = cos w`, `H = d(sin x dy∧dz + cos y dz∧dw)`: exactly closed under the discrete `d`.
    pub fn torus4_exact(grid: &Arc<PeriodicGrid>) -> Result<(FormField, FormField)> {
        let f = FormField::scalar(grid, grid.sample(|x| x[3].cos()))?;
        let b = basis(4, 2);
        let yz = b.iter().position(|v| *v == [1, 2]).expect("in basis");
        let zw = b.iter().position(|v| *v == [2, 3]).expect("in basis");
        let beta = FormField::from_fn(grid, 2, |c, x| {
            if c == yz {
                x[0].sin()
            } else if c == zw {
                x[1].cos()
            } else {
                0.0
            }
        })?;
        Ok((f, d(&beta)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g3(n: usize) -> Arc<PeriodicGrid> {
        samples::grid(3, n, Stencil::Central4).unwrap()
    }

    #[test]
    fn basis_sizes() {
        assert_eq!(basis(4, 2).len(), 6);
        assert_eq!(basis(3, 3), vec![vec![0, 1, 2]]);
        assert_eq!(signed_position(3, &[2, 0, 1]), Some((1.0, 0)));
        assert_eq!(signed_position(3, &[1, 0, 2]), Some((-1.0, 0)));
        assert_eq!(signed_position(3, &[1, 1, 2]), None);
    }

    #[test]
    fn grid_validation() {
        assert!(PeriodicGrid::cube(2, 32).is_err());
        assert!(PeriodicGrid::cube(3, 8).is_err());
        let mut spec = PeriodicGrid::cube(3, 16).unwrap().spec().clone();
        spec.metric[1] = 0.0;
        assert!(PeriodicGrid::new(spec).is_err());
    }

    #[test]
    fn derivative_orders() {
        for stencil in [Stencil::Central4, Stencil::Compact4] {
            let err = |n: usize| {
                let g = samples::grid(3, n, stencil).unwrap();
                let f = g.sample(|x| (2.0 * x[2]).sin());
                let exact = g.sample(|x| 2.0 * (2.0 * x[2]).cos());
                g.derivative(&f, 2)
                    .iter()
                    .zip(&exact)
                    .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
            };
            let rate = convergence_rate(err(16), err(32), 2.0);
            assert!((rate - 4.0).abs() < 0.2, "{stencil:?}: {rate}");
        }
    }

    #[test]
    fn star_squares_to_sign() {
        for dim in [3, 4] {
            let g = samples::grid(dim, 16, Stencil::Central4).unwrap();
            for k in 0..=dim {
                let a = FormField::from_fn(&g, k, |c, x| (c as f64 + 1.0) * (x[0] + 0.3 * x[1]).sin()).unwrap();
                let sign = if (k * (dim - k)) % 2 == 0 { 1.0 } else { -1.0 };
                let back = hodge(&hodge(&a));
                assert!(back.sub(&a.scale(sign)).unwrap().sup_norm() < 1e-14);
            }
        }
    }

    #[test]
    fn star_uses_the_metric() {
        let mut spec = PeriodicGrid::cube(3, 16).unwrap().spec().clone();
        spec.metric = vec![4.0, 1.0, 9.0];
        let g = Arc::new(PeriodicGrid::new(spec).unwrap());
        let one = FormField::scalar(&g, vec![1.0; g.len()]).unwrap();
        // *1 = √det g dx∧dy∧dz = 6 dV.
        assert!((hodge(&one).components()[0][0] - 6.0).abs() < 1e-15);
        let dx = FormField::from_fn(&g, 1, |c, _| if c == 0 { 1.0 } else { 0.0 }).unwrap();
        // *dx = √det g / g_xx dy∧dz = 1.5 dy∧dz.
        assert!((hodge(&dx).component(&[1, 2]).unwrap()[0] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn d_squared_vanishes() {
        let g = g3(16);
        let a = FormField::from_fn(&g, 1, |c, x| ((c + 1) as f64 * x[0] + x[1] - 2.0 * x[2]).sin()).unwrap();
        assert!(d(&d(&a).unwrap()).unwrap().sup_norm() < 1e-10);
        assert!(matches!(d(&FormField::zero(&g, 3).unwrap()), Err(Error::Degree(_))));
    }

    #[test]
    fn interior_of_hand_example() {
        let g = g3(32);
        let (f, h) = samples::torus3(&g).unwrap();
        let got = interior(&gradient(&f).unwrap(), &h).unwrap();
        let want = samples::torus3_suobing_exact(&g).unwrap();
        assert!(got.sub(&want).unwrap().sup_norm() < 1e-4);
        assert!(got.component(&[0, 1]).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn wedge_is_graded_commutative() {
        let g = g3(16);
        let a = FormField::from_fn(&g, 1, |c, x| (x[c] + c as f64).cos()).unwrap();
        let b = FormField::from_fn(&g, 2, |c, x| (x[0] * (c + 1) as f64).sin()).unwrap();
        let ab = wedge(&a, &b).unwrap();
        let ba = wedge(&b, &a).unwrap();
        assert!(ab.sub(&ba).unwrap().sup_norm() < 1e-15);
        let aa = wedge(&a, &a).unwrap();
        assert!(aa.sup_norm() < 1e-15);
        assert!(wedge(&b, &b).is_err());
    }

    #[test]
    fn suobing_with_constant_potential_is_zero() {
        let g = g3(16);
        let (_, h) = samples::torus3(&g).unwrap();
        let f = FormField::scalar(&g, vec![2.5; g.len()]).unwrap();
        let rep = check_suobing(&f, &h).unwrap();
        assert_eq!(rep.residual, 0.0);
        assert_eq!(rep.value("lhs_sup"), Some(0.0));
    }

    #[test]
    fn open_forms_are_rejected() {
        let g = samples::grid(4, 16, Stencil::Central4).unwrap();
        let f = FormField::scalar(&g, vec![0.0; g.len()]).unwrap();
        let h = FormField::from_fn(&g, 3, |c, x| if c == 0 { x[3].sin() } else { 0.0 }).unwrap();
        assert!(check_twisted_codiff(&f, &h).unwrap_err().is_validation());
        assert!(check_integral_identity(&f, &h).is_err());
        assert!(matches!(check_suobing(&h, &h), Err(Error::Degree(_))));
    }
}
