//! Domains, uniform cell-centered grids, grid functions, quadrature and norms.
//!
//! Grids are cell-centered so every node is strictly interior: boundary
//! distances and the singular exterior tail weights stay finite. Grid
//! functions live on interior cells only; the extension by zero outside the
//! domain is implicit and never stored.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Problem data (n, s, p, q, λ) gating every operation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    /// Spatial dimension, 1 or 2.
    pub n: usize,
    /// Fractional order in (0,1).
    pub s: f64,
    /// Integrability exponent, > 1.
    pub p: f64,
    /// Concave exponent in (1,p).
    pub q: f64,
    /// Nonnegative coupling of the concave term.
    pub lambda: f64,
}

impl ProblemParams {
    pub fn new(n: usize, s: f64, p: f64, q: f64, lambda: f64) -> Result<Self> {
        let params = Self { n, s, p, q, lambda };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n != 1 && self.n != 2 {
            return Err(Error::InvalidParameter(format!(
                "dimension must be 1 or 2, got {}",
                self.n
            )));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "fractional order s must lie in (0,1), got {}",
                self.s
            )));
        }
        if !(self.p > 1.0) {
            return Err(Error::InvalidParameter(format!("p must exceed 1, got {}", self.p)));
        }
        if !(self.q > 1.0 && self.q < self.p) {
            return Err(Error::InvalidParameter(format!(
                "q must lie in (1, p) = (1, {}), got {}",
                self.p, self.q
            )));
        }
        if !(self.n as f64 > self.s * self.p) {
            return Err(Error::InvalidParameter(format!(
                "need n > s*p, got n = {}, s*p = {}",
                self.n,
                self.s * self.p
            )));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    /// Kernel order s*p.
    pub fn sp(&self) -> f64 {
        self.s * self.p
    }

    /// Critical exponent n*p/(n - s*p); always > p under the invariants.
    pub fn p_star(&self) -> f64 {
        let n = self.n as f64;
        n * self.p / (n - self.sp())
    }

    /// Same parameters with a different λ.
    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..*self }
    }
}

/// Bounded computational domain: an interval or an axis-aligned rectangle.
///
/// Only these two shapes are supported; both admit exact boundary distances
/// and exact or semi-analytic exterior tail integrals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Rectangle { a: f64, b: f64, c: f64, d: f64 },
}

impl Domain {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        let dom = Domain::Interval { a, b };
        dom.validate()?;
        Ok(dom)
    }

    pub fn rectangle(a: f64, b: f64, c: f64, d: f64) -> Result<Self> {
        let dom = Domain::Rectangle { a, b, c, d };
        dom.validate()?;
        Ok(dom)
    }

    pub fn validate(&self) -> Result<()> {
        if self.measure() <= 0.0 || !self.measure().is_finite() {
            return Err(Error::DegenerateDomain(format!("{self:?} has no interior")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Domain::Interval { .. } => 1,
            Domain::Rectangle { .. } => 2,
        }
    }

    pub fn measure(&self) -> f64 {
        match *self {
            Domain::Interval { a, b } => b - a,
            Domain::Rectangle { a, b, c, d } => (b - a) * (d - c),
        }
    }

    pub fn diameter(&self) -> f64 {
        match *self {
            Domain::Interval { a, b } => b - a,
            Domain::Rectangle { a, b, c, d } => ((b - a).powi(2) + (d - c).powi(2)).sqrt(),
        }
    }

    /// Distance from an interior point to the boundary (nonpositive outside).
    pub fn boundary_distance(&self, x: [f64; 2]) -> f64 {
        match *self {
            Domain::Interval { a, b } => (x[0] - a).min(b - x[0]),
            Domain::Rectangle { a, b, c, d } => {
                (x[0] - a).min(b - x[0]).min(x[1] - c).min(d - x[1])
            }
        }
    }

    /// Whether the origin lies strictly inside; required by all bubble and
    /// mountain-pass constructions, which truncate around 0.
    pub fn origin_interior(&self) -> bool {
        self.boundary_distance([0.0, 0.0]) > 0.0
    }

    /// Whether the closed ball B_radius(0) lies inside the domain.
    pub fn contains_origin_ball(&self, radius: f64) -> bool {
        self.boundary_distance([0.0, 0.0]) > radius
    }
}

/// Uniform cell-centered grid over a [`Domain`].
///
/// Node i of a 1D grid sits at a + (i + 1/2) h. In 2D the index is
/// `ix + iy * n_cells` (x fastest), nodes at the cell centers of the
/// `n_cells` × `n_cells` partition. All quadrature weights equal h^n.
#[derive(Debug)]
pub struct Grid {
    domain: Domain,
    n_cells: usize,
    h: f64,
    nodes: Vec<[f64; 2]>,
    d_omega: Vec<f64>,
    weight: f64,
}

impl Grid {
    /// Build a grid with `n_cells` cells per axis. Requires `n_cells >= 4`.
    pub fn build(domain: Domain, n_cells: usize) -> Result<Arc<Self>> {
        domain.validate()?;
        if n_cells < 4 {
            return Err(Error::InvalidParameter(format!(
                "need at least 4 cells per axis, got {n_cells}"
            )));
        }
        let (h, nodes) = match domain {
            Domain::Interval { a, b } => {
                let h = (b - a) / n_cells as f64;
                let nodes = (0..n_cells)
                    .map(|i| [a + (i as f64 + 0.5) * h, 0.0])
                    .collect::<Vec<_>>();
                (h, nodes)
            }
            Domain::Rectangle { a, b, c, d } => {
                let hx = (b - a) / n_cells as f64;
                let hy = (d - c) / n_cells as f64;
                if (hx - hy).abs() > 1e-12 * hx.max(hy) {
                    return Err(Error::InvalidParameter(
                        "rectangle must have equal spacing per axis; choose side lengths \
                         proportional to the cell count"
                            .into(),
                    ));
                }
                let mut nodes = Vec::with_capacity(n_cells * n_cells);
                for iy in 0..n_cells {
                    for ix in 0..n_cells {
                        nodes.push([
                            a + (ix as f64 + 0.5) * hx,
                            c + (iy as f64 + 0.5) * hy,
                        ]);
                    }
                }
                (hx, nodes)
            }
        };
        let d_omega: Vec<f64> = nodes.iter().map(|&x| domain.boundary_distance(x)).collect();
        debug_assert!(d_omega.iter().all(|&d| d > 0.0));
        let weight = h.powi(domain.dim() as i32);
        Ok(Arc::new(Self {
            domain,
            n_cells,
            h,
            nodes,
            d_omega,
            weight,
        }))
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Cells per axis.
    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Total node count (n_cells^dim).
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn node(&self, i: usize) -> [f64; 2] {
        self.nodes[i]
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    /// Distance of node i to the boundary.
    pub fn d_omega(&self, i: usize) -> f64 {
        self.d_omega[i]
    }

    pub fn d_omega_all(&self) -> &[f64] {
        &self.d_omega
    }

    /// Quadrature weight h^n, identical for every cell.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    fn same_as(&self, other: &Grid) -> bool {
        self.domain == other.domain && self.n_cells == other.n_cells
    }

    /// JSON manifest describing the discretization (domain, N, h).
    pub fn manifest_json(&self) -> String {
        let domain = serde_json::to_string(&self.domain).unwrap_or_else(|_| "null".into());
        format!(
            "{{\"domain\":{},\"n_cells\":{},\"h\":{}}}",
            domain,
            self.n_cells,
            fmt_float(self.h)
        )
    }
}

/// Format a float with 17 significant digits (round-trip exact for f64).
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Nodal values on the interior cells of a grid; zero outside the domain.
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(grid: Arc<Grid>) -> Self {
        let values = vec![0.0; grid.len()];
        Self { grid, values }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let values = vec![c; grid.len()];
        Self { grid, values }
    }

    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite nodal value".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn([f64; 2]) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn same_grid(&self, other: &GridFunction) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || self.grid.same_as(&other.grid)
    }

    /// Discrete L^r norm (Σ_i w_i |u_i|^r)^{1/r}; rejects r < 1.
    pub fn lr_norm(&self, r: f64) -> Result<f64> {
        if !(r >= 1.0) {
            return Err(Error::InvalidParameter(format!("Lr norm needs r >= 1, got {r}")));
        }
        let w = self.grid.weight();
        let sum: f64 = crate::kernel::pairwise_sum(
            self.values.iter().map(|&v| w * v.abs().powf(r)),
            self.len(),
        );
        Ok(sum.powf(1.0 / r))
    }

    /// Σ_i w_i |u_i|^r without the outer root.
    pub fn lr_power(&self, r: f64) -> f64 {
        let w = self.grid.weight();
        crate::kernel::pairwise_sum(self.values.iter().map(|&v| w * v.abs().powf(r)), self.len())
    }

    /// Weighted sup norm max_i |u_i| / d_Ω(x_i)^s.
    pub fn cs0_norm(&self, s: f64) -> f64 {
        self.values
            .iter()
            .zip(self.grid.d_omega_all())
            .map(|(&v, &d)| v.abs() / d.powf(s))
            .fold(0.0, f64::max)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridFunction {
        GridFunction {
            grid: Arc::clone(&self.grid),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, t: f64) -> GridFunction {
        self.map(|v| t * v)
    }

    /// self + t * other.
    pub fn axpy(&self, t: f64, other: &GridFunction) -> Result<GridFunction> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        Ok(GridFunction {
            grid: Arc::clone(&self.grid),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| a + t * b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.axpy(-1.0, other)
    }

    pub fn sup_diff(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (&a, &b)| m.max((a - b).abs()))
    }

    /// CSV serialization: header `x[,y],value`, one node per row in index order.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if self.grid.dim() == 1 {
            out.push_str("x,value\n");
            for (i, &v) in self.values.iter().enumerate() {
                let x = self.grid.node(i);
                let _ = writeln!(out, "{},{}", fmt_float(x[0]), fmt_float(v));
            }
        } else {
            out.push_str("x,y,value\n");
            for (i, &v) in self.values.iter().enumerate() {
                let x = self.grid.node(i);
                let _ = writeln!(out, "{},{},{}", fmt_float(x[0]), fmt_float(x[1]), fmt_float(v));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_interval(n: usize) -> Arc<Grid> {
        Grid::build(Domain::interval(0.0, 1.0).unwrap(), n).unwrap()
    }

    #[test]
    fn params_invariants() {
        let p = ProblemParams::new(1, 0.3, 2.0, 1.5, 0.1).unwrap();
        assert!((p.p_star() - 5.0).abs() < 1e-14);
        assert!(p.p_star() > p.p);
        assert!(ProblemParams::new(1, 0.3, 2.0, 2.5, 0.1).is_err());
        assert!(ProblemParams::new(1, 1.2, 2.0, 1.5, 0.1).is_err());
        assert!(ProblemParams::new(2, 0.9, 3.0, 1.5, 0.1).is_err()); // n <= sp
    }

    #[test]
    fn cell_centered_nodes_and_distances() {
        let g = unit_interval(4);
        let xs: Vec<f64> = g.nodes().iter().map(|x| x[0]).collect();
        assert_eq!(xs, vec![0.125, 0.375, 0.625, 0.875]);
        assert!((g.spacing() - 0.25).abs() < 1e-15);
        let d: Vec<f64> = g.d_omega_all().to_vec();
        assert_eq!(d, vec![0.125, 0.375, 0.375, 0.125]);
    }

    #[test]
    fn rectangle_weights_sum_to_measure() {
        let g = Grid::build(Domain::rectangle(0.0, 1.0, 0.0, 1.0).unwrap(), 8).unwrap();
        assert_eq!(g.len(), 64);
        assert!((g.weight() - 1.0 / 64.0).abs() < 1e-15);
        let total: f64 = (0..g.len()).map(|_| g.weight()).sum();
        assert!((total - g.domain().measure()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_domain_rejected() {
        assert!(Domain::interval(1.0, 1.0).is_err());
        assert!(Domain::rectangle(0.0, 1.0, 2.0, 2.0).is_err());
        assert!(Grid::build(Domain::interval(0.0, 1.0).unwrap(), 3).is_err());
    }

    #[test]
    fn lr_norm_values() {
        let g = unit_interval(16);
        let zero = GridFunction::zeros(Arc::clone(&g));
        assert_eq!(zero.lr_norm(2.0).unwrap(), 0.0);
        let one = GridFunction::constant(Arc::clone(&g), 1.0);
        for r in [1.0, 1.7, 2.0, 5.0] {
            assert!((one.lr_norm(r).unwrap() - 1.0).abs() < 1e-13);
        }
        let two = GridFunction::constant(Arc::clone(&g), 2.0);
        assert!((two.lr_norm(2.0).unwrap() - 2.0).abs() < 1e-13);
        assert!(one.lr_norm(0.5).is_err());
    }

    #[test]
    fn lr_norm_homogeneous_and_hoelder() {
        let g = unit_interval(32);
        let u = GridFunction::from_fn(Arc::clone(&g), |x| (3.1 * x[0]).sin() + 0.3);
        let t = -2.75;
        for r in [1.0, 1.4, 2.0, 3.0] {
            let a = u.scale(t).lr_norm(r).unwrap();
            let b = t.abs() * u.lr_norm(r).unwrap();
            assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
        // |u|_r <= |u|_r' |Ω|^{1/r - 1/r'} for r < r' on the unit interval.
        for (r, rp) in [(1.0, 2.0), (1.5, 3.0), (2.0, 5.0)] {
            let lhs = u.lr_norm(r).unwrap();
            let rhs = u.lr_norm(rp).unwrap();
            assert!(lhs <= rhs * (1.0 + 1e-12));
        }
    }

    #[test]
    fn cs0_norm_values() {
        let g = unit_interval(16);
        let s = 0.4;
        let zero = GridFunction::zeros(Arc::clone(&g));
        assert_eq!(zero.cs0_norm(s), 0.0);
        let ds = GridFunction::from_fn(Arc::clone(&g), |x| {
            g.domain().boundary_distance(x).powf(s)
        });
        assert!((ds.cs0_norm(s) - 1.0).abs() < 1e-13);
        assert!((ds.scale(2.0).cs0_norm(s) - 2.0).abs() < 1e-13);
        // definiteness
        let u = GridFunction::from_fn(Arc::clone(&g), |x| if x[0] > 0.9 { 1e-9 } else { 0.0 });
        assert!(u.cs0_norm(s) > 0.0);
    }

    #[test]
    fn float_format_round_trips_exactly() {
        let values = [
            0.0,
            1.0,
            -1.0 / 3.0,
            std::f64::consts::PI,
            1.2345678901234567e-300,
            -9.876543210987654e250,
            f64::MIN_POSITIVE,
        ];
        for &v in &values {
            let parsed: f64 = fmt_float(v).parse().unwrap();
            assert_eq!(parsed.to_bits(), v.to_bits(), "{v} did not round-trip");
        }
        let mut state = 0x9e3779b97f4a7c15_u64;
        for _ in 0..1000 {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            let v = f64::from_bits(state >> 12 | 0x3ff0000000000000) - 1.5;
            let parsed: f64 = fmt_float(v).parse().unwrap();
            assert_eq!(parsed.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn csv_layout() {
        let g = unit_interval(4);
        let u = GridFunction::from_fn(Arc::clone(&g), |x| x[0]);
        let csv = u.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), "x,value");
        assert_eq!(csv.lines().count(), 5);
        assert!(csv.contains("1.2500000000000000e-1"));
        let manifest = g.manifest_json();
        assert!(manifest.contains("\"n_cells\":4"));
    }
}
