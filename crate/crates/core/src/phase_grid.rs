//! Discrete phase space: a periodic x-box (1D or 2D) times a polar k-annulus.
//!
//! Points are laid out as `((x_cell * n_shells) + shell) * n_angles + angle`,
//! with the x cell index itself row-major over the spatial dimensions. The
//! quadrature weight of a point is the product measure
//! `Π dx · w_r(shell) · r · dθ`, where `r · dθ` is the arc-length element on the
//! shell and `w_r` is the trapezoid weight in `|k|` (exactly `1` for a single
//! shell, which then carries no radial resolution).

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("x_dims must be 1 or 2, got {0}")]
    XDims(usize),
    #[error("x_extent has {extents} entries but x_points has {points}")]
    DimMismatch { extents: usize, points: usize },
    #[error("{what} = {got} is too small; at least 4 points are needed for the stencils")]
    TooFewPoints { what: &'static str, got: usize },
    #[error("x_extent[{index}] = {value} must be positive and finite")]
    BadExtent { index: usize, value: f64 },
    #[error("at least one k shell is required")]
    NoShells,
    #[error("k_shells[{index}] = {radius} is not positive (k=0 excluded)")]
    NonPositiveRadius { index: usize, radius: f64 },
    #[error("k_shells must be strictly ascending (k_shells[{index}] = {radius})")]
    NotAscending { index: usize, radius: f64 },
    #[error("field has {got} values but the grid has {expected} points")]
    LengthMismatch { expected: usize, got: usize },
    #[error("axis {0:?} does not exist on this grid")]
    UnknownAxis(AxisId),
    #[error("index out of range: x cell {x_index}, shell {shell_index}")]
    BadIndex { x_index: usize, shell_index: usize },
}

/// Differentiation axis.
///
/// `X(m)` and `KAngle` are periodic; `KRadius` uses one-sided closures at the
/// annulus edges; `K(c)` is the Cartesian component `∂/∂k^c` assembled from the
/// polar derivatives by the chain rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisId {
    X(usize),
    KRadius,
    KAngle,
    K(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub x_extent: Vec<f64>,
    pub x_points: Vec<usize>,
    pub k_shells: Vec<f64>,
    pub k_angles: usize,
}

impl GridConfig {
    pub fn new(x_extent: Vec<f64>, x_points: Vec<usize>, k_shells: Vec<f64>, k_angles: usize) -> Self {
        Self {
            x_extent,
            x_points,
            k_shells,
            k_angles,
        }
    }

    /// Uniformly spaced shells `r_min, ..., r_max` (inclusive).
    pub fn uniform_shells(r_min: f64, r_max: f64, count: usize) -> Vec<f64> {
        if count == 1 {
            return vec![r_min];
        }
        (0..count)
            .map(|j| r_min + (r_max - r_min) * j as f64 / (count - 1) as f64)
            .collect()
    }
}

/// Real values, one per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            values: vec![0.0; len],
        }
    }

    pub fn constant(len: usize, value: f64) -> Self {
        Self {
            values: vec![value; len],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Self {
        Self::new(self.values.par_iter().map(|&v| f(v)).collect())
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64 + Sync) -> Self {
        Self::new(
            self.values
                .par_iter()
                .zip(other.values.par_iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl std::ops::Index<usize> for ScalarField {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Coordinates of one grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhasePoint {
    /// Spatial coordinates; unused trailing entries are zero in 1D.
    pub x: [f64; 2],
    /// Cartesian wave vector.
    pub k: [f64; 2],
    pub radius: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSpaceGrid {
    x_extent: Vec<f64>,
    x_points: Vec<usize>,
    dx: Vec<f64>,
    shells: Vec<f64>,
    radial_weight: Vec<f64>,
    n_angles: usize,
    dtheta: f64,
    cos_theta: Vec<f64>,
    sin_theta: Vec<f64>,
    n_cells: usize,
    weights: Vec<f64>,
}

/// Validate a configuration and precompute weights and trig tables.
pub fn build_grid(config: &GridConfig) -> Result<PhaseSpaceGrid, GridError> {
    PhaseSpaceGrid::new(config)
}

impl PhaseSpaceGrid {
    pub fn new(config: &GridConfig) -> Result<Self, GridError> {
        let dims = config.x_extent.len();
        if dims != config.x_points.len() {
            return Err(GridError::DimMismatch {
                extents: dims,
                points: config.x_points.len(),
            });
        }
        if !(1..=2).contains(&dims) {
            return Err(GridError::XDims(dims));
        }
        for (index, &value) in config.x_extent.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(GridError::BadExtent { index, value });
            }
        }
        for &n in &config.x_points {
            if n < 4 {
                return Err(GridError::TooFewPoints {
                    what: "x_points",
                    got: n,
                });
            }
        }
        if config.k_angles < 4 {
            return Err(GridError::TooFewPoints {
                what: "k_angles",
                got: config.k_angles,
            });
        }
        if config.k_shells.is_empty() {
            return Err(GridError::NoShells);
        }
        for (index, &radius) in config.k_shells.iter().enumerate() {
            if !(radius.is_finite() && radius > 0.0) {
                return Err(GridError::NonPositiveRadius { index, radius });
            }
            if index > 0 && radius <= config.k_shells[index - 1] {
                return Err(GridError::NotAscending { index, radius });
            }
        }

        let dx: Vec<f64> = config
            .x_extent
            .iter()
            .zip(&config.x_points)
            .map(|(&l, &n)| l / n as f64)
            .collect();
        let shells = config.k_shells.clone();
        let radial_weight = trapezoid_weights(&shells);
        let n_angles = config.k_angles;
        let dtheta = 2.0 * PI / n_angles as f64;
        let cos_theta = (0..n_angles).map(|a| (a as f64 * dtheta).cos()).collect();
        let sin_theta = (0..n_angles).map(|a| (a as f64 * dtheta).sin()).collect();
        let n_cells = config.x_points.iter().product();

        let mut grid = Self {
            x_extent: config.x_extent.clone(),
            x_points: config.x_points.clone(),
            dx,
            shells,
            radial_weight,
            n_angles,
            dtheta,
            cos_theta,
            sin_theta,
            n_cells,
            weights: Vec::new(),
        };
        let cell: f64 = grid.dx.iter().product();
        let mut weights = Vec::with_capacity(grid.len());
        for _ in 0..n_cells {
            for j in 0..grid.shells.len() {
                let w = cell * grid.radial_weight[j] * grid.shells[j] * dtheta;
                weights.extend(std::iter::repeat_n(w, n_angles));
            }
        }
        grid.weights = weights;
        Ok(grid)
    }

    pub fn config(&self) -> GridConfig {
        GridConfig {
            x_extent: self.x_extent.clone(),
            x_points: self.x_points.clone(),
            k_shells: self.shells.clone(),
            k_angles: self.n_angles,
        }
    }

    pub fn len(&self) -> usize {
        self.n_cells * self.shells.len() * self.n_angles
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x_dims(&self) -> usize {
        self.x_points.len()
    }

    pub fn x_points(&self) -> &[usize] {
        &self.x_points
    }

    pub fn x_extent(&self) -> &[f64] {
        &self.x_extent
    }

    pub fn dx(&self) -> &[f64] {
        &self.dx
    }

    pub fn min_dx(&self) -> f64 {
        self.dx.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn shells(&self) -> &[f64] {
        &self.shells
    }

    pub fn n_shells(&self) -> usize {
        self.shells.len()
    }

    pub fn n_angles(&self) -> usize {
        self.n_angles
    }

    pub fn dtheta(&self) -> f64 {
        self.dtheta
    }

    /// Trapezoid weights in `|k|`; a single shell gets weight `1`.
    pub fn radial_weights(&self) -> &[f64] {
        &self.radial_weight
    }

    /// Arc-length weight `r · dθ` of one angle on a shell.
    pub fn arc_weight(&self, shell: usize) -> f64 {
        self.shells[shell] * self.dtheta
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn x_volume(&self) -> f64 {
        self.x_extent.iter().product()
    }

    /// Number of consecutive points sharing one x cell.
    pub fn cell_stride(&self) -> usize {
        self.shells.len() * self.n_angles
    }

    #[inline]
    pub fn index(&self, cell: usize, shell: usize, angle: usize) -> usize {
        (cell * self.shells.len() + shell) * self.n_angles + angle
    }

    /// Split a point index into `(cell, shell, angle)`.
    #[inline]
    pub fn split(&self, p: usize) -> (usize, usize, usize) {
        let angle = p % self.n_angles;
        let rest = p / self.n_angles;
        (rest / self.shells.len(), rest % self.shells.len(), angle)
    }

    /// Multi-index of an x cell (row-major, last dimension fastest).
    pub fn cell_multi_index(&self, cell: usize) -> [usize; 2] {
        match self.x_dims() {
            1 => [cell, 0],
            _ => [cell / self.x_points[1], cell % self.x_points[1]],
        }
    }

    pub fn cell_coords(&self, cell: usize) -> [f64; 2] {
        let m = self.cell_multi_index(cell);
        let mut x = [0.0; 2];
        for d in 0..self.x_dims() {
            x[d] = m[d] as f64 * self.dx[d];
        }
        x
    }

    pub fn point(&self, p: usize) -> PhasePoint {
        let (cell, shell, angle) = self.split(p);
        let r = self.shells[shell];
        PhasePoint {
            x: self.cell_coords(cell),
            k: [r * self.cos_theta[angle], r * self.sin_theta[angle]],
            radius: r,
            theta: angle as f64 * self.dtheta,
        }
    }

    #[inline]
    pub fn cos_theta(&self, angle: usize) -> f64 {
        self.cos_theta[angle]
    }

    #[inline]
    pub fn sin_theta(&self, angle: usize) -> f64 {
        self.sin_theta[angle]
    }

    /// Sample a closure at every grid point.
    pub fn sample(&self, f: impl Fn(&PhasePoint) -> f64 + Sync) -> ScalarField {
        ScalarField::new((0..self.len()).into_par_iter().map(|p| f(&self.point(p))).collect())
    }

    pub fn check(&self, f: &ScalarField) -> Result<(), GridError> {
        self.check_len(f.len())
    }

    pub fn check_len(&self, got: usize) -> Result<(), GridError> {
        if got == self.len() {
            Ok(())
        } else {
            Err(GridError::LengthMismatch {
                expected: self.len(),
                got,
            })
        }
    }

    /// `Σ_p w_p f_p`, summed in index order so results are reproducible.
    pub fn integrate(&self, f: &ScalarField) -> Result<f64, GridError> {
        self.check(f)?;
        Ok(self.integrate_values(f.values()))
    }

    pub(crate) fn integrate_values(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    /// Weighted inner product `Σ_p w_p f_p g_p`.
    pub fn inner(&self, f: &ScalarField, g: &ScalarField) -> Result<f64, GridError> {
        self.check(f)?;
        self.check(g)?;
        Ok(f.values()
            .iter()
            .zip(g.values())
            .zip(&self.weights)
            .map(|((a, b), w)| a * b * w)
            .sum())
    }

    /// Arc-length trapezoid `Σ_a r dθ f(x, r, θ_a)` over one shell of one cell.
    pub fn shell_integrate(&self, f: &[f64], cell: usize, shell: usize) -> Result<f64, GridError> {
        self.check_len(f.len())?;
        if cell >= self.n_cells || shell >= self.shells.len() {
            return Err(GridError::BadIndex {
                x_index: cell,
                shell_index: shell,
            });
        }
        let start = self.index(cell, shell, 0);
        let sum: f64 = f[start..start + self.n_angles].iter().sum();
        Ok(sum * self.arc_weight(shell))
    }

    /// Centered second-order derivative along `axis`.
    ///
    /// Periodic axes wrap and are exactly skew-adjoint under the quadrature
    /// weights. On a single-shell grid the radial derivative is identically
    /// zero (fields are treated as locally independent of `|k|`); with two
    /// shells it is the two-point difference.
    pub fn ddx(&self, f: &ScalarField, axis: AxisId) -> Result<ScalarField, GridError> {
        self.check(f)?;
        let values = f.values();
        let out = match axis {
            AxisId::X(m) if m < self.x_dims() => self.ddx_periodic_x(values, m),
            AxisId::KAngle => self.ddx_angle(values),
            AxisId::KRadius => self.ddx_radius(values),
            AxisId::K(c) if c < 2 => {
                let dr = self.ddx_radius(values);
                let dth = self.ddx_angle(values);
                (0..self.len())
                    .into_par_iter()
                    .map(|p| {
                        let (_, shell, angle) = self.split(p);
                        let r = self.shells[shell];
                        let (c_t, s_t) = (self.cos_theta[angle], self.sin_theta[angle]);
                        if c == 0 {
                            c_t * dr[p] - s_t / r * dth[p]
                        } else {
                            s_t * dr[p] + c_t / r * dth[p]
                        }
                    })
                    .collect()
            }
            other => return Err(GridError::UnknownAxis(other)),
        };
        Ok(ScalarField::new(out))
    }

    fn ddx_periodic_x(&self, f: &[f64], m: usize) -> Vec<f64> {
        let stride = self.cell_stride();
        let n = self.x_points[m];
        let inv = 1.0 / (2.0 * self.dx[m]);
        (0..self.len())
            .into_par_iter()
            .map(|p| {
                let cell = p / stride;
                let offset = p % stride;
                let mut idx = self.cell_multi_index(cell);
                let i = idx[m];
                idx[m] = (i + 1) % n;
                let plus = self.flatten_cell(idx);
                idx[m] = (i + n - 1) % n;
                let minus = self.flatten_cell(idx);
                (f[plus * stride + offset] - f[minus * stride + offset]) * inv
            })
            .collect()
    }

    fn flatten_cell(&self, idx: [usize; 2]) -> usize {
        match self.x_dims() {
            1 => idx[0],
            _ => idx[0] * self.x_points[1] + idx[1],
        }
    }

    fn ddx_angle(&self, f: &[f64]) -> Vec<f64> {
        let na = self.n_angles;
        let inv = 1.0 / (2.0 * self.dtheta);
        (0..self.len())
            .into_par_iter()
            .map(|p| {
                let a = p % na;
                let base = p - a;
                (f[base + (a + 1) % na] - f[base + (a + na - 1) % na]) * inv
            })
            .collect()
    }

    fn ddx_radius(&self, f: &[f64]) -> Vec<f64> {
        let nr = self.shells.len();
        let r = &self.shells;
        (0..self.len())
            .into_par_iter()
            .map(|p| {
                let (cell, j, a) = self.split(p);
                let at = |jj: usize| f[self.index(cell, jj, a)];
                match nr {
                    1 => 0.0,
                    2 => (at(1) - at(0)) / (r[1] - r[0]),
                    _ => {
                        let (c0, _c1, c2, j0) = if j == 0 {
                            let (h1, h2) = (r[1] - r[0], r[2] - r[1]);
                            (
                                -(2.0 * h1 + h2) / (h1 * (h1 + h2)),
                                (h1 + h2) / (h1 * h2),
                                -h1 / (h2 * (h1 + h2)),
                                0,
                            )
                        } else if j == nr - 1 {
                            let (h1, h2) = (r[nr - 2] - r[nr - 3], r[nr - 1] - r[nr - 2]);
                            (
                                h2 / (h1 * (h1 + h2)),
                                -(h1 + h2) / (h1 * h2),
                                (2.0 * h2 + h1) / (h2 * (h1 + h2)),
                                nr - 3,
                            )
                        } else {
                            let (h1, h2) = (r[j] - r[j - 1], r[j + 1] - r[j]);
                            (
                                -h2 / (h1 * (h1 + h2)),
                                (h2 - h1) / (h1 * h2),
                                h1 / (h2 * (h1 + h2)),
                                j - 1,
                            )
                        };
                        // the weights sum to zero; differencing keeps constants exact
                        let mid = at(j0 + 1);
                        c0 * (at(j0) - mid) + c2 * (at(j0 + 2) - mid)
                    }
                }
            })
            .collect()
    }
}

fn trapezoid_weights(r: &[f64]) -> Vec<f64> {
    let n = r.len();
    if n == 1 {
        return vec![1.0];
    }
    (0..n)
        .map(|j| {
            let left = if j > 0 { r[j] - r[j - 1] } else { 0.0 };
            let right = if j + 1 < n { r[j + 1] - r[j] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid_1d(nx: usize, shells: Vec<f64>, na: usize) -> PhaseSpaceGrid {
        build_grid(&GridConfig::new(vec![2.0 * PI], vec![nx], shells, na)).unwrap()
    }

    #[test]
    fn point_count_and_weights() {
        let g = grid_1d(8, vec![1.0], 8);
        assert_eq!(g.len(), 64);
        let expected = (2.0 * PI / 8.0) * (1.0 * 2.0 * PI / 8.0);
        for &w in g.weights() {
            assert!((w - expected).abs() < 1e-15);
        }

        let g2 = build_grid(&GridConfig::new(
            vec![1.0, 1.0],
            vec![16, 16],
            vec![0.5, 1.0],
            16,
        ))
        .unwrap();
        assert_eq!(g2.len(), 16 * 16 * 2 * 16);
        assert!(g2.weights().iter().all(|&w| w > 0.0));
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = |c: GridConfig| build_grid(&c).unwrap_err();
        assert_eq!(
            bad(GridConfig::new(vec![1.0], vec![8], vec![0.0], 8)),
            GridError::NonPositiveRadius { index: 0, radius: 0.0 }
        );
        assert!(matches!(
            bad(GridConfig::new(vec![1.0], vec![3], vec![1.0], 8)),
            GridError::TooFewPoints { what: "x_points", got: 3 }
        ));
        assert!(matches!(
            bad(GridConfig::new(vec![1.0], vec![8], vec![1.0], 2)),
            GridError::TooFewPoints { what: "k_angles", .. }
        ));
        assert!(matches!(
            bad(GridConfig::new(vec![1.0], vec![8], vec![1.0, 0.5], 8)),
            GridError::NotAscending { index: 1, .. }
        ));
        assert_eq!(
            bad(GridConfig::new(vec![1.0; 3], vec![8; 3], vec![1.0], 8)),
            GridError::XDims(3)
        );
    }

    #[test]
    fn derivative_of_constant_is_zero() {
        let g = build_grid(&GridConfig::new(vec![2.0, 3.0], vec![6, 5], vec![0.5, 1.0, 1.5], 8)).unwrap();
        let f = ScalarField::constant(g.len(), 3.25);
        for axis in [AxisId::X(0), AxisId::X(1), AxisId::KAngle, AxisId::KRadius, AxisId::K(0), AxisId::K(1)] {
            assert!(g.ddx(&f, axis).unwrap().max_abs() < 1e-12, "{axis:?}");
        }
        assert_eq!(g.ddx(&f, AxisId::X(2)).unwrap_err(), GridError::UnknownAxis(AxisId::X(2)));
    }

    #[test]
    fn sine_derivative_converges_at_second_order() {
        let err = |n: usize| {
            let g = grid_1d(n, vec![1.0], 4);
            let f = g.sample(|p| p.x[0].sin());
            let d = g.ddx(&f, AxisId::X(0)).unwrap();
            let exact = g.sample(|p| p.x[0].cos());
            d.zip_map(&exact, |a, b| a - b).max_abs()
        };
        let (e1, e2) = (err(64), err(128));
        assert!(e1 < 2e-3);
        let order = (e1 / e2).log2();
        assert!((order - 2.0).abs() < 0.05, "order {order}");
    }

    #[test]
    fn periodic_axes_are_skew_adjoint() {
        let g = build_grid(&GridConfig::new(vec![1.0, 2.0], vec![5, 6], vec![0.7, 1.1, 1.6], 7)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = ScalarField::new((0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect());
        let h = ScalarField::new((0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect());
        for axis in [AxisId::X(0), AxisId::X(1), AxisId::KAngle] {
            let a = g.inner(&f, &g.ddx(&h, axis).unwrap()).unwrap();
            let b = g.inner(&g.ddx(&f, axis).unwrap(), &h).unwrap();
            let scale = a.abs().max(b.abs());
            assert!((a + b).abs() <= 1e-12 * scale, "{axis:?}: {a} vs {b}");
        }
    }

    #[test]
    fn radial_stencil_is_exact_for_quadratics() {
        let shells = vec![0.5, 0.7, 1.0, 1.2, 1.7];
        let g = grid_1d(4, shells, 4);
        let f = g.sample(|p| 2.0 * p.radius * p.radius - p.radius + 0.5);
        let d = g.ddx(&f, AxisId::KRadius).unwrap();
        let exact = g.sample(|p| 4.0 * p.radius - 1.0);
        assert!(d.zip_map(&exact, |a, b| a - b).max_abs() < 1e-12);
    }

    #[test]
    fn single_shell_has_no_radial_derivative() {
        let g = grid_1d(4, vec![1.3], 6);
        let f = g.sample(|p| p.radius * p.theta.cos());
        assert_eq!(g.ddx(&f, AxisId::KRadius).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn cartesian_k_derivative_converges() {
        let err = |n: usize| {
            let g = grid_1d(4, GridConfig::uniform_shells(0.5, 1.5, n), n);
            let f = g.sample(|p| p.k[0] * p.k[0] + 0.3 * p.k[1]);
            let d0 = g.ddx(&f, AxisId::K(0)).unwrap();
            let d1 = g.ddx(&f, AxisId::K(1)).unwrap();
            let e0 = d0.zip_map(&g.sample(|p| 2.0 * p.k[0]), |a, b| a - b).max_abs();
            let e1 = d1.zip_map(&g.sample(|_| 0.3), |a, b| a - b).max_abs();
            e0.max(e1)
        };
        let (a, b) = (err(32), err(64));
        assert!((a / b).log2() > 1.8, "{a} {b}");
    }

    #[test]
    fn integrals() {
        let g = build_grid(&GridConfig::new(vec![2.0 * PI], vec![16], vec![0.5, 1.0, 1.5], 16)).unwrap();
        let one = ScalarField::constant(g.len(), 1.0);
        let vol: f64 = g.x_volume() * g.shells().iter().zip(g.radial_weights()).map(|(r, w)| 2.0 * PI * r * w).sum::<f64>();
        assert!((g.integrate(&one).unwrap() - vol).abs() < 1e-12 * vol);

        let s = g.sample(|p| p.x[0].sin());
        assert!(g.integrate(&s).unwrap().abs() < 1e-12);

        // cos²θ on a full period: trapezoid is exact with ≥ 4 points.
        let c2 = g.sample(|p| p.theta.cos().powi(2));
        assert!((g.integrate(&c2).unwrap() - 0.5 * vol).abs() < 1e-12 * vol);
    }

    #[test]
    fn shell_quadrature() {
        let g = grid_1d(4, vec![1.0, 2.0], 12);
        let one = vec![1.0; g.len()];
        assert!((g.shell_integrate(&one, 1, 1).unwrap() - 4.0 * PI).abs() < 1e-12);
        let cos = g.sample(|p| p.theta.cos());
        assert!(g.shell_integrate(cos.values(), 2, 0).unwrap().abs() < 1e-12);
        let cos2 = g.sample(|p| p.theta.cos().powi(2));
        // ∫ cos²θ r dθ = π r on r = 2.
        assert!((g.shell_integrate(cos2.values(), 0, 1).unwrap() - 2.0 * PI).abs() < 1e-12);
        assert!(g.shell_integrate(&one, 4, 0).is_err());
        assert!(g.shell_integrate(&one, 0, 2).is_err());
    }
}
