//! The Hermitian coherence matrix and its Stokes parametrisation.
//!
//! A 2×2 Hermitian matrix is stored as its four real Stokes components
//! `(I, Q, U, V)`, with
//!
//! ```text
//! W = ½ [[I + Q, U + iV],
//!        [U − iV, I − Q]]
//! ```
//!
//! so Hermiticity holds by construction and never drifts.

use std::io::{self, BufRead, Write};
use std::ops::{Add, AddAssign, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::{Complex, Matrix2};
use rayon::prelude::*;
use thiserror::Error;

use crate::phase_grid::{GridError, PhaseSpaceGrid, ScalarField};

pub type Complex64 = Complex<f64>;
pub type ComplexMatrix2 = Matrix2<Complex64>;

/// Real 4×4 action of `W ↦ T W Tᵀ` on Stokes vectors, for real `T`.
pub type Mueller = [[f64; 4]; 4];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoherenceError {
    #[error("matrix is not Hermitian: defect {defect:.3e} exceeds tolerance {tol:.1e}")]
    NotHermitian { defect: f64, tol: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("snapshot: {0}")]
    Snapshot(String),
}

/// Default Hermiticity tolerance for [`matrix_to_stokes`].
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Hermitian2 {
    pub stokes: [f64; 4],
}

impl Hermitian2 {
    pub const ZERO: Self = Self { stokes: [0.0; 4] };

    pub const fn new(i: f64, q: f64, u: f64, v: f64) -> Self {
        Self { stokes: [i, q, u, v] }
    }

    /// `c · I₂`, i.e. Stokes `(2c, 0, 0, 0)`.
    pub fn scalar(c: f64) -> Self {
        Self::new(2.0 * c, 0.0, 0.0, 0.0)
    }

    pub fn i(&self) -> f64 {
        self.stokes[0]
    }
    pub fn q(&self) -> f64 {
        self.stokes[1]
    }
    pub fn u(&self) -> f64 {
        self.stokes[2]
    }
    pub fn v(&self) -> f64 {
        self.stokes[3]
    }

    pub fn to_matrix(&self) -> ComplexMatrix2 {
        stokes_to_matrix(self.stokes)
    }

    pub fn trace(&self) -> f64 {
        self.stokes[0]
    }

    /// `Tr(A B) = ½ (I_A I_B + Q_A Q_B + U_A U_B + V_A V_B)`.
    pub fn trace_product(&self, other: &Self) -> f64 {
        0.5 * self
            .stokes
            .iter()
            .zip(&other.stokes)
            .map(|(a, b)| a * b)
            .sum::<f64>()
    }

    pub fn frobenius(&self) -> f64 {
        self.trace_product(self).sqrt()
    }

    /// Degree of polarisation magnitude `sqrt(Q² + U² + V²)`.
    pub fn polarization(&self) -> f64 {
        (self.q().powi(2) + self.u().powi(2) + self.v().powi(2)).sqrt()
    }

    /// Eigenvalues `(I ∓ |p|) / 2`, smallest first.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let p = self.polarization();
        (0.5 * (self.i() - p), 0.5 * (self.i() + p))
    }

    /// `T W Tᵀ` for a real matrix `T`.
    pub fn conjugate_real(&self, t: &Matrix2<f64>) -> Self {
        apply_mueller(&mueller_of(t), self)
    }

    pub fn max_abs(&self) -> f64 {
        self.stokes.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

impl Add for Hermitian2 {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut s = self.stokes;
        for (a, b) in s.iter_mut().zip(rhs.stokes) {
            *a += b;
        }
        Self { stokes: s }
    }
}

impl AddAssign for Hermitian2 {
    fn add_assign(&mut self, rhs: Self) {
        *self = *self + rhs;
    }
}

impl Sub for Hermitian2 {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        self + (-rhs)
    }
}

impl Neg for Hermitian2 {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl Mul<f64> for Hermitian2 {
    type Output = Self;
    fn mul(self, c: f64) -> Self {
        Self {
            stokes: self.stokes.map(|v| v * c),
        }
    }
}

pub fn stokes_to_matrix(s: [f64; 4]) -> ComplexMatrix2 {
    let [i, q, u, v] = s;
    Matrix2::new(
        Complex::new(0.5 * (i + q), 0.0),
        Complex::new(0.5 * u, 0.5 * v),
        Complex::new(0.5 * u, -0.5 * v),
        Complex::new(0.5 * (i - q), 0.0),
    )
}

/// Inverse of [`stokes_to_matrix`], rejecting inputs whose Hermiticity defect
/// exceeds `HERMITIAN_TOL · max(1, |m|)`.
pub fn matrix_to_stokes(m: &ComplexMatrix2) -> Result<[f64; 4], CoherenceError> {
    matrix_to_stokes_tol(m, HERMITIAN_TOL)
}

pub fn matrix_to_stokes_tol(m: &ComplexMatrix2, tol: f64) -> Result<[f64; 4], CoherenceError> {
    let scale = m.iter().fold(1.0_f64, |acc, z| acc.max(z.norm()));
    let defect = (m[(0, 1)] - m[(1, 0)].conj())
        .norm()
        .max(m[(0, 0)].im.abs())
        .max(m[(1, 1)].im.abs());
    if defect > tol * scale {
        return Err(CoherenceError::NotHermitian { defect, tol });
    }
    let a = m[(0, 0)].re;
    let d = m[(1, 1)].re;
    let c = 0.5 * (m[(0, 1)] + m[(1, 0)].conj());
    Ok([a + d, a - d, 2.0 * c.re, 2.0 * c.im])
}

/// Stokes-space matrix of `W ↦ T W Tᵀ`.
///
/// The real symmetric part of `W` is congruence-transformed; the imaginary
/// (antisymmetric) part picks up `det T`.
pub fn mueller_of(t: &Matrix2<f64>) -> Mueller {
    let (a, b, c, d) = (t[(0, 0)], t[(0, 1)], t[(1, 0)], t[(1, 1)]);
    [
        [
            0.5 * (a * a + b * b + c * c + d * d),
            0.5 * (a * a - b * b + c * c - d * d),
            a * b + c * d,
            0.0,
        ],
        [
            0.5 * (a * a + b * b - c * c - d * d),
            0.5 * (a * a - b * b - c * c + d * d),
            a * b - c * d,
            0.0,
        ],
        [a * c + b * d, a * c - b * d, a * d + b * c, 0.0],
        [0.0, 0.0, 0.0, a * d - b * c],
    ]
}

#[inline]
pub fn apply_mueller(m: &Mueller, w: &Hermitian2) -> Hermitian2 {
    let s = &w.stokes;
    let mut out = [0.0; 4];
    for (o, row) in out.iter_mut().zip(m) {
        *o = row[0] * s[0] + row[1] * s[1] + row[2] * s[2] + row[3] * s[3];
    }
    Hermitian2 { stokes: out }
}

/// One Hermitian matrix per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianField {
    data: Vec<Hermitian2>,
}

impl HermitianField {
    pub fn new(data: Vec<Hermitian2>) -> Self {
        Self { data }
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            data: vec![Hermitian2::ZERO; len],
        }
    }

    pub fn constant(len: usize, value: Hermitian2) -> Self {
        Self {
            data: vec![value; len],
        }
    }

    /// `f · I₂` at every point.
    pub fn scalar_identity(f: &ScalarField) -> Self {
        Self::new(f.values().iter().map(|&c| Hermitian2::scalar(c)).collect())
    }

    pub fn from_components(c: [&ScalarField; 4]) -> Self {
        Self::new(
            (0..c[0].len())
                .map(|p| Hermitian2::new(c[0][p], c[1][p], c[2][p], c[3][p]))
                .collect(),
        )
    }

    pub fn sample(grid: &PhaseSpaceGrid, f: impl Fn(&crate::phase_grid::PhasePoint) -> [f64; 4] + Sync) -> Self {
        Self::new(
            (0..grid.len())
                .into_par_iter()
                .map(|p| Hermitian2 {
                    stokes: f(&grid.point(p)),
                })
                .collect(),
        )
    }

    pub fn data(&self) -> &[Hermitian2] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Hermitian2] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Stokes component `c` (0 = I, 1 = Q, 2 = U, 3 = V).
    pub fn component(&self, c: usize) -> ScalarField {
        ScalarField::new(self.data.iter().map(|h| h.stokes[c]).collect())
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::new(self.data.par_iter().map(|h| *h * c).collect())
    }

    /// `self + c · other`
    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        Self::new(
            self.data
                .par_iter()
                .zip(other.data.par_iter())
                .map(|(a, b)| *a + *b * c)
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.axpy(-1.0, other)
    }

    /// Pointwise `f · W`.
    pub fn scale_by(&self, f: &ScalarField) -> Self {
        Self::new(
            self.data
                .par_iter()
                .zip(f.values().par_iter())
                .map(|(h, &c)| *h * c)
                .collect(),
        )
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, h| m.max(h.max_abs()))
    }

    /// Largest polarisation component `max(|Q|, |U|, |V|)`.
    pub fn max_polarization_component(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, h| {
            m.max(h.q().abs()).max(h.u().abs()).max(h.v().abs())
        })
    }

    /// Weighted inner product `⟨A, B⟩ = Σ_p w_p Tr(A_p B_p)`.
    pub fn inner(&self, grid: &PhaseSpaceGrid, other: &Self) -> Result<f64, GridError> {
        grid.check_len(self.len())?;
        grid.check_len(other.len())?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .zip(grid.weights())
            .map(|((a, b), w)| w * a.trace_product(b))
            .sum())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|h| h.stokes.iter().all(|v| v.is_finite()))
    }
}

/// The coherence matrix field `W(x, k, t)`.
#[derive(Debug, Clone)]
pub struct CoherenceField {
    pub grid: Arc<PhaseSpaceGrid>,
    pub data: HermitianField,
    pub time: f64,
}

impl CoherenceField {
    pub fn new(grid: Arc<PhaseSpaceGrid>, data: HermitianField, time: f64) -> Result<Self, CoherenceError> {
        grid.check_len(data.len())?;
        Ok(Self { grid, data, time })
    }

    /// Unpolarised field `½ I(x,k) I₂` from an intensity.
    pub fn unpolarized(grid: Arc<PhaseSpaceGrid>, intensity: &ScalarField) -> Result<Self, CoherenceError> {
        let data = HermitianField::new(
            intensity
                .values()
                .iter()
                .map(|&i| Hermitian2::new(i, 0.0, 0.0, 0.0))
                .collect(),
        );
        Self::new(grid, data, 0.0)
    }
}

/// `Tr W = I` at every point.
pub fn trace_field(w: &CoherenceField) -> ScalarField {
    w.data.component(0)
}

const SNAPSHOT_MAGIC: &str = "polrad-snapshot 1";

/// Write a snapshot: a text header naming the grid, terminated by the line
/// `end_header`, followed by `(I, Q, U, V)` per point as little-endian `f64`,
/// in grid point order.
pub fn write_snapshot(out: &mut impl Write, w: &CoherenceField, step: usize) -> io::Result<()> {
    let g = &w.grid;
    let join = |v: &[String]| v.join(" ");
    writeln!(out, "{SNAPSHOT_MAGIC}")?;
    writeln!(
        out,
        "x_points {}",
        join(&g.x_points().iter().map(|n| n.to_string()).collect::<Vec<_>>())
    )?;
    writeln!(
        out,
        "x_extent {}",
        join(&g.x_extent().iter().map(|n| format!("{n:e}")).collect::<Vec<_>>())
    )?;
    writeln!(
        out,
        "k_shells {}",
        join(&g.shells().iter().map(|n| format!("{n:e}")).collect::<Vec<_>>())
    )?;
    writeln!(out, "k_angles {}", g.n_angles())?;
    writeln!(out, "points {}", g.len())?;
    writeln!(out, "step {step}")?;
    writeln!(out, "time {:e}", w.time)?;
    writeln!(out, "layout IQUV f64le")?;
    writeln!(out, "end_header")?;
    let mut buf = Vec::with_capacity(g.len() * 32);
    for h in w.data.data() {
        for v in h.stokes {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.write_all(&buf)
}

/// Parsed snapshot contents.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub grid: crate::phase_grid::GridConfig,
    pub step: usize,
    pub time: f64,
    pub data: HermitianField,
}

pub fn read_snapshot(input: &mut impl BufRead) -> Result<Snapshot, CoherenceError> {
    let bad = |m: &str| CoherenceError::Snapshot(m.to_string());
    let mut line = String::new();
    let mut header = std::collections::HashMap::new();
    let mut first = true;
    loop {
        line.clear();
        if input.read_line(&mut line).map_err(|e| bad(&e.to_string()))? == 0 {
            return Err(bad("unexpected end of header"));
        }
        let l = line.trim_end();
        if first {
            if l != SNAPSHOT_MAGIC {
                return Err(bad("missing snapshot magic line"));
            }
            first = false;
            continue;
        }
        if l == "end_header" {
            break;
        }
        let (key, value) = l.split_once(' ').ok_or_else(|| bad(&format!("malformed header line `{l}`")))?;
        header.insert(key.to_string(), value.to_string());
    }
    let field = |k: &str| header.get(k).ok_or_else(|| bad(&format!("missing header key `{k}`")));
    let parse_list = |k: &str| -> Result<Vec<f64>, CoherenceError> {
        field(k)?
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| bad(&format!("bad number in `{k}`"))))
            .collect()
    };
    let x_points: Vec<usize> = field("x_points")?
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| bad("bad x_points")))
        .collect::<Result<_, _>>()?;
    let grid = crate::phase_grid::GridConfig {
        x_extent: parse_list("x_extent")?,
        x_points,
        k_shells: parse_list("k_shells")?,
        k_angles: field("k_angles")?.parse().map_err(|_| bad("bad k_angles"))?,
    };
    let points: usize = field("points")?.parse().map_err(|_| bad("bad points"))?;
    let step = field("step")?.parse().map_err(|_| bad("bad step"))?;
    let time = field("time")?.parse().map_err(|_| bad("bad time"))?;
    if field("layout")? != "IQUV f64le" {
        return Err(bad("unsupported layout"));
    }
    let mut bytes = vec![0u8; points * 32];
    input.read_exact(&mut bytes).map_err(|e| bad(&e.to_string()))?;
    let data = bytes
        .chunks_exact(32)
        .map(|rec| {
            let mut s = [0.0; 4];
            for (c, chunk) in rec.chunks_exact(8).enumerate() {
                s[c] = f64::from_le_bytes(chunk.try_into().unwrap());
            }
            Hermitian2 { stokes: s }
        })
        .collect();
    Ok(Snapshot {
        grid,
        step,
        time,
        data: HermitianField::new(data),
    })
}
