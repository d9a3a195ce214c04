//! Scattering kernels `(σ, T)` on velocity shells, the gain operator
//! `S(W) = ∫ σ T W′ Tᵀ dλ(k′)` and the total rate `Σ`.
//!
//! Kernels are homogeneous in `x`: one `N_θ × N_θ` table per shell is shared
//! by every spatial cell.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix2;
use rayon::prelude::*;
use thiserror::Error;

use crate::coherence::{apply_mueller, mueller_of, Hermitian2, HermitianField, Mueller};
use crate::phase_grid::{GridError, PhaseSpaceGrid, ScalarField};

/// Tolerance for `∫ σ T Tᵀ dλ ∝ I₂`.
pub const RATE_TOL: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("sigma is negative at shell {shell}, angles ({a}, {b}): {value}")]
    Negative { shell: usize, a: usize, b: usize, value: f64 },
    #[error("sigma is not symmetric at shell {shell}, angles ({a}, {b})")]
    AsymmetricSigma { shell: usize, a: usize, b: usize },
    #[error("T(k', k) differs from T(k, k')^T at shell {shell}, angles ({a}, {b})")]
    TransposeViolation { shell: usize, a: usize, b: usize },
    #[error("total rate is not a multiple of the identity at shell {shell}, angle {angle}: defect {defect:.3e}")]
    RateNotScalar { shell: usize, angle: usize, defect: f64 },
    #[error("kernel parameter out of range: {0}")]
    BadParameter(String),
    #[error("kernel was built for a different grid")]
    GridMismatch,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Angular profile of `σ` as a function of the signed angle `Δ = θ − θ′`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaProfile {
    Constant(f64),
    /// `σ₀ (1 + g cos Δ)`, with `|g| ≤ 1` to keep `σ ≥ 0`.
    Cosine { sigma0: f64, anisotropy: f64 },
}

impl SigmaProfile {
    pub fn eval(&self, delta: f64) -> f64 {
        match *self {
            SigmaProfile::Constant(s) => s,
            SigmaProfile::Cosine { sigma0, anisotropy } => sigma0 * (1.0 + anisotropy * delta.cos()),
        }
    }

    fn check(&self) -> Result<(), KernelError> {
        let (s, g) = match *self {
            SigmaProfile::Constant(s) => (s, 0.0),
            SigmaProfile::Cosine { sigma0, anisotropy } => (sigma0, anisotropy),
        };
        if !(s >= 0.0 && s.is_finite()) {
            return Err(KernelError::BadParameter(format!("sigma0 must be finite and >= 0, got {s}")));
        }
        if !(g.abs() <= 1.0) {
            return Err(KernelError::BadParameter(format!("anisotropy must satisfy |g| <= 1, got {g}")));
        }
        Ok(())
    }
}

/// User supplied `(radius, θ, θ′) ↦ (σ, T)`.
pub type KernelFn = dyn Fn(f64, f64, f64) -> (f64, Matrix2<f64>) + Send + Sync;

#[derive(Clone)]
pub enum KernelSpec {
    /// `σ ≡ 0`.
    None,
    Isotropic { sigma0: f64 },
    AngleDependent { profile: SigmaProfile },
    /// `T = R(β Δ)`, a planar rotation.
    Rotation { profile: SigmaProfile, gain: f64 },
    /// Arbitrary tables; validated like the others.
    Custom(Arc<KernelFn>),
}

impl fmt::Debug for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSpec::None => write!(f, "None"),
            KernelSpec::Isotropic { sigma0 } => write!(f, "Isotropic {{ sigma0: {sigma0} }}"),
            KernelSpec::AngleDependent { profile } => write!(f, "AngleDependent {{ profile: {profile:?} }}"),
            KernelSpec::Rotation { profile, gain } => {
                write!(f, "Rotation {{ profile: {profile:?}, gain: {gain} }}")
            }
            KernelSpec::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

pub fn rotation(phi: f64) -> Matrix2<f64> {
    let (s, c) = phi.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Signed angle from direction `b` to direction `a` on an `n`-point circle,
/// in `[−π, π]`. Antisymmetric in `(a, b)`; at the antipode the sign follows
/// the index order.
pub fn signed_delta(a: usize, b: usize, n: usize) -> f64 {
    if a < b {
        return -signed_delta(b, a, n);
    }
    let dtheta = 2.0 * PI / n as f64;
    let d = (a + n - b) % n;
    if 2 * d < n {
        d as f64 * dtheta
    } else if 2 * d > n {
        d as f64 * dtheta - 2.0 * PI
    } else {
        PI
    }
}

#[derive(Debug, Clone)]
struct ShellTable {
    sigma: Vec<f64>,
    tmat: Vec<Matrix2<f64>>,
    /// `σ · r dθ · M(T)`, ready for the gain sum.
    weighted_mueller: Vec<Mueller>,
    total_rate: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ScatteringKernel {
    n_cells: usize,
    shells: Vec<f64>,
    n_angles: usize,
    tables: Vec<ShellTable>,
    total_rate: ScalarField,
    zero: bool,
}

pub fn build_kernel(spec: &KernelSpec, grid: &PhaseSpaceGrid) -> Result<ScatteringKernel, KernelError> {
    let na = grid.n_angles();
    let eval: Box<dyn Fn(usize, usize, usize) -> (f64, Matrix2<f64>) + Sync> = match spec {
        KernelSpec::None => Box::new(|_, _, _| (0.0, Matrix2::identity())),
        KernelSpec::Isotropic { sigma0 } => {
            SigmaProfile::Constant(*sigma0).check()?;
            let s = *sigma0;
            Box::new(move |_, _, _| (s, Matrix2::identity()))
        }
        KernelSpec::AngleDependent { profile } => {
            profile.check()?;
            let p = *profile;
            Box::new(move |_, a, b| (p.eval(signed_delta(a, b, na)), Matrix2::identity()))
        }
        KernelSpec::Rotation { profile, gain } => {
            profile.check()?;
            if !gain.is_finite() {
                return Err(KernelError::BadParameter(format!("rotation gain must be finite, got {gain}")));
            }
            let (p, beta) = (*profile, *gain);
            Box::new(move |_, a, b| {
                let d = signed_delta(a, b, na);
                (p.eval(d), rotation(beta * d))
            })
        }
        KernelSpec::Custom(f) => {
            let f = f.clone();
            let shells = grid.shells().to_vec();
            let dtheta = grid.dtheta();
            Box::new(move |j, a, b| f(shells[j], a as f64 * dtheta, b as f64 * dtheta))
        }
    };

    let mut tables = Vec::with_capacity(grid.n_shells());
    for j in 0..grid.n_shells() {
        let arc = grid.arc_weight(j);
        let entries: Vec<(f64, Matrix2<f64>)> = (0..na * na).map(|ab| eval(j, ab / na, ab % na)).collect();
        let sigma: Vec<f64> = entries.iter().map(|e| e.0).collect();
        let tmat: Vec<Matrix2<f64>> = entries.iter().map(|e| e.1).collect();
        for a in 0..na {
            for b in 0..na {
                let s_ab = sigma[a * na + b];
                if !(s_ab >= 0.0) {
                    return Err(KernelError::Negative { shell: j, a, b, value: s_ab });
                }
                let s_ba = sigma[b * na + a];
                if (s_ab - s_ba).abs() > SYMMETRY_TOL * s_ab.abs().max(1.0) {
                    return Err(KernelError::AsymmetricSigma { shell: j, a, b });
                }
                let d = tmat[a * na + b] - tmat[b * na + a].transpose();
                if d.abs().max() > SYMMETRY_TOL * tmat[a * na + b].abs().max().max(1.0) {
                    return Err(KernelError::TransposeViolation { shell: j, a, b });
                }
            }
        }
        let mut total_rate = Vec::with_capacity(na);
        for a in 0..na {
            let mut m = Matrix2::<f64>::zeros();
            for b in 0..na {
                let t = &tmat[a * na + b];
                m += t * t.transpose() * (arc * sigma[a * na + b]);
            }
            let defect = m[(0, 1)].abs().max(m[(1, 0)].abs()).max((m[(0, 0)] - m[(1, 1)]).abs());
            if defect > RATE_TOL * m.abs().max().max(1.0) {
                return Err(KernelError::RateNotScalar { shell: j, angle: a, defect });
            }
            total_rate.push(0.5 * (m[(0, 0)] + m[(1, 1)]));
        }
        let weighted_mueller = (0..na * na)
            .map(|ab| {
                let mut mu = mueller_of(&tmat[ab]);
                let c = arc * sigma[ab];
                for row in mu.iter_mut() {
                    for v in row.iter_mut() {
                        *v *= c;
                    }
                }
                mu
            })
            .collect();
        tables.push(ShellTable {
            sigma,
            tmat,
            weighted_mueller,
            total_rate,
        });
    }

    let total_rate = ScalarField::new(
        (0..grid.len())
            .map(|p| {
                let (_, j, a) = grid.split(p);
                tables[j].total_rate[a]
            })
            .collect(),
    );
    let zero = tables.iter().all(|t| t.sigma.iter().all(|&s| s == 0.0));
    Ok(ScatteringKernel {
        n_cells: grid.n_cells(),
        shells: grid.shells().to_vec(),
        n_angles: na,
        tables,
        total_rate,
        zero,
    })
}

impl ScatteringKernel {
    /// `σ(x, k_a, k_b)` on shell `shell`; identical for every `x`.
    pub fn sigma(&self, shell: usize, a: usize, b: usize) -> f64 {
        self.tables[shell].sigma[a * self.n_angles + b]
    }

    pub fn tmat(&self, shell: usize, a: usize, b: usize) -> Matrix2<f64> {
        self.tables[shell].tmat[a * self.n_angles + b]
    }

    /// `Σ(x, k)` per grid point.
    pub fn total_rate(&self) -> &ScalarField {
        &self.total_rate
    }

    pub fn n_angles(&self) -> usize {
        self.n_angles
    }

    pub fn n_shells(&self) -> usize {
        self.shells.len()
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }

    pub fn max_total_rate(&self) -> f64 {
        self.total_rate.max_abs()
    }

    pub fn check_grid(&self, grid: &PhaseSpaceGrid) -> Result<(), KernelError> {
        if grid.n_cells() != self.n_cells || grid.shells() != self.shells.as_slice() || grid.n_angles() != self.n_angles {
            return Err(KernelError::GridMismatch);
        }
        Ok(())
    }
}

/// `S(W)(x, k) = ∫ σ T W(x, k′) Tᵀ dλ(k′)`.
pub fn apply_scattering(
    kernel: &ScatteringKernel,
    grid: &PhaseSpaceGrid,
    w: &HermitianField,
) -> Result<HermitianField, KernelError> {
    kernel.check_grid(grid)?;
    grid.check_len(w.len())?;
    let na = kernel.n_angles;
    let ns = kernel.shells.len();
    if kernel.zero {
        return Ok(HermitianField::zeros(w.len()));
    }
    let mut out = vec![Hermitian2::ZERO; w.len()];
    out.par_chunks_mut(na)
        .zip(w.data().par_chunks(na))
        .enumerate()
        .for_each(|(block, (o, src))| {
            let table = &kernel.tables[block % ns];
            for (a, slot) in o.iter_mut().enumerate() {
                let row = &table.weighted_mueller[a * na..(a + 1) * na];
                let mut acc = Hermitian2::ZERO;
                for (m, wb) in row.iter().zip(src) {
                    acc += apply_mueller(m, wb);
                }
                *slot = acc;
            }
        });
    Ok(HermitianField::new(out))
}

/// `S(W) − Σ W`.
pub fn collision(kernel: &ScatteringKernel, grid: &PhaseSpaceGrid, w: &HermitianField) -> Result<HermitianField, KernelError> {
    let gain = apply_scattering(kernel, grid, w)?;
    let loss = w.scale_by(&kernel.total_rate);
    Ok(gain.sub(&loss))
}

/// Kernel of the scalar equation obtained by taking traces.
#[derive(Debug, Clone)]
pub struct ScalarKernel {
    n_angles: usize,
    shells: Vec<f64>,
    /// `σ′` per shell, row-major `N_θ × N_θ`.
    sigma_prime: Vec<Vec<f64>>,
    arc: Vec<f64>,
    total_rate: ScalarField,
}

impl ScalarKernel {
    pub fn sigma_prime(&self, shell: usize, a: usize, b: usize) -> f64 {
        self.sigma_prime[shell][a * self.n_angles + b]
    }

    /// `Σ′(x, k)` per grid point.
    pub fn total_rate(&self) -> &ScalarField {
        &self.total_rate
    }

    /// `∫ σ′ I(x, k′) dλ(k′)`.
    pub fn gain(&self, grid: &PhaseSpaceGrid, intensity: &ScalarField) -> Result<ScalarField, KernelError> {
        if grid.shells() != self.shells.as_slice() || grid.n_angles() != self.n_angles {
            return Err(KernelError::GridMismatch);
        }
        grid.check(intensity)?;
        let na = self.n_angles;
        let ns = self.shells.len();
        let mut out = vec![0.0; intensity.len()];
        out.par_chunks_mut(na)
            .zip(intensity.values().par_chunks(na))
            .enumerate()
            .for_each(|(block, (o, src))| {
                let j = block % ns;
                let table = &self.sigma_prime[j];
                for (a, slot) in o.iter_mut().enumerate() {
                    let row = &table[a * na..(a + 1) * na];
                    *slot = self.arc[j] * row.iter().zip(src).map(|(s, i)| s * i).sum::<f64>();
                }
            });
        Ok(ScalarField::new(out))
    }
}

/// `σ′ = ½ σ Tr[T(k,k′) T(k′,k)]` and `Σ′ = ∫ σ′ dλ`.
pub fn scalar_kernel(kernel: &ScatteringKernel, grid: &PhaseSpaceGrid) -> Result<ScalarKernel, KernelError> {
    kernel.check_grid(grid)?;
    let na = kernel.n_angles;
    let sigma_prime: Vec<Vec<f64>> = kernel
        .tables
        .iter()
        .map(|t| {
            (0..na * na)
                .map(|ab| {
                    let (a, b) = (ab / na, ab % na);
                    let prod = t.tmat[a * na + b] * t.tmat[b * na + a];
                    0.5 * t.sigma[ab] * prod.trace()
                })
                .collect()
        })
        .collect();
    let arc: Vec<f64> = (0..grid.n_shells()).map(|j| grid.arc_weight(j)).collect();
    let per_shell: Vec<Vec<f64>> = sigma_prime
        .iter()
        .zip(&arc)
        .map(|(s, &w)| (0..na).map(|a| w * s[a * na..(a + 1) * na].iter().sum::<f64>()).collect())
        .collect();
    let total_rate = ScalarField::new(
        (0..grid.len())
            .map(|p| {
                let (_, j, a) = grid.split(p);
                per_shell[j][a]
            })
            .collect(),
    );
    Ok(ScalarKernel {
        n_angles: na,
        shells: kernel.shells.clone(),
        sigma_prime,
        arc,
        total_rate,
    })
}
