//! Canonical, matrix, Poisson and metric brackets on the phase-space grid.
//!
//! Functional derivatives are taken with respect to the weighted inner
//! product `⟨A, B⟩ = Σ_p w_p Tr(A_p B_p)`, so `δF_U/δW = U` holds exactly.

use nalgebra::{Complex, Matrix2};
use rayon::prelude::*;
use thiserror::Error;

use crate::coherence::{CoherenceError, CoherenceField, ComplexMatrix2, Hermitian2, HermitianField};
use crate::phase_grid::{AxisId, GridError, PhaseSpaceGrid, ScalarField};
use crate::scattering::{KernelError, ScatteringKernel};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BracketError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Coherence(#[from] CoherenceError),
    #[error("gradients have {0} and {1} canonical pairs")]
    PairMismatch(usize, usize),
}

/// `(∇_x f, ∇_k f)` restricted to the canonical pairs `(x^m, k^m)`,
/// `m < x_dims`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGradient {
    pub x: Vec<ScalarField>,
    pub k: Vec<ScalarField>,
}

impl PhaseGradient {
    pub fn new(x: Vec<ScalarField>, k: Vec<ScalarField>) -> Self {
        assert_eq!(x.len(), k.len());
        Self { x, k }
    }

    pub fn of(grid: &PhaseSpaceGrid, f: &ScalarField) -> Result<Self, GridError> {
        let d = grid.x_dims();
        let x = (0..d).map(|m| grid.ddx(f, AxisId::X(m))).collect::<Result<_, _>>()?;
        let k = (0..d).map(|m| grid.ddx(f, AxisId::K(m))).collect::<Result<_, _>>()?;
        Ok(Self { x, k })
    }

    pub fn pairs(&self) -> usize {
        self.x.len()
    }

    fn len(&self) -> usize {
        self.x.first().map_or(0, |f| f.len())
    }
}

/// `[f, g] = ∇_x f · ∇_k g − ∇_k f · ∇_x g` from precomputed gradients.
pub fn canonical_from_gradients(f: &PhaseGradient, g: &PhaseGradient) -> Result<ScalarField, BracketError> {
    if f.pairs() != g.pairs() {
        return Err(BracketError::PairMismatch(f.pairs(), g.pairs()));
    }
    let n = f.len();
    Ok(ScalarField::new(
        (0..n)
            .into_par_iter()
            .map(|p| {
                (0..f.pairs())
                    .map(|m| f.x[m][p] * g.k[m][p] - f.k[m][p] * g.x[m][p])
                    .sum()
            })
            .collect(),
    ))
}

pub fn canonical_bracket(grid: &PhaseSpaceGrid, f: &ScalarField, g: &ScalarField) -> Result<ScalarField, BracketError> {
    grid.check(f)?;
    grid.check(g)?;
    canonical_from_gradients(&PhaseGradient::of(grid, f)?, &PhaseGradient::of(grid, g)?)
}

/// Per-Stokes-component gradients of a matrix field.
#[derive(Debug, Clone)]
pub struct MatrixGradient(pub [PhaseGradient; 4]);

impl MatrixGradient {
    pub fn of(grid: &PhaseSpaceGrid, u: &HermitianField) -> Result<Self, GridError> {
        grid.check_len(u.len())?;
        let g = |c| PhaseGradient::of(grid, &u.component(c));
        Ok(Self([g(0)?, g(1)?, g(2)?, g(3)?]))
    }

    /// Gradient of `f · I₂`, whose only Stokes component is `I = 2f`.
    /// Euclidean norm of all first derivatives of all components, per point.
    pub fn pointwise_norm(&self) -> Vec<f64> {
        let n = self.0[0].len();
        (0..n)
            .map(|p| {
                self.0
                    .iter()
                    .flat_map(|g| g.x.iter().chain(&g.k))
                    .map(|f| f[p] * f[p])
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    pub fn scalar_identity(f: &PhaseGradient) -> Self {
        let zero = ScalarField::zeros(f.len());
        let zeros = PhaseGradient::new(vec![zero.clone(); f.pairs()], vec![zero; f.pairs()]);
        let twice = PhaseGradient::new(
            f.x.iter().map(|s| s.map(|v| 2.0 * v)).collect(),
            f.k.iter().map(|s| s.map(|v| 2.0 * v)).collect(),
        );
        Self([twice, zeros.clone(), zeros.clone(), zeros])
    }
}

/// `[U, V]_M = Σ_m (U_{x^m} ∘ V_{k^m} − U_{k^m} ∘ V_{x^m})` with the Jordan
/// product `A ∘ B = ½(AB + BA)`, in Stokes components:
/// `I = ½ Σ_c [u_c, v_c]`, `X = ½([u_I, v_X] + [u_X, v_I])`.
pub fn matrix_bracket_from_gradients(u: &MatrixGradient, v: &MatrixGradient) -> Result<HermitianField, BracketError> {
    let pairs = u.0[0].pairs();
    if pairs != v.0[0].pairs() {
        return Err(BracketError::PairMismatch(pairs, v.0[0].pairs()));
    }
    let n = u.0[0].len();
    let data = (0..n)
        .into_par_iter()
        .map(|p| {
            let mut s = [0.0; 4];
            for m in 0..pairs {
                let ux: [f64; 4] = std::array::from_fn(|c| u.0[c].x[m][p]);
                let uk: [f64; 4] = std::array::from_fn(|c| u.0[c].k[m][p]);
                let vx: [f64; 4] = std::array::from_fn(|c| v.0[c].x[m][p]);
                let vk: [f64; 4] = std::array::from_fn(|c| v.0[c].k[m][p]);
                let cb = |a: usize, b: usize| ux[a] * vk[b] - uk[a] * vx[b];
                s[0] += 0.5 * (cb(0, 0) + cb(1, 1) + cb(2, 2) + cb(3, 3));
                for (c, slot) in s.iter_mut().enumerate().skip(1) {
                    *slot += 0.5 * (cb(0, c) + cb(c, 0));
                }
            }
            Hermitian2 { stokes: s }
        })
        .collect();
    Ok(HermitianField::new(data))
}

pub fn matrix_bracket(grid: &PhaseSpaceGrid, u: &HermitianField, v: &HermitianField) -> Result<HermitianField, BracketError> {
    matrix_bracket_from_gradients(&MatrixGradient::of(grid, u)?, &MatrixGradient::of(grid, v)?)
}

/// A functional of `W` with its discrete functional derivative.
#[derive(Debug, Clone)]
pub enum FunctionalHandle {
    /// `F_U(W) = ∫ Tr(U W)`.
    LinearTest(HermitianField),
    /// `H(W) = ∫ Tr(Ω W)` with `Ω = ω I₂`; carries `ω` per grid point.
    Hamiltonian(ScalarField),
    /// `S(W) = ½ ∫ Tr(W²)`.
    Entropy,
    /// `G = H + S`; carries `ω`.
    FreeEnergy(ScalarField),
    Product(Box<FunctionalHandle>, Box<FunctionalHandle>),
}

impl FunctionalHandle {
    pub fn product(a: FunctionalHandle, b: FunctionalHandle) -> Self {
        FunctionalHandle::Product(Box::new(a), Box::new(b))
    }

    pub fn eval(&self, grid: &PhaseSpaceGrid, w: &HermitianField) -> Result<f64, BracketError> {
        grid.check_len(w.len())?;
        Ok(match self {
            FunctionalHandle::LinearTest(u) => u.inner(grid, w)?,
            FunctionalHandle::Hamiltonian(omega) => hamiltonian(grid, omega, w)?,
            FunctionalHandle::Entropy => 0.5 * w.inner(grid, w)?,
            FunctionalHandle::FreeEnergy(omega) => hamiltonian(grid, omega, w)? + 0.5 * w.inner(grid, w)?,
            FunctionalHandle::Product(a, b) => a.eval(grid, w)? * b.eval(grid, w)?,
        })
    }

    pub fn derivative(&self, grid: &PhaseSpaceGrid, w: &HermitianField) -> Result<HermitianField, BracketError> {
        grid.check_len(w.len())?;
        Ok(match self {
            FunctionalHandle::LinearTest(u) => {
                grid.check_len(u.len())?;
                u.clone()
            }
            FunctionalHandle::Hamiltonian(omega) => {
                grid.check(omega)?;
                HermitianField::scalar_identity(omega)
            }
            FunctionalHandle::Entropy => w.clone(),
            FunctionalHandle::FreeEnergy(omega) => {
                grid.check(omega)?;
                HermitianField::scalar_identity(omega).add(w)
            }
            FunctionalHandle::Product(a, b) => {
                let (va, vb) = (a.eval(grid, w)?, b.eval(grid, w)?);
                b.derivative(grid, w)?.scaled(va).axpy(vb, &a.derivative(grid, w)?)
            }
        })
    }
}

fn hamiltonian(grid: &PhaseSpaceGrid, omega: &ScalarField, w: &HermitianField) -> Result<f64, GridError> {
    grid.check(omega)?;
    Ok(w
        .data()
        .iter()
        .zip(omega.values())
        .zip(grid.weights())
        .map(|((h, o), wt)| wt * o * h.i())
        .sum())
}

pub fn eval_functional(h: &FunctionalHandle, w: &CoherenceField) -> Result<f64, BracketError> {
    h.eval(&w.grid, &w.data)
}

pub fn functional_derivative(h: &FunctionalHandle, w: &CoherenceField) -> Result<HermitianField, BracketError> {
    h.derivative(&w.grid, &w.data)
}

/// A bracket value with the magnitude it should be compared against.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub value: f64,
    /// Integral of the integrand's natural magnitude: input norms for the
    /// Poisson bracket, term norms for the metric bracket.
    pub scale: f64,
}

impl Scaled {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.value.abs() / self.scale
        } else {
            self.value.abs()
        }
    }
}

/// `{A, B}(W) = ∫ Tr(W [δA/δW, δB/δW]_M)`.
pub fn poisson_bracket(
    a: &FunctionalHandle,
    b: &FunctionalHandle,
    w: &CoherenceField,
) -> Result<f64, BracketError> {
    Ok(poisson_bracket_scaled(a, b, w)?.value)
}

pub fn poisson_bracket_scaled(
    a: &FunctionalHandle,
    b: &FunctionalHandle,
    w: &CoherenceField,
) -> Result<Scaled, BracketError> {
    let grid = &w.grid;
    let ga = MatrixGradient::of(grid, &a.derivative(grid, &w.data)?)?;
    let gb = MatrixGradient::of(grid, &b.derivative(grid, &w.data)?)?;
    let mb = matrix_bracket_from_gradients(&ga, &gb)?;
    let (na, nb) = (ga.pointwise_norm(), gb.pointwise_norm());
    let mut value = 0.0;
    let mut scale = 0.0;
    for (p, (h, m)) in w.data.data().iter().zip(mb.data()).enumerate() {
        let wt = grid.weights()[p];
        value += wt * h.trace_product(m);
        scale += wt * h.frobenius() * na[p] * nb[p];
    }
    Ok(Scaled { value, scale })
}

fn to_complex(t: &Matrix2<f64>) -> ComplexMatrix2 {
    t.map(|v| Complex::new(v, 0.0))
}

/// `(A, B)(W) = ½ ∬ σ Tr[(T A′ − A T)(Tᵀ B − B′ Tᵀ)] dk dλ(k′)`, evaluated
/// with explicit complex matrices.
pub fn metric_bracket(
    a: &FunctionalHandle,
    b: &FunctionalHandle,
    w: &CoherenceField,
    kernel: &ScatteringKernel,
) -> Result<f64, BracketError> {
    Ok(metric_bracket_scaled(a, b, w, kernel)?.value)
}

pub fn metric_bracket_scaled(
    a: &FunctionalHandle,
    b: &FunctionalHandle,
    w: &CoherenceField,
    kernel: &ScatteringKernel,
) -> Result<Scaled, BracketError> {
    let grid = &w.grid;
    kernel.check_grid(grid)?;
    let da = a.derivative(grid, &w.data)?;
    let db = b.derivative(grid, &w.data)?;
    metric_form(grid, kernel, &da, &db)
}

/// The metric bilinear form on two derivative fields.
pub fn metric_form(
    grid: &PhaseSpaceGrid,
    kernel: &ScatteringKernel,
    da: &HermitianField,
    db: &HermitianField,
) -> Result<Scaled, BracketError> {
    kernel.check_grid(grid)?;
    grid.check_len(da.len())?;
    grid.check_len(db.len())?;
    let na = grid.n_angles();
    let ns = grid.n_shells();
    let ma: Vec<ComplexMatrix2> = da.data().iter().map(|h| h.to_matrix()).collect();
    let mb: Vec<ComplexMatrix2> = db.data().iter().map(|h| h.to_matrix()).collect();
    let blocks: Vec<(f64, f64)> = (0..grid.n_cells() * ns)
        .into_par_iter()
        .map(|block| {
            let j = block % ns;
            let base = block * na;
            let arc = grid.arc_weight(j);
            let mut value = 0.0;
            let mut scale = 0.0;
            for i in 0..na {
                let wt = grid.weights()[base + i];
                let (ai, bi) = (&ma[base + i], &mb[base + i]);
                for ip in 0..na {
                    let s = kernel.sigma(j, i, ip);
                    if s == 0.0 {
                        continue;
                    }
                    let t = to_complex(&kernel.tmat(j, i, ip));
                    let tt = t.transpose();
                    let (ap, bp) = (&ma[base + ip], &mb[base + ip]);
                    let x = t * ap - ai * t;
                    let y = tt * bi - bp * tt;
                    let tr = (x * y).trace();
                    let c = 0.5 * wt * arc * s;
                    value += c * tr.re;
                    scale += c * ((t * ap).norm() + (ai * t).norm()) * ((tt * bi).norm() + (bp * tt).norm());
                }
            }
            (value, scale)
        })
        .collect();
    let (value, scale) = blocks.iter().fold((0.0, 0.0), |acc, b| (acc.0 + b.0, acc.1 + b.1));
    Ok(Scaled { value, scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase_grid::{build_grid, GridConfig};
    use crate::scattering::{build_kernel, collision, KernelSpec, SigmaProfile};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn grid_1d(nx: usize, shells: Vec<f64>, na: usize) -> Arc<PhaseSpaceGrid> {
        Arc::new(build_grid(&GridConfig::new(vec![2.0 * PI], vec![nx], shells, na)).unwrap())
    }

    fn random_field(g: &PhaseSpaceGrid, rng: &mut ChaCha8Rng) -> HermitianField {
        HermitianField::new(
            (0..g.len())
                .map(|_| Hermitian2 {
                    stokes: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
                })
                .collect(),
        )
    }

    fn smooth_field(g: &PhaseSpaceGrid, phase: f64) -> HermitianField {
        HermitianField::sample(g, |p| {
            let (x, th, r) = (p.x[0], p.theta, p.radius);
            [
                2.0 + (x + phase).sin() * th.cos() * r,
                0.3 * (2.0 * x).cos() + 0.2 * (th + phase).sin(),
                0.5 * x.sin() * (2.0 * th).cos(),
                0.1 * (x - th).cos() * r * r,
            ]
        })
    }

    #[test]
    fn canonical_pair_is_one_away_from_the_wrap() {
        // f = x is not periodic, so only interior cells are compared.
        let g = build_grid(&GridConfig::new(vec![1.0], vec![32], vec![0.8, 1.0, 1.2], 32)).unwrap();
        let f = g.sample(|p| p.x[0]);
        let k1 = g.sample(|p| p.k[0]);
        let b = canonical_bracket(&g, &f, &k1).unwrap();
        for p in 0..g.len() {
            let (cell, _, _) = g.split(p);
            if cell > 0 && cell < 31 {
                // exact in x and r; the θ difference of cos θ carries sin(dθ)/dθ
                let (dth, th) = (g.dtheta(), g.point(p).theta);
                let discrete = th.cos().powi(2) + dth.sin() / dth * th.sin().powi(2);
                assert!((b[p] - discrete).abs() < 1e-12, "{}", b[p]);
                assert!((b[p] - 1.0).abs() <= dth * dth / 6.0);
            }
        }
    }

    #[test]
    fn canonical_bracket_is_antisymmetric() {
        let g = grid_1d(16, vec![1.0, 1.5, 2.0], 16);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = ScalarField::new((0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect());
        let h = ScalarField::new((0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect());
        assert!(canonical_bracket(&g, &f, &f).unwrap().values().iter().all(|&v| v == 0.0));
        let ab = canonical_bracket(&g, &f, &h).unwrap();
        let ba = canonical_bracket(&g, &h, &f).unwrap();
        assert!(ab.values().iter().zip(ba.values()).all(|(a, b)| a == &-b));
    }

    #[test]
    fn canonical_bracket_of_squares_converges() {
        let err = |n: usize| {
            let shells = GridConfig::uniform_shells(1.0, 2.0, n / 2);
            let g = build_grid(&GridConfig::new(vec![2.0 * PI], vec![n], shells, n)).unwrap();
            // periodic stand-in for x²: s = sin x, with [s², (k¹)²] = 4 s cos x · k¹
            let f = g.sample(|p| p.x[0].sin().powi(2));
            let h = g.sample(|p| p.k[0].powi(2));
            let b = canonical_bracket(&g, &f, &h).unwrap();
            (0..g.len())
                .map(|p| {
                    let q = g.point(p);
                    (b[p] - 4.0 * q.x[0].sin() * q.x[0].cos() * q.k[0]).abs()
                })
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(32), err(64));
        let order = (e1 / e2).log2();
        assert!(order > 1.8 && order < 2.3, "order {order}");
    }

    #[test]
    fn matrix_bracket_examples() {
        let g = grid_1d(16, vec![1.0, 1.5, 2.0], 16);
        let c = HermitianField::constant(g.len(), Hermitian2::new(0.3, 0.1, -0.4, 0.2));
        let u = smooth_field(&g, 0.4);
        assert_eq!(matrix_bracket(&g, &c, &u).unwrap().max_abs(), 0.0);
        assert_eq!(matrix_bracket(&g, &u, &u).unwrap().max_abs(), 0.0);
        let v = smooth_field(&g, 1.1);
        let uv = matrix_bracket(&g, &u, &v).unwrap();
        let vu = matrix_bracket(&g, &v, &u).unwrap();
        assert_eq!(uv.add(&vu).max_abs(), 0.0);
    }

    #[test]
    fn matrix_bracket_matches_jordan_product() {
        let g = grid_1d(8, vec![1.0, 1.5, 2.0], 8);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = random_field(&g, &mut rng);
        let v = random_field(&g, &mut rng);
        let got = matrix_bracket(&g, &u, &v).unwrap();
        let diff = |f: &HermitianField, axis| -> Vec<ComplexMatrix2> {
            let comps: Vec<_> = (0..4).map(|c| g.ddx(&f.component(c), axis).unwrap()).collect();
            (0..g.len())
                .map(|p| crate::coherence::stokes_to_matrix(std::array::from_fn(|c| comps[c][p])))
                .collect()
        };
        let (ux, uk) = (diff(&u, AxisId::X(0)), diff(&u, AxisId::K(0)));
        let (vx, vk) = (diff(&v, AxisId::X(0)), diff(&v, AxisId::K(0)));
        let half = Complex::new(0.5, 0.0);
        for p in 0..g.len() {
            let m = (ux[p] * vk[p] + vk[p] * ux[p] - uk[p] * vx[p] - vx[p] * uk[p]) * half;
            let s = crate::coherence::matrix_to_stokes(&m).unwrap();
            for (a, b) in s.iter().zip(got.data()[p].stokes) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transport_bracket_is_componentwise() {
        let g = grid_1d(16, vec![1.0, 1.5, 2.0], 16);
        let omega = g.sample(|p| (1.0 + 0.2 * p.x[0].cos()) * p.radius);
        let w = smooth_field(&g, 0.2);
        let got = matrix_bracket(&g, &HermitianField::scalar_identity(&omega), &w).unwrap();
        for c in 0..4 {
            let expect = canonical_bracket(&g, &omega, &w.component(c)).unwrap();
            for p in 0..g.len() {
                assert!((got.data()[p].stokes[c] - expect[p]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn functional_examples() {
        let g = grid_1d(8, vec![1.0, 2.0], 8);
        let vol: f64 = g.weights().iter().sum();
        let half_id = CoherenceField::new(g.clone(), HermitianField::constant(g.len(), Hermitian2::scalar(0.5)), 0.0).unwrap();
        let s = eval_functional(&FunctionalHandle::Entropy, &half_id).unwrap();
        assert!((s - vol / 4.0).abs() < 1e-12 * vol);

        let intensity = g.sample(|p| 1.0 + p.theta.sin().powi(2));
        let w = CoherenceField::unpolarized(g.clone(), &intensity).unwrap();
        let omega = g.sample(|p| p.radius);
        let h = eval_functional(&FunctionalHandle::Hamiltonian(omega.clone()), &w).unwrap();
        let oracle: f64 = (0..g.len()).map(|p| g.weights()[p] * g.point(p).radius * intensity[p]).sum();
        assert!((h - oracle).abs() < 1e-12 * oracle);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = CoherenceField::new(g.clone(), random_field(&g, &mut rng), 0.0).unwrap();
        let fu = eval_functional(&FunctionalHandle::LinearTest(w.data.clone()), &w).unwrap();
        let s = eval_functional(&FunctionalHandle::Entropy, &w).unwrap();
        assert!((fu - 2.0 * s).abs() < 1e-12 * fu.abs());
        let g_val = eval_functional(&FunctionalHandle::FreeEnergy(omega.clone()), &w).unwrap();
        let h = eval_functional(&FunctionalHandle::Hamiltonian(omega.clone()), &w).unwrap();
        assert!((g_val - h - s).abs() < 1e-12 * g_val.abs().max(1.0));

        assert_eq!(functional_derivative(&FunctionalHandle::Entropy, &w).unwrap(), w.data);
        let dh = functional_derivative(&FunctionalHandle::Hamiltonian(omega.clone()), &w).unwrap();
        assert_eq!(dh, HermitianField::scalar_identity(&omega));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let g = grid_1d(8, vec![1.0, 2.0], 8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = random_field(&g, &mut rng);
        let dir = random_field(&g, &mut rng);
        let omega = g.sample(|p| p.radius * (1.0 + 0.1 * p.x[0].sin()));
        let u = random_field(&g, &mut rng);
        let handles = [
            FunctionalHandle::LinearTest(u.clone()),
            FunctionalHandle::Hamiltonian(omega.clone()),
            FunctionalHandle::Entropy,
            FunctionalHandle::FreeEnergy(omega.clone()),
            FunctionalHandle::product(FunctionalHandle::Entropy, FunctionalHandle::LinearTest(u)),
        ];
        let eps = 1e-5;
        for h in &handles {
            let plus = h.eval(&g, &w.axpy(eps, &dir)).unwrap();
            let minus = h.eval(&g, &w.axpy(-eps, &dir)).unwrap();
            let fd = (plus - minus) / (2.0 * eps);
            let an = h.derivative(&g, &w).unwrap().inner(&g, &dir).unwrap();
            assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "{h:?}: {fd} vs {an}");
        }
    }

    #[test]
    fn poisson_bracket_examples() {
        let g = grid_1d(16, vec![1.0, 1.5, 2.0], 16);
        let w = CoherenceField::new(g.clone(), smooth_field(&g, 0.7), 0.0).unwrap();
        let u = smooth_field(&g, 2.1);
        let omega = g.sample(|p| (1.0 + 0.3 * p.x[0].sin()) * p.radius);
        let fu = FunctionalHandle::LinearTest(u.clone());
        assert_eq!(poisson_bracket(&fu, &fu, &w).unwrap(), 0.0);
        let h = FunctionalHandle::Hamiltonian(omega.clone());
        let got = poisson_bracket(&fu, &h, &w).unwrap();
        let direct = w
            .data
            .inner(&g, &matrix_bracket(&g, &u, &HermitianField::scalar_identity(&omega)).unwrap())
            .unwrap();
        assert!((got - direct).abs() < 1e-12 * direct.abs().max(1.0));
    }

    fn kernel_for(g: &PhaseSpaceGrid) -> ScatteringKernel {
        build_kernel(
            &KernelSpec::Rotation {
                profile: SigmaProfile::Cosine { sigma0: 0.6, anisotropy: 0.5 },
                gain: 0.7,
            },
            g,
        )
        .unwrap()
    }

    #[test]
    fn metric_bracket_properties() {
        let g = grid_1d(8, vec![1.0, 1.5], 8);
        let k = kernel_for(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let w = CoherenceField::new(g.clone(), random_field(&g, &mut rng), 0.0).unwrap();
        let a = FunctionalHandle::LinearTest(random_field(&g, &mut rng));
        let b = FunctionalHandle::LinearTest(random_field(&g, &mut rng));
        let aa = metric_bracket_scaled(&a, &a, &w, &k).unwrap();
        assert!(aa.value <= 1e-12 * aa.scale);
        let ab = metric_bracket_scaled(&a, &b, &w, &k).unwrap();
        let ba = metric_bracket_scaled(&b, &a, &w, &k).unwrap();
        assert!((ab.value - ba.value).abs() <= 1e-12 * ab.scale);
        let omega = g.sample(|p| p.radius * (1.0 + 0.5 * p.x[0].cos()));
        let h = metric_bracket_scaled(&FunctionalHandle::Hamiltonian(omega), &b, &w, &k).unwrap();
        assert!(h.value.abs() <= 1e-12 * h.scale.max(1.0));
    }

    #[test]
    fn metric_bracket_with_entropy_is_the_collision_operator() {
        let g = grid_1d(8, vec![1.0, 1.5], 8);
        let k = kernel_for(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let w = CoherenceField::new(g.clone(), random_field(&g, &mut rng), 0.0).unwrap();
        let u = random_field(&g, &mut rng);
        let got = metric_bracket(&FunctionalHandle::LinearTest(u.clone()), &FunctionalHandle::Entropy, &w, &k).unwrap();
        let direct = u.inner(&g, &collision(&k, &g, &w.data).unwrap()).unwrap();
        assert!((got - direct).abs() < 1e-12 * direct.abs().max(1.0));
    }
}
