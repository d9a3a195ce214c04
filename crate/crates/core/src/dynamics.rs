//! Time integration of
//!
//! ```text
//! ∂W/∂t = [Ω, W]_M + S(W) − Σ W,    Ω = ω I₂,  ω = v(x)|k|
//! ```
//!
//! and of its scalar reduction, with thermodynamic diagnostics.

use std::io::{self, Write};
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::brackets::{canonical_from_gradients, PhaseGradient};
use crate::coherence::{CoherenceError, CoherenceField, Hermitian2, HermitianField};
use crate::medium::Medium;
use crate::phase_grid::{GridError, PhaseSpaceGrid, ScalarField};
use crate::scattering::{collision, KernelError, ScalarKernel, ScatteringKernel};

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Coherence(#[from] CoherenceError),
    #[error("a non-uniform medium needs at least two k shells: refraction changes |k|")]
    NeedsShells,
    #[error("velocity must be positive, got minimum {0}")]
    NonPositiveVelocity(f64),
    #[error("time step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("implicit midpoint did not converge in {iters} iterations at step {step} (update {update:.3e})")]
    PicardDiverged { step: usize, iters: usize, update: f64 },
    #[error("non-finite value in W after step {0}")]
    NonFinite(usize),
    #[error("diagnostics sink failed: {0}")]
    Io(#[from] io::Error),
}

/// State of a polarised run.
#[derive(Debug, Clone)]
pub struct SimulationState {
    pub w: CoherenceField,
    pub kernel: ScatteringKernel,
    pub v: ScalarField,
    pub omega: ScalarField,
    /// Exact `(∇_x ω, ∇_k ω) = (|k| ∇v, v k̂)` on the canonical pairs.
    pub omega_grad: PhaseGradient,
    pub step: usize,
}

/// Sampled `v`, `ω` and the exact gradient of `ω`.
pub fn sample_medium(
    grid: &PhaseSpaceGrid,
    medium: &Medium,
) -> Result<(ScalarField, ScalarField, PhaseGradient), DynamicsError> {
    if medium.min_velocity() <= 0.0 {
        return Err(DynamicsError::NonPositiveVelocity(medium.min_velocity()));
    }
    if !medium.is_uniform() && grid.n_shells() < 2 {
        return Err(DynamicsError::NeedsShells);
    }
    let ext = grid.x_extent().to_vec();
    let d = grid.x_dims();
    let v = grid.sample(|p| medium.velocity(&p.x[..d], &ext));
    let omega = grid.sample(|p| medium.velocity(&p.x[..d], &ext) * p.radius);
    let gx = (0..d)
        .map(|m| grid.sample(|p| p.radius * medium.gradient(&p.x[..d], &ext)[m]))
        .collect();
    let gk = (0..d)
        .map(|m| grid.sample(|p| medium.velocity(&p.x[..d], &ext) * p.k[m] / p.radius))
        .collect();
    Ok((v, omega, PhaseGradient::new(gx, gk)))
}

impl SimulationState {
    pub fn new(w: CoherenceField, medium: &Medium, kernel: ScatteringKernel) -> Result<Self, DynamicsError> {
        kernel.check_grid(&w.grid)?;
        let (v, omega, omega_grad) = sample_medium(&w.grid, medium)?;
        Ok(Self {
            w,
            kernel,
            v,
            omega,
            omega_grad,
            step: 0,
        })
    }

    pub fn grid(&self) -> &Arc<PhaseSpaceGrid> {
        &self.w.grid
    }

    pub fn time(&self) -> f64 {
        self.w.time
    }

    pub fn hamiltonian(&self) -> f64 {
        hamiltonian(self.grid(), &self.omega, &self.w.data)
    }

    pub fn entropy(&self) -> f64 {
        entropy(self.grid(), &self.w.data)
    }
}

pub fn hamiltonian(grid: &PhaseSpaceGrid, omega: &ScalarField, w: &HermitianField) -> f64 {
    w.data()
        .iter()
        .zip(omega.values())
        .zip(grid.weights())
        .map(|((h, o), wt)| wt * o * h.i())
        .sum()
}

pub fn entropy(grid: &PhaseSpaceGrid, w: &HermitianField) -> f64 {
    0.5 * w
        .data()
        .iter()
        .zip(grid.weights())
        .map(|(h, wt)| wt * h.trace_product(h))
        .sum::<f64>()
}

/// Cartesian `(∂_{x^m}, ∂_{k^m})` derivatives of one scalar field.
fn field_gradient(grid: &PhaseSpaceGrid, f: &ScalarField) -> Result<PhaseGradient, GridError> {
    PhaseGradient::of(grid, f)
}

/// `[Ω, W]_M` for `Ω = ω I₂`, which acts componentwise as `[ω, s_c]`.
pub fn transport(grid: &PhaseSpaceGrid, omega_grad: &PhaseGradient, w: &HermitianField) -> Result<HermitianField, DynamicsError> {
    grid.check_len(w.len())?;
    let mut comps = Vec::with_capacity(4);
    for c in 0..4 {
        let g = field_gradient(grid, &w.component(c))?;
        comps.push(canonical_from_gradients(omega_grad, &g).expect("pair count"));
    }
    Ok(HermitianField::from_components([&comps[0], &comps[1], &comps[2], &comps[3]]))
}

/// `∂W/∂t`.
pub fn rhs(state: &SimulationState) -> Result<HermitianField, DynamicsError> {
    rhs_of(state, &state.w.data)
}

fn rhs_of(state: &SimulationState, w: &HermitianField) -> Result<HermitianField, DynamicsError> {
    let grid = state.grid();
    let t = transport(grid, &state.omega_grad, w)?;
    if state.kernel.is_zero() {
        return Ok(t);
    }
    Ok(t.add(&collision(&state.kernel, grid, w)?))
}

fn check_dt(dt: f64) -> Result<(), DynamicsError> {
    if dt > 0.0 && dt.is_finite() {
        Ok(())
    } else {
        Err(DynamicsError::BadStep(dt))
    }
}

pub fn step_rk4(state: &mut SimulationState, dt: f64) -> Result<(), DynamicsError> {
    check_dt(dt)?;
    let w0 = state.w.data.clone();
    let k1 = rhs_of(state, &w0)?;
    let k2 = rhs_of(state, &w0.axpy(0.5 * dt, &k1))?;
    let k3 = rhs_of(state, &w0.axpy(0.5 * dt, &k2))?;
    let k4 = rhs_of(state, &w0.axpy(dt, &k3))?;
    let incr = k1.axpy(2.0, &k2).axpy(2.0, &k3).add(&k4);
    state.w.data = w0.axpy(dt / 6.0, &incr);
    state.w.time += dt;
    state.step += 1;
    Ok(())
}

/// Implicit midpoint, `W⁺ = W + dt L((W + W⁺)/2)`, solved by fixed-point
/// iteration until the update is below `picard_tol · max(1, max|W|)`.
/// Returns the number of iterations.
pub fn step_midpoint(state: &mut SimulationState, dt: f64, picard_tol: f64, max_iters: usize) -> Result<usize, DynamicsError> {
    check_dt(dt)?;
    let w0 = state.w.data.clone();
    let tol = picard_tol * w0.max_abs().max(1.0);
    let mut next = w0.axpy(dt, &rhs_of(state, &w0)?);
    let mut update = f64::INFINITY;
    for it in 1..=max_iters {
        let mid = w0.add(&next).scaled(0.5);
        let candidate = w0.axpy(dt, &rhs_of(state, &mid)?);
        update = candidate.sub(&next).max_abs();
        next = candidate;
        if update <= tol {
            state.w.data = next;
            state.w.time += dt;
            state.step += 1;
            return Ok(it);
        }
    }
    Err(DynamicsError::PicardDiverged {
        step: state.step + 1,
        iters: max_iters,
        update,
    })
}

/// Advective CFL bound `safety · min(Δx/max v, Δk/max |k||∇v|)`.
pub fn cfl_dt(grid: &PhaseSpaceGrid, medium: &Medium, safety: f64) -> Result<f64, DynamicsError> {
    let (_, _, grad) = sample_medium(grid, medium)?;
    let mut dt = safety * grid.min_dx() / medium.max_velocity();
    if !medium.is_uniform() {
        let gmax = grad.x.iter().map(|f| f.max_abs()).fold(0.0, f64::max);
        let shells = grid.shells();
        let dr = shells.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        let dk = dr.min(shells[0] * grid.dtheta());
        if gmax > 0.0 {
            dt = dt.min(safety * dk / gmax);
        }
    }
    Ok(dt)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    Rk4,
    Midpoint { picard_tol: f64, max_iters: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integrator {
    pub scheme: Scheme,
    pub dt: f64,
    pub n_steps: usize,
    pub record_interval: usize,
    /// `0` disables snapshots.
    pub snapshot_interval: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRecord {
    pub step: usize,
    pub time: f64,
    pub hamiltonian: f64,
    pub entropy: f64,
    pub free_energy: f64,
    /// `(S_n − S_{n−1}) / dt` over the last step; `0` at step 0.
    pub entropy_rate: f64,
    /// Stokes storage makes this identically zero.
    pub hermiticity_defect: f64,
    /// Smallest eigenvalue `(I − |p|)/2` over the grid.
    pub min_eigenvalue: f64,
}

pub const DIAGNOSTICS_HEADER: &str = "step,time,hamiltonian,entropy,free_energy,entropy_rate";

impl DiagnosticsRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            self.step, self.time, self.hamiltonian, self.entropy, self.free_energy, self.entropy_rate
        )
    }
}

fn min_eigenvalue(w: &HermitianField) -> f64 {
    w.data().par_iter().map(|h| h.eigenvalues().0).reduce(|| f64::INFINITY, f64::min)
}

fn record(state: &SimulationState, entropy_rate: f64) -> DiagnosticsRecord {
    let h = state.hamiltonian();
    let s = state.entropy();
    DiagnosticsRecord {
        step: state.step,
        time: state.time(),
        hamiltonian: h,
        entropy: s,
        free_energy: h + s,
        entropy_rate,
        hermiticity_defect: 0.0,
        min_eigenvalue: min_eigenvalue(&state.w.data),
    }
}

/// Callbacks receiving records and snapshots as they are produced.
pub trait RunSink {
    fn record(&mut self, rec: &DiagnosticsRecord) -> io::Result<()>;
    fn snapshot(&mut self, _step: usize, _w: &CoherenceField) -> io::Result<()> {
        Ok(())
    }
}

/// Keeps records in memory.
#[derive(Debug, Default)]
pub struct MemorySink(pub Vec<DiagnosticsRecord>);

impl RunSink for MemorySink {
    fn record(&mut self, rec: &DiagnosticsRecord) -> io::Result<()> {
        self.0.push(*rec);
        Ok(())
    }
}

/// Streams the diagnostics CSV to a writer.
pub struct CsvSink<W: Write>(pub W);

impl<W: Write> CsvSink<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "{DIAGNOSTICS_HEADER}")?;
        Ok(Self(out))
    }
}

impl<W: Write> RunSink for CsvSink<W> {
    fn record(&mut self, rec: &DiagnosticsRecord) -> io::Result<()> {
        writeln!(self.0, "{}", rec.csv_row())?;
        self.0.flush()
    }
}

/// Advance `n_steps`, emitting a record every `record_interval` steps
/// (and at steps 0 and `n_steps`).
pub fn run(state: &mut SimulationState, integ: &Integrator, sink: &mut dyn RunSink) -> Result<Vec<DiagnosticsRecord>, DynamicsError> {
    check_dt(integ.dt)?;
    let every = integ.record_interval.max(1);
    let mut records = vec![record(state, 0.0)];
    sink.record(&records[0])?;
    if integ.snapshot_interval > 0 {
        sink.snapshot(state.step, &state.w)?;
    }
    let mut s_prev = records[0].entropy;
    for n in 1..=integ.n_steps {
        match integ.scheme {
            Scheme::Rk4 => step_rk4(state, integ.dt)?,
            Scheme::Midpoint { picard_tol, max_iters } => {
                step_midpoint(state, integ.dt, picard_tol, max_iters)?;
            }
        }
        if !state.w.data.is_finite() {
            return Err(DynamicsError::NonFinite(state.step));
        }
        let s_now = state.entropy();
        let rate = (s_now - s_prev) / integ.dt;
        s_prev = s_now;
        if n % every == 0 || n == integ.n_steps {
            let rec = record(state, rate);
            sink.record(&rec)?;
            records.push(rec);
        }
        if integ.snapshot_interval > 0 && n % integ.snapshot_interval == 0 {
            sink.snapshot(state.step, &state.w)?;
        }
    }
    Ok(records)
}

/// `∂I/∂t = −[I, ω] + ∫ σ′ I′ dλ − Σ′ I`.
pub fn scalar_rhs(
    grid: &PhaseSpaceGrid,
    intensity: &ScalarField,
    omega_grad: &PhaseGradient,
    kernel: &ScalarKernel,
) -> Result<ScalarField, DynamicsError> {
    grid.check(intensity)?;
    let gi = field_gradient(grid, intensity)?;
    let adv = canonical_from_gradients(omega_grad, &gi).expect("pair count");
    let gain = kernel.gain(grid, intensity)?;
    Ok(ScalarField::new(
        adv.values()
            .par_iter()
            .zip(gain.values().par_iter())
            .zip(kernel.total_rate().values().par_iter().zip(intensity.values().par_iter()))
            .map(|((a, g), (s, i))| a + g - s * i)
            .collect(),
    ))
}

fn axpy(a: &ScalarField, c: f64, b: &ScalarField) -> ScalarField {
    a.zip_map(b, |x, y| x + c * y)
}

pub fn step_scalar_rk4(
    grid: &PhaseSpaceGrid,
    intensity: &ScalarField,
    omega_grad: &PhaseGradient,
    kernel: &ScalarKernel,
    dt: f64,
) -> Result<ScalarField, DynamicsError> {
    check_dt(dt)?;
    let f = |i: &ScalarField| scalar_rhs(grid, i, omega_grad, kernel);
    let k1 = f(intensity)?;
    let k2 = f(&axpy(intensity, 0.5 * dt, &k1))?;
    let k3 = f(&axpy(intensity, 0.5 * dt, &k2))?;
    let k4 = f(&axpy(intensity, dt, &k3))?;
    let incr = axpy(&axpy(&axpy(&k1, 2.0, &k2), 2.0, &k3), 1.0, &k4);
    Ok(axpy(intensity, dt / 6.0, &incr))
}

/// Unpolarised initial data `½ I I₂` has Stokes vector `(I, 0, 0, 0)`.
pub fn is_unpolarized(w: &HermitianField) -> bool {
    w.data().iter().all(|h| h.q() == 0.0 && h.u() == 0.0 && h.v() == 0.0)
}

pub fn unpolarized(intensity: &ScalarField) -> HermitianField {
    HermitianField::new(intensity.values().iter().map(|&i| Hermitian2::new(i, 0.0, 0.0, 0.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::brackets::matrix_bracket;
    use crate::phase_grid::{build_grid, AxisId, GridConfig};
    use crate::scattering::{build_kernel, scalar_kernel, KernelSpec, SigmaProfile};
    use std::f64::consts::PI;

    fn rotation_kernel() -> KernelSpec {
        KernelSpec::Rotation {
            profile: SigmaProfile::Cosine { sigma0: 0.2, anisotropy: 0.5 },
            gain: 0.7,
        }
    }

    fn grid(nx: usize, shells: Vec<f64>, na: usize) -> Arc<PhaseSpaceGrid> {
        Arc::new(build_grid(&GridConfig::new(vec![2.0 * PI], vec![nx], shells, na)).unwrap())
    }

    fn pulse(g: &PhaseSpaceGrid) -> HermitianField {
        HermitianField::sample(g, |p| {
            let bump = (p.x[0].cos() + 1.0).powi(2);
            [1.0 + 0.5 * bump, 0.2 * bump * p.theta.cos(), 0.1 * p.x[0].sin(), 0.05 * bump]
        })
    }

    fn state(g: &Arc<PhaseSpaceGrid>, medium: &Medium, spec: &KernelSpec, w: HermitianField) -> SimulationState {
        let k = build_kernel(spec, g).unwrap();
        SimulationState::new(CoherenceField::new(g.clone(), w, 0.0).unwrap(), medium, k).unwrap()
    }

    #[test]
    fn equilibrium_is_steady() {
        let g = grid(16, vec![1.0], 16);
        let w = HermitianField::constant(g.len(), Hermitian2::scalar(0.7));
        let mut st = state(&g, &Medium::Constant { v0: 1.3 }, &rotation_kernel(), w.clone());
        assert!(rhs(&st).unwrap().max_abs() < 1e-14);
        step_rk4(&mut st, 0.05).unwrap();
        assert!(st.w.data.sub(&w).max_abs() < 1e-14);
        step_midpoint(&mut st, 0.05, 1e-14, 50).unwrap();
        assert!(st.w.data.sub(&w).max_abs() < 1e-14);
    }

    #[test]
    fn pure_advection() {
        let g = grid(16, vec![1.0], 16);
        let w = pulse(&g);
        let st = state(&g, &Medium::Constant { v0: 1.0 }, &KernelSpec::None, w.clone());
        let r = rhs(&st).unwrap();
        for c in 0..4 {
            let dx = g.ddx(&w.component(c), AxisId::X(0)).unwrap();
            for p in 0..g.len() {
                let expect = -g.point(p).theta.cos() * dx[p];
                assert!((r.data()[p].stokes[c] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn transport_equals_matrix_bracket_with_omega() {
        let g = grid(16, vec![1.0, 1.4, 1.8], 16);
        let medium = Medium::SeparableTrig { v0: 1.0, amplitude: 0.3, modes: vec![1] };
        let w = pulse(&g);
        let st = state(&g, &medium, &KernelSpec::None, w.clone());
        let via_transport = transport(&g, &st.omega_grad, &w).unwrap();
        let via_grid = matrix_bracket(&g, &HermitianField::scalar_identity(&st.omega), &w).unwrap();
        // the grid differentiates ω where `transport` uses its exact gradient
        let diff = via_transport.sub(&via_grid).max_abs();
        assert!(diff < 0.05 * via_transport.max_abs(), "{diff}");
    }

    #[test]
    fn nonuniform_medium_on_one_shell_is_rejected() {
        let g = grid(8, vec![1.0], 8);
        let medium = Medium::SeparableTrig { v0: 1.0, amplitude: 0.3, modes: vec![1] };
        let k = build_kernel(&KernelSpec::None, &g).unwrap();
        let w = CoherenceField::new(g.clone(), HermitianField::zeros(g.len()), 0.0).unwrap();
        assert!(matches!(SimulationState::new(w, &medium, k), Err(DynamicsError::NeedsShells)));
    }

    #[test]
    fn trace_of_rhs_matches_scalar_rhs() {
        let g = grid(16, vec![1.0, 1.4, 1.8], 16);
        let medium = Medium::SeparableTrig { v0: 1.0, amplitude: 0.3, modes: vec![1] };
        let w = pulse(&g);
        let st = state(&g, &medium, &rotation_kernel(), w.clone());
        let sk = scalar_kernel(&st.kernel, &g).unwrap();
        let full = rhs(&st).unwrap().component(0);
        let scalar = scalar_rhs(&g, &w.component(0), &st.omega_grad, &sk).unwrap();
        for p in 0..g.len() {
            assert!((full[p] - scalar[p]).abs() < 1e-12);
        }
    }

    #[test]
    fn rk4_is_fourth_order_in_time() {
        let g = grid(32, vec![1.0], 8);
        let w = pulse(&g);
        let evolve = |dt: f64, n: usize| {
            let mut st = state(&g, &Medium::Constant { v0: 1.0 }, &KernelSpec::None, w.clone());
            for _ in 0..n {
                step_rk4(&mut st, dt).unwrap();
            }
            st.w.data
        };
        let t = 0.8;
        let (a, b, c) = (evolve(t / 8.0, 8), evolve(t / 16.0, 16), evolve(t / 32.0, 32));
        let l2 = |x: &HermitianField, y: &HermitianField| {
            let d = x.sub(y);
            d.inner(&g, &d).unwrap().sqrt()
        };
        let order = (l2(&a, &b) / l2(&b, &c)).log2();
        assert!((order - 4.0).abs() < 0.3, "order {order}");
    }

    #[test]
    fn midpoint_dissipates_entropy_and_keeps_energy() {
        let g = grid(16, vec![1.0], 16);
        let mut st = state(&g, &Medium::Constant { v0: 1.0 }, &rotation_kernel(), pulse(&g));
        let integ = Integrator {
            scheme: Scheme::Midpoint { picard_tol: 1e-14, max_iters: 100 },
            dt: cfl_dt(&g, &Medium::Constant { v0: 1.0 }, 0.25).unwrap(),
            n_steps: 40,
            record_interval: 1,
            snapshot_interval: 0,
        };
        let recs = run(&mut st, &integ, &mut MemorySink::default()).unwrap();
        assert_eq!(recs.len(), 41);
        let h0 = recs[0].hamiltonian;
        for w in recs.windows(2) {
            assert!(w[1].entropy - w[0].entropy <= 1e-12);
            assert!((w[1].hamiltonian - h0).abs() < 1e-12 * h0.abs());
            assert!((w[1].free_energy - w[1].hamiltonian - w[1].entropy).abs() < 1e-12 * w[1].free_energy.abs());
        }
        assert!(recs.last().unwrap().entropy < recs[0].entropy);
    }

    #[test]
    fn non_finite_state_aborts() {
        let g = grid(8, vec![1.0], 8);
        let mut w = HermitianField::zeros(g.len());
        w.data_mut()[3] = Hermitian2::new(f64::NAN, 0.0, 0.0, 0.0);
        let mut st = state(&g, &Medium::Constant { v0: 1.0 }, &KernelSpec::None, w);
        let integ = Integrator { scheme: Scheme::Rk4, dt: 0.1, n_steps: 3, record_interval: 1, snapshot_interval: 0 };
        assert!(matches!(run(&mut st, &integ, &mut MemorySink::default()), Err(DynamicsError::NonFinite(1))));
    }

    #[test]
    fn csv_sink_writes_header() {
        let mut buf = Vec::new();
        {
            let mut sink = CsvSink::new(&mut buf).unwrap();
            let rec = DiagnosticsRecord {
                step: 0,
                time: 0.0,
                hamiltonian: 1.0,
                entropy: 0.5,
                free_energy: 1.5,
                entropy_rate: 0.0,
                hermiticity_defect: 0.0,
                min_eigenvalue: 0.0,
            };
            sink.record(&rec).unwrap();
        }
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,time,hamiltonian,entropy,free_energy,entropy_rate\n0,"));
    }
}
