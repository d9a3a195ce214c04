//! Rays of `ω = v(x)|k|`, their Frenet–Serret and Darboux frames, the
//! optical rotation term and the Stokes rotation law.
//!
//! Rays are parametrised by arclength:
//!
//! ```text
//! dx/ds = k̂,    dk/ds = −|k| ∇v / v
//! ```

use std::io::{self, Write};

use nalgebra::{Vector3, Vector6};
use ode_solvers::{Dop853, Rk4, System};
use thiserror::Error;

use crate::medium::VelocityModel;

/// Curvature below which the Frenet normal is continued from the previous
/// sample instead of being recomputed.
pub const KAPPA_FLOOR: f64 = 1e-10;
const K_FLOOR: f64 = 1e-12;
/// Substeps of the short re-traces used by [`optical_rotation_n`].
const RETRACE_SUBSTEPS: usize = 4;
/// Relative size of the `k` perturbation along `∇v`.
const K_PERTURBATION: f64 = 1e-3;

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FrameError {
    #[error("|k| = {0:e} is below the floor")]
    KTooSmall(f64),
    #[error("ray integration failed: {0}")]
    Integration(String),
    #[error("ray needs at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("Frenet data missing; call frenet_frame first")]
    MissingFrenet,
    #[error("basis is not orthonormal at sample {0}")]
    NotOrthonormal(usize),
    #[error("invalid ray parameter: {0}")]
    BadParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaySample {
    pub s: f64,
    pub x: Vec3,
    pub k: Vec3,
    pub t: Vec3,
    pub n: Vec3,
    pub b: Vec3,
    pub kappa: f64,
    pub tau: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayFrame {
    pub samples: Vec<RaySample>,
    pub velocity_model: VelocityModel,
    pub ds: f64,
    /// Largest relative deviation of `ω = v|k|` from its initial value.
    pub omega_drift: f64,
    pub has_frenet: bool,
    pub has_alpha: bool,
}

struct RayOde(VelocityModel);

impl System<f64, Vector6<f64>> for RayOde {
    fn system(&self, _s: f64, y: &Vector6<f64>, dy: &mut Vector6<f64>) {
        let x = y.fixed_rows::<3>(0).into_owned();
        let k = y.fixed_rows::<3>(3).into_owned();
        let kn = k.norm();
        let v = self.0.velocity(&x);
        let dk = self.0.gradient(&x) * (-kn / v);
        dy.fixed_rows_mut::<3>(0).copy_from(&(k / kn));
        dy.fixed_rows_mut::<3>(3).copy_from(&dk);
    }
}

fn state(x: &Vec3, k: &Vec3) -> Vector6<f64> {
    Vector6::new(x[0], x[1], x[2], k[0], k[1], k[2])
}

fn split(y: &Vector6<f64>) -> (Vec3, Vec3) {
    (y.fixed_rows::<3>(0).into_owned(), y.fixed_rows::<3>(3).into_owned())
}

/// Trace a ray over arclength `[0, length]`, sampled every `ds`, with an
/// adaptive 8(5,3) Dormand–Prince integrator at tolerance `tol`.
pub fn trace_ray(
    model: VelocityModel,
    x0: Vec3,
    k0: Vec3,
    length: f64,
    ds: f64,
    tol: f64,
) -> Result<RayFrame, FrameError> {
    if k0.norm() < K_FLOOR {
        return Err(FrameError::KTooSmall(k0.norm()));
    }
    if !(length > 0.0 && ds > 0.0 && tol > 0.0) {
        return Err(FrameError::BadParameter("length, ds and tol must be positive".into()));
    }
    let n = (length / ds).round() as usize;
    if n < 2 {
        return Err(FrameError::TooFewSamples(n + 1));
    }
    let length = n as f64 * ds;
    let mut solver = Dop853::new(RayOde(model), 0.0, length, ds, state(&x0, &k0), tol, tol);
    solver.integrate().map_err(|e| FrameError::Integration(e.to_string()))?;
    let omega0 = model.velocity(&x0) * k0.norm();
    let mut samples = Vec::with_capacity(n + 1);
    let mut omega_drift = 0.0_f64;
    for (&s, y) in solver.x_out().iter().zip(solver.y_out()) {
        let (x, k) = split(y);
        let kn = k.norm();
        if kn < K_FLOOR {
            return Err(FrameError::KTooSmall(kn));
        }
        omega_drift = omega_drift.max((model.velocity(&x) * kn - omega0).abs() / omega0.abs());
        samples.push(RaySample {
            s,
            x,
            k,
            t: k / kn,
            n: Vec3::zeros(),
            b: Vec3::zeros(),
            kappa: 0.0,
            tau: 0.0,
            alpha: 0.0,
        });
    }
    // the dense output may repeat the end point
    samples.dedup_by(|a, b| (a.s - b.s).abs() < 1e-12 * ds);
    if samples.len() < 3 {
        return Err(FrameError::TooFewSamples(samples.len()));
    }
    Ok(RayFrame {
        samples,
        velocity_model: model,
        ds,
        omega_drift,
        has_frenet: false,
        has_alpha: false,
    })
}

/// A unit vector perpendicular to `t`, built from the axis least aligned
/// with it.
pub fn seed_normal(t: &Vec3) -> Vec3 {
    let i = t.iamin();
    let e = Vec3::ith(i, 1.0);
    (e - t * t.dot(&e)).normalize()
}

fn project_out(v: &Vec3, t: &Vec3) -> Vec3 {
    v - t * t.dot(v)
}

/// Second-order differences along uniformly spaced samples; one-sided at the
/// ends.
fn derivative_along(values: &[Vec3], ds: f64) -> Vec<Vec3> {
    let n = values.len();
    (0..n)
        .map(|i| {
            if i == 0 {
                (values[1] * 4.0 - values[0] * 3.0 - values[2]) / (2.0 * ds)
            } else if i == n - 1 {
                (values[n - 1] * 3.0 - values[n - 2] * 4.0 + values[n - 3]) / (2.0 * ds)
            } else {
                (values[i + 1] - values[i - 1]) / (2.0 * ds)
            }
        })
        .collect()
}

/// Fill `T, N, B, κ, τ` from the samples.
pub fn frenet_frame(ray: &RayFrame) -> Result<RayFrame, FrameError> {
    let mut out = ray.clone();
    let ts: Vec<Vec3> = ray.samples.iter().map(|s| s.t).collect();
    let dts = derivative_along(&ts, ray.ds);
    let mut prev: Option<Vec3> = None;
    for (smp, dt) in out.samples.iter_mut().zip(&dts) {
        smp.kappa = dt.norm();
        let perp = project_out(dt, &smp.t);
        let normal = if smp.kappa >= KAPPA_FLOOR && perp.norm() >= KAPPA_FLOOR {
            perp.normalize()
        } else {
            let base = prev.unwrap_or_else(|| seed_normal(&smp.t));
            project_out(&base, &smp.t).normalize()
        };
        smp.n = normal;
        smp.b = smp.t.cross(&normal);
        prev = Some(normal);
    }
    let bs: Vec<Vec3> = out.samples.iter().map(|s| s.b).collect();
    let dbs = derivative_along(&bs, ray.ds);
    for (smp, db) in out.samples.iter_mut().zip(&dbs) {
        // least-squares fit of dB/ds = −τ N
        smp.tau = -db.dot(&smp.n);
    }
    out.has_frenet = true;
    Ok(out)
}

/// Residual `max |dB/ds + τ N|` over interior samples.
pub fn frenet_residual(ray: &RayFrame) -> f64 {
    let bs: Vec<Vec3> = ray.samples.iter().map(|s| s.b).collect();
    let dbs = derivative_along(&bs, ray.ds);
    (1..ray.samples.len() - 1)
        .map(|i| (dbs[i] + ray.samples[i].n * ray.samples[i].tau).norm())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BasisRule {
    /// Frenet frame rotated by the Darboux angle `α` carried by each sample.
    Darboux,
    /// The Frenet pair `(N, B)` itself.
    Frenet,
    /// `z1 = normalize(P⊥ e)` for a fixed lab vector `e`.
    Fixed(Vec3),
}

/// A polarisation basis `{z1, z2}` along a ray.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationBasis {
    pub rule: BasisRule,
    pub z1: Vec<Vec3>,
    pub z2: Vec<Vec3>,
}

impl PolarizationBasis {
    /// Largest deviation from orthonormality and from `⊥ T`.
    pub fn orthonormality_defect(&self, ray: &RayFrame) -> f64 {
        self.z1
            .iter()
            .zip(&self.z2)
            .zip(&ray.samples)
            .map(|((a, b), s)| {
                (a.norm() - 1.0)
                    .abs()
                    .max((b.norm() - 1.0).abs())
                    .max(a.dot(b).abs())
                    .max(a.dot(&s.t).abs())
                    .max(b.dot(&s.t).abs())
            })
            .fold(0.0, f64::max)
    }
}

fn rotate_pair(n: &Vec3, b: &Vec3, alpha: f64) -> (Vec3, Vec3) {
    let (s, c) = alpha.sin_cos();
    (n * c + b * s, -n * s + b * c)
}

/// Integrate `dα/ds = −τ` by the trapezoid rule and return the Darboux basis
/// `z1 = cos α N + sin α B`, `z2 = −sin α N + cos α B`.
pub fn darboux_frame(ray: &mut RayFrame, alpha0: f64) -> Result<PolarizationBasis, FrameError> {
    if !ray.has_frenet {
        return Err(FrameError::MissingFrenet);
    }
    let mut alpha = alpha0;
    let mut prev_tau: Option<f64> = None;
    for smp in ray.samples.iter_mut() {
        if let Some(t0) = prev_tau {
            alpha -= 0.5 * ray.ds * (t0 + smp.tau);
        }
        smp.alpha = alpha;
        prev_tau = Some(smp.tau);
    }
    ray.has_alpha = true;
    let (z1, z2) = ray.samples.iter().map(|s| rotate_pair(&s.n, &s.b, s.alpha)).unzip();
    Ok(PolarizationBasis {
        rule: BasisRule::Darboux,
        z1,
        z2,
    })
}

pub fn frenet_basis(ray: &RayFrame) -> Result<PolarizationBasis, FrameError> {
    if !ray.has_frenet {
        return Err(FrameError::MissingFrenet);
    }
    Ok(PolarizationBasis {
        rule: BasisRule::Frenet,
        z1: ray.samples.iter().map(|s| s.n).collect(),
        z2: ray.samples.iter().map(|s| s.b).collect(),
    })
}

fn fixed_pair(t: &Vec3, e: &Vec3) -> (Vec3, Vec3) {
    let z1 = project_out(e, t).normalize();
    (z1, t.cross(&z1))
}

pub fn fixed_basis(ray: &RayFrame, e: Vec3) -> PolarizationBasis {
    let (z1, z2) = ray.samples.iter().map(|s| fixed_pair(&s.t, &e)).unzip();
    PolarizationBasis {
        rule: BasisRule::Fixed(e),
        z1,
        z2,
    }
}

fn short_trace(model: VelocityModel, x: &Vec3, k: &Vec3, h: f64) -> Result<Vec3, FrameError> {
    let mut rk = Rk4::new(RayOde(model), 0.0, state(x, k), h, h / RETRACE_SUBSTEPS as f64);
    rk.integrate().map_err(|e| FrameError::Integration(e.to_string()))?;
    let (_, kk) = split(rk.y_out().last().expect("rk4 produced no output"));
    Ok(kk.normalize())
}

/// Frenet pair at an arbitrary phase-space point, from short re-traces of
/// length `h` forwards and backwards and a centered difference of `T`.
fn local_frenet(model: VelocityModel, x: &Vec3, k: &Vec3, h: f64, fallback: &Vec3) -> Result<(Vec3, Vec3), FrameError> {
    let t = k.normalize();
    let ahead = short_trace(model, x, k, h)?;
    let behind = -short_trace(model, x, &-k, h)?;
    let perp = project_out(&((ahead - behind) / (2.0 * h)), &t);
    let n = if perp.norm() >= KAPPA_FLOOR {
        perp.normalize()
    } else {
        project_out(fallback, &t).normalize()
    };
    Ok((n, t.cross(&n)))
}

fn basis_at(
    rule: &BasisRule,
    model: VelocityModel,
    x: &Vec3,
    k: &Vec3,
    h: f64,
    smp: &RaySample,
) -> Result<(Vec3, Vec3), FrameError> {
    match rule {
        BasisRule::Fixed(e) => Ok(fixed_pair(&k.normalize(), e)),
        BasisRule::Frenet => local_frenet(model, x, k, h, &smp.n),
        BasisRule::Darboux => {
            let (n, b) = local_frenet(model, x, k, h, &smp.n)?;
            Ok(rotate_pair(&n, &b, smp.alpha))
        }
    }
}

fn check_rule(ray: &RayFrame, basis: &PolarizationBasis) -> Result<(), FrameError> {
    match basis.rule {
        BasisRule::Darboux if !ray.has_alpha => Err(FrameError::MissingFrenet),
        BasisRule::Frenet if !ray.has_frenet => Err(FrameError::MissingFrenet),
        _ => Ok(()),
    }
}

/// `n = N₁₂ = ½ (z1 · D z2 − z2 · D z1)` with `D = ∇v · ∇_k` at fixed `x`.
///
/// `D` is a centered difference along `k ± ε ∇v`; the basis at the shifted
/// points is rebuilt by its rule, with short re-traces of length `ray.ds`
/// for the Frenet-based rules. The Darboux angle keeps the value of the
/// sample it labels.
pub fn optical_rotation_n(ray: &RayFrame, basis: &PolarizationBasis) -> Result<Vec<f64>, FrameError> {
    check_rule(ray, basis)?;
    if basis.orthonormality_defect(ray) > 1e-8 {
        let i = (0..ray.samples.len())
            .find(|&i| {
                let (a, b, t) = (basis.z1[i], basis.z2[i], ray.samples[i].t);
                (a.norm() - 1.0).abs().max((b.norm() - 1.0).abs()).max(a.dot(&b).abs()).max(a.dot(&t).abs()).max(b.dot(&t).abs()) > 1e-8
            })
            .unwrap_or(0);
        return Err(FrameError::NotOrthonormal(i));
    }
    let model = ray.velocity_model;
    let h = ray.ds;
    ray.samples
        .iter()
        .map(|smp| {
            let grad = model.gradient(&smp.x);
            let gn = grad.norm();
            if gn == 0.0 {
                return Ok(0.0);
            }
            let eps = K_PERTURBATION * smp.k.norm() / gn;
            let (z1, z2) = basis_at(&basis.rule, model, &smp.x, &smp.k, h, smp)?;
            let (p1, p2) = basis_at(&basis.rule, model, &smp.x, &(smp.k + grad * eps), h, smp)?;
            let (m1, m2) = basis_at(&basis.rule, model, &smp.x, &(smp.k - grad * eps), h, smp)?;
            let dz1 = (p1 - m1) / (2.0 * eps);
            let dz2 = (p2 - m2) / (2.0 * eps);
            Ok(0.5 * (z1.dot(&dz2) - z2.dot(&dz1)))
        })
        .collect()
}

/// The same antisymmetric combination with `D` read as the arclength
/// derivative along the ray.
pub fn arclength_rotation_n(ray: &RayFrame, basis: &PolarizationBasis) -> Vec<f64> {
    let d1 = derivative_along(&basis.z1, ray.ds);
    let d2 = derivative_along(&basis.z2, ray.ds);
    (0..ray.samples.len())
        .map(|i| 0.5 * (basis.z1[i].dot(&d2[i]) - basis.z2[i].dot(&d1[i])))
        .collect()
}

/// Stokes parameters after rotating the polarisation basis by `theta`.
pub fn rotate_stokes(s: [f64; 4], theta: f64) -> [f64; 4] {
    let (sn, cs) = (2.0 * theta).sin_cos();
    [s[0], cs * s[1] + sn * s[2], -sn * s[1] + cs * s[2], s[3]]
}

pub const RAY_CSV_HEADER: &str = "s,x1,x2,x3,k1,k2,k3,kappa,tau,alpha,n_darboux,n_fixed";

pub fn write_ray_csv(out: &mut impl Write, ray: &RayFrame, n_darboux: &[f64], n_fixed: &[f64]) -> io::Result<()> {
    writeln!(out, "{RAY_CSV_HEADER}")?;
    for ((s, nd), nf) in ray.samples.iter().zip(n_darboux).zip(n_fixed) {
        writeln!(
            out,
            "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.6e},{:.6e}",
            s.s, s.x[0], s.x[1], s.x[2], s.k[0], s.k[1], s.k[2], s.kappa, s.tau, s.alpha, nd, nf
        )?;
    }
    Ok(())
}

/// Initial data for a helical ray of a [`VelocityModel::GrinFiber`]: start
/// at radius `rho0` on the `x₁` axis with the helix angle that balances the
/// index gradient. Returns `(x0, k0, κ, τ)` of the exact helix.
pub fn grin_helix(v0: f64, g: f64, rho0: f64, k_norm: f64) -> Result<(Vec3, Vec3, f64, f64), FrameError> {
    let sin2 = 2.0 * g * rho0 * rho0 / (1.0 + g * rho0 * rho0);
    if !(g > 0.0 && rho0 > 0.0 && sin2 < 1.0) || v0 <= 0.0 {
        return Err(FrameError::BadParameter(format!("no helical ray for g = {g}, rho0 = {rho0}")));
    }
    let (sp, cp) = (sin2.sqrt(), (1.0 - sin2).sqrt());
    let x0 = Vec3::new(rho0, 0.0, 0.0);
    let k0 = Vec3::new(0.0, sp, cp) * k_norm;
    Ok((x0, k0, sin2 / rho0, sp * cp / rho0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn helix_ray(ds: f64) -> (RayFrame, f64, f64) {
        let (x0, k0, kappa, tau) = grin_helix(1.0, 0.5, 1.0, 1.0).unwrap();
        let ray = trace_ray(VelocityModel::GrinFiber { v0: 1.0, g: 0.5 }, x0, k0, 6.0, ds, 1e-13).unwrap();
        (frenet_frame(&ray).unwrap(), kappa, tau)
    }

    #[test]
    fn straight_ray_in_homogeneous_medium() {
        let x0 = Vec3::new(0.1, 0.2, 0.3);
        let k0 = Vec3::new(1.0, 2.0, -0.5);
        let ray = trace_ray(VelocityModel::Constant { v0: 1.0 }, x0, k0, 2.0, 0.1, 1e-12).unwrap();
        assert_eq!(ray.samples.len(), 21);
        for s in &ray.samples {
            assert!((s.x - (x0 + k0.normalize() * s.s)).norm() < 1e-12);
            assert!((s.k - k0).norm() < 1e-12);
        }
        let f = frenet_frame(&ray).unwrap();
        for s in &f.samples {
            assert!(s.kappa < 1e-10 && s.tau.abs() < 1e-10);
            assert!((s.t.dot(&s.b.cross(&s.n)) + 1.0).abs() < 1e-12);
        }
        let basis = fixed_basis(&f, Vec3::z());
        assert!(optical_rotation_n(&f, &basis).unwrap().iter().all(|&n| n == 0.0));
    }

    #[test]
    fn linear_gradient_conserves_omega() {
        let m = VelocityModel::LinearGradient { v0: 1.0, gradient: [0.0, 0.0, 0.3] };
        let ray = trace_ray(m, Vec3::zeros(), Vec3::new(1.0, 0.0, 0.5), 3.0, 0.05, 1e-13).unwrap();
        let omega0 = ray.samples[0].k.norm() * m.velocity(&ray.samples[0].x);
        for s in &ray.samples {
            let omega = m.velocity(&s.x) * s.k.norm();
            assert!((omega - omega0).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_rays() {
        let m = VelocityModel::Constant { v0: 1.0 };
        assert!(matches!(trace_ray(m, Vec3::zeros(), Vec3::zeros(), 1.0, 0.1, 1e-10), Err(FrameError::KTooSmall(_))));
        let ray = trace_ray(m, Vec3::zeros(), Vec3::x(), 1.0, 0.1, 1e-10).unwrap();
        let mut r = ray.clone();
        assert!(matches!(darboux_frame(&mut r, 0.0), Err(FrameError::MissingFrenet)));
    }

    #[test]
    fn fish_eye_rays_are_circles() {
        let m = VelocityModel::FishEye { n0: 1.0, radius: 1.0 };
        let ray = trace_ray(m, Vec3::new(0.5, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0), 2.0, 0.01, 1e-13).unwrap();
        let f = frenet_frame(&ray).unwrap();
        // circumcircle through three samples: the oracle
        let (a, b, c) = (f.samples[0].x, f.samples[100].x, f.samples[200].x);
        let (ab, ac) = (b - a, c - a);
        let nrm = ab.cross(&ac);
        let centre = a + (nrm.cross(&ab) * ac.norm_squared() + ac.cross(&nrm) * ab.norm_squared()) / (2.0 * nrm.norm_squared());
        let radius = (a - centre).norm();
        for s in &f.samples {
            assert!(((s.x - centre).norm() - radius).abs() < 1e-8);
            assert!((s.kappa - 1.0 / radius).abs() < 1e-4, "{} vs {}", s.kappa, 1.0 / radius);
            assert!(s.tau.abs() < 1e-4);
        }
    }

    #[test]
    fn helical_ray_frames() {
        let (mut f, kappa, tau) = helix_ray(0.01);
        assert!(f.omega_drift < 1e-10);
        for s in &f.samples[1..f.samples.len() - 1] {
            assert!((s.kappa - kappa).abs() < 1e-4);
            assert!((s.tau - tau).abs() < 1e-4);
            let ortho = (s.t.norm() - 1.0).abs().max(s.t.dot(&s.n).abs()).max(s.n.dot(&s.b).abs());
            assert!(ortho < 1e-8);
            assert!((s.t.cross(&s.n) - s.b).norm() < 1e-12);
            assert!((s.t - s.k.normalize()).norm() < 1e-10);
        }
        assert!(frenet_residual(&f) < 1e-4);

        let basis = darboux_frame(&mut f, 0.3).unwrap();
        assert!(basis.orthonormality_defect(&f) < 1e-8);
        let quad: f64 = {
            // composite Simpson on the sampled torsion
            let n = f.samples.len() - 1;
            assert_eq!(n % 2, 0);
            let w = |i: usize| if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
            (0..=n).map(|i| w(i) * f.samples[i].tau).sum::<f64>() * f.ds / 3.0
        };
        let drift = f.samples.last().unwrap().alpha - f.samples[0].alpha;
        assert!((drift + quad).abs() < 1e-6);

        // Darboux derivatives are parallel to T; Frenet ones are not
        let along = arclength_rotation_n(&f, &basis);
        let frenet = arclength_rotation_n(&f, &frenet_basis(&f).unwrap());
        let inner = 1..f.samples.len() - 1;
        let worst_d = inner.clone().map(|i| along[i].abs()).fold(0.0, f64::max);
        let worst_f = inner.map(|i| (frenet[i] + f.samples[i].tau).abs()).fold(0.0, f64::max);
        assert!(worst_d < 1e-3, "{worst_d}");
        assert!(worst_f < 1e-3);
        assert!(tau > 0.4);
    }

    #[test]
    fn optical_rotation_in_darboux_and_fixed_bases() {
        let (mut f, _, _) = helix_ray(0.02);
        let darboux = darboux_frame(&mut f, 0.0).unwrap();
        let n_d = optical_rotation_n(&f, &darboux).unwrap();
        let n_f = optical_rotation_n(&f, &fixed_basis(&f, Vec3::z())).unwrap();
        let max_d = n_d.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let max_f = n_f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(max_d < 1e-3, "{max_d}");
        assert!(max_f > 10.0 * max_d && max_f > 0.1, "{max_f}");
        // at fixed x the Frenet pair itself is already parallel under D
        let n_fr = optical_rotation_n(&f, &frenet_basis(&f).unwrap()).unwrap();
        assert!(n_fr.iter().all(|v| v.abs() < 1e-3));
    }

    #[test]
    fn stokes_rotation_examples() {
        assert_eq!(rotate_stokes([1.0, 0.2, 0.3, 0.4], 0.0), [1.0, 0.2, 0.3, 0.4]);
        let r = rotate_stokes([1.0, 1.0, 0.0, 0.0], PI / 4.0);
        assert!((r[0] - 1.0).abs() < 1e-15 && r[1].abs() < 1e-15 && (r[2] + 1.0).abs() < 1e-15 && r[3] == 0.0);
    }

    proptest! {
        #[test]
        fn stokes_invariants(s in prop::array::uniform4(-5.0..5.0f64), th in -10.0..10.0f64) {
            let r = rotate_stokes(s, th);
            prop_assert_eq!(r[0], s[0]);
            prop_assert_eq!(r[3], s[3]);
            let (p0, p1) = (s[1] * s[1] + s[2] * s[2], r[1] * r[1] + r[2] * r[2]);
            prop_assert!((p0 - p1).abs() <= 1e-14 * p0.max(1.0));
        }

        #[test]
        fn rotation_law_matches_basis_change(s in prop::array::uniform4(-1.0..1.0f64), th in -3.0..3.0f64) {
            // rotating the basis by θ conjugates W by R(θ)ᵀ
            let w = crate::coherence::Hermitian2 { stokes: s };
            let r = crate::scattering::rotation(th).transpose();
            let direct = w.conjugate_real(&r);
            let law = rotate_stokes(s, th);
            for (a, b) in direct.stokes.iter().zip(law) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
