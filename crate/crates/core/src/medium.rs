//! Velocity fields `v(x)` with closed-form gradients.
//!
//! [`VelocityModel`] is the 3D family used for ray tracing; [`Medium`] is
//! the periodic family sampled on the PDE grid.

use std::f64::consts::PI;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

/// 3D analytic velocity models for ray tracing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VelocityModel {
    Constant { v0: f64 },
    /// `v = v0 + b · x`.
    LinearGradient { v0: f64, gradient: [f64; 3] },
    /// Maxwell fish eye, `v = (1 + |x|²/a²) / n0`; every ray is a circle.
    FishEye { n0: f64, radius: f64 },
    /// Graded-index fibre along `x₃`, `v = v0 (1 + g (x₁² + x₂²))`; skew
    /// rays are helical.
    GrinFiber { v0: f64, g: f64 },
}

impl VelocityModel {
    pub fn velocity(&self, x: &Vector3<f64>) -> f64 {
        match *self {
            VelocityModel::Constant { v0 } => v0,
            VelocityModel::LinearGradient { v0, gradient } => v0 + Vector3::from(gradient).dot(x),
            VelocityModel::FishEye { n0, radius } => (1.0 + x.norm_squared() / (radius * radius)) / n0,
            VelocityModel::GrinFiber { v0, g } => v0 * (1.0 + g * (x[0] * x[0] + x[1] * x[1])),
        }
    }

    pub fn gradient(&self, x: &Vector3<f64>) -> Vector3<f64> {
        match *self {
            VelocityModel::Constant { .. } => Vector3::zeros(),
            VelocityModel::LinearGradient { gradient, .. } => Vector3::from(gradient),
            VelocityModel::FishEye { n0, radius } => x * (2.0 / (n0 * radius * radius)),
            VelocityModel::GrinFiber { v0, g } => Vector3::new(2.0 * v0 * g * x[0], 2.0 * v0 * g * x[1], 0.0),
        }
    }
}

/// Periodic media on the simulation torus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum Medium {
    Constant {
        v0: f64,
    },
    /// `v = v0 (1 + (a/d) Σ_i cos(2π m_i x_i / L_i))`.
    SeparableTrig {
        v0: f64,
        amplitude: f64,
        modes: Vec<u32>,
    },
}

impl Medium {
    pub fn is_uniform(&self) -> bool {
        match self {
            Medium::Constant { .. } => true,
            Medium::SeparableTrig { amplitude, modes, .. } => *amplitude == 0.0 || modes.iter().all(|&m| m == 0),
        }
    }

    pub fn velocity(&self, x: &[f64], extent: &[f64]) -> f64 {
        match self {
            Medium::Constant { v0 } => *v0,
            Medium::SeparableTrig { v0, amplitude, modes } => {
                let d = x.len() as f64;
                let s: f64 = x
                    .iter()
                    .zip(extent)
                    .zip(modes)
                    .map(|((xi, li), &m)| (2.0 * PI * m as f64 * xi / li).cos())
                    .sum();
                v0 * (1.0 + amplitude / d * s)
            }
        }
    }

    pub fn gradient(&self, x: &[f64], extent: &[f64]) -> Vec<f64> {
        match self {
            Medium::Constant { .. } => vec![0.0; x.len()],
            Medium::SeparableTrig { v0, amplitude, modes } => {
                let d = x.len() as f64;
                x.iter()
                    .zip(extent)
                    .zip(modes)
                    .map(|((xi, li), &m)| {
                        let w = 2.0 * PI * m as f64 / li;
                        -v0 * amplitude / d * w * (w * xi).sin()
                    })
                    .collect()
            }
        }
    }

    /// Smallest velocity over the torus, a lower bound used for validation.
    pub fn min_velocity(&self) -> f64 {
        match self {
            Medium::Constant { v0 } => *v0,
            Medium::SeparableTrig { v0, amplitude, .. } => v0 * (1.0 - amplitude.abs()),
        }
    }

    pub fn max_velocity(&self) -> f64 {
        match self {
            Medium::Constant { v0 } => *v0,
            Medium::SeparableTrig { v0, amplitude, .. } => v0 * (1.0 + amplitude.abs()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_gradient(m: &VelocityModel, x: Vector3<f64>) -> Vector3<f64> {
        let h = 1e-6;
        Vector3::from_fn(|i, _| {
            let e = Vector3::ith(i, h);
            (m.velocity(&(x + e)) - m.velocity(&(x - e))) / (2.0 * h)
        })
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        let models = [
            VelocityModel::Constant { v0: 1.3 },
            VelocityModel::LinearGradient { v0: 1.0, gradient: [0.1, -0.2, 0.3] },
            VelocityModel::FishEye { n0: 2.0, radius: 1.5 },
            VelocityModel::GrinFiber { v0: 1.0, g: 0.4 },
        ];
        let x = Vector3::new(0.3, -0.7, 1.1);
        for m in models {
            assert!((m.gradient(&x) - fd_gradient(&m, x)).norm() < 1e-8, "{m:?}");
        }
    }

    #[test]
    fn trig_medium_gradient() {
        let m = Medium::SeparableTrig { v0: 1.0, amplitude: 0.2, modes: vec![1, 2] };
        let ext = [2.0, 3.0];
        let x = [0.4, 1.7];
        let g = m.gradient(&x, &ext);
        for i in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += 1e-6;
            xm[i] -= 1e-6;
            let fd = (m.velocity(&xp, &ext) - m.velocity(&xm, &ext)) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-8);
        }
        assert!(!m.is_uniform());
        assert!(Medium::Constant { v0: 1.0 }.is_uniform());
        assert!((m.min_velocity() - 0.8).abs() < 1e-15);
    }
}
