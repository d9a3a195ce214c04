//! Analytic Stokes-valued test fields: trigonometric polynomials in `x`
//! and `θ`, polynomial in `|k|`.

use std::f64::consts::PI;

use rand::Rng;

use super::jet::{Jet2, Real};
use crate::coherence::HermitianField;
use crate::phase_grid::{PhasePoint, PhaseSpaceGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    Cos,
    Sin,
}

impl Trig {
    fn apply<T: Real>(self, a: T) -> T {
        match self {
            Trig::Cos => a.cos(),
            Trig::Sin => a.sin(),
        }
    }
}

/// `c · t₁(2π m₁ x¹/L₁) · t₂(2π m₂ x²/L₂) · t_θ(n θ) · rᵖ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrigTerm {
    pub coeff: f64,
    pub x_modes: [(u32, Trig); 2],
    pub angle_mode: (u32, Trig),
    pub power: u32,
}

/// Smooth Hermitian matrix field `(x, k) ↦ W` in Stokes components.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticMatrixFn {
    pub tag: String,
    pub extent: [f64; 2],
    pub components: [Vec<TrigTerm>; 4],
    /// Multiply by `sin⁴(π (r − r₀)/(r₁ − r₀))` inside `[r₀, r₁]`; grid
    /// samples outside the annulus are zero.
    pub radial_bump: Option<(f64, f64)>,
}

fn cos_sin_n<T: Real>(c: T, s: T, n: u32) -> (T, T) {
    let (mut cn, mut sn) = (T::cst(1.0), T::cst(0.0));
    for _ in 0..n {
        (cn, sn) = (cn * c - sn * s, sn * c + cn * s);
    }
    (cn, sn)
}

impl AnalyticMatrixFn {
    pub fn new(tag: impl Into<String>, extent: [f64; 2], components: [Vec<TrigTerm>; 4]) -> Self {
        Self {
            tag: tag.into(),
            extent,
            components,
            radial_bump: None,
        }
    }

    /// `f · I₂` for a scalar trig polynomial `f`.
    pub fn scalar(tag: impl Into<String>, extent: [f64; 2], terms: Vec<TrigTerm>) -> Self {
        let doubled = terms.into_iter().map(|t| TrigTerm { coeff: 2.0 * t.coeff, ..t }).collect();
        Self::new(tag, extent, [doubled, vec![], vec![], vec![]])
    }

    /// Random field with `terms` terms per component; modes up to 2 and
    /// powers up to 2. `x_dims = 1` keeps the field independent of `x²`.
    pub fn random(rng: &mut impl Rng, tag: impl Into<String>, extent: [f64; 2], x_dims: usize, terms: usize) -> Self {
        let trig = |rng: &mut dyn rand::RngCore| if rng.random::<bool>() { Trig::Cos } else { Trig::Sin };
        let components = std::array::from_fn(|_| {
            (0..terms)
                .map(|_| {
                    let x_modes = std::array::from_fn(|m| {
                        let mode = if m < x_dims { rng.random_range(0..=2) } else { 0 };
                        let t = if mode == 0 { Trig::Cos } else { trig(rng) };
                        (mode, t)
                    });
                    let n = rng.random_range(0..=2);
                    TrigTerm {
                        coeff: rng.random_range(-1.0..1.0),
                        x_modes,
                        angle_mode: (n, if n == 0 { Trig::Cos } else { trig(rng) }),
                        power: rng.random_range(0..=2),
                    }
                })
                .collect()
        });
        Self::new(tag, extent, components)
    }

    pub fn with_radial_bump(mut self, r0: f64, r1: f64) -> Self {
        self.radial_bump = Some((r0, r1));
        self
    }

    /// Stokes components at `z = (x¹, x², k¹, k²)`; requires `k ≠ 0`.
    pub fn eval<T: Real>(&self, z: [T; 4]) -> [T; 4] {
        let r = (z[2] * z[2] + z[3] * z[3]).sqrt();
        let inv = r.recip();
        let (c, s) = (z[2] * inv, z[3] * inv);
        let max_n = self.components.iter().flatten().map(|t| t.angle_mode.0).max().unwrap_or(0);
        let mut angular = Vec::with_capacity(max_n as usize + 1);
        for n in 0..=max_n {
            angular.push(cos_sin_n(c, s, n));
        }
        let bump = match self.radial_bump {
            None => T::cst(1.0),
            Some((r0, r1)) => {
                let b = ((r - T::cst(r0)) * (PI / (r1 - r0))).sin();
                let b2 = b * b;
                b2 * b2
            }
        };
        std::array::from_fn(|comp| {
            let mut acc = T::cst(0.0);
            for t in &self.components[comp] {
                let mut term = T::cst(t.coeff);
                for (m, &(mode, kind)) in t.x_modes.iter().enumerate() {
                    if mode > 0 {
                        term = term * kind.apply(z[m] * (2.0 * PI * mode as f64 / self.extent[m]));
                    }
                }
                let (cn, sn) = angular[t.angle_mode.0 as usize];
                term = term
                    * match t.angle_mode.1 {
                        Trig::Cos => cn,
                        Trig::Sin => sn,
                    };
                for _ in 0..t.power {
                    term = term * r;
                }
                acc = acc + term;
            }
            acc * bump
        })
    }

    /// Second-order jets of the four components at a point.
    pub fn jets(&self, z: [f64; 4]) -> [Jet2; 4] {
        self.eval(std::array::from_fn(|i| Jet2::var(z[i], i)))
    }

    fn in_support(&self, radius: f64) -> bool {
        self.radial_bump.is_none_or(|(r0, r1)| radius > r0 && radius < r1)
    }

    pub fn at_point(&self, p: &PhasePoint) -> [f64; 4] {
        if !self.in_support(p.radius) {
            return [0.0; 4];
        }
        self.eval([p.x[0], p.x[1], p.k[0], p.k[1]])
    }

    pub fn sample(&self, grid: &PhaseSpaceGrid) -> HermitianField {
        HermitianField::sample(grid, |p| self.at_point(p))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn angular_recursion_matches_trig() {
        let theta: f64 = 0.83;
        let (c, s) = cos_sin_n(theta.cos(), theta.sin(), 3);
        assert!((c - (3.0 * theta).cos()).abs() < 1e-15);
        assert!((s - (3.0 * theta).sin()).abs() < 1e-15);
    }

    #[test]
    fn periodic_in_x_and_one_dimensional_when_asked() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = AnalyticMatrixFn::random(&mut rng, "u", [2.0, 3.0], 1, 4);
        let a = f.eval([0.3, 0.1, 0.7, -0.4]);
        let b = f.eval([2.3, 1.9, 0.7, -0.4]);
        for c in 0..4 {
            assert!((a[c] - b[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn scalar_field_is_unpolarized() {
        let t = TrigTerm {
            coeff: 0.5,
            x_modes: [(1, Trig::Sin), (0, Trig::Cos)],
            angle_mode: (1, Trig::Cos),
            power: 1,
        };
        let f = AnalyticMatrixFn::scalar("f", [1.0, 1.0], vec![t]);
        let s = f.eval([0.25, 0.0, 2.0, 0.0]);
        assert!((s[0] - 2.0 * 0.5 * 2.0).abs() < 1e-14);
        assert_eq!(&s[1..], &[0.0; 3]);
    }

    #[test]
    fn bump_vanishes_outside_annulus() {
        let f = AnalyticMatrixFn::scalar("one", [1.0, 1.0], vec![TrigTerm {
            coeff: 1.0,
            x_modes: [(0, Trig::Cos); 2],
            angle_mode: (0, Trig::Cos),
            power: 0,
        }])
        .with_radial_bump(0.5, 1.5);
        let p = |r: f64| PhasePoint { x: [0.0; 2], k: [r, 0.0], radius: r, theta: 0.0 };
        assert_eq!(f.at_point(&p(0.5)), [0.0; 4]);
        assert_eq!(f.at_point(&p(1.6)), [0.0; 4]);
        assert!((f.at_point(&p(1.0))[0] - 2.0).abs() < 1e-14);
    }
}
