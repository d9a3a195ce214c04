//! Second-order jets over the four phase-space coordinates
//! `(x¹, x², k¹, k²)`: value, gradient and Hessian propagated exactly.

use std::ops::{Add, Mul, Neg, Sub};

pub const DIM: usize = 4;

/// Arithmetic shared by plain floats and jets, so one analytic expression
/// serves both sampling and exact differentiation.
pub trait Real: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + Neg<Output = Self> + Mul<f64, Output = Self> {
    fn cst(c: f64) -> Self;
    fn value(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
    fn recip(self) -> Self;
}

impl Real for f64 {
    fn cst(c: f64) -> Self {
        c
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn recip(self) -> Self {
        1.0 / self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub g: [f64; DIM],
    pub h: [[f64; DIM]; DIM],
}

/// Value and gradient only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet1 {
    pub v: f64,
    pub g: [f64; DIM],
}

impl Jet2 {
    pub fn constant(v: f64) -> Self {
        Self {
            v,
            g: [0.0; DIM],
            h: [[0.0; DIM]; DIM],
        }
    }

    /// The coordinate `i` at value `v`.
    pub fn var(v: f64, i: usize) -> Self {
        let mut j = Self::constant(v);
        j.g[i] = 1.0;
        j
    }

    pub fn first(&self) -> Jet1 {
        Jet1 { v: self.v, g: self.g }
    }

    fn chain(self, f0: f64, f1: f64, f2: f64) -> Self {
        let mut out = Self::constant(f0);
        for i in 0..DIM {
            out.g[i] = f1 * self.g[i];
            for j in 0..DIM {
                out.h[i][j] = f1 * self.h[i][j] + f2 * self.g[i] * self.g[j];
            }
        }
        out
    }
}

impl Add for Jet2 {
    type Output = Self;
    fn add(mut self, o: Self) -> Self {
        self.v += o.v;
        for i in 0..DIM {
            self.g[i] += o.g[i];
            for j in 0..DIM {
                self.h[i][j] += o.h[i][j];
            }
        }
        self
    }
}

impl Neg for Jet2 {
    type Output = Self;
    fn neg(self) -> Self {
        self * -1.0
    }
}

impl Sub for Jet2 {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + (-o)
    }
}

impl Mul<f64> for Jet2 {
    type Output = Self;
    fn mul(mut self, c: f64) -> Self {
        self.v *= c;
        for i in 0..DIM {
            self.g[i] *= c;
            for j in 0..DIM {
                self.h[i][j] *= c;
            }
        }
        self
    }
}

impl Mul for Jet2 {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut out = Self::constant(self.v * o.v);
        for i in 0..DIM {
            out.g[i] = self.v * o.g[i] + o.v * self.g[i];
            for j in 0..DIM {
                out.h[i][j] = self.v * o.h[i][j] + o.v * self.h[i][j] + self.g[i] * o.g[j] + o.g[i] * self.g[j];
            }
        }
        out
    }
}

impl Real for Jet2 {
    fn cst(c: f64) -> Self {
        Self::constant(c)
    }
    fn value(&self) -> f64 {
        self.v
    }
    fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }
    fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }
    fn sqrt(self) -> Self {
        let r = self.v.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * self.v))
    }
    fn recip(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }
}

/// Index of `x^m` and `k^m` among the jet coordinates.
pub const fn x_index(m: usize) -> usize {
    m
}
pub const fn k_index(m: usize) -> usize {
    2 + m
}

/// `{f, g}` with its gradient, from second-order jets.
pub fn canonical2(f: &Jet2, g: &Jet2) -> Jet1 {
    let mut out = Jet1 { v: 0.0, g: [0.0; DIM] };
    for m in 0..2 {
        let (x, k) = (x_index(m), k_index(m));
        out.v += f.g[x] * g.g[k] - f.g[k] * g.g[x];
        for a in 0..DIM {
            out.g[a] += f.h[x][a] * g.g[k] + f.g[x] * g.h[k][a] - f.h[k][a] * g.g[x] - f.g[k] * g.h[x][a];
        }
    }
    out
}

/// `{f, g}` from first-order jets.
pub fn canonical1(f: &Jet1, g: &Jet1) -> f64 {
    (0..2)
        .map(|m| {
            let (x, k) = (x_index(m), k_index(m));
            f.g[x] * g.g[k] - f.g[k] * g.g[x]
        })
        .sum()
}

/// Stokes form of the matrix bracket on second-order jets.
pub fn matrix_bracket2(u: &[Jet2; 4], v: &[Jet2; 4]) -> [Jet1; 4] {
    let zero = Jet1 { v: 0.0, g: [0.0; DIM] };
    let add = |a: Jet1, b: Jet1, c: f64| Jet1 {
        v: a.v + c * b.v,
        g: std::array::from_fn(|i| a.g[i] + c * b.g[i]),
    };
    let mut out = [zero; 4];
    for c in 0..4 {
        out[0] = add(out[0], canonical2(&u[c], &v[c]), 0.5);
    }
    for c in 1..4 {
        out[c] = add(add(zero, canonical2(&u[0], &v[c]), 0.5), canonical2(&u[c], &v[0]), 0.5);
    }
    out
}

/// Stokes form of the matrix bracket on first-order jets.
pub fn matrix_bracket1(u: &[Jet1; 4], v: &[Jet1; 4]) -> [f64; 4] {
    let mut out = [0.0; 4];
    out[0] = 0.5 * (0..4).map(|c| canonical1(&u[c], &v[c])).sum::<f64>();
    for c in 1..4 {
        out[c] = 0.5 * (canonical1(&u[0], &v[c]) + canonical1(&u[c], &v[0]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn expr<T: Real>(z: [T; 4]) -> T {
        let r = (z[2] * z[2] + z[3] * z[3]).sqrt();
        (z[0] * 1.3).sin() * z[1].cos() * r + (z[2] * z[3]).recip() * 0.2 - z[1] * z[3] * z[0]
    }

    proptest! {
        #[test]
        fn jets_match_central_differences(p in prop::array::uniform4(0.3..1.5f64)) {
            let jet = expr(std::array::from_fn(|i| Jet2::var(p[i], i)));
            prop_assert!((jet.v - expr(p)).abs() < 1e-14);
            let h = 1e-4;
            for i in 0..4 {
                let shift = |d: f64| { let mut q = p; q[i] += d; q };
                let fd = (expr(shift(h)) - expr(shift(-h))) / (2.0 * h);
                prop_assert!((fd - jet.g[i]).abs() < 1e-6 * (1.0 + fd.abs()));
                for j in 0..4 {
                    let shift2 = |a: f64, b: f64| { let mut q = p; q[i] += a; q[j] += b; q };
                    let fd2 = (expr(shift2(h, h)) - expr(shift2(h, -h)) - expr(shift2(-h, h)) + expr(shift2(-h, -h))) / (4.0 * h * h);
                    prop_assert!((fd2 - jet.h[i][j]).abs() < 1e-5 * (1.0 + fd2.abs()));
                }
            }
        }
    }

    #[test]
    fn canonical_pair() {
        let x = Jet2::var(0.4, x_index(0));
        let k = Jet2::var(1.1, k_index(0));
        assert_eq!(canonical2(&x, &k).v, 1.0);
        assert_eq!(canonical2(&k, &x).v, -1.0);
        // {x², k²} = 4 x k, gradient (4k, 0, 4x, 0)
        let b = canonical2(&(x * x), &(k * k));
        assert!((b.v - 4.0 * 0.4 * 1.1).abs() < 1e-15);
        assert!((b.g[0] - 4.4).abs() < 1e-15 && (b.g[2] - 1.6).abs() < 1e-15);
    }
}
