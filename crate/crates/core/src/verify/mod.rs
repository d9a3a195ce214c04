//! Numerical certification of the bracket identities.
//!
//! The `matrix` suite evaluates the continuum bracket on analytic fields
//! with exact second derivatives ([`jet`]), so identities that hold in the
//! continuum show up at rounding level. The grid suites measure the
//! discrete brackets directly, either against rounding-level thresholds or
//! through convergence-order fits.

pub mod analytic;
pub mod jet;
mod suite;
pub mod thermo;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use analytic::{AnalyticMatrixFn, Trig, TrigTerm};
pub use suite::{axiom_suite, grid_casimir_study, grid_jacobi_study, refinement_grid, JacobiStudy, RefinementStudy};
pub use thermo::{parse_diagnostics_csv, thermo_report, ThermoCriteria, ThermoParseError, ThermoVerdict};

use jet::{matrix_bracket1, matrix_bracket2};

/// Frobenius norm of the matrix with Stokes components `s`.
pub fn stokes_norm(s: &[f64; 4]) -> f64 {
    (0.5 * s.iter().map(|v| v * v).sum::<f64>()).sqrt()
}

/// A residual with the magnitude it is normalized by.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    pub value: f64,
    pub scale: f64,
}

impl Residual {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.value / self.scale
        } else {
            self.value
        }
    }

    fn max(self, o: Residual) -> Residual {
        let (a, b) = (self.relative(), o.relative());
        if b > a || a.is_nan() {
            o
        } else {
            self
        }
    }
}

/// `[U, V]_M` at a point, through exact first derivatives.
pub fn matrix_bracket_at(u: &AnalyticMatrixFn, v: &AnalyticMatrixFn, z: [f64; 4]) -> [f64; 4] {
    let ju = u.jets(z).map(|j| j.first());
    let jv = v.jets(z).map(|j| j.first());
    matrix_bracket1(&ju, &jv)
}

/// The three nested terms `[[U,V],W]`, `[[V,W],U]`, `[[W,U],V]` at a point.
pub fn nested_terms(u: &AnalyticMatrixFn, v: &AnalyticMatrixFn, w: &AnalyticMatrixFn, z: [f64; 4]) -> [[f64; 4]; 3] {
    let (ju, jv, jw) = (u.jets(z), v.jets(z), w.jets(z));
    let first = |j: &[jet::Jet2; 4]| j.map(|x| x.first());
    [
        matrix_bracket1(&matrix_bracket2(&ju, &jv), &first(&jw)),
        matrix_bracket1(&matrix_bracket2(&jv, &jw), &first(&ju)),
        matrix_bracket1(&matrix_bracket2(&jw, &ju), &first(&jv)),
    ]
}

/// `[[U,V],W] + [[V,W],U] + [[W,U],V]` at a point.
pub fn jacobiator_at(u: &AnalyticMatrixFn, v: &AnalyticMatrixFn, w: &AnalyticMatrixFn, z: [f64; 4]) -> [f64; 4] {
    let t = nested_terms(u, v, w, z);
    std::array::from_fn(|c| t[0][c] + t[1][c] + t[2][c])
}

/// Largest `‖[[U,V],W] + [[V,W],U] + [[W,U],V]‖_F` over the samples,
/// normalized by the largest nested-term norm seen.
pub fn jacobi_residual_matrix(u: &AnalyticMatrixFn, v: &AnalyticMatrixFn, w: &AnalyticMatrixFn, samples: &[[f64; 4]]) -> Residual {
    let mut value: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &z in samples {
        let terms = nested_terms(u, v, w, z);
        let sum: [f64; 4] = std::array::from_fn(|c| terms[0][c] + terms[1][c] + terms[2][c]);
        value = value.max(stokes_norm(&sum));
        for t in &terms {
            scale = scale.max(stokes_norm(t));
        }
    }
    Residual { value, scale }
}

/// `‖[U,V] + [V,U]‖_F` over the samples, normalized by `‖[U,V]‖_F`.
pub fn antisymmetry_residual_matrix(u: &AnalyticMatrixFn, v: &AnalyticMatrixFn, samples: &[[f64; 4]]) -> Residual {
    let mut value: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &z in samples {
        let a = matrix_bracket_at(u, v, z);
        let b = matrix_bracket_at(v, u, z);
        let sum: [f64; 4] = std::array::from_fn(|c| a[c] + b[c]);
        value = value.max(stokes_norm(&sum));
        scale = scale.max(stokes_norm(&a));
    }
    Residual { value, scale }
}

/// `a U + b V` as a single analytic field.
pub fn combine(a: f64, u: &AnalyticMatrixFn, b: f64, v: &AnalyticMatrixFn) -> AnalyticMatrixFn {
    let components = std::array::from_fn(|c| {
        let su = u.components[c].iter().map(|t| TrigTerm { coeff: a * t.coeff, ..*t });
        let sv = v.components[c].iter().map(|t| TrigTerm { coeff: b * t.coeff, ..*t });
        su.chain(sv).collect()
    });
    AnalyticMatrixFn {
        tag: format!("{a}*{}+{b}*{}", u.tag, v.tag),
        extent: u.extent,
        components,
        radial_bump: u.radial_bump,
    }
}

/// Uniform random phase-space points with `|k| ∈ [r0, r1]`.
pub fn random_points(rng: &mut impl Rng, n: usize, extent: [f64; 2], r0: f64, r1: f64) -> Vec<[f64; 4]> {
    (0..n)
        .map(|_| {
            let r = rng.random_range(r0..r1);
            let th = rng.random_range(0.0..std::f64::consts::TAU);
            [
                rng.random_range(0.0..extent[0]),
                rng.random_range(0.0..extent[1]),
                r * th.cos(),
                r * th.sin(),
            ]
        })
        .collect()
}

/// Least-squares convergence order `p` in `r ≈ C hᵖ`, with `h ∝ 1/n`.
pub fn fit_order(n: &[usize], residuals: &[f64]) -> f64 {
    let xs: Vec<f64> = n.iter().map(|&v| -(v as f64).ln()).collect();
    let ys: Vec<f64> = residuals.iter().map(|r| r.abs().ln()).collect();
    let m = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / m, ys.iter().sum::<f64>() / m);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BracketKind {
    Matrix,
    PoissonGrid,
    MetricGrid,
}

impl BracketKind {
    pub const ALL: [BracketKind; 3] = [BracketKind::Matrix, BracketKind::PoissonGrid, BracketKind::MetricGrid];

    pub fn name(&self) -> &'static str {
        match self {
            BracketKind::Matrix => "matrix",
            BracketKind::PoissonGrid => "poisson_grid",
            BracketKind::MetricGrid => "metric_grid",
        }
    }
}

impl FromStr for BracketKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown bracket kind `{s}` (expected matrix, poisson_grid or metric_grid)"))
    }
}

/// Sizes and seed for the axiom suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteInputs {
    pub seed: u64,
    /// Random analytic triples for the matrix suite.
    pub triples: usize,
    /// Sample points per triple.
    pub points: usize,
    /// Trig terms per Stokes component.
    pub terms: usize,
    /// Points per axis for the grid refinement studies.
    pub refinements: Vec<usize>,
    pub metric_draws: usize,
}

impl Default for SuiteInputs {
    fn default() -> Self {
        Self {
            seed: 20240601,
            triples: 100,
            points: 100,
            terms: 3,
            refinements: vec![16, 32, 64],
            metric_draws: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    AtMost(f64),
    AtLeast(f64),
    Within(f64, f64),
}

impl Threshold {
    pub fn admits(&self, v: f64) -> bool {
        match *self {
            Threshold::AtMost(t) => v <= t,
            Threshold::AtLeast(t) => v >= t,
            Threshold::Within(lo, hi) => v >= lo && v <= hi,
        }
    }
}

impl fmt::Display for Threshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match *self {
            Threshold::AtMost(t) => format!("<= {t:.1e}"),
            Threshold::AtLeast(t) => format!(">= {t:.1e}"),
            Threshold::Within(lo, hi) => format!("in [{lo}, {hi}]"),
        };
        f.pad(&s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomResult {
    pub name: String,
    /// Relative residual, or a fitted order for refinement studies.
    pub residual: f64,
    /// What the residual was normalized by; `1` for orders.
    pub scale: f64,
    pub threshold: Threshold,
    pub pass: bool,
}

impl AxiomResult {
    pub fn new(name: impl Into<String>, residual: f64, scale: f64, threshold: Threshold) -> Self {
        Self {
            name: name.into(),
            residual,
            scale,
            pass: threshold.admits(residual),
            threshold,
        }
    }

    pub fn relative(name: impl Into<String>, r: Residual, threshold: Threshold) -> Self {
        Self::new(name, r.relative(), r.scale, threshold)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub kind: BracketKind,
    pub rows: Vec<AxiomResult>,
}

impl Report {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn row(&self, name: &str) -> Option<&AxiomResult> {
        self.rows.iter().find(|r| r.name == name)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[{}]", self.kind.name())?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<44} {:>12.4e} {:>16} scale={:<11.4e} {}",
                r.name,
                r.residual,
                r.threshold,
                r.scale,
                if r.pass { "PASS" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coherence::Hermitian2;
    use jet::Jet2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const EXT: [f64; 2] = [1.0, 1.5];

    fn triple(seed: u64) -> [AnalyticMatrixFn; 3] {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ["u", "v", "w"].map(|t| AnalyticMatrixFn::random(&mut rng, t, EXT, 2, 3))
    }

    fn scalar_part(f: &AnalyticMatrixFn) -> AnalyticMatrixFn {
        let mut g = f.clone();
        for c in 1..4 {
            g.components[c].clear();
        }
        g
    }

    fn points(seed: u64) -> Vec<[f64; 4]> {
        random_points(&mut ChaCha8Rng::seed_from_u64(seed), 50, EXT, 0.5, 1.5)
    }

    /// The bracket written with explicit complex matrices and the Jordan
    /// product, `[A, B] = ½ Σ_m (∂ₓA ∂ₖB + ∂ₖB ∂ₓA − ∂ₖA ∂ₓB − ∂ₓB ∂ₖA)`.
    #[test]
    fn stokes_bracket_matches_jordan_product() {
        let [u, v, _] = triple(1);
        for z in points(2) {
            let (ju, jv) = (u.jets(z), v.jets(z));
            let mat = |j: &[Jet2; 4], i: usize| Hermitian2 { stokes: j.map(|x| x.g[i]) }.to_matrix();
            let mut m = crate::coherence::ComplexMatrix2::zeros();
            for k in 0..2 {
                let (ax, ak) = (mat(&ju, jet::x_index(k)), mat(&ju, jet::k_index(k)));
                let (bx, bk) = (mat(&jv, jet::x_index(k)), mat(&jv, jet::k_index(k)));
                m += (ax * bk + bk * ax - ak * bx - bx * ak) * crate::coherence::Complex64::new(0.5, 0.0);
            }
            let want = crate::coherence::matrix_to_stokes(&m).unwrap();
            let got = matrix_bracket_at(&u, &v, z);
            for c in 0..4 {
                assert!((want[c] - got[c]).abs() < 1e-12 * (1.0 + want[c].abs()));
            }
        }
    }

    #[test]
    fn antisymmetry_is_exact() {
        let [u, v, _] = triple(3);
        assert_eq!(antisymmetry_residual_matrix(&u, &v, &points(4)).value, 0.0);
    }

    #[test]
    fn equal_arguments_give_zero_residual() {
        let [u, _, w] = triple(5);
        let r = jacobi_residual_matrix(&u, &u, &w, &points(6));
        assert!(r.relative() < 1e-14, "{r:?}");
    }

    #[test]
    fn commuting_triples_satisfy_jacobi() {
        let [u, v, w] = triple(7).map(|f| scalar_part(&f));
        let r = jacobi_residual_matrix(&u, &v, &w, &points(8));
        assert!(r.scale > 1e-3);
        assert!(r.relative() < 1e-12, "{r:?}");
    }

    #[test]
    fn jacobi_holds_when_one_argument_is_scalar() {
        let [u, v, w] = triple(9);
        let s = scalar_part(&w);
        for (a, b, c) in [(&u, &v, &s), (&s, &u, &v), (&u, &s, &v)] {
            let r = jacobi_residual_matrix(a, b, c, &points(10));
            assert!(r.relative() < 1e-12, "{r:?}");
        }
    }

    #[test]
    fn noncommuting_triples_violate_jacobi() {
        // The polarized parts do not close under the symmetrized bracket.
        let [u, v, w] = triple(11);
        let r = jacobi_residual_matrix(&u, &v, &w, &points(12));
        assert!(r.relative() > 1e-3, "{r:?}");
    }

    #[test]
    fn order_fit_recovers_power_law() {
        let n = [16, 32, 64];
        let r: Vec<f64> = n.iter().map(|&v| 3.0 / (v as f64).powi(2)).collect();
        assert!((fit_order(&n, &r) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn combine_is_linear() {
        let [u, v, _] = triple(13);
        let c = combine(2.0, &u, -0.5, &v);
        let z = points(14)[0];
        let (a, b, s) = (u.eval(z), v.eval(z), c.eval(z));
        for k in 0..4 {
            assert!((s[k] - (2.0 * a[k] - 0.5 * b[k])).abs() < 1e-13);
        }
    }

    #[test]
    fn report_format() {
        let rep = Report {
            kind: BracketKind::Matrix,
            rows: vec![
                AxiomResult::new("antisymmetry", 0.0, 1.0, Threshold::AtMost(1e-14)),
                AxiomResult::new("order", 1.0, 1.0, Threshold::Within(1.8, 2.2)),
            ],
        };
        let s = rep.to_string();
        assert!(s.starts_with("[matrix]\n"));
        assert!(s.lines().nth(1).unwrap().ends_with("PASS"));
        assert!(s.lines().nth(2).unwrap().ends_with("FAIL"));
        assert!(!rep.all_pass());
        assert_eq!("poisson_grid".parse::<BracketKind>().unwrap(), BracketKind::PoissonGrid);
        assert!("nope".parse::<BracketKind>().is_err());
    }
}
