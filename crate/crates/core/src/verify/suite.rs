use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::analytic::AnalyticMatrixFn;
use super::{
    antisymmetry_residual_matrix, jacobiator_at, combine, fit_order, jacobi_residual_matrix, matrix_bracket_at, random_points,
    stokes_norm, AxiomResult, BracketKind, Report, Residual, SuiteInputs, Threshold,
};
use crate::brackets::{matrix_bracket, metric_form, poisson_bracket_scaled, FunctionalHandle, Scaled};
use crate::coherence::{CoherenceField, HermitianField};
use crate::phase_grid::{GridConfig, PhaseSpaceGrid};
use crate::scattering::{build_kernel, collision, KernelSpec, SigmaProfile};

const R0: f64 = 0.5;
const R1: f64 = 1.5;
const EXT: [f64; 2] = [1.0, 1.0];

type Grid = Arc<PhaseSpaceGrid>;

/// One-dimensional grid with `n` spatial points, `n` angles and `n/2 + 1`
/// shells on `[0.5, 1.5]`, so every axis halves its spacing together.
pub fn refinement_grid(n: usize) -> PhaseSpaceGrid {
    let cfg = GridConfig::new(vec![EXT[0]], vec![n], GridConfig::uniform_shells(R0, R1, n / 2 + 1), n);
    PhaseSpaceGrid::new(&cfg).expect("refinement grid is valid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementStudy {
    pub n: Vec<usize>,
    pub residuals: Vec<f64>,
    pub order: f64,
}

impl RefinementStudy {
    fn from(n: &[usize], residuals: Vec<f64>) -> Self {
        Self {
            n: n.to_vec(),
            order: fit_order(n, &residuals),
            residuals,
        }
    }
}

fn bumped(rng: &mut ChaCha8Rng, tag: &str, x_dims: usize, terms: usize) -> AnalyticMatrixFn {
    AnalyticMatrixFn::random(rng, tag, EXT, x_dims, terms).with_radial_bump(R0, R1)
}

fn state(grid: &Grid, f: &AnalyticMatrixFn) -> CoherenceField {
    CoherenceField::new(grid.clone(), f.sample(grid), 0.0).expect("sampled on its grid")
}

/// `|{S, F_U}(W)|` on refined grids; the continuum value is zero.
pub fn grid_casimir_study(seed: u64, terms: usize, n: &[usize]) -> RefinementStudy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, u) = (bumped(&mut rng, "w", 1, terms), bumped(&mut rng, "u", 1, terms));
    let residuals = n
        .iter()
        .map(|&n| {
            let grid = Arc::new(refinement_grid(n));
            let wf = state(&grid, &w);
            let fu = FunctionalHandle::LinearTest(u.sample(&grid));
            poisson_bracket_scaled(&FunctionalHandle::Entropy, &fu, &wf).expect("same grid").value.abs()
        })
        .collect();
    RefinementStudy::from(n, residuals)
}

/// Grid Jacobi residuals next to the continuum value of the same
/// functional identity.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobiStudy {
    /// `|{{F_U,F_V},F_Z} + cyc.|(W)` on each grid; fitted order of these.
    pub grid: RefinementStudy,
    /// `∫ Tr(W J)` with `J` the exact pointwise Jacobiator of `U, V, Z`,
    /// integrated with the same grid's quadrature.
    pub continuum: Vec<f64>,
    /// Fitted order of `|grid − continuum|`.
    pub deviation_order: f64,
}

/// `{{F_U,F_V},F_Z} + cyc.` at `W` on refined grids. For linear functionals
/// `{F_U, F_V} = F_{[U,V]}`, so the inner bracket is the grid matrix bracket.
pub fn grid_jacobi_study(seed: u64, terms: usize, n: &[usize]) -> JacobiStudy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fns: Vec<AnalyticMatrixFn> = ["w", "u", "v", "z"].iter().map(|t| bumped(&mut rng, t, 1, terms)).collect();
    let (mut signed, mut continuum) = (Vec::new(), Vec::new());
    for &n in n {
        let grid = Arc::new(refinement_grid(n));
        let wf = state(&grid, &fns[0]);
        let f: Vec<HermitianField> = fns[1..].iter().map(|a| a.sample(&grid)).collect();
        let nested = |a: usize, b: usize, c: usize| {
            let inner = matrix_bracket(&grid, &f[a], &f[b]).expect("same grid");
            poisson_bracket_scaled(&FunctionalHandle::LinearTest(inner), &FunctionalHandle::LinearTest(f[c].clone()), &wf)
                .expect("same grid")
                .value
        };
        signed.push(nested(0, 1, 2) + nested(1, 2, 0) + nested(2, 0, 1));
        let mut quad = 0.0;
        for p in 0..grid.len() {
            let pt = grid.point(p);
            if pt.radius <= R0 || pt.radius >= R1 {
                continue;
            }
            let z = [pt.x[0], pt.x[1], pt.k[0], pt.k[1]];
            let j = jacobiator_at(&fns[1], &fns[2], &fns[3], z);
            let w = wf.data.data()[p].stokes;
            quad += grid.weights()[p] * 0.5 * (0..4).map(|c| w[c] * j[c]).sum::<f64>();
        }
        continuum.push(quad);
    }
    let deviation: Vec<f64> = signed.iter().zip(&continuum).map(|(g, c)| g - c).collect();
    JacobiStudy {
        deviation_order: fit_order(n, &deviation),
        grid: RefinementStudy::from(n, signed.iter().map(|v| v.abs()).collect()),
        continuum,
    }
}

pub fn axiom_suite(kind: BracketKind, inputs: &SuiteInputs) -> Report {
    let rows = match kind {
        BracketKind::Matrix => matrix_suite(inputs),
        BracketKind::PoissonGrid => poisson_suite(inputs),
        BracketKind::MetricGrid => metric_suite(inputs),
    };
    Report { kind, rows }
}

fn worst(rs: impl IntoIterator<Item = Residual>) -> Residual {
    rs.into_iter().reduce(Residual::max).unwrap_or(Residual { value: 0.0, scale: 0.0 })
}

fn scalar_part(f: &AnalyticMatrixFn) -> AnalyticMatrixFn {
    let mut g = f.clone();
    for c in 1..4 {
        g.components[c].clear();
    }
    g.tag = format!("scalar({})", f.tag);
    g
}

fn matrix_suite(inp: &SuiteInputs) -> Vec<AxiomResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(inp.seed);
    let mut anti = Vec::new();
    let mut bilin = Vec::new();
    let mut jac = Vec::new();
    let mut jac_comm = Vec::new();
    let mut jac_scalar = Vec::new();
    let mut jac_equal = Vec::new();
    for _ in 0..inp.triples {
        let [u, v, w] = ["u", "v", "w"].map(|t| AnalyticMatrixFn::random(&mut rng, t, EXT, 2, inp.terms));
        let pts = random_points(&mut rng, inp.points, EXT, R0, R1);
        anti.push(antisymmetry_residual_matrix(&u, &v, &pts));
        let (a, b) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let uv = combine(a, &u, b, &v);
        bilin.push(worst(pts.iter().map(|&z| {
            let (l, ru, rv) = (matrix_bracket_at(&uv, &w, z), matrix_bracket_at(&u, &w, z), matrix_bracket_at(&v, &w, z));
            let d: [f64; 4] = std::array::from_fn(|c| l[c] - a * ru[c] - b * rv[c]);
            Residual {
                value: stokes_norm(&d),
                scale: a.abs() * stokes_norm(&ru) + b.abs() * stokes_norm(&rv),
            }
        })));
        jac.push(jacobi_residual_matrix(&u, &v, &w, &pts));
        let (su, sv, sw) = (scalar_part(&u), scalar_part(&v), scalar_part(&w));
        jac_comm.push(jacobi_residual_matrix(&su, &sv, &sw, &pts));
        jac_scalar.push(jacobi_residual_matrix(&u, &v, &sw, &pts));
        jac_equal.push(jacobi_residual_matrix(&u, &u, &w, &pts));
    }
    vec![
        AxiomResult::relative("antisymmetry", worst(anti), Threshold::AtMost(1e-14)),
        AxiomResult::relative("bilinearity", worst(bilin), Threshold::AtMost(1e-12)),
        AxiomResult::relative("jacobi", worst(jac), Threshold::AtMost(1e-10)),
        AxiomResult::relative("jacobi, commuting U,V,W ~ I", worst(jac_comm), Threshold::AtMost(1e-12)),
        AxiomResult::relative("jacobi, W ~ I", worst(jac_scalar), Threshold::AtMost(1e-10)),
        AxiomResult::relative("jacobi, U = V", worst(jac_equal), Threshold::AtMost(1e-14)),
    ]
}

fn scaled_residual(value: f64, scale: f64) -> Residual {
    Residual { value: value.abs(), scale }
}

fn poisson_suite(inp: &SuiteInputs) -> Vec<AxiomResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(inp.seed ^ 0x9e37);
    let cfg = GridConfig::new(vec![EXT[0], EXT[1]], vec![8, 8], GridConfig::uniform_shells(R0, R1, 5), 16);
    let grid: Grid = Arc::new(PhaseSpaceGrid::new(&cfg).expect("valid grid"));
    let fields: Vec<HermitianField> = ["u", "v", "z"].iter().map(|t| bumped(&mut rng, t, 2, inp.terms).sample(&grid)).collect();
    let w = state(&grid, &bumped(&mut rng, "w", 2, inp.terms));
    let omega = grid.sample(|p| (1.0 + 0.3 * (std::f64::consts::TAU * p.x[0]).cos()) * p.radius);
    let lin = |i: usize| FunctionalHandle::LinearTest(fields[i].clone());
    let funcs = vec![
        lin(0),
        lin(1),
        lin(2),
        FunctionalHandle::Entropy,
        FunctionalHandle::Hamiltonian(omega.clone()),
        FunctionalHandle::FreeEnergy(omega),
        FunctionalHandle::product(lin(0), lin(1)),
        FunctionalHandle::product(lin(2), FunctionalHandle::Entropy),
    ];
    let pb = |a: &FunctionalHandle, b: &FunctionalHandle| poisson_bracket_scaled(a, b, &w).expect("same grid");

    let mut anti = Vec::new();
    for a in &funcs {
        for b in &funcs {
            let (x, y) = (pb(a, b), pb(b, a));
            anti.push(scaled_residual(x.value + y.value, x.scale));
        }
    }

    let mut bilin = Vec::new();
    let (p, q) = (1.7, -0.6);
    let mix = FunctionalHandle::LinearTest(fields[0].scaled(p).axpy(q, &fields[1]));
    for c in &funcs {
        let (l, a, b) = (pb(&mix, c), pb(&lin(0), c), pb(&lin(1), c));
        bilin.push(scaled_residual(l.value - p * a.value - q * b.value, p.abs() * a.scale + q.abs() * b.scale));
    }

    let mut leib = Vec::new();
    for (i, a) in funcs.iter().enumerate() {
        for b in &funcs[i..] {
            let prod = FunctionalHandle::product(a.clone(), b.clone());
            let (va, vb) = (a.eval(&grid, &w.data).unwrap(), b.eval(&grid, &w.data).unwrap());
            for c in &funcs {
                let (l, bc, ac) = (pb(&prod, c), pb(b, c), pb(a, c));
                leib.push(scaled_residual(
                    l.value - va * bc.value - vb * ac.value,
                    l.scale + va.abs() * bc.scale + vb.abs() * ac.scale,
                ));
            }
        }
    }

    let label = inp.refinements.iter().map(|n| n.to_string()).collect::<Vec<_>>().join("->");
    let jac = grid_jacobi_study(inp.seed ^ 0x51, inp.terms, &inp.refinements);
    let cas = grid_casimir_study(inp.seed ^ 0x77, inp.terms, &inp.refinements);
    vec![
        AxiomResult::relative("antisymmetry", worst(anti), Threshold::AtMost(1e-12)),
        AxiomResult::relative("bilinearity", worst(bilin), Threshold::AtMost(1e-12)),
        AxiomResult::relative("leibniz", worst(leib), Threshold::AtMost(1e-12)),
        AxiomResult::new(format!("jacobi order ({label})"), jac.grid.order, 1.0, Threshold::Within(1.8, 2.2)),
        AxiomResult::new(
            format!("jacobi grid-to-continuum order ({label})"),
            jac.deviation_order,
            jac.continuum.last().map_or(1.0, |c| c.abs()),
            Threshold::AtLeast(1.5),
        ),
        AxiomResult::new(format!("casimir {{S,F_U}} order ({label})"), cas.order, 1.0, Threshold::Within(1.8, 2.2)),
    ]
}

fn random_kernel(rng: &mut ChaCha8Rng) -> KernelSpec {
    let sigma0 = rng.random_range(0.1..2.0);
    let profile = if rng.random::<bool>() {
        SigmaProfile::Constant(sigma0)
    } else {
        SigmaProfile::Cosine { sigma0, anisotropy: rng.random_range(-1.0..1.0) }
    };
    match rng.random_range(0..3) {
        0 => KernelSpec::Isotropic { sigma0 },
        1 => KernelSpec::AngleDependent { profile },
        _ => KernelSpec::Rotation { profile, gain: rng.random_range(-2.0..2.0) },
    }
}

fn metric_suite(inp: &SuiteInputs) -> Vec<AxiomResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(inp.seed ^ 0xabc);
    let cfg = GridConfig::new(vec![EXT[0], EXT[1]], vec![4, 4], GridConfig::uniform_shells(R0, R1, 3), 12);
    let grid: Grid = Arc::new(PhaseSpaceGrid::new(&cfg).expect("valid grid"));
    let omega = grid.sample(|p| (1.0 + 0.4 * (std::f64::consts::TAU * p.x[1]).sin()) * p.radius);
    let hd = HermitianField::scalar_identity(&omega);

    let (mut sym, mut bilin, mut cas_h, mut s_deriv) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    // Signed: positive values of (A,A) are violations.
    let mut worst_neg = Residual { value: f64::NEG_INFINITY, scale: 1.0 };
    for _ in 0..inp.metric_draws {
        let kernel = build_kernel(&random_kernel(&mut rng), &grid).expect("builtin kernels are admissible");
        let w = AnalyticMatrixFn::random(&mut rng, "w", EXT, 2, inp.terms).sample(&grid);
        let u = AnalyticMatrixFn::random(&mut rng, "u", EXT, 2, inp.terms).sample(&grid);
        let v = AnalyticMatrixFn::random(&mut rng, "v", EXT, 2, inp.terms).sample(&grid);
        let wf = CoherenceField::new(grid.clone(), w.clone(), 0.0).unwrap();
        let handle = match rng.random_range(0..4) {
            0 => FunctionalHandle::LinearTest(u.clone()),
            1 => FunctionalHandle::Entropy,
            2 => FunctionalHandle::FreeEnergy(omega.clone()),
            _ => FunctionalHandle::product(FunctionalHandle::LinearTest(u.clone()), FunctionalHandle::Entropy),
        };
        let da = handle.derivative(&grid, &w).unwrap();
        let form = |a: &HermitianField, b: &HermitianField| metric_form(&grid, &kernel, a, b).unwrap();

        let (ab, ba) = (form(&da, &v), form(&v, &da));
        sym.push(scaled_residual(ab.value - ba.value, ab.scale));

        let aa: Scaled = form(&da, &da);
        let r = Residual { value: aa.value, scale: aa.scale };
        if r.relative() > worst_neg.relative() {
            worst_neg = r;
        }

        let (p, q) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let l = form(&u.scaled(p).axpy(q, &v), &da);
        let (lu, lv) = (form(&u, &da), form(&v, &da));
        bilin.push(scaled_residual(l.value - p * lu.value - q * lv.value, p.abs() * lu.scale + q.abs() * lv.scale));

        let h = form(&hd, &da);
        cas_h.push(scaled_residual(h.value, h.scale));

        s_deriv.push(entropy_pairing(&grid, &kernel, &u, &wf));
    }
    vec![
        AxiomResult::relative("symmetry", worst(sym), Threshold::AtMost(1e-12)),
        AxiomResult::new("negativity max (A,A)/scale", worst_neg.relative(), worst_neg.scale, Threshold::AtMost(1e-12)),
        AxiomResult::relative("bilinearity", worst(bilin), Threshold::AtMost(1e-12)),
        AxiomResult::relative("casimir (H,F)", worst(cas_h), Threshold::AtMost(1e-12)),
        AxiomResult::relative("(F_U,S) = <U, S(W) - Sigma W>", worst(s_deriv), Threshold::AtMost(1e-12)),
    ]
}

/// `(F_U, S)` against the pairing of `U` with the collision operator.
fn entropy_pairing(
    grid: &PhaseSpaceGrid,
    kernel: &crate::scattering::ScatteringKernel,
    u: &HermitianField,
    w: &CoherenceField,
) -> Residual {
    let m = metric_form(grid, kernel, u, &w.data).unwrap();
    let c = collision(kernel, grid, &w.data).unwrap();
    let want = u.inner(grid, &c).unwrap();
    scaled_residual(m.value - want, m.scale)
}
