//! Level-set profiles of a solution (interior energy `D`, trace mass `H`,
//! interior mass `E`, normal flux `T`) and the decay checks built on them.

use std::fmt::Write as _;

use crate::coefficients::{Coefficients, LocalCoefficients};
use crate::error::{Error, Result};
use crate::fem::{dense_sym_eig, BoundaryDatum, DenseMatrix, DirichletSolver, ScalarFieldP1, SystemMatrices};
use crate::geometry::{clip_above, levelset_integral, region_integral_with, Mesh};
use crate::mat2::dot;
use crate::spectral::FrequencyReport;
use crate::Point;

/// `e^{-s}` on `[0, 1]`, `1/(e s)` beyond.
pub fn h_fun(s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::InvalidInput(format!("h_fun needs s >= 0, got {s}")));
    }
    Ok(if s <= 1.0 { (-s).exp() } else { 1.0 / (std::f64::consts::E * s) })
}

fn h_unchecked(s: f64) -> f64 {
    h_fun(s.max(0.0)).expect("non-negative argument")
}

/// `count` equally spaced values from `start` to `stop`.
pub fn uniform_grid(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..count).map(|i| start + (stop - start) * i as f64 / (count - 1) as f64).collect(),
    }
}

/// Raw level-set quantities at one depth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfileRow {
    pub d: f64,
    /// `D(d)`: weighted Dirichlet energy over `{phi > d}`.
    pub dirichlet: f64,
    /// `H(d)`: weighted `u^2` over `{phi = d}` in the metric boundary measure.
    pub trace: f64,
    /// `E(d)`: weighted `u^2` over `{phi > d}` in the metric volume.
    pub mass: f64,
    /// `T(d)`: weighted squared conormal derivative over `{phi = d}`.
    pub flux: f64,
}

impl ProfileRow {
    /// `N = D / H`.
    pub fn n(&self) -> f64 {
        self.dirichlet / self.trace
    }

    /// `F = T / D`.
    pub fn f(&self) -> f64 {
        self.flux / self.dirichlet
    }

    /// `K = H / E`.
    pub fn k(&self) -> f64 {
        self.trace / self.mass
    }

    /// `K1 = H / sqrt(E)` after rescaling `u` so that `E(0) = 1`.
    pub fn k1(&self, e0: f64) -> f64 {
        self.trace / (self.mass.sqrt() * e0.sqrt())
    }
}

/// Profile of one solution over an ascending grid of depths.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayProfile {
    rows: Vec<ProfileRow>,
    e0: f64,
}

pub const CSV_HEADER: &str = "d,D,H,E,T,N,F,K,K1";

impl DecayProfile {
    pub fn from_rows(rows: Vec<ProfileRow>, e0: f64) -> Self {
        DecayProfile { rows, e0 }
    }

    pub fn rows(&self) -> &[ProfileRow] {
        &self.rows
    }

    /// `E(0)`, the normalization used for `K1`.
    pub fn e0(&self) -> f64 {
        self.e0
    }

    pub fn d_grid(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.d).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.d,
                r.dirichlet,
                r.trace,
                r.mass,
                r.flux,
                r.n(),
                r.f(),
                r.k(),
                r.k1(self.e0)
            );
        }
        out
    }
}

fn require_scalar(coefficients: &Coefficients) -> Result<()> {
    if coefficients.has_scalar_conductivity() {
        Ok(())
    } else {
        Err(Error::InvalidInput("profiles need a scalar conductivity; reduce the tensor first".into()))
    }
}

fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Linear least-squares fit of the P1 gradients over a vertex patch,
/// sampled at triangle centroids: value and slopes about `origin`, or `None`
/// when the centroids are (nearly) collinear.
fn patch_fit(mesh: &Mesh, grads: &[[f64; 2]], patch: &[usize], origin: Point) -> Option<[[f64; 3]; 2]> {
    let mut m = [[0.0; 3]; 3];
    let mut rhs = [[0.0; 3]; 2];
    for &t in patch {
        let c = mesh.centroid(t);
        let row = [1.0, c[0] - origin[0], c[1] - origin[1]];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += row[i] * row[j];
            }
            rhs[0][i] += row[i] * grads[t][0];
            rhs[1][i] += row[i] * grads[t][1];
        }
    }
    let det = det3(&m);
    if !(det.abs() > 1e-10 * m[0][0] * m[1][1] * m[2][2]) {
        return None;
    }
    // Cramer's rule
    let solve = |r: [f64; 3]| {
        let mut x = [0.0; 3];
        for k in 0..3 {
            let mut mk = m;
            for i in 0..3 {
                mk[i][k] = r[i];
            }
            x[k] = det3(&mk) / det;
        }
        x
    };
    Some([solve(rhs[0]), solve(rhs[1])])
}

/// Recovered nodal gradient, as two component fields. Interior vertices take
/// the value of their patch fit; boundary vertices average the fits of their
/// interior neighbours evaluated at the vertex. Area-weighted averaging is the
/// fallback for degenerate patches.
fn recovered_gradient(mesh: &Mesh, u: &[f64]) -> [Vec<f64>; 2] {
    let n = mesh.vertex_count();
    let grads: Vec<[f64; 2]> = (0..mesh.triangles().len()).map(|t| mesh.gradient(t, u)).collect();
    let mut patches: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut neighbours: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for (k, &v) in tri.iter().enumerate() {
            patches[v].push(t);
            for &w in &[tri[(k + 1) % 3], tri[(k + 2) % 3]] {
                if !neighbours[v].contains(&w) {
                    neighbours[v].push(w);
                }
            }
        }
    }
    let mut on_boundary = vec![false; n];
    for &v in mesh.boundary_cycle() {
        on_boundary[v] = true;
    }
    let average = |v: usize| {
        let mut acc = [0.0; 2];
        let mut weight = 0.0;
        for &t in &patches[v] {
            let a = mesh.triangle_area(t);
            acc[0] += a * grads[t][0];
            acc[1] += a * grads[t][1];
            weight += a;
        }
        if weight > 0.0 {
            [acc[0] / weight, acc[1] / weight]
        } else {
            acc
        }
    };
    let points = mesh.vertices();
    let fits: Vec<Option<[[f64; 3]; 2]>> = (0..n)
        .map(|v| if on_boundary[v] { None } else { patch_fit(mesh, &grads, &patches[v], points[v]) })
        .collect();
    let mut g = [vec![0.0; n], vec![0.0; n]];
    for v in 0..n {
        let value = if !on_boundary[v] {
            fits[v].map(|f| [f[0][0], f[1][0]])
        } else {
            let mut acc = [0.0; 2];
            let mut count = 0;
            for &w in &neighbours[v] {
                if let Some(f) = fits[w] {
                    let dx = points[v][0] - points[w][0];
                    let dy = points[v][1] - points[w][1];
                    acc[0] += f[0][0] + f[0][1] * dx + f[0][2] * dy;
                    acc[1] += f[1][0] + f[1][1] * dx + f[1][2] * dy;
                    count += 1;
                }
            }
            (count > 0).then(|| [acc[0] / count as f64, acc[1] / count as f64])
        };
        let value = value.unwrap_or_else(|| average(v));
        g[0][v] = value[0];
        g[1][v] = value[1];
    }
    g
}

/// Precomputed per-triangle data for repeated slicing of one solution.
/// D and T use the recovered gradient: the raw P1 gradient is constant
/// across each ring strip and makes both columns step in d.
struct Slicer<'a> {
    mesh: &'a Mesh,
    local: Vec<LocalCoefficients>,
    grad: [Vec<f64>; 2],
    u: &'a [f64],
}

impl<'a> Slicer<'a> {
    fn new(mesh: &'a Mesh, coefficients: &Coefficients, u: &'a ScalarFieldP1) -> Result<Self> {
        require_scalar(coefficients)?;
        if u.values().len() != mesh.vertex_count() {
            return Err(Error::InvalidInput("solution does not match mesh".into()));
        }
        let local = coefficients.sample_centroids(mesh)?;
        let grad = recovered_gradient(mesh, u.values());
        Ok(Slicer { mesh, local, grad, u: u.values() })
    }

    fn vertex_values(&self, t: usize) -> [f64; 3] {
        at_vertices(self.mesh, self.u, t)
    }

    fn row(&self, d: f64) -> ProfileRow {
        let dirichlet = region_integral_with(self.mesh, d, |poly| {
            let t = poly.triangle;
            let m = self.local[t].form_matrix();
            let gx = at_vertices(self.mesh, &self.grad[0], t);
            let gy = at_vertices(self.mesh, &self.grad[1], t);
            m.xx * poly.integrate_product(gx, gx)
                + 2.0 * m.xy * poly.integrate_product(gx, gy)
                + m.yy * poly.integrate_product(gy, gy)
        });
        let mass = self.mass(d);
        let trace = levelset_integral(self.mesh, d, |s| {
            let c = &self.local[s.triangle];
            let u = s.interpolate(self.vertex_values(s.triangle));
            let (_, w) = c.boundary_weight(s.normal);
            c.gamma() * u * u * w
        });
        let flux = levelset_integral(self.mesh, d, |s| {
            let c = &self.local[s.triangle];
            let (_, w) = c.boundary_weight(s.normal);
            let g = [
                s.interpolate(at_vertices(self.mesh, &self.grad[0], s.triangle)),
                s.interpolate(at_vertices(self.mesh, &self.grad[1], s.triangle)),
            ];
            let un = c.normal_derivative(g, s.normal);
            c.gamma() * un * un * w
        });
        ProfileRow { d, dirichlet, trace, mass, flux }
    }

    fn mass(&self, d: f64) -> f64 {
        region_integral_with(self.mesh, d, |poly| {
            let t = poly.triangle;
            let v = self.vertex_values(t);
            self.local[t].gamma() * self.local[t].sqrt_g * poly.integrate_product(v, v)
        })
    }
}

fn at_vertices(mesh: &Mesh, f: &[f64], t: usize) -> [f64; 3] {
    let tri = mesh.triangles()[t];
    [f[tri[0]], f[tri[1]], f[tri[2]]]
}

/// Profile columns without the positivity check.
pub fn profile_rows(mesh: &Mesh, coefficients: &Coefficients, u: &ScalarFieldP1, d_grid: &[f64]) -> Result<DecayProfile> {
    if d_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("depth grid must be strictly ascending".into()));
    }
    if d_grid.first().is_some_and(|&d| d < 0.0) {
        return Err(Error::InvalidInput("depths must be non-negative".into()));
    }
    let slicer = Slicer::new(mesh, coefficients, u)?;
    let rows = d_grid.iter().map(|&d| slicer.row(d)).collect();
    Ok(DecayProfile { rows, e0: slicer.mass(0.0) })
}

/// `D, H, E, T` on `d_grid` (ascending, within `[0, 0.9 d0]`), failing if any
/// column is not strictly positive.
pub fn decay_profile(
    mesh: &Mesh,
    coefficients: &Coefficients,
    u: &ScalarFieldP1,
    d_grid: &[f64],
    d0: f64,
) -> Result<DecayProfile> {
    if d_grid.last().is_some_and(|&d| d > 0.9 * d0 * (1.0 + 1e-12)) {
        return Err(Error::InvalidInput(format!("depths must not exceed 0.9 d0 = {}", 0.9 * d0)));
    }
    let profile = profile_rows(mesh, coefficients, u, d_grid)?;
    // Round-off floor: a numerically constant solution has D ~ 1e-20, not 0.
    let u2 = u.values().iter().fold(0.0f64, |m, v| m.max(v * v));
    let volume_floor = 1e-12 * u2 * mesh.total_area();
    let curve_floor = 1e-12 * u2 * mesh.boundary_length();
    for r in &profile.rows {
        for (column, value, floor) in [
            ("D", r.dirichlet, volume_floor),
            ("H", r.trace, curve_floor),
            ("E", r.mass, volume_floor),
            ("T", r.flux, curve_floor),
        ] {
            if !(value > floor) {
                return Err(Error::NonPositiveProfile { column, d: r.d, value });
            }
        }
    }
    Ok(profile)
}

/// Relative residuals of the derivative identities at one interior grid point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeResidual {
    pub d: f64,
    /// `|D' + 2T| / D`.
    pub a0: f64,
    /// `|H' + 2D| / H`.
    pub a1: f64,
    /// `|E' + H| / H`.
    pub e: f64,
}

/// Central-difference residuals on a uniform grid (endpoints dropped).
pub fn derivative_residuals(profile: &DecayProfile) -> Result<Vec<DerivativeResidual>> {
    let rows = profile.rows();
    if rows.len() < 3 {
        return Err(Error::InvalidInput("need at least three grid points".into()));
    }
    let step = rows[1].d - rows[0].d;
    if rows.windows(2).any(|w| ((w[1].d - w[0].d) - step).abs() > 1e-9 * step.max(1.0)) {
        return Err(Error::InvalidInput("residuals need a uniform grid".into()));
    }
    Ok(rows
        .windows(3)
        .map(|w| {
            let (prev, mid, next) = (&w[0], &w[1], &w[2]);
            let span = next.d - prev.d;
            let dp = (next.dirichlet - prev.dirichlet) / span;
            let hp = (next.trace - prev.trace) / span;
            let ep = (next.mass - prev.mass) / span;
            DerivativeResidual {
                d: mid.d,
                a0: (dp + 2.0 * mid.flux).abs() / mid.dirichlet,
                a1: (hp + 2.0 * mid.dirichlet).abs() / mid.trace,
                e: (ep + mid.trace).abs() / mid.trace,
            }
        })
        .collect())
}

/// Tolerance on the bound quotients with the reference constants.
pub const RATIO_TOLERANCE: f64 = 1.05;
/// Ceiling on the higher-order decay quotient.
pub const HIGHER_ORDER_CEILING: f64 = 10.0;

const FIT_C_MAX: f64 = 5.0;
const FIT_C_MIN: f64 = 0.01;
const FIT_SMALL_C_MIN: f64 = 0.05;
const FIT_SMALL_C_MAX: f64 = 2.0;
const FIT_POINTS: usize = 50;

fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

/// Candidate growth constants `C`: zero, then log-spaced up to the box edge.
fn growth_candidates() -> Vec<f64> {
    let mut c = vec![0.0];
    c.extend(log_space(FIT_C_MIN, FIT_C_MAX, FIT_POINTS - 1));
    c
}

/// One sample of a bound `value(d) <= e^{C d} value(0) h(c d freq)`.
#[derive(Clone, Copy, Debug)]
struct BoundSample {
    d: f64,
    /// `value(d) / value(0)`.
    relative: f64,
    frequency: f64,
}

fn quotient(samples: &[BoundSample], big_c: f64, small_c: f64) -> f64 {
    samples
        .iter()
        .map(|s| s.relative / ((big_c * s.d).exp() * h_unchecked(small_c * s.d * s.frequency)))
        .fold(0.0, f64::max)
}

/// Smallest `C`, then largest `c`, in the search box making every quotient `<= 1`.
fn fit_bound(samples: &[BoundSample]) -> Option<(f64, f64)> {
    let smalls = log_space(FIT_SMALL_C_MIN, FIT_SMALL_C_MAX, FIT_POINTS);
    for big_c in growth_candidates() {
        if let Some(&c) = smalls.iter().rev().find(|&&c| quotient(samples, big_c, c) <= 1.0) {
            return Some((big_c, c));
        }
    }
    None
}

/// Per-datum outcome of the decay checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatumVerification {
    pub phi: f64,
    pub phi1: f64,
    pub max_ratio_d: f64,
    pub max_ratio_h: f64,
    pub max_ratio_cor: f64,
    pub pass_d: bool,
    pub pass_h: bool,
    pub pass_cor: bool,
    /// Smallest `C >= 0` with `e^{-C d} N(d)` non-increasing on the grid.
    pub monotone_c: f64,
}

/// Sweep-level outcome: per-datum rows plus constants fitted over the sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub data: Vec<DatumVerification>,
    /// `(C2, c2)` for the energy bound, if the search box admits one.
    pub fitted_d: Option<(f64, f64)>,
    /// `(C3, c3)` for the trace bound.
    pub fitted_h: Option<(f64, f64)>,
    /// `C4`: the largest higher-order decay quotient.
    pub fitted_c4: f64,
    pub max_ratio_d: f64,
    pub max_ratio_h: f64,
    pub max_ratio_cor: f64,
    pub max_monotone_c: f64,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.data.iter().all(|r| r.pass_d && r.pass_h && r.pass_cor)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("phi,phi1,max_ratio_D,max_ratio_H,max_ratio_cor,pass_D,pass_H,pass_cor\n");
        for r in &self.data {
            let _ = writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{},{},{}",
                r.phi, r.phi1, r.max_ratio_d, r.max_ratio_h, r.max_ratio_cor, r.pass_d, r.pass_h, r.pass_cor
            );
        }
        out
    }
}

struct DatumSamples {
    energy: Vec<BoundSample>,
    trace: Vec<BoundSample>,
    higher_order: Vec<f64>,
}

fn samples_for(profile: &DecayProfile, freq: &FrequencyReport, d0: f64) -> Result<DatumSamples> {
    let rows = profile.rows();
    let first = rows.first().ok_or_else(|| Error::InvalidInput("empty profile".into()))?;
    if first.d != 0.0 {
        return Err(Error::InvalidInput("profiles must start at d = 0".into()));
    }
    let (d_0, h_0) = (first.dirichlet, first.trace);
    let mut energy = Vec::new();
    let mut trace = Vec::new();
    let mut higher_order = Vec::new();
    for r in rows.iter().skip(1).filter(|r| r.d > 0.0 && r.d <= 0.9 * d0 * (1.0 + 1e-12)) {
        energy.push(BoundSample { d: r.d, relative: r.dirichlet / d_0, frequency: freq.phi });
        if r.d <= 0.45 * d0 * (1.0 + 1e-12) {
            trace.push(BoundSample { d: r.d, relative: r.trace / h_0, frequency: freq.phi1 });
        }
        higher_order.push(r.d * r.dirichlet * freq.phi * freq.phi1 / (d_0 * h_unchecked(r.d * freq.phi1 / 2.0)));
    }
    Ok(DatumSamples { energy, trace, higher_order })
}

/// Growth rate making `e^{-C d} N(d)` non-increasing between grid points.
pub fn monotone_growth(profile: &DecayProfile) -> f64 {
    profile
        .rows()
        .windows(2)
        .map(|w| (w[1].n().ln() - w[0].n().ln()) / (w[1].d - w[0].d))
        .fold(0.0, f64::max)
}

/// Checks the decay bounds with the reference constants `C = 0`, `c = 1`
/// and fits constants inside the search box.
pub fn verify_decay(profiles: &[(DecayProfile, FrequencyReport)], d0: f64) -> Result<VerificationReport> {
    let mut data = Vec::with_capacity(profiles.len());
    let mut all_energy = Vec::new();
    let mut all_trace = Vec::new();
    for (profile, freq) in profiles {
        let s = samples_for(profile, freq, d0)?;
        let max_ratio_d = quotient(&s.energy, 0.0, 1.0);
        let max_ratio_h = quotient(&s.trace, 0.0, 1.0);
        let max_ratio_cor = s.higher_order.iter().copied().fold(0.0, f64::max);
        data.push(DatumVerification {
            phi: freq.phi,
            phi1: freq.phi1,
            max_ratio_d,
            max_ratio_h,
            max_ratio_cor,
            pass_d: max_ratio_d <= RATIO_TOLERANCE || fit_bound(&s.energy).is_some(),
            pass_h: max_ratio_h <= RATIO_TOLERANCE || fit_bound(&s.trace).is_some(),
            pass_cor: max_ratio_cor <= HIGHER_ORDER_CEILING,
            monotone_c: monotone_growth(profile),
        });
        all_energy.extend(s.energy);
        all_trace.extend(s.trace);
    }
    let max = |f: fn(&DatumVerification) -> f64| data.iter().map(f).fold(0.0, f64::max);
    Ok(VerificationReport {
        fitted_d: fit_bound(&all_energy),
        fitted_h: fit_bound(&all_trace),
        fitted_c4: max(|r| r.max_ratio_cor),
        max_ratio_d: max(|r| r.max_ratio_d),
        max_ratio_h: max(|r| r.max_ratio_h),
        max_ratio_cor: max(|r| r.max_ratio_cor),
        max_monotone_c: max(|r| r.monotone_c),
        data,
    })
}

/// Solutions for the Fourier modes of degree `n+1..=n_max` (cosine and sine),
/// made `L2(d sigma)`-orthogonal to the trigonometric polynomials of degree
/// at most `n`, ready for penetration quotients at several depths.
pub struct PenetrationSpace<'a> {
    mesh: &'a Mesh,
    local: Vec<LocalCoefficients>,
    /// Per solution, per triangle gradient.
    grads: Vec<Vec<[f64; 2]>>,
    q: DenseMatrix,
}

impl<'a> PenetrationSpace<'a> {
    pub fn new(
        mesh: &'a Mesh,
        coefficients: &Coefficients,
        matrices: &SystemMatrices,
        solver: &DirichletSolver,
        n: usize,
        n_max: usize,
    ) -> Result<Self> {
        if n_max <= n {
            return Err(Error::InvalidInput(format!("n_max = {n_max} must exceed n = {n}")));
        }
        let k = mesh.boundary_cycle().len();
        if k < 8 * n_max {
            return Err(Error::InvalidInput(format!(
                "{k} boundary vertices cannot resolve degree {n_max} (need {})",
                8 * n_max
            )));
        }
        let cycle = mesh.boundary_cycle();
        let mass = matrices.b_euclid.submatrix(cycle, cycle);
        let inner = |a: &[f64], b: &[f64]| dot2(a, &mass.mul_vec(b));

        let mut excluded: Vec<Vec<f64>> = Vec::new();
        let push_orthonormal = |set: &mut Vec<Vec<f64>>, mut v: Vec<f64>| -> Result<()> {
            for _ in 0..2 {
                for e in set.iter() {
                    let c = inner(&v, e);
                    v.iter_mut().zip(e).for_each(|(x, y)| *x -= c * y);
                }
            }
            let norm = inner(&v, &v).sqrt();
            if !(norm > 1e-10) {
                return Err(Error::InvalidInput("trigonometric data are linearly dependent on the mesh".into()));
            }
            v.iter_mut().for_each(|x| *x /= norm);
            set.push(v);
            Ok(())
        };
        push_orthonormal(&mut excluded, vec![1.0; k])?;
        for j in 1..=n {
            push_orthonormal(&mut excluded, BoundaryDatum::fourier(mesh, j, 0.0).values().to_vec())?;
            push_orthonormal(&mut excluded, BoundaryDatum::fourier(mesh, j, std::f64::consts::FRAC_PI_2).values().to_vec())?;
        }
        let mut data: Vec<Vec<f64>> = Vec::new();
        for j in n + 1..=n_max {
            for phase in [0.0, std::f64::consts::FRAC_PI_2] {
                let mut v = BoundaryDatum::fourier(mesh, j, phase).values().to_vec();
                for _ in 0..2 {
                    for e in &excluded {
                        let c = inner(&v, e);
                        v.iter_mut().zip(e).for_each(|(x, y)| *x -= c * y);
                    }
                }
                data.push(v);
            }
        }

        let local = coefficients.sample_centroids(mesh)?;
        let mut grads = Vec::with_capacity(data.len());
        let mut solutions = Vec::with_capacity(data.len());
        for f in &data {
            let u = solver.extend(f)?;
            grads.push((0..mesh.triangles().len()).map(|t| mesh.gradient(t, &u)).collect());
            solutions.push(u);
        }
        let m = data.len();
        let ku: Vec<Vec<f64>> = solutions.iter().map(|u| matrices.k.mul_vec(u)).collect();
        let q = DenseMatrix::from_fn(m, |i, j| dot2(&solutions[i], &ku[j])).symmetrized();
        Ok(PenetrationSpace { mesh, local, grads, q })
    }

    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    /// Interior energy Gram matrix over `{phi > d}`.
    pub fn interior_gram(&self, d: f64) -> DenseMatrix {
        let m = self.dim();
        let mut p = DenseMatrix::zeros(m);
        for t in 0..self.mesh.triangles().len() {
            let Some(poly) = clip_above(self.mesh, t, d) else { continue };
            let area = poly.area();
            let a = self.local[t].form_matrix();
            let ag: Vec<[f64; 2]> = self.grads.iter().map(|g| a.apply(g[t])).collect();
            for i in 0..m {
                for j in 0..=i {
                    p[(i, j)] += area * dot(self.grads[i][t], ag[j]);
                }
            }
        }
        for i in 0..m {
            for j in 0..i {
                p[(j, i)] = p[(i, j)];
            }
        }
        p
    }

    /// Largest fraction of energy a datum in the space keeps inside `{phi > d}`.
    pub fn xi(&self, d: f64) -> Result<f64> {
        let p = self.interior_gram(d);
        let eig = dense_sym_eig(&p, &self.q)?;
        Ok(eig.values.last().copied().unwrap_or(0.0))
    }
}

fn dot2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Penetration quotient `Xi(V_n, d)` with search space truncated at degree `n_max`.
pub fn penetration(
    mesh: &Mesh,
    coefficients: &Coefficients,
    matrices: &SystemMatrices,
    n: usize,
    d: f64,
    n_max: usize,
) -> Result<f64> {
    let solver = DirichletSolver::new(matrices, mesh)?.factorized()?;
    PenetrationSpace::new(mesh, coefficients, matrices, &solver, n, n_max)?.xi(d)
}
