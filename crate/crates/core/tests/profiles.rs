use decaylab::coefficients::{aks_modify, reduce_to_scalar, CoefficientField, Coefficients};
use decaylab::decay::{decay_profile, derivative_residuals, penetration, uniform_grid, verify_decay, DecayProfile};
use decaylab::fem::{assemble, solve_dirichlet, BoundaryDatum, DirichletSolver};
use decaylab::geometry::{build_mesh, Domain, Mesh};
use decaylab::oracle::disk_oracle;
use decaylab::spectral::{boundary_mass, default_mode_count, dtn_from_parts, frequency_report, steklov_basis};
use proptest::prelude::*;

fn disk(h: f64) -> (Domain, Mesh) {
    let domain = Domain::disk(1.0).unwrap();
    let mesh = build_mesh(&domain, h).unwrap();
    (domain, mesh)
}

fn mode_profile(domain: &Domain, mesh: &Mesh, coefficients: &Coefficients, n: usize, grid: &[f64]) -> DecayProfile {
    let m = assemble(mesh, coefficients).unwrap();
    let u = solve_dirichlet(&m, mesh, &BoundaryDatum::fourier(mesh, n, 0.0)).unwrap();
    decay_profile(mesh, coefficients, &u, grid, domain.d0()).unwrap()
}

#[test]
fn disk_modes_follow_closed_forms() {
    let (domain, mesh) = disk(0.02);
    let c = Coefficients::euclidean();
    let grid = uniform_grid(0.0, 0.6, 13);
    for n in 1..=4 {
        let p = mode_profile(&domain, &mesh, &c, n, &grid);
        for r in p.rows() {
            assert!((r.n() * (1.0 - r.d) - n as f64).abs() / n as f64 <= 0.02, "n={n} d={}", r.d);
            let exact = disk_oracle(n, r.d).unwrap();
            assert!((r.mass - exact.mass).abs() / exact.mass <= 0.03);
            assert!((r.flux - exact.flux).abs() / exact.flux <= 0.03);
            assert!(r.k1(p.e0()) <= r.k() * (1.0 + 1e-12));
        }
        // exact K(0) = 2n + 2 >= Phi1 = n
        assert!(p.rows()[0].k() >= n as f64);
    }
}

#[test]
fn n_at_boundary_is_the_frequency() {
    let (domain, mesh) = disk(0.02);
    let c = Coefficients::euclidean();
    let m = assemble(&mesh, &c).unwrap();
    let solver = DirichletSolver::new(&m, &mesh).unwrap().factorized().unwrap();
    let s0 = dtn_from_parts(&m, &solver).unwrap();
    let b = boundary_mass(&m, &mesh);
    let basis = steklov_basis(&s0, &b, default_mode_count(s0.dim())).unwrap();
    let grid = [0.0, 0.2, 0.4];
    for (n, phase) in [(2, 0.3), (5, 1.1)] {
        let f = BoundaryDatum::fourier(&mesh, n, phase);
        let u = solver.solve(&mesh, &f).unwrap();
        let p = decay_profile(&mesh, &c, &u, &grid, domain.d0()).unwrap();
        let freq = frequency_report(&s0, &b, &basis, f.values()).unwrap();
        assert!((p.rows()[0].n() - freq.phi).abs() / freq.phi <= 0.02);
    }
}

#[test]
fn catalog_profiles_are_monotone() {
    let domain = Domain::ellipse(1.5, 1.0).unwrap();
    let mesh = build_mesh(&domain, 0.04).unwrap();
    let a = CoefficientField::rotated_anisotropic(2.0, 0.5, 30.0).unwrap();
    let g = aks_modify(&domain, &CoefficientField::radial_bump(0.5, [0.2, 0.1], 0.4).unwrap()).unwrap();
    let problem = Coefficients::new(a, g);
    let (gamma, metric) = reduce_to_scalar(&domain, &problem.conductivity, &problem.metric).unwrap();
    let reduced = Coefficients::new(gamma, metric);
    let m = assemble(&mesh, &problem).unwrap();
    let e = assemble(&mesh, &Coefficients::euclidean()).unwrap();
    let solver = DirichletSolver::new(&e, &mesh).unwrap().factorized().unwrap();
    let s0 = dtn_from_parts(&e, &solver).unwrap();
    let b = boundary_mass(&e, &mesh);
    let basis = steklov_basis(&s0, &b, default_mode_count(s0.dim())).unwrap();
    let grid = uniform_grid(0.0, 0.9 * domain.d0(), 12);
    for n in 1..=3 {
        let f = BoundaryDatum::fourier(&mesh, n, 0.0);
        let u = solve_dirichlet(&m, &mesh, &f).unwrap();
        let p = decay_profile(&mesh, &reduced, &u, &grid, domain.d0()).unwrap();
        for w in p.rows().windows(2) {
            assert!(w[1].dirichlet <= w[0].dirichlet && w[1].mass <= w[0].mass);
        }
        let phi1 = frequency_report(&s0, &b, &basis, f.values()).unwrap().phi1;
        assert!(p.rows()[0].k() >= 0.5 * phi1, "K(0) = {} Phi1 = {phi1}", p.rows()[0].k());
    }
}

#[test]
fn tensor_conductivity_must_be_reduced_first() {
    let (domain, mesh) = disk(0.1);
    let c = Coefficients::new(CoefficientField::rotated_anisotropic(2.0, 0.5, 30.0).unwrap(), CoefficientField::identity());
    let m = assemble(&mesh, &c).unwrap();
    let u = solve_dirichlet(&m, &mesh, &BoundaryDatum::fourier(&mesh, 1, 0.0)).unwrap();
    assert!(decay_profile(&mesh, &c, &u, &[0.0, 0.2], domain.d0()).is_err());
}

#[test]
fn disk_penetration_is_the_first_excluded_mode() {
    let (_, mesh) = disk(0.02);
    let c = Coefficients::euclidean();
    let m = assemble(&mesh, &c).unwrap();
    for (n, d) in [(2, 0.1), (3, 0.3)] {
        let xi = penetration(&mesh, &c, &m, n, d, n + 10).unwrap();
        let exact = (1.0f64 - d).powi(2 * (n as i32 + 1));
        assert!((xi - exact).abs() / exact <= 0.05, "n={n} d={d} xi={xi} exact={exact}");
        assert!(xi <= 1.0);
    }
}

#[test]
fn penetration_needs_resolved_modes() {
    let (_, mesh) = disk(0.2);
    let c = Coefficients::euclidean();
    let m = assemble(&mesh, &c).unwrap();
    assert!(penetration(&mesh, &c, &m, 2, 0.1, 40).is_err());
    assert!(penetration(&mesh, &c, &m, 4, 0.1, 4).is_err());
}

#[test]
fn derivative_identities_on_a_coarse_disk() {
    let (domain, mesh) = disk(0.02);
    let c = Coefficients::euclidean();
    let p = mode_profile(&domain, &mesh, &c, 2, &uniform_grid(0.05, 0.55, 51));
    for r in derivative_residuals(&p).unwrap().iter().filter(|r| r.d >= 0.1 && r.d <= 0.5) {
        assert!(r.e <= 2e-3, "d={} e={}", r.d, r.e);
        assert!(r.a0 <= 0.05, "d={} a0={}", r.d, r.a0);
        assert!((r.a1 * (1.0 - r.d) - 1.0).abs() <= 0.15, "d={} a1={}", r.d, r.a1);
    }
}

#[test]
fn disk_sweep_verifies_with_unit_constants() {
    let (domain, mesh) = disk(0.03);
    let c = Coefficients::euclidean();
    let m = assemble(&mesh, &c).unwrap();
    let solver = DirichletSolver::new(&m, &mesh).unwrap().factorized().unwrap();
    let s0 = dtn_from_parts(&m, &solver).unwrap();
    let b = boundary_mass(&m, &mesh);
    let basis = steklov_basis(&s0, &b, default_mode_count(s0.dim())).unwrap();
    let grid = uniform_grid(0.0, 0.6, 16);
    let pairs: Vec<_> = (1..=5)
        .map(|n| {
            let f = BoundaryDatum::fourier(&mesh, n, 0.0);
            let u = solver.solve(&mesh, &f).unwrap();
            (
                decay_profile(&mesh, &c, &u, &grid, domain.d0()).unwrap(),
                frequency_report(&s0, &b, &basis, f.values()).unwrap(),
            )
        })
        .collect();
    let report = verify_decay(&pairs, domain.d0()).unwrap();
    assert!(report.passed());
    assert!(report.max_ratio_d <= 1.05 && report.max_ratio_h <= 1.05);
    assert!(report.max_monotone_c <= 3.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn mixed_data_keep_profile_invariants(
        coeffs in proptest::collection::vec(-1.0f64..1.0, 6),
        phase in 0.0f64..6.28,
    ) {
        prop_assume!(coeffs.iter().map(|c| c.abs()).sum::<f64>() > 0.2);
        let (domain, mesh) = disk(0.06);
        let c = Coefficients::euclidean();
        let m = assemble(&mesh, &c).unwrap();
        let mut values = vec![0.0; mesh.boundary_cycle().len()];
        for (k, a) in coeffs.iter().enumerate() {
            let mode = BoundaryDatum::fourier(&mesh, k + 1, phase * k as f64);
            values.iter_mut().zip(mode.values()).for_each(|(v, x)| *v += a * x);
        }
        let f = BoundaryDatum::from_values(&mesh, values).unwrap();
        let u = solve_dirichlet(&m, &mesh, &f).unwrap();
        let p = decay_profile(&mesh, &c, &u, &uniform_grid(0.0, 0.6, 13), domain.d0()).unwrap();
        for w in p.rows().windows(2) {
            prop_assert!(w[1].dirichlet <= w[0].dirichlet);
            prop_assert!(w[1].mass <= w[0].mass);
        }
        for r in p.rows() {
            // Cauchy-Schwarz, up to discretization error
            prop_assert!(r.f() >= r.n() * 0.97, "d={} F={} N={}", r.d, r.f(), r.n());
            prop_assert!(r.k1(p.e0()) <= r.k() * (1.0 + 1e-12));
        }
    }
}
