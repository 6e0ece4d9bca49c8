//! Closed forms for `u = r^n cos(n theta)` on the unit disk.

use std::f64::consts::PI;

use crate::decay::{DecayProfile, ProfileRow};
use crate::error::{Error, Result};

/// All closed-form quantities of mode `n` at depth `d`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiskModeRecord {
    pub n: usize,
    pub d: f64,
    pub dirichlet: f64,
    pub trace: f64,
    pub mass: f64,
    pub flux: f64,
    pub frequency_fn: f64,
    pub flux_ratio: f64,
    pub phi: f64,
    pub phi1: f64,
    pub steklov: f64,
}

impl DiskModeRecord {
    pub fn row(&self) -> ProfileRow {
        ProfileRow { d: self.d, dirichlet: self.dirichlet, trace: self.trace, mass: self.mass, flux: self.flux }
    }
}

/// Closed forms for mode `n >= 1` at `0 <= d < 1`.
pub fn disk_oracle(n: usize, d: f64) -> Result<DiskModeRecord> {
    if n == 0 {
        return Err(Error::InvalidInput("the constant mode has zero frequency".into()));
    }
    if !(0.0..1.0).contains(&d) {
        return Err(Error::InvalidInput(format!("depth {d} outside [0, 1)")));
    }
    let nf = n as f64;
    let r = 1.0 - d;
    let rn = r.powi(2 * n as i32 - 1);
    Ok(DiskModeRecord {
        n,
        d,
        dirichlet: PI * nf * rn * r,
        trace: PI * rn * r * r,
        mass: PI * rn * r * r * r / (2.0 * nf + 2.0),
        flux: PI * nf * nf * rn,
        frequency_fn: nf / r,
        flux_ratio: nf / r,
        phi: nf,
        phi1: nf,
        steklov: nf,
    })
}

/// `E(0)` for mode `n`.
pub fn disk_mass_at_boundary(n: usize) -> f64 {
    PI / (2.0 * n as f64 + 2.0)
}

/// The oracle as a profile, for direct comparison with computed ones.
pub fn disk_profile(n: usize, d_grid: &[f64]) -> Result<DecayProfile> {
    let rows = d_grid.iter().map(|&d| disk_oracle(n, d).map(|r| r.row())).collect::<Result<Vec<_>>>()?;
    Ok(DecayProfile::from_rows(rows, disk_mass_at_boundary(n)))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Adaptive Simpson quadrature with tolerance relative to the first estimate.
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        step(f, a, b, fa, fm, fb, whole, tol * whole.abs(), 18)
    }

    #[test]
    fn examples() {
        let r = disk_oracle(1, 0.0).unwrap();
        assert!((r.dirichlet - PI).abs() < 1e-15 && (r.trace - PI).abs() < 1e-15);
        assert_eq!(r.frequency_fn, 1.0);
        assert_eq!(r.phi, 1.0);
        let r = disk_oracle(3, 0.5).unwrap();
        assert!((r.dirichlet - 3.0 * PI / 64.0).abs() < 1e-15);
        assert!((r.trace - PI / 128.0).abs() < 1e-15);
        assert!((r.frequency_fn - 6.0).abs() < 1e-15);
        assert!(disk_oracle(0, 0.1).is_err());
        let near = disk_oracle(2, 1.0 - 1e-9).unwrap();
        assert!(near.dirichlet < 1e-20 && near.trace < 1e-20 && near.mass < 1e-20 && near.flux < 1e-10);
        assert!(near.frequency_fn > 1e8);
    }

    #[test]
    fn self_consistency() {
        for n in 1..=8 {
            for k in 0..10 {
                let d = 0.09 * k as f64;
                let r = disk_oracle(n, d).unwrap();
                assert!((r.frequency_fn * r.trace - r.dirichlet).abs() <= 1e-14 * r.dirichlet);
                assert!((r.flux_ratio * r.dirichlet - r.flux).abs() <= 1e-14 * r.flux);
                // -E' = H
                let dd: f64 = 1e-5;
                let (lo, hi) = (disk_oracle(n, d - dd.min(d)).unwrap(), disk_oracle(n, d + dd).unwrap());
                let de = (hi.mass - lo.mass) / (dd + dd.min(d));
                assert!((de + r.trace).abs() <= 1e-4 * r.trace);
            }
        }
    }

    #[test]
    fn radial_quadrature_agrees() {
        for n in 1..=8 {
            for d in [0.0, 0.1, 0.35, 0.6] {
                let nf = n as f64;
                // |grad u|^2 = n^2 r^{2n-2}; the angular integral contributes 2 pi.
                let integrand = |r: f64| 2.0 * PI * nf * nf * r.powi(2 * n as i32 - 1);
                let quad = simpson(&integrand, 0.0, 1.0 - d, 1e-12);
                let exact = disk_oracle(n, d).unwrap().dirichlet;
                assert!((quad - exact).abs() <= 1e-10 * exact, "n {n} d {d}: {quad} vs {exact}");
                // u^2 = r^{2n} cos^2: angular integral pi.
                let mass = simpson(&|r: f64| PI * r.powi(2 * n as i32 + 1), 0.0, 1.0 - d, 1e-12);
                assert!((mass - disk_oracle(n, d).unwrap().mass).abs() <= 1e-10 * mass, "n {n} d {d}: {mass} vs {}", disk_oracle(n, d).unwrap().mass);
            }
        }
    }
}
