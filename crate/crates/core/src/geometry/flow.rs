use crate::coefficients::CoefficientField;
use crate::error::{Error, Result};
use crate::geometry::Domain;
use crate::Point;

const RK4_STEPS: usize = 256;

/// Follows `gamma' = G^{-1}(gamma) grad phi(gamma)` from the boundary point
/// `y` for time `d` with classical RK4 (step `d / 256`).
///
/// Under a metric for which `|grad phi|_G = 1` in the tube, the result lies on
/// `{phi = d}`; the map `(y, d) -> gamma(d)` is the tube coordinate chart.
pub fn normal_flow(domain: &Domain, metric: &CoefficientField, y: Point, d: f64) -> Result<Point> {
    if !(0.0..=domain.d0()).contains(&d) {
        return Err(Error::InvalidInput(format!("flow time {d} outside [0, d0]")));
    }
    if d == 0.0 {
        return Ok(y);
    }
    let velocity = |p: Point, t: f64| -> Result<Point> {
        let info = domain.signed_distance(p)?;
        if info.phi >= domain.d0() {
            return Err(Error::OutOfTube { t });
        }
        let g_inv = metric
            .eval(p)?
            .inverse()
            .ok_or_else(|| Error::Ellipticity("singular metric".into()))?;
        Ok(g_inv.apply(info.grad))
    };
    let dt = d / RK4_STEPS as f64;
    let mut p = y;
    for step in 0..RK4_STEPS {
        let t = step as f64 * dt;
        let k1 = velocity(p, t)?;
        let k2 = velocity([p[0] + 0.5 * dt * k1[0], p[1] + 0.5 * dt * k1[1]], t)?;
        let k3 = velocity([p[0] + 0.5 * dt * k2[0], p[1] + 0.5 * dt * k2[1]], t)?;
        let k4 = velocity([p[0] + dt * k3[0], p[1] + dt * k3[1]], t)?;
        for c in 0..2 {
            p[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
    }
    Ok(p)
}
