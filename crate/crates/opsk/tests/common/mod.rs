//! Shared oracles for the integration suites: independent quadrature and
//! grid-search references that never touch the closed-form absorption path.

use opsk::channel::{concentration, DiffusionModel, FlowSample, ReleaseEvent, Vec3};
use opsk::perceptual::OdorId;
use opsk::receiver::ReceiverGeometry;

/// A release aged to `t` with total displacement `drift`.
pub fn aged_release(mass: f64, drift: Vec3, t: f64) -> ReleaseEvent {
    let mut rel = ReleaseEvent::new(OdorId(0), mass, 1).expect("valid release");
    let u = [drift[0] / t, drift[1] / t, drift[2] / t];
    rel.advance_drift(
        &FlowSample {
            u,
            interval_index: 1,
        },
        t,
    )
    .expect("valid advance");
    rel
}

/// Composite midpoint quadrature of the concentration field over the
/// receiver cube, `n` cells per axis. Samples the Gaussian pointwise; no erf
/// anywhere.
pub fn quadrature_over_cube(
    rel: &ReleaseEvent,
    geom: &ReceiverGeometry,
    diff: &DiffusionModel,
    n: usize,
) -> f64 {
    let h = geom.edge / n as f64;
    let start = [
        geom.center[0] - geom.edge / 2.0,
        geom.center[1] - geom.edge / 2.0,
        geom.center[2] - geom.edge / 2.0,
    ];
    let mut total = 0.0;
    for ix in 0..n {
        let x = start[0] + (ix as f64 + 0.5) * h;
        for iy in 0..n {
            let y = start[1] + (iy as f64 + 0.5) * h;
            for iz in 0..n {
                let z = start[2] + (iz as f64 + 0.5) * h;
                total += concentration(rel, [x, y, z], diff).expect("aged release");
            }
        }
    }
    total * h * h * h
}

/// Midpoint quadrature of the concentration field over an arbitrary box.
pub fn quadrature_over_box(
    rel: &ReleaseEvent,
    lo: Vec3,
    hi: Vec3,
    diff: &DiffusionModel,
    n: usize,
) -> f64 {
    let h = [
        (hi[0] - lo[0]) / n as f64,
        (hi[1] - lo[1]) / n as f64,
        (hi[2] - lo[2]) / n as f64,
    ];
    let mut total = 0.0;
    for ix in 0..n {
        let x = lo[0] + (ix as f64 + 0.5) * h[0];
        for iy in 0..n {
            let y = lo[1] + (iy as f64 + 0.5) * h[1];
            for iz in 0..n {
                let z = lo[2] + (iz as f64 + 0.5) * h[2];
                total += concentration(rel, [x, y, z], diff).expect("aged release");
            }
        }
    }
    total * h[0] * h[1] * h[2]
}
