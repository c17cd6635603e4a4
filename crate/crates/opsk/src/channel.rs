//! Open-air propagation: per-interval Gaussian flow sampling, flow-rate-to-
//! noise ratio, and the closed-form concentration of an instantaneous
//! release under advection and diffusion.
//!
//! A release of mass `M` at the origin spreads as a Gaussian cloud whose
//! center is carried by the flow. The flow is redrawn once per symbol
//! interval, so a cloud's displacement is the piecewise sum of the interval
//! flows it lived through; with zero flow noise this reduces to the familiar
//! single `u * t` drift.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::perceptual::OdorId;
use crate::{Error, Result};

/// A point or displacement in channel coordinates, meters.
pub type Vec3 = [f64; 3];

/// Diffusion coefficients per axis, m²/s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiffusionModel {
    coeffs: Vec3,
}

impl DiffusionModel {
    pub fn new(d_x: f64, d_y: f64, d_z: f64) -> Result<Self> {
        for (name, d) in [("D_x", d_x), ("D_y", d_y), ("D_z", d_z)] {
            if !d.is_finite() || d <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "diffusion coefficient {name}={d} must be positive and finite"
                )));
            }
        }
        Ok(Self {
            coeffs: [d_x, d_y, d_z],
        })
    }

    /// Same coefficient on every axis.
    pub fn isotropic(d: f64) -> Result<Self> {
        Self::new(d, d, d)
    }

    pub fn coeff(&self, axis: usize) -> f64 {
        self.coeffs[axis]
    }

    pub fn coeffs(&self) -> Vec3 {
        self.coeffs
    }
}

/// Mean flow and per-axis standard deviation of the per-interval flow draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowModel {
    pub mean: Vec3,
    pub sigma: Vec3,
}

impl FlowModel {
    pub fn new(mean: Vec3, sigma: Vec3) -> Result<Self> {
        for (axis, &s) in sigma.iter().enumerate() {
            if !s.is_finite() || s < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "flow sigma on axis {axis} is {s}; must be >= 0"
                )));
            }
        }
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidInput("flow mean must be finite".into()));
        }
        Ok(Self { mean, sigma })
    }

    /// Deterministic flow.
    pub fn noise_free(mean: Vec3) -> Self {
        Self {
            mean,
            sigma: [0.0; 3],
        }
    }
}

/// The flow applied throughout one symbol interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSample {
    pub u: Vec3,
    pub interval_index: u64,
}

/// Flow-rate-to-noise ratio of one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fnr {
    Finite(f64),
    /// Zero-sigma axis; the flow is deterministic.
    NoiseFree,
}

impl Fnr {
    pub fn is_noise_free(&self) -> bool {
        matches!(self, Fnr::NoiseFree)
    }
}

/// Ratio of mean flow to its standard deviation; the noise-free marker when
/// sigma is zero.
pub fn fnr(v: f64, sigma: f64) -> Result<Fnr> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(Error::InvalidInput(format!("sigma {sigma} must be >= 0")));
    }
    if sigma == 0.0 {
        Ok(Fnr::NoiseFree)
    } else {
        Ok(Fnr::Finite(v / sigma))
    }
}

/// Inverts [`fnr`]: the flow-noise standard deviation that realizes a target
/// ratio at mean flow `v`.
pub fn sigma_from_fnr(v: f64, ratio: Fnr) -> Result<f64> {
    match ratio {
        Fnr::NoiseFree => Ok(0.0),
        Fnr::Finite(r) if r > 0.0 && r.is_finite() => Ok(v / r),
        Fnr::Finite(r) => Err(Error::InvalidInput(format!("FNR {r} must be positive"))),
    }
}

/// Draws the flow for one symbol interval: independent normals per axis.
/// Zero-sigma axes return the mean exactly and consume no randomness.
pub fn sample_flow<R: Rng + ?Sized>(
    model: &FlowModel,
    interval_index: u64,
    rng: &mut R,
) -> FlowSample {
    let mut u = model.mean;
    for axis in 0..3 {
        if model.sigma[axis] > 0.0 {
            let normal = Normal::new(model.mean[axis], model.sigma[axis]).expect("validated sigma");
            u[axis] = normal.sample(rng);
        }
    }
    FlowSample { u, interval_index }
}

/// One instantaneous release and the cloud state it evolved into.
#[derive(Debug, Clone, PartialEq)]
pub struct ReleaseEvent {
    pub odor_id: OdorId,
    pub mass: f64,
    pub release_interval: u64,
    drift: Vec3,
    elapsed: f64,
}

impl ReleaseEvent {
    pub fn new(odor_id: OdorId, mass: f64, release_interval: u64) -> Result<Self> {
        if !mass.is_finite() || mass <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "release mass {mass} must be positive"
            )));
        }
        Ok(Self {
            odor_id,
            mass,
            release_interval,
            drift: [0.0; 3],
            elapsed: 0.0,
        })
    }

    /// Accumulated advective displacement of the cloud center, m.
    pub fn drift(&self) -> Vec3 {
        self.drift
    }

    /// Time since release, s.
    pub fn elapsed(&self) -> f64 {
        self.elapsed
    }

    /// Carries the cloud with flow `u` for `dt` seconds:
    /// `drift += u * dt`, `elapsed += dt`.
    pub fn advance_drift(&mut self, u: &FlowSample, dt: f64) -> Result<()> {
        if !dt.is_finite() || dt < 0.0 {
            return Err(Error::InvalidInput(format!("dt {dt} must be >= 0")));
        }
        for axis in 0..3 {
            self.drift[axis] += u.u[axis] * dt;
        }
        self.elapsed += dt;
        Ok(())
    }
}

/// Concentration of a release's cloud at `point`, kg/m³:
///
/// `mass / ((4*pi*t)^(3/2) * sqrt(Dx*Dy*Dz)) * exp(-sum((p_k - drift_k)^2 / (4*D_k*t)))`
///
/// with `t` the time since release. The cloud center is the accumulated
/// drift, which equals `u * t` when the flow never varies.
pub fn concentration(rel: &ReleaseEvent, point: Vec3, diff: &DiffusionModel) -> Result<f64> {
    let t = rel.elapsed;
    if t <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "concentration requires elapsed > 0, got {t}"
        )));
    }
    let d = diff.coeffs();
    let prefactor =
        rel.mass / ((4.0 * std::f64::consts::PI * t).powf(1.5) * (d[0] * d[1] * d[2]).sqrt());
    let mut exponent = 0.0;
    for axis in 0..3 {
        let offset = point[axis] - rel.drift[axis];
        exponent += offset * offset / (4.0 * d[axis] * t);
    }
    Ok(prefactor * (-exponent).exp())
}
