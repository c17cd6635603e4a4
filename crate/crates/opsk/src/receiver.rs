//! Passive cube absorber: closed-form per-axis absorption factors, absorbed
//! mass accounting, absorption-time optimization, greatest-mass filtering,
//! processor-noise demodulation, threshold decoding, and silence detection.
//!
//! Integrating a cloud's Gaussian concentration over the cube factorizes per
//! axis into an erf bracket
//!
//! `B = erf((c + l/2 - drift) / sqrt(4Dt)) - erf((c - l/2 - drift) / sqrt(4Dt))`
//!
//! so one release contributes `(mass / 8) * B_x * B_y * B_z` to the absorbed
//! sample. Absorption is non-destructive: the receiver reads a sample of the
//! field, clouds are not depleted.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::channel::{DiffusionModel, ReleaseEvent, Vec3};
use crate::perceptual::{classify, BitAllocation, ClassCode, OdorId, PerceptualVector};
use crate::{scale_top, Error, Result};

/// Cube-shaped absorption volume: center and edge length, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverGeometry {
    pub center: Vec3,
    pub edge: f64,
}

impl ReceiverGeometry {
    pub fn new(center: Vec3, edge: f64) -> Result<Self> {
        if !edge.is_finite() || edge <= 0.0 {
            return Err(Error::InvalidInput(format!("edge {edge} must be positive")));
        }
        Ok(Self { center, edge })
    }
}

/// Absorption instant `T_a` within each interval, symbol-to-sampling ratio
/// `m`, and the interval length `T_s = m * T_a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingPlan {
    t_a: f64,
    m: f64,
    t_s: f64,
}

impl TimingPlan {
    pub fn new(t_a: f64, m: f64) -> Result<Self> {
        if !t_a.is_finite() || t_a <= 0.0 {
            return Err(Error::InvalidInput(format!("T_a {t_a} must be positive")));
        }
        if !m.is_finite() || m < 1.0 {
            return Err(Error::InvalidInput(format!(
                "symbol-to-sampling ratio {m} must be >= 1"
            )));
        }
        Ok(Self {
            t_a,
            m,
            t_s: m * t_a,
        })
    }

    pub fn t_a(&self) -> f64 {
        self.t_a
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn t_s(&self) -> f64 {
        self.t_s
    }
}

/// Absorbed mass per odor type for one interval's sample.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AbsorptionResult {
    pub per_odor_mass: BTreeMap<OdorId, f64>,
    pub interval_index: u64,
}

/// Gaussian measurement noise of the receiver's perceptual processor,
/// standard deviation on the 0–100 scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessorModel {
    pub pn: f64,
}

impl ProcessorModel {
    pub fn new(pn: f64) -> Result<Self> {
        if !pn.is_finite() || pn < 0.0 {
            return Err(Error::InvalidInput(format!("PN {pn} must be >= 0")));
        }
        Ok(Self { pn })
    }
}

/// The erf bracket of one axis; lies in `(0, 2)`.
pub fn axis_absorption_factor(
    center_1d: f64,
    edge: f64,
    drift_1d: f64,
    d: f64,
    t: f64,
) -> Result<f64> {
    if t <= 0.0 || !t.is_finite() {
        return Err(Error::InvalidInput(format!("t {t} must be positive")));
    }
    if edge <= 0.0 || d <= 0.0 {
        return Err(Error::InvalidInput(
            "edge and diffusion coefficient must be positive".into(),
        ));
    }
    let scale = (4.0 * d * t).sqrt();
    let hi = (center_1d + edge / 2.0 - drift_1d) / scale;
    let lo = (center_1d - edge / 2.0 - drift_1d) / scale;
    Ok(libm::erf(hi) - libm::erf(lo))
}

/// The fraction of one release currently inside the cube:
/// `(1/8) * B_x * B_y * B_z` at the release's own drift and age.
pub fn release_fraction(
    rel: &ReleaseEvent,
    geom: &ReceiverGeometry,
    diff: &DiffusionModel,
) -> Result<f64> {
    let t = rel.elapsed();
    let mut product = 1.0;
    for axis in 0..3 {
        product *= axis_absorption_factor(
            geom.center[axis],
            geom.edge,
            rel.drift()[axis],
            diff.coeff(axis),
            t,
        )?;
    }
    Ok(product / 8.0)
}

/// Mass of one release inside the cube, kg.
pub fn release_contribution(
    rel: &ReleaseEvent,
    geom: &ReceiverGeometry,
    diff: &DiffusionModel,
) -> Result<f64> {
    Ok(rel.mass * release_fraction(rel, geom, diff)?)
}

/// Sums every release's in-cube mass, grouped by odor type.
pub fn absorbed_mass(
    releases: &[ReleaseEvent],
    geom: &ReceiverGeometry,
    diff: &DiffusionModel,
    interval_index: u64,
) -> Result<AbsorptionResult> {
    let mut result = AbsorptionResult {
        per_odor_mass: BTreeMap::new(),
        interval_index,
    };
    for rel in releases {
        let mass = release_contribution(rel, geom, diff)?;
        *result.per_odor_mass.entry(rel.odor_id).or_insert(0.0) += mass;
    }
    Ok(result)
}

/// Search window and termination for the absorption-time maximization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchBounds {
    pub t_lo: f64,
    pub t_hi: f64,
    /// Relative width of the final bracket.
    pub rel_tol: f64,
    /// Points of the coarse log-spaced scan.
    pub grid_points: usize,
}

impl SearchBounds {
    pub fn new(t_lo: f64, t_hi: f64, rel_tol: f64) -> Result<Self> {
        if !(t_lo > 0.0 && t_hi > t_lo) {
            return Err(Error::InvalidInput(format!(
                "bounds ({t_lo}, {t_hi}) must satisfy 0 < t_lo < t_hi"
            )));
        }
        if !(rel_tol > 0.0) {
            return Err(Error::InvalidInput(format!(
                "rel_tol {rel_tol} must be > 0"
            )));
        }
        Ok(Self {
            t_lo,
            t_hi,
            rel_tol,
            grid_points: 512,
        })
    }

    /// Bounds wide enough to bracket the absorption peak for any mix of
    /// advection and diffusion: the peak sits near `r/u` when the flow
    /// carries the cloud to the receiver and near `r²/6D` when diffusion
    /// does, so span three decades around both.
    pub fn auto(geom: &ReceiverGeometry, mean_flow: Vec3, diff: &DiffusionModel) -> Result<Self> {
        let r = geom.center.iter().map(|c| c * c).sum::<f64>().sqrt();
        let u = mean_flow.iter().map(|c| c * c).sum::<f64>().sqrt();
        let d_min = diff.coeffs().into_iter().fold(f64::INFINITY, f64::min);
        let d_max = diff.coeffs().into_iter().fold(0.0f64, f64::max);
        // A receiver at the origin peaks as early as diffusion can fill it.
        let r_eff = r.max(geom.edge / 2.0);
        let mut scales = vec![r_eff * r_eff / (6.0 * d_max), r_eff * r_eff / (6.0 * d_min)];
        if u > 0.0 {
            scales.push(r_eff / u);
        }
        let lo = scales.iter().copied().fold(f64::INFINITY, f64::min) * 1e-3;
        let hi = scales.iter().copied().fold(0.0f64, f64::max) * 1e3;
        Self::new(lo, hi, 1e-6)
    }
}

/// Finds the absorption instant maximizing `B_x * B_y * B_z` under the mean
/// flow (planning is noise-free: drift is `mean_flow * t`).
///
/// A coarse log-spaced scan locates the maximum, then a bracketed
/// golden-section search refines it to the requested relative tolerance.
/// The scan is seeded with the flow approach time and the diffusive peak
/// times: at high Peclet the absorption peak is narrower than any practical
/// uniform grid, and those seeds are where it lives.
pub fn optimize_absorption_time(
    geom: &ReceiverGeometry,
    mean_flow: Vec3,
    diff: &DiffusionModel,
    search: &SearchBounds,
) -> Result<f64> {
    let objective = |t: f64| -> Result<f64> {
        let mut product = 1.0;
        for axis in 0..3 {
            product *= axis_absorption_factor(
                geom.center[axis],
                geom.edge,
                mean_flow[axis] * t,
                diff.coeff(axis),
                t,
            )?;
        }
        if !product.is_finite() {
            return Err(Error::Optimizer(format!("objective not finite at t={t}")));
        }
        Ok(product)
    };

    let n = search.grid_points.max(3);
    let log_lo = search.t_lo.ln();
    let log_hi = search.t_hi.ln();
    let mut candidates: Vec<f64> = (0..n)
        .map(|k| (log_lo + (log_hi - log_lo) * k as f64 / (n - 1) as f64).exp())
        .collect();

    // Seed the instant the cloud center passes closest to the receiver and
    // the pure-diffusion peak times, with neighbors to bracket them.
    let u_sq: f64 = mean_flow.iter().map(|u| u * u).sum();
    let mut seeds = Vec::new();
    if u_sq > 0.0 {
        let align: f64 = geom
            .center
            .iter()
            .zip(&mean_flow)
            .map(|(c, u)| c * u)
            .sum::<f64>()
            / u_sq;
        if align > 0.0 {
            seeds.push(align);
        }
    }
    let r_sq: f64 = geom.center.iter().map(|c| c * c).sum();
    let r_eff_sq = r_sq.max(geom.edge * geom.edge / 4.0);
    for axis in 0..3 {
        seeds.push(r_eff_sq / (6.0 * diff.coeff(axis)));
    }
    for seed in seeds {
        for factor in [0.5, 0.9, 0.99, 1.0, 1.01, 1.1, 2.0] {
            let t = seed * factor;
            if t > search.t_lo && t < search.t_hi {
                candidates.push(t);
            }
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();

    let mut best_k = 0;
    let mut best_f = f64::NEG_INFINITY;
    for (k, &t) in candidates.iter().enumerate() {
        let f = objective(t)?;
        if f > best_f {
            best_f = f;
            best_k = k;
        }
    }
    if best_f <= 0.0 {
        return Err(Error::Optimizer(
            "objective vanished over the whole search window".into(),
        ));
    }

    // Bracketed golden-section around the scan winner; the best evaluated
    // point is tracked so refinement can only improve on the scan.
    let mut a = candidates[best_k.saturating_sub(1)];
    let mut b = candidates[(best_k + 1).min(candidates.len() - 1)];
    let mut m = candidates[best_k];
    if m <= a || m >= b {
        m = (a * b).sqrt();
    }
    let mut f_m = objective(m)?;
    let mut t_best = candidates[best_k];
    let mut f_best = best_f;
    if f_m > f_best {
        f_best = f_m;
        t_best = m;
    }
    const GOLD: f64 = 0.381_966_011_250_105_1; // 2 - phi
    for _ in 0..300 {
        if (b - a) <= search.rel_tol * m {
            break;
        }
        let x = if (b - m) > (m - a) {
            m + GOLD * (b - m)
        } else {
            m - GOLD * (m - a)
        };
        let f_x = objective(x)?;
        if f_x > f_m {
            if x > m {
                a = m;
            } else {
                b = m;
            }
            m = x;
            f_m = f_x;
        } else if x > m {
            b = x;
        } else {
            a = x;
        }
        if f_m > f_best {
            f_best = f_m;
            t_best = m;
        }
    }
    Ok(t_best)
}

/// Expected fraction of a release absorbed at `t_a` under the mean flow:
/// `(1/8) * B_x * B_y * B_z` with drift `mean_flow * t_a`. Lies in `(0, 1)`.
pub fn mass_ratio(
    geom: &ReceiverGeometry,
    mean_flow: Vec3,
    diff: &DiffusionModel,
    t_a: f64,
) -> Result<f64> {
    if !(t_a > 0.0) {
        return Err(Error::InvalidInput(format!("T_a {t_a} must be positive")));
    }
    let mut product = 1.0;
    for axis in 0..3 {
        product *= axis_absorption_factor(
            geom.center[axis],
            geom.edge,
            mean_flow[axis] * t_a,
            diff.coeff(axis),
            t_a,
        )?;
    }
    Ok(product / 8.0)
}

/// The filtering step: the odor type with the greatest absorbed mass.
/// Ties break toward the smallest odor id; an empty or all-zero sample is an
/// error (the interval reads as silence).
pub fn select_greatest_mass(res: &AbsorptionResult) -> Result<OdorId> {
    res.per_odor_mass
        .iter()
        .filter(|(_, &m)| m > 0.0)
        .max_by(|(id_a, m_a), (id_b, m_b)| m_a.total_cmp(m_b).then(id_b.cmp(id_a)))
        .map(|(&id, _)| id)
        .ok_or_else(|| Error::InvalidInput("absorbed sample holds no positive mass".into()))
}

/// The processor's estimate of the selected odor's perceptual vector: each
/// component is a normal draw around the true value with sigma `pn`, clamped
/// into the valid domain `[0, 100 - ulp]`. A noise-free processor returns
/// the true vector exactly and consumes no randomness.
pub fn demodulate<R: Rng + ?Sized>(
    true_vector: &PerceptualVector,
    proc: &ProcessorModel,
    rng: &mut R,
) -> PerceptualVector {
    if proc.pn == 0.0 {
        return *true_vector;
    }
    let mut draw = |mean: f64| -> f64 {
        let normal = Normal::new(mean, proc.pn).expect("validated pn");
        normal.sample(rng).clamp(0.0, scale_top())
    };
    PerceptualVector {
        p: draw(true_vector.p),
        i: draw(true_vector.i),
        e: draw(true_vector.e),
    }
}

/// Decodes a demodulated vector into its class code. Identical to
/// [`classify`]; the receiver and transmitter share one mapping.
pub fn decode_received(v: &PerceptualVector, a: &BitAllocation) -> ClassCode {
    classify(v, a)
}

/// True when the greatest per-odor mass is strictly below the silence
/// threshold `m_t` (or when nothing was absorbed at all).
pub fn detect_silence(res: &AbsorptionResult, m_t: f64) -> bool {
    debug_assert!(m_t > 0.0, "silence threshold must be positive");
    res.per_odor_mass.values().copied().fold(0.0f64, f64::max) < m_t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::FlowSample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn aged_release(mass: f64, u: Vec3, t: f64) -> ReleaseEvent {
        let mut rel = ReleaseEvent::new(OdorId(0), mass, 1).unwrap();
        rel.advance_drift(
            &FlowSample {
                u,
                interval_index: 1,
            },
            t,
        )
        .unwrap();
        rel
    }

    #[test]
    fn axis_factor_symmetry_and_limits() {
        let b = axis_absorption_factor(0.0, 0.01, 0.0, 1e-5, 1.0).unwrap();
        let expected = 2.0 * libm::erf(0.005 / (4.0f64 * 1e-5).sqrt());
        assert!((b - expected).abs() < 1e-15);

        // Huge cube absorbs everything along the axis.
        let b = axis_absorption_factor(0.0, 1e6, 0.0, 1e-5, 1.0).unwrap();
        assert!((b - 2.0).abs() < 1e-12);

        // Far-away cube sees nothing.
        let b = axis_absorption_factor(1e3, 0.01, 0.0, 1e-5, 1.0).unwrap();
        assert_eq!(b, 0.0);

        assert!(axis_absorption_factor(0.0, 0.01, 0.0, 1e-5, 0.0).is_err());
    }

    #[test]
    fn absorbed_mass_covers_all_space() {
        let rel = aged_release(2.4e-9, [0.1, 0.0, 0.0], 3.0);
        let geom = ReceiverGeometry::new([0.0; 3], 1e9).unwrap();
        let diff = DiffusionModel::isotropic(0.14e-4).unwrap();
        let res = absorbed_mass(std::slice::from_ref(&rel), &geom, &diff, 1).unwrap();
        let total = res.per_odor_mass[&OdorId(0)];
        assert!((total - 2.4e-9).abs() < 1e-12 * 2.4e-9);
    }

    #[test]
    fn tiny_cube_matches_peak_concentration_times_volume() {
        let diff = DiffusionModel::isotropic(0.14e-4).unwrap();
        let rel = aged_release(2.4e-9, [0.05, 0.0, 0.0], 2.0);
        let sigma_scale = (4.0 * 0.14e-4 * 2.0f64).sqrt();
        let edge = 0.01 * sigma_scale;
        let geom = ReceiverGeometry::new(rel.drift(), edge).unwrap();
        let absorbed = release_contribution(&rel, &geom, &diff).unwrap();
        let peak = crate::channel::concentration(&rel, rel.drift(), &diff).unwrap();
        let approx = peak * edge.powi(3);
        assert!(
            (absorbed - approx).abs() / approx < 1e-3,
            "absorbed {absorbed} vs peak*volume {approx}"
        );
    }

    #[test]
    fn absorbed_never_exceeds_released() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let diff = DiffusionModel::isotropic(1e-5).unwrap();
        for _ in 0..200 {
            let rel = aged_release(
                1e-9,
                [rng.random_range(-1.0..1.0), 0.0, 0.0],
                rng.random_range(0.01..100.0),
            );
            let geom = ReceiverGeometry::new(
                [rng.random_range(-0.5..0.5), 0.0, 0.0],
                rng.random_range(1e-4..10.0),
            )
            .unwrap();
            let m = release_contribution(&rel, &geom, &diff).unwrap();
            assert!(m >= 0.0 && m <= rel.mass);
        }
    }

    #[test]
    fn axis_integral_normalizer_identity() {
        // Folding the Gaussian normalizer into the axis integrals and then
        // multiplying by the prefactor must equal (mass/8) * B_x * B_y * B_z.
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let diff = DiffusionModel::new(1e-5, 2.5e-5, 0.7e-5).unwrap();
        for _ in 0..50 {
            let t = rng.random_range(0.05..50.0);
            let rel = aged_release(
                2.4e-9,
                [
                    rng.random_range(-0.2..0.2),
                    rng.random_range(-0.2..0.2),
                    rng.random_range(-0.2..0.2),
                ],
                t,
            );
            let geom = ReceiverGeometry::new(
                [
                    rng.random_range(-0.3..0.3),
                    rng.random_range(-0.3..0.3),
                    rng.random_range(-0.3..0.3),
                ],
                rng.random_range(0.001..0.3),
            )
            .unwrap();

            // Full axis integrals sqrt(pi D_k t) * B_k with the plume's
            // Gaussian normalizer in front.
            let mut integral_product = 1.0;
            for axis in 0..3 {
                let b = axis_absorption_factor(
                    geom.center[axis],
                    geom.edge,
                    rel.drift()[axis],
                    diff.coeff(axis),
                    t,
                )
                .unwrap();
                integral_product *= (std::f64::consts::PI * diff.coeff(axis) * t).sqrt() * b;
            }
            let d = diff.coeffs();
            let prefactor = rel.mass
                / ((4.0 * std::f64::consts::PI * t).powf(1.5) * (d[0] * d[1] * d[2]).sqrt());
            let via_integrals = prefactor * integral_product;
            let via_bracket = release_contribution(&rel, &geom, &diff).unwrap();
            if via_bracket > 0.0 {
                assert!(
                    (via_integrals - via_bracket).abs() <= 1e-12 * via_bracket,
                    "{via_integrals} vs {via_bracket}"
                );
            }
        }
    }

    #[test]
    fn optimizer_advection_dominated_hits_transit_time() {
        let diff = DiffusionModel::isotropic(0.14e-4).unwrap();
        // u * x_r / D = 0.5 * 1.0 / 1.4e-5 >> 100: strongly advective.
        let geom = ReceiverGeometry::new([1.0, 0.0, 0.0], 0.05).unwrap();
        let flow = [0.5, 0.0, 0.0];
        let search = SearchBounds::auto(&geom, flow, &diff).unwrap();
        let t_a = optimize_absorption_time(&geom, flow, &diff, &search).unwrap();
        let transit = 1.0 / 0.5;
        assert!(
            (t_a - transit).abs() / transit < 0.10,
            "T_a {t_a} vs transit {transit}"
        );

        // Doubling the flow halves the optimum.
        let flow2 = [1.0, 0.0, 0.0];
        let search2 = SearchBounds::auto(&geom, flow2, &diff).unwrap();
        let t_a2 = optimize_absorption_time(&geom, flow2, &diff, &search2).unwrap();
        assert!((t_a2 - t_a / 2.0).abs() / (t_a / 2.0) < 0.10);
    }

    #[test]
    fn optimizer_beats_dense_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..10 {
            let diff = DiffusionModel::isotropic(10f64.powf(rng.random_range(-6.0..-4.0))).unwrap();
            let distance = 10f64.powf(rng.random_range(-2.0..0.0));
            let geom =
                ReceiverGeometry::new([distance, 0.0, 0.0], distance * rng.random_range(0.01..0.1))
                    .unwrap();
            let flow = [distance * rng.random_range(0.1..10.0), 0.0, 0.0];
            let search = SearchBounds::auto(&geom, flow, &diff).unwrap();
            let t_a = optimize_absorption_time(&geom, flow, &diff, &search).unwrap();

            let objective = |t: f64| mass_ratio(&geom, flow, &diff, t).unwrap();
            let f_best = objective(t_a);
            let n = 10_000;
            for k in 0..n {
                let t = (search.t_lo.ln()
                    + (search.t_hi.ln() - search.t_lo.ln()) * k as f64 / (n - 1) as f64)
                    .exp();
                assert!(
                    f_best >= objective(t) * (1.0 - 1e-9),
                    "grid point t={t} beats optimizer"
                );
            }
        }
    }

    #[test]
    fn mass_ratio_limits_and_monotonicity() {
        let diff = DiffusionModel::isotropic(0.14e-4).unwrap();
        let flow = [0.1, 0.0, 0.0];
        let huge = ReceiverGeometry::new([0.1, 0.0, 0.0], 1e9).unwrap();
        let r = mass_ratio(&huge, flow, &diff, 1.0).unwrap();
        assert!((r - 1.0).abs() < 1e-12);

        let mut last = 0.0;
        for edge in [0.001, 0.005, 0.02, 0.1] {
            let geom = ReceiverGeometry::new([0.1, 0.0, 0.0], edge).unwrap();
            let r = mass_ratio(&geom, flow, &diff, 1.0).unwrap();
            assert!(r > last && r > 0.0 && r <= 1.0);
            last = r;
        }
        assert!(mass_ratio(&huge, flow, &diff, 0.0).is_err());
    }

    #[test]
    fn greatest_mass_selection_and_ties() {
        let mut res = AbsorptionResult::default();
        res.per_odor_mass.insert(OdorId(2), 3e-12);
        res.per_odor_mass.insert(OdorId(5), 1e-12);
        assert_eq!(select_greatest_mass(&res).unwrap(), OdorId(2));

        let mut res = AbsorptionResult::default();
        res.per_odor_mass.insert(OdorId(9), 1e-12);
        res.per_odor_mass.insert(OdorId(4), 1e-12);
        assert_eq!(select_greatest_mass(&res).unwrap(), OdorId(4));

        let res = AbsorptionResult::default();
        assert!(select_greatest_mass(&res).is_err());
        let mut res = AbsorptionResult::default();
        res.per_odor_mass.insert(OdorId(0), 0.0);
        assert!(select_greatest_mass(&res).is_err());
    }

    #[test]
    fn demodulate_noise_free_and_clamped() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = PerceptualVector::new(10.0, 55.0, 99.0).unwrap();
        let exact = demodulate(&v, &ProcessorModel::new(0.0).unwrap(), &mut rng);
        assert_eq!(exact, v);

        let proc = ProcessorModel::new(5.0).unwrap();
        let zero = PerceptualVector::new(0.0, 0.0, 0.0).unwrap();
        for _ in 0..10_000 {
            let out = demodulate(&zero, &proc, &mut rng);
            assert!(out.p >= 0.0 && out.i >= 0.0 && out.e >= 0.0);
            assert!(out.p < 100.0 && out.i < 100.0 && out.e < 100.0);
        }
    }

    #[test]
    fn demodulate_sample_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let proc = ProcessorModel::new(5.0).unwrap();
        // Mean far from the clamp boundaries so clamping never triggers.
        let v = PerceptualVector::new(50.0, 50.0, 50.0).unwrap();
        let n = 100_000;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let out = demodulate(&v, &proc, &mut rng);
            sum += out.p;
            sum_sq += out.p * out.p;
        }
        let mean = sum / n as f64;
        let sigma = (sum_sq / n as f64 - mean * mean).sqrt();
        assert!((sigma - 5.0).abs() / 5.0 < 0.02, "sample sigma {sigma}");
    }

    #[test]
    fn decode_matches_classify() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let a = BitAllocation::new(2, 1, 3).unwrap();
        for _ in 0..1_000_000 {
            let v = PerceptualVector::new(
                rng.random_range(0.0..100.0),
                rng.random_range(0.0..100.0),
                rng.random_range(0.0..100.0),
            )
            .unwrap();
            assert_eq!(decode_received(&v, &a), classify(&v, &a));
        }
        let v = PerceptualVector::new(49.999, 0.0, 0.0).unwrap();
        assert_eq!(
            decode_received(&v, &BitAllocation::new(1, 0, 0).unwrap()).p,
            0
        );
        let v = PerceptualVector::new(50.0, 0.0, 0.0).unwrap();
        assert_eq!(
            decode_received(&v, &BitAllocation::new(1, 0, 0).unwrap()).p,
            1
        );
    }

    #[test]
    fn silence_detection_is_strict() {
        let m_t = 1e-12;
        let mut res = AbsorptionResult::default();
        assert!(detect_silence(&res, m_t));
        res.per_odor_mass.insert(OdorId(0), m_t);
        assert!(!detect_silence(&res, m_t));
        res.per_odor_mass.insert(OdorId(0), m_t / 2.0);
        assert!(detect_silence(&res, m_t));
    }
}
