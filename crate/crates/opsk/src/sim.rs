//! Monte-Carlo engine and analysis suite: end-to-end link runs with
//! type-1/type-2 error accounting, the exact type-2 oracle, SER /
//! symbol-rate / mass-ratio sweeps, and the adaptive operation-time
//! extension study.
//!
//! Every run is driven by named substreams of one seed, so results are
//! reproducible bit-for-bit regardless of how many workers evaluate a grid.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedIndex;
use rand_distr::Distribution;
use rayon::prelude::*;

use crate::adaptive::{
    self, candidate_allocations, choose_update, estimate_extension, needs_update, SymbolWindow,
    UpdatePolicy, WindowStats,
};
use crate::channel::{sample_flow, DiffusionModel, FlowModel, Fnr, ReleaseEvent, Vec3};
use crate::perceptual::{bits_to_class, BitAllocation, ClassCode, OdorBank, OdorId};
use crate::receiver::{
    decode_received, demodulate, mass_ratio, optimize_absorption_time, release_contribution,
    select_greatest_mass, AbsorptionResult, ProcessorModel, ReceiverGeometry, SearchBounds,
    TimingPlan,
};
use crate::table::{Cell, SweepTable};
use crate::{Error, Result, SCALE};

/// Substream indices of the run seed.
pub(crate) const STREAM_BANK: u64 = 0;
pub(crate) const STREAM_BITS: u64 = 1;
pub(crate) const STREAM_FLOW: u64 = 2;
pub(crate) const STREAM_DEMOD: u64 = 3;

/// A named substream of a seed; distinct indices are independent.
pub(crate) fn stream(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Clouds whose possible future contribution drops below this absolute mass
/// are dropped from the live set.
const RETIRE_ABS_MASS: f64 = 1e-18;
/// In regimes where even a fresh cloud contributes less than the absolute
/// cutoff, retire relative to the expected fresh contribution instead so the
/// signal itself is never discarded.
const RETIRE_REL_FRACTION: f64 = 1e-3;

/// Full parameterization of one simulated link.
///
/// The receiver sits on the +x axis at `(distance, 0, 0)` with edge
/// `edge_ratio * distance`; the mean flow is `(flow_ratio * distance, 0, 0)`
/// and the per-axis flow noise follows from `fnr`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioConfig {
    pub allocation: BitAllocation,
    /// Transmitter-to-receiver distance, m.
    pub distance: f64,
    /// Receiver edge length over distance.
    pub edge_ratio: f64,
    /// Mean flow speed over distance, 1/s.
    pub flow_ratio: f64,
    /// Flow-rate-to-noise ratio per axis.
    pub fnr: [Fnr; 3],
    /// Processor noise sigma on the perceptual scale.
    pub pn: f64,
    /// Odor-set quality target in (0, 1].
    pub quality: f64,
    /// Released mass per symbol, kg.
    pub mass: f64,
    pub diffusion: DiffusionModel,
    /// Symbol-to-sampling ratio `m = T_s / T_a`.
    pub m_ratio: f64,
    pub n_symbols: u64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            allocation: BitAllocation::new(1, 1, 1).expect("valid"),
            distance: 0.1,
            edge_ratio: 0.05,
            flow_ratio: 1.0,
            fnr: [Fnr::NoiseFree; 3],
            pn: 0.0,
            quality: 1.0,
            mass: 2.4e-9,
            diffusion: DiffusionModel::isotropic(0.14e-4).expect("valid"),
            m_ratio: 2.0,
            n_symbols: 10_000,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("distance", self.distance),
            ("edge_ratio", self.edge_ratio),
            ("flow_ratio", self.flow_ratio),
            ("mass", self.mass),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidInput(format!("{name}={v} must be positive")));
            }
        }
        if !(self.quality > 0.0 && self.quality <= 1.0) {
            return Err(Error::InvalidInput(format!(
                "quality {} outside (0, 1]",
                self.quality
            )));
        }
        if !self.pn.is_finite() || self.pn < 0.0 {
            return Err(Error::InvalidInput(format!("pn {} must be >= 0", self.pn)));
        }
        if !self.m_ratio.is_finite() || self.m_ratio < 1.0 {
            return Err(Error::InvalidInput(format!(
                "m_ratio {} must be >= 1",
                self.m_ratio
            )));
        }
        if self.n_symbols == 0 {
            return Err(Error::InvalidInput("n_symbols must be >= 1".into()));
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<ReceiverGeometry> {
        ReceiverGeometry::new([self.distance, 0.0, 0.0], self.edge_ratio * self.distance)
    }

    pub fn mean_flow(&self) -> Vec3 {
        [self.flow_ratio * self.distance, 0.0, 0.0]
    }

    pub fn flow_model(&self) -> Result<FlowModel> {
        let mean = self.mean_flow();
        let mut sigma = [0.0; 3];
        for axis in 0..3 {
            sigma[axis] = crate::channel::sigma_from_fnr(mean[axis], self.fnr[axis])?;
        }
        FlowModel::new(mean, sigma)
    }

    /// True when every axis is noise-free.
    pub fn channel_is_noise_free(&self) -> bool {
        self.fnr.iter().all(Fnr::is_noise_free)
    }

    /// The absorption instant planned for this scenario.
    pub fn plan_absorption_time(&self) -> Result<f64> {
        let geom = self.geometry()?;
        let search = SearchBounds::auto(&geom, self.mean_flow(), &self.diffusion)?;
        optimize_absorption_time(&geom, self.mean_flow(), &self.diffusion, &search)
    }
}

/// Tallies of one end-to-end run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunResult {
    pub ser: f64,
    pub type1_errors: u64,
    pub type2_errors: u64,
    pub n_symbols: u64,
    /// 1 / T_s, symbols per second.
    pub symbol_rate: f64,
    /// Expected absorbed fraction of a fresh release at `T_a`.
    pub mass_ratio_expected: f64,
}

struct LiveCloud {
    event: ReleaseEvent,
    last_contribution: Option<f64>,
}

/// Runs one scenario end to end: encode, release, drift under per-interval
/// flow samples, absorb at `T_a` of every interval, filter by greatest mass,
/// demodulate under processor noise, decode, and tally errors.
///
/// An interval is a type-1 error when the filter selects an odor other than
/// the transmitted one (or absorbs nothing at all); it is a type-2 error
/// when the right odor decodes into the wrong class.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunResult> {
    cfg.validate()?;
    let t_a = cfg.plan_absorption_time()?;
    run_scenario_with_absorption_time(cfg, t_a)
}

/// [`run_scenario`] with an externally supplied absorption time, for
/// controlled comparisons that hold the timing plan fixed while one
/// scenario knob varies.
pub fn run_scenario_with_absorption_time(cfg: &ScenarioConfig, t_a: f64) -> Result<RunResult> {
    cfg.validate()?;
    let geom = cfg.geometry()?;
    let diff = cfg.diffusion;
    let mean_flow = cfg.mean_flow();
    let flow_model = cfg.flow_model()?;
    let proc = ProcessorModel::new(cfg.pn)?;

    let plan = TimingPlan::new(t_a, cfg.m_ratio)?;
    let expected_ratio = mass_ratio(&geom, mean_flow, &diff, t_a)?;
    let retire_below = RETIRE_ABS_MASS.min(RETIRE_REL_FRACTION * cfg.mass * expected_ratio);

    let mut bank_rng = stream(cfg.seed, STREAM_BANK);
    let bank = OdorBank::generate(cfg.allocation, cfg.quality, cfg.mass, &mut bank_rng)?;
    let mut bits_rng = stream(cfg.seed, STREAM_BITS);
    let mut flow_rng = stream(cfg.seed, STREAM_FLOW);
    let mut demod_rng = stream(cfg.seed, STREAM_DEMOD);

    let k = cfg.allocation.k() as usize;
    let mut clouds: Vec<LiveCloud> = Vec::new();
    let mut type1 = 0u64;
    let mut type2 = 0u64;

    for interval in 1..=cfg.n_symbols {
        let bits: Vec<bool> = (0..k).map(|_| bits_rng.random()).collect();
        let tx_code = bits_to_class(&bits, &cfg.allocation)?;
        let tx_odor = bank.single_odor(&tx_code)?;
        let tx_id = tx_odor.id;
        clouds.push(LiveCloud {
            event: ReleaseEvent::new(tx_id, cfg.mass, interval)?,
            last_contribution: None,
        });

        // One flow sample governs every live cloud this interval.
        let u = sample_flow(&flow_model, interval, &mut flow_rng);
        for cloud in &mut clouds {
            cloud.event.advance_drift(&u, plan.t_a())?;
        }

        let mut per_odor: BTreeMap<OdorId, f64> = BTreeMap::new();
        let mut contributions = Vec::with_capacity(clouds.len());
        for cloud in &clouds {
            let m = release_contribution(&cloud.event, &geom, &diff)?;
            contributions.push(m);
            *per_odor.entry(cloud.event.odor_id).or_insert(0.0) += m;
        }
        let sample = AbsorptionResult {
            per_odor_mass: per_odor,
            interval_index: interval,
        };

        match select_greatest_mass(&sample) {
            Err(_) => type1 += 1, // empty sample: the filter cannot pick the sent odor
            Ok(selected) if selected != tx_id => type1 += 1,
            Ok(selected) => {
                let vector = bank
                    .vector_of(selected)
                    .expect("selected odor is in the bank");
                let received = demodulate(&vector, &proc, &mut demod_rng);
                if decode_received(&received, &cfg.allocation) != tx_code {
                    type2 += 1;
                }
            }
        }

        for cloud in &mut clouds {
            cloud.event.advance_drift(&u, plan.t_s() - plan.t_a())?;
        }

        // Retire clouds that are past their peak and contribute nothing that
        // could ever matter again.
        let mut idx = 0;
        clouds.retain_mut(|cloud| {
            let m = contributions[idx];
            idx += 1;
            let spent = cloud.event.elapsed() > plan.t_a()
                && m < retire_below
                && cloud.last_contribution.is_some_and(|last| m <= last);
            cloud.last_contribution = Some(m);
            !spent
        });
    }

    Ok(RunResult {
        ser: (type1 + type2) as f64 / cfg.n_symbols as f64,
        type1_errors: type1,
        type2_errors: type2,
        n_symbols: cfg.n_symbols,
        symbol_rate: 1.0 / plan.t_s(),
        mass_ratio_expected: expected_ratio,
    })
}

fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Exact type-2 symbol error rate of a bank under processor noise `pn`,
/// assuming a noise-free channel and a uniform symbol prior.
///
/// Per dimension, the correct-decode probability is the normal CDF mass of
/// the decision interval around the odor's true value; the outer intervals
/// absorb the clamped tails. The symbol-correct probability is the product
/// over dimensions; the SER is one minus its mean over all class codes.
pub fn ser_type2_analytic(bank: &OdorBank, pn: f64) -> Result<f64> {
    if !pn.is_finite() || pn < 0.0 {
        return Err(Error::InvalidInput(format!("pn {pn} must be >= 0")));
    }
    if pn == 0.0 {
        return Ok(0.0);
    }
    let a = *bank.allocation();
    let mut correct_sum = 0.0;
    let mut count = 0usize;
    for (code, _) in bank.capsules() {
        let odor = bank.single_odor(code)?;
        let mut p_symbol = 1.0;
        for &dim in &crate::perceptual::DIMENSIONS {
            let n = a.bits(dim);
            if n == 0 {
                continue;
            }
            let classes = 1u32 << n;
            let width = SCALE / classes as f64;
            let k = code.index(dim) as u32;
            let v = odor.vector.component(dim);
            let lower = k as f64 * width;
            let upper = (k + 1) as f64 * width;
            let p = if k == 0 {
                // Negative draws clamp to 0, which stays in class 0.
                normal_cdf((upper - v) / pn)
            } else if k == classes - 1 {
                // Overflow draws clamp to the scale top: still the top class.
                1.0 - normal_cdf((lower - v) / pn)
            } else {
                normal_cdf((upper - v) / pn) - normal_cdf((lower - v) / pn)
            };
            p_symbol *= p;
        }
        correct_sum += p_symbol;
        count += 1;
    }
    Ok(1.0 - correct_sum / count as f64)
}

/// Channel-free Monte-Carlo counterpart of [`ser_type2_analytic`]: draws
/// uniform symbols, demodulates the class odor under `pn`, decodes, and
/// counts mismatches.
pub fn ser_type2_monte_carlo<R: Rng + ?Sized>(
    bank: &OdorBank,
    pn: f64,
    trials: u64,
    rng: &mut R,
) -> Result<f64> {
    if trials == 0 {
        return Err(Error::InvalidInput("trials must be >= 1".into()));
    }
    let a = *bank.allocation();
    let proc = ProcessorModel::new(pn)?;
    let codes = ClassCode::all(&a);
    let mut errors = 0u64;
    for _ in 0..trials {
        let code = codes[rng.random_range(0..codes.len())];
        let odor = bank.single_odor(&code)?;
        let received = demodulate(&odor.vector, &proc, rng);
        if decode_received(&received, &a) != code {
            errors += 1;
        }
    }
    Ok(errors as f64 / trials as f64)
}

/// What a sweep evaluates at each grid point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    /// Channel-driven selection errors; requires a noise-free processor.
    Type1,
    /// Decode errors under processor noise; requires a noise-free channel.
    Type2,
    /// Symbol rate from the optimized absorption time.
    Rate,
    /// Closed-form expected absorbed fraction.
    MassRatio,
}

fn scenario_cells(cfg: &ScenarioConfig) -> Vec<Cell> {
    let fnr_cell = |f: Fnr| match f {
        Fnr::Finite(v) => Cell::Float(v),
        Fnr::NoiseFree => Cell::Float(f64::INFINITY),
    };
    vec![
        Cell::Text(cfg.allocation.to_string()),
        Cell::Float(cfg.distance),
        Cell::Float(cfg.edge_ratio),
        Cell::Float(cfg.flow_ratio),
        fnr_cell(cfg.fnr[0]),
        Cell::Float(cfg.pn),
        Cell::Float(cfg.quality),
        Cell::Int(cfg.n_symbols as i64),
        Cell::Int(cfg.seed as i64),
    ]
}

const SCENARIO_COLUMNS: [&str; 9] = [
    "allocation",
    "distance",
    "edge_ratio",
    "flow_ratio",
    "fnr",
    "pn",
    "quality",
    "n_symbols",
    "seed",
];

/// Evaluates a grid of scenarios under one mode and assembles a rectangular
/// table: scenario axes first, metrics last. Grid points are independent and
/// run on the active rayon pool; rows are keyed by grid index, so the output
/// is identical for any worker count.
pub fn sweep(grid: &[ScenarioConfig], mode: SweepMode) -> Result<SweepTable> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("sweep grid is empty".into()));
    }
    match mode {
        SweepMode::Type1 => {
            if let Some(bad) = grid.iter().find(|c| c.pn != 0.0) {
                return Err(Error::InvalidInput(format!(
                    "type-1 sweeps need a noise-free processor; got pn={}",
                    bad.pn
                )));
            }
        }
        SweepMode::Type2 => {
            if grid.iter().any(|c| !c.channel_is_noise_free()) {
                return Err(Error::InvalidInput(
                    "type-2 sweeps need a noise-free channel".into(),
                ));
            }
        }
        SweepMode::Rate | SweepMode::MassRatio => {}
    }

    let schema = match mode {
        SweepMode::Type1 | SweepMode::Type2 => RowSchema::Ser,
        SweepMode::Rate => RowSchema::Rate,
        SweepMode::MassRatio => RowSchema::MassRatio,
    };
    assemble_table(grid, schema)
}

/// Evaluates a grid with the SER row schema and no mode constraint: every
/// point runs the full pipeline with whatever noise it configures. Backs the
/// `run` subcommand.
pub fn run_table(grid: &[ScenarioConfig]) -> Result<SweepTable> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("no scenario to run".into()));
    }
    assemble_table(grid, RowSchema::Ser)
}

enum RowSchema {
    Ser,
    Rate,
    MassRatio,
}

fn assemble_table(grid: &[ScenarioConfig], schema: RowSchema) -> Result<SweepTable> {
    let metric_columns: &[&str] = match schema {
        RowSchema::Ser => &[
            "ser",
            "type1_errors",
            "type2_errors",
            "symbol_rate",
            "mass_ratio_expected",
        ],
        RowSchema::Rate => &["t_a", "symbol_rate"],
        RowSchema::MassRatio => &["t_a", "mass_ratio"],
    };
    let mut columns: Vec<String> = SCENARIO_COLUMNS.iter().map(|s| s.to_string()).collect();
    columns.extend(metric_columns.iter().map(|s| s.to_string()));
    let mut table = SweepTable::new(columns);

    let rows: Vec<Result<Vec<Cell>>> = grid
        .par_iter()
        .map(|cfg| -> Result<Vec<Cell>> {
            let mut row = scenario_cells(cfg);
            match schema {
                RowSchema::Ser => {
                    let res = run_scenario(cfg)?;
                    row.push(Cell::Float(res.ser));
                    row.push(Cell::Int(res.type1_errors as i64));
                    row.push(Cell::Int(res.type2_errors as i64));
                    row.push(Cell::Float(res.symbol_rate));
                    row.push(Cell::Float(res.mass_ratio_expected));
                }
                RowSchema::Rate => {
                    let t_a = cfg.plan_absorption_time()?;
                    row.push(Cell::Float(t_a));
                    row.push(Cell::Float(1.0 / (cfg.m_ratio * t_a)));
                }
                RowSchema::MassRatio => {
                    let t_a = cfg.plan_absorption_time()?;
                    let ratio = mass_ratio(&cfg.geometry()?, cfg.mean_flow(), &cfg.diffusion, t_a)?;
                    row.push(Cell::Float(t_a));
                    row.push(Cell::Float(ratio));
                }
            }
            Ok(row)
        })
        .collect();
    for row in rows {
        table.push_row(row?)?;
    }
    Ok(table)
}

/// Symbols per second of a scenario: `1 / (m * T_a)` with `T_a` from the
/// absorption-time optimizer.
pub fn symbol_rate(cfg: &ScenarioConfig) -> Result<f64> {
    cfg.validate()?;
    let t_a = cfg.plan_absorption_time()?;
    Ok(1.0 / (cfg.m_ratio * t_a))
}

/// One distribution's outcome in the operation-time extension study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtensionOutcome {
    /// Symbols transmitted up to the first update trigger.
    pub initial_runtime: u64,
    /// Symbols transmitted in total, including all post-update traffic.
    pub total_symbols: u64,
    pub updates_applied: usize,
    /// `100 * (total - initial) / initial`.
    pub extension_percent: f64,
}

/// Runs the transmitter-side update loop until no viable update remains and
/// reports the operation-time extension for each symbol-frequency
/// distribution (given over the class codes of the starting allocation, in
/// lexicographic order).
///
/// Announcement overhead is not modeled here; the study tracks bank
/// depletion only, matching the transmitter's own estimate of runtime.
pub fn adaptive_extension_analysis<R: Rng + ?Sized>(
    start: BitAllocation,
    distributions: &[Vec<f64>],
    policy: &UpdatePolicy,
    per_capsule_mass: f64,
    per_symbol_mass: f64,
    rng: &mut R,
) -> Result<Vec<ExtensionOutcome>> {
    if distributions.is_empty() {
        return Err(Error::InvalidInput("no distributions given".into()));
    }
    if !(per_symbol_mass > 0.0) {
        return Err(Error::InvalidInput(
            "per-symbol mass must be positive".into(),
        ));
    }
    let mut outcomes = Vec::with_capacity(distributions.len());
    for dist in distributions {
        outcomes.push(run_extension_once(
            start,
            dist,
            policy,
            per_capsule_mass,
            per_symbol_mass,
            rng,
        )?);
    }
    Ok(outcomes)
}

struct ExtensionState {
    alloc: BitAllocation,
    bank: OdorBank,
    codes: Vec<ClassCode>,
    weights: Vec<f64>,
    window: SymbolWindow,
    since_update: u64,
    updates: usize,
}

impl ExtensionState {
    /// Algorithm 1's update state: score the single-bit reductions, take
    /// the best if it clears the threshold, and re-key bank, distribution,
    /// and window. Returns false when the operation must end instead.
    fn try_update(
        &mut self,
        stats: &WindowStats,
        threshold: f64,
        per_symbol_mass: f64,
    ) -> Result<bool> {
        if self.alloc.k() < 2 {
            return Ok(false);
        }
        let cands = candidate_allocations(&self.alloc)?;
        let mut scored = Vec::with_capacity(cands.len());
        for cand in cands {
            scored.push((
                cand,
                estimate_extension(&self.bank, stats, &cand, per_symbol_mass)?,
            ));
        }
        let Some(new_a) = choose_update(&scored, threshold) else {
            return Ok(false);
        };
        let mut merged: BTreeMap<ClassCode, f64> = BTreeMap::new();
        for (code, w) in self.codes.iter().zip(&self.weights) {
            *merged
                .entry(adaptive::project_code(code, &self.alloc, &new_a))
                .or_insert(0.0) += w;
        }
        self.bank = adaptive::reinitialize_bank(self.bank.clone(), new_a)?;
        self.alloc = new_a;
        self.codes = ClassCode::all(&new_a);
        self.weights = self
            .codes
            .iter()
            .map(|c| merged.get(c).copied().unwrap_or(0.0))
            .collect();
        self.window = SymbolWindow::new(self.window.window_size());
        self.since_update = 0;
        self.updates += 1;
        Ok(true)
    }
}

fn run_extension_once<R: Rng + ?Sized>(
    start: BitAllocation,
    distribution: &[f64],
    policy: &UpdatePolicy,
    per_capsule_mass: f64,
    per_symbol_mass: f64,
    rng: &mut R,
) -> Result<ExtensionOutcome> {
    let total_classes = start.total_classes() as usize;
    if distribution.len() != total_classes {
        return Err(Error::InvalidInput(format!(
            "distribution has {} entries; allocation {start} has {total_classes} classes",
            distribution.len()
        )));
    }
    if distribution.iter().any(|&w| !w.is_finite() || w < 0.0)
        || distribution.iter().sum::<f64>() <= 0.0
    {
        return Err(Error::InvalidInput(
            "distribution weights must be non-negative with a positive sum".into(),
        ));
    }

    let mut state = ExtensionState {
        alloc: start,
        bank: OdorBank::generate(start, 1.0, per_capsule_mass, rng)?,
        codes: ClassCode::all(&start),
        weights: distribution.to_vec(),
        window: SymbolWindow::new(policy.window),
        since_update: 0,
        updates: 0,
    };
    let mut sampler = WeightedIndex::new(state.weights.clone())
        .map_err(|e| Error::InvalidInput(format!("bad distribution: {e}")))?;

    let mut transmitted = 0u64;
    let mut first_trigger: Option<u64> = None;

    'run: loop {
        let mut pending = state.codes[sampler.sample(rng)];

        // A dry class means the system just became incapable of
        // transmitting: that is the update trigger, whether or not the
        // periodic check anticipated it. The pending symbol joins the
        // stats so every candidate is scored on refilling its class.
        while state.bank.remaining_mass(&pending) <= 0.0 {
            first_trigger.get_or_insert(transmitted);
            let mut recent = state.window.recorded_codes();
            recent.push(pending);
            let stats = WindowStats::from_codes(recent.len(), &recent)?;
            let threshold = policy.min_extension.in_symbols(transmitted);
            let old_alloc = state.alloc;
            if !state.try_update(&stats, threshold, per_symbol_mass)? {
                break 'run;
            }
            sampler = WeightedIndex::new(state.weights.clone())
                .map_err(|e| Error::InvalidInput(format!("bad distribution: {e}")))?;
            pending = adaptive::project_code(&pending, &old_alloc, &state.alloc);
        }
        state.bank.withdraw(&pending, per_symbol_mass)?;
        transmitted += 1;
        state.since_update += 1;
        state.window.record(pending);

        if state.since_update % policy.window as u64 != 0 || !state.window.is_full() {
            continue;
        }
        let stats = state.window.stats()?;
        if !needs_update(&state.bank, &stats, per_symbol_mass)? {
            continue;
        }
        first_trigger.get_or_insert(transmitted);
        let threshold = policy.min_extension.in_symbols(transmitted);
        if !state.try_update(&stats, threshold, per_symbol_mass)? {
            break;
        }
        sampler = WeightedIndex::new(state.weights.clone())
            .map_err(|e| Error::InvalidInput(format!("bad distribution: {e}")))?;
    }

    let updates = state.updates;
    let initial = first_trigger.unwrap_or(transmitted);
    let extension = transmitted - initial;
    let percent = if initial == 0 {
        0.0
    } else {
        100.0 * extension as f64 / initial as f64
    };
    Ok(ExtensionOutcome {
        initial_runtime: initial,
        total_symbols: transmitted,
        updates_applied: updates,
        extension_percent: percent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptive::ExtensionThreshold;

    fn base_config() -> ScenarioConfig {
        ScenarioConfig {
            n_symbols: 500,
            seed: 7,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn zero_noise_run_is_error_free() {
        let cfg = base_config();
        let res = run_scenario(&cfg).unwrap();
        assert_eq!(res.type1_errors, 0);
        assert_eq!(res.type2_errors, 0);
        assert_eq!(res.ser, 0.0);
        assert!(res.symbol_rate > 0.0);
        assert!(res.mass_ratio_expected > 0.0 && res.mass_ratio_expected <= 1.0);
    }

    #[test]
    fn zero_bit_dimensions_run_clean() {
        // Dimensions carrying no bits pin their class index to 0 and stay
        // out of the error accounting.
        for (n_p, n_i, n_e) in [(2, 0, 1), (0, 1, 1), (1, 0, 0)] {
            let cfg = ScenarioConfig {
                allocation: BitAllocation::new(n_p, n_i, n_e).unwrap(),
                n_symbols: 300,
                seed: 3,
                ..ScenarioConfig::default()
            };
            let res = run_scenario(&cfg).unwrap();
            assert_eq!(res.ser, 0.0, "allocation ({n_p},{n_i},{n_e})");

            let mut rng = stream(3, STREAM_BANK);
            let bank = OdorBank::generate(cfg.allocation, 1.0, cfg.mass, &mut rng).unwrap();
            let analytic = ser_type2_analytic(&bank, 5.0).unwrap();
            let mc = ser_type2_monte_carlo(&bank, 5.0, 20_000, &mut rng).unwrap();
            let se = (analytic * (1.0 - analytic) / 20_000.0).sqrt().max(1e-6);
            assert!((mc - analytic).abs() <= 4.0 * se, "{mc} vs {analytic}");
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = ScenarioConfig {
            fnr: [Fnr::Finite(20.0); 3],
            pn: 5.0,
            n_symbols: 300,
            seed: 123,
            ..ScenarioConfig::default()
        };
        let a = run_scenario(&cfg).unwrap();
        let b = run_scenario(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn error_partition_is_exhaustive() {
        let cfg = ScenarioConfig {
            fnr: [Fnr::Finite(5.0); 3],
            pn: 20.0,
            n_symbols: 400,
            seed: 5,
            ..ScenarioConfig::default()
        };
        let res = run_scenario(&cfg).unwrap();
        assert!(res.type1_errors + res.type2_errors <= res.n_symbols);
        let expected = (res.type1_errors + res.type2_errors) as f64 / res.n_symbols as f64;
        assert_eq!(res.ser, expected);
    }

    #[test]
    fn analytic_type2_limits() {
        let mut rng = stream(3, STREAM_BANK);
        let a = BitAllocation::new(1, 1, 1).unwrap();
        let bank = OdorBank::generate(a, 1.0, 1.0, &mut rng).unwrap();
        assert_eq!(ser_type2_analytic(&bank, 0.0).unwrap(), 0.0);
        let tiny = ser_type2_analytic(&bank, 1e-6).unwrap();
        assert!(tiny < 1e-12);
        // Enormous noise clamps every draw to an outer boundary, which still
        // decodes correctly half the time per dimension.
        let huge = ser_type2_analytic(&bank, 1e9).unwrap();
        assert!((huge - (1.0 - 0.125)).abs() < 1e-3, "huge-noise SER {huge}");
    }

    #[test]
    fn analytic_matches_monte_carlo() {
        let a = BitAllocation::new(2, 1, 1).unwrap();
        let mut rng = stream(8, STREAM_BANK);
        let bank = OdorBank::generate(a, 0.6, 1.0, &mut rng).unwrap();
        let pn = 5.0;
        let analytic = ser_type2_analytic(&bank, pn).unwrap();
        let trials = 100_000u64;
        let mc = ser_type2_monte_carlo(&bank, pn, trials, &mut rng).unwrap();
        let se = (analytic * (1.0 - analytic) / trials as f64).sqrt();
        assert!(
            (mc - analytic).abs() <= 3.0 * se,
            "mc {mc} vs analytic {analytic} (se {se})"
        );
    }

    #[test]
    fn monte_carlo_converges_at_binomial_rate() {
        let a = BitAllocation::new(3, 1, 1).unwrap();
        let mut rng = stream(12, STREAM_BANK);
        let bank = OdorBank::generate(a, 0.5, 1.0, &mut rng).unwrap();
        let pn = 5.0;
        let analytic = ser_type2_analytic(&bank, pn).unwrap();
        for trials in [1_000u64, 10_000, 100_000] {
            let mut mc_rng = stream(13, trials);
            let mc = ser_type2_monte_carlo(&bank, pn, trials, &mut mc_rng).unwrap();
            let se = (analytic * (1.0 - analytic) / trials as f64).sqrt();
            assert!(
                (mc - analytic).abs() <= 3.0 * se,
                "{trials} trials: mc {mc} vs analytic {analytic} (se {se})"
            );
        }
    }

    #[test]
    fn sweep_validates_modes() {
        let noisy_proc = ScenarioConfig {
            pn: 3.0,
            ..base_config()
        };
        assert!(sweep(&[noisy_proc], SweepMode::Type1).is_err());
        let noisy_channel = ScenarioConfig {
            fnr: [Fnr::Finite(20.0); 3],
            ..base_config()
        };
        assert!(sweep(&[noisy_channel], SweepMode::Type2).is_err());
        assert!(sweep(&[], SweepMode::Rate).is_err());

        let table = sweep(&[base_config()], SweepMode::Rate).unwrap();
        assert_eq!(table.rows().len(), 1);
    }

    #[test]
    fn symbol_rate_matches_plan() {
        let cfg = base_config();
        let t_a = cfg.plan_absorption_time().unwrap();
        let sr = symbol_rate(&cfg).unwrap();
        assert_eq!(sr, 1.0 / (cfg.m_ratio * t_a));
    }

    #[test]
    fn extension_uniform_vs_skewed() {
        let start = BitAllocation::new(1, 1, 1).unwrap();
        let policy = UpdatePolicy::new(100, ExtensionThreshold::Symbols(0.0), 2, 3).unwrap();
        let uniform = vec![1.0; 8];
        let mut skewed = vec![1.0; 8];
        skewed[0] = 12.0; // class O(0,0,0) dominates
        let mut rng = stream(42, 9);
        let outcomes =
            adaptive_extension_analysis(start, &[uniform, skewed], &policy, 2_000.0, 1.0, &mut rng)
                .unwrap();
        assert_eq!(outcomes.len(), 2);
        let (uni, skew) = (outcomes[0], outcomes[1]);
        assert!(uni.extension_percent <= 5.0, "uniform {uni:?}");
        assert!(
            skew.extension_percent > uni.extension_percent,
            "uniform {uni:?} vs skewed {skew:?}"
        );
        assert!(skew.updates_applied >= 1);
        // Every accepted update drops one bit, so K-1 bounds the count.
        for outcome in &outcomes {
            assert!(outcome.updates_applied <= (start.k() - 1) as usize);
        }
    }

    #[test]
    fn extension_rejects_bad_distributions() {
        let start = BitAllocation::new(1, 1, 1).unwrap();
        let policy = UpdatePolicy::new(10, ExtensionThreshold::Symbols(0.0), 1, 1).unwrap();
        let mut rng = stream(0, 0);
        assert!(
            adaptive_extension_analysis(start, &[vec![1.0; 4]], &policy, 10.0, 1.0, &mut rng)
                .is_err()
        );
        assert!(
            adaptive_extension_analysis(start, &[vec![-1.0; 8]], &policy, 10.0, 1.0, &mut rng)
                .is_err()
        );
    }
}
