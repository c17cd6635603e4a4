//! Adaptive symbol transmission: depletion detection over N-symbol windows,
//! candidate allocation scoring, bank re-initialization with merged classes,
//! and the silence-framed update announcement.
//!
//! When the recent symbol mix projects a capsule running dry within the next
//! window, the transmitter drops one bit from one dimension. Halving a
//! dimension's class count pools neighboring capsules, so skewed traffic
//! keeps flowing from what uniform traffic would have stranded.

use std::collections::BTreeMap;
use std::collections::VecDeque;

use crate::perceptual::{classify, BitAllocation, ClassCode, Dimension, OdorBank, DIMENSIONS};
use crate::{Error, Result};

/// Class-code counts over the last `window` transmitted symbols.
#[derive(Debug, Clone)]
pub struct WindowStats {
    window: usize,
    counts: BTreeMap<ClassCode, u64>,
}

impl WindowStats {
    /// Builds stats from exactly `window` recorded symbols.
    pub fn from_codes(window: usize, codes: &[ClassCode]) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidInput("window must be >= 1".into()));
        }
        if codes.len() != window {
            return Err(Error::InvalidInput(format!(
                "expected {window} symbols, got {}",
                codes.len()
            )));
        }
        let mut counts = BTreeMap::new();
        for &c in codes {
            *counts.entry(c).or_insert(0) += 1;
        }
        Ok(Self { window, counts })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn count(&self, code: &ClassCode) -> u64 {
        self.counts.get(code).copied().unwrap_or(0)
    }

    pub fn counts(&self) -> impl Iterator<Item = (&ClassCode, u64)> {
        self.counts.iter().map(|(c, &n)| (c, n))
    }
}

/// Rolling window of recent symbols, materializing [`WindowStats`] on demand.
#[derive(Debug, Clone)]
pub struct SymbolWindow {
    window: usize,
    recent: VecDeque<ClassCode>,
}

impl SymbolWindow {
    pub fn new(window: usize) -> Self {
        Self {
            window,
            recent: VecDeque::with_capacity(window),
        }
    }

    pub fn window_size(&self) -> usize {
        self.window
    }

    pub fn record(&mut self, code: ClassCode) {
        if self.recent.len() == self.window {
            self.recent.pop_front();
        }
        self.recent.push_back(code);
    }

    pub fn clear(&mut self) {
        self.recent.clear();
    }

    pub fn is_full(&self) -> bool {
        self.recent.len() == self.window
    }

    pub fn len(&self) -> usize {
        self.recent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recent.is_empty()
    }

    pub fn stats(&self) -> Result<WindowStats> {
        let codes: Vec<ClassCode> = self.recent.iter().copied().collect();
        WindowStats::from_codes(self.window, &codes)
    }

    /// Stats over however many symbols are recorded; used when a depletion
    /// event interrupts a window in progress.
    pub fn partial_stats(&self) -> Result<WindowStats> {
        let codes: Vec<ClassCode> = self.recent.iter().copied().collect();
        WindowStats::from_codes(codes.len(), &codes)
    }

    /// The recorded symbols, oldest first.
    pub fn recorded_codes(&self) -> Vec<ClassCode> {
        self.recent.iter().copied().collect()
    }
}

/// Minimum acceptable operation-time extension, in symbols or as a
/// percentage of the symbols transmitted so far.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtensionThreshold {
    Symbols(f64),
    PercentOfRuntime(f64),
}

impl ExtensionThreshold {
    /// The threshold in symbols at a given point of the run.
    pub fn in_symbols(&self, transmitted_so_far: u64) -> f64 {
        match *self {
            ExtensionThreshold::Symbols(e) => e,
            ExtensionThreshold::PercentOfRuntime(pct) => pct / 100.0 * transmitted_so_far as f64,
        }
    }
}

/// Parameters of the update protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdatePolicy {
    /// Depletion checks run every `window` transmitted symbols.
    pub window: usize,
    /// Updates below this projected extension end the run instead.
    pub min_extension: ExtensionThreshold,
    /// Silent intervals framing the announcement on each side.
    pub silence_len: usize,
    /// Announcement repeats; odd so per-dimension majority is well defined.
    pub repeat: usize,
}

impl UpdatePolicy {
    pub fn new(
        window: usize,
        min_extension: ExtensionThreshold,
        silence_len: usize,
        repeat: usize,
    ) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidInput("window must be >= 1".into()));
        }
        if silence_len == 0 {
            return Err(Error::InvalidInput("silence_len must be >= 1".into()));
        }
        if repeat == 0 || repeat % 2 == 0 {
            return Err(Error::InvalidInput(format!(
                "repeat count {repeat} must be odd"
            )));
        }
        let e = match min_extension {
            ExtensionThreshold::Symbols(e) => e,
            ExtensionThreshold::PercentOfRuntime(e) => e,
        };
        if !(e >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "minimum extension {e} must be >= 0"
            )));
        }
        Ok(Self {
            window,
            min_extension,
            silence_len,
            repeat,
        })
    }
}

/// What the transmitter emits in one interval of the announcement schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnnouncementSlot {
    Silence,
    /// The class carrying the new bit counts, coded under the old allocation.
    Announce(ClassCode),
}

/// The full on-air schedule informing the receiver of an update:
/// `silence_len` silences, `repeat` announcement symbols, `silence_len`
/// silences.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateAnnouncement {
    pub code: ClassCode,
    pub silence_len: usize,
    pub repeat: usize,
}

impl UpdateAnnouncement {
    pub fn slots(&self) -> Vec<AnnouncementSlot> {
        let mut slots = Vec::with_capacity(2 * self.silence_len + self.repeat);
        slots.extend(std::iter::repeat_n(
            AnnouncementSlot::Silence,
            self.silence_len,
        ));
        slots.extend(std::iter::repeat_n(
            AnnouncementSlot::Announce(self.code),
            self.repeat,
        ));
        slots.extend(std::iter::repeat_n(
            AnnouncementSlot::Silence,
            self.silence_len,
        ));
        slots
    }

    pub fn len(&self) -> usize {
        2 * self.silence_len + self.repeat
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// True when some class's recent frequency, projected over the next window,
/// exceeds its remaining supply — i.e. the bank cannot promise another
/// `N` symbols of the same mix.
pub fn needs_update(bank: &OdorBank, stats: &WindowStats, per_symbol_mass: f64) -> Result<bool> {
    let total: u64 = stats.counts().map(|(_, n)| n).sum();
    if total != stats.window() as u64 {
        return Err(Error::InvalidInput(format!(
            "window stats incomplete: {total} of {} symbols",
            stats.window()
        )));
    }
    if !(per_symbol_mass > 0.0) {
        return Err(Error::InvalidInput(
            "per-symbol mass must be positive".into(),
        ));
    }
    for (code, count) in stats.counts() {
        if count == 0 {
            continue;
        }
        let projected_need = count as f64 * per_symbol_mass;
        if projected_need > bank.remaining_mass(code) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// The three single-bit reductions of an allocation, in dimension order,
/// dropping any that would go negative. `K = 1` has no candidates: the
/// update loop terminates there.
pub fn candidate_allocations(a: &BitAllocation) -> Result<Vec<BitAllocation>> {
    if a.k() < 2 {
        return Err(Error::InvalidInput(
            "allocation already at 1 bit per symbol; no update possible".into(),
        ));
    }
    let mut out = Vec::new();
    if a.n_p() >= 1 {
        out.push(BitAllocation::new(a.n_p() - 1, a.n_i(), a.n_e())?);
    }
    if a.n_i() >= 1 {
        out.push(BitAllocation::new(a.n_p(), a.n_i() - 1, a.n_e())?);
    }
    if a.n_e() >= 1 {
        out.push(BitAllocation::new(a.n_p(), a.n_i(), a.n_e() - 1)?);
    }
    Ok(out)
}

/// Where a class code lands after one allocation step: halving a dimension's
/// class count merges index `k` into `k / 2` (the coarser thresholds are a
/// subset of the finer ones).
pub fn project_code(code: &ClassCode, old_a: &BitAllocation, new_a: &BitAllocation) -> ClassCode {
    let map = |dim: Dimension, idx: u16| -> u16 {
        let drop = old_a.bits(dim) - new_a.bits(dim);
        idx >> drop
    };
    ClassCode::new(
        map(Dimension::Pleasantness, code.p),
        map(Dimension::Intensity, code.i),
        map(Dimension::Edibility, code.e),
    )
}

/// Projects the bank's supply and the window's demand onto a candidate
/// allocation and returns the expected number of further symbols before the
/// first merged class runs dry, assuming the recent mix persists.
///
/// Merged classes with zero recent frequency impose no limit; a class with
/// positive frequency and zero pooled mass returns 0.
pub fn estimate_extension(
    bank: &OdorBank,
    stats: &WindowStats,
    cand: &BitAllocation,
    per_symbol_mass: f64,
) -> Result<f64> {
    if !(per_symbol_mass > 0.0) {
        return Err(Error::InvalidInput(
            "per-symbol mass must be positive".into(),
        ));
    }
    let old_a = bank.allocation();
    let mut pooled_mass: BTreeMap<ClassCode, f64> = BTreeMap::new();
    for (code, list) in bank.capsules() {
        let merged = project_code(code, old_a, cand);
        *pooled_mass.entry(merged).or_insert(0.0) +=
            list.iter().map(|o| o.remaining_mass()).sum::<f64>();
    }
    let mut merged_counts: BTreeMap<ClassCode, u64> = BTreeMap::new();
    for (code, count) in stats.counts() {
        *merged_counts
            .entry(project_code(code, old_a, cand))
            .or_insert(0) += count;
    }

    let n = stats.window() as f64;
    let mut extension = f64::INFINITY;
    for (merged, count) in merged_counts {
        if count == 0 {
            continue;
        }
        let supply = pooled_mass.get(&merged).copied().unwrap_or(0.0);
        let consumption_per_symbol = count as f64 / n * per_symbol_mass;
        extension = extension.min(supply / consumption_per_symbol);
    }
    if extension.is_infinite() {
        // The window recorded no symbols at all; nothing constrains the run.
        return Err(Error::InvalidInput("window stats are empty".into()));
    }
    Ok(extension)
}

/// Picks the candidate with the greatest projected extension if it clears
/// the threshold `e`; `None` means the system should end instead. Ties keep
/// the earliest candidate.
pub fn choose_update(extensions: &[(BitAllocation, f64)], e: f64) -> Option<BitAllocation> {
    let (best, t_max) =
        extensions
            .iter()
            .fold((None, f64::NEG_INFINITY), |(best, t_max), (cand, t)| {
                if *t > t_max {
                    (Some(*cand), *t)
                } else {
                    (best, t_max)
                }
            });
    if t_max >= e {
        best
    } else {
        None
    }
}

/// Re-keys every capsule under the reduced allocation; merged classes hold
/// the union of their sources' capsules with masses untouched.
pub fn reinitialize_bank(bank: OdorBank, new_a: BitAllocation) -> Result<OdorBank> {
    let old_a = *bank.allocation();
    let drop: u32 = DIMENSIONS
        .iter()
        .map(|&d| old_a.bits(d).checked_sub(new_a.bits(d)).unwrap_or(u32::MAX))
        .sum();
    let valid = DIMENSIONS.iter().all(|&d| new_a.bits(d) <= old_a.bits(d)) && drop == 1;
    if !valid {
        return Err(Error::InvalidInput(format!(
            "re-initialization must drop exactly one bit from one dimension \
             ({old_a} -> {new_a})"
        )));
    }
    let mut merged: BTreeMap<ClassCode, Vec<_>> = BTreeMap::new();
    for (_, odors) in bank.into_capsules() {
        for odor in odors {
            let key = classify(&odor.vector, &new_a);
            merged.entry(key).or_default().push(odor);
        }
    }
    for list in merged.values_mut() {
        list.sort_by_key(|o| o.id);
    }
    OdorBank::from_parts(new_a, merged)
}

/// Builds the silence-framed announcement of a new allocation. The new
/// per-dimension bit counts travel as class indices under the old coding, so
/// each must be a representable class index there.
pub fn announce_update(
    new_a: &BitAllocation,
    old_a: &BitAllocation,
    policy: &UpdatePolicy,
) -> Result<UpdateAnnouncement> {
    let indices = [new_a.n_p(), new_a.n_i(), new_a.n_e()];
    for (&dim, &idx) in DIMENSIONS.iter().zip(&indices) {
        if idx >= u32::from(old_a.classes(dim)) {
            return Err(Error::InvalidInput(format!(
                "new bit count {idx} for {dim:?} is not a class index under {old_a}"
            )));
        }
    }
    Ok(UpdateAnnouncement {
        code: ClassCode::new(indices[0] as u16, indices[1] as u16, indices[2] as u16),
        silence_len: policy.silence_len,
        repeat: policy.repeat,
    })
}

/// Recovers the announced allocation from the decoded repeats: independent
/// per-dimension majority (ties toward the smaller index), tolerating up to
/// `(R-1)/2` symbol errors per dimension.
pub fn receiver_apply_update(decoded: &[ClassCode]) -> Result<BitAllocation> {
    if decoded.is_empty() {
        return Err(Error::InvalidInput(
            "no announcement symbols decoded".into(),
        ));
    }
    let majority = |dim: Dimension| -> u16 {
        let mut votes: BTreeMap<u16, usize> = BTreeMap::new();
        for code in decoded {
            *votes.entry(code.index(dim)).or_insert(0) += 1;
        }
        votes
            .into_iter()
            .max_by(|(va, ca), (vb, cb)| ca.cmp(cb).then(vb.cmp(va)))
            .map(|(v, _)| v)
            .unwrap_or(0)
    };
    BitAllocation::new(
        u32::from(majority(Dimension::Pleasantness)),
        u32::from(majority(Dimension::Intensity)),
        u32::from(majority(Dimension::Edibility)),
    )
}
