//! Full adaptive link simulation: the transmitter's depletion-check /
//! announce / re-initialize loop and the receiver's silence-framed recovery,
//! wired through the noisy channel and the cube absorber.
//!
//! The receiver sees only absorbed samples. Intervals whose greatest mass
//! falls under the silence threshold are excluded from payload decoding;
//! a full run of them arms the update listener, which majority-votes the
//! repeated announcement and re-keys its decoder after the closing silence.

use std::collections::{BTreeMap, VecDeque};

use crate::adaptive::{
    announce_update, candidate_allocations, choose_update, estimate_extension, needs_update,
    receiver_apply_update, reinitialize_bank, AnnouncementSlot, SymbolWindow, UpdateAnnouncement,
    UpdatePolicy, WindowStats,
};
use crate::channel::{sample_flow, ReleaseEvent};
use crate::perceptual::{
    bits_to_class, class_to_bits, BitAllocation, ClassCode, OdorBank, OdorId, PerceptualVector,
};
use crate::receiver::{
    decode_received, demodulate, detect_silence, mass_ratio, release_contribution,
    select_greatest_mass, AbsorptionResult, ProcessorModel, TimingPlan,
};
use crate::sim::ScenarioConfig;
use crate::{Error, Result};

/// Parameters of one adaptive link run. The scenario supplies geometry,
/// channel, noise, quality, release mass, and timing; `n_symbols` is unused
/// (the payload length drives the run).
#[derive(Debug, Clone)]
pub struct LinkConfig {
    pub scenario: ScenarioConfig,
    pub policy: UpdatePolicy,
    /// Initial mass per capsule, kg.
    pub per_capsule_mass: f64,
    /// Silence threshold `M_T`; defaults to one tenth of the expected
    /// absorbed mass of a fresh release.
    pub silence_threshold: Option<f64>,
}

/// Why the transmitter stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EndReason {
    /// Fewer payload bits left than bits per symbol.
    PayloadExhausted,
    /// The next symbol's class could not supply a full release.
    BankDepleted,
    /// A depletion check fired but no candidate cleared the threshold, or
    /// the allocation was already at one bit per symbol.
    NoViableUpdate,
}

/// Everything observable from one link run.
#[derive(Debug, Clone)]
pub struct LinkReport {
    /// Payload bits actually encoded into released symbols.
    pub sent_bits: Vec<bool>,
    /// Payload bits recovered by the receiver (signaling excised).
    pub decoded_bits: Vec<bool>,
    pub updates_announced: usize,
    pub updates_recovered: usize,
    pub payload_symbols: u64,
    pub intervals: u64,
    pub final_tx_allocation: BitAllocation,
    pub final_rx_allocation: BitAllocation,
    pub end_reason: EndReason,
}

enum TxState {
    Payload,
    Announcing {
        slots: VecDeque<AnnouncementSlot>,
        odor: OdorId,
    },
}

/// Scores the update candidates against `stats`; `None` means the system
/// ends (allocation already minimal, or nothing clears the threshold).
fn plan_update(
    bank: &OdorBank,
    alloc: &BitAllocation,
    stats: &WindowStats,
    threshold: f64,
    policy: &UpdatePolicy,
    per_symbol_mass: f64,
) -> Result<Option<(BitAllocation, UpdateAnnouncement, OdorId)>> {
    if alloc.k() < 2 {
        return Ok(None);
    }
    let cands = candidate_allocations(alloc)?;
    let mut scored = Vec::with_capacity(cands.len());
    for cand in cands {
        scored.push((
            cand,
            estimate_extension(bank, stats, &cand, per_symbol_mass)?,
        ));
    }
    let Some(new_a) = choose_update(&scored, threshold) else {
        return Ok(None);
    };
    let announcement = announce_update(&new_a, alloc, policy)?;
    // The announcement rides on the odor that represented the announced
    // class under the outgoing coding.
    let odor = bank
        .best_capsule(&announcement.code)
        .map(|o| o.id)
        .ok_or_else(|| {
            Error::Depleted(format!(
                "no capsule represents announcement class {}",
                announcement.code
            ))
        })?;
    Ok(Some((new_a, announcement, odor)))
}

enum RxState {
    Steady {
        silence_run: usize,
    },
    Collect {
        codes: Vec<ClassCode>,
    },
    EndWait {
        staged: BitAllocation,
        silence_run: usize,
    },
}

struct Receiver {
    allocation: BitAllocation,
    state: RxState,
    decoded_bits: Vec<bool>,
    updates_recovered: usize,
}

impl Receiver {
    fn new(allocation: BitAllocation) -> Self {
        Self {
            allocation,
            state: RxState::Steady { silence_run: 0 },
            decoded_bits: Vec::new(),
            updates_recovered: 0,
        }
    }

    fn on_silence(&mut self, silence_len: usize) -> Result<()> {
        self.state = match std::mem::replace(&mut self.state, RxState::Steady { silence_run: 0 }) {
            RxState::Steady { silence_run } => RxState::Steady {
                silence_run: silence_run + 1,
            },
            // A dropped announcement symbol reads as early end silence;
            // finalize on what arrived.
            RxState::Collect { codes } => RxState::EndWait {
                staged: receiver_apply_update(&codes)?,
                silence_run: 1,
            },
            RxState::EndWait {
                staged,
                silence_run,
            } => {
                if silence_run + 1 >= silence_len {
                    self.allocation = staged;
                    self.updates_recovered += 1;
                    RxState::Steady { silence_run: 0 }
                } else {
                    RxState::EndWait {
                        staged,
                        silence_run: silence_run + 1,
                    }
                }
            }
        };
        Ok(())
    }

    fn on_symbol(&mut self, code: ClassCode, policy: &UpdatePolicy) -> Result<()> {
        self.state = match std::mem::replace(&mut self.state, RxState::Steady { silence_run: 0 }) {
            RxState::Steady { silence_run } => {
                if silence_run >= policy.silence_len {
                    // First announcement symbol after the opening silence.
                    let codes = vec![code];
                    if codes.len() == policy.repeat {
                        RxState::EndWait {
                            staged: receiver_apply_update(&codes)?,
                            silence_run: 0,
                        }
                    } else {
                        RxState::Collect { codes }
                    }
                } else {
                    self.decoded_bits
                        .extend(class_to_bits(&code, &self.allocation)?);
                    RxState::Steady { silence_run: 0 }
                }
            }
            RxState::Collect { mut codes } => {
                codes.push(code);
                if codes.len() == policy.repeat {
                    RxState::EndWait {
                        staged: receiver_apply_update(&codes)?,
                        silence_run: 0,
                    }
                } else {
                    RxState::Collect { codes }
                }
            }
            // A symbol during the end silence means the closing frame was
            // cut short; adopt the staged allocation and decode as payload.
            RxState::EndWait { staged, .. } => {
                self.allocation = staged;
                self.updates_recovered += 1;
                self.decoded_bits
                    .extend(class_to_bits(&code, &self.allocation)?);
                RxState::Steady { silence_run: 0 }
            }
        };
        Ok(())
    }
}

/// Runs the adaptive protocol over `payload` until the bits run out, the
/// bank cannot fill a release, or no viable update remains.
pub fn run_adaptive_link(cfg: &LinkConfig, payload: &[bool]) -> Result<LinkReport> {
    let scenario = &cfg.scenario;
    scenario.validate()?;
    if !(cfg.per_capsule_mass > 0.0) {
        return Err(Error::InvalidInput(
            "per-capsule mass must be positive".into(),
        ));
    }
    let geom = scenario.geometry()?;
    let diff = scenario.diffusion;
    let mean_flow = scenario.mean_flow();
    let flow_model = scenario.flow_model()?;
    let proc = ProcessorModel::new(scenario.pn)?;

    let t_a = scenario.plan_absorption_time()?;
    let plan = TimingPlan::new(t_a, scenario.m_ratio)?;
    let expected_ratio = mass_ratio(&geom, mean_flow, &diff, t_a)?;
    let m_t = match cfg.silence_threshold {
        Some(v) if v > 0.0 => v,
        Some(v) => {
            return Err(Error::InvalidInput(format!(
                "silence threshold {v} must be positive"
            )))
        }
        None => 0.1 * scenario.mass * expected_ratio,
    };
    let retire_below = (1e-18f64).min(1e-3 * scenario.mass * expected_ratio);

    let mut bank_rng = crate::sim::stream(scenario.seed, 0);
    let mut bank = OdorBank::generate(
        scenario.allocation,
        scenario.quality,
        cfg.per_capsule_mass,
        &mut bank_rng,
    )?;
    // The receiver's processor measures physical odors; identities and
    // vectors never change, so snapshot them once.
    let odor_vectors: BTreeMap<OdorId, PerceptualVector> = bank
        .capsules()
        .flat_map(|(_, list)| list.iter().map(|o| (o.id, o.vector)))
        .collect();

    let mut flow_rng = crate::sim::stream(scenario.seed, 2);
    let mut demod_rng = crate::sim::stream(scenario.seed, 3);

    let mut tx_alloc = scenario.allocation;
    let mut tx_state = TxState::Payload;
    let mut window = SymbolWindow::new(cfg.policy.window);
    let mut since_update = 0u64;
    let mut payload_symbols = 0u64;
    let mut updates_announced = 0usize;
    let mut sent_bits: Vec<bool> = Vec::new();
    let mut bit_cursor = 0usize;
    let mut end_reason: Option<EndReason> = None;

    let mut rx = Receiver::new(scenario.allocation);

    struct Cloud {
        event: ReleaseEvent,
        last: Option<f64>,
    }
    let mut clouds: Vec<Cloud> = Vec::new();
    let mut interval = 0u64;
    let max_intervals = payload.len() as u64 * 4 + 10_000;

    loop {
        interval += 1;
        if interval > max_intervals {
            return Err(Error::InvalidInput(
                "adaptive link failed to terminate within its interval budget".into(),
            ));
        }

        // Transmitter action for this interval. A depletion hit inside the
        // payload arm switches to announcing and re-runs the action, so the
        // announcement's opening silence occupies this interval.
        let mut check_update = false;
        'action: loop {
            match &mut tx_state {
                TxState::Announcing { slots, odor } => {
                    let odor = *odor;
                    let slot = slots.pop_front().expect("announcement slots are non-empty");
                    if let AnnouncementSlot::Announce(_) = slot {
                        let got = bank.withdraw_from(odor, scenario.mass)?;
                        if got < scenario.mass {
                            return Err(Error::Depleted(
                                "announcement capsule cannot fill a release".into(),
                            ));
                        }
                        clouds.push(Cloud {
                            event: ReleaseEvent::new(odor, scenario.mass, interval)?,
                            last: None,
                        });
                    }
                    if slots.is_empty() {
                        tx_state = TxState::Payload;
                    }
                    break 'action;
                }
                TxState::Payload => {
                    let k = tx_alloc.k() as usize;
                    if payload.len() - bit_cursor < k {
                        end_reason = Some(EndReason::PayloadExhausted);
                        break 'action;
                    }
                    let bits = &payload[bit_cursor..bit_cursor + k];
                    let code = bits_to_class(bits, &tx_alloc)?;
                    let supply = bank
                        .best_capsule(&code)
                        .map(|o| o.remaining_mass())
                        .unwrap_or(0.0);
                    if supply < scenario.mass {
                        // Unable to transmit: the update state fires now.
                        // The pending symbol joins the stats so candidates
                        // are scored on refilling its class.
                        let mut recent = window.recorded_codes();
                        recent.push(code);
                        let stats = WindowStats::from_codes(recent.len(), &recent)?;
                        let threshold = cfg.policy.min_extension.in_symbols(payload_symbols);
                        match plan_update(
                            &bank,
                            &tx_alloc,
                            &stats,
                            threshold,
                            &cfg.policy,
                            scenario.mass,
                        )? {
                            None => {
                                end_reason = Some(EndReason::BankDepleted);
                                break 'action;
                            }
                            Some((new_a, announcement, odor)) => {
                                bank = reinitialize_bank(bank, new_a)?;
                                tx_alloc = new_a;
                                tx_state = TxState::Announcing {
                                    slots: announcement.slots().into(),
                                    odor,
                                };
                                window = SymbolWindow::new(cfg.policy.window);
                                since_update = 0;
                                updates_announced += 1;
                                continue 'action;
                            }
                        }
                    }
                    let (id, _) = bank.withdraw(&code, scenario.mass)?;
                    clouds.push(Cloud {
                        event: ReleaseEvent::new(id, scenario.mass, interval)?,
                        last: None,
                    });
                    bit_cursor += k;
                    sent_bits.extend_from_slice(bits);
                    payload_symbols += 1;
                    since_update += 1;
                    window.record(code);
                    check_update = since_update % cfg.policy.window as u64 == 0 && window.is_full();
                    break 'action;
                }
            }
        }
        if end_reason.is_some() {
            break;
        }

        // Channel: one flow sample carries every live cloud.
        let u = sample_flow(&flow_model, interval, &mut flow_rng);
        for cloud in &mut clouds {
            cloud.event.advance_drift(&u, plan.t_a())?;
        }

        // Receiver: absorb, silence-gate, decode.
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
        if detect_silence(&sample, m_t) {
            rx.on_silence(cfg.policy.silence_len)?;
        } else {
            let selected = select_greatest_mass(&sample)?;
            let vector = odor_vectors
                .get(&selected)
                .expect("absorbed odors originate from the bank");
            let received = demodulate(vector, &proc, &mut demod_rng);
            let code = decode_received(&received, &rx.allocation);
            rx.on_symbol(code, &cfg.policy)?;
        }

        for cloud in &mut clouds {
            cloud.event.advance_drift(&u, plan.t_s() - plan.t_a())?;
        }
        let mut idx = 0;
        clouds.retain_mut(|cloud| {
            let m = contributions[idx];
            idx += 1;
            let spent = cloud.event.elapsed() > plan.t_a()
                && m < retire_below
                && cloud.last.is_some_and(|last| m <= last);
            cloud.last = Some(m);
            !spent
        });

        // Transmitter bookkeeping: depletion check fires every full window.
        if check_update {
            let stats = window.stats()?;
            if needs_update(&bank, &stats, scenario.mass)? {
                let threshold = cfg.policy.min_extension.in_symbols(payload_symbols);
                match plan_update(
                    &bank,
                    &tx_alloc,
                    &stats,
                    threshold,
                    &cfg.policy,
                    scenario.mass,
                )? {
                    None => {
                        end_reason = Some(EndReason::NoViableUpdate);
                        break;
                    }
                    Some((new_a, announcement, odor)) => {
                        bank = reinitialize_bank(bank, new_a)?;
                        tx_alloc = new_a;
                        tx_state = TxState::Announcing {
                            slots: announcement.slots().into(),
                            odor,
                        };
                        window = SymbolWindow::new(cfg.policy.window);
                        since_update = 0;
                        updates_announced += 1;
                    }
                }
            }
        }
    }

    Ok(LinkReport {
        sent_bits,
        decoded_bits: rx.decoded_bits,
        updates_announced,
        updates_recovered: rx.updates_recovered,
        payload_symbols,
        intervals: interval - 1,
        final_tx_allocation: tx_alloc,
        final_rx_allocation: rx.allocation,
        end_reason: end_reason.expect("the run loop exits only with a reason"),
    })
}
