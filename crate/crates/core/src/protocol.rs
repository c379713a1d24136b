//! Alice's side of the interactive and one-shot protocols, the Monte-Carlo
//! harness and the comparison of empirical rates against the bounds.
//!
//! The channel is an in-process hand-over of state values: Alice passes a
//! [`PureState`](crate::qcore::PureState) to the attack, the attack hands one back. Nothing quantum is
//! ever serialized.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{AttackRecord, AttackReport, AttackSpec, AttackStrategy};
use crate::bounds::{detection_bound, fidelity_bound};
use crate::decoys::{prepare_pool, read_result, HonestIsometry, PoolItem, Verdict, VerificationMeasurement};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};
use crate::rvf::{RvfInstance, RvfKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// One state per round; Alice may stop after a failed check.
    Interactive,
    /// The whole pool is sent at once and checked when everything is back.
    Noninteractive,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProtocolConfig {
    pub rvf: RvfKind,
    pub decoys: usize,
    pub variant: Variant,
    pub announce_position: bool,
    pub stop_on_detect: bool,
    pub seed: u64,
}

impl ProtocolConfig {
    /// Defaults: the position is announced; Alice stops at the first failed
    /// check in the interactive variant only.
    pub fn new(rvf: RvfKind, decoys: usize, variant: Variant, seed: u64) -> Self {
        Self {
            rvf,
            decoys,
            variant,
            announce_position: true,
            stop_on_detect: variant == Variant::Interactive,
            seed,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    TrueInput,
    Decoy,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub item_kind: ItemKind,
    pub verification: Verdict,
    pub adversary_record: AttackRecord,
}

/// One protocol execution. Only rounds that were actually played appear in
/// `rounds`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Transcript {
    pub rounds: Vec<RoundRecord>,
    pub detected: bool,
    pub detection_round: Option<usize>,
    pub true_position: usize,
    pub true_input: usize,
    pub result: Option<usize>,
    /// The true-input register came back as `x` and the output verifies.
    pub result_verified: bool,
    pub adversary_guess: Option<usize>,
    /// The true input was handed to Bob.
    pub x_exposed: bool,
}

impl Transcript {
    pub fn decoys_checked(&self) -> usize {
        self.rounds
            .iter()
            .filter(|r| r.verification != Verdict::NotApplicable)
            .count()
    }
}

fn check_variant(cfg: &ProtocolConfig, variant: Variant) -> Result<()> {
    if cfg.variant != variant {
        return Err(Error::InvalidParameter(format!(
            "configuration is for the {:?} variant",
            cfg.variant
        )));
    }
    Ok(())
}

/// Interactive execution: one pooled state per round, checked on return.
pub fn run_interactive(
    cfg: &ProtocolConfig,
    instance: &RvfInstance,
    attack: &mut dyn AttackStrategy,
    trial: u64,
) -> Result<Transcript> {
    check_variant(cfg, Variant::Interactive)?;
    execute(cfg, instance, attack, trial)
}

/// One-shot execution. Bob receives the whole permuted pool and returns all
/// registers; Alice then checks every decoy and reads `f(x)`.
///
/// Alice's checks act on registers Bob no longer touches, so they commute
/// with everything Bob does afterwards. The simulation therefore measures
/// each register as soon as the attack releases it; the joint outcome
/// distribution is the same as measuring at the end.
pub fn run_noninteractive(
    cfg: &ProtocolConfig,
    instance: &RvfInstance,
    attack: &mut dyn AttackStrategy,
    trial: u64,
) -> Result<Transcript> {
    check_variant(cfg, Variant::Noninteractive)?;
    execute(cfg, instance, attack, trial)
}

/// Runs whichever variant `cfg` names.
pub fn run_trial(
    cfg: &ProtocolConfig,
    instance: &RvfInstance,
    attack: &mut dyn AttackStrategy,
    trial: u64,
) -> Result<Transcript> {
    execute(cfg, instance, attack, trial)
}

fn execute(
    cfg: &ProtocolConfig,
    instance: &RvfInstance,
    attack: &mut dyn AttackStrategy,
    trial: u64,
) -> Result<Transcript> {
    let mut alice = stream(cfg.seed, trial, Stream::Alice);
    let mut bob = stream(cfg.seed, trial, Stream::Bob);
    let mut lab = stream(cfg.seed, trial, Stream::Harness);

    let n = instance.domain_size();
    let m = instance.output_size();
    let x = instance.encode(&instance.sample(&mut alice).input)?;
    let pairs: Vec<_> = (0..2 * cfg.decoys).map(|_| instance.sample(&mut alice)).collect();
    let pool = prepare_pool(instance, x, cfg.decoys, &pairs, &mut alice)?;
    let iso = HonestIsometry::for_instance(instance);
    let aborts = cfg.variant == Variant::Interactive && cfg.stop_on_detect;

    let mut rounds = Vec::with_capacity(pool.items().len());
    let mut detection_round = None;
    let mut result = None;
    let mut result_verified = false;
    for (round, item) in pool.items().iter().enumerate() {
        let sent = item.state(n)?;
        let reply = attack.intercept(round, sent, &mut bob)?;
        let a = reply.ancilla_dim;
        if a == 0 || reply.returned.dim() != n * a {
            return Err(Error::DimensionMismatch {
                expected: n * a.max(1),
                found: reply.returned.dim(),
            });
        }
        let computed = iso.apply(&reply.returned, a)?;
        let (kind, verification, ancilla) = match item {
            PoolItem::Decoy { .. } => {
                let check = VerificationMeasurement::for_item(item, n, m)?;
                let (verdict, ancilla) = check.measure(&computed, a, &mut lab)?;
                (ItemKind::Decoy, verdict, ancilla)
            }
            PoolItem::TrueInput { x } => {
                let read = read_result(&computed, *x, m, a, &mut lab)?;
                result = Some(read.output);
                result_verified = read.input_check && instance.verify_indices(*x, read.output)?;
                (ItemKind::TrueInput, Verdict::NotApplicable, read.ancilla)
            }
        };
        if let Some(state) = ancilla {
            attack.absorb_ancilla(state);
        }
        rounds.push(RoundRecord {
            round,
            item_kind: kind,
            verification,
            adversary_record: reply.record,
        });
        if verification == Verdict::Tampered && detection_round.is_none() {
            detection_round = Some(round);
            if aborts {
                break;
            }
        }
    }

    let detected = detection_round.is_some();
    if detected && cfg.stop_on_detect {
        // a detected run yields no trusted result
        result = None;
        result_verified = false;
    }
    let p = pool.true_position();
    let announced = cfg.announce_position.then_some(p);
    let adversary_guess = attack.finish(announced, rounds.len(), &mut bob);
    Ok(Transcript {
        x_exposed: p < rounds.len(),
        rounds,
        detected,
        detection_round,
        true_position: p,
        true_input: x,
        result,
        result_verified,
        adversary_guess,
    })
}

/// A rate and its binomial standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn from_counts(hits: usize, trials: usize) -> Self {
        let mean = hits as f64 / trials as f64;
        Self {
            mean,
            se: (mean * (1.0 - mean) / trials as f64).sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunStats {
    pub trials: usize,
    pub n: usize,
    pub decoys: usize,
    pub attack: String,
    pub detection: Estimate,
    pub guess_success: Estimate,
    /// Plug-in mutual information between `x` and Bob's guess, conditioned
    /// on the announced position and averaged over positions.
    pub mutual_info_bits: f64,
    /// Upper allowance for the plug-in estimator's positive bias.
    pub mi_bias_allowance: f64,
    pub x_exposed_rate: f64,
    pub result_verified_rate: f64,
    pub mean_decoys_checked: f64,
    /// `survival_by_round[k]`: fraction of trials with no failed check among
    /// the first `k` rounds, `k = 0..=N+1`.
    pub survival_by_round: Vec<f64>,
    /// How often the true input sat at each position.
    pub position_counts: Vec<usize>,
}

#[derive(Clone, Copy, Debug)]
struct TrialSummary {
    detection_round: Option<usize>,
    position: usize,
    x: usize,
    guess: Option<usize>,
    x_exposed: bool,
    result_verified: bool,
    decoys_checked: usize,
}

impl From<&Transcript> for TrialSummary {
    fn from(t: &Transcript) -> Self {
        Self {
            detection_round: t.detection_round,
            position: t.true_position,
            x: t.true_input,
            guess: t.adversary_guess,
            x_exposed: t.x_exposed,
            result_verified: t.result_verified,
            decoys_checked: t.decoys_checked(),
        }
    }
}

/// Independent trials with per-trial streams, run in parallel; the result
/// does not depend on the number of worker threads.
pub fn monte_carlo(cfg: &ProtocolConfig, attack: &AttackSpec, trials: usize) -> Result<RunStats> {
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is needed".into()));
    }
    let instance = RvfInstance::new(cfg.rvf)?;
    let prototype = attack.build(instance.domain_size())?;
    monte_carlo_with(cfg, &instance, prototype.as_ref(), trials)
}

/// [`monte_carlo`] with a prebuilt instance and strategy prototype.
pub fn monte_carlo_with(
    cfg: &ProtocolConfig,
    instance: &RvfInstance,
    prototype: &dyn AttackStrategy,
    trials: usize,
) -> Result<RunStats> {
    if trials == 0 {
        return Err(Error::InvalidParameter("at least one trial is needed".into()));
    }
    let summaries = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut attack = prototype.fresh();
            run_trial(cfg, instance, attack.as_mut(), t).map(|tr| TrialSummary::from(&tr))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(cfg, instance.domain_size(), prototype.name(), &summaries))
}

fn aggregate(cfg: &ProtocolConfig, n: usize, attack: String, s: &[TrialSummary]) -> RunStats {
    let trials = s.len();
    let slots = cfg.decoys + 1;
    let detected = s.iter().filter(|t| t.detection_round.is_some()).count();
    let correct = s.iter().filter(|t| t.guess == Some(t.x)).count();
    let mut position_counts = vec![0; slots];
    for t in s {
        position_counts[t.position] += 1;
    }
    let survival_by_round = (0..=slots)
        .map(|k| {
            let alive = s
                .iter()
                .filter(|t| t.detection_round.is_none_or(|d| d >= k))
                .count();
            alive as f64 / trials as f64
        })
        .collect();
    let (mutual_info_bits, mi_bias_allowance) = plug_in_information(cfg.announce_position, n, slots, s);
    let rate = |f: &dyn Fn(&TrialSummary) -> bool| s.iter().filter(|t| f(t)).count() as f64 / trials as f64;
    RunStats {
        trials,
        n,
        decoys: cfg.decoys,
        attack,
        detection: Estimate::from_counts(detected, trials),
        guess_success: Estimate::from_counts(correct, trials),
        mutual_info_bits,
        mi_bias_allowance,
        x_exposed_rate: rate(&|t| t.x_exposed),
        result_verified_rate: rate(&|t| t.result_verified),
        mean_decoys_checked: s.iter().map(|t| t.decoys_checked as f64).sum::<f64>() / trials as f64,
        survival_by_round,
        position_counts,
    }
}

/// Plug-in estimate of `I(x; guess | position)` and its bias allowance
/// `Σ_p w_p (k + 4√(2k)) / (2 T_p ln 2)` with `k = (n − 1)²`: the mean of the
/// estimator's asymptotic χ² law plus four standard deviations, per group.
fn plug_in_information(by_position: bool, n: usize, slots: usize, s: &[TrialSummary]) -> (f64, f64) {
    let groups = if by_position { slots } else { 1 };
    // sparse: the domain can be far larger than the trial count
    let mut joint: Vec<BTreeMap<(usize, usize), usize>> = vec![BTreeMap::new(); groups];
    for t in s {
        if let Some(g) = t.guess {
            let key = if by_position { t.position } else { 0 };
            *joint[key].entry((t.x, g)).or_default() += 1;
        }
    }
    let all: usize = joint.iter().flat_map(|j| j.values()).sum();
    if all == 0 {
        return (0.0, 0.0);
    }
    let k = ((n - 1) * (n - 1)) as f64;
    let mut info = 0.0;
    let mut bias = 0.0;
    for cells in &joint {
        let total: usize = cells.values().sum();
        if total == 0 {
            continue;
        }
        let t = total as f64;
        let mut rows: BTreeMap<usize, f64> = BTreeMap::new();
        let mut cols: BTreeMap<usize, f64> = BTreeMap::new();
        for (&(x, g), &c) in cells {
            *rows.entry(x).or_default() += c as f64;
            *cols.entry(g).or_default() += c as f64;
        }
        let i_group: f64 = cells
            .iter()
            .map(|(&(x, g), &c)| {
                let c = c as f64;
                c / t * (c * t / (rows[&x] * cols[&g])).log2()
            })
            .sum();
        let w = t / all as f64;
        info += w * i_group.max(0.0);
        bias += w * (k + 4.0 * (2.0 * k).sqrt()) / (2.0 * t * std::f64::consts::LN_2);
    }
    (info, bias)
}

/// Survival check for one prefix of rounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RoundCheck {
    pub rounds: usize,
    pub survival: f64,
    pub bound: f64,
    pub ok: bool,
}

/// Verdicts of [`compare_to_bound`]. Each check allows four standard errors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundCheck {
    /// Estimation fidelity fed to the bounds: exact when the attack has a
    /// Kraus form, otherwise the empirical guess rate.
    pub g_used: f64,
    pub g_exact: bool,
    pub f_bound: f64,
    /// `1 − D ≤ F(G)^N`.
    pub survival_ok: bool,
    pub survival_margin: f64,
    /// `D ≥ 1 − F(2^(I − log₂ n))^N` with `I` lowered by the bias allowance.
    pub detection_ok: bool,
    pub detection_floor: f64,
    pub detection_margin: f64,
    /// `I ≤ log₂ n + log₂ G`.
    pub information_ok: bool,
    /// Prefix survival against the per-round product, for attacks that act
    /// on each round separately.
    pub per_round: Option<Vec<RoundCheck>>,
    pub pass: bool,
}

const SLACK: f64 = 1e-12;

pub fn compare_to_bound(stats: &RunStats, report: Option<&AttackReport>, individual: bool) -> Result<BoundCheck> {
    let n = stats.n;
    let nf = n as f64;
    let trials = stats.trials as f64;
    let (g_used, g_exact) = match report {
        Some(r) => (r.g, true),
        None => (stats.guess_success.mean, false),
    };
    let g_used = g_used.clamp(1.0 / nf, 1.0);
    let f_bound = fidelity_bound(g_used, n)?;
    let d = stats.detection;

    let survival_margin = f_bound.powi(stats.decoys as i32) - (1.0 - d.mean);
    let survival_ok = survival_margin >= -4.0 * d.se - SLACK;

    let info = (stats.mutual_info_bits - stats.mi_bias_allowance).clamp(0.0, nf.log2());
    let detection_floor = detection_bound(info, n, stats.decoys)?;
    let detection_margin = d.mean - detection_floor;
    let detection_ok = detection_margin >= -4.0 * d.se - SLACK;

    let g = stats.guess_success;
    let g_hi = (g.mean + 4.0 * g.se).min(1.0);
    let information_ok = g_hi <= 0.0
        || stats.mutual_info_bits <= nf.log2() + g_hi.log2() + stats.mi_bias_allowance + SLACK;

    let per_round = individual.then(|| {
        let slots = stats.decoys + 1;
        (1..=slots)
            .map(|k| {
                // among the first k rounds there are k decoys unless the true input is one of them
                let before = stats.position_counts[..k].iter().sum::<usize>() as f64 / trials;
                let bound = (1.0 - before) * f_bound.powi(k as i32) + before * f_bound.powi(k as i32 - 1);
                let survival = stats.survival_by_round[k];
                let se = (survival * (1.0 - survival) / trials).sqrt();
                RoundCheck {
                    rounds: k,
                    survival,
                    bound,
                    ok: survival <= bound + 4.0 * se + SLACK,
                }
            })
            .collect::<Vec<_>>()
    });
    let per_round_ok = per_round.as_ref().is_none_or(|v| v.iter().all(|c| c.ok));
    Ok(BoundCheck {
        g_used,
        g_exact,
        f_bound,
        survival_ok,
        survival_margin,
        detection_ok,
        detection_floor,
        detection_margin,
        information_ok,
        pass: survival_ok && detection_ok && information_ok && per_round_ok,
        per_round,
    })
}
