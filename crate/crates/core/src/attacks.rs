//! Bob's strategies, their exact single-round evaluation and a
//! derivative-free search for attacks close to the tradeoff curve.
//!
//! Attacks act on the input register before Bob's honest computation; the
//! protocol applies the honest isometry to whatever the attack returns.

use num_complex::Complex64;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::bounds::fidelity_bound;
use crate::error::{Error, Result};
use crate::qcore::{
    apply_dense, born_measure, inverse_sqrt_psd, isometry_residual, random_unitary, sample_index,
    tensor, GeneralizedMeasurement, Matrix, PureState, STRUCTURAL_TOL,
};
use crate::rng::StreamRng;

/// Largest dimension for which structured attacks expose a dense Kraus form.
pub const DENSE_KRAUS_LIMIT: usize = 64;
/// Largest joint (register ⊗ ancilla) dimension for entangling probes.
pub const MAX_PROBE_DIM: usize = 512;

/// Classical data an attack keeps about one round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct AttackRecord {
    pub outcome: Option<usize>,
}

/// What Bob hands back for one round. `returned` lives on
/// `register ⊗ ancilla` with the ancilla of dimension `ancilla_dim`
/// (1 when Bob keeps nothing entangled with the register).
#[derive(Clone, Debug)]
pub struct Interception {
    pub returned: PureState,
    pub ancilla_dim: usize,
    pub record: AttackRecord,
}

impl Interception {
    fn plain(returned: PureState, outcome: Option<usize>) -> Self {
        Self {
            returned,
            ancilla_dim: 1,
            record: AttackRecord { outcome },
        }
    }
}

/// A strategy instance plays one protocol execution.
pub trait AttackStrategy: Send + Sync {
    fn name(&self) -> String;

    /// A copy of this strategy with no per-execution memory.
    fn fresh(&self) -> Box<dyn AttackStrategy>;

    fn intercept(&mut self, round: usize, incoming: PureState, rng: &mut StreamRng) -> Result<Interception>;

    /// Receives the ancilla's state after Alice has measured the register
    /// returned in the last round.
    fn absorb_ancilla(&mut self, _ancilla: PureState) {}

    /// Bob's guess of the true input once the position is (optionally) announced.
    fn finish(&mut self, position: Option<usize>, rounds_played: usize, rng: &mut StreamRng) -> Option<usize>;

    /// Ancilla-free single-round Kraus operators, when the strategy has them.
    fn kraus_form(&self) -> Option<GeneralizedMeasurement> {
        None
    }
}

fn uniform_guess(n: usize, rng: &mut StreamRng) -> usize {
    rng.random_range(0..n)
}

fn recorded_guess(outcomes: &[Option<usize>], position: Option<usize>) -> Option<usize> {
    position.and_then(|p| outcomes.get(p).copied().flatten())
}

fn record(outcomes: &mut Vec<Option<usize>>, round: usize, outcome: usize) {
    if outcomes.len() <= round {
        outcomes.resize(round + 1, None);
    }
    outcomes[round] = Some(outcome);
}

fn check_incoming(incoming: &PureState, n: usize) -> Result<()> {
    if incoming.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: incoming.dim(),
        });
    }
    Ok(())
}

/// Leaves every state untouched and guesses uniformly.
#[derive(Clone, Debug)]
pub struct Honest {
    n: usize,
}

pub fn honest(n: usize) -> Honest {
    Honest { n }
}

impl AttackStrategy for Honest {
    fn name(&self) -> String {
        "honest".into()
    }

    fn fresh(&self) -> Box<dyn AttackStrategy> {
        Box::new(self.clone())
    }

    fn intercept(&mut self, _round: usize, incoming: PureState, _rng: &mut StreamRng) -> Result<Interception> {
        check_incoming(&incoming, self.n)?;
        Ok(Interception::plain(incoming, None))
    }

    fn finish(&mut self, _position: Option<usize>, _rounds: usize, rng: &mut StreamRng) -> Option<usize> {
        Some(uniform_guess(self.n, rng))
    }

    fn kraus_form(&self) -> Option<GeneralizedMeasurement> {
        (self.n <= DENSE_KRAUS_LIMIT).then(|| {
            GeneralizedMeasurement::new(vec![(0, Matrix::identity(self.n, self.n))]).expect("identity is complete")
        })
    }
}

/// Computational-basis measurement, resending the collapsed state.
#[derive(Clone, Debug)]
pub struct MeasureResend {
    n: usize,
    outcomes: Vec<Option<usize>>,
}

pub fn measure_resend(n: usize) -> MeasureResend {
    MeasureResend { n, outcomes: Vec::new() }
}

impl AttackStrategy for MeasureResend {
    fn name(&self) -> String {
        "measure-resend".into()
    }

    fn fresh(&self) -> Box<dyn AttackStrategy> {
        Box::new(measure_resend(self.n))
    }

    fn intercept(&mut self, round: usize, incoming: PureState, rng: &mut StreamRng) -> Result<Interception> {
        check_incoming(&incoming, self.n)?;
        let weights: Vec<f64> = incoming.entries().iter().map(|(_, a)| a.norm_sqr()).collect();
        let k = sample_index(&weights, rng).ok_or(Error::ZeroVector)?;
        let x = incoming.entries()[k].0;
        record(&mut self.outcomes, round, x);
        Ok(Interception::plain(PureState::basis(self.n, x)?, Some(x)))
    }

    fn finish(&mut self, position: Option<usize>, _rounds: usize, rng: &mut StreamRng) -> Option<usize> {
        Some(recorded_guess(&self.outcomes, position).unwrap_or_else(|| uniform_guess(self.n, rng)))
    }

    fn kraus_form(&self) -> Option<GeneralizedMeasurement> {
        (self.n <= DENSE_KRAUS_LIMIT).then(|| GeneralizedMeasurement::computational(self.n))
    }
}

/// Weak measurement `Mₓ = √a |x⟩⟨x| + √b (𝕀 − |x⟩⟨x|)` with `a + (n−1)b = 1`;
/// `strength` interpolates `a` from `1/n` (no information) to `1` (projective).
#[derive(Clone, Debug)]
pub struct PartialMeasure {
    n: usize,
    a: f64,
    b: f64,
    outcomes: Vec<Option<usize>>,
}

pub fn partial_measure(strength: f64, n: usize) -> Result<PartialMeasure> {
    if !(0.0..=1.0).contains(&strength) {
        return Err(Error::Domain {
            what: "strength",
            value: strength,
            lo: 0.0,
            hi: 1.0,
        });
    }
    if n < 2 {
        return Err(Error::InvalidParameter("partial measurement needs n ≥ 2".into()));
    }
    let nf = n as f64;
    let a = 1.0 / nf + strength * (1.0 - 1.0 / nf);
    let b = (1.0 - a) / (nf - 1.0);
    let residual = (a + (nf - 1.0) * b - 1.0).abs();
    if residual > STRUCTURAL_TOL {
        return Err(Error::Incomplete(residual));
    }
    Ok(PartialMeasure {
        n,
        a,
        b,
        outcomes: Vec::new(),
    })
}

impl PartialMeasure {
    pub fn weights(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    fn informative(&self) -> bool {
        self.a > self.b + 1e-15
    }
}

impl AttackStrategy for PartialMeasure {
    fn name(&self) -> String {
        "partial-measure".into()
    }

    fn fresh(&self) -> Box<dyn AttackStrategy> {
        Box::new(Self {
            outcomes: Vec::new(),
            ..self.clone()
        })
    }

    fn intercept(&mut self, round: usize, incoming: PureState, rng: &mut StreamRng) -> Result<Interception> {
        check_incoming(&incoming, self.n)?;
        let (a, b) = (self.a, self.b);
        // ‖Mₓ s‖² = b + (a − b)|sₓ|²; outcomes off the support each carry b
        let support: Vec<usize> = incoming.entries().iter().map(|(i, _)| *i).collect();
        let mut weights: Vec<f64> = incoming
            .entries()
            .iter()
            .map(|(_, s)| b + (a - b) * s.norm_sqr())
            .collect();
        weights.push(b * (self.n - support.len()) as f64);
        let k = sample_index(&weights, rng).ok_or(Error::ZeroVector)?;
        let x = if k < support.len() {
            support[k]
        } else {
            loop {
                let x = rng.random_range(0..self.n);
                if support.binary_search(&x).is_err() {
                    break x;
                }
            }
        };
        let (sa, sb) = (a.sqrt(), b.sqrt());
        let post: Vec<(usize, Complex64)> = incoming
            .entries()
            .iter()
            .map(|&(i, s)| (i, if i == x { s * sa } else { s * sb }))
            .collect();
        record(&mut self.outcomes, round, x);
        Ok(Interception::plain(PureState::normalized(self.n, post)?, Some(x)))
    }

    fn finish(&mut self, position: Option<usize>, _rounds: usize, rng: &mut StreamRng) -> Option<usize> {
        let recorded = recorded_guess(&self.outcomes, position).filter(|_| self.informative());
        Some(recorded.unwrap_or_else(|| uniform_guess(self.n, rng)))
    }

    fn kraus_form(&self) -> Option<GeneralizedMeasurement> {
        if self.n > DENSE_KRAUS_LIMIT {
            return None;
        }
        let n = self.n;
        let ops = (0..n)
            .map(|x| {
                let mut m = Matrix::identity(n, n).map(|z| z * self.b.sqrt());
                m[(x, x)] = Complex64::new(self.a.sqrt(), 0.0);
                (x, m)
            })
            .collect();
        GeneralizedMeasurement::new(ops).ok()
    }
}

/// Any ancilla-free Kraus family, with Bayes-optimal guessing on the
/// recorded outcome (uniform among tied candidates).
#[derive(Clone, Debug)]
pub struct KrausAttack {
    measurement: GeneralizedMeasurement,
    candidates: Vec<Vec<usize>>,
    outcomes: Vec<Option<usize>>,
}

impl KrausAttack {
    pub fn new(measurement: GeneralizedMeasurement) -> Result<Self> {
        let n = measurement.dim_in();
        if measurement.dim_out() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: measurement.dim_out(),
            });
        }
        let mut labels: Vec<usize> = measurement.operators().iter().map(|(l, _)| *l).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter("outcome labels must be distinct".into()));
        }
        let candidates = measurement
            .operators()
            .iter()
            .map(|(_, m)| {
                let w = column_weights(m);
                let best = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                (0..n).filter(|&j| w[j] >= best - 1e-12).collect()
            })
            .collect();
        Ok(Self {
            measurement,
            candidates,
            outcomes: Vec::new(),
        })
    }

    pub fn random<R: Rng + ?Sized>(n: usize, operators: usize, rng: &mut R) -> Self {
        Self::new(random_kraus(n, operators, rng)).expect("random family is square and labeled 0..k")
    }
}

impl AttackStrategy for KrausAttack {
    fn name(&self) -> String {
        "kraus".into()
    }

    fn fresh(&self) -> Box<dyn AttackStrategy> {
        Box::new(Self {
            outcomes: Vec::new(),
            ..self.clone()
        })
    }

    fn intercept(&mut self, round: usize, incoming: PureState, rng: &mut StreamRng) -> Result<Interception> {
        let sample = born_measure(&incoming, &self.measurement, rng)?;
        let pos = self
            .measurement
            .operators()
            .iter()
            .position(|(l, _)| *l == sample.outcome)
            .expect("sampled label exists");
        record(&mut self.outcomes, round, pos);
        Ok(Interception::plain(sample.post_state, Some(sample.outcome)))
    }

    fn finish(&mut self, position: Option<usize>, _rounds: usize, rng: &mut StreamRng) -> Option<usize> {
        let n = self.measurement.dim_in();
        Some(match recorded_guess(&self.outcomes, position) {
            Some(pos) => *self.candidates[pos].choose(rng).expect("argmax set is nonempty"),
            None => uniform_guess(n, rng),
        })
    }

    fn kraus_form(&self) -> Option<GeneralizedMeasurement> {
        Some(self.measurement.clone())
    }
}

/// Coupling applied each round by an [`EntanglingProbe`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Coupling {
    Identity,
    ControlledCopy,
    Random { seed: u64 },
}

/// Coherent attack with a persistent ancilla. The ancilla is read as `k`
/// base-`n` digits; each round a unitary acts on `incoming ⊗ ancilla`, and
/// the final guess is the digit written at the announced round, obtained by a
/// terminal computational-basis measurement of the ancilla.
#[derive(Clone, Debug)]
pub struct EntanglingProbe {
    n: usize,
    ancilla_dim: usize,
    digits: Option<usize>,
    coupling: Matrix,
    ancilla: PureState,
}

impl EntanglingProbe {
    /// A probe with a declared unitary on `incoming ⊗ ancilla`.
    pub fn with_coupling(n: usize, ancilla_dim: usize, coupling: Matrix) -> Result<Self> {
        if ancilla_dim < 2 {
            return Err(Error::InvalidParameter("ancilla dimension must be at least 2".into()));
        }
        let joint = n * ancilla_dim;
        if joint > MAX_PROBE_DIM {
            return Err(Error::InvalidParameter(format!(
                "probe dimension {joint} exceeds {MAX_PROBE_DIM}"
            )));
        }
        if coupling.shape() != (joint, joint) {
            return Err(Error::DimensionMismatch {
                expected: joint,
                found: coupling.nrows(),
            });
        }
        let residual = isometry_residual(&coupling);
        if residual > STRUCTURAL_TOL {
            return Err(Error::NotIsometry(residual));
        }
        let digits = (1..=16).find(|&k| n.checked_pow(k as u32) == Some(ancilla_dim));
        Ok(Self {
            n,
            ancilla_dim,
            digits,
            coupling,
            ancilla: PureState::basis(ancilla_dim, 0)?,
        })
    }

    pub fn identity(n: usize, digits: usize) -> Result<Self> {
        let a = digit_space(n, digits)?;
        Self::with_coupling(n, a, Matrix::identity(n * a, n * a))
    }

    /// Rotates the digits by one place, then adds the incoming basis index
    /// into the freed low digit.
    pub fn controlled_copy(n: usize, digits: usize) -> Result<Self> {
        let a = digit_space(n, digits)?;
        let top = a / n;
        let mut u = Matrix::zeros(n * a, n * a);
        for q in 0..n {
            for anc in 0..a {
                let rotated = (anc % top) * n + anc / top;
                let written = rotated - rotated % n + (rotated % n + q) % n;
                u[(q * a + written, q * a + anc)] = Complex64::new(1.0, 0.0);
            }
        }
        Self::with_coupling(n, a, u)
    }

    pub fn random<R: Rng + ?Sized>(n: usize, ancilla_dim: usize, rng: &mut R) -> Result<Self> {
        let u = random_unitary(n * ancilla_dim, rng);
        Self::with_coupling(n, ancilla_dim, u)
    }

    pub fn ancilla_dim(&self) -> usize {
        self.ancilla_dim
    }
}

fn digit_space(n: usize, digits: usize) -> Result<usize> {
    if n < 2 || digits == 0 {
        return Err(Error::InvalidParameter("probe needs n ≥ 2 and at least one digit".into()));
    }
    n.checked_pow(digits as u32)
        .filter(|a| n * a <= MAX_PROBE_DIM)
        .ok_or_else(|| Error::InvalidParameter(format!("{digits} digits of base {n} exceed {MAX_PROBE_DIM}")))
}

impl AttackStrategy for EntanglingProbe {
    fn name(&self) -> String {
        "entangling-probe".into()
    }

    fn fresh(&self) -> Box<dyn AttackStrategy> {
        Box::new(Self {
            ancilla: PureState::basis(self.ancilla_dim, 0).expect("ancilla dimension ≥ 2"),
            ..self.clone()
        })
    }

    fn intercept(&mut self, _round: usize, incoming: PureState, _rng: &mut StreamRng) -> Result<Interception> {
        check_incoming(&incoming, self.n)?;
        let joint = tensor(&incoming, &self.ancilla);
        let out = apply_dense(&self.coupling, &joint);
        let returned = PureState::normalized(
            joint.dim(),
            out.into_iter().enumerate().filter(|(_, z)| z.norm_sqr() > 0.0).collect(),
        )?;
        Ok(Interception {
            returned,
            ancilla_dim: self.ancilla_dim,
            record: AttackRecord::default(),
        })
    }

    fn absorb_ancilla(&mut self, ancilla: PureState) {
        self.ancilla = ancilla;
    }

    fn finish(&mut self, position: Option<usize>, rounds_played: usize, rng: &mut StreamRng) -> Option<usize> {
        let weights: Vec<f64> = self.ancilla.entries().iter().map(|(_, a)| a.norm_sqr()).collect();
        let readout = sample_index(&weights, rng).map(|k| self.ancilla.entries()[k].0);
        let guess = match (position, readout) {
            (Some(p), Some(a)) if p < rounds_played => match self.digits {
                Some(k) => {
                    let place = (rounds_played - 1 - p) % k;
                    (a / self.n.pow(place as u32)) % self.n
                }
                None => a % self.n,
            },
            _ => uniform_guess(self.n, rng),
        };
        Some(guess)
    }
}

/// Serializable description of a strategy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum AttackSpec {
    Honest,
    MeasureResend,
    PartialMeasure { strength: f64 },
    RandomKraus { operators: usize, seed: u64 },
    EntanglingProbe { digits: usize, coupling: Coupling },
}

impl AttackSpec {
    /// A fresh strategy instance for registers of dimension `n`.
    pub fn build(&self, n: usize) -> Result<Box<dyn AttackStrategy>> {
        Ok(match *self {
            AttackSpec::Honest => Box::new(honest(n)),
            AttackSpec::MeasureResend => Box::new(measure_resend(n)),
            AttackSpec::PartialMeasure { strength } => Box::new(partial_measure(strength, n)?),
            AttackSpec::RandomKraus { operators, seed } => {
                if n > DENSE_KRAUS_LIMIT || operators == 0 {
                    return Err(Error::InvalidParameter(format!(
                        "random Kraus attack needs 1 ≤ operators and n ≤ {DENSE_KRAUS_LIMIT}"
                    )));
                }
                let mut rng = StreamRng::seed_from_u64(seed);
                Box::new(KrausAttack::random(n, operators, &mut rng))
            }
            AttackSpec::EntanglingProbe { digits, coupling } => Box::new(match coupling {
                Coupling::Identity => EntanglingProbe::identity(n, digits)?,
                Coupling::ControlledCopy => EntanglingProbe::controlled_copy(n, digits)?,
                Coupling::Random { seed } => {
                    let a = digit_space(n, digits)?;
                    let mut rng = StreamRng::seed_from_u64(seed);
                    EntanglingProbe::random(n, a, &mut rng)?
                }
            }),
        })
    }

    /// Whether the strategy acts on each round independently.
    pub fn is_individual(&self) -> bool {
        !matches!(self, AttackSpec::EntanglingProbe { .. })
    }
}

/// Exact single-round figures of merit of an ancilla-free strategy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AttackReport {
    /// Bayes-optimal probability of identifying a message word.
    pub g: f64,
    /// Probability a decoy from the full pairing ensemble passes the check.
    pub f: f64,
    /// Same, restricted to decoys with `q ≠ q′`.
    pub f_offdiagonal: f64,
    pub n: usize,
}

impl AttackReport {
    /// `F − fidelity_bound(G)`; positive would mean the bound is beaten.
    pub fn excess_over_bound(&self) -> Result<f64> {
        Ok(self.f - fidelity_bound(self.g.max(1.0 / self.n as f64), self.n)?)
    }
}

fn column_weights(m: &Matrix) -> Vec<f64> {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm_sqr()).sum())
        .collect()
}

/// `G = (1/n) Σₓ maxⱼ ‖Mₓ|j⟩‖²` and
/// `F = (1/n²) Σ_{j,k} Σₓ |⟨d_{jk}|Mₓ|d_{jk}⟩|²`, `d_{jk} = (|j⟩ + i|k⟩)/√2`.
pub fn evaluate_kraus(m: &GeneralizedMeasurement) -> Result<AttackReport> {
    let n = m.dim_in();
    if m.dim_out() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.dim_out(),
        });
    }
    let i = Complex64::new(0.0, 1.0);
    let mut g = 0.0;
    let mut diag = 0.0;
    let mut off = 0.0;
    for (_, op) in m.operators() {
        g += column_weights(op).into_iter().fold(0.0, f64::max);
        for j in 0..n {
            diag += op[(j, j)].norm_sqr();
            for k in 0..n {
                if j != k {
                    let amp = (op[(j, j)] + op[(k, k)] + i * op[(j, k)] - i * op[(k, j)]) * 0.5;
                    off += amp.norm_sqr();
                }
            }
        }
    }
    let nf = n as f64;
    Ok(AttackReport {
        g: g / nf,
        f: (diag + off) / (nf * nf),
        f_offdiagonal: if n > 1 { off / (nf * (nf - 1.0)) } else { 1.0 },
        n,
    })
}

/// Exact evaluation of a strategy that declares a single-round Kraus form.
pub fn evaluate_attack(strategy: &dyn AttackStrategy) -> Result<AttackReport> {
    let m = strategy
        .kraus_form()
        .ok_or_else(|| Error::Unsupported(format!("{} has no single-round Kraus form", strategy.name())))?;
    evaluate_kraus(&m)
}

/// `Mₓ = Aₓ S^{-1/2}` with `S = Σ Aₓ†Aₓ`; `None` when `S` is singular.
pub fn normalize_kraus(raw: Vec<Matrix>) -> Option<GeneralizedMeasurement> {
    let n = raw.first()?.ncols();
    let s = raw
        .iter()
        .fold(Matrix::zeros(n, n), |acc, a| acc + a.adjoint() * a);
    let correction = inverse_sqrt_psd(&s)?;
    let ops = raw
        .into_iter()
        .enumerate()
        .map(|(x, a)| (x, a * &correction))
        .collect();
    GeneralizedMeasurement::new(ops).ok()
}

/// A random complete family of `count` square Kraus operators on dimension `n`.
pub fn random_kraus<R: Rng + ?Sized>(n: usize, count: usize, rng: &mut R) -> GeneralizedMeasurement {
    loop {
        let raw = (0..count)
            .map(|_| Matrix::from_fn(n, n, |_, _| crate::qcore::gaussian_c64(rng)))
            .collect();
        if let Some(m) = normalize_kraus(raw) {
            return m;
        }
    }
}

/// Width of the band around the target estimation fidelity.
pub const G_TOLERANCE: f64 = 1e-3;

/// Result of [`optimize_attack`].
#[derive(Clone, Debug)]
pub struct OptimizedAttack {
    pub g_target: f64,
    pub report: AttackReport,
    pub measurement: GeneralizedMeasurement,
    pub evaluations: usize,
}

/// A candidate family, already mixed with an endpoint attack so that its
/// estimation fidelity equals the target.
struct Candidate {
    params: Vec<f64>,
    objective: f64,
}

fn decode_params(params: &[f64], n: usize, count: usize) -> Vec<Matrix> {
    let per = 2 * n * n;
    (0..count)
        .map(|x| {
            let chunk = &params[x * per..(x + 1) * per];
            Matrix::from_fn(n, n, |r, c| {
                let k = 2 * (r * n + c);
                Complex64::new(chunk[k], chunk[k + 1])
            })
        })
        .collect()
}

/// Endpoint mixture hitting `g_target`: with probability `t` Bob applies the
/// identity (when `g > g_target`) or the projective measurement (when
/// `g < g_target`). Both figures are linear in `t`.
fn repair(r: &AttackReport, g_target: f64) -> (f64, bool) {
    let lo = 1.0 / r.n as f64;
    if r.g > g_target && r.g - lo > 1e-15 {
        ((r.g - g_target) / (r.g - lo), true)
    } else if r.g < g_target {
        ((g_target - r.g) / (1.0 - r.g), false)
    } else {
        (0.0, true)
    }
}

fn repaired_f(r: &AttackReport, g_target: f64) -> f64 {
    let (t, toward_identity) = repair(r, g_target);
    let endpoint_f = if toward_identity { 1.0 } else { 0.5 + 0.5 / r.n as f64 };
    (1.0 - t) * r.f + t * endpoint_f
}

fn mixed_family(m: &GeneralizedMeasurement, g_target: f64) -> Result<GeneralizedMeasurement> {
    let n = m.dim_in();
    let r = evaluate_kraus(m)?;
    let (t, toward_identity) = repair(&r, g_target);
    let keep = (1.0 - t).sqrt();
    let mut ops: Vec<(usize, Matrix)> = m
        .operators()
        .iter()
        .enumerate()
        .map(|(i, (_, op))| (i, op.map(|z| z * keep)))
        .collect();
    if t > 0.0 {
        let base = ops.len();
        let w = Complex64::new(t.sqrt(), 0.0);
        if toward_identity {
            ops.push((base, Matrix::identity(n, n).map(|z| z * w)));
        } else {
            for x in 0..n {
                let mut p = Matrix::zeros(n, n);
                p[(x, x)] = w;
                ops.push((base + x, p));
            }
        }
    }
    GeneralizedMeasurement::new(ops)
}

fn score_params(params: Vec<f64>, n: usize, count: usize, g_target: f64) -> Candidate {
    let objective = normalize_kraus(decode_params(&params, n, count))
        .and_then(|m| evaluate_kraus(&m).ok())
        .map_or(f64::NEG_INFINITY, |r| repaired_f(&r, g_target));
    Candidate { params, objective }
}

/// Searches Kraus families of `n` operators for the largest induced fidelity
/// `F` with `|G − g_target| ≤ 1e-3`.
///
/// The search space is unconstrained complex matrices `Aₓ` made complete by
/// `Mₓ = Aₓ S^{-1/2}`. Each candidate is mixed with the identity or the
/// projective measurement so that its `G` equals the target exactly, and a
/// (1+1) evolution strategy with a one-fifth success rule maximizes the
/// mixed family's `F`. Starts are the identity family, the projective family
/// and random families. The returned family has `n` operators plus the
/// mixing terms. The budget counts evaluations of `(G, F)`.
pub fn optimize_attack<R: Rng + ?Sized>(
    n: usize,
    g_target: f64,
    budget: usize,
    rng: &mut R,
) -> Result<OptimizedAttack> {
    if n < 2 {
        return Err(Error::InvalidParameter("optimizer needs n ≥ 2".into()));
    }
    let lo = 1.0 / n as f64;
    if !(lo - 1e-12..=1.0 + 1e-12).contains(&g_target) {
        return Err(Error::Domain {
            what: "G_target",
            value: g_target,
            lo,
            hi: 1.0,
        });
    }
    let count = n;
    let dim = 2 * n * n * count;
    let restarts = RESTARTS.min(budget.max(1));
    let per_restart = (budget / restarts).max(1);

    let mut starts: Vec<(Vec<f64>, f64)> = Vec::with_capacity(restarts);
    let mut identity = vec![0.0; dim];
    let mut projective = vec![0.0; dim];
    for x in 0..count {
        for j in 0..n {
            identity[x * 2 * n * n + 2 * (j * n + j)] = 1.0;
        }
        projective[x * 2 * n * n + 2 * (x * n + x)] = 1.0;
    }
    starts.push((identity, 0.1));
    starts.push((projective, 0.1));
    while starts.len() < restarts {
        let p = (0..dim).map(|_| rng.sample::<f64, _>(rand_distr::StandardNormal)).collect();
        starts.push((p, 0.3));
    }
    starts.truncate(restarts);

    let mut best: Option<Candidate> = None;
    let mut evaluations = 0;
    for (start, step0) in starts {
        let mut current = score_params(start, n, count, g_target);
        evaluations += 1;
        let mut step = step0;
        for _ in 1..per_restart {
            if evaluations >= budget {
                break;
            }
            let trial: Vec<f64> = current
                .params
                .iter()
                .map(|p| p + step * rng.sample::<f64, _>(rand_distr::StandardNormal))
                .collect();
            let cand = score_params(trial, n, count, g_target);
            evaluations += 1;
            if cand.objective >= current.objective {
                current = cand;
                step *= 1.5;
            } else {
                step *= 0.9;
            }
            step = step.clamp(1e-8, 1.0);
        }
        if best.as_ref().is_none_or(|b| current.objective > b.objective) {
            best = Some(current);
        }
    }
    let best = best.filter(|b| b.objective.is_finite()).ok_or_else(|| {
        Error::InvalidParameter(format!("no complete Kraus family found for G = {g_target}"))
    })?;
    let raw = normalize_kraus(decode_params(&best.params, n, count)).expect("finite objective implies completeness");
    let measurement = mixed_family(&raw, g_target)?;
    let report = evaluate_kraus(&measurement)?;
    if (report.g - g_target).abs() > G_TOLERANCE {
        return Err(Error::InvalidParameter(format!(
            "search ended at G = {} for target {g_target}",
            report.g
        )));
    }
    Ok(OptimizedAttack {
        g_target,
        report,
        measurement,
        evaluations,
    })
}

/// Number of independent starts the search budget is split across.
const RESTARTS: usize = 4;
