//! Quantum decoys: pool preparation, Bob's honest computation and Alice's
//! checks on what comes back.
//!
//! Registers returned by Bob have dimension `n·m` (input register of size `n`,
//! output register of size `m`, index `q·m + y`). When Bob keeps an ancilla
//! entangled with the returned register the joint state has dimension
//! `n·m·a`, index `(q·m + y)·a + k`.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::qcore::{
    measure_first_basis, project_first, project_first_complement, GeneralizedMeasurement, Matrix,
    PureState,
};
use crate::rvf::{RvfInstance, RvfPair};

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// `(|q⟩ + i|q′⟩)/√2` on an `n`-dimensional register.
pub fn decoy_state(q: usize, q_prime: usize, n: usize) -> Result<PureState> {
    for index in [q, q_prime] {
        if index >= n {
            return Err(Error::IndexOutOfRange { index, dim: n });
        }
    }
    PureState::from_entries(
        n,
        vec![
            (q, Complex64::new(FRAC_1_SQRT_2, 0.0)),
            (q_prime, Complex64::new(0.0, FRAC_1_SQRT_2)),
        ],
    )
}

/// One slot of Alice's pool, as basis indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PoolItem {
    TrueInput {
        x: usize,
    },
    Decoy {
        q: usize,
        q_prime: usize,
        fq: usize,
        fq_prime: usize,
    },
}

impl PoolItem {
    pub fn is_decoy(&self) -> bool {
        matches!(self, PoolItem::Decoy { .. })
    }

    /// The state Alice sends for this slot.
    pub fn state(&self, n: usize) -> Result<PureState> {
        match *self {
            PoolItem::TrueInput { x } => PureState::basis(n, x),
            PoolItem::Decoy { q, q_prime, .. } => decoy_state(q, q_prime, n),
        }
    }
}

/// `N + 1` shuffled items with exactly one true input.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Pool {
    items: Vec<PoolItem>,
    true_position: usize,
}

impl Pool {
    pub fn items(&self) -> &[PoolItem] {
        &self.items
    }

    pub fn true_position(&self) -> usize {
        self.true_position
    }

    pub fn decoy_count(&self) -> usize {
        self.items.len() - 1
    }
}

/// Builds the pool from Alice's input index `x` and `2N` sampled pairs
/// (consumed two per decoy), then shuffles it uniformly.
pub fn prepare_pool<R: Rng + ?Sized>(
    instance: &RvfInstance,
    x: usize,
    decoys: usize,
    pairs: &[RvfPair],
    rng: &mut R,
) -> Result<Pool> {
    let n = instance.domain_size();
    if x >= n {
        return Err(Error::IndexOutOfRange { index: x, dim: n });
    }
    if pairs.len() < 2 * decoys {
        return Err(Error::InvalidParameter(format!(
            "{decoys} decoys need {} pairs, got {}",
            2 * decoys,
            pairs.len()
        )));
    }
    let mut items = Vec::with_capacity(decoys + 1);
    items.push(PoolItem::TrueInput { x });
    for chunk in pairs[..2 * decoys].chunks_exact(2) {
        let mut encoded = [(0, 0); 2];
        for (slot, pair) in encoded.iter_mut().zip(chunk) {
            if !instance.verify(&pair.input, &pair.output)? {
                return Err(Error::InvalidParameter("pair does not verify".into()));
            }
            *slot = instance.encode_pair(pair)?;
        }
        items.push(PoolItem::Decoy {
            q: encoded[0].0,
            fq: encoded[0].1,
            q_prime: encoded[1].0,
            fq_prime: encoded[1].1,
        });
    }
    items.shuffle(rng);
    let true_position = items
        .iter()
        .position(|item| !item.is_decoy())
        .expect("pool holds the true input");
    Ok(Pool {
        items,
        true_position,
    })
}

/// Bob's honest computation `|q⟩ ↦ |q; f(q)⟩` as a basis map.
#[derive(Clone, Debug)]
pub struct HonestIsometry {
    f_table: Vec<usize>,
    m: usize,
}

impl HonestIsometry {
    pub fn new(f_table: Vec<usize>, m: usize) -> Result<Self> {
        if let Some(&y) = f_table.iter().find(|&&y| y >= m) {
            return Err(Error::IndexOutOfRange { index: y, dim: m });
        }
        Ok(Self { f_table, m })
    }

    pub fn for_instance(instance: &RvfInstance) -> Self {
        Self {
            f_table: instance.f_table(),
            m: instance.output_size(),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.f_table.len()
    }

    pub fn output_dim(&self) -> usize {
        self.f_table.len() * self.m
    }

    /// Applies the map to the first factor of `state`, whose second factor
    /// (an ancilla, `ancilla_dim = 1` for none) is left untouched.
    pub fn apply(&self, state: &PureState, ancilla_dim: usize) -> Result<PureState> {
        let expected = self.input_dim() * ancilla_dim;
        if state.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: state.dim(),
            });
        }
        let entries = state
            .entries()
            .iter()
            .map(|&(idx, a)| {
                let (q, k) = (idx / ancilla_dim, idx % ancilla_dim);
                ((q * self.m + self.f_table[q]) * ancilla_dim + k, a)
            })
            .collect();
        PureState::from_entries(self.output_dim() * ancilla_dim, entries)
    }

    /// Dense `(n·m) × n` matrix; only sensible at small dimensions.
    pub fn to_matrix(&self) -> Matrix {
        let mut v = Matrix::zeros(self.output_dim(), self.input_dim());
        for (q, &y) in self.f_table.iter().enumerate() {
            v[(q * self.m + y, q)] = Complex64::new(1.0, 0.0);
        }
        v
    }
}

/// Outcome of Alice's check on one returned register.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "notamp")]
    Intact,
    #[serde(rename = "tamp")]
    Tampered,
    #[serde(rename = "not_applicable")]
    NotApplicable,
}

/// The two-outcome projective check `{P_intact, 𝕀 − P_intact}` for one decoy,
/// with `P_intact` the projector onto `(|q; f(q)⟩ + i|q′; f(q′)⟩)/√2`.
#[derive(Clone, Debug)]
pub struct VerificationMeasurement {
    intact: PureState,
}

pub const NOTAMP: usize = 0;
pub const TAMP: usize = 1;

impl VerificationMeasurement {
    pub fn for_item(item: &PoolItem, n: usize, m: usize) -> Result<Self> {
        match *item {
            PoolItem::TrueInput { .. } => Err(Error::InvalidParameter(
                "the true input is never checked with a decoy measurement".into(),
            )),
            PoolItem::Decoy {
                q,
                q_prime,
                fq,
                fq_prime,
            } => {
                for (index, dim) in [(q, n), (q_prime, n), (fq, m), (fq_prime, m)] {
                    if index >= dim {
                        return Err(Error::IndexOutOfRange { index, dim });
                    }
                }
                let intact = PureState::from_entries(
                    n * m,
                    vec![
                        (q * m + fq, Complex64::new(FRAC_1_SQRT_2, 0.0)),
                        (q_prime * m + fq_prime, Complex64::new(0.0, FRAC_1_SQRT_2)),
                    ],
                )?;
                Ok(Self { intact })
            }
        }
    }

    /// The state `P_intact` projects onto.
    pub fn intact_state(&self) -> &PureState {
        &self.intact
    }

    /// `‖P_intact s‖²` for a register with no ancilla.
    pub fn prob_intact(&self, state: &PureState) -> f64 {
        self.intact.overlap(state)
    }

    /// The dense measurement with outcomes [`NOTAMP`] and [`TAMP`].
    pub fn to_measurement(&self) -> GeneralizedMeasurement {
        let dim = self.intact.dim();
        let v = nalgebra::DVector::from_vec(self.intact.to_dense());
        let p = &v * v.adjoint();
        let q = Matrix::identity(dim, dim) - &p;
        GeneralizedMeasurement::new(vec![(NOTAMP, p), (TAMP, q)]).expect("projectors are complete")
    }

    /// Measures the register part of `register ⊗ ancilla`. Returns the
    /// verdict and the ancilla's post-measurement state (`None` when
    /// `ancilla_dim == 1`). On `tamp` the discarded register is also read out
    /// in the computational basis so that the ancilla stays pure.
    pub fn measure<R: Rng + ?Sized>(
        &self,
        joint: &PureState,
        ancilla_dim: usize,
        rng: &mut R,
    ) -> Result<(Verdict, Option<PureState>)> {
        let (p_intact, rest) = project_first(joint, &self.intact, ancilla_dim)?;
        let intact = rng.random::<f64>() < p_intact;
        let verdict = if intact {
            Verdict::Intact
        } else {
            Verdict::Tampered
        };
        if ancilla_dim == 1 {
            return Ok((verdict, None));
        }
        let ancilla = if intact {
            rest.ok_or(Error::ZeroVector)?
        } else {
            let residual = project_first_complement(joint, &self.intact, ancilla_dim)?;
            measure_first_basis(&residual, (self.intact.dim(), ancilla_dim), rng)?.1
        };
        Ok((verdict, Some(ancilla)))
    }
}

/// What Alice reads from the register returned for her true input.
#[derive(Clone, Debug, PartialEq)]
pub struct ReadOut {
    pub output: usize,
    /// whether the input register collapsed to `x`
    pub input_check: bool,
    pub ancilla: Option<PureState>,
}

/// Measures both registers of `register ⊗ ancilla` in the computational basis.
pub fn read_result<R: Rng + ?Sized>(
    returned: &PureState,
    x: usize,
    m: usize,
    ancilla_dim: usize,
    rng: &mut R,
) -> Result<ReadOut> {
    let reg_dim = returned.dim() / ancilla_dim;
    if reg_dim * ancilla_dim != returned.dim() || reg_dim % m != 0 {
        return Err(Error::DimensionMismatch {
            expected: reg_dim * ancilla_dim,
            found: returned.dim(),
        });
    }
    let (idx, ancilla) = measure_first_basis(returned.entries(), (reg_dim, ancilla_dim), rng)?;
    Ok(ReadOut {
        output: idx % m,
        input_check: idx / m == x,
        ancilla: (ancilla_dim > 1).then_some(ancilla),
    })
}
