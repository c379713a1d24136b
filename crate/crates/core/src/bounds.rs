//! Closed-form information-versus-disturbance and detection bounds.
//!
//! All logarithms are base 2; information is measured in bits.

use serde::Serialize;

use crate::error::{Error, Result};

/// Inputs this close to an endpoint of the domain are snapped onto it.
pub const ENDPOINT_SNAP: f64 = 1e-12;

/// A point of the estimation-fidelity / induced-fidelity plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TradeoffPoint {
    pub g: f64,
    pub f: f64,
    pub n: usize,
}

impl TradeoffPoint {
    /// The point on the optimal-attack curve at estimation fidelity `g`.
    pub fn on_bound(g: f64, n: usize) -> Result<Self> {
        Ok(Self {
            g,
            f: fidelity_bound(g, n)?,
            n,
        })
    }
}

/// Parameters of a security statement: dimension, decoy count, Bob's
/// information (bits) and Alice's detection probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SecurityParams {
    pub n: usize,
    pub decoys: usize,
    pub info: f64,
    pub detection: f64,
}

impl SecurityParams {
    pub fn new(n: usize, decoys: usize, info: f64, detection: f64) -> Result<Self> {
        snap(info, 0.0, log2(n), "I")?;
        snap(detection, 0.0, 1.0, "D")?;
        Ok(Self {
            n,
            decoys,
            info,
            detection,
        })
    }

    /// Whether the detection probability meets the guaranteed floor.
    pub fn satisfies_bound(&self) -> Result<bool> {
        Ok(self.detection >= detection_bound(self.info, self.n, self.decoys)? - ENDPOINT_SNAP)
    }
}

fn log2(n: usize) -> f64 {
    (n as f64).log2()
}

fn snap(value: f64, lo: f64, hi: f64, what: &'static str) -> Result<f64> {
    if value.is_nan() || value < lo - ENDPOINT_SNAP || value > hi + ENDPOINT_SNAP {
        return Err(Error::Domain { what, value, lo, hi });
    }
    Ok(value.clamp(lo, hi))
}

fn check_dim(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("dimension n = {n} must be at least 2")));
    }
    Ok(())
}

/// Largest probability that a decoy survives an attack whose estimation
/// fidelity on message words is `g`:
/// `1/2 + (√g + √((n−1)(1−g)))² / (2n)` for `g ∈ [1/n, 1]`.
pub fn fidelity_bound(g: f64, n: usize) -> Result<f64> {
    check_dim(n)?;
    let g = snap(g, 1.0 / n as f64, 1.0, "G")?;
    let nf = n as f64;
    let s = g.sqrt() + ((nf - 1.0) * (1.0 - g)).sqrt();
    Ok(0.5 + s * s / (2.0 * nf))
}

/// Estimation fidelity matching `info` bits of mutual information: `2^(I − log₂ n)`.
pub fn g_from_info(info: f64, n: usize) -> Result<f64> {
    check_dim(n)?;
    let info = snap(info, 0.0, log2(n), "I")?;
    Ok((info - log2(n)).exp2())
}

/// Guaranteed detection probability `1 − F(2^(I − log₂ n))^N`.
pub fn detection_bound(info: f64, n: usize, decoys: usize) -> Result<f64> {
    let f = fidelity_bound(g_from_info(info, n)?, n)?;
    Ok(1.0 - f.powi(decoys as i32))
}

/// Upper bound on reaching round `m` undetected under individual attacks:
/// `Π_{i=1, i≠p}^{m−1} F(Gᵢ)`. Rounds are 1-based and `gs[i − 1]` holds `Gᵢ`.
pub fn prefix_survival_bound(gs: &[f64], position: usize, round: usize, n: usize) -> Result<f64> {
    let last = round.saturating_sub(1);
    if last > gs.len() {
        return Err(Error::InvalidParameter(format!(
            "round {round} needs {last} estimation fidelities, got {}",
            gs.len()
        )));
    }
    (1..=last)
        .filter(|&i| i != position)
        .try_fold(1.0, |acc, i| Ok(acc * fidelity_bound(gs[i - 1], n)?))
}

/// `π(x) = (1/(N+1)) Σ_p Π_{i≠p} f(xᵢ)` over `N + 1 = xs.len()` entries.
pub fn circular_product(xs: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let values: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let len = values.len();
    if len == 0 {
        return 1.0;
    }
    // prefix[i] = Π_{j<i}, suffix[i] = Π_{j≥i}
    let mut prefix = vec![1.0; len + 1];
    for i in 0..len {
        prefix[i + 1] = prefix[i] * values[i];
    }
    let mut suffix = vec![1.0; len + 1];
    for i in (0..len).rev() {
        suffix[i] = suffix[i + 1] * values[i];
    }
    (0..len).map(|p| prefix[p] * suffix[p + 1]).sum::<f64>() / len as f64
}

/// Min-entropy `−log₂ G` of a posterior whose largest probability is `g`.
pub fn min_entropy_lb(g: f64) -> Result<f64> {
    if !(g > 0.0) || g > 1.0 + ENDPOINT_SNAP {
        return Err(Error::Domain {
            what: "G",
            value: g,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(-g.min(1.0).log2())
}

/// Shannon entropy in bits.
pub fn shannon_entropy(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|p| **p > 0.0)
        .map(|p| -p * p.log2())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fidelity_endpoints() {
        for n in 2..10 {
            assert!((fidelity_bound(1.0 / n as f64, n).unwrap() - 1.0).abs() < 1e-12);
            let expected = 0.5 + 0.5 / n as f64;
            assert!((fidelity_bound(1.0, n).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn fidelity_hand_value() {
        // (√.5 + √.5)² = 2, 1/2 + 2/4 = 1
        assert!((fidelity_bound(0.5, 2).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn fidelity_domain() {
        assert!(matches!(fidelity_bound(0.2, 2), Err(Error::Domain { .. })));
        assert!(matches!(fidelity_bound(1.1, 2), Err(Error::Domain { .. })));
        assert!(fidelity_bound(0.5, 1).is_err());
        // snapped
        assert_eq!(fidelity_bound(1.0 + 1e-13, 2).unwrap(), 0.75);
        assert_eq!(fidelity_bound(0.5 - 1e-13, 2).unwrap(), 1.0);
    }

    #[test]
    fn g_from_info_values() {
        assert!((g_from_info(0.0, 4).unwrap() - 0.25).abs() < 1e-15);
        assert!((g_from_info(2.0, 4).unwrap() - 1.0).abs() < 1e-15);
        assert!((g_from_info(1.0, 4).unwrap() - 0.5).abs() < 1e-15);
        assert!(g_from_info(2.5, 4).is_err());
        assert!(g_from_info(-0.1, 4).is_err());
    }

    #[test]
    fn detection_values() {
        assert!(detection_bound(0.0, 4, 17).unwrap().abs() < 1e-12);
        let d = detection_bound(2.0, 4, 10).unwrap();
        assert!((d - (1.0 - 0.625f64.powi(10))).abs() < 1e-12);
        assert!((d - 0.99091).abs() < 1e-5);
        assert_eq!(detection_bound(1.3, 4, 0).unwrap(), 0.0);
    }

    #[test]
    fn prefix_survival_cases() {
        assert_eq!(prefix_survival_bound(&[0.5, 0.5, 0.5], 0, 4, 2).unwrap(), 1.0);
        assert!((prefix_survival_bound(&[1.0, 1.0], 0, 3, 2).unwrap() - 0.5625).abs() < 1e-15);
        // excluding the message position removes its factor
        assert!((prefix_survival_bound(&[1.0, 1.0], 2, 3, 2).unwrap() - 0.75).abs() < 1e-15);
        assert_eq!(prefix_survival_bound(&[], 0, 1, 2).unwrap(), 1.0);
        assert!(prefix_survival_bound(&[1.0], 0, 5, 2).is_err());
        assert!(prefix_survival_bound(&[0.1], 0, 2, 2).is_err());
    }

    #[test]
    fn circular_product_cases() {
        let f = |x: f64| x * (2.0 - x);
        assert!((circular_product(&[0.0, 1.0], f) - 0.5).abs() < 1e-15);
        assert!(circular_product(&[0.0, 1.0], f) <= f(0.5));
        assert_eq!(circular_product(&[0.3], f), 1.0);
        let t = 0.4;
        let sym = circular_product(&[t; 5], f);
        assert!((sym - f(t).powi(4)).abs() < 1e-15);
    }

    #[test]
    fn min_entropy_values() {
        assert_eq!(min_entropy_lb(1.0).unwrap(), 0.0);
        assert!((min_entropy_lb(0.125).unwrap() - 3.0).abs() < 1e-15);
        assert!((min_entropy_lb(0.25).unwrap() - 2.0).abs() < 1e-15);
        assert!(min_entropy_lb(0.0).is_err());
        assert!(min_entropy_lb(-1.0).is_err());
    }

    #[test]
    fn security_params_check() {
        let ok = SecurityParams::new(4, 10, 2.0, 1.0 - 0.625f64.powi(10)).unwrap();
        assert!(ok.satisfies_bound().unwrap());
        let bad = SecurityParams::new(4, 10, 2.0, 0.5).unwrap();
        assert!(!bad.satisfies_bound().unwrap());
        assert!(SecurityParams::new(4, 10, 3.0, 0.5).is_err());
        assert!(SecurityParams::new(4, 10, 1.0, 1.5).is_err());
    }
}
