use serde::Serialize;

use super::{DecompositionResult, TreeOnGrid};
use crate::error::{Error, Result};
use crate::grid::{weighted_lp_norm, GridFunction};
use crate::numerics::Accumulator;
use crate::random;

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!("exponent must satisfy 1 < p < ∞, got {p}")));
    }
    Ok(())
}

/// `2 (pN/(p−1))^{1/p}`.
pub fn t_operator_bound(p: f64, n: usize) -> f64 {
    2.0 * (p * n as f64 / (p - 1.0)).powf(1.0 / p)
}

/// `2^p N (1 + 2^{p+1} p/(p−1))`.
pub fn c1_constant(p: f64, n: usize) -> f64 {
    2f64.powf(p) * n as f64 * (1.0 + 2f64.powf(p + 1.0) * p / (p - 1.0))
}

/// `2^p (N M_I^p + 2 M_T^p)`.
pub fn c2_constant(p: f64, n: usize, m_i: f64, m_t: f64) -> f64 {
    2f64.powf(p) * (n as f64 * m_i.powf(p) + 2.0 * m_t.powf(p))
}

/// `2 N M₁ M₂ (N + 2 M_T^p)^{1/p}`.
pub fn c_theory(p: f64, n: usize, m1: f64, m2: f64, m_t: f64) -> f64 {
    2.0 * n as f64 * m1 * m2 * (n as f64 + 2.0 * m_t.powf(p)).powf(1.0 / p)
}

/// `2 M₁ M₂ N^{1+1/p} (1 + 2^{p+1} p/(p−1))^{1/p}`.
pub fn unweighted_bound(p: f64, n: usize, m1: f64, m2: f64) -> f64 {
    2.0 * m1 * m2 * (n as f64).powf(1.0 + 1.0 / p) * (1.0 + 2f64.powf(p + 1.0) * p / (p - 1.0)).powf(1.0 / p)
}

#[derive(Debug, Clone, Serialize)]
pub struct TBoundReport {
    pub p: f64,
    pub overlap: usize,
    pub trials: usize,
    pub worst_ratio: f64,
    /// Present for the unweighted operator only.
    pub bound: Option<f64>,
    pub passed: bool,
}

/// Largest observed `‖(Tf) ŵ‖_p / ‖f ŵ‖_p` over the constant function and
/// `trials` cell-wise uniform random functions.
pub fn verify_t_bound(tog: &TreeOnGrid, p: f64, trials: usize, seed: u64, weight: Option<&[f64]>) -> Result<TBoundReport> {
    check_p(p)?;
    let mut rng = random::rng(seed);
    let mut worst: f64 = 0.0;
    let ones = GridFunction::from_fn(tog.grid().clone(), tog.mask().clone(), |_| 1.0)?;
    for trial in 0..=trials {
        let f = if trial == 0 { ones.clone() } else { random::uniform(tog.grid(), tog.mask(), &mut rng) };
        let denom = weighted_lp_norm(&f, weight, p)?;
        if denom == 0.0 {
            continue;
        }
        let tf = tog.hardy_operator(&f)?;
        worst = worst.max(weighted_lp_norm(&tf, weight, p)? / denom);
    }
    let overlap = tog.tree().overlap_bound();
    let bound = weight.is_none().then(|| t_operator_bound(p, overlap));
    let passed = worst.is_finite() && bound.is_none_or(|b| worst <= b);
    Ok(TBoundReport { p, overlap, trials, worst_ratio: worst, bound, passed })
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionBoundReport {
    pub p: f64,
    pub overlap: usize,
    /// `Σ_t ‖g_t ω ŵ₁‖_p^p`.
    pub lhs: f64,
    /// `C ‖f ŵ₂‖_p^p`.
    pub rhs: f64,
    pub constant: f64,
    pub ratio: f64,
    pub m_i: Option<f64>,
    pub m_t: Option<f64>,
    pub passed: bool,
}

/// Checks the decomposition estimate with `C₁` (no hat weights) or `C₂`
/// (hat weights given; `M_I = max ŵ₁/ŵ₂` and `M_T` is the ratio realised by
/// `f` itself, which is the only instance of `T` the estimate uses).
pub fn verify_decomposition_bound(
    tog: &TreeOnGrid,
    f: &GridFunction,
    decomposition: Option<&DecompositionResult>,
    p: f64,
    hat_weights: Option<(&[f64], &[f64])>,
) -> Result<DecompositionBoundReport> {
    check_p(p)?;
    let owned;
    let d = match decomposition {
        Some(d) => d,
        None => {
            owned = tog.decompose(f)?;
            &owned
        }
    };
    let omega = tog.tree_weight();
    let w1 = hat_weights.map(|(w1, _)| w1);
    let dv = tog.grid().cell_measure();
    let mut lhs = Accumulator::new();
    for g in &d.parts {
        for (i, c) in g.cells.iter().enumerate() {
            let w = omega.value(c)[0] * w1.map_or(1.0, |w| w[c]);
            lhs.add((g.values[i] * w).abs().powf(p));
        }
    }
    let lhs = lhs.value() * dv;
    let overlap = tog.tree().overlap_bound();
    let (constant, rhs_norm, m_i, m_t) = match hat_weights {
        None => (c1_constant(p, overlap), weighted_lp_norm(f, None, p)?, None, None),
        Some((w1, w2)) => {
            let norm2 = weighted_lp_norm(f, Some(w2), p)?;
            weighted_lp_norm(f, Some(w1), p)?;
            let m_i = f.masked_cells().map(|c| w1[c] / w2[c]).fold(0.0, f64::max);
            let tf = tog.hardy_operator(f)?;
            let m_t = if norm2 > 0.0 { weighted_lp_norm(&tf, Some(w1), p)? / norm2 } else { 0.0 };
            (c2_constant(p, overlap, m_i, m_t), norm2, Some(m_i), Some(m_t))
        }
    };
    let rhs = constant * rhs_norm.powf(p);
    let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    Ok(DecompositionBoundReport { p, overlap, lhs, rhs, constant, ratio, m_i, m_t, passed: lhs <= rhs })
}
