//! Per-profile least squares and the covariance of the summed coefficients.
//!
//! Each sample yields a fitted 2×p coefficient matrix. The chart tracks the
//! 2-vector of column-summed coefficients; its analytical 2×2 covariance
//! [`SigmaB`] is assembled from the three pairwise covariance formulas below.

use crate::error::{Error, Result};
use crate::model::{CoefMatrix, DesignPoints, ErrorCovariance, SampleMatrix};

/// The summed-coefficient 2-vector: (Σⱼ β̂₀ⱼ, Σⱼ β̂₁ⱼ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefSumVector {
    pub b0_sum: f64,
    pub b1_sum: f64,
}

/// The 2×2 covariance of the summed-coefficient vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaB {
    pub s11: f64,
    pub s22: f64,
    pub s12: f64,
}

impl SigmaB {
    pub fn new(s11: f64, s22: f64, s12: f64) -> Result<Self> {
        if !(s11 > 0.0 && s22 > 0.0 && s11 * s22 - s12 * s12 > 0.0) {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { s11, s22, s12 })
    }
}

/// Which form of the intercept-variance factor to use when assembling
/// [`SigmaB`]. `XbarSquared` is the default; `XbarLinear` replaces the
/// x̄²/s_xx term with x̄/s_xx and is retained only for comparison studies
/// (it is not a valid variance and typically fails positive definiteness).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterceptVariance {
    XbarSquared,
    XbarLinear,
}

/// Least-squares fit of every profile column against the shared design.
pub fn fit_profiles(sample: &SampleMatrix, design: &DesignPoints) -> Result<CoefMatrix> {
    let mut out = CoefMatrix::new(vec![0.0; sample.p()], vec![0.0; sample.p()])?;
    fit_profiles_into(sample, design, &mut out)?;
    Ok(out)
}

/// Allocation-free fit used by the simulation hot loop. Produces bit-identical
/// results to [`fit_profiles`].
pub(crate) fn fit_profiles_into(
    sample: &SampleMatrix,
    design: &DesignPoints,
    out: &mut CoefMatrix,
) -> Result<()> {
    let n = design.n();
    let p = sample.p();
    if sample.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "sample has {} rows but design has {} points",
            sample.n(),
            n
        )));
    }
    if out.p() != p {
        return Err(Error::DimensionMismatch(format!(
            "output coefficient matrix has p={} but sample has p={}",
            out.p(),
            p
        )));
    }
    let x = design.x();
    let x_bar = design.x_bar();
    let s_xx = design.s_xx();
    for j in 0..p {
        let mut sxy = 0.0;
        let mut y_sum = 0.0;
        for i in 0..n {
            let y = sample.get(i, j);
            sxy += (x[i] - x_bar) * y;
            y_sum += y;
        }
        let slope = sxy / s_xx;
        out.slopes[j] = slope;
        out.intercepts[j] = y_sum / n as f64 - slope * x_bar;
    }
    Ok(())
}

/// Column sums of the fitted coefficient matrix.
pub fn coef_sum(b_hat: &CoefMatrix) -> CoefSumVector {
    CoefSumVector {
        b0_sum: b_hat.intercepts.iter().sum(),
        b1_sum: b_hat.slopes.iter().sum(),
    }
}

/// Covariance of two fitted intercepts with error covariance `sigma_uv`:
/// `σ_uv·(1/n + x̄²/s_xx)`.
pub fn cov_intercepts(sigma_uv: f64, design: &DesignPoints) -> f64 {
    sigma_uv * (1.0 / design.n() as f64 + design.x_bar() * design.x_bar() / design.s_xx())
}

/// Alternative intercept-covariance form with a linear x̄/s_xx term,
/// kept for comparison against the Monte Carlo oracle. See
/// [`InterceptVariance::XbarLinear`].
pub fn cov_intercepts_xbar_variant(sigma_uv: f64, design: &DesignPoints) -> f64 {
    sigma_uv * (1.0 / design.n() as f64 + design.x_bar() / design.s_xx())
}

/// Covariance of two fitted slopes: `σ_uv/s_xx`.
pub fn cov_slopes(sigma_uv: f64, design: &DesignPoints) -> f64 {
    sigma_uv / design.s_xx()
}

/// Covariance of a fitted intercept and a fitted slope: `−σ_uv·x̄/s_xx`.
pub fn cov_intercept_slope(sigma_uv: f64, design: &DesignPoints) -> f64 {
    -sigma_uv * design.x_bar() / design.s_xx()
}

/// Assembles the covariance of the summed-coefficient vector.
///
/// With `S = 1ᵀΣ1` (the sum of all p² entries of Σ):
/// `s11 = S·(1/n + x̄²/s_xx)`, `s22 = S/s_xx`, `s12 = −S·x̄/s_xx`.
pub fn sigma_b(sigma: &ErrorCovariance, design: &DesignPoints) -> Result<SigmaB> {
    sigma_b_with(sigma, design, InterceptVariance::XbarSquared)
}

/// [`sigma_b`] with an explicit choice of intercept-variance form.
pub fn sigma_b_with(
    sigma: &ErrorCovariance,
    design: &DesignPoints,
    variance: InterceptVariance,
) -> Result<SigmaB> {
    let s = sigma.total_sum();
    let s11 = match variance {
        InterceptVariance::XbarSquared => cov_intercepts(s, design),
        InterceptVariance::XbarLinear => cov_intercepts_xbar_variant(s, design),
    };
    SigmaB::new(s11, cov_slopes(s, design), cov_intercept_slope(s, design))
}

/// Variance of the summed fitted mean at design point `i` (0-based):
/// `s11 + 2·x_i·s12 + x_i²·s22`.
pub fn point_variance(design: &DesignPoints, i: usize, sb: &SigmaB) -> Result<f64> {
    let x = design
        .x()
        .get(i)
        .copied()
        .ok_or(Error::IndexOutOfRange { index: i, n: design.n() })?;
    Ok(sb.s11 + 2.0 * x * sb.s12 + x * x * sb.s22)
}
