//! EWMA chart on the summed-coefficient vector, plus the Shewhart-style
//! confidence-set variant.
//!
//! The monitored statistic is the maximum over design points of the absolute
//! standardized deviation of the smoothed fitted mean-sum from its in-control
//! value. The time-varying control limit follows the EWMA variance inflation
//! factor `(θ/(2−θ))·(1 − (1−θ)^{2j})`.

use crate::error::{Error, Result};
use crate::estimate::{self, CoefSumVector, SigmaB};
use crate::model::{CoefMatrix, ProcessModel, SampleMatrix};

pub use crate::estimate::coef_sum;

/// Chart parameters: the smoothing constant, the EWMA limit multiplier, and
/// an optional Shewhart multiplier.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartConfig {
    pub theta: f64,
    pub l_b: f64,
    pub m_alpha: Option<f64>,
    /// Use the asymptotic limit for all j instead of the time-varying one.
    pub steady_state_limit: bool,
}

impl ChartConfig {
    pub fn new(theta: f64, l_b: f64) -> Result<Self> {
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "theta must lie in (0, 1], got {theta}"
            )));
        }
        if !(l_b >= 0.0 && l_b.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "l_b must be finite and non-negative, got {l_b}"
            )));
        }
        Ok(Self { theta, l_b, m_alpha: None, steady_state_limit: false })
    }

    pub fn with_m_alpha(mut self, m_alpha: f64) -> Self {
        self.m_alpha = Some(m_alpha);
        self
    }

    pub fn with_steady_state_limit(mut self, on: bool) -> Self {
        self.steady_state_limit = on;
        self
    }
}

/// Current smoothed vector and step count of one monitoring stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EwmaChartState {
    pub z: CoefSumVector,
    pub j: u64,
}

/// Outcome of one chart evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartVerdict {
    pub v: f64,
    pub limit: f64,
    pub signal: bool,
    /// 0-based design-point index attaining the max (smallest index on ties).
    pub worst_point: usize,
}

/// Fresh chart state at the in-control value, step 0.
pub fn ewma_init(model: &ProcessModel) -> EwmaChartState {
    EwmaChartState { z: coef_sum(model.b0()), j: 0 }
}

/// One EWMA step: `z_new = θ·w + (1−θ)·z_old`, componentwise.
pub fn ewma_update(state: &EwmaChartState, w: CoefSumVector, theta: f64) -> EwmaChartState {
    EwmaChartState {
        z: CoefSumVector {
            b0_sum: theta * w.b0_sum + (1.0 - theta) * state.z.b0_sum,
            b1_sum: theta * w.b1_sum + (1.0 - theta) * state.z.b1_sum,
        },
        j: state.j + 1,
    }
}

/// Max over design points of |X_i·d| / sqrt(point variance), where `d` is the
/// deviation of `sums` from the in-control coefficient sums.
fn standardized_max(sums: CoefSumVector, model: &ProcessModel, sb: &SigmaB) -> (f64, usize) {
    let ic = coef_sum(model.b0());
    let d0 = sums.b0_sum - ic.b0_sum;
    let d1 = sums.b1_sum - ic.b1_sum;
    let mut best = f64::NEG_INFINITY;
    let mut best_i = 0;
    for (i, &xi) in model.design().x().iter().enumerate() {
        let var = sb.s11 + 2.0 * xi * sb.s12 + xi * xi * sb.s22;
        let v = (d0 + xi * d1).abs() / var.sqrt();
        if v > best {
            best = v;
            best_i = i;
        }
    }
    (best, best_i)
}

/// The chart statistic V(j) for the current smoothed state, with the design
/// point attaining the max.
pub fn v_statistic(state: &EwmaChartState, model: &ProcessModel, sb: &SigmaB) -> (f64, usize) {
    standardized_max(state.z, model, sb)
}

/// Time-varying control limit `l_b·sqrt((θ/(2−θ))·(1 − (1−θ)^{2j}))`.
pub fn control_limit(j: u64, config: &ChartConfig) -> f64 {
    let theta = config.theta;
    let asymptotic = theta / (2.0 - theta);
    if config.steady_state_limit {
        return config.l_b * asymptotic.sqrt();
    }
    let shrink = 1.0 - (1.0 - theta).powi(2 * j as i32);
    config.l_b * (asymptotic * shrink).sqrt()
}

/// Fits one sample, advances the EWMA, and evaluates the verdict.
///
/// The state is never auto-reset after a signal; resetting is the caller's
/// decision.
pub fn process_sample(
    state: &EwmaChartState,
    sample: &SampleMatrix,
    model: &ProcessModel,
    sb: &SigmaB,
    config: &ChartConfig,
) -> Result<(EwmaChartState, ChartVerdict)> {
    let mut scratch = CoefMatrix::new(vec![0.0; sample.p()], vec![0.0; sample.p()])?;
    process_sample_scratch(state, sample, model, sb, config, &mut scratch)
}

/// [`process_sample`] with a caller-provided coefficient scratch buffer.
pub(crate) fn process_sample_scratch(
    state: &EwmaChartState,
    sample: &SampleMatrix,
    model: &ProcessModel,
    sb: &SigmaB,
    config: &ChartConfig,
    scratch: &mut CoefMatrix,
) -> Result<(EwmaChartState, ChartVerdict)> {
    if sample.p() != model.p() {
        return Err(Error::DimensionMismatch(format!(
            "sample has p={} but model has p={}",
            sample.p(),
            model.p()
        )));
    }
    estimate::fit_profiles_into(sample, model.design(), scratch)?;
    let w = coef_sum(scratch);
    let next = ewma_update(state, w, config.theta);
    let (v, worst_point) = v_statistic(&next, model, sb);
    let limit = control_limit(next.j, config);
    let verdict = ChartVerdict { v, limit, signal: v > limit, worst_point };
    Ok((next, verdict))
}

/// Shewhart-style verdict on a raw (unsmoothed) coefficient-sum vector.
pub fn shewhart_verdict(
    b_hat_sum: CoefSumVector,
    model: &ProcessModel,
    sb: &SigmaB,
    m_alpha: f64,
) -> ChartVerdict {
    let (v, worst_point) = standardized_max(b_hat_sum, model, sb);
    ChartVerdict { v, limit: m_alpha, signal: v > m_alpha, worst_point }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimate::sigma_b;
    use crate::model::{build_model, ErrorCovariance};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn ref_model(rho: f64) -> ProcessModel {
        build_model(
            vec![2.0, 4.0, 6.0, 8.0],
            CoefMatrix::new(vec![3.0, 2.0], vec![2.0, 1.0]).unwrap(),
            ErrorCovariance::new(vec![vec![1.0, rho], vec![rho, 1.0]]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn init_at_in_control_sums() {
        let m = ref_model(0.5);
        let s = ewma_init(&m);
        assert_eq!(s.z, CoefSumVector { b0_sum: 5.0, b1_sum: 3.0 });
        assert_eq!(s.j, 0);

        let zero = build_model(
            vec![2.0, 4.0, 6.0, 8.0],
            CoefMatrix::new(vec![0.0, 0.0], vec![0.0, 0.0]).unwrap(),
            ErrorCovariance::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
        )
        .unwrap();
        let sz = ewma_init(&zero);
        assert_eq!((sz.z.b0_sum, sz.z.b1_sum), (0.0, 0.0));
    }

    #[test]
    fn update_rules() {
        let m = ref_model(0.5);
        let s = ewma_init(&m);

        // theta = 1: no smoothing
        let w = CoefSumVector { b0_sum: 6.5, b1_sum: 2.5 };
        let s1 = ewma_update(&s, w, 1.0);
        assert_eq!(s1.z, w);
        assert_eq!(s1.j, 1);

        // fixed point at the in-control value
        let s2 = ewma_update(&s, s.z, 0.2);
        assert_abs_diff_eq!(s2.z.b0_sum, s.z.b0_sum, epsilon = 1e-12);
        assert_abs_diff_eq!(s2.z.b1_sum, s.z.b1_sum, epsilon = 1e-12);

        // 0.2*6 + 0.8*5 = 5.2
        let s3 = ewma_update(&s, CoefSumVector { b0_sum: 6.0, b1_sum: 3.0 }, 0.2);
        assert_abs_diff_eq!(s3.z.b0_sum, 5.2, epsilon = 1e-12);
        assert_abs_diff_eq!(s3.z.b1_sum, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn v_zero_at_in_control() {
        let m = ref_model(0.5);
        let sb = sigma_b(m.sigma(), m.design()).unwrap();
        let s = ewma_init(&m);
        let (v, _) = v_statistic(&s, &m, &sb);
        assert_eq!(v, 0.0);
    }

    #[test]
    fn v_intercept_deviation_picks_min_variance_point() {
        let m = ref_model(0.5);
        let sb = sigma_b(m.sigma(), m.design()).unwrap();
        let s = EwmaChartState { z: CoefSumVector { b0_sum: 6.0, b1_sum: 3.0 }, j: 1 };
        let (v, worst) = v_statistic(&s, &m, &sb);
        // deviations are 1 at every point; point variances are 2.1, 0.9, 0.9, 2.1
        assert_abs_diff_eq!(v, 1.0 / 0.9f64.sqrt(), epsilon = 1e-12);
        // points 1 and 2 tie up to rounding
        assert!(worst == 1 || worst == 2, "worst = {worst}");

        // an exact tie keeps the smallest index: centered design, pure
        // intercept deviation gives identical variances at +/-1
        let mc = build_model(
            vec![-1.0, 1.0],
            CoefMatrix::new(vec![0.0, 0.0], vec![0.0, 0.0]).unwrap(),
            ErrorCovariance::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap(),
        )
        .unwrap();
        let sbc = sigma_b(mc.sigma(), mc.design()).unwrap();
        let sc = EwmaChartState { z: CoefSumVector { b0_sum: 1.0, b1_sum: 0.0 }, j: 1 };
        let (_, worst_tie) = v_statistic(&sc, &mc, &sbc);
        assert_eq!(worst_tie, 0);
    }

    #[test]
    fn control_limit_values() {
        let cfg = ChartConfig::new(0.2, 3.6233).unwrap();
        // j = 1: l_b * sqrt((0.2/1.8)*(1-0.64)) = l_b * 0.2
        assert_abs_diff_eq!(control_limit(1, &cfg), 3.6233 * 0.2, epsilon = 1e-12);
        // large j: asymptote l_b*sqrt(0.2/1.8)
        let asym = 3.6233 * (0.2f64 / 1.8).sqrt();
        assert_abs_diff_eq!(control_limit(500, &cfg), asym, epsilon = 1e-12);
        assert_abs_diff_eq!(asym, 1.2077667, epsilon = 1e-6);

        // theta = 1: constant at l_b
        let cfg1 = ChartConfig::new(1.0, 2.5).unwrap();
        for j in [1, 2, 10, 100] {
            assert_eq!(control_limit(j, &cfg1), 2.5);
        }

        // steady-state mode uses the asymptote from j = 1
        let cfg_ss = ChartConfig::new(0.2, 3.6233).unwrap().with_steady_state_limit(true);
        assert_abs_diff_eq!(control_limit(1, &cfg_ss), asym, epsilon = 1e-12);
    }

    #[test]
    fn process_sample_exact_mean_no_signal_at_theta_one() {
        let m = ref_model(0.5);
        let sb = sigma_b(m.sigma(), m.design()).unwrap();
        let cfg = ChartConfig::new(1.0, 3.0).unwrap();
        let s = ewma_init(&m);
        let sample = m.mean_response();
        let (next, verdict) = process_sample(&s, &sample, &m, &sb, &cfg).unwrap();
        assert_eq!(next.j, 1);
        assert!(verdict.v.abs() < 1e-10);
        assert!(!verdict.signal);
    }

    #[test]
    fn shewhart_matches_theta_one_update() {
        let m = ref_model(0.1);
        let sb = sigma_b(m.sigma(), m.design()).unwrap();
        let w = CoefSumVector { b0_sum: 6.3, b1_sum: 2.7 };
        let sv = shewhart_verdict(w, &m, &sb, 2.0);

        let s = ewma_update(&ewma_init(&m), w, 1.0);
        let (v, worst) = v_statistic(&s, &m, &sb);
        assert_eq!(sv.v, v);
        assert_eq!(sv.worst_point, worst);

        // in-control sums never signal
        let ic = coef_sum(m.b0());
        assert!(!shewhart_verdict(ic, &m, &sb, 1e-6).signal);
    }

    #[test]
    fn config_validation() {
        assert!(ChartConfig::new(0.0, 1.0).is_err());
        assert!(ChartConfig::new(1.1, 1.0).is_err());
        assert!(ChartConfig::new(0.2, -1.0).is_err());
        assert!(ChartConfig::new(0.2, 0.0).is_ok());
    }

    proptest! {
        #[test]
        fn limit_increasing_in_j_and_converging(theta in 0.05f64..0.95, l_b in 0.1f64..5.0) {
            let cfg = ChartConfig::new(theta, l_b).unwrap();
            // nondecreasing in j (strictly, until the geometric term
            // underflows), bounded by the asymptote
            let asym = l_b * (theta / (2.0 - theta)).sqrt();
            let mut prev = 0.0;
            for j in 1..60u64 {
                let lim = control_limit(j, &cfg);
                prop_assert!(lim >= prev);
                prop_assert!(lim <= asym + 1e-12);
                prev = lim;
            }
            prop_assert!(control_limit(1, &cfg) < asym);
            prop_assert!(control_limit(4000, &cfg) <= asym + 1e-12);
        }

        #[test]
        fn v_nonnegative_and_zero_only_at_center(d0 in -2.0f64..2.0, d1 in -2.0f64..2.0) {
            let m = ref_model(0.5);
            let sb = sigma_b(m.sigma(), m.design()).unwrap();
            let s = EwmaChartState {
                z: CoefSumVector { b0_sum: 5.0 + d0, b1_sum: 3.0 + d1 },
                j: 3,
            };
            let (v, _) = v_statistic(&s, &m, &sb);
            prop_assert!(v >= 0.0);
            if d0 != 0.0 || d1 != 0.0 {
                // deviations can only vanish at a single x; with 4 distinct
                // design points the max stays positive
                prop_assert!(v > 0.0);
            } else {
                prop_assert!(v == 0.0);
            }
        }
    }
}
