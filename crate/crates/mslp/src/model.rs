//! Profile model: design points, coefficient matrix, error covariance.
//!
//! The model is the known phase II baseline: `p` correlated responses, each
//! linear in one common explanatory variable observed at `n` fixed design
//! points. All inputs are validated here; downstream modules assume a valid
//! [`ProcessModel`].

use crate::error::{Error, Result};

/// Relative pivot tolerance for the triangular square-root factorization.
pub const PIVOT_RTOL: f64 = 1e-12;

/// Fixed explanatory-variable values shared by every sample, with the
/// precomputed mean and corrected sum of squares.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignPoints {
    x: Vec<f64>,
    x_bar: f64,
    s_xx: f64,
}

impl DesignPoints {
    /// Validates and summarizes a set of design points.
    ///
    /// Values are kept in the given order; duplicates are allowed as long as
    /// at least two points differ.
    pub fn new(x: Vec<f64>) -> Result<Self> {
        if x.len() < 2 {
            return Err(Error::DimensionMismatch(format!(
                "need at least 2 design points, got {}",
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("design points must be finite".into()));
        }
        let n = x.len() as f64;
        let x_bar = x.iter().sum::<f64>() / n;
        let s_xx: f64 = x.iter().map(|&xi| (xi - x_bar) * (xi - x_bar)).sum();
        if s_xx <= 0.0 {
            return Err(Error::DegenerateDesign);
        }
        Ok(Self { x, x_bar, s_xx })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn x_bar(&self) -> f64 {
        self.x_bar
    }

    pub fn s_xx(&self) -> f64 {
        self.s_xx
    }
}

/// The 2×p coefficient matrix: one (intercept, slope) pair per response.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefMatrix {
    pub intercepts: Vec<f64>,
    pub slopes: Vec<f64>,
}

impl CoefMatrix {
    pub fn new(intercepts: Vec<f64>, slopes: Vec<f64>) -> Result<Self> {
        if intercepts.is_empty() || intercepts.len() != slopes.len() {
            return Err(Error::DimensionMismatch(format!(
                "intercepts ({}) and slopes ({}) must have equal nonzero length",
                intercepts.len(),
                slopes.len()
            )));
        }
        Ok(Self { intercepts, slopes })
    }

    pub fn p(&self) -> usize {
        self.intercepts.len()
    }
}

/// The p×p error covariance with its lower-triangular square-root factor.
///
/// The factor is computed once at construction; it doubles as the
/// positive-definiteness check and is reused by the correlated-error sampler.
#[derive(Debug, Clone)]
pub struct ErrorCovariance {
    sigma: Vec<Vec<f64>>,
    chol: Vec<Vec<f64>>,
}

impl ErrorCovariance {
    pub fn new(sigma: Vec<Vec<f64>>) -> Result<Self> {
        let p = sigma.len();
        if p == 0 {
            return Err(Error::DimensionMismatch("covariance matrix is empty".into()));
        }
        for row in &sigma {
            if row.len() != p {
                return Err(Error::DimensionMismatch(format!(
                    "covariance matrix must be square ({}x{} row found)",
                    p,
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("covariance entries must be finite".into()));
            }
        }
        for u in 0..p {
            if sigma[u][u] <= 0.0 {
                return Err(Error::NotPositiveDefinite);
            }
            for v in 0..u {
                if sigma[u][v] != sigma[v][u] {
                    return Err(Error::DimensionMismatch(format!(
                        "covariance matrix is not symmetric at ({u},{v})"
                    )));
                }
            }
        }
        let chol = cholesky(&sigma)?;
        Ok(Self { sigma, chol })
    }

    pub fn p(&self) -> usize {
        self.sigma.len()
    }

    pub fn entry(&self, u: usize, v: usize) -> f64 {
        self.sigma[u][v]
    }

    pub fn matrix(&self) -> &[Vec<f64>] {
        &self.sigma
    }

    /// Lower-triangular factor L with Σ = L·Lᵀ.
    pub fn chol(&self) -> &[Vec<f64>] {
        &self.chol
    }

    /// Sum of all p² entries, 1ᵀΣ1: the variance of the summed error terms.
    pub fn total_sum(&self) -> f64 {
        self.sigma.iter().flatten().sum()
    }
}

fn cholesky(a: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let p = a.len();
    let mut l = vec![vec![0.0; p]; p];
    for j in 0..p {
        let mut d = a[j][j];
        for k in 0..j {
            d -= l[j][k] * l[j][k];
        }
        if d <= PIVOT_RTOL * a[j][j] {
            return Err(Error::NotPositiveDefinite);
        }
        l[j][j] = d.sqrt();
        for i in (j + 1)..p {
            let mut s = a[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            l[i][j] = s / l[j][j];
        }
    }
    Ok(l)
}

/// The validated phase II baseline: design, in-control coefficients, and
/// error covariance. Immutable after construction and safe to share across
/// concurrent workers.
#[derive(Debug, Clone)]
pub struct ProcessModel {
    design: DesignPoints,
    b0: CoefMatrix,
    sigma: ErrorCovariance,
}

impl ProcessModel {
    pub fn new(design: DesignPoints, b0: CoefMatrix, sigma: ErrorCovariance) -> Result<Self> {
        if b0.p() != sigma.p() {
            return Err(Error::DimensionMismatch(format!(
                "coefficient matrix has p={} but covariance has p={}",
                b0.p(),
                sigma.p()
            )));
        }
        Ok(Self { design, b0, sigma })
    }

    pub fn design(&self) -> &DesignPoints {
        &self.design
    }

    pub fn b0(&self) -> &CoefMatrix {
        &self.b0
    }

    pub fn sigma(&self) -> &ErrorCovariance {
        &self.sigma
    }

    pub fn n(&self) -> usize {
        self.design.n()
    }

    pub fn p(&self) -> usize {
        self.b0.p()
    }

    /// The n×p matrix of in-control mean responses: entry (i,j) is
    /// `β0j + β1j·x_i`.
    pub fn mean_response(&self) -> SampleMatrix {
        mean_response_of(&self.design, &self.b0)
    }
}

/// Mean responses for an arbitrary coefficient matrix over a design.
pub fn mean_response_of(design: &DesignPoints, b: &CoefMatrix) -> SampleMatrix {
    let n = design.n();
    let p = b.p();
    let mut m = SampleMatrix::zeros(n, p);
    for (i, &xi) in design.x().iter().enumerate() {
        for j in 0..p {
            m.set(i, j, b.intercepts[j] + b.slopes[j] * xi);
        }
    }
    m
}

/// Builds and validates a [`ProcessModel`] from raw inputs, precomputing the
/// design summaries.
pub fn build_model(x: Vec<f64>, b0: CoefMatrix, sigma: ErrorCovariance) -> Result<ProcessModel> {
    let design = DesignPoints::new(x)?;
    ProcessModel::new(design, b0, sigma)
}

/// A dense n×p matrix of responses for one sample, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    n: usize,
    p: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    pub fn zeros(n: usize, p: usize) -> Self {
        Self { n, p, data: vec![0.0; n * p] }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::DimensionMismatch("sample matrix has no rows".into()));
        }
        let p = rows[0].len();
        if p == 0 || rows.iter().any(|r| r.len() != p) {
            return Err(Error::DimensionMismatch("sample matrix rows have unequal length".into()));
        }
        let data = rows.into_iter().flatten().collect();
        Ok(Self { n, p, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.p + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.p + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.p..(i + 1) * self.p]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn ref_coefs() -> CoefMatrix {
        CoefMatrix::new(vec![3.0, 2.0], vec![2.0, 1.0]).unwrap()
    }

    #[test]
    fn build_model_precomputes_design_summaries() {
        let sigma = ErrorCovariance::new(vec![vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let m = build_model(vec![2.0, 4.0, 6.0, 8.0], ref_coefs(), sigma).unwrap();
        assert_abs_diff_eq!(m.design().x_bar(), 5.0);
        assert_abs_diff_eq!(m.design().s_xx(), 20.0);
        assert_eq!(m.n(), 4);
        assert_eq!(m.p(), 2);
    }

    #[test]
    fn all_equal_x_is_degenerate() {
        assert!(matches!(
            DesignPoints::new(vec![3.0, 3.0, 3.0]),
            Err(Error::DegenerateDesign)
        ));
    }

    #[test]
    fn indefinite_sigma_rejected() {
        // determinant is -3
        assert!(matches!(
            ErrorCovariance::new(vec![vec![1.0, 2.0], vec![2.0, 1.0]]),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn asymmetric_sigma_rejected() {
        assert!(ErrorCovariance::new(vec![vec![1.0, 0.2], vec![0.3, 1.0]]).is_err());
    }

    #[test]
    fn p_mismatch_rejected() {
        let sigma = ErrorCovariance::new(vec![vec![1.0]]).unwrap();
        assert!(matches!(
            build_model(vec![1.0, 2.0], ref_coefs(), sigma),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn mean_response_rows() {
        let sigma = ErrorCovariance::new(vec![vec![1.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let m = build_model(vec![2.0, 4.0, 6.0, 8.0], ref_coefs(), sigma).unwrap();
        let mr = m.mean_response();
        assert_abs_diff_eq!(mr.get(0, 0), 7.0); // 3 + 2*2
        assert_abs_diff_eq!(mr.get(0, 1), 4.0); // 2 + 1*2
        assert_abs_diff_eq!(mr.get(3, 0), 19.0);
        assert_abs_diff_eq!(mr.get(3, 1), 10.0);
    }

    #[test]
    fn zero_coefs_give_zero_mean() {
        let b = CoefMatrix::new(vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        let d = DesignPoints::new(vec![1.0, 2.0, 3.0]).unwrap();
        let mr = mean_response_of(&d, &b);
        for i in 0..3 {
            for j in 0..2 {
                assert_eq!(mr.get(i, j), 0.0);
            }
        }
    }

    #[test]
    fn constant_single_profile() {
        let b = CoefMatrix::new(vec![1.0], vec![0.0]).unwrap();
        let d = DesignPoints::new(vec![2.0, 4.0, 6.0, 8.0]).unwrap();
        let mr = mean_response_of(&d, &b);
        for i in 0..4 {
            assert_eq!(mr.get(i, 0), 1.0);
        }
    }

    #[test]
    fn duplicated_x_allowed_when_spread_remains() {
        let d = DesignPoints::new(vec![1.0, 1.0, 2.0]).unwrap();
        assert!(d.s_xx() > 0.0);
        // input order preserved
        assert_eq!(d.x(), &[1.0, 1.0, 2.0]);
    }

    #[test]
    fn chol_factor_reconstructs_sigma() {
        let sigma = ErrorCovariance::new(vec![vec![2.0, 0.6], vec![0.6, 1.5]]).unwrap();
        let l = sigma.chol();
        for u in 0..2 {
            for v in 0..2 {
                let mut s = 0.0;
                for k in 0..2 {
                    s += l[u][k] * l[v][k];
                }
                assert_abs_diff_eq!(s, sigma.entry(u, v), epsilon = 1e-12);
            }
        }
    }
}
