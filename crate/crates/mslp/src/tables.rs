//! Built-in shift grids for the bivariate reference process, together with
//! the published ARL values they are compared against.
//!
//! Reference process: x = (2, 4, 6, 8), responses y1 = 3 + 2x and
//! y2 = 2 + x, unit error variances, correlation rho in {0.1, 0.5, 0.9}.
//! All shifts are expressed in units of sigma1.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ErrorCovariance, ProcessModel};
use crate::simulate::ShiftScenario;

/// Correlation levels used by every built-in grid, in emission order.
pub const RHOS: [f64; 3] = [0.1, 0.5, 0.9];

/// What kind of shift a grid row encodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftKind {
    Intercept1,
    Intercept2,
    Slope1,
    InterceptPair,
    SlopePair,
    InterceptSlope,
    Stddev1,
    StddevPair,
}

impl ShiftKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ShiftKind::Intercept1 => "intercept1",
            ShiftKind::Intercept2 => "intercept2",
            ShiftKind::Slope1 => "slope1",
            ShiftKind::InterceptPair => "intercept_pair",
            ShiftKind::SlopePair => "slope_pair",
            ShiftKind::InterceptSlope => "intercept_slope",
            ShiftKind::Stddev1 => "stddev1",
            ShiftKind::StddevPair => "stddev_pair",
        }
    }
}

/// One cell of a built-in grid: the scenario to simulate plus the published
/// ARL for that cell and, where available, the published ARL of the
/// competing chart quoted alongside it.
#[derive(Debug, Clone)]
pub struct TableRow {
    pub kind: ShiftKind,
    pub rho: f64,
    pub lambda1: f64,
    pub lambda2: Option<f64>,
    pub scenario: ShiftScenario,
    pub published_arl: Option<f64>,
    pub reference_arl: Option<f64>,
}

/// Rebuilds the model with off-diagonal correlation `rho`, keeping the error
/// variances. Built-in grids require exactly two responses.
pub fn with_correlation(model: &ProcessModel, rho: f64) -> Result<ProcessModel> {
    if model.p() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "built-in grids need p=2 responses, model has p={}",
            model.p()
        )));
    }
    let v1 = model.sigma().entry(0, 0);
    let v2 = model.sigma().entry(1, 1);
    let cov = rho * (v1 * v2).sqrt();
    ProcessModel::new(
        model.design().clone(),
        model.b0().clone(),
        ErrorCovariance::new(vec![vec![v1, cov], vec![cov, v2]])?,
    )
}

fn intercept1(lambda: f64) -> ShiftScenario {
    ShiftScenario {
        intercept_shifts: vec![lambda, 0.0],
        slope_shifts: vec![0.0, 0.0],
        stddev_factors: vec![1.0, 1.0],
    }
}

fn intercept2(lambda: f64) -> ShiftScenario {
    ShiftScenario {
        intercept_shifts: vec![0.0, lambda],
        slope_shifts: vec![0.0, 0.0],
        stddev_factors: vec![1.0, 1.0],
    }
}

fn slope1(lambda: f64) -> ShiftScenario {
    ShiftScenario {
        intercept_shifts: vec![0.0, 0.0],
        slope_shifts: vec![lambda, 0.0],
        stddev_factors: vec![1.0, 1.0],
    }
}

fn intercept_pair(l1: f64, l2: f64) -> ShiftScenario {
    ShiftScenario {
        intercept_shifts: vec![l1, l2],
        slope_shifts: vec![0.0, 0.0],
        stddev_factors: vec![1.0, 1.0],
    }
}

fn slope_pair(l1: f64, l2: f64) -> ShiftScenario {
    ShiftScenario {
        intercept_shifts: vec![0.0, 0.0],
        slope_shifts: vec![l1, l2],
        stddev_factors: vec![1.0, 1.0],
    }
}

fn intercept_slope(l1: f64, l2: f64) -> ShiftScenario {
    ShiftScenario {
        intercept_shifts: vec![l1, 0.0],
        slope_shifts: vec![l2, 0.0],
        stddev_factors: vec![1.0, 1.0],
    }
}

fn stddev1(lambda: f64) -> ShiftScenario {
    ShiftScenario {
        intercept_shifts: vec![0.0, 0.0],
        slope_shifts: vec![0.0, 0.0],
        stddev_factors: vec![lambda, 1.0],
    }
}

fn stddev_pair(l1: f64, l2: f64) -> ShiftScenario {
    ShiftScenario {
        intercept_shifts: vec![0.0, 0.0],
        slope_shifts: vec![0.0, 0.0],
        stddev_factors: vec![l1, l2],
    }
}

// Published ARL grids. Single-lambda tables are laid out one row per rho
// (0.1, 0.5, 0.9); pair tables are [lambda1][lambda2] with a (rho 0.1, 0.5,
// 0.9) triple per cell. `None` marks cells without a quoted competing chart.

const T1_LAMBDA: [f64; 10] = [0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6, 1.8, 2.0];
const T1_ARL: [[f64; 10]; 3] = [
    [199.57, 198.06, 191.21, 127.63, 9.90, 1.21, 1.00, 1.00, 1.00, 1.00],
    [199.61, 198.64, 195.40, 180.54, 80.66, 6.64, 1.07, 1.00, 1.00, 1.00],
    [199.76, 198.93, 197.01, 190.67, 154.28, 39.75, 3.54, 1.03, 1.00, 1.00],
];
const T1_REF: [[f64; 10]; 3] = [
    [66.6, 19.17, 9.2, 5.9, 4.3, 3.5, 2.9, 2.5, 2.3, 2.0],
    [53.9, 14.4, 7.3, 4.9, 3.7, 3.0, 2.5, 2.2, 2.0, 1.9],
    [14.8, 4.9, 3.0, 2.2, 1.9, 1.6, 1.3, 1.0, 1.0, 1.0],
];

const T2_ARL: [[f64; 10]; 3] = [
    [199.54, 198.27, 191.16, 129.31, 10.50, 1.09, 1.00, 1.00, 1.00, 1.00],
    [199.82, 198.78, 195.60, 180.66, 78.91, 6.34, 1.28, 1.00, 1.00, 1.00],
    [199.55, 199.01, 197.13, 190.52, 154.56, 38.71, 3.36, 1.01, 1.00, 1.00],
];

const T3_LAMBDA: [f64; 10] =
    [0.025, 0.05, 0.075, 0.1, 0.125, 0.15, 0.175, 0.2, 0.225, 0.25];
const T3_ARL: [[f64; 10]; 3] = [
    [199.87, 199.25, 198.00, 194.67, 182.22, 114.82, 21.28, 2.44, 1.03, 1.00],
    [199.92, 199.55, 198.48, 197.16, 192.62, 178.76, 116.16, 28.77, 4.29, 1.35],
    [200.11, 199.57, 198.76, 197.75, 195.78, 189.96, 171.01, 105.33, 29.86, 5.80],
];
const T3_REF: [[f64; 10]; 3] = [
    [108.5, 39.4, 17.7, 10.6, 7.4, 5.6, 4.6, 3.8, 3.4, 3.0],
    [91.0, 30.1, 13.9, 8.6, 6.1, 4.7, 3.9, 3.3, 2.9, 2.6],
    [30.2, 8.6, 4.8, 3.3, 2.6, 2.2, 2.0, 1.8, 1.6, 1.4],
];

const T4_LAMBDA: [f64; 7] = [0.3, 0.35, 0.4, 0.45, 0.5, 0.55, 0.6];
const T4_ARL: [[[f64; 3]; 7]; 7] = [
    [
        [191.25, 195.50, 197.23],
        [186.11, 193.67, 196.10],
        [177.10, 191.54, 194.73],
        [159.71, 187.17, 193.18],
        [128.47, 180.20, 190.52],
        [84.91, 168.75, 186.37],
        [45.84, 148.55, 180.87],
    ],
    [
        [186.26, 193.84, 196.20],
        [176.93, 191.26, 195.00],
        [160.05, 187.24, 192.71],
        [127.95, 180.30, 190.77],
        [84.84, 169.32, 186.48],
        [45.78, 148.81, 180.96],
        [22.21, 117.26, 170.47],
    ],
    [
        [177.07, 191.53, 194.58],
        [159.55, 187.45, 192.95],
        [128.66, 180.50, 190.59],
        [84.78, 168.88, 186.43],
        [48.09, 148.76, 180.35],
        [22.66, 116.79, 171.08],
        [10.52, 80.54, 153.47],
    ],
    [
        [159.12, 187.46, 193.08],
        [128.30, 180.20, 190.63],
        [86.01, 168.18, 187.06],
        [47.37, 147.88, 179.96],
        [22.13, 117.51, 169.65],
        [10.41, 81.18, 154.39],
        [3.93, 48.35, 127.34],
    ],
    [
        [127.19, 179.94, 190.29],
        [86.94, 168.48, 186.39],
        [48.59, 147.67, 180.44],
        [22.45, 116.10, 170.11],
        [10.42, 80.98, 153.95],
        [4.69, 48.39, 128.47],
        [2.20, 25.10, 95.79],
    ],
    [
        [86.66, 168.25, 186.76],
        [47.47, 149.09, 180.64],
        [23.51, 117.12, 170.52],
        [10.91, 80.54, 154.44],
        [4.26, 48.31, 128.98],
        [1.98, 25.59, 95.46],
        [1.43, 12.26, 63.64],
    ],
    [
        [46.39, 147.21, 180.67],
        [22.98, 116.98, 170.45],
        [9.52, 79.79, 153.79],
        [4.30, 47.88, 129.32],
        [2.30, 25.57, 96.41],
        [1.24, 12.68, 65.37],
        [1.13, 6.66, 39.66],
    ],
];
const T4_REF: [[Option<f64>; 7]; 7] = [
    [Some(25.2), None, Some(17.8), None, Some(12.6), None, None],
    [None, None, None, None, None, None, None],
    [Some(17.8), None, Some(14.4), None, Some(11.4), None, None],
    [None, None, None, None, None, None, None],
    [Some(12.4), None, Some(11.5), None, Some(9.9), None, None],
    [None, None, None, None, None, None, None],
    [None, None, None, None, None, None, None],
];

const T5_LAMBDA: [f64; 6] = [0.02, 0.04, 0.06, 0.08, 0.09, 0.1];
const T5_ARL: [[[f64; 3]; 6]; 6] = [
    [
        [199.43, 199.55, 199.62],
        [198.78, 199.29, 199.48],
        [197.50, 198.46, 198.82],
        [194.45, 197.22, 198.06],
        [191.64, 195.86, 197.02],
        [186.64, 193.68, 196.37],
    ],
    [
        [198.94, 199.36, 199.34],
        [197.42, 198.26, 198.76],
        [194.82, 196.82, 197.92],
        [186.63, 194.01, 196.44],
        [176.63, 191.45, 194.97],
        [154.07, 186.79, 192.86],
    ],
    [
        [197.61, 198.49, 198.74],
        [194.87, 196.92, 197.90],
        [186.87, 193.90, 196.45],
        [155.08, 186.44, 193.13],
        [115.97, 178.52, 189.98],
        [68.26, 163.28, 185.11],
    ],
    [
        [194.79, 197.16, 198.04],
        [186.73, 194.17, 196.35],
        [154.61, 186.66, 192.91],
        [68.60, 162.14, 184.97],
        [34.10, 135.80, 176.95],
        [14.20, 96.25, 162.95],
    ],
    [
        [191.80, 195.88, 197.30],
        [176.43, 191.28, 194.90],
        [114.95, 178.04, 190.08],
        [33.09, 135.93, 177.04],
        [13.90, 98.39, 162.40],
        [5.84, 57.99, 138.38],
    ],
    [
        [186.62, 194.19, 196.19],
        [154.37, 186.81, 192.94],
        [68.13, 163.50, 185.24],
        [13.95, 97.14, 162.34],
        [5.88, 56.97, 140.17],
        [2.47, 28.75, 105.87],
    ],
];
const T5_REF: [[Option<f64>; 6]; 6] = [
    [Some(116.6), Some(58.6), Some(26.9), Some(14.9), None, Some(9.8)],
    [Some(58.5), Some(45.3), Some(27.0), Some(16.1), None, Some(10.6)],
    [Some(27.1), Some(26.9), Some(21.4), Some(14.7), None, Some(10.6)],
    [Some(15.0), Some(16.3), Some(15.0), Some(12.6), None, Some(9.8)],
    [None, None, None, None, None, None],
    [Some(9.9), Some(10.5), Some(10.6), Some(9.9), None, Some(8.5)],
];

const T6_LAMBDA1: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
const T6_LAMBDA2: [f64; 7] = [0.02, 0.04, 0.06, 0.08, 0.1, 0.12, 0.14];
const T6_ARL: [[[f64; 3]; 7]; 5] = [
    [
        [199.55, 199.73, 199.72],
        [199.06, 199.16, 199.57],
        [197.67, 198.52, 198.90],
        [195.43, 197.20, 197.99],
        [188.32, 194.44, 196.38],
        [161.87, 187.69, 193.82],
        [81.73, 167.96, 186.43],
    ],
    [
        [199.00, 199.10, 199.21],
        [197.94, 198.72, 198.87],
        [195.45, 197.23, 198.07],
        [189.38, 194.85, 196.74],
        [167.18, 189.08, 194.13],
        [93.85, 172.55, 187.73],
        [22.35, 116.93, 170.18],
    ],
    [
        [197.86, 198.59, 198.95],
        [195.63, 197.34, 198.26],
        [189.91, 195.23, 196.99],
        [171.23, 189.91, 194.38],
        [103.96, 174.86, 188.56],
        [27.66, 125.06, 173.73],
        [4.00, 50.93, 132.28],
    ],
    [
        [195.92, 197.57, 198.46],
        [190.62, 195.36, 196.88],
        [174.07, 190.47, 194.44],
        [111.22, 176.77, 189.58],
        [30.74, 131.95, 175.85],
        [5.90, 56.02, 139.58],
        [1.63, 13.31, 68.75],
    ],
    [
        [191.10, 195.31, 197.09],
        [175.61, 190.78, 194.76],
        [119.47, 178.27, 189.60],
        [38.05, 138.24, 177.94],
        [6.83, 63.79, 143.12],
        [1.63, 16.28, 75.19],
        [1.04, 3.59, 24.88],
    ],
];
const T6_REF: [[Option<f64>; 7]; 5] = [
    [Some(51.4), Some(23.3), Some(13.2), Some(8.9), Some(6.7), None, None],
    [Some(24.6), Some(13.8), Some(9.3), Some(6.9), Some(5.5), None, None],
    [Some(14.6), Some(9.6), Some(7.1), Some(5.6), Some(4.6), None, None],
    [Some(9.9), Some(7.2), Some(5.7), Some(4.7), Some(4.0), None, None],
    [Some(7.3), Some(5.8), Some(4.8), Some(4.1), Some(3.6), None, None],
];

const T7_LAMBDA: [f64; 10] = [1.2, 1.4, 1.6, 1.8, 2.0, 2.2, 2.4, 2.6, 2.8, 3.0];
const T7_ARL: [[f64; 10]; 3] = [
    [197.31, 156.89, 112.36, 52.31, 12.34, 1.36, 1.13, 1.00, 1.00, 1.00],
    [198.30, 160.31, 112.31, 54.03, 13.61, 2.31, 1.26, 1.12, 1.00, 1.00],
    [199.30, 165.20, 114.96, 57.30, 14.31, 2.75, 1.65, 1.36, 1.10, 1.00],
];

const T8_LAMBDA: [f64; 5] = [1.1, 1.2, 1.3, 1.4, 1.5];
const T8_ARL: [[[f64; 3]; 5]; 5] = [
    [
        [141.42, 152.31, 167.65],
        [68.12, 74.87, 80.31],
        [33.21, 38.26, 43.91],
        [9.36, 12.32, 15.85],
        [3.21, 4.59, 6.89],
    ],
    [
        [68.26, 74.78, 80.30],
        [33.96, 38.21, 44.31],
        [9.39, 12.38, 15.78],
        [3.46, 4.56, 6.89],
        [2.56, 3.56, 5.61],
    ],
    [
        [33.23, 38.13, 44.02],
        [9.32, 12.36, 15.23],
        [3.31, 4.46, 6.90],
        [2.59, 3.26, 5.46],
        [1.14, 1.88, 3.13],
    ],
    [
        [9.48, 12.45, 15.26],
        [3.29, 4.53, 6.82],
        [2.65, 3.12, 5.56],
        [1.13, 1.89, 3.12],
        [1.08, 1.61, 2.56],
    ],
    [
        [3.3364, 4.4531, 6.7826],
        [2.5614, 3.1278, 5.5316],
        [1.1460, 1.8813, 3.1157],
        [1.0923, 1.5813, 2.5124],
        [1.0112, 1.3643, 1.4516],
    ],
];
const T8_REF: [[f64; 5]; 5] = [
    [81.6, 55.5, 39.1, 29.0, 22.0],
    [55.6, 41.9, 31.9, 24.3, 19.4],
    [39.7, 32.5, 25.3, 21.0, 17.2],
    [29.2, 24.3, 20.4, 17.4, 14.8],
    [22.2, 19.5, 17.1, 15.3, 13.0],
];

fn single_lambda_rows(
    kind: ShiftKind,
    lambdas: &[f64],
    arl: &[[f64; 10]; 3],
    reference: Option<&[[f64; 10]; 3]>,
    mk: fn(f64) -> ShiftScenario,
) -> Vec<TableRow> {
    let mut rows = Vec::with_capacity(RHOS.len() * lambdas.len());
    for (r, &rho) in RHOS.iter().enumerate() {
        for (c, &lambda) in lambdas.iter().enumerate() {
            rows.push(TableRow {
                kind,
                rho,
                lambda1: lambda,
                lambda2: None,
                scenario: mk(lambda),
                published_arl: Some(arl[r][c]),
                reference_arl: reference.map(|t| t[r][c]),
            });
        }
    }
    rows
}

fn pair_rows<const R: usize, const C: usize>(
    kind: ShiftKind,
    lambda1: &[f64; R],
    lambda2: &[f64; C],
    arl: &[[[f64; 3]; C]; R],
    reference: &[[Option<f64>; C]; R],
    mk: fn(f64, f64) -> ShiftScenario,
) -> Vec<TableRow> {
    let mut rows = Vec::with_capacity(R * C * RHOS.len());
    for (i, &l1) in lambda1.iter().enumerate() {
        for (j, &l2) in lambda2.iter().enumerate() {
            for (r, &rho) in RHOS.iter().enumerate() {
                rows.push(TableRow {
                    kind,
                    rho,
                    lambda1: l1,
                    lambda2: Some(l2),
                    scenario: mk(l1, l2),
                    published_arl: Some(arl[i][j][r]),
                    reference_arl: reference[i][j],
                });
            }
        }
    }
    rows
}

/// All cells of built-in grid `id` (1..=8), in emission order.
pub fn table_rows(id: u8) -> Result<Vec<TableRow>> {
    match id {
        1 => Ok(single_lambda_rows(
            ShiftKind::Intercept1,
            &T1_LAMBDA,
            &T1_ARL,
            Some(&T1_REF),
            intercept1,
        )),
        2 => Ok(single_lambda_rows(
            ShiftKind::Intercept2,
            &T1_LAMBDA,
            &T2_ARL,
            None,
            intercept2,
        )),
        3 => Ok(single_lambda_rows(
            ShiftKind::Slope1,
            &T3_LAMBDA,
            &T3_ARL,
            Some(&T3_REF),
            slope1,
        )),
        4 => Ok(pair_rows(
            ShiftKind::InterceptPair,
            &T4_LAMBDA,
            &T4_LAMBDA,
            &T4_ARL,
            &T4_REF,
            intercept_pair,
        )),
        5 => Ok(pair_rows(
            ShiftKind::SlopePair,
            &T5_LAMBDA,
            &T5_LAMBDA,
            &T5_ARL,
            &T5_REF,
            slope_pair,
        )),
        6 => Ok(pair_rows(
            ShiftKind::InterceptSlope,
            &T6_LAMBDA1,
            &T6_LAMBDA2,
            &T6_ARL,
            &T6_REF,
            intercept_slope,
        )),
        7 => Ok(single_lambda_rows(
            ShiftKind::Stddev1,
            &T7_LAMBDA,
            &T7_ARL,
            None,
            stddev1,
        )),
        8 => {
            let mut rows = Vec::with_capacity(5 * 5 * 3);
            for (i, &l1) in T8_LAMBDA.iter().enumerate() {
                for (j, &l2) in T8_LAMBDA.iter().enumerate() {
                    for (r, &rho) in RHOS.iter().enumerate() {
                        rows.push(TableRow {
                            kind: ShiftKind::StddevPair,
                            rho,
                            lambda1: l1,
                            lambda2: Some(l2),
                            scenario: stddev_pair(l1, l2),
                            published_arl: Some(T8_ARL[i][j][r]),
                            reference_arl: Some(T8_REF[i][j]),
                        });
                    }
                }
            }
            Ok(rows)
        }
        other => Err(Error::InvalidParameter(format!(
            "no built-in grid {other}; expected 1..=8"
        ))),
    }
}
