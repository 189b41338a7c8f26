//! Published simulation results, used only for side-by-side comparison in
//! `reproduce` output.
//!
//! Each row holds nine values: the three targets (mu1, mu0, delta), each at
//! `L = 2, 5, 10`.

use rmcst::sim::Target;
use rmcst::WeightScheme;

#[derive(Debug, Clone, Copy)]
pub struct ReferenceRow {
    pub scheme: &'static str,
    pub gamma: f64,
    pub values: [f64; 9],
}

const fn row(scheme: &'static str, gamma: f64, values: [f64; 9]) -> ReferenceRow {
    ReferenceRow { scheme, gamma, values }
}

pub const REFERENCE_L: [f64; 3] = [2.0, 5.0, 10.0];

/// Published value for a cell, if the table has one.
pub fn lookup(table: &[ReferenceRow], scheme: WeightScheme, gamma: f64, l: f64, target: Target) -> Option<f64> {
    let k = REFERENCE_L.iter().position(|&x| x == l)?;
    let t = match target {
        Target::Mu1 => 0,
        Target::Mu0 => 1,
        Target::Delta => 2,
    };
    let name = scheme.to_string();
    table.iter().find(|r| r.scheme == name && r.gamma == gamma).map(|r| r.values[3 * t + k])
}

/// True values of mu1, mu0, delta (super-population of 10^6 units).
pub const TABLE1_TRUTH: &[ReferenceRow] = &[
    row("ow", 1.0, [1.026, 1.497, 1.741, 1.854, 4.183, 7.207, -0.828, -2.687, -5.465]),
    row("ow", 3.0, [1.025, 1.517, 1.787, 1.852, 4.176, 7.191, -0.827, -2.659, -5.404]),
    row("ow", 5.0, [1.026, 1.505, 1.752, 1.853, 4.178, 7.193, -0.826, -2.673, -5.442]),
    row("iptw", 1.0, [1.024, 1.518, 1.797, 1.853, 4.179, 7.198, -0.829, -2.661, -5.402]),
    row("iptw", 3.0, [1.016, 1.636, 2.099, 1.845, 4.147, 7.136, -0.829, -2.511, -5.038]),
    row("iptw", 5.0, [1.012, 1.693, 2.245, 1.841, 4.132, 7.107, -0.829, -2.438, -4.862]),
    row("symtrim:0.05", 1.0, [1.024, 1.518, 1.797, 1.853, 4.179, 7.198, -0.829, -2.661, -5.402]),
    row("symtrim:0.05", 3.0, [1.020, 1.574, 1.923, 1.850, 4.165, 7.170, -0.829, -2.591, -5.247]),
    row("symtrim:0.05", 5.0, [1.023, 1.545, 1.839, 1.851, 4.170, 7.180, -0.828, -2.626, -5.341]),
    row("symtrim:0.1", 1.0, [1.024, 1.518, 1.795, 1.853, 4.179, 7.199, -0.829, -2.661, -5.404]),
    row("symtrim:0.1", 3.0, [1.024, 1.521, 1.786, 1.853, 4.177, 7.192, -0.828, -2.656, -5.406]),
    row("symtrim:0.1", 5.0, [1.027, 1.489, 1.704, 1.854, 4.182, 7.202, -0.827, -2.694, -5.498]),
    row("symtrim:0.15", 1.0, [1.025, 1.513, 1.782, 1.853, 4.181, 7.201, -0.829, -2.667, -5.419]),
    row("symtrim:0.15", 3.0, [1.028, 1.477, 1.680, 1.855, 4.185, 7.209, -0.827, -2.708, -5.529]),
    row("symtrim:0.15", 5.0, [1.031, 1.449, 1.613, 1.856, 4.190, 7.217, -0.825, -2.741, -5.604]),
    row("asymtrim:0", 1.0, [1.024, 1.518, 1.796, 1.853, 4.179, 7.198, -0.829, -2.661, -5.402]),
    row("asymtrim:0", 3.0, [1.016, 1.635, 2.096, 1.845, 4.147, 7.137, -0.829, -2.512, -5.041]),
    row("asymtrim:0", 5.0, [1.012, 1.688, 2.227, 1.841, 4.134, 7.111, -0.829, -2.446, -4.884]),
    row("asymtrim:0.01", 1.0, [1.026, 1.489, 1.718, 1.855, 4.186, 7.212, -0.829, -2.697, -5.494]),
    row("asymtrim:0.01", 3.0, [1.022, 1.531, 1.815, 1.852, 4.175, 7.190, -0.830, -2.644, -5.375]),
    row("asymtrim:0.01", 5.0, [1.023, 1.514, 1.769, 1.853, 4.177, 7.194, -0.830, -2.663, -5.425]),
    row("asymtrim:0.05", 1.0, [1.030, 1.436, 1.591, 1.857, 4.196, 7.231, -0.828, -2.760, -5.640]),
    row("asymtrim:0.05", 3.0, [1.030, 1.428, 1.572, 1.857, 4.195, 7.229, -0.827, -2.767, -5.656]),
    row("asymtrim:0.05", 5.0, [1.033, 1.396, 1.504, 1.858, 4.200, 7.238, -0.825, -2.804, -5.733]),
    row("truncate:0.025", 1.0, [1.024, 1.518, 1.797, 1.853, 4.179, 7.198, -0.829, -2.661, -5.402]),
    row("truncate:0.05", 1.0, [1.024, 1.518, 1.797, 1.853, 4.179, 7.198, -0.829, -2.661, -5.402]),
    row("truncate:0.1", 1.0, [1.024, 1.518, 1.797, 1.853, 4.179, 7.198, -0.829, -2.661, -5.402]),
    row("truncate:0.025", 3.0, [1.016, 1.636, 2.099, 1.845, 4.147, 7.136, -0.829, -2.511, -5.038]),
    row("truncate:0.05", 3.0, [1.016, 1.636, 2.099, 1.845, 4.147, 7.136, -0.829, -2.511, -5.038]),
    row("truncate:0.1", 3.0, [1.016, 1.636, 2.099, 1.845, 4.147, 7.136, -0.829, -2.511, -5.038]),
    row("truncate:0.025", 5.0, [1.012, 1.693, 2.245, 1.841, 4.132, 7.107, -0.829, -2.438, -4.862]),
    row("truncate:0.05", 5.0, [1.012, 1.693, 2.245, 1.841, 4.132, 7.107, -0.829, -2.438, -4.862]),
    row("truncate:0.1", 5.0, [1.012, 1.693, 2.245, 1.841, 4.132, 7.107, -0.829, -2.438, -4.862]),
];

/// Monte Carlo variance of IPTW over that of each scheme (n = 1000, 1000 replications).
pub const TABLE3_RELATIVE_EFFICIENCY: &[ReferenceRow] = &[
    row("ow", 1.0, [1.00, 1.08, 1.23, 1.00, 1.05, 1.07, 1.00, 1.08, 1.10]),
    row("ow", 3.0, [2.21, 3.60, 5.49, 1.50, 1.72, 1.70, 2.13, 2.97, 3.13]),
    row("ow", 5.0, [5.72, 9.71, 14.79, 3.36, 3.05, 2.65, 5.42, 7.02, 6.83]),
    row("iptw", 1.0, [1.00, 1.00, 1.00, 1.00, 1.00, 1.00, 1.00, 1.00, 1.00]),
    row("iptw", 3.0, [1.00, 1.00, 1.00, 1.00, 1.00, 1.00, 1.00, 1.00, 1.00]),
    row("iptw", 5.0, [1.00, 1.00, 1.00, 1.00, 1.00, 1.00, 1.00, 1.00, 1.00]),
    row("symtrim:0.05", 1.0, [1.00, 1.00, 1.00, 1.00, 1.00, 1.00, 1.00, 1.00, 1.00]),
    row("symtrim:0.05", 3.0, [2.03, 2.58, 3.15, 1.29, 1.35, 1.32, 1.91, 2.18, 2.16]),
    row("symtrim:0.05", 5.0, [4.56, 6.35, 7.91, 2.93, 2.52, 2.07, 4.43, 4.93, 4.56]),
    row("symtrim:0.1", 1.0, [1.00, 1.02, 1.03, 1.00, 1.00, 1.00, 1.00, 1.01, 1.00]),
    row("symtrim:0.1", 3.0, [1.94, 2.91, 4.21, 1.27, 1.45, 1.48, 1.88, 2.51, 2.66]),
    row("symtrim:0.1", 5.0, [4.62, 7.43, 10.98, 2.59, 2.36, 2.06, 4.16, 5.10, 5.01]),
    row("symtrim:0.15", 1.0, [1.01, 1.04, 1.09, 0.98, 0.99, 0.99, 1.00, 1.03, 1.02]),
    row("symtrim:0.15", 3.0, [1.64, 2.74, 4.62, 1.20, 1.47, 1.49, 1.59, 2.29, 2.63]),
    row("symtrim:0.15", 5.0, [4.31, 7.61, 12.49, 2.25, 2.15, 1.94, 3.87, 5.20, 5.12]),
    row("asymtrim:0", 1.0, [0.98, 1.00, 1.02, 1.00, 0.99, 1.00, 0.98, 0.99, 0.99]),
    row("asymtrim:0", 3.0, [0.97, 1.06, 1.10, 0.95, 0.95, 0.95, 0.91, 0.96, 0.98]),
    row("asymtrim:0", 5.0, [0.92, 0.94, 0.94, 0.92, 0.92, 0.91, 0.86, 0.86, 0.85]),
    row("asymtrim:0.01", 1.0, [0.87, 0.92, 1.06, 0.96, 1.03, 1.05, 0.89, 0.98, 1.04]),
    row("asymtrim:0.01", 3.0, [1.40, 2.04, 2.95, 1.20, 1.29, 1.31, 1.35, 1.73, 1.97]),
    row("asymtrim:0.01", 5.0, [2.78, 4.48, 6.47, 2.69, 2.36, 1.91, 2.69, 3.49, 3.66]),
    row("asymtrim:0.05", 1.0, [0.68, 0.77, 1.03, 0.80, 0.91, 0.99, 0.71, 0.86, 0.99]),
    row("asymtrim:0.05", 3.0, [1.20, 2.28, 4.30, 0.99, 1.14, 1.21, 1.17, 1.77, 2.12]),
    row("asymtrim:0.05", 5.0, [2.75, 5.72, 11.24, 1.68, 1.53, 1.46, 2.57, 3.83, 3.91]),
    row("truncate:0.025", 1.0, [1.01, 1.04, 1.09, 1.00, 1.02, 1.02, 1.01, 1.03, 1.04]),
    row("truncate:0.025", 3.0, [1.43, 1.53, 1.63, 1.14, 1.14, 1.10, 1.37, 1.39, 1.37]),
    row("truncate:0.025", 5.0, [1.15, 1.18, 1.17, 1.29, 1.10, 1.04, 1.17, 1.16, 1.13]),
    row("truncate:0.05", 1.0, [1.02, 1.07, 1.15, 1.00, 1.04, 1.05, 1.02, 1.06, 1.07]),
    row("truncate:0.05", 3.0, [1.73, 1.94, 2.15, 1.30, 1.30, 1.22, 1.64, 1.71, 1.65]),
    row("truncate:0.05", 5.0, [1.54, 1.64, 1.64, 1.52, 1.24, 1.13, 1.53, 1.53, 1.45]),
    row("truncate:0.1", 1.0, [1.03, 1.12, 1.25, 1.01, 1.06, 1.09, 1.03, 1.10, 1.13]),
    row("truncate:0.1", 3.0, [2.21, 2.69, 3.20, 1.48, 1.55, 1.46, 2.06, 2.28, 2.22]),
    row("truncate:0.1", 5.0, [2.84, 3.23, 3.42, 2.14, 1.76, 1.49, 2.74, 2.76, 2.55]),
];

/// Closed-form 95% interval coverage in percent (n = 1000, 1000 replications).
pub const TABLE4_COVERAGE: &[ReferenceRow] = &[
    row("ow", 1.0, [96.8, 97.6, 97.6, 94.4, 94.6, 93.0, 96.7, 96.5, 94.9]),
    row("ow", 3.0, [96.6, 96.4, 96.3, 94.8, 94.5, 94.7, 96.0, 96.1, 95.7]),
    row("ow", 5.0, [95.4, 96.4, 95.5, 92.8, 95.3, 93.6, 94.7, 95.0, 94.8]),
    row("iptw", 1.0, [97.3, 97.5, 97.6, 94.9, 94.3, 92.2, 96.4, 96.3, 94.6]),
    row("iptw", 3.0, [94.5, 91.8, 87.1, 93.0, 92.4, 90.6, 92.6, 90.3, 86.7]),
    row("iptw", 5.0, [80.1, 75.3, 70.1, 87.8, 87.3, 84.9, 77.6, 73.5, 74.5]),
    row("symtrim:0.05", 1.0, [97.2, 97.5, 97.6, 95.0, 94.4, 92.2, 96.4, 96.3, 94.6]),
    row("symtrim:0.05", 3.0, [97.0, 96.2, 95.1, 93.1, 93.0, 92.1, 96.6, 94.8, 93.4]),
    row("symtrim:0.05", 5.0, [95.8, 95.7, 94.9, 91.8, 93.6, 92.6, 95.2, 94.4, 92.5]),
    row("symtrim:0.1", 1.0, [97.2, 97.6, 97.8, 94.9, 94.4, 92.3, 96.5, 96.5, 94.6]),
    row("symtrim:0.1", 3.0, [96.3, 96.4, 95.2, 93.3, 93.6, 94.2, 95.8, 95.4, 95.6]),
    row("symtrim:0.1", 5.0, [95.1, 94.2, 93.4, 91.8, 93.4, 92.0, 94.8, 93.1, 92.9]),
    row("symtrim:0.15", 1.0, [97.1, 97.8, 97.5, 94.8, 94.5, 92.3, 96.9, 97.4, 94.6]),
    row("symtrim:0.15", 3.0, [94.3, 94.7, 94.0, 94.4, 95.0, 94.8, 94.9, 94.7, 94.6]),
    row("symtrim:0.15", 5.0, [94.7, 94.6, 94.9, 92.3, 94.4, 92.1, 94.3, 93.8, 93.4]),
    row("asymtrim:0", 1.0, [97.1, 97.6, 97.5, 94.7, 94.2, 92.6, 96.2, 96.3, 95.0]),
    row("asymtrim:0", 3.0, [91.2, 92.4, 88.0, 89.0, 89.6, 89.3, 88.7, 88.0, 84.1]),
    row("asymtrim:0", 5.0, [81.5, 80.9, 76.6, 77.1, 78.5, 81.4, 77.9, 72.0, 69.7]),
    row("asymtrim:0.01", 1.0, [95.6, 96.2, 96.4, 94.7, 94.3, 92.7, 94.9, 95.7, 94.9]),
    row("asymtrim:0.01", 3.0, [92.0, 93.5, 91.8, 92.6, 91.4, 92.7, 91.5, 90.7, 90.6]),
    row("asymtrim:0.01", 5.0, [88.4, 89.3, 89.4, 91.9, 93.0, 90.6, 88.8, 87.6, 88.4]),
    row("asymtrim:0.05", 1.0, [94.4, 94.3, 94.7, 94.4, 94.0, 93.5, 94.2, 93.6, 94.3]),
    row("asymtrim:0.05", 3.0, [91.7, 91.8, 92.7, 93.9, 94.2, 94.0, 91.4, 91.0, 91.7]),
    row("asymtrim:0.05", 5.0, [90.1, 91.2, 93.4, 91.2, 92.6, 92.4, 91.2, 90.9, 92.2]),
    row("truncate:0.025", 1.0, [97.1, 96.9, 97.8, 94.8, 94.9, 92.5, 96.4, 96.5, 94.8]),
    row("truncate:0.025", 3.0, [95.4, 92.3, 88.3, 93.7, 93.1, 91.3, 94.1, 92.0, 89.4]),
    row("truncate:0.025", 5.0, [80.6, 75.8, 70.5, 87.9, 87.4, 84.9, 78.1, 73.8, 74.6]),
    row("truncate:0.05", 1.0, [96.8, 96.5, 96.7, 94.8, 95.0, 92.6, 96.7, 96.3, 94.6]),
    row("truncate:0.05", 3.0, [94.6, 92.1, 88.4, 94.3, 93.8, 91.2, 94.0, 92.5, 90.3]),
    row("truncate:0.05", 5.0, [82.6, 77.7, 72.9, 89.4, 89.1, 85.8, 79.9, 76.7, 77.3]),
    row("truncate:0.1", 1.0, [94.1, 93.8, 94.4, 95.0, 95.2, 93.0, 95.3, 95.9, 95.3]),
    row("truncate:0.1", 3.0, [90.2, 86.3, 82.1, 95.2, 94.2, 91.5, 91.9, 90.8, 91.6]),
    row("truncate:0.1", 5.0, [83.2, 77.9, 72.7, 93.0, 92.8, 88.5, 83.2, 81.0, 83.1]),
];

/// Bias times 100, n = 250 design without the PS outcome term.
pub const TABLE5_BIAS_X100: &[ReferenceRow] = &[
    row("ow", 1.0, [0.00, 0.37, 1.83, 0.02, 0.15, 0.37, 0.11, -0.39, -1.66]),
    row("ow", 3.0, [0.09, 0.52, 2.18, 0.17, 0.33, 0.58, 0.63, -0.15, -1.57]),
    row("ow", 5.0, [0.16, 0.89, 3.10, 0.20, 0.36, 0.76, 0.43, -0.98, -2.33]),
    row("iptw", 1.0, [-0.02, 0.38, 1.91, 0.01, 0.10, 0.21, 0.12, -0.57, -2.19]),
    row("iptw", 3.0, [-0.41, -0.46, 0.58, 0.08, 0.11, -0.18, 2.73, 1.48, -1.25]),
    row("iptw", 5.0, [-1.51, -2.85, -2.92, -0.22, -0.37, -0.80, 6.75, 5.60, 2.47]),
];

/// Relative efficiency, n = 250 design without the PS outcome term.
pub const TABLE5_RELATIVE_EFFICIENCY: &[ReferenceRow] = &[
    row("ow", 1.0, [1.00, 1.00, 1.03, 1.05, 1.05, 1.05, 1.00, 1.02, 1.05]),
    row("ow", 3.0, [1.60, 1.66, 1.91, 1.64, 1.52, 1.38, 1.64, 1.61, 1.65]),
    row("ow", 5.0, [1.95, 2.14, 2.58, 2.02, 1.80, 1.49, 2.00, 1.93, 1.92]),
    row("iptw", 1.0, [1.00, 1.00, 1.00, 1.00, 1.00, 1.00, 1.00, 1.00, 1.00]),
    row("iptw", 3.0, [1.00, 1.00, 1.00, 1.00, 1.00, 1.00, 1.00, 1.00, 1.00]),
    row("iptw", 5.0, [1.00, 1.00, 1.00, 1.00, 1.00, 1.00, 1.00, 1.00, 1.00]),
];

/// Closed-form coverage, n = 250 design without the PS outcome term.
pub const TABLE5_COVERAGE_CLOSED_FORM: &[ReferenceRow] = &[
    row("ow", 1.0, [94.6, 95.3, 96.1, 93.6, 94.5, 93.1, 95.5, 94.8, 94.2]),
    row("ow", 3.0, [93.7, 92.1, 91.3, 90.8, 92.3, 91.6, 94.6, 93.1, 90.8]),
    row("ow", 5.0, [92.4, 92.3, 92.3, 89.2, 91.5, 90.9, 93.8, 92.1, 91.5]),
    row("iptw", 1.0, [96.3, 96.3, 96.1, 93.6, 93.2, 92.8, 95.5, 94.4, 94.5]),
    row("iptw", 3.0, [93.7, 91.6, 88.3, 87.0, 88.1, 87.4, 91.4, 88.6, 86.5]),
    row("iptw", 5.0, [90.2, 84.5, 79.3, 84.9, 86.2, 84.7, 87.1, 83.9, 84.7]),
];

/// Percentile bootstrap coverage (B = 200), n = 250 design without the PS outcome term.
pub const TABLE5_COVERAGE_BOOTSTRAP: &[ReferenceRow] = &[
    row("ow", 1.0, [94.6, 95.2, 94.6, 93.6, 94.5, 93.9, 95.7, 94.4, 94.2]),
    row("ow", 3.0, [93.9, 92.6, 91.0, 91.8, 92.8, 93.0, 95.1, 93.1, 91.5]),
    row("ow", 5.0, [93.5, 93.7, 92.2, 90.4, 92.7, 93.2, 95.5, 92.9, 92.7]),
    row("iptw", 1.0, [95.4, 95.5, 94.8, 93.6, 93.7, 93.3, 95.4, 94.4, 94.9]),
    row("iptw", 3.0, [94.0, 91.4, 88.3, 88.6, 90.2, 90.6, 93.7, 90.1, 89.3]),
    row("iptw", 5.0, [91.6, 86.7, 81.9, 88.7, 91.2, 89.9, 90.9, 88.3, 88.5]),
];
