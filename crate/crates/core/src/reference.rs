//! Reference values for the default scenario grid, used by comparison reports.
//!
//! Rows run over `(theta, xi)` blocks in [`SCENARIOS`] order and, within a
//! block, over [`LAMBDAS`]. Columns follow [`COLUMNS`]. `None` is an unbounded
//! window.

pub const SCENARIOS: [(f64, f64); 4] = [(0.0, 0.0), (0.0, 0.5), (1.5, 0.0), (1.5, 0.5)];
pub const LAMBDAS: [f64; 4] = [18.0, 19.0, 19.9, 19.99];
pub const COLUMNS: [&str; 5] = ["K0.2", "K0.4", "K0.6", "G", "GS"];
/// Columns whose curves are fully specified (the rest are fitted stand-ins).
pub const EXACT_COLUMNS: [&str; 3] = ["K0.2", "K0.4", "K0.6"];

pub const WINDOWS_MM: [[Option<usize>; 5]; 16] = [
    [None, None, None, Some(60), None],
    [None, Some(280), Some(160), Some(40), Some(200)],
    [Some(180), Some(100), Some(80), Some(40), Some(80)],
    [Some(160), Some(100), Some(80), Some(40), Some(80)],
    [None, None, None, Some(60), None],
    [None, Some(280), Some(160), Some(40), Some(200)],
    [Some(180), Some(100), Some(80), Some(40), Some(80)],
    [Some(160), Some(100), Some(80), Some(40), Some(80)],
    [None, None, None, Some(200), None],
    [None, None, None, Some(100), None],
    [Some(320), Some(200), Some(160), Some(60), Some(160)],
    [Some(260), Some(180), Some(140), Some(60), Some(140)],
    [None, None, None, None, None],
    [None, None, None, Some(160), None],
    [Some(460), Some(280), Some(200), Some(80), Some(200)],
    [Some(340), Some(220), Some(180), Some(60), Some(180)],
];
pub const WINDOWS_MD: [[Option<usize>; 5]; 16] = [
    [None, None, None, Some(60), None],
    [None, None, Some(160), Some(40), Some(200)],
    [Some(120), Some(80), Some(60), Some(20), Some(60)],
    [Some(100), Some(80), Some(60), Some(20), Some(60)],
    [None, None, None, Some(60), None],
    [None, None, Some(160), Some(40), Some(200)],
    [Some(120), Some(80), Some(60), Some(20), Some(60)],
    [Some(100), Some(80), Some(60), Some(20), Some(60)],
    [None, None, None, Some(160), None],
    [None, None, None, Some(80), None],
    [Some(260), Some(160), Some(120), Some(40), Some(120)],
    [Some(180), Some(120), Some(100), Some(40), Some(100)],
    [None, None, None, None, None],
    [None, None, None, Some(160), None],
    [Some(380), Some(220), Some(160), Some(60), Some(160)],
    [Some(240), Some(160), Some(120), Some(40), Some(120)],
];
pub const GAINS_MM: [[f64; 5]; 16] = [
    [0.00, 0.00, 0.00, 0.00, 0.00],
    [0.00, 0.00, 0.00, 0.46, 0.00],
    [0.56, 1.93, 4.02, 21.19, 3.02],
    [2.23, 6.18, 12.07, 42.50, 9.08],
    [0.00, 0.00, 0.00, 0.00, 0.00],
    [0.00, 0.00, 0.00, 0.20, 0.00],
    [0.26, 0.84, 1.59, 8.49, 1.46],
    [1.04, 2.63, 4.57, 15.41, 4.27],
    [0.00, 0.00, 0.00, 0.00, 0.00],
    [0.00, 0.00, 0.00, 0.02, 0.00],
    [0.22, 1.09, 2.57, 16.67, 2.05],
    [1.57, 4.91, 10.03, 36.67, 7.71],
    [0.00, 0.00, 0.00, 0.00, 0.00],
    [0.00, 0.00, 0.00, 0.00, 0.00],
    [0.04, 0.29, 0.72, 5.48, 0.73],
    [0.54, 1.74, 3.31, 11.82, 3.20],
];
pub const GAINS_MD: [[f64; 5]; 16] = [
    [0.00, 0.00, 0.00, 0.00, 0.00],
    [0.00, 0.00, 0.00, 0.06, 0.00],
    [0.22, 0.86, 1.86, 13.24, 1.40],
    [2.30, 6.06, 11.59, 42.6, 8.84],
    [0.00, 0.00, 0.00, 0.00, 0.00],
    [0.00, 0.00, 0.00, 0.03, 0.00],
    [0.10, 0.38, 0.75, 5.59, 0.69],
    [1.07, 2.59, 4.42, 15.65, 4.18],
    [0.00, 0.00, 0.00, 0.00, 0.00],
    [0.00, 0.00, 0.00, 0.00, 0.00],
    [0.06, 0.39, 1.02, 10.26, 0.84],
    [1.80, 5.14, 10.11, 38.14, 7.84],
    [0.00, 0.00, 0.00, 0.00, 0.00],
    [0.00, 0.00, 0.00, 0.00, 0.00],
    [0.01, 0.09, 0.25, 3.51, 0.27],
    [0.69, 1.93, 3.49, 12.87, 3.38],
];
pub const LEVERS: [[f64; 8]; 20] = [
    [0.03, 0.87, 0.20, 0.70, 0.13, 0.82, 0.11, 0.79],
    [0.12, 0.88, 0.15, 0.87, 0.21, 0.83, 0.15, 0.82],
    [0.20, 0.87, 0.21, 0.79, 0.29, 0.85, 0.21, 0.81],
    [0.97, 0.81, 0.43, 0.73, 0.81, 0.84, 0.85, 0.68],
    [0.29, 0.80, 0.06, 0.92, 0.15, 0.87, 0.20, 0.86],
    [0.05, 0.87, 0.05, 0.84, 0.06, 0.82, 0.05, 0.79],
    [0.07, 0.88, 0.07, 0.87, 0.09, 0.83, 0.06, 0.82],
    [0.09, 0.87, 0.09, 0.79, 0.12, 0.85, 0.09, 0.81],
    [0.43, 0.81, 0.19, 0.73, 0.36, 0.84, 0.38, 0.68],
    [0.14, 0.80, 0.03, 0.92, 0.07, 0.87, 0.10, 0.86],
    [0.01, 0.99, 0.01, 0.97, 0.02, 0.98, 0.02, 0.97],
    [0.01, 0.99, 0.02, 0.98, 0.02, 0.98, 0.02, 0.98],
    [0.01, 0.99, 0.02, 0.98, 0.02, 0.99, 0.02, 0.99],
    [0.13, 0.96, 0.06, 0.98, 0.09, 0.97, 0.16, 0.99],
    [0.05, 0.96, 0.00, 1.00, 0.01, 0.99, 0.04, 0.97],
    [0.00, 1.00, 0.00, 1.00, 0.00, 1.00, 0.00, 1.00],
    [0.00, 1.00, 0.00, 1.00, 0.00, 1.00, 0.00, 1.00],
    [0.00, 1.00, 0.00, 1.00, 0.00, 1.00, 0.00, 1.00],
    [0.00, 1.00, 0.00, 1.00, 0.00, 1.00, 0.02, 0.99],
    [0.00, 0.99, 0.00, 1.00, 0.00, 1.00, 0.00, 0.99],
];

/// Levers table column layout: `(dE, alpha)` for M/M then M/D, first with
/// `mu` fixed and then with `mu` optimized.
pub const LEVERS_COLUMNS: [&str; 8] = [
    "dE_M_fixed",
    "alpha_M_fixed",
    "dE_D_fixed",
    "alpha_D_fixed",
    "dE_M_opt",
    "alpha_M_opt",
    "dE_D_opt",
    "alpha_D_opt",
];

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

fn scenario_index(theta: f64, xi: f64) -> Option<usize> {
    SCENARIOS
        .iter()
        .position(|&(t, x)| same(t, theta) && same(x, xi))
}

pub fn column_index(name: &str) -> Option<usize> {
    COLUMNS.iter().position(|c| *c == name)
}

fn row_index(theta: f64, xi: f64, lambda: f64) -> Option<usize> {
    let s = scenario_index(theta, xi)?;
    let l = LAMBDAS.iter().position(|&x| same(x, lambda))?;
    Some(4 * s + l)
}

/// Reference window; `Some(None)` is an unbounded cell, `None` is no reference.
pub fn window(
    deterministic: bool,
    theta: f64,
    xi: f64,
    lambda: f64,
    column: &str,
) -> Option<Option<usize>> {
    let r = row_index(theta, xi, lambda)?;
    let c = column_index(column)?;
    Some(if deterministic {
        WINDOWS_MD[r][c]
    } else {
        WINDOWS_MM[r][c]
    })
}

/// Reference efficiency gain in percent.
pub fn gain(deterministic: bool, theta: f64, xi: f64, lambda: f64, column: &str) -> Option<f64> {
    let r = row_index(theta, xi, lambda)?;
    let c = column_index(column)?;
    Some(if deterministic {
        GAINS_MD[r][c]
    } else {
        GAINS_MM[r][c]
    })
}

/// Reference levers row for `(theta, xi)` and a show-up column.
pub fn levers(theta: f64, xi: f64, column: &str) -> Option<[f64; 8]> {
    let s = scenario_index(theta, xi)?;
    let c = column_index(column)?;
    Some(LEVERS[5 * s + c])
}

/// Match rate of optimal windows between the two service laws, in percent.
pub const WINDOW_MATCH_RATE: f64 = 44.0;
/// Mean loss over non-matching cells, in percent.
pub const MEAN_MODEL_LOSS: f64 = 0.84;
/// Average joint-versus-sequential gain for `theta = 0` and `theta > 0`.
pub const JOINT_GAIN_THETA_ZERO: f64 = 0.0;
pub const JOINT_GAIN_THETA_POSITIVE: f64 = 4.0;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookups() {
        assert_eq!(window(false, 0.0, 0.0, 19.9, "K0.2"), Some(Some(180)));
        assert_eq!(window(true, 1.5, 0.5, 18.0, "G"), Some(None));
        assert_eq!(window(false, 0.1, 0.0, 19.9, "K0.2"), None);
        assert_eq!(gain(false, 0.0, 0.0, 19.99, "K0.6"), Some(12.07));
        assert_eq!(gain(true, 1.5, 0.5, 19.99, "K0.6"), Some(3.49));
        assert_eq!(levers(0.0, 0.0, "G").unwrap()[..2], [0.97, 0.81]);
    }
}
