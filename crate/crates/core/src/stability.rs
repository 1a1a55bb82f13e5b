//! Lyapunov–Krasovskii certificate for the delayed error dynamics.
//!
//! For coefficients `γ = (γ₁, γ₂, γ₃) > 0` the closed loop is certified
//! stable when
//!
//! ```text
//! α₁ = 2γ₁k − 2γ₃τn³k² − (γ₂ + γ₃/(2τ) + γ₁βk)n
//! α₂ = γ₃/(2τ) − γ₁βk − 2γ₃τn²β²k²
//! α₃ = γ₂ − γ₃/(2τ)
//! ```
//!
//! are all positive. The conditions are linear and homogeneous in `γ`, so
//! the search fixes `γ₁ = 1` and solves a small linear program.

use nalgebra::{DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::comms::{CommGraph, StateHistory};

/// Margin turning the open conditions `α > 0` into closed ones.
pub const MARGIN: f64 = 1e-9;
/// Absolute tolerance of [`max_certifiable_delay`].
pub const DELAY_TOLERANCE: f64 = 1e-6;
/// Resolution of the independent grid scan along each axis.
pub const GRID_RESOLUTION: usize = 400;

const LP_LOWER: f64 = -1e3;
const LP_UPPER: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("history covers {available} s, need {required} s")]
    InsufficientHistory { required: f64, available: f64 },
}

/// Gains, topology size and delay bound being certified.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateInputs {
    pub n: usize,
    pub tau: f64,
    pub k: f64,
    pub beta: f64,
}

impl CertificateInputs {
    pub fn validate(&self) -> Result<(), StabilityError> {
        if self.n < 2 {
            return Err(StabilityError::InvalidParams(format!("need at least 2 robots, got {}", self.n)));
        }
        for (name, v) in [("tau", self.tau), ("k", self.k), ("beta", self.beta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(StabilityError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub n: usize,
    pub tau: f64,
    pub k: f64,
    pub beta: f64,
    pub gamma: [f64; 3],
    pub alpha: [f64; 3],
}

impl Certificate {
    pub fn is_valid(&self) -> bool {
        self.gamma.iter().all(|g| *g > 0.0) && self.alpha.iter().all(|a| *a > 0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CertificateResult {
    Certified(Certificate),
    /// No `γ` meets the margin; `best_margin` is the optimum of the linear
    /// program (the largest achievable `min(α, γ₂, γ₃)` with `γ₁ = 1`).
    Infeasible { best_margin: f64 },
}

impl CertificateResult {
    pub fn is_feasible(&self) -> bool {
        matches!(self, CertificateResult::Certified(_))
    }

    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            CertificateResult::Certified(c) => Some(c),
            CertificateResult::Infeasible { .. } => None,
        }
    }
}

/// JSON report written by the `certify` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub inputs: CertificateInputs,
    pub feasible: bool,
    pub gamma: Option<[f64; 3]>,
    pub alpha: Option<[f64; 3]>,
    pub best_margin: f64,
    pub necessary_delay_bound: f64,
    pub max_certifiable_delay: Option<f64>,
}

pub fn alpha_conditions(gamma: [f64; 3], k: f64, beta: f64, n: usize, tau: f64) -> Result<[f64; 3], StabilityError> {
    CertificateInputs { n, tau, k, beta }.validate()?;
    if let Some(g) = gamma.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
        return Err(StabilityError::InvalidParams(format!("gamma entries must be positive, got {g}")));
    }
    let [g1, g2, g3] = gamma;
    let nf = n as f64;
    let a1 = 2.0 * g1 * k - 2.0 * g3 * tau * nf.powi(3) * k * k - (g2 + g3 / (2.0 * tau) + g1 * beta * k) * nf;
    let a2 = g3 / (2.0 * tau) - g1 * beta * k - 2.0 * g3 * tau * nf * nf * beta * beta * k * k;
    let a3 = g2 - g3 / (2.0 * tau);
    Ok([a1, a2, a3])
}

/// `1 / (2nβk)`: no delay at or above this value can be certified.
pub fn necessary_delay_bound(k: f64, beta: f64, n: usize) -> f64 {
    1.0 / (2.0 * n as f64 * beta * k)
}

/// Constraints `A x ≤ b` over `x = (γ₂, γ₃, s)` with `γ₁ = 1`, encoding
/// `α ≥ s`, `γ₂ ≥ s`, `γ₃ ≥ s` and box bounds on `s`.
fn lp_constraints(inp: &CertificateInputs) -> Vec<(Vector3<f64>, f64)> {
    let CertificateInputs { n, tau, k, beta } = *inp;
    let nf = n as f64;
    let c1 = 2.0 * tau * nf.powi(3) * k * k + nf / (2.0 * tau);
    let c2 = 1.0 / (2.0 * tau) - 2.0 * tau * nf * nf * beta * beta * k * k;
    vec![
        (Vector3::new(nf, c1, 1.0), 2.0 * k - nf * beta * k),
        (Vector3::new(0.0, -c2, 1.0), -beta * k),
        (Vector3::new(-1.0, 1.0 / (2.0 * tau), 1.0), 0.0),
        (Vector3::new(-1.0, 0.0, 1.0), 0.0),
        (Vector3::new(0.0, -1.0, 1.0), 0.0),
        (Vector3::new(0.0, 0.0, 1.0), LP_UPPER),
        (Vector3::new(0.0, 0.0, -1.0), -LP_LOWER),
    ]
}

/// Maximises `s` by enumerating the vertices of the (pointed) feasible
/// polyhedron.
fn solve_lp(inp: &CertificateInputs) -> Option<Vector3<f64>> {
    let cons = lp_constraints(inp);
    let m = cons.len();
    let mut best: Option<Vector3<f64>> = None;
    for a in 0..m {
        for b in a + 1..m {
            for c in b + 1..m {
                let mat = Matrix3::from_rows(&[cons[a].0.transpose(), cons[b].0.transpose(), cons[c].0.transpose()]);
                let Some(inv) = mat.try_inverse() else { continue };
                let x = inv * Vector3::new(cons[a].1, cons[b].1, cons[c].1);
                let feasible = cons.iter().all(|(row, rhs)| row.dot(&x) <= rhs + 1e-9 * (1.0 + rhs.abs()));
                if feasible && best.map_or(true, |bx| x[2] > bx[2]) {
                    best = Some(x);
                }
            }
        }
    }
    best
}

/// Searches for Lyapunov coefficients certifying `(k, β, n, τ)`.
pub fn find_certificate(k: f64, beta: f64, n: usize, tau: f64) -> Result<CertificateResult, StabilityError> {
    let inputs = CertificateInputs { n, tau, k, beta };
    inputs.validate()?;
    let Some(x) = solve_lp(&inputs) else {
        return Ok(CertificateResult::Infeasible { best_margin: LP_LOWER });
    };
    let best_margin = x[2];
    if best_margin <= MARGIN {
        return Ok(CertificateResult::Infeasible { best_margin });
    }
    let gamma = [1.0, x[0], x[1]];
    let alpha = alpha_conditions(gamma, k, beta, n, tau)?;
    if alpha.iter().any(|a| *a <= MARGIN) {
        return Ok(CertificateResult::Infeasible { best_margin });
    }
    Ok(CertificateResult::Certified(Certificate { n, tau, k, beta, gamma, alpha }))
}

/// Brute-force search over a log-spaced `(γ₂, γ₃)` grid with `γ₁ = 1`.
/// Returns the first grid point meeting the margin.
pub fn grid_scan(k: f64, beta: f64, n: usize, tau: f64, resolution: usize) -> Result<Option<[f64; 3]>, StabilityError> {
    CertificateInputs { n, tau, k, beta }.validate()?;
    let (lo, hi) = (-12.0f64, 6.0f64);
    let axis: Vec<f64> = (0..resolution)
        .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (resolution.max(2) - 1) as f64))
        .collect();
    for &g2 in &axis {
        for &g3 in &axis {
            let gamma = [1.0, g2, g3];
            let alpha = alpha_conditions(gamma, k, beta, n, tau)?;
            if alpha.iter().all(|a| *a > MARGIN) {
                return Ok(Some(gamma));
            }
        }
    }
    Ok(None)
}

/// Largest certifiable delay bound, by bisection to [`DELAY_TOLERANCE`].
/// `None` when not even a vanishing delay can be certified.
pub fn max_certifiable_delay(k: f64, beta: f64, n: usize) -> Result<Option<f64>, StabilityError> {
    let upper = necessary_delay_bound(k, beta, n);
    CertificateInputs { n, tau: upper, k, beta }.validate()?;
    let feasible = |tau: f64| find_certificate(k, beta, n, tau).map(|r| r.is_feasible());
    let mut lo = upper * 1e-6;
    if !feasible(lo)? {
        return Ok(None);
    }
    let mut hi = upper;
    while hi - lo > DELAY_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if feasible(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

pub fn certificate_report(inputs: CertificateInputs, with_max_delay: bool) -> Result<CertificateReport, StabilityError> {
    let result = find_certificate(inputs.k, inputs.beta, inputs.n, inputs.tau)?;
    let max_delay = if with_max_delay { max_certifiable_delay(inputs.k, inputs.beta, inputs.n)? } else { None };
    let (gamma, alpha, best_margin) = match result {
        CertificateResult::Certified(c) => (Some(c.gamma), Some(c.alpha), c.alpha.iter().copied().fold(f64::INFINITY, f64::min)),
        CertificateResult::Infeasible { best_margin } => (None, None, best_margin),
    };
    Ok(CertificateReport {
        inputs,
        feasible: result.is_feasible(),
        gamma,
        alpha,
        best_margin,
        necessary_delay_bound: necessary_delay_bound(inputs.k, inputs.beta, inputs.n),
        max_certifiable_delay: max_delay,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSample {
    pub t: f64,
    pub v: f64,
    pub v1: f64,
    pub v2: f64,
    pub v3: f64,
}

/// Timestamped joint errors of every robot, oldest first.
pub type TrajectoryWindow = [(f64, Vec<DVector<f64>>)];

/// Lyapunov–Krasovskii functional at the last sample of `window`:
///
/// * `V₁ = γ₁ Σᵢ ‖ξᵢ(t)‖²`
/// * `V₂ = γ₂ Σᵢ dᵢ ∫_{t−τ}^{t} ‖ξᵢ‖² ds`
/// * `V₃ = γ₃ Σᵢ dᵢ ∫_{t−τ}^{t} (s − t + τ) ‖ξ̇ᵢ‖² ds`
///
/// where `dᵢ = Σⱼ a_ji`. `‖ξ‖²` is integrated piecewise linearly between
/// samples and `ξ̇` is the forward difference, constant on each interval.
pub fn lyapunov_value(
    gamma: [f64; 3],
    tau: f64,
    graph: &CommGraph,
    window: &TrajectoryWindow,
) -> Result<LyapunovSample, StabilityError> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(StabilityError::InvalidParams(format!("tau must be positive, got {tau}")));
    }
    let (Some(first), Some(last)) = (window.first(), window.last()) else {
        return Err(StabilityError::InsufficientHistory { required: tau, available: 0.0 });
    };
    let t = last.0;
    let start = t - tau;
    let available = t - first.0;
    if available + 1e-9 < tau {
        return Err(StabilityError::InsufficientHistory { required: tau, available });
    }
    let n = graph.n();
    if window.iter().any(|(_, xs)| xs.len() != n) {
        return Err(StabilityError::InvalidParams("window robot count does not match the graph".into()));
    }
    if window.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(StabilityError::InvalidParams("window timestamps must increase".into()));
    }

    let v1 = gamma[0] * last.1.iter().map(|x| x.norm_squared()).sum::<f64>();
    let mut v2 = 0.0;
    let mut v3 = 0.0;
    for i in 0..n {
        let weight = graph.out_degree(i) as f64;
        if weight == 0.0 {
            continue;
        }
        let (mut sq, mut kin) = (0.0, 0.0);
        for w in window.windows(2) {
            let (ta, tb) = (w[0].0, w[1].0);
            if tb <= start {
                continue;
            }
            let a = ta.max(start);
            let h = tb - ta;
            let (fa, fb) = (w[0].1[i].norm_squared(), w[1].1[i].norm_squared());
            let f_at_a = fa + (fb - fa) * (a - ta) / h;
            sq += 0.5 * (tb - a) * (f_at_a + fb);
            let rate = ((&w[1].1[i] - &w[0].1[i]) / h).norm_squared();
            kin += rate * 0.5 * ((tb - start).powi(2) - (a - start).powi(2));
        }
        v2 += weight * sq;
        v3 += weight * kin;
    }
    v2 *= gamma[1];
    v3 *= gamma[2];
    Ok(LyapunovSample { t, v: v1 + v2 + v3, v1, v2, v3 })
}

/// Samples `history` on the grid `t_end − m·dt, …, t_end` covering the last
/// `τ` seconds. Times before the first broadcast read the initial errors.
pub fn window_from_history(history: &StateHistory, t_end: f64, tau: f64, dt: f64) -> Vec<(f64, Vec<DVector<f64>>)> {
    let steps = (tau / dt - 1e-9).ceil().max(1.0) as usize;
    (0..=steps)
        .map(|m| {
            let s = t_end - (steps - m) as f64 * dt;
            (s, (0..history.n()).map(|i| history.at(i, s).payload.clone()).collect())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_by_hand() {
        let a = alpha_conditions([1.0, 0.056, 0.0011], 0.5, 0.1, 5, 0.01).unwrap();
        assert!((a[0] - 0.194_312_5).abs() < 1e-12, "{a:?}");
        assert!((a[1] - 0.004_998_625).abs() < 1e-12, "{a:?}");
        assert!((a[2] - 0.001).abs() < 1e-12, "{a:?}");

        let a = alpha_conditions([0.001, 0.001, 1.0], 0.5, 0.1, 5, 0.01).unwrap();
        assert!((a[2] - (0.001 - 50.0)).abs() < 1e-12);
    }

    #[test]
    fn alpha_rejects_bad_params() {
        assert!(alpha_conditions([1.0, 1.0, 1.0], 0.5, 0.1, 1, 0.01).is_err());
        assert!(alpha_conditions([1.0, 0.0, 1.0], 0.5, 0.1, 5, 0.01).is_err());
        assert!(alpha_conditions([1.0, 1.0, 1.0], 0.5, 0.1, 5, 0.0).is_err());
    }

    #[test]
    fn paper_gains_are_certified() {
        let r = find_certificate(0.5, 0.1, 5, 0.01).unwrap();
        let c = r.certificate().expect("feasible");
        assert!(c.is_valid());
        assert!(c.alpha.iter().all(|a| *a > MARGIN));
    }

    #[test]
    fn five_second_delay_is_not_certified() {
        let r = find_certificate(0.5, 0.1, 5, 5.0).unwrap();
        assert!(!r.is_feasible());
        assert!(grid_scan(0.5, 0.1, 5, 5.0, 100).unwrap().is_none());
    }

    #[test]
    fn max_delay_respects_necessary_bound() {
        let tau = max_certifiable_delay(0.5, 0.1, 5).unwrap().unwrap();
        assert!(tau <= 2.0);
        assert!(find_certificate(0.5, 0.1, 5, tau - DELAY_TOLERANCE).unwrap().is_feasible());
        assert!(!find_certificate(0.5, 0.1, 5, tau + DELAY_TOLERANCE).unwrap().is_feasible());
    }

    #[test]
    fn uncertifiable_gains_have_no_delay() {
        assert_eq!(max_certifiable_delay(0.5, 0.5, 10).unwrap(), None);
    }

    #[test]
    fn report_json_round_trips() {
        let inputs = CertificateInputs { n: 5, tau: 0.01, k: 0.5, beta: 0.1 };
        let rep = certificate_report(inputs, true).unwrap();
        assert!(rep.feasible);
        let back: CertificateReport = serde_json::from_str(&serde_json::to_string(&rep).unwrap()).unwrap();
        assert_eq!(back, rep);
    }

    fn constant_window(g: &CommGraph, value: f64, span: f64, dt: f64) -> Vec<(f64, Vec<DVector<f64>>)> {
        let steps = (span / dt).round() as usize;
        (0..=steps)
            .map(|m| (m as f64 * dt, (0..g.n()).map(|i| DVector::from_element(2, value * (i + 1) as f64)).collect()))
            .collect()
    }

    #[test]
    fn lyapunov_of_zero_and_constant_histories() {
        let g = CommGraph::circulant(5, &[1, 2]).unwrap();
        let zero = constant_window(&g, 0.0, 0.2, 0.01);
        let v = lyapunov_value([1.0, 1.0, 1.0], 0.05, &g, &zero).unwrap();
        assert_eq!(v.v, 0.0);

        let w = constant_window(&g, 0.3, 0.2, 0.01);
        let tau = 0.037;
        let gamma = [1.0, 0.5, 2.0];
        let v = lyapunov_value(gamma, tau, &g, &w).unwrap();
        let sq: Vec<f64> = (0..5).map(|i| 2.0 * (0.3 * (i + 1) as f64).powi(2)).collect();
        let v1: f64 = sq.iter().sum();
        let v2: f64 = (0..5).map(|i| gamma[1] * tau * g.out_degree(i) as f64 * sq[i]).sum();
        assert!((v.v1 - v1).abs() < 1e-12);
        assert!((v.v2 - v2).abs() < 1e-12);
        assert_eq!(v.v3, 0.0);
        assert_eq!(lyapunov_value(gamma, tau, &g, &w).unwrap(), v);
    }

    #[test]
    fn lyapunov_needs_enough_history() {
        let g = CommGraph::complete(2).unwrap();
        let w = constant_window(&g, 1.0, 0.02, 0.01);
        assert!(matches!(
            lyapunov_value([1.0, 1.0, 1.0], 0.05, &g, &w),
            Err(StabilityError::InsufficientHistory { .. })
        ));
    }
}
