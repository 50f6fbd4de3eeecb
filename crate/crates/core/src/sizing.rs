//! Sample sizes for the standard and incremental scenario approach.
//!
//! All binomial quantities are evaluated in log-space from `ln Γ`, so sample
//! sizes in the thousands never materialize a factorial or a tiny power.

use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// How `M_j` and `N_j` are obtained: by searching the binomial conditions
/// directly, or from their closed-form sufficient bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SizingMode {
    Exact,
    #[default]
    Explicit,
}

impl fmt::Display for SizingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SizingMode::Exact => "exact",
            SizingMode::Explicit => "explicit",
        })
    }
}

/// Violation level `epsilon`, confidence parameter `beta` and number of
/// decision variables `d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskParams {
    epsilon: f64,
    beta: f64,
    dims: usize,
}

impl RiskParams {
    pub fn new(epsilon: f64, beta: f64, dims: usize) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::validation("epsilon", "must lie in (0, 1)"));
        }
        if !(beta > 0.0 && beta < 1.0) {
            return Err(Error::validation("beta", "must lie in (0, 1)"));
        }
        if dims == 0 {
            return Err(Error::validation("dims", "must be at least 1"));
        }
        Ok(RiskParams { epsilon, beta, dims })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dims(&self) -> usize {
        self.dims
    }
}

pub fn ln_choose(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n);
    if k == 0 || k == n {
        return 0.0;
    }
    let (n, k) = (n as f64, k as f64);
    libm::lgamma(n + 1.0) - libm::lgamma(k + 1.0) - libm::lgamma(n - k + 1.0)
}

/// `ln Σ exp(terms)` without overflow.
fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + libm::log(terms.map(|t| libm::exp(t - max)).sum::<f64>())
}

/// `ln Σ_{j=0}^{k_max} C(N,j) ε^j (1-ε)^{N-j}`.
pub fn log_binomial_tail(n: u64, k_max: u64, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::validation("epsilon", "must lie in (0, 1)"));
    }
    if k_max > n {
        return Err(Error::validation("k_max", "must not exceed N"));
    }
    Ok(log_tail_unchecked(n, k_max, epsilon))
}

fn log_tail_unchecked(n: u64, k_max: u64, epsilon: f64) -> f64 {
    if k_max == n {
        return 0.0;
    }
    let (ln_e, ln_1e) = (libm::log(epsilon), libm::log1p(-epsilon));
    log_sum_exp((0..=k_max).map(move |j| ln_choose(n, j) + j as f64 * ln_e + (n - j) as f64 * ln_1e))
}

/// Smallest `N >= lower` such that the nonincreasing predicate
/// `ok(N) = !fails(N)` holds, by doubling then bisection.
fn search_min(lower: u64, mut ok: impl FnMut(u64) -> bool) -> u64 {
    if ok(lower) {
        return lower;
    }
    let mut bad = lower;
    let mut step = 1u64;
    let mut good = loop {
        let probe = bad.saturating_add(step);
        if ok(probe) {
            break probe;
        }
        bad = probe;
        step = step.saturating_mul(2);
    };
    while good - bad > 1 {
        let mid = bad + (good - bad) / 2;
        if ok(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    good
}

/// Smallest `N >= lower` with `Σ_{j<k} C(N,j) ε^j (1-ε)^{N-j} <= β`.
fn min_tail_size(k: u64, epsilon: f64, ln_beta: f64, lower: u64) -> u64 {
    if k == 0 {
        return lower;
    }
    // For N < k the sum is the whole distribution, which is 1 > β.
    search_min(lower.max(k), |n| log_tail_unchecked(n, k - 1, epsilon) <= ln_beta)
}

/// Minimal `N >= d` with `Σ_{j=0}^{d-1} C(N,j) ε^j (1-ε)^{N-j} <= β`.
pub fn standard_sample_size_exact(params: &RiskParams) -> u64 {
    let d = params.dims as u64;
    min_tail_size(d, params.epsilon, libm::log(params.beta), d)
}

/// `⌈(2/ε)(ln(1/β) + d)⌉`.
pub fn standard_sample_size_explicit(params: &RiskParams) -> u64 {
    explicit_tail_bound(params.epsilon, params.beta, params.dims as f64)
}

fn explicit_tail_bound(epsilon: f64, beta: f64, k: f64) -> u64 {
    let v = 2.0 / epsilon * (libm::log(1.0 / beta) + k);
    if v <= 0.0 {
        0
    } else {
        libm::ceil(v) as u64
    }
}

fn check_iteration(params: &RiskParams, j: usize) -> Result<()> {
    if j > params.dims {
        return Err(Error::validation(
            "j",
            "iteration exceeds the number of decision variables",
        ));
    }
    Ok(())
}

/// Auxiliary sample size `M_j` of iteration `j`.
///
/// Exact mode takes the empty sum at `j = 0` as zero, so `M_0 = 0`; the
/// explicit bound is clamped at zero.
pub fn incremental_m_j(params: &RiskParams, j: usize, mode: SizingMode) -> Result<u64> {
    check_iteration(params, j)?;
    Ok(match mode {
        SizingMode::Exact => min_tail_size(j as u64, params.epsilon, libm::log(params.beta), 0),
        SizingMode::Explicit => explicit_tail_bound(params.epsilon, params.beta, j as f64 - 1.0),
    })
}

/// `ln β_j` with `β_j = β/((d+1)(M_j+1)) Σ_{m=j}^{M_j} C(m,j)(1-ε)^{m-j}`.
///
/// The sum grows quickly with `j`, so `β_j` may exceed one for larger
/// iterations; the value is returned as computed.
pub fn incremental_log_beta_j(params: &RiskParams, j: usize, m_j: u64) -> Result<f64> {
    check_iteration(params, j)?;
    let j64 = j as u64;
    if m_j < j64 {
        return Err(Error::ScheduleDegenerate { iteration: j, m_j });
    }
    let ln_1e = libm::log1p(-params.epsilon);
    let ln_sum = log_sum_exp((j64..=m_j).map(move |m| ln_choose(m, j64) + (m - j64) as f64 * ln_1e));
    Ok(libm::log(params.beta) - libm::log((params.dims + 1) as f64) - libm::log((m_j + 1) as f64) + ln_sum)
}

pub fn incremental_beta_j(params: &RiskParams, j: usize, m_j: u64) -> Result<f64> {
    Ok(libm::exp(incremental_log_beta_j(params, j, m_j)?))
}

/// Minimal `N >= lower` with `C(N,j)(1-ε)^{N-j} <= β_j`.
///
/// The left side rises until `N ≈ j/ε` and decreases afterwards.
pub fn exact_n_for_beta(epsilon: f64, j: usize, ln_beta_j: f64, lower: u64) -> u64 {
    let j = j as u64;
    let ln_1e = libm::log1p(-epsilon);
    let lhs = |n: u64| ln_choose(n, j) + (n - j) as f64 * ln_1e;
    let start = lower.max(j);
    if lhs(start) <= ln_beta_j {
        return start;
    }
    // Nondecreasing up to the mode, so failure at `start` persists there.
    let mode = libm::ceil(j as f64 / epsilon) as u64;
    search_min(start.max(mode), |n| lhs(n) <= ln_beta_j)
}

/// `⌈(2/ε) ln(1/β_j) + 2j + (2j/ε) ln(2/ε)⌉`, clamped at zero.
pub fn explicit_n_for_beta(epsilon: f64, j: usize, ln_beta_j: f64) -> u64 {
    let j = j as f64;
    let v = 2.0 / epsilon * -ln_beta_j + 2.0 * j + 2.0 * j / epsilon * libm::log(2.0 / epsilon);
    if v <= 0.0 {
        0
    } else {
        libm::ceil(v) as u64
    }
}

/// One row `(j, M_j, β_j, N_j)` of the incremental schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScheduleEntry {
    pub j: usize,
    pub m_j: u64,
    pub ln_beta_j: f64,
    pub beta_j: f64,
    pub n_j: u64,
}

/// Scenarios required at iteration `j`.
///
/// Both modes honour `N_j >= M_j`; in explicit mode the closed form alone
/// can fall below `M_j` once `β_j` is large.
pub fn incremental_entry(params: &RiskParams, j: usize, mode: SizingMode) -> Result<ScheduleEntry> {
    let m_j = incremental_m_j(params, j, mode)?;
    let ln_beta_j = incremental_log_beta_j(params, j, m_j)?;
    let n_j = match mode {
        SizingMode::Exact => exact_n_for_beta(params.epsilon, j, ln_beta_j, m_j),
        SizingMode::Explicit => explicit_n_for_beta(params.epsilon, j, ln_beta_j).max(m_j),
    };
    Ok(ScheduleEntry {
        j,
        m_j,
        ln_beta_j,
        beta_j: libm::exp(ln_beta_j),
        n_j,
    })
}

pub fn incremental_n_j(params: &RiskParams, j: usize, mode: SizingMode) -> Result<u64> {
    Ok(incremental_entry(params, j, mode)?.n_j)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IncrementalSchedule {
    pub mode: SizingMode,
    pub entries: Vec<ScheduleEntry>,
}

impl IncrementalSchedule {
    /// The full schedule for `j = 0..=d`.
    pub fn compute(params: &RiskParams, mode: SizingMode) -> Result<Self> {
        let entries = (0..=params.dims)
            .map(|j| incremental_entry(params, j, mode))
            .collect::<Result<Vec<_>>>()?;
        Ok(IncrementalSchedule { mode, entries })
    }

    pub fn max_n(&self) -> u64 {
        self.entries.iter().map(|e| e.n_j).max().unwrap_or(0)
    }
}

/// The standard sample size in the given mode.
pub fn standard_sample_size(params: &RiskParams, mode: SizingMode) -> u64 {
    match mode {
        SizingMode::Exact => standard_sample_size_exact(params),
        SizingMode::Explicit => standard_sample_size_explicit(params),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn p(e: f64, b: f64, d: usize) -> RiskParams {
        RiskParams::new(e, b, d).unwrap()
    }

    #[test]
    fn risk_params_domain() {
        assert!(RiskParams::new(0.0, 0.1, 1).is_err());
        assert!(RiskParams::new(1.0, 0.1, 1).is_err());
        assert!(RiskParams::new(0.1, 1.0, 1).is_err());
        assert!(RiskParams::new(0.1, 0.1, 0).is_err());
    }

    #[test]
    fn tail_small_cases() {
        assert_relative_eq!(
            log_binomial_tail(2, 0, 0.5).unwrap(),
            libm::log(0.25),
            max_relative = 1e-14
        );
        assert_relative_eq!(
            log_binomial_tail(3, 1, 0.5).unwrap(),
            libm::log(0.5),
            max_relative = 1e-14
        );
        assert_eq!(log_binomial_tail(7, 7, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn tail_rejects_bad_arguments() {
        assert!(log_binomial_tail(3, 4, 0.5).is_err());
        assert!(log_binomial_tail(3, 1, 0.0).is_err());
        assert!(log_binomial_tail(3, 1, 1.0).is_err());
    }

    #[test]
    fn tail_large_case_is_finite() {
        let v = log_binomial_tail(3065, 143, 0.1).unwrap();
        assert!(v.is_finite() && v < 0.0);
    }

    #[test]
    fn tail_nonincreasing_in_n() {
        let mut prev = 0.0;
        for n in 5..400 {
            let v = log_binomial_tail(n, 4, 0.05).unwrap();
            assert!(v <= prev + 1e-12, "n = {n}");
            prev = v;
        }
    }

    #[test]
    fn standard_exact_enumerated() {
        assert_eq!(standard_sample_size_exact(&p(0.5, 0.25, 1)), 2);
        assert_eq!(standard_sample_size_exact(&p(0.5, 0.5, 2)), 3);
    }

    #[test]
    fn standard_explicit_anchor() {
        assert_eq!(standard_sample_size_explicit(&p(0.1, 1e-4, 144)), 3065);
    }

    #[test]
    fn explicit_with_unit_beta_degenerates_to_2d_over_eps() {
        // β = 1 is outside RiskParams; exercise the formula directly.
        assert_eq!(explicit_tail_bound(0.25, 1.0, 10.0), 80);
        assert_eq!(explicit_tail_bound(0.3, 1.0, 7.0), libm::ceil(14.0 / 0.3) as u64);
    }

    #[test]
    fn m_j_cases() {
        assert_eq!(incremental_m_j(&p(0.1, 1e-4, 144), 0, SizingMode::Exact).unwrap(), 0);
        assert_eq!(
            incremental_m_j(&p(0.1, 1e-4, 144), 1, SizingMode::Explicit).unwrap(),
            185
        );
        assert_eq!(incremental_m_j(&p(0.5, 0.25, 1), 1, SizingMode::Exact).unwrap(), 2);
        // explicit j = 0 with large β goes negative and is clamped
        assert_eq!(incremental_m_j(&p(0.5, 0.9, 3), 0, SizingMode::Explicit).unwrap(), 0);
        assert!(incremental_m_j(&p(0.5, 0.25, 1), 2, SizingMode::Exact).is_err());
    }

    #[test]
    fn beta_j_cases() {
        let params = p(0.5, 0.3, 4);
        assert_relative_eq!(
            incremental_beta_j(&params, 0, 0).unwrap(),
            0.3 / 5.0,
            max_relative = 1e-14
        );
        let expected = 0.3 / (5.0 * 3.0) * (1.0 + 0.5 + 0.25);
        assert_relative_eq!(
            incremental_beta_j(&params, 0, 2).unwrap(),
            expected,
            max_relative = 1e-14
        );
        assert!(matches!(
            incremental_beta_j(&params, 3, 2),
            Err(Error::ScheduleDegenerate { iteration: 3, m_j: 2 })
        ));
    }

    #[test]
    fn n_0_exact_enumerated() {
        // β_0 = 0.25; (1/2)^N <= 1/4 first at N = 2
        assert_eq!(incremental_n_j(&p(0.5, 0.5, 1), 0, SizingMode::Exact).unwrap(), 2);
    }

    #[test]
    fn explicit_n_0_with_exact_m_convention() {
        let params = p(0.1, 1e-4, 144);
        let ln_b0 = incremental_log_beta_j(&params, 0, 0).unwrap();
        assert_relative_eq!(ln_b0, libm::log(1e-4 / 145.0), max_relative = 1e-14);
        // ⌈20 ln(1.45e6)⌉
        assert_eq!(explicit_n_for_beta(0.1, 0, ln_b0), 284);
    }

    #[test]
    fn explicit_schedule_matches_tabulated_values() {
        let params = p(0.1, 1e-4, 144);
        let e: Vec<_> = (0..4)
            .map(|j| incremental_entry(&params, j, SizingMode::Explicit).unwrap())
            .map(|e| (e.m_j, e.n_j))
            .collect();
        assert_eq!(e, [(165, 340), (185, 359), (205, 376), (225, 394)]);
    }

    #[test]
    fn exact_schedule_head() {
        let params = p(0.1, 1e-4, 144);
        let e: Vec<_> = (0..3)
            .map(|j| incremental_entry(&params, j, SizingMode::Exact).unwrap())
            .map(|e| (e.m_j, e.n_j))
            .collect();
        assert_eq!(e, [(0, 135), (88, 185), (113, 212)]);
        assert_eq!(standard_sample_size_exact(&params), 1905);
    }

    #[test]
    fn schedule_is_bounded_by_standard() {
        let params = p(0.1, 1e-4, 144);
        for mode in [SizingMode::Exact, SizingMode::Explicit] {
            let s = IncrementalSchedule::compute(&params, mode).unwrap();
            assert_eq!(s.entries.len(), 145);
            assert!(s.entries.iter().all(|e| e.n_j >= e.m_j));
            assert!(s.max_n() <= 3065, "{mode}: {}", s.max_n());
        }
    }

    #[test]
    fn search_min_finds_threshold() {
        for t in [0u64, 1, 2, 3, 17, 1000, 123_457] {
            assert_eq!(search_min(0, |n| n >= t), t);
            assert_eq!(search_min(5, |n| n >= t), t.max(5));
        }
    }
}
