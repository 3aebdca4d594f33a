//! Shot-noise estimation of acceptance probabilities.
//!
//! Every sampler draws from exact outcome probabilities: a SWAP-type test
//! of order `l` accepts with probability `(1 + τ_l)/2`, a G-Bose test with
//! probability `C`. Binomial draws use `rand_distr::Binomial`, which is exact
//! for every shot count.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::combinatorics::{divisor_chain_count, totient};
use crate::measures::{accept, linear_fit, ExponentFit, GroupKind};
use crate::state::MomentVector;
use crate::{Error, Result};

/// Measurement strategy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Generalized SWAP tests, one per moment order.
    Swap,
    /// A single G-Bose symmetry test on `k` copies.
    #[serde(rename = "gbose")]
    GBose,
    /// The parallelized cyclic permutation test.
    Cyclic,
    /// All moments from one `k`-copy circuit (emulated).
    #[serde(rename = "simmoments")]
    SimMoments,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Swap, Method::GBose, Method::Cyclic, Method::SimMoments];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Swap => "swap",
            Method::GBose => "gbose",
            Method::Cyclic => "cyclic",
            Method::SimMoments => "simmoments",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "swap" => Ok(Method::Swap),
            "gbose" => Ok(Method::GBose),
            "cyclic" => Ok(Method::Cyclic),
            "simmoments" => Ok(Method::SimMoments),
            other => Err(Error::input(format!("unknown method '{other}'"))),
        }
    }
}

/// How a budget is split across orders.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AllocMode {
    /// Near-optimal weights `N_j ∝ (α_j / j)^{2/3}`.
    #[default]
    Table,
    /// The same number of executions for every order.
    Equal,
}

impl FromStr for AllocMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "table" => Ok(AllocMode::Table),
            "equal" => Ok(AllocMode::Equal),
            other => Err(Error::input(format!("unknown allocation mode '{other}'"))),
        }
    }
}

/// Sensitivity of `C_k(G)` to the moment `τ_l`.
pub fn alpha_coefficient(group: GroupKind, l: usize, k: usize) -> Result<f64> {
    if l < 2 || l > k {
        return Err(Error::input(format!("order l={l} outside 2..={k}")));
    }
    let divides = k.is_multiple_of(l);
    let phi = totient(l as u64) as f64;
    let lf = l as f64;
    Ok(match group {
        GroupKind::Symmetric => 1.0 / lf,
        GroupKind::Cyclic if divides => phi / lf,
        GroupKind::Cyclic => 0.0,
        GroupKind::Dihedral => {
            let rot = if divides { phi / (2.0 * lf) } else { 0.0 };
            let refl = if l == 2 { (k as f64 - 1.0) / 4.0 } else { 0.0 };
            rot + refl
        }
    })
}

/// Weight of order `q` in the error of `C_k(S)` assembled from cyclic
/// tests: `Σ_{q | l ≤ k} c_{l,q} / φ(l)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BetaMode {
    Exact,
    /// The `1/q` scaling used for allocation.
    Simplified,
}

pub fn beta_coefficient(q: usize, k: usize, mode: BetaMode) -> Result<f64> {
    if q < 2 || q > k {
        return Err(Error::input(format!("order q={q} outside 2..={k}")));
    }
    Ok(match mode {
        BetaMode::Simplified => 1.0 / q as f64,
        BetaMode::Exact => (q..=k)
            .step_by(q)
            .map(|l| divisor_chain_count(l as u64, q as u64) as f64 / totient(l as u64) as f64)
            .sum(),
    })
}

/// Executions per circuit order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AllocationPlan {
    pub method: Method,
    pub group: GroupKind,
    pub k: usize,
    pub mode: AllocMode,
    /// Order `j` → executions `N_j` of the `j`-copy circuit.
    pub counts: BTreeMap<usize, u64>,
    pub budget: u64,
    pub total_copies: u64,
    /// Highest measured moment order when higher ones are extrapolated.
    pub extrapolate_from: Option<usize>,
}

impl AllocationPlan {
    pub fn count(&self, j: usize) -> u64 {
        self.counts.get(&j).copied().unwrap_or(0)
    }

    /// Orders that receive executions, ascending.
    pub fn orders(&self) -> impl Iterator<Item = usize> + '_ {
        self.counts.keys().copied()
    }
}

/// Orders measured by `method` for `group` and their allocation weights.
fn order_weights(method: Method, group: GroupKind, k: usize) -> Result<Vec<(usize, f64)>> {
    let w = |alpha: f64, j: usize| (alpha / j as f64).powf(2.0 / 3.0);
    Ok(match (method, group) {
        (Method::GBose | Method::SimMoments, _) => vec![(k, 1.0)],
        (Method::Swap, g) => (2..=k)
            .map(|j| Ok((j, alpha_coefficient(g, j, k)?)))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .filter(|&(_, a)| a > 0.0)
            .map(|(j, a)| (j, w(a, j)))
            .collect(),
        (Method::Cyclic, GroupKind::Cyclic) => vec![(k, 1.0)],
        (Method::Cyclic, GroupKind::Dihedral) if k == 2 => vec![(2, 1.0)],
        (Method::Cyclic, GroupKind::Dihedral) => {
            let ratio = (k as f64 * (k as f64 - 1.0) / 2.0).powf(2.0 / 3.0);
            vec![(2, ratio), (k, 1.0)]
        }
        (Method::Cyclic, GroupKind::Symmetric) => (2..=k)
            .map(|j| (j, w(beta_coefficient(j, k, BetaMode::Simplified).unwrap(), j)))
            .collect(),
    })
}

/// `N_j = floor(N_tot w_j / Σ j w_j)` before any slack is handed out.
pub fn proportional_counts(weights: &[(usize, f64)], n_tot: u64) -> BTreeMap<usize, u64> {
    let norm: f64 = weights.iter().map(|&(j, w)| j as f64 * w).sum();
    weights
        .iter()
        .map(|&(j, w)| (j, (n_tot as f64 * w / norm).floor() as u64))
        .collect()
}

fn build_plan(
    method: Method,
    group: GroupKind,
    k: usize,
    n_tot: u64,
    mode: AllocMode,
    mut weights: Vec<(usize, f64)>,
    extrapolate_from: Option<usize>,
) -> Result<AllocationPlan> {
    let largest = weights.iter().map(|w| w.0).max().unwrap_or(k);
    if n_tot < largest as u64 {
        return Err(Error::input(format!(
            "budget {n_tot} is below one execution of the {largest}-copy circuit"
        )));
    }
    if mode == AllocMode::Equal {
        for w in &mut weights {
            w.1 = 1.0;
        }
    }
    let mut counts = proportional_counts(&weights, n_tot);
    let used: u64 = counts.iter().map(|(&j, &c)| j as u64 * c).sum();
    let smallest = *counts.keys().next().expect("at least one order");
    *counts.get_mut(&smallest).unwrap() += (n_tot - used) / smallest as u64;
    if let Some((&j, _)) = counts.iter().find(|(_, &c)| c == 0) {
        return Err(Error::input(format!(
            "budget {n_tot} leaves no executions for order {j}"
        )));
    }
    let total_copies = counts.iter().map(|(&j, &c)| j as u64 * c).sum();
    Ok(AllocationPlan {
        method,
        group,
        k,
        mode,
        counts,
        budget: n_tot,
        total_copies,
        extrapolate_from,
    })
}

/// Splits `n_tot` copies across the circuits `method` needs for `C_k(group)`.
/// Leftover copies after flooring go to the smallest order.
pub fn allocate(group: GroupKind, method: Method, k: usize, n_tot: u64, mode: AllocMode) -> Result<AllocationPlan> {
    if k < 2 {
        return Err(Error::input("estimation needs k >= 2"));
    }
    let weights = order_weights(method, group, k)?;
    build_plan(method, group, k, n_tot, mode, weights, None)
}

/// Plan that measures orders up to `r` and extrapolates `τ_{r+1..k}`.
pub fn allocate_extrapolated(
    group: GroupKind,
    method: Method,
    k: usize,
    r: usize,
    n_tot: u64,
    mode: AllocMode,
) -> Result<AllocationPlan> {
    if r < 2 || r > k {
        return Err(Error::input(format!("extrapolation rank must satisfy 2 <= r <= k, got r={r}")));
    }
    let weights = match method {
        Method::Swap => order_weights(Method::Swap, GroupKind::Symmetric, r)?,
        Method::SimMoments => vec![(r, 1.0)],
        Method::Cyclic if group == GroupKind::Symmetric => {
            order_weights(Method::Cyclic, GroupKind::Symmetric, r)?
        }
        _ => {
            return Err(Error::input(format!(
                "method {method} with group {group} cannot be combined with extrapolation"
            )))
        }
    };
    build_plan(method, group, k, n_tot, mode, weights, Some(r))
}

/// Minimal Hoeffding budget for `|Ĉ - C| ≤ ε` with probability `1 - δ`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HoeffdingBudget {
    /// Real-valued lower bound on the total number of copies.
    pub bound: f64,
    /// Executions per order, each rounded up.
    pub executions: BTreeMap<usize, u64>,
    /// Copies used by `executions`.
    pub copies: u64,
    /// Error allotted to each order.
    pub eps_per_order: BTreeMap<usize, f64>,
}

/// Lagrange-optimal split of `ε` over orders with sensitivities `alphas`,
/// minimizing `Σ l / ε_l²` under `Σ α_l ε_l = ε`.
pub fn lagrange_split(alphas: &[(usize, f64)], eps: f64) -> Vec<(usize, f64)> {
    let norm: f64 = alphas
        .iter()
        .map(|&(l, a)| (l as f64).powf(1.0 / 3.0) * a.powf(2.0 / 3.0))
        .sum();
    alphas
        .iter()
        .map(|&(l, a)| (l, eps * (l as f64 / a).powf(1.0 / 3.0) / norm))
        .collect()
}

fn validate_eps_delta(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::input(format!("eps must lie in (0, 1), got {eps}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::input(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(())
}

/// Budget for estimating `C_k(group)` with `method`.
///
/// SWAP-type moment estimates have range 2, so `N_l = (2/ε_l²) log(2(k-1)/δ)`;
/// single-outcome tests use `N = log(2/δ)/(2ε²)`.
pub fn hoeffding_budget(method: Method, group: GroupKind, k: usize, eps: f64, delta: f64) -> Result<HoeffdingBudget> {
    validate_eps_delta(eps, delta)?;
    if k < 2 {
        return Err(Error::input("estimation needs k >= 2"));
    }
    let single = |l: usize, eps_l: f64, log_term: f64| -> HoeffdingBudget {
        let n = (log_term / (2.0 * eps_l * eps_l)).ceil() as u64;
        HoeffdingBudget {
            bound: l as f64 * log_term / (2.0 * eps_l * eps_l),
            executions: BTreeMap::from([(l, n)]),
            copies: l as u64 * n,
            eps_per_order: BTreeMap::from([(l, eps_l)]),
        }
    };
    let from_split = |split: Vec<(usize, f64)>, scale: f64, log_term: f64| -> HoeffdingBudget {
        let bound = split.iter().map(|&(l, e)| l as f64 * scale * log_term / (e * e)).sum();
        let executions: BTreeMap<usize, u64> = split
            .iter()
            .map(|&(l, e)| (l, (scale * log_term / (e * e)).ceil() as u64))
            .collect();
        let copies = executions.iter().map(|(&l, &n)| l as u64 * n).sum();
        HoeffdingBudget {
            bound,
            executions,
            copies,
            eps_per_order: split.into_iter().collect(),
        }
    };
    let moments_log = (2.0 * (k as f64 - 1.0) / delta).ln();
    Ok(match (method, group) {
        (Method::GBose, _) | (Method::Cyclic, GroupKind::Cyclic) => single(k, eps, (2.0 / delta).ln()),
        (Method::Cyclic, GroupKind::Dihedral) if k == 2 => single(2, eps, (2.0 / delta).ln()),
        (Method::Swap, g) => {
            let alphas: Vec<(usize, f64)> = (2..=k)
                .map(|l| Ok((l, alpha_coefficient(g, l, k)?)))
                .collect::<Result<Vec<_>>>()?
                .into_iter()
                .filter(|&(_, a)| a > 0.0)
                .collect();
            let log_term = if alphas.len() == 1 { (2.0 / delta).ln() } else { moments_log };
            from_split(lagrange_split(&alphas, eps), 2.0, log_term)
        }
        (Method::Cyclic, GroupKind::Symmetric) => {
            let betas: Vec<(usize, f64)> = (2..=k)
                .map(|l| Ok((l, beta_coefficient(l, k, BetaMode::Exact)?)))
                .collect::<Result<_>>()?;
            from_split(lagrange_split(&betas, eps), 0.5, moments_log)
        }
        (Method::Cyclic, GroupKind::Dihedral) => {
            // C_D = J(k)/2 + (τ_2^a + τ_2^b)/4 with τ_2 = 2 J(2) - 1.
            let kf = k as f64;
            let denom = kf.cbrt() + 2f64.cbrt() * (kf - 1.0).powf(2.0 / 3.0);
            let eps_k = 2.0 * kf.cbrt() * eps / denom;
            let eps_2 = (kf - 1.0).powf(-1.0 / 3.0) * 2f64.powf(4.0 / 3.0) * eps / denom;
            from_split(vec![(2, eps_2), (k, eps_k)], 0.5, (4.0 / delta).ln())
        }
        (Method::SimMoments, _) => {
            let copies = simultaneous_moments_cost(k, eps).ceil() as u64;
            HoeffdingBudget {
                bound: simultaneous_moments_cost(k, eps),
                executions: BTreeMap::from([(k, copies.div_ceil(k as u64))]),
                copies,
                eps_per_order: BTreeMap::new(),
            }
        }
    })
}

/// Constant in the simultaneous-moment cost `c k ln k / ε²`.
pub const SIMULTANEOUS_COST_CONSTANT: f64 = 1.0;

/// Copies needed to learn all moments up to `k` at once.
pub fn simultaneous_moments_cost(k: usize, eps: f64) -> f64 {
    if k <= 1 {
        return 0.0;
    }
    SIMULTANEOUS_COST_CONSTANT * k as f64 * (k as f64).ln() / (eps * eps)
}

fn binomial_fraction<R: Rng + ?Sized>(p: f64, shots: u64, rng: &mut R) -> Result<f64> {
    if shots == 0 {
        return Err(Error::input("a test needs at least one shot"));
    }
    let dist = Binomial::new(shots, p.clamp(0.0, 1.0))
        .map_err(|e| Error::input(format!("invalid acceptance probability {p}: {e}")))?;
    Ok(dist.sample(rng) as f64 / shots as f64)
}

fn check_probability(p: f64, what: &str) -> Result<()> {
    if !(-1e-12..=1.0 + 1e-12).contains(&p) {
        return Err(Error::input(format!("{what} {p} outside [0, 1]")));
    }
    Ok(())
}

/// `τ̂ = 2 p̂ - 1` from a SWAP-type test accepting with probability `(1+τ)/2`.
pub fn sample_swap_moment<R: Rng + ?Sized>(tau: f64, shots: u64, rng: &mut R) -> Result<f64> {
    check_probability(tau, "moment")?;
    Ok(2.0 * binomial_fraction((1.0 + tau) / 2.0, shots, rng)? - 1.0)
}

/// Fraction of accepted runs of a test that accepts with probability `c`.
pub fn sample_gbose<R: Rng + ?Sized>(c: f64, shots: u64, rng: &mut R) -> Result<f64> {
    check_probability(c, "acceptance probability")?;
    binomial_fraction(c, shots, rng)
}

/// Extends `τ_1..τ_r` to `τ_1..τ_{k_max}` through the elementary symmetric
/// polynomials of a rank-`r` spectrum. Measured entries are kept.
pub fn newton_girard_extrapolate(tau: &MomentVector, r: usize, k_max: usize) -> Result<MomentVector> {
    if r == 0 {
        return Err(Error::input("extrapolation rank must be >= 1"));
    }
    let t: Vec<f64> = (1..=r)
        .map(|l| {
            tau.get(l)
                .ok_or_else(|| Error::input(format!("extrapolation from rank {r} needs τ_{l}")))
        })
        .collect::<Result<_>>()?;
    let mut e = vec![1.0; r + 1];
    for m in 1..=r {
        let mut acc = 0.0;
        for i in 1..=m {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            acc += sign * e[m - i] * t[i - 1];
        }
        e[m] = acc / m as f64;
    }
    let mut out: Vec<f64> = t.clone();
    for k in (r + 1)..=k_max {
        let mut acc = 0.0;
        for i in 1..=r {
            let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
            acc += sign * e[i] * out[k - i - 1];
        }
        out.push(acc);
    }
    out.truncate(k_max.max(r));
    Ok(if tau.is_estimated() {
        MomentVector::estimated(out)
    } else {
        MomentVector::exact(out)
    })
}

/// Options for [`estimate_via_moments`].
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EstimateOptions {
    /// Clip each `τ̂` to `[0, 1]` before use.
    pub clip: bool,
}

/// Draws `τ̂_j` for every order in a SWAP or simultaneous-moment plan and
/// assembles `Ĉ_k` through the group's closed form.
///
/// `tau` holds the exact moments up to at least the largest measured order.
pub fn estimate_via_moments<R: Rng + ?Sized>(
    tau: &MomentVector,
    plan: &AllocationPlan,
    rng: &mut R,
    options: EstimateOptions,
) -> Result<f64> {
    let top = plan.extrapolate_from.unwrap_or(plan.k);
    let mut hat: Vec<Option<f64>> = vec![None; top];
    hat[0] = Some(1.0);
    match plan.method {
        Method::Swap => {
            for (&j, &n) in &plan.counts {
                hat[j - 1] = Some(sample_swap_moment(tau.require(j)?, n, rng)?);
            }
        }
        Method::SimMoments => {
            let shots = plan.count(top);
            for l in 2..=top {
                hat[l - 1] = Some(sample_swap_moment(tau.require(l)?, shots, rng)?);
            }
        }
        other => {
            return Err(Error::input(format!("plan for method {other} is not moment-based")));
        }
    }
    if plan.counts.is_empty() {
        return Err(Error::input("empty allocation plan"));
    }
    assemble(hat, plan, options)
}

/// `Ĉ` from estimated moments `τ̂_1..τ̂_top` (gaps allowed), applying the
/// plan's extrapolation and the clip option.
pub fn assemble(hat: Vec<Option<f64>>, plan: &AllocationPlan, options: EstimateOptions) -> Result<f64> {
    let mut moments = MomentVector::partial(hat, true);
    if options.clip {
        moments = moments.clipped();
    }
    if let Some(r) = plan.extrapolate_from {
        moments = newton_girard_extrapolate(&moments, r, plan.k)?;
    }
    accept(&moments, plan.group, plan.k)
}

/// Outcome of one estimation trial.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub method: Method,
    pub group: GroupKind,
    pub k: usize,
    pub n_tot: u64,
    pub copies_used: u64,
    pub c_hat: f64,
    pub c_exact: f64,
    pub abs_err: f64,
    /// `|ln Ĉ - ln C|`, absent when `Ĉ ≤ 0`.
    pub log_err: Option<f64>,
    pub seed: u64,
    pub extrapolated: Option<usize>,
}

impl EstimateReport {
    pub fn new(plan: &AllocationPlan, c_hat: f64, c_exact: f64, copies_used: u64, seed: u64) -> Self {
        let log_err = (c_hat > 0.0 && c_exact > 0.0).then(|| (c_hat.ln() - c_exact.ln()).abs());
        EstimateReport {
            method: plan.method,
            group: plan.group,
            k: plan.k,
            n_tot: plan.budget,
            copies_used,
            c_hat,
            c_exact,
            abs_err: (c_hat - c_exact).abs(),
            log_err,
            seed,
            extrapolated: plan.extrapolate_from,
        }
    }
}

/// Seed of trial `t`: SplitMix64 applied to `base + (t + 1) · 0x9E3779B97F4A7C15`.
pub fn trial_seed(base: u64, t: u64) -> u64 {
    let mut z = base.wrapping_add(t.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Aggregated errors at one budget.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BudgetErrors {
    pub n_tot: u64,
    pub trials: usize,
    pub mean_abs_err: f64,
    /// Mean over trials with `Ĉ > 0`; `None` if there are none.
    pub mean_log_err: Option<f64>,
    /// Trials left out of the log-error mean.
    pub log_excluded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorStatistics {
    pub per_budget: Vec<BudgetErrors>,
    /// Fit of `ln(mean abs err)` against `ln N_tot`; `None` with fewer than
    /// two budgets.
    pub abs_fit: Option<ExponentFit>,
    pub log_fit: Option<ExponentFit>,
}

/// Groups reports by budget (ascending) and fits the error scaling.
pub fn error_statistics(reports: &[EstimateReport]) -> Result<ErrorStatistics> {
    if reports.is_empty() {
        return Err(Error::input("no reports to aggregate"));
    }
    let mut by_budget: BTreeMap<u64, Vec<&EstimateReport>> = BTreeMap::new();
    for r in reports {
        by_budget.entry(r.n_tot).or_default().push(r);
    }
    let per_budget: Vec<BudgetErrors> = by_budget
        .into_iter()
        .map(|(n_tot, rs)| {
            let logs: Vec<f64> = rs.iter().filter_map(|r| r.log_err).collect();
            BudgetErrors {
                n_tot,
                trials: rs.len(),
                mean_abs_err: rs.iter().map(|r| r.abs_err).sum::<f64>() / rs.len() as f64,
                mean_log_err: (!logs.is_empty()).then(|| logs.iter().sum::<f64>() / logs.len() as f64),
                log_excluded: rs.len() - logs.len(),
            }
        })
        .collect();
    let fit = |points: Vec<(f64, f64)>| -> Option<ExponentFit> {
        if points.len() < 2 {
            None
        } else {
            linear_fit(&points).ok()
        }
    };
    let abs_fit = fit(
        per_budget
            .iter()
            .filter(|b| b.mean_abs_err > 0.0)
            .map(|b| ((b.n_tot as f64).ln(), b.mean_abs_err.ln()))
            .collect(),
    );
    let log_fit = fit(
        per_budget
            .iter()
            .filter_map(|b| b.mean_log_err.filter(|&v| v > 0.0).map(|v| ((b.n_tot as f64).ln(), v.ln())))
            .collect(),
    );
    Ok(ErrorStatistics { per_budget, abs_fit, log_fit })
}
