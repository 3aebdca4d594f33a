//! Exact acceptance probabilities and the entanglement measures built on them.

use std::fmt;
use std::ops::RangeInclusive;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::combinatorics::{
    binomial, divisors, partitions, subsets_of_size, symmetric_class_weight, totient,
};
use crate::state::{validate_subset, MomentVector, PureState, Spectrum, StateFamily};
use crate::{Error, Result};

/// Round-off allowed on either side of `[0, 1]` before an exact acceptance
/// probability is reported as a numerical failure.
pub const ROUNDOFF_TOL: f64 = 1e-12;
/// Below this the log-space evaluators should be preferred.
pub const LOG_SPACE_THRESHOLD: f64 = 1e-280;
/// Largest `n` accepted by [`entanglement_gme`].
pub const GME_MAX_SITES: usize = 12;
/// Largest number of subsets enumerated by [`entanglement_averaged`].
pub const MAX_AVERAGED_SUBSETS: usize = 100_000;

/// Relative tolerance of the recurrence/spectral cross-check in [`accept_spectrum`].
const CROSS_CHECK_TOL: f64 = 1e-8;

/// Permutation group acting on the `k` copies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKind {
    Symmetric,
    Cyclic,
    Dihedral,
}

impl GroupKind {
    pub const ALL: [GroupKind; 3] = [GroupKind::Symmetric, GroupKind::Cyclic, GroupKind::Dihedral];

    pub fn as_str(self) -> &'static str {
        match self {
            GroupKind::Symmetric => "symmetric",
            GroupKind::Cyclic => "cyclic",
            GroupKind::Dihedral => "dihedral",
        }
    }
}

impl fmt::Display for GroupKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroupKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "symmetric" | "s" => Ok(GroupKind::Symmetric),
            "cyclic" | "c" => Ok(GroupKind::Cyclic),
            "dihedral" | "d" => Ok(GroupKind::Dihedral),
            other => Err(Error::input(format!("unknown group '{other}'"))),
        }
    }
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::input("number of copies k must be >= 1"));
    }
    Ok(())
}

/// Clamps round-off for exact inputs. Estimated inputs pass through untouched.
fn finish(c: f64, tau: &MomentVector) -> Result<f64> {
    if tau.is_estimated() {
        return Ok(c);
    }
    if !c.is_finite() || !(-ROUNDOFF_TOL..=1.0 + ROUNDOFF_TOL).contains(&c) {
        return Err(Error::numerical(format!(
            "acceptance probability {c} outside [0, 1]"
        )));
    }
    Ok(c.clamp(0.0, 1.0))
}

fn require_up_to(tau: &MomentVector, k: usize) -> Result<()> {
    if k > tau.k_max() {
        return Err(Error::input(format!(
            "moments given up to order {}, but k = {k}",
            tau.k_max()
        )));
    }
    Ok(())
}

/// Symmetric group by summing over cycle types of `S_k`.
pub fn accept_symmetric_partition(tau: &MomentVector, k: usize) -> Result<f64> {
    check_k(k)?;
    require_up_to(tau, k)?;
    let mut total = 0.0;
    for p in partitions(k) {
        let mut term = symmetric_class_weight(&p);
        for &(len, mult) in p.multiplicities() {
            term *= tau.require(len)?.powi(mult as i32);
        }
        total += term;
    }
    finish(total, tau)
}

/// Symmetric group via `C_k = (1/k) Σ_{q<k} C_q τ_{k-q}`, `C_0 = 1`.
pub fn accept_symmetric_recurrence(tau: &MomentVector, k: usize) -> Result<f64> {
    check_k(k)?;
    require_up_to(tau, k)?;
    let series = symmetric_series(tau, k)?;
    finish(series[k], tau)
}

/// `C_0..=C_k` under the symmetric group.
pub fn symmetric_series(tau: &MomentVector, k: usize) -> Result<Vec<f64>> {
    require_up_to(tau, k)?;
    let t: Vec<f64> = (1..=k).map(|l| tau.require(l)).collect::<Result<_>>()?;
    let mut c = vec![1.0; k + 1];
    for m in 1..=k {
        c[m] = (0..m).map(|q| c[q] * t[m - q - 1]).sum::<f64>() / m as f64;
    }
    Ok(c)
}

/// Symmetric group as the complete homogeneous polynomial `h_k(λ)`, built
/// one eigenvalue at a time.
pub fn accept_symmetric_spectral(spec: &Spectrum, k: usize) -> f64 {
    let mut h = vec![0.0; k + 1];
    h[0] = 1.0;
    for &lambda in spec.eigenvalues() {
        for j in 1..=k {
            h[j] += lambda * h[j - 1];
        }
    }
    h[k].clamp(0.0, 1.0)
}

/// Cyclic group: `(1/k) Σ_{q|k} φ(q) τ_q^{k/q}`.
pub fn accept_cyclic(tau: &MomentVector, k: usize) -> Result<f64> {
    check_k(k)?;
    let c = cyclic_sum(tau, k)?;
    finish(c, tau)
}

fn cyclic_sum(tau: &MomentVector, k: usize) -> Result<f64> {
    let mut total = 0.0;
    for q in divisors(k as u64) {
        let t = tau.require(q as usize)?;
        total += totient(q) as f64 * t.powi((k as u64 / q) as i32);
    }
    Ok(total / k as f64)
}

/// Exponents of `τ_2` in the two reflection classes of `D_k`.
pub(crate) fn reflection_exponents(k: usize) -> (usize, usize) {
    let parity = k % 2;
    ((k + parity).saturating_sub(2) / 2, (k - parity) / 2)
}

/// Dihedral group: half the cyclic value plus the reflection terms.
pub fn accept_dihedral(tau: &MomentVector, k: usize) -> Result<f64> {
    check_k(k)?;
    let cyc = cyclic_sum(tau, k)?;
    let (a, b) = reflection_exponents(k);
    let pow_tau2 = |e: usize| -> Result<f64> {
        if e == 0 {
            Ok(1.0)
        } else {
            Ok(tau.require(2)?.powi(e as i32))
        }
    };
    let c = 0.5 * cyc + 0.25 * (pow_tau2(a)? + pow_tau2(b)?);
    finish(c, tau)
}

/// Dispatch on the group. Symmetric uses the recurrence.
pub fn accept(tau: &MomentVector, group: GroupKind, k: usize) -> Result<f64> {
    match group {
        GroupKind::Symmetric => accept_symmetric_recurrence(tau, k),
        GroupKind::Cyclic => accept_cyclic(tau, k),
        GroupKind::Dihedral => accept_dihedral(tau, k),
    }
}

/// Acceptance probability from a spectrum. For the symmetric group the
/// recurrence result is checked against the spectral form.
pub fn accept_spectrum(spec: &Spectrum, group: GroupKind, k: usize) -> Result<f64> {
    check_k(k)?;
    let tau = spec.moments(k.max(2));
    let c = accept(&tau, group, k)?;
    if group == GroupKind::Symmetric {
        let h = accept_symmetric_spectral(spec, k);
        if (c - h).abs() > CROSS_CHECK_TOL * c.abs().max(h.abs()) + 1e-300 {
            return Err(Error::numerical(format!(
                "recurrence ({c}) and spectral ({h}) values disagree at k = {k}"
            )));
        }
    }
    Ok(c)
}

/// `ln C` computed without underflow, for large `k`.
pub fn ln_accept(spec: &Spectrum, group: GroupKind, k: usize) -> Result<f64> {
    check_k(k)?;
    let lmax = spec.max();
    let scaled: Vec<f64> = spec.eigenvalues().iter().map(|l| l / lmax).collect();
    // ln τ_q = q ln λ_max + ln Σ (λ/λ_max)^q
    let ln_tau = |q: usize| q as f64 * lmax.ln() + scaled.iter().map(|x| x.powi(q as i32)).sum::<f64>().ln();
    match group {
        GroupKind::Symmetric => {
            let mut h = vec![0.0; k + 1];
            h[0] = 1.0;
            for &mu in &scaled {
                for j in 1..=k {
                    h[j] += mu * h[j - 1];
                }
            }
            Ok(k as f64 * lmax.ln() + h[k].ln())
        }
        GroupKind::Cyclic => Ok(ln_cyclic(k, &ln_tau)),
        GroupKind::Dihedral => {
            let (a, b) = reflection_exponents(k);
            let ln2 = ln_tau(2);
            let terms = [
                (0.5f64).ln() + ln_cyclic(k, &ln_tau),
                (0.25f64).ln() + a as f64 * ln2,
                (0.25f64).ln() + b as f64 * ln2,
            ];
            Ok(log_sum_exp(&terms))
        }
    }
}

fn ln_cyclic(k: usize, ln_tau: &dyn Fn(usize) -> f64) -> f64 {
    let terms: Vec<f64> = divisors(k as u64)
        .into_iter()
        .map(|q| (totient(q) as f64).ln() + (k as u64 / q) as f64 * ln_tau(q as usize))
        .collect();
    log_sum_exp(&terms) - (k as f64).ln()
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

/// What a [`MeasureReport`] was computed over.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum Scope {
    /// A single subsystem.
    Bipartite(Vec<usize>),
    /// Average over all subsystems of this size.
    Averaged(usize),
    /// Genuine multipartite: minimum entanglement over bipartitions,
    /// attained at `argmax`.
    Gme { argmax: Vec<usize> },
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scope::Bipartite(sites) => write!(f, "S={}", join_sites(sites)),
            Scope::Averaged(s) => write!(f, "s={s}"),
            Scope::Gme { .. } => write!(f, "gme"),
        }
    }
}

pub(crate) fn join_sites(sites: &[usize]) -> String {
    sites
        .iter()
        .map(|s| s.to_string())
        .collect::<Vec<_>>()
        .join(";")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MeasureReport {
    pub group: GroupKind,
    pub k: usize,
    pub scope: Scope,
    pub acceptance: f64,
    pub entanglement: f64,
    pub bound_max_e: f64,
}

impl MeasureReport {
    fn new(group: GroupKind, k: usize, scope: Scope, acceptance: f64, bound: f64) -> Self {
        MeasureReport {
            group,
            k,
            scope,
            acceptance,
            entanglement: (1.0 - acceptance).max(0.0),
            bound_max_e: bound,
        }
    }
}

/// Bound for a subsystem of the given size, using the smaller side.
fn bound_for(group: GroupKind, k: usize, d: usize, n: usize, s: usize) -> f64 {
    if k < 2 {
        return 0.0;
    }
    max_entanglement_bound(group, k, d, s.min(n - s)).unwrap_or(1.0)
}

/// `E = 1 - C` for the subsystem `subset` of `state`.
pub fn entanglement_bipartite(
    state: &PureState,
    group: GroupKind,
    k: usize,
    subset: &[usize],
) -> Result<MeasureReport> {
    check_k(k)?;
    let spec = state.reduced_spectrum(subset)?;
    let c = accept_spectrum(&spec, group, k)?;
    let bound = bound_for(group, k, state.d(), state.n(), subset.len());
    Ok(MeasureReport::new(group, k, Scope::Bipartite(subset.to_vec()), c, bound))
}

/// `E = 1 - C` for a reduced spectrum of a subsystem of `s` sites of local
/// dimension `d`.
pub fn entanglement_from_spectrum(
    spec: &Spectrum,
    group: GroupKind,
    k: usize,
    d: usize,
    s: usize,
) -> Result<MeasureReport> {
    let c = accept_spectrum(spec, group, k)?;
    let bound = if k >= 2 { max_entanglement_bound(group, k, d, s)? } else { 0.0 };
    Ok(MeasureReport::new(group, k, Scope::Averaged(s), c, bound))
}

/// `C` averaged over every subsystem of size `s`.
pub fn entanglement_averaged(
    state: &PureState,
    group: GroupKind,
    k: usize,
    s: usize,
) -> Result<MeasureReport> {
    check_k(k)?;
    let n = state.n();
    if s == 0 || s >= n {
        return Err(Error::input(format!("subset size must satisfy 1 <= s <= n-1, got s={s}, n={n}")));
    }
    let count = binomial(n as u64, s as u64).to_f64();
    if count > MAX_AVERAGED_SUBSETS as f64 {
        return Err(Error::input(format!("binom({n}, {s}) subsets is too many to enumerate")));
    }
    let values = subsets_of_size(n, s)
        .iter()
        .map(|subset| accept_spectrum(&state.reduced_spectrum(subset)?, group, k))
        .collect::<Result<Vec<f64>>>()?;
    let mean = pairwise_sum(&values) / values.len() as f64;
    let bound = bound_for(group, k, state.d(), n, s);
    Ok(MeasureReport::new(group, k, Scope::Averaged(s), mean, bound))
}

/// Averaged measure for a named family, from one analytic spectrum.
pub fn entanglement_averaged_family(
    family: &StateFamily,
    group: GroupKind,
    k: usize,
    s: usize,
) -> Result<MeasureReport> {
    check_k(k)?;
    let spec = family.analytic_spectrum(s)?;
    let c = accept_spectrum(&spec, group, k)?;
    let bound = bound_for(group, k, 2, family.n(), s);
    Ok(MeasureReport::new(group, k, Scope::Averaged(s), c, bound))
}

pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        len => {
            let (a, b) = xs.split_at(len / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

/// Bipartitions as the subsets containing site 0, in lexicographic order.
pub fn canonical_bipartitions(n: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (1..n)
        .flat_map(|s| subsets_of_size(n, s))
        .filter(|sub| sub[0] == 0)
        .collect();
    out.sort();
    out
}

/// `E = 1 - max_S C` over all bipartitions. Ties within [`ROUNDOFF_TOL`]
/// go to the lexicographically smallest subset.
pub fn entanglement_gme(state: &PureState, group: GroupKind, k: usize) -> Result<MeasureReport> {
    check_k(k)?;
    let n = state.n();
    if n < 2 {
        return Err(Error::input("GME needs at least two sites"));
    }
    if n > GME_MAX_SITES {
        return Err(Error::input(format!("GME is limited to n <= {GME_MAX_SITES}")));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for subset in canonical_bipartitions(n) {
        validate_subset(&subset, n, false)?;
        let c = accept_spectrum(&state.reduced_spectrum(&subset)?, group, k)?;
        match &best {
            Some((b, _)) if c <= *b + ROUNDOFF_TOL => {}
            _ => best = Some((c, subset)),
        }
    }
    let (c, argmax) = best.expect("n >= 2 has at least one bipartition");
    let bound = bound_for(group, k, state.d(), n, 1);
    Ok(MeasureReport::new(group, k, Scope::Gme { argmax }, c, bound))
}

/// Largest value of `E` over all states, for a subsystem of `s` sites of
/// local dimension `d`; attained by maximally mixed reductions.
pub fn max_entanglement_bound(group: GroupKind, k: usize, d: usize, s: usize) -> Result<f64> {
    if d < 2 || s < 1 || k < 2 {
        return Err(Error::input(format!("bound needs d >= 2, s >= 1, k >= 2 (got d={d}, s={s}, k={k})")));
    }
    let ln_dim = s as f64 * (d as f64).ln();
    // Σ_{q|k} φ(q) D^{k(1-q)/q}, with D = d^s.
    let cyc_sum = || -> f64 {
        divisors(k as u64)
            .into_iter()
            .map(|q| {
                let exponent = k as f64 * (1.0 - q as f64) / q as f64;
                totient(q) as f64 * (exponent * ln_dim).exp()
            })
            .sum()
    };
    let e = match group {
        GroupKind::Symmetric => {
            let dim = d.checked_pow(s as u32).filter(|&v| v < u64::MAX as usize / 2);
            let ln_ratio = match dim {
                Some(dim) => binomial((dim + k - 1) as u64, k as u64).ln() - k as f64 * ln_dim,
                None => f64::NEG_INFINITY,
            };
            1.0 - ln_ratio.exp()
        }
        GroupKind::Cyclic => 1.0 - cyc_sum() / k as f64,
        GroupKind::Dihedral => {
            let (a, b) = reflection_exponents(k);
            let refl = (-(a as f64) * ln_dim).exp() + (-(b as f64) * ln_dim).exp();
            1.0 - cyc_sum() / (2.0 * k as f64) - 0.25 * refl
        }
    };
    Ok(e)
}

/// `τ_l >= r^{1-l}` for a spectrum of rank `r`.
pub fn moment_lower_bound(r: usize, l: usize) -> f64 {
    assert!(r >= 1 && l >= 1, "rank and order must be positive");
    (r as f64).powi(1 - l as i32)
}

/// `lim_{k→∞} C_{k+1}/C_k` under the symmetric group, which is the largest
/// reduced eigenvalue.
pub fn decay_ratio_limit(family: &StateFamily, s: usize) -> Result<f64> {
    Ok(family.analytic_spectrum(s)?.max())
}

/// Least-squares fit `ln C_k ≈ a k + b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    pub slope: f64,
    pub intercept: f64,
    /// Residual sum of squares in log space.
    pub residual: f64,
    pub n_points: usize,
}

/// Fits `ln C_k` against `k` over the points with `k` in `k_range`.
pub fn fit_exponent(series: &[(usize, f64)], k_range: RangeInclusive<usize>) -> Result<ExponentFit> {
    let points: Vec<(f64, f64)> = series
        .iter()
        .filter(|(k, _)| k_range.contains(k))
        .map(|&(k, c)| {
            if c > 0.0 && c.is_finite() {
                Ok((k as f64, c.ln()))
            } else {
                Err(Error::input(format!("C_{k} = {c} is not positive")))
            }
        })
        .collect::<Result<_>>()?;
    linear_fit(&points)
}

/// Ordinary least squares `y ≈ a x + b`.
pub fn linear_fit(points: &[(f64, f64)]) -> Result<ExponentFit> {
    let n = points.len();
    if n < 2 {
        return Err(Error::input("a fit needs at least two points"));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::input("a fit needs at least two distinct abscissae"));
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = points
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    Ok(ExponentFit { slope, intercept, residual, n_points: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, PI};

    fn spec(v: &[f64]) -> Spectrum {
        Spectrum::new(v.to_vec()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} vs {b}");
    }

    fn ones(k: usize) -> MomentVector {
        MomentVector::exact(vec![1.0; k])
    }

    #[test]
    fn separable_is_one_for_all_routes() {
        for k in 1..=12 {
            close(accept_symmetric_partition(&ones(k), k).unwrap(), 1.0, 1e-12);
            close(accept_symmetric_recurrence(&ones(k), k).unwrap(), 1.0, 1e-12);
            close(accept_cyclic(&ones(k), k).unwrap(), 1.0, 1e-12);
            close(accept_dihedral(&ones(k), k).unwrap(), 1.0, 1e-12);
            assert_eq!(accept_symmetric_spectral(&spec(&[1.0]), k), 1.0);
        }
    }

    #[test]
    fn maximally_mixed_qubit() {
        let s = spec(&[0.5, 0.5]);
        let tau = s.moments(4);
        close(accept_symmetric_partition(&tau, 4).unwrap(), 0.3125, 1e-15);
        close(accept_symmetric_recurrence(&tau, 4).unwrap(), 0.3125, 1e-15);
        close(accept_symmetric_spectral(&s, 4), 0.3125, 1e-15);
        close(accept_symmetric_recurrence(&tau, 3).unwrap(), 0.5, 1e-15);
        close(accept_cyclic(&tau, 4).unwrap(), 0.375, 1e-15);
        close(accept_dihedral(&tau, 4).unwrap(), 0.375, 1e-15);
        // (1/(k 2^k)) Σ_{q|k} φ(q) 2^{k/q}
        for k in 1..=16usize {
            let expect = divisors(k as u64)
                .iter()
                .map(|&q| totient(q) as f64 * 2f64.powi((k as u64 / q) as i32))
                .sum::<f64>()
                / (k as f64 * 2f64.powi(k as i32));
            close(accept_cyclic(&s.moments(k), k).unwrap(), expect, 1e-14);
            let ghz = (k as f64 + 1.0) / 2f64.powi(k as i32);
            close(accept_symmetric_spectral(&s, k), ghz, 1e-14);
        }
    }

    #[test]
    fn small_spectra() {
        let s = spec(&[0.75, 0.25]);
        close(accept_symmetric_partition(&s.moments(2), 2).unwrap(), 0.8125, 1e-15);
        let tau = MomentVector::exact(vec![1.0, 0.5]);
        close(accept_symmetric_recurrence(&tau, 2).unwrap(), 0.75, 1e-15);
        // 0.729 + 0.81·0.1 + 0.9·0.0075 + 0.0005
        close(accept_symmetric_spectral(&spec(&[0.9, 0.05, 0.05]), 3), 0.81725, 1e-12);
    }

    /// Brute force over exponent tuples g with Σ g = k.
    fn h_brute(lambda: &[f64], k: usize) -> f64 {
        fn rec(lambda: &[f64], k: usize, acc: f64) -> f64 {
            match lambda.split_first() {
                None => if k == 0 { acc } else { 0.0 },
                Some((&l, rest)) => (0..=k).map(|g| rec(rest, k - g, acc * l.powi(g as i32))).sum(),
            }
        }
        rec(lambda, k, 1.0)
    }

    #[test]
    fn spectral_matches_tuple_enumeration() {
        let s = [0.9, 0.05, 0.05];
        close(h_brute(&s, 3), 0.81725, 1e-12);
        let s = [0.4, 0.3, 0.2, 0.1];
        for k in 1..=7 {
            close(accept_symmetric_spectral(&spec(&s), k), h_brute(&s, k), 1e-14);
        }
    }

    #[test]
    fn groups_coincide_at_small_k() {
        let s = spec(&[0.6, 0.3, 0.1]);
        let tau = s.moments(3);
        let sym2 = accept_symmetric_recurrence(&tau, 2).unwrap();
        close(accept_cyclic(&tau, 2).unwrap(), sym2, 1e-15);
        close(accept_dihedral(&tau, 2).unwrap(), sym2, 1e-15);
        close((1.0 + tau.get(2).unwrap()) / 2.0, sym2, 1e-15);
        close(
            accept_dihedral(&tau, 3).unwrap(),
            accept_symmetric_recurrence(&tau, 3).unwrap(),
            1e-12,
        );
    }

    #[test]
    fn missing_moments_are_input_errors() {
        let tau = MomentVector::exact(vec![1.0, 0.5]);
        assert!(matches!(accept_symmetric_partition(&tau, 3), Err(Error::InvalidInput(_))));
        assert!(matches!(accept_symmetric_recurrence(&tau, 3), Err(Error::InvalidInput(_))));
        assert!(accept_cyclic(&tau, 3).is_err());
        // Cyclic only needs divisors: τ_1, τ_2, τ_4.
        let sparse = MomentVector::partial(vec![Some(1.0), Some(0.5), None, Some(0.125)], false);
        close(accept_cyclic(&sparse, 4).unwrap(), 0.375, 1e-15);
        close(accept_dihedral(&sparse, 4).unwrap(), 0.375, 1e-15);
        assert!(accept(&tau, GroupKind::Symmetric, 0).is_err());
    }

    #[test]
    fn roundoff_policy() {
        let tiny_neg = MomentVector::exact(vec![1.0, -1.0 - 1e-13]);
        // (1 + τ_2)/2 = -5e-14: clamped.
        assert_eq!(accept_cyclic(&tiny_neg, 2).unwrap(), 0.0);
        let bad = MomentVector::exact(vec![1.0, -1.5]);
        assert!(accept_cyclic(&bad, 2).unwrap_err().is_numerical());
        let est = MomentVector::estimated(vec![1.0, -1.5]);
        close(accept_cyclic(&est, 2).unwrap(), -0.25, 1e-15);
    }

    #[test]
    fn log_space_agrees_and_survives_underflow() {
        let s = spec(&[0.5, 0.3, 0.2]);
        for g in GroupKind::ALL {
            for k in [2, 3, 6, 10, 17] {
                let c = accept_spectrum(&s, g, k).unwrap();
                close(ln_accept(&s, g, k).unwrap(), c.ln(), 1e-10);
            }
        }
        let half = spec(&[0.5, 0.5]);
        let k = 2000;
        let expect = (k as f64 + 1.0).ln() - k as f64 * 2f64.ln();
        close(ln_accept(&half, GroupKind::Symmetric, k).unwrap(), expect, 1e-9);
        assert!(ln_accept(&half, GroupKind::Cyclic, k).unwrap().is_finite());
        assert!(ln_accept(&half, GroupKind::Dihedral, k).unwrap().is_finite());
    }

    #[test]
    fn bipartite_examples() {
        let bell = PureState::ghz(2).unwrap();
        for g in GroupKind::ALL {
            let r = entanglement_bipartite(&bell, g, 2, &[0]).unwrap();
            close(r.entanglement, 0.25, 1e-12);
            close(r.bound_max_e, 0.25, 1e-12);
        }
        let prod = PureState::product(3, 2).unwrap();
        let r = entanglement_bipartite(&prod, GroupKind::Cyclic, 5, &[1]).unwrap();
        assert_eq!(r.entanglement, 0.0);
        let ghz = PureState::ghz(4).unwrap();
        for subset in [vec![0], vec![0, 1], vec![1, 3], vec![0, 2, 3]] {
            let r = entanglement_bipartite(&ghz, GroupKind::Symmetric, 4, &subset).unwrap();
            close(r.entanglement, 0.6875, 1e-12);
        }
        assert_eq!(
            entanglement_bipartite(&ghz, GroupKind::Symmetric, 2, &[0, 1]).unwrap().scope.to_string(),
            "S=0;1"
        );
    }

    #[test]
    fn averaged_examples() {
        let ghz = PureState::ghz(4).unwrap();
        let r = entanglement_averaged(&ghz, GroupKind::Symmetric, 2, 2).unwrap();
        close(r.entanglement, 0.25, 1e-12);
        let w = PureState::w(4).unwrap();
        let r = entanglement_averaged(&w, GroupKind::Symmetric, 2, 1).unwrap();
        close(r.acceptance, 0.8125, 1e-12);
        close(r.entanglement, 0.1875, 1e-12);
        let fam = entanglement_averaged_family(&StateFamily::W { n: 4 }, GroupKind::Symmetric, 2, 1).unwrap();
        close(fam.acceptance, r.acceptance, 1e-12);
        let prod = PureState::product(4, 2).unwrap();
        assert_eq!(entanglement_averaged(&prod, GroupKind::Dihedral, 4, 2).unwrap().entanglement, 0.0);
        assert!(entanglement_averaged(&prod, GroupKind::Dihedral, 4, 4).is_err());
        assert_eq!(r.scope.to_string(), "s=1");
    }

    #[test]
    fn gme_examples() {
        let prod = PureState::product(4, 2).unwrap();
        let r = entanglement_gme(&prod, GroupKind::Symmetric, 2).unwrap();
        assert_eq!(r.entanglement, 0.0);
        assert_eq!(r.scope, Scope::Gme { argmax: vec![0] });
        let ghz = PureState::ghz(4).unwrap();
        close(entanglement_gme(&ghz, GroupKind::Symmetric, 2).unwrap().entanglement, 0.25, 1e-12);
        let w = PureState::w(4).unwrap();
        let r = entanglement_gme(&w, GroupKind::Symmetric, 2).unwrap();
        close(r.entanglement, 0.1875, 1e-12);
        assert_eq!(r.scope, Scope::Gme { argmax: vec![0] });
        let big = PureState::product(13, 2).unwrap();
        assert!(entanglement_gme(&big, GroupKind::Symmetric, 2).is_err());
    }

    #[test]
    fn gme_picks_least_entangled_cut() {
        // Bell pair on sites (1, 2), site 0 in |0>: the cut {0} is product.
        let mut amps = vec![num_complex::Complex64::new(0.0, 0.0); 8];
        amps[0b000] = num_complex::Complex64::new(0.5f64.sqrt(), 0.0);
        amps[0b011] = num_complex::Complex64::new(0.5f64.sqrt(), 0.0);
        let s = PureState::new(3, 2, amps).unwrap();
        let r = entanglement_gme(&s, GroupKind::Symmetric, 3).unwrap();
        assert_eq!(r.entanglement, 0.0);
        assert_eq!(r.scope, Scope::Gme { argmax: vec![0] });
    }

    #[test]
    fn canonical_cuts() {
        assert_eq!(canonical_bipartitions(3), vec![vec![0], vec![0, 1], vec![0, 2]]);
        assert_eq!(canonical_bipartitions(5).len(), 15);
    }

    #[test]
    fn bound_examples() {
        for g in GroupKind::ALL {
            close(max_entanglement_bound(g, 2, 2, 1).unwrap(), 0.25, 1e-15);
        }
        assert!(max_entanglement_bound(GroupKind::Cyclic, 1, 2, 1).is_err());
        assert!(max_entanglement_bound(GroupKind::Cyclic, 2, 1, 1).is_err());
        // Attained by maximally mixed reductions.
        for g in GroupKind::ALL {
            for (d, s) in [(2usize, 1usize), (2, 2), (3, 1)] {
                let dim = d.pow(s as u32);
                let mixed = Spectrum::new(vec![1.0 / dim as f64; dim]).unwrap();
                for k in 2..=9 {
                    let c = accept_spectrum(&mixed, g, k).unwrap();
                    close(max_entanglement_bound(g, k, d, s).unwrap(), 1.0 - c, 1e-12);
                }
            }
        }
    }

    #[test]
    fn moment_bound_examples() {
        close(moment_lower_bound(4, 3), 1.0 / 16.0, 1e-15);
        assert_eq!(moment_lower_bound(1, 7), 1.0);
        assert_eq!(moment_lower_bound(2, 2), 0.5);
    }

    #[test]
    fn ratio_limits() {
        let g8 = StateFamily::GhzTheta { n: 4, theta: PI / 8.0 };
        close(decay_ratio_limit(&g8, 2).unwrap(), 0.853_553_390_593_273_8, 1e-12);
        close(decay_ratio_limit(&g8, 2).unwrap().ln(), -0.1583, 1e-4);
        let g4 = StateFamily::GhzTheta { n: 4, theta: FRAC_PI_4 };
        close(decay_ratio_limit(&g4, 1).unwrap(), 0.5, 1e-12);
        close(decay_ratio_limit(&StateFamily::W { n: 4 }, 1).unwrap(), 0.75, 1e-15);
    }

    #[test]
    fn exponent_fits() {
        let series: Vec<(usize, f64)> = (1..=10).map(|k| (k, (-0.3 * k as f64).exp())).collect();
        let fit = fit_exponent(&series, 1..=10).unwrap();
        close(fit.slope, -0.3, 1e-12);
        close(fit.intercept, 0.0, 1e-12);
        assert!(fit.residual < 1e-20);
        assert_eq!(fit.n_points, 10);

        let fit_ghz = |theta: f64| {
            let s2 = theta.sin().powi(2);
            let c2 = theta.cos().powi(2);
            let series: Vec<(usize, f64)> = (1..=30)
                .map(|k| {
                    let e = k as i32 + 1;
                    (k, (s2.powi(e) - c2.powi(e)) / (s2 - c2))
                })
                .collect();
            fit_exponent(&series, 10..=20).unwrap()
        };
        assert!((fit_ghz(PI / 8.0).slope + 0.158319).abs() < 5e-3);
        // At θ = π/4 use (k+1)/2^k directly.
        let series: Vec<(usize, f64)> = (10..=20).map(|k| (k, (k as f64 + 1.0) / 2f64.powi(k as i32))).collect();
        let slope = fit_exponent(&series, 10..=20).unwrap().slope;
        close(slope, -0.628, 2e-3);
        assert!(slope > -(2f64.ln()));

        assert!(fit_exponent(&[(1, 0.5), (2, 0.0)], 1..=2).is_err());
        assert!(fit_exponent(&[(1, 0.5)], 1..=2).is_err());
    }

    #[test]
    fn parse_groups() {
        assert_eq!("Cyclic".parse::<GroupKind>().unwrap(), GroupKind::Cyclic);
        assert_eq!("dihedral".parse::<GroupKind>().unwrap(), GroupKind::Dihedral);
        assert!("alternating".parse::<GroupKind>().is_err());
        assert_eq!(GroupKind::Symmetric.to_string(), "symmetric");
    }
}
