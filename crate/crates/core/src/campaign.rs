//! End-to-end estimation trials on a fixed state.
//!
//! For a bipartite target the whole budget goes to one subsystem. For an
//! averaged target the SWAP, G-Bose and simultaneous-moment methods split
//! the budget evenly over all `binom(n, s)` subsystems, while the cyclic
//! method post-processes one shared set of outcome strings for every
//! subsystem.

use std::cell::RefCell;
use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::combinatorics::subsets_of_size;
use crate::cyclic_test::{
    estimate_moments_from_cyclic, joint_distribution, postprocess_subset, sample_outcomes,
    OutcomeDistribution, OutcomeSample,
};
use crate::estimators::{
    allocate, allocate_extrapolated, assemble, estimate_via_moments, sample_gbose, AllocMode,
    AllocationPlan, EstimateOptions, EstimateReport, Method,
};
use crate::measures::{accept_spectrum, pairwise_sum, reflection_exponents, GroupKind};
use crate::state::{validate_subset, MomentVector, PureState};
use crate::{Error, Result};

/// Which acceptance probability a trial estimates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Target {
    Bipartite(Vec<usize>),
    Averaged(usize),
}

/// Settings shared by every trial of a campaign.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialConfig {
    pub method: Method,
    pub group: GroupKind,
    pub k: usize,
    pub n_tot: u64,
    pub mode: AllocMode,
    /// Measure moments up to this order and extrapolate the rest.
    pub extrapolate: Option<usize>,
    pub options: EstimateOptions,
}

/// A state with everything a trial needs precomputed: the subsystems of the
/// target, their exact moments and acceptance probabilities, and (lazily)
/// the cyclic-test distributions.
pub struct PreparedState {
    state: PureState,
    group: GroupKind,
    k: usize,
    subsets: Vec<Vec<usize>>,
    moments: Vec<MomentVector>,
    exact: Vec<f64>,
    distributions: RefCell<BTreeMap<usize, OutcomeDistribution>>,
}

impl PreparedState {
    pub fn new(state: PureState, target: &Target, group: GroupKind, k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::input("estimation needs k >= 2"));
        }
        let n = state.n();
        let subsets = match target {
            Target::Bipartite(sub) => {
                validate_subset(sub, n, false)?;
                vec![sub.clone()]
            }
            Target::Averaged(s) => {
                if *s == 0 || *s >= n {
                    return Err(Error::input(format!("subset size must satisfy 1 <= s <= n-1, got s={s}")));
                }
                subsets_of_size(n, *s)
            }
        };
        let mut moments = Vec::with_capacity(subsets.len());
        let mut exact = Vec::with_capacity(subsets.len());
        for sub in &subsets {
            let spec = state.reduced_spectrum(sub)?;
            moments.push(spec.moments(k));
            exact.push(accept_spectrum(&spec, group, k)?);
        }
        Ok(PreparedState {
            state,
            group,
            k,
            subsets,
            moments,
            exact,
            distributions: RefCell::new(BTreeMap::new()),
        })
    }

    pub fn state(&self) -> &PureState {
        &self.state
    }

    pub fn subsets(&self) -> &[Vec<usize>] {
        &self.subsets
    }

    /// Exact target value: the mean of the per-subsystem acceptance probabilities.
    pub fn exact(&self) -> f64 {
        pairwise_sum(&self.exact) / self.exact.len() as f64
    }

    fn sample_cyclic(&self, j: usize, shots: u64, rng: &mut ChaCha8Rng) -> Result<OutcomeSample> {
        let mut cache = self.distributions.borrow_mut();
        if let std::collections::btree_map::Entry::Vacant(e) = cache.entry(j) {
            e.insert(joint_distribution(&self.state, j)?);
        }
        Ok(sample_outcomes(&cache[&j], shots, rng))
    }
}

fn plan_for(config: &TrialConfig, budget: u64) -> Result<AllocationPlan> {
    match config.extrapolate {
        Some(r) => allocate_extrapolated(config.group, config.method, config.k, r, budget, config.mode),
        None => allocate(config.group, config.method, config.k, budget, config.mode),
    }
}

/// One estimation trial, seeded by `seed`.
pub fn run_trial(prepared: &PreparedState, config: &TrialConfig, seed: u64) -> Result<EstimateReport> {
    if config.group != prepared.group || config.k != prepared.k {
        return Err(Error::input("trial settings do not match the prepared state"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = prepared.subsets.len() as u64;
    let (estimates, copies, plan) = match config.method {
        Method::Swap | Method::SimMoments | Method::GBose => {
            let plan = plan_for(config, config.n_tot / m)?;
            let mut estimates = Vec::with_capacity(m as usize);
            for (tau, &c) in prepared.moments.iter().zip(&prepared.exact) {
                estimates.push(match config.method {
                    Method::GBose => sample_gbose(c, plan.count(config.k), &mut rng)?,
                    _ => estimate_via_moments(tau, &plan, &mut rng, config.options)?,
                });
            }
            (estimates, plan.total_copies * m, plan)
        }
        Method::Cyclic => {
            let plan = plan_for(config, config.n_tot)?;
            let samples: BTreeMap<usize, OutcomeSample> = plan
                .counts
                .iter()
                .map(|(&j, &shots)| Ok((j, prepared.sample_cyclic(j, shots, &mut rng)?)))
                .collect::<Result<_>>()?;
            let estimates = prepared
                .subsets
                .iter()
                .map(|sub| cyclic_estimate(&samples, sub, &plan, config.options))
                .collect::<Result<Vec<f64>>>()?;
            (estimates, plan.total_copies, plan)
        }
    };
    let c_hat = pairwise_sum(&estimates) / estimates.len() as f64;
    let mut report = EstimateReport::new(&plan, c_hat, prepared.exact(), copies, seed);
    report.n_tot = config.n_tot;
    Ok(report)
}

fn cyclic_estimate(
    samples: &BTreeMap<usize, OutcomeSample>,
    subset: &[usize],
    plan: &AllocationPlan,
    options: EstimateOptions,
) -> Result<f64> {
    let j0: BTreeMap<usize, f64> = samples
        .iter()
        .map(|(&j, s)| Ok((j, postprocess_subset(s, subset)?)))
        .collect::<Result<_>>()?;
    let k = plan.k;
    match plan.group {
        GroupKind::Cyclic => Ok(j0[&k]),
        GroupKind::Dihedral if k == 2 => Ok(j0[&2]),
        GroupKind::Dihedral => {
            let mut tau2 = 2.0 * j0[&2] - 1.0;
            if options.clip {
                tau2 = tau2.clamp(0.0, 1.0);
            }
            let (a, b) = reflection_exponents(k);
            Ok(0.5 * j0[&k] + 0.25 * (tau2.powi(a as i32) + tau2.powi(b as i32)))
        }
        GroupKind::Symmetric => {
            let tau = estimate_moments_from_cyclic(&j0)?;
            assemble(tau.entries().to_vec(), plan, options)
        }
    }
}
