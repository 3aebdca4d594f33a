use std::collections::BTreeSet;

use serde::Serialize;

use syment::campaign::{run_trial, PreparedState, TrialConfig};
use syment::combinatorics::{binomial, subsets_of_size};
use syment::cyclic_test::joint_distribution;
use syment::estimators::{
    allocate, error_statistics, hoeffding_budget, trial_seed, EstimateOptions, EstimateReport, Method,
};
use syment::measures::{
    accept_spectrum, entanglement_gme, fit_exponent, linear_fit, max_entanglement_bound, ExponentFit,
    MAX_AVERAGED_SUBSETS,
};
use syment::{GroupKind, PureState, Spectrum};

use crate::config::{Command, RunArgs, Scope, StateKind};
use crate::output::{emit, emit_json, emit_secondary, Cell, Table};
use crate::svg::{Chart, Series};
use crate::CliError;

const MAX_SWEEP_K: usize = 200;
/// Probabilities below this are written as exact zeros.
const PROB_FLOOR: f64 = 1e-14;
/// Above this many sites the marginal table lists single sites only.
const ALL_MARGINALS_MAX_SITES: usize = 10;
const CHAIN_TOL: f64 = 1e-12;

pub fn run(command: Command, args: &RunArgs) -> Result<(), CliError> {
    match command {
        Command::Exact => exact(args),
        Command::Sweep => sweep(args),
        Command::Estimate => estimate(args),
        Command::Scaling => scaling(args),
        Command::Distribution => distribution(args),
        Command::Budget => budget(args),
    }
}

/// A scope resolved to the reduced spectra it averages over, or to a state
/// for the GME minimum.
struct Evaluation {
    label: String,
    n: usize,
    d: usize,
    /// Subsystem size entering the bound.
    size: usize,
    kind: EvalKind,
}

enum EvalKind {
    Spectra(Vec<Spectrum>),
    Gme(PureState),
}

impl Evaluation {
    fn resolve(args: &RunArgs) -> Result<Self, CliError> {
        let scope = args.scope()?;
        // Named families are permutation invariant, so one analytic spectrum
        // per subsystem size covers every subset and no state vector is built.
        let family = args.family()?;
        let (label, size) = match &scope {
            Scope::Bipartite(sub) => (format!("S={}", join(sub, ";")), sub.len()),
            Scope::Averaged(s) => (format!("s={s}"), *s),
            Scope::Gme => ("gme".to_string(), 1),
        };
        let (n, d, kind) = match (scope, family) {
            (Scope::Gme, _) => {
                let state = args.build_state()?;
                (state.n(), state.d(), EvalKind::Gme(state))
            }
            (Scope::Bipartite(sub), Some(f)) => {
                check_subset(&sub, f.n())?;
                (f.n(), 2, EvalKind::Spectra(vec![f.analytic_spectrum(sub.len())?]))
            }
            (Scope::Averaged(s), Some(f)) => (f.n(), 2, EvalKind::Spectra(vec![f.analytic_spectrum(s)?])),
            (Scope::Bipartite(sub), None) => {
                let state = args.build_state()?;
                let spec = state.reduced_spectrum(&sub)?;
                (state.n(), state.d(), EvalKind::Spectra(vec![spec]))
            }
            (Scope::Averaged(s), None) => {
                let state = args.build_state()?;
                let n = state.n();
                if s == 0 || s >= n {
                    return Err(CliError::input(format!("--s must satisfy 1 <= s <= n-1, got s={s}, n={n}")));
                }
                if binomial(n as u64, s as u64).to_f64() > MAX_AVERAGED_SUBSETS as f64 {
                    return Err(CliError::input(format!("binom({n}, {s}) subsets is too many to enumerate")));
                }
                let spectra = subsets_of_size(n, s)
                    .iter()
                    .map(|sub| state.reduced_spectrum(sub))
                    .collect::<Result<Vec<_>, _>>()?;
                (n, state.d(), EvalKind::Spectra(spectra))
            }
        };
        Ok(Evaluation { label, n, d, size, kind })
    }

    fn acceptance(&self, group: GroupKind, k: usize) -> Result<f64, CliError> {
        match &self.kind {
            EvalKind::Spectra(spectra) => {
                let mut total = 0.0;
                for spec in spectra {
                    total += accept_spectrum(spec, group, k)?;
                }
                Ok(total / spectra.len() as f64)
            }
            EvalKind::Gme(state) => Ok(entanglement_gme(state, group, k)?.acceptance),
        }
    }

    fn bound(&self, group: GroupKind, k: usize) -> Result<f64, CliError> {
        Ok(max_entanglement_bound(group, k, self.d, self.size.min(self.n - self.size))?)
    }
}

fn check_subset(sub: &[usize], n: usize) -> Result<(), CliError> {
    let distinct: BTreeSet<usize> = sub.iter().copied().collect();
    if sub.is_empty() || distinct.len() != sub.len() || sub.iter().any(|&x| x >= n) || sub.len() >= n {
        return Err(CliError::input(format!(
            "--subset must be a nonempty proper subset of distinct sites below n={n}"
        )));
    }
    Ok(())
}

fn join(items: &[usize], sep: &str) -> String {
    items.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(sep)
}

fn exact(args: &RunArgs) -> Result<(), CliError> {
    let k = args.require_k()?;
    let eval = Evaluation::resolve(args)?;
    let mut table = Table::new(&["k", "group", "scope", "C", "E", "bound_max_E"]);
    for group in args.groups() {
        let c = eval.acceptance(group, k)?;
        table.push(vec![
            k.into(),
            group.as_str().into(),
            eval.label.as_str().into(),
            c.into(),
            (1.0 - c).max(0.0).into(),
            eval.bound(group, k)?.into(),
        ]);
    }
    emit(&table, Command::Exact, args)
}

#[derive(Serialize)]
struct FitRecord {
    group: GroupKind,
    k_from: usize,
    k_to: usize,
    #[serde(flatten)]
    fit: ExponentFit,
}

fn sweep(args: &RunArgs) -> Result<(), CliError> {
    let k_max = args.kmax.ok_or_else(|| CliError::input("--kmax is required"))?;
    if !(2..=MAX_SWEEP_K).contains(&k_max) {
        return Err(CliError::input(format!("--kmax must lie in 2..={MAX_SWEEP_K}")));
    }
    let eval = Evaluation::resolve(args)?;
    let groups = args.groups();
    let mut table = Table::new(&["k", "group", "scope", "C", "E"]);
    let mut series: Vec<Vec<(usize, f64)>> = vec![Vec::new(); groups.len()];
    for k in 2..=k_max {
        let mut row = Vec::with_capacity(groups.len());
        for (gi, &group) in groups.iter().enumerate() {
            let c = eval.acceptance(group, k)?;
            series[gi].push((k, c));
            row.push((group, c));
            table.push(vec![
                k.into(),
                group.as_str().into(),
                eval.label.as_str().into(),
                c.into(),
                (1.0 - c).max(0.0).into(),
            ]);
        }
        let get = |g: GroupKind| row.iter().find(|r| r.0 == g).map(|r| r.1);
        if let (Some(s), Some(d), Some(c)) = (
            get(GroupKind::Symmetric),
            get(GroupKind::Dihedral),
            get(GroupKind::Cyclic),
        ) {
            if s > d + CHAIN_TOL || d > c + CHAIN_TOL {
                eprintln!("warning: k={k}: group ordering violated (S={s}, D={d}, C={c})");
            }
        }
    }
    emit(&table, Command::Sweep, args)?;

    if let Some((a, b)) = args.fit_range {
        let fits = groups
            .iter()
            .zip(&series)
            .map(|(&group, points)| {
                Ok(FitRecord { group, k_from: a, k_to: b, fit: fit_exponent(points, a..=b)? })
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        emit_json(&fits, "fit", args)?;
    }
    if let Some(path) = &args.svg {
        Chart {
            title: format!("acceptance probability, {}", eval.label),
            x_label: "k".into(),
            y_label: "C_k".into(),
            log_x: false,
            log_y: true,
            scatter: false,
            series: groups
                .iter()
                .zip(&series)
                .map(|(g, pts)| Series {
                    label: g.as_str().into(),
                    points: pts.iter().map(|&(k, c)| (k as f64, c)).collect(),
                })
                .collect(),
        }
        .write(path)?;
    }
    Ok(())
}

fn require_trials(args: &RunArgs) -> Result<u64, CliError> {
    match args.trials {
        None => Err(CliError::input("--trials is required")),
        Some(0) => Err(CliError::input("--trials must be positive")),
        Some(t) => Ok(t),
    }
}

fn trial_config(args: &RunArgs, method: Method, group: GroupKind, k: usize, n_tot: u64) -> TrialConfig {
    TrialConfig {
        method,
        group,
        k,
        n_tot,
        mode: args.alloc,
        extrapolate: args.extrapolate,
        options: EstimateOptions { clip: args.clip },
    }
}

fn report_row(t: u64, r: &EstimateReport, with_extrapolation: bool) -> Vec<Cell> {
    let mut row = vec![
        t.into(),
        r.method.as_str().into(),
        r.group.as_str().into(),
        r.k.into(),
        r.n_tot.into(),
        r.c_hat.into(),
        r.c_exact.into(),
        r.abs_err.into(),
        r.log_err.into(),
    ];
    if with_extrapolation {
        row.push(r.extrapolated.into());
    }
    row
}

const REPORT_COLUMNS: [&str; 9] = ["trial", "method", "group", "k", "n_tot", "c_hat", "c_exact", "abs_err", "log_err"];

fn report_table(with_extrapolation: bool) -> Table {
    let mut columns = REPORT_COLUMNS.to_vec();
    if with_extrapolation {
        columns.push("extrapolated");
    }
    Table::new(&columns)
}

/// Trial `t` of the `(group, method, budget)` cell at these list positions
/// draws its generator from `trial_seed(seed, index)` with
/// `index = ((g * methods + m) * budgets + b) * trials + t`.
fn estimate(args: &RunArgs) -> Result<(), CliError> {
    let k = args.require_k()?;
    let target = args.target()?;
    let trials = require_trials(args)?;
    let budgets = args.budget_list()?;
    let methods = args.methods();
    let state = args.build_state()?;
    let with_extrapolation = args.extrapolate.is_some();
    let mut table = report_table(with_extrapolation);
    for (gi, &group) in args.groups().iter().enumerate() {
        let prepared = PreparedState::new(state.clone(), &target, group, k)?;
        for (mi, &method) in methods.iter().enumerate() {
            for (bi, &n_tot) in budgets.iter().enumerate() {
                let config = trial_config(args, method, group, k, n_tot);
                let cell = (gi * methods.len() + mi) * budgets.len() + bi;
                let mut total_err = 0.0;
                for t in 0..trials {
                    let seed = trial_seed(args.seed, cell as u64 * trials + t);
                    let report = run_trial(&prepared, &config, seed)?;
                    total_err += report.abs_err;
                    table.push(report_row(t, &report, with_extrapolation));
                }
                eprintln!(
                    "{method} {group} k={k} n_tot={n_tot}: mean abs_err {:.3e} over {trials} trials",
                    total_err / trials as f64
                );
            }
        }
    }
    emit(&table, Command::Estimate, args)
}

/// Two-sided 97.5% Student-t quantiles for 1..=30 degrees of freedom.
const T_975: [f64; 30] = [
    12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228, 2.201, 2.179, 2.160, 2.145, 2.131,
    2.120, 2.110, 2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042,
];

#[derive(Serialize)]
struct SlopeSummary {
    slope: Option<f64>,
    intercept: Option<f64>,
    residual: Option<f64>,
    n_points: usize,
    stderr: Option<f64>,
    /// 95% confidence interval on the slope.
    ci95: Option<[f64; 2]>,
}

impl SlopeSummary {
    fn from_points(points: &[(f64, f64)]) -> Self {
        let fit = (points.len() >= 2).then(|| linear_fit(points).ok()).flatten();
        let Some(fit) = fit else {
            return SlopeSummary { slope: None, intercept: None, residual: None, n_points: points.len(), stderr: None, ci95: None };
        };
        let df = points.len().saturating_sub(2);
        let stderr = (df > 0).then(|| {
            let mx = points.iter().map(|p| p.0).sum::<f64>() / points.len() as f64;
            let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
            (fit.residual / df as f64 / sxx).sqrt()
        });
        let ci95 = stderr.map(|se| {
            let t = T_975.get(df - 1).copied().unwrap_or(1.96);
            [fit.slope - t * se, fit.slope + t * se]
        });
        SlopeSummary {
            slope: Some(fit.slope),
            intercept: Some(fit.intercept),
            residual: Some(fit.residual),
            n_points: fit.n_points,
            stderr,
            ci95,
        }
    }
}

#[derive(Serialize)]
struct MethodSummary {
    method: Method,
    group: GroupKind,
    k: usize,
    abs_err: SlopeSummary,
    log_err: SlopeSummary,
}

/// Like [`estimate`], with `index = (m * budgets + b) * trials + t`. Haar
/// states are redrawn per trial from `trial_seed(!seed, t)`.
fn scaling(args: &RunArgs) -> Result<(), CliError> {
    let k = args.require_k()?;
    let target = args.target()?;
    let group = args.group.ok_or_else(|| CliError::input("--group is required for scaling"))?;
    let trials = require_trials(args)?;
    let budgets = args.budget_list()?;
    let methods = args.methods();
    let fresh_states = args.state == Some(StateKind::Haar);

    let mut reports: Vec<Vec<EstimateReport>> = vec![Vec::new(); methods.len()];
    let mut shared = None;
    for t in 0..trials {
        let fresh;
        let prepared = if fresh_states {
            let state = args.build_state_with_seed(trial_seed(!args.seed, t))?;
            fresh = PreparedState::new(state, &target, group, k)?;
            &fresh
        } else {
            if shared.is_none() {
                shared = Some(PreparedState::new(args.build_state()?, &target, group, k)?);
            }
            shared.as_ref().expect("prepared above")
        };
        for (mi, &method) in methods.iter().enumerate() {
            for (bi, &n_tot) in budgets.iter().enumerate() {
                let config = trial_config(args, method, group, k, n_tot);
                let index = ((mi * budgets.len() + bi) as u64) * trials + t;
                reports[mi].push(run_trial(prepared, &config, trial_seed(args.seed, index))?);
            }
        }
    }

    let mut table = Table::new(&["method", "n_tot", "trials", "mean_abs_err", "mean_log_err", "log_excluded"]);
    let mut summary_table = Table::new(&["method", "slope", "intercept", "residual", "n_points"]);
    let mut summaries = Vec::new();
    let mut chart_series = Vec::new();
    for (&method, reps) in methods.iter().zip(&reports) {
        let stats = error_statistics(reps)?;
        for b in &stats.per_budget {
            table.push(vec![
                method.as_str().into(),
                b.n_tot.into(),
                b.trials.into(),
                b.mean_abs_err.into(),
                b.mean_log_err.into(),
                b.log_excluded.into(),
            ]);
        }
        let abs_points: Vec<(f64, f64)> = stats
            .per_budget
            .iter()
            .filter(|b| b.mean_abs_err > 0.0)
            .map(|b| ((b.n_tot as f64).ln(), b.mean_abs_err.ln()))
            .collect();
        let log_points: Vec<(f64, f64)> = stats
            .per_budget
            .iter()
            .filter_map(|b| b.mean_log_err.filter(|&e| e > 0.0).map(|e| ((b.n_tot as f64).ln(), e.ln())))
            .collect();
        let abs = SlopeSummary::from_points(&abs_points);
        summary_table.push(vec![
            method.as_str().into(),
            abs.slope.into(),
            abs.intercept.into(),
            abs.residual.into(),
            abs.n_points.into(),
        ]);
        summaries.push(MethodSummary { method, group, k, abs_err: abs, log_err: SlopeSummary::from_points(&log_points) });
        chart_series.push(Series {
            label: method.as_str().into(),
            points: stats.per_budget.iter().map(|b| (b.n_tot as f64, b.mean_abs_err)).collect(),
        });
    }
    emit(&table, Command::Scaling, args)?;
    emit_secondary(&summary_table, "summary", args)?;
    emit_json(&summaries, "summary", args)?;
    if let Some(path) = &args.svg {
        Chart {
            title: format!("mean absolute error, {group} k={k}"),
            x_label: "N_tot".into(),
            y_label: "mean |C_hat - C|".into(),
            log_x: true,
            log_y: true,
            scatter: false,
            series: chart_series,
        }
        .write(path)?;
    }
    Ok(())
}

fn outcome_label(z: &[usize], k: usize) -> String {
    if k <= 10 {
        z.iter().map(|d| char::from(b'0' + *d as u8)).collect()
    } else {
        join(z, ".")
    }
}

fn distribution(args: &RunArgs) -> Result<(), CliError> {
    let k = args.require_k()?;
    let state = args.build_state()?;
    let dist = joint_distribution(&state, k)?;
    let n = state.n();

    let mut table = Table::new(&["z", "p"]);
    for (i, &p) in dist.probs().iter().enumerate() {
        let p = if p < PROB_FLOOR { 0.0 } else { p };
        table.push(vec![outcome_label(&dist.outcome(i), k).into(), p.into()]);
    }
    emit(&table, Command::Distribution, args)?;

    let subsets: Vec<Vec<usize>> = if n <= ALL_MARGINALS_MAX_SITES {
        (1..n).flat_map(|s| subsets_of_size(n, s)).collect()
    } else {
        eprintln!("note: n={n} > {ALL_MARGINALS_MAX_SITES}, checking single-site marginals only");
        (0..n).map(|x| vec![x]).collect()
    };
    let mut marginals = Table::new(&["subset", "marginal", "exact", "residual"]);
    let mut worst: f64 = 0.0;
    for sub in &subsets {
        let m = dist.marginal(sub)?;
        let exact = accept_spectrum(&state.reduced_spectrum(sub)?, GroupKind::Cyclic, k)?;
        worst = worst.max((m - exact).abs());
        marginals.push(vec![join(sub, ";").into(), m.into(), exact.into(), (m - exact).into()]);
    }
    if !subsets.is_empty() {
        emit_secondary(&marginals, "marginals", args)?;
        eprintln!("largest marginal residual over {} subsets: {worst:.3e}", subsets.len());
    }

    if let Some(path) = &args.svg {
        Chart {
            title: format!("cyclic test outcomes, k={k}"),
            x_label: "outcome index".into(),
            y_label: "probability".into(),
            log_x: false,
            log_y: false,
            scatter: true,
            series: vec![Series {
                label: "p(z)".into(),
                points: dist.probs().iter().enumerate().map(|(i, &p)| (i as f64, p)).collect(),
            }],
        }
        .write(path)?;
    }
    Ok(())
}

fn budget(args: &RunArgs) -> Result<(), CliError> {
    let k = args.require_k()?;
    let eps = args.eps.ok_or_else(|| CliError::input("--eps is required"))?;
    let mut table = Table::new(&[
        "method",
        "group",
        "k",
        "eps",
        "delta",
        "bound",
        "copies",
        "order",
        "eps_order",
        "executions",
        "plan_budget",
        "plan_executions",
    ]);
    for group in args.groups() {
        for method in args.methods() {
            let hb = hoeffding_budget(method, group, k, eps, args.delta)?;
            // The plan splits --budget if given, else the Hoeffding copies.
            let plan_budget = args.budget.unwrap_or(hb.copies);
            let plan = allocate(group, method, k, plan_budget, args.alloc)?;
            let orders: BTreeSet<usize> = hb.executions.keys().copied().chain(plan.orders()).collect();
            for order in orders {
                table.push(vec![
                    method.as_str().into(),
                    group.as_str().into(),
                    k.into(),
                    eps.into(),
                    args.delta.into(),
                    hb.bound.into(),
                    hb.copies.into(),
                    order.into(),
                    hb.eps_per_order.get(&order).copied().into(),
                    hb.executions.get(&order).copied().into(),
                    plan_budget.into(),
                    plan.counts.get(&order).copied().into(),
                ]);
            }
        }
    }
    emit(&table, Command::Budget, args)
}
