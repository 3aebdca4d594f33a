use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use syment::campaign::Target;
use syment::estimators::{AllocMode, Method};
use syment::{GroupKind, PureState, StateFamily};

use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "syment", version, about = "Symmetrized entanglement measures and estimation experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub args: RunArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// C, E and the maximal-E bound for one scope.
    Exact,
    /// C and E over a range of k, with an exponent fit.
    Sweep,
    /// Monte Carlo estimation trials.
    Estimate,
    /// Error scaling with the copy budget.
    Scaling,
    /// Outcome distribution of the parallelized cyclic test.
    Distribution,
    /// Allocation plans and Hoeffding budgets.
    Budget,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Exact => "exact",
            Command::Sweep => "sweep",
            Command::Estimate => "estimate",
            Command::Scaling => "scaling",
            Command::Distribution => "distribution",
            Command::Budget => "budget",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateKind {
    Ghz,
    GhzTheta,
    W,
    Dicke,
    Haar,
    Product,
    File,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Every flag, shared by all commands. Serialized verbatim into the
/// provenance file.
#[derive(Clone, Debug, Args, Serialize)]
pub struct RunArgs {
    #[arg(long, global = true, value_enum)]
    pub state: Option<StateKind>,
    /// State file: {"n", "d", "amplitudes": [[re, im], ...]}.
    #[arg(long, global = true)]
    pub file: Option<PathBuf>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    /// Local dimension (product and haar states).
    #[arg(long, global = true, default_value_t = 2)]
    pub d: usize,
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// Excitation number of a Dicke state.
    #[arg(long, global = true)]
    pub e: Option<usize>,
    /// Bipartite subsystem, e.g. 0,2.
    #[arg(long, global = true, value_delimiter = ',')]
    pub subset: Option<Vec<usize>>,
    /// Subsystem size for the averaged measure.
    #[arg(long, global = true)]
    pub s: Option<usize>,
    /// Genuine multipartite measure (minimum over bipartitions).
    #[arg(long, global = true)]
    pub gme: bool,
    #[arg(long, global = true, value_parser = parse_group)]
    pub group: Option<GroupKind>,
    #[arg(long, global = true, value_parser = parse_method)]
    pub method: Option<Method>,
    #[arg(long, global = true)]
    pub k: Option<usize>,
    #[arg(long, global = true)]
    pub kmax: Option<usize>,
    /// Inclusive k range of the exponent fit, e.g. 10:20.
    #[arg(long, global = true, value_parser = parse_range)]
    pub fit_range: Option<(usize, usize)>,
    #[arg(long, global = true, value_parser = parse_count)]
    pub budget: Option<u64>,
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_count)]
    pub budgets: Option<Vec<u64>>,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Measure moments up to R and extrapolate the rest.
    #[arg(long, global = true)]
    pub extrapolate: Option<usize>,
    #[arg(long, global = true, value_parser = parse_alloc, default_value = "table")]
    pub alloc: AllocMode,
    /// Clip estimated moments to [0, 1].
    #[arg(long, global = true)]
    pub clip: bool,
    /// Target absolute error for budget planning.
    #[arg(long, global = true)]
    pub eps: Option<f64>,
    /// Failure probability for budget planning.
    #[arg(long, global = true, default_value_t = 0.05)]
    pub delta: f64,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long, global = true)]
    pub svg: Option<PathBuf>,
}

fn parse_group(s: &str) -> Result<GroupKind, String> {
    s.parse().map_err(|e: syment::Error| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: syment::Error| e.to_string())
}

fn parse_alloc(s: &str) -> Result<AllocMode, String> {
    s.parse().map_err(|e: syment::Error| e.to_string())
}

fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').ok_or("expected a:b")?;
    let a: usize = a.trim().parse().map_err(|_| format!("bad range start '{a}'"))?;
    let b: usize = b.trim().parse().map_err(|_| format!("bad range end '{b}'"))?;
    if a > b {
        return Err(format!("empty range {a}:{b}"));
    }
    Ok((a, b))
}

/// Positive integer, also accepting forms like `1e6`.
fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(v) = s.trim().parse::<u64>() {
        return Ok(v);
    }
    let f: f64 = s.trim().parse().map_err(|_| format!("'{s}' is not a count"))?;
    if f >= 0.0 && f.fract() == 0.0 && f < 1.8e19 {
        Ok(f as u64)
    } else {
        Err(format!("'{s}' is not a nonnegative integer"))
    }
}

impl RunArgs {
    fn require_n(&self) -> Result<usize, CliError> {
        self.n.ok_or_else(|| CliError::input("--n is required for this state"))
    }

    fn require_state(&self) -> Result<StateKind, CliError> {
        self.state.ok_or_else(|| CliError::input("--state is required"))
    }

    /// The named family behind `--state`, when it has a closed-form spectrum.
    pub fn family(&self) -> Result<Option<StateFamily>, CliError> {
        let kind = self.require_state()?;
        let qubit_only = matches!(kind, StateKind::Ghz | StateKind::GhzTheta | StateKind::W | StateKind::Dicke);
        if qubit_only && self.d != 2 {
            return Err(CliError::input("ghz, ghz-theta, w and dicke states are qubit states (--d 2)"));
        }
        Ok(match kind {
            StateKind::Ghz => Some(StateFamily::GhzTheta { n: self.require_n()?, theta: std::f64::consts::FRAC_PI_4 }),
            StateKind::GhzTheta => Some(StateFamily::GhzTheta {
                n: self.require_n()?,
                theta: self.theta.ok_or_else(|| CliError::input("--theta is required for ghz-theta"))?,
            }),
            StateKind::W => Some(StateFamily::W { n: self.require_n()? }),
            StateKind::Dicke => Some(StateFamily::Dicke {
                n: self.require_n()?,
                e: self.e.ok_or_else(|| CliError::input("--e is required for dicke"))?,
            }),
            StateKind::Product if self.d == 2 => Some(StateFamily::Product { n: self.require_n()? }),
            _ => None,
        })
    }

    /// Builds the state; Haar states use `seed`.
    pub fn build_state_with_seed(&self, seed: u64) -> Result<PureState, CliError> {
        let state = match self.require_state()? {
            StateKind::File => {
                let path = self.file.as_ref().ok_or_else(|| CliError::input("--file is required for --state file"))?;
                PureState::read_json(path)?
            }
            StateKind::Haar => PureState::haar_random(self.require_n()?, self.d, seed)?,
            StateKind::Product => PureState::product(self.require_n()?, self.d)?,
            _ => self.family()?.expect("named families have a closed form").build()?,
        };
        Ok(state)
    }

    pub fn build_state(&self) -> Result<PureState, CliError> {
        self.build_state_with_seed(self.seed)
    }

    /// Copies `k`, which must be at least 2.
    pub fn require_k(&self) -> Result<usize, CliError> {
        let k = self.k.ok_or_else(|| CliError::input("--k is required"))?;
        if k < 2 {
            return Err(CliError::input(format!("--k must be >= 2, got {k}")));
        }
        Ok(k)
    }

    /// Groups to evaluate: the one given, or all three.
    pub fn groups(&self) -> Vec<GroupKind> {
        self.group.map_or_else(|| GroupKind::ALL.to_vec(), |g| vec![g])
    }

    pub fn methods(&self) -> Vec<Method> {
        self.method.map_or_else(|| Method::ALL.to_vec(), |m| vec![m])
    }

    /// Budgets from `--budgets`, else `--budget`.
    pub fn budget_list(&self) -> Result<Vec<u64>, CliError> {
        let list = match (&self.budgets, self.budget) {
            (Some(b), _) => b.clone(),
            (None, Some(b)) => vec![b],
            (None, None) => return Err(CliError::input("--budget or --budgets is required")),
        };
        if list.contains(&0) {
            return Err(CliError::input("budgets must be positive"));
        }
        Ok(list)
    }

    pub fn scope(&self) -> Result<Scope, CliError> {
        match (&self.subset, self.s, self.gme) {
            (Some(sub), None, false) => Ok(Scope::Bipartite(sub.clone())),
            (None, Some(s), false) => Ok(Scope::Averaged(s)),
            (None, None, true) => Ok(Scope::Gme),
            (None, None, false) => Err(CliError::input("one of --subset, --s or --gme is required")),
            _ => Err(CliError::input("--subset, --s and --gme are mutually exclusive")),
        }
    }

    pub fn target(&self) -> Result<Target, CliError> {
        match self.scope()? {
            Scope::Bipartite(sub) => Ok(Target::Bipartite(sub)),
            Scope::Averaged(s) => Ok(Target::Averaged(s)),
            Scope::Gme => Err(CliError::input("estimation supports --subset or --s, not --gme")),
        }
    }
}

pub enum Scope {
    Bipartite(Vec<usize>),
    Averaged(usize),
    Gme,
}
