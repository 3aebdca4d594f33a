//! Pure states, the GHZ/W/Dicke families, partial traces and spectra.
//!
//! Site 0 is the leftmost tensor factor: the flat amplitude index of the
//! digits `(x_0, ..., x_{n-1})` is `Σ x_j d^{n-1-j}`.

use std::f64::consts::FRAC_PI_4;
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::combinatorics::binomial;
use crate::jacobi::hermitian_eigenvalues;
use crate::{Error, Result};

/// Allowed deviation of the squared norm from one on construction.
pub const NORM_TOL: f64 = 1e-9;
/// Eigenvalues below this are dropped from a reduced spectrum.
pub const PRUNE_TOL: f64 = 1e-12;
/// Largest reduced density matrix handed to the eigensolver.
pub const EIGEN_DIM_CAP: usize = 256;

/// Largest statevector we agree to allocate.
const MAX_AMPLITUDES: usize = 1 << 28;

/// A normalized pure state of `n` sites with local dimension `d`.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    n: usize,
    d: usize,
    amplitudes: Vec<Complex64>,
}

impl PureState {
    /// Validates dimensions and norm. A state whose squared norm is within
    /// [`NORM_TOL`] of one is rescaled to unit norm.
    pub fn new(n: usize, d: usize, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::input("a state needs at least one site"));
        }
        if d < 2 {
            return Err(Error::input(format!("local dimension must be >= 2, got {d}")));
        }
        let len = dimension(d, n)?;
        if amplitudes.len() != len {
            return Err(Error::input(format!(
                "expected {len} amplitudes for n={n}, d={d}, got {}",
                amplitudes.len()
            )));
        }
        let norm_sqr: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if !norm_sqr.is_finite() || (norm_sqr - 1.0).abs() > NORM_TOL {
            return Err(Error::input(format!(
                "state is not normalized: squared norm {norm_sqr}"
            )));
        }
        let scale = 1.0 / norm_sqr.sqrt();
        for a in &mut amplitudes {
            *a *= scale;
        }
        Ok(PureState { n, d, amplitudes })
    }

    /// Builds a state from unnormalized amplitudes. Fails on the zero vector.
    pub fn normalized(n: usize, d: usize, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::input("cannot normalize a zero or non-finite vector"));
        }
        for a in &mut amplitudes {
            *a /= norm;
        }
        PureState::new(n, d, amplitudes)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &PureState) -> f64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .norm_sqr()
    }

    /// Trace distance between the two pure states, `sqrt(1 - |⟨ψ|φ⟩|²)`.
    pub fn trace_distance(&self, other: &PureState) -> f64 {
        (1.0 - self.fidelity(other)).max(0.0).sqrt()
    }

    /// Copy of the state with its sites reordered: site `j` of the result is
    /// site `order[j]` of `self`.
    pub fn permute_sites(&self, order: &[usize]) -> Result<PureState> {
        validate_permutation(order, self.n)?;
        let mut out = vec![Complex64::new(0.0, 0.0); self.amplitudes.len()];
        let mut digits = vec![0usize; self.n];
        for (idx, amp) in self.amplitudes.iter().enumerate() {
            to_digits(idx, self.d, &mut digits);
            let mut new_idx = 0;
            for &src in order {
                new_idx = new_idx * self.d + digits[src];
            }
            out[new_idx] = *amp;
        }
        PureState::new(self.n, self.d, out)
    }

    /// Parses the JSON state format `{"n", "d", "amplitudes": [[re, im], ...]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let file: StateFile = serde_json::from_str(text)?;
        let amps = file
            .amplitudes
            .into_iter()
            .map(|[re, im]| Complex64::new(re, im))
            .collect();
        PureState::new(file.n, file.d, amps)
    }

    pub fn to_json(&self) -> String {
        let file = StateFile {
            n: self.n,
            d: self.d,
            amplitudes: self.amplitudes.iter().map(|a| [a.re, a.im]).collect(),
        };
        serde_json::to_string(&file).expect("state serialization cannot fail")
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        PureState::from_json(&text)
    }

    /// Reduced density matrix on `subset`, row-major, with the subset's
    /// digits ordered as listed.
    pub fn reduced_density_matrix(&self, subset: &[usize]) -> Result<(Vec<Complex64>, usize)> {
        validate_subset(subset, self.n, false)?;
        let complement = complement_of(subset, self.n);
        let dim_s = self.d.pow(subset.len() as u32);
        let dim_c = self.d.pow(complement.len() as u32);
        let m = self.split_matrix(subset, &complement);
        let mut rho = vec![Complex64::new(0.0, 0.0); dim_s * dim_s];
        for a in 0..dim_s {
            for b in a..dim_s {
                let v: Complex64 = (0..dim_c)
                    .map(|c| m[a * dim_c + c] * m[b * dim_c + c].conj())
                    .sum();
                rho[a * dim_s + b] = v;
                rho[b * dim_s + a] = v.conj();
            }
        }
        Ok((rho, dim_s))
    }

    /// Amplitudes reshaped to a `d^|S| × d^|S^c|` matrix.
    fn split_matrix(&self, subset: &[usize], complement: &[usize]) -> Vec<Complex64> {
        let dim_c = self.d.pow(complement.len() as u32);
        let mut m = vec![Complex64::new(0.0, 0.0); self.amplitudes.len()];
        let mut digits = vec![0usize; self.n];
        for (idx, amp) in self.amplitudes.iter().enumerate() {
            to_digits(idx, self.d, &mut digits);
            let row = subset.iter().fold(0, |acc, &s| acc * self.d + digits[s]);
            let col = complement.iter().fold(0, |acc, &s| acc * self.d + digits[s]);
            m[row * dim_c + col] = *amp;
        }
        m
    }

    /// Spectrum of `ρ_S = tr_{S^c} |ψ⟩⟨ψ|`.
    ///
    /// The smaller of `ρ_S` and `ρ_{S^c}` is diagonalized; their nonzero
    /// spectra coincide.
    pub fn reduced_spectrum(&self, subset: &[usize]) -> Result<Spectrum> {
        validate_subset(subset, self.n, false)?;
        let complement = complement_of(subset, self.n);
        let side = if complement.len() < subset.len() {
            complement
        } else {
            subset.to_vec()
        };
        let dim = self.d.pow(side.len() as u32);
        if dim > EIGEN_DIM_CAP {
            return Err(Error::input(format!(
                "reduced density matrix of dimension {dim} exceeds the eigensolver cap {EIGEN_DIM_CAP}"
            )));
        }
        let (rho, dim) = self.reduced_density_matrix(&side)?;
        let eigenvalues = hermitian_eigenvalues(rho, dim)?;
        Spectrum::from_raw(eigenvalues)
    }

    /// `|0…0⟩`.
    pub fn product(n: usize, d: usize) -> Result<Self> {
        let len = dimension(d, n)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); len];
        amps[0] = Complex64::new(1.0, 0.0);
        PureState::new(n, d, amps)
    }

    /// `sin θ |0…0⟩ + cos θ |1…1⟩` on qubits.
    pub fn ghz_theta(n: usize, theta: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::input("GHZ states need n >= 2"));
        }
        let len = dimension(2, n)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); len];
        amps[0] += Complex64::new(theta.sin(), 0.0);
        amps[len - 1] += Complex64::new(theta.cos(), 0.0);
        PureState::new(n, 2, amps)
    }

    /// The balanced GHZ state (θ = π/4).
    pub fn ghz(n: usize) -> Result<Self> {
        PureState::ghz_theta(n, FRAC_PI_4)
    }

    /// Dicke state: uniform superposition of all weight-`e` bitstrings,
    /// each with amplitude `binom(n, e)^{-1/2}`.
    pub fn dicke(n: usize, e: usize) -> Result<Self> {
        if n < 1 || e > n {
            return Err(Error::input(format!("Dicke state needs 0 <= e <= n, got n={n}, e={e}")));
        }
        let len = dimension(2, n)?;
        let count = binomial(n as u64, e as u64).to_f64();
        let amp = Complex64::new(1.0 / count.sqrt(), 0.0);
        let amps = (0..len)
            .map(|i| {
                if (i as u64).count_ones() as usize == e {
                    amp
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        PureState::new(n, 2, amps)
    }

    /// The W state, `D(n, 1)`.
    pub fn w(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::input("W states need n >= 2"));
        }
        PureState::dicke(n, 1)
    }

    /// Haar-random state from normalized iid complex Gaussians. Deterministic
    /// in `seed`.
    pub fn haar_random(n: usize, d: usize, seed: u64) -> Result<Self> {
        let len = dimension(d, n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps = (0..len)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re, im)
            })
            .collect();
        PureState::normalized(n, d, amps)
    }
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    n: usize,
    d: usize,
    amplitudes: Vec<[f64; 2]>,
}

/// `d^n`, checked against the statevector cap.
pub(crate) fn dimension(d: usize, n: usize) -> Result<usize> {
    u32::try_from(n)
        .ok()
        .and_then(|n| d.checked_pow(n))
        .filter(|&len| len <= MAX_AMPLITUDES)
        .ok_or_else(|| Error::input(format!("d^n = {d}^{n} is too large")))
}

pub(crate) fn to_digits(mut idx: usize, d: usize, digits: &mut [usize]) {
    for slot in digits.iter_mut().rev() {
        *slot = idx % d;
        idx /= d;
    }
}

/// Checks that `subset` is a nonempty set of distinct sites below `n`;
/// unless `allow_full`, it must also be a proper subset.
pub(crate) fn validate_subset(subset: &[usize], n: usize, allow_full: bool) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::input("subset must be nonempty"));
    }
    let mut seen = vec![false; n];
    for &s in subset {
        if s >= n {
            return Err(Error::input(format!("site {s} out of range for n={n}")));
        }
        if seen[s] {
            return Err(Error::input(format!("site {s} listed twice")));
        }
        seen[s] = true;
    }
    if !allow_full && subset.len() == n {
        return Err(Error::input("subset must be a proper subset of the sites"));
    }
    Ok(())
}

fn validate_permutation(order: &[usize], n: usize) -> Result<()> {
    if order.len() != n {
        return Err(Error::input("site permutation has the wrong length"));
    }
    validate_subset(order, n, true)
}

pub(crate) fn complement_of(subset: &[usize], n: usize) -> Vec<usize> {
    (0..n).filter(|s| !subset.contains(s)).collect()
}

/// Eigenvalues of a reduced state, descending, strictly positive, summing
/// to one.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
}

impl Spectrum {
    /// Cleans raw eigensolver output: drops values below [`PRUNE_TOL`],
    /// clamps to `[0, 1]`, renormalizes and sorts descending.
    pub fn from_raw(raw: Vec<f64>) -> Result<Self> {
        let total: f64 = raw.iter().sum();
        if raw.iter().any(|&x| !x.is_finite() || !(-1e-9..=1.0 + 1e-9).contains(&x))
            || (total - 1.0).abs() > NORM_TOL
        {
            return Err(Error::numerical(format!(
                "eigenvalues {raw:?} do not form a probability vector"
            )));
        }
        let mut kept: Vec<f64> = raw
            .into_iter()
            .filter(|&x| x >= PRUNE_TOL)
            .map(|x| x.clamp(0.0, 1.0))
            .collect();
        let kept_total: f64 = kept.iter().sum();
        if kept.is_empty() || (kept_total - 1.0).abs() > NORM_TOL {
            return Err(Error::numerical("pruned spectrum lost probability mass"));
        }
        for x in &mut kept {
            *x /= kept_total;
        }
        kept.sort_by(|a, b| b.total_cmp(a));
        Ok(Spectrum { eigenvalues: kept })
    }

    /// Spectrum from a caller-supplied probability vector (zeros allowed).
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|&x| !(0.0..=1.0 + NORM_TOL).contains(&x)) {
            return Err(Error::input(format!("eigenvalues {values:?} must lie in [0, 1]")));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > NORM_TOL {
            return Err(Error::input(format!("eigenvalues sum to {total}, not 1")));
        }
        Spectrum::from_raw(values)
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues[0]
    }

    /// Power sums `τ_l = Σ λ_i^l` for `l = 1..=k_max`.
    pub fn moments(&self, k_max: usize) -> MomentVector {
        let mut tau = vec![0.0; k_max];
        for &lambda in &self.eigenvalues {
            let mut p = 1.0;
            for t in tau.iter_mut() {
                p *= lambda;
                *t += p;
            }
        }
        MomentVector::exact(tau)
    }
}

/// Free-function form of [`Spectrum::moments`].
pub fn moments(spectrum: &Spectrum, k_max: usize) -> MomentVector {
    spectrum.moments(k_max)
}

/// State moments `τ_1..τ_{k_max}`. Entries may be missing (orders that were
/// not measured), and estimated vectors may leave `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentVector {
    tau: Vec<Option<f64>>,
    estimated: bool,
}

impl MomentVector {
    /// Exact moments; `values[0]` is `τ_1`.
    pub fn exact(values: Vec<f64>) -> Self {
        MomentVector {
            tau: values.into_iter().map(Some).collect(),
            estimated: false,
        }
    }

    /// Estimated moments; `values[0]` is `τ_1`.
    pub fn estimated(values: Vec<f64>) -> Self {
        MomentVector {
            tau: values.into_iter().map(Some).collect(),
            estimated: true,
        }
    }

    /// Moments with gaps: `entries[l - 1]` is `τ_l` if known.
    pub fn partial(entries: Vec<Option<f64>>, estimated: bool) -> Self {
        MomentVector {
            tau: entries,
            estimated,
        }
    }

    pub fn k_max(&self) -> usize {
        self.tau.len()
    }

    pub fn is_estimated(&self) -> bool {
        self.estimated
    }

    /// `τ_l`, or `None` if out of range or not available.
    pub fn get(&self, l: usize) -> Option<f64> {
        if l == 0 {
            return Some(1.0);
        }
        self.tau.get(l - 1).copied().flatten()
    }

    /// `τ_l`, or an input error naming the missing order.
    pub fn require(&self, l: usize) -> Result<f64> {
        self.get(l)
            .ok_or_else(|| Error::input(format!("moment τ_{l} is not available")))
    }

    /// All entries `τ_1..`, `None` for gaps.
    pub fn entries(&self) -> &[Option<f64>] {
        &self.tau
    }

    /// Entries clipped to `[0, 1]`.
    pub fn clipped(&self) -> MomentVector {
        MomentVector {
            tau: self.tau.iter().map(|t| t.map(|v| v.clamp(0.0, 1.0))).collect(),
            estimated: self.estimated,
        }
    }
}

/// Named state families with closed-form reduced spectra. Their reductions
/// depend only on the subsystem size.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum StateFamily {
    GhzTheta { n: usize, theta: f64 },
    W { n: usize },
    Dicke { n: usize, e: usize },
    Product { n: usize },
}

impl StateFamily {
    pub fn n(&self) -> usize {
        match *self {
            StateFamily::GhzTheta { n, .. }
            | StateFamily::W { n }
            | StateFamily::Dicke { n, .. }
            | StateFamily::Product { n } => n,
        }
    }

    /// Builds the amplitudes (qubits; product is `|0…0⟩`).
    pub fn build(&self) -> Result<PureState> {
        match *self {
            StateFamily::GhzTheta { n, theta } => PureState::ghz_theta(n, theta),
            StateFamily::W { n } => PureState::w(n),
            StateFamily::Dicke { n, e } => PureState::dicke(n, e),
            StateFamily::Product { n } => PureState::product(n, 2),
        }
    }

    /// Reduced spectrum for any subsystem of size `s`, without amplitudes.
    pub fn analytic_spectrum(&self, s: usize) -> Result<Spectrum> {
        let n = self.n();
        if s == 0 || s >= n {
            return Err(Error::input(format!("subsystem size must satisfy 1 <= s <= n-1, got s={s}, n={n}")));
        }
        match *self {
            StateFamily::GhzTheta { theta, .. } => {
                let sin2 = theta.sin().powi(2);
                Spectrum::new(vec![sin2, 1.0 - sin2])
            }
            StateFamily::W { n } => {
                if n < 2 {
                    return Err(Error::input("W states need n >= 2"));
                }
                Spectrum::new(vec![(n - s) as f64 / n as f64, s as f64 / n as f64])
            }
            StateFamily::Dicke { n, e } => {
                if e > n {
                    return Err(Error::input("Dicke state needs e <= n"));
                }
                let total = binomial(n as u64, e as u64).ln();
                let lo = (e + s).saturating_sub(n);
                let hi = s.min(e);
                let values = (lo..=hi)
                    .map(|l| {
                        let num = binomial(s as u64, l as u64).ln()
                            + binomial((n - s) as u64, (e - l) as u64).ln();
                        (num - total).exp()
                    })
                    .collect();
                Spectrum::new(values)
            }
            StateFamily::Product { .. } => Spectrum::new(vec![1.0]),
        }
    }
}

/// Free-function form of [`StateFamily::analytic_spectrum`].
pub fn analytic_spectrum(family: &StateFamily, s: usize) -> Result<Spectrum> {
    family.analytic_spectrum(s)
}
