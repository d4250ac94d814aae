//! Near-Clifford training circuits.
//!
//! A training circuit keeps `N` of the non-Clifford rotations of the circuit
//! of interest and replaces every other one by a quarter-turn rotation of the
//! same axis. A Markov chain over such circuits, biased by a likelihood on
//! their expectation values, supplies the training set.

use std::cell::RefCell;
use std::collections::HashMap;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{clifford_substitution_weights, Angle, Circuit, DistanceNorm, Observable};
use crate::error::{CdrError, Result};
use crate::regression::TrainingSample;
use crate::sim_exact::{exact_terms, ExactBackend, SimLimits, StateSpec};
use crate::sim_noisy::{noisy_terms, sample_terms, NoiseModel, NoisyBackend, ShotSpec};
use crate::{par, rng};

/// A point of the chain: which non-Clifford sites are kept, and the power
/// `n` of `RZ(nπ/2)` (or `RX(nπ/2)`) at every replaced site.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NearCliffordState {
    pub kept: Vec<bool>,
    pub powers: Vec<u8>,
}

impl NearCliffordState {
    pub fn non_clifford_count(&self) -> usize {
        self.kept.iter().filter(|&&k| k).count()
    }
}

/// The circuit of interest together with its non-Clifford sites and the
/// substitution probabilities of every site.
#[derive(Debug, Clone)]
pub struct Projector {
    base: Circuit,
    sites: Vec<usize>,
    probabilities: Vec<[f64; 4]>,
}

impl Projector {
    pub fn new(base: &Circuit, sigma: f64, norm: DistanceNorm) -> Result<Self> {
        let sites = base.non_clifford_sites();
        let probabilities = sites
            .iter()
            .map(|&i| {
                let angle = base.gates()[i].angle().expect("non-Clifford sites are rotations");
                clifford_substitution_weights(angle, sigma, norm).map(|w| w.probabilities)
            })
            .collect::<Result<_>>()?;
        Ok(Projector {
            base: base.clone(),
            sites,
            probabilities,
        })
    }

    pub fn base(&self) -> &Circuit {
        &self.base
    }

    /// Gate indices of the non-Clifford rotations of the base circuit.
    pub fn sites(&self) -> &[usize] {
        &self.sites
    }

    pub fn site_probabilities(&self, site: usize) -> [f64; 4] {
        self.probabilities[site]
    }

    fn draw_power(&self, site: usize, rng: &mut ChaCha8Rng) -> u8 {
        let u: f64 = rng.random();
        let p = &self.probabilities[site];
        let mut acc = 0.0;
        for (n, &pn) in p.iter().enumerate() {
            acc += pn;
            if u < acc {
                return n as u8;
            }
        }
        // rounding: return the last power with nonzero probability
        (0..4).rev().find(|&n| p[n] > 0.0).unwrap_or(0) as u8
    }

    pub fn realize(&self, state: &NearCliffordState) -> Circuit {
        let mut c = self.base.clone();
        for (s, &gate) in self.sites.iter().enumerate() {
            if !state.kept[s] {
                c.set_angle(gate, Angle::quarter_turns(state.powers[s]));
            }
        }
        c
    }

    /// Angles of all non-Clifford sites in the realized circuit.
    pub fn angle_vector(&self, state: &NearCliffordState) -> Vec<f64> {
        self.sites
            .iter()
            .enumerate()
            .map(|(s, &gate)| {
                if state.kept[s] {
                    self.base.gates()[gate].angle().expect("rotation").radians()
                } else {
                    Angle::quarter_turns(state.powers[s]).radians()
                }
            })
            .collect()
    }

    /// Keep `n` uniformly chosen sites and draw powers for the others.
    pub fn random_projection(&self, n: usize, rng: &mut ChaCha8Rng) -> Result<NearCliffordState> {
        let total = self.sites.len();
        if n > total {
            return Err(CdrError::Invalid(format!(
                "circuit has {total} non-Clifford rotations, cannot keep {n}"
            )));
        }
        let mut kept = vec![false; total];
        for i in sample(rng, total, n) {
            kept[i] = true;
        }
        let powers = (0..total)
            .map(|s| if kept[s] { 0 } else { self.draw_power(s, rng) })
            .collect();
        Ok(NearCliffordState { kept, powers })
    }

    /// Number of pairs swapped per move.
    pub fn pair_count(&self, state: &NearCliffordState, n_p: usize) -> usize {
        let n = state.non_clifford_count();
        n_p.min(n).min(self.sites.len() - n)
    }

    /// Propose a move: `k` kept sites are replaced and `k` replaced sites are
    /// restored. Returns the proposal and `ln q(old|new) − ln q(new|old)`.
    pub fn propose(&self, state: &NearCliffordState, n_p: usize, rng: &mut ChaCha8Rng) -> (NearCliffordState, f64) {
        let k = self.pair_count(state, n_p);
        let kept: Vec<usize> = (0..self.sites.len()).filter(|&s| state.kept[s]).collect();
        let replaced: Vec<usize> = (0..self.sites.len()).filter(|&s| !state.kept[s]).collect();
        let mut next = state.clone();
        let mut log_ratio = 0.0;
        for i in sample(rng, replaced.len(), k) {
            let s = replaced[i];
            next.kept[s] = true;
            log_ratio += self.probabilities[s][state.powers[s] as usize].ln();
            next.powers[s] = 0;
        }
        for i in sample(rng, kept.len(), k) {
            let s = kept[i];
            next.kept[s] = false;
            let n = self.draw_power(s, rng);
            next.powers[s] = n;
            log_ratio -= self.probabilities[s][n as usize].ln();
        }
        (next, log_ratio)
    }
}

/// Which simulator a likelihood reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Exact,
    Noisy,
}

/// Chain likelihood `L(X)` of a candidate's expectation value `X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Likelihood {
    /// `exp(−(X − x0)²/σ²)` on exact values.
    GaussianTarget { x0: f64, sigma: f64 },
    /// `exp(−X/σ′)` on exact values.
    MonotoneExp { sigma: f64 },
    /// `exp(−(X − X_ψ)²/σ²)` on noisy values, `X_ψ` being the noisy value of
    /// the circuit of interest. When `target` is absent it is measured first.
    NoisyProximity {
        sigma: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<f64>,
    },
    /// Constant likelihood.
    Uniform,
}

impl Default for Likelihood {
    fn default() -> Self {
        Likelihood::GaussianTarget { x0: -2.1, sigma: 0.05 }
    }
}

impl Likelihood {
    pub fn source(&self) -> Source {
        match self {
            Likelihood::NoisyProximity { .. } => Source::Noisy,
            _ => Source::Exact,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sigma = match *self {
            Likelihood::GaussianTarget { sigma, .. }
            | Likelihood::MonotoneExp { sigma }
            | Likelihood::NoisyProximity { sigma, .. } => sigma,
            Likelihood::Uniform => return Ok(()),
        };
        if sigma > 0.0 && sigma.is_finite() {
            Ok(())
        } else {
            Err(CdrError::Invalid(format!("likelihood width must be positive, got {sigma}")))
        }
    }

    pub fn ln_value(&self, x: f64) -> f64 {
        match *self {
            Likelihood::GaussianTarget { x0, sigma } => -((x - x0) / sigma).powi(2),
            Likelihood::MonotoneExp { sigma } => -x / sigma,
            Likelihood::NoisyProximity { sigma, target } => {
                -((x - target.expect("proximity target resolved before use")) / sigma).powi(2)
            }
            Likelihood::Uniform => 0.0,
        }
    }

    /// Whether `x` is within two widths of the target (no burn-in needed).
    fn near_target(&self, x: f64) -> bool {
        match *self {
            Likelihood::GaussianTarget { x0, sigma } => (x - x0).abs() <= 2.0 * sigma,
            Likelihood::NoisyProximity { sigma, target } => target.is_some_and(|t| (x - t).abs() <= 2.0 * sigma),
            Likelihood::MonotoneExp { .. } => false,
            Likelihood::Uniform => true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BurnIn {
    /// No burn-in when the initial value is within two likelihood widths of
    /// the target, otherwise `70·ξ` elements.
    #[default]
    Auto,
    #[serde(untagged)]
    Fixed(usize),
}

/// Chain parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainConfig {
    /// Number of non-Clifford rotations kept in every training circuit.
    #[serde(rename = "N")]
    pub n_non_clifford: usize,
    pub n_p: usize,
    pub sigma: f64,
    pub distance_norm: DistanceNorm,
    pub likelihood: Likelihood,
    /// Multiplier applied to the observable before the likelihood (e.g. `1/Q`
    /// for energy per qubit).
    pub x_scale: f64,
    /// Initial chain length; the chain grows when thinning needs more elements.
    pub chain_length: usize,
    pub max_chain_length: usize,
    pub burn_in: BurnIn,
    pub training_count: usize,
    pub n_init: usize,
    pub naive_metropolis: bool,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig {
            n_non_clifford: 10,
            n_p: 5,
            sigma: 0.5,
            distance_norm: DistanceNorm::default(),
            likelihood: Likelihood::default(),
            x_scale: 1.0,
            chain_length: 2000,
            max_chain_length: 200_000,
            burn_in: BurnIn::Auto,
            training_count: 70,
            n_init: 200,
            naive_metropolis: false,
            seed: 0,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_p == 0 {
            return Err(CdrError::Invalid("n_p must be at least 1".into()));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(CdrError::Invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.training_count < 2 {
            return Err(CdrError::Invalid("training_count must be at least 2".into()));
        }
        if self.n_init == 0 || self.chain_length == 0 {
            return Err(CdrError::Invalid("n_init and chain_length must be positive".into()));
        }
        if !self.x_scale.is_finite() || self.x_scale == 0.0 {
            return Err(CdrError::Invalid("x_scale must be finite and nonzero".into()));
        }
        self.likelihood.validate()
    }
}

/// Simulators used to evaluate candidate circuits.
#[derive(Debug, Clone)]
pub struct Simulators {
    pub observable: Observable,
    pub init: StateSpec,
    pub noise: NoiseModel,
    pub exact_backend: ExactBackend,
    pub noisy_backend: NoisyBackend,
    pub limits: SimLimits,
    /// Finite-shot readout of noisy values; `None` gives exact noisy expectations.
    pub shots: Option<ShotSpec>,
}

impl Simulators {
    pub fn new(observable: Observable, init: StateSpec, noise: NoiseModel) -> Self {
        Simulators {
            observable,
            init,
            noise,
            exact_backend: ExactBackend::default(),
            noisy_backend: NoisyBackend::default(),
            limits: SimLimits::default(),
            shots: None,
        }
    }

    pub fn exact_terms(&self, c: &Circuit) -> Result<Vec<f64>> {
        exact_terms(c, &self.observable, &self.init, self.exact_backend, &self.limits)
    }

    /// Noisy per-term values including shot noise; `seed` fixes both the
    /// trajectory sampling and the readout.
    pub fn noisy_terms(&self, c: &Circuit, seed: u64) -> Result<Vec<f64>> {
        let values = self.noisy_expectations(c, seed)?;
        self.readout(&values, seed)
    }

    /// Noisy per-term expectation values before finite-shot readout.
    pub fn noisy_expectations(&self, c: &Circuit, seed: u64) -> Result<Vec<f64>> {
        self.noise.validate()?;
        if self.noise.is_noiseless() {
            return self.exact_terms(c);
        }
        noisy_terms(
            c,
            &self.observable,
            &self.init,
            &self.noise,
            self.noisy_backend,
            &self.limits,
            rng::derive(seed, 0),
        )
    }

    /// Applies the shot readout to noisy expectation values.
    pub fn readout(&self, values: &[f64], seed: u64) -> Result<Vec<f64>> {
        match self.shots {
            Some(spec) => {
                let per_term = spec.per_term(self.observable.len())?;
                sample_terms(&self.observable, values, per_term, rng::derive(seed, 1))
            }
            None => Ok(values.to_vec()),
        }
    }

    /// Whether pre-readout values of a circuit are a pure function of the circuit.
    fn deterministic(&self, source: Source) -> bool {
        source == Source::Exact
            || self.noise.is_noiseless()
            || matches!(self.noisy_backend, NoisyBackend::DensityMatrix)
    }

    fn terms(&self, source: Source, c: &Circuit, seed: u64) -> Result<Vec<f64>> {
        match source {
            Source::Exact => self.exact_terms(c),
            Source::Noisy => self.noisy_terms(c, seed),
        }
    }
}

/// One Metropolis–Hastings step. `ln_l` evaluates the log-likelihood of a
/// candidate. Returns the next state, its log-likelihood and whether the
/// proposal was accepted.
pub fn mcmc_step<F>(
    projector: &Projector,
    state: &NearCliffordState,
    ln_l_state: f64,
    cfg: &ChainConfig,
    rng: &mut ChaCha8Rng,
    mut ln_l: F,
) -> Result<(NearCliffordState, f64, bool)>
where
    F: FnMut(&NearCliffordState) -> Result<f64>,
{
    if projector.pair_count(state, cfg.n_p) == 0 {
        return Ok((state.clone(), ln_l_state, false));
    }
    let (candidate, log_q_ratio) = projector.propose(state, cfg.n_p, rng);
    let ln_l_new = ln_l(&candidate)?;
    let mut log_a = ln_l_new - ln_l_state;
    if !cfg.naive_metropolis {
        log_a += log_q_ratio;
    }
    let u: f64 = rng.random();
    if log_a >= 0.0 || u < log_a.exp() {
        Ok((candidate, ln_l_new, true))
    } else {
        Ok((state.clone(), ln_l_state, false))
    }
}

/// Normalized autocovariance `Σ_i δv_i·δv_{i+lag} / Σ_i |δv_i|²` of the angle
/// vectors from index `i0` on, for lags `1..=max_lag` (capped below half the tail length).
pub fn autocorrelation(chain: &[Vec<f64>], i0: usize, max_lag: usize) -> Result<Vec<f64>> {
    let tail = chain.get(i0..).unwrap_or(&[]);
    let m = tail.len();
    if m < 3 {
        return Err(CdrError::Chain(format!("chain of {m} elements after burn-in is too short")));
    }
    let dim = tail[0].len();
    let mut mean = vec![0.0; dim];
    for v in tail {
        for (a, x) in mean.iter_mut().zip(v) {
            *a += x;
        }
    }
    mean.iter_mut().for_each(|a| *a /= m as f64);
    let centered: Vec<Vec<f64>> = tail
        .iter()
        .map(|v| v.iter().zip(&mean).map(|(x, a)| x - a).collect())
        .collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let denom: f64 = centered.iter().map(|v| dot(v, v)).sum();
    if denom <= 0.0 {
        return Err(CdrError::Chain(
            "chain elements are all identical; autocorrelation is undefined".into(),
        ));
    }
    Ok((1..=max_lag.min(m / 2 - 1))
        .map(|lag| (0..m - lag).map(|i| dot(&centered[i], &centered[i + lag])).sum::<f64>() / denom)
        .collect())
}

/// Smallest lag at which the normalized autocovariance of the angle vectors
/// (from index `i0` on) drops to 1/10.
pub fn autocorrelation_length(chain: &[Vec<f64>], i0: usize) -> Result<usize> {
    let m = chain.len().saturating_sub(i0);
    let ratios = autocorrelation(chain, i0, m / 2)?;
    if let Some(lag) = ratios.iter().position(|r| *r <= 0.1) {
        return Ok(lag + 1);
    }
    let smallest = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Err(CdrError::Chain(format!(
        "autocorrelation never fell to 0.1 within {} lags (smallest ratio {smallest:.3})",
        ratios.len()
    )))
}

/// Best of `cfg.n_init` random projections under the chain likelihood.
/// Returns the state, its log-likelihood and its candidate index; ties go to
/// the earliest candidate.
pub fn initial_projection<F>(
    projector: &Projector,
    cfg: &ChainConfig,
    rng: &mut ChaCha8Rng,
    mut ln_l: F,
) -> Result<(NearCliffordState, f64, usize)>
where
    F: FnMut(usize, &NearCliffordState) -> Result<f64>,
{
    let mut best: Option<(NearCliffordState, f64, usize)> = None;
    for j in 0..cfg.n_init {
        let s = projector.random_projection(cfg.n_non_clifford, rng)?;
        let l = ln_l(j, &s)?;
        if best.as_ref().is_none_or(|(_, b, _)| l > *b) {
            best = Some((s, l, j));
        }
    }
    Ok(best.expect("n_init ≥ 1"))
}

/// A selected training circuit with its per-term values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingCircuit {
    pub chain_index: usize,
    pub state: NearCliffordState,
    pub x_noisy: Vec<f64>,
    pub x_exact: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub xi_mcmc: usize,
    pub i0: usize,
    pub seed: u64,
    pub acceptance_rate: f64,
    pub chain_length: usize,
    pub selected: Vec<usize>,
    #[serde(rename = "N")]
    pub n_non_clifford: usize,
    pub n_p: usize,
    pub sigma: f64,
    pub naive_metropolis: bool,
    pub likelihood: Likelihood,
    /// Set when the chain cannot move (`N` is 0 or the full count); `ξ` is then 1.
    pub immobile: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSet {
    pub samples: Vec<TrainingCircuit>,
    pub provenance: Provenance,
}

impl TrainingSet {
    /// Training pairs for observable term `k`.
    pub fn term_samples(&self, k: usize) -> Vec<TrainingSample> {
        self.samples
            .iter()
            .map(|s| TrainingSample::new(s.x_noisy[k], s.x_exact[k]))
            .collect()
    }

    /// Training pairs for the whole observable.
    pub fn observable_samples(&self, obs: &Observable) -> Vec<TrainingSample> {
        self.samples
            .iter()
            .map(|s| TrainingSample::new(obs.combine(&s.x_noisy), obs.combine(&s.x_exact)))
            .collect()
    }

    /// CSV with columns `chain_index,term_id,x_noisy,x_exact`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("chain_index,term_id,x_noisy,x_exact\n");
        for s in &self.samples {
            for (k, (n, e)) in s.x_noisy.iter().zip(&s.x_exact).enumerate() {
                out.push_str(&format!("{},{k},{n:?},{e:?}\n", s.chain_index));
            }
        }
        out
    }

    pub fn provenance_json(&self) -> String {
        serde_json::to_string_pretty(&self.provenance).expect("provenance serializes")
    }
}

const INIT_STREAM: u64 = 1;
const CHAIN_STREAM: u64 = 2;
const PROPOSAL_EVAL: u64 = 3;
const TARGET_EVAL: u64 = 4;
const SAMPLE_EVAL: u64 = 5;

struct Chain {
    states: Vec<NearCliffordState>,
    /// Term values from the likelihood source, one per element.
    values: Vec<Vec<f64>>,
    accepted: usize,
    steps: usize,
}

/// Run the chain, thin it at spacing `ξ` from `i0`, and evaluate exact and
/// noisy values of every selected circuit.
pub fn build_training_set(base: &Circuit, cfg: &ChainConfig, sims: &Simulators) -> Result<TrainingSet> {
    cfg.validate()?;
    sims.observable.check_width(base.num_qubits())?;
    let projector = Projector::new(base, cfg.sigma, cfg.distance_norm)?;
    if cfg.n_non_clifford > projector.sites().len() {
        return Err(CdrError::Invalid(format!(
            "circuit has {} non-Clifford rotations, cannot keep N = {}",
            projector.sites().len(),
            cfg.n_non_clifford
        )));
    }
    let mut likelihood = cfg.likelihood;
    if let Likelihood::NoisyProximity { sigma, target: None } = likelihood {
        let x = sims.observable.combine(&sims.noisy_terms(base, rng::derive(cfg.seed, TARGET_EVAL))?);
        likelihood = Likelihood::NoisyProximity {
            sigma,
            target: Some(x * cfg.x_scale),
        };
    }
    let source = likelihood.source();
    // chains revisit circuits often; deterministic values are simulated once
    let cache: RefCell<HashMap<NearCliffordState, Vec<f64>>> = RefCell::new(HashMap::new());
    let cacheable = sims.deterministic(source);
    let evaluate = |label: u64, index: usize, s: &NearCliffordState| -> Result<(Vec<f64>, f64)> {
        let seed = rng::derive_path(cfg.seed, &[label, index as u64]);
        let terms = if cacheable {
            let cached = cache.borrow().get(s).cloned();
            let values = match cached {
                Some(v) => v,
                None => {
                    let c = projector.realize(s);
                    let v = match source {
                        Source::Exact => sims.exact_terms(&c)?,
                        Source::Noisy => sims.noisy_expectations(&c, seed)?,
                    };
                    cache.borrow_mut().insert(s.clone(), v.clone());
                    v
                }
            };
            match source {
                Source::Exact => values,
                Source::Noisy => sims.readout(&values, seed)?,
            }
        } else {
            sims.terms(source, &projector.realize(s), seed)?
        };
        let x = sims.observable.combine(&terms) * cfg.x_scale;
        Ok((terms, likelihood.ln_value(x)))
    };

    let mut init_rng = rng::stream(rng::derive(cfg.seed, INIT_STREAM));
    let mut init_values = Vec::new();
    let (start, ln_start, start_index) = initial_projection(&projector, cfg, &mut init_rng, |j, s| {
        let (terms, l) = evaluate(INIT_STREAM, j, s)?;
        init_values.push(terms);
        Ok(l)
    })?;
    let start_values = init_values.swap_remove(start_index);
    let x_start = sims.observable.combine(&start_values) * cfg.x_scale;

    let mut chain = Chain {
        states: vec![start],
        values: vec![start_values],
        accepted: 0,
        steps: 0,
    };
    let mut chain_rng = rng::stream(rng::derive(cfg.seed, CHAIN_STREAM));
    let mut ln_current = ln_start;
    let mut extend = |chain: &mut Chain, target_len: usize, ln_current: &mut f64| -> Result<()> {
        while chain.states.len() < target_len {
            let index = chain.states.len();
            let current = chain.states.last().expect("non-empty chain").clone();
            let mut proposal_values = None;
            let (next, ln_next, accepted) = mcmc_step(&projector, &current, *ln_current, cfg, &mut chain_rng, |cand| {
                let (terms, l) = evaluate(PROPOSAL_EVAL, index, cand)?;
                proposal_values = Some(terms);
                Ok(l)
            })?;
            chain.steps += 1;
            let values = if accepted {
                chain.accepted += 1;
                proposal_values.expect("accepted proposals were evaluated")
            } else {
                chain.values.last().expect("non-empty chain").clone()
            };
            chain.states.push(next);
            chain.values.push(values);
            *ln_current = ln_next;
        }
        Ok(())
    };

    let immobile = projector.pair_count(&chain.states[0], cfg.n_p) == 0;
    let count = cfg.training_count;
    let (xi, i0) = if immobile {
        (1, 0)
    } else {
        let mut length = cfg.chain_length.max(2 * count);
        loop {
            extend(&mut chain, length, &mut ln_current)?;
            let angles: Vec<Vec<f64>> = chain.states.iter().map(|s| projector.angle_vector(s)).collect();
            match autocorrelation_length(&angles, 0) {
                Ok(xi) => {
                    let i0 = match cfg.burn_in {
                        BurnIn::Fixed(i) => i,
                        BurnIn::Auto if likelihood.near_target(x_start) => 0,
                        BurnIn::Auto => 70 * xi,
                    };
                    break (xi, i0);
                }
                Err(e @ CdrError::Chain(_)) if length >= cfg.max_chain_length => return Err(e),
                Err(CdrError::Chain(_)) => length = (2 * length).min(cfg.max_chain_length),
                Err(e) => return Err(e),
            }
        }
    };
    let needed = i0 + (count - 1) * xi + 1;
    if needed > cfg.max_chain_length.max(cfg.chain_length) {
        return Err(CdrError::Chain(format!(
            "thinning needs {needed} chain elements (ξ = {xi}, i0 = {i0}), above max_chain_length {}",
            cfg.max_chain_length
        )));
    }
    if immobile {
        chain.states.resize(needed, chain.states[0].clone());
        chain.values.resize(needed, chain.values[0].clone());
    } else {
        extend(&mut chain, needed, &mut ln_current)?;
    }

    let selected: Vec<usize> = (0..count).map(|k| i0 + k * xi).collect();
    let samples = par::try_map_indices(count, |k| {
        let index = selected[k];
        let state = chain.states[index].clone();
        let circuit = projector.realize(&state);
        let cached = chain.values[index].clone();
        let (x_noisy, x_exact) = match source {
            Source::Noisy => (cached, sims.exact_terms(&circuit)?),
            Source::Exact => (
                sims.noisy_terms(&circuit, rng::derive_path(cfg.seed, &[SAMPLE_EVAL, index as u64]))?,
                cached,
            ),
        };
        Ok::<_, CdrError>(TrainingCircuit {
            chain_index: index,
            state,
            x_noisy,
            x_exact,
        })
    })?;

    Ok(TrainingSet {
        samples,
        provenance: Provenance {
            xi_mcmc: xi,
            i0,
            seed: cfg.seed,
            acceptance_rate: if chain.steps == 0 {
                0.0
            } else {
                chain.accepted as f64 / chain.steps as f64
            },
            chain_length: chain.states.len(),
            selected,
            n_non_clifford: cfg.n_non_clifford,
            n_p: cfg.n_p,
            sigma: cfg.sigma,
            naive_metropolis: cfg.naive_metropolis,
            likelihood,
            immobile,
        },
    })
}
