//! Seedable random streams and the samplers the simulation draws from.
//!
//! Every random decision in a run flows from one master seed. Sub-streams are
//! derived by hashing `(parent seed, label...)`, so the stream an agent uses is
//! fixed by its id and purpose and does not depend on execution order.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};

use crate::error::{Error, Result};

const SUM_TOLERANCE: f64 = 1e-9;

/// A single-owner deterministic random stream.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives an independent child stream from this stream's seed and `label`.
    ///
    /// The child depends only on `(self.seed(), label)`, never on how many
    /// samples were already drawn from `self`.
    pub fn child(&self, label: &[u64]) -> RngStream {
        RngStream::new(derive_seed(self.seed, label))
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform draw in `(0, 1]`, safe to take the logarithm of.
    pub fn uniform_open0(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    pub fn below(&mut self, n: usize) -> usize {
        self.inner.random_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a seed with a label path into a new seed.
pub fn derive_seed(seed: u64, label: &[u64]) -> u64 {
    let mut h = splitmix64(seed);
    for &part in label {
        h = splitmix64(h ^ splitmix64(part.wrapping_add(0x632b_e59b_d9b4_e019)));
    }
    h
}

/// A discrete distribution: non-negative entries summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector(Vec<f64>);

impl ProbabilityVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("probability vector must not be empty"));
        }
        if entries.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::invalid("probability entries must be finite and non-negative"));
        }
        let sum: f64 = entries.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::invalid(format!("probability entries sum to {sum}, not 1")));
        }
        Ok(ProbabilityVector(entries))
    }

    /// Builds a distribution from log-weights, normalising with log-sum-exp.
    /// Returns the distribution together with the normalised log-probabilities.
    pub fn from_log_weights(log_weights: &[f64]) -> Result<(Self, Vec<f64>)> {
        let norm = log_sum_exp(log_weights.iter().copied());
        if !norm.is_finite() {
            return Err(Error::invalid("log-weights do not define a distribution"));
        }
        let logs: Vec<f64> = log_weights.iter().map(|w| w - norm).collect();
        let mut probs: Vec<f64> = logs.iter().map(|l| l.exp()).collect();
        // exp() rounding can leave the sum a few ulps off.
        let sum: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= sum);
        let pv = ProbabilityVector(probs);
        pv.debug_check();
        Ok((pv, logs))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    fn debug_check(&self) {
        debug_assert!(self.0.iter().all(|p| *p >= 0.0));
        debug_assert!((self.0.iter().sum::<f64>() - 1.0).abs() <= SUM_TOLERANCE);
    }
}

impl std::ops::Index<usize> for ProbabilityVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

pub fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY || max.is_nan() {
        return max;
    }
    if max == f64::INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Log of a Gamma(shape, 1) draw.
///
/// Small shapes produce values far below `f64::MIN_POSITIVE`, so the draw is
/// kept in log space using `G(a) = G(a + 1) * U^(1/a)`.
fn sample_log_gamma(rng: &mut RngStream, shape: f64) -> f64 {
    if shape >= 1.0 {
        let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
        return g.ln();
    }
    let g: f64 = Gamma::new(shape + 1.0, 1.0).expect("positive shape").sample(rng);
    g.ln() + rng.uniform_open0().ln() / shape
}

fn check_prior(prior: &[f64]) -> Result<()> {
    if prior.len() < 2 {
        return Err(Error::invalid(format!(
            "Dirichlet prior needs at least 2 entries, got {}",
            prior.len()
        )));
    }
    if let Some(bad) = prior.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return Err(Error::invalid(format!(
            "Dirichlet prior entries must be positive, got {bad}"
        )));
    }
    Ok(())
}

/// Draws from Dirichlet(prior), returning the distribution and its log-probabilities.
///
/// The log-probabilities stay finite even where the linear entries underflow to zero.
pub fn sample_dirichlet_with_logs(rng: &mut RngStream, prior: &[f64]) -> Result<(ProbabilityVector, Vec<f64>)> {
    check_prior(prior)?;
    let log_gammas: Vec<f64> = prior.iter().map(|&a| sample_log_gamma(rng, a)).collect();
    ProbabilityVector::from_log_weights(&log_gammas)
}

pub fn sample_dirichlet(rng: &mut RngStream, prior: &[f64]) -> Result<ProbabilityVector> {
    sample_dirichlet_with_logs(rng, prior).map(|(pv, _)| pv)
}

/// Index `i` with probability `probs[i]`, by linear scan.
pub fn sample_categorical(rng: &mut RngStream, probs: &ProbabilityVector) -> usize {
    let u = rng.uniform();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.as_slice().iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Cumulative table for repeated categorical draws in `O(log n)`.
#[derive(Debug, Clone)]
pub struct CategoricalTable {
    cumulative: Vec<f64>,
}

impl CategoricalTable {
    pub fn new(probs: &ProbabilityVector) -> Self {
        let mut acc = 0.0;
        let cumulative = probs
            .as_slice()
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        CategoricalTable { cumulative }
    }

    pub fn sample(&self, rng: &mut RngStream) -> usize {
        let total = *self.cumulative.last().expect("non-empty table");
        let u = rng.uniform() * total;
        // First index whose cumulative mass exceeds u; zero-mass entries never qualify.
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.cumulative.len() - 1)
    }
}

/// Per-agent verbosity: a half-normal (chi with one degree of freedom)
/// rescaled so its mean is `mean_rate`.
pub fn sample_verbosity(rng: &mut RngStream, mean_rate: f64) -> Result<f64> {
    if !(mean_rate.is_finite() && mean_rate > 0.0) {
        return Err(Error::invalid(format!("mean rate must be positive, got {mean_rate}")));
    }
    // E|Z| = sqrt(2/pi)
    let scale = mean_rate * (std::f64::consts::PI / 2.0).sqrt();
    loop {
        let z: f64 = StandardNormal.sample(rng);
        let v = z.abs() * scale;
        if v > 0.0 {
            return Ok(v);
        }
    }
}

/// How the number of messages per iteration is drawn from an agent's rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CountMode {
    #[default]
    Poisson,
    DiscretizedLaplace,
}

impl CountMode {
    pub fn as_str(self) -> &'static str {
        match self {
            CountMode::Poisson => "poisson",
            CountMode::DiscretizedLaplace => "discretized-laplace",
        }
    }
}

impl std::str::FromStr for CountMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson" => Ok(CountMode::Poisson),
            "discretized-laplace" => Ok(CountMode::DiscretizedLaplace),
            other => Err(Error::invalid(format!("unknown count mode {other:?}"))),
        }
    }
}

pub fn sample_message_count(rng: &mut RngStream, rate: f64, mode: CountMode) -> Result<u64> {
    if !(rate.is_finite() && rate > 0.0) {
        return Err(Error::invalid(format!("message rate must be positive, got {rate}")));
    }
    let count = match mode {
        CountMode::Poisson => {
            let draw: f64 = Poisson::new(rate)
                .map_err(|e| Error::invalid(format!("poisson rate {rate}: {e}")))?
                .sample(rng);
            draw as u64
        }
        CountMode::DiscretizedLaplace => {
            let x = sample_laplace(rng, rate, rate / 2.0);
            x.round().max(0.0) as u64
        }
    };
    Ok(count)
}

fn sample_laplace(rng: &mut RngStream, location: f64, scale: f64) -> f64 {
    let u = rng.uniform() - 0.5;
    // u == -0.5 would give ln(0)
    let tail = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
    location - scale * u.signum() * tail.ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = RngStream::new(7);
        let mut b = RngStream::new(7);
        let xs: Vec<u64> = (0..32).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..32).map(|_| b.next_u64()).collect();
        assert_eq!(xs, ys);
    }

    #[test]
    fn child_streams_depend_on_label_not_position() {
        let mut parent = RngStream::new(11);
        let before = parent.child(&[1, 2]);
        parent.next_u64();
        let after = parent.child(&[1, 2]);
        assert_eq!(before.seed(), after.seed());
        assert_ne!(parent.child(&[1, 2]).seed(), parent.child(&[2, 1]).seed());
        assert_ne!(parent.child(&[1]).seed(), parent.child(&[1, 0]).seed());
    }

    #[test]
    fn dirichlet_concentration_limit() {
        let mut rng = RngStream::new(1);
        let pv = sample_dirichlet(&mut rng, &[1e9, 1e9]).unwrap();
        assert!((pv[0] - 0.5).abs() < 1e-3);
        assert!((pv[1] - 0.5).abs() < 1e-3);
    }

    #[test]
    fn dirichlet_rejects_degenerate_priors() {
        let mut rng = RngStream::new(1);
        assert!(matches!(
            sample_dirichlet(&mut rng, &[1.0]),
            Err(Error::InvalidParameter(_))
        ));
        assert!(sample_dirichlet(&mut rng, &[]).is_err());
        assert!(sample_dirichlet(&mut rng, &[1.0, 0.0]).is_err());
        assert!(sample_dirichlet(&mut rng, &[1.0, -2.0]).is_err());
    }

    #[test]
    fn dirichlet_sparse_prior_concentrates_mass() {
        // Monte Carlo regression: mean largest entry for symmetric 0.01 over 100
        // measured at 0.62815 with this seed (Poisson-Dirichlet(1) limit is 0.6243).
        let mut rng = RngStream::new(2024);
        let prior = vec![0.01; 100];
        let draws = 10_000;
        let mean_max: f64 = (0..draws)
            .map(|_| {
                let pv = sample_dirichlet(&mut rng, &prior).unwrap();
                pv.as_slice().iter().copied().fold(0.0, f64::max)
            })
            .sum::<f64>()
            / draws as f64;
        assert!(mean_max > 0.5, "mean max entry {mean_max}");
        assert!((mean_max - 0.628154).abs() < 1e-6, "mean max entry {mean_max}");
    }

    #[test]
    fn tiny_prior_never_produces_an_empty_vector() {
        let mut rng = RngStream::new(5);
        for _ in 0..200 {
            let (pv, logs) = sample_dirichlet_with_logs(&mut rng, &[1e-4, 1e-4]).unwrap();
            assert!((pv.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(logs.iter().all(|l| l.is_finite()));
        }
    }

    #[test]
    fn categorical_degenerate() {
        let mut rng = RngStream::new(3);
        let pv = ProbabilityVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        let table = CategoricalTable::new(&pv);
        for _ in 0..1000 {
            assert_eq!(sample_categorical(&mut rng, &pv), 0);
            assert_eq!(table.sample(&mut rng), 0);
        }
        let pv = ProbabilityVector::new(vec![0.0, 0.0, 1.0]).unwrap();
        let table = CategoricalTable::new(&pv);
        for _ in 0..1000 {
            assert_eq!(sample_categorical(&mut rng, &pv), 2);
            assert_eq!(table.sample(&mut rng), 2);
        }
    }

    #[test]
    fn categorical_fair_coin() {
        let mut rng = RngStream::new(4);
        let pv = ProbabilityVector::new(vec![0.5, 0.5]).unwrap();
        let n = 100_000;
        let zeros = (0..n).filter(|_| sample_categorical(&mut rng, &pv) == 0).count();
        let freq = zeros as f64 / n as f64;
        assert!((0.49..=0.51).contains(&freq), "{freq}");
    }

    #[test]
    fn verbosity_rejects_non_positive_rate() {
        let mut rng = RngStream::new(0);
        assert!(sample_verbosity(&mut rng, 0.0).is_err());
        assert!(sample_verbosity(&mut rng, -1.0).is_err());
        for _ in 0..10_000 {
            assert!(sample_verbosity(&mut rng, 1.0).unwrap() > 0.0);
        }
    }

    #[test]
    fn count_mode_parsing() {
        assert_eq!("poisson".parse::<CountMode>().unwrap(), CountMode::Poisson);
        assert_eq!(
            "discretized-laplace".parse::<CountMode>().unwrap(),
            CountMode::DiscretizedLaplace
        );
        assert!(matches!(
            "laplace".parse::<CountMode>(),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn vanishing_rate_gives_zero_messages() {
        let mut rng = RngStream::new(9);
        let nonzero = (0..10_000)
            .filter(|_| sample_message_count(&mut rng, 1e-4, CountMode::Poisson).unwrap() > 0)
            .count();
        assert!(nonzero < 10, "{nonzero}");
        assert!(sample_message_count(&mut rng, 0.0, CountMode::Poisson).is_err());
    }
}
