//! Proof-chain estimates and upper bounds on the expected maximum of posterior means.
//!
//! The chain compares, on paired draws, the maximum of the true posterior means
//! `Z_k` with three surrogates: `Z^ind` (each set averages its own independent
//! copies), `Z^iid` (every set averages a fresh block of the smallest cylinder
//! size) and `Z^N` (Gaussians with the variance of that block mean).

use rand::Rng as _;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::model::{disclosure_count_f64, CovariateVector, Disclosure, DisclosureSet, ModelShape, TypeFunction};
use crate::montecarlo::{derive_seed, replicate, replication_rng, tags, try_replicate, Estimate, Rng};
use crate::numeric::{binomial_u128, mean_and_variance};
use crate::priors::{BaseDist, PriorSpec};
use crate::scan::{cylinder_mean, ScanPlan, DEFAULT_BUDGET};

/// De-meaned expected maxima along the comparison chain, from one set of draws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChainEstimates {
    pub v_n: Estimate,
    pub v_ind: Estimate,
    pub v_iid: Estimate,
    pub v_normal: Estimate,
    /// Paired differences `v_ind - v_n`, `v_iid - v_ind`, `v_iid - v_normal`.
    pub ind_minus_n: Estimate,
    pub iid_minus_ind: Estimate,
    pub iid_minus_normal: Estimate,
    pub mu: f64,
    pub var_y: f64,
    pub disclosure_sets: f64,
    /// Smallest cylinder size `2^(n - s - h_n)`.
    pub block: u64,
}

/// Law of the sum of `m` i.i.d. two-point draws, tabulated for quantile coupling.
struct BinomialTable {
    cdf: Vec<f64>,
}

impl BinomialTable {
    const MAX_TRIALS: u64 = 1 << 20;

    fn new(m: u64, p: f64) -> Option<Self> {
        if m > Self::MAX_TRIALS {
            return None;
        }
        let (lp, lq) = (p.ln(), (1.0 - p).ln());
        let lm = ln_gamma(m as f64 + 1.0);
        let mut acc = 0.0;
        let cdf = (0..=m)
            .map(|k| {
                let k = k as f64;
                acc += (lm - ln_gamma(k + 1.0) - ln_gamma(m as f64 - k + 1.0) + k * lp + (m as f64 - k) * lq).exp();
                acc
            })
            .collect();
        Some(Self { cdf })
    }

    /// Number of high outcomes at quantile level `u`.
    fn quantile(&self, u: f64) -> u64 {
        (self.cdf.partition_point(|&c| c < u) as u64).min(self.cdf.len() as u64 - 1)
    }
}

/// A uniform draw on the open unit interval.
fn open_unit(rng: &mut Rng) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

/// Paired estimates of `E[max Z_k] - mu` and its three surrogates for an i.i.d. prior.
pub fn chain_estimates(
    prior: &PriorSpec,
    x: CovariateVector,
    shape: &ModelShape,
    reps: u64,
    seed: u64,
) -> Result<ChainEstimates> {
    let base = prior
        .iid_base()
        .ok_or_else(|| Error::UnsupportedPrior(format!("{prior} is not an i.i.d. prior")))?;
    prior.validate(shape)?;
    x.check_len(shape)?;
    if reps < 2 {
        return Err(Error::Config(format!("reps = {reps} must be at least 2")));
    }
    let plan = ScanPlan::new(shape, DisclosureSet::empty(), DEFAULT_BUDGET)?;
    let m = shape.nonstandard_count();
    let h = shape.human_capacity();
    let block = 1u64 << (m - h);
    let mu = base.mean();
    let var_y = base.variance();
    let sd_block = (var_y / block as f64).sqrt();
    // Set counts and extra copies per disclosed-set size j.
    let by_size: Vec<(u128, u64)> = (0..=h).map(|j| (binomial_u128(m, j), (1u64 << (m - j)) - block)).collect();
    let two_point = base.as_two_point();
    let table = two_point.and_then(|(_, _, p)| BinomialTable::new(block, p));
    let std_normal = Normal::new(0.0, 1.0).expect("standard normal");
    let xi = x.index();
    let copies_seed = derive_seed(seed, tags::INDEPENDENT_COPIES);

    let rows = try_replicate(reps, seed, |i, rng: &mut Rng, scratch: &mut (Vec<f64>, Vec<f64>)| {
        let (values, work) = scratch;
        prior.sample_into(shape, rng, values)?;
        let mut max_z = f64::NEG_INFINITY;
        plan.for_each_mean(values, xi, work, |_, z| max_z = max_z.max(z));

        let mut copies = replication_rng(copies_seed, i);
        let (mut max_ind, mut max_iid, mut max_n) = (f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(count, extra) in &by_size {
            let size = (block + extra) as f64;
            for _ in 0..count {
                let u = open_unit(&mut copies);
                let block_sum = match (&table, two_point) {
                    (Some(t), Some((low, high, _))) => {
                        let k = t.quantile(u) as f64;
                        low * (block as f64 - k) + high * k
                    }
                    _ => base.sample_sum(block, &mut copies),
                };
                let iid = block_sum / block as f64;
                let ind = (block_sum + base.sample_sum(extra, &mut copies)) / size;
                let normal = mu + sd_block * std_normal.inverse_cdf(u);
                max_iid = max_iid.max(iid);
                max_ind = max_ind.max(ind);
                max_n = max_n.max(normal);
            }
        }
        Ok::<_, Error>([max_z - mu, max_ind - mu, max_iid - mu, max_n - mu])
    })?;
    let column = |f: &dyn Fn(&[f64; 4]) -> f64| Estimate::from_samples(&rows.iter().map(f).collect::<Vec<_>>());
    Ok(ChainEstimates {
        v_n: column(&|r| r[0]),
        v_ind: column(&|r| r[1]),
        v_iid: column(&|r| r[2]),
        v_normal: column(&|r| r[3]),
        ind_minus_n: column(&|r| r[1] - r[0]),
        iid_minus_ind: column(&|r| r[2] - r[1]),
        iid_minus_normal: column(&|r| r[2] - r[3]),
        mu,
        var_y,
        disclosure_sets: disclosure_count_f64(shape),
        block,
    })
}

/// Smallest cylinder size `2^(n - s - h_n)` as a float.
fn min_cylinder(shape: &ModelShape) -> f64 {
    2f64.powi((shape.nonstandard_count() - shape.human_capacity()) as i32)
}

/// Gaussian-maximum bound `(var_y / 2^(n-s-h_n)) * 2 sqrt(ln K_n)`.
///
/// The factor multiplies the variance rather than the standard deviation, as in
/// the unit-variance display it generalizes; for `var_y = 1` the two agree.
pub fn berman_bound(shape: &ModelShape, var_y: f64) -> f64 {
    var_y / min_cylinder(shape) * 2.0 * disclosure_count_f64(shape).ln().sqrt()
}

/// `ybar * sqrt(2 ln K_n / 2^(n-s-h_n))`: every posterior mean is sub-Gaussian
/// with variance proxy `ybar^2 / |cylinder|`, so this dominates `E[max_k Z_k - mu]`.
pub fn subgaussian_max_bound(shape: &ModelShape, ybar: f64) -> f64 {
    ybar * (2.0 * disclosure_count_f64(shape).ln() / min_cylinder(shape)).sqrt()
}

/// Moments of sample means of two sizes, drawn nested (the small sample is a prefix).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MpsCheck {
    pub mean_small: Estimate,
    pub mean_large: Estimate,
    pub var_small: f64,
    pub var_large: f64,
}

impl MpsCheck {
    pub fn variance_ratio(&self) -> f64 {
        self.var_small / self.var_large
    }
}

pub fn mps_check(base: &BaseDist, m_small: u64, m_large: u64, reps: u64, seed: u64) -> Result<MpsCheck> {
    if m_small == 0 || m_small >= m_large {
        return Err(Error::Config(format!("need 0 < m_small = {m_small} < m_large = {m_large}")));
    }
    if reps < 2 {
        return Err(Error::Config(format!("reps = {reps} must be at least 2")));
    }
    let rows = replicate(reps, seed, |_, rng: &mut Rng, _: &mut ()| {
        let small = base.sample_sum(m_small, rng);
        let large = small + base.sample_sum(m_large - m_small, rng);
        (small / m_small as f64, large / m_large as f64)
    });
    let small: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let large: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let (_, var_small) = mean_and_variance(&small);
    let (_, var_large) = mean_and_variance(&large);
    Ok(MpsCheck {
        mean_small: Estimate::from_samples(&small),
        mean_large: Estimate::from_samples(&large),
        var_small,
        var_large,
    })
}

/// Moment bound on `|E[max_i Z_i] - mean(mu)|` valid for any dependence:
/// `sqrt((1 - 1/K) sum var_i + (1/K) sum (sqrt(K) (mu_i - mean(mu)))^2)`.
pub fn arnold_bound(means: &[f64], vars: &[f64]) -> Result<f64> {
    if means.len() != vars.len() || means.is_empty() {
        return Err(Error::LengthMismatch(format!(
            "{} means and {} variances; need equal nonzero lengths",
            means.len(),
            vars.len()
        )));
    }
    if let Some(v) = vars.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::Config(format!("variance {v} must be >= 0")));
    }
    let k = means.len() as f64;
    let grand = means.iter().sum::<f64>() / k;
    let spread: f64 = means.iter().map(|m| k * (m - grand).powi(2)).sum();
    Ok(((1.0 - 1.0 / k) * vars.iter().sum::<f64>() + spread / k).sqrt())
}

/// A rule mapping a type function and a disclosure to an evaluation.
pub trait EvaluationRule: Sync {
    fn name(&self) -> String;
    /// Whether the rule claims `E[Z_d] = mu` for every disclosure.
    fn unbiased(&self) -> bool;
    fn evaluate(&self, shape: &ModelShape, f: &[f64], d: Disclosure, scratch: &mut Vec<f64>) -> f64;
}

/// The Bayesian posterior mean over the disclosed cylinder.
#[derive(Debug, Clone, Copy, Default)]
pub struct BayesPosteriorMean;

impl EvaluationRule for BayesPosteriorMean {
    fn name(&self) -> String {
        "bayes_posterior_mean".into()
    }

    fn unbiased(&self) -> bool {
        true
    }

    fn evaluate(&self, shape: &ModelShape, f: &[f64], d: Disclosure, scratch: &mut Vec<f64>) -> f64 {
        cylinder_mean(f, d.values, d.mask, shape.full_mask(), scratch)
    }
}

/// Posterior mean pulled toward a fixed `target` with weight `weight`.
#[derive(Debug, Clone, Copy)]
pub struct ShrunkMean {
    pub target: f64,
    pub weight: f64,
}

impl EvaluationRule for ShrunkMean {
    fn name(&self) -> String {
        format!("shrunk_mean[target={};weight={}]", self.target, self.weight)
    }

    fn unbiased(&self) -> bool {
        self.weight == 0.0
    }

    fn evaluate(&self, shape: &ModelShape, f: &[f64], d: Disclosure, scratch: &mut Vec<f64>) -> f64 {
        let z = BayesPosteriorMean.evaluate(shape, f, d, scratch);
        (1.0 - self.weight) * z + self.weight * self.target
    }
}

/// Which disclosure the diagnostic follows at each `n`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DisclosurePicker {
    /// Only the standard covariates.
    #[default]
    Empty,
    /// The first `h_n` nonstandard covariates as well.
    FullCapacity,
}

impl DisclosurePicker {
    /// The disclosure of the all-ones agent.
    pub fn pick(&self, shape: &ModelShape) -> Disclosure {
        let extra = match self {
            DisclosurePicker::Empty => 0,
            DisclosurePicker::FullCapacity => ((1u64 << shape.human_capacity()) - 1) << shape.s(),
        };
        let mask = shape.standard_mask() | extra;
        Disclosure { mask, values: mask }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcentrationRow {
    pub n: u32,
    pub mean: Estimate,
    pub variance: f64,
    pub disclosure_sets: f64,
    /// `Var(Z_d) * K_n`.
    pub product: f64,
    pub mu: f64,
    /// `|mean - mu| <= 3 se` (or within rounding when exact).
    pub unbiased: bool,
}

/// Mean and variance of a rule's evaluation of a picked disclosure, per shape.
pub fn concentration_diagnostic(
    rule: &dyn EvaluationRule,
    prior: &PriorSpec,
    shapes: &[ModelShape],
    picker: DisclosurePicker,
    reps: u64,
    seed: u64,
) -> Result<Vec<ConcentrationRow>> {
    if reps < 2 {
        return Err(Error::Config(format!("reps = {reps} must be at least 2")));
    }
    shapes
        .iter()
        .map(|shape| {
            prior.validate(shape)?;
            let d = picker.pick(shape);
            let disclosed = DisclosureSet::from_mask(d.mask & shape.nonstandard_mask());
            disclosed.check_capacity(shape)?;
            let point_seed = derive_seed(seed, u64::from(shape.n()));
            let samples = try_replicate(reps, point_seed, |_, rng: &mut Rng, s: &mut (Vec<f64>, Vec<f64>)| {
                prior.sample_into(shape, rng, &mut s.0)?;
                Ok::<_, Error>(rule.evaluate(shape, &s.0, d, &mut s.1))
            })?;
            let mean = Estimate::from_samples(&samples);
            let (_, variance) = mean_and_variance(&samples);
            let k = disclosure_count_f64(shape);
            let mu = prior.type_mean(shape);
            let unbiased = (mean.mean - mu).abs() <= 3.0 * mean.se + 1e-12;
            Ok(ConcentrationRow { n: shape.n(), mean, variance, disclosure_sets: k, product: variance * k, mu, unbiased })
        })
        .collect()
}

/// Checks a rule against the posterior mean on one function, for plug-in validation.
pub fn agrees_with_posterior_mean(
    rule: &dyn EvaluationRule,
    shape: &ModelShape,
    f: &TypeFunction,
    d: Disclosure,
) -> Result<bool> {
    f.check_shape(shape)?;
    let x = CovariateVector::from_index(shape.n(), d.values & d.mask)?;
    let set = DisclosureSet::from_mask(d.mask & shape.nonstandard_mask());
    let oracle = crate::model::posterior_mean(shape, f, x, set)?.yhat;
    Ok((rule.evaluate(shape, f.values(), d, &mut Vec::new()) - oracle).abs() < 1e-12)
}
