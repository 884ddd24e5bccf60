//! Value of context, its expectations over a prior, evaluator comparison and the
//! sample-size threshold beyond which the comparison is guaranteed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{blackbox_set, CovariateVector, DisclosureSet, ModelShape, TypeFunction};
use crate::montecarlo::{derive_seed, replication_rng, tags, try_replicate, Estimate, Rng};
use crate::numeric::CompensatedSum;
use crate::priors::{NoiseSpec, PriorSpec};
use crate::scan::{cylinder_mean, ContextScan, ScanPlan, DEFAULT_BUDGET};
use crate::utility::UtilitySpec;

/// Largest function space enumerated exactly.
pub const EXACT_FUNCTION_LIMIT: u64 = 1 << 16;

/// How expectations over the prior are computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Exact enumeration when the prior has at most [`EXACT_FUNCTION_LIMIT`]
    /// functions and noise does not enter the payoff; Monte Carlo otherwise.
    #[default]
    Auto,
    MonteCarlo,
    Exact,
}

/// Knobs shared by the expectation operations.
#[derive(Debug, Clone)]
pub struct VocOptions {
    /// Covariates with known effects, conditioned on in every evaluation.
    pub known: DisclosureSet,
    pub budget: u128,
    pub mode: EvalMode,
    /// Additive type noise; payoffs use `f(x) + epsilon`.
    pub noise: Option<NoiseSpec>,
    /// Confidence multiplier for verdicts.
    pub z: f64,
}

impl Default for VocOptions {
    fn default() -> Self {
        Self { known: DisclosureSet::empty(), budget: DEFAULT_BUDGET, mode: EvalMode::Auto, noise: None, z: 3.0 }
    }
}

/// Best and worst context payoffs of one agent, with the disclosures attaining them.
pub fn context_scan(
    f: &TypeFunction,
    x: CovariateVector,
    u: &UtilitySpec,
    shape: &ModelShape,
    known: DisclosureSet,
    budget: u128,
) -> Result<ContextScan> {
    f.check_shape(shape)?;
    x.check_len(shape)?;
    u.validate(shape.ybar())?;
    let plan = ScanPlan::new(shape, known, budget)?;
    Ok(plan.scan(f.values(), x.index(), u, f.value(x), &mut Vec::new()))
}

/// `v(f, x)`: the best payoff over admissible disclosures minus the payoff of
/// disclosing nothing.
pub fn value_of_context(
    f: &TypeFunction,
    x: CovariateVector,
    u: &UtilitySpec,
    shape: &ModelShape,
    known: DisclosureSet,
) -> Result<f64> {
    Ok(context_scan(f, x, u, shape, known, DEFAULT_BUDGET)?.value_of_context())
}

/// The worst payoff over admissible disclosures.
pub fn min_context_payoff(f: &TypeFunction, x: CovariateVector, u: &UtilitySpec, shape: &ModelShape) -> Result<f64> {
    Ok(context_scan(f, x, u, shape, DisclosureSet::empty(), DEFAULT_BUDGET)?.worst)
}

/// `max_x v(f, x)`.
pub fn max_value_of_context(f: &TypeFunction, u: &UtilitySpec, shape: &ModelShape, opts: &VocOptions) -> Result<f64> {
    f.check_shape(shape)?;
    u.validate(shape.ybar())?;
    let plan = max_plan(shape, opts)?;
    let mut scratch = Vec::new();
    Ok(max_over_agents(&plan, f.values(), u, 0.0, &mut scratch))
}

fn max_plan(shape: &ModelShape, opts: &VocOptions) -> Result<ScanPlan> {
    let plan = ScanPlan::new(shape, opts.known, opts.budget)?;
    let cost = plan.cost().saturating_mul(1u128 << shape.n());
    if cost > opts.budget {
        return Err(Error::Budget { n: shape.n(), cost, budget: opts.budget });
    }
    Ok(plan)
}

fn max_over_agents(plan: &ScanPlan, values: &[f64], u: &UtilitySpec, eps: f64, scratch: &mut Vec<f64>) -> f64 {
    (0..values.len() as u64)
        .map(|x| plan.scan(values, x, u, values[x as usize] + eps, scratch).value_of_context())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `V(n, x) = E[v(f, x)]`.
pub fn expected_value_of_context(
    prior: &PriorSpec,
    x: CovariateVector,
    u: &UtilitySpec,
    shape: &ModelShape,
    reps: u64,
    seed: u64,
    opts: &VocOptions,
) -> Result<Estimate> {
    x.check_len(shape)?;
    let plan = ScanPlan::new(shape, opts.known, opts.budget)?;
    let xi = x.index();
    let [v] = expectations(prior, u, shape, reps, seed, opts, |values, eps, scratch| {
        [plan.scan(values, xi, u, values[xi as usize] + eps, scratch).value_of_context()]
    })?;
    Ok(v)
}

/// `V^max(n) = E[max_x v(f, x)]`.
pub fn expected_max_value_of_context(
    prior: &PriorSpec,
    u: &UtilitySpec,
    shape: &ModelShape,
    reps: u64,
    seed: u64,
    opts: &VocOptions,
) -> Result<Estimate> {
    let plan = max_plan(shape, opts)?;
    let [v] = expectations(prior, u, shape, reps, seed, opts, |values, eps, scratch| {
        [max_over_agents(&plan, values, u, eps, scratch)]
    })?;
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    PrefersBlackBox,
    PrefersHuman,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparison {
    pub blackbox: Estimate,
    pub human_best: Estimate,
    pub human_worst: Estimate,
    pub verdict: Verdict,
}

/// Expected payoff under the black box versus the best and worst human disclosure,
/// all on the same prior draws.
pub fn compare_evaluators(
    prior: &PriorSpec,
    x: CovariateVector,
    u: &UtilitySpec,
    shape: &ModelShape,
    reps: u64,
    seed: u64,
    opts: &VocOptions,
) -> Result<Comparison> {
    shape.require_comparable()?;
    x.check_len(shape)?;
    if !(opts.z >= 0.0) {
        return Err(Error::Config(format!("confidence multiplier z = {} must be >= 0", opts.z)));
    }
    let plan = ScanPlan::new(shape, opts.known, opts.budget)?;
    let xi = x.index();
    let bb_fixed = shape.standard_mask() | blackbox_set(shape).mask();
    let full = shape.full_mask();
    let [blackbox, human_best, human_worst] =
        expectations(prior, u, shape, reps, seed, opts, |values, eps, scratch| {
            let y = values[xi as usize] + eps;
            let bb = u.eval(cylinder_mean(values, xi, bb_fixed, full, scratch), y);
            let s = plan.scan(values, xi, u, y, scratch);
            [bb, s.best, s.worst]
        })?;
    let verdict = verdict(&blackbox, &human_best, &human_worst, opts.z);
    Ok(Comparison { blackbox, human_best, human_worst, verdict })
}

/// Interval separation at `z` standard errors.
fn verdict(bb: &Estimate, best: &Estimate, worst: &Estimate, z: f64) -> Verdict {
    if best.mean + z * best.se < bb.mean - z * bb.se {
        Verdict::PrefersBlackBox
    } else if worst.mean - z * worst.se > bb.mean + z * bb.se {
        Verdict::PrefersHuman
    } else {
        Verdict::Inconclusive
    }
}

#[derive(Default)]
struct Scratch {
    values: Vec<f64>,
    work: Vec<f64>,
}

/// Expectations of `K` per-function quantities under the prior. `quantity`
/// receives the type table, the noise draw and a scratch buffer.
fn expectations<const K: usize, Q>(
    prior: &PriorSpec,
    u: &UtilitySpec,
    shape: &ModelShape,
    reps: u64,
    seed: u64,
    opts: &VocOptions,
    quantity: Q,
) -> Result<[Estimate; K]>
where
    Q: Fn(&[f64], f64, &mut Vec<f64>) -> [f64; K] + Sync + Send,
{
    prior.validate(shape)?;
    u.validate(shape.ybar())?;
    if let Some(noise) = &opts.noise {
        noise.validate()?;
        noise.variance(shape.n())?;
    }
    let noisy = opts.noise.is_some() && u.depends_on_type();
    let laws = match opts.mode {
        EvalMode::MonteCarlo => None,
        EvalMode::Auto if noisy => None,
        EvalMode::Auto => prior.finite_law(shape, EXACT_FUNCTION_LIMIT),
        EvalMode::Exact => {
            if noisy {
                return Err(Error::Config("exact mode cannot integrate out type noise".into()));
            }
            Some(prior.finite_law(shape, EXACT_FUNCTION_LIMIT).ok_or_else(|| {
                Error::UnsupportedPrior(format!(
                    "{prior} has more than {EXACT_FUNCTION_LIMIT} functions at n = {} or is continuous",
                    shape.n()
                ))
            })?)
        }
    };

    if let Some(laws) = laws {
        let len = shape.table_len()?;
        let mut sums: [CompensatedSum; K] = std::array::from_fn(|_| CompensatedSum::new());
        let mut count = 0u64;
        let mut work = Vec::new();
        for law in &laws {
            law.for_each(len, |p, values| {
                let q = quantity(values, 0.0, &mut work);
                for (s, v) in sums.iter_mut().zip(q) {
                    s.add(p * v);
                }
                count += 1;
            });
        }
        return Ok(std::array::from_fn(|k| Estimate::exact(sums[k].total(), count)));
    }

    if reps < 2 {
        return Err(Error::Config(format!("reps = {reps} must be at least 2")));
    }
    let noise_seed = derive_seed(seed, tags::NOISE);
    let rows = try_replicate(reps, seed, |i, rng: &mut Rng, scratch: &mut Scratch| {
        prior.sample_into(shape, rng, &mut scratch.values)?;
        let eps = match &opts.noise {
            Some(noise) if noisy => noise.sample(shape.n(), &mut replication_rng(noise_seed, i))?,
            _ => 0.0,
        };
        Ok::<_, Error>(quantity(&scratch.values, eps, &mut scratch.work))
    })?;
    Ok(std::array::from_fn(|k| {
        let column: Vec<f64> = rows.iter().map(|r| r[k]).collect();
        Estimate::from_samples(&column)
    }))
}

/// Smallest sample size from which the comparison theorem applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Threshold {
    /// Largest root of `g`; `g > 0` on `(real_root, inf)`. Zero when `g > 0` everywhere.
    pub real_root: f64,
    /// Smallest integer `N >= 1` with `g(m) > 0` for every integer `m >= N`.
    pub min_integer: u64,
}

impl Threshold {
    pub fn agrees_with(&self, reference: u64) -> bool {
        self.min_integer == reference
    }
}

/// Search ceiling for the threshold root.
const THRESHOLD_LIMIT: f64 = 1e15;

/// `g(n) = (alpha_b - alpha_h) n - log2(n) / 2 - 1 - log2(C)`.
pub fn threshold_gap(alpha_b: f64, alpha_h: f64, c: f64, n: f64) -> f64 {
    (alpha_b - alpha_h) * n - 0.5 * n.log2() - 1.0 - c.log2()
}

/// Threshold `N` such that `g(n) > 0` for all `n >= N`.
///
/// `g` is convex on `(0, inf)` with its minimum at `n* = 1 / (2 a ln 2)`,
/// `a = alpha_b - alpha_h`, so the condition holds on a tail `(root, inf)` found
/// by bisection on the increasing branch.
pub fn threshold_n(alpha_b: f64, alpha_h: f64, c: f64) -> Result<Threshold> {
    let a = alpha_b - alpha_h;
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidShape(format!("alpha_b = {alpha_b} must exceed alpha_h = {alpha_h}")));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidShape(format!("C = {c} must be positive and finite")));
    }
    let g = |n: f64| threshold_gap(alpha_b, alpha_h, c, n);
    let stationary = 1.0 / (2.0 * a * std::f64::consts::LN_2);
    if g(stationary) > 0.0 {
        return Ok(Threshold { real_root: 0.0, min_integer: 1 });
    }
    if stationary >= THRESHOLD_LIMIT || g(THRESHOLD_LIMIT) <= 0.0 {
        return Err(Error::UnboundedThreshold { limit: THRESHOLD_LIMIT });
    }
    // Increasing beyond the stationary point: g'(n) = a - 1 / (2 n ln 2) > 0.
    debug_assert!(g(stationary * 2.0) > g(stationary));
    let (mut lo, mut hi) = (stationary, stationary.max(1.0));
    while g(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-9 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let root = hi;
    let mut min_integer = (root.floor() as u64).max(1);
    while g(min_integer as f64) <= 0.0 {
        min_integer += 1;
    }
    while min_integer > 1 && (min_integer - 1) as f64 > stationary && g((min_integer - 1) as f64) > 0.0 {
        min_integer -= 1;
    }
    Ok(Threshold { real_root: root, min_integer })
}
