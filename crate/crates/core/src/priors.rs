//! Distributions over type functions.
//!
//! The exchangeable families (`UniformBinary`, `Iid`, `FiniteMixture`) satisfy the
//! symmetry assumptions under which context loses its value; `SingleRelevant` and
//! `Structural` are the standard counterexamples; `RelevantSubset` and
//! `KnownEffects` are the relaxations.

use std::fmt;

use rand::Rng as _;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{floor_fraction, low_bits, CovariateVector, ModelShape, TypeFunction};
use crate::montecarlo::{replication_rng, Rng};

/// Cell count used to discretize a continuous uniform distribution.
pub const CONTINUOUS_GRID: u32 = 1 << 10;

/// Base distribution `F` of a single type value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseDist {
    PointMass { value: f64 },
    TwoPoint {
        low: f64,
        high: f64,
        #[serde(default = "one_half")]
        p_high: f64,
    },
    /// `points` equally spaced atoms from `low` to `high` inclusive, equally likely.
    UniformGrid { low: f64, high: f64, points: u32 },
    /// Continuous uniform on `[low, high]`, discretized at the midpoints of
    /// [`CONTINUOUS_GRID`] equal cells.
    Uniform { low: f64, high: f64 },
}

fn one_half() -> f64 {
    0.5
}

impl BaseDist {
    /// Fair coin on `{-1, 1}`: mean 0, variance 1.
    pub fn symmetric_sign() -> Self {
        BaseDist::TwoPoint { low: -1.0, high: 1.0, p_high: 0.5 }
    }

    pub fn validate(&self, ybar: f64) -> Result<()> {
        let (lo, hi) = match *self {
            BaseDist::PointMass { value } => (value, value),
            BaseDist::TwoPoint { low, high, p_high } => {
                if !(0.0..=1.0).contains(&p_high) {
                    return Err(Error::Config(format!("p_high = {p_high} is not a probability")));
                }
                (low.min(high), low.max(high))
            }
            BaseDist::UniformGrid { low, high, points } => {
                if points < 2 {
                    return Err(Error::Config("uniform grid needs at least 2 points".into()));
                }
                (low, high)
            }
            BaseDist::Uniform { low, high } => (low, high),
        };
        if !(lo <= hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Config(format!("{self}: invalid support [{lo}, {hi}]")));
        }
        if lo < -ybar || hi > ybar {
            return Err(Error::Config(format!(
                "{self}: support [{lo}, {hi}] is not inside [-{ybar}, {ybar}]"
            )));
        }
        Ok(())
    }

    /// Atoms and their probabilities.
    pub fn support(&self) -> Vec<(f64, f64)> {
        match *self {
            BaseDist::PointMass { value } => vec![(value, 1.0)],
            BaseDist::TwoPoint { low, high, p_high } => {
                if p_high == 0.0 {
                    vec![(low, 1.0)]
                } else if p_high == 1.0 || low == high {
                    vec![(high, 1.0)]
                } else {
                    vec![(low, 1.0 - p_high), (high, p_high)]
                }
            }
            BaseDist::UniformGrid { .. } | BaseDist::Uniform { .. } => {
                let k = self.grid_len();
                (0..k).map(|i| (self.grid_atom(i), 1.0 / f64::from(k))).collect()
            }
        }
    }

    fn grid_len(&self) -> u32 {
        match *self {
            BaseDist::UniformGrid { points, .. } => points,
            BaseDist::Uniform { .. } => CONTINUOUS_GRID,
            _ => 1,
        }
    }

    fn grid_atom(&self, i: u32) -> f64 {
        match *self {
            BaseDist::UniformGrid { low, high, points } => {
                low + (high - low) * f64::from(i) / f64::from(points - 1)
            }
            BaseDist::Uniform { low, high } => {
                low + (high - low) * (f64::from(i) + 0.5) / f64::from(CONTINUOUS_GRID)
            }
            _ => unreachable!("grid atom of a non-grid distribution"),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            BaseDist::PointMass { value } => value,
            BaseDist::TwoPoint { low, high, p_high } => low + (high - low) * p_high,
            BaseDist::UniformGrid { low, high, .. } | BaseDist::Uniform { low, high } => {
                (low + high) / 2.0
            }
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            BaseDist::PointMass { .. } => 0.0,
            BaseDist::TwoPoint { low, high, p_high } => (high - low).powi(2) * p_high * (1.0 - p_high),
            BaseDist::UniformGrid { .. } | BaseDist::Uniform { .. } => {
                // Discrete uniform on k equally spaced atoms with spacing d: d^2 (k^2 - 1) / 12.
                let k = f64::from(self.grid_len());
                let (low, high) = match *self {
                    BaseDist::UniformGrid { low, high, .. } | BaseDist::Uniform { low, high } => {
                        (low, high)
                    }
                    _ => unreachable!(),
                };
                let d = if matches!(self, BaseDist::UniformGrid { .. }) {
                    (high - low) / (k - 1.0)
                } else {
                    (high - low) / k
                };
                d * d * (k * k - 1.0) / 12.0
            }
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match *self {
            BaseDist::PointMass { value } => value,
            BaseDist::TwoPoint { low, high, p_high } => {
                if rng.random::<f64>() < p_high {
                    high
                } else {
                    low
                }
            }
            BaseDist::UniformGrid { .. } | BaseDist::Uniform { .. } => {
                self.grid_atom(rng.random_range(0..self.grid_len()))
            }
        }
    }

    /// Fills `out` with i.i.d. draws.
    pub fn fill(&self, rng: &mut Rng, out: &mut [f64]) {
        match *self {
            BaseDist::PointMass { value } => out.fill(value),
            BaseDist::TwoPoint { low, high, p_high: 0.5 } => {
                // One fair bit per entry.
                for chunk in out.chunks_mut(64) {
                    let bits: u64 = rng.random();
                    for (j, v) in chunk.iter_mut().enumerate() {
                        *v = if bits >> j & 1 == 1 { high } else { low };
                    }
                }
            }
            _ => out.iter_mut().for_each(|v| *v = self.sample(rng)),
        }
    }

    /// Sum of `m` i.i.d. draws, sampled from its exact law.
    pub fn sample_sum(&self, m: u64, rng: &mut Rng) -> f64 {
        if m == 0 {
            return 0.0;
        }
        match *self {
            BaseDist::PointMass { value } => value * m as f64,
            BaseDist::TwoPoint { low, high, p_high } => {
                let k = binomial_draw(m, p_high, rng) as f64;
                low * (m as f64 - k) + high * k
            }
            BaseDist::UniformGrid { .. } | BaseDist::Uniform { .. } => {
                let atoms = u64::from(self.grid_len());
                if m <= 4 * atoms {
                    return (0..m).map(|_| self.sample(rng)).sum();
                }
                // Multinomial counts by sequential conditional binomials.
                let mut remaining = m;
                let mut total = 0.0;
                for i in 0..self.grid_len() {
                    if remaining == 0 {
                        break;
                    }
                    let left = atoms - u64::from(i);
                    let k = if left == 1 { remaining } else { binomial_draw(remaining, 1.0 / left as f64, rng) };
                    total += self.grid_atom(i) * k as f64;
                    remaining -= k;
                }
                total
            }
        }
    }

    /// `(low, high, p_high)` when the law has exactly two atoms.
    pub fn as_two_point(&self) -> Option<(f64, f64, f64)> {
        match *self {
            BaseDist::TwoPoint { low, high, p_high } if p_high > 0.0 && p_high < 1.0 && low != high => {
                Some((low, high, p_high))
            }
            _ => None,
        }
    }
}

fn binomial_draw(m: u64, p: f64, rng: &mut Rng) -> u64 {
    if p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return m;
    }
    Binomial::new(m, p).expect("valid binomial parameters").sample(rng)
}

impl fmt::Display for BaseDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseDist::PointMass { value } => write!(f, "point[{value}]"),
            BaseDist::TwoPoint { low, high, p_high } => write!(f, "two_point[{low};{high};p={p_high}]"),
            BaseDist::UniformGrid { low, high, points } => write!(f, "grid[{low};{high};{points}]"),
            BaseDist::Uniform { low, high } => write!(f, "uniform[{low};{high}]"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    pub weight: f64,
    pub base: BaseDist,
}

/// A distribution over type functions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PriorSpec {
    /// Every entry i.i.d. Bernoulli(1/2) on `{0, 1}`.
    UniformBinary,
    /// Every entry i.i.d. `base`.
    Iid { base: BaseDist },
    /// Draw a component by weight, then every entry i.i.d. from it.
    FiniteMixture { components: Vec<MixtureComponent> },
    /// `f(x) = x_I` for `I` uniform on the nonstandard covariates.
    SingleRelevant,
    /// `f(x) = U * (sum_i x_i) / n` with `U ~ Uniform[0, 1]`.
    Structural,
    /// `f` depends only on the first `s + floor(alpha_r n)` covariates, through an
    /// i.i.d. `base` table.
    RelevantSubset { alpha_r: f64, base: BaseDist },
    /// Entries independent; entry `x` is drawn from `conditionals[k]` where bit `j`
    /// of `k` is the value of the `j`-th covariate listed in `known` (1-based).
    KnownEffects { known: Vec<usize>, conditionals: Vec<BaseDist> },
}

impl PriorSpec {
    pub fn iid(base: BaseDist) -> Self {
        PriorSpec::Iid { base }
    }

    /// Families built to break exchangeability.
    pub fn violates_exchangeability(&self) -> bool {
        matches!(self, PriorSpec::SingleRelevant | PriorSpec::Structural)
    }

    /// The i.i.d. base law when every entry is i.i.d.
    pub fn iid_base(&self) -> Option<BaseDist> {
        match self {
            PriorSpec::UniformBinary => Some(BaseDist::TwoPoint { low: 0.0, high: 1.0, p_high: 0.5 }),
            PriorSpec::Iid { base } => Some(*base),
            _ => None,
        }
    }

    pub fn validate(&self, shape: &ModelShape) -> Result<()> {
        let ybar = shape.ybar();
        let need_unit = |what: &str| {
            if ybar < 1.0 {
                Err(Error::Config(format!("{what} takes values in [0, 1] but ybar = {ybar}")))
            } else {
                Ok(())
            }
        };
        match self {
            PriorSpec::UniformBinary => need_unit("uniform_binary"),
            PriorSpec::SingleRelevant => need_unit("single_relevant"),
            PriorSpec::Structural => need_unit("structural"),
            PriorSpec::Iid { base } => base.validate(ybar),
            PriorSpec::FiniteMixture { components } => {
                if components.is_empty() {
                    return Err(Error::Config("finite mixture needs at least one component".into()));
                }
                let mut total = 0.0;
                for c in components {
                    if !(c.weight > 0.0) {
                        return Err(Error::Config(format!("mixture weight {} must be > 0", c.weight)));
                    }
                    c.base.validate(ybar)?;
                    total += c.weight;
                }
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::Config(format!("mixture weights sum to {total}, not 1")));
                }
                Ok(())
            }
            PriorSpec::RelevantSubset { alpha_r, base } => {
                if !(*alpha_r > 0.0 && *alpha_r <= 1.0) {
                    return Err(Error::Config(format!("alpha_r = {alpha_r} must lie in (0, 1]")));
                }
                let r = floor_fraction(*alpha_r, shape.n());
                if r > shape.nonstandard_count() {
                    return Err(Error::Config(format!(
                        "r_n = {r} exceeds the {} nonstandard covariates",
                        shape.nonstandard_count()
                    )));
                }
                base.validate(ybar)
            }
            PriorSpec::KnownEffects { known, conditionals } => {
                let mut seen = 0u64;
                for &k in known {
                    if k == 0 || k > shape.n() as usize {
                        return Err(Error::Config(format!(
                            "known covariate {k} is outside 1..={}",
                            shape.n()
                        )));
                    }
                    if seen >> (k - 1) & 1 == 1 {
                        return Err(Error::Config(format!("known covariate {k} listed twice")));
                    }
                    seen |= 1 << (k - 1);
                }
                if known.len() > 16 || conditionals.len() != 1 << known.len() {
                    return Err(Error::Config(format!(
                        "{} known covariates need {} conditionals, got {}",
                        known.len(),
                        1u64 << known.len().min(63),
                        conditionals.len()
                    )));
                }
                conditionals.iter().try_for_each(|c| c.validate(ybar))
            }
        }
    }

    /// Relevant nonstandard count `r_n` for `RelevantSubset`.
    pub fn relevant_count(&self, shape: &ModelShape) -> Option<u32> {
        match self {
            PriorSpec::RelevantSubset { alpha_r, .. } => Some(floor_fraction(*alpha_r, shape.n())),
            _ => None,
        }
    }

    /// Draws one type function; deterministic in `(self, shape, seed)`.
    pub fn sample(&self, shape: &ModelShape, seed: u64) -> Result<TypeFunction> {
        self.validate(shape)?;
        let mut rng = replication_rng(seed, 0);
        let mut values = Vec::new();
        self.sample_into(shape, &mut rng, &mut values)?;
        TypeFunction::new(shape.n(), values)
    }

    /// Draws into a reusable buffer. The prior must already be validated for `shape`.
    pub fn sample_into(&self, shape: &ModelShape, rng: &mut Rng, out: &mut Vec<f64>) -> Result<()> {
        let len = shape.table_len()?;
        out.resize(len, 0.0);
        let n = shape.n();
        match self {
            PriorSpec::UniformBinary => {
                BaseDist::TwoPoint { low: 0.0, high: 1.0, p_high: 0.5 }.fill(rng, out)
            }
            PriorSpec::Iid { base } => base.fill(rng, out),
            PriorSpec::FiniteMixture { components } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = components.last().expect("validated nonempty").base;
                for c in components {
                    acc += c.weight;
                    if u < acc {
                        chosen = c.base;
                        break;
                    }
                }
                chosen.fill(rng, out);
            }
            PriorSpec::SingleRelevant => {
                let i = rng.random_range(shape.s()..n);
                for (idx, v) in out.iter_mut().enumerate() {
                    *v = ((idx >> i) & 1) as f64;
                }
            }
            PriorSpec::Structural => {
                let u: f64 = rng.random();
                for (idx, v) in out.iter_mut().enumerate() {
                    *v = u * f64::from((idx as u64).count_ones()) / f64::from(n);
                }
            }
            PriorSpec::RelevantSubset { base, .. } => {
                let k = shape.s() + self.relevant_count(shape).expect("relevant subset");
                let mut g = vec![0.0; 1usize << k];
                base.fill(rng, &mut g);
                let keep = low_bits(k) as usize;
                for (idx, v) in out.iter_mut().enumerate() {
                    *v = g[idx & keep];
                }
            }
            PriorSpec::KnownEffects { known, conditionals } => {
                for (idx, v) in out.iter_mut().enumerate() {
                    *v = conditionals[known_key(known, idx as u64)].sample(rng);
                }
            }
        }
        Ok(())
    }

    /// Exact prior mean of `f(x)`.
    pub fn entry_mean(&self, shape: &ModelShape, x: CovariateVector) -> f64 {
        let idx = x.index();
        match self {
            PriorSpec::UniformBinary => 0.5,
            PriorSpec::Iid { base } | PriorSpec::RelevantSubset { base, .. } => base.mean(),
            PriorSpec::FiniteMixture { components } => {
                components.iter().map(|c| c.weight * c.base.mean()).sum()
            }
            PriorSpec::SingleRelevant => {
                let ones = (idx & shape.nonstandard_mask()).count_ones();
                f64::from(ones) / f64::from(shape.nonstandard_count())
            }
            PriorSpec::Structural => 0.5 * f64::from(idx.count_ones()) / f64::from(shape.n()),
            PriorSpec::KnownEffects { known, conditionals } => conditionals[known_key(known, idx)].mean(),
        }
    }

    /// `mu = E[Y]` for an agent whose covariate vector is uniform on `{0,1}^n`.
    pub fn type_mean(&self, shape: &ModelShape) -> f64 {
        match self {
            PriorSpec::SingleRelevant => 0.5,
            PriorSpec::Structural => 0.25,
            PriorSpec::KnownEffects { conditionals, .. } => {
                conditionals.iter().map(BaseDist::mean).sum::<f64>() / conditionals.len() as f64
            }
            _ => self.entry_mean(shape, CovariateVector::zeros(shape.n())),
        }
    }

    /// The law of `f` as a finite list of weighted product laws, when it has at most
    /// `limit` functions in its support.
    pub(crate) fn finite_law(&self, shape: &ModelShape, limit: u64) -> Option<Vec<ProductLaw>> {
        let n = shape.n();
        if n > 16 {
            return None;
        }
        let full = shape.full_mask();
        let laws = match self {
            PriorSpec::UniformBinary | PriorSpec::Iid { .. } => {
                let base = self.iid_base().expect("iid family");
                vec![ProductLaw::iid(1.0, full, &base)]
            }
            PriorSpec::FiniteMixture { components } => components
                .iter()
                .map(|c| ProductLaw::iid(c.weight, full, &c.base))
                .collect(),
            PriorSpec::SingleRelevant => {
                let w = 1.0 / f64::from(shape.nonstandard_count());
                (shape.s()..n)
                    .map(|i| ProductLaw {
                        weight: w,
                        keep_mask: 1 << i,
                        cells: vec![vec![(0.0, 1.0)], vec![(1.0, 1.0)]],
                    })
                    .collect()
            }
            PriorSpec::Structural => return None,
            PriorSpec::RelevantSubset { base, .. } => {
                let k = shape.s() + self.relevant_count(shape).expect("relevant subset");
                vec![ProductLaw::iid(1.0, low_bits(k), base)]
            }
            PriorSpec::KnownEffects { known, conditionals } => vec![ProductLaw {
                weight: 1.0,
                keep_mask: full,
                cells: (0..1u64 << n)
                    .map(|idx| conditionals[known_key(known, idx)].support())
                    .collect(),
            }],
        };
        let mut total: u64 = 0;
        for law in &laws {
            total = total.checked_add(law.support_size(limit)?)?;
            if total > limit {
                return None;
            }
        }
        Some(laws)
    }
}

fn known_key(known: &[usize], idx: u64) -> usize {
    known
        .iter()
        .enumerate()
        .map(|(j, &k)| (((idx >> (k - 1)) & 1) as usize) << j)
        .sum()
}

impl fmt::Display for PriorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PriorSpec::UniformBinary => write!(f, "uniform_binary"),
            PriorSpec::Iid { base } => write!(f, "iid[{base}]"),
            PriorSpec::FiniteMixture { components } => {
                write!(f, "mixture[")?;
                for (i, c) in components.iter().enumerate() {
                    if i > 0 {
                        write!(f, "|")?;
                    }
                    write!(f, "{}:{}", c.weight, c.base)?;
                }
                write!(f, "]")
            }
            PriorSpec::SingleRelevant => write!(f, "single_relevant"),
            PriorSpec::Structural => write!(f, "structural"),
            PriorSpec::RelevantSubset { alpha_r, base } => {
                write!(f, "relevant_subset[alpha_r={alpha_r};{base}]")
            }
            PriorSpec::KnownEffects { known, conditionals } => {
                let k: Vec<String> = known.iter().map(ToString::to_string).collect();
                let c: Vec<String> = conditionals.iter().map(ToString::to_string).collect();
                write!(f, "known_effects[K={};{}]", k.join(" "), c.join("|"))
            }
        }
    }
}

/// Entries independent given the component; entry `idx` takes the law of
/// `cells[pext(idx, keep_mask)]`.
#[derive(Debug, Clone)]
pub(crate) struct ProductLaw {
    pub weight: f64,
    pub keep_mask: u64,
    pub cells: Vec<Vec<(f64, f64)>>,
}

impl ProductLaw {
    fn iid(weight: f64, keep_mask: u64, base: &BaseDist) -> Self {
        let atoms = base.support();
        let cells = vec![atoms; 1usize << keep_mask.count_ones()];
        Self { weight, keep_mask, cells }
    }

    fn support_size(&self, limit: u64) -> Option<u64> {
        let mut total: u64 = 1;
        for c in &self.cells {
            total = total.checked_mul(c.len() as u64)?;
            if total > limit {
                return None;
            }
        }
        Some(total)
    }

    /// Visits every function in the support with its probability (times `weight`).
    pub fn for_each(&self, table_len: usize, mut visit: impl FnMut(f64, &[f64])) {
        let cell_of: Vec<usize> = (0..table_len as u64).map(|i| pext(i, self.keep_mask) as usize).collect();
        let mut digits = vec![0usize; self.cells.len()];
        let mut values = vec![0.0; table_len];
        loop {
            let mut prob = self.weight;
            for (d, cell) in digits.iter().zip(&self.cells) {
                prob *= cell[*d].1;
            }
            for (v, &c) in values.iter_mut().zip(&cell_of) {
                *v = self.cells[c][digits[c]].0;
            }
            visit(prob, &values);
            // Mixed-radix increment.
            let mut pos = 0;
            loop {
                if pos == digits.len() {
                    return;
                }
                digits[pos] += 1;
                if digits[pos] < self.cells[pos].len() {
                    break;
                }
                digits[pos] = 0;
                pos += 1;
            }
        }
    }
}

/// Software parallel bit extract.
fn pext(value: u64, mut mask: u64) -> u64 {
    let mut out = 0;
    let mut bit = 0;
    while mask != 0 {
        let low = mask.trailing_zeros();
        out |= ((value >> low) & 1) << bit;
        bit += 1;
        mask &= mask - 1;
    }
    out
}

/// Distribution of the additive type noise `epsilon_n`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseFamily {
    #[default]
    Gaussian,
    /// Symmetric uniform with the scheduled variance.
    Uniform,
}

/// Variance schedule `n -> sigma^2_{eps,n}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSchedule {
    Constant { variance: f64 },
    /// `sigma^2 = scale / n`.
    InverseN { scale: f64 },
    /// Explicit `(n, variance)` pairs.
    Table { entries: Vec<(u32, f64)> },
}

/// Zero-mean noise added to the realized type; evaluations never see it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub schedule: NoiseSchedule,
    #[serde(default)]
    pub family: NoiseFamily,
    /// Requires the variance schedule to be nonincreasing in `n`.
    #[serde(default)]
    pub accumulating: bool,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        match &self.schedule {
            NoiseSchedule::Constant { variance } if !(*variance >= 0.0) => {
                return Err(Error::Config(format!("noise variance {variance} must be >= 0")))
            }
            NoiseSchedule::InverseN { scale } if !(*scale >= 0.0) => {
                return Err(Error::Config(format!("noise scale {scale} must be >= 0")))
            }
            NoiseSchedule::Table { entries } => {
                if let Some((n, v)) = entries.iter().find(|(_, v)| !(*v >= 0.0)) {
                    return Err(Error::Config(format!("noise variance {v} at n = {n} must be >= 0")));
                }
                if self.accumulating {
                    let mut sorted = entries.clone();
                    sorted.sort_by_key(|e| e.0);
                    if sorted.windows(2).any(|w| w[1].1 > w[0].1) {
                        return Err(Error::Config(
                            "accumulating noise needs a nonincreasing variance schedule".into(),
                        ));
                    }
                }
            }
            _ => {}
        }
        Ok(())
    }

    pub fn variance(&self, n: u32) -> Result<f64> {
        match &self.schedule {
            NoiseSchedule::Constant { variance } => Ok(*variance),
            NoiseSchedule::InverseN { scale } => Ok(scale / f64::from(n)),
            NoiseSchedule::Table { entries } => entries
                .iter()
                .find(|(m, _)| *m == n)
                .map(|(_, v)| *v)
                .ok_or_else(|| Error::Config(format!("noise schedule has no entry for n = {n}"))),
        }
    }

    /// Density of the standardized noise at zero, `g_n(0)`.
    pub fn density_at_zero(&self) -> f64 {
        match self.family {
            NoiseFamily::Gaussian => 1.0 / (2.0 * std::f64::consts::PI).sqrt(),
            NoiseFamily::Uniform => 1.0 / (2.0 * 3f64.sqrt()),
        }
    }

    pub fn sample(&self, n: u32, rng: &mut Rng) -> Result<f64> {
        let var = self.variance(n)?;
        if var == 0.0 {
            return Ok(0.0);
        }
        let sd = var.sqrt();
        Ok(match self.family {
            NoiseFamily::Gaussian => Normal::new(0.0, sd).expect("finite sd").sample(rng),
            NoiseFamily::Uniform => {
                let half = sd * 3f64.sqrt();
                rng.random_range(-half..half)
            }
        })
    }
}

/// One noisy type draw `f(x) + epsilon_n`.
pub fn sample_noisy_type(
    f: &TypeFunction,
    x: CovariateVector,
    noise: &NoiseSpec,
    n: u32,
    seed: u64,
) -> Result<f64> {
    noise.validate()?;
    let mut rng = replication_rng(seed, 0);
    Ok(f.value(x) + noise.sample(n, &mut rng)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::mean_and_variance;

    fn shape(n: u32, s: u32) -> ModelShape {
        ModelShape::new(n, s, 0.5, 0.75, 1.0).unwrap()
    }

    #[test]
    fn point_mass_prior_is_constant() {
        let p = PriorSpec::iid(BaseDist::PointMass { value: 0.3 });
        let f = p.sample(&shape(5, 0), 9).unwrap();
        assert!(f.values().iter().all(|&v| v == 0.3));
    }

    #[test]
    fn structural_draw_scales_the_ones_count() {
        let f = PriorSpec::Structural.sample(&shape(4, 0), 123).unwrap();
        let u = f.value(CovariateVector::ones(4));
        assert!(u > 0.0 && u < 1.0);
        assert_eq!(f.value(CovariateVector::zeros(4)), 0.0);
        let one = CovariateVector::from_values(&[1, 0, 0, 0]).unwrap();
        assert!((f.value(one) - u / 4.0).abs() < 1e-15);
    }

    #[test]
    fn single_relevant_picks_one_coordinate() {
        let sh = shape(2, 0);
        let mut seen = [0usize; 2];
        for seed in 0..400 {
            let f = PriorSpec::SingleRelevant.sample(&sh, seed).unwrap();
            // f-hat(x) = x1 has values (0,1,0,1) in index order; f-tilde(x) = x2 has (0,0,1,1).
            match f.values() {
                [0.0, 1.0, 0.0, 1.0] => seen[0] += 1,
                [0.0, 0.0, 1.0, 1.0] => seen[1] += 1,
                other => panic!("unexpected draw {other:?}"),
            }
        }
        // Binomial(400, 1/2): 4 sd is 40.
        assert!(seen[0].abs_diff(200) < 40, "{seen:?}");
    }

    #[test]
    fn sampling_is_deterministic_in_seed() {
        let p = PriorSpec::iid(BaseDist::Uniform { low: -1.0, high: 1.0 });
        let sh = shape(6, 1);
        assert_eq!(p.sample(&sh, 4).unwrap(), p.sample(&sh, 4).unwrap());
        assert_ne!(p.sample(&sh, 4).unwrap(), p.sample(&sh, 5).unwrap());
    }

    #[test]
    fn relevant_subset_ignores_irrelevant_covariates() {
        let p = PriorSpec::RelevantSubset { alpha_r: 0.25, base: BaseDist::symmetric_sign() };
        let sh = shape(8, 1);
        let f = p.sample(&sh, 77).unwrap();
        // s + r_n = 1 + 2 = 3 relevant bits.
        for idx in 0..256usize {
            assert_eq!(f.values()[idx], f.values()[idx & 0b111]);
        }
    }

    #[test]
    fn known_effects_example_has_signed_halves() {
        let p = PriorSpec::KnownEffects {
            known: vec![1],
            conditionals: vec![
                BaseDist::Uniform { low: -1.0, high: 0.0 },
                BaseDist::Uniform { low: 0.0, high: 1.0 },
            ],
        };
        let sh = shape(4, 0);
        let f = p.sample(&sh, 3).unwrap();
        for (idx, v) in f.values().iter().enumerate() {
            if idx & 1 == 1 {
                assert!(*v > 0.0);
            } else {
                assert!(*v < 0.0);
            }
        }
        assert_eq!(p.type_mean(&sh), 0.0);
        assert_eq!(p.entry_mean(&sh, CovariateVector::ones(4)), 0.5);
    }

    #[test]
    fn configuration_errors() {
        let sh = shape(4, 0);
        let wide = PriorSpec::iid(BaseDist::TwoPoint { low: -2.0, high: 2.0, p_high: 0.5 });
        assert!(matches!(wide.sample(&sh, 0), Err(Error::Config(_))));
        let bad_k = PriorSpec::KnownEffects { known: vec![9], conditionals: vec![BaseDist::symmetric_sign(); 2] };
        assert!(bad_k.validate(&sh).is_err());
        let short = PriorSpec::KnownEffects { known: vec![1, 2], conditionals: vec![BaseDist::symmetric_sign(); 2] };
        assert!(short.validate(&sh).is_err());
        let mix = PriorSpec::FiniteMixture {
            components: vec![MixtureComponent { weight: 0.4, base: BaseDist::symmetric_sign() }],
        };
        assert!(mix.validate(&sh).is_err());
    }

    #[test]
    fn base_moments_match_support() {
        for base in [
            BaseDist::symmetric_sign(),
            BaseDist::TwoPoint { low: 0.0, high: 1.0, p_high: 0.3 },
            BaseDist::UniformGrid { low: -1.0, high: 1.0, points: 5 },
            BaseDist::Uniform { low: 0.0, high: 1.0 },
        ] {
            let atoms = base.support();
            let mean: f64 = atoms.iter().map(|(v, p)| v * p).sum();
            let var: f64 = atoms.iter().map(|(v, p)| p * (v - mean).powi(2)).sum();
            assert!((mean - base.mean()).abs() < 1e-12, "{base}");
            assert!((var - base.variance()).abs() < 1e-12, "{base}");
        }
    }

    #[test]
    fn sums_have_the_right_moments() {
        let mut rng = replication_rng(1, 0);
        for base in [BaseDist::symmetric_sign(), BaseDist::UniformGrid { low: 0.0, high: 1.0, points: 3 }] {
            let m = 100;
            let draws: Vec<f64> = (0..20_000).map(|_| base.sample_sum(m, &mut rng)).collect();
            let (mean, var) = mean_and_variance(&draws);
            let target_var = m as f64 * base.variance();
            assert!((mean - m as f64 * base.mean()).abs() < 4.0 * (target_var / 20_000.0).sqrt());
            assert!((var / target_var - 1.0).abs() < 0.05, "{base}: {var} vs {target_var}");
        }
    }

    #[test]
    fn noise_zero_variance_is_exact() {
        let f = TypeFunction::constant(3, 0.4).unwrap();
        let noise = NoiseSpec { schedule: NoiseSchedule::Constant { variance: 0.0 }, family: NoiseFamily::Gaussian, accumulating: false };
        assert_eq!(sample_noisy_type(&f, CovariateVector::ones(3), &noise, 3, 1).unwrap(), 0.4);
    }

    #[test]
    fn noise_moments() {
        for family in [NoiseFamily::Gaussian, NoiseFamily::Uniform] {
            let noise = NoiseSpec { schedule: NoiseSchedule::Constant { variance: 0.25 }, family, accumulating: true };
            let mut rng = replication_rng(2, 0);
            let draws: Vec<f64> = (0..100_000).map(|_| noise.sample(5, &mut rng).unwrap()).collect();
            let (mean, var) = mean_and_variance(&draws);
            assert!(mean.abs() < 4.0 * (var / 1e5).sqrt());
            assert!((var / 0.25 - 1.0).abs() < 0.05, "{family:?}: {var}");
        }
    }

    #[test]
    fn noise_schedule_errors() {
        let table = NoiseSpec {
            schedule: NoiseSchedule::Table { entries: vec![(4, 0.1), (8, 0.2)] },
            family: NoiseFamily::Gaussian,
            accumulating: true,
        };
        assert!(table.validate().is_err());
        let missing = NoiseSpec { accumulating: false, ..table };
        missing.validate().unwrap();
        assert!(matches!(missing.variance(5), Err(Error::Config(_))));
        assert!((missing.density_at_zero() - 0.398_942_280_4).abs() < 1e-9);
    }

    #[test]
    fn finite_law_enumeration_weights_sum_to_one() {
        let sh = shape(2, 0);
        for prior in [
            PriorSpec::UniformBinary,
            PriorSpec::SingleRelevant,
            PriorSpec::FiniteMixture {
                components: vec![
                    MixtureComponent { weight: 0.25, base: BaseDist::symmetric_sign() },
                    MixtureComponent { weight: 0.75, base: BaseDist::PointMass { value: 0.0 } },
                ],
            },
        ] {
            let laws = prior.finite_law(&sh, 1 << 16).unwrap();
            let mut total = 0.0;
            let mut count = 0;
            for law in &laws {
                law.for_each(4, |p, _| {
                    total += p;
                    count += 1;
                });
            }
            assert!((total - 1.0).abs() < 1e-12, "{prior}");
            assert!(count >= 1);
        }
        assert!(PriorSpec::Structural.finite_law(&sh, 1 << 16).is_none());
        assert!(PriorSpec::UniformBinary.finite_law(&shape(5, 0), 1 << 16).is_none());
    }

    #[test]
    fn prior_spec_toml_round_trip() {
        let p = PriorSpec::KnownEffects {
            known: vec![1],
            conditionals: vec![BaseDist::Uniform { low: -1.0, high: 0.0 }, BaseDist::Uniform { low: 0.0, high: 1.0 }],
        };
        let text = toml::to_string(&p).unwrap();
        assert_eq!(toml::from_str::<PriorSpec>(&text).unwrap(), p);
        let parsed: PriorSpec =
            toml::from_str("family = \"iid\"\nbase = { kind = \"two_point\", low = -1.0, high = 1.0 }").unwrap();
        assert_eq!(parsed, PriorSpec::iid(BaseDist::symmetric_sign()));
    }
}
