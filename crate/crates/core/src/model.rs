//! Covariate vectors, type functions, cylinder sets and exact posterior means.
//!
//! A covariate vector of length `n` is stored as an integer whose bit `i` is the
//! value of covariate `i + 1`. A [`TypeFunction`] is the dense table of its `2^n`
//! type values in that index order.

use std::fmt;
use std::io::{BufRead, Write};

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{binomial_u128, pairwise_sum};
use crate::utility::UtilitySpec;

/// Largest `n` for which a full type-function table may be materialized.
pub const EXACT_N_CAP: u32 = 26;

/// Absorbs representation error in `alpha * n` (e.g. `0.29 * 100`) before flooring.
const FLOOR_SLACK: f64 = 1e-9;

/// Dimensions of the model: covariate counts, evaluator fractions and the type bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelShape {
    n: u32,
    s: u32,
    alpha_h: f64,
    alpha_b: f64,
    ybar: f64,
}

impl ModelShape {
    pub fn new(n: u32, s: u32, alpha_h: f64, alpha_b: f64, ybar: f64) -> Result<Self> {
        if n == 0 || n > 63 {
            return Err(Error::InvalidShape(format!("n = {n} must lie in 1..=63")));
        }
        if s >= n {
            return Err(Error::InvalidShape(format!("s = {s} must be < n = {n}")));
        }
        if !(0.0..1.0).contains(&alpha_h) {
            return Err(Error::InvalidShape(format!("alpha_h = {alpha_h} must lie in [0, 1)")));
        }
        if !(alpha_b > 0.0 && alpha_b <= 1.0) {
            return Err(Error::InvalidShape(format!("alpha_b = {alpha_b} must lie in (0, 1]")));
        }
        if !(ybar >= 0.0 && ybar.is_finite()) {
            return Err(Error::InvalidShape(format!("ybar = {ybar} must be finite and >= 0")));
        }
        let shape = Self { n, s, alpha_h, alpha_b, ybar };
        let free = n - s;
        if shape.human_capacity() > free || shape.blackbox_size() > free {
            return Err(Error::InvalidShape(format!(
                "h_n = {} and b_n = {} must not exceed n - s = {free}",
                shape.human_capacity(),
                shape.blackbox_size()
            )));
        }
        Ok(shape)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn s(&self) -> u32 {
        self.s
    }

    pub fn alpha_h(&self) -> f64 {
        self.alpha_h
    }

    pub fn alpha_b(&self) -> f64 {
        self.alpha_b
    }

    pub fn ybar(&self) -> f64 {
        self.ybar
    }

    /// `h_n = floor(alpha_h * n)`.
    pub fn human_capacity(&self) -> u32 {
        floor_fraction(self.alpha_h, self.n)
    }

    /// `b_n = floor(alpha_b * n)`.
    pub fn blackbox_size(&self) -> u32 {
        floor_fraction(self.alpha_b, self.n)
    }

    pub fn nonstandard_count(&self) -> u32 {
        self.n - self.s
    }

    pub fn full_mask(&self) -> u64 {
        low_bits(self.n)
    }

    pub fn standard_mask(&self) -> u64 {
        low_bits(self.s)
    }

    pub fn nonstandard_mask(&self) -> u64 {
        self.full_mask() & !self.standard_mask()
    }

    /// Number of covariate vectors, refusing tables beyond [`EXACT_N_CAP`].
    pub fn table_len(&self) -> Result<usize> {
        if self.n > EXACT_N_CAP {
            return Err(Error::TooLarge { n: self.n, cap: EXACT_N_CAP });
        }
        Ok(1usize << self.n)
    }

    /// Comparison operations need a strictly larger black-box set.
    pub fn require_comparable(&self) -> Result<()> {
        if self.alpha_h < self.alpha_b {
            Ok(())
        } else {
            Err(Error::InvalidShape(format!(
                "comparison requires alpha_h < alpha_b (got {} >= {})",
                self.alpha_h, self.alpha_b
            )))
        }
    }

    /// Same shape with a different `n`.
    pub fn with_n(&self, n: u32) -> Result<Self> {
        Self::new(n, self.s, self.alpha_h, self.alpha_b, self.ybar)
    }
}

pub(crate) fn floor_fraction(alpha: f64, n: u32) -> u32 {
    (alpha * f64::from(n) + FLOOR_SLACK).floor() as u32
}

pub(crate) fn low_bits(k: u32) -> u64 {
    if k >= 64 {
        u64::MAX
    } else {
        (1u64 << k) - 1
    }
}

/// A binary covariate vector `(x_1, ..., x_n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CovariateVector {
    n: u32,
    bits: u64,
}

impl CovariateVector {
    /// Builds from values listed as `x_1, x_2, ...`; every entry must be 0 or 1.
    pub fn from_values(values: &[u8]) -> Result<Self> {
        if values.is_empty() || values.len() > 63 {
            return Err(Error::InvalidCovariates(format!(
                "length {} must lie in 1..=63",
                values.len()
            )));
        }
        let mut bits = 0u64;
        for (i, &v) in values.iter().enumerate() {
            match v {
                0 => {}
                1 => bits |= 1 << i,
                other => {
                    return Err(Error::InvalidCovariates(format!(
                        "x_{} = {other} is not binary",
                        i + 1
                    )))
                }
            }
        }
        Ok(Self { n: values.len() as u32, bits })
    }

    pub fn from_index(n: u32, index: u64) -> Result<Self> {
        if n == 0 || n > 63 || index > low_bits(n) {
            return Err(Error::InvalidCovariates(format!(
                "index {index} out of range for n = {n}"
            )));
        }
        Ok(Self { n, bits: index })
    }

    pub fn ones(n: u32) -> Self {
        Self { n, bits: low_bits(n) }
    }

    pub fn zeros(n: u32) -> Self {
        Self { n, bits: 0 }
    }

    pub fn len(&self) -> u32 {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Canonical table index.
    pub fn index(&self) -> u64 {
        self.bits
    }

    /// Value of covariate `i` (1-based).
    pub fn get(&self, i: usize) -> u8 {
        assert!(i >= 1 && i <= self.n as usize, "covariate index {i} out of range");
        ((self.bits >> (i - 1)) & 1) as u8
    }

    pub fn ones_count(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn values(&self) -> Vec<u8> {
        (1..=self.n as usize).map(|i| self.get(i)).collect()
    }

    pub(crate) fn check_len(&self, shape: &ModelShape) -> Result<()> {
        if self.n == shape.n() {
            Ok(())
        } else {
            Err(Error::InvalidCovariates(format!(
                "vector has length {} but n = {}",
                self.n,
                shape.n()
            )))
        }
    }
}

impl fmt::Display for CovariateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for i in 1..=self.n as usize {
            if i > 1 {
                write!(f, ",")?;
            }
            write!(f, "{}", self.get(i))?;
        }
        write!(f, ")")
    }
}

/// Dense table of type values, one per covariate vector.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeFunction {
    n: u32,
    values: Vec<f64>,
}

impl TypeFunction {
    pub fn new(n: u32, values: Vec<f64>) -> Result<Self> {
        if n == 0 || n > EXACT_N_CAP {
            return Err(Error::TooLarge { n, cap: EXACT_N_CAP });
        }
        if values.len() != 1usize << n {
            return Err(Error::LengthMismatch(format!(
                "type table for n = {n} needs {} entries, got {}",
                1usize << n,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse(format!("type value at index {i} is not finite")));
        }
        Ok(Self { n, values })
    }

    pub fn constant(n: u32, value: f64) -> Result<Self> {
        if n == 0 || n > EXACT_N_CAP {
            return Err(Error::TooLarge { n, cap: EXACT_N_CAP });
        }
        Self::new(n, vec![value; 1usize << n])
    }

    pub fn from_fn(n: u32, mut rule: impl FnMut(CovariateVector) -> f64) -> Result<Self> {
        if n == 0 || n > EXACT_N_CAP {
            return Err(Error::TooLarge { n, cap: EXACT_N_CAP });
        }
        let values = (0..1u64 << n).map(|i| rule(CovariateVector { n, bits: i })).collect();
        Self::new(n, values)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, x: CovariateVector) -> f64 {
        self.values[x.index() as usize]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn check_bounds(&self, ybar: f64) -> Result<()> {
        match self.values.iter().position(|v| v.abs() > ybar) {
            None => Ok(()),
            Some(index) => Err(Error::OutOfBounds { index, value: self.values[index], ybar }),
        }
    }

    pub(crate) fn check_shape(&self, shape: &ModelShape) -> Result<()> {
        if self.n != shape.n() {
            return Err(Error::LengthMismatch(format!(
                "type function has n = {} but shape has n = {}",
                self.n,
                shape.n()
            )));
        }
        self.check_bounds(shape.ybar())
    }
}

/// A type function together with the header fields of its text serialization.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeFunctionRecord {
    pub s: u32,
    pub ybar: f64,
    pub function: TypeFunction,
}

impl TypeFunctionRecord {
    /// Text layout: a header line `n s ybar`, then one value per line in index order.
    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{} {} {}", self.function.n(), self.s, self.ybar)?;
        for v in self.function.values() {
            writeln!(out, "{v}")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_text(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("formatted floats are ASCII")
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input
            .lines()
            .enumerate()
            .map(|(i, l)| l.map(|l| (i + 1, l)))
            .filter(|r| r.as_ref().map_or(true, |(_, l)| !l.trim().is_empty()));
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Parse("missing header line `n s ybar`".into()))?
            .map_err(|e| Error::Parse(e.to_string()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse(format!("line 1: expected `n s ybar`, got `{header}`")));
        }
        let n: u32 = fields[0].parse().map_err(|e| Error::Parse(format!("line 1: n: {e}")))?;
        let s: u32 = fields[1].parse().map_err(|e| Error::Parse(format!("line 1: s: {e}")))?;
        let ybar: f64 =
            fields[2].parse().map_err(|e| Error::Parse(format!("line 1: ybar: {e}")))?;
        let mut values = Vec::new();
        for line in lines {
            let (lineno, text) = line.map_err(|e| Error::Parse(e.to_string()))?;
            for tok in text.split_whitespace() {
                values.push(
                    tok.parse::<f64>()
                        .map_err(|e| Error::Parse(format!("line {lineno}: `{tok}`: {e}")))?,
                );
            }
        }
        let function = TypeFunction::new(n, values)?;
        if s >= n {
            return Err(Error::Parse(format!("line 1: s = {s} must be < n = {n}")));
        }
        function.check_bounds(ybar)?;
        Ok(Self { s, ybar, function })
    }
}

/// A set of nonstandard covariate indices, stored as a bitmask (bit `i` is covariate `i + 1`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DisclosureSet {
    mask: u64,
}

impl DisclosureSet {
    pub fn empty() -> Self {
        Self { mask: 0 }
    }

    /// Builds from 1-based indices, each of which must be a nonstandard covariate.
    pub fn from_indices(shape: &ModelShape, indices: &[usize]) -> Result<Self> {
        let mut mask = 0u64;
        for &i in indices {
            if i <= shape.s() as usize || i > shape.n() as usize {
                return Err(Error::InvalidDisclosure(format!(
                    "covariate {i} is not in the nonstandard range {}..={}",
                    shape.s() + 1,
                    shape.n()
                )));
            }
            mask |= 1 << (i - 1);
        }
        Ok(Self { mask })
    }

    pub(crate) fn from_mask(mask: u64) -> Self {
        Self { mask }
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn len(&self) -> u32 {
        self.mask.count_ones()
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    pub fn contains(&self, i: usize) -> bool {
        (1..=64).contains(&i) && self.mask >> (i - 1) & 1 == 1
    }

    pub fn indices(&self) -> Vec<usize> {
        (0..64).filter(|b| self.mask >> b & 1 == 1).map(|b| b + 1).collect()
    }

    pub fn union(&self, other: &Self) -> Self {
        Self { mask: self.mask | other.mask }
    }

    pub fn is_disjoint(&self, other: &Self) -> bool {
        self.mask & other.mask == 0
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.mask & !other.mask == 0
    }

    pub(crate) fn validate(&self, shape: &ModelShape) -> Result<()> {
        if self.mask & !shape.nonstandard_mask() != 0 {
            return Err(Error::InvalidDisclosure(format!(
                "{self} is not contained in the nonstandard range {}..={}",
                shape.s() + 1,
                shape.n()
            )));
        }
        Ok(())
    }

    /// Checks `|A| <= h_n`.
    pub fn check_capacity(&self, shape: &ModelShape) -> Result<()> {
        if self.len() > shape.human_capacity() {
            return Err(Error::InvalidDisclosure(format!(
                "{self} exceeds the human capacity h_n = {}",
                shape.human_capacity()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for DisclosureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let idx: Vec<String> = self.indices().iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", idx.join(","))
    }
}

/// Revealed covariate values: bit `i` of `values` is the value of covariate `i + 1`
/// for every covariate in `mask` (standard covariates included).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Disclosure {
    pub mask: u64,
    pub values: u64,
}

impl Disclosure {
    /// Truthful disclosure of `x` on `mask`.
    pub fn truthful(x: CovariateVector, mask: u64) -> Self {
        Self { mask, values: x.index() & mask }
    }

    pub fn is_feasible_for(&self, x: CovariateVector) -> bool {
        x.index() & self.mask == self.values
    }
}

impl fmt::Display for Disclosure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        let mut first = true;
        for i in 0..64 {
            if self.mask >> i & 1 == 1 {
                if !first {
                    write!(f, ",")?;
                }
                write!(f, "x{}={}", i + 1, self.values >> i & 1)?;
                first = false;
            }
        }
        write!(f, "}}")
    }
}

/// The evaluator's posterior mean of the agent's type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub yhat: f64,
}

/// Table indices of all vectors agreeing with `x` on the standard covariates and on `A`,
/// in ascending order.
pub fn cylinder(shape: &ModelShape, x: CovariateVector, disclosed: DisclosureSet) -> Result<Vec<usize>> {
    disclosed.validate(shape)?;
    x.check_len(shape)?;
    shape.table_len()?;
    let fixed = shape.standard_mask() | disclosed.mask();
    let free = shape.full_mask() & !fixed;
    let base = x.index() & fixed;
    let mut out = Vec::with_capacity(1usize << free.count_ones());
    let mut sub = 0u64;
    loop {
        out.push((base | sub) as usize);
        sub = sub.wrapping_sub(free) & free;
        if sub == 0 {
            break;
        }
    }
    Ok(out)
}

/// Exact conditional mean of `f` over the cylinder of `x` and `A`.
pub fn posterior_mean(
    shape: &ModelShape,
    f: &TypeFunction,
    x: CovariateVector,
    disclosed: DisclosureSet,
) -> Result<Evaluation> {
    if f.n() != shape.n() {
        return Err(Error::LengthMismatch(format!(
            "type function has n = {} but shape has n = {}",
            f.n(),
            shape.n()
        )));
    }
    let cells = cylinder(shape, x, disclosed)?;
    let gathered: Vec<f64> = cells.iter().map(|&i| f.values()[i]).collect();
    Ok(Evaluation { yhat: pairwise_sum(&gathered) / gathered.len() as f64 })
}

/// The agent's payoff `u(yhat_x(A), f(x))`.
pub fn agent_payoff(
    shape: &ModelShape,
    u: &UtilitySpec,
    f: &TypeFunction,
    x: CovariateVector,
    disclosed: DisclosureSet,
) -> Result<f64> {
    let eval = posterior_mean(shape, f, x, disclosed)?;
    Ok(u.eval(eval.yhat, f.value(x)))
}

/// The black box's fixed set `{s+1, ..., s+b_n}`.
pub fn blackbox_set(shape: &ModelShape) -> DisclosureSet {
    DisclosureSet::from_mask(low_bits(shape.blackbox_size()) << shape.s())
}

/// `K_n = sum_{j=0}^{h_n} C(n - s, j)`, the number of admissible disclosure sets.
pub fn count_disclosure_sets(shape: &ModelShape) -> BigUint {
    let m = shape.nonstandard_count();
    (0..=shape.human_capacity())
        .map(|j| BigUint::from(binomial_u128(m, j)))
        .sum()
}

/// `K_n` as a float, for bounds that only need `log K_n`.
pub fn disclosure_count_f64(shape: &ModelShape) -> f64 {
    let m = shape.nonstandard_count();
    (0..=shape.human_capacity()).map(|j| binomial_u128(m, j) as f64).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(n: u32, s: u32, ah: f64, ab: f64) -> ModelShape {
        ModelShape::new(n, s, ah, ab, 1.0).unwrap()
    }

    fn x(v: &[u8]) -> CovariateVector {
        CovariateVector::from_values(v).unwrap()
    }

    #[test]
    fn cylinder_with_one_disclosed_covariate() {
        let sh = shape(2, 0, 0.5, 1.0);
        let a = DisclosureSet::from_indices(&sh, &[2]).unwrap();
        let cyl = cylinder(&sh, x(&[1, 1]), a).unwrap();
        // (0,1) and (1,1): indices 2 and 3.
        assert_eq!(cyl, vec![2, 3]);
    }

    #[test]
    fn cylinder_fixed_by_standard_covariates_only() {
        let sh = shape(3, 1, 0.3, 0.6);
        let cyl = cylinder(&sh, x(&[1, 0, 0]), DisclosureSet::empty()).unwrap();
        assert_eq!(cyl.len(), 4);
        assert!(cyl.iter().all(|&i| i & 1 == 1));
    }

    #[test]
    fn full_disclosure_is_singleton() {
        let sh = shape(2, 0, 0.5, 1.0);
        let a = DisclosureSet::from_indices(&sh, &[1, 2]).unwrap();
        assert_eq!(cylinder(&sh, x(&[1, 1]), a).unwrap(), vec![3]);
    }

    #[test]
    fn disclosing_a_standard_covariate_is_rejected() {
        let sh = shape(3, 1, 0.3, 0.6);
        assert!(matches!(
            DisclosureSet::from_indices(&sh, &[1]),
            Err(Error::InvalidDisclosure(_))
        ));
        assert!(matches!(
            DisclosureSet::from_indices(&sh, &[4]),
            Err(Error::InvalidDisclosure(_))
        ));
        let bad = DisclosureSet::from_mask(1);
        assert!(cylinder(&sh, x(&[1, 0, 0]), bad).is_err());
    }

    #[test]
    fn two_covariate_posteriors() {
        // Y00, Y10, Y01, Y11 in index order (bit 0 = x1).
        let sh = shape(2, 0, 0.5, 1.0);
        let (y00, y10, y01, y11) = (0.1, 0.7, -0.4, 0.9);
        let f = TypeFunction::new(2, vec![y00, y10, y01, y11]).unwrap();
        let one = DisclosureSet::from_indices(&sh, &[1]).unwrap();
        let z1 = posterior_mean(&sh, &f, x(&[1, 1]), one).unwrap().yhat;
        assert!((z1 - (y10 + y11) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn constant_function_evaluates_to_constant() {
        let sh = shape(4, 1, 0.5, 0.75);
        let f = TypeFunction::constant(4, 0.3).unwrap();
        for idx in 0..16 {
            let xv = CovariateVector::from_index(4, idx).unwrap();
            for mask in [0u64, 2, 6, 14] {
                let a = DisclosureSet::from_mask(mask);
                assert_eq!(posterior_mean(&sh, &f, xv, a).unwrap().yhat, 0.3);
            }
        }
    }

    fn high_voc(n: u32, c: f64) -> TypeFunction {
        TypeFunction::from_fn(n, |v| if v.get(1) == v.get(2) { c } else { -c }).unwrap()
    }

    #[test]
    fn revealing_the_moderating_covariate_moves_the_evaluation() {
        let sh = shape(5, 0, 0.2, 0.8);
        let f = high_voc(5, 0.6);
        let a = DisclosureSet::from_indices(&sh, &[2]).unwrap();
        // A = {2} alone still averages over x1: expectation zero.
        assert!(posterior_mean(&sh, &f, CovariateVector::ones(5), a).unwrap().yhat.abs() < 1e-15);
        // With x1 standard, revealing x2 = 1 pins the type at c.
        let sh1 = shape(5, 1, 0.2, 0.8);
        let a1 = DisclosureSet::from_indices(&sh1, &[2]).unwrap();
        let z = posterior_mean(&sh1, &f, CovariateVector::ones(5), a1).unwrap().yhat;
        assert!((z - 0.6).abs() < 1e-15);
        let u = UtilitySpec::Linear;
        let pay = agent_payoff(&sh1, &u, &f, CovariateVector::ones(5), a1).unwrap();
        assert!((pay - 0.6).abs() < 1e-15);
    }

    #[test]
    fn squared_error_payoff_vanishes_for_constants() {
        let sh = shape(3, 0, 0.4, 0.7);
        let f = TypeFunction::constant(3, -0.2).unwrap();
        let u = UtilitySpec::SquaredError;
        for mask in [0u64, 1, 3] {
            let p = agent_payoff(&sh, &u, &f, CovariateVector::ones(3), DisclosureSet::from_mask(mask))
                .unwrap();
            assert!(p.abs() < 1e-30, "{p}");
        }
    }

    #[test]
    fn linear_payoff_with_nothing_disclosed_is_the_prior_cylinder_mean() {
        let sh = shape(3, 1, 0.4, 0.7);
        let f = TypeFunction::new(3, (0..8).map(|i| f64::from(i) / 10.0).collect()).unwrap();
        let xv = x(&[1, 0, 1]);
        // Entries with x1 = 1: indices 1, 3, 5, 7.
        let expected = (0.1 + 0.3 + 0.5 + 0.7) / 4.0;
        let p = agent_payoff(&sh, &UtilitySpec::Linear, &f, xv, DisclosureSet::empty()).unwrap();
        assert!((p - expected).abs() < 1e-15);
    }

    #[test]
    fn blackbox_sets() {
        assert_eq!(blackbox_set(&shape(10, 1, 0.1, 0.9)).indices(), (2..=10).collect::<Vec<_>>());
        assert_eq!(blackbox_set(&shape(14, 0, 0.1, 0.9)).indices(), (1..=12).collect::<Vec<_>>());
        assert_eq!(blackbox_set(&shape(2, 0, 0.0, 0.5)).indices(), vec![1]);
    }

    #[test]
    fn disclosure_set_counts() {
        assert_eq!(count_disclosure_sets(&shape(2, 0, 0.5, 1.0)), BigUint::from(3u32));
        assert_eq!(count_disclosure_sets(&shape(4, 0, 0.0, 1.0)), BigUint::from(1u32));
        // Pascal-triangle oracle for n = 20, h = 10.
        let mut row = vec![BigUint::from(1u32)];
        for _ in 0..20 {
            let mut next = vec![BigUint::from(1u32)];
            for w in row.windows(2) {
                next.push(&w[0] + &w[1]);
            }
            next.push(BigUint::from(1u32));
            row = next;
        }
        let oracle: BigUint = row[..=10].iter().sum();
        assert_eq!(count_disclosure_sets(&shape(20, 0, 0.5, 1.0)), oracle);
        assert_eq!(oracle, BigUint::from(616_666u32));
    }

    #[test]
    fn shape_validation() {
        assert!(ModelShape::new(10, 10, 0.1, 0.9, 1.0).is_err());
        assert!(ModelShape::new(10, 0, 1.0, 0.9, 1.0).is_err());
        assert!(ModelShape::new(10, 0, 0.1, 0.0, 1.0).is_err());
        // b_n = 10 > n - s = 9
        assert!(ModelShape::new(10, 1, 0.1, 1.0, 1.0).is_err());
        assert_eq!(shape(60, 0, 0.29, 0.9).human_capacity(), 17);
        assert!(ModelShape::new(64, 0, 0.1, 0.9, 1.0).is_err());
        assert!(shape(10, 0, 0.5, 0.5).require_comparable().is_err());
        assert!(ModelShape::new(30, 0, 0.5, 0.9, 1.0).unwrap().table_len().is_err());
    }

    #[test]
    fn text_round_trip_and_errors() {
        let f = TypeFunction::new(2, vec![0.0, -0.25, 1.0 / 3.0, 1.0]).unwrap();
        let rec = TypeFunctionRecord { s: 0, ybar: 1.0, function: f };
        let text = rec.to_text();
        assert!(text.starts_with("2 0 1\n"));
        assert_eq!(TypeFunctionRecord::read_text(text.as_bytes()).unwrap(), rec);
        assert!(TypeFunctionRecord::read_text("2 0 1\n0\n1\n".as_bytes()).is_err());
        assert!(TypeFunctionRecord::read_text("2 0 0.5\n0\n1\n0\n0\n".as_bytes()).is_err());
        let err = TypeFunctionRecord::read_text("1 0 1\n0\nabc\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn covariate_vector_display_and_bits() {
        let v = x(&[1, 0, 1]);
        assert_eq!(v.index(), 0b101);
        assert_eq!(v.to_string(), "(1,0,1)");
        assert!(CovariateVector::from_values(&[2]).is_err());
    }
}
