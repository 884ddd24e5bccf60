//! Posterior means for every admissible disclosure set of one agent.
//!
//! Two interchangeable strategies compute `Z_H` for all `H` with `|H| <= h`:
//! a subset-sum (zeta) transform over the free covariates, costing about
//! `(m + 1) 2^m`, or direct summation of each cylinder, costing
//! `sum_j C(m, j) 2^(m - j)`. The cheaper one is used; if even that exceeds the
//! budget the plan is refused.

use crate::error::{Error, Result};
use crate::model::{CovariateVector, DisclosureSet, ModelShape, TypeFunction};
use crate::numeric::{binomial_u128, pairwise_sum};
use crate::utility::UtilitySpec;

/// Default cap on the work of one scan, in table-entry operations.
pub const DEFAULT_BUDGET: u128 = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanMethod {
    Transform,
    Direct,
}

/// Best and worst disclosures for one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContextScan {
    /// Payoff with no disclosure beyond the standard and known covariates.
    pub baseline: f64,
    pub best: f64,
    pub best_set: DisclosureSet,
    pub worst: f64,
    pub worst_set: DisclosureSet,
}

impl ContextScan {
    pub fn value_of_context(&self) -> f64 {
        self.best - self.baseline
    }
}

/// Precomputed enumeration of the admissible sets for one shape and known set.
#[derive(Debug, Clone)]
pub struct ScanPlan {
    n: u32,
    /// Standard plus known covariates.
    fixed: u64,
    /// Free nonstandard covariates.
    free: u64,
    m: u32,
    /// `(local mask, global mask)` in lexicographic order of index lists.
    subsets: Vec<(u64, u64)>,
    /// Global positions of every local mask.
    offsets: Vec<u64>,
    method: ScanMethod,
    cost: u128,
}

impl ScanPlan {
    pub fn new(shape: &ModelShape, known: DisclosureSet, budget: u128) -> Result<Self> {
        known.validate(shape)?;
        shape.table_len()?;
        let fixed = shape.standard_mask() | known.mask();
        let free = shape.full_mask() & !fixed;
        let m = free.count_ones();
        let cap = shape.human_capacity().min(m);
        let (method, cost) = choose_method(m, cap);
        if cost > budget {
            return Err(Error::Budget { n: shape.n(), cost, budget });
        }
        let positions: Vec<u32> = (0..shape.n()).filter(|i| free >> i & 1 == 1).collect();
        let mut subsets = Vec::new();
        lex_subsets(&positions, cap, 0, (0, 0), &mut subsets);
        let mut offsets = vec![0u64; 1usize << m];
        for z in 1..offsets.len() {
            let low = z.trailing_zeros();
            offsets[z] = offsets[z & (z - 1)] | 1 << positions[low as usize];
        }
        Ok(Self { n: shape.n(), fixed, free, m, subsets, offsets, method, cost })
    }

    pub fn method(&self) -> ScanMethod {
        self.method
    }

    pub fn cost(&self) -> u128 {
        self.cost
    }

    /// Number of admissible sets.
    pub fn set_count(&self) -> usize {
        self.subsets.len()
    }

    /// Calls `visit(H, Z_H)` for every admissible `H`, in lexicographic order of
    /// index lists (the empty set first).
    pub fn for_each_mean(
        &self,
        values: &[f64],
        x: u64,
        scratch: &mut Vec<f64>,
        mut visit: impl FnMut(DisclosureSet, f64),
    ) {
        debug_assert_eq!(values.len(), 1usize << self.n);
        let fx = values[x as usize];
        let base = x & self.fixed;
        let xfree = x & self.free;
        let at = |z: usize| values[(base | (xfree ^ self.offsets[z])) as usize] - fx;
        let full = (1u64 << self.m) - 1;
        match self.method {
            ScanMethod::Transform => {
                scratch.clear();
                scratch.extend((0..1usize << self.m).map(at));
                zeta_transform(scratch, self.m);
                for &(local, global) in &self.subsets {
                    let open = full ^ local;
                    let z = fx + scratch[open as usize] / (1u64 << open.count_ones()) as f64;
                    visit(DisclosureSet::from_mask(global), z);
                }
            }
            ScanMethod::Direct => {
                for &(local, global) in &self.subsets {
                    let open = full ^ local;
                    scratch.clear();
                    let mut sub = 0u64;
                    loop {
                        scratch.push(at(sub as usize));
                        sub = sub.wrapping_sub(open) & open;
                        if sub == 0 {
                            break;
                        }
                    }
                    let z = fx + pairwise_sum(scratch) / scratch.len() as f64;
                    visit(DisclosureSet::from_mask(global), z);
                }
            }
        }
    }

    /// Best and worst payoffs `u(Z_H, y)`. Ties go to the first set in
    /// lexicographic order.
    pub fn scan(&self, values: &[f64], x: u64, u: &UtilitySpec, y: f64, scratch: &mut Vec<f64>) -> ContextScan {
        let mut out: Option<ContextScan> = None;
        self.for_each_mean(values, x, scratch, |set, z| {
            let p = u.eval(z, y);
            match out.as_mut() {
                None => {
                    out = Some(ContextScan { baseline: p, best: p, best_set: set, worst: p, worst_set: set })
                }
                Some(s) => {
                    if p > s.best {
                        s.best = p;
                        s.best_set = set;
                    }
                    if p < s.worst {
                        s.worst = p;
                        s.worst_set = set;
                    }
                }
            }
        });
        out.expect("the empty set is always admissible")
    }
}

/// Cheaper of the two strategies and its cost.
pub fn choose_method(m: u32, cap: u32) -> (ScanMethod, u128) {
    let size = 1u128 << m;
    let sets: u128 = (0..=cap).map(|j| binomial_u128(m, j)).sum();
    let transform = (u128::from(m) + 1) * size + sets;
    let direct: u128 = (0..=cap).map(|j| binomial_u128(m, j) * (size >> j)).sum();
    if direct <= transform {
        (ScanMethod::Direct, direct)
    } else {
        (ScanMethod::Transform, transform)
    }
}

fn lex_subsets(positions: &[u32], cap: u32, start: usize, cur: (u64, u64), out: &mut Vec<(u64, u64)>) {
    out.push(cur);
    if cur.0.count_ones() == cap {
        return;
    }
    for j in start..positions.len() {
        let next = (cur.0 | 1 << j, cur.1 | 1 << positions[j]);
        lex_subsets(positions, cap, j + 1, next, out);
    }
}

/// In place: `a[M] <- sum over z subset of M of a[z]`.
fn zeta_transform(a: &mut [f64], m: u32) {
    for i in 0..m {
        let bit = 1usize << i;
        for block in a.chunks_mut(bit << 1) {
            let (lo, hi) = block.split_at_mut(bit);
            for (h, l) in hi.iter_mut().zip(lo.iter()) {
                *h += *l;
            }
        }
    }
}

/// Mean of `f` over vectors agreeing with `x` on `fixed`.
pub(crate) fn cylinder_mean(values: &[f64], x: u64, fixed: u64, full: u64, scratch: &mut Vec<f64>) -> f64 {
    let open = full & !fixed;
    let base = x & fixed;
    scratch.clear();
    let mut sub = 0u64;
    loop {
        scratch.push(values[(base | sub) as usize]);
        sub = sub.wrapping_sub(open) & open;
        if sub == 0 {
            break;
        }
    }
    pairwise_sum(scratch) / scratch.len() as f64
}

/// All admissible sets with their posterior means, in lexicographic order.
pub fn disclosure_posteriors(
    f: &TypeFunction,
    x: CovariateVector,
    shape: &ModelShape,
    known: DisclosureSet,
) -> Result<Vec<(DisclosureSet, f64)>> {
    f.check_shape(shape)?;
    x.check_len(shape)?;
    let plan = ScanPlan::new(shape, known, DEFAULT_BUDGET)?;
    let mut out = Vec::with_capacity(plan.set_count());
    plan.for_each_mean(f.values(), x.index(), &mut Vec::new(), |h, z| out.push((h, z)));
    Ok(out)
}
