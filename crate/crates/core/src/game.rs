//! Pure-strategy perfect Bayesian equilibria of the disclosure game at tiny `n`.
//!
//! Every agent type `x` truthfully reveals its standard covariates plus up to
//! `h_n` chosen nonstandard ones. On path the evaluator reports the mean of `f`
//! over the types sending a disclosure; off path any belief supported on the
//! consistent cylinder is allowed, so a deviation is deterred when some value in
//! the cylinder's `[min f, max f]` hull is no better than what every consistent
//! type already gets.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CovariateVector, Disclosure, ModelShape, TypeFunction};
use crate::montecarlo::{replication_rng, try_replicate, Rng};
use crate::priors::PriorSpec;
use crate::scan::{ScanPlan, DEFAULT_BUDGET};
use crate::model::DisclosureSet;
use crate::utility::UtilitySpec;

/// Default largest `n` for equilibrium enumeration.
pub const GAME_N_CAP: u32 = 3;

/// Largest number of sender maps enumerated.
const SENDER_MAP_LIMIT: u128 = 1 << 26;

const TOLERANCE: f64 = 1e-12;

/// One equilibrium: the sender map, the evaluations it induces, and the off-path
/// evaluations that support it.
#[derive(Debug, Clone, PartialEq)]
pub struct StrategyProfile {
    /// Disclosure of each type, indexed by covariate-vector index.
    pub sender: Vec<Disclosure>,
    /// Evaluation each type receives.
    pub evaluations: Vec<f64>,
    pub payoffs: Vec<f64>,
    /// On-path disclosures with their posterior means, sorted.
    pub on_path: Vec<(Disclosure, f64)>,
    /// Off-path disclosures with a supporting evaluation, sorted.
    pub off_path: Vec<(Disclosure, f64)>,
}

impl StrategyProfile {
    /// `x -> disclosure -> evaluation -> payoff`, one line per type.
    pub fn to_table(&self, n: u32) -> String {
        let mut out = String::from("x\tdisclosure\tevaluation\tpayoff\n");
        for (i, d) in self.sender.iter().enumerate() {
            let x = CovariateVector::from_index(n, i as u64).expect("index within table");
            let _ = writeln!(out, "{x}\t{d}\t{}\t{}", self.evaluations[i], self.payoffs[i]);
        }
        out
    }
}

/// Every disclosure any type can send, with its cylinder data.
struct GameTables {
    disclosures: Vec<Disclosure>,
    /// Feasible disclosure ids of each type.
    feasible: Vec<Vec<usize>>,
    /// Types consistent with each disclosure.
    members: Vec<Vec<usize>>,
    /// Minimum of `u` over each disclosure's hull, and a minimizer.
    worst: Vec<(f64, f64)>,
}

impl GameTables {
    fn new(f: &TypeFunction, u: &UtilitySpec, shape: &ModelShape) -> Result<Self> {
        let plan = ScanPlan::new(shape, DisclosureSet::empty(), DEFAULT_BUDGET)?;
        let n = shape.n();
        let types = 1usize << n;
        let mut ids: HashMap<Disclosure, usize> = HashMap::new();
        let mut disclosures = Vec::new();
        let mut feasible = vec![Vec::new(); types];
        let zeros = vec![0.0; types];
        for (x, list) in feasible.iter_mut().enumerate() {
            let xv = CovariateVector::from_index(n, x as u64)?;
            plan.for_each_mean(&zeros, x as u64, &mut Vec::new(), |h, _| {
                let d = Disclosure::truthful(xv, shape.standard_mask() | h.mask());
                let id = *ids.entry(d).or_insert_with(|| {
                    disclosures.push(d);
                    disclosures.len() - 1
                });
                list.push(id);
            });
        }
        let mut members = Vec::with_capacity(disclosures.len());
        let mut worst = Vec::with_capacity(disclosures.len());
        for d in &disclosures {
            let m: Vec<usize> = (0..types).filter(|&x| x as u64 & d.mask == d.values).collect();
            let lo = m.iter().map(|&x| f.values()[x]).fold(f64::INFINITY, f64::min);
            let hi = m.iter().map(|&x| f.values()[x]).fold(f64::NEG_INFINITY, f64::max);
            worst.push(u.min_over_interval(lo, hi)?);
            members.push(m);
        }
        Ok(Self { disclosures, feasible, members, worst })
    }
}

fn check_inputs(f: &TypeFunction, u: &UtilitySpec, shape: &ModelShape) -> Result<()> {
    if shape.n() > GAME_N_CAP {
        return Err(Error::GameCap { n: shape.n(), cap: GAME_N_CAP });
    }
    f.check_shape(shape)?;
    u.validate(shape.ybar())?;
    if u.depends_on_type() {
        return Err(Error::UnsupportedUtility(format!(
            "{u} depends on the realized type; the disclosure game needs a yhat-only utility"
        )));
    }
    Ok(())
}

/// All pure-strategy equilibria, one per distinct outcome (vector of evaluations),
/// in lexicographic order of sender maps.
pub fn enumerate_pure_equilibria(f: &TypeFunction, u: &UtilitySpec, shape: &ModelShape) -> Result<Vec<StrategyProfile>> {
    check_inputs(f, u, shape)?;
    let t = GameTables::new(f, u, shape)?;
    let maps: u128 = t.feasible.iter().map(|l| l.len() as u128).product();
    if maps > SENDER_MAP_LIMIT {
        return Err(Error::Budget { n: shape.n(), cost: maps, budget: SENDER_MAP_LIMIT });
    }
    let found: Vec<Vec<Vec<usize>>> = t.feasible[0]
        .par_iter()
        .map(|&first| search_from(&t, f, u, first))
        .collect();
    let mut seen: Vec<Vec<f64>> = Vec::new();
    let mut out = Vec::new();
    for choice in found.into_iter().flatten() {
        let profile = build_profile(&t, f, u, &choice);
        if seen.iter().any(|e| same_outcome(e, &profile.evaluations)) {
            continue;
        }
        seen.push(profile.evaluations.clone());
        out.push(profile);
    }
    Ok(out)
}

fn same_outcome(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= TOLERANCE)
}

/// Equilibrium sender maps (as disclosure ids) whose first type sends `first`.
fn search_from(t: &GameTables, f: &TypeFunction, u: &UtilitySpec, first: usize) -> Vec<Vec<usize>> {
    let types = t.feasible.len();
    let mut digits = vec![0usize; types];
    let mut choice = vec![0usize; types];
    let mut found = Vec::new();
    let mut sums = vec![0.0; t.disclosures.len()];
    let mut counts = vec![0usize; t.disclosures.len()];
    let mut payoff = vec![0.0; types];
    loop {
        choice[0] = first;
        for x in 1..types {
            choice[x] = t.feasible[x][digits[x]];
        }
        if is_equilibrium(t, f, u, &choice, &mut sums, &mut counts, &mut payoff) {
            found.push(choice.clone());
        }
        // Mixed-radix increment, last type fastest.
        let mut pos = types;
        loop {
            if pos == 1 {
                return found;
            }
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < t.feasible[pos].len() {
                break;
            }
            digits[pos] = 0;
        }
    }
}

fn is_equilibrium(
    t: &GameTables,
    f: &TypeFunction,
    u: &UtilitySpec,
    choice: &[usize],
    sums: &mut [f64],
    counts: &mut [usize],
    payoff: &mut [f64],
) -> bool {
    sums.fill(0.0);
    counts.fill(0);
    for (x, &d) in choice.iter().enumerate() {
        sums[d] += f.values()[x];
        counts[d] += 1;
    }
    for (x, &d) in choice.iter().enumerate() {
        payoff[x] = u.eval(sums[d] / counts[d] as f64, 0.0);
    }
    for (x, list) in t.feasible.iter().enumerate() {
        for &d in list {
            if counts[d] > 0 {
                if u.eval(sums[d] / counts[d] as f64, 0.0) > payoff[x] + TOLERANCE {
                    return false;
                }
            } else {
                let floor = t.members[d].iter().map(|&m| payoff[m]).fold(f64::INFINITY, f64::min);
                if t.worst[d].0 > floor + TOLERANCE {
                    return false;
                }
            }
        }
    }
    true
}

fn build_profile(t: &GameTables, f: &TypeFunction, u: &UtilitySpec, choice: &[usize]) -> StrategyProfile {
    let mut sums = vec![0.0; t.disclosures.len()];
    let mut counts = vec![0usize; t.disclosures.len()];
    for (x, &d) in choice.iter().enumerate() {
        sums[d] += f.values()[x];
        counts[d] += 1;
    }
    let evaluations: Vec<f64> = choice.iter().map(|&d| sums[d] / counts[d] as f64).collect();
    let payoffs = evaluations.iter().map(|&z| u.eval(z, 0.0)).collect();
    let mut on_path = Vec::new();
    let mut off_path = Vec::new();
    for (id, d) in t.disclosures.iter().enumerate() {
        if counts[id] > 0 {
            on_path.push((*d, sums[id] / counts[id] as f64));
        } else {
            off_path.push((*d, t.worst[id].1));
        }
    }
    on_path.sort_by_key(|a| a.0);
    off_path.sort_by_key(|a| a.0);
    StrategyProfile { sender: choice.iter().map(|&d| t.disclosures[d]).collect(), evaluations, payoffs, on_path, off_path }
}

/// Independent equilibrium check of a profile: feasibility, Bayes consistency on
/// path, hull membership of off-path evaluations, and no profitable deviation.
pub fn recheck_profile(
    profile: &StrategyProfile,
    f: &TypeFunction,
    u: &UtilitySpec,
    shape: &ModelShape,
) -> std::result::Result<(), String> {
    let n = shape.n();
    let types = 1u64 << n;
    let h = shape.human_capacity();
    let admissible = |d: &Disclosure| {
        d.mask & shape.standard_mask() == shape.standard_mask()
            && (d.mask & shape.nonstandard_mask()).count_ones() <= h
            && d.mask & !shape.full_mask() == 0
    };
    for x in 0..types {
        let d = profile.sender[x as usize];
        if !admissible(&d) || x & d.mask != d.values {
            return Err(format!("type {x} sends infeasible disclosure {d}"));
        }
    }
    let evaluation = |d: &Disclosure| -> Option<f64> {
        if let Some((_, z)) = profile.on_path.iter().find(|(e, _)| e == d) {
            return Some(*z);
        }
        profile.off_path.iter().find(|(e, _)| e == d).map(|(_, z)| *z)
    };
    for (d, z) in &profile.on_path {
        let senders: Vec<u64> = (0..types).filter(|&x| profile.sender[x as usize] == *d).collect();
        if senders.is_empty() {
            return Err(format!("{d} is listed on path but nobody sends it"));
        }
        let mean = senders.iter().map(|&x| f.values()[x as usize]).sum::<f64>() / senders.len() as f64;
        if (mean - z).abs() > 1e-9 {
            return Err(format!("on-path evaluation {z} of {d} is not the posterior mean {mean}"));
        }
    }
    for (d, z) in &profile.off_path {
        if (0..types).any(|x| profile.sender[x as usize] == *d) {
            return Err(format!("{d} is listed off path but is sent"));
        }
        let consistent: Vec<f64> = (0..types).filter(|x| x & d.mask == d.values).map(|x| f.values()[x as usize]).collect();
        let lo = consistent.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = consistent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if *z < lo - 1e-12 || *z > hi + 1e-12 {
            return Err(format!("off-path evaluation {z} of {d} lies outside [{lo}, {hi}]"));
        }
    }
    for x in 0..types {
        let own = u.eval(evaluation(&profile.sender[x as usize]).ok_or("missing own evaluation")?, 0.0);
        // Every admissible nonstandard subset, revealed truthfully.
        for sub in 0..types {
            if sub & shape.standard_mask() != 0 || sub.count_ones() > h {
                continue;
            }
            let mask = shape.standard_mask() | sub;
            let d = Disclosure { mask, values: x & mask };
            let z = evaluation(&d).ok_or_else(|| format!("no evaluation recorded for {d}"))?;
            if u.eval(z, 0.0) > own + 1e-9 {
                return Err(format!("type {x} gains by deviating to {d}"));
            }
        }
    }
    Ok(())
}

/// `v^D(f, x)`: agent `x`'s best payoff across equilibria.
pub fn best_equilibrium_payoff(f: &TypeFunction, x: CovariateVector, u: &UtilitySpec, shape: &ModelShape) -> Result<f64> {
    x.check_len(shape)?;
    let eqs = enumerate_pure_equilibria(f, u, shape)?;
    Ok(best_payoffs(&eqs, 1 << shape.n())[x.index() as usize])
}

fn best_payoffs(eqs: &[StrategyProfile], types: usize) -> Vec<f64> {
    (0..types)
        .map(|x| eqs.iter().map(|p| p.payoffs[x]).fold(f64::NEG_INFINITY, f64::max))
        .collect()
}

/// Whether every agent sending only its standard covariates is an equilibrium.
pub fn babbling_sustained(f: &TypeFunction, u: &UtilitySpec, shape: &ModelShape) -> Result<bool> {
    check_inputs(f, u, shape)?;
    let t = GameTables::new(f, u, shape)?;
    let choice: Vec<usize> = t.feasible.iter().map(|l| l[0]).collect();
    let n = t.disclosures.len();
    Ok(is_equilibrium(&t, f, u, &choice, &mut vec![0.0; n], &mut vec![0; n], &mut vec![0.0; choice.len()]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DisclosureBoundCheck {
    pub draws: u64,
    pub violations: u64,
    /// Largest `max_x (v^D - U_x(empty)) - max_x v(f, x)` seen; at most 0 when the bound holds.
    pub max_gap: f64,
    /// Draws with no pure equilibrium found.
    pub empty_draws: u64,
}

/// Checks `max_x (v^D(f, x) - U_x(empty)) <= max_x v(f, x)` on `reps` prior draws.
pub fn verify_disclosure_bound(
    prior: &PriorSpec,
    u: &UtilitySpec,
    shape: &ModelShape,
    reps: u64,
    seed: u64,
) -> Result<DisclosureBoundCheck> {
    prior.validate(shape)?;
    if shape.n() > GAME_N_CAP {
        return Err(Error::GameCap { n: shape.n(), cap: GAME_N_CAP });
    }
    if reps == 0 {
        return Err(Error::Config("reps must be positive".into()));
    }
    let plan = ScanPlan::new(shape, DisclosureSet::empty(), DEFAULT_BUDGET)?;
    let rows = try_replicate(reps, seed, |_, rng: &mut Rng, _: &mut ()| {
        let mut values = Vec::new();
        prior.sample_into(shape, rng, &mut values)?;
        let f = TypeFunction::new(shape.n(), values)?;
        let eqs = enumerate_pure_equilibria(&f, u, shape)?;
        if eqs.is_empty() {
            return Ok::<_, Error>((f64::NAN, true));
        }
        let best = best_payoffs(&eqs, f.values().len());
        let mut scratch = Vec::new();
        let mut lhs = f64::NEG_INFINITY;
        let mut rhs = f64::NEG_INFINITY;
        for x in 0..f.values().len() as u64 {
            let s = plan.scan(f.values(), x, u, f.values()[x as usize], &mut scratch);
            lhs = lhs.max(best[x as usize] - s.baseline);
            rhs = rhs.max(s.value_of_context());
        }
        Ok((lhs - rhs, false))
    })?;
    let mut check = DisclosureBoundCheck { draws: reps, violations: 0, max_gap: f64::NEG_INFINITY, empty_draws: 0 };
    for (gap, empty) in rows {
        if empty {
            check.empty_draws += 1;
            continue;
        }
        if gap > TOLERANCE {
            check.violations += 1;
        }
        check.max_gap = check.max_gap.max(gap);
    }
    Ok(check)
}

/// One prior draw, for fixtures and diagnostics.
pub fn sample_game_function(prior: &PriorSpec, shape: &ModelShape, seed: u64, index: u64) -> Result<TypeFunction> {
    prior.validate(shape)?;
    let mut rng = replication_rng(seed, index);
    let mut values = Vec::new();
    prior.sample_into(shape, &mut rng, &mut values)?;
    TypeFunction::new(shape.n(), values)
}
