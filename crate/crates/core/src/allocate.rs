//! Code-rate selection under a resource-block budget.
//!
//! Each view `k` picks at most one option `i` (or is skipped), earning
//! `κ[k][i] = β_i · G_k` at a cost of `b_i` RBs; the total cost may not exceed
//! the budget `B`. This is a multiple-choice knapsack solved by dynamic
//! programming over (views, RBs).
//!
//! Among plans with equal reward the one using fewer RBs wins, then the
//! lexicographically smallest choice sequence, with [`Choice::Skip`] ordered
//! before every option and options ordered by index.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;
use thiserror::Error;

use crate::phy;

/// Largest search space [`brute_force_select`] will enumerate.
pub const BRUTE_FORCE_LIMIT: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AllocateError {
    #[error("entropy of view {view} is {value}; must be finite and non-negative")]
    BadEntropy { view: usize, value: f64 },
    #[error("scale factor {0} must be finite and positive")]
    BadScale(f64),
    #[error("resource-block cost must be at least 1")]
    ZeroCost,
    #[error("at least one view is required")]
    NoViews,
    #[error("search space of {0} assignments exceeds the enumeration limit")]
    TooLarge(u64),
}

/// One discrete code-rate option.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateOption {
    bits_per_index: u32,
    rb_cost: u32,
    scale: f64,
}

impl RateOption {
    /// An option with an explicitly given RB cost.
    pub fn new(bits_per_index: u32, rb_cost: u32, scale: f64) -> Result<Self, AllocateError> {
        if rb_cost == 0 {
            return Err(AllocateError::ZeroCost);
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(AllocateError::BadScale(scale));
        }
        Ok(Self {
            bits_per_index,
            rb_cost,
            scale,
        })
    }

    /// An option whose RB cost is derived from the payload size.
    pub fn derived(
        bits_per_index: u32,
        scale: f64,
        num_subvectors: u32,
        bits_per_rb: u32,
    ) -> Result<Self, AllocateError> {
        Self::new(
            bits_per_index,
            phy::rb_cost(num_subvectors, bits_per_index, bits_per_rb),
            scale,
        )
    }

    pub fn bits_per_index(&self) -> u32 {
        self.bits_per_index
    }

    pub fn rb_cost(&self) -> u32 {
        self.rb_cost
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateOptionSet(Vec<RateOption>);

impl RateOptionSet {
    pub fn new(options: Vec<RateOption>) -> Self {
        Self(options)
    }

    /// Builds options from `(bits_per_index, β)` pairs, deriving each RB cost.
    pub fn from_pairs(
        pairs: &[(u32, f64)],
        num_subvectors: u32,
        bits_per_rb: u32,
    ) -> Result<Self, AllocateError> {
        pairs
            .iter()
            .map(|&(w, beta)| RateOption::derived(w, beta, num_subvectors, bits_per_rb))
            .collect::<Result<Vec<_>, _>>()
            .map(Self)
    }

    pub fn options(&self) -> &[RateOption] {
        &self.0
    }

    pub fn get(&self, i: usize) -> Option<&RateOption> {
        self.0.get(i)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Keeps only the options whose bit width is `bits`.
    pub fn restricted_to(&self, bits: u32) -> Self {
        Self(
            self.0
                .iter()
                .copied()
                .filter(|o| o.bits_per_index == bits)
                .collect(),
        )
    }
}

/// Per-view decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Choice {
    Skip,
    Option(usize),
}

impl Choice {
    pub fn option(self) -> Option<usize> {
        match self {
            Choice::Skip => None,
            Choice::Option(i) => Some(i),
        }
    }
}

/// `κ[k][i] = β_i · G_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RewardMatrix {
    rows: Vec<Vec<f64>>,
}

impl RewardMatrix {
    pub fn get(&self, view: usize, option: usize) -> f64 {
        self.rows[view][option]
    }

    pub fn row(&self, view: usize) -> &[f64] {
        &self.rows[view]
    }

    pub fn num_views(&self) -> usize {
        self.rows.len()
    }
}

pub fn reward_matrix(
    entropies: &[f64],
    options: &RateOptionSet,
) -> Result<RewardMatrix, AllocateError> {
    for (view, &g) in entropies.iter().enumerate() {
        if !(g.is_finite() && g >= 0.0) {
            return Err(AllocateError::BadEntropy { view, value: g });
        }
    }
    let rows = entropies
        .iter()
        .map(|&g| options.options().iter().map(|o| o.scale * g).collect())
        .collect();
    Ok(RewardMatrix { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationPlan {
    choices: Vec<Choice>,
    total_rb: u32,
    total_reward: f64,
}

impl AllocationPlan {
    /// Evaluates `choices`, summing rewards in view order.
    pub fn evaluate(choices: Vec<Choice>, rewards: &RewardMatrix, options: &RateOptionSet) -> Self {
        let mut total_rb = 0;
        let mut total_reward = 0.0;
        for (k, c) in choices.iter().enumerate() {
            if let Choice::Option(i) = *c {
                total_rb += options.options()[i].rb_cost;
                total_reward += rewards.get(k, i);
            }
        }
        Self {
            choices,
            total_rb,
            total_reward,
        }
    }

    pub fn all_skip(views: usize) -> Self {
        Self {
            choices: vec![Choice::Skip; views],
            total_rb: 0,
            total_reward: 0.0,
        }
    }

    pub fn choices(&self) -> &[Choice] {
        &self.choices
    }

    pub fn total_rb(&self) -> u32 {
        self.total_rb
    }

    pub fn total_reward(&self) -> f64 {
        self.total_reward
    }

    pub fn transmitting_views(&self) -> usize {
        self.choices.iter().filter(|c| **c != Choice::Skip).count()
    }
}

/// DP state for one invocation of [`select_rates_with_table`].
///
/// `exact(k, b)` is the best reward over the first `k` views spending exactly
/// `b` RBs; `value(k, b)` is the best spending at most `b`.
#[derive(Debug, Clone)]
pub struct DpTable {
    views: usize,
    budget: usize,
    exact: Vec<Option<f64>>,
    best: Vec<f64>,
    pred: Vec<Choice>,
}

impl DpTable {
    fn idx(&self, k: usize, b: usize) -> usize {
        k * (self.budget + 1) + b
    }

    pub fn views(&self) -> usize {
        self.views
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn value(&self, k: usize, b: usize) -> f64 {
        self.best[self.idx(k, b)]
    }

    pub fn exact(&self, k: usize, b: usize) -> Option<f64> {
        self.exact[self.idx(k, b)]
    }

    /// Choice made for view `k` (1-based) in the state `(k, b)`.
    pub fn predecessor(&self, k: usize, b: usize) -> Option<Choice> {
        self.exact(k, b).map(|_| self.pred[self.idx(k, b)])
    }

    /// Reconstructs the choices of views `1..=k` leading to state `(k, b)`.
    fn backtrack(&self, k: usize, b: usize, options: &RateOptionSet) -> Vec<Choice> {
        let mut out = vec![Choice::Skip; k];
        let mut b = b;
        for view in (1..=k).rev() {
            let c = self.pred[self.idx(view, b)];
            out[view - 1] = c;
            if let Choice::Option(i) = c {
                b -= options.options()[i].rb_cost as usize;
            }
        }
        out
    }
}

fn validate(entropies: &[f64], options: &RateOptionSet) -> Result<RewardMatrix, AllocateError> {
    if entropies.is_empty() {
        return Err(AllocateError::NoViews);
    }
    for o in options.options() {
        if o.rb_cost == 0 {
            return Err(AllocateError::ZeroCost);
        }
    }
    reward_matrix(entropies, options)
}

/// Optimal per-view code rates under a budget of `budget` RBs.
pub fn select_rates(
    entropies: &[f64],
    options: &RateOptionSet,
    budget: u32,
) -> Result<AllocationPlan, AllocateError> {
    select_rates_with_table(entropies, options, budget).map(|(plan, _)| plan)
}

/// As [`select_rates`], also returning the filled DP table.
pub fn select_rates_with_table(
    entropies: &[f64],
    options: &RateOptionSet,
    budget: u32,
) -> Result<(AllocationPlan, DpTable), AllocateError> {
    let rewards = validate(entropies, options)?;
    let views = entropies.len();
    let budget = budget as usize;
    let cells = (views + 1) * (budget + 1);
    let mut table = DpTable {
        views,
        budget,
        exact: vec![None; cells],
        best: vec![0.0; cells],
        pred: vec![Choice::Skip; cells],
    };
    table.exact[0] = Some(0.0);

    for k in 1..=views {
        for b in 0..=budget {
            let mut cur: Option<(f64, Choice)> = table.exact(k - 1, b).map(|v| (v, Choice::Skip));
            for (i, opt) in options.options().iter().enumerate() {
                let cost = opt.rb_cost as usize;
                if cost > b {
                    continue;
                }
                let Some(prev) = table.exact(k - 1, b - cost) else {
                    continue;
                };
                let cand = prev + rewards.get(k - 1, i);
                let take = match cur {
                    None => true,
                    Some((v, _)) if cand > v => true,
                    Some((v, c)) if cand == v => {
                        let mut a = table.backtrack(k - 1, b - cost, options);
                        a.push(Choice::Option(i));
                        let prev_b = match c {
                            Choice::Skip => b,
                            Choice::Option(j) => b - options.options()[j].rb_cost as usize,
                        };
                        let mut inc = table.backtrack(k - 1, prev_b, options);
                        inc.push(c);
                        a.cmp(&inc) == Ordering::Less
                    }
                    Some(_) => false,
                };
                if take {
                    cur = Some((cand, Choice::Option(i)));
                }
            }
            let idx = table.idx(k, b);
            if let Some((v, c)) = cur {
                table.exact[idx] = Some(v);
                table.pred[idx] = c;
            }
        }
    }

    for k in 0..=views {
        let mut running = f64::NEG_INFINITY;
        for b in 0..=budget {
            if let Some(v) = table.exact(k, b) {
                running = running.max(v);
            }
            let idx = table.idx(k, b);
            table.best[idx] = running;
        }
    }

    // max reward, then fewest RBs
    let mut best_b = 0;
    let mut best_v = f64::NEG_INFINITY;
    for b in 0..=budget {
        if let Some(v) = table.exact(views, b) {
            if v > best_v {
                best_v = v;
                best_b = b;
            }
        }
    }
    let choices = table.backtrack(views, best_b, options);
    let plan = AllocationPlan::evaluate(choices, &rewards, options);
    Ok((plan, table))
}

fn search_space(views: usize, options: usize) -> u64 {
    let base = options as u64 + 1;
    let mut total = 1u64;
    for _ in 0..views {
        total = total.saturating_mul(base);
    }
    total
}

/// Visits every assignment in lexicographic order (Skip first).
fn for_each_assignment(views: usize, options: usize, mut f: impl FnMut(&[Choice])) {
    let mut digits = vec![0usize; views];
    let mut choices = vec![Choice::Skip; views];
    loop {
        f(&choices);
        let mut k = views;
        loop {
            if k == 0 {
                return;
            }
            k -= 1;
            digits[k] += 1;
            if digits[k] <= options {
                choices[k] = Choice::Option(digits[k] - 1);
                break;
            }
            digits[k] = 0;
            choices[k] = Choice::Skip;
        }
    }
}

/// Exhaustive search with the same objective and tie-break as [`select_rates`].
pub fn brute_force_select(
    entropies: &[f64],
    options: &RateOptionSet,
    budget: u32,
) -> Result<AllocationPlan, AllocateError> {
    let rewards = validate(entropies, options)?;
    let space = search_space(entropies.len(), options.len());
    if space > BRUTE_FORCE_LIMIT {
        return Err(AllocateError::TooLarge(space));
    }
    let mut best: Option<AllocationPlan> = None;
    for_each_assignment(entropies.len(), options.len(), |choices| {
        let plan = AllocationPlan::evaluate(choices.to_vec(), &rewards, options);
        if plan.total_rb > budget {
            return;
        }
        let better = match &best {
            None => true,
            Some(b) => {
                plan.total_reward > b.total_reward
                    || (plan.total_reward == b.total_reward && plan.total_rb < b.total_rb)
            }
        };
        if better {
            best = Some(plan);
        }
    });
    Ok(best.unwrap_or_else(|| AllocationPlan::all_skip(entropies.len())))
}

/// True if no view can be added, or moved to a wider option, within `budget`.
pub fn is_maximal(choices: &[Choice], options: &RateOptionSet, budget: u32) -> bool {
    let opts = options.options();
    let used: u32 = choices
        .iter()
        .filter_map(|c| c.option())
        .map(|i| opts[i].rb_cost)
        .sum();
    if used > budget {
        return false;
    }
    let spare = budget - used;
    choices.iter().all(|c| match *c {
        Choice::Skip => opts.iter().all(|o| o.rb_cost > spare),
        Choice::Option(i) => opts
            .iter()
            .filter(|o| o.bits_per_index > opts[i].bits_per_index)
            .all(|o| o.rb_cost > opts[i].rb_cost + spare),
    })
}

/// Uniformly random feasible assignment that leaves no room to add or
/// upgrade a view. Equivalent to redrawing uniform assignments until one is
/// feasible and maximal.
pub fn random_maximal_select<R: Rng + ?Sized>(
    entropies: &[f64],
    options: &RateOptionSet,
    budget: u32,
    rng: &mut R,
) -> Result<AllocationPlan, AllocateError> {
    let rewards = validate(entropies, options)?;
    let views = entropies.len();
    let space = search_space(views, options.len());
    let choices = if space <= BRUTE_FORCE_LIMIT {
        let mut pool: Vec<Vec<Choice>> = Vec::new();
        for_each_assignment(views, options.len(), |c| {
            if is_maximal(c, options, budget) {
                pool.push(c.to_vec());
            }
        });
        // the greedy fill is always maximal, so the pool is never empty
        let pick = rng.random_range(0..pool.len());
        pool.swap_remove(pick)
    } else {
        loop {
            let draw: Vec<Choice> = (0..views)
                .map(|_| match rng.random_range(0..=options.len()) {
                    0 => Choice::Skip,
                    i => Choice::Option(i - 1),
                })
                .collect();
            if is_maximal(&draw, options, budget) {
                break draw;
            }
        }
    };
    Ok(AllocationPlan::evaluate(choices, &rewards, options))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_options() -> RateOptionSet {
        RateOptionSet::new(vec![
            RateOption::new(4, 10, 0.75).unwrap(),
            RateOption::new(6, 14, 0.85).unwrap(),
            RateOption::new(8, 19, 0.9).unwrap(),
        ])
    }

    #[test]
    fn reward_rows() {
        let m = reward_matrix(&[4.0, 0.0], &reference_options()).unwrap();
        assert_eq!(m.row(0), &[0.75 * 4.0, 0.85 * 4.0, 0.9 * 4.0]);
        assert!((m.get(0, 0) - 3.0).abs() < 1e-12);
        assert!((m.get(0, 1) - 3.4).abs() < 1e-12);
        assert!((m.get(0, 2) - 3.6).abs() < 1e-12);
        assert_eq!(m.row(1), &[0.0, 0.0, 0.0]);
        let d = reward_matrix(&[8.0, 0.0], &reference_options()).unwrap();
        for i in 0..3 {
            assert_eq!(d.get(0, i), 2.0 * m.get(0, i));
        }
    }

    #[test]
    fn negative_entropy_rejected() {
        assert!(matches!(
            reward_matrix(&[1.0, -0.5], &reference_options()),
            Err(AllocateError::BadEntropy { view: 1, .. })
        ));
        assert!(matches!(
            select_rates(&[f64::NAN], &reference_options(), 10),
            Err(AllocateError::BadEntropy { .. })
        ));
    }

    #[test]
    fn two_view_example() {
        let opts = reference_options();
        let plan = select_rates(&[4.0, 6.0], &opts, 29).unwrap();
        let oracle = brute_force_select(&[4.0, 6.0], &opts, 29).unwrap();
        assert_eq!(plan, oracle);
        assert_eq!(plan.choices(), &[Choice::Option(1), Choice::Option(1)]);
        assert_eq!(plan.total_rb(), 28);
        assert!((plan.total_reward() - 8.5).abs() < 1e-12);
    }

    #[test]
    fn ample_and_starved_budgets() {
        let opts = reference_options();
        let plan = select_rates(&[1.0, 2.0, 3.0], &opts, 57).unwrap();
        assert_eq!(plan.choices(), &[Choice::Option(2); 3]);
        let plan = select_rates(&[1.0, 2.0, 3.0], &opts, 9).unwrap();
        assert_eq!(plan, AllocationPlan::all_skip(3));
    }

    #[test]
    fn empty_option_set_skips_everything() {
        let plan = select_rates(&[1.0, 2.0], &RateOptionSet::default(), 100).unwrap();
        assert_eq!(plan, AllocationPlan::all_skip(2));
        assert!(matches!(
            select_rates(&[], &reference_options(), 10),
            Err(AllocateError::NoViews)
        ));
    }

    #[test]
    fn single_option_fits() {
        let opts = RateOptionSet::new(vec![RateOption::new(6, 5, 0.5).unwrap()]);
        let plan = brute_force_select(&[2.0], &opts, 5).unwrap();
        assert_eq!(plan.choices(), &[Choice::Option(0)]);
        assert_eq!(select_rates(&[2.0], &opts, 5).unwrap(), plan);
    }

    #[test]
    fn zero_entropy_prefers_skip() {
        let plan = select_rates(&[0.0, 5.0], &reference_options(), 57).unwrap();
        assert_eq!(plan.choices(), &[Choice::Skip, Choice::Option(2)]);
        assert_eq!(plan.total_rb(), 19);
    }

    #[test]
    fn equal_entropies_break_ties_lexicographically() {
        // two identical options: the lower index wins
        let opts = RateOptionSet::new(vec![
            RateOption::new(4, 3, 0.5).unwrap(),
            RateOption::new(5, 3, 0.5).unwrap(),
        ]);
        let plan = select_rates(&[1.0, 1.0], &opts, 3).unwrap();
        assert_eq!(plan.choices(), &[Choice::Skip, Choice::Option(0)]);
        assert_eq!(plan, brute_force_select(&[1.0, 1.0], &opts, 3).unwrap());
    }

    #[test]
    fn table_boundaries() {
        let (_, t) = select_rates_with_table(&[3.0, 1.0, 2.0], &reference_options(), 40).unwrap();
        for b in 0..=40 {
            assert_eq!(t.value(0, b), 0.0);
        }
        for k in 0..=3 {
            assert_eq!(t.value(k, 0), 0.0);
        }
        assert_eq!(t.predecessor(1, 10), Some(Choice::Option(0)));
        assert_eq!(t.predecessor(1, 11), None);
    }

    #[test]
    fn brute_force_limit() {
        let opts = reference_options();
        let g = [1.0; 10];
        assert!(matches!(
            brute_force_select(&g, &opts, 50),
            Err(AllocateError::TooLarge(1_048_576))
        ));
    }

    #[test]
    fn maximality() {
        let opts = reference_options();
        // 10 + 10 + 10 leaves 3 spare at B=33: nothing can be upgraded
        assert!(is_maximal(&[Choice::Option(0); 3], &opts, 33));
        // 14 + 14 leaves 5 spare: 14 -> 19 still fits
        assert!(!is_maximal(
            &[Choice::Option(1), Choice::Option(1), Choice::Skip],
            &opts,
            33
        ));
        assert!(is_maximal(
            &[Choice::Option(2), Choice::Option(1), Choice::Skip],
            &opts,
            33
        ));
        // 10 + 14 leaves 9: first view can upgrade 10 -> 14
        assert!(!is_maximal(
            &[Choice::Option(0), Choice::Option(1), Choice::Skip],
            &opts,
            33
        ));
        assert!(!is_maximal(&[Choice::Option(2); 2], &opts, 33));
    }
}
