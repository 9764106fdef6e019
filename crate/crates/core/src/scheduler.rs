//! Symbol-class scheduling.
//!
//! Every symbol-time each terminal demands one of the `M` constellation
//! symbols. Terminals are kept in `M` classes, each class bound to one
//! symbol, so that a class can be served by a single broadcast beam. Before
//! the next symbol-time the scheduler moves terminals whose class carries
//! the wrong symbol. With static allocation the class→symbol binding never
//! changes; with dynamic allocation the binding is re-chosen to keep as many
//! terminals in place as possible.
//!
//! Indices are zero-based throughout; terminal `0` is printed as `T1`.

use itertools::Itertools;

use crate::{Error, Result};

/// Exhaustive bijection search is used up to this many symbols.
const EXHAUSTIVE_MAX_ORDER: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymbolAlphabet {
    order: usize,
}

impl SymbolAlphabet {
    pub fn new(order: usize) -> Result<Self> {
        if order < 2 {
            return Err(Error::InvalidArgument(format!("modulation order must be >= 2, got {order}")));
        }
        Ok(Self { order })
    }

    pub fn order(self) -> usize {
        self.order
    }
}

/// Terminal → class membership plus the class → symbol binding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassState {
    membership: Vec<usize>,
    symbol_of_class: Vec<usize>,
}

impl ClassState {
    pub fn new(membership: Vec<usize>, symbol_of_class: Vec<usize>) -> Result<Self> {
        let alphabet = SymbolAlphabet::new(symbol_of_class.len())?;
        check_bijection(&symbol_of_class)?;
        if let Some(&c) = membership.iter().find(|&&c| c >= alphabet.order()) {
            return Err(Error::InvalidArgument(format!(
                "class index {c} out of range for {} classes",
                alphabet.order()
            )));
        }
        Ok(Self { membership, symbol_of_class })
    }

    /// Class `c` carries symbol `c`.
    pub fn with_identity_binding(membership: Vec<usize>, order: usize) -> Result<Self> {
        Self::new(membership, (0..order).collect())
    }

    pub fn order(&self) -> usize {
        self.symbol_of_class.len()
    }

    pub fn terminals(&self) -> usize {
        self.membership.len()
    }

    pub fn membership(&self) -> &[usize] {
        &self.membership
    }

    pub fn class_of(&self, terminal: usize) -> usize {
        self.membership[terminal]
    }

    pub fn symbol_of_class(&self) -> &[usize] {
        &self.symbol_of_class
    }

    pub fn class_of_symbol(&self, symbol: usize) -> usize {
        self.symbol_of_class
            .iter()
            .position(|&s| s == symbol)
            .expect("binding is a bijection")
    }

    pub fn members(&self, class: usize) -> Vec<usize> {
        self.membership.iter().positions(|&c| c == class).collect()
    }

    pub fn class_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.order()];
        for &c in &self.membership {
            sizes[c] += 1;
        }
        sizes
    }
}

/// The symbol each terminal needs in the next symbol-time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandVector(Vec<usize>);

impl DemandVector {
    pub fn new(next_symbol: Vec<usize>, alphabet: SymbolAlphabet) -> Result<Self> {
        if let Some(&s) = next_symbol.iter().find(|&&s| s >= alphabet.order()) {
            return Err(Error::InvalidArgument(format!(
                "symbol index {s} out of range for M = {}",
                alphabet.order()
            )));
        }
        Ok(Self(next_symbol))
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Move {
    pub terminal: usize,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MovePlan {
    pub moves: Vec<Move>,
    pub symbol_of_class: Vec<usize>,
    demand: Vec<usize>,
}

impl MovePlan {
    pub fn move_count(&self) -> usize {
        self.moves.len()
    }
}

fn check_bijection(map: &[usize]) -> Result<()> {
    let mut seen = vec![false; map.len()];
    for &s in map {
        if s >= map.len() || std::mem::replace(&mut seen[s], true) {
            return Err(Error::InvalidArgument(format!("{map:?} is not a bijection")));
        }
    }
    Ok(())
}

fn check_consistent(state: &ClassState, demand: &DemandVector) -> Result<()> {
    if state.terminals() != demand.len() {
        return Err(Error::DimensionMismatch { expected: state.terminals(), found: demand.len() });
    }
    if let Some(&s) = demand.symbols().iter().find(|&&s| s >= state.order()) {
        return Err(Error::InvalidArgument(format!(
            "demanded symbol {s} out of range for M = {}",
            state.order()
        )));
    }
    Ok(())
}

/// Moves implied by binding class `c` to `symbol_of_class[c]`.
fn plan_for_binding(state: &ClassState, demand: &DemandVector, symbol_of_class: Vec<usize>) -> MovePlan {
    let mut class_of_symbol = vec![0; symbol_of_class.len()];
    for (c, &s) in symbol_of_class.iter().enumerate() {
        class_of_symbol[s] = c;
    }
    let moves = state
        .membership
        .iter()
        .zip(demand.symbols())
        .enumerate()
        .filter_map(|(terminal, (&from, &symbol))| {
            let to = class_of_symbol[symbol];
            (to != from).then_some(Move { terminal, from, to })
        })
        .collect();
    MovePlan { moves, symbol_of_class, demand: demand.0.clone() }
}

/// Keeps the class → symbol binding fixed and moves every mismatched
/// terminal.
pub fn static_assign(state: &ClassState, demand: &DemandVector) -> Result<MovePlan> {
    check_consistent(state, demand)?;
    Ok(plan_for_binding(state, demand, state.symbol_of_class.clone()))
}

/// `kept[c][s]`: terminals of class `c` that stay put if `c` carries `s`.
fn kept_counts(state: &ClassState, demand: &DemandVector) -> Vec<Vec<usize>> {
    let m = state.order();
    let mut kept = vec![vec![0; m]; m];
    for (&c, &s) in state.membership.iter().zip(demand.symbols()) {
        kept[c][s] += 1;
    }
    kept
}

fn kept_total(kept: &[Vec<usize>], binding: &[usize]) -> usize {
    binding.iter().enumerate().map(|(c, &s)| kept[c][s]).sum()
}

/// Re-binds classes to symbols so the fewest terminals move.
///
/// Ties keep the current binding when it is among the optimal ones.
pub fn dynamic_assign(state: &ClassState, demand: &DemandVector) -> Result<MovePlan> {
    check_consistent(state, demand)?;
    let kept = kept_counts(state, demand);
    let m = state.order();
    let current = kept_total(&kept, &state.symbol_of_class);

    let best = if m <= EXHAUSTIVE_MAX_ORDER {
        (0..m)
            .permutations(m)
            .map(|p| (kept_total(&kept, &p), p))
            .fold(None::<(usize, Vec<usize>)>, |best, (k, p)| match best {
                Some((bk, _)) if bk >= k => best,
                _ => Some((k, p)),
            })
            .expect("at least one permutation")
    } else {
        let binding = max_weight_assignment(&kept);
        (kept_total(&kept, &binding), binding)
    };

    let binding = if current >= best.0 { state.symbol_of_class.clone() } else { best.1 };
    Ok(plan_for_binding(state, demand, binding))
}

/// Hungarian algorithm on `M × M` integer weights; returns the row → column
/// assignment of maximum total weight.
fn max_weight_assignment(weights: &[Vec<usize>]) -> Vec<usize> {
    let n = weights.len();
    let max = weights.iter().flatten().copied().max().unwrap_or(0) as i64;
    // 1-based arrays with a sentinel column 0.
    let cost = |i: usize, j: usize| max - weights[i - 1][j - 1] as i64;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut row_of_col = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of_col[0] = i;
        let mut j0 = 0;
        let mut min_v = vec![i64::MAX; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of_col[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < min_v[j] {
                        min_v[j] = cur;
                        way[j] = j0;
                    }
                    if min_v[j] < delta {
                        delta = min_v[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_v[j] -= delta;
                }
            }
            j0 = j1;
            if row_of_col[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for j in 1..=n {
        assignment[row_of_col[j] - 1] = j - 1;
    }
    assignment
}

/// Applies a plan produced from `state`.
///
/// A plan whose moves do not start from the current membership (for
/// example one that was already applied) is rejected.
pub fn apply(state: &ClassState, plan: &MovePlan) -> Result<ClassState> {
    if plan.symbol_of_class.len() != state.order() {
        return Err(Error::InconsistentPlan(format!(
            "plan binds {} classes, state has {}",
            plan.symbol_of_class.len(),
            state.order()
        )));
    }
    check_bijection(&plan.symbol_of_class).map_err(|e| Error::InconsistentPlan(e.to_string()))?;
    if plan.demand.len() != state.terminals() {
        return Err(Error::InconsistentPlan("plan was built for a different terminal set".into()));
    }
    let mut membership = state.membership.clone();
    let mut touched = vec![false; membership.len()];
    for mv in &plan.moves {
        let slot = membership.get_mut(mv.terminal).ok_or_else(|| {
            Error::InconsistentPlan(format!("terminal {} does not exist", mv.terminal))
        })?;
        if std::mem::replace(&mut touched[mv.terminal], true) {
            return Err(Error::InconsistentPlan(format!("terminal {} moved twice", mv.terminal)));
        }
        if *slot != mv.from {
            return Err(Error::InconsistentPlan(format!(
                "terminal {} is in class {}, not {} (stale plan?)",
                mv.terminal, *slot, mv.from
            )));
        }
        if mv.to >= state.order() {
            return Err(Error::InconsistentPlan(format!("class {} does not exist", mv.to)));
        }
        *slot = mv.to;
    }
    let next = ClassState { membership, symbol_of_class: plan.symbol_of_class.clone() };
    let unserved = next
        .membership
        .iter()
        .zip(&plan.demand)
        .position(|(&c, &s)| next.symbol_of_class[c] != s);
    if let Some(t) = unserved {
        return Err(Error::InconsistentPlan(format!(
            "terminal {t} would not receive its demanded symbol"
        )));
    }
    Ok(next)
}

/// The eleven-terminal binary example: current classes and next symbols.
pub fn worked_example() -> (ClassState, DemandVector) {
    // Zero-based: T1 is terminal 0, Class1 is class 0, S1 is symbol 0.
    let class1 = [1, 4, 5, 7, 10, 11];
    let next = [
        (1, 2), (4, 1), (5, 2), (7, 2), (10, 1), (11, 2),
        (2, 1), (3, 2), (6, 2), (8, 1), (9, 1),
    ];
    let membership = (1..=11).map(|t| if class1.contains(&t) { 0 } else { 1 }).collect();
    let mut demand = vec![0; 11];
    for (t, s) in next {
        demand[t - 1] = s - 1;
    }
    let alphabet = SymbolAlphabet::new(2).expect("binary");
    (
        ClassState::with_identity_binding(membership, 2).expect("valid example"),
        DemandVector::new(demand, alphabet).expect("valid example"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn moves_of(plan: &MovePlan) -> Vec<(usize, usize)> {
        // (1-based terminal, 1-based destination class)
        let mut v: Vec<_> = plan.moves.iter().map(|m| (m.terminal + 1, m.to + 1)).collect();
        v.sort();
        v
    }

    #[test]
    fn worked_example_static_moves_seven() {
        let (state, demand) = worked_example();
        let plan = static_assign(&state, &demand).unwrap();
        assert_eq!(plan.symbol_of_class, vec![0, 1]);
        assert_eq!(
            moves_of(&plan),
            vec![(1, 2), (2, 1), (5, 2), (7, 2), (8, 1), (9, 1), (11, 2)]
        );
    }

    #[test]
    fn worked_example_dynamic_swaps_binding_and_moves_four() {
        let (state, demand) = worked_example();
        let plan = dynamic_assign(&state, &demand).unwrap();
        // S2 -> Class1, S1 -> Class2.
        assert_eq!(plan.symbol_of_class, vec![1, 0]);
        assert_eq!(moves_of(&plan), vec![(3, 1), (4, 2), (6, 1), (10, 2)]);
    }

    #[test]
    fn worked_example_membership_after_apply() {
        let (state, demand) = worked_example();
        let plan = dynamic_assign(&state, &demand).unwrap();
        let next = apply(&state, &plan).unwrap();
        let one_based = |c| next.members(c).iter().map(|t| t + 1).collect::<Vec<_>>();
        assert_eq!(one_based(0), vec![1, 3, 5, 6, 7, 11]);
        assert_eq!(one_based(1), vec![2, 4, 8, 9, 10]);
        assert_eq!(next.symbol_of_class(), &[1, 0]);
    }

    #[test]
    fn satisfied_demand_needs_no_moves() {
        let state = ClassState::with_identity_binding(vec![0, 1, 1, 0], 2).unwrap();
        let demand = DemandVector::new(vec![0, 1, 1, 0], SymbolAlphabet::new(2).unwrap()).unwrap();
        assert!(static_assign(&state, &demand).unwrap().moves.is_empty());
        let plan = dynamic_assign(&state, &demand).unwrap();
        assert!(plan.moves.is_empty());
        assert_eq!(apply(&state, &plan).unwrap(), state);
    }

    #[test]
    fn uniform_demand_collapses_into_one_class() {
        let state = ClassState::with_identity_binding(vec![0, 1, 1, 0, 1], 2).unwrap();
        let demand = DemandVector::new(vec![0; 5], SymbolAlphabet::new(2).unwrap()).unwrap();
        let plan = dynamic_assign(&state, &demand).unwrap();
        let next = apply(&state, &plan).unwrap();
        let sizes = next.class_sizes();
        assert!(sizes.contains(&5) && sizes.contains(&0));
        let holder = plan.symbol_of_class.iter().position(|&s| s == 0).unwrap();
        assert_eq!(plan.move_count(), 5 - state.class_sizes()[holder]);
    }

    #[test]
    fn single_terminal_moves_at_most_once() {
        let alphabet = SymbolAlphabet::new(2).unwrap();
        for (class, symbol) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let state = ClassState::with_identity_binding(vec![class], 2).unwrap();
            let demand = DemandVector::new(vec![symbol], alphabet).unwrap();
            assert!(static_assign(&state, &demand).unwrap().move_count() <= 1);
            assert_eq!(dynamic_assign(&state, &demand).unwrap().move_count(), 0);
        }
    }

    #[test]
    fn double_apply_is_rejected() {
        let (state, demand) = worked_example();
        let plan = dynamic_assign(&state, &demand).unwrap();
        let next = apply(&state, &plan).unwrap();
        assert!(matches!(apply(&next, &plan), Err(Error::InconsistentPlan(_))));
    }

    #[test]
    fn inconsistent_inputs_are_rejected() {
        let (state, _) = worked_example();
        let short = DemandVector::new(vec![0; 3], SymbolAlphabet::new(2).unwrap()).unwrap();
        assert!(static_assign(&state, &short).is_err());
        assert!(SymbolAlphabet::new(1).is_err());
        assert!(ClassState::new(vec![0, 1], vec![0, 0]).is_err());
        assert!(ClassState::new(vec![0, 2], vec![0, 1]).is_err());
    }

    #[test]
    fn hungarian_matches_exhaustive_for_large_alphabets() {
        use rand::{Rng, SeedableRng};
        let mut rng = crate::seeding::TrialRng::seed_from_u64(77);
        for _ in 0..200 {
            let m = rng.random_range(2..=7);
            let w: Vec<Vec<usize>> = (0..m).map(|_| (0..m).map(|_| rng.random_range(0..6)).collect()).collect();
            let best = (0..m).permutations(m).map(|p| kept_total(&w, &p)).max().unwrap();
            let got = max_weight_assignment(&w);
            check_bijection(&got).unwrap();
            assert_eq!(kept_total(&w, &got), best);
        }
    }

    #[test]
    fn large_alphabet_dynamic_assign() {
        let m = 8;
        let membership: Vec<usize> = (0..40).map(|t| t % m).collect();
        // Everyone in class c wants symbol (c + 3) % m: rebinding moves nobody.
        let demand: Vec<usize> = membership.iter().map(|&c| (c + 3) % m).collect();
        let state = ClassState::with_identity_binding(membership, m).unwrap();
        let demand = DemandVector::new(demand, SymbolAlphabet::new(m).unwrap()).unwrap();
        let plan = dynamic_assign(&state, &demand).unwrap();
        assert_eq!(plan.move_count(), 0);
        apply(&state, &plan).unwrap();
    }

    fn instance() -> impl Strategy<Value = (ClassState, DemandVector)> {
        (2usize..=4, 1usize..=14).prop_flat_map(|(m, n)| {
            (
                proptest::collection::vec(0..m, n),
                proptest::collection::vec(0..m, n),
                Just((0..m).collect::<Vec<_>>()).prop_shuffle(),
            )
                .prop_map(move |(membership, demand, binding)| {
                    (
                        ClassState::new(membership, binding).unwrap(),
                        DemandVector::new(demand, SymbolAlphabet::new(m).unwrap()).unwrap(),
                    )
                })
        })
    }

    proptest! {
        #[test]
        fn apply_serves_every_demand((state, demand) in instance()) {
            for plan in [static_assign(&state, &demand).unwrap(), dynamic_assign(&state, &demand).unwrap()] {
                let next = apply(&state, &plan).unwrap();
                for (t, &s) in demand.symbols().iter().enumerate() {
                    prop_assert_eq!(next.symbol_of_class()[next.class_of(t)], s);
                }
                prop_assert_eq!(next.class_sizes().iter().sum::<usize>(), state.terminals());
            }
        }

        #[test]
        fn dynamic_never_moves_more_than_static((state, demand) in instance()) {
            let s = static_assign(&state, &demand).unwrap().move_count();
            let d = dynamic_assign(&state, &demand).unwrap().move_count();
            prop_assert!(d <= s);
        }

        #[test]
        fn binary_dynamic_is_min_of_two_bindings(
            membership in proptest::collection::vec(0usize..2, 1..20),
            seed in any::<u64>(),
        ) {
            let demand: Vec<usize> = membership.iter().enumerate().map(|(i, _)| ((seed >> (i % 64)) & 1) as usize).collect();
            let state = ClassState::with_identity_binding(membership.clone(), 2).unwrap();
            let mismatches_identity = membership.iter().zip(&demand).filter(|(c, s)| c != s).count();
            let mismatches_swapped = membership.iter().zip(&demand).filter(|(c, s)| c == s).count();
            let demand = DemandVector::new(demand, SymbolAlphabet::new(2).unwrap()).unwrap();
            let d = dynamic_assign(&state, &demand).unwrap().move_count();
            prop_assert_eq!(d, mismatches_identity.min(mismatches_swapped));
        }
    }
}
