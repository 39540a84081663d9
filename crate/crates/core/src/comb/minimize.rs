// SPDX-License-Identifier: Apache-2.0

//! Two-level minimization of truth-table outputs into sum-of-products form.
//!
//! Primes are grown from each ON point by dropping literals while no OFF
//! point is covered, which treats rows the table omits and explicit `x`
//! cells alike as don't-cares. The cover is chosen exactly by Petrick's
//! method when few non-essential primes remain, greedily otherwise.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use thiserror::Error;

use super::table::{normalize_name, TruthTable};

/// Largest number of non-essential primes handed to Petrick's method.
pub const PETRICK_LIMIT: usize = 24;

/// Cubes explored while generating primes before giving up.
pub const EXPANSION_LIMIT: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Literal {
    pub input: String,
    pub positive: bool,
}

impl Literal {
    pub fn new(input: impl Into<String>, positive: bool) -> Self {
        Self {
            input: input.into(),
            positive,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.input)
        } else {
            write!(f, "~{}", self.input)
        }
    }
}

/// One output as an OR of AND-terms, or a constant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SopExpression {
    pub output: String,
    pub terms: Vec<Vec<Literal>>,
    pub constant: Option<bool>,
}

impl SopExpression {
    pub fn constant(output: impl Into<String>, value: bool) -> Self {
        Self {
            output: output.into(),
            terms: Vec::new(),
            constant: Some(value),
        }
    }

    pub fn literal_count(&self) -> usize {
        self.terms.iter().map(Vec::len).sum()
    }

    /// Verilog right-hand side.
    pub fn to_verilog(&self) -> String {
        if let Some(c) = self.constant {
            return if c { "1'b1".into() } else { "1'b0".into() };
        }
        self.terms
            .iter()
            .map(|t| {
                let lits: Vec<String> = t.iter().map(ToString::to_string).collect();
                format!("({})", lits.join(" & "))
            })
            .collect::<Vec<_>>()
            .join(" | ")
    }
}

/// Canonical text form: `y = a & ~b | c`, or `y = 0` for a constant.
impl fmt::Display for SopExpression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(c) = self.constant {
            return write!(f, "{} = {}", self.output, u8::from(c));
        }
        let terms: Vec<String> = self
            .terms
            .iter()
            .map(|t| t.iter().map(ToString::to_string).collect::<Vec<_>>().join(" & "))
            .collect();
        write!(f, "{} = {}", self.output, terms.join(" | "))
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MinimizeError {
    #[error("table has no output named {0:?}")]
    UnknownOutput(String),
    #[error("prime generation exceeded {EXPANSION_LIMIT} cubes")]
    TooComplex,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("no value for input {0:?}")]
pub struct MissingInput(pub String);

/// Evaluate an expression under an assignment of input names to values.
pub fn evaluate_sop<S: std::borrow::Borrow<str> + Ord>(
    expr: &SopExpression,
    assignment: &BTreeMap<S, bool>,
) -> Result<bool, MissingInput> {
    if let Some(c) = expr.constant {
        return Ok(c);
    }
    let lookup = |name: &str| -> Result<bool, MissingInput> {
        assignment
            .iter()
            .find(|(k, _)| (*k).borrow() == name)
            .map(|(_, v)| *v)
            .ok_or_else(|| MissingInput(name.to_string()))
    };
    let mut any = false;
    for term in &expr.terms {
        let mut all = true;
        for lit in term {
            all &= lookup(&lit.input)? == lit.positive;
        }
        any |= all;
    }
    Ok(any)
}

/// A product term over input indices: bits set in `care` are literals,
/// their polarity given by `value`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub(crate) struct Cube {
    pub value: u64,
    pub care: u64,
}

impl Cube {
    pub fn contains(self, point: u64) -> bool {
        point & self.care == self.value
    }
}

/// All prime implicants of the function with the given ON and OFF points.
pub(crate) fn prime_implicants(n: usize, on: &[u64], off: &[u64]) -> Result<Vec<Cube>, MinimizeError> {
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let valid = |c: Cube| !off.iter().any(|&o| c.contains(o));
    let mut visited: HashSet<Cube> = HashSet::new();
    let mut primes: BTreeSet<Cube> = BTreeSet::new();
    for &p in on {
        let start = Cube { value: p, care: full };
        if !visited.insert(start) {
            continue;
        }
        let mut stack = vec![start];
        while let Some(c) = stack.pop() {
            let mut grown = false;
            let mut bits = c.care;
            while bits != 0 {
                let b = bits & bits.wrapping_neg();
                bits &= bits - 1;
                let next = Cube {
                    value: c.value & !b,
                    care: c.care & !b,
                };
                if valid(next) {
                    grown = true;
                    if visited.insert(next) {
                        if visited.len() > EXPANSION_LIMIT {
                            return Err(MinimizeError::TooComplex);
                        }
                        stack.push(next);
                    }
                }
            }
            if !grown {
                primes.insert(c);
            }
        }
    }
    Ok(primes.into_iter().collect())
}

fn cube_literals(c: Cube, inputs: &[String]) -> Vec<Literal> {
    let mut lits: Vec<Literal> = (0..inputs.len())
        .filter(|i| c.care >> i & 1 == 1)
        .map(|i| Literal::new(inputs[i].clone(), c.value >> i & 1 == 1))
        .collect();
    lits.sort();
    lits
}

/// Products kept between Petrick expansion steps before switching to greedy.
const PETRICK_PRODUCT_LIMIT: usize = 50_000;

/// Smallest subset of `candidates` covering every point, ties broken by
/// literal count and then by literal order. `None` when the expansion
/// grows past [`PETRICK_PRODUCT_LIMIT`].
fn petrick(points: &[u64], candidates: &[Cube], inputs: &[String]) -> Option<Vec<usize>> {
    let mut products: Vec<u32> = vec![0];
    for &p in points {
        let clause: u32 = candidates
            .iter()
            .enumerate()
            .filter(|(_, c)| c.contains(p))
            .fold(0, |acc, (i, _)| acc | 1 << i);
        let mut next: Vec<u32> = Vec::new();
        for &t in &products {
            if t & clause != 0 {
                next.push(t);
                continue;
            }
            let mut bits = clause;
            while bits != 0 {
                let b = bits & bits.wrapping_neg();
                bits &= bits - 1;
                next.push(t | b);
            }
        }
        next.sort_unstable_by_key(|t| (t.count_ones(), *t));
        next.dedup();
        // absorption: drop any product that is a superset of a kept one
        let mut kept: Vec<u32> = Vec::new();
        for t in next {
            if !kept.iter().any(|&k| k & t == k) {
                kept.push(t);
            }
        }
        if kept.len() > PETRICK_PRODUCT_LIMIT {
            return None;
        }
        products = kept;
    }
    let literal_cost = |t: u32| -> usize {
        (0..candidates.len())
            .filter(|i| t >> i & 1 == 1)
            .map(|i| candidates[i].care.count_ones() as usize)
            .sum()
    };
    let key = |t: u32| -> Vec<Vec<Literal>> {
        (0..candidates.len())
            .filter(|i| t >> i & 1 == 1)
            .map(|i| cube_literals(candidates[i], inputs))
            .collect()
    };
    let best = products
        .into_iter()
        .min_by(|&a, &b| {
            (a.count_ones(), literal_cost(a))
                .cmp(&(b.count_ones(), literal_cost(b)))
                .then_with(|| key(a).cmp(&key(b)))
        })
        .unwrap_or(0);
    Some((0..candidates.len()).filter(|i| best >> i & 1 == 1).collect())
}

fn greedy(points: &[u64], candidates: &[Cube], inputs: &[String]) -> Vec<usize> {
    let mut uncovered: Vec<u64> = points.to_vec();
    let mut chosen = Vec::new();
    while !uncovered.is_empty() {
        let best = (0..candidates.len())
            .filter(|i| !chosen.contains(i))
            .max_by(|&a, &b| {
                let ca = uncovered.iter().filter(|&&p| candidates[a].contains(p)).count();
                let cb = uncovered.iter().filter(|&&p| candidates[b].contains(p)).count();
                ca.cmp(&cb)
                    .then_with(|| cube_literals(candidates[b], inputs).cmp(&cube_literals(candidates[a], inputs)))
            })
            .expect("every ON point lies in some prime");
        uncovered.retain(|&p| !candidates[best].contains(p));
        chosen.push(best);
    }
    chosen
}

/// Choose primes covering every ON point.
pub(crate) fn select_cover(on: &[u64], primes: &[Cube], inputs: &[String]) -> Vec<Cube> {
    let mut selected: Vec<Cube> = Vec::new();
    for &p in on {
        let covering: Vec<&Cube> = primes.iter().filter(|c| c.contains(p)).collect();
        if covering.len() == 1 && !selected.contains(covering[0]) {
            selected.push(*covering[0]);
        }
    }
    let remaining: Vec<u64> = on
        .iter()
        .copied()
        .filter(|&p| !selected.iter().any(|c| c.contains(p)))
        .collect();
    if !remaining.is_empty() {
        let mut candidates: Vec<Cube> = primes
            .iter()
            .copied()
            .filter(|c| !selected.contains(c) && remaining.iter().any(|&p| c.contains(p)))
            .collect();
        candidates.sort_by_key(|c| (c.care.count_ones(), cube_literals(*c, inputs)));
        let exact = if candidates.len() <= PETRICK_LIMIT {
            petrick(&remaining, &candidates, inputs)
        } else {
            None
        };
        let picks = exact.unwrap_or_else(|| greedy(&remaining, &candidates, inputs));
        selected.extend(picks.into_iter().map(|i| candidates[i]));
    }
    selected
}

/// Minimize one output of `table`.
pub fn minimize(table: &TruthTable, output: &str) -> Result<SopExpression, MinimizeError> {
    let o = table
        .output_index(output)
        .ok_or_else(|| MinimizeError::UnknownOutput(output.to_string()))?;
    let name = table.outputs()[o].clone();
    let mut on = Vec::new();
    let mut off = Vec::new();
    for r in 0..table.rows().len() {
        match table.output_cell(r, o).as_bool() {
            Some(true) => on.push(table.pattern(r)),
            Some(false) => off.push(table.pattern(r)),
            None => {}
        }
    }
    if on.is_empty() {
        return Ok(SopExpression::constant(name, false));
    }
    if off.is_empty() {
        return Ok(SopExpression::constant(name, true));
    }
    let primes = prime_implicants(table.inputs().len(), &on, &off)?;
    let cover = select_cover(&on, &primes, table.inputs());
    let mut terms: Vec<Vec<Literal>> = cover.into_iter().map(|c| cube_literals(c, table.inputs())).collect();
    terms.sort();
    Ok(SopExpression {
        output: name,
        terms,
        constant: None,
    })
}

/// Minimize every output, in table order.
pub fn minimize_all(table: &TruthTable) -> Result<Vec<SopExpression>, MinimizeError> {
    table.outputs().iter().map(|o| minimize(table, o)).collect()
}

/// Minimize the output named `output` after normalizing it like table names.
pub fn minimize_named(table: &TruthTable, output: &str) -> Result<SopExpression, MinimizeError> {
    minimize(table, &normalize_name(output))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comb::table::{parse_truth_table, Cell};
    use proptest::prelude::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("i{i}")).collect()
    }

    /// Table over `n` inputs; `f(p)` gives the output cell for pattern `p`.
    fn table_from(n: usize, f: impl Fn(u64) -> Cell) -> TruthTable {
        let rows = (0..1u64 << n)
            .map(|p| {
                let mut row: Vec<Cell> = (0..n).map(|i| if p >> i & 1 == 1 { Cell::One } else { Cell::Zero }).collect();
                row.push(f(p));
                row
            })
            .collect();
        TruthTable::new(names(n), vec!["y".into()], rows).unwrap()
    }

    fn eval_at(expr: &SopExpression, n: usize, p: u64) -> bool {
        let assignment: BTreeMap<String, bool> = (0..n).map(|i| (format!("i{i}"), p >> i & 1 == 1)).collect();
        evaluate_sop(expr, &assignment).unwrap()
    }

    /// Oracle: fewest terms (then fewest literals) over all subsets of all
    /// implicants, found by exhaustive enumeration of cubes.
    fn brute_minimal_cost(n: usize, on: &[u64], off: &[u64]) -> (usize, usize) {
        let mut implicants = Vec::new();
        for care in 0..1u64 << n {
            for value in 0..1u64 << n {
                if value & !care != 0 {
                    continue;
                }
                let c = Cube { value, care };
                if !off.iter().any(|&o| c.contains(o)) && on.iter().any(|&p| c.contains(p)) {
                    implicants.push(c);
                }
            }
        }
        let mut best = (usize::MAX, usize::MAX);
        // search by increasing term count
        fn rec(
            start: usize,
            depth: usize,
            imps: &[Cube],
            on: &[u64],
            chosen: &mut Vec<Cube>,
            best: &mut (usize, usize),
        ) {
            if on.iter().all(|&p| chosen.iter().any(|c| c.contains(p))) {
                let lits = chosen.iter().map(|c| c.care.count_ones() as usize).sum();
                *best = (*best).min((chosen.len(), lits));
                return;
            }
            if depth == 0 {
                return;
            }
            for i in start..imps.len() {
                chosen.push(imps[i]);
                rec(i + 1, depth - 1, imps, on, chosen, best);
                chosen.pop();
            }
        }
        for k in 1..=on.len() {
            rec(0, k, &implicants, on, &mut Vec::new(), &mut best);
            if best.0 != usize::MAX {
                break;
            }
        }
        best
    }

    #[test]
    fn exemplar_table_is_or() {
        let t = parse_truth_table(crate::comb::table::tests_support::EXEMPLAR).unwrap();
        let e = minimize(&t, "x").unwrap();
        assert_eq!(e.to_verilog(), "(a[1]) | (a[2])");
    }

    #[test]
    fn karnaugh_map_function() {
        // out = 1 for minterms of the 4-input K-map (a b c d, a is MSB)
        let ones = [0u64, 1, 3, 4, 7, 9, 10, 11, 12, 13, 14];
        let rows: Vec<Vec<Cell>> = (0..16u64)
            .map(|m| {
                let bit = |k: u32| if m >> k & 1 == 1 { Cell::One } else { Cell::Zero };
                vec![bit(3), bit(2), bit(1), bit(0), if ones.contains(&m) { Cell::One } else { Cell::Zero }]
            })
            .collect();
        let t = TruthTable::new(
            ["a", "b", "c", "d"].map(String::from).to_vec(),
            vec!["out".into()],
            rows,
        )
        .unwrap();
        let e = minimize(&t, "out").unwrap();
        for m in 0..16u64 {
            let a: BTreeMap<&str, bool> = [("a", m >> 3 & 1 == 1), ("b", m >> 2 & 1 == 1), ("c", m >> 1 & 1 == 1), ("d", m & 1 == 1)]
                .into_iter()
                .collect();
            assert_eq!(evaluate_sop(&e, &a).unwrap(), ones.contains(&m), "minterm {m}");
        }
        let pos: Vec<u64> = ones.to_vec();
        let neg: Vec<u64> = (0..16).filter(|m| !ones.contains(m)).collect();
        // same variable order as the table: bit i = input i, so remap
        let remap = |m: u64| (m >> 3 & 1) | (m >> 2 & 1) << 1 | (m >> 1 & 1) << 2 | (m & 1) << 3;
        let on: Vec<u64> = pos.iter().map(|&m| remap(m)).collect();
        let off: Vec<u64> = neg.iter().map(|&m| remap(m)).collect();
        assert_eq!((e.terms.len(), e.literal_count()), brute_minimal_cost(4, &on, &off));
    }

    #[test]
    fn constants() {
        let t = table_from(2, |_| Cell::Zero);
        assert_eq!(minimize(&t, "y").unwrap(), SopExpression::constant("y", false));
        let t = table_from(2, |_| Cell::One);
        assert_eq!(minimize(&t, "y").unwrap().to_verilog(), "1'b1");
        let t = table_from(2, |p| if p == 0 { Cell::One } else { Cell::DontCare });
        assert_eq!(minimize(&t, "y").unwrap().constant, Some(true));
    }

    #[test]
    fn unknown_output() {
        let t = table_from(1, |_| Cell::One);
        assert_eq!(minimize(&t, "z"), Err(MinimizeError::UnknownOutput("z".into())));
    }

    #[test]
    fn missing_input_reported() {
        let e = SopExpression {
            output: "y".into(),
            terms: vec![vec![Literal::new("a", true)]],
            constant: None,
        };
        assert_eq!(evaluate_sop::<&str>(&e, &BTreeMap::new()), Err(MissingInput("a".into())));
    }

    #[test]
    fn dont_cares_are_exploited() {
        // y = 1 at 3, 0 at 0, x elsewhere: a single literal suffices
        let t = table_from(2, |p| match p {
            3 => Cell::One,
            0 => Cell::Zero,
            _ => Cell::DontCare,
        });
        let e = minimize(&t, "y").unwrap();
        assert_eq!(e.terms.len(), 1);
        assert_eq!(e.literal_count(), 1);
    }

    #[test]
    fn every_three_input_function_is_exact_and_minimal() {
        for f in 0..256u64 {
            let t = table_from(3, |p| if f >> p & 1 == 1 { Cell::One } else { Cell::Zero });
            let e = minimize(&t, "y").unwrap();
            for p in 0..8 {
                assert_eq!(eval_at(&e, 3, p), f >> p & 1 == 1, "f={f:#x} p={p}");
            }
            if e.constant.is_none() {
                let on: Vec<u64> = (0..8).filter(|p| f >> p & 1 == 1).collect();
                let off: Vec<u64> = (0..8).filter(|p| f >> p & 1 == 0).collect();
                assert_eq!((e.terms.len(), e.literal_count()), brute_minimal_cost(3, &on, &off), "f={f:#x}");
            }
        }
    }

    #[test]
    fn greedy_cover_is_complete() {
        let n = 5;
        let on: Vec<u64> = (0..32u64).filter(|p| p.count_ones() % 2 == 1 || *p == 0).collect();
        let off: Vec<u64> = (0..32u64).filter(|p| !on.contains(p)).collect();
        let primes = prime_implicants(n, &on, &off).unwrap();
        let picks = greedy(&on, &primes, &names(n));
        for &p in &on {
            assert!(picks.iter().any(|&i| primes[i].contains(p)));
        }
        let petrick_picks = select_cover(&on, &primes, &names(n));
        assert!(petrick_picks.len() <= picks.len());
    }

    fn cell_strategy() -> impl Strategy<Value = Cell> {
        prop_oneof![Just(Cell::Zero), Just(Cell::One), Just(Cell::DontCare)]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn cover_agrees_on_care_points(n in 1usize..=5, cells in proptest::collection::vec(cell_strategy(), 32)) {
            let t = table_from(n, |p| cells[p as usize]);
            let e = minimize(&t, "y").unwrap();
            for p in 0..1u64 << n {
                if let Some(v) = cells[p as usize].as_bool() {
                    prop_assert_eq!(eval_at(&e, n, p), v);
                }
            }
        }

        #[test]
        fn every_term_is_prime(n in 1usize..=5, cells in proptest::collection::vec(cell_strategy(), 32)) {
            let t = table_from(n, |p| cells[p as usize]);
            let e = minimize(&t, "y").unwrap();
            let off: Vec<u64> = (0..1u64 << n).filter(|&p| cells[p as usize] == Cell::Zero).collect();
            for term in &e.terms {
                // dropping any literal must cover an OFF point
                for skip in 0..term.len() {
                    let covers_off = off.iter().any(|&p| {
                        term.iter().enumerate().filter(|(i, _)| *i != skip).all(|(_, l)| {
                            let idx: usize = l.input[1..].parse().unwrap();
                            (p >> idx & 1 == 1) == l.positive
                        })
                    });
                    prop_assert!(covers_off);
                }
            }
        }

        #[test]
        fn minimal_for_four_inputs(f in 0u64..1 << 16) {
            let t = table_from(4, |p| if f >> p & 1 == 1 { Cell::One } else { Cell::Zero });
            let e = minimize(&t, "y").unwrap();
            if e.constant.is_none() {
                let on: Vec<u64> = (0..16).filter(|p| f >> p & 1 == 1).collect();
                let off: Vec<u64> = (0..16).filter(|p| f >> p & 1 == 0).collect();
                prop_assert_eq!((e.terms.len(), e.literal_count()), brute_minimal_cost(4, &on, &off));
            }
        }
    }
}
