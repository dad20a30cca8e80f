//! Exhaustive verification of the transition, monotonicity, sure-thing and
//! continuity axioms against a preference oracle on finite grids, plus null
//! events and tri-partitions derived from oracle answers alone.

pub mod faults;
mod oracle;

use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::curve::MAX_BISECTION_STEPS;
use crate::engine::TriPartition;
use crate::error::{Error, Result};
use crate::space::{Act, Event, FilteredSpace, NullFamily};

pub use oracle::{Answer, FunctionalOracle, InducedOracle, PreferenceOracle};

/// Oracle query budget per check.
pub const QUERY_CAP: usize = 1_000_000;

/// Slack when comparing two thresholds found by bisection.
const THRESHOLD_SLACK: f64 = 1e-7;

/// Width above which an interval of constants indifferent to one act counts
/// as a transitivity failure. Curves flat at a point (x³ at 0) widen the
/// verdict band to roughly its cube root, so this sits well above 1e-4.
const BOUNDARY_GAP: f64 = 1e-3;

/// Largest constant tried while bracketing an oracle threshold.
const BRACKET_LIMIT: f64 = 1e12;

/// Outcome values and the maximum number of distinct values in a simple act.
#[derive(Debug, Clone, PartialEq)]
pub struct ActGrid {
    values: Vec<f64>,
    depth: usize,
}

impl Default for ActGrid {
    fn default() -> Self {
        Self {
            values: vec![-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0],
            depth: 3,
        }
    }
}

impl ActGrid {
    pub fn new(mut values: Vec<f64>, depth: usize) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Precondition("grid values must be finite".into()));
        }
        values.sort_by(f64::total_cmp);
        values.dedup();
        if !values.contains(&0.0) {
            return Err(Error::Precondition("the grid must contain 0".into()));
        }
        if depth == 0 {
            return Err(Error::Precondition("grid depth must be positive".into()));
        }
        Ok(Self { values, depth })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Half-width of the constant range searched for non-degeneracy.
    pub fn extension(&self) -> f64 {
        4.0 * self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Grid values plus the two extension constants.
    pub fn extended_constants(&self) -> Vec<f64> {
        let e = self.extension();
        let mut out = vec![-e];
        out.extend_from_slice(&self.values);
        out.push(e);
        out.dedup();
        out
    }

    /// All acts at time `j` taking grid values on `atoms` (0 elsewhere) with
    /// at most `depth` distinct values on those atoms, in odometer order.
    pub fn acts_on(&self, space: &FilteredSpace, j: usize, atoms: &[usize]) -> Vec<Act> {
        let k = self.values.len();
        let mut digits = vec![0usize; atoms.len()];
        let mut out = Vec::new();
        loop {
            let mut distinct: Vec<usize> = digits.clone();
            distinct.sort_unstable();
            distinct.dedup();
            if distinct.len() <= self.depth {
                let mut values = vec![0.0; space.n_states()];
                for (slot, &a) in atoms.iter().enumerate() {
                    for &s in space.atom(j, a) {
                        values[s] = self.values[digits[slot]];
                    }
                }
                out.push(Act::new(j, values));
            }
            let mut pos = atoms.len();
            loop {
                if pos == 0 {
                    return out;
                }
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < k {
                    break;
                }
                digits[pos] = 0;
            }
        }
    }

    /// All grid acts at time `j`.
    pub fn acts(&self, space: &FilteredSpace, j: usize) -> Vec<Act> {
        let atoms: Vec<usize> = (0..space.n_atoms(j)).collect();
        self.acts_on(space, j, &atoms)
    }

    fn admissible(&self, act: &Act) -> bool {
        let mut seen: Vec<u64> = Vec::new();
        for v in &act.values {
            let b = (v + 0.0).to_bits();
            if !seen.contains(&b) {
                seen.push(b);
            }
        }
        // the zero outside an act's support does not count against depth
        seen.retain(|b| *b != 0f64.to_bits());
        seen.len() <= self.depth
    }
}

/// The axiom families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axiom {
    Transition,
    Monotonicity,
    SureThing,
    Continuity,
}

impl fmt::Display for Axiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axiom::Transition => "T",
            Axiom::Monotonicity => "M",
            Axiom::SureThing => "ST",
            Axiom::Continuity => "C",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClauseResult {
    pub name: String,
    pub passed: bool,
    pub counterexample: Option<String>,
    pub note: Option<String>,
}

impl ClauseResult {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            passed: true,
            counterexample: None,
            note: None,
        }
    }

    fn fail(&mut self, witness: String) {
        if self.passed {
            self.passed = false;
            self.counterexample = Some(witness);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxiomReport {
    pub axiom: Axiom,
    pub time_index: usize,
    pub clauses: Vec<ClauseResult>,
    pub queries: usize,
    pub truncated: bool,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.clauses.iter().all(|c| c.passed)
    }

    pub fn clause(&self, name: &str) -> Option<&ClauseResult> {
        self.clauses.iter().find(|c| c.name == name)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "axiom {}.{}", self.axiom, self.time_index);
        for c in &self.clauses {
            let _ = writeln!(
                out,
                "  {:<24} {}",
                c.name,
                if c.passed { "PASS" } else { "FAIL" }
            );
            if let Some(w) = &c.counterexample {
                let _ = writeln!(out, "    counterexample: {w}");
            }
            if let Some(n) = &c.note {
                let _ = writeln!(out, "    note: {n}");
            }
        }
        let _ = writeln!(
            out,
            "  queries: {}{}",
            self.queries,
            if self.truncated { " (truncated at cap)" } else { "" }
        );
        out
    }
}

/// How the approximating sequence f_n → f is built in the continuity check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceStyle {
    /// f ± 1/n.
    Shift,
    /// f ± 1/n on a single atom, one atom at a time.
    OneAtom,
    /// f + e_n/n with e_n uniform in [−1, 1] per atom, seeded.
    Random(u64),
}

impl fmt::Display for SequenceStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SequenceStyle::Shift => f.write_str("shift"),
            SequenceStyle::OneAtom => f.write_str("one-atom"),
            SequenceStyle::Random(seed) => write!(f, "random(seed {seed})"),
        }
    }
}

/// Sample indices n at which the sequences are probed; the relation must
/// hold on the last three for "eventually".
const SEQUENCE_SAMPLES: [f64; 7] = [1.0, 10.0, 100.0, 1e3, 1e4, 1e5, 1e6];
const EVENTUAL_TAIL: usize = 3;

/// Thresholds per atom at time i: `lower` = inf{a : a ≽ f} and
/// `upper` = sup{b : b ≼ f}, infinite when the set is empty or unbounded.
#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

fn key(i: usize, act: &Act) -> (usize, Vec<u64>) {
    (i, act.values.iter().map(|v| (v + 0.0).to_bits()).collect())
}

fn show(space: &FilteredSpace, act: &Act) -> String {
    let parts: Vec<String> = space
        .partition(act.time_index)
        .iter()
        .map(|atom| {
            let names: Vec<&str> = atom.iter().map(|&s| space.state_name(s)).collect();
            format!("{}:{}", names.join("+"), act.values[atom[0]])
        })
        .collect();
    format!("[{}]", parts.join(" "))
}

/// Runs the axiom checks against one oracle, memoizing thresholds and null
/// families across checks and counting queries.
pub struct AxiomChecker<'a> {
    oracle: &'a dyn PreferenceOracle,
    grid: ActGrid,
    cap: usize,
    queries: Cell<usize>,
    thresholds: RefCell<HashMap<(usize, Vec<u64>), Rc<Thresholds>>>,
    nulls: RefCell<HashMap<usize, NullFamily>>,
}

impl<'a> AxiomChecker<'a> {
    pub fn new(oracle: &'a dyn PreferenceOracle, grid: ActGrid) -> Self {
        Self {
            oracle,
            grid,
            cap: QUERY_CAP,
            queries: Cell::new(0),
            thresholds: RefCell::new(HashMap::new()),
            nulls: RefCell::new(HashMap::new()),
        }
    }

    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn grid(&self) -> &ActGrid {
        &self.grid
    }

    pub fn queries(&self) -> usize {
        self.queries.get()
    }

    fn space(&self) -> &FilteredSpace {
        self.oracle.space()
    }

    fn ask(&self, i: usize, g: &Act, f: &Act, event: &Event) -> Answer {
        self.queries.set(self.queries.get() + 1);
        self.oracle.query(i, g, f, event)
    }

    fn over(&self, start: usize) -> bool {
        self.queries.get() - start > self.cap
    }

    fn atom_event(&self, i: usize, a: usize) -> Event {
        Event::from_atoms(self.space(), i, &[a])
    }

    fn omega(&self, i: usize) -> Event {
        Event::from_atoms(self.space(), i, &(0..self.space().n_atoms(i)).collect::<Vec<_>>())
    }

    /// Bracket (last false, first true) of a predicate over constants that
    /// is false below some point and true above it, bisected until the
    /// floats collapse. Both ends are infinite when no bracket exists.
    fn threshold(&self, inside: impl Fn(f64) -> bool) -> (f64, f64) {
        let mut lo = -1.0f64;
        let mut hi = 1.0f64;
        while inside(lo) {
            hi = lo;
            lo *= 2.0;
            if lo < -BRACKET_LIMIT {
                return (f64::NEG_INFINITY, f64::NEG_INFINITY);
            }
        }
        while !inside(hi) {
            lo = hi;
            hi *= 2.0;
            if hi > BRACKET_LIMIT {
                return (f64::INFINITY, f64::INFINITY);
            }
        }
        for _ in 0..MAX_BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if inside(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        (lo, hi)
    }

    /// Per-atom thresholds of f (known at i + 1) against constants at i.
    pub fn thresholds(&self, i: usize, f: &Act) -> Rc<Thresholds> {
        let k = key(i, f);
        if let Some(t) = self.thresholds.borrow().get(&k) {
            return t.clone();
        }
        let space = self.space();
        let mut lower = Vec::with_capacity(space.n_atoms(i));
        let mut upper = Vec::with_capacity(space.n_atoms(i));
        for a in 0..space.n_atoms(i) {
            let event = self.atom_event(i, a);
            let constant = |c: f64| space.constant(i, c);
            lower.push(self.threshold(|c| self.ask(i, &constant(c), f, &event).succeq).1);
            // sup{b : b ≼ f}: "not b ≼ f" switches on just above it
            upper.push(self.threshold(|c| !self.ask(i, &constant(c), f, &event).preceq).0);
        }
        let t = Rc::new(Thresholds { lower, upper });
        self.thresholds.borrow_mut().insert(k, t.clone());
        t
    }

    /// The oracle's certainty equivalent of f at time i: per atom, the
    /// midpoint of the two thresholds. Fails when either is infinite.
    pub fn certainty_equivalent(&self, i: usize, f: &Act) -> Result<Act> {
        let t = self.thresholds(i, f);
        let space = self.space();
        let mut values = vec![0.0; space.n_states()];
        for (a, atom) in space.partition(i).iter().enumerate() {
            let (lo, hi) = (t.lower[a], t.upper[a]);
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Bracket(format!(
                    "no indifferent constant on atom {} for {}",
                    self.atom_event(i, a).names(space),
                    show(space, f)
                )));
            }
            for &s in atom {
                values[s] = 0.5 * (lo + hi);
            }
        }
        Ok(Act::new(i, values))
    }

    /// Null events at time i, derived from the comparisons between i − 1 and
    /// i: an atom is null when replacing f on it by any grid value never
    /// breaks an indifference g ∼ f. Time 0 has no null events.
    pub fn null_family(&self, i: usize) -> NullFamily {
        if let Some(n) = self.nulls.borrow().get(&i) {
            return n.clone();
        }
        let space = self.space();
        let mut atoms = Vec::new();
        if i > 0 {
            let acts = self.grid.acts(space, i);
            for a in 0..space.n_atoms(i) {
                let event = self.atom_event(i, a);
                let mut null = true;
                'acts: for f in &acts {
                    let Ok(g) = self.certainty_equivalent(i - 1, f) else {
                        continue;
                    };
                    if !self.ask(i - 1, &g, f, &self.omega(i - 1)).equivalent() {
                        continue;
                    }
                    for &v in self.grid.values() {
                        let replaced = Act::new(
                            i,
                            (0..space.n_states())
                                .map(|s| if event.contains(s) { v } else { f.values[s] })
                                .collect(),
                        );
                        if !self.ask(i - 1, &g, &replaced, &self.omega(i - 1)).equivalent() {
                            null = false;
                            break 'acts;
                        }
                    }
                }
                if null {
                    atoms.push(a);
                }
            }
        }
        let fam = NullFamily {
            time_index: i,
            union: Event::from_atoms(space, i, &atoms),
            atoms,
        };
        self.nulls.borrow_mut().insert(i, fam.clone());
        fam
    }

    fn essential_atoms(&self, i: usize) -> Vec<usize> {
        let nulls = self.null_family(i);
        (0..self.space().n_atoms(i))
            .filter(|a| !nulls.atoms.contains(a))
            .collect()
    }

    /// Nonempty unions of atoms at i given as bit masks over `atoms`.
    fn unions(atoms: &[usize]) -> Vec<Vec<usize>> {
        let n = atoms.len();
        (1u64..(1u64 << n))
            .map(|mask| {
                (0..n)
                    .filter(|b| mask & (1 << b) != 0)
                    .map(|b| atoms[b])
                    .collect()
            })
            .collect()
    }

    /// The transition axiom at time i: six clauses for i ≥ 1, four for i = 0.
    pub fn check_transition(&self, i: usize) -> AxiomReport {
        let start = self.queries();
        let space = self.space();
        let nulls = self.null_family(i);
        let fs = self.grid.acts(space, i + 1);
        let n_atoms = space.n_atoms(i);
        let all_atoms: Vec<usize> = (0..n_atoms).collect();
        let events: Vec<Event> = Self::unions(&all_atoms)
            .iter()
            .map(|u| Event::from_atoms(space, i, u))
            .collect();
        let omega = self.omega(i);
        let gs: Vec<Act> = if i == 0 {
            self.grid
                .extended_constants()
                .iter()
                .map(|&c| space.constant(0, c))
                .collect()
        } else {
            self.grid.acts(space, i)
        };
        let mut complete = ClauseResult::new(if i == 0 { "complete" } else { "local completeness" });
        let mut transitive = ClauseResult::new("transitive");
        let mut normalized = ClauseResult::new("normalized");
        let mut nondegenerate = ClauseResult::new("non-degenerate");
        let mut consistent = ClauseResult::new("consistent");
        let mut stable = ClauseResult::new("stable");
        let mut truncated = false;

        // normalization: 1_A ∼ 1_B for null A, B (only 0 ∼ 0 at time 0)
        let null_sets: Vec<Event> = std::iter::once(Event::empty())
            .chain(Self::unions(&nulls.atoms).iter().map(|u| Event::from_atoms(space, i, u)))
            .collect();
        for a in &null_sets {
            for b in &null_sets {
                let ga = a.indicator(i, space.n_states());
                let fb = b.indicator(i + 1, space.n_states());
                if !self.ask(i, &ga, &fb, &omega).equivalent() {
                    normalized.fail(format!(
                        "1_{} vs 1_{} not indifferent",
                        a.names(space),
                        b.names(space)
                    ));
                }
            }
        }

        let ext = self.grid.extension();
        for f in &fs {
            if self.over(start) {
                truncated = true;
                break;
            }
            // answers on Ω for every grid g
            let mut above = Vec::new();
            let mut below = Vec::new();
            for g in &gs {
                let mut table: Vec<Answer> = Vec::with_capacity(events.len());
                for e in &events {
                    table.push(self.ask(i, g, f, e));
                    if i == 0 {
                        break;
                    }
                }
                let on_omega = if i == 0 { table[0] } else { table[events.len() - 1] };
                if on_omega.succeq {
                    above.push(g);
                }
                if on_omega.preceq {
                    below.push(g);
                }
                if i == 0 {
                    if !on_omega.succeq && !on_omega.preceq {
                        complete.fail(format!(
                            "{} vs {}: neither holds",
                            g.values[0],
                            show(space, f)
                        ));
                    }
                    continue;
                }
                // local completeness: some essential event answers
                let answered = events.iter().zip(&table).any(|(e, ans)| {
                    !nulls.contains(e) && (ans.succeq || ans.preceq)
                });
                if !answered {
                    complete.fail(format!(
                        "{} vs {}: no essential event answers",
                        show(space, g),
                        show(space, f)
                    ));
                }
                // consistency and stability over the event lattice
                for (x, ex) in events.iter().enumerate() {
                    for (y, ey) in events.iter().enumerate() {
                        if ey.is_subset(ex) {
                            let (ax, ay) = (table[x], table[y]);
                            if (ax.succeq && !ay.succeq) || (ax.preceq && !ay.preceq) {
                                consistent.fail(format!(
                                    "{} vs {} holds on {} but not on {}",
                                    show(space, g),
                                    show(space, f),
                                    ex.names(space),
                                    ey.names(space)
                                ));
                            }
                        }
                        if x < y {
                            let u = ex.union(ey);
                            let z = events.iter().position(|e| e.members == u.members).unwrap();
                            let (ax, ay, az) = (table[x], table[y], table[z]);
                            if (ax.succeq && ay.succeq && !az.succeq)
                                || (ax.preceq && ay.preceq && !az.preceq)
                            {
                                stable.fail(format!(
                                    "{} vs {} holds on {} and {} but not on the union",
                                    show(space, g),
                                    show(space, f),
                                    ex.names(space),
                                    ey.names(space)
                                ));
                            }
                        }
                    }
                }
            }
            // transitivity on grid pairs: g ≽ f, h ≼ f ⇒ {g < h} null
            'pairs: for g in &above {
                for h in &below {
                    let lower: Vec<usize> = (0..space.n_states())
                        .filter(|&s| g.values[s] < h.values[s])
                        .collect();
                    if !lower.is_empty() && !nulls.contains(&Event::new(lower.iter().copied())) {
                        transitive.fail(format!(
                            "{} ≽ {} and {} ≼ it, yet g < h on {}",
                            show(space, g),
                            show(space, f),
                            show(space, h),
                            Event::new(lower).names(space)
                        ));
                        break 'pairs;
                    }
                }
            }
            // transitivity at the indifference boundary of every essential atom
            let t = self.thresholds(i, f);
            for a in 0..n_atoms {
                if nulls.atoms.contains(&a) || !t.lower[a].is_finite() || !t.upper[a].is_finite() {
                    continue;
                }
                if t.upper[a] > t.lower[a] + BOUNDARY_GAP * t.lower[a].abs().max(1.0) {
                    transitive.fail(format!(
                        "on {} the constant {} is ≽ {} while the larger constant {} is ≼ it",
                        self.atom_event(i, a).names(space),
                        t.lower[a],
                        show(space, f),
                        t.upper[a]
                    ));
                }
            }
            // non-degeneracy within the extended constant range
            let low = space.constant(i, -ext);
            let high = space.constant(i, ext);
            let has_below = !below.is_empty() || self.ask(i, &low, f, &omega).preceq;
            let has_above = !above.is_empty() || self.ask(i, &high, f, &omega).succeq;
            if !has_below || !has_above {
                nondegenerate.fail(format!(
                    "no constant in [{}, {}] is {} {}",
                    -ext,
                    ext,
                    if has_below { "≽" } else { "≼" },
                    show(space, f)
                ));
            }
        }
        nondegenerate.note = Some(format!(
            "constants searched in [{}, {}]; an unbounded search is undecidable, so a pass means not falsified within bounds",
            -ext, ext
        ));

        let mut clauses = vec![complete, transitive, normalized, nondegenerate];
        if i > 0 {
            clauses.push(consistent);
            clauses.push(stable);
        }
        AxiomReport {
            axiom: Axiom::Transition,
            time_index: i,
            clauses,
            queries: self.queries() - start,
            truncated,
        }
    }

    /// Essential unions of atoms at i + 1 (those not contained in the null
    /// union).
    fn essential_unions(&self, i: usize) -> Vec<Vec<usize>> {
        let nulls = self.null_family(i + 1);
        let atoms: Vec<usize> = (0..self.space().n_atoms(i + 1)).collect();
        Self::unions(&atoms)
            .into_iter()
            .filter(|u| u.iter().any(|a| !nulls.atoms.contains(a)))
            .collect()
    }

    fn complement_atoms(&self, j: usize, chosen: &[usize]) -> Vec<usize> {
        (0..self.space().n_atoms(j))
            .filter(|a| !chosen.contains(a))
            .collect()
    }

    /// Candidates g with g ∼ f among the two thresholds.
    fn indifferent_candidates(&self, i: usize, f: &Act) -> Vec<Act> {
        let t = self.thresholds(i, f);
        let space = self.space();
        let mut out: Vec<Act> = Vec::new();
        for side in [&t.lower, &t.upper] {
            if side.iter().all(|v| v.is_finite()) {
                let g = space.act_from_atoms(i, side).unwrap_or_else(|_| space.constant(i, 0.0));
                if !out.contains(&g) && self.ask(i, &g, f, &self.omega(i)).equivalent() {
                    out.push(g);
                }
            }
        }
        out
    }

    /// Strict monotonicity at time i.
    pub fn check_monotonicity(&self, i: usize) -> AxiomReport {
        let start = self.queries();
        let space = self.space();
        let mut clause = ClauseResult::new("strict monotonicity");
        let mut truncated = false;
        let essential_i = self.essential_atoms(i);
        let values = self.grid.values().to_vec();
        'outer: for a_set in self.essential_unions(i) {
            let rest = self.complement_atoms(i + 1, &a_set);
            let a_event = Event::from_atoms(space, i + 1, &a_set);
            for f in self.grid.acts_on(space, i + 1, &rest) {
                for (x, &g1) in values.iter().enumerate() {
                    for &g2 in &values[x + 1..] {
                        if self.over(start) {
                            truncated = true;
                            break 'outer;
                        }
                        let low = a_event
                            .indicator(i + 1, space.n_states())
                            .scale(g1)
                            .add(&f);
                        let high = a_event
                            .indicator(i + 1, space.n_states())
                            .scale(g2)
                            .add(&f);
                        for (from, to, want_below) in [(&low, &high, true), (&high, &low, false)] {
                            for g3 in self.indifferent_candidates(i, from) {
                                let strict = essential_i.iter().any(|&b| {
                                    let ans = self.ask(i, &g3, to, &self.atom_event(i, b));
                                    if want_below {
                                        ans.strictly_below()
                                    } else {
                                        ans.strictly_above()
                                    }
                                });
                                if !strict {
                                    clause.fail(format!(
                                        "g3 = {} ∼ {} but is not strictly {} {} on any essential event",
                                        show(space, &g3),
                                        show(space, from),
                                        if want_below { "below" } else { "above" },
                                        show(space, to)
                                    ));
                                    break 'outer;
                                }
                            }
                        }
                    }
                }
            }
        }
        AxiomReport {
            axiom: Axiom::Monotonicity,
            time_index: i,
            clauses: vec![clause],
            queries: self.queries() - start,
            truncated,
        }
    }

    /// Whether some g satisfies g ≽ x and g ≼ y, decided from the per-atom
    /// thresholds over the essential atoms at i.
    fn exists_between(&self, i: usize, x: &Act, y: &Act, essential_i: &[usize]) -> bool {
        let tx = self.thresholds(i, x);
        let ty = self.thresholds(i, y);
        essential_i.iter().all(|&a| {
            let lo = tx.lower[a];
            let hi = ty.upper[a];
            lo < f64::INFINITY
                && hi > f64::NEG_INFINITY
                && lo <= hi + THRESHOLD_SLACK * lo.abs().max(1.0)
        })
    }

    /// Looks for g with g ≽ x and g ≼ y among the thresholds of x and y and
    /// the extended constants, by direct queries.
    fn find_between(&self, i: usize, x: &Act, y: &Act) -> Option<Act> {
        let space = self.space();
        let omega = self.omega(i);
        let mut candidates = Vec::new();
        for t in [self.thresholds(i, x), self.thresholds(i, y)] {
            for side in [&t.lower, &t.upper] {
                if side.iter().all(|v| v.is_finite()) {
                    if let Ok(g) = space.act_from_atoms(i, side) {
                        candidates.push(g);
                    }
                }
            }
        }
        candidates.extend(
            self.grid
                .extended_constants()
                .iter()
                .map(|&c| space.constant(i, c)),
        );
        candidates.into_iter().find(|g| {
            self.ask(i, g, x, &omega).succeq && self.ask(i, g, y, &omega).preceq
        })
    }

    /// The sure-thing principle at time i: whether some g sits between
    /// f1·1_A + h·1_{A^c} and f2·1_A + h·1_{A^c} must not depend on h.
    pub fn check_sure_thing(&self, i: usize) -> AxiomReport {
        let start = self.queries();
        let space = self.space();
        let mut clause = ClauseResult::new("sure-thing principle");
        let mut truncated = false;
        let essential_i = self.essential_atoms(i);
        let n_atoms = space.n_atoms(i + 1);
        'outer: for a_set in self.essential_unions(i) {
            if a_set.len() == n_atoms {
                continue;
            }
            let rest = self.complement_atoms(i + 1, &a_set);
            let inside = self.grid.acts_on(space, i + 1, &a_set);
            let outside = self.grid.acts_on(space, i + 1, &rest);
            for f1 in &inside {
                for f2 in &inside {
                    if self.over(start) {
                        truncated = true;
                        break 'outer;
                    }
                    let mut seen_true: Option<&Act> = None;
                    let mut seen_false: Option<&Act> = None;
                    for h in &outside {
                        let x = f1.add(h);
                        let y = f2.add(h);
                        if !self.grid.admissible(&x) || !self.grid.admissible(&y) {
                            continue;
                        }
                        if self.exists_between(i, &x, &y, &essential_i) {
                            seen_true.get_or_insert(h);
                        } else {
                            seen_false.get_or_insert(h);
                        }
                    }
                    if let (Some(h), Some(k)) = (seen_true, seen_false) {
                        let x = f1.add(k);
                        let y = f2.add(k);
                        let premise = self.find_between(i, &f1.add(h), &f2.add(h));
                        if premise.is_some() && self.find_between(i, &x, &y).is_none() {
                            clause.fail(format!(
                                "A = {}: some g1 sits between {} and {}, but no g2 sits between {} and {}",
                                Event::from_atoms(space, i + 1, &a_set).names(space),
                                show(space, &f1.add(h)),
                                show(space, &f2.add(h)),
                                show(space, &x),
                                show(space, &y)
                            ));
                            break 'outer;
                        }
                    }
                }
            }
        }
        AxiomReport {
            axiom: Axiom::SureThing,
            time_index: i,
            clauses: vec![clause],
            queries: self.queries() - start,
            truncated,
        }
    }

    fn sequences(&self, f: &Act, style: SequenceStyle) -> Vec<(String, Vec<Act>)> {
        let space = self.space();
        let j = f.time_index;
        let m = space.n_atoms(j);
        let perturb = |offsets: &dyn Fn(usize, f64) -> f64| -> Vec<Act> {
            SEQUENCE_SAMPLES
                .iter()
                .map(|&n| {
                    Act::new(
                        j,
                        (0..space.n_states())
                            .map(|s| f.values[s] + offsets(space.atom_of(j, s), n))
                            .collect(),
                    )
                })
                .collect()
        };
        match style {
            SequenceStyle::Shift => vec![
                ("f + 1/n".to_string(), perturb(&|_, n| 1.0 / n)),
                ("f - 1/n".to_string(), perturb(&|_, n| -1.0 / n)),
            ],
            SequenceStyle::OneAtom => (0..m)
                .flat_map(|a| {
                    [1.0, -1.0].into_iter().map(move |sign| (a, sign))
                })
                .map(|(a, sign)| {
                    (
                        format!("f {} 1/n on atom #{a}", if sign > 0.0 { "+" } else { "-" }),
                        perturb(&|b, n| if b == a { sign / n } else { 0.0 }),
                    )
                })
                .collect(),
            SequenceStyle::Random(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let draws: Vec<Vec<f64>> = SEQUENCE_SAMPLES
                    .iter()
                    .map(|_| (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect())
                    .collect();
                let seq = SEQUENCE_SAMPLES
                    .iter()
                    .zip(&draws)
                    .map(|(&n, e)| {
                        Act::new(
                            j,
                            (0..space.n_states())
                                .map(|s| f.values[s] + e[space.atom_of(j, s)] / n)
                                .collect(),
                        )
                    })
                    .collect();
                vec![("f + e_n/n".to_string(), seq)]
            }
        }
    }

    /// Pointwise continuity at time i for one act f: for constants g
    /// strictly below (above) f, g must eventually be ≼ (≽) f_n on every
    /// essential atom.
    pub fn check_continuity(&self, i: usize, f: &Act, style: SequenceStyle) -> ClauseResult {
        let space = self.space();
        let mut clause = ClauseResult::new(&format!("continuity ({style})"));
        let essential = self.essential_atoms(i);
        let t = self.thresholds(i, f);
        let omega = self.omega(i);
        let seqs = self.sequences(f, style);
        for eta in [0.1, 0.5] {
            for below in [true, false] {
                let side = if below { &t.lower } else { &t.upper };
                if side.iter().any(|v| !v.is_finite()) {
                    continue;
                }
                let shifted: Vec<f64> = side
                    .iter()
                    .map(|v| if below { v - eta } else { v + eta })
                    .collect();
                let Ok(g) = space.act_from_atoms(i, &shifted) else {
                    continue;
                };
                let strict = essential.iter().all(|&a| {
                    let ans = self.ask(i, &g, f, &self.atom_event(i, a));
                    if below {
                        ans.strictly_below()
                    } else {
                        ans.strictly_above()
                    }
                });
                if !strict {
                    continue;
                }
                let holds = |ans: Answer| if below { ans.preceq } else { ans.succeq };
                for (label, seq) in &seqs {
                    // only the tail decides "eventually"
                    for fn_ in &seq[seq.len() - EVENTUAL_TAIL..] {
                        if holds(self.ask(i, &g, fn_, &omega)) {
                            continue;
                        }
                        for &a in &essential {
                            let event = self.atom_event(i, a);
                            if !holds(self.ask(i, &g, fn_, &event)) {
                                clause.fail(format!(
                                    "g = {} is strictly {} {} but not eventually {} f_n = {} on {}",
                                    show(space, &g),
                                    if below { "below" } else { "above" },
                                    show(space, f),
                                    if below { "≼" } else { "≽" },
                                    label,
                                    event.names(space)
                                ));
                                return clause;
                            }
                        }
                    }
                }
            }
        }
        clause
    }

    /// Continuity over every grid act at i + 1 and the three sequence styles.
    pub fn check_continuity_grid(&self, i: usize, seed: u64) -> AxiomReport {
        let start = self.queries();
        let space = self.space();
        let styles = [
            SequenceStyle::Shift,
            SequenceStyle::OneAtom,
            SequenceStyle::Random(seed),
        ];
        let mut clauses: Vec<ClauseResult> = styles
            .iter()
            .map(|s| ClauseResult::new(&format!("continuity ({s})")))
            .collect();
        let mut truncated = false;
        'outer: for f in self.grid.acts(space, i + 1) {
            for (k, style) in styles.iter().enumerate() {
                if self.over(start) {
                    truncated = true;
                    break 'outer;
                }
                if clauses[k].passed {
                    let r = self.check_continuity(i, &f, *style);
                    if !r.passed {
                        clauses[k] = r;
                    }
                }
            }
        }
        for c in &mut clauses {
            c.note = Some("verified on constructed sequences only".into());
        }
        AxiomReport {
            axiom: Axiom::Continuity,
            time_index: i,
            clauses,
            queries: self.queries() - start,
            truncated,
        }
    }

    /// Splits the essential atoms at i by the oracle's answers for g against f.
    pub fn tri_partition(&self, i: usize, g: &Act, f: &Act) -> Result<TriPartition> {
        let space = self.space();
        let nulls = self.null_family(i);
        let (mut equal, mut above, mut below) = (Vec::new(), Vec::new(), Vec::new());
        for a in 0..space.n_atoms(i) {
            if nulls.atoms.contains(&a) {
                continue;
            }
            let event = self.atom_event(i, a);
            let ans = self.ask(i, g, f, &event);
            let bucket = match (ans.succeq, ans.preceq) {
                (true, true) => &mut equal,
                (true, false) => &mut above,
                (false, true) => &mut below,
                (false, false) => {
                    return Err(Error::AxiomViolation(format!(
                        "atom {} answers neither for {} against {}",
                        event.names(space),
                        show(space, g),
                        show(space, f)
                    )))
                }
            };
            bucket.extend(space.atom(i, a).iter().copied());
        }
        Ok(TriPartition {
            time_index: i,
            equal: Event::at(i, equal),
            above: Event::at(i, above),
            below: Event::at(i, below),
        })
    }

    /// All four axioms at time i.
    pub fn check_all(&self, i: usize, seed: u64) -> Vec<AxiomReport> {
        vec![
            self.check_transition(i),
            self.check_monotonicity(i),
            self.check_sure_thing(i),
            self.check_continuity_grid(i, seed),
        ]
    }
}

/// Null events at time i derived from the oracle alone.
pub fn derive_null_events(oracle: &dyn PreferenceOracle, i: usize, grid: &ActGrid) -> NullFamily {
    AxiomChecker::new(oracle, grid.clone()).null_family(i)
}
