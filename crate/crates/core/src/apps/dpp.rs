//! Portfolio choice on a binomial tree: exhaustive strategy enumeration
//! against a backward-induction value function.

use std::fmt::Write as _;

use crate::engine::{band, Representation, VerdictTag};
use crate::error::{Error, Result};
use crate::scenario::Scenario;
use crate::space::{Act, Event, FilteredSpace};

pub const BINOMIAL_SCENARIO: &str = include_str!("../../scenarios/binomial.sdu");

/// Upper bound on the number of enumerated strategies.
pub const MAX_STRATEGIES: usize = 100_000;

/// A self-financing market with one risky asset and zero interest. The
/// return over period k in state s is `up` or `down` according to the k-th
/// letter of the state name.
#[derive(Debug, Clone)]
pub struct Market {
    pub rep: Representation,
    pub wealth: f64,
    pub up: f64,
    pub down: f64,
    /// Admissible fractions of wealth held in the risky asset.
    pub fractions: Vec<f64>,
    /// Gross return over period k, known at time k + 1.
    returns: Vec<Act>,
}

/// A fraction per (period, atom at the start of the period).
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    pub choice: Vec<Vec<f64>>,
}

fn number(scenario: &Scenario, key: &str) -> Result<f64> {
    let raw = scenario
        .strategy(key)
        .ok_or_else(|| Error::Scenario(format!("[strategies] lacks `{key}`")))?;
    raw.trim()
        .parse::<f64>()
        .map_err(|_| Error::Scenario(format!("[strategies] `{key}` is not a number: {raw}")))
}

impl Market {
    pub fn from_scenario(scenario: &Scenario, variant: Option<&str>) -> Result<Market> {
        let rep = scenario.representation(variant)?;
        let wealth = number(scenario, "wealth")?;
        let up = number(scenario, "up")?;
        let down = number(scenario, "down")?;
        let raw = scenario
            .strategy("fractions")
            .ok_or_else(|| Error::Scenario("[strategies] lacks `fractions`".into()))?;
        let fractions = raw
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::Scenario(format!("bad fraction `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Market::new(rep, wealth, up, down, fractions)
    }

    pub fn new(rep: Representation, wealth: f64, up: f64, down: f64, fractions: Vec<f64>) -> Result<Market> {
        if fractions.is_empty() {
            return Err(Error::Precondition("empty strategy set".into()));
        }
        if !(down > 0.0 && up > down) {
            return Err(Error::Precondition(format!("need 0 < down < up, got {down} and {up}")));
        }
        let space = rep.space();
        let mut returns = Vec::new();
        for k in 0..space.last() {
            let mut values = vec![0.0; space.n_states()];
            for atom in space.partition(k + 1) {
                let letters: Vec<Option<char>> = atom
                    .iter()
                    .map(|&s| space.state_name(s).chars().nth(k))
                    .collect();
                let r = match letters[0] {
                    Some('u') => up,
                    Some('d') => down,
                    _ => {
                        return Err(Error::Scenario(format!(
                            "state `{}` has no u/d letter for period {k}",
                            space.state_name(atom[0])
                        )))
                    }
                };
                if letters.iter().any(|l| *l != letters[0]) {
                    return Err(Error::Scenario(format!(
                        "period {k} return is not known on atom {}",
                        Event::new(atom.iter().copied()).names(space)
                    )));
                }
                for &s in atom {
                    values[s] = r;
                }
            }
            returns.push(Act::new(k + 1, values));
        }
        Ok(Market {
            rep,
            wealth,
            up,
            down,
            fractions,
            returns,
        })
    }

    pub fn space(&self) -> &FilteredSpace {
        self.rep.space()
    }

    /// Every adapted strategy, in odometer order over (period, atom).
    pub fn strategies(&self) -> Result<Vec<Strategy>> {
        let space = self.space();
        let slots: Vec<usize> = (0..space.last()).map(|k| space.n_atoms(k)).collect();
        let total_slots: usize = slots.iter().sum();
        let count = (self.fractions.len() as f64).powi(total_slots as i32);
        if count > MAX_STRATEGIES as f64 {
            return Err(Error::Precondition(format!(
                "{count} strategies exceed the limit of {MAX_STRATEGIES}"
            )));
        }
        let mut digits = vec![0usize; total_slots];
        let mut out = Vec::with_capacity(count as usize);
        loop {
            let mut it = digits.iter();
            let choice = slots
                .iter()
                .map(|&n| (0..n).map(|_| self.fractions[*it.next().expect("slot")]).collect())
                .collect();
            out.push(Strategy { choice });
            let mut pos = total_slots;
            loop {
                if pos == 0 {
                    return Ok(out);
                }
                pos -= 1;
                digits[pos] += 1;
                if digits[pos] < self.fractions.len() {
                    break;
                }
                digits[pos] = 0;
            }
        }
    }

    /// Wealth at every time index under a strategy started from `self.wealth`.
    pub fn wealth_path(&self, strategy: &Strategy) -> Vec<Act> {
        let space = self.space();
        let mut path = vec![space.constant(0, self.wealth)];
        for k in 0..space.last() {
            let prev = &path[k];
            let values = (0..space.n_states())
                .map(|s| {
                    let pi = strategy.choice[k][space.atom_of(k, s)];
                    prev.values[s] * (1.0 + pi * (self.returns[k].values[s] - 1.0))
                })
                .collect();
            path.push(Act::new(k + 1, values));
        }
        path
    }

    /// v(k, w) on atom `a` at time k: the best conditional expected terminal
    /// utility from wealth `w`, by backward induction over the tree. Null
    /// atoms get 0, matching the conditional-expectation convention.
    pub fn value(&self, k: usize, a: usize, w: f64) -> f64 {
        self.value_and_choice(k, a, w).0
    }

    fn value_and_choice(&self, k: usize, a: usize, w: f64) -> (f64, Option<f64>) {
        let space = self.space();
        let weights = self.rep.measure().weights();
        let mass: f64 = space.atom(k, a).iter().map(|&s| weights[s]).sum();
        if mass == 0.0 {
            return (0.0, None);
        }
        let last = space.last();
        if k == last {
            return (self.rep.field().atom_curve(last, a).eval(w), None);
        }
        let children: Vec<usize> = (0..space.n_atoms(k + 1))
            .filter(|&c| space.atom_of(k, space.atom(k + 1, c)[0]) == a)
            .collect();
        let mut best = (f64::NEG_INFINITY, None);
        for &pi in &self.fractions {
            let mut total = 0.0;
            for &c in &children {
                let states = space.atom(k + 1, c);
                let p: f64 = states.iter().map(|&s| weights[s]).sum::<f64>() / mass;
                if p == 0.0 {
                    continue;
                }
                let r = self.returns[k].values[states[0]];
                total += p * self.value(k + 1, c, w * (1.0 + pi * (r - 1.0)));
            }
            if total > best.0 {
                best = (total, Some(pi));
            }
        }
        best
    }

    /// E[u_T(V_T) | F_t], including t = T where it is u_T(V_T) off null states.
    pub fn conditional_utility(&self, t: usize, terminal: &Act) -> Result<Act> {
        let last = self.space().last();
        if t < last {
            return self.rep.expected_utility(t, last, terminal);
        }
        let mut u = self.rep.field().eval(last, terminal)?;
        for (s, v) in u.values.iter_mut().enumerate() {
            if self.rep.measure().is_null_state(s) {
                *v = 0.0;
            }
        }
        Ok(u)
    }

    /// v(k, X) as an act, reading X atom by atom.
    pub fn value_act(&self, k: usize, x: &Act) -> Act {
        let space = self.space();
        let per_atom: Vec<f64> = (0..space.n_atoms(k))
            .map(|a| self.value(k, a, x.values[space.atom(k, a)[0]]))
            .collect();
        space.act_from_atoms(k, &per_atom).expect("one value per atom")
    }

    /// The strategy that follows the backward-induction argmax along its
    /// own wealth path. Null atoms take the first fraction.
    pub fn optimal_strategy(&self) -> Strategy {
        let space = self.space();
        let mut choice: Vec<Vec<f64>> = (0..space.last())
            .map(|k| vec![self.fractions[0]; space.n_atoms(k)])
            .collect();
        for k in 0..space.last() {
            let wealth = self.wealth_path(&Strategy { choice: choice.clone() });
            for a in 0..space.n_atoms(k) {
                let w = wealth[k].values[space.atom(k, a)[0]];
                if let (_, Some(pi)) = self.value_and_choice(k, a, w) {
                    choice[k][a] = pi;
                }
            }
        }
        Strategy { choice }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DppReport {
    pub optimal: Strategy,
    pub strategies: usize,
    /// Smallest v(t, X_t) − E[u(V_T)|F_t] over strategies, times and atoms.
    pub min_margin: f64,
    /// Largest |v(t, X_t) − E[u(V_T)|F_t]| along the optimal strategy.
    pub optimal_gap: f64,
    pub dominated: bool,
    pub attained: bool,
    /// C_{0,T}(V_T) under the optimal strategy.
    pub equivalent: f64,
    /// v(0, X) recomputed as the maximum over enumerated strategies.
    pub enumerated_value: f64,
    pub text: String,
}

impl DppReport {
    pub fn passed(&self) -> bool {
        self.dominated && self.attained
    }
}

fn strategy_lines(space: &FilteredSpace, s: &Strategy) -> Vec<String> {
    let mut out = Vec::new();
    for (k, per_atom) in s.choice.iter().enumerate() {
        for (a, pi) in per_atom.iter().enumerate() {
            let atom = Event::new(space.atom(k, a).iter().copied()).names(space);
            out.push(format!("t{k} {atom}: {pi}"));
        }
    }
    out
}

pub fn run_dpp(market: &Market, tol: f64) -> Result<DppReport> {
    let space = market.space();
    let last = space.last();
    let strategies = market.strategies()?;
    let optimal = market.optimal_strategy();

    let mut min_margin = f64::INFINITY;
    let mut dominated = true;
    let mut enumerated_value = f64::NEG_INFINITY;
    for strategy in &strategies {
        let path = market.wealth_path(strategy);
        for t in 0..=last {
            let v = market.value_act(t, &path[t]);
            let realized = market.conditional_utility(t, &path[last])?;
            for s in 0..space.n_states() {
                let margin = v.values[s] - realized.values[s];
                min_margin = min_margin.min(margin);
                if margin < -band(tol, v.values[s]) {
                    dominated = false;
                }
            }
            if t == 0 {
                enumerated_value = enumerated_value.max(realized.values[0]);
            }
        }
    }

    let path = market.wealth_path(&optimal);
    let mut optimal_gap: f64 = 0.0;
    let mut attained = true;
    for t in 0..=last {
        let v = market.value_act(t, &path[t]);
        let realized = market.conditional_utility(t, &path[last])?;
        for s in 0..space.n_states() {
            let gap = (v.values[s] - realized.values[s]).abs();
            optimal_gap = optimal_gap.max(gap);
            if gap > band(tol, v.values[s]) {
                attained = false;
            }
        }
    }
    let equivalent = market.rep.cce(0, last, &path[last], tol)?.values[0];
    let x = space.constant(0, market.wealth);
    let verdict = market.rep.compare(0, last, &space.constant(0, equivalent), &path[last], tol)?;

    let mut t = String::new();
    let _ = writeln!(t, "strategies enumerated: {}", strategies.len());
    let _ = writeln!(t, "optimal strategy:");
    for line in strategy_lines(space, &optimal) {
        let _ = writeln!(t, "  {line}");
    }
    let _ = writeln!(t, "v(0, {}) = {}", x.values[0], market.value(0, 0, market.wealth));
    let _ = writeln!(t, "max over enumerated strategies = {enumerated_value}");
    let _ = writeln!(t, "minimum margin v - E[u(V_T)|F_t] = {min_margin:e}");
    let _ = writeln!(t, "largest gap along the optimum = {optimal_gap:e}");
    let _ = writeln!(t, "domination {}", if dominated { "PASS" } else { "FAIL" });
    let _ = writeln!(t, "attained at optimum {}", if attained { "PASS" } else { "FAIL" });
    let _ = writeln!(
        t,
        "X ~ V_T under u_t = v(t, .) along the optimum: {}",
        if attained { "holds" } else { "fails" }
    );
    let _ = writeln!(t, "certainty equivalent of V_T at t0 = {equivalent}");
    let _ = writeln!(
        t,
        "{equivalent} at t0 vs optimal V_T: {}",
        verdict.tag()
    );
    if verdict.tag() != VerdictTag::Equiv {
        attained = false;
    }

    Ok(DppReport {
        optimal,
        strategies: strategies.len(),
        min_margin,
        optimal_gap,
        dominated,
        attained,
        equivalent,
        enumerated_value,
        text: t,
    })
}
