//! Forward-performance conditions for a scenario's utility field along the
//! wealth processes of a binomial market.

use std::fmt::Write as _;

use super::dpp::{Market, Strategy};
use crate::engine::{band, VerdictTag};
use crate::error::Result;

/// Grid for the shape checks.
pub const SHAPE_GRID: [f64; 9] = [-2.0, -1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0];

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardReport {
    pub conditions: Vec<ConditionResult>,
    /// Strategies along which the field is a martingale.
    pub optimal: Vec<Strategy>,
    /// X_s ∼_{s,t} X_t for every s < t along the first optimal strategy.
    pub equivalence_confirmed: bool,
    pub text: String,
}

impl ForwardReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn condition(&self, name: &str) -> Option<&ConditionResult> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

pub fn run_forward_check(market: &Market, tol: f64) -> Result<ForwardReport> {
    let rep = &market.rep;
    let space = market.space();
    let last = space.last();

    // (i) increasing and concave on the grid, atom by atom
    let mut shape_fail = None;
    'shape: for i in 0..=last {
        for a in 0..space.n_atoms(i) {
            let curve = rep.field().atom_curve(i, a);
            let ys: Vec<f64> = SHAPE_GRID.iter().map(|&x| curve.eval(x)).collect();
            for k in 1..ys.len() {
                if ys[k] <= ys[k - 1] {
                    shape_fail = Some(format!("not increasing at t{i}, atom {a}, x = {}", SHAPE_GRID[k]));
                    break 'shape;
                }
            }
            for k in 1..ys.len() - 1 {
                let second = ys[k + 1] - 2.0 * ys[k] + ys[k - 1];
                if second > band(tol, ys[k]) {
                    shape_fail = Some(format!("convex at t{i}, atom {a}, x = {}", SHAPE_GRID[k]));
                    break 'shape;
                }
            }
        }
    }

    // (ii) U(x, 0) = u0(x)
    let start = rep.field().atom_curve(0, 0);
    let initial_gap = SHAPE_GRID
        .iter()
        .map(|&x| (start.eval(x) - rep.u0().eval(x)).abs())
        .fold(0.0, f64::max);

    // (iii) supermartingale along every strategy, (iv) martingale along some
    let strategies = market.strategies()?;
    let mut worst_excess = f64::NEG_INFINITY;
    let mut super_ok = true;
    let mut optimal = Vec::new();
    for strategy in &strategies {
        let path = market.wealth_path(strategy);
        let mut martingale = true;
        for s in 0..last {
            let now = rep.field().eval(s, &path[s])?;
            for t in s + 1..=last {
                let later = rep.expected_utility(s, t, &path[t])?;
                for st in 0..space.n_states() {
                    if rep.measure().weight(st) == 0.0 {
                        continue;
                    }
                    let excess = later.values[st] - now.values[st];
                    worst_excess = worst_excess.max(excess);
                    if excess > band(tol, now.values[st]) {
                        super_ok = false;
                    }
                    if excess.abs() > band(tol, now.values[st]) {
                        martingale = false;
                    }
                }
            }
        }
        if martingale {
            optimal.push(strategy.clone());
        }
    }
    let mut equivalence_confirmed = false;
    if let Some(first) = optimal.first() {
        let path = market.wealth_path(first);
        equivalence_confirmed = true;
        for s in 0..last {
            for t in s + 1..=last {
                if rep.compare(s, t, &path[s], &path[t], tol)?.tag() != VerdictTag::Equiv {
                    equivalence_confirmed = false;
                }
            }
        }
    }

    let conditions = vec![
        ConditionResult {
            name: "monotone and concave",
            passed: shape_fail.is_none(),
            detail: shape_fail.unwrap_or_else(|| format!("{} grid points per curve", SHAPE_GRID.len())),
        },
        ConditionResult {
            name: "initial utility",
            passed: initial_gap <= tol,
            detail: format!("max |U(x,0) - u0(x)| = {initial_gap:e}"),
        },
        ConditionResult {
            name: "supermartingale",
            passed: super_ok,
            detail: format!("max E[U(X_t,t)|F_s] - U(X_s,s) = {worst_excess:e}"),
        },
        ConditionResult {
            name: "martingale optimum",
            passed: !optimal.is_empty(),
            detail: format!("{} of {} strategies", optimal.len(), strategies.len()),
        },
    ];

    let mut t = String::new();
    for (k, c) in conditions.iter().enumerate() {
        let roman = ["i", "ii", "iii", "iv"][k];
        let _ = writeln!(
            t,
            "{:<6}{:<22} {}  {}",
            format!("({roman})"),
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.detail
        );
    }
    match optimal.first() {
        Some(first) => {
            let _ = writeln!(t, "optimal strategy:");
            for (k, per_atom) in first.choice.iter().enumerate() {
                let list: Vec<String> = per_atom.iter().map(|p| p.to_string()).collect();
                let _ = writeln!(t, "  t{k}: {}", list.join(", "));
            }
            let _ = writeln!(
                t,
                "X_s ~ X_t along the optimum: {}",
                if equivalence_confirmed { "confirmed" } else { "not confirmed" }
            );
        }
        None => {
            let _ = writeln!(t, "no strategy attains the martingale property");
        }
    }

    Ok(ForwardReport {
        conditions,
        optimal,
        equivalence_confirmed,
        text: t,
    })
}
