use crate::engine::{band, Representation};
use crate::space::{Act, Event, FilteredSpace};

/// The two answers to "g·1_A against f·1_A".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Answer {
    pub succeq: bool,
    pub preceq: bool,
}

impl Answer {
    pub const BOTH: Answer = Answer {
        succeq: true,
        preceq: true,
    };

    pub fn equivalent(&self) -> bool {
        self.succeq && self.preceq
    }

    pub fn strictly_above(&self) -> bool {
        self.succeq && !self.preceq
    }

    pub fn strictly_below(&self) -> bool {
        self.preceq && !self.succeq
    }
}

/// Conditional intertemporal comparisons: `query(i, g, f, A)` compares g
/// (known at time i) with f (known at time i + 1), both restricted to the
/// event A measurable at i. Answers must be deterministic.
pub trait PreferenceOracle {
    fn space(&self) -> &FilteredSpace;
    fn query(&self, i: usize, g: &Act, f: &Act, event: &Event) -> Answer;
}

/// The oracle of a representation: g·1_A ≽ f·1_A iff
/// u_i(g) ≥ E[u_{i+1}(f)|F_i] on every positive-probability atom of A.
#[derive(Debug, Clone)]
pub struct InducedOracle {
    rep: Representation,
    tol: f64,
}

impl InducedOracle {
    pub fn new(rep: Representation, tol: f64) -> Self {
        Self { rep, tol }
    }

    pub fn representation(&self) -> &Representation {
        &self.rep
    }
}

impl PreferenceOracle for InducedOracle {
    fn space(&self) -> &FilteredSpace {
        self.rep.space()
    }

    fn query(&self, i: usize, g: &Act, f: &Act, event: &Event) -> Answer {
        let g = g.restrict(event).at_time(i);
        let f = f.restrict(event).at_time(i + 1);
        match self.rep.compare(i, i + 1, &g, &f, self.tol) {
            Ok(v) => Answer {
                succeq: v.holds_succeq(),
                preceq: v.holds_preceq(),
            },
            // range failures mean f cannot be matched by any g: neither holds
            Err(_) => Answer {
                succeq: false,
                preceq: false,
            },
        }
    }
}

/// Per-atom utility gaps supplied by closures: `lhs(i, x)` is the utility of
/// the constant x at time i, `rhs(i, atom, f)` the value of f seen from that
/// atom. Used for oracles that no representation induces.
pub struct FunctionalOracle {
    space: FilteredSpace,
    lhs: Box<dyn Fn(usize, f64) -> f64>,
    rhs: Box<dyn Fn(usize, usize, &Act) -> f64>,
    tol: f64,
}

impl FunctionalOracle {
    pub fn new(
        space: FilteredSpace,
        lhs: impl Fn(usize, f64) -> f64 + 'static,
        rhs: impl Fn(usize, usize, &Act) -> f64 + 'static,
        tol: f64,
    ) -> Self {
        Self {
            space,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
            tol,
        }
    }
}

impl PreferenceOracle for FunctionalOracle {
    fn space(&self) -> &FilteredSpace {
        &self.space
    }

    fn query(&self, i: usize, g: &Act, f: &Act, event: &Event) -> Answer {
        let f = f.restrict(event);
        let mut answer = Answer::BOTH;
        for (a, atom) in self.space.partition(i).iter().enumerate() {
            if !event.contains(atom[0]) {
                continue;
            }
            let rhs = (self.rhs)(i, a, &f);
            let d = (self.lhs)(i, g.values[atom[0]]) - rhs;
            let w = band(self.tol, rhs);
            if d < -w {
                answer.succeq = false;
            }
            if d > w {
                answer.preceq = false;
            }
        }
        answer
    }
}
