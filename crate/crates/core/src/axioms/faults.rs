//! Hand-corrupted oracles, each built to break exactly one axiom at time 0
//! on a three-state space.

use super::{Answer, Axiom, FunctionalOracle, InducedOracle, PreferenceOracle};
use crate::curve::MonotoneCurve;
use crate::engine::Representation;
use crate::field::UtilityField;
use crate::space::{Act, Event, FilteredSpace, ProbabilityMeasure};

/// Time index at which the faults are checked.
pub const FAULT_TIME: usize = 0;

pub struct Fault {
    pub name: &'static str,
    pub target: Axiom,
    pub oracle: Box<dyn PreferenceOracle>,
}

/// States a, b, c; times 0 and 1; full information at time 1.
pub fn fault_space() -> FilteredSpace {
    FilteredSpace::from_names(
        &["a", "b", "c"],
        &[0.0, 1.0],
        &[vec![vec!["a", "b", "c"]], vec![vec!["a"], vec!["b"], vec!["c"]]],
    )
    .expect("static space")
}

pub fn fault_measure() -> ProbabilityMeasure {
    ProbabilityMeasure::new(vec![0.25, 0.25, 0.5]).expect("static measure")
}

fn identity_rep() -> Representation {
    let space = fault_space();
    let field = UtilityField::uniform(&space, MonotoneCurve::identity());
    Representation::new(space, fault_measure(), field, MonotoneCurve::identity())
        .expect("identity representation")
}

fn expectation(f: &Act) -> f64 {
    fault_measure()
        .weights()
        .iter()
        .zip(&f.values)
        .map(|(p, x)| p * x)
        .sum()
}

/// Answers ≽ always and ≼ never.
struct Degenerate(FilteredSpace);

impl PreferenceOracle for Degenerate {
    fn space(&self) -> &FilteredSpace {
        &self.0
    }

    fn query(&self, _: usize, _: &Act, _: &Act, _: &Event) -> Answer {
        Answer {
            succeq: true,
            preceq: false,
        }
    }
}

/// The identity oracle, except that one act is indifferent to a whole
/// interval of constants: a constant both ≽ and ≼ it sits above another
/// constant that is also both.
struct Thickened {
    exact: InducedOracle,
    loose: InducedOracle,
    target: Act,
}

impl PreferenceOracle for Thickened {
    fn space(&self) -> &FilteredSpace {
        self.exact.space()
    }

    fn query(&self, i: usize, g: &Act, f: &Act, event: &Event) -> Answer {
        let restricted = f.restrict(event).at_time(i + 1);
        if restricted == self.target {
            self.loose.query(i, g, f, event)
        } else {
            self.exact.query(i, g, f, event)
        }
    }
}

/// Utility flat on [0.5, 1].
fn flat(x: f64) -> f64 {
    if x <= 0.5 {
        x
    } else if x <= 1.0 {
        0.5
    } else {
        x - 0.5
    }
}

/// All five faults in a fixed order.
pub fn faults() -> Vec<Fault> {
    let space = fault_space();
    let weights = fault_measure().weights().to_vec();

    let thickened = Thickened {
        exact: InducedOracle::new(identity_rep(), 1e-12),
        loose: InducedOracle::new(identity_rep(), 0.05),
        target: Act::new(1, vec![1.0, -1.0, 0.5]),
    };

    let w = weights.clone();
    let flat_oracle = FunctionalOracle::new(
        space.clone(),
        |_, x| x,
        move |_, _, f: &Act| w.iter().zip(&f.values).map(|(p, x)| p * flat(*x)).sum(),
        1e-12,
    );

    let max_oracle = FunctionalOracle::new(
        space.clone(),
        |_, x| 1.5 * x,
        |_, _, f: &Act| {
            let top = f.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            expectation(f) + 0.5 * top
        },
        1e-12,
    );

    // a jump of size 1 at x = 1 on the positive-probability atom {a}
    let id = MonotoneCurve::identity();
    let jumpy = id.clone().with_jump(1.0, 1.0, 1.0).expect("valid jump");
    let field = UtilityField::new(
        &space,
        vec![vec![id.clone()], vec![jumpy, id.clone(), id.clone()]],
    )
    .expect("field");
    let jump_rep = Representation::new_unchecked(space.clone(), fault_measure(), field, id)
        .expect("dimensions");

    vec![
        Fault {
            name: "degenerate",
            target: Axiom::Transition,
            oracle: Box::new(Degenerate(space)),
        },
        Fault {
            name: "thickened indifference",
            target: Axiom::Transition,
            oracle: Box::new(thickened),
        },
        Fault {
            name: "flat utility segment",
            target: Axiom::Monotonicity,
            oracle: Box::new(flat_oracle),
        },
        Fault {
            name: "max functional",
            target: Axiom::SureThing,
            oracle: Box::new(max_oracle),
        },
        Fault {
            name: "utility jump",
            target: Axiom::Continuity,
            oracle: Box::new(InducedOracle::new(jump_rep, 1e-12)),
        },
    ]
}
