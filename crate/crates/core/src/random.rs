//! Seeded generators for spaces, measures, curves, representations and
//! comparison pairs. Every generator draws from the caller's RNG so fleets
//! are reproducible from one seed.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::curve::MonotoneCurve;
use crate::engine::{Pair, Representation};
use crate::error::Result;
use crate::field::UtilityField;
use crate::space::{Act, FilteredSpace, ProbabilityMeasure};

/// Curve families drawn by [`random_curve`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveKind {
    Identity,
    Linear,
    Power,
    Exponential,
    PiecewiseLinear,
}

impl CurveKind {
    /// Kinds whose range is the whole real line, safe to invert anywhere.
    pub const UNBOUNDED: [CurveKind; 4] = [
        CurveKind::Identity,
        CurveKind::Linear,
        CurveKind::Power,
        CurveKind::PiecewiseLinear,
    ];

    pub const ALL: [CurveKind; 5] = [
        CurveKind::Identity,
        CurveKind::Linear,
        CurveKind::Power,
        CurveKind::Exponential,
        CurveKind::PiecewiseLinear,
    ];
}

fn state_names(n: usize) -> Vec<String> {
    (0..n).map(|s| format!("w{s}")).collect()
}

/// Partitions of `n` states over `n_times` times: singletons at the last
/// time, a single atom at time 0, and in between random merges of adjacent
/// blocks of the next finer partition.
pub fn random_space(rng: &mut impl Rng, n: usize, n_times: usize) -> FilteredSpace {
    assert!(n >= 1 && n_times >= 2);
    let mut levels: Vec<Vec<Vec<usize>>> = vec![(0..n).map(|s| vec![s]).collect()];
    for _ in 1..n_times - 1 {
        let finer = levels.last().expect("nonempty");
        let mut coarser: Vec<Vec<usize>> = Vec::new();
        for (k, block) in finer.iter().enumerate() {
            if k > 0 && rng.gen_bool(0.5) {
                coarser.last_mut().expect("nonempty").extend(block);
            } else {
                coarser.push(block.clone());
            }
        }
        levels.push(coarser);
    }
    levels.push(vec![(0..n).collect()]);
    levels.reverse();
    FilteredSpace::new(state_names(n), (0..n_times).map(|i| i as f64).collect(), levels)
        .expect("refining by construction")
}

/// A space with exactly `first` atoms at time 1, each split into 1 to
/// `max_split` states at time 2, and singletons at any later time.
pub fn random_branching_space(rng: &mut impl Rng, first: usize, max_split: usize) -> FilteredSpace {
    let mut level1 = Vec::new();
    let mut n = 0;
    for _ in 0..first {
        let k = rng.gen_range(1..=max_split);
        level1.push((n..n + k).collect::<Vec<_>>());
        n += k;
    }
    FilteredSpace::new(
        state_names(n),
        vec![0.0, 1.0, 2.0],
        vec![vec![(0..n).collect()], level1, (0..n).map(|s| vec![s]).collect()],
    )
    .expect("refining by construction")
}

/// Weights in [0.1, 1] normalized; with `null_states > 0` that many random
/// states get weight 0 (at least one state keeps positive weight).
pub fn random_measure(rng: &mut impl Rng, n: usize, null_states: usize) -> ProbabilityMeasure {
    let mut masses: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    for &s in order.iter().take(null_states.min(n - 1)) {
        masses[s] = 0.0;
    }
    ProbabilityMeasure::from_masses(&masses).expect("positive total")
}

/// A strictly increasing piecewise-linear curve through 0 with breakpoints
/// at `xs` and slopes in [0.2, 3].
pub fn random_pl_curve(rng: &mut impl Rng, xs: &[f64]) -> MonotoneCurve {
    let zero = xs.iter().position(|x| *x == 0.0).expect("grid contains 0");
    let mut ys = vec![0.0; xs.len()];
    for k in zero + 1..xs.len() {
        ys[k] = ys[k - 1] + rng.gen_range(0.2..3.0) * (xs[k] - xs[k - 1]);
    }
    for k in (0..zero).rev() {
        ys[k] = ys[k + 1] - rng.gen_range(0.2..3.0) * (xs[k + 1] - xs[k]);
    }
    MonotoneCurve::piecewise_linear(xs.iter().copied().zip(ys).collect()).expect("increasing")
}

/// One curve of the given kind with random parameters. Power exponents stay
/// in [0.4, 1] so inversion near 0 is well conditioned.
pub fn random_curve(rng: &mut impl Rng, kind: CurveKind) -> MonotoneCurve {
    match kind {
        CurveKind::Identity => MonotoneCurve::identity(),
        CurveKind::Linear => MonotoneCurve::linear(rng.gen_range(0.5..2.0)).expect("positive"),
        CurveKind::Power => MonotoneCurve::power(rng.gen_range(0.4..1.0)).expect("positive"),
        CurveKind::Exponential => {
            let a = rng.gen_range(0.3..1.5);
            let a = if rng.gen_bool(0.5) { a } else { -a };
            MonotoneCurve::exponential(a).expect("nonzero")
        }
        CurveKind::PiecewiseLinear => {
            random_pl_curve(rng, &[-2.0, -1.0, -0.5, 0.0, 0.5, 1.0, 2.0])
        }
    }
}

/// A star-continuous representation with mixed curve kinds. Bounded-range
/// exponentials appear only at the last time, so every conditional
/// expectation lies in the range of the earlier curves.
pub fn random_representation(rng: &mut impl Rng, space: FilteredSpace, null_states: usize) -> Representation {
    let measure = random_measure(rng, space.n_states(), null_states);
    let last = space.last();
    let layers: Vec<Vec<MonotoneCurve>> = (0..space.n_times())
        .map(|i| {
            (0..space.n_atoms(i))
                .map(|_| {
                    let kinds: &[CurveKind] = if i == last {
                        &CurveKind::ALL
                    } else {
                        &CurveKind::UNBOUNDED
                    };
                    let kind = *kinds.choose(rng).expect("nonempty");
                    random_curve(rng, kind)
                })
                .collect()
        })
        .collect();
    let u0 = layers[0][0].clone();
    let field = UtilityField::new(&space, layers).expect("one curve per atom");
    Representation::new(space, measure, field, u0).expect("continuous curves")
}

/// A representation whose curves, including u0, are piecewise linear with
/// breakpoints at `xs`, on a strictly positive measure.
pub fn random_pl_representation(rng: &mut impl Rng, space: FilteredSpace, xs: &[f64]) -> Representation {
    let measure = random_measure(rng, space.n_states(), 0);
    let layers: Vec<Vec<MonotoneCurve>> = (0..space.n_times())
        .map(|i| (0..space.n_atoms(i)).map(|_| random_pl_curve(rng, xs)).collect())
        .collect();
    let u0 = layers[0][0].clone();
    let field = UtilityField::new(&space, layers).expect("one curve per atom");
    Representation::new(space, measure, field, u0).expect("continuous curves")
}

/// An act known at `i` with per-atom values uniform in [lo, hi].
pub fn random_act(rng: &mut impl Rng, space: &FilteredSpace, i: usize, lo: f64, hi: f64) -> Act {
    let per_atom: Vec<f64> = (0..space.n_atoms(i)).map(|_| rng.gen_range(lo..=hi)).collect();
    space.act_from_atoms(i, &per_atom).expect("atom values")
}

/// An equivalent measure: positive weights redrawn where the original is
/// positive.
pub fn random_equivalent_measure(rng: &mut impl Rng, measure: &ProbabilityMeasure) -> ProbabilityMeasure {
    let masses: Vec<f64> = measure
        .weights()
        .iter()
        .map(|&w| if w > 0.0 { rng.gen_range(0.1..1.0) } else { 0.0 })
        .collect();
    ProbabilityMeasure::from_masses(&masses).expect("positive total")
}

/// A strictly positive numeraire known at each time, values in [0.5, 2].
pub fn random_numeraire(rng: &mut impl Rng, space: &FilteredSpace) -> Vec<Act> {
    (0..space.n_times())
        .map(|i| random_act(rng, space, i, 0.5, 2.0))
        .collect()
}

/// Comparison pairs with s < t. Roughly one in four uses g = C_{s,t}(f),
/// the others draw g at random, so all four verdicts occur.
pub fn random_pairs(rng: &mut impl Rng, rep: &Representation, count: usize, tol: f64) -> Result<Vec<Pair>> {
    let space = rep.space();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let s = rng.gen_range(0..space.last());
        let t = rng.gen_range(s + 1..=space.last());
        let f = random_act(rng, space, t, -2.0, 2.0);
        let g = if rng.gen_bool(0.25) {
            rep.cce(s, t, &f, tol)?
        } else {
            random_act(rng, space, s, -2.0, 2.0)
        };
        out.push(Pair { s, t, g, f });
    }
    Ok(out)
}
