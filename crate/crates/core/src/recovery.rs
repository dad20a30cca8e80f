//! Reconstructing (P, u) from a preference oracle: an additive split of the
//! unconditional functional at the first step, then reweighting of the
//! composite functional at later steps, plus the relative-uniqueness check.

use crate::axioms::{ActGrid, PreferenceOracle};
use crate::curve::{bracket, MonotoneCurve, MAX_BISECTION_STEPS};
use crate::engine::Representation;
use crate::error::{Error, Result};
use crate::field::UtilityField;
use crate::space::{Act, Event, FilteredSpace, ProbabilityMeasure};

/// Acts audited for additivity when the full grid would be larger.
const AUDIT_LIMIT: usize = 4096;

/// Component values below this (relative to the functional's scale) mark
/// an atom as null.
const NULL_LEVEL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryOptions {
    /// Outcomes at which recovered curves are tabulated; must contain 0.
    pub grid: ActGrid,
    /// Outcome x̄ at which the measure is split: p_j ∝ V_j(x̄).
    pub calibration: f64,
    /// Largest accepted additivity residual, relative to max(1, |V|).
    pub residual_tol: f64,
    /// Relative stopping width of the oracle bisections; 0 runs them until
    /// the floats collapse.
    pub bisection_tol: f64,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self {
            grid: ActGrid::default(),
            calibration: 1.0,
            residual_tol: 1e-8,
            bisection_tol: 0.0,
        }
    }
}

/// One recovered level: the measure and curves on the atoms at
/// `time_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredStep {
    pub time_index: usize,
    pub atom_probs: Vec<f64>,
    pub curves: Vec<MonotoneCurve>,
    /// max |V(f) − Σ_j V_j(f_j)| over the audited acts.
    pub residual: f64,
    /// Number of acts in the additivity audit.
    pub audited: usize,
    /// Z = dP_i/dP̃ on the atoms one level up; empty at the first step.
    pub reweighting: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Recovered {
    pub representation: Representation,
    pub steps: Vec<RecoveredStep>,
}

/// Per-atom indifference point of f (known at i + 1) against constants at
/// i, from the two oracle thresholds. Atoms indifferent to every constant
/// (null atoms) get 0.
pub fn cce_from_oracle(oracle: &dyn PreferenceOracle, i: usize, f: &Act, tol: f64) -> Result<Act> {
    let space = oracle.space();
    let mut values = vec![0.0; space.n_states()];
    for (a, atom) in space.partition(i).iter().enumerate() {
        if let Some(x) = cce_on_atom(oracle, i, a, f, tol)? {
            for &s in atom {
                values[s] = x;
            }
        }
    }
    Ok(Act::new(i, values))
}

/// The indifference point on one atom at i; `None` when the atom is null.
fn cce_on_atom(oracle: &dyn PreferenceOracle, i: usize, a: usize, f: &Act, tol: f64) -> Result<Option<f64>> {
    let space = oracle.space();
    let event = Event::from_atoms(space, i, &[a]);
    let ask = |c: f64| oracle.query(i, &space.constant(i, c), f, &event);
    if ask(0.0).equivalent() && ask(-1e12).equivalent() && ask(1e12).equivalent() {
        return Ok(None);
    }
    let lower = threshold(|c| ask(c).succeq, tol)?;
    let upper = threshold(|c| !ask(c).preceq, tol)?;
    Ok(Some(0.5 * (lower + upper)))
}

/// The recovered curve of atom `a` at `level` evaluated at any outcome.
/// Grid outcomes are read from the stored step; elsewhere the value is
/// rebuilt from the oracle by chaining certainty equivalents down to u0,
/// so no interpolation error enters the next level.
fn level_value(
    oracle: &dyn PreferenceOracle,
    u0: &MonotoneCurve,
    history: &[RecoveredStep],
    opts: &RecoveryOptions,
    level: usize,
    a: usize,
    x: f64,
) -> Result<f64> {
    if level == 0 {
        return Ok(u0.eval(x));
    }
    let step = &history[level - 1];
    if x == 0.0 || step.atom_probs[a] == 0.0 {
        return Ok(0.0);
    }
    if opts.grid.values().contains(&x) {
        return Ok(step.curves[a].eval(x));
    }
    let space = oracle.space();
    let below = level - 1;
    let mut per_atom = vec![0.0; space.n_atoms(level)];
    per_atom[a] = x;
    let g = space.act_from_atoms(level, &per_atom)?;
    let parent = space.atom_of(below, space.atom(level, a)[0]);
    let Some(c) = cce_on_atom(oracle, below, parent, &g, opts.bisection_tol)? else {
        return Ok(0.0);
    };
    let parent_prob = if below == 0 {
        1.0
    } else {
        history[below - 1].atom_probs[parent]
    };
    let v = parent_prob * level_value(oracle, u0, history, opts, below, parent, c)?;
    Ok(v / step.atom_probs[a])
}

fn threshold(above: impl Fn(f64) -> bool, tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = bracket(&above)?;
    for _ in 0..MAX_BISECTION_STEPS {
        if hi - lo <= tol * hi.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if above(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Piecewise-linear interpolation of `curve` through the points `xs`
/// (which must contain 0).
pub fn tabulate(curve: &MonotoneCurve, xs: &[f64]) -> Result<MonotoneCurve> {
    MonotoneCurve::piecewise_linear(xs.iter().map(|&x| (x, curve.eval(x))).collect())
}

/// Acts at level j used for the additivity audit: every grid act when there
/// are few enough, otherwise every act with grid values on at most two atoms.
fn audit_acts(space: &FilteredSpace, j: usize, grid: &ActGrid) -> Vec<Act> {
    let m = space.n_atoms(j);
    let k = grid.values().len();
    if k.checked_pow(m as u32).is_some_and(|n| n <= AUDIT_LIMIT) {
        return grid.acts(space, j);
    }
    let mut out = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            for &x in grid.values() {
                for &y in grid.values() {
                    let mut per_atom = vec![0.0; m];
                    per_atom[a] = x;
                    per_atom[b] = y;
                    out.push(space.act_from_atoms(j, &per_atom).expect("atom values"));
                }
            }
        }
    }
    out
}

/// The per-atom components of an unconditional functional on acts known at
/// level j, and the additivity residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    /// V_j(x) at each grid outcome, per atom.
    pub components: Vec<Vec<f64>>,
    pub residual: f64,
    pub audited: usize,
}

pub fn decompose(
    space: &FilteredSpace,
    j: usize,
    value: &dyn Fn(&Act) -> Result<f64>,
    grid: &ActGrid,
) -> Result<Decomposition> {
    let xs = grid.values();
    let m = space.n_atoms(j);
    let mut components = Vec::with_capacity(m);
    for a in 0..m {
        let mut row = Vec::with_capacity(xs.len());
        for &x in xs {
            if x == 0.0 {
                row.push(0.0);
                continue;
            }
            let mut per_atom = vec![0.0; m];
            per_atom[a] = x;
            row.push(value(&space.act_from_atoms(j, &per_atom)?)?);
        }
        components.push(row);
    }
    let acts = audit_acts(space, j, grid);
    let mut residual = 0.0f64;
    for f in &acts {
        let total = value(f)?;
        let split: f64 = space
            .partition(j)
            .iter()
            .enumerate()
            .map(|(a, atom)| {
                let x = f.values[atom[0]];
                let k = xs.iter().position(|v| *v == x).expect("grid outcome");
                components[a][k]
            })
            .sum();
        residual = residual.max((total - split).abs() / total.abs().max(1.0));
    }
    Ok(Decomposition {
        components,
        residual,
        audited: acts.len(),
    })
}

/// Splits a decomposed functional into per-atom probabilities and curves:
/// p_j ∝ V_j(x̄), u_j = V_j / p_j; null atoms get p_j = 0 and the identity.
fn split(
    space: &FilteredSpace,
    j: usize,
    dec: &Decomposition,
    opts: &RecoveryOptions,
    value: &dyn Fn(&Act) -> Result<f64>,
) -> Result<(Vec<f64>, Vec<MonotoneCurve>)> {
    let xs = opts.grid.values();
    let m = space.n_atoms(j);
    let scale = dec
        .components
        .iter()
        .flatten()
        .fold(1.0f64, |s, v| s.max(v.abs()));
    let null: Vec<bool> = dec
        .components
        .iter()
        .map(|row| row.iter().all(|v| v.abs() <= NULL_LEVEL * scale))
        .collect();
    let essential = null.iter().filter(|n| !**n).count();
    if essential < 3 {
        return Err(Error::Precondition(format!(
            "recovery needs at least three essential atoms at time index {j}, found {essential}"
        )));
    }
    let at_calibration = |a: usize| -> Result<f64> {
        match xs.iter().position(|x| *x == opts.calibration) {
            Some(k) => Ok(dec.components[a][k]),
            None => {
                let mut per_atom = vec![0.0; m];
                per_atom[a] = opts.calibration;
                value(&space.act_from_atoms(j, &per_atom)?)
            }
        }
    };
    let mut mass = vec![0.0; m];
    for a in 0..m {
        if !null[a] {
            mass[a] = at_calibration(a)?;
            if !(mass[a] > 0.0) {
                return Err(Error::Recovery(format!(
                    "component of atom {} is not positive at the calibration outcome {}",
                    Event::from_atoms(space, j, &[a]).names(space),
                    opts.calibration
                )));
            }
        }
    }
    let total: f64 = mass.iter().sum();
    let probs: Vec<f64> = mass.iter().map(|v| v / total).collect();
    let mut curves = Vec::with_capacity(m);
    for a in 0..m {
        if null[a] {
            curves.push(MonotoneCurve::identity());
            continue;
        }
        let pts: Vec<(f64, f64)> = xs
            .iter()
            .zip(&dec.components[a])
            .map(|(&x, &v)| (x, v / probs[a]))
            .collect();
        if pts.windows(2).any(|w| !(w[1].1 > w[0].1)) {
            return Err(Error::Recovery(format!(
                "recovered curve on atom {} is not strictly increasing on the grid",
                Event::from_atoms(space, j, &[a]).names(space)
            )));
        }
        curves.push(MonotoneCurve::piecewise_linear(pts)?);
    }
    Ok((probs, curves))
}

fn check_residual(dec: &Decomposition, opts: &RecoveryOptions, j: usize) -> Result<()> {
    if dec.residual > opts.residual_tol {
        return Err(Error::Recovery(format!(
            "additivity residual {} at time index {j} exceeds {}; the oracle is not additively representable",
            dec.residual, opts.residual_tol
        )));
    }
    Ok(())
}

/// V_1(f) = u0(C_0(f)) split additively over the atoms at time 1.
pub fn recover_step0(
    oracle: &dyn PreferenceOracle,
    u0: &MonotoneCurve,
    opts: &RecoveryOptions,
) -> Result<RecoveredStep> {
    let space = oracle.space();
    if space.n_times() < 2 {
        return Err(Error::Precondition("recovery needs at least two times".into()));
    }
    let value = |f: &Act| -> Result<f64> {
        let c = cce_from_oracle(oracle, 0, f, opts.bisection_tol)?;
        Ok(u0.eval(c.values[0]))
    };
    let dec = decompose(space, 1, &value, &opts.grid)?;
    check_residual(&dec, opts, 1)?;
    let (atom_probs, curves) = split(space, 1, &dec, opts, &value)?;
    Ok(RecoveredStep {
        time_index: 1,
        atom_probs,
        curves,
        residual: dec.residual,
        audited: dec.audited,
        reweighting: Vec::new(),
    })
}

/// Level i + 1 from the recovered level i: split the composite functional
/// f ↦ E_{P_i}[u_i(C_i(f))], then reweight by Z = dP_i/dP̃ on F_{t_i} so
/// that the new measure agrees with P_i on the atoms at i.
pub fn recover_step_i(
    oracle: &dyn PreferenceOracle,
    u0: &MonotoneCurve,
    history: &[RecoveredStep],
    opts: &RecoveryOptions,
) -> Result<RecoveredStep> {
    let space = oracle.space();
    let previous = history
        .last()
        .ok_or_else(|| Error::Precondition("recover_step_i needs the earlier levels".into()))?;
    let i = previous.time_index;
    let j = i + 1;
    space.check_time(j)?;
    let value = |f: &Act| -> Result<f64> {
        let mut total = 0.0;
        for (a, atom) in space.partition(i).iter().enumerate() {
            let touched = atom.iter().any(|&s| f.values[s] != 0.0);
            if !touched || previous.atom_probs[a] == 0.0 {
                continue;
            }
            if let Some(c) = cce_on_atom(oracle, i, a, f, opts.bisection_tol)? {
                total += previous.atom_probs[a] * level_value(oracle, u0, history, opts, i, a, c)?;
            }
        }
        Ok(total)
    };
    let dec = decompose(space, j, &value, &opts.grid)?;
    check_residual(&dec, opts, j)?;
    let (tilde, curves) = split(space, j, &dec, opts, &value)?;
    let parent = |b: usize| space.atom_of(i, space.atom(j, b)[0]);
    let mut coarse = vec![0.0; space.n_atoms(i)];
    for (b, p) in tilde.iter().enumerate() {
        coarse[parent(b)] += p;
    }
    let mut z = vec![1.0; space.n_atoms(i)];
    for a in 0..space.n_atoms(i) {
        let (pi, pt) = (previous.atom_probs[a], coarse[a]);
        match (pi > 0.0, pt > 0.0) {
            (true, true) => z[a] = pi / pt,
            (false, false) => {}
            _ => {
                return Err(Error::Recovery(format!(
                    "the split measure is not equivalent to the previous one on atom {}",
                    Event::from_atoms(space, i, &[a]).names(space)
                )))
            }
        }
    }
    let atom_probs: Vec<f64> = (0..space.n_atoms(j)).map(|b| tilde[b] * z[parent(b)]).collect();
    let curves = curves
        .iter()
        .enumerate()
        .map(|(b, c)| {
            if atom_probs[b] > 0.0 {
                c.scaled(1.0, 1.0 / z[parent(b)])
                    .and_then(|s| tabulate(&s, opts.grid.values()))
            } else {
                Ok(c.clone())
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RecoveredStep {
        time_index: j,
        atom_probs,
        curves,
        residual: dec.residual,
        audited: dec.audited,
        reweighting: z,
    })
}

/// Recovers every level and assembles the representation. Mass of a final
/// atom with several states is split equally among them.
pub fn recover(
    oracle: &dyn PreferenceOracle,
    u0: &MonotoneCurve,
    opts: &RecoveryOptions,
) -> Result<Recovered> {
    let space = oracle.space();
    let mut steps = vec![recover_step0(oracle, u0, opts)?];
    while steps.last().expect("nonempty").time_index < space.last() {
        let next = recover_step_i(oracle, u0, &steps, opts)?;
        steps.push(next);
    }
    let last = steps.last().expect("nonempty");
    let mut weights = vec![0.0; space.n_states()];
    for (a, atom) in space.partition(space.last()).iter().enumerate() {
        for &s in atom {
            weights[s] = last.atom_probs[a] / atom.len() as f64;
        }
    }
    let measure = ProbabilityMeasure::from_masses(&weights)?;
    let mut layers = vec![vec![u0.clone()]];
    layers.extend(steps.iter().map(|s| s.curves.clone()));
    let field = UtilityField::new(space, layers)?;
    let representation = Representation::new(space.clone(), measure, field, u0.clone())?;
    Ok(Recovered {
        representation,
        steps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessCheck {
    pub passed: bool,
    /// sup |u_B − δ u_A| over the grid and positive-probability states.
    pub max_deviation: f64,
    /// A state charged by exactly one of the two measures.
    pub witness: Option<String>,
    /// δ_i = dP_A/dP_B on F_{t_i}, per time.
    pub delta: Vec<Act>,
}

/// Whether rep_b = (P_B, δ·u_A) with δ_i = dP_A/dP_B on F_{t_i}, up to `tol`
/// on the grid outcomes, including u0 (δ_0 = 1).
pub fn check_relative_uniqueness(
    a: &Representation,
    b: &Representation,
    grid: &ActGrid,
    tol: f64,
) -> Result<UniquenessCheck> {
    if a.space() != b.space() {
        return Err(Error::Precondition("representations live on different spaces".into()));
    }
    let space = a.space();
    if let Some(s) = a.measure().equivalence_witness(b.measure()) {
        return Ok(UniquenessCheck {
            passed: false,
            max_deviation: f64::INFINITY,
            witness: Some(space.state_name(s).to_string()),
            delta: Vec::new(),
        });
    }
    let delta = a.discount_factors(b.measure())?;
    let mut max_deviation = 0.0f64;
    for i in 0..space.n_times() {
        for s in 0..space.n_states() {
            if a.measure().weight(s) == 0.0 {
                continue;
            }
            let (ua, ub) = (a.field().curve(i, s), b.field().curve(i, s));
            for &x in grid.values() {
                let d = (ub.eval(x) - delta[i].values[s] * ua.eval(x)).abs();
                max_deviation = max_deviation.max(d);
            }
        }
    }
    Ok(UniquenessCheck {
        passed: max_deviation <= tol,
        max_deviation,
        witness: None,
        delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axioms::{FunctionalOracle, InducedOracle};

    fn three_atoms() -> FilteredSpace {
        FilteredSpace::from_names(
            &["a", "b", "c"],
            &[0.0, 1.0],
            &[vec![vec!["a", "b", "c"]], vec![vec!["a"], vec!["b"], vec!["c"]]],
        )
        .unwrap()
    }

    fn linear_rep(p: Vec<f64>, slopes: &[f64]) -> Representation {
        let sp = three_atoms();
        let field = UtilityField::new(
            &sp,
            vec![
                vec![MonotoneCurve::identity()],
                slopes.iter().map(|&c| MonotoneCurve::linear(c).unwrap()).collect(),
            ],
        )
        .unwrap();
        Representation::new(sp, ProbabilityMeasure::new(p).unwrap(), field, MonotoneCurve::identity())
            .unwrap()
    }

    #[test]
    fn canonical_split_of_linear_utilities() {
        let oracle = InducedOracle::new(linear_rep(vec![0.2, 0.3, 0.5], &[1.0, 2.0, 4.0]), 1e-12);
        let step = recover_step0(&oracle, &MonotoneCurve::identity(), &RecoveryOptions::default())
            .unwrap();
        let want = [1.0 / 14.0, 3.0 / 14.0, 10.0 / 14.0];
        for (p, w) in step.atom_probs.iter().zip(want) {
            assert!((p - w).abs() < 1e-12, "{p} vs {w}");
        }
        for c in &step.curves {
            for x in [-2.0, -0.5, 1.0, 2.0, 3.7] {
                assert!((c.eval(x) - 2.8 * x).abs() < 1e-10);
            }
        }
        assert!(step.residual < 1e-12);
    }

    #[test]
    fn identity_representation_is_a_fixed_point() {
        let oracle = InducedOracle::new(linear_rep(vec![0.2, 0.3, 0.5], &[1.0; 3]), 1e-12);
        let rec = recover(&oracle, &MonotoneCurve::identity(), &RecoveryOptions::default()).unwrap();
        let got = rec.representation.measure().weights();
        for (g, w) in got.iter().zip([0.2, 0.3, 0.5]) {
            assert!((g - w).abs() < 1e-12);
        }
        let check = check_relative_uniqueness(
            oracle.representation(),
            &rec.representation,
            &ActGrid::default(),
            1e-9,
        )
        .unwrap();
        assert!(check.passed, "{}", check.max_deviation);
    }

    #[test]
    fn min_functional_is_rejected() {
        let oracle = FunctionalOracle::new(
            three_atoms(),
            |_, x| x,
            |_, _, f: &Act| f.values.iter().copied().fold(f64::INFINITY, f64::min),
            1e-12,
        );
        let value = |f: &Act| -> Result<f64> { Ok(cce_from_oracle(&oracle, 0, f, 0.0)?.values[0]) };
        let dec = decompose(oracle.space(), 1, &value, &ActGrid::default()).unwrap();
        assert!(dec.residual > 0.1);
        let err = recover_step0(&oracle, &MonotoneCurve::identity(), &RecoveryOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::Recovery(_)));
    }

    #[test]
    fn too_few_essential_atoms() {
        let oracle = InducedOracle::new(linear_rep(vec![0.5, 0.5, 0.0], &[1.0; 3]), 1e-12);
        let err = recover_step0(&oracle, &MonotoneCurve::identity(), &RecoveryOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::Precondition(_)), "{err}");
    }

    #[test]
    fn rescaled_representations_are_relatively_unique() {
        let rep = linear_rep(vec![0.2, 0.3, 0.5], &[1.0, 2.0, 4.0]);
        let star = ProbabilityMeasure::new(vec![0.5, 0.25, 0.25]).unwrap();
        let other = rep.rescaled(&star).unwrap();
        let check = check_relative_uniqueness(&rep, &other, &ActGrid::default(), 1e-9).unwrap();
        assert!(check.passed, "{}", check.max_deviation);
        assert!((check.delta[1].values[0] - 0.4).abs() < 1e-15);
        let q = ProbabilityMeasure::new(vec![0.5, 0.5, 0.0]).unwrap();
        let broken = rep.with_measure(q).unwrap();
        let check = check_relative_uniqueness(&rep, &broken, &ActGrid::default(), 1e-9).unwrap();
        assert!(!check.passed);
        assert_eq!(check.witness.as_deref(), Some("c"));
    }

    #[test]
    fn piecewise_linear_round_trip() {
        use crate::random::{random_branching_space, random_pairs, random_pl_representation};
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let grid = ActGrid::default();
        for _ in 0..3 {
            let space = random_branching_space(&mut rng, 3, 2);
            let rep = random_pl_representation(&mut rng, space, grid.values());
            let oracle = InducedOracle::new(rep.clone(), 1e-12);
            let rec = recover(&oracle, rep.u0(), &RecoveryOptions::default()).unwrap();
            let check =
                check_relative_uniqueness(&rep, &rec.representation, &grid, 1e-6).unwrap();
            assert!(check.passed, "{}", check.max_deviation);
            for p in random_pairs(&mut rng, &rep, 100, 1e-9).unwrap() {
                let a = rep.compare(p.s, p.t, &p.g, &p.f, 1e-9).unwrap();
                let b = rec.representation.compare(p.s, p.t, &p.g, &p.f, 1e-9).unwrap();
                assert_eq!(a, b);
            }
        }
    }
}
