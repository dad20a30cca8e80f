//! Finite filtered probability spaces: states, a refining chain of partitions,
//! probability weights, acts and conditional expectation.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

/// Absolute tolerance for measure normalization and measurability checks.
pub const MEASURE_TOL: f64 = 1e-12;

/// Default sup-norm tolerance when comparing acts.
pub const DEFAULT_TOL: f64 = 1e-9;

/// A finite state set with one partition per updating time, each refining the
/// previous one. Atoms are stored as sorted state-index lists, ordered by
/// their first state.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredSpace {
    states: Vec<String>,
    times: Vec<f64>,
    partitions: Vec<Vec<Vec<usize>>>,
    atom_of: Vec<Vec<usize>>,
}

impl FilteredSpace {
    /// Builds a space from state names, time labels and, for each time, the
    /// atoms as lists of state indices.
    pub fn new(
        states: Vec<String>,
        times: Vec<f64>,
        partitions: Vec<Vec<Vec<usize>>>,
    ) -> Result<Self> {
        let n = states.len();
        if n == 0 {
            return Err(Error::InvalidSpace("the state set is empty".into()));
        }
        let mut seen = BTreeSet::new();
        for s in &states {
            if s.is_empty() || !seen.insert(s.as_str()) {
                return Err(Error::InvalidSpace(format!(
                    "state names must be nonempty and distinct (`{s}`)"
                )));
            }
        }
        if times.is_empty() {
            return Err(Error::InvalidSpace("no updating times".into()));
        }
        if partitions.len() != times.len() {
            return Err(Error::InvalidSpace(format!(
                "{} times but {} partitions",
                times.len(),
                partitions.len()
            )));
        }
        for w in times.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidSpace(format!(
                    "times must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }

        let mut sorted_parts = Vec::with_capacity(partitions.len());
        let mut atom_of = Vec::with_capacity(partitions.len());
        for (i, part) in partitions.into_iter().enumerate() {
            let mut owner = vec![usize::MAX; n];
            let mut atoms: Vec<Vec<usize>> = Vec::with_capacity(part.len());
            for mut atom in part {
                if atom.is_empty() {
                    return Err(Error::InvalidSpace(format!("empty atom at time index {i}")));
                }
                atom.sort_unstable();
                atom.dedup();
                atoms.push(atom);
            }
            atoms.sort_by_key(|a| a[0]);
            for (a, atom) in atoms.iter().enumerate() {
                for &s in atom {
                    if s >= n {
                        return Err(Error::InvalidSpace(format!(
                            "state index {s} out of range at time index {i}"
                        )));
                    }
                    if owner[s] != usize::MAX {
                        return Err(Error::InvalidSpace(format!(
                            "state `{}` belongs to two atoms at time index {i}",
                            states[s]
                        )));
                    }
                    owner[s] = a;
                }
            }
            if let Some(s) = owner.iter().position(|&o| o == usize::MAX) {
                return Err(Error::InvalidSpace(format!(
                    "state `{}` is not covered at time index {i}",
                    states[s]
                )));
            }
            sorted_parts.push(atoms);
            atom_of.push(owner);
        }

        if sorted_parts[0].len() != 1 {
            return Err(Error::InvalidSpace(
                "the initial partition must be the whole state set".into(),
            ));
        }
        for i in 1..sorted_parts.len() {
            for atom in &sorted_parts[i] {
                let parent = atom_of[i - 1][atom[0]];
                if atom.iter().any(|&s| atom_of[i - 1][s] != parent) {
                    let names: Vec<&str> = atom.iter().map(|&s| states[s].as_str()).collect();
                    return Err(Error::InvalidSpace(format!(
                        "atom {{{}}} at time index {i} does not refine time index {}",
                        names.join(", "),
                        i - 1
                    )));
                }
            }
        }

        Ok(Self {
            states,
            times,
            partitions: sorted_parts,
            atom_of,
        })
    }

    /// Same as [`FilteredSpace::new`] with atoms given by state names.
    pub fn from_names(
        states: &[&str],
        times: &[f64],
        partitions: &[Vec<Vec<&str>>],
    ) -> Result<Self> {
        let lookup = |name: &str| {
            states
                .iter()
                .position(|s| *s == name)
                .ok_or_else(|| Error::InvalidSpace(format!("unknown state `{name}`")))
        };
        let parts = partitions
            .iter()
            .map(|p| {
                p.iter()
                    .map(|atom| atom.iter().map(|s| lookup(s)).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(
            states.iter().map(|s| s.to_string()).collect(),
            times.to_vec(),
            parts,
        )
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    /// Number of updating times, N + 1.
    pub fn n_times(&self) -> usize {
        self.times.len()
    }

    /// Index of the final time, N.
    pub fn last(&self) -> usize {
        self.times.len() - 1
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn state_name(&self, s: usize) -> &str {
        &self.states[s]
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn check_time(&self, i: usize) -> Result<()> {
        if i < self.times.len() {
            Ok(())
        } else {
            Err(Error::TimeIndex {
                index: i,
                len: self.times.len(),
            })
        }
    }

    /// Atoms of the partition at `i` as state-index lists.
    pub fn partition(&self, i: usize) -> &[Vec<usize>] {
        &self.partitions[i]
    }

    pub fn n_atoms(&self, i: usize) -> usize {
        self.partitions[i].len()
    }

    pub fn atom(&self, i: usize, a: usize) -> &[usize] {
        &self.partitions[i][a]
    }

    /// Index of the atom at time `i` containing state `s`.
    pub fn atom_of(&self, i: usize, s: usize) -> usize {
        self.atom_of[i][s]
    }

    /// The atoms at `i` as events measurable at `i`.
    pub fn atoms(&self, i: usize) -> Result<Vec<Event>> {
        self.check_time(i)?;
        Ok(self.partitions[i]
            .iter()
            .map(|a| Event::at(i, a.iter().copied()))
            .collect())
    }

    /// Atoms at `j > i` contained in atom `a` of time `i`.
    pub fn descendants(&self, i: usize, a: usize, j: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.partitions[i][a]
            .iter()
            .map(|&s| self.atom_of[j][s])
            .collect();
        out.dedup();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// The whole state set as an event at time 0.
    pub fn omega(&self) -> Event {
        Event::at(0, 0..self.n_states())
    }

    pub fn is_measurable_act(&self, i: usize, f: &Act) -> bool {
        if i >= self.n_times() || f.values.len() != self.n_states() {
            return false;
        }
        self.partitions[i].iter().all(|atom| {
            let v = f.values[atom[0]];
            atom.iter()
                .all(|&s| f.values[s].is_finite() && (f.values[s] - v).abs() <= MEASURE_TOL)
        })
    }

    pub fn is_measurable_event(&self, i: usize, e: &Event) -> bool {
        if i >= self.n_times() || e.members.iter().any(|&s| s >= self.n_states()) {
            return false;
        }
        self.partitions[i]
            .iter()
            .all(|atom| atom.iter().all(|&s| e.contains(s)) || atom.iter().all(|&s| !e.contains(s)))
    }

    /// Builds an act measurable at `i`, rejecting non-measurable or
    /// non-finite values.
    pub fn act(&self, i: usize, values: Vec<f64>) -> Result<Act> {
        self.check_time(i)?;
        if values.len() != self.n_states() {
            return Err(Error::NotMeasurable {
                time_index: i,
                detail: format!("{} values for {} states", values.len(), self.n_states()),
            });
        }
        if let Some(s) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NotMeasurable {
                time_index: i,
                detail: format!("value at `{}` is not finite", self.states[s]),
            });
        }
        let act = Act::new(i, values);
        for atom in &self.partitions[i] {
            let v = act.values[atom[0]];
            if let Some(&s) = atom.iter().find(|&&s| (act.values[s] - v).abs() > MEASURE_TOL) {
                return Err(Error::NotMeasurable {
                    time_index: i,
                    detail: format!(
                        "`{}` and `{}` share an atom but take values {} and {}",
                        self.states[atom[0]], self.states[s], v, act.values[s]
                    ),
                });
            }
        }
        Ok(act)
    }

    /// Builds an act at `i` from one value per atom.
    pub fn act_from_atoms(&self, i: usize, per_atom: &[f64]) -> Result<Act> {
        self.check_time(i)?;
        if per_atom.len() != self.n_atoms(i) {
            return Err(Error::NotMeasurable {
                time_index: i,
                detail: format!(
                    "{} atom values for {} atoms",
                    per_atom.len(),
                    self.n_atoms(i)
                ),
            });
        }
        let values = (0..self.n_states())
            .map(|s| per_atom[self.atom_of[i][s]])
            .collect();
        self.act(i, values)
    }

    pub fn constant(&self, i: usize, c: f64) -> Act {
        Act::new(i, vec![c; self.n_states()])
    }

    /// One value per atom of `act` at its own time index.
    pub fn atom_values(&self, act: &Act) -> Vec<f64> {
        self.partitions[act.time_index]
            .iter()
            .map(|atom| act.values[atom[0]])
            .collect()
    }
}

/// A real-valued map on states, measurable at `time_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct Act {
    pub time_index: usize,
    pub values: Vec<f64>,
}

impl Act {
    /// Unchecked constructor; use [`FilteredSpace::act`] to validate.
    pub fn new(time_index: usize, values: Vec<f64>) -> Self {
        Self { time_index, values }
    }

    pub fn value(&self, s: usize) -> f64 {
        self.values[s]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Act {
        Act::new(self.time_index, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Pointwise combination; the result lives at the later of the two
    /// time indices.
    pub fn zip_with(&self, other: &Act, f: impl Fn(f64, f64) -> f64) -> Act {
        Act::new(
            self.time_index.max(other.time_index),
            self.values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn add(&self, other: &Act) -> Act {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Act) -> Act {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, k: f64) -> Act {
        self.map(|v| k * v)
    }

    pub fn shift(&self, c: f64) -> Act {
        self.map(|v| v + c)
    }

    /// f·1_A.
    pub fn restrict(&self, event: &Event) -> Act {
        Act::new(
            self.time_index,
            self.values
                .iter()
                .enumerate()
                .map(|(s, &v)| if event.contains(s) { v } else { 0.0 })
                .collect(),
        )
    }

    /// Same values tagged with a later (coarser-compatible) time index.
    pub fn at_time(&self, time_index: usize) -> Act {
        Act::new(time_index, self.values.clone())
    }

    /// Sup-norm distance over the states selected by `mask`.
    pub fn sup_distance_on(&self, other: &Act, mask: impl Fn(usize) -> bool) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .enumerate()
            .filter(|(s, _)| mask(*s))
            .map(|(_, (a, b))| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_distance(&self, other: &Act) -> f64 {
        self.sup_distance_on(other, |_| true)
    }

    pub fn approx_eq(&self, other: &Act, tol: f64) -> bool {
        self.values.len() == other.values.len() && self.sup_distance(other) <= tol
    }
}

impl fmt::Display for Act {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}(", self.time_index)?;
        for (k, v) in self.values.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// A set of states, optionally tagged with the time index at which it is
/// known to be measurable.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Event {
    pub members: BTreeSet<usize>,
    pub time_index: Option<usize>,
}

impl Event {
    pub fn new(members: impl IntoIterator<Item = usize>) -> Self {
        Self {
            members: members.into_iter().collect(),
            time_index: None,
        }
    }

    pub fn at(time_index: usize, members: impl IntoIterator<Item = usize>) -> Self {
        Self {
            members: members.into_iter().collect(),
            time_index: Some(time_index),
        }
    }

    pub fn empty() -> Self {
        Self::new(std::iter::empty())
    }

    /// Union of the given atoms of time `i`.
    pub fn from_atoms(space: &FilteredSpace, i: usize, atoms: &[usize]) -> Self {
        Self::at(
            i,
            atoms
                .iter()
                .flat_map(|&a| space.atom(i, a).iter().copied()),
        )
    }

    pub fn contains(&self, s: usize) -> bool {
        self.members.contains(&s)
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_subset(&self, other: &Event) -> bool {
        self.members.is_subset(&other.members)
    }

    pub fn union(&self, other: &Event) -> Event {
        Event {
            members: self.members.union(&other.members).copied().collect(),
            time_index: self.time_index.max(other.time_index),
        }
    }

    pub fn intersection(&self, other: &Event) -> Event {
        Event {
            members: self.members.intersection(&other.members).copied().collect(),
            time_index: self.time_index.max(other.time_index),
        }
    }

    pub fn complement(&self, n_states: usize) -> Event {
        Event {
            members: (0..n_states).filter(|s| !self.contains(*s)).collect(),
            time_index: self.time_index,
        }
    }

    pub fn indicator(&self, time_index: usize, n_states: usize) -> Act {
        Act::new(
            time_index,
            (0..n_states)
                .map(|s| if self.contains(s) { 1.0 } else { 0.0 })
                .collect(),
        )
    }

    pub fn names(&self, space: &FilteredSpace) -> String {
        let names: Vec<&str> = self.members.iter().map(|&s| space.state_name(s)).collect();
        format!("{{{}}}", names.join(", "))
    }
}

/// Nonnegative weights on states summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMeasure {
    weights: Vec<f64>,
}

impl ProbabilityMeasure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidMeasure("no weights".into()));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
            return Err(Error::InvalidMeasure(format!("weight {w} is negative or not finite")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MEASURE_TOL {
            return Err(Error::InvalidMeasure(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { weights })
    }

    /// Normalizes nonnegative masses with a positive total.
    pub fn from_masses(masses: &[f64]) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) || masses.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::InvalidMeasure(
                "masses must be nonnegative with a positive total".into(),
            ));
        }
        Self::new(masses.iter().map(|m| m / total).collect())
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0 / n as f64; n],
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, s: usize) -> f64 {
        self.weights[s]
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn prob(&self, e: &Event) -> f64 {
        e.members.iter().map(|&s| self.weights[s]).sum()
    }

    pub fn atom_prob(&self, space: &FilteredSpace, i: usize, a: usize) -> f64 {
        space.atom(i, a).iter().map(|&s| self.weights[s]).sum()
    }

    /// Probability of every atom at time `i`.
    pub fn atom_probs(&self, space: &FilteredSpace, i: usize) -> Vec<f64> {
        (0..space.n_atoms(i))
            .map(|a| self.atom_prob(space, i, a))
            .collect()
    }

    pub fn is_null_state(&self, s: usize) -> bool {
        self.weights[s] == 0.0
    }

    /// Ok when both measures charge exactly the same states; otherwise the
    /// first state where they disagree.
    pub fn equivalence_witness(&self, other: &ProbabilityMeasure) -> Option<usize> {
        (0..self.weights.len().min(other.weights.len()))
            .find(|&s| (self.weights[s] > 0.0) != (other.weights[s] > 0.0))
    }

    pub fn is_equivalent(&self, other: &ProbabilityMeasure) -> bool {
        self.weights.len() == other.weights.len() && self.equivalence_witness(other).is_none()
    }

    /// Pointwise density dself/dother on the final partition, 0 where both
    /// vanish.
    pub fn density_wrt(&self, other: &ProbabilityMeasure) -> Result<Vec<f64>> {
        if let Some(s) = self.equivalence_witness(other) {
            return Err(Error::NotEquivalent {
                state: format!("#{s}"),
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(&p, &q)| if q > 0.0 { p / q } else { 0.0 })
            .collect())
    }

    /// Expectation of an act.
    pub fn expectation(&self, f: &Act) -> f64 {
        self.weights.iter().zip(&f.values).map(|(p, v)| p * v).sum()
    }
}

/// Conditional expectation together with the atoms filled by convention
/// because they carry no probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Conditioned {
    pub value: Act,
    pub null_fill: Vec<usize>,
}

/// E_P[f | F_i]: the weighted average of `f` over each atom at `i`, with 0
/// on zero-probability atoms.
pub fn conditional_expectation(
    space: &FilteredSpace,
    measure: &ProbabilityMeasure,
    f: &Act,
    i: usize,
) -> Result<Act> {
    conditional_expectation_detailed(space, measure, f, i).map(|c| c.value)
}

pub fn conditional_expectation_detailed(
    space: &FilteredSpace,
    measure: &ProbabilityMeasure,
    f: &Act,
    i: usize,
) -> Result<Conditioned> {
    space.check_time(i)?;
    space.check_time(f.time_index)?;
    if i > f.time_index {
        return Err(Error::IncompatibleTimes {
            left: i,
            right: f.time_index,
        });
    }
    if measure.len() != space.n_states() || f.len() != space.n_states() {
        return Err(Error::InvalidMeasure(format!(
            "measure has {} weights, act {} values, space {} states",
            measure.len(),
            f.len(),
            space.n_states()
        )));
    }
    let mut values = vec![0.0; space.n_states()];
    let mut null_fill = Vec::new();
    for (a, atom) in space.partition(i).iter().enumerate() {
        let mass: f64 = atom.iter().map(|&s| measure.weight(s)).sum();
        let v = if mass > 0.0 {
            atom.iter()
                .map(|&s| measure.weight(s) * f.values[s])
                .sum::<f64>()
                / mass
        } else {
            null_fill.push(a);
            0.0
        };
        for &s in atom {
            values[s] = v;
        }
    }
    Ok(Conditioned {
        value: Act::new(i, values),
        null_fill,
    })
}

/// The null events at time `i`: every event contained in the union of the
/// zero-probability atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct NullFamily {
    pub time_index: usize,
    pub atoms: Vec<usize>,
    pub union: Event,
}

impl NullFamily {
    pub fn contains(&self, e: &Event) -> bool {
        e.is_subset(&self.union)
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

pub fn null_events(
    space: &FilteredSpace,
    measure: &ProbabilityMeasure,
    i: usize,
) -> Result<NullFamily> {
    space.check_time(i)?;
    let atoms: Vec<usize> = (0..space.n_atoms(i))
        .filter(|&a| measure.atom_prob(space, i, a) == 0.0)
        .collect();
    let union = Event::from_atoms(space, i, &atoms);
    Ok(NullFamily {
        time_index: i,
        atoms,
        union,
    })
}

/// f on A, g elsewhere.
pub fn paste(f: &Act, g: &Act, event: &Event) -> Result<Act> {
    if f.time_index != g.time_index {
        return Err(Error::IncompatibleTimes {
            left: f.time_index,
            right: g.time_index,
        });
    }
    Ok(Act::new(
        f.time_index,
        (0..f.len())
            .map(|s| if event.contains(s) { f.values[s] } else { g.values[s] })
            .collect(),
    ))
}
