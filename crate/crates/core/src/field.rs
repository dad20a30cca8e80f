//! Stochastic dynamic utility fields: one curve per (time, atom).

use crate::curve::MonotoneCurve;
use crate::error::{Error, Result};
use crate::space::{Act, Event, FilteredSpace, ProbabilityMeasure};

/// u(t_i, x, ω). Curves are stored per state so that deliberately
/// non-adapted fields can be built for fault injection; [`UtilityField::new`]
/// only accepts one curve per atom.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityField {
    space: FilteredSpace,
    curves: Vec<Vec<MonotoneCurve>>,
}

/// Right, left and two-sided discontinuity sets of an act.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscontinuitySets {
    pub right: Event,
    pub left: Event,
    pub any: Event,
}

/// Outcome of the star-continuity check at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct StarContinuity {
    pub continuous: bool,
    /// An act whose discontinuity set has positive probability.
    pub witness: Option<Act>,
    /// The atom carrying the witnessing jump.
    pub atom: Option<usize>,
}

impl UtilityField {
    /// `per_atom[i][a]` is the curve on atom `a` of time `i`.
    pub fn new(space: &FilteredSpace, per_atom: Vec<Vec<MonotoneCurve>>) -> Result<Self> {
        if per_atom.len() != space.n_times() {
            return Err(Error::InvalidField(format!(
                "{} curve layers for {} times",
                per_atom.len(),
                space.n_times()
            )));
        }
        let mut curves = Vec::with_capacity(per_atom.len());
        for (i, layer) in per_atom.into_iter().enumerate() {
            if layer.len() != space.n_atoms(i) {
                return Err(Error::InvalidField(format!(
                    "{} curves for {} atoms at time index {i}",
                    layer.len(),
                    space.n_atoms(i)
                )));
            }
            curves.push(
                (0..space.n_states())
                    .map(|s| layer[space.atom_of(i, s)].clone())
                    .collect(),
            );
        }
        Ok(Self {
            space: space.clone(),
            curves,
        })
    }

    /// The same curve at every time and state.
    pub fn uniform(space: &FilteredSpace, curve: MonotoneCurve) -> Self {
        Self {
            space: space.clone(),
            curves: vec![vec![curve; space.n_states()]; space.n_times()],
        }
    }

    /// Builds a field from one curve per state and time without checking
    /// that curves are constant on atoms.
    pub fn from_state_curves(space: &FilteredSpace, curves: Vec<Vec<MonotoneCurve>>) -> Result<Self> {
        if curves.len() != space.n_times()
            || curves.iter().any(|layer| layer.len() != space.n_states())
        {
            return Err(Error::InvalidField(
                "need one curve per time and state".into(),
            ));
        }
        Ok(Self {
            space: space.clone(),
            curves,
        })
    }

    pub fn space(&self) -> &FilteredSpace {
        &self.space
    }

    pub fn curve(&self, i: usize, s: usize) -> &MonotoneCurve {
        &self.curves[i][s]
    }

    /// Curve on atom `a` of time `i`, read at the atom's first state.
    pub fn atom_curve(&self, i: usize, a: usize) -> &MonotoneCurve {
        &self.curves[i][self.space.atom(i, a)[0]]
    }

    /// Per-atom curves at time `i`.
    pub fn layer(&self, i: usize) -> Vec<MonotoneCurve> {
        (0..self.space.n_atoms(i))
            .map(|a| self.atom_curve(i, a).clone())
            .collect()
    }

    /// Whether each curve is shared by all states of its atom.
    pub fn is_adapted(&self) -> bool {
        (0..self.space.n_times()).all(|i| {
            self.space.partition(i).iter().all(|atom| {
                atom.iter()
                    .all(|&s| self.curves[i][s] == self.curves[i][atom[0]])
            })
        })
    }

    /// Replaces every curve by `f(i, state, curve)`.
    pub fn map_curves(
        &self,
        f: impl Fn(usize, usize, &MonotoneCurve) -> Result<MonotoneCurve>,
    ) -> Result<Self> {
        let curves = self
            .curves
            .iter()
            .enumerate()
            .map(|(i, layer)| {
                layer
                    .iter()
                    .enumerate()
                    .map(|(s, c)| f(i, s, c))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            space: self.space.clone(),
            curves,
        })
    }

    fn check_act(&self, j: usize, f: &Act) -> Result<()> {
        self.space.check_time(j)?;
        if f.time_index > j || f.len() != self.space.n_states() {
            return Err(Error::NotMeasurable {
                time_index: j,
                detail: format!("act is tagged with time index {}", f.time_index),
            });
        }
        Ok(())
    }

    /// u(t_j, f(ω), ω) for an act known at time `j`.
    pub fn eval(&self, j: usize, f: &Act) -> Result<Act> {
        self.check_act(j, f)?;
        Ok(Act::new(
            j,
            f.values
                .iter()
                .enumerate()
                .map(|(s, &x)| self.curves[j][s].eval(x))
                .collect(),
        ))
    }

    /// The states where f(ω) sits on a right, left, or any discontinuity of
    /// the curve at (t_j, ω).
    pub fn discontinuity_sets(&self, j: usize, f: &Act) -> Result<DiscontinuitySets> {
        self.check_act(j, f)?;
        let mut right = Vec::new();
        let mut left = Vec::new();
        for (s, &x) in f.values.iter().enumerate() {
            let c = &self.curves[j][s];
            if c.jump_points().contains(&x) {
                if c.is_right_discontinuous(x) {
                    right.push(s);
                }
                if c.is_left_discontinuous(x) {
                    left.push(s);
                }
            }
        }
        let right = Event::at(j, right);
        let left = Event::at(j, left);
        let any = right.union(&left);
        Ok(DiscontinuitySets { right, left, any })
    }

    /// On a finite space an act can sit on any jump, so the field is
    /// star-continuous at `j` exactly when no positive-probability atom
    /// carries a jump. The witness places f on the first offending jump.
    pub fn is_star_continuous(&self, measure: &ProbabilityMeasure, j: usize) -> Result<StarContinuity> {
        self.space.check_time(j)?;
        for (a, atom) in self.space.partition(j).iter().enumerate() {
            if measure.atom_prob(&self.space, j, a) == 0.0 {
                continue;
            }
            for &s in atom {
                if measure.weight(s) == 0.0 {
                    continue;
                }
                if let Some(&c) = self.curves[j][s].jump_points().first() {
                    let mut values = vec![0.0; self.space.n_states()];
                    for &t in atom {
                        values[t] = c;
                    }
                    return Ok(StarContinuity {
                        continuous: false,
                        witness: Some(Act::new(j, values)),
                        atom: Some(a),
                    });
                }
            }
        }
        Ok(StarContinuity {
            continuous: true,
            witness: None,
            atom: None,
        })
    }
}
