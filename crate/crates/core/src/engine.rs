//! Representations (P, u): conditional certainty equivalents, preference
//! verdicts, the semigroup identity and the discount/numeraire transforms.

use std::fmt;

use crate::curve::MonotoneCurve;
use crate::error::{Error, Result};
use crate::field::UtilityField;
use crate::space::{conditional_expectation, Act, Event, FilteredSpace, ProbabilityMeasure};

/// A probability on the final partition together with a stochastic dynamic
/// utility whose time-0 curve is `u0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Representation {
    space: FilteredSpace,
    measure: ProbabilityMeasure,
    field: UtilityField,
    u0: MonotoneCurve,
}

/// Atoms at one time split by the sign of the utility gap: `equal` where
/// |d| is within the band, `above` where g is strictly preferred and `below`
/// where f is. Zero-probability atoms belong to none of the three.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriPartition {
    pub time_index: usize,
    pub equal: Event,
    pub above: Event,
    pub below: Event,
}

impl TriPartition {
    pub fn covered(&self) -> Event {
        self.equal.union(&self.above).union(&self.below)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Succeq(TriPartition),
    Preceq(TriPartition),
    Equiv(TriPartition),
    Mixed(TriPartition),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VerdictTag {
    Succeq,
    Preceq,
    Equiv,
    Mixed,
}

impl fmt::Display for VerdictTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerdictTag::Succeq => "SUCCEQ",
            VerdictTag::Preceq => "PRECEQ",
            VerdictTag::Equiv => "EQUIV",
            VerdictTag::Mixed => "MIXED",
        })
    }
}

impl Verdict {
    fn from_partition(p: TriPartition) -> Self {
        match (p.above.is_empty(), p.below.is_empty()) {
            (true, true) => Verdict::Equiv(p),
            (false, true) => Verdict::Succeq(p),
            (true, false) => Verdict::Preceq(p),
            (false, false) => Verdict::Mixed(p),
        }
    }

    pub fn tag(&self) -> VerdictTag {
        match self {
            Verdict::Succeq(_) => VerdictTag::Succeq,
            Verdict::Preceq(_) => VerdictTag::Preceq,
            Verdict::Equiv(_) => VerdictTag::Equiv,
            Verdict::Mixed(_) => VerdictTag::Mixed,
        }
    }

    pub fn partition(&self) -> &TriPartition {
        match self {
            Verdict::Succeq(p) | Verdict::Preceq(p) | Verdict::Equiv(p) | Verdict::Mixed(p) => p,
        }
    }

    /// g ≽ f almost surely.
    pub fn holds_succeq(&self) -> bool {
        matches!(self, Verdict::Succeq(_) | Verdict::Equiv(_))
    }

    /// g ≼ f almost surely.
    pub fn holds_preceq(&self) -> bool {
        matches!(self, Verdict::Preceq(_) | Verdict::Equiv(_))
    }
}

/// Half-width of the equivalence band around a utility level.
pub fn band(tol: f64, level: f64) -> f64 {
    tol * level.abs().max(1.0)
}

/// Outcome of the discount-factor verification.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountCheck {
    /// β at every time index.
    pub beta: Vec<Act>,
    pub pairs_checked: usize,
    pub flips: usize,
}

impl DiscountCheck {
    pub fn holds(&self) -> bool {
        self.flips == 0
    }
}

/// A comparison task: g known at `s` against f known at `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub s: usize,
    pub t: usize,
    pub g: Act,
    pub f: Act,
}

impl Representation {
    /// Validates that the time-0 curve is `u0`, that `u0` is continuous, that
    /// curves are constant on atoms and that the field is star-continuous.
    pub fn new(
        space: FilteredSpace,
        measure: ProbabilityMeasure,
        field: UtilityField,
        u0: MonotoneCurve,
    ) -> Result<Self> {
        let rep = Self::new_unchecked(space, measure, field, u0)?;
        if !rep.u0.is_continuous() {
            return Err(Error::InvalidField("the initial utility must be continuous".into()));
        }
        if rep.field.atom_curve(0, 0) != &rep.u0 {
            return Err(Error::InvalidField(
                "the time-0 curve differs from the initial utility".into(),
            ));
        }
        if !rep.field.is_adapted() {
            return Err(Error::InvalidField(
                "curves are not constant on atoms".into(),
            ));
        }
        for i in 0..rep.space.n_times() {
            let star = rep.field.is_star_continuous(&rep.measure, i)?;
            if let Some(a) = star.atom {
                return Err(Error::InvalidField(format!(
                    "not star-continuous: atom {} at time index {i} carries a jump",
                    Event::from_atoms(&rep.space, i, &[a]).names(&rep.space)
                )));
            }
        }
        Ok(rep)
    }

    /// Only checks that the pieces fit together dimensionally; used to build
    /// deliberately broken representations.
    pub fn new_unchecked(
        space: FilteredSpace,
        measure: ProbabilityMeasure,
        field: UtilityField,
        u0: MonotoneCurve,
    ) -> Result<Self> {
        if measure.len() != space.n_states() {
            return Err(Error::InvalidMeasure(format!(
                "{} weights for {} states",
                measure.len(),
                space.n_states()
            )));
        }
        if field.space() != &space {
            return Err(Error::InvalidField("field lives on a different space".into()));
        }
        Ok(Self {
            space,
            measure,
            field,
            u0,
        })
    }

    pub fn space(&self) -> &FilteredSpace {
        &self.space
    }

    pub fn measure(&self) -> &ProbabilityMeasure {
        &self.measure
    }

    pub fn field(&self) -> &UtilityField {
        &self.field
    }

    pub fn u0(&self) -> &MonotoneCurve {
        &self.u0
    }

    fn check_times(&self, s: usize, t: usize) -> Result<()> {
        self.space.check_time(s)?;
        self.space.check_time(t)?;
        if s >= t {
            return Err(Error::IncompatibleTimes { left: s, right: t });
        }
        Ok(())
    }

    fn check_known(&self, i: usize, act: &Act) -> Result<()> {
        if act.time_index > i || !self.space.is_measurable_act(act.time_index, act) {
            return Err(Error::NotMeasurable {
                time_index: i,
                detail: format!("act tagged with time index {}", act.time_index),
            });
        }
        Ok(())
    }

    /// E_P[u(t, f) | F_s].
    pub fn expected_utility(&self, s: usize, t: usize, f: &Act) -> Result<Act> {
        self.check_times(s, t)?;
        self.check_known(t, f)?;
        let utility = self.field.eval(t, f)?;
        conditional_expectation(&self.space, &self.measure, &utility, s)
    }

    /// V_{i+1}(f) = E_P[u_{i+1}(f) | F_{t_i}].
    pub fn v_functional(&self, i: usize, f: &Act) -> Result<Act> {
        self.expected_utility(i, i + 1, f)
    }

    /// C_{s,t}(f) = u_s^{-1}(E_P[u_t(f) | F_s]) atom by atom; 0 on null atoms.
    pub fn cce(&self, s: usize, t: usize, f: &Act, tol: f64) -> Result<Act> {
        let target = self.expected_utility(s, t, f)?;
        let mut values = vec![0.0; self.space.n_states()];
        for (a, atom) in self.space.partition(s).iter().enumerate() {
            if self.measure.atom_prob(&self.space, s, a) == 0.0 {
                continue;
            }
            let y = target.values[atom[0]];
            let x = self.field.atom_curve(s, a).invert(y, band(tol, y))?.x;
            for &st in atom {
                values[st] = x;
            }
        }
        Ok(Act::new(s, values))
    }

    /// d = u(s, g) − E_P[u(t, f) | F_s], read at each state.
    pub fn utility_gap(&self, s: usize, t: usize, g: &Act, f: &Act) -> Result<Act> {
        self.check_known(s, g)?;
        let expected = self.expected_utility(s, t, f)?;
        let ug = self.field.eval(s, g)?;
        Ok(ug.sub(&expected).at_time(s))
    }

    /// Classifies each positive-probability atom at `s` by the sign of the
    /// utility gap, with ties inside `band(tol, E[u(t, f) | F_s])`.
    pub fn compare(&self, s: usize, t: usize, g: &Act, f: &Act, tol: f64) -> Result<Verdict> {
        self.check_known(s, g)?;
        let expected = self.expected_utility(s, t, f)?;
        let ug = self.field.eval(s, g)?;
        Ok(Verdict::from_partition(self.classify(
            s,
            |st| ug.values[st] - expected.values[st],
            |st| band(tol, expected.values[st]),
        )))
    }

    fn classify(
        &self,
        s: usize,
        gap: impl Fn(usize) -> f64,
        width: impl Fn(usize) -> f64,
    ) -> TriPartition {
        let (mut equal, mut above, mut below) = (Vec::new(), Vec::new(), Vec::new());
        for (a, atom) in self.space.partition(s).iter().enumerate() {
            if self.measure.atom_prob(&self.space, s, a) == 0.0 {
                continue;
            }
            let rep = atom[0];
            let d = gap(rep);
            let w = width(rep);
            let bucket = if d.abs() <= w {
                &mut equal
            } else if d > 0.0 {
                &mut above
            } else {
                &mut below
            };
            bucket.extend_from_slice(atom);
        }
        TriPartition {
            time_index: s,
            equal: Event::at(s, equal),
            above: Event::at(s, above),
            below: Event::at(s, below),
        }
    }

    /// sup over positive-probability states of |C_{s,v}(f) − C_{s,t}(C_{t,v}(f))|.
    pub fn semigroup_residual(&self, s: usize, t: usize, v: usize, f: &Act, tol: f64) -> Result<f64> {
        self.check_times(s, t)?;
        self.check_times(t, v)?;
        let direct = self.cce(s, v, f, tol)?;
        let inner = self.cce(t, v, f, tol)?;
        let nested = self.cce(s, t, &inner, tol)?;
        Ok(direct.sup_distance_on(&nested, |st| self.measure.weight(st) > 0.0))
    }

    /// If g ≽_{s,v} f (resp. ≼) then g ≽_{s,t} h (resp. ≼) for h = C_{t,v}(f).
    pub fn time_consistency_check(
        &self,
        s: usize,
        t: usize,
        v: usize,
        g: &Act,
        f: &Act,
        tol: f64,
    ) -> Result<bool> {
        self.check_times(s, t)?;
        self.check_times(t, v)?;
        let outer = self.compare(s, v, g, f, tol)?;
        if matches!(outer, Verdict::Mixed(_)) {
            return Err(Error::Precondition(
                "g and f are not comparable on the whole space".into(),
            ));
        }
        let h = self.cce(t, v, f, tol)?;
        let inner = self.compare(s, t, g, &h, tol)?;
        Ok((!outer.holds_succeq() || inner.holds_succeq())
            && (!outer.holds_preceq() || inner.holds_preceq()))
    }

    /// β_t = E_{P*}[dP/dP* | F_t] = P(G)/P*(G) on each atom G at t.
    pub fn discount_factors(&self, other: &ProbabilityMeasure) -> Result<Vec<Act>> {
        self.check_equivalent(other)?;
        Ok((0..self.space.n_times())
            .map(|i| {
                let mut values = vec![1.0; self.space.n_states()];
                for (a, atom) in self.space.partition(i).iter().enumerate() {
                    let q = other.atom_prob(&self.space, i, a);
                    if q > 0.0 {
                        let ratio = self.measure.atom_prob(&self.space, i, a) / q;
                        for &st in atom {
                            values[st] = ratio;
                        }
                    }
                }
                Act::new(i, values)
            })
            .collect())
    }

    fn check_equivalent(&self, other: &ProbabilityMeasure) -> Result<()> {
        if other.len() != self.measure.len() {
            return Err(Error::InvalidMeasure("measures on different state sets".into()));
        }
        if let Some(s) = self.measure.equivalence_witness(other) {
            return Err(Error::NotEquivalent {
                state: self.space.state_name(s).to_string(),
            });
        }
        Ok(())
    }

    /// Checks that g ≽ f under (P, u) exactly when
    /// β_s u(s, g) ≥ E_{P*}[β_t u(t, f) | F_s], pair by pair, comparing the
    /// tri-partitions of both formulations.
    pub fn discount_transform(
        &self,
        other: &ProbabilityMeasure,
        pairs: &[Pair],
        tol: f64,
    ) -> Result<DiscountCheck> {
        let beta = self.discount_factors(other)?;
        let mut flips = 0;
        for p in pairs {
            let original = self.compare(p.s, p.t, &p.g, &p.f, tol)?;
            let ug = self.field.eval(p.s, &p.g)?;
            let uf = self.field.eval(p.t, &p.f)?;
            let weighted = uf.zip_with(&beta[p.t], |u, b| u * b).at_time(p.t);
            let rhs = conditional_expectation(&self.space, other, &weighted, p.s)?;
            let bs = &beta[p.s];
            let transformed = Verdict::from_partition(self.classify(
                p.s,
                |st| bs.values[st] * ug.values[st] - rhs.values[st],
                |st| tol * bs.values[st].max(rhs.values[st].abs()),
            ));
            if transformed != original {
                flips += 1;
            }
        }
        Ok(DiscountCheck {
            beta,
            pairs_checked: pairs.len(),
            flips,
        })
    }

    /// (P*, δ·u) with δ_i = dP/dP* on F_{t_i}: the representation the
    /// relative-uniqueness clause declares equivalent to this one.
    pub fn rescaled(&self, other: &ProbabilityMeasure) -> Result<Representation> {
        let beta = self.discount_factors(other)?;
        let field = self.field.map_curves(|i, s, c| {
            if i == 0 {
                Ok(c.clone())
            } else {
                c.scaled(1.0, beta[i].values[s])
            }
        })?;
        Representation::new_unchecked(self.space.clone(), other.clone(), field, self.u0.clone())
    }

    /// u*(t, x, ω) = u(t, x·B_t(ω), ω) for a strictly positive numeraire.
    pub fn numeraire_transform(&self, numeraire: &[Act]) -> Result<Representation> {
        if numeraire.len() != self.space.n_times() {
            return Err(Error::Precondition(format!(
                "numeraire has {} acts for {} times",
                numeraire.len(),
                self.space.n_times()
            )));
        }
        for (i, b) in numeraire.iter().enumerate() {
            if b.time_index > i || !self.space.is_measurable_act(b.time_index, b) {
                return Err(Error::NotMeasurable {
                    time_index: i,
                    detail: "numeraire is not known at its own time".into(),
                });
            }
            if let Some(v) = b.values.iter().find(|v| !(**v > 0.0)) {
                return Err(Error::Precondition(format!(
                    "numeraire value {v} at time index {i} is not positive"
                )));
            }
        }
        let field = self
            .field
            .map_curves(|i, s, c| c.scaled(numeraire[i].values[s], 1.0))?;
        let u0 = self.u0.scaled(numeraire[0].values[0], 1.0)?;
        Representation::new_unchecked(self.space.clone(), self.measure.clone(), field, u0)
    }

    /// Replaces the measure without touching the field.
    pub fn with_measure(&self, measure: ProbabilityMeasure) -> Result<Representation> {
        Representation::new_unchecked(self.space.clone(), measure, self.field.clone(), self.u0.clone())
    }
}

/// Counts pairs whose verdict changes between `rep` on (g, f) and `star` on
/// (g/B_s, f/B_t).
pub fn numeraire_flips(
    rep: &Representation,
    star: &Representation,
    numeraire: &[Act],
    pairs: &[Pair],
    tol: f64,
) -> Result<usize> {
    let mut flips = 0;
    for p in pairs {
        let g = p.g.zip_with(&numeraire[p.s], |x, b| x / b).at_time(p.g.time_index);
        let f = p.f.zip_with(&numeraire[p.t], |x, b| x / b).at_time(p.t);
        let before = rep.compare(p.s, p.t, &p.g, &p.f, tol)?;
        let after = star.compare(p.s, p.t, &g, &f, tol)?;
        if before != after {
            flips += 1;
        }
    }
    Ok(flips)
}
