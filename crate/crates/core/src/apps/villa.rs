//! Cash today against a villa delivered at t2, with an election at t1 that
//! may trigger a default (event A) and a second default D at t2.

use std::fmt::Write as _;

use num_rational::Ratio;

use crate::engine::{Verdict, VerdictTag};
use crate::error::{Error, Result};
use crate::scenario::Scenario;

pub const VILLA_SCENARIO: &str = include_str!("../../scenarios/villa.sdu");

/// The two readings of the example's parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VillaVariant {
    /// Weights that reproduce the displayed arithmetic: P(A) = 1/100,
    /// P(A^c ∩ D) = 10⁻⁶ and a t1 utility of (10/11)·x on A^c, so that
    /// P(A^c)·(10/11) = 0.9 and the t1 value is exactly 10⁶.
    PaperArithmetic,
    /// The stated parameters: P(A) = 1/100, P(D | A^c) = 10⁻⁶ and u(x) = x
    /// on A^c, giving 1,099,900 at t1.
    PaperStated,
}

impl VillaVariant {
    pub fn name(self) -> &'static str {
        match self {
            VillaVariant::PaperArithmetic => "paper-arithmetic",
            VillaVariant::PaperStated => "paper-stated",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "paper-arithmetic" => Ok(VillaVariant::PaperArithmetic),
            "paper-stated" => Ok(VillaVariant::PaperStated),
            other => Err(Error::Scenario(format!(
                "unknown villa variant `{other}`; expected paper-arithmetic or paper-stated"
            ))),
        }
    }
}

type Q = Ratio<i128>;

fn q(n: i128, d: i128) -> Q {
    Ratio::new(n, d)
}

/// Expected utilities computed in exact rational arithmetic.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactValues {
    /// E[u(t1, villa at t1)].
    pub t1: Q,
    /// E[u(t2, villa at t2)].
    pub t2: Q,
}

pub fn exact_values(variant: VillaVariant) -> ExactValues {
    let p_a = q(1, 100);
    let (p_ad, slope) = match variant {
        VillaVariant::PaperArithmetic => (q(1, 1_000_000), q(10, 11)),
        VillaVariant::PaperStated => (q(99, 100) * q(1, 1_000_000), q(1, 1)),
    };
    let half = q(1, 2);
    let t1 = p_a * half * q(200_000, 1) + (q(1, 1) - p_a) * slope * q(1_110_000, 1);
    let t2 = (q(1, 1) - p_a - p_ad) * q(1_800_000, 1) + half * q(200_000, 1) * (p_a + p_ad);
    ExactValues { t1, t2 }
}

/// 1.8·10⁶·(1 − 10⁻² − 10⁻⁶) + ½·2·10⁵·(10⁻² + 10⁻⁶).
pub fn displayed_t2_payoff() -> f64 {
    1.8e6 * (1.0 - 1e-2 - 1e-6) + 0.5 * 2e5 * (1e-2 + 1e-6)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VillaReport {
    pub variant: VillaVariant,
    pub exact: ExactValues,
    /// E[u(t2, villa)] through the engine.
    pub t2_expected: f64,
    /// E[u(t1, villa at t1)] through the engine.
    pub t1_expected: f64,
    /// C_{0,1}(villa at t1).
    pub t1_cce: f64,
    pub cash_vs_t2: Verdict,
    pub cash_vs_t1: Verdict,
    /// Cash held at t1 against the villa at t2, branch by branch.
    pub branch: Verdict,
    pub text: String,
}

fn ratio_text(r: &Q) -> String {
    if r.is_integer() {
        r.to_integer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn run_villa(variant: VillaVariant, tol: f64) -> Result<VillaReport> {
    let scenario = Scenario::parse(VILLA_SCENARIO)?;
    let rep = scenario.representation(Some(variant.name()))?;
    let space = rep.space();
    let cash = scenario.act("cash")?;
    let cash_t1 = scenario.act("cash_t1")?;
    let villa_t1 = scenario.act("villa_t1")?;
    let villa_t2 = scenario.act("villa_t2")?;

    let t2_expected = rep.expected_utility(0, 2, villa_t2)?.values[0];
    let t1_expected = rep.expected_utility(0, 1, villa_t1)?.values[0];
    let t1_cce = rep.cce(0, 1, villa_t1, tol)?.values[0];
    let cash_vs_t2 = rep.compare(0, 2, cash, villa_t2, tol)?;
    let cash_vs_t1 = rep.compare(0, 1, cash, villa_t1, tol)?;
    let branch = rep.compare(1, 2, cash_t1, villa_t2, tol)?;
    let exact = exact_values(variant);

    let a = space.state_index("A").expect("villa states");
    let on_a = if branch.partition().above.contains(a) {
        "cash"
    } else if branch.partition().below.contains(a) {
        "villa"
    } else {
        "either"
    };
    let ac = space.state_index("AcDc").expect("villa states");
    let on_ac = if branch.partition().above.contains(ac) {
        "cash"
    } else if branch.partition().below.contains(ac) {
        "villa"
    } else {
        "either"
    };

    let mut t = String::new();
    let _ = writeln!(t, "villa example, variant {}", variant.name());
    let _ = writeln!(t, "t0 against t2");
    let _ = writeln!(t, "  u0(cash) = {}", rep.u0().eval(cash.values[0]));
    let _ = writeln!(t, "  E[u(t2, villa)] = {t2_expected}");
    let _ = writeln!(
        t,
        "  displayed payoff 1.8e6*(1-1e-2-1e-6) + 0.5*2e5*(1e-2+1e-6) = {}",
        displayed_t2_payoff()
    );
    let _ = writeln!(t, "  exact = {}", ratio_text(&exact.t2));
    let _ = writeln!(t, "  verdict cash vs villa: {}", cash_vs_t2.tag());
    let _ = writeln!(t, "t0 against t1");
    let _ = writeln!(t, "  E[u(t1, villa)] = {t1_expected}");
    let _ = writeln!(t, "  exact = {}", ratio_text(&exact.t1));
    let _ = writeln!(t, "  certainty equivalent = {t1_cce}");
    let _ = writeln!(t, "  verdict cash vs villa: {}", cash_vs_t1.tag());
    let _ = writeln!(t, "t1 against t2, by branch");
    let _ = writeln!(t, "  on A: {on_a} preferred");
    let _ = writeln!(t, "  on A^c: {on_ac} preferred");
    let _ = writeln!(t, "  verdict: {}", branch.tag());
    let policy = if branch.tag() == VerdictTag::Mixed && cash_vs_t1.tag() != VerdictTag::Succeq {
        format!("wait until t1, then take the {on_a} on A and the {on_ac} on A^c")
    } else if cash_vs_t2.tag() == VerdictTag::Succeq {
        "take the cash today".to_string()
    } else {
        "wait for the villa".to_string()
    };
    let _ = writeln!(t, "policy: {policy}");

    Ok(VillaReport {
        variant,
        exact,
        t2_expected,
        t1_expected,
        t1_cce,
        cash_vs_t2,
        cash_vs_t1,
        branch,
        text: t,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_variant_reaches_one_million_exactly() {
        let e = exact_values(VillaVariant::PaperArithmetic);
        assert_eq!(e.t1, q(1_000_000, 1));
        assert_eq!(e.t2, q(17_829_983, 10));
        let s = exact_values(VillaVariant::PaperStated);
        assert_eq!(s.t1, q(1_099_900, 1));
    }

    #[test]
    fn narrative_verdicts() {
        let r = run_villa(VillaVariant::PaperArithmetic, 1e-9).unwrap();
        assert_eq!(r.cash_vs_t2.tag(), VerdictTag::Preceq);
        assert_eq!(r.cash_vs_t1.tag(), VerdictTag::Equiv);
        assert_eq!(r.branch.tag(), VerdictTag::Mixed);
        assert!((r.t2_expected - 1_782_998.3).abs() / 1_782_998.3 < 1e-12);
        assert!(r.text.contains("on A: cash preferred"));
        assert!(r.text.contains("on A^c: villa preferred"));
        let s = run_villa(VillaVariant::PaperStated, 1e-9).unwrap();
        assert_eq!(s.cash_vs_t1.tag(), VerdictTag::Preceq);
        assert!((s.t1_expected - 1_099_900.0).abs() < 1e-6);
    }
}
