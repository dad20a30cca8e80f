//! Acceptance suite: one PASS/FAIL line per criterion, with its runtime.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdu_core::apps::{run_dpp, run_villa, Market, VillaVariant, BINOMIAL_SCENARIO};
use sdu_core::apps::villa::{displayed_t2_payoff, exact_values};
use sdu_core::axioms::faults::{faults, FAULT_TIME};
use sdu_core::axioms::{ActGrid, Axiom, AxiomChecker, InducedOracle};
use sdu_core::engine::numeraire_flips;
use sdu_core::random::{
    random_act, random_branching_space, random_equivalent_measure, random_numeraire, random_pairs,
    random_pl_representation, random_representation, random_space,
};
use sdu_core::recovery::{check_relative_uniqueness, recover, tabulate, RecoveryOptions};
use sdu_core::scenario::Scenario;
use sdu_core::space::conditional_expectation;
use sdu_core::{Act, FilteredSpace, MonotoneCurve, ProbabilityMeasure, Representation, UtilityField, VerdictTag};

const TOL: f64 = 1e-9;

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn villa() -> Outcome {
    let exact = exact_values(VillaVariant::PaperArithmetic);
    ensure(exact.t1 == num_rational::Ratio::from_integer(1_000_000), || {
        format!("exact t1 value {} is not 10^6", exact.t1)
    })?;
    let report = run_villa(VillaVariant::PaperArithmetic, TOL).map_err(|e| e.to_string())?;
    let displayed = displayed_t2_payoff();
    let rel = (report.t2_expected - displayed).abs() / displayed;
    ensure(rel <= 1e-6, || format!("t2 payoff {} vs {displayed}", report.t2_expected))?;
    ensure(report.cash_vs_t2.tag() == VerdictTag::Preceq, || "t0 vs t2 is not PRECEQ".into())?;
    let p = report.branch.partition();
    ensure(p.above.names(&sp_villa()) == "{A}", || format!("cash preferred on {}", p.above.names(&sp_villa())))?;
    ensure(p.below.names(&sp_villa()) == "{AcD, AcDc}", || {
        format!("villa preferred on {}", p.below.names(&sp_villa()))
    })?;
    Ok(format!("t1 = 10^6 exactly, t2 rel err {rel:.1e}, cash on A, villa on A^c"))
}

fn sp_villa() -> FilteredSpace {
    Scenario::parse(sdu_core::apps::VILLA_SCENARIO).expect("shipped").space
}

fn semigroup() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    let mut evaluated = 0usize;
    for k in 0..200 {
        let n = rng.gen_range(2..=16);
        let periods = rng.gen_range(3..=4);
        let nulls = if k % 4 == 0 { 1 } else { 0 };
        let space = random_space(&mut rng, n, periods + 1);
        let rep = random_representation(&mut rng, space, nulls);
        let last = rep.space().last();
        for s in 0..last {
            for t in s + 1..last {
                for v in t + 1..=last {
                    for _ in 0..3 {
                        let f = random_act(&mut rng, rep.space(), v, -2.0, 2.0);
                        let r = rep.semigroup_residual(s, t, v, &f, TOL).map_err(|e| format!("rep {k}: {e}"))?;
                        worst = worst.max(r);
                        evaluated += 1;
                    }
                }
            }
        }
    }
    ensure(worst <= 10.0 * TOL, || format!("max residual {worst:e}"))?;
    Ok(format!("200 representations, {evaluated} residuals, max {worst:.1e}"))
}

fn recovery_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let opts = RecoveryOptions::default();
    let xs = opts.grid.values().to_vec();
    let mut worst = 0.0f64;
    let mut mismatches = 0usize;
    for k in 0..50 {
        let first = rng.gen_range(3..=4);
        let space = random_branching_space(&mut rng, first, 3);
        let rep = random_pl_representation(&mut rng, space, &xs);
        let oracle = InducedOracle::new(rep.clone(), 1e-12);
        let recovered = recover(&oracle, rep.u0(), &opts).map_err(|e| format!("rep {k}: {e}"))?;
        let got = recovered.representation;
        let check = check_relative_uniqueness(&rep, &got, &opts.grid, 1e-6).map_err(|e| e.to_string())?;
        ensure(check.passed, || format!("rep {k}: deviation {:e}", check.max_deviation))?;
        worst = worst.max(check.max_deviation);
        for p in random_pairs(&mut rng, &rep, 500, TOL).map_err(|e| e.to_string())? {
            let a = rep.compare(p.s, p.t, &p.g, &p.f, TOL).map_err(|e| e.to_string())?;
            let b = got.compare(p.s, p.t, &p.g, &p.f, TOL).map_err(|e| e.to_string())?;
            if a != b {
                mismatches += 1;
            }
        }
    }
    ensure(mismatches == 0, || format!("{mismatches} verdict mismatches"))?;
    Ok(format!("50 representations, max deviation {worst:.1e}, 25000 verdicts agree"))
}

/// The same representation with one grid value of one curve raised by `bump`.
fn bumped(rep: &Representation, i: usize, state: usize, x: f64, bump: f64, xs: &[f64]) -> Representation {
    let space = rep.space();
    let atom = space.atom_of(i, state);
    let layers: Vec<Vec<MonotoneCurve>> = (0..space.n_times())
        .map(|j| {
            (0..space.n_atoms(j))
                .map(|a| {
                    let c = rep.field().atom_curve(j, a).clone();
                    if j == i && a == atom {
                        let pts = xs
                            .iter()
                            .map(|&v| (v, c.eval(v) + if v == x { bump } else { 0.0 }))
                            .collect();
                        MonotoneCurve::piecewise_linear(pts).expect("still increasing")
                    } else {
                        tabulate(&c, xs).expect("grid contains 0")
                    }
                })
                .collect()
        })
        .collect();
    let field = UtilityField::new(space, layers).expect("shape");
    Representation::new(space.clone(), rep.measure().clone(), field, rep.u0().clone()).expect("valid")
}

fn uniqueness_controls() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let grid = ActGrid::default();
    let xs = grid.values().to_vec();
    let mut worst_positive = 0.0f64;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for k in 0..20 {
        let n = rng.gen_range(3..=8);
        let space = random_space(&mut rng, n, 3);
        let rep = random_pl_representation(&mut rng, space, &xs);
        let star = random_equivalent_measure(&mut rng, rep.measure());
        let rescaled = rep.rescaled(&star).map_err(|e| e.to_string())?;
        let pos = check_relative_uniqueness(&rep, &rescaled, &grid, 1e-9).map_err(|e| e.to_string())?;
        ensure(pos.passed && pos.max_deviation <= 1e-9, || {
            format!("rep {k}: rescaled rejected, deviation {:e}", pos.max_deviation)
        })?;
        worst_positive = worst_positive.max(pos.max_deviation);

        let i = rng.gen_range(1..rep.space().n_times());
        let state = rng.gen_range(0..rep.space().n_states());
        let x = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let perturbed = bumped(&rescaled, i, state, x, 0.01, &xs);
        let neg = check_relative_uniqueness(&rep, &perturbed, &grid, 1e-6).map_err(|e| e.to_string())?;
        ensure(!neg.passed, || format!("rep {k}: bump accepted"))?;
        ensure((0.009..=0.011).contains(&neg.max_deviation), || {
            format!("rep {k}: bump deviation {:e}", neg.max_deviation)
        })?;
        lo = lo.min(neg.max_deviation);
        hi = hi.max(neg.max_deviation);
    }
    Ok(format!(
        "20 rescalings accepted (max {worst_positive:.1e}), 20 bumps rejected with deviation in [{lo:.6}, {hi:.6}]"
    ))
}

fn axiom_fixtures() -> Vec<(String, Representation)> {
    let three = FilteredSpace::from_names(
        &["a", "b", "c"],
        &[0.0, 1.0],
        &[vec![vec!["a", "b", "c"]], vec![vec!["a"], vec!["b"], vec!["c"]]],
    )
    .expect("static");
    let layer = vec![
        MonotoneCurve::exponential(0.5).expect("curve"),
        MonotoneCurve::linear(2.0).expect("curve"),
        MonotoneCurve::identity(),
    ];
    let three_field = UtilityField::new(&three, vec![vec![MonotoneCurve::identity()], layer]).expect("field");
    let mut out = Vec::new();
    for w in [vec![0.2, 0.3, 0.5], vec![0.4, 0.0, 0.6]] {
        let label = format!("three states {w:?}");
        let rep = Representation::new(
            three.clone(),
            ProbabilityMeasure::new(w).expect("measure"),
            three_field.clone(),
            MonotoneCurve::identity(),
        )
        .expect("rep");
        out.push((label, rep));
    }

    let tree = FilteredSpace::from_names(
        &["a", "b", "c", "d"],
        &[0.0, 1.0, 2.0],
        &[
            vec![vec!["a", "b", "c", "d"]],
            vec![vec!["a", "b"], vec!["c", "d"]],
            vec![vec!["a"], vec!["b"], vec!["c"], vec!["d"]],
        ],
    )
    .expect("static");
    let pl = MonotoneCurve::piecewise_linear(vec![(-1.0, -2.0), (0.0, 0.0), (1.0, 0.5)]).expect("curve");
    let field = UtilityField::new(
        &tree,
        vec![
            vec![MonotoneCurve::identity()],
            vec![MonotoneCurve::power(3.0).expect("curve"), MonotoneCurve::linear(1.5).expect("curve")],
            vec![
                pl,
                MonotoneCurve::identity(),
                MonotoneCurve::power(3.0).expect("curve"),
                MonotoneCurve::exponential(-0.5).expect("curve"),
            ],
        ],
    )
    .expect("field");
    let rep = Representation::new(
        tree,
        ProbabilityMeasure::new(vec![0.1, 0.2, 0.3, 0.4]).expect("measure"),
        field,
        MonotoneCurve::identity(),
    )
    .expect("rep");
    out.push(("two-period tree".into(), rep));

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let xs = ActGrid::default().values().to_vec();
    let space = random_branching_space(&mut rng, 2, 2);
    out.push(("random piecewise-linear tree".into(), random_pl_representation(&mut rng, space, &xs)));
    out
}

fn axiom_suite() -> Outcome {
    let mut checks = 0usize;
    for (label, rep) in axiom_fixtures() {
        let last = rep.space().last();
        let oracle = InducedOracle::new(rep, 1e-12);
        let checker = AxiomChecker::new(&oracle, ActGrid::default());
        for i in 0..last {
            for report in checker.check_all(i, 11) {
                ensure(report.passed() && !report.truncated, || format!("{label}:\n{}", report.render()))?;
                checks += 1;
            }
        }
    }
    let mut fault_lines = Vec::new();
    for fault in faults() {
        let checker = AxiomChecker::new(fault.oracle.as_ref(), ActGrid::default());
        let failed: Vec<Axiom> = checker
            .check_all(FAULT_TIME, 11)
            .into_iter()
            .filter(|r| !r.passed())
            .map(|r| r.axiom)
            .collect();
        ensure(failed == vec![fault.target], || {
            format!("fault `{}` failed {:?}, expected only {}", fault.name, failed, fault.target)
        })?;
        fault_lines.push(format!("{}->{}", fault.name, fault.target));
    }
    Ok(format!("{checks} axiom reports pass; faults: {}", fault_lines.join(", ")))
}

/// E[g | F_s] atom by atom, straight from the weights.
fn atom_mean(space: &FilteredSpace, measure: &ProbabilityMeasure, s: usize, a: usize, g: impl Fn(usize) -> f64) -> Option<f64> {
    let atom = space.atom(s, a);
    let mass: f64 = atom.iter().map(|&st| measure.weight(st)).sum();
    if mass == 0.0 {
        return None;
    }
    Some(atom.iter().map(|&st| measure.weight(st) * g(st)).sum::<f64>() / mass)
}

fn closed_form() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let n = rng.gen_range(2..=12);
        let space = random_space(&mut rng, n, 3);
        let measure = sdu_core::random::random_measure(&mut rng, space.n_states(), k % 3);
        let exp = MonotoneCurve::exponential(1.0).expect("curve");
        let rep = Representation::new(
            space.clone(),
            measure.clone(),
            UtilityField::uniform(&space, exp.clone()),
            exp,
        )
        .map_err(|e| e.to_string())?;
        let ident = Representation::new(
            space.clone(),
            measure.clone(),
            UtilityField::uniform(&space, MonotoneCurve::identity()),
            MonotoneCurve::identity(),
        )
        .map_err(|e| e.to_string())?;
        let t = rng.gen_range(1..=space.last());
        let s = rng.gen_range(0..t);
        let f = random_act(&mut rng, &space, t, -2.0, 2.0);
        let cce = rep.cce(s, t, &f, 1e-15).map_err(|e| e.to_string())?;
        let mean = ident.cce(s, t, &f, TOL).map_err(|e| e.to_string())?;
        let library_mean = conditional_expectation(&space, &measure, &f.at_time(t), s).map_err(|e| e.to_string())?;
        ensure(mean.values == library_mean.values, || format!("act {k}: identity CCE {mean} vs E {library_mean}"))?;
        for a in 0..space.n_atoms(s) {
            let st = space.atom(s, a)[0];
            if let Some(m) = atom_mean(&space, &measure, s, a, |x| (-f.values[x]).exp()) {
                let expected = -m.ln();
                let err = (cce.values[st] - expected).abs();
                worst = worst.max(err);
                ensure(err <= 1e-10, || format!("act {k}: {} vs {expected}", cce.values[st]))?;
                let e = atom_mean(&space, &measure, s, a, |x| f.values[x]).expect("positive atom");
                ensure((mean.values[st] - e).abs() <= 1e-15 * e.abs().max(1.0), || {
                    format!("act {k}: identity CCE {} vs direct mean {e}", mean.values[st])
                })?;
            }
        }
    }
    Ok(format!("100 acts, max exponential error {worst:.1e}, identity CCE equals E[f|F_s] bit for bit"))
}

fn star_continuity() -> Outcome {
    let space = FilteredSpace::from_names(
        &["a", "b", "c", "d"],
        &[0.0, 1.0],
        &[vec![vec!["a", "b", "c", "d"]], vec![vec!["a", "b"], vec!["c"], vec!["d"]]],
    )
    .expect("static");
    let measure = ProbabilityMeasure::new(vec![0.25, 0.25, 0.5, 0.0]).expect("measure");
    let id = MonotoneCurve::identity();
    let field_with = |atom: usize, theta: f64| {
        let mut layer = vec![id.clone(), MonotoneCurve::exponential(0.7).expect("curve"), id.clone()];
        layer[atom] = layer[atom].clone().with_jump(0.5, 1.0, theta).expect("jump");
        UtilityField::new(&space, vec![vec![id.clone()], layer]).expect("field")
    };
    let mut flagged = 0;
    for (atom, theta) in [(0, 0.0), (0, 1.0), (1, 0.5), (1, 1.0)] {
        let field = field_with(atom, theta);
        let verdict = field.is_star_continuous(&measure, 1).map_err(|e| e.to_string())?;
        ensure(!verdict.continuous, || format!("jump on atom {atom} not flagged"))?;
        let witness = verdict.witness.ok_or("no witness act")?;
        // D_f rebuilt from the curve limits
        let hit: f64 = (0..space.n_states())
            .filter(|&s| {
                let c = field.curve(1, s);
                let x = witness.values[s];
                let (left, right) = c.limits(x);
                left != right || c.eval(x) != left || c.eval(x) != right
            })
            .map(|s| measure.weight(s))
            .sum();
        ensure(hit > 0.0, || format!("witness {witness} hits a null set"))?;
        flagged += 1;
    }
    let null_jump = field_with(2, 1.0);
    let v = null_jump.is_star_continuous(&measure, 1).map_err(|e| e.to_string())?;
    ensure(v.continuous, || "jump on a null atom was flagged".into())?;
    let smooth = UtilityField::uniform(&space, MonotoneCurve::exponential(1.0).expect("curve"));
    for j in 0..2 {
        ensure(smooth.is_star_continuous(&measure, j).map_err(|e| e.to_string())?.continuous, || {
            "continuous field flagged".into()
        })?;
    }
    Ok(format!("{flagged} jumps flagged with positive-probability witnesses; null-atom jump and continuous field pass"))
}

fn dpp() -> Outcome {
    let scenario = Scenario::parse(BINOMIAL_SCENARIO).map_err(|e| e.to_string())?;
    let mut lines = Vec::new();
    for variant in scenario.variants.clone() {
        let market = Market::from_scenario(&scenario, Some(&variant)).map_err(|e| e.to_string())?;
        let report = run_dpp(&market, TOL).map_err(|e| e.to_string())?;
        ensure(report.dominated, || format!("{variant}: margin {:e}", report.min_margin))?;
        ensure(report.optimal_gap <= 1e-9 * report.enumerated_value.abs().max(1.0), || {
            format!("{variant}: gap {:e}", report.optimal_gap)
        })?;
        ensure(report.passed(), || format!("{variant}:\n{}", report.text))?;
        lines.push(format!("{variant} ({} strategies, gap {:.0e})", report.strategies, report.optimal_gap));
    }
    Ok(lines.join(", "))
}

fn transforms() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut discount_pairs = 0;
    let mut numeraire_pairs = 0;
    for k in 0..10 {
        let n = rng.gen_range(3..=10);
        let space = random_space(&mut rng, n, 4);
        let rep = random_representation(&mut rng, space, k % 2);
        let pairs = random_pairs(&mut rng, &rep, 10, TOL).map_err(|e| e.to_string())?;
        let star = random_equivalent_measure(&mut rng, rep.measure());
        let check = rep.discount_transform(&star, &pairs, TOL).map_err(|e| e.to_string())?;
        ensure(check.flips == 0, || format!("rep {k}: {} discount flips", check.flips))?;
        discount_pairs += check.pairs_checked;

        let same = rep.discount_factors(rep.measure()).map_err(|e| e.to_string())?;
        ensure(same.iter().all(|b| b.values.iter().all(|v| *v == 1.0)), || {
            format!("rep {k}: beta is not 1 under P* = P")
        })?;

        let numeraire: Vec<Act> = random_numeraire(&mut rng, rep.space());
        let transformed = rep.numeraire_transform(&numeraire).map_err(|e| e.to_string())?;
        let flips = numeraire_flips(&rep, &transformed, &numeraire, &pairs, TOL).map_err(|e| e.to_string())?;
        ensure(flips == 0, || format!("rep {k}: {flips} numeraire flips"))?;
        numeraire_pairs += pairs.len();
    }
    Ok(format!("{discount_pairs} discount pairs and {numeraire_pairs} numeraire pairs, 0 flips; beta = 1 under P* = P"))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "villa reproduction", budget: Some(Duration::from_secs(1)), run: villa },
        Criterion { id: 2, name: "semigroup suite", budget: Some(Duration::from_secs(30)), run: semigroup },
        Criterion { id: 3, name: "recovery round trip", budget: Some(Duration::from_secs(120)), run: recovery_round_trip },
        Criterion { id: 4, name: "uniqueness controls", budget: None, run: uniqueness_controls },
        Criterion { id: 5, name: "axiom suite", budget: Some(Duration::from_secs(60)), run: axiom_suite },
        Criterion { id: 6, name: "closed-form oracle", budget: None, run: closed_form },
        Criterion { id: 7, name: "star-continuity detector", budget: None, run: star_continuity },
        Criterion { id: 8, name: "dpp demo", budget: None, run: dpp },
        Criterion { id: 9, name: "discount and numeraire transforms", budget: None, run: transforms },
    ];
    let mut failed = 0;
    for c in criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let over = c.budget.is_some_and(|b| elapsed > b);
        let (status, detail) = match (&outcome, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over budget {:?}", c.budget.expect("budget"))),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        if status == "FAIL" {
            failed += 1;
        }
        println!("{status} {:>2} {:<34} {:>8.2}s  {detail}", c.id, c.name, elapsed.as_secs_f64());
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
