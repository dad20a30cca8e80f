use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdu_core::apps::{run_dpp, Market, BINOMIAL_SCENARIO};
use sdu_core::axioms::{derive_null_events, ActGrid, AxiomChecker, InducedOracle};
use sdu_core::random::{
    random_act, random_branching_space, random_curve, random_equivalent_measure, random_measure, random_pairs,
    random_pl_representation, random_representation, random_space, CurveKind,
};
use sdu_core::recovery::{recover, RecoveryOptions};
use sdu_core::scenario::Scenario;
use sdu_core::space::{conditional_expectation, null_events, paste};
use sdu_core::{Act, Event, MonotoneCurve, Representation, UtilityField, VerdictTag};

const TOL: f64 = 1e-9;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn fleet_rep(seed: u64) -> Representation {
    let mut r = rng(seed);
    let n = r.gen_range(2..=10);
    let times = r.gen_range(3..=4);
    let nulls = r.gen_range(0..=1);
    let space = random_space(&mut r, n, times);
    random_representation(&mut r, space, nulls)
}

fn unbounded_curve(r: &mut ChaCha8Rng) -> MonotoneCurve {
    let k = r.gen_range(0..CurveKind::UNBOUNDED.len());
    random_curve(r, CurveKind::UNBOUNDED[k])
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partitions_refine(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(1..=16);
        let times = r.gen_range(2..=5);
        let space = random_space(&mut r, n, times);
        for i in 0..space.last() {
            for a in 0..space.n_atoms(i + 1) {
                let atom = space.atom(i + 1, a);
                let parent = space.atom_of(i, atom[0]);
                prop_assert!(atom.iter().all(|&s| space.atom_of(i, s) == parent));
            }
        }
    }

    #[test]
    fn tower_property(seed in any::<u64>()) {
        let rep = fleet_rep(seed);
        let (space, p) = (rep.space(), rep.measure());
        let mut r = rng(seed ^ 1);
        let j = space.last();
        let f = random_act(&mut r, space, j, -5.0, 5.0);
        for k in 0..=j {
            let inner = conditional_expectation(space, p, &f, k).unwrap();
            for i in 0..=k {
                let nested = conditional_expectation(space, p, &inner, i).unwrap();
                let direct = conditional_expectation(space, p, &f, i).unwrap();
                for s in 0..space.n_states() {
                    if p.atom_prob(space, i, space.atom_of(i, s)) > 0.0 {
                        prop_assert!(close(nested.values[s], direct.values[s], 1e-12));
                    }
                }
            }
        }
    }

    #[test]
    fn conditional_expectation_is_linear_positive_and_local(
        seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0,
    ) {
        let rep = fleet_rep(seed);
        let (space, p) = (rep.space(), rep.measure());
        let mut r = rng(seed ^ 2);
        let j = space.last();
        let f = random_act(&mut r, space, j, -2.0, 2.0);
        let g = random_act(&mut r, space, j, 0.0, 2.0);
        let i = r.gen_range(0..=j);
        let combo = f.scale(a).add(&g.scale(b));
        let lhs = conditional_expectation(space, p, &combo, i).unwrap();
        let ef = conditional_expectation(space, p, &f, i).unwrap();
        let eg = conditional_expectation(space, p, &g, i).unwrap();
        for s in 0..space.n_states() {
            prop_assert!(close(lhs.values[s], a * ef.values[s] + b * eg.values[s], 1e-12));
            prop_assert!(eg.values[s] >= 0.0);
        }
        let atoms: Vec<usize> = (0..space.n_atoms(i)).filter(|_| r.gen_bool(0.5)).collect();
        let event = Event::from_atoms(space, i, &atoms);
        let indicator = event.indicator(j, space.n_states());
        let masked = f.zip_with(&indicator, |x, k| x * k);
        let local = conditional_expectation(space, p, &masked, i).unwrap();
        let outside = ef.zip_with(&event.indicator(i, space.n_states()), |x, k| x * k);
        prop_assert_eq!(local.values, outside.values);
    }

    #[test]
    fn paste_complements_add_up(seed in any::<u64>()) {
        let rep = fleet_rep(seed);
        let space = rep.space();
        let mut r = rng(seed ^ 3);
        let i = r.gen_range(0..=space.last());
        let f = random_act(&mut r, space, i, -2.0, 2.0);
        let g = random_act(&mut r, space, i, -2.0, 2.0);
        let atoms: Vec<usize> = (0..space.n_atoms(i)).filter(|_| r.gen_bool(0.5)).collect();
        let event = Event::from_atoms(space, i, &atoms);
        let fg = paste(&f, &g, &event).unwrap();
        let gf = paste(&g, &f, &event).unwrap();
        prop_assert!(space.is_measurable_act(i, &fg));
        prop_assert_eq!(fg.add(&gf).values, f.add(&g).values);
    }

    #[test]
    fn curves_invert_increase_and_vanish_at_zero(seed in any::<u64>()) {
        let mut r = rng(seed);
        for kind in CurveKind::ALL {
            let c = random_curve(&mut r, kind);
            prop_assert_eq!(c.eval(0.0), 0.0);
            let mut prev = f64::NEG_INFINITY;
            for k in 0..1000 {
                let x = -3.0 + 6.0 * k as f64 / 999.0;
                let y = c.eval(x);
                prop_assert!(y > prev, "{} not increasing at {}", c, x);
                prev = y;
                let back = c.invert(y, 1e-12).unwrap();
                prop_assert!((back.x - x).abs() <= 1e-7 * x.abs().max(1.0), "{}: {} -> {}", c, x, back.x);
            }
        }
    }

    #[test]
    fn discontinuity_sets_match_brute_force(seed in any::<u64>()) {
        let mut r = rng(seed);
        let space = random_space(&mut r, 4, 2);
        let jumps: Vec<(f64, f64)> = (0..space.n_states())
            .map(|_| (r.gen_range(-1.5..1.5), [0.0, 0.5, 1.0][r.gen_range(0..3)]))
            .collect();
        let curves: Vec<Vec<MonotoneCurve>> = (0..2)
            .map(|i| {
                (0..space.n_states())
                    .map(|s| {
                        let base = MonotoneCurve::identity();
                        if i == 1 { base.with_jump(jumps[s].0, 0.5, jumps[s].1).unwrap() } else { base }
                    })
                    .collect()
            })
            .collect();
        let field = UtilityField::from_state_curves(&space, curves).unwrap();
        let f = Act::new(1, (0..space.n_states())
            .map(|s| if r.gen_bool(0.7) { jumps[s].0 } else { r.gen_range(-2.0..2.0) })
            .collect());
        let sets = field.discontinuity_sets(1, &f).unwrap();
        for s in 0..space.n_states() {
            let c = field.curve(1, s);
            let x = f.values[s];
            let n = 1e6;
            let right = (c.eval(x + 1.0 / n) - c.eval(x)).abs() > 1e-3;
            let left = (c.eval(x) - c.eval(x - 1.0 / n)).abs() > 1e-3;
            prop_assert_eq!(sets.right.contains(s), right);
            prop_assert_eq!(sets.left.contains(s), left);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cce_is_equivalent_and_unique(seed in any::<u64>()) {
        let rep = fleet_rep(seed);
        let space = rep.space();
        let mut r = rng(seed ^ 4);
        let t = r.gen_range(1..=space.last());
        let s = r.gen_range(0..t);
        let f = random_act(&mut r, space, t, -2.0, 2.0);
        let g = rep.cce(s, t, &f, 1e-12).unwrap();
        prop_assert_eq!(rep.compare(s, t, &g, &f, TOL).unwrap().tag(), VerdictTag::Equiv);
        let higher = g.shift(1e-3);
        let v = rep.compare(s, t, &higher, &f, TOL).unwrap();
        prop_assert_eq!(v.tag(), VerdictTag::Succeq);
    }

    #[test]
    fn cce_localizes_to_events(seed in any::<u64>()) {
        let rep = fleet_rep(seed);
        let space = rep.space();
        let mut r = rng(seed ^ 5);
        let t = r.gen_range(1..=space.last());
        let s = r.gen_range(0..t);
        let f = random_act(&mut r, space, t, -2.0, 2.0);
        let atoms: Vec<usize> = (0..space.n_atoms(s)).filter(|_| r.gen_bool(0.5)).collect();
        let event = Event::from_atoms(space, s, &atoms);
        let masked = f.zip_with(&event.indicator(t, space.n_states()), |x, k| x * k);
        let local = rep.cce(s, t, &masked, 1e-12).unwrap();
        let whole = rep.cce(s, t, &f, 1e-12).unwrap();
        for st in 0..space.n_states() {
            if rep.measure().weight(st) == 0.0 {
                continue;
            }
            let want = if event.contains(st) { whole.values[st] } else { 0.0 };
            prop_assert!(close(local.values[st], want, 1e-9));
        }
    }

    #[test]
    fn partitions_are_total_and_monotone(seed in any::<u64>()) {
        let rep = fleet_rep(seed);
        let space = rep.space();
        let mut r = rng(seed ^ 6);
        for p in random_pairs(&mut r, &rep, 20, TOL).unwrap() {
            let v = rep.compare(p.s, p.t, &p.g, &p.f, TOL).unwrap();
            let part = v.partition();
            for st in 0..space.n_states() {
                let a = space.atom_of(p.s, st);
                if rep.measure().atom_prob(space, p.s, a) > 0.0 {
                    let hits = [&part.equal, &part.above, &part.below].iter().filter(|e| e.contains(st)).count();
                    prop_assert_eq!(hits, 1);
                }
            }
            let a = r.gen_range(0..space.n_atoms(p.s));
            let bump = Event::from_atoms(space, p.s, &[a]).indicator(p.s, space.n_states());
            let raised = p.g.add(&bump.scale(0.5));
            let w = rep.compare(p.s, p.t, &raised, &p.f, TOL).unwrap();
            let st = space.atom(p.s, a)[0];
            if part.above.contains(st) || part.equal.contains(st) {
                prop_assert!(w.partition().above.contains(st));
            }
        }
    }

    #[test]
    fn semigroup_holds_on_the_fleet(seed in any::<u64>()) {
        let rep = fleet_rep(seed);
        let mut r = rng(seed ^ 7);
        let last = rep.space().last();
        let f = random_act(&mut r, rep.space(), last, -2.0, 2.0);
        for s in 0..last {
            for t in s + 1..last {
                prop_assert!(rep.semigroup_residual(s, t, last, &f, TOL).unwrap() <= 10.0 * TOL);
            }
        }
    }

    #[test]
    fn verdicts_survive_relative_rescaling(seed in any::<u64>()) {
        let rep = fleet_rep(seed);
        let mut r = rng(seed ^ 8);
        let star = random_equivalent_measure(&mut r, rep.measure());
        let other = rep.rescaled(&star).unwrap();
        for p in random_pairs(&mut r, &rep, 25, TOL).unwrap() {
            let a = rep.compare(p.s, p.t, &p.g, &p.f, TOL).unwrap();
            let b = other.compare(p.s, p.t, &p.g, &p.f, TOL).unwrap();
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn discount_factors_are_one_under_the_same_measure(seed in any::<u64>()) {
        let rep = fleet_rep(seed);
        for beta in rep.discount_factors(rep.measure()).unwrap() {
            prop_assert!(beta.values.iter().all(|v| *v == 1.0));
        }
    }

    #[test]
    fn scenarios_round_trip(seed in any::<u64>()) {
        let rep = fleet_rep(seed);
        let text = Scenario::from_representation("fleet", &rep).render();
        let back = Scenario::parse(&text).unwrap();
        prop_assert_eq!(back.render(), text);
        prop_assert_eq!(back.representation(None).unwrap(), rep);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn oracle_nulls_and_partitions_match_the_engine(seed in any::<u64>()) {
        let mut r = rng(seed);
        let space = random_space(&mut r, 3, 2);
        let measure = { let nulls = r.gen_range(0..=1); random_measure(&mut r, 3, nulls) };
        let layer: Vec<MonotoneCurve> = (0..space.n_atoms(1))
            .map(|_| unbounded_curve(&mut r))
            .collect();
        let field = UtilityField::new(&space, vec![vec![MonotoneCurve::identity()], layer]).unwrap();
        let rep = Representation::new(space.clone(), measure, field, MonotoneCurve::identity()).unwrap();
        let oracle = InducedOracle::new(rep.clone(), 1e-12);
        let grid = ActGrid::default();
        prop_assert_eq!(derive_null_events(&oracle, 1, &grid), null_events(&space, rep.measure(), 1).unwrap());
        let checker = AxiomChecker::new(&oracle, grid);
        for p in random_pairs(&mut r, &rep, 10, TOL).unwrap() {
            let from_oracle = checker.tri_partition(p.s, &p.g, &p.f).unwrap();
            let from_engine = rep.compare(p.s, p.t, &p.g, &p.f, 1e-12).unwrap();
            prop_assert_eq!(&from_oracle, from_engine.partition());
        }
    }

    #[test]
    fn recovered_levels_are_increasing_and_pinned_by_u0(seed in any::<u64>()) {
        let mut r = rng(seed);
        let opts = RecoveryOptions::default();
        let xs = opts.grid.values().to_vec();
        let space = random_branching_space(&mut r, 3, 2);
        let rep = random_pl_representation(&mut r, space, &xs);
        let oracle = InducedOracle::new(rep.clone(), 1e-12);
        let got = recover(&oracle, rep.u0(), &opts).unwrap();
        for step in &got.steps {
            prop_assert!(step.residual <= 1e-8);
            for c in &step.curves {
                prop_assert!(xs.windows(2).all(|w| c.eval(w[1]) > c.eval(w[0])));
            }
        }
        let mine = &got.representation;
        for _ in 0..10 {
            let f = random_act(&mut r, mine.space(), 1, -2.0, 2.0);
            let c0 = rep.cce(0, 1, &f, 1e-12).unwrap().values[0];
            let v1 = mine.expected_utility(0, 1, &f).unwrap().values[0];
            prop_assert!(close(mine.u0().eval(c0), v1, 1e-9));
        }
    }

    #[test]
    fn value_function_dominates_every_strategy(seed in any::<u64>()) {
        let mut r = rng(seed);
        let sc = Scenario::parse(BINOMIAL_SCENARIO).unwrap();
        let base = sc.representation(None).unwrap();
        let measure = random_measure(&mut r, base.space().n_states(), 0);
        let layers: Vec<Vec<MonotoneCurve>> = (0..base.space().n_times())
            .map(|i| (0..base.space().n_atoms(i)).map(|_| unbounded_curve(&mut r)).collect())
            .collect();
        let u0 = layers[0][0].clone();
        let field = UtilityField::new(base.space(), layers).unwrap();
        let rep = Representation::new(base.space().clone(), measure, field, u0).unwrap();
        let down = r.gen_range(0.7..0.99);
        let up = r.gen_range(1.01..1.4);
        let fractions: Vec<f64> = (0..r.gen_range(1..=4)).map(|_| r.gen_range(0.0..1.0)).collect();
        let market = Market::new(rep, r.gen_range(0.5..2.0), up, down, fractions).unwrap();
        let report = run_dpp(&market, TOL).unwrap();
        prop_assert!(report.dominated, "{}", report.text);
        prop_assert!(report.passed(), "{}", report.text);
    }
}
