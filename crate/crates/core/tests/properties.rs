use num_traits::{One, Signed, ToPrimitive, Zero};
use proptest::prelude::*;
use smith_sched::cfp::{h, liquify_traced, random_pair, run_pipeline};
use smith_sched::conflp::{extract_marginals, price_machine, solve_configuration_lp, ColGenOptions, ConfigSolution};
use smith_sched::exact::{brute_force_opt, full_config_lp};
use smith_sched::generators::{random_instance, RandomSpec};
use smith_sched::instance::{parse_instance, serialize_instance};
use smith_sched::rational::{at_most_rounding_bound, frac, int, parse, ratio_within_rounding_bound};
use smith_sched::rng::Stream;
use smith_sched::rounding::{build_buckets, decompose, derandomize, expected_cost, expected_machine_costs, term_loads};
use smith_sched::{assignment_cost, config_cost, Configuration, Instance, Rational};

fn rational() -> impl Strategy<Value = Rational> {
    (1i64..40, 1i64..7).prop_map(|(n, d)| frac(n, d))
}

fn instance() -> impl Strategy<Value = Instance> {
    (1usize..4, 1usize..7, 1u64..6, 1i64..5, any::<u64>()).prop_map(|(machines, jobs, max_size, p, seed)| {
        random_instance(&RandomSpec {
            machines,
            jobs,
            max_size,
            eligibility_prob: frac(p, 4),
            seed,
        })
        .unwrap()
    })
}

fn completion_cost(sizes: &[Rational]) -> Rational {
    let mut clock = int(0);
    let mut total = int(0);
    for p in sizes {
        clock += p;
        total += p * &clock;
    }
    total
}

/// Convex combination of random assignments, always feasible.
fn mixture(inst: &Instance, seed: u64, parts: usize) -> ConfigSolution {
    let mut s = Stream::new(seed);
    let weights: Vec<i64> = (0..parts).map(|_| 1 + s.below(4) as i64).collect();
    let total: i64 = weights.iter().sum();
    let mut columns = vec![Vec::new(); inst.machine_count()];
    for w in weights {
        let mut on = vec![Vec::new(); inst.machine_count()];
        for (j, job) in inst.jobs().iter().enumerate() {
            on[job.eligible[s.below(job.eligible.len() as u64) as usize]].push(j);
        }
        for (i, jobs) in on.into_iter().enumerate() {
            columns[i].push((Configuration::new(jobs).unwrap(), frac(w, total)));
        }
    }
    ConfigSolution::from_columns(inst, columns).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cost_ignores_order(mut sizes in prop::collection::vec(rational(), 0..8), seed in any::<u64>()) {
        let c = config_cost(&sizes).unwrap();
        prop_assert_eq!(&c, &completion_cost(&sizes));
        let mut s = Stream::new(seed);
        for k in (1..sizes.len()).rev() {
            sizes.swap(k, s.below(k as u64 + 1) as usize);
        }
        prop_assert_eq!(c, completion_cost(&sizes));
    }

    #[test]
    fn rationals_round_trip(n in -1000i64..1000, d in 1i64..1000) {
        let r = frac(n, d);
        prop_assert_eq!(parse(&r.to_string()).unwrap(), r);
    }

    #[test]
    fn instances_round_trip(inst in instance()) {
        prop_assert_eq!(parse_instance(&serialize_instance(&inst)).unwrap(), inst);
    }

    #[test]
    fn bound_test_matches_floating_point(n in 0i64..4000, d in 1i64..2000) {
        let v = frac(n, d);
        let f = v.to_f64().unwrap();
        let bound = (1.0 + 2f64.sqrt()) / 2.0;
        if (f - bound).abs() > 1e-9 {
            prop_assert_eq!(at_most_rounding_bound(&v), f <= bound);
            prop_assert_eq!(ratio_within_rounding_bound(&v, &int(1)), f <= bound);
        }
    }

    #[test]
    fn h_never_exceeds_the_bound(t in 0i64..100, g in 0i64..100, l in 0i64..100) {
        prop_assume!(g + l > 0);
        let v = h(&frac(t, 100), &frac(g, 100), &frac(l, 100)).unwrap();
        prop_assert!(at_most_rounding_bound(&v));
    }

    #[test]
    fn pricing_matches_subsets(
        sizes in prop::collection::vec(rational(), 1..9),
        duals in prop::collection::vec(0i64..80, 9),
    ) {
        let jobs: Vec<(usize, Rational)> = sizes.into_iter().enumerate().collect();
        let u: Vec<Rational> = duals.iter().map(|&v| frac(v, 2)).collect();
        let got = price_machine(&jobs, &u).unwrap();
        let n = jobs.len();
        let mut best = int(0);
        for mask in 1u32..(1 << n) {
            let pick: Vec<usize> = (0..n).filter(|k| mask >> k & 1 == 1).collect();
            let sizes: Vec<Rational> = pick.iter().map(|&k| jobs[k].1.clone()).collect();
            let v = completion_cost(&sizes) - pick.iter().map(|&k| &u[k]).sum::<Rational>();
            if v < best {
                best = v;
            }
        }
        prop_assert_eq!(got.value, best);
    }

    #[test]
    fn lp_sits_between_bounds(inst in instance()) {
        let cg = solve_configuration_lp(&inst, &ColGenOptions::default()).unwrap().solution;
        cg.check(&inst).unwrap();
        let full = full_config_lp(&inst).unwrap().value;
        let opt = brute_force_opt(&inst).unwrap().value;
        prop_assert_eq!(&cg.objective, &full);
        prop_assert!(full <= opt);
    }

    #[test]
    fn rounding_preserves_marginals_and_bounds(inst in instance(), seed in any::<u64>(), parts in 1usize..4) {
        let sol = mixture(&inst, seed, parts);
        let x = extract_marginals(&inst, &sol).unwrap();
        let z = build_buckets(&inst, &x).unwrap();
        z.check(&inst, &x).unwrap();
        let d = decompose(&z).unwrap();
        d.check(&z).unwrap();
        prop_assert_eq!(d.terms.iter().map(|t| &t.lambda).sum::<Rational>(), int(1));
        prop_assert!(d.terms.iter().all(|t| t.lambda.is_positive()));
        prop_assert_eq!(d.marginals(inst.machine_count(), inst.job_count()), x.clone());

        let m = inst.machine_count();
        let lp = sol.machine_costs(&inst);
        let e = expected_machine_costs(&d, &inst);
        for i in 0..m {
            prop_assert!(ratio_within_rounding_bound(&e[i], &lp[i]), "machine {}: {} vs {}", i, e[i], lp[i]);
        }
        for term in &d.terms {
            for (i, load) in term_loads(&inst, term, m).into_iter().enumerate() {
                prop_assert!(load <= x.fractional_load(&inst, i) + x.max_support_size(&inst, i));
            }
        }
        let total = expected_cost(&d, &inst).unwrap();
        prop_assert!(assignment_cost(&inst, &derandomize(&d, &inst).unwrap()).unwrap() <= total);
    }

    #[test]
    fn streams_are_reproducible(seed in any::<u64>(), n in 1u64..1000) {
        let (mut a, mut b) = (Stream::new(seed), Stream::new(seed));
        for _ in 0..16 {
            let v = a.below(n);
            prop_assert!(v < n);
            prop_assert_eq!(v, b.below(n));
            let u = a.unit();
            prop_assert!(!u.is_negative() && u < Rational::one());
            prop_assert_eq!(u, b.unit());
        }
    }

    #[test]
    fn function_pairs_stay_compatible(seed in any::<u64>()) {
        let mut s = Stream::new(seed);
        let pair = random_pair(&mut s, 5, 5, None).unwrap();
        pair.check_compatible().unwrap();
        let run = run_pipeline(&pair).unwrap();
        for p in [&run.worst, &run.main, &run.last] {
            p.check_compatible().unwrap();
        }
        let r0 = pair.ratio().unwrap();
        let r1 = run.worst.ratio().unwrap();
        prop_assert!(r1 >= r0);
        prop_assert!(run.worst.f.first_is_non_increasing() && run.worst.f.rest_is_non_increasing());
        let r3 = run.last.ratio().unwrap();
        prop_assert!(at_most_rounding_bound(&(r3 - &run.last.eps_liquid * int(10))));

        let p = run.worst.f.first().first();
        if !p.is_zero() {
            let measure = run.worst.f.measure_containing(&p).min(run.worst.g.measure_containing(&p));
            let p1 = &p * frac(2, 5);
            let p2 = &p - &p1;
            let (out, _) = liquify_traced(&run.worst, &p, &p1, &p2, &measure).unwrap();
            out.check_compatible().unwrap();
            let want = -(&p1 * &p2) * &measure;
            prop_assert_eq!(out.cost_f() - run.worst.cost_f(), want.clone());
            prop_assert_eq!(out.cost_g() - run.worst.cost_g(), want);
        }
    }
}
