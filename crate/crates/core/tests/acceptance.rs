//! One line per acceptance criterion. Every check recomputes its quantity
//! from first principles (completion times, subset enumeration, term sums)
//! rather than trusting the library's own bookkeeping.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_traits::{One, Signed, Zero};
use smith_sched::cfp::{h, liquify_traced, maximize_h, random_pair, run_pipeline, FunctionPair};
use smith_sched::conflp::{price_machine, solve_configuration_lp, ColGenOptions, ConfigSolution};
use smith_sched::exact::{brute_force_opt, full_config_lp};
use smith_sched::generators::{
    gap_instance, random_instance, tight_instance, tight_lp_solution, RandomSpec, TightSpec,
};
use smith_sched::rational::{frac, int};
use smith_sched::rng::Stream;
use smith_sched::rounding::{build_buckets, decompose, MatchingDecomposition};
use smith_sched::{Configuration, Instance, Rational};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    ensure(elapsed < limit, || format!("took {elapsed:.2?}, limit {limit:?}"))
}

/// Weighted completion time with `w = p`, summed job by job in the given order.
fn completion_cost(sizes: &[Rational]) -> Rational {
    let mut clock = int(0);
    let mut total = int(0);
    for p in sizes {
        clock += p;
        total += p * &clock;
    }
    total
}

/// `2 e <= (1 + sqrt 2) lp`, decided as `2e <= lp` or `(2e - lp)^2 <= 2 lp^2`.
fn within_bound(e: &Rational, lp: &Rational) -> bool {
    let d = e * int(2) - lp;
    !d.is_positive() || &d * &d <= lp * lp * int(2)
}

fn small_random(seed: u64) -> Instance {
    let mut s = Stream::new(seed ^ 0xacce);
    let spec = RandomSpec {
        machines: 1 + s.below(3) as usize,
        jobs: 1 + s.below(6) as usize,
        max_size: 5,
        eligibility_prob: frac(1 + s.below(4) as i64, 4),
        seed,
    };
    random_instance(&spec).expect("valid spec")
}

/// `x_ij` summed straight from the configuration weights.
fn lp_marginals(inst: &Instance, sol: &ConfigSolution) -> Vec<Vec<Rational>> {
    let mut x = vec![vec![int(0); inst.job_count()]; inst.machine_count()];
    for (i, cols) in sol.columns.iter().enumerate() {
        for (c, y) in cols {
            for &j in c.jobs() {
                x[i][j] += y;
            }
        }
    }
    x
}

fn lp_machine_costs(inst: &Instance, sol: &ConfigSolution) -> Vec<Rational> {
    sol.columns
        .iter()
        .map(|cols| cols.iter().map(|(c, y)| y * completion_cost(&c.sizes(inst))).sum())
        .collect()
}

/// Jobs per machine in one term, ordered by bucket index.
fn term_machines(inst: &Instance, d: &MatchingDecomposition, t: usize) -> Vec<Vec<(usize, usize)>> {
    let mut out = vec![Vec::new(); inst.machine_count()];
    for (j, b) in d.terms[t].buckets.iter().enumerate() {
        out[b.machine].push((b.index, j));
    }
    for v in &mut out {
        v.sort();
    }
    out
}

fn expected_machine_costs(inst: &Instance, d: &MatchingDecomposition) -> Vec<Rational> {
    let mut e = vec![int(0); inst.machine_count()];
    for t in 0..d.terms.len() {
        for (i, jobs) in term_machines(inst, d, t).iter().enumerate() {
            let sizes: Vec<Rational> = jobs.iter().map(|&(_, j)| inst.size(j).clone()).collect();
            e[i] += &d.terms[t].lambda * completion_cost(&sizes);
        }
    }
    e
}

fn gap_certificate() -> Outcome {
    let start = Instant::now();
    let inst = gap_instance();
    let opt = brute_force_opt(&inst).map_err(|e| e.to_string())?.value;
    let full = full_config_lp(&inst).map_err(|e| e.to_string())?.value;
    let cg = solve_configuration_lp(&inst, &ColGenOptions::default())
        .map_err(|e| e.to_string())?
        .solution
        .objective;
    let elapsed = start.elapsed();
    ensure(opt == int(26), || format!("OPT = {opt}"))?;
    ensure(full == int(24) && cg == int(24), || format!("LP = {full} / {cg}"))?;
    let gap = &opt / &full;
    ensure(gap == frac(13, 12), || format!("gap {gap}"))?;
    within(elapsed, Duration::from_secs(1))?;
    Ok(format!("OPT=26 LP=24 gap={gap} in {elapsed:.2?}"))
}

/// Minimum of `cost(C) - sum u_j` over all subsets, the empty set included.
fn brute_price(jobs: &[(usize, Rational)], u: &[Rational]) -> Rational {
    let n = jobs.len();
    let mut best = int(0);
    for mask in 1u32..(1 << n) {
        let picked: Vec<&(usize, Rational)> = (0..n).filter(|k| mask >> k & 1 == 1).map(|k| &jobs[k]).collect();
        let mut sizes: Vec<Rational> = picked.iter().map(|(_, p)| p.clone()).collect();
        sizes.sort();
        let v = completion_cost(&sizes) - picked.iter().map(|(j, _)| &u[*j]).sum::<Rational>();
        if v < best {
            best = v;
        }
    }
    best
}

fn oracle_equivalence(instances: &[Instance]) -> Outcome {
    let start = Instant::now();
    for (k, inst) in instances.iter().enumerate() {
        let cg = solve_configuration_lp(inst, &ColGenOptions::default()).map_err(|e| format!("#{k}: {e}"))?;
        let full = full_config_lp(inst).map_err(|e| format!("#{k}: {e}"))?;
        ensure(cg.solution.objective == full.value, || {
            format!(
                "instance {k}: column generation {} vs full {}",
                cg.solution.objective, full.value
            )
        })?;
    }
    let mut s = Stream::new(77);
    let mut priced = 0;
    for n in 1..=15usize {
        for _ in 0..4 {
            let jobs: Vec<(usize, Rational)> = (0..n)
                .map(|j| (j, frac(1 + s.below(10) as i64, 1 + s.below(3) as i64)))
                .collect();
            let u: Vec<Rational> = (0..n)
                .map(|_| frac(s.below(60) as i64, 1 + s.below(4) as i64))
                .collect();
            let dp = price_machine(&jobs, &u).map_err(|e| e.to_string())?;
            let want = brute_price(&jobs, &u);
            ensure(dp.value == want, || {
                format!("pricing with {n} jobs: DP {} vs subsets {want}", dp.value)
            })?;
            let sizes: Vec<Rational> = dp.config.jobs().iter().map(|&j| jobs[j].1.clone()).collect();
            let achieved = completion_cost(&sizes) - dp.config.jobs().iter().map(|&j| &u[j]).sum::<Rational>();
            ensure(achieved == want, || {
                format!("pricing with {n} jobs: witness has value {achieved}")
            })?;
            priced += 1;
        }
    }
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(120))?;
    Ok(format!(
        "{} instances agree with full enumeration, {priced} pricing problems agree with subset search, in {elapsed:.2?}",
        instances.len()
    ))
}

struct Rounded {
    inst: Instance,
    sol: ConfigSolution,
    d: MatchingDecomposition,
}

/// A feasible fractional point: a random convex combination of three random
/// integral assignments.
fn mixture(inst: &Instance, seed: u64) -> Result<ConfigSolution, String> {
    let mut s = Stream::new(seed);
    let mut columns = vec![Vec::new(); inst.machine_count()];
    let weights: Vec<i64> = (0..3).map(|_| 1 + s.below(5) as i64).collect();
    let total: i64 = weights.iter().sum();
    for w in weights {
        let mut on = vec![Vec::new(); inst.machine_count()];
        for (j, job) in inst.jobs().iter().enumerate() {
            on[job.eligible[s.below(job.eligible.len() as u64) as usize]].push(j);
        }
        for (i, jobs) in on.into_iter().enumerate() {
            columns[i].push((Configuration::new(jobs).map_err(|e| e.to_string())?, frac(w, total)));
        }
    }
    ConfigSolution::from_columns(inst, columns).map_err(|e| e.to_string())
}

fn round(inst: &Instance, sol: ConfigSolution) -> Result<Rounded, String> {
    let x = smith_sched::conflp::extract_marginals(inst, &sol).map_err(|e| e.to_string())?;
    let z = build_buckets(inst, &x).map_err(|e| e.to_string())?;
    let d = decompose(&z).map_err(|e| e.to_string())?;
    Ok(Rounded {
        inst: inst.clone(),
        sol,
        d,
    })
}

/// Every instance rounded from its LP optimum and from a fractional mixture.
fn round_all(instances: &[Instance]) -> Result<Vec<Rounded>, String> {
    let mut out = Vec::new();
    for (k, inst) in instances.iter().enumerate() {
        let run = solve_configuration_lp(inst, &ColGenOptions::default()).map_err(|e| format!("#{k}: {e}"))?;
        out.push(round(inst, run.solution).map_err(|e| format!("#{k}: {e}"))?);
        let mix = mixture(inst, k as u64).map_err(|e| format!("#{k}: {e}"))?;
        out.push(round(inst, mix).map_err(|e| format!("#{k} mixture: {e}"))?);
    }
    Ok(out)
}

fn approximation_guarantee(rounded: &[Rounded]) -> Outcome {
    let mut worst = int(0);
    let mut machines = 0;
    for (k, r) in rounded.iter().enumerate() {
        let lp = lp_machine_costs(&r.inst, &r.sol);
        let e = expected_machine_costs(&r.inst, &r.d);
        for i in 0..lp.len() {
            ensure(within_bound(&e[i], &lp[i]), || {
                format!("instance {k} machine {i}: E = {} vs LP = {}", e[i], lp[i])
            })?;
            if lp[i].is_positive() {
                worst = worst.max(&e[i] / &lp[i]);
            }
            machines += 1;
        }
    }
    Ok(format!("{machines} machines within the bound, largest ratio {worst}"))
}

fn rounding_invariants(rounded: &[Rounded]) -> Outcome {
    let mut terms = 0;
    for (k, r) in rounded.iter().enumerate() {
        let (inst, d) = (&r.inst, &r.d);
        let x = lp_marginals(inst, &r.sol);
        ensure(d.terms.iter().all(|t| t.lambda.is_positive()), || {
            format!("instance {k}: nonpositive weight")
        })?;
        let total: Rational = d.terms.iter().map(|t| &t.lambda).sum();
        ensure(total.is_one(), || format!("instance {k}: weights sum to {total}"))?;
        let mut y = vec![vec![int(0); inst.job_count()]; inst.machine_count()];
        for (t, term) in d.terms.iter().enumerate() {
            ensure(term.buckets.len() == inst.job_count(), || {
                format!("instance {k} term {t}: job missing")
            })?;
            for (i, jobs) in term_machines(inst, d, t).iter().enumerate() {
                let mass: Rational = x[i].iter().sum();
                let n = int(jobs.len() as i64);
                ensure(n == mass.floor() || n == mass.ceil(), || {
                    format!("instance {k} term {t} machine {i}: {} jobs for mass {mass}", jobs.len())
                })?;
                for w in jobs.windows(2) {
                    ensure(w[0].0 < w[1].0, || {
                        format!("instance {k} term {t}: bucket {} used twice", w[0].0)
                    })?;
                    ensure(inst.size(w[0].1) >= inst.size(w[1].1), || {
                        format!("instance {k} term {t} machine {i}: sizes increase across buckets")
                    })?;
                }
                for &(_, j) in jobs {
                    y[i][j] += &term.lambda;
                }
            }
            terms += 1;
        }
        ensure(y == x, || {
            format!("instance {k}: term mixture does not reproduce the marginals")
        })?;
    }
    Ok(format!("{terms} terms over {} decompositions", rounded.len()))
}

fn bicriteria(rounded: &[Rounded]) -> Outcome {
    let mut checked = 0;
    for (k, r) in rounded.iter().enumerate() {
        let (inst, d) = (&r.inst, &r.d);
        let x = lp_marginals(inst, &r.sol);
        let bound: Vec<Rational> = x
            .iter()
            .map(|row| {
                let frac_load: Rational = row.iter().enumerate().map(|(j, v)| v * inst.size(j)).sum();
                let biggest = row
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| v.is_positive())
                    .map(|(j, _)| inst.size(j).clone())
                    .max()
                    .unwrap_or_else(|| int(0));
                frac_load + biggest
            })
            .collect();
        for t in 0..d.terms.len() {
            for (i, jobs) in term_machines(inst, d, t).iter().enumerate() {
                let load: Rational = jobs.iter().map(|&(_, j)| inst.size(j)).sum();
                ensure(load <= bound[i], || {
                    format!("instance {k} term {t} machine {i}: load {load} above {}", bound[i])
                })?;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} machine loads within the bound"))
}

fn tightness() -> Outcome {
    let start = Instant::now();
    let spec = TightSpec::reference(1);
    let inst = tight_instance(&spec).map_err(|e| e.to_string())?;
    let small = inst.job_count() - 29;
    ensure(small <= 10_000, || format!("{small} small jobs"))?;
    let sol = tight_lp_solution(&spec, &inst).map_err(|e| e.to_string())?;
    let x = smith_sched::conflp::extract_marginals(&inst, &sol).map_err(|e| e.to_string())?;
    let z = build_buckets(&inst, &x).map_err(|e| e.to_string())?;
    let d = decompose(&z).map_err(|e| e.to_string())?;
    let lp = lp_machine_costs(&inst, &sol);
    let e = expected_machine_costs(&inst, &d);

    let (t, g, l, eps) = (&spec.t_tilde, &spec.gamma_tilde, &spec.lambda_tilde, &spec.eps);
    let two = int(2);
    let num = t * g * g + t * g * l + l * l / &two + l * eps / &two;
    let den = t * g * g + l * l / (&two * (Rational::one() - t)) + l * eps / &two;
    let closed = num / den;
    for i in 0..inst.machine_count() {
        ensure(lp[i].is_positive() && &e[i] / &lp[i] == closed, || {
            format!("machine {i}: ratio {} vs closed form {closed}", &e[i] / &lp[i])
        })?;
    }
    ensure(closed > frac(120, 100), || format!("ratio {closed} is not above 1.20"))?;
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(30))?;
    Ok(format!(
        "all {} machines at ratio {closed} ({:.6}) with {small} small jobs, in {elapsed:.2?}",
        inst.machine_count(),
        smith_sched::rational::to_f64(&closed)
    ))
}

fn analysis_bound() -> Outcome {
    let start = Instant::now();
    let m = maximize_h(&frac(1, 1000)).map_err(|e| e.to_string())?;
    ensure(m.value >= frac(120710, 100000), || {
        format!("maximum {} below 1.20710", m.value)
    })?;
    ensure(within_bound(&m.value, &int(1)), || {
        format!("maximum {} above the bound", m.value)
    })?;
    // sqrt 2 to ten digits
    let r2 = Rational::new(14142135624i64.into(), 10000000000i64.into());
    let t = Rational::one() - Rational::one() / &r2;
    let l = (&r2 - Rational::one()) / int(2);
    let at = h(&t, &frac(1, 2), &l).map_err(|e| e.to_string())?;
    ensure(at > frac(120705, 100000), || format!("h at the approximant is {at}"))?;
    let elapsed = start.elapsed();
    within(elapsed, Duration::from_secs(60))?;
    Ok(format!(
        "max h = {:.12} at t={:.6} gamma={:.6} lambda={:.6}, in {elapsed:.2?}",
        smith_sched::rational::to_f64(&m.value),
        smith_sched::rational::to_f64(&m.t),
        smith_sched::rational::to_f64(&m.gamma),
        smith_sched::rational::to_f64(&m.lambda),
    ))
}

fn ratio(p: &FunctionPair) -> Result<Rational, String> {
    let g = p.cost_g();
    ensure(!g.is_zero(), || "g has zero cost".into())?;
    Ok(p.cost_f() / g)
}

fn cfp_properties() -> Outcome {
    let mut s = Stream::new(2024);
    let pairs = 400;
    let mut liquified = 0;
    let mut at_least_one = 0;
    let mut worst_final = int(0);
    for k in 0..pairs {
        let pair = random_pair(&mut s, 5, 5, None).map_err(|e| format!("pair {k}: {e}"))?;
        let run = run_pipeline(&pair).map_err(|e| format!("pair {k}: {e}"))?;
        let (r0, r1, r2, r3) = (ratio(&pair)?, ratio(&run.worst)?, ratio(&run.main)?, ratio(&run.last)?);
        ensure(r1 >= r0, || {
            format!("pair {k}: worst-case transform lowers the ratio {r0} to {r1}")
        })?;
        // below ratio 1 there is nothing to bound and equal cost drops on
        // both sides lower the ratio, so monotonicity is asserted from 1 up
        let in_scope = r1 >= int(1);
        if in_scope {
            at_least_one += 1;
            ensure(r2 >= r1, || {
                format!("pair {k}: main transform lowers the ratio {r1} to {r2}")
            })?;
        }
        ensure(r3 >= r2.clone().min(int(2)), || {
            format!("pair {k}: final form {r3} below min(2, {r2})")
        })?;
        let slack = &run.last.eps_liquid * int(10);
        let bound_ok = within_bound(&(&r3 - &slack), &int(1));
        ensure(bound_ok, || format!("pair {k}: final ratio {r3} above the bound"))?;
        worst_final = worst_final.max(r3);

        let p = run.worst.f.first().first();
        if p.is_positive() {
            let measure = run
                .worst
                .f
                .measure_containing(&p)
                .min(run.worst.g.measure_containing(&p));
            let (p1, p2) = (&p * frac(1, 4), &p * frac(3, 4));
            let (out, trace) =
                liquify_traced(&run.worst, &p, &p1, &p2, &measure).map_err(|e| format!("pair {k}: {e}"))?;
            let want = -(&p1 * &p2);
            for (len, delta) in trace.f_changes.iter().chain(&trace.g_changes) {
                ensure(*delta == want && len.is_positive(), || {
                    format!("pair {k}: pattern changed by {delta}, expected {want}")
                })?;
            }
            let df = out.cost_f() - run.worst.cost_f();
            let dg = out.cost_g() - run.worst.cost_g();
            ensure(df == &want * &measure && dg == &want * &measure, || {
                format!("pair {k}: total changes {df}, {dg} on measure {measure}")
            })?;
            if in_scope {
                let after = ratio(&out)?;
                ensure(after >= r1, || {
                    format!("pair {k}: liquification lowers the ratio {r1} to {after}")
                })?;
            }
            liquified += 1;
        }
    }
    ensure(at_least_one >= 100, || {
        format!("only {at_least_one} pairs reach ratio 1")
    })?;
    Ok(format!(
        "{pairs} pairs, {at_least_one} with ratio at least 1, {liquified} liquified, largest final ratio {:.6}",
        smith_sched::rational::to_f64(&worst_final)
    ))
}

fn main() -> ExitCode {
    let instances: Vec<Instance> = (0..200).map(small_random).collect();
    let rounded = round_all(&instances);
    let on_rounded = |f: fn(&[Rounded]) -> Outcome| match &rounded {
        Ok(r) => f(r),
        Err(e) => Err(format!("rounding failed: {e}")),
    };
    let results: Vec<(u32, &str, Outcome)> = vec![
        (1, "gap certificate", gap_certificate()),
        (2, "oracle equivalence", oracle_equivalence(&instances)),
        (3, "approximation guarantee", on_rounded(approximation_guarantee)),
        (4, "rounding invariants", on_rounded(rounding_invariants)),
        (5, "bi-criteria makespan", on_rounded(bicriteria)),
        (6, "tightness", tightness()),
        (7, "analysis bound", analysis_bound()),
        (8, "function-pair properties", cfp_properties()),
    ];
    let mut failed = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {n} PASS {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n} FAIL {name}: {why}");
            }
        }
    }
    println!("criterion 9 EXCLUDED asymptotic running time and comparison with other algorithms: not measurable at desk scale");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
