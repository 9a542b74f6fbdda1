//! Suite runner: every instance goes through the LP, bucket rounding and
//! the baselines, and every guarantee is re-checked exactly.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use smith_sched::conflp::{extract_marginals, solve_configuration_lp, ColGenOptions, ConfigSolution};
use smith_sched::exact::{
    assignment_space, brute_force_opt_with_budget, column_space, full_config_lp_with_budget, DEFAULT_ASSIGNMENT_BUDGET,
    DEFAULT_COLUMN_BUDGET,
};
use smith_sched::generators::{
    gap_instance, random_instance, tight_instance, tight_lp_solution, RandomSpec, TightSpec,
};
use smith_sched::instance::parse_instance;
use smith_sched::rational::{int, ratio_within_rounding_bound};
use smith_sched::rounding::{
    build_buckets, decompose, derandomize, expected_machine_costs, greedy, independent_expected_cost, term_loads,
};
use smith_sched::{assignment_cost, makespan, Error, Instance, Rational, Result};

use crate::report::{write_csv, Value};

/// One suite entry: an instance file (relative to the suite file) or a
/// generator spec.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum SuiteEntry {
    Path(String),
    Generator(Box<GeneratorSpec>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum GeneratorSpec {
    Gap,
    Random(RandomSpec),
    /// `count` random instances with seeds `seed, seed + 1, ...`.
    RandomBatch {
        count: u64,
        #[serde(flatten)]
        spec: RandomSpec,
    },
    Tight(TightSpec),
}

pub fn parse_suite(text: &str) -> Result<Vec<SuiteEntry>> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// A named suite instance. Tight instances carry their known LP optimum,
/// which replaces column generation.
#[derive(Debug, Clone)]
pub struct SuiteInstance {
    pub id: String,
    pub instance: Instance,
    pub lp: Option<ConfigSolution>,
}

impl SuiteInstance {
    pub fn new(id: impl Into<String>, instance: Instance) -> Self {
        Self {
            id: id.into(),
            instance,
            lp: None,
        }
    }
}

/// Expands the suite into named instances, in suite order.
pub fn load_suite(entries: &[SuiteEntry], base: &Path) -> Result<Vec<SuiteInstance>> {
    let mut out = Vec::new();
    for entry in entries {
        match entry {
            SuiteEntry::Path(p) => {
                let path: PathBuf = base.join(p);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))?;
                let inst = parse_instance(&text).map_err(|e| Error::InvalidInput(format!("{p}: {e}")))?;
                out.push(SuiteInstance::new(p.clone(), inst));
            }
            SuiteEntry::Generator(g) => match g.as_ref() {
                GeneratorSpec::Gap => out.push(SuiteInstance::new("gap", gap_instance())),
                GeneratorSpec::Random(spec) => {
                    out.push(SuiteInstance::new(
                        format!("random-{}", spec.seed),
                        random_instance(spec)?,
                    ));
                }
                GeneratorSpec::RandomBatch { count, spec } => {
                    for k in 0..*count {
                        let s = RandomSpec {
                            seed: spec.seed.wrapping_add(k),
                            ..spec.clone()
                        };
                        out.push(SuiteInstance::new(format!("random-{}", s.seed), random_instance(&s)?));
                    }
                }
                GeneratorSpec::Tight(spec) => {
                    let instance = tight_instance(spec)?;
                    let lp = tight_lp_solution(spec, &instance)?;
                    out.push(SuiteInstance {
                        id: format!("tight-k{}", spec.k),
                        instance,
                        lp: Some(lp),
                    });
                }
            },
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub colgen: ColGenOptions,
    pub assignment_budget: u128,
    pub column_budget: u128,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            colgen: ColGenOptions::default(),
            assignment_budget: DEFAULT_ASSIGNMENT_BUDGET,
            column_budget: DEFAULT_COLUMN_BUDGET,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InstanceReport {
    pub id: String,
    pub machines: usize,
    pub jobs: usize,
    pub lp: Value,
    /// Full-enumeration LP, when the column budget allows it.
    pub lp_full: Option<Value>,
    pub opt: Option<Value>,
    pub expected: Value,
    pub derandomized: Value,
    pub independent_mean: Value,
    pub greedy: Value,
    /// Largest `E[cost_i] / LP_i` over machines with positive LP cost.
    pub max_machine_ratio: Value,
    pub makespan: Value,
    /// Largest term load over all machines and decomposition terms.
    pub max_term_load: Value,
    /// `max_i (sum_j x_ij p_j + max{p_j : x_ij > 0})`.
    pub bicriteria_bound: Value,
    pub terms: usize,
    pub lp_rounds: usize,
    pub counterexamples: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Aggregates {
    pub instances: usize,
    pub max_machine_ratio: Option<Value>,
    pub mean_ratio: Option<Value>,
    pub max_opt_gap: Option<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BenchReport {
    pub format: &'static str,
    pub instances: Vec<InstanceReport>,
    pub aggregates: Aggregates,
    pub counterexamples: Vec<String>,
}

impl BenchReport {
    pub fn passed(&self) -> bool {
        self.counterexamples.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        let opt = |v: &Option<Value>| v.as_ref().map(|v| v.exact.clone()).unwrap_or_default();
        let rows: Vec<Vec<String>> = self
            .instances
            .iter()
            .map(|r| {
                vec![
                    r.id.clone(),
                    r.machines.to_string(),
                    r.jobs.to_string(),
                    r.lp.exact.clone(),
                    r.lp.decimal.clone(),
                    opt(&r.opt),
                    r.expected.exact.clone(),
                    r.expected.decimal.clone(),
                    r.derandomized.exact.clone(),
                    r.independent_mean.exact.clone(),
                    r.greedy.exact.clone(),
                    r.max_machine_ratio.exact.clone(),
                    r.max_machine_ratio.decimal.clone(),
                    r.makespan.exact.clone(),
                    r.max_term_load.exact.clone(),
                    r.bicriteria_bound.exact.clone(),
                    r.counterexamples.len().to_string(),
                ]
            })
            .collect();
        write_csv(
            out,
            &[
                "id",
                "machines",
                "jobs",
                "lp",
                "lp_decimal",
                "opt",
                "expected",
                "expected_decimal",
                "derandomized",
                "independent_mean",
                "greedy",
                "max_machine_ratio",
                "max_machine_ratio_decimal",
                "makespan",
                "max_term_load",
                "bicriteria_bound",
                "counterexamples",
            ],
            &rows,
        )
    }
}

fn max_of(values: impl IntoIterator<Item = Rational>) -> Rational {
    values.into_iter().max().unwrap_or_else(|| int(0))
}

/// Runs one instance through the whole pipeline. Solver errors propagate;
/// violated guarantees are collected as counterexamples.
pub fn analyze(id: &str, inst: &Instance, opts: &BenchOptions) -> Result<InstanceReport> {
    analyze_exact(id, inst, None, opts).map(|(r, _)| r)
}

/// Exact values behind a report, for aggregation.
struct Summary {
    lp: Rational,
    expected: Rational,
    opt: Option<Rational>,
    max_ratio: Rational,
}

fn analyze_exact(
    id: &str,
    inst: &Instance,
    known: Option<&ConfigSolution>,
    opts: &BenchOptions,
) -> Result<(InstanceReport, Summary)> {
    let mut bad = Vec::new();
    let (solved, lp_rounds) = match known {
        Some(_) => (None, 0),
        None => {
            let run = solve_configuration_lp(inst, &opts.colgen)?;
            let rounds = run.rounds;
            (Some(run.solution), rounds)
        }
    };
    let sol = solved.as_ref().or(known).expect("one solution source");
    let lp = sol.objective.clone();
    let x = extract_marginals(inst, sol)?;
    let z = build_buckets(inst, &x)?;
    if let Err(e) = z.check(inst, &x) {
        bad.push(e.to_string());
    }
    let d = decompose(&z)?;
    if let Err(e) = d.check(&z) {
        bad.push(e.to_string());
    }

    let lp_machine = sol.machine_costs(inst);
    let exp_machine = expected_machine_costs(&d, inst);
    let expected: Rational = exp_machine.iter().sum();
    let mut ratios = Vec::new();
    for (i, (e, l)) in exp_machine.iter().zip(&lp_machine).enumerate() {
        if !ratio_within_rounding_bound(e, l) {
            bad.push(format!(
                "machine {i}: expected cost {e} exceeds the bound times LP cost {l}"
            ));
        }
        if *l > int(0) {
            ratios.push(e / l);
        }
    }

    let m = inst.machine_count();
    let bounds: Vec<Rational> = (0..m)
        .map(|i| x.fractional_load(inst, i) + x.max_support_size(inst, i))
        .collect();
    let mut max_term_load = int(0);
    for (k, term) in d.terms.iter().enumerate() {
        for (i, load) in term_loads(inst, term, m).into_iter().enumerate() {
            if load > bounds[i] {
                bad.push(format!("term {k}: load {load} on machine {i} exceeds {}", bounds[i]));
            }
            if load > max_term_load {
                max_term_load = load;
            }
        }
    }

    let det = derandomize(&d, inst)?;
    let det_cost = assignment_cost(inst, &det)?;
    if det_cost > expected {
        bad.push(format!("derandomized cost {det_cost} exceeds expectation {expected}"));
    }
    let greedy_cost = assignment_cost(inst, &greedy(inst))?;

    let opt = if assignment_space(inst) <= opts.assignment_budget {
        let v = brute_force_opt_with_budget(inst, opts.assignment_budget)?.value;
        if lp > v {
            bad.push(format!("LP {lp} exceeds OPT {v}"));
        }
        if det_cost < v {
            bad.push(format!("derandomized cost {det_cost} is below OPT {v}"));
        }
        Some(v)
    } else {
        None
    };
    let lp_full = if column_space(inst) <= opts.column_budget {
        let v = full_config_lp_with_budget(inst, opts.column_budget)?.value;
        // with a pricing tolerance the restricted master may stop above the optimum
        if v != lp && opts.colgen.eps_price == int(0) {
            bad.push(format!("column generation LP {lp} differs from full LP {v}"));
        }
        Some(v)
    } else {
        None
    };

    let max_ratio = max_of(ratios);
    let report = InstanceReport {
        id: id.to_string(),
        machines: m,
        jobs: inst.job_count(),
        lp: Value::of(&lp),
        lp_full: lp_full.as_ref().map(Value::of),
        opt: opt.as_ref().map(Value::of),
        expected: Value::of(&expected),
        derandomized: Value::of(&det_cost),
        independent_mean: Value::of(&independent_expected_cost(inst, &x)),
        greedy: Value::of(&greedy_cost),
        max_machine_ratio: Value::of(&max_ratio),
        makespan: Value::of(&makespan(inst, &det)?),
        max_term_load: Value::of(&max_term_load),
        bicriteria_bound: Value::of(&max_of(bounds)),
        terms: d.len(),
        lp_rounds,
        counterexamples: bad,
    };
    Ok((
        report,
        Summary {
            lp,
            expected,
            opt,
            max_ratio,
        },
    ))
}

/// A solver failure, tagged with the instance it came from.
#[derive(Debug)]
pub struct BenchError {
    pub id: String,
    pub error: Error,
}

impl std::fmt::Display for BenchError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.id, self.error)
    }
}

impl std::error::Error for BenchError {}

/// Analyzes every instance (concurrently) and merges the results sorted by
/// id, ties in suite order.
pub fn run_bench(instances: &[SuiteInstance], opts: &BenchOptions) -> std::result::Result<BenchReport, BenchError> {
    let mut results = instances
        .par_iter()
        .map(|s| {
            analyze_exact(&s.id, &s.instance, s.lp.as_ref(), opts).map_err(|error| BenchError {
                id: s.id.clone(),
                error,
            })
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    results.sort_by(|(a, _), (b, _)| a.id.cmp(&b.id));
    let mut reports = Vec::with_capacity(results.len());
    let mut max_ratio: Option<Rational> = None;
    let mut ratio_sum = int(0);
    let mut ratio_count = 0i64;
    let mut max_gap: Option<Rational> = None;
    let mut counterexamples = Vec::new();
    for (r, s) in results {
        if max_ratio.as_ref().is_none_or(|m| s.max_ratio > *m) {
            max_ratio = Some(s.max_ratio.clone());
        }
        if s.lp > int(0) {
            ratio_sum += &s.expected / &s.lp;
            ratio_count += 1;
            if let Some(o) = &s.opt {
                let g = o / &s.lp;
                if max_gap.as_ref().is_none_or(|m| g > *m) {
                    max_gap = Some(g);
                }
            }
        }
        counterexamples.extend(r.counterexamples.iter().map(|c| format!("{}: {c}", r.id)));
        reports.push(r);
    }
    let mean = (ratio_count > 0).then(|| ratio_sum / int(ratio_count));
    Ok(BenchReport {
        format: "smith-sched-report v1",
        aggregates: Aggregates {
            instances: reports.len(),
            max_machine_ratio: max_ratio.as_ref().map(Value::of),
            mean_ratio: mean.as_ref().map(Value::of),
            max_opt_gap: max_gap.as_ref().map(Value::of),
        },
        instances: reports,
        counterexamples,
    })
}
