use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use smith_sched::cfp::maximize_h;
use smith_sched::conflp::{extract_marginals, solve_configuration_lp, ColGenOptions, ConfigSolution};
use smith_sched::exact::{
    brute_force_opt_with_budget, full_config_lp_with_budget, DEFAULT_ASSIGNMENT_BUDGET, DEFAULT_COLUMN_BUDGET,
};
use smith_sched::generators::{gap_instance, random_instance, tight_instance, RandomSpec, TightSpec};
use smith_sched::instance::{parse_instance, serialize_instance};
use smith_sched::rational::{self, int, ratio_within_rounding_bound};
use smith_sched::rng::Stream;
use smith_sched::rounding::{build_buckets, decompose, derandomize, expected_machine_costs, sample_from, term_loads};
use smith_sched::{assignment_cost, makespan, Error, Instance, Rational};
use smith_sched_cli::report::{value_rows, write_csv};
use smith_sched_cli::{load_suite, parse_suite, run_bench, verify, BenchOptions, Exit, Failure, Value};

#[derive(Parser)]
#[command(
    name = "smith-sched",
    version,
    about = "Scheduling with w_j = p_j on unrelated machines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an instance file.
    Generate {
        #[command(subcommand)]
        kind: GenerateKind,
        #[arg(long, global = true)]
        out: Option<PathBuf>,
    },
    /// Brute-force optimum and full-enumeration LP, as JSON.
    Exact {
        instance: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ASSIGNMENT_BUDGET)]
        budget: u128,
        #[arg(long, default_value_t = DEFAULT_COLUMN_BUDGET)]
        column_budget: u128,
        /// Skip the full-enumeration LP.
        #[arg(long)]
        no_lp: bool,
    },
    /// Solve the Configuration-LP by column generation.
    SolveLp {
        instance: PathBuf,
        #[command(flatten)]
        lp: LpArgs,
        /// Write the final column pool and the solution weights here.
        #[arg(long)]
        dump_columns: Option<PathBuf>,
    },
    /// Round the LP solution and report costs.
    Round {
        instance: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
        trials: u32,
        #[arg(long)]
        derandomize: bool,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        report: Format,
        #[command(flatten)]
        lp: LpArgs,
    },
    /// Run a suite of instances and write a report.
    Bench {
        #[arg(long)]
        suite: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Defaults to the extension of `--out`, else JSON.
        #[arg(long, value_enum)]
        format: Option<Format>,
        #[command(flatten)]
        lp: LpArgs,
    },
    /// Push random function pairs through every transformation and check
    /// each property.
    CfpVerify {
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_parser = parse_rational)]
        eps_liquid: Option<Rational>,
    },
    /// Function-pair analysis tools.
    Cfp {
        #[command(subcommand)]
        command: CfpCommand,
    },
    /// Certify the 13/12 integrality gap.
    GapCheck,
}

#[derive(Subcommand)]
enum GenerateKind {
    Gap,
    Random {
        #[arg(long)]
        machines: usize,
        #[arg(long)]
        jobs: usize,
        #[arg(long, default_value_t = 5)]
        max_size: u64,
        #[arg(long, default_value = "1", value_parser = parse_rational)]
        eligibility_prob: Rational,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    Tight {
        #[arg(long, default_value_t = 100)]
        k: usize,
        #[arg(long, default_value = "29/100", value_parser = parse_rational)]
        t: Rational,
        #[arg(long, default_value = "1/2", value_parser = parse_rational)]
        gamma: Rational,
        #[arg(long, default_value = "1/5", value_parser = parse_rational)]
        lambda: Rational,
        #[arg(long, default_value = "1/355", value_parser = parse_rational)]
        eps: Rational,
    },
}

#[derive(Subcommand)]
enum CfpCommand {
    /// Maximize the final-form ratio function over a grid.
    MaxH {
        #[arg(long, default_value = "1/1000", value_parser = parse_rational)]
        grid_step: Rational,
    },
}

#[derive(clap::Args)]
struct LpArgs {
    #[arg(long, default_value = "0", value_parser = parse_rational)]
    eps_price: Rational,
    #[arg(long, default_value_t = 10_000)]
    max_rounds: usize,
}

impl LpArgs {
    fn options(&self) -> ColGenOptions {
        ColGenOptions {
            eps_price: self.eps_price.clone(),
            max_rounds: self.max_rounds,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn parse_rational(s: &str) -> Result<Rational, String> {
    rational::parse(s).map_err(|e| e.to_string())
}

fn read_instance(path: &Path) -> Result<Instance, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    parse_instance(&text).map_err(|e| Failure {
        message: format!("{}: {e}", path.display()),
        ..Failure::from(e)
    })
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::usage(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

#[derive(Serialize)]
struct ColumnOut {
    machine: usize,
    jobs: Vec<usize>,
    weight: Value,
}

fn columns_out(sol: &ConfigSolution) -> Vec<ColumnOut> {
    sol.columns
        .iter()
        .enumerate()
        .flat_map(|(machine, cols)| {
            cols.iter().map(move |(c, w)| ColumnOut {
                machine,
                jobs: c.jobs().to_vec(),
                weight: Value::of(w),
            })
        })
        .collect()
}

fn generate(kind: &GenerateKind, out: Option<&Path>) -> Result<Exit, Failure> {
    let inst = match kind {
        GenerateKind::Gap => gap_instance(),
        GenerateKind::Random {
            machines,
            jobs,
            max_size,
            eligibility_prob,
            seed,
        } => random_instance(&RandomSpec {
            machines: *machines,
            jobs: *jobs,
            max_size: *max_size,
            eligibility_prob: eligibility_prob.clone(),
            seed: *seed,
        })?,
        GenerateKind::Tight {
            k,
            t,
            gamma,
            lambda,
            eps,
        } => tight_instance(&TightSpec {
            k: *k,
            t_tilde: t.clone(),
            gamma_tilde: gamma.clone(),
            lambda_tilde: lambda.clone(),
            eps: eps.clone(),
        })?,
    };
    emit(out, &(serialize_instance(&inst) + "\n"))?;
    Ok(Exit::Ok)
}

fn exact(path: &Path, budget: u128, column_budget: u128, no_lp: bool) -> Result<Exit, Failure> {
    #[derive(Serialize)]
    struct Opt {
        value: Value,
        witness: Vec<usize>,
    }
    #[derive(Serialize)]
    struct Lp {
        value: Value,
        columns: Vec<ColumnOut>,
    }
    #[derive(Serialize)]
    struct Out {
        opt: Opt,
        lp: Option<Lp>,
    }
    let inst = read_instance(path)?;
    let opt = brute_force_opt_with_budget(&inst, budget)?;
    let lp = if no_lp {
        None
    } else {
        let r = full_config_lp_with_budget(&inst, column_budget)?;
        Some(Lp {
            value: Value::of(&r.value),
            columns: columns_out(&r.witness),
        })
    };
    let out = Out {
        opt: Opt {
            value: Value::of(&opt.value),
            witness: opt.witness.machine_of,
        },
        lp,
    };
    emit(None, &json(&out))?;
    Ok(Exit::Ok)
}

fn solve_lp(path: &Path, lp: &LpArgs, dump: Option<&Path>) -> Result<Exit, Failure> {
    #[derive(Serialize)]
    struct Marginal {
        machine: usize,
        job: usize,
        value: Value,
    }
    #[derive(Serialize)]
    struct Out {
        objective: Value,
        columns: usize,
        pool_size: usize,
        rounds: usize,
        marginals: Vec<Marginal>,
    }
    #[derive(Serialize)]
    struct Dump {
        pool: Vec<(usize, Vec<usize>)>,
        solution: Vec<ColumnOut>,
    }
    let inst = read_instance(path)?;
    let run = solve_configuration_lp(&inst, &lp.options())?;
    let x = extract_marginals(&inst, &run.solution)?;
    let marginals = (0..x.machine_count())
        .flat_map(|i| {
            x.row(i).iter().map(move |(j, v)| Marginal {
                machine: i,
                job: *j,
                value: Value::of(v),
            })
        })
        .collect();
    if let Some(p) = dump {
        let pool = run
            .pool
            .iter()
            .enumerate()
            .flat_map(|(i, cs)| cs.iter().map(move |c| (i, c.jobs().to_vec())))
            .collect();
        let d = Dump {
            pool,
            solution: columns_out(&run.solution),
        };
        emit(Some(p), &json(&d))?;
    }
    let out = Out {
        objective: Value::of(&run.solution.objective),
        columns: run.solution.column_count(),
        pool_size: run.pool_size(),
        rounds: run.rounds,
        marginals,
    };
    emit(None, &json(&out))?;
    Ok(Exit::Ok)
}

#[derive(Serialize)]
struct MachineRow {
    machine: usize,
    lp: Value,
    expected: Value,
    ratio: Option<Value>,
    bicriteria_bound: Value,
}

#[derive(Serialize)]
struct TrialRow {
    trial: u32,
    cost: Value,
    makespan: Value,
}

#[derive(Serialize)]
struct RoundReport {
    seed: u64,
    lp: Value,
    expected: Value,
    terms: usize,
    machines: Vec<MachineRow>,
    trials: Vec<TrialRow>,
    sampled_mean: Value,
    derandomized: Option<TrialRow>,
    max_term_load: Value,
    violations: Vec<String>,
}

fn round(path: &Path, seed: u64, trials: u32, derand: bool, format: Format, lp: &LpArgs) -> Result<Exit, Failure> {
    let inst = read_instance(path)?;
    let run = solve_configuration_lp(&inst, &lp.options())?;
    let sol = &run.solution;
    let x = extract_marginals(&inst, sol)?;
    let z = build_buckets(&inst, &x)?;
    let d = decompose(&z)?;
    let mut violations = Vec::new();
    for check in [z.check(&inst, &x), d.check(&z)] {
        if let Err(e) = check {
            violations.push(e.to_string());
        }
    }
    let m = inst.machine_count();
    let lp_costs = sol.machine_costs(&inst);
    let exp_costs = expected_machine_costs(&d, &inst);
    let bounds: Vec<Rational> = (0..m)
        .map(|i| x.fractional_load(&inst, i) + x.max_support_size(&inst, i))
        .collect();
    let machines = (0..m)
        .map(|i| {
            if !ratio_within_rounding_bound(&exp_costs[i], &lp_costs[i]) {
                violations.push(format!("machine {i}: expected cost exceeds the bound"));
            }
            MachineRow {
                machine: i,
                lp: Value::of(&lp_costs[i]),
                expected: Value::of(&exp_costs[i]),
                ratio: (lp_costs[i] > int(0)).then(|| Value::of(&(&exp_costs[i] / &lp_costs[i]))),
                bicriteria_bound: Value::of(&bounds[i]),
            }
        })
        .collect();
    let mut max_term_load = int(0);
    for (k, term) in d.terms.iter().enumerate() {
        for (i, load) in term_loads(&inst, term, m).into_iter().enumerate() {
            if load > bounds[i] {
                violations.push(format!("term {k}: machine {i} load {load} exceeds {}", bounds[i]));
            }
            max_term_load = max_term_load.max(load);
        }
    }
    let row = |trial: u32, a: &smith_sched::Assignment| -> Result<TrialRow, Error> {
        Ok(TrialRow {
            trial,
            cost: Value::of(&assignment_cost(&inst, a)?),
            makespan: Value::of(&makespan(&inst, a)?),
        })
    };
    let mut stream = Stream::new(seed);
    let mut total = int(0);
    let mut rows = Vec::with_capacity(trials as usize);
    for t in 0..trials {
        let a = sample_from(&d, &mut stream);
        total += assignment_cost(&inst, &a)?;
        rows.push(row(t, &a)?);
    }
    let derandomized = if derand {
        Some(row(0, &derandomize(&d, &inst)?)?)
    } else {
        None
    };
    let expected: Rational = exp_costs.iter().sum();
    let report = RoundReport {
        seed,
        lp: Value::of(&sol.objective),
        expected: Value::of(&expected),
        terms: d.len(),
        machines,
        trials: rows,
        sampled_mean: Value::of(&(total / int(i64::from(trials)))),
        derandomized,
        max_term_load: Value::of(&max_term_load),
        violations,
    };
    match format {
        Format::Json => emit(None, &json(&report))?,
        Format::Csv => {
            let mut named: Vec<(String, &Value)> = vec![
                ("lp".into(), &report.lp),
                ("expected".into(), &report.expected),
                ("sampled_mean".into(), &report.sampled_mean),
                ("max_term_load".into(), &report.max_term_load),
            ];
            if let Some(r) = &report.derandomized {
                named.push(("derandomized_cost".into(), &r.cost));
                named.push(("derandomized_makespan".into(), &r.makespan));
            }
            for r in &report.machines {
                named.push((format!("machine{}_lp", r.machine), &r.lp));
                named.push((format!("machine{}_expected", r.machine), &r.expected));
                named.push((format!("machine{}_bicriteria_bound", r.machine), &r.bicriteria_bound));
            }
            for r in &report.trials {
                named.push((format!("trial{}_cost", r.trial), &r.cost));
                named.push((format!("trial{}_makespan", r.trial), &r.makespan));
            }
            let rows = value_rows(named.iter().map(|(k, v)| (k.as_str(), *v)));
            let mut buf = Vec::new();
            write_csv(&mut buf, &["field", "exact", "decimal"], &rows)?;
            emit(None, &String::from_utf8(buf).expect("csv is utf-8"))?;
        }
    }
    Ok(if report.violations.is_empty() {
        Exit::Ok
    } else {
        Exit::Violation
    })
}

fn bench(suite: &Path, out: Option<&Path>, format: Option<Format>, lp: &LpArgs) -> Result<Exit, Failure> {
    let text = std::fs::read_to_string(suite).map_err(|e| Failure::usage(format!("{}: {e}", suite.display())))?;
    let entries = parse_suite(&text)?;
    let base = suite.parent().unwrap_or(Path::new("."));
    let instances = load_suite(&entries, base)?;
    let opts = BenchOptions {
        colgen: lp.options(),
        ..BenchOptions::default()
    };
    let report = run_bench(&instances, &opts).map_err(|e| Failure {
        message: e.to_string(),
        ..Failure::from(e.error)
    })?;
    let format = format.unwrap_or(match out.and_then(Path::extension) {
        Some(ext) if ext == "csv" => Format::Csv,
        _ => Format::Json,
    });
    let text = match format {
        Format::Json => report.to_json() + "\n",
        Format::Csv => {
            let mut buf = Vec::new();
            report.write_csv(&mut buf)?;
            String::from_utf8(buf).expect("csv is utf-8")
        }
    };
    emit(out, &text)?;
    for c in &report.counterexamples {
        eprintln!("counterexample: {c}");
    }
    Ok(if report.passed() { Exit::Ok } else { Exit::Violation })
}

fn cfp_verify(trials: usize, seed: u64, eps: Option<Rational>) -> Result<Exit, Failure> {
    let report = verify(trials, seed, eps);
    emit(None, &json(&report))?;
    Ok(if report.passed() { Exit::Ok } else { Exit::Violation })
}

fn max_h(step: &Rational) -> Result<Exit, Failure> {
    #[derive(Serialize)]
    struct Out {
        grid_step: Value,
        grid_points: u64,
        grid_max: f64,
        max: Value,
        t: Value,
        gamma: Value,
        lambda: Value,
    }
    let m = maximize_h(step)?;
    let out = Out {
        grid_step: Value::of(step),
        grid_points: m.grid_points,
        grid_max: m.grid_value,
        max: Value::of(&m.value),
        t: Value::of(&m.t),
        gamma: Value::of(&m.gamma),
        lambda: Value::of(&m.lambda),
    };
    emit(None, &json(&out))?;
    Ok(Exit::Ok)
}

fn gap_check() -> Result<Exit, Failure> {
    let inst = gap_instance();
    let opt = brute_force_opt_with_budget(&inst, DEFAULT_ASSIGNMENT_BUDGET)?.value;
    let full = full_config_lp_with_budget(&inst, DEFAULT_COLUMN_BUDGET)?.value;
    let colgen = solve_configuration_lp(&inst, &ColGenOptions::default())?
        .solution
        .objective;
    let gap = &opt / &full;
    println!("OPT={opt}");
    println!("LP={full}");
    println!("gap={gap} ({})", rational::decimal(&gap));
    if opt != int(26) || full != int(24) || colgen != full {
        return Err(Failure::violation(format!(
            "expected OPT=26 and LP=24 from both LP solvers, got {opt}, {full} and {colgen}"
        )));
    }
    Ok(Exit::Ok)
}

fn run(cli: Cli) -> Result<Exit, Failure> {
    match &cli.command {
        Command::Generate { kind, out } => generate(kind, out.as_deref()),
        Command::Exact {
            instance,
            budget,
            column_budget,
            no_lp,
        } => exact(instance, *budget, *column_budget, *no_lp),
        Command::SolveLp {
            instance,
            lp,
            dump_columns,
        } => solve_lp(instance, lp, dump_columns.as_deref()),
        Command::Round {
            instance,
            seed,
            trials,
            derandomize,
            report,
            lp,
        } => round(instance, *seed, *trials, *derandomize, *report, lp),
        Command::Bench { suite, out, format, lp } => bench(suite, out.as_deref(), *format, lp),
        Command::CfpVerify {
            trials,
            seed,
            eps_liquid,
        } => cfp_verify(*trials, *seed, eps_liquid.clone()),
        Command::Cfp {
            command: CfpCommand::MaxH { grid_step },
        } => max_h(grid_step),
        Command::GapCheck => gap_check(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { Exit::Usage as u8 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(exit) => ExitCode::from(exit as u8),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.exit as u8)
        }
    }
}
