//! Configuration-LP solutions and column generation.
//!
//! The restricted master is solved exactly with [`crate::simplex`]; the
//! pricing problem for machine `i` is `min_C cost(C) - sum_{j in C} u_j` over
//! `C` in `J_i`, solved exactly by a 0/1 knapsack-style DP over total size.

use std::collections::HashSet;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::instance::{Configuration, Instance};
use crate::rational::{self, int, Rational};
use crate::rounding::greedy;
use crate::simplex::{LinearProgram, RowKind};

/// Sparse `x_ij`: for each machine, `(job, value)` pairs with positive value,
/// sorted by job.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Marginals {
    rows: Vec<Vec<(usize, Rational)>>,
    job_count: usize,
}

impl Marginals {
    /// From a dense `machines x jobs` matrix; zero entries are dropped.
    pub fn from_dense(dense: Vec<Vec<Rational>>, job_count: usize) -> Self {
        let rows = dense
            .into_iter()
            .map(|row| row.into_iter().enumerate().filter(|(_, v)| !v.is_zero()).collect())
            .collect();
        Self { rows, job_count }
    }

    pub fn from_rows(rows: Vec<Vec<(usize, Rational)>>, job_count: usize) -> Self {
        let rows = rows
            .into_iter()
            .map(|mut r| {
                r.retain(|(_, v)| !v.is_zero());
                r.sort_by_key(|(j, _)| *j);
                r
            })
            .collect();
        Self { rows, job_count }
    }

    pub fn machine_count(&self) -> usize {
        self.rows.len()
    }

    pub fn job_count(&self) -> usize {
        self.job_count
    }

    pub fn row(&self, machine: usize) -> &[(usize, Rational)] {
        &self.rows[machine]
    }

    pub fn get(&self, machine: usize, job: usize) -> Rational {
        self.rows[machine]
            .binary_search_by_key(&job, |(j, _)| *j)
            .map(|k| self.rows[machine][k].1.clone())
            .unwrap_or_else(|_| Rational::zero())
    }

    /// `sum_j x_ij`.
    pub fn machine_total(&self, machine: usize) -> Rational {
        self.rows[machine].iter().map(|(_, v)| v).sum()
    }

    /// `sum_i x_ij` for every job.
    pub fn job_totals(&self) -> Vec<Rational> {
        let mut totals = vec![Rational::zero(); self.job_count];
        for row in &self.rows {
            for (j, v) in row {
                totals[*j] += v;
            }
        }
        totals
    }

    /// `sum_j x_ij p_j`.
    pub fn fractional_load(&self, inst: &Instance, machine: usize) -> Rational {
        self.rows[machine].iter().map(|(j, v)| v * inst.size(*j)).sum()
    }

    /// `max { p_j : x_ij > 0 }`, zero if the machine has no support.
    pub fn max_support_size(&self, inst: &Instance, machine: usize) -> Rational {
        self.rows[machine]
            .iter()
            .map(|(j, _)| inst.size(*j).clone())
            .max()
            .unwrap_or_else(Rational::zero)
    }

    /// Checks `0 <= x_ij <= 1`, support on eligible pairs and unit job sums.
    pub fn validate(&self, inst: &Instance) -> Result<()> {
        if self.rows.len() != inst.machine_count() || self.job_count != inst.job_count() {
            return Err(Error::InvalidMarginals("dimensions do not match the instance".into()));
        }
        for (i, row) in self.rows.iter().enumerate() {
            for (j, v) in row {
                if *j >= self.job_count || v.is_negative() || v > &int(1) {
                    return Err(Error::InvalidMarginals(format!("x[{i}][{j}] = {v} is out of range")));
                }
                if !inst.jobs()[*j].is_eligible(i) {
                    return Err(Error::InvalidMarginals(format!(
                        "x[{i}][{j}] = {v} but job {j} cannot run on machine {i}"
                    )));
                }
            }
        }
        for (j, total) in self.job_totals().iter().enumerate() {
            if total != &int(1) {
                return Err(Error::InvalidMarginals(format!(
                    "job {j} has total marginal {total}, expected 1"
                )));
            }
        }
        Ok(())
    }
}

/// A sparse Configuration-LP solution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigSolution {
    /// Per machine, configurations with positive weight.
    pub columns: Vec<Vec<(Configuration, Rational)>>,
    pub objective: Rational,
    pub marginals: Marginals,
}

impl ConfigSolution {
    /// Validates feasibility exactly and derives objective and marginals.
    /// Repeated configurations on one machine are merged; zero weights and
    /// empty configurations are dropped.
    pub fn from_columns(inst: &Instance, columns: Vec<Vec<(Configuration, Rational)>>) -> Result<Self> {
        if columns.len() != inst.machine_count() {
            return Err(Error::InvalidInput(format!(
                "solution has {} machines, instance has {}",
                columns.len(),
                inst.machine_count()
            )));
        }
        let mut merged = Vec::with_capacity(columns.len());
        for (i, list) in columns.into_iter().enumerate() {
            let mut out: Vec<(Configuration, Rational)> = Vec::new();
            let mut total = Rational::zero();
            for (config, w) in list {
                if w.is_negative() {
                    return Err(Error::InvalidInput(format!("negative weight {w} on machine {i}")));
                }
                if let Some(&j) = config
                    .jobs()
                    .iter()
                    .find(|&&j| j >= inst.job_count() || !inst.jobs()[j].is_eligible(i))
                {
                    return Err(Error::InvalidInput(format!(
                        "configuration {config} on machine {i} contains job {j}, which is not eligible there"
                    )));
                }
                total += &w;
                if w.is_zero() || config.is_empty() {
                    continue;
                }
                match out.iter_mut().find(|(c, _)| *c == config) {
                    Some((_, acc)) => *acc += w,
                    None => out.push((config, w)),
                }
            }
            if total > int(1) {
                return Err(Error::InvalidInput(format!(
                    "machine {i} has total configuration weight {total} > 1"
                )));
            }
            merged.push(out);
        }
        let marginals = marginals_of(&merged, inst.job_count());
        marginals.validate(inst)?;
        let objective = merged.iter().flatten().map(|(c, w)| c.cost(inst) * w).sum();
        Ok(Self {
            columns: merged,
            objective,
            marginals,
        })
    }

    pub fn machine_count(&self) -> usize {
        self.columns.len()
    }

    pub fn column_count(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    /// `sum_C y_iC cost(C)` for every machine.
    pub fn machine_costs(&self, inst: &Instance) -> Vec<Rational> {
        self.columns
            .iter()
            .map(|list| list.iter().map(|(c, w)| c.cost(inst) * w).sum())
            .collect()
    }

    /// Re-checks every invariant from scratch.
    pub fn check(&self, inst: &Instance) -> Result<()> {
        let fresh = Self::from_columns(inst, self.columns.clone())?;
        if fresh.objective != self.objective {
            return Err(Error::Internal(format!(
                "stored objective {} differs from recomputed {}",
                self.objective, fresh.objective
            )));
        }
        if fresh.marginals != self.marginals {
            return Err(Error::Internal("stored marginals are stale".into()));
        }
        Ok(())
    }
}

fn marginals_of(columns: &[Vec<(Configuration, Rational)>], job_count: usize) -> Marginals {
    let rows = columns
        .iter()
        .map(|list| {
            let mut acc: Vec<Rational> = vec![Rational::zero(); job_count];
            for (c, w) in list {
                for &j in c.jobs() {
                    acc[j] += w;
                }
            }
            acc.into_iter().enumerate().filter(|(_, v)| !v.is_zero()).collect()
        })
        .collect();
    Marginals { rows, job_count }
}

/// `x_ij = sum_{C containing j} y_iC`, recomputed from the columns and
/// checked to sum to one per job.
pub fn extract_marginals(inst: &Instance, sol: &ConfigSolution) -> Result<Marginals> {
    let x = marginals_of(&sol.columns, inst.job_count());
    x.validate(inst)
        .map_err(|e| Error::Precondition(format!("infeasible solution: {e}")))?;
    Ok(x)
}

/// Dual values of the restricted master: `u` on the job equalities and
/// `v <= 0` on the machine inequalities.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Duals {
    pub u: Vec<Rational>,
    pub v: Vec<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Priced {
    pub config: Configuration,
    /// `cost(C) - sum_{j in C} u_j` (the machine dual is not included).
    pub value: Rational,
}

/// Largest DP table (sum of scaled sizes) that pricing will allocate.
pub const PRICING_TABLE_LIMIT: usize = 1 << 22;

#[derive(Clone)]
struct DpState {
    value: Rational,
    jobs: Vec<usize>,
}

impl DpState {
    fn key(&self) -> (&Rational, usize, &[usize]) {
        (&self.value, self.jobs.len(), &self.jobs)
    }
}

/// Exact pricing for one machine. `jobs` lists `(job index, size)` for the
/// jobs the machine may process; `u` is indexed by job. Ties prefer smaller
/// configurations, then lexicographically smaller job lists.
pub fn price_machine(jobs: &[(usize, Rational)], u: &[Rational]) -> Result<Priced> {
    if let Some((j, p)) = jobs.iter().find(|(_, p)| !p.is_positive()) {
        return Err(Error::InvalidInput(format!("job {j} has nonpositive size {p}")));
    }
    let mut order: Vec<&(usize, Rational)> = jobs.iter().collect();
    order.sort_by_key(|(j, _)| *j);

    let scale = rational::common_denominator(order.iter().map(|(_, p)| p));
    let mut scaled = Vec::with_capacity(order.len());
    let mut capacity = 0usize;
    for (j, p) in &order {
        let s = (p * Rational::from_integer(scale.clone())).to_integer();
        let s = s
            .to_usize()
            .filter(|&s| s <= PRICING_TABLE_LIMIT)
            .ok_or_else(|| Error::InvalidInput(format!("scaled size of job {j} is too large for pricing")))?;
        capacity += s;
        if capacity > PRICING_TABLE_LIMIT {
            return Err(Error::InvalidInput(format!(
                "pricing table would need more than {PRICING_TABLE_LIMIT} entries"
            )));
        }
        scaled.push(s);
    }

    let half = Rational::new(BigInt::from(1), BigInt::from(2));
    let mut table: Vec<Option<DpState>> = vec![None; capacity + 1];
    table[0] = Some(DpState {
        value: Rational::zero(),
        jobs: Vec::new(),
    });
    let mut reach = 0usize;
    for ((j, p), &s) in order.iter().zip(&scaled) {
        let gain = p * p * &half - &u[*j];
        for total in (s..=reach + s).rev() {
            let Some(prev) = &table[total - s] else {
                continue;
            };
            let mut cand = prev.clone();
            cand.value += &gain;
            cand.jobs.push(*j);
            let better = match &table[total] {
                None => true,
                Some(cur) => cand.key() < cur.key(),
            };
            if better {
                table[total] = Some(cand);
            }
        }
        reach += s;
    }

    let scale = Rational::from_integer(scale);
    let mut best: Option<(Rational, DpState)> = None;
    for (total, state) in table.into_iter().enumerate() {
        let Some(state) = state else { continue };
        let size = Rational::from_integer(BigInt::from(total)) / &scale;
        let value = &size * &size * &half + &state.value;
        let better = match &best {
            None => true,
            Some((bv, bs)) => (&value, state.jobs.len(), &state.jobs) < (bv, bs.jobs.len(), &bs.jobs),
        };
        if better {
            best = Some((value, state));
        }
    }
    let (value, state) = best.expect("the empty configuration is always reachable");
    Ok(Priced {
        config: Configuration::new(state.jobs)?,
        value,
    })
}

#[derive(Debug, Clone)]
pub struct ColGenOptions {
    /// Columns are added only when their reduced cost is below `-eps_price`.
    pub eps_price: Rational,
    pub max_rounds: usize,
}

impl Default for ColGenOptions {
    fn default() -> Self {
        Self {
            eps_price: Rational::zero(),
            max_rounds: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ColGenRun {
    pub solution: ConfigSolution,
    /// Restricted master solves performed.
    pub rounds: usize,
    /// Every column the master held at the end, per machine.
    pub pool: Vec<Vec<Configuration>>,
    pub duals: Duals,
}

impl ColGenRun {
    pub fn pool_size(&self) -> usize {
        self.pool.iter().map(Vec::len).sum()
    }
}

struct Master {
    columns: Vec<(usize, Configuration)>,
    seen: HashSet<(usize, Configuration)>,
}

impl Master {
    fn add(&mut self, machine: usize, config: Configuration) -> bool {
        if config.is_empty() || !self.seen.insert((machine, config.clone())) {
            return false;
        }
        self.columns.push((machine, config));
        true
    }

    fn solve(&self, inst: &Instance) -> Result<(ConfigSolution, Duals)> {
        let (n, m) = (inst.job_count(), inst.machine_count());
        let costs = self.columns.iter().map(|(_, c)| c.cost(inst)).collect();
        let mut lp = LinearProgram::new(costs);
        let mut job_rows = vec![Vec::new(); n];
        let mut machine_rows = vec![Vec::new(); m];
        for (k, (i, c)) in self.columns.iter().enumerate() {
            machine_rows[*i].push((k, int(1)));
            for &j in c.jobs() {
                job_rows[j].push((k, int(1)));
            }
        }
        for row in job_rows {
            lp.add_row(row, RowKind::Equal, int(1));
        }
        for row in machine_rows {
            lp.add_row(row, RowKind::AtMost, int(1));
        }
        let sol = lp.solve()?;
        let mut per_machine = vec![Vec::new(); m];
        for (k, (i, c)) in self.columns.iter().enumerate() {
            if sol.values[k].is_positive() {
                per_machine[*i].push((c.clone(), sol.values[k].clone()));
            }
        }
        let solution = ConfigSolution::from_columns(inst, per_machine)?;
        if solution.objective != sol.objective {
            return Err(Error::Internal("master objective mismatch".into()));
        }
        let mut duals = sol.duals;
        let v = duals.split_off(n);
        Ok((solution, Duals { u: duals, v }))
    }
}

/// Column generation for the Configuration-LP.
///
/// The master starts from every singleton `(machine, eligible job)` and the
/// configurations of the greedy schedule, so it is feasible from round one.
/// Each round solves the master, prices every machine, and adds the best
/// column of each machine whose reduced cost is below `-eps_price`.
pub fn solve_configuration_lp(inst: &Instance, opts: &ColGenOptions) -> Result<ColGenRun> {
    if opts.eps_price.is_negative() {
        return Err(Error::InvalidInput("eps_price must be nonnegative".into()));
    }
    let m = inst.machine_count();
    let mut master = Master {
        columns: Vec::new(),
        seen: HashSet::new(),
    };
    for i in 0..m {
        for j in inst.eligible_jobs(i) {
            master.add(i, Configuration::new(vec![j])?);
        }
    }
    for (i, c) in greedy(inst).configurations(m).into_iter().enumerate() {
        master.add(i, c);
    }
    let machine_jobs: Vec<Vec<(usize, Rational)>> = (0..m)
        .map(|i| {
            inst.eligible_jobs(i)
                .into_iter()
                .map(|j| (j, inst.size(j).clone()))
                .collect()
        })
        .collect();

    let mut best: Option<ConfigSolution> = None;
    for round in 1..=opts.max_rounds {
        let (solution, duals) = master.solve(inst)?;
        best = Some(solution.clone());
        let priced: Vec<Result<Priced>> = machine_jobs
            .par_iter()
            .map(|jobs| price_machine(jobs, &duals.u))
            .collect();
        let mut added = false;
        for (i, p) in priced.into_iter().enumerate() {
            let p = p?;
            let reduced = &p.value - &duals.v[i];
            if reduced < -opts.eps_price.clone() {
                added |= master.add(i, p.config);
            }
        }
        if !added {
            let mut pool = vec![Vec::new(); m];
            for (i, c) in &master.columns {
                pool[*i].push(c.clone());
            }
            return Ok(ColGenRun {
                solution,
                rounds: round,
                pool,
                duals,
            });
        }
    }
    Err(Error::Convergence {
        rounds: opts.max_rounds,
        best: Box::new(best.expect("at least one round ran")),
    })
}
