//! Ground-truth oracles for small instances.

use std::ops::{Add, Mul, Sub};

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

use crate::conflp::ConfigSolution;
use crate::error::{Error, Result};
use crate::instance::{assignment_cost, Assignment, Configuration, Instance};
use crate::rational::{self, int, Rational};
use crate::simplex::{LinearProgram, RowKind};

pub const DEFAULT_ASSIGNMENT_BUDGET: u128 = 10_000_000;
pub const DEFAULT_COLUMN_BUDGET: u128 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactResult<W> {
    pub value: Rational,
    pub witness: W,
}

/// `prod_j |eligible(j)|`, saturating.
pub fn assignment_space(inst: &Instance) -> u128 {
    inst.jobs()
        .iter()
        .fold(1u128, |acc, j| acc.saturating_mul(j.eligible.len() as u128))
}

/// `sum_i 2^|J_i|`, saturating.
pub fn column_space(inst: &Instance) -> u128 {
    (0..inst.machine_count())
        .map(|i| {
            let n = inst.eligible_jobs(i).len() as u32;
            1u128.checked_shl(n).filter(|_| n < 128).unwrap_or(u128::MAX)
        })
        .fold(0u128, u128::saturating_add)
}

pub fn brute_force_opt(inst: &Instance) -> Result<ExactResult<Assignment>> {
    brute_force_opt_with_budget(inst, DEFAULT_ASSIGNMENT_BUDGET)
}

/// Minimum-cost assignment by depth-first search over jobs in order and
/// eligible machines in ascending order. Among minimizers the witness is the
/// lexicographically least `machine_of` vector.
pub fn brute_force_opt_with_budget(inst: &Instance, budget: u128) -> Result<ExactResult<Assignment>> {
    let size = assignment_space(inst);
    if size > budget {
        return Err(Error::InstanceTooLarge {
            what: "eligible assignments",
            size,
            budget,
        });
    }
    let scale = rational::common_denominator(inst.jobs().iter().map(|j| &j.size));
    let scaled: Vec<BigInt> = inst
        .jobs()
        .iter()
        .map(|j| (&j.size * Rational::from_integer(scale.clone())).to_integer())
        .collect();
    let total: BigInt = scaled.iter().sum();

    let machine_of = if total <= BigInt::from(1u64 << 40) {
        let sizes: Vec<i128> = scaled.iter().map(|s| s.to_i128().expect("bounded")).collect();
        search(inst, &sizes)
    } else {
        let sizes: Vec<Rational> = inst.jobs().iter().map(|j| j.size.clone()).collect();
        search(inst, &sizes)
    };
    let witness = Assignment::new(machine_of);
    let value = assignment_cost(inst, &witness)?;
    Ok(ExactResult { value, witness })
}

struct Search<'a, T> {
    inst: &'a Instance,
    sizes: &'a [T],
    loads: Vec<T>,
    current: Vec<usize>,
    best: Option<(T, Vec<usize>)>,
}

impl<T> Search<'_, T>
where
    T: Clone + Ord + Zero + for<'x> Add<&'x T, Output = T> + for<'x> Sub<&'x T, Output = T>,
    for<'x> &'x T: Mul<&'x T, Output = T>,
{
    fn run(&mut self, job: usize, partial: T) {
        if let Some((b, _)) = &self.best {
            if &partial >= b {
                return;
            }
        }
        if job == self.sizes.len() {
            self.best = Some((partial, self.current.clone()));
            return;
        }
        let p = &self.sizes[job];
        for &i in &self.inst.jobs()[job].eligible {
            let grown = self.loads[i].clone() + p;
            let next = partial.clone() + &(p * &grown);
            self.loads[i] = grown;
            self.current[job] = i;
            self.run(job + 1, next);
            self.loads[i] = self.loads[i].clone() - p;
        }
    }
}

fn search<T>(inst: &Instance, sizes: &[T]) -> Vec<usize>
where
    T: Clone + Ord + Zero + for<'x> Add<&'x T, Output = T> + for<'x> Sub<&'x T, Output = T>,
    for<'x> &'x T: Mul<&'x T, Output = T>,
{
    let mut s = Search {
        inst,
        sizes,
        loads: vec![T::zero(); inst.machine_count()],
        current: vec![0; sizes.len()],
        best: None,
    };
    s.run(0, T::zero());
    s.best.expect("every job has an eligible machine").1
}

pub fn full_config_lp(inst: &Instance) -> Result<ExactResult<ConfigSolution>> {
    full_config_lp_with_budget(inst, DEFAULT_COLUMN_BUDGET)
}

/// The Configuration-LP with one column per nonempty subset of every `J_i`.
pub fn full_config_lp_with_budget(inst: &Instance, budget: u128) -> Result<ExactResult<ConfigSolution>> {
    let size = column_space(inst);
    if size > budget {
        return Err(Error::InstanceTooLarge {
            what: "configuration columns",
            size,
            budget,
        });
    }
    let m = inst.machine_count();
    let mut columns: Vec<(usize, Configuration)> = Vec::new();
    for i in 0..m {
        let jobs = inst.eligible_jobs(i);
        for mask in 1u64..(1u64 << jobs.len()) {
            let subset = jobs
                .iter()
                .enumerate()
                .filter(|(b, _)| mask >> b & 1 == 1)
                .map(|(_, &j)| j)
                .collect();
            columns.push((i, Configuration::new(subset)?));
        }
    }
    let mut lp = LinearProgram::new(columns.iter().map(|(_, c)| c.cost(inst)).collect());
    let mut job_rows = vec![Vec::new(); inst.job_count()];
    let mut machine_rows = vec![Vec::new(); m];
    for (k, (i, c)) in columns.iter().enumerate() {
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
    for ((i, c), v) in columns.into_iter().zip(sol.values) {
        if !v.is_zero() {
            per_machine[i].push((c, v));
        }
    }
    let witness = ConfigSolution::from_columns(inst, per_machine)?;
    if witness.objective != sol.objective {
        return Err(Error::Internal("LP objective does not match its witness".into()));
    }
    Ok(ExactResult {
        value: sol.objective,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::gap_instance;
    use crate::instance::Job;

    fn everywhere(m: usize, sizes: &[i64]) -> Instance {
        let jobs = sizes
            .iter()
            .enumerate()
            .map(|(j, &p)| Job::new(format!("j{j}"), int(p), (0..m).collect()).unwrap())
            .collect();
        Instance::new(m, jobs).unwrap()
    }

    #[test]
    fn gap_values() {
        let inst = gap_instance();
        assert_eq!(brute_force_opt(&inst).unwrap().value, int(26));
        assert_eq!(full_config_lp(&inst).unwrap().value, int(24));
    }

    #[test]
    fn small_examples() {
        assert_eq!(brute_force_opt(&everywhere(2, &[2, 2])).unwrap().value, int(8));
        assert_eq!(brute_force_opt(&everywhere(1, &[1, 2])).unwrap().value, int(7));
        assert_eq!(full_config_lp(&everywhere(1, &[1, 2])).unwrap().value, int(7));
    }

    #[test]
    fn witness_is_lexicographically_least() {
        let r = brute_force_opt(&everywhere(2, &[2, 2])).unwrap();
        assert_eq!(r.witness.machine_of, vec![0, 1]);
    }

    #[test]
    fn fractional_sizes_use_exact_costs() {
        let inst = Instance::new(
            2,
            vec![
                Job::new("a", crate::rational::frac(1, 3), vec![0, 1]).unwrap(),
                Job::new("b", crate::rational::frac(1, 2), vec![0, 1]).unwrap(),
            ],
        )
        .unwrap();
        let r = brute_force_opt(&inst).unwrap();
        assert_eq!(r.value, crate::rational::frac(1, 9) + crate::rational::frac(1, 4));
    }

    #[test]
    fn budgets_are_enforced() {
        let inst = everywhere(3, &[1; 8]);
        assert!(matches!(
            brute_force_opt_with_budget(&inst, 100),
            Err(Error::InstanceTooLarge { size: 6561, .. })
        ));
        assert!(matches!(
            full_config_lp_with_budget(&inst, 100),
            Err(Error::InstanceTooLarge { size: 768, .. })
        ));
    }
}
