//! The bucket rounding algorithm and two baselines.

mod buckets;
mod decompose;

pub use buckets::{build_buckets, BucketId, BucketMatching};
pub use decompose::{decompose, term_loads, MatchingDecomposition, Term};

use num_traits::Zero;
use rayon::prelude::*;

use crate::conflp::Marginals;
use crate::error::Result;
use crate::instance::{assignment_cost, Assignment, Instance};
use crate::rational::Rational;
use crate::rng::Stream;

/// Draws term `t` with probability `lambda_t` by inverse CDF against one
/// uniform rational from the stream seeded with `seed`.
pub fn sample(d: &MatchingDecomposition, seed: u64) -> Assignment {
    sample_from(d, &mut Stream::new(seed))
}

pub fn sample_from(d: &MatchingDecomposition, stream: &mut Stream) -> Assignment {
    d.terms[sample_index(d, stream)].assignment()
}

pub fn sample_index(d: &MatchingDecomposition, stream: &mut Stream) -> usize {
    let u = stream.unit();
    let mut acc = Rational::zero();
    for (k, t) in d.terms.iter().enumerate() {
        acc += &t.lambda;
        if u < acc {
            return k;
        }
    }
    d.terms.len() - 1
}

/// Cost of every term, in order.
pub fn term_costs(d: &MatchingDecomposition, inst: &Instance) -> Result<Vec<Rational>> {
    d.terms
        .par_iter()
        .map(|t| assignment_cost(inst, &t.assignment()))
        .collect()
}

/// The cheapest term, first one on ties.
pub fn derandomize(d: &MatchingDecomposition, inst: &Instance) -> Result<Assignment> {
    let costs = term_costs(d, inst)?;
    let mut best = 0;
    for (k, c) in costs.iter().enumerate() {
        if c < &costs[best] {
            best = k;
        }
    }
    Ok(d.terms[best].assignment())
}

pub fn expected_cost(d: &MatchingDecomposition, inst: &Instance) -> Result<Rational> {
    Ok(term_costs(d, inst)?
        .iter()
        .zip(&d.terms)
        .map(|(c, t)| c * &t.lambda)
        .sum())
}

/// `sum_t lambda_t cost(jobs of machine i in term t)` for every machine.
pub fn expected_machine_costs(d: &MatchingDecomposition, inst: &Instance) -> Vec<Rational> {
    let m = inst.machine_count();
    d.terms
        .par_iter()
        .map(|t| {
            t.assignment()
                .machine_costs(inst)
                .into_iter()
                .map(|c| c * &t.lambda)
                .collect::<Vec<_>>()
        })
        .reduce(
            || vec![Rational::zero(); m],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        )
}

/// Each job independently goes to machine `i` with probability `x_ij`,
/// machines tried in ascending order against one uniform draw per job.
pub fn independent_round(inst: &Instance, x: &Marginals, seed: u64) -> Result<Assignment> {
    x.validate(inst)?;
    independent_round_from(x, &mut Stream::new(seed))
}

pub fn independent_round_from(x: &Marginals, stream: &mut Stream) -> Result<Assignment> {
    let mut rows: Vec<Vec<(usize, &Rational)>> = vec![Vec::new(); x.job_count()];
    for i in 0..x.machine_count() {
        for (j, v) in x.row(i) {
            rows[*j].push((i, v));
        }
    }
    let machine_of = rows
        .into_iter()
        .map(|options| {
            let u = stream.unit();
            let mut acc = Rational::zero();
            for (i, v) in &options {
                acc += *v;
                if u < acc {
                    return *i;
                }
            }
            options.last().expect("job sums to one").0
        })
        .collect();
    Ok(Assignment::new(machine_of))
}

/// Exact `E[cost]` of independent rounding: every pair contributes
/// `x_ij x_ij' p_j p_j'` and every job `x_ij p_j^2`.
pub fn independent_expected_cost(inst: &Instance, x: &Marginals) -> Rational {
    let mut total = Rational::zero();
    for i in 0..x.machine_count() {
        let mut s = Rational::zero();
        let mut q = Rational::zero();
        for (j, v) in x.row(i) {
            let w = v * inst.size(*j);
            q += &w * &w;
            s += &w;
            total += v * inst.size(*j) * inst.size(*j);
        }
        // sum_{j<j'} w_j w_j' = (s^2 - q) / 2
        total += (&s * &s - q) / Rational::from_integer(2.into());
    }
    total
}

/// Largest jobs first (ties by index); each goes to the eligible machine
/// with the smallest cost increase `p^2 + p load`, lowest index on ties.
pub fn greedy(inst: &Instance) -> Assignment {
    let mut order: Vec<usize> = (0..inst.job_count()).collect();
    order.sort_by(|&a, &b| inst.size(b).cmp(inst.size(a)).then(a.cmp(&b)));
    let mut loads = vec![Rational::zero(); inst.machine_count()];
    let mut machine_of = vec![0; inst.job_count()];
    for j in order {
        let p = inst.size(j);
        let (_, i) = inst.jobs()[j]
            .eligible
            .iter()
            .map(|&i| (p * (&loads[i] + p), i))
            .min()
            .expect("nonempty eligibility");
        loads[i] += p;
        machine_of[j] = i;
    }
    Assignment::new(machine_of)
}
