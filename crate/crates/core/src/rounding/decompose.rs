use std::collections::VecDeque;

use num_traits::{One, Signed, Zero};

use super::buckets::{BucketId, BucketMatching};
use crate::conflp::Marginals;
use crate::error::{Error, Result};
use crate::instance::{Assignment, Instance};
use crate::rational::Rational;

/// One integral matching of the convex combination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub lambda: Rational,
    /// Bucket of every job.
    pub buckets: Vec<BucketId>,
}

impl Term {
    pub fn assignment(&self) -> Assignment {
        Assignment::new(self.buckets.iter().map(|b| b.machine).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchingDecomposition {
    pub terms: Vec<Term>,
}

impl MatchingDecomposition {
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Checks `sum lambda = 1`, that every term is a matching inside the
    /// support of `z`, and that the combination reproduces `z` exactly.
    pub fn check(&self, z: &BucketMatching) -> Result<()> {
        let fail = |m: String| Err(Error::Internal(format!("decomposition: {m}")));
        let total: Rational = self.terms.iter().map(|t| &t.lambda).sum();
        if !total.is_one() {
            return fail(format!("weights sum to {total}"));
        }
        let index = EdgeIndex::new(z);
        let mut acc = vec![Rational::zero(); index.edge_count()];
        for (k, term) in self.terms.iter().enumerate() {
            if !term.lambda.is_positive() || term.lambda > Rational::one() {
                return fail(format!("term {k} has weight {}", term.lambda));
            }
            if term.buckets.len() != z.job_count() {
                return fail(format!("term {k} does not assign every job"));
            }
            let mut used = vec![false; index.bucket_count()];
            for (j, b) in term.buckets.iter().enumerate() {
                let Some(e) = index.edge(j, *b) else {
                    return fail(format!(
                        "term {k} uses ({}, {}) for job {j} outside the support",
                        b.machine, b.index
                    ));
                };
                let slot = index.bucket_slot(*b);
                if std::mem::replace(&mut used[slot], true) {
                    return fail(format!("term {k} puts two jobs in bucket ({}, {})", b.machine, b.index));
                }
                acc[e] += &term.lambda;
            }
        }
        for (e, (value, target)) in acc.iter().zip(&index.value).enumerate() {
            if value != target {
                return fail(format!("edge {e} is covered {value}, expected {target}"));
            }
        }
        Ok(())
    }

    /// `sum_t lambda_t [j -> i]` for every pair.
    pub fn marginals(&self, machine_count: usize, job_count: usize) -> Marginals {
        let mut dense = vec![vec![Rational::zero(); job_count]; machine_count];
        for term in &self.terms {
            for (j, b) in term.buckets.iter().enumerate() {
                dense[b.machine][j] += &term.lambda;
            }
        }
        Marginals::from_dense(dense, job_count)
    }
}

/// Adjacency of the support graph of `z`, with edges numbered per job.
struct EdgeIndex {
    /// `(bucket slot, edge)` per job, ascending by bucket.
    job_edges: Vec<Vec<(usize, usize)>>,
    /// `(job, edge)` per bucket slot.
    bucket_edges: Vec<Vec<(usize, usize)>>,
    /// Bucket slot `-> id`; slots follow `(machine, t)` order.
    ids: Vec<BucketId>,
    offsets: Vec<usize>,
    value: Vec<Rational>,
}

impl EdgeIndex {
    fn new(z: &BucketMatching) -> Self {
        let ids: Vec<BucketId> = z.bucket_ids().collect();
        let mut offsets = Vec::with_capacity(z.machine_count() + 1);
        offsets.push(0);
        for i in 0..z.machine_count() {
            offsets.push(offsets[i] + z.bucket_count(i));
        }
        let mut job_edges = vec![Vec::new(); z.job_count()];
        let mut bucket_edges = vec![Vec::new(); ids.len()];
        let mut value = Vec::with_capacity(z.edge_count());
        for (slot, id) in ids.iter().enumerate() {
            for (j, v) in z.bucket(*id) {
                let e = value.len();
                value.push(v.clone());
                job_edges[*j].push((slot, e));
                bucket_edges[slot].push((*j, e));
            }
        }
        Self {
            job_edges,
            bucket_edges,
            ids,
            offsets,
            value,
        }
    }

    fn edge_count(&self) -> usize {
        self.value.len()
    }

    fn bucket_count(&self) -> usize {
        self.ids.len()
    }

    fn bucket_slot(&self, id: BucketId) -> usize {
        self.offsets[id.machine] + id.index
    }

    fn edge(&self, job: usize, id: BucketId) -> Option<usize> {
        if id.machine + 1 >= self.offsets.len() || id.index >= self.offsets[id.machine + 1] - self.offsets[id.machine] {
            return None;
        }
        let slot = self.bucket_slot(id);
        self.job_edges
            .get(job)?
            .iter()
            .find(|(s, _)| *s == slot)
            .map(|(_, e)| *e)
    }
}

struct Peeler {
    index: EdgeIndex,
    residual: Vec<Rational>,
    load: Vec<Rational>,
    /// Mass still to be decomposed; every job's residual sums to it.
    mass: Rational,
    job_match: Vec<Option<(usize, usize)>>,
    bucket_match: Vec<Option<usize>>,
    /// Bucket slot each job used in the previous term, if any.
    last: Vec<Option<usize>>,
}

impl Peeler {
    fn tight(&self, slot: usize) -> bool {
        self.load[slot] == self.mass
    }

    fn assign(&mut self, job: usize, slot: usize, edge: usize) {
        self.job_match[job] = Some((slot, edge));
        self.bucket_match[slot] = Some(job);
    }

    /// Keep matched edges that are still positive, drop the rest.
    fn retain_positive(&mut self) {
        for j in 0..self.job_match.len() {
            if let Some((slot, e)) = self.job_match[j] {
                if self.residual[e].is_zero() {
                    self.job_match[j] = None;
                    self.bucket_match[slot] = None;
                }
            }
        }
    }

    /// Each unmatched job takes the first free positive edge after the
    /// bucket it used last time, wrapping around.
    fn cyclic_fill(&mut self) {
        for j in 0..self.job_match.len() {
            if self.job_match[j].is_some() {
                continue;
            }
            let edges = &self.index.job_edges[j];
            let start = match self.last[j] {
                Some(prev) => edges.partition_point(|(s, _)| *s <= prev),
                None => 0,
            };
            let n = edges.len();
            let pick = (0..n)
                .map(|k| edges[(start + k) % n])
                .find(|&(slot, e)| self.bucket_match[slot].is_none() && self.residual[e].is_positive());
            if let Some((slot, e)) = pick {
                self.assign(j, slot, e);
            }
        }
    }

    /// Augmenting paths for every still unmatched job.
    fn augment(&mut self) -> Result<()> {
        let jobs = self.job_match.len();
        let buckets = self.bucket_match.len();
        for root in 0..jobs {
            if self.job_match[root].is_some() {
                continue;
            }
            // parent[slot] = (job reaching it, edge)
            let mut parent: Vec<Option<(usize, usize)>> = vec![None; buckets];
            let mut seen_job = vec![false; jobs];
            let mut queue = VecDeque::from([root]);
            seen_job[root] = true;
            let mut free = None;
            'bfs: while let Some(j) = queue.pop_front() {
                for &(slot, e) in &self.index.job_edges[j] {
                    if parent[slot].is_some() || !self.residual[e].is_positive() {
                        continue;
                    }
                    if self.job_match[j].map(|(s, _)| s) == Some(slot) {
                        continue;
                    }
                    parent[slot] = Some((j, e));
                    match self.bucket_match[slot] {
                        None => {
                            free = Some(slot);
                            break 'bfs;
                        }
                        Some(next) if !seen_job[next] => {
                            seen_job[next] = true;
                            queue.push_back(next);
                        }
                        Some(_) => {}
                    }
                }
            }
            let Some(mut slot) = free else {
                return Err(Error::Internal(format!("no saturating matching covers job {root}")));
            };
            loop {
                let (j, e) = parent[slot].expect("on the path");
                let previous = self.job_match[j].map(|(s, _)| s);
                self.assign(j, slot, e);
                match previous {
                    Some(s) => slot = s,
                    None => break,
                }
            }
        }
        Ok(())
    }

    /// Move the matching along alternating paths until every tight bucket is
    /// covered; each path ends by releasing a covered bucket that is not tight.
    fn cover_tight(&mut self) -> Result<()> {
        let buckets = self.bucket_match.len();
        for root in 0..buckets {
            if self.bucket_match[root].is_some() || !self.tight(root) {
                continue;
            }
            // parent[job] = (bucket slot reaching it, edge)
            let mut parent: Vec<Option<(usize, usize)>> = vec![None; self.job_match.len()];
            let mut seen = vec![false; buckets];
            seen[root] = true;
            let mut queue = VecDeque::from([root]);
            let mut end = None;
            'bfs: while let Some(slot) = queue.pop_front() {
                for &(j, e) in &self.index.bucket_edges[slot] {
                    if parent[j].is_some() || !self.residual[e].is_positive() {
                        continue;
                    }
                    let (held, _) = self.job_match[j].expect("all jobs are matched");
                    if held == slot {
                        continue;
                    }
                    parent[j] = Some((slot, e));
                    if !self.tight(held) {
                        end = Some(j);
                        break 'bfs;
                    }
                    if !seen[held] {
                        seen[held] = true;
                        queue.push_back(held);
                    }
                }
            }
            let Some(mut j) = end else {
                return Err(Error::Internal(format!("bucket slot {root} cannot be covered")));
            };
            let (released, _) = self.job_match[j].expect("matched");
            self.bucket_match[released] = None;
            loop {
                let (slot, e) = parent[j].expect("on the path");
                let previous = self.bucket_match[slot];
                self.assign(j, slot, e);
                match previous {
                    Some(p) => j = p,
                    None => break,
                }
            }
        }
        Ok(())
    }

    fn step(&mut self) -> Result<Term> {
        self.retain_positive();
        self.cyclic_fill();
        self.augment()?;
        self.cover_tight()?;

        let mut lambda = self.mass.clone();
        for &(_, e) in self.job_match.iter().flatten() {
            if self.residual[e] < lambda {
                lambda = self.residual[e].clone();
            }
        }
        for slot in 0..self.bucket_match.len() {
            if self.bucket_match[slot].is_none() {
                let room = &self.mass - &self.load[slot];
                if room < lambda {
                    lambda = room;
                }
            }
        }
        if !lambda.is_positive() {
            return Err(Error::Internal("peeling step has zero weight".into()));
        }
        let mut term_buckets = Vec::with_capacity(self.job_match.len());
        for j in 0..self.job_match.len() {
            let (slot, e) = self.job_match[j].expect("saturating");
            self.residual[e] -= &lambda;
            self.load[slot] -= &lambda;
            self.last[j] = Some(slot);
            term_buckets.push(self.index.ids[slot]);
        }
        self.mass -= &lambda;
        Ok(Term {
            lambda,
            buckets: term_buckets,
        })
    }
}

/// Writes `z` as a convex combination of integral matchings that saturate
/// every job.
///
/// Each term is a matching inside the residual support that also covers
/// every bucket whose residual load equals the remaining mass; its weight is
/// the largest value keeping all residuals nonnegative and all other bucket
/// loads within the remaining mass. Every step zeroes an edge or makes a
/// bucket tight, so there are at most `edges + buckets` terms. Matchings are
/// built from the previous one: surviving edges are kept, freed jobs move to
/// the next bucket in cyclic order, then augmenting paths (jobs in ascending
/// order) and alternating paths for tight buckets repair the rest.
pub fn decompose(z: &BucketMatching) -> Result<MatchingDecomposition> {
    let index = EdgeIndex::new(z);
    let residual = index.value.clone();
    let load = index
        .bucket_edges
        .iter()
        .map(|es| es.iter().map(|(_, e)| &residual[*e]).sum())
        .collect();
    let jobs = z.job_count();
    let buckets = index.bucket_count();
    let limit = index.edge_count() + buckets;
    let mut p = Peeler {
        index,
        residual,
        load,
        mass: Rational::one(),
        job_match: vec![None; jobs],
        bucket_match: vec![None; buckets],
        last: vec![None; jobs],
    };
    let mut terms = Vec::new();
    if jobs == 0 {
        return Ok(MatchingDecomposition {
            terms: vec![Term {
                lambda: Rational::one(),
                buckets: Vec::new(),
            }],
        });
    }
    while p.mass.is_positive() {
        if terms.len() >= limit {
            return Err(Error::Internal("peeling did not terminate".into()));
        }
        terms.push(p.step()?);
    }
    Ok(MatchingDecomposition { terms })
}

/// Loads of every machine in one term, as exact rationals.
pub fn term_loads(inst: &Instance, term: &Term, machine_count: usize) -> Vec<Rational> {
    let mut loads = vec![Rational::zero(); machine_count];
    for (j, b) in term.buckets.iter().enumerate() {
        loads[b.machine] += inst.size(j);
    }
    loads
}
