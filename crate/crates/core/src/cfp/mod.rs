//! Compatible function pairs: the per-machine input (LP) and output
//! (rounding) distributions written as step functions on `[0, 1)`, together
//! with the transformations that reshape a pair into its final form and the
//! ratio function `h` of that form.
//!
//! A pattern holds solid elements and a liquid mass `l`. Liquid stands for
//! `l / eps` elements of size `eps`, so a pattern costs
//! `((S + l)^2 + Q + l eps) / 2` with `S`, `Q` the sum and the sum of
//! squares of its solid elements. This is the exact cost of the liquid
//! elements whenever `l` is a multiple of `eps`.

mod h;
mod transforms;

pub use h::{h, maximize_h, HMax};
pub use transforms::{
    check_final_form, final_form, final_form_traced, liquify, liquify_traced, main_transform, run_pipeline,
    worst_case_transform, worst_case_transform_traced, ExchangeStep, FinalFormTrace, LiquifyTrace, Pipeline,
    WorstCaseTrace,
};

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::conflp::ConfigSolution;
use crate::error::{Error, Result};
use crate::instance::{Configuration, Instance};
use crate::rational::{frac, int, Rational};
use crate::rng::Stream;
use crate::rounding::MatchingDecomposition;

/// A multiset of solid elements plus a liquid mass.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Pattern {
    /// Sorted non-increasingly.
    solids: Vec<Rational>,
    liquid: Rational,
}

impl Pattern {
    pub fn new(mut solids: Vec<Rational>, liquid: Rational) -> Result<Self> {
        if let Some(p) = solids.iter().find(|p| !p.is_positive()) {
            return Err(Error::InvalidInput(format!("pattern element {p} is not positive")));
        }
        if liquid.is_negative() {
            return Err(Error::InvalidInput(format!("negative liquid mass {liquid}")));
        }
        solids.sort_by(|a, b| b.cmp(a));
        Ok(Self { solids, liquid })
    }

    pub fn solid(solids: Vec<Rational>) -> Result<Self> {
        Self::new(solids, Rational::zero())
    }

    pub fn empty() -> Self {
        Self {
            solids: Vec::new(),
            liquid: Rational::zero(),
        }
    }

    pub fn solids(&self) -> &[Rational] {
        &self.solids
    }

    pub fn liquid(&self) -> &Rational {
        &self.liquid
    }

    pub fn size(&self) -> Rational {
        self.solids.iter().sum::<Rational>() + &self.liquid
    }

    /// Largest solid element, zero when there is none.
    pub fn first(&self) -> Rational {
        self.solids.first().cloned().unwrap_or_else(Rational::zero)
    }

    /// `size - first`.
    pub fn rest(&self) -> Rational {
        self.size() - self.first()
    }

    /// The `i`-th largest solid element (1-based), zero when absent.
    pub fn kth(&self, i: usize) -> Rational {
        self.solids.get(i - 1).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn cost(&self, eps: &Rational) -> Rational {
        let s = self.size();
        let q: Rational = self.solids.iter().map(|p| p * p).sum();
        (&s * &s + q + &self.liquid * eps) / int(2)
    }

    fn remove_one(&mut self, p: &Rational) -> bool {
        match self.solids.iter().position(|x| x == p) {
            Some(k) => {
                self.solids.remove(k);
                true
            }
            None => false,
        }
    }

    fn insert(&mut self, p: Rational) {
        let at = self.solids.partition_point(|x| x >= &p);
        self.solids.insert(at, p);
    }

    fn count(&self, p: &Rational) -> usize {
        self.solids.iter().filter(|x| *x == p).count()
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, p) in self.solids.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{p}")?;
        }
        if !self.liquid.is_zero() {
            if !self.solids.is_empty() {
                write!(f, ", ")?;
            }
            write!(f, "~{}", self.liquid)?;
        }
        write!(f, "}}")
    }
}

/// A step function from `[0, 1)` to patterns: `patterns[k]` holds on
/// `[breakpoints[k], breakpoints[k + 1])`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepFunction {
    breakpoints: Vec<Rational>,
    patterns: Vec<Pattern>,
}

impl StepFunction {
    pub fn new(breakpoints: Vec<Rational>, patterns: Vec<Pattern>) -> Result<Self> {
        let bad = |m: &str| Err(Error::InvalidInput(format!("step function: {m}")));
        if breakpoints.len() != patterns.len() + 1 || patterns.is_empty() {
            return bad("need one more breakpoint than patterns and at least one pattern");
        }
        if !breakpoints[0].is_zero() || !breakpoints[breakpoints.len() - 1].is_one() {
            return bad("breakpoints must run from 0 to 1");
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return bad("breakpoints must be strictly increasing");
        }
        Ok(Self { breakpoints, patterns })
    }

    pub fn constant(pattern: Pattern) -> Self {
        Self {
            breakpoints: vec![Rational::zero(), Rational::one()],
            patterns: vec![pattern],
        }
    }

    /// From consecutive `(length, pattern)` pieces. Empty pieces are
    /// dropped and equal neighbours merged; lengths must sum to one.
    pub fn from_pieces(pieces: Vec<(Rational, Pattern)>) -> Result<Self> {
        let mut merged: Vec<(Rational, Pattern)> = Vec::with_capacity(pieces.len());
        for (len, p) in pieces {
            if len.is_negative() {
                return Err(Error::InvalidInput(format!("negative piece length {len}")));
            }
            if len.is_zero() {
                continue;
            }
            match merged.last_mut() {
                Some((l, q)) if *q == p => *l += len,
                _ => merged.push((len, p)),
            }
        }
        let mut breakpoints = vec![Rational::zero()];
        let mut at = Rational::zero();
        for (len, _) in &merged {
            at += len;
            breakpoints.push(at.clone());
        }
        if !at.is_one() {
            return Err(Error::InvalidInput(format!("piece lengths sum to {at}, not 1")));
        }
        Self::new(breakpoints, merged.into_iter().map(|(_, p)| p).collect())
    }

    pub fn pieces(&self) -> Vec<(Rational, Pattern)> {
        (0..self.patterns.len())
            .map(|k| (self.length(k), self.patterns[k].clone()))
            .collect()
    }

    pub fn breakpoints(&self) -> &[Rational] {
        &self.breakpoints
    }

    pub fn patterns(&self) -> &[Pattern] {
        &self.patterns
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn length(&self, k: usize) -> Rational {
        &self.breakpoints[k + 1] - &self.breakpoints[k]
    }

    /// The pattern at `x` in `[0, 1)`.
    pub fn at(&self, x: &Rational) -> &Pattern {
        let k = self.breakpoints.partition_point(|b| b <= x);
        &self.patterns[k.clamp(1, self.patterns.len()) - 1]
    }

    pub fn first(&self) -> &Pattern {
        &self.patterns[0]
    }

    pub fn last(&self) -> &Pattern {
        &self.patterns[self.patterns.len() - 1]
    }

    /// Measure-weighted multiplicity of every solid value.
    pub fn solid_marginals(&self) -> BTreeMap<Rational, Rational> {
        let mut out: BTreeMap<Rational, Rational> = BTreeMap::new();
        for (k, p) in self.patterns.iter().enumerate() {
            let len = self.length(k);
            for s in &p.solids {
                *out.entry(s.clone()).or_insert_with(Rational::zero) += &len;
            }
        }
        out
    }

    pub fn liquid_mass(&self) -> Rational {
        self.pieces().iter().map(|(l, p)| l * &p.liquid).sum()
    }

    /// Measure of the patterns containing `p`.
    pub fn measure_containing(&self, p: &Rational) -> Rational {
        self.pieces()
            .iter()
            .filter(|(_, q)| q.count(p) > 0)
            .map(|(l, _)| l.clone())
            .sum()
    }

    pub fn has_liquid(&self) -> bool {
        self.patterns.iter().any(|p| !p.liquid.is_zero())
    }

    fn values(&self, f: impl Fn(&Pattern) -> Rational) -> Vec<Rational> {
        self.patterns.iter().map(f).collect()
    }

    pub fn first_is_non_increasing(&self) -> bool {
        non_increasing(&self.values(Pattern::first))
    }

    pub fn rest_is_non_increasing(&self) -> bool {
        non_increasing(&self.values(Pattern::rest))
    }

    pub fn size_is_non_increasing(&self) -> bool {
        non_increasing(&self.values(Pattern::size))
    }

    pub fn rest_is_constant(&self) -> bool {
        let r = self.values(Pattern::rest);
        r.windows(2).all(|w| w[0] == w[1])
    }

    /// For all patterns `P`, `Q` and all `i`: `P_i >= Q_{i+1}`.
    pub fn has_bucket_structure(&self) -> bool {
        let depth = self.patterns.iter().map(|p| p.solids.len()).max().unwrap_or(0);
        (1..=depth).all(|i| {
            let low = self.patterns.iter().map(|p| p.kth(i)).min().expect("nonempty");
            let high = self.patterns.iter().map(|p| p.kth(i + 1)).max().expect("nonempty");
            low >= high
        })
    }
}

fn non_increasing(v: &[Rational]) -> bool {
    v.windows(2).all(|w| w[0] >= w[1])
}

/// `int_0^1 cost(s(x)) dx`.
pub fn fp_cost(s: &StepFunction, eps: &Rational) -> Rational {
    (0..s.len()).map(|k| s.length(k) * s.patterns[k].cost(eps)).sum()
}

/// An output distribution `f`, an input distribution `g`, and the size of a
/// liquid element.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionPair {
    pub f: StepFunction,
    pub g: StepFunction,
    pub eps_liquid: Rational,
}

impl FunctionPair {
    /// Checks compatibility before returning the pair.
    pub fn new(f: StepFunction, g: StepFunction, eps_liquid: Rational) -> Result<Self> {
        if !eps_liquid.is_positive() {
            return Err(Error::InvalidInput("eps_liquid must be positive".into()));
        }
        let pair = Self { f, g, eps_liquid };
        pair.check_compatible()?;
        Ok(pair)
    }

    pub fn cost_f(&self) -> Rational {
        fp_cost(&self.f, &self.eps_liquid)
    }

    pub fn cost_g(&self) -> Rational {
        fp_cost(&self.g, &self.eps_liquid)
    }

    /// `cost(f) / cost(g)`; `None` when `cost(g)` is zero.
    pub fn ratio(&self) -> Option<Rational> {
        let g = self.cost_g();
        (!g.is_zero()).then(|| self.cost_f() / g)
    }

    /// Equal measure-weighted multiplicity of every solid value and equal
    /// liquid mass in `f` and `g`.
    pub fn check_compatible(&self) -> Result<()> {
        let mf = self.f.solid_marginals();
        let mg = self.g.solid_marginals();
        let zero = Rational::zero();
        for value in mf.keys().chain(mg.keys()) {
            let a = mf.get(value).unwrap_or(&zero);
            let b = mg.get(value).unwrap_or(&zero);
            if a != b {
                return Err(Error::Compatibility {
                    value: value.to_string(),
                    in_f: a.to_string(),
                    in_g: b.to_string(),
                });
            }
        }
        let (lf, lg) = (self.f.liquid_mass(), self.g.liquid_mass());
        if lf != lg {
            return Err(Error::Compatibility {
                value: "liquid".into(),
                in_f: lf.to_string(),
                in_g: lg.to_string(),
            });
        }
        Ok(())
    }

    /// Both functions over their common breakpoints, as
    /// `(length, f pattern, g pattern)`.
    pub fn aligned(&self) -> Vec<(Rational, Pattern, Pattern)> {
        align(&self.f.pieces(), &self.g.pieces())
    }
}

pub(crate) fn align(a: &[(Rational, Pattern)], b: &[(Rational, Pattern)]) -> Vec<(Rational, Pattern, Pattern)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    let (mut left_a, mut left_b) = (a[0].0.clone(), b[0].0.clone());
    loop {
        let step = if left_a < left_b {
            left_a.clone()
        } else {
            left_b.clone()
        };
        out.push((step.clone(), a[i].1.clone(), b[j].1.clone()));
        left_a -= &step;
        left_b -= &step;
        if left_a.is_zero() {
            i += 1;
            if i == a.len() {
                break;
            }
            left_a = a[i].0.clone();
        }
        if left_b.is_zero() {
            j += 1;
            if j == b.len() {
                break;
            }
            left_b = b[j].0.clone();
        }
    }
    out
}

/// `2^-10` times the smallest solid element of either function.
pub fn default_eps(f: &StepFunction, g: &StepFunction) -> Rational {
    f.patterns
        .iter()
        .chain(&g.patterns)
        .flat_map(|p| p.solids.iter())
        .min()
        .map(|p| p / Rational::from_integer(BigInt::from(1024)))
        .unwrap_or_else(|| frac(1, 1024))
}

/// A distribution over patterns: weighted multisets of element sizes.
pub type Distribution = Vec<(Rational, Vec<Rational>)>;

fn step_from_distribution(d: &Distribution, eps: &Rational) -> Result<StepFunction> {
    let mut total = Rational::zero();
    let mut items = Vec::with_capacity(d.len() + 1);
    for (w, sizes) in d {
        if w.is_negative() {
            return Err(Error::InvalidInput(format!("negative weight {w}")));
        }
        total += w;
        let p = Pattern::solid(sizes.clone())?;
        let c = p.cost(eps);
        items.push((w.clone(), p, c));
    }
    if total > Rational::one() {
        return Err(Error::InvalidInput(format!("weights sum to {total} > 1")));
    }
    // leftover weight is the empty configuration
    if total < Rational::one() {
        items.push((Rational::one() - total, Pattern::empty(), Rational::zero()));
    }
    items.sort_by(|a, b| b.2.cmp(&a.2));
    StepFunction::from_pieces(items.into_iter().map(|(w, p, _)| (w, p)).collect())
}

/// Builds the pair from an output distribution (`f`) and an input
/// distribution (`g`), each ordered by non-increasing pattern cost.
/// Missing weight in either distribution is taken by the empty pattern.
/// `eps_liquid` defaults to [`default_eps`].
pub fn from_distributions(
    yin: &Distribution,
    yout: &Distribution,
    eps_liquid: Option<Rational>,
) -> Result<FunctionPair> {
    let probe = Rational::zero();
    let f = step_from_distribution(yout, &probe)?;
    let g = step_from_distribution(yin, &probe)?;
    let eps = eps_liquid.unwrap_or_else(|| default_eps(&f, &g));
    FunctionPair::new(f, g, eps)
}

/// Input and output distributions of one machine: the LP columns on it and
/// the configurations it receives in each decomposition term.
pub fn machine_distributions(
    inst: &Instance,
    sol: &ConfigSolution,
    d: &MatchingDecomposition,
    machine: usize,
) -> (Distribution, Distribution) {
    let sizes = |c: &Configuration| c.sizes(inst);
    let yin = sol.columns[machine]
        .iter()
        .map(|(c, w)| (w.clone(), sizes(c)))
        .collect();
    let mut yout: Distribution = Vec::new();
    for term in &d.terms {
        let mut jobs: Vec<Rational> = term
            .buckets
            .iter()
            .enumerate()
            .filter(|(_, b)| b.machine == machine)
            .map(|(j, _)| inst.size(j).clone())
            .collect();
        jobs.sort_by(|a, b| b.cmp(a));
        match yout.iter_mut().find(|(_, s)| *s == jobs) {
            Some((w, _)) => *w += &term.lambda,
            None => yout.push((term.lambda.clone(), jobs)),
        }
    }
    (yin, yout)
}

/// A random single-machine pair. The input distribution is a random mix of
/// nonempty subsets of up to `max_jobs` jobs with sizes in `1..=max_size`; its
/// marginals are poured into buckets, and the output distribution draws one
/// job from every bucket independently, which gives a bucket-structured `f`.
pub fn random_pair(
    stream: &mut Stream,
    max_jobs: u64,
    max_size: u64,
    eps_liquid: Option<Rational>,
) -> Result<FunctionPair> {
    let n = 1 + stream.below(max_jobs.max(1)) as usize;
    let mut sizes: Vec<Rational> = (0..n)
        .map(|_| Rational::from_integer(BigInt::from(1 + stream.below(max_size.max(1)))))
        .collect();
    sizes.sort_by(|a, b| b.cmp(a));

    let configs = 1 + stream.below(4) as usize;
    let raw: Vec<u64> = (0..configs).map(|_| 1 + stream.below(6)).collect();
    let total: u64 = raw.iter().sum();
    let mut yin: Distribution = Vec::with_capacity(configs);
    let mut x = vec![Rational::zero(); n];
    for &r in &raw {
        let w = frac(r as i64, total as i64);
        let mut members = Vec::new();
        let mut chosen: Vec<usize> = (0..n).filter(|_| stream.below(2) == 1).collect();
        if chosen.is_empty() {
            chosen.push(stream.below(n as u64) as usize);
        }
        for j in chosen {
            members.push(sizes[j].clone());
            x[j] += &w;
        }
        yin.push((w, members));
    }

    // pour marginals into buckets, largest jobs first
    let mut buckets: Vec<Vec<(Rational, Rational)>> = Vec::new();
    let mut fill = Rational::one();
    for (j, v) in x.iter().enumerate() {
        let mut left = v.clone();
        while left.is_positive() {
            if fill.is_one() {
                buckets.push(Vec::new());
                fill = Rational::zero();
            }
            let room = Rational::one() - &fill;
            let take = if left < room { left.clone() } else { room };
            fill += &take;
            left -= &take;
            buckets.last_mut().expect("pushed").push((sizes[j].clone(), take));
        }
    }
    // independent choice per bucket; a partly filled bucket may give nothing
    let mut yout: Distribution = vec![(Rational::one(), Vec::new())];
    for bucket in &buckets {
        let load: Rational = bucket.iter().map(|(_, z)| z).sum();
        let mut options: Vec<(Rational, Option<Rational>)> =
            bucket.iter().map(|(p, z)| (z.clone(), Some(p.clone()))).collect();
        if load < Rational::one() {
            options.push((Rational::one() - load, None));
        }
        let mut next = Vec::with_capacity(yout.len() * options.len());
        for (w, pat) in &yout {
            for (z, p) in &options {
                let mut q = pat.clone();
                q.extend(p.clone());
                next.push((w * z, q));
            }
        }
        yout = merge_distribution(next);
    }
    from_distributions(&yin, &yout, eps_liquid)
}

fn merge_distribution(d: Distribution) -> Distribution {
    let mut out: Distribution = Vec::with_capacity(d.len());
    for (w, mut p) in d {
        p.sort_by(|a, b| b.cmp(a));
        match out.iter_mut().find(|(_, q)| *q == p) {
            Some((acc, _)) => *acc += w,
            None => out.push((w, p)),
        }
    }
    out
}
