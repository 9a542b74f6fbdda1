use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use super::{FunctionPair, Pattern, StepFunction};
use crate::error::{Error, Result};
use crate::rational::{int, Rational};

type Pieces = Vec<(Rational, Pattern)>;

const SWAP_LIMIT: usize = 1_000_000;

fn precondition<T>(m: impl Into<String>) -> Result<T> {
    Err(Error::Precondition(m.into()))
}

fn internal<T>(m: impl Into<String>) -> Result<T> {
    Err(Error::Internal(m.into()))
}

/// Splits piece `k` so that it starts with a piece of length `len`.
fn split<T: Clone>(pieces: &mut Vec<(Rational, T)>, k: usize, len: &Rational) {
    if *len < pieces[k].0 {
        let rest = &pieces[k].0 - len;
        let copy = pieces[k].1.clone();
        pieces[k].0 = len.clone();
        pieces.insert(k + 1, (rest, copy));
    }
}

/// Cuts pieces `x` and `y` (distinct) down to their first `tau`, returning
/// their new indices.
fn split_pair<T: Clone>(pieces: &mut Vec<(Rational, T)>, x: usize, y: usize, tau: &Rational) -> (usize, usize) {
    let (lo, hi) = if x < y { (x, y) } else { (y, x) };
    split(pieces, hi, tau);
    let shift = (*tau < pieces[lo].0) as usize;
    split(pieces, lo, tau);
    if x < y {
        (x, y + shift)
    } else {
        (x + shift, y)
    }
}

/// Splits at position `at`, returning the index of the first piece at or
/// after it.
fn split_at<T: Clone>(pieces: &mut Vec<(Rational, T)>, at: &Rational) -> usize {
    let mut start = Rational::zero();
    for k in 0..pieces.len() {
        if start >= *at {
            return k;
        }
        let end = &start + &pieces[k].0;
        if end > *at {
            let head = at - &start;
            split(pieces, k, &head);
            return k + 1;
        }
        start = end;
    }
    pieces.len()
}

fn merge(pieces: Pieces) -> Pieces {
    let mut out: Pieces = Vec::with_capacity(pieces.len());
    for (len, p) in pieces {
        if len.is_zero() {
            continue;
        }
        match out.last_mut() {
            Some((l, q)) if *q == p => *l += len,
            _ => out.push((len, p)),
        }
    }
    out
}

fn rebuild(f: Pieces, g: Pieces, eps: &Rational) -> Result<FunctionPair> {
    let pair = FunctionPair {
        f: StepFunction::from_pieces(f)?,
        g: StepFunction::from_pieces(g)?,
        eps_liquid: eps.clone(),
    };
    if let Err(e) = pair.check_compatible() {
        return internal(format!("transformation broke compatibility: {e}"));
    }
    Ok(pair)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WorstCaseTrace {
    pub swaps: usize,
}

pub fn worst_case_transform(pair: &FunctionPair) -> Result<FunctionPair> {
    worst_case_transform_traced(pair).map(|(p, _)| p)
}

/// Swaps the `i`-th largest elements of two patterns whenever the larger
/// (or equal) pattern holds the smaller `i`-th element, scanning the lowest
/// `i` first and then the leftmost pair of pieces; finally sorts `f` by
/// non-increasing size. Every swap strictly increases `cost(f)`.
pub fn worst_case_transform_traced(pair: &FunctionPair) -> Result<(FunctionPair, WorstCaseTrace)> {
    if pair.f.has_liquid() {
        return precondition("worst-case transformation needs a solid-only f");
    }
    if !pair.f.has_bucket_structure() {
        return precondition("f lacks the bucket structure");
    }
    let mut f = pair.f.pieces();
    let mut swaps = 0;
    while let Some((i, x, y)) = find_violation(&f) {
        swaps += 1;
        if swaps > SWAP_LIMIT {
            return internal("swap loop did not terminate");
        }
        let tau = if f[x].0 < f[y].0 {
            f[x].0.clone()
        } else {
            f[y].0.clone()
        };
        let (x, y) = split_pair(&mut f, x, y, &tau);
        // an absent i-th element counts as zero and is not moved
        let a = f[x].1.kth(i);
        let b = f[y].1.kth(i);
        f[y].1.remove_one(&b);
        f[x].1.insert(b);
        if !a.is_zero() {
            f[x].1.remove_one(&a);
            f[y].1.insert(a);
        }
        f = merge(f);
    }
    let mut sorted = f;
    sorted.sort_by_key(|b| std::cmp::Reverse(b.1.size()));
    let f = StepFunction::from_pieces(sorted)?;
    if !f.first_is_non_increasing() || !f.rest_is_non_increasing() || f.last().size() < f.first().rest() {
        return internal("worst-case output is not monotone");
    }
    let out = FunctionPair {
        f,
        g: pair.g.clone(),
        eps_liquid: pair.eps_liquid.clone(),
    };
    out.check_compatible()?;
    Ok((out, WorstCaseTrace { swaps }))
}

fn find_violation(f: &[(Rational, Pattern)]) -> Option<(usize, usize, usize)> {
    let depth = f.iter().map(|(_, p)| p.solids.len()).max().unwrap_or(0);
    let sizes: Vec<Rational> = f.iter().map(|(_, p)| p.size()).collect();
    for i in 1..=depth {
        for x in 0..f.len() {
            let fx = f[x].1.kth(i);
            for y in 0..f.len() {
                if sizes[x] >= sizes[y] && fx < f[y].1.kth(i) {
                    return Some((i, x, y));
                }
            }
        }
    }
    None
}

/// Per-pattern cost changes of a liquification, as `(length, delta)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LiquifyTrace {
    pub f_changes: Vec<(Rational, Rational)>,
    pub g_changes: Vec<(Rational, Rational)>,
}

pub fn liquify(
    pair: &FunctionPair,
    p: &Rational,
    p1: &Rational,
    p2: &Rational,
    measure: &Rational,
) -> Result<FunctionPair> {
    liquify_traced(pair, p, p1, p2, measure).map(|(q, _)| q)
}

/// Replaces one copy of `p` by `p1` and `p2` in the leftmost patterns
/// containing `p`, over the given measure in both `f` and `g`.
pub fn liquify_traced(
    pair: &FunctionPair,
    p: &Rational,
    p1: &Rational,
    p2: &Rational,
    measure: &Rational,
) -> Result<(FunctionPair, LiquifyTrace)> {
    if !p1.is_positive() || !p2.is_positive() {
        return Err(Error::InvalidInput("both split parts must be positive".into()));
    }
    if &(p1 + p2) != p {
        return Err(Error::InvalidInput(format!("{p1} + {p2} is not {p}")));
    }
    if measure.is_negative() {
        return Err(Error::InvalidInput("negative measure".into()));
    }
    for (name, s) in [("f", &pair.f), ("g", &pair.g)] {
        let have = s.measure_containing(p);
        if have < *measure {
            return precondition(format!("{name} contains {p} on measure {have} < {measure}"));
        }
    }
    let eps = &pair.eps_liquid;
    let replace = |s: &StepFunction| -> Result<(Pieces, Vec<(Rational, Rational)>)> {
        let mut pieces = s.pieces();
        let mut changes = Vec::new();
        let mut left = measure.clone();
        let mut k = 0;
        while left.is_positive() && k < pieces.len() {
            if pieces[k].1.count(p) > 0 {
                split(&mut pieces, k, &left);
                let before = pieces[k].1.cost(eps);
                let q = &mut pieces[k].1;
                q.remove_one(p);
                q.insert(p1.clone());
                q.insert(p2.clone());
                changes.push((pieces[k].0.clone(), pieces[k].1.cost(eps) - before));
                left -= &pieces[k].0;
            }
            k += 1;
        }
        Ok((merge(pieces), changes))
    };
    let (f, f_changes) = replace(&pair.f)?;
    let (g, g_changes) = replace(&pair.g)?;
    Ok((rebuild(f, g, eps)?, LiquifyTrace { f_changes, g_changes }))
}

/// Turns every copy of the solid `p` in `piece` into liquid.
fn melt(piece: &mut Pattern, p: &Rational) -> usize {
    let before = piece.solids.len();
    piece.solids.retain(|x| x != p);
    let k = before - piece.solids.len();
    piece.liquid += p * Rational::from_integer(k.into());
    k
}

/// Stage one to three of the main transformation: liquify everything in `f`
/// except the largest element on `[0, m)`, level the liquid in `f` to
/// `f_r(0)`, then rearrange `g` to one solid per pattern aligned with `f`.
/// Returns the new pair and `m`.
pub fn main_transform(pair: &FunctionPair) -> Result<(FunctionPair, Rational)> {
    let f = &pair.f;
    if !f.first_is_non_increasing() || !f.rest_is_non_increasing() {
        return precondition("f_1 and f_r must be non-increasing");
    }
    let r0 = f.first().rest();
    if f.last().size() < r0 {
        return precondition("size(f(1)) must be at least f_r(0)");
    }
    let eps = &pair.eps_liquid;
    let ratio_in = pair.ratio();
    let m = threshold_m(f, &r0);

    // stage 1
    let mut fp = f.pieces();
    let cut = split_at(&mut fp, &m);
    let mut melted: BTreeMap<Rational, Rational> = BTreeMap::new();
    for (k, (len, q)) in fp.iter_mut().enumerate() {
        let keep = if k < cut { q.solids.first().cloned() } else { None };
        let values: Vec<Rational> = q.solids.clone();
        for v in values.iter().skip(keep.is_some() as usize) {
            q.remove_one(v);
            q.liquid += v;
            *melted.entry(v.clone()).or_insert_with(Rational::zero) += &*len;
        }
    }
    let mut gp = pair.g.pieces();
    for (p, need) in &melted {
        let mut left = need.clone();
        let mut k = 0;
        while left.is_positive() && k < gp.len() {
            let c = gp[k].1.count(p);
            if c > 0 {
                let whole = &gp[k].0 * Rational::from_integer(c.into());
                if whole > left {
                    let part = &left / Rational::from_integer(c.into());
                    split(&mut gp, k, &part);
                }
                let copies = melt(&mut gp[k].1, p);
                left -= &gp[k].0 * Rational::from_integer(copies.into());
            }
            k += 1;
        }
        if left.is_positive() {
            return internal(format!("g lacks {left} of element {p}"));
        }
    }

    // stage 2
    let mass_before: Rational = fp.iter().map(|(l, q)| l * &q.liquid).sum();
    for (_, q) in fp.iter_mut() {
        q.liquid = r0.clone();
    }
    let mass_after: Rational = fp.iter().map(|(l, q)| l * &q.liquid).sum();
    if mass_before != mass_after {
        return internal("liquid mass changed while levelling f");
    }

    // stage 3
    let mut gp = merge(gp);
    let mut moves = 0;
    while let Some(x) = gp.iter().position(|(_, q)| q.solids.len() >= 2) {
        moves += 1;
        if moves > SWAP_LIMIT {
            return internal("rearranging g did not terminate");
        }
        let Some(y) = gp.iter().position(|(_, q)| q.solids.is_empty()) else {
            return internal("g has no liquid-only pattern to receive a solid");
        };
        let tau = if gp[x].0 < gp[y].0 {
            gp[x].0.clone()
        } else {
            gp[y].0.clone()
        };
        let (x, y) = split_pair(&mut gp, x, y, &tau);
        let p = gp[x].1.solids.last().cloned().expect("two solids");
        gp[x].1.remove_one(&p);
        if gp[y].1.liquid >= p {
            gp[x].1.liquid += &p;
            gp[y].1.liquid -= &p;
        } else {
            let l = std::mem::take(&mut gp[y].1.liquid);
            gp[x].1.liquid += l;
        }
        gp[y].1.insert(p);
        gp = merge(gp);
    }

    let gp = arrange_like(&fp, gp, cut)?;
    let out = rebuild(merge(fp), merge(gp), eps)?;
    if !out.f.rest_is_constant() {
        return internal("f_r is not constant after the main transformation");
    }
    if out.aligned().iter().any(|(_, a, b)| a.first() != b.first()) {
        return internal("f_1 and g_1 differ after the main transformation");
    }
    if let (Some(before), Some(after)) = (ratio_in, out.ratio()) {
        if before >= Rational::one() && after < before {
            return internal(format!("ratio fell from {before} to {after}"));
        }
    }
    Ok((out, m))
}

/// Smallest root of `int_0^m (f_r(0) - f_r) = int_m^1 (size_f - f_r(0))`.
fn threshold_m(f: &StepFunction, r0: &Rational) -> Rational {
    let pieces = f.pieces();
    let mut phi: Rational = -pieces.iter().map(|(l, q)| l * (q.size() - r0)).sum::<Rational>();
    let mut start = Rational::zero();
    for (len, q) in &pieces {
        if !phi.is_negative() {
            return start;
        }
        // d(phi)/dm = f_1
        let slope = q.first();
        let end = &phi + &slope * len;
        if !end.is_negative() {
            return start + (-phi) / slope;
        }
        phi = end;
        start += len;
    }
    Rational::one()
}

/// Places the single-solid patterns of `g` at the positions of the same
/// solid in `f` (left to right) and the liquid-only ones on `[m, 1)`.
fn arrange_like(f: &Pieces, g: Pieces, cut: usize) -> Result<Pieces> {
    let mut queues: BTreeMap<Option<Rational>, std::collections::VecDeque<(Rational, Pattern)>> = BTreeMap::new();
    for (len, q) in g {
        queues.entry(q.solids.first().cloned()).or_default().push_back((len, q));
    }
    let mut out = Vec::new();
    for (k, (len, q)) in f.iter().enumerate() {
        let key = if k < cut { q.solids.first().cloned() } else { None };
        let queue = queues.get_mut(&key);
        let Some(queue) = queue else {
            return internal("g has no pattern to match f");
        };
        let mut left = len.clone();
        while left.is_positive() {
            let Some((l, p)) = queue.pop_front() else {
                return internal("g runs out of patterns matching f");
            };
            if l > left {
                queue.push_front((&l - &left, p.clone()));
                out.push((left.clone(), p));
                left = Rational::zero();
            } else {
                left -= &l;
                out.push((l, p));
            }
        }
    }
    if queues.values().any(|q| !q.is_empty()) {
        return internal("g patterns left over after arranging");
    }
    Ok(out)
}

/// One batch of identical exchange steps on the pieces at `x` and `y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExchangeStep {
    pub tau: Rational,
    /// Total amount moved per pattern: `eps_steps * eps`, or one final
    /// step smaller than `eps`.
    pub delta: Rational,
    pub eps_steps: u64,
    pub df: Rational,
    pub dg: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinalFormTrace {
    pub t: Rational,
    pub m: Rational,
    pub steps: Vec<ExchangeStep>,
    /// Decrease of `cost(g)` from levelling the liquid on `[t, 1)`.
    pub levelling_gain: Rational,
}

impl FinalFormTrace {
    pub fn iterations(&self) -> u64 {
        self.steps.iter().map(|s| s.eps_steps).sum()
    }
}

pub fn final_form(pair: &FunctionPair) -> Result<(FunctionPair, Rational)> {
    final_form_traced(pair).map(|(p, tr)| (p, tr.t))
}

/// Grows the solids on `[0, t)` and shrinks those on `[t, m)` in `eps`
/// steps, moving liquid in `g` the opposite way, then levels the liquid of
/// `g` on `[t, 1)`. Runs of steps on the same two pieces are applied
/// together; each run still moves whole multiples of `eps` except for the
/// last step that empties a piece.
pub fn final_form_traced(pair: &FunctionPair) -> Result<(FunctionPair, FinalFormTrace)> {
    let eps = pair.eps_liquid.clone();
    let f = &pair.f;
    if !f.rest_is_constant() {
        return precondition("f_r must be constant");
    }
    if f.patterns().iter().chain(pair.g.patterns()).any(|q| q.solids.len() > 1) {
        return precondition("every pattern may hold at most one solid element");
    }
    if !f.first_is_non_increasing() {
        return precondition("f_1 must be non-increasing");
    }
    let aligned = pair.aligned();
    if aligned.iter().any(|(_, a, b)| a.first() != b.first()) {
        return precondition("f_1 and g_1 must agree");
    }
    let ratio_in = pair.ratio();

    let mut pieces: Vec<(Rational, (Pattern, Pattern))> = aligned.into_iter().map(|(l, a, b)| (l, (a, b))).collect();
    let m: Rational = pieces
        .iter()
        .filter(|(_, (a, _))| !a.solids.is_empty())
        .map(|(l, _)| l)
        .sum();
    let t = threshold_t(&pieces, &m);
    split_at(&mut pieces, &t);

    let mut steps = Vec::new();
    let mut guard = 0usize;
    loop {
        let mut start = Rational::zero();
        let mut x = None;
        let mut y = None;
        for (k, (len, (_, b))) in pieces.iter().enumerate() {
            if start < t && x.is_none() && b.liquid.is_positive() {
                x = Some(k);
            }
            if start >= t && start < m && y.is_none() && !b.solids.is_empty() {
                y = Some(k);
            }
            start += len;
        }
        let (x, y) = match (x, y) {
            (None, None) => break,
            (Some(x), Some(y)) => (x, y),
            _ => return internal("exchange loop lost its balance"),
        };
        guard += 1;
        if guard > SWAP_LIMIT {
            return internal("exchange loop did not terminate");
        }
        let tau = if pieces[x].0 < pieces[y].0 {
            pieces[x].0.clone()
        } else {
            pieces[y].0.clone()
        };
        let (x, y) = split_pair(&mut pieces, x, y, &tau);
        let room = {
            let gx = &pieces[x].1 .1.liquid;
            let gy = pieces[y].1 .1.first();
            if *gx < gy {
                gx.clone()
            } else {
                gy
            }
        };
        let whole = (&room / &eps).floor();
        let (delta, eps_steps) = if whole.is_zero() {
            (room, 1)
        } else {
            let n = whole.to_integer();
            (&eps * &whole, u64::try_from(n).unwrap_or(u64::MAX))
        };
        let cost = |k: usize, pieces: &[(Rational, (Pattern, Pattern))]| {
            let (a, b) = &pieces[k].1;
            (a.cost(&eps), b.cost(&eps))
        };
        let (fx0, gx0) = cost(x, &pieces);
        let (fy0, gy0) = cost(y, &pieces);
        grow(&mut pieces[x].1, &delta);
        shrink(&mut pieces[y].1, &delta);
        let (fx1, gx1) = cost(x, &pieces);
        let (fy1, gy1) = cost(y, &pieces);
        let df = &tau * (fx1 - fx0 + fy1 - fy0);
        let dg = &tau * (gx1 - gx0 + gy1 - gy0);
        if df != &dg * int(2) || dg.is_negative() {
            return internal(format!("exchange step changed cost(f) by {df} and cost(g) by {dg}"));
        }
        steps.push(ExchangeStep {
            tau,
            delta,
            eps_steps,
            df,
            dg,
        });
    }

    // level g on [t, 1)
    let tail = split_at(&mut pieces, &t);
    let width = Rational::one() - &t;
    let mut levelling_gain = Rational::zero();
    if width.is_positive() {
        let mass: Rational = pieces[tail..].iter().map(|(l, (_, b))| l * &b.liquid).sum();
        let level = mass / &width;
        for (len, (_, b)) in pieces[tail..].iter_mut() {
            let before = b.cost(&eps);
            b.liquid = level.clone();
            levelling_gain += &*len * (before - b.cost(&eps));
        }
    }

    let (fp, gp): (Pieces, Pieces) = pieces.into_iter().map(|(l, (a, b))| ((l.clone(), a), (l, b))).unzip();
    let out = rebuild(merge(fp), merge(gp), &eps)?;
    check_final_form(&out, &t)?;
    if let (Some(before), Some(after)) = (ratio_in, out.ratio()) {
        let floor = if before < int(2) { before } else { int(2) };
        if after < floor {
            return internal(format!("final form ratio {after} fell below {floor}"));
        }
    }
    Ok((
        out,
        FinalFormTrace {
            t,
            m,
            steps,
            levelling_gain,
        },
    ))
}

fn grow((a, b): &mut (Pattern, Pattern), delta: &Rational) {
    a.solids[0] += delta;
    b.solids[0] += delta;
    b.liquid -= delta;
}

fn shrink((a, b): &mut (Pattern, Pattern), delta: &Rational) {
    for q in [&mut *a, &mut *b] {
        q.solids[0] -= delta;
        if q.solids[0].is_zero() {
            q.solids.clear();
        }
    }
    b.liquid += delta;
}

/// Smallest root of `int_0^t g_r = int_t^m g_1`.
fn threshold_t(pieces: &[(Rational, (Pattern, Pattern))], m: &Rational) -> Rational {
    let mut psi: Rational = -pieces.iter().map(|(l, (_, b))| l * b.first()).sum::<Rational>();
    let mut start = Rational::zero();
    for (len, (_, b)) in pieces {
        if !psi.is_negative() || start >= *m {
            return start;
        }
        // d(psi)/dt = size_g
        let slope = b.size();
        let end = &psi + &slope * len;
        if !end.is_negative() {
            return start + (-psi) / slope;
        }
        psi = end;
        start += len;
    }
    m.clone()
}

/// Properties of the final form: constant `f_r`, `f_1 = g_1`, one solid and
/// no liquid in `g` on `[0, t)`, liquid only on `[t, 1)` with constant
/// `size_g` there.
pub fn check_final_form(pair: &FunctionPair, t: &Rational) -> Result<()> {
    if !pair.f.rest_is_constant() {
        return internal("final form: f_r is not constant");
    }
    let mut start = Rational::zero();
    let mut tail_size: Option<Rational> = None;
    for (len, a, b) in pair.aligned() {
        if a.first() != b.first() {
            return internal("final form: f_1 and g_1 differ");
        }
        if start < *t {
            if a.solids.len() != 1 || b.solids.len() != 1 || !b.liquid.is_zero() {
                return internal(format!("final form: wrong patterns {a} / {b} before t"));
            }
        } else {
            if !a.solids.is_empty() || !b.solids.is_empty() {
                return internal(format!("final form: solids {a} / {b} after t"));
            }
            match &tail_size {
                Some(s) if *s != b.size() => return internal("final form: g is not level after t"),
                _ => tail_size = Some(b.size()),
            }
        }
        start += len;
    }
    Ok(())
}

/// Every stage of the analysis applied to one pair.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub input: FunctionPair,
    pub worst: FunctionPair,
    pub worst_trace: WorstCaseTrace,
    pub main: FunctionPair,
    pub m: Rational,
    pub last: FunctionPair,
    pub final_trace: FinalFormTrace,
}

pub fn run_pipeline(pair: &FunctionPair) -> Result<Pipeline> {
    let (worst, worst_trace) = worst_case_transform_traced(pair)?;
    let (main, m) = main_transform(&worst)?;
    let (last, final_trace) = final_form_traced(&main)?;
    Ok(Pipeline {
        input: pair.clone(),
        worst,
        worst_trace,
        main,
        m,
        last,
        final_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cfp::{from_distributions, random_pair};
    use crate::rational::{at_most_rounding_bound, frac};
    use crate::rng::Stream;

    fn pat(v: &[i64]) -> Pattern {
        Pattern::solid(v.iter().map(|&x| int(x)).collect()).unwrap()
    }

    fn pair(f: Pieces, g: Pieces) -> FunctionPair {
        FunctionPair::new(
            StepFunction::from_pieces(f).unwrap(),
            StepFunction::from_pieces(g).unwrap(),
            frac(1, 1024),
        )
        .unwrap()
    }

    #[test]
    fn one_swap() {
        let half = frac(1, 2);
        let f = vec![(half.clone(), pat(&[3, 2])), (half.clone(), pat(&[4]))];
        let p = pair(f.clone(), f);
        assert_eq!(p.cost_f(), frac(35, 2));
        let (out, tr) = worst_case_transform_traced(&p).unwrap();
        assert_eq!(tr.swaps, 1);
        assert_eq!(out.f.patterns(), &[pat(&[4, 2]), pat(&[3])]);
        assert_eq!(out.cost_f(), frac(37, 2));
        assert_eq!(out.g, p.g);
    }

    #[test]
    fn sorted_input_is_a_fixpoint() {
        let f = vec![(frac(1, 3), pat(&[4, 2])), (frac(2, 3), pat(&[3, 1]))];
        let p = pair(f.clone(), f);
        let (out, tr) = worst_case_transform_traced(&p).unwrap();
        assert_eq!(tr.swaps, 0);
        assert_eq!(out, p);
    }

    #[test]
    fn bucket_structure_is_required() {
        let f = vec![(frac(1, 2), pat(&[5, 4])), (frac(1, 2), pat(&[1]))];
        let g = f.clone();
        let p = pair(f.clone(), g);
        assert!(!p.f.has_bucket_structure());
        assert!(matches!(worst_case_transform(&p), Err(Error::Precondition(_))));
    }

    #[test]
    fn split_two_into_ones() {
        let p = pair(vec![(int(1), pat(&[2]))], vec![(int(1), pat(&[2]))]);
        let (out, tr) = liquify_traced(&p, &int(2), &int(1), &int(1), &int(1)).unwrap();
        assert_eq!(out.f.first(), &pat(&[1, 1]));
        assert_eq!(tr.f_changes, vec![(int(1), int(-1))]);
        assert_eq!(tr.g_changes, vec![(int(1), int(-1))]);
        assert_eq!(out.cost_f(), int(3));
    }

    #[test]
    fn liquify_rejects_bad_splits() {
        let p = pair(vec![(int(1), pat(&[2]))], vec![(int(1), pat(&[2]))]);
        assert!(liquify(&p, &int(2), &int(2), &int(0), &int(1)).is_err());
        assert!(liquify(&p, &int(2), &int(1), &int(2), &int(1)).is_err());
        let q = pair(
            vec![(frac(1, 2), pat(&[2])), (frac(1, 2), pat(&[1, 1]))],
            vec![(frac(1, 2), pat(&[2])), (frac(1, 2), pat(&[1, 1]))],
        );
        assert!(matches!(
            liquify(&q, &int(2), &int(1), &int(1), &frac(3, 4)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn partial_liquify_on_leftmost_patterns() {
        let q = pair(
            vec![(frac(1, 2), pat(&[2, 2])), (frac(1, 2), pat(&[2]))],
            vec![(frac(1, 2), pat(&[2, 2, 2])), (frac(1, 2), Pattern::empty())],
        );
        let (out, tr) = liquify_traced(&q, &int(2), &frac(1, 2), &frac(3, 2), &frac(1, 2)).unwrap();
        let total: Rational = tr.f_changes.iter().map(|(l, _)| l).sum();
        assert_eq!(total, frac(1, 2));
        assert!(tr.f_changes.iter().chain(&tr.g_changes).all(|(_, d)| *d == frac(-3, 4)));
        assert_eq!(out.cost_f(), q.cost_f() - frac(3, 8));
        assert_eq!(
            out.f.first(),
            &Pattern::solid(vec![int(2), frac(3, 2), frac(1, 2)]).unwrap()
        );
    }

    #[test]
    fn full_liquification_tends_to_half_square() {
        // many eps elements of total l cost l^2/2 + l eps/2
        let eps = frac(1, 64);
        let l = frac(1, 2);
        let elements: Vec<Rational> = (0..32).map(|_| eps.clone()).collect();
        let explicit = Pattern::solid(elements).unwrap().cost(&eps);
        assert_eq!(explicit, &l * &l / int(2) + &l * &eps / int(2));
    }

    #[test]
    fn gap_machine_pipeline() {
        let yin = vec![(frac(1, 2), vec![int(3)]), (frac(1, 2), vec![int(1), int(1)])];
        let yout = vec![(frac(1, 2), vec![int(3), int(1)]), (frac(1, 2), vec![int(1)])];
        let p = from_distributions(&yin, &yout, None).unwrap();
        let run = run_pipeline(&p).unwrap();
        assert!(run.worst.ratio() >= p.ratio());
        assert!(run.main.ratio() >= run.worst.ratio());
        let r = run.last.ratio().unwrap();
        assert!(r >= run.main.ratio().unwrap().min(int(2)));
        assert!(at_most_rounding_bound(&r));
        assert!(run.final_trace.steps.iter().all(|s| s.df == &s.dg * int(2)));
    }

    #[test]
    fn main_transform_balances_liquid() {
        let f = vec![(frac(1, 2), pat(&[4, 1])), (frac(1, 2), pat(&[2]))];
        let p = pair(f.clone(), f);
        let (out, m) = main_transform(&p).unwrap();
        // int_0^m (1 - f_r) = int_m^1 (size - 1)
        assert_eq!(m, frac(3, 4));
        assert!(out.f.rest_is_constant());
        assert_eq!(out.f.first().rest(), int(1));
        assert_eq!(out.f.at(&frac(7, 8)), &Pattern::new(vec![], int(1)).unwrap());
        assert_eq!(out.g.patterns()[1], pat(&[2]));
        assert!(out.aligned().iter().all(|(_, a, b)| a.first() == b.first()));
        assert!(out.ratio() >= p.ratio());
    }

    #[test]
    fn main_form_is_a_fixpoint() {
        let f = StepFunction::from_pieces(vec![
            (frac(1, 2), Pattern::new(vec![int(3)], int(1)).unwrap()),
            (frac(1, 2), Pattern::new(vec![], int(1)).unwrap()),
        ])
        .unwrap();
        let g = StepFunction::from_pieces(vec![
            (frac(1, 2), Pattern::new(vec![int(3)], frac(1, 2)).unwrap()),
            (frac(1, 2), Pattern::new(vec![], frac(3, 2)).unwrap()),
        ])
        .unwrap();
        let p = FunctionPair::new(f, g, frac(1, 1024)).unwrap();
        let (out, m) = main_transform(&p).unwrap();
        assert_eq!(m, frac(1, 2));
        assert_eq!(out, p);
    }

    #[test]
    fn final_form_is_a_fixpoint() {
        let f = StepFunction::from_pieces(vec![
            (frac(1, 2), Pattern::new(vec![int(3)], int(1)).unwrap()),
            (frac(1, 2), Pattern::new(vec![], int(1)).unwrap()),
        ])
        .unwrap();
        let g = StepFunction::from_pieces(vec![
            (frac(1, 2), Pattern::new(vec![int(3)], int(0)).unwrap()),
            (frac(1, 2), Pattern::new(vec![], int(2)).unwrap()),
        ])
        .unwrap();
        let p = FunctionPair::new(f, g, frac(1, 1024)).unwrap();
        let (out, tr) = final_form_traced(&p).unwrap();
        assert_eq!(tr.t, frac(1, 2));
        assert!(tr.steps.is_empty());
        assert_eq!(out, p);
    }

    #[test]
    fn random_pipelines() {
        let mut s = Stream::new(5);
        for _ in 0..20 {
            let p = random_pair(&mut s, 5, 5, None).unwrap();
            let run = run_pipeline(&p).unwrap();
            assert!(run.worst.cost_f() >= p.cost_f());
            assert_eq!(run.worst.cost_g(), p.cost_g());
            let r = run.last.ratio().unwrap();
            assert!(at_most_rounding_bound(&r), "{r}");
        }
    }
}
