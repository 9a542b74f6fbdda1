use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rational::{at_most_rounding_bound, int, Rational};

/// Ratio of a final-form pair with one solid size `gamma` on `[0, t)`, liquid
/// `lambda` in `f` and uniform liquid in `g` on `[t, 1)`:
/// `(t g^2 + t g l + l^2/2) / (t g^2 + l^2 / (2 (1 - t)))`.
pub fn h(t: &Rational, gamma: &Rational, lambda: &Rational) -> Result<Rational> {
    if t.is_negative() || *t >= Rational::one() {
        return Err(Error::Domain(format!("t = {t} is outside [0, 1)")));
    }
    if gamma.is_negative() || lambda.is_negative() {
        return Err(Error::Domain("gamma and lambda must be nonnegative".into()));
    }
    let two = int(2);
    let tg2 = t * gamma * gamma;
    let num = &tg2 + t * gamma * lambda + lambda * lambda / &two;
    let den = tg2 + lambda * lambda / (two * (Rational::one() - t));
    if den.is_zero() {
        return Err(Error::Domain("denominator is zero".into()));
    }
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HMax {
    pub t: Rational,
    pub gamma: Rational,
    pub lambda: Rational,
    /// Exact `h` at the refined point.
    pub value: Rational,
    /// Best value seen on the grid, before refinement.
    pub grid_value: f64,
    pub grid_points: u64,
}

/// Scans `[0, 1)^3` with the given step in floating point, then refines the
/// best grid point by an exact pattern search whose step halves whenever no
/// neighbour improves.
pub fn maximize_h(step: &Rational) -> Result<HMax> {
    if !step.is_positive() || *step > Rational::one() {
        return Err(Error::Domain(format!("grid step {step} is outside (0, 1]")));
    }
    let n = (Rational::one() / step)
        .ceil()
        .to_u64()
        .ok_or_else(|| Error::Domain("grid too fine".into()))?;
    let s = step.to_f64().unwrap_or(0.0);
    // (value, t, gamma, lambda) indices; the lowest index wins ties
    let best = (0..n).into_par_iter().map(|i| scan_t(i, n, s)).reduce(
        || (f64::NEG_INFINITY, 0, 0, 0),
        |a, b| {
            if b.0 > a.0 || (b.0 == a.0 && (b.1, b.2, b.3) < (a.1, a.2, a.3)) {
                b
            } else {
                a
            }
        },
    );
    if !best.0.is_finite() {
        return Err(Error::Domain("grid has no admissible point".into()));
    }
    let at = |k: u64| step * Rational::from_integer(k.into());
    let mut point = [at(best.1), at(best.2), at(best.3)];
    let mut value = h(&point[0], &point[1], &point[2])?;

    let mut delta = step.clone();
    let floor = step / Rational::from_integer((1u64 << 30).into());
    while delta > floor {
        let mut improved: Option<([Rational; 3], Rational)> = None;
        for dir in 1..27 {
            let signs = [dir % 3, dir / 3 % 3, dir / 9];
            let cand: [Rational; 3] = std::array::from_fn(|c| match signs[c] {
                1 => &point[c] + &delta,
                2 => &point[c] - &delta,
                _ => point[c].clone(),
            });
            if cand.iter().any(|v| v.is_negative() || *v >= Rational::one()) {
                continue;
            }
            if let Ok(v) = h(&cand[0], &cand[1], &cand[2]) {
                let beats = match &improved {
                    Some((_, b)) => v > *b,
                    None => v > value,
                };
                if beats {
                    improved = Some((cand, v));
                }
            }
        }
        match improved {
            Some((p, v)) => {
                point = p;
                value = v;
            }
            None => delta /= int(2),
        }
    }
    if !at_most_rounding_bound(&value) {
        return Err(Error::Internal(format!("h reached {value}, above the bound")));
    }
    let [t, gamma, lambda] = point;
    Ok(HMax {
        t,
        gamma,
        lambda,
        value,
        grid_value: best.0,
        grid_points: n * n * n,
    })
}

fn scan_t(i: u64, n: u64, s: f64) -> (f64, u64, u64, u64) {
    let t = i as f64 * s;
    let c = 0.5 / (1.0 - t);
    let mut best = (f64::NEG_INFINITY, i, 0, 0);
    let (mut bn, mut bd) = (f64::NEG_INFINITY, 1.0);
    for j in 0..n {
        let g = j as f64 * s;
        let a = t * g * g;
        let b = t * g;
        for k in 0..n {
            let l = k as f64 * s;
            let num = a + b * l + 0.5 * l * l;
            let den = a + c * l * l;
            // num / den > bn / bd without dividing
            if den > 0.0 && num * bd > bn * den {
                bn = num;
                bd = den;
                best = (num / den, i, j, k);
            }
        }
    }
    best
}
