//! Randomized check of the transformation properties on function pairs.

use serde::Serialize;
use smith_sched::cfp::{liquify_traced, random_pair, run_pipeline, FunctionPair};
use smith_sched::rational::{at_most_rounding_bound, frac, int};
use smith_sched::rng::Stream;
use smith_sched::{Rational, Result};

use crate::report::Value;

pub const PROPERTIES: [&str; 8] = [
    "worst_case_ratio",
    "worst_case_shape",
    "liquify_delta",
    "liquify_ratio",
    "main_ratio",
    "exchange_accounting",
    "final_ratio",
    "final_bound",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PropertyResult {
    pub name: &'static str,
    pub checked: usize,
    pub failed: Vec<usize>,
}

impl PropertyResult {
    pub fn passed(&self) -> bool {
        self.failed.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifyReport {
    pub trials: usize,
    pub seed: u64,
    pub eps_liquid: Option<Value>,
    pub properties: Vec<PropertyResult>,
    pub max_final_ratio: Option<Value>,
    /// Trials whose pipeline raised an error, with the message.
    pub errors: Vec<(usize, String)>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.errors.is_empty() && self.properties.iter().all(PropertyResult::passed)
    }
}

/// Outcome of every property on one pair; `None` when it does not apply.
pub fn check_pair(pair: &FunctionPair) -> Result<(Vec<Option<bool>>, Rational)> {
    let run = run_pipeline(pair)?;
    let ratio = |p: &FunctionPair| p.ratio().unwrap_or_else(|| int(0));
    let (r0, r1, r2, r3) = (ratio(pair), ratio(&run.worst), ratio(&run.main), ratio(&run.last));
    let eps = &pair.eps_liquid;

    let f = &run.worst.f;
    let shape = f.first_is_non_increasing() && f.rest_is_non_increasing() && f.last().size() >= f.first().rest();

    // split the largest solid in two unequal parts on as much measure as both sides allow
    let p = f.first().first();
    let (liq_delta, liq_ratio) = if p > int(0) {
        let measure = std::cmp::min(f.measure_containing(&p), run.worst.g.measure_containing(&p));
        let (p1, p2) = (&p * frac(1, 3), &p * frac(2, 3));
        let (out, trace) = liquify_traced(&run.worst, &p, &p1, &p2, &measure)?;
        let want = -(&p1 * &p2);
        let delta = trace.f_changes.iter().chain(&trace.g_changes).all(|(_, d)| *d == want);
        let monotone = (r1 >= int(1)).then(|| ratio(&out) >= r1);
        (Some(delta), monotone)
    } else {
        (None, None)
    };

    let outcomes = vec![
        Some(r1 >= r0),
        Some(shape),
        liq_delta,
        liq_ratio,
        (r1 >= int(1)).then(|| r2 >= r1),
        Some(run.final_trace.steps.iter().all(|s| s.df == &s.dg * int(2))),
        Some(r3 >= std::cmp::min(int(2), r2.clone())),
        Some(at_most_rounding_bound(&(&r3 - eps * int(10)))),
    ];
    Ok((outcomes, r3))
}

pub fn verify(trials: usize, seed: u64, eps_liquid: Option<Rational>) -> VerifyReport {
    let mut stream = Stream::new(seed);
    let mut properties: Vec<PropertyResult> = PROPERTIES
        .iter()
        .map(|&name| PropertyResult {
            name,
            checked: 0,
            failed: Vec::new(),
        })
        .collect();
    let mut errors = Vec::new();
    let mut max_ratio: Option<Rational> = None;
    for trial in 0..trials {
        let outcome = random_pair(&mut stream, 5, 5, eps_liquid.clone()).and_then(|p| check_pair(&p));
        match outcome {
            Ok((results, r)) => {
                for (prop, res) in properties.iter_mut().zip(results) {
                    if let Some(ok) = res {
                        prop.checked += 1;
                        if !ok {
                            prop.failed.push(trial);
                        }
                    }
                }
                if max_ratio.as_ref().is_none_or(|m| r > *m) {
                    max_ratio = Some(r);
                }
            }
            Err(e) => errors.push((trial, e.to_string())),
        }
    }
    VerifyReport {
        trials,
        seed,
        eps_liquid: eps_liquid.as_ref().map(Value::of),
        properties,
        max_final_ratio: max_ratio.as_ref().map(Value::of),
        errors,
    }
}
