//! Named instances and seeded random instances.

use num_traits::{One, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::conflp::ConfigSolution;
use crate::error::{Error, Result};
use crate::instance::{Configuration, Instance, Job};
use crate::rational::{frac, int, Rational};
use crate::rng::Stream;

/// Four machines, one job per pair of machines. The jobs on pairs {1,2}
/// and {3,4} have size 3, the other four have size 1. Integral optimum 26,
/// Configuration-LP optimum 24.
pub fn gap_instance() -> Instance {
    let job =
        |id: &str, size: i64, a: usize, b: usize| Job::new(id, int(size), vec![a - 1, b - 1]).expect("static job");
    let jobs = vec![
        job("J12", 3, 1, 2),
        job("J34", 3, 3, 4),
        job("J13", 1, 1, 3),
        job("J24", 1, 2, 4),
        job("J23", 1, 2, 3),
        job("J14", 1, 1, 4),
    ];
    Instance::new(4, jobs).expect("static instance")
}

/// The half-half Configuration-LP solution of [`gap_instance`]: every
/// machine runs its large job or its two small jobs, each with weight 1/2.
pub fn gap_lp_solution(inst: &Instance) -> Result<ConfigSolution> {
    let mut columns = Vec::new();
    for machine in 0..inst.machine_count() {
        let jobs = inst.eligible_jobs(machine);
        let (large, small): (Vec<usize>, Vec<usize>) = jobs.into_iter().partition(|&j| inst.size(j) > &int(1));
        columns.push(vec![
            (Configuration::new(large)?, frac(1, 2)),
            (Configuration::new(small)?, frac(1, 2)),
        ]);
    }
    ConfigSolution::from_columns(inst, columns)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomSpec {
    pub machines: usize,
    pub jobs: usize,
    pub max_size: u64,
    #[serde(with = "rational_text")]
    pub eligibility_prob: Rational,
    pub seed: u64,
}

impl RandomSpec {
    pub fn validate(&self) -> Result<()> {
        if self.machines == 0 || self.jobs == 0 || self.max_size == 0 {
            return Err(Error::InvalidSpec(
                "machines, jobs and max_size must all be at least 1".into(),
            ));
        }
        if !self.eligibility_prob.is_positive() || self.eligibility_prob > int(1) {
            return Err(Error::InvalidSpec(format!(
                "eligibility_prob {} is not in (0, 1]",
                self.eligibility_prob
            )));
        }
        Ok(())
    }
}

/// Sizes are `1 + below(max_size)`; eligibility is one Bernoulli draw per
/// machine in index order, redrawn as a whole while the set is empty. Draws
/// happen job by job: size first, then eligibility.
pub fn random_instance(spec: &RandomSpec) -> Result<Instance> {
    spec.validate()?;
    let mut stream = Stream::new(spec.seed);
    let mut jobs = Vec::with_capacity(spec.jobs);
    for j in 0..spec.jobs {
        let size = int(1 + stream.below(spec.max_size) as i64);
        let eligible = loop {
            let set: Vec<usize> = (0..spec.machines)
                .filter(|_| stream.bernoulli(&spec.eligibility_prob))
                .collect();
            if !set.is_empty() {
                break set;
            }
        };
        jobs.push(Job::new(format!("j{j}"), size, eligible)?);
    }
    Instance::new(spec.machines, jobs)
}

/// Parameters of the tight family: `k` machines, `t k` large jobs of size
/// `gamma`, and `lambda k / eps` small jobs of size `eps`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TightSpec {
    pub k: usize,
    #[serde(with = "rational_text")]
    pub t_tilde: Rational,
    #[serde(with = "rational_text")]
    pub gamma_tilde: Rational,
    #[serde(with = "rational_text")]
    pub lambda_tilde: Rational,
    #[serde(with = "rational_text")]
    pub eps: Rational,
}

impl TightSpec {
    /// `k = 100`, `t = 29/100`, `gamma = 1/2`, `lambda = 1/5` and
    /// `eps = 1/(355 q)`, which makes both integrality conditions hold.
    pub fn reference(q: u32) -> Self {
        Self {
            k: 100,
            t_tilde: frac(29, 100),
            gamma_tilde: frac(1, 2),
            lambda_tilde: frac(1, 5),
            eps: frac(1, 355 * i64::from(q.max(1))),
        }
    }

    fn integral(value: &Rational, what: &str) -> Result<usize> {
        if !value.is_integer() || value.is_negative() {
            return Err(Error::InvalidSpec(format!(
                "{what} = {value} is not a nonnegative integer"
            )));
        }
        value
            .to_integer()
            .to_usize()
            .ok_or_else(|| Error::InvalidSpec(format!("{what} = {value} is too large")))
    }

    pub fn validate(&self) -> Result<()> {
        self.counts().map(|_| ())
    }

    /// `(large jobs T, small jobs Lambda/eps, small jobs per LP block)`.
    pub fn counts(&self) -> Result<(usize, usize, usize)> {
        if self.k == 0 {
            return Err(Error::InvalidSpec("k must be at least 1".into()));
        }
        let one = Rational::one();
        if !self.t_tilde.is_positive() || self.t_tilde >= one {
            return Err(Error::InvalidSpec(format!(
                "t_tilde = {} is not in (0, 1)",
                self.t_tilde
            )));
        }
        for (name, v) in [
            ("gamma_tilde", &self.gamma_tilde),
            ("lambda_tilde", &self.lambda_tilde),
            ("eps", &self.eps),
        ] {
            if !v.is_positive() {
                return Err(Error::InvalidSpec(format!("{name} = {v} must be positive")));
            }
        }
        if self.eps >= self.gamma_tilde {
            return Err(Error::InvalidSpec(format!(
                "eps = {} must be smaller than gamma_tilde = {}",
                self.eps, self.gamma_tilde
            )));
        }
        if &self.t_tilde * &self.gamma_tilde + &self.lambda_tilde > self.gamma_tilde {
            return Err(Error::InvalidSpec(
                "t_tilde * gamma_tilde + lambda_tilde must not exceed gamma_tilde".into(),
            ));
        }
        let k = int(self.k as i64);
        let large = Self::integral(&(&self.t_tilde * &k), "T = t_tilde * k")?;
        let _ = Self::integral(&(&self.lambda_tilde * &k), "Lambda = lambda_tilde * k")?;
        let per_machine = Self::integral(&(&self.lambda_tilde / &self.eps), "lambda_tilde / eps")?;
        let block = Self::integral(
            &(&self.lambda_tilde / ((one - &self.t_tilde) * &self.eps)),
            "lambda_tilde / ((1 - t_tilde) * eps)",
        )?;
        Ok((large, per_machine * self.k, block))
    }

    /// Closed-form ratio of the worst-case rounding cost to the LP cost on
    /// every machine of the tight instance.
    pub fn closed_form_ratio(&self) -> Rational {
        let (t, g, l, e) = (&self.t_tilde, &self.gamma_tilde, &self.lambda_tilde, &self.eps);
        let two = int(2);
        let num = t * g * g + t * g * l + l * l / &two + l * e / &two;
        let den = t * g * g + l * l / (&two * (int(1) - t)) + l * e / &two;
        num / den
    }
}

pub fn tight_instance(spec: &TightSpec) -> Result<Instance> {
    let (large, small, _) = spec.counts()?;
    let all: Vec<usize> = (0..spec.k).collect();
    let mut jobs = Vec::with_capacity(large + small);
    for j in 0..large {
        jobs.push(Job::new(format!("T{j}"), spec.gamma_tilde.clone(), all.clone())?);
    }
    for j in 0..small {
        jobs.push(Job::new(format!("L{j}"), spec.eps.clone(), all.clone())?);
    }
    Instance::new(spec.k, jobs)
}

/// The optimal LP solution of the tight family: on every machine, each large
/// job alone and each block of `lambda / ((1 - t) eps)` consecutive small
/// jobs, all with weight `1/k`. It is the uniform mixture of the `k`
/// rotations of one optimal schedule.
pub fn tight_lp_solution(spec: &TightSpec, inst: &Instance) -> Result<ConfigSolution> {
    let (large, small, block) = spec.counts()?;
    if inst.job_count() != large + small || inst.machine_count() != spec.k {
        return Err(Error::InvalidSpec("instance does not match the spec".into()));
    }
    let weight = frac(1, spec.k as i64);
    let mut configs = Vec::with_capacity(spec.k);
    for j in 0..large {
        configs.push((Configuration::new(vec![j])?, weight.clone()));
    }
    for b in 0..small / block {
        let start = large + b * block;
        configs.push((Configuration::new((start..start + block).collect())?, weight.clone()));
    }
    ConfigSolution::from_columns(inst, vec![configs; spec.k])
}

pub(crate) mod rational_text {
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::rational::{self, Rational};

    pub fn serialize<S: Serializer>(v: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Text {
            Int(i64),
            Str(String),
        }
        match Text::deserialize(d)? {
            Text::Int(n) => Ok(rational::int(n)),
            Text::Str(s) => rational::parse(&s).map_err(serde::de::Error::custom),
        }
    }
}
