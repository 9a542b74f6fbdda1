//! Instance model, configuration and schedule costs, and the JSON instance
//! format.
//!
//! Every job has the same Smith ratio (weight equals size), so the order of
//! jobs on a machine does not matter and the cost of a set `C` of jobs on one
//! machine is `(S^2 + Q) / 2` with `S` the total size and `Q` the sum of
//! squared sizes.

use std::collections::{HashMap, HashSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Job {
    pub id: String,
    /// Processing time, which is also the weight.
    pub size: Rational,
    /// Machines that can process this job, ascending and without duplicates.
    pub eligible: Vec<usize>,
}

impl Job {
    pub fn new(id: impl Into<String>, size: Rational, eligible: Vec<usize>) -> Result<Self> {
        let id = id.into();
        if !size.is_positive() {
            return Err(Error::InvalidInput(format!("job {id:?} has nonpositive size {size}")));
        }
        if eligible.is_empty() {
            return Err(Error::InvalidInput(format!("job {id:?} has an empty eligibility set")));
        }
        let mut sorted = eligible;
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput(format!(
                "job {id:?} lists a machine twice in its eligibility set"
            )));
        }
        Ok(Self {
            id,
            size,
            eligible: sorted,
        })
    }

    pub fn is_eligible(&self, machine: usize) -> bool {
        self.eligible.binary_search(&machine).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    machine_count: usize,
    jobs: Vec<Job>,
}

impl Instance {
    pub fn new(machine_count: usize, jobs: Vec<Job>) -> Result<Self> {
        if machine_count == 0 {
            return Err(Error::InvalidInput("an instance needs at least one machine".into()));
        }
        let mut seen = HashSet::new();
        for job in &jobs {
            if !seen.insert(job.id.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate job id {:?}", job.id)));
            }
            if let Some(&bad) = job.eligible.iter().find(|&&i| i >= machine_count) {
                return Err(Error::InvalidInput(format!(
                    "job {:?} is eligible on machine {bad}, but there are only {machine_count} machines",
                    job.id
                )));
            }
        }
        Ok(Self { machine_count, jobs })
    }

    pub fn machine_count(&self) -> usize {
        self.machine_count
    }

    pub fn jobs(&self) -> &[Job] {
        &self.jobs
    }

    pub fn job_count(&self) -> usize {
        self.jobs.len()
    }

    pub fn size(&self, job: usize) -> &Rational {
        &self.jobs[job].size
    }

    pub fn total_size(&self) -> Rational {
        self.jobs.iter().map(|j| &j.size).sum()
    }

    /// Jobs that machine `i` can process, in job order.
    pub fn eligible_jobs(&self, machine: usize) -> Vec<usize> {
        (0..self.jobs.len())
            .filter(|&j| self.jobs[j].is_eligible(machine))
            .collect()
    }
}

/// A set of job indices processed by one machine. Stored sorted.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Configuration(Vec<usize>);

impl Configuration {
    pub fn new(mut jobs: Vec<usize>) -> Result<Self> {
        jobs.sort_unstable();
        if jobs.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("configuration lists a job more than once".into()));
        }
        Ok(Self(jobs))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn jobs(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, job: usize) -> bool {
        self.0.binary_search(&job).is_ok()
    }

    pub fn sizes(&self, inst: &Instance) -> Vec<Rational> {
        self.0.iter().map(|&j| inst.size(j).clone()).collect()
    }

    pub fn load(&self, inst: &Instance) -> Rational {
        self.0.iter().map(|&j| inst.size(j)).sum()
    }

    pub fn cost(&self, inst: &Instance) -> Rational {
        cost_of(self.0.iter().map(|&j| inst.size(j)))
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, j) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{j}")?;
        }
        write!(f, "}}")
    }
}

/// `(S^2 + Q) / 2` without validating the sizes. Sums run over integer
/// numerators against a common denominator, which avoids a gcd per term.
pub(crate) fn cost_of<'a>(sizes: impl IntoIterator<Item = &'a Rational>) -> Rational {
    let sizes: Vec<&Rational> = sizes.into_iter().collect();
    let mut den = BigInt::one();
    for p in &sizes {
        if !(&den % p.denom()).is_zero() {
            den = den.lcm(p.denom());
        }
    }
    let mut total = BigInt::zero();
    let mut squares = BigInt::zero();
    for p in &sizes {
        let n = if p.denom() == &den {
            p.numer().clone()
        } else {
            p.numer() * (&den / p.denom())
        };
        squares += &n * &n;
        total += n;
    }
    Rational::new(&total * &total + squares, &den * &den * 2)
}

/// Weighted completion time of one machine processing jobs of the given
/// sizes: `sum p^2 + sum_{j != j'} p_j p_j' / 2`.
pub fn config_cost(sizes: &[Rational]) -> Result<Rational> {
    if let Some(p) = sizes.iter().find(|p| !p.is_positive()) {
        return Err(Error::InvalidInput(format!("nonpositive size {p}")));
    }
    Ok(cost_of(sizes))
}

/// A total map from job index to machine index.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    pub machine_of: Vec<usize>,
}

impl Assignment {
    pub fn new(machine_of: Vec<usize>) -> Self {
        Self { machine_of }
    }

    pub fn validate(&self, inst: &Instance) -> Result<()> {
        if self.machine_of.len() != inst.job_count() {
            return Err(Error::InvalidInput(format!(
                "assignment covers {} jobs, instance has {}",
                self.machine_of.len(),
                inst.job_count()
            )));
        }
        for (job, &machine) in self.machine_of.iter().enumerate() {
            if !inst.jobs()[job].is_eligible(machine) {
                return Err(Error::InvalidAssignment { job, machine });
            }
        }
        Ok(())
    }

    /// The configuration of every machine.
    pub fn configurations(&self, machine_count: usize) -> Vec<Configuration> {
        let mut per_machine = vec![Vec::new(); machine_count];
        for (job, &machine) in self.machine_of.iter().enumerate() {
            per_machine[machine].push(job);
        }
        per_machine.into_iter().map(Configuration).collect()
    }

    pub fn loads(&self, inst: &Instance) -> Vec<Rational> {
        let mut loads = vec![Rational::zero(); inst.machine_count()];
        for (job, &machine) in self.machine_of.iter().enumerate() {
            loads[machine] += inst.size(job);
        }
        loads
    }

    /// Cost of each machine's configuration; assumes a validated assignment.
    pub fn machine_costs(&self, inst: &Instance) -> Vec<Rational> {
        self.configurations(inst.machine_count())
            .iter()
            .map(|c| c.cost(inst))
            .collect()
    }
}

pub fn assignment_cost(inst: &Instance, assignment: &Assignment) -> Result<Rational> {
    assignment.validate(inst)?;
    Ok(assignment.machine_costs(inst).into_iter().sum())
}

pub fn makespan(inst: &Instance, assignment: &Assignment) -> Result<Rational> {
    assignment.validate(inst)?;
    Ok(assignment.loads(inst).into_iter().max().unwrap_or_else(Rational::zero))
}

// ---------------------------------------------------------------------------
// File format

#[derive(Serialize)]
struct InstanceOut<'a> {
    machines: usize,
    jobs: Vec<JobOut<'a>>,
}

#[derive(Serialize)]
struct JobOut<'a> {
    id: &'a str,
    size: String,
    eligible: &'a [usize],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceIn {
    machines: usize,
    jobs: Vec<JobIn>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JobIn {
    id: String,
    #[serde(deserialize_with = "deserialize_size")]
    size: Rational,
    eligible: Vec<usize>,
}

fn deserialize_size<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Rational, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Size {
        Int(i64),
        Text(String),
    }
    match Size::deserialize(d)? {
        Size::Int(n) => Ok(rational::int(n)),
        Size::Text(s) => rational::parse(&s).map_err(de::Error::custom),
    }
}

/// Line and column (1-based) of the `nth` (1-based) occurrence of `needle`
/// used as an object value, i.e. preceded by a colon.
fn locate_value(text: &str, needle: &str, nth: usize) -> (usize, usize) {
    let mut seen = 0;
    for (offset, _) in text.match_indices(needle) {
        if !text[..offset].trim_end().ends_with(':') {
            continue;
        }
        seen += 1;
        if seen == nth {
            let before = &text[..offset];
            let line = before.matches('\n').count() + 1;
            let column = offset - before.rfind('\n').map_or(0, |p| p + 1) + 1;
            return (line, column);
        }
    }
    (0, 0)
}

pub fn parse_instance(text: &str) -> Result<Instance> {
    let raw: InstanceIn = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut occurrences: HashMap<String, usize> = HashMap::new();
    let mut jobs = Vec::with_capacity(raw.jobs.len());
    for job in raw.jobs {
        let count = occurrences.entry(job.id.clone()).or_default();
        *count += 1;
        let quoted = serde_json::to_string(&job.id).unwrap_or_default();
        let (line, column) = locate_value(text, &quoted, *count);
        let at = |message: String| Error::Parse { line, column, message };
        if *count > 1 {
            return Err(at(format!("duplicate job id {:?}", job.id)));
        }
        if let Some(&bad) = job.eligible.iter().find(|&&i| i >= raw.machines) {
            return Err(at(format!(
                "job {:?} is eligible on machine {bad}, but there are only {} machines",
                job.id, raw.machines
            )));
        }
        jobs.push(Job::new(job.id, job.size, job.eligible).map_err(|e| at(e.to_string()))?);
    }
    Instance::new(raw.machines, jobs).map_err(|e| Error::Parse {
        line: 1,
        column: 1,
        message: e.to_string(),
    })
}

pub fn serialize_instance(inst: &Instance) -> String {
    let out = InstanceOut {
        machines: inst.machine_count,
        jobs: inst
            .jobs
            .iter()
            .map(|j| JobOut {
                id: &j.id,
                size: j.size.to_string(),
                eligible: &j.eligible,
            })
            .collect(),
    };
    serde_json::to_string_pretty(&out).expect("instance serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};

    fn ints(v: &[i64]) -> Vec<Rational> {
        v.iter().map(|&x| int(x)).collect()
    }

    #[test]
    fn config_cost_examples() {
        assert_eq!(config_cost(&[]).unwrap(), int(0));
        assert_eq!(config_cost(&ints(&[3])).unwrap(), int(9));
        assert_eq!(config_cost(&ints(&[1, 1])).unwrap(), int(3));
        assert_eq!(config_cost(&ints(&[1, 2])).unwrap(), int(7));
        assert_eq!(config_cost(&[frac(1, 2)]).unwrap(), frac(1, 4));
    }

    #[test]
    fn config_cost_rejects_nonpositive() {
        assert!(matches!(config_cost(&ints(&[1, 0])), Err(Error::InvalidInput(_))));
        assert!(config_cost(&ints(&[-2])).is_err());
    }

    fn two_job_instance() -> Instance {
        Instance::new(
            1,
            vec![
                Job::new("a", int(1), vec![0]).unwrap(),
                Job::new("b", int(2), vec![0]).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn assignment_cost_and_makespan() {
        let inst = two_job_instance();
        let a = Assignment::new(vec![0, 0]);
        assert_eq!(assignment_cost(&inst, &a).unwrap(), int(7));
        assert_eq!(makespan(&inst, &a).unwrap(), int(3));

        let empty = Instance::new(2, vec![]).unwrap();
        let none = Assignment::new(vec![]);
        assert_eq!(assignment_cost(&empty, &none).unwrap(), int(0));
        assert_eq!(makespan(&empty, &none).unwrap(), int(0));
    }

    #[test]
    fn ineligible_assignment_is_rejected() {
        let inst = Instance::new(2, vec![Job::new("a", int(1), vec![1]).unwrap()]).unwrap();
        let err = assignment_cost(&inst, &Assignment::new(vec![0])).unwrap_err();
        assert!(matches!(err, Error::InvalidAssignment { job: 0, machine: 0 }));
        assert!(makespan(&inst, &Assignment::new(vec![0])).is_err());
    }

    #[test]
    fn instance_invariants() {
        assert!(Instance::new(0, vec![]).is_err());
        let a = Job::new("a", int(1), vec![0]).unwrap();
        assert!(Instance::new(1, vec![a.clone(), a.clone()]).is_err());
        let far = Job::new("far", int(1), vec![3]).unwrap();
        assert!(Instance::new(2, vec![far]).is_err());
        assert!(Job::new("e", int(1), vec![]).is_err());
        assert!(Job::new("z", int(0), vec![0]).is_err());
        assert!(Job::new("d", int(1), vec![1, 1]).is_err());
        assert_eq!(Job::new("s", int(1), vec![2, 0]).unwrap().eligible, vec![0, 2]);
    }

    #[test]
    fn parses_minimal_document() {
        let inst = parse_instance(r#"{"machines": 1, "jobs": [{"id": "a", "size": 2, "eligible": [0]}]}"#).unwrap();
        let expected = Instance::new(1, vec![Job::new("a", int(2), vec![0]).unwrap()]).unwrap();
        assert_eq!(inst, expected);

        let frac_doc = r#"{"machines": 2, "jobs": [{"id": "x", "size": "3/2", "eligible": [1, 0]}]}"#;
        let inst = parse_instance(frac_doc).unwrap();
        assert_eq!(inst.jobs()[0].size, frac(3, 2));
        assert_eq!(inst.jobs()[0].eligible, vec![0, 1]);
    }

    #[test]
    fn parse_errors_carry_line_context() {
        let doc = "{\"machines\": 1,\n \"jobs\": [\n  {\"id\": \"a\", \"size\": 1, \"eligible\": []}\n]}";
        match parse_instance(doc) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("empty eligibility"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }

        let dup = "{\"machines\": 1, \"jobs\": [\n{\"id\": \"a\", \"size\": 1, \"eligible\": [0]},\n{\"id\": \"a\", \"size\": 1, \"eligible\": [0]}]}";
        match parse_instance(dup) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("duplicate"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }

        let range = "{\"jobs\": [\n{\"id\": \"far\", \"size\": 1, \"eligible\": [5]}], \"machines\": 2}";
        match parse_instance(range) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }

        assert!(parse_instance("{\"machines\": 1}").is_err());
        assert!(parse_instance("{\"machines\": 1, \"jobs\": [], \"extra\": 1}").is_err());
        assert!(parse_instance(r#"{"machines": 1, "jobs": [{"id": "a", "size": "0", "eligible": [0]}]}"#).is_err());
        assert!(parse_instance(r#"{"machines": 0, "jobs": []}"#).is_err());
    }

    #[test]
    fn serialize_round_trip() {
        let inst = Instance::new(
            3,
            vec![
                Job::new("a", frac(7, 3), vec![0, 2]).unwrap(),
                Job::new("b \"quoted\"", int(5), vec![1]).unwrap(),
            ],
        )
        .unwrap();
        let text = serialize_instance(&inst);
        assert_eq!(parse_instance(&text).unwrap(), inst);
    }
}
