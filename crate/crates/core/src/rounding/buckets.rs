use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::conflp::Marginals;
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::rational::Rational;

/// Global identifier of a bucket `(machine, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BucketId {
    pub machine: usize,
    pub index: usize,
}

/// The fractional matching `z` between jobs and unit-capacity buckets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BucketMatching {
    job_count: usize,
    /// `machines[i][t]` lists `(job, z)` in pouring order.
    machines: Vec<Vec<Vec<(usize, Rational)>>>,
}

impl BucketMatching {
    pub fn machine_count(&self) -> usize {
        self.machines.len()
    }

    pub fn job_count(&self) -> usize {
        self.job_count
    }

    /// `k_i`.
    pub fn bucket_count(&self, machine: usize) -> usize {
        self.machines[machine].len()
    }

    pub fn total_buckets(&self) -> usize {
        self.machines.iter().map(Vec::len).sum()
    }

    pub fn bucket(&self, id: BucketId) -> &[(usize, Rational)] {
        &self.machines[id.machine][id.index]
    }

    /// All buckets in `(machine, t)` order.
    pub fn bucket_ids(&self) -> impl Iterator<Item = BucketId> + '_ {
        self.machines
            .iter()
            .enumerate()
            .flat_map(|(machine, bs)| (0..bs.len()).map(move |index| BucketId { machine, index }))
    }

    /// Every positive entry as `(bucket, job, z)`.
    pub fn edges(&self) -> impl Iterator<Item = (BucketId, usize, &Rational)> + '_ {
        self.bucket_ids()
            .flat_map(move |b| self.bucket(b).iter().map(move |(j, z)| (b, *j, z)))
    }

    pub fn edge_count(&self) -> usize {
        self.machines.iter().flatten().map(Vec::len).sum()
    }

    /// Checks saturation, bucket capacity, marginal preservation and the
    /// size-monotone bucket structure.
    pub fn check(&self, inst: &Instance, x: &Marginals) -> Result<()> {
        let fail = |m: String| Err(Error::Internal(format!("bucket matching: {m}")));
        let mut per_job = vec![Rational::zero(); self.job_count];
        for (i, buckets) in self.machines.iter().enumerate() {
            let k = buckets.len();
            let total = x.machine_total(i);
            if total.ceil() != Rational::from_integer(BigInt::from(k)) {
                return fail(format!("machine {i} has {k} buckets for total {total}"));
            }
            let mut per_machine = vec![Rational::zero(); self.job_count];
            for (t, bucket) in buckets.iter().enumerate() {
                let load: Rational = bucket.iter().map(|(_, z)| z).sum();
                if load > Rational::one() || (t + 1 < k && !load.is_one()) {
                    return fail(format!("bucket ({i},{t}) has load {load}"));
                }
                for (j, z) in bucket {
                    if !(z > &Rational::zero() && z <= &Rational::one()) {
                        return fail(format!("entry ({i},{t},{j}) = {z}"));
                    }
                    per_job[*j] += z;
                    per_machine[*j] += z;
                }
            }
            for (j, v) in per_machine.iter().enumerate() {
                if *v != x.get(i, j) {
                    return fail(format!(
                        "marginal of job {j} on machine {i} is {v}, expected {}",
                        x.get(i, j)
                    ));
                }
            }
            // every job in bucket t' > t is no larger than every job in bucket t
            for t in 1..k {
                let smallest_before = buckets[t - 1].iter().map(|(j, _)| inst.size(*j)).min();
                let largest_here = buckets[t].iter().map(|(j, _)| inst.size(*j)).max();
                if let (Some(a), Some(b)) = (smallest_before, largest_here) {
                    if b > a {
                        return fail(format!(
                            "bucket ({i},{t}) holds a job larger than bucket ({i},{})",
                            t - 1
                        ));
                    }
                }
            }
        }
        if let Some(j) = per_job.iter().position(|v| !v.is_one()) {
            return fail(format!("job {j} is matched with total {}", per_job[j]));
        }
        Ok(())
    }
}

/// Pours each machine's jobs, largest first (ties by index), into
/// consecutive unit buckets, splitting a job across a boundary when needed.
pub fn build_buckets(inst: &Instance, x: &Marginals) -> Result<BucketMatching> {
    x.validate(inst)?;
    let machines = (0..x.machine_count())
        .map(|i| {
            let mut row: Vec<&(usize, Rational)> = x.row(i).iter().collect();
            row.sort_by(|(a, _), (b, _)| inst.size(*b).cmp(inst.size(*a)).then(a.cmp(b)));
            let mut buckets: Vec<Vec<(usize, Rational)>> = Vec::new();
            let mut fill = Rational::one();
            for (j, v) in row {
                let mut left = v.clone();
                while !left.is_zero() {
                    if fill.is_one() {
                        buckets.push(Vec::new());
                        fill = Rational::zero();
                    }
                    let room = Rational::one() - &fill;
                    let take = if left < room { left.clone() } else { room };
                    fill += &take;
                    left -= &take;
                    buckets.last_mut().expect("pushed above").push((*j, take));
                }
            }
            buckets
        })
        .collect();
    Ok(BucketMatching {
        job_count: x.job_count(),
        machines,
    })
}
