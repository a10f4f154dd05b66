//! Multi-objective search over channel masks.
//!
//! All three optimisers minimise the [`ObjectiveVector`] of an
//! [`ObjectiveContext`] subject to its cardinality bound, and are pure
//! functions of `(context, config, seed)`.

mod moead;
mod mopso;
mod nsga2;
mod operators;

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::objectives::{ChannelMask, ObjectiveContext, ObjectiveVector};
use crate::pareto::{rank_and_crowd, ScoredSolution};
use crate::Result;

pub use moead::{neighborhoods, run_moead, tchebycheff, uniform_weights, MoeadConfig, MoeadResult};
pub use mopso::{run_mopso, MopsoConfig, MopsoResult, SwarmState};
pub use nsga2::{run_nsga2, Nsga2Config, Nsga2Result};
pub use operators::{binary_tournament, bit_flip_mutation, mutate, single_point_crossover, MutationMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Nsga2,
    Mopso,
    Moead,
    Greedy,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [Algorithm::Nsga2, Algorithm::Mopso, Algorithm::Moead, Algorithm::Greedy];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Nsga2 => "nsga2",
            Algorithm::Mopso => "mopso",
            Algorithm::Moead => "moead",
            Algorithm::Greedy => "greedy",
        }
    }

    pub fn is_multi_objective(self) -> bool {
        !matches!(self, Algorithm::Greedy)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| crate::Error::Config(format!("unknown algorithm {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub generation: usize,
    pub best_f1: f64,
    pub best_f2: f64,
    pub mean_f1: f64,
    pub mean_f2: f64,
}

/// Per-generation objective statistics of the working population.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceTrace {
    pub rows: Vec<TraceRow>,
}

impl ConvergenceTrace {
    pub(crate) fn record<'a>(&mut self, generation: usize, objs: impl IntoIterator<Item = &'a ObjectiveVector>) {
        let mut n = 0usize;
        let mut row = TraceRow {
            generation,
            best_f1: f64::INFINITY,
            best_f2: f64::INFINITY,
            mean_f1: 0.0,
            mean_f2: 0.0,
        };
        for o in objs {
            row.best_f1 = row.best_f1.min(o.f1);
            row.best_f2 = row.best_f2.min(o.f2);
            row.mean_f1 += o.f1;
            row.mean_f2 += o.f2;
            n += 1;
        }
        if n > 0 {
            row.mean_f1 /= n as f64;
            row.mean_f2 /= n as f64;
        }
        self.rows.push(row);
    }

    /// `generation,best_f1,best_f2,mean_f1,mean_f2`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("generation,best_f1,best_f2,mean_f1,mean_f2\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{:.6},{:.6},{:.6},{:.6}",
                r.generation, r.best_f1, r.best_f2, r.mean_f1, r.mean_f2
            );
        }
        s
    }
}

pub(crate) fn score(ctx: &ObjectiveContext, mask: ChannelMask) -> Result<ScoredSolution> {
    let obj = ctx.evaluate(&mask)?;
    Ok(ScoredSolution::new(mask, obj))
}

/// Up to `k` distinct candidates: whole fronts in rank order, each front
/// ordered by descending crowding distance (ties by position), filling from
/// later fronts when the first is too small.
pub fn select_candidates(pool: &[ScoredSolution], k: usize) -> Vec<ScoredSolution> {
    let mut seen = HashSet::new();
    let mut unique: Vec<ScoredSolution> = pool.iter().filter(|s| seen.insert(s.mask.clone())).cloned().collect();
    let fronts = rank_and_crowd(&mut unique);
    let mut out = Vec::with_capacity(k);
    for mut front in fronts {
        front.sort_by(|&a, &b| unique[b].crowding.total_cmp(&unique[a].crowding).then(a.cmp(&b)));
        for i in front {
            if out.len() == k {
                return out;
            }
            out.push(unique[i].clone());
        }
    }
    out
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use rand::Rng as _;

    /// Random per-channel scores shaped like the real objectives.
    pub fn random_context(n: usize, l: usize, seed: u64) -> ObjectiveContext {
        let mut rng = crate::rng_from_seed(seed);
        let sp = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        let disc = (0..n).map(|_| rng.random_range(0.0..60.0)).collect();
        ObjectiveContext::new(sp, disc, l).unwrap()
    }

    /// Every feasible mask and its objective vector.
    pub fn enumerate(ctx: &ObjectiveContext) -> Vec<(ChannelMask, ObjectiveVector)> {
        let n = ctx.n_channels();
        (1u32..(1 << n))
            .filter(|b| b.count_ones() as usize <= ctx.max_channels())
            .map(|b| {
                let m = ChannelMask::from_bits((0..n).map(|i| b >> i & 1 == 1).collect());
                let o = ctx.evaluate(&m).unwrap();
                (m, o)
            })
            .collect()
    }

    pub fn true_front(ctx: &ObjectiveContext) -> Vec<(ChannelMask, ObjectiveVector)> {
        let all = enumerate(ctx);
        all.iter()
            .filter(|(_, o)| !all.iter().any(|(_, p)| crate::pareto::dominates(p, o)))
            .cloned()
            .collect()
    }

    /// Channel 0 beats every other channel on both scores.
    pub fn dominant_context(n: usize) -> ObjectiveContext {
        let mut sp = vec![0.1; n];
        let mut disc = vec![1.0; n];
        sp[0] = 1.0;
        disc[0] = 100.0;
        ObjectiveContext::new(sp, disc, 1).unwrap()
    }
}
