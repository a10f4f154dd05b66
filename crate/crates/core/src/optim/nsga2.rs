use serde::{Deserialize, Serialize};

use super::operators::{binary_tournament, mutate, single_point_crossover, MutationMode};
use super::{score, ConvergenceTrace};
use crate::objectives::{random_mask, repair, ObjectiveContext};
use crate::pareto::{rank_and_crowd, ScoredSolution};
use crate::{rng_from_seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Nsga2Config {
    pub pop_size: usize,
    pub generations: usize,
    pub p_c: f64,
    pub p_m: f64,
    pub mutation: MutationMode,
}

impl Default for Nsga2Config {
    fn default() -> Self {
        Nsga2Config {
            pop_size: 10,
            generations: 1000,
            p_c: 0.7,
            p_m: 0.1,
            mutation: MutationMode::PerBit,
        }
    }
}

impl Nsga2Config {
    pub fn validate(&self) -> Result<()> {
        if self.pop_size < 4 || !self.pop_size.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "nsga2 pop_size must be even and >= 4, got {}",
                self.pop_size
            )));
        }
        check_prob("nsga2 p_c", self.p_c)?;
        check_prob("nsga2 p_m", self.p_m)
    }
}

pub(crate) fn check_prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must lie in [0, 1], got {p}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nsga2Result {
    /// Generation-G population with ranks and crowding from its own sort.
    pub population: Vec<ScoredSolution>,
    /// Rank-0 members of `population`.
    pub front: Vec<ScoredSolution>,
    pub trace: ConvergenceTrace,
}

pub fn run_nsga2(ctx: &ObjectiveContext, cfg: &Nsga2Config, seed: u64) -> Result<Nsga2Result> {
    cfg.validate()?;
    let (n, l) = (ctx.n_channels(), ctx.max_channels());
    let mut rng = rng_from_seed(seed);
    let p = cfg.pop_size;

    let mut pop = (0..p)
        .map(|_| score(ctx, random_mask(n, l, &mut rng)))
        .collect::<Result<Vec<_>>>()?;
    let mut trace = ConvergenceTrace::default();
    trace.record(0, pop.iter().map(|s| &s.obj));

    for g in 1..=cfg.generations {
        rank_and_crowd(&mut pop);
        let mut merged = pop.clone();
        for _ in 0..p / 2 {
            let a = binary_tournament(&pop, &mut rng)?.mask.clone();
            let b = binary_tournament(&pop, &mut rng)?.mask.clone();
            let (c1, c2) = single_point_crossover(&a, &b, cfg.p_c, &mut rng);
            for c in [c1, c2] {
                let c = repair(&mutate(&c, cfg.p_m, cfg.mutation, &mut rng), l, &mut rng);
                merged.push(score(ctx, c)?);
            }
        }
        pop = environmental_selection(merged, p);
        trace.record(g, pop.iter().map(|s| &s.obj));
    }

    let fronts = rank_and_crowd(&mut pop);
    let front = fronts
        .first()
        .map(|f| f.iter().map(|&i| pop[i].clone()).collect())
        .unwrap_or_default();
    Ok(Nsga2Result {
        population: pop,
        front,
        trace,
    })
}

/// Keep `p` members of `merged`: whole fronts while they fit, then the
/// split front by descending crowding distance.
fn environmental_selection(mut merged: Vec<ScoredSolution>, p: usize) -> Vec<ScoredSolution> {
    let fronts = rank_and_crowd(&mut merged);
    let mut keep = Vec::with_capacity(p);
    for mut front in fronts {
        if keep.len() + front.len() <= p {
            keep.extend(front);
            continue;
        }
        front.sort_by(|&a, &b| merged[b].crowding.total_cmp(&merged[a].crowding).then(a.cmp(&b)));
        keep.extend(front.into_iter().take(p - keep.len()));
        break;
    }
    keep.into_iter().map(|i| merged[i].clone()).collect()
}
