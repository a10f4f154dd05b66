use std::collections::HashSet;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::nsga2::check_prob;
use super::operators::{mutate, single_point_crossover, MutationMode};
use super::{score, ConvergenceTrace};
use crate::objectives::{random_mask, repair, ObjectiveContext, ObjectiveVector};
use crate::pareto::{non_dominated, ScoredSolution};
use crate::{rng_from_seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MoeadConfig {
    pub subproblems: usize,
    pub neighborhood: usize,
    pub generations: usize,
    pub p_c: f64,
    pub p_m: f64,
    pub delta: f64,
    pub mutation: MutationMode,
}

impl Default for MoeadConfig {
    fn default() -> Self {
        MoeadConfig {
            subproblems: 19,
            neighborhood: 10,
            generations: 1000,
            p_c: 0.7,
            p_m: 0.1,
            delta: 0.7,
            mutation: MutationMode::PerBit,
        }
    }
}

impl MoeadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.subproblems < 2 {
            return Err(Error::Config(format!(
                "moead needs at least 2 subproblems, got {}",
                self.subproblems
            )));
        }
        if self.neighborhood == 0 || self.neighborhood > self.subproblems {
            return Err(Error::Config(format!(
                "moead neighborhood {} must lie in [1, {}]",
                self.neighborhood, self.subproblems
            )));
        }
        check_prob("moead p_c", self.p_c)?;
        check_prob("moead p_m", self.p_m)?;
        check_prob("moead delta", self.delta)
    }
}

/// `max_j lambda_j * |obj_j - z_j|`
pub fn tchebycheff(obj: &ObjectiveVector, lambda: [f64; 2], z_star: &ObjectiveVector) -> f64 {
    (0..2)
        .map(|j| lambda[j] * (obj.get(j) - z_star.get(j)).abs())
        .fold(0.0, f64::max)
}

/// `lambda_k = (k/(P-1), 1 - k/(P-1))`
pub fn uniform_weights(p: usize) -> Vec<[f64; 2]> {
    let d = (p.max(2) - 1) as f64;
    (0..p).map(|k| [k as f64 / d, 1.0 - k as f64 / d]).collect()
}

/// The `t` nearest weight vectors to each weight (itself included), by
/// Euclidean distance with ties to the lower index.
pub fn neighborhoods(weights: &[[f64; 2]], t: usize) -> Vec<Vec<usize>> {
    weights
        .iter()
        .map(|a| {
            let mut idx: Vec<usize> = (0..weights.len()).collect();
            let dist = |i: usize| {
                let b = weights[i];
                (a[0] - b[0]).hypot(a[1] - b[1])
            };
            idx.sort_by(|&i, &j| dist(i).total_cmp(&dist(j)).then(i.cmp(&j)));
            idx.truncate(t);
            idx
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MoeadResult {
    /// Final solution of each subproblem.
    pub solutions: Vec<ScoredSolution>,
    /// Non-dominated members of `solutions`, one per distinct mask.
    pub nd_set: Vec<ScoredSolution>,
    /// Ideal point after initialisation and after every generation.
    pub ideal_history: Vec<ObjectiveVector>,
    pub trace: ConvergenceTrace,
}

pub fn run_moead(ctx: &ObjectiveContext, cfg: &MoeadConfig, seed: u64) -> Result<MoeadResult> {
    cfg.validate()?;
    let (n, l) = (ctx.n_channels(), ctx.max_channels());
    let mut rng = rng_from_seed(seed);
    let weights = uniform_weights(cfg.subproblems);
    let hood = neighborhoods(&weights, cfg.neighborhood);
    let all: Vec<usize> = (0..cfg.subproblems).collect();

    let mut x = (0..cfg.subproblems)
        .map(|_| score(ctx, random_mask(n, l, &mut rng)))
        .collect::<Result<Vec<_>>>()?;
    let mut z = x
        .iter()
        .fold(ObjectiveVector::new(f64::INFINITY, f64::INFINITY), |z, s| {
            ObjectiveVector::new(z.f1.min(s.obj.f1), z.f2.min(s.obj.f2))
        });
    let mut ideal_history = vec![z];
    let mut trace = ConvergenceTrace::default();
    trace.record(0, x.iter().map(|s| &s.obj));

    for g in 1..=cfg.generations {
        for nb in &hood {
            let pool = if rng.random::<f64>() < cfg.delta { nb } else { &all };
            let (a, b) = pick_two(pool, &mut rng);
            let (child, _) = single_point_crossover(&x[a].mask, &x[b].mask, cfg.p_c, &mut rng);
            let child = repair(&mutate(&child, cfg.p_m, cfg.mutation, &mut rng), l, &mut rng);
            let y = score(ctx, child)?;
            z = ObjectiveVector::new(z.f1.min(y.obj.f1), z.f2.min(y.obj.f2));
            for &j in nb {
                if tchebycheff(&y.obj, weights[j], &z) < tchebycheff(&x[j].obj, weights[j], &z) {
                    x[j] = y.clone();
                }
            }
        }
        ideal_history.push(z);
        trace.record(g, x.iter().map(|s| &s.obj));
    }

    let objs: Vec<ObjectiveVector> = x.iter().map(|s| s.obj).collect();
    let mut seen = HashSet::new();
    let nd_set = non_dominated(&objs)
        .into_iter()
        .filter(|&i| seen.insert(x[i].mask.clone()))
        .map(|i| x[i].clone())
        .collect();
    Ok(MoeadResult {
        solutions: x,
        nd_set,
        ideal_history,
        trace,
    })
}

/// Two distinct members of `pool` when it has at least two.
fn pick_two(pool: &[usize], rng: &mut crate::Rng) -> (usize, usize) {
    if pool.len() < 2 {
        return (pool[0], pool[0]);
    }
    let i = rng.random_range(0..pool.len());
    let mut j = rng.random_range(0..pool.len() - 1);
    if j >= i {
        j += 1;
    }
    (pool[i], pool[j])
}
