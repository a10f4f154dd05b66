use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::nsga2::check_prob;
use super::operators::{mutate, MutationMode};
use super::{score, ConvergenceTrace};
use crate::objectives::{random_mask, repair, ChannelMask, ObjectiveContext};
use crate::pareto::{dominates, GridConfig, ParetoArchive, ScoredSolution};
use crate::{rng_from_seed, Error, Result, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MopsoConfig {
    pub swarm_size: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub c1: f64,
    pub c2: f64,
    pub repository: usize,
    pub grid_divisions: usize,
    pub p_m: f64,
    pub mutation: MutationMode,
    /// Velocity components are clamped to `[-v_max, v_max]`.
    pub v_max: f64,
}

impl Default for MopsoConfig {
    fn default() -> Self {
        MopsoConfig {
            swarm_size: 10,
            iterations: 100,
            inertia: 0.5,
            c1: 2.0,
            c2: 2.0,
            repository: 100,
            grid_divisions: 10,
            p_m: 0.1,
            mutation: MutationMode::PerBit,
            v_max: 6.0,
        }
    }
}

impl MopsoConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.swarm_size == 0 {
            return bad("mopso swarm_size must be positive".into());
        }
        if !(self.inertia > 0.0 && self.inertia <= 1.0) {
            return bad(format!("mopso inertia must lie in (0, 1], got {}", self.inertia));
        }
        if !(self.c1 >= 0.0 && self.c2 >= 0.0) {
            return bad(format!("mopso c1, c2 must be >= 0, got {}, {}", self.c1, self.c2));
        }
        if self.repository == 0 || self.grid_divisions == 0 {
            return bad("mopso repository and grid_divisions must be positive".into());
        }
        if !(self.v_max > 0.0) {
            return bad(format!("mopso v_max must be positive, got {}", self.v_max));
        }
        check_prob("mopso p_m", self.p_m)
    }

    fn grid(&self) -> GridConfig {
        GridConfig {
            divisions: self.grid_divisions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwarmState {
    pub pos: Vec<ScoredSolution>,
    pub vel: Vec<Vec<f64>>,
    pub pbest: Vec<ScoredSolution>,
    pub rep: ParetoArchive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MopsoResult {
    pub swarm: SwarmState,
    pub trace: ConvergenceTrace,
}

impl MopsoResult {
    pub fn repository(&self) -> &[ScoredSolution] {
        self.swarm.rep.members()
    }

    /// Repository followed by the personal bests, the pool candidates are
    /// drawn from.
    pub fn candidate_pool(&self) -> Vec<ScoredSolution> {
        self.swarm
            .rep
            .members()
            .iter()
            .chain(&self.swarm.pbest)
            .cloned()
            .collect()
    }
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

fn step(
    particle: &ChannelMask,
    vel: &mut [f64],
    pbest: &ChannelMask,
    leader: &ChannelMask,
    cfg: &MopsoConfig,
    rng: &mut Rng,
) -> ChannelMask {
    let bit = |m: &ChannelMask, i: usize| m.get(i) as u8 as f64;
    let mut next = ChannelMask::empty(particle.len());
    for (i, v) in vel.iter_mut().enumerate() {
        let (r1, r2) = (rng.random::<f64>(), rng.random::<f64>());
        let x = bit(particle, i);
        *v = (cfg.inertia * *v + cfg.c1 * r1 * (bit(pbest, i) - x) + cfg.c2 * r2 * (bit(leader, i) - x))
            .clamp(-cfg.v_max, cfg.v_max);
        next.set(i, rng.random::<f64>() < sigmoid(*v));
    }
    next
}

pub fn run_mopso(ctx: &ObjectiveContext, cfg: &MopsoConfig, seed: u64) -> Result<MopsoResult> {
    cfg.validate()?;
    let (n, l) = (ctx.n_channels(), ctx.max_channels());
    let grid = cfg.grid();
    let mut rng = rng_from_seed(seed);

    let pos = (0..cfg.swarm_size)
        .map(|_| score(ctx, random_mask(n, l, &mut rng)))
        .collect::<Result<Vec<_>>>()?;
    let mut rep = ParetoArchive::new(cfg.repository);
    for s in &pos {
        rep.insert(s.clone(), &grid, &mut rng);
    }
    let mut swarm = SwarmState {
        pbest: pos.clone(),
        vel: vec![vec![0.0; n]; cfg.swarm_size],
        pos,
        rep,
    };
    let mut trace = ConvergenceTrace::default();
    trace.record(0, swarm.pos.iter().map(|s| &s.obj));

    for t in 1..=cfg.iterations {
        for j in 0..cfg.swarm_size {
            let leader = swarm
                .rep
                .select_leader(&grid, &mut rng)
                .expect("repository holds the initial non-dominated set")
                .mask
                .clone();
            let moved = step(
                &swarm.pos[j].mask,
                &mut swarm.vel[j],
                &swarm.pbest[j].mask,
                &leader,
                cfg,
                &mut rng,
            );
            let moved = repair(&moved, l, &mut rng);
            let moved = repair(&mutate(&moved, cfg.p_m, cfg.mutation, &mut rng), l, &mut rng);
            let s = score(ctx, moved)?;
            if dominates(&s.obj, &swarm.pbest[j].obj) {
                swarm.pbest[j] = s.clone();
            }
            swarm.pos[j] = s;
        }
        for s in &swarm.pos {
            swarm.rep.insert(s.clone(), &grid, &mut rng);
        }
        trace.record(t, swarm.pos.iter().map(|s| &s.obj));
    }
    Ok(MopsoResult { swarm, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optim::testutil::{dominant_context, random_context};

    #[test]
    fn config_validation() {
        assert!(MopsoConfig::default().validate().is_ok());
        for bad in [
            MopsoConfig {
                inertia: 0.0,
                ..Default::default()
            },
            MopsoConfig {
                inertia: 1.5,
                ..Default::default()
            },
            MopsoConfig {
                c1: -1.0,
                ..Default::default()
            },
            MopsoConfig {
                swarm_size: 0,
                ..Default::default()
            },
            MopsoConfig {
                p_m: 2.0,
                ..Default::default()
            },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
    }

    #[test]
    fn velocity_is_clamped() {
        let mut rng = crate::rng_from_seed(0);
        let cfg = MopsoConfig {
            c1: 100.0,
            c2: 100.0,
            ..Default::default()
        };
        let mut vel = vec![0.0; 4];
        let zero = ChannelMask::empty(4);
        let ones = ChannelMask::from_bits(vec![true; 4]);
        for _ in 0..10 {
            step(&zero, &mut vel, &ones, &ones, &cfg, &mut rng);
        }
        assert!(vel.iter().all(|v| v.abs() <= 6.0));
    }

    #[test]
    fn dominant_channel_fills_repository() {
        let ctx = dominant_context(8);
        let r = run_mopso(&ctx, &MopsoConfig::default(), 1).unwrap();
        let masks: Vec<_> = r.repository().iter().map(|s| s.mask.indices()).collect();
        assert_eq!(masks, vec![vec![0]]);
    }

    #[test]
    fn deterministic_feasible_and_nondominated() {
        let ctx = random_context(16, 4, 7);
        let cfg = MopsoConfig {
            iterations: 40,
            ..Default::default()
        };
        let a = run_mopso(&ctx, &cfg, 2).unwrap();
        assert_eq!(a, run_mopso(&ctx, &cfg, 2).unwrap());
        let rep = a.repository();
        assert!(!rep.is_empty() && rep.len() <= 100);
        for s in rep.iter().chain(&a.swarm.pos).chain(&a.swarm.pbest) {
            assert!((1..=4).contains(&s.mask.count()));
        }
        for x in rep {
            assert!(!rep.iter().any(|y| dominates(&y.obj, &x.obj)));
        }
    }
}
