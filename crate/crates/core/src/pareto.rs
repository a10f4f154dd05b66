//! Dominance, fast non-dominated sorting, crowding distance, the bounded
//! Pareto archive with an adaptive grid, and 2-D hypervolume.

use std::collections::BTreeMap;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::objectives::{ChannelMask, ObjectiveVector};
use crate::Rng;

/// Rank value of a solution that has not been sorted yet.
pub const UNRANKED: usize = usize::MAX;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredSolution {
    pub mask: ChannelMask,
    pub obj: ObjectiveVector,
    pub rank: usize,
    pub crowding: f64,
}

impl ScoredSolution {
    pub fn new(mask: ChannelMask, obj: ObjectiveVector) -> Self {
        ScoredSolution {
            mask,
            obj,
            rank: UNRANKED,
            crowding: 0.0,
        }
    }
}

/// `a` dominates `b` under minimisation.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> bool {
    a.f1 <= b.f1 && a.f2 <= b.f2 && (a.f1 < b.f1 || a.f2 < b.f2)
}

/// Fast non-dominated sort over raw objective vectors. Fronts hold indices in
/// ascending order.
pub fn nd_sort_objectives(objs: &[ObjectiveVector]) -> Vec<Vec<usize>> {
    let n = objs.len();
    let mut dominated_by_count = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in (i + 1)..n {
            if dominates(&objs[i], &objs[j]) {
                dominates_list[i].push(j);
                dominated_by_count[j] += 1;
            } else if dominates(&objs[j], &objs[i]) {
                dominates_list[j].push(i);
                dominated_by_count[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates_list[i] {
                dominated_by_count[j] -= 1;
                if dominated_by_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Sort the population into fronts and write each solution's rank.
pub fn nd_sort(pop: &mut [ScoredSolution]) -> Vec<Vec<usize>> {
    let objs: Vec<_> = pop.iter().map(|s| s.obj).collect();
    let fronts = nd_sort_objectives(&objs);
    for (r, front) in fronts.iter().enumerate() {
        for &i in front {
            pop[i].rank = r;
        }
    }
    fronts
}

/// Crowding distances of a set of (mutually non-dominated) vectors, in input
/// order.
pub fn crowding_distances(objs: &[ObjectiveVector]) -> Vec<f64> {
    let n = objs.len();
    let mut dist = vec![0.0; n];
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    for m in 0..2 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| objs[a].get(m).total_cmp(&objs[b].get(m)).then(a.cmp(&b)));
        let lo = objs[order[0]].get(m);
        let hi = objs[order[n - 1]].get(m);
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        let range = hi - lo;
        if range <= 0.0 {
            continue;
        }
        for w in 1..n - 1 {
            let gap = objs[order[w + 1]].get(m) - objs[order[w - 1]].get(m);
            dist[order[w]] += gap / range;
        }
    }
    dist
}

/// Write crowding distances for the members of one front.
pub fn crowding_distance(pop: &mut [ScoredSolution], front: &[usize]) {
    let objs: Vec<_> = front.iter().map(|&i| pop[i].obj).collect();
    for (&i, d) in front.iter().zip(crowding_distances(&objs)) {
        pop[i].crowding = d;
    }
}

/// Rank and crowd a whole population; returns the fronts.
pub fn rank_and_crowd(pop: &mut [ScoredSolution]) -> Vec<Vec<usize>> {
    let fronts = nd_sort(pop);
    for f in &fronts {
        crowding_distance(pop, f);
    }
    fronts
}

/// Indices of the non-dominated members of `objs`.
pub fn non_dominated(objs: &[ObjectiveVector]) -> Vec<usize> {
    (0..objs.len())
        .filter(|&i| !objs.iter().any(|o| dominates(o, &objs[i])))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub divisions: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { divisions: 10 }
    }
}

/// Bounded set of mutually non-dominated solutions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoArchive {
    members: Vec<ScoredSolution>,
    capacity: usize,
}

impl ParetoArchive {
    pub fn new(capacity: usize) -> Self {
        ParetoArchive {
            members: Vec::new(),
            capacity: capacity.max(1),
        }
    }

    pub fn members(&self) -> &[ScoredSolution] {
        &self.members
    }

    pub fn into_members(self) -> Vec<ScoredSolution> {
        self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Insert `s` unless a member dominates it or already holds the same
    /// mask; members `s` dominates are removed. Over capacity, one member of
    /// the most crowded grid cell is evicted at random. Returns whether `s`
    /// was added.
    pub fn insert(&mut self, s: ScoredSolution, grid: &GridConfig, rng: &mut Rng) -> bool {
        if self
            .members
            .iter()
            .any(|m| dominates(&m.obj, &s.obj) || m.mask == s.mask)
        {
            return false;
        }
        self.members.retain(|m| !dominates(&s.obj, &m.obj));
        self.members.push(s);
        if self.members.len() > self.capacity {
            let cells = self.grid_cells(grid);
            let mut occupancy: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
            for (i, c) in cells.into_iter().enumerate() {
                occupancy.entry(c).or_default().push(i);
            }
            let crowded = occupancy
                .values()
                .max_by(|a, b| a.len().cmp(&b.len()).then(b.first().cmp(&a.first())))
                .expect("archive is non-empty");
            let victim = crowded[rng.random_range(0..crowded.len())];
            self.members.remove(victim);
        }
        true
    }

    /// Hypercube coordinates of every member on a grid spanning the current
    /// objective bounds.
    pub fn grid_cells(&self, grid: &GridConfig) -> Vec<(usize, usize)> {
        let div = grid.divisions.max(1);
        let bounds = |m: usize| {
            self.members
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| {
                    let v = s.obj.get(m);
                    (lo.min(v), hi.max(v))
                })
        };
        let b = [bounds(0), bounds(1)];
        let cell = |v: f64, (lo, hi): (f64, f64)| {
            if hi > lo {
                (((v - lo) / (hi - lo)) * div as f64)
                    .floor()
                    .clamp(0.0, (div - 1) as f64) as usize
            } else {
                0
            }
        };
        self.members
            .iter()
            .map(|s| (cell(s.obj.f1, b[0]), cell(s.obj.f2, b[1])))
            .collect()
    }

    /// Roulette over occupied cells weighted by inverse occupancy, then a
    /// uniform member of the chosen cell.
    pub fn select_leader(&self, grid: &GridConfig, rng: &mut Rng) -> Option<&ScoredSolution> {
        if self.members.is_empty() {
            return None;
        }
        let mut occupancy: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (i, c) in self.grid_cells(grid).into_iter().enumerate() {
            occupancy.entry(c).or_default().push(i);
        }
        let cells: Vec<&Vec<usize>> = occupancy.values().collect();
        let weights: Vec<f64> = cells.iter().map(|c| 1.0 / c.len() as f64).collect();
        let total: f64 = weights.iter().sum();
        let mut pick = rng.random::<f64>() * total;
        let mut chosen = cells.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if pick < *w {
                chosen = i;
                break;
            }
            pick -= w;
        }
        let cell = cells[chosen];
        Some(&self.members[cell[rng.random_range(0..cell.len())]])
    }
}

/// Area dominated by `points` and bounded by `reference` (minimisation).
/// Points not strictly better than the reference in both objectives are
/// ignored.
pub fn hypervolume_2d(points: &[ObjectiveVector], reference: ObjectiveVector) -> f64 {
    let inside: Vec<ObjectiveVector> = points
        .iter()
        .copied()
        .filter(|p| p.f1 < reference.f1 && p.f2 < reference.f2)
        .collect();
    let mut front: Vec<ObjectiveVector> = non_dominated(&inside).into_iter().map(|i| inside[i]).collect();
    front.sort_by(|a, b| a.f1.total_cmp(&b.f1).then(a.f2.total_cmp(&b.f2)));
    front.dedup();
    let mut hv = 0.0;
    for (i, p) in front.iter().enumerate() {
        let next_f1 = front.get(i + 1).map_or(reference.f1, |q| q.f1);
        hv += (next_f1 - p.f1) * (reference.f2 - p.f2);
    }
    hv
}
