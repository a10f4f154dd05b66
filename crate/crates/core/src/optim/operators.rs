use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::objectives::ChannelMask;
use crate::pareto::ScoredSolution;
use crate::{Error, Result, Rng};

/// How `p_m` is read: each bit flips independently with probability `p_m`,
/// or with probability `p_m` the individual gets exactly one random flip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationMode {
    #[default]
    PerBit,
    PerIndividual,
}

/// With probability `p_c`, swap tails after a uniform cut in `[1, n-1]`.
pub fn single_point_crossover(
    p1: &ChannelMask,
    p2: &ChannelMask,
    p_c: f64,
    rng: &mut Rng,
) -> (ChannelMask, ChannelMask) {
    assert_eq!(p1.len(), p2.len(), "crossover parents differ in length");
    let n = p1.len();
    if n < 2 || !(rng.random::<f64>() < p_c) {
        return (p1.clone(), p2.clone());
    }
    let cut = rng.random_range(1..n);
    crossover_at(p1, p2, cut)
}

pub(crate) fn crossover_at(p1: &ChannelMask, p2: &ChannelMask, cut: usize) -> (ChannelMask, ChannelMask) {
    let (a, b) = (p1.bits(), p2.bits());
    let c1 = a[..cut].iter().chain(&b[cut..]).copied().collect();
    let c2 = b[..cut].iter().chain(&a[cut..]).copied().collect();
    (ChannelMask::from_bits(c1), ChannelMask::from_bits(c2))
}

/// Flip each bit independently with probability `p_m`.
pub fn bit_flip_mutation(m: &ChannelMask, p_m: f64, rng: &mut Rng) -> ChannelMask {
    let mut out = m.clone();
    for i in 0..out.len() {
        if rng.random::<f64>() < p_m {
            out.flip(i);
        }
    }
    out
}

pub fn mutate(m: &ChannelMask, p_m: f64, mode: MutationMode, rng: &mut Rng) -> ChannelMask {
    match mode {
        MutationMode::PerBit => bit_flip_mutation(m, p_m, rng),
        MutationMode::PerIndividual => {
            let mut out = m.clone();
            if !out.is_empty() && rng.random::<f64>() < p_m {
                let i = rng.random_range(0..out.len());
                out.flip(i);
            }
            out
        }
    }
}

/// Two uniform draws; lower rank wins, then higher crowding, then the first
/// draw.
pub fn binary_tournament<'a>(pop: &'a [ScoredSolution], rng: &mut Rng) -> Result<&'a ScoredSolution> {
    if pop.is_empty() {
        return Err(Error::Config("tournament over an empty population".into()));
    }
    let a = &pop[rng.random_range(0..pop.len())];
    let b = &pop[rng.random_range(0..pop.len())];
    Ok(tournament_winner(a, b))
}

pub(crate) fn tournament_winner<'a>(a: &'a ScoredSolution, b: &'a ScoredSolution) -> &'a ScoredSolution {
    if b.rank < a.rank || (b.rank == a.rank && b.crowding > a.crowding) {
        b
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::ObjectiveVector;

    fn mask(bits: &str) -> ChannelMask {
        ChannelMask::try_from(bits.to_string()).unwrap()
    }

    #[test]
    fn crossover_without_probability_copies_parents() {
        let mut rng = crate::rng_from_seed(0);
        let (a, b) = (mask("110000"), mask("000011"));
        for _ in 0..50 {
            assert_eq!(single_point_crossover(&a, &b, 0.0, &mut rng), (a.clone(), b.clone()));
        }
    }

    #[test]
    fn crossover_at_last_position_swaps_last_bit() {
        let (c1, c2) = crossover_at(&mask("110001"), &mask("001110"), 5);
        assert_eq!(c1, mask("110000"));
        assert_eq!(c2, mask("001111"));
    }

    #[test]
    fn crossover_conserves_bits() {
        let mut rng = crate::rng_from_seed(1);
        let (a, b) = (mask("1011001110"), mask("0110110001"));
        for _ in 0..100 {
            let (c1, c2) = single_point_crossover(&a, &b, 1.0, &mut rng);
            for i in 0..a.len() {
                let parents = a.get(i) as u8 + b.get(i) as u8;
                let kids = c1.get(i) as u8 + c2.get(i) as u8;
                assert_eq!(parents, kids);
            }
            assert_ne!((c1, c2), (a.clone(), b.clone()), "p_c = 1 must cut");
        }
    }

    #[test]
    fn mutation_extremes() {
        let mut rng = crate::rng_from_seed(2);
        let m = mask("1100101");
        assert_eq!(bit_flip_mutation(&m, 0.0, &mut rng), m);
        assert_eq!(bit_flip_mutation(&m, 1.0, &mut rng), mask("0011010"));
        let once = mutate(&m, 1.0, MutationMode::PerIndividual, &mut rng);
        let diff = (0..m.len()).filter(|&i| once.get(i) != m.get(i)).count();
        assert_eq!(diff, 1);
    }

    #[test]
    fn mutation_rate_monte_carlo() {
        // binomial(64, 0.1) has mean 6.4
        let mut rng = crate::rng_from_seed(3);
        let m = ChannelMask::empty(64);
        let total: usize = (0..10_000).map(|_| bit_flip_mutation(&m, 0.1, &mut rng).count()).sum();
        let mean = total as f64 / 10_000.0;
        assert!((6.0..=6.8).contains(&mean), "mean flips {mean}");
    }

    fn scored(rank: usize, crowding: f64) -> ScoredSolution {
        let mut s = ScoredSolution::new(ChannelMask::empty(2), ObjectiveVector::default());
        s.rank = rank;
        s.crowding = crowding;
        s
    }

    #[test]
    fn tournament_rules() {
        let (r0, r2) = (scored(0, 0.0), scored(2, 9.0));
        assert!(std::ptr::eq(tournament_winner(&r0, &r2), &r0));
        assert!(std::ptr::eq(tournament_winner(&r2, &r0), &r0));
        let (inf, one) = (scored(1, f64::INFINITY), scored(1, 1.0));
        assert!(std::ptr::eq(tournament_winner(&one, &inf), &inf));
        let (a, b) = (scored(1, 1.0), scored(1, 1.0));
        assert!(std::ptr::eq(tournament_winner(&a, &b), &a));
        let mut rng = crate::rng_from_seed(4);
        assert!(binary_tournament(&[], &mut rng).is_err());
    }
}
