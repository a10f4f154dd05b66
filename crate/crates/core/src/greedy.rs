//! Accuracy-driven forward selection, the baseline without spatial or
//! spectral prior knowledge.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::objectives::ChannelMask;
use crate::{Error, Result};

/// Subset size at which forward selection stops.
pub const DEFAULT_MAX_CHANNELS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyStep {
    pub channel: usize,
    pub subset: ChannelMask,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyTrace {
    /// `(channel, accuracy)` best first.
    pub ranked_channels: Vec<(usize, f64)>,
    pub steps: Vec<GreedyStep>,
    pub final_subset: ChannelMask,
}

impl GreedyTrace {
    pub fn final_accuracy(&self) -> f64 {
        self.steps.last().map_or(0.0, |s| s.accuracy)
    }

    /// `step,channel,accuracy`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("step,channel,accuracy\n");
        for (i, st) in self.steps.iter().enumerate() {
            let _ = writeln!(s, "{},{},{:.6}", i, st.channel, st.accuracy);
        }
        s
    }
}

fn evaluate_all<F>(masks: Vec<ChannelMask>, eval: &F) -> Result<Vec<f64>>
where
    F: Fn(&ChannelMask) -> Result<f64> + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        masks.par_iter().map(eval).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        masks.iter().map(eval).collect()
    }
}

/// Score every channel alone; best first, ties by index.
pub fn rank_single_channels<F>(n_channels: usize, eval: &F) -> Result<Vec<(usize, f64)>>
where
    F: Fn(&ChannelMask) -> Result<f64> + Sync,
{
    if n_channels == 0 {
        return Err(Error::Trials("no channels to rank".into()));
    }
    let masks = (0..n_channels)
        .map(|i| ChannelMask::from_indices(n_channels, &[i]))
        .collect::<Result<Vec<_>>>()?;
    let acc = evaluate_all(masks, eval)?;
    let mut ranked: Vec<(usize, f64)> = acc.into_iter().enumerate().collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(ranked)
}

/// Forward selection from the best single channel. Each step adds the
/// candidate with the highest accuracy (ties by index) if it improves on
/// the current best; an equal accuracy is accepted only when the previous
/// step was not itself a plateau.
pub fn greedy_select<F>(n_channels: usize, eval: &F, max_channels: usize) -> Result<GreedyTrace>
where
    F: Fn(&ChannelMask) -> Result<f64> + Sync,
{
    if max_channels == 0 {
        return Err(Error::Config("greedy max_channels must be positive".into()));
    }
    let ranked = rank_single_channels(n_channels, eval)?;
    let (top, top_acc) = ranked[0];
    let mut subset = ChannelMask::from_indices(n_channels, &[top])?;
    let mut steps = vec![GreedyStep {
        channel: top,
        subset: subset.clone(),
        accuracy: top_acc,
    }];
    let mut best = top_acc;
    let mut on_plateau = false;
    while subset.count() < max_channels.min(n_channels) {
        let candidates: Vec<usize> = (0..n_channels).filter(|&i| !subset.get(i)).collect();
        let masks: Vec<ChannelMask> = candidates
            .iter()
            .map(|&i| {
                let mut m = subset.clone();
                m.set(i, true);
                m
            })
            .collect();
        let acc = evaluate_all(masks, eval)?;
        let (pos, &a) = acc
            .iter()
            .enumerate()
            .fold(None, |b: Option<(usize, &f64)>, (i, v)| match b {
                Some((_, bv)) if *bv >= *v => b,
                _ => Some((i, v)),
            })
            .expect("at least one candidate");
        let accept = a > best || (a == best && !on_plateau);
        if !accept {
            break;
        }
        on_plateau = a == best;
        best = a;
        subset.set(candidates[pos], true);
        steps.push(GreedyStep {
            channel: candidates[pos],
            subset: subset.clone(),
            accuracy: a,
        });
    }
    Ok(GreedyTrace {
        ranked_channels: ranked,
        steps,
        final_subset: subset,
    })
}
