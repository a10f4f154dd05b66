//! The two-objective evaluation of channel subsets.
//!
//! Both objectives are maximised in the original formulation; here they are
//! negated so every optimiser minimises `(f1, f2)`:
//!
//! * `f1 = -sum(sp_i)` over selected channels (spatial relevance)
//! * `f2 = -sum(d_i)` over selected channels (desynchronisation magnitude)

use std::fmt;
use std::ops::Add;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::signal::IttrdMatrix;
use crate::{Error, Result, Rng};

/// Binary channel-selection vector.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct ChannelMask(Vec<bool>);

impl ChannelMask {
    pub fn empty(n: usize) -> Self {
        ChannelMask(vec![false; n])
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        ChannelMask(bits)
    }

    pub fn from_indices(n: usize, indices: &[usize]) -> Result<Self> {
        let mut m = ChannelMask::empty(n);
        for &i in indices {
            if i >= n {
                return Err(Error::ChannelOutOfRange { index: i, len: n });
            }
            m.0[i] = true;
        }
        Ok(m)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i]
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.0[i] = v;
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = !self.0[i];
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    pub fn indices(&self) -> Vec<usize> {
        self.0.iter().enumerate().filter_map(|(i, &b)| b.then_some(i)).collect()
    }

    pub fn union(&self, other: &ChannelMask) -> ChannelMask {
        ChannelMask(self.0.iter().zip(&other.0).map(|(a, b)| *a || *b).collect())
    }

    pub fn intersects(&self, other: &ChannelMask) -> bool {
        self.0.iter().zip(&other.0).any(|(a, b)| *a && *b)
    }

    pub fn is_subset_of(&self, other: &ChannelMask) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| !*a || *b)
    }
}

impl fmt::Display for ChannelMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for ChannelMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ChannelMask({self})")
    }
}

impl From<ChannelMask> for String {
    fn from(m: ChannelMask) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for ChannelMask {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(format!("invalid mask character {other:?}")),
            })
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(ChannelMask)
    }
}

/// `(f1, f2)` in minimisation space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub f1: f64,
    pub f2: f64,
}

impl ObjectiveVector {
    pub const fn new(f1: f64, f2: f64) -> Self {
        ObjectiveVector { f1, f2 }
    }

    pub fn get(&self, m: usize) -> f64 {
        match m {
            0 => self.f1,
            1 => self.f2,
            _ => panic!("objective index {m} out of range"),
        }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.f1, self.f2]
    }
}

impl Add for ObjectiveVector {
    type Output = ObjectiveVector;

    fn add(self, rhs: ObjectiveVector) -> ObjectiveVector {
        ObjectiveVector::new(self.f1 + rhs.f1, self.f2 + rhs.f2)
    }
}

/// Cached per-channel scores plus the cardinality bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveContext {
    sp: Vec<f64>,
    disc: Vec<f64>,
    max_channels: usize,
}

impl ObjectiveContext {
    pub fn new(sp: Vec<f64>, disc: Vec<f64>, max_channels: usize) -> Result<Self> {
        if sp.len() != disc.len() {
            return Err(Error::LengthMismatch {
                expected: sp.len(),
                got: disc.len(),
            });
        }
        if sp.is_empty() {
            return Err(Error::Config("objective context needs at least one channel".into()));
        }
        if max_channels == 0 || max_channels > sp.len() {
            return Err(Error::Config(format!(
                "max channels {max_channels} must be in [1, {}]",
                sp.len()
            )));
        }
        if sp.iter().chain(&disc).any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite per-channel score".into()));
        }
        Ok(ObjectiveContext { sp, disc, max_channels })
    }

    pub fn n_channels(&self) -> usize {
        self.sp.len()
    }

    pub fn max_channels(&self) -> usize {
        self.max_channels
    }

    pub fn spatial(&self) -> &[f64] {
        &self.sp
    }

    pub fn discriminability(&self) -> &[f64] {
        &self.disc
    }

    /// Copy with both score vectors min-max scaled to `[0, 1]`.
    pub fn normalized(&self) -> ObjectiveContext {
        let scale = |v: &[f64]| {
            let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = hi - lo;
            v.iter()
                .map(|x| if span > 0.0 { (x - lo) / span } else { 1.0 })
                .collect()
        };
        ObjectiveContext {
            sp: scale(&self.sp),
            disc: scale(&self.disc),
            max_channels: self.max_channels,
        }
    }

    pub fn evaluate(&self, mask: &ChannelMask) -> Result<ObjectiveVector> {
        evaluate(mask, self)
    }
}

/// Mean over trials of `max(0, -ITTRD)`; degenerate cells count as 0.
pub fn channel_discriminability(ittrd: &IttrdMatrix) -> Vec<f64> {
    let nt = ittrd.nrows().max(1) as f64;
    ittrd
        .columns()
        .into_iter()
        .map(|col| col.iter().map(|v| v.map_or(0.0, |x| (-x).max(0.0))).sum::<f64>() / nt)
        .collect()
}

pub fn evaluate(mask: &ChannelMask, ctx: &ObjectiveContext) -> Result<ObjectiveVector> {
    if mask.len() != ctx.n_channels() {
        return Err(Error::LengthMismatch {
            expected: ctx.n_channels(),
            got: mask.len(),
        });
    }
    let mut out = ObjectiveVector::default();
    let mut any = false;
    for (i, _) in mask.bits().iter().enumerate().filter(|(_, &b)| b) {
        out.f1 -= ctx.sp[i];
        out.f2 -= ctx.disc[i];
        any = true;
    }
    if !any {
        return Err(Error::EmptyMask);
    }
    Ok(out)
}

/// Enforce `1 <= popcount <= max_channels`: drop random surplus bits, or
/// set one random bit in an empty mask.
pub fn repair(mask: &ChannelMask, max_channels: usize, rng: &mut Rng) -> ChannelMask {
    let mut out = mask.clone();
    let count = out.count();
    if count > max_channels {
        let mut on = out.indices();
        on.shuffle(rng);
        for &i in &on[..count - max_channels] {
            out.set(i, false);
        }
    } else if count == 0 && !out.is_empty() {
        let i = rng.random_range(0..out.len());
        out.set(i, true);
    }
    out
}

/// Uniform popcount in `[1, max_channels]`, then that many distinct channels.
pub fn random_mask(n: usize, max_channels: usize, rng: &mut Rng) -> ChannelMask {
    let k = rng.random_range(1..=max_channels.min(n));
    let chosen = rand::seq::index::sample(rng, n, k);
    let mut m = ChannelMask::empty(n);
    for i in chosen.iter() {
        m.set(i, true);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn matrix(cols: &[&[f64]]) -> IttrdMatrix {
        let nt = cols[0].len();
        Array2::from_shape_fn((nt, cols.len()), |(k, i)| Some(cols[i][k]))
    }

    #[test]
    fn discriminability_sign_and_clip() {
        assert_eq!(channel_discriminability(&matrix(&[&[0.0, 0.0]])), vec![0.0]);
        assert_eq!(channel_discriminability(&matrix(&[&[-50.0, -50.0]])), vec![50.0]);
        assert_eq!(channel_discriminability(&matrix(&[&[-80.0, 20.0]])), vec![40.0]);
        let mut m = matrix(&[&[-80.0, -20.0]]);
        m[[1, 0]] = None;
        assert_eq!(channel_discriminability(&m), vec![40.0]);
    }

    #[test]
    fn evaluate_single_reference_channel() {
        let ctx = ObjectiveContext::new(vec![1.0, 0.5], vec![37.5, 10.0], 2).unwrap();
        let m = ChannelMask::from_indices(2, &[0]).unwrap();
        assert_eq!(evaluate(&m, &ctx).unwrap(), ObjectiveVector::new(-1.0, -37.5));
        assert!(matches!(evaluate(&ChannelMask::empty(2), &ctx), Err(Error::EmptyMask)));
        assert!(evaluate(&ChannelMask::empty(3), &ctx).is_err());
    }

    #[test]
    fn evaluate_is_additive_over_disjoint_masks() {
        let ctx = ObjectiveContext::new(vec![0.1, 0.2, 0.3, 0.4], vec![1.0, 2.0, 3.0, 4.0], 4).unwrap();
        let a = ChannelMask::from_indices(4, &[0, 2]).unwrap();
        let b = ChannelMask::from_indices(4, &[3]).unwrap();
        let sum = evaluate(&a, &ctx).unwrap() + evaluate(&b, &ctx).unwrap();
        let joint = evaluate(&a.union(&b), &ctx).unwrap();
        assert!((sum.f1 - joint.f1).abs() < 1e-12 && (sum.f2 - joint.f2).abs() < 1e-12);
    }

    #[test]
    fn repair_contract() {
        let mut rng = crate::rng_from_seed(1);
        let big = ChannelMask::from_indices(64, &(0..20).map(|i| i * 3).collect::<Vec<_>>()).unwrap();
        let fixed = repair(&big, 16, &mut rng);
        assert_eq!(fixed.count(), 16);
        assert!(fixed.is_subset_of(&big));

        let small = ChannelMask::from_indices(64, &[1, 2, 3, 4, 5]).unwrap();
        assert_eq!(repair(&small, 16, &mut rng), small);

        assert_eq!(repair(&ChannelMask::empty(64), 16, &mut rng).count(), 1);
    }

    #[test]
    fn random_masks_are_feasible() {
        let mut rng = crate::rng_from_seed(2);
        for _ in 0..200 {
            let m = random_mask(12, 4, &mut rng);
            assert!((1..=4).contains(&m.count()));
        }
    }

    #[test]
    fn mask_string_round_trip() {
        let m = ChannelMask::from_indices(6, &[0, 4]).unwrap();
        assert_eq!(m.to_string(), "100010");
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, "\"100010\"");
        assert_eq!(serde_json::from_str::<ChannelMask>(&json).unwrap(), m);
        assert!(serde_json::from_str::<ChannelMask>("\"10x\"").is_err());
    }

    #[test]
    fn context_validation() {
        assert!(ObjectiveContext::new(vec![1.0], vec![1.0, 2.0], 1).is_err());
        assert!(ObjectiveContext::new(vec![1.0, 1.0], vec![1.0, 2.0], 3).is_err());
        assert!(ObjectiveContext::new(vec![1.0, 1.0], vec![1.0, 2.0], 0).is_err());
        let n = ObjectiveContext::new(vec![0.5, 1.0], vec![10.0, 20.0], 1)
            .unwrap()
            .normalized();
        assert_eq!(n.spatial(), &[0.0, 1.0]);
        assert_eq!(n.discriminability(), &[0.0, 1.0]);
    }
}
