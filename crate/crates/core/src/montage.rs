//! Electrode geometry and the Gaussian spatial-relevance kernel.
//!
//! Positions live on the unit sphere (x to the right ear, y to the nasion,
//! z to the vertex). Relevance of channel `k` is
//! `exp(-d^2 / (2 sigma^2))` where `d` is the chord distance from `k` to the
//! nearest reference electrode.

use std::collections::HashSet;
use std::path::Path;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Default sensorimotor references.
pub const DEFAULT_REFS: [&str; 2] = ["C3", "C4"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Electrode {
    pub name: String,
    pub position: [f64; 3],
}

impl Electrode {
    pub fn new(name: impl Into<String>, position: [f64; 3]) -> Self {
        Electrode {
            name: name.into(),
            position,
        }
    }

    pub fn distance(&self, other: &Electrode) -> f64 {
        chord(&self.position, &other.position)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpatialKernelConfig {
    pub sigma: f64,
}

impl Default for SpatialKernelConfig {
    fn default() -> Self {
        SpatialKernelConfig { sigma: 1.0 }
    }
}

impl SpatialKernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::Config(format!(
                "kernel sigma must be positive, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Ordered electrode set. Index order is the canonical channel order for
/// every mask and data array paired with this montage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Montage {
    electrodes: Vec<Electrode>,
    refs: Vec<usize>,
}

impl Montage {
    /// Build a montage, renormalising positions onto the unit sphere.
    pub fn new(electrodes: Vec<Electrode>, refs: Vec<usize>) -> Result<Self> {
        if electrodes.len() < 2 {
            return Err(Error::Montage(format!(
                "need at least 2 electrodes, got {}",
                electrodes.len()
            )));
        }
        let mut seen = HashSet::new();
        let mut normalized = Vec::with_capacity(electrodes.len());
        for e in electrodes {
            if !seen.insert(canonical_name(&e.name)) {
                return Err(Error::Montage(format!("duplicate electrode name {:?}", e.name)));
            }
            if e.position.iter().any(|c| !c.is_finite()) {
                return Err(Error::Montage(format!("non-finite coordinates for {:?}", e.name)));
            }
            let norm = e.position.iter().map(|c| c * c).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::Montage(format!("zero position for {:?}", e.name)));
            }
            normalized.push(Electrode {
                name: e.name,
                position: e.position.map(|c| c / norm),
            });
        }
        for &r in &refs {
            if r >= normalized.len() {
                return Err(Error::ChannelOutOfRange {
                    index: r,
                    len: normalized.len(),
                });
            }
        }
        Ok(Montage {
            electrodes: normalized,
            refs,
        })
    }

    /// Build a montage whose references are whichever of C3/C4 are present.
    pub fn with_default_refs(electrodes: Vec<Electrode>) -> Result<Self> {
        let mut m = Montage::new(electrodes, Vec::new())?;
        m.refs = DEFAULT_REFS.iter().filter_map(|r| m.index_of(r)).collect();
        if m.refs.is_empty() {
            return Err(Error::Montage(
                "montage contains neither C3 nor C4; references must be set explicitly".into(),
            ));
        }
        Ok(m)
    }

    /// Look up one of the built-in montages: `physionet64`, `bciiv2a22` or
    /// `standard1010`.
    pub fn builtin(name: &str) -> Result<Self> {
        let names: Vec<&str> = match name {
            "physionet64" => PHYSIONET64.to_vec(),
            "bciiv2a22" => BCIIV2A22.to_vec(),
            "standard1010" => STANDARD_1010.iter().map(|e| e.name.as_str()).collect(),
            other => return Err(Error::Config(format!("unknown built-in montage {other:?}"))),
        };
        let electrodes = names
            .iter()
            .map(|n| lookup_1010(n).cloned())
            .collect::<Option<Vec<_>>>()
            .expect("built-in montage names are in the 10-10 table");
        Montage::with_default_refs(electrodes)
    }

    /// Resolve a built-in name or, failing that, a CSV path.
    pub fn resolve(name_or_path: &str) -> Result<Self> {
        match Montage::builtin(name_or_path) {
            Ok(m) => Ok(m),
            Err(_) => load_montage(name_or_path),
        }
    }

    pub fn len(&self) -> usize {
        self.electrodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.electrodes.is_empty()
    }

    pub fn electrodes(&self) -> &[Electrode] {
        &self.electrodes
    }

    pub fn refs(&self) -> &[usize] {
        &self.refs
    }

    pub fn names(&self) -> Vec<String> {
        self.electrodes.iter().map(|e| e.name.clone()).collect()
    }

    /// Case-insensitive lookup, ignoring the trailing dots some EDF exports use.
    pub fn index_of(&self, name: &str) -> Option<usize> {
        let key = canonical_name(name);
        self.electrodes.iter().position(|e| canonical_name(&e.name) == key)
    }

    /// Restrict to the named channels, in the given order. References are
    /// re-resolved to whichever of C3/C4 survive.
    pub fn select(&self, names: &[String]) -> Result<Montage> {
        let electrodes = names
            .iter()
            .map(|n| {
                self.index_of(n)
                    .map(|i| self.electrodes[i].clone())
                    .ok_or_else(|| Error::Montage(format!("channel {n:?} not in montage")))
            })
            .collect::<Result<Vec<_>>>()?;
        Montage::with_default_refs(electrodes)
    }

    /// Chord distance from channel `k` to its nearest reference.
    pub fn nearest_ref_distance(&self, k: usize) -> Result<f64> {
        let e = self.electrodes.get(k).ok_or(Error::ChannelOutOfRange {
            index: k,
            len: self.len(),
        })?;
        if self.refs.is_empty() {
            return Err(Error::Montage("no reference electrodes".into()));
        }
        Ok(self
            .refs
            .iter()
            .map(|&r| e.distance(&self.electrodes[r]))
            .fold(f64::INFINITY, f64::min))
    }

    /// Azimuthal-equidistant projection: the vertex maps to the origin, the
    /// equator (Fpz/T7/Oz/T8) to radius 1, nose towards +y.
    pub fn projection_2d(&self) -> Vec<[f64; 2]> {
        self.electrodes
            .iter()
            .map(|e| {
                let [x, y, z] = e.position;
                let polar = z.clamp(-1.0, 1.0).acos();
                let planar = (x * x + y * y).sqrt();
                if planar < 1e-12 {
                    [0.0, 0.0]
                } else {
                    let r = polar / std::f64::consts::FRAC_PI_2;
                    [r * x / planar, r * y / planar]
                }
            })
            .collect()
    }
}

/// Read a `name,x,y,z` CSV montage; references default to C3/C4.
pub fn load_montage(path: impl AsRef<Path>) -> Result<Montage> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_montage_csv(&text).map_err(|e| e.context(path.display().to_string()))
}

pub fn parse_montage_csv(text: &str) -> Result<Montage> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Montage("empty montage file".into()))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["name", "x", "y", "z"] {
        return Err(Error::Montage(format!("expected header name,x,y,z, got {header:?}")));
    }
    let mut electrodes = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 4 {
            return Err(Error::Montage(format!(
                "row {}: expected 4 fields, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let mut pos = [0.0; 3];
        for (slot, raw) in pos.iter_mut().zip(&fields[1..]) {
            *slot = raw
                .parse::<f64>()
                .map_err(|e| Error::Montage(format!("row {}: bad coordinate {raw:?}: {e}", lineno + 2)))?;
        }
        electrodes.push(Electrode::new(fields[0], pos));
    }
    Montage::with_default_refs(electrodes)
}

/// Relevance of channel `k`: Gaussian kernel of the distance to the nearest
/// reference. Exactly 1 for a reference electrode.
pub fn spatial_relevance(montage: &Montage, k: usize, cfg: &SpatialKernelConfig) -> Result<f64> {
    cfg.validate()?;
    let d = montage.nearest_ref_distance(k)?;
    Ok((-(d * d) / (2.0 * cfg.sigma * cfg.sigma)).exp())
}

pub fn relevance_vector(montage: &Montage, cfg: &SpatialKernelConfig) -> Result<Vec<f64>> {
    (0..montage.len()).map(|k| spatial_relevance(montage, k, cfg)).collect()
}

fn chord(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

fn canonical_name(name: &str) -> String {
    name.trim().trim_end_matches('.').to_ascii_uppercase()
}

pub fn lookup_1010(name: &str) -> Option<&'static Electrode> {
    let key = canonical_name(name);
    STANDARD_1010.iter().find(|e| canonical_name(&e.name) == key)
}

/// Channel order of the Physionet EEG Motor Movement/Imagery recordings.
pub const PHYSIONET64: [&str; 64] = [
    "FC5", "FC3", "FC1", "FCz", "FC2", "FC4", "FC6", "C5", "C3", "C1", "Cz", "C2", "C4", "C6", "CP5", "CP3", "CP1",
    "CPz", "CP2", "CP4", "CP6", "Fp1", "Fpz", "Fp2", "AF7", "AF3", "AFz", "AF4", "AF8", "F7", "F5", "F3", "F1", "Fz",
    "F2", "F4", "F6", "F8", "FT7", "FT8", "T7", "T8", "T9", "T10", "TP7", "TP8", "P7", "P5", "P3", "P1", "Pz", "P2",
    "P4", "P6", "P8", "PO7", "PO3", "POz", "PO4", "PO8", "O1", "Oz", "O2", "Iz",
];

/// Channel order of BCI Competition IV dataset 2a.
pub const BCIIV2A22: [&str; 22] = [
    "Fz", "FC3", "FC1", "FCz", "FC2", "FC4", "C5", "C3", "C1", "Cz", "C2", "C4", "C6", "CP3", "CP1", "CPz", "CP2",
    "CP4", "P1", "Pz", "P2", "POz",
];

/// Idealised spherical 10-10 positions.
///
/// Fpz, T7, Oz and T8 sit on the equator; 10 % of the nasion-inion arc is
/// 22.5 degrees. Each lateral row (AF, F, FC, C, CP, P, PO) lies on the circle
/// through its two equatorial end points and its midline electrode, with the
/// row's electrodes equally spaced along that circle.
pub static STANDARD_1010: LazyLock<Vec<Electrode>> = LazyLock::new(build_1010);

fn build_1010() -> Vec<Electrode> {
    let deg = std::f64::consts::PI / 180.0;
    // equatorial point at azimuth `a` degrees from the nasion, positive to the left
    let equator = |a: f64| [-(a * deg).sin(), (a * deg).cos(), 0.0];
    // midline point at polar angle `p` degrees, positive towards the nasion
    let midline = |p: f64| [0.0, (p * deg).sin(), (p * deg).cos()];
    let mirror = |p: [f64; 3]| [-p[0], p[1], p[2]];

    let mut out = Vec::new();
    let mut push = |name: &str, p: [f64; 3]| out.push(Electrode::new(name, p));

    // midline
    for (name, p) in [
        ("Fpz", 90.0),
        ("AFz", 67.5),
        ("Fz", 45.0),
        ("FCz", 22.5),
        ("Cz", 0.0),
        ("CPz", -22.5),
        ("Pz", -45.0),
        ("POz", -67.5),
        ("Oz", -90.0),
        ("Iz", -112.5),
    ] {
        push(name, midline(p));
    }

    // equatorial ring
    for (left, right, az) in [
        ("Fp1", "Fp2", 18.0),
        ("AF7", "AF8", 36.0),
        ("F7", "F8", 54.0),
        ("FT7", "FT8", 72.0),
        ("T7", "T8", 90.0),
        ("TP7", "TP8", 108.0),
        ("P7", "P8", 126.0),
        ("PO7", "PO8", 144.0),
        ("O1", "O2", 162.0),
    ] {
        push(left, equator(az));
        push(right, mirror(equator(az)));
    }

    // below-equator temporal sites on the coronal great circle
    let t9 = [-(112.5 * deg).sin(), 0.0, (112.5 * deg).cos()];
    push("T9", t9);
    push("T10", mirror(t9));

    // lateral rows: (prefix, equatorial azimuth of the row end, midline polar angle)
    for (prefix, end_az, mid) in [
        ("AF", 36.0, 67.5),
        ("F", 54.0, 45.0),
        ("FC", 72.0, 22.5),
        ("C", 90.0, 0.0),
        ("CP", 108.0, -22.5),
        ("P", 126.0, -45.0),
        ("PO", 144.0, -67.5),
    ] {
        let left_end = equator(end_az);
        let mid_pt = midline(mid);
        let right_end = mirror(left_end);
        for (idx, frac) in [(5, 0.25), (3, 0.5), (1, 0.75)] {
            let p = arc_point(left_end, mid_pt, right_end, frac);
            push(&format!("{prefix}{idx}"), p);
            push(&format!("{prefix}{}", idx + 1), mirror(p));
        }
    }
    out
}

/// Point a fraction `t` of the way from `a` to `b` along the circle through
/// `a`, `b` and `c` (all on the unit sphere).
fn arc_point(a: [f64; 3], b: [f64; 3], c: [f64; 3], t: f64) -> [f64; 3] {
    let sub = |p: [f64; 3], q: [f64; 3]| [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
    let dot = |p: [f64; 3], q: [f64; 3]| p[0] * q[0] + p[1] * q[1] + p[2] * q[2];
    let cross = |p: [f64; 3], q: [f64; 3]| {
        [
            p[1] * q[2] - p[2] * q[1],
            p[2] * q[0] - p[0] * q[2],
            p[0] * q[1] - p[1] * q[0],
        ]
    };
    let scale = |p: [f64; 3], s: f64| [p[0] * s, p[1] * s, p[2] * s];
    let norm = |p: [f64; 3]| dot(p, p).sqrt();

    // the circle's centre is the projection of the origin onto the plane abc
    let n = cross(sub(b, a), sub(c, a));
    let n = scale(n, 1.0 / norm(n));
    let center = scale(n, dot(a, n));
    let ua = sub(a, center);
    let r = norm(ua);
    let u = scale(ua, 1.0 / r);
    let v = cross(n, u);
    let ub = sub(b, center);
    let theta = dot(ub, v).atan2(dot(ub, u));
    let ang = t * theta;
    let p = [
        center[0] + r * (ang.cos() * u[0] + ang.sin() * v[0]),
        center[1] + r * (ang.cos() * u[1] + ang.sin() * v[1]),
        center[2] + r * (ang.cos() * u[2] + ang.sin() * v[2]),
    ];
    scale(p, 1.0 / norm(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_channel() -> Montage {
        parse_montage_csv("name,x,y,z\nC3,-0.71,0,0.70\nC4,0.71,0,0.70\n").unwrap()
    }

    #[test]
    fn two_row_file_resolves_refs() {
        let m = two_channel();
        assert_eq!(m.len(), 2);
        assert_eq!(m.refs(), &[0, 1]);
        for e in m.electrodes() {
            let n: f64 = e.position.iter().map(|c| c * c).sum::<f64>().sqrt();
            assert_abs_diff_eq!(n, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn duplicate_name_rejected() {
        let err = parse_montage_csv("name,x,y,z\nCz,0,0,1\ncz,0,0.1,1\nC3,-1,0,0\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn bad_rows_rejected() {
        assert!(parse_montage_csv("name,x,y,z\nC3,-1,0,0\n").is_err());
        assert!(parse_montage_csv("name,x,y,z\nC3,nan,0,0\nC4,1,0,0\n").is_err());
        assert!(parse_montage_csv("name,x,y\nC3,1,0\nC4,1,0\n").is_err());
    }

    #[test]
    fn builtin_physionet_covers_64_channels() {
        let m = Montage::builtin("physionet64").unwrap();
        assert_eq!(m.len(), 64);
        assert_eq!(m.refs().len(), 2);
        assert_eq!(m.electrodes()[m.refs()[0]].name, "C3");
        for e in m.electrodes() {
            let n: f64 = e.position.iter().map(|c| c * c).sum::<f64>().sqrt();
            assert!((0.99..=1.01).contains(&n));
        }
        let b = Montage::builtin("bciiv2a22").unwrap();
        assert_eq!(b.len(), 22);
    }

    #[test]
    fn idealised_geometry_matches_10_10_conventions() {
        let angle_from_vertex = |name: &str| lookup_1010(name).unwrap().position[2].acos().to_degrees();
        assert_abs_diff_eq!(angle_from_vertex("Cz"), 0.0, epsilon = 1e-9);
        assert_abs_diff_eq!(angle_from_vertex("C3"), 45.0, epsilon = 1e-9);
        assert_abs_diff_eq!(angle_from_vertex("C1"), 22.5, epsilon = 1e-9);
        assert_abs_diff_eq!(angle_from_vertex("T7"), 90.0, epsilon = 1e-9);
        assert_abs_diff_eq!(angle_from_vertex("Fpz"), 90.0, epsilon = 1e-9);
        assert_abs_diff_eq!(angle_from_vertex("Oz"), 90.0, epsilon = 1e-9);
        // C3 is left, C4 right, mirrored
        let c3 = lookup_1010("C3").unwrap().position;
        let c4 = lookup_1010("C4").unwrap().position;
        assert!(c3[0] < 0.0);
        assert_abs_diff_eq!(c3[0], -c4[0], epsilon = 1e-12);
        // F3 lies between F7 and Fz, frontal and left
        let f3 = lookup_1010("F3").unwrap().position;
        assert!(f3[0] < 0.0 && f3[1] > 0.0 && f3[2] > 0.0);
        assert_eq!(STANDARD_1010.len(), 10 + 18 + 2 + 7 * 6);
    }

    #[test]
    fn reference_scores_one() {
        let m = Montage::builtin("physionet64").unwrap();
        let cfg = SpatialKernelConfig::default();
        let c3 = m.index_of("C3").unwrap();
        assert_eq!(spatial_relevance(&m, c3, &cfg).unwrap(), 1.0);
        assert_eq!(relevance_vector(&two_channel(), &cfg).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn kernel_closed_forms() {
        // channel 2 at distance 1 from C3 (0) and far from C4 (1)
        let m = Montage::new(
            vec![
                Electrode::new("C3", [1.0, 0.0, 0.0]),
                Electrode::new("C4", [-1.0, 0.0, 0.0]),
                Electrode::new("X", [0.5, 3f64.sqrt() / 2.0, 0.0]),
            ],
            vec![0, 1],
        )
        .unwrap();
        let cfg = SpatialKernelConfig::default();
        assert_abs_diff_eq!(
            spatial_relevance(&m, 2, &cfg).unwrap(),
            (-0.5f64).exp(),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!((-0.5f64).exp(), 0.60653, epsilon = 1e-5);
        assert!(matches!(
            spatial_relevance(&m, 3, &cfg),
            Err(Error::ChannelOutOfRange { index: 3, len: 3 })
        ));
    }

    #[test]
    fn nearest_reference_rule() {
        // distances 2.0 to ref 0 and 0.5 to ref 1 -> kernel of 0.5
        let half = 2.0 * (0.25f64).asin(); // chord 0.5 on the unit circle
        let m = Montage::new(
            vec![
                Electrode::new("A", [-1.0, 0.0, 0.0]),
                Electrode::new("B", [half.cos(), half.sin(), 0.0]),
                Electrode::new("K", [1.0, 0.0, 0.0]),
            ],
            vec![0, 1],
        )
        .unwrap();
        let cfg = SpatialKernelConfig::default();
        assert_abs_diff_eq!(m.nearest_ref_distance(2).unwrap(), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(spatial_relevance(&m, 2, &cfg).unwrap(), 0.88250, epsilon = 1e-5);
    }

    #[test]
    fn top_non_reference_channel_is_in_the_sensorimotor_ring() {
        let m = Montage::builtin("physionet64").unwrap();
        let rel = relevance_vector(&m, &SpatialKernelConfig::default()).unwrap();
        let best = (0..m.len())
            .filter(|k| !m.refs().contains(k))
            .max_by(|&a, &b| rel[a].total_cmp(&rel[b]))
            .unwrap();
        let ring = ["C1", "C5", "FC3", "CP3", "C2", "C6", "FC4", "CP4"];
        assert!(ring.contains(&m.electrodes()[best].name.as_str()));
    }

    #[test]
    fn select_reorders_and_rerefs() {
        let m = Montage::builtin("physionet64").unwrap();
        let sub = m.select(&["cz".into(), "C4.".into(), "FC3".into()]).unwrap();
        assert_eq!(sub.names(), vec!["Cz", "C4", "FC3"]);
        assert_eq!(sub.refs(), &[1]);
        assert!(m.select(&["XX".into(), "C3".into()]).is_err());
    }

    #[test]
    fn projection_puts_vertex_at_origin_and_equator_on_unit_circle() {
        let m = Montage::builtin("physionet64").unwrap();
        let p = m.projection_2d();
        let cz = m.index_of("Cz").unwrap();
        let t7 = m.index_of("T7").unwrap();
        assert_abs_diff_eq!(p[cz][0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[t7][0], -1.0, epsilon = 1e-12);
    }
}
