//! Final-subset choice, selection-frequency topography, averaged frontiers,
//! per-method summaries and one-way ANOVA.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::montage::Montage;
use crate::objectives::{ChannelMask, ObjectiveVector};
use crate::optim::Algorithm;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub mask: ChannelMask,
    /// Objective vector; absent for the greedy baseline.
    pub objectives: Option<ObjectiveVector>,
    pub acc_all: f64,
    pub acc_sel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub subject: String,
    pub algorithm: Algorithm,
    pub candidates: Vec<CandidateResult>,
    /// Index into `candidates`.
    pub chosen: usize,
}

impl RunResult {
    pub fn chosen(&self) -> &CandidateResult {
        &self.candidates[self.chosen]
    }

    /// Popcount of the chosen subset.
    pub fn pr(&self) -> usize {
        self.chosen().mask.count()
    }
}

/// Index of the final subset: the best `accuracy` among masks containing a
/// reference channel, or among all masks when none does. Ties go to the
/// smaller popcount, then the earlier candidate.
pub fn choose_final_subset(candidates: &[(ChannelMask, f64)], refs: &[usize]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Config("no candidate subsets to choose from".into()));
    }
    let has_ref = |m: &ChannelMask| refs.iter().any(|&r| r < m.len() && m.get(r));
    let pool: Vec<usize> = {
        let with: Vec<usize> = (0..candidates.len()).filter(|&i| has_ref(&candidates[i].0)).collect();
        if with.is_empty() {
            (0..candidates.len()).collect()
        } else {
            with
        }
    };
    let best = pool
        .into_iter()
        .reduce(|a, b| {
            let (ma, aa) = &candidates[a];
            let (mb, ab) = &candidates[b];
            if ab > aa || (ab == aa && mb.count() < ma.count()) {
                b
            } else {
                a
            }
        })
        .expect("pool is non-empty");
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionFrequency {
    pub channels: Vec<String>,
    pub counts: Vec<usize>,
}

/// How often each channel appears in the chosen subsets.
pub fn selection_frequency(results: &[RunResult], montage: &Montage) -> Result<SelectionFrequency> {
    let mut counts = vec![0usize; montage.len()];
    for r in results {
        let m = &r.chosen().mask;
        if m.len() != montage.len() {
            return Err(Error::Montage(format!(
                "subject {} uses {} channels, montage has {}",
                r.subject,
                m.len(),
                montage.len()
            )));
        }
        for i in m.indices() {
            counts[i] += 1;
        }
    }
    Ok(SelectionFrequency {
        channels: montage.names(),
        counts,
    })
}

impl SelectionFrequency {
    /// `channel,count`
    pub fn to_csv(&self) -> String {
        let mut s = String::from("channel,count\n");
        for (c, n) in self.channels.iter().zip(&self.counts) {
            let _ = writeln!(s, "{c},{n}");
        }
        s
    }

    /// Electrodes on the 2-D head projection, shaded by count.
    pub fn to_svg(&self, montage: &Montage) -> String {
        let pts = montage.projection_2d();
        let max = self.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
        let (size, scale) = (420.0, 160.0);
        let c = size / 2.0;
        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
        );
        let _ = writeln!(
            s,
            r##"<circle cx="{c}" cy="{c}" r="{scale}" fill="none" stroke="#444" stroke-width="1.5"/>"##
        );
        let _ = writeln!(
            s,
            r##"<path d="M {} {} L {c} {} L {} {}" fill="none" stroke="#444" stroke-width="1.5"/>"##,
            c - 12.0,
            c - scale + 1.0,
            c - scale - 14.0,
            c + 12.0,
            c - scale + 1.0
        );
        for ((p, name), &n) in pts.iter().zip(&self.channels).zip(&self.counts) {
            let (x, y) = (c + scale * p[0], c - scale * p[1]);
            let t = n as f64 / max;
            let (r, g, b) = (
                (255.0 - 40.0 * t) as u8,
                (255.0 - 200.0 * t) as u8,
                (255.0 - 230.0 * t) as u8,
            );
            let _ = writeln!(
                s,
                r##"<circle cx="{x:.2}" cy="{y:.2}" r="9" fill="#{r:02x}{g:02x}{b:02x}" stroke="#222" stroke-width="0.5"><title>{name}: {n}</title></circle>"##
            );
            let _ = writeln!(
                s,
                r#"<text x="{x:.2}" y="{:.2}" font-size="6" text-anchor="middle" font-family="sans-serif">{name}</text>"#,
                y + 2.0
            );
        }
        s.push_str("</svg>\n");
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierRow {
    pub k: usize,
    pub f1: f64,
    pub f2: f64,
    /// Subjects contributing to the row.
    pub n: usize,
}

/// Average the k-th solution across subjects. Each subject's list is ordered
/// by ascending f1 (then f2), truncated to `rows`, and padded by repeating
/// its last entry. Subjects without solutions are skipped.
pub fn averaged_frontier(per_subject: &[Vec<ObjectiveVector>], rows: usize) -> Vec<FrontierRow> {
    let lists: Vec<Vec<ObjectiveVector>> = per_subject
        .iter()
        .filter(|l| !l.is_empty())
        .map(|l| {
            let mut l = l.clone();
            l.sort_by(|a, b| a.f1.total_cmp(&b.f1).then(a.f2.total_cmp(&b.f2)));
            l.truncate(rows);
            let last = *l.last().expect("non-empty");
            l.resize(rows, last);
            l
        })
        .collect();
    if lists.is_empty() {
        return Vec::new();
    }
    let n = lists.len() as f64;
    (0..rows)
        .map(|k| FrontierRow {
            k,
            f1: lists.iter().map(|l| l[k].f1).sum::<f64>() / n,
            f2: lists.iter().map(|l| l[k].f2).sum::<f64>() / n,
            n: lists.len(),
        })
        .collect()
}

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub subject: String,
    pub algorithm: Algorithm,
    pub acc_all: f64,
    pub acc_sel: f64,
    pub pr: usize,
}

impl From<&RunResult> for ResultRow {
    fn from(r: &RunResult) -> Self {
        ResultRow {
            subject: r.subject.clone(),
            algorithm: r.algorithm,
            acc_all: r.chosen().acc_all,
            acc_sel: r.chosen().acc_sel,
            pr: r.pr(),
        }
    }
}

pub const RESULTS_HEADER: &str = "subject,algorithm,acc_all,acc_sel,pr";

pub fn results_to_csv(rows: &[ResultRow]) -> String {
    let mut s = format!("{RESULTS_HEADER}\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{:.6},{:.6},{}",
            r.subject, r.algorithm, r.acc_all, r.acc_sel, r.pr
        );
    }
    s
}

pub fn parse_results_csv(text: &str) -> Result<Vec<ResultRow>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    match lines.next() {
        Some(h) if h.trim() == RESULTS_HEADER => {}
        other => {
            return Err(Error::Trials(format!(
                "results header {:?} is not {RESULTS_HEADER:?}",
                other.unwrap_or("")
            )))
        }
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = |what: &str| Error::Trials(format!("results line {}: bad {what}", i + 2));
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 5 {
                return Err(bad("field count"));
            }
            Ok(ResultRow {
                subject: f[0].to_string(),
                algorithm: f[1].parse().map_err(|_| bad("algorithm"))?,
                acc_all: f[2].parse().map_err(|_| bad("acc_all"))?,
                acc_sel: f[3].parse().map_err(|_| bad("acc_sel"))?,
                pr: f[4].parse().map_err(|_| bad("pr"))?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub n_subjects: usize,
    pub acc_all: f64,
    pub acc_sel: f64,
    pub pr: f64,
}

/// Per-algorithm means over subjects of the chosen subset's accuracies and
/// popcount.
pub fn summarize(results: &[ResultRow]) -> Vec<SummaryRow> {
    let mut by: BTreeMap<Algorithm, Vec<&ResultRow>> = BTreeMap::new();
    for r in results {
        by.entry(r.algorithm).or_default().push(r);
    }
    by.into_iter()
        .map(|(algorithm, rs)| {
            let n = rs.len() as f64;
            SummaryRow {
                algorithm,
                n_subjects: rs.len(),
                acc_all: rs.iter().map(|r| r.acc_all).sum::<f64>() / n,
                acc_sel: rs.iter().map(|r| r.acc_sel).sum::<f64>() / n,
                pr: rs.iter().map(|r| r.pr as f64).sum::<f64>() / n,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anova {
    pub f: f64,
    pub p: f64,
    pub df_between: usize,
    pub df_within: usize,
}

/// Classic one-way ANOVA; `p` is the upper tail of the F distribution.
pub fn anova_oneway(groups: &[Vec<f64>]) -> Result<Anova> {
    if groups.len() < 2 || groups.iter().any(|g| g.len() < 2) {
        return Err(Error::Stats(
            "ANOVA needs at least 2 groups of at least 2 observations".into(),
        ));
    }
    if groups.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Stats("non-finite observation".into()));
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    let grand = groups.iter().flatten().sum::<f64>() / n as f64;
    let means: Vec<f64> = groups.iter().map(|g| g.iter().sum::<f64>() / g.len() as f64).collect();
    let ssb: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.len() as f64 * (m - grand) * (m - grand))
        .sum();
    let ssw: f64 = groups
        .iter()
        .zip(&means)
        .map(|(g, m)| g.iter().map(|v| (v - m) * (v - m)).sum::<f64>())
        .sum();
    let (dfb, dfw) = (groups.len() - 1, n - groups.len());
    if !(ssw > 0.0) {
        return Err(Error::Stats("zero within-group variance".into()));
    }
    let f = (ssb / dfb as f64) / (ssw / dfw as f64);
    let dist = FisherSnedecor::new(dfb as f64, dfw as f64).map_err(|e| Error::Stats(e.to_string()))?;
    let p = if f > 0.0 { dist.sf(f) } else { 1.0 };
    Ok(Anova {
        f,
        p,
        df_between: dfb,
        df_within: dfw,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn m(n: usize, idx: &[usize]) -> ChannelMask {
        ChannelMask::from_indices(n, idx).unwrap()
    }

    #[test]
    fn final_subset_prefers_reference_channels() {
        // refs at 0 and 1
        let c = vec![(m(6, &[0, 4]), 0.80), (m(6, &[3, 4]), 0.90)];
        assert_eq!(choose_final_subset(&c, &[0, 1]).unwrap(), 0);
        let c = vec![(m(6, &[2]), 0.7), (m(6, &[3, 4]), 0.9)];
        assert_eq!(choose_final_subset(&c, &[0, 1]).unwrap(), 1);
        let c = vec![
            (m(20, &(0..12).collect::<Vec<_>>()), 0.85),
            (m(20, &(1..10).collect::<Vec<_>>()), 0.85),
            (m(20, &(1..10).collect::<Vec<_>>()), 0.85),
        ];
        assert_eq!(choose_final_subset(&c, &[0, 1]).unwrap(), 1);
        assert!(choose_final_subset(&[], &[0]).is_err());
    }

    fn run(subject: &str, mask: ChannelMask) -> RunResult {
        RunResult {
            subject: subject.into(),
            algorithm: Algorithm::Nsga2,
            candidates: vec![CandidateResult {
                mask,
                objectives: None,
                acc_all: 0.5,
                acc_sel: 0.6,
            }],
            chosen: 0,
        }
    }

    #[test]
    fn frequency_counts() {
        let mt = Montage::builtin("bciiv2a22").unwrap();
        let (c3, c4) = (mt.index_of("C3").unwrap(), mt.index_of("C4").unwrap());
        let rs: Vec<RunResult> = (0..3).map(|i| run(&i.to_string(), m(22, &[c3, c4]))).collect();
        let f = selection_frequency(&rs, &mt).unwrap();
        assert_eq!(f.counts[c3], 3);
        assert_eq!(f.counts[c4], 3);
        assert_eq!(f.counts.iter().sum::<usize>(), 6);
        assert!(f.to_csv().contains("\nC3,3\n"));
        let svg = f.to_svg(&mt);
        assert!(svg.starts_with("<svg") && svg.contains("C4: 3"));
        assert!(selection_frequency(&[], &mt).unwrap().counts.iter().all(|&c| c == 0));
        assert!(selection_frequency(&[run("x", m(5, &[0]))], &mt).is_err());
    }

    #[test]
    fn frontier_pads_and_orders() {
        let a = vec![ObjectiveVector::new(-1.0, -4.0), ObjectiveVector::new(-3.0, -2.0)];
        let b = vec![ObjectiveVector::new(-5.0, -0.0)];
        let rows = averaged_frontier(&[a, b, vec![]], 3);
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].f1, -4.0);
        assert_eq!(rows[1].f1, -3.0);
        assert_eq!(
            rows[2],
            FrontierRow {
                k: 2,
                f1: -3.0,
                f2: -2.0,
                n: 2
            }
        );
    }

    #[test]
    fn summary_means() {
        let mut a = run("a", m(4, &[0, 1]));
        let mut b = run("b", m(4, &[2]));
        a.candidates[0].acc_sel = 0.8;
        b.candidates[0].acc_sel = 0.6;
        let s = summarize(&[(&a).into(), (&b).into()]);
        assert_eq!(s.len(), 1);
        assert!((s[0].acc_sel - 0.7).abs() < 1e-12);
        assert_eq!(s[0].pr, 1.5);
    }

    #[test]
    fn results_csv_round_trip() {
        let rows = vec![ResultRow::from(&run("s1@3", m(4, &[0, 2])))];
        let text = results_to_csv(&rows);
        assert_eq!(
            text,
            "subject,algorithm,acc_all,acc_sel,pr\ns1@3,nsga2,0.500000,0.600000,2\n"
        );
        assert_eq!(parse_results_csv(&text).unwrap(), rows);
        assert!(parse_results_csv("a,b\n").is_err());
        assert!(parse_results_csv(&format!("{RESULTS_HEADER}\nx,pso,1,1,1\n")).is_err());
    }

    /// Per-algorithm summary with one row per method.
    #[test]
    fn summary_table_layout() {
        let rows: Vec<ResultRow> = Algorithm::ALL
            .iter()
            .flat_map(|&a| {
                (0..3).map(move |i| ResultRow {
                    subject: format!("s{i}"),
                    algorithm: a,
                    acc_all: 0.5,
                    acc_sel: 0.7,
                    pr: 4,
                })
            })
            .collect();
        let s = summarize(&rows);
        assert_eq!(s.len(), 4);
        assert!(s.iter().all(|r| r.n_subjects == 3 && r.pr == 4.0));
    }

    #[test]
    fn anova_cases() {
        let g = vec![1.0, 2.0, 3.0];
        let r = anova_oneway(&[g.clone(), g.clone(), g]).unwrap();
        assert_eq!(r.f, 0.0);
        assert_eq!(r.p, 1.0);
        let r = anova_oneway(&[vec![0.0, 0.001, -0.001], vec![1.0, 1.001, 0.999]]).unwrap();
        assert!(r.p < 0.001);
        assert!(anova_oneway(&[vec![1.0, 1.0], vec![2.0, 2.0]]).is_err());
        assert!(anova_oneway(&[vec![1.0, 2.0]]).is_err());
        // known value: groups {1,2,3},{4,5,6} -> F = 13.5 on (1,4)
        let r = anova_oneway(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert!((r.f - 13.5).abs() < 1e-12);
        assert!((r.p - 0.021_311_641_128_756_6).abs() < 1e-9, "{}", r.p);
    }

    #[test]
    fn anova_shift_invariance() {
        let mut rng = crate::rng_from_seed(5);
        let gs: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..10).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let shifted: Vec<Vec<f64>> = gs.iter().map(|g| g.iter().map(|v| v + 100.0).collect()).collect();
        let (a, b) = (anova_oneway(&gs).unwrap(), anova_oneway(&shifted).unwrap());
        assert!((a.f - b.f).abs() < 1e-9);
    }
}
