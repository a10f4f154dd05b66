//! Canonical little-endian trial file.
//!
//! ```text
//! magic      "EEGT"
//! version    u16 (= 1)
//! n_trials   u32
//! n_channels u32
//! n_samples  u32
//! fs         f32
//! windows    4 x f32   baseline start, end, activation start, end (s)
//! names      n_channels x (u16 byte length, UTF-8 bytes)
//! labels     n_trials x u8
//! payload    f32, trial-major then channel then sample
//! ```

use std::path::Path;

use ndarray::Array3;
use serde::Serialize;

use crate::signal::{TimeWindow, TrialSet};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"EEGT";
pub const VERSION: u16 = 1;

pub fn encode_trialfile(trials: &TrialSet) -> Result<Vec<u8>> {
    trials.validate()?;
    let (nt, nc, ns) = trials.data.dim();
    let dim = |v: usize, what: &str| {
        u32::try_from(v).map_err(|_| Error::Trials(format!("{what} {v} does not fit the file format")))
    };
    let mut out = Vec::with_capacity(64 + nt + 4 * nt * nc * ns);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    for (v, what) in [(nt, "trial count"), (nc, "channel count"), (ns, "sample count")] {
        out.extend_from_slice(&dim(v, what)?.to_le_bytes());
    }
    let (b, a) = (trials.baseline_window, trials.activation_window);
    for v in [trials.fs, b.start, b.end, a.start, a.end] {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    for name in &trials.channel_names {
        let len = u16::try_from(name.len())
            .map_err(|_| Error::Trials(format!("channel name of {} bytes is too long", name.len())))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    out.extend_from_slice(&trials.labels);
    for v in trials.data.iter() {
        out.extend_from_slice(&(*v as f32).to_le_bytes());
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn err(&self, msg: impl Into<String>) -> Error {
        Error::TrialFile {
            path: self.path.to_path_buf(),
            msg: msg.into(),
        }
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.err(format!(
                "truncated {what} at byte offset {}: need {n} bytes, {} left",
                self.pos,
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn f32(&mut self, what: &str) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }
}

/// Parse a trial file image; `path` only labels errors.
pub fn decode_trialfile(buf: &[u8], path: &Path) -> Result<TrialSet> {
    let mut c = Cursor { buf, pos: 0, path };
    if c.take(4, "magic")? != MAGIC {
        return Err(c.err("bad magic, not an EEGT trial file"));
    }
    let version = c.u16("version")?;
    if version != VERSION {
        return Err(c.err(format!("unsupported format version {version}")));
    }
    let nt = c.u32("trial count")? as usize;
    let nc = c.u32("channel count")? as usize;
    let ns = c.u32("sample count")? as usize;
    let fs = c.f32("sampling rate")? as f64;
    let mut w = [0.0f64; 4];
    for v in &mut w {
        *v = c.f32("window")? as f64;
    }
    let mut names = Vec::with_capacity(nc);
    for _ in 0..nc {
        let len = c.u16("channel name length")? as usize;
        let bytes = c.take(len, "channel name")?;
        let name = std::str::from_utf8(bytes).map_err(|_| c.err("channel name is not UTF-8"))?;
        names.push(name.to_string());
    }
    let labels = c.take(nt, "labels")?.to_vec();
    if let Some(k) = labels.iter().position(|&l| l > 1) {
        return Err(c.err(format!("label {} of trial {k} outside {{0,1}}", labels[k])));
    }
    let n = nt
        .checked_mul(nc)
        .and_then(|v| v.checked_mul(ns))
        .ok_or_else(|| c.err("header dimensions overflow"))?;
    let expected = n.checked_mul(4).ok_or_else(|| c.err("header dimensions overflow"))?;
    let left = buf.len() - c.pos;
    if left != expected {
        return Err(c.err(format!(
            "payload length {left} bytes at offset {}, header implies {expected}",
            c.pos
        )));
    }
    let payload: Vec<f64> = buf[c.pos..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
        .collect();
    let data = Array3::from_shape_vec((nt, nc, ns), payload).expect("length checked");
    TrialSet::new(
        data,
        labels,
        fs,
        TimeWindow::new(w[0], w[1]),
        TimeWindow::new(w[2], w[3]),
        names,
    )
    .map_err(|e| c.err(e.to_string()))
}

/// A problem found by [`verify_trialfile`], located by byte offset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub offset: usize,
    pub msg: String,
}

/// Outcome of [`verify_trialfile`]. A file is valid iff `violations` is
/// empty; warnings flag legal but suspicious content.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct VerifyReport {
    pub n_trials: usize,
    pub n_channels: usize,
    pub n_samples: usize,
    pub fs: f64,
    pub class_counts: [usize; 2],
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl VerifyReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check header consistency, payload length, finiteness and class balance,
/// collecting every violation instead of stopping at the first.
pub fn verify_trialfile(buf: &[u8]) -> VerifyReport {
    let mut r = VerifyReport::default();
    let mut c = Cursor {
        buf,
        pos: 0,
        path: Path::new(""),
    };
    macro_rules! read {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(_) => {
                    r.violations.push(Violation {
                        offset: c.pos,
                        msg: "file ends inside the header".into(),
                    });
                    return r;
                }
            }
        };
    }
    if read!(c.take(4, "magic")) != MAGIC {
        r.violations.push(Violation {
            offset: 0,
            msg: "bad magic".into(),
        });
        return r;
    }
    let version = read!(c.u16("version"));
    if version != VERSION {
        r.violations.push(Violation {
            offset: 4,
            msg: format!("unsupported format version {version}"),
        });
        return r;
    }
    r.n_trials = read!(c.u32("")) as usize;
    r.n_channels = read!(c.u32("")) as usize;
    r.n_samples = read!(c.u32("")) as usize;
    for (v, off, what) in [
        (r.n_trials, 6, "trial"),
        (r.n_channels, 10, "channel"),
        (r.n_samples, 14, "sample"),
    ] {
        if v == 0 {
            r.violations.push(Violation {
                offset: off,
                msg: format!("{what} count is zero"),
            });
        }
    }
    let fs_at = c.pos;
    r.fs = read!(c.f32("")) as f64;
    if !(r.fs.is_finite() && r.fs > 0.0) {
        r.violations.push(Violation {
            offset: fs_at,
            msg: format!("sampling rate {} is not positive", r.fs),
        });
    }
    let win_at = c.pos;
    let mut w = [0.0f64; 4];
    for v in &mut w {
        *v = read!(c.f32("")) as f64;
    }
    let span = r.n_samples as f64 / r.fs;
    for (k, name) in [(0, "baseline"), (2, "activation")] {
        let (a, b) = (w[k], w[k + 1]);
        if !(a.is_finite() && b.is_finite() && 0.0 <= a && a < b && b <= span + 1e-6) {
            r.violations.push(Violation {
                offset: win_at + 4 * k,
                msg: format!("{name} window [{a}, {b}] s is not inside the {span} s epoch"),
            });
        }
    }
    for k in 0..r.n_channels {
        let at = c.pos;
        let len = read!(c.u16("")) as usize;
        let bytes = read!(c.take(len, ""));
        if std::str::from_utf8(bytes).is_err() {
            r.violations.push(Violation {
                offset: at + 2,
                msg: format!("name of channel {k} is not UTF-8"),
            });
        }
    }
    let labels_at = c.pos;
    let labels = read!(c.take(r.n_trials, ""));
    for (k, &l) in labels.iter().enumerate() {
        match l {
            0 | 1 => r.class_counts[l as usize] += 1,
            _ => r.violations.push(Violation {
                offset: labels_at + k,
                msg: format!("label {l} of trial {k} outside {{0,1}}"),
            }),
        }
    }
    if r.class_counts[0] == 0 || r.class_counts[1] == 0 {
        r.warnings.push(format!(
            "only one class present ({} vs {} trials)",
            r.class_counts[0], r.class_counts[1]
        ));
    } else if r.class_counts[0].max(r.class_counts[1]) > 2 * r.class_counts[0].min(r.class_counts[1]) {
        r.warnings.push(format!(
            "classes are unbalanced ({} vs {} trials)",
            r.class_counts[0], r.class_counts[1]
        ));
    }
    let payload_at = c.pos;
    let left = buf.len() - payload_at;
    let expected = 4 * r.n_trials * r.n_channels * r.n_samples;
    if left != expected {
        r.violations.push(Violation {
            offset: payload_at,
            msg: format!("payload length {left} bytes, header implies {expected}"),
        });
    }
    let mut bad = buf[payload_at..]
        .chunks_exact(4)
        .enumerate()
        .filter(|(_, b)| !f32::from_le_bytes((*b).try_into().expect("4 bytes")).is_finite());
    if let Some((i, _)) = bad.next() {
        let more = bad.count();
        r.violations.push(Violation {
            offset: payload_at + 4 * i,
            msg: format!("non-finite sample (and {more} more)"),
        });
    }
    r
}

pub fn read_trialfile(path: impl AsRef<Path>) -> Result<TrialSet> {
    let path = path.as_ref();
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_trialfile(&buf, path)
}

pub fn write_trialfile(trials: &TrialSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_trialfile(trials)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
