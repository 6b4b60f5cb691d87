//! Binary per-level distributions: hypotheses plus probabilities.
//!
//! Layout (little-endian): magic `NPDV0001`, then `u32` level, width,
//! height and samples, one validity byte per pixel, then depths (`f64`),
//! intervals (`f64`), bins (`i64`) and probabilities (`f64`), each
//! `width * height * samples` long in row-major pixel order.

use std::path::Path;

use crate::cost::ProbabilityVolume;
use crate::error::{MvsError, Result};
use crate::npdist::HypothesisSet;

use super::atomic_write;

const MAGIC: &[u8; 8] = b"NPDV0001";

/// Hypotheses of one pyramid level and the distribution over them.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelDistribution {
    pub hypotheses: HypothesisSet,
    pub probabilities: ProbabilityVolume,
}

pub fn write_volume(path: &Path, dist: &LevelDistribution) -> Result<()> {
    let h = &dist.hypotheses;
    let p = &dist.probabilities;
    let n = h.pixel_count() * h.samples;
    let mut out = Vec::with_capacity(24 + h.pixel_count() + 32 * n);
    out.extend_from_slice(MAGIC);
    for v in [h.level, h.width, h.height, h.samples] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    out.extend(p.valid.iter().map(|&v| v as u8));
    for v in h.depths.iter().chain(&h.intervals) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for b in &h.bins {
        out.extend_from_slice(&b.to_le_bytes());
    }
    for v in &p.probs {
        out.extend_from_slice(&v.to_le_bytes());
    }
    atomic_write(path, &out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn err(&self, message: impl Into<String>) -> MvsError {
        MvsError::Binary {
            path: self.path.to_path_buf(),
            offset: self.pos,
            message: message.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.err(format!("truncated: needed {n} more bytes")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn words(&mut self, n: usize) -> Result<Vec<[u8; 8]>> {
        Ok(self
            .take(n.checked_mul(8).ok_or_else(|| self.err("size overflow"))?)?
            .chunks_exact(8)
            .map(|c| c.try_into().expect("8 bytes"))
            .collect())
    }
}

pub fn read_volume(path: &Path) -> Result<LevelDistribution> {
    let bytes = std::fs::read(path)?;
    let mut r = Reader { bytes: &bytes, pos: 0, path };
    if r.take(8)? != MAGIC {
        r.pos = 0;
        return Err(r.err("bad magic"));
    }
    let (level, width, height, samples) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?);
    let pixels = width * height;
    let n = pixels * samples;
    let valid: Vec<bool> = r
        .take(pixels)?
        .iter()
        .map(|&b| b != 0)
        .collect();
    let depths: Vec<f64> = r.words(n)?.into_iter().map(f64::from_le_bytes).collect();
    let intervals: Vec<f64> = r.words(n)?.into_iter().map(f64::from_le_bytes).collect();
    let bins: Vec<i64> = r.words(n)?.into_iter().map(i64::from_le_bytes).collect();
    let probs: Vec<f64> = r.words(n)?.into_iter().map(f64::from_le_bytes).collect();
    if r.pos != bytes.len() {
        return Err(r.err("trailing bytes"));
    }
    Ok(LevelDistribution {
        hypotheses: HypothesisSet {
            level,
            width,
            height,
            samples,
            depths,
            intervals,
            bins,
        },
        probabilities: ProbabilityVolume {
            width,
            height,
            samples,
            probs,
            valid,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{sample_inverse_depth, DepthRange};

    #[test]
    fn round_trip_and_truncation() {
        let planes = sample_inverse_depth(&DepthRange::new(1.0, 4.0).unwrap(), 3).unwrap();
        let hypotheses = HypothesisSet::shared_planes(2, 2, 1, &planes);
        let dist = LevelDistribution {
            hypotheses,
            probabilities: ProbabilityVolume {
                width: 2,
                height: 1,
                samples: 3,
                probs: vec![0.2, 0.3, 0.5, 0.0, 0.0, 0.0],
                valid: vec![true, false],
            },
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("l.npd");
        write_volume(&p, &dist).unwrap();
        assert_eq!(read_volume(&p).unwrap(), dist);

        let bytes = std::fs::read(&p).unwrap();
        std::fs::write(&p, &bytes[..bytes.len() - 5]).unwrap();
        match read_volume(&p) {
            Err(MvsError::Binary { offset, .. }) => assert_eq!(offset, 24 + 2 + 3 * 48),
            other => panic!("{other:?}"),
        }
    }
}
