//! Bit-packed detection events and observable flips for a batch of shots.
//!
//! Storage is detector-major: row `i` holds detector `i` for every shot, 64
//! shots per word, so the frame simulator writes whole words at a time.
//!
//! Two file formats are supported. The text format has one line per shot:
//! detector bits as `0`/`1` in detector order, a space, then the observable
//! bit. The binary format starts with an 8-byte header
//!
//! | bytes | field |
//! |-------|-------|
//! | 0 | magic `0xDE` |
//! | 1 | version `1` |
//! | 2..4 | detector count, `u16` little endian |
//! | 4..8 | shot count, `u32` little endian |
//!
//! followed by one record per shot of `ceil((detectors + 1) / 8)` bytes:
//! detector `i` at bit `i % 8` of byte `i / 8`, the observable at bit index
//! `detectors`.

use crate::error::{Error, Result};

const MAGIC: u8 = 0xDE;
const VERSION: u8 = 1;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ShotBatch {
    detectors: usize,
    shots: usize,
    words: usize,
    rows: Vec<u64>,
    observable: Vec<u64>,
}

impl ShotBatch {
    /// An all-zero batch.
    pub fn new(detectors: usize, shots: usize) -> Self {
        let words = shots.div_ceil(64);
        ShotBatch {
            detectors,
            shots,
            words,
            rows: vec![0; detectors * words],
            observable: vec![0; words],
        }
    }

    pub fn detector_count(&self) -> usize {
        self.detectors
    }

    pub fn shot_count(&self) -> usize {
        self.shots
    }

    /// Words per detector row.
    pub fn words(&self) -> usize {
        self.words
    }

    pub fn get(&self, detector: usize, shot: usize) -> bool {
        self.rows[detector * self.words + shot / 64] >> (shot % 64) & 1 == 1
    }

    pub fn set(&mut self, detector: usize, shot: usize, value: bool) {
        set_bit(&mut self.rows[detector * self.words..], shot, value);
    }

    pub fn observable(&self, shot: usize) -> bool {
        self.observable[shot / 64] >> (shot % 64) & 1 == 1
    }

    pub fn set_observable(&mut self, shot: usize, value: bool) {
        set_bit(&mut self.observable, shot, value);
    }

    pub fn detector_row(&self, detector: usize) -> &[u64] {
        &self.rows[detector * self.words..(detector + 1) * self.words]
    }

    pub fn detector_row_mut(&mut self, detector: usize) -> &mut [u64] {
        &mut self.rows[detector * self.words..(detector + 1) * self.words]
    }

    pub fn observable_row(&self) -> &[u64] {
        &self.observable
    }

    pub fn observable_row_mut(&mut self) -> &mut [u64] {
        &mut self.observable
    }

    /// Fired detectors of one shot, ascending.
    pub fn shot_detectors(&self, shot: usize) -> Vec<u32> {
        (0..self.detectors)
            .filter(|&d| self.get(d, shot))
            .map(|d| d as u32)
            .collect()
    }

    /// Fired detectors of every shot, each list ascending.
    pub fn defects(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.shots];
        for d in 0..self.detectors {
            for (w, &word) in self.detector_row(d).iter().enumerate() {
                let mut bits = word;
                while bits != 0 {
                    let shot = w * 64 + bits.trailing_zeros() as usize;
                    bits &= bits - 1;
                    out[shot].push(d as u32);
                }
            }
        }
        out
    }

    /// Number of shots in which `detector` fired.
    pub fn fire_count(&self, detector: usize) -> u64 {
        self.detector_row(detector).iter().map(|w| u64::from(w.count_ones())).sum()
    }

    /// Observable bits as one bool per shot.
    pub fn observables(&self) -> Vec<bool> {
        (0..self.shots).map(|s| self.observable(s)).collect()
    }

    /// Appends the shots of `other` after the shots of `self`.
    pub fn append(&mut self, other: &ShotBatch) -> Result<()> {
        if other.detectors != self.detectors {
            return Err(Error::InvalidInput(format!(
                "cannot append {} detectors to {}",
                other.detectors, self.detectors
            )));
        }
        let start = self.shots;
        let mut merged = ShotBatch::new(self.detectors, self.shots + other.shots);
        if start.is_multiple_of(64) {
            for d in 0..self.detectors {
                let (a, b) = (self.detector_row(d), other.detector_row(d));
                let row = merged.detector_row_mut(d);
                row[..a.len()].copy_from_slice(a);
                row[a.len()..a.len() + b.len()].copy_from_slice(b);
            }
            let w = self.words;
            merged.observable[..w].copy_from_slice(&self.observable);
            merged.observable[w..w + other.words].copy_from_slice(&other.observable);
        } else {
            merged.rows_from(self, 0);
            merged.rows_from(other, start);
        }
        *self = merged;
        Ok(())
    }

    /// Copies all rows of `src` into this batch starting at word `offset`.
    pub(crate) fn copy_words_from(&mut self, src: &ShotBatch, offset: usize) {
        let n = src.words.min(self.words.saturating_sub(offset));
        for d in 0..self.detectors {
            let row = &mut self.rows[d * self.words + offset..][..n];
            row.copy_from_slice(&src.detector_row(d)[..n]);
        }
        self.observable[offset..offset + n].copy_from_slice(&src.observable[..n]);
    }

    fn rows_from(&mut self, src: &ShotBatch, offset: usize) {
        for s in 0..src.shots {
            for d in 0..src.detectors {
                if src.get(d, s) {
                    self.set(d, offset + s, true);
                }
            }
            self.set_observable(offset + s, src.observable(s));
        }
    }

    /// The first `shots` shots.
    pub fn truncated(&self, shots: usize) -> ShotBatch {
        let shots = shots.min(self.shots);
        let mut out = ShotBatch::new(self.detectors, shots);
        let words = out.words;
        let tail = if shots.is_multiple_of(64) { u64::MAX } else { (1u64 << (shots % 64)) - 1 };
        for d in 0..self.detectors {
            let row = out.detector_row_mut(d);
            row.copy_from_slice(&self.detector_row(d)[..words]);
            if let Some(last) = row.last_mut() {
                *last &= tail;
            }
        }
        out.observable.copy_from_slice(&self.observable[..words]);
        if let Some(last) = out.observable.last_mut() {
            *last &= tail;
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.shots * (self.detectors + 3));
        for s in 0..self.shots {
            for d in 0..self.detectors {
                out.push(if self.get(d, s) { '1' } else { '0' });
            }
            out.push(' ');
            out.push(if self.observable(s) { '1' } else { '0' });
            out.push('\n');
        }
        out
    }

    /// Parses the text format. `detectors` fixes the expected line width.
    pub fn from_text(text: &str, detectors: usize) -> Result<ShotBatch> {
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim_end()))
            .filter(|(_, l)| !l.trim().is_empty())
            .collect();
        let mut batch = ShotBatch::new(detectors, lines.len());
        for (shot, (line_no, line)) in lines.into_iter().enumerate() {
            let parse_err = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            let (bits, obs) = line
                .split_once(' ')
                .ok_or_else(|| parse_err("expected `<detector bits> <observable bit>`".into()))?;
            if bits.len() != detectors {
                return Err(parse_err(format!(
                    "expected {detectors} detector bits, found {}",
                    bits.len()
                )));
            }
            for (d, c) in bits.bytes().enumerate() {
                match c {
                    b'0' => {}
                    b'1' => batch.set(d, shot, true),
                    _ => return Err(parse_err(format!("invalid bit {:?}", c as char))),
                }
            }
            match obs.trim() {
                "0" => {}
                "1" => batch.set_observable(shot, true),
                other => return Err(parse_err(format!("invalid observable bit {other:?}"))),
            }
        }
        Ok(batch)
    }

    pub fn to_binary(&self) -> Result<Vec<u8>> {
        let detectors = u16::try_from(self.detectors)
            .map_err(|_| Error::InvalidInput("too many detectors for the binary format".into()))?;
        let shots = u32::try_from(self.shots)
            .map_err(|_| Error::InvalidInput("too many shots for the binary format".into()))?;
        let record = (self.detectors + 1).div_ceil(8);
        let mut out = Vec::with_capacity(8 + record * self.shots);
        out.push(MAGIC);
        out.push(VERSION);
        out.extend_from_slice(&detectors.to_le_bytes());
        out.extend_from_slice(&shots.to_le_bytes());
        let mut buf = vec![0u8; record];
        for s in 0..self.shots {
            buf.fill(0);
            for d in 0..self.detectors {
                if self.get(d, s) {
                    buf[d / 8] |= 1 << (d % 8);
                }
            }
            if self.observable(s) {
                let d = self.detectors;
                buf[d / 8] |= 1 << (d % 8);
            }
            out.extend_from_slice(&buf);
        }
        Ok(out)
    }

    pub fn from_binary(bytes: &[u8]) -> Result<ShotBatch> {
        let bad = |m: &str| Error::InvalidInput(format!("binary shot file: {m}"));
        if bytes.len() < 8 {
            return Err(bad("truncated header"));
        }
        if bytes[0] != MAGIC {
            return Err(bad("bad magic byte"));
        }
        if bytes[1] != VERSION {
            return Err(bad("unsupported version"));
        }
        let detectors = u16::from_le_bytes([bytes[2], bytes[3]]) as usize;
        let shots = u32::from_le_bytes([bytes[4], bytes[5], bytes[6], bytes[7]]) as usize;
        let record = (detectors + 1).div_ceil(8);
        let body = &bytes[8..];
        if body.len() != record * shots {
            return Err(bad("length does not match header"));
        }
        let mut batch = ShotBatch::new(detectors, shots);
        for (s, rec) in body.chunks_exact(record).enumerate() {
            for d in 0..detectors {
                if rec[d / 8] >> (d % 8) & 1 == 1 {
                    batch.set(d, s, true);
                }
            }
            if rec[detectors / 8] >> (detectors % 8) & 1 == 1 {
                batch.set_observable(s, true);
            }
        }
        Ok(batch)
    }
}

fn set_bit(words: &mut [u64], bit: usize, value: bool) {
    let mask = 1u64 << (bit % 64);
    if value {
        words[bit / 64] |= mask;
    } else {
        words[bit / 64] &= !mask;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn batch_from(bits: &[(Vec<bool>, bool)], detectors: usize) -> ShotBatch {
        let mut b = ShotBatch::new(detectors, bits.len());
        for (s, (row, obs)) in bits.iter().enumerate() {
            for (d, &v) in row.iter().enumerate() {
                b.set(d, s, v);
            }
            b.set_observable(s, *obs);
        }
        b
    }

    #[test]
    fn text_layout() {
        let b = batch_from(&[(vec![false, true, false], true), (vec![true, false, false], false)], 3);
        assert_eq!(b.to_text(), "010 1\n100 0\n");
        assert_eq!(b.defects(), vec![vec![1], vec![0]]);
    }

    #[test]
    fn binary_header() {
        let b = ShotBatch::new(12, 3);
        let bytes = b.to_binary().unwrap();
        assert_eq!(&bytes[..8], &[0xDE, 1, 12, 0, 3, 0, 0, 0]);
        assert_eq!(bytes.len(), 8 + 3 * 2);
        assert!(ShotBatch::from_binary(&bytes[..7]).is_err());
    }

    #[test]
    fn rejects_malformed_text() {
        assert!(ShotBatch::from_text("01 0\n", 3).is_err());
        assert!(ShotBatch::from_text("012 0\n", 3).is_err());
        assert!(ShotBatch::from_text("010\n", 3).is_err());
    }

    proptest! {
        #[test]
        fn formats_round_trip(
            detectors in 0usize..40,
            raw in prop::collection::vec(any::<u64>(), 0..150),
        ) {
            let bits: Vec<(Vec<bool>, bool)> = raw
                .iter()
                .map(|r| ((0..detectors).map(|d| r >> (d % 64) & 1 == 1).collect(), r >> 63 == 1))
                .collect();
            let b = batch_from(&bits, detectors);
            prop_assert_eq!(&ShotBatch::from_text(&b.to_text(), detectors).unwrap(), &b);
            prop_assert_eq!(&ShotBatch::from_binary(&b.to_binary().unwrap()).unwrap(), &b);
        }

        #[test]
        fn append_then_truncate(a in 0usize..200, b in 0usize..200, seed in any::<u64>()) {
            let make = |n: usize, salt: u64| {
                let mut x = ShotBatch::new(5, n);
                for s in 0..n {
                    for d in 0..5 {
                        x.set(d, s, (seed ^ salt).wrapping_mul(s as u64 * 7 + d as u64 + 1) >> 60 & 1 == 1);
                    }
                    x.set_observable(s, s % 3 == 0);
                }
                x
            };
            let (x, y) = (make(a, 1), make(b, 2));
            let mut z = x.clone();
            z.append(&y).unwrap();
            prop_assert_eq!(z.shot_count(), a + b);
            prop_assert_eq!(&z.truncated(a), &x);
            for s in 0..b {
                prop_assert_eq!(z.shot_detectors(a + s), y.shot_detectors(s));
                prop_assert_eq!(z.observable(a + s), y.observable(s));
            }
        }
    }
}
