//! Text records for sketch state.
//!
//! ```text
//! cpadetect-sketch v1
//! kind=lfm
//! hash_bits=32
//! substrings=8
//! bitmaps=256
//! hash_seed=1592590337
//! pattern_seed=2591548069
//! inserts=1000
//! 1111111111010000...   (one line per bitmap, bit 0 first)
//! ```
//!
//! The LFM pattern matrix is not stored; decoding regenerates it from
//! `pattern_seed`. Hyperloglog-FM records use `kind=hll-fm`, omit
//! `substrings` and `pattern_seed`, and store the base of the seed family in
//! `hash_seed`.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::baselines::HyperloglogFmSketch;
use crate::error::{Error, Result};
use crate::lfm::{LfmSketch, SketchConfig};
use crate::sketch::DistinctSketch;

const MAGIC: &str = "cpadetect-sketch v1";

fn push_bitmaps(out: &mut String, bitmaps: &[u64], width: u32) {
    for &b in bitmaps {
        for k in 0..width {
            out.push(if (b >> (width - 1 - k)) & 1 == 1 { '1' } else { '0' });
        }
        out.push('\n');
    }
}

pub fn encode_lfm(sketch: &LfmSketch) -> String {
    let c = sketch.config();
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}\nkind=lfm");
    let _ = writeln!(out, "hash_bits={}\nsubstrings={}\nbitmaps={}", c.hash_bits, c.substrings, c.bitmaps);
    let _ = writeln!(out, "hash_seed={}\npattern_seed={}", c.hash_seed, c.pattern_seed);
    let _ = writeln!(out, "inserts={}", sketch.insert_count());
    push_bitmaps(&mut out, sketch.bitmaps(), c.hash_bits);
    out
}

pub fn encode_hll_fm(sketch: &HyperloglogFmSketch) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}\nkind=hll-fm");
    let _ = writeln!(out, "hash_bits={}\nbitmaps={}", sketch.hash_bits(), sketch.bitmaps().len());
    let _ = writeln!(out, "hash_seed={}", sketch.seeds()[0]);
    let _ = writeln!(out, "inserts={}", sketch.insert_count());
    push_bitmaps(&mut out, sketch.bitmaps(), sketch.hash_bits());
    out
}

struct Record<'a> {
    kind: &'a str,
    fields: HashMap<&'a str, &'a str>,
    rows: Vec<&'a str>,
}

impl<'a> Record<'a> {
    fn parse(text: &'a str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(MAGIC) {
            return Err(Error::Parse("missing sketch record header".into()));
        }
        let mut fields = HashMap::new();
        let mut rows = Vec::new();
        for line in lines.filter(|l| !l.is_empty()) {
            match line.split_once('=') {
                Some((k, v)) if rows.is_empty() => {
                    fields.insert(k, v);
                }
                _ => rows.push(line),
            }
        }
        let kind = fields.remove("kind").ok_or_else(|| Error::Parse("missing kind".into()))?;
        Ok(Record { kind, fields, rows })
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.fields.get(key).ok_or_else(|| Error::Parse(format!("missing field `{key}`")))?;
        raw.parse().map_err(|_| Error::Parse(format!("bad value `{raw}` for `{key}`")))
    }

    fn bitmaps(&self, count: usize, width: u32) -> Result<Vec<u64>> {
        if self.rows.len() != count {
            return Err(Error::Parse(format!("expected {count} bitmaps, found {}", self.rows.len())));
        }
        self.rows
            .iter()
            .map(|row| {
                if row.len() != width as usize {
                    return Err(Error::Parse(format!("bitmap row has {} bits, expected {width}", row.len())));
                }
                row.bytes().try_fold(0u64, |acc, c| match c {
                    b'0' => Ok(acc << 1),
                    b'1' => Ok((acc << 1) | 1),
                    _ => Err(Error::Parse(format!("invalid bit character `{}`", c as char))),
                })
            })
            .collect()
    }
}

pub fn decode_lfm(text: &str) -> Result<LfmSketch> {
    let rec = Record::parse(text)?;
    if rec.kind != "lfm" {
        return Err(Error::Parse(format!("expected an lfm record, found `{}`", rec.kind)));
    }
    let config = SketchConfig {
        hash_bits: rec.get("hash_bits")?,
        substrings: rec.get("substrings")?,
        bitmaps: rec.get("bitmaps")?,
        hash_seed: rec.get("hash_seed")?,
        pattern_seed: rec.get("pattern_seed")?,
    };
    let mut sketch = LfmSketch::new(config)?;
    let bitmaps = rec.bitmaps(config.bitmaps, config.hash_bits)?;
    sketch.restore(bitmaps, rec.get("inserts")?);
    Ok(sketch)
}

pub fn decode_hll_fm(text: &str) -> Result<HyperloglogFmSketch> {
    let rec = Record::parse(text)?;
    if rec.kind != "hll-fm" {
        return Err(Error::Parse(format!("expected an hll-fm record, found `{}`", rec.kind)));
    }
    let hash_bits: u32 = rec.get("hash_bits")?;
    let count: usize = rec.get("bitmaps")?;
    let mut sketch = HyperloglogFmSketch::new(count, hash_bits, rec.get("hash_seed")?)?;
    let bitmaps = rec.bitmaps(count, hash_bits)?;
    sketch.restore(bitmaps, rec.get("inserts")?);
    Ok(sketch)
}
