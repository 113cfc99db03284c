//! Versioned plain-text model files.
//!
//! ```text
//! ADAFM v1
//! d=<int> k=<int> T=<int>
//! alpha=<decimal>          # repeated T times:
//! <d decimals>             #   linear weights
//! <k decimals>             #   d rows of the factor matrix
//! ```
//!
//! Every decimal carries 17 significant digits so loading reproduces the
//! stored `f64` bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::ensemble::EnsembleModel;
use crate::error::{Error, Result};
use crate::fm::FmParams;

pub const MAGIC: &str = "ADAFM";
pub const VERSION: &str = "v1";

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_model<W: Write>(model: &EnsembleModel, mut out: W) -> Result<()> {
    let (d, k) = match model.components().first() {
        Some(c) => (c.params.dim(), c.params.rank()),
        None => return Err(Error::Merge("cannot save an empty ensemble".into())),
    };
    writeln!(out, "{MAGIC} {VERSION}")?;
    writeln!(out, "d={d} k={k} T={}", model.len())?;
    for c in model.components() {
        if !c.params.is_finite() || !c.alpha.is_finite() {
            return Err(Error::Shape("refusing to save non-finite parameters".into()));
        }
        writeln!(out, "alpha={}", fmt(c.alpha))?;
        let w: Vec<String> = c.params.w().iter().map(|&x| fmt(x)).collect();
        writeln!(out, "{}", w.join(" "))?;
        for l in 0..d {
            let row: Vec<String> = c.params.v_row(l).iter().map(|&x| fmt(x)).collect();
            writeln!(out, "{}", row.join(" "))?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn save_model(model: &EnsembleModel, path: impl AsRef<Path>) -> Result<()> {
    let file = File::create(path)?;
    write_model(model, BufWriter::new(file))
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    number: usize,
}

impl<R: BufRead> Lines<R> {
    fn next_line(&mut self, what: &str) -> Result<String> {
        self.number += 1;
        match self.inner.next() {
            Some(line) => Ok(line?),
            None => Err(Error::Format {
                line: self.number,
                msg: format!("unexpected end of file, expected {what}"),
            }),
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Format {
            line: self.number,
            msg: msg.into(),
        }
    }

    fn decimals(&mut self, count: usize, what: &str) -> Result<Vec<f64>> {
        let line = self.next_line(what)?;
        let values = line
            .split_whitespace()
            .map(|tok| {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| self.err(format!("invalid decimal {tok:?} in {what}")))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(self.err(format!("non-finite value in {what}")))
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != count {
            return Err(self.err(format!("{what} has {} values, expected {count}", values.len())));
        }
        Ok(values)
    }
}

fn header_field(tok: Option<&str>, key: &str, lines: &Lines<impl BufRead>) -> Result<usize> {
    tok.and_then(|t| t.strip_prefix(key))
        .and_then(|t| t.strip_prefix('='))
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| lines.err(format!("expected `{key}=<int>` in shape header")))
}

pub fn read_model<R: BufRead>(reader: R) -> Result<EnsembleModel> {
    let mut lines = Lines {
        inner: reader.lines(),
        number: 0,
    };
    let magic = lines.next_line("header")?;
    let mut parts = magic.split_whitespace();
    if parts.next() != Some(MAGIC) {
        return Err(lines.err(format!("missing `{MAGIC}` magic")));
    }
    match parts.next() {
        Some(VERSION) => {}
        other => {
            return Err(lines.err(format!(
                "unsupported version {:?}, expected {VERSION}",
                other.unwrap_or("")
            )))
        }
    }
    let shape = lines.next_line("shape header")?;
    let mut toks = shape.split_whitespace();
    let d = header_field(toks.next(), "d", &lines)?;
    let k = header_field(toks.next(), "k", &lines)?;
    let t = header_field(toks.next(), "T", &lines)?;
    if k == 0 || t == 0 {
        return Err(lines.err("k and T must be positive"));
    }
    let mut model = EnsembleModel::new();
    for _ in 0..t {
        let line = lines.next_line("alpha line")?;
        let alpha: f64 = line
            .trim()
            .strip_prefix("alpha=")
            .and_then(|a| a.parse().ok())
            .filter(|a: &f64| a.is_finite() && *a > 0.0)
            .ok_or_else(|| lines.err("expected `alpha=<positive decimal>`"))?;
        let w = lines.decimals(d, "linear weights")?;
        let mut v = Vec::with_capacity(d * k);
        for _ in 0..d {
            v.extend(lines.decimals(k, "factor row")?);
        }
        let params = FmParams::from_parts(d, k, w, v).map_err(|e| lines.err(e.to_string()))?;
        model.push(alpha, params).map_err(|e| lines.err(e.to_string()))?;
    }
    Ok(model)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<EnsembleModel> {
    let file = File::open(path)?;
    read_model(BufReader::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fm::init_params;
    use crate::rng::RngHandle;
    use proptest::prelude::*;

    fn model(seed: u64, d: usize, k: usize, t: usize) -> EnsembleModel {
        let mut rng = RngHandle::new(seed);
        let mut m = EnsembleModel::new();
        for _ in 0..t {
            let mut p = init_params(d, k, &mut rng).unwrap();
            for w in p.w_mut() {
                *w = rng.gaussian(0.0, 3.0);
            }
            let alpha = 0.01 + rng.uniform_f64();
            m.push(alpha, p).unwrap();
        }
        m
    }

    fn to_bytes(m: &EnsembleModel) -> Vec<u8> {
        let mut buf = Vec::new();
        write_model(m, &mut buf).unwrap();
        buf
    }

    #[test]
    fn layout() {
        let text = String::from_utf8(to_bytes(&model(1, 3, 2, 2))).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "ADAFM v1");
        assert_eq!(lines[1], "d=3 k=2 T=2");
        assert!(lines[2].starts_with("alpha="));
        assert_eq!(lines.len(), 2 + 2 * (1 + 1 + 3));
        assert_eq!(lines[3].split(' ').count(), 3);
        assert_eq!(lines[4].split(' ').count(), 2);
    }

    #[test]
    fn truncated_file() {
        let bytes = to_bytes(&model(2, 4, 2, 2));
        let text = String::from_utf8(bytes).unwrap();
        let cut: String = text.lines().take(6).map(|l| format!("{l}\n")).collect();
        match read_model(cut.as_bytes()) {
            Err(Error::Format { line, msg }) => {
                assert_eq!(line, 7);
                assert!(msg.contains("end of file"));
            }
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn version_mismatch_names_expected() {
        let err = read_model("ADAFM v2\nd=1 k=1 T=1\n".as_bytes()).unwrap_err();
        assert!(err.to_string().contains("v1"), "{err}");
        assert!(matches!(err, Error::Format { line: 1, .. }));
    }

    #[test]
    fn bad_values_are_located() {
        let text = "ADAFM v1\nd=2 k=1 T=1\nalpha=1.0\n0.5 inf\n1.0\n2.0\n";
        assert!(matches!(read_model(text.as_bytes()), Err(Error::Format { line: 4, .. })));
        let text = "ADAFM v1\nd=2 k=1 T=1\nalpha=1.0\n0.5 1.0\n1.0 3.0\n2.0\n";
        assert!(matches!(read_model(text.as_bytes()), Err(Error::Format { line: 5, .. })));
        let text = "ADAFM v1\nd=2 k=1\n";
        assert!(matches!(read_model(text.as_bytes()), Err(Error::Format { line: 2, .. })));
        let text = "ADAFM v1\nd=2 k=1 T=1\nalpha=-1\n";
        assert!(matches!(read_model(text.as_bytes()), Err(Error::Format { line: 3, .. })));
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.txt");
        let m = model(9, 12, 3, 4);
        save_model(&m, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), m);
    }

    proptest! {
        #[test]
        fn roundtrip_is_bit_exact(seed in any::<u64>(), d in 1usize..10, k in 1usize..4, t in 1usize..4) {
            let k = k.min(d);
            let m = model(seed, d, k, t);
            let bytes = to_bytes(&m);
            let back = read_model(bytes.as_slice()).unwrap();
            for (a, b) in m.components().iter().zip(back.components()) {
                prop_assert_eq!(a.alpha.to_bits(), b.alpha.to_bits());
                for (x, y) in a.params.w().iter().zip(b.params.w()).chain(a.params.v().iter().zip(b.params.v())) {
                    prop_assert_eq!(x.to_bits(), y.to_bits());
                }
            }
            prop_assert_eq!(to_bytes(&back), bytes);
        }
    }
}
