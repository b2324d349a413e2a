//! Volume, fiber and score file formats.
//!
//! Volumes carry a five-line text header (`FVOL 1` or `LVOL 1`, dims, spacing, origin, data
//! encoding) followed by the payload in x-fastest order. Fibers are `FIB 1` followed by
//! `FIBER <id> <npoints>` blocks of `x y z` lines.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fiber::{Fiber, FiberId, FiberSet};
use crate::query::FiberResult;
use crate::volume::{FuzzyVolume, Geometry, LabelVolume};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Encoding {
    #[default]
    Ascii,
    Binary,
}

#[derive(Debug, Clone)]
pub enum Volume {
    Fuzzy(FuzzyVolume),
    Labels(LabelVolume),
}

impl Volume {
    pub fn geometry(&self) -> &Geometry {
        match self {
            Volume::Fuzzy(v) => v.geometry(),
            Volume::Labels(v) => v.geometry(),
        }
    }
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_volume(&bytes, &path.display().to_string())
}

pub fn load_fuzzy(path: impl AsRef<Path>) -> Result<FuzzyVolume> {
    match load_volume(&path)? {
        Volume::Fuzzy(v) => Ok(v),
        Volume::Labels(_) => Err(Error::format(
            path.as_ref().display(),
            "expected a fuzzy volume (FVOL), found a label volume",
        )),
    }
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelVolume> {
    match load_volume(&path)? {
        Volume::Labels(v) => Ok(v),
        Volume::Fuzzy(_) => Err(Error::format(
            path.as_ref().display(),
            "expected a label volume (LVOL), found a fuzzy volume",
        )),
    }
}

/// Splits off the next `\n`-terminated line, returning it and the remaining bytes.
fn next_line<'a>(bytes: &'a [u8], name: &str, line_no: usize) -> Result<(&'a str, &'a [u8])> {
    let end = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format(name, format!("line {line_no}: unexpected end of header")))?;
    let line = std::str::from_utf8(&bytes[..end])
        .map_err(|_| Error::format(name, format!("line {line_no}: header is not UTF-8")))?;
    Ok((line.trim_end_matches('\r'), &bytes[end + 1..]))
}

fn header_fields<T: std::str::FromStr>(
    line: &str,
    key: &str,
    name: &str,
    line_no: usize,
) -> Result<[T; 3]> {
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(Error::format(
            name,
            format!("line {line_no}: expected '{key} a b c', found '{line}'"),
        ));
    }
    let vals: Vec<T> = parts
        .map(|p| p.parse::<T>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::format(name, format!("line {line_no}: malformed '{key}' values")))?;
    <[T; 3]>::try_from(vals).map_err(|_| {
        Error::format(name, format!("line {line_no}: '{key}' needs exactly three values"))
    })
}

pub fn read_volume(bytes: &[u8], name: &str) -> Result<Volume> {
    let (magic, rest) = next_line(bytes, name, 1)?;
    let fuzzy = match magic.trim() {
        "FVOL 1" => true,
        "LVOL 1" => false,
        other => {
            return Err(Error::format(
                name,
                format!("line 1: expected 'FVOL 1' or 'LVOL 1', found '{other}'"),
            ))
        }
    };
    let (l2, rest) = next_line(rest, name, 2)?;
    let dims: [usize; 3] = header_fields(l2, "dims", name, 2)?;
    let (l3, rest) = next_line(rest, name, 3)?;
    let spacing: [f64; 3] = header_fields(l3, "spacing", name, 3)?;
    let (l4, rest) = next_line(rest, name, 4)?;
    let origin: [f64; 3] = header_fields(l4, "origin", name, 4)?;
    let (l5, payload) = next_line(rest, name, 5)?;
    let geometry = Geometry::new(dims, spacing, origin)
        .map_err(|e| Error::format(name, format!("lines 2-4: {e}")))?;
    let n = geometry.len();
    let header_len = bytes.len() - payload.len();

    let encoding = match (l5.trim(), fuzzy) {
        ("data ascii", _) => Encoding::Ascii,
        ("data binary-le-f32", true) | ("data binary-le-u16", false) => Encoding::Binary,
        (other, _) => {
            let binary = if fuzzy { "binary-le-f32" } else { "binary-le-u16" };
            return Err(Error::format(
                name,
                format!("line 5: expected 'data ascii' or 'data {binary}', found '{other}'"),
            ));
        }
    };

    match encoding {
        Encoding::Ascii => {
            let text = std::str::from_utf8(payload)
                .map_err(|_| Error::format(name, "ascii payload is not UTF-8"))?;
            let mut tokens = text
                .lines()
                .enumerate()
                .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 6, t)));
            if fuzzy {
                let mut values = Vec::with_capacity(n);
                for (line, tok) in tokens.by_ref().take(n) {
                    let v: f64 = tok.parse().map_err(|_| {
                        Error::format(name, format!("line {line}: malformed value '{tok}'"))
                    })?;
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::format(
                            name,
                            format!("line {line}: value {v} outside [0, 1]"),
                        ));
                    }
                    values.push(v);
                }
                check_count(values.len(), n, tokens.next(), name)?;
                Ok(Volume::Fuzzy(FuzzyVolume::new(geometry, values)?))
            } else {
                let mut labels = Vec::with_capacity(n);
                for (line, tok) in tokens.by_ref().take(n) {
                    labels.push(tok.parse::<u32>().map_err(|_| {
                        Error::format(name, format!("line {line}: malformed label '{tok}'"))
                    })?);
                }
                check_count(labels.len(), n, tokens.next(), name)?;
                Ok(Volume::Labels(LabelVolume::new(geometry, labels)?))
            }
        }
        Encoding::Binary => {
            let width = if fuzzy { 4 } else { 2 };
            let expected = n * width;
            if payload.len() < expected {
                return Err(Error::format(
                    name,
                    format!(
                        "payload truncated at byte offset {}: expected {expected} payload bytes, found {}",
                        bytes.len(),
                        payload.len()
                    ),
                ));
            }
            if payload.len() > expected {
                return Err(Error::format(
                    name,
                    format!(
                        "unexpected trailing data at byte offset {}",
                        header_len + expected
                    ),
                ));
            }
            if fuzzy {
                let mut values = Vec::with_capacity(n);
                for (i, c) in payload.chunks_exact(4).enumerate() {
                    let v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64;
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::format(
                            name,
                            format!("byte offset {}: value {v} outside [0, 1]", header_len + 4 * i),
                        ));
                    }
                    values.push(v);
                }
                Ok(Volume::Fuzzy(FuzzyVolume::new(geometry, values)?))
            } else {
                let labels = payload
                    .chunks_exact(2)
                    .map(|c| u16::from_le_bytes([c[0], c[1]]) as u32)
                    .collect();
                Ok(Volume::Labels(LabelVolume::new(geometry, labels)?))
            }
        }
    }
}

fn check_count(got: usize, want: usize, extra: Option<(usize, &str)>, name: &str) -> Result<()> {
    if got < want {
        return Err(Error::format(
            name,
            format!("payload has {got} values, expected {want}"),
        ));
    }
    if let Some((line, tok)) = extra {
        return Err(Error::format(
            name,
            format!("line {line}: unexpected extra value '{tok}'"),
        ));
    }
    Ok(())
}

fn write_header(w: &mut impl Write, magic: &str, g: &Geometry, data: &str) -> std::io::Result<()> {
    writeln!(w, "{magic} 1")?;
    writeln!(w, "dims {} {} {}", g.dims[0], g.dims[1], g.dims[2])?;
    writeln!(w, "spacing {} {} {}", g.spacing[0], g.spacing[1], g.spacing[2])?;
    writeln!(w, "origin {} {} {}", g.origin[0], g.origin[1], g.origin[2])?;
    writeln!(w, "data {data}")
}

/// Ascii payloads print each value in shortest round-trip form, so reading back is exact.
pub fn write_fuzzy(v: &FuzzyVolume, w: &mut impl Write, enc: Encoding) -> std::io::Result<()> {
    let g = v.geometry();
    match enc {
        Encoding::Ascii => {
            write_header(w, "FVOL", g, "ascii")?;
            for row in v.values().chunks(g.dims[0]) {
                write_joined(w, row.iter())?;
            }
        }
        Encoding::Binary => {
            write_header(w, "FVOL", g, "binary-le-f32")?;
            for &x in v.values() {
                w.write_all(&(x as f32).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn write_labels(v: &LabelVolume, w: &mut impl Write, enc: Encoding) -> std::io::Result<()> {
    let g = v.geometry();
    match enc {
        Encoding::Ascii => {
            write_header(w, "LVOL", g, "ascii")?;
            for row in v.labels().chunks(g.dims[0]) {
                write_joined(w, row.iter())?;
            }
        }
        Encoding::Binary => {
            write_header(w, "LVOL", g, "binary-le-u16")?;
            for &l in v.labels() {
                let l = u16::try_from(l).map_err(|_| {
                    std::io::Error::new(
                        std::io::ErrorKind::InvalidInput,
                        format!("label {l} does not fit the 16-bit binary encoding"),
                    )
                })?;
                w.write_all(&l.to_le_bytes())?;
            }
        }
    }
    Ok(())
}

fn write_joined<T: std::fmt::Display>(
    w: &mut impl Write,
    items: impl Iterator<Item = T>,
) -> std::io::Result<()> {
    for (i, x) in items.enumerate() {
        if i > 0 {
            w.write_all(b" ")?;
        }
        write!(w, "{x}")?;
    }
    w.write_all(b"\n")
}

fn save_with(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn save_fuzzy(v: &FuzzyVolume, path: impl AsRef<Path>, enc: Encoding) -> Result<()> {
    save_with(path.as_ref(), |w| write_fuzzy(v, w, enc))
}

pub fn save_labels(v: &LabelVolume, path: impl AsRef<Path>, enc: Encoding) -> Result<()> {
    save_with(path.as_ref(), |w| write_labels(v, w, enc))
}

/// Streams fibers from a `.fib` source, rejecting duplicate ids as they appear.
pub struct FiberReader<R> {
    input: R,
    name: String,
    line_no: usize,
    buf: String,
    seen: HashSet<FiberId>,
    started: bool,
}

impl FiberReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(FiberReader::new(BufReader::new(file), path.display().to_string()))
    }
}

impl<R: BufRead> FiberReader<R> {
    pub fn new(input: R, name: impl Into<String>) -> Self {
        FiberReader {
            input,
            name: name.into(),
            line_no: 0,
            buf: String::new(),
            seen: HashSet::new(),
            started: false,
        }
    }

    fn err(&self, message: impl std::fmt::Display) -> Error {
        Error::format(&self.name, format!("line {}: {message}", self.line_no))
    }

    /// Next non-blank line, or `None` at end of input.
    fn line(&mut self) -> Result<Option<&str>> {
        loop {
            self.buf.clear();
            let n = self
                .input
                .read_line(&mut self.buf)
                .map_err(|e| Error::io(&self.name, e))?;
            if n == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            if !self.buf.trim().is_empty() {
                return Ok(Some(self.buf.trim()));
            }
        }
    }

    fn read_fiber(&mut self) -> Result<Option<Fiber>> {
        if !self.started {
            self.started = true;
            match self.line()? {
                Some("FIB 1") => {}
                Some(other) => {
                    let other = other.to_string();
                    return Err(self.err(format!("expected 'FIB 1', found '{other}'")));
                }
                None => return Err(self.err("empty file, expected 'FIB 1'")),
            }
        }
        let Some(head) = self.line()? else {
            return Ok(None);
        };
        let parts: Vec<&str> = head.split_whitespace().collect();
        let (id, count) = match parts.as_slice() {
            ["FIBER", id, count] => match (id.parse::<FiberId>(), count.parse::<usize>()) {
                (Ok(id), Ok(count)) => (id, count),
                _ => return Err(self.err("malformed 'FIBER <id> <npoints>' line")),
            },
            _ => {
                let head = head.to_string();
                return Err(self.err(format!("expected 'FIBER <id> <npoints>', found '{head}'")));
            }
        };
        if count < 2 {
            return Err(self.err(format!("fiber {id} has {count} point(s), at least 2 required")));
        }
        if !self.seen.insert(id) {
            return Err(self.err(format!("duplicate fiber id {id}")));
        }
        let mut points = Vec::with_capacity(count);
        for _ in 0..count {
            let Some(l) = self.line()? else {
                return Err(self.err(format!("fiber {id}: file ends before {count} points")));
            };
            let xyz: Vec<f64> = match l
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<Vec<f64>, _>>()
            {
                Ok(v) if v.len() == 3 => v,
                _ => return Err(self.err(format!("fiber {id}: expected 'x y z'"))),
            };
            points.push([xyz[0], xyz[1], xyz[2]]);
        }
        Fiber::new(id, points).map(Some).map_err(|e| self.err(e))
    }
}

impl<R: BufRead> Iterator for FiberReader<R> {
    type Item = Result<Fiber>;

    fn next(&mut self) -> Option<Self::Item> {
        self.read_fiber().transpose()
    }
}

pub fn load_fibers(path: impl AsRef<Path>) -> Result<FiberSet> {
    let fibers = FiberReader::open(path)?.collect::<Result<Vec<_>>>()?;
    FiberSet::new(fibers)
}

pub fn read_fibers(input: impl Read, name: &str) -> Result<FiberSet> {
    let fibers = FiberReader::new(BufReader::new(input), name).collect::<Result<Vec<_>>>()?;
    FiberSet::new(fibers)
}

/// Coordinates are written with six decimals.
pub struct FiberWriter<W: Write> {
    out: W,
}

impl<W: Write> FiberWriter<W> {
    pub fn new(mut out: W) -> std::io::Result<Self> {
        writeln!(out, "FIB 1")?;
        Ok(FiberWriter { out })
    }

    pub fn write(&mut self, f: &Fiber) -> std::io::Result<()> {
        writeln!(self.out, "FIBER {} {}", f.id(), f.len())?;
        for p in f.points() {
            writeln!(self.out, "{:.6} {:.6} {:.6}", p[0], p[1], p[2])?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> std::io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn save_fibers<'a>(
    fibers: impl IntoIterator<Item = &'a Fiber>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    save_with(path, |w| {
        let mut fw = FiberWriter::new(w)?;
        for f in fibers {
            fw.write(f)?;
        }
        fw.finish().map(|_| ())
    })
}

pub const SCORES_HEADER: &str = "fiber_id\tdegree\taccepted\tclause_degrees";

pub fn write_score_header(w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "{SCORES_HEADER}")
}

pub fn write_score_row(w: &mut impl Write, r: &FiberResult) -> std::io::Result<()> {
    let clauses: Vec<String> = r.clause_degrees.iter().map(|d| format!("{d:.6}")).collect();
    writeln!(
        w,
        "{}\t{:.6}\t{}\t{}",
        r.id,
        r.degree,
        r.accepted,
        clauses.join(",")
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_volume(seed: u64) -> FuzzyVolume {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Geometry::new([4, 4, 4], [0.7, 1.1, 2.5], [-3.25, 0.0, 12.5]).unwrap();
        FuzzyVolume::from_fn(g, |_| rng.gen::<f64>()).unwrap()
    }

    fn bytes_of(v: &FuzzyVolume, enc: Encoding) -> Vec<u8> {
        let mut out = Vec::new();
        write_fuzzy(v, &mut out, enc).unwrap();
        out
    }

    #[test]
    fn ascii_round_trip_is_exact() {
        let v = random_volume(1);
        match read_volume(&bytes_of(&v, Encoding::Ascii), "mem").unwrap() {
            Volume::Fuzzy(back) => {
                assert_eq!(back.values(), v.values());
                assert_eq!(back.geometry(), v.geometry());
            }
            Volume::Labels(_) => panic!("wrong kind"),
        }
    }

    #[test]
    fn binary_round_trip_within_f32() {
        let v = random_volume(2);
        let Volume::Fuzzy(back) = read_volume(&bytes_of(&v, Encoding::Binary), "mem").unwrap() else {
            panic!("wrong kind")
        };
        let err = v
            .values()
            .iter()
            .zip(back.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn truncated_binary_names_offset() {
        let v = random_volume(3);
        let mut bytes = bytes_of(&v, Encoding::Binary);
        bytes.truncate(bytes.len() - 6);
        let msg = read_volume(&bytes, "mem").unwrap_err().to_string();
        assert!(msg.contains("byte offset"), "{msg}");
    }

    #[test]
    fn ascii_errors_name_line() {
        let text = "FVOL 1\ndims 2 1 1\nspacing 1 1 1\norigin 0 0 0\ndata ascii\n0.5\n1.5\n";
        let msg = read_volume(text.as_bytes(), "mem").unwrap_err().to_string();
        assert!(msg.contains("line 7") && msg.contains("outside"), "{msg}");
        let text = "FVOL 1\ndims 2 1\nspacing 1 1 1\norigin 0 0 0\ndata ascii\n0 0\n";
        assert!(read_volume(text.as_bytes(), "mem").unwrap_err().to_string().contains("line 2"));
        let text = "FVOL 1\ndims 3 1 1\nspacing 1 1 1\norigin 0 0 0\ndata ascii\n0 0\n";
        assert!(read_volume(text.as_bytes(), "mem").is_err());
        let text = "FVOL 1\ndims 1 1 1\nspacing 1 1 1\norigin 0 0 0\ndata ascii\n0 0\n";
        assert!(read_volume(text.as_bytes(), "mem").unwrap_err().to_string().contains("extra"));
    }

    #[test]
    fn label_round_trips() {
        let g = Geometry::new([3, 2, 1], [1.0; 3], [0.0; 3]).unwrap();
        let lv = LabelVolume::new(g, vec![0, 1, 2, 3, 0, 65535]).unwrap();
        for enc in [Encoding::Ascii, Encoding::Binary] {
            let mut out = Vec::new();
            write_labels(&lv, &mut out, enc).unwrap();
            let Volume::Labels(back) = read_volume(&out, "mem").unwrap() else {
                panic!("wrong kind")
            };
            assert_eq!(back.labels(), lv.labels());
        }
    }

    #[test]
    fn fiber_round_trip() {
        let fs = FiberSet::new(vec![
            Fiber::new(4, vec![[0.0, 1.5, -2.25], [1.0, 2.0, 3.0]]).unwrap(),
            Fiber::new(9, vec![[0.1234567, 0.0, 0.0], [1.0, 1.0, 1.0], [2.0, 2.0, 2.0]]).unwrap(),
        ])
        .unwrap();
        let mut w = FiberWriter::new(Vec::new()).unwrap();
        for f in fs.fibers() {
            w.write(f).unwrap();
        }
        let bytes = w.finish().unwrap();
        let back = read_fibers(bytes.as_slice(), "mem").unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in fs.fibers().iter().zip(back.fibers()) {
            assert_eq!(a.id(), b.id());
            for (p, q) in a.points().iter().zip(b.points()) {
                for k in 0..3 {
                    assert!((p[k] - q[k]).abs() <= 1e-5);
                }
            }
        }
    }

    #[test]
    fn fiber_errors() {
        let one_point = "FIB 1\nFIBER 3 1\n0 0 0\n";
        let msg = read_fibers(one_point.as_bytes(), "mem").unwrap_err().to_string();
        assert!(msg.contains("line 2"), "{msg}");
        let dup = "FIB 1\nFIBER 1 2\n0 0 0\n1 1 1\nFIBER 1 2\n0 0 0\n1 1 1\n";
        let msg = read_fibers(dup.as_bytes(), "mem").unwrap_err().to_string();
        assert!(msg.contains("duplicate") && msg.contains("line 5"), "{msg}");
        assert!(read_fibers("FIB 2\n".as_bytes(), "mem").is_err());
        assert!(read_fibers("FIB 1\nFIBER 1 2\n0 0 0\n".as_bytes(), "mem").is_err());
        assert_eq!(read_fibers("FIB 1\n".as_bytes(), "mem").unwrap().len(), 0);
    }

    #[test]
    fn score_row_format() {
        let r = FiberResult {
            id: 12,
            degree: 0.8,
            accepted: true,
            windows: vec![],
            clause_degrees: vec![1.0, 0.8, 0.9123456],
        };
        let mut out = Vec::new();
        write_score_row(&mut out, &r).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "12\t0.800000\ttrue\t1.000000,0.800000,0.912346\n"
        );
    }
}
