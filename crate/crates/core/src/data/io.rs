//! EPB1 binary and CSV epoch files.
//!
//! EPB1 layout (little-endian): magic `EPB1`, `u32` channels, `u32` samples,
//! `u32` classes, `u32` epoch count, `f64` sampling rate; then per epoch a
//! `u32` 1-based label, a `u32`-length-prefixed UTF-8 subject id and
//! `channels * samples` `f32` values, channel-major.
//!
//! CSV layout: header `subject,label,channel,s0,...,s{N-1}`, one row per
//! channel, channels of an epoch on consecutive rows starting at 0.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;

use super::{Epoch, EpochSet};
use crate::error::{Error, ParseErrorKind, Position, Result};
use crate::scalar::Real;

const MAGIC: &[u8; 4] = b"EPB1";
const HEADER_LEN: usize = 4 + 4 * 4 + 8;

/// Settings the CSV layout does not carry.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvOptions {
    pub sampling_rate: f64,
    /// Defaults to the largest label present.
    pub num_classes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Format {
    Binary,
    Csv(CsvOptions),
}

pub fn load_epochs<T: Real>(path: impl AsRef<Path>, format: &Format) -> Result<EpochSet<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    match format {
        Format::Binary => read_binary(reader),
        Format::Csv(opts) => read_csv(reader, opts),
    }
}

pub fn save_epochs<T: Real>(set: &EpochSet<T>, path: impl AsRef<Path>, format: &Format) -> Result<()> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    match format {
        Format::Binary => write_binary(set, &mut writer),
        Format::Csv(_) => write_csv(set, &mut writer),
    }
    .map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })?;
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn write_binary<T: Real, W: Write>(set: &EpochSet<T>, w: &mut W) -> Result<()> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let io = |e| Error::io("<stream>", e);
    let mut buf = Vec::with_capacity(HEADER_LEN);
    buf.extend_from_slice(MAGIC);
    for v in [set.channels(), set.samples(), set.num_classes(), set.len()] {
        buf.extend_from_slice(&to_u32(v, "header field")?.to_le_bytes());
    }
    buf.extend_from_slice(&set.sampling_rate().to_le_bytes());
    w.write_all(&buf).map_err(io)?;
    for ep in set {
        buf.clear();
        buf.extend_from_slice(&to_u32(ep.label, "label")?.to_le_bytes());
        buf.extend_from_slice(&to_u32(ep.subject_id.len(), "subject id length")?.to_le_bytes());
        buf.extend_from_slice(ep.subject_id.as_bytes());
        for row in ep.data.rows() {
            for &v in row {
                buf.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
            }
        }
        w.write_all(&buf).map_err(io)?;
    }
    Ok(())
}

fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::InvalidConfig(format!("{what} {v} does not fit in u32")))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::parse(Position::Byte(self.pos as u64), ParseErrorKind::Truncated));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

pub fn read_binary<T: Real, R: Read>(mut r: R) -> Result<EpochSet<T>> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes).map_err(|e| Error::io("<stream>", e))?;
    let mut cur = Cursor { bytes: &bytes, pos: 0 };
    let header = |pos: usize, msg: String| Error::parse(Position::Byte(pos as u64), ParseErrorKind::MalformedHeader(msg));

    let magic = cur
        .take(4)
        .map_err(|_| header(0, "file shorter than magic".into()))?;
    if magic != MAGIC {
        return Err(header(0, format!("bad magic {magic:?}")));
    }
    if cur.remaining() < HEADER_LEN - 4 {
        return Err(header(cur.pos, "header truncated".into()));
    }
    let channels = cur.u32()? as usize;
    let samples = cur.u32()? as usize;
    let num_classes = cur.u32()? as usize;
    let count = cur.u32()? as usize;
    let sampling_rate = f64::from_le_bytes(cur.take(8)?.try_into().unwrap());
    if channels == 0 || samples == 0 {
        return Err(header(4, format!("shape {channels}x{samples} is empty")));
    }
    if num_classes < 2 {
        return Err(header(12, format!("class count {num_classes} < 2")));
    }
    if count == 0 {
        return Err(Error::EmptySet);
    }
    if !(sampling_rate > 0.0 && sampling_rate.is_finite()) {
        return Err(header(20, format!("sampling rate {sampling_rate} not positive")));
    }

    let block = channels * samples * 4;
    let mut epochs = Vec::with_capacity(count);
    for k in 0..count {
        let label_pos = cur.pos;
        let label = cur.u32()? as usize;
        if label == 0 || label > num_classes {
            return Err(Error::parse(
                Position::Byte(label_pos as u64),
                ParseErrorKind::LabelOutOfRange {
                    label: label as i64,
                    num_classes,
                },
            ));
        }
        let id_len = cur.u32()? as usize;
        let id_pos = cur.pos;
        let id = cur.take(id_len)?;
        let subject_id = std::str::from_utf8(id)
            .map_err(|e| Error::parse(Position::Byte(id_pos as u64), ParseErrorKind::InvalidText(e.to_string())))?
            .to_string();
        if cur.remaining() < block {
            return Err(Error::parse(
                Position::Byte(cur.pos as u64),
                ParseErrorKind::ShapeMismatch(format!(
                    "epoch {k} needs {channels}x{samples} samples ({block} bytes), {} bytes remain",
                    cur.remaining()
                )),
            ));
        }
        let mut data = Vec::with_capacity(channels * samples);
        for _ in 0..channels * samples {
            let pos = cur.pos;
            let v = f32::from_le_bytes(cur.take(4)?.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::parse(Position::Byte(pos as u64), ParseErrorKind::NonFinite));
            }
            data.push(T::cast(v as f64));
        }
        let data = Array2::from_shape_vec((channels, samples), data).expect("length checked");
        epochs.push(Epoch::new(subject_id, label, sampling_rate, data));
    }
    if cur.remaining() != 0 {
        return Err(Error::parse(
            Position::Byte(cur.pos as u64),
            ParseErrorKind::ShapeMismatch(format!("{} trailing bytes after {count} epochs", cur.remaining())),
        ));
    }
    EpochSet::partial(epochs, num_classes)
}

pub fn write_csv<T: Real, W: Write>(set: &EpochSet<T>, w: &mut W) -> Result<()> {
    if set.is_empty() {
        return Err(Error::EmptySet);
    }
    let mut wtr = csv::WriterBuilder::new().from_writer(w);
    let mut header = vec!["subject".to_string(), "label".into(), "channel".into()];
    header.extend((0..set.samples()).map(|j| format!("s{j}")));
    wtr.write_record(&header)?;
    for ep in set {
        for (c, row) in ep.data.rows().into_iter().enumerate() {
            let mut rec = vec![ep.subject_id.clone(), ep.label.to_string(), c.to_string()];
            // Display for f32/f64 is the shortest string that round-trips.
            rec.extend(row.iter().map(|v| v.to_string()));
            wtr.write_record(&rec)?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<stream>", e))
}

pub fn read_csv<T: Real, R: Read>(r: R, opts: &CsvOptions) -> Result<EpochSet<T>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(r);
    let mut records = rdr.records();
    let line_err = |line: u64, kind| Error::parse(Position::Line(line), kind);

    let header = match records.next() {
        Some(rec) => rec?,
        None => return Err(line_err(1, ParseErrorKind::MalformedHeader("empty file".into()))),
    };
    if header.len() < 4 || &header[0] != "subject" || &header[1] != "label" || &header[2] != "channel" {
        return Err(line_err(
            1,
            ParseErrorKind::MalformedHeader("expected subject,label,channel,s0,...".into()),
        ));
    }
    for (j, name) in header.iter().skip(3).enumerate() {
        if name != format!("s{j}") {
            return Err(line_err(1, ParseErrorKind::MalformedHeader(format!("column {} is {name:?}, expected s{j}", j + 3))));
        }
    }
    let samples = header.len() - 3;

    struct Partial<T> {
        subject: String,
        label: usize,
        rows: Vec<T>,
        channels: usize,
        line: u64,
    }
    let mut channels: Option<usize> = None;
    let mut done: Vec<Partial<T>> = Vec::new();
    let mut current: Option<Partial<T>> = None;

    let finish = |p: Partial<T>, channels: &mut Option<usize>, done: &mut Vec<Partial<T>>| -> Result<()> {
        match *channels {
            None => *channels = Some(p.channels),
            Some(e) if e != p.channels => {
                return Err(line_err(
                    p.line,
                    ParseErrorKind::ShapeMismatch(format!("epoch has {} channels, expected {e}", p.channels)),
                ))
            }
            _ => {}
        }
        done.push(p);
        Ok(())
    };

    for (k, rec) in records.enumerate() {
        let line = k as u64 + 2;
        let rec = rec?;
        if rec.len() != samples + 3 {
            return Err(line_err(
                line,
                ParseErrorKind::ShapeMismatch(format!("{} fields, expected {}", rec.len(), samples + 3)),
            ));
        }
        let label: i64 = rec[1]
            .trim()
            .parse()
            .map_err(|_| line_err(line, ParseErrorKind::InvalidText(format!("label {:?}", &rec[1]))))?;
        let channel: usize = rec[2]
            .trim()
            .parse()
            .map_err(|_| line_err(line, ParseErrorKind::InvalidText(format!("channel {:?}", &rec[2]))))?;
        if label < 1 || opts.num_classes.is_some_and(|c| label as usize > c) {
            return Err(line_err(
                line,
                ParseErrorKind::LabelOutOfRange {
                    label,
                    num_classes: opts.num_classes.unwrap_or(0),
                },
            ));
        }
        let mut values = Vec::with_capacity(samples);
        for field in rec.iter().skip(3) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| line_err(line, ParseErrorKind::InvalidText(format!("sample {field:?}"))))?;
            if !v.is_finite() {
                return Err(line_err(line, ParseErrorKind::NonFinite));
            }
            values.push(T::cast(v));
        }

        if channel == 0 {
            if let Some(p) = current.take() {
                finish(p, &mut channels, &mut done)?;
            }
            current = Some(Partial {
                subject: rec[0].to_string(),
                label: label as usize,
                rows: values,
                channels: 1,
                line,
            });
        } else {
            let p = current.as_mut().ok_or_else(|| {
                line_err(line, ParseErrorKind::ShapeMismatch(format!("channel {channel} without channel 0")))
            })?;
            if channel != p.channels || rec[0] != p.subject || label as usize != p.label {
                return Err(line_err(
                    line,
                    ParseErrorKind::ShapeMismatch(format!(
                        "row continues epoch from line {} inconsistently (channel {channel}, expected {})",
                        p.line, p.channels
                    )),
                ));
            }
            if channels.is_some_and(|e| channel >= e) {
                return Err(line_err(
                    line,
                    ParseErrorKind::ShapeMismatch(format!("channel {channel} exceeds {} channels", channels.unwrap())),
                ));
            }
            p.rows.extend(values);
            p.channels += 1;
        }
    }
    if let Some(p) = current.take() {
        finish(p, &mut channels, &mut done)?;
    }
    if done.is_empty() {
        return Err(Error::EmptySet);
    }
    let max_label = done.iter().map(|p| p.label).max().unwrap_or(0);
    let num_classes = opts.num_classes.unwrap_or(max_label);
    let epochs = done
        .into_iter()
        .map(|p| {
            let data = Array2::from_shape_vec((p.channels, samples), p.rows).expect("row lengths checked");
            Epoch::new(p.subject, p.label, opts.sampling_rate, data)
        })
        .collect();
    EpochSet::partial(epochs, num_classes)
}
