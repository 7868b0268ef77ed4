//! Binary record-set files.
//!
//! Little-endian layout: `TDA1`, version `u16`, points per revolution `u32`,
//! frame count `u32`, stage index `u16`, life fraction `f64`, seed `u64`,
//! then `frame_count * points_per_rev` `f64` samples, frame-major.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{RecordSet, RevolutionFrame};
use crate::error::{Error, Result};
use crate::source::FrameSource;

pub const MAGIC: [u8; 4] = *b"TDA1";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecordSetHeader {
    pub points_per_rev: usize,
    pub frame_count: usize,
    pub stage_index: u16,
    pub life_fraction: f64,
    pub rng_seed: u64,
}

impl RecordSetHeader {
    fn encode(&self) -> [u8; HEADER_LEN] {
        let mut h = [0u8; HEADER_LEN];
        h[0..4].copy_from_slice(&MAGIC);
        h[4..6].copy_from_slice(&FORMAT_VERSION.to_le_bytes());
        h[6..10].copy_from_slice(&(self.points_per_rev as u32).to_le_bytes());
        h[10..14].copy_from_slice(&(self.frame_count as u32).to_le_bytes());
        h[14..16].copy_from_slice(&self.stage_index.to_le_bytes());
        h[16..24].copy_from_slice(&self.life_fraction.to_le_bytes());
        h[24..32].copy_from_slice(&self.rng_seed.to_le_bytes());
        h
    }

    fn decode(h: &[u8; HEADER_LEN]) -> Result<Self> {
        if h[0..4] != MAGIC {
            return Err(Error::Format(format!("unknown magic {:?}", &h[0..4])));
        }
        let version = u16::from_le_bytes([h[4], h[5]]);
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let u32_at = |i: usize| u32::from_le_bytes(h[i..i + 4].try_into().unwrap()) as usize;
        let header = Self {
            points_per_rev: u32_at(6),
            frame_count: u32_at(10),
            stage_index: u16::from_le_bytes([h[14], h[15]]),
            life_fraction: f64::from_le_bytes(h[16..24].try_into().unwrap()),
            rng_seed: u64::from_le_bytes(h[24..32].try_into().unwrap()),
        };
        if header.points_per_rev == 0 {
            return Err(Error::Format("points_per_rev is zero".into()));
        }
        Ok(header)
    }

    fn sample_count(&self) -> usize {
        self.frame_count * self.points_per_rev
    }
}

pub fn write_recordset(rs: &RecordSet, path: impl AsRef<Path>) -> Result<()> {
    let header = RecordSetHeader {
        points_per_rev: rs.points_per_rev(),
        frame_count: rs.frame_count(),
        stage_index: rs.stage_index,
        life_fraction: rs.life_fraction,
        rng_seed: rs.rng_seed,
    };
    if u32::try_from(header.points_per_rev).is_err() || u32::try_from(header.frame_count).is_err() {
        return Err(Error::Format(
            "record set too large for u32 header fields".into(),
        ));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&header.encode())?;
    for frame in rs.frames() {
        for s in frame.iter() {
            w.write_all(&s.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_header(r: &mut impl Read) -> Result<RecordSetHeader> {
    let mut h = [0u8; HEADER_LEN];
    r.read_exact(&mut h).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Format("truncated header".into()),
        _ => Error::Io(e),
    })?;
    RecordSetHeader::decode(&h)
}

/// Reads up to `want` whole frames, returning fewer only at end of file.
fn read_frames(
    r: &mut impl Read,
    points_per_rev: usize,
    want: usize,
) -> Result<(Vec<RevolutionFrame>, usize)> {
    let mut frames = Vec::with_capacity(want);
    let mut buf = vec![0u8; points_per_rev * 8];
    let mut samples_read = 0;
    for _ in 0..want {
        let n = read_fully(r, &mut buf)?;
        samples_read += n / 8;
        if n < buf.len() {
            break;
        }
        frames.push(decode_frame(&buf));
    }
    Ok((frames, samples_read))
}

fn decode_frame(buf: &[u8]) -> RevolutionFrame {
    RevolutionFrame(
        buf.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    )
}

fn read_fully(r: &mut impl Read, buf: &mut [u8]) -> Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(filled)
}

pub fn read_recordset(path: impl AsRef<Path>) -> Result<RecordSet> {
    let mut r = BufReader::new(File::open(path)?);
    let header = read_header(&mut r)?;
    let (frames, samples) = read_frames(&mut r, header.points_per_rev, header.frame_count)?;
    if frames.len() != header.frame_count {
        return Err(Error::LengthMismatch {
            expected: header.sample_count(),
            actual: samples,
        });
    }
    let mut probe = [0u8; 1];
    if read_fully(&mut r, &mut probe)? != 0 {
        return Err(Error::Format(
            "trailing bytes after declared payload".into(),
        ));
    }
    RecordSet::new(
        frames,
        header.points_per_rev,
        header.stage_index,
        header.life_fraction,
        header.rng_seed,
    )
}

/// Reads only the header and the first `frames` revolutions of a file.
pub fn read_recordset_prefix(path: impl AsRef<Path>, frames: usize) -> Result<RecordSet> {
    let mut r = BufReader::new(File::open(path)?);
    let header = read_header(&mut r)?;
    if frames > header.frame_count {
        return Err(Error::InsufficientFrames {
            needed: frames,
            available: header.frame_count,
        });
    }
    let (got, samples) = read_frames(&mut r, header.points_per_rev, frames)?;
    if got.len() != frames {
        return Err(Error::LengthMismatch {
            expected: header.sample_count(),
            actual: samples,
        });
    }
    RecordSet::new(
        got,
        header.points_per_rev,
        header.stage_index,
        header.life_fraction,
        header.rng_seed,
    )
}

/// Streams revolutions from a record-set file one at a time.
pub struct FileFrameSource {
    reader: BufReader<File>,
    header: RecordSetHeader,
    remaining: usize,
}

impl FileFrameSource {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = BufReader::new(File::open(path)?);
        let header = read_header(&mut reader)?;
        Ok(Self {
            reader,
            remaining: header.frame_count,
            header,
        })
    }

    pub fn header(&self) -> &RecordSetHeader {
        &self.header
    }
}

impl FrameSource for FileFrameSource {
    fn points_per_rev(&self) -> usize {
        self.header.points_per_rev
    }

    fn next_frame(&mut self) -> Result<Option<RevolutionFrame>> {
        if self.remaining == 0 {
            return Ok(None);
        }
        let (mut frames, samples) = read_frames(&mut self.reader, self.header.points_per_rev, 1)?;
        match frames.pop() {
            Some(f) => {
                self.remaining -= 1;
                Ok(Some(f))
            }
            None => Err(Error::LengthMismatch {
                expected: self.header.sample_count(),
                actual: (self.header.frame_count - self.remaining) * self.header.points_per_rev
                    + samples,
            }),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synthesize_stage, GearSignalSpec};

    fn sample() -> RecordSet {
        let spec = GearSignalSpec {
            points_per_rev: 150,
            revolutions: 12,
            stage_index: 4,
            life_fraction: 0.25,
            ..Default::default()
        };
        synthesize_stage(&spec).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.tda");
        let rs = sample();
        write_recordset(&rs, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), HEADER_LEN + 12 * 150 * 8);
        assert_eq!(read_recordset(&path).unwrap(), rs);
        let prefix = read_recordset_prefix(&path, 5).unwrap();
        assert_eq!(prefix.frames(), &rs.frames()[..5]);
        let mut src = FileFrameSource::open(&path).unwrap();
        assert_eq!(src.header().frame_count, 12);
        let mut n = 0;
        while let Some(f) = src.next_frame().unwrap() {
            assert_eq!(f, rs.frames()[n]);
            n += 1;
        }
        assert_eq!(n, 12);
    }

    #[test]
    fn damaged_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.tda");
        write_recordset(&sample(), &path).unwrap();
        let good = std::fs::read(&path).unwrap();

        std::fs::write(&path, &good[..good.len() - 8]).unwrap();
        assert!(matches!(
            read_recordset(&path),
            Err(Error::LengthMismatch { .. })
        ));

        let mut extra = good.clone();
        extra.push(0);
        std::fs::write(&path, &extra).unwrap();
        assert!(matches!(read_recordset(&path), Err(Error::Format(_))));

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        std::fs::write(&path, &bad_magic).unwrap();
        assert!(matches!(read_recordset(&path), Err(Error::Format(_))));

        std::fs::write(&path, &good[..10]).unwrap();
        assert!(read_recordset(&path).is_err());
        assert!(read_recordset(dir.path().join("missing")).is_err());
        std::fs::write(&path, &good).unwrap();
        assert!(matches!(
            read_recordset_prefix(&path, 13),
            Err(Error::InsufficientFrames { .. })
        ));
    }
}
