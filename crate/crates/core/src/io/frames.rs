//! Binary frame-stream format.
//!
//! All integers little-endian.
//!
//! ```text
//! header:  magic "SRFR" | version u16 (=1) | nx u32 | ny u32 | counter_bits u8 | frame_count u64
//! frame:   frame_index u64 | rng_stream_id u64 | theta_x f64 | theta_y f64 | nx*ny counts
//! ```
//!
//! Counts are row-major (x fastest), stored in the narrowest of u8/u16/u32
//! that holds `counter_bits`.

use std::io::{Read, Write};

use crate::detector::Frame;
use crate::error::{Error, Result};
use crate::grid::Grid;

pub const MAGIC: &[u8; 4] = b"SRFR";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameHeader {
    pub nx: u32,
    pub ny: u32,
    pub counter_bits: u8,
    pub frame_count: u64,
}

impl FrameHeader {
    fn bytes_per_count(&self) -> usize {
        match self.counter_bits {
            0..=8 => 1,
            9..=16 => 2,
            _ => 4,
        }
    }
}

/// Bits needed to store counts up to `max`.
pub fn counter_bits(max: u32) -> u8 {
    (32 - max.leading_zeros()).max(1) as u8
}

pub struct FrameWriter<W: Write> {
    inner: W,
    header: FrameHeader,
    written: u64,
    buf: Vec<u8>,
}

impl<W: Write> FrameWriter<W> {
    pub fn new(mut inner: W, header: FrameHeader) -> Result<Self> {
        inner.write_all(MAGIC)?;
        inner.write_all(&VERSION.to_le_bytes())?;
        inner.write_all(&header.nx.to_le_bytes())?;
        inner.write_all(&header.ny.to_le_bytes())?;
        inner.write_all(&[header.counter_bits])?;
        inner.write_all(&header.frame_count.to_le_bytes())?;
        Ok(Self {
            inner,
            header,
            written: 0,
            buf: Vec::new(),
        })
    }

    pub fn write_frame(&mut self, frame: &Frame) -> Result<()> {
        let h = self.header;
        if frame.counts.shape() != (h.nx as usize, h.ny as usize) {
            return Err(Error::config("frames", "frame shape does not match stream header"));
        }
        if self.written == h.frame_count {
            return Err(Error::config("frames", "more frames than declared in header"));
        }
        let limit = if h.counter_bits >= 32 { u32::MAX } else { (1u32 << h.counter_bits) - 1 };
        self.buf.clear();
        self.buf.extend_from_slice(&frame.frame_index.to_le_bytes());
        self.buf.extend_from_slice(&frame.rng_stream_id.to_le_bytes());
        self.buf.extend_from_slice(&frame.theta[0].to_le_bytes());
        self.buf.extend_from_slice(&frame.theta[1].to_le_bytes());
        for &c in frame.counts.data() {
            if c > limit {
                return Err(Error::config("frames", format!("count {c} exceeds {} counter bits", h.counter_bits)));
            }
            match h.bytes_per_count() {
                1 => self.buf.push(c as u8),
                2 => self.buf.extend_from_slice(&(c as u16).to_le_bytes()),
                _ => self.buf.extend_from_slice(&c.to_le_bytes()),
            }
        }
        self.inner.write_all(&self.buf)?;
        self.written += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        if self.written != self.header.frame_count {
            return Err(Error::config(
                "frames",
                format!("declared {} frames, wrote {}", self.header.frame_count, self.written),
            ));
        }
        self.inner.flush()?;
        Ok(self.inner)
    }
}

pub struct FrameReader<R: Read> {
    inner: R,
    header: FrameHeader,
    read: u64,
}

impl<R: Read> FrameReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let bad = |msg: &str| Error::Format {
            what: "frame stream",
            msg: msg.to_string(),
        };
        let mut fixed = [0u8; 4 + 2 + 4 + 4 + 1 + 8];
        inner.read_exact(&mut fixed).map_err(|_| bad("truncated header"))?;
        if &fixed[0..4] != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = u16::from_le_bytes([fixed[4], fixed[5]]);
        if version != VERSION {
            return Err(bad("unsupported version"));
        }
        let header = FrameHeader {
            nx: u32::from_le_bytes(fixed[6..10].try_into().unwrap()),
            ny: u32::from_le_bytes(fixed[10..14].try_into().unwrap()),
            counter_bits: fixed[14],
            frame_count: u64::from_le_bytes(fixed[15..23].try_into().unwrap()),
        };
        if header.counter_bits == 0 || header.counter_bits > 32 {
            return Err(bad("counter bits out of range"));
        }
        Ok(Self {
            inner,
            header,
            read: 0,
        })
    }

    pub fn header(&self) -> FrameHeader {
        self.header
    }

    fn read_one(&mut self) -> Result<Frame> {
        let h = self.header;
        let n = (h.nx * h.ny) as usize;
        let mut meta = [0u8; 32];
        let trunc = |_| Error::Format {
            what: "frame stream",
            msg: format!("truncated at frame {}", self.read),
        };
        self.inner.read_exact(&mut meta).map_err(trunc)?;
        let mut raw = vec![0u8; n * h.bytes_per_count()];
        self.inner.read_exact(&mut raw).map_err(trunc)?;
        let counts: Vec<u32> = match h.bytes_per_count() {
            1 => raw.iter().map(|&b| b as u32).collect(),
            2 => raw.chunks_exact(2).map(|c| u16::from_le_bytes([c[0], c[1]]) as u32).collect(),
            _ => raw.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect(),
        };
        Ok(Frame {
            counts: Grid::from_vec(h.nx as usize, h.ny as usize, counts)?,
            theta: [
                f64::from_le_bytes(meta[16..24].try_into().unwrap()),
                f64::from_le_bytes(meta[24..32].try_into().unwrap()),
            ],
            frame_index: u64::from_le_bytes(meta[0..8].try_into().unwrap()),
            rng_stream_id: u64::from_le_bytes(meta[8..16].try_into().unwrap()),
        })
    }
}

impl<R: Read> Iterator for FrameReader<R> {
    type Item = Result<Frame>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.read >= self.header.frame_count {
            return None;
        }
        let f = self.read_one();
        self.read += 1;
        Some(f)
    }
}

/// Debug CSV: one row per pixel per frame.
pub fn write_frames_csv<'a>(
    mut w: impl Write,
    frames: impl IntoIterator<Item = &'a Frame>,
) -> std::io::Result<()> {
    writeln!(w, "frame_index,theta_x,theta_y,x,y,count")?;
    for f in frames {
        for (x, y, c) in f.counts.indexed() {
            writeln!(w, "{},{},{},{x},{y},{c}", f.frame_index, f.theta[0], f.theta[1])?;
        }
    }
    Ok(())
}
