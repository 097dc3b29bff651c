//! Flat little-endian sample dump.
//!
//! ```text
//! header (20 bytes)
//!   0  [u8; 4]  magic "MDFY"
//!   4  u32      version (1)
//!   8  u32      N, number of records
//!  12  u16      H
//!  14  u16      W
//!  16  u16      channels
//!  18  u16      classes
//! record (8 + 4·H·W·channels bytes), repeated N times
//!   0  u32      sample id
//!   4  u16      label
//!   6  u16      domain id
//!   8  [f32]    pixels, row-major HWC
//! ```
//!
//! Pixels are narrowed to `f32` on write, so a load returns the f32-rounded
//! values.

use std::io::{Read, Write};

use super::Sample;
use crate::error::{Error, Result};
use crate::image::Image;

pub const MAGIC: &[u8; 4] = b"MDFY";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetHeader {
    pub version: u32,
    pub n: u32,
    pub height: u16,
    pub width: u16,
    pub channels: u16,
    pub classes: u16,
}

fn narrow<T: TryFrom<usize>>(what: &str, v: usize) -> Result<T> {
    T::try_from(v).map_err(|_| Error::Format(format!("{what} = {v} does not fit the header field")))
}

pub fn write_samples<W: Write>(mut w: W, samples: &[Sample], classes: usize) -> Result<()> {
    let (h, wd, ch) =
        samples.first().map(|s| (s.image.height(), s.image.width(), s.image.channels())).unwrap_or((0, 0, 3));
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&narrow::<u32>("N", samples.len())?.to_le_bytes())?;
    w.write_all(&narrow::<u16>("H", h)?.to_le_bytes())?;
    w.write_all(&narrow::<u16>("W", wd)?.to_le_bytes())?;
    w.write_all(&narrow::<u16>("channels", ch)?.to_le_bytes())?;
    w.write_all(&narrow::<u16>("classes", classes)?.to_le_bytes())?;
    for s in samples {
        if (s.image.height(), s.image.width(), s.image.channels()) != (h, wd, ch) {
            return Err(Error::Format(format!("sample {} has a different raster shape than the first sample", s.id)));
        }
        w.write_all(&s.id.to_le_bytes())?;
        w.write_all(&narrow::<u16>("label", s.label)?.to_le_bytes())?;
        w.write_all(&s.domain.to_le_bytes())?;
        for &v in s.image.data() {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    Ok(())
}

fn take<const K: usize, R: Read>(r: &mut R) -> Result<[u8; K]> {
    let mut buf = [0u8; K];
    r.read_exact(&mut buf).map_err(|e| Error::Format(format!("truncated dataset file: {e}")))?;
    Ok(buf)
}

pub fn read_samples<R: Read>(mut r: R) -> Result<(DatasetHeader, Vec<Sample>)> {
    if &take::<4, _>(&mut r)? != MAGIC {
        return Err(Error::Format("bad magic, expected \"MDFY\"".into()));
    }
    let header = DatasetHeader {
        version: u32::from_le_bytes(take(&mut r)?),
        n: u32::from_le_bytes(take(&mut r)?),
        height: u16::from_le_bytes(take(&mut r)?),
        width: u16::from_le_bytes(take(&mut r)?),
        channels: u16::from_le_bytes(take(&mut r)?),
        classes: u16::from_le_bytes(take(&mut r)?),
    };
    if header.version != VERSION {
        return Err(Error::Format(format!("unsupported version {} (expected {VERSION})", header.version)));
    }
    let (h, w, ch) = (header.height as usize, header.width as usize, header.channels as usize);
    let mut samples = Vec::with_capacity(header.n as usize);
    for _ in 0..header.n {
        let id = u32::from_le_bytes(take(&mut r)?);
        let label = u16::from_le_bytes(take(&mut r)?) as usize;
        let domain = u16::from_le_bytes(take(&mut r)?);
        if label >= header.classes as usize {
            return Err(Error::Format(format!("sample {id} label {label} >= classes {}", header.classes)));
        }
        let mut data = Vec::with_capacity(h * w * ch);
        for _ in 0..h * w * ch {
            data.push(f32::from_le_bytes(take(&mut r)?) as f64);
        }
        samples.push(Sample { id, image: Image::new(h, w, ch, data)?, label, domain });
    }
    Ok((header, samples))
}
