//! `RSTBANK1` binary container.
//!
//! Every file starts with the 8-byte magic `RSTBANK1`. A filter bank follows
//! the magic directly with its little-endian `u32` header; the other payloads
//! (coefficient tensors, deformation fields) put a 4-byte section tag right
//! after the magic. Tags are ASCII and decode to integers far larger than any
//! plausible bank header, so a reader can dispatch on the first word.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"RSTBANK1";
pub const TAG_COEF: &[u8; 4] = b"COEF";
pub const TAG_TAU: &[u8; 4] = b"TAU\0";

/// What follows the magic.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Section {
    Bank,
    Coefficients,
    Deformation,
}

/// Reader that tracks the byte offset for error messages.
pub(crate) struct Cursor<R> {
    inner: R,
    pub offset: u64,
}

impl<R: Read> Cursor<R> {
    pub fn new(inner: R) -> Self {
        Cursor { inner, offset: 0 }
    }

    fn eof(&self, what: &str) -> Error {
        Error::Parse {
            offset: self.offset,
            message: format!("truncated while reading {what}"),
        }
    }

    pub fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner
            .read_exact(&mut buf)
            .map_err(|_| self.eof(what))?;
        self.offset += N as u64;
        Ok(buf)
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        let v = self
            .inner
            .read_u32::<LittleEndian>()
            .map_err(|_| self.eof(what))?;
        self.offset += 4;
        Ok(v)
    }

    pub fn i32(&mut self, what: &str) -> Result<i32> {
        let v = self
            .inner
            .read_i32::<LittleEndian>()
            .map_err(|_| self.eof(what))?;
        self.offset += 4;
        Ok(v)
    }

    pub fn f64(&mut self, what: &str) -> Result<f64> {
        let v = self
            .inner
            .read_f64::<LittleEndian>()
            .map_err(|_| self.eof(what))?;
        self.offset += 8;
        Ok(v)
    }

    pub fn f64_vec(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let mut out = vec![0.0; n];
        self.inner
            .read_f64_into::<LittleEndian>(&mut out)
            .map_err(|_| self.eof(what))?;
        self.offset += 8 * n as u64;
        Ok(out)
    }

    pub fn fail(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.offset,
            message: message.into(),
        }
    }

    /// Read the magic and the section selector. For banks the first header
    /// word has already been consumed and is returned alongside.
    pub fn header(&mut self) -> Result<(Section, Option<u32>)> {
        let magic: [u8; 8] = self.bytes("magic")?;
        if &magic != MAGIC {
            return Err(Error::Parse {
                offset: 0,
                message: "bad magic, expected RSTBANK1".into(),
            });
        }
        let word: [u8; 4] = self.bytes("section word")?;
        Ok(match &word {
            w if w == TAG_COEF => (Section::Coefficients, None),
            w if w == TAG_TAU => (Section::Deformation, None),
            _ => (Section::Bank, Some(u32::from_le_bytes(word))),
        })
    }
}

pub(crate) fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_u32::<LittleEndian>(v)?;
    Ok(())
}

pub(crate) fn write_i32<W: Write>(w: &mut W, v: i32) -> Result<()> {
    w.write_i32::<LittleEndian>(v)?;
    Ok(())
}

pub(crate) fn write_f64s<W: Write>(w: &mut W, vs: &[f64]) -> Result<()> {
    for &v in vs {
        w.write_f64::<LittleEndian>(v)?;
    }
    Ok(())
}

pub(crate) fn expect_section<R: Read>(cur: &mut Cursor<R>, want: Section) -> Result<Option<u32>> {
    let (section, first) = cur.header()?;
    if section != want {
        return Err(cur.fail(format!("expected {want:?} section, found {section:?}")));
    }
    Ok(first)
}

/// Peek at a file's section kind.
pub fn section_of(bytes: &[u8]) -> Result<Section> {
    Ok(Cursor::new(bytes).header()?.0)
}
