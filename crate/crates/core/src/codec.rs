//! Little-endian binary containers shared by the `fmat`, `CCAT1`, `MCCA1` and
//! `SVMM1` formats.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub const FMAT_MAGIC: &[u8; 6] = b"FMAT1\0";

#[derive(Debug, Default)]
pub struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn with_magic(magic: &[u8]) -> Self {
        Encoder {
            buf: magic.to_vec(),
        }
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.buf.push(v);
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    pub fn f64(&mut self, v: f64) -> &mut Self {
        self.buf.extend_from_slice(&v.to_le_bytes());
        self
    }

    /// Length-prefixed byte field.
    pub fn field(&mut self, bytes: &[u8]) -> &mut Self {
        self.u64(bytes.len() as u64);
        self.buf.extend_from_slice(bytes);
        self
    }

    pub fn finish(self) -> Vec<u8> {
        self.buf
    }
}

#[derive(Debug)]
pub struct Decoder<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Decoder<'a> {
    /// Starts decoding after checking `magic`.
    pub fn new(bytes: &'a [u8], magic: &[u8], what: &'static str) -> Result<Self> {
        if bytes.len() < magic.len() || &bytes[..magic.len()] != magic {
            return Err(Error::Parse(format!("{what}: bad magic header")));
        }
        Ok(Decoder {
            bytes,
            pos: magic.len(),
            what,
        })
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&end| end <= self.bytes.len())
            .ok_or_else(|| Error::Parse(format!("{}: truncated at byte {}", self.what, self.pos)))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| Error::Parse(format!("{}: size {v} overflows", self.what)))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn field(&mut self) -> Result<&'a [u8]> {
        let len = self.usize()?;
        self.take(len)
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Parse(format!(
                "{}: {} trailing bytes",
                self.what,
                self.bytes.len() - self.pos
            )));
        }
        Ok(())
    }
}

/// Encodes a matrix in `fmat` layout: magic, u64 rows, u64 cols, row-major f64.
///
/// Zero-sized matrices are representable here; [`crate::matrixio::FeatureMatrix`]
/// adds the non-empty constraint on top.
pub fn encode_matrix(m: &DMatrix<f64>) -> Vec<u8> {
    let mut enc = Encoder::with_magic(FMAT_MAGIC);
    enc.u64(m.nrows() as u64).u64(m.ncols() as u64);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            enc.f64(m[(i, j)]);
        }
    }
    enc.finish()
}

pub fn decode_matrix(bytes: &[u8]) -> Result<DMatrix<f64>> {
    let mut dec = Decoder::new(bytes, FMAT_MAGIC, "fmat")?;
    let rows = dec.usize()?;
    let cols = dec.usize()?;
    let count = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::Parse(format!("fmat: {rows}x{cols} overflows")))?;
    if count.saturating_mul(8) > bytes.len() {
        return Err(Error::Parse(format!(
            "fmat: header claims {rows}x{cols} but only {} bytes present",
            bytes.len()
        )));
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(dec.f64()?);
    }
    dec.finish()?;
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn encode_vector(v: &DVector<f64>) -> Vec<u8> {
    let mut enc = Encoder::default();
    enc.u64(v.len() as u64);
    for &x in v.iter() {
        enc.f64(x);
    }
    enc.finish()
}

pub fn decode_vector(bytes: &[u8]) -> Result<DVector<f64>> {
    let mut dec = Decoder {
        bytes,
        pos: 0,
        what: "vector",
    };
    let len = dec.usize()?;
    if len.saturating_mul(8) > bytes.len() {
        return Err(Error::Parse(format!("vector: length {len} exceeds payload")));
    }
    let mut values = Vec::with_capacity(len);
    for _ in 0..len {
        values.push(dec.f64()?);
    }
    dec.finish()?;
    Ok(DVector::from_vec(values))
}
