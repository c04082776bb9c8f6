//! Hyperspectral cubes and the `.hsc` container.
//!
//! A cube of `nv × nh` pixels and `b` bands is held as one flat vector in
//! band-sequential order. Within a band, pixels are enumerated column by
//! column, so pixel `(row, col)` has 0-based in-band index `row + col * nv`
//! and the sample of 1-based pixel `i` in 1-based band `k` sits at 1-based
//! position `i + (k - 1) * N` with `N = nv * nh`.
//!
//! The file format is an ASCII header line `HSC1 <nv> <nh> <b>\n` followed by
//! the samples as little-endian `f64` in flat order, with nothing after them.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::ops::Deref;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &str = "HSC1";
const MAX_HEADER_LEN: usize = 96;

/// Maps a 1-based `(pixel, band)` pair to its 1-based flat position.
pub fn flatten_index(pixel: usize, band: usize, n_pixels: usize, n_bands: usize) -> Result<usize> {
    if pixel == 0 || pixel > n_pixels {
        return Err(Error::Index(format!(
            "pixel {pixel} outside [1, {n_pixels}]"
        )));
    }
    if band == 0 || band > n_bands {
        return Err(Error::Index(format!("band {band} outside [1, {n_bands}]")));
    }
    Ok(pixel + (band - 1) * n_pixels)
}

/// Spatial and spectral extent of a cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CubeDims {
    pub nv: usize,
    pub nh: usize,
    pub bands: usize,
}

impl CubeDims {
    pub fn new(nv: usize, nh: usize, bands: usize) -> Result<Self> {
        if nv == 0 || nh == 0 || bands == 0 {
            return Err(Error::dim(format!(
                "cube dimensions must be positive, got {nv}x{nh}x{bands}"
            )));
        }
        Ok(Self { nv, nh, bands })
    }

    #[inline]
    pub fn n_pixels(&self) -> usize {
        self.nv * self.nh
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nv * self.nh * self.bands
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn with_bands(&self, bands: usize) -> Self {
        Self { bands, ..*self }
    }
}

impl std::fmt::Display for CubeDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.nv, self.nh, self.bands)
    }
}

/// A hyperspectral image.
#[derive(Debug, Clone, PartialEq)]
pub struct HsCube {
    data: Vec<f64>,
    dims: CubeDims,
}

impl HsCube {
    pub fn new(data: Vec<f64>, nv: usize, nh: usize, bands: usize) -> Result<Self> {
        Self::from_dims(data, CubeDims::new(nv, nh, bands)?)
    }

    pub fn from_dims(data: Vec<f64>, dims: CubeDims) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::dim(format!(
                "{} samples supplied for a {dims} cube ({} expected)",
                data.len(),
                dims.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("sample {pos} is {}", data[pos])));
        }
        Ok(Self { data, dims })
    }

    pub fn filled(dims: CubeDims, value: f64) -> Self {
        Self {
            data: vec![value; dims.len()],
            dims,
        }
    }

    #[inline]
    pub fn dims(&self) -> CubeDims {
        self.dims
    }

    #[inline]
    pub fn nv(&self) -> usize {
        self.dims.nv
    }

    #[inline]
    pub fn nh(&self) -> usize {
        self.dims.nh
    }

    #[inline]
    pub fn bands(&self) -> usize {
        self.dims.bands
    }

    #[inline]
    pub fn n_pixels(&self) -> usize {
        self.dims.n_pixels()
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Plane of 0-based band `k`, column-major.
    pub fn band(&self, k: usize) -> &[f64] {
        let n = self.n_pixels();
        &self.data[k * n..(k + 1) * n]
    }

    /// Sample at 0-based `(row, col, band)`.
    #[inline]
    pub fn get(&self, row: usize, col: usize, band: usize) -> f64 {
        self.data[band * self.n_pixels() + col * self.dims.nv + row]
    }

    /// Spectrum of 0-based pixel `j` (column-major pixel order).
    pub fn spectrum(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        let n = self.n_pixels();
        (0..self.dims.bands).map(move |k| self.data[j + k * n])
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(
            w,
            "{MAGIC} {} {} {}",
            self.dims.nv, self.dims.nh, self.dims.bands
        )?;
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let header = read_header_line(r)?;
        let header_len = header.len() as u64 + 1;
        let dims = parse_header(&header)?;

        let expected = dims.len().checked_mul(8).ok_or_else(|| Error::Format {
            offset: 0,
            message: format!("cube {dims} is too large"),
        })?;
        let mut payload = Vec::with_capacity(expected);
        r.take(expected as u64).read_to_end(&mut payload)?;
        if payload.len() < expected {
            return Err(Error::Format {
                offset: header_len + payload.len() as u64,
                message: format!(
                    "payload truncated: header declares {} samples ({} bytes), found {} bytes",
                    dims.len(),
                    expected,
                    payload.len()
                ),
            });
        }
        let mut probe = [0u8; 1];
        if r.read(&mut probe)? != 0 {
            return Err(Error::Format {
                offset: header_len + expected as u64,
                message: "trailing bytes after payload".into(),
            });
        }

        let mut data = Vec::with_capacity(dims.len());
        for (i, chunk) in payload.chunks_exact(8).enumerate() {
            let v = f64::from_le_bytes(chunk.try_into().expect("chunk of 8 bytes"));
            if !v.is_finite() {
                return Err(Error::Format {
                    offset: header_len + 8 * i as u64,
                    message: format!("non-finite sample {v}"),
                });
            }
            data.push(v);
        }
        Ok(Self { data, dims })
    }
}

fn read_header_line<R: Read>(r: &mut R) -> Result<String> {
    let mut bytes = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        if r.read(&mut byte)? == 0 {
            return Err(Error::Format {
                offset: bytes.len() as u64,
                message: "end of file inside header".into(),
            });
        }
        if byte[0] == b'\n' {
            break;
        }
        if bytes.len() >= MAX_HEADER_LEN {
            return Err(Error::Format {
                offset: bytes.len() as u64,
                message: "header line too long".into(),
            });
        }
        bytes.push(byte[0]);
    }
    String::from_utf8(bytes).map_err(|e| Error::Format {
        offset: e.utf8_error().valid_up_to() as u64,
        message: "header is not ASCII".into(),
    })
}

fn parse_header(line: &str) -> Result<CubeDims> {
    let fail = |offset: usize, message: String| Error::Format {
        offset: offset as u64,
        message,
    };

    let mut fields = Vec::with_capacity(4);
    let mut offset = 0;
    for token in line.split(' ') {
        fields.push((offset, token));
        offset += token.len() + 1;
    }
    match fields.first() {
        Some((_, m)) if *m == MAGIC => {}
        _ => return Err(fail(0, format!("expected magic {MAGIC:?}, found {line:?}"))),
    }
    if fields.len() != 4 {
        return Err(fail(
            0,
            format!("expected 4 header fields, found {}", fields.len()),
        ));
    }
    let mut dims = [0usize; 3];
    for (slot, (offset, text)) in dims.iter_mut().zip(&fields[1..]) {
        let value: usize = text
            .parse()
            .map_err(|_| fail(*offset, format!("invalid dimension {text:?}")))?;
        if value == 0 {
            return Err(fail(*offset, "dimension must be positive".into()));
        }
        *slot = value;
    }
    Ok(CubeDims {
        nv: dims[0],
        nh: dims[1],
        bands: dims[2],
    })
}

/// A guide observation (PAN when `bands() == 1`, otherwise MS).
#[derive(Debug, Clone, PartialEq)]
pub struct GuideImage(HsCube);

impl GuideImage {
    pub fn new(data: Vec<f64>, nv: usize, nh: usize, bands: usize) -> Result<Self> {
        HsCube::new(data, nv, nh, bands).map(Self)
    }

    pub fn as_cube(&self) -> &HsCube {
        &self.0
    }

    pub fn into_cube(self) -> HsCube {
        self.0
    }
}

impl From<HsCube> for GuideImage {
    fn from(cube: HsCube) -> Self {
        Self(cube)
    }
}

impl Deref for GuideImage {
    type Target = HsCube;

    fn deref(&self) -> &HsCube {
        &self.0
    }
}

/// Row-major interleaved RGB buffer with channels clamped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbComposite {
    pub height: usize,
    pub width: usize,
    pub data: Vec<[f64; 3]>,
}

impl RgbComposite {
    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        self.data[row * self.width + col]
    }
}

/// Builds a false-color composite from three 1-based band indices.
pub fn rgb_composite(
    cube: &HsCube,
    r_band: usize,
    g_band: usize,
    b_band: usize,
) -> Result<RgbComposite> {
    let b = cube.bands();
    for (name, k) in [("red", r_band), ("green", g_band), ("blue", b_band)] {
        if k == 0 || k > b {
            return Err(Error::Index(format!("{name} band {k} outside [1, {b}]")));
        }
    }
    let (nv, nh) = (cube.nv(), cube.nh());
    let mut data = Vec::with_capacity(nv * nh);
    for row in 0..nv {
        for col in 0..nh {
            let px = [r_band, g_band, b_band].map(|k| cube.get(row, col, k - 1).clamp(0.0, 1.0));
            data.push(px);
        }
    }
    Ok(RgbComposite {
        height: nv,
        width: nh,
        data,
    })
}
