//! 8-bit RGB raster images, per-pixel label maps, and their file formats.
//!
//! Images travel as binary PPM (`P6`); grayscale PGM (`P5`) is accepted on
//! read and replicated to RGB. Label maps travel as plain text grids: H lines
//! of W space-separated integers, `-1` marking void/unlabeled pixels.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Label value for void / unlabeled pixels.
pub const VOID: i32 = -1;

/// An 8-bit RGB image stored row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    pixels: Vec<[u8; 3]>,
}

impl RasterImage {
    /// Creates an image filled with a single color. Dimensions must be >= 1.
    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid_input(format!(
                "image dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        Ok(RasterImage {
            width,
            height,
            pixels: vec![color; width * height],
        })
    }

    /// Wraps an existing row-major pixel buffer; its length must be `width * height`.
    pub fn from_pixels(width: usize, height: usize, pixels: Vec<[u8; 3]>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid_input(format!(
                "image dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height {
            return Err(Error::invalid_input(format!(
                "pixel buffer holds {} entries, expected {}",
                pixels.len(),
                width * height
            )));
        }
        Ok(RasterImage {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Longer image dimension; drives the segmentation scale rule.
    pub fn longer_dimension(&self) -> usize {
        self.width.max(self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        debug_assert!(x < self.width && y < self.height);
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, color: [u8; 3]) {
        debug_assert!(x < self.width && y < self.height);
        self.pixels[y * self.width + x] = color;
    }

    pub fn pixels(&self) -> &[[u8; 3]] {
        &self.pixels
    }

    /// Reads a binary PPM (`P6`) or PGM (`P5`, replicated to RGB) file.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let mut header = [0u8; 2];
        reader
            .read_exact(&mut header)
            .map_err(|e| Error::io(path, e))?;
        let channels = match &header {
            b"P6" => 3,
            b"P5" => 1,
            _ => {
                return Err(Error::parse(
                    path,
                    1,
                    "not a binary PPM/PGM file (expected P6 or P5 magic)",
                ))
            }
        };

        let width = read_header_int(&mut reader, path)?;
        let height = read_header_int(&mut reader, path)?;
        let maxval = read_header_int(&mut reader, path)?;
        if width == 0 || height == 0 {
            return Err(Error::parse(path, 1, "image dimensions must be at least 1x1"));
        }
        if maxval == 0 || maxval > 255 {
            return Err(Error::parse(
                path,
                1,
                format!("unsupported maxval {maxval} (only 8-bit images are handled)"),
            ));
        }

        let mut raw = vec![0u8; width * height * channels];
        reader
            .read_exact(&mut raw)
            .map_err(|e| Error::io(path, e))?;
        let pixels = match channels {
            3 => raw.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
            _ => raw.iter().map(|&g| [g, g, g]).collect(),
        };
        RasterImage::from_pixels(width, height, pixels)
    }

    /// Writes the image as binary PPM (`P6`).
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        let io = |e| Error::io(path, e);
        write!(writer, "P6\n{} {}\n255\n", self.width, self.height).map_err(io)?;
        for px in &self.pixels {
            writer.write_all(px).map_err(io)?;
        }
        writer.flush().map_err(io)
    }
}

/// Reads one whitespace-delimited integer from a PNM header, skipping `#` comments.
fn read_header_int(reader: &mut impl BufRead, path: &Path) -> Result<usize> {
    let mut byte = [0u8; 1];
    let mut value: Option<usize> = None;
    loop {
        if reader.read(&mut byte).map_err(|e| Error::io(path, e))? == 0 {
            return Err(Error::parse(path, 1, "truncated header"));
        }
        match byte[0] {
            b'#' => {
                // comment runs to end of line
                loop {
                    if reader.read(&mut byte).map_err(|e| Error::io(path, e))? == 0 {
                        return Err(Error::parse(path, 1, "truncated header"));
                    }
                    if byte[0] == b'\n' {
                        break;
                    }
                }
            }
            b'0'..=b'9' => {
                let digit = (byte[0] - b'0') as usize;
                value = Some(match value {
                    Some(v) => v
                        .checked_mul(10)
                        .and_then(|v| v.checked_add(digit))
                        .ok_or_else(|| Error::parse(path, 1, "header value overflows"))?,
                    None => digit,
                });
            }
            b' ' | b'\t' | b'\r' | b'\n' => {
                // a single whitespace byte terminates a value we already started
                if let Some(v) = value {
                    return Ok(v);
                }
            }
            other => {
                return Err(Error::parse(
                    path,
                    1,
                    format!("unexpected byte 0x{other:02x} in header"),
                ));
            }
        }
    }
}

/// Per-pixel class labels; `-1` is void, everything else must be in `0..class_count`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<i32>,
}

impl LabelMap {
    /// Wraps a row-major label buffer, validating the range `[-1, class_count)`.
    pub fn from_labels(
        width: usize,
        height: usize,
        labels: Vec<i32>,
        class_count: usize,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid_input(format!(
                "label map dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        if labels.len() != width * height {
            return Err(Error::invalid_input(format!(
                "label buffer holds {} entries, expected {}",
                labels.len(),
                width * height
            )));
        }
        if let Some(&bad) = labels
            .iter()
            .find(|&&l| l < VOID || l >= class_count as i32)
        {
            return Err(Error::invalid_input(format!(
                "label {bad} outside [-1, {class_count})"
            )));
        }
        Ok(LabelMap {
            width,
            height,
            labels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> i32 {
        debug_assert!(x < self.width && y < self.height);
        self.labels[y * self.width + x]
    }

    pub fn labels(&self) -> &[i32] {
        &self.labels
    }

    /// Reads a text grid: H lines of W space-separated integers.
    ///
    /// Dimensions are taken from the grid itself; every line must have the
    /// same width, and values must lie in `[-1, class_count)`.
    pub fn read(path: impl AsRef<Path>, class_count: usize) -> Result<Self> {
        let path = path.as_ref();
        let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        let mut labels = Vec::new();
        let mut width = 0usize;
        let mut height = 0usize;
        for (idx, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut row_width = 0usize;
            for token in line.split_whitespace() {
                let value: i32 = token.parse().map_err(|_| {
                    Error::parse(path, idx + 1, format!("bad label token {token:?}"))
                })?;
                if value < VOID || value >= class_count as i32 {
                    return Err(Error::parse(
                        path,
                        idx + 1,
                        format!("label {value} outside [-1, {class_count})"),
                    ));
                }
                labels.push(value);
                row_width += 1;
            }
            if height == 0 {
                width = row_width;
            } else if row_width != width {
                return Err(Error::parse(
                    path,
                    idx + 1,
                    format!("row has {row_width} labels, expected {width}"),
                ));
            }
            height += 1;
        }
        if height == 0 || width == 0 {
            return Err(Error::parse(path, 1, "empty label grid"));
        }
        LabelMap::from_labels(width, height, labels, class_count)
    }

    /// Writes the text-grid form read back by [`LabelMap::read`].
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        let io = |e| Error::io(path, e);
        for row in self.labels.chunks_exact(self.width) {
            let mut line = String::with_capacity(self.width * 3);
            for (i, label) in row.iter().enumerate() {
                if i > 0 {
                    line.push(' ');
                }
                line.push_str(&label.to_string());
            }
            line.push('\n');
            writer.write_all(line.as_bytes()).map_err(io)?;
        }
        writer.flush().map_err(io)
    }
}
