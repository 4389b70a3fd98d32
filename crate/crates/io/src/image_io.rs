use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, ImageBuffer, ImageFormat, Luma};
use pics_core::{GrayImage, ImageStack, Mask, Scalar};

use crate::error::{IoError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    fn max(self) -> u32 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Pgm,
    Png,
}

fn format_of(path: &Path) -> Result<Format> {
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("pgm") => Ok(Format::Pgm),
        Some("png") => Ok(Format::Png),
        _ => Err(IoError::UnsupportedFormat(path.display().to_string())),
    }
}

/// Raw samples plus the format's maximum value.
struct Raster {
    width: usize,
    height: usize,
    max: u32,
    samples: Vec<u32>,
}

impl Raster {
    fn normalize<T: Scalar>(self) -> Result<GrayImage<T>> {
        let max = self.max as f64;
        let data = self.samples.iter().map(|&v| T::lit(v as f64 / max)).collect();
        Ok(GrayImage::new(self.width, self.height, data)?)
    }
}

/// Load a grayscale PGM (P2 or P5) or PNG (8 or 16 bit) and scale its
/// samples to `[0, 1]` by the format's maximum value.
pub fn load_gray<T: Scalar>(path: impl AsRef<Path>) -> Result<GrayImage<T>> {
    let path = path.as_ref();
    let format = format_of(path)?;
    let bytes = fs::read(path).map_err(|e| IoError::io(path, e))?;
    decode_as(&bytes, format, &path.display().to_string())
}

/// As [`load_gray`] for an in-memory file; the format is sniffed from the
/// leading bytes.
pub fn decode_gray<T: Scalar>(bytes: &[u8], name: &str) -> Result<GrayImage<T>> {
    let format = match bytes.get(..2) {
        Some(b"P2" | b"P5") => Format::Pgm,
        _ if bytes.starts_with(PNG_MAGIC) => Format::Png,
        _ => return Err(IoError::UnsupportedFormat(format!("{name}: not a PGM or PNG file"))),
    };
    decode_as(bytes, format, name)
}

const PNG_MAGIC: &[u8] = b"\x89PNG\r\n\x1a\n";

fn decode_as<T: Scalar>(bytes: &[u8], format: Format, name: &str) -> Result<GrayImage<T>> {
    let raster = match format {
        Format::Pgm => parse_pgm(bytes).map_err(|m| IoError::CorruptFile(format!("{name}: {m}")))?,
        Format::Png => decode_png(bytes, name)?,
    };
    raster.normalize()
}

fn decode_png(bytes: &[u8], name: &str) -> Result<Raster> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| IoError::CorruptFile(format!("{name}: {e}")))?;
    let (width, height) = (img.width() as usize, img.height() as usize);
    match img {
        DynamicImage::ImageLuma8(b) => Ok(Raster {
            width,
            height,
            max: 255,
            samples: b.into_raw().into_iter().map(u32::from).collect(),
        }),
        DynamicImage::ImageLuma16(b) => Ok(Raster {
            width,
            height,
            max: 65535,
            samples: b.into_raw().into_iter().map(u32::from).collect(),
        }),
        other => Err(IoError::UnsupportedFormat(format!(
            "{name}: {:?} is not single-channel grayscale",
            other.color()
        ))),
    }
}

/// Whitespace- and comment-aware reader over a PGM header.
struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn skip_space(&mut self) {
        while let Some(&c) = self.bytes.get(self.pos) {
            if c == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n') {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self) -> Result<u32, String> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(format!("expected a number at byte {start}"));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|e| format!("bad number: {e}"))
    }
}

fn parse_pgm(bytes: &[u8]) -> Result<Raster, String> {
    let binary = match bytes.get(..2) {
        Some(b"P5") => true,
        Some(b"P2") => false,
        _ => return Err("missing P2/P5 magic".into()),
    };
    let mut h = Header { bytes, pos: 2 };
    let width = h.number()? as usize;
    let height = h.number()? as usize;
    let max = h.number()?;
    if width == 0 || height == 0 {
        return Err("zero image dimension".into());
    }
    if max == 0 || max > 65535 {
        return Err(format!("maxval {max} out of range"));
    }
    let n = width * height;
    let mut samples = Vec::with_capacity(n);
    if binary {
        // exactly one whitespace byte separates header and raster
        let start = h.pos + 1;
        let wide = max > 255;
        let need = n * if wide { 2 } else { 1 };
        let body = bytes
            .get(start..start + need)
            .ok_or_else(|| format!("raster truncated: need {need} bytes"))?;
        if wide {
            samples.extend(
                body.chunks_exact(2)
                    .map(|c| u32::from(u16::from_be_bytes([c[0], c[1]]))),
            );
        } else {
            samples.extend(body.iter().map(|&b| u32::from(b)));
        }
    } else {
        for k in 0..n {
            let v = h.number().map_err(|_| format!("raster truncated at sample {k}"))?;
            samples.push(v);
        }
    }
    if let Some(v) = samples.iter().find(|&&v| v > max) {
        return Err(format!("sample {v} exceeds maxval {max}"));
    }
    Ok(Raster {
        width,
        height,
        max,
        samples,
    })
}

fn quantize<T: Scalar>(img: &GrayImage<T>, depth: BitDepth) -> Vec<u32> {
    let max = depth.max() as f64;
    img.pixels()
        .iter()
        .map(|v| (v.to_f64_lossy() * max).round().clamp(0.0, max) as u32)
        .collect()
}

fn write_raster(path: &Path, width: usize, height: usize, samples: &[u32], depth: BitDepth) -> Result<()> {
    let bytes = encode(format_of(path)?, width, height, samples, depth)?;
    fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}

fn encode(format: Format, width: usize, height: usize, samples: &[u32], depth: BitDepth) -> Result<Vec<u8>> {
    Ok(match format {
        Format::Pgm => {
            let mut out = format!("P5\n{width} {height}\n{}\n", depth.max()).into_bytes();
            match depth {
                BitDepth::Eight => out.extend(samples.iter().map(|&v| v as u8)),
                BitDepth::Sixteen => out.extend(samples.iter().flat_map(|&v| (v as u16).to_be_bytes())),
            }
            out
        }
        Format::Png => {
            let (w, h) = (width as u32, height as u32);
            let img = match depth {
                BitDepth::Eight => DynamicImage::ImageLuma8(
                    ImageBuffer::<Luma<u8>, _>::from_raw(w, h, samples.iter().map(|&v| v as u8).collect())
                        .expect("buffer sized from dimensions"),
                ),
                BitDepth::Sixteen => DynamicImage::ImageLuma16(
                    ImageBuffer::<Luma<u16>, _>::from_raw(w, h, samples.iter().map(|&v| v as u16).collect())
                        .expect("buffer sized from dimensions"),
                ),
            };
            let mut buf = std::io::Cursor::new(Vec::new());
            img.write_to(&mut buf, ImageFormat::Png)
                .map_err(|e| IoError::CorruptFile(format!("png encoder: {e}")))?;
            buf.into_inner()
        }
    })
}

fn mask_samples(mask: &Mask) -> Vec<u32> {
    mask.cells().iter().map(|&b| if b { 255 } else { 0 }).collect()
}

/// In-memory 8-bit PNG of a mask, as written by [`save_mask`].
pub fn encode_mask_png(mask: &Mask) -> Result<Vec<u8>> {
    encode(
        Format::Png,
        mask.width(),
        mask.height(),
        &mask_samples(mask),
        BitDepth::Eight,
    )
}

/// Write an image as PGM or PNG (chosen by extension), rounding to the
/// nearest representable level.
pub fn save_gray<T: Scalar>(path: impl AsRef<Path>, image: &GrayImage<T>, depth: BitDepth) -> Result<()> {
    write_raster(
        path.as_ref(),
        image.width(),
        image.height(),
        &quantize(image, depth),
        depth,
    )
}

/// Write a mask as an 8-bit binary image: 0 outside, 255 inside.
pub fn save_mask(path: impl AsRef<Path>, mask: &Mask) -> Result<()> {
    write_raster(
        path.as_ref(),
        mask.width(),
        mask.height(),
        &mask_samples(mask),
        BitDepth::Eight,
    )
}

/// Read a mask: any pixel at or above half intensity is inside.
pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let img: GrayImage<f64> = load_gray(path)?;
    Ok(Mask::from_fn(img.width(), img.height(), |x, y| img.get(x, y) >= 0.5))
}

/// Load the given files in order as one stack.
pub fn load_stack<T: Scalar, P: AsRef<Path>>(paths: &[P]) -> Result<ImageStack<T>> {
    let mut slices: Vec<GrayImage<T>> = Vec::with_capacity(paths.len());
    for p in paths {
        let img = load_gray(p)?;
        if let Some(first) = slices.first() {
            if (first.width(), first.height()) != (img.width(), img.height()) {
                return Err(IoError::DimensionMismatch(format!(
                    "{} is {}x{}, expected {}x{}",
                    p.as_ref().display(),
                    img.width(),
                    img.height(),
                    first.width(),
                    first.height()
                )));
            }
        }
        slices.push(img);
    }
    Ok(ImageStack::new(slices)?)
}

/// Load every `.pgm`/`.png` file in `dir`, ordered by file name.
pub fn load_stack_dir<T: Scalar>(dir: impl AsRef<Path>) -> Result<ImageStack<T>> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| IoError::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && format_of(p).is_ok())
        .collect();
    if paths.is_empty() {
        return Err(IoError::EmptyStack(dir.to_path_buf()));
    }
    paths.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    load_stack(&paths)
}
