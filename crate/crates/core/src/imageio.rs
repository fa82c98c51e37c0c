//! Grayscale images in the unit range, plus PGM/PNG I/O.

use std::io::Write;
use std::path::Path;

use image::{DynamicImage, ImageFormat, ImageReader};

use crate::{Error, Result};

/// Row-major luminance image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "{} pixels for a {width}x{height} image",
                pixels.len()
            )));
        }
        if let Some(i) = pixels.iter().position(|p| !(p.is_finite() && (0.0..=1.0).contains(p))) {
            return Err(Error::InvalidImage(format!(
                "pixel ({}, {}) = {} is outside [0, 1]",
                i % width,
                i / width,
                pixels[i]
            )));
        }
        Ok(Self { width, height, pixels })
    }

    /// Builds an image from `f(x, y)`; values must land in `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.pixels.iter().sum::<f64>() / self.pixels.len() as f64
    }

    /// Applies `f` to every pixel; the result must stay in `[0, 1]`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.width, self.height, self.pixels.iter().map(|&p| f(p)).collect())
    }

    /// Pixel values quantized to 256 gray levels.
    pub fn to_gray8(&self) -> Vec<u8> {
        self.pixels.iter().map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8).collect()
    }

    pub fn from_gray8(width: usize, height: usize, levels: &[u8]) -> Result<Self> {
        Self::new(width, height, levels.iter().map(|&l| f64::from(l) / 255.0).collect())
    }
}

/// Loads a PGM/PPM or PNG file. Color pixels are reduced with luminance weights
/// 0.299 R + 0.587 G + 0.114 B; alpha is ignored.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    match reader.format() {
        Some(ImageFormat::Png | ImageFormat::Pnm) => {}
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.into(),
                reason: match other {
                    Some(f) => format!("{f:?} images are not accepted"),
                    None => "unrecognized file signature".into(),
                },
            })
        }
    }
    let decoded = reader.decode().map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::MalformedImage { path: path.into(), reason: other.to_string() },
    })?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::EmptyImage);
    }
    let pixels: Vec<f64> = match decoded {
        DynamicImage::ImageLuma8(b) => b.into_raw().into_iter().map(|l| f64::from(l) / 255.0).collect(),
        DynamicImage::ImageLumaA8(b) => b.pixels().map(|p| f64::from(p.0[0]) / 255.0).collect(),
        DynamicImage::ImageRgb8(b) => b.pixels().map(|p| luminance(p.0[0], p.0[1], p.0[2])).collect(),
        DynamicImage::ImageRgba8(b) => b.pixels().map(|p| luminance(p.0[0], p.0[1], p.0[2])).collect(),
        other => {
            return Err(Error::UnsupportedFormat {
                path: path.into(),
                reason: format!("only 8-bit gray or RGB is accepted, got {:?}", other.color()),
            })
        }
    };
    GrayImage::new(w, h, pixels)
}

fn luminance(r: u8, g: u8, b: u8) -> f64 {
    (0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b)) / 255.0
}

/// Encodes `img` as binary PGM (P5, maxval 255). Each entry of `comments` becomes
/// a `#` header line.
pub fn encode_pgm(img: &GrayImage, comments: &[String]) -> Vec<u8> {
    let mut out = Vec::with_capacity(img.pixels.len() + 64);
    out.extend_from_slice(b"P5\n");
    for c in comments {
        for line in c.lines() {
            out.extend_from_slice(format!("# {line}\n").as_bytes());
        }
    }
    out.extend_from_slice(format!("{} {}\n255\n", img.width, img.height).as_bytes());
    out.extend_from_slice(&img.to_gray8());
    out
}

pub fn save_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_pgm(img, &[])).map_err(|e| Error::io(path, e))
}

/// Block-mean downsampling: every output pixel is the mean of a
/// `factor`×`factor` block.
pub fn downsample(img: &GrayImage, factor: usize) -> Result<GrayImage> {
    if factor == 0 || img.width % factor != 0 || img.height % factor != 0 {
        return Err(Error::NonDivisibleFactor { factor, width: img.width, height: img.height });
    }
    let (w, h) = (img.width / factor, img.height / factor);
    let area = (factor * factor) as f64;
    GrayImage::from_fn(w, h, |x, y| {
        let mut sum = 0.0;
        for yy in y * factor..(y + 1) * factor {
            let row = &img.pixels[yy * img.width..(yy + 1) * img.width];
            sum += row[x * factor..(x + 1) * factor].iter().sum::<f64>();
        }
        // means of values in [0, 1] can round a hair past 1
        (sum / area).min(1.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write_pgm(dir: &Path, name: &str, w: usize, h: usize, levels: &[u8]) -> std::path::PathBuf {
        let p = dir.join(name);
        let img = GrayImage::from_gray8(w, h, levels).unwrap();
        save_pgm(&img, &p).unwrap();
        p
    }

    #[test]
    fn extreme_levels_map_to_unit_range() {
        let dir = tempfile::tempdir().unwrap();
        let white = load_image(write_pgm(dir.path(), "w.pgm", 128, 128, &[255; 128 * 128])).unwrap();
        assert!(white.pixels().iter().all(|&p| p == 1.0));
        let black = load_image(write_pgm(dir.path(), "b.pgm", 128, 128, &[0; 128 * 128])).unwrap();
        assert!(black.pixels().iter().all(|&p| p == 0.0));
    }

    #[test]
    fn rgb_png_uses_luminance_weights() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.png");
        let mut buf = image::RgbImage::new(16, 16);
        buf.put_pixel(10, 10, image::Rgb([100, 150, 200]));
        buf.save(&p).unwrap();
        let img = load_image(&p).unwrap();
        // 29.9 + 88.05 + 22.8 = 140.75
        assert!((img.get(10, 10) - 140.75 / 255.0).abs() < 1e-15);
        assert_eq!(img.get(0, 0), 0.0);
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_image(dir.path().join("missing.pgm")), Err(Error::Io { .. })));
        let junk = dir.path().join("junk.dat");
        std::fs::write(&junk, b"not an image at all").unwrap();
        assert!(matches!(load_image(&junk), Err(Error::UnsupportedFormat { .. })));
        let bad_pgm = dir.path().join("junk.pgm");
        std::fs::write(&bad_pgm, b"not an image at all").unwrap();
        assert!(matches!(load_image(&bad_pgm), Err(Error::MalformedImage { .. })));
        let zero = dir.path().join("zero.pgm");
        std::fs::write(&zero, b"P5\n0 0\n255\n").unwrap();
        assert!(load_image(&zero).is_err());
    }

    #[test]
    fn pgm_comments_are_skipped_on_load() {
        let dir = tempfile::tempdir().unwrap();
        let img = GrayImage::from_gray8(3, 2, &[0, 10, 20, 30, 40, 255]).unwrap();
        let p = dir.path().join("c.pgm");
        std::fs::write(&p, encode_pgm(&img, &["config_hash=abc".into()])).unwrap();
        assert_eq!(load_image(&p).unwrap(), img);
    }

    #[test]
    fn downsample_shapes_and_values() {
        let big = GrayImage::constant(384, 384, 0.25).unwrap();
        let small = downsample(&big, 3).unwrap();
        assert_eq!((small.width(), small.height()), (128, 128));
        assert!(small.pixels().iter().all(|&p| p == 0.25));

        // 4x4 ramp 0..15 scaled by 1/15; block means by hand
        let ramp = GrayImage::from_fn(4, 4, |x, y| (y * 4 + x) as f64 / 15.0).unwrap();
        let d = downsample(&ramp, 2).unwrap();
        let expected = [2.5, 4.5, 10.5, 12.5].map(|v| v / 15.0);
        for (got, want) in d.pixels().iter().zip(expected) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(matches!(downsample(&ramp, 3), Err(Error::NonDivisibleFactor { .. })));
        assert!(downsample(&ramp, 0).is_err());
    }

    #[test]
    fn rejects_bad_pixels() {
        assert!(GrayImage::new(2, 1, vec![0.0, 1.5]).is_err());
        assert!(GrayImage::new(2, 1, vec![0.0, f64::NAN]).is_err());
        assert!(GrayImage::new(2, 2, vec![0.0; 3]).is_err());
        assert!(matches!(GrayImage::new(0, 2, vec![]), Err(Error::EmptyImage)));
    }

    proptest! {
        #[test]
        fn pgm_round_trip_is_bit_exact(w in 1usize..12, h in 1usize..12, seed in any::<u64>()) {
            let levels: Vec<u8> = (0..w * h).map(|i| (seed.wrapping_mul(i as u64 + 1) >> 13) as u8).collect();
            let dir = tempfile::tempdir().unwrap();
            let first = load_image(write_pgm(dir.path(), "a.pgm", w, h, &levels)).unwrap();
            prop_assert_eq!(first.to_gray8(), levels);
            let p2 = dir.path().join("b.pgm");
            save_pgm(&first, &p2).unwrap();
            let second = load_image(&p2).unwrap();
            prop_assert_eq!(first, second);
        }

        #[test]
        fn downsample_preserves_mean(f in 1usize..5, bw in 1usize..6, bh in 1usize..6, seed in any::<u64>()) {
            let (w, h) = (f * bw, f * bh);
            let img = GrayImage::from_fn(w, h, |x, y| {
                ((seed ^ (x as u64 * 31 + y as u64 * 17)).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 11) as f64
                    / (1u64 << 53) as f64
            }).unwrap();
            let d = downsample(&img, f).unwrap();
            prop_assert!((d.mean() - img.mean()).abs() <= 1e-12 * img.mean().max(1e-300));
        }
    }
}
