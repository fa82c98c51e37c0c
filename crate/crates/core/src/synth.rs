//! Procedural face-like test images.
//!
//! Real face photographs are not shipped with the crate. These renderings give
//! smooth, structured images with facial layout (oval, hair, brows, eyes, nose,
//! mouth, skin texture) so the pipeline can be exercised end to end, and a
//! two-factor category structure so the nMDS path has something to find.
//! Geometry is analytic, so exact translations and scalings of a face can be
//! rendered directly.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::imageio::GrayImage;
use crate::rng;
use crate::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceParams {
    pub background: f64,
    pub skin: f64,
    /// Semi-axes of the face oval, pixels.
    pub face_half_width: f64,
    pub face_half_height: f64,
    pub hair: f64,
    /// Hairline height above the face center; larger means more forehead hair.
    pub hairline: f64,
    /// Lowest extent of the hair at the sides of the face.
    pub hair_length: f64,
    pub eye_spacing: f64,
    pub eye_height: f64,
    pub eye_width: f64,
    pub eye_opening: f64,
    pub eye_dark: f64,
    pub brow_gap: f64,
    pub brow_thickness: f64,
    pub brow_dark: f64,
    pub nose_length: f64,
    pub nose_width: f64,
    pub mouth_height: f64,
    pub mouth_width: f64,
    pub mouth_dark: f64,
    pub jaw: f64,
    /// Amplitude and seed of the low-frequency skin texture.
    pub texture: f64,
    pub texture_seed: u64,
    /// Face scale about `anchor`, then shift, both in pixels.
    pub scale: f64,
    pub anchor: (f64, f64),
    pub shift: (f64, f64),
}

impl Default for FaceParams {
    fn default() -> Self {
        Self {
            background: 0.75,
            skin: 0.62,
            face_half_width: 34.0,
            face_half_height: 44.0,
            hair: 0.18,
            hairline: 26.0,
            hair_length: -6.0,
            eye_spacing: 26.0,
            eye_height: -8.0,
            eye_width: 6.0,
            eye_opening: 2.6,
            eye_dark: 0.22,
            brow_gap: 7.0,
            brow_thickness: 1.6,
            brow_dark: 0.3,
            nose_length: 16.0,
            nose_width: 4.0,
            mouth_height: 20.0,
            mouth_width: 11.0,
            mouth_dark: 0.35,
            jaw: 0.8,
            texture: 0.03,
            texture_seed: 1,
            scale: 1.0,
            anchor: (62.0, 62.0),
            shift: (0.0, 0.0),
        }
    }
}

impl FaceParams {
    /// A random face from one of four categories (`category % 4`), a 2×2
    /// design over two independent appearance factors.
    pub fn sample(seed: u64, category: usize) -> Self {
        let mut r = rng::seeded(seed);
        let mut j = |spread: f64| r.random_range(-spread..=spread);
        let first = category & 1 == 1;
        let second = category & 2 == 2;
        let mut p = FaceParams::default();
        // first factor: face shape, brows, hair length
        p.face_half_width = if first { 31.0 } else { 36.0 } + j(1.5);
        p.face_half_height = if first { 45.0 } else { 43.0 } + j(1.5);
        p.brow_thickness = if first { 1.2 } else { 2.2 } + j(0.3);
        p.brow_dark = if first { 0.38 } else { 0.25 } + j(0.04);
        p.hair_length = if first { 28.0 } else { -6.0 } + j(3.0);
        p.jaw = if first { 0.6 } else { 0.95 } + j(0.08);
        p.mouth_dark = if first { 0.3 } else { 0.4 } + j(0.04);
        // second factor: tone, eye shape, nose
        p.skin = if second { 0.55 } else { 0.68 } + j(0.03);
        p.hair = if second { 0.1 } else { 0.25 } + j(0.04);
        p.eye_opening = if second { 1.8 } else { 3.0 } + j(0.25);
        p.eye_width = if second { 6.8 } else { 5.6 } + j(0.4);
        p.nose_width = if second { 5.0 } else { 3.6 } + j(0.4);
        p.brow_gap = if second { 8.5 } else { 6.5 } + j(0.6);
        // individual variation
        p.eye_spacing += j(2.0);
        p.eye_height += j(1.5);
        p.nose_length += j(1.5);
        p.mouth_height += j(1.5);
        p.mouth_width += j(1.5);
        p.hairline += j(2.0);
        p.texture_seed = r.random();
        p
    }

    pub fn scaled(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn shifted(mut self, dx: f64, dy: f64) -> Self {
        self.shift = (dx, dy);
        self
    }
}

fn smoothstep(edge: f64, x: f64, width: f64) -> f64 {
    // 1 well inside (x << edge), 0 outside
    1.0 / (1.0 + ((x - edge) / width).exp())
}

fn blob(x: f64, y: f64, sx: f64, sy: f64) -> f64 {
    (-(x * x) / (2.0 * sx * sx) - (y * y) / (2.0 * sy * sy)).exp()
}

/// Renders `params` into a `width`×`height` image.
pub fn render(params: &FaceParams, width: usize, height: usize) -> Result<GrayImage> {
    let p = params;
    let waves: Vec<(f64, f64, f64, f64)> = {
        let mut r = rng::seeded(p.texture_seed);
        (0..14)
            .map(|_| {
                let wavelength: f64 = r.random_range(5.0..28.0);
                let angle: f64 = r.random_range(0.0..std::f64::consts::TAU);
                let phase: f64 = r.random_range(0.0..std::f64::consts::TAU);
                let amp: f64 = r.random_range(0.4..1.0);
                let k = std::f64::consts::TAU / wavelength;
                (k * angle.cos(), k * angle.sin(), phase, amp)
            })
            .collect()
    };
    let (ax, ay) = p.anchor;
    GrayImage::from_fn(width, height, |px, py| {
        // canonical face coordinates, origin at the face center
        let x = (px as f64 - ax - p.shift.0) / p.scale;
        let y = (py as f64 - ay - p.shift.1) / p.scale;

        // the jaw narrows the lower half of the oval
        let half_w = if y > 0.0 { p.face_half_width * (1.0 - (1.0 - p.jaw) * (y / p.face_half_height).powi(2)) } else { p.face_half_width };
        let oval = ((x / half_w).powi(2) + (y / p.face_half_height).powi(2)).sqrt();
        let face = smoothstep(1.0, oval, 0.025);

        let texture: f64 = waves.iter().map(|(kx, ky, ph, a)| a * (kx * x + ky * y + ph).sin()).sum::<f64>() / 7.0;
        let mut v = p.skin + p.texture * texture;

        // soft shading toward the face edge and a brighter nose ridge
        v -= 0.08 * oval.powi(4).min(1.0);
        v += 0.05 * blob(x, y - (p.eye_height + p.nose_length * 0.45), p.nose_width * 0.7, p.nose_length * 0.5);

        for side in [-1.0, 1.0] {
            let ex = x - side * p.eye_spacing / 2.0;
            let ey = y - p.eye_height;
            v -= p.eye_dark * blob(ex, ey, p.eye_width / 1.6, p.eye_opening / 1.4);
            v -= 0.1 * blob(ex, ey, p.eye_width * 1.1, p.eye_opening * 1.6);
            let by = y - (p.eye_height - p.brow_gap);
            v -= p.brow_dark * blob(ex, by + 0.04 * ex * ex / p.eye_width, p.eye_width * 1.15, p.brow_thickness);
            // nostrils
            v -= 0.12 * blob(x - side * p.nose_width, y - (p.eye_height + p.nose_length), 1.6, 1.2);
        }
        let my = y - p.mouth_height;
        v -= p.mouth_dark * blob(x, my - 0.02 * x * x / p.mouth_width, p.mouth_width / 1.7, 1.7);

        let mut pixel = face * v + (1.0 - face) * p.background;

        // hair: a cap above the hairline that extends down the sides
        let cap = smoothstep(0.0, y + p.hairline + 0.15 * x * x / p.face_half_width, 1.5);
        let sides = smoothstep(0.0, p.face_half_width * 0.82 - x.abs(), 1.5) * smoothstep(p.hair_length, y, 3.0);
        let head = smoothstep(1.12, ((x / (p.face_half_width * 1.12)).powi(2) + ((y + 6.0) / (p.face_half_height * 1.05)).powi(2)).sqrt(), 0.03);
        let hair = (cap.max(sides) * head).clamp(0.0, 1.0);
        pixel = hair * (p.hair + 0.5 * p.texture * texture) + (1.0 - hair) * pixel;

        pixel.clamp(0.0, 1.0)
    })
}

/// `n` faces cycling through the four categories, ids `c<category>_<k>`.
pub fn face_set(n: usize, seed: u64, size: usize) -> Result<Vec<(String, GrayImage)>> {
    (0..n)
        .map(|i| {
            let cat = i % 4;
            let params = FaceParams::sample(seed.wrapping_mul(1000).wrapping_add(i as u64), cat);
            Ok((format!("c{cat}_{}", i / 4), render(&params, size, size)?))
        })
        .collect()
}
