//! Gabor filter bank, simple-cell responses and complex-cell amplitudes.
//!
//! Each channel is a wave vector `k = |k| (cos θ, sin θ)` (x to the right, y
//! down, inverse pixels) with an even/odd kernel pair
//!
//! ```text
//! even(r) = |k|² exp(-|k|²|r|²/2σ²) (cos(k·r) - exp(-σ²/2))
//! odd(r)  = |k|² exp(-|k|²|r|²/2σ²)  sin(k·r)
//! ```
//!
//! sampled on the integer offsets of a square support. The `|k|²` prefactor
//! flattens the 1/|k|² power spectrum of natural images, and the DC term makes
//! the even kernel blind to the absolute illumination level. Responses are
//! correlations of the image with the kernels centered at a node; the jet
//! component of a channel is the amplitude `sqrt(even² + odd²)`.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::imageio::GrayImage;
use crate::numfmt::sig17;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankParams {
    /// Radial frequencies in inverse pixels, highest first.
    pub wavenumbers: Vec<f64>,
    /// Wave-vector angles in radians.
    pub orientations: Vec<f64>,
    /// Envelope width in units of the carrier wavelength over 2π.
    pub sigma: f64,
    /// Envelope cutoff as a fraction of its peak.
    pub truncation: f64,
}

impl Default for BankParams {
    /// Three octave-spaced wavenumbers starting at half Nyquist, six
    /// orientations 30° apart, σ = π, support cut at 1e-3 of peak.
    fn default() -> Self {
        Self {
            wavenumbers: vec![PI / 2.0, PI / 4.0, PI / 8.0],
            orientations: (0..6).map(|i| i as f64 * PI / 6.0).collect(),
            sigma: PI,
            truncation: 1e-3,
        }
    }
}

impl BankParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidBank(m));
        if self.wavenumbers.is_empty() || self.orientations.is_empty() {
            return bad("need at least one wavenumber and one orientation".into());
        }
        if let Some(k) = self.wavenumbers.iter().find(|k| !(k.is_finite() && **k > 0.0 && **k <= PI)) {
            return bad(format!("wavenumber {k} outside (0, π]"));
        }
        if let Some(t) = self.orientations.iter().find(|t| !(t.is_finite() && (0.0..PI).contains(*t))) {
            return bad(format!("orientation {t} outside [0, π)"));
        }
        if self.orientations.windows(2).any(|w| w[1] <= w[0]) {
            return bad("orientations must be strictly increasing".into());
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return bad(format!("sigma {} must be positive", self.sigma));
        }
        if !(self.truncation > 0.0 && self.truncation < 1.0) {
            return bad(format!("truncation {} outside (0, 1)", self.truncation));
        }
        Ok(())
    }

    pub fn channels(&self) -> usize {
        self.wavenumbers.len() * self.orientations.len()
    }

    /// Smallest integer radius at which the envelope drops below the cutoff.
    pub fn radius_for(&self, wavenumber: f64) -> usize {
        let envelope = |r: f64| (-(wavenumber * r).powi(2) / (2.0 * self.sigma * self.sigma)).exp();
        let guess = (self.sigma / wavenumber) * (2.0 * (1.0 / self.truncation).ln()).sqrt();
        let mut r = guess.floor().max(0.0) as usize;
        while r > 0 && envelope((r - 1) as f64) < self.truncation {
            r -= 1;
        }
        while envelope(r as f64) >= self.truncation {
            r += 1;
        }
        r
    }
}

/// Even/odd kernel pair of one channel. Taps are stored row-major over the
/// `(2 radius + 1)²` square centered on the node.
#[derive(Debug, Clone, PartialEq)]
pub struct GaborKernel {
    wavenumber: f64,
    orientation: f64,
    k_vec: [f64; 2],
    radius: usize,
    even: Vec<f64>,
    odd: Vec<f64>,
}

impl GaborKernel {
    fn build(wavenumber: f64, orientation: f64, params: &BankParams) -> Self {
        let radius = params.radius_for(wavenumber);
        let side = 2 * radius + 1;
        let r = radius as i64;
        let k_vec = [wavenumber * orientation.cos(), wavenumber * orientation.sin()];
        let k2 = wavenumber * wavenumber;
        let dc = (-params.sigma * params.sigma / 2.0).exp();
        let inv = 1.0 / (2.0 * params.sigma * params.sigma);

        let mut even = vec![0.0; side * side];
        let mut odd = vec![0.0; side * side];
        let idx = |dx: i64, dy: i64| ((dy + r) as usize) * side + (dx + r) as usize;
        for dy in -r..=r {
            for dx in -r..=r {
                let (x, y) = (dx as f64, dy as f64);
                let envelope = k2 * (-k2 * (x * x + y * y) * inv).exp();
                let phase = k_vec[0] * x + k_vec[1] * y;
                even[idx(dx, dy)] = envelope * (phase.cos() - dc);
                // fill one half and mirror so odd symmetry is exact
                if (dy, dx) > (0, 0) {
                    let v = envelope * phase.sin();
                    odd[idx(dx, dy)] = v;
                    odd[idx(-dx, -dy)] = -v;
                }
            }
        }
        zero_sum(&mut even, side * side / 2);
        Self { wavenumber, orientation, k_vec, radius, even, odd }
    }

    pub fn wavenumber(&self) -> f64 {
        self.wavenumber
    }

    pub fn orientation(&self) -> f64 {
        self.orientation
    }

    pub fn k_vec(&self) -> [f64; 2] {
        self.k_vec
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Width of the square support.
    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn even_taps(&self) -> &[f64] {
        &self.even
    }

    pub fn odd_taps(&self) -> &[f64] {
        &self.odd
    }

    /// Tap pair at offset `(dx, dy)` from the center.
    pub fn tap(&self, dx: i64, dy: i64) -> (f64, f64) {
        let r = self.radius as i64;
        assert!(dx.abs() <= r && dy.abs() <= r, "offset ({dx}, {dy}) outside radius {r}");
        let i = ((dy + r) as usize) * self.side() + (dx + r) as usize;
        (self.even[i], self.odd[i])
    }

    /// Even/odd response centered on integer pixel `(x, y)`. The caller
    /// guarantees the support is inside the image.
    fn respond_at(&self, img: &GrayImage, x: usize, y: usize) -> (f64, f64) {
        let (r, side, w) = (self.radius, self.side(), img.width());
        let pixels = img.pixels();
        // both tap sets sum to zero, so offsetting by the center pixel leaves
        // the response unchanged and a flat support gives exactly 0
        let center = pixels[y * w + x];
        let (mut e, mut o) = (0.0, 0.0);
        for row in 0..side {
            let start = (y + row - r) * w + x - r;
            let px = &pixels[start..start + side];
            let ke = &self.even[row * side..(row + 1) * side];
            let ko = &self.odd[row * side..(row + 1) * side];
            for ((p, a), b) in px.iter().zip(ke).zip(ko) {
                let d = p - center;
                e += a * d;
                o += b * d;
            }
        }
        (e, o)
    }

    fn fits(&self, img: &GrayImage, x: i64, y: i64) -> bool {
        let r = self.radius as i64;
        x - r >= 0 && y - r >= 0 && x + r < img.width() as i64 && y + r < img.height() as i64
    }
}

/// Shifts `taps` by their mean, then rounds them onto a common power-of-two grid
/// fine enough that every partial sum is exact, and puts the leftover on the
/// center tap. The sum is then exactly zero in any summation order.
fn zero_sum(taps: &mut [f64], center: usize) {
    let mean = taps.iter().sum::<f64>() / taps.len() as f64;
    taps.iter_mut().for_each(|t| *t -= mean);
    let max = taps.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    if max == 0.0 {
        return;
    }
    let exp = (max * taps.len() as f64).log2().ceil() as i32 - 52;
    let quantum = 2f64.powi(exp);
    let mut units: Vec<i64> = taps.iter().map(|t| (t / quantum).round() as i64).collect();
    let residual: i64 = units.iter().sum();
    units[center] -= residual;
    for (t, u) in taps.iter_mut().zip(units) {
        *t = u as f64 * quantum;
    }
}

/// Immutable set of kernels, one per (wavenumber, orientation) channel,
/// ordered wavenumber-major in the order of the parameters.
#[derive(Debug, Clone)]
pub struct FilterBank {
    params: BankParams,
    kernels: Vec<GaborKernel>,
}

impl FilterBank {
    pub fn new(params: &BankParams) -> Result<Self> {
        params.validate()?;
        let kernels = params
            .wavenumbers
            .iter()
            .flat_map(|&k| params.orientations.iter().map(move |&t| (k, t)))
            .map(|(k, t)| GaborKernel::build(k, t, params))
            .collect();
        Ok(Self { params: params.clone(), kernels })
    }

    pub fn params(&self) -> &BankParams {
        &self.params
    }

    pub fn channels(&self) -> usize {
        self.kernels.len()
    }

    pub fn kernels(&self) -> &[GaborKernel] {
        &self.kernels
    }

    pub fn kernel(&self, channel: usize) -> Result<&GaborKernel> {
        self.kernels
            .get(channel)
            .ok_or(Error::ChannelOutOfRange { channel, channels: self.kernels.len() })
    }

    pub fn max_radius(&self) -> usize {
        self.kernels.iter().map(|k| k.radius).max().unwrap_or(0)
    }

    /// Every tap of every kernel as CSV: one row per (channel, phase).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("channel,phase,wavenumber,orientation,radius,taps\n");
        for (c, k) in self.kernels.iter().enumerate() {
            for (phase, taps) in [("even", &k.even), ("odd", &k.odd)] {
                let mut row = format!("{c},{phase},{},{},{}", sig17(k.wavenumber), sig17(k.orientation), k.radius);
                for t in taps.iter() {
                    row.push(',');
                    row.push_str(&sig17(*t));
                }
                out.push_str(&row);
                out.push('\n');
            }
        }
        out
    }
}

/// Even and odd responses of `kernel` at `pos = (x, y)`. Fractional positions
/// are bilinear interpolations of the responses at the surrounding pixels.
pub fn respond(img: &GrayImage, kernel: &GaborKernel, pos: (f64, f64)) -> Result<(f64, f64)> {
    let (x, y) = pos;
    let oob = || Error::OutOfBounds { x, y, radius: kernel.radius, width: img.width(), height: img.height() };
    if !(x.is_finite() && y.is_finite()) {
        return Err(oob());
    }
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let (x0, y0) = (x0 as i64, y0 as i64);
    let corners = [
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x0 + 1, y0, fx * (1.0 - fy)),
        (x0, y0 + 1, (1.0 - fx) * fy),
        (x0 + 1, y0 + 1, fx * fy),
    ];
    if fx == 0.0 && fy == 0.0 {
        if !kernel.fits(img, x0, y0) {
            return Err(oob());
        }
        return Ok(kernel.respond_at(img, x0 as usize, y0 as usize));
    }
    let (mut e, mut o) = (0.0, 0.0);
    for (cx, cy, w) in corners {
        if w == 0.0 {
            continue;
        }
        if !kernel.fits(img, cx, cy) {
            return Err(oob());
        }
        let (ce, co) = kernel.respond_at(img, cx as usize, cy as usize);
        e += w * ce;
        o += w * co;
    }
    Ok((e, o))
}

/// Even/odd responses of every channel at `pos`, in bank order.
pub fn linear_responses(img: &GrayImage, bank: &FilterBank, pos: (f64, f64)) -> Result<Vec<(f64, f64)>> {
    bank.kernels.iter().map(|k| respond(img, k, pos)).collect()
}

/// Complex-cell amplitudes at one node, one per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Jet(Vec<f64>);

impl Jet {
    pub fn new(amplitudes: Vec<f64>) -> Result<Self> {
        if amplitudes.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(Error::InvalidArgument("jet components must be finite and nonnegative".into()));
        }
        Ok(Self(amplitudes))
    }

    pub fn from_responses(responses: &[(f64, f64)]) -> Self {
        Self(responses.iter().map(|&(e, o)| (e * e + o * o).sqrt()).collect())
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

pub fn jet(img: &GrayImage, bank: &FilterBank, pos: (f64, f64)) -> Result<Jet> {
    Ok(Jet::from_responses(&linear_responses(img, bank, pos)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Direct,
    #[default]
    Fft,
}

/// Dense response of one channel over the interior pixels, i.e. those whose
/// whole support lies inside the image. Pixel `(i, j)` of the maps corresponds
/// to image pixel `(i + radius, j + radius)`.
#[derive(Debug, Clone)]
pub struct Transform {
    pub radius: usize,
    pub width: usize,
    pub height: usize,
    pub even: Vec<f64>,
    pub odd: Vec<f64>,
}

impl Transform {
    /// Real part of the complex response (the even filter).
    pub fn real_part(&self) -> &[f64] {
        &self.even
    }

    pub fn amplitude(&self) -> Vec<f64> {
        self.even.iter().zip(&self.odd).map(|(e, o)| (e * e + o * o).sqrt()).collect()
    }

    /// Value at image coordinates, if interior.
    pub fn at_image(&self, x: usize, y: usize) -> Option<(f64, f64)> {
        let (i, j) = (x.checked_sub(self.radius)?, y.checked_sub(self.radius)?);
        (i < self.width && j < self.height).then(|| (self.even[j * self.width + i], self.odd[j * self.width + i]))
    }
}

pub fn full_transform(img: &GrayImage, bank: &FilterBank, channel: usize, backend: Backend) -> Result<Transform> {
    let kernel = bank.kernel(channel)?;
    let r = kernel.radius;
    let (w, h) = (img.width(), img.height());
    if w < 2 * r + 1 || h < 2 * r + 1 {
        return Err(Error::InvalidImage(format!(
            "{w}x{h} image has no interior pixels for kernel radius {r}"
        )));
    }
    let (iw, ih) = (w - 2 * r, h - 2 * r);
    let (even, odd) = match backend {
        Backend::Direct => {
            let mut even = Vec::with_capacity(iw * ih);
            let mut odd = Vec::with_capacity(iw * ih);
            for y in r..h - r {
                for x in r..w - r {
                    let (e, o) = kernel.respond_at(img, x, y);
                    even.push(e);
                    odd.push(o);
                }
            }
            (even, odd)
        }
        Backend::Fft => fft_correlate(img, kernel),
    };
    Ok(Transform { radius: r, width: iw, height: ih, even, odd })
}

/// Circular correlation with the complex kernel `even + i odd` at image size.
/// Interior outputs never touch the wrap-around, so they equal the direct sums.
fn fft_correlate(img: &GrayImage, kernel: &GaborKernel) -> (Vec<f64>, Vec<f64>) {
    let (w, h) = (img.width(), img.height());
    let r = kernel.radius as i64;
    let mut planner = FftPlanner::<f64>::new();
    let fwd = (planner.plan_fft_forward(w), planner.plan_fft_forward(h));
    let inv = (planner.plan_fft_inverse(w), planner.plan_fft_inverse(h));

    let mut image: Vec<Complex64> = img.pixels().iter().map(|&p| Complex64::new(p, 0.0)).collect();
    let mut kern = vec![Complex64::new(0.0, 0.0); w * h];
    for dy in -r..=r {
        for dx in -r..=r {
            let (e, o) = kernel.tap(dx, dy);
            let x = (-dx).rem_euclid(w as i64) as usize;
            let y = (-dy).rem_euclid(h as i64) as usize;
            kern[y * w + x] = Complex64::new(e, o);
        }
    }
    fft2(&mut image, w, h, &fwd.0, &fwd.1);
    fft2(&mut kern, w, h, &fwd.0, &fwd.1);
    image.iter_mut().zip(&kern).for_each(|(a, b)| *a *= b);
    fft2(&mut image, w, h, &inv.0, &inv.1);

    let scale = 1.0 / (w * h) as f64;
    let ru = kernel.radius;
    let mut even = Vec::with_capacity((w - 2 * ru) * (h - 2 * ru));
    let mut odd = Vec::with_capacity(even.capacity());
    for y in ru..h - ru {
        for x in ru..w - ru {
            let v = image[y * w + x] * scale;
            even.push(v.re);
            odd.push(v.im);
        }
    }
    (even, odd)
}

fn fft2(
    data: &mut [Complex64],
    w: usize,
    h: usize,
    rows: &Arc<dyn rustfft::Fft<f64>>,
    cols: &Arc<dyn rustfft::Fft<f64>>,
) {
    rows.process(data);
    let mut column = vec![Complex64::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            column[y] = data[y * w + x];
        }
        cols.process(&mut column);
        for y in 0..h {
            data[y * w + x] = column[y];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bank() -> FilterBank {
        FilterBank::new(&BankParams::default()).unwrap()
    }

    fn textured(w: usize, h: usize) -> GrayImage {
        GrayImage::from_fn(w, h, |x, y| {
            let (x, y) = (x as f64, y as f64);
            0.5 + 0.2 * (0.31 * x + 0.17 * y).sin() + 0.15 * (0.05 * x * y / 7.0).cos() * (0.9 * y).sin()
                + 0.1 * ((x - 40.0).powi(2) + (y - 50.0).powi(2)).sqrt().sin() / 1.5
        })
        .unwrap()
    }

    #[test]
    fn default_bank_shape() {
        let b = bank();
        assert_eq!(b.channels(), 18);
        assert_eq!(b.kernels().len() * 2, 36);
        assert_eq!(b.kernel(0).unwrap().wavenumber(), PI / 2.0);
        assert_eq!(b.kernel(6).unwrap().wavenumber(), PI / 4.0);
        assert_eq!(b.kernel(17).unwrap().orientation(), 5.0 * PI / 6.0);
        assert!(matches!(b.kernel(18), Err(Error::ChannelOutOfRange { .. })));
    }

    #[test]
    fn radius_is_smallest_below_cutoff() {
        // ceil((σ/k) sqrt(2 ln 1000)) with σ/k = 2, 4, 8
        let p = BankParams::default();
        let expected = [8usize, 15, 30];
        for (k, r) in p.wavenumbers.iter().zip(expected) {
            assert_eq!(p.radius_for(*k), r);
            let env = |d: f64| (-(k * d).powi(2) / (2.0 * PI * PI)).exp();
            assert!(env(r as f64) < 1e-3);
            assert!(env(r as f64 - 1.0) >= 1e-3);
        }
        for k in bank().kernels() {
            let (e, _) = k.tap(k.radius() as i64, 0);
            assert!(e.abs() < 1e-3 * k.wavenumber().powi(2) * 1.01);
        }
    }

    #[test]
    fn even_taps_sum_to_exactly_zero() {
        for k in bank().kernels() {
            assert_eq!(k.even_taps().iter().sum::<f64>(), 0.0);
            assert_eq!(k.even_taps().iter().rev().sum::<f64>(), 0.0);
            let l1: f64 = k.odd_taps().iter().map(|t| t.abs()).sum();
            assert!(k.odd_taps().iter().sum::<f64>().abs() <= 1e-12 * l1);
        }
    }

    #[test]
    fn zero_dc_correction_is_tiny() {
        // the shifted taps stay within a hair of the analytic kernel
        let p = BankParams::default();
        let b = bank();
        let k = b.kernel(0).unwrap();
        let dc = (-PI * PI / 2.0).exp();
        let kk = k.wavenumber().powi(2);
        let (e, _) = k.tap(0, 0);
        assert!((e - kk * (1.0 - dc)).abs() < 1e-4 * kk, "{e}");
        assert!(p.truncation > 0.0);
    }

    #[test]
    fn horizontal_odd_kernel_is_antisymmetric_in_x() {
        let b = bank();
        for c in [0, 6, 12] {
            let k = b.kernel(c).unwrap();
            let r = k.radius() as i64;
            for dy in -r..=r {
                for dx in -r..=r {
                    assert_eq!(k.tap(-dx, dy).1, -k.tap(dx, dy).1);
                }
            }
        }
    }

    #[test]
    fn bank_is_reproducible() {
        let a = bank();
        let b = bank();
        for (x, y) in a.kernels().iter().zip(b.kernels()) {
            assert_eq!(x, y);
        }
        assert_eq!(a.to_csv(), b.to_csv());
    }

    #[test]
    fn rejects_invalid_params() {
        let mut p = BankParams::default();
        p.wavenumbers[0] = 4.0;
        assert!(FilterBank::new(&p).is_err());
        let mut p = BankParams::default();
        p.orientations.swap(0, 1);
        assert!(FilterBank::new(&p).is_err());
        let mut p = BankParams::default();
        p.sigma = 0.0;
        assert!(FilterBank::new(&p).is_err());
        let mut p = BankParams::default();
        p.orientations.push(PI);
        assert!(FilterBank::new(&p).is_err());
    }

    #[test]
    fn constant_image_gives_zero_response_and_jet() {
        let b = bank();
        for c in [0.0, 0.3, 1.0] {
            let img = GrayImage::constant(80, 80, c).unwrap();
            let j = jet(&img, &b, (40.0, 40.0)).unwrap();
            assert!(j.amplitudes().iter().all(|a| *a == 0.0), "{:?}", j);
        }
    }

    #[test]
    fn illumination_and_contrast() {
        let b = bank();
        let img = textured(96, 96).map(|p| 0.1 + 0.6 * p).unwrap();
        let brighter = img.map(|p| p + 0.25).unwrap();
        let doubled = img.map(|p| p * 1.25).unwrap();
        for k in b.kernels() {
            let (e, o) = respond(&img, k, (48.0, 47.0)).unwrap();
            let (e2, o2) = respond(&brighter, k, (48.0, 47.0)).unwrap();
            let scale = e.abs().max(o.abs()).max(1.0);
            assert!((e - e2).abs() < 1e-12 * scale && (o - o2).abs() < 1e-12 * scale);
            let (e3, o3) = respond(&doubled, k, (48.0, 47.0)).unwrap();
            assert!((1.25 * e - e3).abs() < 1e-12 * scale && (1.25 * o - o3).abs() < 1e-12 * scale);
        }
    }

    #[test]
    fn jet_is_amplitude_of_responses() {
        let b = bank();
        let img = textured(90, 90);
        let pos = (44.0, 45.5);
        let lin = linear_responses(&img, &b, pos).unwrap();
        let j = jet(&img, &b, pos).unwrap();
        for ((e, o), a) in lin.iter().zip(j.amplitudes()) {
            assert_eq!(*a, (e * e + o * o).sqrt());
        }
    }

    #[test]
    fn subpixel_position_interpolates_bilinearly() {
        let b = bank();
        let k = b.kernel(3).unwrap();
        let img = textured(90, 90);
        let at = |x: f64, y: f64| respond(&img, k, (x, y)).unwrap();
        let (a, bb, c, d) = (at(40.0, 41.0), at(41.0, 41.0), at(40.0, 42.0), at(41.0, 42.0));
        let (fx, fy) = (0.25, 0.75);
        let want = (1.0 - fx) * (1.0 - fy) * a.0 + fx * (1.0 - fy) * bb.0 + (1.0 - fx) * fy * c.0 + fx * fy * d.0;
        assert!((at(40.25, 41.75).0 - want).abs() < 1e-12);
        // midway along x only touches two pixels
        let mid = at(40.5, 41.0);
        assert!((mid.1 - 0.5 * (a.1 + bb.1)).abs() < 1e-12);
    }

    #[test]
    fn out_of_bounds_support_is_an_error() {
        let b = bank();
        let img = textured(70, 70);
        let k = b.kernel(12).unwrap(); // radius 30
        assert!(respond(&img, k, (30.0, 30.0)).is_ok());
        assert!(respond(&img, k, (29.0, 30.0)).is_err());
        assert!(respond(&img, k, (39.0, 39.0)).is_ok());
        assert!(respond(&img, k, (39.5, 39.0)).is_err());
        assert!(respond(&img, k, (f64::NAN, 39.0)).is_err());
    }

    #[test]
    fn full_transform_matches_direct_and_jets() {
        let b = bank();
        let img = textured(72, 68);
        for c in [0, 9, 17] {
            let direct = full_transform(&img, &b, c, Backend::Direct).unwrap();
            let fft = full_transform(&img, &b, c, Backend::Fft).unwrap();
            let scale = direct.even.iter().chain(&direct.odd).fold(0.0f64, |m, v| m.max(v.abs()));
            for (a, f) in direct.even.iter().chain(&direct.odd).zip(fft.even.iter().chain(&fft.odd)) {
                assert!((a - f).abs() <= 1e-10 * scale);
            }
            let amp = direct.amplitude();
            let r = direct.radius;
            let j = jet(&img, &b, (35.0, 34.0)).unwrap();
            assert_eq!(amp[(34 - r) * direct.width + (35 - r)], j.amplitudes()[c]);
        }
        assert!(full_transform(&img, &b, 18, Backend::Fft).is_err());
        assert!(full_transform(&GrayImage::constant(40, 40, 0.5).unwrap(), &b, 12, Backend::Fft).is_err());
    }

    #[test]
    fn impulse_response_is_mirrored_kernel() {
        let b = bank();
        let (w, cx, cy) = (48usize, 24usize, 23usize);
        let img = GrayImage::from_fn(w, w, |x, y| if (x, y) == (cx, cy) { 1.0 } else { 0.0 }).unwrap();
        for c in [1, 8] {
            let t = full_transform(&img, &b, c, Backend::Direct).unwrap();
            let k = b.kernel(c).unwrap();
            let amp = t.amplitude();
            let r = k.radius() as i64;
            for j in 0..t.height {
                for i in 0..t.width {
                    let (x, y) = ((i + t.radius) as i64, (j + t.radius) as i64);
                    let (dx, dy) = (cx as i64 - x, cy as i64 - y);
                    let want = if dx.abs() <= r && dy.abs() <= r {
                        let (e, o) = k.tap(dx, dy);
                        (e * e + o * o).sqrt()
                    } else {
                        0.0
                    };
                    assert_eq!(amp[j * t.width + i], want);
                }
            }
        }
    }

    #[test]
    fn kernel_csv_layout() {
        let csv = bank().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 36);
        let first: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(&first[..2], &["0", "even"]);
        assert_eq!(first.len(), 5 + 17 * 17);
        let tap: f64 = first[5 + 17 * 8 + 8].parse().unwrap();
        assert_eq!(tap, bank().kernel(0).unwrap().tap(0, 0).0);
    }
}
