//! Full-image transforms with both backends, written as PGM maps into a
//! temporary directory.

use lac::gabor::{self, Backend, BankParams, FilterBank};
use lac::imageio::{self, GrayImage};
use lac::synth::{self, FaceParams};

fn main() -> lac::Result<()> {
    let bank = FilterBank::new(&BankParams::default())?;
    let img = synth::render(&FaceParams::sample(3, 2), 128, 128)?;
    let out = std::env::temp_dir().join("lac_transform_render");
    std::fs::create_dir_all(&out).expect("temporary directory is writable");
    for channel in [0, 6, 12] {
        let fft = gabor::full_transform(&img, &bank, channel, Backend::Fft)?;
        let direct = gabor::full_transform(&img, &bank, channel, Backend::Direct)?;
        let max = direct.even.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let diff = fft.even.iter().zip(&direct.even).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let amp = fft.amplitude();
        let top = amp.iter().copied().fold(0.0, f64::max);
        let map = GrayImage::new(fft.width, fft.height, amp.iter().map(|a| a / top).collect())?;
        let path = out.join(format!("channel{channel}_amp.pgm"));
        imageio::save_pgm(&map, &path)?;
        println!("channel {channel}: {}x{} interior, FFT vs direct {:.1e} relative, {}", fft.width, fft.height, diff / max, path.display());
    }
    Ok(())
}
