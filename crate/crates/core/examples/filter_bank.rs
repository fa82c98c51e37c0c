//! Builds the default filter bank and prints each channel's kernel geometry
//! and its response to a grating at the channel's own wave vector.

use lac::gabor::{self, BankParams, FilterBank};
use lac::imageio::GrayImage;

fn main() -> lac::Result<()> {
    let bank = FilterBank::new(&BankParams::default())?;
    println!("channel  |k|      theta   radius  even-sum  grating amplitude");
    for (c, k) in bank.kernels().iter().enumerate() {
        let [kx, ky] = k.k_vec();
        let grating = GrayImage::from_fn(96, 96, |x, y| 0.5 + 0.5 * (kx * (x as f64 - 48.0) + ky * (y as f64 - 48.0)).cos())?;
        let amp = gabor::jet(&grating, &bank, (48.0, 48.0))?.amplitudes()[c];
        let sum: f64 = k.even_taps().iter().sum();
        println!(
            "{c:>7}  {:.4}  {:>5.1}°  {:>6}  {sum:>8}  {amp:.4}",
            k.wavenumber(),
            k.orientation().to_degrees(),
            k.radius()
        );
    }
    Ok(())
}
