//! Pixel-space distances and image-quality metrics over videos.

use crate::error::{IseError, Result};
use crate::video::{Frame, Video};

/// PSNR reported for identical videos.
pub const PSNR_CAP_DB: f64 = 100.0;
pub const SSIM_WINDOW: usize = 8;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

fn squared_error_sum(a: &Video, b: &Video) -> Result<f64> {
    a.ensure_same_shape(b)?;
    Ok(a
        .pixels()
        .zip(b.pixels())
        .map(|(x, y)| {
            let d = f64::from(x) - f64::from(y);
            d * d
        })
        .sum())
}

/// Mean squared pixel difference over all `T*H*W` pixels.
pub fn video_mse(a: &Video, b: &Video) -> Result<f64> {
    Ok(squared_error_sum(a, b)? / a.pixel_count() as f64)
}

/// Euclidean norm of the flattened pixel difference.
pub fn pixel_l2(a: &Video, b: &Video) -> Result<f64> {
    Ok(squared_error_sum(a, b)?.sqrt())
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        return PSNR_CAP_DB;
    }
    (10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB)
}

/// Peak signal-to-noise ratio with unit dynamic range, in dB.
pub fn psnr(a: &Video, b: &Video) -> Result<f64> {
    Ok(psnr_from_mse(video_mse(a, b)?))
}

/// Mean SSIM over all 8x8 windows (stride 1) of one frame pair.
pub fn frame_ssim(a: &Frame, b: &Frame) -> Result<f64> {
    if !a.same_shape(b) {
        return Err(IseError::shape("frames differ in shape"));
    }
    let (h, w) = (a.height(), a.width());
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(IseError::shape(format!(
            "frame {h}x{w} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window"
        )));
    }
    let n = (SSIM_WINDOW * SSIM_WINDOW) as f64;
    let (pa, pb) = (a.pixels(), b.pixels());
    let mut total = 0.0;
    let mut windows = 0usize;
    for r0 in 0..=h - SSIM_WINDOW {
        for c0 in 0..=w - SSIM_WINDOW {
            let (mut sa, mut sb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for r in r0..r0 + SSIM_WINDOW {
                let row = r * w;
                for c in c0..c0 + SSIM_WINDOW {
                    let x = f64::from(pa[row + c]);
                    let y = f64::from(pb[row + c]);
                    sa += x;
                    sb += y;
                    saa += x * x;
                    sbb += y * y;
                    sab += x * y;
                }
            }
            let (ma, mb) = (sa / n, sb / n);
            let va = (saa / n - ma * ma).max(0.0);
            let vb = (sbb / n - mb * mb).max(0.0);
            let cov = sab / n - ma * mb;
            let num = (2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2);
            let den = (ma * ma + mb * mb + SSIM_C1) * (va + vb + SSIM_C2);
            total += num / den;
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}

/// SSIM averaged over windows, then over frames.
pub fn ssim(a: &Video, b: &Video) -> Result<f64> {
    a.ensure_same_shape(b)?;
    let mut sum = 0.0;
    for (fa, fb) in a.frames().iter().zip(b.frames()) {
        sum += frame_ssim(fa, fb)?;
    }
    Ok(sum / a.len() as f64)
}
