//! Full-reference quality measures: PSNR, SAM and ERGAS.

use crate::cube::HsCube;
use crate::error::{Error, Result};

fn same_dims(u: &HsCube, truth: &HsCube) -> Result<()> {
    if u.dims() != truth.dims() {
        return Err(Error::dim(format!(
            "estimate is {}, reference is {}",
            u.dims(),
            truth.dims()
        )));
    }
    Ok(())
}

/// `10 log10(NB / ||u - truth||^2)` in dB; `+inf` when the cubes are equal.
pub fn psnr(u: &HsCube, truth: &HsCube) -> Result<f64> {
    same_dims(u, truth)?;
    let sse: f64 = u
        .data()
        .iter()
        .zip(truth.data())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    if sse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (u.data().len() as f64 / sse).log10())
}

/// Per-pixel spectral angles in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct SamResult {
    /// `None` where either spectrum has zero norm.
    pub per_pixel: Vec<Option<f64>>,
    /// Mean over the pixels with a defined angle (0 when there are none).
    pub mean: f64,
    pub excluded: usize,
}

/// Angle between `a` and `b` given their norms, as
/// `2 atan2(|| a |b| - b |a| ||, || a |b| + b |a| ||)`.
///
/// Equal to `arccos(<a, b> / (|a| |b|))` but exact at 0 and accurate near 0
/// and 180 degrees, where the arccos form loses about half the digits.
fn spectral_angle(a: &[f64], na: f64, b: &[f64], nb: f64) -> f64 {
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (p, q) = (x * nb, y * na);
        diff += (p - q) * (p - q);
        sum += (p + q) * (p + q);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

pub fn sam(u: &HsCube, truth: &HsCube) -> Result<SamResult> {
    same_dims(u, truth)?;
    let n = u.n_pixels();
    let mut per_pixel = Vec::with_capacity(n);
    let (mut total, mut valid) = (0.0, 0usize);
    for j in 0..n {
        let a: Vec<f64> = u.spectrum(j).collect();
        let b: Vec<f64> = truth.spectrum(j).collect();
        let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
        let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        if na == 0.0 || nb == 0.0 {
            per_pixel.push(None);
            continue;
        }
        let angle = spectral_angle(&a, na, &b, nb).to_degrees();
        total += angle;
        valid += 1;
        per_pixel.push(Some(angle));
    }
    Ok(SamResult {
        per_pixel,
        mean: if valid > 0 { total / valid as f64 } else { 0.0 },
        excluded: n - valid,
    })
}

/// `||u_b - truth_b||^2 / N` for every band.
pub fn per_band_mse(u: &HsCube, truth: &HsCube) -> Result<Vec<f64>> {
    same_dims(u, truth)?;
    let n = u.n_pixels() as f64;
    Ok((0..u.bands())
        .map(|k| {
            u.band(k)
                .iter()
                .zip(truth.band(k))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / n
        })
        .collect())
}

/// Band-wise squared error divided by the squared band mean of the reference.
pub fn band_normalized_mse(u: &HsCube, truth: &HsCube) -> Result<Vec<f64>> {
    same_dims(u, truth)?;
    let n = u.n_pixels() as f64;
    (0..u.bands())
        .map(|k| {
            let mean = truth.band(k).iter().sum::<f64>() / n;
            if mean == 0.0 {
                return Err(Error::SingularBand { band: k + 1 });
            }
            let sse: f64 = u
                .band(k)
                .iter()
                .zip(truth.band(k))
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            Ok(sse / (mean * mean))
        })
        .collect()
}

/// `(100 / r) sqrt(mean_b ||u_b - truth_b||^2 / mean(truth_b)^2)`.
pub fn ergas(u: &HsCube, truth: &HsCube, ratio: f64) -> Result<f64> {
    if !(ratio > 0.0) || !ratio.is_finite() {
        return Err(Error::param(format!(
            "ERGAS ratio must be positive, got {ratio}"
        )));
    }
    let normalized = band_normalized_mse(u, truth)?;
    let mean = normalized.iter().sum::<f64>() / normalized.len() as f64;
    Ok(100.0 / ratio * mean.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub psnr: f64,
    /// Degrees.
    pub sam_mean: f64,
    pub sam_excluded: usize,
    pub ergas: f64,
    pub per_band_mse: Vec<f64>,
}

pub fn evaluate(u: &HsCube, truth: &HsCube, ratio: f64) -> Result<MetricReport> {
    let s = sam(u, truth)?;
    Ok(MetricReport {
        psnr: psnr(u, truth)?,
        sam_mean: s.mean,
        sam_excluded: s.excluded,
        ergas: ergas(u, truth, ratio)?,
        per_band_mse: per_band_mse(u, truth)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::CubeDims;

    #[test]
    fn psnr_examples() {
        let dims = CubeDims::new(3, 3, 2).unwrap();
        let truth = HsCube::filled(dims, 0.4);
        assert_eq!(psnr(&truth, &truth).unwrap(), f64::INFINITY);
        let off = HsCube::filled(dims, 0.5);
        assert!((psnr(&off, &truth).unwrap() - 20.0).abs() < 1e-9);
    }

    #[test]
    fn sam_examples() {
        let a = HsCube::new(vec![1.0, 0.0], 1, 1, 2).unwrap();
        let b = HsCube::new(vec![0.0, 1.0], 1, 1, 2).unwrap();
        assert!((sam(&a, &b).unwrap().mean - 90.0).abs() < 1e-12);
        assert_eq!(sam(&a, &a).unwrap().mean, 0.0);

        let t = HsCube::new(vec![0.2, 0.5, 0.3, 0.1], 2, 1, 2).unwrap();
        let e = HsCube::new(vec![0.25, 0.45, 0.2, 0.15], 2, 1, 2).unwrap();
        let tripled = HsCube::new(e.data().iter().map(|v| 3.0 * v).collect(), 2, 1, 2).unwrap();
        assert!((sam(&e, &t).unwrap().mean - sam(&tripled, &t).unwrap().mean).abs() < 1e-12);
    }

    #[test]
    fn sam_excludes_zero_spectra() {
        let t = HsCube::new(vec![0.0, 1.0, 0.0, 1.0], 2, 1, 2).unwrap();
        let e = HsCube::new(vec![0.5, 1.0, 0.5, 1.0], 2, 1, 2).unwrap();
        let s = sam(&e, &t).unwrap();
        assert_eq!(s.excluded, 1);
        assert_eq!(s.per_pixel[0], None);
        assert_eq!(s.per_pixel[1], Some(0.0));
    }

    #[test]
    fn ergas_examples() {
        let truth = HsCube::new(vec![0.5; 4], 2, 2, 1).unwrap();
        let u = HsCube::new(vec![0.55; 4], 2, 2, 1).unwrap();
        // band MSE over the squared mean: (4 * 0.0025) / 0.25 = 0.04
        assert!((ergas(&u, &truth, 2.0).unwrap() - 10.0).abs() < 1e-9);
        assert!((ergas(&u, &truth, 4.0).unwrap() - 5.0).abs() < 1e-9);
        assert_eq!(ergas(&truth, &truth, 2.0).unwrap(), 0.0);

        let dark = HsCube::new(vec![0.0, 0.0, 1.0, 1.0], 2, 1, 2).unwrap();
        assert!(matches!(
            ergas(&dark, &dark, 2.0),
            Err(Error::SingularBand { band: 1 })
        ));
    }

    #[test]
    fn mismatched_dims() {
        let a = HsCube::filled(CubeDims::new(2, 2, 2).unwrap(), 0.1);
        let b = HsCube::filled(CubeDims::new(2, 2, 3).unwrap(), 0.1);
        assert!(psnr(&a, &b).is_err());
        assert!(sam(&a, &b).is_err());
        assert!(ergas(&a, &b, 2.0).is_err());
    }
}
