use std::f64::consts::PI;

use super::PosBiasError;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bandwidth {
    /// Silverman's rule of thumb.
    Auto,
    Fixed(f64),
}

impl std::str::FromStr for Bandwidth {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Bandwidth::Auto);
        }
        s.parse::<f64>()
            .map(Bandwidth::Fixed)
            .map_err(|_| format!("bandwidth must be `auto` or a number, got `{s}`"))
    }
}

/// `1.06 · σ̂ · N^(−1/5)` with the unbiased sample deviation. When the
/// samples have no spread (or there is only one) σ̂ is taken as 1.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64, PosBiasError> {
    let n = samples.len();
    if n == 0 {
        return Err(PosBiasError::NoSamples);
    }
    let mut sigma = 1.0;
    if n > 1 {
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        if var > 0.0 {
            sigma = var.sqrt();
        }
    }
    Ok(1.06 * sigma * (n as f64).powf(-0.2))
}

/// Gaussian kernel density estimate evaluated at each grid point. Returns the
/// densities and the bandwidth used.
///
/// ```
/// use posasc::posbias::{kde, Bandwidth};
/// let (d, _) = kde(&[0.0], Bandwidth::Fixed(1.0), &[0.0]).unwrap();
/// assert!((d[0] - 0.3989422804014327).abs() < 1e-12);
/// ```
pub fn kde(samples: &[f64], bandwidth: Bandwidth, grid: &[f64]) -> Result<(Vec<f64>, f64), PosBiasError> {
    if samples.is_empty() {
        return Err(PosBiasError::NoSamples);
    }
    if grid.is_empty() {
        return Err(PosBiasError::EmptyGrid);
    }
    let h = match bandwidth {
        Bandwidth::Auto => silverman_bandwidth(samples)?,
        Bandwidth::Fixed(h) if h > 0.0 && h.is_finite() => h,
        Bandwidth::Fixed(h) => return Err(PosBiasError::Bandwidth(h)),
    };
    let norm = 1.0 / (samples.len() as f64 * h * (2.0 * PI).sqrt());
    let dens = grid
        .iter()
        .map(|&x| {
            samples
                .iter()
                .map(|&s| (-0.5 * ((x - s) / h).powi(2)).exp())
                .sum::<f64>()
                * norm
        })
        .collect();
    Ok((dens, h))
}

/// `points` evenly spaced values from `lo` to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (points - 1) as f64;
            (0..points).map(|i| lo + step * i as f64).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
        xs.windows(2)
            .zip(ys.windows(2))
            .map(|(x, y)| (x[1] - x[0]) * (y[0] + y[1]) / 2.0)
            .sum()
    }

    #[test]
    fn single_kernel_peak() {
        let (d, h) = kde(&[0.0], Bandwidth::Fixed(1.0), &[0.0, 1.0]).unwrap();
        assert_eq!(h, 1.0);
        assert!((d[0] - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-12);
        assert!((d[1] - (-0.5f64).exp() / (2.0 * PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert!(matches!(kde(&[], Bandwidth::Auto, &[0.0]), Err(PosBiasError::NoSamples)));
        assert!(matches!(kde(&[0.1], Bandwidth::Fixed(0.0), &[0.0]), Err(PosBiasError::Bandwidth(_))));
        assert!(matches!(kde(&[0.1], Bandwidth::Fixed(-1.0), &[0.0]), Err(PosBiasError::Bandwidth(_))));
        assert!(matches!(kde(&[0.1], Bandwidth::Auto, &[]), Err(PosBiasError::EmptyGrid)));
    }

    #[test]
    fn silverman_value() {
        let s = [0.0, 1.0];
        // σ̂ = √0.5
        let expect = 1.06 * 0.5f64.sqrt() * 2f64.powf(-0.2);
        assert!((silverman_bandwidth(&s).unwrap() - expect).abs() < 1e-15);
        assert!(silverman_bandwidth(&[0.3, 0.3]).unwrap() > 0.0);
    }

    proptest! {
        #[test]
        fn integrates_to_one(samples in prop::collection::vec(0.0f64..1.0, 1..60)) {
            let (_, h) = kde(&samples, Bandwidth::Auto, &[0.0]).unwrap();
            let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min) - 5.0 * h;
            let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 5.0 * h;
            let grid = uniform_grid(lo, hi, 2001);
            let (d, _) = kde(&samples, Bandwidth::Auto, &grid).unwrap();
            prop_assert!(d.iter().all(|&v| v >= 0.0));
            prop_assert!((trapezoid(&grid, &d) - 1.0).abs() < 0.01);
        }
    }
}
