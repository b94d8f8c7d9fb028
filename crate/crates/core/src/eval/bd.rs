//! Bjøntegaard deltas from four-or-more-point RD curves: cubic least-squares
//! fits integrated analytically over the shared interval.

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RdPoint {
    /// Bits per pixel.
    pub rate: f64,
    /// dB.
    pub psnr: f64,
}

impl RdPoint {
    pub fn new(rate: f64, psnr: f64) -> Self {
        Self { rate, psnr }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RdCurve {
    points: Vec<RdPoint>,
}

impl RdCurve {
    /// At least four finite points with positive, strictly monotone rates.
    pub fn new(points: Vec<RdPoint>) -> Result<Self> {
        if points.len() < 4 {
            return Err(Error::TooFewPoints(points.len()));
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.rate > 0.0 && p.rate.is_finite()) {
                return Err(Error::Invalid(format!("point {i}: rate {} is not positive", p.rate)));
            }
            if !p.psnr.is_finite() {
                return Err(Error::Invalid(format!("point {i}: psnr {} cannot be fitted", p.psnr)));
            }
        }
        let dec = points.windows(2).all(|w| w[1].rate < w[0].rate);
        let inc = points.windows(2).all(|w| w[1].rate > w[0].rate);
        if !(dec || inc) {
            return Err(Error::Invalid("rates are not strictly monotone".into()));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[RdPoint] {
        &self.points
    }

    fn log_rates(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.rate.log10()).collect()
    }

    fn psnrs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.psnr).collect()
    }
}

/// Cubic `y ≈ c0 + c1 t + c2 t² + c3 t³` in the normalized variable
/// `t = (x - center) / scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct CubicFit {
    pub coeffs: [f64; 4],
    pub center: f64,
    pub scale: f64,
}

impl CubicFit {
    pub fn fit(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() < 4 || x.len() != y.len() {
            return Err(Error::TooFewPoints(x.len().min(y.len())));
        }
        let n = x.len() as f64;
        let center = x.iter().sum::<f64>() / n;
        let scale = (x.iter().map(|v| (v - center).powi(2)).sum::<f64>() / n).sqrt();
        if !(scale > 0.0) {
            return Err(Error::Invalid("fit abscissae are all equal".into()));
        }
        // normal equations in the normalized variable
        let mut a = [[0.0f64; 5]; 4];
        for (&xi, &yi) in x.iter().zip(y) {
            let t = (xi - center) / scale;
            let pw = [1.0, t, t * t, t * t * t];
            for r in 0..4 {
                for c in 0..4 {
                    a[r][c] += pw[r] * pw[c];
                }
                a[r][4] += pw[r] * yi;
            }
        }
        let coeffs = solve4(a).ok_or_else(|| Error::Invalid("singular cubic fit (repeated abscissae)".into()))?;
        Ok(Self { coeffs, center, scale })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let t = (x - self.center) / self.scale;
        let c = &self.coeffs;
        ((c[3] * t + c[2]) * t + c[1]) * t + c[0]
    }

    /// Exact integral over `[lo, hi]` in the original variable.
    pub fn integrate(&self, lo: f64, hi: f64) -> f64 {
        let anti = |x: f64| {
            let t = (x - self.center) / self.scale;
            let c = &self.coeffs;
            t * (c[0] + t * (c[1] / 2.0 + t * (c[2] / 3.0 + t * c[3] / 4.0)))
        };
        (anti(hi) - anti(lo)) * self.scale
    }
}

/// Gaussian elimination with partial pivoting on an augmented 4x5 system.
fn solve4(mut a: [[f64; 5]; 4]) -> Option<[f64; 4]> {
    for col in 0..4 {
        let piv = (col..4).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        for r in col + 1..4 {
            let f = a[r][col] / a[col][col];
            for c in col..5 {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    let mut x = [0.0; 4];
    for r in (0..4).rev() {
        let s: f64 = (r + 1..4).map(|c| a[r][c] * x[c]).sum();
        x[r] = (a[r][4] - s) / a[r][r];
    }
    Some(x)
}

fn overlap(a: &[f64], b: &[f64], what: &'static str) -> Result<(f64, f64)> {
    let range = |v: &[f64]| {
        v.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
    };
    let (alo, ahi) = range(a);
    let (blo, bhi) = range(b);
    let (lo, hi) = (alo.max(blo), ahi.min(bhi));
    if hi > lo {
        Ok((lo, hi))
    } else {
        Err(Error::NoOverlap(what))
    }
}

/// Average rate difference in percent at equal PSNR; negative means `test`
/// needs fewer bits than `anchor`.
pub fn bd_rate(anchor: &RdCurve, test: &RdCurve) -> Result<f64> {
    let (pa, pt) = (anchor.psnrs(), test.psnrs());
    let (lo, hi) = overlap(&pa, &pt, "PSNR")?;
    let fa = CubicFit::fit(&pa, &anchor.log_rates())?;
    let ft = CubicFit::fit(&pt, &test.log_rates())?;
    let avg = (ft.integrate(lo, hi) - fa.integrate(lo, hi)) / (hi - lo);
    Ok((10f64.powf(avg) - 1.0) * 100.0)
}

/// Average PSNR difference in dB at equal rate.
pub fn bd_psnr(anchor: &RdCurve, test: &RdCurve) -> Result<f64> {
    let (ra, rt) = (anchor.log_rates(), test.log_rates());
    let (lo, hi) = overlap(&ra, &rt, "rate")?;
    let fa = CubicFit::fit(&ra, &anchor.psnrs())?;
    let ft = CubicFit::fit(&rt, &test.psnrs())?;
    Ok((ft.integrate(lo, hi) - fa.integrate(lo, hi)) / (hi - lo))
}
