//! Deterministic fits used by the measurement protocols: single-frequency
//! cosine regression (grid scan plus golden-section refinement over the
//! frequency, linear least squares for the remaining coefficients),
//! three-point parabolic and Lorentzian peak refinement, a straight line
//! through the origin with its coefficient of determination, and a rank-1
//! dominance measure for separable surfaces.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// y(t) ~ offset + cos_coeff cos(f t) + sin_coeff sin(f t).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CosineFit {
    pub frequency: f64,
    pub offset: f64,
    pub cos_coeff: f64,
    pub sin_coeff: f64,
    pub amplitude: f64,
    pub residual_rms: f64,
}

/// Sum of squared residuals of the best linear combination
/// a + b cos(f t) + c sin(f t) at fixed frequency, plus the coefficients.
fn cosine_residual(times: &[f64], values: &[f64], f: f64) -> (f64, [f64; 3]) {
    let n = times.len();
    let design = DMatrix::<f64>::from_fn(n, 3, |r, c| match c {
        0 => 1.0,
        1 => (f * times[r]).cos(),
        _ => (f * times[r]).sin(),
    });
    let y = DVector::<f64>::from_column_slice(values);
    let svd = design.clone().svd(true, true);
    let coef = svd.solve(&y, 1e-13).expect("3-column least squares is well posed");
    let resid = &y - design * &coef;
    (resid.norm_squared(), [coef[0], coef[1], coef[2]])
}

/// Fit a single-frequency cosine by scanning `n_grid` frequencies in
/// [f_min, f_max] and refining the best cell with golden-section search.
pub fn fit_cosine(
    times: &[f64],
    values: &[f64],
    f_min: f64,
    f_max: f64,
    n_grid: usize,
) -> Result<CosineFit> {
    if times.len() != values.len() || times.len() < 8 {
        return Err(Error::InvalidParams(format!(
            "cosine fit needs at least 8 samples, got {}",
            times.len().min(values.len())
        )));
    }
    if !(f_min > 0.0 && f_max > f_min && f_min.is_finite() && f_max.is_finite()) {
        return Err(Error::InvalidParams(format!(
            "cosine fit needs 0 < f_min < f_max, got [{f_min}, {f_max}]"
        )));
    }
    if values.iter().chain(times.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("cosine fit input".into()));
    }
    let n_grid = n_grid.max(16);
    let step = (f_max - f_min) / (n_grid - 1) as f64;
    let mut best_f = f_min;
    let mut best_r = f64::INFINITY;
    for i in 0..n_grid {
        let f = f_min + step * i as f64;
        let (r, _) = cosine_residual(times, values, f);
        if r < best_r {
            best_r = r;
            best_f = f;
        }
    }
    // golden-section refinement one grid cell around the winner
    let mut a = (best_f - step).max(f_min * 0.5);
    let mut b = best_f + step;
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    for _ in 0..70 {
        let m1 = b - INV_PHI * (b - a);
        let m2 = a + INV_PHI * (b - a);
        if cosine_residual(times, values, m1).0 < cosine_residual(times, values, m2).0 {
            b = m2;
        } else {
            a = m1;
        }
    }
    let f = 0.5 * (a + b);
    let (rss, coef) = cosine_residual(times, values, f);
    Ok(CosineFit {
        frequency: f,
        offset: coef[0],
        cos_coeff: coef[1],
        sin_coeff: coef[2],
        amplitude: coef[1].hypot(coef[2]),
        residual_rms: (rss / times.len() as f64).sqrt(),
    })
}

/// Refine the maximum of samples on a uniform grid with a three-point
/// parabola around the argmax. Returns (x_peak, y_peak, interior) where
/// `interior` is false when the argmax sat on the grid edge (no refinement
/// possible).
pub fn refine_peak_parabolic(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, bool)> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::InvalidParams("peak refinement needs at least 3 samples".into()));
    }
    if ys.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("peak refinement input".into()));
    }
    let mut i_max = 0usize;
    for (i, &y) in ys.iter().enumerate() {
        if y > ys[i_max] {
            i_max = i;
        }
    }
    if i_max == 0 || i_max + 1 == ys.len() {
        return Ok((xs[i_max], ys[i_max], false));
    }
    let (y1, y2, y3) = (ys[i_max - 1], ys[i_max], ys[i_max + 1]);
    let denom = y1 - 2.0 * y2 + y3;
    if denom.abs() < 1e-300 {
        return Ok((xs[i_max], ys[i_max], false));
    }
    let step = xs[i_max] - xs[i_max - 1];
    let shift = 0.5 * (y1 - y3) / denom;
    let x = xs[i_max] + shift * step;
    let y = y2 - 0.25 * (y1 - y3) * shift;
    Ok((x, y, true))
}

/// Refine the maximum with a three-point Lorentzian around the argmax: a
/// Lorentzian h / (1 + ((x - x0)/w)^2) is an exact parabola in 1/y, so the
/// vertex formula is applied to the reciprocal samples. Falls back to the
/// plain parabola when a sample is non-positive or the reciprocal has no
/// interior minimum. Same contract as `refine_peak_parabolic`.
pub fn refine_peak_lorentzian(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, bool)> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::InvalidParams("peak refinement needs at least 3 samples".into()));
    }
    if ys.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("peak refinement input".into()));
    }
    let mut i_max = 0usize;
    for (i, &y) in ys.iter().enumerate() {
        if y > ys[i_max] {
            i_max = i;
        }
    }
    if i_max == 0 || i_max + 1 == ys.len() {
        return Ok((xs[i_max], ys[i_max], false));
    }
    let (y1, y2, y3) = (ys[i_max - 1], ys[i_max], ys[i_max + 1]);
    if !(y1 > 0.0 && y2 > 0.0 && y3 > 0.0) {
        return refine_peak_parabolic(xs, ys);
    }
    let (u1, u2, u3) = (1.0 / y1, 1.0 / y2, 1.0 / y3);
    let denom = u1 - 2.0 * u2 + u3;
    if denom <= 0.0 {
        return refine_peak_parabolic(xs, ys);
    }
    let step = xs[i_max] - xs[i_max - 1];
    let shift = 0.5 * (u1 - u3) / denom;
    let x = xs[i_max] + shift * step;
    let u = u2 - 0.25 * (u1 - u3) * shift;
    Ok((x, 1.0 / u, true))
}

/// Least-squares slope of y = s x (line through the origin) and the
/// coefficient of determination about the mean of y.
pub fn linear_fit_through_origin(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidParams("line fit needs at least 2 samples".into()));
    }
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParams("line fit through origin needs non-zero x".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let slope = sxy / sxx;
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean) * (y - mean)).sum();
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x) * (y - slope * x)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok((slope, r2))
}

/// sigma_1^2 / sum_i sigma_i^2 of a matrix: 1.0 for an exactly separable
/// (rank-1) surface.
pub fn rank_one_fraction(m: &DMatrix<f64>) -> f64 {
    let svd = m.clone().svd(false, false);
    let total: f64 = svd.singular_values.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return 1.0;
    }
    let top = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    top * top / total
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn test_cosine_fit_exact_signal() {
        let f0 = 0.2345;
        let times: Vec<f64> = (0..48).map(|i| i as f64 * 0.7).collect();
        let values: Vec<f64> =
            times.iter().map(|&t| 0.5 + 0.4 * (f0 * t).cos() - 0.1 * (f0 * t).sin()).collect();
        let fit = fit_cosine(&times, &values, 0.5 * f0, 1.5 * f0, 2001).unwrap();
        assert!((fit.frequency - f0).abs() / f0 < 1e-9, "frequency {}", fit.frequency);
        assert!((fit.offset - 0.5).abs() < 1e-8);
        assert!((fit.cos_coeff - 0.4).abs() < 1e-7);
        assert!((fit.sin_coeff + 0.1).abs() < 1e-7);
        assert!(fit.residual_rms < 1e-9);
    }

    #[test]
    fn test_cosine_fit_with_noise() {
        let f0 = 1.7;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let times: Vec<f64> = (0..96).map(|i| i as f64 * 0.11).collect();
        let values: Vec<f64> = times
            .iter()
            .map(|&t| 0.5 + 0.45 * (f0 * t).cos() + 0.002 * rng.gen_range(-1.0..1.0))
            .collect();
        let fit = fit_cosine(&times, &values, 0.5 * f0, 1.5 * f0, 1001).unwrap();
        assert!((fit.frequency - f0).abs() / f0 < 1e-3, "frequency {}", fit.frequency);
        assert!(fit.residual_rms < 5e-3);
    }

    #[test]
    fn test_cosine_fit_input_validation() {
        let t = [0.0, 1.0, 2.0];
        let y = [0.0, 1.0, 0.0];
        assert!(fit_cosine(&t, &y, 0.1, 1.0, 100).is_err(), "too few samples");
        let t8: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let y8 = vec![0.0; 8];
        assert!(fit_cosine(&t8, &y8, 1.0, 0.5, 100).is_err(), "inverted band");
        assert!(fit_cosine(&t8, &y8, 0.0, 0.5, 100).is_err(), "zero f_min");
    }

    #[test]
    fn test_parabolic_peak_exact() {
        // samples of y = 3 - 2 (x - 1.3)^2 on a uniform grid
        let xs: Vec<f64> = (0..11).map(|i| i as f64 * 0.25).collect();
        let ys: Vec<f64> = xs.iter().map(|&x| 3.0 - 2.0 * (x - 1.3) * (x - 1.3)).collect();
        let (x, y, interior) = refine_peak_parabolic(&xs, &ys).unwrap();
        assert!(interior);
        assert!((x - 1.3).abs() < 1e-12, "peak at {x}");
        assert!((y - 3.0).abs() < 1e-12, "height {y}");
    }

    #[test]
    fn test_parabolic_peak_boundary_flagged() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [5.0, 4.0, 3.0, 2.0];
        let (x, _, interior) = refine_peak_parabolic(&xs, &ys).unwrap();
        assert!(!interior);
        assert_eq!(x, 0.0);
    }

    #[test]
    fn test_lorentzian_peak_exact() {
        // samples of an exact Lorentzian: the reciprocal trick recovers the
        // center and height to machine precision, where a parabola would not
        let (x0, w, h) = (2.13, 0.8, 0.97);
        let xs: Vec<f64> = (0..13).map(|i| i as f64 * 0.5).collect();
        let ys: Vec<f64> =
            xs.iter().map(|&x| h / (1.0 + ((x - x0) / w) * ((x - x0) / w))).collect();
        let (x, y, interior) = refine_peak_lorentzian(&xs, &ys).unwrap();
        assert!(interior);
        assert!((x - x0).abs() < 1e-12, "center {x}");
        assert!((y - h).abs() < 1e-12, "height {y}");
        let (xp, _, _) = refine_peak_parabolic(&xs, &ys).unwrap();
        assert!((xp - x0).abs() > 1e-3, "parabola is biased on a Lorentzian");
    }

    #[test]
    fn test_lorentzian_peak_fallbacks() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        // boundary argmax: unrefined, flagged
        let (x, _, interior) = refine_peak_lorentzian(&xs, &[5.0, 4.0, 3.0, 2.0]).unwrap();
        assert!(!interior);
        assert_eq!(x, 0.0);
        // non-positive sample: falls back to the parabola result
        let ys = [-0.5, 1.0, 0.5, 0.0];
        let lor = refine_peak_lorentzian(&xs, &ys).unwrap();
        let par = refine_peak_parabolic(&xs, &ys).unwrap();
        assert_eq!(lor, par);
    }

    #[test]
    fn test_line_through_origin() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 0.7 * x).collect();
        let (slope, r2) = linear_fit_through_origin(&xs, &ys).unwrap();
        assert!((slope - 0.7).abs() < 1e-14);
        assert!((r2 - 1.0).abs() < 1e-14);
        // quadratic contamination lowers R^2 below 1
        let ys2: Vec<f64> = xs.iter().map(|x| 0.7 * x + 0.3 * x * x).collect();
        let (_, r2b) = linear_fit_through_origin(&xs, &ys2).unwrap();
        assert!(r2b < 1.0 - 1e-4, "R^2 {r2b}");
    }

    #[test]
    fn test_rank_one_fraction() {
        let u = DVector::<f64>::from_vec(vec![1.0, 2.0, -1.0]);
        let v = DVector::<f64>::from_vec(vec![0.5, -0.25, 1.0, 2.0]);
        let m = &u * v.transpose();
        assert!((rank_one_fraction(&m) - 1.0).abs() < 1e-12);
        let eye = DMatrix::<f64>::identity(3, 3);
        assert!((rank_one_fraction(&eye) - 1.0 / 3.0).abs() < 1e-12);
    }
}
