//! Adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Globally adaptive bisection on the interval with the largest error
//! estimate, with QUADPACK-style error rescaling. Integrands may be fallible
//! so that divergence detected while evaluating an inner expectation
//! propagates out of an outer integral unchanged.

use crate::error::{AslError, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_INTERVALS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    roundoff: f64,
}

fn kronrod15<F>(f: &mut F, a: f64, b: f64) -> Result<Segment>
where
    F: FnMut(f64) -> Result<f64>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let fc = f(center)?;
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = (fc * WGK[7]).abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];

    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let value = res_k * half;
    res_abs *= half.abs();
    res_asc *= half.abs();
    if !value.is_finite() {
        return Err(AslError::IntegrationFailure(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }

    let mut error = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && error != 0.0 {
        error = res_asc * (200.0 * error / res_asc).powf(1.5).min(1.0);
    }
    let roundoff = 50.0 * f64::EPSILON * res_abs;
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(roundoff);
    }

    Ok(Segment { a, b, value, error, roundoff })
}

/// Integrate a fallible integrand over `[a, b]` to absolute tolerance `abs_tol`
/// (or relative tolerance `rel_tol`, whichever is looser).
pub fn integrate_fallible<F>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<Integral>
where
    F: FnMut(f64) -> Result<f64>,
{
    integrate_pieces_fallible(&mut f, &[a, b], abs_tol, rel_tol)
}

/// Integrate an infallible integrand over `[a, b]`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, abs_tol: f64) -> Result<Integral>
where
    F: FnMut(f64) -> f64,
{
    integrate_pieces_fallible(&mut |x| Ok(f(x)), &[a, b], abs_tol, 1e-14)
}

/// Integrate over consecutive pieces delimited by sorted `breakpoints`.
///
/// Kinks of the integrand should be passed as breakpoints so every piece is
/// smooth; the adaptive loop then works on all pieces jointly.
pub fn integrate_pieces_fallible<F>(
    f: &mut F,
    breakpoints: &[f64],
    abs_tol: f64,
    rel_tol: f64,
) -> Result<Integral>
where
    F: FnMut(f64) -> Result<f64>,
{
    if breakpoints.len() < 2 {
        return Ok(Integral { value: 0.0, abs_error: 0.0, evaluations: 0 });
    }
    let mut segments = Vec::with_capacity(64);
    let mut evaluations = 0;
    for w in breakpoints.windows(2) {
        if w[1] > w[0] {
            segments.push(kronrod15(f, w[0], w[1])?);
            evaluations += 15;
        } else if w[1] < w[0] {
            return Err(AslError::IntegrationFailure("breakpoints must be sorted".into()));
        }
    }

    loop {
        let value: f64 = segments.iter().map(|s| s.value).sum();
        let error: f64 = segments.iter().map(|s| s.error).sum();
        // Error left once the roundoff floor of every segment is discounted;
        // subdividing cannot reduce the floor itself.
        let excess: f64 = segments.iter().map(|s| s.error - s.roundoff).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) || excess <= abs_tol.max(rel_tol * value.abs()) {
            return Ok(Integral { value, abs_error: error, evaluations });
        }
        if segments.len() >= MAX_INTERVALS {
            return Err(AslError::IntegrationFailure(format!(
                "tolerance {abs_tol:e} not met after {MAX_INTERVALS} subdivisions (error {error:e})"
            )));
        }

        let (worst, seg) = segments
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, s)| (i, *s))
            .expect("non-empty");
        let mid = 0.5 * (seg.a + seg.b);
        if !(mid > seg.a && mid < seg.b) {
            // Interval cannot be split further in floating point; accept it.
            return Ok(Integral { value, abs_error: error, evaluations });
        }
        let left = kronrod15(f, seg.a, mid)?;
        let right = kronrod15(f, mid, seg.b)?;
        evaluations += 30;
        segments[worst] = left;
        segments.push(right);
    }
}
