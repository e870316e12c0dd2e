//! Adaptive Gauss-Kronrod (7-15) quadrature for vector-valued integrands.

use crate::error::{Error, Result};
use nalgebra::DVector;

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
// Gauss weights for nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone)]
pub struct QuadResult {
    pub value: DVector<f64>,
    pub error: f64,
    pub intervals: usize,
}

fn gk15<F: Fn(f64) -> DVector<f64>>(f: &F, a: f64, b: f64) -> (DVector<f64>, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = &fc * WGK[7];
    let mut gauss = &fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron += &s * WGK[j];
        if j % 2 == 1 {
            gauss += &s * WG[j / 2];
        }
    }
    let err = (&kron - &gauss).amax() * h.abs();
    (kron * h, err)
}

/// Integrate `f` over `[a, b]` until the estimated error is below
/// `max(abs_tol, rel_tol * |I|)` in the sup norm.
pub fn integrate<F>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<QuadResult>
where
    F: Fn(f64) -> DVector<f64>,
{
    let (v0, e0) = gk15(&f, a, b);
    let mut pieces = vec![(a, b, v0, e0)];
    for _ in 0..2000 {
        let total: DVector<f64> = pieces
            .iter()
            .fold(DVector::zeros(pieces[0].2.len()), |s, p| s + &p.2);
        let err: f64 = pieces.iter().map(|p| p.3).sum();
        if !err.is_finite() || total.iter().any(|x| !x.is_finite()) {
            return Err(Error::IllPosed("quadrature produced non-finite values".into()));
        }
        if err <= abs_tol.max(rel_tol * total.amax()) {
            return Ok(QuadResult {
                value: total,
                error: err,
                intervals: pieces.len(),
            });
        }
        let (worst, _) = pieces
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (lo, hi, _, _) = pieces.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (vl, el) = gk15(&f, lo, mid);
        let (vr, er) = gk15(&f, mid, hi);
        pieces.push((lo, mid, vl, el));
        pieces.push((mid, hi, vr, er));
    }
    Err(Error::IllPosed(
        "quadrature did not converge; integrand may not be integrable".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_integral() {
        let r = integrate(|t| DVector::from_vec(vec![(-t).exp(), t * t]), 0.0, 3.0, 1e-14, 1e-14).unwrap();
        assert!((r.value[0] - (1.0 - (-3.0f64).exp())).abs() < 1e-13);
        assert!((r.value[1] - 9.0).abs() < 1e-12);
    }
}
