//! Small deterministic optimizers: golden section, bisection, Nelder-Mead and
//! a projected Newton method with finite-difference derivatives.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Argmax1d {
    pub x: f64,
    pub value: f64,
    /// Final bracket around the maximizer.
    pub bracket: (f64, f64),
    pub evaluations: usize,
}

/// Golden-section search for the maximum of a unimodal function on `[a, b]`.
pub fn golden_section_max<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Argmax1d {
    let (mut a, mut b) = (a.min(b), a.max(b));
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evals = 2;
    // Stop once the bracket is below tol or stops shrinking in floating point.
    for _ in 0..500 {
        if (b - a) <= tol * (1.0 + c.abs().max(d.abs())) {
            break;
        }
        // `>=` keeps the left point on ties, so flat stretches resolve leftwards.
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            if !(c > a && c < d) {
                break;
            }
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            if !(d > c && d < b) {
                break;
            }
            fd = f(d);
        }
        evals += 1;
    }
    let (x, value) = if fc >= fd { (c, fc) } else { (d, fd) };
    Argmax1d {
        x,
        value,
        bracket: (a, b),
        evaluations: evals,
    }
}

/// Bisection for a root of `f` on `[a, b]`; requires a sign change.
pub fn bisect<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, xtol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (a, b);
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return Err(Error::numeric(format!(
            "bisection needs a sign change on [{a}, {b}] (f = {flo}, {fhi})"
        )));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || (hi - lo) <= xtol {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Safeguarded Newton on a bracketing interval: Newton steps that leave the
/// bracket (or fail to shrink it fast enough) are replaced by bisection.
pub fn safeguarded_newton<F>(f: F, a: f64, b: f64, x0: f64, xtol: f64) -> Result<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    let (flo, _) = f(lo);
    let (fhi, _) = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || !flo.is_finite() || !fhi.is_finite() {
        return Err(Error::numeric(format!(
            "no sign change on [{lo}, {hi}] (f = {flo}, {fhi})"
        )));
    }
    let increasing = fhi > 0.0;
    let mut x = if x0 > lo && x0 < hi { x0 } else { 0.5 * (lo + hi) };
    for _ in 0..200 {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        if (fx > 0.0) == increasing {
            hi = x;
        } else {
            lo = x;
        }
        let mut next = if dfx != 0.0 && dfx.is_finite() {
            x - fx / dfx
        } else {
            f64::NAN
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - x).abs();
        x = next;
        if step <= xtol * (1.0 + x.abs()) || hi - lo <= xtol * (1.0 + x.abs()) {
            return Ok(x);
        }
    }
    Ok(x)
}

/// Maximize a unimodal function on `[0, ∞)`.
///
/// The right end of the search interval starts at `hi0` and doubles until the
/// function is lower there than at the midpoint. Golden section then locates
/// the maximizer; when a derivative is supplied the result is polished by
/// bisection on it, which gets past the square-root-of-epsilon floor of pure
/// comparison search. The boundary point 0 is always compared explicitly.
pub fn argmax_nonneg<F, D>(f: F, df: Option<D>, hi0: f64, tol: f64) -> Result<Argmax1d>
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let mut hi = if hi0 > 0.0 { hi0 } else { 1.0 };
    let mut expanded = false;
    for _ in 0..200 {
        let decreasing = match &df {
            Some(d) => d(hi) < 0.0,
            None => f(hi) < f(0.5 * hi),
        };
        if decreasing {
            expanded = true;
            break;
        }
        hi *= 2.0;
    }
    if !expanded {
        return Err(Error::NotConverged(format!(
            "objective still increasing at {hi}; bracket exhausted"
        )));
    }

    let f0 = f(0.0);
    let gs = golden_section_max(&f, 0.0, hi, tol);
    let mut best = gs;
    if let Some(d) = &df {
        // Grow a sign-change bracket around the golden-section estimate.
        let mut w = (gs.bracket.1 - gs.bracket.0).max(1e-12 * (1.0 + gs.x));
        let mut lo = (gs.x - w).max(0.0);
        let mut up = (gs.x + w).min(hi);
        for _ in 0..60 {
            if (lo == 0.0 || d(lo) > 0.0) && d(up) < 0.0 {
                break;
            }
            w *= 2.0;
            lo = (gs.x - w).max(0.0);
            up = (gs.x + w).min(hi);
        }
        if d(lo) > 0.0 && d(up) < 0.0 {
            let x = bisect(d, lo, up, 0.0)?;
            let v = f(x);
            if v >= best.value - 1e-14 * (1.0 + v.abs()) {
                best = Argmax1d {
                    x,
                    value: v,
                    bracket: (lo, up),
                    evaluations: gs.evaluations + 130,
                };
            }
        }
    }
    if f0 >= best.value {
        best = Argmax1d {
            x: 0.0,
            value: f0,
            bracket: (0.0, best.bracket.1),
            evaluations: best.evaluations + 1,
        };
    }
    Ok(best)
}

#[derive(Debug, Clone)]
pub struct NelderMeadOptions {
    pub max_iter: usize,
    pub xtol: f64,
    pub ftol: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iter: 4000,
            xtol: 1e-12,
            ftol: 1e-15,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MaxResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// Nelder-Mead maximization with every vertex clamped to `x >= lower`.
pub fn nelder_mead_max<F>(
    f: F,
    x0: &[f64],
    step: &[f64],
    lower: &[f64],
    opts: &NelderMeadOptions,
) -> MaxResult
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let clamp = |x: &mut Vec<f64>| {
        for (xi, li) in x.iter_mut().zip(lower) {
            if *xi < *li {
                *xi = *li;
            }
        }
    };
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    let mut start = x0.to_vec();
    clamp(&mut start);
    simplex.push(start.clone());
    for i in 0..n {
        let mut v = start.clone();
        v[i] += step[i];
        clamp(&mut v);
        simplex.push(v);
    }
    let mut vals: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let mut iter = 0;
    while iter < opts.max_iter {
        iter += 1;
        // Sort best (largest) first.
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        vals = idx.iter().map(|&i| vals[i]).collect();

        let spread = (vals[0] - vals[n]).abs();
        let size = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let scale = 1.0 + simplex[0].iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if spread <= opts.ftol * (1.0 + vals[0].abs()) && size <= opts.xtol * scale {
            break;
        }

        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let along = |coef: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| c + coef * (w - c))
                .collect();
            clamp(&mut p);
            p
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr > vals[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe > fr {
                simplex[n] = xe;
                vals[n] = fe;
            } else {
                simplex[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr > vals[n - 1] {
            simplex[n] = xr;
            vals[n] = fr;
            continue;
        }
        let (xc, fc) = if fr > vals[n] {
            let p = along(-0.5);
            let v = f(&p);
            (p, v)
        } else {
            let p = along(0.5);
            let v = f(&p);
            (p, v)
        };
        if fc > vals[n].max(fr.min(vals[n])) {
            simplex[n] = xc;
            vals[n] = fc;
            continue;
        }
        // Shrink toward the best vertex.
        let best = simplex[0].clone();
        for k in 1..=n {
            let mut p: Vec<f64> = simplex[k]
                .iter()
                .zip(&best)
                .map(|(x, b)| b + 0.5 * (x - b))
                .collect();
            clamp(&mut p);
            vals[k] = f(&p);
            simplex[k] = p;
        }
    }
    let (bi, _) = vals
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| {
            if v > acc.1 {
                (i, v)
            } else {
                acc
            }
        });
    MaxResult {
        x: simplex[bi].clone(),
        value: vals[bi],
        iterations: iter,
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOptions {
    pub max_iter: usize,
    /// Relative finite-difference step of the gradient.
    pub fd_step: f64,
    /// Relative step of the gradient differences that form the Hessian.
    pub hess_step: f64,
    /// Stop when every free coordinate moves less than this (relative).
    pub step_tol: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iter: 300,
            fd_step: 1e-3,
            hess_step: 1e-4,
            step_tol: 1e-13,
        }
    }
}

fn fd_scale(x: f64, rel: f64) -> f64 {
    rel * x.abs().max(1e-3)
}

/// Finite-difference gradient: five-point central where the box allows,
/// three-point central or one-sided (second order) near the lower bound.
pub fn fd_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], lower: &[f64], rel: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut p = x.to_vec();
    let at = |p: &mut Vec<f64>, i: usize, v: f64| {
        p[i] = v;
        f(p)
    };
    for i in 0..x.len() {
        let h = fd_scale(x[i], rel);
        g[i] = if x[i] - 2.0 * h >= lower[i] {
            let f2 = at(&mut p, i, x[i] + 2.0 * h);
            let f1 = at(&mut p, i, x[i] + h);
            let m1 = at(&mut p, i, x[i] - h);
            let m2 = at(&mut p, i, x[i] - 2.0 * h);
            (-f2 + 8.0 * f1 - 8.0 * m1 + m2) / (12.0 * h)
        } else if x[i] - h >= lower[i] {
            let f1 = at(&mut p, i, x[i] + h);
            let m1 = at(&mut p, i, x[i] - h);
            (f1 - m1) / (2.0 * h)
        } else {
            let f0 = at(&mut p, i, x[i]);
            let f1 = at(&mut p, i, x[i] + h);
            let f2 = at(&mut p, i, x[i] + 2.0 * h);
            (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h)
        };
        p[i] = x[i];
    }
    g
}

/// Projected Newton maximization over the box `x >= lower`.
///
/// Gradient and Hessian come from finite differences. A Levenberg shift keeps
/// the step an ascent direction when the Hessian is not negative definite;
/// coordinates sitting on the bound with a non-positive gradient are frozen.
pub fn projected_newton_max<F>(f: F, x0: &[f64], lower: &[f64], opts: &NewtonOptions) -> MaxResult
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let mut x: Vec<f64> = x0.iter().zip(lower).map(|(a, l)| a.max(*l)).collect();
    let mut fx = f(&x);
    let mut iterations = 0;
    for it in 0..opts.max_iter {
        iterations = it + 1;
        let g = fd_gradient(&f, &x, lower, opts.fd_step);
        let free: Vec<usize> = (0..n)
            .filter(|&i| !(x[i] <= lower[i] && g[i] <= 0.0))
            .collect();
        if free.is_empty() {
            break;
        }
        let m = free.len();
        // Hessian of the free block from differences of the gradient.
        let mut hmat = DMatrix::<f64>::zeros(m, m);
        for (cj, &j) in free.iter().enumerate() {
            let h = fd_scale(x[j], opts.hess_step);
            let central = x[j] - h >= lower[j];
            let mut p = x.clone();
            if central {
                p[j] = x[j] + h;
                let gp = fd_gradient(&f, &p, lower, opts.fd_step);
                p[j] = x[j] - h;
                let gm = fd_gradient(&f, &p, lower, opts.fd_step);
                for (ci, &i) in free.iter().enumerate() {
                    hmat[(ci, cj)] = (gp[i] - gm[i]) / (2.0 * h);
                }
            } else {
                p[j] = x[j] + h;
                let g1 = fd_gradient(&f, &p, lower, opts.fd_step);
                p[j] = x[j] + 2.0 * h;
                let g2 = fd_gradient(&f, &p, lower, opts.fd_step);
                for (ci, &i) in free.iter().enumerate() {
                    hmat[(ci, cj)] = (-3.0 * g[i] + 4.0 * g1[i] - g2[i]) / (2.0 * h);
                }
            }
        }
        let hsym = (&hmat + hmat.transpose()) * 0.5;
        let neg = -hsym;
        let gfree = DVector::from_iterator(m, free.iter().map(|&i| g[i]));
        let diag_scale = (0..m).map(|i| neg[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        let mut mu = 0.0;
        let dir = loop {
            let mut shifted = neg.clone();
            for i in 0..m {
                shifted[(i, i)] += mu;
            }
            if let Some(ch) = shifted.cholesky() {
                break ch.solve(&gfree);
            }
            mu = if mu == 0.0 { 1e-8 * diag_scale } else { mu * 10.0 };
            if mu > 1e20 * diag_scale {
                break gfree.clone();
            }
        };

        let mut accepted = false;
        let mut t = 1.0;
        let mut x_new = x.clone();
        let mut f_new = fx;
        for _ in 0..60 {
            x_new = x.clone();
            for (ci, &i) in free.iter().enumerate() {
                x_new[i] = (x[i] + t * dir[ci]).max(lower[i]);
            }
            f_new = f(&x_new);
            let pred: f64 = free.iter().map(|&i| g[i] * (x_new[i] - x[i])).sum();
            if f_new.is_finite() && f_new >= fx + 1e-4 * pred.max(0.0) && f_new >= fx {
                accepted = true;
                break;
            }
            // Close to the optimum the gain drops below the resolution of f;
            // the gradient is still informative, so take the full step.
            if t == 1.0 && f_new.is_finite() && (f_new - fx).abs() <= 64.0 * f64::EPSILON * fx.abs().max(1.0) {
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        let moved = free
            .iter()
            .map(|&i| (x_new[i] - x[i]).abs() / x[i].abs().max(1.0))
            .fold(0.0, f64::max);
        x = x_new;
        fx = f_new;
        if moved <= opts.step_tol {
            break;
        }
    }
    MaxResult {
        x,
        value: fx,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_finds_parabola_peak() {
        let r = golden_section_max(|x| -(x - 1.3).powi(2), 0.0, 4.0, 1e-10);
        assert!((r.x - 1.3).abs() < 1e-7);
    }

    #[test]
    fn argmax_with_derivative_is_tight() {
        let f = |x: f64| (1.0 + x).ln() - 0.25 * x;
        let d = |x: f64| 1.0 / (1.0 + x) - 0.25;
        let r = argmax_nonneg(f, Some(d), 1.0, 1e-10).unwrap();
        assert!((r.x - 3.0).abs() < 1e-12, "{}", r.x);
    }

    #[test]
    fn argmax_boundary() {
        let f = |x: f64| -x - x * x;
        let r = argmax_nonneg(f, Some(|x: f64| -1.0 - 2.0 * x), 1.0, 1e-10).unwrap();
        assert_eq!(r.x, 0.0);
        let r = argmax_nonneg(f, None::<fn(f64) -> f64>, 1.0, 1e-10).unwrap();
        assert_eq!(r.x, 0.0);
    }

    #[test]
    fn bisect_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 0.0).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-15);
        assert!(bisect(|x| x * x + 1.0, 0.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn newton_safeguard() {
        let r = safeguarded_newton(|x| (x.powi(3) - 8.0, 3.0 * x * x), 0.0, 10.0, 9.0, 1e-15).unwrap();
        assert!((r - 2.0).abs() < 1e-13);
    }

    #[test]
    fn nelder_mead_rosenbrock() {
        let f = |x: &[f64]| -((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2));
        let r = nelder_mead_max(f, &[0.5, 0.5], &[0.1, 0.1], &[-10.0, -10.0], &Default::default());
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn projected_newton_with_active_bound() {
        // Unconstrained maximizer at (2, -1); the bound pins y at 0.
        let f = |x: &[f64]| -(x[0] - 2.0).powi(2) - (x[1] + 1.0).powi(2) + 0.5 * x[0] * x[1];
        let r = projected_newton_max(f, &[1.0, 1.0], &[0.0, 0.0], &Default::default());
        assert!((r.x[0] - 2.0).abs() < 1e-8, "{:?}", r.x);
        assert_eq!(r.x[1], 0.0);
    }
}
