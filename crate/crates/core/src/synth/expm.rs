use nalgebra::DMatrix;

use crate::scalar::Real;

const PADE_DEGREE: usize = 8;

/// Matrix exponential by scaling and squaring with a diagonal [8/8] Padé
/// approximant. The argument is scaled so its 1-norm is at most 1/2, where
/// the truncation error of the approximant is below `f64` round-off.
pub(crate) fn expm<T: Real>(a: &DMatrix<T>) -> DMatrix<T> {
    assert!(a.is_square(), "matrix exponential needs a square matrix");
    let dim = a.nrows();
    let norm = a
        .column_iter()
        .map(|c| c.iter().fold(T::zero(), |acc, &v| acc + v.abs()))
        .fold(T::zero(), |acc, v| acc.max(v));
    let mut squarings = 0u32;
    let half = T::lit(0.5);
    let mut scaled_norm = norm;
    while scaled_norm > half {
        scaled_norm *= half;
        squarings += 1;
    }
    let x = a * T::lit(0.5f64.powi(squarings as i32));

    let coeffs = pade_coefficients::<T>(PADE_DEGREE);
    let identity = DMatrix::<T>::identity(dim, dim);
    let mut numer = &identity * coeffs[0];
    let mut denom = &identity * coeffs[0];
    let mut power = identity.clone();
    for (k, &c) in coeffs.iter().enumerate().skip(1) {
        power = &power * &x;
        let term = &power * c;
        numer += &term;
        if k % 2 == 0 {
            denom += &term;
        } else {
            denom -= &term;
        }
    }
    let mut result = denom
        .lu()
        .solve(&numer)
        .expect("Padé denominator is nonsingular for ||X|| <= 1/2");
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// `c_k = (2q−k)! q! / ((2q)! k! (q−k)!)`, built by the recurrence
/// `c_k = c_{k−1} (q−k+1) / ((2q−k+1) k)`.
fn pade_coefficients<T: Real>(q: usize) -> Vec<T> {
    let mut out = Vec::with_capacity(q + 1);
    let mut c = 1.0f64;
    out.push(T::one());
    for k in 1..=q {
        c *= (q - k + 1) as f64 / ((2 * q - k + 1) * k) as f64;
        out.push(T::lit(c));
    }
    out
}
