//! Forward elimination / back substitution for complex tridiagonal systems.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Pivots smaller than this in magnitude abort the solve.
pub const PIVOT_FLOOR: f64 = 1e-300;

/// Solves `A x = rhs` in place, where `A` has sub-diagonal `lower`
/// (`lower[i]` multiplies `x[i - 1]` in row `i`, `lower[0]` unused), main
/// diagonal `diag` and super-diagonal `upper` (`upper[i]` multiplies
/// `x[i + 1]`, last entry unused). `scratch` must have the same length.
pub fn solve_in_place(
    lower: &[Complex64],
    diag: &[Complex64],
    upper: &[Complex64],
    rhs: &mut [Complex64],
    scratch: &mut [Complex64],
) -> Result<()> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n || scratch.len() != n {
        return Err(Error::argument("tridiagonal operand lengths differ"));
    }
    if n == 0 {
        return Ok(());
    }
    let mut pivot = diag[0];
    check_pivot(pivot, 0)?;
    scratch[0] = upper[0] / pivot;
    rhs[0] /= pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * scratch[i - 1];
        check_pivot(pivot, i)?;
        scratch[i] = upper[i] / pivot;
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] -= scratch[i] * next;
    }
    Ok(())
}

#[inline]
fn check_pivot(p: Complex64, row: usize) -> Result<()> {
    if p.norm() < PIVOT_FLOOR || !p.is_finite() {
        Err(Error::NumericalBreakdown(format!(
            "pivot {p} at row {row} is below {PIVOT_FLOOR:e}"
        )))
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn apply(
        lower: &[Complex64],
        diag: &[Complex64],
        upper: &[Complex64],
        x: &[Complex64],
    ) -> Vec<Complex64> {
        let n = diag.len();
        (0..n)
            .map(|i| {
                let mut s = diag[i] * x[i];
                if i > 0 {
                    s += lower[i] * x[i - 1];
                }
                if i + 1 < n {
                    s += upper[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    #[test]
    fn recovers_known_solution() {
        let n = 7;
        let lower: Vec<_> = (0..n).map(|i| c(0.3 * i as f64, -0.2)).collect();
        let diag: Vec<_> = (0..n).map(|i| c(4.0 + i as f64, 1.0)).collect();
        let upper: Vec<_> = (0..n).map(|i| c(-0.5, 0.1 * i as f64)).collect();
        let x: Vec<_> = (0..n).map(|i| c(i as f64 - 3.0, 0.5 * i as f64)).collect();
        let mut b = apply(&lower, &diag, &upper, &x);
        let mut scratch = vec![c(0.0, 0.0); n];
        solve_in_place(&lower, &diag, &upper, &mut b, &mut scratch).unwrap();
        for (got, want) in b.iter().zip(&x) {
            assert!((got - want).norm() < 1e-12);
        }
    }

    #[test]
    fn zero_pivot_is_detected() {
        let z = c(0.0, 0.0);
        let one = c(1.0, 0.0);
        let lower = [z, one];
        let diag = [one, one];
        let upper = [one, z];
        let mut b = [one, one];
        let mut s = [z, z];
        // Second pivot: 1 - 1·1 = 0.
        let err = solve_in_place(&lower, &diag, &upper, &mut b, &mut s).unwrap_err();
        assert!(matches!(err, Error::NumericalBreakdown(_)));
    }

    #[test]
    fn length_mismatch_is_an_argument_error() {
        let one = c(1.0, 0.0);
        let mut b = [one];
        let mut s = [one, one];
        assert!(matches!(
            solve_in_place(&[one, one], &[one, one], &[one, one], &mut b, &mut s),
            Err(Error::Argument(_))
        ));
    }
}
