//! B-spline basis over a uniform grid.
//!
//! The basis spans `intervals` equal knot spans on [lo, hi], extended
//! by `degree` uniform knots on each side, giving `intervals + degree`
//! basis functions that form a partition of unity on [lo, hi].
//! Evaluation uses the triangular (de Boor) table; the naive
//! Cox-de Boor recursion lives in the tests as an independent oracle.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SplineError {
    #[error("invalid spline grid: {0}")]
    Grid(&'static str),
    #[error("coefficient count {got} does not match basis size {want}")]
    CoeffCount { got: usize, want: usize },
}

/// Degrees above this are unused by the models and keep evaluation on
/// fixed-size stack buffers.
pub const MAX_DEGREE: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    degree: usize,
    intervals: usize,
    lo: f64,
    hi: f64,
    knots: Vec<f64>,
}

impl SplineBasis {
    /// Uniform grid with `intervals` spans on [lo, hi] and the given
    /// degree.
    pub fn uniform(intervals: usize, degree: usize, lo: f64, hi: f64) -> Result<Self, SplineError> {
        if intervals == 0 {
            return Err(SplineError::Grid("need at least one interval"));
        }
        if degree == 0 || degree > MAX_DEGREE {
            return Err(SplineError::Grid("degree must be in 1..=7"));
        }
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(SplineError::Grid("need finite lo < hi"));
        }
        let h = (hi - lo) / intervals as f64;
        let knots = (0..intervals + 2 * degree + 1)
            .map(|i| lo + (i as f64 - degree as f64) * h)
            .collect();
        Ok(Self {
            degree,
            intervals,
            lo,
            hi,
            knots,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn range(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions (= required coefficient count).
    pub fn coeff_count(&self) -> usize {
        self.intervals + self.degree
    }

    /// Inputs are clamped onto [lo, hi] before evaluation.
    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    /// Knot-span index of a clamped input: the largest i with
    /// knots[i] <= x, held inside the interior spans.
    fn span(&self, xc: f64) -> usize {
        let h = (self.hi - self.lo) / self.intervals as f64;
        let raw = ((xc - self.lo) / h).floor() as isize;
        let max = self.intervals as isize - 1;
        (raw.clamp(0, max) as usize) + self.degree
    }

    /// Evaluates the `degree + 1` basis functions active at `x`
    /// (clamped). Writes values into `values[0..=degree]` and returns
    /// the index of the first active basis function.
    pub fn eval_active(&self, x: f64, values: &mut [f64]) -> usize {
        let k = self.degree;
        debug_assert!(values.len() > k);
        let xc = self.clamp(x);
        let span = self.span(xc);
        let mut left = [0.0f64; MAX_DEGREE + 1];
        let mut right = [0.0f64; MAX_DEGREE + 1];
        values[0] = 1.0;
        for j in 1..=k {
            left[j] = xc - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - xc;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = values[r] / denom;
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }
        span - k
    }

    /// Like [`Self::eval_active`], also producing the first
    /// derivatives of the active basis functions with respect to x.
    /// Outside [lo, hi] the clamp makes the derivative zero.
    pub fn eval_active_with_deriv(
        &self,
        x: f64,
        values: &mut [f64],
        derivs: &mut [f64],
    ) -> usize {
        let k = self.degree;
        let xc = self.clamp(x);
        let span = self.span(xc);
        let inside = (self.lo..=self.hi).contains(&x);

        // Triangular table rows k-1 and k.
        let mut lower = [0.0f64; MAX_DEGREE + 1];
        let mut left = [0.0f64; MAX_DEGREE + 1];
        let mut right = [0.0f64; MAX_DEGREE + 1];
        values[0] = 1.0;
        for j in 1..=k {
            if j == k {
                lower[..k].copy_from_slice(&values[..k]);
            }
            left[j] = xc - self.knots[span + 1 - j];
            right[j] = self.knots[span + j] - xc;
            let mut saved = 0.0;
            for r in 0..j {
                let denom = right[r + 1] + left[j - r];
                let temp = values[r] / denom;
                values[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            values[j] = saved;
        }

        // d/dx B_{i,k} = k [ B_{i,k-1}/(t_{i+k}-t_i) - B_{i+1,k-1}/(t_{i+k+1}-t_{i+1}) ]
        // where row k-1 holds B_{span-k+1+r, k-1} for r in 0..k.
        let first = span - k;
        for j in 0..=k {
            if !inside {
                derivs[j] = 0.0;
                continue;
            }
            let i = first + j;
            let leftward = if j >= 1 {
                lower[j - 1] / (self.knots[i + k] - self.knots[i])
            } else {
                0.0
            };
            let rightward = if j < k {
                lower[j] / (self.knots[i + k + 1] - self.knots[i + 1])
            } else {
                0.0
            };
            derivs[j] = k as f64 * (leftward - rightward);
        }
        first
    }
}

/// Sum of coefficient-weighted basis functions at `x` (clamped onto
/// the grid range).
pub fn spline_eval(basis: &SplineBasis, coeffs: &[f64], x: f64) -> Result<f64, SplineError> {
    if coeffs.len() != basis.coeff_count() {
        return Err(SplineError::CoeffCount {
            got: coeffs.len(),
            want: basis.coeff_count(),
        });
    }
    let mut values = [0.0f64; MAX_DEGREE + 1];
    let first = basis.eval_active(x, &mut values);
    let k = basis.degree();
    let mut acc = 0.0;
    for j in 0..=k {
        acc += coeffs[first + j] * values[j];
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use approx::assert_abs_diff_eq;

    /// Naive Cox-de Boor recursion, the independent oracle.
    fn naive_basis(knots: &[f64], i: usize, k: usize, x: f64) -> f64 {
        if k == 0 {
            return if knots[i] <= x && x < knots[i + 1] {
                1.0
            } else {
                0.0
            };
        }
        let left_den = knots[i + k] - knots[i];
        let right_den = knots[i + k + 1] - knots[i + 1];
        let left = if left_den.abs() < 1e-300 {
            0.0
        } else {
            (x - knots[i]) / left_den * naive_basis(knots, i, k - 1, x)
        };
        let right = if right_den.abs() < 1e-300 {
            0.0
        } else {
            (knots[i + k + 1] - x) / right_den * naive_basis(knots, i + 1, k - 1, x)
        };
        left + right
    }

    /// Half-open spans, so only valid strictly below the grid top.
    fn naive_spline(basis: &SplineBasis, coeffs: &[f64], x: f64) -> f64 {
        let xc = basis.clamp(x);
        (0..basis.coeff_count())
            .map(|i| coeffs[i] * naive_basis(basis.knots(), i, basis.degree(), xc))
            .sum()
    }

    #[test]
    fn coefficient_count_is_intervals_plus_degree() {
        let b = SplineBasis::uniform(5, 3, -1.5, 1.5).unwrap();
        assert_eq!(b.coeff_count(), 8);
        assert_eq!(b.knots().len(), 12);
    }

    #[test]
    fn unit_coefficients_give_one_everywhere_in_range() {
        for degree in 1..=3 {
            let b = SplineBasis::uniform(5, degree, -1.5, 1.5).unwrap();
            let coeffs = vec![1.0; b.coeff_count()];
            for i in 0..=100 {
                let x = -1.5 + 3.0 * i as f64 / 100.0;
                let v = spline_eval(&b, &coeffs, x).unwrap();
                assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn zero_coefficients_give_zero() {
        let b = SplineBasis::uniform(5, 3, -1.5, 1.5).unwrap();
        let coeffs = vec![0.0; b.coeff_count()];
        assert_eq!(spline_eval(&b, &coeffs, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn matches_naive_cox_de_boor_recursion() {
        let b = SplineBasis::uniform(5, 3, -1.5, 1.5).unwrap();
        let mut rng = Rng::new(31);
        let coeffs: Vec<f64> = (0..b.coeff_count()).map(|_| rng.normal()).collect();
        for i in 0..100 {
            let x = -1.5 + 3.0 * i as f64 / 100.0;
            let fast = spline_eval(&b, &coeffs, x).unwrap();
            let slow = naive_spline(&b, &coeffs, x);
            assert_abs_diff_eq!(fast, slow, epsilon = 1e-12);
        }
        // The closed top endpoint equals the left limit of the oracle.
        let fast_hi = spline_eval(&b, &coeffs, 1.5).unwrap();
        let slow_near_hi = naive_spline(&b, &coeffs, 1.5 - 1e-9);
        assert_abs_diff_eq!(fast_hi, slow_near_hi, epsilon = 1e-7);
    }

    #[test]
    fn clamps_outside_the_grid() {
        let b = SplineBasis::uniform(5, 3, -1.0, 1.0).unwrap();
        let mut rng = Rng::new(8);
        let coeffs: Vec<f64> = (0..b.coeff_count()).map(|_| rng.normal()).collect();
        let at_hi = spline_eval(&b, &coeffs, 1.0).unwrap();
        assert_eq!(spline_eval(&b, &coeffs, 7.5).unwrap(), at_hi);
        let at_lo = spline_eval(&b, &coeffs, -1.0).unwrap();
        assert_eq!(spline_eval(&b, &coeffs, -3.0).unwrap(), at_lo);
    }

    #[test]
    fn first_derivative_is_continuous_across_interior_knots() {
        // C^{k-1} smoothness: for k=3 the first derivative has no jump.
        let b = SplineBasis::uniform(5, 3, -1.5, 1.5).unwrap();
        let mut rng = Rng::new(77);
        let coeffs: Vec<f64> = (0..b.coeff_count()).map(|_| rng.normal()).collect();
        let h = 1e-7;
        for i in 1..5 {
            let knot = -1.5 + 3.0 * i as f64 / 5.0;
            let d = |x: f64| {
                (spline_eval(&b, &coeffs, x + h).unwrap()
                    - spline_eval(&b, &coeffs, x - h).unwrap())
                    / (2.0 * h)
            };
            let jump = (d(knot + 2.0 * h) - d(knot - 2.0 * h)).abs();
            assert!(jump < 1e-5, "derivative jump {jump} at knot {knot}");
        }
    }

    #[test]
    fn analytic_derivative_matches_finite_differences() {
        let b = SplineBasis::uniform(5, 3, -1.5, 1.5).unwrap();
        let mut rng = Rng::new(5);
        let coeffs: Vec<f64> = (0..b.coeff_count()).map(|_| rng.normal()).collect();
        for i in 0..50 {
            let x = -1.4 + 2.8 * i as f64 / 49.0;
            let mut values = [0.0; MAX_DEGREE + 1];
            let mut derivs = [0.0; MAX_DEGREE + 1];
            let first = b.eval_active_with_deriv(x, &mut values, &mut derivs);
            let analytic: f64 = (0..=3).map(|j| coeffs[first + j] * derivs[j]).sum();
            let h = 1e-6;
            let numeric = (spline_eval(&b, &coeffs, x + h).unwrap()
                - spline_eval(&b, &coeffs, x - h).unwrap())
                / (2.0 * h);
            assert_abs_diff_eq!(analytic, numeric, epsilon = 1e-6);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(SplineBasis::uniform(0, 3, -1.0, 1.0).is_err());
        assert!(SplineBasis::uniform(5, 0, -1.0, 1.0).is_err());
        assert!(SplineBasis::uniform(5, 3, 1.0, -1.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn partition_of_unity(x in -1.5f64..=1.5, degree in 1usize..=3) {
            let b = SplineBasis::uniform(5, degree, -1.5, 1.5).unwrap();
            let coeffs = vec![1.0; b.coeff_count()];
            let v = spline_eval(&b, &coeffs, x).unwrap();
            proptest::prop_assert!((v - 1.0).abs() < 1e-12);
        }
    }
}
