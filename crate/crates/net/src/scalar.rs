//! Floating-point element types. Training runs in `f32`; `f64` exists so
//! gradient checks can reach tight tolerances.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Default + Debug + Sum + AddAssign + SubAssign + MulAssign + Send + Sync + 'static
{
    const DTYPE: &'static str;

    /// `C = alpha * op(A) * op(B) + beta * C` with row-major storage; `op`
    /// transposes when the flag is set. `op(A)` is `m x k`, `op(B)` is `k x n`.
    #[allow(clippy::too_many_arguments)]
    fn gemm(m: usize, k: usize, n: usize, alpha: Self, a: &[Self], ta: bool, b: &[Self], tb: bool, beta: Self, c: &mut [Self]);

    fn of_f64(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("finite")
    }

    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("finite")
    }
}

/// Row and column strides of `op(X)` for a row-major `X`.
fn strides(ta: bool, rows: usize, cols: usize) -> (isize, isize) {
    // op(X) is rows x cols; X is stored as rows x cols, or cols x rows if transposed
    if ta {
        (1, rows as isize)
    } else {
        (cols as isize, 1)
    }
}

fn check(m: usize, k: usize, n: usize, a: usize, b: usize, c: usize) {
    assert!(a >= m * k && b >= k * n && c >= m * n, "gemm operands too small");
}

impl Scalar for f32 {
    const DTYPE: &'static str = "f32";

    fn gemm(m: usize, k: usize, n: usize, alpha: f32, a: &[f32], ta: bool, b: &[f32], tb: bool, beta: f32, c: &mut [f32]) {
        check(m, k, n, a.len(), b.len(), c.len());
        let (rsa, csa) = strides(ta, m, k);
        let (rsb, csb) = strides(tb, k, n);
        // SAFETY: operand lengths were checked against the stated shapes.
        unsafe {
            matrixmultiply::sgemm(m, k, n, alpha, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1);
        }
    }
}

impl Scalar for f64 {
    const DTYPE: &'static str = "f64";

    fn gemm(m: usize, k: usize, n: usize, alpha: f64, a: &[f64], ta: bool, b: &[f64], tb: bool, beta: f64, c: &mut [f64]) {
        check(m, k, n, a.len(), b.len(), c.len());
        let (rsa, csa) = strides(ta, m, k);
        let (rsb, csb) = strides(tb, k, n);
        // SAFETY: operand lengths were checked against the stated shapes.
        unsafe {
            matrixmultiply::dgemm(m, k, n, alpha, a.as_ptr(), rsa, csa, b.as_ptr(), rsb, csb, beta, c.as_mut_ptr(), n as isize, 1);
        }
    }
}
