use num_traits::{Float, FromPrimitive, ToPrimitive};
use std::fmt::{Debug, Display};

/// Compute precision of a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Single,
    Double,
}

/// Element type of a [`Tensor`](super::Tensor): `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    const PRECISION: Precision;

    /// `c ← a·b + beta·c` for strided row/column layouts.
    ///
    /// # Safety
    /// Strides and dimensions must describe regions inside the given slices.
    #[allow(clippy::too_many_arguments)]
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    );

    fn lit(v: f64) -> Self {
        Self::from_f64(v).unwrap()
    }
}

impl Scalar for f32 {
    const PRECISION: Precision = Precision::Single;

    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: *const f32,
        rsa: isize,
        csa: isize,
        b: *const f32,
        rsb: isize,
        csb: isize,
        beta: f32,
        c: *mut f32,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::sgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

impl Scalar for f64 {
    const PRECISION: Precision = Precision::Double;

    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        a: *const f64,
        rsa: isize,
        csa: isize,
        b: *const f64,
        rsb: isize,
        csb: isize,
        beta: f64,
        c: *mut f64,
        rsc: isize,
        csc: isize,
    ) {
        matrixmultiply::dgemm(m, k, n, 1.0, a, rsa, csa, b, rsb, csb, beta, c, rsc, csc);
    }
}

/// `out (+)= a · b` with optional transposes, all buffers row-major.
///
/// `a` is stored as `a_rows × a_cols` and `b` as `b_rows × b_cols`; the
/// transposes are realised through strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm_into<T: Scalar>(
    a: &[T],
    a_rows: usize,
    a_cols: usize,
    trans_a: bool,
    b: &[T],
    b_rows: usize,
    b_cols: usize,
    trans_b: bool,
    out: &mut [T],
    accumulate: bool,
) {
    let (m, k, rsa, csa) = if trans_a {
        (a_cols, a_rows, 1isize, a_cols as isize)
    } else {
        (a_rows, a_cols, a_cols as isize, 1isize)
    };
    let (kb, n, rsb, csb) = if trans_b {
        (b_cols, b_rows, 1isize, b_cols as isize)
    } else {
        (b_rows, b_cols, b_cols as isize, 1isize)
    };
    debug_assert_eq!(k, kb);
    debug_assert_eq!(out.len(), m * n);
    debug_assert_eq!(a.len(), a_rows * a_cols);
    debug_assert_eq!(b.len(), b_rows * b_cols);
    if m == 0 || n == 0 {
        return;
    }
    let beta = if accumulate { T::one() } else { T::zero() };
    // SAFETY: the strides above address exactly the a/b/out buffers whose
    // lengths are checked against the dimensions.
    unsafe {
        T::gemm(
            m,
            k,
            n,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            out.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}
