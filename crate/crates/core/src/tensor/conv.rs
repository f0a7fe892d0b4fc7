//! Strided cross-correlation kernels over three spatial axes.
//!
//! Both directions share one geometry: a convolution maps the *big* grid to
//! the *small* grid (gather), a transposed convolution maps small to big
//! (scatter) with the same weight layout `[c_small, c_big, kd, kh, kw]`.
//! Two-dimensional layers are run with a unit leading axis.
//!
//! Each sample is unrolled into an `f64` column matrix (im2col) and reduced
//! with a single-threaded GEMM, so results are bit-reproducible.

use super::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct ConvGeom {
    pub big: [usize; 3],
    pub small: [usize; 3],
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub pad: [usize; 3],
}

/// Output extent of a strided correlation along one axis.
pub(crate) fn conv_out_extent(input: usize, kernel: usize, stride: usize, pad: usize) -> Option<usize> {
    let padded = input + 2 * pad;
    if padded < kernel || stride == 0 {
        return None;
    }
    Some((padded - kernel) / stride + 1)
}

impl ConvGeom {
    pub fn big_len(&self) -> usize {
        self.big.iter().product()
    }

    pub fn small_len(&self) -> usize {
        self.small.iter().product()
    }

    pub fn taps(&self) -> usize {
        self.kernel.iter().product()
    }

    /// Valid kernel offsets along `axis` for small coordinate `s`.
    fn tap_range(&self, axis: usize, s: usize) -> (usize, usize) {
        let origin = self.origin(axis, s);
        let lo = (-origin).max(0) as usize;
        let hi = (self.big[axis] as isize - origin).clamp(0, self.kernel[axis] as isize) as usize;
        (lo.min(hi), hi)
    }

    fn origin(&self, axis: usize, s: usize) -> isize {
        (s * self.stride[axis]) as isize - self.pad[axis] as isize
    }

    /// Big-grid index for every (tap, small position), `None` in the padding.
    pub fn col_table(&self) -> ColTable {
        let [sd, sh, sw] = self.small;
        let [_, bh, bw] = self.big;
        let [kd, kh, kw] = self.kernel;
        let small_len = self.small_len();
        let mut idx = vec![NONE; self.taps() * small_len];
        let mut s = 0;
        for d in 0..sd {
            let (d0, d1) = self.tap_range(0, d);
            let od = self.origin(0, d);
            for h in 0..sh {
                let (h0, h1) = self.tap_range(1, h);
                let oh = self.origin(1, h);
                for w in 0..sw {
                    let (w0, w1) = self.tap_range(2, w);
                    let ow = self.origin(2, w);
                    for td in d0..d1 {
                        let bd = (od + td as isize) as usize;
                        for th in h0..h1 {
                            let bhi = (oh + th as isize) as usize;
                            let row_big = (bd * bh + bhi) * bw;
                            let row_tap = (td * kh + th) * kw;
                            for tw in w0..w1 {
                                let bwi = (ow + tw as isize) as usize;
                                idx[(row_tap + tw) * small_len + s] = (row_big + bwi) as u32;
                            }
                        }
                    }
                    s += 1;
                }
            }
        }
        debug_assert_eq!(kd * kh * kw, self.taps());
        ColTable { idx }
    }
}

const NONE: u32 = u32::MAX;

/// Row `tap`, column `s` holds the big index read by small position `s`
/// through kernel tap `tap`.
pub(crate) struct ColTable {
    idx: Vec<u32>,
}

impl ColTable {
    #[cfg(test)]
    fn valid_taps(&self, s: usize, small_len: usize) -> usize {
        self.idx.iter().skip(s).step_by(small_len).filter(|&&i| i != NONE).count()
    }

    /// `cols[(ic·taps + tap)·S + s] = big[ic, idx[tap, s]]`.
    fn im2col<A: Real>(&self, big: &[A], c_big: usize, big_len: usize, cols: &mut [f64]) {
        let rows = self.idx.len();
        for ic in 0..c_big {
            let x = &big[ic * big_len..][..big_len];
            for (c, &i) in cols[ic * rows..][..rows].iter_mut().zip(&self.idx) {
                *c = if i == NONE { 0.0 } else { x[i as usize].as_f64() };
            }
        }
    }

    /// Adjoint of [`ColTable::im2col`], accumulating into `big`.
    fn col2im(&self, cols: &[f64], c_big: usize, big_len: usize, big: &mut [f64]) {
        let rows = self.idx.len();
        for ic in 0..c_big {
            let x = &mut big[ic * big_len..][..big_len];
            for (&c, &i) in cols[ic * rows..][..rows].iter().zip(&self.idx) {
                if i != NONE {
                    x[i as usize] += c;
                }
            }
        }
    }
}

fn to_f64<T: Real>(x: &[T]) -> Vec<f64> {
    x.iter().map(|v| v.as_f64()).collect()
}

/// Strided view of a row-major `f64` matrix.
#[derive(Clone, Copy)]
pub(crate) struct Mat<'a> {
    pub data: &'a [f64],
    pub rows: usize,
    pub cols: usize,
    pub transposed: bool,
}

impl<'a> Mat<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix buffer size");
        Mat { data, rows, cols, transposed: false }
    }

    pub fn t(self) -> Self {
        Mat { transposed: !self.transposed, ..self }
    }

    fn shape(&self) -> (usize, usize) {
        if self.transposed { (self.cols, self.rows) } else { (self.rows, self.cols) }
    }

    fn strides(&self) -> (isize, isize) {
        if self.transposed { (1, self.cols as isize) } else { (self.cols as isize, 1) }
    }
}

/// `c += a · b` with `c` row-major `[m, n]`.
pub(crate) fn gemm_acc(a: Mat, b: Mat, c: &mut [f64]) {
    let (m, k) = a.shape();
    let (k2, n) = b.shape();
    assert_eq!(k, k2, "inner dimensions");
    assert_eq!(c.len(), m * n, "output buffer size");
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    let (rsa, csa) = a.strides();
    let (rsb, csb) = b.strides();
    // SAFETY: the asserts above and in `Mat::new` bound every index the
    // kernel touches by the lengths of `a.data`, `b.data` and `c`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            1.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `small[n, oc, s] = bias[oc] + Σ_ic Σ_tap w[oc, ic, tap] · big[n, ic, s·stride − pad + tap]`
pub(crate) fn gather<A: Real, B: Real>(
    big: &[A],
    weight: &[B],
    bias: Option<&[B]>,
    batch: usize,
    c_big: usize,
    c_small: usize,
    geom: &ConvGeom,
) -> Vec<f64> {
    let (big_len, small_len) = (geom.big_len(), geom.small_len());
    let k = c_big * geom.taps();
    let table = geom.col_table();
    let w = to_f64(weight);
    let mut cols = vec![0.0; k * small_len];
    let mut out = vec![0.0; batch * c_small * small_len];
    for (n, dst) in out.chunks_exact_mut(c_small * small_len).enumerate() {
        if let Some(b) = bias {
            for (row, bv) in dst.chunks_exact_mut(small_len).zip(b) {
                row.fill(bv.as_f64());
            }
        }
        table.im2col(&big[n * c_big * big_len..][..c_big * big_len], c_big, big_len, &mut cols);
        gemm_acc(Mat::new(&w, c_small, k), Mat::new(&cols, k, small_len), dst);
    }
    out
}

/// Adjoint of [`gather`] without bias: spreads each small value back over the
/// big positions it was computed from.
pub(crate) fn scatter<A: Real, B: Real>(
    small: &[A],
    weight: &[B],
    batch: usize,
    c_big: usize,
    c_small: usize,
    geom: &ConvGeom,
) -> Vec<f64> {
    let (big_len, small_len) = (geom.big_len(), geom.small_len());
    let k = c_big * geom.taps();
    let table = geom.col_table();
    let w = to_f64(weight);
    let mut cols = vec![0.0; k * small_len];
    let mut acc = vec![0.0f64; batch * c_big * big_len];
    for (n, dst) in acc.chunks_exact_mut(c_big * big_len).enumerate() {
        let g = to_f64(&small[n * c_small * small_len..][..c_small * small_len]);
        cols.fill(0.0);
        gemm_acc(Mat::new(&w, c_small, k).t(), Mat::new(&g, c_small, small_len), &mut cols);
        table.col2im(&cols, c_big, big_len, dst);
    }
    acc
}

/// `gw[oc, ic, tap] = Σ_n Σ_s small[n, oc, s] · big[n, ic, s·stride − pad + tap]`
pub(crate) fn weight_grad<A: Real, B: Real>(
    big: &[A],
    small: &[B],
    batch: usize,
    c_big: usize,
    c_small: usize,
    geom: &ConvGeom,
) -> Vec<f64> {
    let (big_len, small_len) = (geom.big_len(), geom.small_len());
    let k = c_big * geom.taps();
    let table = geom.col_table();
    let mut cols = vec![0.0; k * small_len];
    let mut acc = vec![0.0f64; c_small * k];
    for n in 0..batch {
        let g = to_f64(&small[n * c_small * small_len..][..c_small * small_len]);
        table.im2col(&big[n * c_big * big_len..][..c_big * big_len], c_big, big_len, &mut cols);
        gemm_acc(Mat::new(&g, c_small, small_len), Mat::new(&cols, k, small_len).t(), &mut acc);
    }
    acc
}

/// Per-channel sum over batch and spatial positions.
pub(crate) fn channel_sums<T: Real>(x: &[T], batch: usize, channels: usize, len: usize) -> Vec<f64> {
    let mut acc = vec![0.0f64; channels];
    for n in 0..batch {
        for (c, a) in acc.iter_mut().enumerate() {
            *a += x[(n * channels + c) * len..][..len]
                .iter()
                .map(|v| v.as_f64())
                .sum::<f64>();
        }
    }
    acc
}

/// Adds a per-channel bias in place.
pub(crate) fn add_channel_bias(acc: &mut [f64], bias: &[f64], batch: usize, len: usize) {
    let channels = bias.len();
    for n in 0..batch {
        for (c, b) in bias.iter().enumerate() {
            for v in &mut acc[(n * channels + c) * len..][..len] {
                *v += b;
            }
        }
    }
}
