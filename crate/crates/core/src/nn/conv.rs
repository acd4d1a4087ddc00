//! 1-D convolution kernels via im2col + GEMM. Activations are laid out
//! `[batch, channels, time]`; weights `[c_out, c_in / groups, kernel]`.

use super::tensor::Real;

/// Geometry of a forward convolution `[B, c_in, len_in] -> [B, c_out, len_out]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub batch: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub len_in: usize,
    pub len_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pad: usize,
    pub groups: usize,
}

pub fn conv_len(len_in: usize, kernel: usize, stride: usize, pad: usize) -> usize {
    (len_in + 2 * pad).saturating_sub(kernel) / stride + 1
}

impl ConvGeom {
    fn cols(&self) -> usize {
        self.batch * self.len_out
    }

    fn cin_g(&self) -> usize {
        self.c_in / self.groups
    }

    fn cout_g(&self) -> usize {
        self.c_out / self.groups
    }

    /// Rows of the column matrix: `c_in * kernel`.
    fn rows(&self) -> usize {
        self.c_in * self.kernel
    }
}

/// `cols[(ci*K + k), b*len_out + t] = x[b, ci, t*stride + k - pad]`.
pub fn im2col<T: Real>(x: &[T], g: &ConvGeom) -> Vec<T> {
    let ncols = g.cols();
    let mut cols = vec![T::zero(); g.rows() * ncols];
    for ci in 0..g.c_in {
        for k in 0..g.kernel {
            let row = &mut cols[(ci * g.kernel + k) * ncols..(ci * g.kernel + k + 1) * ncols];
            for b in 0..g.batch {
                let src = &x[(b * g.c_in + ci) * g.len_in..(b * g.c_in + ci + 1) * g.len_in];
                let dst = &mut row[b * g.len_out..(b + 1) * g.len_out];
                fill_row(dst, src, k, g);
            }
        }
    }
    cols
}

#[inline]
fn valid_range(k: usize, g: &ConvGeom) -> (usize, usize) {
    // t such that 0 <= t*stride + k - pad < len_in
    let lo = if k >= g.pad { 0 } else { (g.pad - k).div_ceil(g.stride) };
    let hi = if g.len_in + g.pad > k {
        ((g.len_in + g.pad - k - 1) / g.stride + 1).min(g.len_out)
    } else {
        0
    };
    (lo, hi.max(lo))
}

#[inline]
fn fill_row<T: Real>(dst: &mut [T], src: &[T], k: usize, g: &ConvGeom) {
    let (lo, hi) = valid_range(k, g);
    if g.stride == 1 {
        let start = lo + k - g.pad;
        dst[lo..hi].copy_from_slice(&src[start..start + (hi - lo)]);
    } else {
        for (t, d) in dst.iter_mut().enumerate().take(hi).skip(lo) {
            *d = src[t * g.stride + k - g.pad];
        }
    }
}

/// Adjoint of [`im2col`]: scatter-adds columns back into `[B, c_in, len_in]`.
pub fn col2im<T: Real>(cols: &[T], g: &ConvGeom) -> Vec<T> {
    let ncols = g.cols();
    let mut x = vec![T::zero(); g.batch * g.c_in * g.len_in];
    for ci in 0..g.c_in {
        for k in 0..g.kernel {
            let (lo, hi) = valid_range(k, g);
            let row = &cols[(ci * g.kernel + k) * ncols..(ci * g.kernel + k + 1) * ncols];
            for b in 0..g.batch {
                let dst = &mut x[(b * g.c_in + ci) * g.len_in..(b * g.c_in + ci + 1) * g.len_in];
                let src = &row[b * g.len_out..(b + 1) * g.len_out];
                for t in lo..hi {
                    dst[t * g.stride + k - g.pad] += src[t];
                }
            }
        }
    }
    x
}

/// `[B, C, L]` -> `[C, B*L]`.
pub fn to_channel_major<T: Real>(y: &[T], batch: usize, c: usize, len: usize) -> Vec<T> {
    let mut out = vec![T::zero(); y.len()];
    for b in 0..batch {
        for ch in 0..c {
            out[ch * batch * len + b * len..ch * batch * len + (b + 1) * len]
                .copy_from_slice(&y[(b * c + ch) * len..(b * c + ch + 1) * len]);
        }
    }
    out
}

/// `[C, B*L]` -> `[B, C, L]`.
pub fn from_channel_major<T: Real>(m: &[T], batch: usize, c: usize, len: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m.len()];
    for b in 0..batch {
        for ch in 0..c {
            out[(b * c + ch) * len..(b * c + ch + 1) * len]
                .copy_from_slice(&m[ch * batch * len + b * len..ch * batch * len + (b + 1) * len]);
        }
    }
    out
}

/// Forward convolution (no bias). Returns `[B, c_out, len_out]`.
pub fn conv_forward<T: Real>(x: &[T], w: &[T], g: &ConvGeom) -> Vec<T> {
    let cols = im2col(x, g);
    let n = g.cols();
    let kg = g.cin_g() * g.kernel;
    let mut out = vec![T::zero(); g.c_out * n];
    for grp in 0..g.groups {
        T::gemm(
            false,
            false,
            g.cout_g(),
            n,
            kg,
            T::one(),
            &w[grp * g.cout_g() * kg..],
            &cols[grp * kg * n..],
            T::zero(),
            &mut out[grp * g.cout_g() * n..],
        );
    }
    from_channel_major(&out, g.batch, g.c_out, g.len_out)
}

/// Input gradient of [`conv_forward`] for output gradient `gy` `[B, c_out, len_out]`.
pub fn conv_backward_data<T: Real>(gy: &[T], w: &[T], g: &ConvGeom) -> Vec<T> {
    let gy2 = to_channel_major(gy, g.batch, g.c_out, g.len_out);
    conv_backward_data_cm(&gy2, w, g)
}

fn conv_backward_data_cm<T: Real>(gy2: &[T], w: &[T], g: &ConvGeom) -> Vec<T> {
    let n = g.cols();
    let kg = g.cin_g() * g.kernel;
    let mut dcols = vec![T::zero(); g.rows() * n];
    for grp in 0..g.groups {
        T::gemm(
            true,
            false,
            kg,
            n,
            g.cout_g(),
            T::one(),
            &w[grp * g.cout_g() * kg..],
            &gy2[grp * g.cout_g() * n..],
            T::zero(),
            &mut dcols[grp * kg * n..],
        );
    }
    col2im(&dcols, g)
}

/// Weight gradient `[c_out, c_in/groups, kernel]` of [`conv_forward`].
pub fn conv_backward_weight<T: Real>(x: &[T], gy: &[T], g: &ConvGeom) -> Vec<T> {
    let cols = im2col(x, g);
    let gy2 = to_channel_major(gy, g.batch, g.c_out, g.len_out);
    let n = g.cols();
    let kg = g.cin_g() * g.kernel;
    let mut dw = vec![T::zero(); g.c_out * kg];
    for grp in 0..g.groups {
        T::gemm(
            false,
            true,
            g.cout_g(),
            kg,
            n,
            T::one(),
            &gy2[grp * g.cout_g() * n..],
            &cols[grp * kg * n..],
            T::zero(),
            &mut dw[grp * g.cout_g() * kg..],
        );
    }
    dw
}

/// Per-channel sums of `[B, C, L]` (bias gradient).
pub fn channel_sums<T: Real>(gy: &[T], batch: usize, c: usize, len: usize) -> Vec<T> {
    let mut out = vec![0.0f64; c];
    for b in 0..batch {
        for (ch, o) in out.iter_mut().enumerate() {
            *o += gy[(b * c + ch) * len..(b * c + ch + 1) * len]
                .iter()
                .map(|v| v.f64())
                .sum::<f64>();
        }
    }
    out.into_iter().map(T::lit).collect()
}

pub fn add_channel_bias<T: Real>(y: &mut [T], bias: &[T], batch: usize, len: usize) {
    let c = bias.len();
    for b in 0..batch {
        for (ch, &bv) in bias.iter().enumerate() {
            for v in &mut y[(b * c + ch) * len..(b * c + ch + 1) * len] {
                *v += bv;
            }
        }
    }
}
