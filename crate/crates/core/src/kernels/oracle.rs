//! Dense convolution written in scatter form: every input element is pushed
//! to each output it contributes to. It shares no loop structure with
//! [`conv2d_grouped`](super::conv2d_grouped) and serves as its oracle.

use super::{GroupedWeights, Tensor4};

/// Dense convolution with `[n][m][kh][kw]` weights. Panics on shape errors.
pub fn dense_conv2d(x: &Tensor4, w: &GroupedWeights, stride: usize, padding: usize) -> Tensor4 {
    assert_eq!(w.g, 1, "oracle takes dense weights");
    let [batch, m, h, wd] = x.dims();
    assert_eq!(m, w.c_per_group);
    let (kh, kw) = (w.kh, w.kw);
    let h_out = (h + 2 * padding - kh) / stride + 1;
    let w_out = (wd + 2 * padding - kw) / stride + 1;
    let weights = w.data();
    let mut out = Tensor4::zeros([batch, w.n, h_out, w_out]);

    for b in 0..batch {
        for c in 0..m {
            for iy in 0..h {
                for ix in 0..wd {
                    let v = x.get(b, c, iy, ix);
                    for o in 0..w.n {
                        for ky in 0..kh {
                            let py = iy + padding;
                            if py < ky
                                || !(py - ky).is_multiple_of(stride)
                                || (py - ky) / stride >= h_out
                            {
                                continue;
                            }
                            for kx in 0..kw {
                                let px = ix + padding;
                                if px < kx
                                    || !(px - kx).is_multiple_of(stride)
                                    || (px - kx) / stride >= w_out
                                {
                                    continue;
                                }
                                let wv = weights[((o * m + c) * kh + ky) * kw + kx];
                                out.add_at(b, o, (py - ky) / stride, (px - kx) / stride, v * wv);
                            }
                        }
                    }
                }
            }
        }
    }
    out
}
