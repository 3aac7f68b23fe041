//! Naive grouped convolution with an instrumented MAC counter.
//!
//! These kernels are the executable ground truth for the cost algebra: the
//! counter records every multiply-accumulate, including taps that fall on
//! zero padding, so it equals `N * n * (m / g) * kh * kw * H_out * W_out`.

pub mod oracle;
pub mod verify;

use crate::error::KernelError;

/// Dense NCHW tensor of `f64`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor4 {
    dims: [usize; 4],
    data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(dims: [usize; 4]) -> Self {
        Tensor4 {
            dims,
            data: vec![0.0; dims.iter().product()],
        }
    }

    pub fn from_vec(dims: [usize; 4], data: Vec<f64>) -> Result<Self, KernelError> {
        if dims.contains(&0) {
            return Err(KernelError::Dimension(format!(
                "zero dimension in {dims:?}"
            )));
        }
        if data.len() != dims.iter().product::<usize>() {
            return Err(KernelError::Dimension(format!(
                "{} values for dims {dims:?}",
                data.len()
            )));
        }
        Ok(Tensor4 { dims, data })
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn index(&self, b: usize, c: usize, y: usize, x: usize) -> usize {
        let [_, cs, hs, ws] = self.dims;
        ((b * cs + c) * hs + y) * ws + x
    }

    pub fn get(&self, b: usize, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.index(b, c, y, x)]
    }

    pub fn set(&mut self, b: usize, c: usize, y: usize, x: usize, v: f64) {
        let i = self.index(b, c, y, x);
        self.data[i] = v;
    }

    pub fn add_at(&mut self, b: usize, c: usize, y: usize, x: usize, v: f64) {
        let i = self.index(b, c, y, x);
        self.data[i] += v;
    }

    /// `a * self + b * other`.
    pub fn axpby(&self, a: f64, other: &Tensor4, b: f64) -> Tensor4 {
        assert_eq!(self.dims, other.dims);
        Tensor4 {
            dims: self.dims,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    pub fn max_abs_diff(&self, other: &Tensor4) -> f64 {
        assert_eq!(self.dims, other.dims);
        self.data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

/// Filters of a grouped convolution, laid out `[n][c_per_group][kh][kw]`.
/// Output channel `o` belongs to group `o / (n / g)` and reads input
/// channels `group * c_per_group .. (group + 1) * c_per_group`.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupedWeights {
    pub n: usize,
    pub c_per_group: usize,
    pub kh: usize,
    pub kw: usize,
    pub g: usize,
    data: Vec<f64>,
}

impl GroupedWeights {
    pub fn new(
        n: usize,
        c_per_group: usize,
        kh: usize,
        kw: usize,
        g: usize,
        data: Vec<f64>,
    ) -> Result<Self, KernelError> {
        if n == 0 || c_per_group == 0 || kh == 0 || kw == 0 || g == 0 {
            return Err(KernelError::Dimension(
                "weight dimensions must be at least 1".into(),
            ));
        }
        if !n.is_multiple_of(g) {
            return Err(KernelError::Dimension(format!(
                "g = {g} does not divide n = {n}"
            )));
        }
        if data.len() != n * c_per_group * kh * kw {
            return Err(KernelError::Dimension(format!(
                "{} weights for [{n}][{c_per_group}][{kh}][{kw}]",
                data.len()
            )));
        }
        Ok(GroupedWeights {
            n,
            c_per_group,
            kh,
            kw,
            g,
            data,
        })
    }

    /// Total input channels consumed, `c_per_group * g`.
    pub fn in_channels(&self) -> usize {
        self.c_per_group * self.g
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, o: usize, c: usize, ky: usize, kx: usize) -> f64 {
        self.data[((o * self.c_per_group + c) * self.kh + ky) * self.kw + kx]
    }

    /// Predicted MAC count for one run over `batch` images.
    pub fn macs(&self, batch: usize, h_out: usize, w_out: usize) -> u64 {
        (batch * self.n * self.c_per_group * self.kh * self.kw * h_out * w_out) as u64
    }
}

/// Number of multiply-accumulates executed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MacCounter {
    pub count: u64,
}

impl MacCounter {
    pub fn new() -> Self {
        Self::default()
    }
}

fn output_size(
    axis: &'static str,
    size: usize,
    kernel: usize,
    stride: usize,
    padding: usize,
) -> Result<usize, KernelError> {
    let span = size + 2 * padding;
    if stride == 0 || span < kernel || !(span - kernel).is_multiple_of(stride) {
        return Err(KernelError::NonIntegral {
            axis,
            size,
            padding,
            kernel,
            stride,
        });
    }
    Ok((span - kernel) / stride + 1)
}

/// Grouped 2-D convolution, zero padding, no bias.
pub fn conv2d_grouped(
    x: &Tensor4,
    w: &GroupedWeights,
    stride: usize,
    padding: usize,
    counter: &mut MacCounter,
) -> Result<Tensor4, KernelError> {
    let [batch, channels, h, wd] = x.dims();
    if channels != w.in_channels() {
        return Err(KernelError::Dimension(format!(
            "input has {channels} channels, weights expect {} ({} groups of {})",
            w.in_channels(),
            w.g,
            w.c_per_group
        )));
    }
    let h_out = output_size("height", h, w.kh, stride, padding)?;
    let w_out = output_size("width", wd, w.kw, stride, padding)?;
    let per_group = w.n / w.g;
    let mut out = Tensor4::zeros([batch, w.n, h_out, w_out]);
    let mut macs = 0u64;

    for b in 0..batch {
        for o in 0..w.n {
            let first_channel = (o / per_group) * w.c_per_group;
            for oy in 0..h_out {
                for ox in 0..w_out {
                    let mut acc = 0.0;
                    for c in 0..w.c_per_group {
                        for ky in 0..w.kh {
                            for kx in 0..w.kw {
                                macs += 1;
                                // padded taps multiply by zero
                                let iy = (oy * stride + ky).checked_sub(padding);
                                let ix = (ox * stride + kx).checked_sub(padding);
                                if let (Some(iy), Some(ix)) = (iy, ix) {
                                    if iy < h && ix < wd {
                                        acc += x.get(b, first_channel + c, iy, ix)
                                            * w.get(o, c, ky, kx);
                                    }
                                }
                            }
                        }
                    }
                    out.set(b, o, oy, ox, acc);
                }
            }
        }
    }
    counter.count += macs;
    Ok(out)
}

/// Dense (`g = 1`) weights with the grouped filters on the block diagonal and
/// zeros elsewhere.
pub fn block_diag_expand(w: &GroupedWeights) -> GroupedWeights {
    if w.g == 1 {
        return w.clone();
    }
    let m = w.in_channels();
    let per_group = w.n / w.g;
    let taps = w.kh * w.kw;
    let mut data = vec![0.0; w.n * m * taps];
    for o in 0..w.n {
        let first_channel = (o / per_group) * w.c_per_group;
        for c in 0..w.c_per_group {
            let src = (o * w.c_per_group + c) * taps;
            let dst = (o * m + first_channel + c) * taps;
            data[dst..dst + taps].copy_from_slice(&w.data[src..src + taps]);
        }
    }
    GroupedWeights {
        n: w.n,
        c_per_group: m,
        kh: w.kh,
        kw: w.kw,
        g: 1,
        data,
    }
}

/// Grouped `kxk` convolution (stride 1, same padding) followed by a dense
/// pointwise convolution.
pub fn module_forward(
    x: &Tensor4,
    grouped: &GroupedWeights,
    pointwise: &GroupedWeights,
    counter: &mut MacCounter,
) -> Result<Tensor4, KernelError> {
    if pointwise.kh != 1 || pointwise.kw != 1 || pointwise.g != 1 {
        return Err(KernelError::Dimension(
            "pointwise weights must be 1x1 with g = 1".into(),
        ));
    }
    if pointwise.c_per_group != grouped.n {
        return Err(KernelError::Dimension(format!(
            "pointwise expects {} channels, grouped layer produces {}",
            pointwise.c_per_group, grouped.n
        )));
    }
    if grouped.kh != grouped.kw || grouped.kh.is_multiple_of(2) {
        return Err(KernelError::Dimension(
            "grouped kernel must be square and odd".into(),
        ));
    }
    let mid = conv2d_grouped(x, grouped, 1, grouped.kh / 2, counter)?;
    conv2d_grouped(&mid, pointwise, 1, 0, counter)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_pointwise(c: usize) -> GroupedWeights {
        let mut data = vec![0.0; c * c];
        for i in 0..c {
            data[i * c + i] = 1.0;
        }
        GroupedWeights::new(c, c, 1, 1, 1, data).unwrap()
    }

    fn ramp(dims: [usize; 4]) -> Tensor4 {
        let len = dims.iter().product();
        Tensor4::from_vec(dims, (0..len).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap()
    }

    #[test]
    fn identity_convolution() {
        let x = ramp([2, 3, 4, 5]);
        let mut ctr = MacCounter::new();
        let y = conv2d_grouped(&x, &identity_pointwise(3), 1, 0, &mut ctr).unwrap();
        assert_eq!(y, x);
        assert_eq!(ctr.count, 2 * 3 * 3 * 4 * 5);
    }

    #[test]
    fn padded_taps_are_counted() {
        let x = ramp([1, 2, 3, 3]);
        let w = GroupedWeights::new(2, 1, 3, 3, 2, vec![1.0; 18]).unwrap();
        let mut ctr = MacCounter::new();
        let y = conv2d_grouped(&x, &w, 1, 1, &mut ctr).unwrap();
        assert_eq!(y.dims(), [1, 2, 3, 3]);
        assert_eq!(ctr.count, w.macs(1, 3, 3));
        // corner sees a 2x2 window of its own channel
        let corner = x.get(0, 1, 0, 0) + x.get(0, 1, 0, 1) + x.get(0, 1, 1, 0) + x.get(0, 1, 1, 1);
        assert!((y.get(0, 1, 0, 0) - corner).abs() < 1e-15);
    }

    #[test]
    fn shape_errors() {
        let x = ramp([1, 4, 5, 5]);
        let w = GroupedWeights::new(4, 3, 3, 3, 1, vec![0.0; 108]).unwrap();
        let mut ctr = MacCounter::new();
        assert!(matches!(
            conv2d_grouped(&x, &w, 1, 0, &mut ctr),
            Err(KernelError::Dimension(_))
        ));
        let w = GroupedWeights::new(4, 2, 2, 2, 2, vec![0.0; 32]).unwrap();
        assert!(matches!(
            conv2d_grouped(&x, &w, 2, 0, &mut ctr),
            Err(KernelError::NonIntegral { .. })
        ));
        assert_eq!(ctr.count, 0);
        assert!(GroupedWeights::new(3, 1, 1, 1, 2, vec![0.0; 3]).is_err());
        assert!(Tensor4::from_vec([1, 1, 2, 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn expand_identity_cases() {
        let w = GroupedWeights::new(2, 3, 1, 1, 1, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(block_diag_expand(&w), w);
        let dw = GroupedWeights::new(4, 1, 1, 1, 4, vec![1.0; 4]).unwrap();
        assert_eq!(block_diag_expand(&dw), identity_pointwise(4));
    }

    #[test]
    fn expand_two_groups_nonzeros() {
        let w = GroupedWeights::new(4, 2, 3, 3, 2, vec![1.0; 4 * 2 * 9]).unwrap();
        let dense = block_diag_expand(&w);
        assert_eq!(dense.c_per_group, 4);
        assert_eq!(
            dense.data().iter().filter(|&&v| v != 0.0).count(),
            2 * (2 * 2) * 9
        );
        for o in 0..4 {
            for c in 0..4 {
                let expected = if o / 2 == c / 2 { 1.0 } else { 0.0 };
                assert_eq!(dense.get(o, c, 1, 1), expected);
            }
        }
    }

    #[test]
    fn module_with_identity_pointwise() {
        let x = ramp([1, 4, 5, 5]);
        let w3 =
            GroupedWeights::new(4, 2, 3, 3, 2, (0..72).map(|i| i as f64 / 50.0).collect()).unwrap();
        let mut a = MacCounter::new();
        let y = module_forward(&x, &w3, &identity_pointwise(4), &mut a).unwrap();
        let mut b = MacCounter::new();
        let z = conv2d_grouped(&x, &w3, 1, 1, &mut b).unwrap();
        assert_eq!(y, z);
        assert_eq!(a.count, b.count + 4 * 4 * 25);
    }

    #[test]
    fn module_zero_grouped_weights() {
        let x = ramp([1, 4, 5, 5]);
        let w3 = GroupedWeights::new(4, 2, 3, 3, 2, vec![0.0; 72]).unwrap();
        let w1 = GroupedWeights::new(6, 4, 1, 1, 1, vec![1.5; 24]).unwrap();
        let y = module_forward(&x, &w3, &w1, &mut MacCounter::new()).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
        assert_eq!(y.dims(), [1, 6, 5, 5]);
    }

    #[test]
    fn module_chaining_mismatch() {
        let x = ramp([1, 4, 5, 5]);
        let w3 = GroupedWeights::new(4, 2, 3, 3, 2, vec![0.0; 72]).unwrap();
        let w1 = GroupedWeights::new(6, 5, 1, 1, 1, vec![1.5; 30]).unwrap();
        assert!(module_forward(&x, &w3, &w1, &mut MacCounter::new()).is_err());
    }
}
