//! Randomized property suite for the reference kernels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::oracle::dense_conv2d;
use super::{block_diag_expand, conv2d_grouped, GroupedWeights, MacCounter, Tensor4};

pub const DEFAULT_SEED: u64 = 0x5EED_E26C;
pub const ORACLE_TOLERANCE: f64 = 1e-12;
pub const LINEARITY_TOLERANCE: f64 = 1e-10;

/// One randomly drawn convolution problem.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelConfig {
    pub batch: usize,
    pub groups: usize,
    pub c_per_group: usize,
    pub n: usize,
    pub height: usize,
    pub width: usize,
    pub kh: usize,
    pub kw: usize,
    pub stride: usize,
    pub padding: usize,
}

impl KernelConfig {
    pub fn in_channels(&self) -> usize {
        self.groups * self.c_per_group
    }

    pub fn output_hw(&self) -> (usize, usize) {
        (
            (self.height + 2 * self.padding - self.kh) / self.stride + 1,
            (self.width + 2 * self.padding - self.kw) / self.stride + 1,
        )
    }
}

/// Draws configs with batch <= 2, channels <= 16 and spatial size <= 8.
pub fn random_config(rng: &mut impl Rng) -> KernelConfig {
    loop {
        let groups = rng.gen_range(1..=8);
        let per_group_max = 16 / groups;
        let c_per_group = rng.gen_range(1..=per_group_max);
        let n = groups * rng.gen_range(1..=per_group_max);
        let kh = rng.gen_range(1..=3);
        let kw = rng.gen_range(1..=3);
        let stride = rng.gen_range(1..=2);
        let padding = rng.gen_range(0..=1);
        let h_out = rng.gen_range(1..=4);
        let w_out = rng.gen_range(1..=4);
        let height = ((h_out - 1) * stride + kh) as isize - 2 * padding as isize;
        let width = ((w_out - 1) * stride + kw) as isize - 2 * padding as isize;
        if !(1..=8).contains(&height) || !(1..=8).contains(&width) {
            continue;
        }
        return KernelConfig {
            batch: rng.gen_range(1..=2),
            groups,
            c_per_group,
            n,
            height: height as usize,
            width: width as usize,
            kh,
            kw,
            stride,
            padding,
        };
    }
}

pub fn random_tensor(rng: &mut impl Rng, dims: [usize; 4]) -> Tensor4 {
    let len = dims.iter().product();
    Tensor4::from_vec(dims, (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .expect("positive dims")
}

pub fn random_weights(rng: &mut impl Rng, cfg: &KernelConfig) -> GroupedWeights {
    let len = cfg.n * cfg.c_per_group * cfg.kh * cfg.kw;
    GroupedWeights::new(
        cfg.n,
        cfg.c_per_group,
        cfg.kh,
        cfg.kw,
        cfg.groups,
        (0..len).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .expect("consistent config")
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SuiteReport {
    pub seed: u64,
    pub configs: usize,
    /// Worst `|grouped - dense oracle|` over all configs.
    pub oracle_max_abs_diff: f64,
    pub oracle_failures: usize,
    pub counter_mismatches: usize,
    pub linearity_max_abs_err: f64,
    pub linearity_failures: usize,
    pub locality_violations: usize,
    pub determinism_failures: usize,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.oracle_failures == 0
            && self.counter_mismatches == 0
            && self.linearity_failures == 0
            && self.locality_violations == 0
            && self.determinism_failures == 0
    }
}

fn run(x: &Tensor4, w: &GroupedWeights, cfg: &KernelConfig) -> (Tensor4, u64) {
    let mut ctr = MacCounter::new();
    let y = conv2d_grouped(x, w, cfg.stride, cfg.padding, &mut ctr).expect("valid config");
    (y, ctr.count)
}

/// Runs `configs` random problems and checks oracle equivalence, counter
/// exactness, linearity, group locality and determinism on each.
pub fn run_suite(configs: usize, seed: u64) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SuiteReport {
        seed,
        configs,
        ..SuiteReport::default()
    };

    for _ in 0..configs {
        let cfg = random_config(&mut rng);
        let dims = [cfg.batch, cfg.in_channels(), cfg.height, cfg.width];
        let x = random_tensor(&mut rng, dims);
        let w = random_weights(&mut rng, &cfg);

        let (y, count) = run(&x, &w, &cfg);
        let reference = dense_conv2d(&x, &block_diag_expand(&w), cfg.stride, cfg.padding);
        let diff = y.max_abs_diff(&reference);
        report.oracle_max_abs_diff = report.oracle_max_abs_diff.max(diff);
        if diff > ORACLE_TOLERANCE {
            report.oracle_failures += 1;
        }

        let (h_out, w_out) = cfg.output_hw();
        let predicted =
            (cfg.batch * cfg.n * cfg.c_per_group * cfg.kh * cfg.kw * h_out * w_out) as u64;
        if count != predicted {
            report.counter_mismatches += 1;
        }

        let (again, _) = run(&x, &w, &cfg);
        if again
            .data()
            .iter()
            .zip(y.data())
            .any(|(a, b)| a.to_bits() != b.to_bits())
        {
            report.determinism_failures += 1;
        }

        let other = random_tensor(&mut rng, dims);
        let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let (combined, _) = run(&x.axpby(a, &other, b), &w, &cfg);
        let (y_other, _) = run(&other, &w, &cfg);
        let err = combined.max_abs_diff(&y.axpby(a, &y_other, b));
        report.linearity_max_abs_err = report.linearity_max_abs_err.max(err);
        if err > LINEARITY_TOLERANCE {
            report.linearity_failures += 1;
        }

        let channel = rng.gen_range(0..cfg.in_channels());
        let group = channel / cfg.c_per_group;
        let mut perturbed = x.clone();
        for bi in 0..cfg.batch {
            for yy in 0..cfg.height {
                for xx in 0..cfg.width {
                    perturbed.add_at(bi, channel, yy, xx, 1.0 + rng.gen_range(0.0..1.0));
                }
            }
        }
        let (yp, _) = run(&perturbed, &w, &cfg);
        let per_group = cfg.n / cfg.groups;
        let [_, _, ho, wo] = y.dims();
        'outer: for bi in 0..cfg.batch {
            for o in (0..cfg.n).filter(|o| o / per_group != group) {
                for yy in 0..ho {
                    for xx in 0..wo {
                        if yp.get(bi, o, yy, xx).to_bits() != y.get(bi, o, yy, xx).to_bits() {
                            report.locality_violations += 1;
                            break 'outer;
                        }
                    }
                }
            }
        }
    }
    report
}
