//! Seeded sampling utilities and the parallel point-sweep primitive.
//!
//! All randomness flows through [`SplitMix64`] so that every run of a suite
//! is reproducible from a single 64-bit seed. Per-point substreams are
//! derived from the point index, never from execution order, which keeps
//! parallel and sequential sweeps bit-identical.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 generator: tiny state, full 64-bit period, cheap splitting.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Independent substream for item `index`; order-free determinism.
    pub fn substream(seed: u64, index: u64) -> Self {
        SplitMix64::new(seed ^ (index.wrapping_add(1)).wrapping_mul(GOLDEN_GAMMA))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1) with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Vector with independent components uniform in [-1, 1].
    pub fn vector_in_cube(&mut self, dim: usize) -> DVector<f64> {
        DVector::from_fn(dim, |_, _| self.uniform(-1.0, 1.0))
    }

    /// Unit vector: cube sample normalized, redrawn while degenerate.
    pub fn unit_vector(&mut self, dim: usize) -> DVector<f64> {
        loop {
            let v = self.vector_in_cube(dim);
            let n = v.norm();
            if n > 1e-3 {
                return v / n;
            }
        }
    }
}

/// Sampling counts, seed and the tolerance ladder for one suite run.
///
/// `tol_algebraic` gates identities evaluated with exact derivatives,
/// `tol_fd` gates anything crossing one finite-difference layer, and
/// `tol_angle` is the slant-classification threshold in radians.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub seed: u64,
    pub point_count: usize,
    pub dirs_per_point: usize,
    pub tol_algebraic: f64,
    pub tol_fd: f64,
    pub tol_angle: f64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            seed: 42,
            point_count: 100,
            dirs_per_point: 20,
            tol_algebraic: 1e-9,
            tol_fd: 1e-6,
            tol_angle: 1e-6,
        }
    }
}

impl SamplingPlan {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Relative margin kept clear of chart-box edges when sampling.
pub const BOX_MARGIN: f64 = 1e-3;

/// `count` points uniform over the box, shrunk by [`BOX_MARGIN`] per side.
pub fn sample_chart_points(
    chart_box: &[(f64, f64)],
    count: usize,
    seed: u64,
) -> Vec<DVector<f64>> {
    let mut rng = SplitMix64::new(seed);
    (0..count)
        .map(|_| {
            DVector::from_fn(chart_box.len(), |i, _| {
                let (lo, hi) = chart_box[i];
                let margin = BOX_MARGIN * (hi - lo);
                rng.uniform(lo + margin, hi - margin)
            })
        })
        .collect()
}

/// Order-preserving map over sample items, parallel when the `parallel`
/// feature is enabled. Results are identical to [`map_items_seq`].
pub fn map_items<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    I: Sync,
    T: Send,
    F: Fn(&I) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Sequential reference path for [`map_items`]; kept unconditionally for
/// benchmarking the parallel speedup.
pub fn map_items_seq<I, T, F>(items: &[I], f: F) -> Vec<T>
where
    F: Fn(&I) -> T,
{
    items.iter().map(f).collect()
}
