//! Reproducible random streams.
//!
//! Every stream is a ChaCha8 generator (RFC 7539 block function, 8 rounds)
//! keyed by `splitmix64(seed ^ domain)` and positioned on stream `index`, so
//! path `j` of a simulation draws from its own substream no matter how the
//! batch is chunked. Uniforms use the top 53 bits of each `u64` shifted to the
//! open interval `(0, 1)`; Gaussians come from the inverse normal CDF
//! (Acklam's rational approximation, relative error below 1.2e-9).

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains keep independent uses of one seed disjoint.
pub mod domain {
    pub const BROWNIAN: u64 = 0x5349_475f_424d_0001;
    pub const BATCH: u64 = 0x5349_475f_4254_0002;
    pub const INIT: u64 = 0x5349_475f_494e_0003;
    pub const ORACLE: u64 = 0x5349_475f_4f52_0004;
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64, domain: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ domain));
        rng.set_stream(index);
        Stream { rng }
    }

    /// The underlying generator, for `rand` adaptors.
    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn normal(&mut self) -> f64 {
        inverse_normal_cdf(self.uniform())
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        // Lemire's multiply-shift; the bias is below 2^-40 for the sizes used here.
        ((self.rng.next_u64() as u128 * n as u128) >> 64) as usize
    }
}

/// Acklam's inverse of the standard normal CDF for `p` in `(0, 1)`.
pub fn inverse_normal_cdf(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map({ let mut s = Stream::new(7, domain::BROWNIAN, 3); move |_| s.next_u64() }).collect();
        let b: Vec<u64> = (0..4).map({ let mut s = Stream::new(7, domain::BROWNIAN, 3); move |_| s.next_u64() }).collect();
        let c: Vec<u64> = (0..4).map({ let mut s = Stream::new(7, domain::BROWNIAN, 4); move |_| s.next_u64() }).collect();
        let e: Vec<u64> = (0..4).map({ let mut s = Stream::new(7, domain::BATCH, 3); move |_| s.next_u64() }).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, e);
    }

    #[test]
    fn inverse_cdf_symmetry_and_values() {
        assert!(inverse_normal_cdf(0.5).abs() < 1e-15);
        for &p in &[0.01, 0.2, 0.4] {
            assert!((inverse_normal_cdf(p) + inverse_normal_cdf(1.0 - p)).abs() < 1e-8);
        }
        assert!((inverse_normal_cdf(1e-10) + 6.361_340_902_404_056).abs() < 1e-7);
        // Phi(1.959963984540054) = 0.975
        assert!((inverse_normal_cdf(0.975) - 1.959_963_984_540_054).abs() < 1e-8);
        assert!((inverse_normal_cdf(0.001) + 3.090_232_306_167_813_5).abs() < 1e-8);
    }

    #[test]
    fn uniform_in_open_interval() {
        let mut s = Stream::new(1, 0, 0);
        for _ in 0..10_000 {
            let u = s.uniform();
            assert!(u > 0.0 && u < 1.0);
        }
    }
}
