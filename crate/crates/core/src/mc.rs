//! Deterministic batched Monte Carlo driver.
//!
//! Samples are drawn in fixed-size batches. Batch `i` of a stream uses a
//! ChaCha8 generator keyed by (seed, stream) on ChaCha stream `i`, so the
//! sample sequence does not depend on how batches are spread over threads.
//! Batch results are reduced in batch order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub const BATCH: u64 = 1 << 14;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rng {
    seed: u64,
    stream: u64,
    sequential: bool,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { seed, stream: 0, sequential: false }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream for a named purpose. Same tag, same stream.
    pub fn substream(&self, tag: u64) -> Rng {
        Rng { stream: splitmix64(self.stream ^ splitmix64(tag.wrapping_add(1))), ..*self }
    }

    /// Run batches on the calling thread. Results are identical either way.
    pub fn sequential(self) -> Rng {
        Rng { sequential: true, ..self }
    }

    pub fn is_sequential(&self) -> bool {
        self.sequential
    }

    pub fn batch(&self, index: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(splitmix64(self.seed) ^ self.stream);
        r.set_stream(index);
        r
    }
}

/// Run `samples` draws split into batches; `f(rng, count)` handles one batch.
pub fn run<T, F>(rng: &Rng, samples: u64, f: F) -> T
where
    T: Default + Send + std::ops::Add<Output = T>,
    F: Fn(&mut ChaCha8Rng, u64) -> T + Sync + Send,
{
    let batches = samples.div_ceil(BATCH);
    let count = |i: u64| if i + 1 == batches { samples - i * BATCH } else { BATCH };
    let one = |i: u64| f(&mut rng.batch(i), count(i));
    let parts: Vec<T> = if rng.sequential {
        (0..batches).map(one).collect()
    } else {
        collect_batches(batches, &one)
    };
    parts.into_iter().fold(T::default(), |acc, t| acc + t)
}

#[cfg(feature = "parallel")]
fn collect_batches<T: Send, G: Fn(u64) -> T + Sync + Send>(batches: u64, one: &G) -> Vec<T> {
    use rayon::prelude::*;
    (0..batches).into_par_iter().map(one).collect()
}

#[cfg(not(feature = "parallel"))]
fn collect_batches<T: Send, G: Fn(u64) -> T + Sync + Send>(batches: u64, one: &G) -> Vec<T> {
    (0..batches).map(one).collect()
}

pub fn uniform_in_box(rng: &mut ChaCha8Rng, lo: &[f64], hi: &[f64], out: &mut [f64]) {
    use rand::Rng as _;
    for i in 0..out.len() {
        let u: f64 = rng.random();
        out[i] = lo[i] + (hi[i] - lo[i]) * u;
    }
}

/// Uniform point on the unit sphere of R^len(out).
pub fn unit_vector(rng: &mut ChaCha8Rng, out: &mut [f64]) {
    loop {
        let mut s = 0.0;
        for v in out.iter_mut() {
            let g: f64 = StandardNormal.sample(rng);
            *v = g;
            s += g * g;
        }
        if s > 1e-300 {
            let inv = 1.0 / s.sqrt();
            out.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}

/// Counts for a paired (common random numbers) comparison of two regions.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairCount {
    pub plus: u64,
    pub minus: u64,
    /// samples in exactly one of the two regions
    pub discordant: u64,
}

impl std::ops::Add for PairCount {
    type Output = PairCount;
    fn add(self, o: PairCount) -> PairCount {
        PairCount {
            plus: self.plus + o.plus,
            minus: self.minus + o.minus,
            discordant: self.discordant + o.discordant,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    fn hits(rng: &Rng, n: u64) -> u64 {
        run(rng, n, |r, c| (0..c).filter(|_| r.random::<f64>() < 0.3).count() as u64)
    }

    #[test]
    fn parallel_and_sequential_agree() {
        let r = Rng::new(11);
        assert_eq!(hits(&r, 100_003), hits(&r.sequential(), 100_003));
    }

    #[test]
    fn substreams_differ_and_repeat() {
        let r = Rng::new(5);
        assert_eq!(hits(&r.substream(1), 50_000), hits(&r.substream(1), 50_000));
        assert_ne!(hits(&r.substream(1), 50_000), hits(&r.substream(2), 50_000));
    }

    #[test]
    fn unit_vectors_are_unit() {
        let mut g = Rng::new(0).batch(0);
        let mut v = [0.0; 4];
        for _ in 0..100 {
            unit_vector(&mut g, &mut v);
            let n: f64 = v.iter().map(|x| x * x).sum();
            assert!((n - 1.0).abs() < 1e-14);
        }
    }
}
