//! Chunked, deterministically seeded execution of Monte Carlo and quadrature loops.
//!
//! Work is split into fixed-size chunks. Each chunk draws from its own ChaCha stream
//! derived from the master seed, and chunk results are reduced in index order, so the
//! numbers do not depend on the thread count or on whether rayon is compiled in.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Samples per Monte Carlo chunk. Changing this changes every seeded result.
pub const CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parallelism {
    /// Use rayon when the `parallel` feature is enabled.
    #[default]
    Auto,
    Sequential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub parallelism: Parallelism,
}

impl McConfig {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self { samples, seed, parallelism: Parallelism::Auto }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn with_samples(self, samples: usize) -> Self {
        Self { samples, ..self }
    }

    pub fn sequential(self) -> Self {
        Self { parallelism: Parallelism::Sequential, ..self }
    }
}

/// The RNG for chunk `chunk` of the stream rooted at `seed`.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

/// Maps `f` over `0..len`, returning results in index order.
pub fn map_indexed<T, F>(len: usize, parallelism: Parallelism, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match parallelism {
        #[cfg(feature = "parallel")]
        Parallelism::Auto => {
            use rayon::prelude::*;
            (0..len).into_par_iter().map(f).collect()
        }
        _ => (0..len).map(f).collect(),
    }
}

/// Sets the global worker count. Only meaningful with the `parallel` feature.
pub fn set_threads(threads: usize) -> Result<(), String> {
    #[cfg(feature = "parallel")]
    {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| e.to_string())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        Ok(())
    }
}

/// Workers available to [`Parallelism::Auto`].
pub fn current_threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Running sums for one complex-valued integrand.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Sums {
    sum: Complex64,
    sq_re: f64,
    sq_im: f64,
}

impl Sums {
    fn push(&mut self, z: Complex64) {
        self.sum += z;
        self.sq_re += z.re * z.re;
        self.sq_im += z.im * z.im;
    }

    fn merge(&mut self, other: &Sums) {
        self.sum += other.sum;
        self.sq_re += other.sq_re;
        self.sq_im += other.sq_im;
    }
}

/// Sample mean of a complex integrand with its standard error.
///
/// `stderr` is `sqrt(var(re) + var(im) / n)`, the radius of the estimator's spread in
/// the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: Complex64,
    pub stderr: f64,
    pub samples: usize,
}

impl Estimate {
    fn from_sums(s: &Sums, n: usize) -> Self {
        let nf = n as f64;
        let mean = s.sum / nf;
        let var_re = (s.sq_re / nf - mean.re * mean.re).max(0.0);
        let var_im = (s.sq_im / nf - mean.im * mean.im).max(0.0);
        let stderr = if n > 1 { ((var_re + var_im) / (nf - 1.0)).sqrt() } else { f64::INFINITY };
        Self { mean, stderr, samples: n }
    }

    pub fn scale(self, c: f64) -> Self {
        Self { mean: self.mean * c, stderr: self.stderr * c.abs(), ..self }
    }

    pub fn re(&self) -> f64 {
        self.mean.re
    }

    /// Distance to `target` in units of the standard error.
    pub fn z_score(&self, target: Complex64) -> f64 {
        (self.mean - target).norm() / self.stderr.max(f64::MIN_POSITIVE)
    }
}

/// Monte Carlo estimate of `K` integrands evaluated on common samples.
///
/// `draw` receives a chunk RNG and returns the `K` weighted integrand values for one sample.
pub fn integrate<const K: usize, F>(cfg: &McConfig, draw: F) -> [Estimate; K]
where
    F: Fn(&mut ChaCha8Rng) -> [Complex64; K] + Sync + Send,
{
    let samples = cfg.samples.max(2);
    let chunks = samples.div_ceil(CHUNK);
    let partial = map_indexed(chunks, cfg.parallelism, |c| {
        let mut rng = chunk_rng(cfg.seed, c as u64);
        let len = if c + 1 == chunks { samples - c * CHUNK } else { CHUNK };
        let mut acc = [Sums::default(); K];
        for _ in 0..len {
            let vals = draw(&mut rng);
            for (a, v) in acc.iter_mut().zip(vals) {
                a.push(v);
            }
        }
        acc
    });
    let mut total = [Sums::default(); K];
    for p in &partial {
        for (t, s) in total.iter_mut().zip(p) {
            t.merge(s);
        }
    }
    total.map(|s| Estimate::from_sums(&s, samples))
}

/// Single-integrand convenience wrapper around [`integrate`].
pub fn integrate_one<F>(cfg: &McConfig, draw: F) -> Estimate
where
    F: Fn(&mut ChaCha8Rng) -> Complex64 + Sync + Send,
{
    let [e] = integrate::<1, _>(cfg, |rng| [draw(rng)]);
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn independent_of_parallelism() {
        let cfg = McConfig::new(3 * CHUNK + 17, 99);
        let f = |rng: &mut ChaCha8Rng| Complex64::new(rng.random::<f64>(), 0.0);
        let a = integrate_one(&cfg, f);
        let b = integrate_one(&cfg.sequential(), f);
        assert_eq!(a.mean, b.mean);
        assert_eq!(a.stderr, b.stderr);
        assert!((a.mean.re - 0.5).abs() < 4.0 * a.stderr);
    }

    #[test]
    fn uniform_stderr_matches_theory() {
        let cfg = McConfig::new(40_000, 1);
        let e = integrate_one(&cfg, |rng| Complex64::new(rng.random::<f64>(), 0.0));
        let expected = (1.0f64 / 12.0 / 40_000.0).sqrt();
        assert!((e.stderr / expected - 1.0).abs() < 0.05);
    }
}
