//! Deterministic, splittable random number streams.
//!
//! Every stream is a (key, counter) pair; outputs are a keyed bijection of
//! the counter (a Philox-style 2x64 block with 10 rounds), so a stream is a
//! pure function of the root seed and the derivation path that produced it.
//! `derive` builds a child key in O(1) by encrypting the child index under
//! the parent key, which makes per-sample and per-channel substreams cheap
//! and order-independent: worker scheduling can never change what any sample
//! sees.
//!
//! The samplers are fixed algorithms on purpose. Poisson uses inversion by
//! sequential search below mean 10 and Hoermann's PTRS transformed rejection
//! from mean 10 up; exponential is inverse-CDF. Seeds therefore reproduce
//! across builds and platforms.

// Coefficient tables keep their published digits verbatim.
#![allow(clippy::excessive_precision)]

use thiserror::Error;

const PHILOX_M: u64 = 0xD2B74407B1CE6E93;
const PHILOX_W: u64 = 0x9E3779B97F4A7C15;

/// Domain tags keep output generation, child derivation and seeding from
/// ever colliding on the same (key, counter) input.
const TAG_OUTPUT: u64 = 0;
const TAG_DERIVE: u64 = 1;
const TAG_SEED: u64 = 2;

#[inline]
fn philox2x64(mut x0: u64, mut x1: u64, mut key: u64) -> u64 {
    for _ in 0..10 {
        let prod = (x0 as u128) * (PHILOX_M as u128);
        let hi = (prod >> 64) as u64;
        let lo = prod as u64;
        x0 = hi ^ key ^ x1;
        x1 = lo;
        key = key.wrapping_add(PHILOX_W);
    }
    x0
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SampleError {
    #[error("poisson mean must be finite and non-negative, got {0}")]
    BadPoissonMean(f64),
    #[error("exponential rate must be finite and positive, got {0}")]
    BadExponentialRate(f64),
}

/// A splittable random stream.
///
/// Cloning yields a stream that replays the same sequence from the current
/// position; this is how two coupled paths share one source of randomness.
#[derive(Debug, Clone, PartialEq)]
pub struct RngStream {
    key: u64,
    counter: u64,
}

impl RngStream {
    /// Root stream of a run.
    pub fn new(seed: u64) -> Self {
        RngStream { key: philox2x64(seed, TAG_SEED, PHILOX_W), counter: 0 }
    }

    /// Child stream at `index`. Children of distinct indices, and children
    /// reached by distinct derivation paths, are statistically independent.
    /// Deriving does not disturb the parent's position.
    pub fn derive(&self, index: u64) -> Self {
        RngStream { key: philox2x64(index, TAG_DERIVE, self.key), counter: 0 }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let out = philox2x64(self.counter, TAG_OUTPUT, self.key);
        self.counter += 1;
        out
    }

    /// Uniform on [0, 1) with 53 random bits.
    #[inline]
    pub fn next_uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Uniform on the open interval (0, 1); used where a logarithm follows.
    #[inline]
    fn next_uniform_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / 9007199254740992.0)
    }

    /// Bernoulli draw. Always consumes exactly one uniform, so a branch on
    /// the outcome cannot shift the stream for later draws.
    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        debug_assert!((0.0..=1.0).contains(&p));
        self.next_uniform() < p
    }

    /// Exponential waiting time with the given rate. Strictly positive and
    /// finite for every draw.
    pub fn exponential(&mut self, rate: f64) -> Result<f64, SampleError> {
        if !rate.is_finite() || rate <= 0.0 {
            return Err(SampleError::BadExponentialRate(rate));
        }
        Ok(-self.next_uniform_open().ln() / rate)
    }

    /// Poisson draw with the given mean. Mean zero returns 0 without
    /// consuming randomness.
    pub fn poisson(&mut self, mean: f64) -> Result<u64, SampleError> {
        if !mean.is_finite() || mean < 0.0 {
            return Err(SampleError::BadPoissonMean(mean));
        }
        if mean == 0.0 {
            return Ok(0);
        }
        if mean < 10.0 {
            let u = self.next_uniform();
            Ok(poisson_inversion(mean, u))
        } else {
            Ok(self.poisson_ptrs(mean))
        }
    }

    /// Hoermann's PTRS transformed rejection, exact for mean >= 10.
    fn poisson_ptrs(&mut self, mean: f64) -> u64 {
        let smu = mean.sqrt();
        let b = 0.931 + 2.53 * smu;
        let a = -0.059 + 0.02483 * b;
        let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
        let v_r = 0.9277 - 3.6224 / (b - 2.0);
        let log_mean = mean.ln();
        loop {
            let u = self.next_uniform() - 0.5;
            let v = self.next_uniform();
            let us = 0.5 - u.abs();
            let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
            if us >= 0.07 && v <= v_r {
                return k as u64;
            }
            if k < 0.0 || (us < 0.013 && v > us) {
                continue;
            }
            if v.ln() + (inv_alpha / (a / (us * us) + b)).ln()
                <= -mean + k * log_mean - ln_gamma(k + 1.0)
            {
                return k as u64;
            }
        }
    }
}

/// Poisson quantile at `u` by sequential CDF search. Exact; intended for
/// small means (cost grows linearly with the result).
pub fn poisson_inversion(mean: f64, u: f64) -> u64 {
    let mut p = (-mean).exp();
    let mut cdf = p;
    let mut n = 0u64;
    // The cap only triggers when accumulated roundoff leaves cdf just short
    // of a u very close to 1; the true tail mass there is far below 2^-53.
    let cap = (mean + 12.0 * mean.sqrt() + 120.0) as u64;
    while u >= cdf && n < cap {
        n += 1;
        p *= mean / n as f64;
        cdf += p;
    }
    n
}

/// Natural log of the gamma function for positive arguments (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    debug_assert!(x > 0.0);
    let z = x - 1.0;
    let mut a = 0.99999999999980993;
    for (i, &c) in COEF.iter().enumerate() {
        a += c / (z + i as f64 + 1.0);
    }
    let t = z + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + a.ln()
}

/// Standard normal quantile (Wichura's PPND16). Accurate to ~1e-15 over
/// (0, 1); used to couple Poisson draws across the sampler's regime switch.
pub fn normal_quantile(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180625 - q * q;
        return q * poly(&A, r) / poly(&B, r);
    }
    let mut r = if q < 0.0 { p } else { 1.0 - p };
    r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        let r = r - 1.6;
        poly(&C, r) / poly(&D, r)
    } else {
        let r = r - 5.0;
        poly(&E, r) / poly(&F, r)
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}

#[inline]
fn poly(coef: &[f64], x: f64) -> f64 {
    let mut acc = 0.0;
    for &c in coef.iter().rev() {
        acc = acc * x + c;
    }
    acc
}

const A: [f64; 8] = [
    3.3871328727963666080e0,
    1.3314166789178437745e2,
    1.9715909503065514427e3,
    1.3731693765509461125e4,
    4.5921953931549871457e4,
    6.7265770927008700853e4,
    3.3430575583588128105e4,
    2.5090809287301226727e3,
];
const B: [f64; 8] = [
    1.0,
    4.2313330701600911252e1,
    6.8718700749205790830e2,
    5.3941960214247511077e3,
    2.1213794301586595867e4,
    3.9307895800092710610e4,
    2.8729085735721942674e4,
    5.2264952788528545610e3,
];
const C: [f64; 8] = [
    1.42343711074968357734e0,
    4.63033784615654529590e0,
    5.76949722146069140550e0,
    3.64784832476320460504e0,
    1.27045825245236838258e0,
    2.41780725177450611770e-1,
    2.27238449892691845833e-2,
    7.74545014278341407640e-4,
];
const D: [f64; 8] = [
    1.0,
    2.05319162663775882187e0,
    1.67638483018380384940e0,
    6.89767334985100004550e-1,
    1.48103976427480074590e-1,
    1.51986665636164571966e-2,
    5.47593808499534494600e-4,
    1.05075007164441684324e-9,
];
const E: [f64; 8] = [
    6.65790464350110377720e0,
    5.46378491116411436990e0,
    1.78482653991729133580e0,
    2.96560571828504891230e-1,
    2.65321895265761230930e-2,
    1.24266094738807843860e-3,
    2.71155556874348757815e-5,
    2.01033439929228813265e-7,
];
const F: [f64; 8] = [
    1.0,
    5.99832206555887937690e-1,
    1.36929880922735805310e-1,
    1.48753612908506148525e-2,
    7.86869131145613259100e-4,
    1.84631831751005468180e-5,
    1.42151175831644588870e-7,
    2.04426310338993978564e-15,
];
