//! Discrete Fourier transform for arbitrary lengths.
//!
//! Mixed-radix decimation in time over the prime factors of `n`; lengths with
//! a prime factor above [`MAX_DIRECT_RADIX`] go through Bluestein's chirp-z
//! algorithm on a power-of-two plan.

use num_complex::Complex;

use crate::scalar::Scalar;

/// Largest prime handled by a direct butterfly.
pub const MAX_DIRECT_RADIX: usize = 61;

#[derive(Debug, Clone)]
pub struct FftPlan<T> {
    len: usize,
    algorithm: Algorithm<T>,
}

#[derive(Debug, Clone)]
enum Algorithm<T> {
    MixedRadix {
        factors: Vec<usize>,
        /// `exp(-2*pi*i*k/len)` for `k < len`.
        twiddles: Vec<Complex<T>>,
    },
    Bluestein {
        inner: Box<FftPlan<T>>,
        /// `exp(-pi*i*k^2/len)` for `k < len`.
        chirp: Vec<Complex<T>>,
        /// Transform of the zero-padded conjugate chirp filter.
        filter_spectrum: Vec<Complex<T>>,
    },
}

fn prime_factors(mut n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut p = 2;
    while p * p <= n {
        while n.is_multiple_of(p) {
            out.push(p);
            n /= p;
        }
        p += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

fn unit_root<T: Scalar>(numerator: usize, denominator: usize) -> Complex<T> {
    // Reduce in f64 before converting so f32 plans stay accurate.
    let angle = -2.0 * std::f64::consts::PI * (numerator % denominator) as f64 / denominator as f64;
    Complex::new(T::of(angle.cos()), T::of(angle.sin()))
}

impl<T: Scalar> FftPlan<T> {
    pub fn new(len: usize) -> Self {
        let factors = prime_factors(len.max(1));
        let algorithm = if factors.iter().any(|&p| p > MAX_DIRECT_RADIX) {
            Self::bluestein(len)
        } else {
            Algorithm::MixedRadix {
                factors,
                twiddles: (0..len).map(|k| unit_root(k, len)).collect(),
            }
        };
        FftPlan { len, algorithm }
    }

    fn bluestein(len: usize) -> Algorithm<T> {
        let m = (2 * len - 1).next_power_of_two();
        let inner = FftPlan::new(m);
        let two_n = 2 * len;
        let chirp: Vec<Complex<T>> = (0..len)
            .map(|k| {
                // k^2 mod 2n keeps the angle small for long inputs.
                let k2 = (k as u128 * k as u128 % two_n as u128) as usize;
                unit_root(k2, two_n)
            })
            .collect();
        let mut filter = vec![Complex::new(T::zero(), T::zero()); m];
        filter[0] = chirp[0].conj();
        for k in 1..len {
            filter[k] = chirp[k].conj();
            filter[m - k] = chirp[k].conj();
        }
        inner.process(&mut filter);
        Algorithm::Bluestein {
            inner: Box::new(inner),
            chirp,
            filter_spectrum: filter,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// In-place unnormalized forward transform.
    pub fn process(&self, data: &mut [Complex<T>]) {
        assert_eq!(data.len(), self.len, "buffer length does not match plan");
        if self.len <= 1 {
            return;
        }
        match &self.algorithm {
            Algorithm::MixedRadix { factors, twiddles } => {
                let input = data.to_vec();
                let mut scratch = vec![Complex::new(T::zero(), T::zero()); MAX_DIRECT_RADIX];
                mixed_radix(&input, 1, data, factors, twiddles, 1, &mut scratch);
            }
            Algorithm::Bluestein {
                inner,
                chirp,
                filter_spectrum,
            } => {
                let m = inner.len();
                let mut work = vec![Complex::new(T::zero(), T::zero()); m];
                for ((w, &x), &c) in work.iter_mut().zip(data.iter()).zip(chirp) {
                    *w = x * c;
                }
                inner.process(&mut work);
                for (w, &f) in work.iter_mut().zip(filter_spectrum) {
                    *w *= f;
                }
                inner.process_inverse(&mut work);
                for ((out, &w), &c) in data.iter_mut().zip(&work).zip(chirp) {
                    *out = w * c;
                }
            }
        }
    }

    /// In-place inverse transform, scaled by `1/len`.
    pub fn process_inverse(&self, data: &mut [Complex<T>]) {
        for v in data.iter_mut() {
            *v = v.conj();
        }
        self.process(data);
        let scale = T::one() / T::of_usize(self.len.max(1));
        for v in data.iter_mut() {
            *v = v.conj() * scale;
        }
    }
}

/// Transforms `input[0], input[stride], ...` (length `out.len()`) into `out`.
/// `tw_step` maps this sub-transform's roots onto the full-length table.
fn mixed_radix<T: Scalar>(
    input: &[Complex<T>],
    stride: usize,
    out: &mut [Complex<T>],
    factors: &[usize],
    twiddles: &[Complex<T>],
    tw_step: usize,
    scratch: &mut [Complex<T>],
) {
    let n = out.len();
    if n == 1 {
        out[0] = input[0];
        return;
    }
    let p = factors[0];
    let m = n / p;
    for r in 0..p {
        mixed_radix(
            &input[r * stride..],
            stride * p,
            &mut out[r * m..(r + 1) * m],
            &factors[1..],
            twiddles,
            tw_step * p,
            scratch,
        );
    }
    let full = twiddles.len();
    let sums = &mut scratch[..p];
    for k in 0..m {
        for (q, sum) in sums.iter_mut().enumerate() {
            let j = k + q * m;
            let mut acc = out[k];
            for r in 1..p {
                let w = twiddles[(r * j * tw_step) % full];
                acc += out[r * m + k] * w;
            }
            *sum = acc;
        }
        for (q, &sum) in sums.iter().enumerate() {
            out[k + q * m] = sum;
        }
    }
}
