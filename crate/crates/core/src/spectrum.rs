//! Spectral helpers for trace post-processing: radix-2 FFT, Hann window,
//! linear detrend, and parabolic peak interpolation on the log spectrum.

use crate::{Complex, Real};

/// In-place iterative radix-2 Cooley-Tukey FFT; `data.len()` must be a power
/// of two.
pub fn fft<T: Real>(data: &mut [Complex<T>]) {
    let n = data.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    if n <= 1 {
        return;
    }
    // Bit-reversal permutation.
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = (i.reverse_bits() >> (usize::BITS - bits)) as usize;
        if j > i {
            data.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = -T::of(2.0) * T::PI() / T::from_usize(len).unwrap();
        let w_len = Complex::new(ang.cos(), ang.sin());
        for chunk in data.chunks_mut(len) {
            let mut w = Complex::new(T::one(), T::zero());
            let half = len / 2;
            for k in 0..half {
                let a = chunk[k];
                let b = chunk[k + half] * w;
                chunk[k] = a + b;
                chunk[k + half] = a - b;
                w = w * w_len;
            }
        }
        len <<= 1;
    }
}

pub fn next_power_of_two(n: usize) -> usize {
    n.next_power_of_two()
}

/// Hann window value for sample `k` of `n`.
pub fn hann<T: Real>(k: usize, n: usize) -> T {
    if n <= 1 {
        return T::one();
    }
    let x = T::from_usize(k).unwrap() / T::from_usize(n - 1).unwrap();
    T::of(0.5) * (T::one() - (T::of(2.0) * T::PI() * x).cos())
}

/// Remove the least-squares line a + b*t from `y` (uniform sampling).
pub fn detrend<T: Real>(y: &mut [T]) {
    let n = y.len();
    if n < 2 {
        return;
    }
    let nf = T::from_usize(n).unwrap();
    let mut sum_y = T::zero();
    let mut sum_ty = T::zero();
    for (k, v) in y.iter().enumerate() {
        sum_y += *v;
        sum_ty += T::from_usize(k).unwrap() * *v;
    }
    // Closed-form least squares with t = 0..n-1.
    let sum_t = nf * (nf - T::one()) / T::of(2.0);
    let sum_t2 = (nf - T::one()) * nf * (T::of(2.0) * nf - T::one()) / T::of(6.0);
    let denom = nf * sum_t2 - sum_t * sum_t;
    let b = (nf * sum_ty - sum_t * sum_y) / denom;
    let a = (sum_y - b * sum_t) / nf;
    for (k, v) in y.iter_mut().enumerate() {
        *v = *v - (a + b * T::from_usize(k).unwrap());
    }
}

/// Magnitude spectrum of a real signal after Hann windowing and zero-padding
/// to `pad_factor` times the next power of two. Returns (bin spacing in Hz,
/// magnitudes for bins 0..n_fft/2).
pub fn hann_spectrum<T: Real>(y: &[T], fs: T, pad_factor: usize) -> (T, Vec<T>) {
    let n = y.len();
    let n_fft = next_power_of_two(n * pad_factor.max(1));
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n_fft];
    for (k, v) in y.iter().enumerate() {
        buf[k] = Complex::new(*v * hann::<T>(k, n), T::zero());
    }
    fft(&mut buf);
    let mags: Vec<T> = buf[..n_fft / 2].iter().map(|c| c.norm()).collect();
    (fs / T::from_usize(n_fft).unwrap(), mags)
}

/// Parabolic interpolation of the dominant peak of a magnitude spectrum in
/// the log domain; returns (fractional bin index, peak magnitude) or `None`
/// when the spectrum is flat zero.
pub fn interpolate_peak<T: Real>(mags: &[T], skip_bins: usize) -> Option<(T, T)> {
    let start = skip_bins.max(1);
    if mags.len() < start + 2 {
        return None;
    }
    let mut k_max = start;
    for k in start..mags.len() - 1 {
        if mags[k] > mags[k_max] {
            k_max = k;
        }
    }
    let peak = mags[k_max];
    if !(peak > T::zero()) {
        return None;
    }
    let tiny = T::of(1e-300);
    let la = (mags[k_max - 1].max(tiny)).ln();
    let lb = peak.ln();
    let lc = (mags[k_max + 1].max(tiny)).ln();
    let denom = la - T::of(2.0) * lb + lc;
    let frac = if denom.abs() > T::zero() {
        (T::of(0.5) * (la - lc) / denom).max(-T::of(0.5)).min(T::of(0.5))
    } else {
        T::zero()
    };
    Some((T::from_usize(k_max).unwrap() + frac, peak))
}

/// Median of a slice (by copy); used for the spectral noise floor.
pub fn median<T: Real>(values: &[T]) -> T {
    if values.is_empty() {
        return T::zero();
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) * T::of(0.5)
    }
}
