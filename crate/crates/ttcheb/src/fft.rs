//! Iterative radix-2 FFT for power-of-two lengths.
//!
//! Forward transform: X[k] = sum_j x[j] exp(-2*pi*i*j*k/n), natural frequency
//! ordering k = 0..n/2-1, -n/2..-1. The inverse carries the 1/n factor so the
//! round trip is the identity.

use crate::C64;

/// In-place forward DFT. Panics if the length is not a power of two.
pub fn fft_in_place(buf: &mut [C64]) {
    transform(buf, -1.0);
}

/// In-place inverse DFT, scaled by 1/n.
pub fn ifft_in_place(buf: &mut [C64]) {
    transform(buf, 1.0);
    let scale = 1.0 / buf.len() as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

fn transform(buf: &mut [C64], sign: f64) {
    let n = buf.len();
    assert!(n.is_power_of_two(), "FFT length must be a power of two");
    if n <= 1 {
        return;
    }
    // bit-reversal permutation
    let bits = n.trailing_zeros();
    for i in 0..n {
        let j = (i.reverse_bits() >> (usize::BITS - bits)) as usize;
        if j > i {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = sign * 2.0 * std::f64::consts::PI / len as f64;
        let wl = C64::new(ang.cos(), ang.sin());
        for start in (0..n).step_by(len) {
            let mut w = C64::new(1.0, 0.0);
            for k in 0..len / 2 {
                let a = buf[start + k];
                let b = buf[start + k + len / 2] * w;
                buf[start + k] = a + b;
                buf[start + k + len / 2] = a - b;
                w *= wl;
            }
        }
        len <<= 1;
    }
}

/// Momentum grid value for DFT bin `k` of `n` bins with spacing `dp`:
/// k for k < n/2, k - n otherwise.
pub fn momentum_at(k: usize, n: usize, dp: f64) -> f64 {
    if k < n / 2 {
        dp * k as f64
    } else {
        dp * (k as f64 - n as f64)
    }
}
