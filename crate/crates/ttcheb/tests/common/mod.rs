//! Shared oracles for the integration tests: an arbitrary-precision Bessel
//! power series evaluated in fixed-point big-integer arithmetic, independent
//! of the library's Miller-recurrence implementation.

use num_bigint::BigInt;

/// Decimal digits of fixed-point precision. J_k(x) for x ≤ 300 needs ~130
/// digits of headroom for the alternating-series cancellation (the largest
/// series term is ~e^x ≈ 10^130); the rest is guard digits.
const DIGITS: u32 = 250;

/// J_0(x)..J_kmax(x) by the ascending power series
/// J_k = Σ_m (−1)^m (x/2)^{k+2m} / (m!(k+m)!), with x the exact rational
/// num/den. All arithmetic is fixed-point with `DIGITS` decimal digits of
/// scale, so each value is exact to far below 1e-200 — values smaller than
/// that come out as 0, which is indistinguishable at f64 resolution.
pub fn bessel_oracle_sequence(kmax: usize, num: u64, den: u64) -> Vec<f64> {
    let scale = BigInt::from(10u32).pow(DIGITS);
    let hn = BigInt::from(num);
    let hd = BigInt::from(2 * den);
    let zero = BigInt::from(0u32);
    let reduce = BigInt::from(10u32).pow(DIGITS - 30);
    let mut out = Vec::with_capacity(kmax + 1);
    // first term of the k-series: scale·(x/2)^k / k!, updated incrementally
    let mut first = scale;
    for k in 0..=kmax {
        if k > 0 {
            first = &first * &hn / (&hd * k);
        }
        let mut term = first.clone();
        let mut sum = term.clone();
        let mut m: u64 = 0;
        while term != zero || (m as f64) <= num as f64 / (2.0 * den as f64) {
            m += 1;
            term = -term * &hn * &hn / (&hd * &hd * m * (k as u64 + m));
            sum += &term;
            assert!(m <= 10_000, "Bessel series failed to terminate");
        }
        let head: BigInt = &sum / &reduce;
        let v: f64 = head.to_string().parse().expect("fits in f64 after reduction");
        out.push(v / 1e30);
    }
    out
}
