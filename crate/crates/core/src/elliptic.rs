//! Complete elliptic integrals of the first and second kind.
//!
//! All functions take the **modulus** `k`, not the parameter `m = k²`:
//!
//! ```text
//! K(k) = ∫₀^{π/2} dt / √(1 − k² sin²t)
//! E(k) = ∫₀^{π/2} √(1 − k² sin²t) dt
//! ```
//!
//! Both come out of a single arithmetic–geometric mean run: `K = π / (2 a_∞)`
//! and `E = K · (1 − Σ 2^{n−1} c_n²)` with `c_0 = k`, `c_{n+1} = (a_n − b_n)/2`.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};

const MAX_ITER: usize = 40;

fn agm(k: f64) -> (f64, f64) {
    // k' = sqrt((1-k)(1+k)) keeps precision as k -> 1.
    let mut a = 1.0_f64;
    let mut b = ((1.0 - k) * (1.0 + k)).sqrt();
    let mut sum = 0.5 * k * k;
    let mut pow2 = 0.5;
    for _ in 0..MAX_ITER {
        if (a - b).abs() <= 4.0 * f64::EPSILON * a {
            break;
        }
        let c = 0.5 * (a - b);
        let a_next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = a_next;
        pow2 *= 2.0;
        sum += pow2 * c * c;
    }
    let big_k = FRAC_PI_2 / a;
    (big_k, big_k * (1.0 - sum))
}

/// `K(k)` for `0 ≤ k < 1`.
pub fn ellip_k(k: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::Domain {
            what: "elliptic K needs modulus 0 <= k < 1",
            value: k,
        });
    }
    Ok(agm(k).0)
}

/// `E(k)` for `0 ≤ k ≤ 1`.
pub fn ellip_e(k: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&k) {
        return Err(Error::Domain {
            what: "elliptic E needs modulus 0 <= k <= 1",
            value: k,
        });
    }
    if k == 1.0 {
        return Ok(1.0);
    }
    Ok(agm(k).1)
}

/// `(K(k), E(k))` from one AGM run, `0 ≤ k < 1`.
pub fn ellip_ke(k: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&k) {
        return Err(Error::Domain {
            what: "elliptic K needs modulus 0 <= k < 1",
            value: k,
        });
    }
    Ok(agm(k))
}
