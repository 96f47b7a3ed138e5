//! Angular momentum algebra: Wigner 3-j symbols and the spherical-tensor
//! matrix elements entering dipole and diamagnetic couplings.
//!
//! Condon-Shortley phases throughout.

use std::sync::OnceLock;

const LN_FACT_MAX: usize = 1024;

fn ln_factorials() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACT_MAX + 1);
        t.push(0.0);
        for n in 1..=LN_FACT_MAX {
            t.push(t[n - 1] + (n as f64).ln());
        }
        t
    })
}

fn ln_fact(n: i64) -> f64 {
    debug_assert!(n >= 0 && (n as usize) < LN_FACT_MAX);
    ln_factorials()[n as usize]
}

/// Wigner 3-j symbol for integer angular momenta (Racah formula, log-factorial
/// evaluation; the alternating sum has at most min(j1+j2-j3, ...) + 1 terms).
pub fn wigner_3j(j1: i64, j2: i64, j3: i64, m1: i64, m2: i64, m3: i64) -> f64 {
    if m1 + m2 + m3 != 0 || m1.abs() > j1 || m2.abs() > j2 || m3.abs() > j3 {
        return 0.0;
    }
    if j3 > j1 + j2 || j3 < (j1 - j2).abs() {
        return 0.0;
    }
    let ln_delta = 0.5
        * (ln_fact(j1 + j2 - j3) + ln_fact(j1 - j2 + j3) + ln_fact(-j1 + j2 + j3)
            - ln_fact(j1 + j2 + j3 + 1));
    let ln_pref = 0.5
        * (ln_fact(j1 + m1)
            + ln_fact(j1 - m1)
            + ln_fact(j2 + m2)
            + ln_fact(j2 - m2)
            + ln_fact(j3 + m3)
            + ln_fact(j3 - m3));
    let k_min = 0.max(j2 - j3 - m1).max(j1 - j3 + m2);
    let k_max = (j1 + j2 - j3).min(j1 - m1).min(j2 + m2);
    let mut sum = 0.0;
    for k in k_min..=k_max {
        let ln_term = ln_fact(k)
            + ln_fact(j1 + j2 - j3 - k)
            + ln_fact(j1 - m1 - k)
            + ln_fact(j2 + m2 - k)
            + ln_fact(j3 - j2 + m1 + k)
            + ln_fact(j3 - j1 - m2 + k);
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * (ln_delta + ln_pref - ln_term).exp();
    }
    let phase = if (j1 - j2 - m3) % 2 == 0 { 1.0 } else { -1.0 };
    phase * sum
}

/// Matrix element <l2 m2 | C^k_q | l1 m1> of the renormalized spherical
/// harmonic C^k_q = sqrt(4 pi / (2k+1)) Y_kq.
pub fn spherical_tensor_element(l2: u32, m2: i32, k: u32, q: i32, l1: u32, m1: i32) -> f64 {
    let (l1, l2, k) = (l1 as i64, l2 as i64, k as i64);
    let (m1, m2, q) = (m1 as i64, m2 as i64, q as i64);
    if m2 != m1 + q {
        return 0.0;
    }
    let reduced = wigner_3j(l2, k, l1, 0, 0, 0);
    if reduced == 0.0 {
        return 0.0;
    }
    let proj = wigner_3j(l2, k, l1, -m2, q, m1);
    let phase = if m2 % 2 == 0 { 1.0 } else { -1.0 };
    phase * (((2 * l1 + 1) * (2 * l2 + 1)) as f64).sqrt() * reduced * proj
}

/// Angular factor of a spherical dipole component, <l2 m2 | C^1_q | l1 m1>.
/// Zero unless l2 = l1 +/- 1 and m2 = m1 + q.
pub fn dipole_angular(l2: u32, m2: i32, q: i32, l1: u32, m1: i32) -> f64 {
    if l2 as i64 != l1 as i64 + 1 && l1 as i64 != l2 as i64 + 1 {
        return 0.0;
    }
    spherical_tensor_element(l2, m2, 1, q, l1, m1)
}

/// Angular factor of sin^2(theta) = 2/3 - (2/3) C^2_0; couples l2 = l1, l1 +/- 2
/// at fixed m. Used by the diamagnetic term B^2 rho^2 / 8.
pub fn sin2_theta_element(l2: u32, l1: u32, m: i32) -> f64 {
    let diag = if l1 == l2 { 2.0 / 3.0 } else { 0.0 };
    diag - 2.0 / 3.0 * spherical_tensor_element(l2, m, 2, 0, l1, m)
}
