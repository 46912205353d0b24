//! Integer-order Bessel functions of the first and second kind for real
//! positive arguments.
//!
//! `J_n` comes from Miller's backward recurrence normalized by
//! `J_0 + 2 sum J_2k = 1`; `Y_0` and `Y_1` from Neumann series over those
//! `J`, then forward recurrence in `n`.

use num_complex::Complex64;

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// `J_0(x) ..= J_nmax(x)`.
pub fn j_all(nmax: usize, x: f64) -> Vec<f64> {
    assert!(x >= 0.0 && x.is_finite(), "bessel argument must be finite and non-negative");
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let reach = nmax.max(x.ceil() as usize);
    let mut m = reach + 20 + (40.0 * reach as f64).sqrt() as usize;
    m += m % 2;
    let (mut jp1, mut j) = (0.0f64, 1e-300f64);
    let mut even_sum = 0.0;
    for k in (1..=m).rev() {
        let jm1 = 2.0 * k as f64 / x * j - jp1;
        jp1 = j;
        j = jm1;
        if k - 1 <= nmax {
            out[k - 1] = j;
        }
        if (k - 1) % 2 == 0 && k > 1 {
            even_sum += j;
        }
        if j.abs() > 1e250 {
            j *= 1e-250;
            jp1 *= 1e-250;
            even_sum *= 1e-250;
            out.iter_mut().for_each(|v| *v *= 1e-250);
        }
    }
    let norm = 2.0 * even_sum + j;
    out.iter_mut().for_each(|v| *v /= norm);
    out
}

/// `Y_0(x) ..= Y_nmax(x)` for `x > 0`.
pub fn y_all(nmax: usize, x: f64) -> Vec<f64> {
    assert!(x > 0.0 && x.is_finite(), "Y_n needs a positive argument");
    let kmax = (x.ceil() as usize + 40 + (40.0 * x).sqrt() as usize) / 2 + 1;
    let j = j_all(2 * kmax + 1, x);
    let log_term = (x / 2.0).ln() + EULER_GAMMA;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    for k in 1..=kmax {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        s0 += sign * j[2 * k] / k as f64;
        s1 += sign * (j[2 * k - 1] - j[2 * k + 1]) / k as f64;
    }
    let two_pi = 2.0 / std::f64::consts::PI;
    let mut y = vec![0.0; nmax.max(1) + 1];
    y[0] = two_pi * (log_term * j[0] - 2.0 * s0);
    y[1] = two_pi * (log_term * j[1] - j[0] / x + s1);
    for n in 1..nmax {
        y[n + 1] = 2.0 * n as f64 / x * y[n] - y[n - 1];
    }
    y.truncate(nmax + 1);
    y
}

/// Hankel functions of the second kind `H_n^(2) = J_n - i Y_n`.
pub fn h2_all(nmax: usize, x: f64) -> Vec<Complex64> {
    j_all(nmax, x).into_iter().zip(y_all(nmax, x)).map(|(j, y)| Complex64::new(j, -y)).collect()
}

/// Derivatives `Z_n'` from values `Z_0 ..= Z_{nmax+1}`, using
/// `Z_n' = (Z_{n-1} - Z_{n+1}) / 2` and `Z_0' = -Z_1`.
pub fn derivatives<T>(z: &[T]) -> Vec<T>
where
    T: Copy + std::ops::Sub<Output = T> + std::ops::Neg<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let n = z.len() - 1;
    (0..n).map(|k| if k == 0 { -z[1] } else { (z[k - 1] - z[k + 1]) * 0.5 }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from scipy.special.jv / yv.
    const J_REF: &[(usize, f64, f64)] = &[
        (0, 1.0, 0.7651976865579666),
        (1, 1.0, 0.44005058574493355),
        (0, 2.404825557695773, 0.0),
        (5, 2.5, 0.01950162513450322),
        (0, 26.7, 0.11007035432603882),
        (10, 26.7, 0.14289690747054992),
        (49, 26.7, 5.710542092875806e-10),
        (0, 94.0, 0.042048541022099484),
        (40, 94.0, 0.020773572892908897),
        (60, 94.0, 0.09378335997128841),
        (3, 0.01, 2.083320312532557e-08),
    ];

    const Y_REF: &[(usize, f64, f64)] = &[
        (0, 1.0, 0.088256964215677),
        (1, 1.0, -0.7812128213002889),
        (0, 0.01, -3.0054556370836463),
        (1, 0.01, -63.67859628206066),
        (3, 2.5, -0.7560554967536711),
        (0, 26.7, 0.10827642088793533),
        (1, 26.7, -0.10806267189115605),
        (10, 26.7, -0.07269549051181257),
        (30, 26.7, -0.6971842508040199),
        (0, 94.0, -0.07074160852714938),
        (1, 94.0, -0.04242541027320869),
        (49, 94.0, -0.0775417029470656),
        (60, 94.0, 0.001020250610293612),
    ];

    #[test]
    fn j_matches_reference() {
        for &(n, x, v) in J_REF {
            let got = j_all(n.max(1), x)[n];
            let tol = 1e-12 * v.abs().max(1e-3);
            assert!((got - v).abs() <= tol.max(1e-15), "J_{n}({x}) = {got}, expected {v}");
        }
    }

    #[test]
    fn y_matches_reference() {
        for &(n, x, v) in Y_REF {
            let got = y_all(n.max(1), x)[n];
            assert!((got - v).abs() <= 1e-10 * v.abs().max(1e-2), "Y_{n}({x}) = {got}, expected {v}");
        }
    }

    #[test]
    fn wronskian_holds() {
        for &x in &[0.3, 1.7, 9.0, 33.3, 80.0, 120.0] {
            let j = j_all(30, x);
            let y = y_all(30, x);
            for n in 0..29 {
                let w = j[n + 1] * y[n] - j[n] * y[n + 1];
                let expected = 2.0 / (std::f64::consts::PI * x);
                assert!((w - expected).abs() <= 1e-11 * expected, "x={x} n={n}: {w} vs {expected}");
            }
        }
    }

    #[test]
    fn derivative_identity() {
        let x = 3.7;
        let j = j_all(6, x);
        let d = derivatives(&j);
        // J_1' = J_0 - J_1 / x
        assert!((d[1] - (j[0] - j[1] / x)).abs() < 1e-14);
        assert_eq!(d[0], -j[1]);
    }
}
