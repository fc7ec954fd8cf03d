//! 2×2 matrix helpers used for equilibrium classification and tangent flows.

use num_complex::Complex64;

pub type Mat2 = [[f64; 2]; 2];

pub fn trace(m: &Mat2) -> f64 {
    m[0][0] + m[1][1]
}

pub fn det(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Max absolute row sum.
pub fn norm_inf(m: &Mat2) -> f64 {
    m.iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn mul_vec(m: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

/// Eigenvalues of a real 2×2 matrix, ordered by ascending real part
/// (then ascending imaginary part).
///
/// The real-root branch avoids cancellation by computing the larger-magnitude
/// root first and recovering the other from the determinant.
pub fn eigenvalues(m: &Mat2) -> [Complex64; 2] {
    let tr = trace(m);
    let dt = det(m);
    let half = 0.5 * tr;
    // Discriminant written as a difference-of-entries to stay accurate when
    // the two diagonal entries are close.
    let d = 0.25 * (m[0][0] - m[1][1]).powi(2) + m[0][1] * m[1][0];
    if d >= 0.0 {
        let sq = d.sqrt();
        let big = if half >= 0.0 { half + sq } else { half - sq };
        let small = if big != 0.0 { dt / big } else { 0.0 };
        let (lo, hi) = if big < small {
            (big, small)
        } else {
            (small, big)
        };
        [Complex64::new(lo, 0.0), Complex64::new(hi, 0.0)]
    } else {
        let im = (-d).sqrt();
        [Complex64::new(half, -im), Complex64::new(half, im)]
    }
}
