//! Reference computations used to check the solver.
//!
//! Everything here works on plain arrays and rebuilds the equations from
//! scratch, so it shares no code path with the library's system assembly or
//! its QR-based solve.

#![allow(dead_code, clippy::needless_range_loop)]

pub type V3 = [f64; 3];

pub fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: V3, b: V3) -> V3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm(a: V3) -> f64 {
    dot(a, a).sqrt()
}

pub fn unit(a: V3) -> V3 {
    let n = norm(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Rows of the two-row cross-product formulation.
pub fn paper_rows(origin: V3, dir: V3) -> Vec<(V3, f64)> {
    let [u, v, w] = dir;
    let [x, y, z] = origin;
    vec![([0.0, w, -v], w * y - v * z), ([-w, 0.0, u], -w * x + u * z)]
}

/// Rows of `I - d dᵀ`.
pub fn projection_rows(origin: V3, dir: V3) -> Vec<(V3, f64)> {
    (0..3)
        .map(|r| {
            let mut row = [0.0; 3];
            for k in 0..3 {
                row[k] = if r == k { 1.0 } else { 0.0 } - dir[r] * dir[k];
            }
            (row, dot(row, origin))
        })
        .collect()
}

/// Inverse of a 3×3 matrix through its adjugate.
pub fn inverse3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let c = |r: usize, k: usize| {
        let (r1, r2) = ((r + 1) % 3, (r + 2) % 3);
        let (k1, k2) = ((k + 1) % 3, (k + 2) % 3);
        m[r1][k1] * m[r2][k2] - m[r1][k2] * m[r2][k1]
    };
    let det = m[0][0] * c(0, 0) + m[0][1] * c(0, 1) + m[0][2] * c(0, 2);
    let mut inv = [[0.0; 3]; 3];
    for r in 0..3 {
        for k in 0..3 {
            inv[r][k] = c(k, r) / det;
        }
    }
    inv
}

/// `x = (AᵀA)⁻¹ Aᵀ b` with the explicit inverse.
pub fn normal_equation_solve(rows: &[(V3, f64)]) -> V3 {
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for (row, b) in rows {
        for r in 0..3 {
            for k in 0..3 {
                ata[r][k] += row[r] * row[k];
            }
            atb[r] += row[r] * b;
        }
    }
    let inv = inverse3(ata);
    let mut x = [0.0; 3];
    for r in 0..3 {
        x[r] = dot(inv[r], atb);
    }
    x
}

/// `(AᵀA)⁻¹` with the explicit inverse.
pub fn normal_inverse(rows: &[(V3, f64)]) -> [[f64; 3]; 3] {
    let mut ata = [[0.0; 3]; 3];
    for (row, _) in rows {
        for r in 0..3 {
            for k in 0..3 {
                ata[r][k] += row[r] * row[k];
            }
        }
    }
    inverse3(ata)
}

pub fn residual_ss(rows: &[(V3, f64)], x: V3) -> f64 {
    rows.iter().map(|(row, b)| (dot(*row, x) - b).powi(2)).sum()
}

/// Sum of squared perpendicular distances from `x` to the lines.
pub fn perpendicular_ss(rays: &[(V3, V3)], x: V3) -> f64 {
    rays.iter()
        .map(|&(o, d)| {
            let c = cross(sub(x, o), unit(d));
            dot(c, c)
        })
        .sum()
}

/// Minimizes [`perpendicular_ss`] by repeatedly evaluating a 15³ grid and
/// halving the box around the best node, starting from a cube of
/// half-width `half` around `start`.
pub fn grid_minimize(rays: &[(V3, V3)], start: V3, half: f64) -> V3 {
    const STEPS: i32 = 7;
    let mut center = start;
    let mut half = half;
    while half > 1e-9 {
        let h = half / STEPS as f64;
        let mut best = (f64::INFINITY, center);
        for i in -STEPS..=STEPS {
            for j in -STEPS..=STEPS {
                for k in -STEPS..=STEPS {
                    let p = [center[0] + i as f64 * h, center[1] + j as f64 * h, center[2] + k as f64 * h];
                    let f = perpendicular_ss(rays, p);
                    if f < best.0 {
                        best = (f, p);
                    }
                }
            }
        }
        center = best.1;
        half *= 0.5;
    }
    center
}
