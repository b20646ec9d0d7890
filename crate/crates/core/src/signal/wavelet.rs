//! Daubechies filters and their scaling/wavelet functions on a dyadic grid.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Largest supported order. Root finding on the Bezout polynomial loses
/// accuracy quickly past this point.
pub const MAX_ORDER: usize = 20;

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Low-pass reconstruction filter of the Daubechies wavelet with `order`
/// vanishing moments (length `2 * order`, sums to `sqrt(2)`).
pub fn daubechies_filter(order: usize) -> Result<Vec<f64>> {
    if !(1..=MAX_ORDER).contains(&order) {
        return Err(Error::param(format!(
            "daubechies order must be in 1..={MAX_ORDER}, got {order}"
        )));
    }
    if order == 1 {
        let c = std::f64::consts::FRAC_1_SQRT_2;
        return Ok(vec![c, c]);
    }
    // Roots of P(y) = sum_k C(p-1+k, k) y^k via its companion matrix.
    let p = order;
    let coeffs: Vec<f64> = (0..p).map(|k| binomial(p - 1 + k, k)).collect();
    let deg = p - 1;
    let lead = coeffs[deg];
    let companion = DMatrix::from_fn(deg, deg, |i, j| {
        if i == 0 {
            -coeffs[deg - 1 - j] / lead
        } else if i == j + 1 {
            1.0
        } else {
            0.0
        }
    });
    let roots = companion.complex_eigenvalues();

    // Each root y maps to a pair z, 1/z of the filter polynomial; keep the
    // one inside the unit circle (minimum phase).
    type C = nalgebra::Complex<f64>;
    let mut poly: Vec<C> = vec![C::new(1.0, 0.0)];
    for y in roots.iter() {
        let part = (y * (y - 1.0)).sqrt() * 2.0;
        let konst = C::new(1.0, 0.0) - y * 2.0;
        let mut z = konst + part;
        if z.norm() >= 1.0 {
            z = konst - part;
        }
        // poly *= (x - z), coefficients highest degree first
        let mut next = vec![C::new(0.0, 0.0); poly.len() + 1];
        for (i, c) in poly.iter().enumerate() {
            next[i] += c;
            next[i + 1] -= c * z;
        }
        poly = next;
    }
    // Multiply by (x + 1)^p.
    let mut real: Vec<f64> = poly.iter().map(|c| c.re).collect();
    for _ in 0..p {
        let mut next = vec![0.0; real.len() + 1];
        for (i, c) in real.iter().enumerate() {
            next[i] += c;
            next[i + 1] += c;
        }
        real = next;
    }
    let sum: f64 = real.iter().sum();
    let scale = std::f64::consts::SQRT_2 / sum;
    Ok(real.into_iter().map(|c| c * scale).collect())
}

/// Scaling function `phi` and wavelet `psi` sampled on `[0, len-1]` with
/// spacing `2^-level`, computed by the cascade recursion.
#[derive(Debug, Clone)]
pub struct DaubechiesWavelet {
    pub order: usize,
    pub filter: Vec<f64>,
    pub level: u32,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
}

impl DaubechiesWavelet {
    pub fn new(order: usize, level: u32) -> Result<Self> {
        let h = daubechies_filter(order)?;
        let n = h.len();
        let s2 = std::f64::consts::SQRT_2;

        // phi at the integers: eigenvector of A[i][m] = sqrt2 h[2i - m] for
        // eigenvalue 1, normalised to unit sum.
        let mut a = DMatrix::from_fn(n, n, |i, m| {
            let k = 2 * i as isize - m as isize;
            let v = if (0..n as isize).contains(&k) {
                s2 * h[k as usize]
            } else {
                0.0
            };
            if i == m {
                v - 1.0
            } else {
                v
            }
        });
        for m in 0..n {
            a[(n - 1, m)] = 1.0;
        }
        let mut rhs = DVector::zeros(n);
        rhs[n - 1] = 1.0;
        let ints = a
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::param("singular cascade system"))?;

        let span = n - 1;
        let mut phi: Vec<f64> = ints.iter().copied().collect();
        for j in 1..=level {
            let prev = phi;
            let half = 1usize << (j - 1);
            let len = span * (1 << j) + 1;
            let mut cur = vec![0.0; len];
            for (i, c) in cur.iter_mut().enumerate() {
                if i % 2 == 0 {
                    *c = prev[i / 2];
                } else {
                    let mut acc = 0.0;
                    for (k, hk) in h.iter().enumerate() {
                        let idx = i as isize - (k * half) as isize;
                        if idx >= 0 && (idx as usize) < prev.len() {
                            acc += hk * prev[idx as usize];
                        }
                    }
                    *c = s2 * acc;
                }
            }
            phi = cur;
        }

        let step = 1usize << level;
        let psi = (0..phi.len())
            .map(|i| {
                let mut acc = 0.0;
                for k in 0..n {
                    let g = if k % 2 == 0 { 1.0 } else { -1.0 } * h[n - 1 - k];
                    let idx = 2 * i as isize - (k * step) as isize;
                    if idx >= 0 && (idx as usize) < phi.len() {
                        acc += g * phi[idx as usize];
                    }
                }
                s2 * acc
            })
            .collect();

        Ok(Self {
            order,
            filter: h,
            level,
            phi,
            psi,
        })
    }

    /// Support length of both functions.
    pub fn support(&self) -> f64 {
        (self.filter.len() - 1) as f64
    }

    fn interp(table: &[f64], level: u32, x: f64) -> f64 {
        let pos = x * (1u64 << level) as f64;
        if !(pos >= 0.0) || pos > (table.len() - 1) as f64 {
            return 0.0;
        }
        let i = pos.floor() as usize;
        if i + 1 >= table.len() {
            return table[table.len() - 1];
        }
        let f = pos - i as f64;
        table[i] * (1.0 - f) + table[i + 1] * f
    }

    pub fn phi_at(&self, x: f64) -> f64 {
        Self::interp(&self.phi, self.level, x)
    }

    pub fn psi_at(&self, x: f64) -> f64 {
        Self::interp(&self.psi, self.level, x)
    }
}
