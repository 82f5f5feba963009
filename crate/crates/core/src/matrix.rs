//! Tiny exact linear algebra over Q(i) and over truncated series.
//!
//! Dimensions here are jet-bundle fiber dimensions (1–3 in practice), so
//! everything is dense Gauss–Jordan with exact pivots; no stability concerns
//! exist in exact arithmetic.

use crate::error::{Error, Result};
use crate::num::GaussianRational;
use crate::series::{TruncSeries, VarSpec};

/// Dense square matrix of scalars, row major.
pub type Mat = Vec<Vec<GaussianRational>>;

pub fn identity(n: usize) -> Mat {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        GaussianRational::one()
                    } else {
                        GaussianRational::zero()
                    }
                })
                .collect()
        })
        .collect()
}

pub fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let mut out = vec![vec![GaussianRational::zero(); n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k].is_zero() {
                continue;
            }
            for j in 0..n {
                let p = (&a[i][k]).mul(&b[k][j]);
                out[i][j] += &p;
            }
        }
    }
    out
}

/// Exact inverse by Gauss–Jordan; `Err` on a singular matrix.
pub fn mat_inverse(m: &Mat) -> Result<Mat> {
    let n = m.len();
    let mut a = m.clone();
    let mut inv = identity(n);
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| !a[r][col].is_zero())
            .ok_or_else(|| Error::Domain("singular matrix".into()))?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col].clone().inv();
        for j in 0..n {
            a[col][j] = (&a[col][j]).mul(&p);
            inv[col][j] = (&inv[col][j]).mul(&p);
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for j in 0..n {
                let t = (&f).mul(&a[col][j]);
                a[r][j] = a[r][j].clone() - t;
                let t = (&f).mul(&inv[col][j]);
                inv[r][j] = inv[r][j].clone() - t;
            }
        }
    }
    Ok(inv)
}

/// Square matrix of series, row major.
pub type SeriesMat = Vec<Vec<TruncSeries>>;

pub fn series_identity(n: usize, spec: VarSpec) -> SeriesMat {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        TruncSeries::one(spec)
                    } else {
                        TruncSeries::zero(spec)
                    }
                })
                .collect()
        })
        .collect()
}

pub fn series_mat_mul(a: &SeriesMat, b: &SeriesMat) -> SeriesMat {
    let n = a.len();
    let spec = a[0][0].spec;
    let mut out = vec![vec![TruncSeries::zero(spec); n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k].is_zero() {
                continue;
            }
            for j in 0..n {
                out[i][j] = out[i][j].add(&a[i][k].mul(&b[k][j]));
            }
        }
    }
    out
}

/// Inverse of a series matrix whose constant-term matrix is invertible:
/// factor `M = M0 (I - N)` with `N` of positive total valuation, then sum
/// the finite Neumann series (it terminates inside any truncation window).
pub fn series_mat_inverse(m: &SeriesMat) -> Result<SeriesMat> {
    let n = m.len();
    let spec = m[0][0].spec;
    let m0: Mat = m
        .iter()
        .map(|row| row.iter().map(|s| s.constant_term()).collect())
        .collect();
    let m0_inv = mat_inverse(&m0)?;
    // N = I - M0^{-1} M
    let m0_inv_series: SeriesMat = m0_inv
        .iter()
        .map(|row| {
            row.iter()
                .map(|c| TruncSeries::constant(spec, c.clone()))
                .collect()
        })
        .collect();
    let m0m = series_mat_mul(&m0_inv_series, m);
    let mut nmat = series_identity(n, spec);
    for i in 0..n {
        for j in 0..n {
            nmat[i][j] = nmat[i][j].sub(&m0m[i][j]);
        }
    }
    // Sum I + N + N^2 + ... until the power vanishes. The sum's window is
    // pinned by N's own entry windows, so clamping every power to that
    // window loses nothing and guarantees each power eventually dies as its
    // valuation climbs. The guard catches windowless inputs that never die.
    let mut target = [crate::series::RELIABLE_EXACT; 3];
    let mut nonzero = false;
    for row in &nmat {
        for s in row {
            if !s.is_zero() {
                nonzero = true;
                for g in 0..3 {
                    target[g] = target[g].min(s.reliable[g]);
                }
            }
        }
    }
    if nonzero && target.iter().all(|&t| t >= crate::series::RELIABLE_EXACT) {
        return Err(Error::Order {
            context: "series matrix inverse: exact non-constant entries have an \
                      infinite inverse; clamp to a finite window first"
                .into(),
            max_achievable: 0,
        });
    }
    let mut sum = series_identity(n, spec);
    let mut power = nmat.clone();
    let mut rounds = 0usize;
    loop {
        for row in power.iter_mut() {
            for s in row.iter_mut() {
                *s = s.clone().clamp_window(target);
            }
        }
        if power.iter().all(|row| row.iter().all(|s| s.is_zero())) {
            break;
        }
        rounds += 1;
        if rounds > 1000 {
            return Err(Error::Order {
                context: "series matrix inverse does not terminate under the given windows"
                    .into(),
                max_achievable: 1000,
            });
        }
        for i in 0..n {
            for j in 0..n {
                sum[i][j] = sum[i][j].add(&power[i][j]);
            }
        }
        power = series_mat_mul(&power, &nmat);
    }
    Ok(series_mat_mul(&sum, &m0_inv_series))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::GaussianRational as Q;
    use crate::series::RELIABLE_EXACT;

    #[test]
    fn scalar_inverse_round_trip() {
        let m = vec![
            vec![Q::from_int(2), Q::i()],
            vec![Q::from_int(1), Q::from_int(3)],
        ];
        let inv = mat_inverse(&m).unwrap();
        assert_eq!(mat_mul(&m, &inv), identity(2));
    }

    #[test]
    fn singular_matrix_rejected() {
        let m = vec![
            vec![Q::from_int(1), Q::from_int(2)],
            vec![Q::from_int(2), Q::from_int(4)],
        ];
        assert!(mat_inverse(&m).is_err());
    }

    #[test]
    fn series_inverse_round_trip() {
        let spec = VarSpec::new(0, 0, 2);
        let u0 = TruncSeries::var(spec, spec.var_u(0)).clamp_window([
            RELIABLE_EXACT,
            RELIABLE_EXACT,
            4,
        ]);
        let u1 = TruncSeries::var(spec, spec.var_u(1)).clamp_window([
            RELIABLE_EXACT,
            RELIABLE_EXACT,
            4,
        ]);
        // M = [[1 + u0, u1], [0, 1 - u0 u1]]
        let m = vec![
            vec![TruncSeries::one(spec).add(&u0), u1.clone()],
            vec![
                TruncSeries::zero(spec),
                TruncSeries::one(spec).sub(&u0.mul(&u1)),
            ],
        ];
        let inv = series_mat_inverse(&m).unwrap();
        let prod = series_mat_mul(&m, &inv);
        for i in 0..2 {
            for j in 0..2 {
                let expect = if i == j {
                    TruncSeries::one(spec)
                } else {
                    TruncSeries::zero(spec)
                };
                assert!(prod[i][j].sub(&expect).is_zero(), "entry {i}{j} differs");
            }
        }
    }
}
