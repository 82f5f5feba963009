//! Finite-order jets of formal-disc automorphisms and vector fields.
//!
//! An `AutoJet` of order `r` stores the pullbacks of the coordinate
//! functions: `components[i]` is the image of `u_i`, a fiber-only series
//! with zero constant term, truncated at total degree `r`. The group law is
//! series composition; the full group at order `r` splits as the jets with
//! identity linear part extended by the invertible linear maps.
//!
//! Invariants:
//! * components carry no constant term and no variables outside the fiber
//!   group;
//! * the degree-one coefficient matrix is invertible;
//! * composition, inversion, and the conjugation action never leave the
//!   stated order.

use crate::error::{Error, Result};
use crate::matrix::{mat_inverse, Mat};
use crate::num::GaussianRational;
use crate::series::{Group, TruncSeries, VarSpec};

/// Order-`r` jet of a formal-disc automorphism fixing the origin.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AutoJet {
    pub dim: usize,
    pub order: i64,
    pub components: Vec<TruncSeries>,
}

/// Order-`r` jet of a formal vector field vanishing at the origin
/// (valuation ≥ 1), or to second order (valuation ≥ 2).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VectorFieldJet {
    pub dim: usize,
    pub order: i64,
    pub components: Vec<TruncSeries>,
}

fn fiber_spec(dim: usize) -> VarSpec {
    VarSpec::new(0, 0, dim)
}

impl AutoJet {
    /// Wrap raw component series, clamping to the stated order and checking
    /// the origin-fixing and invertibility invariants.
    pub fn new(dim: usize, order: i64, components: Vec<TruncSeries>) -> Result<Self> {
        if components.len() != dim {
            return Err(Error::Shape(format!(
                "automorphism jet: {} components in dimension {}",
                components.len(),
                dim
            )));
        }
        let spec = fiber_spec(dim);
        let mut comps = Vec::with_capacity(dim);
        for c in components {
            if c.spec != spec {
                return Err(Error::Shape(
                    "automorphism jet: component over a non-fiber layout".into(),
                ));
            }
            if !c.constant_term().is_zero() {
                return Err(Error::Domain(
                    "automorphism jet: component has nonzero constant term".into(),
                ));
            }
            comps.push(c.clamp_window([i64::MAX, i64::MAX, order]));
        }
        let jet = Self {
            dim,
            order,
            components: comps,
        };
        mat_inverse(&jet.linearize()).map_err(|_| {
            Error::Domain("automorphism jet: singular linear part".into())
        })?;
        Ok(jet)
    }

    pub fn identity(dim: usize, order: i64) -> Self {
        let spec = fiber_spec(dim);
        let components = (0..dim)
            .map(|i| TruncSeries::var(spec, i).clamp_window([i64::MAX, i64::MAX, order]))
            .collect();
        Self {
            dim,
            order,
            components,
        }
    }

    /// The jet of an invertible linear map.
    pub fn linear(mat: &Mat, order: i64) -> Result<Self> {
        let dim = mat.len();
        let spec = fiber_spec(dim);
        let mut components = Vec::with_capacity(dim);
        for row in mat {
            let mut s = TruncSeries::zero(spec);
            for (j, c) in row.iter().enumerate() {
                s = s.add(&TruncSeries::var(spec, j).scale(c));
            }
            components.push(s.clamp_window([i64::MAX, i64::MAX, order]));
        }
        Self::new(dim, order, components)
    }

    pub fn spec(&self) -> VarSpec {
        fiber_spec(self.dim)
    }

    /// Degree-one coefficient matrix.
    pub fn linearize(&self) -> Mat {
        let spec = self.spec();
        (0..self.dim)
            .map(|i| {
                (0..self.dim)
                    .map(|j| {
                        let mut idx = vec![0u16; spec.total()];
                        idx[spec.var_u(j)] = 1;
                        self.components[i].coefficient(&idx)
                    })
                    .collect()
            })
            .collect()
    }

    /// Identity linear part: membership in the subgroup the curvature
    /// calculus identifies with flat torsion-free connections.
    pub fn has_identity_linear_part(&self) -> bool {
        let lin = self.linearize();
        (0..self.dim).all(|i| {
            (0..self.dim).all(|j| {
                let want = if i == j {
                    GaussianRational::one()
                } else {
                    GaussianRational::zero()
                };
                lin[i][j] == want
            })
        })
    }

    /// `self ∘ other`: first apply `other`, then `self`.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim || self.order != other.order {
            return Err(Error::Shape(
                "jet composition: mismatched dimension or order".into(),
            ));
        }
        let spec = self.spec();
        let mut components = Vec::with_capacity(self.dim);
        for c in &self.components {
            components.push(c.substitute(&other.components, spec)?);
        }
        Self::new(self.dim, self.order, components)
    }

    /// Group inverse by degree-by-degree back-substitution: split off the
    /// linear part `L` and iterate `ψ ← L⁻¹(u − H(ψ))`, which stabilizes in
    /// `order` rounds because `H` has valuation ≥ 2.
    pub fn invert(&self) -> Result<Self> {
        let spec = self.spec();
        let lin = self.linearize();
        let lin_inv = mat_inverse(&lin)
            .map_err(|_| Error::Domain("jet inversion: singular linear part".into()))?;
        // H = components − L·u, valuation ≥ 2.
        let mut higher: Vec<TruncSeries> = Vec::with_capacity(self.dim);
        for (i, c) in self.components.iter().enumerate() {
            let mut l_part = TruncSeries::zero(spec);
            for j in 0..self.dim {
                l_part = l_part.add(&TruncSeries::var(spec, j).scale(&lin[i][j]));
            }
            higher.push(c.sub(&l_part.clamp_window([i64::MAX, i64::MAX, self.order])));
        }
        let apply_lin_inv = |v: &[TruncSeries]| -> Vec<TruncSeries> {
            (0..self.dim)
                .map(|i| {
                    let mut s = TruncSeries::zero(spec);
                    for j in 0..self.dim {
                        s = s.add(&v[j].scale(&lin_inv[i][j]));
                    }
                    s
                })
                .collect()
        };
        let mut psi = Self::identity(self.dim, self.order).components;
        psi = apply_lin_inv(&psi);
        for _ in 0..self.order.max(0) {
            let mut next = Vec::with_capacity(self.dim);
            for i in 0..self.dim {
                let h_of_psi = higher[i].substitute(&psi, spec)?;
                next.push(TruncSeries::var(spec, i).sub(&h_of_psi));
            }
            psi = apply_lin_inv(&next)
                .into_iter()
                .map(|s| s.clamp_window([i64::MAX, i64::MAX, self.order]))
                .collect();
        }
        Self::new(self.dim, self.order, psi)
    }

    /// Factor as `j ∘ T` with `T` the linear part and `j` carrying identity
    /// linear part.
    pub fn semidirect_split(&self) -> Result<(Self, Mat)> {
        let t = self.linearize();
        let t_inv_jet = Self::linear(&mat_inverse(&t)?, self.order)?;
        let j = self.compose(&t_inv_jet)?;
        Ok((j, t))
    }

    /// Conjugation-style action of a full-group jet on an identity-linear
    /// jet: `ψ · φ = ψ ∘ φ ∘ (d₀ψ)⁻¹`. Preserves the identity linear part.
    pub fn act_on_identity_linear(&self, phi: &Self) -> Result<Self> {
        if !phi.has_identity_linear_part() {
            return Err(Error::Domain(
                "jet action: target does not have identity linear part".into(),
            ));
        }
        let d0_inv = Self::linear(&mat_inverse(&self.linearize())?, self.order)?;
        self.compose(phi)?.compose(&d0_inv)
    }
}

impl VectorFieldJet {
    pub fn new(dim: usize, order: i64, components: Vec<TruncSeries>, min_valuation: i64) -> Result<Self> {
        if components.len() != dim {
            return Err(Error::Shape("vector field jet: component count".into()));
        }
        let spec = fiber_spec(dim);
        let mut comps = Vec::with_capacity(dim);
        for c in components {
            if c.spec != spec {
                return Err(Error::Shape(
                    "vector field jet: component over a non-fiber layout".into(),
                ));
            }
            let c = c.clamp_window([i64::MAX, i64::MAX, order]);
            if !c.is_zero() && c.valuation(Group::U) < min_valuation {
                return Err(Error::Domain(format!(
                    "vector field jet: valuation below {}",
                    min_valuation
                )));
            }
            comps.push(c);
        }
        Ok(Self {
            dim,
            order,
            components: comps,
        })
    }

    /// Derivation action on a fiber series: Σ_i X^i ∂f/∂u_i.
    pub fn act_on_function(&self, f: &TruncSeries) -> TruncSeries {
        let spec = fiber_spec(self.dim);
        assert_eq!(f.spec, spec, "vector field acts on fiber series");
        let mut out = TruncSeries::zero(spec);
        for (i, x) in self.components.iter().enumerate() {
            out = out.add(&x.mul(&f.partial(spec.var_u(i))));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::GaussianRational as Q;

    fn one_var_jet(order: i64, quad: i64) -> AutoJet {
        let spec = fiber_spec(1);
        let c = TruncSeries::var(spec, 0).add(&TruncSeries::monomial(
            spec,
            vec![2],
            Q::from_int(quad),
        ));
        AutoJet::new(1, order, vec![c]).unwrap()
    }

    /// (t + a t²) ∘ (t + b t²) = t + (a+b) t² + 2ab t³ at order 3.
    #[test]
    fn quadratic_composition_closed_form() {
        let phi = one_var_jet(3, 2);
        let psi = one_var_jet(3, 7);
        let c = phi.compose(&psi).unwrap();
        assert_eq!(c.components[0].coefficient(&[1]), Q::one());
        assert_eq!(c.components[0].coefficient(&[2]), Q::from_int(9));
        assert_eq!(c.components[0].coefficient(&[3]), Q::from_int(2 * 2 * 7));
    }

    /// (t + a t²)⁻¹ = t − a t² + 2a² t³ at order 3.
    #[test]
    fn quadratic_inverse_closed_form() {
        let phi = one_var_jet(3, 4);
        let inv = phi.invert().unwrap();
        assert_eq!(inv.components[0].coefficient(&[1]), Q::one());
        assert_eq!(inv.components[0].coefficient(&[2]), Q::from_int(-4));
        assert_eq!(inv.components[0].coefficient(&[3]), Q::from_int(32));
        let id = phi.compose(&inv).unwrap();
        assert_eq!(id, AutoJet::identity(1, 3));
    }

    /// Splitting recomposes and the factors have the stated shapes.
    #[test]
    fn semidirect_split_recomposes() {
        let spec = fiber_spec(2);
        let c0 = TruncSeries::var(spec, 0)
            .scale(&Q::from_int(2))
            .add(&TruncSeries::var(spec, 1))
            .add(&TruncSeries::monomial(spec, vec![1, 1], Q::from_int(3)));
        let c1 = TruncSeries::var(spec, 1).add(&TruncSeries::monomial(
            spec,
            vec![0, 2],
            Q::from_int(-1),
        ));
        let phi = AutoJet::new(2, 3, vec![c0, c1]).unwrap();
        let (j, t) = phi.semidirect_split().unwrap();
        assert!(j.has_identity_linear_part());
        let recomposed = j.compose(&AutoJet::linear(&t, 3).unwrap()).unwrap();
        assert_eq!(recomposed, phi);
    }

    /// Euler field acts diagonally on monomials.
    #[test]
    fn euler_field_scales_by_degree() {
        let spec = fiber_spec(1);
        let x = VectorFieldJet::new(1, 5, vec![TruncSeries::var(spec, 0)], 1).unwrap();
        let f = TruncSeries::monomial(spec, vec![4], Q::one());
        let xf = x.act_on_function(&f);
        assert_eq!(xf.coefficient(&[4]), Q::from_int(4));
    }
}
