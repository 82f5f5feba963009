//! Connections on the formal disc: Christoffel jets, torsion and curvature,
//! the exponential straightening jet, and pushforward along automorphisms.
//!
//! A `ConnectionJet` of order `r` knows its Christoffel symbols to fiber
//! degree `r − 1`. The exponential jet of a flat torsion-free connection is
//! the order-`r` automorphism jet assembled from the symmetrized covariant
//! tower of the coordinate functions evaluated at the origin; pushing the
//! Euclidean connection forward along it recovers the connection one order
//! lower (one derivative is spent on the Jacobian).
//!
//! Invariants:
//! * Christoffel entries live in fiber variables only, truncated to
//!   `order − 1`;
//! * `exp_jet` demands torsion-freeness and flatness and asserts the full
//!   symmetry of every covariant tensor it projects;
//! * `exp_jet` and `pushforward(·, euclidean)` are mutually inverse to the
//!   reliable order, and both are equivariant for the jet-group action.

use crate::covariant::{covariant_tower, project_level, Christoffels};
use crate::error::{Error, Result};
use crate::jets::AutoJet;
use crate::matrix::{series_mat_inverse, SeriesMat};
use crate::series::{Group, TruncSeries, VarSpec, RELIABLE_EXACT};
use crate::tensor::SymPoly;

/// Order-`r` jet of a (1,0)-connection on the formal disc.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConnectionJet {
    pub dim: usize,
    pub order: i64,
    pub christoffels: Christoffels,
}

fn fiber_spec(dim: usize) -> VarSpec {
    VarSpec::new(0, 0, dim)
}

impl ConnectionJet {
    /// All Christoffel symbols zero.
    pub fn euclidean(dim: usize, order: i64) -> Self {
        Self {
            dim,
            order,
            christoffels: Christoffels::zero(dim, fiber_spec(dim)),
        }
    }

    /// Wrap a Christoffel table, clamping entries to degree `order − 1`.
    pub fn new(dim: usize, order: i64, mut christoffels: Christoffels) -> Result<Self> {
        if christoffels.spec != fiber_spec(dim) || christoffels.dim != dim {
            return Err(Error::Shape(
                "connection jet: Christoffel table over a non-fiber layout".into(),
            ));
        }
        let window = [RELIABLE_EXACT, RELIABLE_EXACT, order - 1];
        christoffels = Christoffels {
            dim,
            spec: christoffels.spec,
            gamma: christoffels
                .gamma
                .into_iter()
                .map(|(k, s)| (k, s.clamp_window(window)))
                .filter(|(_, s)| !(s.is_zero() && s.is_exact()))
                .collect(),
        };
        Ok(Self {
            dim,
            order,
            christoffels,
        })
    }

    /// From honest entry windows: order = 1 + the smallest entry window,
    /// capped by `max_order`.
    fn from_computed(dim: usize, max_order: i64, christoffels: Christoffels) -> Self {
        let min_window = christoffels.min_reliable()[Group::U as usize];
        let order = max_order.min(min_window.saturating_add(1));
        Self::new(dim, order, christoffels).expect("layout verified by caller")
    }

    pub fn spec(&self) -> VarSpec {
        fiber_spec(self.dim)
    }

    /// Antisymmetric part Γ^l_{ij} − Γ^l_{ji}; empty iff torsion-free.
    pub fn torsion(&self) -> std::collections::BTreeMap<(u8, u8, u8), TruncSeries> {
        self.christoffels.torsion()
    }

    pub fn is_torsion_free(&self) -> bool {
        self.christoffels.is_torsion_free()
    }

    /// Curvature components R^l_{ij,k} = ∂_iΓ^l_{jk} − ∂_jΓ^l_{ik}
    /// + Σ_m (Γ^l_{im}Γ^m_{jk} − Γ^l_{jm}Γ^m_{ik}), antisymmetric in (i,j).
    pub fn curvature(&self) -> std::collections::BTreeMap<(u8, u8, u8, u8), TruncSeries> {
        let spec = self.spec();
        let g = &self.christoffels;
        let mut out = std::collections::BTreeMap::new();
        for l in 0..self.dim as u8 {
            for i in 0..self.dim as u8 {
                for j in 0..i {
                    for k in 0..self.dim as u8 {
                        let mut r = g
                            .get(l, j, k)
                            .partial(spec.var_u(i as usize))
                            .sub(&g.get(l, i, k).partial(spec.var_u(j as usize)));
                        for m in 0..self.dim as u8 {
                            r = r
                                .add(&g.get(l, i, m).mul(&g.get(m, j, k)))
                                .sub(&g.get(l, j, m).mul(&g.get(m, i, k)));
                        }
                        if !r.is_zero() {
                            out.insert((l, i, j, k), r);
                        }
                    }
                }
            }
        }
        out
    }

    pub fn is_flat(&self) -> bool {
        self.curvature().is_empty()
    }

    /// The unique identity-linear automorphism jet whose coordinate
    /// pullbacks are the symmetrized covariant tensors of the coordinate
    /// functions at the origin. Requires torsion-freeness and flatness,
    /// which are also what make those tensors symmetric.
    pub fn exp_jet(&self) -> Result<AutoJet> {
        if !self.is_torsion_free() {
            return Err(Error::Domain(
                "exponential jet: connection has torsion".into(),
            ));
        }
        if !self.is_flat() {
            return Err(Error::Domain(
                "exponential jet: connection is not flat".into(),
            ));
        }
        let spec = self.spec();
        let deriv: Vec<usize> = (0..self.dim).map(|i| spec.var_u(i)).collect();
        let mut components = Vec::with_capacity(self.dim);
        for i in 0..self.dim {
            let f = TruncSeries::var(spec, spec.var_u(i));
            let tower = covariant_tower(&f, &self.christoffels, &deriv, self.order as usize)?;
            let mut comp = TruncSeries::zero(spec);
            for level in tower.iter().skip(1) {
                let projected = project_level(level, true)?;
                for (m, s) in projected {
                    if s.reliable[Group::U as usize] < 0 {
                        return Err(Error::Order {
                            context: "exponential jet: connection order exhausted".into(),
                            max_achievable: self.order - 1,
                        });
                    }
                    let c = s.constant_term();
                    if c.is_zero() {
                        continue;
                    }
                    let mut idx = vec![0u16; spec.total()];
                    for &v in &m {
                        idx[spec.var_u(v as usize)] += 1;
                    }
                    comp = comp.add(&TruncSeries::monomial(spec, idx, c));
                }
            }
            components.push(comp);
        }
        AutoJet::new(self.dim, self.order, components)
    }

    /// Transport along an automorphism jet: the image connection makes the
    /// jet an isomorphism of connections. One jet order is consumed by the
    /// Jacobian, so the result is reliable to order `min(r_φ, r_∇) − 1`
    /// (exactly `r` when everything in sight is below the truncation).
    pub fn pushforward(&self, phi: &AutoJet) -> Result<Self> {
        if phi.dim != self.dim {
            return Err(Error::Shape(
                "connection pushforward: dimension mismatch".into(),
            ));
        }
        let spec = self.spec();
        let n = self.dim;
        let psi = phi.invert()?;
        // Jacobian of the inverse map and its matrix inverse (the Jacobian
        // of `phi` evaluated along `psi`).
        let jac_psi: SeriesMat = (0..n)
            .map(|i| {
                (0..n)
                    .map(|a| psi.components[i].partial(spec.var_u(a)))
                    .collect()
            })
            .collect();
        let jac_phi_at_psi = series_mat_inverse(&jac_psi)?;
        // Christoffels composed with the inverse map.
        let mut gamma_at_psi = std::collections::BTreeMap::new();
        for (&key, s) in &self.christoffels.gamma {
            gamma_at_psi.insert(key, s.substitute(&psi.components, spec)?);
        }
        let get_at = |l: u8, i: u8, j: u8| -> TruncSeries {
            gamma_at_psi
                .get(&(l, i, j))
                .cloned()
                .unwrap_or_else(|| TruncSeries::zero(spec))
        };
        let mut out = Christoffels::zero(n, spec);
        for c in 0..n as u8 {
            for a in 0..n as u8 {
                for b in 0..n as u8 {
                    let mut inner = psi.components[c as usize]
                        .partial(spec.var_u(a as usize))
                        .partial(spec.var_u(b as usize));
                    // Σ_{ij} (Γ^c_{ij}∘ψ) (Jψ)_{ia} (Jψ)_{jb}, then contract
                    // the upper slot with (Jφ)∘ψ below.
                    for i in 0..n as u8 {
                        for j in 0..n as u8 {
                            let g = get_at(c, i, j);
                            if g.is_zero() {
                                continue;
                            }
                            inner = inner.add(
                                &g.mul(&jac_psi[i as usize][a as usize])
                                    .mul(&jac_psi[j as usize][b as usize]),
                            );
                        }
                    }
                    // The c-slot above is still the source index: contract.
                    out.set(c, a, b, inner);
                }
            }
        }
        // Contract with (Jφ)∘ψ: Γ'^c = Σ_k (Jφ∘ψ)_{ck} inner^k.
        let mut contracted = Christoffels::zero(n, spec);
        for c in 0..n as u8 {
            for a in 0..n as u8 {
                for b in 0..n as u8 {
                    let mut s = TruncSeries::zero(spec);
                    for k in 0..n as u8 {
                        let inner = out.get(k, a, b);
                        if inner.is_zero() {
                            continue;
                        }
                        s = s.add(&jac_phi_at_psi[c as usize][k as usize].mul(&inner));
                    }
                    contracted.set(c, a, b, s);
                }
            }
        }
        Ok(Self::from_computed(
            n,
            self.order.min(phi.order),
            contracted,
        ))
    }
}

/// Comparison report for two jets that should agree: the largest fiber
/// degree through which they do, and the first offending coefficient.
#[derive(Clone, Debug)]
pub struct AgreementReport {
    /// Every coefficient of total degree ≤ this agrees (and is reliable).
    pub agrees_to: i64,
    /// Degree required of the comparison by the caller's windows.
    pub required: i64,
    pub discrepancy: Option<String>,
}

impl AgreementReport {
    pub fn holds(&self) -> bool {
        self.discrepancy.is_none() && self.agrees_to >= self.required
    }
}

/// Compare two automorphism jets within their shared reliable window.
pub fn compare_jets(a: &AutoJet, b: &AutoJet) -> AgreementReport {
    let required = a.order.min(b.order).min(
        a.components
            .iter()
            .chain(b.components.iter())
            .map(|s| s.reliable[Group::U as usize])
            .min()
            .unwrap_or(RELIABLE_EXACT),
    );
    let mut agrees_to = required;
    let mut discrepancy = None;
    for (i, (ca, cb)) in a.components.iter().zip(&b.components).enumerate() {
        let d = ca.sub(cb);
        if d.is_zero() {
            continue;
        }
        let bad = d.valuation(Group::U) - 1;
        if bad < agrees_to {
            agrees_to = bad;
            let (idx, c) = d.terms().next().map(|(i, c)| (i.clone(), c.clone())).unwrap();
            discrepancy = Some(format!(
                "component {}: coefficient {} at exponents {:?}",
                i, c, idx
            ));
        }
    }
    AgreementReport {
        agrees_to,
        required,
        discrepancy,
    }
}

/// Equivariance of the exponential construction: straightening the
/// transported connection equals acting on the straightening jet.
pub fn check_equivariance(psi: &AutoJet, c: &ConnectionJet) -> Result<AgreementReport> {
    let transported = c.pushforward(psi)?;
    let lhs = transported.exp_jet()?;
    let rhs = psi.act_on_identity_linear(&c.exp_jet()?)?;
    Ok(compare_jets(&lhs, &rhs))
}

/// The Euclidean covariant derivative of a constant symmetric symbol:
/// `v₁⋯v_n ↦ Σ_i v₁⋯v̂_i⋯v_n ⊗ v_i`, returned as (direction, remainder)
/// pairs with multiplicity. The base case of every covariant tower.
pub fn euclidean_symbol_derivative(p: &SymPoly) -> Vec<(u8, SymPoly)> {
    let mut out: std::collections::BTreeMap<u8, SymPoly> = std::collections::BTreeMap::new();
    for (m, c) in &p.terms {
        let mut seen = Vec::new();
        for &v in m {
            if seen.contains(&v) {
                continue;
            }
            seen.push(v);
            let mult = m.iter().filter(|&&x| x == v).count() as i64;
            let rest = crate::tensor::multiset_remove(m, v);
            let mut coeff = c.clone();
            coeff.scale_int(mult);
            let piece = SymPoly::monomial(p.dim, rest, coeff);
            out.entry(v)
                .and_modify(|acc| *acc = acc.add(&piece))
                .or_insert(piece);
        }
    }
    out.into_iter().filter(|(_, p)| !p.is_zero()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::GaussianRational as Q;

    fn constant_gamma_dim1(cval: i64, order: i64) -> ConnectionJet {
        let spec = fiber_spec(1);
        let mut ch = Christoffels::zero(1, spec);
        ch.set(0, 0, 0, TruncSeries::constant(spec, Q::from_int(cval)));
        ConnectionJet::new(1, order, ch).unwrap()
    }

    /// Γ ≡ c in dimension 1: expsends t to t − (c/2)t² + (c²/3)t³ − (c³/4)t⁴
    /// + (c⁴/5)t⁵, the expansion of log(1+ct)/c.
    #[test]
    fn exp_jet_matches_logarithm_series() {
        let c = 3i64;
        let conn = constant_gamma_dim1(c, 5);
        let e = conn.exp_jet().unwrap();
        let comp = &e.components[0];
        let expect = [
            Q::one(),
            Q::from_ratio(-c, 2),
            Q::from_ratio(c * c, 3),
            Q::from_ratio(-c * c * c, 4),
            Q::from_ratio(c * c * c * c, 5),
        ];
        for (k, want) in expect.iter().enumerate() {
            assert_eq!(&comp.coefficient(&[(k + 1) as u16]), want, "degree {}", k + 1);
        }
    }

    /// The exponential jet inverts the bijection: pushing Euclidean forward
    /// along it recovers the Christoffels one order lower.
    #[test]
    fn exp_jet_and_euclidean_pushforward_are_inverse() {
        let conn = constant_gamma_dim1(2, 5);
        let e = conn.exp_jet().unwrap();
        let back = ConnectionJet::euclidean(1, 5).pushforward(&e).unwrap();
        assert!(back.order >= 4);
        let diff = back.christoffels.get(0, 0, 0).sub(&conn.christoffels.get(0, 0, 0));
        assert!(diff.is_zero(), "difference {}", diff);
        assert!(diff.reliable[Group::U as usize] >= 3);
    }

    /// Pushforward by the identity is the identity on connections.
    #[test]
    fn pushforward_by_identity_keeps_connection() {
        let conn = constant_gamma_dim1(7, 4);
        let id = AutoJet::identity(1, 4);
        let back = conn.pushforward(&id).unwrap();
        assert_eq!(back.christoffels.get(0, 0, 0).constant_term(), Q::from_int(7));
        assert!(back
            .christoffels
            .get(0, 0, 0)
            .sub(&conn.christoffels.get(0, 0, 0))
            .is_zero());
    }

    /// Dimension-2 torsion detection.
    #[test]
    fn torsion_detects_asymmetry() {
        let spec = fiber_spec(2);
        let mut ch = Christoffels::zero(2, spec);
        ch.set(0, 0, 1, TruncSeries::one(spec));
        let conn = ConnectionJet::new(2, 3, ch).unwrap();
        assert!(!conn.is_torsion_free());
        assert_eq!(conn.torsion().len(), 1);
    }

    /// Euclidean symbol derivative reproduces Σ_i v̂_i ⊗ v_i with
    /// multiplicities.
    #[test]
    fn euclidean_symbol_derivative_formula() {
        // v1 v2 ↦ (v1, v2) + (v2, v1)
        let p = SymPoly::monomial(2, vec![0, 1], Q::one());
        let d = euclidean_symbol_derivative(&p);
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].0, 0);
        assert_eq!(d[0].1.terms[&vec![1]], Q::one());
        assert_eq!(d[1].0, 1);
        assert_eq!(d[1].1.terms[&vec![0]], Q::one());
        // v·v ↦ 2 (v, v)
        let sq = SymPoly::monomial(1, vec![0, 0], Q::one());
        let d2 = euclidean_symbol_derivative(&sq);
        assert_eq!(d2.len(), 1);
        assert_eq!(d2[0].1.terms[&vec![0]], Q::from_int(2));
    }
}
