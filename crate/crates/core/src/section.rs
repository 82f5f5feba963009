//! The family picture: connections in the formal-neighborhood directions
//! parameterized by a base chart, sections of the induced jet bundle, and
//! the triangular recovery of the connection form from a section.
//!
//! Charts here carry the layout (z_0..z_{n−1}, u_0..u_{n−1} | z̄_0..z̄_{n−1}):
//! the formal directions u share the unbarred window group with z, because
//! a family like Γ(z + u, z̄) is only reliable in joint (z, u)-degree.
//!
//! Invariants:
//! * family Christoffels act in the u-directions only; z and z̄ ride along
//!   as parameters through every substitution and Jacobian;
//! * a section datum stores E(w_l) for each coordinate: degree 0 is z_l,
//!   degree 1 is exactly u_l, higher degrees are the expansion tail;
//! * the connection form is solved degree by degree and the full identity
//!   ∂̄E(w_l) = Ω(E(w_l)) is re-checked after the solve, so the triangular
//!   system's uniqueness is witnessed rather than assumed;
//! * fiberwise reparameterizations are unipotent in u (identity linear
//!   part), so their inversion is a terminating u-adic iteration.

use crate::covariant::{covariant_tower, project_level, Christoffels};
use crate::dolbeault::{apply_form_hom, twisted_dbar, DolbeaultElement, FormHom, IdentityEvidence};
use crate::error::{Error, Result};
use crate::kahler::ChartConnection;
use crate::matrix::{series_mat_inverse, SeriesMat};
use crate::num::GaussianRational;
use crate::series::{Group, TruncSeries, VarSpec, RELIABLE_EXACT};

// ---------------------------------------------------------------------------
// Family chart layout
// ---------------------------------------------------------------------------

pub fn family_spec(dim: usize) -> VarSpec {
    VarSpec::new(2 * dim, dim, 0)
}

pub fn family_z(dim: usize, i: usize) -> usize {
    debug_assert!(i < dim);
    i
}

pub fn family_u(dim: usize, i: usize) -> usize {
    debug_assert!(i < dim);
    dim + i
}

pub fn family_zbar(dim: usize, i: usize) -> usize {
    debug_assert!(i < dim);
    2 * dim + i
}

/// Degree of a family monomial in the u-slots alone.
fn u_degree(dim: usize, idx: &[u16]) -> i64 {
    idx[dim..2 * dim].iter().map(|&e| e as i64).sum()
}

/// Drop terms of u-degree above `cap` (jet truncation in the formal
/// directions; the unbarred window still bounds joint (z, u)-degree).
fn truncate_u(dim: usize, s: &TruncSeries, cap: i64) -> TruncSeries {
    TruncSeries::from_terms(
        s.spec,
        s.reliable,
        s.terms()
            .filter(|(idx, _)| u_degree(dim, idx) <= cap)
            .map(|(idx, c)| (idx.clone(), c.clone())),
    )
}

/// Set u = 0 and reinterpret over the base layout (z | z̄). The unbarred
/// window survives: joint (z, u)-degree ≤ r covers z-degree ≤ r.
fn restrict_family_to_base(dim: usize, s: &TruncSeries) -> TruncSeries {
    let base = VarSpec::base(dim);
    TruncSeries::from_terms(
        base,
        [
            s.reliable[Group::Z as usize],
            s.reliable[Group::Zbar as usize],
            RELIABLE_EXACT,
        ],
        s.terms().filter(|(idx, _)| u_degree(dim, idx) == 0).map(|(idx, c)| {
            let mut out = vec![0u16; 2 * dim];
            out[..dim].copy_from_slice(&idx[..dim]);
            out[dim..].copy_from_slice(&idx[2 * dim..]);
            (out, c.clone())
        }),
    )
}

/// Transport a base function to the family chart: f(z, z̄) ↦ f(z + u, z̄).
pub fn transport_to_family(dim: usize, f: &TruncSeries) -> Result<TruncSeries> {
    let spec = family_spec(dim);
    let mut images = Vec::with_capacity(2 * dim);
    for i in 0..dim {
        images.push(
            TruncSeries::var(spec, family_z(dim, i))
                .add(&TruncSeries::var(spec, family_u(dim, i))),
        );
    }
    for i in 0..dim {
        images.push(TruncSeries::var(spec, family_zbar(dim, i)));
    }
    f.substitute(&images, spec)
}

// ---------------------------------------------------------------------------
// Connection families
// ---------------------------------------------------------------------------

/// A connection in the u-directions with coefficients over the family
/// chart; (z, z̄) are parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChartConnectionFamily {
    pub dim: usize,
    pub christoffels: Christoffels,
}

impl ChartConnectionFamily {
    pub fn new(dim: usize, christoffels: Christoffels) -> Result<Self> {
        if christoffels.spec != family_spec(dim) || christoffels.dim != dim {
            return Err(Error::Shape(
                "connection family: Christoffels over a non-family layout".into(),
            ));
        }
        Ok(Self { dim, christoffels })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            christoffels: Christoffels::zero(dim, family_spec(dim)),
        }
    }

    pub fn is_torsion_free(&self) -> bool {
        self.christoffels.is_torsion_free()
    }
}

/// The family induced by a chart connection: Γ_fam(z, z̄, u) = Γ(z + u, z̄),
/// the metric connection carried to the formal neighborhood of each point.
pub fn metric_family(conn: &ChartConnection) -> Result<ChartConnectionFamily> {
    let dim = conn.dim;
    let spec = family_spec(dim);
    let mut images = Vec::with_capacity(2 * dim);
    for i in 0..dim {
        images.push(
            TruncSeries::var(spec, family_z(dim, i))
                .add(&TruncSeries::var(spec, family_u(dim, i))),
        );
    }
    for i in 0..dim {
        images.push(TruncSeries::var(spec, family_zbar(dim, i)));
    }
    let mut ch = Christoffels::zero(dim, spec);
    for ((l, i, j), s) in &conn.christoffels.gamma {
        ch.set(*l, *i, *j, s.substitute(&images, spec)?);
    }
    ChartConnectionFamily::new(dim, ch)
}

// ---------------------------------------------------------------------------
// Fiberwise reparameterizations
// ---------------------------------------------------------------------------

/// A fiberwise formal diffeomorphism u ↦ ψ(z, z̄, u): vanishes at u = 0,
/// identity linear part, polynomial coefficients in the base. `order` is
/// the retained u-adic jet order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FamilyJet {
    pub dim: usize,
    pub order: i64,
    pub components: Vec<TruncSeries>,
}

impl FamilyJet {
    pub fn new(dim: usize, order: i64, components: Vec<TruncSeries>) -> Result<Self> {
        let spec = family_spec(dim);
        if components.len() != dim {
            return Err(Error::Shape("family jet: one component per direction".into()));
        }
        if order < 1 {
            return Err(Error::Shape("family jet: order below 1".into()));
        }
        for (i, c) in components.iter().enumerate() {
            if c.spec != spec {
                return Err(Error::Shape("family jet: component over wrong layout".into()));
            }
            for (idx, coeff) in c.terms() {
                let d = u_degree(dim, idx);
                if d == 0 {
                    return Err(Error::Domain(format!(
                        "family jet: component {} has a u-independent term",
                        i
                    )));
                }
                if d == 1 {
                    let expected = idx[dim + i] == 1
                        && idx.iter().enumerate().all(|(v, &e)| v == dim + i || e == 0);
                    if !expected || coeff != &GaussianRational::one() {
                        return Err(Error::Domain(format!(
                            "family jet: component {} is not identity-linear in u",
                            i
                        )));
                    }
                }
            }
        }
        let components = components
            .iter()
            .map(|c| truncate_u(dim, c, order))
            .collect();
        Ok(Self {
            dim,
            order,
            components,
        })
    }

    pub fn identity(dim: usize, order: i64) -> Self {
        let spec = family_spec(dim);
        let components = (0..dim)
            .map(|i| TruncSeries::var(spec, family_u(dim, i)))
            .collect();
        Self::new(dim, order, components).expect("identity jet is well formed")
    }

    /// Substitution images: z and z̄ fixed, u ↦ components.
    fn images(&self) -> Vec<TruncSeries> {
        let dim = self.dim;
        let spec = family_spec(dim);
        let mut images = Vec::with_capacity(2 * dim);
        for i in 0..dim {
            images.push(TruncSeries::var(spec, family_z(dim, i)));
        }
        for c in &self.components {
            images.push(c.clone());
        }
        for i in 0..dim {
            images.push(TruncSeries::var(spec, family_zbar(dim, i)));
        }
        images
    }

    /// Substitute this jet into a family-chart series (u-slots only).
    pub fn apply(&self, s: &TruncSeries) -> Result<TruncSeries> {
        let out = s.substitute(&self.images(), family_spec(self.dim))?;
        Ok(truncate_u(self.dim, &out, self.order))
    }

    /// self ∘ other as maps of the formal directions.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim || self.order != other.order {
            return Err(Error::Shape("family jet composition: mismatched shapes".into()));
        }
        let components = self
            .components
            .iter()
            .map(|c| other.apply(c))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.dim, self.order, components)
    }

    /// u-adic inverse by unipotent iteration: ψ ← u − H(ψ) with H the
    /// nonlinear tail; each round is exact one u-degree further.
    pub fn invert(&self) -> Result<Self> {
        let dim = self.dim;
        let spec = family_spec(dim);
        let identity: Vec<TruncSeries> = (0..dim)
            .map(|i| TruncSeries::var(spec, family_u(dim, i)))
            .collect();
        let tail: Vec<TruncSeries> = self
            .components
            .iter()
            .zip(&identity)
            .map(|(c, u)| c.sub(u))
            .collect();
        let mut psi = identity.clone();
        for _ in 0..self.order {
            let stage = Self {
                dim,
                order: self.order,
                components: psi.clone(),
            };
            psi = tail
                .iter()
                .zip(&identity)
                .map(|(h, u)| Ok(u.sub(&stage.apply(h)?)))
                .collect::<Result<Vec<_>>>()?;
        }
        Self::new(dim, self.order, psi)
    }
}

/// Carry a connection family along a fiberwise reparameterization φ:
/// Γ'^c_{ab} = Σ_k (∂φ/∂u)_{ck}∘ψ · [∂_a∂_bψ_k + Σ_{ij} Γ^k_{ij}∘ψ ·
/// (∂ψ)_{ia}(∂ψ)_{jb}] with ψ = φ⁻¹; all derivatives and compositions in
/// the u-slots. Jacobians are clamped to `work_order` in the unbarred and
/// barred windows before series inversion.
pub fn carry_family(
    fam: &ChartConnectionFamily,
    phi: &FamilyJet,
    work_order: i64,
) -> Result<ChartConnectionFamily> {
    let dim = fam.dim;
    if phi.dim != dim {
        return Err(Error::Shape("family carry: dimension mismatch".into()));
    }
    if work_order < 0 || work_order >= phi.order {
        return Err(Error::Shape(
            "family carry: working order must sit below the jet order".into(),
        ));
    }
    let spec = family_spec(dim);
    let psi = phi.invert()?;
    let clamp = [work_order, work_order, RELIABLE_EXACT];
    // Jacobian of ψ in the u-slots, clamped to the working window.
    let jac_psi: SeriesMat = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|a| {
                    psi.components[i]
                        .partial(family_u(dim, a))
                        .clamp_window(clamp)
                })
                .collect()
        })
        .collect();
    // (∂φ/∂u) evaluated at ψ is the matrix inverse of the ψ-Jacobian.
    let jac_phi_at_psi = series_mat_inverse(&jac_psi)?;
    let mut ch = Christoffels::zero(dim, spec);
    for c in 0..dim as u8 {
        for a in 0..dim as u8 {
            for b in 0..=a {
                let mut total = TruncSeries::zero(spec);
                for k in 0..dim {
                    let hessian = psi.components[k]
                        .partial(family_u(dim, a as usize))
                        .partial(family_u(dim, b as usize));
                    let mut inner = hessian;
                    for i in 0..dim as u8 {
                        for j in 0..dim as u8 {
                            let g = fam.christoffels.get(k as u8, i, j);
                            if g.is_zero() && g.reliable == [RELIABLE_EXACT; 3] {
                                continue;
                            }
                            let composed = psi.apply(&g)?;
                            inner = inner.add(
                                &composed
                                    .mul(&jac_psi[i as usize][a as usize])
                                    .mul(&jac_psi[j as usize][b as usize]),
                            );
                        }
                    }
                    total = total.add(&jac_phi_at_psi[c as usize][k].mul(&inner));
                }
                ch.set(c, a, b, total.clone());
                if a != b {
                    ch.set(c, b, a, total);
                }
            }
        }
    }
    let out = ChartConnectionFamily::new(dim, ch)?;
    if !out.is_torsion_free() {
        return Err(Error::Domain(
            "family carry: result lost torsion-freeness".into(),
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Sections and their expansion operator
// ---------------------------------------------------------------------------

/// Expansion of a family-chart function along a connection family:
/// degree-k fiber coefficient = (1/k!) symmetrized k-fold covariant
/// u-derivative at u = 0.
pub fn expand_family_function(
    fam: &ChartConnectionFamily,
    f: &TruncSeries,
    fiber_cap: i64,
) -> Result<DolbeaultElement> {
    let dim = fam.dim;
    if f.spec != family_spec(dim) {
        return Err(Error::Shape("family expansion: wrong input layout".into()));
    }
    let deriv: Vec<usize> = (0..dim).map(|i| family_u(dim, i)).collect();
    let tower = covariant_tower(f, &fam.christoffels, &deriv, fiber_cap.max(0) as usize)?;
    let mut out = DolbeaultElement::zero(dim, fiber_cap);
    out.fiber_reliable = fiber_cap;
    for level in &tower {
        let projected = project_level(level, true)?;
        for (mu, c) in projected {
            out.accumulate_term(Vec::new(), mu, restrict_family_to_base(dim, &c));
        }
    }
    Ok(out)
}

/// A section datum: the expansions E(w_l) of the coordinate functions,
/// one per direction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SectionData {
    pub dim: usize,
    pub fiber_cap: i64,
    pub components: Vec<DolbeaultElement>,
}

/// Section induced by a connection family: E(w_l) for w_l = z_l + u_l.
pub fn section_from_family(
    fam: &ChartConnectionFamily,
    fiber_cap: i64,
) -> Result<SectionData> {
    let dim = fam.dim;
    let spec = family_spec(dim);
    let mut components = Vec::with_capacity(dim);
    for l in 0..dim {
        let f = TruncSeries::var(spec, family_z(dim, l))
            .add(&TruncSeries::var(spec, family_u(dim, l)));
        components.push(expand_family_function(fam, &f, fiber_cap)?);
    }
    Ok(SectionData {
        dim,
        fiber_cap,
        components,
    })
}

/// Recover the connection form from a section: ascending in fiber degree
/// d, the degree-d datum is read off from
/// α_d(u_l) = (∂̄E(w_l) − Ω_{<d}(tail of E(w_l)))|_degree d,
/// then the full identity ∂̄E(w_l) = Ω(E(w_l)) is re-verified.
pub fn connection_form_from_section(sec: &SectionData) -> Result<Vec<FormHom>> {
    let dim = sec.dim;
    let base = VarSpec::base(dim);
    let n = sec.fiber_cap;
    // Shape checks: degree-0 component is z_l, degree-1 is exactly u_l.
    for (l, e) in sec.components.iter().enumerate() {
        let deg0 = e.fiber_degree_part(0);
        let z_l = DolbeaultElement::function(dim, n, TruncSeries::var(base, base.var_z(l)));
        if !deg0.sub(&z_l).is_zero() {
            return Err(Error::Domain(format!(
                "section: degree-0 part of component {} is not the coordinate",
                l
            )));
        }
        let deg1 = e.fiber_degree_part(1);
        let u_l = DolbeaultElement::fiber_generator(dim, n, l as u8);
        if !deg1.sub(&u_l).is_zero() {
            return Err(Error::Domain(format!(
                "section: degree-1 part of component {} is not the generator",
                l
            )));
        }
    }
    let dbars: Vec<DolbeaultElement> =
        sec.components.iter().map(|e| e.dbar()).collect();
    let tails: Vec<DolbeaultElement> = sec
        .components
        .iter()
        .map(|e| {
            let mut tail = DolbeaultElement::zero(dim, n);
            tail.fiber_reliable = e.fiber_reliable;
            for (key, s) in &e.terms {
                if key.1.len() >= 2 {
                    tail.accumulate_term(key.0.clone(), key.1.clone(), s.clone());
                }
            }
            tail
        })
        .collect();
    let mut omega: Vec<FormHom> = Vec::new();
    for d in 2..=n.max(1) {
        let mut alpha = FormHom::zero(d as usize, dim, base);
        for l in 0..dim {
            let mut resid = dbars[l].clone();
            for a in &omega {
                resid = resid.sub(&apply_form_hom(a, &tails[l]));
            }
            let at_d = resid.fiber_degree_part(d as usize);
            for ((s, mu), c) in &at_d.terms {
                if s.len() != 1 {
                    return Err(Error::Domain(format!(
                        "section solve: component of wedge degree {} at fiber degree {}",
                        s.len(),
                        d
                    )));
                }
                alpha.parts[s[0] as usize].set(l as u8, mu.clone(), c.clone());
            }
        }
        omega.push(alpha);
    }
    // Witness the full identity, not just the triangular construction.
    for l in 0..dim {
        let mut resid = dbars[l].clone();
        for a in &omega {
            resid = resid.sub(&apply_form_hom(a, &sec.components[l]));
        }
        if !resid.is_zero() {
            return Err(Error::Domain(format!(
                "section solve: identity fails on component {}: {}",
                l,
                resid.sample_term().unwrap_or_default()
            )));
        }
    }
    Ok(omega)
}

/// Flatness identity of the recovered form: the twisted differential it
/// defines squares to zero on every fiber generator,
/// ∂̄(Ω(u_l)) + Ω(Ω(u_l)) = 0 through degree `fiber_cap`.
pub fn check_maurer_cartan(
    omega: &[FormHom],
    dim: usize,
    fiber_cap: i64,
) -> Result<IdentityEvidence> {
    let mut fiber_floor = fiber_cap;
    let mut window = [RELIABLE_EXACT; 3];
    let mut checked = 0usize;
    for l in 0..dim {
        let gen = DolbeaultElement::fiber_generator(dim, fiber_cap, l as u8);
        let dd = twisted_dbar(omega, &twisted_dbar(omega, &gen));
        if !dd.is_zero() {
            return Err(Error::Domain(format!(
                "flatness of the connection form fails on generator {}: {}",
                l,
                dd.sample_term().unwrap_or_default()
            )));
        }
        fiber_floor = fiber_floor.min(dd.fiber_reliable);
        let w = dd.min_base_reliable();
        for g in 0..3 {
            window[g] = window[g].min(w[g]);
        }
        checked += 1;
    }
    Ok(IdentityEvidence {
        fiber_reliable: fiber_floor,
        min_base_window: window,
        terms_checked: checked,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dolbeault::{exp_star, to_form_hom, BiChartForm};
    use crate::kahler::{curvature_tensor, curvature_tower, levi_civita, ChartMetric};
    use crate::num::GaussianRational as Q;

    /// Flat metric: the family is translation, E(w_l) = z_l + u_l, and the
    /// recovered form vanishes identically.
    #[test]
    fn flat_family_is_translation() {
        let h = ChartMetric::flat(1, 4);
        let conn = levi_civita(&h).unwrap();
        let fam = metric_family(&conn).unwrap();
        assert!(fam.christoffels.is_zero());
        let sec = section_from_family(&fam, 4).unwrap();
        let base = VarSpec::base(1);
        let expect = DolbeaultElement::function(1, 4, TruncSeries::var(base, base.var_z(0)))
            .add(&DolbeaultElement::fiber_generator(1, 4, 0));
        assert!(sec.components[0].sub(&expect).is_zero());
        let omega = connection_form_from_section(&sec).unwrap();
        assert!(omega.iter().all(|a| a.is_zero()));
        check_maurer_cartan(&omega, 1, 4).unwrap();
    }

    /// The family expansion agrees with the two-factor expansion engine on
    /// the same function — two independent layouts and code paths.
    #[test]
    fn family_expansion_matches_two_factor_engine() {
        let h = ChartMetric::fubini_study(1, 4);
        let conn = levi_civita(&h).unwrap();
        let fam = metric_family(&conn).unwrap();
        // f = w² in the two-factor chart ↔ (z + u)² in the family chart.
        let spec2 = crate::dolbeault::bichart_spec(1);
        let w = TruncSeries::var(spec2, crate::dolbeault::bichart_w(1, 0));
        let via_bichart = exp_star(&conn, &BiChartForm::function(1, w.mul(&w)), 4).unwrap();
        let spec_f = family_spec(1);
        let zu = TruncSeries::var(spec_f, family_z(1, 0))
            .add(&TruncSeries::var(spec_f, family_u(1, 0)));
        let via_family = expand_family_function(&fam, &zu.mul(&zu), 4).unwrap();
        let d = via_family.sub(&via_bichart);
        assert!(d.is_zero(), "difference {:?}", d.sample_term());
    }

    /// The big cross-check: the form recovered from the metric family is
    /// the negated curvature tower, level by level.
    #[test]
    fn metric_family_form_is_negated_curvature_tower() {
        let h = ChartMetric::fubini_study(1, 4);
        let conn = levi_civita(&h).unwrap();
        let fam = metric_family(&conn).unwrap();
        let sec = section_from_family(&fam, 4).unwrap();
        let omega = connection_form_from_section(&sec).unwrap();
        let r2 = curvature_tensor(&conn).unwrap();
        let levels = curvature_tower(&conn, &r2, 4).unwrap();
        assert_eq!(omega.len(), levels.len());
        for (a, r) in omega.iter().zip(&levels) {
            let expect = to_form_hom(r).neg();
            let d = a.sub(&expect);
            assert!(d.is_zero(), "level {} mismatch", r.n);
        }
        assert!(!omega[0].is_zero());
        let ev = check_maurer_cartan(&omega, 1, 4).unwrap();
        assert_eq!(ev.fiber_reliable, 4);
        assert!(ev.min_base_window[0] >= 0);
    }

    /// Unipotent inversion round-trips.
    #[test]
    fn family_jet_inverts() {
        let dim = 1;
        let spec = family_spec(dim);
        let u = TruncSeries::var(spec, family_u(dim, 0));
        let zbar = TruncSeries::var(spec, family_zbar(dim, 0));
        let psi = FamilyJet::new(
            dim,
            5,
            vec![u.add(&zbar.mul(&u).mul(&u)).add(&u.mul(&u).mul(&u).scale(&Q::from_ratio(1, 3)))],
        )
        .unwrap();
        let inv = psi.invert().unwrap();
        let round = psi.compose(&inv).unwrap();
        let identity = FamilyJet::identity(dim, 5);
        for (a, b) in round.components.iter().zip(&identity.components) {
            assert!(a.sub(b).is_zero());
        }
    }

    /// A carried family still satisfies the flatness identity, and its
    /// form genuinely differs from the metric one.
    #[test]
    fn carried_family_still_flat() {
        let h = ChartMetric::fubini_study(1, 3);
        let conn = levi_civita(&h).unwrap();
        let fam = metric_family(&conn).unwrap();
        let spec = family_spec(1);
        let u = TruncSeries::var(spec, family_u(1, 0));
        let zbar = TruncSeries::var(spec, family_zbar(1, 0));
        let phi = FamilyJet::new(1, 5, vec![u.add(&zbar.mul(&u).mul(&u))]).unwrap();
        let carried = carry_family(&fam, &phi, 2).unwrap();
        let sec = section_from_family(&carried, 4).unwrap();
        let omega = connection_form_from_section(&sec).unwrap();
        let metric_omega =
            connection_form_from_section(&section_from_family(&fam, 4).unwrap()).unwrap();
        assert!(!omega[0].sub(&metric_omega[0]).is_zero());
        let ev = check_maurer_cartan(&omega, 1, 4).unwrap();
        assert_eq!(ev.fiber_reliable, 4);
        assert!(ev.min_base_window[0] >= 0, "window {:?}", ev.min_base_window);
    }
}
