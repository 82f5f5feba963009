//! Antiholomorphic forms valued in truncated fiber polynomials, the
//! curvature-twisted differential, and the covariant Taylor-expansion maps
//! from two-factor chart forms into the fiber model.
//!
//! A `DolbeaultElement` is Σ dz̄_S · f_{S,μ}(z, z̄) · u^μ with strictly
//! sorted dz̄ index sets and fiber degree capped at `fiber_cap`. A
//! `FormHom` is a dz̄-valued derivation datum: its part `k` sends each
//! fiber generator to a fiber polynomial, extended to the whole algebra by
//! the Leibniz rule and wedged in as dz̄_k from the left.
//!
//! Invariants:
//! * dz̄ sets strictly sorted; a repeated index annihilates the term;
//! * coefficients that cancel exactly are removed, while coefficients that
//!   are zero only within a finite window are kept, so "this vanished" is
//!   always qualified by how far it was computed;
//! * `fiber_reliable` tracks the largest fiber degree whose coefficients
//!   are complete: a degree-n derivation raises it by n − 1 up to the cap,
//!   and the twisted differential additionally loses whatever the finite
//!   tower of derivations cannot see;
//! * all odd insertions (∂̄ in either factor, derivation parts) enter from
//!   the left with the sign (−1)^{#{s ∈ S : s < j}}; products carry the
//!   merge sign of concatenating index sets;
//! * the expansion maps put every 1/k! through the symmetrized word
//!   projection — no other normalization path exists.

use std::collections::BTreeMap;

use crate::covariant::{covariant_tower, project_level, Christoffels, TowerLevel};
use crate::error::{Error, Result};
use crate::kahler::{curvature_tensor, curvature_tower, ChartConnection, CurvatureTensor};
use crate::series::{Group, TruncSeries, VarSpec, RELIABLE_EXACT};
use crate::tensor::{multiset_stabilizer, HomTensor};

// ---------------------------------------------------------------------------
// Index-set combinatorics for wedge factors
// ---------------------------------------------------------------------------

/// Insert `j` into a strictly sorted set from the left of the wedge,
/// i.e. dz̄_j ∧ dz̄_S = (−1)^{#{s<j}} dz̄_{S∪{j}}. `None` if `j` repeats.
pub fn insert_antihol(s: &[u8], j: u8) -> Option<(Vec<u8>, bool)> {
    if s.contains(&j) {
        return None;
    }
    let before = s.iter().filter(|&&x| x < j).count();
    let mut out = s.to_vec();
    out.push(j);
    out.sort_unstable();
    Some((out, before % 2 == 1))
}

/// Concatenate dz̄_A ∧ dz̄_B and sort into canonical order; the sign is the
/// parity of the merge permutation. `None` on a shared index.
pub fn merge_antihol(a: &[u8], b: &[u8]) -> Option<(Vec<u8>, bool)> {
    let mut inversions = 0usize;
    for &x in a {
        for &y in b {
            if x == y {
                return None;
            }
            if x > y {
                inversions += 1;
            }
        }
    }
    let mut out = Vec::with_capacity(a.len() + b.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out.sort_unstable();
    Some((out, inversions % 2 == 1))
}

// ---------------------------------------------------------------------------
// DolbeaultElement
// ---------------------------------------------------------------------------

/// Truncated (0,q)-forms valued in fiber polynomials of degree ≤ cap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DolbeaultElement {
    pub dim: usize,
    pub fiber_cap: i64,
    /// Fiber degrees ≤ this carry complete coefficients.
    pub fiber_reliable: i64,
    pub terms: BTreeMap<(Vec<u8>, Vec<u8>), TruncSeries>,
}

impl DolbeaultElement {
    pub fn base_spec(&self) -> VarSpec {
        VarSpec::base(self.dim)
    }

    pub fn zero(dim: usize, fiber_cap: i64) -> Self {
        Self {
            dim,
            fiber_cap,
            fiber_reliable: fiber_cap,
            terms: BTreeMap::new(),
        }
    }

    /// A single term dz̄_S · f · u^μ.
    pub fn term(dim: usize, fiber_cap: i64, s: Vec<u8>, mut mu: Vec<u8>, f: TruncSeries) -> Self {
        let mut out = Self::zero(dim, fiber_cap);
        mu.sort_unstable();
        debug_assert!(s.windows(2).all(|w| w[0] < w[1]), "dz̄ set strictly sorted");
        out.accumulate((s, mu), f);
        out
    }

    /// A fiber-degree-0 function.
    pub fn function(dim: usize, fiber_cap: i64, f: TruncSeries) -> Self {
        Self::term(dim, fiber_cap, Vec::new(), Vec::new(), f)
    }

    /// The fiber generator u_l.
    pub fn fiber_generator(dim: usize, fiber_cap: i64, l: u8) -> Self {
        let spec = VarSpec::base(dim);
        Self::term(dim, fiber_cap, Vec::new(), vec![l], TruncSeries::one(spec))
    }

    /// Add a term dz̄_S · f · u^μ in place (sorted-key variant of
    /// [`DolbeaultElement::accumulate`]).
    pub fn accumulate_term(&mut self, s: Vec<u8>, mu: Vec<u8>, f: TruncSeries) {
        debug_assert!(s.windows(2).all(|w| w[0] < w[1]), "dz̄ set strictly sorted");
        debug_assert!(mu.windows(2).all(|w| w[0] <= w[1]), "fiber multiset sorted");
        self.accumulate((s, mu), f);
    }

    /// Add `f` at `key`, keeping windowed zeros but dropping exact ones,
    /// and silently truncating fiber degrees beyond the cap (the caller
    /// accounts for that in `fiber_reliable`).
    fn accumulate(&mut self, key: (Vec<u8>, Vec<u8>), f: TruncSeries) {
        if key.1.len() as i64 > self.fiber_cap {
            return;
        }
        let entry = match self.terms.remove(&key) {
            Some(cur) => cur.add(&f),
            None => f,
        };
        if entry.is_zero() && entry.reliable == [RELIABLE_EXACT; 3] {
            return;
        }
        self.terms.insert(key, entry);
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|s| s.is_zero())
    }

    /// Smallest base windows across coefficients ([exact] when empty).
    pub fn min_base_reliable(&self) -> [i64; 3] {
        let mut w = [RELIABLE_EXACT; 3];
        for s in self.terms.values() {
            for g in 0..3 {
                w[g] = w[g].min(s.reliable[g]);
            }
        }
        w
    }

    /// Smallest positive fiber degree present (None if only degree 0).
    fn min_positive_fiber_degree(&self) -> Option<i64> {
        self.terms
            .keys()
            .map(|(_, mu)| mu.len() as i64)
            .filter(|&d| d > 0)
            .min()
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for s in out.terms.values_mut() {
            *s = s.neg();
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        assert_eq!(self.fiber_cap, other.fiber_cap, "fiber cap mismatch");
        let mut out = self.clone();
        out.fiber_reliable = self.fiber_reliable.min(other.fiber_reliable);
        for (key, s) in &other.terms {
            out.accumulate(key.clone(), s.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    /// Multiply every coefficient by a base function.
    pub fn mul_base(&self, f: &TruncSeries) -> Self {
        let mut out = Self::zero(self.dim, self.fiber_cap);
        out.fiber_reliable = self.fiber_reliable;
        for (key, s) in &self.terms {
            out.accumulate(key.clone(), s.mul(f));
        }
        out
    }

    /// Graded product: fiber variables are even, dz̄ factors odd.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        assert_eq!(self.fiber_cap, other.fiber_cap, "fiber cap mismatch");
        let mut out = Self::zero(self.dim, self.fiber_cap);
        let val_a = self
            .terms
            .keys()
            .map(|(_, mu)| mu.len() as i64)
            .min()
            .unwrap_or(RELIABLE_EXACT);
        let val_b = other
            .terms
            .keys()
            .map(|(_, mu)| mu.len() as i64)
            .min()
            .unwrap_or(RELIABLE_EXACT);
        out.fiber_reliable = self
            .fiber_reliable
            .saturating_add(val_b)
            .min(other.fiber_reliable.saturating_add(val_a))
            .min(self.fiber_cap);
        for ((s1, mu1), f1) in &self.terms {
            for ((s2, mu2), f2) in &other.terms {
                let Some((s, negative)) = merge_antihol(s1, s2) else {
                    continue;
                };
                let mu = crate::tensor::multiset_merge(mu1, mu2);
                let mut f = f1.mul(f2);
                if negative {
                    f = f.neg();
                }
                out.accumulate((s, mu), f);
            }
        }
        out
    }

    /// Base Dolbeault operator: Σ_j dz̄_j ∧ ∂_{z̄_j}, inserted from the
    /// left. Fiber degrees are untouched, so `fiber_reliable` survives.
    pub fn dbar(&self) -> Self {
        let spec = self.base_spec();
        let mut out = Self::zero(self.dim, self.fiber_cap);
        out.fiber_reliable = self.fiber_reliable;
        for ((s, mu), f) in &self.terms {
            for j in 0..self.dim as u8 {
                let df = f.partial(spec.var_zbar(j as usize));
                if df.is_zero() && df.reliable == [RELIABLE_EXACT; 3] {
                    continue;
                }
                let Some((ns, negative)) = insert_antihol(s, j) else {
                    continue;
                };
                out.accumulate((ns, mu.clone()), if negative { df.neg() } else { df });
            }
        }
        out
    }

    /// Keep only terms of the given fiber degree.
    pub fn fiber_degree_part(&self, d: usize) -> Self {
        let mut out = Self::zero(self.dim, self.fiber_cap);
        out.fiber_reliable = self.fiber_reliable;
        for (key, s) in &self.terms {
            if key.1.len() == d {
                out.accumulate(key.clone(), s.clone());
            }
        }
        out
    }

    /// First nonzero term, for failure reports.
    pub fn sample_term(&self) -> Option<String> {
        self.terms.iter().find(|(_, s)| !s.is_zero()).map(|((s, mu), f)| {
            format!("dz̄{:?} · u^{:?} · ({})", s, mu, f)
        })
    }
}

// ---------------------------------------------------------------------------
// FormHom: dz̄-valued derivations of the fiber algebra
// ---------------------------------------------------------------------------

/// Degree-n derivation datum with one dz̄ slot: part `k` maps each fiber
/// generator into degree-n fiber polynomials, to be wedged in as dz̄_k.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FormHom {
    pub n: usize,
    pub dim: usize,
    pub spec: VarSpec,
    pub parts: Vec<HomTensor>,
}

impl FormHom {
    pub fn zero(n: usize, dim: usize, spec: VarSpec) -> Self {
        Self {
            n,
            dim,
            spec,
            parts: (0..dim).map(|_| HomTensor::zero(n, dim, spec)).collect(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.parts.iter().all(|p| p.is_zero())
    }

    pub fn neg(&self) -> Self {
        Self {
            n: self.n,
            dim: self.dim,
            spec: self.spec,
            parts: self.parts.iter().map(|p| p.neg()).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            dim: self.dim,
            spec: self.spec,
            parts: self
                .parts
                .iter()
                .zip(&other.parts)
                .map(|(a, b)| a.sub(b))
                .collect(),
        }
    }

    pub fn min_reliable(&self) -> [i64; 3] {
        let mut w = [RELIABLE_EXACT; 3];
        for p in &self.parts {
            let pw = p.min_reliable();
            for g in 0..3 {
                w[g] = w[g].min(pw[g]);
            }
        }
        w
    }
}

/// Repackage a curvature level as a derivation datum, dividing each
/// component by the stabilizer ∏ mult! of its lower multiset. This is the
/// only place that normalization happens.
pub fn to_form_hom(r: &CurvatureTensor) -> FormHom {
    let mut out = FormHom::zero(r.n, r.dim, r.spec);
    for ((l, mu, k), s) in &r.comps {
        let stab = multiset_stabilizer(mu).inv();
        out.parts[*k as usize].set(*l, mu.clone(), s.scale(&stab));
    }
    out
}

/// Apply the odd derivation extension of `a` to `x`: each term loses one
/// fiber letter to the Leibniz rule, gains the image polynomial, and is
/// wedged by dz̄_k from the left. Raises fiber reliability by n − 1 up to
/// the cap.
pub fn apply_form_hom(a: &FormHom, x: &DolbeaultElement) -> DolbeaultElement {
    assert_eq!(a.dim, x.dim, "dimension mismatch");
    let mut out = DolbeaultElement::zero(x.dim, x.fiber_cap);
    out.fiber_reliable = x
        .fiber_reliable
        .saturating_add(a.n as i64 - 1)
        .min(x.fiber_cap);
    for ((s, mu), f) in &x.terms {
        if mu.is_empty() {
            continue;
        }
        let out_degree = mu.len() as i64 + a.n as i64 - 1;
        if out_degree > x.fiber_cap {
            continue;
        }
        for (k, part) in a.parts.iter().enumerate() {
            if part.is_zero() {
                continue;
            }
            let Some((ns, negative)) = insert_antihol(s, k as u8) else {
                continue;
            };
            for (nmu, c) in part.apply_monomial(mu) {
                let mut g = f.mul(&c);
                if negative {
                    g = g.neg();
                }
                out.accumulate((ns.clone(), nmu), g);
            }
        }
    }
    out
}

/// The curvature-twisted differential D = ∂̄ + Σ_n ã_n on the truncated
/// complex, where ã_n are the derivation extensions of the supplied tower
/// levels. Derivations beyond the top supplied level are unknown, so the
/// fiber reliability drops to (smallest positive input degree) + n_top − 1
/// when positive-degree terms are present.
pub fn twisted_dbar(tower: &[FormHom], x: &DolbeaultElement) -> DolbeaultElement {
    let mut out = x.dbar();
    for a in tower {
        out = out.add(&apply_form_hom(a, x));
    }
    let n_top = tower.iter().map(|a| a.n as i64).max().unwrap_or(1);
    if let Some(dmin) = x.min_positive_fiber_degree() {
        out.fiber_reliable = out
            .fiber_reliable
            .min(dmin.saturating_add(n_top - 1))
            .min(x.fiber_cap);
    }
    out
}

/// Curvature tower of a metric connection, packaged as derivation data for
/// the twisted differential: levels n = 2 .. min(fiber cap, achievable).
pub fn derivation_tower(conn: &ChartConnection, fiber_cap: i64) -> Result<Vec<FormHom>> {
    let r2 = curvature_tensor(conn)?;
    let budget = r2.min_reliable()[Group::Z as usize]
        .min(conn.christoffels.min_reliable()[Group::Z as usize]);
    let achievable = 2i64.saturating_add(budget);
    let n_top = fiber_cap.min(achievable).max(2);
    let levels = curvature_tower(conn, &r2, n_top as usize)?;
    Ok(levels.iter().map(to_form_hom).collect())
}

// ---------------------------------------------------------------------------
// BiChartForm: forms on a two-factor chart
// ---------------------------------------------------------------------------

/// Variable layout of the two-factor chart: unbarred (z_0..z_{n−1},
/// w_0..w_{n−1}), barred (z̄_0..z̄_{n−1}, w̄_0..w̄_{n−1}).
pub fn bichart_spec(dim: usize) -> VarSpec {
    VarSpec::new(2 * dim, 2 * dim, 0)
}

pub fn bichart_z(dim: usize, i: usize) -> usize {
    debug_assert!(i < dim);
    i
}

pub fn bichart_w(dim: usize, i: usize) -> usize {
    debug_assert!(i < dim);
    dim + i
}

pub fn bichart_zbar(dim: usize, i: usize) -> usize {
    debug_assert!(i < dim);
    2 * dim + i
}

pub fn bichart_wbar(dim: usize, i: usize) -> usize {
    debug_assert!(i < dim);
    3 * dim + i
}

/// Truncated (0, q₁+q₂)-form on the two-factor chart: terms
/// dz̄_{S1} ∧ dw̄_{S2} · f(z, z̄, w, w̄).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BiChartForm {
    pub dim: usize,
    pub terms: BTreeMap<(Vec<u8>, Vec<u8>), TruncSeries>,
}

impl BiChartForm {
    pub fn spec(&self) -> VarSpec {
        bichart_spec(self.dim)
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn function(dim: usize, f: TruncSeries) -> Self {
        let mut out = Self::zero(dim);
        out.accumulate((Vec::new(), Vec::new()), f);
        out
    }

    pub fn term(dim: usize, s1: Vec<u8>, s2: Vec<u8>, f: TruncSeries) -> Self {
        let mut out = Self::zero(dim);
        debug_assert!(s1.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(s2.windows(2).all(|w| w[0] < w[1]));
        out.accumulate((s1, s2), f);
        out
    }

    fn accumulate(&mut self, key: (Vec<u8>, Vec<u8>), f: TruncSeries) {
        let entry = match self.terms.remove(&key) {
            Some(cur) => cur.add(&f),
            None => f,
        };
        if entry.is_zero() && entry.reliable == [RELIABLE_EXACT; 3] {
            return;
        }
        self.terms.insert(key, entry);
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|s| s.is_zero())
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for s in out.terms.values_mut() {
            *s = s.neg();
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = self.clone();
        for (key, s) in &other.terms {
            out.accumulate(key.clone(), s.clone());
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    /// Graded product; dw̄ factors of the left term pass dz̄ factors of the
    /// right term, contributing (−1)^{|S2_a|·|S1_b|} on top of the two
    /// merge signs.
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut out = Self::zero(self.dim);
        for ((s1a, s2a), fa) in &self.terms {
            for ((s1b, s2b), fb) in &other.terms {
                let Some((s1, neg1)) = merge_antihol(s1a, s1b) else {
                    continue;
                };
                let Some((s2, neg2)) = merge_antihol(s2a, s2b) else {
                    continue;
                };
                let swap = (s2a.len() * s1b.len()) % 2 == 1;
                let mut f = fa.mul(fb);
                if neg1 ^ neg2 ^ swap {
                    f = f.neg();
                }
                out.accumulate((s1, s2), f);
            }
        }
        out
    }

    /// Full antiholomorphic differential in both factors: dz̄ components
    /// join S1 from the left; dw̄ components pass the whole dz̄ block first,
    /// picking up (−1)^{|S1|}, then join S2 from the left.
    pub fn dbar_full(&self) -> Self {
        let spec = self.spec();
        let mut out = Self::zero(self.dim);
        for ((s1, s2), f) in &self.terms {
            for j in 0..self.dim {
                let df = f.partial(bichart_zbar(self.dim, j));
                if !(df.is_zero() && df.reliable == [RELIABLE_EXACT; 3]) {
                    if let Some((ns1, negative)) = insert_antihol(s1, j as u8) {
                        out.accumulate(
                            (ns1, s2.clone()),
                            if negative { df.neg() } else { df },
                        );
                    }
                }
                let dwf = f.partial(bichart_wbar(self.dim, j));
                if !(dwf.is_zero() && dwf.reliable == [RELIABLE_EXACT; 3]) {
                    if let Some((ns2, negative)) = insert_antihol(s2, j as u8) {
                        let flip = negative ^ (s1.len() % 2 == 1);
                        out.accumulate(
                            (s1.clone(), ns2),
                            if flip { dwf.neg() } else { dwf },
                        );
                    }
                }
            }
        }
        let _ = spec;
        out
    }
}

/// Move chart Christoffels to the second factor: Γ(z, z̄) becomes Γ(w, w̄)
/// over the two-factor layout, acting in the w-directions.
pub fn second_factor_christoffels(conn: &ChartConnection) -> Christoffels {
    let dim = conn.dim;
    let spec2 = bichart_spec(dim);
    let mut var_map = vec![0usize; 2 * dim];
    for i in 0..dim {
        var_map[i] = bichart_w(dim, i);
        var_map[dim + i] = bichart_wbar(dim, i);
    }
    let mut out = Christoffels::zero(dim, spec2);
    for ((l, i, j), s) in &conn.christoffels.gamma {
        out.set(*l, *i, *j, s.map_vars(spec2, &var_map, s.reliable));
    }
    out
}

// ---------------------------------------------------------------------------
// Expansion maps from the two-factor chart into the fiber model
// ---------------------------------------------------------------------------

fn restriction_map(dim: usize) -> (VarSpec, Vec<usize>) {
    let base = VarSpec::base(dim);
    let mut map = vec![0usize; 4 * dim];
    for i in 0..dim {
        map[bichart_z(dim, i)] = base.var_z(i);
        map[bichart_w(dim, i)] = base.var_z(i);
        map[bichart_zbar(dim, i)] = base.var_zbar(i);
        map[bichart_wbar(dim, i)] = base.var_zbar(i);
    }
    (base, map)
}

/// Iterated plain partial derivatives in the w-directions, same word
/// bookkeeping as the covariant tower but with no connection term. Kept as
/// an independent code path so the flat-agreement checks compare two
/// genuinely different engines.
fn partial_tower(f: &TruncSeries, deriv: &[usize], k_max: usize) -> Vec<TowerLevel> {
    let mut levels: Vec<TowerLevel> = Vec::with_capacity(k_max + 1);
    let mut first = TowerLevel::new();
    first.insert(Vec::new(), f.clone());
    levels.push(first);
    for _ in 0..k_max {
        let prev = levels.last().unwrap();
        let mut next = TowerLevel::new();
        for (word, s) in prev {
            for (i0, &v) in deriv.iter().enumerate() {
                let mut w = Vec::with_capacity(word.len() + 1);
                w.push(i0 as u8);
                w.extend_from_slice(word);
                next.insert(w, s.partial(v));
            }
        }
        levels.push(next);
    }
    levels
}

fn assemble_expansion<F>(
    eta: &BiChartForm,
    fiber_cap: i64,
    assert_symmetric: bool,
    mut tower_of: F,
) -> Result<DolbeaultElement>
where
    F: FnMut(&TruncSeries) -> Result<Vec<TowerLevel>>,
{
    let dim = eta.dim;
    let (base, map) = restriction_map(dim);
    let mut out = DolbeaultElement::zero(dim, fiber_cap);
    out.fiber_reliable = fiber_cap;
    for ((s1, s2), f) in &eta.terms {
        let Some((s, negative)) = merge_antihol(s1, s2) else {
            continue;
        };
        let tower = tower_of(f)?;
        for level in &tower {
            let projected = project_level(level, assert_symmetric)?;
            for (mu, c) in projected {
                let restricted = c.map_vars(
                    base,
                    &map,
                    [
                        c.reliable[Group::Z as usize],
                        c.reliable[Group::Zbar as usize],
                        RELIABLE_EXACT,
                    ],
                );
                out.accumulate(
                    (s.clone(), mu),
                    if negative { restricted.neg() } else { restricted },
                );
            }
        }
    }
    Ok(out)
}

/// Classical Taylor expansion along the second factor: fiber-degree-k
/// component = symmetrized k-th w-derivative restricted to w = z, w̄ = z̄,
/// with dw̄ identified with dz̄ (merge signs included).
pub fn restrict_to_jets(eta: &BiChartForm, fiber_cap: i64) -> Result<DolbeaultElement> {
    let dim = eta.dim;
    let deriv: Vec<usize> = (0..dim).map(|i| bichart_w(dim, i)).collect();
    assemble_expansion(eta, fiber_cap, true, |f| {
        Ok(partial_tower(f, &deriv, fiber_cap.max(0) as usize))
    })
}

/// Covariant Taylor expansion: fiber-degree-k component = symmetrized
/// k-fold covariant w-derivative (connection moved to the second factor),
/// restricted to the diagonal. The symmetry of each level is asserted —
/// failures signal torsion or (2,0)-curvature in the input connection.
pub fn exp_star(
    conn: &ChartConnection,
    eta: &BiChartForm,
    fiber_cap: i64,
) -> Result<DolbeaultElement> {
    let dim = conn.dim;
    if eta.dim != dim {
        return Err(Error::Shape("expansion: form/connection dimension".into()));
    }
    let gamma = second_factor_christoffels(conn);
    let deriv: Vec<usize> = (0..dim).map(|i| bichart_w(dim, i)).collect();
    assemble_expansion(eta, fiber_cap, true, |f| {
        covariant_tower(f, &gamma, &deriv, fiber_cap.max(0) as usize)
    })
}

/// Expansion along a holomorphic connection with no symmetry requirement:
/// the raw covariant words are symmetrized by projection alone. Demands a
/// z̄-independent connection, nothing else.
pub fn holomorphic_expansion(
    conn: &ChartConnection,
    eta: &BiChartForm,
    fiber_cap: i64,
) -> Result<DolbeaultElement> {
    if !conn.is_holomorphic() {
        return Err(Error::Domain(
            "holomorphic expansion: connection depends on z̄".into(),
        ));
    }
    let dim = conn.dim;
    if eta.dim != dim {
        return Err(Error::Shape("expansion: form/connection dimension".into()));
    }
    let gamma = second_factor_christoffels(conn);
    let deriv: Vec<usize> = (0..dim).map(|i| bichart_w(dim, i)).collect();
    assemble_expansion(eta, fiber_cap, false, |f| {
        covariant_tower(f, &gamma, &deriv, fiber_cap.max(0) as usize)
    })
}

/// Degree-(r+1) fiber component of an element whose lower components
/// vanish; errors if any fiber degree ≤ r survives or the reliability
/// does not cover degree r+1.
pub fn cosymbol(x: &DolbeaultElement, r: i64) -> Result<DolbeaultElement> {
    if x.fiber_reliable < r + 1 {
        return Err(Error::Filtration(format!(
            "cosymbol at level {}: fiber coefficients only reliable to {}",
            r, x.fiber_reliable
        )));
    }
    for ((s, mu), f) in &x.terms {
        if (mu.len() as i64) <= r && !f.is_zero() {
            return Err(Error::Filtration(format!(
                "cosymbol at level {}: nonzero component dz̄{:?} u^{:?}",
                r, s, mu
            )));
        }
    }
    let mut out = DolbeaultElement::zero(x.dim, x.fiber_cap);
    out.fiber_reliable = x.fiber_reliable;
    for ((s, mu), f) in &x.terms {
        if mu.len() as i64 == r + 1 {
            out.accumulate((s.clone(), mu.clone()), f.clone());
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Identity checks
// ---------------------------------------------------------------------------

/// Evidence attached to a passed identity: how much of the truncation the
/// zero was actually certified on.
#[derive(Clone, Copy, Debug)]
pub struct IdentityEvidence {
    pub fiber_reliable: i64,
    pub min_base_window: [i64; 3],
    pub terms_checked: usize,
}

fn certify_zero(resid: &DolbeaultElement, context: &str, checked: usize) -> Result<IdentityEvidence> {
    if !resid.is_zero() {
        return Err(Error::Domain(format!(
            "{}: residual {}",
            context,
            resid.sample_term().unwrap_or_default()
        )));
    }
    Ok(IdentityEvidence {
        fiber_reliable: resid.fiber_reliable,
        min_base_window: resid.min_base_reliable(),
        terms_checked: checked,
    })
}

/// The commutator identity that certifies the twisted differential:
/// ∂̄(exp* η) − exp*(∂̄η) + Σ_n ã_n(exp* η) = 0, all three legs computed by
/// independent pipelines.
pub fn check_exp_commutator(
    conn: &ChartConnection,
    tower: &[FormHom],
    eta: &BiChartForm,
    fiber_cap: i64,
) -> Result<IdentityEvidence> {
    let expanded = exp_star(conn, eta, fiber_cap)?;
    let a = expanded.dbar();
    let b = exp_star(conn, &eta.dbar_full(), fiber_cap)?;
    let mut resid = a.sub(&b);
    for t in tower {
        resid = resid.add(&apply_form_hom(t, &expanded));
    }
    // The tower stops at its top level; coefficients the missing levels
    // could touch start at fiber degree (min positive degree) + n_top.
    let n_top = tower.iter().map(|t| t.n as i64).max().unwrap_or(1);
    if let Some(dmin) = expanded.min_positive_fiber_degree() {
        resid.fiber_reliable = resid
            .fiber_reliable
            .min(dmin.saturating_add(n_top - 1))
            .min(fiber_cap);
    }
    let trimmed = trim_to_fiber_reliable(&resid);
    certify_zero(&trimmed, "expansion commutator", trimmed.terms.len())
}

/// Drop fiber degrees beyond the reliable floor before asserting zero:
/// those coefficients are exactly the ones the finite tower cannot see.
fn trim_to_fiber_reliable(x: &DolbeaultElement) -> DolbeaultElement {
    let mut out = DolbeaultElement::zero(x.dim, x.fiber_cap);
    out.fiber_reliable = x.fiber_reliable;
    for (key, s) in &x.terms {
        if key.1.len() as i64 <= x.fiber_reliable {
            out.accumulate(key.clone(), s.clone());
        }
    }
    out
}

/// D² = 0 on the whole monomial basis of the truncated complex: every
/// (dz̄ set, fiber multiset) with constant coefficient 1. Linearity over
/// base functions and wedge factors extends the sweep to everything.
pub fn check_d_squared(
    tower: &[FormHom],
    dim: usize,
    fiber_cap: i64,
) -> Result<IdentityEvidence> {
    let base = VarSpec::base(dim);
    let mut checked = 0usize;
    let mut fiber_floor = fiber_cap;
    let mut window = [RELIABLE_EXACT; 3];
    for s in subsets(dim as u8) {
        for d in 0..=fiber_cap.max(0) {
            for mu in crate::tensor::sorted_multisets(dim as u8, d as usize) {
                let x = DolbeaultElement::term(
                    dim,
                    fiber_cap,
                    s.clone(),
                    mu,
                    TruncSeries::one(base),
                );
                let dd = twisted_dbar(tower, &twisted_dbar(tower, &x));
                if !dd.is_zero() {
                    return Err(Error::Domain(format!(
                        "twisted differential fails to square to zero on dz̄{:?} basis: {}",
                        s,
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
        }
    }
    Ok(IdentityEvidence {
        fiber_reliable: fiber_floor,
        min_base_window: window,
        terms_checked: checked,
    })
}

/// All strictly sorted subsets of 0..dim, smallest first.
pub fn subsets(dim: u8) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    for j in 0..dim {
        let mut with_j: Vec<Vec<u8>> = out
            .iter()
            .map(|s| {
                let mut t = s.clone();
                t.push(j);
                t
            })
            .collect();
        out.append(&mut with_j);
    }
    out.sort();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kahler::{levi_civita, ChartMetric};
    use crate::num::GaussianRational as Q;

    fn base1() -> VarSpec {
        VarSpec::base(1)
    }

    /// ∂̄² = 0 with genuinely anticommuting insertions (dimension 2).
    #[test]
    fn dbar_squares_to_zero() {
        let spec = VarSpec::base(2);
        let f = TruncSeries::var(spec, spec.var_zbar(0))
            .mul(&TruncSeries::var(spec, spec.var_zbar(1)))
            .mul(&TruncSeries::var(spec, spec.var_z(0)));
        let x = DolbeaultElement::term(2, 3, vec![], vec![0, 1], f);
        let once = x.dbar();
        assert!(!once.is_zero());
        assert!(once.dbar().is_zero());
    }

    /// Wedge anticommutativity through the product.
    #[test]
    fn wedge_signs_anticommute() {
        let spec = VarSpec::base(2);
        let a = DolbeaultElement::term(2, 2, vec![0], vec![], TruncSeries::one(spec));
        let b = DolbeaultElement::term(2, 2, vec![1], vec![], TruncSeries::one(spec));
        let ab = a.mul(&b);
        let ba = b.mul(&a);
        assert!(ab.add(&ba).is_zero());
        assert!(!ab.is_zero());
        assert!(a.mul(&a).is_zero());
    }

    /// The stabilizer division: a repeated lower index is divided by 2.
    #[test]
    fn form_hom_divides_by_stabilizer() {
        let spec = base1();
        let mut r = CurvatureTensor::zero(2, 1, spec);
        r.comps
            .insert((0, vec![0, 0], 0), TruncSeries::constant(spec, Q::from_int(6)));
        let f = to_form_hom(&r);
        assert_eq!(
            f.parts[0].get(0, &[0, 0]).constant_term(),
            Q::from_int(3)
        );
    }

    /// Leibniz action with multiplicities: a degree-2 derivation datum on
    /// u0²u1 produces 2·(image at u0)·u0 u1 + (image at u1)·u0².
    #[test]
    fn apply_form_hom_uses_leibniz_rule() {
        let spec = VarSpec::base(2);
        let mut a = FormHom::zero(2, 2, spec);
        a.parts[0].set(0, vec![0, 1], TruncSeries::one(spec));
        a.parts[0].set(1, vec![1, 1], TruncSeries::one(spec));
        let x = DolbeaultElement::term(2, 4, vec![], vec![0, 0, 1], TruncSeries::one(spec));
        let y = apply_form_hom(&a, &x);
        // u0²u1 → 2·u0u1·u0u1 wedge dz̄_0 + u1u1·u0² wedge dz̄_0
        assert_eq!(
            y.terms[&(vec![0], vec![0, 0, 1, 1])].constant_term(),
            Q::from_int(3)
        );
        assert_eq!(y.fiber_reliable, 4);
    }

    /// Flat tower: the twisted differential is plain ∂̄.
    #[test]
    fn flat_twisted_dbar_is_plain_dbar() {
        let h = ChartMetric::flat(1, 4);
        let conn = levi_civita(&h).unwrap();
        let tower = derivation_tower(&conn, 4).unwrap();
        assert!(tower.iter().all(|t| t.is_zero()));
        let spec = base1();
        let x = DolbeaultElement::term(
            1,
            4,
            vec![],
            vec![0],
            TruncSeries::var(spec, spec.var_zbar(0)),
        );
        let dx = twisted_dbar(&tower, &x);
        let expect = DolbeaultElement::term(1, 4, vec![0], vec![0], TruncSeries::one(spec));
        assert!(dx.sub(&expect).is_zero());
        let one = DolbeaultElement::function(1, 4, TruncSeries::one(spec));
        assert!(twisted_dbar(&tower, &one).is_zero());
    }

    /// The twisted differential on the fiber generator assembles exactly
    /// the tower components divided by their stabilizers.
    #[test]
    fn twisted_dbar_on_generator_matches_raw_assembly() {
        let h = ChartMetric::fubini_study(1, 4);
        let conn = levi_civita(&h).unwrap();
        let tower = derivation_tower(&conn, 4).unwrap();
        let du = twisted_dbar(&tower, &DolbeaultElement::fiber_generator(1, 4, 0));
        // Independent assembly straight from the curvature levels.
        let r2 = curvature_tensor(&conn).unwrap();
        let levels = curvature_tower(&conn, &r2, 4).unwrap();
        let mut expect = DolbeaultElement::zero(1, 4);
        for level in &levels {
            for ((l, mu, k), s) in &level.comps {
                assert_eq!(*l, 0);
                expect.accumulate(
                    (vec![*k], mu.clone()),
                    s.scale(&multiset_stabilizer(mu).inv()),
                );
            }
        }
        let d = du.sub(&expect);
        assert!(d.is_zero(), "difference {:?}", d.sample_term());
        assert!(!du.is_zero());
    }

    fn w_series(dim: usize, i: usize) -> TruncSeries {
        TruncSeries::var(bichart_spec(dim), bichart_w(dim, i))
    }

    /// Taylor restriction of w and w²: coefficients (z, 1) and (z², 2z, 1).
    #[test]
    fn restriction_computes_taylor_coefficients() {
        let spec2 = bichart_spec(1);
        let base = base1();
        let eta = BiChartForm::function(1, w_series(1, 0));
        let x = restrict_to_jets(&eta, 3).unwrap();
        assert!(x.terms[&(vec![], vec![])]
            .sub(&TruncSeries::var(base, base.var_z(0)))
            .is_zero());
        assert!(x.terms[&(vec![], vec![0])].sub(&TruncSeries::one(base)).is_zero());

        let eta2 = BiChartForm::function(1, w_series(1, 0).mul(&w_series(1, 0)));
        let y = restrict_to_jets(&eta2, 3).unwrap();
        let z = TruncSeries::var(base, base.var_z(0));
        assert!(y.terms[&(vec![], vec![])].sub(&z.mul(&z)).is_zero());
        assert!(y.terms[&(vec![], vec![0])]
            .sub(&z.scale(&Q::from_int(2)))
            .is_zero());
        assert!(y.terms[&(vec![], vec![0, 0])].sub(&TruncSeries::one(base)).is_zero());
        assert!(!y.terms.contains_key(&(vec![], vec![0, 0, 0])));
        let _ = spec2;
    }

    /// With the zero connection the covariant engine agrees with the plain
    /// Taylor engine on a batch of monomials — two different code paths.
    #[test]
    fn flat_expansion_equals_taylor_restriction() {
        let dim = 1;
        let spec2 = bichart_spec(dim);
        let conn = ChartConnection::zero(dim);
        for (a, b, c) in [(1, 0, 0), (2, 1, 0), (1, 1, 1), (0, 2, 1), (3, 0, 1)] {
            let mut f = TruncSeries::one(spec2);
            for _ in 0..a {
                f = f.mul(&w_series(dim, 0));
            }
            for _ in 0..b {
                f = f.mul(&TruncSeries::var(spec2, bichart_wbar(dim, 0)));
            }
            for _ in 0..c {
                f = f.mul(&TruncSeries::var(spec2, bichart_zbar(dim, 0)));
            }
            let eta = BiChartForm::function(dim, f);
            let lhs = exp_star(&conn, &eta, 4).unwrap();
            let rhs = restrict_to_jets(&eta, 4).unwrap();
            assert!(lhs.sub(&rhs).is_zero());
        }
    }

    /// Second covariant derivative of w² picks up the connection term:
    /// the u² coefficient is 1 − zΓ(z, z̄) = 1 + 2zz̄/(1+zz̄).
    #[test]
    fn expansion_gamma_correction_at_degree_two() {
        let h = ChartMetric::fubini_study(1, 4);
        let conn = levi_civita(&h).unwrap();
        let eta = BiChartForm::function(1, w_series(1, 0).mul(&w_series(1, 0)));
        let x = exp_star(&conn, &eta, 4).unwrap();
        let c = &x.terms[&(vec![], vec![0, 0])];
        assert_eq!(c.constant_term(), Q::one());
        let mut idx = vec![0u16; 2];
        idx[0] = 1;
        idx[1] = 1;
        assert_eq!(c.coefficient(&idx), Q::from_int(2));
        // Degrees 0 and 1 agree with the flat Taylor restriction.
        let flat = restrict_to_jets(&eta, 4).unwrap();
        let diff = x.sub(&flat);
        let graded = cosymbol(&diff, 1).unwrap();
        assert!(!graded.is_zero());
    }

    /// Multiplicativity of the covariant expansion within caps.
    #[test]
    fn expansion_is_algebra_morphism() {
        let h = ChartMetric::fubini_study(1, 4);
        let conn = levi_civita(&h).unwrap();
        let spec2 = bichart_spec(1);
        let eta = BiChartForm::function(
            1,
            w_series(1, 0).add(&TruncSeries::var(spec2, bichart_zbar(1, 0))),
        );
        let zeta = BiChartForm::function(
            1,
            w_series(1, 0).mul(&TruncSeries::var(spec2, bichart_wbar(1, 0))),
        );
        let lhs = exp_star(&conn, &eta.mul(&zeta), 4).unwrap();
        let rhs = exp_star(&conn, &eta, 4)
            .unwrap()
            .mul(&exp_star(&conn, &zeta, 4).unwrap());
        let d = lhs.sub(&rhs);
        assert!(d.is_zero(), "difference {:?}", d.sample_term());
    }

    /// Full two-factor differential squares to zero, including the
    /// cross-factor sign.
    #[test]
    fn bichart_dbar_full_squares_to_zero() {
        let spec2 = bichart_spec(1);
        let f = TruncSeries::var(spec2, bichart_zbar(1, 0))
            .mul(&TruncSeries::var(spec2, bichart_wbar(1, 0)))
            .mul(&TruncSeries::var(spec2, bichart_w(1, 0)));
        let eta = BiChartForm::function(1, f);
        let once = eta.dbar_full();
        assert!(!once.is_zero());
        assert!(once.dbar_full().is_zero());
        // Mixed degrees in dimension 2.
        let spec4 = bichart_spec(2);
        let g = TruncSeries::var(spec4, bichart_zbar(2, 1))
            .mul(&TruncSeries::var(spec4, bichart_wbar(2, 0)));
        let mixed = BiChartForm::term(2, vec![0], vec![1], g);
        assert!(mixed.dbar_full().dbar_full().is_zero());
    }

    /// Commutator identity on a monomial batch (small caps; the acceptance
    /// run covers the full grid).
    #[test]
    fn commutator_identity_small_batch() {
        let h = ChartMetric::fubini_study(1, 4);
        let conn = levi_civita(&h).unwrap();
        let tower = derivation_tower(&conn, 4).unwrap();
        let spec2 = bichart_spec(1);
        for (a, b) in [(1usize, 0usize), (2, 0), (1, 1), (0, 1)] {
            let mut f = TruncSeries::one(spec2);
            for _ in 0..a {
                f = f.mul(&w_series(1, 0));
            }
            for _ in 0..b {
                f = f.mul(&TruncSeries::var(spec2, bichart_wbar(1, 0)));
            }
            let eta = BiChartForm::function(1, f);
            let ev = check_exp_commutator(&conn, &tower, &eta, 4).unwrap();
            assert!(ev.min_base_window[0] >= 0, "window {:?}", ev.min_base_window);
        }
    }

    /// D² = 0 sweep at small caps in dimension 1.
    #[test]
    fn twisted_differential_squares_to_zero_small() {
        let h = ChartMetric::fubini_study(1, 3);
        let conn = levi_civita(&h).unwrap();
        let tower = derivation_tower(&conn, 3).unwrap();
        let ev = check_d_squared(&tower, 1, 3).unwrap();
        assert_eq!(ev.fiber_reliable, 3);
        assert!(ev.min_base_window[0] >= 0);
        assert!(ev.terms_checked >= 8);
    }

    /// Filtration bookkeeping of the cosymbol map.
    #[test]
    fn cosymbol_enforces_filtration() {
        let spec = base1();
        let u2 = DolbeaultElement::term(1, 3, vec![], vec![0, 0], TruncSeries::one(spec));
        let sym = cosymbol(&u2, 1).unwrap();
        assert!(!sym.is_zero());
        let with_low = u2.add(&DolbeaultElement::function(1, 3, TruncSeries::one(spec)));
        assert!(matches!(cosymbol(&with_low, 0), Err(Error::Filtration(_))));
    }

    /// The raw-word expansion commutes with ∂̄ for holomorphic connections,
    /// including a torsioned one in dimension 2.
    #[test]
    fn holomorphic_expansion_commutes_with_dbar() {
        // dim 1: Γ = z (holomorphic, nonflat as a w-family).
        let spec1 = VarSpec::base(1);
        let mut ch1 = Christoffels::zero(1, spec1);
        ch1.set(0, 0, 0, TruncSeries::var(spec1, spec1.var_z(0)));
        let conn1 = ChartConnection::new(1, ch1).unwrap();
        // dim 2: torsioned holomorphic Γ^0_{01} = z_1, Γ^0_{10} = 0.
        let spec2d = VarSpec::base(2);
        let mut ch2 = Christoffels::zero(2, spec2d);
        ch2.set(0, 0, 1, TruncSeries::var(spec2d, spec2d.var_z(1)));
        let conn2 = ChartConnection::new(2, ch2).unwrap();
        assert!(!conn2.is_torsion_free());
        assert!(conn2.is_holomorphic());

        for (conn, dim) in [(conn1, 1usize), (conn2, 2usize)] {
            let spec2 = bichart_spec(dim);
            let f = w_series(dim, 0)
                .mul(&w_series(dim, dim.min(2) - 1))
                .mul(&TruncSeries::var(spec2, bichart_zbar(dim, 0)));
            let eta = BiChartForm::function(dim, f);
            let lhs = holomorphic_expansion(&conn, &eta, 4).unwrap().dbar();
            let rhs = holomorphic_expansion(&conn, &eta.dbar_full(), 4).unwrap();
            let d = lhs.sub(&rhs);
            assert!(d.is_zero(), "difference {:?}", d.sample_term());
            assert!(!lhs.is_zero());
        }
    }

    /// Fiber-cap overflow is recorded in the reliability field.
    #[test]
    fn cap_overflow_lowers_reliability() {
        let spec = base1();
        let mut a = FormHom::zero(2, 1, spec);
        a.parts[0].set(0, vec![0, 0], TruncSeries::one(spec));
        let mut x = DolbeaultElement::term(1, 5, vec![], vec![0], TruncSeries::one(spec));
        x.fiber_reliable = 2;
        let y = apply_form_hom(&a, &x);
        assert_eq!(y.fiber_reliable, 3);
    }
}
