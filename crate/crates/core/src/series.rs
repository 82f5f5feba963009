//! Truncated multivariate formal power series over Q(i).
//!
//! Variables come in three structural groups: base-holomorphic (`z`),
//! base-antiholomorphic (`zbar`), and fiber (`u`). Series are sparse maps
//! from exponent vectors to exact scalars, together with a *reliable order*
//! per group: the largest group-total degree up to which every coefficient
//! of the series is exactly correct.
//!
//! Invariants:
//! * no stored coefficient is zero;
//! * no stored monomial exceeds the reliable order of any group
//!   (coefficients beyond the reliable window are never materialized);
//! * a negative reliable order means the series carries no information in
//!   that group and therefore stores nothing at all;
//! * every binary operation recomputes the reliable window of its result
//!   (products use `min(r_a + val_b, r_b + val_a)` per group, where `val`
//!   is the minimal group degree of the other factor).
//!
//! Polynomials — data exact at *every* order — carry the sentinel
//! [`RELIABLE_EXACT`]; arithmetic saturates at it.

use crate::error::{Error, Result};
use crate::num::GaussianRational;
use std::collections::BTreeMap;
use std::fmt;

/// Reliable order assigned to data that is exact at every degree.
pub const RELIABLE_EXACT: i64 = 1 << 40;

/// The three structural variable groups.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Group {
    Z = 0,
    Zbar = 1,
    U = 2,
}

pub const GROUPS: [Group; 3] = [Group::Z, Group::Zbar, Group::U];

/// Number of variables per group; fixes the exponent-vector layout
/// (all `z`, then all `zbar`, then all `u`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VarSpec {
    pub n_z: usize,
    pub n_zbar: usize,
    pub n_u: usize,
}

impl VarSpec {
    pub fn new(n_z: usize, n_zbar: usize, n_u: usize) -> Self {
        Self { n_z, n_zbar, n_u }
    }

    /// Base chart in dimension `n`: `n` each of `z`, `zbar`, no fiber.
    pub fn base(n: usize) -> Self {
        Self::new(n, n, 0)
    }

    pub fn total(&self) -> usize {
        self.n_z + self.n_zbar + self.n_u
    }

    pub fn var_z(&self, i: usize) -> usize {
        debug_assert!(i < self.n_z);
        i
    }

    pub fn var_zbar(&self, i: usize) -> usize {
        debug_assert!(i < self.n_zbar);
        self.n_z + i
    }

    pub fn var_u(&self, i: usize) -> usize {
        debug_assert!(i < self.n_u);
        self.n_z + self.n_zbar + i
    }

    /// Group of a flat variable id.
    pub fn group_of(&self, var: usize) -> Group {
        if var < self.n_z {
            Group::Z
        } else if var < self.n_z + self.n_zbar {
            Group::Zbar
        } else {
            debug_assert!(var < self.total());
            Group::U
        }
    }

    /// Flat id range of a group.
    pub fn group_range(&self, g: Group) -> std::ops::Range<usize> {
        match g {
            Group::Z => 0..self.n_z,
            Group::Zbar => self.n_z..self.n_z + self.n_zbar,
            Group::U => self.n_z + self.n_zbar..self.total(),
        }
    }
}

/// Exponent vector; length always equals `VarSpec::total()` of its owner.
pub type MultiIndex = Vec<u16>;

fn group_degree(spec: &VarSpec, idx: &[u16], g: Group) -> i64 {
    spec.group_range(g).map(|v| idx[v] as i64).sum()
}

fn sat_add(a: i64, b: i64) -> i64 {
    a.saturating_add(b).min(RELIABLE_EXACT)
}

fn clamp_reliable(r: i64) -> i64 {
    r.min(RELIABLE_EXACT)
}

/// Sparse truncated power series with per-group reliable orders.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TruncSeries {
    pub spec: VarSpec,
    /// Reliable order per group, indexed by `Group as usize`.
    pub reliable: [i64; 3],
    coeffs: BTreeMap<MultiIndex, GaussianRational>,
}

impl TruncSeries {
    // ----- constructors -------------------------------------------------

    /// The zero series, exact at every order.
    pub fn zero(spec: VarSpec) -> Self {
        Self {
            spec,
            reliable: [RELIABLE_EXACT; 3],
            coeffs: BTreeMap::new(),
        }
    }

    /// A constant, exact at every order.
    pub fn constant(spec: VarSpec, c: GaussianRational) -> Self {
        let mut s = Self::zero(spec);
        if !c.is_zero() {
            s.coeffs.insert(vec![0; spec.total()], c);
        }
        s
    }

    pub fn one(spec: VarSpec) -> Self {
        Self::constant(spec, GaussianRational::one())
    }

    /// The coordinate function of flat variable `var`, exact.
    pub fn var(spec: VarSpec, var: usize) -> Self {
        let mut idx = vec![0u16; spec.total()];
        idx[var] = 1;
        Self::monomial(spec, idx, GaussianRational::one())
    }

    /// A single monomial, exact.
    pub fn monomial(spec: VarSpec, idx: MultiIndex, c: GaussianRational) -> Self {
        assert_eq!(idx.len(), spec.total(), "exponent vector length");
        let mut s = Self::zero(spec);
        if !c.is_zero() {
            s.coeffs.insert(idx, c);
        }
        s
    }

    /// Build from raw terms with an explicit reliable window.
    pub fn from_terms(
        spec: VarSpec,
        reliable: [i64; 3],
        terms: impl IntoIterator<Item = (MultiIndex, GaussianRational)>,
    ) -> Self {
        let mut s = Self {
            spec,
            reliable: reliable.map(clamp_reliable),
            coeffs: BTreeMap::new(),
        };
        for (idx, c) in terms {
            assert_eq!(idx.len(), spec.total(), "exponent vector length");
            s.accumulate(idx, c);
        }
        s.normalize();
        s
    }

    /// Tighten the reliable window (never widens), dropping coefficients
    /// that fall outside it.
    pub fn clamp_window(mut self, reliable: [i64; 3]) -> Self {
        for g in 0..3 {
            self.reliable[g] = self.reliable[g].min(clamp_reliable(reliable[g]));
        }
        self.normalize();
        self
    }

    // ----- accessors -----------------------------------------------------

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// True when every group window is unbounded, i.e. the stored terms are
    /// the whole truth at every order.
    pub fn is_exact(&self) -> bool {
        self.reliable == [RELIABLE_EXACT; 3]
    }

    pub fn coefficient(&self, idx: &[u16]) -> GaussianRational {
        self.coeffs.get(idx).cloned().unwrap_or_default()
    }

    pub fn constant_term(&self) -> GaussianRational {
        self.coefficient(&vec![0u16; self.spec.total()])
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &GaussianRational)> {
        self.coeffs.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    /// Minimal total degree in `g` among stored monomials; `RELIABLE_EXACT`
    /// for the zero series.
    pub fn valuation(&self, g: Group) -> i64 {
        self.coeffs
            .keys()
            .map(|idx| group_degree(&self.spec, idx, g))
            .min()
            .unwrap_or(RELIABLE_EXACT)
    }

    /// Maximal total degree in `g` among stored monomials (0 for zero).
    pub fn max_degree(&self, g: Group) -> i64 {
        self.coeffs
            .keys()
            .map(|idx| group_degree(&self.spec, idx, g))
            .max()
            .unwrap_or(0)
    }

    // ----- maintenance ---------------------------------------------------

    fn accumulate(&mut self, idx: MultiIndex, c: GaussianRational) {
        if c.is_zero() {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.coeffs.entry(idx) {
            Entry::Vacant(e) => {
                e.insert(c);
            }
            Entry::Occupied(mut e) => {
                *e.get_mut() += &c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    fn normalize(&mut self) {
        let spec = self.spec;
        let reliable = self.reliable;
        self.coeffs.retain(|idx, c| {
            !c.is_zero()
                && GROUPS
                    .iter()
                    .all(|&g| group_degree(&spec, idx, g) <= reliable[g as usize])
        });
    }

    fn assert_same_shape(&self, other: &Self) {
        assert_eq!(
            self.spec, other.spec,
            "series operands have different variable layouts"
        );
    }

    // ----- ring operations -----------------------------------------------

    pub fn add(&self, other: &Self) -> Self {
        self.assert_same_shape(other);
        let mut out = Self {
            spec: self.spec,
            reliable: [
                self.reliable[0].min(other.reliable[0]),
                self.reliable[1].min(other.reliable[1]),
                self.reliable[2].min(other.reliable[2]),
            ],
            coeffs: self.coeffs.clone(),
        };
        for (idx, c) in &other.coeffs {
            out.accumulate(idx.clone(), c.clone());
        }
        out.normalize();
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for c in out.coeffs.values_mut() {
            *c = std::mem::take(c).neg();
        }
        out
    }

    pub fn scale(&self, c: &GaussianRational) -> Self {
        if c.is_zero() {
            // Scaling by zero yields exact zero but must not *widen* the
            // window: unknown tails multiplied by zero are still unknown
            // about nothing — zero is correct at every order.
            return Self::zero(self.spec);
        }
        let mut out = self.clone();
        for v in out.coeffs.values_mut() {
            *v = (&*v).mul(c);
        }
        out
    }

    /// Product, truncated to the reliable window of the result:
    /// per group, `min(r_a + val_b, r_b + val_a)`.
    pub fn mul(&self, other: &Self) -> Self {
        self.assert_same_shape(other);
        // Only an *exact* zero annihilates exactly. A factor that is merely
        // empty within its window has an unknown tail, and the product's
        // window must still account for it — the general formula below does,
        // since the valuation of an empty series saturates.
        if (self.is_zero() && self.is_exact()) || (other.is_zero() && other.is_exact()) {
            return Self::zero(self.spec);
        }
        let mut reliable = [0i64; 3];
        for &g in &GROUPS {
            let gi = g as usize;
            reliable[gi] = sat_add(self.reliable[gi], other.valuation(g))
                .min(sat_add(other.reliable[gi], self.valuation(g)));
            if self.is_zero() && other.is_zero() {
                // Two unknown tails: their cross terms escape the shifted
                // bounds above, so neither window can grow.
                reliable[gi] = reliable[gi].min(self.reliable[gi]).min(other.reliable[gi]);
            }
        }
        let mut out = Self {
            spec: self.spec,
            reliable,
            coeffs: BTreeMap::new(),
        };
        let total = self.spec.total();
        // Precompute group degrees of the right factor once.
        let rdeg: Vec<(&MultiIndex, &GaussianRational, [i64; 3])> = other
            .coeffs
            .iter()
            .map(|(idx, c)| {
                (
                    idx,
                    c,
                    [
                        group_degree(&other.spec, idx, Group::Z),
                        group_degree(&other.spec, idx, Group::Zbar),
                        group_degree(&other.spec, idx, Group::U),
                    ],
                )
            })
            .collect();
        for (aidx, ac) in &self.coeffs {
            let adeg = [
                group_degree(&self.spec, aidx, Group::Z),
                group_degree(&self.spec, aidx, Group::Zbar),
                group_degree(&self.spec, aidx, Group::U),
            ];
            if (0..3).any(|g| adeg[g] > reliable[g]) {
                continue;
            }
            for (bidx, bc, bdeg) in &rdeg {
                if (0..3).any(|g| adeg[g] + bdeg[g] > reliable[g]) {
                    continue;
                }
                let mut idx = Vec::with_capacity(total);
                for v in 0..total {
                    idx.push(aidx[v] + bidx[v]);
                }
                out.accumulate(idx, ac.mul(bc));
            }
        }
        out
    }

    /// Integer power with window-aware truncation.
    pub fn pow(&self, e: u32) -> Self {
        let mut acc = Self::one(self.spec);
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    // ----- calculus ------------------------------------------------------

    /// Partial derivative in flat variable `var`. Consumes one order of the
    /// variable's group window.
    pub fn partial(&self, var: usize) -> Self {
        assert!(var < self.spec.total(), "variable id out of range");
        let g = self.spec.group_of(var) as usize;
        let mut reliable = self.reliable;
        if reliable[g] < RELIABLE_EXACT {
            reliable[g] = (reliable[g] - 1).max(-1);
        }
        let mut out = Self {
            spec: self.spec,
            reliable,
            coeffs: BTreeMap::new(),
        };
        for (idx, c) in &self.coeffs {
            let e = idx[var];
            if e == 0 {
                continue;
            }
            let mut nidx = idx.clone();
            nidx[var] = e - 1;
            let mut nc = c.clone();
            nc.scale_int(e as i64);
            out.accumulate(nidx, nc);
        }
        out.normalize();
        out
    }

    /// Composition: replace every variable of `self` by `images[v]` (all
    /// images over `out_spec`). Fiber-group variables must be sent to
    /// series without constant term; the result window combines the image
    /// windows with the valuation-weighted truncation bound of `self`.
    pub fn substitute(&self, images: &[Self], out_spec: VarSpec) -> Result<Self> {
        let total = self.spec.total();
        if images.len() != total {
            return Err(Error::Shape(format!(
                "substitute: {} images for {} variables",
                images.len(),
                total
            )));
        }
        for img in images {
            if img.spec != out_spec {
                return Err(Error::Shape(
                    "substitute: image variable layout differs from target".into(),
                ));
            }
        }
        for v in self.spec.group_range(Group::U) {
            if !images[v].constant_term().is_zero() {
                return Err(Error::Domain(format!(
                    "substitute: fiber variable u{} sent to a series with nonzero constant term",
                    v - self.spec.n_z - self.spec.n_zbar
                )));
            }
        }

        // Truncation bound inherited from the window of `self`: a monomial
        // beyond group-g window r_g maps to output-group-h valuation at
        // least (r_g + 1) * nu(g,h), so tightening the single output group
        // with the largest such bound already excludes every contribution
        // it could make. Constraining all groups at once would be sound but
        // needlessly collapses windows whenever some nu(g,h) = 0.
        let mut self_bound = [RELIABLE_EXACT; 3];
        for &g in &GROUPS {
            let r = self.reliable[g as usize];
            if r >= RELIABLE_EXACT {
                continue;
            }
            let range = self.spec.group_range(g);
            if range.is_empty() {
                continue;
            }
            if r < 0 {
                // Nothing about `self` is reliable: neither is the image.
                self_bound = [-1, -1, -1];
                break;
            }
            let mut best_h = 0usize;
            let mut best = -1i64;
            for &h in &GROUPS {
                let nu = range
                    .clone()
                    .map(|v| images[v].valuation(h))
                    .min()
                    .unwrap_or(RELIABLE_EXACT);
                let bound = if nu >= RELIABLE_EXACT {
                    RELIABLE_EXACT
                } else {
                    (r + 1).saturating_mul(nu).saturating_sub(1).min(RELIABLE_EXACT)
                };
                if bound > best {
                    best = bound;
                    best_h = h as usize;
                }
            }
            if best < RELIABLE_EXACT {
                self_bound[best_h] = self_bound[best_h].min(best);
            }
        }

        // Power cache per variable.
        let mut powers: Vec<Vec<Self>> = (0..total)
            .map(|v| vec![Self::one(out_spec), images[v].clone()])
            .collect();
        let mut acc = Self::zero(out_spec);
        for (idx, c) in &self.coeffs {
            let mut term = Self::constant(out_spec, c.clone());
            for v in 0..total {
                let e = idx[v] as usize;
                if e == 0 {
                    continue;
                }
                while powers[v].len() <= e {
                    let next = powers[v].last().unwrap().mul(&images[v]);
                    powers[v].push(next);
                }
                term = term.mul(&powers[v][e]);
                if term.is_zero() {
                    break;
                }
            }
            acc = acc.add(&term);
        }
        Ok(acc.clamp_window(self_bound))
    }

    /// Complex conjugate of a base function: swaps the `z` and `zbar`
    /// exponent blocks and conjugates coefficients. Requires matching group
    /// sizes and no fiber dependence.
    pub fn conj_series(&self) -> Result<Self> {
        if self.spec.n_z != self.spec.n_zbar {
            return Err(Error::Shape(
                "conj_series: unequal z / zbar group sizes".into(),
            ));
        }
        if self
            .coeffs
            .keys()
            .any(|idx| group_degree(&self.spec, idx, Group::U) > 0)
        {
            return Err(Error::Domain(
                "conj_series: series depends on fiber variables".into(),
            ));
        }
        let n = self.spec.n_z;
        let mut out = Self {
            spec: self.spec,
            reliable: [self.reliable[1], self.reliable[0], self.reliable[2]],
            coeffs: BTreeMap::new(),
        };
        for (idx, c) in &self.coeffs {
            let mut nidx = idx.clone();
            for i in 0..n {
                nidx.swap(i, n + i);
            }
            out.accumulate(nidx, c.conj());
        }
        out.normalize();
        Ok(out)
    }

    /// Transplant into a new variable layout: variable `v` of `self` becomes
    /// `var_map[v]` of `out_spec`. The caller states the window of the
    /// result (group structure may coarsen or refine under the move).
    pub fn map_vars(&self, out_spec: VarSpec, var_map: &[usize], reliable: [i64; 3]) -> Self {
        assert_eq!(var_map.len(), self.spec.total(), "variable map length");
        let mut out = Self {
            spec: out_spec,
            reliable: reliable.map(clamp_reliable),
            coeffs: BTreeMap::new(),
        };
        for (idx, c) in &self.coeffs {
            let mut nidx = vec![0u16; out_spec.total()];
            for (v, &e) in idx.iter().enumerate() {
                if e > 0 {
                    nidx[var_map[v]] += e;
                }
            }
            out.accumulate(nidx, c.clone());
        }
        out.normalize();
        out
    }

    /// The part of the series with zero total degree in `g`, with that
    /// group's window marked exact (the restriction no longer depends on it).
    pub fn restrict_group_zero(&self, g: Group) -> Self {
        let gi = g as usize;
        if self.reliable[gi] < 0 {
            let mut out = Self::zero(self.spec);
            out.reliable = [-1; 3];
            out.coeffs.clear();
            return out;
        }
        let mut out = Self {
            spec: self.spec,
            reliable: self.reliable,
            coeffs: BTreeMap::new(),
        };
        out.reliable[gi] = RELIABLE_EXACT;
        for (idx, c) in &self.coeffs {
            if group_degree(&self.spec, idx, g) == 0 {
                out.coeffs.insert(idx.clone(), c.clone());
            }
        }
        out
    }
}

impl fmt::Display for TruncSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.coeffs.is_empty() {
            return write!(f, "0");
        }
        let names = |v: usize| -> String {
            match self.spec.group_of(v) {
                Group::Z => format!("z{}", v + 1),
                Group::Zbar => format!("zb{}", v - self.spec.n_z + 1),
                Group::U => format!("u{}", v - self.spec.n_z - self.spec.n_zbar + 1),
            }
        };
        let mut first = true;
        for (idx, c) in &self.coeffs {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({})", c)?;
            for (v, &e) in idx.iter().enumerate() {
                if e == 1 {
                    write!(f, "*{}", names(v))?;
                } else if e > 1 {
                    write!(f, "*{}^{}", names(v), e)?;
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::GaussianRational as Q;

    fn uspec() -> VarSpec {
        VarSpec::new(0, 0, 1)
    }

    /// `(1 - u) * (1 + u + u^2 + u^3)` telescopes to `1 - u^4`; with a fiber
    /// window of 3 on both factors the product is exactly `1`.
    #[test]
    fn telescoping_product_truncates() {
        let s = uspec();
        let a = TruncSeries::from_terms(
            s,
            [RELIABLE_EXACT, RELIABLE_EXACT, 3],
            vec![(vec![0], Q::one()), (vec![1], Q::from_int(-1))],
        );
        let b = TruncSeries::from_terms(
            s,
            [RELIABLE_EXACT, RELIABLE_EXACT, 3],
            vec![
                (vec![0], Q::one()),
                (vec![1], Q::one()),
                (vec![2], Q::one()),
                (vec![3], Q::one()),
            ],
        );
        let p = a.mul(&b);
        assert_eq!(p.reliable[Group::U as usize], 3);
        assert_eq!(p.coefficient(&[0]), Q::one());
        assert_eq!(p.num_terms(), 1);
    }

    /// Product window rule `min(r_a + val_b, r_b + val_a)`: factors with
    /// zbar-windows 2 and 3 and zbar-valuations 1 and 0 combine to window 2.
    #[test]
    fn product_window_rule() {
        let s = VarSpec::new(0, 1, 0);
        let a = TruncSeries::from_terms(
            s,
            [RELIABLE_EXACT, 2, RELIABLE_EXACT],
            vec![(vec![1], Q::one())], // valuation 1
        );
        let b = TruncSeries::from_terms(
            s,
            [RELIABLE_EXACT, 3, RELIABLE_EXACT],
            vec![(vec![0], Q::one()), (vec![1], Q::from_int(5))], // valuation 0
        );
        let p = a.mul(&b);
        assert_eq!(p.reliable[Group::Zbar as usize], 2);
        // zb^3 = 1*5 would be degree 2+1? No: a=zb, b=1+5zb, p = zb + 5 zb^2;
        // degree-2 term survives, degree beyond window would be dropped.
        assert_eq!(p.coefficient(&[1]), Q::one());
        assert_eq!(p.coefficient(&[2]), Q::from_int(5));
    }

    /// Differentiation consumes one order of the variable's group window.
    #[test]
    fn partial_consumes_window() {
        let s = VarSpec::new(1, 1, 0);
        // f = z^2 zb, window (2, 5)
        let f = TruncSeries::from_terms(
            s,
            [2, 5, RELIABLE_EXACT],
            vec![(vec![2, 1], Q::one())],
        );
        let fz = f.partial(0);
        assert_eq!(fz.reliable[0], 1);
        assert_eq!(fz.coefficient(&[1, 1]), Q::from_int(2));
        // the z^2-degree source monomial exceeds the shrunk window only if
        // its image does; z^1 zb^1 is inside (1,5).
        assert_eq!(fz.num_terms(), 1);
    }

    /// Substitution of fiber variables demands zero constant term.
    #[test]
    fn substitute_rejects_constant_fiber_image() {
        let s = uspec();
        let f = TruncSeries::var(s, 0);
        let img = TruncSeries::one(s);
        assert!(f.substitute(&[img], s).is_err());
    }

    /// Composition window: substituting `g` (window 3, valuation 1) into a
    /// polynomial-exact series keeps window 3 contributions from `g` powers.
    #[test]
    fn substitute_window_from_images() {
        let s = uspec();
        // f = u^2, exact
        let f = TruncSeries::monomial(s, vec![2], Q::one());
        // g = u + u^2, window 3
        let g = TruncSeries::from_terms(
            s,
            [RELIABLE_EXACT, RELIABLE_EXACT, 3],
            vec![(vec![1], Q::one()), (vec![2], Q::one())],
        );
        let fg = f.substitute(&[g], s).unwrap();
        // g^2 = u^2 + 2u^3 + u^4; the square of a window-3 valuation-1 series
        // is reliable to 3+1 = 4, so u^4 is kept.
        assert_eq!(fg.coefficient(&[2]), Q::one());
        assert_eq!(fg.coefficient(&[3]), Q::from_int(2));
        assert_eq!(fg.coefficient(&[4]), Q::one());
        assert_eq!(fg.reliable[Group::U as usize], 4);
    }

    /// Conjugation swaps the base blocks and conjugates coefficients.
    #[test]
    fn conjugation_swaps_blocks() {
        let s = VarSpec::base(1);
        let f = TruncSeries::from_terms(
            s,
            [2, 3, RELIABLE_EXACT],
            vec![(vec![1, 0], Q::i())],
        );
        let fc = f.conj_series().unwrap();
        assert_eq!(fc.coefficient(&[0, 1]), Q::i().conj());
        assert_eq!(fc.reliable[0], 3);
        assert_eq!(fc.reliable[1], 2);
    }
}

