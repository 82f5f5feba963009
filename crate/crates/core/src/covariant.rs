//! Iterated covariant derivatives of scalar series: the word-tower engine
//! behind every exponential-type Taylor expansion in the crate.
//!
//! A `Christoffels` value is a sparse table Γ^l_{ij} of series over some
//! variable layout; the tower of a function `f` is the family of tensors
//! `T_k = ∇^k f`, indexed by words of direction letters, computed by the
//! recursion
//!
//! ```text
//! T_{k+1}[i₀ j₁ … j_k] = ∂_{i₀} T_k[j₁ … j_k]
//!                        − Σ_s Γ^m_{i₀ j_s} T_k[j₁ … m … j_k]
//! ```
//!
//! where the letters index an arbitrary caller-chosen set of derivative
//! variables (the fiber slots of a formal disc, the second-factor slots of a
//! two-chart layout, …).
//!
//! Invariants:
//! * level `k` of a tower holds exactly the words of length `k`, newest
//!   direction letter first;
//! * reliable windows propagate mechanically through every step — one
//!   derivative order is consumed per level, Christoffel products tighten
//!   windows by the usual product rule;
//! * `project_level` divides by `k!` once, summing over all word orderings,
//!   so symmetric and non-symmetric towers share one normalization path.

use crate::error::{Error, Result};
use crate::num::GaussianRational;
use crate::series::{Group, TruncSeries, VarSpec};
use crate::tensor::factorial_q;
use std::collections::BTreeMap;

/// Sparse Christoffel table Γ^l_{ij} over an arbitrary variable layout.
/// Index letters run over `0..dim` and refer to the derivative variables
/// chosen by the tower caller, not to flat variable ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Christoffels {
    pub dim: usize,
    pub spec: VarSpec,
    /// (upper, first lower, second lower) → coefficient series.
    pub gamma: BTreeMap<(u8, u8, u8), TruncSeries>,
}

impl Christoffels {
    pub fn zero(dim: usize, spec: VarSpec) -> Self {
        Self {
            dim,
            spec,
            gamma: BTreeMap::new(),
        }
    }

    pub fn set(&mut self, l: u8, i: u8, j: u8, s: TruncSeries) {
        assert_eq!(s.spec, self.spec, "Christoffel entry layout");
        // Entries that vanish within a *finite* window are kept: their
        // windows are honest information about how far the table is known,
        // and dropping them would resurrect the entry as an exact zero.
        if s.is_zero() && s.is_exact() {
            self.gamma.remove(&(l, i, j));
        } else {
            self.gamma.insert((l, i, j), s);
        }
    }

    pub fn get(&self, l: u8, i: u8, j: u8) -> TruncSeries {
        self.gamma
            .get(&(l, i, j))
            .cloned()
            .unwrap_or_else(|| TruncSeries::zero(self.spec))
    }

    pub fn is_zero(&self) -> bool {
        self.gamma.values().all(|s| s.is_zero())
    }

    /// Γ^l_{ij} − Γ^l_{ji} for all index triples; empty iff torsion-free.
    pub fn torsion(&self) -> BTreeMap<(u8, u8, u8), TruncSeries> {
        let mut out = BTreeMap::new();
        for l in 0..self.dim as u8 {
            for i in 0..self.dim as u8 {
                for j in 0..i {
                    let t = self.get(l, i, j).sub(&self.get(l, j, i));
                    if !t.is_zero() {
                        out.insert((l, i, j), t);
                    }
                }
            }
        }
        out
    }

    pub fn is_torsion_free(&self) -> bool {
        self.torsion().is_empty()
    }

    /// True when no entry depends on any antiholomorphic variable.
    pub fn is_holomorphic(&self) -> bool {
        self.gamma
            .values()
            .all(|s| s.max_degree(Group::Zbar) == 0)
    }

    /// Transplant every entry into a new layout via a flat-variable map,
    /// with a caller-stated window for the moved entries.
    pub fn map_vars(&self, out_spec: VarSpec, var_map: &[usize], reliable: [i64; 3]) -> Self {
        let mut out = Self::zero(self.dim, out_spec);
        for (&(l, i, j), s) in &self.gamma {
            out.set(l, i, j, s.map_vars(out_spec, var_map, reliable));
        }
        out
    }

    /// Smallest per-group window over all entries (exact when empty).
    pub fn min_reliable(&self) -> [i64; 3] {
        let mut w = [crate::series::RELIABLE_EXACT; 3];
        for s in self.gamma.values() {
            for g in 0..3 {
                w[g] = w[g].min(s.reliable[g]);
            }
        }
        w
    }
}

/// One level of a tower: words of a fixed length → coefficient series.
pub type TowerLevel = BTreeMap<Vec<u8>, TruncSeries>;

/// Compute `T_0 … T_{k_max}` for the scalar `f`. `deriv_vars[i]` is the flat
/// variable differentiated by direction letter `i`; Christoffel letters refer
/// to the same directions.
pub fn covariant_tower(
    f: &TruncSeries,
    gamma: &Christoffels,
    deriv_vars: &[usize],
    k_max: usize,
) -> Result<Vec<TowerLevel>> {
    if deriv_vars.len() != gamma.dim {
        return Err(Error::Shape(format!(
            "covariant tower: {} derivative variables for letter range {}",
            deriv_vars.len(),
            gamma.dim
        )));
    }
    if f.spec != gamma.spec {
        return Err(Error::Shape(
            "covariant tower: scalar and Christoffel layouts differ".into(),
        ));
    }
    let dim = gamma.dim as u8;
    let mut tower = Vec::with_capacity(k_max + 1);
    let mut level = TowerLevel::new();
    level.insert(Vec::new(), f.clone());
    tower.push(level);
    for _ in 0..k_max {
        let prev = tower.last().unwrap();
        let mut next = TowerLevel::new();
        for i0 in 0..dim {
            for (word, t) in prev {
                let mut d = t.partial(deriv_vars[i0 as usize]);
                for (s, &js) in word.iter().enumerate() {
                    for m in 0..dim {
                        let g = gamma.get(m, i0, js);
                        if g.is_zero() {
                            continue;
                        }
                        let mut swapped = word.clone();
                        swapped[s] = m;
                        let tm = prev
                            .get(&swapped)
                            .cloned()
                            .unwrap_or_else(|| TruncSeries::zero(gamma.spec));
                        d = d.sub(&g.mul(&tm));
                    }
                }
                let mut nw = Vec::with_capacity(word.len() + 1);
                nw.push(i0);
                nw.extend_from_slice(word);
                next.insert(nw, d);
            }
        }
        tower.push(next);
    }
    Ok(tower)
}

/// Collapse a tower level to multiset form: the coefficient of a multiset is
/// `1/k!` times the sum of the level's values over all orderings. With
/// `assert_symmetric` the orderings are also required to agree exactly
/// (within shared windows), the testable content of expanding along a flat
/// torsion-free connection.
pub fn project_level(
    level: &TowerLevel,
    assert_symmetric: bool,
) -> Result<BTreeMap<Vec<u8>, TruncSeries>> {
    let mut sums: BTreeMap<Vec<u8>, TruncSeries> = BTreeMap::new();
    if assert_symmetric {
        for (word, t) in level {
            let mut sorted = word.clone();
            sorted.sort_unstable();
            if &sorted == word {
                continue;
            }
            let rep = level.get(&sorted).expect("sorted word present");
            if !t.sub(rep).is_zero() {
                return Err(Error::Domain(format!(
                    "covariant tensor not symmetric: word {:?} differs from its sorted ordering",
                    word
                )));
            }
        }
    }
    for (word, t) in level {
        let mut m = word.clone();
        m.sort_unstable();
        match sums.get_mut(&m) {
            Some(acc) => *acc = acc.add(t),
            None => {
                sums.insert(m, t.clone());
            }
        }
    }
    let k = level.keys().next().map(|w| w.len()).unwrap_or(0);
    let scale = factorial_q(k).inv();
    let mut out = BTreeMap::new();
    for (m, s) in sums {
        let v = s.scale(&scale);
        if !v.is_zero() {
            out.insert(m, v);
        }
    }
    Ok(out)
}

/// Scalar factorial helper re-exported for tower consumers.
pub fn inv_factorial(k: usize) -> GaussianRational {
    factorial_q(k).inv()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::GaussianRational as Q;
    use crate::series::RELIABLE_EXACT;

    /// Flat tower of u^3 in one fiber variable: levels are plain derivatives.
    #[test]
    fn flat_tower_is_iterated_partial() {
        let spec = VarSpec::new(0, 0, 1);
        let f = TruncSeries::monomial(spec, vec![3], Q::one());
        let gamma = Christoffels::zero(1, spec);
        let tower = covariant_tower(&f, &gamma, &[0], 3).unwrap();
        assert_eq!(tower[1][&vec![0]].coefficient(&[2]), Q::from_int(3));
        assert_eq!(tower[2][&vec![0, 0]].coefficient(&[1]), Q::from_int(6));
        assert_eq!(tower[3][&vec![0, 0, 0]].constant_term(), Q::from_int(6));
    }

    /// Constant Christoffel in dimension 1: T_2 = -c, T_3 = 2c^2 on the
    /// coordinate function, the expansion coefficients of log(1+cu)/c.
    #[test]
    fn constant_gamma_tower_matches_logarithm() {
        let spec = VarSpec::new(0, 0, 1);
        let f = TruncSeries::var(spec, 0);
        let mut gamma = Christoffels::zero(1, spec);
        gamma.set(0, 0, 0, TruncSeries::constant(spec, Q::from_int(5)));
        let tower = covariant_tower(&f, &gamma, &[0], 3).unwrap();
        assert_eq!(tower[2][&vec![0, 0]].constant_term(), Q::from_int(-5));
        assert_eq!(tower[3][&vec![0, 0, 0]].constant_term(), Q::from_int(50));
    }

    /// Projection divides by k! and flags non-symmetric levels.
    #[test]
    fn projection_normalizes_and_guards() {
        let spec = VarSpec::new(0, 0, 2);
        let mut level = TowerLevel::new();
        level.insert(vec![0, 1], TruncSeries::one(spec));
        level.insert(vec![1, 0], TruncSeries::one(spec));
        let p = project_level(&level, true).unwrap();
        assert_eq!(p[&vec![0, 1]].constant_term(), Q::one());

        let mut bad = TowerLevel::new();
        bad.insert(vec![0, 1], TruncSeries::one(spec));
        bad.insert(
            vec![1, 0],
            TruncSeries::from_terms(
                spec,
                [RELIABLE_EXACT; 3],
                vec![(vec![0, 0], Q::from_int(2))],
            ),
        );
        assert!(project_level(&bad, true).is_err());
    }
}
