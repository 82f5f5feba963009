//! Chart-local Kähler geometry: hermitian metric jets, the canonical
//! (1,0)-connection, and the tower of symmetrized covariant derivatives of
//! its curvature.
//!
//! Everything is expanded at the origin of a single coordinate chart. The
//! metric determines Γ^l_{ij} = h^{lm̄} ∂_{z_i} h_{jm̄}; its curvature in the
//! tangent-bundle convention is R^l_{ik,j̄} = ∂_{z̄_j} Γ^l_{ik}, and higher
//! levels are built by repeated (1,0)-covariant differentiation in the
//! unbarred slots.
//!
//! Invariants:
//! * metrics are hermitian, Kähler, and invertible at the origin (checked,
//!   not assumed);
//! * the connection derived from a Kähler metric is torsion-free and its
//!   (2,0)-curvature vanishes within the reliable window;
//! * every tower level is totally symmetric in its lower slots — asserted
//!   by comparing all distinguished-slot recursions, never assumed;
//! * each differentiation step costs one unbarred base order, so a metric
//!   reliable to order B supports levels up to n = B + 1.

use std::collections::BTreeMap;

use crate::covariant::Christoffels;
use crate::error::{Error, Result};
use crate::matrix::{mat_inverse, series_mat_inverse, SeriesMat};
use crate::num::GaussianRational;
use crate::series::{Group, TruncSeries, VarSpec, RELIABLE_EXACT};
use crate::tensor::{multiset_remove, sorted_multisets};

/// Hermitian metric jet on a chart: entries h_{ij̄} over base variables,
/// reliable to base order `base_order` in each of (z, z̄).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChartMetric {
    pub dim: usize,
    pub base_order: i64,
    pub entries: BTreeMap<(u8, u8), TruncSeries>,
}

impl ChartMetric {
    pub fn spec(&self) -> VarSpec {
        VarSpec::base(self.dim)
    }

    pub fn get(&self, i: u8, j: u8) -> TruncSeries {
        self.entries
            .get(&(i, j))
            .cloned()
            .unwrap_or_else(|| TruncSeries::zero(VarSpec::base(self.dim)))
    }

    /// `base_order` is a lower bound on entry reliability: it is tightened
    /// to the honest windows of the entries (exact entries stay exact).
    fn from_parts(
        dim: usize,
        base_order: i64,
        entries: impl IntoIterator<Item = ((u8, u8), TruncSeries)>,
    ) -> Self {
        let entries: BTreeMap<(u8, u8), TruncSeries> = entries
            .into_iter()
            .filter(|(_, s)| !s.is_zero())
            .collect();
        let mut order = base_order;
        for s in entries.values() {
            order = order
                .min(s.reliable[Group::Z as usize])
                .min(s.reliable[Group::Zbar as usize]);
        }
        Self {
            dim,
            base_order: order,
            entries,
        }
    }

    /// The euclidean metric h = Id, exact at every order.
    pub fn flat(dim: usize, base_order: i64) -> Self {
        let spec = VarSpec::base(dim);
        Self::from_parts(
            dim,
            base_order,
            (0..dim as u8).map(|i| ((i, i), TruncSeries::one(spec))),
        )
    }

    /// Fubini–Study metric on the standard affine chart:
    /// h_{ij̄} = δ_ij/σ − z̄_i z_j/σ² with σ = 1 + Σ_k z_k z̄_k,
    /// expanded to base order `base_order`.
    pub fn fubini_study(dim: usize, base_order: i64) -> Self {
        let spec = VarSpec::base(dim);
        let inv_sigma = geometric_inverse_sigma(spec, dim, base_order);
        let inv_sigma2 = inv_sigma.mul(&inv_sigma);
        let mut entries = BTreeMap::new();
        for i in 0..dim as u8 {
            for j in 0..dim as u8 {
                let mut s = TruncSeries::zero(spec);
                if i == j {
                    s = s.add(&inv_sigma);
                }
                let zbar_i = TruncSeries::var(spec, spec.var_zbar(i as usize));
                let z_j = TruncSeries::var(spec, spec.var_z(j as usize));
                s = s.sub(&zbar_i.mul(&z_j).mul(&inv_sigma2));
                entries.insert((i, j), s);
            }
        }
        Self::from_parts(dim, base_order, entries)
    }

    /// Wrap user-supplied entries, validating all metric invariants.
    pub fn from_entries(
        dim: usize,
        base_order: i64,
        entries: BTreeMap<(u8, u8), TruncSeries>,
    ) -> Result<Self> {
        let spec = VarSpec::base(dim);
        for ((i, j), s) in &entries {
            if (*i as usize) >= dim || (*j as usize) >= dim {
                return Err(Error::Shape(format!("metric entry index ({}, {})", i, j)));
            }
            if s.spec != spec {
                return Err(Error::Shape(
                    "metric entry over a different variable layout".into(),
                ));
            }
            if s.max_degree(Group::U) > 0 {
                return Err(Error::Shape(
                    "metric entry depends on fiber variables".into(),
                ));
            }
        }
        let m = Self::from_parts(dim, base_order, entries);
        m.validate()?;
        Ok(m)
    }

    /// Constant-term matrix h(0).
    pub fn at_origin(&self) -> Vec<Vec<GaussianRational>> {
        (0..self.dim as u8)
            .map(|i| {
                (0..self.dim as u8)
                    .map(|j| self.get(i, j).constant_term())
                    .collect()
            })
            .collect()
    }

    /// Hermitian + Kähler + invertible at the origin.
    pub fn validate(&self) -> Result<()> {
        let spec = self.spec();
        for i in 0..self.dim as u8 {
            for j in 0..self.dim as u8 {
                let mirrored = self.get(j, i).conj_series()?;
                if !self.get(i, j).sub(&mirrored).is_zero() {
                    return Err(Error::Domain(format!(
                        "metric is not hermitian at entry ({}, {})",
                        i, j
                    )));
                }
            }
        }
        mat_inverse(&self.at_origin())
            .map_err(|_| Error::Domain("metric is singular at the origin".into()))?;
        for k in 0..self.dim {
            for i in 0..k {
                for j in 0..self.dim as u8 {
                    let lhs = self.get(i as u8, j).partial(spec.var_z(k));
                    let rhs = self.get(k as u8, j).partial(spec.var_z(i));
                    if !lhs.sub(&rhs).is_zero() {
                        return Err(Error::Domain(format!(
                            "metric is not Kähler: ∂_{} h_({},{}) ≠ ∂_{} h_({},{})",
                            k, i, j, i, k, j
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Rescale by a nonzero constant; the derived connection is unchanged.
    pub fn scale(&self, c: &GaussianRational) -> Self {
        Self {
            dim: self.dim,
            base_order: self.base_order,
            entries: self
                .entries
                .iter()
                .map(|(k, s)| (*k, s.scale(c)))
                .collect(),
        }
    }

    /// Re-expand the chart at a shifted basepoint, z ↦ p + z. Only exact
    /// (polynomial) entries survive with useful windows: a genuinely
    /// truncated entry loses all reliability under a constant shift, and
    /// the computed windows say so.
    pub fn recenter(&self, point: &[GaussianRational]) -> Result<Self> {
        if point.len() != self.dim {
            return Err(Error::Shape("recenter: point dimension".into()));
        }
        let spec = self.spec();
        let mut images = Vec::with_capacity(spec.total());
        for (i, p) in point.iter().enumerate() {
            images.push(TruncSeries::var(spec, spec.var_z(i)).add(&TruncSeries::constant(spec, p.clone())));
        }
        for (i, p) in point.iter().enumerate() {
            images.push(
                TruncSeries::var(spec, spec.var_zbar(i)).add(&TruncSeries::constant(spec, p.conj())),
            );
        }
        let mut entries = BTreeMap::new();
        let mut order = self.base_order;
        for ((i, j), s) in &self.entries {
            let t = s.substitute(&images, spec)?;
            order = order
                .min(t.reliable[Group::Z as usize])
                .min(t.reliable[Group::Zbar as usize]);
            entries.insert((*i, *j), t);
        }
        Ok(Self::from_parts(self.dim, order, entries))
    }
}

/// 1/σ = Σ_m (−q)^m with q = Σ_k z_k z̄_k, truncated at base order.
fn geometric_inverse_sigma(spec: VarSpec, dim: usize, base_order: i64) -> TruncSeries {
    let mut q = TruncSeries::zero(spec);
    for k in 0..dim {
        q = q.add(
            &TruncSeries::var(spec, spec.var_z(k)).mul(&TruncSeries::var(spec, spec.var_zbar(k))),
        );
    }
    let mut out = TruncSeries::zero(spec);
    let mut power = TruncSeries::one(spec);
    let mut sign = GaussianRational::one();
    for _ in 0..=base_order.max(0) {
        out = out.add(&power.scale(&sign));
        power = power.mul(&q);
        sign = sign.neg();
    }
    out.clamp_window([base_order, base_order, RELIABLE_EXACT])
}

/// Chart-local (1,0)-connection: Christoffels over base variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChartConnection {
    pub dim: usize,
    pub christoffels: Christoffels,
}

impl ChartConnection {
    pub fn spec(&self) -> VarSpec {
        VarSpec::base(self.dim)
    }

    pub fn new(dim: usize, christoffels: Christoffels) -> Result<Self> {
        if christoffels.spec != VarSpec::base(dim) || christoffels.dim != dim {
            return Err(Error::Shape(
                "chart connection: Christoffels over a non-base layout".into(),
            ));
        }
        Ok(Self { dim, christoffels })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            christoffels: Christoffels::zero(dim, VarSpec::base(dim)),
        }
    }

    pub fn get(&self, l: u8, i: u8, j: u8) -> TruncSeries {
        self.christoffels.get(l, i, j)
    }

    pub fn is_torsion_free(&self) -> bool {
        self.christoffels.is_torsion_free()
    }

    /// No z̄ dependence in any Christoffel entry.
    pub fn is_holomorphic(&self) -> bool {
        self.christoffels.is_holomorphic()
    }

    /// (2,0)-curvature: the commutator of unbarred covariant derivatives,
    /// F^l_{ij,k} = ∂_{z_i}Γ^l_{jk} − ∂_{z_j}Γ^l_{ik}
    /// + Σ_m (Γ^l_{im}Γ^m_{jk} − Γ^l_{jm}Γ^m_{ik}) for i < j.
    pub fn curvature_20(&self) -> BTreeMap<(u8, u8, u8, u8), TruncSeries> {
        let spec = self.spec();
        let mut out = BTreeMap::new();
        for l in 0..self.dim as u8 {
            for i in 0..self.dim as u8 {
                for j in 0..i {
                    for k in 0..self.dim as u8 {
                        let mut f = self
                            .get(l, j, k)
                            .partial(spec.var_z(i as usize))
                            .sub(&self.get(l, i, k).partial(spec.var_z(j as usize)));
                        for m in 0..self.dim as u8 {
                            f = f
                                .add(&self.get(l, i, m).mul(&self.get(m, j, k)))
                                .sub(&self.get(l, j, m).mul(&self.get(m, i, k)));
                        }
                        if !f.is_zero() {
                            out.insert((l, i, j, k), f);
                        }
                    }
                }
            }
        }
        out
    }

    pub fn is_20_flat(&self) -> bool {
        self.curvature_20().is_empty()
    }
}

/// Canonical (1,0)-connection of a hermitian metric:
/// Γ^l_{ij} = Σ_m h^{lm̄} ∂_{z_i} h_{jm̄}, with h^{lm̄} the inverse-transpose
/// of the entry matrix. Torsion-free exactly when the metric is Kähler.
pub fn levi_civita(h: &ChartMetric) -> Result<ChartConnection> {
    h.validate()?;
    let n = h.dim;
    let spec = h.spec();
    // The inverse of an exact polynomial entry is an infinite series, so
    // the inversion works at the metric's declared order.
    let window = [h.base_order, h.base_order, RELIABLE_EXACT];
    let hmat: SeriesMat = (0..n as u8)
        .map(|j| {
            (0..n as u8)
                .map(|m| h.get(j, m).clamp_window(window))
                .collect()
        })
        .collect();
    let hinv = series_mat_inverse(&hmat)?;
    let mut ch = Christoffels::zero(n, spec);
    for l in 0..n as u8 {
        for i in 0..n as u8 {
            for j in 0..n as u8 {
                let mut s = TruncSeries::zero(spec);
                for m in 0..n as u8 {
                    s = s.add(
                        &hinv[m as usize][l as usize]
                            .mul(&h.get(j, m).partial(spec.var_z(i as usize))),
                    );
                }
                ch.set(l, i, j, s);
            }
        }
    }
    let conn = ChartConnection::new(n, ch)?;
    if !conn.is_torsion_free() {
        return Err(Error::Domain(
            "metric connection came out torsioned; Kähler validation missed it".into(),
        ));
    }
    Ok(conn)
}

/// Level of the curvature tower: symmetric degree `n` (number of lower
/// unbarred slots), components keyed by (upper index, sorted lower
/// multiset, antiholomorphic index).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CurvatureTensor {
    pub n: usize,
    pub dim: usize,
    pub spec: VarSpec,
    pub comps: BTreeMap<(u8, Vec<u8>, u8), TruncSeries>,
}

impl CurvatureTensor {
    pub fn zero(n: usize, dim: usize, spec: VarSpec) -> Self {
        Self {
            n,
            dim,
            spec,
            comps: BTreeMap::new(),
        }
    }

    pub fn get(&self, l: u8, mu: &[u8], jbar: u8) -> TruncSeries {
        self.comps
            .get(&(l, mu.to_vec(), jbar))
            .cloned()
            .unwrap_or_else(|| TruncSeries::zero(self.spec))
    }

    fn store(&mut self, l: u8, mu: Vec<u8>, jbar: u8, s: TruncSeries) {
        if s.is_zero() && s.reliable == [RELIABLE_EXACT; 3] {
            return;
        }
        self.comps.insert((l, mu, jbar), s);
    }

    pub fn is_zero(&self) -> bool {
        self.comps.values().all(|s| s.is_zero())
    }

    pub fn min_reliable(&self) -> [i64; 3] {
        let mut r = [RELIABLE_EXACT; 3];
        for s in self.comps.values() {
            for g in 0..3 {
                r[g] = r[g].min(s.reliable[g]);
            }
        }
        r
    }
}

/// Curvature of a torsion-free chart connection, tangent-bundle
/// convention: R^l_{ik,j̄} = ∂_{z̄_j} Γ^l_{ik}.
pub fn curvature_tensor(conn: &ChartConnection) -> Result<CurvatureTensor> {
    if !conn.is_torsion_free() {
        return Err(Error::Domain("curvature: connection has torsion".into()));
    }
    let spec = conn.spec();
    let mut out = CurvatureTensor::zero(2, conn.dim, spec);
    for l in 0..conn.dim as u8 {
        for mu in sorted_multisets(conn.dim as u8, 2) {
            for j in 0..conn.dim as u8 {
                let r = conn
                    .get(l, mu[0], mu[1])
                    .partial(spec.var_zbar(j as usize));
                out.store(l, mu.clone(), j, r);
            }
        }
    }
    Ok(out)
}

/// ∂̄-closedness of the degree-2 level: ∂_{z̄_m} R^l_{μ,j̄} antisymmetrized
/// over (m̄, j̄) vanishes. Returns the number of index pairs checked
/// (zero in dimension 1, where the identity is vacuous).
pub fn check_bianchi(r2: &CurvatureTensor) -> Result<usize> {
    if r2.n != 2 {
        return Err(Error::Shape("Bianchi check expects the degree-2 level".into()));
    }
    let spec = r2.spec;
    let mut pairs = 0usize;
    for l in 0..r2.dim as u8 {
        for mu in sorted_multisets(r2.dim as u8, 2) {
            for j in 0..r2.dim as u8 {
                for m in 0..j {
                    let lhs = r2.get(l, &mu, j).partial(spec.var_zbar(m as usize));
                    let rhs = r2.get(l, &mu, m).partial(spec.var_zbar(j as usize));
                    let d = lhs.sub(&rhs);
                    if !d.is_zero() {
                        return Err(Error::Domain(format!(
                            "∂̄-closedness fails at l={}, μ={:?}, pair ({}, {}): {}",
                            l, mu, m, j, d
                        )));
                    }
                    pairs += 1;
                }
            }
        }
    }
    Ok(pairs)
}

/// Tower of symmetrized covariant derivatives of the curvature, levels
/// 2 ≤ n ≤ n_max. Each step applies the (1,0)-covariant derivative in one
/// more unbarred slot; all choices of distinguished slot are computed and
/// asserted equal, so total symmetry is certified rather than assumed.
pub fn curvature_tower(
    conn: &ChartConnection,
    r2: &CurvatureTensor,
    n_max: usize,
) -> Result<Vec<CurvatureTensor>> {
    if r2.n != 2 || r2.dim != conn.dim {
        return Err(Error::Shape("curvature tower: mismatched degree-2 input".into()));
    }
    if n_max < 2 {
        return Err(Error::Shape("curvature tower: n_max below 2".into()));
    }
    let spec = conn.spec();
    let budget = r2.min_reliable()[Group::Z as usize]
        .min(conn.christoffels.min_reliable()[Group::Z as usize]);
    let achievable = 2i64.saturating_add(budget).min(i64::MAX);
    if (n_max as i64) > achievable {
        return Err(Error::Order {
            context: "curvature tower: unbarred base order exhausted".into(),
            max_achievable: achievable,
        });
    }
    let dim = conn.dim as u8;
    let mut levels = vec![r2.clone()];
    for n in 3..=n_max {
        let prev = levels.last().unwrap();
        let mut next = CurvatureTensor::zero(n, conn.dim, spec);
        for l in 0..dim {
            for nu in sorted_multisets(dim, n) {
                for jbar in 0..dim {
                    let mut chosen: Option<TruncSeries> = None;
                    let mut seen = Vec::new();
                    for &a in &nu {
                        if seen.contains(&a) {
                            continue;
                        }
                        seen.push(a);
                        let mu = multiset_remove(&nu, a);
                        let mut cand = prev
                            .get(l, &mu, jbar)
                            .partial(spec.var_z(a as usize));
                        for m in 0..dim {
                            cand = cand.add(&conn.get(l, a, m).mul(&prev.get(m, &mu, jbar)));
                        }
                        let mut seen_b = Vec::new();
                        for &b in &mu {
                            if seen_b.contains(&b) {
                                continue;
                            }
                            seen_b.push(b);
                            let mult = mu.iter().filter(|&&x| x == b).count() as i64;
                            let rest = multiset_remove(&mu, b);
                            for m in 0..dim {
                                let mut replaced = rest.clone();
                                replaced.push(m);
                                replaced.sort_unstable();
                                let mut term =
                                    conn.get(m, a, b).mul(&prev.get(l, &replaced, jbar));
                                let mut mc = GaussianRational::from_int(mult);
                                mc = mc.neg();
                                term = term.scale(&mc);
                                cand = cand.add(&term);
                            }
                        }
                        match &chosen {
                            None => chosen = Some(cand),
                            Some(first) => {
                                let d = first.sub(&cand);
                                if !d.is_zero() {
                                    return Err(Error::Domain(format!(
                                        "tower level {} not symmetric at l={}, ν={:?}, j̄={}: {}",
                                        n, l, nu, jbar, d
                                    )));
                                }
                            }
                        }
                    }
                    next.store(l, nu.clone(), jbar, chosen.expect("nonempty multiset"));
                }
            }
        }
        levels.push(next);
    }
    Ok(levels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::GaussianRational as Q;

    /// Flat metric: zero connection, zero curvature, all-zero tower.
    #[test]
    fn flat_metric_gives_zero_geometry() {
        let h = ChartMetric::flat(2, 4);
        h.validate().unwrap();
        let conn = levi_civita(&h).unwrap();
        assert!(conn.christoffels.is_zero());
        let r2 = curvature_tensor(&conn).unwrap();
        assert!(r2.is_zero());
        let tower = curvature_tower(&conn, &r2, 5).unwrap();
        assert!(tower.iter().all(|t| t.is_zero()));
    }

    /// Closed-form check in dimension 1: Γ = −2z̄/(1 + z z̄).
    #[test]
    fn fs_dim1_connection_matches_closed_form() {
        let b = 4;
        let h = ChartMetric::fubini_study(1, b);
        let conn = levi_civita(&h).unwrap();
        let spec = h.spec();
        let oracle = TruncSeries::var(spec, spec.var_zbar(0))
            .scale(&Q::from_int(-2))
            .mul(&geometric_inverse_sigma(spec, 1, b));
        let d = conn.get(0, 0, 0).sub(&oracle);
        assert!(d.is_zero(), "difference {}", d);
        assert!(d.reliable[Group::Z as usize] >= b - 1);
        assert!(d.reliable[Group::Zbar as usize] >= b - 1);
    }

    /// Rescaling the metric by a constant leaves the connection unchanged.
    #[test]
    fn constant_rescale_preserves_connection() {
        let h = ChartMetric::fubini_study(2, 3);
        let scaled = h.scale(&Q::from_int(5));
        let a = levi_civita(&h).unwrap();
        let b = levi_civita(&scaled).unwrap();
        assert_eq!(a, b);
    }

    /// Hermitian/Kähler validation and (2,0)-flatness in dimension 2.
    #[test]
    fn fs_dim2_is_kahler_and_20_flat() {
        let h = ChartMetric::fubini_study(2, 3);
        h.validate().unwrap();
        let conn = levi_civita(&h).unwrap();
        assert!(conn.is_torsion_free());
        assert!(conn.is_20_flat());
        assert!(!conn.is_holomorphic());
    }

    /// Tangent-convention curvature at the basepoint in dimension 1: the
    /// single component of ∂_z̄(−2z̄/(1+z z̄)) at 0 is −2.
    #[test]
    fn fs_dim1_curvature_basepoint_value() {
        let h = ChartMetric::fubini_study(1, 4);
        let conn = levi_civita(&h).unwrap();
        let r2 = curvature_tensor(&conn).unwrap();
        assert_eq!(r2.get(0, &[0, 0], 0).constant_term(), Q::from_int(-2));
    }

    /// ∂̄-closedness of the curvature in dimension 2 (nonvacuous pairs).
    #[test]
    fn bianchi_holds_fs_dim2() {
        let h = ChartMetric::fubini_study(2, 3);
        let conn = levi_civita(&h).unwrap();
        let r2 = curvature_tensor(&conn).unwrap();
        let pairs = check_bianchi(&r2).unwrap();
        assert!(pairs > 0);
    }

    /// Dimension-1 oracle for the next tower level: ∇R = ∂_z R − Γ R
    /// (one upper slot gains +Γ, two lower slots each lose one).
    /// Fubini–Study is locally symmetric, so the result is zero — also
    /// checked against a non-symmetric metric below for real content.
    #[test]
    fn tower_level3_matches_leibniz_oracle_dim1() {
        for (h, expect_zero) in [
            (ChartMetric::fubini_study(1, 4), true),
            (non_symmetric_metric(4), false),
        ] {
            let conn = levi_civita(&h).unwrap();
            let r2 = curvature_tensor(&conn).unwrap();
            let tower = curvature_tower(&conn, &r2, 3).unwrap();
            let spec = h.spec();
            let gamma = conn.get(0, 0, 0);
            let r = r2.get(0, &[0, 0], 0);
            let oracle = r.partial(spec.var_z(0)).sub(&gamma.mul(&r));
            let got = tower[1].get(0, &[0, 0, 0], 0);
            let d = got.sub(&oracle);
            assert!(d.is_zero(), "difference {}", d);
            assert!(d.reliable[Group::Z as usize] >= 2);
            assert_eq!(got.is_zero(), expect_zero);
            assert!(got.reliable[Group::Z as usize] >= 2);
        }
    }

    /// A dimension-1 metric whose curvature is not parallel:
    /// h = 1 + z z̄ + z² z̄².
    fn non_symmetric_metric(b: i64) -> ChartMetric {
        let spec = VarSpec::base(1);
        let z = TruncSeries::var(spec, spec.var_z(0));
        let zbar = TruncSeries::var(spec, spec.var_zbar(0));
        let zz = z.mul(&zbar);
        let entry = TruncSeries::one(spec).add(&zz).add(&zz.mul(&zz));
        let mut entries = BTreeMap::new();
        entries.insert((0u8, 0u8), entry);
        ChartMetric::from_entries(1, b, entries).unwrap()
    }

    /// Symmetry assertions pass through level 5 on Fubini–Study in
    /// dimension 2 at base order 4 (the maximum the order supports), with
    /// reliable windows left at every level.
    #[test]
    fn tower_symmetry_fs_dim2_to_level5() {
        let h = ChartMetric::fubini_study(2, 4);
        let conn = levi_civita(&h).unwrap();
        let r2 = curvature_tensor(&conn).unwrap();
        let tower = curvature_tower(&conn, &r2, 5).unwrap();
        assert_eq!(tower.len(), 4);
        for (k, level) in tower.iter().enumerate() {
            let w = level.min_reliable();
            assert!(
                w[Group::Z as usize] >= 0,
                "level {} window {:?}",
                k + 2,
                w
            );
        }
        assert!(!tower[0].is_zero());
    }

    /// Requesting a level beyond the base order reports the maximum.
    #[test]
    fn tower_order_error_reports_maximum() {
        let h = ChartMetric::fubini_study(1, 3);
        let conn = levi_civita(&h).unwrap();
        let r2 = curvature_tensor(&conn).unwrap();
        match curvature_tower(&conn, &r2, 6) {
            Err(Error::Order { max_achievable, .. }) => assert_eq!(max_achievable, 4),
            other => panic!("expected order error, got {:?}", other.map(|t| t.len())),
        }
    }

    /// Recentering an exact polynomial metric shifts its expansion.
    #[test]
    fn recenter_exact_polynomial_metric() {
        let spec = VarSpec::base(1);
        let z = TruncSeries::var(spec, spec.var_z(0));
        let zbar = TruncSeries::var(spec, spec.var_zbar(0));
        let mut entries = BTreeMap::new();
        entries.insert((0u8, 0u8), TruncSeries::one(spec).add(&z.mul(&zbar)));
        let h = ChartMetric::from_entries(1, 5, entries).unwrap();
        let moved = h.recenter(&[Q::one()]).unwrap();
        // 1 + (1+z)(1+z̄) has constant term 2 at the new center.
        assert_eq!(moved.get(0, 0).constant_term(), Q::from_int(2));
        moved.validate().unwrap();
    }
}
