//! Exact JSON documents: curvature towers, recovered connection forms,
//! expansion results, and the input formats for user metrics and forms.
//!
//! Invariants:
//! * scalars are decimal-free numerator/denominator string pairs; no
//!   floating-point value ever appears in a document;
//! * every document opens with a version string naming its schema;
//! * term lists are emitted in the storage order of the kernel's sorted
//!   maps, so a fixed input yields a byte-identical document;
//! * import validates shapes and windows and reports offending positions,
//!   so a round-tripped document reproduces the exact kernel object.

use std::collections::BTreeMap;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::dolbeault::{bichart_spec, BiChartForm, DolbeaultElement, FormHom};
use crate::error::{Error, Result};
use crate::kahler::{ChartMetric, CurvatureTensor};
use crate::num::GaussianRational;
use crate::section::FamilyJet;
use crate::series::{TruncSeries, VarSpec, RELIABLE_EXACT};

pub const TOWER_SCHEMA: &str = "diagjet.tower/1";
pub const ALPHA_SCHEMA: &str = "diagjet.alpha/1";
pub const TAYLOR_SCHEMA: &str = "diagjet.taylor/1";
pub const METRIC_SCHEMA: &str = "diagjet.metric/1";
pub const FORM_SCHEMA: &str = "diagjet.form/1";
pub const FAMILY_SCHEMA: &str = "diagjet.family/1";

// ---------------------------------------------------------------------------
// Scalars
// ---------------------------------------------------------------------------

/// One exact rational as decimal-free integer strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RationalJson {
    pub num: String,
    pub den: String,
}

/// A Gaussian rational; the imaginary part is omitted when zero.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScalarJson {
    pub re: RationalJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<RationalJson>,
}

fn rational_to_json(r: &BigRational) -> RationalJson {
    RationalJson {
        num: r.numer().to_string(),
        den: r.denom().to_string(),
    }
}

fn rational_from_json(r: &RationalJson, at: &str) -> Result<BigRational> {
    let num = BigInt::from_str(r.num.trim()).map_err(|_| {
        Error::Config(format!(
            "{}: numerator '{}' is not a decimal-free integer",
            at, r.num
        ))
    })?;
    let den = BigInt::from_str(r.den.trim()).map_err(|_| {
        Error::Config(format!(
            "{}: denominator '{}' is not a decimal-free integer",
            at, r.den
        ))
    })?;
    if den == BigInt::from(0) {
        return Err(Error::Config(format!("{}: zero denominator", at)));
    }
    Ok(BigRational::new(num, den))
}

pub fn scalar_to_json(q: &GaussianRational) -> ScalarJson {
    ScalarJson {
        re: rational_to_json(&q.re),
        im: if q.im == BigRational::from(BigInt::from(0)) {
            None
        } else {
            Some(rational_to_json(&q.im))
        },
    }
}

pub fn scalar_from_json(s: &ScalarJson, at: &str) -> Result<GaussianRational> {
    let re = rational_from_json(&s.re, at)?;
    let im = match &s.im {
        Some(r) => rational_from_json(r, at)?,
        None => BigRational::from(BigInt::from(0)),
    };
    Ok(GaussianRational { re, im })
}

// ---------------------------------------------------------------------------
// Series
// ---------------------------------------------------------------------------

/// A sparse truncated series: variable counts per group, reliable windows
/// (null = exact at every order), and sorted exponent/coefficient terms.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesJson {
    pub vars: [usize; 3],
    pub window: [Option<i64>; 3],
    pub terms: Vec<TermJson>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermJson {
    pub exps: Vec<u16>,
    pub coeff: ScalarJson,
}

pub fn series_to_json(s: &TruncSeries) -> SeriesJson {
    SeriesJson {
        vars: [s.spec.n_z, s.spec.n_zbar, s.spec.n_u],
        window: s.reliable.map(|r| if r >= RELIABLE_EXACT { None } else { Some(r) }),
        terms: s
            .terms()
            .map(|(idx, c)| TermJson {
                exps: idx.clone(),
                coeff: scalar_to_json(c),
            })
            .collect(),
    }
}

pub fn series_from_json(j: &SeriesJson, at: &str) -> Result<TruncSeries> {
    let spec = VarSpec::new(j.vars[0], j.vars[1], j.vars[2]);
    let window = j.window.map(|w| match w {
        None => RELIABLE_EXACT,
        Some(r) => r,
    });
    let mut terms = Vec::with_capacity(j.terms.len());
    for (k, t) in j.terms.iter().enumerate() {
        if t.exps.len() != spec.total() {
            return Err(Error::Config(format!(
                "{}: term {} has {} exponents for {} variables",
                at,
                k,
                t.exps.len(),
                spec.total()
            )));
        }
        terms.push((
            t.exps.clone(),
            scalar_from_json(&t.coeff, &format!("{}: term {}", at, k))?,
        ));
    }
    Ok(TruncSeries::from_terms(spec, window, terms))
}

// ---------------------------------------------------------------------------
// Tower documents
// ---------------------------------------------------------------------------

/// One tensor component: output index, sorted input multiset, dz̄ index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentJson {
    pub output: u8,
    pub inputs: Vec<u8>,
    pub dzbar: u8,
    pub series: SeriesJson,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TowerLevelJson {
    pub n: usize,
    pub components: Vec<ComponentJson>,
}

/// The curvature tower of a metric: raw symmetrized covariant derivatives
/// of the curvature, before any stabilizer normalization.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TowerDocument {
    pub schema: String,
    /// The degree-2 level is ∂_{z̄} Γ with the upper index on the tangent
    /// side; derivation data divide each component by the stabilizer of
    /// its input multiset.
    pub convention: String,
    pub dim: usize,
    pub base_order: i64,
    pub levels: Vec<TowerLevelJson>,
}

pub fn tower_to_document(levels: &[CurvatureTensor], base_order: i64) -> TowerDocument {
    let dim = levels.first().map(|r| r.dim).unwrap_or(0);
    TowerDocument {
        schema: TOWER_SCHEMA.to_string(),
        convention: "tangent curvature ∂̄Γ; derivation action divides by input-multiset stabilizers"
            .to_string(),
        dim,
        base_order,
        levels: levels
            .iter()
            .map(|r| TowerLevelJson {
                n: r.n,
                components: r
                    .comps
                    .iter()
                    .map(|((l, mu, k), s)| ComponentJson {
                        output: *l,
                        inputs: mu.clone(),
                        dzbar: *k,
                        series: series_to_json(s),
                    })
                    .collect(),
            })
            .collect(),
    }
}

pub fn tower_from_document(doc: &TowerDocument) -> Result<Vec<CurvatureTensor>> {
    if doc.schema != TOWER_SCHEMA {
        return Err(Error::Config(format!(
            "tower document: schema '{}' (expected '{}')",
            doc.schema, TOWER_SCHEMA
        )));
    }
    let spec = VarSpec::base(doc.dim);
    let mut out = Vec::with_capacity(doc.levels.len());
    for level in &doc.levels {
        let mut r = CurvatureTensor::zero(level.n, doc.dim, spec);
        for (k, c) in level.components.iter().enumerate() {
            let at = format!("tower level {} component {}", level.n, k);
            if c.inputs.len() != level.n {
                return Err(Error::Config(format!(
                    "{}: {} inputs at level {}",
                    at,
                    c.inputs.len(),
                    level.n
                )));
            }
            if !c.inputs.windows(2).all(|w| w[0] <= w[1]) {
                return Err(Error::Config(format!("{}: inputs not sorted", at)));
            }
            if c.output as usize >= doc.dim
                || c.dzbar as usize >= doc.dim
                || c.inputs.iter().any(|&i| i as usize >= doc.dim)
            {
                return Err(Error::Config(format!("{}: index out of range", at)));
            }
            let s = series_from_json(&c.series, &at)?;
            if s.spec != spec {
                return Err(Error::Config(format!(
                    "{}: series over a non-base layout",
                    at
                )));
            }
            r.comps.insert((c.output, c.inputs.clone(), c.dzbar), s);
        }
        out.push(r);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Connection-form documents
// ---------------------------------------------------------------------------

/// The recovered connection form of a section, level by level. Components
/// are the derivation data themselves (stabilizer division already done;
/// for a metric family each level is the negated tower level divided by
/// stabilizers).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlphaDocument {
    pub schema: String,
    pub dim: usize,
    pub base_order: i64,
    pub fiber_cap: i64,
    pub levels: Vec<TowerLevelJson>,
}

pub fn alpha_to_document(omega: &[FormHom], base_order: i64, fiber_cap: i64) -> AlphaDocument {
    let dim = omega.first().map(|a| a.dim).unwrap_or(0);
    AlphaDocument {
        schema: ALPHA_SCHEMA.to_string(),
        dim,
        base_order,
        fiber_cap,
        levels: omega
            .iter()
            .map(|a| TowerLevelJson {
                n: a.n,
                components: a
                    .parts
                    .iter()
                    .enumerate()
                    .flat_map(|(k, part)| {
                        part.entries.iter().map(move |((l, mu), s)| ComponentJson {
                            output: *l,
                            inputs: mu.clone(),
                            dzbar: k as u8,
                            series: series_to_json(s),
                        })
                    })
                    .collect(),
            })
            .collect(),
    }
}

pub fn alpha_from_document(doc: &AlphaDocument) -> Result<Vec<FormHom>> {
    if doc.schema != ALPHA_SCHEMA {
        return Err(Error::Config(format!(
            "form document: schema '{}' (expected '{}')",
            doc.schema, ALPHA_SCHEMA
        )));
    }
    let spec = VarSpec::base(doc.dim);
    let mut out = Vec::with_capacity(doc.levels.len());
    for level in &doc.levels {
        let mut a = FormHom::zero(level.n, doc.dim, spec);
        for (k, c) in level.components.iter().enumerate() {
            let at = format!("form level {} component {}", level.n, k);
            if c.inputs.len() != level.n
                || c.output as usize >= doc.dim
                || c.dzbar as usize >= doc.dim
                || c.inputs.iter().any(|&i| i as usize >= doc.dim)
            {
                return Err(Error::Config(format!("{}: bad indices", at)));
            }
            let s = series_from_json(&c.series, &at)?;
            if s.spec != spec {
                return Err(Error::Config(format!(
                    "{}: series over a non-base layout",
                    at
                )));
            }
            a.parts[c.dzbar as usize].set(c.output, c.inputs.clone(), s);
        }
        out.push(a);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Expansion documents
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaylorTermJson {
    pub dzbar: Vec<u8>,
    pub fiber: Vec<u8>,
    pub series: SeriesJson,
}

/// The result of a covariant expansion, term by term.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaylorDocument {
    pub schema: String,
    pub dim: usize,
    pub fiber_cap: i64,
    pub fiber_reliable: i64,
    pub terms: Vec<TaylorTermJson>,
}

pub fn taylor_to_document(x: &DolbeaultElement) -> TaylorDocument {
    TaylorDocument {
        schema: TAYLOR_SCHEMA.to_string(),
        dim: x.dim,
        fiber_cap: x.fiber_cap,
        fiber_reliable: x.fiber_reliable,
        terms: x
            .terms
            .iter()
            .map(|((s, mu), c)| TaylorTermJson {
                dzbar: s.clone(),
                fiber: mu.clone(),
                series: series_to_json(c),
            })
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// User inputs: metrics and two-factor forms
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricEntryJson {
    pub row: u8,
    pub col: u8,
    pub series: SeriesJson,
}

/// A user metric: hermitian Kähler entries over the base layout. Scalars
/// must be Gaussian rationals — anything else fails at parse, by
/// construction of the scalar format.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricDocument {
    pub schema: String,
    pub dim: usize,
    pub base_order: i64,
    pub entries: Vec<MetricEntryJson>,
}

pub fn metric_from_document(doc: &MetricDocument) -> Result<ChartMetric> {
    if doc.schema != METRIC_SCHEMA {
        return Err(Error::Config(format!(
            "metric document: schema '{}' (expected '{}')",
            doc.schema, METRIC_SCHEMA
        )));
    }
    let mut entries = BTreeMap::new();
    for (k, e) in doc.entries.iter().enumerate() {
        let at = format!("metric entry {}", k);
        let s = series_from_json(&e.series, &at)?;
        if entries.insert((e.row, e.col), s).is_some() {
            return Err(Error::Config(format!(
                "{}: duplicate position ({}, {})",
                at, e.row, e.col
            )));
        }
    }
    ChartMetric::from_entries(doc.dim, doc.base_order, entries)
}

pub fn metric_to_document(m: &ChartMetric) -> MetricDocument {
    MetricDocument {
        schema: METRIC_SCHEMA.to_string(),
        dim: m.dim,
        base_order: m.base_order,
        entries: m
            .entries
            .iter()
            .map(|((i, j), s)| MetricEntryJson {
                row: *i,
                col: *j,
                series: series_to_json(s),
            })
            .collect(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormTermJson {
    /// Strictly sorted dz̄ indices of the first factor.
    pub dzbar_first: Vec<u8>,
    /// Strictly sorted dw̄ indices of the second factor.
    pub dzbar_second: Vec<u8>,
    pub series: SeriesJson,
}

/// A user form on the two-factor chart, input to the expansion command.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormDocument {
    pub schema: String,
    pub dim: usize,
    pub terms: Vec<FormTermJson>,
}

pub fn form_from_document(doc: &FormDocument) -> Result<BiChartForm> {
    if doc.schema != FORM_SCHEMA {
        return Err(Error::Config(format!(
            "form document: schema '{}' (expected '{}')",
            doc.schema, FORM_SCHEMA
        )));
    }
    let spec = bichart_spec(doc.dim);
    let mut out = BiChartForm::zero(doc.dim);
    for (k, t) in doc.terms.iter().enumerate() {
        let at = format!("form term {}", k);
        for s in [&t.dzbar_first, &t.dzbar_second] {
            if !s.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::Config(format!("{}: wedge set not strictly sorted", at)));
            }
            if s.iter().any(|&i| i as usize >= doc.dim) {
                return Err(Error::Config(format!("{}: wedge index out of range", at)));
            }
        }
        let series = series_from_json(&t.series, &at)?;
        if series.spec != spec {
            return Err(Error::Config(format!(
                "{}: series must use the two-factor layout [{}, {}, 0]",
                at,
                2 * doc.dim,
                2 * doc.dim
            )));
        }
        out = out.add(&BiChartForm::term(
            doc.dim,
            t.dzbar_first.clone(),
            t.dzbar_second.clone(),
            series,
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Family jets
// ---------------------------------------------------------------------------

/// A fiberwise reparameterization jet: one component per direction over the
/// family layout, identity-linear in the fiber directions.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyDocument {
    pub schema: String,
    pub dim: usize,
    pub order: i64,
    pub components: Vec<SeriesJson>,
}

pub fn family_to_document(phi: &FamilyJet) -> FamilyDocument {
    FamilyDocument {
        schema: FAMILY_SCHEMA.to_string(),
        dim: phi.dim,
        order: phi.order,
        components: phi.components.iter().map(series_to_json).collect(),
    }
}

pub fn family_from_document(doc: &FamilyDocument) -> Result<FamilyJet> {
    if doc.schema != FAMILY_SCHEMA {
        return Err(Error::Config(format!(
            "family document: schema '{}' (expected '{}')",
            doc.schema, FAMILY_SCHEMA
        )));
    }
    let mut components = Vec::with_capacity(doc.components.len());
    for (k, c) in doc.components.iter().enumerate() {
        components.push(series_from_json(c, &format!("family component {}", k))?);
    }
    FamilyJet::new(doc.dim, doc.order, components)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dolbeault::{derivation_tower, to_form_hom, twisted_dbar};
    use crate::kahler::{curvature_tensor, curvature_tower, levi_civita};
    use crate::series::Group;
    use crate::tensor::sorted_multisets;

    /// Tower documents round-trip to the identical kernel object, and the
    /// re-imported tower drives the identical twisted differential.
    #[test]
    fn tower_round_trip_reproduces_differential() {
        let h = ChartMetric::fubini_study(1, 4);
        let conn = levi_civita(&h).unwrap();
        let r2 = curvature_tensor(&conn).unwrap();
        let levels = curvature_tower(&conn, &r2, 4).unwrap();
        let doc = tower_to_document(&levels, 4);
        let json = serde_json::to_string(&doc).unwrap();
        let back: TowerDocument = serde_json::from_str(&json).unwrap();
        let levels2 = tower_from_document(&back).unwrap();
        assert_eq!(levels, levels2);
        let tower: Vec<_> = levels.iter().map(to_form_hom).collect();
        let tower2: Vec<_> = levels2.iter().map(to_form_hom).collect();
        for s in crate::dolbeault::subsets(1) {
            for d in 0..=4usize {
                for mu in sorted_multisets(1, d) {
                    let x = DolbeaultElement::term(
                        1,
                        4,
                        s.clone(),
                        mu,
                        TruncSeries::one(VarSpec::base(1)),
                    );
                    let a = twisted_dbar(&tower, &x);
                    let b = twisted_dbar(&tower2, &x);
                    assert_eq!(a, b);
                }
            }
        }
    }

    /// Byte determinism of serialization for a fixed object.
    #[test]
    fn serialization_is_byte_stable() {
        let h = ChartMetric::fubini_study(2, 3);
        let conn = levi_civita(&h).unwrap();
        let tower = derivation_tower(&conn, 3).unwrap();
        let doc = alpha_to_document(&tower, 3, 3);
        let a = serde_json::to_string(&doc).unwrap();
        let b = serde_json::to_string(&alpha_to_document(
            &derivation_tower(&levi_civita(&ChartMetric::fubini_study(2, 3)).unwrap(), 3).unwrap(),
            3,
            3,
        ))
        .unwrap();
        assert_eq!(a, b);
        let back = alpha_from_document(&serde_json::from_str(&a).unwrap()).unwrap();
        assert_eq!(back, tower);
    }

    /// Scalars reject decimals, floats, and zero denominators.
    #[test]
    fn scalar_parsing_rejects_non_rationals() {
        let bad = ScalarJson {
            re: RationalJson {
                num: "1.5".into(),
                den: "1".into(),
            },
            im: None,
        };
        assert!(scalar_from_json(&bad, "test").is_err());
        let zero_den = ScalarJson {
            re: RationalJson {
                num: "1".into(),
                den: "0".into(),
            },
            im: None,
        };
        assert!(scalar_from_json(&zero_den, "test").is_err());
        let sqrt = ScalarJson {
            re: RationalJson {
                num: "sqrt(2)".into(),
                den: "1".into(),
            },
            im: None,
        };
        assert!(scalar_from_json(&sqrt, "test").is_err());
    }

    /// A metric document parses, validates, and reproduces its geometry.
    #[test]
    fn metric_document_round_trip() {
        let m = ChartMetric::fubini_study(1, 4);
        let doc = metric_to_document(&m);
        let json = serde_json::to_string_pretty(&doc).unwrap();
        let back = metric_from_document(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back.dim, 1);
        assert_eq!(back.base_order, 4);
        let c1 = levi_civita(&m).unwrap();
        let c2 = levi_civita(&back).unwrap();
        for ((l, i, j), s) in &c1.christoffels.gamma {
            assert!(s.sub(&c2.christoffels.get(*l, *i, *j)).is_zero());
        }
    }

    /// Series windows survive the null-means-exact encoding.
    #[test]
    fn window_encoding_round_trips() {
        let spec = VarSpec::base(1);
        let s = TruncSeries::var(spec, 0)
            .clamp_window([3, RELIABLE_EXACT, RELIABLE_EXACT]);
        let j = series_to_json(&s);
        assert_eq!(j.window, [Some(3), None, None]);
        let back = series_from_json(&j, "test").unwrap();
        assert_eq!(back.reliable[Group::Z as usize], 3);
        assert_eq!(back.reliable[Group::Zbar as usize], RELIABLE_EXACT);
        assert!(back.sub(&s).is_zero());
    }

    /// Family jets round-trip, and malformed ones are rejected on import.
    #[test]
    fn family_document_round_trip_validates() {
        use crate::section::{family_u, family_zbar};
        let spec = crate::section::family_spec(1);
        let u = TruncSeries::var(spec, family_u(1, 0));
        let zbar = TruncSeries::var(spec, family_zbar(1, 0));
        let phi = FamilyJet::new(1, 5, vec![u.add(&zbar.mul(&u.mul(&u)))]).unwrap();
        let doc = family_to_document(&phi);
        let json = serde_json::to_string(&doc).unwrap();
        let back = family_from_document(&serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, phi);
        // A u-independent term must be refused by the jet constructor.
        let mut bad = doc.clone();
        bad.components[0].terms.push(TermJson {
            exps: vec![0, 0, 1],
            coeff: scalar_to_json(&GaussianRational::one()),
        });
        assert!(family_from_document(&bad).is_err());
    }
}
