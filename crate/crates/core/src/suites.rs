//! Certificate suites: every identity the kernel certifies, bundled into
//! six independently runnable groups, plus the deterministic parallel
//! runner.
//!
//! Invariants:
//! * one certificate per identity; a violated identity produces a `fail`
//!   certificate naming the stage and the offending term, never a panic;
//! * randomized sweeps derive their streams from (seed, suite, identity),
//!   so the certificate list is byte-stable for a fixed configuration
//!   across runs and across worker counts;
//! * certificates are emitted sorted by (suite, identity);
//! * reported windows are capped at the configured base order — a window
//!   entry of `w` means "certified through order at least `w`".

use crate::config::{Certificate, MetricKind, RunConfig, SuiteKind};
use crate::connection::{check_equivariance, ConnectionJet};
use crate::covariant::Christoffels;
use crate::dolbeault::{
    bichart_spec, bichart_w, bichart_wbar, bichart_z, bichart_zbar, check_d_squared,
    check_exp_commutator, derivation_tower, exp_star, holomorphic_expansion, restrict_to_jets,
    subsets, twisted_dbar, BiChartForm, DolbeaultElement,
};
use crate::error::{Error, Result};
use crate::jets::AutoJet;
use crate::kahler::{
    check_bianchi, curvature_tensor, curvature_tower, levi_civita, ChartConnection, ChartMetric,
};
use crate::num::GaussianRational;
use crate::rng::SuiteRng;
use crate::section::{
    carry_family, check_maurer_cartan, connection_form_from_section, metric_family,
    section_from_family,
};
use crate::series::{Group, TruncSeries, VarSpec, RELIABLE_EXACT};
use crate::tensor::{sorted_multisets, sym_include, sym_project};

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

/// Build the metric the configuration names.
pub fn resolve_metric(cfg: &RunConfig, user: Option<&ChartMetric>) -> Result<ChartMetric> {
    match cfg.metric {
        MetricKind::Flat => Ok(ChartMetric::flat(cfg.dim, cfg.base_order)),
        MetricKind::FubiniStudy => Ok(ChartMetric::fubini_study(cfg.dim, cfg.base_order)),
        MetricKind::User => {
            let m = user.ok_or_else(|| {
                Error::Config("metric 'user' requires parsed metric data".into())
            })?;
            if m.dim != cfg.dim {
                return Err(Error::Config(format!(
                    "user metric has dimension {} but the run is configured for {}",
                    m.dim, cfg.dim
                )));
            }
            Ok(m.clone())
        }
    }
}

/// Run the selected suites and return their certificates sorted by
/// (suite, identity). Worker threads partition whole suites; the output
/// does not depend on the worker count.
pub fn run_suites(cfg: &RunConfig, user_metric: Option<&ChartMetric>) -> Result<Vec<Certificate>> {
    cfg.validate()?;
    let metric = resolve_metric(cfg, user_metric)?;
    let suites = cfg.selected_suites();
    let workers = cfg.effective_threads().min(suites.len()).max(1);
    let mut certs: Vec<Certificate> = if workers <= 1 {
        suites
            .iter()
            .flat_map(|s| run_suite(*s, cfg, &metric))
            .collect()
    } else {
        let mut buckets: Vec<Vec<SuiteKind>> = vec![Vec::new(); workers];
        for (i, s) in suites.iter().enumerate() {
            buckets[i % workers].push(*s);
        }
        let metric_ref = &metric;
        std::thread::scope(|scope| {
            let handles: Vec<_> = buckets
                .into_iter()
                .map(|bucket| {
                    scope.spawn(move || {
                        bucket
                            .into_iter()
                            .flat_map(|s| run_suite(s, cfg, metric_ref))
                            .collect::<Vec<Certificate>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("suite worker panicked"))
                .collect()
        })
    };
    certs.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok(certs)
}

/// Run one suite against an already resolved metric.
pub fn run_suite(kind: SuiteKind, cfg: &RunConfig, metric: &ChartMetric) -> Vec<Certificate> {
    match kind {
        SuiteKind::Algebra => suite_algebra(cfg),
        SuiteKind::Jets => suite_jets(cfg),
        SuiteKind::Connections => suite_connections(cfg),
        SuiteKind::Twisted => suite_twisted(cfg, metric),
        SuiteKind::Section => suite_section(cfg, metric),
        SuiteKind::Atiyah => suite_atiyah(cfg),
    }
}

fn stage_of(e: &Error) -> &'static str {
    match e {
        Error::Shape(_) => "shape",
        Error::Domain(_) => "identity",
        Error::Order { .. } => "truncation",
        Error::Filtration(_) => "filtration",
        Error::Config(_) => "config",
    }
}

fn run_identity(
    suite: SuiteKind,
    identity: &str,
    cfg: &RunConfig,
    body: impl FnOnce() -> Result<(u64, Option<[i64; 2]>)>,
) -> Certificate {
    match body() {
        Ok((checks, window)) => Certificate::pass(suite, identity, cfg, checks, window),
        Err(e) => Certificate::fail(suite, identity, cfg, stage_of(&e), e.to_string()),
    }
}

/// Per-identity random stream: a fixed function of (seed, suite, salt),
/// independent of which other identities run.
fn identity_rng(cfg: &RunConfig, kind: SuiteKind, salt: u64) -> SuiteRng {
    let mut root = SuiteRng::from_seed(cfg.seed);
    let mut suite = root.fork(kind as u64 + 1);
    suite.fork(salt)
}

fn window_pair(w: [i64; 3], cap: i64) -> Option<[i64; 2]> {
    Some([w[0].min(cap), w[1].min(cap)])
}

fn fold_window(acc: &mut [i64; 3], w: [i64; 3]) {
    for g in 0..3 {
        acc[g] = acc[g].min(w[g]);
    }
}

/// Every monomial of total degree ≤ `max_deg` in the listed flat variable
/// positions, constants first, in a fixed order.
fn monomial_battery(spec: VarSpec, vars: &[usize], max_deg: usize) -> Vec<TruncSeries> {
    let mut out = Vec::new();
    for d in 0..=max_deg {
        for m in sorted_multisets(vars.len() as u8, d) {
            let mut idx = vec![0u16; spec.total()];
            for &letter in &m {
                idx[vars[letter as usize]] += 1;
            }
            out.push(TruncSeries::monomial(spec, idx, GaussianRational::one()));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Suite: algebra
// ---------------------------------------------------------------------------

fn suite_algebra(cfg: &RunConfig) -> Vec<Certificate> {
    let kind = SuiteKind::Algebra;
    let mut out = Vec::new();

    out.push(run_identity(kind, "shuffle_commutativity", cfg, || {
        let mut rng = identity_rng(cfg, kind, 1);
        let mut checks = 0u64;
        for k in 0..200u64 {
            let dim = 1 + (k % 3) as u8;
            let a = rng.tensor_word(dim, 3, 2);
            let b = rng.tensor_word(dim, 3, 2);
            let d = a.shuffle(&b).sub(&b.shuffle(&a));
            if !d.is_zero() {
                return Err(Error::Domain(format!(
                    "shuffle commutator nonzero at sample {}: word {:?}",
                    k,
                    d.terms.keys().next().unwrap()
                )));
            }
            checks += 1;
        }
        Ok((checks, None))
    }));

    out.push(run_identity(kind, "shuffle_associativity", cfg, || {
        let mut rng = identity_rng(cfg, kind, 2);
        let mut checks = 0u64;
        for k in 0..200u64 {
            let dim = 1 + (k % 3) as u8;
            let a = rng.tensor_word(dim, 2, 2);
            let b = rng.tensor_word(dim, 2, 2);
            let c = rng.tensor_word(dim, 2, 2);
            let d = a.shuffle(&b).shuffle(&c).sub(&a.shuffle(&b.shuffle(&c)));
            if !d.is_zero() {
                return Err(Error::Domain(format!(
                    "shuffle associator nonzero at sample {}: word {:?}",
                    k,
                    d.terms.keys().next().unwrap()
                )));
            }
            checks += 1;
        }
        Ok((checks, None))
    }));

    out.push(run_identity(kind, "symmetrization_section", cfg, || {
        let mut rng = identity_rng(cfg, kind, 3);
        let mut checks = 0u64;
        for k in 0..200u64 {
            let dim = 1 + (k % 3) as u8;
            let p = rng.sym_poly(dim, 6, 4);
            let q = sym_project(&sym_include(&p));
            if q.terms != p.terms {
                return Err(Error::Domain(format!(
                    "projection after inclusion moved a polynomial at sample {}",
                    k
                )));
            }
            checks += 1;
        }
        Ok((checks, None))
    }));

    out
}

// ---------------------------------------------------------------------------
// Suite: jets
// ---------------------------------------------------------------------------

const JET_ORDER: i64 = 4;

fn suite_jets(cfg: &RunConfig) -> Vec<Certificate> {
    let kind = SuiteKind::Jets;
    let mut out = Vec::new();

    out.push(run_identity(kind, "group_associativity", cfg, || {
        let mut rng = identity_rng(cfg, kind, 1);
        let mut checks = 0u64;
        for k in 0..100u64 {
            let dim = 1 + (k % 2) as usize;
            let a = rng.general_auto_jet(dim, JET_ORDER);
            let b = rng.general_auto_jet(dim, JET_ORDER);
            let c = rng.general_auto_jet(dim, JET_ORDER);
            let lhs = a.compose(&b)?.compose(&c)?;
            let rhs = a.compose(&b.compose(&c)?)?;
            if lhs != rhs {
                return Err(Error::Domain(format!(
                    "jet composition fails to associate at sample {} (dim {})",
                    k, dim
                )));
            }
            checks += 1;
        }
        Ok((checks, None))
    }));

    out.push(run_identity(kind, "group_inverse", cfg, || {
        let mut rng = identity_rng(cfg, kind, 2);
        let mut checks = 0u64;
        for k in 0..100u64 {
            let dim = 1 + (k % 2) as usize;
            let a = rng.general_auto_jet(dim, JET_ORDER);
            let inv = a.invert()?;
            let id = AutoJet::identity(dim, JET_ORDER);
            if a.compose(&inv)? != id || inv.compose(&a)? != id {
                return Err(Error::Domain(format!(
                    "jet inverse fails at sample {} (dim {})",
                    k, dim
                )));
            }
            checks += 2;
        }
        Ok((checks, None))
    }));

    out.push(run_identity(kind, "semidirect_recomposition", cfg, || {
        let mut rng = identity_rng(cfg, kind, 3);
        let mut checks = 0u64;
        for k in 0..100u64 {
            let dim = 1 + (k % 2) as usize;
            let phi = rng.general_auto_jet(dim, JET_ORDER);
            let (j, t) = phi.semidirect_split()?;
            if !j.has_identity_linear_part() {
                return Err(Error::Domain(format!(
                    "unipotent factor has a nontrivial linear part at sample {}",
                    k
                )));
            }
            if j.compose(&AutoJet::linear(&t, JET_ORDER)?)? != phi {
                return Err(Error::Domain(format!(
                    "semidirect factors do not recompose at sample {} (dim {})",
                    k, dim
                )));
            }
            checks += 2;
        }
        Ok((checks, None))
    }));

    out.push(run_identity(kind, "linear_action_law", cfg, || {
        let mut rng = identity_rng(cfg, kind, 4);
        let mut checks = 0u64;
        for k in 0..100u64 {
            let dim = 1 + (k % 2) as usize;
            let j1 = rng.auto_jet(dim, JET_ORDER);
            let j2 = rng.auto_jet(dim, JET_ORDER);
            let l1 = rng.linear_auto_jet(dim, JET_ORDER);
            let l2 = rng.linear_auto_jet(dim, JET_ORDER);
            // The linear group acts on identity-linear jets by
            // homomorphisms.
            let lhs = l1.act_on_identity_linear(&j1.compose(&j2)?)?;
            let rhs = l1
                .act_on_identity_linear(&j1)?
                .compose(&l1.act_on_identity_linear(&j2)?)?;
            if lhs != rhs {
                return Err(Error::Domain(format!(
                    "linear action is not multiplicative at sample {} (dim {})",
                    k, dim
                )));
            }
            // The twisted product law reproduces plain composition.
            let plain = j1.compose(&l1)?.compose(&j2.compose(&l2)?)?;
            let semi = j1
                .compose(&l1.act_on_identity_linear(&j2)?)?
                .compose(&l1.compose(&l2)?)?;
            if plain != semi {
                return Err(Error::Domain(format!(
                    "semidirect product law fails at sample {} (dim {})",
                    k, dim
                )));
            }
            checks += 2;
        }
        Ok((checks, None))
    }));

    out
}

// ---------------------------------------------------------------------------
// Suite: connections
// ---------------------------------------------------------------------------

fn clamped_flat_connection(rng: &mut SuiteRng, dim: usize, order: i64) -> Result<ConnectionJet> {
    let raw = rng.flat_connection(dim, order)?;
    if raw.order < order {
        return Err(Error::Order {
            context: "random flat connection below requested order".into(),
            max_achievable: raw.order,
        });
    }
    ConnectionJet::new(dim, order, raw.christoffels)
}

fn suite_connections(cfg: &RunConfig) -> Vec<Certificate> {
    let kind = SuiteKind::Connections;
    let mut out = Vec::new();

    out.push(run_identity(kind, "exponential_straightens", cfg, || {
        let mut rng = identity_rng(cfg, kind, 1);
        let mut checks = 0u64;
        for k in 0..20u64 {
            let conn = clamped_flat_connection(&mut rng, 2, 4)?;
            let e = conn.exp_jet()?;
            // Transporting the connection backwards along its own
            // straightening jet lands on the Euclidean connection, one
            // order lower.
            let pulled = conn.pushforward(&e.invert()?)?;
            if pulled.order < 3 {
                return Err(Error::Order {
                    context: format!("straightened connection order at sample {}", k),
                    max_achievable: pulled.order,
                });
            }
            for l in 0..2u8 {
                for a in 0..2u8 {
                    for b in 0..2u8 {
                        let s = pulled.christoffels.get(l, a, b);
                        if !s.is_zero() {
                            return Err(Error::Domain(format!(
                                "straightened connection is not Euclidean at sample {}, Γ^{}_({},{}) = {}",
                                k, l, a, b, s
                            )));
                        }
                        checks += 1;
                    }
                }
            }
            // And the Euclidean connection transported forwards recovers
            // the original entries through degree 2.
            let back = ConnectionJet::euclidean(2, 4).pushforward(&e)?;
            for l in 0..2u8 {
                for a in 0..2u8 {
                    for b in 0..2u8 {
                        let d = back
                            .christoffels
                            .get(l, a, b)
                            .sub(&conn.christoffels.get(l, a, b));
                        if !d.is_zero() {
                            return Err(Error::Domain(format!(
                                "transported Euclidean connection differs at sample {}, entry ({},{},{}): {}",
                                k, l, a, b, d
                            )));
                        }
                        if d.reliable[Group::U as usize] < 2 {
                            return Err(Error::Order {
                                context: format!(
                                    "recovered entry window at sample {}, entry ({},{},{})",
                                    k, l, a, b
                                ),
                                max_achievable: d.reliable[Group::U as usize],
                            });
                        }
                        checks += 1;
                    }
                }
            }
        }
        Ok((checks, None))
    }));

    out.push(run_identity(kind, "origin_jet_logarithm", cfg, || {
        let mut rng = identity_rng(cfg, kind, 2);
        let spec = VarSpec::new(0, 0, 1);
        let mut cases: Vec<GaussianRational> = [1i64, 2, 3, -1, -2]
            .iter()
            .map(|&v| GaussianRational::from_int(v))
            .collect();
        for _ in 0..5 {
            cases.push(rng.small_rational());
        }
        let mut checks = 0u64;
        for c in cases {
            let mut ch = Christoffels::zero(1, spec);
            ch.set(0, 0, 0, TruncSeries::constant(spec, c.clone()));
            let conn = ConnectionJet::new(1, 5, ch)?;
            let e = conn.exp_jet()?;
            // Constant symbol c: the straightening is t ↦ log(1+ct)/c,
            // coefficient (−c)^{k−1}/k at degree k.
            let mut pow = GaussianRational::one();
            for k in 1..=5i64 {
                let sign = if k % 2 == 1 { 1 } else { -1 };
                let want = pow.mul(&GaussianRational::from_ratio(sign, k));
                let got = e.components[0].coefficient(&[k as u16]);
                if got != want {
                    return Err(Error::Domain(format!(
                        "logarithm series mismatch for symbol {} at degree {}: {} instead of {}",
                        c, k, got, want
                    )));
                }
                checks += 1;
                pow = pow.mul(&c);
            }
        }
        Ok((checks, None))
    }));

    out.push(run_identity(kind, "straightening_equivariance", cfg, || {
        let mut rng = identity_rng(cfg, kind, 3);
        let mut checks = 0u64;
        for k in 0..20u64 {
            let dim = 1 + (k % 2) as usize;
            let conn = clamped_flat_connection(&mut rng, dim, 4)?;
            let psi = rng.general_auto_jet(dim, 4);
            let rep = check_equivariance(&psi, &conn)?;
            if !rep.holds() {
                return Err(Error::Domain(format!(
                    "equivariance fails at sample {} (dim {}): agrees to {} of {} required{}",
                    k,
                    dim,
                    rep.agrees_to,
                    rep.required,
                    rep.discrepancy
                        .map(|d| format!("; {}", d))
                        .unwrap_or_default()
                )));
            }
            checks += 1;
        }
        Ok((checks, None))
    }));

    out
}

// ---------------------------------------------------------------------------
// Suite: twisted differential
// ---------------------------------------------------------------------------

fn suite_twisted(cfg: &RunConfig, metric: &ChartMetric) -> Vec<Certificate> {
    let kind = SuiteKind::Twisted;
    let dim = cfg.dim;
    let cap = metric.base_order;
    let mut out = Vec::new();

    out.push(run_identity(kind, "metric_hermitian_kahler", cfg, || {
        metric.validate()?;
        let d = metric.dim as u64;
        let checks = d * d + d * d * d.saturating_sub(1) / 2 + 1;
        Ok((checks, Some([cap, cap])))
    }));

    out.push(run_identity(kind, "connection_torsion_free", cfg, || {
        let conn = levi_civita(metric)?;
        if !conn.is_torsion_free() {
            return Err(Error::Domain("metric connection has torsion".into()));
        }
        let d = dim as u64;
        let w = conn.christoffels.min_reliable();
        Ok((d * d * d.saturating_sub(1) / 2, window_pair(w, cap)))
    }));

    out.push(run_identity(kind, "connection_20_flat", cfg, || {
        let conn = levi_civita(metric)?;
        let f = conn.curvature_20();
        if let Some(((l, i, j, k), s)) = f.iter().next() {
            return Err(Error::Domain(format!(
                "unbarred curvature F^{}_({},{}),{} = {}",
                l, i, j, k, s
            )));
        }
        let d = dim as u64;
        let w = conn.christoffels.min_reliable();
        Ok((
            d * d * d * d.saturating_sub(1) / 2,
            window_pair([w[0] - 1, w[1], w[2]], cap),
        ))
    }));

    out.push(run_identity(
        kind,
        "curvature_antiholomorphic_closed",
        cfg,
        || {
            let conn = levi_civita(metric)?;
            let r2 = curvature_tensor(&conn)?;
            let pairs = check_bianchi(&r2)? as u64;
            let w = r2.min_reliable();
            Ok((pairs, window_pair([w[0], w[1] - 1, w[2]], cap)))
        },
    ));

    out.push(run_identity(kind, "tower_total_symmetry", cfg, || {
        let conn = levi_civita(metric)?;
        let r2 = curvature_tensor(&conn)?;
        let levels = curvature_tower(&conn, &r2, cfg.tower_depth().max(2) as usize)?;
        let mut checks = 0u64;
        let mut w = [RELIABLE_EXACT; 3];
        for lvl in levels.iter().skip(1) {
            checks += lvl.comps.len() as u64;
            fold_window(&mut w, lvl.min_reliable());
        }
        Ok((checks, window_pair(w, cap)))
    }));

    out.push(run_identity(
        kind,
        "twisted_differential_squares_to_zero",
        cfg,
        || {
            let conn = levi_civita(metric)?;
            let tower = derivation_tower(&conn, cfg.fiber_cap)?;
            let ev = check_d_squared(&tower, dim, cfg.fiber_cap)?;
            Ok((ev.terms_checked as u64, window_pair(ev.min_base_window, cap)))
        },
    ));

    out.push(run_identity(kind, "expansion_commutator", cfg, || {
        let conn = levi_civita(metric)?;
        let tower = derivation_tower(&conn, cfg.fiber_cap)?;
        let spec = bichart_spec(dim);
        let mut vars = Vec::new();
        for i in 0..dim {
            vars.push(bichart_w(dim, i));
        }
        for i in 0..dim {
            vars.push(bichart_wbar(dim, i));
        }
        for i in 0..dim {
            vars.push(bichart_zbar(dim, i));
        }
        let mut checks = 0u64;
        let mut w = [RELIABLE_EXACT; 3];
        for f in monomial_battery(spec, &vars, 3) {
            let eta = BiChartForm::function(dim, f);
            let ev = check_exp_commutator(&conn, &tower, &eta, cfg.fiber_cap)?;
            fold_window(&mut w, ev.min_base_window);
            checks += 1;
        }
        Ok((checks, window_pair(w, cap)))
    }));

    // Degeneration identities: only meaningful when the geometry is
    // actually flat (zero connection), where the twisted calculus must
    // collapse to plain Taylor expansion and plain ∂̄.
    let is_flat = levi_civita(metric)
        .map(|c| c.christoffels.is_zero())
        .unwrap_or(false);
    if is_flat {
        out.push(run_identity(kind, "flat_expansion_is_taylor", cfg, || {
            let conn = levi_civita(metric)?;
            let spec = bichart_spec(dim);
            let mut vars = Vec::new();
            for i in 0..dim {
                vars.push(bichart_z(dim, i));
            }
            for i in 0..dim {
                vars.push(bichart_w(dim, i));
            }
            for i in 0..dim {
                vars.push(bichart_wbar(dim, i));
            }
            for i in 0..dim {
                vars.push(bichart_zbar(dim, i));
            }
            let mut checks = 0u64;
            let mut w = [RELIABLE_EXACT; 3];
            for f in monomial_battery(spec, &vars, 3) {
                let eta = BiChartForm::function(dim, f);
                let a = exp_star(&conn, &eta, cfg.fiber_cap)?;
                let b = restrict_to_jets(&eta, cfg.fiber_cap)?;
                let d = a.sub(&b);
                if !d.is_zero() {
                    return Err(Error::Domain(format!(
                        "flat expansion differs from Taylor restriction: {}",
                        d.sample_term().unwrap_or_default()
                    )));
                }
                fold_window(&mut w, d.min_base_reliable());
                checks += 1;
            }
            Ok((checks, window_pair(w, cap)))
        }));

        out.push(run_identity(kind, "flat_differential_is_dbar", cfg, || {
            let conn = levi_civita(metric)?;
            let tower = derivation_tower(&conn, cfg.fiber_cap)?;
            let base = VarSpec::base(dim);
            let z0 = TruncSeries::var(base, base.var_z(0));
            let zbar0 = TruncSeries::var(base, base.var_zbar(0));
            let coeffs = [
                TruncSeries::one(base),
                TruncSeries::one(base).add(&z0.mul(&zbar0)),
            ];
            let mut checks = 0u64;
            for s in subsets(dim as u8) {
                for deg in 0..=cfg.fiber_cap.max(0) {
                    for mu in sorted_multisets(dim as u8, deg as usize) {
                        for c in &coeffs {
                            let x = DolbeaultElement::term(
                                dim,
                                cfg.fiber_cap,
                                s.clone(),
                                mu.clone(),
                                c.clone(),
                            );
                            let d = twisted_dbar(&tower, &x).sub(&x.dbar());
                            if !d.is_zero() {
                                return Err(Error::Domain(format!(
                                    "flat twisted differential differs from ∂̄: {}",
                                    d.sample_term().unwrap_or_default()
                                )));
                            }
                            checks += 1;
                        }
                    }
                }
            }
            Ok((checks, None))
        }));
    }

    out
}

// ---------------------------------------------------------------------------
// Suite: section
// ---------------------------------------------------------------------------

fn suite_section(cfg: &RunConfig, metric: &ChartMetric) -> Vec<Certificate> {
    let kind = SuiteKind::Section;
    let dim = cfg.dim;
    let n = cfg.fiber_cap;
    let cap = metric.base_order;
    let mut out = Vec::new();

    out.push(run_identity(
        kind,
        "family_form_matches_curvature",
        cfg,
        || {
            let conn = levi_civita(metric)?;
            let fam = metric_family(&conn)?;
            let sec = section_from_family(&fam, n)?;
            let omega = connection_form_from_section(&sec)?;
            let tower = derivation_tower(&conn, n)?;
            let mut checks = 0u64;
            let mut w = [RELIABLE_EXACT; 3];
            for (a, t) in omega.iter().zip(tower.iter()) {
                let d = a.sub(&t.neg());
                if !d.is_zero() {
                    return Err(Error::Domain(format!(
                        "recovered form differs from negated curvature data at level {}",
                        t.n
                    )));
                }
                fold_window(&mut w, d.min_reliable());
                checks += 1;
            }
            Ok((checks, window_pair(w, cap)))
        },
    ));

    out.push(run_identity(kind, "family_form_flatness", cfg, || {
        let conn = levi_civita(metric)?;
        let fam = metric_family(&conn)?;
        let omega = connection_form_from_section(&section_from_family(&fam, n)?)?;
        let ev = check_maurer_cartan(&omega, dim, n)?;
        Ok((ev.terms_checked as u64, window_pair(ev.min_base_window, cap)))
    }));

    out.push(run_identity(kind, "perturbed_family_flatness", cfg, || {
        let mut rng = identity_rng(cfg, kind, 3);
        let conn = levi_civita(metric)?;
        let fam = metric_family(&conn)?;
        let jet_order = n + 1;
        let mut checks = 0u64;
        let mut w = [RELIABLE_EXACT; 3];
        for k in 0..5u64 {
            let phi = rng.family_perturbation(dim, jet_order, 1);
            let carried = carry_family(&fam, &phi, jet_order - 1).map_err(|e| {
                Error::Domain(format!("carrying the family at sample {}: {}", k, e))
            })?;
            let sec = section_from_family(&carried, n)?;
            let omega = connection_form_from_section(&sec)?;
            let ev = check_maurer_cartan(&omega, dim, n)?;
            fold_window(&mut w, ev.min_base_window);
            checks += ev.terms_checked as u64;
        }
        Ok((checks, window_pair(w, cap)))
    }));

    out
}

// ---------------------------------------------------------------------------
// Suite: atiyah
// ---------------------------------------------------------------------------

fn suite_atiyah(cfg: &RunConfig) -> Vec<Certificate> {
    let kind = SuiteKind::Atiyah;
    let mut out = Vec::new();

    out.push(run_identity(
        kind,
        "holomorphic_expansion_chain_rule",
        cfg,
        || {
            let mut rng = identity_rng(cfg, kind, 1);
            let mut conns: Vec<ChartConnection> = Vec::new();
            // Fixed witnesses: a dimension-1 connection with a linear
            // symbol, and a dimension-2 connection with torsion and
            // nonvanishing unbarred curvature.
            {
                let spec = VarSpec::base(1);
                let mut ch = Christoffels::zero(1, spec);
                ch.set(0, 0, 0, TruncSeries::var(spec, spec.var_z(0)));
                conns.push(ChartConnection::new(1, ch)?);
            }
            {
                let spec = VarSpec::base(2);
                let mut ch = Christoffels::zero(2, spec);
                ch.set(0, 0, 1, TruncSeries::var(spec, spec.var_z(1)));
                conns.push(ChartConnection::new(2, ch)?);
            }
            for k in 0..10u64 {
                let dim = 1 + (k % 2) as usize;
                conns.push(rng.holomorphic_connection(dim, 2));
            }
            let mut checks = 0u64;
            let mut w = [RELIABLE_EXACT; 3];
            for (idx, conn) in conns.iter().enumerate() {
                let dim = conn.dim;
                let spec = bichart_spec(dim);
                let mut vars = Vec::new();
                for i in 0..dim {
                    vars.push(bichart_w(dim, i));
                }
                for i in 0..dim {
                    vars.push(bichart_wbar(dim, i));
                }
                for i in 0..dim {
                    vars.push(bichart_zbar(dim, i));
                }
                for f in monomial_battery(spec, &vars, 2) {
                    let eta = BiChartForm::function(dim, f);
                    let a = holomorphic_expansion(conn, &eta, cfg.fiber_cap)?.dbar();
                    let b = holomorphic_expansion(conn, &eta.dbar_full(), cfg.fiber_cap)?;
                    let d = a.sub(&b);
                    if !d.is_zero() {
                        return Err(Error::Domain(format!(
                            "expansion fails to intertwine ∂̄ for connection {}: {}",
                            idx,
                            d.sample_term().unwrap_or_default()
                        )));
                    }
                    fold_window(&mut w, d.min_base_reliable());
                    checks += 1;
                }
            }
            Ok((checks, window_pair(w, cfg.base_order)))
        },
    ));

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> RunConfig {
        RunConfig {
            dim: 1,
            base_order: 3,
            fiber_cap: 3,
            suites: vec![SuiteKind::Algebra, SuiteKind::Twisted, SuiteKind::Section],
            ..RunConfig::default()
        }
    }

    /// A healthy configuration certifies every identity, sorted.
    #[test]
    fn small_run_passes_and_is_sorted() {
        let cfg = small_config();
        let certs = run_suites(&cfg, None).unwrap();
        assert!(!certs.is_empty());
        for c in &certs {
            assert!(c.passed(), "{}/{}: {:?}", c.suite, c.identity, c.failure);
        }
        let mut sorted = certs.clone();
        sorted.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        assert_eq!(certs, sorted);
    }

    /// The default configuration exercises every suite, including the
    /// fixed-cost randomized ones, and certifies everything.
    #[test]
    fn default_run_passes_every_suite() {
        let cfg = RunConfig::default();
        let certs = run_suites(&cfg, None).unwrap();
        let mut seen: Vec<SuiteKind> = certs.iter().map(|c| c.suite).collect();
        seen.dedup();
        assert_eq!(seen, SuiteKind::ALL.to_vec());
        for c in &certs {
            assert!(c.passed(), "{}/{}: {:?}", c.suite, c.identity, c.failure);
        }
        // Some identities are vacuous in dimension 1; every suite as a
        // whole must still have done real work.
        for kind in SuiteKind::ALL {
            let total: u64 = certs
                .iter()
                .filter(|c| c.suite == kind)
                .map(|c| c.checks)
                .sum();
            assert!(total > 0, "suite {} did no checks", kind);
        }
    }

    /// Certificates are identical across runs and across worker counts.
    #[test]
    fn certificates_are_deterministic() {
        let mut cfg = small_config();
        let a = run_suites(&cfg, None).unwrap();
        let b = run_suites(&cfg, None).unwrap();
        assert_eq!(a, b);
        cfg.threads = 3;
        let c = run_suites(&cfg, None).unwrap();
        assert_eq!(a, c);
    }

    /// The flat metric adds the degeneration identities and they pass.
    #[test]
    fn flat_metric_runs_degeneration_identities() {
        let cfg = RunConfig {
            metric: MetricKind::Flat,
            dim: 1,
            base_order: 3,
            fiber_cap: 3,
            suites: vec![SuiteKind::Twisted],
            ..RunConfig::default()
        };
        let certs = run_suites(&cfg, None).unwrap();
        let names: Vec<&str> = certs.iter().map(|c| c.identity.as_str()).collect();
        assert!(names.contains(&"flat_expansion_is_taylor"));
        assert!(names.contains(&"flat_differential_is_dbar"));
        for c in &certs {
            assert!(c.passed(), "{}: {:?}", c.identity, c.failure);
        }
    }

    /// A user metric is required when the configuration names one, and its
    /// dimension must match.
    #[test]
    fn user_metric_resolution_is_checked() {
        let cfg = RunConfig {
            metric: MetricKind::User,
            metric_file: Some("m.json".into()),
            ..RunConfig::default()
        };
        assert!(run_suites(&cfg, None).is_err());
        let wrong_dim = ChartMetric::flat(2, 4);
        assert!(resolve_metric(&cfg, Some(&wrong_dim)).is_err());
        let right = ChartMetric::flat(1, 4);
        assert!(resolve_metric(&cfg, Some(&right)).is_ok());
    }

    /// A deliberately broken metric yields fail certificates with named
    /// stages instead of an error from the runner.
    #[test]
    fn broken_metric_fails_certificates() {
        use crate::num::GaussianRational as Q;
        // Hermitian and invertible but not Kähler: h_00 depends on z_1
        // asymmetrically.
        let spec = VarSpec::base(2);
        let mut entries = std::collections::BTreeMap::new();
        let one = TruncSeries::one(spec);
        let z1 = TruncSeries::var(spec, spec.var_z(1));
        let zbar1 = TruncSeries::var(spec, spec.var_zbar(1));
        entries.insert((0u8, 0u8), one.clone().add(&z1.mul(&zbar1)));
        entries.insert((1u8, 1u8), one);
        let metric = ChartMetric {
            dim: 2,
            base_order: 3,
            entries,
        };
        assert!(metric.validate().is_err());
        let cfg = RunConfig {
            dim: 2,
            base_order: 3,
            fiber_cap: 3,
            suites: vec![SuiteKind::Twisted],
            ..RunConfig::default()
        };
        let certs: Vec<Certificate> = run_suite(SuiteKind::Twisted, &cfg, &metric);
        assert!(certs.iter().any(|c| !c.passed()));
        let cert = certs
            .iter()
            .find(|c| c.identity == "metric_hermitian_kahler")
            .unwrap();
        assert!(!cert.passed());
        assert_eq!(cert.failure.as_ref().unwrap().stage, "identity");
        let _ = Q::one();
    }
}
