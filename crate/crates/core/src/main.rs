//! `hdflow` batch interface. Every command reads JSON inputs, writes one JSON
//! report and exits with 0 (ok), 1 (input error), 2 (mathematical verdict) or
//! 3 (internal failure).

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use hdflow::bundle::{
    check_bundle, coherent, end_complex, format_sec, hom_complex, Bundle, BundleError, BundleJson, Variant,
    BUNDLE_SCHEMA,
};
use hdflow::cartier::{inverse_cartier, standard_frobenius, CartierError};
use hdflow::cech::{CechError, Cochain, Hyper, Window};
use hdflow::deform::{les_maps, Check, Deform, DeformError, Group, Lift, Obstruction};
use hdflow::flow::{
    find_hodge_filtration, lift_flow, ordinarity_check, verify_flow, Engine, FlowError, HDFlow, LiftOutcome,
    OrdinarityData,
};
use hdflow::geometry::{elem_from_json, validate_cover_json, CoeffJson, Cover, CoverJson, GeoError, COVER_SCHEMA};
use hdflow::smat::SMat;
use hdflow::witt::{Ring, WittElem, WittError};

const REPORT_SCHEMA: &str = "hdflow.report/1";
const FLOW_SCHEMA: &str = "hdflow.flow/1";

#[derive(Parser)]
#[command(name = "hdflow", version, about = "Deformation invariants and Higgs-de Rham flows on curves over Witt vectors")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Input JSON files (cover, bundle or flow documents), in command order.
    #[arg(long, global = true)]
    input: Vec<PathBuf>,
    /// Starting cohomology window `w,e`.
    #[arg(long, global = true, value_parser = parse_window)]
    window: Option<Window>,
    /// Seed for randomized choices (default torsor elements).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Target flow level for `flow-lift`.
    #[arg(long, global = true)]
    level: Option<u32>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Parse and check covers, bundles and flows.
    Validate,
    /// Hypercohomology dimensions and class representatives.
    Cohomology {
        #[arg(long, value_enum, default_value_t = ComplexArg::Auto)]
        complex: ComplexArg,
        /// Twist by `Ω^k` for the coherent complex.
        #[arg(long, default_value_t = 0)]
        twist: i32,
    },
    /// Obstruction class to lifting over the canonical thickening.
    Obstruct {
        #[arg(value_enum)]
        kind: ObstructKind,
    },
    /// Act on a lift by a torsor element.
    Act {
        #[arg(long, value_enum)]
        group: GroupArg,
        /// JSON array of coordinates (integers or coefficient vectors); random from `--seed` if absent.
        #[arg(long)]
        coords: Option<String>,
    },
    /// Torsor difference of two lifts.
    Diff {
        #[arg(long, value_enum)]
        group: GroupArg,
    },
    /// Long exact sequence of `Fil⁰ → DR → 𝒞` and the E₁ comparison.
    Les,
    /// Inverse Cartier transform of a graded Higgs bundle.
    Ic,
    /// Build and verify a level-one flow.
    FlowVerify,
    /// Lift a flow to `--level`.
    FlowLift,
    /// Linear data of the lifting problem and the ordinarity verdict.
    Ordinarity,
}

#[derive(Clone, Copy, ValueEnum)]
enum ComplexArg {
    Auto,
    Coherent,
    DeRham,
    Higgs,
    EndDeRham,
    EndFil0,
    EndQuotient,
    EndHiggs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObstructKind {
    Filtered,
    Hodge,
    GradedHiggs,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupArg {
    Filtered,
    Bare,
    Graded,
}

impl GroupArg {
    fn group(self) -> Group {
        match self {
            GroupArg::Filtered => Group::Filtered,
            GroupArg::Bare => Group::Bare,
            GroupArg::Graded => Group::Graded,
        }
    }
}

fn parse_window(s: &str) -> Result<Window, String> {
    let (w, e) = s.split_once(',').ok_or("expected w,e")?;
    let w = w.trim().parse::<u32>().map_err(|e| e.to_string())?;
    let e = e.trim().parse::<u32>().map_err(|e| e.to_string())?;
    if w == 0 || w > Window::MAX_W {
        return Err(format!("w must be in 1..={}", Window::MAX_W));
    }
    Ok(Window { w, e })
}

/// A level-one flow document: the cover carrying the Frobenius liftings
/// (level 2) and the graded Higgs bundle on its reduction.
#[derive(Serialize, Deserialize)]
struct FlowJson {
    #[serde(default)]
    schema: Option<String>,
    cover: CoverJson,
    higgs: BundleJson,
}

// ---------------- errors ----------------

struct Failure {
    code: u8,
    kind: &'static str,
    message: String,
}

impl Failure {
    fn input(m: impl Into<String>) -> Failure {
        Failure { code: 1, kind: "input-error", message: m.into() }
    }

    fn verdict(kind: &'static str, m: impl Into<String>) -> Failure {
        Failure { code: 2, kind, message: m.into() }
    }

    fn internal(m: impl Into<String>) -> Failure {
        Failure { code: 3, kind: "internal-error", message: m.into() }
    }
}

fn geo_code(_: &GeoError) -> u8 {
    1
}

fn cech_code(e: &CechError) -> u8 {
    match e {
        CechError::Internal(_) => 3,
        _ => 1,
    }
}

fn deform_code(e: &DeformError) -> u8 {
    match e {
        DeformError::Cech(c) => cech_code(c),
        DeformError::InternalCocycleFailure(_) => 3,
        _ => 1,
    }
}

fn cartier_code(e: &CartierError) -> u8 {
    match e {
        CartierError::NonIntegralTerm { .. } | CartierError::Internal(_) => 3,
        _ => 1,
    }
}

impl From<FlowError> for Failure {
    fn from(e: FlowError) -> Failure {
        let message = e.to_string();
        match &e {
            FlowError::NotInK(_) => Failure::verdict("not-in-k", message),
            FlowError::NotPeriodic(_) => Failure::verdict("not-periodic", message),
            FlowError::NoSolutionWithinBound { .. } => Failure::verdict("no-solution", message),
            FlowError::ExtensionRequired { .. } => Failure::verdict("extension-required", message),
            FlowError::HypothesisFailure(_) => Failure::verdict("hypothesis-failure", message),
            FlowError::Internal(_) => Failure::internal(message),
            FlowError::Cartier(c) if cartier_code(c) == 3 => Failure::internal(message),
            FlowError::Deform(d) if deform_code(d) == 3 => Failure::internal(message),
            FlowError::Cech(c) if cech_code(c) == 3 => Failure::internal(message),
            _ => Failure::input(message),
        }
    }
}

macro_rules! failure_from {
    ($t:ty, $code:expr) => {
        impl From<$t> for Failure {
            fn from(e: $t) -> Failure {
                let code: fn(&$t) -> u8 = $code;
                match code(&e) {
                    3 => Failure::internal(e.to_string()),
                    _ => Failure::input(e.to_string()),
                }
            }
        }
    };
}

failure_from!(GeoError, geo_code);
failure_from!(CechError, cech_code);
failure_from!(DeformError, deform_code);
failure_from!(CartierError, cartier_code);
failure_from!(BundleError, |_| 1);
failure_from!(WittError, |_| 1);

type Out<T> = Result<T, Failure>;

// ---------------- inputs ----------------

enum Doc {
    Cover(CoverJson),
    Bundle(BundleJson),
    Flow(Box<FlowJson>),
}

fn load(path: &PathBuf) -> Out<Doc> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let v: Value = serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    let schema = v.get("schema").and_then(Value::as_str).unwrap_or("").to_string();
    let bad = |e: serde_json::Error| Failure::input(format!("{}: {e}", path.display()));
    match schema.as_str() {
        COVER_SCHEMA => Ok(Doc::Cover(serde_json::from_value(v).map_err(bad)?)),
        BUNDLE_SCHEMA => Ok(Doc::Bundle(serde_json::from_value(v).map_err(bad)?)),
        FLOW_SCHEMA => Ok(Doc::Flow(Box::new(serde_json::from_value(v).map_err(bad)?))),
        other => Err(Failure::input(format!("{}: unknown schema '{other}'", path.display()))),
    }
}

struct Inputs {
    docs: Vec<Doc>,
}

impl Inputs {
    fn read(paths: &[PathBuf]) -> Out<Inputs> {
        Ok(Inputs { docs: paths.iter().map(load).collect::<Out<_>>()? })
    }

    fn cover(&self) -> Out<Arc<Cover>> {
        match self.docs.first() {
            Some(Doc::Cover(c)) => Ok(Arc::new(Cover::from_json(c)?)),
            _ => Err(Failure::input("the first input must be a cover document")),
        }
    }

    fn bundles(&self) -> Vec<&BundleJson> {
        self.docs
            .iter()
            .filter_map(|d| match d {
                Doc::Bundle(b) => Some(b),
                _ => None,
            })
            .collect()
    }

    /// The cover and the bundles on it (base first, then any lifts on the
    /// canonical thickening).
    fn base(&self) -> Out<(Arc<Cover>, Arc<Bundle>)> {
        let cov = self.cover()?;
        let bj = *self.bundles().first().ok_or_else(|| Failure::input("a bundle document is required"))?;
        let b = Bundle::from_json(cov.clone(), bj)?;
        let rep = check_bundle(&b);
        if !rep.ok {
            return Err(Failure::input(format!("bundle: {}", rep.failures.join("; "))));
        }
        Ok((cov, Arc::new(b)))
    }

    fn flow(&self) -> Out<&FlowJson> {
        self.docs
            .iter()
            .find_map(|d| match d {
                Doc::Flow(f) => Some(f.as_ref()),
                _ => None,
            })
            .ok_or_else(|| Failure::input("a flow document is required"))
    }
}

// ---------------- rendering ----------------

fn elem(r: &Ring, e: WittElem) -> Value {
    json!(r.coeffs(e).into_iter().map(|v| v as i64).collect::<Vec<_>>())
}

fn elems(r: &Ring, v: &[WittElem]) -> Value {
    Value::Array(v.iter().map(|&e| elem(r, e)).collect())
}

fn columns(r: &Ring, cols: &[Vec<WittElem>]) -> Value {
    Value::Array(cols.iter().map(|c| elems(r, c)).collect())
}

fn mat(cov: &Cover, i: usize, m: &SMat) -> Value {
    let lr = cov.loc(&[i]).unwrap();
    let var = &cov.charts[i].coord;
    json!((0..m.rows).map(|a| (0..m.cols).map(|b| format_sec(lr, m.get(a, b), var)).collect::<Vec<_>>()).collect::<Vec<_>>())
}

fn per_chart(cov: &Cover, ms: &[SMat]) -> Value {
    let map: BTreeMap<String, Value> = ms.iter().enumerate().map(|(i, m)| (cov.charts[i].id.clone(), mat(cov, i, m))).collect();
    json!(map)
}

fn checks_ok(cs: &[Check]) -> bool {
    cs.iter().all(|c| c.ok)
}

fn report(command: &str, body: Value) -> Value {
    let mut v = json!({ "schema": REPORT_SCHEMA, "command": command });
    if let (Some(o), Value::Object(b)) = (v.as_object_mut(), body) {
        o.extend(b);
    }
    v
}

/// `(report, exit code)`; verdict codes keep their report.
type Outcome = (Value, u8);

// ---------------- commands ----------------

fn validate(inp: &Inputs) -> Out<Outcome> {
    let mut items = Vec::new();
    let mut ok = true;
    let mut cover: Option<Arc<Cover>> = None;
    for d in &inp.docs {
        let (kind, rep) = match d {
            Doc::Cover(c) => {
                let rep = validate_cover_json(c);
                cover = if rep.ok { Cover::from_json(c).ok().map(Arc::new) } else { None };
                ("cover", json!(rep_json(&rep.ok, &rep.failures, &rep.warnings)))
            }
            Doc::Bundle(b) => {
                let Some(cov) = &cover else {
                    return Err(Failure::input("a bundle must follow a valid cover"));
                };
                match Bundle::from_json(cov.clone(), b) {
                    Ok(b) => {
                        let rep = check_bundle(&b);
                        ("bundle", rep_json(&rep.ok, &rep.failures, &rep.warnings))
                    }
                    Err(e) => ("bundle", rep_json(&false, &[e.to_string()], &[])),
                }
            }
            Doc::Flow(f) => match build_flow(f) {
                Ok(fl) => {
                    let rep = verify_flow(&fl);
                    ("flow", rep_json(&rep.ok, &rep.failures, &rep.warnings))
                }
                Err(e) => ("flow", rep_json(&false, &[e.message], &[])),
            },
        };
        ok &= rep["ok"].as_bool().unwrap_or(false);
        items.push(json!({ "kind": kind, "report": rep }));
    }
    Ok((report("validate", json!({ "ok": ok, "items": items })), if ok { 0 } else { 1 }))
}

fn rep_json(ok: &bool, failures: &[String], warnings: &[String]) -> Value {
    json!({ "ok": ok, "failures": failures, "warnings": warnings })
}

fn cohomology(inp: &Inputs, window: Option<Window>, which: ComplexArg, twist: i32) -> Out<Outcome> {
    let (cov, b) = inp.base()?;
    let which = match which {
        ComplexArg::Auto if b.conn.is_some() => ComplexArg::DeRham,
        ComplexArg::Auto if b.higgs.is_some() => ComplexArg::Higgs,
        ComplexArg::Auto => ComplexArg::Coherent,
        w => w,
    };
    let one = Arc::new(Bundle::trivial(cov.clone(), 1));
    let (cx, top) = match which {
        ComplexArg::Coherent | ComplexArg::Auto => (coherent(b, twist), 1),
        ComplexArg::DeRham => (hom_complex(one, b, Variant::Full, false)?, 2),
        ComplexArg::Higgs => (hom_complex(one, b, Variant::Full, true)?, 2),
        ComplexArg::EndDeRham => (end_complex(b, Variant::Full)?, 2),
        ComplexArg::EndFil0 => (end_complex(b, Variant::Fil(0))?, 2),
        ComplexArg::EndQuotient => (end_complex(b, Variant::QuotientC)?, 2),
        ComplexArg::EndHiggs => (end_complex(b, Variant::Gr(0))?, 2),
    };
    let mut h = Hyper::new(cx)?;
    if let Some(w) = window {
        h = h.with_start(w);
    }
    let mut dims = BTreeMap::new();
    let mut classes = BTreeMap::new();
    for n in 0..=top {
        let basis = h.cohomology(n)?;
        dims.insert(n.to_string(), basis.dim);
        let ex = basis.reps.iter().map(|z| h.export(z)).collect::<Result<Vec<_>, _>>()?;
        classes.insert(
            n.to_string(),
            json!({ "window": basis.window, "certificate": basis.certificate, "basis": ex }),
        );
    }
    Ok((report("cohomology", json!({ "complex": h.cx.tag, "dims": dims, "classes": classes })), 0))
}

fn obstruction_json(d: &Deform, g: Group, ob: &Obstruction) -> Out<Value> {
    let h = d.hyper(g)?;
    Ok(json!({
        "obstruction": h.export(&ob.cochain)?,
        "cocycle_checks": ob.checks,
        "vanishes": ob.vanishes(),
    }))
}

fn default_lift(d: &Deform, g: Group) -> Out<Lift> {
    let l = d.local_lifts(g);
    let ob = d.obstruction_of(&l)?;
    d.lift_from_obstruction(&l, &ob)?
        .ok_or_else(|| Failure::verdict("obstructed", format!("{g:?} lift is obstructed")))
}

fn obstruct(inp: &Inputs, kind: ObstructKind) -> Out<Outcome> {
    let (_, b) = inp.base()?;
    let d = Deform::canonical(b)?;
    let (mut body, vanishes) = match kind {
        ObstructKind::Filtered | ObstructKind::GradedHiggs => {
            let g = if matches!(kind, ObstructKind::Filtered) { Group::Filtered } else { Group::Graded };
            let l = d.local_lifts(g);
            let ob = d.obstruction_of(&l)?;
            let mut body = obstruction_json(&d, g, &ob)?;
            if let Some(lift) = d.lift_from_obstruction(&l, &ob)? {
                body["lift"] = json!(lift.bundle.to_json());
            }
            let v = ob.vanishes();
            (body, v)
        }
        ObstructKind::Hodge => {
            let bare = match inp.bundles().get(1) {
                Some(j) => Arc::new(Bundle::from_json(d.high.clone(), j)?),
                None => default_lift(&d, Group::Bare)?.bundle,
            };
            let (ob, hl) = d.obstruction_hodge(bare.clone())?;
            let mut body = obstruction_json(&d, Group::Hodge, &ob)?;
            body["bare"] = json!(bare.to_json());
            if let Some(hl) = hl {
                body["lift"] = json!(hl.filtered()?.to_json());
                body["frames"] = per_chart(&d.high, &hl.frames);
            }
            let v = ob.vanishes();
            (body, v)
        }
    };
    body["verdict"] = json!(if vanishes { "liftable" } else { "obstructed" });
    Ok((report("obstruct", body), if vanishes { 0 } else { 2 }))
}

fn parse_coords(r: &Ring, s: &str, dim: usize) -> Out<Vec<WittElem>> {
    let cs: Vec<CoeffJson> = serde_json::from_str(s).map_err(|e| Failure::input(format!("--coords: {e}")))?;
    if cs.len() != dim {
        return Err(Failure::input(format!("--coords: expected {dim} coordinates, got {}", cs.len())));
    }
    Ok(cs.iter().map(|c| elem_from_json(r, c)).collect())
}

fn lift_arg(d: &Deform, inp: &Inputs, k: usize, g: Group) -> Out<Lift> {
    let j = inp.bundles().get(k).copied().ok_or_else(|| Failure::input(format!("bundle input {} is required", k + 1)))?;
    let l = Lift { group: g, bundle: Arc::new(Bundle::from_json(d.high.clone(), j)?) };
    d.verify_lift(&l)?;
    Ok(l)
}

fn act(inp: &Inputs, g: GroupArg, coords: Option<&str>, seed: u64) -> Out<Outcome> {
    let (_, b) = inp.base()?;
    let g = g.group();
    let d = Deform::canonical(b)?;
    let l = if inp.bundles().len() > 1 { lift_arg(&d, inp, 1, g)? } else { default_lift(&d, g)? };
    let h = d.hyper(g)?;
    let r = h.ring().clone();
    let dim = h.dim(1)?;
    let eps = match coords {
        Some(s) => parse_coords(&r, s, dim)?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..dim).map(|_| r.from_u64(rng.gen_range(0..r.q()))).collect()
        }
    };
    let l2 = d.act(&l, &eps)?;
    d.verify_lift(&l2)?;
    let back = d.torsor_diff(&l, &l2)?;
    let checks = vec![Check { name: "torsor difference recovers the acting element".into(), ok: back == eps }];
    let code = if checks_ok(&checks) { 0 } else { 3 };
    Ok((
        report(
            "act",
            json!({
                "group": format!("{g:?}"),
                "dim": dim,
                "epsilon": elems(&r, &eps),
                "lift": l.bundle.to_json(),
                "result": l2.bundle.to_json(),
                "torsor_checks": checks,
            }),
        ),
        code,
    ))
}

fn diff(inp: &Inputs, g: GroupArg) -> Out<Outcome> {
    let (_, b) = inp.base()?;
    let g = g.group();
    let d = Deform::canonical(b)?;
    let (l1, l2) = (lift_arg(&d, inp, 1, g)?, lift_arg(&d, inp, 2, g)?);
    let c: Cochain = d.torsor_cochain(&l1, &l2)?;
    let h = d.hyper(g)?;
    let r = h.ring().clone();
    let x = d.torsor_diff(&l1, &l2)?;
    let back = d.act(&l1, &x)?;
    let checks = vec![Check {
        name: "acting by the difference gives an isomorphic lift".into(),
        ok: d.torsor_diff(&back, &l2)?.iter().all(|e| e.is_zero()),
    }];
    let code = if checks_ok(&checks) { 0 } else { 3 };
    Ok((
        report(
            "diff",
            json!({
                "group": format!("{g:?}"),
                "difference": h.export(&c)?,
                "coordinates": elems(&r, &x),
                "torsor_checks": checks,
            }),
        ),
        code,
    ))
}

fn les(inp: &Inputs) -> Out<Outcome> {
    let (_, b) = inp.base()?;
    let rep = les_maps(b)?;
    let code = if rep.exact { 0 } else { 3 };
    Ok((report("les", json!(rep)), code))
}

fn ic(inp: &Inputs) -> Out<Outcome> {
    let hi = inp.cover()?;
    let n = hi.level();
    if n < 2 {
        return Err(Failure::input("ic needs the Frobenius cover at level n+1 >= 2"));
    }
    let low = Arc::new(hi.reduce_to(n - 1)?);
    let bs = inp.bundles();
    let ej = bs.first().ok_or_else(|| Failure::input("a graded Higgs bundle is required"))?;
    let e = Bundle::from_json(low.clone(), ej)?;
    let prev = match bs.get(1) {
        Some(j) if n >= 3 => Some(Bundle::from_json(Arc::new(hi.reduce_to(n - 2)?), j)?),
        Some(_) => return Err(Failure::input("a previous de Rham term only applies from level 2 on")),
        None => None,
    };
    let frob = standard_frobenius(hi.clone())?;
    let res = inverse_cartier(&e, prev.as_ref(), &frob)?;
    let terms: Vec<Value> = res
        .terms
        .iter()
        .map(|(&(i, j), &k)| json!({ "i": low.charts[i].id, "j": low.charts[j].id, "terms": k }))
        .collect();
    let code = if checks_ok(&res.checks) { 0 } else { 3 };
    Ok((
        report(
            "ic",
            json!({
                "bundle": res.bundle.to_json(),
                "taylor_terms": terms,
                "checks": res.checks,
                "warnings": res.warnings,
            }),
        ),
        code,
    ))
}

fn build_flow(f: &FlowJson) -> Out<HDFlow> {
    let x2 = Arc::new(Cover::from_json(&f.cover)?);
    if x2.level() != 2 {
        return Err(Failure::input("the flow cover must be at level 2"));
    }
    let x1 = Arc::new(x2.reduce_to(1)?);
    let e = Bundle::from_json(x1, &f.higgs)?;
    let frob = standard_frobenius(x2)?;
    Ok(find_hodge_filtration(&e, &frob)?)
}

fn flow_json(f: &HDFlow) -> Value {
    let cov = &f.derham.cover;
    json!({
        "level": f.level(),
        "higgs": f.higgs.to_json(),
        "derham": f.derham.to_json(),
        "frames": per_chart(cov, &f.frames),
        "frobenius_cover": f.frob.cover.to_json(),
    })
}

fn flow_verify(inp: &Inputs) -> Out<Outcome> {
    let f = build_flow(inp.flow()?)?;
    let rep = verify_flow(&f);
    let code = if rep.ok { 0 } else { 2 };
    Ok((
        report(
            "flow-verify",
            json!({
                "verdict": if rep.ok { "periodic" } else { "not-periodic" },
                "report": rep_json(&rep.ok, &rep.failures, &rep.warnings),
                "flow": flow_json(&f),
            }),
        ),
        code,
    ))
}

fn ordinarity_json(r: &Ring, od: &OrdinarityData) -> Value {
    json!({
        "dim_gr": od.dim_gr,
        "dim_t": od.dim_t,
        "dim_c": od.dim_c,
        "ob0": elems(r, &od.ob0),
        "pi_alpha": columns(r, &od.pi_alpha),
        "pi_beta": columns(r, &od.pi_beta),
        "h_basis": columns(r, &od.h_basis),
        "k_nonempty": od.k_nonempty(),
        "k_point": od.k_point.as_ref().map(|(e, h)| json!({ "epsilon": elems(r, e), "eta": elems(r, h) })),
        "surjective": od.surjective,
        "beta_criterion": od.beta_criterion,
        "checks": od.checks,
    })
}

fn ordinarity(inp: &Inputs) -> Out<Outcome> {
    let f = build_flow(inp.flow()?)?;
    let eng = Engine::new(Arc::new(f), None, None)?;
    let od = ordinarity_check(&eng)?;
    let ok = od.hypotheses_hold();
    let mut body = ordinarity_json(eng.ring1(), &od);
    body["verdict"] = json!(if ok { "ordinary" } else { "not-ordinary" });
    Ok((report("ordinarity", body), if ok { 0 } else { 2 }))
}

fn step_json(r: &Ring, o: &LiftOutcome) -> Value {
    json!({
        "level": o.flow.level(),
        "epsilon": elems(r, &o.epsilon),
        "eta": elems(r, &o.eta),
        "extension_degree": o.extension_degree,
        "defect": elems(r, &o.defect),
        "a_matrix": columns(r, &o.a_matrix),
        "ordinarity": ordinarity_json(r, &o.ordinarity),
        "checks": o.checks,
    })
}

fn flow_lift(inp: &Inputs, target: u32) -> Out<Outcome> {
    let mut f = build_flow(inp.flow()?)?;
    if target < f.level() {
        return Err(Failure::input(format!("--level {target} is below the flow level {}", f.level())));
    }
    let mut steps = Vec::new();
    while f.level() < target {
        let eng = Engine::new(Arc::new(f), None, None)?;
        let o = lift_flow(&eng)?;
        steps.push(step_json(eng.ring1(), &o));
        f = o.flow;
    }
    let rep = verify_flow(&f);
    let code = if rep.ok { 0 } else { 3 };
    Ok((
        report(
            "flow-lift",
            json!({
                "verdict": "lifted",
                "steps": steps,
                "report": rep_json(&rep.ok, &rep.failures, &rep.warnings),
                "flow": flow_json(&f),
            }),
        ),
        code,
    ))
}

fn run(cli: &Cli) -> Out<Outcome> {
    let inp = Inputs::read(&cli.input)?;
    match &cli.cmd {
        Cmd::Validate => validate(&inp),
        Cmd::Cohomology { complex, twist } => cohomology(&inp, cli.window, *complex, *twist),
        Cmd::Obstruct { kind } => obstruct(&inp, *kind),
        Cmd::Act { group, coords } => act(&inp, *group, coords.as_deref(), cli.seed),
        Cmd::Diff { group } => diff(&inp, *group),
        Cmd::Les => les(&inp),
        Cmd::Ic => ic(&inp),
        Cmd::FlowVerify => flow_verify(&inp),
        Cmd::FlowLift => flow_lift(&inp, cli.level.unwrap_or(2)),
        Cmd::Ordinarity => ordinarity(&inp),
    }
}

fn command_name(c: &Cmd) -> &'static str {
    match c {
        Cmd::Validate => "validate",
        Cmd::Cohomology { .. } => "cohomology",
        Cmd::Obstruct { .. } => "obstruct",
        Cmd::Act { .. } => "act",
        Cmd::Diff { .. } => "diff",
        Cmd::Les => "les",
        Cmd::Ic => "ic",
        Cmd::FlowVerify => "flow-verify",
        Cmd::FlowLift => "flow-lift",
        Cmd::Ordinarity => "ordinarity",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            if code != 0 {
                let rep = report("", json!({ "verdict": "input-error", "message": e.kind().to_string() }));
                print!("{}", serde_json::to_string_pretty(&rep).expect("reports serialize") + "\n");
            }
            return ExitCode::from(code);
        }
    };
    let (rep, code) = match run(&cli) {
        Ok(x) => x,
        Err(f) => (report(command_name(&cli.cmd), json!({ "verdict": f.kind, "message": f.message })), f.code),
    };
    let text = serde_json::to_string_pretty(&rep).expect("reports serialize") + "\n";
    match &cli.out {
        Some(p) => {
            if let Err(e) = std::fs::write(p, &text) {
                eprintln!("hdflow: {}: {e}", p.display());
                return ExitCode::from(1);
            }
        }
        None => print!("{text}"),
    }
    if code != 0 {
        if let Some(m) = rep.get("message").and_then(Value::as_str) {
            eprintln!("hdflow: {m}");
        }
    }
    ExitCode::from(code)
}
