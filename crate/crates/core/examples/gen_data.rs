//! Regenerates the bundled input corpus: `cargo run --example gen_data -- <dir>`.

use std::collections::BTreeMap;
use std::sync::Arc;

use hdflow::bundle::{line_bundle_p1, Bundle};
use hdflow::geometry::Cover;
use hdflow::samples::{direct_sum, f9, graded_higgs_p1, legendre_cover, legendre_higgs, line_bundle_log};
use hdflow::smat::SMat;
use hdflow::witt::{Ring, WittElem};
use serde_json::{json, Value};

fn write(dir: &str, name: &str, v: &Value) {
    let text = serde_json::to_string_pretty(v).unwrap() + "\n";
    std::fs::write(format!("{dir}/{name}"), text).unwrap();
}

fn flow_doc(x2: &Cover, e: &Bundle) -> Value {
    json!({ "schema": "hdflow.flow/1", "cover": x2.to_json(), "higgs": e.to_json() })
}

fn legendre(dir: &str, tag: &str, r2: &Ring, lambda: WittElem) {
    let x2 = legendre_cover(r2, lambda).unwrap();
    let x1 = Arc::new(x2.reduce_to(1).unwrap());
    let e = legendre_higgs(x1, r2.reduce_level(lambda, 1).unwrap()).unwrap();
    write(dir, &format!("legendre_{tag}_cover2.json"), &json!(x2.to_json()));
    write(dir, &format!("legendre_{tag}_higgs.json"), &json!(e.to_json()));
    write(dir, &format!("flow_legendre_{tag}.json"), &flow_doc(&x2, &e));
}

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "data".into());
    let r1 = f9(1);
    let p1 = Arc::new(Cover::p1(&r1, &[r1.zero()], true).unwrap());
    write(&dir, "p1_cover.json", &json!(p1.to_json()));
    write(&dir, "o_minus_2.json", &json!(line_bundle_p1(p1.clone(), -2).unwrap().to_json()));

    // O(1) ⊕ O(−1) with log connections and Fil¹ = O(1)
    let parts = [line_bundle_log(p1.clone(), 1, r1.zero()).unwrap(), line_bundle_log(p1.clone(), -1, r1.zero()).unwrap()];
    let fil = direct_sum(&parts).unwrap().with_weights(vec![1, 0], false);
    write(&dir, "filtered_sum.json", &json!(fil.to_json()));

    let mut theta = BTreeMap::new();
    theta.insert((1, 0), vec![1]);
    let nil = graded_higgs_p1(p1.clone(), &[0, 0], &[1, 0], &theta).unwrap();
    write(&dir, "higgs_nilpotent.json", &json!(nil.to_json()));

    let r2 = f9(2);
    let x2 = Cover::p1(&r2, &[r2.zero()], true).unwrap();
    let x1 = Arc::new(x2.reduce_to(1).unwrap());
    let triv = graded_higgs_p1(x1.clone(), &[0], &[0], &BTreeMap::new()).unwrap();
    write(&dir, "flow_trivial.json", &flow_doc(&x2, &triv));
    let t = Bundle::trivial(x1.clone(), 2);
    let zero = (0..2).map(|_| SMat::zeros(2, 2)).collect();
    let tz = Bundle::new(x1, 2, t.trans.clone(), None, Some(zero), vec![1, 0], true).unwrap();
    write(&dir, "flow_theta_zero.json", &flow_doc(&x2, &tz));

    legendre(&dir, "supersingular", &r2, r2.neg(r2.one()));
    legendre(&dir, "ordinary", &r2, r2.gen());
}
