//! Statistics checked against frozen tables from an independent
//! implementation (see `oracle/gen_oracles.py`).

use refless_core::stats::{fisher_weighted_average, paired_t_test, pearson, rank_sum_test, williams_test, Tails};
use serde_json::Value;

const TOL: f64 = 1e-6;

fn oracle() -> Value {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/stats_oracle.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL || (a.is_infinite() && a == b)
}

#[test]
fn pearson_matches_oracle() {
    let cases = oracle()["pearson"].as_array().unwrap().clone();
    assert!(cases.len() >= 20);
    for c in &cases {
        let r = pearson(&floats(&c["x"]), &floats(&c["y"])).unwrap();
        assert!(close(r, c["r"].as_f64().unwrap()), "{c}: got {r}");
    }
}

#[test]
fn fisher_matches_oracle() {
    let cases = oracle()["fisher"].as_array().unwrap().clone();
    assert!(cases.len() >= 20);
    for c in &cases {
        let pairs: Vec<(f64, f64)> = floats(&c["r"]).into_iter().zip(floats(&c["w"])).collect();
        let avg = fisher_weighted_average(&pairs).unwrap();
        assert!(close(avg, c["avg"].as_f64().unwrap()), "{c}: got {avg}");
    }
}

#[test]
fn williams_matches_oracle() {
    let cases = oracle()["williams"].as_array().unwrap().clone();
    assert!(cases.len() >= 20);
    for c in &cases {
        let (r1, r2, r12) = (c["r1h"].as_f64().unwrap(), c["r2h"].as_f64().unwrap(), c["r12"].as_f64().unwrap());
        let n = c["n"].as_u64().unwrap() as usize;
        let one = williams_test(r1, r2, r12, n, Tails::One).unwrap();
        let two = williams_test(r1, r2, r12, n, Tails::Two).unwrap();
        assert!(close(one.t, c["t"].as_f64().unwrap()), "{c}: t {}", one.t);
        assert!(close(one.p, c["p_one"].as_f64().unwrap()), "{c}: p {}", one.p);
        assert!(close(two.p, c["p_two"].as_f64().unwrap()), "{c}: p2 {}", two.p);
    }
}

#[test]
fn rank_sum_matches_oracle() {
    let cases = oracle()["ranksum"].as_array().unwrap().clone();
    assert!(cases.len() >= 20);
    for c in &cases {
        let res = rank_sum_test(&floats(&c["a"]), &floats(&c["b"])).unwrap();
        assert_eq!(res.exact, c["exact"].as_bool().unwrap(), "{c}");
        assert!(close(res.w, c["w"].as_f64().unwrap()), "{c}: w {}", res.w);
        assert!(close(res.p, c["p"].as_f64().unwrap()), "{c}: p {}", res.p);
    }
}

#[test]
fn paired_t_matches_oracle() {
    let cases = oracle()["paired_t"].as_array().unwrap().clone();
    assert!(cases.len() >= 20);
    for c in &cases {
        let res = paired_t_test(&floats(&c["a"]), &floats(&c["b"])).unwrap();
        assert!(close(res.t, c["t"].as_f64().unwrap()), "{c}: t {}", res.t);
        assert!(close(res.p, c["p"].as_f64().unwrap()), "{c}: p {}", res.p);
    }
}

#[test]
fn worked_values() {
    let w = williams_test(0.9, 0.8, 0.7, 12, Tails::One).unwrap();
    assert!((w.t - 1.003_413_867_144_211_9).abs() < 1e-9);
    assert!((w.p - 0.170_937_311_081_104_94).abs() < 1e-9);
    let r = pearson(&[1.0, 2.0, 3.0, 4.0], &[1.2, 1.9, 3.3, 3.9]).unwrap();
    assert!((r - 0.987_496_110_544_966_7).abs() < 1e-12);
    let avg = fisher_weighted_average(&[(0.8, 8.0), (0.9, 16.0)]).unwrap();
    assert!((avg - 0.873_505_474_753_637_5).abs() < 1e-12);
}
