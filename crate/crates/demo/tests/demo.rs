use hyperlocal_demo::{compare_json, curves_json, summary_json};
use serde_json::Value;

fn json(s: Result<String, String>) -> Value {
    serde_json::from_str(&s.unwrap()).unwrap()
}

#[test]
fn summary_counts_every_period() {
    let v = json(summary_json(r#"{"periods": 10, "tasks_per_period": 7, "seed": 2}"#));
    let workers = v["workers"].as_array().unwrap();
    let tasks = v["tasks"].as_array().unwrap();
    assert_eq!(workers.len(), 10);
    assert!(tasks.iter().all(|t| t.as_u64() == Some(7)));
    assert!(v["distinct_workers"].as_u64().unwrap() > 0);
}

#[test]
fn empty_params_use_defaults() {
    let v = json(summary_json(""));
    assert_eq!(v["workers"].as_array().unwrap().len(), 28);
}

#[test]
fn comparison_traces_are_cumulative_and_within_budget() {
    let v = json(compare_json(r#"{"periods": 8, "tasks_per_period": 40, "budget": 24}"#));
    let strategies = v["strategies"].as_array().unwrap();
    let names: Vec<&str> = strategies.iter().map(|s| s["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["Equal", "Naive", "Adapt"]);
    for s in strategies {
        let c: Vec<u64> = s["cumulative"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).collect();
        assert_eq!(c.len(), 8);
        assert!(c.windows(2).all(|w| w[0] <= w[1]));
        let spent: u64 = s["spent"].as_array().unwrap().iter().map(|x| x.as_u64().unwrap()).sum();
        assert!(spent <= 24);
    }
    assert_eq!(compare_json(r#"{"periods": 8, "budget": 24}"#), compare_json(r#"{"periods": 8, "budget": 24}"#));
}

#[test]
fn curves_have_the_expected_shapes() {
    let v = json(curves_json(r#"{"skew": 1.0, "bins": 4, "samples": 5}"#));
    let f = |k: &str| -> Vec<f64> { v[k].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect() };
    assert_eq!(f("x"), [0.0, 0.25, 0.5, 0.75, 1.0]);
    assert_eq!(f("binary"), [1.0; 5]);
    assert_eq!(f("linear"), [1.0, 0.75, 0.5, 0.25, 0.0]);
    assert_eq!(f("zipf"), [1.0, 0.5, 1.0 / 3.0, 0.25, 0.2]);
}

#[test]
fn bad_input_is_an_error_message() {
    assert!(compare_json(r#"{"heuristic": "psychic"}"#).unwrap_err().contains("psychic"));
    assert!(curves_json(r#"{"skew": -1}"#).is_err());
    assert!(summary_json("{not json").unwrap_err().starts_with("bad parameters"));
    assert!(summary_json(r#"{"amplitude": 2.0}"#).is_err());
}
