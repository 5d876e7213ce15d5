use std::fs;
use std::path::Path;

use serde_json::{json, Value};

fn validator(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join(format!("../../docs/schemas/{name}.schema.json"));
    jsonschema::validator_for(&serde_json::from_str::<Value>(&fs::read_to_string(path).unwrap()).unwrap()).unwrap()
}

#[test]
fn schemas_reject_malformed_documents() {
    let result = validator("intersection_result");
    let good = json!({
        "mode": "paper", "point": [0.0, 0.0, 0.0], "sigma0": 0.0, "redundancy": 1, "ray_count": 2,
        "covariance": [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0]], "residuals": [0.0, 0.0, 0.0, 0.0]
    });
    assert!(result.is_valid(&good));
    for (key, bad) in [("mode", json!("svd")), ("point", json!([0.0, 0.0])), ("sigma0", json!(-1.0)), ("redundancy", json!(0))] {
        let mut doc = good.clone();
        doc[key] = bad;
        assert!(!result.is_valid(&doc), "{key}");
    }

    let rays = validator("rays_file");
    assert!(!rays.is_valid(&json!({"rays": [{"origin": [0, 0, 0], "direction": [0, 0, 1]}]})));
    assert!(rays.is_valid(&json!({"rays": [
        {"origin": [0, 0, 0], "direction": [0, 0, 1]},
        {"origin": [1, 0, 0], "direction": [0, 0, 1]}
    ]})));

    let session = validator("session_document");
    assert!(!session.is_valid(&json!({"format": "other/1", "checksum": "00", "session": {}})));
}
