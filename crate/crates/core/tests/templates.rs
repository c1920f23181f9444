use std::path::Path;
use std::sync::Arc;

use autochain::assets;
use autochain::model::{load_instance, load_metamodel, InstanceModel};
use autochain::template::{parse_template, render, GeneratedFileSet};

fn aeb() -> InstanceModel {
    let mm = Arc::new(load_metamodel(assets::EVENT_CHAIN_METAMODEL).unwrap());
    load_instance(assets::AEB_INSTANCE, mm).unwrap()
}

fn check_goldens(out: &GeneratedFileSet) {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let bless = std::env::var_os("BLESS").is_some();
    for f in &out.files {
        let path = dir.join(&f.name);
        if bless {
            std::fs::write(&path, &f.content).unwrap();
            continue;
        }
        let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(f.content, want, "{} differs from its golden", f.name);
    }
}

#[test]
fn ros_nodes_match_goldens() {
    let out = render(&parse_template(assets::ROS_NODE_TEMPLATE).unwrap(), &aeb()).unwrap();
    assert_eq!(
        out.names(),
        [
            "objectdetection_node.py",
            "ttc_calculation_node.py",
            "braking_decision_node.py",
            "carla_vehicle_control_node.py"
        ]
    );
    assert!(out.unfiled.trim().is_empty());
    check_goldens(&out);
}

#[test]
fn wiring_manifest_matches_golden_and_parses() {
    let out = render(&parse_template(assets::WIRING_MANIFEST_TEMPLATE).unwrap(), &aeb()).unwrap();
    assert_eq!(out.names(), ["wiring_manifest.json"]);
    let json: serde_json::Value = serde_json::from_str(out.get("wiring_manifest.json").unwrap()).unwrap();
    let nodes = json["nodes"].as_array().unwrap();
    assert_eq!(nodes.len(), 4);
    assert_eq!(nodes[1]["name"], "TTC_Calculation");
    assert_eq!(nodes[1]["subscriptions"].as_array().unwrap().len(), 2);
    check_goldens(&out);
}
