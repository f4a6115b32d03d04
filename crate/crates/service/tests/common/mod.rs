#![allow(dead_code)]

use oak_core::decision::{Action, CompareOp, Threshold};
use oak_core::extract::{Catalog, CatalogDefect, RuleSpec};
use oak_service::{OakService, ServiceConfig};
use tempfile::TempDir;

pub fn config(dir: &TempDir) -> ServiceConfig {
    let mut cfg = ServiceConfig::for_data_dir(dir.path());
    cfg.autosave = false;
    cfg
}

pub fn service() -> (TempDir, OakService) {
    let dir = tempfile::tempdir().unwrap();
    let svc = OakService::open(config(&dir)).unwrap();
    (dir, svc)
}

/// Image-like bytes whose grayscale histogram is concentrated around `level`.
pub fn blob(level: u8, len: usize) -> Vec<u8> {
    (0..len).map(|i| level.wrapping_add((i % 7) as u8)).collect()
}

pub fn depth_rule(limit: f64) -> Vec<RuleSpec> {
    vec![
        RuleSpec {
            metric: "depth".into(),
            op: CompareOp::Le,
            threshold: Threshold::Single(limit),
            action: Action::Conform,
            priority: 1,
        },
        RuleSpec {
            metric: "depth".into(),
            op: CompareOp::Gt,
            threshold: Threshold::Single(limit),
            action: Action::Scrap,
            priority: 2,
        },
    ]
}

pub fn defect(id: &str, descriptions: &[&str], images: Vec<String>) -> CatalogDefect {
    CatalogDefect {
        id: id.into(),
        name: id.into(),
        category: "surface".into(),
        machines: vec!["rolling mill".into()],
        descriptions: descriptions.iter().map(|d| d.to_string()).collect(),
        images,
        measurement_instruction: format!("Measure the depth of the {id} in mm."),
        rules: depth_rule(0.2),
    }
}

/// Three defects with one stored image each. Returns the image ids in
/// defect order.
pub fn seed_small_catalog(svc: &OakService) -> Vec<String> {
    let ids: Vec<String> = [20u8, 120, 220]
        .iter()
        .map(|l| svc.put_media(&blob(*l, 512), "image/raw").unwrap().media_id.to_string())
        .collect();
    let catalog = Catalog {
        defects: vec![
            defect("dent", &["shallow recessed area pressed into the plate"], vec![ids[0].clone()]),
            defect("scratch", &["long straight linear mark along the sheet"], vec![ids[1].clone()]),
            defect("stain", &["dark round spot on the surface"], vec![ids[2].clone()]),
        ],
    };
    let report = svc.ingest_catalog(&catalog).unwrap();
    assert!(report.warnings.is_empty(), "{:?}", report.warnings);
    ids
}
