use std::path::Path;

use rvss_core::config::CpuConfig;
use rvss_core::isa::IsaSet;

fn shipped() -> Vec<(String, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    files.into_iter().map(|p| (p.display().to_string(), std::fs::read_to_string(&p).unwrap())).collect()
}

#[test]
fn shipped_configs_validate_and_round_trip() {
    let isa = IsaSet::shared_default();
    let configs = shipped();
    assert!(configs.len() >= 3);
    for (path, text) in configs {
        let config = CpuConfig::from_json(&text).unwrap_or_else(|e| panic!("{path}: {e}"));
        assert_eq!(config.validate(&isa), vec![], "{path}");
        assert_eq!(CpuConfig::from_json(&config.to_json()).unwrap(), config, "{path}");
    }
}

#[test]
fn default_file_matches_builtin() {
    let text = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/default.json")).unwrap();
    assert_eq!(CpuConfig::from_json(&text).unwrap(), CpuConfig::default());
    assert_eq!(text.trim_end(), CpuConfig::default().to_json());
}

#[test]
fn schema_errors_name_the_field() {
    let mut value: serde_json::Value = serde_json::from_str(&CpuConfig::default().to_json()).unwrap();
    value.as_object_mut().unwrap().remove("robSize");
    let err = CpuConfig::from_json(&value.to_string()).unwrap_err();
    assert!(err.message.contains("robSize"), "{err}");
    let mut value: serde_json::Value = serde_json::from_str(&CpuConfig::default().to_json()).unwrap();
    value["turbo"] = true.into();
    let err = CpuConfig::from_json(&value.to_string()).unwrap_err();
    assert!(err.message.contains("turbo"), "{err}");
}
