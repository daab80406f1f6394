use std::path::Path;
use std::process::Command;

use axum::body::Body;
use axum::http::{header, Request};
use http_body_util::BodyExt;
use rvss_cli::{parse_inline_array, run};
use rvss_core::asm::ArrayDataType;
use rvss_core::config::CpuConfig;
use serde_json::{json, Value};
use tower::ServiceExt;

struct Files(tempfile::TempDir);

impl Files {
    fn new() -> Self {
        Self(tempfile::tempdir().unwrap())
    }

    fn write(&self, name: &str, contents: impl AsRef<[u8]>) -> String {
        let path = self.0.path().join(name);
        std::fs::write(&path, contents).unwrap();
        path.to_string_lossy().into_owned()
    }

    fn path(&self, name: &str) -> String {
        self.0.path().join(name).to_string_lossy().into_owned()
    }
}

fn invoke(args: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = run(std::iter::once("rvss").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json_report(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    let (code, out, err) = invoke(&all);
    assert_eq!(code, 0, "{err}");
    serde_json::from_str(&out).unwrap()
}

#[test]
fn inline_array_forms() {
    let a = parse_inline_array("arr:word:16=1,-2,3").unwrap();
    assert_eq!((a.data_type, a.alignment, a.values), (ArrayDataType::Word, Some(16), Some(vec![1, -2, 3])));
    let b = parse_inline_array("z:byte=fill:0:32").unwrap();
    assert_eq!((b.fill, b.count), (Some(0), Some(32)));
    let c = parse_inline_array("r:half=random:9:4").unwrap();
    assert_eq!((c.random_seed, c.count), (Some(9), Some(4)));
    assert!(parse_inline_array("nameonly").is_err());
    assert!(parse_inline_array("a:quad=1").is_err());
}

#[test]
fn arrays_images_and_dumps() {
    let files = Files::new();
    let cpu = files.write("cpu.json", CpuConfig::default().to_json());
    let program = files.write("p.s", "la a0, arr\nlw a1, 4(a0)\nli a2, 4000\nlbu a3, 0(a2)\nsw a1, 8(a0)\n");
    let image = files.write("image.csv", "address,byte\n4000,77\n");
    let dump = files.path("out.csv");
    let report = json_report(&["--program", &program, "--cpu", &cpu, "--memory", "arr:word:16=10,20,30", "--memory", &image, "--dump-memory", &dump, "--verbosity", "1"]);
    assert_eq!(report["registers"][11]["value"], 20);
    assert_eq!(report["registers"][13]["value"], 77);
    let dumped = std::fs::read_to_string(&dump).unwrap();
    assert!(dumped.starts_with("address,byte\n") && dumped.contains("4000,77\n"));

    let bin = files.path("out.bin");
    invoke(&["--program", &program, "--cpu", &cpu, "--memory", "arr:word=1,2,3", "--dump-memory", &bin]);
    assert_eq!(std::fs::metadata(&bin).unwrap().len(), CpuConfig::default().memory_capacity as u64);

    let arrays = files.write("arrays.json", json!([{ "name": "arr", "dataType": "word", "fill": 20, "count": 3 }]).to_string());
    let report = json_report(&["--program", &program, "--cpu", &cpu, "--memory", &arrays, "--verbosity", "1"]);
    assert_eq!(report["registers"][11]["value"], 20);
}

#[test]
fn verbosity_levels_and_text() {
    let files = Files::new();
    let cpu = files.write("cpu.json", CpuConfig::default().to_json());
    let program = files.write("p.s", "li a0, 7\ndiv a1, a0, zero\n");
    let quiet = json_report(&["--program", &program, "--cpu", &cpu]);
    assert!(quiet.get("registers").is_none() && quiet.get("log").is_none());
    let loud = json_report(&["--program", &program, "--cpu", &cpu, "--verbosity", "2"]);
    assert!(loud["log"].as_array().is_some_and(|l| !l.is_empty()));
    let (code, text, _) = invoke(&["--program", &program, "--cpu", &cpu, "--verbosity", "1"]);
    assert_eq!(code, 0);
    assert!(text.contains("IPC") && text.contains("x10/a0"));
    let (code, _, _) = invoke(&["--program", &program, "--cpu", &cpu, "--verbosity", "3"]);
    assert_eq!(code, 1);
}

#[test]
fn config_errors_are_input_errors() {
    let files = Files::new();
    let program = files.write("p.s", "nop\n");
    let cpu = files.write("cpu.json", r#"{"name": "x"}"#);
    let (code, _, err) = invoke(&["--program", &program, "--cpu", &cpu]);
    assert_eq!(code, 1);
    assert!(err.contains("robSize") || err.contains("missing field"), "{err}");
    let mut zero = CpuConfig::default();
    zero.rob_size = 0;
    let cpu = files.write("zero.json", zero.to_json());
    let (code, _, err) = invoke(&["--program", &program, "--cpu", &cpu]);
    assert_eq!(code, 1);
    assert!(err.contains("robSize"), "{err}");
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(invoke(&["--help"]).0, 0);
    assert_eq!(invoke(&["--version"]).0, 0);
    let (code, _, err) = invoke(&["--program", "p.s", "--cpu", "c.json", "--gcc", "cc"]);
    assert_eq!(code, 1, "{err}");
}

#[test]
fn cli_and_server_agree_on_statistics() {
    let files = Files::new();
    let config = CpuConfig::default();
    let cpu = files.write("cpu.json", config.to_json());
    let source = include_str!("../../core/samples/linked_list.s");
    let program = files.write("ll.s", source);
    let report = json_report(&["--program", &program, "--cpu", &cpu]);

    let body = json!({ "config": config, "program": source, "tick": -1 }).to_string();
    let runtime = tokio::runtime::Runtime::new().unwrap();
    let response: Value = runtime.block_on(async {
        let app = rvss_server::router(rvss_server::ServerConfig::default());
        let request = Request::post("/api/simulate").header(header::CONTENT_TYPE, "application/json").body(Body::from(body)).unwrap();
        let bytes = app.oneshot(request).await.unwrap().into_body().collect().await.unwrap().to_bytes();
        serde_json::from_slice(&bytes).unwrap()
    });
    assert_eq!(report["stats"], response["stats"]);
    assert_eq!(report["cycle"], response["cycle"]);
}

#[test]
fn c_source_is_compiled_then_run() {
    if !Command::new("clang").arg("--version").output().is_ok_and(|o| o.status.success()) {
        eprintln!("clang not found; skipping");
        return;
    }
    let files = Files::new();
    let cpu = files.write("cpu.json", CpuConfig::default().to_json());
    let c = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/compiler/sum.c");
    let c = c.to_string_lossy();
    for opt in ["-O0", "O2"] {
        let report = json_report(&["--c-source", &c, "--cpu", &cpu, "--entry", "main", "--opt", opt, "--verbosity", "1"]);
        assert_eq!(report["registers"][10]["value"], 39, "{opt}");
    }
    let broken = files.write("broken.c", "int main(void) { return ; }}\n");
    let (code, _, err) = invoke(&["--c-source", &broken, "--cpu", &cpu]);
    assert_eq!(code, 1);
    assert!(err.contains("error"), "{err}");
}
