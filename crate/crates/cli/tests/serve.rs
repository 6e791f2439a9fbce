mod common;

use std::fs;

use dimnet_cli::{resolve_path, ServeError, StaticServer};
use proptest::prelude::*;

use common::http_get;

fn bundle() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::create_dir(dir.path().join("networks")).unwrap();
    fs::write(dir.path().join("index.html"), "<!doctype html>\n").unwrap();
    fs::write(dir.path().join("manifest.json"), "{\"networks\":[]}\n").unwrap();
    fs::write(
        dir.path().join("networks/q__org.json"),
        "{\"network\":{}}\n",
    )
    .unwrap();
    dir
}

#[test]
fn serves_files_and_refuses_traversal() {
    let dir = bundle();
    let handle = StaticServer::bind(dir.path(), ("127.0.0.1", 0))
        .unwrap()
        .spawn();
    let addr = handle.local_addr();

    let (status, body) = http_get(addr, "/networks/q__org.json");
    assert_eq!(status, 200);
    assert_eq!(
        body,
        fs::read(dir.path().join("networks/q__org.json")).unwrap()
    );
    let (status, body) = http_get(addr, "/");
    assert_eq!(
        (status, body.as_slice()),
        (200, b"<!doctype html>\n".as_slice())
    );
    assert_eq!(http_get(addr, "/../etc/hosts").0, 404);
    assert_eq!(http_get(addr, "/%2e%2e/%2e%2e/etc/hosts").0, 404);
    assert_eq!(http_get(addr, "/nope.json").0, 404);
}

#[test]
fn bind_failures_are_reported() {
    let dir = bundle();
    let first = StaticServer::bind(dir.path(), ("127.0.0.1", 0)).unwrap();
    let port = first.local_addr().port();
    assert!(matches!(
        StaticServer::bind(dir.path(), ("127.0.0.1", port)),
        Err(ServeError::Bind { .. })
    ));
    let empty = tempfile::tempdir().unwrap();
    assert!(matches!(
        StaticServer::bind(empty.path(), ("127.0.0.1", 0)),
        Err(ServeError::NotABundle { .. })
    ));
}

fn segment() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("..".to_string()),
        Just("%2e%2e".to_string()),
        Just("%2E.".to_string()),
        Just(".".to_string()),
        Just("".to_string()),
        Just("networks".to_string()),
        Just("etc".to_string()),
        Just("%2f".to_string()),
        Just("%5c".to_string()),
        Just("..%5c..".to_string()),
        "[a-z._%0-9]{1,6}",
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn resolved_paths_stay_inside_the_root(segments in prop::collection::vec(segment(), 0..8)) {
        let dir = bundle();
        let root = dir.path().canonicalize().unwrap();
        let target = format!("/{}", segments.join("/"));
        if let Some(path) = resolve_path(&root, &target) {
            prop_assert!(path.starts_with(&root), "{target} -> {path:?}");
            prop_assert!(path.is_file());
        }
    }
}
