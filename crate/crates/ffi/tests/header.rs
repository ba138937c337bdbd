//! The generated header is current and usable from C.

use std::path::{Path, PathBuf};
use std::process::Command;

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/mapber.h")
}

#[test]
fn declares_every_export() {
    let h = std::fs::read_to_string(header()).unwrap();
    let src =
        std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|l| l.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 20, "{exports:?}");
    for name in exports {
        let declared = h.contains(&format!(" {name}(")) || h.contains(&format!("*{name}("));
        assert!(declared, "{name} missing from header");
    }
    for ty in [
        "typedef struct MapberModel MapberModel;",
        "typedef struct MapberBounds MapberBounds;",
    ] {
        assert!(h.contains(ty), "{ty}");
    }
    assert!(h.contains("MAPBER_STATUS_OK = 0"));
}

/// Directory holding the uplifted static library (`target/<profile>`).
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_and_runs() {
    let lib = artifact_dir().join("libmapber_ffi.a");
    if Command::new("cc").arg("--version").output().is_err() || !lib.exists() {
        eprintln!("skipping: no C compiler or no {}", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "mapber.h"
int main(void) {
    MapberModel *m = NULL;
    if (mapber_model_new(1.0, 0.1, &m) != MAPBER_STATUS_OK) return 2;
    double t0 = 0.0;
    if (mapber_theta0(m, &t0) != MAPBER_STATUS_OK) return 3;
    double bad = 0.0;
    if (mapber_ell(m, 2.0, &bad) != MAPBER_STATUS_DOMAIN) return 4;
    char msg[128];
    if (mapber_last_error_message(msg, sizeof msg) == 0) return 5;
    mapber_model_free(m);
    printf("%.17g\n", t0);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("prog");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&exe)
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm"])
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status);
    let t0: f64 = String::from_utf8(out.stdout)
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    let p = mapber::ModelParams::new(1.0, 0.1).unwrap();
    assert_eq!(t0, mapber::bounds::theta0(p).unwrap());
}
