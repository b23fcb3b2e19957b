use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include "manova.h"

int main(void) {
    ManovaEdges e;
    if (manova_support_edges(2.0, 2.0, &e) != ManovaStatus_Ok) return 1;
    if (fabs(e.lambda_minus - 0.0669872981077807) > 1e-12) return 2;

    ManovaSolver *solver = NULL;
    if (manova_solver_new(2.0, 2.0, 0.0, &solver) != ManovaStatus_Ok) return 3;
    ManovaComplex m;
    if (manova_solver_solve(solver, 1.0, 0.1, &m) != ManovaStatus_Ok) return 4;
    manova_solver_free(solver);
    if (!(m.im > 0.0)) return 5;

    if (manova_support_edges(0.5, 2.0, &e) != ManovaStatus_InvalidParams) return 6;
    if (manova_last_error() == NULL) return 7;
    printf("%.12f\n", e.lambda_minus);
    return 0;
}
"#;

fn target_dir() -> PathBuf {
    // tests run from <target>/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

/// Needs a C compiler and `cargo build -p manova-ffi` for the same profile first.
#[test]
#[ignore = "needs cc and a prior cargo build of the static library"]
fn c_program_links_against_the_static_library() {
    let lib = target_dir().join("libmanova_ffi.a");
    assert!(lib.exists(), "build the static library first: {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("smoke.c");
    let bin = dir.path().join("smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(include)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}
